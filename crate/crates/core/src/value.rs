//! Dynamically typed latent values.
//!
//! Strategies nest to arbitrary depth and each level introduces its own
//! auxiliary variables (particle sets, ancestor indices, merge sequences,
//! nested traces). All of them are carried as [`Value`] trees so that one
//! recursive estimator implementation serves every level.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

/// A latent value, auxiliary variable or trace.
///
/// Reals compare and hash by bit pattern so values can key hash maps when
/// exact outcome laws are aggregated.
#[derive(Clone, Debug)]
pub enum Value {
    Unit,
    Int(i64),
    Real(f64),
    List(Vec<Value>),
}

impl Value {
    pub fn index(i: usize) -> Self {
        Value::Int(i as i64)
    }

    pub fn list<I: IntoIterator<Item = Value>>(items: I) -> Self {
        Value::List(items.into_iter().collect())
    }

    pub fn pair(a: Value, b: Value) -> Self {
        Value::List(vec![a, b])
    }

    pub fn reals(xs: &[f64]) -> Self {
        Value::List(xs.iter().copied().map(Value::Real).collect())
    }

    pub fn indices(xs: &[usize]) -> Self {
        Value::List(xs.iter().copied().map(Value::index).collect())
    }

    pub fn as_int(&self) -> i64 {
        match self {
            Value::Int(i) => *i,
            other => panic!("expected Int, found {other}"),
        }
    }

    pub fn as_index(&self) -> usize {
        let i = self.as_int();
        usize::try_from(i).unwrap_or_else(|_| panic!("expected non-negative index, found {i}"))
    }

    pub fn as_real(&self) -> f64 {
        match self {
            Value::Real(x) => *x,
            Value::Int(i) => *i as f64,
            other => panic!("expected Real, found {other}"),
        }
    }

    pub fn as_list(&self) -> &[Value] {
        match self {
            Value::List(items) => items,
            other => panic!("expected List, found {other}"),
        }
    }

    /// Element `i` of a list value.
    pub fn at(&self, i: usize) -> &Value {
        &self.as_list()[i]
    }

    pub fn to_reals(&self) -> Vec<f64> {
        self.as_list().iter().map(Value::as_real).collect()
    }

    pub fn to_indices(&self) -> Vec<usize> {
        self.as_list().iter().map(Value::as_index).collect()
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Unit => 0,
            Value::Int(_) => 1,
            Value::Real(_) => 2,
            Value::List(_) => 3,
        }
    }

    /// Equality of reals up to a relative tolerance, structural elsewhere.
    pub fn approx_eq(&self, other: &Value, rel_tol: f64) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => {
                a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0)
            }
            (Value::List(a), Value::List(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y, rel_tol))
            }
            _ => self == other,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Unit, Value::Unit) => Ordering::Equal,
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::List(a), Value::List(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Unit => {}
            Value::Int(i) => i.hash(state),
            Value::Real(x) => x.to_bits().hash(state),
            Value::List(items) => items.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(x) => write!(f, "{x}"),
            Value::List(items) => {
                write!(f, "[")?;
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::index(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn reals_compare_by_bits() {
        assert_eq!(Value::Real(0.5), Value::Real(0.5));
        assert_ne!(Value::Real(0.0), Value::Real(-0.0));
        assert_eq!(Value::Real(f64::NAN), Value::Real(f64::NAN));
        let set: HashSet<Value> = [Value::Real(1.0), Value::Real(1.0), Value::Int(1)].into();
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn lists_order_lexicographically() {
        let a = Value::indices(&[0, 1]);
        let b = Value::indices(&[0, 2]);
        assert!(a < b);
        assert!(Value::Unit < Value::Int(-5));
    }

    #[test]
    fn approx_eq_tolerates_rounding() {
        let a = Value::reals(&[1.0, 2.0]);
        let b = Value::reals(&[1.0 + 1e-14, 2.0]);
        assert!(a.approx_eq(&b, 1e-12));
        assert!(!a.approx_eq(&Value::reals(&[1.1, 2.0]), 1e-12));
    }
}
