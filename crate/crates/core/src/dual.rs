//! Forward-mode dual numbers with a dense tangent vector.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: Vec<f64>,
}

impl Dual {
    pub fn constant(v: f64, n: usize) -> Self {
        Self { v, d: vec![0.0; n] }
    }

    /// Independent variable `i` of `n`.
    pub fn variable(v: f64, i: usize, n: usize) -> Self {
        let mut d = vec![0.0; n];
        d[i] = 1.0;
        Self { v, d }
    }

    /// Variables for each coordinate of `theta`.
    pub fn variables(theta: &[f64]) -> Vec<Dual> {
        let n = theta.len();
        theta
            .iter()
            .enumerate()
            .map(|(i, &v)| Self::variable(v, i, n))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    fn map(&self, v: f64, dv: f64) -> Self {
        Self {
            v,
            d: self.d.iter().map(|x| x * dv).collect(),
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.map(e, e)
    }

    pub fn ln(&self) -> Self {
        self.map(self.v.ln(), 1.0 / self.v)
    }

    pub fn square(&self) -> Self {
        self.map(self.v * self.v, 2.0 * self.v)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(self.v * c, c)
    }

    pub fn add_const(&self, c: f64) -> Self {
        Self {
            v: self.v + c,
            d: self.d.clone(),
        }
    }

    /// `log N(self; mean, exp(log_std)²)`.
    pub fn log_normal_pdf(&self, mean: &Dual, log_std: &Dual) -> Dual {
        let z = &(self - mean) / &log_std.exp();
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        (&z.square().scale(-0.5) - log_std).add_const(-half_log_2pi)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:expr) => {
        impl<'a> $tr<&'a Dual> for &'a Dual {
            type Output = Dual;
            fn $m(self, o: &'a Dual) -> Dual {
                let f = $f;
                f(self, o)
            }
        }
        impl $tr<Dual> for Dual {
            type Output = Dual;
            fn $m(self, o: Dual) -> Dual {
                (&self).$m(&o)
            }
        }
    };
}

binop!(Add, add, |a: &Dual, b: &Dual| Dual {
    v: a.v + b.v,
    d: a.d.iter().zip(&b.d).map(|(x, y)| x + y).collect(),
});
binop!(Sub, sub, |a: &Dual, b: &Dual| Dual {
    v: a.v - b.v,
    d: a.d.iter().zip(&b.d).map(|(x, y)| x - y).collect(),
});
binop!(Mul, mul, |a: &Dual, b: &Dual| Dual {
    v: a.v * b.v,
    d: a.d
        .iter()
        .zip(&b.d)
        .map(|(x, y)| x * b.v + a.v * y)
        .collect(),
});
binop!(Div, div, |a: &Dual, b: &Dual| Dual {
    v: a.v / b.v,
    d: a.d
        .iter()
        .zip(&b.d)
        .map(|(x, y)| (x * b.v - a.v * y) / (b.v * b.v))
        .collect(),
});

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let v = Dual::variables(&[2.0, 3.0]);
        let f = &(&v[0] * &v[1]) / &v[0].exp();
        let e2 = 2f64.exp();
        assert!((f.v - 6.0 / e2).abs() < 1e-15);
        assert!((f.d[0] - (3.0 - 6.0) / e2).abs() < 1e-14);
        assert!((f.d[1] - 2.0 / e2).abs() < 1e-14);
    }

    #[test]
    fn normal_log_pdf_derivatives() {
        let v = Dual::variables(&[0.3, 0.1, -0.2]);
        let lp = v[0].log_normal_pdf(&v[1], &v[2]);
        let s = (-0.2f64).exp();
        let z = (0.3 - 0.1) / s;
        assert!((lp.v - crate::math::log_normal_pdf(0.3, 0.1, s)).abs() < 1e-14);
        assert!((lp.d[0] + z / s).abs() < 1e-12);
        assert!((lp.d[1] - z / s).abs() < 1e-12);
        assert!((lp.d[2] - (z * z - 1.0)).abs() < 1e-12);
    }
}
