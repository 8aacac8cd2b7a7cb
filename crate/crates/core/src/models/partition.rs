//! Set partitions of `0..n` in canonical form.

use crate::error::{RaviError, Result};
use crate::value::Value;

/// A partition of `0..n`: clusters are sorted and ordered by least element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    clusters: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    pub fn new(mut clusters: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for c in clusters.iter_mut() {
            if c.is_empty() {
                return Err(RaviError::InvalidPartition("empty cluster".into()));
            }
            c.sort_unstable();
            for &i in c.iter() {
                if i >= n || seen[i] {
                    return Err(RaviError::InvalidPartition(format!(
                        "index {i} out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(RaviError::InvalidPartition(
                "clusters do not cover every index".into(),
            ));
        }
        clusters.sort_unstable_by_key(|c| c[0]);
        Ok(Self { clusters, n })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            clusters: (0..n).map(|i| vec![i]).collect(),
            n,
        }
    }

    /// Builds the partition whose clusters are the sets of equal labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut first: Vec<(usize, usize)> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match first.iter().find(|(lab, _)| *lab == l) {
                Some(&(_, c)) => clusters[c].push(i),
                None => {
                    first.push((l, clusters.len()));
                    clusters.push(vec![i]);
                }
            }
        }
        Self {
            clusters,
            n: labels.len(),
        }
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Cluster position of every index.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                out[i] = c;
            }
        }
        out
    }

    /// Merges clusters at positions `a < b`.
    pub fn merge(&self, a: usize, b: usize) -> Self {
        let mut clusters = self.clusters.clone();
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
        Self {
            clusters,
            n: self.n,
        }
    }

    pub fn to_value(&self) -> Value {
        Value::list(self.clusters.iter().map(|c| Value::indices(c)))
    }

    pub fn from_value(v: &Value, n: usize) -> Result<Self> {
        let Value::List(cs) = v else {
            return Err(RaviError::InvalidPartition(format!(
                "{v} is not a list of clusters"
            )));
        };
        let mut clusters = Vec::with_capacity(cs.len());
        for c in cs {
            let Value::List(items) = c else {
                return Err(RaviError::InvalidPartition(format!("{c} is not a cluster")));
            };
            let mut members = Vec::with_capacity(items.len());
            for it in items {
                match it {
                    Value::Int(i) if *i >= 0 => members.push(*i as usize),
                    _ => return Err(RaviError::InvalidPartition(format!("{it} is not an index"))),
                }
            }
            clusters.push(members);
        }
        Self::new(clusters, n)
    }
}

/// Every partition of `0..n`, via restricted growth strings.
pub fn all_partitions(n: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    fn rec(i: usize, max: usize, rgs: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if i == rgs.len() {
            out.push(Partition::from_labels(rgs));
            return;
        }
        for l in 0..=max + 1 {
            rgs[i] = l;
            rec(i + 1, max.max(l), rgs, out);
        }
    }
    if n == 0 {
        return vec![Partition::singletons(0)];
    }
    rec(1, 0, &mut rgs, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, b) in bell.iter().enumerate() {
            assert_eq!(all_partitions(n).len(), *b);
        }
    }

    #[test]
    fn canonical_form_roundtrips() {
        let p = Partition::new(vec![vec![3, 1], vec![2], vec![0]], 4).unwrap();
        assert_eq!(p.clusters(), &[vec![0], vec![1, 3], vec![2]]);
        assert_eq!(Partition::from_value(&p.to_value(), 4).unwrap(), p);
        assert!(Partition::new(vec![vec![0], vec![0, 1]], 2).is_err());
        assert!(Partition::new(vec![vec![0]], 2).is_err());
    }

    #[test]
    fn merge_keeps_canonical_order() {
        let p = Partition::singletons(4).merge(1, 3).merge(0, 2);
        assert_eq!(p.clusters(), &[vec![0, 2], vec![1, 3]]);
    }
}
