use std::fmt;

use serde::{Deserialize, Serialize};

/// A candidate model: a sorted, duplicate-free set of zero-based covariate indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelIndexSet(Vec<usize>);

impl ModelIndexSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        ModelIndexSet(indices)
    }

    pub fn empty() -> Self {
        ModelIndexSet(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Union with another set.
    pub fn union(&self, other: &ModelIndexSet) -> ModelIndexSet {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        ModelIndexSet::new(v)
    }

    /// Returns `self` with `index` added.
    pub fn with(&self, index: usize) -> ModelIndexSet {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&index) {
            v.insert(pos, index);
        }
        ModelIndexSet(v)
    }

    /// Indices of `self` that are not in `other`.
    pub fn difference(&self, other: &ModelIndexSet) -> Vec<usize> {
        self.0
            .iter()
            .copied()
            .filter(|&i| !other.contains(i))
            .collect()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn names<'a>(&self, names: &'a [String]) -> Vec<&'a str> {
        self.0.iter().map(|&i| names[i].as_str()).collect()
    }
}

impl From<Vec<usize>> for ModelIndexSet {
    fn from(v: Vec<usize>) -> Self {
        ModelIndexSet::new(v)
    }
}

impl<const N: usize> From<[usize; N]> for ModelIndexSet {
    fn from(v: [usize; N]) -> Self {
        ModelIndexSet::new(v.to_vec())
    }
}

impl fmt::Display for ModelIndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_sorts_and_dedups() {
        let m = ModelIndexSet::new(vec![5, 1, 5, 3]);
        assert_eq!(m.indices(), &[1, 3, 5]);
        assert!(m.contains(3));
        assert!(!m.contains(2));
        assert_eq!(m.to_string(), "{1,3,5}");
    }

    #[test]
    fn with_and_union() {
        let m = ModelIndexSet::from([2]);
        assert_eq!(m.with(0).indices(), &[0, 2]);
        assert_eq!(m.with(2).indices(), &[2]);
        let u = m.union(&ModelIndexSet::from([1, 2]));
        assert_eq!(u.indices(), &[1, 2]);
        assert_eq!(u.difference(&m), vec![1]);
    }
}
