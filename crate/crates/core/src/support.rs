use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FpsError, Result};

/// Sorted, deduplicated set of variable indices in `[0, p)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    /// Builds a support set, rejecting indices at or beyond `p`.
    pub fn new(indices: impl IntoIterator<Item = usize>, p: usize) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&i| i >= p) {
            return Err(FpsError::invalid(format!("support index {bad} out of range for p = {p}")));
        }
        Ok(SupportSet(set.into_iter().collect()))
    }

    /// `{0, 1, ..., s - 1}`.
    pub fn prefix(s: usize) -> Self {
        SupportSet((0..s).collect())
    }

    pub fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SupportSet(indices)
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

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Indices of `[0, p)` not in the set.
    pub fn complement(&self, p: usize) -> Vec<usize> {
        (0..p).filter(|&i| !self.contains(i)).collect()
    }

    /// Parses a comma separated index list such as `0,1,4`.
    pub fn parse(text: &str, p: usize) -> Result<Self> {
        let mut out = Vec::new();
        for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let i: usize = tok
                .parse()
                .map_err(|_| FpsError::invalid(format!("bad support index '{tok}'")))?;
            out.push(i);
        }
        SupportSet::new(out, p)
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_deduplicated() {
        let s = SupportSet::new([3, 1, 3, 0], 5).unwrap();
        assert_eq!(s.indices(), &[0, 1, 3]);
        assert_eq!(s.complement(5), vec![2, 4]);
        assert!(SupportSet::new([5], 5).is_err());
        assert_eq!(SupportSet::parse("2, 0", 3).unwrap().indices(), &[0, 2]);
        assert!(SupportSet::parse("0,x", 3).is_err());
    }
}
