use serde::{Deserialize, Serialize};

use crate::error::{Result, SortError};

/// A set of PEs taking part in one collective or exchange. Groups created by
/// recursion are contiguous ranges; grid rows and columns used for fast
/// sorting may be strided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeGroup {
    members: Vec<usize>,
}

impl PeGroup {
    pub fn contiguous(lo: usize, len: usize) -> Self {
        PeGroup {
            members: (lo..lo + len).collect(),
        }
    }

    pub fn all(p: usize) -> Self {
        Self::contiguous(0, p)
    }

    pub fn strided(start: usize, stride: usize, count: usize) -> Self {
        PeGroup {
            members: (0..count).map(|i| start + i * stride).collect(),
        }
    }

    pub fn from_members(members: Vec<usize>) -> Self {
        PeGroup { members }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// First member (lowest index for contiguous groups).
    pub fn lo(&self) -> usize {
        self.members.first().copied().unwrap_or(0)
    }

    pub fn member(&self, local: usize) -> usize {
        self.members[local]
    }

    pub fn contains(&self, pe: usize) -> bool {
        self.local_index(pe).is_some()
    }

    pub fn local_index(&self, pe: usize) -> Option<usize> {
        if self.is_contiguous() {
            let lo = self.lo();
            (pe >= lo && pe < lo + self.size()).then(|| pe - lo)
        } else {
            self.members.iter().position(|&m| m == pe)
        }
    }

    pub fn is_contiguous(&self) -> bool {
        self.members.windows(2).all(|w| w[1] == w[0] + 1)
    }

    /// Splits a contiguous group into `r` equal contiguous subgroups.
    pub fn split(&self, r: usize) -> Result<Vec<PeGroup>> {
        if r == 0 || !self.size().is_multiple_of(r) || !self.is_contiguous() {
            return Err(SortError::UnsupportedTopology(format!(
                "cannot split a group of {} PEs into {r} equal contiguous parts",
                self.size()
            )));
        }
        let q = self.size() / r;
        Ok((0..r)
            .map(|g| PeGroup::contiguous(self.lo() + g * q, q))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_contiguous_and_covering() {
        let g = PeGroup::contiguous(4, 8);
        let parts = g.split(4).unwrap();
        let flat: Vec<usize> = parts.iter().flat_map(|p| p.members().to_vec()).collect();
        assert_eq!(flat, g.members());
        assert!(parts.iter().all(|p| p.size() == 2 && p.is_contiguous()));
    }

    #[test]
    fn split_rejects_uneven() {
        assert!(PeGroup::all(6).split(4).is_err());
        assert!(PeGroup::strided(0, 2, 4).split(2).is_err());
    }

    #[test]
    fn local_index_lookup() {
        let g = PeGroup::strided(1, 3, 4);
        assert_eq!(g.local_index(7), Some(2));
        assert_eq!(g.local_index(2), None);
        assert_eq!(PeGroup::contiguous(3, 2).local_index(4), Some(1));
    }
}
