//! Distributed multisequence selection.
//!
//! Given one sorted sequence per PE and global ranks `k`, find the element
//! of rank `k` in the union together with the split position in every
//! sequence. This is quickselect over the union: a shared random pivot is
//! located with a prefix sum over the surviving window sizes, each PE
//! partitions its window by binary search, and an all-reduction of the
//! left-part sizes decides where to continue. Several ranks are searched in
//! lockstep so every round needs one vector-valued collective of each kind.

use rand::Rng;

use crate::element::{is_sorted, Element};
use crate::error::{Result, SortError};
use crate::seed::SeedSpec;
use crate::simnet::{Network, PeGroup};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    /// `splits[i]` elements of member `i`'s sequence are `≤ splitter`.
    pub splits: Vec<usize>,
    /// The requested 1-based global rank; `splits` sums to it.
    pub rank: u64,
    pub splitter: Element,
    /// Number of pivot rounds this search took.
    pub rounds: u32,
}

impl SelectionResult {
    /// Same selection, ignoring how many rounds were needed.
    pub fn same_selection(&self, other: &SelectionResult) -> bool {
        self.splits == other.splits && self.rank == other.rank && self.splitter == other.splitter
    }
}

pub fn multiselect<S: AsRef<[Element]>>(
    net: &mut Network,
    group: &PeGroup,
    local_sorted: &[S],
    k: u64,
    seed: &SeedSpec,
) -> Result<SelectionResult> {
    let mut res = multiselect_many(net, group, local_sorted, &[k], seed)?;
    Ok(res.pop().expect("one rank requested"))
}

struct Search {
    lo: Vec<usize>,
    hi: Vec<usize>,
    k: u64,
    rounds: u32,
    found: Option<Element>,
}

pub fn multiselect_many<S: AsRef<[Element]>>(
    net: &mut Network,
    group: &PeGroup,
    local_sorted: &[S],
    ranks: &[u64],
    seed: &SeedSpec,
) -> Result<Vec<SelectionResult>> {
    let seqs: Vec<&[Element]> = local_sorted.iter().map(AsRef::as_ref).collect();
    if seqs.len() != group.size() {
        return Err(SortError::precondition(format!(
            "{} sequences for a group of {} PEs",
            seqs.len(),
            group.size()
        )));
    }
    if let Some(i) = seqs.iter().position(|s| !is_sorted(s)) {
        return Err(SortError::precondition(format!("sequence of member {i} is not sorted")));
    }
    let n: u64 = seqs.iter().map(|s| s.len() as u64).sum();
    if ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SortError::precondition("ranks must be strictly ascending"));
    }
    if let Some(&k) = ranks.iter().find(|&&k| k == 0 || k > n) {
        return Err(SortError::precondition(format!("rank {k} outside 1..={n}")));
    }
    if ranks.is_empty() {
        return Ok(Vec::new());
    }

    let members = seqs.len();
    let r = ranks.len();
    let mut searches: Vec<Search> = ranks
        .iter()
        .map(|&k| Search {
            lo: vec![0; members],
            hi: seqs.iter().map(|s| s.len()).collect(),
            k,
            rounds: 0,
            found: None,
        })
        .collect();
    let mut rng = seed.rng();
    let cap = 64 * (64 - n.leading_zeros()) + 64;

    while searches.iter().any(|s| s.found.is_none()) {
        // window sizes of all searches, one vector slot per search
        let sizes: Vec<Vec<u64>> = (0..members)
            .map(|i| {
                searches
                    .iter()
                    .map(|s| if s.found.is_some() { 0 } else { (s.hi[i] - s.lo[i]) as u64 })
                    .collect()
            })
            .collect();
        let (prefix, totals) = net.prefix_sum_vec(group, &sizes)?;

        let mut pivots: Vec<Option<Element>> = vec![None; r];
        for (slot, s) in searches.iter_mut().enumerate() {
            if s.found.is_some() {
                continue;
            }
            s.rounds += 1;
            if s.rounds > cap {
                return Err(SortError::InvariantViolation(format!(
                    "selection of rank {} did not converge",
                    ranks[slot]
                )));
            }
            let total = totals[slot];
            if total == 1 {
                if s.k != 1 {
                    return Err(SortError::InvariantViolation("lost track of the target rank".into()));
                }
                let i = (0..members).find(|&i| s.hi[i] > s.lo[i]).expect("one element left");
                s.found = Some(seqs[i][s.lo[i]]);
                continue;
            }
            let u = rng.random_range(0..total);
            let owner = (0..members)
                .rev()
                .find(|&i| prefix[i][slot] <= u && sizes[i][slot] > 0)
                .expect("pivot index is covered by some window");
            let offset = (u - prefix[owner][slot]) as usize;
            pivots[slot] = Some(seqs[owner][s.lo[owner] + offset]);
        }
        if pivots.iter().all(Option::is_none) {
            continue;
        }
        // pivot owners broadcast their pivots
        net.broadcast(group, group.member(0), &vec![0u64; r])?;

        let less: Vec<Vec<u64>> = (0..members)
            .map(|i| {
                searches
                    .iter()
                    .zip(&pivots)
                    .map(|(s, pv)| match pv {
                        Some(v) => seqs[i][s.lo[i]..s.hi[i]].partition_point(|x| x < v) as u64,
                        None => 0,
                    })
                    .collect()
            })
            .collect();
        let less_total = net.allreduce_vec(group, &less, |a, b| a + b)?;

        for (slot, s) in searches.iter_mut().enumerate() {
            let Some(v) = pivots[slot] else { continue };
            let below = less_total[slot];
            if below >= s.k {
                for i in 0..members {
                    s.hi[i] = s.lo[i] + less[i][slot] as usize;
                }
            } else if below + 1 == s.k {
                s.found = Some(v);
            } else {
                s.k -= below;
                for i in 0..members {
                    s.lo[i] += less[i][slot] as usize;
                }
            }
        }
    }

    Ok(searches
        .into_iter()
        .zip(ranks)
        .map(|(s, &rank)| {
            let splitter = s.found.expect("loop ends when all are found");
            SelectionResult {
                splits: seqs.iter().map(|d| d.partition_point(|x| *x <= splitter)).collect(),
                rank,
                splitter,
                rounds: s.rounds,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::CostParams;

    fn seqs(keys: &[&[u64]]) -> Vec<Vec<Element>> {
        keys.iter()
            .enumerate()
            .map(|(pe, ks)| {
                ks.iter()
                    .enumerate()
                    .map(|(i, &k)| Element::new(k, pe as u32, i as u32))
                    .collect()
            })
            .collect()
    }

    fn run(keys: &[&[u64]], ranks: &[u64]) -> Result<Vec<SelectionResult>> {
        let d = seqs(keys);
        let mut net = Network::new(d.len(), CostParams::default());
        multiselect_many(&mut net, &PeGroup::all(d.len()), &d, ranks, &SeedSpec::new(3, "sel"))
    }

    #[test]
    fn single_element_base_case() {
        let r = run(&[&[7]], &[1]).unwrap();
        assert_eq!(r[0].splitter.key, 7);
        assert_eq!(r[0].splits, vec![1]);
    }

    #[test]
    fn two_interleaved_sequences() {
        let r = run(&[&[1, 3, 5], &[2, 4, 6]], &[3]).unwrap();
        assert_eq!(r[0].splitter.key, 3);
        assert_eq!(r[0].splits, vec![2, 1]);
    }

    #[test]
    fn empty_member_sequence() {
        let r = run(&[&[], &[1, 2]], &[2]).unwrap();
        assert_eq!(r[0].splitter.key, 2);
        assert_eq!(r[0].splits, vec![0, 2]);
    }

    #[test]
    fn several_ranks_at_once() {
        let r = run(&[&[1, 3, 5], &[2, 4, 6]], &[2, 4]).unwrap();
        assert_eq!(r.iter().map(|x| x.splitter.key).collect::<Vec<_>>(), vec![2, 4]);
        let ext = run(&[&[1, 3, 5], &[2, 4, 6]], &[1, 6]).unwrap();
        assert_eq!(ext.iter().map(|x| x.splitter.key).collect::<Vec<_>>(), vec![1, 6]);
        assert!(run(&[&[1]], &[]).unwrap().is_empty());
    }

    #[test]
    fn duplicate_keys_are_tie_broken() {
        let r = run(&[&[5, 5, 5], &[5, 5]], &[1, 2, 3, 4, 5]).unwrap();
        for (i, sel) in r.iter().enumerate() {
            assert_eq!(sel.splits.iter().sum::<usize>(), i + 1);
        }
    }

    #[test]
    fn rejects_bad_ranks() {
        assert!(run(&[&[1, 2]], &[0]).is_err());
        assert!(run(&[&[1, 2]], &[3]).is_err());
        assert!(run(&[&[1, 2]], &[2, 1]).is_err());
        assert!(run(&[&[2, 1]], &[1]).is_err());
    }
}
