//! Recurse-last multiway mergesort.
//!
//! Every level splits the current PE-group into `r` equal subgroups and
//! sends each subgroup an exactly balanced share of the group's elements,
//! found by multisequence selection on the members' sorted arrays. The
//! received pieces are merged locally and the subgroups recurse.

use serde::{Deserialize, Serialize};

use crate::delivery::{deliver, DeliveryConfig, DeliveryScheme, PieceMatrix};
use crate::element::{is_sorted, Element};
use crate::error::{Result, SortError};
use crate::merge::merge_sorted;
use crate::multiselect::multiselect_many;
use crate::outcome::SortOutcome;
use crate::seed::SeedSpec;
use crate::simnet::{CostParams, Network, PeGroup, Phase};

/// Group counts per level. Their product is the PE count, so the group size
/// telescopes from `p` at the first level to 1 after the last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPlan {
    groups: Vec<usize>,
}

impl LevelPlan {
    pub fn new(groups: Vec<usize>, p: usize) -> Result<Self> {
        if groups.is_empty() {
            return Err(SortError::config("a level plan needs at least one level"));
        }
        if groups.contains(&0) {
            return Err(SortError::config("group counts must be positive"));
        }
        let product = groups.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
        if product != Some(p) {
            return Err(SortError::config(format!(
                "group counts {groups:?} do not multiply to p = {p}"
            )));
        }
        Ok(LevelPlan { groups })
    }

    /// `k` levels with `r ≈ p^(1/k)` each, rounded to powers of two; the
    /// last level absorbs the remainder. Non-powers of two only support
    /// `k = 1`.
    pub fn default_for(p: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(SortError::config("level count must be positive"));
        }
        if k == 1 {
            return LevelPlan::new(vec![p.max(1)], p);
        }
        if !p.is_power_of_two() {
            return Err(SortError::UnsupportedTopology(format!(
                "{k} levels need a power-of-two PE count, got {p}"
            )));
        }
        let bits = p.trailing_zeros() as usize;
        let mut groups = vec![1usize << (bits / k); k - 1];
        groups.push(1 << (bits - (bits / k) * (k - 1)));
        LevelPlan::new(groups, p)
    }

    pub fn levels(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }
}

/// Sorted sequences one PE has received and still has to merge.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SortedRuns {
    runs: Vec<Vec<Element>>,
}

impl SortedRuns {
    pub fn new(runs: Vec<Vec<Element>>) -> Result<Self> {
        if let Some(i) = runs.iter().position(|r| !is_sorted(r)) {
            return Err(SortError::precondition(format!("run {i} is not sorted")));
        }
        Ok(SortedRuns { runs })
    }

    pub fn runs(&self) -> &[Vec<Element>] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Merges all runs with a tournament tree.
pub fn merge_runs(runs: &SortedRuns) -> Vec<Element> {
    let views: Vec<&[Element]> = runs.runs.iter().map(Vec::as_slice).collect();
    merge_sorted(&views)
}

/// Sorts `data` (one vector per PE) and returns the perfectly balanced
/// result together with the cost ledger.
pub fn rlm_sort(
    data: Vec<Vec<Element>>,
    plan: &LevelPlan,
    scheme: DeliveryScheme,
    seed: &SeedSpec,
    cost: CostParams,
) -> Result<SortOutcome> {
    let p = data.len();
    if p == 0 {
        return Err(SortError::precondition("no PEs"));
    }
    let plan = LevelPlan::new(plan.groups.clone(), p)?;
    let mut net = Network::new(p, cost);
    net.set_phase(Phase::LocalSorting);
    let sorted: Vec<Vec<Element>> = data
        .into_iter()
        .map(|mut v| {
            v.sort_unstable();
            v
        })
        .collect();
    let output = sort_level(&mut net, &PeGroup::all(p), sorted, &plan, 0, scheme, seed)?;
    Ok(SortOutcome {
        output,
        ledger: net.into_ledger(),
        imbalance: Vec::new(),
    })
}

fn sort_level(
    net: &mut Network,
    group: &PeGroup,
    data: Vec<Vec<Element>>,
    plan: &LevelPlan,
    level: usize,
    scheme: DeliveryScheme,
    seed: &SeedSpec,
) -> Result<Vec<Vec<Element>>> {
    if level == plan.levels() {
        return Ok(data);
    }
    let r = plan.groups[level];
    let size = group.size();
    let q = size / r;
    net.enter_level(level + 1, net.p() / q);
    let seed = seed.child(format!("level-{}/group-{}", level + 1, group.lo()));

    net.set_phase(Phase::SplitterSelection);
    let n: u64 = data.iter().map(|v| v.len() as u64).sum();
    // subgroup g receives global ranks [⌊g·q·n/P⌋, ⌊(g+1)·q·n/P⌋)
    let boundary = |g: usize| ((g as u128 * q as u128 * n as u128) / size as u128) as u64;
    let inner: Vec<u64> = (1..r).map(boundary).filter(|&k| k > 0 && k < n).collect();
    let mut ranks = inner.clone();
    ranks.dedup();
    let selections = multiselect_many(net, group, &data, &ranks, &seed.child("select"))?;

    net.set_phase(Phase::BucketProcessing);
    let split_at = |i: usize, k: u64| -> usize {
        if k == 0 {
            0
        } else if k >= n {
            data[i].len()
        } else {
            let s = ranks.binary_search(&k).expect("rank was selected");
            selections[s].splits[i]
        }
    };
    let pieces: PieceMatrix = (0..size)
        .map(|i| {
            (0..r)
                .map(|g| data[i][split_at(i, boundary(g))..split_at(i, boundary(g + 1))].to_vec())
                .collect()
        })
        .collect();
    let input_balanced = data.iter().all(|v| v.len() as u64 <= n.div_ceil(size as u64));
    drop(data);

    net.set_phase(Phase::DataDelivery);
    let mut config = DeliveryConfig::new(scheme, seed.child("delivery"));
    // pieces stay below n/p only if no PE holds more than n/p elements
    config.strict_piece_bound = input_balanced;
    let delivered = deliver(net, group, pieces, &config)?;

    net.set_phase(Phase::LocalSorting);
    let merged: Vec<Vec<Element>> = delivered
        .received
        .into_iter()
        .map(|runs| SortedRuns::new(runs).map(|r| merge_runs(&r)))
        .collect::<Result<_>>()?;

    let subgroups = group.split(r)?;
    let mut fork = net.fork();
    let mut output = Vec::with_capacity(size);
    let mut rest = merged.into_iter();
    for sub in &subgroups {
        let part: Vec<Vec<Element>> = rest.by_ref().take(q).collect();
        let sorted = net.branch(&mut fork, |net| {
            sort_level(net, sub, part, plan, level + 1, scheme, &seed)
        })?;
        output.extend(sorted);
    }
    net.join(fork);
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::tag_input;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(p: usize, per_pe: usize, seed: u64) -> Vec<Vec<Element>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys: Vec<Vec<u64>> = (0..p)
            .map(|_| (0..per_pe).map(|_| rng.random_range(0..1000)).collect())
            .collect();
        tag_input(&keys)
    }

    fn oracle(data: &[Vec<Element>]) -> Vec<Element> {
        let mut all: Vec<Element> = data.iter().flatten().copied().collect();
        all.sort();
        all
    }

    #[test]
    fn plan_validation() {
        assert!(LevelPlan::new(vec![4, 4], 16).is_ok());
        assert!(LevelPlan::new(vec![4, 3], 16).is_err());
        assert!(LevelPlan::new(vec![], 1).is_err());
        assert!(LevelPlan::new(vec![0, 4], 0).is_err());
        assert_eq!(LevelPlan::default_for(1024, 2).unwrap().groups(), &[32, 32]);
        assert_eq!(LevelPlan::default_for(128, 2).unwrap().groups(), &[8, 16]);
        assert_eq!(LevelPlan::default_for(64, 3).unwrap().groups(), &[4, 4, 4]);
        assert_eq!(LevelPlan::default_for(12, 1).unwrap().groups(), &[12]);
        assert!(LevelPlan::default_for(12, 2).is_err());
    }

    #[test]
    fn merge_runs_examples() {
        let e = |k| Element::new(k, 0, k as u32);
        let one = SortedRuns::new(vec![vec![e(1), e(2)]]).unwrap();
        assert_eq!(merge_runs(&one), vec![e(1), e(2)]);
        let two = SortedRuns::new(vec![vec![e(1), e(4)], vec![e(2), e(3)]]).unwrap();
        assert_eq!(merge_runs(&two), vec![e(1), e(2), e(3), e(4)]);
        assert!(SortedRuns::new(vec![vec![e(2), e(1)]]).is_err());
    }

    #[test]
    fn merge_runs_random() {
        let runs: Vec<Vec<Element>> = random_input(8, 50, 5)
            .into_iter()
            .map(|mut v| {
                v.sort();
                v
            })
            .collect();
        let want = oracle(&runs);
        assert_eq!(merge_runs(&SortedRuns::new(runs).unwrap()), want);
    }

    #[test]
    fn single_pe_is_a_sequential_sort() {
        let data = random_input(1, 20, 1);
        let want = oracle(&data);
        let plan = LevelPlan::new(vec![1], 1).unwrap();
        let out = rlm_sort(data, &plan, DeliveryScheme::Simple, &SeedSpec::new(1, "rlm"), CostParams::default())
            .unwrap();
        assert_eq!(out.output, vec![want]);
    }

    #[test]
    fn four_pes_one_level() {
        let data = random_input(4, 4, 2);
        let want = oracle(&data);
        let plan = LevelPlan::new(vec![4], 4).unwrap();
        for scheme in DeliveryScheme::ALL {
            let out = rlm_sort(data.clone(), &plan, scheme, &SeedSpec::new(2, "rlm"), CostParams::default())
                .unwrap();
            assert!(out.output.iter().all(|v| v.len() == 4));
            assert_eq!(out.output.concat(), want);
        }
    }

    #[test]
    fn two_levels_sixteen_pes() {
        let data = random_input(16, 100, 3);
        let want = oracle(&data);
        let plan = LevelPlan::new(vec![4, 4], 16).unwrap();
        let out = rlm_sort(
            data,
            &plan,
            DeliveryScheme::Deterministic,
            &SeedSpec::new(3, "rlm"),
            CostParams::default(),
        )
        .unwrap();
        assert!(out.output.iter().all(|v| v.len() == 100));
        assert_eq!(out.output.concat(), want);
        for level in &out.ledger.levels {
            assert!(level.data.max_sent_msgs() <= 8, "level {}", level.level);
        }
        assert_eq!(out.ledger.levels.len(), 2);
    }

    #[test]
    fn uneven_totals_stay_within_one() {
        let mut data = random_input(8, 10, 4);
        data[3].truncate(3);
        data[5].clear();
        let n: usize = data.iter().map(Vec::len).sum();
        let want = oracle(&data);
        let plan = LevelPlan::new(vec![2, 4], 8).unwrap();
        let out = rlm_sort(data, &plan, DeliveryScheme::Randomized, &SeedSpec::new(4, "rlm"), CostParams::default())
            .unwrap();
        for v in &out.output {
            assert!(v.len() == n / 8 || v.len() == n.div_ceil(8));
        }
        assert_eq!(out.output.concat(), want);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = random_input(8, 30, 6);
        let plan = LevelPlan::new(vec![2, 2, 2], 8).unwrap();
        let run = || {
            rlm_sort(data.clone(), &plan, DeliveryScheme::Permuted, &SeedSpec::new(9, "rlm"), CostParams::default())
                .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.output, b.output);
        assert_eq!(a.ledger, b.ledger);
    }
}
