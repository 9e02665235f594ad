//! Adaptive multi-level sample sort with overpartitioning.
//!
//! Each level draws a sample of about `a·b·r` elements, sorts it with the
//! fast work-inefficient algorithm, picks `br − 1` equidistant splitters and
//! partitions the local data into `br` buckets. The global bucket sizes are
//! then packed into `r` consecutive bucket ranges minimizing the largest
//! range, and each range is delivered to one PE-group, which recurses.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::delivery::{deliver, DeliveryConfig, DeliveryScheme, PieceMatrix};
use crate::element::Element;
use crate::error::{Result, SortError};
use crate::fastsort::{extract_by_ranks, fast_rank_sort};
use crate::outcome::{LevelImbalance, SortOutcome};
use crate::seed::SeedSpec;
use crate::simnet::{CostLedger, CostParams, Network, PeGroup, Phase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmsParams {
    /// Group count per level; their product is the PE count.
    pub groups: Vec<usize>,
    /// Oversampling factor.
    pub a: f64,
    /// Overpartitioning factor.
    pub b: usize,
    /// Target imbalance of the final output.
    pub eps: f64,
}

impl AmsParams {
    pub fn new(groups: Vec<usize>, a: f64, b: usize, eps: f64) -> Result<Self> {
        let params = AmsParams { groups, a, b, eps };
        params.validate()?;
        Ok(params)
    }

    /// The usual oversampling factor `1.6·log₁₀ n`, at least 1.
    pub fn default_oversampling(n: u64) -> f64 {
        (1.6 * (n.max(1) as f64).log10()).max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() || self.groups.contains(&0) {
            return Err(SortError::config("every level needs a positive group count"));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(SortError::config(format!("oversampling factor {} must be positive", self.a)));
        }
        if self.b == 0 {
            return Err(SortError::config("overpartitioning factor must be at least 1"));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(SortError::config(format!("imbalance {} must be positive", self.eps)));
        }
        Ok(())
    }

    fn validate_for(&self, p: usize) -> Result<()> {
        self.validate()?;
        let product = self.groups.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
        if product != Some(p) {
            return Err(SortError::config(format!(
                "group counts {:?} do not multiply to p = {p}",
                self.groups
            )));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.groups.len()
    }

    /// Per-level imbalance budget `(1+ε)^(1/k) − 1`.
    pub fn eps_prime(&self) -> f64 {
        (1.0 + self.eps).powf(1.0 / self.levels() as f64) - 1.0
    }

    /// Total sample size for a level with `r` groups, capped at the data size.
    pub fn sample_size(&self, r: usize, n: u64) -> u64 {
        ((self.a * self.b as f64 * r as f64).ceil() as u64).min(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketHistogram {
    pub sizes: Vec<u64>,
}

impl BucketHistogram {
    pub fn new(sizes: Vec<u64>) -> Self {
        BucketHistogram { sizes }
    }

    pub fn total(&self) -> u64 {
        self.sizes.iter().sum()
    }

    pub fn max_bucket(&self) -> u64 {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Assignment of consecutive bucket ranges to `r` groups: group `g` gets
/// buckets `boundaries[g]..boundaries[g+1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPlan {
    pub boundaries: Vec<usize>,
    /// Largest group load.
    pub max_load: u64,
    pub group_loads: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScanOutcome {
    Success(GroupPlan),
    /// More than `r` groups were needed. `next_bound` is the smallest load
    /// bound that would change some decision of the scan.
    Failure { next_bound: u64 },
}

/// Greedy scan: fills groups left to right and opens the next group when
/// the next bucket would push the load above `bound`.
pub fn scan_groups(hist: &BucketHistogram, r: usize, bound: u64) -> ScanOutcome {
    let mut boundaries = vec![0];
    let mut loads = Vec::with_capacity(r);
    let mut load = 0u64;
    let mut next_bound = u64::MAX;
    for (j, &s) in hist.sizes.iter().enumerate() {
        if load + s > bound {
            next_bound = next_bound.min(load + s);
            if s > bound || j == 0 {
                return ScanOutcome::Failure { next_bound };
            }
            boundaries.push(j);
            loads.push(load);
            load = 0;
        }
        load += s;
    }
    loads.push(load);
    if loads.len() > r {
        return ScanOutcome::Failure { next_bound };
    }
    let buckets = hist.sizes.len();
    while boundaries.len() <= r {
        boundaries.push(buckets);
    }
    loads.resize(r, 0);
    ScanOutcome::Success(GroupPlan {
        boundaries,
        max_load: loads.iter().copied().max().unwrap_or(0),
        group_loads: loads,
    })
}

/// The plan with the smallest possible maximum group load.
///
/// The optimum lies between `max(max bucket, ⌈n/r⌉)` and
/// `⌈n/r⌉ + max bucket` and is the load of some consecutive bucket range,
/// so the search runs over the (few) range sums in that window. A
/// successful scan lowers the upper end to the largest load it actually
/// used; a failed one raises the lower end to its `next_bound`.
pub fn optimal_group_plan(hist: &BucketHistogram, r: usize) -> GroupPlan {
    assert!(r >= 1, "at least one group");
    let n = hist.total();
    let lo = hist.max_bucket().max(n.div_ceil(r as u64));
    let hi = n.min(n.div_ceil(r as u64) + hist.max_bucket());
    let mut candidates = range_sums_within(&hist.sizes, lo, hi);
    if candidates.is_empty() || !matches!(scan_groups(hist, r, hi), ScanOutcome::Success(_)) {
        candidates = range_sums_within(&hist.sizes, lo, n);
    }
    if candidates.is_empty() {
        // only possible when n = 0
        return match scan_groups(hist, r, lo) {
            ScanOutcome::Success(plan) => plan,
            ScanOutcome::Failure { .. } => unreachable!("an empty histogram fits any bound"),
        };
    }
    let (mut i, mut j) = (0, candidates.len() - 1);
    let mut best = None;
    while i <= j {
        let mid = i + (j - i) / 2;
        match scan_groups(hist, r, candidates[mid]) {
            ScanOutcome::Success(plan) => {
                let used = candidates.partition_point(|&c| c < plan.max_load);
                best = Some(plan);
                if used == 0 {
                    break;
                }
                j = used - 1;
            }
            ScanOutcome::Failure { next_bound } => {
                i = candidates.partition_point(|&c| c < next_bound).max(mid + 1);
            }
        }
    }
    best.expect("the largest candidate always succeeds")
}

/// Sorted distinct sums of consecutive ranges that fall into `lo..=hi`.
fn range_sums_within(sizes: &[u64], lo: u64, hi: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut end = 0;
    let mut sum = 0u64;
    // two pointers: [start, end) is the shortest range starting at `start`
    // with sum >= lo; extend while the sum stays <= hi
    for start in 0..sizes.len() {
        if end < start {
            end = start;
            sum = 0;
        }
        while end < sizes.len() && sum < lo {
            sum += sizes[end];
            end += 1;
        }
        if sum >= lo {
            let mut s = sum;
            let mut e = end;
            while s <= hi {
                out.push(s);
                if e == sizes.len() {
                    break;
                }
                s += sizes[e];
                e += 1;
            }
        }
        if end > start {
            sum -= sizes[start];
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Draws `count_total` distinct elements, member `i` contributing
/// `⌊(i+1)c/P⌋ − ⌊ic/P⌋` of them; members with too little data hand their
/// shortfall to the following members.
pub fn draw_sample(
    net: &mut Network,
    group: &PeGroup,
    local_data: &[Vec<Element>],
    count_total: u64,
    seed: &SeedSpec,
) -> Result<Vec<Vec<Element>>> {
    let members = local_data.len();
    if members != group.size() {
        return Err(SortError::precondition(format!(
            "{members} inputs for a group of {} PEs",
            group.size()
        )));
    }
    let lens: Vec<Vec<u64>> = local_data.iter().map(|v| vec![v.len() as u64]).collect();
    let (_, total) = net.prefix_sum_vec(group, &lens)?;
    if count_total > total[0] {
        return Err(SortError::precondition(format!(
            "sample of {count_total} requested from {} elements",
            total[0]
        )));
    }
    let c = count_total as u128;
    let share = |i: usize| (c * i as u128 / members as u128) as u64;
    let mut quota: Vec<u64> = (0..members).map(|i| share(i + 1) - share(i)).collect();
    let mut shortfall = 0;
    for (q, v) in quota.iter_mut().zip(local_data) {
        let have = v.len() as u64;
        if *q > have {
            shortfall += *q - have;
            *q = have;
        }
    }
    for (q, v) in quota.iter_mut().zip(local_data) {
        if shortfall == 0 {
            break;
        }
        let extra = (v.len() as u64 - *q).min(shortfall);
        *q += extra;
        shortfall -= extra;
    }
    Ok(local_data
        .iter()
        .zip(&quota)
        .enumerate()
        .map(|(i, (v, &q))| {
            let mut rng = seed.child(format!("member-{i}")).rng();
            let mut picked = index::sample(&mut rng, v.len(), q as usize).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|j| v[j]).collect()
        })
        .collect())
}

/// Sorts the sample and returns the elements at ranks `⌊i·S/nb⌋`,
/// `i = 1..nb`, where `S` is the sample size and `nb` the bucket count.
pub fn select_splitters(
    net: &mut Network,
    group: &PeGroup,
    sample: &[Vec<Element>],
    buckets: usize,
) -> Result<Vec<Element>> {
    if buckets == 0 {
        return Err(SortError::precondition("at least one bucket"));
    }
    let s: u64 = sample.iter().map(|v| v.len() as u64).sum();
    if s + 1 < buckets as u64 {
        return Err(SortError::precondition(format!(
            "{s} sample elements cannot yield {} splitters",
            buckets - 1
        )));
    }
    if buckets == 1 {
        return Ok(Vec::new());
    }
    let wanted: Vec<u64> = (1..buckets as u64).map(|i| i * s / buckets as u64).collect();
    if group.size().is_power_of_two() {
        let max = sample.iter().map(Vec::len).max().unwrap_or(0);
        let ranked = fast_rank_sort(net, group, sample, max)?;
        extract_by_ranks(net, group, &ranked, &wanted)
    } else {
        let sorted: Vec<Vec<Element>> = sample
            .iter()
            .map(|v| {
                let mut v = v.clone();
                v.sort_unstable();
                v
            })
            .collect();
        let all = net.gossip_merge(group, &sorted)?;
        Ok(wanted.iter().map(|&k| all[k as usize]).collect())
    }
}

/// Splits `local_data` into `splitters.len() + 1` buckets; an element goes
/// to the bucket numbered by how many splitters are smaller than it.
/// `splitters` must be strictly ascending.
pub fn partition_buckets(local_data: &[Element], splitters: &[Element]) -> (Vec<Vec<Element>>, Vec<u64>) {
    debug_assert!(splitters.windows(2).all(|w| w[0] < w[1]));
    let mut buckets = vec![Vec::new(); splitters.len() + 1];
    for &e in local_data {
        buckets[splitters.partition_point(|s| *s < e)].push(e);
    }
    let hist = buckets.iter().map(|b| b.len() as u64).collect();
    (buckets, hist)
}

/// Result of a single partitioning step.
#[derive(Debug, Clone)]
pub struct LevelPartition {
    /// Unsorted data per PE after delivery.
    pub output: Vec<Vec<Element>>,
    pub plan: GroupPlan,
    pub imbalance: LevelImbalance,
    pub ledger: CostLedger,
}

/// Runs only the first level of AMS-sort on all PEs: partitions into
/// `params.groups[0]` groups and delivers, without recursing.
pub fn partition_level(
    data: Vec<Vec<Element>>,
    params: &AmsParams,
    scheme: DeliveryScheme,
    seed: &SeedSpec,
    cost: CostParams,
) -> Result<LevelPartition> {
    params.validate()?;
    let p = data.len();
    let r = params.groups[0];
    if p == 0 || !p.is_multiple_of(r) {
        return Err(SortError::UnsupportedTopology(format!("{p} PEs cannot form {r} groups")));
    }
    let mut net = Network::new(p, cost);
    let step = partition_step(&mut net, &PeGroup::all(p), data, params, 0, scheme, seed)?;
    Ok(LevelPartition {
        output: step.received,
        plan: step.plan,
        imbalance: LevelImbalance {
            level: 1,
            group_imbalance: step.ratio,
            warning: step.ratio > 1.0 + params.eps_prime(),
        },
        ledger: net.into_ledger(),
    })
}

pub fn ams_sort(
    data: Vec<Vec<Element>>,
    params: &AmsParams,
    scheme: DeliveryScheme,
    seed: &SeedSpec,
    cost: CostParams,
) -> Result<SortOutcome> {
    let p = data.len();
    if p == 0 {
        return Err(SortError::precondition("no PEs"));
    }
    params.validate_for(p)?;
    let mut net = Network::new(p, cost);
    let mut ratios = vec![0.0f64; params.levels()];
    let output = sort_level(&mut net, &PeGroup::all(p), data, params, 0, scheme, seed, &mut ratios)?;
    let budget = 1.0 + params.eps_prime();
    let imbalance = ratios
        .into_iter()
        .enumerate()
        .map(|(l, ratio)| LevelImbalance {
            level: l + 1,
            group_imbalance: ratio,
            warning: ratio > budget,
        })
        .collect();
    Ok(SortOutcome {
        output,
        ledger: net.into_ledger(),
        imbalance,
    })
}

struct Step {
    received: Vec<Vec<Element>>,
    plan: GroupPlan,
    ratio: f64,
}

fn partition_step(
    net: &mut Network,
    group: &PeGroup,
    data: Vec<Vec<Element>>,
    params: &AmsParams,
    level: usize,
    scheme: DeliveryScheme,
    seed: &SeedSpec,
) -> Result<Step> {
    let r = params.groups[level];
    let size = group.size();
    net.enter_level(level + 1, net.p() / (size / r));
    let seed = seed.child(format!("level-{}/group-{}", level + 1, group.lo()));

    net.set_phase(Phase::SplitterSelection);
    let n: u64 = data.iter().map(|v| v.len() as u64).sum();
    let count = params.sample_size(r, n);
    let sample = draw_sample(net, group, &data, count, &seed.child("sample"))?;
    let buckets = (params.b * r).min(count.max(1) as usize);
    let splitters = select_splitters(net, group, &sample, buckets)?;

    net.set_phase(Phase::BucketProcessing);
    let (local_buckets, local_hists): (Vec<_>, Vec<_>) =
        data.iter().map(|v| partition_buckets(v, &splitters)).unzip();
    drop(data);
    let hist = BucketHistogram::new(net.allreduce_vec(group, &local_hists, |x, y| x + y)?);
    let plan = optimal_group_plan(&hist, r);
    let pieces: PieceMatrix = local_buckets
        .into_iter()
        .map(|mut bs| {
            plan.boundaries
                .windows(2)
                .map(|w| bs[w[0]..w[1]].iter_mut().flat_map(std::mem::take).collect())
                .collect()
        })
        .collect();
    let ratio = if n == 0 {
        1.0
    } else {
        plan.max_load as f64 * r as f64 / n as f64
    };

    net.set_phase(Phase::DataDelivery);
    let mut config = DeliveryConfig::new(scheme, seed.child("delivery"));
    config.strict_piece_bound = false;
    let delivered = deliver(net, group, pieces, &config)?;
    let received = delivered.received.into_iter().map(|runs| runs.concat()).collect();
    Ok(Step { received, plan, ratio })
}

#[allow(clippy::too_many_arguments)]
fn sort_level(
    net: &mut Network,
    group: &PeGroup,
    data: Vec<Vec<Element>>,
    params: &AmsParams,
    level: usize,
    scheme: DeliveryScheme,
    seed: &SeedSpec,
    ratios: &mut [f64],
) -> Result<Vec<Vec<Element>>> {
    if level == params.levels() {
        net.set_phase(Phase::LocalSorting);
        return Ok(data
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                v
            })
            .collect());
    }
    let step = partition_step(net, group, data, params, level, scheme, seed)?;
    ratios[level] = ratios[level].max(step.ratio);

    let r = params.groups[level];
    let q = group.size() / r;
    let seed = seed.child(format!("level-{}/group-{}", level + 1, group.lo()));
    let mut fork = net.fork();
    let mut output = Vec::with_capacity(group.size());
    let mut rest = step.received.into_iter();
    for sub in &group.split(r)? {
        let part: Vec<Vec<Element>> = rest.by_ref().take(q).collect();
        let sorted = net.branch(&mut fork, |net| {
            sort_level(net, sub, part, params, level + 1, scheme, &seed, ratios)
        })?;
        output.extend(sorted);
    }
    net.join(fork);
    Ok(output)
}
