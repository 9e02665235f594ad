//! Moving `r` pieces per PE to `r` PE-groups with balanced receive volume.
//!
//! Every PE of the delivering group holds one piece per target group (the
//! target groups are the `r` equal contiguous parts of the delivering
//! group). The elements of target group `g` are numbered consecutively and
//! element number `j` (1-based) is owned by the `⌈j·q/m_g⌉`-th member of
//! the group, where `q` is the group size and `m_g` the group total, so
//! every receiver gets `⌊m_g/q⌋` or `⌈m_g/q⌉` elements.
//!
//! The schemes differ only in how pieces are numbered:
//!
//! * [`DeliveryScheme::Simple`]: prefix sum in PE order.
//! * [`DeliveryScheme::Permuted`]: prefix sum in a pseudorandom PE order per
//!   target group.
//! * [`DeliveryScheme::Deterministic`]: small pieces are placed whole, large
//!   pieces fill the residual capacities.
//! * [`DeliveryScheme::Randomized`]: large pieces are cut to a fixed size and
//!   delegated to pseudorandom PEs before the permuted numbering.

mod deterministic;
mod randomized;
mod simple;

pub use deterministic::deliver_deterministic;
pub use randomized::{default_delegation_factor, deliver_randomized};
pub use simple::{deliver_simple, deliver_simple_permuted};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::{Result, SortError};
use crate::seed::SeedSpec;
use crate::simnet::{ExchStats, Network, Outbox, PeGroup, Traffic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeliveryScheme {
    Simple,
    Permuted,
    Deterministic,
    Randomized,
}

impl DeliveryScheme {
    pub const ALL: [DeliveryScheme; 4] = [
        DeliveryScheme::Simple,
        DeliveryScheme::Permuted,
        DeliveryScheme::Deterministic,
        DeliveryScheme::Randomized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeliveryScheme::Simple => "simple",
            DeliveryScheme::Permuted => "permuted",
            DeliveryScheme::Deterministic => "deterministic",
            DeliveryScheme::Randomized => "randomized",
        }
    }
}

impl fmt::Display for DeliveryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeliveryScheme {
    type Err = SortError;

    fn from_str(s: &str) -> Result<Self> {
        DeliveryScheme::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| SortError::config(format!("unknown delivery scheme {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryConfig {
    pub scheme: DeliveryScheme,
    pub seed: SeedSpec,
    /// Randomized scheme only; `None` picks [`default_delegation_factor`].
    pub delegation_factor: Option<f64>,
    /// Deterministic scheme only: reject pieces larger than `⌈n/p⌉`.
    pub strict_piece_bound: bool,
}

impl DeliveryConfig {
    pub fn new(scheme: DeliveryScheme, seed: SeedSpec) -> Self {
        DeliveryConfig {
            scheme,
            seed,
            delegation_factor: None,
            strict_piece_bound: true,
        }
    }
}

/// `pieces[member][group]`: the elements member `member` of the delivering
/// group holds for target group `group`.
pub type PieceMatrix = Vec<Vec<Vec<Element>>>;

/// A contiguous part of one piece sent to one PE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    /// Sending PE (global index).
    pub origin: usize,
    pub group: usize,
    pub piece_offset: usize,
    pub len: usize,
    /// Receiving PE (global index).
    pub dest: usize,
    /// Number of the slice's first element within its target group, 1-based.
    pub first_number: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeliveryPlan {
    pub slices: Vec<Slice>,
    pub group_totals: Vec<u64>,
}

impl DeliveryPlan {
    /// Elements received per PE of the delivering group (group-local index).
    pub fn received_counts(&self, group: &PeGroup) -> Vec<u64> {
        let mut counts = vec![0; group.size()];
        for s in &self.slices {
            counts[group.local_index(s.dest).expect("dest in group")] += s.len as u64;
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct Delivered {
    /// Per member of the delivering group: received runs, ordered by sender.
    pub received: Vec<Vec<Vec<Element>>>,
    pub plan: DeliveryPlan,
    /// Statistics of the main data exchange.
    pub stats: ExchStats,
}

/// Delivers `pieces` from `group` to its `r` equal parts using `config`.
pub fn deliver(
    net: &mut Network,
    group: &PeGroup,
    pieces: PieceMatrix,
    config: &DeliveryConfig,
) -> Result<Delivered> {
    match config.scheme {
        DeliveryScheme::Simple => deliver_simple(net, group, pieces),
        DeliveryScheme::Permuted => deliver_simple_permuted(net, group, pieces, &config.seed),
        DeliveryScheme::Deterministic => {
            deliver_deterministic(net, group, pieces, config.strict_piece_bound)
        }
        DeliveryScheme::Randomized => {
            deliver_randomized(net, group, pieces, &config.seed, config.delegation_factor)
        }
    }
}

/// Validates the matrix and returns the number of target groups.
pub(crate) fn check_pieces(group: &PeGroup, pieces: &PieceMatrix) -> Result<usize> {
    if pieces.len() != group.size() {
        return Err(SortError::precondition(format!(
            "piece matrix has {} rows for {} PEs",
            pieces.len(),
            group.size()
        )));
    }
    let r = pieces.first().map_or(0, Vec::len);
    if r == 0 || pieces.iter().any(|row| row.len() != r) {
        return Err(SortError::precondition("piece matrix with missing groups"));
    }
    if !group.size().is_multiple_of(r) {
        return Err(SortError::UnsupportedTopology(format!(
            "{} PEs cannot form {r} equal groups",
            group.size()
        )));
    }
    Ok(r)
}

pub(crate) fn sizes(pieces: &PieceMatrix) -> Vec<Vec<u64>> {
    pieces
        .iter()
        .map(|row| row.iter().map(|p| p.len() as u64).collect())
        .collect()
}

/// Ownership boundaries `⌊t·m/q⌋`, `t = 0..=q`: member `t` owns element
/// positions `bounds[t]..bounds[t+1]` (0-based).
pub(crate) fn balanced_bounds(m: u64, q: usize) -> Vec<u64> {
    let q64 = q as u64;
    (0..=q64)
        .map(|t| ((t as u128 * m as u128) / q64 as u128) as u64)
        .collect()
}

/// Cuts positions `start..start+len` at `bounds`, returning
/// `(owner, offset within the range, length)`.
pub(crate) fn cut(start: u64, len: u64, bounds: &[u64]) -> Vec<(usize, u64, u64)> {
    let mut out = Vec::new();
    if len == 0 {
        return out;
    }
    let end = start + len;
    // owner of `start`: last t with bounds[t] <= start and a non-empty range
    let mut t = bounds.partition_point(|&b| b <= start) - 1;
    let mut pos = start;
    while pos < end {
        while bounds[t + 1] <= pos {
            t += 1;
        }
        let stop = end.min(bounds[t + 1]);
        out.push((t, pos - start, stop - pos));
        pos = stop;
    }
    out
}

/// Executes the data exchange described by `slices`. Slices to the same
/// destination travel in one message, one run per slice.
pub(crate) fn execute(
    net: &mut Network,
    group: &PeGroup,
    pieces: &PieceMatrix,
    mut slices: Vec<Slice>,
    group_totals: Vec<u64>,
) -> Result<Delivered> {
    slices.sort_by_key(|s| (s.origin, s.dest, s.group, s.first_number));
    let mut outboxes: Vec<Outbox<Vec<Vec<Element>>>> = vec![Vec::new(); group.size()];
    for s in &slices {
        let origin_local = group.local_index(s.origin).expect("origin in group");
        let run = pieces[origin_local][s.group][s.piece_offset..s.piece_offset + s.len].to_vec();
        let outbox = &mut outboxes[origin_local];
        match outbox.last_mut() {
            Some((dest, runs)) if *dest == s.dest => runs.push(run),
            _ => outbox.push((s.dest, vec![run])),
        }
    }
    let (inboxes, stats) = net.exchange(group, outboxes, Traffic::Data)?;
    let received = inboxes
        .into_iter()
        .map(|inbox| inbox.into_iter().flat_map(|(_, runs)| runs).collect())
        .collect();
    slices.sort_by_key(|s| (s.group, s.first_number));
    Ok(Delivered {
        received,
        plan: DeliveryPlan {
            slices,
            group_totals,
        },
        stats,
    })
}

/// A fixed-size bookkeeping record exchanged between PEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Descriptor {
    pub origin: usize,
    pub group: usize,
    pub offset: u64,
    pub len: u64,
}

impl crate::simnet::Payload for Descriptor {
    fn words(&self) -> u64 {
        3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_balanced() {
        let b = balanced_bounds(10, 4);
        assert_eq!(b, vec![0, 2, 5, 7, 10]);
        assert_eq!(balanced_bounds(0, 3), vec![0, 0, 0, 0]);
    }

    #[test]
    fn cut_splits_at_boundaries() {
        let b = balanced_bounds(10, 4);
        assert_eq!(cut(0, 10, &b), vec![(0, 0, 2), (1, 2, 3), (2, 5, 2), (3, 7, 3)]);
        assert_eq!(cut(3, 1, &b), vec![(1, 0, 1)]);
        assert_eq!(cut(5, 0, &b), vec![]);
        // empty ranges in the middle are skipped
        let b = vec![0, 1, 1, 3];
        assert_eq!(cut(0, 3, &b), vec![(0, 0, 1), (2, 1, 2)]);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in DeliveryScheme::ALL {
            assert_eq!(s.name().parse::<DeliveryScheme>().unwrap(), s);
        }
        assert!("fancy".parse::<DeliveryScheme>().is_err());
    }
}
