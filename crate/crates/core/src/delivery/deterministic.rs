use crate::error::{Result, SortError};
use crate::simnet::{ceil_log2, Network, Outbox, PeGroup, Traffic};

use super::{
    balanced_bounds, check_pieces, cut, execute, sizes, Delivered, Descriptor, PieceMatrix, Slice,
};

/// Two-phase deterministic delivery.
///
/// Small pieces (at most `⌈m_g/q⌉ / 2r` elements, which is `n/2pr` for
/// balanced groups) are numbered by a prefix sum and small piece `i` of a
/// group goes whole to member `⌊i/r⌋` of that group, so small pieces fill at
/// most half of any receiver. Large pieces are then described to
/// coordinators (member `⌊i/r⌋` of the target group for sender `i`), which
/// merge the prefix sums of residual capacities with the prefix sums of
/// large-piece sizes and reply with the resulting ranges.
///
/// With `strict` set, a piece larger than `⌈n/p⌉` is rejected.
pub fn deliver_deterministic(
    net: &mut Network,
    group: &PeGroup,
    pieces: PieceMatrix,
    strict: bool,
) -> Result<Delivered> {
    let r = check_pieces(group, &pieces)?;
    let p = group.size();
    let q = p / r;
    let sz = sizes(&pieces);
    let totals = net.allreduce_vec(group, &sz, |a, b| a + b)?;
    let n: u64 = totals.iter().sum();
    if strict {
        let bound = n.div_ceil(p as u64);
        if let Some((i, g)) = (0..p)
            .flat_map(|i| (0..r).map(move |g| (i, g)))
            .find(|&(i, g)| sz[i][g] > bound)
        {
            return Err(SortError::precondition(format!(
                "piece of PE {} for group {g} has {} elements, more than n/p = {bound}",
                group.member(i),
                sz[i][g]
            )));
        }
    }
    let targets = group.split(r)?;
    let bounds: Vec<Vec<u64>> = totals.iter().map(|&m| balanced_bounds(m, q)).collect();
    let threshold: Vec<u64> = totals
        .iter()
        .map(|&m| m.div_ceil(q as u64) / (2 * r as u64))
        .collect();
    let is_small = |i: usize, g: usize| sz[i][g] > 0 && sz[i][g] <= threshold[g];

    // phase 1: enumerate small pieces (count and volume, one vector prefix sum)
    let flags: Vec<Vec<u64>> = (0..p)
        .map(|i| {
            let counts = (0..r).map(|g| u64::from(is_small(i, g)));
            let vols = (0..r).map(|g| if is_small(i, g) { sz[i][g] } else { 0 });
            counts.chain(vols).collect()
        })
        .collect();
    net.prefix_sum_vec(group, &flags)?;

    let mut slices = Vec::new();
    let mut small_load = vec![vec![0u64; q]; r];
    let mut small_seen = vec![0usize; r];
    for i in 0..p {
        for g in 0..r {
            if !is_small(i, g) {
                continue;
            }
            let t = small_seen[g] / r;
            small_seen[g] += 1;
            slices.push(Slice {
                origin: group.member(i),
                group: g,
                piece_offset: 0,
                len: sz[i][g] as usize,
                dest: targets[g].member(t),
                first_number: bounds[g][t] + small_load[g][t] + 1,
            });
            small_load[g][t] += sz[i][g];
        }
    }

    // residual capacity of every receiver, as prefix sums (sequence X)
    let mut residual_bounds = Vec::with_capacity(r);
    for g in 0..r {
        let mut xs = vec![0u64; q + 1];
        for t in 0..q {
            let cap = bounds[g][t + 1] - bounds[g][t];
            let res = cap.checked_sub(small_load[g][t]).ok_or_else(|| {
                SortError::InvariantViolation(format!(
                    "small pieces overfill member {t} of group {g}"
                ))
            })?;
            xs[t + 1] = xs[t] + res;
        }
        residual_bounds.push(xs);
    }

    // phase 2: large-piece descriptors travel to their coordinators
    let coordinator = |i: usize, g: usize| targets[g].member(i / r);
    let outboxes: Vec<Outbox<Descriptor>> = (0..p)
        .map(|i| {
            (0..r)
                .filter(|&g| sz[i][g] > 0 && !is_small(i, g))
                .map(|g| {
                    let d = Descriptor {
                        origin: group.member(i),
                        group: g,
                        offset: 0,
                        len: sz[i][g],
                    };
                    (coordinator(i, g), d)
                })
                .collect()
        })
        .collect();
    net.exchange(group, outboxes, Traffic::Control)?;
    // merging X with the sampled Y sequence
    net.charge_latency(ceil_log2(q));

    let mut replies: Vec<Outbox<Vec<Descriptor>>> = vec![Vec::new(); p];
    for g in 0..r {
        let xs = &residual_bounds[g];
        let mut y = 0u64;
        for i in 0..p {
            if sz[i][g] == 0 || is_small(i, g) {
                continue;
            }
            let mut assigned = Vec::new();
            for (t, off, len) in cut(y, sz[i][g], xs) {
                let into_residual = y + off - xs[t];
                slices.push(Slice {
                    origin: group.member(i),
                    group: g,
                    piece_offset: off as usize,
                    len: len as usize,
                    dest: targets[g].member(t),
                    first_number: bounds[g][t] + small_load[g][t] + into_residual + 1,
                });
                assigned.push(Descriptor {
                    origin: group.member(i),
                    group: g,
                    offset: off,
                    len,
                });
            }
            y += sz[i][g];
            let coord_local = group.local_index(coordinator(i, g)).expect("coordinator in group");
            replies[coord_local].push((group.member(i), assigned));
        }
    }
    net.exchange(group, replies, Traffic::Control)?;

    execute(net, group, &pieces, slices, totals)
}
