use rand::seq::SliceRandom;

use crate::error::{Result, SortError};
use crate::feistel::PseudorandomPermutation;
use crate::seed::SeedSpec;
use crate::simnet::{Network, Outbox, PeGroup, Traffic};

use super::simple::{permuted_orders, positions};
use super::{
    balanced_bounds, check_pieces, cut, execute, sizes, Delivered, Descriptor, PieceMatrix, Slice,
};

/// `max(1, ⌊(√(1 + r/ln(rp/2)) − 1)/2⌋)`, or 1 when `rp/2 ≤ e`.
pub fn default_delegation_factor(r: usize, p: usize) -> f64 {
    let x = (r * p) as f64 / 2.0;
    if x <= std::f64::consts::E {
        return 1.0;
    }
    let a = (((1.0 + r as f64 / x.ln()).sqrt() - 1.0) / 2.0).floor();
    a.max(1.0)
}

/// `(offset, len)` of the sub-pieces of a piece of `x` elements: `⌊x/s⌋`
/// large ones of exactly `s` elements, then the remainder.
pub(crate) fn sub_pieces(x: u64, s: u64) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = (0..x / s).map(|j| (j * s, s)).collect();
    if !x.is_multiple_of(s) {
        out.push((x - x % s, x % s));
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Item {
    origin: usize,
    offset: u64,
    len: u64,
}

/// Randomized delivery.
///
/// Pieces are cut into large sub-pieces of `s = max(1, ⌈a·n/(rp)⌉)`
/// elements plus one small remainder. The `K` large sub-pieces are numbered
/// globally and sub-piece `e` is delegated to member `π(e) mod p` for a
/// pseudorandom permutation `π` of `0..K`. Every member then shuffles the
/// items it is responsible for and the items are numbered by a prefix sum in
/// a pseudorandom member order per target group. Order is preserved within
/// each sub-piece only.
pub fn deliver_randomized(
    net: &mut Network,
    group: &PeGroup,
    pieces: PieceMatrix,
    seed: &SeedSpec,
    delegation_factor: Option<f64>,
) -> Result<Delivered> {
    let r = check_pieces(group, &pieces)?;
    let p = group.size();
    let a = delegation_factor.unwrap_or_else(|| default_delegation_factor(r, p));
    if !(a.is_finite() && a > 0.0) {
        return Err(SortError::config(format!("delegation factor {a} must be positive")));
    }
    let sz = sizes(&pieces);
    let totals = net.allreduce_vec(group, &sz, |x, y| x + y)?;
    let n: u64 = totals.iter().sum();
    let s = ((a * n as f64 / (r * p) as f64).ceil() as u64).max(1);

    // items[member][g]: what the member is responsible for numbering
    let mut items: Vec<Vec<Vec<Item>>> = vec![vec![Vec::new(); r]; p];
    let mut large = Vec::new();
    for i in 0..p {
        for g in 0..r {
            for (offset, len) in sub_pieces(sz[i][g], s) {
                let item = Item { origin: i, offset, len };
                if len == s {
                    large.push((g, item));
                } else {
                    items[i][g].push(item);
                }
            }
        }
    }
    let large_counts: Vec<Vec<u64>> = (0..p)
        .map(|i| vec![large.iter().filter(|(_, it)| it.origin == i).count() as u64])
        .collect();
    let (_, k) = net.prefix_sum_vec(group, &large_counts)?;
    let k = k[0];

    let mut delegate_of = Vec::with_capacity(large.len());
    if k > 0 {
        let perm = PseudorandomPermutation::new(k, &seed.child("delegate"))?;
        // `large` is in (origin, group, offset) order, i.e. global numbering order
        for (e, &(g, item)) in large.iter().enumerate() {
            let d = (perm.apply(e as u64)? % p as u64) as usize;
            delegate_of.push(d);
            items[d][g].push(item);
        }
        let mut outboxes: Vec<Outbox<Descriptor>> = vec![Vec::new(); p];
        for (&(g, item), &d) in large.iter().zip(&delegate_of) {
            outboxes[item.origin].push((
                group.member(d),
                Descriptor {
                    origin: group.member(item.origin),
                    group: g,
                    offset: item.offset,
                    len: item.len,
                },
            ));
        }
        net.exchange(group, outboxes, Traffic::Control)?;
    }

    for (i, per_group) in items.iter_mut().enumerate() {
        let mut rng = seed.child(format!("shuffle-{i}")).rng();
        for list in per_group.iter_mut() {
            list.shuffle(&mut rng);
        }
    }

    let loads: Vec<Vec<u64>> = items
        .iter()
        .map(|per_group| per_group.iter().map(|l| l.iter().map(|it| it.len).sum()).collect())
        .collect();
    let orders = permuted_orders(p, r, seed)?;
    net.charge_collective(p, r as u64);
    let starts = positions(&loads, &orders);

    let targets = group.split(r)?;
    let q = p / r;
    let bounds: Vec<Vec<u64>> = totals.iter().map(|&m| balanced_bounds(m, q)).collect();
    let mut slices = Vec::new();
    let mut replies: Vec<Outbox<Vec<Descriptor>>> = vec![Vec::new(); p];
    for (i, per_group) in items.iter().enumerate() {
        for (g, list) in per_group.iter().enumerate() {
            let mut pos = starts[i][g];
            for it in list {
                let mut assigned = Vec::new();
                for (t, off, len) in cut(pos, it.len, &bounds[g]) {
                    slices.push(Slice {
                        origin: group.member(it.origin),
                        group: g,
                        piece_offset: (it.offset + off) as usize,
                        len: len as usize,
                        dest: targets[g].member(t),
                        first_number: pos + off + 1,
                    });
                    assigned.push(Descriptor {
                        origin: group.member(it.origin),
                        group: g,
                        offset: it.offset + off,
                        len,
                    });
                }
                replies[i].push((group.member(it.origin), assigned));
                pos += it.len;
            }
        }
    }
    net.exchange(group, replies, Traffic::Control)?;

    execute(net, group, &pieces, slices, totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delivery::deliver_simple_permuted;
    use crate::element::Element;
    use crate::simnet::CostParams;

    fn pieces_from_sizes(sz: &[Vec<usize>]) -> PieceMatrix {
        sz.iter()
            .enumerate()
            .map(|(i, row)| {
                let mut pos = 0u32;
                row.iter()
                    .enumerate()
                    .map(|(g, &len)| {
                        (0..len)
                            .map(|j| {
                                pos += 1;
                                Element::new((g * 1_000 + j) as u64, i as u32, pos)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn piece_of_three_s_plus_one() {
        assert_eq!(sub_pieces(13, 4), vec![(0, 4), (4, 4), (8, 4), (12, 1)]);
        assert_eq!(sub_pieces(8, 4), vec![(0, 4), (4, 4)]);
        assert_eq!(sub_pieces(3, 4), vec![(0, 3)]);
        assert!(sub_pieces(0, 4).is_empty());
    }

    #[test]
    fn default_factor() {
        assert_eq!(default_delegation_factor(2, 2), 1.0);
        assert_eq!(default_delegation_factor(8, 64), 1.0);
        // r/ln(rp/2) = 1024/ln(2^19) ≈ 77.9, (√78.9 − 1)/2 ≈ 3.94
        assert_eq!(default_delegation_factor(1024, 1024), 3.0);
    }

    #[test]
    fn without_large_pieces_matches_permuted() {
        let sz = vec![vec![3, 1], vec![2, 2], vec![0, 4], vec![1, 3]];
        let g = PeGroup::all(4);
        let seed = SeedSpec::new(7, "deliver");
        let mut net = Network::new(4, CostParams::default());
        // a so large that s exceeds every piece: K = 0
        let rnd = deliver_randomized(&mut net, &g, pieces_from_sizes(&sz), &seed, Some(100.0)).unwrap();
        let perm = deliver_simple_permuted(&mut net, &g, pieces_from_sizes(&sz), &seed).unwrap();
        assert_eq!(rnd.plan, perm.plan);
    }

    #[test]
    fn large_pieces_are_delegated_and_balanced() {
        let sz = vec![vec![13, 1], vec![1, 1], vec![1, 13], vec![1, 1]];
        let g = PeGroup::all(4);
        let seed = SeedSpec::new(3, "deliver");
        let mut net = Network::new(4, CostParams::default());
        let d = deliver_randomized(&mut net, &g, pieces_from_sizes(&sz), &seed, Some(1.0)).unwrap();
        assert_eq!(d.plan.received_counts(&g), vec![8, 8, 8, 8]);
        let mut got: Vec<Element> = d.received.into_iter().flatten().flatten().collect();
        let mut want: Vec<Element> = pieces_from_sizes(&sz).into_iter().flatten().flatten().collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn rejects_bad_factor() {
        let g = PeGroup::all(2);
        let mut net = Network::new(2, CostParams::default());
        let res = deliver_randomized(
            &mut net,
            &g,
            pieces_from_sizes(&[vec![1], vec![1]]),
            &SeedSpec::new(1, "x"),
            Some(0.0),
        );
        assert!(res.is_err());
    }
}
