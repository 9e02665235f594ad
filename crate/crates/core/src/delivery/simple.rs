use crate::error::Result;
use crate::feistel::PseudorandomPermutation;
use crate::seed::SeedSpec;
use crate::simnet::{Network, PeGroup};

use super::{balanced_bounds, check_pieces, cut, execute, sizes, Delivered, PieceMatrix, Slice};

/// Prefix-sum delivery in PE order. Each PE sends at most `2r` messages,
/// but a receiver may get `Ω(p)` tiny pieces.
pub fn deliver_simple(net: &mut Network, group: &PeGroup, pieces: PieceMatrix) -> Result<Delivered> {
    let r = check_pieces(group, &pieces)?;
    let sz = sizes(&pieces);
    let (starts, totals) = net.prefix_sum_vec(group, &sz)?;
    let slices = slices_from_positions(group, r, &sz, &starts, &totals);
    execute(net, group, &pieces, slices, totals)
}

/// Like [`deliver_simple`], but the PE numbering used for the prefix sum of
/// target group `g` is a pseudorandom permutation drawn from
/// `seed/perm-group-g`.
pub fn deliver_simple_permuted(
    net: &mut Network,
    group: &PeGroup,
    pieces: PieceMatrix,
    seed: &SeedSpec,
) -> Result<Delivered> {
    let r = check_pieces(group, &pieces)?;
    let sz = sizes(&pieces);
    let orders = permuted_orders(group.size(), r, seed)?;
    // one vector prefix sum of length r, evaluated in each group's order
    net.charge_collective(group.size(), r as u64);
    let starts = positions(&sz, &orders);
    let totals: Vec<u64> = (0..r).map(|g| sz.iter().map(|row| row[g]).sum()).collect();
    let slices = slices_from_positions(group, r, &sz, &starts, &totals);
    execute(net, group, &pieces, slices, totals)
}

/// `orders[g]` lists the members in the order they are numbered for group `g`.
pub(crate) fn permuted_orders(p: usize, r: usize, seed: &SeedSpec) -> Result<Vec<Vec<usize>>> {
    (0..r)
        .map(|g| {
            let perm = PseudorandomPermutation::new(p as u64, &seed.child(format!("perm-group-{g}")))?;
            let mut order = vec![0; p];
            for i in 0..p {
                order[perm.apply(i as u64)? as usize] = i;
            }
            Ok(order)
        })
        .collect()
}

/// Start position (0-based) of every piece within its target group when the
/// pieces of group `g` are laid out in `orders[g]`.
pub(crate) fn positions(sz: &[Vec<u64>], orders: &[Vec<usize>]) -> Vec<Vec<u64>> {
    let p = sz.len();
    let r = orders.len();
    let mut start = vec![vec![0u64; r]; p];
    for (g, order) in orders.iter().enumerate() {
        let mut acc = 0;
        for &i in order {
            start[i][g] = acc;
            acc += sz[i][g];
        }
    }
    start
}

fn slices_from_positions(
    group: &PeGroup,
    r: usize,
    sz: &[Vec<u64>],
    starts: &[Vec<u64>],
    totals: &[u64],
) -> Vec<Slice> {
    let targets = group.split(r).expect("checked by check_pieces");
    let q = group.size() / r;
    let bounds: Vec<Vec<u64>> = totals.iter().map(|&m| balanced_bounds(m, q)).collect();
    let mut slices = Vec::new();
    for (i, row) in sz.iter().enumerate() {
        for (g, &len) in row.iter().enumerate() {
            for (t, off, l) in cut(starts[i][g], len, &bounds[g]) {
                slices.push(Slice {
                    origin: group.member(i),
                    group: g,
                    piece_offset: off as usize,
                    len: l as usize,
                    dest: targets[g].member(t),
                    first_number: starts[i][g] + off + 1,
                });
            }
        }
    }
    slices
}
