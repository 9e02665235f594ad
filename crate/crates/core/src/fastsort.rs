//! Fast work-inefficient sorting of small inputs on an `a × b` PE grid.
//!
//! Every PE sorts its few elements, rows and columns gossip their sorted
//! data, each PE ranks the elements of its column against the elements of
//! its row by merging, and summing those partial ranks over a column gives
//! the global rank of every element in that column.

use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::{Result, SortError};
use crate::simnet::{Network, PeGroup};

/// Grid with `rows · cols = p`, laid out row-major over the group members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn size(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedElement {
    pub element: Element,
    pub global_rank: u64,
}

/// `2^⌈P/2⌉ × 2^⌊P/2⌋` for `p = 2^P`.
pub fn grid_shape(p: usize) -> Result<GridShape> {
    if p == 0 || !p.is_power_of_two() {
        return Err(SortError::UnsupportedTopology(format!(
            "fast sorting needs a power-of-two group, got {p}"
        )));
    }
    let bits = p.trailing_zeros();
    Ok(GridShape {
        rows: 1 << bits.div_ceil(2),
        cols: 1 << (bits / 2),
    })
}

/// Ranks all elements of a power-of-two group. `max_per_pe` is the declared
/// per-PE input bound (normally `⌈n/p⌉`).
pub fn fast_rank_sort(
    net: &mut Network,
    group: &PeGroup,
    local: &[Vec<Element>],
    max_per_pe: usize,
) -> Result<Vec<Vec<RankedElement>>> {
    let shape = grid_shape(group.size())?;
    if let Some(i) = local.iter().position(|v| v.len() > max_per_pe) {
        return Err(SortError::precondition(format!(
            "member {i} holds {} elements, bound is {max_per_pe}",
            local[i].len()
        )));
    }
    rank_on_grid(net, group, shape, local)
}

/// The grid ranking itself, for any shape matching the group size.
pub fn rank_on_grid(
    net: &mut Network,
    group: &PeGroup,
    shape: GridShape,
    local: &[Vec<Element>],
) -> Result<Vec<Vec<RankedElement>>> {
    if shape.size() != group.size() || local.len() != group.size() {
        return Err(SortError::UnsupportedTopology(format!(
            "{}x{} grid does not match a group of {} PEs with {} inputs",
            shape.rows,
            shape.cols,
            group.size(),
            local.len()
        )));
    }
    let sorted: Vec<Vec<Element>> = local
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.sort_unstable();
            v
        })
        .collect();
    let at = |row: usize, col: usize| row * shape.cols + col;

    let mut row_data = Vec::with_capacity(shape.rows);
    let mut fork = net.fork();
    for row in 0..shape.rows {
        let members = PeGroup::strided(group.member(at(row, 0)), 1, shape.cols);
        let inputs: Vec<Vec<Element>> = (0..shape.cols).map(|c| sorted[at(row, c)].clone()).collect();
        row_data.push(net.branch(&mut fork, |net| net.gossip_merge(&members, &inputs))?);
    }
    net.join(fork);

    let mut col_data = Vec::with_capacity(shape.cols);
    let mut fork = net.fork();
    for col in 0..shape.cols {
        let members = column_group(group, shape, col);
        let inputs: Vec<Vec<Element>> = (0..shape.rows).map(|r| sorted[at(r, col)].clone()).collect();
        col_data.push(net.branch(&mut fork, |net| net.gossip_merge(&members, &inputs))?);
    }
    net.join(fork);

    // partial rank of each column element against the row held by the PE,
    // then summed over the column
    let mut col_ranks = Vec::with_capacity(shape.cols);
    let mut fork = net.fork();
    for (col, column) in col_data.iter().enumerate() {
        let partial: Vec<Vec<u64>> = row_data.iter().map(|row| rank_by_merge(column, row)).collect();
        let members = column_group(group, shape, col);
        col_ranks.push(net.branch(&mut fork, |net| {
            net.allreduce_vec(&members, &partial, |a, b| a + b)
        })?);
    }
    net.join(fork);

    Ok(sorted
        .iter()
        .enumerate()
        .map(|(m, own)| {
            let col = m % shape.cols;
            own.iter()
                .map(|e| {
                    let idx = col_data[col].binary_search(e).expect("own element is in its column");
                    RankedElement {
                        element: *e,
                        global_rank: col_ranks[col][idx],
                    }
                })
                .collect()
        })
        .collect())
}

fn column_group(group: &PeGroup, shape: GridShape, col: usize) -> PeGroup {
    PeGroup::from_members((0..shape.rows).map(|r| group.member(r * shape.cols + col)).collect())
}

/// For each element of `a`, the number of elements of `b` smaller than it.
fn rank_by_merge(a: &[Element], b: &[Element]) -> Vec<u64> {
    let mut j = 0;
    a.iter()
        .map(|x| {
            while j < b.len() && b[j] < *x {
                j += 1;
            }
            j as u64
        })
        .collect()
}

/// Replicates the elements whose global rank is in `wanted` (ascending) at
/// every member, in rank order.
pub fn extract_by_ranks(
    net: &mut Network,
    group: &PeGroup,
    ranked: &[Vec<RankedElement>],
    wanted: &[u64],
) -> Result<Vec<Element>> {
    let n: u64 = ranked.iter().map(|v| v.len() as u64).sum();
    if wanted.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SortError::precondition("wanted ranks must be strictly ascending"));
    }
    if let Some(&k) = wanted.iter().find(|&&k| k >= n) {
        return Err(SortError::precondition(format!("rank {k} outside 0..{n}")));
    }
    // each PE contributes its wanted elements; ranks order them globally
    let contributions: Vec<Vec<Element>> = ranked
        .iter()
        .map(|v| {
            let mut mine: Vec<&RankedElement> =
                v.iter().filter(|re| wanted.binary_search(&re.global_rank).is_ok()).collect();
            mine.sort_by_key(|re| re.global_rank);
            mine.into_iter().map(|re| re.element).collect()
        })
        .collect();
    let gathered = net.gossip_merge(group, &contributions)?;
    if gathered.len() != wanted.len() {
        return Err(SortError::InvariantViolation(format!(
            "extracted {} elements for {} ranks",
            gathered.len(),
            wanted.len()
        )));
    }
    Ok(gathered)
}
