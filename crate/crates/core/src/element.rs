//! The record being sorted and its tie-breaking total order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SortError};

/// A 64-bit key together with the identity of the slot it was read from.
///
/// The derived ordering is lexicographic on `(key, origin_pe, origin_pos)`,
/// which makes every element of one sorting instance distinct. PE indices are
/// 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Element {
    pub key: u64,
    pub origin_pe: u32,
    pub origin_pos: u32,
}

impl Element {
    pub const fn new(key: u64, origin_pe: u32, origin_pos: u32) -> Self {
        Element {
            key,
            origin_pe,
            origin_pos,
        }
    }
}

/// Compares two elements of one instance. Identical triples mean the input
/// identity was duplicated somewhere, which is reported as an error.
pub fn compare_tiebreak(x: &Element, y: &Element) -> Result<Ordering> {
    match x.cmp(y) {
        Ordering::Equal => Err(SortError::InvariantViolation(format!(
            "duplicated element identity {x:?}"
        ))),
        ord => Ok(ord),
    }
}

/// Tags raw per-PE keys with their origin.
pub fn tag_input(keys: &[Vec<u64>]) -> Vec<Vec<Element>> {
    keys.iter()
        .enumerate()
        .map(|(pe, local)| {
            local
                .iter()
                .enumerate()
                .map(|(pos, &key)| Element::new(key, pe as u32, pos as u32))
                .collect()
        })
        .collect()
}

pub(crate) fn is_sorted(seq: &[Element]) -> bool {
    seq.windows(2).all(|w| w[0] < w[1])
}
