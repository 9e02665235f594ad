use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::simnet::CostLedger;

/// Load statistics of one recursion level of a sample-sort run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelImbalance {
    pub level: usize,
    /// Largest group load divided by the average group load, maximized over
    /// all groups that partitioned at this level.
    pub group_imbalance: f64,
    /// Whether some group exceeded the per-level budget `1 + ε'`.
    pub warning: bool,
}

/// A finished distributed sort.
#[derive(Debug, Clone)]
pub struct SortOutcome {
    /// Sorted output per PE.
    pub output: Vec<Vec<Element>>,
    pub ledger: CostLedger,
    /// Empty for algorithms that balance perfectly.
    pub imbalance: Vec<LevelImbalance>,
}

impl SortOutcome {
    /// Largest per-PE output divided by `n/p`; 1 for empty inputs.
    pub fn max_load_ratio(&self) -> f64 {
        let p = self.output.len();
        let n: usize = self.output.iter().map(Vec::len).sum();
        if n == 0 {
            return 1.0;
        }
        let max = self.output.iter().map(Vec::len).max().unwrap_or(0);
        max as f64 * p as f64 / n as f64
    }
}
