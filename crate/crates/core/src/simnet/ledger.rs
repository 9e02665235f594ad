use serde::{Deserialize, Serialize};

/// Cost model constants: a message of ℓ words costs `alpha + ℓ·beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            alpha: 100.0,
            beta: 1.0,
        }
    }
}

impl CostParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        assert!(alpha >= 0.0 && beta >= 0.0, "cost constants must be non-negative");
        CostParams { alpha, beta }
    }

    /// Closed-form cost of a tree-shaped collective over `participants` PEs
    /// moving `words` words: `β·ℓ + α·⌈log₂ P⌉`, zero for a single PE.
    pub fn collective(&self, participants: usize, words: u64) -> f64 {
        if participants <= 1 {
            return 0.0;
        }
        self.beta * words as f64 + self.alpha * f64::from(ceil_log2(participants))
    }
}

pub fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

/// Summary of a single exchange: `Exch(P, h, r)` with its direct-delivery
/// cost `h·β + r·α`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExchStats {
    pub participants: usize,
    pub max_words: u64,
    pub max_msgs: u64,
    pub modeled_cost: f64,
}

/// The four phases every level of both algorithms is divided into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    SplitterSelection,
    BucketProcessing,
    DataDelivery,
    LocalSorting,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::SplitterSelection,
        Phase::BucketProcessing,
        Phase::DataDelivery,
        Phase::LocalSorting,
    ];

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

/// Whether an exchange moves the elements being sorted or only small
/// bookkeeping records (piece descriptors, range replies).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Traffic {
    Data,
    Control,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PeCounters {
    pub sent_words: Vec<u64>,
    pub recv_words: Vec<u64>,
    pub sent_msgs: Vec<u64>,
    pub recv_msgs: Vec<u64>,
}

impl PeCounters {
    pub fn new(p: usize) -> Self {
        PeCounters {
            sent_words: vec![0; p],
            recv_words: vec![0; p],
            sent_msgs: vec![0; p],
            recv_msgs: vec![0; p],
        }
    }

    pub(crate) fn record(&mut self, src: usize, dest: usize, words: u64) {
        self.sent_words[src] += words;
        self.recv_words[dest] += words;
        self.sent_msgs[src] += 1;
        self.recv_msgs[dest] += 1;
    }

    pub fn max_sent_msgs(&self) -> u64 {
        self.sent_msgs.iter().copied().max().unwrap_or(0)
    }

    pub fn max_recv_msgs(&self) -> u64 {
        self.recv_msgs.iter().copied().max().unwrap_or(0)
    }

    /// max over PEs of max(sent, received) messages
    pub fn max_msgs(&self) -> u64 {
        self.max_sent_msgs().max(self.max_recv_msgs())
    }

    pub fn max_words(&self) -> u64 {
        let s = self.sent_words.iter().copied().max().unwrap_or(0);
        let r = self.recv_words.iter().copied().max().unwrap_or(0);
        s.max(r)
    }

    pub fn is_conserved(&self) -> bool {
        self.sent_words.iter().sum::<u64>() == self.recv_words.iter().sum::<u64>()
            && self.sent_msgs.iter().sum::<u64>() == self.recv_msgs.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseCost {
    pub modeled_time: f64,
    pub max_words: u64,
    pub max_msgs: u64,
}

/// Traffic of one recursion level, accumulated over all groups of that level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelTraffic {
    pub level: usize,
    pub groups: usize,
    pub data: PeCounters,
    pub control: PeCounters,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostLedger {
    pub p: usize,
    pub supersteps: u64,
    pub modeled_time: f64,
    /// Modeled time spent in collectives (included in `modeled_time`).
    pub collective_time: f64,
    pub totals: PeCounters,
    pub phases: [PhaseCost; 4],
    pub levels: Vec<LevelTraffic>,
}

impl CostLedger {
    pub fn new(p: usize) -> Self {
        CostLedger {
            p,
            totals: PeCounters::new(p),
            ..Default::default()
        }
    }

    pub fn phase(&self, phase: Phase) -> &PhaseCost {
        &self.phases[phase.index()]
    }

    pub fn level(&self, level: usize) -> Option<&LevelTraffic> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub(crate) fn level_mut(&mut self, level: usize) -> &mut LevelTraffic {
        if let Some(i) = self.levels.iter().position(|l| l.level == level) {
            return &mut self.levels[i];
        }
        self.levels.push(LevelTraffic {
            level,
            groups: 0,
            data: PeCounters::new(self.p),
            control: PeCounters::new(self.p),
        });
        self.levels.sort_by_key(|l| l.level);
        let i = self.levels.iter().position(|l| l.level == level).unwrap();
        &mut self.levels[i]
    }

    /// Σ over levels of the max per-PE data-message count.
    pub fn data_msgs_summed_over_levels(&self) -> u64 {
        self.levels.iter().map(|l| l.data.max_msgs()).sum()
    }
}
