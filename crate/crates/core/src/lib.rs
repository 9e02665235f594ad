//! Multi-level parallel sorting on a simulated distributed-memory machine.
//!
//! Two algorithms are provided, both running on `p` virtual PEs of a
//! [`simnet::Network`] that accounts every message:
//!
//! * [`rlm::rlm_sort`], recurse-last multiway mergesort with perfectly
//!   balanced output,
//! * [`ams::ams_sort`], adaptive multi-level sample sort with
//!   overpartitioning and `(1+ε)` balanced output.
//!
//! Their building blocks (multisequence selection, fast work-inefficient
//! ranking, the data delivery schemes, pseudorandom permutations) are
//! public so they can be exercised on their own.

pub mod ams;
pub mod delivery;
pub mod element;
pub mod error;
pub mod experiment;
pub mod fastsort;
pub mod feistel;
pub mod merge;
pub mod multiselect;
pub mod outcome;
pub mod rlm;
pub mod seed;
pub mod simnet;

pub use delivery::DeliveryScheme;
pub use element::{compare_tiebreak, Element};
pub use error::{Result, SortError};
pub use feistel::PseudorandomPermutation;
pub use outcome::{LevelImbalance, SortOutcome};
pub use seed::SeedSpec;
pub use simnet::{CostLedger, CostParams, ExchStats, Network, PeGroup, Phase};
