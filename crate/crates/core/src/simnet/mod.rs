//! Deterministic bulk-synchronous simulation of `p` message-passing PEs.
//!
//! PE state lives with the caller; the [`Network`] delivers messages between
//! supersteps and keeps the [`CostLedger`]. Bulk data exchanges are executed
//! message by message. Collectives (broadcast, reductions, prefix sums,
//! gossiping) compute their result directly and are charged the closed-form
//! tree cost `β·ℓ + α·⌈log₂ P⌉`.
//!
//! Disjoint groups that run "at the same time" are simulated one after the
//! other between [`Network::fork`] and [`Network::join`]; the modeled clock
//! advances by the slowest branch only.

mod group;
mod ledger;

pub use group::PeGroup;
pub use ledger::{
    ceil_log2, CostLedger, CostParams, ExchStats, LevelTraffic, PeCounters, Phase, PhaseCost,
    Traffic,
};

use rayon::prelude::*;

use crate::element::{is_sorted, Element};
use crate::error::{Result, SortError};
use crate::merge::merge_sorted;

/// Anything that can be sent in a message, sized in machine words.
pub trait Payload {
    fn words(&self) -> u64;
}

impl Payload for Element {
    fn words(&self) -> u64 {
        1
    }
}

impl Payload for u64 {
    fn words(&self) -> u64 {
        1
    }
}

impl<T: Payload> Payload for Vec<T> {
    fn words(&self) -> u64 {
        self.iter().map(Payload::words).sum()
    }
}

/// Outgoing messages of one PE: `(destination PE, payload)`.
pub type Outbox<M> = Vec<(usize, M)>;
/// Incoming messages of one PE: `(source PE, payload)`, ordered by source.
pub type Inbox<M> = Vec<(usize, M)>;

pub struct Network {
    p: usize,
    cost: CostParams,
    ledger: CostLedger,
    phase: Phase,
    level: usize,
}

/// Snapshot taken before simulating a set of concurrent branches.
#[derive(Debug, Clone)]
pub struct Fork {
    start_time: f64,
    start_collective: f64,
    start_phases: [f64; 4],
    best: Option<(f64, f64, [f64; 4])>,
}

impl Network {
    pub fn new(p: usize, cost: CostParams) -> Self {
        assert!(p >= 1, "a network needs at least one PE");
        Network {
            p,
            cost,
            ledger: CostLedger::new(p),
            phase: Phase::SplitterSelection,
            level: 1,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn cost(&self) -> CostParams {
        self.cost
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> CostLedger {
        self.ledger
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Marks the start of recursion level `level` with `groups` target groups.
    pub fn enter_level(&mut self, level: usize, groups: usize) {
        self.level = level;
        let entry = self.ledger.level_mut(level);
        entry.groups = entry.groups.max(groups);
    }

    pub fn fork(&self) -> Fork {
        Fork {
            start_time: self.ledger.modeled_time,
            start_collective: self.ledger.collective_time,
            start_phases: self.phase_times(),
            best: None,
        }
    }

    /// Runs one concurrent branch starting from the fork's clock.
    pub fn branch<R>(&mut self, fork: &mut Fork, f: impl FnOnce(&mut Self) -> R) -> R {
        let (phase, level) = (self.phase, self.level);
        self.ledger.modeled_time = fork.start_time;
        self.ledger.collective_time = fork.start_collective;
        self.set_phase_times(fork.start_phases);
        let out = f(self);
        let now = self.ledger.modeled_time;
        if fork.best.is_none_or(|(t, _, _)| now > t) {
            fork.best = Some((now, self.ledger.collective_time, self.phase_times()));
        }
        self.phase = phase;
        self.level = level;
        out
    }

    /// Sets the clock to the slowest branch.
    pub fn join(&mut self, fork: Fork) {
        let (t, c, phases) = fork
            .best
            .unwrap_or((fork.start_time, fork.start_collective, fork.start_phases));
        self.ledger.modeled_time = t;
        self.ledger.collective_time = c;
        self.set_phase_times(phases);
    }

    fn phase_times(&self) -> [f64; 4] {
        let mut t = [0.0; 4];
        for (slot, ph) in t.iter_mut().zip(&self.ledger.phases) {
            *slot = ph.modeled_time;
        }
        t
    }

    fn set_phase_times(&mut self, t: [f64; 4]) {
        for (ph, v) in self.ledger.phases.iter_mut().zip(t) {
            ph.modeled_time = v;
        }
    }

    fn charge(&mut self, time: f64) {
        self.ledger.modeled_time += time;
        self.ledger.phases[self.phase.index()].modeled_time += time;
    }

    /// Charges a collective over `participants` PEs moving `words` words.
    pub fn charge_collective(&mut self, participants: usize, words: u64) {
        let t = self.cost.collective(participants, words);
        self.ledger.collective_time += t;
        self.charge(t);
    }

    /// Charges a fixed number of startup latencies.
    pub fn charge_latency(&mut self, startups: u32) {
        let t = self.cost.alpha * f64::from(startups);
        self.ledger.collective_time += t;
        self.charge(t);
    }

    fn check_members<T>(&self, group: &PeGroup, per_member: &[T]) -> Result<()> {
        if per_member.len() != group.size() {
            return Err(SortError::precondition(format!(
                "{} inputs supplied for a group of {} PEs",
                per_member.len(),
                group.size()
            )));
        }
        if let Some(&pe) = group.members().iter().find(|&&pe| pe >= self.p) {
            return Err(SortError::Addressing {
                dest: pe,
                lo: 0,
                hi: self.p,
            });
        }
        Ok(())
    }

    /// Delivers every message of `outboxes` (indexed by group-local member)
    /// and charges `h·β + r·α`. Self-messages and empty messages are
    /// delivered but not counted.
    pub fn exchange<M: Payload>(
        &mut self,
        group: &PeGroup,
        outboxes: Vec<Outbox<M>>,
        traffic: Traffic,
    ) -> Result<(Vec<Inbox<M>>, ExchStats)> {
        self.check_members(group, &outboxes)?;
        for (dest, _) in outboxes.iter().flatten() {
            if !group.contains(*dest) {
                return Err(SortError::Addressing {
                    dest: *dest,
                    lo: group.lo(),
                    hi: group.lo() + group.size(),
                });
            }
        }
        let size = group.size();
        let mut local = PeCounters::new(size);
        let mut inboxes: Vec<Inbox<M>> = (0..size).map(|_| Vec::new()).collect();
        let mut traffic_log = Vec::new();
        for (src_local, outbox) in outboxes.into_iter().enumerate() {
            let src = group.member(src_local);
            for (dest, payload) in outbox {
                let dest_local = group.local_index(dest).expect("checked above");
                let words = payload.words();
                if dest != src && words > 0 {
                    local.record(src_local, dest_local, words);
                    traffic_log.push((src, dest, words));
                }
                inboxes[dest_local].push((src, payload));
            }
        }
        let max_words = local.max_words();
        let max_msgs = local.max_msgs();
        let stats = ExchStats {
            participants: size,
            max_words,
            max_msgs,
            modeled_cost: max_words as f64 * self.cost.beta + max_msgs as f64 * self.cost.alpha,
        };
        self.ledger.supersteps += 1;
        self.charge(stats.modeled_cost);
        let phase = &mut self.ledger.phases[self.phase.index()];
        phase.max_words = phase.max_words.max(max_words);
        phase.max_msgs = phase.max_msgs.max(max_msgs);
        let level = self.level;
        for (src, dest, words) in traffic_log {
            self.ledger.totals.record(src, dest, words);
            let lt = self.ledger.level_mut(level);
            match traffic {
                Traffic::Data => lt.data.record(src, dest, words),
                Traffic::Control => lt.control.record(src, dest, words),
            }
        }
        Ok((inboxes, stats))
    }

    /// One superstep: every member runs `step` on its own state (possibly on
    /// parallel workers), then all produced messages are exchanged.
    pub fn run_superstep<S, M, F>(
        &mut self,
        group: &PeGroup,
        states: &mut [S],
        traffic: Traffic,
        step: F,
    ) -> Result<(Vec<Inbox<M>>, ExchStats)>
    where
        S: Send,
        M: Payload + Send,
        F: Fn(usize, &mut S) -> Outbox<M> + Sync,
    {
        self.check_members(group, states)?;
        let outboxes: Vec<Outbox<M>> = states
            .par_iter_mut()
            .enumerate()
            .map(|(i, s)| step(group.member(i), s))
            .collect();
        self.exchange(group, outboxes, traffic)
    }

    pub fn broadcast<T: Payload + Clone>(
        &mut self,
        group: &PeGroup,
        root: usize,
        payload: &[T],
    ) -> Result<Vec<T>> {
        if !group.contains(root) {
            return Err(SortError::precondition(format!(
                "broadcast root {root} is not a member of the group"
            )));
        }
        let words = payload.iter().map(Payload::words).sum();
        self.charge_collective(group.size(), words);
        Ok(payload.to_vec())
    }

    /// Element-wise all-reduction of equal-length vectors.
    pub fn allreduce_vec<T: Copy>(
        &mut self,
        group: &PeGroup,
        vecs: &[Vec<T>],
        op: impl Fn(T, T) -> T,
    ) -> Result<Vec<T>> {
        self.check_members(group, vecs)?;
        let len = equal_len(vecs)?;
        let mut acc = vecs[0].clone();
        for v in &vecs[1..] {
            for (a, &b) in acc.iter_mut().zip(v) {
                *a = op(*a, b);
            }
        }
        self.charge_collective(group.size(), len as u64);
        Ok(acc)
    }

    /// Exclusive vector prefix sum over the members in group order, plus
    /// the group total.
    pub fn prefix_sum_vec(
        &mut self,
        group: &PeGroup,
        vecs: &[Vec<u64>],
    ) -> Result<(Vec<Vec<u64>>, Vec<u64>)> {
        self.check_members(group, vecs)?;
        let len = equal_len(vecs)?;
        let mut running = vec![0u64; len];
        let mut prefixes = Vec::with_capacity(vecs.len());
        for v in vecs {
            prefixes.push(running.clone());
            running.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        self.charge_collective(group.size(), len as u64);
        Ok((prefixes, running))
    }

    /// All-gather of sorted sequences where received sequences are merged
    /// rather than concatenated. Every member ends with the same result, so
    /// it is returned once. Charged as hypercube gossiping: `⌈log₂ P⌉`
    /// startups plus the largest volume any member receives.
    pub fn gossip_merge(&mut self, group: &PeGroup, local_sorted: &[Vec<Element>]) -> Result<Vec<Element>> {
        self.check_members(group, local_sorted)?;
        if let Some(i) = local_sorted.iter().position(|s| !is_sorted(s)) {
            return Err(SortError::precondition(format!(
                "gossip input of member {i} is not sorted"
            )));
        }
        let total: u64 = local_sorted.iter().map(|s| s.len() as u64).sum();
        let max_recv = local_sorted
            .iter()
            .map(|s| total - s.len() as u64)
            .max()
            .unwrap_or(0);
        self.charge_collective(group.size(), max_recv);
        let views: Vec<&[Element]> = local_sorted.iter().map(Vec::as_slice).collect();
        Ok(merge_sorted(&views))
    }
}

fn equal_len<T>(vecs: &[Vec<T>]) -> Result<usize> {
    let len = vecs.first().map_or(0, Vec::len);
    if vecs.iter().any(|v| v.len() != len) {
        return Err(SortError::precondition("collective vectors differ in length"));
    }
    if vecs.is_empty() {
        return Err(SortError::precondition("collective over an empty group"));
    }
    Ok(len)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(p: usize) -> Network {
        Network::new(p, CostParams::new(10.0, 1.0))
    }

    fn words(n: u64) -> Vec<u64> {
        (0..n).collect()
    }

    #[test]
    fn single_message() {
        let mut n = net(2);
        let g = PeGroup::all(2);
        let (inbox, stats) = n
            .exchange(&g, vec![vec![(1, words(3))], vec![]], Traffic::Data)
            .unwrap();
        assert_eq!((stats.participants, stats.max_words, stats.max_msgs), (2, 3, 1));
        assert_eq!(stats.modeled_cost, 13.0);
        assert_eq!(inbox[1], vec![(0, words(3))]);
    }

    #[test]
    fn all_to_all_excludes_self() {
        let mut n = net(4);
        let g = PeGroup::all(4);
        let out: Vec<Outbox<Vec<u64>>> = (0..4)
            .map(|_| (0..4).map(|d| (d, vec![7u64])).collect())
            .collect();
        let (inbox, stats) = n.exchange(&g, out, Traffic::Data).unwrap();
        assert_eq!((stats.max_words, stats.max_msgs), (3, 3));
        // delivery includes the self-message and is ordered by sender
        assert_eq!(inbox[2].iter().map(|(s, _)| *s).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(n.ledger().totals.is_conserved());
    }

    #[test]
    fn empty_superstep_is_free() {
        let mut n = net(3);
        let (_, stats) = n
            .exchange::<Vec<u64>>(&PeGroup::all(3), vec![vec![], vec![], vec![]], Traffic::Data)
            .unwrap();
        assert_eq!(stats.max_words + stats.max_msgs, 0);
        assert_eq!(n.ledger().modeled_time, 0.0);
    }

    #[test]
    fn star_pattern_receive_dominates() {
        let p = 6;
        let mut n = net(p);
        let out: Vec<Outbox<Vec<u64>>> = (0..p).map(|_| vec![(0, vec![1u64])]).collect();
        let (_, stats) = n.exchange(&PeGroup::all(p), out, Traffic::Data).unwrap();
        assert_eq!(stats.max_msgs, (p - 1) as u64);
    }

    #[test]
    fn addressing_outside_group_fails() {
        let mut n = net(4);
        let g = PeGroup::contiguous(0, 2);
        let err = n
            .exchange(&g, vec![vec![(3, vec![1u64])], vec![]], Traffic::Data)
            .unwrap_err();
        assert!(matches!(err, SortError::Addressing { dest: 3, .. }));
    }

    #[test]
    fn broadcast_costs() {
        let mut n = net(8);
        n.broadcast(&PeGroup::all(1), 0, &words(5)).unwrap();
        assert_eq!(n.ledger().modeled_time, 0.0);
        n.broadcast(&PeGroup::all(8), 0, &words(5)).unwrap();
        assert_eq!(n.ledger().modeled_time, 35.0);
        n.broadcast::<u64>(&PeGroup::all(3), 1, &[]).unwrap();
        assert_eq!(n.ledger().modeled_time, 55.0);
        assert!(n.broadcast(&PeGroup::all(3), 5, &words(1)).is_err());
    }

    #[test]
    fn prefix_sums() {
        let mut n = net(3);
        let (pre, total) = n
            .prefix_sum_vec(&PeGroup::all(3), &[vec![1], vec![2], vec![3]])
            .unwrap();
        assert_eq!(pre, vec![vec![0], vec![1], vec![3]]);
        assert_eq!(total, vec![6]);
        let mut n = net(2);
        let (pre, total) = n
            .prefix_sum_vec(&PeGroup::all(2), &[vec![1, 2], vec![10, 20]])
            .unwrap();
        assert_eq!(pre, vec![vec![0, 0], vec![1, 2]]);
        assert_eq!(total, vec![11, 22]);
        assert!(n.prefix_sum_vec(&PeGroup::all(2), &[vec![1], vec![1, 2]]).is_err());
    }

    #[test]
    fn allreduce_max() {
        let mut n = net(4);
        let v: Vec<Vec<u64>> = (1..=4).map(|i| vec![i]).collect();
        assert_eq!(n.allreduce_vec(&PeGroup::all(4), &v, u64::max).unwrap(), vec![4]);
    }

    #[test]
    fn gossip_merges() {
        let mut n = net(2);
        let e = |k| Element::new(k, 0, k as u32);
        let out = n
            .gossip_merge(&PeGroup::all(2), &[vec![e(1), e(3)], vec![e(2), e(4)]])
            .unwrap();
        assert_eq!(out.iter().map(|x| x.key).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert!(n
            .gossip_merge(&PeGroup::all(2), &[vec![e(3), e(1)], vec![]])
            .is_err());
    }

    #[test]
    fn fork_charges_slowest_branch() {
        let mut n = net(4);
        let mut fork = n.fork();
        n.branch(&mut fork, |n| n.charge_latency(1));
        n.branch(&mut fork, |n| n.charge_latency(3));
        n.branch(&mut fork, |n| n.charge_latency(2));
        n.join(fork);
        assert_eq!(n.ledger().modeled_time, 30.0);
    }
}
