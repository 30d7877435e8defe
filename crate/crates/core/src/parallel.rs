//! Asynchronous workers simulated with a discrete-event loop.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::engine::{
    single_test_state, Action, Agent, DecisionView, Policy, Recorder, ScreenSpec, ScreenState, SequentialAgent,
    SingleTestAgent, SingleTestPolicy, TestKind, Trace,
};
use crate::error::{Error, Result};

/// A test in flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub finish_time: f64,
    pub dispatch_time: f64,
    pub worker_id: usize,
    pub action: Action,
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    // BinaryHeap is a max-heap: the earliest finish (then lowest worker) wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .finish_time
            .total_cmp(&self.finish_time)
            .then(other.worker_id.cmp(&self.worker_id))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of one simulated parallel screen.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelRun {
    /// Completed tests in completion order, with timestamps.
    pub trace: Trace,
    /// Largest `spent + reserved` seen at any dispatch.
    pub peak_committed: f64,
    /// Largest number of tests in flight at once.
    pub peak_in_flight: usize,
}

/// Duration of one test: uniform on `[c/2, 3c/2]`.
pub fn sample_duration<R: Rng + ?Sized>(cost: f64, rng: &mut R) -> f64 {
    rng.random_range(0.5 * cost..=1.5 * cost)
}

struct InFlight {
    heap: BinaryHeap<SimEvent>,
    locked: BTreeSet<usize>,
    cheap: usize,
    expensive: usize,
}

impl InFlight {
    fn reserved(&self, state: &ScreenState) -> f64 {
        self.cheap as f64 * state.c_cheap() + self.expensive as f64 * state.c_expensive()
    }
}

/// Runs `agent` on `workers` simulated workers. Durations come from their own
/// stream seeded by `duration_seed`, so the agent's decisions do not depend
/// on it when `workers == 1`.
pub fn simulate_agent<A: Agent + ?Sized>(
    agent: &mut A,
    mut state: ScreenState,
    oracle: &Dataset,
    screen: &ScreenSpec,
    workers: usize,
    duration_seed: u64,
) -> Result<ParallelRun> {
    if workers == 0 {
        return Err(Error::Config("need at least one worker".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(duration_seed);
    let mut rec = Recorder::new(oracle, screen, &state)?;
    let mut fl = InFlight { heap: BinaryHeap::new(), locked: BTreeSet::new(), cheap: 0, expensive: 0 };
    let mut idle: BTreeSet<usize> = (0..workers).collect();
    let mut now = 0.0;
    let mut peak_committed: f64 = 0.0;
    let mut peak_in_flight = 0;
    loop {
        // Idle workers ask in id order; a worker that gets nothing stays idle
        // until the next completion changes what is available.
        for w in idle.clone() {
            let view = DecisionView {
                state: &state,
                locked: &fl.locked,
                reserved: fl.reserved(&state),
                in_flight_cheap: fl.cheap,
                in_flight_expensive: fl.expensive,
            };
            let Some(action) = agent.decide(&view)? else {
                continue;
            };
            if fl.locked.contains(&action.candidate) {
                return Err(Error::Precondition(format!("candidate {} is already in flight", action.candidate)));
            }
            let cost = state.cost(action.test);
            if !state.affordable(action.test, fl.reserved(&state)) {
                return Err(Error::Precondition(format!("{} test on {} exceeds the unreserved budget", action.test, action.candidate)));
            }
            match action.test {
                TestKind::Cheap => fl.cheap += 1,
                TestKind::Expensive => fl.expensive += 1,
            }
            fl.locked.insert(action.candidate);
            let finish_time = now + sample_duration(cost, &mut rng);
            fl.heap.push(SimEvent { finish_time, dispatch_time: now, worker_id: w, action });
            idle.remove(&w);
            peak_committed = peak_committed.max(state.spent() + fl.reserved(&state));
            peak_in_flight = peak_in_flight.max(fl.heap.len());
        }
        let Some(ev) = fl.heap.pop() else { break };
        now = ev.finish_time;
        fl.locked.remove(&ev.action.candidate);
        match ev.action.test {
            TestKind::Cheap => fl.cheap -= 1,
            TestKind::Expensive => fl.expensive -= 1,
        }
        rec.apply(&mut state, ev.action, oracle, ev.worker_id, Some((ev.dispatch_time, ev.finish_time)))?;
        idle.insert(ev.worker_id);
    }
    Ok(ParallelRun { trace: rec.trace, peak_committed, peak_in_flight })
}

/// Two-test screen on `workers` asynchronous workers.
pub fn simulate_parallel(
    oracle: &Dataset,
    screen: &ScreenSpec,
    policy: &Policy,
    workers: usize,
    duration_seed: u64,
) -> Result<ParallelRun> {
    let state = ScreenState::new(oracle.features.clone(), screen.budget, screen.c_cheap, screen.c_expensive)?;
    let mut agent = SequentialAgent::new(policy.clone(), screen.n_top)?;
    simulate_agent(&mut agent, state, oracle, screen, workers, duration_seed)
}

/// Single-test screen on `workers` asynchronous workers.
pub fn simulate_parallel_single_test(
    oracle: &Dataset,
    screen: &ScreenSpec,
    policy: &SingleTestPolicy,
    workers: usize,
    duration_seed: u64,
) -> Result<ParallelRun> {
    let state = single_test_state(oracle, screen, policy.mode)?;
    let mut agent = SingleTestAgent::new(policy.clone(), oracle.dim(), screen.n_top)?;
    simulate_agent(&mut agent, state, oracle, screen, workers, duration_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_pops_earliest_then_lowest_worker() {
        let ev = |t, w| SimEvent { finish_time: t, dispatch_time: 0.0, worker_id: w, action: Action::cheap(0) };
        let mut h = BinaryHeap::from(vec![ev(2.0, 0), ev(1.0, 3), ev(1.0, 1), ev(0.5, 2)]);
        let order: Vec<usize> = std::iter::from_fn(|| h.pop().map(|e| e.worker_id)).collect();
        assert_eq!(order, vec![2, 1, 3, 0]);
    }

    #[test]
    fn durations_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let d = sample_duration(0.2, &mut rng);
            assert!((0.1..=0.3).contains(&d));
        }
    }
}
