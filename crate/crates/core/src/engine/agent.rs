use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::controller::{greedy_controller_decide, random_controller_decide, str_probability, ControllerChoice, ControllerInputs};
use super::policy::{AcquisitionKind, ControllerKind, Policy};
use super::state::{Action, ScreenState, TestKind, TestStatus};
use crate::acquisition::{estimate_threshold, greedy_mining, thompson, ThresholdEstimate};
use crate::error::Result;
use crate::models::{ModelPosterior, RefitCache};

/// What a worker sees when it asks for its next test.
#[derive(Debug, Clone, Copy)]
pub struct DecisionView<'a> {
    pub state: &'a ScreenState,
    /// Candidates with a test in flight.
    pub locked: &'a BTreeSet<usize>,
    /// Budget already committed to in-flight tests.
    pub reserved: f64,
    pub in_flight_cheap: usize,
    pub in_flight_expensive: usize,
}

impl<'a> DecisionView<'a> {
    /// View with nothing in flight.
    pub fn idle(state: &'a ScreenState, locked: &'a BTreeSet<usize>) -> Self {
        DecisionView { state, locked, reserved: 0.0, in_flight_cheap: 0, in_flight_expensive: 0 }
    }

    pub fn budget(&self) -> f64 {
        self.state.budget_remaining() - self.reserved
    }

    /// Unlocked candidates with `status` whose next test is affordable.
    pub fn open(&self, status: TestStatus) -> Vec<usize> {
        let test = match status {
            TestStatus::Uu => TestKind::Cheap,
            TestStatus::Tu => TestKind::Expensive,
            TestStatus::Tt => return Vec::new(),
        };
        if !self.state.affordable(test, self.reserved) {
            return Vec::new();
        }
        (0..self.state.len())
            .filter(|&i| self.state.status(i) == status && !self.locked.contains(&i))
            .collect()
    }
}

/// Anything that picks the next test for a worker.
pub trait Agent {
    /// `Ok(None)` when no test can be dispatched from this view.
    fn decide(&mut self, view: &DecisionView<'_>) -> Result<Option<Action>>;
}

/// Uniform subsample of at most `cap` ids, kept in id order.
pub(crate) fn cap_pool<R: Rng + ?Sized>(ids: Vec<usize>, cap: usize, rng: &mut R) -> Vec<usize> {
    if ids.len() <= cap {
        return ids;
    }
    let mut picked: Vec<usize> = sample(rng, ids.len(), cap).into_iter().map(|k| ids[k]).collect();
    picked.sort_unstable();
    picked
}

/// Rank target scaled to a subsampled joint pool.
pub(crate) fn scaled_rank(n_top: usize, tested: usize, pool: usize, untested: usize) -> usize {
    if pool >= untested {
        return n_top.min(tested + pool).max(1);
    }
    let scaled = (n_top as f64 * (tested + pool) as f64 / (tested + untested) as f64).round() as usize;
    scaled.clamp(1, tested + pool)
}

/// Two-test sequential agent: one greedy or Thompson acquisition feeding a
/// greedy or random controller.
pub struct SequentialAgent {
    policy: Policy,
    n_top: usize,
    model: RefitCache,
    tau: Option<(ThresholdEstimate, usize)>,
    rng: ChaCha8Rng,
}

impl SequentialAgent {
    pub fn new(policy: Policy, n_top: usize) -> Result<Self> {
        policy.validate()?;
        Ok(SequentialAgent {
            model: RefitCache::new(policy.model.clone()),
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            tau: None,
            n_top,
            policy,
        })
    }

    /// Most recent threshold estimate, if any.
    pub fn threshold(&self) -> Option<ThresholdEstimate> {
        self.tau.map(|t| t.0)
    }

    pub fn model(&self) -> &crate::models::ScoreModel {
        self.model.model()
    }

    fn maybe_refit(&mut self, state: &ScreenState) -> Result<()> {
        if let Some(every) = self.policy.settings.refit_every {
            if self.model.pending(state) >= every && self.model.update(state, &self.policy.settings.refit)? {
                self.tau = None;
            }
        }
        Ok(())
    }

    fn threshold_for(&mut self, post: &ModelPosterior, state: &ScreenState) -> Result<f64> {
        let now = state.expensive_tests();
        if let Some((est, at)) = &mut self.tau {
            est.age = now - *at;
            if est.age < self.policy.settings.tau_refresh_every {
                return Ok(est.tau);
            }
        }
        let (joint, rank) = joint_pool(post, &[], self.n_top, self.policy.settings.joint_pool_cap, &mut self.rng);
        let samples = post.sample_expensive(&joint, self.policy.settings.threshold_samples, &mut self.rng)?;
        let est = estimate_threshold(&samples, rank)?;
        self.tau = Some((est, now));
        Ok(est.tau)
    }

    /// Scoring context that stays fixed within one decision.
    fn scorer(&mut self, post: &ModelPosterior, state: &ScreenState) -> Result<Scorer> {
        let tau = match self.policy.acquisition {
            AcquisitionKind::Threshold => Some(self.threshold_for(post, state)?),
            _ => None,
        };
        let normals = (0..self.policy.settings.acquisition_samples)
            .map(|_| self.rng.sample(StandardNormal))
            .collect();
        Ok(Scorer {
            kind: self.policy.acquisition,
            y_max: state.y_max_expensive(),
            tau,
            n_top: self.n_top,
            joint_pool_cap: self.policy.settings.joint_pool_cap,
            mining_samples: self.policy.settings.mining_samples,
            normals,
        })
    }

    fn decide_greedy(&mut self, view: &DecisionView<'_>, post: &ModelPosterior, uu: Vec<usize>, tu: Vec<usize>) -> Result<Action> {
        let state = view.state;
        let scorer = self.scorer(post, state)?;
        // The first expensive test is forced so that EI has an incumbent.
        if state.expensive_tests() == 0 && view.in_flight_expensive == 0 && !tu.is_empty() {
            let tu = cap_pool(tu, self.policy.settings.pool_cap, &mut self.rng);
            let v = scorer.score(post, &tu, &mut self.rng)?;
            return Ok(Action::expensive(argmax(&tu, &v).unwrap().0));
        }
        let pool_cap = self.policy.settings.pool_cap;
        let uu = cap_pool(uu, pool_cap, &mut self.rng);
        let tu = cap_pool(tu, pool_cap, &mut self.rng);
        let best_uu = if uu.is_empty() { None } else { argmax(&uu, &scorer.score(post, &uu, &mut self.rng)?) };
        let best_tu = if tu.is_empty() { None } else { argmax(&tu, &scorer.score(post, &tu, &mut self.rng)?) };
        let inputs = ControllerInputs {
            i_uu: best_uu.map(|b| b.0),
            i_tu: best_tu.map(|b| b.0),
            budget: view.budget(),
            c_cheap: state.c_cheap(),
            c_expensive: state.c_expensive(),
        };
        let choice = if scorer.uses_mean() {
            // no incumbent yet, so the two rates are not comparable
            if inputs.i_uu.is_some() {
                ControllerChoice::Cheap
            } else {
                ControllerChoice::Expensive
            }
        } else {
            greedy_controller_decide(
                post,
                &inputs,
                best_tu.map_or(0.0, |b| b.1),
                |p, ids, r| scorer.score(p, ids, r),
                self.policy.settings.controller_samples,
                &mut self.rng,
            )?
        };
        Ok(match choice {
            ControllerChoice::Cheap => Action::cheap(inputs.i_uu.unwrap()),
            ControllerChoice::Expensive => Action::expensive(inputs.i_tu.unwrap()),
        })
    }

    fn decide_random(&mut self, view: &DecisionView<'_>, post: &ModelPosterior, uu: Vec<usize>, tu: Vec<usize>, p1: f64) -> Result<Action> {
        let state = view.state;
        let inputs = ControllerInputs {
            i_uu: uu.first().copied(),
            i_tu: tu.first().copied(),
            budget: view.budget(),
            c_cheap: state.c_cheap(),
            c_expensive: state.c_expensive(),
        };
        let choice = random_controller_decide(p1, &inputs, &mut self.rng)?;
        let pool = match choice {
            ControllerChoice::Cheap => uu,
            ControllerChoice::Expensive => tu,
        };
        let pool = cap_pool(pool, self.policy.settings.pool_cap, &mut self.rng);
        let best = if self.policy.acquisition == AcquisitionKind::Thompson {
            let draw = post.sample_expensive(&pool, 1, &mut self.rng)?;
            thompson(&draw)?.argmax().unwrap().0
        } else {
            let scorer = self.scorer(post, state)?;
            let v = scorer.score(post, &pool, &mut self.rng)?;
            argmax(&pool, &v).unwrap().0
        };
        Ok(match choice {
            ControllerChoice::Cheap => Action::cheap(best),
            ControllerChoice::Expensive => Action::expensive(best),
        })
    }
}

/// Tested candidates plus a capped pool of the rest (always including
/// `must`), and the rank target scaled to that pool.
fn joint_pool<R: Rng + ?Sized>(post: &ModelPosterior, must: &[usize], n_top: usize, cap: usize, rng: &mut R) -> (Vec<usize>, usize) {
    let tested: Vec<usize> = (0..post.len()).filter(|&i| post.status(i) == TestStatus::Tt).collect();
    let untested: Vec<usize> = (0..post.len()).filter(|&i| post.status(i) != TestStatus::Tt).collect();
    let n_untested = untested.len();
    let mut pool = cap_pool(untested, cap, rng);
    for &i in must {
        if post.status(i) != TestStatus::Tt {
            if let Err(at) = pool.binary_search(&i) {
                pool.insert(at, i);
            }
        }
    }
    let rank = scaled_rank(n_top, tested.len(), pool.len(), n_untested);
    let mut joint = tested;
    joint.extend(pool);
    joint.sort_unstable();
    (joint, rank)
}

/// Greedy acquisition values with the incumbent, threshold and common
/// random numbers held fixed.
struct Scorer {
    kind: AcquisitionKind,
    y_max: Option<f64>,
    tau: Option<f64>,
    n_top: usize,
    joint_pool_cap: usize,
    mining_samples: usize,
    normals: Vec<f64>,
}

impl Scorer {
    fn uses_mean(&self) -> bool {
        self.kind == AcquisitionKind::ExpectedImprovement && self.y_max.is_none()
    }

    fn score<R: Rng + ?Sized>(&self, post: &ModelPosterior, ids: &[usize], rng: &mut R) -> Result<Vec<f64>> {
        match self.kind {
            AcquisitionKind::ExpectedImprovement => match self.y_max {
                None => post.expensive_means(ids, &self.normals),
                Some(y_max) => Ok(post
                    .expensive_marginals(ids, &self.normals)?
                    .iter()
                    .map(|m| m.expected_improvement(y_max))
                    .collect()),
            },
            AcquisitionKind::Threshold => {
                let tau = self.tau.expect("threshold is estimated before scoring");
                Ok(post.expensive_marginals(ids, &self.normals)?.iter().map(|m| m.exceedance(tau)).collect())
            }
            AcquisitionKind::Mining => {
                let (joint, rank) = joint_pool(post, ids, self.n_top, self.joint_pool_cap, rng);
                let samples = post.sample_expensive(&joint, self.mining_samples, rng)?;
                let values = greedy_mining(&samples, rank)?;
                Ok(ids.iter().map(|&i| values.get(i).unwrap_or(0.0)).collect())
            }
            AcquisitionKind::Thompson => unreachable!("Thompson is not a greedy acquisition"),
        }
    }
}

/// Best `(id, value)`; ties go to the lowest id.
fn argmax(ids: &[usize], values: &[f64]) -> Option<(usize, f64)> {
    ids.iter()
        .zip(values)
        .map(|(&i, &v)| (i, v))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
}

impl Agent for SequentialAgent {
    fn decide(&mut self, view: &DecisionView<'_>) -> Result<Option<Action>> {
        let state = view.state;
        let uu = view.open(TestStatus::Uu);
        let tu = view.open(TestStatus::Tu);
        if uu.is_empty() && tu.is_empty() {
            return Ok(None);
        }
        let cheap_started = state.cheap_tests() + view.in_flight_cheap;
        if cheap_started < self.policy.settings.init_random && !uu.is_empty() {
            let pick = uu[self.rng.random_range(0..uu.len())];
            return Ok(Some(Action::cheap(pick)));
        }
        self.maybe_refit(state)?;
        let post = self.model.model().condition(state)?;
        let action = match self.policy.controller {
            ControllerKind::Greedy => self.decide_greedy(view, &post, uu, tu)?,
            ControllerKind::Random { p1 } => {
                let p1 = p1.unwrap_or_else(|| str_probability(state.c_cheap(), state.c_expensive()));
                self.decide_random(view, &post, uu, tu, p1)?
            }
        };
        Ok(Some(action))
    }
}
