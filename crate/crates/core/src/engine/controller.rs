use rand::Rng;
use rand_distr::StandardNormal;

use super::state::BUDGET_EPS;
use crate::error::{Error, Result};
use crate::models::ModelPosterior;

/// The two moves open to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerChoice {
    /// Action 1: cheap-test the best untested candidate.
    Cheap,
    /// Action 2: expensive-test the best cheap-tested candidate.
    Expensive,
}

/// Best candidate of each set (when that test is affordable) and the budget
/// available to this decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerInputs {
    pub i_uu: Option<usize>,
    pub i_tu: Option<usize>,
    pub budget: f64,
    pub c_cheap: f64,
    pub c_expensive: f64,
}

/// Cheap-test probability that spends about half the budget on cheap tests of
/// candidates that never reach the expensive test.
pub fn str_probability(c_cheap: f64, c_expensive: f64) -> f64 {
    // (c_E + 2c_C) / (c_E + 3c_C), written so that round fractions stay exact
    1.0 - c_cheap / (c_expensive + 3.0 * c_cheap)
}

/// Cases where only one move makes sense. `Ok(None)` means the choice is open.
pub fn forced_choice(inputs: &ControllerInputs) -> Result<Option<ControllerChoice>> {
    match (inputs.i_uu, inputs.i_tu) {
        (None, None) => Err(Error::Precondition("no candidate to test: the screen is terminal".into())),
        (Some(_), None) => Ok(Some(ControllerChoice::Cheap)),
        (None, Some(_)) => Ok(Some(ControllerChoice::Expensive)),
        (Some(_), Some(_)) if inputs.budget + BUDGET_EPS < inputs.c_cheap + inputs.c_expensive => {
            Ok(Some(ControllerChoice::Expensive))
        }
        _ => Ok(None),
    }
}

/// Random controller: cheap with probability `p1` unless forced.
pub fn random_controller_decide<R: Rng + ?Sized>(p1: f64, inputs: &ControllerInputs, rng: &mut R) -> Result<ControllerChoice> {
    if let Some(c) = forced_choice(inputs)? {
        return Ok(c);
    }
    Ok(if rng.random_bool(p1.clamp(0.0, 1.0)) {
        ControllerChoice::Cheap
    } else {
        ControllerChoice::Expensive
    })
}

/// Both sides of the greedy rate comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyComparison {
    /// `E[max(α_tu, α_uu) | hypothetical cheap result] / (c_C + c_E)`.
    pub cheap_then_best_rate: f64,
    /// `α_tu / c_E`.
    pub expensive_now_rate: f64,
}

impl GreedyComparison {
    pub fn choice(&self) -> ControllerChoice {
        if self.cheap_then_best_rate > self.expensive_now_rate {
            ControllerChoice::Cheap
        } else {
            ControllerChoice::Expensive
        }
    }
}

/// Estimates the greedy comparison by drawing the cheap score of `i_uu` from
/// its predictive law `m_outer` times and re-scoring both candidates on the
/// augmented data.
///
/// `alpha(post, ids)` must return acquisition values for `ids` under `post`.
pub fn greedy_comparison<R, A>(
    post: &ModelPosterior,
    i_uu: usize,
    i_tu: usize,
    alpha_tu_now: f64,
    c_cheap: f64,
    c_expensive: f64,
    alpha: A,
    m_outer: usize,
    rng: &mut R,
) -> Result<GreedyComparison>
where
    R: Rng + ?Sized,
    A: Fn(&ModelPosterior, &[usize], &mut R) -> Result<Vec<f64>>,
{
    if m_outer == 0 {
        return Err(Error::Input("greedy controller needs at least one outer draw".into()));
    }
    let cheap = post.cheap_marginals(&[i_uu])?[0];
    let mut total = 0.0;
    for _ in 0..m_outer {
        let z: f64 = rng.sample(StandardNormal);
        let hypothetical = post.with_cheap(i_uu, cheap.mean + cheap.sd() * z)?;
        let v = alpha(&hypothetical, &[i_tu, i_uu], rng)?;
        total += v[0].max(v[1]);
    }
    Ok(GreedyComparison {
        cheap_then_best_rate: total / m_outer as f64 / (c_cheap + c_expensive),
        expensive_now_rate: alpha_tu_now / c_expensive,
    })
}

/// Greedy controller: forced cases first, then the rate comparison.
#[allow(clippy::too_many_arguments)]
pub fn greedy_controller_decide<R, A>(
    post: &ModelPosterior,
    inputs: &ControllerInputs,
    alpha_tu_now: f64,
    alpha: A,
    m_outer: usize,
    rng: &mut R,
) -> Result<ControllerChoice>
where
    R: Rng + ?Sized,
    A: Fn(&ModelPosterior, &[usize], &mut R) -> Result<Vec<f64>>,
{
    if let Some(c) = forced_choice(inputs)? {
        return Ok(c);
    }
    let (i_uu, i_tu) = (inputs.i_uu.unwrap(), inputs.i_tu.unwrap());
    Ok(greedy_comparison(post, i_uu, i_tu, alpha_tu_now, inputs.c_cheap, inputs.c_expensive, alpha, m_outer, rng)?.choice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inputs(i_uu: Option<usize>, i_tu: Option<usize>, budget: f64) -> ControllerInputs {
        ControllerInputs { i_uu, i_tu, budget, c_cheap: 0.2, c_expensive: 1.0 }
    }

    #[test]
    fn default_cheap_probability() {
        assert_eq!(str_probability(0.2, 1.0), 0.875);
        for (cc, ce) in [(0.1, 1.0), (0.5, 0.5), (2.0, 3.0)] {
            assert!((str_probability(cc, ce) - (ce + 2.0 * cc) / (ce + 3.0 * cc)).abs() < 1e-15);
        }
    }

    #[test]
    fn forced_cases() {
        assert_eq!(forced_choice(&inputs(Some(0), None, 10.0)).unwrap(), Some(ControllerChoice::Cheap));
        assert_eq!(forced_choice(&inputs(None, Some(1), 10.0)).unwrap(), Some(ControllerChoice::Expensive));
        assert_eq!(forced_choice(&inputs(Some(0), Some(1), 1.1)).unwrap(), Some(ControllerChoice::Expensive));
        assert_eq!(forced_choice(&inputs(Some(0), Some(1), 1.2)).unwrap(), None);
        assert!(forced_choice(&inputs(None, None, 10.0)).is_err());
    }

    #[test]
    fn p1_one_always_cheap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let c = random_controller_decide(1.0, &inputs(Some(0), Some(1), 10.0), &mut rng).unwrap();
            assert_eq!(c, ControllerChoice::Cheap);
        }
    }
}
