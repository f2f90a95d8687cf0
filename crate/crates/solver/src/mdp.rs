//! Finite-horizon state-space value iteration; the asymmetric side of the
//! theory, where values condition on the underlying state.

use crate::error::SolveError;
use crate::model::{Belief, Channel, TabularCpomdp};

/// Max-backup value iteration on an arbitrary per-(s, a) signal.
///
/// Returns `values[stage][s]` where stage 0 holds the full-horizon optimum
/// and stage `horizon` is identically zero.
pub fn value_iteration_with(
    model: &TabularCpomdp,
    horizon: usize,
    signal: impl Fn(usize, usize) -> f64,
) -> Vec<Vec<f64>> {
    let n = model.n_states();
    let mut stages = vec![vec![0.0; n]; horizon + 1];
    for t in (0..horizon).rev() {
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..model.n_actions() {
                let mut q = signal(s, a);
                let next = &stages[t + 1];
                for s2 in 0..n {
                    let p = model.p(s, a, s2);
                    if p > 0.0 {
                        q += model.gamma() * p * next[s2];
                    }
                }
                if q > best {
                    best = q;
                }
            }
            stages[t][s] = best;
        }
    }
    stages
}

/// Optimal finite-horizon state values for one channel. Cost channels use
/// the same max backup with `C_i` in place of `R`.
pub fn state_value_iteration(
    model: &TabularCpomdp,
    channel: Channel,
    horizon: usize,
) -> Vec<Vec<f64>> {
    value_iteration_with(model, horizon, |s, a| model.signal(channel, s, a))
}

/// Per-channel solution bundle.
pub struct MdpSolution {
    pub reward: Vec<Vec<f64>>,
    pub costs: Vec<Vec<Vec<f64>>>,
}

pub fn mdp_value_iteration(model: &TabularCpomdp, horizon: usize) -> MdpSolution {
    MdpSolution {
        reward: state_value_iteration(model, Channel::Reward, horizon),
        costs: (0..model.cost_channels().len())
            .map(|i| state_value_iteration(model, Channel::Cost(i), horizon))
            .collect(),
    }
}

/// `V(b) = sum_s b(s) V(s)` — the belief expectation of state values.
pub fn asymmetric_belief_value(state_values: &[f64], b: &Belief) -> f64 {
    debug_assert_eq!(state_values.len(), b.len());
    state_values
        .iter()
        .zip(b.probs())
        .map(|(&v, &p)| v * p)
        .sum()
}

/// Value iteration on the surrogate signal `R - sum_i lambda_i C_i`.
/// Budget offsets are constants per stage and are left to the caller.
pub fn scalarized_value_iteration(
    model: &TabularCpomdp,
    multipliers: &[f64],
    horizon: usize,
) -> Result<Vec<Vec<f64>>, SolveError> {
    if multipliers.iter().any(|&l| l < 0.0) {
        return Err(SolveError::NegativeMultiplier);
    }
    if multipliers.len() != model.cost_channels().len() {
        return Err(SolveError::LengthMismatch {
            what: "multipliers",
            expected: model.cost_channels().len(),
            got: multipliers.len(),
        });
    }
    Ok(value_iteration_with(model, horizon, |s, a| {
        let mut v = model.r(s, a);
        for (i, &lam) in multipliers.iter().enumerate() {
            v -= lam * model.cost(i, s, a);
        }
        v
    }))
}

/// Greedy stage-0 action per state under the scalarized surrogate.
pub fn scalarized_greedy_policy(
    model: &TabularCpomdp,
    multipliers: &[f64],
    horizon: usize,
) -> Result<Vec<usize>, SolveError> {
    let stages = scalarized_value_iteration(model, multipliers, horizon)?;
    let n = model.n_states();
    let mut policy = vec![0; n];
    for s in 0..n {
        let mut best = f64::NEG_INFINITY;
        for a in 0..model.n_actions() {
            let mut q = model.r(s, a);
            for (i, &lam) in multipliers.iter().enumerate() {
                q -= lam * model.cost(i, s, a);
            }
            if horizon > 0 {
                for s2 in 0..n {
                    q += model.gamma() * model.p(s, a, s2) * stages[1][s2];
                }
            }
            if q > best {
                best = q;
                policy[s] = a;
            }
        }
    }
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Belief, CostChannel};

    fn single_action_unit_reward() -> TabularCpomdp {
        TabularCpomdp::new(
            2,
            1,
            1,
            vec![0.5, 0.5, 0.5, 0.5],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![],
            0.9,
            Belief::uniform(2),
        )
        .unwrap()
    }

    #[test]
    fn horizon_zero_is_identically_zero() {
        let m = single_action_unit_reward();
        let v = state_value_iteration(&m, Channel::Reward, 0);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0], vec![0.0, 0.0]);
    }

    #[test]
    fn geometric_series_value() {
        let m = single_action_unit_reward();
        let v = state_value_iteration(&m, Channel::Reward, 3);
        for s in 0..2 {
            assert!((v[0][s] - 2.71).abs() < 1e-12);
        }
    }

    #[test]
    fn two_state_two_action_matches_expectimax() {
        // Random-ish fixed instance solved by depth-recursive enumeration.
        let m = TabularCpomdp::new(
            2,
            2,
            1,
            vec![
                0.8, 0.2, // s0 a0
                0.1, 0.9, // s0 a1
                0.4, 0.6, // s1 a0
                0.7, 0.3, // s1 a1
            ],
            vec![1.0, 1.0, 1.0, 1.0],
            vec![0.5, 1.0, 0.0, 0.25],
            vec![],
            0.95,
            Belief::uniform(2),
        )
        .unwrap();
        fn expectimax(m: &TabularCpomdp, s: usize, depth: usize) -> f64 {
            if depth == 0 {
                return 0.0;
            }
            (0..m.n_actions())
                .map(|a| {
                    let mut q = m.r(s, a);
                    for s2 in 0..m.n_states() {
                        q += m.gamma() * m.p(s, a, s2) * expectimax(m, s2, depth - 1);
                    }
                    q
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
        let v = state_value_iteration(&m, Channel::Reward, 2);
        for s in 0..2 {
            assert!((v[0][s] - expectimax(&m, s, 2)).abs() < 1e-12);
        }
    }

    #[test]
    fn belief_value_is_dot_product() {
        let b = Belief::uniform(2);
        assert!((asymmetric_belief_value(&[2.0, 4.0], &b) - 3.0).abs() < 1e-15);
        let point = Belief::point_mass(1, 2);
        assert!((asymmetric_belief_value(&[2.0, 4.0], &point) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn scalarized_with_zero_multiplier_equals_reward_vi() {
        let m = costed_instance();
        let plain = state_value_iteration(&m, Channel::Reward, 4);
        let scal = scalarized_value_iteration(&m, &[0.0], 4).unwrap();
        assert_eq!(plain, scal);
    }

    /// One state; risky action pays 1.0 with cost 1, safe pays 0.5 with 0.
    pub(crate) fn costed_instance() -> TabularCpomdp {
        TabularCpomdp::new(
            1,
            2,
            1,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 0.5],
            vec![CostChannel {
                values: vec![1.0, 0.0],
                budget: 0.0,
            }],
            0.9,
            Belief::uniform(1),
        )
        .unwrap()
    }

    #[test]
    fn large_multiplier_switches_to_safe_action() {
        let m = costed_instance();
        // Threshold: 1 - lambda < 0.5 at lambda > 0.5.
        let below = scalarized_greedy_policy(&m, &[0.49], 3).unwrap();
        let above = scalarized_greedy_policy(&m, &[0.51], 3).unwrap();
        assert_eq!(below[0], 0, "risky action below the threshold");
        assert_eq!(above[0], 1, "safe action above the threshold");
    }

    #[test]
    fn single_state_closed_form_surrogate() {
        let m = costed_instance();
        let lam = 0.25;
        let v = scalarized_value_iteration(&m, &[lam], 5).unwrap();
        // Best arm under the surrogate: max(1 - 0.25, 0.5) = 0.75 per step.
        let per_step: f64 = 0.75;
        let gamma: f64 = 0.9;
        let expected = per_step * (1.0 - gamma.powi(5)) / (1.0 - gamma);
        assert!((v[0][0] - expected).abs() < 1e-12);
    }

    #[test]
    fn negative_multiplier_rejected() {
        let m = costed_instance();
        assert!(scalarized_value_iteration(&m, &[-0.1], 3).is_err());
    }

    #[test]
    fn monotone_in_horizon_for_nonnegative_reward() {
        let m = single_action_unit_reward();
        for h in 0..5 {
            let short = state_value_iteration(&m, Channel::Reward, h);
            let long = state_value_iteration(&m, Channel::Reward, h + 1);
            for s in 0..m.n_states() {
                assert!(long[0][s] >= short[0][s] - 1e-12);
            }
        }
    }
}
