//! Tabular constrained POMDP instances and belief-space primitives.

use crate::error::SolveError;
use serde::{Deserialize, Serialize};

pub const DIST_TOL: f64 = 1e-12;

/// Probability vector over hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self, SolveError> {
        if probs.iter().any(|&p| p < 0.0) {
            return Err(SolveError::NegativeEntry { what: "belief" });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DIST_TOL {
            return Err(SolveError::BadDistribution {
                what: "belief",
                index: 0,
                sum,
            });
        }
        Ok(Belief(probs))
    }

    /// Normalize a nonnegative weight vector into a belief.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self, SolveError> {
        if weights.iter().any(|&p| p < 0.0) {
            return Err(SolveError::NegativeEntry { what: "belief" });
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(SolveError::Empty("belief weight vector"));
        }
        for w in weights.iter_mut() {
            *w /= sum;
        }
        Ok(Belief(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Belief(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(state: usize, n: usize) -> Self {
        let mut p = vec![0.0; n];
        p[state] = 1.0;
        Belief(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Convex combination `t*self + (1-t)*other`.
    pub fn blend(&self, other: &Belief, t: f64) -> Belief {
        let probs = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| t * a + (1.0 - t) * b)
            .collect();
        Belief(probs)
    }
}

/// One cost function with its episode budget.
#[derive(Debug, Clone)]
pub struct CostChannel {
    /// `values[s * n_actions + a]`.
    pub values: Vec<f64>,
    pub budget: f64,
}

/// Which signal a solver backs up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Reward,
    Cost(usize),
}

impl Channel {
    pub fn label(&self) -> String {
        match self {
            Channel::Reward => "reward".to_string(),
            Channel::Cost(i) => format!("cost{i}"),
        }
    }
}

/// Finite `(S, A, Z, P, O, R, {C_i, b_i}, gamma, b0)` instance.
///
/// Layouts are flat row-major: `transition[s][a][s']`, `observation[s'][a][z]`,
/// `reward[s][a]`. Every probability row is validated to sum to one within
/// 1e-12 with nonnegative entries.
#[derive(Debug, Clone)]
pub struct TabularCpomdp {
    n_states: usize,
    n_actions: usize,
    n_obs: usize,
    transition: Vec<f64>,
    observation: Vec<f64>,
    reward: Vec<f64>,
    costs: Vec<CostChannel>,
    gamma: f64,
    initial_belief: Belief,
}

impl TabularCpomdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        n_obs: usize,
        transition: Vec<f64>,
        observation: Vec<f64>,
        reward: Vec<f64>,
        costs: Vec<CostChannel>,
        gamma: f64,
        initial_belief: Belief,
    ) -> Result<Self, SolveError> {
        if n_states == 0 || n_actions == 0 || n_obs == 0 {
            return Err(SolveError::Empty("state/action/observation space"));
        }
        check_len("transition", &transition, n_states * n_actions * n_states)?;
        check_len("observation", &observation, n_states * n_actions * n_obs)?;
        check_len("reward", &reward, n_states * n_actions)?;
        for (i, ch) in costs.iter().enumerate() {
            check_len("cost", &ch.values, n_states * n_actions)?;
            if ch.budget < 0.0 {
                return Err(SolveError::NegativeEntry { what: "budget" });
            }
            let _ = i;
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(SolveError::BadDiscount(gamma));
        }
        if initial_belief.len() != n_states {
            return Err(SolveError::LengthMismatch {
                what: "initial belief",
                expected: n_states,
                got: initial_belief.len(),
            });
        }
        check_rows("transition", &transition, n_states)?;
        check_rows("observation", &observation, n_obs)?;
        Ok(TabularCpomdp {
            n_states,
            n_actions,
            n_obs,
            transition,
            observation,
            reward,
            costs,
            gamma,
            initial_belief,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_observations(&self) -> usize {
        self.n_obs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_belief(&self) -> &Belief {
        &self.initial_belief
    }

    pub fn cost_channels(&self) -> &[CostChannel] {
        &self.costs
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + s2]
    }

    #[inline]
    pub fn o(&self, s2: usize, a: usize, z: usize) -> f64 {
        self.observation[(s2 * self.n_actions + a) * self.n_obs + z]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    #[inline]
    pub fn cost(&self, channel: usize, s: usize, a: usize) -> f64 {
        self.costs[channel].values[s * self.n_actions + a]
    }

    /// Signal value for a backup channel.
    pub fn signal(&self, channel: Channel, s: usize, a: usize) -> f64 {
        match channel {
            Channel::Reward => self.r(s, a),
            Channel::Cost(i) => self.cost(i, s, a),
        }
    }

    pub fn channels(&self) -> Vec<Channel> {
        let mut out = vec![Channel::Reward];
        out.extend((0..self.costs.len()).map(Channel::Cost));
        out
    }

    /// `Pr(z | b, a) = sum_{s'} O[s'][a][z] sum_s P[s][a][s'] b(s)`.
    pub fn obs_probability(&self, b: &Belief, a: usize, z: usize) -> f64 {
        let mut total = 0.0;
        for s2 in 0..self.n_states {
            let mut reach = 0.0;
            for (s, &bs) in b.probs().iter().enumerate() {
                if bs > 0.0 {
                    reach += self.p(s, a, s2) * bs;
                }
            }
            total += self.o(s2, a, z) * reach;
        }
        total
    }

    /// Belief-space expected signal `sum_s b(s) X(s, a)`.
    pub fn belief_signal(&self, channel: Channel, b: &Belief, a: usize) -> f64 {
        b.probs()
            .iter()
            .enumerate()
            .map(|(s, &bs)| bs * self.signal(channel, s, a))
            .sum()
    }
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), SolveError> {
    if v.len() != expected {
        return Err(SolveError::LengthMismatch {
            what,
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

fn check_rows(what: &'static str, flat: &[f64], row: usize) -> Result<(), SolveError> {
    if flat.iter().any(|&p| p < 0.0) {
        return Err(SolveError::NegativeEntry { what });
    }
    for (i, chunk) in flat.chunks(row).enumerate() {
        let sum: f64 = chunk.iter().sum();
        if (sum - 1.0).abs() > DIST_TOL {
            return Err(SolveError::BadDistribution { what, index: i, sum });
        }
    }
    Ok(())
}

/// Bayes filter step: `b'(s') ∝ O[s'][a][z] sum_s P[s][a][s'] b(s)`.
///
/// Fails when the observation has zero probability under `(b, a)` so the
/// caller can skip the branch.
pub fn belief_update(
    model: &TabularCpomdp,
    b: &Belief,
    a: usize,
    z: usize,
) -> Result<Belief, SolveError> {
    let n = model.n_states();
    let mut weights = vec![0.0; n];
    let mut total = 0.0;
    for s2 in 0..n {
        let mut reach = 0.0;
        for (s, &bs) in b.probs().iter().enumerate() {
            if bs > 0.0 {
                reach += model.p(s, a, s2) * bs;
            }
        }
        let w = model.o(s2, a, z) * reach;
        weights[s2] = w;
        total += w;
    }
    if total <= 0.0 {
        return Err(SolveError::ImpossibleObservation {
            action: a,
            observation: z,
        });
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(Belief(weights))
}

/// On-disk instance layout (JSON): nested probability tables indexed as
/// `P[s][a][s']`, `O[s'][a][z]`, `R[s][a]`, `C[i][s][a]`.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub states: usize,
    pub actions: usize,
    pub observations: usize,
    #[serde(rename = "P")]
    pub transition: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "O")]
    pub observation: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub reward: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub costs: Vec<Vec<Vec<f64>>>,
    pub budgets: Vec<f64>,
    pub gamma: f64,
    pub b0: Vec<f64>,
}

impl InstanceFile {
    pub fn into_model(self) -> Result<TabularCpomdp, SolveError> {
        let (ns, na, nz) = (self.states, self.actions, self.observations);
        let flatten3 = |t: Vec<Vec<Vec<f64>>>| -> Vec<f64> {
            t.into_iter().flatten().flatten().collect()
        };
        if self.costs.len() != self.budgets.len() {
            return Err(SolveError::Format(format!(
                "{} cost tables but {} budgets",
                self.costs.len(),
                self.budgets.len()
            )));
        }
        let costs = self
            .costs
            .into_iter()
            .zip(&self.budgets)
            .map(|(table, &budget)| CostChannel {
                values: table.into_iter().flatten().collect(),
                budget,
            })
            .collect();
        TabularCpomdp::new(
            ns,
            na,
            nz,
            flatten3(self.transition),
            flatten3(self.observation),
            self.reward.into_iter().flatten().collect(),
            costs,
            self.gamma,
            Belief::new(self.b0)?,
        )
    }

    pub fn from_model(m: &TabularCpomdp) -> Self {
        let (ns, na, nz) = (m.n_states, m.n_actions, m.n_obs);
        let transition = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| (0..ns).map(|s2| m.p(s, a, s2)).collect())
                    .collect()
            })
            .collect();
        let observation = (0..ns)
            .map(|s2| {
                (0..na)
                    .map(|a| (0..nz).map(|z| m.o(s2, a, z)).collect())
                    .collect()
            })
            .collect();
        let reward = (0..ns)
            .map(|s| (0..na).map(|a| m.r(s, a)).collect())
            .collect();
        let costs = (0..m.costs.len())
            .map(|i| {
                (0..ns)
                    .map(|s| (0..na).map(|a| m.cost(i, s, a)).collect())
                    .collect()
            })
            .collect();
        InstanceFile {
            states: ns,
            actions: na,
            observations: nz,
            transition,
            observation,
            reward,
            costs,
            budgets: m.costs.iter().map(|c| c.budget).collect(),
            gamma: m.gamma,
            b0: m.initial_belief.probs().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two hidden states, listen-style informative observation.
    pub(crate) fn tiger_like() -> TabularCpomdp {
        let n = 2;
        // Single action "listen": state persists, observation is correct
        // with probability 0.85.
        let transition = vec![
            1.0, 0.0, // s0
            0.0, 1.0, // s1
        ];
        let observation = vec![
            0.85, 0.15, // s'=0
            0.15, 0.85, // s'=1
        ];
        let reward = vec![0.0, 0.0];
        TabularCpomdp::new(
            n,
            1,
            2,
            transition,
            observation,
            reward,
            vec![],
            0.9,
            Belief::uniform(n),
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_transition_row() {
        let err = TabularCpomdp::new(
            1,
            1,
            1,
            vec![0.5],
            vec![1.0],
            vec![0.0],
            vec![],
            0.9,
            Belief::uniform(1),
        )
        .unwrap_err();
        assert!(matches!(err, SolveError::BadDistribution { .. }));
    }

    #[test]
    fn deterministic_update_is_point_mass() {
        let m = TabularCpomdp::new(
            2,
            1,
            1,
            vec![0.0, 1.0, 0.0, 1.0], // everything moves to s1
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![],
            1.0,
            Belief::point_mass(0, 2),
        )
        .unwrap();
        let b = belief_update(&m, &Belief::point_mass(0, 2), 0, 0).unwrap();
        assert_eq!(b.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn bayes_posterior_matches_joint_enumeration() {
        let m = tiger_like();
        let b = Belief::uniform(2);
        let posterior = belief_update(&m, &b, 0, 0).unwrap();
        // Enumerate the joint over (s, s', z=0) by hand.
        let mut joint = [0.0f64; 2];
        for s in 0..2 {
            for s2 in 0..2 {
                joint[s2] += b.probs()[s] * m.p(s, 0, s2) * m.o(s2, 0, 0);
            }
        }
        let total: f64 = joint.iter().sum();
        for s2 in 0..2 {
            assert!((posterior.probs()[s2] - joint[s2] / total).abs() < 1e-15);
        }
        assert!((posterior.probs()[0] - 0.85).abs() < 1e-12);
    }

    #[test]
    fn uninformative_observation_keeps_uniform_belief() {
        // Doubly stochastic symmetric transition, uniform observation.
        let m = TabularCpomdp::new(
            2,
            1,
            2,
            vec![0.7, 0.3, 0.3, 0.7],
            vec![0.5, 0.5, 0.5, 0.5],
            vec![0.0, 0.0],
            vec![],
            1.0,
            Belief::uniform(2),
        )
        .unwrap();
        let b = belief_update(&m, &Belief::uniform(2), 0, 1).unwrap();
        for &p in b.probs() {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn impossible_observation_is_an_error() {
        let m = TabularCpomdp::new(
            1,
            1,
            2,
            vec![1.0],
            vec![1.0, 0.0],
            vec![0.0],
            vec![],
            1.0,
            Belief::uniform(1),
        )
        .unwrap();
        let err = belief_update(&m, &Belief::uniform(1), 0, 1).unwrap_err();
        assert!(matches!(err, SolveError::ImpossibleObservation { .. }));
    }

    #[test]
    fn instance_file_round_trips() {
        let m = tiger_like();
        let file = InstanceFile::from_model(&m);
        let json = serde_json::to_string(&file).unwrap();
        let parsed: InstanceFile = serde_json::from_str(&json).unwrap();
        let m2 = parsed.into_model().unwrap();
        assert_eq!(m2.n_states(), m.n_states());
        assert_eq!(m2.p(0, 0, 0), m.p(0, 0, 0));
        assert_eq!(m2.o(1, 0, 1), m.o(1, 0, 1));
    }
}
