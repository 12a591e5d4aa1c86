//! Deterministic tabular policies and their composition with per-level
//! decoders into observation-space policies.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::ulo::Decoder;
use rand::Rng as _;

/// Per-level map from (decoded) state index to action index. Decision
/// levels only: index `h` in `0..H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularPolicy {
    actions: Vec<Vec<usize>>,
}

impl TabularPolicy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        TabularPolicy { actions }
    }

    /// Policy taking `action` everywhere.
    pub fn constant(states_per_decision_level: &[usize], action: usize) -> Self {
        TabularPolicy {
            actions: states_per_decision_level
                .iter()
                .map(|&n| vec![action; n])
                .collect(),
        }
    }

    pub fn random(states_per_decision_level: &[usize], num_actions: usize, rng: &mut Rng) -> Self {
        TabularPolicy {
            actions: states_per_decision_level
                .iter()
                .map(|&n| (0..n).map(|_| rng.random_range(0..num_actions)).collect())
                .collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn states_at(&self, h: usize) -> usize {
        self.actions[h].len()
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h][s]
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.actions
    }
}

/// Observation-space policy acting through per-level decoders: the action
/// at `(h, x)` is exactly `policy(h, decoder_h(x))`.
#[derive(Debug, Clone)]
pub struct ObsPolicy {
    policy: TabularPolicy,
    decoders: Vec<Decoder>,
}

impl ObsPolicy {
    pub fn policy(&self) -> &TabularPolicy {
        &self.policy
    }

    pub fn decoders(&self) -> &[Decoder] {
        &self.decoders
    }

    pub fn horizon(&self) -> usize {
        self.policy.horizon()
    }

    #[inline]
    pub fn act(&self, h: usize, obs: &[f64]) -> usize {
        self.policy.action(h, self.decoders[h].predict(obs))
    }
}

/// Composes a tabular policy with per-level decoders. Requires one
/// decoder per level (`H + 1`; the terminal decoder is carried for
/// trajectory decoding) and, at each decision level, a decoder class
/// count equal to the policy's state count.
pub fn compose_policy(pi: TabularPolicy, decoders: Vec<Decoder>) -> Result<ObsPolicy> {
    let horizon = pi.horizon();
    if decoders.len() != horizon + 1 {
        return Err(Error::contract(format!(
            "need {} decoders (one per level), got {}",
            horizon + 1,
            decoders.len()
        )));
    }
    for (h, dec) in decoders.iter().enumerate().take(horizon) {
        if dec.classes() != pi.states_at(h) {
            return Err(Error::contract(format!(
                "level {h}: decoder emits {} labels, policy defined on {} states",
                dec.classes(),
                pi.states_at(h)
            )));
        }
    }
    Ok(ObsPolicy { policy: pi, decoders })
}
