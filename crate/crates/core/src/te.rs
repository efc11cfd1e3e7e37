//! Per-player trial-and-error learner.
//!
//! A player only sees its own realized utility. Its state is a mood plus a
//! benchmark action and benchmark utility; content players occasionally
//! experiment, discontent players search the whole action set until they
//! settle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Action;
use crate::error::{invalid, Error, Result};

/// Floor applied to the acceptance exponents so probabilities stay inside (0, 1).
pub const EXPONENT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mood {
    Content,
    Hopeful,
    Watchful,
    Discontent,
}

impl Mood {
    pub fn as_str(self) -> &'static str {
        match self {
            Mood::Content => "content",
            Mood::Hopeful => "hopeful",
            Mood::Watchful => "watchful",
            Mood::Discontent => "discontent",
        }
    }
}

impl std::fmt::Display for Mood {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeState {
    pub mood: Mood,
    pub benchmark_action: Action,
    pub benchmark_utility: f64,
    pub last_action: Action,
    pub experimented_last_step: bool,
}

impl TeState {
    /// Discontent with no prior knowledge: the given benchmark and zero benchmark utility.
    pub fn discontent(benchmark: Action) -> Self {
        Self {
            mood: Mood::Discontent,
            benchmark_action: benchmark,
            benchmark_utility: 0.0,
            last_action: benchmark,
            experimented_last_step: false,
        }
    }

    pub fn content(benchmark: Action, utility: f64) -> Self {
        Self {
            mood: Mood::Content,
            benchmark_action: benchmark,
            benchmark_utility: utility,
            last_action: benchmark,
            experimented_last_step: false,
        }
    }
}

/// Experimentation rate and the linear acceptance exponents
/// `G(du) = g_slope * du + g_intercept` and `F(u) = (f_slope * u + f_intercept) / K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeParams {
    pub epsilon: f64,
    pub g_slope: f64,
    pub g_intercept: f64,
    pub f_slope: f64,
    pub f_intercept: f64,
    pub num_players: usize,
}

impl TeParams {
    pub fn new(epsilon: f64, num_players: usize) -> Result<Self> {
        let params = Self {
            epsilon,
            g_slope: -0.2,
            g_intercept: 0.2,
            f_slope: -0.2,
            f_intercept: 0.2,
            num_players,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.num_players == 0 {
            return Err(invalid("K must be positive"));
        }
        Ok(())
    }

    pub fn g(&self, delta_u: f64) -> Result<f64> {
        check_unit(delta_u, "G argument in [0, 1]")?;
        Ok((self.g_slope * delta_u + self.g_intercept).max(EXPONENT_FLOOR))
    }

    pub fn f(&self, u: f64) -> Result<f64> {
        check_unit(u, "F argument in [0, 1]")?;
        Ok(((self.f_slope * u + self.f_intercept) / self.num_players as f64).max(EXPONENT_FLOOR))
    }

    /// Probability a content player adopts an experiment that improved utility by `delta_u`.
    pub fn experiment_acceptance(&self, delta_u: f64) -> Result<f64> {
        Ok(self.epsilon.powf(self.g(delta_u)?))
    }

    /// Probability a discontent player settles after observing `u`.
    pub fn discontent_acceptance(&self, u: f64) -> Result<f64> {
        Ok(self.epsilon.powf(self.f(u)?))
    }
}

fn check_unit(x: f64, domain: &'static str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain { value: x, domain })
    }
}

/// `G(du) = -0.2 du + 0.2`, floored at [`EXPONENT_FLOOR`].
pub fn g_fn(delta_u: f64) -> Result<f64> {
    check_unit(delta_u, "G argument in [0, 1]")?;
    Ok((-0.2 * delta_u + 0.2).max(EXPONENT_FLOOR))
}

/// `F(u) = -(0.2/K) u + 0.2/K`, floored at [`EXPONENT_FLOOR`].
pub fn f_fn(u: f64, num_players: usize) -> Result<f64> {
    check_unit(u, "F argument in [0, 1]")?;
    if num_players == 0 {
        return Err(invalid("K must be positive"));
    }
    let k = num_players as f64;
    Ok((-(0.2 / k) * u + 0.2 / k).max(EXPONENT_FLOOR))
}

/// Draws the action to play this step.
///
/// Content players keep the benchmark with probability `1 - epsilon` and
/// otherwise try a uniformly drawn different action; hopeful and watchful
/// players replay the benchmark; discontent players draw uniformly from all
/// `num_actions` actions.
pub fn select_action<R: Rng + ?Sized>(
    state: &TeState,
    num_actions: usize,
    num_power_levels: usize,
    epsilon: f64,
    rng: &mut R,
) -> (Action, bool) {
    match state.mood {
        Mood::Content => {
            if num_actions > 1 && rng.random::<f64>() < epsilon {
                let bench = state.benchmark_action.index(num_power_levels);
                let mut pick = rng.random_range(0..num_actions - 1);
                if pick >= bench {
                    pick += 1;
                }
                (Action::from_index(pick, num_power_levels), true)
            } else {
                (state.benchmark_action, false)
            }
        }
        Mood::Hopeful | Mood::Watchful => (state.benchmark_action, false),
        Mood::Discontent => {
            let pick = rng.random_range(0..num_actions);
            (Action::from_index(pick, num_power_levels), true)
        }
    }
}

/// Records what was played so [`update`] can resolve it.
pub fn record_play(state: &mut TeState, action: Action, experimented: bool) {
    state.last_action = action;
    state.experimented_last_step = experimented;
}

/// Resolves the step just played given the realized utility.
pub fn update<R: Rng + ?Sized>(state: &TeState, utility: f64, params: &TeParams, rng: &mut R) -> Result<TeState> {
    check_unit(utility, "utility in [0, 1]")?;
    let mut next = *state;
    let bench = state.benchmark_utility;
    match state.mood {
        Mood::Content if state.experimented_last_step => {
            if utility > bench {
                let p = params.experiment_acceptance(utility - bench)?;
                if rng.random::<f64>() < p {
                    next.benchmark_action = state.last_action;
                    next.benchmark_utility = utility;
                }
            }
        }
        Mood::Content => {
            if utility > bench {
                next.mood = Mood::Hopeful;
            } else if utility < bench {
                next.mood = Mood::Watchful;
            }
        }
        Mood::Hopeful => {
            if utility > bench {
                next.mood = Mood::Content;
                next.benchmark_utility = utility;
            } else if utility < bench {
                next.mood = Mood::Watchful;
            } else {
                next.mood = Mood::Content;
            }
        }
        Mood::Watchful => {
            next.mood = if utility < bench {
                Mood::Discontent
            } else if utility > bench {
                Mood::Hopeful
            } else {
                Mood::Content
            };
        }
        Mood::Discontent => {
            let p = params.discontent_acceptance(utility)?;
            if rng.random::<f64>() < p {
                next.mood = Mood::Content;
                next.benchmark_action = state.last_action;
                next.benchmark_utility = utility;
            }
        }
    }
    next.experimented_last_step = false;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const Q: usize = 4;
    const M: usize = 12;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn g_values() {
        assert_relative_eq!(g_fn(0.0).unwrap(), 0.2, epsilon = 1e-15);
        assert_relative_eq!(g_fn(0.5).unwrap(), 0.1, epsilon = 1e-15);
        // Zero at the endpoint, floored.
        assert_eq!(g_fn(1.0).unwrap(), EXPONENT_FLOOR);
        assert!(g_fn(1.5).is_err());
        assert!(g_fn(-0.1).is_err());
    }

    #[test]
    fn f_values() {
        assert_relative_eq!(f_fn(0.0, 4).unwrap(), 0.05, epsilon = 1e-15);
        assert_relative_eq!(f_fn(0.5, 2).unwrap(), 0.05, epsilon = 1e-15);
        assert_eq!(f_fn(1.0, 3).unwrap(), EXPONENT_FLOOR);
        assert!(f_fn(2.0, 3).is_err());
    }

    #[test]
    fn params_match_free_functions() {
        let p = TeParams::new(0.02, 4).unwrap();
        for x in [0.0, 0.25, 0.5, 0.99, 1.0] {
            assert_eq!(p.g(x).unwrap(), g_fn(x).unwrap());
            assert_eq!(p.f(x).unwrap(), f_fn(x, 4).unwrap());
        }
        assert!(TeParams::new(0.0, 4).is_err());
        assert!(TeParams::new(1.0, 4).is_err());
    }

    #[test]
    fn discontent_acceptance_example() {
        let p = TeParams::new(0.02, 4).unwrap();
        // F(0.5) = 0.025 and 0.02^0.025 = exp(0.025 ln 0.02).
        let want = (0.025 * 0.02f64.ln()).exp();
        assert_relative_eq!(p.discontent_acceptance(0.5).unwrap(), want, epsilon = 1e-12);
        assert!((want - 0.907).abs() < 1e-3);
    }

    #[test]
    fn content_with_zero_epsilon_keeps_benchmark() {
        let s = TeState::content(Action::new(1, 2), 0.5);
        let mut r = rng();
        for _ in 0..1000 {
            assert_eq!(select_action(&s, M, Q, 0.0, &mut r), (Action::new(1, 2), false));
        }
    }

    #[test]
    fn content_experiment_never_repeats_benchmark() {
        let s = TeState::content(Action::new(2, 3), 0.5);
        let mut r = rng();
        for _ in 0..2000 {
            let (a, exp) = select_action(&s, M, Q, 1.0 - 1e-12, &mut r);
            assert!(exp);
            assert_ne!(a, s.benchmark_action);
            assert!(a.index(Q) < M);
        }
    }

    #[test]
    fn intermediate_moods_replay_benchmark() {
        let mut r = rng();
        for mood in [Mood::Watchful, Mood::Hopeful] {
            let s = TeState { mood, ..TeState::content(Action::new(0, 1), 0.4) };
            assert_eq!(select_action(&s, M, Q, 0.5, &mut r), (Action::new(0, 1), false));
        }
    }

    #[test]
    fn discontent_search_is_uniform() {
        let s = TeState::discontent(Action::new(0, 0));
        let mut r = rng();
        let n = 100_000usize;
        let mut counts = [0usize; M];
        for _ in 0..n {
            counts[select_action(&s, M, Q, 0.02, &mut r).0.index(Q)] += 1;
        }
        let p = 1.0 / M as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.5 * sigma, "count {c}");
        }
    }

    fn played(mut s: TeState, a: Action, experimented: bool) -> TeState {
        record_play(&mut s, a, experimented);
        s
    }

    #[test]
    fn content_experiment_loss_leaves_state() {
        let params = TeParams::new(0.02, 3).unwrap();
        let s = played(TeState::content(Action::new(0, 1), 0.6), Action::new(1, 1), true);
        let next = update(&s, 0.3, &params, &mut rng()).unwrap();
        assert_eq!(next.mood, Mood::Content);
        assert_eq!(next.benchmark_action, Action::new(0, 1));
        assert_eq!(next.benchmark_utility, 0.6);
    }

    #[test]
    fn content_experiment_gain_is_adopted_at_rate() {
        let params = TeParams::new(0.02, 3).unwrap();
        let s = played(TeState::content(Action::new(0, 1), 0.4), Action::new(1, 0), true);
        let mut r = rng();
        let n = 20_000;
        let adopted = (0..n)
            .filter(|_| update(&s, 0.9, &params, &mut r).unwrap().benchmark_action == Action::new(1, 0))
            .count();
        let p = params.experiment_acceptance(0.5).unwrap();
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((adopted as f64 - n as f64 * p).abs() < 4.0 * sigma);
    }

    #[test]
    fn watchful_then_loss_turns_discontent() {
        let params = TeParams::new(0.02, 3).unwrap();
        let mut r = rng();
        let s = played(TeState::content(Action::new(0, 1), 0.6), Action::new(0, 1), false);
        let w = update(&s, 0.2, &params, &mut r).unwrap();
        assert_eq!(w.mood, Mood::Watchful);
        assert_eq!(w.benchmark_utility, 0.6);
        let d = update(&played(w, Action::new(0, 1), false), 0.2, &params, &mut r).unwrap();
        assert_eq!(d.mood, Mood::Discontent);
    }

    #[test]
    fn hopeful_confirmation_updates_benchmark_utility() {
        let params = TeParams::new(0.02, 3).unwrap();
        let mut r = rng();
        let s = played(TeState::content(Action::new(0, 1), 0.5), Action::new(0, 1), false);
        let h = update(&s, 0.7, &params, &mut r).unwrap();
        assert_eq!(h.mood, Mood::Hopeful);
        assert_eq!(h.benchmark_utility, 0.5);
        let c = update(&played(h, Action::new(0, 1), false), 0.8, &params, &mut r).unwrap();
        assert_eq!(c.mood, Mood::Content);
        assert_eq!(c.benchmark_utility, 0.8);
    }

    #[test]
    fn ties_resolve_to_content() {
        let params = TeParams::new(0.02, 3).unwrap();
        let mut r = rng();
        let base = TeState::content(Action::new(0, 1), 0.5);
        for mood in [Mood::Content, Mood::Hopeful, Mood::Watchful] {
            let s = played(TeState { mood, ..base }, Action::new(0, 1), false);
            let next = update(&s, 0.5, &params, &mut r).unwrap();
            assert_eq!(next.mood, Mood::Content);
            assert_eq!(next.benchmark_utility, 0.5);
        }
        let s = played(base, Action::new(2, 2), true);
        assert_eq!(update(&s, 0.5, &params, &mut r).unwrap().benchmark_action, Action::new(0, 1));
    }

    #[test]
    fn cross_mood_swaps() {
        let params = TeParams::new(0.02, 3).unwrap();
        let mut r = rng();
        let base = TeState::content(Action::new(0, 1), 0.5);
        let h = played(TeState { mood: Mood::Hopeful, ..base }, Action::new(0, 1), false);
        assert_eq!(update(&h, 0.1, &params, &mut r).unwrap().mood, Mood::Watchful);
        let w = played(TeState { mood: Mood::Watchful, ..base }, Action::new(0, 1), false);
        assert_eq!(update(&w, 0.9, &params, &mut r).unwrap().mood, Mood::Hopeful);
    }

    #[test]
    fn discontent_settles_on_last_action() {
        let params = TeParams::new(0.02, 3).unwrap();
        let mut r = rng();
        let s = played(TeState::discontent(Action::new(0, 0)), Action::new(2, 3), true);
        let mut settled = None;
        for _ in 0..1000 {
            let next = update(&s, 0.7, &params, &mut r).unwrap();
            if next.mood == Mood::Content {
                settled = Some(next);
                break;
            }
        }
        let next = settled.expect("acceptance probability is close to one");
        assert_eq!(next.benchmark_action, Action::new(2, 3));
        assert_eq!(next.benchmark_utility, 0.7);
    }

    #[test]
    fn utility_out_of_range_is_rejected() {
        let params = TeParams::new(0.02, 3).unwrap();
        let s = TeState::content(Action::new(0, 0), 0.5);
        assert!(update(&s, 1.2, &params, &mut rng()).is_err());
    }
}
