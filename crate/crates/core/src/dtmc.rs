//! Reduced Markov chain of the TE dynamics on the simplified channel.
//!
//! The chain has an equilibrium state `Eq`, a ladder of stages `C_1 .. C_K`
//! and a single-discontent state `D`. Stage `C_j` moves to `C_{j-1}` at rate
//! `j (C - K + j) / (C Q) * eps^(1 + G(du))` (times `Q_S` for the satisfaction
//! target), and `C_0` is `Eq`. `Eq` leaks to `D` at rate
//! `K (K-1)^2 eps^2 / C^2 * ((Q-1)/Q)^2`; from `D` the chain either lands on
//! `Eq` directly or drops onto the ladder.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::NetworkInstance;
use crate::error::{invalid, Error, Result};
use crate::te::g_fn;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Which equilibrium the chain's `Eq` state stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[serde(rename = "ne")]
    Nash,
    #[serde(rename = "se")]
    Satisfaction,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Nash => "ne",
            Target::Satisfaction => "se",
        })
    }
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ne" | "nash" => Ok(Target::Nash),
            "se" | "satisfaction" => Ok(Target::Satisfaction),
            other => Err(invalid(format!("unknown target '{other}', expected ne or se"))),
        }
    }
}

/// Power levels reaching the threshold on an interference-free channel of the
/// simplified model (unit direct gain).
pub fn q_s(instance: &NetworkInstance) -> Result<usize> {
    if !instance.is_simplified() {
        return Err(Error::ModelMismatch(
            "Q_S is defined for the simplified channel model only".into(),
        ));
    }
    count_satisfying_levels(
        instance.num_power_levels(),
        instance.max_power(),
        instance.noise_power(),
        instance.sinr_threshold(),
    )
}

/// Count of grid levels `p` with `p / noise >= gamma`.
pub fn count_satisfying_levels(num_levels: usize, max_power: f64, noise: f64, gamma: f64) -> Result<usize> {
    let grid = crate::channel::power_grid(num_levels, max_power)?;
    Ok(grid.iter().filter(|&&p| p > 0.0 && p / noise >= gamma).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtmcParams {
    pub num_players: usize,
    pub num_channels: usize,
    pub num_power_levels: usize,
    pub satisfying_levels: usize,
    pub epsilon: f64,
    pub delta_u: f64,
}

impl DtmcParams {
    /// `delta_u = 0` gives the slowest acceptance, `G = 0.2`.
    pub fn new(num_players: usize, num_channels: usize, num_power_levels: usize, satisfying_levels: usize, epsilon: f64) -> Self {
        Self { num_players, num_channels, num_power_levels, satisfying_levels, epsilon, delta_u: 0.0 }
    }

    pub fn with_delta_u(mut self, delta_u: f64) -> Self {
        self.delta_u = delta_u;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (k, c, q) = (self.num_players, self.num_channels, self.num_power_levels);
        if k == 0 {
            return Err(invalid("K must be positive"));
        }
        if c <= k {
            return Err(invalid(format!("the chain assumes C > K, got C={c}, K={k}")));
        }
        if q < 2 {
            return Err(invalid(format!("Q must be at least 2, got {q}")));
        }
        if self.satisfying_levels >= q {
            return Err(invalid(format!("Q_S must be below Q, got Q_S={} Q={q}", self.satisfying_levels)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        g_fn(self.delta_u)?;
        Ok(())
    }

    fn k(&self) -> f64 {
        self.num_players as f64
    }
    fn c(&self) -> f64 {
        self.num_channels as f64
    }
    fn q(&self) -> f64 {
        self.num_power_levels as f64
    }

    /// `eps^(1 + G(du))`.
    fn accept_factor(&self) -> f64 {
        let g = g_fn(self.delta_u).expect("validated");
        self.epsilon.powf(1.0 + g)
    }

    /// `P(Eq, D)`, identical for both targets.
    pub fn leave_equilibrium(&self) -> f64 {
        let (k, c, q) = (self.k(), self.c(), self.q());
        k * (k - 1.0).powi(2) * self.epsilon.powi(2) / c.powi(2) * ((q - 1.0) / q).powi(2)
    }

    /// `P(D, Eq)`: `(C-K+1)/(CQ)` for NE, `(C-K+1)/C` for SE.
    pub fn discontent_to_equilibrium(&self, target: Target) -> f64 {
        let (k, c, q) = (self.k(), self.c(), self.q());
        match target {
            Target::Nash => (c - k + 1.0) / (c * q),
            Target::Satisfaction => (c - k + 1.0) / c,
        }
    }

    /// `P(D, C_{K-k}) = (C-K+k)/C^k * (K-1)!/(K-k)!` for `k` in `1..=K`; the same
    /// for both targets. These weights sum to one over `k`.
    pub fn discontent_to_stage(&self, k: usize) -> f64 {
        let (kk, c) = (self.k(), self.c());
        let falling: f64 = ((self.num_players - k + 1)..self.num_players).map(|x| x as f64).product();
        (c - kk + k as f64) / c.powi(k as i32) * falling
    }

    /// `P(C_{K-k}, C_{K-k-1})` for `k` in `0..K`.
    pub fn stage_advance(&self, k: usize, target: Target) -> f64 {
        let (kk, c, q) = (self.k(), self.c(), self.q());
        let base = (kk - k as f64) * (c - k as f64) / (c * q) * self.accept_factor();
        match target {
            Target::Nash => base,
            Target::Satisfaction => base * self.satisfying_levels as f64,
        }
    }

    /// `C Q / (eps^(1+G) (C-K))`, divided by `Q_S` for SE.
    fn time_scale(&self, target: Target) -> Result<f64> {
        let base = self.c() * self.q() / (self.accept_factor() * (self.c() - self.k()));
        match target {
            Target::Nash => Ok(base),
            Target::Satisfaction if self.satisfying_levels == 0 => {
                Err(invalid("Q_S = 0: no power level satisfies the threshold"))
            }
            Target::Satisfaction => Ok(base / self.satisfying_levels as f64),
        }
    }
}

/// Lower and upper bounds on the expected first-passage time to the equilibrium.
pub fn bounds_t(params: &DtmcParams, target: Target) -> Result<(f64, f64)> {
    params.validate()?;
    let scale = params.time_scale(target)?;
    let (k, c) = (params.k(), params.c());
    let lower = scale * (EULER_GAMMA + (k * (c - k) / c).ln());
    let upper = scale * (1.0 + (k * (c - k + 1.0) / (c + 1.0)).ln());
    Ok((lower, upper))
}

/// Expected fraction of time at the equilibrium, `1 / (1 + P(Eq,D) T_B)`.
///
/// `T_B = sum_k P(D,C_{K-k}) T_C(k) + P(D,Eq) / (1 - P(D,D))^2` with
/// `P(D,D) = 1 - P(D,Eq) - sum_k P(D,C_{K-k})`, evaluated term by term. Since the
/// stage weights sum to one, that `P(D,D)` equals `-P(D,Eq)`; the expression is
/// kept as written.
pub fn occupancy(params: &DtmcParams, target: Target) -> Result<f64> {
    params.validate()?;
    let (k, c, q) = (params.k(), params.c(), params.q());
    let stage_time = |stage: usize| -> Result<f64> {
        let log_term = EULER_GAMMA + (k * (c - stage as f64 + 1.0) / (c + 1.0)).ln();
        match target {
            Target::Nash => Ok(params.time_scale(Target::Nash)? * log_term),
            Target::Satisfaction => {
                if params.satisfying_levels == 0 {
                    return Err(invalid("Q_S = 0: no power level satisfies the threshold"));
                }
                Ok(c * q / (params.epsilon * (c - k) * params.satisfying_levels as f64) * log_term)
            }
        }
    };
    let p_d_eq = params.discontent_to_equilibrium(target);
    let mut spread = 0.0;
    let mut weighted = 0.0;
    for stage in 1..=params.num_players {
        let w = params.discontent_to_stage(stage);
        spread += w;
        weighted += w * stage_time(stage)?;
    }
    let p_d_d = 1.0 - p_d_eq - spread;
    let t_bad = weighted + p_d_eq / (1.0 - p_d_d).powi(2);
    Ok(1.0 / (1.0 + params.leave_equilibrium() * t_bad))
}

/// State label of the reduced chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainState {
    Equilibrium,
    /// `C_j`, `j` in `1..=K`, with `j` players still to move.
    Stage(usize),
    Discontent,
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainState::Equilibrium => f.write_str("Eq"),
            ChainState::Stage(j) => write!(f, "C{j}"),
            ChainState::Discontent => f.write_str("D"),
        }
    }
}

/// Row-stochastic reduced chain. State order: `Eq, C_1, .., C_K, D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DtmcModel {
    pub target: Target,
    pub params: DtmcParams,
    pub states: Vec<ChainState>,
    pub transition: DMatrix<f64>,
}

/// Builds the chain. Off-diagonal mass follows the closed forms; each row's
/// residual goes to its self-loop. From `D` the chain reaches `Eq` directly with
/// `P(D,Eq)` and otherwise lands on `C_{K-k}` with the stage weights, `C_0`
/// being `Eq`.
pub fn transition_probs(params: &DtmcParams, target: Target) -> Result<DtmcModel> {
    params.validate()?;
    let kp = params.num_players;
    let n = kp + 2;
    let d = kp + 1;
    let mut states = vec![ChainState::Equilibrium];
    states.extend((1..=kp).map(ChainState::Stage));
    states.push(ChainState::Discontent);

    let check = |value: f64, what: &str| -> Result<f64> {
        if (0.0..=1.0).contains(&value) && value.is_finite() {
            Ok(value)
        } else {
            Err(invalid(format!("{what} = {value} is not a probability")))
        }
    };

    let mut m = DMatrix::<f64>::zeros(n, n);
    m[(0, d)] = check(params.leave_equilibrium(), "P(Eq,D)")?;
    for j in 1..=kp {
        // C_j is C_{K-k} with k = K - j.
        let advance = check(params.stage_advance(kp - j, target), &format!("P(C{j},C{})", j - 1))?;
        m[(j, j - 1)] = advance;
    }
    let direct = check(params.discontent_to_equilibrium(target), "P(D,Eq)")?;
    m[(d, 0)] += direct;
    for k in 1..=kp {
        let w = check(params.discontent_to_stage(k), &format!("P(D,C{})", kp - k))?;
        m[(d, kp - k)] += (1.0 - direct) * w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        let residual = 1.0 - off;
        if residual < -1e-12 {
            return Err(invalid(format!("row {} has outgoing mass {off} > 1", states[i])));
        }
        m[(i, i)] += residual.max(0.0);
    }
    Ok(DtmcModel { target, params: *params, states, transition: m })
}

impl DtmcModel {
    pub fn index_of(&self, state: ChainState) -> Option<usize> {
        self.states.iter().position(|s| *s == state)
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.transition
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Expected steps from `from` until `Eq` is first entered.
    pub fn hitting_time(&self, from: ChainState) -> Result<f64> {
        let from = self.index_of(from).ok_or_else(|| invalid(format!("no state {from}")))?;
        expected_hitting_time(&self.transition, from, 0)
    }

    /// First passage from `C_K`, where no player has a correct action yet.
    pub fn first_passage_time(&self) -> Result<f64> {
        self.hitting_time(ChainState::Stage(self.params.num_players))
    }
}

/// Expected first-passage time from `from` to `target` of a row-stochastic matrix,
/// solving `(I - P_TT) t = 1` over the states reachable from `from`.
pub fn expected_hitting_time(transition: &DMatrix<f64>, from: usize, target: usize) -> Result<f64> {
    let n = transition.nrows();
    if transition.ncols() != n || from >= n || target >= n {
        return Err(invalid("transition matrix must be square and indices in range"));
    }
    if from == target {
        return Ok(0.0);
    }
    // Transient states that the walk can visit before hitting the target.
    let mut reach = vec![false; n];
    let mut queue = VecDeque::from([from]);
    reach[from] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if j != target && !reach[j] && transition[(i, j)] > 0.0 {
                reach[j] = true;
                queue.push_back(j);
            }
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&i| reach[i]).collect();
    let t = transient.len();
    let mut a = DMatrix::<f64>::identity(t, t);
    for (r, &i) in transient.iter().enumerate() {
        for (c, &j) in transient.iter().enumerate() {
            a[(r, c)] -= transition[(i, j)];
        }
    }
    let rhs = DVector::from_element(t, 1.0);
    let solution = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Unreachable(format!("state {target} is not almost surely reached from {from}")))?;
    let pos = transient.iter().position(|&i| i == from).expect("from is transient");
    let value = solution[pos];
    if !value.is_finite() || value <= 0.0 || solution.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Unreachable(format!("state {target} is not almost surely reached from {from}")));
    }
    Ok(value)
}
