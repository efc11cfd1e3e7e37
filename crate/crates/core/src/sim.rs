//! Monte-Carlo runner for TE learning over channel instances.
//!
//! Every trial owns a ChaCha RNG seeded with `seed + trial_index`; Rayleigh
//! trials draw their gains from that RNG before the learners start, so a trial
//! is a pure function of its seed. Trials run in parallel and are aggregated
//! in index order.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Action, ActionProfile, ChannelKind, InstanceConfig, NetworkInstance};
use crate::dtmc::{self, DtmcParams, Target};
use crate::error::{invalid, Error, Result};
use crate::game::{self, utility_from, GlobalOptimum, Oracle, DEFAULT_ENUMERATION_CAP};
use crate::te::{self, Mood, TeParams, TeState};

/// One synchronous iteration as seen by the whole network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Mixed-radix profile index, see [`ActionProfile::index`].
    pub profile: u64,
    /// Bit `k` set when player `k` met the threshold.
    pub satisfied: u64,
    pub total_power: f64,
    pub at_ne: bool,
    pub at_se: bool,
    pub at_optimum: bool,
}

impl StepRecord {
    pub fn num_satisfied(&self) -> usize {
        self.satisfied.count_ones() as usize
    }

    pub fn is_satisfied(&self, k: usize) -> bool {
        self.satisfied & (1 << k) != 0
    }
}

/// Lockstep TE dynamics of all players over a fixed instance.
pub struct Simulation<'a> {
    instance: &'a NetworkInstance,
    params: TeParams,
    rng: ChaCha8Rng,
    states: Vec<TeState>,
    profile: Vec<Action>,
    utilities: Vec<f64>,
    nash_cache: HashMap<u64, bool>,
    optimum: Option<GlobalOptimum>,
    iteration: usize,
}

impl<'a> Simulation<'a> {
    /// All players start discontent with a uniformly drawn benchmark and zero benchmark utility.
    pub fn new(instance: &'a NetworkInstance, params: TeParams, rng: ChaCha8Rng) -> Result<Self> {
        params.validate()?;
        if params.num_players != instance.num_players() {
            return Err(invalid("TE parameters and instance disagree on K"));
        }
        if instance.num_players() > 64 || instance.num_profiles() > u64::MAX as u128 {
            return Err(invalid("profiles must be indexable by u64 and K at most 64"));
        }
        let mut rng = rng;
        let m = instance.num_actions();
        let states: Vec<TeState> =
            (0..instance.num_players()).map(|_| TeState::discontent(instance.action(rng.random_range(0..m)))).collect();
        let profile = states.iter().map(|s| s.benchmark_action).collect();
        Ok(Self {
            instance,
            params,
            rng,
            states,
            profile,
            utilities: vec![0.0; instance.num_players()],
            nash_cache: HashMap::new(),
            optimum: None,
            iteration: 0,
        })
    }

    pub fn from_seed(instance: &'a NetworkInstance, params: TeParams, seed: u64) -> Result<Self> {
        Self::new(instance, params, ChaCha8Rng::seed_from_u64(seed))
    }

    /// Enables the optimum flag; `optimum` must come from the same instance.
    pub fn with_optimum(mut self, optimum: Option<GlobalOptimum>) -> Self {
        self.optimum = optimum;
        self
    }

    pub fn states(&self) -> &[TeState] {
        &self.states
    }

    pub fn profile(&self) -> &[Action] {
        &self.profile
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn optimum(&self) -> Option<&GlobalOptimum> {
        self.optimum.as_ref()
    }

    fn is_nash_cached(&mut self, index: u64) -> bool {
        let inst = self.instance;
        let profile = &self.profile;
        *self.nash_cache.entry(index).or_insert_with(|| game::is_nash(inst, profile))
    }

    /// Plays one iteration and resolves every player's state.
    pub fn step(&mut self) -> Result<StepRecord> {
        let inst = self.instance;
        let (m, q) = (inst.num_actions(), inst.num_power_levels());
        for (state, slot) in self.states.iter_mut().zip(self.profile.iter_mut()) {
            let (action, experimented) = te::select_action(state, m, q, self.params.epsilon, &mut self.rng);
            te::record_play(state, action, experimented);
            *slot = action;
        }
        let mut satisfied = 0u64;
        let mut total_power = 0.0;
        let mut index_sum = 0usize;
        let mut admissible = true;
        for k in 0..inst.num_players() {
            let power = inst.power(self.profile[k]);
            let sat = inst.is_satisfied(&self.profile, k);
            if sat {
                satisfied |= 1 << k;
            } else if self.profile[k].power_index != 0 {
                admissible = false;
            }
            total_power += power;
            index_sum += self.profile[k].power_index;
            self.utilities[k] = utility_from(inst, power, sat);
        }
        let index = ActionProfile::index_of(&self.profile, inst.num_channels(), q);
        let at_ne = self.is_nash_cached(index);
        let num_sat = satisfied.count_ones() as usize;
        let at_optimum = self.optimum.as_ref().is_some_and(|o| {
            admissible && num_sat == o.max_satisfiable && index_sum == o.min_power_index_sum
        });
        for (state, &u) in self.states.iter_mut().zip(&self.utilities) {
            *state = te::update(state, u, &self.params, &mut self.rng)?;
        }
        self.iteration += 1;
        Ok(StepRecord {
            profile: index,
            satisfied,
            total_power,
            at_ne,
            at_se: num_sat == inst.num_players(),
            at_optimum,
        })
    }
}

/// Per-trial metrics. Iteration numbers are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub iterations: usize,
    pub num_players: usize,
    pub first_ne_iteration: Option<usize>,
    pub first_se_iteration: Option<usize>,
    pub first_optimal_iteration: Option<usize>,
    pub ne_iterations: usize,
    pub se_iterations: usize,
    /// Total power of the global optimum, when it was computed.
    pub optimal_power: Option<f64>,
    /// Full per-iteration stream when requested.
    pub steps: Option<Vec<StepRecord>>,
}

impl TrialRecord {
    pub fn fraction_at_ne(&self) -> f64 {
        self.ne_iterations as f64 / self.iterations as f64
    }

    pub fn fraction_at_se(&self) -> f64 {
        self.se_iterations as f64 / self.iterations as f64
    }

    /// Fraction of satisfied players per iteration; needs recorded steps.
    pub fn fraction_satisfied_curve(&self) -> Option<Vec<f64>> {
        let k = self.num_players as f64;
        self.steps.as_ref().map(|s| s.iter().map(|r| r.num_satisfied() as f64 / k).collect())
    }

    /// Total power over optimal power per iteration; `None` entries when the
    /// optimum is unknown or zero.
    pub fn power_ratio_curve(&self) -> Option<Vec<Option<f64>>> {
        let opt = self.optimal_power.filter(|p| *p > 0.0);
        self.steps
            .as_ref()
            .map(|s| s.iter().map(|r| opt.map(|o| r.total_power / o)).collect())
    }
}

/// What a trial should compute beyond the always-on counters.
#[derive(Debug, Clone, Copy)]
pub struct TrialOptions {
    pub iterations: usize,
    pub epsilon: f64,
    pub record_steps: bool,
    /// Solve the global problem for the optimum flag and power ratio.
    pub track_optimum: bool,
    pub enumeration_cap: u64,
}

impl TrialOptions {
    pub fn new(iterations: usize, epsilon: f64) -> Self {
        Self { iterations, epsilon, record_steps: false, track_optimum: false, enumeration_cap: DEFAULT_ENUMERATION_CAP }
    }

    pub fn recording(mut self) -> Self {
        self.record_steps = true;
        self
    }

    pub fn tracking_optimum(mut self) -> Self {
        self.track_optimum = true;
        self
    }
}

fn compute_optimum(instance: &NetworkInstance, cap: u64) -> Option<GlobalOptimum> {
    match Oracle::new(instance).with_cap(cap).solve_global() {
        Ok(o) => Some(o),
        Err(Error::InstanceTooLarge { profiles, cap }) => {
            log::warn!("global optimum skipped: {profiles} profiles exceed cap {cap}; optimum flags disabled");
            None
        }
        Err(e) => {
            log::warn!("global optimum failed: {e}");
            None
        }
    }
}

/// Runs TE for `options.iterations` iterations from the discontent start.
pub fn run_trial(instance: &NetworkInstance, options: &TrialOptions, seed: u64) -> Result<TrialRecord> {
    let optimum = if options.track_optimum { compute_optimum(instance, options.enumeration_cap) } else { None };
    run_trial_with(instance, options, ChaCha8Rng::seed_from_u64(seed), seed, optimum)
}

fn run_trial_with(
    instance: &NetworkInstance,
    options: &TrialOptions,
    rng: ChaCha8Rng,
    seed: u64,
    optimum: Option<GlobalOptimum>,
) -> Result<TrialRecord> {
    if options.iterations == 0 {
        return Err(invalid("a trial needs at least one iteration"));
    }
    let params = TeParams::new(options.epsilon, instance.num_players())?;
    let optimal_power = optimum.as_ref().map(|o| o.min_total_power);
    let mut sim = Simulation::new(instance, params, rng)?.with_optimum(optimum);
    let mut record = TrialRecord {
        seed,
        iterations: options.iterations,
        num_players: instance.num_players(),
        first_ne_iteration: None,
        first_se_iteration: None,
        first_optimal_iteration: None,
        ne_iterations: 0,
        se_iterations: 0,
        optimal_power,
        steps: options.record_steps.then(|| Vec::with_capacity(options.iterations)),
    };
    for n in 0..options.iterations {
        let step = sim.step()?;
        if step.at_ne {
            record.ne_iterations += 1;
            record.first_ne_iteration.get_or_insert(n);
        }
        if step.at_se {
            record.se_iterations += 1;
            record.first_se_iteration.get_or_insert(n);
        }
        if step.at_optimum {
            record.first_optimal_iteration.get_or_insert(n);
        }
        if let Some(steps) = record.steps.as_mut() {
            steps.push(step);
        }
    }
    Ok(record)
}

/// Writes the per-player state trace of one trial as CSV:
/// `iteration,player,mood,channel,power_index,utility,benchmark_utility`.
/// The mood and benchmark are the ones after resolving the iteration.
pub fn write_trace<W: Write>(
    instance: &NetworkInstance,
    epsilon: f64,
    iterations: usize,
    seed: u64,
    writer: W,
) -> Result<()> {
    let params = TeParams::new(epsilon, instance.num_players())?;
    let mut sim = Simulation::from_seed(instance, params, seed)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "player", "mood", "channel", "power_index", "utility", "benchmark_utility"])?;
    for n in 0..iterations {
        sim.step()?;
        for (k, state) in sim.states().iter().enumerate() {
            let a = sim.profile()[k];
            w.serialize((n, k, state.mood.as_str(), a.channel, a.power_index, sim.utilities()[k], state.benchmark_utility))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Monte-Carlo experiment description; instance keys sit at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub instance: InstanceConfig,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Draw fresh Rayleigh gains for every trial.
    #[serde(default = "default_true")]
    pub redraw_gains: bool,
    #[serde(default)]
    pub delta_u: f64,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
}

fn default_eps() -> f64 {
    0.02
}
fn default_iterations() -> usize {
    1_000_000
}
fn default_trials() -> usize {
    200
}
fn default_true() -> bool {
    true
}
fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

impl ExperimentConfig {
    pub fn new(instance: InstanceConfig, eps: f64, iterations: usize, trials: usize) -> Self {
        Self { instance, eps, iterations, trials, redraw_gains: true, delta_u: 0.0, enumeration_cap: DEFAULT_ENUMERATION_CAP }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.trials == 0 {
            return Err(invalid("iterations and trials must be at least 1"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        Ok(())
    }

    pub fn master_seed(&self) -> u64 {
        self.instance.seed.unwrap_or(0)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Chain parameters matching this experiment, with `Q_S` taken from the
    /// simplified model at the same power grid, noise and threshold.
    pub fn dtmc_params(&self) -> Result<DtmcParams> {
        let i = &self.instance;
        let qs = dtmc::count_satisfying_levels(i.num_power_levels, i.p_max, i.noise, i.gamma)?;
        Ok(DtmcParams::new(i.num_players, i.num_channels, i.num_power_levels, qs, self.eps).with_delta_u(self.delta_u))
    }
}

/// Runs every trial of `config`. Trial `t` uses seed `master + t`.
pub fn run_trials(config: &ExperimentConfig, options: &TrialOptions) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let master = config.master_seed();
    let shared = if config.instance.channel == ChannelKind::Rayleigh && config.redraw_gains {
        None
    } else {
        Some(config.instance.build()?)
    };
    let shared_optimum = match (&shared, options.track_optimum) {
        (Some(inst), true) => compute_optimum(inst, options.enumeration_cap),
        _ => None,
    };
    log::info!(
        "{} trials x {} iterations, K={} C={} Q={} {}",
        config.trials,
        options.iterations,
        config.instance.num_players,
        config.instance.num_channels,
        config.instance.num_power_levels,
        config.instance.channel
    );
    (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = master.wrapping_add(t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match &shared {
                Some(inst) => run_trial_with(inst, options, rng, seed, shared_optimum.clone()),
                None => {
                    let inst = NetworkInstance::rayleigh_with_rng(config.instance.params(), &mut rng)?;
                    let optimum =
                        if options.track_optimum { compute_optimum(&inst, options.enumeration_cap) } else { None };
                    run_trial_with(&inst, options, rng, seed, optimum)
                }
            }
        })
        .collect()
}

/// Pooled occupancy and first-passage statistics of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyEstimate {
    pub trials: usize,
    pub iterations: usize,
    pub ne_fraction: f64,
    pub se_fraction: f64,
    /// Mean first-visit iteration over the trials that reached it.
    pub mean_first_ne: Option<f64>,
    pub mean_first_se: Option<f64>,
    pub trials_reaching_ne: usize,
    pub trials_reaching_se: usize,
}

impl OccupancyEstimate {
    pub fn fraction(&self, target: Target) -> f64 {
        match target {
            Target::Nash => self.ne_fraction,
            Target::Satisfaction => self.se_fraction,
        }
    }

    pub fn mean_first(&self, target: Target) -> Option<f64> {
        match target {
            Target::Nash => self.mean_first_ne,
            Target::Satisfaction => self.mean_first_se,
        }
    }
}

fn mean_of(values: impl Iterator<Item = usize>) -> (Option<f64>, usize) {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v as f64, n + 1));
    ((n > 0).then(|| sum / n as f64), n)
}

pub fn summarize(records: &[TrialRecord]) -> OccupancyEstimate {
    let total: usize = records.iter().map(|r| r.iterations).sum();
    let ne: usize = records.iter().map(|r| r.ne_iterations).sum();
    let se: usize = records.iter().map(|r| r.se_iterations).sum();
    let (mean_first_ne, trials_reaching_ne) = mean_of(records.iter().filter_map(|r| r.first_ne_iteration));
    let (mean_first_se, trials_reaching_se) = mean_of(records.iter().filter_map(|r| r.first_se_iteration));
    OccupancyEstimate {
        trials: records.len(),
        iterations: records.first().map_or(0, |r| r.iterations),
        ne_fraction: ne as f64 / total.max(1) as f64,
        se_fraction: se as f64 / total.max(1) as f64,
        mean_first_ne,
        mean_first_se,
        trials_reaching_ne,
        trials_reaching_se,
    }
}

/// Fraction of iterations at NE and at SE, pooled over all trials.
pub fn estimate_occupancy(config: &ExperimentConfig) -> Result<OccupancyEstimate> {
    let options = TrialOptions { enumeration_cap: config.enumeration_cap, ..TrialOptions::new(config.iterations, config.eps) };
    Ok(summarize(&run_trials(config, &options)?))
}

/// One row of a parameter sweep: simulation next to the chain's predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub num_players: usize,
    #[serde(rename = "C")]
    pub num_channels: usize,
    #[serde(rename = "Q")]
    pub num_power_levels: usize,
    pub eps: f64,
    pub channel: ChannelKind,
    pub target: Target,
    pub sim_occupancy: f64,
    pub sim_mean: Option<f64>,
    pub dtmc_occupancy: Option<f64>,
    pub dtmc_exact: Option<f64>,
    pub bound_lo: Option<f64>,
    pub bound_hi: Option<f64>,
}

/// Chain predictions for one parameter set; `None` where the chain is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainPrediction {
    pub occupancy: Option<f64>,
    pub exact: Option<f64>,
    pub bounds: Option<(f64, f64)>,
}

pub fn predict(params: &DtmcParams, target: Target) -> ChainPrediction {
    ChainPrediction {
        occupancy: dtmc::occupancy(params, target).ok(),
        exact: dtmc::transition_probs(params, target).and_then(|m| m.first_passage_time()).ok(),
        bounds: dtmc::bounds_t(params, target).ok(),
    }
}

pub fn sweep_rows(config: &ExperimentConfig, estimate: &OccupancyEstimate) -> Result<Vec<SweepRow>> {
    let params = config.dtmc_params()?;
    let i = &config.instance;
    Ok([Target::Nash, Target::Satisfaction]
        .into_iter()
        .map(|target| {
            let p = predict(&params, target);
            SweepRow {
                num_players: i.num_players,
                num_channels: i.num_channels,
                num_power_levels: i.num_power_levels,
                eps: config.eps,
                channel: i.channel,
                target,
                sim_occupancy: estimate.fraction(target),
                sim_mean: estimate.mean_first(target),
                dtmc_occupancy: p.occupancy,
                dtmc_exact: p.exact,
                bound_lo: p.bounds.map(|b| b.0),
                bound_hi: p.bounds.map(|b| b.1),
            }
        })
        .collect())
}

/// Simulates every config and reports one row per (config, target).
pub fn sweep(configs: &[ExperimentConfig]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for config in configs {
        let estimate = estimate_occupancy(config)?;
        rows.extend(sweep_rows(config, &estimate)?);
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record([
            "K", "C", "Q", "eps", "channel", "target", "sim_occupancy", "sim_mean", "dtmc_occupancy", "dtmc_exact",
            "bound_lo", "bound_hi",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRow {
    #[serde(rename = "K")]
    pub num_players: usize,
    #[serde(rename = "C")]
    pub num_channels: usize,
    #[serde(rename = "Q")]
    pub num_power_levels: usize,
    pub eps: f64,
    pub channel: ChannelKind,
    pub target: Target,
    pub sim_occupancy: f64,
    pub dtmc_occupancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageRow {
    #[serde(rename = "K")]
    pub num_players: usize,
    #[serde(rename = "C")]
    pub num_channels: usize,
    #[serde(rename = "Q")]
    pub num_power_levels: usize,
    pub eps: f64,
    pub target: Target,
    pub sim_mean: Option<f64>,
    pub dtmc_exact: Option<f64>,
    pub bound_lo: Option<f64>,
    pub bound_hi: Option<f64>,
}

impl From<&SweepRow> for OccupancyRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            num_players: r.num_players,
            num_channels: r.num_channels,
            num_power_levels: r.num_power_levels,
            eps: r.eps,
            channel: r.channel,
            target: r.target,
            sim_occupancy: r.sim_occupancy,
            dtmc_occupancy: r.dtmc_occupancy,
        }
    }
}

impl From<&SweepRow> for PassageRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            num_players: r.num_players,
            num_channels: r.num_channels,
            num_power_levels: r.num_power_levels,
            eps: r.eps,
            target: r.target,
            sim_mean: r.sim_mean,
            dtmc_exact: r.dtmc_exact,
            bound_lo: r.bound_lo,
            bound_hi: r.bound_hi,
        }
    }
}

fn write_rows<W: Write, T: Serialize>(rows: impl IntoIterator<Item = T>, header: &[&str], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const OCCUPANCY_HEADER: [&str; 8] = ["K", "C", "Q", "eps", "channel", "target", "sim_occupancy", "dtmc_occupancy"];
pub const PASSAGE_HEADER: [&str; 9] = ["K", "C", "Q", "eps", "target", "sim_mean", "dtmc_exact", "bound_lo", "bound_hi"];
pub const CURVES_HEADER: [&str; 3] = ["iteration", "mean_frac_satisfied", "mean_power_ratio"];

pub fn write_occupancy_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    write_rows(rows.iter().map(OccupancyRow::from), &OCCUPANCY_HEADER, writer)
}

pub fn write_passage_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    write_rows(rows.iter().map(PassageRow::from), &PASSAGE_HEADER, writer)
}

/// Trial-averaged satisfaction and power curves, plus the two milestones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCurves {
    pub mean_frac_satisfied: Vec<f64>,
    /// `None` where no trial had a positive known optimum.
    pub mean_power_ratio: Vec<Option<f64>>,
    pub mean_first_all_satisfied: Option<f64>,
    pub trials_all_satisfied: usize,
    pub mean_first_optimal: Option<f64>,
    pub trials_optimal: usize,
    pub trials: usize,
}

/// Averages the satisfaction fraction and power ratio across trials per iteration.
pub fn curves_protocol(config: &ExperimentConfig) -> Result<ConvergenceCurves> {
    let mut options = TrialOptions::new(config.iterations, config.eps).recording().tracking_optimum();
    options.enumeration_cap = config.enumeration_cap;
    let records = run_trials(config, &options)?;
    let n = config.iterations;
    let mut frac = vec![0.0; n];
    let mut ratio_sum = vec![0.0; n];
    let mut ratio_count = vec![0usize; n];
    for r in &records {
        let f = r.fraction_satisfied_curve().expect("steps recorded");
        let p = r.power_ratio_curve().expect("steps recorded");
        for i in 0..n {
            frac[i] += f[i];
            if let Some(x) = p[i] {
                ratio_sum[i] += x;
                ratio_count[i] += 1;
            }
        }
    }
    let m = records.len() as f64;
    let (mean_first_all_satisfied, trials_all_satisfied) = mean_of(records.iter().filter_map(|r| r.first_se_iteration));
    let (mean_first_optimal, trials_optimal) = mean_of(records.iter().filter_map(|r| r.first_optimal_iteration));
    Ok(ConvergenceCurves {
        mean_frac_satisfied: frac.into_iter().map(|x| x / m).collect(),
        mean_power_ratio: ratio_sum
            .into_iter()
            .zip(ratio_count)
            .map(|(s, c)| (c > 0).then(|| s / c as f64))
            .collect(),
        mean_first_all_satisfied,
        trials_all_satisfied,
        mean_first_optimal,
        trials_optimal,
        trials: records.len(),
    })
}

impl ConvergenceCurves {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let rows = self
            .mean_frac_satisfied
            .iter()
            .zip(&self.mean_power_ratio)
            .enumerate()
            .map(|(i, (f, p))| (i, *f, *p));
        write_rows(rows, &CURVES_HEADER, writer)
    }
}

/// Mood census across players, handy for diagnostics.
pub fn mood_counts(states: &[TeState]) -> [usize; 4] {
    let mut c = [0; 4];
    for s in states {
        c[match s.mood {
            Mood::Content => 0,
            Mood::Hopeful => 1,
            Mood::Watchful => 2,
            Mood::Discontent => 3,
        }] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::InstanceParams;

    fn simplified(k: usize, c: usize, q: usize) -> NetworkInstance {
        NetworkInstance::simplified(InstanceParams::with_defaults(k, c, q)).unwrap()
    }

    #[test]
    fn single_player_learns_min_satisfying_power() {
        let inst = simplified(1, 2, 6);
        let rec = run_trial(&inst, &TrialOptions::new(20_000, 0.02).recording(), 9).unwrap();
        assert!(rec.first_ne_iteration.is_some());
        let tail = &rec.steps.as_ref().unwrap()[15_000..];
        let at_min = tail
            .iter()
            .filter(|s| {
                let p = ActionProfile::from_index(s.profile, 1, 2, 6);
                p[0].power_index == 2
            })
            .count();
        assert!(at_min as f64 > 0.9 * tail.len() as f64);
    }

    #[test]
    fn trials_are_deterministic() {
        let inst = simplified(3, 4, 6);
        let opts = TrialOptions::new(3000, 0.02).recording().tracking_optimum();
        assert_eq!(run_trial(&inst, &opts, 42).unwrap(), run_trial(&inst, &opts, 42).unwrap());
        assert_ne!(run_trial(&inst, &opts, 42).unwrap(), run_trial(&inst, &opts, 43).unwrap());
    }

    #[test]
    fn zero_iterations_is_an_error() {
        let inst = simplified(2, 3, 4);
        assert!(run_trial(&inst, &TrialOptions::new(0, 0.02), 1).is_err());
        let mut cfg = ExperimentConfig::new(inst.config(Some(1)), 0.02, 0, 1);
        assert!(estimate_occupancy(&cfg).is_err());
        cfg.iterations = 10;
        cfg.trials = 0;
        assert!(estimate_occupancy(&cfg).is_err());
    }

    #[test]
    fn flags_are_consistent_with_oracles() {
        let inst = simplified(2, 3, 4);
        let opts = TrialOptions::new(4000, 0.05).recording().tracking_optimum();
        let rec = run_trial(&inst, &opts, 5).unwrap();
        for s in rec.steps.as_ref().unwrap() {
            let p = ActionProfile::from_index(s.profile, 2, 3, 4);
            assert_eq!(s.at_ne, game::is_nash(&inst, p.actions()));
            assert_eq!(s.at_se, game::is_satisfaction_equilibrium(&inst, p.actions()));
            if s.at_se {
                assert_eq!(s.num_satisfied(), 2);
            }
        }
    }

    #[test]
    fn experiment_config_toml() {
        let text = "K = 3\nC = 4\nQ = 6\nchannel = \"rayleigh\"\nseed = 7\neps = 0.02\niterations = 100\ntrials = 3\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.instance.channel, ChannelKind::Rayleigh);
        assert_eq!(cfg.master_seed(), 7);
        assert_eq!(cfg.trials, 3);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn empty_sweep_has_header_only() {
        let rows = sweep(&[]).unwrap();
        assert!(rows.is_empty());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn trace_has_one_row_per_player_and_iteration() {
        let inst = simplified(2, 3, 4);
        let mut buf = Vec::new();
        write_trace(&inst, 0.02, 10, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 20);
        assert!(text.starts_with("iteration,player,mood,channel,power_index,utility,benchmark_utility"));
    }
}
