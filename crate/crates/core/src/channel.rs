//! Static radio environment: sub-bands, quantized power levels, channel gains
//! and the SINR each receiver observes for a joint action.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Defaults used by the experiments when a config leaves them out.
pub const DEFAULT_MAX_POWER: f64 = 10.0;
pub const DEFAULT_NOISE_POWER: f64 = 1.0;
pub const DEFAULT_SINR_THRESHOLD: f64 = 3.0;

/// `num_levels` uniformly spaced power levels from 0 to `max_power`, both included.
pub fn power_grid(num_levels: usize, max_power: f64) -> Result<Vec<f64>> {
    if num_levels < 2 {
        return Err(invalid(format!("power grid needs Q >= 2, got {num_levels}")));
    }
    if !(max_power > 0.0 && max_power.is_finite()) {
        return Err(invalid(format!("P_MAX must be positive, got {max_power}")));
    }
    let top = (num_levels - 1) as f64;
    Ok((0..num_levels)
        .map(|q| if q + 1 == num_levels { max_power } else { q as f64 * max_power / top })
        .collect())
}

/// One transmitter's choice: a sub-band and an index into the power grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub channel: usize,
    pub power_index: usize,
}

impl Action {
    pub const fn new(channel: usize, power_index: usize) -> Self {
        Self { channel, power_index }
    }

    /// Dense index in `0..C*Q`, channel-major.
    pub fn index(self, num_power_levels: usize) -> usize {
        self.channel * num_power_levels + self.power_index
    }

    pub fn from_index(index: usize, num_power_levels: usize) -> Self {
        Self { channel: index / num_power_levels, power_index: index % num_power_levels }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.channel, self.power_index)
    }
}

/// Joint action of all players, one entry per player.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionProfile(pub Vec<Action>);

impl ActionProfile {
    pub fn new(actions: Vec<Action>) -> Self {
        Self(actions)
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mixed-radix index with player 0 as the least significant digit.
    pub fn index(&self, num_channels: usize, num_power_levels: usize) -> u64 {
        Self::index_of(&self.0, num_channels, num_power_levels)
    }

    pub fn index_of(actions: &[Action], num_channels: usize, num_power_levels: usize) -> u64 {
        let radix = (num_channels * num_power_levels) as u64;
        actions
            .iter()
            .rev()
            .fold(0u64, |acc, a| acc * radix + a.index(num_power_levels) as u64)
    }

    pub fn from_index(
        mut index: u64,
        num_players: usize,
        num_channels: usize,
        num_power_levels: usize,
    ) -> Self {
        let radix = (num_channels * num_power_levels) as u64;
        let actions = (0..num_players)
            .map(|_| {
                let a = Action::from_index((index % radix) as usize, num_power_levels);
                index /= radix;
                a
            })
            .collect();
        Self(actions)
    }
}

impl std::ops::Index<usize> for ActionProfile {
    type Output = Action;
    fn index(&self, k: usize) -> &Action {
        &self.0[k]
    }
}

impl std::ops::IndexMut<usize> for ActionProfile {
    fn index_mut(&mut self, k: usize) -> &mut Action {
        &mut self.0[k]
    }
}

impl fmt::Display for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "]")
    }
}

/// How the gain tensor of an instance was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Simplified,
    Rayleigh,
    Custom,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Simplified => "simplified",
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::Custom => "custom",
        })
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simplified" | "simple" => Ok(ChannelKind::Simplified),
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            "custom" => Ok(ChannelKind::Custom),
            other => Err(invalid(format!("unknown channel model '{other}'"))),
        }
    }
}

/// Scalar parameters of an instance, everything except the gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceParams {
    pub num_players: usize,
    pub num_channels: usize,
    pub num_power_levels: usize,
    pub max_power: f64,
    pub noise_power: f64,
    pub sinr_threshold: f64,
    pub beta: f64,
}

impl InstanceParams {
    /// Experiment defaults with `beta = K + 1`.
    pub fn with_defaults(num_players: usize, num_channels: usize, num_power_levels: usize) -> Self {
        Self {
            num_players,
            num_channels,
            num_power_levels,
            max_power: DEFAULT_MAX_POWER,
            noise_power: DEFAULT_NOISE_POWER,
            sinr_threshold: DEFAULT_SINR_THRESHOLD,
            beta: num_players as f64 + 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_players == 0 {
            return Err(invalid("K must be positive"));
        }
        if self.num_channels == 0 {
            return Err(invalid("C must be positive"));
        }
        for (name, v) in [
            ("noise", self.noise_power),
            ("gamma", self.sinr_threshold),
            ("beta", self.beta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Immutable problem data: dimensions, power grid, noise, threshold and the
/// `K x K x C` gain tensor `g[rx][tx][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    params: InstanceParams,
    kind: ChannelKind,
    powers: Vec<f64>,
    gains: Vec<f64>,
}

impl NetworkInstance {
    /// Builds an instance from a flat gain tensor laid out as `[rx][tx][channel]`.
    pub fn new(params: InstanceParams, kind: ChannelKind, gains: Vec<f64>) -> Result<Self> {
        params.validate()?;
        let powers = power_grid(params.num_power_levels, params.max_power)?;
        let (k, c) = (params.num_players, params.num_channels);
        if gains.len() != k * k * c {
            return Err(invalid(format!(
                "gain tensor has {} entries, expected K*K*C = {}",
                gains.len(),
                k * k * c
            )));
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(invalid(format!("gains must be finite and non-negative, got {g}")));
        }
        for rx in 0..k {
            for b in 0..c {
                if gains[(rx * k + rx) * c + b] <= 0.0 {
                    return Err(invalid(format!("direct gain of link {rx} on channel {b} must be positive")));
                }
            }
        }
        Ok(Self { params, kind, powers, gains })
    }

    /// Unit direct gains and cross gains of one half on every sub-band.
    pub fn simplified(params: InstanceParams) -> Result<Self> {
        let (k, c) = (params.num_players, params.num_channels);
        let mut gains = vec![0.5; k * k * c];
        for rx in 0..k {
            for b in 0..c {
                gains[(rx * k + rx) * c + b] = 1.0;
            }
        }
        Self::new(params, ChannelKind::Simplified, gains)
    }

    /// Block-fading Rayleigh gains: each entry is `|h|^2` with `h` a unit-variance
    /// circular complex Gaussian, so exponential with mean one.
    pub fn rayleigh(params: InstanceParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::rayleigh_with_rng(params, &mut rng)
    }

    pub fn rayleigh_with_rng<R: rand::Rng + ?Sized>(params: InstanceParams, rng: &mut R) -> Result<Self> {
        let (k, c) = (params.num_players, params.num_channels);
        let gains = sample_rayleigh_gains(k * k * c, rng);
        Self::new(params, ChannelKind::Rayleigh, gains)
    }

    pub fn params(&self) -> &InstanceParams {
        &self.params
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn num_players(&self) -> usize {
        self.params.num_players
    }

    pub fn num_channels(&self) -> usize {
        self.params.num_channels
    }

    pub fn num_power_levels(&self) -> usize {
        self.params.num_power_levels
    }

    /// `|A_k| = C * Q`.
    pub fn num_actions(&self) -> usize {
        self.params.num_channels * self.params.num_power_levels
    }

    /// Number of joint profiles `(C*Q)^K`, saturating.
    pub fn num_profiles(&self) -> u128 {
        (self.num_actions() as u128).saturating_pow(self.num_players() as u32)
    }

    pub fn max_power(&self) -> f64 {
        self.params.max_power
    }

    pub fn noise_power(&self) -> f64 {
        self.params.noise_power
    }

    pub fn sinr_threshold(&self) -> f64 {
        self.params.sinr_threshold
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    /// True when `beta > K`, the regime the equilibrium-selection results need.
    pub fn beta_exceeds_players(&self) -> bool {
        self.params.beta > self.params.num_players as f64
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn power(&self, action: Action) -> f64 {
        self.powers[action.power_index]
    }

    pub fn gain(&self, rx: usize, tx: usize, channel: usize) -> f64 {
        let (k, c) = (self.params.num_players, self.params.num_channels);
        self.gains[(rx * k + tx) * c + channel]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn action(&self, index: usize) -> Action {
        Action::from_index(index, self.num_power_levels())
    }

    pub fn all_actions(&self) -> impl Iterator<Item = Action> + '_ {
        (0..self.num_actions()).map(|i| self.action(i))
    }

    pub fn is_valid_action(&self, a: Action) -> bool {
        a.channel < self.num_channels() && a.power_index < self.num_power_levels()
    }

    pub fn check_profile(&self, profile: &[Action]) -> Result<()> {
        if profile.len() != self.num_players() {
            return Err(invalid(format!(
                "profile has {} actions, instance has {} players",
                profile.len(),
                self.num_players()
            )));
        }
        if let Some(a) = profile.iter().find(|a| !self.is_valid_action(**a)) {
            return Err(invalid(format!("action {a} outside the action set")));
        }
        Ok(())
    }

    /// True when every direct gain is 1 and every cross gain is 1/2.
    pub fn is_simplified(&self) -> bool {
        let (k, c) = (self.num_players(), self.num_channels());
        (0..k).all(|rx| {
            (0..k).all(|tx| {
                let expected = if rx == tx { 1.0 } else { 0.5 };
                (0..c).all(|b| self.gain(rx, tx, b) == expected)
            })
        })
    }

    /// SINR of receiver `k` under `profile`; interference only from co-channel transmitters.
    pub fn sinr(&self, profile: &[Action], k: usize) -> f64 {
        let own = profile[k];
        let p = self.power(own);
        if p == 0.0 {
            return 0.0;
        }
        let interference: f64 = profile
            .iter()
            .enumerate()
            .filter(|&(l, a)| l != k && a.channel == own.channel)
            .map(|(l, a)| self.power(*a) * self.gain(k, l, own.channel))
            .sum();
        p * self.gain(k, k, own.channel) / (self.noise_power() + interference)
    }

    /// Non-strict threshold test, used identically by utility and satisfaction.
    pub fn is_satisfied(&self, profile: &[Action], k: usize) -> bool {
        self.sinr(profile, k) >= self.sinr_threshold()
    }

    /// Serializable parameter record of this instance.
    pub fn config(&self, seed: Option<u64>) -> InstanceConfig {
        InstanceConfig {
            num_players: self.params.num_players,
            num_channels: self.params.num_channels,
            num_power_levels: self.params.num_power_levels,
            p_max: self.params.max_power,
            noise: self.params.noise_power,
            gamma: self.params.sinr_threshold,
            beta: Some(self.params.beta),
            channel: self.kind,
            seed,
        }
    }

    /// Writes the gain tensor as CSV with columns `rx,tx,channel,gain`.
    pub fn write_gains_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rx", "tx", "channel", "gain"])?;
        let (k, c) = (self.num_players(), self.num_channels());
        for rx in 0..k {
            for tx in 0..k {
                for b in 0..c {
                    w.serialize((rx, tx, b, self.gain(rx, tx, b)))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Replaces the gain tensor with one read from `rx,tx,channel,gain` CSV.
    pub fn with_gains_csv<R: Read>(self, reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            rx: usize,
            tx: usize,
            channel: usize,
            gain: f64,
        }
        let (k, c) = (self.num_players(), self.num_channels());
        let mut gains = vec![f64::NAN; k * k * c];
        let mut r = csv::Reader::from_reader(reader);
        for row in r.deserialize() {
            let row: Row = row?;
            if row.rx >= k || row.tx >= k || row.channel >= c {
                return Err(invalid(format!(
                    "gain entry ({}, {}, {}) outside K={k}, C={c}",
                    row.rx, row.tx, row.channel
                )));
            }
            gains[(row.rx * k + row.tx) * c + row.channel] = row.gain;
        }
        if gains.iter().any(|g| g.is_nan()) {
            return Err(invalid("gain CSV does not cover the whole K x K x C tensor"));
        }
        Self::new(self.params, ChannelKind::Custom, gains)
    }
}

fn sample_rayleigh_gains<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // Real and imaginary parts each carry half the unit variance.
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std dev");
    (0..n)
        .map(|_| {
            let (re, im): (f64, f64) = (normal.sample(rng), normal.sample(rng));
            re * re + im * im
        })
        .collect()
}

/// Flat text description of an instance, as stored in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    #[serde(rename = "K")]
    pub num_players: usize,
    #[serde(rename = "C")]
    pub num_channels: usize,
    #[serde(rename = "Q")]
    pub num_power_levels: usize,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Defaults to `K + 1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_channel")]
    pub channel: ChannelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_p_max() -> f64 {
    DEFAULT_MAX_POWER
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_POWER
}
fn default_gamma() -> f64 {
    DEFAULT_SINR_THRESHOLD
}
fn default_channel() -> ChannelKind {
    ChannelKind::Simplified
}

impl InstanceConfig {
    pub fn params(&self) -> InstanceParams {
        InstanceParams {
            num_players: self.num_players,
            num_channels: self.num_channels,
            num_power_levels: self.num_power_levels,
            max_power: self.p_max,
            noise_power: self.noise,
            sinr_threshold: self.gamma,
            beta: self.beta.unwrap_or(self.num_players as f64 + 1.0),
        }
    }

    /// Materializes the instance; Rayleigh draws use `seed` (0 when absent).
    pub fn build(&self) -> Result<NetworkInstance> {
        match self.channel {
            ChannelKind::Simplified => NetworkInstance::simplified(self.params()),
            ChannelKind::Rayleigh => NetworkInstance::rayleigh(self.params(), self.seed.unwrap_or(0)),
            ChannelKind::Custom => Err(Error::Config(
                "custom channel needs a gains CSV; build a simplified instance and load gains".into(),
            )),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
