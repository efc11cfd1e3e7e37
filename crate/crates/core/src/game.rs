//! Normal-form and satisfaction-form views of the power-allocation game, with
//! exhaustive oracles for small instances.
//!
//! Every oracle enumerates the `(C*Q)^K` joint profiles, so each one is guarded
//! by an enumeration cap.

use serde::Serialize;

use crate::channel::{Action, ActionProfile, NetworkInstance};
use crate::error::{invalid, Error, Result};

/// Default bound on the number of joint profiles an oracle may enumerate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// `u_k = ((P_MAX - p_k)/P_MAX + beta * 1{SINR_k >= Gamma}) / (1 + beta)`.
pub fn utility(instance: &NetworkInstance, profile: &[Action], k: usize) -> f64 {
    let satisfied = instance.is_satisfied(profile, k);
    utility_from(instance, instance.power(profile[k]), satisfied)
}

pub(crate) fn utility_from(instance: &NetworkInstance, power: f64, satisfied: bool) -> f64 {
    let beta = instance.beta();
    let p_max = instance.max_power();
    let sat = if satisfied { beta } else { 0.0 };
    ((p_max - power) / p_max + sat) / (1.0 + beta)
}

/// Actions of player `k` reaching the SINR threshold against the fixed `others`
/// (the `K - 1` actions of the remaining players, in player order).
pub fn satisfaction_set(instance: &NetworkInstance, others: &[Action], k: usize) -> Result<Vec<Action>> {
    if others.len() + 1 != instance.num_players() || k >= instance.num_players() {
        return Err(invalid(format!(
            "expected {} other actions and player index < {}",
            instance.num_players() - 1,
            instance.num_players()
        )));
    }
    let mut profile: Vec<Action> = Vec::with_capacity(instance.num_players());
    profile.extend_from_slice(&others[..k]);
    profile.push(Action::new(0, 0));
    profile.extend_from_slice(&others[k..]);
    Ok(instance
        .all_actions()
        .filter(|a| {
            profile[k] = *a;
            instance.is_satisfied(&profile, k)
        })
        .collect())
}

/// True when no player can strictly improve its utility by a unilateral deviation.
pub fn is_nash(instance: &NetworkInstance, profile: &[Action]) -> bool {
    let mut scratch = profile.to_vec();
    (0..instance.num_players()).all(|k| {
        let current = utility(instance, profile, k);
        let ok = instance.all_actions().all(|a| {
            scratch[k] = a;
            utility(instance, &scratch, k) <= current
        });
        scratch[k] = profile[k];
        ok
    })
}

pub fn is_satisfaction_equilibrium(instance: &NetworkInstance, profile: &[Action]) -> bool {
    (0..instance.num_players()).all(|k| instance.is_satisfied(profile, k))
}

/// SE in which every player uses the lowest power among its satisfying actions.
pub fn is_efficient_satisfaction_equilibrium(instance: &NetworkInstance, profile: &[Action]) -> bool {
    if !is_satisfaction_equilibrium(instance, profile) {
        return false;
    }
    let mut scratch = profile.to_vec();
    (0..instance.num_players()).all(|k| {
        let own = profile[k].power_index;
        let ok = instance.all_actions().filter(|a| a.power_index < own).all(|a| {
            scratch[k] = a;
            !instance.is_satisfied(&scratch, k)
        });
        scratch[k] = profile[k];
        ok
    })
}

/// Utilities, satisfaction flags and aggregates of one joint profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameOutcome {
    pub profile: ActionProfile,
    pub utilities: Vec<f64>,
    pub satisfied: Vec<bool>,
    pub welfare: f64,
    pub total_power: f64,
}

impl GameOutcome {
    pub fn evaluate(instance: &NetworkInstance, profile: &ActionProfile) -> Self {
        let actions = profile.actions();
        let satisfied: Vec<bool> =
            (0..instance.num_players()).map(|k| instance.is_satisfied(actions, k)).collect();
        let utilities: Vec<f64> = satisfied
            .iter()
            .zip(actions)
            .map(|(&s, a)| utility_from(instance, instance.power(*a), s))
            .collect();
        Self {
            profile: profile.clone(),
            welfare: utilities.iter().sum(),
            total_power: actions.iter().map(|a| instance.power(*a)).sum(),
            utilities,
            satisfied,
        }
    }

    pub fn num_satisfied(&self) -> usize {
        self.satisfied.iter().filter(|s| **s).count()
    }
}

/// Result of the global power-minimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOptimum {
    /// Largest number of simultaneously satisfiable players.
    pub max_satisfiable: usize,
    /// Sum of power indices of every solution; total power is this times the grid step.
    pub min_power_index_sum: usize,
    pub min_total_power: f64,
    pub solutions: Vec<ActionProfile>,
}

/// Exhaustive equilibrium oracle over one instance.
#[derive(Debug, Clone, Copy)]
pub struct Oracle<'a> {
    instance: &'a NetworkInstance,
    cap: u64,
}

impl<'a> Oracle<'a> {
    pub fn new(instance: &'a NetworkInstance) -> Self {
        Self { instance, cap: DEFAULT_ENUMERATION_CAP }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn instance(&self) -> &'a NetworkInstance {
        self.instance
    }

    fn profile_count(&self) -> Result<u64> {
        let n = self.instance.num_profiles();
        if n > self.cap as u128 {
            return Err(Error::InstanceTooLarge { profiles: n, cap: self.cap });
        }
        Ok(n as u64)
    }

    /// Visits every joint profile in index order.
    fn for_each_profile(&self, mut f: impl FnMut(u64, &[Action])) -> Result<()> {
        let n = self.profile_count()?;
        let inst = self.instance;
        let m = inst.num_actions();
        let mut digits = vec![0usize; inst.num_players()];
        let mut profile = vec![Action::new(0, 0); inst.num_players()];
        for idx in 0..n {
            f(idx, &profile);
            // Odometer increment, player 0 fastest.
            for (d, a) in digits.iter_mut().zip(profile.iter_mut()) {
                *d += 1;
                if *d < m {
                    *a = inst.action(*d);
                    break;
                }
                *d = 0;
                *a = inst.action(0);
            }
        }
        Ok(())
    }

    /// All pure Nash equilibria (non-strict: ties do not break equilibrium).
    pub fn nash(&self) -> Result<Vec<ActionProfile>> {
        let inst = self.instance;
        let k_players = inst.num_players();
        let m = inst.num_actions() as u64;
        // best[k][rest] = max utility of player k over own actions, where `rest`
        // is the profile index with digit k removed.
        let rest_len = self.profile_count()? / m;
        let mut best = vec![vec![f64::NEG_INFINITY; rest_len as usize]; k_players];
        let strides: Vec<u64> = (0..k_players).map(|k| m.pow(k as u32)).collect();
        let rest_index = |idx: u64, k: usize| -> usize {
            let low = idx % strides[k];
            let high = idx / (strides[k] * m);
            (high * strides[k] + low) as usize
        };
        self.for_each_profile(|idx, profile| {
            for (k, table) in best.iter_mut().enumerate() {
                let u = utility(inst, profile, k);
                let slot = &mut table[rest_index(idx, k)];
                if u > *slot {
                    *slot = u;
                }
            }
        })?;
        let mut out = Vec::new();
        self.for_each_profile(|idx, profile| {
            if (0..k_players).all(|k| utility(inst, profile, k) >= best[k][rest_index(idx, k)]) {
                out.push(ActionProfile::new(profile.to_vec()));
            }
        })?;
        Ok(out)
    }

    pub fn satisfaction_equilibria(&self) -> Result<Vec<ActionProfile>> {
        let mut out = Vec::new();
        self.for_each_profile(|_, p| {
            if is_satisfaction_equilibrium(self.instance, p) {
                out.push(ActionProfile::new(p.to_vec()));
            }
        })?;
        Ok(out)
    }

    pub fn efficient_satisfaction_equilibria(&self) -> Result<Vec<ActionProfile>> {
        Ok(self
            .satisfaction_equilibria()?
            .into_iter()
            .filter(|p| is_efficient_satisfaction_equilibrium(self.instance, p.actions()))
            .collect())
    }

    /// Maximizes the number of satisfied players, then minimizes total power with
    /// every unsatisfied player silent.
    pub fn solve_global(&self) -> Result<GlobalOptimum> {
        let inst = self.instance;
        let mut best_count = 0usize;
        let mut best_sum = usize::MAX;
        let mut solutions = Vec::new();
        self.for_each_profile(|_, p| {
            let mut count = 0;
            let mut admissible = true;
            for (k, a) in p.iter().enumerate() {
                if inst.is_satisfied(p, k) {
                    count += 1;
                } else if a.power_index != 0 {
                    admissible = false;
                    break;
                }
            }
            if !admissible || count < best_count {
                return;
            }
            let sum: usize = p.iter().map(|a| a.power_index).sum();
            if count > best_count || sum < best_sum {
                best_count = count;
                best_sum = sum;
                solutions.clear();
            }
            if sum == best_sum {
                solutions.push(ActionProfile::new(p.to_vec()));
            }
        })?;
        let step = inst.max_power() / (inst.num_power_levels() - 1) as f64;
        Ok(GlobalOptimum {
            max_satisfiable: best_count,
            min_power_index_sum: best_sum,
            min_total_power: best_sum as f64 * step,
            solutions,
        })
    }

    /// A subset of players and a profile for which no joint change of the subset's
    /// actions moves the utility of any outside player, if one exists.
    pub fn interdependence_witness(&self) -> Result<Option<(Vec<usize>, ActionProfile)>> {
        let inst = self.instance;
        let k_players = inst.num_players();
        if k_players < 2 {
            return Ok(None);
        }
        let n = self.profile_count()?;
        let m = inst.num_actions() as u64;
        let mut work: u128 = 0;
        for mask in 1u32..(1 << k_players) - 1 {
            work += n as u128 * (m as u128).pow(mask.count_ones());
        }
        if work > self.cap as u128 {
            return Err(Error::InstanceTooLarge { profiles: work, cap: self.cap });
        }

        let mut witness = None;
        for mask in 1u32..(1 << k_players) - 1 {
            let inside: Vec<usize> = (0..k_players).filter(|k| mask & (1 << k) != 0).collect();
            let outside: Vec<usize> = (0..k_players).filter(|k| mask & (1 << k) == 0).collect();
            let combos = m.pow(inside.len() as u32);
            self.for_each_profile(|_, profile| {
                if witness.is_some() {
                    return;
                }
                let base: Vec<f64> = outside.iter().map(|&i| utility(inst, profile, i)).collect();
                let mut trial = profile.to_vec();
                let influenced = (0..combos).any(|mut c| {
                    for &j in &inside {
                        trial[j] = inst.action((c % m) as usize);
                        c /= m;
                    }
                    outside.iter().zip(&base).any(|(&i, &u)| utility(inst, &trial, i) != u)
                });
                if !influenced {
                    witness = Some((inside.clone(), ActionProfile::new(profile.to_vec())));
                }
            })?;
            if witness.is_some() {
                break;
            }
        }
        Ok(witness)
    }

    pub fn is_interdependent(&self) -> Result<bool> {
        Ok(self.interdependence_witness()?.is_none())
    }

    pub fn report(&self) -> Result<EquilibriumReport> {
        let global = self.solve_global()?;
        let satisfaction = self.satisfaction_equilibria()?;
        let efficient = satisfaction
            .iter()
            .filter(|p| is_efficient_satisfaction_equilibrium(self.instance, p.actions()))
            .cloned()
            .collect();
        Ok(EquilibriumReport {
            nash_profiles: self.nash()?,
            satisfaction_profiles: satisfaction,
            efficient_satisfaction_profiles: efficient,
            opt_solutions: global.solutions,
            max_satisfiable: global.max_satisfiable,
        })
    }
}

pub fn find_nash(instance: &NetworkInstance) -> Result<Vec<ActionProfile>> {
    Oracle::new(instance).nash()
}

pub fn find_satisfaction_equilibria(instance: &NetworkInstance) -> Result<Vec<ActionProfile>> {
    Oracle::new(instance).satisfaction_equilibria()
}

pub fn find_efficient_se(instance: &NetworkInstance) -> Result<Vec<ActionProfile>> {
    Oracle::new(instance).efficient_satisfaction_equilibria()
}

pub fn solve_global(instance: &NetworkInstance) -> Result<GlobalOptimum> {
    Oracle::new(instance).solve_global()
}

pub fn check_interdependence(instance: &NetworkInstance) -> Result<bool> {
    Oracle::new(instance).is_interdependent()
}

/// Equilibrium sets of one instance. Profiles within each set are in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub nash_profiles: Vec<ActionProfile>,
    pub satisfaction_profiles: Vec<ActionProfile>,
    pub efficient_satisfaction_profiles: Vec<ActionProfile>,
    pub opt_solutions: Vec<ActionProfile>,
    pub max_satisfiable: usize,
}

#[derive(Serialize)]
struct ProfileEntry {
    actions: Vec<(usize, usize)>,
    welfare: f64,
    total_power: f64,
}

#[derive(Serialize)]
struct ReportDocument {
    max_satisfiable: usize,
    nash: Vec<ProfileEntry>,
    satisfaction: Vec<ProfileEntry>,
    efficient_satisfaction: Vec<ProfileEntry>,
    optimal: Vec<ProfileEntry>,
}

impl EquilibriumReport {
    /// JSON document; each profile is a list of `(channel, power_index)` pairs
    /// with its welfare and total power.
    pub fn to_json(&self, instance: &NetworkInstance) -> String {
        let entries = |set: &[ActionProfile]| -> Vec<ProfileEntry> {
            set.iter()
                .map(|p| {
                    let o = GameOutcome::evaluate(instance, p);
                    ProfileEntry {
                        actions: p.actions().iter().map(|a| (a.channel, a.power_index)).collect(),
                        welfare: o.welfare,
                        total_power: o.total_power,
                    }
                })
                .collect()
        };
        let doc = ReportDocument {
            max_satisfiable: self.max_satisfiable,
            nash: entries(&self.nash_profiles),
            satisfaction: entries(&self.satisfaction_profiles),
            efficient_satisfaction: entries(&self.efficient_satisfaction_profiles),
            optimal: entries(&self.opt_solutions),
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }
}
