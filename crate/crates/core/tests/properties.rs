use proptest::prelude::*;

use tepower::dtmc::ChainState;
use tepower::game;
use tepower::te::{self, EXPONENT_FLOOR};
use tepower::{
    power_grid, transition_probs, utility, Action, ActionProfile, DtmcParams, InstanceParams, NetworkInstance, Target,
    TeParams, TeState, TrialOptions,
};

fn instance() -> impl Strategy<Value = (NetworkInstance, Vec<Action>)> {
    (1usize..=4, 1usize..=4, 2usize..=8, any::<u64>(), any::<bool>()).prop_flat_map(|(k, c, q, seed, ray)| {
        let params = InstanceParams::with_defaults(k, c, q);
        let inst = if ray {
            NetworkInstance::rayleigh(params, seed).unwrap()
        } else {
            NetworkInstance::simplified(params).unwrap()
        };
        let profile = prop::collection::vec((0..c, 0..q).prop_map(|(b, p)| Action::new(b, p)), k);
        (Just(inst), profile)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn grid_is_uniform_and_closed(q in 2usize..64, p_max in 1e-3f64..1e3) {
        let g = power_grid(q, p_max).unwrap();
        prop_assert_eq!(g.len(), q);
        prop_assert_eq!(g[0], 0.0);
        prop_assert_eq!(g[q - 1], p_max);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn utility_in_unit_interval((inst, profile) in instance()) {
        for k in 0..inst.num_players() {
            let u = utility(&inst, &profile, k);
            prop_assert!((0.0..=1.0).contains(&u));
        }
    }

    #[test]
    fn satisfaction_flip_adds_fixed_bonus((inst, profile) in instance()) {
        let beta = inst.beta();
        let k = 0;
        let u = utility(&inst, &profile, k);
        let base = (inst.max_power() - inst.power(profile[k])) / inst.max_power() / (1.0 + beta);
        let bonus = if inst.is_satisfied(&profile, k) { beta / (1.0 + beta) } else { 0.0 };
        prop_assert!((u - base - bonus).abs() < 1e-12);
    }

    #[test]
    fn own_power_raises_own_sinr_and_hurts_cochannel((inst, mut profile) in instance(), who in 0usize..4) {
        let who = who % inst.num_players();
        prop_assume!(profile[who].power_index + 1 < inst.num_power_levels());
        let before: Vec<f64> = (0..inst.num_players()).map(|k| inst.sinr(&profile, k)).collect();
        profile[who].power_index += 1;
        for k in 0..inst.num_players() {
            let after = inst.sinr(&profile, k);
            if k == who {
                prop_assert!(after > before[k]);
            } else if profile[k].channel == profile[who].channel && before[k] > 0.0 {
                prop_assert!(after < before[k]);
            } else {
                prop_assert_eq!(after, before[k]);
            }
        }
    }

    #[test]
    fn sinr_invariant_to_joint_gain_and_noise_scaling((inst, profile) in instance(), s in 0.01f64..100.0) {
        let mut params = *inst.params();
        params.noise_power *= s;
        let scaled: Vec<f64> = inst.gains().iter().map(|g| g * s).collect();
        let other = NetworkInstance::new(params, tepower::ChannelKind::Custom, scaled).unwrap();
        for k in 0..inst.num_players() {
            let (a, b) = (inst.sinr(&profile, k), other.sinr(&profile, k));
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn profile_index_round_trips((inst, profile) in instance()) {
        let (k, c, q) = (inst.num_players(), inst.num_channels(), inst.num_power_levels());
        let idx = ActionProfile::index_of(&profile, c, q);
        prop_assert!((idx as u128) < inst.num_profiles());
        prop_assert_eq!(ActionProfile::from_index(idx, k, c, q).0, profile);
    }

    #[test]
    fn acceptance_exponents_stay_in_range(du in 0.0f64..=1.0, u in 0.0f64..=1.0, k in 1usize..8) {
        let g = te::g_fn(du).unwrap();
        let f = te::f_fn(u, k).unwrap();
        prop_assert!((EXPONENT_FLOOR..=0.2).contains(&g));
        prop_assert!((EXPONENT_FLOOR..=0.2 / k as f64).contains(&f));
    }

    #[test]
    fn update_keeps_benchmark_consistent(u in 0.0f64..=1.0, seed in any::<u64>(), mood in 0usize..4) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let params = TeParams::new(0.05, 3).unwrap();
        let a = Action::new(1, 2);
        let mut s = TeState::content(a, 0.5);
        s.mood = [te::Mood::Content, te::Mood::Hopeful, te::Mood::Watchful, te::Mood::Discontent][mood];
        s.last_action = Action::new(0, 1);
        let next = te::update(&s, u, &params, &mut rng).unwrap();
        if next.mood == te::Mood::Content && next.benchmark_utility != s.benchmark_utility {
            prop_assert_eq!(next.benchmark_utility, u);
        }
        prop_assert!((0.0..=1.0).contains(&next.benchmark_utility));
    }

    #[test]
    fn chains_are_row_stochastic(
        k in 1usize..6, extra in 1usize..5, q in 2usize..12, qs in 0usize..12,
        eps in 1e-4f64..0.2, du in 0.0f64..=1.0,
    ) {
        let p = DtmcParams::new(k, k + extra, q, qs % q, eps).with_delta_u(du);
        for target in [Target::Nash, Target::Satisfaction] {
            if let Ok(m) = transition_probs(&p, target) {
                prop_assert!(m.max_row_error() <= 1e-12);
                prop_assert!(m.transition.iter().all(|x| (0.0..=1.0).contains(x)));
                // With no satisfying level the SE ladder is stuck once entered.
                match m.hitting_time(ChainState::Discontent) {
                    Ok(t) => prop_assert!(t.is_finite() && t >= 1.0),
                    Err(e) => prop_assert!(
                        target == Target::Satisfaction && p.satisfying_levels == 0
                            && matches!(e, tepower::Error::Unreachable(_))
                    ),
                }
            }
        }
    }

    #[test]
    fn nash_flags_agree_with_oracle(seed in 0u64..200) {
        let inst = NetworkInstance::rayleigh(InstanceParams::with_defaults(2, 2, 3), seed).unwrap();
        let opts = TrialOptions::new(300, 0.05).recording();
        let rec = tepower::run_trial(&inst, &opts, seed).unwrap();
        for s in rec.steps.unwrap().iter().step_by(37) {
            let p = ActionProfile::from_index(s.profile, 2, 2, 3);
            prop_assert_eq!(s.at_ne, game::is_nash(&inst, &p.0));
            prop_assert_eq!(s.at_se, game::is_satisfaction_equilibrium(&inst, &p.0));
            if s.at_se {
                prop_assert_eq!(s.num_satisfied(), 2);
            }
        }
    }
}
