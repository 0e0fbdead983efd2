use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use explorer_lab::adversary::{
    fixed_block_pair, part1_pair, part3_pair, DiagonalEnvironment, Flipped, LockParams, PolicyOracle, TablePolicy,
};
use explorer_lab::agent::{burst_length, burst_threshold, ExplorationSchedule};
use explorer_lab::discount::{Discount, TabularTail};
use explorer_lab::env::{
    Action, ClassFile, Environment, EnvironmentClass, FsmEnvironmentSpec, History, ModelTracker, Reward,
};
use explorer_lab::lab::{cesaro, read_trace_csv, RegretTrace, TraceRecord};
use explorer_lab::planner::Planner;

fn play(env: &dyn Environment, actions: &[u8]) -> History {
    let mut h = History::new();
    for &a in actions {
        let p = env.percept(h.view(), Action(a)).unwrap();
        h.push(Action(a), p);
    }
    h
}

fn discount_strategy() -> impl Strategy<Value = Discount> {
    prop_oneof![
        (0.05f64..0.99).prop_map(|g| Discount::geometric(g).unwrap()),
        Just(Discount::Quadratic),
        (prop::collection::vec(0.0f64..1.0, 1..8), 0.1f64..1.0, 0.1f64..0.95).prop_map(|(w, first, ratio)| {
            Discount::tabular(w, TabularTail::Geometric { first, ratio }).unwrap()
        }),
        (prop::collection::vec(0.0f64..1.0, 1..8), 0.1f64..4.0)
            .prop_map(|(w, scale)| Discount::tabular(w, TabularTail::Quadratic { scale }).unwrap()),
    ]
}

// Discounted value of the best infinite action sequence, by value iteration.
fn geometric_optimum(spec: &FsmEnvironmentSpec, state: usize, gamma: f64) -> f64 {
    let mut v = vec![0.0; spec.states];
    for _ in 0..2000 {
        let mut next = vec![f64::NEG_INFINITY; spec.states];
        for tr in &spec.transitions {
            let q = (1.0 - gamma) * tr.reward_num as f64 / tr.reward_den as f64 + gamma * v[tr.next];
            next[tr.state] = next[tr.state].max(q);
        }
        v = next;
    }
    v[state]
}

fn fsm_state(spec: &FsmEnvironmentSpec, actions: &[u8]) -> usize {
    actions.iter().fold(spec.start, |s, &a| {
        spec.transitions.iter().find(|tr| tr.state == s && tr.action == a as usize).unwrap().next
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn an_open_lock_stays_open(
        switch_on in 1u64..6,
        block in 1u64..5,
        actions in prop::collection::vec(0u8..2, 1..60),
    ) {
        let params = LockParams::new(switch_on, Ratio::new(1, 8)).unwrap();
        for (_, nu) in [part3_pair(&params), fixed_block_pair(&params, block)] {
            let h = play(&nu, &actions);
            let mut was_open = false;
            for k in 0..=h.len() {
                let open = nu.is_open(h.prefix(k)).unwrap();
                prop_assert!(open || !was_open, "lock closed again at step {k}");
                if open && k < h.len() && h.steps()[k].action == Action::DOWN {
                    prop_assert_eq!(h.steps()[k].percept.reward, Reward::ONE);
                }
                was_open = open;
            }
        }
    }

    #[test]
    fn lock_matches_its_decoy_before_switch_on(switch_on in 2u64..13, seed in any::<u64>()) {
        let params = LockParams::new(switch_on, Ratio::new(1, 4)).unwrap();
        let pairs = [part3_pair(&params), fixed_block_pair(&params, 1)];
        let len = (switch_on - 1) as u32;
        // exhaustive over short prefixes, one seeded sample otherwise
        let codes: Vec<u64> = if len <= 8 { (0..1u64 << len).collect() } else { vec![seed] };
        for (mu, nu) in &pairs {
            for &code in &codes {
                let actions: Vec<u8> = (0..len).map(|j| ((code >> j) & 1) as u8).collect();
                prop_assert_eq!(play(mu, &actions), play(nu, &actions));
            }
        }
        let (mu, nu) = part1_pair(&params, &Discount::geometric(0.9).unwrap());
        let downs = vec![1u8; len as usize];
        prop_assert_eq!(play(&mu, &downs), play(&nu, &downs));
    }

    #[test]
    fn horizon_is_the_least_window_exceeding_p(
        discount in discount_strategy(),
        t in 1u64..500,
        p in 0.0f64..0.99,
    ) {
        let h = discount.effective_horizon(t, p).unwrap();
        prop_assert!(discount.window_mass(t, h).unwrap() > p);
        if h > 0 {
            prop_assert!(discount.window_mass(t, h - 1).unwrap() <= p);
        }
        let mut last = 0.0;
        for k in 0..20 {
            let m = discount.window_mass(t, k).unwrap();
            prop_assert!(m >= last - 1e-12 && m <= 1.0 + 1e-12);
            last = m;
        }
    }

    #[test]
    fn cesaro_means_sum_back_to_the_series(series in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let means = cesaro(&series);
        let mut sum = 0.0;
        let mut max: f64 = 0.0;
        for (k, (&x, &m)) in series.iter().zip(&means).enumerate() {
            sum += x;
            max = max.max(x);
            prop_assert!((m * (k + 1) as f64 - sum).abs() < 1e-9);
            prop_assert!(m <= max + 1e-12);
        }
    }

    #[test]
    fn schedule_bursts_cover_their_windows(seed in any::<u64>(), n in 1u64..400) {
        let mut s = ExplorationSchedule::new(seed, 3);
        prop_assert!(s.chi(1));
        for k in 1..=n {
            let covered = (1..=k).any(|i| s.chi(i) && i + burst_length(i) >= k);
            prop_assert_eq!(s.chi_bar(k), covered);
            if s.chi_bar(k) {
                prop_assert!(s.dot_chi(0, k) && s.dot_chi(4, k));
            }
            prop_assert!(s.psi(k).index() < 3);
        }
        let h = 3;
        let brute = (1..=n).filter(|&k| s.dot_chi(h, k)).count() as u64;
        prop_assert_eq!(s.dot_chi_count(h, n), brute);
        prop_assert!(s.chi_count(n) <= n);
    }

    #[test]
    fn late_bursts_outlast_the_lookahead(h in 0u64..40, extra in 0u64..1000) {
        let i = burst_threshold(h) + extra;
        prop_assert!(burst_length(i) + 1 > h);
        if h > 0 {
            prop_assert!(burst_length(burst_threshold(h) - 1) + 1 <= h);
        }
    }

    #[test]
    fn forced_prefix_leaves_later_bits_alone(seed in any::<u64>(), forced in prop::collection::vec(any::<bool>(), 1..20)) {
        let mut plain = ExplorationSchedule::new(seed, 2);
        let mut pinned = ExplorationSchedule::with_chi_prefix(seed, 2, &forced);
        for k in 1..=forced.len() as u64 {
            prop_assert_eq!(pinned.chi(k), forced[(k - 1) as usize]);
        }
        for k in forced.len() as u64 + 1..=forced.len() as u64 + 100 {
            prop_assert_eq!(pinned.chi(k), plain.chi(k));
        }
    }

    #[test]
    fn model_index_only_moves_forward(
        class_seed in any::<u64>(),
        truth in 1usize..6,
        actions in prop::collection::vec(0u8..2, 1..80),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed);
        let specs: Vec<_> = (0..5).map(|_| FsmEnvironmentSpec::random(&mut rng, 3, 2, 2, 2)).collect();
        let class = EnvironmentClass::from_specs(&specs).unwrap();
        let h = play(class.get(truth).unwrap(), &actions);
        let mut tracker = ModelTracker::new(&class).unwrap();
        let mut last = 1;
        for k in 0..=h.len() {
            let prefix: History = h.steps()[..k].iter().copied().collect();
            let i = tracker.sync(&prefix).unwrap();
            prop_assert!(i >= last && i <= truth);
            let first = (1..=class.len())
                .find(|&j| explorer_lab::env::is_consistent(class.get(j).unwrap(), &prefix))
                .unwrap();
            prop_assert_eq!(i, first);
            last = i;
        }
    }

    #[test]
    fn planner_value_is_within_eps_below_the_optimum(
        seed in any::<u64>(),
        gamma in 0.3f64..0.8,
        eps_bits in 3u32..8,
        prefix in prop::collection::vec(0u8..2, 0..6),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = FsmEnvironmentSpec::random(&mut rng, 4, 2, 1, 4);
        let env = spec.build(0).unwrap();
        let eps = 1.0 / f64::from(1u32 << eps_bits);
        let d = Discount::geometric(gamma).unwrap();
        let h = play(&env, &prefix);
        let value = Planner::default().optimal_value(&env, &h, eps, &d).unwrap();
        let optimum = geometric_optimum(&spec, fsm_state(&spec, &prefix), gamma);
        prop_assert!((0.0..=1.0).contains(&value));
        prop_assert!(value <= optimum + 1e-9, "value {value} above optimum {optimum}");
        prop_assert!(value >= optimum - eps - 1e-9, "value {value} below {optimum} - {eps}");
    }

    #[test]
    fn class_files_round_trip(seed in any::<u64>(), count in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let file = ClassFile {
            environments: (0..count).map(|_| FsmEnvironmentSpec::random(&mut rng, 5, 3, 2, 6)).collect(),
        };
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back: ClassFile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &file);
        // rewards come back in lowest terms, so compare the built tables
        for (i, spec) in file.environments.iter().enumerate() {
            let env = spec.build(i).unwrap();
            prop_assert_eq!(env.to_spec().build(i).unwrap(), env);
        }
    }

    #[test]
    fn trace_csv_round_trips(
        rows in prop::collection::vec(
            (any::<bool>(), 1usize..9, 0u8..4, 0u64..=8, prop::option::of(-1.0f64..1.0)),
            1..40,
        ),
    ) {
        let mut avg = None;
        let records: Vec<TraceRecord> = rows
            .iter()
            .enumerate()
            .map(|(k, &(exploring, model_index, a, num, gap))| {
                if gap.is_some() {
                    avg = gap;
                }
                TraceRecord {
                    t: 2 * k as u64 + 1,
                    exploring,
                    model_index,
                    action: Action(a),
                    reward_num: num,
                    reward_den: 8,
                    gap,
                    avg_gap: gap.and(avg),
                }
            })
            .collect();
        let trace = RegretTrace {
            records: records.clone(),
            gap_tolerance: 0.125,
            stride: 2,
            steps: 2 * rows.len() as u64,
            settling_time: Some(1),
            budget_exhausted: 0,
        };
        let text = trace.to_csv().unwrap();
        prop_assert_eq!(read_trace_csv(text.as_bytes()).unwrap(), records);
    }
}

#[test]
fn diagonal_never_rewards_its_oracle() {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = TablePolicy::random(&mut rng, 3, 2);
        let env = DiagonalEnvironment::new(table.clone());
        let flipped = Flipped(table.clone());
        let mut own = History::new();
        let mut other = History::new();
        for _ in 0..1000 {
            let a = table.decide(own.view()).unwrap();
            let p = env.percept(own.view(), a).unwrap();
            assert_eq!(p.reward, Reward::ZERO, "seed {seed}, step {}", own.next_time());
            own.push(a, p);

            let b = flipped.decide(other.view()).unwrap();
            let q = env.percept(other.view(), b).unwrap();
            assert_eq!(q.reward, Reward::ONE, "seed {seed}, step {}", other.next_time());
            other.push(b, q);
        }
    }
}
