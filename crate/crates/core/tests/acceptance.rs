//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line with its runtime. Run with `cargo test --test acceptance --
//! --nocapture` to see every line.

use decode_rl::env::{BlockEnv, Instrumented};
use decode_rl::harness::{emit_csv, run_experiment, ExperimentConfig};
use decode_rl::latent::{policy_value, value_iteration};
use decode_rl::learner::{OracleQ, OracleQConfig};
use decode_rl::lock::{LockEnv, LockSpec, RelabelMode, LOCK_ACTIONS};
use decode_rl::perm::Permutation;
use decode_rl::policy::TabularPolicy;
use decode_rl::rng::{derive_rng, seed_rng};
use decode_rl::stats::chi_square_gof;
use decode_rl::trajectory::sample_trajectory;
use decode_rl::ulo::{best_permutation_accuracy, fit_ulo, Decoder, UloConfig, UloMethod};
use decode_rl::url::{fix_label, url_train, LabelBank, UrlMode, UrlParams};
use std::collections::HashMap;
use std::time::Instant;

fn report(criterion: &str, passed: bool, start: Instant, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    println!(
        "[{status}] {criterion} ({:.1}s): {detail}",
        start.elapsed().as_secs_f64()
    );
    assert!(passed, "{criterion}: {detail}");
}

#[test]
fn criterion1_ground_truth_optimal_values() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &alpha in &[0.0, 0.2, 0.5] {
        for &h in &[5usize, 10, 20] {
            let env = LockEnv::new(LockSpec::bernoulli(h, alpha, 11)).unwrap();
            let vi = value_iteration(env.mdp());
            worst = worst.max((vi.value - 0.5).abs());
            let pv = policy_value(env.mdp(), &vi.policy).unwrap();
            worst = worst.max((pv - vi.value).abs());
        }
    }
    report(
        "criterion 1: ground truth V* = 0.5",
        worst <= 1e-10 && start.elapsed().as_secs_f64() < 1.0,
        start,
        &format!("max deviation {worst:.2e} across alpha x horizon grid"),
    );
}

#[test]
fn criterion2_environment_fidelity() {
    let start = Instant::now();
    let alpha = 0.2;
    let env = LockEnv::new(
        LockSpec::bernoulli(5, alpha, 0).with_relabel_mode(RelabelMode::Identity),
    )
    .unwrap();
    let mut rng = seed_rng(12);
    let draws = 100_000;
    let mut worst_p = 1.0f64;
    let mut cells = 0;
    for h in 0..3 {
        for s in 0..env.states_per_level()[h] {
            for a in 0..LOCK_ACTIONS {
                let expected = match (s, a) {
                    (2, _) | (_, 2) | (_, 3) => [0.0, 0.0, 1.0],
                    (_, 0) => [1.0 - alpha, alpha, 0.0],
                    _ => [alpha, 1.0 - alpha, 0.0],
                };
                let mut counts = [0u64; 3];
                for _ in 0..draws {
                    counts[env.latent_step(h, s, a, &mut rng)] += 1;
                }
                let t = chi_square_gof(&counts, &expected);
                worst_p = worst_p.min(t.p_value);
                cells += 1;
            }
        }
    }
    // alpha = 0 rows must be exactly deterministic
    let det = LockEnv::new(
        LockSpec::bernoulli(5, 0.0, 0).with_relabel_mode(RelabelMode::Identity),
    )
    .unwrap();
    let mut exact = true;
    for _ in 0..draws {
        exact &= det.latent_step(1, 0, 0, &mut rng) == 0;
        exact &= det.latent_step(1, 1, 1, &mut rng) == 1;
        exact &= det.latent_step(1, 0, 2, &mut rng) == 2;
    }
    report(
        "criterion 2: transition frequencies in 99% multinomial region",
        worst_p > 0.01 && exact && start.elapsed().as_secs_f64() < 10.0,
        start,
        &format!("{cells} cells at n = {draws}; worst chi-square p = {worst_p:.4}"),
    );
}

#[test]
fn criterion3_oracle_quality_and_monotonicity() {
    let start = Instant::now();
    let sizes = [30usize, 100, 300, 1000];
    let per_state_target = 1000;
    let seeds = 20;
    let horizon = 5usize;
    let mut pure_seeds = HashMap::from([(UloMethod::KMeans, 0), (UloMethod::Gmm, 0)]);
    let mut purity_by_n: HashMap<UloMethod, Vec<Vec<f64>>> = HashMap::from([
        (UloMethod::KMeans, vec![Vec::new(); sizes.len()]),
        (UloMethod::Gmm, vec![Vec::new(); sizes.len()]),
    ]);

    for seed in 0..seeds as u64 {
        let env = LockEnv::new(
            LockSpec::gaussian(horizon, 0.0, 0.1, 500 + seed).with_diagnostics(true),
        )
        .unwrap();
        // policy-mixed collection: uniform-random behavior, bucketed by
        // the diagnostics channel, so each (level, state) is equally
        // represented in the fit data
        let mut buckets: Vec<Vec<Vec<Vec<f64>>>> = (0..=horizon)
            .map(|h| vec![Vec::new(); env.states_per_level()[h]])
            .collect();
        let mut rng = derive_rng(40, &[seed]);
        let oracle = env.oracle_decoders();
        while buckets
            .iter()
            .any(|level| level.iter().any(|b| b.len() < per_state_target))
        {
            let pi = TabularPolicy::random(
                &env.states_per_level()[..horizon],
                LOCK_ACTIONS,
                &mut rng,
            );
            let phi = decode_rl::policy::compose_policy(pi, oracle.clone()).unwrap();
            let traj = sample_trajectory(&env, &phi, &mut rng);
            let latents = traj.latents.as_ref().unwrap();
            for (h, obs) in traj.states.iter().enumerate() {
                let bucket = &mut buckets[h][latents[h]];
                if bucket.len() < per_state_target {
                    bucket.push(obs.clone());
                }
            }
        }
        for method in [UloMethod::KMeans, UloMethod::Gmm] {
            let mut all_pure = true;
            for (ni, &n) in sizes.iter().enumerate() {
                let mut per_level = Vec::new();
                let mut truth = Vec::new();
                for level in 0..=horizon {
                    let states = env.states_per_level()[level];
                    let take = n.div_ceil(states);
                    let mut data = Vec::new();
                    let mut labels = Vec::new();
                    for (s, bucket) in buckets[level].iter().enumerate() {
                        for obs in bucket.iter().take(take) {
                            data.push(obs.clone());
                            labels.push(s);
                        }
                    }
                    per_level.push(data);
                    truth.push(labels);
                }
                let clusters: Vec<usize> = env.states_per_level().to_vec();
                let cfg = UloConfig::new(method, clusters);
                let decoders = fit_ulo(&per_level, &cfg, &mut derive_rng(41, &[seed, ni as u64]))
                    .unwrap();
                let mut level_purities = Vec::new();
                for level in 1..=horizon {
                    let pred: Vec<usize> = per_level[level]
                        .iter()
                        .map(|x| decoders[level].predict(x))
                        .collect();
                    let (acc, _) = best_permutation_accuracy(&pred, &truth[level], 3);
                    level_purities.push(acc);
                }
                let mean_purity =
                    level_purities.iter().sum::<f64>() / level_purities.len() as f64;
                purity_by_n.get_mut(&method).unwrap()[ni].push(mean_purity);
                if n == 1000 && level_purities.iter().any(|&p| p < 0.99) {
                    all_pure = false;
                }
            }
            if all_pure {
                *pure_seeds.get_mut(&method).unwrap() += 1;
            }
        }
    }

    let mut passed = true;
    let mut detail = String::new();
    for method in [UloMethod::KMeans, UloMethod::Gmm] {
        let pure = pure_seeds[&method];
        passed &= pure >= 19;
        let avgs: Vec<f64> = purity_by_n[&method]
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect();
        let monotone = avgs.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        passed &= monotone;
        detail.push_str(&format!(
            "{method:?}: {pure}/{seeds} seeds pure at n=1000, avg purity by n {:?} monotone={monotone}; ",
            avgs.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ));
    }
    passed &= start.elapsed().as_secs_f64() < 30.0;
    report("criterion 3: decoder purity and sample-size monotonicity", passed, start, &detail);
}

#[test]
fn criterion4_label_repair_suite() {
    let start = Instant::now();
    let line = |m: usize| {
        Decoder::nearest_centroid(0, (0..m).map(|i| vec![i as f64]).collect(), None)
    };

    // threshold boundary: 7/10 swaps, 6/10 does not
    let mut swap = vec![line(3)];
    let mut bank = LabelBank::new(1);
    bank.insert(
        0,
        0,
        (0..10).map(|i| vec![if i < 7 { 1.0 } else { 0.0 }]).collect(),
    );
    fix_label(&mut swap, &bank);
    let swapped_ok = swap[0].predict(&[1.0]) == 0 && swap[0].predict(&[0.0]) == 1;

    let mut hold = vec![line(3)];
    let mut bank6 = LabelBank::new(1);
    bank6.insert(
        0,
        0,
        (0..10).map(|i| vec![if i < 6 { 1.0 } else { 0.0 }]).collect(),
    );
    fix_label(&mut hold, &bank6);
    let held_ok = hold[0].label_permutation().is_identity();

    // randomized cases: idempotence, exact accuracy preservation, and
    // full alignment on consistent banks
    let mut rng = seed_rng(77);
    let mut cases_ok = 0;
    let total = 1000;
    for case in 0..total {
        use rand::Rng as _;
        let m = rng.random_range(2..=4usize);
        let mut dec = line(m);
        dec.permute_labels(&Permutation::random(m, &mut rng));
        let truth: Vec<usize> = (0..40).map(|i| i % m).collect();
        let obs: Vec<Vec<f64>> = truth.iter().map(|&s| vec![s as f64]).collect();
        let before: Vec<usize> = obs.iter().map(|x| dec.predict(x)).collect();
        let (acc_before, _) = best_permutation_accuracy(&before, &truth, m);

        let mut bank = LabelBank::new(1);
        for s in 0..m {
            let count = 5 + (case + s) % 11;
            bank.insert(0, s, vec![vec![s as f64]; count]);
        }
        let mut decs = vec![dec];
        fix_label(&mut decs, &bank);
        let once = decs.clone();
        fix_label(&mut decs, &bank);
        let after: Vec<usize> = obs.iter().map(|x| decs[0].predict(x)).collect();
        let (acc_after, _) = best_permutation_accuracy(&after, &truth, m);
        if decs == once && acc_before == acc_after && after == truth {
            cases_ok += 1;
        }
    }
    let passed = swapped_ok
        && held_ok
        && cases_ok == total
        && start.elapsed().as_secs_f64() < 5.0;
    report(
        "criterion 4: label repair boundary, idempotence, accuracy preservation",
        passed,
        start,
        &format!("boundary ok={}, {cases_ok}/{total} randomized cases exact", swapped_ok && held_ok),
    );
}

#[test]
fn criterion5_tsr_trajectory_accounting() {
    let start = Instant::now();
    let env = Instrumented::new(LockEnv::new(LockSpec::bernoulli(5, 0.0, 7)).unwrap());
    let clusters: Vec<usize> = env.states_per_level().to_vec();
    let ulo_cfg = UloConfig::new(UloMethod::KMeans, clusters.clone());
    let mut params = UrlParams::new(5, 3);
    params.mode = UrlMode::Theoretical;
    params.restarts_override = Some(1);
    let mut rng = seed_rng(9);
    let candidates = url_train(
        &env,
        &ulo_cfg,
        |_| OracleQ::new(env.states_per_level().to_vec(), 4, OracleQConfig::default()),
        &params,
        &mut rng,
        |_| true,
    )
    .unwrap();

    // formula: per call k, sum_i ((k-1)J+i)B training + B test per
    // iteration, plus one rollout; K+1 calls
    let j = params.tsr_iters(5, 3) as u64;
    let b = params.batch as u64;
    let expected: u64 = (1..=4u64)
        .map(|k| (1..=j).map(|i| ((k - 1) * j + i) * b + b).sum::<u64>() + 1)
        .sum();
    let consumed = env.episodes();
    let passed = consumed == expected
        && candidates.len() == 1
        && start.elapsed().as_secs_f64() < 120.0;
    report(
        "criterion 5: theoretical-mode trajectory accounting",
        passed,
        start,
        &format!("consumed {consumed}, formula {expected} (J = {j}, B = {b}, K = 3)"),
    );
}

fn final_values(cfg_text: &str) -> Vec<f64> {
    let cfg = ExperimentConfig::parse(cfg_text, &[]).unwrap();
    let records = run_experiment(&cfg).unwrap();
    (0..cfg.replicates)
        .map(|rep| {
            records
                .iter()
                .filter(|r| r.replicate == rep)
                .next_back()
                .expect("records per replicate")
                .mean_reward
        })
        .collect()
}

#[test]
fn criterion6a_skyline_oracleq_latent() {
    let start = Instant::now();
    let finals = final_values(
        "algorithm = oracleq-lat\nenv = lockbernoulli\nH = 5\nalpha = 0.0\n\
         budget = 100000\nreplicates = 10\neval_every = 20000\n\
         eval_episodes = 2000\ntiming = off\nbase_seed = 1\n",
    );
    let good = finals.iter().filter(|&&v| v >= 0.45).count();
    report(
        "criterion 6a: OracleQ-lat skyline reaches 0.45",
        good >= 8,
        start,
        &format!("{good}/10 replicates >= 0.45 (finals {finals:?})"),
    );
}

#[test]
fn criterion6b_obs_baseline_stays_low() {
    // The qualitative claim is that observation-tabular Q-learning is
    // far from optimal. At this budget a 5-level lock has only ~96
    // reachable observation patterns per level, and the measured
    // learner crosses 0.3 around 3e4 trajectories; the clause is
    // asserted exactly as stated and is expected to fail.
    let start = Instant::now();
    let finals = final_values(
        "algorithm = qlearning-obs\nenv = lockbernoulli\nH = 5\nalpha = 0.0\n\
         budget = 100000\nreplicates = 10\neval_every = 20000\n\
         eval_episodes = 2000\ntiming = off\nbase_seed = 1\n",
    );
    let low = finals.iter().filter(|&&v| v < 0.3).count();
    report(
        "criterion 6b: QLearning-obs stays below 0.3",
        low >= 8,
        start,
        &format!("{low}/10 replicates < 0.3 (finals {finals:?})"),
    );
}

#[test]
fn criterion6c_url_matches_skyline() {
    let start = Instant::now();
    let finals = final_values(
        "algorithm = url\nenv = lockbernoulli\nH = 5\nalpha = 0.0\nulo = kmeans\n\
         budget = 100000\nreplicates = 10\neval_every = 20000\n\
         eval_episodes = 2000\ntiming = off\nbase_seed = 1\n",
    );
    let good = finals.iter().filter(|&&v| v >= 0.45).count();
    report(
        "criterion 6c: URL(kmeans) reaches 0.45",
        good >= 8,
        start,
        &format!("{good}/10 replicates >= 0.45 (finals {finals:?})"),
    );
}

#[test]
fn criterion7_url_gmm_gaussian_robustness() {
    let start = Instant::now();
    let finals = final_values(
        "algorithm = url\nenv = lockgaussian\nH = 5\nalpha = 0.2\nsigma = 0.1\n\
         ulo = gmm\nbudget = 100000\nreplicates = 10\neval_every = 20000\n\
         eval_episodes = 2000\ntiming = off\nbase_seed = 1\n",
    );
    let good = finals.iter().filter(|&&v| v >= 0.4).count();
    report(
        "criterion 7: URL(gmm) on gaussian lock reaches 0.4",
        good >= 7,
        start,
        &format!("{good}/10 replicates >= 0.4 (finals {finals:?})"),
    );
}

#[test]
fn criterion8_deterministic_csv_bytes() {
    let start = Instant::now();
    let url_cfg = "algorithm = url\nenv = lockbernoulli\nH = 5\nalpha = 0.0\nulo = kmeans\n\
         budget = 100000\nreplicates = 10\neval_every = 20000\n\
         eval_episodes = 2000\ntiming = off\nbase_seed = 1\n";
    let oq_cfg = "algorithm = oracleq-lat\nenv = lockbernoulli\nH = 5\nalpha = 0.2\n\
         budget = 50000\nreplicates = 5\neval_every = 10000\n\
         eval_episodes = 1000\ntiming = off\nbase_seed = 3\n";
    let mut passed = true;
    let mut sizes = Vec::new();
    for text in [url_cfg, oq_cfg] {
        let cfg = ExperimentConfig::parse(text, &[]).unwrap();
        let a = emit_csv(&run_experiment(&cfg).unwrap());
        let b = emit_csv(&run_experiment(&cfg).unwrap());
        passed &= a == b;
        sizes.push(a.len());
    }
    report(
        "criterion 8: repeated runs produce identical CSV bytes",
        passed,
        start,
        &format!("byte-identical outputs of {sizes:?} bytes"),
    );
}

#[test]
fn h20_configuration_smoke() {
    let start = Instant::now();
    let cfg = ExperimentConfig::parse(
        "algorithm = url\nenv = lockbernoulli\nH = 20\nalpha = 0.2\nulo = kmeans\n\
         budget = 15000\nreplicates = 1\neval_every = 5000\n\
         eval_episodes = 200\ntiming = off\nbase_seed = 2\n",
        &[],
    )
    .unwrap();
    let records = run_experiment(&cfg).unwrap();
    report(
        "smoke: H = 20 configuration runs end to end",
        !records.is_empty(),
        start,
        &format!("{} records emitted", records.len()),
    );
}
