//! Fast end-to-end invariant suites behind the `selfcheck` CLI
//! subcommand: ground-truth values, simulator statistics, oracle
//! monotonicity, label repair, accounting, and determinism.

use super::config::ExperimentConfig;
use super::records::emit_csv;
use super::run_experiment;
use crate::env::{BlockEnv, Instrumented};
use crate::latent::{policy_value, value_iteration};
use crate::lock::{LockEnv, LockSpec, RelabelMode, LOCK_ACTIONS};
use crate::perm::Permutation;
use crate::policy::TabularPolicy;
use crate::rng::seed_rng;
use crate::stats::chi_square_gof;
use crate::ulo::{best_permutation_accuracy, fit_ulo, gmm_fit, kmeans_fit, UloConfig, UloMethod};
use crate::url::{fix_label, tsr, LabelBank, TsrMemory, UrlMode, UrlParams};

pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn suite(name: &'static str, result: Result<String, String>) -> SuiteResult {
    match result {
        Ok(detail) => SuiteResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => SuiteResult {
            name,
            passed: false,
            detail,
        },
    }
}

pub fn run_selfcheck() -> Vec<SuiteResult> {
    vec![
        suite("ground-truth-values", ground_truth()),
        suite("lock-transition-statistics", lock_statistics()),
        suite("oracle-objectives", oracle_objectives()),
        suite("label-repair", label_repair()),
        suite("tsr-accounting", tsr_accounting()),
        suite("experiment-determinism", determinism()),
    ]
}

fn ground_truth() -> Result<String, String> {
    for &alpha in &[0.0, 0.2, 0.5] {
        for &h in &[5usize, 10, 20] {
            let env = LockEnv::new(LockSpec::bernoulli(h, alpha, 11))
                .map_err(|e| e.to_string())?;
            let vi = value_iteration(env.mdp());
            if (vi.value - 0.5).abs() > 1e-10 {
                return Err(format!("V*(H={h}, alpha={alpha}) = {}", vi.value));
            }
            let pv = policy_value(env.mdp(), &vi.policy).map_err(|e| e.to_string())?;
            if (pv - vi.value).abs() > 1e-10 {
                return Err(format!("policy_value {pv} != value_iteration {}", vi.value));
            }
        }
    }
    Ok("V* = 0.5 for alpha in {0, 0.2, 0.5}, H in {5, 10, 20}".into())
}

fn lock_statistics() -> Result<String, String> {
    let alpha = 0.2;
    let env = LockEnv::new(
        LockSpec::bernoulli(5, alpha, 0).with_relabel_mode(RelabelMode::Identity),
    )
    .map_err(|e| e.to_string())?;
    let mut rng = seed_rng(12);
    let draws = 100_000;
    let mut worst = 1.0f64;
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
                worst = worst.min(t.p_value);
                if t.p_value <= 0.01 {
                    return Err(format!(
                        "cell ({h},{s},{a}) failed: p = {}, counts {counts:?}",
                        t.p_value
                    ));
                }
            }
        }
    }
    Ok(format!("all (h<=3, s, a) cells at n = {draws}; worst p = {worst:.4}"))
}

fn oracle_objectives() -> Result<String, String> {
    let mut rng = seed_rng(5);
    let cfg = UloConfig::new(UloMethod::KMeans, vec![]);
    let data = vec![vec![0.0], vec![10.0]];
    let km = kmeans_fit(&data, 2, &cfg, &mut rng).map_err(|e| e.to_string())?;
    if km.wcss != 0.0 {
        return Err(format!("separable pair wcss = {}", km.wcss));
    }
    if km.wcss_history.windows(2).any(|w| w[1] > w[0] + 1e-9) {
        return Err("k-means objective increased".into());
    }

    let env = LockEnv::new(LockSpec::gaussian(4, 0.0, 0.1, 9)).map_err(|e| e.to_string())?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for s in 0..3 {
        for _ in 0..200 {
            data.push(env.emit(2, s, &mut rng));
            labels.push(s);
        }
    }
    let gm = gmm_fit(&data, 3, &cfg, &mut rng).map_err(|e| e.to_string())?;
    if gm.loglik_history.windows(2).any(|w| w[1] < w[0] - 1e-8) {
        return Err("EM log-likelihood decreased".into());
    }
    let per_level = vec![data.clone()];
    let ulo = UloConfig::new(UloMethod::KMeans, vec![3]);
    let dec = fit_ulo(&per_level, &ulo, &mut rng).map_err(|e| e.to_string())?;
    let pred: Vec<usize> = data.iter().map(|x| dec[0].predict(x)).collect();
    let (acc, _) = best_permutation_accuracy(&pred, &labels, 3);
    if acc < 0.99 {
        return Err(format!("decoder purity {acc}"));
    }
    Ok(format!("objectives monotone; balanced-sample purity {acc:.4}"))
}

fn label_repair() -> Result<String, String> {
    let mut rng = seed_rng(31);
    for case in 0..100 {
        let classes = 3;
        let centers: Vec<Vec<f64>> = (0..classes).map(|i| vec![i as f64]).collect();
        let mut dec = crate::ulo::Decoder::nearest_centroid(0, centers, None);
        dec.permute_labels(&Permutation::random(classes, &mut rng));
        let mut bank = LabelBank::new(1);
        for s in 0..classes {
            bank.insert(0, s, vec![vec![s as f64]; 10]);
        }
        let truth: Vec<usize> = (0..30).map(|i| i % classes).collect();
        let obs: Vec<Vec<f64>> = truth.iter().map(|&s| vec![s as f64]).collect();
        let before: Vec<usize> = obs.iter().map(|x| dec.predict(x)).collect();
        let (acc_before, _) = best_permutation_accuracy(&before, &truth, classes);

        let mut decs = vec![dec];
        fix_label(&mut decs, &bank);
        let once = decs.clone();
        fix_label(&mut decs, &bank);
        if decs != once {
            return Err(format!("case {case}: repair not idempotent"));
        }
        let after: Vec<usize> = obs.iter().map(|x| decs[0].predict(x)).collect();
        let (acc_after, _) = best_permutation_accuracy(&after, &truth, classes);
        if acc_before != acc_after {
            return Err(format!("case {case}: accuracy changed {acc_before} -> {acc_after}"));
        }
        if after != truth {
            return Err(format!("case {case}: aligned decoder disagrees with truth"));
        }
    }
    Ok("100 randomized repair cases: idempotent, accuracy-preserving, aligned".into())
}

fn tsr_accounting() -> Result<String, String> {
    let env = Instrumented::new(
        LockEnv::new(LockSpec::bernoulli(3, 0.0, 7)).map_err(|e| e.to_string())?,
    );
    let clusters = vec![1usize, 3, 3, 3];
    let ulo_cfg = UloConfig::new(UloMethod::KMeans, clusters.clone());
    let mut params = UrlParams::new(4, 1);
    params.mode = UrlMode::Theoretical;
    let mut mem = TsrMemory::new(&env, &clusters, 0, 7);
    let pi = TabularPolicy::constant(&env.states_per_level()[..3], 0);
    let mut rng = seed_rng(3);
    tsr(&env, &ulo_cfg, &pi, 1, &params, &mut mem, &mut rng).map_err(|e| e.to_string())?;
    let j = params.tsr_iters(3, 3) as u64;
    let expected: u64 = (1..=j).map(|i| i * 4 + 4).sum::<u64>() + 1;
    if env.episodes() != expected {
        return Err(format!("consumed {} trajectories, formula {expected}", env.episodes()));
    }
    Ok(format!("theoretical call consumed exactly {expected} trajectories"))
}

fn determinism() -> Result<String, String> {
    let text = "algorithm = url\nH = 3\nbudget = 300\nreplicates = 2\neval_every = 150\n\
                eval_episodes = 40\ntiming = off\nbatch = 5\nstability_holdout = 20\n";
    let cfg = ExperimentConfig::parse(text, &[]).map_err(|e| e.to_string())?;
    let a = emit_csv(&run_experiment(&cfg).map_err(|e| e.to_string())?);
    let b = emit_csv(&run_experiment(&cfg).map_err(|e| e.to_string())?);
    if a != b {
        return Err("repeated run produced different CSV bytes".into());
    }
    Ok(format!("two url runs produced identical CSV ({} bytes)", a.len()))
}
