//! Statistics for simulator validation: chi-square goodness-of-fit
//! against a known discrete law, and two-pass moment helpers.

/// Result of a goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct GofTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against expected
/// probabilities. Zero-probability categories must have zero observed
/// count (any mass there makes the test fail with p = 0). With fewer
/// than two positive-probability categories the test is vacuous (p = 1).
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> GofTest {
    assert_eq!(observed.len(), probs.len(), "category count mismatch");
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut stat = 0.0;
    let mut support = 0usize;
    for (&o, &p) in observed.iter().zip(probs.iter()) {
        if p > 0.0 {
            support += 1;
            let e = nf * p;
            let d = o as f64 - e;
            stat += d * d / e;
        } else if o > 0 {
            return GofTest {
                statistic: f64::INFINITY,
                dof: support.saturating_sub(1),
                p_value: 0.0,
            };
        }
    }
    if support < 2 {
        return GofTest {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let dof = support - 1;
    GofTest {
        statistic: stat,
        dof,
        p_value: chi_square_sf(stat, dof as f64),
    }
}

/// Survival function of the chi-square distribution:
/// P(X > x) = Q(df/2, x/2).
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_upper(dof / 2.0, x / 2.0)
}

/// Mean and population standard deviation (divide by n), two-pass.
pub fn mean_std_population(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty(), "empty sample");
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

// Lanczos approximation, g = 7, n = 9.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + 7.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Upper regularized incomplete gamma Q(s, x). Series for x < s + 1,
/// Lentz continued fraction otherwise.
pub fn regularized_gamma_upper(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < s + 1.0 {
        1.0 - lower_series(s, x)
    } else {
        upper_continued_fraction(s, x)
    }
}

fn lower_series(s: f64, x: f64) -> f64 {
    let mut sum = 1.0 / s;
    let mut term = sum;
    let mut a = s;
    for _ in 0..500 {
        a += 1.0;
        term *= x / a;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    (sum.ln() + s * x.ln() - x - ln_gamma(s)).exp()
}

fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (s * x.ln() - x - ln_gamma(s)).exp() * h
}
