//! Learning-curve records, their CSV form, and aggregation into
//! mean ± one-standard-deviation bands with an SVG rendering.

use crate::error::{Error, Result};
use crate::stats::mean_std_population;
use std::fmt::Write as _;

pub const CSV_HEADER: &str = "replicate,trajectories,mean_reward,seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurveRecord {
    pub replicate: usize,
    /// Training trajectories consumed at evaluation time, from the
    /// instrumented episode counter.
    pub trajectories: u64,
    pub mean_reward: f64,
    pub seconds: f64,
}

pub fn emit_csv(records: &[LearningCurveRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 32 + 40);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.replicate, r.trajectories, r.mean_reward, r.seconds
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<LearningCurveRecord>> {
    const WHAT: &str = "records csv";
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::format(WHAT, format!("bad header {other:?}"))),
    }
    lines
        .map(|line| {
            let cols: Vec<&str> = line.trim().split(',').collect();
            if cols.len() != 4 {
                return Err(Error::format(WHAT, format!("expected 4 columns: {line:?}")));
            }
            Ok(LearningCurveRecord {
                replicate: cols[0]
                    .parse()
                    .map_err(|_| Error::format(WHAT, format!("bad replicate {line:?}")))?,
                trajectories: cols[1]
                    .parse()
                    .map_err(|_| Error::format(WHAT, format!("bad trajectories {line:?}")))?,
                mean_reward: cols[2]
                    .parse()
                    .map_err(|_| Error::format(WHAT, format!("bad reward {line:?}")))?,
                seconds: cols[3]
                    .parse()
                    .map_err(|_| Error::format(WHAT, format!("bad seconds {line:?}")))?,
            })
        })
        .collect()
}

/// One aggregated evaluation point across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPoint {
    /// Mean trajectories consumed across replicates at this point.
    pub trajectories: f64,
    pub mean: f64,
    /// Population standard deviation across replicates.
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Groups records by replicate (order of first appearance) and folds the
/// i-th evaluation of every replicate into one band point. Replicates
/// must have equal record counts.
pub fn bands(records: &[LearningCurveRecord]) -> Result<Vec<BandPoint>> {
    if records.is_empty() {
        return Err(Error::format("records csv", "no records to aggregate"));
    }
    let mut replicate_ids: Vec<usize> = Vec::new();
    let mut groups: Vec<Vec<&LearningCurveRecord>> = Vec::new();
    for r in records {
        match replicate_ids.iter().position(|&id| id == r.replicate) {
            Some(i) => groups[i].push(r),
            None => {
                replicate_ids.push(r.replicate);
                groups.push(vec![r]);
            }
        }
    }
    let len = groups[0].len();
    if groups.iter().any(|g| g.len() != len) {
        return Err(Error::format(
            "records csv",
            "replicates have differing evaluation counts",
        ));
    }
    Ok((0..len)
        .map(|i| {
            let rewards: Vec<f64> = groups.iter().map(|g| g[i].mean_reward).collect();
            let trajs: Vec<f64> = groups.iter().map(|g| g[i].trajectories as f64).collect();
            let (mean, std) = mean_std_population(&rewards);
            let (tmean, _) = mean_std_population(&trajs);
            BandPoint {
                trajectories: tmean,
                mean,
                std,
                lo: mean - std,
                hi: mean + std,
            }
        })
        .collect())
}

pub fn emit_bands(points: &[BandPoint]) -> String {
    let mut out = String::from("trajectories,mean,std,lo,hi\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{},{}", p.trajectories, p.mean, p.std, p.lo, p.hi);
    }
    out
}

/// Standalone SVG: mean line over a shaded one-standard-deviation band.
pub fn emit_svg(points: &[BandPoint], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const ML: f64 = 60.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;

    let xmax = points
        .iter()
        .map(|p| p.trajectories)
        .fold(1.0f64, f64::max);
    let ymax = points.iter().map(|p| p.hi).fold(0.5f64, f64::max) * 1.05;
    let sx = |x: f64| ML + (W - ML - MR) * (x / xmax);
    let sy = |y: f64| H - MB - (H - MT - MB) * (y / ymax).clamp(0.0, 1.0);

    let mut band = String::new();
    for p in points {
        let _ = write!(band, "{:.2},{:.2} ", sx(p.trajectories), sy(p.hi));
    }
    for p in points.iter().rev() {
        let _ = write!(band, "{:.2},{:.2} ", sx(p.trajectories), sy(p.lo));
    }
    let mut line = String::new();
    for p in points {
        let _ = write!(line, "{:.2},{:.2} ", sx(p.trajectories), sy(p.mean));
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        svg,
        r##"<polygon points="{band}" fill="#4477aa" fill-opacity="0.25" stroke="none"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<polyline points="{line}" fill="none" stroke="#224466" stroke-width="2"/>"##
    );
    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{:.0}" stroke="black"/>"#,
        H - MB
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{ML}" y1="{:.0}" x2="{:.0}" y2="{:.0}" stroke="black"/>"#,
        H - MB,
        W - MR,
        H - MB
    );
    let _ = writeln!(
        svg,
        r#"<text x="{ML}" y="{:.0}" font-family="sans-serif" font-size="12" text-anchor="middle">0</text>"#,
        H - MB + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12" text-anchor="middle">{xmax:.0}</text>"#,
        W - MR,
        H - MB + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12" text-anchor="end">{ymax:.2}</text>"#,
        ML - 6.0,
        MT + 4.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12" text-anchor="end">0</text>"#,
        ML - 6.0,
        H - MB
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="13" text-anchor="middle">training trajectories</text>"#,
        (ML + W - MR) / 2.0,
        H - 12.0
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use rand::Rng as _;

    #[test]
    fn csv_round_trip_recovers_records() {
        let mut rng = seed_rng(2);
        let records: Vec<LearningCurveRecord> = (0..3)
            .flat_map(|rep| {
                let mut rng2 = seed_rng(rep as u64);
                (0..4)
                    .map(move |i| LearningCurveRecord {
                        replicate: rep,
                        trajectories: (i + 1) * 500,
                        mean_reward: rng2.random::<f64>(),
                        seconds: rng2.random::<f64>() * 100.0,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let _ = &mut rng;
        let text = emit_csv(&records);
        assert!(text.starts_with(CSV_HEADER));
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn csv_row_count_matches() {
        let records: Vec<LearningCurveRecord> = (0..2)
            .flat_map(|rep| {
                (0..3).map(move |i| LearningCurveRecord {
                    replicate: rep,
                    trajectories: i,
                    mean_reward: 0.0,
                    seconds: 0.0,
                })
            })
            .collect();
        let text = emit_csv(&records);
        assert_eq!(text.lines().count(), 7); // header + 6 rows
    }

    #[test]
    fn identical_replicates_have_zero_band() {
        let records: Vec<LearningCurveRecord> = (0..4)
            .flat_map(|rep| {
                (1..=3).map(move |i| LearningCurveRecord {
                    replicate: rep,
                    trajectories: i * 100,
                    mean_reward: 0.25 * i as f64,
                    seconds: 0.0,
                })
            })
            .collect();
        let b = bands(&records).unwrap();
        assert_eq!(b.len(), 3);
        for p in &b {
            assert_eq!(p.std, 0.0);
            assert_eq!(p.lo, p.hi);
        }
    }

    #[test]
    fn band_values_match_two_pass_oracle() {
        let mut rng = seed_rng(7);
        let reps = 6usize;
        let points = 5usize;
        let mut records = Vec::new();
        for rep in 0..reps {
            for i in 0..points {
                records.push(LearningCurveRecord {
                    replicate: rep,
                    trajectories: (i as u64 + 1) * 250,
                    mean_reward: rng.random::<f64>(),
                    seconds: 0.0,
                });
            }
        }
        let b = bands(&records).unwrap();
        for (i, point) in b.iter().enumerate() {
            // independent two-pass recomputation
            let vals: Vec<f64> = (0..reps)
                .map(|rep| records[rep * points + i].mean_reward)
                .collect();
            let mean = vals.iter().sum::<f64>() / reps as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / reps as f64;
            let std = var.sqrt();
            assert!((point.mean - mean).abs() < 1e-12);
            assert!((point.std - std).abs() < 1e-12);
            assert!((point.lo - (mean - std)).abs() < 1e-12);
            assert!((point.hi - (mean + std)).abs() < 1e-12);
        }
    }

    #[test]
    fn bands_reject_ragged_replicates() {
        let records = vec![
            LearningCurveRecord {
                replicate: 0,
                trajectories: 1,
                mean_reward: 0.0,
                seconds: 0.0,
            },
            LearningCurveRecord {
                replicate: 0,
                trajectories: 2,
                mean_reward: 0.0,
                seconds: 0.0,
            },
            LearningCurveRecord {
                replicate: 1,
                trajectories: 1,
                mean_reward: 0.0,
                seconds: 0.0,
            },
        ];
        assert!(bands(&records).is_err());
    }

    #[test]
    fn svg_is_wellformed_enough() {
        let b = vec![
            BandPoint {
                trajectories: 100.0,
                mean: 0.2,
                std: 0.05,
                lo: 0.15,
                hi: 0.25,
            },
            BandPoint {
                trajectories: 200.0,
                mean: 0.4,
                std: 0.02,
                lo: 0.38,
                hi: 0.42,
            },
        ];
        let svg = emit_svg(&b, "demo");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("polygon"));
    }
}
