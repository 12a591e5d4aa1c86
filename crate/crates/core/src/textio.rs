//! Plain-text tabular formats for golden files and checkpoints.
//!
//! All floats are written with Rust's shortest round-trip formatting, so
//! `parse(write(x))` recovers `x` bit-exactly. Lines starting with `#`
//! are comments. Levels are 0-based.
//!
//! Latent MDP (`mdp v1`):
//! ```text
//! # anything
//! H A s_0 s_1 ... s_H          header: horizon, actions, level sizes
//! h s a p_0 ... p_{k-1} r      one line per (h, s, a)
//! ```
//!
//! Decoder (`decoder v1`): a `decoder` header line, `level`/`classes`/
//! `perm` lines, then a `kind` section. Matrices are row-major, one row
//! per line prefixed with `row`.
//!
//! Q-table (`qtable v1`):
//! ```text
//! qtable H A s_0 ... s_{H-1}
//! h s a q n
//! ```

use crate::error::{Error, Result};
use crate::latent::{LatentMdp, RewardNoise};
use crate::perm::Permutation;
use crate::ulo::{Decoder, DecoderKind, PcaProjection};
use std::fmt::Write as _;

fn floats(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_f64(tok: &str, what: &'static str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::format(what, format!("bad float {tok:?}")))
}

fn parse_usize(tok: &str, what: &'static str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::format(what, format!("bad integer {tok:?}")))
}

fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn mdp_to_text(mdp: &LatentMdp) -> String {
    let mut out = String::new();
    let sizes = mdp
        .states_per_level()
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "{} {} {}", mdp.horizon(), mdp.num_actions(), sizes);
    for h in 0..mdp.horizon() {
        for s in 0..mdp.states_at(h) {
            for a in 0..mdp.num_actions() {
                let _ = writeln!(
                    out,
                    "{h} {s} {a} {} {}",
                    floats(mdp.probs(h, s, a)),
                    mdp.reward_mean(h, s, a)
                );
            }
        }
    }
    out
}

/// Parses the `mdp v1` format. The reward-noise flag is not part of the
/// file; pass the intended mode.
pub fn mdp_from_text(text: &str, noise: RewardNoise) -> Result<LatentMdp> {
    const WHAT: &str = "mdp text";
    let mut lines = content_lines(text);
    let header = lines.next().ok_or_else(|| Error::format(WHAT, "empty file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() < 3 {
        return Err(Error::format(WHAT, "short header"));
    }
    let horizon = parse_usize(toks[0], WHAT)?;
    let actions = parse_usize(toks[1], WHAT)?;
    let sizes: Vec<usize> = toks[2..]
        .iter()
        .map(|t| parse_usize(t, WHAT))
        .collect::<Result<_>>()?;
    if sizes.len() != horizon + 1 {
        return Err(Error::format(
            WHAT,
            format!("{} level sizes for horizon {horizon}", sizes.len()),
        ));
    }
    let mut transition: Vec<Vec<Vec<Option<Vec<f64>>>>> = (0..horizon)
        .map(|h| vec![vec![None; actions]; sizes[h]])
        .collect();
    let mut rewards: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|h| vec![vec![0.0; actions]; sizes[h]])
        .collect();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 4 {
            return Err(Error::format(WHAT, format!("short line {line:?}")));
        }
        let h = parse_usize(toks[0], WHAT)?;
        let s = parse_usize(toks[1], WHAT)?;
        let a = parse_usize(toks[2], WHAT)?;
        if h >= horizon || s >= sizes[h] || a >= actions {
            return Err(Error::format(WHAT, format!("indices out of range: {line:?}")));
        }
        let want = sizes[h + 1];
        if toks.len() != 3 + want + 1 {
            return Err(Error::format(
                WHAT,
                format!("expected {} probabilities plus reward: {line:?}", want),
            ));
        }
        let probs: Vec<f64> = toks[3..3 + want]
            .iter()
            .map(|t| parse_f64(t, WHAT))
            .collect::<Result<_>>()?;
        if transition[h][s][a].replace(probs).is_some() {
            return Err(Error::format(WHAT, format!("duplicate entry ({h},{s},{a})")));
        }
        rewards[h][s][a] = parse_f64(toks[3 + want], WHAT)?;
    }
    let transition: Vec<Vec<Vec<Vec<f64>>>> = transition
        .into_iter()
        .enumerate()
        .map(|(h, level)| {
            level
                .into_iter()
                .enumerate()
                .map(|(s, row)| {
                    row.into_iter()
                        .enumerate()
                        .map(|(a, cell)| {
                            cell.ok_or_else(|| {
                                Error::format(WHAT, format!("missing entry ({h},{s},{a})"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    LatentMdp::new(sizes, actions, transition, rewards, noise)
}

fn write_matrix(out: &mut String, name: &str, m: &[Vec<f64>]) {
    let cols = m.first().map(Vec::len).unwrap_or(0);
    let _ = writeln!(out, "{name} {} {}", m.len(), cols);
    for row in m {
        let _ = writeln!(out, "row {}", floats(row));
    }
}

fn write_kind(out: &mut String, kind: &DecoderKind) {
    match kind {
        DecoderKind::NearestCentroid { centers, pca } => {
            let _ = writeln!(out, "kind nearest-centroid");
            match pca {
                Some(p) => {
                    let _ = writeln!(out, "pca {} {}", p.output_dim(), p.input_dim());
                    let _ = writeln!(out, "mean {}", floats(&p.mean));
                    let _ = writeln!(out, "eigenvalues {}", floats(&p.eigenvalues));
                    for row in &p.components {
                        let _ = writeln!(out, "row {}", floats(row));
                    }
                }
                None => {
                    let _ = writeln!(out, "pca none");
                }
            }
            write_matrix(out, "centers", centers);
        }
        DecoderKind::GmmMap {
            weights,
            means,
            variances,
        } => {
            let _ = writeln!(out, "kind gmm-map");
            let _ = writeln!(out, "weights {}", floats(weights));
            write_matrix(out, "means", means);
            write_matrix(out, "variances", variances);
        }
        DecoderKind::Pooled {
            model,
            level_feature,
            cluster_to_local,
        } => {
            let _ = writeln!(out, "kind pooled");
            let _ = writeln!(out, "level-feature {level_feature}");
            let map = cluster_to_local
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "map {map}");
            write_kind(out, model);
        }
    }
}

pub fn decoder_to_text(dec: &Decoder) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "decoder v1");
    let _ = writeln!(out, "level {}", dec.level());
    let _ = writeln!(out, "classes {}", dec.classes());
    let perm = dec
        .label_permutation()
        .as_slice()
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "perm {perm}");
    write_kind(&mut out, dec.kind());
    out
}

struct LineReader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self, what: &'static str) -> Result<&'a str> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| Error::format(what, "unexpected end of file"))?;
        self.pos += 1;
        Ok(line)
    }

    fn expect_prefix(&mut self, prefix: &str, what: &'static str) -> Result<Vec<&'a str>> {
        let line = self.next(what)?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some(head) if head == prefix => Ok(toks.collect()),
            _ => Err(Error::format(what, format!("expected {prefix:?}, got {line:?}"))),
        }
    }
}

fn read_matrix(r: &mut LineReader, name: &str, what: &'static str) -> Result<Vec<Vec<f64>>> {
    let head = r.expect_prefix(name, what)?;
    if head.len() != 2 {
        return Err(Error::format(what, format!("bad {name} header")));
    }
    let rows = parse_usize(head[0], what)?;
    let cols = parse_usize(head[1], what)?;
    let mut m = Vec::with_capacity(rows);
    for _ in 0..rows {
        let toks = r.expect_prefix("row", what)?;
        if toks.len() != cols {
            return Err(Error::format(what, "row width mismatch"));
        }
        m.push(toks.iter().map(|t| parse_f64(t, what)).collect::<Result<_>>()?);
    }
    Ok(m)
}

fn read_kind(r: &mut LineReader, what: &'static str) -> Result<DecoderKind> {
    let kind = r.expect_prefix("kind", what)?;
    match kind.first().copied() {
        Some("nearest-centroid") => {
            let pca_line = r.expect_prefix("pca", what)?;
            let pca = match pca_line.first().copied() {
                Some("none") => None,
                Some(out_dim) => {
                    let out_dim = parse_usize(out_dim, what)?;
                    let in_dim = parse_usize(
                        pca_line
                            .get(1)
                            .ok_or_else(|| Error::format(what, "pca header missing input dim"))?,
                        what,
                    )?;
                    let mean = r
                        .expect_prefix("mean", what)?
                        .iter()
                        .map(|t| parse_f64(t, what))
                        .collect::<Result<Vec<_>>>()?;
                    let eigenvalues = r
                        .expect_prefix("eigenvalues", what)?
                        .iter()
                        .map(|t| parse_f64(t, what))
                        .collect::<Result<Vec<_>>>()?;
                    if mean.len() != in_dim {
                        return Err(Error::format(what, "pca mean width mismatch"));
                    }
                    let mut components = Vec::with_capacity(out_dim);
                    for _ in 0..out_dim {
                        let toks = r.expect_prefix("row", what)?;
                        if toks.len() != in_dim {
                            return Err(Error::format(what, "pca row width mismatch"));
                        }
                        components
                            .push(toks.iter().map(|t| parse_f64(t, what)).collect::<Result<_>>()?);
                    }
                    Some(PcaProjection {
                        mean,
                        components,
                        eigenvalues,
                    })
                }
                None => return Err(Error::format(what, "empty pca line")),
            };
            let centers = read_matrix(r, "centers", what)?;
            Ok(DecoderKind::NearestCentroid { centers, pca })
        }
        Some("gmm-map") => {
            let weights = r
                .expect_prefix("weights", what)?
                .iter()
                .map(|t| parse_f64(t, what))
                .collect::<Result<Vec<_>>>()?;
            let means = read_matrix(r, "means", what)?;
            let variances = read_matrix(r, "variances", what)?;
            if means.len() != weights.len() || variances.len() != weights.len() {
                return Err(Error::format(what, "component count mismatch"));
            }
            Ok(DecoderKind::GmmMap {
                weights,
                means,
                variances,
            })
        }
        Some("pooled") => {
            let lf = r.expect_prefix("level-feature", what)?;
            let level_feature = parse_f64(
                lf.first()
                    .ok_or_else(|| Error::format(what, "missing level feature"))?,
                what,
            )?;
            let cluster_to_local = r
                .expect_prefix("map", what)?
                .iter()
                .map(|t| parse_usize(t, what))
                .collect::<Result<Vec<_>>>()?;
            let model = read_kind(r, what)?;
            Ok(DecoderKind::Pooled {
                model: Box::new(model),
                level_feature,
                cluster_to_local,
            })
        }
        other => Err(Error::format(what, format!("unknown kind {other:?}"))),
    }
}

pub fn decoder_from_text(text: &str) -> Result<Decoder> {
    const WHAT: &str = "decoder text";
    let mut r = LineReader {
        lines: content_lines(text).collect(),
        pos: 0,
    };
    let header = r.next(WHAT)?;
    if header != "decoder v1" {
        return Err(Error::format(WHAT, format!("bad header {header:?}")));
    }
    let level = parse_usize(
        r.expect_prefix("level", WHAT)?
            .first()
            .ok_or_else(|| Error::format(WHAT, "missing level"))?,
        WHAT,
    )?;
    let classes = parse_usize(
        r.expect_prefix("classes", WHAT)?
            .first()
            .ok_or_else(|| Error::format(WHAT, "missing classes"))?,
        WHAT,
    )?;
    let perm_vec = r
        .expect_prefix("perm", WHAT)?
        .iter()
        .map(|t| parse_usize(t, WHAT))
        .collect::<Result<Vec<_>>>()?;
    let perm = Permutation::from_vec(perm_vec)?;
    let kind = read_kind(&mut r, WHAT)?;
    Decoder::from_parts(level, classes, kind, perm)
}

/// Q-table dump: one `h s a q n` line per cell.
pub fn qtable_to_text(q: &[Vec<Vec<f64>>], counts: &[Vec<Vec<u64>>]) -> String {
    let mut out = String::new();
    let horizon = q.len();
    let actions = q
        .first()
        .and_then(|l| l.first())
        .map(Vec::len)
        .unwrap_or(0);
    let sizes = q
        .iter()
        .map(|l| l.len().to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "qtable {horizon} {actions} {sizes}");
    for (h, level) in q.iter().enumerate() {
        for (s, row) in level.iter().enumerate() {
            for (a, &val) in row.iter().enumerate() {
                let _ = writeln!(out, "{h} {s} {a} {val} {}", counts[h][s][a]);
            }
        }
    }
    out
}
