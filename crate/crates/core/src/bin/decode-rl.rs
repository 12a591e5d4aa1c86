//! Command-line harness.
//!
//! ```text
//! decode-rl run <config.txt> [key=value ...]
//! decode-rl sweep <grid.txt> [key=value ...]
//! decode-rl plot <records.csv> [title]
//! decode-rl selfcheck
//! ```
//!
//! Output files land in `$DECODE_RL_OUT` (default: current directory).
//! Exit code 0 on success, 1 on contract violations or failed checks,
//! 2 on usage errors.

use decode_rl::error::Error;
use decode_rl::harness::selfcheck::run_selfcheck;
use decode_rl::harness::{
    bands, emit_bands, emit_csv, expand_grid, parse_csv, run_experiment, ExperimentConfig,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("sweep") => cmd_sweep(&args[1..]),
        Some("plot") => cmd_plot(&args[1..]),
        Some("selfcheck") => cmd_selfcheck(),
        _ => {
            eprint!("{USAGE}");
            Ok(2)
        }
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

const USAGE: &str = "usage:\n  decode-rl run <config.txt> [key=value ...]\n  \
decode-rl sweep <grid.txt> [key=value ...]\n  decode-rl plot <records.csv> [title]\n  \
decode-rl selfcheck\n";

fn out_dir() -> PathBuf {
    std::env::var_os("DECODE_RL_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn read(path: &str) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, content: &str) -> Result<(), Error> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn overrides(args: &[String]) -> Result<Vec<(String, String)>, Error> {
    args.iter()
        .map(|a| {
            a.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("expected key=value override, got {a:?}")))
        })
        .collect()
}

fn stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "records".into())
}

fn summarize(records: &[decode_rl::harness::LearningCurveRecord]) -> String {
    match bands(records) {
        Ok(b) => match b.last() {
            Some(last) => format!(
                "final mean reward {:.4} +- {:.4} at {:.0} trajectories",
                last.mean, last.std, last.trajectories
            ),
            None => "no evaluation points".into(),
        },
        Err(_) => "ragged record set".into(),
    }
}

fn cmd_run(args: &[String]) -> Result<u8, Error> {
    let Some(cfg_path) = args.first() else {
        eprint!("{USAGE}");
        return Ok(2);
    };
    let cfg = ExperimentConfig::parse(&read(cfg_path)?, &overrides(&args[1..])?)?;
    let records = run_experiment(&cfg)?;
    let out = out_dir().join(format!("{}-records.csv", stem(cfg_path)));
    write(&out, &emit_csv(&records))?;
    println!(
        "{}: {} replicates, {} records -> {}",
        cfg.algorithm.name(),
        cfg.replicates,
        records.len(),
        out.display()
    );
    println!("{}", summarize(&records));
    Ok(0)
}

fn cmd_sweep(args: &[String]) -> Result<u8, Error> {
    let Some(grid_path) = args.first() else {
        eprint!("{USAGE}");
        return Ok(2);
    };
    let over = overrides(&args[1..])?;
    let combos = expand_grid(&read(grid_path)?)?;
    println!("sweep of {} configurations", combos.len());
    for (name, mut cfg) in combos {
        for (k, v) in &over {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        let records = run_experiment(&cfg)?;
        let out = out_dir().join(format!("{name}-records.csv"));
        write(&out, &emit_csv(&records))?;
        println!("{name}: {} ({})", summarize(&records), out.display());
    }
    Ok(0)
}

fn cmd_plot(args: &[String]) -> Result<u8, Error> {
    let Some(csv_path) = args.first() else {
        eprint!("{USAGE}");
        return Ok(2);
    };
    let records = parse_csv(&read(csv_path)?)?;
    let points = bands(&records)?;
    let title = args.get(1).cloned().unwrap_or_else(|| stem(csv_path));
    let base = out_dir().join(stem(csv_path));
    let bands_path = base.with_file_name(format!("{}-bands.txt", stem(csv_path)));
    let svg_path = base.with_file_name(format!("{}-curve.svg", stem(csv_path)));
    write(&bands_path, &emit_bands(&points))?;
    write(&svg_path, &decode_rl::harness::emit_svg(&points, &title))?;
    println!("{} points -> {} and {}", points.len(), bands_path.display(), svg_path.display());
    Ok(0)
}

fn cmd_selfcheck() -> Result<u8, Error> {
    let results = run_selfcheck();
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "pass" } else { "FAIL" };
        println!("[{status}] {}: {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} of {} suites failed", results.len());
        return Ok(1);
    }
    println!("all {} suites passed", results.len());
    Ok(0)
}
