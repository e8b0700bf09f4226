//! Measures LCS running time against input size and writes CSV rows
//! `n,matching_pairs,lcs_len,elapsed_ms,algorithm`.

use std::io;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use uprprc_bench::random_tokens;
use uprprc_core::lcs::{dp_oracle, hunt_szymanski, LcsOutcome};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algorithm {
    HuntSzymanski,
    Dp,
    Both,
}

#[derive(Parser)]
#[command(about = "LCS scaling measurements as CSV")]
struct Args {
    /// Input sizes; the alphabet size equals the input size.
    #[arg(long, value_delimiter = ',', default_values_t = [12_500usize, 25_000, 50_000, 100_000, 200_000])]
    sizes: Vec<usize>,
    #[arg(long, value_enum, default_value = "hunt-szymanski")]
    algorithm: Algorithm,
    /// Timed repetitions per size; the median is reported.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; stdout if omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Serialize)]
struct Row {
    n: usize,
    matching_pairs: u64,
    lcs_len: usize,
    elapsed_ms: f64,
    algorithm: &'static str,
}

fn measure(trials: usize, f: impl Fn() -> Option<LcsOutcome>) -> Option<(LcsOutcome, f64)> {
    let mut outcome = f()?;
    let mut times: Vec<f64> = (0..trials.max(1))
        .map(|_| {
            let t = Instant::now();
            outcome = f().expect("deterministic");
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    Some((outcome, times[times.len() / 2]))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let sink: Box<dyn io::Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for &n in &args.sizes {
        let a = random_tokens(n, n as u32, args.seed);
        let b = random_tokens(n, n as u32, args.seed.wrapping_add(1));
        let mut runs: Vec<(&'static str, Option<(LcsOutcome, f64)>)> = Vec::new();
        if matches!(args.algorithm, Algorithm::HuntSzymanski | Algorithm::Both) {
            runs.push(("hunt_szymanski", measure(args.trials, || Some(hunt_szymanski(&a, &b)))));
        }
        if matches!(args.algorithm, Algorithm::Dp | Algorithm::Both) {
            // The oracle refuses inputs beyond its cell cap; those rows are skipped.
            runs.push(("dp", measure(args.trials, || dp_oracle(&a, &b).ok())));
        }
        for (algorithm, run) in runs {
            let Some((outcome, elapsed_ms)) = run else {
                eprintln!("{algorithm}: n={n} too large, skipped");
                continue;
            };
            w.serialize(Row {
                n,
                matching_pairs: outcome.stats.matching_pairs,
                lcs_len: outcome.stats.lcs_len,
                elapsed_ms,
                algorithm,
            })?;
        }
        w.flush()?;
    }
    Ok(())
}
