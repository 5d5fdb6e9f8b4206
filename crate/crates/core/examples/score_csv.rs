//! Scores a CSV file with default settings and prints a summary.
//!
//! `cargo run --release --example score_csv -- data.csv [auto|edgeworth|exact]`

use sono::{analyze, Config, Dataset, IngestOptions, NuMethod, ProbabilityModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().ok_or("usage: score_csv <file.csv> [method]")?;
    let nu_method = match args.next().as_deref() {
        None => NuMethod::default(),
        Some("auto") => NuMethod::Auto,
        Some("edgeworth") => NuMethod::Edgeworth,
        Some("exact") => NuMethod::Exact,
        Some(other) => return Err(format!("unknown method {other}").into()),
    };
    let ds = Dataset::from_path(&path, &IngestOptions::default())?;
    let model = ProbabilityModel::empirical(&ds);
    let start = std::time::Instant::now();
    let run = analyze(&ds, &model, &Config { nu_method, ..Config::default() })?;
    let zeros = run.report.scores.iter().filter(|&&s| s == 0.0).count();
    println!("n = {}, p = {}, maxlen = {}", ds.n(), ds.p(), run.maxlen);
    println!("zero scores: {zeros}, flagged itemsets: {}", run.flags.records.len());
    let mut top: Vec<_> = run.report.scores.iter().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(a.1));
    for (i, s) in top.iter().take(5) {
        println!("row {i}: score {s:.4}, depth {:.3}", run.report.depths[*i]);
    }
    println!("elapsed {:?}", start.elapsed());
    Ok(())
}
