//! Subcommand implementations behind the `cyleig` binary.

use std::fs;
use std::path::Path;

use crate::config::{RunConfig, ENV_OUTPUT, ENV_PARALLELISM};
use crate::error::{Error, Result};
use crate::experiments::{ExperimentOutput, Lab};
use crate::output::{summary_text, write_records, write_summary};
use crate::plot::{plot_file, PlotSpec};

/// Every assertion passed.
pub const EXIT_PASS: i32 = 0;
/// Configuration, input or I/O error.
pub const EXIT_ERROR: i32 = 1;
/// At least one assertion failed.
pub const EXIT_FAIL: i32 = 2;

pub fn lab_for(cfg: &RunConfig) -> Lab {
    Lab::new(cfg.omega.clone(), cfg.mesh, cfg.tol.clone(), cfg.seed, cfg.parallelism)
}

pub fn run_experiment(lab: &Lab, cfg: &RunConfig, name: &str) -> Result<ExperimentOutput> {
    let f = &cfg.field;
    let s = &cfg.schedules;
    Ok(match name {
        "cross_section" => lab.exp_cross_section(f, &s.cross_section),
        "bounds" => lab.exp_bounds(f, &s.bounds),
        "limit_zero" => lab.exp_limit_zero(f, &s.limit_zero),
        "nu_half" => lab.exp_nu_half(f, &s.nu_half),
        "limit_infinity" => lab.exp_limit_infinity(f, &s.limit_infinity),
        "gap" => lab.exp_gap(f, &s.gap),
        "second" => lab.exp_second(f, &s.second),
        "dirichlet" => lab.exp_dirichlet(f, &s.dirichlet),
        "multi" => lab.exp_multi(f, &s.multi),
        "decay" => lab.exp_decay(f, s.decay),
        "picone" => lab.exp_picone(f, s.picone, s.picone_samples, &s.picone_widths),
        "end_profile" => lab.exp_end_profile(f, &s.end_profile, s.end_profile_r, s.end_profile_half_length),
        "test_functions" => lab.exp_test_functions(f, &s.test_functions),
        other => return Err(Error::Config(format!("unknown experiment '{other}'"))),
    })
}

/// Runs every selected experiment and writes `<name>.csv` files and `summary.txt`.
pub fn run_config(cfg: &RunConfig) -> Result<Vec<ExperimentOutput>> {
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let lab = lab_for(cfg);
    let mut outputs = Vec::new();
    for name in &cfg.experiments {
        let out = run_experiment(&lab, cfg, name)?;
        write_records(&cfg.output.join(format!("{name}.csv")), &out.records)?;
        outputs.push(out);
    }
    write_summary(&cfg.output.join("summary.txt"), &outputs)?;
    Ok(outputs)
}

/// `run <config>`; returns the process exit code.
pub fn run(config_path: &Path) -> i32 {
    let result = RunConfig::from_file(config_path).and_then(|mut cfg| {
        cfg.apply_env(std::env::var(ENV_OUTPUT).ok(), std::env::var(ENV_PARALLELISM).ok())?;
        run_config(&cfg).map(|o| (cfg, o))
    });
    match result {
        Ok((cfg, outputs)) => {
            print!("{}", summary_text(&outputs));
            println!("output: {}", cfg.output.display());
            if outputs.iter().all(ExperimentOutput::passed) {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// `plot <csv> --x .. --y .. --out ..`; returns the process exit code.
pub fn plot(csv: &Path, spec: &PlotSpec, out: &Path) -> i32 {
    match plot_file(csv, spec, out) {
        Ok(()) => EXIT_PASS,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Text report over the CSVs of an output directory, and whether every row passed.
pub fn report_text(dir: &Path) -> Result<(String, bool)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |x| x == "csv"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::EmptyData(format!("no CSV files in {}", dir.display())));
    }
    let mut text = String::new();
    let mut all_pass = true;
    for path in entries {
        let mut rdr = csv::Reader::from_path(&path)?;
        let header = rdr.headers()?.clone();
        let col = |n: &str| header.iter().position(|h| h == n).ok_or_else(|| Error::MissingColumn(format!("{n} in {}", path.display())));
        let (pass_i, checks_i, ell_i) = (col("pass")?, col("checks")?, col("ell")?);
        let (mut rows, mut failing) = (0, Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            rows += 1;
            if rec.get(pass_i) != Some("true") {
                let failed: Vec<&str> = rec.get(checks_i).unwrap_or("").split(';').filter(|c| c.ends_with("=fail")).collect();
                failing.push(format!("    row {i} ell={}: {}", rec.get(ell_i).unwrap_or(""), failed.join(", ")));
            }
        }
        all_pass &= failing.is_empty();
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        text.push_str(&format!("{name:<16} {:<5} rows {rows:>3}  failing {:>3}\n", if failing.is_empty() { "PASS" } else { "FAIL" }, failing.len()));
        for f in failing {
            text.push_str(&f);
            text.push('\n');
        }
    }
    if let Ok(summary) = fs::read_to_string(dir.join("summary.txt")) {
        text.push_str("\nsummary.txt:\n");
        text.push_str(&summary);
    }
    Ok((text, all_pass))
}

/// `report <dir>`; returns the process exit code.
pub fn report(dir: &Path) -> i32 {
    match report_text(dir) {
        Ok((text, pass)) => {
            print!("{text}");
            if pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
