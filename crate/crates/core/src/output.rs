//! CSV serialization of sweep records and the run summary.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{ExperimentOutput, Slot, SweepRecord};

/// Column names, in order, of every record CSV.
pub const HEADER: [&str; 37] = [
    "experiment",
    "field_kind",
    "field",
    "delta",
    "p",
    "ell",
    "axial_res",
    "cross_res",
    "grading",
    "lambda1",
    "lambda1_residual",
    "lambda2",
    "lambda2_residual",
    "sigma1",
    "sigma1_residual",
    "lambda_half_plus",
    "lambda_half_plus_residual",
    "lambda_half_minus",
    "lambda_half_minus_residual",
    "mu1",
    "mu1_residual",
    "Lambda1",
    "Lambda1_residual",
    "nu_plus",
    "nu_minus",
    "alpha_fit",
    "d_plus",
    "d_minus",
    "symmetry_defect",
    "end_profile_distance",
    "r",
    "mass",
    "grad_mass",
    "measure",
    "value",
    "checks",
    "pass",
];

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn slot(s: Option<Slot>) -> [String; 2] {
    match s {
        Some(s) => [fmt_num(s.value), fmt_num(s.residual)],
        None => [String::new(), String::new()],
    }
}

fn row(r: &SweepRecord) -> Vec<String> {
    let mut out = vec![
        r.experiment.clone(),
        r.field_kind.clone(),
        r.field.clone(),
        opt(r.delta),
        r.p.to_string(),
        opt(r.ell),
        opt(r.axial_res),
        opt(r.cross_res),
        r.grading.map(|g| g.to_string()).unwrap_or_default(),
    ];
    for s in [r.lambda1, r.lambda2, r.sigma1, r.lambda_half_plus, r.lambda_half_minus, r.mu1, r.big_lambda1] {
        out.extend(slot(s));
    }
    for v in [r.nu_plus, r.nu_minus, r.alpha_fit, r.d_plus, r.d_minus, r.symmetry_defect, r.end_profile_distance, r.r, r.mass, r.grad_mass] {
        out.push(opt(v));
    }
    out.push(r.measure.clone());
    out.push(opt(r.value));
    let checks: Vec<String> = r.checks.iter().map(|c| format!("{}={}", c.name, if c.pass { "pass" } else { "fail" })).collect();
    out.push(checks.join(";"));
    out.push(r.passed().to_string());
    out
}

/// Writes records with the fixed header plus a trailing `note` column.
pub fn write_records(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    let mut header: Vec<&str> = HEADER.to_vec();
    header.push("note");
    w.write_record(&header)?;
    for r in records {
        let mut fields = row(r);
        fields.push(r.note.clone());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Human-readable summary; the only place wall times appear.
pub fn summary_text(outputs: &[ExperimentOutput]) -> String {
    let mut s = String::new();
    let total: usize = outputs.iter().map(|o| o.records.len()).sum();
    let failed: usize = outputs.iter().map(|o| o.failing_rows().len()).sum();
    s.push_str(&format!("experiments: {}  rows: {total}  failing rows: {failed}\n", outputs.len()));
    for o in outputs {
        let n_checks: usize = o.records.iter().map(|r| r.checks.len()).sum();
        let n_fail: usize = o.records.iter().flat_map(|r| &r.checks).filter(|c| !c.pass).count();
        s.push_str(&format!(
            "{:<16} {:<5} rows {:>3}  checks {:>3}  failed {:>3}  wall {:.2} s\n",
            o.name,
            if o.passed() { "PASS" } else { "FAIL" },
            o.records.len(),
            n_checks,
            n_fail,
            o.wall_time
        ));
        for (i, r) in o.failing_rows() {
            let names: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            let ell = r.ell.map(|l| format!(" ell={l}")).unwrap_or_default();
            s.push_str(&format!("    row {i}{ell}: {}", names.join(", ")));
            if !r.note.is_empty() {
                s.push_str(&format!(" ({})", r.note));
            }
            s.push('\n');
        }
    }
    s
}

pub fn write_summary(path: &Path, outputs: &[ExperimentOutput]) -> Result<()> {
    fs::write(path, summary_text(outputs)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Check;

    #[test]
    fn numbers_round_trip_and_missing_slots_stay_empty() {
        for v in [std::f64::consts::PI, 1e-300, -2.5e17, 0.1 + 0.2] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        let mut r = SweepRecord { experiment: "x".into(), lambda1: Some(Slot { value: 1.0, residual: 0.0 }), ..Default::default() };
        r.checks.push(Check { name: "a".into(), pass: true });
        let cells = row(&r);
        assert_eq!(cells.len(), HEADER.len());
        assert_eq!(cells[9], "1.0000000000000000e0");
        assert_eq!(cells[11], "");
        assert_eq!(cells[35], "a=pass");
        assert_eq!(cells[36], "true");
    }

    #[test]
    fn csv_has_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_records(&path, &[SweepRecord::default()]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("experiment,field_kind,field,delta"));
        assert!(first.ends_with(",checks,pass,note"));
        assert_eq!(text.lines().count(), 2);
    }
}
