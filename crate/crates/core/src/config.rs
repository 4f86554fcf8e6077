//! Run configuration: `[section]` headers, `key = value` lines, `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::coeff::CoefficientField;
use crate::error::{Error, Result};
use crate::experiments::{MeshPolicy, Tolerances, EXPERIMENTS};
use crate::grid::CrossSection;

/// Environment variable overriding `[run] output`.
pub const ENV_OUTPUT: &str = "CYLEIG_OUTPUT_DIR";
/// Environment variable overriding `[run] parallelism`.
pub const ENV_PARALLELISM: &str = "CYLEIG_PARALLELISM";

/// Length schedules and per-experiment parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedules {
    pub cross_section: Vec<f64>,
    pub bounds: Vec<f64>,
    pub limit_zero: Vec<f64>,
    pub nu_half: Vec<f64>,
    pub limit_infinity: Vec<f64>,
    pub gap: Vec<f64>,
    pub second: Vec<f64>,
    pub dirichlet: Vec<f64>,
    pub multi: Vec<f64>,
    pub decay: f64,
    pub picone: f64,
    pub picone_widths: Vec<f64>,
    pub picone_samples: usize,
    pub end_profile: Vec<f64>,
    pub end_profile_r: f64,
    pub end_profile_half_length: f64,
    pub test_functions: Vec<f64>,
}

impl Default for Schedules {
    fn default() -> Self {
        Schedules {
            cross_section: vec![16.0, 32.0, 64.0, 128.0],
            bounds: vec![0.1, 0.5, 1.0, 2.0, 4.0, 8.0],
            limit_zero: vec![0.4, 0.2, 0.1, 0.05],
            nu_half: vec![4.0, 8.0, 16.0],
            limit_infinity: vec![8.0, 12.0, 16.0],
            gap: vec![8.0, 12.0, 16.0],
            second: vec![8.0, 12.0, 16.0],
            dirichlet: vec![4.0, 8.0, 16.0],
            multi: vec![2.0, 4.0],
            decay: 12.0,
            picone: 8.0,
            picone_widths: vec![2.0, 4.0, 8.0],
            picone_samples: 50,
            end_profile: vec![6.0, 10.0, 14.0],
            end_profile_r: 3.0,
            end_profile_half_length: 24.0,
            test_functions: vec![2.0, 8.0],
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiments: Vec<String>,
    pub output: PathBuf,
    pub parallelism: usize,
    pub seed: u64,
    pub field: CoefficientField,
    pub omega: CrossSection,
    pub mesh: MeshPolicy,
    pub tol: Tolerances,
    pub schedules: Schedules,
}

struct Entry {
    value: String,
    line: usize,
}

/// Parsed sections; keys are removed as they are consumed so leftovers can be reported.
struct Sections {
    map: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn err(line: usize, msg: impl AsRef<str>) -> Error {
    Error::Config(format!("line {line}: {}", msg.as_ref()))
}

const SECTIONS: [&str; 6] = ["run", "field", "mesh", "solver", "schedules", "tolerances"];

impl Sections {
    fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err(line, "unterminated section header"))?.trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(line, format!("unknown section [{name}]")));
                }
                map.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| err(line, format!("expected key = value, got '{s}'")))?;
            let section = current.as_ref().ok_or_else(|| err(line, "key outside of any section"))?;
            let key = k.trim().to_string();
            let entries = map.get_mut(section).expect("section exists");
            if entries.contains_key(&key) {
                return Err(err(line, format!("duplicate key '{key}' in [{section}]")));
            }
            entries.insert(key, Entry { value: v.trim().to_string(), line });
        }
        Ok(Sections { map })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.map.get_mut(section).and_then(|m| m.remove(key))
    }

    fn f64(&mut self, section: &str, key: &str) -> Result<Option<(f64, usize)>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<f64>().map(|v| Some((v, e.line))).map_err(|_| err(e.line, format!("{key}: '{}' is not a number", e.value))),
        }
    }

    fn positive(&mut self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.f64(section, key)? {
            None => Ok(None),
            Some((v, line)) if v > 0.0 && v.is_finite() => {
                let _ = line;
                Ok(Some(v))
            }
            Some((v, line)) => Err(err(line, format!("{key} must be positive, got {v}"))),
        }
    }

    fn usize(&mut self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<usize>().map(Some).map_err(|_| err(e.line, format!("{key}: '{}' is not a nonnegative integer", e.value))),
        }
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<(Vec<f64>, usize)>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => {
                let vals: std::result::Result<Vec<f64>, _> = e.value.split(',').map(|t| t.trim().parse::<f64>()).collect();
                let vals = vals.map_err(|_| err(e.line, format!("{key}: '{}' is not a comma-separated list of numbers", e.value)))?;
                Ok(Some((vals, e.line)))
            }
        }
    }

    /// A nonempty, positive, strictly monotone schedule.
    fn schedule(&mut self, key: &str, descending: bool) -> Result<Option<Vec<f64>>> {
        let Some((v, line)) = self.list("schedules", key)? else { return Ok(None) };
        if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(err(line, format!("{key} must be a nonempty list of positive numbers")));
        }
        let sorted = v.windows(2).all(|w| if descending { w[1] < w[0] } else { w[1] > w[0] });
        if !sorted {
            let order = if descending { "decreasing" } else { "increasing" };
            return Err(err(line, format!("{key} must be strictly {order}")));
        }
        Ok(Some(v))
    }

    fn string(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.take(section, key).map(|e| (e.value, e.line))
    }

    fn leftovers(&self) -> Result<()> {
        for (section, m) in &self.map {
            if let Some((k, e)) = m.iter().next() {
                return Err(err(e.line, format!("unknown key '{k}' in [{section}]")));
            }
        }
        Ok(())
    }
}

fn build_field(sec: &mut Sections, base: &Path) -> Result<CoefficientField> {
    let (kind, line) = sec.string("field", "kind").unwrap_or(("model".into(), 0));
    let delta = sec.f64("field", "delta")?.map(|v| v.0);
    let c = sec.f64("field", "c")?.map(|v| v.0);
    let entries = sec.list("field", "entries")?.map(|v| v.0);
    let n = sec.usize("field", "n")?;
    let p = sec.usize("field", "p")?;
    let path = sec.string("field", "path");
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| err(line, format!("field kind '{kind}' needs '{key}'")));
    match kind.as_str() {
        "model" => CoefficientField::model(need(delta, "delta")?),
        "identity" => CoefficientField::identity(n.unwrap_or(2), p.unwrap_or(1)),
        "diagonal" => {
            let e = entries.ok_or_else(|| err(line, "field kind 'diagonal' needs 'entries'"))?;
            CoefficientField::diagonal(&e, p.unwrap_or(1))
        }
        "variable-a22" => CoefficientField::model_variable_a22(need(delta, "delta")?, c.unwrap_or(0.25)),
        "asymmetric" => CoefficientField::asymmetric(need(delta, "delta")?),
        "odd-coupling" => CoefficientField::odd_coupling(need(c, "c")?),
        "model-3d" => CoefficientField::model_3d(need(delta, "delta")?),
        "table" => {
            let (file, fl) = path.ok_or_else(|| err(line, "field kind 'table' needs 'path'"))?;
            let full = base.join(&file);
            let n = n.ok_or_else(|| err(fl, "field kind 'table' needs 'n'"))?;
            CoefficientField::from_table_file(&full, n, p.unwrap_or(1))
        }
        other => Err(err(line, format!("unknown field kind '{other}'"))),
    }
}

impl RunConfig {
    /// Parses a config; relative table paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut sec = Sections::parse(text)?;

        let experiments = match sec.string("run", "experiments") {
            None => return Err(Error::Config("missing [run] experiments".into())),
            Some((v, line)) => {
                let list: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                if list.is_empty() {
                    return Err(err(line, "experiments is empty"));
                }
                if let Some(bad) = list.iter().find(|e| !EXPERIMENTS.contains(&e.as_str())) {
                    return Err(err(line, format!("unknown experiment '{bad}' (known: {})", EXPERIMENTS.join(", "))));
                }
                list
            }
        };
        let output = sec.string("run", "output").map(|v| PathBuf::from(v.0)).unwrap_or_else(|| PathBuf::from("cyleig-out"));
        let parallelism = sec.usize("run", "parallelism")?.unwrap_or(1).max(1);
        let seed = sec.usize("run", "seed")?.unwrap_or(0) as u64;

        let field = build_field(&mut sec, base)?;

        let lo = sec.list("mesh", "omega_lo")?;
        let hi = sec.list("mesh", "omega_hi")?;
        let omega = match (lo, hi) {
            (None, None) => CrossSection::interval(-1.0, 1.0),
            (Some((lo, line)), Some((hi, _))) => {
                if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
                    return Err(err(line, "omega_lo/omega_hi must give one or two intervals with lo < hi"));
                }
                CrossSection { lo, hi }
            }
            (Some((_, line)), None) | (None, Some((_, line))) => return Err(err(line, "omega_lo and omega_hi go together")),
        };
        if omega.dim() != field.cross_dim() {
            return Err(Error::Config(format!("field has a {}-dimensional cross-section, omega has {}", field.cross_dim(), omega.dim())));
        }

        let d = MeshPolicy::default();
        let mesh = MeshPolicy {
            cross: sec.positive("mesh", "cross")?.unwrap_or(d.cross),
            axial: sec.positive("mesh", "axial")?.unwrap_or(d.axial),
            grading: sec.usize("mesh", "grading")?.unwrap_or(d.grading),
            min_axial_cells: sec.positive("mesh", "min_axial_cells")?.unwrap_or(d.min_axial_cells),
            multi_cross: sec.positive("mesh", "multi_cross")?.unwrap_or(d.multi_cross),
            multi_axial: sec.positive("mesh", "multi_axial")?.unwrap_or(d.multi_axial),
        };
        if mesh.grading == 0 {
            return Err(Error::Config("[mesh] grading must be at least 1".into()));
        }

        let t = Tolerances::default();
        let solver = sec.positive("solver", "tol")?.unwrap_or(t.solver);
        let mut tg = |k: &str, dflt: f64| -> Result<f64> { Ok(sec.positive("tolerances", k)?.unwrap_or(dflt)) };
        let tol = Tolerances {
            solver,
            disc: None,
            strict_margin: tg("strict_margin", t.strict_margin)?,
            equal: tg("tol_equal", t.equal)?,
            reflect: tg("tol_reflect", t.reflect)?,
            limit: tg("tol_limit", t.limit)?,
            inf: tg("tol_inf", t.inf)?,
            second: tg("tol_2nd", t.second)?,
            conv: tg("tol_conv", t.conv)?,
            dirichlet_spread: tg("dirichlet_spread", t.dirichlet_spread)?,
            picone: tg("tol_picone", t.picone)?,
            r2_min: tg("r2_min", t.r2_min)?,
            grad_track: tg("grad_track", t.grad_track)?,
            bulk_residual: tg("tol_bulk_residual", t.bulk_residual)?,
            energy_identity: tg("tol_energy_identity", t.energy_identity)?,
            mass_identity: tg("tol_mass_identity", t.mass_identity)?,
            symmetry: tg("tol_symmetry", t.symmetry)?,
        };
        let tol = Tolerances { disc: sec.positive("tolerances", "tol_disc")?, ..tol };

        let s = Schedules::default();
        let schedules = Schedules {
            cross_section: sec.schedule("cross_section", false)?.unwrap_or(s.cross_section),
            bounds: sec.schedule("bounds", false)?.unwrap_or(s.bounds),
            limit_zero: sec.schedule("limit_zero", true)?.unwrap_or(s.limit_zero),
            nu_half: sec.schedule("nu_half", false)?.unwrap_or(s.nu_half),
            limit_infinity: sec.schedule("limit_infinity", false)?.unwrap_or(s.limit_infinity),
            gap: sec.schedule("gap", false)?.unwrap_or(s.gap),
            second: sec.schedule("second", false)?.unwrap_or(s.second),
            dirichlet: sec.schedule("dirichlet", false)?.unwrap_or(s.dirichlet),
            multi: sec.schedule("multi", false)?.unwrap_or(s.multi),
            decay: sec.positive("schedules", "decay")?.unwrap_or(s.decay),
            picone: sec.positive("schedules", "picone")?.unwrap_or(s.picone),
            picone_widths: sec.schedule("picone_widths", false)?.unwrap_or(s.picone_widths),
            picone_samples: sec.usize("schedules", "picone_samples")?.unwrap_or(s.picone_samples),
            end_profile: sec.schedule("end_profile", false)?.unwrap_or(s.end_profile),
            end_profile_r: sec.positive("schedules", "end_profile_r")?.unwrap_or(s.end_profile_r),
            end_profile_half_length: sec.positive("schedules", "end_profile_half_length")?.unwrap_or(s.end_profile_half_length),
            test_functions: sec.schedule("test_functions", false)?.unwrap_or(s.test_functions),
        };
        sec.leftovers()?;
        Ok(RunConfig { experiments, output, parallelism, seed, field, omega, mesh, tol, schedules })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Applies the output-directory and parallelism environment overrides.
    pub fn apply_env(&mut self, output: Option<String>, parallelism: Option<String>) -> Result<()> {
        if let Some(o) = output.filter(|s| !s.is_empty()) {
            self.output = PathBuf::from(o);
        }
        if let Some(p) = parallelism.filter(|s| !s.is_empty()) {
            let n: usize = p.parse().map_err(|_| Error::Config(format!("{ENV_PARALLELISM}: '{p}' is not a positive integer")))?;
            self.parallelism = n.max(1);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        RunConfig::parse(s, Path::new("."))
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse("[run]\nexperiments = gap\n[field]\nkind = model\ndelta = 0.6\n").unwrap();
        assert_eq!(c.experiments, vec!["gap"]);
        assert_eq!(c.field.delta(), Some(0.6));
        assert_eq!(c.schedules.gap, vec![8.0, 12.0, 16.0]);
        assert_eq!(c.tol.disc, None);
        assert_eq!(c.parallelism, 1);
    }

    #[test]
    fn full_config() {
        let text = "# comment\n[run]\nexperiments = bounds, decay # trailing\noutput = out\nparallelism = 2\nseed = 7\n\
                    [field]\nkind = diagonal\nentries = 1, 2\n[mesh]\ncross = 32\naxial = 4\ngrading = 1\n\
                    [solver]\ntol = 1e-8\n[schedules]\nbounds = 1, 2\nlimit_zero = 0.2, 0.1\ndecay = 6\n\
                    [tolerances]\ntol_disc = 1e-3\nstrict_margin = 1e-4\n";
        let c = parse(text).unwrap();
        assert_eq!(c.experiments, vec!["bounds", "decay"]);
        assert_eq!(c.output, PathBuf::from("out"));
        assert_eq!(c.seed, 7);
        assert_eq!(c.mesh.cross, 32.0);
        assert_eq!(c.tol.solver, 1e-8);
        assert_eq!(c.tol.disc, Some(1e-3));
        assert_eq!(c.schedules.limit_zero, vec![0.2, 0.1]);
        assert_eq!(c.schedules.decay, 6.0);
    }

    #[test]
    fn rejects_bad_input_with_line_numbers() {
        let base = "[run]\nexperiments = gap\n[field]\nkind = model\ndelta = 0.6\n";
        let cases = [
            ("[tolerances]\ntol_disc = -1\n", "line 7"),
            ("[run2]\n", "unknown section"),
            ("[mesh]\nfoo = 1\n", "unknown key 'foo'"),
            ("[schedules]\nbounds = 2, 1\n", "strictly increasing"),
            ("[schedules]\nlimit_zero = 0.1, 0.2\n", "strictly decreasing"),
            ("[mesh]\ncross = abc\n", "not a number"),
            ("[mesh]\ncross\n", "expected key = value"),
        ];
        for (extra, want) in cases {
            match parse(&format!("{base}{extra}")) {
                Err(Error::Config(m)) => assert!(m.contains(want), "{m} lacks {want}"),
                other => panic!("{extra}: {other:?}"),
            }
        }
        assert!(matches!(parse("[run]\nexperiments = nope\n"), Err(Error::Config(_))));
        assert!(matches!(parse("[field]\nkind = model\ndelta = 0.6\n"), Err(Error::Config(_))));
        assert!(matches!(parse("[run]\nexperiments = gap\n[field]\nkind = model\n"), Err(Error::Config(_))));
    }

    #[test]
    fn env_overrides() {
        let mut c = parse("[run]\nexperiments = gap\n[field]\nkind = model\ndelta = 0.6\n").unwrap();
        c.apply_env(Some("elsewhere".into()), Some("3".into())).unwrap();
        assert_eq!(c.output, PathBuf::from("elsewhere"));
        assert_eq!(c.parallelism, 3);
        assert!(c.apply_env(None, Some("x".into())).is_err());
    }
}
