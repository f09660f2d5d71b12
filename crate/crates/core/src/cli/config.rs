//! Flat `key = value` run configuration: built-in defaults, then an
//! optional config file, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dynamics::IntegratorConfig;
use crate::entanglement::EntanglementConfig;
use crate::error::{Error, Result};
use crate::fixed_points::SweepAxis;
use crate::model::{DriftConvention, ModelParams};
use crate::paths::{Grid, PathSpec};
use crate::sweep::resolve_threads;

/// Every recognised key with its default and a one-line description.
/// `auto` and `none` mark unset optional values.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("j", "10", "cavity tunnelling rate"),
    ("omega_m", "20", "mechanical frequency"),
    ("g", "0.02", "optomechanical coupling"),
    ("gamma_m", "0.01", "mechanical damping"),
    ("delta", "10", "laser detuning (single-point commands)"),
    ("lambda", "3", "drive amplitude (single-point commands)"),
    ("nbar", "0", "thermal phonon number"),
    ("seed", "1", "base RNG seed"),
    ("threads", "auto", "worker threads; auto = PHONON_LAB_THREADS or all cores"),
    ("out", ".", "output directory"),
    ("tag", "none", "file name tag; none = unix timestamp"),
    ("path", "1", "reference cut: 1 (delta = J), 2 (lambda = 7), 3 (delta = 9.5)"),
    ("grid", "auto", "MIN:MAX:STEP along the cut; auto = the cut's default"),
    ("axis", "none", "custom cut axis (lambda | delta); overrides path"),
    ("fixed", "none", "value of the other parameter on a custom cut"),
    ("lambda_grid", "0:12:0.1", "phase-diagram lambda grid"),
    ("delta_grid", "8:12:0.05", "phase-diagram delta grid"),
    ("cross_check", "0.01", "fraction of phase-diagram cells re-checked by integration"),
    ("nbar_list", "0,1,10,50", "comma-separated thermal occupations"),
    ("offset", "0.01", "distance from the boundary into the stable region"),
    ("drift_convention", "quadrature", "quadrature | mean-field"),
    ("series", "false", "also write the sampled E_N(t) series"),
    ("algebraic_fixed_points", "true", "stationary covariance by linear solve at stable points"),
    ("random_v0", "false", "random initial covariance"),
    ("sample_periods", "16", "mechanical periods of E_N(t) sampled"),
    ("fit_points", "10", "grid points used for the near-threshold fit"),
    ("rel_tol", "1e-9", "integrator relative tolerance"),
    ("abs_tol", "1e-11", "integrator absolute tolerance"),
    ("max_step", "0.1", "largest step in mechanical periods"),
    ("t_transient", "auto", "transient; auto = 50 / gamma_m"),
    ("t_observe", "auto", "observation window; auto = 64 periods"),
    ("init_scale", "1", "random initial conditions in [-s, s]"),
    ("samples_per_period", "64", "output samples per mechanical period"),
    ("eps_a", "1e-3", "fixed-point classification threshold"),
    ("settle_factor", "25", "transient stretch in slowest relaxation times"),
    ("max_time", "4e6", "cap on the stretched transient"),
];

pub fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase()
}

fn known(k: &str) -> bool {
    KEYS.iter().any(|(name, _, _)| *name == k)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{origin}:{}: expected key = value", n + 1))
        })?;
        let k = normalize_key(k);
        if !known(&k) {
            return Err(Error::Config(format!("{origin}:{}: unknown key '{k}'", n + 1)));
        }
        out.insert(k, v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text, &path.display().to_string())
}

/// Effective settings after layering defaults, file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn layered(file: BTreeMap<String, String>, flags: BTreeMap<String, String>) -> Result<Self> {
        let mut map: BTreeMap<String, String> = KEYS
            .iter()
            .map(|(k, v, _)| (k.to_string(), v.to_string()))
            .collect();
        for (k, v) in file.into_iter().chain(flags) {
            if !known(&k) {
                return Err(Error::Config(format!("unknown option '{k}'")));
            }
            map.insert(k, v);
        }
        Ok(Settings(map))
    }

    pub fn defaults() -> Self {
        Self::layered(BTreeMap::new(), BTreeMap::new()).expect("defaults are valid")
    }

    pub fn with(mut self, key: &str, value: &str) -> Result<Self> {
        let k = normalize_key(key);
        if !known(&k) {
            return Err(Error::Config(format!("unknown option '{k}'")));
        }
        self.0.insert(k, value.to_string());
        Ok(self)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &String)> {
        self.0.iter()
    }

    fn is_unset(&self, key: &str) -> bool {
        matches!(self.raw(key), "auto" | "none" | "")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse(key)?;
        if !v.is_finite() {
            return Err(Error::Config(format!("{key} must be finite")));
        }
        Ok(v)
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.is_unset(key) {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(Error::Config(format!("{key}: expected true or false, got '{v}'"))),
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        let p = ModelParams {
            j: self.f64("j")?,
            omega_m: self.f64("omega_m")?,
            g: self.f64("g")?,
            gamma_m: self.f64("gamma_m")?,
            delta: self.f64("delta")?,
            lambda: self.f64("lambda")?,
            nbar: self.f64("nbar")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let c = IntegratorConfig {
            rel_tol: self.f64("rel_tol")?,
            abs_tol: self.f64("abs_tol")?,
            max_step: self.f64("max_step")?,
            t_transient: self.opt_f64("t_transient")?,
            t_observe: self.opt_f64("t_observe")?,
            seed: self.seed()?,
            init_scale: self.f64("init_scale")?,
            samples_per_period: self.parse("samples_per_period")?,
            eps_a: self.f64("eps_a")?,
            settle_factor: self.f64("settle_factor")?,
            max_time: self.f64("max_time")?,
            t_lyapunov: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn entanglement(&self) -> Result<EntanglementConfig> {
        let c = EntanglementConfig {
            integrator: self.integrator()?,
            convention: self.convention()?,
            random_v0: self.flag("random_v0")?,
            sample_periods: self.parse("sample_periods")?,
            algebraic_fixed_points: self.flag("algebraic_fixed_points")?,
            keep_series: self.flag("series")?,
            ..EntanglementConfig::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn convention(&self) -> Result<DriftConvention> {
        self.raw("drift_convention").parse()
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("seed")
    }

    pub fn threads(&self) -> Result<usize> {
        if self.is_unset("threads") {
            Ok(resolve_threads(None))
        } else {
            self.parse("threads")
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out"))
    }

    pub fn tag(&self) -> Option<String> {
        (!self.is_unset("tag")).then(|| self.raw("tag").to_string())
    }

    pub fn series(&self) -> Result<bool> {
        self.flag("series")
    }

    pub fn offset(&self) -> Result<f64> {
        let v = self.f64("offset")?;
        if !(v > 0.0) {
            return Err(Error::Config("offset must be > 0".into()));
        }
        Ok(v)
    }

    pub fn cross_check(&self) -> Result<f64> {
        let v = self.f64("cross_check")?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config("cross_check must lie in [0, 1]".into()));
        }
        Ok(v)
    }

    pub fn fit_points(&self) -> Result<usize> {
        let n: usize = self.parse("fit_points")?;
        if n < 2 {
            return Err(Error::Config("fit_points must be >= 2".into()));
        }
        Ok(n)
    }

    pub fn grid(&self, key: &str) -> Result<Grid> {
        Grid::parse(self.raw(key))
    }

    pub fn nbar_list(&self) -> Result<Vec<f64>> {
        let raw = self.raw("nbar_list").trim();
        if raw.is_empty() {
            return Err(Error::Config("nbar_list is empty".into()));
        }
        raw.split(',')
            .map(|s| {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("nbar_list: '{s}' is not a number")))?;
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Config(format!("nbar_list: {v} must be >= 0")));
                }
                Ok(v)
            })
            .collect()
    }

    /// The cut selected by `path`, or a custom cut from `axis`/`fixed`/`grid`.
    pub fn path_spec(&self, template: &ModelParams) -> Result<PathSpec> {
        let grid = if self.is_unset("grid") {
            None
        } else {
            Some(self.grid("grid")?)
        };
        if self.is_unset("axis") {
            let id: u8 = self.parse("path")?;
            return PathSpec::reference(id, template, grid);
        }
        let axis = match self.raw("axis") {
            "lambda" => SweepAxis::Lambda,
            "delta" => SweepAxis::Delta,
            other => return Err(Error::Config(format!("axis must be lambda or delta, got '{other}'"))),
        };
        let fixed = self
            .opt_f64("fixed")?
            .ok_or_else(|| Error::Config("a custom cut needs --fixed".into()))?;
        let grid = grid.ok_or_else(|| Error::Config("a custom cut needs --grid".into()))?;
        Ok(PathSpec::custom(axis, fixed, grid.values()))
    }
}
