//! TOML run configuration.
//!
//! Every table rejects unknown keys. Optional keys fall back to the solver
//! defaults; [`RunConfig::to_toml`] writes the parsed form back out, and
//! parsing that output reproduces the same value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use chks_core::initial::{CosineTerm, PhiInit, SigmaInit};
use chks_core::model::ReactionSplit;
use chks_core::potentials::Interpolant;
use chks_core::solver::NewtonOptions;
use chks_core::wsu::PairedRunConfig;
use chks_core::{AlphaSpec, GridSpec, ModelParams, SolverConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("bad override `{0}`: {1}")]
    Override(String, String),
}

impl From<chks_core::Error> for ConfigError {
    fn from(e: chks_core::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    pub time: Time,
    pub model: Model,
    pub ic: Ic,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wsu: Option<Wsu>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Time {
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    pub t_end: f64,
    pub report_every: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub chi: f64,
    pub lambda: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_safe: Option<f64>,
    #[serde(default)]
    pub reaction: Reaction,
    pub alpha: Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reaction {
    #[default]
    SignSplit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Alpha {
    Constant {
        value: f64,
    },
    Logistic {
        ell: f64,
        p: f64,
        /// `(φ, h)` nodes; omitted means `h(φ) = (1 + φ)/2`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<Vec<[f64; 2]>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ic {
    pub phi: PhiIc,
    pub sigma: SigmaIc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub amplitude: f64,
    pub kx: usize,
    #[serde(default)]
    pub ky: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiIc {
    Constant { value: f64 },
    RandomPerturbation { #[serde(default)] mean: f64, amplitude: f64, seed: u64 },
    TanhInterface { center: f64, width: f64, #[serde(default = "one")] amplitude: f64 },
    CosineSeries { #[serde(default)] mean: f64, terms: Vec<Term> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaIc {
    Constant { value: f64 },
    GaussianBump { center: Vec<f64>, width: f64, mass: f64, #[serde(default)] background: f64 },
    RandomPositive { seed: u64, floor: f64 },
    CosineSeries { mean: f64, terms: Vec<Term> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grow_after: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grow_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    #[default]
    None,
    Text,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub snapshots: SnapshotFormat,
}

fn default_dir() -> PathBuf {
    PathBuf::from("chks-out")
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: default_dir(), snapshots: SnapshotFormat::None }
    }
}

/// Paired-run settings; the coarse run uses `[domain]` and `time.dt`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wsu {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space_refinement: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_refinement: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_every: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb_coarse_sigma: Option<f64>,
    /// Different initial data for the coarse run (negative controls).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_ic: Option<Ic>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `key = value` where `key` is a dotted path and `value` a TOML
    /// value, then re-validates.
    pub fn with_override(&self, key: &str, value: &toml::Value) -> Result<Self, ConfigError> {
        let bad = |msg: &str| ConfigError::Override(format!("{key}={value}"), msg.to_string());
        let mut tree = toml::Value::try_from(self).map_err(|e| bad(&e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        let mut node = &mut tree;
        for part in &parts[..parts.len() - 1] {
            let table = node.as_table_mut().ok_or_else(|| bad("path crosses a non-table value"))?;
            node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let table = node.as_table_mut().ok_or_else(|| bad("path crosses a non-table value"))?;
        table.insert(parts[parts.len() - 1].to_string(), value.clone());
        let cfg: RunConfig = tree.try_into().map_err(|e: toml::de::Error| bad(e.message()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Structural checks plus sampling of the initial data.
    pub fn check(&self) -> Result<(), ConfigError> {
        self.grid()?;
        self.params()?.validate()?;
        self.solver_config().validate()?;
        let t = &self.time;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) || !(t.report_every > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "need finite t_end >= 0 and report_every > 0, got t_end={}, report_every={}",
                t.t_end, t.report_every
            )));
        }
        self.initial_fields(&self.ic)?;
        if let Some(w) = &self.wsu {
            if let Some(ic) = &w.coarse_ic {
                self.initial_fields(ic)?;
            }
            self.paired_config()?.validate()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        let d = &self.domain;
        if d.lengths.len() != d.dim || d.cells.len() != d.dim {
            return Err(ConfigError::Invalid(format!(
                "domain.dim = {} but {} lengths and {} cell counts given",
                d.dim,
                d.lengths.len(),
                d.cells.len()
            )));
        }
        Ok(GridSpec::from_axes(&d.cells, &d.lengths)?)
    }

    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let m = &self.model;
        let alpha = match &m.alpha {
            Alpha::Constant { value } => AlphaSpec::Constant(*value),
            Alpha::Logistic { ell, p, table: None } => AlphaSpec::logistic(*ell, *p)?,
            Alpha::Logistic { ell, p, table: Some(nodes) } => {
                let interp = Interpolant::table(nodes.iter().map(|n| (n[0], n[1])).collect())?;
                AlphaSpec::logistic_with(*ell, *p, interp)?
            }
        };
        let mut params = ModelParams::new(m.chi, m.lambda, alpha).with_epsilon(m.epsilon).with_reaction(match m.reaction {
            Reaction::SignSplit => ReactionSplit::SignSplit,
            Reaction::Implicit => ReactionSplit::Implicit,
        });
        if let Some(d) = m.delta_safe {
            params.delta_safe = d;
        }
        Ok(params)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::fixed(self.time.dt);
        if let Some(v) = self.time.dt_min {
            c.dt_min = v;
        }
        if let Some(v) = self.time.dt_max {
            c.dt_max = v;
        }
        c.newton = self.newton();
        let s = &self.solver;
        if let Some(v) = s.mass_tol {
            c.mass_tol = v;
        }
        if let Some(v) = s.grow_after {
            c.grow_after = v;
        }
        if let Some(v) = s.grow_factor {
            c.grow_factor = v;
        }
        c
    }

    fn newton(&self) -> NewtonOptions<f64> {
        let mut n = NewtonOptions::default();
        if let Some(v) = self.solver.newton_tol {
            n.tol = v;
        }
        if let Some(v) = self.solver.newton_max_iters {
            n.max_iters = v;
        }
        n
    }

    pub fn phi_init(ic: &PhiIc) -> PhiInit<f64> {
        match ic {
            PhiIc::Constant { value } => PhiInit::Constant(*value),
            PhiIc::RandomPerturbation { mean, amplitude, seed } => {
                PhiInit::RandomPerturbation { mean: *mean, amplitude: *amplitude, seed: *seed }
            }
            PhiIc::TanhInterface { center, width, amplitude } => {
                PhiInit::TanhInterface { center: *center, width: *width, amplitude: *amplitude }
            }
            PhiIc::CosineSeries { mean, terms } => PhiInit::CosineSeries { mean: *mean, terms: terms_of(terms) },
        }
    }

    pub fn sigma_init(ic: &SigmaIc) -> Result<SigmaInit<f64>, ConfigError> {
        Ok(match ic {
            SigmaIc::Constant { value } => SigmaInit::Constant(*value),
            SigmaIc::GaussianBump { center, width, mass, background } => {
                let c = match center.as_slice() {
                    [x] => [*x, 0.0],
                    [x, y] => [*x, *y],
                    _ => return Err(ConfigError::Invalid("gaussian_bump center needs 1 or 2 coordinates".into())),
                };
                SigmaInit::GaussianBump { center: c, width: *width, mass: *mass, background: *background }
            }
            SigmaIc::RandomPositive { seed, floor } => SigmaInit::RandomPositive { seed: *seed, floor: *floor },
            SigmaIc::CosineSeries { mean, terms } => SigmaInit::CosineSeries { mean: *mean, terms: terms_of(terms) },
        })
    }

    /// Samples `(φ₀, σ₀)` on the configured grid, rejecting inadmissible data.
    pub fn initial_fields(&self, ic: &Ic) -> Result<(chks_core::Field, chks_core::Field), ConfigError> {
        let grid = self.grid()?;
        let phi = Self::phi_init(&ic.phi).sample(&grid)?;
        let sigma = Self::sigma_init(&ic.sigma)?.sample(&grid)?;
        Ok((phi, sigma))
    }

    /// Seeds of the random initial-data generators, in `[phi, sigma]` order.
    pub fn seeds(&self) -> Vec<u64> {
        let mut out = Vec::new();
        if let PhiIc::RandomPerturbation { seed, .. } = self.ic.phi {
            out.push(seed);
        }
        if let SigmaIc::RandomPositive { seed, .. } = self.ic.sigma {
            out.push(seed);
        }
        out
    }

    pub fn paired_config(&self) -> Result<PairedRunConfig<f64>, ConfigError> {
        let mut p = PairedRunConfig::new(
            self.params()?,
            Self::phi_init(&self.ic.phi),
            Self::sigma_init(&self.ic.sigma)?,
            self.grid()?,
            self.time.dt,
            self.time.t_end,
        );
        p.newton = self.newton();
        if let Some(w) = &self.wsu {
            if let Some(v) = w.space_refinement {
                p.space_refinement = v;
            }
            if let Some(v) = w.time_refinement {
                p.time_refinement = v;
            }
            if let Some(v) = w.compare_every {
                p.compare_every = v;
            }
            if let Some(v) = w.c_max {
                p.c_max = v;
            }
            p.m_override = w.m;
            if let Some([a, b]) = w.window {
                p.window = (a, b);
            }
            if let Some(v) = w.perturb_coarse_sigma {
                p.perturb_coarse_sigma = v;
            }
            if let Some(ic) = &w.coarse_ic {
                p.coarse_ic = Some((Self::phi_init(&ic.phi), Self::sigma_init(&ic.sigma)?));
            }
        }
        Ok(p)
    }
}

fn terms_of(terms: &[Term]) -> Vec<CosineTerm<f64>> {
    terms.iter().map(|t| CosineTerm::new(t.amplitude, t.kx, t.ky)).collect()
}

/// The standard smooth benchmark as a config (64 cells on `(0, 2π)`,
/// `χ = 1`, `λ = 0.5`, logistic `α`, `τ = 10⁻²`, `t_end = 1`).
pub fn benchmark_toml() -> String {
    let l = 2.0 * std::f64::consts::PI;
    format!(
        r#"[domain]
dim = 1
lengths = [{l:?}]
cells = [64]

[time]
dt = 0.01
t_end = 1.0
report_every = 0.1

[model]
chi = 1.0
lambda = 0.5

[model.alpha]
type = "logistic"
ell = 1.0
p = 1.0

[ic.phi]
type = "cosine_series"
terms = [{{ amplitude = 0.2, kx = 2 }}, {{ amplitude = 0.1, kx = 4 }}]

[ic.sigma]
type = "cosine_series"
mean = 1.0
terms = [{{ amplitude = 0.3, kx = 4 }}]

[wsu]
compare_every = 0.05
"#
    )
}

/// Splits `v1,v2,…` at top-level commas (not inside `{}`, `[]` or quotes)
/// and parses each piece as a TOML value; bare words become strings.
pub fn parse_override(spec: &str) -> Result<(String, Vec<toml::Value>), ConfigError> {
    let (key, values) =
        spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into(), "expected key=v1,v2,...".into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(spec.into(), "empty key segment".into()));
    }
    let mut pieces = Vec::new();
    let (mut depth, mut quote, mut start) = (0i32, None::<char>, 0usize);
    for (i, c) in values.char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '{' | '[') => depth += 1,
            (None, '}' | ']') => depth -= 1,
            (None, ',') if depth == 0 => {
                pieces.push(&values[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    pieces.push(&values[start..]);
    let parsed = pieces
        .into_iter()
        .map(|p| {
            let p = p.trim();
            if p.is_empty() {
                return Err(ConfigError::Override(spec.into(), "empty value".into()));
            }
            let doc = format!("v = {p}");
            match toml::from_str::<toml::Table>(&doc) {
                Ok(mut t) => Ok(t.remove("v").expect("key present")),
                Err(_) => Ok(toml::Value::String(p.to_string())),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((key.to_string(), parsed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_config_parses() {
        let cfg = RunConfig::from_toml(&benchmark_toml()).unwrap();
        assert_eq!(cfg.grid().unwrap().num_cells(), 64);
        let b = chks_core::benchmark::Benchmark::<f64>::smooth();
        assert_eq!(cfg.params().unwrap(), b.params);
        assert_eq!(RunConfig::phi_init(&cfg.ic.phi), b.phi0);
        assert_eq!(RunConfig::sigma_init(&cfg.ic.sigma).unwrap(), b.sigma0);
        assert_eq!(cfg.grid().unwrap(), b.grid);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = benchmark_toml().replace("chi = 1.0", "chi = 1.0\nkappa = 2.0");
        assert!(matches!(RunConfig::from_toml(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn override_splitting_respects_tables() {
        let (k, v) = parse_override("model.alpha={type=\"constant\",value=0},{type=\"logistic\",ell=1,p=1}").unwrap();
        assert_eq!(k, "model.alpha");
        assert_eq!(v.len(), 2);
        let (_, v) = parse_override("model.reaction=implicit,sign_split").unwrap();
        assert_eq!(v[0], toml::Value::String("implicit".into()));
        let (_, v) = parse_override("time.dt=0.01, 5e-3").unwrap();
        assert_eq!(v[1], toml::Value::Float(5e-3));
        assert!(parse_override("nokey").is_err());
    }

    #[test]
    fn override_applies_and_revalidates() {
        let cfg = RunConfig::from_toml(&benchmark_toml()).unwrap();
        let c2 = cfg.with_override("model.chi", &toml::Value::Float(2.0)).unwrap();
        assert_eq!(c2.model.chi, 2.0);
        assert!(cfg.with_override("model.chi", &toml::Value::Float(-1.0)).is_err());
        assert!(cfg.with_override("model.nope", &toml::Value::Float(1.0)).is_err());
        // Integers are accepted where floats are expected.
        let c3 = cfg.with_override("model.chi", &toml::Value::Integer(0)).unwrap();
        assert_eq!(c3.model.chi, 0.0);
    }
}
