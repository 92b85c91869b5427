//! TOML problem description.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use timoshenko_core::experiments::ProblemFamily;
use timoshenko_core::fem::{DEFAULT_POISSON, DEFAULT_SHEAR_CORRECTION, DEFAULT_YOUNG_MODULUS};
use timoshenko_core::{CLastTerm, LoadData, Profile, Scheme, SsnConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub material: Material,
    #[serde(default)]
    pub control: Control,
    #[serde(default)]
    pub data: Data,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub locking: Study,
    #[serde(default)]
    pub convergence: Study,
    /// Directory that relative table paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub n: usize,
    pub length: f64,
    pub thickness: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            n: 600,
            length: 1.0,
            thickness: 0.01,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
    pub shear_correction: f64,
    /// Replaces `k E / (2 (1 + ν̄))` when set.
    pub kappa: Option<f64>,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            young: DEFAULT_YOUNG_MODULUS,
            poisson: DEFAULT_POISSON,
            shear_correction: DEFAULT_SHEAR_CORRECTION,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Control {
    pub nu: f64,
    pub eta: f64,
    /// Grid for `sweep`; `eta` is used by the other commands.
    pub etas: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl Default for Control {
    fn default() -> Self {
        Self {
            nu: 5e-9,
            eta: 0.0,
            etas: timoshenko_core::experiments::BENCHMARK_ETAS.to_vec(),
            lower: -11.05,
            upper: 11.05,
        }
    }
}

/// Catalog entry for a scalar function on the beam.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Zero,
    Constant { value: f64 },
    /// `amplitude * sin(frequency * pi * x)`.
    Sine { amplitude: f64, frequency: f64 },
    /// Two whitespace-separated columns `x value`, interpolated linearly.
    Table { path: PathBuf },
}

impl Default for Expr {
    fn default() -> Self {
        Self::Zero
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Data {
    pub f: Expr,
    pub g: Expr,
    pub w_d: Expr,
    pub theta_d: Expr,
    pub track_rotation: bool,
}

impl Default for Data {
    fn default() -> Self {
        Self {
            f: Expr::Sine {
                amplitude: 100.0,
                frequency: 8.0,
            },
            g: Expr::Zero,
            w_d: Expr::Zero,
            theta_d: Expr::Zero,
            track_rotation: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub scheme: String,
    pub tol: f64,
    pub max_iter: usize,
    pub l1_half_factor: bool,
    pub c_last_term: String,
}

impl Default for Solver {
    fn default() -> Self {
        Self {
            scheme: "locking_free".into(),
            tol: 1e-10,
            max_iter: 50,
            l1_half_factor: false,
            c_last_term: "symmetric".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Study {
    pub thicknesses: Vec<f64>,
    pub ns: Vec<usize>,
    /// Defaults to eight times the largest `n`.
    pub n_ref: Option<usize>,
}

impl Default for Study {
    fn default() -> Self {
        Self {
            thicknesses: vec![1e-2, 1e-3],
            ns: vec![16, 32, 64, 128, 256],
            n_ref: None,
        }
    }
}

impl Study {
    pub fn reference_size(&self) -> usize {
        self.n_ref
            .unwrap_or_else(|| 8 * self.ns.iter().copied().max().unwrap_or(0))
    }
}

pub fn parse_scheme(s: &str) -> Result<Scheme, CliError> {
    match s {
        "locking_free" | "reduced" => Ok(Scheme::LockingFree),
        "standard" | "full" => Ok(Scheme::Standard),
        _ => Err(CliError::config(format!(
            "solver.scheme: expected \"locking_free\" or \"standard\", got {s:?}"
        ))),
    }
}

pub fn parse_c_last_term(s: &str) -> Result<CLastTerm, CliError> {
    match s {
        "symmetric" => Ok(CLastTerm::Symmetric),
        "paper" | "literal" => Ok(CLastTerm::Literal),
        _ => Err(CliError::config(format!(
            "solver.c_last_term: expected \"symmetric\" or \"literal\", got {s:?}"
        ))),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need the core constructors.
    pub fn validate(&self) -> Result<(), CliError> {
        parse_scheme(&self.solver.scheme)?;
        parse_c_last_term(&self.solver.c_last_term)?;
        if self.geometry.n < 2 {
            return Err(CliError::config("geometry.n must be at least 2"));
        }
        if self.control.etas.windows(2).any(|w| w[0] > w[1]) {
            return Err(CliError::config("control.etas must be sorted ascending"));
        }
        for (name, s) in [("locking", &self.locking), ("convergence", &self.convergence)] {
            if s.thicknesses.is_empty() || s.ns.is_empty() {
                return Err(CliError::config(format!("{name}: thicknesses and ns must be nonempty")));
            }
        }
        // the family constructor runs the remaining checks
        self.family()?.build(self.geometry.n, self.geometry.thickness, self.scheme()?)?;
        Ok(())
    }

    pub fn scheme(&self) -> Result<Scheme, CliError> {
        parse_scheme(&self.solver.scheme)
    }

    pub fn ssn(&self) -> SsnConfig {
        SsnConfig {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            ..Default::default()
        }
    }

    fn profile(&self, field: &str, e: &Expr) -> Result<Profile, CliError> {
        Ok(match e {
            Expr::Zero => Profile::Zero,
            Expr::Constant { value } => Profile::Constant(*value),
            Expr::Sine { amplitude, frequency } => Profile::sine(*amplitude, *frequency),
            Expr::Table { path } => {
                let full = self.base_dir.join(path);
                let (xs, ys) = read_table(&full).map_err(|m| CliError::config(format!("data.{field}: {m}")))?;
                Profile::function(move |x| interpolate(&xs, &ys, x))
            }
        })
    }

    pub fn family(&self) -> Result<ProblemFamily, CliError> {
        let d = &self.data;
        Ok(ProblemFamily {
            length: self.geometry.length,
            young_modulus: self.material.young,
            poisson: self.material.poisson,
            shear_correction: self.material.shear_correction,
            kappa_override: self.material.kappa,
            nu: self.control.nu,
            eta: self.control.eta,
            lower: Profile::Constant(self.control.lower),
            upper: Profile::Constant(self.control.upper),
            loads: LoadData {
                f: self.profile("f", &d.f)?,
                g: self.profile("g", &d.g)?,
                w_d: self.profile("w_d", &d.w_d)?,
                theta_d: self.profile("theta_d", &d.theta_d)?,
                track_rotation: d.track_rotation,
            },
            l1_half_factor: self.solver.l1_half_factor,
            c_last_term: parse_c_last_term(&self.solver.c_last_term)?,
        })
    }

    /// `key=value` lines describing the run, written at the top of outputs.
    pub fn header(&self, command: &str, seed: u64) -> Vec<(String, String)> {
        let g = &self.geometry;
        let m = &self.material;
        let c = &self.control;
        let s = &self.solver;
        let mut h = vec![
            ("command", command.to_string()),
            ("n", g.n.to_string()),
            ("length", g.length.to_string()),
            ("thickness", g.thickness.to_string()),
            ("young", m.young.to_string()),
            ("poisson", m.poisson.to_string()),
            ("shear_correction", m.shear_correction.to_string()),
            ("kappa", m.kappa.map_or("derived".into(), |k| k.to_string())),
            ("nu", c.nu.to_string()),
            ("eta", c.eta.to_string()),
            ("lower", c.lower.to_string()),
            ("upper", c.upper.to_string()),
            ("f", describe(&self.data.f)),
            ("g", describe(&self.data.g)),
            ("w_d", describe(&self.data.w_d)),
            ("scheme", s.scheme.clone()),
            ("tol", s.tol.to_string()),
            ("max_iter", s.max_iter.to_string()),
            ("l1_half_factor", s.l1_half_factor.to_string()),
            ("c_last_term", s.c_last_term.clone()),
            ("seed", seed.to_string()),
        ];
        if self.data.track_rotation {
            h.push(("theta_d", describe(&self.data.theta_d)));
        }
        h.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

fn describe(e: &Expr) -> String {
    match e {
        Expr::Zero => "zero".into(),
        Expr::Constant { value } => format!("constant({value})"),
        Expr::Sine { amplitude, frequency } => format!("sine({amplitude},{frequency})"),
        Expr::Table { path } => format!("table({})", path.display()),
    }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| format!("{}:{}: bad number {s:?}", path.display(), i + 1));
        if cols.len() != 2 {
            return Err(format!("{}:{}: expected two columns", path.display(), i + 1));
        }
        xs.push(parse(cols[0])?);
        ys.push(parse(cols[1])?);
    }
    if xs.len() < 2 {
        return Err(format!("{}: need at least two rows", path.display()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("{}: abscissae must increase strictly", path.display()));
    }
    Ok((xs, ys))
}

/// Piecewise-linear interpolation, constant beyond the end points.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
    (1.0 - s) * ys[k] + s * ys[k + 1]
}
