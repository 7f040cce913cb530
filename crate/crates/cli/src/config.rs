//! TOML run configuration.
//!
//! Every field except `model` and `grid.extents` has a default. Expressions
//! are strings in `x, y, z` (and `t` for sources) with the usual functions
//! and constants (`sin`, `exp`, `sqrt`, `pi`, ...).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use conslaw_core::cochain::{project_function, project_proxy, Cochain, Placement};
use conslaw_core::models::{
    elasticity_spec, maxwell_spec, schrodinger_spec, yang_mills_spec, ElasticityParams, MaxwellParams, ModelKind,
    ModelSpec, SchrodingerParams,
};
use conslaw_core::{CubicalComplex, LameField, MaterialField, Probe};
use serde::{Deserialize, Serialize};

use crate::error::{config_error, CliError};
use crate::expr::{vector_fn, Expression};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    DirichletZero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    All(Boundary),
    PerAxis(Vec<Boundary>),
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec::All(Boundary::DirichletZero)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub extents: Vec<usize>,
    /// Cell sizes; default: `length / extents`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Vec<f64>>,
    /// Box lengths; default 1 on each axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<Vec<f64>>,
    #[serde(default)]
    pub boundary: BoundarySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub steps: usize,
    /// Fraction of the stability bound, used when `dt` is absent.
    pub cfl_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { steps: 100, cfl_fraction: 0.5, dt: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    Vtk,
    Csv,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub diagnostics: String,
    /// Steps between snapshots; 0 disables them.
    pub snapshot_every: usize,
    pub snapshot_format: SnapshotFormat,
    /// Steps between residual evaluations; 0 disables them.
    pub residual_every: usize,
    /// Worker threads for cell-parallel kernels; 0 means all cores.
    pub threads: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            diagnostics: "diagnostics.csv".into(),
            snapshot_every: 0,
            snapshot_format: SnapshotFormat::Vtk,
            residual_every: 0,
            threads: 0,
        }
    }
}

/// A number or an expression string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn expression(&self) -> Result<Expression, CliError> {
        match self {
            Scalar::Number(v) => Ok(Expression::constant(*v)),
            Scalar::Expr(s) => Expression::parse(s),
        }
    }
}

/// A material coefficient: constant, expression of the cell center, or a
/// per-cell CSV table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Number(f64),
    Expr(String),
    Table { file: String },
}

impl Coefficient {
    fn resolve(&self, complex: &CubicalComplex, base: &Path) -> Result<MaterialField, CliError> {
        match self {
            Coefficient::Number(v) => Ok(MaterialField::Constant(*v)),
            Coefficient::Expr(s) => {
                let e = Expression::parse(s)?;
                let values = (0..complex.cell_count(3)).map(|i| e.eval(&complex.center(3, i), 0.0)).collect();
                Ok(MaterialField::per_cell(complex, values)?)
            }
            Coefficient::Table { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                Ok(MaterialField::per_cell(complex, conslaw_core::io::read_material_csv(complex, &text)?)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub epsilon: Coefficient,
    pub nu: Coefficient,
    pub rho: Coefficient,
    pub lambda: Coefficient,
    pub mu: Coefficient,
    pub hbar: f64,
    pub mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<Scalar>,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            epsilon: Coefficient::Number(1.0),
            nu: Coefficient::Number(1.0),
            rho: Coefficient::Number(1.0),
            lambda: Coefficient::Number(1.0),
            mu: Coefficient::Number(1.0),
            hbar: 1.0,
            mass: 1.0,
            potential: None,
        }
    }
}

/// Initial value of a variable: a scalar, a 3-vector, or a 3×3 gradient
/// (component × axis) for vector-valued 1-cochains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldInit {
    Scalar(Scalar),
    Vector(Vec<Scalar>),
    Matrix(Vec<Vec<Scalar>>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_force: Option<Vec<Scalar>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub variable: String,
    pub point: [f64; 3],
    /// Axes spanned by the probed cell, e.g. `"z"` or `"xy"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<String>,
    #[serde(default)]
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Grids checked for `d∘d = 0`.
    pub grids: Vec<Vec<usize>>,
    /// Space-time extents for the split oracle.
    pub oracle: Vec<Vec<usize>>,
    pub trials: usize,
    /// Replacement block table (fault-injection fixtures).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub golden: Option<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            grids: vec![vec![1, 1, 1], vec![4, 4, 4], vec![3, 5, 2], vec![16, 16, 16]],
            oracle: vec![vec![2, 2, 2, 2], vec![3, 3, 3, 3]],
            trials: 100,
            golden: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub initial: BTreeMap<String, FieldInit>,
    #[serde(default)]
    pub sources: SourceConfig,
    #[serde(default, rename = "probe", skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub seed: u64,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Minimal config for `model` on a grid.
    pub fn new(model: &str, extents: &[usize]) -> Self {
        Self {
            model: model.into(),
            grid: GridConfig { extents: extents.to_vec(), spacing: None, length: None, boundary: BoundarySpec::default() },
            time: TimeConfig::default(),
            output: OutputConfig::default(),
            material: MaterialConfig::default(),
            initial: BTreeMap::new(),
            sources: SourceConfig::default(),
            probes: Vec::new(),
            verify: VerifyConfig::default(),
            seed: 0,
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        Ok(toml::to_string(self)?)
    }

    pub fn kind(&self) -> Result<ModelKind, CliError> {
        ModelKind::parse(&self.model).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks shapes and ranges without allocating grid data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.kind()?;
        let g = &self.grid;
        if g.extents.len() != 3 || g.extents.contains(&0) {
            return config_error("grid.extents must hold three positive integers");
        }
        for (name, v) in [("spacing", &g.spacing), ("length", &g.length)] {
            if let Some(v) = v {
                if v.len() != 3 || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return config_error(format!("grid.{name} must hold three positive numbers"));
                }
            }
        }
        if g.spacing.is_some() && g.length.is_some() {
            return config_error("give either grid.spacing or grid.length, not both");
        }
        if let BoundarySpec::PerAxis(b) = &g.boundary {
            if b.len() != 3 {
                return config_error("grid.boundary must be one value or three");
            }
        }
        let t = &self.time;
        if !(t.cfl_fraction.is_finite() && t.cfl_fraction > 0.0) {
            return config_error("time.cfl_fraction must be positive");
        }
        if let Some(dt) = t.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return config_error("time.dt must be positive");
            }
        }
        let m = &self.material;
        if !(m.hbar > 0.0 && m.mass > 0.0 && m.hbar.is_finite() && m.mass.is_finite()) {
            return config_error("material.hbar and material.mass must be positive");
        }
        let names = self.variable_names()?;
        for key in self.initial.keys() {
            if !names.contains(&key.as_str()) && !(key == "displacement" && self.kind()? == ModelKind::Elasticity) {
                return config_error(format!("initial.{key}: model {} has variables {}", self.model, names.join(", ")));
            }
        }
        for p in &self.probes {
            if !names.contains(&p.variable.as_str()) {
                return config_error(format!("probe variable `{}` is not one of {}", p.variable, names.join(", ")));
            }
            if let Some(o) = &p.orientation {
                orientation_mask(o)?;
            }
        }
        for v in &self.verify.grids {
            if v.len() != 3 || v.contains(&0) {
                return config_error("verify.grids entries must hold three positive extents");
            }
        }
        for v in &self.verify.oracle {
            if v.len() != 4 || v.iter().any(|&n| n == 0 || n > conslaw_core::grid::MAX_EXTENT_4D) {
                return config_error(format!(
                    "verify.oracle entries must hold four extents in 1..={}",
                    conslaw_core::grid::MAX_EXTENT_4D
                ));
            }
        }
        Ok(())
    }

    fn variable_names(&self) -> Result<Vec<&'static str>, CliError> {
        Ok(match self.kind()? {
            ModelKind::Maxwell => vec!["e", "b"],
            ModelKind::Schrodinger => vec!["phi_R", "phi_I"],
            ModelKind::Elasticity => vec!["u", "strain"],
        })
    }

    pub fn complex(&self) -> Result<Arc<CubicalComplex>, CliError> {
        let g = &self.grid;
        let spacing: Vec<f64> = match (&g.spacing, &g.length) {
            (Some(h), _) => h.clone(),
            (None, Some(l)) => l.iter().zip(&g.extents).map(|(l, &n)| l / n as f64).collect(),
            (None, None) => g.extents.iter().map(|&n| 1.0 / n as f64).collect(),
        };
        let periodic: Vec<bool> = match &g.boundary {
            BoundarySpec::All(b) => vec![*b == Boundary::Periodic; 3],
            BoundarySpec::PerAxis(v) => v.iter().map(|b| *b == Boundary::Periodic).collect(),
        };
        Ok(Arc::new(CubicalComplex::with_periodicity(&g.extents, &spacing, &periodic)?))
    }

    /// Whether any axis carries the zero Dirichlet condition.
    pub fn has_dirichlet(&self) -> bool {
        match &self.grid.boundary {
            BoundarySpec::All(b) => *b == Boundary::DirichletZero,
            BoundarySpec::PerAxis(v) => v.contains(&Boundary::DirichletZero),
        }
    }

    pub fn build_model(&self, complex: &Arc<CubicalComplex>) -> Result<Arc<ModelSpec>, CliError> {
        let m = &self.material;
        let base = &self.base_dir;
        let vec3 = |v: &Option<Vec<Scalar>>, name: &str| -> Result<Option<[Expression; 3]>, CliError> {
            match v {
                None => Ok(None),
                Some(v) if v.len() == 3 => Ok(Some([v[0].expression()?, v[1].expression()?, v[2].expression()?])),
                Some(_) => config_error(format!("sources.{name} needs three components")),
            }
        };
        let spec = match self.kind()? {
            ModelKind::Maxwell => {
                let params = MaxwellParams {
                    epsilon: m.epsilon.resolve(complex, base)?,
                    nu: m.nu.resolve(complex, base)?,
                    current: vec3(&self.sources.current, "current")?.map(vector_fn),
                    charge: self.sources.charge.as_ref().map(|q| q.expression().map(|e| e.scalar_fn())).transpose()?,
                };
                if self.model == "yang-mills" {
                    yang_mills_spec(complex.clone(), params)?
                } else {
                    maxwell_spec(complex.clone(), params)?
                }
            }
            ModelKind::Schrodinger => schrodinger_spec(
                complex.clone(),
                SchrodingerParams {
                    hbar: m.hbar,
                    mass: m.mass,
                    potential: m.potential.as_ref().map(|v| v.expression().map(|e| e.scalar_fn())).transpose()?,
                },
            )?,
            ModelKind::Elasticity => elasticity_spec(
                complex.clone(),
                ElasticityParams {
                    rho: m.rho.resolve(complex, base)?,
                    lame: LameField { lambda: m.lambda.resolve(complex, base)?, mu: m.mu.resolve(complex, base)? },
                    body_force: vec3(&self.sources.body_force, "body_force")?.map(vector_fn),
                },
            )?,
        };
        Ok(Arc::new(spec))
    }

    /// Initial cochains of every model variable at `t = 0`; absent entries
    /// are zero.
    pub fn initial_values(&self, model: &ModelSpec) -> Result<Vec<Cochain>, CliError> {
        let c = &model.complex;
        let mut out = Vec::with_capacity(model.variables.len());
        for v in &model.variables {
            let value = match self.initial.get(&v.name) {
                None => Cochain::zeros(c.clone(), v.degree, v.fiber, Placement::Primal)?,
                Some(init) => project_init(c, v.degree, v.fiber, init, &v.name)?,
            };
            out.push(value);
        }
        if let (Some(init), Some(idx)) = (self.initial.get("displacement"), model.variable_index("strain")) {
            // strain = d(displacement), exactly
            let nu = project_init(c, 0, 3, init, "displacement")?;
            let d = c.exterior_derivative(0)?;
            let (nv, ne) = (c.cell_count(0), c.cell_count(1));
            let mut s = vec![0.0; 3 * ne];
            for k in 0..3 {
                d.apply_into(&nu.values()[k * nv..(k + 1) * nv], 1.0, &mut s[k * ne..(k + 1) * ne]);
            }
            out[idx] = Cochain::from_values(c.clone(), 1, 3, Placement::Primal, s)?;
        }
        Ok(out)
    }

    pub fn probes(&self, model: &ModelSpec) -> Result<Vec<Probe>, CliError> {
        self.probes
            .iter()
            .map(|p| {
                let var = model.variable_index(&p.variable).expect("validated");
                let mask = p.orientation.as_deref().map(orientation_mask).transpose()?;
                Ok(Probe::nearest(model, var, p.point, mask, p.component)?)
            })
            .collect()
    }
}

pub fn orientation_mask(s: &str) -> Result<u8, CliError> {
    let mut m = 0u8;
    for ch in s.chars() {
        let bit = match ch {
            'x' => 1,
            'y' => 2,
            'z' => 4,
            _ => return config_error(format!("orientation `{s}` may only contain x, y, z")),
        };
        if m & bit != 0 {
            return config_error(format!("orientation `{s}` repeats an axis"));
        }
        m |= bit;
    }
    Ok(m)
}

fn project_init(c: &Arc<CubicalComplex>, degree: usize, fiber: usize, init: &FieldInit, name: &str) -> Result<Cochain, CliError> {
    let bad = || config_error(format!("initial.{name} has the wrong shape for a degree-{degree} cochain with fiber {fiber}"));
    Ok(match (degree, fiber, init) {
        (0 | 3, 1, FieldInit::Scalar(s)) => {
            let e = s.expression()?;
            project_function(c, degree, 1, Placement::Primal, |x, _, _| e.eval(x, 0.0))?
        }
        (1 | 2, 1, FieldInit::Vector(v)) if v.len() == 3 => {
            let f = vector_fn([v[0].expression()?, v[1].expression()?, v[2].expression()?]);
            project_proxy(c, degree, Placement::Primal, |x| f(x, 0.0))?
        }
        (0, 3, FieldInit::Vector(v)) if v.len() == 3 => {
            let e = [v[0].expression()?, v[1].expression()?, v[2].expression()?];
            project_function(c, 0, 3, Placement::Primal, |x, _, k| e[k].eval(x, 0.0))?
        }
        (1, 3, FieldInit::Matrix(m)) if m.len() == 3 && m.iter().all(|r| r.len() == 3) => {
            let e: Vec<Vec<Expression>> =
                m.iter().map(|r| r.iter().map(Scalar::expression).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
            // edge value = gradient entry (component k, edge axis) × length
            project_function(c, 1, 3, Placement::Primal, |x, axes, k| e[k][axes[0]].eval(x, 0.0))?
        }
        _ => return bad(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAVITY: &str = r#"
model = "maxwell"
[grid]
extents = [4, 4, 4]
[time]
steps = 10
[initial]
e = ["0", "0", "sin(pi*x)*sin(pi*y)"]
[[probe]]
variable = "e"
point = [0.5, 0.5, 0.5]
orientation = "z"
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::from_toml(CAVITY).unwrap();
        assert_eq!(cfg.time.cfl_fraction, 0.5);
        assert_eq!(cfg.output.dir, "out");
        assert_eq!(cfg.material.epsilon, Coefficient::Number(1.0));
        assert_eq!(cfg.verify.trials, 100);
        assert!(cfg.has_dirichlet());
    }

    #[test]
    fn builds_model_and_initial_values() {
        let cfg = RunConfig::from_toml(CAVITY).unwrap();
        let c = cfg.complex().unwrap();
        let m = cfg.build_model(&c).unwrap();
        let init = cfg.initial_values(&m).unwrap();
        assert_eq!(init.len(), 2);
        assert!(init[0].norm_max() > 0.0);
        assert_eq!(cfg.probes(&m).unwrap().len(), 1);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_toml("model = \"dirac\"\n[grid]\nextents = [2,2,2]").is_err());
        assert!(RunConfig::from_toml("model = \"maxwell\"\n[grid]\nextents = [2,2]").is_err());
        assert!(RunConfig::from_toml("model = \"maxwell\"\n[grid]\nextents = [2,2,2]\n[initial]\nu = \"x\"").is_err());
        assert!(RunConfig::from_toml("model = \"maxwell\"\n[grid]\nextents = [2,2,2]\nbogus = 1").is_err());
        assert!(RunConfig::from_toml("model = \"maxwell\"\n[grid]\nextents = [2,2,2]\n[time]\ncfl_fraction = -1").is_err());
    }

    #[test]
    fn displacement_initializes_strain_exactly() {
        let text = "model = \"elasticity\"\n[grid]\nextents = [3,2,2]\n[initial]\ndisplacement = [\"x*x\", \"0\", \"y\"]";
        let cfg = RunConfig::from_toml(text).unwrap();
        let c = cfg.complex().unwrap();
        let m = cfg.build_model(&c).unwrap();
        let init = cfg.initial_values(&m).unwrap();
        let s = &init[1];
        // y-edges carry Δ(z-component y) = Δy = 0.5 in component 2
        let ne = c.cell_count(1);
        let y_edges = c.orientation_range(1, 0b010).unwrap();
        assert!(y_edges.clone().all(|e| (s.values()[2 * ne + e] - 0.5).abs() < 1e-15));
    }

    #[test]
    fn orientation_masks() {
        assert_eq!(orientation_mask("xz").unwrap(), 0b101);
        assert!(orientation_mask("xx").is_err());
        assert!(orientation_mask("w").is_err());
    }
}
