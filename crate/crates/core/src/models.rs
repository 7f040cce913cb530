//! Physics models as slot-binding tables over the block operator.
//!
//! A [`ModelSpec`] names the physical variables (each a primal cochain living
//! on integer or half-integer time levels), expresses every assigned field
//! slot and source slot as a linear expression in those variables, supplies
//! the material Hodge of each slot, and says which row of the block system
//! advances which variable. The block operator itself never sees a model.
//!
//! Built-ins:
//!
//! * Maxwell: `F1s = -e`, `f2s = b`, `g1s = ⋆j`, `G0 = -⋆q`, Hodges `ε` on `F1s`
//!   and `ν` on `f2s`; `b` advances by row 5 and `e` by row 4.
//! * Elasticity: `F0 = u`, `f1s = ε`, `g0 = -⋆f_v`, Hodges `ρ` on `F0` and the
//!   isotropic stiffness on `f1s`; `ε` advances by row 3 and `u` by row 8.
//! * Schrödinger: two parts. The primal part holds `F0 = ħφ_R`,
//!   `f1s = (ħ/2m) q_R` with `q_R = -ħ dφ_R`; the dual part holds
//!   `f3s = ħφ_I`, `F2s = (ħ/2m) q_I` with `q_I = ħ⋆d⋆φ_I`, where the dual
//!   3-form `φ_I` is stored through a vertex-collocated scalar `ψ`. The
//!   constraint `⋆φ_R = -φ_I` couples the parts through their time blocks:
//!   `∂_t f3s = -ħ⋆∂_tφ_R` and `⋆∂_t⋆F0 = -ħ∂_tψ`. Rates of `q_R`, `q_I`
//!   are neglected.

use std::fmt;
use std::sync::Arc;

use crate::cochain::{project_function, project_proxy, Cochain, FieldSlot, GeneralField, Placement, SlotKind, SourceField, SourceSlot};
use crate::conservation::{assemble_block_operator, BlockKind, BlockOperator, SlotRates};
use crate::error::{invalid, Error, Result};
use crate::grid::{CubicalComplex, MAX_DIM};
use crate::hodge::{build_elastic_hodge, build_hodge, vacuum_hodge, HodgeMap, LameField, MaterialField, MaterialTag, SlotHodges};

/// Scalar field of position and time.
pub type ScalarFn = Arc<dyn Fn(&[f64; MAX_DIM], f64) -> f64 + Send + Sync>;
/// Vector field of position and time.
pub type VectorFn = Arc<dyn Fn(&[f64; MAX_DIM], f64) -> [f64; 3] + Send + Sync>;
/// Time-dependent source cochain.
pub type SourceFn = Arc<dyn Fn(f64) -> Result<Cochain> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Maxwell,
    Schrodinger,
    Elasticity,
}

impl ModelKind {
    pub const NAMES: [&'static str; 4] = ["maxwell", "schrodinger", "elasticity", "yang-mills"];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "maxwell" | "yang-mills" => Ok(ModelKind::Maxwell),
            "schrodinger" | "schroedinger" => Ok(ModelKind::Schrodinger),
            "elasticity" => Ok(ModelKind::Elasticity),
            other => invalid(format!("unknown model `{other}`; available: {}", Self::NAMES.join(", "))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeLevel {
    /// Lives at `t = nΔt`.
    Integer,
    /// Lives at `t = (n+½)Δt`.
    Half,
}

/// A state variable: a primal cochain.
#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub degree: usize,
    pub fiber: usize,
    pub level: TimeLevel,
}

/// Map applied to a variable inside a binding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermOp {
    /// primal `p` to primal `p`
    Identity,
    /// `D_p`: primal `p` to primal `p+1`
    Derivative,
    /// vacuum `H_p`: primal `p` to dual `3-p`
    Hodge,
    /// `H_{p+1} D_p`: primal `p` to dual `2-p`
    HodgeDerivative,
}

impl TermOp {
    fn output(self, p: usize) -> (usize, Placement) {
        match self {
            TermOp::Identity => (p, Placement::Primal),
            TermOp::Derivative => (p + 1, Placement::Primal),
            TermOp::Hodge => (3 - p, Placement::Dual),
            TermOp::HodgeDerivative => (2 - p, Placement::Dual),
        }
    }
}

/// `coef · weight ⊙ op(variable)`; `weight` is a per-output-cell factor.
#[derive(Clone, Debug)]
pub struct Term {
    pub var: usize,
    pub coef: f64,
    pub op: TermOp,
    pub weight: Option<Arc<Vec<f64>>>,
}

/// Sum of terms.
#[derive(Clone, Debug, Default)]
pub struct LinearExpr {
    pub terms: Vec<Term>,
}

impl LinearExpr {
    pub fn term(var: usize, coef: f64, op: TermOp) -> Self {
        Self { terms: vec![Term { var, coef, op, weight: None }] }
    }

    pub fn weighted(var: usize, coef: f64, op: TermOp, weight: Arc<Vec<f64>>) -> Self {
        Self { terms: vec![Term { var, coef, op, weight: Some(weight) }] }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// How a slot's time derivative relates to the variables' rates.
#[derive(Clone, Debug)]
pub enum RateBinding {
    /// The slot expression applied to the variable rates.
    Derived,
    /// An explicit expression in the variable rates.
    Given(LinearExpr),
    /// The rate is dropped from the law.
    Neglected,
}

/// How a slot or source is printed: `sign · coef symbol`.
#[derive(Clone, Debug, PartialEq)]
pub struct Display {
    pub sign: i8,
    pub coef: Option<String>,
    pub symbol: String,
    /// Symbol used in the vector-calculus form.
    pub proxy: String,
}

impl Display {
    pub fn new(sign: i8, symbol: &str) -> Self {
        Self { sign, coef: None, symbol: symbol.into(), proxy: symbol.into() }
    }

    pub fn with_coef(mut self, coef: &str) -> Self {
        self.coef = Some(coef.into());
        self
    }

    pub fn with_proxy(mut self, proxy: &str) -> Self {
        self.proxy = proxy.into();
        self
    }
}

#[derive(Clone, Debug)]
pub struct SlotBinding {
    pub expr: LinearExpr,
    pub rate: RateBinding,
    pub display: Display,
}

#[derive(Clone)]
pub struct SourceBinding {
    /// State-dependent part.
    pub expr: LinearExpr,
    /// Prescribed part.
    pub external: Option<SourceFn>,
    pub display: Display,
}

impl fmt::Debug for SourceBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceBinding")
            .field("expr", &self.expr)
            .field("external", &self.external.is_some())
            .field("display", &self.display)
            .finish()
    }
}

/// One block system instance with its slot and source tables.
#[derive(Clone, Debug)]
pub struct ModelPart {
    pub name: String,
    pub operator: BlockOperator,
    pub slots: [Option<SlotBinding>; 8],
    pub sources: [Option<SourceBinding>; 8],
}

impl ModelPart {
    pub fn placement(&self) -> Placement {
        self.operator.placement()
    }

    pub fn slot(&self, slot: FieldSlot) -> Option<&SlotBinding> {
        self.slots[slot.index()].as_ref()
    }

    pub fn source(&self, slot: SourceSlot) -> Option<&SourceBinding> {
        self.sources[slot.index()].as_ref()
    }

    /// Rows with a block acting on an assigned slot.
    pub fn active_rows(&self) -> Vec<SourceSlot> {
        SourceSlot::ALL
            .into_iter()
            .filter(|&r| self.operator.row_blocks(r).any(|b| self.slot(b.col).is_some()))
            .collect()
    }
}

/// Which row advances which variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Evolution {
    pub var: usize,
    pub part: usize,
    pub row: SourceSlot,
}

/// Stability limit of the explicit scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CflRule {
    /// Wave propagation at speed at most `c_max`.
    Wave { c_max: f64 },
    /// Split Schrödinger leapfrog.
    Schrodinger { hbar: f64, mass: f64, v_max: f64 },
}

/// Schrödinger time steps use this fraction of the spectral bound.
pub const SCHRODINGER_SAFETY: f64 = 0.9;

/// One contribution `½ coef · xᵀ H x` to the monitored quadratic form; for
/// half-level variables the two levels around the integer time are paired.
#[derive(Clone, Debug)]
pub struct MonitorTerm {
    pub var: usize,
    pub coef: f64,
    pub hodge: HodgeMap,
}

#[derive(Clone, Debug)]
pub struct Monitor {
    pub label: &'static str,
    pub terms: Vec<MonitorTerm>,
}

#[derive(Clone, Debug)]
pub struct TextbookRow {
    pub part: usize,
    pub row: SourceSlot,
    pub text: &'static str,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    pub fiber: usize,
    pub complex: Arc<CubicalComplex>,
    pub variables: Vec<Variable>,
    pub parts: Vec<ModelPart>,
    pub evolutions: Vec<Evolution>,
    pub cfl: CflRule,
    pub monitor: Monitor,
    pub notes: Vec<String>,
    pub textbook: Vec<TextbookRow>,
    vacuum: Vec<HodgeMap>,
}

#[derive(Clone)]
pub struct MaxwellParams {
    pub epsilon: MaterialField,
    pub nu: MaterialField,
    pub current: Option<VectorFn>,
    pub charge: Option<ScalarFn>,
}

impl MaxwellParams {
    pub fn vacuum() -> Self {
        Self { epsilon: MaterialField::Constant(1.0), nu: MaterialField::Constant(1.0), current: None, charge: None }
    }
}

#[derive(Clone)]
pub struct SchrodingerParams {
    pub hbar: f64,
    pub mass: f64,
    pub potential: Option<ScalarFn>,
}

#[derive(Clone)]
pub struct ElasticityParams {
    pub rho: MaterialField,
    pub lame: LameField,
    pub body_force: Option<VectorFn>,
}

fn check_3d(complex: &CubicalComplex) -> Result<()> {
    if complex.dim() != 3 {
        return invalid(format!("models run on 3D complexes, got dimension {}", complex.dim()));
    }
    Ok(())
}

fn vacuum_set(complex: &Arc<CubicalComplex>) -> Result<Vec<HodgeMap>> {
    (0..=3).map(|p| vacuum_hodge(complex, p)).collect()
}

/// Maxwell's equations with `e` on edges (integer levels) and `b` on faces
/// (half levels).
pub fn maxwell_spec(complex: Arc<CubicalComplex>, params: MaxwellParams) -> Result<ModelSpec> {
    check_3d(&complex)?;
    params.epsilon.validate_positive("epsilon")?;
    params.nu.validate_positive("nu")?;
    let eps = build_hodge(&complex, 1, &params.epsilon, MaterialTag::Permittivity)?;
    let nu = build_hodge(&complex, 2, &params.nu, MaterialTag::Reluctivity)?;
    let hodges = SlotHodges::vacuum(complex.clone(), Placement::Primal)?
        .with(FieldSlot::T1, eps.clone())?
        .with(FieldSlot::S2, nu.clone())?;
    let operator = assemble_block_operator(&hodges)?;

    let (e, b) = (0, 1);
    let variables = vec![
        Variable { name: "e".into(), degree: 1, fiber: 1, level: TimeLevel::Integer },
        Variable { name: "b".into(), degree: 2, fiber: 1, level: TimeLevel::Half },
    ];
    let mut slots: [Option<SlotBinding>; 8] = Default::default();
    slots[FieldSlot::T1.index()] = Some(SlotBinding {
        expr: LinearExpr::term(e, -1.0, TermOp::Identity),
        rate: RateBinding::Derived,
        display: Display::new(-1, "e"),
    });
    slots[FieldSlot::S2.index()] = Some(SlotBinding {
        expr: LinearExpr::term(b, 1.0, TermOp::Identity),
        rate: RateBinding::Derived,
        display: Display::new(1, "b"),
    });
    let mut sources: [Option<SourceBinding>; 8] = Default::default();
    let c2 = complex.clone();
    let current = params.current.clone();
    sources[SourceSlot::S1.index()] = Some(SourceBinding {
        expr: LinearExpr::default(),
        external: current.map(|j| {
            Arc::new(move |t: f64| project_proxy(&c2, 1, Placement::Primal, |x| j(x, t))) as SourceFn
        }),
        display: Display::new(1, "⋆_s j").with_proxy("j"),
    });
    let c3 = complex.clone();
    sources[SourceSlot::T0.index()] = Some(SourceBinding {
        expr: LinearExpr::default(),
        external: params.charge.clone().map(|q| {
            Arc::new(move |t: f64| project_function(&c3, 0, 1, Placement::Primal, |x, _, _| -q(x, t))) as SourceFn
        }),
        display: Display::new(-1, "⋆_s q").with_proxy("q"),
    });

    let c_max = (params.nu.max() / params.epsilon.min()).sqrt();
    let part = ModelPart { name: "em".into(), operator, slots, sources };
    ModelSpec::new(
        "maxwell",
        ModelKind::Maxwell,
        1,
        complex.clone(),
        variables,
        vec![part],
        vec![Evolution { var: b, part: 0, row: SourceSlot::T2 }, Evolution { var: e, part: 0, row: SourceSlot::S1 }],
        CflRule::Wave { c_max },
        Monitor {
            label: "energy",
            terms: vec![MonitorTerm { var: e, coef: 1.0, hodge: eps }, MonitorTerm { var: b, coef: 1.0, hodge: nu }],
        },
        vec!["constitutive: d = ⋆_ε e, h = ⋆_ν b".into()],
        vec![
            TextbookRow { part: 0, row: SourceSlot::S3, text: "∇·B = 0" },
            TextbookRow { part: 0, row: SourceSlot::T2, text: "∇×E + ∂B/∂t = 0" },
            TextbookRow { part: 0, row: SourceSlot::S1, text: "∇×H − ∂D/∂t = J" },
            TextbookRow { part: 0, row: SourceSlot::T0, text: "∇·D = ρ_q" },
        ],
    )
}

/// With a trivial connection the Yang-Mills system reduces to Maxwell's; the
/// non-abelian case is not modelled.
pub fn yang_mills_spec(complex: Arc<CubicalComplex>, params: MaxwellParams) -> Result<ModelSpec> {
    let mut spec = maxwell_spec(complex, params)?;
    spec.name = "yang-mills".into();
    spec.notes.push(
        "alias of maxwell: trivial connection only; the non-abelian curvature term a∧a is out of scope".into(),
    );
    Ok(spec)
}

/// The Schrödinger equation as a primal part in `φ_R` and a dual part in `ψ`
/// (the vertex-collocated representative of `φ_I`).
pub fn schrodinger_spec(complex: Arc<CubicalComplex>, params: SchrodingerParams) -> Result<ModelSpec> {
    check_3d(&complex)?;
    let SchrodingerParams { hbar, mass, ref potential } = params;
    if !(mass > 0.0 && mass.is_finite()) {
        return invalid(format!("mass must be positive, got {mass}"));
    }
    if !(hbar > 0.0 && hbar.is_finite()) {
        return invalid(format!("ħ must be positive, got {hbar}"));
    }
    let v: Vec<f64> = match potential {
        Some(f) => (0..complex.cell_count(0)).map(|i| f(&complex.center(0, i), 0.0)).collect(),
        None => vec![0.0; complex.cell_count(0)],
    };
    if v.iter().any(|x| !x.is_finite()) {
        return invalid("potential must be finite at every vertex");
    }
    let v_max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let v = Arc::new(v);
    let kin = hbar * hbar / (2.0 * mass);
    let (phi, psi) = (0, 1);
    let variables = vec![
        Variable { name: "phi_R".into(), degree: 0, fiber: 1, level: TimeLevel::Integer },
        Variable { name: "phi_I".into(), degree: 0, fiber: 1, level: TimeLevel::Half },
    ];

    let real = {
        let op = assemble_block_operator(&SlotHodges::vacuum(complex.clone(), Placement::Primal)?)?;
        let mut slots: [Option<SlotBinding>; 8] = Default::default();
        slots[FieldSlot::T0.index()] = Some(SlotBinding {
            expr: LinearExpr::term(phi, hbar, TermOp::Identity),
            rate: RateBinding::Given(LinearExpr::term(psi, -hbar, TermOp::Identity)),
            display: Display::new(1, "φ_R").with_coef("ħ"),
        });
        slots[FieldSlot::S1.index()] = Some(SlotBinding {
            expr: LinearExpr::term(phi, -kin, TermOp::Derivative),
            rate: RateBinding::Neglected,
            display: Display::new(1, "q_R").with_coef("ħ/2m"),
        });
        let mut sources: [Option<SourceBinding>; 8] = Default::default();
        sources[SourceSlot::T1.index()] = Some(SourceBinding {
            expr: LinearExpr::term(phi, -hbar, TermOp::Derivative),
            external: None,
            display: Display::new(1, "q_R"),
        });
        sources[SourceSlot::S0.index()] = Some(SourceBinding {
            expr: LinearExpr::weighted(phi, -1.0, TermOp::Identity, v.clone()),
            external: None,
            display: Display::new(-1, "Vφ_R"),
        });
        ModelPart { name: "R".into(), operator: op, slots, sources }
    };

    let imag = {
        let op = assemble_block_operator(&SlotHodges::vacuum(complex.clone(), Placement::Dual)?)?;
        let mut slots: [Option<SlotBinding>; 8] = Default::default();
        slots[FieldSlot::S3.index()] = Some(SlotBinding {
            expr: LinearExpr::term(psi, hbar, TermOp::Hodge),
            rate: RateBinding::Given(LinearExpr::term(phi, -hbar, TermOp::Hodge)),
            display: Display::new(1, "φ_I").with_coef("ħ"),
        });
        slots[FieldSlot::T2.index()] = Some(SlotBinding {
            expr: LinearExpr::term(psi, kin, TermOp::HodgeDerivative),
            rate: RateBinding::Neglected,
            display: Display::new(1, "q_I").with_coef("ħ/2m"),
        });
        let mut sources: [Option<SourceBinding>; 8] = Default::default();
        sources[SourceSlot::S2.index()] = Some(SourceBinding {
            expr: LinearExpr::term(psi, hbar, TermOp::HodgeDerivative),
            external: None,
            display: Display::new(1, "q_I"),
        });
        sources[SourceSlot::T3.index()] = Some(SourceBinding {
            expr: LinearExpr::weighted(psi, -1.0, TermOp::Hodge, v.clone()),
            external: None,
            display: Display::new(-1, "Vφ_I"),
        });
        ModelPart { name: "I".into(), operator: op, slots, sources }
    };

    let h0 = vacuum_hodge(&complex, 0)?;
    ModelSpec::new(
        "schrodinger",
        ModelKind::Schrodinger,
        1,
        complex.clone(),
        variables,
        vec![real, imag],
        vec![Evolution { var: psi, part: 0, row: SourceSlot::S0 }, Evolution { var: phi, part: 1, row: SourceSlot::T3 }],
        CflRule::Schrodinger { hbar, mass, v_max },
        Monitor {
            label: "norm",
            terms: vec![
                MonitorTerm { var: phi, coef: 2.0, hodge: h0.clone() },
                MonitorTerm { var: psi, coef: 2.0, hodge: h0 },
            ],
        },
        vec![
            "q_R = -ħ d^s φ_R and q_I = ħ ⋆_s d^s ⋆_s φ_I (∂_t q neglected)".into(),
            "constraint -⋆_s φ_R = φ_I links the time blocks of the two parts".into(),
        ],
        vec![
            TextbookRow { part: 0, row: SourceSlot::S0, text: "ħ ∂_t φ_I = (ħ²/2m) Δφ_R − Vφ_R" },
            TextbookRow { part: 1, row: SourceSlot::T3, text: "ħ ∂_t φ_R = −(ħ²/2m) Δφ_I + Vφ_I" },
        ],
    )
}

/// Small-strain elasticity with velocity `u` on vertices (integer levels)
/// and strain `ε` on edges (half levels), both vector-valued.
pub fn elasticity_spec(complex: Arc<CubicalComplex>, params: ElasticityParams) -> Result<ModelSpec> {
    check_3d(&complex)?;
    params.rho.validate_positive("rho")?;
    let rho = build_hodge(&complex, 0, &params.rho, MaterialTag::Density)?;
    let stiff = build_elastic_hodge(&complex, &params.lame)?;
    let hodges = SlotHodges::vacuum(complex.clone(), Placement::Primal)?
        .with(FieldSlot::T0, rho.clone())?
        .with(FieldSlot::S1, stiff.clone())?;
    let operator = assemble_block_operator(&hodges)?;
    let (u, eps) = (0, 1);
    let variables = vec![
        Variable { name: "u".into(), degree: 0, fiber: 3, level: TimeLevel::Integer },
        Variable { name: "strain".into(), degree: 1, fiber: 3, level: TimeLevel::Half },
    ];
    let mut slots: [Option<SlotBinding>; 8] = Default::default();
    slots[FieldSlot::T0.index()] = Some(SlotBinding {
        expr: LinearExpr::term(u, 1.0, TermOp::Identity),
        rate: RateBinding::Derived,
        display: Display::new(1, "u"),
    });
    slots[FieldSlot::S1.index()] = Some(SlotBinding {
        expr: LinearExpr::term(eps, 1.0, TermOp::Identity),
        rate: RateBinding::Derived,
        display: Display::new(1, "ε"),
    });
    let mut sources: [Option<SourceBinding>; 8] = Default::default();
    let c2 = complex.clone();
    sources[SourceSlot::S0.index()] = Some(SourceBinding {
        expr: LinearExpr::default(),
        external: params.body_force.clone().map(|f| {
            Arc::new(move |t: f64| project_function(&c2, 0, 3, Placement::Primal, |x, _, c| -f(x, t)[c])) as SourceFn
        }),
        display: Display::new(-1, "⋆_s f_v").with_proxy("f_v"),
    });
    let c_max = (params.lame.max_p_modulus(&complex) / params.rho.min()).sqrt();
    let part = ModelPart { name: "solid".into(), operator, slots, sources };
    ModelSpec::new(
        "elasticity",
        ModelKind::Elasticity,
        3,
        complex.clone(),
        variables,
        vec![part],
        vec![Evolution { var: eps, part: 0, row: SourceSlot::T1 }, Evolution { var: u, part: 0, row: SourceSlot::S0 }],
        CflRule::Wave { c_max },
        Monitor {
            label: "energy",
            terms: vec![MonitorTerm { var: u, coef: 1.0, hodge: rho }, MonitorTerm { var: eps, coef: 1.0, hodge: stiff }],
        },
        vec!["constitutive: σ = ⋆_s^C ε (isotropic Lamé), u = ∂_t ν".into()],
        vec![
            TextbookRow { part: 0, row: SourceSlot::T1, text: "−∂_t ε + grad u = 0" },
            TextbookRow { part: 0, row: SourceSlot::S2, text: "curl ε = 0" },
            TextbookRow { part: 0, row: SourceSlot::S0, text: "ρ ∂_t u − div σ = f_v" },
        ],
    )
}

impl ModelSpec {
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        kind: ModelKind,
        fiber: usize,
        complex: Arc<CubicalComplex>,
        variables: Vec<Variable>,
        parts: Vec<ModelPart>,
        evolutions: Vec<Evolution>,
        cfl: CflRule,
        monitor: Monitor,
        notes: Vec<String>,
        textbook: Vec<TextbookRow>,
    ) -> Result<Self> {
        let vacuum = vacuum_set(&complex)?;
        let spec = Self { name: name.into(), kind, fiber, complex, variables, parts, evolutions, cfl, monitor, notes, textbook, vacuum };
        spec.validate()?;
        Ok(spec)
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    fn expr_shape(&self, expr: &LinearExpr) -> Result<Option<(usize, Placement)>> {
        let mut shape = None;
        for t in &expr.terms {
            let var = self.variables.get(t.var).ok_or_else(|| Error::InvalidArgument("term refers to unknown variable".into()))?;
            let s = t.op.output(var.degree);
            if shape.is_some_and(|x| x != s) {
                return invalid("terms of one expression produce different cochain shapes");
            }
            shape = Some(s);
        }
        Ok(shape)
    }

    /// Structural checks: slot degrees, placements, one evolution per
    /// variable with a diagonal single-term time binding.
    pub fn validate(&self) -> Result<()> {
        for v in &self.variables {
            if v.fiber != self.fiber {
                return invalid(format!("variable {} has fiber {}, model has {}", v.name, v.fiber, self.fiber));
            }
        }
        for part in &self.parts {
            for slot in FieldSlot::ALL {
                let Some(b) = part.slot(slot) else { continue };
                if let Some((deg, pl)) = self.expr_shape(&b.expr)? {
                    if deg != slot.degree() || pl != part.placement() {
                        return invalid(format!(
                            "slot {} of part {} is bound to a {pl} {deg}-cochain",
                            slot.label(),
                            part.name
                        ));
                    }
                }
                if let RateBinding::Given(r) = &b.rate {
                    if let Some((deg, pl)) = self.expr_shape(r)? {
                        if deg != slot.degree() || pl != part.placement() {
                            return invalid(format!("rate of slot {} has the wrong shape", slot.label()));
                        }
                    }
                }
            }
            for row in SourceSlot::ALL {
                let Some(s) = part.source(row) else { continue };
                if let Some((deg, pl)) = self.expr_shape(&s.expr)? {
                    if deg != row.degree() || pl != part.placement() {
                        return invalid(format!("source {} of part {} has the wrong shape", row.label(), part.name));
                    }
                }
            }
        }
        for (i, v) in self.variables.iter().enumerate() {
            let n = self.evolutions.iter().filter(|e| e.var == i).count();
            if n != 1 {
                return invalid(format!("variable {} must be advanced by exactly one row, found {n}", v.name));
            }
        }
        for ev in &self.evolutions {
            self.rate_term(ev)?;
        }
        Ok(())
    }

    /// The single diagonal term tying an evolution row's time block to the
    /// evolved variable's rate.
    pub fn rate_term(&self, ev: &Evolution) -> Result<Term> {
        let part = &self.parts[ev.part];
        let col = part.operator.temporal_block(ev.row).col;
        let binding = part
            .slot(col)
            .ok_or_else(|| Error::InvalidArgument(format!("row {} has no time term in part {}", ev.row.label(), part.name)))?;
        let expr = match &binding.rate {
            RateBinding::Derived => &binding.expr,
            RateBinding::Given(e) => e,
            RateBinding::Neglected => {
                return invalid(format!("row {} cannot advance a variable: its time term is neglected", ev.row.label()))
            }
        };
        match expr.terms.as_slice() {
            [t] if t.var == ev.var && matches!(t.op, TermOp::Identity | TermOp::Hodge) && t.weight.is_none() => Ok(t.clone()),
            _ => invalid(format!("the time term of row {} must be a single diagonal term in the evolved variable", ev.row.label())),
        }
    }

    /// Evaluates an expression; `None` if it has no terms.
    pub fn eval_expr(&self, expr: &LinearExpr, values: &[Cochain]) -> Result<Option<Cochain>> {
        let Some((deg, pl)) = self.expr_shape(expr)? else { return Ok(None) };
        let mut out: Option<Cochain> = None;
        for t in &expr.terms {
            let x = &values[t.var];
            let p = x.degree();
            let mut y = match t.op {
                TermOp::Identity => x.clone(),
                TermOp::Derivative => apply_incidence(self.complex.exterior_derivative(p)?, x, p + 1, Placement::Primal)?,
                TermOp::Hodge => self.vacuum[p].apply(x)?,
                TermOp::HodgeDerivative => {
                    let dx = apply_incidence(self.complex.exterior_derivative(p)?, x, p + 1, Placement::Primal)?;
                    self.vacuum[p + 1].apply(&dx)?
                }
            };
            if let Some(w) = &t.weight {
                for chunk in y.values_mut().chunks_mut(w.len()) {
                    chunk.iter_mut().zip(w.iter()).for_each(|(v, w)| *v *= w);
                }
            }
            match &mut out {
                Some(o) => o.axpy(t.coef, &y)?,
                None => {
                    if t.coef != 1.0 {
                        y.scale(t.coef);
                    }
                    out = Some(y);
                }
            }
        }
        debug_assert!(out.as_ref().is_none_or(|o| o.degree() == deg && o.placement() == pl));
        Ok(out)
    }

    /// Diagonal of a [`Term`] with an `Identity` or `Hodge` map.
    pub fn term_diagonal(&self, t: &Term) -> Vec<f64> {
        let p = self.variables[t.var].degree;
        let n = self.complex.cell_count(p);
        match t.op {
            TermOp::Hodge => self.vacuum[p].weights().expect("vacuum Hodge is diagonal").iter().map(|w| t.coef * w).collect(),
            _ => vec![t.coef; n],
        }
    }

    /// Field slots of one part from the variable values.
    pub fn part_field(&self, part: usize, values: &[Cochain]) -> Result<GeneralField> {
        self.part_field_where(part, values, |_| true)
    }

    /// Only the slots selected by `keep`; the others stay unset.
    pub fn part_field_where(&self, part: usize, values: &[Cochain], keep: impl Fn(FieldSlot) -> bool) -> Result<GeneralField> {
        let p = &self.parts[part];
        let mut f = GeneralField::zero(self.complex.clone(), self.fiber, p.placement())?;
        for slot in FieldSlot::ALL.into_iter().filter(|&s| keep(s)) {
            if let Some(b) = p.slot(slot) {
                if let Some(c) = self.eval_expr(&b.expr, values)? {
                    f.set(slot, c)?;
                }
            }
        }
        Ok(f)
    }

    /// Slot rates of one part from the variable rates (`None` = zero).
    pub fn part_rates(&self, part: usize, rates: &[Option<Cochain>]) -> Result<SlotRates> {
        let p = &self.parts[part];
        let zeros: Vec<Cochain> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| match &rates[i] {
                Some(r) => Ok(r.clone()),
                None => Cochain::zeros(self.complex.clone(), v.degree, v.fiber, Placement::Primal),
            })
            .collect::<Result<_>>()?;
        let mut f = GeneralField::zero(self.complex.clone(), self.fiber, p.placement())?;
        for slot in FieldSlot::ALL {
            let Some(b) = p.slot(slot) else { continue };
            let expr = match &b.rate {
                RateBinding::Derived => &b.expr,
                RateBinding::Given(e) => e,
                RateBinding::Neglected => continue,
            };
            if expr.terms.iter().all(|t| rates[t.var].is_none()) {
                continue;
            }
            if let Some(c) = self.eval_expr(expr, &zeros)? {
                f.set(slot, c)?;
            }
        }
        Ok(SlotRates(f))
    }

    /// Source slots of one part at time `t`.
    pub fn part_sources(&self, part: usize, values: &[Cochain], t: f64) -> Result<SourceField> {
        let p = &self.parts[part];
        let mut g = SourceField::zero(self.complex.clone(), self.fiber, p.placement())?;
        for row in SourceSlot::ALL {
            if let Some(a) = self.part_source(part, row, values, t)? {
                g.set(row, a)?;
            }
        }
        Ok(g)
    }

    /// One source slot of a part at time `t`; `None` if it is zero.
    pub fn part_source(&self, part: usize, row: SourceSlot, values: &[Cochain], t: f64) -> Result<Option<Cochain>> {
        let Some(s) = self.parts[part].source(row) else { return Ok(None) };
        let mut acc = self.eval_expr(&s.expr, values)?;
        if let Some(ext) = &s.external {
            let v = ext(t)?;
            match &mut acc {
                Some(a) => a.axpy(1.0, &v)?,
                None => acc = Some(v),
            }
        }
        Ok(acc)
    }

    /// Rows that carry a nonzero block against an assigned slot, per part.
    pub fn active_rows(&self) -> Vec<(usize, Vec<SourceSlot>)> {
        self.parts.iter().enumerate().map(|(i, p)| (i, p.active_rows())).collect()
    }

    pub fn active_row_numbers(&self, part: usize) -> Vec<usize> {
        self.parts[part].active_rows().into_iter().map(SourceSlot::row_number).collect()
    }

    /// Exterior-calculus form of a row, e.g. `d^s e + ∂_t b = 0`.
    pub fn render_row(&self, part: usize, row: SourceSlot) -> String {
        self.render(part, row, false)
    }

    /// Vector-calculus form of a row, e.g. `curl e + ∂_t b = 0`.
    pub fn render_proxy_row(&self, part: usize, row: SourceSlot) -> String {
        self.render(part, row, true)
    }

    fn render(&self, part: usize, row: SourceSlot, proxy: bool) -> String {
        let p = &self.parts[part];
        let mut lhs = String::new();
        for b in p.operator.row_blocks(row) {
            let Some(binding) = p.slot(b.col) else { continue };
            let d = &binding.display;
            let sign = b.sign * d.sign;
            let body = if proxy {
                proxy_term(b.kind, b.col.degree(), material_symbol(p, b.col), d)
            } else {
                let coef = d.coef.as_ref().map(|c| format!("({c}) ")).unwrap_or_default();
                format!("{coef}{} {}", b.kind.notation(), d.symbol)
            };
            push_signed(&mut lhs, sign, &body);
        }
        let rhs = match p.source(row) {
            Some(s) => {
                let sym = if proxy { &s.display.proxy } else { &s.display.symbol };
                if s.display.sign < 0 {
                    format!("−{sym}")
                } else {
                    sym.clone()
                }
            }
            None => "0".into(),
        };
        format!("{lhs} = {rhs}")
    }
}

fn push_signed(out: &mut String, sign: i8, body: &str) {
    match (out.is_empty(), sign < 0) {
        (true, false) => out.push_str(body),
        (true, true) => {
            out.push('−');
            out.push_str(body);
        }
        (false, false) => {
            out.push_str(" + ");
            out.push_str(body);
        }
        (false, true) => {
            out.push_str(" − ");
            out.push_str(body);
        }
    }
}

fn material_symbol(part: &ModelPart, slot: FieldSlot) -> &'static str {
    match part.operator.hodges().get(slot).map(HodgeMap::tag) {
        Some(MaterialTag::Permittivity) => "ε",
        Some(MaterialTag::Reluctivity) => "ν",
        Some(MaterialTag::Density) => "ρ",
        Some(MaterialTag::Stiffness) => "C",
        _ => "",
    }
}

fn proxy_term(kind: BlockKind, degree: usize, material: &str, d: &Display) -> String {
    let coef = d.coef.as_ref().map(|c| format!("({c}) ")).unwrap_or_default();
    let x = &d.proxy;
    let body = match kind {
        BlockKind::Dt => format!("∂_t {x}"),
        BlockKind::StarDtStar => format!("∂_t {material}{x}"),
        BlockKind::D => format!("{} {x}", ["grad", "curl", "div", ""][degree.min(3)]),
        BlockKind::StarDStar => format!("{} {material}{x}", ["", "div", "curl", "grad"][degree.min(3)]),
    };
    format!("{coef}{body}")
}

fn apply_incidence(d: &crate::sparse::Incidence, x: &Cochain, out_degree: usize, placement: Placement) -> Result<Cochain> {
    let (n_in, n_out) = (d.ncols(), d.nrows());
    let mut out = vec![0.0; n_out * x.fiber()];
    for c in 0..x.fiber() {
        d.apply_into(&x.values()[c * n_in..(c + 1) * n_in], 1.0, &mut out[c * n_out..(c + 1) * n_out]);
    }
    Cochain::from_values(x.complex().clone(), out_degree, x.fiber(), placement, out)
}

/// Which rows are active and the equation each reduces to.
pub fn row_map(model: &ModelSpec) -> String {
    let mut s = format!("model: {}\n", model.name);
    for note in &model.notes {
        s.push_str(&format!("note: {note}\n"));
    }
    s.push_str("part  row  slot  equation\n");
    for (i, part) in model.parts.iter().enumerate() {
        for row in part.active_rows() {
            s.push_str(&format!("{:<5} {:<4} {:<5} {}\n", part.name, row.row_number(), row.label(), model.render_row(i, row)));
        }
    }
    s
}

/// Vector-calculus form of each active row next to the textbook equation.
pub fn vector_proxy_table(model: &ModelSpec) -> String {
    let mut s = format!("model: {}\n", model.name);
    s.push_str("part  row  vector form  |  textbook\n");
    for (i, part) in model.parts.iter().enumerate() {
        for row in part.active_rows() {
            let tb = model.textbook.iter().find(|t| t.part == i && t.row == row).map_or("", |t| t.text);
            s.push_str(&format!("{:<5} {:<4} {}  |  {}\n", part.name, row.row_number(), model.render_proxy_row(i, row), tb));
        }
    }
    s
}
