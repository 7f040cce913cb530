//! Discrete Hodge operators, material coefficients and quadratic energies.
//!
//! A Hodge map of degree `p` takes primal `p`-cochains to dual `(n-p)`-cochains.
//! The diagonal (vacuum) weight of a cell is the measure of its dual cell over
//! its own measure; dual cells are full boxes even at the boundary. Material
//! coefficients given per top-dimensional cell are averaged onto lower cells.

use std::sync::Arc;

use crate::cochain::{same_complex, Cochain, FieldSlot, GeneralField, Placement, SlotKind};
use crate::error::{invalid, mismatch, Error, Result};
use crate::grid::CubicalComplex;
use crate::sparse::SparseMatrix;

/// What a Hodge operator's coefficient stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MaterialTag {
    Vacuum,
    /// ε
    Permittivity,
    /// ν = 1/μ
    Reluctivity,
    /// ρ
    Density,
    /// isotropic stiffness (λ, μ)
    Stiffness,
    /// ħ/2m
    KineticScale,
    Custom(String),
}

impl MaterialTag {
    pub fn name(&self) -> &str {
        match self {
            MaterialTag::Vacuum => "vacuum",
            MaterialTag::Permittivity => "epsilon",
            MaterialTag::Reluctivity => "nu",
            MaterialTag::Density => "rho",
            MaterialTag::Stiffness => "stiffness",
            MaterialTag::KineticScale => "hbar/2m",
            MaterialTag::Custom(s) => s,
        }
    }
}

/// A scalar coefficient, constant or given per top-dimensional cell.
#[derive(Clone, Debug, PartialEq)]
pub enum MaterialField {
    Constant(f64),
    PerCell(Arc<Vec<f64>>),
}

impl MaterialField {
    pub fn constant(value: f64) -> Self {
        MaterialField::Constant(value)
    }

    pub fn per_cell(complex: &CubicalComplex, values: Vec<f64>) -> Result<Self> {
        let n = complex.cell_count(complex.dim());
        if values.len() != n {
            return mismatch(format!("per-cell material needs {n} values, got {}", values.len()));
        }
        Ok(MaterialField::PerCell(Arc::new(values)))
    }

    pub fn min(&self) -> f64 {
        match self {
            MaterialField::Constant(v) => *v,
            MaterialField::PerCell(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            MaterialField::Constant(v) => *v,
            MaterialField::PerCell(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn check_len(&self, complex: &CubicalComplex) -> Result<()> {
        match self {
            MaterialField::PerCell(v) if v.len() != complex.cell_count(complex.dim()) => mismatch(format!(
                "per-cell material has {} values, complex has {} cells",
                v.len(),
                complex.cell_count(complex.dim())
            )),
            _ => Ok(()),
        }
    }

    /// Positivity (and finiteness) of every value.
    pub fn validate_positive(&self, name: &str) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        let good = match self {
            MaterialField::Constant(v) => ok(*v),
            MaterialField::PerCell(v) => v.iter().all(|&x| ok(x)),
        };
        if good {
            Ok(())
        } else {
            invalid(format!("material coefficient `{name}` must be positive and finite"))
        }
    }

    /// Coefficient seen by a `p`-cell: mean over the top cells containing it.
    pub fn at(&self, complex: &CubicalComplex, p: usize, idx: usize) -> f64 {
        match self {
            MaterialField::Constant(v) => *v,
            MaterialField::PerCell(v) => {
                if p == complex.dim() {
                    return v[idx];
                }
                let cells = complex.cofaces_top(p, idx);
                cells.iter().map(|&c| v[c]).sum::<f64>() / cells.len() as f64
            }
        }
    }

    fn on_cells(&self, complex: &CubicalComplex, p: usize) -> Vec<f64> {
        (0..complex.cell_count(p)).map(|i| self.at(complex, p, i)).collect()
    }
}

/// Isotropic Lamé coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LameField {
    pub lambda: MaterialField,
    pub mu: MaterialField,
}

impl LameField {
    pub fn constant(lambda: f64, mu: f64) -> Self {
        Self { lambda: MaterialField::Constant(lambda), mu: MaterialField::Constant(mu) }
    }

    /// Requires `μ > 0` and `3λ + 2μ > 0` cell by cell, which makes the
    /// stiffness positive definite (and in particular `λ + 2μ > 0`).
    pub fn validate(&self, complex: &CubicalComplex) -> Result<()> {
        self.lambda.check_len(complex)?;
        self.mu.check_len(complex)?;
        self.mu.validate_positive("mu")?;
        let n = complex.cell_count(complex.dim());
        for c in 0..n {
            let (l, m) = (self.lambda.at(complex, complex.dim(), c), self.mu.at(complex, complex.dim(), c));
            if !(l.is_finite() && 3.0 * l + 2.0 * m > 0.0) {
                return invalid(format!("Lamé pair (λ={l}, μ={m}) is not positive definite: need 3λ+2μ > 0"));
            }
        }
        Ok(())
    }

    /// Largest `λ + 2μ` over the cells.
    pub fn max_p_modulus(&self, complex: &CubicalComplex) -> f64 {
        let d = complex.dim();
        (0..complex.cell_count(d))
            .map(|c| self.lambda.at(complex, d, c) + 2.0 * self.mu.at(complex, d, c))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
enum HodgeOp {
    Diagonal(Vec<f64>),
    /// Symmetric positive semidefinite map on vector-valued 1-cochains.
    Elastic(SparseMatrix),
}

#[derive(Clone, Debug)]
pub struct HodgeMap {
    complex: Arc<CubicalComplex>,
    degree: usize,
    tag: MaterialTag,
    op: HodgeOp,
}

/// Diagonal Hodge of degree `p` with the given material coefficient.
pub fn build_hodge(complex: &Arc<CubicalComplex>, p: usize, material: &MaterialField, tag: MaterialTag) -> Result<HodgeMap> {
    if p > complex.dim() {
        return invalid(format!("Hodge degree {p} exceeds complex dimension {}", complex.dim()));
    }
    material.check_len(complex)?;
    material.validate_positive(tag.name())?;
    let coef = material.on_cells(complex, p);
    let weights = (0..complex.cell_count(p))
        .map(|i| coef[i] * complex.dual_measure(p, i) / complex.measure(p, i))
        .collect();
    Ok(HodgeMap { complex: complex.clone(), degree: p, tag, op: HodgeOp::Diagonal(weights) })
}

pub fn vacuum_hodge(complex: &Arc<CubicalComplex>, p: usize) -> Result<HodgeMap> {
    build_hodge(complex, p, &MaterialField::Constant(1.0), MaterialTag::Vacuum)
}

/// Stiffness map from strain-like vector-valued 1-cochains to stress-like
/// dual 2-cochains, built as the Hessian of the discrete strain energy
///
/// ```text
/// W = Σ_cells V [ μ Σ_i ⟨s_ii²⟩ + (μ/2) Σ_{i≠j} ⟨s_ij²⟩
///               + μ Σ_{i<j} ⟨ā_ij ā_ji⟩ + (λ/2) (Σ_i ā_ii)² ]
/// ```
///
/// where `s_ij` is component `i` on a `j`-edge divided by `Δx_j`, `⟨·⟩`
/// averages over the cell's four `j`-edges or its two `{i,j}` faces, and `ā`
/// averages `s` over the edges of a face or of the cell. Each cell uses its
/// own Lamé values; rigid motions carry no energy.
pub fn build_elastic_hodge(complex: &Arc<CubicalComplex>, lame: &LameField) -> Result<HodgeMap> {
    if complex.dim() != 3 {
        return invalid("the elastic Hodge is defined on 3D complexes");
    }
    lame.validate(complex)?;
    let h = complex.spacings();
    let vol: f64 = h.iter().product();
    let ne = complex.cell_count(1);
    let edge_index = |cell: &crate::grid::Cell| complex.index_of(cell).expect("edge inside complex");
    let shifted = |cell: crate::grid::Cell, axis: usize| complex.shift(&cell, axis, 1).expect("cell inside complex");
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();

    let add_product = |a: &[(usize, f64)], b: &[(usize, f64)], c: f64, trip: &mut Vec<(usize, usize, f64)>| {
        for &(ra, va) in a {
            for &(rb, vb) in b {
                trip.push((ra, rb, c * va * vb));
                trip.push((rb, ra, c * va * vb));
            }
        }
    };

    for c in 0..complex.cell_count(3) {
        let cell = complex.cell(3, c);
        let (lambda, mu) = (lame.lambda.at(complex, 3, c), lame.mu.at(complex, 3, c));
        // the four j-edges of the cell
        let edges = |j: usize| -> Vec<usize> {
            let others: Vec<usize> = (0..3).filter(|&k| k != j).collect();
            (0..4)
                .map(|corner| {
                    let mut e = crate::grid::Cell { axes: 1 << j, pos: cell.pos };
                    for (bit, &k) in others.iter().enumerate() {
                        if corner & (1 << bit) != 0 {
                            e = shifted(e, k);
                        }
                    }
                    edge_index(&e)
                })
                .collect()
        };
        let mut trace = Vec::with_capacity(12);
        for j in 0..3 {
            let js = edges(j);
            for i in 0..3 {
                let k = if i == j { 2.0 } else { 1.0 };
                for &e in &js {
                    trip.push((i * ne + e, i * ne + e, 0.25 * k * mu * vol / (h[j] * h[j])));
                }
            }
            trace.extend(js.iter().map(|&e| (j * ne + e, 0.25 / h[j])));
        }
        // two faces spanning {a, b}, offset along the remaining axis
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let third = 3 - a - b;
            for side in 0..2 {
                let mut corner = crate::grid::Cell { axes: 0, pos: cell.pos };
                if side == 1 {
                    corner = shifted(corner, third);
                }
                // s_ab averaged over the two b-edges of the face, and s_ba
                let avg = |i: usize, j: usize| -> Vec<(usize, f64)> {
                    let lo = crate::grid::Cell { axes: 1 << j, pos: corner.pos };
                    let hi = shifted(lo, i);
                    vec![(i * ne + edge_index(&lo), 0.5 / h[j]), (i * ne + edge_index(&hi), 0.5 / h[j])]
                };
                add_product(&avg(a, b), &avg(b, a), 0.5 * mu * vol, &mut trip);
            }
        }
        // (λ/2) V (a·ε)² contributes λ V a aᵀ; add_product doubles, so halve
        add_product(&trace, &trace, 0.5 * lambda * vol, &mut trip);
    }

    let k = SparseMatrix::from_triplets(3 * ne, 3 * ne, &trip);
    Ok(HodgeMap { complex: complex.clone(), degree: 1, tag: MaterialTag::Stiffness, op: HodgeOp::Elastic(k) })
}

impl HodgeMap {
    pub fn complex(&self) -> &Arc<CubicalComplex> {
        &self.complex
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn tag(&self) -> &MaterialTag {
        &self.tag
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.op, HodgeOp::Diagonal(_))
    }

    /// Diagonal weights, or `None` for the elastic map.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.op {
            HodgeOp::Diagonal(w) => Some(w),
            HodgeOp::Elastic(_) => None,
        }
    }

    /// The assembled elastic matrix, if this is the stiffness map.
    pub fn matrix(&self) -> Option<&SparseMatrix> {
        match &self.op {
            HodgeOp::Elastic(k) => Some(k),
            HodgeOp::Diagonal(_) => None,
        }
    }

    fn check_input(&self, c: &Cochain, placement: Placement, degree: usize) -> Result<()> {
        if c.placement() != placement || c.degree() != degree {
            return invalid(format!(
                "Hodge of degree {} expects a {placement} {degree}-cochain, got a {} {}-cochain",
                self.degree,
                c.placement(),
                c.degree()
            ));
        }
        if !same_complex(&self.complex, c.complex()) {
            return invalid("Hodge and cochain live on different complexes");
        }
        if matches!(self.op, HodgeOp::Elastic(_)) && c.fiber() != 3 {
            return invalid("the elastic Hodge acts on vector-valued cochains");
        }
        Ok(())
    }

    /// Raw application on component-major values of the given fiber.
    pub fn apply_values(&self, x: &[f64], out: &mut [f64]) {
        match &self.op {
            HodgeOp::Diagonal(w) => {
                for (oc, xc) in out.chunks_mut(w.len()).zip(x.chunks(w.len())) {
                    for ((o, v), w) in oc.iter_mut().zip(xc).zip(w.iter()) {
                        *o = w * v;
                    }
                }
            }
            HodgeOp::Elastic(k) => k.apply_into(x, out),
        }
    }

    /// Raw inverse application; only diagonal maps are invertible here.
    pub fn apply_inverse_values(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.op {
            HodgeOp::Diagonal(w) => {
                for (oc, xc) in out.chunks_mut(w.len()).zip(x.chunks(w.len())) {
                    for ((o, v), w) in oc.iter_mut().zip(xc).zip(w.iter()) {
                        *o = v / w;
                    }
                }
                Ok(())
            }
            HodgeOp::Elastic(_) => invalid("the elastic Hodge is not inverted"),
        }
    }

    /// Primal `p`-cochain to dual `(n-p)`-cochain.
    pub fn apply(&self, c: &Cochain) -> Result<Cochain> {
        self.check_input(c, Placement::Primal, self.degree)?;
        let mut out = vec![0.0; c.values().len()];
        self.apply_values(c.values(), &mut out);
        Cochain::from_values(c.complex().clone(), self.complex.dim() - self.degree, c.fiber(), Placement::Dual, out)
    }

    /// Dual `(n-p)`-cochain back to primal `p`-cochain.
    pub fn apply_inverse(&self, c: &Cochain) -> Result<Cochain> {
        self.check_input(c, Placement::Dual, self.complex.dim() - self.degree)?;
        let mut out = vec![0.0; c.values().len()];
        self.apply_inverse_values(c.values(), &mut out)?;
        Cochain::from_values(c.complex().clone(), self.degree, c.fiber(), Placement::Primal, out)
    }

    /// `aᵀ H b` for primal cochains `a`, `b`.
    pub fn pairing(&self, a: &Cochain, b: &Cochain) -> Result<f64> {
        self.check_input(a, Placement::Primal, self.degree)?;
        self.check_input(b, Placement::Primal, self.degree)?;
        if a.fiber() != b.fiber() {
            return mismatch("paired cochains differ in fiber dimension");
        }
        let mut hb = vec![0.0; b.values().len()];
        self.apply_values(b.values(), &mut hb);
        Ok(a.values().iter().zip(&hb).map(|(x, y)| x * y).sum())
    }

    /// `aᵀ H⁻¹ b` for dual cochains `a`, `b`.
    pub fn inverse_pairing(&self, a: &Cochain, b: &Cochain) -> Result<f64> {
        self.check_input(a, Placement::Dual, self.complex.dim() - self.degree)?;
        self.check_input(b, Placement::Dual, self.complex.dim() - self.degree)?;
        let mut hb = vec![0.0; b.values().len()];
        self.apply_inverse_values(b.values(), &mut hb)?;
        Ok(a.values().iter().zip(&hb).map(|(x, y)| x * y).sum())
    }
}

/// Sign of applying the Hodge star twice to a `p`-form in dimension `n`:
/// Euclidean `(-1)^{p(n-p)}` in three dimensions, Minkowski
/// `(-1)^{p(n-p)+1}` in four.
pub fn double_hodge_sign(n: usize, p: usize) -> Result<i32> {
    if p > n {
        return invalid(format!("degree {p} exceeds dimension {n}"));
    }
    let e = p * (n - p) + usize::from(n == 4);
    Ok(if e.is_multiple_of(2) { 1 } else { -1 })
}

/// Material Hodge attached to each slot of a general field. For dual-placed
/// fields a slot of spatial degree `p` uses a Hodge of primal degree `3-p`.
#[derive(Clone, Debug)]
pub struct SlotHodges {
    complex: Arc<CubicalComplex>,
    placement: Placement,
    maps: [Option<HodgeMap>; 8],
}

impl SlotHodges {
    pub fn empty(complex: Arc<CubicalComplex>, placement: Placement) -> Self {
        Self { complex, placement, maps: Default::default() }
    }

    /// Vacuum Hodge on every slot.
    pub fn vacuum(complex: Arc<CubicalComplex>, placement: Placement) -> Result<Self> {
        let mut s = Self::empty(complex.clone(), placement);
        for slot in FieldSlot::ALL {
            let map = vacuum_hodge(&complex, s.hodge_degree(slot))?;
            s.maps[slot.index()] = Some(map);
        }
        Ok(s)
    }

    pub fn complex(&self) -> &Arc<CubicalComplex> {
        &self.complex
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    /// Primal degree of the Hodge a slot needs.
    pub fn hodge_degree(&self, slot: FieldSlot) -> usize {
        match self.placement {
            Placement::Primal => slot.degree(),
            Placement::Dual => 3 - slot.degree(),
        }
    }

    pub fn set(&mut self, slot: FieldSlot, map: HodgeMap) -> Result<()> {
        if map.degree() != self.hodge_degree(slot) {
            return invalid(format!(
                "slot {} needs a Hodge of degree {}, got {}",
                slot.label(),
                self.hodge_degree(slot),
                map.degree()
            ));
        }
        if !same_complex(&self.complex, map.complex()) {
            return invalid(format!("Hodge for slot {} lives on a different complex", slot.label()));
        }
        self.maps[slot.index()] = Some(map);
        Ok(())
    }

    pub fn with(mut self, slot: FieldSlot, map: HodgeMap) -> Result<Self> {
        self.set(slot, map)?;
        Ok(self)
    }

    pub fn get(&self, slot: FieldSlot) -> Option<&HodgeMap> {
        self.maps[slot.index()].as_ref()
    }

    pub fn require(&self, slot: FieldSlot) -> Result<&HodgeMap> {
        self.get(slot).ok_or_else(|| Error::MissingHodge(slot.label().to_string()))
    }
}

/// `½ Σ_slots ⟨f, ⋆f⟩`, with the fiber trace taken as the Euclidean dot
/// product of components.
pub fn energy(field: &GeneralField, hodges: &SlotHodges) -> Result<f64> {
    if field.placement() != hodges.placement() {
        return invalid("field and Hodge set differ in placement");
    }
    let mut total = 0.0;
    for (slot, c) in field.iter_set() {
        if c.norm_max() == 0.0 {
            continue;
        }
        let h = hodges
            .get(slot)
            .ok_or_else(|| Error::InvalidArgument(format!("missing Hodge for nonzero slot {}", slot.label())))?;
        total += match field.placement() {
            Placement::Primal => h.pairing(c, c)?,
            Placement::Dual => h.inverse_pairing(c, c)?,
        };
    }
    Ok(0.5 * total)
}
