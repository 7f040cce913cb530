//! Discrete forms (cochains) and the eight-slot field containers.
//!
//! A [`Cochain`] lives either on the primal complex (`p`-cochain indexed by
//! primal `p`-cells) or on the dual complex (dual `p`-cochain indexed by the
//! primal `(n-p)`-cells it is dual to). Vector-valued forms carry `fiber = 3`
//! and are stored component-major: all cells of component 0, then component 1,
//! then component 2.

use std::borrow::Cow;
use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, mismatch, Error, Result};
use crate::grid::{mask_axes, CubicalComplex, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Placement {
    Primal,
    Dual,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Primal => "primal",
            Placement::Dual => "dual",
        })
    }
}

fn check_fiber(fiber: usize) -> Result<()> {
    if fiber == 1 || fiber == 3 {
        Ok(())
    } else {
        invalid(format!("fiber dimension must be 1 or 3, got {fiber}"))
    }
}

/// Same complex, by identity or by shape.
pub(crate) fn same_complex(a: &Arc<CubicalComplex>, b: &Arc<CubicalComplex>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

#[derive(Clone, Debug)]
pub struct Cochain {
    complex: Arc<CubicalComplex>,
    degree: usize,
    fiber: usize,
    placement: Placement,
    values: Vec<f64>,
}

impl PartialEq for Cochain {
    fn eq(&self, other: &Self) -> bool {
        self.same_space(other) && self.values == other.values
    }
}

impl Cochain {
    fn cells_for(complex: &CubicalComplex, degree: usize, placement: Placement) -> Result<usize> {
        if degree > complex.dim() {
            return invalid(format!("degree {degree} exceeds complex dimension {}", complex.dim()));
        }
        Ok(match placement {
            Placement::Primal => complex.cell_count(degree),
            Placement::Dual => complex.cell_count(complex.dim() - degree),
        })
    }

    pub fn zeros(complex: Arc<CubicalComplex>, degree: usize, fiber: usize, placement: Placement) -> Result<Self> {
        check_fiber(fiber)?;
        let n = Self::cells_for(&complex, degree, placement)?;
        Ok(Self { complex, degree, fiber, placement, values: vec![0.0; n * fiber] })
    }

    pub fn from_values(
        complex: Arc<CubicalComplex>,
        degree: usize,
        fiber: usize,
        placement: Placement,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_fiber(fiber)?;
        let n = Self::cells_for(&complex, degree, placement)?;
        if values.len() != n * fiber {
            return mismatch(format!(
                "{placement} {degree}-cochain with fiber {fiber} needs {} values, got {}",
                n * fiber,
                values.len()
            ));
        }
        Ok(Self { complex, degree, fiber, placement, values })
    }

    /// A cochain with the same space as `self` holding `values`.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_values(self.complex.clone(), self.degree, self.fiber, self.placement, values)
    }

    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], ..self.clone_shape() }
    }

    fn clone_shape(&self) -> Self {
        Self {
            complex: self.complex.clone(),
            degree: self.degree,
            fiber: self.fiber,
            placement: self.placement,
            values: Vec::new(),
        }
    }

    pub fn complex(&self) -> &Arc<CubicalComplex> {
        &self.complex
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    /// Number of cells per fiber component.
    pub fn cells(&self) -> usize {
        self.values.len() / self.fiber
    }

    /// Degree of the primal cells that index this cochain.
    pub fn index_degree(&self) -> usize {
        match self.placement {
            Placement::Primal => self.degree,
            Placement::Dual => self.complex.dim() - self.degree,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.cells();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.cells();
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn same_space(&self, other: &Cochain) -> bool {
        self.degree == other.degree
            && self.fiber == other.fiber
            && self.placement == other.placement
            && same_complex(&self.complex, &other.complex)
    }

    fn check_same(&self, other: &Cochain) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            mismatch(format!(
                "cochains differ: {} {}-cochain (fiber {}) vs {} {}-cochain (fiber {})",
                self.placement, self.degree, self.fiber, other.placement, other.degree, other.fiber
            ))
        }
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Cochain) -> Result<()> {
        self.check_same(x)?;
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += alpha * v;
        }
        Ok(())
    }

    /// `alpha * a + beta * b`, entrywise as `alpha * a[i] + beta * b[i]`.
    pub fn linear_combination(alpha: f64, a: &Cochain, beta: f64, b: &Cochain) -> Result<Cochain> {
        a.check_same(b)?;
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| alpha * x + beta * y).collect();
        Ok(Cochain { values, ..a.clone_shape() })
    }

    pub fn scaled(&self, alpha: f64) -> Cochain {
        Cochain { values: self.values.iter().map(|v| alpha * v).collect(), ..self.clone_shape() }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Cochain) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Zeroes the entries of cells flagged in `mask` (all fiber components).
    pub fn clamp(&mut self, mask: &[bool]) {
        let n = self.cells();
        debug_assert_eq!(mask.len(), n);
        for c in 0..self.fiber {
            for (v, &m) in self.values[c * n..(c + 1) * n].iter_mut().zip(mask) {
                if m {
                    *v = 0.0;
                }
            }
        }
    }
}

/// Orientation sign of the dual of a cell spanning `axes`: the dual cell is
/// oriented so that (dual axes, primal axes) is a positive frame.
pub fn dual_orientation_sign(dim: usize, axes: u8) -> f64 {
    let seq: Vec<usize> = (0..dim).filter(|a| axes & (1 << a) == 0).chain(mask_axes(axes)).collect();
    let inversions = (0..seq.len()).flat_map(|i| ((i + 1)..seq.len()).map(move |j| (i, j))).filter(|&(i, j)| seq[i] > seq[j]).count();
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// de Rham map by the midpoint rule.
///
/// `form(x, axes, component)` returns the coefficient of `dx_{axes}` (axes
/// sorted increasingly) of the analytic form at point `x`. Vertices receive
/// point values; higher-degree cells receive coefficient times cell measure.
pub fn project_function<F>(
    complex: &Arc<CubicalComplex>,
    degree: usize,
    fiber: usize,
    placement: Placement,
    form: F,
) -> Result<Cochain>
where
    F: Fn(&[f64; MAX_DIM], &[usize], usize) -> f64,
{
    let mut out = Cochain::zeros(complex.clone(), degree, fiber, placement)?;
    let dim = complex.dim();
    let idx_deg = out.index_degree();
    let n = out.cells();
    let full = ((1u16 << dim) - 1) as u8;
    for i in 0..n {
        let cell = complex.cell(idx_deg, i);
        let x = complex.center(idx_deg, i);
        let (axes, sign, measure) = match placement {
            Placement::Primal => (cell.axes, 1.0, complex.orientation_measure(cell.axes)),
            Placement::Dual => (
                full & !cell.axes,
                dual_orientation_sign(dim, cell.axes),
                complex.dual_orientation_measure(cell.axes),
            ),
        };
        let axes_list: Vec<usize> = mask_axes(axes).collect();
        for c in 0..fiber {
            out.values[c * n + i] = sign * measure * form(&x, &axes_list, c);
        }
    }
    Ok(out)
}

/// Coefficient of `dx_{axes}` for the usual 3D vector proxy of a form:
/// scalar for degrees 0 and 3, circulation components for 1-forms, flux
/// components (`b_x dy∧dz + b_y dz∧dx + b_z dx∧dy`) for 2-forms.
pub fn proxy_coefficient(value: &[f64; 3], axes: &[usize]) -> f64 {
    match axes {
        [] | [_, _, _] => value[0],
        [a] => value[*a],
        [a, b] => {
            let c = 3 - a - b;
            let sign = if (*a, *b) == (0, 1) || (*a, *b) == (1, 2) { 1.0 } else { -1.0 };
            sign * value[c]
        }
        _ => 0.0,
    }
}

/// Projects a scalar/vector proxy field onto a scalar (fiber 1) cochain.
pub fn project_proxy<F>(complex: &Arc<CubicalComplex>, degree: usize, placement: Placement, field: F) -> Result<Cochain>
where
    F: Fn(&[f64; MAX_DIM]) -> [f64; 3],
{
    if complex.dim() != 3 {
        return invalid("vector proxies are defined on 3D complexes");
    }
    project_function(complex, degree, 1, placement, |x, axes, _| proxy_coefficient(&field(x), axes))
}

/// Slot labels of the eight-component containers.
pub trait SlotKind: Copy + Eq + fmt::Debug + 'static {
    const ALL: [Self; 8];
    fn index(self) -> usize;
    fn degree(self) -> usize;
    fn label(self) -> &'static str;
}

/// Unknown column of the space/time block system, in display order.
///
/// `S*` slots are space-like forms `f^p_s`; `T*` slots are the spatial
/// factors `F^p_s` of time-like forms `dt ∧ F^p_s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldSlot {
    /// `f3s`
    S3,
    /// `F3s`
    T3,
    /// `f1s`
    S1,
    /// `F1s`
    T1,
    /// `f2s`
    S2,
    /// `F2s`
    T2,
    /// `f0`
    S0,
    /// `F0`
    T0,
}

/// Right-hand-side column of the block system, in display order (one per row).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceSlot {
    /// `G3s`
    T3,
    /// `g3s`
    S3,
    /// `G1s`
    T1,
    /// `g1s`
    S1,
    /// `G2s`
    T2,
    /// `g2s`
    S2,
    /// `G0`
    T0,
    /// `g0`
    S0,
}

const DEGREES: [usize; 8] = [3, 3, 1, 1, 2, 2, 0, 0];

impl SlotKind for FieldSlot {
    const ALL: [Self; 8] = [Self::S3, Self::T3, Self::S1, Self::T1, Self::S2, Self::T2, Self::S0, Self::T0];
    fn index(self) -> usize {
        self as usize
    }
    fn degree(self) -> usize {
        DEGREES[self as usize]
    }
    fn label(self) -> &'static str {
        ["f3s", "F3s", "f1s", "F1s", "f2s", "F2s", "f0", "F0"][self as usize]
    }
}

impl SlotKind for SourceSlot {
    const ALL: [Self; 8] = [Self::T3, Self::S3, Self::T1, Self::S1, Self::T2, Self::S2, Self::T0, Self::S0];
    fn index(self) -> usize {
        self as usize
    }
    fn degree(self) -> usize {
        DEGREES[self as usize]
    }
    fn label(self) -> &'static str {
        ["G3s", "g3s", "G1s", "g1s", "G2s", "g2s", "G0", "g0"][self as usize]
    }
}

impl SourceSlot {
    /// 1-based row number in the displayed block system.
    pub fn row_number(self) -> usize {
        self as usize + 1
    }

    pub fn from_row_number(row: usize) -> Option<Self> {
        (1..=8).contains(&row).then(|| Self::ALL[row - 1])
    }
}

impl fmt::Display for FieldSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for SourceSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FieldSlot {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown field slot `{s}`")))
    }
}

impl FromStr for SourceSlot {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown source slot `{s}`")))
    }
}

/// Eight cochains of spatial degrees (3, 3, 1, 1, 2, 2, 0, 0) sharing one
/// complex, fiber dimension and placement. Unset slots read as zero.
#[derive(Clone, Debug)]
pub struct SlotField<K: SlotKind> {
    complex: Arc<CubicalComplex>,
    fiber: usize,
    placement: Placement,
    slots: [Option<Cochain>; 8],
    _kind: PhantomData<K>,
}

pub type GeneralField = SlotField<FieldSlot>;
pub type SourceField = SlotField<SourceSlot>;

impl<K: SlotKind> SlotField<K> {
    /// All slots zero.
    pub fn zero(complex: Arc<CubicalComplex>, fiber: usize, placement: Placement) -> Result<Self> {
        check_fiber(fiber)?;
        if complex.dim() != 3 {
            return invalid(format!("general fields live on 3D complexes, got dimension {}", complex.dim()));
        }
        Ok(Self { complex, fiber, placement, slots: Default::default(), _kind: PhantomData })
    }

    pub fn complex(&self) -> &Arc<CubicalComplex> {
        &self.complex
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    /// Zero cochain of the right shape for `slot`.
    pub fn zero_slot(&self, slot: K) -> Cochain {
        Cochain::zeros(self.complex.clone(), slot.degree(), self.fiber, self.placement)
            .expect("field shape was validated on construction")
    }

    pub fn set(&mut self, slot: K, value: Cochain) -> Result<()> {
        if value.degree() != slot.degree() {
            return invalid(format!("slot {} holds {}-cochains, got degree {}", slot.label(), slot.degree(), value.degree()));
        }
        if value.fiber() != self.fiber {
            return invalid(format!("slot {} expects fiber {}, got {}", slot.label(), self.fiber, value.fiber()));
        }
        if value.placement() != self.placement {
            return invalid(format!("slot {} expects a {} cochain, got {}", slot.label(), self.placement, value.placement()));
        }
        if !same_complex(&self.complex, value.complex()) {
            return invalid(format!("slot {} cochain lives on a different complex", slot.label()));
        }
        self.slots[slot.index()] = Some(value);
        Ok(())
    }

    pub fn with(mut self, slot: K, value: Cochain) -> Result<Self> {
        self.set(slot, value)?;
        Ok(self)
    }

    pub fn clear(&mut self, slot: K) {
        self.slots[slot.index()] = None;
    }

    pub fn is_set(&self, slot: K) -> bool {
        self.slots[slot.index()].is_some()
    }

    /// The stored cochain, or `None` if the slot is identically zero.
    pub fn get_opt(&self, slot: K) -> Option<&Cochain> {
        self.slots[slot.index()].as_ref()
    }

    pub fn get(&self, slot: K) -> Cow<'_, Cochain> {
        match &self.slots[slot.index()] {
            Some(c) => Cow::Borrowed(c),
            None => Cow::Owned(self.zero_slot(slot)),
        }
    }

    pub fn get_mut(&mut self, slot: K) -> &mut Cochain {
        if self.slots[slot.index()].is_none() {
            self.slots[slot.index()] = Some(self.zero_slot(slot));
        }
        self.slots[slot.index()].as_mut().unwrap()
    }

    pub fn same_space(&self, other: &Self) -> bool {
        self.fiber == other.fiber && self.placement == other.placement && same_complex(&self.complex, &other.complex)
    }

    /// Slot-wise `alpha * a + beta * b`.
    pub fn linear_combination(alpha: f64, a: &Self, beta: f64, b: &Self) -> Result<Self> {
        if !a.same_space(b) {
            return invalid("fields differ in complex, fiber dimension or placement");
        }
        let mut out = Self::zero(a.complex.clone(), a.fiber, a.placement)?;
        for k in K::ALL {
            let v = match (a.get_opt(k), b.get_opt(k)) {
                (None, None) => None,
                (Some(x), None) => Some(x.scaled(alpha)),
                (None, Some(y)) => Some(y.scaled(beta)),
                (Some(x), Some(y)) => Some(Cochain::linear_combination(alpha, x, beta, y)?),
            };
            out.slots[k.index()] = v;
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::linear_combination(1.0, self, 1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::linear_combination(1.0, self, -1.0, other)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for s in out.slots.iter_mut().flatten() {
            s.scale(alpha);
        }
        out
    }

    pub fn slot_norm(&self, slot: K) -> f64 {
        self.get_opt(slot).map_or(0.0, Cochain::norm_l2)
    }

    pub fn norm_l2(&self) -> f64 {
        K::ALL.iter().map(|&k| self.slot_norm(k).powi(2)).sum::<f64>().sqrt()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (K, &Cochain)> {
        K::ALL.into_iter().filter_map(move |k| self.get_opt(k).map(|c| (k, c)))
    }
}

/// A general field with every slot zero.
pub fn zero_field(complex: Arc<CubicalComplex>, fiber: usize) -> Result<GeneralField> {
    GeneralField::zero(complex, fiber, Placement::Primal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> Arc<CubicalComplex> {
        Arc::new(CubicalComplex::new(&[1, 1, 1], &[1.0; 3]).unwrap())
    }

    #[test]
    fn zero_field_shapes() {
        let f = zero_field(unit_cube(), 3).unwrap();
        assert_eq!(f.get(FieldSlot::S1).values().len(), 36);
        assert!(FieldSlot::ALL.iter().all(|&s| f.slot_norm(s) == 0.0));
        assert!(zero_field(unit_cube(), 2).is_err());
    }

    #[test]
    fn slot_degree_enforced() {
        let c = unit_cube();
        let mut f = zero_field(c.clone(), 1).unwrap();
        let one = Cochain::zeros(c.clone(), 1, 1, Placement::Primal).unwrap();
        assert!(f.set(FieldSlot::S2, one.clone()).is_err());
        assert!(f.set(FieldSlot::T1, one).is_ok());
        let vec1 = Cochain::zeros(c, 1, 3, Placement::Primal).unwrap();
        assert!(f.set(FieldSlot::S1, vec1).is_err());
    }

    #[test]
    fn labels_parse() {
        for s in FieldSlot::ALL {
            assert_eq!(s.label().parse::<FieldSlot>().unwrap(), s);
        }
        for s in SourceSlot::ALL {
            assert_eq!(s.label().parse::<SourceSlot>().unwrap(), s);
        }
        assert_eq!(SourceSlot::from_row_number(7), Some(SourceSlot::T0));
    }

    #[test]
    fn constant_projection() {
        let c = unit_cube();
        let ones = project_function(&c, 0, 1, Placement::Primal, |_, _, _| 1.0).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn linear_function_gradient_is_exact() {
        let c = Arc::new(CubicalComplex::new(&[3, 2, 2], &[0.5, 1.0, 1.0]).unwrap());
        let f = project_function(&c, 0, 1, Placement::Primal, |x, _, _| x[0]).unwrap();
        let df = c.exterior_derivative(0).unwrap().apply(f.values());
        let x_edges = c.orientation_range(1, 0b001).unwrap();
        for i in 0..c.cell_count(1) {
            let expect = if x_edges.contains(&i) { 0.5 } else { 0.0 };
            assert!((df[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn dual_orientation_signs() {
        assert_eq!(dual_orientation_sign(3, 0b001), 1.0);
        assert_eq!(dual_orientation_sign(3, 0b101), -1.0);
        assert_eq!(dual_orientation_sign(3, 0), 1.0);
        assert_eq!(dual_orientation_sign(3, 0b111), 1.0);
    }

    #[test]
    fn mismatched_arithmetic_fails() {
        let a = zero_field(unit_cube(), 1).unwrap();
        let b = zero_field(unit_cube(), 3).unwrap();
        assert!(GeneralField::linear_combination(1.0, &a, 1.0, &b).is_err());
        let other = Arc::new(CubicalComplex::new(&[2, 1, 1], &[1.0; 3]).unwrap());
        let c = zero_field(other, 1).unwrap();
        assert!(a.add(&c).is_err());
    }
}
