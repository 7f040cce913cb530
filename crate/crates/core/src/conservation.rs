//! The space/time block operator of the general conservation law.
//!
//! The law on a 3+1 split is an 8×8 block system acting on the field column
//! `(f3s, F3s, f1s, F1s, f2s, F2s, f0, F0)` with right-hand side
//! `(G3s, g3s, G1s, g1s, G2s, g2s, G0, g0)`. Each nonzero block is one of the
//! time derivative `∂_t`, the spatial exterior derivative `d`, the spatial
//! `⋆d⋆` or `⋆∂_t⋆`, with a sign. Spatial blocks are concrete sparse maps; time
//! blocks act on slot rates supplied by a [`TimeDerivative`].
//!
//! For primal `p`-cochains
//!
//! ```text
//! ⋆d⋆   = (-1)^p H_{p-1}⁻¹ D_{p-1}ᵀ H_p^slot
//! ⋆∂_t⋆ = H_p⁻¹ H_p^slot ∂_t
//! ```
//!
//! and for dual `p`-cochains (indexed by primal `(3-p)`-cells)
//!
//! ```text
//! d     = (-1)^{p+1} D_{2-p}ᵀ
//! ⋆d⋆   = H_{4-p} D_{3-p} (H_{3-p}^slot)⁻¹
//! ⋆∂_t⋆ = H_{3-p} (H_{3-p}^slot)⁻¹ ∂_t
//! ```
//!
//! where `H` without superscript is the vacuum Hodge.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cochain::{Cochain, FieldSlot, GeneralField, Placement, SlotKind, SourceField, SourceSlot};
use crate::error::{invalid, Error, Result};
use crate::grid::{CubicalComplex, SplitCell};
use crate::hodge::{vacuum_hodge, HodgeMap, SlotHodges};

/// Operator carried by one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// `∂_t`
    Dt,
    /// spatial `d`
    D,
    /// `⋆d⋆`
    StarDStar,
    /// `⋆∂_t⋆`
    StarDtStar,
}

impl BlockKind {
    pub const ALL: [BlockKind; 4] = [BlockKind::Dt, BlockKind::D, BlockKind::StarDStar, BlockKind::StarDtStar];

    pub fn is_temporal(self) -> bool {
        matches!(self, BlockKind::Dt | BlockKind::StarDtStar)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BlockKind::Dt => "dt",
            BlockKind::D => "d",
            BlockKind::StarDStar => "*d*",
            BlockKind::StarDtStar => "*dt*",
        }
    }

    /// Notation used in printed equations.
    pub fn notation(self) -> &'static str {
        match self {
            BlockKind::Dt => "∂_t",
            BlockKind::D => "d^s",
            BlockKind::StarDStar => "⋆_s d^s ⋆_s",
            BlockKind::StarDtStar => "⋆_s ∂_t ⋆_s",
        }
    }

    /// Spatial degree of the output given the input degree.
    pub fn output_degree(self, input: usize) -> Option<usize> {
        match self {
            BlockKind::Dt | BlockKind::StarDtStar => Some(input),
            BlockKind::D => (input < 3).then_some(input + 1),
            BlockKind::StarDStar => input.checked_sub(1),
        }
    }
}

impl FromStr for BlockKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BlockKind::ALL
            .into_iter()
            .find(|k| k.symbol() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown block operator `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockEntry {
    pub row: SourceSlot,
    pub col: FieldSlot,
    pub kind: BlockKind,
    pub sign: i8,
}

impl fmt::Display for BlockEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign < 0 { '-' } else { '+' };
        write!(f, "(row {}, col {}): {s}{}", self.row, self.col, self.kind.symbol())
    }
}

const fn entry(row: SourceSlot, col: FieldSlot, kind: BlockKind, sign: i8) -> BlockEntry {
    BlockEntry { row, col, kind, sign }
}

/// The block pattern used for assembly, row by row.
pub const BLOCK_PATTERN: [BlockEntry; 20] = {
    use BlockKind::*;
    use FieldSlot as F;
    use SourceSlot as G;
    [
        entry(G::T3, F::S3, Dt, 1),
        entry(G::T3, F::T2, D, -1),
        entry(G::S3, F::T3, StarDtStar, 1),
        entry(G::S3, F::S2, D, 1),
        entry(G::T1, F::S1, Dt, 1),
        entry(G::T1, F::T2, StarDStar, 1),
        entry(G::T1, F::T0, D, -1),
        entry(G::S1, F::T1, StarDtStar, 1),
        entry(G::S1, F::S2, StarDStar, 1),
        entry(G::S1, F::S0, D, 1),
        entry(G::T2, F::T3, StarDStar, 1),
        entry(G::T2, F::T1, D, -1),
        entry(G::T2, F::S2, Dt, 1),
        entry(G::S2, F::S3, StarDStar, 1),
        entry(G::S2, F::S1, D, 1),
        entry(G::S2, F::T2, StarDtStar, -1),
        entry(G::T0, F::T1, StarDStar, 1),
        entry(G::T0, F::S0, Dt, 1),
        entry(G::S0, F::S1, StarDStar, 1),
        entry(G::S0, F::T0, StarDtStar, -1),
    ]
};

/// Reference copy of the block pattern shipped as a text asset.
pub const GOLDEN_PATTERN_TEXT: &str = include_str!("../assets/block_pattern.txt");

/// Parses a pattern table: one `row col op sign` entry per line, `#` comments.
pub fn parse_pattern(text: &str) -> Result<Vec<BlockEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [row, col, op, sign] = parts[..] else {
            return invalid(format!("pattern line {}: expected `row col op sign`", n + 1));
        };
        let sign = match sign {
            "+" | "+1" => 1,
            "-" | "-1" => -1,
            other => return invalid(format!("pattern line {}: bad sign `{other}`", n + 1)),
        };
        let e = BlockEntry { row: row.parse()?, col: col.parse()?, kind: op.parse()?, sign };
        if out.iter().any(|o: &BlockEntry| o.row == e.row && o.col == e.col) {
            return invalid(format!("pattern line {}: duplicate block ({}, {})", n + 1, e.row, e.col));
        }
        out.push(e);
    }
    Ok(out)
}

pub fn golden_pattern() -> Result<Vec<BlockEntry>> {
    parse_pattern(GOLDEN_PATTERN_TEXT)
}

/// Supplies `∂_t` of each slot. `None` means the slot's rate is zero or
/// neglected by the model.
pub trait TimeDerivative {
    fn rate(&self, slot: FieldSlot) -> Result<Option<Cochain>>;
}

/// Explicit per-slot rates.
#[derive(Clone, Debug)]
pub struct SlotRates(pub GeneralField);

impl TimeDerivative for SlotRates {
    fn rate(&self, slot: FieldSlot) -> Result<Option<Cochain>> {
        Ok(self.0.get_opt(slot).cloned())
    }
}

/// No time dependence at all.
pub struct Static;

impl TimeDerivative for Static {
    fn rate(&self, _slot: FieldSlot) -> Result<Option<Cochain>> {
        Ok(None)
    }
}

/// Forward difference of two field snapshots `dt` apart.
pub struct FiniteDifference<'a> {
    pub before: &'a GeneralField,
    pub after: &'a GeneralField,
    pub dt: f64,
}

impl TimeDerivative for FiniteDifference<'_> {
    fn rate(&self, slot: FieldSlot) -> Result<Option<Cochain>> {
        if !self.before.same_space(self.after) {
            return invalid("finite-difference snapshots differ in shape");
        }
        match (self.before.get_opt(slot), self.after.get_opt(slot)) {
            (None, None) => Ok(None),
            _ => {
                let (a, b) = (self.after.get(slot), self.before.get(slot));
                Ok(Some(Cochain::linear_combination(1.0 / self.dt, &a, -1.0 / self.dt, &b)?))
            }
        }
    }
}

/// The assembled block system on one complex and placement.
#[derive(Clone, Debug)]
pub struct BlockOperator {
    complex: Arc<CubicalComplex>,
    placement: Placement,
    hodges: SlotHodges,
    vacuum: Vec<HodgeMap>,
    blocks: Vec<BlockEntry>,
}

/// Assembles the block operator; every slot needs a Hodge.
pub fn assemble_block_operator(hodges: &SlotHodges) -> Result<BlockOperator> {
    let complex = hodges.complex().clone();
    if complex.dim() != 3 {
        return invalid("the block operator lives on 3D complexes");
    }
    for slot in FieldSlot::ALL {
        if hodges.get(slot).is_none() {
            return invalid(format!("missing Hodge for slot {}", slot.label()));
        }
    }
    let vacuum = (0..=3).map(|p| vacuum_hodge(&complex, p)).collect::<Result<Vec<_>>>()?;
    for b in &BLOCK_PATTERN {
        debug_assert_eq!(b.kind.output_degree(b.col.degree()), Some(b.row.degree()));
    }
    Ok(BlockOperator { complex, placement: hodges.placement(), hodges: hodges.clone(), vacuum, blocks: BLOCK_PATTERN.to_vec() })
}

fn incidence_apply(d: &crate::sparse::Incidence, x: &Cochain, scale: f64, out_degree: usize, placement: Placement) -> Result<Cochain> {
    let n_in = d.ncols();
    let n_out = d.nrows();
    let mut out = vec![0.0; n_out * x.fiber()];
    for c in 0..x.fiber() {
        d.apply_into(&x.values()[c * n_in..(c + 1) * n_in], scale, &mut out[c * n_out..(c + 1) * n_out]);
    }
    Cochain::from_values(x.complex().clone(), out_degree, x.fiber(), placement, out)
}

impl BlockOperator {
    pub fn complex(&self) -> &Arc<CubicalComplex> {
        &self.complex
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn hodges(&self) -> &SlotHodges {
        &self.hodges
    }

    pub fn blocks(&self) -> &[BlockEntry] {
        &self.blocks
    }

    pub fn block(&self, row: SourceSlot, col: FieldSlot) -> Option<&BlockEntry> {
        self.blocks.iter().find(|b| b.row == row && b.col == col)
    }

    pub fn row_blocks(&self, row: SourceSlot) -> impl Iterator<Item = &BlockEntry> {
        self.blocks.iter().filter(move |b| b.row == row)
    }

    /// The single time block of a row.
    pub fn temporal_block(&self, row: SourceSlot) -> &BlockEntry {
        self.row_blocks(row).find(|b| b.kind.is_temporal()).expect("every row has one time block")
    }

    /// Applies the unsigned operator of a block kind to `x` as if it sat in
    /// column `col`. Time blocks treat `x` as the slot rate.
    pub fn apply_kind(&self, kind: BlockKind, col: FieldSlot, x: &Cochain) -> Result<Cochain> {
        let p = col.degree();
        if x.degree() != p || x.placement() != self.placement {
            return invalid(format!("block input for column {} must be a {} {p}-cochain", col.label(), self.placement));
        }
        let out_p = kind
            .output_degree(p)
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no output on degree {p}", kind.symbol())))?;
        let slot_h = self.hodges.require(col)?;
        let fiber = x.fiber();
        match (kind, self.placement) {
            (BlockKind::Dt, _) => Ok(x.clone()),
            (BlockKind::D, Placement::Primal) => incidence_apply(self.complex.exterior_derivative(p)?, x, 1.0, out_p, self.placement),
            (BlockKind::D, Placement::Dual) => {
                let sign = if p.is_multiple_of(2) { -1.0 } else { 1.0 };
                incidence_apply(self.complex.exterior_derivative_transpose(2 - p)?, x, sign, out_p, self.placement)
            }
            (BlockKind::StarDStar, Placement::Primal) => {
                let mut hx = vec![0.0; x.values().len()];
                slot_h.apply_values(x.values(), &mut hx);
                let hx = x.with_values(hx)?;
                let sign = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
                let mut y = incidence_apply(self.complex.exterior_derivative_transpose(p - 1)?, &hx, sign, out_p, self.placement)?;
                let yv = y.values().to_vec();
                self.vacuum[out_p].apply_inverse_values(&yv, y.values_mut())?;
                Ok(y)
            }
            (BlockKind::StarDStar, Placement::Dual) => {
                let q = 3 - p;
                let mut a = vec![0.0; x.values().len()];
                slot_h.apply_inverse_values(x.values(), &mut a)?;
                let a = Cochain::from_values(self.complex.clone(), q, fiber, Placement::Primal, a)?;
                let da = incidence_apply(self.complex.exterior_derivative(q)?, &a, 1.0, q + 1, Placement::Primal)?;
                let mut out = vec![0.0; da.values().len()];
                self.vacuum[q + 1].apply_values(da.values(), &mut out);
                Cochain::from_values(self.complex.clone(), out_p, fiber, Placement::Dual, out)
            }
            (BlockKind::StarDtStar, Placement::Primal) => {
                let mut hx = vec![0.0; x.values().len()];
                slot_h.apply_values(x.values(), &mut hx);
                let mut out = vec![0.0; hx.len()];
                self.vacuum[p].apply_inverse_values(&hx, &mut out)?;
                x.with_values(out)
            }
            (BlockKind::StarDtStar, Placement::Dual) => {
                let mut a = vec![0.0; x.values().len()];
                slot_h.apply_inverse_values(x.values(), &mut a)?;
                let mut out = vec![0.0; a.len()];
                self.vacuum[3 - p].apply_values(&a, &mut out);
                x.with_values(out)
            }
        }
    }

    /// Signed application of one block.
    pub fn apply_block(&self, block: &BlockEntry, x: &Cochain) -> Result<Cochain> {
        let mut y = self.apply_kind(block.kind, block.col, x)?;
        if block.sign < 0 {
            y.scale(-1.0);
        }
        Ok(y)
    }

    fn zero_row(&self, row: SourceSlot, fiber: usize) -> Result<Cochain> {
        Cochain::zeros(self.complex.clone(), row.degree(), fiber, self.placement)
    }

    fn check_field(&self, field: &GeneralField) -> Result<()> {
        if field.placement() != self.placement {
            return invalid(format!("operator is {}, field is {}", self.placement, field.placement()));
        }
        if !crate::cochain::same_complex(&self.complex, field.complex()) {
            return invalid("field lives on a different complex than the operator");
        }
        Ok(())
    }

    /// Sum of the spatial blocks of a row applied to the field. Unset slots
    /// contribute nothing.
    pub fn apply_row_spatial(&self, row: SourceSlot, field: &GeneralField) -> Result<Cochain> {
        self.check_field(field)?;
        let mut acc: Option<Cochain> = None;
        for b in self.row_blocks(row).filter(|b| !b.kind.is_temporal()) {
            if let Some(x) = field.get_opt(b.col) {
                let y = self.apply_block(b, x)?;
                match &mut acc {
                    Some(a) => a.axpy(1.0, &y)?,
                    None => acc = Some(y),
                }
            }
        }
        match acc {
            Some(a) => Ok(a),
            None => self.zero_row(row, field.fiber()),
        }
    }

    /// The row's time block applied to the slot rates.
    pub fn apply_row_temporal(&self, row: SourceSlot, fiber: usize, rates: &dyn TimeDerivative) -> Result<Cochain> {
        let b = self.temporal_block(row);
        match rates.rate(b.col)? {
            Some(r) => self.apply_block(b, &r),
            None => self.zero_row(row, fiber),
        }
    }

    /// Diagonal of a row's (signed) time block; time blocks are diagonal for
    /// diagonal slot Hodges.
    pub fn temporal_diagonal(&self, row: SourceSlot) -> Result<Vec<f64>> {
        let b = self.temporal_block(row);
        let n = match self.placement {
            Placement::Primal => self.complex.cell_count(b.col.degree()),
            Placement::Dual => self.complex.cell_count(3 - b.col.degree()),
        };
        let s = f64::from(b.sign);
        if b.kind == BlockKind::Dt {
            return Ok(vec![s; n]);
        }
        let p = match self.placement {
            Placement::Primal => b.col.degree(),
            Placement::Dual => 3 - b.col.degree(),
        };
        let slot = self.hodges.require(b.col)?;
        let w = slot
            .weights()
            .ok_or_else(|| Error::InvalidArgument(format!("time block of row {} needs a diagonal Hodge", row.label())))?;
        let v = self.vacuum[p].weights().expect("vacuum Hodge is diagonal");
        Ok(match self.placement {
            Placement::Primal => w.iter().zip(v).map(|(w, v)| s * w / v).collect(),
            Placement::Dual => w.iter().zip(v).map(|(w, v)| s * v / w).collect(),
        })
    }
}

/// Per-row norms of a residual.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RowNorm {
    pub l2: f64,
    pub max: f64,
    /// Largest L2 norm among the terms summed into the row (blocks and source).
    pub scale: f64,
}

impl RowNorm {
    /// `l2 / scale`, or 0 for a row with no content.
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.l2 / self.scale
        } else {
            self.l2
        }
    }
}

/// `L·field − source`, row by row.
#[derive(Clone, Debug)]
pub struct Residual {
    pub rows: SourceField,
    pub norms: [RowNorm; 8],
}

impl Residual {
    pub fn row(&self, row: SourceSlot) -> std::borrow::Cow<'_, Cochain> {
        self.rows.get(row)
    }

    pub fn norm(&self, row: SourceSlot) -> RowNorm {
        self.norms[row.index()]
    }

    pub fn max_relative(&self) -> f64 {
        self.norms.iter().map(RowNorm::relative).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,label,l2,max,scale\n");
        for r in SourceSlot::ALL {
            let n = self.norm(r);
            s.push_str(&format!("{},{},{:e},{:e},{:e}\n", r.row_number(), r.label(), n.l2, n.max, n.scale));
        }
        s
    }
}

/// Evaluates every row of the law: spatial blocks on `field`, time blocks on
/// the rates from `time_derivative`, minus `source`.
pub fn evaluate_residual(
    op: &BlockOperator,
    field: &GeneralField,
    source: &SourceField,
    time_derivative: &dyn TimeDerivative,
) -> Result<Residual> {
    op.check_field(field)?;
    if source.placement() != op.placement() || source.fiber() != field.fiber() {
        return invalid("source and field differ in placement or fiber dimension");
    }
    if !crate::cochain::same_complex(op.complex(), source.complex()) {
        return invalid("source lives on a different complex than the operator");
    }
    let mut rows = SourceField::zero(op.complex().clone(), field.fiber(), op.placement())?;
    let mut norms = [RowNorm::default(); 8];
    for row in SourceSlot::ALL {
        let mut acc = op.zero_row(row, field.fiber())?;
        let mut scale: f64 = 0.0;
        for b in op.row_blocks(row) {
            let term = if b.kind.is_temporal() {
                match time_derivative.rate(b.col)? {
                    Some(r) => Some(op.apply_block(b, &r)?),
                    None => None,
                }
            } else {
                field.get_opt(b.col).map(|x| op.apply_block(b, x)).transpose()?
            };
            if let Some(t) = term {
                scale = scale.max(t.norm_l2());
                acc.axpy(1.0, &t)?;
            }
        }
        if let Some(g) = source.get_opt(row) {
            scale = scale.max(g.norm_l2());
            acc.axpy(-1.0, g)?;
        }
        norms[row.index()] = RowNorm { l2: acc.norm_l2(), max: acc.norm_max(), scale };
        rows.set(row, acc)?;
    }
    Ok(Residual { rows, norms })
}

/// Disagreement between an inferred block and the reference pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternMismatch {
    pub row: SourceSlot,
    pub col: FieldSlot,
    pub expected: Option<(BlockKind, i8)>,
    pub found: Option<(BlockKind, i8)>,
}

impl fmt::Display for PatternMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |b: Option<(BlockKind, i8)>| match b {
            None => "0".to_string(),
            Some((k, s)) => format!("{}{}", if s < 0 { '-' } else { '+' }, k.symbol()),
        };
        write!(f, "block (row {}, col {}): expected {}, found {}", self.row, self.col, show(self.expected), show(self.found))
    }
}

fn random_cochain(op: &BlockOperator, slot: FieldSlot, fiber: usize, rng: &mut ChaCha8Rng) -> Result<Cochain> {
    let mut c = Cochain::zeros(op.complex().clone(), slot.degree(), fiber, op.placement())?;
    for v in c.values_mut() {
        *v = rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    Ok(c)
}

fn close(a: &Cochain, b: &Cochain) -> bool {
    let scale = a.norm_l2().max(b.norm_l2());
    let diff = Cochain::linear_combination(1.0, a, -1.0, b).map(|d| d.norm_l2()).unwrap_or(f64::INFINITY);
    diff <= 1e-12 * scale
}

/// Recovers the block pattern of an assembled operator by probing it with
/// random single-slot fields (spatial blocks) and single-slot rates (time
/// blocks), matching each response against the signed reference operators.
pub fn infer_pattern(op: &BlockOperator, fiber: usize, seed: u64) -> Result<Vec<BlockEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complex = op.complex().clone();
    let mut found = Vec::new();
    for col in FieldSlot::ALL {
        let x = random_cochain(op, col, fiber, &mut rng)?;
        let field = GeneralField::zero(complex.clone(), fiber, op.placement())?.with(col, x.clone())?;
        let mut rates = GeneralField::zero(complex.clone(), fiber, op.placement())?;
        rates.set(col, x.clone())?;
        let rates = SlotRates(rates);
        for row in SourceSlot::ALL {
            let spatial = op.apply_row_spatial(row, &field)?;
            let temporal = op.apply_row_temporal(row, fiber, &rates)?;
            for (response, kinds) in [
                (spatial, [BlockKind::D, BlockKind::StarDStar]),
                (temporal, [BlockKind::Dt, BlockKind::StarDtStar]),
            ] {
                if response.norm_max() == 0.0 {
                    continue;
                }
                let mut candidates = Vec::new();
                for kind in kinds {
                    if kind.output_degree(col.degree()) != Some(row.degree()) {
                        continue;
                    }
                    let reference = op.apply_kind(kind, col, &x)?;
                    for sign in [1i8, -1] {
                        if close(&response, &reference.scaled(f64::from(sign))) {
                            candidates.push(BlockEntry { row, col, kind, sign });
                        }
                    }
                }
                // With vacuum slot Hodges ⋆∂_t⋆ and ∂_t act identically; the
                // block's own tag then decides between them.
                let matched = match candidates.len() {
                    0 | 1 => candidates.first().copied(),
                    _ => candidates.iter().copied().find(|c| op.block(row, col).is_some_and(|b| b.kind == c.kind)),
                };
                match matched {
                    Some(b) => found.push(b),
                    None => {
                        return invalid(format!(
                            "block (row {}, col {}) matches no reference operator",
                            row.label(),
                            col.label()
                        ))
                    }
                }
            }
        }
    }
    Ok(found)
}

/// Compares two patterns block by block.
pub fn compare_patterns(expected: &[BlockEntry], found: &[BlockEntry]) -> Vec<PatternMismatch> {
    let mut out = Vec::new();
    for row in SourceSlot::ALL {
        for col in FieldSlot::ALL {
            let pick = |p: &[BlockEntry]| p.iter().find(|b| b.row == row && b.col == col).map(|b| (b.kind, b.sign));
            let (e, f) = (pick(expected), pick(found));
            if e != f {
                out.push(PatternMismatch { row, col, expected: e, found: f });
            }
        }
    }
    out
}

/// Infers the operator's pattern and compares it with `golden`.
pub fn check_pattern(op: &BlockOperator, golden: &[BlockEntry], fiber: usize, seed: u64) -> Result<Vec<PatternMismatch>> {
    let found = infer_pattern(op, fiber, seed)?;
    Ok(compare_patterns(golden, &found))
}

/// Largest absolute entry of `D_{p+1} D_p` for every valid `p`.
pub fn exactness_defects(complex: &CubicalComplex) -> Result<Vec<(usize, i64)>> {
    (0..complex.dim().saturating_sub(1))
        .map(|p| {
            let d0 = complex.exterior_derivative(p)?;
            let d1 = complex.exterior_derivative(p + 1)?;
            Ok((p, d1.compose(d0).iter().map(|t| t.2.abs()).max().unwrap_or(0)))
        })
        .collect()
}

/// Outcome of the split-derivative oracle for one degree.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeReport {
    pub degree: usize,
    pub trials: usize,
    pub max_discrepancy: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionReport {
    pub extents: Vec<usize>,
    pub degrees: Vec<DegreeReport>,
}

impl DecompositionReport {
    pub fn max_discrepancy(&self) -> i64 {
        self.degrees.iter().map(|d| d.max_discrepancy).max().unwrap_or(0)
    }

    pub fn passed(&self) -> bool {
        self.max_discrepancy() == 0
    }
}

/// Splits a 4D `p`-cochain into space-like parts per time level and
/// time-like parts per slab, both indexed by spatial cells.
struct SplitCochain {
    space: Vec<Vec<i64>>,
    time: Vec<Vec<i64>>,
}

fn split_cochain(c4: &CubicalComplex, split: &crate::grid::SpacetimeSplit, p: usize, f: &[i64]) -> SplitCochain {
    let s = split.spatial();
    let levels = if c4.is_periodic(0) { c4.extents()[0] } else { c4.extents()[0] + 1 };
    let slabs = c4.extents()[0];
    let space_n = if p <= 3 { s.cell_count(p) } else { 0 };
    let time_n = if p >= 1 { s.cell_count(p - 1) } else { 0 };
    let mut out = SplitCochain { space: vec![vec![0; space_n]; levels], time: vec![vec![0; time_n]; slabs] };
    for (i, &v) in f.iter().enumerate() {
        match split.locate(c4, p, i) {
            SplitCell::Space { level, cell } => out.space[level][cell] = v,
            SplitCell::Time { slab, cell } => out.time[slab][cell] = v,
        }
    }
    out
}

/// Split form of `D_p f` on one `(p+1)`-cell: spatial derivative of the
/// space-like part for space-like cells; time difference of the space-like
/// part minus spatial derivative of the time-like part for time-like cells.
fn split_derivative(c4: &CubicalComplex, split: &crate::grid::SpacetimeSplit, p: usize, f: &SplitCochain) -> Result<Vec<i64>> {
    let s = split.spatial();
    let levels = f.space.len();
    let d_space: Vec<Vec<i64>> = if p < 3 {
        let d = s.exterior_derivative(p)?;
        f.space.iter().map(|x| d.apply_i64(x)).collect()
    } else {
        vec![Vec::new(); levels]
    };
    let d_time: Vec<Vec<i64>> = if p >= 1 {
        let d = s.exterior_derivative(p - 1)?;
        f.time.iter().map(|x| d.apply_i64(x)).collect()
    } else {
        vec![Vec::new(); f.time.len()]
    };
    let mut out = vec![0; c4.cell_count(p + 1)];
    for (r, o) in out.iter_mut().enumerate() {
        *o = match split.locate(c4, p + 1, r) {
            SplitCell::Space { level, cell } => d_space[level][cell],
            SplitCell::Time { slab, cell } => {
                let next = (slab + 1) % levels;
                let dt = f.space.get(next).map_or(0, |x| x[cell]) - f.space[slab][cell];
                dt - if p >= 1 { d_time[slab][cell] } else { 0 }
            }
        };
    }
    Ok(out)
}

/// Checks `D⁽⁴⁾_p f` against its space/time split for random integer
/// cochains with entries in `[-9, 9]`, exactly.
pub fn verify_4d_decomposition(complex4: &CubicalComplex, trials: usize, seed: u64) -> Result<DecompositionReport> {
    let split = complex4.spacetime_split()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degrees = Vec::new();
    for p in 0..complex4.dim() {
        let d4 = complex4.exterior_derivative(p)?;
        let mut worst = 0;
        for _ in 0..trials {
            let f: Vec<i64> = (0..complex4.cell_count(p)).map(|_| rng.random_range(-9..=9)).collect();
            let full = d4.apply_i64(&f);
            let parts = split_cochain(complex4, &split, p, &f);
            let via_split = split_derivative(complex4, &split, p, &parts)?;
            let disc = full.iter().zip(&via_split).map(|(a, b)| (a - b).abs()).max().unwrap_or(0);
            worst = worst.max(disc);
        }
        degrees.push(DegreeReport { degree: p, trials, max_discrepancy: worst });
    }
    Ok(DecompositionReport { extents: complex4.extents().to_vec(), degrees })
}

/// Spatial derivative of the space-like part of a 4D cochain, re-indexed onto
/// the `(p+1)`-cells of the 4D complex (zero on time-like cells).
pub fn space_part_derivative(complex4: &CubicalComplex, p: usize, f: &[i64]) -> Result<Vec<i64>> {
    let split = complex4.spacetime_split()?;
    let parts = split_cochain(complex4, &split, p, f);
    let mut out = vec![0; complex4.cell_count(p + 1)];
    if p >= 3 {
        return Ok(out);
    }
    let d = split.spatial().exterior_derivative(p)?;
    let ds: Vec<Vec<i64>> = parts.space.iter().map(|x| d.apply_i64(x)).collect();
    for (r, o) in out.iter_mut().enumerate() {
        if let SplitCell::Space { level, cell } = split.locate(complex4, p + 1, r) {
            *o = ds[level][cell];
        }
    }
    Ok(out)
}
