//! Staggered leapfrog on a [`ModelSpec`].
//!
//! Integer-level variables live at `t_n = nΔt`, half-level variables at
//! `t_{n-½}`. A step first advances every half-level variable through its
//! evolution row (sources sampled at `t_n`), then every integer-level
//! variable (sources at `t_{n+½}`). Each update solves the row for the time
//! block, which is diagonal: `rate = (source - spatial) / diag`.

use std::sync::Arc;

use crate::cochain::{Cochain, Placement, SlotKind, SourceSlot};
use crate::conservation::{evaluate_residual, RowNorm};
use crate::error::{invalid, Error, Result};
use crate::grid::MAX_DIM;
use crate::models::{CflRule, Evolution, ModelSpec, TimeLevel, SCHRODINGER_SAFETY};

/// Largest stable time step of the explicit scheme.
///
/// Wave models: `1 / (c_max sqrt(Σ 1/Δ_i²))` over axes that carry a
/// derivative (extent > 1). Schrödinger: `0.9 / ((ħ/2m) Σ 4/Δ_i² + V_max/ħ)`.
pub fn cfl_bound(model: &ModelSpec) -> f64 {
    let inv2: f64 = model.complex.resolved_axes().map(|a| model.complex.spacings()[a].powi(-2)).sum();
    match model.cfl {
        CflRule::Wave { c_max } => {
            if inv2 == 0.0 || c_max == 0.0 {
                f64::INFINITY
            } else {
                1.0 / (c_max * inv2.sqrt())
            }
        }
        CflRule::Schrodinger { hbar, mass, v_max } => {
            let rate = hbar / (2.0 * mass) * 4.0 * inv2 + v_max / hbar;
            if rate == 0.0 {
                f64::INFINITY
            } else {
                SCHRODINGER_SAFETY / rate
            }
        }
    }
}

/// How the initial values of half-level variables are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialLevels {
    /// All variables are given at `t = 0`; half-level ones are moved back to
    /// `-Δt/2` with one half step.
    Synchronized,
    /// Half-level variables are already given at `-Δt/2`.
    Staggered,
}

/// A single sampled cochain entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Probe {
    pub var: usize,
    pub cell: usize,
    pub component: usize,
}

impl Probe {
    /// The cell of `var`'s degree nearest to `point`, restricted to
    /// orientation `axes` if given.
    pub fn nearest(model: &ModelSpec, var: usize, point: [f64; 3], axes: Option<u8>, component: usize) -> Result<Self> {
        let v = model.variables.get(var).ok_or_else(|| Error::InvalidArgument(format!("no variable {var}")))?;
        if component >= v.fiber {
            return invalid(format!("component {component} out of range for {}", v.name));
        }
        let c = &model.complex;
        let range = match axes {
            Some(a) => c
                .orientation_range(v.degree, a)
                .ok_or_else(|| Error::InvalidArgument(format!("no {}-cells with orientation {a:#b}", v.degree)))?,
            None => 0..c.cell_count(v.degree),
        };
        let dist = |i: usize| {
            let x = c.center(v.degree, i);
            (0..3).map(|k| (x[k] - point[k]).powi(2)).sum::<f64>()
        };
        let cell = range
            .min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
            .ok_or_else(|| Error::InvalidArgument("empty probe range".into()))?;
        Ok(Self { var, cell, component })
    }
}

/// Diagnostics recorded at integer time `t_n`, in the middle of step `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    /// The monitored quadratic form (energy or norm).
    pub monitor: f64,
    pub probes: Vec<f64>,
}

/// Residual norms of the active rows, each evaluated at its own time center.
#[derive(Clone, Debug)]
pub struct StepResidual {
    pub rows: Vec<(usize, SourceSlot, RowNorm)>,
}

impl StepResidual {
    /// Largest row L2 norm over the largest term norm of any row; rows
    /// whose terms are all round-off are measured against the others.
    pub fn max_relative(&self) -> f64 {
        let scale = self.rows.iter().map(|r| r.2.scale).fold(0.0, f64::max);
        let l2 = self.rows.iter().map(|r| r.2.l2).fold(0.0, f64::max);
        if scale > 0.0 {
            l2 / scale
        } else {
            l2
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().map(|r| r.2.max).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
struct Update {
    ev: Evolution,
    divisor: Vec<f64>,
    mask: Option<Vec<bool>>,
}

/// Leapfrog state and driver.
#[derive(Clone, Debug)]
pub struct Simulation {
    model: Arc<ModelSpec>,
    dt: f64,
    step: usize,
    values: Vec<Cochain>,
    previous: Vec<Cochain>,
    half: Vec<Update>,
    integer: Vec<Update>,
    probes: Vec<Probe>,
    sample: Option<Sample>,
    accumulator: Option<(usize, Cochain)>,
    clamped: bool,
}

impl Simulation {
    /// `initial` holds one primal cochain per model variable. Boundary cells
    /// on non-periodic axes are held at zero when `clamp_boundary` is set.
    pub fn new(
        model: Arc<ModelSpec>,
        dt: f64,
        initial: Vec<Cochain>,
        levels: InitialLevels,
        clamp_boundary: bool,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return invalid(format!("time step must be finite and nonzero, got {dt}"));
        }
        if initial.len() != model.variables.len() {
            return invalid(format!("expected {} initial cochains, got {}", model.variables.len(), initial.len()));
        }
        for (v, c) in model.variables.iter().zip(&initial) {
            if c.degree() != v.degree || c.fiber() != v.fiber || c.placement() != Placement::Primal {
                return Err(Error::ShapeMismatch(format!(
                    "initial value of {} must be a primal {}-cochain with fiber {}",
                    v.name, v.degree, v.fiber
                )));
            }
            if !crate::cochain::same_complex(c.complex(), &model.complex) {
                return invalid(format!("initial value of {} lives on another complex", v.name));
            }
        }
        let (mut half, mut integer) = (Vec::new(), Vec::new());
        for ev in &model.evolutions {
            let part = &model.parts[ev.part];
            let temporal = part.operator.temporal_diagonal(ev.row)?;
            let term = model.rate_term(ev)?;
            let rate_diag = model.term_diagonal(&term);
            let divisor: Vec<f64> = temporal.iter().zip(&rate_diag).map(|(a, b)| a * b).collect();
            let var = &model.variables[ev.var];
            let mask = (clamp_boundary && model.complex.dim() > 0)
                .then(|| model.complex.boundary_flags(var.degree))
                .filter(|m| m.iter().any(|&b| b));
            let u = Update { ev: *ev, divisor, mask };
            match var.level {
                TimeLevel::Half => half.push(u),
                TimeLevel::Integer => integer.push(u),
            }
        }
        let mut values = initial;
        for u in half.iter().chain(&integer) {
            if let Some(m) = &u.mask {
                values[u.ev.var].clamp(m);
            }
        }
        let mut sim = Self {
            model,
            dt,
            step: 0,
            previous: values.clone(),
            values,
            half,
            integer,
            probes: Vec::new(),
            sample: None,
            accumulator: None,
            clamped: clamp_boundary,
        };
        if levels == InitialLevels::Synchronized {
            let updates = sim.half.clone();
            sim.advance(&updates, -0.5 * dt, 0.0)?;
            sim.previous = sim.values.clone();
        }
        Ok(sim)
    }

    pub fn model(&self) -> &Arc<ModelSpec> {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Time of the integer-level variables.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn values(&self) -> &[Cochain] {
        &self.values
    }

    pub fn value(&self, name: &str) -> Option<&Cochain> {
        self.model.variable_index(name).map(|i| &self.values[i])
    }

    /// Values before the last update of each variable.
    pub fn previous(&self) -> &[Cochain] {
        &self.previous
    }

    pub fn add_probe(&mut self, probe: Probe) {
        self.probes.push(probe);
    }

    /// Diagnostics of the most recent step.
    pub fn last_sample(&self) -> Option<&Sample> {
        self.sample.as_ref()
    }

    /// Accumulates `Σ Δt x^n` of an integer-level variable (for example the
    /// displacement `ν` with `u = ∂_t ν`).
    pub fn track_integral(&mut self, var: usize) -> Result<()> {
        match self.model.variables.get(var) {
            Some(v) if v.level == TimeLevel::Integer => {
                self.accumulator = Some((var, self.values[var].zeros_like()));
                Ok(())
            }
            _ => invalid("only integer-level variables can be integrated"),
        }
    }

    pub fn integral(&self) -> Option<&Cochain> {
        self.accumulator.as_ref().map(|a| &a.1)
    }

    fn rate(&self, u: &Update, t: f64) -> Result<Cochain> {
        let model = &self.model;
        let part = &model.parts[u.ev.part];
        let op = &part.operator;
        let field = model.part_field_where(u.ev.part, &self.values, |s| {
            op.row_blocks(u.ev.row).any(|b| b.col == s && !b.kind.is_temporal())
        })?;
        let mut rhs = op.apply_row_spatial(u.ev.row, &field)?;
        rhs.scale(-1.0);
        if let Some(g) = model.part_source(u.ev.part, u.ev.row, &self.values, t)? {
            rhs.axpy(1.0, &g)?;
        }
        let var = &model.variables[u.ev.var];
        let mut vals = rhs.into_values();
        for chunk in vals.chunks_mut(u.divisor.len()) {
            for (r, d) in chunk.iter_mut().zip(&u.divisor) {
                *r /= d;
            }
        }
        Cochain::from_values(model.complex.clone(), var.degree, var.fiber, Placement::Primal, vals)
    }

    fn advance(&mut self, updates: &[Update], dt: f64, t: f64) -> Result<()> {
        let rates = updates.iter().map(|u| self.rate(u, t)).collect::<Result<Vec<_>>>()?;
        for (u, r) in updates.iter().zip(rates) {
            let x = &mut self.values[u.ev.var];
            x.axpy(dt, &r)?;
            if let Some(m) = &u.mask {
                x.clamp(m);
            }
            if !x.is_finite() {
                return Err(Error::Diverged { step: self.step, variable: self.model.variables[u.ev.var].name.clone() });
            }
        }
        Ok(())
    }

    fn monitor(&self) -> Result<f64> {
        let mut q = 0.0;
        for term in &self.model.monitor.terms {
            let x = &self.values[term.var];
            let p = match self.model.variables[term.var].level {
                TimeLevel::Integer => term.hodge.pairing(x, x)?,
                TimeLevel::Half => term.hodge.pairing(x, &self.previous[term.var])?,
            };
            q += 0.5 * term.coef * p;
        }
        Ok(q)
    }

    /// One leapfrog step.
    pub fn step(&mut self) -> Result<()> {
        let t = self.time();
        let half = std::mem::take(&mut self.half);
        for u in &half {
            self.previous[u.ev.var] = self.values[u.ev.var].clone();
        }
        let res = self.advance(&half, self.dt, t);
        self.half = half;
        res?;

        let probes = self
            .probes
            .iter()
            .map(|p| {
                let x = &self.values[p.var];
                x.values()[p.component * x.cells() + p.cell]
            })
            .collect();
        self.sample = Some(Sample { step: self.step, time: t, monitor: self.monitor()?, probes });
        if let Some((var, acc)) = &mut self.accumulator {
            acc.axpy(self.dt, &self.values[*var])?;
        }

        let integer = std::mem::take(&mut self.integer);
        for u in &integer {
            self.previous[u.ev.var] = self.values[u.ev.var].clone();
        }
        let res = self.advance(&integer, self.dt, t + 0.5 * self.dt);
        self.integer = integer;
        res?;
        self.step += 1;
        Ok(())
    }

    /// Runs `steps` steps, handing each step's sample to `observer`.
    pub fn run<F>(&mut self, steps: usize, mut observer: F) -> Result<()>
    where
        F: FnMut(&Sample) -> Result<()>,
    {
        for _ in 0..steps {
            self.step()?;
            if let Some(s) = &self.sample {
                observer(s)?;
            }
        }
        Ok(())
    }

    /// Makes the following steps run backwards in time: the half-level group
    /// is advanced once, then `Δt` changes sign. Reversing, taking `n` steps
    /// and reversing again restores the state of `n` steps earlier up to
    /// round-off.
    pub fn reverse_time(&mut self) -> Result<()> {
        let t = self.time();
        let half = self.half.clone();
        self.advance(&half, self.dt, t)?;
        self.dt = -self.dt;
        // Integer time is measured from the current level backwards.
        self.step = 0;
        Ok(())
    }

    /// Residuals of the active rows after the last step: rows advancing
    /// half-level variables are centered at `t_n`, rows advancing
    /// integer-level variables at `t_{n+½}`, constraint rows use the current
    /// values. Clamped boundary cells are excluded.
    pub fn centered_residual(&self) -> Result<StepResidual> {
        if self.step == 0 {
            return invalid("no step taken yet");
        }
        let model = &self.model;
        let dt = self.dt;
        let n_vars = model.variables.len();
        let t_int = (self.step - 1) as f64 * dt;
        let mid = |i: usize| Cochain::linear_combination(0.5, &self.values[i], 0.5, &self.previous[i]);
        let diff = |i: usize| Cochain::linear_combination(1.0 / dt, &self.values[i], -1.0 / dt, &self.previous[i]);
        let mut out = Vec::new();
        for (pi, part) in model.parts.iter().enumerate() {
            for row in part.active_rows() {
                let ev = model.evolutions.iter().find(|e| e.part == pi && e.row == row);
                let (values, rates, t) = match ev.map(|e| (e, model.variables[e.var].level)) {
                    Some((e, TimeLevel::Half)) => {
                        let values = (0..n_vars)
                            .map(|i| match model.variables[i].level {
                                TimeLevel::Integer => Ok(self.previous[i].clone()),
                                TimeLevel::Half => mid(i),
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let mut rates = vec![None; n_vars];
                        rates[e.var] = Some(diff(e.var)?);
                        (values, rates, t_int)
                    }
                    Some((e, TimeLevel::Integer)) => {
                        let values = (0..n_vars)
                            .map(|i| match model.variables[i].level {
                                TimeLevel::Integer => mid(i),
                                TimeLevel::Half => Ok(self.values[i].clone()),
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let mut rates = vec![None; n_vars];
                        rates[e.var] = Some(diff(e.var)?);
                        (values, rates, t_int + 0.5 * dt)
                    }
                    None => (self.values.clone(), vec![None; n_vars], self.time()),
                };
                let field = model.part_field(pi, &values)?;
                let sources = model.part_sources(pi, &values, t)?;
                let rates = model.part_rates(pi, &rates)?;
                let residual = evaluate_residual(&part.operator, &field, &sources, &rates)?;
                let mut norm = residual.norm(row);
                let mask = self.clamped.then(|| {
                    let deg = match part.placement() {
                        Placement::Primal => row.degree(),
                        Placement::Dual => 3 - row.degree(),
                    };
                    model.complex.boundary_flags(deg)
                });
                if let Some(m) = &mask {
                    let r = residual.row(row);
                    let n = m.len();
                    let kept = r.values().iter().enumerate().filter(|(k, _)| !m[k % n]).map(|(_, v)| *v);
                    let (mut l2, mut max) = (0.0f64, 0.0f64);
                    for v in kept {
                        l2 += v * v;
                        max = max.max(v.abs());
                    }
                    norm.l2 = l2.sqrt();
                    norm.max = max;
                }
                out.push((pi, row, norm));
            }
        }
        Ok(StepResidual { rows: out })
    }
}

/// Angular frequency of a sampled oscillation from the three-term recurrence
/// `x_{n+1} + x_{n-1} = 2cos(ωΔt) x_n`, fitted in least squares.
pub fn estimate_frequency(series: &[f64], dt: f64) -> Option<f64> {
    if series.len() < 3 {
        return None;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for w in series.windows(3) {
        num += w[1] * (w[0] + w[2]);
        den += w[1] * w[1];
    }
    if den == 0.0 {
        return None;
    }
    let c = (num / (2.0 * den)).clamp(-1.0, 1.0);
    Some(c.acos() / dt.abs())
}

/// Sub-cell position of the maximum of a positive sampled pulse: a parabola
/// through the logarithms of the peak sample and its neighbours (exact for a
/// Gaussian). Indices wrap around.
pub fn peak_position(samples: &[f64]) -> Option<f64> {
    let n = samples.len();
    if n < 3 {
        return None;
    }
    let (k, &peak) = samples.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let (l, r) = (samples[(k + n - 1) % n], samples[(k + 1) % n]);
    if !(peak > 0.0 && l > 0.0 && r > 0.0) {
        return Some(k as f64);
    }
    let (a, b, c) = (l.ln(), peak.ln(), r.ln());
    let den = a - 2.0 * b + c;
    let shift = if den == 0.0 { 0.0 } else { 0.5 * (a - c) / den };
    Some(k as f64 + shift)
}

/// Cell centers of `var` along one axis through the origin row: convenience
/// for line probes.
pub fn line_cells(model: &ModelSpec, var: usize, axes: u8, axis: usize) -> Result<Vec<usize>> {
    let v = &model.variables[var];
    let c = &model.complex;
    let range = c
        .orientation_range(v.degree, axes)
        .ok_or_else(|| Error::InvalidArgument(format!("no {}-cells with orientation {axes:#b}", v.degree)))?;
    let mut cells: Vec<usize> = range
        .filter(|&i| {
            let cell = c.cell(v.degree, i);
            (0..MAX_DIM.min(c.dim())).all(|a| a == axis || cell.pos[a] == 0)
        })
        .collect();
    cells.sort_by_key(|&i| c.cell(v.degree, i).pos[axis]);
    Ok(cells)
}
