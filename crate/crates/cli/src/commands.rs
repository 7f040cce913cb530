//! The four verbs. Each returns the text for stdout and an exit code; files
//! go to the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use conslaw_core::cochain::{FieldSlot, Placement, SlotKind};
use conslaw_core::conservation::{
    assemble_block_operator, check_pattern, exactness_defects, golden_pattern, parse_pattern, verify_4d_decomposition,
};
use conslaw_core::hodge::{build_hodge, MaterialField, MaterialTag, SlotHodges};
use conslaw_core::io::{snapshot_binary, snapshot_csv, write_vtk};
use conslaw_core::models::{row_map, vector_proxy_table, ModelKind, SCHRODINGER_SAFETY};
use conslaw_core::{cfl_bound, estimate_frequency, CubicalComplex, Error, InitialLevels, Simulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, SnapshotFormat};
use crate::error::{exit, CliError};

/// Text for stdout plus the process exit code.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub exit: u8,
    pub text: String,
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    let d = Path::new(&cfg.output.dir);
    if d.is_absolute() {
        d.to_path_buf()
    } else {
        cfg.base_dir.join(d)
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn extents_label(e: &[usize]) -> String {
    e.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

/// Grids with random per-cell materials on which the block pattern is
/// locked, in both placements.
fn pattern_fixtures(seed: u64) -> Result<Vec<(String, SlotHodges)>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grids = [
        CubicalComplex::new(&[3, 3, 3], &[1.0; 3])?,
        CubicalComplex::new(&[4, 3, 2], &[0.5, 0.8, 1.3])?,
        CubicalComplex::with_periodicity(&[3, 4, 3], &[0.7, 0.7, 0.4], &[true, false, true])?,
    ];
    let mut out = Vec::new();
    for (gi, g) in grids.into_iter().enumerate() {
        let c = Arc::new(g);
        for placement in [Placement::Primal, Placement::Dual] {
            let mut h = SlotHodges::vacuum(c.clone(), placement)?;
            for slot in FieldSlot::ALL {
                if gi == 0 && slot.index() % 2 == 0 {
                    continue;
                }
                let values = (0..c.cell_count(3)).map(|_| rng.random_range(0.5..3.0)).collect();
                let m = MaterialField::per_cell(&c, values)?;
                let deg = h.hodge_degree(slot);
                h.set(slot, build_hodge(&c, deg, &m, MaterialTag::Custom(format!("m{}", slot.label())))?)?;
            }
            out.push((format!("{} {placement}", extents_label(c.extents())), h));
        }
    }
    Ok(out)
}

/// Structural checks: exactness, block pattern, space-time split.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut text = String::new();
    let mut csv = String::from("check,target,status,detail\n");
    let mut ok = true;
    let mut record = |text: &mut String, check: &str, target: &str, pass: bool, detail: String| {
        let status = if pass { "PASS" } else { "FAIL" };
        let _ = writeln!(text, "{}", format!("{check}: {status} {target} {detail}").trim_end());
        let _ = writeln!(csv, "{check},{target},{status},{}", detail.replace(',', ";"));
        ok &= pass;
    };

    // d∘d = 0 on the 3D grids (p = 0, 1) and the space-time grids (p = 2).
    let mut worst = [None::<i64>; 3];
    let mut seen = [Vec::new(), Vec::new(), Vec::new()];
    let spatial = cfg.verify.grids.iter().map(|e| CubicalComplex::new(e, &[1.0; 3]));
    let spacetime = cfg.verify.oracle.iter().map(|e| CubicalComplex::new(e, &[1.0; 4]));
    for c in spatial.chain(spacetime) {
        let c = c?;
        for (p, defect) in exactness_defects(&c)? {
            if p < 3 {
                worst[p] = Some(worst[p].unwrap_or(0).max(defect));
                seen[p].push(extents_label(c.extents()));
            }
        }
    }
    for p in 0..3 {
        if let Some(w) = worst[p] {
            record(&mut text, "d∘d=0", &format!("p={p}"), w == 0, format!("max |entry| {w} on {}", seen[p].join(" ")));
        }
    }

    // block pattern
    let golden = match &cfg.verify.golden {
        Some(file) => {
            let path = cfg.base_dir.join(file);
            let t = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            parse_pattern(&t)?
        }
        None => golden_pattern()?,
    };
    for (label, hodges) in pattern_fixtures(cfg.seed)? {
        let op = assemble_block_operator(&hodges)?;
        let fiber = if label.contains("dual") { 1 } else { 3 };
        let mismatches = check_pattern(&op, &golden, fiber, cfg.seed)?;
        let detail = if mismatches.is_empty() {
            format!("{} blocks", golden.len())
        } else {
            mismatches.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
        };
        record(&mut text, "pattern lock", &label, mismatches.is_empty(), detail);
    }

    // space-time split oracle
    for e in &cfg.verify.oracle {
        let c4 = CubicalComplex::new(e, &[1.0; 4])?;
        let report = verify_4d_decomposition(&c4, cfg.verify.trials, cfg.seed)?;
        let d = report.max_discrepancy();
        let _ = writeln!(text, "4D split: max discrepancy {d} ({}, {} trials)", extents_label(e), cfg.verify.trials);
        record(&mut text, "4D split", &extents_label(e), report.passed(), format!("max discrepancy {d}"));
    }

    write(&out_dir(cfg).join("verify.csv"), csv)?;
    Ok(Report { exit: if ok { exit::SUCCESS } else { exit::CHECK_FAILED }, text })
}

/// Row table of a model.
pub fn cmd_rows(model: &str) -> Result<Report, CliError> {
    if ModelKind::parse(model).is_err() {
        return Ok(Report {
            exit: exit::CONFIG,
            text: format!("unknown model `{model}`; available: {}\n", ModelKind::NAMES.join(", ")),
        });
    }
    let mut cfg = RunConfig::new(model, &[2, 2, 2]);
    cfg.base_dir = PathBuf::from(".");
    let c = cfg.complex()?;
    let spec = cfg.build_model(&c)?;
    Ok(Report { exit: exit::SUCCESS, text: format!("{}\n{}", row_map(&spec), vector_proxy_table(&spec)) })
}

/// Incidence matrices and Hodge weights of the configured grid and model.
pub fn cmd_dump_operators(cfg: &RunConfig) -> Result<Report, CliError> {
    let c = cfg.complex()?;
    let model = cfg.build_model(&c)?;
    let dir = out_dir(cfg).join("operators");
    let mut text = String::new();
    for p in 0..c.dim() {
        let d = c.exterior_derivative(p)?;
        let mut s = format!("# D{p}: {} x {}, {} nonzeros (row col value)\n", d.nrows(), d.ncols(), d.nnz());
        for (r, col, v) in d.triplets() {
            let _ = writeln!(s, "{r} {col} {v}");
        }
        write(&dir.join(format!("d{p}.txt")), s)?;
        let _ = writeln!(text, "d{p}: {} x {} ({} nonzeros)", d.nrows(), d.ncols(), d.nnz());
    }
    for part in &model.parts {
        for slot in FieldSlot::ALL {
            let Some(h) = part.operator.hodges().get(slot) else { continue };
            let name = format!("hodge_{}_{}.txt", part.name, slot.label());
            let mut s = format!("# {} Hodge, degree {}, tag {}\n", part.placement(), h.degree(), h.tag().name());
            match (h.weights(), h.matrix()) {
                (Some(w), _) => w.iter().enumerate().for_each(|(i, w)| {
                    let _ = writeln!(s, "{i} {w:?}");
                }),
                (None, Some(m)) => m.triplets().for_each(|(r, col, v)| {
                    let _ = writeln!(s, "{r} {col} {v:?}");
                }),
                (None, None) => {}
            }
            write(&dir.join(&name), s)?;
            let _ = writeln!(text, "{name}");
        }
    }
    Ok(Report { exit: exit::SUCCESS, text })
}

fn snapshot(cfg: &RunConfig, sim: &Simulation, dir: &Path) -> Result<(), CliError> {
    let model = sim.model();
    let step = sim.steps_taken();
    match cfg.output.snapshot_format {
        SnapshotFormat::Vtk => {
            let fields: Vec<(&str, &conslaw_core::Cochain)> =
                model.variables.iter().zip(sim.values()).map(|(v, c)| (v.name.as_str(), c)).collect();
            write(&dir.join(format!("step_{step:06}.vtk")), write_vtk(&model.complex, &fields)?)?;
        }
        SnapshotFormat::Csv => {
            for (v, c) in model.variables.iter().zip(sim.values()) {
                write(&dir.join(format!("{}_{step:06}.csv", v.name)), snapshot_csv(&v.name, c, step, sim.time()))?;
            }
        }
        SnapshotFormat::Binary => {
            for (v, c) in model.variables.iter().zip(sim.values()) {
                write(&dir.join(format!("{}_{step:06}.bin", v.name)), snapshot_binary(c))?;
            }
        }
    }
    Ok(())
}

/// Time integration with diagnostics, snapshots and a run summary.
pub fn cmd_run(cfg: &RunConfig) -> Result<Report, CliError> {
    let started = Instant::now();
    let c = cfg.complex()?;
    let model = cfg.build_model(&c)?;
    let bound = cfl_bound(&model);
    let dt = match cfg.time.dt {
        Some(dt) => dt,
        None if bound.is_finite() => cfg.time.cfl_fraction * bound,
        None => return Err(CliError::Config("no axis is resolved; set time.dt explicitly".into())),
    };
    let initial = cfg.initial_values(&model)?;
    let mut sim = Simulation::new(model.clone(), dt, initial, InitialLevels::Synchronized, cfg.has_dirichlet())?;
    let probes = cfg.probes(&model)?;
    for p in &probes {
        sim.add_probe(*p);
    }
    let dir = out_dir(cfg);
    let snap_dir = dir.join("snapshots");
    let label = model.monitor.label;

    let mut csv = format!("step,time,{label},drift,residual");
    for (i, p) in cfg.probes.iter().enumerate() {
        let _ = write!(csv, ",probe{i}_{}", p.variable);
    }
    csv.push('\n');
    let mut first = None::<f64>;
    let mut last = None::<f64>;
    let mut max_drift = 0.0f64;
    let mut max_residual = None::<f64>;
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); probes.len()];
    let mut diverged = None;

    if cfg.output.snapshot_every > 0 {
        snapshot(cfg, &sim, &snap_dir)?;
    }
    for _ in 0..cfg.time.steps {
        match sim.step() {
            Ok(()) => {}
            Err(Error::Diverged { step, variable }) => {
                diverged = Some((step, variable));
                break;
            }
            Err(e) => return Err(e.into()),
        }
        let s = sim.last_sample().expect("a step records a sample").clone();
        let q0 = *first.get_or_insert(s.monitor);
        let drift = if q0 != 0.0 { (s.monitor - q0) / q0.abs() } else { s.monitor - q0 };
        max_drift = max_drift.max(drift.abs());
        last = Some(s.monitor);
        let residual = if cfg.output.residual_every > 0 && sim.steps_taken() % cfg.output.residual_every == 0 {
            let r = sim.centered_residual()?.max_relative();
            max_residual = Some(max_residual.unwrap_or(0.0).max(r));
            format!("{r:e}")
        } else {
            String::new()
        };
        let _ = write!(csv, "{},{:e},{:e},{:e},{residual}", s.step, s.time, s.monitor, drift);
        for (k, v) in s.probes.iter().enumerate() {
            let _ = write!(csv, ",{v:e}");
            series[k].push(*v);
        }
        csv.push('\n');
        if cfg.output.snapshot_every > 0 && sim.steps_taken() % cfg.output.snapshot_every == 0 {
            snapshot(cfg, &sim, &snap_dir)?;
        }
    }
    if let Some((step, variable)) = &diverged {
        let _ = writeln!(csv, "DIVERGED,{step},{variable}");
    }
    write(&dir.join(&cfg.output.diagnostics), &csv)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "model: {}", model.name);
    let _ = writeln!(summary, "grid: {}", extents_label(c.extents()));
    let _ = writeln!(summary, "dt: {dt:e} (stability bound {bound:e})");
    let _ = writeln!(summary, "steps: {}", sim.steps_taken());
    if let Some(q) = last {
        let _ = writeln!(summary, "final {label}: {q:e}");
        let _ = writeln!(summary, "max relative {label} drift: {max_drift:e}");
    }
    if let Some(r) = max_residual {
        let _ = writeln!(summary, "max relative residual: {r:e}");
    }
    for (i, xs) in series.iter().enumerate() {
        if let Some(w) = estimate_frequency(xs, dt) {
            let _ = writeln!(summary, "probe{i} angular frequency: {w:e}");
            if model.kind == ModelKind::Schrodinger {
                let _ = writeln!(summary, "probe{i} energy estimate: {:e}", cfg.material.hbar * w);
            }
        }
    }
    if model.kind == ModelKind::Schrodinger {
        let _ = writeln!(summary, "time step safety factor: {SCHRODINGER_SAFETY}");
    }
    let status = match &diverged {
        Some((step, variable)) => format!("DIVERGED at step {step} ({variable})"),
        None => "completed".into(),
    };
    let _ = writeln!(summary, "status: {status}");
    let _ = writeln!(summary, "wall time: {:.3} s", started.elapsed().as_secs_f64());
    write(&dir.join("summary.txt"), &summary)?;
    Ok(Report { exit: if diverged.is_some() { exit::DIVERGED } else { exit::SUCCESS }, text: summary })
}
