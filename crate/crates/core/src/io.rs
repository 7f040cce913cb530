//! Cochain snapshots, legacy VTK output and per-cell material tables.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::cochain::{Cochain, Placement};
use crate::error::{invalid, Error, Result};
use crate::grid::{mask_axes, Cell, CubicalComplex, MAX_DIM};

/// CSV snapshot: a `#` header line with the cochain's shape followed by one
/// row per cell (`index,axes,x,y,z,c0[,c1,c2]`). Values are printed with
/// round-trip precision.
pub fn snapshot_csv(name: &str, c: &Cochain, step: usize, time: f64) -> String {
    let complex = c.complex();
    let mut s = String::new();
    let extents: Vec<String> = complex.extents().iter().map(usize::to_string).collect();
    let _ = writeln!(
        s,
        "# variable={name} degree={} fiber={} placement={} extents={} step={step} time={time:?}",
        c.degree(),
        c.fiber(),
        c.placement(),
        extents.join("x")
    );
    s.push_str("index,axes,x,y,z");
    for k in 0..c.fiber() {
        let _ = write!(s, ",c{k}");
    }
    s.push('\n');
    let p = c.index_degree();
    let n = c.cells();
    for i in 0..n {
        let cell = complex.cell(p, i);
        let x = complex.center(p, i);
        let _ = write!(s, "{i},{:0w$b},{:?},{:?},{:?}", cell.axes, x[0], x[1], x[2], w = complex.dim());
        for k in 0..c.fiber() {
            let _ = write!(s, ",{:?}", c.values()[k * n + i]);
        }
        s.push('\n');
    }
    s
}

/// Reads the values of a [`snapshot_csv`] back into a cochain on `complex`.
pub fn read_snapshot_csv(complex: &Arc<CubicalComplex>, text: &str) -> Result<Cochain> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty snapshot".into()))?;
    let field = |key: &str| {
        header
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::InvalidArgument(format!("snapshot header lacks `{key}`")))
    };
    let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| Error::InvalidArgument(format!("bad header value `{v}`: {e}")));
    let degree = parse_usize(field("degree")?)?;
    let fiber = parse_usize(field("fiber")?)?;
    let placement = match field("placement")? {
        "primal" => Placement::Primal,
        "dual" => Placement::Dual,
        other => return invalid(format!("unknown placement `{other}`")),
    };
    let mut c = Cochain::zeros(complex.clone(), degree, fiber, placement)?;
    let n = c.cells();
    lines.next();
    let mut seen = 0;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 + fiber {
            return invalid(format!("snapshot row {} has {} columns, expected {}", lineno + 3, cols.len(), 5 + fiber));
        }
        let i = parse_usize(cols[0])?;
        if i >= n {
            return invalid(format!("cell index {i} out of range"));
        }
        for k in 0..fiber {
            c.values_mut()[k * n + i] =
                cols[5 + k].parse().map_err(|e| Error::InvalidArgument(format!("bad value `{}`: {e}", cols[5 + k])))?;
        }
        seen += 1;
    }
    if seen != n {
        return invalid(format!("snapshot has {seen} rows, the complex has {n} cells"));
    }
    Ok(c)
}

/// Raw little-endian snapshot: `u32` degree, fiber, placement (0 primal,
/// 1 dual), `u64` length, then the values as `f64`.
pub fn snapshot_binary(c: &Cochain) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * c.values().len());
    out.extend_from_slice(&(c.degree() as u32).to_le_bytes());
    out.extend_from_slice(&(c.fiber() as u32).to_le_bytes());
    out.extend_from_slice(&u32::from(c.placement() == Placement::Dual).to_le_bytes());
    out.extend_from_slice(&(c.values().len() as u64).to_le_bytes());
    for v in c.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_snapshot_binary(complex: &Arc<CubicalComplex>, bytes: &[u8]) -> Result<Cochain> {
    if bytes.len() < 20 {
        return invalid("binary snapshot is truncated");
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 20 + 8 * len {
        return invalid("binary snapshot length does not match its header");
    }
    let placement = if u32_at(8) == 0 { Placement::Primal } else { Placement::Dual };
    let values = bytes[20..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    Cochain::from_values(complex.clone(), u32_at(0), u32_at(4), placement, values)
}

fn wrap(complex: &CubicalComplex, axes: u8, mut pos: [usize; MAX_DIM]) -> Option<usize> {
    let counts = complex.orientation_counts(axes.count_ones() as usize, axes)?;
    for a in 0..complex.dim() {
        if complex.is_periodic(a) {
            pos[a] %= counts[a];
        }
    }
    complex.index_of(&Cell { axes, pos })
}

fn top_positions(complex: &CubicalComplex) -> Vec<[usize; MAX_DIM]> {
    let e = complex.extents();
    let mut out = Vec::with_capacity(e.iter().product());
    for k in 0..e[2] {
        for j in 0..e[1] {
            for i in 0..e[0] {
                out.push([i, j, k, 0]);
            }
        }
    }
    out
}

/// Vector proxy of a primal 1- or 2-cochain averaged onto each 3-cell.
fn cell_proxy(c: &Cochain, comp: usize) -> Vec<[f64; 3]> {
    let complex = c.complex();
    let p = c.degree();
    let n = c.cells();
    let vals = &c.values()[comp * n..(comp + 1) * n];
    top_positions(complex)
        .into_iter()
        .map(|pos| {
            let mut v = [0.0; 3];
            for axes in complex.orientations(p) {
                let free: Vec<usize> = (0..3).filter(|a| axes & (1 << a) == 0).collect();
                let (mut sum, mut count) = (0.0, 0.0);
                for corner in 0..(1usize << free.len()) {
                    let mut q = pos;
                    for (bit, &a) in free.iter().enumerate() {
                        q[a] += (corner >> bit) & 1;
                    }
                    if let Some(i) = wrap(complex, axes, q) {
                        sum += vals[i] / complex.measure(p, i);
                        count += 1.0;
                    }
                }
                let mean = if count > 0.0 { sum / count } else { 0.0 };
                let spanned: Vec<usize> = mask_axes(axes).collect();
                match p {
                    1 => v[spanned[0]] = mean,
                    _ => {
                        let normal = free[0];
                        // The xz face carries -b_y.
                        v[normal] = if normal == 1 { -mean } else { mean };
                    }
                }
            }
            v
        })
        .collect()
}

/// Legacy ASCII VTK (`STRUCTURED_POINTS`) of primal cochains on a 3D
/// complex. 0-cochains become point data (periodic vertices are repeated),
/// 1- and 2-cochains become cell-averaged vector proxies, 3-cochains cell
/// densities. Fiber components are written as separate arrays.
pub fn write_vtk(complex: &CubicalComplex, fields: &[(&str, &Cochain)]) -> Result<String> {
    if complex.dim() != 3 {
        return invalid("VTK output needs a 3D complex");
    }
    let e = complex.extents();
    let h = complex.spacings();
    let mut s = String::from("# vtk DataFile Version 3.0\nstaggered cochain snapshot\nASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", e[0] + 1, e[1] + 1, e[2] + 1);
    s.push_str("ORIGIN 0 0 0\n");
    let _ = writeln!(s, "SPACING {:?} {:?} {:?}", h[0], h[1], h[2]);
    let label = |name: &str, c: &Cochain, k: usize| if c.fiber() == 1 { name.to_string() } else { format!("{name}_{k}") };

    let points: Vec<_> = fields.iter().filter(|(_, c)| c.degree() == 0).collect();
    if !points.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", (e[0] + 1) * (e[1] + 1) * (e[2] + 1));
        for (name, c) in points {
            for k in 0..c.fiber() {
                let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", label(name, c, k));
                for z in 0..=e[2] {
                    for y in 0..=e[1] {
                        for x in 0..=e[0] {
                            let i = wrap(complex, 0, [x, y, z, 0]).expect("vertex in range");
                            let _ = writeln!(s, "{:?}", c.component(k)[i]);
                        }
                    }
                }
            }
        }
    }
    let cells: Vec<_> = fields.iter().filter(|(_, c)| c.degree() > 0).collect();
    if !cells.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", e[0] * e[1] * e[2]);
        for (name, c) in cells {
            if c.placement() != Placement::Primal {
                return invalid(format!("VTK output of `{name}`: only primal cochains are supported"));
            }
            for k in 0..c.fiber() {
                match c.degree() {
                    3 => {
                        let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", label(name, c, k));
                        for pos in top_positions(complex) {
                            let i = wrap(complex, 0b111, pos).expect("cell in range");
                            let _ = writeln!(s, "{:?}", c.component(k)[i] / complex.measure(3, i));
                        }
                    }
                    _ => {
                        let _ = writeln!(s, "VECTORS {} double", label(name, c, k));
                        for v in cell_proxy(c, k) {
                            let _ = writeln!(s, "{:?} {:?} {:?}", v[0], v[1], v[2]);
                        }
                    }
                }
            }
        }
    }
    Ok(s)
}

/// Per-cell material values from CSV. Accepted rows are either `value` (in
/// x-fastest cell order) or `i,j,k,value`; a non-numeric first line is
/// treated as a header.
pub fn read_material_csv(complex: &CubicalComplex, text: &str) -> Result<Vec<f64>> {
    if complex.dim() != 3 {
        return invalid("material tables need a 3D complex");
    }
    let n = complex.cell_count(3);
    let mut out = vec![f64::NAN; n];
    let order = top_positions(complex);
    let mut next = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
        let nums = match nums {
            Ok(v) => v,
            Err(_) if lineno == 0 => continue,
            Err(e) => return invalid(format!("material table line {}: {e}", lineno + 1)),
        };
        let (pos, value) = match nums.as_slice() {
            [v] => {
                let pos = *order.get(next).ok_or_else(|| Error::InvalidArgument("material table has too many rows".into()))?;
                next += 1;
                (pos, *v)
            }
            [i, j, k, v] => ([*i as usize, *j as usize, *k as usize, 0], *v),
            _ => return invalid(format!("material table line {}: expected 1 or 4 columns", lineno + 1)),
        };
        let idx = complex
            .index_of(&Cell { axes: 0b111, pos })
            .ok_or_else(|| Error::InvalidArgument(format!("material table line {}: cell out of range", lineno + 1)))?;
        out[idx] = value;
    }
    if let Some(i) = out.iter().position(|v| v.is_nan()) {
        return invalid(format!("material table misses cell {:?}", &complex.cell(3, i).pos[..3]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cochain::{project_function, project_proxy};

    fn grid() -> Arc<CubicalComplex> {
        Arc::new(CubicalComplex::new(&[2, 3, 2], &[0.5, 0.25, 1.0]).unwrap())
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = grid();
        let x = project_function(&c, 1, 3, Placement::Primal, |x, _, k| (x[0] + 0.1 * k as f64).exp() / 3.0).unwrap();
        let text = snapshot_csv("u", &x, 7, 0.35);
        assert!(text.starts_with("# variable=u degree=1 fiber=3 placement=primal extents=2x3x2 step=7"));
        assert_eq!(read_snapshot_csv(&c, &text).unwrap(), x);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let c = grid();
        let x = project_function(&c, 2, 1, Placement::Dual, |x, _, _| x[1].sin() + 1e-300).unwrap();
        assert_eq!(read_snapshot_binary(&c, &snapshot_binary(&x)).unwrap(), x);
        assert!(read_snapshot_binary(&c, &snapshot_binary(&x)[..30]).is_err());
    }

    #[test]
    fn vtk_recovers_constant_proxies() {
        let c = grid();
        let e = project_proxy(&c, 1, Placement::Primal, |_| [1.0, 2.0, 3.0]).unwrap();
        let b = project_proxy(&c, 2, Placement::Primal, |_| [4.0, 5.0, 6.0]).unwrap();
        let cells = cell_proxy(&e, 0);
        assert!(cells.iter().all(|v| (v[0] - 1.0).abs() < 1e-14 && (v[1] - 2.0).abs() < 1e-14 && (v[2] - 3.0).abs() < 1e-14));
        let faces = cell_proxy(&b, 0);
        assert!(faces.iter().all(|v| (v[0] - 4.0).abs() < 1e-14 && (v[1] - 5.0).abs() < 1e-14 && (v[2] - 6.0).abs() < 1e-14));
        let phi = Cochain::zeros(c.clone(), 0, 1, Placement::Primal).unwrap();
        let vtk = write_vtk(&c, &[("phi", &phi), ("e", &e), ("b", &b)]).unwrap();
        assert!(vtk.contains("DIMENSIONS 3 4 3"));
        assert!(vtk.contains("POINT_DATA 36"));
        assert!(vtk.contains("CELL_DATA 12"));
    }

    #[test]
    fn material_table_forms() {
        let c = grid();
        let plain: String = (0..12).map(|i| format!("{}\n", i + 1)).collect();
        let v = read_material_csv(&c, &format!("eps\n{plain}")).unwrap();
        let idx = c.index_of(&Cell { axes: 0b111, pos: [1, 0, 0, 0] }).unwrap();
        assert_eq!(v[idx], 2.0);
        let mut indexed = String::from("i,j,k,value\n");
        for k in 0..2 {
            for j in 0..3 {
                for i in 0..2 {
                    indexed.push_str(&format!("{i},{j},{k},{}\n", 10 * i + j + 100 * k));
                }
            }
        }
        let w = read_material_csv(&c, &indexed).unwrap();
        let idx = c.index_of(&Cell { axes: 0b111, pos: [1, 2, 1, 0] }).unwrap();
        assert_eq!(w[idx], 112.0);
        assert!(read_material_csv(&c, "1\n2\n").is_err());
    }
}
