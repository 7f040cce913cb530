//! Hand-written finite-difference steppers on plain arrays, used as
//! independent references for the general solver. They share nothing with
//! the core crate except the cell lookup used to move data in and out of
//! cochains.

#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use conslaw_cli::expr::Expression;
use conslaw_cli::RunConfig;
use conslaw_core::grid::Cell;
use conslaw_core::{Cochain, CubicalComplex};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Relative max-norm distance.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Scalar array on lattice points `0..n[a]` per axis, row-major.
#[derive(Clone, Debug)]
pub struct Array3 {
    pub n: [usize; 3],
    pub v: Vec<f64>,
}

impl Array3 {
    pub fn zeros(n: [usize; 3]) -> Self {
        Self { n, v: vec![0.0; n[0] * n[1] * n[2]] }
    }

    fn at(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.v[self.at(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, x: f64) {
        let a = self.at(i, j, k);
        self.v[a] = x;
    }

    pub fn add(&mut self, i: usize, j: usize, k: usize, x: f64) {
        let a = self.at(i, j, k);
        self.v[a] += x;
    }
}

fn cell(axes: u8, i: usize, j: usize, k: usize) -> Cell {
    Cell { axes, pos: [i, j, k, 0] }
}

/// Per-cell values of a coefficient expression at cell centers.
pub fn cell_values(expr: &Expression, n: [usize; 3], h: [f64; 3]) -> Array3 {
    let mut a = Array3::zeros(n);
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let x = [(i as f64 + 0.5) * h[0], (j as f64 + 0.5) * h[1], (k as f64 + 0.5) * h[2], 0.0];
                a.set(i, j, k, expr.eval(&x, 0.0));
            }
        }
    }
    a
}

/// Yee scheme in a perfectly conducting box:
/// `∂_t B = −curl E`, `ε ∂_t E = curl(ν B)`, tangential `E` and normal `B`
/// held at zero on the walls.
pub struct Yee {
    pub n: [usize; 3],
    pub h: [f64; 3],
    pub dt: f64,
    /// `e[a]` at edge centers along axis `a`.
    pub e: [Array3; 3],
    /// `b[a]` at centers of faces normal to axis `a`.
    pub b: [Array3; 3],
    eps: [Array3; 3],
    nu: [Array3; 3],
}

impl Yee {
    fn edge_dims(n: [usize; 3], a: usize) -> [usize; 3] {
        let mut d = [n[0] + 1, n[1] + 1, n[2] + 1];
        d[a] = n[a];
        d
    }

    fn face_dims(n: [usize; 3], a: usize) -> [usize; 3] {
        let mut d = n;
        d[a] = n[a] + 1;
        d
    }

    /// Reads `E = e/length` and `B = b/area` from cochains; the `xz` face
    /// carries `−B_y`.
    pub fn new(c: &CubicalComplex, eps: &Array3, nu: &Array3, dt: f64, e: &Cochain, b: &Cochain) -> Self {
        let n = [c.extents()[0], c.extents()[1], c.extents()[2]];
        let h = [c.spacings()[0], c.spacings()[1], c.spacings()[2]];
        let mut ea: [Array3; 3] = std::array::from_fn(|a| Array3::zeros(Self::edge_dims(n, a)));
        let mut ba: [Array3; 3] = std::array::from_fn(|a| Array3::zeros(Self::face_dims(n, a)));
        let mut eps_e: [Array3; 3] = std::array::from_fn(|a| Array3::zeros(Self::edge_dims(n, a)));
        let mut nu_f: [Array3; 3] = std::array::from_fn(|a| Array3::zeros(Self::face_dims(n, a)));
        for a in 0..3 {
            let d = Self::edge_dims(n, a);
            let (p, q) = ((a + 1) % 3, (a + 2) % 3);
            for i in 0..d[0] {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        let idx = c.index_of(&cell(1 << a, i, j, k)).unwrap();
                        ea[a].set(i, j, k, e.values()[idx] / h[a]);
                        // average over the cells around the edge that exist
                        let pos = [i, j, k];
                        let (mut s, mut m) = (0.0, 0);
                        for dp in [0, 1] {
                            for dq in [0, 1] {
                                let (ip, iq) = (pos[p] as isize - dp, pos[q] as isize - dq);
                                if ip < 0 || iq < 0 || ip as usize >= n[p] || iq as usize >= n[q] {
                                    continue;
                                }
                                let mut cc = pos;
                                cc[p] = ip as usize;
                                cc[q] = iq as usize;
                                s += eps.get(cc[0], cc[1], cc[2]);
                                m += 1;
                            }
                        }
                        eps_e[a].set(i, j, k, s / m as f64);
                    }
                }
            }
            let d = Self::face_dims(n, a);
            let (mask, sign) = match a {
                0 => (0b110, 1.0),
                1 => (0b101, -1.0),
                _ => (0b011, 1.0),
            };
            let area = h[p] * h[q];
            for i in 0..d[0] {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        let idx = c.index_of(&cell(mask, i, j, k)).unwrap();
                        ba[a].set(i, j, k, sign * b.values()[idx] / area);
                        let pos = [i, j, k];
                        let (mut s, mut m) = (0.0, 0);
                        for da in [0, 1] {
                            let ia = pos[a] as isize - da;
                            if ia < 0 || ia as usize >= n[a] {
                                continue;
                            }
                            let mut cc = pos;
                            cc[a] = ia as usize;
                            s += nu.get(cc[0], cc[1], cc[2]);
                            m += 1;
                        }
                        nu_f[a].set(i, j, k, s / m as f64);
                    }
                }
            }
        }
        Self { n, h, dt, e: ea, b: ba, eps: eps_e, nu: nu_f }
    }

    /// Writes the fields back as cochains shaped like `e_like`, `b_like`.
    pub fn to_cochains(&self, c: &CubicalComplex, e_like: &Cochain, b_like: &Cochain) -> (Vec<f64>, Vec<f64>) {
        let mut e = vec![0.0; e_like.values().len()];
        let mut b = vec![0.0; b_like.values().len()];
        let h = self.h;
        for a in 0..3 {
            let d = Self::edge_dims(self.n, a);
            for i in 0..d[0] {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        e[c.index_of(&cell(1 << a, i, j, k)).unwrap()] = self.e[a].get(i, j, k) * h[a];
                    }
                }
            }
            let d = Self::face_dims(self.n, a);
            let (mask, sign) = match a {
                0 => (0b110, 1.0),
                1 => (0b101, -1.0),
                _ => (0b011, 1.0),
            };
            let area = h[(a + 1) % 3] * h[(a + 2) % 3];
            for i in 0..d[0] {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        b[c.index_of(&cell(mask, i, j, k)).unwrap()] = sign * self.b[a].get(i, j, k) * area;
                    }
                }
            }
        }
        (e, b)
    }

    pub fn step(&mut self) {
        let [nx, ny, nz] = self.n;
        let [hx, hy, hz] = self.h;
        let dt = self.dt;
        let (ex, ey, ez) = (&self.e[0], &self.e[1], &self.e[2]);
        // B_x at (i, j+½, k+½), interior planes i = 1..nx-1
        let mut bx = self.b[0].clone();
        for i in 1..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let curl = (ez.get(i, j + 1, k) - ez.get(i, j, k)) / hy - (ey.get(i, j, k + 1) - ey.get(i, j, k)) / hz;
                    bx.add(i, j, k, -dt * curl);
                }
            }
        }
        let mut by = self.b[1].clone();
        for i in 0..nx {
            for j in 1..ny {
                for k in 0..nz {
                    let curl = (ex.get(i, j, k + 1) - ex.get(i, j, k)) / hz - (ez.get(i + 1, j, k) - ez.get(i, j, k)) / hx;
                    by.add(i, j, k, -dt * curl);
                }
            }
        }
        let mut bz = self.b[2].clone();
        for i in 0..nx {
            for j in 0..ny {
                for k in 1..nz {
                    let curl = (ey.get(i + 1, j, k) - ey.get(i, j, k)) / hx - (ex.get(i, j + 1, k) - ex.get(i, j, k)) / hy;
                    bz.add(i, j, k, -dt * curl);
                }
            }
        }
        self.b = [bx, by, bz];

        let hf = |a: usize, i: usize, j: usize, k: usize| self.nu[a].get(i, j, k) * self.b[a].get(i, j, k);
        let mut ex = self.e[0].clone();
        for i in 0..nx {
            for j in 1..ny {
                for k in 1..nz {
                    let curl = (hf(2, i, j, k) - hf(2, i, j - 1, k)) / hy - (hf(1, i, j, k) - hf(1, i, j, k - 1)) / hz;
                    ex.add(i, j, k, dt * curl / self.eps[0].get(i, j, k));
                }
            }
        }
        let mut ey = self.e[1].clone();
        for i in 1..nx {
            for j in 0..ny {
                for k in 1..nz {
                    let curl = (hf(0, i, j, k) - hf(0, i, j, k - 1)) / hz - (hf(2, i, j, k) - hf(2, i - 1, j, k)) / hx;
                    ey.add(i, j, k, dt * curl / self.eps[1].get(i, j, k));
                }
            }
        }
        let mut ez = self.e[2].clone();
        for i in 1..nx {
            for j in 1..ny {
                for k in 0..nz {
                    let curl = (hf(1, i, j, k) - hf(1, i - 1, j, k)) / hx - (hf(0, i, j, k) - hf(0, i, j - 1, k)) / hy;
                    ez.add(i, j, k, dt * curl / self.eps[2].get(i, j, k));
                }
            }
        }
        self.e = [ex, ey, ez];
    }
}

/// Periodic lattice index helpers.
fn wrap(i: usize, d: isize, n: usize) -> usize {
    (i as isize + d).rem_euclid(n as isize) as usize
}

/// Visscher's staggered real/imaginary scheme for `iħ ∂_t ψ = Hψ` on a
/// periodic box: `I ← I − (Δt/ħ) H R`, then `R ← R + (Δt/ħ) H I`.
pub struct Visscher {
    pub n: [usize; 3],
    pub h: [f64; 3],
    pub dt: f64,
    pub kin: f64,
    pub hbar: f64,
    pub v: Array3,
    pub re: Array3,
    pub im: Array3,
}

impl Visscher {
    pub fn new(c: &CubicalComplex, hbar: f64, mass: f64, potential: Option<&Expression>, dt: f64, re: &Cochain, im: &Cochain) -> Self {
        let n = [c.extents()[0], c.extents()[1], c.extents()[2]];
        let h = [c.spacings()[0], c.spacings()[1], c.spacings()[2]];
        let (mut v, mut r, mut m) = (Array3::zeros(n), Array3::zeros(n), Array3::zeros(n));
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let x = [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2], 0.0];
                    v.set(i, j, k, potential.map_or(0.0, |p| p.eval(&x, 0.0)));
                    let idx = c.index_of(&cell(0, i, j, k)).unwrap();
                    r.set(i, j, k, re.values()[idx]);
                    m.set(i, j, k, im.values()[idx]);
                }
            }
        }
        Self { n, h, dt, kin: hbar * hbar / (2.0 * mass), hbar, v, re: r, im: m }
    }

    fn hamiltonian(&self, f: &Array3) -> Array3 {
        let n = self.n;
        let mut out = Array3::zeros(n);
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let c = f.get(i, j, k);
                    let lap = (f.get(wrap(i, 1, n[0]), j, k) - 2.0 * c + f.get(wrap(i, -1, n[0]), j, k)) / (self.h[0] * self.h[0])
                        + (f.get(i, wrap(j, 1, n[1]), k) - 2.0 * c + f.get(i, wrap(j, -1, n[1]), k)) / (self.h[1] * self.h[1])
                        + (f.get(i, j, wrap(k, 1, n[2])) - 2.0 * c + f.get(i, j, wrap(k, -1, n[2]))) / (self.h[2] * self.h[2]);
                    out.set(i, j, k, -self.kin * lap + self.v.get(i, j, k) * c);
                }
            }
        }
        out
    }

    pub fn step(&mut self) {
        let hr = self.hamiltonian(&self.re);
        for (x, y) in self.im.v.iter_mut().zip(&hr.v) {
            *x -= self.dt / self.hbar * y;
        }
        let hi = self.hamiltonian(&self.im);
        for (x, y) in self.re.v.iter_mut().zip(&hi.v) {
            *x += self.dt / self.hbar * y;
        }
    }

    pub fn to_cochain(&self, c: &CubicalComplex, f: &Array3) -> Vec<f64> {
        let mut out = vec![0.0; c.cell_count(0)];
        for i in 0..self.n[0] {
            for j in 0..self.n[1] {
                for k in 0..self.n[2] {
                    out[c.index_of(&cell(0, i, j, k)).unwrap()] = f.get(i, j, k);
                }
            }
        }
        out
    }
}

/// Linear elastodynamics on a periodic box from the per-cell quadrature of
/// the strain energy
///
/// `W = V [ μ Σ_i ⟨s_ii²⟩ + (μ/2) Σ_{i≠j} ⟨s_ij²⟩ + μ Σ_{i<j} ⟨ā_ij ā_ji⟩ + (λ/2)(Σ_i ā_ii)² ]`
///
/// with `s_ij = S[i][j]/Δx_j` the velocity-integrated difference of component
/// `i` along a `j`-edge. The force on each node is minus the gradient of `W`
/// with respect to its displacement, differentiated by hand below.
pub struct Elastic {
    pub n: [usize; 3],
    pub h: [f64; 3],
    pub dt: f64,
    /// velocity component `k` at nodes
    pub u: [Array3; 3],
    /// `s[k][a]`: change of component `k` along the `a`-edge from each node
    pub s: [[Array3; 3]; 3],
    lambda: Array3,
    mu: Array3,
    /// nodal mass `ρ V`, ρ averaged over the eight surrounding cells
    mass: Array3,
}

impl Elastic {
    #[allow(clippy::too_many_arguments)]
    pub fn new(c: &CubicalComplex, rho: &Array3, lambda: &Array3, mu: &Array3, dt: f64, u: &Cochain, strain: &Cochain) -> Self {
        let n = [c.extents()[0], c.extents()[1], c.extents()[2]];
        let h = [c.spacings()[0], c.spacings()[1], c.spacings()[2]];
        let vol = h[0] * h[1] * h[2];
        let nv = c.cell_count(0);
        let ne = c.cell_count(1);
        let mut ua: [Array3; 3] = std::array::from_fn(|_| Array3::zeros(n));
        let mut sa: [[Array3; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| Array3::zeros(n)));
        let mut mass = Array3::zeros(n);
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let vi = c.index_of(&cell(0, i, j, k)).unwrap();
                    for comp in 0..3 {
                        ua[comp].set(i, j, k, u.values()[comp * nv + vi]);
                        for a in 0..3 {
                            let ei = c.index_of(&cell(1 << a, i, j, k)).unwrap();
                            sa[comp][a].set(i, j, k, strain.values()[comp * ne + ei]);
                        }
                    }
                    let mut r = 0.0;
                    for d in 0..8 {
                        let ci = wrap(i, -((d & 1) as isize), n[0]);
                        let cj = wrap(j, -(((d >> 1) & 1) as isize), n[1]);
                        let ck = wrap(k, -(((d >> 2) & 1) as isize), n[2]);
                        r += rho.get(ci, cj, ck);
                    }
                    mass.set(i, j, k, r / 8.0 * vol);
                }
            }
        }
        Self { n, h, dt, u: ua, s: sa, lambda: lambda.clone(), mu: mu.clone(), mass }
    }

    /// Node of cell `(i,j,k)` offset by the corner bits `off`.
    fn node(&self, i: usize, j: usize, k: usize, off: [usize; 3]) -> (usize, usize, usize) {
        (wrap(i, off[0] as isize, self.n[0]), wrap(j, off[1] as isize, self.n[1]), wrap(k, off[2] as isize, self.n[2]))
    }

    /// `∂W/∂S`, accumulated cell by cell.
    pub fn energy_gradient(&self) -> [[Array3; 3]; 3] {
        let n = self.n;
        let h = self.h;
        let vol = h[0] * h[1] * h[2];
        let mut g: [[Array3; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| Array3::zeros(n)));
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    let (lam, mu) = (self.lambda.get(i, j, k), self.mu.get(i, j, k));
                    // the four a-edges of the cell: lower nodes with the other two bits free
                    let edges = |a: usize| -> [(usize, usize, usize); 4] {
                        let (p, q) = ((a + 1) % 3, (a + 2) % 3);
                        std::array::from_fn(|c| {
                            let mut off = [0; 3];
                            off[p] = c & 1;
                            off[q] = c >> 1;
                            self.node(i, j, k, off)
                        })
                    };
                    // squared terms: μ⟨s_aa²⟩ and (μ/2)⟨s_ca²⟩
                    for a in 0..3 {
                        for comp in 0..3 {
                            let w = if comp == a { mu } else { 0.5 * mu };
                            for (x, y, z) in edges(a) {
                                let s = self.s[comp][a].get(x, y, z) / h[a];
                                g[comp][a].add(x, y, z, vol * w * 0.25 * 2.0 * s / h[a]);
                            }
                        }
                    }
                    // trace: (λ/2)(Σ_a ⟨s_aa⟩)²
                    let mut tr = 0.0;
                    for a in 0..3 {
                        for (x, y, z) in edges(a) {
                            tr += 0.25 * self.s[a][a].get(x, y, z) / h[a];
                        }
                    }
                    for a in 0..3 {
                        for (x, y, z) in edges(a) {
                            g[a][a].add(x, y, z, vol * lam * tr * 0.25 / h[a]);
                        }
                    }
                    // cross terms: μ ⟨ā_ab ā_ba⟩ over the two faces spanning {a, b}
                    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                        let third = 3 - a - b;
                        for side in 0..2 {
                            let mut base = [0; 3];
                            base[third] = side;
                            // component a on the two b-edges at base and base + e_a
                            let mut up_a = base;
                            up_a[a] = 1;
                            let mut up_b = base;
                            up_b[b] = 1;
                            let ab = [self.node(i, j, k, base), self.node(i, j, k, up_a)];
                            let ba = [self.node(i, j, k, base), self.node(i, j, k, up_b)];
                            let mean_ab: f64 = ab.iter().map(|&(x, y, z)| 0.5 * self.s[a][b].get(x, y, z) / h[b]).sum();
                            let mean_ba: f64 = ba.iter().map(|&(x, y, z)| 0.5 * self.s[b][a].get(x, y, z) / h[a]).sum();
                            let w = 0.5 * mu * vol;
                            for (x, y, z) in ab {
                                g[a][b].add(x, y, z, w * mean_ba * 0.5 / h[b]);
                            }
                            for (x, y, z) in ba {
                                g[b][a].add(x, y, z, w * mean_ab * 0.5 / h[a]);
                            }
                        }
                    }
                }
            }
        }
        g
    }

    pub fn energy(&self) -> f64 {
        let g = self.energy_gradient();
        // W is quadratic: W = ½ Sᵀ ∇W
        let mut w = 0.0;
        for comp in 0..3 {
            for a in 0..3 {
                w += 0.5 * self.s[comp][a].v.iter().zip(&g[comp][a].v).map(|(s, g)| s * g).sum::<f64>();
            }
        }
        w
    }

    pub fn step(&mut self) {
        let n = self.n;
        // S ← S + Δt · (difference of u along each edge)
        for comp in 0..3 {
            for a in 0..3 {
                for i in 0..n[0] {
                    for j in 0..n[1] {
                        for k in 0..n[2] {
                            let mut off = [0; 3];
                            off[a] = 1;
                            let (x, y, z) = self.node(i, j, k, off);
                            let d = self.u[comp].get(x, y, z) - self.u[comp].get(i, j, k);
                            self.s[comp][a].add(i, j, k, self.dt * d);
                        }
                    }
                }
            }
        }
        // M u ← M u − Δt Dᵀ ∇W
        let g = self.energy_gradient();
        for comp in 0..3 {
            let mut force = Array3::zeros(n);
            for a in 0..3 {
                for i in 0..n[0] {
                    for j in 0..n[1] {
                        for k in 0..n[2] {
                            let mut off = [0; 3];
                            off[a] = 1;
                            let (x, y, z) = self.node(i, j, k, off);
                            let ge = g[comp][a].get(i, j, k);
                            force.add(i, j, k, ge);
                            force.add(x, y, z, -ge);
                        }
                    }
                }
            }
            for (idx, f) in force.v.iter().enumerate() {
                self.u[comp].v[idx] += self.dt * f / self.mass.v[idx];
            }
        }
    }

    pub fn to_cochains(&self, c: &CubicalComplex) -> (Vec<f64>, Vec<f64>) {
        let (nv, ne) = (c.cell_count(0), c.cell_count(1));
        let mut u = vec![0.0; 3 * nv];
        let mut s = vec![0.0; 3 * ne];
        for i in 0..self.n[0] {
            for j in 0..self.n[1] {
                for k in 0..self.n[2] {
                    let vi = c.index_of(&cell(0, i, j, k)).unwrap();
                    for comp in 0..3 {
                        u[comp * nv + vi] = self.u[comp].get(i, j, k);
                        for a in 0..3 {
                            s[comp * ne + c.index_of(&cell(1 << a, i, j, k)).unwrap()] = self.s[comp][a].get(i, j, k);
                        }
                    }
                }
            }
        }
        (u, s)
    }
}
