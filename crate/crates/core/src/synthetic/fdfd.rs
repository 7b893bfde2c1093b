//! Frequency-domain forward solver for `curl curl E + i omega mu0 gamma E = 0`
//! with prescribed tangential E on the boundary.
//!
//! Discretization is a Yee-style staggered grid built on the voxel lattice:
//! E components live on edge midpoints, the curl lives on face centers, and
//! the second curl lands back on edges. The admittivity (given at grid
//! points) is averaged onto edges; transverse E components entering the
//! anisotropic coupling are averaged from the four surrounding parallel
//! edges. The assembled sparse system is solved with a direct LU
//! factorization, one factorization shared across all right-hand sides.
//! H is recovered on faces as `(i/(omega mu0)) curl E` and averaged to grid
//! points, so the output fields are collocated like measured data.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::field_model::{Grid3, Mask, MatrixFieldC, VectorFieldC};
use crate::{CVec3, Error, Result};

/// Forward-solver configuration.
#[derive(Debug, Clone)]
pub struct FdfdConfig {
    pub omega: f64,
    pub mu0: f64,
    /// Direct-solve budget: per-axis voxel limit (default 24).
    pub max_axis_dim: usize,
    /// Relative residual above which the solve is reported singular.
    pub residual_tol: f64,
}

impl FdfdConfig {
    pub fn new(omega: f64, mu0: f64) -> Self {
        Self {
            omega,
            mu0,
            max_axis_dim: 24,
            residual_tol: 1e-8,
        }
    }
}

/// Edge-array shapes: component `a` lives on edges along axis `a`, with one
/// fewer sample along that axis.
fn edge_dims(dims: [usize; 3], axis: usize) -> [usize; 3] {
    let mut d = dims;
    d[axis] -= 1;
    d
}

fn edge_len(dims: [usize; 3], axis: usize) -> usize {
    let d = edge_dims(dims, axis);
    d[0] * d[1] * d[2]
}

#[inline]
fn eidx(d: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    (i * d[1] + j) * d[2] + k
}

/// Tangential electric boundary data, stored as full edge arrays; only the
/// entries on boundary-tangential edges are read by the solver.
#[derive(Debug, Clone)]
pub struct BoundaryTangentialE {
    grid: Grid3,
    comp: [Vec<Complex64>; 3],
}

impl BoundaryTangentialE {
    /// Evaluates `f` at edge midpoints.
    pub fn from_fn(grid: &Grid3, mut f: impl FnMut([f64; 3]) -> CVec3) -> Self {
        let dims = grid.dims();
        let h = grid.spacing();
        let o = grid.origin();
        let comp = std::array::from_fn(|axis| {
            let d = edge_dims(dims, axis);
            let mut vals = vec![Complex64::ZERO; d[0] * d[1] * d[2]];
            for i in 0..d[0] {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        let mut x = [
                            o[0] + i as f64 * h[0],
                            o[1] + j as f64 * h[1],
                            o[2] + k as f64 * h[2],
                        ];
                        x[axis] += 0.5 * h[axis];
                        vals[eidx(d, i, j, k)] = f(x)[axis];
                    }
                }
            }
            vals
        });
        Self {
            grid: grid.clone(),
            comp,
        }
    }

    /// Builds edge data from a grid-point vector field by averaging the two
    /// edge endpoints (second order at midpoints).
    pub fn from_vertex_field(field: &VectorFieldC) -> Self {
        let grid = field.grid().clone();
        let dims = grid.dims();
        let comp = std::array::from_fn(|axis| {
            let d = edge_dims(dims, axis);
            let mut vals = vec![Complex64::ZERO; d[0] * d[1] * d[2]];
            let stride = grid.stride(axis);
            for i in 0..d[0] {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        let v0 = grid.index([i, j, k]);
                        let a = field.component(axis)[v0];
                        let b = field.component(axis)[v0 + stride];
                        vals[eidx(d, i, j, k)] = (a + b) * 0.5;
                    }
                }
            }
            vals
        });
        Self { grid, comp }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }
}

/// One forward solution: collocated E and H with their validity mask and the
/// achieved linear-system residual.
#[derive(Debug, Clone)]
pub struct FdfdSolution {
    pub e: VectorFieldC,
    pub h: VectorFieldC,
    pub valid: Mask,
    pub residual: f64,
}

/// Whether an edge along `axis` at edge coordinates `(i, j, k)` is a
/// boundary-tangential (prescribed) edge: it lies in a boundary plane of one
/// of the two transverse axes.
fn is_prescribed(dims: [usize; 3], axis: usize, ijk: [usize; 3]) -> bool {
    for t in 0..3 {
        if t != axis && (ijk[t] == 0 || ijk[t] == dims[t] - 1) {
            return true;
        }
    }
    false
}

struct EdgeNumbering {
    dims: [usize; 3],
    /// Per component: unknown id per edge, or usize::MAX when prescribed.
    ids: [Vec<usize>; 3],
    n_unknowns: usize,
}

impl EdgeNumbering {
    fn new(dims: [usize; 3]) -> Self {
        let mut n = 0usize;
        let ids = std::array::from_fn(|axis| {
            let d = edge_dims(dims, axis);
            let mut ids = vec![usize::MAX; d[0] * d[1] * d[2]];
            for i in 0..d[0] {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        if !is_prescribed(dims, axis, [i, j, k]) {
                            ids[eidx(d, i, j, k)] = n;
                            n += 1;
                        }
                    }
                }
            }
            ids
        });
        Self {
            dims,
            ids,
            n_unknowns: n,
        }
    }

    #[inline]
    fn id(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        self.ids[axis][eidx(edge_dims(self.dims, axis), i, j, k)]
    }
}

/// Checks per-voxel ellipticity of the symmetric parts via Sylvester's
/// criterion on `Re(gamma)` and `Im(gamma)`.
fn check_elliptic(gamma: &MatrixFieldC) -> Result<()> {
    for idx in 0..gamma.grid().len() {
        let m = gamma.mat_at(idx);
        for (part, name) in [(m.map(|z| z.re), "Re"), (m.map(|z| z.im), "Im")] {
            let d1 = part[(0, 0)];
            let d2 = part[(0, 0)] * part[(1, 1)] - part[(0, 1)] * part[(1, 0)];
            let d3 = part.determinant();
            if !(d1 > 0.0 && d2 > 0.0 && d3 > 0.0) {
                return Err(Error::Ellipticity(format!(
                    "{name} part not positive definite at voxel {idx}"
                )));
            }
        }
    }
    Ok(())
}

/// Solves the curl-curl system for several boundary conditions with a single
/// factorization. `gamma` must be symmetric and elliptic per voxel.
pub fn solve_many(
    gamma: &MatrixFieldC,
    bcs: &[BoundaryTangentialE],
    cfg: &FdfdConfig,
) -> Result<Vec<FdfdSolution>> {
    let grid = gamma.grid().clone();
    let dims = grid.dims();
    if dims.iter().any(|&d| d > cfg.max_axis_dim) {
        return Err(Error::SolverBudgetExceeded {
            got: *dims.iter().max().unwrap(),
            limit: cfg.max_axis_dim,
        });
    }
    if bcs.is_empty() {
        return Ok(Vec::new());
    }
    for bc in bcs {
        if bc.grid != grid {
            return Err(Error::GridMismatch);
        }
    }
    check_elliptic(gamma)?;

    let numbering = EdgeNumbering::new(dims);
    let n = numbering.n_unknowns;
    let iwm = Complex64::new(0.0, cfg.omega * cfg.mu0);
    let h = grid.spacing();

    // One assembly pass per boundary condition would redo identical work;
    // instead collect matrix triplets once and per-bc right-hand sides.
    let mut triplets: Vec<Triplet<usize, usize, Complex64>> = Vec::new();
    let mut rhs = Mat::<Complex64>::zeros(n, bcs.len());

    // gamma averaged onto an edge: mean of the two endpoint voxels
    let gamma_edge = |axis: usize, i: usize, j: usize, k: usize| {
        let v0 = grid.index([i, j, k]);
        let mut p = [i, j, k];
        p[axis] += 1;
        let v1 = grid.index(p);
        (gamma.mat_at(v0) + gamma.mat_at(v1)) * Complex64::new(0.5, 0.0)
    };

    // the four parallel edges of component `tc` surrounding an edge of
    // component `axis` at (i,j,k); offsets move one step back along `tc`
    let transverse_edges = |axis: usize, tc: usize, ijk: [usize; 3]| -> [[usize; 3]; 4] {
        let mut out = [[0usize; 3]; 4];
        let mut m = 0;
        for da in [0usize, 1] {
            for dtc in [-1isize, 0] {
                let mut p = ijk;
                p[axis] += da;
                let q = p[tc] as isize + dtc;
                p[tc] = q as usize; // caller guarantees q >= 0
                out[m] = p;
                m += 1;
            }
        }
        out
    };

    for axis in 0..3 {
        let d = edge_dims(dims, axis);
        let (t1, t2) = match axis {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        };
        for i in 0..d[0] {
            for j in 0..d[1] {
                for k in 0..d[2] {
                    let row = numbering.id(axis, i, j, k);
                    if row == usize::MAX {
                        continue;
                    }
                    let ijk = [i, j, k];
                    let mut add = |caxis: usize, p: [usize; 3], v: Complex64| {
                        let col = numbering.id(caxis, p[0], p[1], p[2]);
                        if col != usize::MAX {
                            triplets.push(Triplet::new(row, col, v));
                        } else {
                            let val_idx = eidx(edge_dims(dims, caxis), p[0], p[1], p[2]);
                            for (b, bc) in bcs.iter().enumerate() {
                                let bval = bc.comp[caxis][val_idx];
                                rhs[(row, b)] -= v * bval;
                            }
                        }
                    };

                    // curl-curl: for the edge along `axis`, the stencil is
                    //   sum over transverse axes t of
                    //   [2 E_axis(ijk) - E_axis(ijk +- e_t)] / h_t^2
                    //   - cross terms with the E_t edges
                    for &t in &[t1, t2] {
                        let ht2 = 1.0 / (h[t] * h[t]);
                        let mut up = ijk;
                        up[t] += 1;
                        let mut dn = ijk;
                        dn[t] -= 1; // interior row: ijk[t] >= 1 always holds
                        add(axis, ijk, Complex64::new(2.0 * ht2, 0.0));
                        add(axis, up, Complex64::new(-ht2, 0.0));
                        add(axis, dn, Complex64::new(-ht2, 0.0));
                        // mixed term + d2 E_t / (d axis d t): four corner edges
                        let hat = 1.0 / (h[axis] * h[t]);
                        let mut pp = ijk; // (+axis, 0)
                        pp[axis] += 1;
                        let mut pm = ijk; // (+axis, -t)
                        pm[axis] += 1;
                        pm[t] -= 1;
                        let mut p0m = ijk; // (0, -t)
                        p0m[t] -= 1;
                        add(t, pp, Complex64::new(hat, 0.0));
                        add(t, ijk, Complex64::new(-hat, 0.0));
                        add(t, pm, Complex64::new(-hat, 0.0));
                        add(t, p0m, Complex64::new(hat, 0.0));
                    }

                    // + i omega mu0 (gamma E)_axis at the edge midpoint
                    let g = gamma_edge(axis, i, j, k);
                    add(axis, ijk, iwm * g[(axis, axis)]);
                    for &tc in &[t1, t2] {
                        let coeff = iwm * g[(axis, tc)] * 0.25;
                        if coeff.norm() == 0.0 {
                            continue;
                        }
                        for p in transverse_edges(axis, tc, ijk) {
                            add(tc, p, coeff);
                        }
                    }
                }
            }
        }
    }

    let a = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SingularSystem(format!("assembly: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("lu factorization: {e:?}")))?;
    let x = lu.solve(&rhs);

    let resid = &a * &x - &rhs;
    let mut out = Vec::with_capacity(bcs.len());
    for (b, bc) in bcs.iter().enumerate() {
        let mut bnorm = 0.0f64;
        let mut rnorm = 0.0f64;
        for r in 0..n {
            bnorm += rhs[(r, b)].norm_sqr();
            rnorm += resid[(r, b)].norm_sqr();
        }
        let residual = if bnorm > 0.0 {
            (rnorm / bnorm).sqrt()
        } else {
            rnorm.sqrt()
        };
        if residual > cfg.residual_tol {
            return Err(Error::SingularSystem(format!(
                "relative residual {residual:.3e} exceeds {:.1e} (resonance-like system)",
                cfg.residual_tol
            )));
        }
        // full edge arrays: prescribed values + solved unknowns
        let mut edges: [Vec<Complex64>; 3] =
            std::array::from_fn(|axis| bc.comp[axis].clone());
        for axis in 0..3 {
            let d = edge_dims(dims, axis);
            for i in 0..d[0] {
                for j in 0..d[1] {
                    for k in 0..d[2] {
                        let id = numbering.id(axis, i, j, k);
                        if id != usize::MAX {
                            edges[axis][eidx(d, i, j, k)] = x[(id, b)];
                        }
                    }
                }
            }
        }
        out.push(fields_from_edges(&grid, &edges, cfg, residual));
    }
    Ok(out)
}

/// Single-boundary-condition wrapper around [`solve_many`].
pub fn solve(
    gamma: &MatrixFieldC,
    bc: &BoundaryTangentialE,
    cfg: &FdfdConfig,
) -> Result<FdfdSolution> {
    Ok(solve_many(gamma, std::slice::from_ref(bc), cfg)?.pop().unwrap())
}

/// Face curls, H on faces, then averaging of E and H back to grid points.
fn fields_from_edges(
    grid: &Grid3,
    edges: &[Vec<Complex64>; 3],
    cfg: &FdfdConfig,
    residual: f64,
) -> FdfdSolution {
    let dims = grid.dims();
    let h = grid.spacing();
    let chf = Complex64::new(0.0, 1.0 / (cfg.omega * cfg.mu0));

    // H component a lives on faces normal to axis a
    let face_dims = |a: usize| {
        let mut d = dims;
        d[(a + 1) % 3] -= 1;
        d[(a + 2) % 3] -= 1;
        d
    };
    let mut faces: [Vec<Complex64>; 3] = std::array::from_fn(|a| {
        let d = face_dims(a);
        vec![Complex64::ZERO; d[0] * d[1] * d[2]]
    });
    for a in 0..3 {
        let b = (a + 1) % 3;
        let c = (a + 2) % 3;
        let d = face_dims(a);
        let db = edge_dims(dims, b);
        let dc = edge_dims(dims, c);
        for i in 0..d[0] {
            for j in 0..d[1] {
                for k in 0..d[2] {
                    let mut pb = [i, j, k];
                    let mut pc = [i, j, k];
                    // (curl E)_a = d_b E_c - d_c E_b on the face center
                    let ec0 = edges[c][eidx(dc, i, j, k)];
                    pb[b] += 1;
                    let ec1 = edges[c][eidx(dc, pb[0], pb[1], pb[2])];
                    let eb0 = edges[b][eidx(db, i, j, k)];
                    pc[c] += 1;
                    let eb1 = edges[b][eidx(db, pc[0], pc[1], pc[2])];
                    faces[a][eidx(d, i, j, k)] =
                        (ec1 - ec0) / h[b] - (eb1 - eb0) / h[c];
                }
            }
        }
    }

    let mut e_out = VectorFieldC::zeros(grid.clone());
    let mut h_out = VectorFieldC::zeros(grid.clone());
    for a in 0..3 {
        let de = edge_dims(dims, a);
        let df = face_dims(a);
        let b = (a + 1) % 3;
        let c = (a + 2) % 3;
        for idx in 0..grid.len() {
            let [i, j, k] = grid.coords(idx);
            // E: average the up to two adjacent edges along axis a
            let mut acc = Complex64::ZERO;
            let mut cnt = 0.0;
            let p = [i, j, k];
            if p[a] < de[a] {
                acc += edges[a][eidx(de, i, j, k)];
                cnt += 1.0;
            }
            if p[a] >= 1 {
                let mut q = p;
                q[a] -= 1;
                acc += edges[a][eidx(de, q[0], q[1], q[2])];
                cnt += 1.0;
            }
            e_out.component_mut(a)[idx] = acc / cnt;

            // H: average the four surrounding faces (interior in b and c)
            if p[b] >= 1 && p[b] + 1 < dims[b] && p[c] >= 1 && p[c] + 1 < dims[c] {
                let mut acc = Complex64::ZERO;
                for db_ in [1usize, 0] {
                    for dc_ in [1usize, 0] {
                        let mut q = p;
                        q[b] -= db_;
                        q[c] -= dc_;
                        acc += faces[a][eidx(df, q[0], q[1], q[2])];
                    }
                }
                h_out.component_mut(a)[idx] = chf * acc * 0.25;
            }
        }
    }
    let valid = Mask::interior(grid.clone(), 1).expect("grid admits margin 1");
    FdfdSolution {
        e: e_out,
        h: h_out,
        valid,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_model::Symmetry;
    use crate::CMat3;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Plane wave `eta exp(i zeta.x)` with `zeta.zeta = -i omega mu0 g`,
    /// `zeta.eta = 0`: an exact solution for constant scalar gamma `g`.
    fn exact_wave(g: Complex64, omega: f64, mu0: f64, a: f64, cpar: f64) -> (CVec3, CVec3) {
        let ksq = -Complex64::new(0.0, omega * mu0) * g;
        let s = (Complex64::new(cpar * cpar + a * a / 4.0, 0.0) - ksq).sqrt();
        let zeta = CVec3::new(c(a / 2.0, 0.0), Complex64::new(0.0, 1.0) * s, c(cpar, 0.0));
        let nrm = (cpar * cpar + a * a).sqrt();
        let eta = CVec3::new(c(cpar / nrm, 0.0), c(0.0, 0.0), c(-a / (2.0 * nrm), 0.0));
        (zeta, eta)
    }

    fn wave_field(zeta: CVec3, eta: CVec3) -> impl Fn([f64; 3]) -> CVec3 {
        move |x| {
            let ph = (Complex64::new(0.0, 1.0)
                * (zeta[0] * x[0] + zeta[1] * x[1] + zeta[2] * x[2]))
                .exp();
            eta * ph
        }
    }

    #[test]
    fn mms_constant_scalar_gamma_converges() {
        let gval = c(2.0, 1.0);
        let (omega, mu0) = (1.0, 1.0);
        let (zeta, eta) = exact_wave(gval, omega, mu0, 1.0, 2.0);
        let ef = wave_field(zeta, eta);
        let hf = {
            let zxeta = CVec3::new(
                zeta[1] * eta[2] - zeta[2] * eta[1],
                zeta[2] * eta[0] - zeta[0] * eta[2],
                zeta[0] * eta[1] - zeta[1] * eta[0],
            );
            move |x: [f64; 3]| {
                let ph = (Complex64::new(0.0, 1.0)
                    * (zeta[0] * x[0] + zeta[1] * x[1] + zeta[2] * x[2]))
                    .exp();
                zxeta * (ph * Complex64::new(0.0, 1.0) * Complex64::new(0.0, 1.0 / (omega * mu0)))
            }
        };
        let mut errs_e = Vec::new();
        let mut errs_h = Vec::new();
        for npts in [9usize, 17] {
            let grid = Grid3::unit_cube(npts).unwrap();
            let gamma =
                MatrixFieldC::constant(grid.clone(), Symmetry::Symmetric, CMat3::identity() * gval);
            let bc = BoundaryTangentialE::from_fn(&grid, &ef);
            let sol = solve(&gamma, &bc, &FdfdConfig::new(omega, mu0)).unwrap();
            assert!(sol.residual < 1e-10, "residual {}", sol.residual);
            let mut ee = 0.0f64;
            let mut eh = 0.0f64;
            let mut scale_e = 0.0f64;
            let mut scale_h = 0.0f64;
            for idx in sol.valid.indices() {
                let x = grid.position(grid.coords(idx));
                ee = ee.max((sol.e.vec_at(idx) - ef(x)).norm());
                eh = eh.max((sol.h.vec_at(idx) - hf(x)).norm());
                scale_e = scale_e.max(ef(x).norm());
                scale_h = scale_h.max(hf(x).norm());
            }
            errs_e.push(ee / scale_e);
            errs_h.push(eh / scale_h);
        }
        let rate_e = (errs_e[0] / errs_e[1]).log2();
        let rate_h = (errs_h[0] / errs_h[1]).log2();
        assert!(rate_e > 1.5 && rate_e < 2.6, "E rate {rate_e} errs {errs_e:?}");
        assert!(rate_h > 1.4 && rate_h < 2.6, "H rate {rate_h} errs {errs_h:?}");
    }

    #[test]
    fn zero_boundary_data_gives_zero_fields() {
        let grid = Grid3::unit_cube(8).unwrap();
        let gamma = MatrixFieldC::constant(
            grid.clone(),
            Symmetry::Symmetric,
            CMat3::identity() * c(1.5, 0.7),
        );
        let bc = BoundaryTangentialE::from_fn(&grid, |_| CVec3::zeros());
        let sol = solve(&gamma, &bc, &FdfdConfig::new(1.0, 1.0)).unwrap();
        assert!(sol.e.max_abs() < 1e-12);
        assert!(sol.h.max_abs() < 1e-12);
    }

    #[test]
    fn budget_exceeded_rejected() {
        let grid = Grid3::unit_cube(32).unwrap();
        let gamma = MatrixFieldC::constant(
            grid.clone(),
            Symmetry::Symmetric,
            CMat3::identity() * c(1.0, 1.0),
        );
        let bc = BoundaryTangentialE::from_fn(&grid, |_| CVec3::zeros());
        let err = solve(&gamma, &bc, &FdfdConfig::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::SolverBudgetExceeded { got: 32, .. }));
    }

    #[test]
    fn non_elliptic_gamma_rejected() {
        let grid = Grid3::unit_cube(6).unwrap();
        let gamma = MatrixFieldC::constant(
            grid.clone(),
            Symmetry::Symmetric,
            CMat3::identity() * c(1.0, -1.0),
        );
        let bc = BoundaryTangentialE::from_fn(&grid, |_| CVec3::zeros());
        assert!(matches!(
            solve(&gamma, &bc, &FdfdConfig::new(1.0, 1.0)),
            Err(Error::Ellipticity(_))
        ));
    }

    #[test]
    fn anisotropic_constant_gamma_consistency() {
        // frame plane wave for an anisotropic gamma0 is an exact solution;
        // the solver must reproduce it at O(h^2)
        use crate::synthetic::{FrameField, SolutionFrame};
        let re = [[2.0, 0.3, 0.0], [0.3, 1.5, 0.2], [0.0, 0.2, 3.0]];
        let im = [[1.0, 0.1, 0.0], [0.1, 2.0, 0.0], [0.0, 0.0, 1.2]];
        let g0 = CMat3::from_fn(|r, cc| c(re[r][cc], im[r][cc]));
        let frame = SolutionFrame::new(g0, 1.0, 1.0).unwrap();
        let mut errs = Vec::new();
        for npts in [9usize, 17] {
            let grid = Grid3::unit_cube(npts).unwrap();
            let gamma = MatrixFieldC::constant(grid.clone(), Symmetry::Symmetric, g0);
            let bc = BoundaryTangentialE::from_fn(&grid, |x| frame.e_at(1, x));
            let sol = solve(&gamma, &bc, &FdfdConfig::new(1.0, 1.0)).unwrap();
            let e_ref = frame.sample(&grid, FrameField::E, 1);
            let mut err = 0.0f64;
            for idx in sol.valid.indices() {
                err = err.max((sol.e.vec_at(idx) - e_ref.vec_at(idx)).norm());
            }
            errs.push(err / e_ref.max_abs());
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 1.5 && rate < 2.6, "rate {rate} errs {errs:?}");
    }
}
