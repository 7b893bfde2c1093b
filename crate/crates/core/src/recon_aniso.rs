//! Anisotropic admittivity reconstruction from six or more magnetic fields.
//!
//! Pipeline per voxel, everything computable from the measured `H_j`:
//!
//! 1. `Y_i = curl H_i` for the first three fields; voxels where `|det Y|`
//!    falls under a relative threshold are rejected (frame condition).
//! 2. Each additional field satisfies `curl H_{3+k} = sum_i lambda^k_i Y_i`;
//!    the coefficients come from Cramer determinant ratios and their
//!    gradients form the matrices `Z_k`.
//! 3. `M_k = (i omega mu0 / 2) * star(H_{3+k} - sum_i lambda^k_i H_i)` where
//!    `star` maps a vector to the antisymmetric matrix of its Hodge dual.
//!    The arrangement (no transpose on the star matrix) is pinned by the
//!    requirement that the constant-tensor round trip reproduces the input
//!    tensor rather than its negative.
//! 4. For every real antisymmetric generator `Omega` the identity
//!    `tr(gamma^{-1} (Omega Z_k Y^T)^sym) = tr(Omega M_k^T)` yields one linear
//!    equation in the six coordinates of `gamma^{-1}`; with `m` extra fields
//!    this is a `3m x 6` system solved by least squares (or by a Cramer
//!    expansion on a Gram-Schmidt-selected row subset as a cross-check).
//!    Voxels whose system condition number exceeds a threshold are rejected
//!    (full-rank condition), and `gamma` is the symmetrized inverse of the
//!    solved `gamma^{-1}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffops::{curl, gradient_masked, FdConfig};
use crate::field_model::{Grid3, Mask, MatrixFieldC, ScalarFieldC, Symmetry, VectorFieldC};
use crate::tensor_algebra::{antisym_basis_c, gram_schmidt, hodge_star_vector, sym_from_coords};
use crate::{CMat3, Error, Result};

/// How the per-voxel linear system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// All `3m` equations, solved by SVD least squares.
    LeastSquares,
    /// Six rows selected by Gram-Schmidt, solved by determinant expansion.
    Cramer6,
}

/// Relative singular-value cutoff declaring the per-voxel system full rank.
pub const RANK_TOL: f64 = 1e-8;

/// Reconstruction configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconConfig {
    pub fd: FdConfig,
    /// Voxels with `|det Y| <= threshold * max |det Y|` are rejected.
    pub dety_rel_threshold: f64,
    /// Voxels whose `3m x 6` system condition exceeds this are rejected.
    pub w_cond_threshold: f64,
    pub solver_mode: SolverMode,
    pub omega: f64,
    pub mu0: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            fd: FdConfig::default(),
            dety_rel_threshold: 1e-6,
            w_cond_threshold: 1e8,
            solver_mode: SolverMode::LeastSquares,
            omega: 1.0,
            mu0: 1.0,
        }
    }
}

/// Per-run diagnostics: the surviving mask, frame/full-rank margins, and
/// rejection counts by reason.
#[derive(Debug, Clone)]
pub struct ReconReport {
    pub valid_mask: Mask,
    /// Min `|det Y|` over the voxels that passed the determinant gate.
    pub min_abs_det_y: f64,
    /// Worst (largest) condition number among full-rank voxels.
    pub worst_cond_w: f64,
    /// Per-voxel condition number (real-valued; 0 where never computed).
    pub cond_field: ScalarFieldC,
    /// Voxels the solve stage looked at.
    pub attempted: usize,
    /// Voxels whose system had numerical rank 6.
    pub full_rank: usize,
    pub rejected_dety: usize,
    pub rejected_cond: usize,
    pub rejected_rank: usize,
    pub rejected_singular: usize,
}

impl ReconReport {
    /// JSON summary: mask statistics, margins, rejection counts, a config
    /// echo and the crate version.
    pub fn to_json(&self, cfg: &ReconConfig) -> serde_json::Value {
        serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "valid_voxels": self.valid_mask.count(),
            "total_voxels": self.valid_mask.grid().len(),
            "valid_fraction": self.valid_mask.count() as f64 / self.valid_mask.grid().len() as f64,
            "min_abs_det_y": self.min_abs_det_y,
            "worst_cond_w": self.worst_cond_w,
            "attempted": self.attempted,
            "full_rank": self.full_rank,
            "rejected": {
                "dety": self.rejected_dety,
                "cond": self.rejected_cond,
                "rank": self.rejected_rank,
                "singular_inverse": self.rejected_singular,
            },
            "config": serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
        })
    }
}

/// `Y = [curl H_1, curl H_2, curl H_3]` with its determinant gate.
pub struct YData {
    pub y: MatrixFieldC,
    pub det_y: ScalarFieldC,
    pub mask: Mask,
    pub min_abs_det_y: f64,
    pub rejected_dety: usize,
}

fn common_grid<'a>(h: &'a [VectorFieldC]) -> Result<&'a Grid3> {
    let grid = h[0].grid();
    if h.iter().any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    Ok(grid)
}

/// Curls of the first three fields assembled columnwise, the pointwise
/// determinant, and the mask of voxels passing the relative determinant
/// threshold.
pub fn compute_y(h: &[VectorFieldC], cfg: &ReconConfig) -> Result<YData> {
    if h.len() < 3 {
        return Err(Error::NotEnoughFields {
            need: 3,
            got: h.len(),
        });
    }
    let grid = common_grid(h)?.clone();
    let mut y = MatrixFieldC::zeros(grid.clone(), Symmetry::General);
    let mut fd_mask: Option<Mask> = None;
    for i in 0..3 {
        let (ci, mask) = curl(&h[i], cfg.fd)?;
        for r in 0..3 {
            // column i of Y is curl H_i
            y.component_mut(r, i).copy_from_slice(ci.component(r));
        }
        fd_mask = Some(mask);
    }
    let fd_mask = fd_mask.unwrap();
    let mut det_y = ScalarFieldC::zeros(grid.clone());
    for idx in 0..grid.len() {
        det_y.values_mut()[idx] = y.mat_at(idx).determinant();
    }
    let mut max_abs = 0.0f64;
    for idx in fd_mask.indices() {
        max_abs = max_abs.max(det_y.at(idx).norm());
    }
    let thresh = cfg.dety_rel_threshold * max_abs;
    let mut flags = vec![false; grid.len()];
    let mut min_abs = f64::INFINITY;
    let mut rejected = 0usize;
    for idx in fd_mask.indices() {
        let a = det_y.at(idx).norm();
        if a > thresh {
            flags[idx] = true;
            min_abs = min_abs.min(a);
        } else {
            rejected += 1;
        }
    }
    if min_abs == f64::INFINITY {
        min_abs = 0.0;
    }
    let mask = Mask::from_flags(grid, flags, "detY above threshold")?;
    Ok(YData {
        y,
        det_y,
        mask,
        min_abs_det_y: min_abs,
        rejected_dety: rejected,
    })
}

/// Linear-dependence coefficients of the additional fields and their
/// gradients.
pub struct LambdaData {
    /// `lambda[k][i]`: coefficient of `Y_i` in `curl H_{3+k}`.
    pub lambda: Vec<[ScalarFieldC; 3]>,
    /// `Z_k` columns are the gradients of `lambda^k_i`.
    pub z: Vec<MatrixFieldC>,
    pub mask: Mask,
}

/// Cramer coefficients `lambda^k_i = det(Y with column i replaced by
/// curl H_{3+k}) / det Y` and their finite-difference gradients `Z_k`.
pub fn compute_lambda(h: &[VectorFieldC], ydata: &YData, cfg: &ReconConfig) -> Result<LambdaData> {
    if h.len() < 4 {
        return Err(Error::NotEnoughFields {
            need: 4,
            got: h.len(),
        });
    }
    let grid = common_grid(h)?.clone();
    let m = h.len() - 3;
    let mut lambda = Vec::with_capacity(m);
    let mut z = Vec::with_capacity(m);
    let mut mask = ydata.mask.clone();
    for k in 0..m {
        let (yk, _) = curl(&h[3 + k], cfg.fd)?;
        let mut lam_k = [
            ScalarFieldC::zeros(grid.clone()),
            ScalarFieldC::zeros(grid.clone()),
            ScalarFieldC::zeros(grid.clone()),
        ];
        for idx in ydata.mask.indices() {
            let ym = ydata.y.mat_at(idx);
            let det = ydata.det_y.at(idx);
            let col = yk.vec_at(idx);
            for i in 0..3 {
                let mut replaced = ym;
                replaced.set_column(i, &col);
                lam_k[i].values_mut()[idx] = replaced.determinant() / det;
            }
        }
        let mut zk = MatrixFieldC::zeros(grid.clone(), Symmetry::General);
        let mut zmask = ydata.mask.clone();
        for i in 0..3 {
            let (grad, gmask) = gradient_masked(&lam_k[i], &ydata.mask, cfg.fd)?;
            for r in 0..3 {
                zk.component_mut(r, i).copy_from_slice(grad.component(r));
            }
            zmask = gmask;
        }
        mask = mask.intersect(&zmask, "lambda gradients")?;
        lambda.push(lam_k);
        z.push(zk);
    }
    if mask.count() == 0 {
        return Err(Error::AllMasked("no voxel survives the lambda stage".into()));
    }
    Ok(LambdaData { lambda, z, mask })
}

/// `M_k = (i omega mu0 / 2) * star(H_{3+k} - sum_i lambda^k_i H_i)`, tagged
/// antisymmetric. Pointwise, no derivatives.
pub fn compute_m(
    h: &[VectorFieldC],
    lambda: &[[ScalarFieldC; 3]],
    cfg: &ReconConfig,
) -> Result<Vec<MatrixFieldC>> {
    let grid = common_grid(h)?.clone();
    if h.len() < 3 + lambda.len() {
        return Err(Error::NotEnoughFields {
            need: 3 + lambda.len(),
            got: h.len(),
        });
    }
    let factor = Complex64::new(0.0, 0.5 * cfg.omega * cfg.mu0);
    let mut out = Vec::with_capacity(lambda.len());
    for (k, lam_k) in lambda.iter().enumerate() {
        let mut mk = MatrixFieldC::zeros(grid.clone(), Symmetry::Antisymmetric);
        for idx in 0..grid.len() {
            let mut v = h[3 + k].vec_at(idx);
            for i in 0..3 {
                v -= h[i].vec_at(idx) * lam_k[i].at(idx);
            }
            mk.set_mat(idx, hodge_star_vector(&v) * factor);
        }
        out.push(mk);
    }
    Ok(out)
}

/// Row coordinates of `tr(X W) = sum_q x_q tr(w_q W)` for symmetric `W` in
/// the natural basis: diagonal entries once, off-diagonals twice.
#[inline]
fn row_of(w: &CMat3) -> [Complex64; 6] {
    [
        w[(0, 0)],
        w[(1, 1)],
        w[(2, 2)],
        w[(0, 1)] + w[(1, 0)],
        w[(0, 2)] + w[(2, 0)],
        w[(1, 2)] + w[(2, 1)],
    ]
}

struct VoxelSystem {
    a: DMatrix<Complex64>,
    b: DVector<Complex64>,
    ws: Vec<CMat3>,
}

fn build_system(
    y: &CMat3,
    zs: &[CMat3],
    ms: Option<&[CMat3]>,
) -> VoxelSystem {
    let omegas = antisym_basis_c();
    let m = zs.len();
    let mut a = DMatrix::<Complex64>::zeros(3 * m, 6);
    let mut b = DVector::<Complex64>::zeros(3 * m);
    let mut ws = Vec::with_capacity(3 * m);
    for (k, zk) in zs.iter().enumerate() {
        for (j, om) in omegas.iter().enumerate() {
            let w_full = om * zk * y.transpose();
            let w = (w_full + w_full.transpose()) * Complex64::new(0.5, 0.0);
            let row = row_of(&w);
            for q in 0..6 {
                a[(3 * k + j, q)] = row[q];
            }
            if let Some(ms) = ms {
                let mut rhs = Complex64::ZERO;
                for r in 0..3 {
                    for c in 0..3 {
                        rhs += om[(r, c)] * ms[k][(r, c)];
                    }
                }
                b[3 * k + j] = rhs;
            }
            ws.push(w);
        }
    }
    VoxelSystem { a, b, ws }
}

enum VoxelOutcome {
    Ok { gamma: CMat3, cond: f64 },
    RejectCond(f64),
    RejectRank(f64),
    RejectSingular(f64),
}

fn solve_voxel(sys: &VoxelSystem, cfg: &ReconConfig) -> VoxelOutcome {
    let svd = sys.a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv[0];
    let smin = sv[sv.len() - 1];
    let full_rank = smin > RANK_TOL * smax && smax > 0.0;
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !full_rank {
        return VoxelOutcome::RejectRank(cond);
    }
    if cond > cfg.w_cond_threshold {
        return VoxelOutcome::RejectCond(cond);
    }
    let x = match cfg.solver_mode {
        SolverMode::LeastSquares => match svd.solve(&sys.b, 0.0) {
            Ok(x) => x,
            Err(_) => return VoxelOutcome::RejectSingular(cond),
        },
        SolverMode::Cramer6 => {
            let gs = gram_schmidt(&sys.ws, RANK_TOL);
            if gs.rank() < 6 {
                return VoxelOutcome::RejectRank(cond);
            }
            // orthonormalized generators with right-hand sides propagated
            // through the same linear combinations
            let mut bmat = DMatrix::<Complex64>::zeros(6, 6);
            let mut rhs = DVector::<Complex64>::zeros(6);
            for c in 0..6 {
                let row = row_of(&gs.ortho[c]);
                for q in 0..6 {
                    bmat[(c, q)] = row[q];
                }
                let mut r = Complex64::ZERO;
                for (p, coeff) in gs.coeffs[c].iter().enumerate() {
                    if coeff.norm() > 0.0 {
                        r += coeff * sys.b[p];
                    }
                }
                rhs[c] = r;
            }
            let det = bmat.clone().lu().determinant();
            if det.norm() == 0.0 {
                return VoxelOutcome::RejectSingular(cond);
            }
            let mut x = DVector::<Complex64>::zeros(6);
            for q in 0..6 {
                let mut replaced = bmat.clone();
                replaced.set_column(q, &rhs);
                x[q] = replaced.lu().determinant() / det;
            }
            x
        }
    };
    let coords: [Complex64; 6] = std::array::from_fn(|q| x[q]);
    let ginv = sym_from_coords(&coords);
    match ginv.try_inverse() {
        Some(g) => {
            let gamma = (g + g.transpose()) * Complex64::new(0.5, 0.0);
            VoxelOutcome::Ok { gamma, cond }
        }
        None => VoxelOutcome::RejectSingular(cond),
    }
}

/// Assembles and solves the per-voxel systems over the masked region.
///
/// Returns the reconstructed tensor (symmetric tag) and the report; the
/// report's `valid_mask` excludes voxels rejected for conditioning, rank or
/// a singular final inversion.
pub fn assemble_and_solve(
    y: &MatrixFieldC,
    z: &[MatrixFieldC],
    m: &[MatrixFieldC],
    mask: &Mask,
    min_abs_det_y: f64,
    rejected_dety: usize,
    cfg: &ReconConfig,
) -> Result<(MatrixFieldC, ReconReport)> {
    if z.len() < 2 {
        return Err(Error::NotEnoughFields {
            need: 2,
            got: z.len(),
        });
    }
    if z.len() != m.len() {
        return Err(Error::InvalidArgument(
            "Z and M counts must agree".into(),
        ));
    }
    let grid = y.grid().clone();
    if mask.count() == 0 {
        return Err(Error::AllMasked("empty input mask".into()));
    }

    let indices: Vec<usize> = mask.indices().collect();
    let outcomes: Vec<VoxelOutcome> = indices
        .par_iter()
        .map(|&idx| {
            let ym = y.mat_at(idx);
            let zs: Vec<CMat3> = z.iter().map(|zk| zk.mat_at(idx)).collect();
            let ms: Vec<CMat3> = m.iter().map(|mk| mk.mat_at(idx)).collect();
            let sys = build_system(&ym, &zs, Some(&ms));
            solve_voxel(&sys, cfg)
        })
        .collect();

    let mut gamma = MatrixFieldC::zeros(grid.clone(), Symmetry::Symmetric);
    let mut flags = vec![false; grid.len()];
    let mut cond_field = ScalarFieldC::zeros(grid.clone());
    let mut worst = 0.0f64;
    let mut full_rank = 0usize;
    let mut rej_cond = 0usize;
    let mut rej_rank = 0usize;
    let mut rej_sing = 0usize;
    for (&idx, outcome) in indices.iter().zip(&outcomes) {
        match outcome {
            VoxelOutcome::Ok { gamma: g, cond } => {
                gamma.set_mat(idx, *g);
                flags[idx] = true;
                cond_field.values_mut()[idx] = Complex64::new(*cond, 0.0);
                worst = worst.max(*cond);
                full_rank += 1;
            }
            VoxelOutcome::RejectCond(c) => {
                cond_field.values_mut()[idx] = Complex64::new(*c, 0.0);
                full_rank += 1;
                rej_cond += 1;
            }
            VoxelOutcome::RejectRank(c) => {
                cond_field.values_mut()[idx] = Complex64::new(*c, 0.0);
                rej_rank += 1;
            }
            VoxelOutcome::RejectSingular(c) => {
                cond_field.values_mut()[idx] = Complex64::new(*c, 0.0);
                rej_sing += 1;
            }
        }
    }
    let valid_mask = Mask::from_flags(grid, flags, "reconstruction valid")?;
    let report = ReconReport {
        valid_mask,
        min_abs_det_y,
        worst_cond_w: worst,
        cond_field,
        attempted: indices.len(),
        full_rank,
        rejected_dety,
        rejected_cond: rej_cond,
        rejected_rank: rej_rank,
        rejected_singular: rej_sing,
    };
    Ok((gamma, report))
}

/// Rank/condition diagnostics of the `(Omega, Z_k, Y)` systems without
/// solving: per-voxel singular values of the `3m x 6` matrix.
pub fn diagnostics(
    y: &MatrixFieldC,
    z: &[MatrixFieldC],
    mask: &Mask,
    min_abs_det_y: f64,
    rejected_dety: usize,
    cfg: &ReconConfig,
) -> ReconReport {
    let grid = y.grid().clone();
    let indices: Vec<usize> = mask.indices().collect();
    let results: Vec<(f64, bool)> = indices
        .par_iter()
        .map(|&idx| {
            let ym = y.mat_at(idx);
            let zs: Vec<CMat3> = z.iter().map(|zk| zk.mat_at(idx)).collect();
            let sys = build_system(&ym, &zs, None);
            let svd = sys.a.svd(false, false);
            let sv = &svd.singular_values;
            let smax = sv[0];
            let smin = sv[sv.len() - 1];
            let full_rank = sv.len() >= 6 && smin > RANK_TOL * smax && smax > 0.0;
            let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
            (cond, full_rank)
        })
        .collect();

    let mut flags = vec![false; grid.len()];
    let mut cond_field = ScalarFieldC::zeros(grid.clone());
    let mut worst = 0.0f64;
    let mut full_rank = 0usize;
    let mut rej_cond = 0usize;
    let mut rej_rank = 0usize;
    for (&idx, &(cond, fr)) in indices.iter().zip(&results) {
        cond_field.values_mut()[idx] = Complex64::new(if cond.is_finite() { cond } else { 0.0 }, 0.0);
        if fr {
            full_rank += 1;
            if cond <= cfg.w_cond_threshold {
                flags[idx] = true;
                worst = worst.max(cond);
            } else {
                rej_cond += 1;
            }
        } else {
            rej_rank += 1;
        }
    }
    ReconReport {
        valid_mask: Mask::from_flags(grid, flags, "diagnostics valid").unwrap(),
        min_abs_det_y,
        worst_cond_w: worst,
        cond_field,
        attempted: indices.len(),
        full_rank,
        rejected_dety,
        rejected_cond: rej_cond,
        rejected_rank: rej_rank,
        rejected_singular: 0,
    }
}

/// Largest derivative order supported by [`error_norms`].
pub const MAX_SOBOLEV_ORDER: usize = 3;

/// Discrete `W^{s,inf}` distance: max over valid voxels and all
/// finite-difference derivatives of order `<= s` of the entrywise modulus of
/// `gh - gref`. Derivative stencils only use voxels inside the mask, which
/// shrinks accordingly per order.
pub fn error_norms(
    gh: &MatrixFieldC,
    gref: &MatrixFieldC,
    mask: &Mask,
    s: usize,
    cfg: &ReconConfig,
) -> Result<f64> {
    if gh.grid() != gref.grid() || gh.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    if s > MAX_SOBOLEV_ORDER {
        return Err(Error::InvalidArgument(format!(
            "derivative order {s} exceeds supported maximum {MAX_SOBOLEV_ORDER}"
        )));
    }
    let grid = gh.grid().clone();
    let mut total = 0.0f64;
    for r in 0..3 {
        for c in 0..3 {
            let mut diff = ScalarFieldC::zeros(grid.clone());
            for idx in 0..grid.len() {
                diff.values_mut()[idx] = gh.component(r, c)[idx] - gref.component(r, c)[idx];
            }
            // breadth-first over derivative orders; all multi-indices of the
            // next order come from axis-derivatives of the previous ones
            let mut level: Vec<([usize; 3], ScalarFieldC)> = vec![([0, 0, 0], diff)];
            let mut level_mask = mask.clone();
            for order in 0..=s {
                if level_mask.count() == 0 {
                    return Err(Error::MaskTooSmall { s });
                }
                for (_, f) in &level {
                    for idx in level_mask.indices() {
                        total = total.max(f.at(idx).norm());
                    }
                }
                if order == s {
                    break;
                }
                let mut next: Vec<([usize; 3], ScalarFieldC)> = Vec::new();
                let mut next_mask = None;
                for (mi, f) in &level {
                    let (grad, gmask) = gradient_masked(f, &level_mask, cfg.fd)?;
                    for axis in 0..3 {
                        let mut mi2 = *mi;
                        mi2[axis] += 1;
                        if next.iter().any(|(m, _)| *m == mi2) {
                            continue; // mixed partials commute
                        }
                        let comp = ScalarFieldC::from_values(
                            grid.clone(),
                            grad.component(axis).to_vec(),
                        )?;
                        next.push((mi2, comp));
                    }
                    next_mask = Some(gmask);
                }
                level = next;
                level_mask = next_mask.unwrap();
            }
        }
    }
    Ok(total)
}

/// Full reconstruction output.
pub struct ReconOutput {
    pub gamma: MatrixFieldC,
    pub report: ReconReport,
    /// `W^{s,inf}` error against the reference, when one was supplied.
    pub error: Option<f64>,
}

/// Composes the pipeline: `Y`, `lambda`/`Z`, `M`, assemble/solve, and
/// optionally the `W^{s,inf}` error against a reference tensor.
pub fn reconstruct(
    h: &[VectorFieldC],
    gamma_ref: Option<&MatrixFieldC>,
    s: usize,
    cfg: &ReconConfig,
) -> Result<ReconOutput> {
    if h.len() < 6 {
        return Err(Error::NotEnoughFields {
            need: 6,
            got: h.len(),
        });
    }
    let ydata = compute_y(h, cfg)?;
    if ydata.mask.count() == 0 {
        return Err(Error::AllMasked(
            "every voxel failed the det Y threshold".into(),
        ));
    }
    let lam = compute_lambda(h, &ydata, cfg)?;
    let m = compute_m(h, &lam.lambda, cfg)?;
    let (gamma, report) = assemble_and_solve(
        &ydata.y,
        &lam.z,
        &m,
        &lam.mask,
        ydata.min_abs_det_y,
        ydata.rejected_dety,
        cfg,
    )?;
    let error = match gamma_ref {
        Some(gref) => Some(error_norms(&gamma, gref, &report.valid_mask, s, cfg)?),
        None => None,
    };
    Ok(ReconOutput {
        gamma,
        report,
        error,
    })
}
