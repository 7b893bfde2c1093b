//! Synthetic measurement data: closed-form plane-wave solution frames for a
//! constant tensor, seeded noise injection, and a staggered-grid
//! frequency-domain forward solver for variable coefficients.
//!
//! For a constant diagonalizable `gamma0 = Q diag(k) Q^T` the Maxwell system
//! admits plane-wave solutions `E_j = beta_j exp(i zeta_j . x)` with
//! `zeta_j . beta_j = 0` and `zeta_j . zeta_j = -i omega mu0 k_j`. Three such
//! waves plus three linear-envelope companions `E_{3+k} = (grad_k . x) E_k`
//! form a six-solution frame whose magnetic fields drive the reconstruction
//! tests; everything is evaluated in closed form, no numerical
//! differentiation.

pub mod fdfd;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::field_model::{Grid3, Mask, MatrixFieldC, ScalarFieldC, Symmetry, VectorFieldC};
use crate::tensor_algebra::{complex_orthogonal_diagonalize, ellipticity_check, EigDecomposition};
use crate::{CMat3, CVec3, Error, Result};

fn bilinear_dot(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &CVec3, b: &CVec3) -> CVec3 {
    CVec3::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

/// Which field of a frame to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameField {
    E,
    H,
}

/// Analytic description of the six plane-wave solutions for a constant
/// admittivity tensor.
#[derive(Debug, Clone)]
pub struct SolutionFrame {
    pub gamma0: CMat3,
    pub omega: f64,
    pub mu0: f64,
    pub eig: EigDecomposition,
    /// Principal square roots `t_j = sqrt(-i omega mu0 k_j)`.
    pub t: [Complex64; 3],
    /// Wave vectors `zeta_1 = t_1 beta_2`, `zeta_2 = t_2 beta_3`,
    /// `zeta_3 = t_3 beta_1`.
    pub zeta: [CVec3; 3],
    /// Constant envelope gradients `grad lambda_k` = `beta_3, beta_1, beta_2`,
    /// each bilinearly orthogonal to its `{beta_k, zeta_k}`.
    pub lambda_grads: [CVec3; 3],
}

impl SolutionFrame {
    /// Builds the frame. `gamma0` must have positive-definite real and
    /// imaginary parts and a complex-orthogonally diagonalizable spectrum.
    pub fn new(gamma0: CMat3, omega: f64, mu0: f64) -> Result<Self> {
        if !(omega > 0.0) || !(mu0 > 0.0) {
            return Err(Error::InvalidArgument(
                "omega and mu0 must be positive".into(),
            ));
        }
        // positivity of both parts; the kappa window itself is the caller's
        // business, so use a wide one
        let rep = ellipticity_check(&gamma0, 1e12, Some(omega));
        if !rep.ok {
            return Err(Error::Ellipticity(rep.failure.unwrap_or_default()));
        }
        let eig = complex_orthogonal_diagonalize(&gamma0, 1e-8)?;
        let iwm = Complex64::new(0.0, -(omega * mu0));
        let t = [
            (iwm * eig.eigvals[0]).sqrt(),
            (iwm * eig.eigvals[1]).sqrt(),
            (iwm * eig.eigvals[2]).sqrt(),
        ];
        let beta = [eig.beta(0), eig.beta(1), eig.beta(2)];
        let zeta = [beta[1] * t[0], beta[2] * t[1], beta[0] * t[2]];
        let lambda_grads = [beta[2], beta[0], beta[1]];
        let frame = Self {
            gamma0,
            omega,
            mu0,
            eig,
            t,
            zeta,
            lambda_grads,
        };
        frame.verify()?;
        Ok(frame)
    }

    /// Checks the defining identities to 1e-10: `zeta_j . beta_j = 0`,
    /// `zeta_j . zeta_j = -i omega mu0 k_j`, envelope orthogonality, and
    /// `(beta.zeta) zeta - (zeta.zeta) beta = i omega mu0 gamma0 beta`.
    fn verify(&self) -> Result<()> {
        let iwm = Complex64::new(0.0, self.omega * self.mu0);
        for j in 0..3 {
            let beta = self.eig.beta(j);
            let z = self.zeta[j];
            let zb = bilinear_dot(&z, &beta);
            let zz = bilinear_dot(&z, &z);
            if zb.norm() > 1e-10 || (zz + iwm * self.eig.eigvals[j]).norm() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "frame invariant violated for wave {j}: zeta.beta {zb}, zeta.zeta {zz}"
                )));
            }
            let lg = self.lambda_grads[j];
            if bilinear_dot(&lg, &beta).norm() > 1e-10 || bilinear_dot(&lg, &z).norm() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "envelope gradient not orthogonal for wave {j}"
                )));
            }
            let lhs = z * bilinear_dot(&beta, &z) - beta * zz;
            let rhs = (self.gamma0 * beta) * iwm;
            if (lhs - rhs).norm() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "dispersion relation violated for wave {j}"
                )));
            }
        }
        Ok(())
    }

    fn phase(&self, j: usize, x: [f64; 3]) -> Complex64 {
        let z = self.zeta[j];
        let dot = z[0] * x[0] + z[1] * x[1] + z[2] * x[2];
        (Complex64::new(0.0, 1.0) * dot).exp()
    }

    /// Linear envelope `lambda_k(x) = grad_k . x` (integration constant 0).
    pub fn lambda(&self, k: usize, x: [f64; 3]) -> Complex64 {
        let g = self.lambda_grads[k];
        g[0] * x[0] + g[1] * x[1] + g[2] * x[2]
    }

    /// Electric field of solution `j` in `1..=6` at a point.
    pub fn e_at(&self, j: usize, x: [f64; 3]) -> CVec3 {
        assert!((1..=6).contains(&j), "solution index {j} not in 1..=6");
        if j <= 3 {
            self.eig.beta(j - 1) * self.phase(j - 1, x)
        } else {
            let k = j - 4;
            self.e_at(k + 1, x) * self.lambda(k, x)
        }
    }

    /// Magnetic field `H = (i/(omega mu0)) curl E` of solution `j`, in closed
    /// form.
    pub fn h_at(&self, j: usize, x: [f64; 3]) -> CVec3 {
        assert!((1..=6).contains(&j), "solution index {j} not in 1..=6");
        let c = Complex64::new(0.0, 1.0 / (self.omega * self.mu0));
        if j <= 3 {
            let jj = j - 1;
            let beta = self.eig.beta(jj);
            // curl(beta e^{i zeta.x}) = i zeta x beta e^{i zeta.x}
            cross(&self.zeta[jj], &beta) * (c * Complex64::new(0.0, 1.0) * self.phase(jj, x))
        } else {
            let k = j - 4;
            let beta = self.eig.beta(k);
            // curl(lambda E) = grad lambda x E + lambda curl E
            cross(&self.lambda_grads[k], &beta) * (c * self.phase(k, x))
                + self.h_at(k + 1, x) * self.lambda(k, x)
        }
    }

    /// Samples one field of one solution onto a grid.
    pub fn sample(&self, grid: &Grid3, which: FrameField, j: usize) -> VectorFieldC {
        VectorFieldC::from_fn(grid.clone(), |x| match which {
            FrameField::E => self.e_at(j, x),
            FrameField::H => self.h_at(j, x),
        })
    }

    /// All six magnetic fields on a grid, in solution order.
    pub fn sample_all_h(&self, grid: &Grid3) -> Vec<VectorFieldC> {
        (1..=6).map(|j| self.sample(grid, FrameField::H, j)).collect()
    }

    /// `det(E_1, E_2, E_3)(x) = det Q exp(i (zeta_1+zeta_2+zeta_3) . x)`,
    /// nonzero everywhere.
    pub fn det_e(&self, x: [f64; 3]) -> Complex64 {
        self.eig.q.determinant() * self.phase(0, x) * self.phase(1, x) * self.phase(2, x)
    }

    /// Closed-form reconstruction inputs on a grid: `Y` columns
    /// `gamma0 E_i`, its determinant, the envelope coefficients
    /// `lambda^k = (0,..,lambda_k,..,0)` and their constant gradients `Z_k`.
    pub fn analytic_inputs(&self, grid: &Grid3) -> AnalyticInputs {
        let n = grid.len();
        let mut y = MatrixFieldC::zeros(grid.clone(), Symmetry::General);
        let mut det_y = ScalarFieldC::zeros(grid.clone());
        for idx in 0..n {
            let x = grid.position(grid.coords(idx));
            let mut m = CMat3::zeros();
            for i in 0..3 {
                m.set_column(i, &(self.gamma0 * self.e_at(i + 1, x)));
            }
            y.set_mat(idx, m);
            det_y.values_mut()[idx] = m.determinant();
        }
        let mut lambda = Vec::with_capacity(3);
        let mut z = Vec::with_capacity(3);
        for k in 0..3 {
            let mut lam_k = [
                ScalarFieldC::zeros(grid.clone()),
                ScalarFieldC::zeros(grid.clone()),
                ScalarFieldC::zeros(grid.clone()),
            ];
            for idx in 0..n {
                let x = grid.position(grid.coords(idx));
                lam_k[k].values_mut()[idx] = self.lambda(k, x);
            }
            lambda.push(lam_k);
            let mut zk = CMat3::zeros();
            zk.set_column(k, &self.lambda_grads[k]);
            z.push(MatrixFieldC::constant(grid.clone(), Symmetry::General, zk));
        }
        AnalyticInputs {
            y,
            det_y,
            lambda,
            z,
            mask: Mask::full(grid.clone(), "analytic frame"),
        }
    }
}

/// Closed-form `Y`/`lambda`/`Z` data produced by
/// [`SolutionFrame::analytic_inputs`].
pub struct AnalyticInputs {
    pub y: MatrixFieldC,
    pub det_y: ScalarFieldC,
    /// `lambda[k][i]` is the coefficient of `H_i` in `H_{3+k}`.
    pub lambda: Vec<[ScalarFieldC; 3]>,
    pub z: Vec<MatrixFieldC>,
    pub mask: Mask,
}

/// Noise model for the stability experiments: i.i.d. complex Gaussian
/// perturbation, optionally band-limited by Gaussian smoothing.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    /// Relative amplitude; the per-component complex standard deviation is
    /// `delta * max |H|`.
    pub delta: f64,
    /// Gaussian smoothing std in voxels, applied to the noise (radius 0
    /// leaves the noise white).
    pub smoothing_radius: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(delta: f64, smoothing_radius: usize, seed: u64) -> Self {
        Self {
            delta,
            smoothing_radius,
            seed,
        }
    }
}

/// Adds seeded complex Gaussian noise of std `delta * max|H|` per component,
/// smoothing the noise with a separable Gaussian kernel of the given radius.
/// `delta = 0` returns the input unchanged; identical specs give identical
/// outputs.
pub fn add_noise(h: &VectorFieldC, spec: &NoiseSpec) -> VectorFieldC {
    if spec.delta == 0.0 {
        return h.clone();
    }
    let grid = h.grid().clone();
    let n = grid.len();
    let sigma = spec.delta * h.max_abs() / 2f64.sqrt();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = StandardNormal;
    let mut noise = VectorFieldC::zeros(grid.clone());
    for c in 0..3 {
        let comp = noise.component_mut(c);
        for v in comp.iter_mut().take(n) {
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            *v = Complex64::new(re * sigma, im * sigma);
        }
    }
    if spec.smoothing_radius > 0 {
        noise = gaussian_smooth(&noise, spec.smoothing_radius);
    }
    let mut out = h.clone();
    for (o, nz) in out.values_mut().iter_mut().zip(noise.values()) {
        *o += nz;
    }
    out
}

/// Separable Gaussian smoothing with std `radius` voxels, kernel truncated at
/// 3 std and renormalized near the boundary.
fn gaussian_smooth(v: &VectorFieldC, radius: usize) -> VectorFieldC {
    let grid = v.grid().clone();
    let sigma = radius as f64;
    let half = 3 * radius;
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let d = i as f64 - half as f64;
            (-0.5 * (d / sigma).powi(2)).exp()
        })
        .collect();
    let dims = grid.dims();
    let mut cur = v.clone();
    for axis in 0..3 {
        let stride = grid.stride(axis);
        let mut next = cur.clone();
        for c in 0..3 {
            let src = cur.component(c).to_vec();
            let dst = next.component_mut(c);
            for idx in 0..grid.len() {
                let pos = grid.coords(idx)[axis] as isize;
                let mut acc = Complex64::ZERO;
                let mut wsum = 0.0;
                for (ki, &w) in kernel.iter().enumerate() {
                    let off = ki as isize - half as isize;
                    let p = pos + off;
                    if p < 0 || p >= dims[axis] as isize {
                        continue;
                    }
                    let j = (idx as isize + off * stride as isize) as usize;
                    acc += src[j] * w;
                    wsum += w;
                }
                dst[idx] = acc / wsum;
            }
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn aniso_example() -> CMat3 {
        let re = [[2.0, 0.3, 0.0], [0.3, 1.5, 0.2], [0.0, 0.2, 3.0]];
        let im = [[1.0, 0.1, 0.0], [0.1, 2.0, 0.0], [0.0, 0.0, 1.2]];
        CMat3::from_fn(|r, cc| c(re[r][cc], im[r][cc]))
    }

    #[test]
    fn identity_frame_values() {
        let frame = SolutionFrame::new(CMat3::identity() * c(1.0, 1.0), 1.0, 1.0).unwrap();
        // k_j = 1+i; t_j = sqrt(-i(1+i)) = sqrt(1 - i)
        let t = (c(1.0, -1.0)).sqrt();
        for j in 0..3 {
            assert!((frame.t[j] - t).norm() < 1e-12);
            let zz = bilinear_dot(&frame.zeta[j], &frame.zeta[j]);
            assert!((zz - c(1.0, -1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn diagonal_frame() {
        let g0 = CMat3::from_diagonal(&CVec3::new(c(1.0, 1.0), c(2.0, 1.0), c(4.0, 1.0)));
        let frame = SolutionFrame::new(g0, 1.0, 1.0).unwrap();
        // Q is a signed permutation of the identity; eigvals sorted by |k| desc
        assert!(frame.eig.eigvals[0].norm() >= frame.eig.eigvals[2].norm());
        assert!((frame.eig.eigvals[0] - c(4.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn non_elliptic_gamma_rejected() {
        let g0 = CMat3::identity() * c(1.0, -1.0);
        assert!(matches!(
            SolutionFrame::new(g0, 1.0, 1.0),
            Err(Error::Ellipticity(_))
        ));
    }

    #[test]
    fn envelope_solutions_vanish_on_zero_set() {
        let frame = SolutionFrame::new(aniso_example(), 1.0, 1.0).unwrap();
        // E_4 = (beta_3 . x) E_1; at x = 0 the envelope vanishes
        let e4 = frame.e_at(4, [0.0, 0.0, 0.0]);
        assert!(e4.norm() < 1e-15);
    }

    #[test]
    fn h_fields_satisfy_sampled_maxwell() {
        // discrete curl H ~ gamma0 E and curl E ~ -i omega mu0 H at O(h^2)
        use crate::diffops::{curl, FdConfig};
        let frame = SolutionFrame::new(aniso_example(), 1.3, 0.8).unwrap();
        let grid = Grid3::unit_cube(17).unwrap();
        let iwm = c(0.0, frame.omega * frame.mu0);
        for j in [1usize, 2, 5, 6] {
            let e = frame.sample(&grid, FrameField::E, j);
            let h = frame.sample(&grid, FrameField::H, j);
            let (curl_e, mask) = curl(&e, FdConfig::default()).unwrap();
            let (curl_h, _) = curl(&h, FdConfig::default()).unwrap();
            let mut err_e = 0.0f64;
            let mut err_h = 0.0f64;
            for idx in mask.indices() {
                let x = grid.position(grid.coords(idx));
                err_e = err_e.max((curl_e.vec_at(idx) + h.vec_at(idx) * iwm).norm());
                err_h = err_h.max((curl_h.vec_at(idx) - frame.gamma0 * frame.e_at(j, x)).norm());
            }
            let scale = h.max_abs().max(e.max_abs());
            let h2 = grid.spacing()[0].powi(2);
            assert!(err_e < 10.0 * scale * h2, "curl E residual {err_e}");
            assert!(err_h < 10.0 * scale * h2, "curl H residual {err_h}");
        }
    }

    #[test]
    fn det_e_matches_product_formula_and_never_vanishes() {
        let frame = SolutionFrame::new(aniso_example(), 1.0, 1.0).unwrap();
        let grid = Grid3::unit_cube(7).unwrap();
        for idx in 0..grid.len() {
            let x = grid.position(grid.coords(idx));
            let mut m = CMat3::zeros();
            for i in 0..3 {
                m.set_column(i, &frame.e_at(i + 1, x));
            }
            let direct = m.determinant();
            let formula = frame.det_e(x);
            assert!((direct - formula).norm() <= 1e-10 * formula.norm());
            assert!(formula.norm() > 0.0);
        }
    }

    #[test]
    fn noise_zero_delta_is_identity() {
        let grid = Grid3::unit_cube(8).unwrap();
        let h = VectorFieldC::from_fn(grid, |x| {
            CVec3::new(c(x[0], x[1]), c(x[1], -x[2]), c(1.0, 0.0))
        });
        let out = add_noise(&h, &NoiseSpec::new(0.0, 2, 7));
        assert_eq!(out, h);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let grid = Grid3::unit_cube(8).unwrap();
        let h =
            VectorFieldC::from_fn(grid, |x| CVec3::new(c(x[0], 0.0), c(0.0, x[1]), c(x[2], x[0])));
        let spec = NoiseSpec::new(1e-3, 1, 123);
        let a = add_noise(&h, &spec);
        let b = add_noise(&h, &spec);
        assert_eq!(a, b);
        let c2 = add_noise(&h, &NoiseSpec::new(1e-3, 1, 124));
        assert_ne!(a, c2);
    }

    #[test]
    fn noise_magnitude_max_statistics() {
        // max |dH| / |H|_inf over ~12k complex draws concentrates near
        // delta * sqrt(ln N); accept the documented band
        let grid = Grid3::unit_cube(16).unwrap();
        let h = VectorFieldC::from_fn(grid, |x| {
            CVec3::new(c((6.0 * x[0]).sin(), 0.0), c(x[1], 0.2), c(0.3, x[2]))
        });
        let delta = 1e-3;
        let out = add_noise(&h, &NoiseSpec::new(delta, 0, 99));
        let mut dmax = 0.0f64;
        for (a, b) in out.values().iter().zip(h.values()) {
            dmax = dmax.max((a - b).norm());
        }
        let rel = dmax / h.max_abs();
        assert!(rel > 3e-4 && rel < 5e-3, "rel {rel}");
    }
}
