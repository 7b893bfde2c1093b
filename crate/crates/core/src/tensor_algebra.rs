//! Small-dimension complex linear algebra and exterior calculus.
//!
//! Inner products and bases on the 6-dimensional space of complex symmetric
//! 3x3 matrices, the Hodge star between 1-forms and 2-forms on R^3, modified
//! Gram-Schmidt with rank detection, and complex-orthogonal diagonalization
//! of complex symmetric matrices (`S = Q diag(k) Q^T` with `Q^T Q = I`).
//!
//! Everything here is a pure function on small values.

use num_complex::Complex64;

use crate::{CMat3, CVec3, Error, RMat3, Result};

/// Hermitian Frobenius inner product `<A, B> = tr(A* B)`, conjugate-linear
/// in the first slot.
pub fn frobenius_inner(a: &CMat3, b: &CMat3) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for r in 0..3 {
        for c in 0..3 {
            acc += a[(r, c)].conj() * b[(r, c)];
        }
    }
    acc
}

/// Bilinear trace pairing `A : B = tr(A B)` (no conjugation).
pub fn trace_pairing(a: &CMat3, b: &CMat3) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for r in 0..3 {
        for c in 0..3 {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

/// Hodge star of a 1-form: returns the antisymmetric matrix `A` with
/// `A[p][q] = (*V)(e_p, e_q)`, i.e. `A(1,2) = V3`, `A(2,3) = V1`,
/// `A(1,3) = -V2` in 1-based indices.
pub fn hodge_star_vector(v: &CVec3) -> CMat3 {
    let mut a = CMat3::zeros();
    a[(0, 1)] = v[2];
    a[(1, 0)] = -v[2];
    a[(1, 2)] = v[0];
    a[(2, 1)] = -v[0];
    a[(0, 2)] = -v[1];
    a[(2, 0)] = v[1];
    a
}

/// Hodge star of a 2-form given as an antisymmetric matrix; inverse pairing
/// of [`hodge_star_vector`] (star on 2-forms returns the 1-form coefficients).
pub fn hodge_star_antisym(a: &CMat3) -> CVec3 {
    CVec3::new(a[(1, 2)], -a[(0, 2)], a[(0, 1)])
}

/// Checks `** = (-1)^{l(3-l)} = +1` on the space of l-forms (l = 1 or 2)
/// by round-tripping the canonical basis and a few fixed dense samples.
pub fn hodge_involution_check(l: u8) -> Result<()> {
    if l != 1 && l != 2 {
        return Err(Error::InvalidArgument(format!("form degree {l} not in {{1,2}}")));
    }
    let samples = [
        CVec3::new(Complex64::ONE, Complex64::ZERO, Complex64::ZERO),
        CVec3::new(Complex64::ZERO, Complex64::ONE, Complex64::ZERO),
        CVec3::new(Complex64::ZERO, Complex64::ZERO, Complex64::ONE),
        CVec3::new(
            Complex64::new(0.3, -1.1),
            Complex64::new(-2.0, 0.7),
            Complex64::new(0.9, 4.2),
        ),
    ];
    for v in samples {
        let defect = if l == 1 {
            let round = hodge_star_antisym(&hodge_star_vector(&v));
            (round - v).norm()
        } else {
            // 2-form with coefficient matrix A = *v
            let a = hodge_star_vector(&v);
            let round = hodge_star_vector(&hodge_star_antisym(&a));
            (round - a).iter().map(|d| d.norm()).fold(0.0, f64::max)
        };
        if defect > 1e-14 {
            return Err(Error::InvalidArgument(format!(
                "hodge involution violated on degree {l}"
            )));
        }
    }
    Ok(())
}

/// Natural basis `(w1..w6)` of complex symmetric 3x3 matrices: three diagonal
/// units then the symmetric off-diagonal units for (1,2), (1,3), (2,3).
pub fn sym_basis() -> [CMat3; 6] {
    let mut out = [CMat3::zeros(); 6];
    for d in 0..3 {
        out[d][(d, d)] = Complex64::ONE;
    }
    for (n, (r, c)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        out[3 + n][(r, c)] = Complex64::ONE;
        out[3 + n][(c, r)] = Complex64::ONE;
    }
    out
}

/// Coordinates of a symmetric matrix in [`sym_basis`].
pub fn sym_to_coords(m: &CMat3) -> [Complex64; 6] {
    [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(0, 1)], m[(0, 2)], m[(1, 2)]]
}

/// Symmetric matrix from its [`sym_basis`] coordinates.
pub fn sym_from_coords(x: &[Complex64; 6]) -> CMat3 {
    let mut m = CMat3::zeros();
    m[(0, 0)] = x[0];
    m[(1, 1)] = x[1];
    m[(2, 2)] = x[2];
    m[(0, 1)] = x[3];
    m[(1, 0)] = x[3];
    m[(0, 2)] = x[4];
    m[(2, 0)] = x[4];
    m[(1, 2)] = x[5];
    m[(2, 1)] = x[5];
    m
}

/// The three elementary rotation generators, an orthogonal basis of real
/// antisymmetric 3x3 matrices.
pub fn antisym_basis() -> [RMat3; 3] {
    [
        RMat3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
        RMat3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
        RMat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    ]
}

/// [`antisym_basis`] with complex entries, for mixed expressions.
pub fn antisym_basis_c() -> [CMat3; 3] {
    antisym_basis().map(|m| m.map(|x| Complex64::new(x, 0.0)))
}

/// Result of [`gram_schmidt`].
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    /// Orthonormal matrices under [`frobenius_inner`].
    pub ortho: Vec<CMat3>,
    /// `coeffs[c]` expands `ortho[c]` in the input generators, so callers can
    /// propagate right-hand-side data through the orthogonalization.
    pub coeffs: Vec<Vec<Complex64>>,
    /// Indices of the generators that survived (one per ortho element, in
    /// acceptance order).
    pub kept: Vec<usize>,
}

impl GramSchmidt {
    pub fn rank(&self) -> usize {
        self.ortho.len()
    }
}

/// Modified Gram-Schmidt over complex symmetric matrices with one
/// re-orthogonalization pass. A generator is dropped when its residual after
/// projection falls below `tol` times its own norm.
pub fn gram_schmidt(generators: &[CMat3], tol: f64) -> GramSchmidt {
    let n = generators.len();
    let mut out = GramSchmidt {
        ortho: Vec::new(),
        coeffs: Vec::new(),
        kept: Vec::new(),
    };
    for (g, gen) in generators.iter().enumerate() {
        let norm0 = frobenius_inner(gen, gen).re.sqrt();
        let mut v = *gen;
        let mut coeff = vec![Complex64::ZERO; n];
        coeff[g] = Complex64::ONE;
        for _pass in 0..2 {
            for (j, q) in out.ortho.iter().enumerate() {
                let proj = frobenius_inner(q, &v);
                v -= q * proj;
                for (c, qc) in coeff.iter_mut().zip(&out.coeffs[j]) {
                    *c -= proj * qc;
                }
            }
        }
        let res = frobenius_inner(&v, &v).re.sqrt();
        if res <= tol * norm0 || res == 0.0 {
            continue;
        }
        let inv = Complex64::new(1.0 / res, 0.0);
        v *= inv;
        for c in coeff.iter_mut() {
            *c *= inv;
        }
        out.ortho.push(v);
        out.coeffs.push(coeff);
        out.kept.push(g);
    }
    out
}

/// Complex-orthogonal eigendecomposition of a complex symmetric 3x3 matrix.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    /// Columns are the (bilinearly normalized) eigenvectors.
    pub q: CMat3,
    /// Eigenvalues, ordered by descending modulus.
    pub eigvals: [Complex64; 3],
}

impl EigDecomposition {
    pub fn beta(&self, j: usize) -> CVec3 {
        self.q.column(j).into()
    }
}

fn bilinear_dot(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Roots of `lambda^3 + a2 lambda^2 + a1 lambda + a0` via Cardano plus two
/// Newton polish steps per root.
fn cubic_roots(a2: Complex64, a1: Complex64, a0: Complex64) -> [Complex64; 3] {
    let third = Complex64::new(1.0 / 3.0, 0.0);
    let shift = a2 * third;
    // depressed cubic t^3 + p t + q, lambda = t - a2/3
    let p = a1 - a2 * a2 * third;
    let q = a0 - a1 * a2 * third + a2 * a2 * a2 * Complex64::new(2.0 / 27.0, 0.0);

    let omega = Complex64::new(-0.5, 0.75f64.sqrt());
    let mut roots = [Complex64::ZERO; 3];
    if p.norm() == 0.0 && q.norm() == 0.0 {
        // triple root at -a2/3
    } else {
        let disc = (q * q * 0.25 + p * p * p / 27.0).sqrt();
        // pick the larger cube-root argument to avoid cancellation
        let c1 = -q * 0.5 + disc;
        let c2 = -q * 0.5 - disc;
        let u = if c1.norm() >= c2.norm() { c1 } else { c2 }.cbrt();
        let v = if u.norm() > 0.0 { -p * third / u } else { Complex64::ZERO };
        roots = [u + v, omega * u + omega.conj() * v, omega.conj() * u + omega * v];
    }
    for r in roots.iter_mut() {
        let mut lam = *r - shift;
        for _ in 0..2 {
            let f = ((lam + a2) * lam + a1) * lam + a0;
            let df = (Complex64::new(3.0, 0.0) * lam + a2 * 2.0) * lam + a1;
            if df.norm() > 0.0 {
                lam -= f / df;
            }
        }
        *r = lam;
    }
    roots
}

/// Diagonalizes a complex symmetric matrix as `S = Q diag(k) Q^T` with
/// complex-orthogonal `Q` (`Q^T Q = I`, bilinear normalization).
///
/// `tol` is relative: eigenvalue gaps are measured against the largest
/// eigenvalue modulus, eigenvector isotropy `|v.v|` against the Hermitian
/// norm of `v`. Scalar matrices are handled explicitly with `Q = I`;
/// any other (near-)degenerate spectrum or isotropic eigenvector is
/// rejected as not complex-orthogonally diagonalizable.
pub fn complex_orthogonal_diagonalize(s: &CMat3, tol: f64) -> Result<EigDecomposition> {
    let defect: f64 = (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .map(|(r, c)| (s[(r, c)] - s[(c, r)]).norm())
        .fold(0.0, f64::max);
    let scale = s.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if defect > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!(
            "matrix not symmetric: defect {defect:.3e}"
        )));
    }

    // scalar matrix: Q = I by convention
    let mean = (s[(0, 0)] + s[(1, 1)] + s[(2, 2)]) / 3.0;
    let scalar_defect = (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .map(|(r, c)| {
            let want = if r == c { mean } else { Complex64::ZERO };
            (s[(r, c)] - want).norm()
        })
        .fold(0.0, f64::max);
    if scalar_defect <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Ok(EigDecomposition {
            q: CMat3::identity(),
            eigvals: [mean; 3],
        });
    }

    // characteristic polynomial lambda^3 + a2 lambda^2 + a1 lambda + a0
    let tr = s.trace();
    let tr2 = (s * s).trace();
    let a2 = -tr;
    let a1 = (tr * tr - tr2) * 0.5;
    let a0 = -s.determinant();
    let mut vals = cubic_roots(a2, a1, a0);
    vals.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });

    let lam_scale = vals[0].norm().max(f64::MIN_POSITIVE);

    // eigenvectors via cross products of rows of (S - lambda I)
    let mut q = CMat3::zeros();
    let mut isotropic: Option<f64> = None;
    for (j, &lam) in vals.iter().enumerate() {
        let m = s - CMat3::identity() * lam;
        let rows: [CVec3; 3] = [
            CVec3::new(m[(0, 0)], m[(0, 1)], m[(0, 2)]),
            CVec3::new(m[(1, 0)], m[(1, 1)], m[(1, 2)]),
            CVec3::new(m[(2, 0)], m[(2, 1)], m[(2, 2)]),
        ];
        let candidates = [
            rows[0].cross(&rows[1]),
            rows[0].cross(&rows[2]),
            rows[1].cross(&rows[2]),
        ];
        let v = candidates
            .into_iter()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap();
        if v.norm() == 0.0 {
            return Err(Error::NotDiagonalizable(format!(
                "rank deficiency while extracting eigenvector {j}"
            )));
        }
        let vv = bilinear_dot(&v, &v);
        if vv.norm() <= tol * v.norm_squared() {
            isotropic = Some(vv.norm() / v.norm_squared());
            continue;
        }
        let mut col = v / vv.sqrt();
        // canonical sign: largest-modulus component has Re > 0 (Im > 0 on ties)
        let lead = (0..3).max_by(|&a, &b| col[a].norm().partial_cmp(&col[b].norm()).unwrap()).unwrap();
        let c = col[lead];
        if c.re < 0.0 || (c.re == 0.0 && c.im < 0.0) {
            col = -col;
        }
        q.set_column(j, &col);
    }
    if let Some(ratio) = isotropic {
        return Err(Error::NotDiagonalizable(format!(
            "isotropic eigenvector: |v.v|/|v|^2 = {ratio:.3e}"
        )));
    }
    let min_gap = (0..3)
        .flat_map(|a| (a + 1..3).map(move |b| (a, b)))
        .map(|(a, b)| (vals[a] - vals[b]).norm())
        .fold(f64::INFINITY, f64::min);
    if min_gap <= tol * lam_scale {
        return Err(Error::NotDiagonalizable(format!(
            "near-degenerate spectrum: min gap {min_gap:.3e} vs scale {lam_scale:.3e}"
        )));
    }

    let eig = EigDecomposition {
        q,
        eigvals: vals,
    };
    // a-posteriori verification of the decomposition
    let qtq = q.transpose() * q;
    let ortho_defect = (qtq - CMat3::identity())
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let recon = q * CMat3::from_diagonal(&CVec3::new(vals[0], vals[1], vals[2])) * q.transpose();
    let recon_defect = (recon - s).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if ortho_defect > 1e-10 || recon_defect > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotDiagonalizable(format!(
            "verification failed: |Q^TQ - I| = {ortho_defect:.3e}, residual {recon_defect:.3e}"
        )));
    }
    Ok(eig)
}

/// Outcome of [`ellipticity_check`].
#[derive(Debug, Clone)]
pub struct EllipticityReport {
    pub ok: bool,
    /// `[min eig Re, max eig Re, min eig Im/omega, max eig Im/omega]`.
    pub margins: [f64; 4],
    /// Human-readable description of the first violated bound.
    pub failure: Option<String>,
}

/// Checks the uniform ellipticity window `kappa^{-1} <= eig <= kappa` for the
/// real symmetric parts `Re(gamma)` (conductivity) and `Im(gamma)/omega`
/// (permittivity; `Im(gamma)` directly when `omega` is `None`).
pub fn ellipticity_check(gamma: &CMat3, kappa: f64, omega: Option<f64>) -> EllipticityReport {
    let w = omega.unwrap_or(1.0);
    let re = RMat3::from_fn(|r, c| 0.5 * (gamma[(r, c)].re + gamma[(c, r)].re));
    let im = RMat3::from_fn(|r, c| 0.5 * (gamma[(r, c)].im + gamma[(c, r)].im) / w);
    let bounds = |m: &RMat3| {
        let eig = nalgebra::SymmetricEigen::new(*m);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in eig.eigenvalues.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    };
    let (re_lo, re_hi) = bounds(&re);
    let (im_lo, im_hi) = bounds(&im);
    let margins = [re_lo, re_hi, im_lo, im_hi];
    let mut failure = None;
    let klo = 1.0 / kappa;
    if re_lo < klo {
        failure = Some(format!("Re part eigenvalue {re_lo:.3e} below 1/kappa"));
    } else if re_hi > kappa {
        failure = Some(format!("Re part eigenvalue {re_hi:.3e} above kappa"));
    } else if im_lo < klo {
        failure = Some(format!("Im part eigenvalue {im_lo:.3e} below 1/kappa"));
    } else if im_hi > kappa {
        failure = Some(format!("Im part eigenvalue {im_hi:.3e} above kappa"));
    }
    EllipticityReport {
        ok: failure.is_none(),
        margins,
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn frobenius_examples() {
        let i3 = CMat3::identity();
        assert_eq!(frobenius_inner(&i3, &i3), c(3.0, 0.0));
        let ii = i3 * c(0.0, 1.0);
        assert_eq!(frobenius_inner(&i3, &ii), c(0.0, 3.0));
        let w4 = sym_basis()[3];
        assert_eq!(frobenius_inner(&w4, &w4), c(2.0, 0.0));
        // conjugate symmetry
        let a = CMat3::from_fn(|r, cc| c(r as f64 - cc as f64, (r * cc) as f64));
        let b = CMat3::from_fn(|r, cc| c((r + cc) as f64, 0.3));
        let ab = frobenius_inner(&a, &b);
        let ba = frobenius_inner(&b, &a);
        assert!((ab - ba.conj()).norm() < 1e-14);
    }

    #[test]
    fn hodge_star_examples() {
        let e1 = CVec3::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let a = hodge_star_vector(&e1);
        assert_eq!(a[(1, 2)], c(1.0, 0.0));
        assert_eq!(a[(2, 1)], c(-1.0, 0.0));
        assert_eq!(a[(0, 1)], c(0.0, 0.0));

        let v = CVec3::new(c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0));
        let a = hodge_star_vector(&v);
        assert_eq!(a[(0, 1)], c(3.0, 0.0));
        assert_eq!(a[(0, 2)], c(-2.0, 0.0));
        assert_eq!(a[(1, 2)], c(1.0, 0.0));
        assert!((a + a.transpose()).iter().all(|z| z.norm() == 0.0));

        hodge_involution_check(1).unwrap();
        hodge_involution_check(2).unwrap();
    }

    #[test]
    fn gram_schmidt_basic() {
        let w = sym_basis();
        let gs = gram_schmidt(&[w[0], w[1]], 1e-8);
        assert_eq!(gs.rank(), 2);
        for (i, a) in gs.ortho.iter().enumerate() {
            for (j, b) in gs.ortho.iter().enumerate() {
                let d = frobenius_inner(a, b) - if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert!(d.norm() < 1e-12);
            }
        }
        let gs = gram_schmidt(&[w[0], w[0] * c(2.0, 0.0)], 1e-8);
        assert_eq!(gs.rank(), 1);
        assert_eq!(gs.kept, vec![0]);
        // all six basis elements span the space
        let gs = gram_schmidt(&sym_basis(), 1e-8);
        assert_eq!(gs.rank(), 6);
    }

    #[test]
    fn gram_schmidt_coeffs_reproduce_ortho() {
        let gens = [
            sym_from_coords(&[c(1.0, 0.2), c(0.0, 0.0), c(2.0, 0.0), c(0.5, -1.0), c(0.0, 0.0), c(1.0, 1.0)]),
            sym_from_coords(&[c(0.0, 1.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.3), c(2.0, 0.0), c(0.0, 0.0)]),
            sym_from_coords(&[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]),
        ];
        let gs = gram_schmidt(&gens, 1e-10);
        for (o, coeff) in gs.ortho.iter().zip(&gs.coeffs) {
            let mut rebuilt = CMat3::zeros();
            for (ci, g) in coeff.iter().zip(&gens) {
                rebuilt += g * *ci;
            }
            assert!((rebuilt - o).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12);
        }
    }

    #[test]
    fn diagonalize_scalar_matrix() {
        let s = CMat3::identity() * c(2.0, 1.0);
        let eig = complex_orthogonal_diagonalize(&s, 1e-8).unwrap();
        assert_eq!(eig.q, CMat3::identity());
        assert!((eig.eigvals[0] - c(2.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn diagonalize_block_example() {
        // [[1,i,0],[i,1,0],[0,0,2]] -> eigvals {1+i, 1-i, 2}
        let mut s = CMat3::zeros();
        s[(0, 0)] = c(1.0, 0.0);
        s[(0, 1)] = c(0.0, 1.0);
        s[(1, 0)] = c(0.0, 1.0);
        s[(1, 1)] = c(1.0, 0.0);
        s[(2, 2)] = c(2.0, 0.0);
        let eig = complex_orthogonal_diagonalize(&s, 1e-8).unwrap();
        let mut vals: Vec<_> = eig.eigvals.to_vec();
        vals.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((vals[0] - c(1.0, -1.0)).norm() < 1e-12);
        assert!((vals[1] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((vals[2] - c(1.0, 1.0)).norm() < 1e-12);
        for j in 0..3 {
            let r = s * eig.beta(j) - eig.beta(j) * eig.eigvals[j];
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn diagonalize_nilpotent_block_is_isotropic() {
        // [[1,i,0],[i,-1,0],[0,0,2]]: double eigenvalue 0 with (1,i) and (1,i).(1,i)=0
        let mut s = CMat3::zeros();
        s[(0, 0)] = c(1.0, 0.0);
        s[(0, 1)] = c(0.0, 1.0);
        s[(1, 0)] = c(0.0, 1.0);
        s[(1, 1)] = c(-1.0, 0.0);
        s[(2, 2)] = c(2.0, 0.0);
        let err = complex_orthogonal_diagonalize(&s, 1e-8).unwrap_err();
        match err {
            Error::NotDiagonalizable(msg) => assert!(msg.contains("isotropic"), "{msg}"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn diagonalize_degenerate_non_scalar_rejected() {
        let mut s = CMat3::zeros();
        s[(0, 0)] = c(1.0, 0.0);
        s[(1, 1)] = c(1.0, 0.0);
        s[(2, 2)] = c(2.0, 0.0);
        let err = complex_orthogonal_diagonalize(&s, 1e-8).unwrap_err();
        assert!(matches!(err, Error::NotDiagonalizable(_)));
    }

    #[test]
    fn ellipticity_examples() {
        let g = CMat3::identity() * c(1.0, 1.0);
        assert!(ellipticity_check(&g, 2.0, Some(1.0)).ok);
        let g = CMat3::identity() * c(1.0, -1.0);
        let rep = ellipticity_check(&g, 2.0, Some(1.0));
        assert!(!rep.ok);
        assert!(rep.failure.unwrap().contains("Im"));
        let g = CMat3::from_diagonal(&CVec3::new(c(3.0, 1.0), c(1.0, 1.0), c(1.0, 3.0)));
        let rep = ellipticity_check(&g, 2.0, Some(1.0));
        assert!(!rep.ok);
        assert_eq!(rep.margins[1], 3.0);
    }
}
