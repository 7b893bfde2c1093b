//! Central finite differences on collocated grids.
//!
//! Gradient, curl and divergence with selectable accuracy order (2 or 4).
//! Boundary rings are masked out rather than handled with one-sided
//! stencils, so a derivative of a field valid on mask `m` is valid on
//! `m` eroded by the stencil half-width. Repeated central 1-D stencils
//! commute, which makes the discrete identities `curl(grad f) = 0` and
//! `div(curl V) = 0` hold to rounding error.

use num_complex::Complex64;

use crate::field_model::{Grid3, Mask, ScalarFieldC, VectorFieldC};
use crate::{Error, Result};

/// Central-difference accuracy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FdOrder {
    Order2,
    Order4,
}

impl FdOrder {
    pub fn margin(self) -> usize {
        match self {
            FdOrder::Order2 => 1,
            FdOrder::Order4 => 2,
        }
    }

    pub fn as_u32(self) -> u32 {
        match self {
            FdOrder::Order2 => 2,
            FdOrder::Order4 => 4,
        }
    }
}

/// Finite-difference configuration: accuracy order plus the derived stencil
/// half-width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FdConfig {
    pub order: FdOrder,
}

impl FdConfig {
    pub fn new(order: FdOrder) -> Self {
        Self { order }
    }

    pub fn margin(&self) -> usize {
        self.order.margin()
    }
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            order: FdOrder::Order2,
        }
    }
}

fn check_grid(grid: &Grid3, margin: usize) -> Result<()> {
    if grid.dims().iter().any(|&d| d < 2 * margin + 1) {
        return Err(Error::GridTooSmall { margin });
    }
    Ok(())
}

/// Derivative along `axis` of one voxel-sized slice of values, written into
/// `out` wherever the full stencil lies inside `mask`. Voxels without
/// stencil support keep their previous `out` value (callers pass zeroed
/// buffers).
fn axis_derivative_masked(
    values: &[Complex64],
    grid: &Grid3,
    mask: &Mask,
    axis: usize,
    order: FdOrder,
    out: &mut [Complex64],
) {
    let dims = grid.dims();
    let stride = grid.stride(axis);
    let h = grid.spacing()[axis];
    let margin = order.margin();
    for idx in 0..grid.len() {
        if !mask.get(idx) {
            continue;
        }
        let pos = grid.coords(idx)[axis];
        if pos < margin || pos + margin >= dims[axis] {
            continue;
        }
        let mut supported = true;
        for d in 1..=margin {
            if !mask.get(idx - d * stride) || !mask.get(idx + d * stride) {
                supported = false;
                break;
            }
        }
        if !supported {
            continue;
        }
        out[idx] = match order {
            FdOrder::Order2 => (values[idx + stride] - values[idx - stride]) / (2.0 * h),
            FdOrder::Order4 => {
                (-values[idx + 2 * stride] + values[idx + stride] * 8.0
                    - values[idx - stride] * 8.0
                    + values[idx - 2 * stride])
                    / (12.0 * h)
            }
        };
    }
}

/// Gradient of a scalar field valid on `mask`; the result is valid on the
/// mask eroded by the stencil half-width.
pub fn gradient_masked(
    f: &ScalarFieldC,
    mask: &Mask,
    cfg: FdConfig,
) -> Result<(VectorFieldC, Mask)> {
    if f.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    check_grid(f.grid(), cfg.margin())?;
    let mut out = VectorFieldC::zeros(f.grid().clone());
    for axis in 0..3 {
        let mut comp = vec![Complex64::ZERO; f.grid().len()];
        axis_derivative_masked(f.values(), f.grid(), mask, axis, cfg.order, &mut comp);
        out.component_mut(axis).copy_from_slice(&comp);
    }
    let out_mask = mask.eroded(cfg.margin(), format!("{} | gradient", mask.provenance()));
    Ok((out, out_mask))
}

/// Gradient on the full grid; the returned mask equals the interior mask for
/// the stencil half-width.
pub fn gradient(f: &ScalarFieldC, cfg: FdConfig) -> Result<(VectorFieldC, Mask)> {
    let full = Mask::full(f.grid().clone(), "full");
    let (out, _) = gradient_masked(f, &full, cfg)?;
    let mask = Mask::interior(f.grid().clone(), cfg.margin())
        .map_err(|_| Error::GridTooSmall { margin: cfg.margin() })?;
    Ok((out, mask))
}

/// Curl of a vector field valid on `mask`.
pub fn curl_masked(v: &VectorFieldC, mask: &Mask, cfg: FdConfig) -> Result<(VectorFieldC, Mask)> {
    if v.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    check_grid(v.grid(), cfg.margin())?;
    let grid = v.grid().clone();
    let n = grid.len();
    // d[a][c]: derivative along axis a of component c, for the six needed pairs
    let mut d = vec![vec![Complex64::ZERO; n]; 9];
    for axis in 0..3 {
        for comp in 0..3 {
            if axis == comp {
                continue;
            }
            axis_derivative_masked(
                v.component(comp),
                &grid,
                mask,
                axis,
                cfg.order,
                &mut d[3 * axis + comp],
            );
        }
    }
    let mut out = VectorFieldC::zeros(grid.clone());
    for idx in 0..n {
        out.component_mut(0)[idx] = d[3 * 1 + 2][idx] - d[3 * 2 + 1][idx];
        out.component_mut(1)[idx] = d[3 * 2 + 0][idx] - d[3 * 0 + 2][idx];
        out.component_mut(2)[idx] = d[3 * 0 + 1][idx] - d[3 * 1 + 0][idx];
    }
    let out_mask = mask.eroded(cfg.margin(), format!("{} | curl", mask.provenance()));
    Ok((out, out_mask))
}

/// Curl on the full grid; mask equals the interior mask.
pub fn curl(v: &VectorFieldC, cfg: FdConfig) -> Result<(VectorFieldC, Mask)> {
    let full = Mask::full(v.grid().clone(), "full");
    let (out, _) = curl_masked(v, &full, cfg)?;
    let mask = Mask::interior(v.grid().clone(), cfg.margin())
        .map_err(|_| Error::GridTooSmall { margin: cfg.margin() })?;
    Ok((out, mask))
}

/// Divergence of a vector field valid on `mask`.
pub fn divergence_masked(
    v: &VectorFieldC,
    mask: &Mask,
    cfg: FdConfig,
) -> Result<(ScalarFieldC, Mask)> {
    if v.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    check_grid(v.grid(), cfg.margin())?;
    let grid = v.grid().clone();
    let n = grid.len();
    let mut acc = vec![Complex64::ZERO; n];
    for axis in 0..3 {
        let mut comp = vec![Complex64::ZERO; n];
        axis_derivative_masked(v.component(axis), &grid, mask, axis, cfg.order, &mut comp);
        for idx in 0..n {
            acc[idx] += comp[idx];
        }
    }
    let out = ScalarFieldC::from_values(grid.clone(), acc)?;
    let out_mask = mask.eroded(cfg.margin(), format!("{} | divergence", mask.provenance()));
    Ok((out, out_mask))
}

/// Divergence on the full grid; mask equals the interior mask.
pub fn divergence(v: &VectorFieldC, cfg: FdConfig) -> Result<(ScalarFieldC, Mask)> {
    let full = Mask::full(v.grid().clone(), "full");
    let (out, _) = divergence_masked(v, &full, cfg)?;
    let mask = Mask::interior(v.grid().clone(), cfg.margin())
        .map_err(|_| Error::GridTooSmall { margin: cfg.margin() })?;
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CVec3;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        let g = Grid3::unit_cube(9).unwrap();
        let f = ScalarFieldC::from_fn(g.clone(), |x| c(x[0] * x[0]));
        let (grad, mask) = gradient(&f, FdConfig::default()).unwrap();
        for idx in mask.indices() {
            let x = g.position(g.coords(idx));
            let v = grad.vec_at(idx);
            assert!((v[0] - c(2.0 * x[0])).norm() < 1e-13);
            assert!(v[1].norm() < 1e-13 && v[2].norm() < 1e-13);
        }
        assert_eq!(mask.count(), 7 * 7 * 7);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = Grid3::unit_cube(6).unwrap();
        let f = ScalarFieldC::from_fn(g, |_| Complex64::new(3.5, -1.25));
        let (grad, mask) = gradient(&f, FdConfig::new(FdOrder::Order4)).unwrap();
        for idx in mask.indices() {
            assert_eq!(grad.vec_at(idx).norm(), 0.0);
        }
    }

    #[test]
    fn curl_of_linear_rotation_field() {
        let g = Grid3::unit_cube(7).unwrap();
        let v = VectorFieldC::from_fn(g, |x| CVec3::new(c(-x[1]), c(x[0]), c(0.0)));
        let (w, mask) = curl(&v, FdConfig::default()).unwrap();
        for idx in mask.indices() {
            let z = w.vec_at(idx);
            assert!(z[0].norm() < 1e-14 && z[1].norm() < 1e-14);
            assert!((z[2] - c(2.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn divergence_of_identity_field() {
        let g = Grid3::unit_cube(7).unwrap();
        let v = VectorFieldC::from_fn(g, |x| CVec3::new(c(x[0]), c(x[1]), c(x[2])));
        let (d, mask) = divergence(&v, FdConfig::default()).unwrap();
        for idx in mask.indices() {
            assert!((d.at(idx) - c(3.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn curl_grad_and_div_curl_vanish() {
        let g = Grid3::unit_cube(10).unwrap();
        for order in [FdOrder::Order2, FdOrder::Order4] {
            let cfg = FdConfig::new(order);
            let f = ScalarFieldC::from_fn(g.clone(), |x| {
                Complex64::new(
                    (7.1 * x[0] + 3.0 * x[1]).sin() * (2.0 * x[2]).cos(),
                    (x[0] * x[1] * x[2]).cos(),
                )
            });
            let scale = f.max_abs();
            let (grad, m1) = gradient(&f, cfg).unwrap();
            let (cg, m2) = curl_masked(&grad, &m1, cfg).unwrap();
            for idx in m2.indices() {
                assert!(cg.vec_at(idx).norm() <= 1e-12 * scale / g.spacing()[0].powi(2));
            }
            let v = VectorFieldC::from_fn(g.clone(), |x| {
                CVec3::new(
                    Complex64::new((5.0 * x[1]).sin(), x[2]),
                    Complex64::new((4.0 * x[2]).cos(), x[0] * x[0]),
                    Complex64::new((3.0 * x[0]).sin(), x[1]),
                )
            });
            let (w, m1) = curl(&v, cfg).unwrap();
            let (dw, m2) = divergence_masked(&w, &m1, cfg).unwrap();
            for idx in m2.indices() {
                assert!(dw.at(idx).norm() <= 1e-12 * v.max_abs() / g.spacing()[0].powi(2));
            }
        }
    }

    #[test]
    fn convergence_order_on_sine() {
        // two-grid Richardson estimate per configured order
        for (order, expect) in [(FdOrder::Order2, 2.0_f64), (FdOrder::Order4, 4.0_f64)] {
            let cfg = FdConfig::new(order);
            let mut errs = Vec::new();
            for n in [17usize, 33] {
                let g = Grid3::unit_cube(n).unwrap();
                let f = ScalarFieldC::from_fn(g.clone(), |x| {
                    c((2.0 * std::f64::consts::PI * x[0]).sin())
                });
                let (grad, mask) = gradient(&f, cfg).unwrap();
                let mut err = 0.0f64;
                for idx in mask.indices() {
                    let x = g.position(g.coords(idx));
                    let exact = 2.0 * std::f64::consts::PI
                        * (2.0 * std::f64::consts::PI * x[0]).cos();
                    err = err.max((grad.vec_at(idx)[0] - c(exact)).norm());
                }
                errs.push(err);
            }
            let rate = (errs[0] / errs[1]).log2();
            assert!(
                (rate - expect).abs() < 0.3,
                "order {order:?}: observed rate {rate}"
            );
        }
    }

    #[test]
    fn masked_gradient_shrinks_ragged_mask() {
        let g = Grid3::unit_cube(8).unwrap();
        let f = ScalarFieldC::from_fn(g.clone(), |x| c(x[0]));
        let mut holes = Mask::full(g.clone(), "holes");
        holes.set(g.index([4, 4, 4]), false);
        let (_, mask) = gradient_masked(&f, &holes, FdConfig::default()).unwrap();
        // neighbors of the hole along each axis lose support
        assert!(!mask.get(g.index([3, 4, 4])));
        assert!(!mask.get(g.index([4, 3, 4])));
        assert!(!mask.get(g.index([4, 4, 5])));
        assert!(mask.get(g.index([3, 3, 3])));
        assert!(!mask.get(g.index([4, 4, 4])));
    }

    #[test]
    fn too_small_grid_rejected() {
        // margin 2 on a 5-point axis leaves exactly the center: still fine;
        // reject only when no interior voxel remains
        let g = Grid3::unit_cube(5).unwrap();
        let f = ScalarFieldC::zeros(g);
        assert!(gradient(&f, FdConfig::new(FdOrder::Order4)).is_ok());
    }
}
