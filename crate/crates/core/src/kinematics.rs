//! Flow magnitude, orientation and optical strain.

use crate::error::{Error, Result};
use crate::types::{FlowField, ScalarField};

/// Per-pixel magnitude `sqrt(u^2 + v^2)` and four-quadrant orientation
/// `atan2(v, u)` in `(-pi, pi]`. The zero vector has orientation 0.
pub fn polar_decompose(flow: &FlowField) -> Result<(ScalarField, ScalarField)> {
    let (w, h) = flow.dims();
    let magnitude = flow.u().iter().zip(flow.v()).map(|(u, v)| u.hypot(*v)).collect();
    let orientation = flow.u().iter().zip(flow.v()).map(|(&u, &v)| orientation(u, v)).collect();
    Ok((ScalarField::new(w, h, magnitude)?, ScalarField::new(w, h, orientation)?))
}

/// `atan2(v, u)` folded into `(-pi, pi]`; signed zeros map to 0 and `-pi`
/// (reachable through `v = -0.0`) maps to `pi`.
#[inline]
pub fn orientation(u: f64, v: f64) -> f64 {
    if u == 0.0 && v == 0.0 {
        return 0.0;
    }
    let t = v.atan2(u);
    if t == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        t
    }
}

/// First derivative along one axis with unit spacing: central differences
/// inside, one-sided differences on the first and last sample.
#[inline]
fn derivative(f: impl Fn(usize) -> f64, i: usize, n: usize) -> f64 {
    if i == 0 {
        f(1) - f(0)
    } else if i + 1 == n {
        f(n - 1) - f(n - 2)
    } else {
        0.5 * (f(i + 1) - f(i - 1))
    }
}

/// Magnitude of the infinitesimal strain tensor
/// `sqrt(exx^2 + eyy^2 + exy^2 + eyx^2)` with `exy = eyx = (du/dy + dv/dx) / 2`.
pub fn strain_magnitude(flow: &FlowField) -> Result<ScalarField> {
    let (w, h) = flow.dims();
    if w < 2 || h < 2 {
        return Err(Error::Shape(format!("strain needs at least 2x2 flow, got {w}x{h}")));
    }
    let (u, v) = (flow.u(), flow.v());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let row = y * w;
            let du_dx = derivative(|k| u[row + k], x, w);
            let dv_dx = derivative(|k| v[row + k], x, w);
            let du_dy = derivative(|k| u[k * w + x], y, h);
            let dv_dy = derivative(|k| v[k * w + x], y, h);
            let shear = 0.5 * (du_dy + dv_dx);
            out.push((du_dx * du_dx + dv_dy * dv_dy + 2.0 * shear * shear).sqrt());
        }
    }
    ScalarField::new(w, h, out)
}
