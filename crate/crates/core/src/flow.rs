//! Dense TV-L1 optical flow.
//!
//! Duality-based solver: for every scale of a Gaussian pyramid the target
//! image is warped with the current estimate, the brightness constraint is
//! linearized around it, and the relaxed energy is minimized by alternating
//! a pointwise thresholding step with a projected dual step on the total
//! variation term. A 3x3 median filter cleans `u, v` after each warp.
//!
//! Frames are jointly rescaled from `[0, 1]` to `[0, 255]` before solving so
//! that `lambda` keeps the meaning it has in the reference implementation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{centered_gradient, gaussian_blur, median3x3, resize_bilinear, Grid};
use crate::types::{FlowField, Frame};

const GRAD_IS_ZERO: f64 = 1e-10;
const PRESMOOTHING_SIGMA: f64 = 0.8;
const MIN_COARSE_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TvL1Params {
    /// Weight of the data attachment term.
    pub lambda: f64,
    /// Coupling between the primal variable and its auxiliary copy.
    pub theta: f64,
    /// Dual step size; values above 0.25 may diverge.
    pub tau: f64,
    /// Requested pyramid depth, clamped so the coarsest short side stays >= 16 px.
    pub n_scales: usize,
    /// Downsampling factor between consecutive scales.
    pub zoom: f64,
    pub n_warps: usize,
    /// Maximum inner iterations per warp.
    pub n_iters: usize,
    /// Stop the inner loop once the mean squared update drops below `stop_eps^2`.
    pub stop_eps: f64,
}

impl Default for TvL1Params {
    fn default() -> Self {
        TvL1Params {
            lambda: 0.15,
            theta: 0.3,
            tau: 0.25,
            n_scales: 5,
            zoom: 0.5,
            n_warps: 5,
            n_iters: 25,
            stop_eps: 0.01,
        }
    }
}

impl TvL1Params {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.lambda, self.theta, self.tau, self.zoom, self.stop_eps];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("TV-L1 parameters must be positive: {self:?}")));
        }
        if self.zoom >= 1.0 {
            return Err(Error::Config(format!("zoom must be < 1, got {}", self.zoom)));
        }
        if self.n_scales == 0 || self.n_warps == 0 || self.n_iters == 0 {
            return Err(Error::Config(
                "n_scales, n_warps and n_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Pyramid level sizes, finest first, after clamping the depth.
    pub fn pyramid_dims(&self, width: usize, height: usize) -> Vec<(usize, usize)> {
        let mut dims = vec![(width, height)];
        while dims.len() < self.n_scales {
            let (w, h) = *dims.last().expect("nonempty");
            let next = (
                ((w as f64 * self.zoom) + 0.5) as usize,
                ((h as f64 * self.zoom) + 0.5) as usize,
            );
            if next.0.min(next.1) < MIN_COARSE_SIDE {
                break;
            }
            dims.push(next);
        }
        dims
    }
}

/// Estimates the flow `(u, v)` such that `target(x + u, y + v) ~ reference(x, y)`.
pub fn estimate_tvl1(reference: &Frame, target: &Frame, params: &TvL1Params) -> Result<FlowField> {
    solve(reference, target, params, None)
}

/// Same as [`estimate_tvl1`], also returning the linearized TV-L1 energy at
/// the finest scale after every inner iteration of the final warp.
pub fn estimate_tvl1_traced(
    reference: &Frame,
    target: &Frame,
    params: &TvL1Params,
) -> Result<(FlowField, Vec<f64>)> {
    let mut trace = Vec::new();
    let flow = solve(reference, target, params, Some(&mut trace))?;
    Ok((flow, trace))
}

fn solve(
    reference: &Frame,
    target: &Frame,
    params: &TvL1Params,
    trace: Option<&mut Vec<f64>>,
) -> Result<FlowField> {
    params.validate()?;
    if reference.dims() != target.dims() {
        return Err(Error::Shape(format!(
            "flow needs equal frame sizes, got {:?} and {:?}",
            reference.dims(),
            target.dims()
        )));
    }
    let (width, height) = reference.dims();
    if width < 2 || height < 2 {
        return Err(Error::Shape(format!("flow needs at least 2x2 frames, got {width}x{height}")));
    }
    if reference.data().iter().chain(target.data()).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite intensity".into()));
    }

    let (i0, i1) = normalize_pair(reference, target);
    let i0 = gaussian_blur(&i0, PRESMOOTHING_SIGMA);
    let i1 = gaussian_blur(&i1, PRESMOOTHING_SIGMA);

    let dims = params.pyramid_dims(width, height);
    let sigma = 0.6 * (1.0 / (params.zoom * params.zoom) - 1.0).sqrt();
    let mut pyramid = vec![(i0, i1)];
    for &(w, h) in &dims[1..] {
        let (prev0, prev1) = pyramid.last().expect("nonempty");
        let next0 = resize_bilinear(&gaussian_blur(prev0, sigma), w, h);
        let next1 = resize_bilinear(&gaussian_blur(prev1, sigma), w, h);
        pyramid.push((next0, next1));
    }

    let (cw, ch) = *dims.last().expect("nonempty");
    let mut u = Grid::zeros(cw, ch);
    let mut v = Grid::zeros(cw, ch);
    let mut trace = trace;
    for level in (0..pyramid.len()).rev() {
        let (i0, i1) = &pyramid[level];
        let level_trace = if level == 0 { trace.take() } else { None };
        solve_scale(i0, i1, &mut u, &mut v, params, level_trace);
        if level > 0 {
            let (fw, fh) = dims[level - 1];
            let sx = fw as f64 / u.width as f64;
            let sy = fh as f64 / u.height as f64;
            let mut up_u = resize_bilinear(&u, fw, fh);
            let mut up_v = resize_bilinear(&v, fw, fh);
            up_u.data.iter_mut().for_each(|c| *c *= sx);
            up_v.data.iter_mut().for_each(|c| *c *= sy);
            u = up_u;
            v = up_v;
        }
    }
    FlowField::new(width, height, u.data, v.data)
}

/// Joint min-max stretch of both frames to `[0, 255]`.
fn normalize_pair(a: &Frame, b: &Frame) -> (Grid, Grid) {
    let (lo, hi) = a
        .data()
        .iter()
        .chain(b.data())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let map = |f: &Frame| {
        let data = if span > 0.0 {
            f.data().iter().map(|v| 255.0 * (v - lo) / span).collect()
        } else {
            vec![0.0; f.data().len()]
        };
        Grid::new(f.width(), f.height(), data)
    };
    (map(a), map(b))
}

/// Forward differences, zero on the last column/row.
fn forward_gradient(f: &Grid, fx: &mut [f64], fy: &mut [f64]) {
    let (w, h) = (f.width, f.height);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            fx[i] = if x + 1 < w { f.data[i + 1] - f.data[i] } else { 0.0 };
            fy[i] = if y + 1 < h { f.data[i + w] - f.data[i] } else { 0.0 };
        }
    }
}

/// Negative adjoint of [`forward_gradient`].
fn divergence(w: usize, h: usize, px: &[f64], py: &[f64], out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = if x == 0 {
                px[i]
            } else if x + 1 == w {
                -px[i - 1]
            } else {
                px[i] - px[i - 1]
            };
            let dy = if y == 0 {
                py[i]
            } else if y + 1 == h {
                -py[i - w]
            } else {
                py[i] - py[i - w]
            };
            out[i] = dx + dy;
        }
    }
}

struct Linearization {
    i1wx: Vec<f64>,
    i1wy: Vec<f64>,
    grad: Vec<f64>,
    rho_c: Vec<f64>,
}

impl Linearization {
    #[inline]
    fn residual(&self, i: usize, u: f64, v: f64) -> f64 {
        self.rho_c[i] + self.i1wx[i] * u + self.i1wy[i] * v
    }
}

fn linearize(i0: &Grid, i1: &Grid, i1x: &Grid, i1y: &Grid, u: &Grid, v: &Grid) -> Linearization {
    let (w, h) = (i0.width, i0.height);
    let n = w * h;
    let mut lin = Linearization {
        i1wx: vec![0.0; n],
        i1wy: vec![0.0; n],
        grad: vec![0.0; n],
        rho_c: vec![0.0; n],
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = x as f64 + u.data[i];
            let sy = y as f64 + v.data[i];
            let i1w = i1.sample(sx, sy);
            let gx = i1x.sample(sx, sy);
            let gy = i1y.sample(sx, sy);
            lin.i1wx[i] = gx;
            lin.i1wy[i] = gy;
            lin.grad[i] = gx * gx + gy * gy;
            lin.rho_c[i] = i1w - gx * u.data[i] - gy * v.data[i] - i0.data[i];
        }
    }
    lin
}

fn linearized_energy(lin: &Linearization, u: &Grid, v: &Grid, lambda: f64) -> f64 {
    let n = u.data.len();
    let (mut ux, mut uy) = (vec![0.0; n], vec![0.0; n]);
    let (mut vx, mut vy) = (vec![0.0; n], vec![0.0; n]);
    forward_gradient(u, &mut ux, &mut uy);
    forward_gradient(v, &mut vx, &mut vy);
    (0..n)
        .map(|i| {
            ux[i].hypot(uy[i]) + vx[i].hypot(vy[i]) + lambda * lin.residual(i, u.data[i], v.data[i]).abs()
        })
        .sum()
}

fn solve_scale(
    i0: &Grid,
    i1: &Grid,
    u: &mut Grid,
    v: &mut Grid,
    params: &TvL1Params,
    mut trace: Option<&mut Vec<f64>>,
) {
    let (w, h) = (i0.width, i0.height);
    let n = w * h;
    let (i1x, i1y) = centered_gradient(i1);

    let l_t = params.lambda * params.theta;
    let taut = params.tau / params.theta;
    let stop = params.stop_eps * params.stop_eps;

    let (mut p11, mut p12) = (vec![0.0; n], vec![0.0; n]);
    let (mut p21, mut p22) = (vec![0.0; n], vec![0.0; n]);
    let (mut aux_u, mut aux_v) = (vec![0.0; n], vec![0.0; n]);
    let (mut div_u, mut div_v) = (vec![0.0; n], vec![0.0; n]);
    let (mut ux, mut uy) = (vec![0.0; n], vec![0.0; n]);
    let (mut vx, mut vy) = (vec![0.0; n], vec![0.0; n]);

    for warp in 0..params.n_warps {
        let lin = linearize(i0, i1, &i1x, &i1y, u, v);
        let last_warp = warp + 1 == params.n_warps;

        let mut iter = 0;
        let mut change = f64::INFINITY;
        while change > stop && iter < params.n_iters {
            iter += 1;

            // Pointwise minimization of the data term around the current estimate.
            for i in 0..n {
                let rho = lin.residual(i, u.data[i], v.data[i]);
                let bound = l_t * lin.grad[i];
                let (d1, d2) = if rho < -bound {
                    (l_t * lin.i1wx[i], l_t * lin.i1wy[i])
                } else if rho > bound {
                    (-l_t * lin.i1wx[i], -l_t * lin.i1wy[i])
                } else if lin.grad[i] < GRAD_IS_ZERO {
                    (0.0, 0.0)
                } else {
                    let step = -rho / lin.grad[i];
                    (step * lin.i1wx[i], step * lin.i1wy[i])
                };
                aux_u[i] = u.data[i] + d1;
                aux_v[i] = v.data[i] + d2;
            }

            divergence(w, h, &p11, &p12, &mut div_u);
            divergence(w, h, &p21, &p22, &mut div_v);

            change = 0.0;
            for i in 0..n {
                let new_u = aux_u[i] + params.theta * div_u[i];
                let new_v = aux_v[i] + params.theta * div_v[i];
                let du = new_u - u.data[i];
                let dv = new_v - v.data[i];
                change += du * du + dv * dv;
                u.data[i] = new_u;
                v.data[i] = new_v;
            }
            change /= n as f64;

            forward_gradient(u, &mut ux, &mut uy);
            forward_gradient(v, &mut vx, &mut vy);
            for i in 0..n {
                let norm_u = 1.0 + taut * ux[i].hypot(uy[i]);
                let norm_v = 1.0 + taut * vx[i].hypot(vy[i]);
                p11[i] = (p11[i] + taut * ux[i]) / norm_u;
                p12[i] = (p12[i] + taut * uy[i]) / norm_u;
                p21[i] = (p21[i] + taut * vx[i]) / norm_v;
                p22[i] = (p22[i] + taut * vy[i]) / norm_v;
            }

            if last_warp {
                if let Some(trace) = trace.as_deref_mut() {
                    trace.push(linearized_energy(&lin, u, v, params.lambda));
                }
            }
        }

        *u = median3x3(u);
        *v = median3x3(v);
    }
}

/// Resamples `frame` at `(x + u, y + v)` with bilinear interpolation,
/// clamping sample positions to the image border.
pub fn warp_bilinear(frame: &Frame, flow: &FlowField) -> Result<Frame> {
    if frame.dims() != flow.dims() {
        return Err(Error::Shape(format!(
            "warp needs matching sizes, frame {:?} vs flow {:?}",
            frame.dims(),
            flow.dims()
        )));
    }
    let (w, h) = frame.dims();
    let grid = Grid::new(w, h, frame.data().to_vec());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (du, dv) = flow.at(x, y);
            out.push(grid.sample(x as f64 + du, y as f64 + dv).clamp(0.0, 1.0));
        }
    }
    Frame::new(w, h, out)
}
