//! Unconstrained row-major `f64` rasters and the small set of image
//! operations the flow solver, resizer and synthetic generator share.

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Grid::new(width, height, vec![0.0; width * height])
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bilinear sample at a real-valued position, clamped to the border.
    /// Uses the lerp form so that constant neighbourhoods are reproduced
    /// exactly.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.at(x0, y0);
        let p10 = self.at(x1, y0);
        let p01 = self.at(x0, y1);
        let p11 = self.at(x1, y1);
        let top = p00 + fx * (p10 - p00);
        let bottom = p01 + fx * (p11 - p01);
        top + fy * (bottom - top)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Bilinear resize with pixel-centre alignment.
pub fn resize_bilinear(src: &Grid, width: usize, height: usize) -> Grid {
    if width == src.width && height == src.height {
        return src.clone();
    }
    let sx = src.width as f64 / width as f64;
    let sy = src.height as f64 / height as f64;
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let fy = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..width {
            let fx = (x as f64 + 0.5) * sx - 0.5;
            out.push(src.sample(fx, fy));
        }
    }
    Grid::new(width, height, out)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(src: &Grid, sigma: f64) -> Grid {
    if sigma <= 0.0 {
        return src.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (src.width, src.height);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wgt) in kernel.iter().enumerate() {
                acc += wgt * src.at_clamped(x as isize + k as isize - radius, y as isize);
            }
            tmp[y * w + x] = acc;
        }
    }
    let tmp = Grid::new(w, h, tmp);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wgt) in kernel.iter().enumerate() {
                acc += wgt * tmp.at_clamped(x as isize, y as isize + k as isize - radius);
            }
            out[y * w + x] = acc;
        }
    }
    Grid::new(w, h, out)
}

/// 3x3 median filter with replicated borders.
pub fn median3x3(src: &Grid) -> Grid {
    let (w, h) = (src.width, src.height);
    let mut out = Vec::with_capacity(w * h);
    let mut window = [0.0f64; 9];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    window[k] = src.at_clamped(x + dx, y + dy);
                    k += 1;
                }
            }
            window.sort_unstable_by(|a, b| a.total_cmp(b));
            out.push(window[4]);
        }
    }
    Grid::new(w, h, out)
}

/// Central-difference gradient with replicated borders.
pub fn centered_gradient(src: &Grid) -> (Grid, Grid) {
    let (w, h) = (src.width, src.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = 0.5 * (src.at_clamped(x + 1, y) - src.at_clamped(x - 1, y));
            gy[i] = 0.5 * (src.at_clamped(x, y + 1) - src.at_clamped(x, y - 1));
        }
    }
    (Grid::new(w, h, gx), Grid::new(w, h, gy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_reproduces_constants_exactly() {
        let g = Grid::new(3, 3, vec![0.7; 9]);
        for &(x, y) in &[(0.3, 1.7), (1.999_999, 0.000_1), (-4.0, 9.0)] {
            assert_eq!(g.sample(x, y), 0.7);
        }
    }

    #[test]
    fn resize_to_same_size_is_identity() {
        let g = Grid::new(4, 2, (0..8).map(f64::from).collect());
        assert_eq!(resize_bilinear(&g, 4, 2), g);
    }

    #[test]
    fn median_removes_isolated_spike() {
        let mut data = vec![1.0; 25];
        data[12] = 100.0;
        let out = median3x3(&Grid::new(5, 5, data));
        assert!(out.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn blur_preserves_constant() {
        let out = gaussian_blur(&Grid::new(6, 5, vec![0.25; 30]), 1.3);
        assert!(out.data.iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }
}
