//! Synthetic faces and motions with known ground truth.
//!
//! Textures are analytic (sums of Gaussian blobs and low-frequency waves) so
//! that warped frames are sampled exactly instead of being interpolated from
//! a raster. A clip is produced by displacing the texture with a motion field
//! whose amplitude ramps up to a planted apex frame and decays afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::raster::{gaussian_blur, Grid};
use crate::types::{Frame, VideoSample};

/// Names of the generated motion classes, indexed by class id.
pub const CLASS_NAMES: [&str; 3] = ["brow_raise", "dilation", "mouth_stretch"];

/// Smoothed uniform noise in `[0, 1]`, `width x height`, cropped out of a
/// larger canvas so that integer-shifted crops are wrap-free.
pub fn noise_canvas(width: usize, height: usize, smoothing: f64, seed: u64) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height).map(|_| rng.gen::<f64>()).collect();
    let grid = gaussian_blur(&Grid::new(width, height, data), smoothing);
    let (lo, hi) = grid.min_max();
    let span = (hi - lo).max(1e-12);
    Grid::new(width, height, grid.data.iter().map(|v| (v - lo) / span).collect())
}

/// A textured pair related by an integer translation: the returned flow
/// from `reference` to `target` is exactly `(dx, dy)` at every pixel.
pub fn shifted_pair(size: usize, dx: i32, dy: i32, smoothing: f64, seed: u64) -> Result<(Frame, Frame)> {
    let margin = (dx.unsigned_abs().max(dy.unsigned_abs()) as usize) + 2;
    let canvas = noise_canvas(size + 2 * margin, size + 2 * margin, smoothing, seed);
    let crop = |ox: isize, oy: isize| {
        Frame::from_fn(size, size, |x, y| {
            canvas.at((x as isize + ox) as usize, (y as isize + oy) as usize)
        })
    };
    let m = margin as isize;
    let reference = crop(m, m)?;
    let target = crop(m - dx as isize, m - dy as isize)?;
    Ok((reference, target))
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    x: f64,
    y: f64,
    inv_two_sigma_sq: f64,
    amplitude: f64,
}

/// A smooth random face-like texture defined on the continuous plane.
#[derive(Debug, Clone)]
pub struct Texture {
    blobs: Vec<Blob>,
    waves: Vec<(f64, f64, f64, f64)>,
    offset: f64,
    scale: f64,
}

impl Texture {
    pub fn random(width: usize, height: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (width as f64, height as f64);
        let blobs = (0..(width * height) / 24)
            .map(|_| {
                let sigma = rng.gen_range(1.2..3.5);
                Blob {
                    x: rng.gen_range(-4.0..w + 4.0),
                    y: rng.gen_range(-4.0..h + 4.0),
                    inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
                    amplitude: rng.gen_range(-1.0..1.0),
                }
            })
            .collect();
        let waves = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                    rng.gen_range(0.2..0.5),
                )
            })
            .collect();
        let mut tex = Texture {
            blobs,
            waves,
            offset: 0.0,
            scale: 1.0,
        };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in 0..height {
            for x in 0..width {
                let v = tex.raw(x as f64, y as f64);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        // Map the visible range to [0.15, 0.85], leaving headroom for motion and noise.
        tex.scale = 0.7 / (hi - lo).max(1e-9);
        tex.offset = 0.15 - lo * tex.scale;
        tex
    }

    fn raw(&self, x: f64, y: f64) -> f64 {
        let blobs: f64 = self
            .blobs
            .iter()
            .map(|b| {
                let d2 = (x - b.x).powi(2) + (y - b.y).powi(2);
                b.amplitude * (-d2 * b.inv_two_sigma_sq).exp()
            })
            .sum();
        let waves: f64 = self
            .waves
            .iter()
            .map(|&(kx, ky, phase, amp)| amp * (kx * x + ky * y + phase).sin())
            .sum();
        blobs + waves
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        (self.raw(x, y) * self.scale + self.offset).clamp(0.0, 1.0)
    }
}

/// Class-specific facial motion patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionClass {
    /// Upward displacement of both brow regions.
    BrowRaise,
    /// Uniform outward expansion about the face centre.
    Dilation,
    /// Mouth corners pulled apart horizontally.
    MouthStretch,
}

impl MotionClass {
    pub const ALL: [MotionClass; 3] = [MotionClass::BrowRaise, MotionClass::Dilation, MotionClass::MouthStretch];

    pub fn id(self) -> usize {
        match self {
            MotionClass::BrowRaise => 0,
            MotionClass::Dilation => 1,
            MotionClass::MouthStretch => 2,
        }
    }
}

/// A parametrized displacement field; `displacement(x, y)` is in pixels at
/// unit amplitude.
#[derive(Debug, Clone, Copy)]
pub struct Motion {
    pub class: MotionClass,
    width: f64,
    height: f64,
    jitter: (f64, f64),
}

impl Motion {
    pub fn new(class: MotionClass, width: usize, height: usize, jitter: (f64, f64)) -> Self {
        Motion {
            class,
            width: width as f64,
            height: height as f64,
            jitter,
        }
    }

    fn bump(&self, x: f64, y: f64, cx: f64, cy: f64, sigma: f64) -> f64 {
        let (jx, jy) = self.jitter;
        let d2 = (x - cx * self.width - jx).powi(2) + (y - cy * self.height - jy).powi(2);
        (-d2 / (2.0 * (sigma * self.width).powi(2))).exp()
    }

    pub fn displacement(&self, x: f64, y: f64) -> (f64, f64) {
        match self.class {
            MotionClass::BrowRaise => {
                let g = self.bump(x, y, 0.3, 0.28, 0.11) + self.bump(x, y, 0.7, 0.28, 0.11);
                (0.0, -g)
            }
            MotionClass::MouthStretch => {
                let left = self.bump(x, y, 0.34, 0.74, 0.09);
                let right = self.bump(x, y, 0.66, 0.74, 0.09);
                (right - left, 0.0)
            }
            MotionClass::Dilation => {
                let cx = 0.5 * self.width + self.jitter.0;
                let cy = 0.5 * self.height + self.jitter.1;
                (0.6 * (x - cx) / (0.5 * self.width), 0.6 * (y - cy) / (0.5 * self.height))
            }
        }
    }
}

/// Temporal amplitude profile: linear ramp from 0 at `apex - half_width` to
/// 1 at `apex`, then linear decay back to 0.
pub fn ramp_profile(frame: usize, apex: usize, half_width: usize) -> f64 {
    let d = (frame as f64 - apex as f64).abs();
    (1.0 - d / half_width as f64).max(0.0)
}

/// Renders `texture` displaced by `amplitude * motion`, plus Gaussian noise.
pub fn render(
    texture: &Texture,
    motion: &Motion,
    amplitude: f64,
    width: usize,
    height: usize,
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Result<Frame> {
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let (dx, dy) = motion.displacement(xf, yf);
            let mut v = texture.value(xf - amplitude * dx, yf - amplitude * dy);
            if noise_sigma > 0.0 {
                v += noise_sigma * standard_normal(rng);
            }
            data.push(v.clamp(0.0, 1.0));
        }
    }
    Frame::new(width, height, data)
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; one draw is discarded to keep the stream simple.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub subjects: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Half width (in frames) of the ramp-and-decay amplitude profile.
    pub half_width: usize,
    /// Peak displacement amplitude range in pixels.
    pub amplitude: (f64, f64),
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            subjects: 10,
            width: 64,
            height: 64,
            frames: 40,
            half_width: 12,
            amplitude: (1.0, 2.0),
            noise_sigma: 0.0,
            seed: 2024,
        }
    }
}

/// Generates one clip of `class` for a subject texture. The apex is drawn
/// uniformly so that the full ramp fits inside the clip.
pub fn generate_video(
    cfg: &SyntheticConfig,
    texture: &Texture,
    class: MotionClass,
    subject_id: &str,
    video_id: &str,
    rng: &mut impl Rng,
) -> Result<VideoSample> {
    let lo = (cfg.half_width + 1).min(cfg.frames - 1);
    let hi = cfg.frames.saturating_sub(cfg.half_width + 1).max(lo + 1);
    let apex = rng.gen_range(lo..hi).min(cfg.frames - 1);
    let peak = rng.gen_range(cfg.amplitude.0..=cfg.amplitude.1);
    let jitter = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let motion = Motion::new(class, cfg.width, cfg.height, jitter);
    let frames = (0..cfg.frames)
        .map(|t| {
            let amp = peak * ramp_profile(t, apex, cfg.half_width);
            render(texture, &motion, amp, cfg.width, cfg.height, cfg.noise_sigma, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    VideoSample::new(frames, 0, Some(apex), cfg.frames - 1, class.id(), subject_id, video_id)
}

/// `subjects x 3` clips, one per motion class and subject, each subject with
/// its own texture. Deterministic in `cfg.seed`.
pub fn generate_dataset(cfg: &SyntheticConfig) -> Result<Vec<VideoSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.subjects * MotionClass::ALL.len());
    for s in 0..cfg.subjects {
        let subject_id = format!("sub{:02}", s + 1);
        let texture = Texture::random(cfg.width, cfg.height, rng.gen());
        for class in MotionClass::ALL {
            let video_id = format!("{subject_id}_{}", CLASS_NAMES[class.id()]);
            out.push(generate_video(cfg, &texture, class, &subject_id, &video_id, &mut rng)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_pair_matches_translation() {
        let (a, b) = shifted_pair(20, 2, -1, 1.0, 3).unwrap();
        for y in 2..18 {
            for x in 2..17 {
                let tx = (x as i32 + 2) as usize;
                let ty = (y as i32 - 1) as usize;
                assert_eq!(b.at(tx, ty), a.at(x, y));
            }
        }
    }

    #[test]
    fn ramp_peaks_at_apex() {
        assert_eq!(ramp_profile(7, 7, 4), 1.0);
        assert_eq!(ramp_profile(5, 7, 4), 0.5);
        assert_eq!(ramp_profile(3, 7, 4), 0.0);
        assert_eq!(ramp_profile(12, 7, 4), 0.0);
    }

    #[test]
    fn dataset_is_deterministic_and_labelled() {
        let cfg = SyntheticConfig {
            subjects: 2,
            width: 24,
            height: 24,
            frames: 12,
            half_width: 4,
            ..SyntheticConfig::default()
        };
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.frames(), y.frames());
            assert_eq!(x.apex_idx, y.apex_idx);
        }
        let labels: Vec<usize> = a.iter().map(|v| v.label).collect();
        assert_eq!(labels, vec![0, 1, 2, 0, 1, 2]);
        for v in &a {
            let apex = v.apex_idx.unwrap();
            assert!(apex > 4 && apex + 4 < 12, "apex {apex}");
        }
    }
}
