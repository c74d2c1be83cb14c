use std::f64::consts::PI;

use super::{block_partition, BlockGrid};
use crate::error::{Error, Result};
use crate::kinematics::{polar_decompose, strain_magnitude};
use crate::types::{BiwoofConfig, FeatureVector, FlowField, ScalarField, WeightMode};

/// Orientation histogram bin of `theta` among `bins` equal sectors of
/// `[-pi, pi]`, 0-based; `theta = pi` falls into the top bin.
pub fn bin_index(theta: f64, bins: usize) -> Result<usize> {
    if bins == 0 {
        return Err(Error::Config("bin count must be at least 1".into()));
    }
    if !(-PI..=PI).contains(&theta) {
        return Err(Error::Domain(format!("orientation {theta} outside [-pi, pi]")));
    }
    let bin = ((theta + PI) * bins as f64 / (2.0 * PI)).floor() as usize;
    Ok(bin.min(bins - 1))
}

/// Bi-weighted oriented optical flow histogram.
///
/// Each pixel votes for the bin of its orientation with the local weight
/// (1, flow magnitude or strain magnitude). Each block histogram is then
/// scaled by the global weight: the block mean of 1, flow magnitude or
/// strain magnitude, averaged over the pixels the block actually holds.
pub fn biwoof(
    orientation: &ScalarField,
    magnitude: &ScalarField,
    strain: &ScalarField,
    cfg: &BiwoofConfig,
) -> Result<FeatureVector> {
    cfg.validate()?;
    let dims = orientation.dims();
    if magnitude.dims() != dims || strain.dims() != dims {
        return Err(Error::Shape(format!(
            "orientation {:?}, magnitude {:?} and strain {:?} must match",
            dims,
            magnitude.dims(),
            strain.dims()
        )));
    }
    let grid = block_partition(dims.0, dims.1, cfg.blocks)?;
    accumulate(&grid, orientation, magnitude, strain, cfg)
}

fn weight(mode: WeightMode, magnitude: f64, strain: f64) -> f64 {
    match mode {
        WeightMode::None => 1.0,
        WeightMode::Flow => magnitude,
        WeightMode::Strain => strain,
    }
}

fn accumulate(
    grid: &BlockGrid,
    orientation: &ScalarField,
    magnitude: &ScalarField,
    strain: &ScalarField,
    cfg: &BiwoofConfig,
) -> Result<FeatureVector> {
    let bins = cfg.bins;
    let mut out = vec![0.0; cfg.feature_len()];
    for (block, (x0, x1, y0, y1)) in grid.all_bounds().into_iter().enumerate() {
        let hist = &mut out[block * bins..(block + 1) * bins];
        let mut global = 0.0;
        for y in y0..y1 {
            for x in x0..x1 {
                let (rho, eps) = (magnitude.at(x, y), strain.at(x, y));
                hist[bin_index(orientation.at(x, y), bins)?] += weight(cfg.local_weight, rho, eps);
                global += weight(cfg.global_weight, rho, eps);
            }
        }
        let zeta = global / ((x1 - x0) * (y1 - y0)) as f64;
        hist.iter_mut().for_each(|h| *h *= zeta);
    }
    let features = FeatureVector::new(out)?;
    Ok(if cfg.l1_normalize { features.l1_normalized() } else { features })
}

/// Bi-WOOF of a flow field: polar decomposition, strain, then [`biwoof`].
pub fn biwoof_from_flow(flow: &FlowField, cfg: &BiwoofConfig) -> Result<FeatureVector> {
    let (magnitude, orientation) = polar_decompose(flow)?;
    let strain = strain_magnitude(flow)?;
    biwoof(&orientation, &magnitude, &strain, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::WeightMode::{Flow, None as Unit, Strain};

    #[test]
    fn bin_boundaries() {
        assert_eq!(bin_index(0.0, 8).unwrap(), 4);
        assert_eq!(bin_index(-PI, 8).unwrap(), 0);
        assert_eq!(bin_index(PI, 8).unwrap(), 7);
        assert_eq!(bin_index(PI / 4.0 - 1e-12, 8).unwrap(), 4);
        assert_eq!(bin_index(1.0, 1).unwrap(), 0);
    }

    #[test]
    fn bin_domain_errors() {
        assert!(matches!(bin_index(3.2, 8), Err(Error::Domain(_))));
        assert!(matches!(bin_index(f64::NAN, 8), Err(Error::Domain(_))));
        assert!(matches!(bin_index(0.0, 0), Err(Error::Config(_))));
    }

    fn uniform_flow(u: f64, v: f64) -> FlowField {
        FlowField::from_fn(8, 8, |_, _| (u, v)).unwrap()
    }

    #[test]
    fn zero_flow_gives_zero_vector() {
        for blocks in [1, 2, 4] {
            let cfg = BiwoofConfig::new(blocks, 8, Flow, Strain).unwrap();
            let f = biwoof_from_flow(&uniform_flow(0.0, 0.0), &cfg).unwrap();
            assert_eq!(f.len(), blocks * blocks * 8);
            assert!(f.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn uniform_rightward_flow_counts() {
        let flow = uniform_flow(1.0, 0.0);
        for local in [Flow, Unit] {
            let cfg = BiwoofConfig::new(1, 8, local, Unit).unwrap();
            let f = biwoof_from_flow(&flow, &cfg).unwrap();
            let mut expected = vec![0.0; 8];
            expected[4] = 64.0;
            assert_eq!(f.values(), expected.as_slice());
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = ScalarField::new(4, 4, vec![0.0; 16]).unwrap();
        let b = ScalarField::new(4, 5, vec![0.0; 20]).unwrap();
        let cfg = BiwoofConfig::new(2, 4, Flow, Strain).unwrap();
        assert!(matches!(biwoof(&a, &a, &b, &cfg), Err(Error::Shape(_))));
    }

    #[test]
    fn l1_normalization_is_opt_in() {
        let flow = FlowField::from_fn(8, 8, |x, y| (x as f64 * 0.1, y as f64 * 0.05)).unwrap();
        let mut cfg = BiwoofConfig::new(2, 8, Flow, Strain).unwrap();
        let raw = biwoof_from_flow(&flow, &cfg).unwrap();
        cfg.l1_normalize = true;
        let norm = biwoof_from_flow(&flow, &cfg).unwrap();
        let total: f64 = raw.values().iter().sum();
        assert!((norm.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in raw.values().iter().zip(norm.values()) {
            assert!((a / total - b).abs() < 1e-12);
        }
    }
}
