use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use apexflow::dataio::{
    format_sig9, load_manifest, load_video, read_frame, resize_frame, write_flo, write_frame_png,
    write_features, write_manifest, FeatureRow, Manifest, ManifestEntry,
};
use apexflow::descriptors::{block_partition, LbpParams};
use apexflow::eval::{ablate, write_ablation_csv, AblationAxis};
use apexflow::pipeline::{dataset_features, with_pool};
use apexflow::synthetic::{generate_dataset, SyntheticConfig, CLASS_NAMES};
use apexflow::{estimate_tvl1, run_protocol, spot_apex, Dataset, TvL1Params};
use rayon::prelude::*;

use crate::options::{load_file_config, EvalArgs, FeatureArgs};

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn load_dataset(manifest: &Path, resize: Option<(usize, usize)>, jobs: usize) -> Result<Dataset> {
    let m = load_manifest(manifest)?;
    Ok(Dataset::from_manifest(&m, resize, jobs)?)
}

/// Outcome of one spotted video, in manifest (1-based, absolute) frame numbers.
struct SpotRow {
    video_id: String,
    spotted: usize,
    truth: Option<usize>,
    curve: Vec<f64>,
}

fn spot_one(entry: &ManifestEntry, label: usize, blocks: usize, lbp: &LbpParams, resize: Option<(usize, usize)>) -> apexflow::Result<SpotRow> {
    let video = load_video(entry, label, resize)?;
    let (w, h) = video.dims();
    let grid = block_partition(w, h, blocks)?;
    let spot = spot_apex(&video, &grid, lbp)?;
    Ok(SpotRow {
        video_id: entry.video_id.clone(),
        spotted: spot.apex + entry.onset + 1,
        truth: entry.apex.map(|a| a + 1),
        curve: spot.curve.scores().to_vec(),
    })
}

/// Returns the number of entries that failed.
pub fn spot(
    manifest: &Path,
    features: &FeatureArgs,
    blocks: Option<usize>,
    out: Option<&Path>,
    dump_curves: Option<&Path>,
    jobs: usize,
) -> Result<usize> {
    let settings = features.settings(None)?;
    let blocks = blocks.unwrap_or(settings.pipeline.spotting_blocks);
    let lbp = settings.pipeline.lbp;
    let m: Manifest = load_manifest(manifest)?;
    let results: Vec<apexflow::Result<SpotRow>> = with_pool(jobs, || {
        m.entries
            .par_iter()
            .map(|e| spot_one(e, m.label_id(e), blocks, &lbp, settings.resize))
            .collect()
    });
    if let Some(dir) = dump_curves {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record(["video_id", "spotted_apex", "ground_truth_apex", "abs_distance"])?;
    let mut failures = 0;
    let mut distances = Vec::new();
    for (entry, result) in m.entries.iter().zip(results) {
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                eprintln!("error: {}: {e}", entry.video_id);
                failures += 1;
                continue;
            }
        };
        let distance = row.truth.map(|t| t.abs_diff(row.spotted));
        distances.extend(distance);
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([row.video_id.clone(), row.spotted.to_string(), opt(row.truth), opt(distance)])?;
        if let Some(dir) = dump_curves {
            let path = dir.join(format!("{}.csv", row.video_id));
            let mut c = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
            c.write_record(["frame", "score"])?;
            for (j, s) in row.curve.iter().enumerate() {
                c.write_record([(j + entry.onset + 1).to_string(), format_sig9(*s)])?;
            }
            c.flush()?;
        }
    }
    w.flush()?;
    if !distances.is_empty() {
        let mad = distances.iter().sum::<usize>() as f64 / distances.len() as f64;
        eprintln!("mean_abs_distance={mad:.4}");
    }
    Ok(failures)
}

pub fn features(manifest: &Path, args: &FeatureArgs, out: Option<&Path>, jobs: usize) -> Result<()> {
    let s = args.settings(None)?;
    let dataset = load_dataset(manifest, s.resize, jobs)?;
    let feats = dataset_features(&dataset, &s.pipeline, 0, jobs)?;
    let rows: Vec<FeatureRow> = dataset
        .samples
        .iter()
        .zip(feats)
        .map(|(v, f)| (v.video_id.clone(), dataset.class_names[v.label].clone(), f))
        .collect();
    write_features(&rows, output(out)?)?;
    Ok(())
}

pub fn eval(
    manifest: &Path,
    args: &FeatureArgs,
    eval: &EvalArgs,
    out: Option<&Path>,
    predictions: Option<&Path>,
    jobs: usize,
) -> Result<()> {
    let s = args.settings(Some(eval))?;
    let dataset = load_dataset(manifest, s.resize, jobs)?;
    let report = run_protocol(&dataset, &s.pipeline, jobs)?;
    let mut w = output(out)?;
    writeln!(w, "{}", report.to_json()?)?;
    w.flush()?;
    if let Some(p) = predictions {
        let mut c = csv::Writer::from_path(p).with_context(|| format!("writing {}", p.display()))?;
        c.write_record(["video_id", "repeat", "fold_id", "true", "predicted"])?;
        for fold in &report.folds {
            for ((id, t), pr) in fold.test_ids.iter().zip(&fold.truth).zip(&fold.predictions) {
                c.write_record([
                    id.as_str(),
                    &fold.repeat.to_string(),
                    &fold.fold_id.to_string(),
                    &report.class_names[*t],
                    &report.class_names[*pr],
                ])?;
            }
        }
        c.flush()?;
    }
    eprintln!(
        "protocol={} precision={:.4} recall={:.4} f_measure={:.4} accuracy={:.4}",
        report.protocol, report.precision, report.recall, report.f_measure, report.accuracy
    );
    Ok(())
}

pub fn ablation(manifest: &Path, args: &FeatureArgs, eval: &EvalArgs, axes: &[AblationAxis], out: Option<&Path>, jobs: usize) -> Result<()> {
    let s = args.settings(Some(eval))?;
    let dataset = load_dataset(manifest, s.resize, jobs)?;
    let axes = if axes.is_empty() { &AblationAxis::ALL[..] } else { axes };
    let rows = ablate(&dataset, &s.pipeline, axes, jobs)?;
    let mut w = output(out)?;
    write_ablation_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn flow(first: &Path, second: &Path, out: &Path, config: Option<&Path>, resize: Option<(usize, usize)>) -> Result<()> {
    let params: TvL1Params = load_file_config(config)?.pipeline.flow;
    let load = |p: &Path| -> Result<_> {
        let f = read_frame(p)?;
        Ok(match resize {
            Some((w, h)) => resize_frame(&f, w, h)?,
            None => f,
        })
    };
    let (a, b) = (load(first)?, load(second)?);
    if a.dims() != b.dims() {
        bail!("images differ in size: {:?} vs {:?}", a.dims(), b.dims());
    }
    let field = estimate_tvl1(&a, &b, &params)?;
    write_flo(&field, out)?;
    let n = field.u().len() as f64;
    let max = field.u().iter().zip(field.v()).map(|(u, v)| u.hypot(*v)).fold(0.0, f64::max);
    println!(
        "mean_u={:.4} mean_v={:.4} max_magnitude={:.4}",
        field.u().iter().sum::<f64>() / n,
        field.v().iter().sum::<f64>() / n,
        max
    );
    Ok(())
}

/// Writes a synthetic dataset as PNG frames plus `manifest.csv`.
pub fn synth(out: &Path, cfg: &SyntheticConfig) -> Result<PathBuf> {
    let videos = generate_dataset(cfg)?;
    let mut entries = Vec::with_capacity(videos.len());
    for v in &videos {
        let rel = PathBuf::from(&v.video_id);
        let dir = out.join(&rel);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (t, frame) in v.frames().iter().enumerate() {
            write_frame_png(frame, &dir.join(format!("img{:03}.png", t + 1)))?;
        }
        entries.push(ManifestEntry {
            dataset: "synthetic".into(),
            subject_id: v.subject_id.clone(),
            video_id: v.video_id.clone(),
            frames_dir: rel,
            onset: v.onset_idx,
            apex: v.apex_idx,
            offset: v.offset_idx,
            label: CLASS_NAMES[v.label].into(),
        });
    }
    let path = out.join("manifest.csv");
    write_manifest(&Manifest::from_entries(entries)?, &path)?;
    Ok(path)
}
