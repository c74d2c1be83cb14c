//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use apexflow::descriptors::{biwoof, block_partition, LbpParams};
use apexflow::eval::f_measure;
use apexflow::kinematics::{polar_decompose, strain_magnitude};
use apexflow::pipeline::{biwoof_whole_sequence, video_features};
use apexflow::spotting::{detect_peaks, divide_and_conquer, spot_apex, DifferenceCurve};
use apexflow::synthetic::{generate_dataset, generate_video, shifted_pair, MotionClass, SyntheticConfig, Texture, CLASS_NAMES};
use apexflow::{
    estimate_tvl1, run_protocol, ApexSource, BiwoofConfig, ConfusionMatrix, Dataset, FlowField, PipelineConfig,
    ScalarField, TvL1Params, WeightMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------- flow

const FLOW_MARGIN: usize = 8;

fn flow_accuracy() -> Outcome {
    let params = TvL1Params::default();
    let shifts = [(1, 0), (0, 1), (-1, 2), (2, -2), (3, 0), (0, -3), (3, 3), (-2, 3)];
    let mut worst_epe = 0.0f64;
    let mut slowest = Duration::ZERO;
    for (k, &(dx, dy)) in shifts.iter().enumerate() {
        let (a, b) = shifted_pair(64, dx, dy, 1.0, 100 + k as u64).map_err(|e| e.to_string())?;
        let t = Instant::now();
        let flow = estimate_tvl1(&a, &b, &params).map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
        let (mut sum, mut n) = (0.0, 0.0);
        for y in FLOW_MARGIN..64 - FLOW_MARGIN {
            for x in FLOW_MARGIN..64 - FLOW_MARGIN {
                let (u, v) = flow.at(x, y);
                sum += (u - dx as f64).hypot(v - dy as f64);
                n += 1.0;
            }
        }
        worst_epe = worst_epe.max(sum / n);
    }
    let (a, _) = shifted_pair(64, 0, 0, 1.0, 7).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let still = estimate_tvl1(&a, &a, &params).map_err(|e| e.to_string())?;
    slowest = slowest.max(t.elapsed());
    let max_still = still.u().iter().zip(still.v()).map(|(u, v)| u.hypot(*v)).fold(0.0, f64::max);
    check!(worst_epe < 0.5, "worst mean interior EPE {worst_epe:.4} px (need < 0.5)");
    check!(max_still < 1e-3, "identical pair max |flow| {max_still:.2e} (need < 1e-3)");
    check!(slowest < Duration::from_secs(5), "slowest pair {slowest:?} (need < 5 s)");
    Ok(format!(
        "worst mean EPE {worst_epe:.4} px over {} shifts, identical max |flow| {max_still:.1e}, slowest pair {slowest:.2?}",
        shifts.len()
    ))
}

// ---------------------------------------------------------------- kinematics

fn random_flow(rng: &mut impl Rng, w: usize, h: usize) -> FlowField {
    let u = (0..w * h).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let v = (0..w * h).map(|_| rng.gen_range(-3.0..3.0)).collect();
    FlowField::new(w, h, u, v).unwrap()
}

fn stencil(f: &dyn Fn(usize) -> f64, i: usize, n: usize) -> f64 {
    if i == 0 {
        f(1) - f(0)
    } else if i == n - 1 {
        f(n - 1) - f(n - 2)
    } else {
        (f(i + 1) - f(i - 1)) / 2.0
    }
}

/// Frobenius norm of the symmetric part of the finite-difference Jacobian.
fn tensor_oracle(flow: &FlowField) -> Vec<f64> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let comp = |c: usize, xx: usize, yy: usize| if c == 0 { flow.at(xx, yy).0 } else { flow.at(xx, yy).1 };
            let mut jac = [[0.0; 2]; 2];
            for (c, row) in jac.iter_mut().enumerate() {
                row[0] = stencil(&|k| comp(c, k, y), x, w);
                row[1] = stencil(&|k| comp(c, x, k), y, h);
            }
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += (0.5 * (jac[a][b] + jac[b][a])).powi(2);
                }
            }
            out.push(s.sqrt());
        }
    }
    out
}

fn kinematics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0f64;
    let mut worst_rel = 0.0f64;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(2..32), rng.gen_range(2..32));
        let flow = random_flow(&mut rng, w, h);
        let eps = strain_magnitude(&flow).map_err(|e| e.to_string())?;
        for (a, b) in eps.values().iter().zip(tensor_oracle(&flow)) {
            worst = worst.max((a - b).abs());
        }
        let s = rng.gen_range(0.1..10.0);
        let scaled = FlowField::new(w, h, flow.u().iter().map(|u| u * s).collect(), flow.v().iter().map(|v| v * s).collect()).unwrap();
        let (r0, _) = polar_decompose(&flow).unwrap();
        let (r1, _) = polar_decompose(&scaled).unwrap();
        let e1 = strain_magnitude(&scaled).unwrap();
        for (a, b) in r0.values().iter().zip(r1.values()).chain(eps.values().iter().zip(e1.values())) {
            if *b != 0.0 {
                worst_rel = worst_rel.max((a * s - b).abs() / b.abs());
            }
        }
    }
    let constant = FlowField::from_fn(17, 11, |_, _| (1.25, -0.5)).unwrap();
    let zero = strain_magnitude(&constant).unwrap().values().iter().all(|&e| e == 0.0);
    check!(worst <= 1e-10, "strain vs tensor oracle max error {worst:.2e} (need <= 1e-10)");
    check!(zero, "constant flow gave nonzero strain");
    check!(worst_rel <= 1e-9, "scaling max relative error {worst_rel:.2e} (need <= 1e-9)");
    Ok(format!("oracle max error {worst:.1e}, constant flow strain 0, scaling rel error {worst_rel:.1e}"))
}

// ---------------------------------------------------------------- Bi-WOOF

fn biwoof_oracle(theta: &ScalarField, rho: &ScalarField, eps: &ScalarField, cfg: &BiwoofConfig) -> Vec<f64> {
    let (w, h) = theta.dims();
    let (n, c) = (cfg.blocks, cfg.bins);
    let pick = |m: WeightMode, r: f64, e: f64| match m {
        WeightMode::None => 1.0,
        WeightMode::Flow => r,
        WeightMode::Strain => e,
    };
    let mut hist = vec![0.0; n * n * c];
    let mut mass = vec![0.0; n * n];
    let mut count = vec![0.0; n * n];
    for y in 0..h {
        for x in 0..w {
            let b = (y / (h / n)).min(n - 1) * n + (x / (w / n)).min(n - 1);
            let t = theta.at(x, y);
            let sector = (0..c).find(|&k| t < -PI + (k + 1) as f64 * 2.0 * PI / c as f64).unwrap_or(c - 1);
            hist[b * c + sector] += pick(cfg.local_weight, rho.at(x, y), eps.at(x, y));
            mass[b] += pick(cfg.global_weight, rho.at(x, y), eps.at(x, y));
            count[b] += 1.0;
        }
    }
    for (i, v) in hist.iter_mut().enumerate() {
        *v *= mass[i / c] / count[i / c];
    }
    hist
}

fn biwoof_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(8..48), rng.gen_range(8..48));
        let field = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            ScalarField::new(w, h, (0..w * h).map(|_| rng.gen_range(lo..=hi)).collect()).unwrap()
        };
        let theta = field(&mut rng, -PI, PI);
        let rho = field(&mut rng, 0.0, 4.0);
        let eps = field(&mut rng, 0.0, 1.0);
        let n = rng.gen_range(1..=w.min(h).min(8));
        let c = rng.gen_range(1..=10);
        for local in WeightMode::ALL {
            for global in WeightMode::ALL {
                let cfg = BiwoofConfig::new(n, c, local, global).unwrap();
                let got = biwoof(&theta, &rho, &eps, &cfg).map_err(|e| e.to_string())?;
                check!(got.len() == n * n * c, "length {} != N^2 C = {}", got.len(), n * n * c);
                for (a, b) in got.values().iter().zip(biwoof_oracle(&theta, &rho, &eps, &cfg)) {
                    worst = worst.max((a - b).abs() / b.abs().max(1.0));
                }
                if (local, global) == (WeightMode::None, WeightMode::None) {
                    let total: f64 = got.values().iter().sum();
                    check!(total == (w * h) as f64, "(none,none) mass {total} != {}", w * h);
                }
                if (local, global) == (WeightMode::Flow, WeightMode::None) {
                    let grid = block_partition(w, h, n).unwrap();
                    for (b, (x0, x1, y0, y1)) in grid.all_bounds().into_iter().enumerate() {
                        let want: f64 = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y))).map(|(x, y)| rho.at(x, y)).sum();
                        let have: f64 = got.values()[b * c..(b + 1) * c].iter().sum();
                        check!((want - have).abs() <= 1e-9 * want.max(1.0), "(flow,none) block {b}: {have} vs {want}");
                    }
                }
            }
        }
    }
    check!(worst <= 1e-9, "brute-force accumulator mismatch {worst:.2e} (need <= 1e-9)");

    // rotation by one sector, orientations placed at sector centres
    let (w, h, n, c) = (24, 24, 3, 8);
    let centre = |k: usize| -PI + (k as f64 + 0.5) * 2.0 * PI / c as f64;
    let ks: Vec<usize> = (0..w * h).map(|_| rng.gen_range(0..c)).collect();
    let rho = ScalarField::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
    let eps = ScalarField::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let t0 = ScalarField::new(w, h, ks.iter().map(|&k| centre(k)).collect()).unwrap();
    let t1 = ScalarField::new(w, h, ks.iter().map(|&k| centre((k + 1) % c)).collect()).unwrap();
    let cfg = BiwoofConfig::default();
    let cfg = BiwoofConfig { blocks: n, bins: c, ..cfg };
    let (a, b) = (biwoof(&t0, &rho, &eps, &cfg).unwrap(), biwoof(&t1, &rho, &eps, &cfg).unwrap());
    for blk in 0..n * n {
        for k in 0..c {
            check!(
                b.values()[blk * c + (k + 1) % c] == a.values()[blk * c + k],
                "rotation did not shift bins cyclically (block {blk}, bin {k})"
            );
        }
    }
    Ok(format!("9 weight pairs x 100 fields, max rel error {worst:.1e}; mass, block sums, cyclic shift and length hold"))
}

// ---------------------------------------------------------------- spotting

fn halving_reference(s: &[f64], peaks: &[usize], lo: usize, hi: usize) -> usize {
    let inside: Vec<usize> = peaks.iter().copied().filter(|&p| (lo..hi).contains(&p)).collect();
    if inside.len() <= 1 || hi - lo == 1 {
        return inside.first().copied().unwrap_or_else(|| {
            (lo..hi).fold(lo, |best, j| if s[j] > s[best] { j } else { best })
        });
    }
    let mid = lo + (hi - lo + 1) / 2;
    let sum = |a: usize, b: usize| inside.iter().filter(|&&p| p >= a && p < b).map(|&p| s[p]).sum::<f64>();
    let has = |a: usize, b: usize| inside.iter().any(|&p| p >= a && p < b);
    let left = match (has(lo, mid), has(mid, hi)) {
        (true, false) => true,
        (false, true) => false,
        _ => sum(lo, mid) >= sum(mid, hi),
    };
    if left {
        halving_reference(s, peaks, lo, mid)
    } else {
        halving_reference(s, peaks, mid, hi)
    }
}

fn spotting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for i in 0..1000 {
        let len = rng.gen_range(1..80);
        let s: Vec<f64> = (0..len).map(|_| rng.gen_range(0..10) as f64 / 10.0).collect();
        let curve = DifferenceCurve::new(s.clone()).unwrap();
        let peaks = detect_peaks(&curve);
        let (got, want) = (divide_and_conquer(&curve, &peaks), halving_reference(&s, &peaks, 0, len));
        check!(got == want, "curve {i}: got {got}, reference {want}");
    }

    let cfg = SyntheticConfig::default();
    let grid = block_partition(cfg.width, cfg.height, 5).unwrap();
    let mut distances = Vec::new();
    for v in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + v);
        let texture = Texture::random(cfg.width, cfg.height, rng.gen());
        let class = MotionClass::ALL[(v % 3) as usize];
        let video = generate_video(&cfg, &texture, class, "s", &format!("p{v}"), &mut rng).map_err(|e| e.to_string())?;
        let spot = spot_apex(&video, &grid, &LbpParams::default()).map_err(|e| e.to_string())?;
        distances.push(spot.apex.abs_diff(video.apex_idx.unwrap()));
    }
    let worst = *distances.iter().max().unwrap();
    let mad = distances.iter().sum::<usize>() as f64 / distances.len() as f64;
    check!(worst <= 2, "planted apex missed by {worst} frames (need <= 2); distances {distances:?}");
    check!(mad <= 1.0, "mean absolute distance {mad:.3} (need <= 1)");
    Ok(format!("1000 curves match the recursive reference; 20 planted videos: max distance {worst}, mean {mad:.3}"))
}

// ---------------------------------------------------------------- metrics

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 1000 {
        let m = rng.gen_range(2..10);
        let rows: Vec<Vec<u64>> = (0..m).map(|_| (0..m).map(|_| rng.gen_range(0..30)).collect()).collect();
        let total: u64 = rows.iter().flatten().sum();
        if total == 0 {
            continue;
        }
        let diag: u64 = (0..m).map(|i| rows[i][i]).sum();
        let (_, _, f) = f_measure(&ConfusionMatrix::from_rows(&rows).unwrap()).map_err(|e| e.to_string())?;
        worst = worst.max((f - diag as f64 / total as f64).abs());
        checked += 1;
    }
    let hand = f_measure(&ConfusionMatrix::from_rows(&[vec![3, 1], vec![2, 4]]).unwrap()).unwrap();
    check!(worst <= 1e-12, "|F - accuracy| up to {worst:.2e} (need <= 1e-12)");
    check!(hand == (0.7, 0.7, 0.7), "[[3,1],[2,4]] gave {hand:?}, need exactly (0.7, 0.7, 0.7)");
    Ok(format!("F = accuracy on 1000 matrices (max gap {worst:.1e}); [[3,1],[2,4]] -> P=R=F=0.7"))
}

// ---------------------------------------------------------------- end to end

fn synthetic_dataset() -> Dataset {
    let samples = generate_dataset(&SyntheticConfig::default()).unwrap();
    Dataset::new(samples, CLASS_NAMES.iter().map(|s| s.to_string()).collect()).unwrap()
}

fn end_to_end() -> Outcome {
    let dataset = synthetic_dataset();
    let cfg = PipelineConfig::default();
    check!(
        cfg.biwoof == BiwoofConfig::new(5, 8, WeightMode::Flow, WeightMode::Strain).unwrap(),
        "default config is not N=5, C=8, (flow, strain)"
    );
    let t = Instant::now();
    let apex = run_protocol(&dataset, &cfg, 1).map_err(|e| e.to_string())?;
    let random_cfg = PipelineConfig {
        apex: ApexSource::Random { seed: 0 },
        random_repeats: 10,
        ..cfg
    };
    let random = run_protocol(&dataset, &random_cfg, 1).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let gap = apex.f_measure - random.f_measure;
    check!(apex.f_measure >= 0.9, "apex/onset F {:.4} (need >= 0.9)", apex.f_measure);
    check!(gap >= 0.1, "gap over random-frame control {gap:.4} (need >= 0.1)");
    check!(elapsed < Duration::from_secs(120), "took {elapsed:?} single-threaded (need < 2 min)");
    Ok(format!(
        "{} videos LOSO: apex F {:.4}, random-frame F {:.4} over 10 draws, gap {gap:.4}, {elapsed:.2?} single-threaded",
        dataset.len(),
        apex.f_measure,
        random.f_measure
    ))
}

fn timing() -> Outcome {
    let dataset = synthetic_dataset();
    let cfg = PipelineConfig::default();
    let t = Instant::now();
    for v in &dataset.samples {
        video_features(v, &cfg, 0).map_err(|e| e.to_string())?;
    }
    let pair = t.elapsed();
    let t = Instant::now();
    for v in &dataset.samples {
        biwoof_whole_sequence(v, &cfg).map_err(|e| e.to_string())?;
    }
    let whole = t.elapsed();
    let ratio = whole.as_secs_f64() / pair.as_secs_f64();
    check!(ratio >= 10.0, "whole-sequence / apex-pair time ratio {ratio:.1} (need >= 10)");
    Ok(format!("apex pair {pair:.2?}, all frames {whole:.2?}, speed-up {ratio:.1}x"))
}

// ---------------------------------------------------------------- determinism

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_apexflow"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("syn");
    run_cli(&["synth", "--out", root.to_str().unwrap(), "--subjects", "6"])?;
    let manifest = root.join("manifest.csv");
    let m = manifest.to_str().unwrap();
    let mut compared = 0;
    for apex in ["groundtruth", "random:3"] {
        let report = |jobs: &str, name: &str| -> Result<Vec<u8>, String> {
            let path = dir.path().join(name);
            run_cli(&["eval", "--manifest", m, "--apex", apex, "--repeats", "3", "--jobs", jobs, "--out", path.to_str().unwrap()])?;
            std::fs::read(Path::new(&path)).map_err(|e| e.to_string())
        };
        let a = report("1", "a.json")?;
        let b = report("4", "b.json")?;
        check!(a == b, "--apex {apex}: JSON differs between --jobs 1 and --jobs 4");
        compared += a.len();
    }
    Ok(format!("eval JSON byte-identical for --jobs 1 and 4 (groundtruth and random:3, {compared} bytes)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("flow accuracy", flow_accuracy),
        ("kinematics oracles", kinematics_oracles),
        ("bi-woof oracles", biwoof_oracles),
        ("spotting", spotting),
        ("metrics", metrics),
        ("end-to-end synthetic recognition", end_to_end),
        ("apex-pair vs whole-sequence cost", timing),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
