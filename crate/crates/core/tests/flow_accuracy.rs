use apexflow::flow::{estimate_tvl1, estimate_tvl1_traced, TvL1Params};
use apexflow::synthetic::shifted_pair;
use apexflow::FlowField;

const MARGIN: usize = 6;

/// Mean endpoint error and mean (u, v) over pixels at least `MARGIN` from the border.
fn interior_stats(flow: &FlowField, dx: f64, dy: f64) -> (f64, f64, f64) {
    let (w, h) = flow.dims();
    let (mut epe, mut mu, mut mv, mut n) = (0.0, 0.0, 0.0, 0.0);
    for y in MARGIN..h - MARGIN {
        for x in MARGIN..w - MARGIN {
            let (u, v) = flow.at(x, y);
            epe += ((u - dx).powi(2) + (v - dy).powi(2)).sqrt();
            mu += u;
            mv += v;
            n += 1.0;
        }
    }
    (epe / n, mu / n, mv / n)
}

#[test]
fn one_pixel_shift_is_recovered() {
    for seed in 0..3 {
        let (a, b) = shifted_pair(64, 1, 0, 1.0, seed).unwrap();
        let flow = estimate_tvl1(&a, &b, &TvL1Params::default()).unwrap();
        let (epe, mu, mv) = interior_stats(&flow, 1.0, 0.0);
        println!("seed {seed}: epe {epe:.4} mean u {mu:.4} mean v {mv:.4}");
        assert!(epe < 0.2, "epe {epe}");
        assert!((mu - 1.0).abs() < 0.1 && mv.abs() < 0.1);
    }
}

#[test]
fn diagonal_three_pixel_shift_is_recovered() {
    for seed in 0..3 {
        let (a, b) = shifted_pair(64, 3, 3, 1.0, 10 + seed).unwrap();
        let flow = estimate_tvl1(&a, &b, &TvL1Params::default()).unwrap();
        let (epe, mu, mv) = interior_stats(&flow, 3.0, 3.0);
        println!("seed {seed}: epe {epe:.4} mean u {mu:.4} mean v {mv:.4}");
        assert!(epe < 0.5, "epe {epe}");
    }
}

#[test]
fn reversed_pair_gives_negated_flow() {
    let (a, b) = shifted_pair(64, 2, -1, 1.0, 5).unwrap();
    let p = TvL1Params::default();
    let (_, fu, fv) = interior_stats(&estimate_tvl1(&a, &b, &p).unwrap(), 0.0, 0.0);
    let (_, bu, bv) = interior_stats(&estimate_tvl1(&b, &a, &p).unwrap(), 0.0, 0.0);
    assert!((fu + bu).abs() < 0.2 && (fv + bv).abs() < 0.2, "({fu},{fv}) vs ({bu},{bv})");
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (a, b) = shifted_pair(48, 1, 2, 1.0, 9).unwrap();
    let p = TvL1Params::default();
    let first = estimate_tvl1(&a, &b, &p).unwrap();
    let runs: Vec<FlowField> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| estimate_tvl1(&a, &b, &p).unwrap())).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for run in runs {
        assert_eq!(run, first);
    }
}

#[test]
fn final_warp_lowers_linearized_energy() {
    for seed in 0..4 {
        let (a, b) = shifted_pair(64, 1, 1, 1.0, 21 + seed).unwrap();
        let (_, trace) = estimate_tvl1_traced(&a, &b, &TvL1Params::default()).unwrap();
        assert!(trace.len() >= 2);
        let first = trace[0];
        let last = *trace.last().unwrap();
        assert!(last <= first * (1.0 + 1e-6), "energy rose over the final warp: {trace:?}");
    }
}
