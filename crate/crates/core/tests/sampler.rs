use specinfer::{run_dram, DramConfig};
use statrs::distribution::{ContinuousCDF, Normal};

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

#[test]
fn conjugate_normal_posterior_passes_ks() {
    // Prior N(0, 2^2), one observation y = 1.3 with noise sd 0.5.
    let (m0, s0, y, s) = (0.0, 2.0, 1.3, 0.5);
    let var = 1.0 / (1.0 / (s0 * s0) + 1.0 / (s * s));
    let mean = var * (m0 / (s0 * s0) + y / (s * s));
    let target = (1, |x: &[f64]| -0.5 * ((x[0] - m0) / s0).powi(2) - 0.5 * ((y - x[0]) / s).powi(2));
    let cfg = DramConfig {
        n_steps: 220_000,
        burn_in: 20_000,
        seed: 17,
        ..DramConfig::default()
    };
    let chain = run_dram(&target, &[3.0], names(1), &cfg).unwrap();
    let mut xs = chain.column(0);
    assert_eq!(xs.len(), 200_000);
    xs.sort_by(f64::total_cmp);
    let exact = Normal::new(mean, var.sqrt()).unwrap();
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = exact.cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS distance {ks}");
}

#[test]
fn correlated_gaussian_moments() {
    let rho: f64 = 0.8;
    let (sx, sy) = (1.0, 0.2);
    let det = 1.0 - rho * rho;
    let target = (2, |v: &[f64]| {
        let (a, b) = (v[0] / sx, (v[1] - 1.0) / sy);
        -0.5 * (a * a - 2.0 * rho * a * b + b * b) / det
    });
    let cfg = DramConfig {
        n_steps: 300_000,
        burn_in: 20_000,
        seed: 5,
        ..DramConfig::default()
    };
    let chain = run_dram(&target, &[0.5, 0.5], names(2), &cfg).unwrap();
    let x = chain.column(0);
    let y = chain.column(1);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cxx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
    let cyy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
    let cxy = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    assert!(mx.abs() < 0.05 && (my - 1.0).abs() < 0.01, "mean ({mx}, {my})");
    assert!((cxx - sx * sx).abs() < 0.05 * sx * sx, "var x {cxx}");
    assert!((cyy - sy * sy).abs() < 0.05 * sy * sy, "var y {cyy}");
    assert!((cxy - rho * sx * sy).abs() < 0.05 * rho * sx * sy, "cov {cxy}");
}

#[test]
fn adapted_first_stage_acceptance_is_moderate() {
    // Badly scaled 18-dimensional Gaussian; adaptation has to find the scales.
    let d = 18;
    let scales: Vec<f64> = (0..d).map(|i| 0.01 * 1.4f64.powi(i as i32)).collect();
    let target = (d, |x: &[f64]| -0.5 * x.iter().zip(&scales).map(|(v, s)| (v / s).powi(2)).sum::<f64>());
    let cfg = DramConfig {
        seed: 9,
        ..DramConfig::desk()
    };
    let chain = run_dram(&target, &vec![0.0; d], names(d), &cfg).unwrap();
    let a = chain.first_stage_acceptance();
    assert!((0.1..=0.5).contains(&a), "first-stage acceptance {a}");
    assert!(chain.acceptance_rate() >= a);
    let last = &chain.adaptations.last().unwrap().proposal_std;
    for (p, s) in last.iter().zip(&scales) {
        // Scaled proposals track the target: 2.38 / sqrt(d) times the marginal std.
        let ratio = p / (s * 2.38 / (d as f64).sqrt());
        assert!((0.7..1.4).contains(&ratio), "proposal ratio {ratio}");
    }
}

#[test]
fn delayed_rejection_rescues_an_oversized_proposal() {
    let target = (1, |x: &[f64]| -0.5 * (x[0] / 0.01).powi(2));
    let base = DramConfig {
        n_steps: 5000,
        burn_in: 0,
        adapt: false,
        initial_proposal_std: 1.0,
        dr_scale: 0.01,
        seed: 2,
        ..DramConfig::default()
    };
    let plain = run_dram(&target, &[0.0], names(1), &DramConfig { delayed_rejection: false, ..base }).unwrap();
    let dr = run_dram(&target, &[0.0], names(1), &base).unwrap();
    assert_eq!(plain.accepted_second, 0);
    assert!(dr.accepted_second > 10 * plain.accepted_first.max(1));
}
