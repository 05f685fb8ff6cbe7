use fracmv::harness::{fit_slope, run_rate_experiment, ExperimentConfig, Status};
use fracmv::rng::stream_rng;
use rand_distr::{Distribution, Normal};

fn config(name: &str) -> ExperimentConfig {
    let path = format!("{}/../../configs/{name}.json", env!("CARGO_MANIFEST_DIR"));
    ExperimentConfig::load(path.as_ref()).unwrap()
}

#[test]
fn least_squares_interval_covers_the_true_slope() {
    let xs: Vec<f64> = (1..=6).map(|k| -(k as f64) * std::f64::consts::LN_2).collect();
    let noise = Normal::new(0.0, 0.2).unwrap();
    let trials = 2000;
    let mut rng = stream_rng(17, 0);
    let covered = (0..trials)
        .filter(|_| {
            let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.3 + 1.4 * x + noise.sample(&mut rng))).collect();
            let fit = fit_slope(&pts).unwrap();
            (fit.slope - 1.4).abs() <= 3.0 * fit.stderr
        })
        .count();
    // t with 4 degrees of freedom puts about 96 % inside 3 SE
    let rate = covered as f64 / trials as f64;
    assert!((0.93..=0.99).contains(&rate), "coverage {rate}");
}

#[test]
fn pure_noise_run_is_flagged_degenerate() {
    let mut cfg = config("pure_noise");
    cfg.n_samples = 20_000;
    let report = run_rate_experiment(&cfg, 1).unwrap();
    let summary = report.summary(0.7).unwrap();
    assert_eq!(summary.degenerate.as_deref(), Some("distance at estimator floor"));
    assert_eq!(report.check("slope_fisher", 0.7).unwrap().status, Status::Skipped);
    for c in &report.cells {
        assert!(c.xu_dist2.value < 1e-20, "{}", c.xu_dist2.value);
        assert!(c.fisher.value < 0.01, "eps={}: {}", c.epsilon, c.fisher.value);
    }
}

#[test]
fn smoke_run_writes_all_outputs() {
    let cfg = config("smoke");
    let report = run_rate_experiment(&cfg, 0).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();

    let csv = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("quantity,H,epsilon,value,stderr"));
    assert_eq!(lines.count(), cfg.hurst.len() * cfg.epsilons.len() * 7);

    let fits: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fits.json")).unwrap()).unwrap();
    let fits = fits.as_array().unwrap();
    assert!(fits.len() >= 2 * 4);
    for f in fits {
        assert!(f["slope"].as_f64().unwrap().is_finite());
        assert!(f["expected_slope"].as_f64().is_some());
    }
    let full: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(full["cells"].as_array().unwrap().len(), 8);
    assert_eq!(full["passed"].as_bool(), Some(report.passed));
}

#[test]
fn slopes_are_stable_when_particles_double() {
    let mut cfg = config("smoke");
    cfg.hurst = vec![0.7];
    cfg.epsilons = (1..=6).map(|k| 2f64.powi(-k)).collect();
    cfg.n_steps = 128;
    cfg.n_samples = 60_000;
    cfg.control = false;
    let mut small = cfg.clone();
    small.n_particles = 500;
    let mut large = cfg;
    large.n_particles = 1000;
    let a = run_rate_experiment(&small, 0).unwrap();
    let b = run_rate_experiment(&large, 0).unwrap();
    for q in ["sup_dist2", "var_gap", "mean_gap", "xu_dist2"] {
        let (fa, fb) = (a.fit(0.7, q).unwrap(), b.fit(0.7, q).unwrap());
        let se = fa.stderr.max(fb.stderr);
        assert!((fa.slope - fb.slope).abs() < se, "{q}: {} ± {} vs {} ± {}", fa.slope, fa.stderr, fb.slope, fb.stderr);
    }
}
