use fracmv::fisher::{
    fisher_distance, fisher_distance_with, gaussian_fisher_oracle, gaussian_tv_equal_variance, silverman_bandwidth,
    tv_distance_with_se, FisherOptions, SampleSet,
};
use fracmv::rng::stream_rng;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn normal_sample(mu: f64, var: f64, n: usize, seed: u64) -> SampleSet {
    let dist = Normal::new(mu, var.sqrt()).unwrap();
    let mut rng = stream_rng(seed, 0);
    SampleSet::new((0..n).map(|_| dist.sample(&mut rng)).collect(), "normal").unwrap()
}

#[test]
fn halving_or_doubling_the_bandwidth_moves_the_estimate_little() {
    for (mu, var) in [(0.3, 1.0), (0.0, 1.4), (0.5, 0.7)] {
        let s = normal_sample(mu, var, 50_000, 3);
        let h = silverman_bandwidth(&s.values);
        let at = |scale: f64| {
            let opts = FisherOptions { bandwidth: Some(h * scale), ..FisherOptions::default() };
            fisher_distance_with(&s, 0.0, 1.0, &opts).unwrap().value
        };
        let base = at(1.0);
        let denom = base.max(0.05);
        for scale in [0.5, 2.0] {
            let moved = (at(scale) - base).abs() / denom;
            assert!(moved < 0.25, "N({mu}, {var}) scale {scale}: {} vs {base}", at(scale));
        }
    }
}

#[test]
fn estimates_track_the_closed_form_on_gaussian_pairs() {
    for (mu, var) in [(0.5, 1.0), (0.0, 0.6), (-0.4, 1.5)] {
        let s = normal_sample(mu, var, 100_000, 8);
        let est = fisher_distance(&s, 0.0, 1.0).unwrap();
        let want = gaussian_fisher_oracle(mu, var, 0.0, 1.0).unwrap();
        assert!((est.value - want).abs() < 0.1 * want.max(0.05), "N({mu}, {var}): {} vs {want}", est.value);
    }
}

#[test]
fn estimated_fisher_dominates_estimated_tv() {
    // sqrt(I) ≥ TV needs the target standard deviation to be at most 2
    for (mu1, var1, mu2, var2) in [(0.3, 1.0, 0.0, 1.0), (0.0, 0.5, 0.0, 0.25), (1.0, 3.0, 0.5, 4.0), (0.05, 1.0, 0.0, 1.0)] {
        let a = normal_sample(mu1, var1, 40_000, 11);
        let b = normal_sample(mu2, var2, 40_000, 12);
        let fi = fisher_distance(&a, mu2, var2).unwrap();
        let tv = tv_distance_with_se(&a, &b).unwrap();
        // |√a − √b| ≤ √|a − b| keeps the root's error finite near zero
        let se = (fi.stderr + tv.stderr.powi(2)).sqrt();
        let margin = fi.value.sqrt() - (tv.value - 2.0 * se);
        assert!(margin >= 0.0, "N({mu1}, {var1}) vs N({mu2}, {var2}): sqrt I {} TV {}", fi.value.sqrt(), tv.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimate_is_never_negative(
        seed in any::<u64>(),
        n in 100usize..600,
        skew in 0.0f64..2.0,
        mu in -2.0f64..2.0,
        var in 0.1f64..5.0,
    ) {
        let mut rng = stream_rng(seed, 1);
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + skew * rng.random::<f64>().powi(3)
            })
            .collect();
        let s = SampleSet::new(values, "mixed").unwrap();
        let est = fisher_distance(&s, mu, var).unwrap();
        prop_assert!(est.value >= 0.0 && est.value.is_finite());
        prop_assert!((0.0..=1.0).contains(&est.clipped_fraction));
    }

    #[test]
    fn closed_form_fisher_bounds_tv_for_unit_scale_targets(
        mu1 in -3.0f64..3.0,
        mu2 in -3.0f64..3.0,
        var in 0.05f64..4.0,
    ) {
        let fi = gaussian_fisher_oracle(mu1, var, mu2, var).unwrap();
        let tv = gaussian_tv_equal_variance(mu1, mu2, var);
        prop_assert!(fi.sqrt() >= tv - 1e-12, "sqrt I {} TV {tv}", fi.sqrt());
    }
}
