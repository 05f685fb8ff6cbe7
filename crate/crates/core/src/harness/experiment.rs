use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::fit::{fit_named, RateFit, MIN_FIT_POINTS};
use crate::error::{Error, Result};
use crate::fbm::{FbmGenerator, HurstIndex, TimeGrid};
use crate::fisher::{fisher_distance_with, tv_distance_with_se, FisherEstimate, SampleSet, TvEstimate};
use crate::mckean::{
    fluctuation, limit_law_with, simulate_u, simulate_z_with_noise, solve_ode_with, solve_particles_with_noise,
    CoefficientModel, DrivingNoise, OdePath, OdeScheme, PureNoise,
};
use crate::rng::derive_seed;
use crate::stats::{mean, sample_variance, standard_error};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measurement {
    pub value: f64,
    pub stderr: f64,
}

impl Measurement {
    /// Absolute mean of per-replica values, with the replica standard error.
    fn from_replicas(values: &[f64], absolute: bool) -> Self {
        let m = mean(values);
        let stderr = if values.len() > 1 { standard_error(values) } else { f64::NAN };
        Self { value: if absolute { m.abs() } else { m }, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlCell {
    pub fisher: FisherEstimate,
}

/// Every estimate at one `(H, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub hurst: f64,
    pub epsilon: f64,
    pub fisher: FisherEstimate,
    pub tv: TvEstimate,
    pub var_gap: Measurement,
    pub mean_gap: Measurement,
    pub sup_dist2: Measurement,
    pub xu_dist2: Measurement,
    pub control: Option<ControlCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub hurst: f64,
    #[serde(flatten)]
    pub fit: RateFit,
    pub expected_slope: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub hurst: Option<f64>,
    pub status: Status,
    pub measured: Option<f64>,
    pub expected: String,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub hurst: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstSummary {
    pub hurst: f64,
    pub limit_variance: f64,
    pub control_variance: Option<f64>,
    /// Largest control Fisher estimate plus the configured number of standard errors.
    pub fisher_floor: Option<f64>,
    /// Noise levels whose Fisher estimate clears the floor multiple.
    pub fisher_subgrid: Vec<f64>,
    pub degenerate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub model: String,
    pub config: ExperimentConfig,
    pub summaries: Vec<HurstSummary>,
    pub cells: Vec<Cell>,
    pub fits: Vec<FitRecord>,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
    pub passed: bool,
}

impl RateReport {
    pub fn fit(&self, hurst: f64, quantity: &str) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.hurst == hurst && f.fit.quantity == quantity).map(|f| &f.fit)
    }

    pub fn check(&self, name: &str, hurst: f64) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name && c.hurst == Some(hurst))
    }

    pub fn summary(&self, hurst: f64) -> Option<&HurstSummary> {
        self.summaries.iter().find(|s| s.hurst == hurst)
    }

    /// `quantity,H,epsilon,value,stderr`, ordered by `H`, quantity, then `ε`.
    pub fn rates_csv(&self) -> String {
        let mut out = String::from("quantity,H,epsilon,value,stderr\n");
        let mut row = |q: &str, c: &Cell, value: f64, stderr: f64| {
            let _ = writeln!(out, "{q},{},{},{value},{stderr}", c.hurst, c.epsilon);
        };
        for &h in &self.config.hurst {
            let cells: Vec<&Cell> = self.cells.iter().filter(|c| c.hurst == h).collect();
            for c in &cells {
                row("fisher", c, c.fisher.value, c.fisher.stderr);
            }
            for c in &cells {
                row("var_gap", c, c.var_gap.value, c.var_gap.stderr);
            }
            for c in &cells {
                row("mean_gap", c, c.mean_gap.value, c.mean_gap.stderr);
            }
            for c in &cells {
                row("sup_dist2", c, c.sup_dist2.value, c.sup_dist2.stderr);
            }
            for c in &cells {
                row("xu_dist2", c, c.xu_dist2.value, c.xu_dist2.stderr);
            }
            for c in &cells {
                row("tv", c, c.tv.value, c.tv.stderr);
            }
            for c in &cells {
                if let Some(ctl) = &c.control {
                    row("fisher_control", c, ctl.fisher.value, ctl.fisher.stderr);
                }
            }
        }
        out
    }

    pub fn fits_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.fits)?)
    }

    pub fn report_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `rates.csv`, `fits.json` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("rates.csv"), self.rates_csv())?;
        std::fs::write(dir.join("fits.json"), self.fits_json()? + "\n")?;
        std::fs::write(dir.join("report.json"), self.report_json()? + "\n")?;
        Ok(())
    }
}

/// Per-replica output: one independent particle system at every noise level.
struct Replica {
    z: Vec<f64>,
    x_tilde: Vec<Vec<f64>>,
    control: Vec<Vec<f64>>,
    mean_gap: Vec<f64>,
    var_gap: Vec<f64>,
    sup_dist2: Vec<f64>,
    xu_dist2: Vec<f64>,
}

struct Setup<'a> {
    config: &'a ExperimentConfig,
    model: &'a dyn CoefficientModel,
    h: HurstIndex,
    grid: TimeGrid,
    generator: FbmGenerator,
    ode: OdePath,
    control_ode: Option<OdePath>,
}

impl Setup<'_> {
    fn replica(&self, r: usize) -> Result<Replica> {
        let c = self.config;
        let t = c.target();
        let seed = derive_seed(&[c.seed, self.h.value().to_bits(), r as u64]);
        let noise = DrivingNoise::generate(&self.generator, seed, c.n_particles);
        let z = simulate_z_with_noise(self.model, &self.ode, &noise, t)?;
        let var_z = sample_variance(&z);
        let k_max = self.grid.n_steps();
        let mut out = Replica {
            z,
            x_tilde: Vec::new(),
            control: Vec::new(),
            mean_gap: Vec::new(),
            var_gap: Vec::new(),
            sup_dist2: Vec::new(),
            xu_dist2: Vec::new(),
        };
        for &eps in &c.epsilons {
            let ens = solve_particles_with_noise(self.model, &noise, eps, self.h)?;
            let xt = fluctuation(&ens, &self.ode, t)?;
            let u = simulate_u(self.model, &self.ode, &ens, &noise, t)?;
            let mut sup = vec![0.0f64; c.n_particles];
            for k in 0..=k_max {
                let x = self.ode.values[k];
                for (s, v) in sup.iter_mut().zip(ens.step(k)) {
                    *s = s.max((v - x).powi(2));
                }
            }
            out.mean_gap.push(mean(&xt.iter().zip(&out.z).map(|(a, b)| a - b).collect::<Vec<_>>()));
            out.var_gap.push(sample_variance(&xt) - var_z);
            out.sup_dist2.push(mean(&sup));
            out.xu_dist2.push(mean(&xt.iter().zip(&u).map(|(a, b)| (a - b).powi(2)).collect::<Vec<_>>()));
            out.x_tilde.push(xt);
            if let Some(ode) = &self.control_ode {
                let ctl = solve_particles_with_noise(&PureNoise::default(), &noise, eps, self.h)?;
                out.control.push(fluctuation(&ctl, ode, t)?);
            }
        }
        Ok(out)
    }
}

fn pooled(replicas: &[Replica], pick: impl Fn(&Replica) -> &[f64]) -> Vec<f64> {
    replicas.iter().flat_map(|r| pick(r).iter().copied()).collect()
}

/// Runs the sweep over `H` and `ε`. Replicas run on a pool of `jobs` threads
/// (0 picks the rayon default); results do not depend on `jobs`.
///
/// Stage failures are recorded in the report rather than returned; `Err` is
/// reserved for configuration problems.
pub fn run_rate_experiment(config: &ExperimentConfig, jobs: usize) -> Result<RateReport> {
    config.validate()?;
    let model = config.model.build()?;
    let grid = config.grid()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut report = RateReport {
        model: model.id().to_string(),
        config: config.clone(),
        summaries: Vec::new(),
        cells: Vec::new(),
        fits: Vec::new(),
        checks: Vec::new(),
        failures: Vec::new(),
        passed: false,
    };
    for h in config.hurst_indices()? {
        if let Err(e) = pool.install(|| run_hurst(config, model.as_ref(), h, grid, &mut report)) {
            report.failures.push(Failure { stage: "simulation".into(), hurst: Some(h.value()), message: e.to_string() });
        }
    }
    report.passed = report.failures.is_empty() && report.checks.iter().all(|c| c.status != Status::Fail);
    Ok(report)
}

fn run_hurst(
    config: &ExperimentConfig,
    model: &dyn CoefficientModel,
    h: HurstIndex,
    grid: TimeGrid,
    report: &mut RateReport,
) -> Result<()> {
    let t = config.target();
    // X̃ is measured against the Euler solution so that the scheme's O(Δ)
    // bias does not get amplified by ε^{−H}.
    let ode = solve_ode_with(model, grid, OdeScheme::Euler)?;
    let law = limit_law_with(model, &ode, t, h, OdeScheme::Euler)?;
    let control_ode = if config.control { Some(solve_ode_with(&PureNoise::default(), grid, OdeScheme::Euler)?) } else { None };
    let control_variance = match &control_ode {
        Some(o) => Some(limit_law_with(&PureNoise::default(), o, t, h, OdeScheme::Euler)?.variance),
        None => None,
    };
    let setup = Setup { config, model, h, grid, generator: FbmGenerator::new(h, grid, config.fbm_method)?, ode, control_ode };
    for d in setup.generator.diagnostics() {
        log::warn!("H = {}: {d}", h.value());
    }
    let started = std::time::Instant::now();
    let replicas: Vec<Replica> = (0..config.replicas()).into_par_iter().map(|r| setup.replica(r)).collect::<Result<_>>()?;
    log::info!("H = {}: {} replicas simulated in {:.1?}", h.value(), replicas.len(), started.elapsed());

    let opts = &config.estimator.fisher;
    let z_all = SampleSet::new(pooled(&replicas, |r| &r.z), "z")?;
    let mut cells = Vec::with_capacity(config.epsilons.len());
    for (e, &eps) in config.epsilons.iter().enumerate() {
        let xt = SampleSet::new(pooled(&replicas, |r| &r.x_tilde[e]), format!("x_tilde eps={eps}"))?;
        let fisher = fisher_distance_with(&xt, 0.0, law.variance, opts)?;
        let tv = tv_distance_with_se(&xt, &z_all)?;
        let control = match control_variance {
            Some(v) => {
                let ctl = SampleSet::new(pooled(&replicas, |r| &r.control[e]), format!("control eps={eps}"))?;
                Some(ControlCell { fisher: fisher_distance_with(&ctl, 0.0, v, opts)? })
            }
            None => None,
        };
        let per = |pick: fn(&Replica) -> &Vec<f64>| -> Vec<f64> { replicas.iter().map(|r| pick(r)[e]).collect() };
        cells.push(Cell {
            hurst: h.value(),
            epsilon: eps,
            fisher,
            tv,
            var_gap: Measurement::from_replicas(&per(|r| &r.var_gap), true),
            mean_gap: Measurement::from_replicas(&per(|r| &r.mean_gap), true),
            sup_dist2: Measurement::from_replicas(&per(|r| &r.sup_dist2), false),
            xu_dist2: Measurement::from_replicas(&per(|r| &r.xu_dist2), false),
            control,
        });
    }

    let summary = assess(config, model, h, law.variance, control_variance, &cells, report);
    report.summaries.push(summary);
    report.cells.extend(cells);
    Ok(())
}

fn log_points(cells: &[Cell], value: impl Fn(&Cell) -> f64) -> Vec<(f64, f64)> {
    cells.iter().map(|c| (c.epsilon, value(c))).filter(|&(_, v)| v > 0.0).map(|(e, v)| (e.ln(), v.ln())).collect()
}

fn slope_check(name: &str, hurst: f64, fit: Option<&RateFit>, expected: f64, tol: f64, skip_note: Option<String>) -> Check {
    let expected_text = format!("[{:.3}, {:.3}]", expected - tol, expected + tol);
    match fit {
        Some(f) => Check {
            name: name.into(),
            hurst: Some(hurst),
            status: if (f.slope - expected).abs() <= tol { Status::Pass } else { Status::Fail },
            measured: Some(f.slope),
            expected: expected_text,
            note: Some(format!("stderr {:.3}, r² {:.3}, {} points", f.stderr, f.r_squared, f.points.len())),
        },
        None => Check {
            name: name.into(),
            hurst: Some(hurst),
            status: if skip_note.is_some() { Status::Skipped } else { Status::Fail },
            measured: None,
            expected: expected_text,
            note: skip_note.or(Some("no fit".into())),
        },
    }
}

/// Fits, floor and checks for one Hurst index.
fn assess(
    config: &ExperimentConfig,
    model: &dyn CoefficientModel,
    h: HurstIndex,
    limit_variance: f64,
    control_variance: Option<f64>,
    cells: &[Cell],
    report: &mut RateReport,
) -> HurstSummary {
    let hv = h.value();
    let est = &config.estimator;
    let tol = est.tolerances;
    let is_control_model = model.id() == "pure_noise";

    let fisher_floor = cells
        .iter()
        .filter_map(|c| c.control.as_ref())
        .map(|ctl| ctl.fisher.value + est.floor_stderrs * ctl.fisher.stderr)
        .reduce(f64::max);
    let threshold = fisher_floor.map(|f| est.floor_multiplier * f);
    let above: Vec<&Cell> = cells.iter().filter(|c| threshold.is_none_or(|th| c.fisher.value > th)).collect();
    let fisher_subgrid: Vec<f64> = above.iter().map(|c| c.epsilon).collect();
    let degenerate = (is_control_model || above.len() < MIN_FIT_POINTS).then(|| "distance at estimator floor".to_string());

    let mut fits: Vec<(RateFit, f64, f64)> = Vec::new();
    let mut fit_or_fail = |q: &str, pts: Vec<(f64, f64)>, expected: f64, tol: f64, report: &mut RateReport| {
        match fit_named(q, &pts) {
            Ok(f) => fits.push((f, expected, tol)),
            Err(e) => report.failures.push(Failure { stage: format!("fit {q}"), hurst: Some(hv), message: e.to_string() }),
        }
    };
    if !is_control_model {
        fit_or_fail("sup_dist2", log_points(cells, |c| c.sup_dist2.value), 2.0 * hv, tol.strong, report);
        fit_or_fail("var_gap", log_points(cells, |c| c.var_gap.value), hv, tol.moment, report);
        fit_or_fail("mean_gap", log_points(cells, |c| c.mean_gap.value), hv, tol.moment, report);
        fit_or_fail("xu_dist2", log_points(cells, |c| c.xu_dist2.value), 2.0 * hv, tol.linearisation, report);
        if degenerate.is_none() {
            let pts: Vec<(f64, f64)> = above.iter().map(|c| (c.epsilon.ln(), c.fisher.value.ln())).collect();
            fit_or_fail("fisher", pts, 2.0 * hv, tol.fisher, report);
        }
    }
    let find = |q: &str| fits.iter().find(|f| f.0.quantity == q).map(|f| &f.0);
    let skip = |why: &str| Some(why.to_string());
    let control_skip = if is_control_model { skip("rates are not defined for the control model") } else { None };

    let mut checks = vec![
        slope_check("slope_sup_dist2", hv, find("sup_dist2"), 2.0 * hv, tol.strong, control_skip.clone()),
        slope_check("slope_var_gap", hv, find("var_gap"), hv, tol.moment, control_skip.clone()),
        slope_check("slope_mean_gap", hv, find("mean_gap"), hv, tol.moment, control_skip.clone()),
        slope_check("slope_xu_dist2", hv, find("xu_dist2"), 2.0 * hv, tol.linearisation, control_skip.clone()),
        slope_check(
            "slope_fisher",
            hv,
            find("fisher"),
            2.0 * hv,
            tol.fisher,
            control_skip.clone().or_else(|| degenerate.clone().map(|d| format!("degenerate: {d}"))),
        ),
    ];
    let bound = 2.0 * hv + tol.fisher;
    checks.push(match find("fisher") {
        Some(f) => Check {
            name: "fisher_lower_bound_direction".into(),
            hurst: Some(hv),
            status: if f.slope <= bound { Status::Pass } else { Status::Fail },
            measured: Some(f.slope),
            expected: format!("<= {bound:.3}"),
            note: None,
        },
        None => Check {
            name: "fisher_lower_bound_direction".into(),
            hurst: Some(hv),
            status: Status::Skipped,
            measured: None,
            expected: format!("<= {bound:.3}"),
            note: Some("no Fisher fit".into()),
        },
    });

    // TV is measured against the pooled Z sample driven by the same noise
    let margins: Vec<(f64, String)> = cells
        .iter()
        .map(|c| (c.fisher.value.sqrt() - (c.tv.value - 2.0 * c.tv.stderr), format!("eps={}", c.epsilon)))
        .collect();
    let violations: Vec<&str> = margins.iter().filter(|m| m.0 < 0.0).map(|m| m.1.as_str()).collect();
    checks.push(Check {
        name: "fisher_tv_inequality".into(),
        hurst: Some(hv),
        status: if violations.is_empty() { Status::Pass } else { Status::Fail },
        measured: margins.iter().map(|m| m.0).reduce(f64::min),
        expected: "sqrt(fisher) - (tv - 2 se) >= 0 on every cell".into(),
        note: (!violations.is_empty()).then(|| format!("violated at {}", violations.join(", "))),
    });

    if !is_control_model {
        let series: [(&str, fn(&Cell) -> f64); 4] = [
            ("var_gap", |c| c.var_gap.value),
            ("mean_gap", |c| c.mean_gap.value),
            ("sup_dist2", |c| c.sup_dist2.value),
            ("xu_dist2", |c| c.xu_dist2.value),
        ];
        for (q, value) in series {
            let inversions = cells.windows(2).filter(|w| value(&w[1]) > value(&w[0])).count();
            checks.push(Check {
                name: format!("monotone_{q}"),
                hurst: Some(hv),
                status: if inversions <= 1 { Status::Pass } else { Status::Fail },
                measured: Some(inversions as f64),
                expected: "at most one inversion as epsilon decreases".into(),
                note: (inversions == 1).then(|| "one Monte Carlo inversion".into()),
            });
        }
    }

    let separation: Vec<&Cell> = cells.iter().filter(|c| c.control.as_ref().is_some_and(|ctl| ctl.fisher.value >= c.fisher.value)).collect();
    checks.push(Check {
        name: "control_separation".into(),
        hurst: Some(hv),
        status: if is_control_model || !config.control {
            Status::Skipped
        } else if separation.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        },
        measured: Some(separation.len() as f64),
        expected: "control Fisher estimate below the model's at every epsilon".into(),
        note: None,
    });

    let clipped = cells.iter().filter(|c| c.fisher.unreliable).count();
    checks.push(Check {
        name: "fisher_clipping".into(),
        hurst: Some(hv),
        status: if clipped == 0 { Status::Pass } else { Status::Fail },
        measured: cells.iter().map(|c| c.fisher.clipped_fraction).reduce(f64::max),
        expected: "clipped fraction <= 0.2".into(),
        note: None,
    });

    report.checks.extend(checks);
    report.fits.extend(fits.into_iter().map(|(fit, expected_slope, tolerance)| FitRecord { hurst: hv, fit, expected_slope, tolerance }));
    HurstSummary { hurst: hv, limit_variance, control_variance, fisher_floor, fisher_subgrid, degenerate }
}
