//! Monte Carlo experiments: mean/median interpolation tables, coverage of the
//! `(epsilon, delta)` guarantee, and the old-versus-new timing comparison.
//!
//! Every experiment produces a [`TrialReport`]. Trial `k` draws from stream
//! `k` of the configured seed, so results do not depend on how trials are
//! scheduled; interpolation and coverage trials run on the rayon pool, timing
//! trials run serially.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Family, SourceSpec, GENERATOR_ID};
use crate::error::{Error, Result};
use crate::planner::{improvement_factor, plan, PlanRule};
use crate::psi::{compensated_sum, median_of_sorted, validate_lambda, SampleSet};
use crate::solver::{bisect_data_range, default_tolerance, solve_bisection};
use crate::weights::WeightKind;

pub const SCHEMA_VERSION: u32 = 1;

/// Absolute bracket width for the timing workload's bisection.
pub const TIMING_TOLERANCE: f64 = 1e-12;

/// Normal quantile for the reported failure-rate interval (95%).
pub const FAILURE_INTERVAL_Z: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Interpolation,
    Coverage,
    Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub generator: String,
    pub source: SourceSpec,
    pub trials: u64,
    /// Fixed per-trial sample count (interpolation only).
    pub n_per_trial: Option<u64>,
    pub lambdas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub c: Option<f64>,
    /// Mean that failures are judged against, when known.
    pub true_mean: Option<f64>,
}

/// One estimator column of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodColumn {
    pub label: String,
    pub weight: WeightKind,
    pub rule: Option<PlanRule>,
    pub lambda: Option<f64>,
    pub n: u64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    /// One estimate per method column.
    pub estimates: Vec<f64>,
    /// Wall time per method column, in milliseconds.
    pub wall_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub label: String,
    pub mean_estimate: f64,
    pub median_estimate: f64,
    pub min_estimate: f64,
    pub max_estimate: f64,
    /// Present when the column has an `epsilon` and the true mean is known.
    pub failures: Option<u64>,
    pub failure_rate: Option<f64>,
    /// Wilson score interval for the failure probability.
    pub failure_interval: Option<[f64; 2]>,
    pub mean_wall_ms: f64,
}

/// Old (prior rule) against new (tail-balanced rule) for one `(epsilon, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingComparison {
    pub epsilon: f64,
    pub delta: f64,
    pub n_old: u64,
    pub n_new: u64,
    pub n_ratio: f64,
    pub improvement_factor: f64,
    pub mean_wall_ms_old: f64,
    pub mean_wall_ms_new: f64,
    /// `(new - old) / old` of the mean wall times.
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub methods: Vec<MethodSummary>,
    pub comparisons: Vec<TimingComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub methods: Vec<MethodColumn>,
    pub per_trial: Vec<TrialRow>,
    pub aggregate: Aggregate,
}

impl TrialReport {
    fn assemble(
        config: ExperimentConfig,
        methods: Vec<MethodColumn>,
        per_trial: Vec<TrialRow>,
    ) -> Result<Self> {
        let aggregate = summarize(&config, &methods, &per_trial)?;
        Ok(TrialReport {
            schema_version: SCHEMA_VERSION,
            config,
            methods,
            per_trial,
            aggregate,
        })
    }

    /// Checks the structure and that `aggregate` is exactly what `per_trial`
    /// implies.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Report(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.per_trial.len() as u64 != self.config.trials {
            return Err(Error::Report(format!(
                "{} trial rows for {} configured trials",
                self.per_trial.len(),
                self.config.trials
            )));
        }
        for (k, row) in self.per_trial.iter().enumerate() {
            if row.trial != k as u64 {
                return Err(Error::Report(format!(
                    "row {k} is labelled trial {}",
                    row.trial
                )));
            }
            if row.estimates.len() != self.methods.len() || row.wall_ms.len() != self.methods.len()
            {
                return Err(Error::Report(format!(
                    "trial {k} does not have one entry per method"
                )));
            }
        }
        let expected = summarize(&self.config, &self.methods, &self.per_trial)?;
        if expected != self.aggregate {
            return Err(Error::Report(
                "aggregate does not match the per-trial data".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: TrialReport = serde_json::from_str(text)?;
        report.validate()?;
        Ok(report)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::Report(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Copy with every wall time set to zero, for comparing runs.
    pub fn without_timings(&self) -> Result<Self> {
        let mut per_trial = self.per_trial.clone();
        for row in &mut per_trial {
            row.wall_ms.iter_mut().for_each(|w| *w = 0.0);
        }
        TrialReport::assemble(self.config.clone(), self.methods.clone(), per_trial)
    }

    pub fn column(&self, label: &str) -> Option<usize> {
        self.methods.iter().position(|m| m.label == label)
    }

    pub fn estimates(&self, column: usize) -> Vec<f64> {
        self.per_trial.iter().map(|r| r.estimates[column]).collect()
    }

    /// For coverage reports: whether every guaranteed column's failure rate
    /// is at most `delta + 3 sqrt(delta (1 - delta) / trials)`.
    pub fn coverage_passes(&self) -> bool {
        self.methods
            .iter()
            .zip(&self.aggregate.methods)
            .all(|(m, s)| match (m.delta, s.failure_rate) {
                (Some(delta), Some(rate)) => rate <= coverage_threshold(delta, self.config.trials),
                _ => true,
            })
    }
}

/// `delta` plus three binomial standard deviations.
pub fn coverage_threshold(delta: f64, trials: u64) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt()
}

/// Wilson score interval for `failures` out of `trials`.
pub fn wilson_interval(failures: u64, trials: u64, z: f64) -> [f64; 2] {
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    [(centre - half).max(0.0), (centre + half).min(1.0)]
}

fn mean_of(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

fn summarize(
    config: &ExperimentConfig,
    methods: &[MethodColumn],
    per_trial: &[TrialRow],
) -> Result<Aggregate> {
    if per_trial.is_empty() {
        return Err(Error::Report("no trials".into()));
    }
    let mut summaries = Vec::with_capacity(methods.len());
    for (j, method) in methods.iter().enumerate() {
        let estimates: Vec<f64> = per_trial.iter().map(|r| r.estimates[j]).collect();
        let walls: Vec<f64> = per_trial.iter().map(|r| r.wall_ms[j]).collect();
        if estimates.iter().chain(&walls).any(|v| !v.is_finite()) {
            return Err(Error::Report(format!(
                "non-finite value in column {}",
                method.label
            )));
        }
        let mut sorted = estimates.clone();
        sorted.sort_by(f64::total_cmp);
        let trials = estimates.len() as u64;
        let failures = match (config.true_mean, method.epsilon) {
            (Some(mu), Some(eps)) => Some(
                estimates
                    .iter()
                    .filter(|&&e| (e / mu - 1.0).abs() > eps)
                    .count() as u64,
            ),
            _ => None,
        };
        summaries.push(MethodSummary {
            label: method.label.clone(),
            mean_estimate: mean_of(&estimates),
            median_estimate: median_of_sorted(&sorted),
            min_estimate: sorted[0],
            max_estimate: sorted[sorted.len() - 1],
            failures,
            failure_rate: failures.map(|f| f as f64 / trials as f64),
            failure_interval: failures.map(|f| wilson_interval(f, trials, FAILURE_INTERVAL_Z)),
            mean_wall_ms: mean_of(&walls),
        });
    }

    let mut comparisons = Vec::new();
    if config.kind == ExperimentKind::Timing {
        for pair in methods.chunks(2).zip(summaries.chunks(2)) {
            let ([old, new], [old_s, new_s]) = pair else {
                return Err(Error::Report(
                    "timing columns must come in old/new pairs".into(),
                ));
            };
            let (Some(epsilon), Some(delta), Some(c)) = (new.epsilon, new.delta, config.c) else {
                return Err(Error::Report(
                    "timing columns need epsilon, delta and c".into(),
                ));
            };
            comparisons.push(TimingComparison {
                epsilon,
                delta,
                n_old: old.n,
                n_new: new.n,
                n_ratio: new.n as f64 / old.n as f64,
                improvement_factor: improvement_factor(epsilon, c)?,
                mean_wall_ms_old: old_s.mean_wall_ms,
                mean_wall_ms_new: new_s.mean_wall_ms,
                relative_change: (new_s.mean_wall_ms - old_s.mean_wall_ms) / old_s.mean_wall_ms,
            });
        }
    }
    Ok(Aggregate {
        methods: summaries,
        comparisons,
    })
}

fn validate_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(Error::domain("trials must be at least 1"))
    } else {
        Ok(())
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Per trial: sample mean, sample median, and the smooth-weight estimate for
/// each `lambda`.
pub fn run_interpolation_table(
    spec: &SourceSpec,
    n_per_trial: u64,
    trials: u64,
    lambdas: &[f64],
) -> Result<TrialReport> {
    spec.family.validate()?;
    validate_trials(trials)?;
    if !spec.family.is_nonnegative() {
        return Err(Error::domain(format!(
            "{} can produce negative draws",
            spec.family
        )));
    }
    if n_per_trial == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if lambdas.is_empty() {
        return Err(Error::domain("at least one lambda is required"));
    }
    for &lambda in lambdas {
        validate_lambda(lambda)?;
    }

    let mut methods = vec![
        MethodColumn {
            label: "mean".into(),
            weight: WeightKind::Mean,
            rule: None,
            lambda: None,
            n: n_per_trial,
            epsilon: None,
            delta: None,
        },
        MethodColumn {
            label: "median".into(),
            weight: WeightKind::Median,
            rule: None,
            lambda: None,
            n: n_per_trial,
            epsilon: None,
            delta: None,
        },
    ];
    methods.extend(lambdas.iter().map(|&lambda| MethodColumn {
        label: format!("lambda={lambda}"),
        weight: WeightKind::Smooth,
        rule: None,
        lambda: Some(lambda),
        n: n_per_trial,
        epsilon: None,
        delta: None,
    }));

    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let samples = SampleSet::new(spec.stream(trial).draws(n_per_trial as usize))?;
            let mut estimates = Vec::with_capacity(2 + lambdas.len());
            let mut wall_ms = Vec::with_capacity(2 + lambdas.len());
            let start = Instant::now();
            estimates.push(samples.mean());
            wall_ms.push(elapsed_ms(start));
            let start = Instant::now();
            estimates.push(samples.median());
            wall_ms.push(elapsed_ms(start));
            let tol = default_tolerance(&samples);
            for &lambda in lambdas {
                let start = Instant::now();
                estimates
                    .push(solve_bisection(&samples, lambda, WeightKind::Smooth, tol)?.estimate);
                wall_ms.push(elapsed_ms(start));
            }
            Ok(TrialRow {
                trial,
                estimates,
                wall_ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let config = ExperimentConfig {
        kind: ExperimentKind::Interpolation,
        generator: GENERATOR_ID.into(),
        source: *spec,
        trials,
        n_per_trial: Some(n_per_trial),
        lambdas: lambdas.to_vec(),
        epsilons: Vec::new(),
        deltas: Vec::new(),
        c: None,
        true_mean: spec.family.true_mean(),
    };
    TrialReport::assemble(config, methods, per_trial)
}

/// Per trial: draw the tail-balanced `n`, estimate with its `lambda`, and
/// record whether the relative error exceeds `epsilon`.
pub fn run_coverage(
    spec: &SourceSpec,
    epsilon: f64,
    delta: f64,
    c: f64,
    trials: u64,
) -> Result<TrialReport> {
    spec.family.validate()?;
    validate_trials(trials)?;
    let planned = plan(epsilon, delta, c, PlanRule::TailBalanced)?;
    let true_mean = match spec.family.true_mean() {
        Some(mu) if mu > 0.0 => mu,
        _ => {
            return Err(Error::domain(format!(
                "{} has no positive finite mean",
                spec.family
            )))
        }
    };
    match spec.family.relative_sd() {
        Some(rsd) if rsd <= c && spec.family.is_nonnegative() => {}
        _ => {
            return Err(Error::domain(format!(
                "{} is not certified to be nonnegative with relative sd <= {c}",
                spec.family
            )))
        }
    }
    let lambda = planned.lambda.expect("tail-balanced plans carry lambda");

    let methods = vec![MethodColumn {
        label: PlanRule::TailBalanced.label().into(),
        weight: WeightKind::Smooth,
        rule: Some(PlanRule::TailBalanced),
        lambda: Some(lambda),
        n: planned.n,
        epsilon: Some(epsilon),
        delta: Some(delta),
    }];

    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let start = Instant::now();
            let samples = SampleSet::new(spec.stream(trial).draws(planned.n as usize))?;
            let tol = default_tolerance(&samples);
            let root = solve_bisection(&samples, lambda, WeightKind::Smooth, tol)?;
            Ok(TrialRow {
                trial,
                estimates: vec![root.estimate],
                wall_ms: vec![elapsed_ms(start)],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let config = ExperimentConfig {
        kind: ExperimentKind::Coverage,
        generator: GENERATOR_ID.into(),
        source: *spec,
        trials,
        n_per_trial: None,
        lambdas: vec![lambda],
        epsilons: vec![epsilon],
        deltas: vec![delta],
        c: Some(c),
        true_mean: Some(true_mean),
    };
    TrialReport::assemble(config, methods, per_trial)
}

/// Source used by the timing comparison.
pub fn timing_source(seed: u64) -> SourceSpec {
    SourceSpec {
        family: Family::SdeDrift { t: 1.0, h: 0.001 },
        seed,
    }
}

/// For each `(epsilon, delta)` pair, times the whole pipeline (generate the
/// planned number of drift draws, then bisect over their range) under the
/// prior rule with the Catoni-Guillini weight and under the tail-balanced
/// rule with the smooth weight.
///
/// Trials run serially. Within a trial the two rules run back to back, in an
/// order that alternates from trial to trial so that drifting machine load
/// affects both equally; one untimed warm-up run per rule precedes the
/// measurements. Both rules in a trial draw from the same stream.
pub fn run_timing(
    seed: u64,
    epsilons: &[f64],
    deltas: &[f64],
    c: f64,
    trials: u64,
) -> Result<TrialReport> {
    validate_trials(trials)?;
    if epsilons.is_empty() || epsilons.len() != deltas.len() {
        return Err(Error::domain(
            "epsilons and deltas must be nonempty and of equal length",
        ));
    }
    let spec = timing_source(seed);

    let mut methods = Vec::with_capacity(2 * epsilons.len());
    for (&epsilon, &delta) in epsilons.iter().zip(deltas) {
        for (rule, weight) in [
            (PlanRule::Prior, WeightKind::CatoniGuillini),
            (PlanRule::TailBalanced, WeightKind::Smooth),
        ] {
            let p = plan(epsilon, delta, c, rule)?;
            methods.push(MethodColumn {
                label: format!("{}(eps={epsilon},delta={delta})", rule.label()),
                weight,
                rule: Some(rule),
                lambda: p.lambda,
                n: p.n,
                epsilon: Some(epsilon),
                delta: Some(delta),
            });
        }
    }

    let run_one = |method: &MethodColumn, stream: u64| -> Result<(f64, f64)> {
        let start = Instant::now();
        let draws = spec.stream(stream).draws(method.n as usize);
        let lambda = method.lambda.expect("timing rules carry lambda");
        let root = bisect_data_range(&draws, lambda, method.weight, TIMING_TOLERANCE)?;
        Ok((root.estimate, elapsed_ms(start)))
    };

    for method in &methods {
        run_one(method, u64::MAX)?;
    }

    let mut per_trial = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut estimates = vec![0.0; methods.len()];
        let mut wall_ms = vec![0.0; methods.len()];
        for (pair, cols) in methods.chunks(2).enumerate() {
            let order = if (trial as usize + pair).is_multiple_of(2) {
                [0, 1]
            } else {
                [1, 0]
            };
            for k in order {
                let (estimate, ms) = run_one(&cols[k], trial)?;
                estimates[2 * pair + k] = estimate;
                wall_ms[2 * pair + k] = ms;
            }
        }
        per_trial.push(TrialRow {
            trial,
            estimates,
            wall_ms,
        });
    }

    let config = ExperimentConfig {
        kind: ExperimentKind::Timing,
        generator: GENERATOR_ID.into(),
        source: spec,
        trials,
        n_per_trial: None,
        lambdas: Vec::new(),
        epsilons: epsilons.to_vec(),
        deltas: deltas.to_vec(),
        c: Some(c),
        true_mean: spec.family.true_mean(),
    };
    TrialReport::assemble(config, methods, per_trial)
}
