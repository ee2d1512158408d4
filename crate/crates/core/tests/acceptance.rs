//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line whether or not it passes; the process
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relmean::distributions::{Family, SourceSpec};
use relmean::experiments::{run_coverage, run_interpolation_table, run_timing};
use relmean::planner::{improvement_factor, normal_limit_factor, plan, PlanRule};
use relmean::solver::{default_tolerance, solve_bisection, solve_exact};
use relmean::weights::eval_weight;
use relmean::{SampleSet, WeightKind};

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Rng(ChaCha8Rng);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    fn int(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.0.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
    }

    /// Positive data with a random scale and shape: exponential, uniform or
    /// log-normal-like.
    fn dataset(&mut self, n: usize) -> Vec<f64> {
        let scale = 10f64.powf(self.range(-3.0, 3.0));
        let shape = self.int(0, 2);
        (0..n)
            .map(|_| {
                let u = 1.0 - self.uniform();
                scale
                    * match shape {
                        0 => -u.ln(),
                        1 => u,
                        _ => (2.0 * (self.uniform() - 0.5)).exp() * u.sqrt(),
                    }
            })
            .collect()
    }

    fn distinct_dataset(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v = self.dataset(n);
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            if s.windows(2).all(|w| w[0] < w[1]) {
                return v;
            }
        }
    }
}

fn odd(rng: &mut Rng, max: usize) -> usize {
    2 * rng.int(0, (max - 1) / 2) + 1
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut points: Vec<f64> = (0..100_000)
        .map(|k| -50.0 + 100.0 * k as f64 / 99_999.0)
        .collect();
    let mut rng = Rng::new(1);
    for k in 0..100_000 {
        points.push(match k % 4 {
            0 => rng.range(-50.0, 50.0),
            1 => rng.range(-1.0, 1.0),
            2 => rng.range(-1.0, 1.0) * 10f64.powf(rng.range(-12.0, 0.0)),
            _ => rng.range(-1.0, 1.0) * 10f64.powf(rng.range(0.0, 6.0)),
        });
    }
    let mut violations = 0;
    for &u in &points {
        let lower = eval_weight(WeightKind::LowerEnvelope, u).unwrap();
        let smooth = eval_weight(WeightKind::Smooth, u).unwrap();
        let upper = eval_weight(WeightKind::UpperEnvelope, u).unwrap();
        if !(lower <= smooth && smooth <= upper) {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        violations == 0 && secs < 1.0,
        format!(
            "{} points, {violations} violations, {secs:.3} s (limit 1 s)",
            points.len()
        ),
    )
}

fn criterion_2() -> Verdict {
    let mut rng = Rng::new(2);
    let mut worst_mean: f64 = 0.0;
    let mut mean_fail = 0;
    let mut median_fail = 0;
    for _ in 0..1000 {
        let n = odd(&mut rng, 101);
        let samples = SampleSet::new(rng.distinct_dataset(n)).unwrap();
        let tol = default_tolerance(&samples);
        let mean = samples.mean();
        let m = solve_bisection(&samples, 1.0, WeightKind::Mean, tol)
            .unwrap()
            .estimate;
        let err = (m - mean).abs();
        worst_mean = worst_mean.max(err / (tol + 8.0 * f64::EPSILON * mean));
        if err > tol + 8.0 * f64::EPSILON * mean {
            mean_fail += 1;
        }
        let median = solve_bisection(&samples, 1.0, WeightKind::Median, tol)
            .unwrap()
            .estimate;
        if (median - samples.median()).abs() > tol {
            median_fail += 1;
        }
    }
    verdict(
        mean_fail == 0 && median_fail == 0,
        format!(
            "1000 sets: mean misses {mean_fail} (worst error {worst_mean:.3} of allowance), median misses {median_fail}"
        ),
    )
}

fn criterion_3() -> Verdict {
    let mut rng = Rng::new(3);
    let (mut worst_mean, mut worst_median): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let n = rng.int(1, 101);
        let samples = SampleSet::new(rng.dataset(n)).unwrap();
        let est = solve_bisection(
            &samples,
            1e-8,
            WeightKind::Smooth,
            default_tolerance(&samples),
        )
        .unwrap()
        .estimate;
        worst_mean = worst_mean.max(rel(est, samples.mean()));
    }
    for _ in 0..200 {
        // The median is a single point only for odd counts.
        let n = odd(&mut rng, 101);
        let samples = SampleSet::new(rng.distinct_dataset(n)).unwrap();
        let est = solve_bisection(
            &samples,
            1e8,
            WeightKind::Smooth,
            default_tolerance(&samples),
        )
        .unwrap()
        .estimate;
        worst_median = worst_median.max(rel(est, samples.median()));
    }
    verdict(
        worst_mean <= 1e-6 && worst_median <= 1e-6,
        format!("lambda=1e-8 worst rel. error vs mean {worst_mean:.2e}; lambda=1e8 vs median {worst_median:.2e} (limit 1e-6)"),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut rng = Rng::new(4);
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for k in 0..1000 {
        let n = rng.int(2, 20);
        let lambda = [0.1, 1.0, 5.0][k % 3];
        let samples = SampleSet::new(rng.dataset(n)).unwrap();
        let bisect = solve_bisection(&samples, lambda, WeightKind::Smooth, 1e-12);
        let exact = solve_exact(&samples, lambda);
        match (bisect, exact) {
            (Ok(b), Ok(e)) => worst = worst.max(rel(e.estimate, b.estimate)),
            (b, e) => errors.push(format!(
                "instance {k}: bisection {:?}, exact {:?}",
                b.err(),
                e.err()
            )),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        errors.is_empty() && worst <= 1e-8 && secs < 10.0,
        format!(
            "1000 instances: worst rel. difference {worst:.2e} (limit 1e-8), {} solver errors{}, {secs:.2} s (limit 10 s)",
            errors.len(),
            errors.first().map(|e| format!(" [{e}]")).unwrap_or_default()
        ),
    )
}

fn criterion_5() -> Verdict {
    let factor = improvement_factor(0.1, 2.0).unwrap();
    let limit = normal_limit_factor(0.1).unwrap();
    let factor_ok = (factor - 0.8556).abs() <= 1e-4;
    let limit_ok = (limit - 0.8264).abs() <= 1e-4;
    verdict(
        factor_ok && limit_ok,
        format!(
            "improvement_factor(0.1, 2) = {factor:.6} vs 0.8556 +/- 1e-4 [{}]; 1/(1.1)^2 = {limit:.6} vs 0.8264 +/- 1e-4 [{}]",
            if factor_ok { "ok" } else { "mismatch" },
            if limit_ok { "ok" } else { "mismatch" }
        ),
    )
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let spec = SourceSpec::new(Family::Exponential { mean: 2.0 }, 2024).unwrap();
    let report = run_coverage(&spec, 0.2, 0.1, 1.0, 1000).unwrap();
    let summary = &report.aggregate.methods[0];
    let rate = summary.failure_rate.unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        rate <= 0.128 && secs < 120.0,
        format!(
            "n = {}, failure rate {rate:.4} (limit 0.128), 95% interval [{:.4}, {:.4}], {secs:.1} s",
            report.methods[0].n,
            summary.failure_interval.unwrap()[0],
            summary.failure_interval.unwrap()[1]
        ),
    )
}

fn criterion_7() -> Verdict {
    let spec = SourceSpec::new(Family::HalfCauchy { scale: 1.0 }, 77).unwrap();
    let report = run_interpolation_table(&spec, 100, 500, &[5.0]).unwrap();
    let smooth = report.estimates(report.column("lambda=5").unwrap());
    let means = report.estimates(report.column("mean").unwrap());
    let lo = smooth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_mean = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        lo >= 0.5 && hi <= 2.0 && max_mean > 5.0,
        format!("lambda=5 estimates in [{lo:.4}, {hi:.4}] (required within [0.5, 2.0]); max sample mean {max_mean:.2} (required > 5)"),
    )
}

fn criterion_8() -> Verdict {
    let new = plan(0.1, 1e-6, 1.0, PlanRule::TailBalanced).unwrap();
    let old = plan(0.1, 1e-6, 1.0, PlanRule::Prior).unwrap();
    let ratio = new.n as f64 / old.n as f64;
    let factor = improvement_factor(0.1, 1.0).unwrap();
    let ratio_ok = (ratio - factor).abs() <= 1.0 / new.n as f64;

    let report = run_timing(123, &[0.1, 0.05], &[1e-6, 1e-6], 1.0, 20).unwrap();
    let reference = [-0.1638946, -0.0947925];
    let mut timing_ok = true;
    let mut parts = Vec::new();
    for (cmp, reference_change) in report.aggregate.comparisons.iter().zip(reference) {
        let ok = (-0.25..=-0.03).contains(&cmp.relative_change);
        timing_ok &= ok;
        parts.push(format!(
            "eps={}: {:.1} ms -> {:.1} ms, change {:+.4} (reference {reference_change:+.4})",
            cmp.epsilon, cmp.mean_wall_ms_old, cmp.mean_wall_ms_new, cmp.relative_change
        ));
    }
    verdict(
        ratio_ok && timing_ok,
        format!(
            "n {}/{} = {ratio:.6} vs factor {factor:.6} (tolerance {:.2e}); wall-time change band [-0.25, -0.03]: {}",
            new.n,
            old.n,
            1.0 / new.n as f64,
            parts.join("; ")
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut rng = Rng::new(9);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = rng.int(1, 100);
        let data = rng.dataset(n);
        let lambda = [0.1, 1.0, 5.0][k % 3];
        let base = SampleSet::new(data.clone()).unwrap();
        let b0 = solve_bisection(&base, lambda, WeightKind::Smooth, default_tolerance(&base))
            .unwrap()
            .estimate;
        let e0 = solve_exact(&base, lambda).unwrap().estimate;
        for alpha in [1e-6, 1e6] {
            let scaled = SampleSet::new(data.iter().map(|x| alpha * x).collect()).unwrap();
            let b = solve_bisection(
                &scaled,
                lambda,
                WeightKind::Smooth,
                default_tolerance(&scaled),
            )
            .unwrap()
            .estimate;
            let e = solve_exact(&scaled, lambda).unwrap().estimate;
            worst = worst.max(rel(b, alpha * b0)).max(rel(e, alpha * e0));
        }
    }
    verdict(
        worst <= 1e-10,
        format!("100 sets, alpha in {{1e-6, 1e6}}, bisection and exact: worst rel. error {worst:.2e} (limit 1e-10)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("envelope bounds", criterion_1),
        ("mean/median degeneration", criterion_2),
        ("lambda limits", criterion_3),
        ("exact vs bisection", criterion_4),
        ("planner figures", criterion_5),
        ("coverage", criterion_6),
        ("half-Cauchy robustness", criterion_7),
        ("sample-count ratio and timing", criterion_8),
        ("scale equivariance", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} | {}",
            k + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
