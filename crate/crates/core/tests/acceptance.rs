//! Acceptance criteria. Every test prints one `PASS`/`FAIL` line with the
//! measured values and the bound it was held to, then asserts.

mod common;

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use fa11y::analyzer::ErrorReport;
use fa11y::app_model::GroundTruth;
use fa11y::executor::replay;
use fa11y::harness::{run_corpus, score, synth_corpus, CorpusSpec, FaultPlan, RunConfig, RunOutput};
use fa11y::taskgen::DetectorConfig;
use fa11y::{AppDefinition, ErrorCategory};
use proptest::test_runner::{Config, TestCaseError, TestRunner};

/// Seeds averaged for the calibrated-noise detection run.
const CALIBRATED_SEEDS: std::ops::RangeInclusive<u64> = 1..=8;

/// Writes past the test harness capture so the lines always reach the log.
fn verdict(criterion: u8, ok: bool, detail: String) -> bool {
    let line = format!("{} criterion {criterion}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    ok
}

fn faulted(seed: u64) -> Vec<AppDefinition> {
    synth_corpus(&CorpusSpec::new(54, "25,12,9,11,21".parse().unwrap(), seed)).unwrap()
}

fn run(apps: &[AppDefinition], detector: DetectorConfig) -> RunOutput {
    let mut cfg = RunConfig::oracle(detector);
    cfg.parallelism = 4;
    run_corpus(apps, &cfg).unwrap()
}

#[test]
fn criterion_1_fault_free_task_success() {
    let apps = synth_corpus(&CorpusSpec::fault_free(36, 42)).unwrap();
    let started = Instant::now();
    let out = run(&apps, DetectorConfig::noiseless(42));
    let secs = started.elapsed().as_secs_f64();
    let r = &out.result;
    let ok = apps.len() == 36 && r.tasks >= 299 && r.task_success_rate >= 0.96 && secs < 60.0;
    assert!(verdict(
        1,
        ok,
        format!(
            "{} screens, {} tasks (>= 299), success {:.3} (>= 0.96), {secs:.2}s (< 60s)",
            apps.len(),
            r.tasks,
            r.task_success_rate
        )
    ));
}

#[test]
fn criterion_2_detection_metrics() {
    // calibrated detector noise, averaged over pinned seeds
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut worst = (f64::MAX, f64::MAX);
    for seed in CALIBRATED_SEEDS {
        let r = run(&faulted(seed), DetectorConfig::calibrated(seed)).result;
        p_sum += r.precision;
        r_sum += r.recall;
        worst = (worst.0.min(r.precision), worst.1.min(r.recall));
    }
    let n = CALIBRATED_SEEDS.count() as f64;
    let (p, r) = (p_sum / n, r_sum / n);
    let calibrated = p >= 0.676 && r >= 0.615;
    let line = format!(
        "calibrated noise, mean of seeds {CALIBRATED_SEEDS:?}: precision {p:.3} (>= 0.676), recall {r:.3} (>= 0.615); worst seed precision {:.3}, recall {:.3}",
        worst.0, worst.1
    );

    // noiseless detector
    let out = run(&faulted(42), DetectorConfig::noiseless(42));
    let res = &out.result;
    let per_cat: Vec<(ErrorCategory, f64)> = ErrorCategory::ALL
        .iter()
        .map(|c| {
            let k = &res.per_category[c];
            (*c, if k.tp + k.fn_ == 0 { 0.0 } else { k.tp as f64 / (k.tp + k.fn_) as f64 })
        })
        .collect();
    let noiseless = res.precision >= 0.95 && per_cat.iter().all(|(_, r)| *r >= 0.90);
    let cats: Vec<String> = per_cat.iter().map(|(c, r)| format!("{c:?} {r:.3}")).collect();
    let line = format!(
        "{line}; noiseless: precision {:.3} (>= 0.95), recall per category [{}] (>= 0.90)",
        res.precision,
        cats.join(", ")
    );
    assert!(verdict(2, calibrated && noiseless, line));
}

fn report(screen: &str, element: &str) -> ErrorReport {
    ErrorReport {
        screen: screen.into(),
        element: element.into(),
        category: ErrorCategory::Label,
        evidence: vec![0],
        task_desc: String::new(),
        merged: Vec::new(),
        element_id: Some(element.into()),
    }
}

fn truth(screen: &str, element: &str) -> GroundTruth {
    GroundTruth { screen: screen.into(), element: element.into(), category: ErrorCategory::Label }
}

#[test]
fn criterion_3_score_identity() {
    let mut reports: Vec<ErrorReport> = (0..48).map(|i| report("s", &format!("hit{i}"))).collect();
    reports.extend((0..23).map(|i| report("s", &format!("spurious{i}"))));
    let mut gt: Vec<GroundTruth> = (0..48).map(|i| truth("s", &format!("hit{i}"))).collect();
    gt.extend((0..30).map(|i| truth("s", &format!("missed{i}"))));
    let r = score(&reports, &gt);

    let p = 48.0 / (48.0 + 23.0);
    let rc = 48.0 / (48.0 + 30.0);
    let f1 = 2.0 * p * rc / (p + rc);
    let close = |a: f64, b: f64| (a - b).abs() <= 0.001;
    let ok = (r.tp, r.fp, r.fn_) == (48, 23, 30)
        && close(r.precision, 0.676)
        && close(r.recall, 0.615)
        && close(r.f1, 0.644)
        && close(r.precision, p)
        && close(r.recall, rc)
        && close(r.f1, f1);
    assert!(verdict(
        3,
        ok,
        format!(
            "tp {} fp {} fn {}: precision {:.4}, recall {:.4}, f1 {:.4} (0.676/0.615/0.644 +- 0.001)",
            r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1
        )
    ));
}

#[test]
fn criterion_4_proxy_property_suite() {
    let cases = 1000;
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    let outcome = runner.run(&common::proxy_oracle::fixture_strategy(), |fx| {
        common::proxy_oracle::check_fixture(&fx).map_err(TestCaseError::fail)
    });
    let detail = match &outcome {
        Ok(()) => format!("{cases} fixtures of up to 8 elements agree with the brute-force model"),
        Err(e) => format!("{e}"),
    };
    assert!(verdict(4, outcome.is_ok(), detail));
}

#[test]
fn criterion_5_category_soundness() {
    let mut failures = Vec::new();
    let mut fixtures = 0;
    for (i, category) in ErrorCategory::ALL.iter().enumerate() {
        let mut counts = [0usize; 5];
        counts[i] = 1;
        let plan: FaultPlan = counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",").parse().unwrap();
        // one-screen corpora without a suitable element for the fault are skipped
        let feasible = (100..200u64).filter_map(|seed| Some((seed, synth_corpus(&CorpusSpec::new(1, plan, seed)).ok()?)));
        for (seed, apps) in feasible.take(6) {
            let out = run(&apps, DetectorConfig::noiseless(seed));
            fixtures += 1;
            let cats: Vec<ErrorCategory> = out.reports.iter().map(|r| r.category).collect();
            if cats != [*category] {
                failures.push(format!("{category:?} seed {seed}: {cats:?}"));
            }
        }
    }
    let ok = failures.is_empty() && fixtures == 30;
    let detail = if failures.is_empty() {
        format!("{fixtures} single-fault fixtures (6 per category, >= 5) each yield exactly one report of their category")
    } else {
        format!("{} of {fixtures} fixtures misreported: {}", failures.len(), failures.join("; "))
    };
    assert!(verdict(5, ok, detail));
}

#[test]
fn criterion_6_no_false_positives() {
    let mut total = 0;
    let mut tasks = 0;
    for seed in [42, 7] {
        let out = run(&synth_corpus(&CorpusSpec::fault_free(36, seed)).unwrap(), DetectorConfig::noiseless(seed));
        total += out.reports.len();
        tasks += out.result.tasks;
    }
    assert!(verdict(6, total == 0, format!("{total} reports over {tasks} tasks on fault-free corpora (== 0)")));
}

#[test]
fn criterion_7_prompt_fidelity() {
    let golden = common::prompt_cases::check_goldens();
    let decision = &common::prompt_cases::rendered_prompts()[0].1;
    let menu = [
        "SWIPE_RIGHT",
        "SWIPE_LEFT",
        "DOUBLE_TAP",
        "TYPE",
        "PRESS_BACK",
        "WAIT",
        "TASK_COMPLETE",
        "TASK_IMPOSSIBLE",
    ];
    let spot = decision.contains("Always use double quotes") && menu.iter().all(|a| decision.contains(a));
    let fuzz = common::prompt_cases::fuzz_parsers(10_000);
    let ok = golden.is_ok() && spot && fuzz.is_ok();
    let detail = format!(
        "golden prompts {}, spot checks {}, parser fuzz over 10000 cases {}",
        golden.map_or_else(|e| e, |_| "match".into()),
        if spot { "present" } else { "missing" },
        fuzz.map_or_else(|e| e, |_| "clean".into())
    );
    assert!(verdict(7, ok, detail));
}

#[test]
fn criterion_8_replay_determinism() {
    let apps = faulted(42);
    let mut cfg = RunConfig::oracle(DetectorConfig::noiseless(42));
    cfg.parallelism = 4;
    let out = run_corpus(&apps, &cfg).unwrap();
    let mut mismatched = Vec::new();
    for run in &out.runs {
        let app = apps.iter().find(|a| a.initial_screen == run.task.screen).unwrap().clone();
        let recorded = serde_json::to_vec(&run.trace.steps.iter().map(|s| &s.observation).collect::<Vec<_>>()).unwrap();
        let replayed = serde_json::to_vec(&replay(Arc::new(app), &run.trace, &cfg.executor)).unwrap();
        if recorded != replayed {
            mismatched.push(run.task.spec.desc.clone());
        }
    }
    assert!(verdict(
        8,
        mismatched.is_empty(),
        format!("{} of {} traces replay byte-for-byte", out.runs.len() - mismatched.len(), out.runs.len())
    ));
}
