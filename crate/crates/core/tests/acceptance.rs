//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The process exits 0 even when a criterion fails so that the workspace
//! test run still completes; set `SATLINK_ACCEPTANCE_STRICT=1` to turn any
//! failure into a non-zero exit.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use satlink::mac::{allocate_from, DemandSnapshot};
use satlink::metrics::{self, mean_in_order_by, mean_time_to_n, session_stats, SessionStats};
use satlink::phy::{sic_decode, PlrEstimator, PlrPoint};
use satlink::scenario::{Policy, SeqThreshold};
use satlink::{run_scenario, AccessMethod, RunResult, Scenario, SimTime};

// Tolerances.
const DEDICATED_TOL: f64 = 0.20;
const MUSCA_TOL: f64 = 0.10;
const CRDSA_MAX_TOL: f64 = 0.10;
const CRDSA_MIN_MAX_RATIO: f64 = 0.2;
const HEADSTART_S: f64 = 0.4;
const CROSSOVER_GAP_S: f64 = 0.5;
const CROSSOVER_NEAR_S: f64 = 0.5;
const EARLY_COUNT_TOL: f64 = 3.0;
const PLR_TARGET: f64 = 1e-2;
const PLR_TRIALS: u64 = 100_000;
const SIGMAS: f64 = 3.0;
const RANDOM_INSTANCES: usize = 10_000;
const SIC_BLOCKS: usize = 10_000;

// Reference values.
const DEDICATED_REF: [(u32, f64); 4] = [(100, 1146.0), (200, 591.0), (300, 400.0), (400, 304.0)];
const MUSCA_REF: f64 = 300.0;
const CRDSA_MAX_REF: f64 = 272.0;
const CROSSOVER_T_S: f64 = 2.7;
const EARLY_T_S: f64 = 1.5;
const EARLY_DEDICATED: f64 = 8.0;
const EARLY_MUSCA: f64 = 14.0;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn fmt_stats(s: SessionStats) -> String {
    format!("{}/{}/{}", s.min, s.median, s.max)
}

struct Runs(BTreeMap<(String, u32), RunResult>);

impl Runs {
    fn get(&self, access: AccessMethod, n: u32) -> &RunResult {
        &self.0[&(access.to_string(), n)]
    }
}

fn baseline_runs() -> Runs {
    let mut jobs = vec![];
    for (n, _) in DEDICATED_REF {
        jobs.push(Scenario::new(AccessMethod::Dedicated, n));
    }
    for n in [100, 200] {
        jobs.push(Scenario::new(AccessMethod::MUSCA3, n));
        jobs.push(Scenario::new(AccessMethod::CRDSA3, n));
    }
    Runs(
        jobs.into_iter()
            .map(|sc| {
                let key = (sc.access.to_string(), sc.num_sessions);
                (key, run_scenario(&sc).expect("valid scenario"))
            })
            .collect(),
    )
}

fn criterion_1(r: &mut Report, runs: &Runs) {
    let mut ok = true;
    let mut parts = vec![];
    for (n, target) in DEDICATED_REF {
        let s = session_stats(runs.get(AccessMethod::Dedicated, n));
        let equal = s.min == s.median && s.median == s.max;
        let close = [s.min, s.median, s.max]
            .iter()
            .all(|&x| within(x as f64, target, DEDICATED_TOL));
        ok &= equal && close;
        parts.push(format!("{n}: {} (ref {target})", fmt_stats(s)));
    }
    r.line(1, "dedicated fair share", ok, parts.join(", "));
}

fn criterion_2(r: &mut Report, runs: &Runs) {
    let mut ok = true;
    let mut parts = vec![];
    for n in [100, 200] {
        let res = runs.get(AccessMethod::MUSCA3, n);
        let s = session_stats(res);
        ok &= s.min == s.max && within(s.median as f64, MUSCA_REF, MUSCA_TOL) && res.loss_ratio() == 0.0;
        parts.push(format!("{n}: {} loss {}", fmt_stats(s), res.loss_ratio()));
    }
    r.line(2, "MuSCA-3 low load", ok, parts.join(", "));
}

fn criterion_3(r: &mut Report, runs: &Runs) {
    let s100 = session_stats(runs.get(AccessMethod::CRDSA3, 100));
    let s200 = session_stats(runs.get(AccessMethod::CRDSA3, 200));
    let ratio = s200.min as f64 / s200.max as f64;
    let ok = within(s100.max as f64, CRDSA_MAX_REF, CRDSA_MAX_TOL) && s200.min < s200.max && ratio < CRDSA_MIN_MAX_RATIO;
    r.line(
        3,
        "CRDSA-3 onset of losses",
        ok,
        format!(
            "100: {} (max ref {CRDSA_MAX_REF}), 200: {} min/max {ratio:.3} (< {CRDSA_MIN_MAX_RATIO})",
            fmt_stats(s100),
            fmt_stats(s200)
        ),
    );
}

fn criterion_4(r: &mut Report, runs: &Runs) {
    let ded = mean_time_to_n(runs.get(AccessMethod::Dedicated, 200), 10);
    let ra = mean_time_to_n(runs.get(AccessMethod::MUSCA3, 200), 10);
    let (ok, detail) = match (ded, ra) {
        (Some(d), Some(m)) => (
            d - m >= HEADSTART_S,
            format!("t10 dedicated {d:.3} s, MuSCA-3 {m:.3} s, gain {:.3} s", d - m),
        ),
        _ => (false, format!("t10 not reached: dedicated {ded:?}, MuSCA-3 {ra:?}")),
    };
    r.line(4, "random access head start", ok, detail);
}

fn criterion_5(r: &mut Report, runs: &Runs) {
    let ded = runs.get(AccessMethod::Dedicated, 200);
    let ra = runs.get(AccessMethod::MUSCA3, 200);
    let t = SimTime::from_secs_f64(EARLY_T_S);
    let (early_d, early_m) = (mean_in_order_by(ded, t), mean_in_order_by(ra, t));
    let early_ok = (early_d - EARLY_DEDICATED).abs() <= EARLY_COUNT_TOL && (early_m - EARLY_MUSCA).abs() <= EARLY_COUNT_TOL;
    let (ok, detail) = match (mean_time_to_n(ded, 42), mean_time_to_n(ra, 42)) {
        (Some(d), Some(m)) => (
            early_ok
                && (d - m).abs() <= CROSSOVER_GAP_S
                && (d - CROSSOVER_T_S).abs() <= CROSSOVER_NEAR_S
                && (m - CROSSOVER_T_S).abs() <= CROSSOVER_NEAR_S,
            format!(
                "t42 dedicated {d:.3} s, MuSCA-3 {m:.3} s; by {EARLY_T_S} s dedicated {early_d:.1}, MuSCA-3 {early_m:.1}"
            ),
        ),
        (d, m) => (false, format!("t42 not reached: dedicated {d:?}, MuSCA-3 {m:?}")),
    };
    r.line(5, "crossover", ok, detail);
}

fn criterion_6(r: &mut Report) {
    // Fine steps around the CRDSA-3 knee, coarse elsewhere.
    let loads: Vec<u32> = [1, 2, 5, 10, 20, 30, 40, 50, 55, 60]
        .into_iter()
        .chain(61..=70)
        .chain([75, 80, 90, 100])
        .collect();
    let rng = satlink::Rng::new(6);
    let curve = |m: AccessMethod| -> Vec<PlrPoint> {
        let est = PlrEstimator::for_method(m, 100).unwrap();
        loads.iter().map(|&l| est.point(l, PLR_TRIALS, &rng)).collect()
    };
    let crdsa = curve(AccessMethod::CRDSA3);
    let musca = curve(AccessMethod::MUSCA3);

    let mut ok = true;
    let mut notes = vec![];
    for (name, pts) in [("CRDSA-3", &crdsa), ("MuSCA-3", &musca)] {
        if pts[0].lost != 0 {
            ok = false;
            notes.push(format!("{name} PLR(1) = {}", pts[0].plr()));
        }
        for w in pts.windows(2) {
            let slack = SIGMAS * (w[0].std_error().powi(2) + w[1].std_error().powi(2)).sqrt();
            if w[1].plr() < w[0].plr() - slack {
                ok = false;
                notes.push(format!("{name} decreases from load {} to {}", w[0].load, w[1].load));
            }
        }
    }
    let knee = |pts: &[PlrPoint]| pts.iter().filter(|p| p.plr() <= PLR_TARGET).map(|p| p.load).max().unwrap_or(0);
    let (kc, km) = (knee(&crdsa), knee(&musca));
    // At MuSCA-3's knee, CRDSA-3 must be above the target by 3 sigma.
    let at = crdsa.iter().find(|p| p.load == km).expect("shared grid");
    let separated = at.plr() - SIGMAS * at.std_error() > PLR_TARGET;
    ok &= km > kc && separated;
    notes.insert(
        0,
        format!(
            "max load with PLR <= {PLR_TARGET}: CRDSA-3 {kc}, MuSCA-3 {km}; CRDSA-3 PLR at {km} = {:.4} +- {:.4}",
            at.plr(),
            at.std_error()
        ),
    );
    r.line(6, "PLR model properties", ok, notes.join("; "));
}

fn criterion_7(r: &mut Report) {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut first_error = None;
    for _ in 0..RANDOM_INSTANCES {
        let demands: Vec<DemandSnapshot> = common::random_demands(&mut rng);
        let start = rng.gen_bool(0.5).then(|| rng.gen_range(0..500));
        let (plan, _) = allocate_from(&demands, common::TOTAL, common::CAP, common::BITS, start);
        if let Err(e) = common::check_plan(&demands, &plan) {
            first_error.get_or_insert(e);
        }
        let n = rng.gen_range(1..=1000);
        let gap = common::deep_demand_gap(n, rng.gen_bool(0.5), rng.gen_bool(0.5));
        if gap > 1 {
            first_error.get_or_insert(format!("fairness gap {gap} with {n} flows"));
        }
    }
    let ok = first_error.is_none();
    let detail = first_error.unwrap_or_else(|| format!("{RANDOM_INSTANCES} instances"));
    r.line(7, "allocator invariants", ok, detail);
}

fn criterion_8(r: &mut Report) {
    let mut rng = ChaCha20Rng::seed_from_u64(88);
    let mut mismatches = 0;
    let mut lossy = 0;
    for i in 0..SIC_BLOCKS {
        let method = if i % 2 == 0 { AccessMethod::CRDSA3 } else { AccessMethod::MUSCA3 };
        let load = rng.gen_range(1..=100);
        let block = common::random_block(&mut rng, load);
        let got = sic_decode(&block, method, 20).unwrap();
        if got.decoded != common::brute_rounds(&block, method, 20) {
            mismatches += 1;
        }
        lossy += usize::from(!got.undecoded.is_empty());
    }
    r.line(
        8,
        "SIC oracle equivalence",
        mismatches == 0,
        format!("{mismatches} mismatches over {SIC_BLOCKS} blocks ({lossy} with losses)"),
    );
}

fn trace_bytes(res: &RunResult) -> Vec<u8> {
    let mut out = vec![];
    metrics::write_trace(&res.trace, &mut out).unwrap();
    out
}

fn criterion_9(r: &mut Report, runs: &Runs) {
    let mut ded = Scenario::new(AccessMethod::MUSCA3, 100);
    ded.policy = Policy::Hybrid;
    ded.seq_threshold = SeqThreshold::Fixed(0);
    ded.ra_block_budget = Some(0);
    let mut ra = Scenario::new(AccessMethod::MUSCA3, 100);
    ra.policy = Policy::Hybrid;
    ra.seq_threshold = SeqThreshold::INFINITE;
    ra.ra_block_budget = Some(40);
    let hd = run_scenario(&ded).unwrap();
    let hr = run_scenario(&ra).unwrap();
    let same_d = trace_bytes(&hd) == trace_bytes(runs.get(AccessMethod::Dedicated, 100));
    let same_r = trace_bytes(&hr) == trace_bytes(runs.get(AccessMethod::MUSCA3, 100));
    r.line(
        9,
        "policy degeneracy",
        same_d && same_r,
        format!("threshold 0/budget 0 = dedicated: {same_d}; threshold inf/budget 40 = MuSCA-3: {same_r}"),
    );
}

fn cli_run(dir: &Path, access: &str, sessions: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_satlink"))
        .env_remove("SATLINK_SEED")
        .args(["run", "--access", access, "--sessions", sessions, "--seed", "3", "--dump-btp", "--output-dir"])
        .arg(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_10(r: &mut Report) {
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut compared = 0;
    for (access, n) in [("dedicated", "150"), ("crdsa3", "200")] {
        let a = tmp.path().join(format!("{access}-a"));
        let b = tmp.path().join(format!("{access}-b"));
        ok &= cli_run(&a, access, n) && cli_run(&b, access, n);
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            let x = std::fs::read(a.join(&name)).unwrap();
            let y = std::fs::read(b.join(&name)).unwrap_or_default();
            ok &= x == y;
            compared += 1;
        }
    }
    r.line(10, "determinism", ok, format!("{compared} output files compared byte for byte"));
}

fn main() {
    let started = Instant::now();
    let mut r = Report { passed: 0, failed: 0 };
    let runs = baseline_runs();
    criterion_1(&mut r, &runs);
    criterion_2(&mut r, &runs);
    criterion_3(&mut r, &runs);
    criterion_4(&mut r, &runs);
    criterion_5(&mut r, &runs);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r, &runs);
    criterion_10(&mut r);
    println!(
        "acceptance: {} passed, {} failed ({:.0} s)",
        r.passed,
        r.failed,
        started.elapsed().as_secs_f64()
    );
    if r.failed > 0 && std::env::var_os("SATLINK_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
