//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line with the
//! measured value next to its pinned tolerance, then the gating criteria are
//! asserted together at the end so one run shows the full picture.
//!
//! Run with `cargo test --release -p ris-power --test acceptance -- --nocapture`
//! to see the report.

use std::cell::Cell;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::Matrix2xX;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_power::check::gradient_error;
use ris_power::objective::{v_init, v_init_grad};
use ris_power::rcg::{minimize, RcgConfig};
use ris_power::simulate::{run_sweep_with_threads, simulate_sep, write_sweep_csv, SweepConfig, SweepRecord};
use ris_power::special::erfc_inv;
use ris_power::{
    bisect, BisectionConfig, ChannelSet, CostFunction, DirectionMatrices, FeasibilityProblem, InitObjective, Instance,
    PhasePoint, PskConstellation, SymbolVector,
};

const CLOSED_FORM_REL_TOL: f64 = 1e-3;
const CLOSED_FORM_BUDGET: Duration = Duration::from_secs(1);

const FD_INSTANCES: usize = 50;
const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-5;
const FD_BUDGET: Duration = Duration::from_secs(30);

const SANDWICH_PAIRS: usize = 1000;
const SANDWICH_SLACK: f64 = 1e-12;

const MC_INSTANCES: u64 = 20;
const MC_TRIALS: u64 = 100_000;
const MC_TARGET: f64 = 1e-2;
const MC_SIGMAS: f64 = 3.0;
const MC_BUDGET: Duration = Duration::from_secs(300);

const SWEEP_SYMBOLS: usize = 200;
const SWEEP_TAUS: [f64; 4] = [1.0, 4.0, 7.0, 10.0];
const SWEEP_SIZES: [usize; 2] = [30, 60];
const SWEEP_SEED: u64 = 2024;
const REF_LEVEL_N30: f64 = -15.7358;
const REF_LEVEL_N60: f64 = -22.5871;
const REF_GAP: f64 = 6.85;
const GAP_TOL_DB: f64 = 1.5;
const LEVEL_TOL_DB: f64 = 1.5;
const SWEEP_BUDGET: Duration = Duration::from_secs(20 * 60);

const MANIFOLD_TOL: f64 = 1e-10;
const GRID_POINTS: usize = 10_000;
const GRID_GAP: f64 = 1e-6;

const SCALING_SIZES: [usize; 3] = [32, 64, 128];
const SCALING_EXPONENT: f64 = 2.0;

struct Line {
    id: &'static str,
    passed: bool,
    gating: bool,
    text: String,
}

fn line(id: &'static str, passed: bool, gating: bool, text: String) -> Line {
    let tag = match (passed, gating) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FAIL (reported, non-gating)",
    };
    println!("[{id}] {tag}: {text}");
    Line {
        id,
        passed,
        gating,
        text,
    }
}

fn random_problem(
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (ChannelSet, SymbolVector, PskConstellation, DirectionMatrices) {
    let psk = PskConstellation::new(4).unwrap();
    let cs = ChannelSet::generate_rayleigh(n, k, 1.0, rng).unwrap();
    let s = psk.random_symbols(k, rng).unwrap();
    let dirs = DirectionMatrices::build(&cs.rotate(&s, &psk).unwrap(), psk.half_angle());
    (cs, s, psk, dirs)
}

fn closed_form() -> Line {
    let psk = PskConstellation::new(4).unwrap();
    let inst = Instance::with_tau(
        ChannelSet::ones(1, 1, 1.0).unwrap(),
        SymbolVector::new(vec![0], &psk).unwrap(),
        psk,
        3.0,
    )
    .unwrap();
    let exact = 2.0 * erfc_inv(1e-3).powi(2);
    let t = Instant::now();
    let res = bisect(&inst, &BisectionConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let dt = t.elapsed();
    let rel = (res.p_opt - exact).abs() / exact;
    line(
        "1 closed form",
        rel <= CLOSED_FORM_REL_TOL && dt < CLOSED_FORM_BUDGET,
        true,
        format!("P = {:.6} vs {exact:.6}, rel err {rel:.1e} (tol {CLOSED_FORM_REL_TOL:.0e}), {dt:.2?} (budget {CLOSED_FORM_BUDGET:?})", res.p_opt),
    )
}

fn gradients() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let shapes = [(4, 2), (4, 5), (16, 2), (16, 5), (32, 2), (32, 5)];
    let (mut worst_f0, mut worst_v0) = (0.0f64, 0.0f64);
    let t = Instant::now();
    for i in 0..FD_INSTANCES {
        let (n, k) = shapes[i % shapes.len()];
        let (_, _, _, dirs) = random_problem(n, k, &mut rng);
        let theta = PhasePoint::random(n, &mut rng).unwrap();
        // A power that keeps every erfc term away from saturation.
        let power = 1.0 / n as f64 * rng.random_range(0.5..2.0);
        let targets: Vec<f64> = (0..k).map(|_| 10f64.powf(-rng.random_range(1.0..4.0))).collect();
        let problem = FeasibilityProblem::new(&dirs, &targets, power, 1.0).unwrap();
        let g = problem.f_smooth_grad(theta.matrix());
        worst_f0 = worst_f0.max(gradient_error(|x| problem.f_smooth(x), &g, theta.matrix(), FD_STEP));
        let g = v_init_grad(theta.matrix(), &dirs);
        worst_v0 = worst_v0.max(gradient_error(|x| v_init(x, &dirs), &g, theta.matrix(), FD_STEP));
    }
    let dt = t.elapsed();
    line(
        "2 gradients",
        worst_f0 <= FD_REL_TOL && worst_v0 <= FD_REL_TOL && dt < FD_BUDGET,
        true,
        format!(
            "{FD_INSTANCES} instances, worst rel err f0 {worst_f0:.1e}, v0 {worst_v0:.1e} (tol {FD_REL_TOL:.0e}), {dt:.2?}"
        ),
    )
}

fn sandwich() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..SANDWICH_PAIRS {
        let n = rng.random_range(1..40);
        let k = rng.random_range(1..8);
        let (_, _, _, dirs) = random_problem(n, k, &mut rng);
        let targets: Vec<f64> = (0..k).map(|_| 10f64.powf(-rng.random_range(0.5..10.0))).collect();
        let power = 10f64.powf(rng.random_range(-3.0..2.0));
        let problem = FeasibilityProblem::new(&dirs, &targets, power, 1.0).unwrap();
        let theta = PhasePoint::random(n, &mut rng).unwrap();
        let f = problem.f_max(theta.matrix());
        let f0 = problem.f_smooth(theta.matrix());
        if f0 < f - SANDWICH_SLACK || f0 > f + (k as f64).ln() + SANDWICH_SLACK {
            violations += 1;
        }
    }
    line(
        "3 LSE sandwich",
        violations == 0,
        true,
        format!("{violations} violations in {SANDWICH_PAIRS} pairs (slack {SANDWICH_SLACK:.0e})"),
    )
}

fn union_bound_end_to_end() -> Line {
    let psk = PskConstellation::new(4).unwrap();
    let t = Instant::now();
    let mut worst_margin = f64::NEG_INFINITY;
    let mut all_ok = true;
    for seed in 0..MC_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let cs = ChannelSet::generate_rayleigh(30, 5, 1.0, &mut rng).unwrap();
        let s = psk.random_symbols(5, &mut rng).unwrap();
        let inst = Instance::with_tau(cs, s, psk.clone(), 2.0).unwrap();
        let res = bisect(&inst, &BisectionConfig::default(), &mut rng).unwrap();
        let est = simulate_sep(
            &res.theta_opt,
            res.p_opt,
            &inst.channels,
            &inst.symbols,
            &psk,
            MC_TRIALS,
            &mut rng,
        )
        .unwrap();
        all_ok &= res.feasible && est.within(&inst.targets, MC_SIGMAS);
        for (r, se) in est.per_user_sep.iter().zip(&est.stderr) {
            worst_margin = worst_margin.max(r - (MC_TARGET + MC_SIGMAS * se));
        }
    }
    let dt = t.elapsed();
    line(
        "4 union bound",
        all_ok && dt < MC_BUDGET,
        true,
        format!(
            "{MC_INSTANCES} instances x {MC_TRIALS} trials, worst (SEP - target - 3 SE) = {worst_margin:.2e} (must be <= 0), {dt:.2?}"
        ),
    )
}

fn sweep_config() -> SweepConfig {
    SweepConfig {
        n_list: SWEEP_SIZES.to_vec(),
        tau_list: SWEEP_TAUS.to_vec(),
        symbol_count: SWEEP_SYMBOLS,
        seed: SWEEP_SEED,
        ..SweepConfig::default()
    }
}

fn level(records: &[SweepRecord], n: usize, tau: f64) -> f64 {
    records.iter().find(|r| r.n == n && r.tau == tau).unwrap().avg_p_n_db
}

fn sweep_trends(records: &[SweepRecord], dt: Duration) -> Vec<Line> {
    let mut out = Vec::new();
    for r in records {
        println!(
            "      N={:<3} tau={:<4} avg P_n = {:8.4} dB ({} solved)",
            r.n, r.tau, r.avg_p_n_db, r.solved
        );
    }
    let rising = SWEEP_SIZES.iter().all(|&n| {
        SWEEP_TAUS
            .windows(2)
            .all(|w| level(records, n, w[1]) > level(records, n, w[0]))
    });
    out.push(line(
        "5a trend in tau",
        rising,
        true,
        "avg P_n strictly increasing in tau for each N".into(),
    ));
    let falling = SWEEP_TAUS
        .iter()
        .all(|&t| level(records, 60, t) < level(records, 30, t));
    out.push(line(
        "5b trend in N",
        falling,
        true,
        "avg P_n strictly decreasing in N for each tau".into(),
    ));
    let (l30, l60) = (level(records, 30, 1.0), level(records, 60, 1.0));
    let gap = l30 - l60;
    out.push(line(
        "5c gap",
        (gap - REF_GAP).abs() <= GAP_TOL_DB,
        true,
        format!("N=30 -> 60 gap at tau=1 = {gap:.3} dB (expected {REF_GAP} +- {GAP_TOL_DB})"),
    ));
    for (n, got, want) in [(30, l30, REF_LEVEL_N30), (60, l60, REF_LEVEL_N60)] {
        out.push(line(
            if n == 30 { "5d level N=30" } else { "5d level N=60" },
            (got - want).abs() <= LEVEL_TOL_DB,
            false,
            format!(
                "tau=1 level {got:.3} dB vs {want} (+- {LEVEL_TOL_DB}), off by {:+.3} dB",
                got - want
            ),
        ));
    }
    out.push(line(
        "5e runtime",
        dt < SWEEP_BUDGET,
        true,
        format!("single-threaded sweep took {dt:.2?} (budget {SWEEP_BUDGET:?})"),
    ));
    out
}

struct NormWatch<C> {
    inner: C,
    worst: Cell<f64>,
}

impl<C: CostFunction> NormWatch<C> {
    fn note(&self, theta: &Matrix2xX<f64>) {
        let err = theta.column_iter().map(|c| (c.norm() - 1.0).abs()).fold(0.0, f64::max);
        self.worst.set(self.worst.get().max(err));
    }
}

impl<C: CostFunction> CostFunction for NormWatch<C> {
    fn cost(&self, theta: &Matrix2xX<f64>) -> f64 {
        self.note(theta);
        self.inner.cost(theta)
    }

    fn cost_and_gradient(&self, theta: &Matrix2xX<f64>) -> (f64, Matrix2xX<f64>) {
        self.note(theta);
        self.inner.cost_and_gradient(theta)
    }
}

fn manifold_suite() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_norm = 0.0f64;
    let mut monotone = true;
    for _ in 0..20 {
        let (cs, s, psk, dirs) = random_problem(30, 5, &mut rng);
        let inst = Instance::new(cs, s, psk, vec![1e-2; 5]).unwrap();
        let res = bisect(&inst, &BisectionConfig::default(), &mut rng).unwrap();
        let init = NormWatch {
            inner: InitObjective::new(&dirs),
            worst: Cell::new(0.0),
        };
        let r0 = minimize(
            &init,
            PhasePoint::random(30, &mut rng).unwrap(),
            &RcgConfig::for_initialization(),
        )
        .unwrap();
        let problem = FeasibilityProblem::new(&dirs, &inst.targets, res.p_opt, 1.0).unwrap();
        let feas = NormWatch {
            inner: &problem,
            worst: Cell::new(0.0),
        };
        let r1 = minimize(&feas, r0.final_point.clone(), &RcgConfig::default()).unwrap();
        worst_norm = worst_norm.max(init.worst.get()).max(feas.worst.get());
        monotone &= [&r0.value_trace, &r1.value_trace]
            .iter()
            .all(|t| t.windows(2).all(|w| w[1] <= w[0]));
    }

    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..20 {
        let k = rng.random_range(1..6);
        let (_, _, _, dirs) = random_problem(1, k, &mut rng);
        let grid = (0..GRID_POINTS)
            .map(|i| {
                v_init(
                    PhasePoint::from_phases(&[2.0 * PI * i as f64 / GRID_POINTS as f64])
                        .unwrap()
                        .matrix(),
                    &dirs,
                )
            })
            .fold(f64::INFINITY, f64::min);
        let start = PhasePoint::random(1, &mut rng).unwrap();
        let r = minimize(&InitObjective::new(&dirs), start, &RcgConfig::for_initialization()).unwrap();
        worst_gap = worst_gap.max(r.final_value - grid);
    }
    line(
        "6 manifold/RCG",
        worst_norm <= MANIFOLD_TOL && monotone && worst_gap <= GRID_GAP,
        true,
        format!(
            "max |col norm - 1| = {worst_norm:.1e} (tol {MANIFOLD_TOL:.0e}), value traces monotone: {monotone}, \
             N=1 gap to {GRID_POINTS}-point grid = {worst_gap:.1e} (tol {GRID_GAP:.0e})"
        ),
    )
}

fn scaling() -> Line {
    let mut medians = Vec::new();
    for &n in &SCALING_SIZES {
        let mut times: Vec<f64> = (0..5)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
                let (cs, s, psk, _) = random_problem(n, 5, &mut rng);
                let inst = Instance::with_tau(cs, s, psk, 2.0).unwrap();
                let t = Instant::now();
                bisect(&inst, &BisectionConfig::default(), &mut rng).unwrap();
                t.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        medians.push(times[2]);
    }
    let xs: Vec<f64> = SCALING_SIZES.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|t| t.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let ms: Vec<String> = medians.iter().map(|t| format!("{:.1} ms", t * 1e3)).collect();
    line(
        "7 scaling",
        slope < SCALING_EXPONENT,
        false,
        format!(
            "median bisect time at N={SCALING_SIZES:?}: {ms:?}, fitted exponent {slope:.2} (want < {SCALING_EXPONENT})"
        ),
    )
}

fn csv_bytes(records: &[SweepRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_sweep_csv(records, &mut buf).unwrap();
    buf
}

#[test]
fn acceptance() {
    let mut lines = vec![closed_form(), gradients(), sandwich(), union_bound_end_to_end()];

    let cfg = sweep_config();
    let t = Instant::now();
    let first = run_sweep_with_threads(&cfg, 1).unwrap();
    let dt = t.elapsed();
    lines.extend(sweep_trends(&first, dt));

    lines.push(manifold_suite());
    lines.push(scaling());

    let again = run_sweep_with_threads(&cfg, 1).unwrap();
    let threaded = run_sweep_with_threads(&cfg, 3).unwrap();
    let same = csv_bytes(&first) == csv_bytes(&again) && csv_bytes(&first) == csv_bytes(&threaded);
    lines.push(line(
        "8 determinism",
        same,
        true,
        "repeat run (1 thread) and 3-thread run reproduce every CSV byte".into(),
    ));

    let failed: Vec<String> = lines
        .iter()
        .filter(|l| l.gating && !l.passed)
        .map(|l| format!("{}: {}", l.id, l.text))
        .collect();
    assert!(failed.is_empty(), "gating criteria failed:\n{}", failed.join("\n"));
}
