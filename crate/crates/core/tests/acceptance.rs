//! Exit criteria, one line per criterion. Run with
//! `cargo test -p symext-core --test acceptance`.

mod common;

use std::f64::consts::FRAC_1_SQRT_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use symext::bounds::{find_cutoff, one_way_upper_bound, BoundPoint};
use symext::extendibility::{
    best_extendible_decomposition, build_sdp, verify_extension, DECOMPOSITION_TOL, MARGINAL_TOL, PARTIAL_TRACE_TOL,
    SWAP_TOL,
};
use symext::linalg::{c, CMatrix};
use symext::protocols::{Direction, ProtocolSpec};
use symext::sdp::{solve, HermitianBlock, SdpProblem, SdpSettings, SdpSolution};
use symext::EquivalenceClassSpec;

const CUTOFF_TOL: f64 = 0.002;
const CUTOFF_TIME: Duration = Duration::from_secs(120);
const GRID_POINTS: usize = 15;
const GRID_MAX: f64 = 0.2;

fn grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| GRID_MAX * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

fn class(spec: ProtocolSpec) -> EquivalenceClassSpec {
    spec.assemble().unwrap().3
}

fn protocols(e: f64) -> [(&'static str, ProtocolSpec); 2] {
    [
        ("four-state", ProtocolSpec::four_state(e)),
        ("six-state", ProtocolSpec::six_state(e)),
    ]
}

/// Smallest `primal − dual` over every primal- and dual-feasible iterate of
/// every solve.
#[derive(Default)]
struct DualityLog {
    worst: f64,
    solves: usize,
    iterates: usize,
    infeasible: usize,
}

impl DualityLog {
    fn record(&mut self, sol: &SdpSolution) {
        self.solves += 1;
        for it in &sol.history {
            if it.is_feasible(SdpSettings::default().feas_tol) {
                self.iterates += 1;
                self.worst = self.worst.min(it.primal_objective - it.dual_objective);
            } else {
                self.infeasible += 1;
            }
        }
    }

    fn solve(&mut self, problem: &SdpProblem, settings: &SdpSettings) -> SdpSolution {
        let sol = solve(problem, settings).unwrap();
        self.record(&sol);
        sol
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn timed_cutoff(spec: ProtocolSpec) -> (f64, Duration) {
    let start = Instant::now();
    let cut = find_cutoff(&spec, 1e-4).unwrap();
    (cut.value, start.elapsed())
}

fn four_state_cutoff() -> Outcome {
    let exact = (1.0 - FRAC_1_SQRT_2) / 2.0;
    let mut pass_any = false;
    let mut all_fast = true;
    let mut parts = Vec::new();
    for (name, source) in [("EB", false), ("PM", true)] {
        let (value, elapsed) = timed_cutoff(ProtocolSpec::four_state(0.0).with_source_constraint(source));
        let ok = (value - 0.1464).abs() <= CUTOFF_TOL && (value - exact).abs() <= CUTOFF_TOL;
        pass_any |= ok;
        all_fast &= elapsed < CUTOFF_TIME;
        parts.push(format!(
            "{name} {value:.6} ({}, {:.2}s)",
            if ok { "matches" } else { "off" },
            elapsed.as_secs_f64()
        ));
    }
    Outcome::new(
        pass_any && all_fast,
        format!("target 0.1464 / {exact:.6}: {}", parts.join(", ")),
    )
}

fn six_state_cutoff() -> Outcome {
    let (value, elapsed) = timed_cutoff(ProtocolSpec::six_state(0.0));
    Outcome::new(
        (value - 1.0 / 6.0).abs() <= CUTOFF_TOL && elapsed < CUTOFF_TIME,
        format!("{value:.6} vs 1/6 ({:.2}s)", elapsed.as_secs_f64()),
    )
}

fn endpoint() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec) in protocols(0.0) {
        let p = one_way_upper_bound(&spec).unwrap();
        pass &= p.is_ok() && (p.upper_bound - 1.0).abs() <= 1e-4;
        parts.push(format!("{name} {:.8}", p.upper_bound));
    }
    Outcome::new(pass, parts.join(", "))
}

fn identity_defect(p: &BoundPoint) -> f64 {
    (p.upper_bound - (1.0 - p.lambda_max) * p.mutual_info_ne).abs()
}

fn certificates(log: &mut DualityLog) -> Outcome {
    let mut failures = Vec::new();
    let mut worst = [0.0f64; 5];
    let mut checked = 0;
    for e in grid() {
        for (name, spec) in protocols(e) {
            let cl = class(spec.clone());
            log.solve(&build_sdp(&cl).unwrap().0, &SdpSettings::default());
            let result = best_extendible_decomposition(&cl).unwrap();
            let report = verify_extension(&result).unwrap();
            let point = one_way_upper_bound(&spec).unwrap();
            let id = identity_defect(&point);
            for (w, v) in worst.iter_mut().zip([
                report.decomposition,
                report.swap,
                report.partial_trace,
                report.marginal_equality,
                id,
            ]) {
                *w = w.max(v);
            }
            let ok = report.decomposition < DECOMPOSITION_TOL
                && report.swap < SWAP_TOL
                && report.partial_trace < PARTIAL_TRACE_TOL
                && report.marginal_equality < MARGINAL_TOL
                && report.passes()
                && point.is_ok()
                && id < 1e-9;
            if !ok {
                failures.push(format!("{name} e={e:.4}"));
            }
            checked += 1;
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{checked} points, max residuals decomposition {:.1e}, swap {:.1e}, partial trace {:.1e}, marginals {:.1e}, identity {:.1e}{}",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            worst[4],
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for e in [0.05, 0.10, 0.14] {
        let cl = class(ProtocolSpec::six_state(e));
        let joint = best_extendible_decomposition(&cl).unwrap().lambda_max;
        let oracle = common::lambda_by_bisection(&cl, 1e-6);
        let diff = (joint - oracle).abs();
        pass &= diff <= 1e-4;
        parts.push(format!("e={e:.2} {joint:.6}/{oracle:.6}"));
    }
    Outcome::new(pass, format!("joint/bisection: {}", parts.join(", ")))
}

fn scalar(constant: f64, coeff: f64) -> HermitianBlock {
    let mut b = HermitianBlock::new(1).with_constant(CMatrix::from_element(1, 1, c(constant, 0.0)));
    b.add_term(0, CMatrix::from_element(1, 1, c(coeff, 0.0)));
    b
}

fn solver_validation(log: &mut DualityLog) -> Outcome {
    let tight = SdpSettings {
        gap_tol: 1e-10,
        feas_tol: 1e-10,
        ..SdpSettings::default()
    };
    // minimize x  s.t.  x − 1 ⪰ 0
    let mut lp = SdpProblem::new(1);
    lp.set_objective(vec![1.0]);
    lp.add_block(scalar(-1.0, 1.0));
    let lp_err = (log.solve(&lp, &tight).x[0] - 1.0).abs();

    // maximize t  s.t.  diag(1, 2) − t·I ⪰ 0
    let mut eig = SdpProblem::new(1);
    eig.set_objective(vec![-1.0]);
    let mut b = HermitianBlock::new(2).with_constant(common::real(&[1.0, 0.0, 0.0, 2.0], 2));
    b.add_term(0, CMatrix::identity(2, 2).scale(-1.0));
    eig.add_block(b);
    let eig_err = (log.solve(&eig, &tight).x[0] - 1.0).abs();

    let mut grid_err = 0.0f64;
    for seed in 0..4 {
        let lmi = common::RandomLmi::new(100 + seed);
        let sol = log.solve(&lmi.problem(), &tight);
        grid_err = grid_err.max((sol.primal_objective - lmi.grid_minimum()).abs());
    }
    Outcome::new(
        lp_err <= 1e-8 && eig_err <= 1e-8 && grid_err <= 1e-3,
        format!("scalar {lp_err:.1e}, min-eigenvalue {eig_err:.1e}, grid oracle {grid_err:.1e}"),
    )
}

fn monotone_in_protocol(log: &mut DualityLog) -> Outcome {
    let mut worst = f64::INFINITY;
    for e in grid() {
        let four = class(ProtocolSpec::four_state(e));
        let six = class(ProtocolSpec::six_state(e));
        log.solve(&build_sdp(&four).unwrap().0, &SdpSettings::default());
        let l4 = best_extendible_decomposition(&four).unwrap().lambda_max;
        let l6 = best_extendible_decomposition(&six).unwrap().lambda_max;
        worst = worst.min(l4 - l6);
    }
    Outcome::new(worst >= -1e-8, format!("min λ(four) − λ(six) = {worst:.2e}"))
}

fn direction_symmetry(log: &mut DualityLog) -> Outcome {
    let mut worst = 0.0f64;
    for e in grid() {
        for (_, spec) in protocols(e) {
            let reverse = class(spec.clone().with_direction(Direction::Reverse));
            log.solve(&build_sdp(&reverse).unwrap().0, &SdpSettings::default());
            let a = best_extendible_decomposition(&class(spec)).unwrap().lambda_max;
            let b = best_extendible_decomposition(&reverse).unwrap().lambda_max;
            worst = worst.max((a - b).abs());
        }
    }
    Outcome::new(worst <= 1e-6, format!("max |λ(direct) − λ(reverse)| = {worst:.2e}"))
}

fn below_raw_information() -> Outcome {
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for e in grid() {
        for (name, spec) in protocols(e) {
            let p = one_way_upper_bound(&spec).unwrap();
            let excess = p.upper_bound - p.raw_mutual_info;
            worst = worst.max(excess);
            if excess > 1e-6 {
                violations.push(format!(
                    "{name} e={e:.4}: {:.4} > {:.4}",
                    p.upper_bound, p.raw_mutual_info
                ));
            }
        }
    }
    Outcome::new(
        violations.is_empty(),
        format!(
            "max bound − I(A;B) = {worst:.3e}{}",
            if violations.is_empty() {
                String::new()
            } else {
                format!("; exceeded at {}", violations.join(", "))
            }
        ),
    )
}

fn not_tight() -> Outcome {
    let (lo, hi) = (0.15, 1.0 / 6.0);
    let mut min_bound = f64::INFINITY;
    for k in 1..20 {
        let e = lo + (hi - lo) * k as f64 / 20.0;
        let p = one_way_upper_bound(&ProtocolSpec::six_state(e)).unwrap();
        min_bound = min_bound.min(if p.is_ok() { p.upper_bound } else { f64::NAN });
    }
    let at_163 = one_way_upper_bound(&ProtocolSpec::six_state(0.163))
        .unwrap()
        .upper_bound;
    let cut = find_cutoff(&ProtocolSpec::six_state(0.0), 1e-5).unwrap().value;
    Outcome::new(
        min_bound > 0.0 && at_163 > 0.0 && cut > 0.163,
        format!("min bound on (0.15, 1/6) {min_bound:.3e}, bound at 0.163 {at_163:.4}, cutoff {cut:.6}"),
    )
}

fn main() -> ExitCode {
    let mut log = DualityLog {
        worst: f64::INFINITY,
        ..DualityLog::default()
    };
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 four-state cutoff", four_state_cutoff()),
        ("2 six-state cutoff", six_state_cutoff()),
        ("3 bound at e = 0", endpoint()),
        ("4 decomposition certificates", certificates(&mut log)),
        ("5 bisection oracle", oracle_equivalence()),
    ];
    let validation = solver_validation(&mut log);
    let monotone = monotone_in_protocol(&mut log);
    let direction = direction_symmetry(&mut log);
    let duality = Outcome::new(
        log.worst >= -1e-9,
        format!(
            "min primal − dual {:.2e} over {} feasible iterates of {} solves ({} infeasible-start iterates)",
            log.worst, log.iterates, log.solves, log.infeasible
        ),
    );
    results.push(("6 solver validation", validation));
    results.push(("6 weak duality", duality));
    results.push(("7a four-state λ ≥ six-state λ", monotone));
    results.push(("7b direct = reverse", direction));
    results.push(("7c bound ≤ I(A;B)", below_raw_information()));
    results.push(("8 six-state positive below 1/6", not_tight()));

    let mut failed = 0;
    for (name, outcome) in &results {
        println!(
            "{} {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        failed += usize::from(!outcome.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
