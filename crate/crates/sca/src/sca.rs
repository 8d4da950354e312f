//! The successive convex approximation loop and the baseline schemes.

use crate::init::{best_candidate, codebook_monotone, primary_start, spec_pool, structured_candidate, Candidate};
use crate::lifted::{AuxiliarySet, LiftResiduals};
use crate::model::{LiftOptions, Model, Point, Scheme};
use crate::subproblem::{assemble_subproblem, AssembleOptions, Goal, Linearization, Subproblem};
use num_complex::Complex64 as C64;
use std::time::Instant;
use symbiosr_conic::{solve, ConicError, SolveReport, SolveStatus, SolverOptions};
use symbiosr_core::rng::{stream, uniform_phase};
use symbiosr_core::scenario::{ChannelRealization, ScenarioConfig};
use symbiosr_core::signal::{BeamformingSolution, IrsCodebook};

#[derive(Debug, thiserror::Error)]
pub enum ScaError {
    #[error("subproblem at iteration {iteration} ended with {status:?} after a relaxed retry")]
    Solver { iteration: usize, status: SolveStatus },
    #[error(transparent)]
    Model(#[from] ConicError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub lift: LiftOptions,
    pub solver: SolverOptions,
    pub tau_max: usize,
    /// Relative objective change that counts as convergence.
    pub rel_tol: f64,
    /// Largest `‖U − g gᴴ‖_F / ‖U‖_F` accepted at convergence.
    pub lift_tol: f64,
    pub rho_init: f64,
    pub rho_min: f64,
    /// Lift residual above which the penalty weight is raised.
    pub loose_tol: f64,
    pub rho_max: f64,
    /// Random starts of the initialization pool.
    pub restarts: usize,
    /// Restoration iterations when no start meets the SER target.
    pub restore_iters: usize,
    /// Root of the initialization streams.
    pub seed: u64,
    /// Search along the direction of each accepted step for a longer one.
    pub extrapolate: bool,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            lift: LiftOptions::default(),
            solver: SolverOptions::default(),
            tau_max: 50,
            rel_tol: 1e-4,
            lift_tol: 1e-4,
            rho_init: 10.0,
            rho_min: 1e-2,
            loose_tol: 1e-3,
            rho_max: 1e6,
            restarts: 20,
            restore_iters: 15,
            seed: 0,
            extrapolate: true,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    /// `τ_max` reached.
    IterationLimit,
    /// The penalty weight grew past its cap without another accepted step.
    Stalled,
    /// No start point meets the SER target.
    InfeasibleAtInit,
    /// A subproblem could not be solved; the last accepted point is kept.
    SubproblemFailed,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::IterationLimit => "iteration-limit",
            Verdict::Stalled => "stalled",
            Verdict::InfeasibleAtInit => "infeasible-at-init",
            Verdict::SubproblemFailed => "subproblem-failed",
        }
    }
}

/// One row of the iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// True objective of the incumbent after this iteration.
    pub objective: f64,
    /// True objective of the candidate the subproblem returned.
    pub candidate: f64,
    pub surrogate: f64,
    pub violation: f64,
    pub status: &'static str,
    pub seconds: f64,
    pub newton_steps: usize,
    pub rho: f64,
    pub lift_residual: f64,
    pub ser_bound: f64,
    /// Multiple of the subproblem step taken along its direction.
    pub step_scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScaTrace {
    pub entries: Vec<TraceEntry>,
}

impl ScaTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "iteration",
            "objective",
            "candidate",
            "surrogate",
            "violation",
            "status",
            "seconds",
            "newton_steps",
            "rho",
            "lift_residual",
            "ser_bound",
            "step_scale",
        ])?;
        for e in &self.entries {
            out.write_record([
                e.iteration.to_string(),
                e.objective.to_string(),
                e.candidate.to_string(),
                e.surrogate.to_string(),
                e.violation.to_string(),
                e.status.to_string(),
                e.seconds.to_string(),
                e.newton_steps.to_string(),
                e.rho.to_string(),
                e.lift_residual.to_string(),
                e.ser_bound.to_string(),
                e.step_scale.to_string(),
            ])?;
        }
        out.flush()
    }
}

/// The incumbent of a run.
#[derive(Debug, Clone)]
pub struct ScaState {
    pub iteration: usize,
    pub point: Point,
    pub aux: AuxiliarySet,
    pub objective: f64,
    pub report: Option<SolveReport>,
}

impl ScaState {
    pub fn new(model: &Model, point: Point, lift: LiftOptions) -> Self {
        let aux = AuxiliarySet::consistent(model, &point, lift);
        ScaState { iteration: 0, objective: model.sum_rate(&point), point, aux, report: None }
    }
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub scheme: Scheme,
    pub verdict: Verdict,
    pub point: Point,
    pub solution: BeamformingSolution,
    /// Average sum rate at the returned point, bits/s/Hz.
    pub sum_rate: f64,
    pub ser_bound: f64,
    /// The returned point meets the SER target with increasing levels.
    pub meets_ser: bool,
    pub iterations: usize,
    pub newton_steps: usize,
    /// Lift residual of the closing subproblem solve (zero when no
    /// subproblem ran).
    pub lift_residual: f64,
    pub trace: ScaTrace,
}

impl ScaOutcome {
    /// Rate that enters averages: zero for penalized schemes that miss the
    /// SER target.
    pub fn scored_rate(&self) -> f64 {
        if self.scheme.penalized() && !self.meets_ser {
            0.0
        } else {
            self.sum_rate
        }
    }
}

/// Result of one subproblem solve.
#[derive(Debug, Clone)]
pub struct Step {
    pub subproblem: Subproblem,
    pub report: SolveReport,
    /// Point as solved, before the unit-modulus projection.
    pub raw: Point,
    pub point: Point,
    pub aux: AuxiliarySet,
    pub residuals: LiftResiduals,
    pub seconds: f64,
}

fn relaxed(o: &SolverOptions) -> SolverOptions {
    SolverOptions {
        feas_tol: o.feas_tol * 10.0,
        kkt_tol: o.kkt_tol * 100.0,
        max_iter: o.max_iter * 2,
        mu: o.mu.min(5.0),
    }
}

/// Builds and solves the subproblem at `anchor`, with one relaxed retry.
pub fn solve_step(
    model: &Model,
    anchor: &ScaState,
    assemble: AssembleOptions,
    solver: &SolverOptions,
) -> Result<Step, ScaError> {
    let start = Instant::now();
    let lin = Linearization::new(model, &anchor.point, &anchor.aux);
    let sp = assemble_subproblem(model, &lin, assemble)?;
    let mut report = solve(&sp.program, solver);
    if !report.is_optimal() {
        let retry = solve(&sp.program, &relaxed(solver));
        let steps = report.iterations;
        report = retry;
        report.iterations += steps;
    }
    if !report.is_optimal() {
        return Err(ScaError::Solver { iteration: anchor.iteration, status: report.status });
    }
    let raw = sp.extract_point(model, &report.x);
    let aux = sp.extract_aux(model, &report.x);
    let residuals = aux.lift_residuals(model, &raw);
    let mut point = raw.clone().unit_modulus();
    // Solver round-off may leave the stacked precoders a hair above the budget.
    let pw = point.total_power();
    if pw > 1.0 {
        let s = C64::new(1.0 / pw.sqrt(), 0.0);
        for w in &mut point.w {
            *w *= s;
        }
    }
    Ok(Step { subproblem: sp, report, raw, point, aux, residuals, seconds: start.elapsed().as_secs_f64() })
}

fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    a - t * ((a + std::f64::consts::PI) / t).floor()
}

/// `anchor + α (next − anchor)` in phase angles and precoders, projected
/// back onto unit modulus and the power budget.
pub fn along(anchor: &Point, next: &Point, alpha: f64) -> Point {
    let phi = anchor
        .phi
        .iter()
        .zip(&next.phi)
        .map(|(a, b)| C64::from_polar(1.0, a.arg() + alpha * wrap(b.arg() - a.arg())))
        .collect();
    let mut w: Vec<_> = anchor.w.iter().zip(&next.w).map(|(a, b)| a + (b - a) * C64::new(alpha, 0.0)).collect();
    let pw: f64 = w.iter().map(|v| v.norm_squared()).sum();
    if pw > 1.0 {
        let s = C64::new(1.0 / pw.sqrt(), 0.0);
        for v in &mut w {
            *v *= s;
        }
    }
    Point { w, phi }
}

/// Best multiple of the step from `anchor` to `next` by true objective,
/// subject to the SER target. When `next` itself improves, doublings are
/// tried while they keep improving; otherwise halvings are tried until one
/// improves on the anchor. Returns `next` with scale 1 when nothing does.
pub fn extrapolate(model: &Model, anchor: &Point, next: &Point, anchor_value: f64) -> (Point, f64) {
    let ok = |p: &Point| !model.has_su() || meets_ser(model, p, model.p_e_max);
    let value = model.sum_rate(next);
    if value < anchor_value || !ok(next) {
        let mut alpha = 0.5;
        while alpha >= 1.0 / 16.0 {
            let p = along(anchor, next, alpha);
            if model.sum_rate(&p) > anchor_value && ok(&p) {
                return (p, alpha);
            }
            alpha *= 0.5;
        }
        return (next.clone(), 1.0);
    }
    let mut best = (next.clone(), 1.0, value);
    let mut alpha = 2.0;
    while alpha <= 64.0 {
        let p = along(anchor, next, alpha);
        let v = model.sum_rate(&p);
        if v <= best.2 || !ok(&p) {
            break;
        }
        best = (p, alpha, v);
        alpha *= 2.0;
    }
    (best.0, best.1)
}

/// Whether the secondary user's constraint holds at `point` for `target`.
pub fn meets_ser(model: &Model, point: &Point, target: f64) -> bool {
    codebook_monotone(&model.su_powers(point)) && model.ser_bound(point) <= target
}

/// Runs the penalty SCA from a feasible `start`.
pub fn run_from(model: &Model, start: Point, opts: &ScaOptions) -> Result<ScaOutcome, ScaError> {
    let lift = opts.lift;
    let mut state = ScaState::new(model, start, lift);
    let mut trace = ScaTrace::default();
    let mut rho = opts.rho_init;
    let mut p_target = model.p_e_max;
    let mut newton = 0;
    let mut verdict = Verdict::IterationLimit;
    let tol = 10.0 * opts.solver.feas_tol;
    for tau in 1..=opts.tau_max {
        state.iteration = tau - 1;
        let assemble = AssembleOptions { goal: Goal::SumRate, lift, rho, p_target };
        // The incumbent is feasible and already verified, so a subproblem
        // the solver cannot handle ends the run instead of discarding it.
        let Ok(step) = solve_step(model, &state, assemble, &opts.solver) else {
            verdict = Verdict::SubproblemFailed;
            break;
        };
        newton += step.report.iterations;
        let (point, alpha) = if opts.extrapolate {
            extrapolate(model, &state.point, &step.point, state.objective)
        } else {
            (step.point.clone(), 1.0)
        };
        let candidate = model.sum_rate(&point);
        let ser_ok = !model.has_su() || meets_ser(model, &point, model.p_e_max);
        let accept = candidate >= state.objective - tol && ser_ok;
        let previous = state.objective;
        let residual = step.residuals.u_rel.max(step.residuals.f_rel);
        if accept {
            state = ScaState {
                iteration: tau,
                aux: AuxiliarySet::consistent(model, &point, lift),
                objective: candidate,
                point: point.clone(),
                report: Some(step.report.clone()),
            };
        }
        trace.entries.push(TraceEntry {
            iteration: tau,
            objective: state.objective,
            candidate,
            surrogate: step.report.objective,
            violation: step.report.max_violation,
            status: if accept { "accepted" } else { "rejected" },
            seconds: step.seconds,
            newton_steps: step.report.iterations,
            rho,
            lift_residual: residual,
            ser_bound: if model.has_su() { model.ser_bound(&point) } else { f64::NAN },
            step_scale: alpha,
        });
        if !accept {
            rho *= 8.0;
            if !ser_ok {
                p_target *= 0.95;
            }
        } else if residual > opts.loose_tol {
            // The step used the relaxation rather than the rank-one
            // structure; the weight is below the exactness threshold.
            rho *= 4.0;
        } else {
            let change = (candidate - previous).abs() / previous.abs().max(1e-12);
            if change <= opts.rel_tol {
                if residual <= opts.lift_tol {
                    verdict = Verdict::Converged;
                    break;
                }
                rho *= 10.0;
            } else {
                rho = (rho * 0.5).max(opts.rho_min);
            }
        }
        if rho > opts.rho_max {
            verdict = Verdict::Stalled;
            break;
        }
    }
    let lift_residual = match trace.entries.last() {
        Some(e) if verdict == Verdict::Converged => e.lift_residual,
        _ if verdict == Verdict::SubproblemFailed => {
            trace.entries.iter().rev().find(|e| e.status == "accepted").map_or(0.0, |e| e.lift_residual)
        }
        Some(_) => tighten(model, &mut state, &mut trace, &mut newton, rho, p_target, opts)?,
        None => 0.0,
    };
    let mut out = finish(model, state.point, verdict, trace, newton);
    out.lift_residual = lift_residual;
    Ok(out)
}

/// Closing solve at the final iterate with the weight raised until the
/// lifts come back rank one, so the returned point is a step of an exact
/// surrogate. Its point is taken when it improves. Returns the residual.
fn tighten(
    model: &Model,
    state: &mut ScaState,
    trace: &mut ScaTrace,
    newton: &mut usize,
    rho: f64,
    p_target: f64,
    opts: &ScaOptions,
) -> Result<f64, ScaError> {
    let mut rho = rho.max(opts.rho_init);
    let tol = 10.0 * opts.solver.feas_tol;
    loop {
        let assemble = AssembleOptions { goal: Goal::SumRate, lift: opts.lift, rho, p_target };
        let step = solve_step(model, state, assemble, &opts.solver)?;
        *newton += step.report.iterations;
        let residual = step.residuals.u_rel.max(step.residuals.f_rel);
        if residual > opts.lift_tol && rho * 10.0 <= opts.rho_max {
            rho *= 10.0;
            continue;
        }
        let candidate = model.sum_rate(&step.point);
        let accept = candidate >= state.objective - tol && (!model.has_su() || meets_ser(model, &step.point, model.p_e_max));
        if accept {
            *state = ScaState {
                iteration: state.iteration + 1,
                aux: AuxiliarySet::consistent(model, &step.point, opts.lift),
                objective: candidate,
                point: step.point.clone(),
                report: Some(step.report.clone()),
            };
        }
        trace.entries.push(TraceEntry {
            iteration: trace.len() + 1,
            objective: state.objective,
            candidate,
            surrogate: step.report.objective,
            violation: step.report.max_violation,
            status: if accept { "final" } else { "final-rejected" },
            seconds: step.seconds,
            newton_steps: step.report.iterations,
            rho,
            lift_residual: residual,
            ser_bound: if model.has_su() { model.ser_bound(&step.point) } else { f64::NAN },
            step_scale: 1.0,
        });
        return Ok(residual);
    }
}

fn finish(model: &Model, point: Point, verdict: Verdict, trace: ScaTrace, newton_steps: usize) -> ScaOutcome {
    let ser_bound = model.ser_bound(&point);
    let meets = match model.scheme {
        Scheme::AllOnUpper => true,
        _ => meets_ser(model, &point, model.p_e_max),
    };
    ScaOutcome {
        scheme: model.scheme,
        verdict,
        solution: model.to_solution(&point),
        sum_rate: model.sum_rate(&point),
        ser_bound,
        meets_ser: meets,
        iterations: trace.len(),
        newton_steps,
        lift_residual: 0.0,
        point,
        trace,
    }
}

/// Outcome of the start-point search.
#[derive(Debug, Clone)]
pub enum InitVerdict {
    Feasible(Point),
    /// Best start found, which misses the SER target.
    InfeasibleAtInit(Option<Point>),
}

/// Searches for a start that meets the SER target: random draws first,
/// then built phases, then restoration steps that shrink the tail sum.
pub fn initialize_feasible(model: &Model, opts: &ScaOptions) -> Result<InitVerdict, ScaError> {
    if !model.has_su() {
        return Ok(InitVerdict::Feasible(primary_start(model, opts.seed)));
    }
    let target = model.p_e_max;
    let mut cands = spec_pool(model, opts.seed, opts.restarts);
    if let Some(c) = best_candidate(&cands, target) {
        if c.meets(target) {
            return Ok(InitVerdict::Feasible(c.point.clone()));
        }
    }
    for attempt in 0..crate::init::STRUCTURED_ATTEMPTS {
        if let Some(c) = structured_candidate(model, opts.seed, attempt) {
            cands.push(c);
        }
    }
    cands.extend(crate::init::fixed_phase_candidates(model));
    let Some(best) = best_candidate(&cands, target).cloned() else {
        return Ok(InitVerdict::InfeasibleAtInit(None));
    };
    if best.meets(target) {
        return Ok(InitVerdict::Feasible(best.point));
    }
    restore(model, best, opts)
}

/// Shrinks the tail sum from a start with increasing levels.
fn restore(model: &Model, start: Candidate, opts: &ScaOptions) -> Result<InitVerdict, ScaError> {
    let target = model.p_e_max;
    let mut best = start;
    let mut state = ScaState::new(model, best.point.clone(), opts.lift);
    let mut rho = opts.rho_init;
    for it in 0..opts.restore_iters {
        state.iteration = it;
        let assemble = AssembleOptions { goal: Goal::Restore, lift: opts.lift, rho, p_target: target };
        let step = match solve_step(model, &state, assemble, &opts.solver) {
            Ok(s) => s,
            Err(ScaError::Solver { .. }) => break,
            Err(e) => return Err(e),
        };
        let c = Candidate::new(model, step.point.clone());
        if c.monotone && c.bound < best.bound {
            let gain = (best.bound - c.bound) / best.bound;
            best = c;
            state = ScaState::new(model, best.point.clone(), opts.lift);
            if best.meets(target) {
                return Ok(InitVerdict::Feasible(best.point));
            }
            rho = (rho * 0.5).max(opts.rho_min);
            if gain < 1e-4 {
                break;
            }
        } else {
            rho *= 8.0;
            if rho > opts.rho_max {
                break;
            }
        }
    }
    Ok(InitVerdict::InfeasibleAtInit(Some(best.point)))
}

/// Phases frozen by the random-phase baseline for one realization.
pub fn random_phases(seed: u64, m: usize) -> Vec<f64> {
    let mut rng = stream(seed, "baseline/random-phase");
    (0..m).map(|_| uniform_phase(&mut rng)).collect()
}

/// Runs one scheme on one realization.
pub fn run_scheme(
    scheme: Scheme,
    config: &ScenarioConfig,
    ch: &ChannelRealization,
    codebook: &IrsCodebook,
    opts: &ScaOptions,
) -> Result<ScaOutcome, ScaError> {
    let phases = random_phases(ch.seed, ch.n_irs());
    let model = Model::new(config, ch, codebook, scheme, Some(&phases));
    run_model(&model, opts)
}

/// Runs the proposed scheme.
pub fn run_sca(
    config: &ScenarioConfig,
    ch: &ChannelRealization,
    codebook: &IrsCodebook,
    opts: &ScaOptions,
) -> Result<ScaOutcome, ScaError> {
    run_scheme(Scheme::Proposed, config, ch, codebook, opts)
}

/// Runs a baseline; `Scheme::Proposed` is accepted too.
pub fn run_baseline(
    kind: Scheme,
    config: &ScenarioConfig,
    ch: &ChannelRealization,
    codebook: &IrsCodebook,
    opts: &ScaOptions,
) -> Result<ScaOutcome, ScaError> {
    run_scheme(kind, config, ch, codebook, opts)
}

pub fn run_model(model: &Model, opts: &ScaOptions) -> Result<ScaOutcome, ScaError> {
    match initialize_feasible(model, opts)? {
        InitVerdict::Feasible(p) => run_from(model, p, opts),
        InitVerdict::InfeasibleAtInit(p) => {
            let point = p.unwrap_or_else(|| primary_start(model, opts.seed));
            Ok(finish(model, point, Verdict::InfeasibleAtInit, ScaTrace::default(), 0))
        }
    }
}
