//! Theorem-level experiments: the pointwise polarization comparison, the
//! symmetrization mass inequality with its induction chain, sausage
//! isoperimetry under common random numbers, and the PDE / Monte-Carlo
//! representation identity.
//!
//! The continuum statements are exact; on a grid each check carries an
//! explicit tolerance (scaled to the spacing, or to the Monte Carlo
//! confidence interval) and reports one of three verdicts: `holds` (margin
//! nonnegative), `holds_within_tol` (negative but within tolerance), or
//! `violated`. Reports are pure functions of their inputs and seeds.

use crate::geometry::{
    run_polarization_schedule, GeometryError, GridField, GridSet, HalfSpace, LatticeReflection,
    PolarizationSchedule, Termination,
};
use crate::pde::{solve, OperatorSpec, ParabolicProblem, PdeError, Solution};
use crate::stochastic::{
    hitting_volume_profile, sausage_volume_profile, sausage_volume_samples, EstimateMethod,
    PathSpec, SausageEstimate, StochasticError,
};
use crate::util::{format_f64, mean_std};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error("invalid check: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    HoldsWithinTol,
    Violated,
}

impl Verdict {
    pub fn worst(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (HoldsWithinTol, _) | (_, HoldsWithinTol) => HoldsWithinTol,
            _ => Holds,
        }
    }

    fn from_margins(margins: &[f64], tol: f64) -> Verdict {
        if margins.iter().any(|&m| m < -tol) {
            Verdict::Violated
        } else if margins.iter().any(|&m| m < 0.0) {
            Verdict::HoldsWithinTol
        } else {
            Verdict::Holds
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Holds => "holds",
            Verdict::HoldsWithinTol => "holds_within_tol",
            Verdict::Violated => "violated",
        };
        f.write_str(s)
    }
}

/// Where a report came from: enough to reproduce it.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub config_hash: u64,
    pub seed: u64,
    pub grid: String,
    /// Which half-space regime a polarization check exercised.
    pub regime: String,
}

/// One inequality `lhs(t) <= rhs(t) + tolerance` checked at several times.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub scenario: String,
    pub theorem: String,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub tolerance_used: f64,
    pub verdict: Verdict,
    pub provenance: Provenance,
}

impl ComparisonReport {
    fn from_series(
        scenario: &str,
        theorem: &str,
        times: Vec<f64>,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        tolerance: f64,
        provenance: Provenance,
    ) -> Self {
        let margins: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| r - l).collect();
        let verdict = Verdict::from_margins(&margins, tolerance);
        ComparisonReport {
            scenario: scenario.to_string(),
            theorem: theorem.to_string(),
            times,
            lhs,
            rhs,
            tolerance_used: tolerance,
            verdict,
            provenance,
        }
    }

    pub fn margins(&self) -> Vec<f64> {
        self.lhs.iter().zip(&self.rhs).map(|(l, r)| r - l).collect()
    }

    pub fn worst_margin(&self) -> f64 {
        self.margins().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Long-format CSV `(t, lhs, rhs, margin, tolerance)` with full-precision
/// decimals: parsing the numbers back reproduces the report exactly.
pub fn emit_plot_data(report: &ComparisonReport) -> String {
    let mut out = String::from("t,lhs,rhs,margin,tolerance\n");
    for i in 0..report.times.len() {
        let margin = report.rhs[i] - report.lhs[i];
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_f64(report.times[i]),
            format_f64(report.lhs[i]),
            format_f64(report.rhs[i]),
            format_f64(margin),
            format_f64(report.tolerance_used),
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub scenario: String,
    pub theorem: String,
    pub verdict: Verdict,
    pub worst_margin: f64,
    pub tolerance: f64,
}

impl SummaryRow {
    pub fn of(report: &ComparisonReport) -> Self {
        SummaryRow {
            scenario: report.scenario.clone(),
            theorem: report.theorem.clone(),
            verdict: report.verdict,
            worst_margin: report.worst_margin(),
            tolerance: report.tolerance_used,
        }
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("scenario,theorem,verdict,worst_margin,tolerance\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenario,
            r.theorem,
            r.verdict,
            format_f64(r.worst_margin),
            format_f64(r.tolerance),
        ));
    }
    out
}

/// Common knobs for the PDE-backed checks.
#[derive(Debug, Clone, Default)]
pub struct CheckParams {
    pub scenario: String,
    /// Time step; defaults to `h^2`.
    pub dt: Option<f64>,
    /// Verdict tolerance; defaults to `5h` (pointwise) or `5h * measure(A)`
    /// (mass comparisons).
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub config_hash: u64,
}

impl CheckParams {
    pub fn named(scenario: &str) -> Self {
        CheckParams {
            scenario: scenario.to_string(),
            ..Default::default()
        }
    }
}

pub fn default_pointwise_tolerance(set: &GridSet) -> f64 {
    5.0 * set.grid().spacing()
}

pub fn default_mass_tolerance(set: &GridSet) -> f64 {
    5.0 * set.grid().spacing() * set.measure()
}

fn ensure_times(times: &[f64]) -> Result<f64, CompareError> {
    if times.is_empty() {
        return Err(CompareError::Invalid("no sample times given".to_string()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CompareError::Invalid(
            "sample times must be ascending".to_string(),
        ));
    }
    Ok(*times.last().expect("nonempty"))
}

fn solve_pair_problem(
    set: &GridSet,
    psi: &GridField,
    operator: &OperatorSpec,
    horizon: f64,
    dt: f64,
    times: &[f64],
) -> Result<Solution, CompareError> {
    let problem = ParabolicProblem::new(set.clone(), psi.clone(), operator.clone(), horizon, dt)?;
    Ok(solve(&problem, times)?)
}

/// Pointwise polarization comparison: with `v` solving the polarized
/// problem, checks `v(x) + v(sx) <= u(x) + u(sx)` for every cell `x` on the
/// `H` side whose reflection `sx` stays on the grid, at each sampled time.
/// Reported lhs/rhs are the pair sums at the worst cell.
pub fn check_polarization_pointwise(
    set: &GridSet,
    psi: &GridField,
    halfspace: &HalfSpace,
    times: &[f64],
    params: &CheckParams,
) -> Result<ComparisonReport, CompareError> {
    let horizon = ensure_times(times)?;
    let grid = *set.grid();
    let dt = params.dt.unwrap_or(grid.spacing() * grid.spacing());
    let tol = params
        .tolerance
        .unwrap_or_else(|| default_pointwise_tolerance(set));

    let polarized_set = set.polarize(halfspace)?;
    let polarized_psi = psi.polarize(halfspace)?;
    let operator = OperatorSpec::laplacian_half();
    let u = solve_pair_problem(set, psi, &operator, horizon, dt, times)?;
    let v = solve_pair_problem(
        &polarized_set,
        &polarized_psi,
        &operator,
        horizon,
        dt,
        times,
    )?;

    let refl = LatticeReflection::for_grid(halfspace, &grid)?;
    let mut lhs = Vec::with_capacity(times.len());
    let mut rhs = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let uf = &u.fields()[i];
        let vf = &v.fields()[i];
        let mut worst = f64::INFINITY;
        let mut at = (0.0, 0.0);
        for lin in 0..grid.cell_count() {
            let p = grid.lattice_of_linear(lin);
            if refl.side(p) > 0 {
                continue;
            }
            let q = refl.reflect(p);
            let Some(qlin) = grid.linear_of_lattice(q) else {
                continue;
            };
            let su = uf.values()[lin] + uf.values()[qlin];
            let sv = vf.values()[lin] + vf.values()[qlin];
            if su - sv < worst {
                worst = su - sv;
                at = (sv, su);
            }
        }
        lhs.push(at.0);
        rhs.push(at.1);
    }

    let mut provenance = Provenance {
        config_hash: params.config_hash,
        seed: params.seed,
        grid: grid.describe(),
        regime: if halfspace.contains_origin() {
            "H contains origin".to_string()
        } else {
            "general half-space".to_string()
        },
    };
    provenance
        .grid
        .push_str(&format!(" | {}", halfspace.describe()));
    Ok(ComparisonReport::from_series(
        &params.scenario,
        "polarization_pointwise",
        times.to_vec(),
        lhs,
        rhs,
        tol,
        provenance,
    ))
}

/// One link of the polarization induction chain.
#[derive(Debug, Clone)]
pub struct ChainLink {
    pub step: usize,
    pub halfspace: String,
    pub masses: Vec<f64>,
    /// min over times of mass(previous) - mass(this step)
    pub worst_margin_vs_previous: f64,
}

#[derive(Debug, Clone)]
pub struct SymmetrizationOutcome {
    /// Mass inequality between the symmetrized and original problems.
    pub report: ComparisonReport,
    pub chain: Vec<ChainLink>,
    pub chain_verdict: Verdict,
    pub termination: Termination,
    pub final_sym_diff: f64,
}

impl SymmetrizationOutcome {
    pub fn overall_verdict(&self) -> Verdict {
        self.report.verdict.worst(self.chain_verdict)
    }
}

/// Symmetrization mass inequality: mass of the ball problem never exceeds
/// the mass of the original problem (up to tolerance), and along the
/// polarization schedule each step's mass is nonincreasing.
pub fn check_symmetrization_mass(
    set: &GridSet,
    psi: &GridField,
    schedule: &PolarizationSchedule,
    times: &[f64],
    params: &CheckParams,
) -> Result<SymmetrizationOutcome, CompareError> {
    let horizon = ensure_times(times)?;
    if set.is_empty() {
        return Err(GeometryError::EmptySet.into());
    }
    let grid = *set.grid();
    let dt = params.dt.unwrap_or(grid.spacing() * grid.spacing());
    let tol = params
        .tolerance
        .unwrap_or_else(|| default_mass_tolerance(set));
    let operator = OperatorSpec::laplacian_half();

    let ball = set.equal_volume_ball()?;
    let psi_star = psi.schwarz_rearrangement()?;
    let u = solve_pair_problem(set, psi, &operator, horizon, dt, times)?;
    let v = solve_pair_problem(&ball, &psi_star, &operator, horizon, dt, times)?;
    let u_masses: Vec<f64> = times.iter().map(|&t| u.mass_at(t)).collect();
    let v_masses: Vec<f64> = times.iter().map(|&t| v.mass_at(t)).collect();

    let provenance = Provenance {
        config_hash: params.config_hash,
        seed: params.seed,
        grid: grid.describe(),
        regime: "H contains origin".to_string(),
    };
    let report = ComparisonReport::from_series(
        &params.scenario,
        "symmetrization_mass",
        times.to_vec(),
        v_masses,
        u_masses.clone(),
        tol,
        provenance,
    );

    // induction chain along the schedule
    let run = run_polarization_schedule(set, psi, schedule)?;
    let mut chain = Vec::new();
    let mut prev_masses = u_masses;
    let mut chain_worst = f64::INFINITY;
    for (n, step) in run.steps.iter().enumerate().skip(1) {
        let sol = solve_pair_problem(&step.set, &step.field, &operator, horizon, dt, times)?;
        let masses: Vec<f64> = times.iter().map(|&t| sol.mass_at(t)).collect();
        let worst = prev_masses
            .iter()
            .zip(&masses)
            .map(|(p, m)| p - m)
            .fold(f64::INFINITY, f64::min);
        chain_worst = chain_worst.min(worst);
        chain.push(ChainLink {
            step: n,
            halfspace: step
                .applied
                .as_ref()
                .map(|h| h.describe())
                .unwrap_or_default(),
            masses: masses.clone(),
            worst_margin_vs_previous: worst,
        });
        prev_masses = masses;
    }
    let chain_verdict = if chain.is_empty() {
        Verdict::Holds
    } else {
        Verdict::from_margins(&[chain_worst], tol)
    };
    let final_sym_diff = run.final_step().sym_diff;
    Ok(SymmetrizationOutcome {
        report,
        chain,
        chain_verdict,
        termination: run.termination,
        final_sym_diff,
    })
}

/// Sausage isoperimetry under common random numbers: the expected volume of
/// the union of translates along the same paths, for the equal-volume ball
/// versus the original set. Tolerance is the paired 95% confidence interval
/// unless overridden.
pub fn check_sausage_isoperimetry(
    set: &GridSet,
    spec: &PathSpec,
    n_paths: usize,
    params: &CheckParams,
) -> Result<ComparisonReport, CompareError> {
    let grid = *set.grid();
    let provenance = Provenance {
        config_hash: params.config_hash,
        seed: spec.seed,
        grid: grid.describe(),
        regime: String::new(),
    };
    if set.is_empty() {
        // zero-measure sets: both sausages are unions of null translates
        return Ok(ComparisonReport::from_series(
            &params.scenario,
            "sausage_isoperimetry",
            vec![spec.horizon],
            vec![0.0],
            vec![0.0],
            0.0,
            provenance,
        ));
    }
    let ball = set.equal_volume_ball()?;
    let vols_set = sausage_volume_samples(spec, set, n_paths)?;
    let vols_ball = sausage_volume_samples(spec, &ball, n_paths)?;
    let diffs: Vec<f64> = vols_set
        .iter()
        .zip(&vols_ball)
        .map(|(a, b)| a - b)
        .collect();
    let (_, sd) = mean_std(&diffs);
    let ci = 1.96 * sd / (n_paths as f64).sqrt();
    let tol = params.tolerance.unwrap_or(ci);
    let mean_set = SausageEstimate::from_samples(&vols_set, EstimateMethod::Stamp).mean;
    let mean_ball = SausageEstimate::from_samples(&vols_ball, EstimateMethod::Stamp).mean;
    Ok(ComparisonReport::from_series(
        &params.scenario,
        "sausage_isoperimetry",
        vec![spec.horizon],
        vec![mean_ball],
        vec![mean_set],
        tol,
        provenance,
    ))
}

/// Three-way representation check at matched times.
#[derive(Debug, Clone)]
pub struct RepresentationReport {
    pub scenario: String,
    pub times: Vec<f64>,
    pub pde_mass: Vec<f64>,
    pub stamp: Vec<SausageEstimate>,
    pub hitting: Vec<SausageEstimate>,
    /// Allowed relative gap between the PDE mass and each estimator, on top
    /// of the estimator's confidence interval.
    pub relative_band: f64,
    pub verdict: Verdict,
    pub provenance: Provenance,
}

impl RepresentationReport {
    /// Flattens to the common report shape: lhs = PDE mass, rhs = stamp
    /// estimate; margins encode `band - |gap|` for the worse of the two
    /// estimators (nonnegative means within band).
    pub fn to_comparison_report(&self) -> ComparisonReport {
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..self.times.len() {
            let allowed_stamp = self.relative_band * self.pde_mass[i] + self.stamp[i].half_width_95;
            let allowed_hit = self.relative_band * self.pde_mass[i] + self.hitting[i].half_width_95;
            let gap_stamp = (self.pde_mass[i] - self.stamp[i].mean).abs();
            let gap_hit = (self.pde_mass[i] - self.hitting[i].mean).abs();
            let margin = (allowed_stamp - gap_stamp).min(allowed_hit - gap_hit);
            // encode as rhs - lhs = margin
            lhs.push(0.0);
            rhs.push(margin);
        }
        ComparisonReport::from_series(
            &self.scenario,
            "representation_identity",
            self.times.clone(),
            lhs,
            rhs,
            0.0,
            self.provenance.clone(),
        )
    }
}

/// Compares the solver's mass (initial data = obstacle indicator) against
/// both Monte Carlo estimators of the expected sausage volume at each time.
pub fn check_representation(
    set: &GridSet,
    operator: &OperatorSpec,
    times: &[f64],
    spec: &PathSpec,
    n_paths: usize,
    relative_band: f64,
    params: &CheckParams,
) -> Result<RepresentationReport, CompareError> {
    let horizon = ensure_times(times)?;
    if spec.horizon < horizon * (1.0 - 1e-12) {
        return Err(CompareError::Invalid(format!(
            "path horizon {} shorter than last sample time {horizon}",
            spec.horizon
        )));
    }
    let grid = *set.grid();
    let dt = params.dt.unwrap_or(grid.spacing() * grid.spacing());
    let psi = GridField::indicator(set);
    let sol = solve_pair_problem(set, &psi, operator, horizon, dt, times)?;
    let pde_mass: Vec<f64> = times.iter().map(|&t| sol.mass_at(t)).collect();

    let stamp_profile = sausage_volume_profile(spec, set, times, n_paths)?;
    let hit_profile = hitting_volume_profile(spec, set, times, n_paths)?;
    let per_time = |profile: &[Vec<f64>], i: usize, method| {
        let column: Vec<f64> = profile.iter().map(|row| row[i]).collect();
        SausageEstimate::from_samples(&column, method)
    };
    let stamp: Vec<SausageEstimate> = (0..times.len())
        .map(|i| per_time(&stamp_profile, i, EstimateMethod::Stamp))
        .collect();
    let hitting: Vec<SausageEstimate> = (0..times.len())
        .map(|i| per_time(&hit_profile, i, EstimateMethod::HittingIntegral))
        .collect();

    let mut verdict = Verdict::Holds;
    for i in 0..times.len() {
        for est in [&stamp[i], &hitting[i]] {
            let allowed = relative_band * pde_mass[i] + est.half_width_95;
            if (pde_mass[i] - est.mean).abs() > allowed {
                verdict = Verdict::Violated;
            }
        }
    }
    Ok(RepresentationReport {
        scenario: params.scenario.clone(),
        times: times.to_vec(),
        pde_mass,
        stamp,
        hitting,
        relative_band,
        verdict,
        provenance: Provenance {
            config_hash: params.config_hash,
            seed: spec.seed,
            grid: grid.describe(),
            regime: String::new(),
        },
    })
}
