//! Implicit finite-difference solver for the exterior parabolic problem:
//! heat-type evolution in the grid box outside a compact obstacle, with the
//! solution pinned to 1 on the obstacle's cells and to 0 on the outer grid
//! ring, starting from admissible data (values in [0,1], equal to 1 on the
//! obstacle).
//!
//! Space: conservative second-order stencil for `div(a(t) grad u)` with a
//! spatially constant, time-dependent symmetric coefficient matrix. Time: a
//! theta scheme — two backward-Euler startup steps smooth the discontinuous
//! initial data, then Crank-Nicolson; when the coefficient matrix has
//! off-diagonal entries or the step is too large for the explicit part to
//! stay nonnegative, the solver falls back to pure backward Euler. In both
//! regimes the step map is monotone (M-matrix left-hand side), so computed
//! values stay in [0,1] up to the linear-solver residual. Each step solves
//! its SPD system by conjugate gradient, warm-started from the previous
//! step.
//!
//! The grid box stands in for free space: fields decay toward the outer
//! ring, and the mass accumulating in the outermost shell is watched against
//! a leak tolerance — exceeding it means the box is too small for the
//! requested horizon.

mod cg;

pub use cg::{conjugate_gradient, CgOutcome};

use crate::geometry::{check_admissible, GeometryError, Grid, GridField, GridSet, MAX_DIM};
use crate::rng::CounterRng;
use thiserror::Error;

/// Relative residual target for each linear solve.
pub const SOLVER_TOL: f64 = 1e-10;
/// Iteration cap for each linear solve.
pub const MAX_CG_ITERS: usize = 10_000;
/// Bound used by the discrete maximum-principle checks: computed values lie
/// in `[-EPS_LIN, 1 + EPS_LIN]` before clamping.
pub const EPS_LIN: f64 = 10.0 * SOLVER_TOL;

#[derive(Debug, Error)]
pub enum PdeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("linear solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },
    #[error("outer-shell leak {leak:.3e} exceeds tolerance {tolerance:.3e} at t = {time}; grid box too small for this horizon")]
    MarginTooSmall {
        leak: f64,
        tolerance: f64,
        time: f64,
    },
    #[error("coefficients fail the ellipticity probe at t = {time}")]
    EllipticityViolated { time: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub type CoeffMatrix = [[f64; MAX_DIM]; MAX_DIM];

pub fn identity_over_two() -> CoeffMatrix {
    let mut m = [[0.0; MAX_DIM]; MAX_DIM];
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = 0.5;
    }
    m
}

/// Time dependence of the coefficient matrix.
#[derive(Debug, Clone)]
pub enum Coefficients {
    Constant(CoeffMatrix),
    /// Nodes `(t, a(t))` sorted by time; linear interpolation, clamped ends.
    PiecewiseLinear(Vec<(f64, CoeffMatrix)>),
}

impl Coefficients {
    pub fn eval(&self, t: f64) -> CoeffMatrix {
        match self {
            Coefficients::Constant(m) => *m,
            Coefficients::PiecewiseLinear(nodes) => {
                if t <= nodes[0].0 {
                    return nodes[0].1;
                }
                if t >= nodes[nodes.len() - 1].0 {
                    return nodes[nodes.len() - 1].1;
                }
                let j = nodes.partition_point(|(s, _)| *s <= t);
                let (t0, a0) = &nodes[j - 1];
                let (t1, a1) = &nodes[j];
                let w = (t - t0) / (t1 - t0);
                let mut m = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..MAX_DIM {
                    for k in 0..MAX_DIM {
                        m[i][k] = a0[i][k] + w * (a1[i][k] - a0[i][k]);
                    }
                }
                m
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorMode {
    /// `a = identity / 2` — the generator of standard Brownian motion.
    LaplacianHalf,
    General,
}

/// Elliptic operator `div(a(t) grad u)` with ellipticity floor `kappa` and
/// entry bound `bound_k`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub mode: OperatorMode,
    pub coeff: Coefficients,
    pub kappa: f64,
    pub bound_k: f64,
}

impl OperatorSpec {
    pub fn laplacian_half() -> Self {
        OperatorSpec {
            mode: OperatorMode::LaplacianHalf,
            coeff: Coefficients::Constant(identity_over_two()),
            kappa: 0.5,
            bound_k: 0.5,
        }
    }

    pub fn general(coeff: Coefficients, kappa: f64) -> Result<Self, PdeError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(PdeError::InvalidProblem(format!(
                "ellipticity bound must be positive, got {kappa}"
            )));
        }
        let nodes: Vec<&CoeffMatrix> = match &coeff {
            Coefficients::Constant(m) => vec![m],
            Coefficients::PiecewiseLinear(ns) => {
                if ns.is_empty() {
                    return Err(PdeError::InvalidProblem(
                        "tabulated coefficients need at least one node".to_string(),
                    ));
                }
                if ns.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(PdeError::InvalidProblem(
                        "coefficient nodes must be strictly increasing in t".to_string(),
                    ));
                }
                ns.iter().map(|(_, m)| m).collect()
            }
        };
        let mut bound_k: f64 = 0.0;
        for m in nodes {
            for row in m {
                for &v in row {
                    if !v.is_finite() {
                        return Err(PdeError::InvalidProblem(
                            "coefficient entries must be finite".to_string(),
                        ));
                    }
                    bound_k = bound_k.max(v.abs());
                }
            }
        }
        Ok(OperatorSpec {
            mode: OperatorMode::General,
            coeff,
            kappa,
            bound_k,
        })
    }

    /// Evaluates `a(t)`, checking symmetry and the ellipticity probe
    /// `z . a z >= kappa |z|^2` on the axis basis plus fixed pseudo-random
    /// directions.
    pub fn coefficient_at(&self, t: f64, dim: usize) -> Result<CoeffMatrix, PdeError> {
        let a = self.coeff.eval(t);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (a[i][j] - a[j][i]).abs() > 1e-12 * self.bound_k.max(1.0) {
                    return Err(PdeError::InvalidProblem(format!(
                        "coefficient matrix is not symmetric at t = {t}"
                    )));
                }
            }
        }
        for z in probe_directions(dim) {
            let mut quad = 0.0;
            let mut nsq = 0.0;
            for i in 0..dim {
                nsq += z[i] * z[i];
                for j in 0..dim {
                    quad += z[i] * a[i][j] * z[j];
                }
            }
            if quad < self.kappa * nsq - 1e-12 * self.kappa.max(1.0) {
                return Err(PdeError::EllipticityViolated { time: t });
            }
        }
        Ok(a)
    }
}

/// Axis basis plus eight fixed pseudo-random unit vectors.
fn probe_directions(dim: usize) -> Vec<[f64; MAX_DIM]> {
    let mut probes = Vec::new();
    for k in 0..dim {
        let mut z = [0.0; MAX_DIM];
        z[k] = 1.0;
        probes.push(z);
    }
    let mut rng = CounterRng::new(0x5eed_920b, 0);
    for _ in 0..8 {
        let mut z = [0.0; MAX_DIM];
        let mut nsq = 0.0;
        for zk in z.iter_mut().take(dim) {
            *zk = rng.standard_normal();
            nsq += *zk * *zk;
        }
        if nsq > 1e-12 {
            let n = nsq.sqrt();
            for zk in z.iter_mut().take(dim) {
                *zk /= n;
            }
            probes.push(z);
        }
    }
    probes
}

/// Exterior problem data: obstacle, admissible initial field, operator,
/// horizon and step.
#[derive(Debug, Clone)]
pub struct ParabolicProblem {
    pub obstacle: GridSet,
    pub initial: GridField,
    pub operator: OperatorSpec,
    pub horizon: f64,
    pub dt: f64,
    /// Abort threshold for mass in the outermost three-cell shell;
    /// defaults to `1e-4 * measure(obstacle)`.
    pub leak_tol: f64,
}

impl ParabolicProblem {
    pub fn new(
        obstacle: GridSet,
        initial: GridField,
        operator: OperatorSpec,
        horizon: f64,
        dt: f64,
    ) -> Result<Self, PdeError> {
        if obstacle.is_empty() {
            return Err(GeometryError::EmptySet.into());
        }
        check_admissible(&obstacle, &initial)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(PdeError::InvalidProblem(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(dt > 0.0 && dt <= horizon) {
            return Err(PdeError::InvalidProblem(format!(
                "time step must satisfy 0 < dt <= horizon, got {dt}"
            )));
        }
        let grid = *obstacle.grid();
        let (lo, hi) = obstacle.bounding_box().expect("nonempty");
        for k in 0..grid.dim() {
            let half = grid.half_extent(k);
            let margin = (half + lo[k]).min(half - hi[k]);
            if margin < 5 {
                return Err(PdeError::InvalidProblem(format!(
                    "obstacle needs a margin of at least 5 cells, has {margin} on axis {k}"
                )));
            }
        }
        let leak_tol = 1e-4 * obstacle.measure();
        Ok(ParabolicProblem {
            obstacle,
            initial,
            operator,
            horizon,
            dt,
            leak_tol,
        })
    }

    pub fn with_leak_tol(mut self, leak_tol: f64) -> Self {
        self.leak_tol = leak_tol;
        self
    }

    /// Convenience admissible initial data: the obstacle's indicator.
    pub fn indicator_initial(obstacle: &GridSet) -> GridField {
        GridField::indicator(obstacle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    BackwardEuler,
    /// Two backward-Euler startup steps, then Crank-Nicolson.
    RannacherCrankNicolson,
}

#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub time: f64,
    pub relative_residual: f64,
    pub cg_iterations: usize,
    pub mass: f64,
    /// Extremes of the free cells before clamping to [0,1].
    pub min_value: f64,
    pub max_value: f64,
    /// Mass in the outermost three-cell shell inside the Dirichlet ring.
    pub shell_leak: f64,
}

/// Solution sampled at requested times; fields carry the value 1 on the
/// obstacle's cells.
#[derive(Debug, Clone)]
pub struct Solution {
    times: Vec<f64>,
    fields: Vec<GridField>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub scheme: TimeScheme,
}

impl Solution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[GridField] {
        &self.fields
    }

    fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &s) in self.times.iter().enumerate() {
            let d = (s - t).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }

    /// Field at the nearest sampled time.
    pub fn field_at(&self, t: f64) -> &GridField {
        &self.fields[self.nearest(t)]
    }

    /// Space integral `h^d sum(u)` at the nearest sampled time, obstacle
    /// cells (pinned to 1) included.
    pub fn mass_at(&self, t: f64) -> f64 {
        self.fields[self.nearest(t)].integral()
    }
}

/// Runs the time stepping and returns fields at `sample_times` (linear
/// interpolation between steps; exact at step times).
///
/// Dispatches on the operator mode internally; a general-mode operator with
/// coefficients identically `identity/2` takes the identical code path and
/// reproduces the laplacian-half output bit for bit.
pub fn solve(problem: &ParabolicProblem, sample_times: &[f64]) -> Result<Solution, PdeError> {
    let grid = *problem.obstacle.grid();
    let h = grid.spacing();
    let dim = grid.dim();
    let cells = grid.cell_count();

    for &t in sample_times {
        if !(t >= -1e-12 && t <= problem.horizon * (1.0 + 1e-9) + 1e-12) {
            return Err(PdeError::InvalidProblem(format!(
                "sample time {t} outside [0, {}]",
                problem.horizon
            )));
        }
    }

    let n_steps = ((problem.horizon / problem.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = problem.horizon / n_steps as f64;

    // coefficient matrices at step midpoints, probed up front
    let mut coeffs = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let tm = (k as f64 + 0.5) * dt;
        coeffs.push(problem.operator.coefficient_at(tm, dim)?);
    }
    let all_diagonal = coeffs
        .iter()
        .all(|a| (0..dim).all(|i| ((i + 1)..dim).all(|j| a[i][j] == 0.0)));
    let max_trace = coeffs
        .iter()
        .map(|a| (0..dim).map(|k| a[k][k]).sum::<f64>())
        .fold(0.0f64, f64::max);
    // Crank-Nicolson keeps the explicit matrix nonnegative (and the step map
    // monotone) only under this step bound; otherwise fall back to backward
    // Euler.
    let scheme = if all_diagonal && dt * max_trace <= h * h * (1.0 + 1e-9) {
        TimeScheme::RannacherCrankNicolson
    } else {
        TimeScheme::BackwardEuler
    };

    // cell classification
    let obstacle_mask = problem.obstacle.mask();
    let mut free = vec![false; cells];
    let mut shell = vec![false; cells];
    for lin in 0..cells {
        let p = grid.lattice_of_linear(lin);
        let bd = grid.boundary_distance(p);
        if bd >= 1 && !obstacle_mask[lin] {
            free[lin] = true;
            if bd <= 3 {
                shell[lin] = true;
            }
        }
    }

    let strides = grid.strides();
    let inv_h2 = 1.0 / (h * h);

    // div(a grad v) at free cells; everything else reads as given in `v`
    let apply_d = |a: &CoeffMatrix, v: &[f64], out: &mut [f64]| {
        for lin in 0..cells {
            if !free[lin] {
                out[lin] = 0.0;
                continue;
            }
            let mut acc = 0.0;
            for k in 0..dim {
                let s = strides[k];
                acc += a[k][k] * inv_h2 * (v[lin - s] - 2.0 * v[lin] + v[lin + s]);
            }
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let aij = a[i][j];
                    if aij != 0.0 {
                        let si = strides[i];
                        let sj = strides[j];
                        acc += aij
                            * 0.5
                            * inv_h2
                            * (v[lin + si + sj] - v[lin + si - sj] - v[lin - si + sj]
                                + v[lin - si - sj]);
                    }
                }
            }
            out[lin] = acc;
        }
    };

    // initial state with Dirichlet values stamped
    let mut u = problem.initial.values().to_vec();
    for lin in 0..cells {
        if obstacle_mask[lin] {
            u[lin] = 1.0;
        } else if !free[lin] {
            u[lin] = 0.0;
        }
    }
    let g_dirichlet: Vec<f64> = (0..cells)
        .map(|lin| if obstacle_mask[lin] { 1.0 } else { 0.0 })
        .collect();

    // group sample times by the step interval that contains them
    let mut samples: Vec<(usize, f64, usize)> = sample_times
        .iter()
        .enumerate()
        .map(|(pos, &t)| {
            let mut k = (t / dt).floor() as usize;
            let mut w = t / dt - k as f64;
            if k >= n_steps {
                k = n_steps - 1;
                w = 1.0;
            }
            (k, w, pos)
        })
        .collect();
    samples.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).expect("finite"));

    let mut out_fields: Vec<Option<GridField>> = vec![None; sample_times.len()];
    let mut diagnostics = Vec::with_capacity(n_steps);
    let mut sample_cursor = 0;

    let mut x = vec![0.0; cells]; // warm start, free cells only
    let mut work = vec![0.0; cells];
    let mut rhs = vec![0.0; cells];
    let grid_measure = grid.cell_measure();

    for step in 0..n_steps {
        let theta = match scheme {
            TimeScheme::BackwardEuler => 1.0,
            TimeScheme::RannacherCrankNicolson => {
                if step < 2 {
                    1.0
                } else {
                    0.5
                }
            }
        };
        let a = &coeffs[step];

        // rhs = u/dt + D[(1-theta) u + theta g] on free cells
        for lin in 0..cells {
            work[lin] = (1.0 - theta) * u[lin] + theta * g_dirichlet[lin];
        }
        apply_d(a, &work, &mut rhs);
        for lin in 0..cells {
            if free[lin] {
                rhs[lin] += u[lin] / dt;
            } else {
                rhs[lin] = 0.0;
            }
        }

        // warm start from the previous free values
        for lin in 0..cells {
            x[lin] = if free[lin] { u[lin] } else { 0.0 };
        }

        let apply_m = |v: &[f64], out: &mut [f64]| {
            apply_d(a, v, out);
            for lin in 0..cells {
                out[lin] = if free[lin] {
                    v[lin] / dt - theta * out[lin]
                } else {
                    0.0
                };
            }
        };
        let cg =
            conjugate_gradient(apply_m, &rhs, &mut x, SOLVER_TOL, MAX_CG_ITERS).map_err(|f| {
                PdeError::SolverDiverged {
                    residual: f.relative_residual,
                    iterations: f.iterations,
                }
            })?;

        // assemble the full field, record extremes, clamp
        let mut min_v = f64::INFINITY;
        let mut max_v = f64::NEG_INFINITY;
        let mut u_next = vec![0.0; cells];
        for lin in 0..cells {
            if obstacle_mask[lin] {
                u_next[lin] = 1.0;
            } else if free[lin] {
                let v = x[lin];
                min_v = min_v.min(v);
                max_v = max_v.max(v);
                u_next[lin] = v.clamp(0.0, 1.0);
            }
        }

        let time = (step + 1) as f64 * dt;
        let mass = crate::util::pairwise_sum(&u_next) * grid_measure;
        let leak: f64 = u_next
            .iter()
            .zip(&shell)
            .filter(|(_, &s)| s)
            .map(|(&v, _)| v)
            .sum::<f64>()
            * grid_measure;
        if leak > problem.leak_tol {
            return Err(PdeError::MarginTooSmall {
                leak,
                tolerance: problem.leak_tol,
                time,
            });
        }
        diagnostics.push(StepDiagnostics {
            time,
            relative_residual: cg.relative_residual,
            cg_iterations: cg.iterations,
            mass,
            min_value: min_v,
            max_value: max_v,
            shell_leak: leak,
        });

        // emit samples inside (step, step+1]
        while sample_cursor < samples.len() && samples[sample_cursor].0 == step {
            let (_, w, pos) = samples[sample_cursor];
            let vals: Vec<f64> = u
                .iter()
                .zip(&u_next)
                .map(|(&a0, &a1)| a0 + w * (a1 - a0))
                .collect();
            out_fields[pos] = Some(GridField::new(grid, vals)?);
            sample_cursor += 1;
        }

        u = u_next;
    }

    let fields: Vec<GridField> = out_fields
        .into_iter()
        .map(|f| f.expect("every sample time falls in some step"))
        .collect();
    Ok(Solution {
        times: sample_times.to_vec(),
        fields,
        diagnostics,
        scheme,
    })
}

/// Smooth test functions for weak-convergence surrogates: the constant 1 on
/// the interior, plus compactly supported radial bumps.
pub fn test_bumps(grid: &Grid) -> Vec<GridField> {
    let mut bumps = Vec::new();
    let mut ones = GridField::zeros(*grid);
    for lin in 0..grid.cell_count() {
        let p = grid.lattice_of_linear(lin);
        if !grid.is_margin(p) {
            ones.values_mut()[lin] = 1.0;
        }
    }
    bumps.push(ones);

    let h = grid.spacing();
    let half = grid.half_extent(0) as f64 * h;
    let radius = half * 0.45;
    let centers: [f64; 3] = [0.0, -half * 0.4, half * 0.4];
    for &c in &centers {
        let mut bump = GridField::zeros(*grid);
        for lin in 0..grid.cell_count() {
            let x = grid.cell_center(grid.lattice_of_linear(lin));
            let mut d2 = (x[0] - c) * (x[0] - c);
            for k in 1..grid.dim() {
                d2 += x[k] * x[k];
            }
            let r2 = d2 / (radius * radius);
            if r2 < 1.0 {
                bump.values_mut()[lin] = (1.0 - 1.0 / (1.0 - r2)).exp() * std::f64::consts::E;
            }
        }
        bumps.push(bump);
    }
    bumps
}

/// Report for the obstacle-perturbation stability check: for each set in a
/// ladder converging to `base`, the Hausdorff gap and the test-functional
/// gaps `|integral (u_n - u) phi|` at time `t`.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub hausdorff: Vec<f64>,
    pub gaps: Vec<Vec<f64>>,
}

pub fn perturbation_check(
    base: &GridSet,
    ladder: &[GridSet],
    psi: &GridField,
    operator: &OperatorSpec,
    t: f64,
    dt: f64,
) -> Result<PerturbationReport, PdeError> {
    let grid = *base.grid();
    let bumps = test_bumps(&grid);
    let solve_one = |set: &GridSet| -> Result<GridField, PdeError> {
        // force admissibility on the (possibly larger) obstacle
        let mut init = psi.clone();
        for (lin, &inside) in set.mask().iter().enumerate() {
            if inside {
                init.values_mut()[lin] = 1.0;
            }
        }
        let problem = ParabolicProblem::new(set.clone(), init, operator.clone(), t, dt)?;
        let sol = solve(&problem, &[t])?;
        Ok(sol.fields()[0].clone())
    };

    let u_base = solve_one(base)?;
    let mut hausdorff = Vec::new();
    let mut gaps = Vec::new();
    for set in ladder {
        let u_n = solve_one(set)?;
        hausdorff.push(base.hausdorff_distance(set)?);
        let row: Vec<f64> = bumps
            .iter()
            .map(|phi| {
                let prods: Vec<f64> = u_n
                    .values()
                    .iter()
                    .zip(u_base.values())
                    .zip(phi.values())
                    .map(|((&a, &b), &p)| (a - b) * p)
                    .collect();
                (crate::util::pairwise_sum(&prods) * grid.cell_measure()).abs()
            })
            .collect();
        gaps.push(row);
    }
    Ok(PerturbationReport { hausdorff, gaps })
}
