//! Monte Carlo engine for Brownian and anisotropic paths.
//!
//! Paths are sampled with counter-based RNG streams (one per path), so every
//! estimate is bitwise reproducible for a fixed seed regardless of thread
//! count: per-path results are reduced in path order with pairwise
//! summation, and hitting-field accumulation uses exact integer counts.
//!
//! Hitting detection happens only at step times — the resulting bias is
//! one-sided (hits between observation times are missed, so probabilities
//! are underestimated and detected hitting times are late) and shrinks with
//! the step; measure it by halving `step` rather than trusting any single
//! run.

use crate::geometry::{GridField, GridSet, Point, MAX_DIM};
use crate::rng::CounterRng;
use crate::util::{mean_std, pairwise_sum};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("stamped translate exits the grid; enlarge the box or shorten the horizon")]
    Clipped,
    #[error("driver matrix fails the ellipticity probe at t = {time}")]
    EllipticityViolated { time: f64 },
    #[error("invalid path spec: {0}")]
    InvalidSpec(String),
}

/// Time dependence of the d-by-m driver matrix.
#[derive(Debug, Clone)]
pub enum SigmaFn {
    Constant([[f64; MAX_DIM]; MAX_DIM]),
    /// Nodes `(t, sigma)` sorted by time; linear interpolation, clamped ends.
    PiecewiseLinear(Vec<(f64, [[f64; MAX_DIM]; MAX_DIM])>),
}

impl SigmaFn {
    fn eval(&self, t: f64) -> [[f64; MAX_DIM]; MAX_DIM] {
        match self {
            SigmaFn::Constant(m) => *m,
            SigmaFn::PiecewiseLinear(nodes) => {
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

#[derive(Debug, Clone)]
pub enum Driver {
    /// Standard Brownian increments, one independent component per axis.
    Standard,
    /// Increments `sigma(t) dB` with an m-dimensional driving motion;
    /// `sigma sigma^T` must satisfy the ellipticity floor `kappa`.
    Sigma {
        sigma: SigmaFn,
        cols: usize,
        kappa: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    GaussianIncrements,
    /// Independent ±sqrt(dt) moves per axis — the random-walk route to
    /// Brownian motion. Kept for cross-checking the Gaussian sampler, not
    /// as the reference.
    DonskerWalk,
}

#[derive(Debug, Clone)]
pub struct PathSpec {
    pub dim: usize,
    pub horizon: f64,
    pub step: f64,
    pub driver: Driver,
    pub seed: u64,
    pub scheme: Scheme,
}

impl PathSpec {
    pub fn standard(
        dim: usize,
        horizon: f64,
        step: f64,
        seed: u64,
    ) -> Result<Self, StochasticError> {
        PathSpec::new(
            dim,
            horizon,
            step,
            Driver::Standard,
            seed,
            Scheme::GaussianIncrements,
        )
    }

    pub fn new(
        dim: usize,
        horizon: f64,
        step: f64,
        driver: Driver,
        seed: u64,
        scheme: Scheme,
    ) -> Result<Self, StochasticError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(StochasticError::InvalidSpec(format!(
                "dimension must be 1..=3, got {dim}"
            )));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(StochasticError::InvalidSpec(format!(
                "horizon must be nonnegative, got {horizon}"
            )));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(StochasticError::InvalidSpec(format!(
                "step must be positive, got {step}"
            )));
        }
        if horizon > 0.0 && step > horizon * (1.0 + 1e-12) {
            return Err(StochasticError::InvalidSpec(format!(
                "step {step} exceeds horizon {horizon}"
            )));
        }
        let driver = match driver {
            Driver::Sigma { sigma, cols, kappa } => {
                if cols == 0 || cols > MAX_DIM {
                    return Err(StochasticError::InvalidSpec(format!(
                        "driver must have 1..=3 columns, got {cols}"
                    )));
                }
                if kappa <= 0.0 {
                    return Err(StochasticError::InvalidSpec(
                        "ellipticity floor must be positive".to_string(),
                    ));
                }
                probe_sigma(&sigma, dim, cols, kappa, horizon)?;
                if matches!(scheme, Scheme::DonskerWalk) {
                    return Err(StochasticError::InvalidSpec(
                        "the walk scheme is defined for the standard driver only".to_string(),
                    ));
                }
                // canonicalize an exact identity so the reduction to the
                // standard driver is bitwise
                if cols == dim && is_identity(&sigma, dim) {
                    Driver::Standard
                } else {
                    Driver::Sigma { sigma, cols, kappa }
                }
            }
            Driver::Standard => Driver::Standard,
        };
        Ok(PathSpec {
            dim,
            horizon,
            step,
            driver,
            seed,
            scheme,
        })
    }

    /// Number of uniform steps: `ceil(horizon / step)`.
    pub fn n_steps(&self) -> usize {
        if self.horizon == 0.0 {
            0
        } else {
            ((self.horizon / self.step) - 1e-9).ceil().max(1.0) as usize
        }
    }

    pub fn dt(&self) -> f64 {
        let n = self.n_steps();
        if n == 0 {
            0.0
        } else {
            self.horizon / n as f64
        }
    }
}

fn is_identity(sigma: &SigmaFn, dim: usize) -> bool {
    let check = |m: &[[f64; MAX_DIM]; MAX_DIM]| {
        (0..dim).all(|i| (0..dim).all(|j| m[i][j] == if i == j { 1.0 } else { 0.0 }))
    };
    match sigma {
        SigmaFn::Constant(m) => check(m),
        SigmaFn::PiecewiseLinear(nodes) => nodes.iter().all(|(_, m)| check(m)),
    }
}

/// Probes `z . (sigma sigma^T) z >= kappa |z|^2` at sampled times.
fn probe_sigma(
    sigma: &SigmaFn,
    dim: usize,
    cols: usize,
    kappa: f64,
    horizon: f64,
) -> Result<(), StochasticError> {
    let samples = 17;
    for s in 0..=samples {
        let t = if horizon > 0.0 {
            horizon * s as f64 / samples as f64
        } else {
            0.0
        };
        let m = sigma.eval(t);
        // basis probes of sigma sigma^T
        for k in 0..dim {
            let mut z = [0.0; MAX_DIM];
            z[k] = 1.0;
            let mut quad = 0.0;
            for j in 0..cols {
                let mut comp = 0.0;
                for i in 0..dim {
                    comp += z[i] * m[i][j];
                }
                quad += comp * comp;
            }
            if quad < kappa - 1e-12 * kappa.max(1.0) {
                return Err(StochasticError::EllipticityViolated { time: t });
            }
        }
        // a few fixed oblique probes
        let mut rng = CounterRng::new(0x51_6d_a0, s as u64);
        for _ in 0..4 {
            let mut z = [0.0; MAX_DIM];
            let mut nsq = 0.0;
            for zk in z.iter_mut().take(dim) {
                *zk = rng.standard_normal();
                nsq += *zk * *zk;
            }
            if nsq < 1e-12 {
                continue;
            }
            let mut quad = 0.0;
            for j in 0..cols {
                let mut comp = 0.0;
                for i in 0..dim {
                    comp += z[i] * m[i][j];
                }
                quad += comp * comp;
            }
            if quad < kappa * nsq - 1e-12 * kappa.max(1.0) {
                return Err(StochasticError::EllipticityViolated { time: t });
            }
        }
    }
    Ok(())
}

// Disjoint stream spaces so distinct estimators never share draws.
const SAUSAGE_STREAM: u64 = 0;
const HITTING_STREAM: u64 = 1 << 62;
const HITPROB_STREAM: u64 = 2 << 62;
const CELLWISE_STREAM: u64 = 3 << 62;

/// Incremental path sampler; positions advance by one step at a time.
pub struct PathStepper {
    dim: usize,
    cols: usize,
    n_steps: usize,
    dt: f64,
    sqrt_dt: f64,
    k: usize,
    pos: Point,
    rng: CounterRng,
    driver: Driver,
    scheme: Scheme,
}

impl PathStepper {
    pub fn new(spec: &PathSpec, stream: u64) -> Self {
        let cols = match &spec.driver {
            Driver::Standard => spec.dim,
            Driver::Sigma { cols, .. } => *cols,
        };
        let n_steps = spec.n_steps();
        let dt = spec.dt();
        PathStepper {
            dim: spec.dim,
            cols,
            n_steps,
            dt,
            sqrt_dt: dt.sqrt(),
            k: 0,
            pos: [0.0; MAX_DIM],
            rng: CounterRng::new(spec.seed, stream),
            driver: spec.driver.clone(),
            scheme: spec.scheme,
        }
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.dt
    }

    pub fn position(&self) -> Point {
        self.pos
    }

    pub fn done(&self) -> bool {
        self.k >= self.n_steps
    }

    /// Advances one step; returns false once the horizon is reached.
    pub fn advance(&mut self) -> bool {
        if self.done() {
            return false;
        }
        match self.scheme {
            Scheme::DonskerWalk => {
                for k in 0..self.dim {
                    self.pos[k] += self.sqrt_dt * self.rng.rademacher();
                }
            }
            Scheme::GaussianIncrements => match &self.driver {
                Driver::Standard => {
                    for k in 0..self.dim {
                        self.pos[k] += self.sqrt_dt * self.rng.standard_normal();
                    }
                }
                Driver::Sigma { sigma, .. } => {
                    let m = sigma.eval(self.time());
                    let mut z = [0.0; MAX_DIM];
                    for zk in z.iter_mut().take(self.cols) {
                        *zk = self.rng.standard_normal();
                    }
                    for i in 0..self.dim {
                        let mut inc = 0.0;
                        for (j, zj) in z.iter().enumerate().take(self.cols) {
                            inc += m[i][j] * zj;
                        }
                        self.pos[i] += self.sqrt_dt * inc;
                    }
                }
            },
        }
        self.k += 1;
        true
    }
}

/// A discrete path `(t_k, w_{t_k})`, including the start at the origin.
#[derive(Debug, Clone)]
pub struct Path {
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
}

/// Materializes one path for the given stream id. Deterministic in
/// `(spec.seed, stream)`.
pub fn sample_path(spec: &PathSpec, stream: u64) -> Path {
    let mut stepper = PathStepper::new(spec, stream);
    let mut times = vec![0.0];
    let mut positions = vec![stepper.position()];
    while stepper.advance() {
        times.push(stepper.time());
        positions.push(stepper.position());
    }
    Path { times, positions }
}

/// First time the translated path enters the set: the smallest `t_k` with
/// `x + w_{t_k}` inside `A` (cell-center membership), or +inf if none.
pub fn hitting_time(path: &Path, set: &GridSet, x: Point) -> f64 {
    for (t, w) in path.times.iter().zip(&path.positions) {
        let mut y = [0.0; MAX_DIM];
        for k in 0..MAX_DIM {
            y[k] = x[k] + w[k];
        }
        if set.contains_point(y) {
            return *t;
        }
    }
    f64::INFINITY
}

/// Empirical `P(tau <= t)` for each requested time, over `n_paths` paths
/// started at `x`. The same path set serves every time, so the output is
/// nondecreasing.
pub fn hit_probability(
    spec: &PathSpec,
    set: &GridSet,
    x: Point,
    times: &[f64],
    n_paths: usize,
) -> Result<Vec<f64>, StochasticError> {
    ensure_ascending(times)?;
    let counts: Vec<u64> = (0..n_paths as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; times.len()],
            |mut acc, i| {
                let mut stepper = PathStepper::new(spec, HITPROB_STREAM | i);
                let mut tau = f64::INFINITY;
                loop {
                    let mut y = [0.0; MAX_DIM];
                    for k in 0..MAX_DIM {
                        y[k] = x[k] + stepper.position()[k];
                    }
                    if set.contains_point(y) {
                        tau = stepper.time();
                        break;
                    }
                    if !stepper.advance() {
                        break;
                    }
                }
                for (j, &t) in times.iter().enumerate() {
                    if tau <= t + 1e-12 {
                        acc[j] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; times.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts.iter().map(|&c| c as f64 / n_paths as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Stamp,
    HittingIntegral,
}

/// Monte Carlo estimate with a 95% confidence half-width
/// `1.96 * sample_std / sqrt(n)`.
#[derive(Debug, Clone, Copy)]
pub struct SausageEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub n_paths: usize,
    pub method: EstimateMethod,
}

impl SausageEstimate {
    pub fn from_samples(samples: &[f64], method: EstimateMethod) -> Self {
        let (mean, std) = mean_std(samples);
        let n = samples.len();
        let half_width_95 = if n > 0 {
            1.96 * std / (n as f64).sqrt()
        } else {
            0.0
        };
        SausageEstimate {
            mean,
            half_width_95,
            n_paths: n,
            method,
        }
    }
}

mod stamp;
use stamp::{BitGrid, MaskStamp};

/// Per-path volumes of the union of set translates along each path
/// (`method = stamp`). Set translates are snapped to the nearest lattice
/// offset at every step and OR-ed into a union mask.
pub fn sausage_volume_samples(
    spec: &PathSpec,
    set: &GridSet,
    n_paths: usize,
) -> Result<Vec<f64>, StochasticError> {
    let profile = union_volume_profile(spec, set, &[spec.horizon], n_paths, SAUSAGE_STREAM, false)?;
    Ok(profile.into_iter().map(|v| v[0]).collect())
}

/// Expected volume of the union of translates (the sausage) up to the
/// horizon, with a 95% confidence interval.
pub fn sausage_volume(
    spec: &PathSpec,
    set: &GridSet,
    n_paths: usize,
) -> Result<SausageEstimate, StochasticError> {
    let samples = sausage_volume_samples(spec, set, n_paths)?;
    Ok(SausageEstimate::from_samples(
        &samples,
        EstimateMethod::Stamp,
    ))
}

/// Per-path volumes at several time thresholds in one pass (thresholds
/// ascending; the union at a threshold covers all stamps with `t_k` up to
/// and including it).
pub fn sausage_volume_profile(
    spec: &PathSpec,
    set: &GridSet,
    thresholds: &[f64],
    n_paths: usize,
) -> Result<Vec<Vec<f64>>, StochasticError> {
    union_volume_profile(spec, set, thresholds, n_paths, SAUSAGE_STREAM, false)
}

/// Per-path volumes of the reflected-translate unions — the integrand of
/// the hitting-probability field — at several thresholds. Uses the hitting
/// stream space, so comparisons against the stamp estimator are genuinely
/// two-sample.
pub fn hitting_volume_profile(
    spec: &PathSpec,
    set: &GridSet,
    thresholds: &[f64],
    n_paths: usize,
) -> Result<Vec<Vec<f64>>, StochasticError> {
    union_volume_profile(spec, set, thresholds, n_paths, HITTING_STREAM, true)
}

fn ensure_ascending(ts: &[f64]) -> Result<(), StochasticError> {
    if ts.windows(2).any(|w| w[1] < w[0]) {
        return Err(StochasticError::InvalidSpec(
            "time thresholds must be ascending".to_string(),
        ));
    }
    Ok(())
}

fn union_volume_profile(
    spec: &PathSpec,
    set: &GridSet,
    thresholds: &[f64],
    n_paths: usize,
    stream_salt: u64,
    negate_offsets: bool,
) -> Result<Vec<Vec<f64>>, StochasticError> {
    ensure_ascending(thresholds)?;
    for &t in thresholds {
        if t > spec.horizon * (1.0 + 1e-9) + 1e-12 {
            return Err(StochasticError::InvalidSpec(format!(
                "threshold {t} beyond horizon {}",
                spec.horizon
            )));
        }
    }
    let stamp = MaskStamp::new(set);
    let cells = set.grid().cell_count();
    (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || BitGrid::new(cells),
            |bits, i| {
                run_union_path(
                    spec,
                    &stamp,
                    bits,
                    stream_salt | i,
                    thresholds,
                    negate_offsets,
                )
            },
        )
        .collect()
}

/// One path's union accumulation; returns the volume at each threshold.
fn run_union_path(
    spec: &PathSpec,
    stamp: &MaskStamp,
    bits: &mut BitGrid,
    stream: u64,
    thresholds: &[f64],
    negate_offsets: bool,
) -> Result<Vec<f64>, StochasticError> {
    bits.clear();
    let mut vols = vec![0.0; thresholds.len()];
    let mut cursor = 0usize;
    let cell_measure = stamp.grid().cell_measure();
    let mut stepper = PathStepper::new(spec, stream);

    let mut offset = [0i64; MAX_DIM];
    stamp.offset_of(&stepper.position(), negate_offsets, &mut offset)?;
    stamp.stamp_full(bits, offset)?;

    loop {
        if stepper.done() {
            break;
        }
        stepper.advance();
        let t = stepper.time();
        while cursor < thresholds.len() && thresholds[cursor] < t - 1e-12 {
            vols[cursor] = bits.count() as f64 * cell_measure;
            cursor += 1;
        }
        let mut next = [0i64; MAX_DIM];
        stamp.offset_of(&stepper.position(), negate_offsets, &mut next)?;
        stamp.stamp_move(bits, offset, next)?;
        offset = next;
    }
    while cursor < thresholds.len() {
        vols[cursor] = bits.count() as f64 * cell_measure;
        cursor += 1;
    }
    Ok(vols)
}

/// Hitting-probability field and its space integral.
#[derive(Debug, Clone)]
pub struct HittingIntegral {
    pub field: GridField,
    pub integral: SausageEstimate,
}

/// Estimates `P(tau_A^x <= t)` for every grid cell `x` and the `h^d`-weighted
/// sum of the field.
///
/// With `common_random_numbers` one path set serves all cells at once: the
/// set of starting points hitting along a path is the union of reflected
/// translates, accumulated with the same stamping machinery (its own RNG
/// stream space — see module docs). Without it, every cell runs `n_paths`
/// dedicated paths; that is the literal estimator, at cells-times-paths
/// cost.
pub fn hitting_integral(
    spec: &PathSpec,
    set: &GridSet,
    t: f64,
    n_paths: usize,
    common_random_numbers: bool,
) -> Result<HittingIntegral, StochasticError> {
    let grid = *set.grid();
    let cells = grid.cell_count();
    if t > spec.horizon * (1.0 + 1e-9) + 1e-12 {
        return Err(StochasticError::InvalidSpec(format!(
            "time {t} beyond horizon {}",
            spec.horizon
        )));
    }
    if !common_random_numbers {
        return cellwise_hitting(spec, set, t, n_paths);
    }
    let stamp = MaskStamp::new(set);
    let thresholds = [t];
    let (counts, mut vols) = (0..n_paths as u64)
        .into_par_iter()
        .try_fold(
            || (vec![0u64; cells], Vec::new(), BitGrid::new(cells)),
            |(mut counts, mut vols, mut bits), i| {
                let v = run_union_path(
                    spec,
                    &stamp,
                    &mut bits,
                    HITTING_STREAM | i,
                    &thresholds,
                    true,
                )?;
                bits.add_into(&mut counts);
                vols.push((i, v[0]));
                Ok((counts, vols, bits))
            },
        )
        .map(|r: Result<_, StochasticError>| r.map(|(c, v, _)| (c, v)))
        .try_reduce(
            || (vec![0u64; cells], Vec::new()),
            |(mut c1, mut v1), (c2, v2)| {
                for (a, b) in c1.iter_mut().zip(c2) {
                    *a += b;
                }
                v1.extend(v2);
                Ok((c1, v1))
            },
        )?;
    vols.sort_by_key(|&(i, _)| i);
    let samples: Vec<f64> = vols.into_iter().map(|(_, v)| v).collect();
    let values: Vec<f64> = counts.iter().map(|&c| c as f64 / n_paths as f64).collect();
    let field = GridField::new(grid, values).expect("counts match the grid");
    Ok(HittingIntegral {
        field,
        integral: SausageEstimate::from_samples(&samples, EstimateMethod::HittingIntegral),
    })
}

fn cellwise_hitting(
    spec: &PathSpec,
    set: &GridSet,
    t: f64,
    n_paths: usize,
) -> Result<HittingIntegral, StochasticError> {
    let grid = *set.grid();
    let cells = grid.cell_count();
    let values: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|lin| {
            let x = grid.cell_center(grid.lattice_of_linear(lin));
            let mut hits = 0u64;
            for j in 0..n_paths as u64 {
                let stream = CELLWISE_STREAM | ((lin as u64) << 34) | j;
                let mut stepper = PathStepper::new(spec, stream);
                loop {
                    let mut y = [0.0; MAX_DIM];
                    for k in 0..MAX_DIM {
                        y[k] = x[k] + stepper.position()[k];
                    }
                    if set.contains_point(y) && stepper.time() <= t + 1e-12 {
                        hits += 1;
                        break;
                    }
                    if !stepper.advance() || stepper.time() > t + 1e-12 {
                        break;
                    }
                }
            }
            hits as f64 / n_paths as f64
        })
        .collect();
    // independent binomial cells: variance of the integral is the sum of
    // per-cell variances scaled by h^(2d)
    let h_d = grid.cell_measure();
    let var: Vec<f64> = values
        .iter()
        .map(|&p| p * (1.0 - p) / n_paths as f64)
        .collect();
    let integral_mean = pairwise_sum(&values) * h_d;
    let integral_sd = (pairwise_sum(&var)).sqrt() * h_d;
    let field = GridField::new(grid, values).expect("length matches");
    Ok(HittingIntegral {
        field,
        integral: SausageEstimate {
            mean: integral_mean,
            half_width_95: 1.96 * integral_sd,
            n_paths,
            method: EstimateMethod::HittingIntegral,
        },
    })
}
