//! Iterated polarization toward the equal-volume centered ball.
//!
//! Repeatedly polarizing a set with half-spaces containing the origin
//! drives it toward its symmetrized form; each step preserves measure
//! exactly and never increases the symmetric difference to the target
//! ball. The greedy strategy applies, at every step, the candidate that
//! shrinks that symmetric difference the most.

use super::field::GridField;
use super::grid::Grid;
use super::halfspace::HalfSpace;
use super::set::GridSet;
use super::GeometryError;
use crate::rng::CounterRng;

#[derive(Debug, Clone)]
pub enum Selection {
    /// Scan the candidate pool and apply the best strict improvement; ties
    /// broken by smaller |offset|, then lexicographic normal.
    Greedy,
    /// Sample candidates uniformly from the pool.
    RandomDense { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct PolarizationSchedule {
    pub halfspaces: Vec<HalfSpace>,
    pub selection: Selection,
    /// Stop once |A* Δ A_n| falls to or below this.
    pub stop_tol: f64,
    pub max_steps: usize,
}

impl PolarizationSchedule {
    /// All candidates must contain the origin (offset >= 0); polarizing
    /// toward the complement would move mass away from the target ball.
    pub fn new(
        halfspaces: Vec<HalfSpace>,
        selection: Selection,
        stop_tol: f64,
        max_steps: usize,
    ) -> Result<Self, GeometryError> {
        if halfspaces.iter().any(|h| !h.contains_origin()) {
            return Err(GeometryError::OriginExcluded);
        }
        Ok(PolarizationSchedule {
            halfspaces,
            selection,
            stop_tol,
            max_steps,
        })
    }

    /// The full grid-compatible pool within the family containing the
    /// origin: every axis direction at every half-integer offset that keeps
    /// some cell on each side, plus (in 2D) the four diagonal directions at
    /// multiples of `h/sqrt(2)`.
    pub fn dense_pool(grid: &Grid) -> Vec<HalfSpace> {
        let h = grid.spacing();
        let mut pool = Vec::new();
        for axis in 0..grid.dim() {
            let half = grid.half_extent(axis);
            for sign in [1.0f64, -1.0] {
                let mut nu = [0.0; 3];
                nu[axis] = sign;
                for m in 0..=(2 * (half - 1)) {
                    let c = m as f64 * h / 2.0;
                    pool.push(HalfSpace::new(&nu[..grid.dim()], c).expect("valid normal"));
                }
            }
        }
        if grid.dim() == 2 {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let reach = grid.half_extent(0) + grid.half_extent(1) - 2;
            for sx in [1.0f64, -1.0] {
                for sy in [1.0f64, -1.0] {
                    for m in 0..=reach {
                        let c = m as f64 * h * r;
                        pool.push(HalfSpace::new(&[sx * r, sy * r], c).expect("valid normal"));
                    }
                }
            }
        }
        pool
    }
}

/// One emitted state of the schedule. Step 0 is the unpolarized input.
#[derive(Debug, Clone)]
pub struct ScheduleStep {
    pub set: GridSet,
    pub field: GridField,
    /// Half-space applied to reach this state (`None` for step 0).
    pub applied: Option<HalfSpace>,
    /// |A* Δ A_n|
    pub sym_diff: f64,
    /// Hausdorff distance d(A*, A_n)
    pub hausdorff: f64,
    /// L2 distance between the rearranged field and the current field
    pub field_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    /// |A* Δ A_n| reached `stop_tol` after this many polarizations.
    Converged {
        steps: usize,
    },
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub steps: Vec<ScheduleStep>,
    pub termination: Termination,
    pub target_set: GridSet,
    pub target_field: GridField,
}

impl ScheduleRun {
    pub fn final_step(&self) -> &ScheduleStep {
        self.steps.last().expect("at least the initial step")
    }
}

/// Runs the schedule on `(A, psi)`; `psi` must be admissible (`1` on `A`
/// and within `[0,1]`).
pub fn run_polarization_schedule(
    set: &GridSet,
    field: &GridField,
    schedule: &PolarizationSchedule,
) -> Result<ScheduleRun, GeometryError> {
    if set.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    check_admissible(set, field)?;

    let target_set = set.equal_volume_ball()?;
    let target_field = field.schwarz_rearrangement()?;

    let mut candidates = schedule.halfspaces.clone();
    candidates.sort_by(|a, b| {
        let ka = (
            a.offset().abs(),
            a.normal()[0],
            a.normal()[1],
            a.normal()[2],
        );
        let kb = (
            b.offset().abs(),
            b.normal()[0],
            b.normal()[1],
            b.normal()[2],
        );
        ka.partial_cmp(&kb).expect("finite half-space data")
    });

    let diag = |s: &GridSet, f: &GridField| -> Result<(f64, f64, f64), GeometryError> {
        Ok((
            target_set.symmetric_difference_measure(s)?,
            target_set.hausdorff_distance(s)?,
            target_field.l2_distance(f)?,
        ))
    };

    let mut cur_set = set.clone();
    let mut cur_field = field.clone();
    let (d0, h0, f0) = diag(&cur_set, &cur_field)?;
    let mut steps = vec![ScheduleStep {
        set: cur_set.clone(),
        field: cur_field.clone(),
        applied: None,
        sym_diff: d0,
        hausdorff: h0,
        field_gap: f0,
    }];

    let mut rng = match schedule.selection {
        Selection::RandomDense { seed } => Some(CounterRng::new(seed, 0)),
        Selection::Greedy => None,
    };

    for _ in 0..schedule.max_steps {
        let current = steps.last().expect("nonempty");
        if current.sym_diff <= schedule.stop_tol {
            return Ok(ScheduleRun {
                termination: Termination::Converged {
                    steps: steps.len() - 1,
                },
                steps,
                target_set,
                target_field,
            });
        }
        let chosen = match &mut rng {
            None => {
                // greedy: best strict decrease of |A* Δ P_H A_n|
                let mut best: Option<(f64, usize, GridSet)> = None;
                for (i, hs) in candidates.iter().enumerate() {
                    let Ok(p) = cur_set.polarize(hs) else {
                        continue;
                    };
                    let d = target_set.symmetric_difference_measure(&p)?;
                    if d < current.sym_diff - 1e-15
                        && best.as_ref().is_none_or(|(bd, _, _)| d < *bd)
                    {
                        best = Some((d, i, p));
                    }
                }
                match best {
                    Some((_, i, p)) => (candidates[i].clone(), p),
                    None => {
                        return Err(GeometryError::Stalled {
                            symmetric_difference: current.sym_diff,
                        })
                    }
                }
            }
            Some(rng) => {
                // sample until a candidate applies cleanly
                let mut pick = None;
                for _ in 0..(4 * candidates.len().max(16)) {
                    let i = rng.below(candidates.len() as u64) as usize;
                    if let Ok(p) = cur_set.polarize(&candidates[i]) {
                        pick = Some((candidates[i].clone(), p));
                        break;
                    }
                }
                pick.ok_or(GeometryError::Stalled {
                    symmetric_difference: current.sym_diff,
                })?
            }
        };
        let (hs, next_set) = chosen;
        let next_field = cur_field.polarize(&hs)?;
        let (d, hd, fg) = diag(&next_set, &next_field)?;
        steps.push(ScheduleStep {
            set: next_set.clone(),
            field: next_field.clone(),
            applied: Some(hs),
            sym_diff: d,
            hausdorff: hd,
            field_gap: fg,
        });
        cur_set = next_set;
        cur_field = next_field;
    }

    let termination = if steps.last().expect("nonempty").sym_diff <= schedule.stop_tol {
        Termination::Converged {
            steps: steps.len() - 1,
        }
    } else {
        Termination::MaxSteps
    };
    Ok(ScheduleRun {
        steps,
        termination,
        target_set,
        target_field,
    })
}

pub(crate) fn check_admissible(set: &GridSet, field: &GridField) -> Result<(), GeometryError> {
    if set.grid() != field.grid() {
        return Err(GeometryError::GridMismatch);
    }
    if field.min() < 0.0 || field.max() > 1.0 {
        return Err(GeometryError::InvalidData(
            "initial data must lie in [0, 1]".to_string(),
        ));
    }
    for (lin, &inside) in set.mask().iter().enumerate() {
        if inside && field.values()[lin] != 1.0 {
            return Err(GeometryError::InvalidData(
                "initial data must equal 1 on the obstacle".to_string(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_ball_converges_immediately() {
        let g = Grid::new(2, 0.5, &[15, 15]).unwrap();
        let b = GridSet::ball(g, &[0.0, 0.0], 1.4).unwrap();
        let psi = GridField::indicator(&b);
        let sched = PolarizationSchedule::new(
            PolarizationSchedule::dense_pool(&g),
            Selection::Greedy,
            0.0,
            50,
        )
        .unwrap();
        let run = run_polarization_schedule(&b, &psi, &sched).unwrap();
        assert_eq!(run.termination, Termination::Converged { steps: 0 });
        assert_eq!(run.steps[0].sym_diff, 0.0);
    }

    #[test]
    fn one_dimensional_interval_reaches_ball() {
        // A = [1,2] at h = 0.1: 11 cells; greedy must center it well within
        // 50 steps (one exact polarization suffices).
        let h = 0.1;
        let g = Grid::new(1, h, &[61]).unwrap();
        let a = GridSet::from_predicate(g, |x| x[0] >= 1.0 - 1e-12 && x[0] <= 2.0 + 1e-12).unwrap();
        assert_eq!(a.cell_count(), 11);
        let psi = GridField::indicator(&a);
        let sched = PolarizationSchedule::new(
            PolarizationSchedule::dense_pool(&g),
            Selection::Greedy,
            h,
            50,
        )
        .unwrap();
        let run = run_polarization_schedule(&a, &psi, &sched).unwrap();
        match run.termination {
            Termination::Converged { steps } => assert!(steps <= 50),
            Termination::MaxSteps => panic!("schedule did not converge"),
        }
        assert!(run.final_step().sym_diff <= h);
        // measure preserved at every step
        for s in &run.steps {
            assert_eq!(s.set.cell_count(), a.cell_count());
        }
    }

    #[test]
    fn greedy_diagnostic_is_nonincreasing() {
        let g = Grid::new(2, 0.25, &[33, 33]).unwrap();
        let a = GridSet::boxed(g, &[0.5, -1.5], &[1.5, -0.5]).unwrap();
        let psi = GridField::indicator(&a);
        let sched = PolarizationSchedule::new(
            PolarizationSchedule::dense_pool(&g),
            Selection::Greedy,
            0.05,
            60,
        )
        .unwrap();
        let run = run_polarization_schedule(&a, &psi, &sched).unwrap();
        for w in run.steps.windows(2) {
            assert!(w[1].sym_diff <= w[0].sym_diff + 1e-12);
        }
    }

    #[test]
    fn random_dense_is_deterministic() {
        let g = Grid::new(2, 0.25, &[25, 25]).unwrap();
        let a = GridSet::boxed(g, &[0.25, 0.25], &[1.25, 1.0]).unwrap();
        let psi = GridField::indicator(&a);
        let sched = PolarizationSchedule::new(
            PolarizationSchedule::dense_pool(&g),
            Selection::RandomDense { seed: 9 },
            0.0,
            20,
        )
        .unwrap();
        let r1 = run_polarization_schedule(&a, &psi, &sched).unwrap();
        let r2 = run_polarization_schedule(&a, &psi, &sched).unwrap();
        assert_eq!(r1.steps.len(), r2.steps.len());
        for (s1, s2) in r1.steps.iter().zip(&r2.steps) {
            assert_eq!(s1.set, s2.set);
            assert_eq!(s1.sym_diff.to_bits(), s2.sym_diff.to_bits());
        }
    }

    #[test]
    fn greedy_stall_is_an_error() {
        // the only candidate fixes the set, so the tolerance stays unmet
        let g = Grid::new(1, 1.0, &[13]).unwrap();
        let a = GridSet::from_predicate(g, |x| x[0] >= 2.0 - 1e-12 && x[0] <= 3.0 + 1e-12).unwrap();
        let psi = GridField::indicator(&a);
        // H = {x >= 0} contains A, whose reflection is disjoint: P_H A = A
        let fixing = HalfSpace::new(&[-1.0], 0.0).unwrap();
        let sched = PolarizationSchedule::new(vec![fixing], Selection::Greedy, 0.0, 10).unwrap();
        assert!(matches!(
            run_polarization_schedule(&a, &psi, &sched),
            Err(GeometryError::Stalled { .. })
        ));
    }

    #[test]
    fn rejects_halfspaces_missing_origin() {
        let bad = vec![HalfSpace::new(&[1.0, 0.0], -0.5).unwrap()];
        assert!(matches!(
            PolarizationSchedule::new(bad, Selection::Greedy, 0.0, 10),
            Err(GeometryError::OriginExcluded)
        ));
    }

    #[test]
    fn rejects_empty_set_and_bad_field() {
        let g = Grid::new(1, 0.5, &[9]).unwrap();
        let sched = PolarizationSchedule::new(vec![], Selection::Greedy, 0.0, 1).unwrap();
        let empty = GridSet::empty(g);
        let zero = GridField::zeros(g);
        assert!(matches!(
            run_polarization_schedule(&empty, &zero, &sched),
            Err(GeometryError::EmptySet)
        ));
        let a = GridSet::ball(g, &[0.0], 0.6).unwrap();
        assert!(run_polarization_schedule(&a, &zero, &sched).is_err()); // psi != 1 on A
    }
}
