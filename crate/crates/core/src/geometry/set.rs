use super::grid::{Grid, LatticePoint, Point};
use super::halfspace::{HalfSpace, LatticeReflection};
use super::GeometryError;

/// Compact set represented as a cell-center occupancy mask.
///
/// Invariants: the mask is strictly inside the grid (a one-cell margin of
/// empty cells along every active axis), so reflections and translations
/// performed by the operations never silently clip; `measure` is the exact
/// cell count times `h^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSet {
    grid: Grid,
    mask: Vec<bool>,
}

impl GridSet {
    pub fn new(grid: Grid, mask: Vec<bool>) -> Result<Self, GeometryError> {
        if mask.len() != grid.cell_count() {
            return Err(GeometryError::InvalidData(format!(
                "mask has {} cells, grid has {}",
                mask.len(),
                grid.cell_count()
            )));
        }
        let set = GridSet { grid, mask };
        for p in set.cells() {
            if set.grid.is_margin(p) {
                return Err(GeometryError::Clipped);
            }
        }
        Ok(set)
    }

    pub fn empty(grid: Grid) -> Self {
        let mask = vec![false; grid.cell_count()];
        GridSet { grid, mask }
    }

    /// Set of all cells whose center satisfies `pred`.
    pub fn from_predicate(grid: Grid, pred: impl Fn(Point) -> bool) -> Result<Self, GeometryError> {
        let mask = (0..grid.cell_count())
            .map(|lin| pred(grid.cell_center(grid.lattice_of_linear(lin))))
            .collect();
        GridSet::new(grid, mask)
    }

    /// Closed ball primitive: cells with `|center - c| <= radius`.
    pub fn ball(grid: Grid, center: &[f64], radius: f64) -> Result<Self, GeometryError> {
        let mut c = [0.0; 3];
        c[..center.len().min(3)].copy_from_slice(&center[..center.len().min(3)]);
        Self::from_predicate(grid, |x| {
            let mut d2 = 0.0;
            for k in 0..grid.dim() {
                d2 += (x[k] - c[k]) * (x[k] - c[k]);
            }
            d2.sqrt() <= radius + 1e-12
        })
    }

    /// Closed axis-aligned box primitive: cells with `min <= center <= max`.
    pub fn boxed(grid: Grid, min: &[f64], max: &[f64]) -> Result<Self, GeometryError> {
        let d = grid.dim();
        let mut lo = [f64::NEG_INFINITY; 3];
        let mut hi = [f64::INFINITY; 3];
        lo[..d.min(min.len())].copy_from_slice(&min[..d.min(min.len())]);
        hi[..d.min(max.len())].copy_from_slice(&max[..d.min(max.len())]);
        Self::from_predicate(grid, |x| {
            (0..d).all(|k| x[k] >= lo[k] - 1e-12 && x[k] <= hi[k] + 1e-12)
        })
    }

    pub fn union(&self, other: &GridSet) -> Result<Self, GeometryError> {
        if self.grid != other.grid {
            return Err(GeometryError::GridMismatch);
        }
        let mask = self
            .mask
            .iter()
            .zip(&other.mask)
            .map(|(a, b)| *a || *b)
            .collect();
        GridSet::new(self.grid, mask)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains_lattice(&self, p: LatticePoint) -> bool {
        match self.grid.linear_of_lattice(p) {
            Some(lin) => self.mask[lin],
            None => false,
        }
    }

    /// Point membership through the cell containing the point.
    #[inline]
    pub fn contains_point(&self, x: Point) -> bool {
        match self.grid.cell_containing(x) {
            Some(p) => self.contains_lattice(p),
            None => false,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn measure(&self) -> f64 {
        self.cell_count() as f64 * self.grid.cell_measure()
    }

    /// Lattice coordinates of occupied cells, in linear order.
    pub fn cells(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(lin, _)| self.grid.lattice_of_linear(lin))
    }

    /// Boundary measure `h^(d-1)` times the number of exposed cell faces.
    pub fn perimeter(&self) -> f64 {
        let d = self.grid.dim();
        let mut faces = 0usize;
        for p in self.cells() {
            for k in 0..d {
                for s in [-1i64, 1] {
                    let mut q = p;
                    q[k] += s;
                    if !self.contains_lattice(q) {
                        faces += 1;
                    }
                }
            }
        }
        faces as f64 * self.grid.spacing().powi(d as i32 - 1)
    }

    /// Lattice bounding box of the occupied cells.
    pub fn bounding_box(&self) -> Option<(LatticePoint, LatticePoint)> {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        let mut any = false;
        for p in self.cells() {
            any = true;
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        any.then_some((lo, hi))
    }

    /// Reflection across the bounding hyperplane of a grid-compatible
    /// half-space. Exact cell bijection: the measure is preserved exactly.
    pub fn reflect(&self, hs: &HalfSpace) -> Result<Self, GeometryError> {
        let refl = LatticeReflection::for_grid(hs, &self.grid)?;
        let mut mask = vec![false; self.mask.len()];
        for p in self.cells() {
            let q = refl.reflect(p);
            let lin = self
                .grid
                .linear_of_lattice(q)
                .ok_or(GeometryError::Clipped)?;
            if self.grid.is_margin(q) {
                return Err(GeometryError::Clipped);
            }
            mask[lin] = true;
        }
        Ok(GridSet {
            grid: self.grid,
            mask,
        })
    }

    /// Polarization (two-point rearrangement) with respect to `hs`:
    /// `((A ∪ A_H) ∩ H) ∪ (A ∩ A_H)` evaluated cellwise.
    ///
    /// Cells on the hyperplane are their own reflections, so either branch
    /// agrees there. Measure is preserved exactly (cells pair up under the
    /// reflection).
    pub fn polarize(&self, hs: &HalfSpace) -> Result<Self, GeometryError> {
        let refl = LatticeReflection::for_grid(hs, &self.grid)?;
        let mut mask = vec![false; self.mask.len()];
        for p in self.cells() {
            let q = refl.reflect(p);
            // a cell keeps its place when its partner is also occupied or
            // when it already sits on the H side; only a lone cell outside H
            // moves, and only then must the reflected cell be usable
            if self.contains_lattice(q) || refl.in_halfspace(p) {
                mask[self.grid.linear_of_lattice(p).expect("cell of the set")] = true;
            } else {
                let q_lin = self
                    .grid
                    .linear_of_lattice(q)
                    .ok_or(GeometryError::Clipped)?;
                if self.grid.is_margin(q) {
                    return Err(GeometryError::Clipped);
                }
                mask[q_lin] = true;
            }
        }
        Ok(GridSet {
            grid: self.grid,
            mask,
        })
    }

    /// Discrete equal-volume centered ball: the `cell_count(A)` cells
    /// nearest the origin (radius ties broken by linear index — the same
    /// order the Schwarz rearrangement uses, so indicators commute exactly
    /// and the measure is preserved exactly).
    pub fn equal_volume_ball(&self) -> Result<Self, GeometryError> {
        let n = self.cell_count();
        if n == 0 {
            return Err(GeometryError::EmptySet);
        }
        let order = self.grid.radius_sorted_cells();
        let mut mask = vec![false; self.mask.len()];
        for &lin in order.iter().take(n) {
            let p = self.grid.lattice_of_linear(lin);
            if self.grid.is_margin(p) {
                return Err(GeometryError::Clipped);
            }
            mask[lin] = true;
        }
        Ok(GridSet {
            grid: self.grid,
            mask,
        })
    }

    /// Radius of the continuum ball of the same measure:
    /// solves `omega_d r^d = measure(A)`.
    pub fn equal_volume_radius(&self) -> Result<f64, GeometryError> {
        let m = self.measure();
        if m <= 0.0 {
            return Err(GeometryError::EmptySet);
        }
        let d = self.grid.dim();
        Ok((m / unit_ball_volume(d)).powf(1.0 / d as f64))
    }

    /// Hausdorff distance between the cell-center point clouds.
    pub fn hausdorff_distance(&self, other: &GridSet) -> Result<f64, GeometryError> {
        if self.grid != other.grid {
            return Err(GeometryError::GridMismatch);
        }
        if self.is_empty() || other.is_empty() {
            return Err(GeometryError::EmptySet);
        }
        let a: Vec<LatticePoint> = self.cells().collect();
        let b: Vec<LatticePoint> = other.cells().collect();
        let d2 = directed_sq(&a, &b).max(directed_sq(&b, &a));
        Ok((d2 as f64).sqrt() * self.grid.spacing())
    }

    /// Measure of the symmetric difference of the two masks.
    pub fn symmetric_difference_measure(&self, other: &GridSet) -> Result<f64, GeometryError> {
        if self.grid != other.grid {
            return Err(GeometryError::GridMismatch);
        }
        let count = self
            .mask
            .iter()
            .zip(&other.mask)
            .filter(|(a, b)| a != b)
            .count();
        Ok(count as f64 * self.grid.cell_measure())
    }
}

/// Volume of the unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => unreachable!("dimension checked at grid construction"),
    }
}

fn directed_sq(from: &[LatticePoint], to: &[LatticePoint]) -> i64 {
    let mut worst = 0i64;
    for p in from {
        let mut best = i64::MAX;
        for q in to {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            let dz = p[2] - q[2];
            let d2 = dx * dx + dy * dy + dz * dz;
            if d2 < best {
                best = d2;
                if best == 0 {
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, h: f64) -> Grid {
        Grid::new(1, h, &[n]).unwrap()
    }

    /// 1D helper: cells with centers in [a, b].
    fn interval(grid: Grid, a: f64, b: f64) -> GridSet {
        GridSet::from_predicate(grid, |x| x[0] >= a - 1e-12 && x[0] <= b + 1e-12).unwrap()
    }

    #[test]
    fn margin_is_enforced() {
        let g = grid1(5, 1.0);
        let mut mask = vec![false; 5];
        mask[0] = true; // margin cell
        assert!(matches!(GridSet::new(g, mask), Err(GeometryError::Clipped)));
    }

    #[test]
    fn measure_counts_cells() {
        let g = grid1(9, 0.5);
        let a = interval(g, -1.0, 1.0); // 5 cells
        assert_eq!(a.cell_count(), 5);
        assert!((a.measure() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn reflect_interval_across_level() {
        // cells at h=1: A = {2, 3}; H = {x <= 1}: sigma(x) = 2 - x -> {-1, 0}
        let g = grid1(9, 1.0);
        let a = interval(g, 2.0, 3.0);
        let hs = HalfSpace::new(&[1.0], 1.0).unwrap();
        let r = a.reflect(&hs).unwrap();
        let cells: Vec<i64> = r.cells().map(|p| p[0]).collect();
        assert_eq!(cells, vec![-1, 0]);
        assert_eq!(r.cell_count(), a.cell_count());
    }

    #[test]
    fn reflect_symmetric_ball_with_zero_offset_is_identity() {
        let g = Grid::new(2, 0.5, &[11, 11]).unwrap();
        let b = GridSet::ball(g, &[0.0, 0.0], 1.2).unwrap();
        let hs = HalfSpace::new(&[1.0, 0.0], 0.0).unwrap();
        assert_eq!(b.reflect(&hs).unwrap(), b);
    }

    #[test]
    fn reflect_clips_when_image_leaves_grid() {
        let g = grid1(9, 1.0);
        let a = interval(g, 2.0, 3.0);
        // sigma(x) = -4 - x maps 3 -> -7, outside the grid
        let hs = HalfSpace::new(&[1.0], -2.0).unwrap();
        assert!(matches!(a.reflect(&hs), Err(GeometryError::Clipped)));
    }

    #[test]
    fn polarize_interval_toward_origin() {
        // A = {2,3}, H = {x <= 1} (origin inside): P_H A = {-1, 0}
        let g = grid1(9, 1.0);
        let a = interval(g, 2.0, 3.0);
        let hs = HalfSpace::new(&[1.0], 1.0).unwrap();
        let p = a.polarize(&hs).unwrap();
        let cells: Vec<i64> = p.cells().map(|q| q[0]).collect();
        assert_eq!(cells, vec![-1, 0]);
    }

    #[test]
    fn polarize_fixes_subset_of_interior() {
        // A strictly inside H with A disjoint from its reflection: P_H A = A.
        let g = grid1(13, 1.0);
        let a = interval(g, -4.0, -3.0);
        let hs = HalfSpace::new(&[1.0], 1.0).unwrap(); // reflection of A is {5,6}, disjoint
        assert_eq!(a.polarize(&hs).unwrap(), a);
    }

    #[test]
    fn polarize_fixes_reflection_symmetric_sets() {
        let g = grid1(13, 1.0);
        let a = interval(g, -2.0, 4.0); // symmetric about x = 1
        let hs = HalfSpace::new(&[1.0], 1.0).unwrap();
        assert_eq!(a.polarize(&hs).unwrap(), a);
    }

    #[test]
    fn polarize_cellwise_formula_oracle() {
        // Independent oracle: evaluate ((A ∪ A_H) ∩ H) ∪ (A ∩ A_H) per cell
        // with float reflection, and compare masks.
        let g = Grid::new(2, 0.5, &[13, 13]).unwrap();
        let a = GridSet::ball(g, &[1.0, 0.5], 0.8).unwrap();
        let hs = HalfSpace::new(&[0.0, 1.0], 0.25).unwrap();
        let p = a.polarize(&hs).unwrap();
        for lin in 0..g.cell_count() {
            let x = g.cell_center(g.lattice_of_linear(lin));
            let sx = hs.reflect_point(x);
            let in_a = a.contains_point(x);
            let in_ah = a.contains_point(sx);
            let expect = ((in_a || in_ah) && hs.contains(x)) || (in_a && in_ah);
            assert_eq!(p.mask()[lin], expect, "cell {x:?}");
        }
        assert_eq!(p.cell_count(), a.cell_count());
    }

    #[test]
    fn polarize_is_idempotent() {
        let g = Grid::new(2, 0.5, &[13, 13]).unwrap();
        let a = GridSet::ball(g, &[0.75, -0.5], 0.9).unwrap();
        let hs = HalfSpace::new(&[1.0, 0.0], 0.25).unwrap();
        let p1 = a.polarize(&hs).unwrap();
        let p2 = p1.polarize(&hs).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn polarize_set_bounds() {
        // P_H A ⊆ A ∪ A_H and A ∩ A_H ∩ H ⊆ P_H A
        let g = Grid::new(2, 0.5, &[13, 13]).unwrap();
        let a = GridSet::ball(g, &[0.5, 0.5], 1.0).unwrap();
        let hs = HalfSpace::new(&[1.0, 0.0], 0.5).unwrap();
        let ah = a.reflect(&hs).unwrap();
        let p = a.polarize(&hs).unwrap();
        for lin in 0..g.cell_count() {
            let pt = g.lattice_of_linear(lin);
            if p.mask()[lin] {
                assert!(a.mask()[lin] || ah.mask()[lin]);
            }
            let x = g.cell_center(pt);
            if a.mask()[lin] && ah.mask()[lin] && hs.contains(x) {
                assert!(p.mask()[lin]);
            }
        }
    }

    #[test]
    fn centered_ball_is_fixed_by_origin_polarizations() {
        let g = Grid::new(2, 0.5, &[15, 15]).unwrap();
        let b = GridSet::ball(g, &[0.0, 0.0], 1.6).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let pool = [
            HalfSpace::new(&[1.0, 0.0], 0.75).unwrap(),
            HalfSpace::new(&[-1.0, 0.0], 0.0).unwrap(),
            HalfSpace::new(&[0.0, 1.0], 1.0).unwrap(),
            HalfSpace::new(&[r, r], 2.0 * 0.5 * r).unwrap(),
            HalfSpace::new(&[r, -r], 0.0).unwrap(),
        ];
        for hs in &pool {
            assert!(hs.contains_origin());
            assert_eq!(b.polarize(hs).unwrap(), b, "{}", hs.describe());
        }
    }

    #[test]
    fn equal_volume_ball_examples() {
        // d=1: [2,3] at h=0.5 has 3 cells -> centered 3-cell interval
        let g = grid1(17, 0.5);
        let a = interval(g, 2.0, 3.0);
        let b = a.equal_volume_ball().unwrap();
        let cells: Vec<i64> = b.cells().map(|p| p[0]).collect();
        assert_eq!(cells, vec![-1, 0, 1]);
        assert_eq!(b.cell_count(), a.cell_count());
        // a centered ball maps to itself
        let ball = GridSet::ball(g, &[0.0], 1.5).unwrap();
        assert_eq!(ball.equal_volume_ball().unwrap(), ball);
        // empty set is rejected
        assert!(matches!(
            GridSet::empty(g).equal_volume_ball(),
            Err(GeometryError::EmptySet)
        ));
    }

    #[test]
    fn equal_volume_radius_two_squares() {
        // two disjoint closed unit squares -> disk radius sqrt(2/pi); the
        // discrete measure (and with it the recovered radius) converges
        // under refinement
        let target = (2.0 / std::f64::consts::PI).sqrt();
        let mut radius_errs = Vec::new();
        let mut measure_errs = Vec::new();
        for n in [41usize, 81, 161] {
            let h = 4.0 / (n - 1) as f64;
            let g = Grid::new(2, h, &[n, n]).unwrap();
            let s1 = GridSet::boxed(g, &[-1.6, -0.5], &[-0.6, 0.5]).unwrap();
            let s2 = GridSet::boxed(g, &[0.6, -0.5], &[1.6, 0.5]).unwrap();
            let a = s1.union(&s2).unwrap();
            radius_errs.push((a.equal_volume_radius().unwrap() - target).abs());
            measure_errs.push((a.measure() - 2.0).abs());
            let ball = a.equal_volume_ball().unwrap();
            assert_eq!(ball.cell_count(), a.cell_count());
        }
        for errs in [&radius_errs, &measure_errs] {
            assert!(
                errs.windows(2).all(|w| w[1] <= w[0]) && errs[2] < errs[0],
                "errors do not shrink under refinement: {errs:?}"
            );
        }
        assert!(radius_errs[2] < 0.03, "{radius_errs:?}");
    }

    #[test]
    fn hausdorff_examples() {
        let g = grid1(9, 1.0);
        let a = interval(g, 0.0, 1.0);
        let b = interval(g, 0.0, 2.0);
        assert_eq!(a.hausdorff_distance(&a).unwrap(), 0.0);
        // farthest cell of B (x=2) is 1 away from nearest cell of A (x=1)
        assert!((a.hausdorff_distance(&b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            a.hausdorff_distance(&b).unwrap(),
            b.hausdorff_distance(&a).unwrap()
        );
        assert!(matches!(
            a.hausdorff_distance(&GridSet::empty(g)),
            Err(GeometryError::EmptySet)
        ));
    }

    #[test]
    fn symmetric_difference_examples() {
        let g = grid1(11, 1.0);
        let a = interval(g, 0.0, 2.0);
        let b = interval(g, 1.0, 3.0);
        assert_eq!(a.symmetric_difference_measure(&a).unwrap(), 0.0);
        // XOR = {0} ∪ {3} -> 2 cells
        assert!((a.symmetric_difference_measure(&b).unwrap() - 2.0).abs() < 1e-15);
        let c = interval(g, -3.0, -3.0);
        let disjoint = a.symmetric_difference_measure(&c).unwrap();
        assert!((disjoint - (a.measure() + c.measure())).abs() < 1e-15);
    }

    #[test]
    fn perimeter_of_square() {
        let g = Grid::new(2, 0.5, &[11, 11]).unwrap();
        let a = GridSet::boxed(g, &[-1.0, -1.0], &[1.0, 1.0]).unwrap(); // 5x5 cells
        assert!((a.perimeter() - 4.0 * 5.0 * 0.5).abs() < 1e-12);
    }
}
