use super::grid::{Grid, LatticePoint};
use super::halfspace::{HalfSpace, LatticeReflection};
use super::set::GridSet;
use super::GeometryError;

/// Scalar function sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() != grid.cell_count() {
            return Err(GeometryError::InvalidData(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidData(
                "field values must be finite".to_string(),
            ));
        }
        Ok(GridField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let values = vec![value; grid.cell_count()];
        GridField { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Indicator of a set: 1 on occupied cells, 0 elsewhere.
    pub fn indicator(set: &GridSet) -> Self {
        let values = set
            .mask()
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        GridField {
            grid: *set.grid(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at_lattice(&self, p: LatticePoint) -> Option<f64> {
        self.grid.linear_of_lattice(p).map(|lin| self.values[lin])
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `h^d` times the sum of all values.
    pub fn integral(&self) -> f64 {
        let sum = crate::util::pairwise_sum(&self.values);
        sum * self.grid.cell_measure()
    }

    /// Discrete L2 norm `sqrt(h^d * sum v^2)`.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        (crate::util::pairwise_sum(&sq) * self.grid.cell_measure()).sqrt()
    }

    pub fn l2_distance(&self, other: &GridField) -> Result<f64, GeometryError> {
        if self.grid != other.grid {
            return Err(GeometryError::GridMismatch);
        }
        let sq: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        Ok((crate::util::pairwise_sum(&sq) * self.grid.cell_measure()).sqrt())
    }

    /// Polarization of a nonnegative function: on the `H` side each
    /// reflection pair keeps its larger value, on the complement its
    /// smaller. Values reflected from outside the grid read as 0. The value
    /// multiset over the grid is preserved exactly.
    ///
    /// Errors with `Clipped` when a positive value sits strictly outside `H`
    /// with its reflection off the grid — that pair's swap would lose mass.
    pub fn polarize(&self, hs: &HalfSpace) -> Result<Self, GeometryError> {
        if self.min() < 0.0 {
            return Err(GeometryError::InvalidData(
                "polarization requires a nonnegative function".to_string(),
            ));
        }
        let refl = LatticeReflection::for_grid(hs, &self.grid)?;
        let mut values = vec![0.0; self.values.len()];
        for (lin, &v) in self.values.iter().enumerate() {
            let p = self.grid.lattice_of_linear(lin);
            let q = refl.reflect(p);
            let vq = match self.grid.linear_of_lattice(q) {
                Some(qlin) => self.values[qlin],
                None => {
                    if v > 0.0 && refl.side(p) > 0 {
                        return Err(GeometryError::Clipped);
                    }
                    0.0
                }
            };
            values[lin] = if refl.in_halfspace(p) {
                v.max(vq)
            } else {
                v.min(vq)
            };
        }
        Ok(GridField {
            grid: self.grid,
            values,
        })
    }

    /// Schwarz symmetric decreasing rearrangement: cells sorted by distance
    /// from the origin (ties by linear index) receive the values sorted in
    /// descending order. Preserves the value multiset exactly and is
    /// radially nonincreasing.
    pub fn schwarz_rearrangement(&self) -> Result<Self, GeometryError> {
        if self.min() < 0.0 {
            return Err(GeometryError::InvalidData(
                "rearrangement requires a nonnegative function".to_string(),
            ));
        }
        let order = self.grid.radius_sorted_cells();
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
        let mut values = vec![0.0; self.values.len()];
        for (rank, &lin) in order.iter().enumerate() {
            values[lin] = sorted[rank];
        }
        Ok(GridField {
            grid: self.grid,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn sorted(values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn polarization_commutes_with_indicator() {
        let g = Grid::new(2, 0.5, &[13, 13]).unwrap();
        let a = GridSet::ball(g, &[0.75, 0.25], 0.8).unwrap();
        let hs = HalfSpace::new(&[1.0, 0.0], 0.25).unwrap();
        let lhs = GridField::indicator(&a).polarize(&hs).unwrap();
        let rhs = GridField::indicator(&a.polarize(&hs).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn polarization_fixes_symmetric_field() {
        let g = Grid::new(1, 0.5, &[11]).unwrap();
        // symmetric about x = 0.5 (lattice level m=2 on the doubled scale)
        let hs = HalfSpace::new(&[1.0], 0.5).unwrap();
        let mut f = GridField::zeros(g);
        for lin in 0..g.cell_count() {
            let x = g.cell_center(g.lattice_of_linear(lin))[0];
            f.values_mut()[lin] = (-(x - 0.5) * (x - 0.5)).exp();
        }
        let p = f.polarize(&hs).unwrap();
        for (a, b) in f.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn polarization_preserves_value_multiset() {
        let g = Grid::new(2, 1.0, &[9, 9]).unwrap();
        let mut rng = CounterRng::new(3, 0);
        let mut f = GridField::zeros(g);
        // positive values only on interior cells so pairs stay on-grid
        for lin in 0..g.cell_count() {
            let p = g.lattice_of_linear(lin);
            if p[0].abs() <= 2 && p[1].abs() <= 2 {
                f.values_mut()[lin] = rng.uniform();
            }
        }
        let hs = HalfSpace::new(&[0.0, 1.0], 0.5).unwrap();
        let p = f.polarize(&hs).unwrap();
        assert_eq!(sorted(f.values()), sorted(p.values()));
    }

    #[test]
    fn polarization_clips_lost_mass() {
        let g = Grid::new(1, 1.0, &[9]).unwrap();
        let mut f = GridField::zeros(g);
        // positive value at x = 3, H = {x <= -2}: reflection lands at -7,
        // off the grid, and x is outside H: the swap would lose the value.
        let lin = g.linear_of_lattice([3, 0, 0]).unwrap();
        f.values_mut()[lin] = 1.0;
        let hs = HalfSpace::new(&[1.0], -2.0).unwrap();
        assert!(matches!(f.polarize(&hs), Err(GeometryError::Clipped)));
    }

    #[test]
    fn schwarz_indicator_is_ball_indicator() {
        let g = Grid::new(2, 0.5, &[13, 13]).unwrap();
        let a = GridSet::boxed(g, &[0.5, -1.0], &[1.5, 0.0]).unwrap();
        let star = GridField::indicator(&a).schwarz_rearrangement().unwrap();
        let ball = GridField::indicator(&a.equal_volume_ball().unwrap());
        assert_eq!(star, ball);
    }

    #[test]
    fn schwarz_preserves_multiset_and_is_radial() {
        let g = Grid::new(2, 1.0, &[9, 9]).unwrap();
        let mut rng = CounterRng::new(5, 1);
        let mut f = GridField::zeros(g);
        for v in f.values_mut() {
            *v = rng.uniform();
        }
        let star = f.schwarz_rearrangement().unwrap();
        assert_eq!(sorted(f.values()), sorted(star.values()));
        // nonincreasing along the radius-sorted order
        let order = g.radius_sorted_cells();
        for w in order.windows(2) {
            assert!(star.values()[w[0]] >= star.values()[w[1]]);
        }
    }

    #[test]
    fn schwarz_fixes_radially_nonincreasing() {
        let g = Grid::new(2, 0.5, &[11, 11]).unwrap();
        let mut f = GridField::zeros(g);
        for lin in 0..g.cell_count() {
            let p = g.lattice_of_linear(lin);
            let r2 = Grid::lattice_radius_sq(p) as f64;
            f.values_mut()[lin] = (-0.3 * r2).exp();
        }
        let star = f.schwarz_rearrangement().unwrap();
        for (a, b) in f.values().iter().zip(star.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn integral_and_norms() {
        let g = Grid::new(1, 0.5, &[9]).unwrap();
        let f = GridField::constant(g, 2.0);
        assert!((f.integral() - 9.0).abs() < 1e-12);
        assert!((f.l2_norm() - (4.0 * 4.5f64).sqrt()).abs() < 1e-12);
    }
}
