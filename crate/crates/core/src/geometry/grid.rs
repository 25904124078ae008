use super::GeometryError;

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point in physical coordinates. Components beyond the grid dimension
/// are zero.
pub type Point = [f64; MAX_DIM];

/// A cell position in lattice coordinates (integer offsets from the grid
/// center; the cell center is at `p * h`).
pub type LatticePoint = [i64; MAX_DIM];

/// Uniform grid, symmetric about the origin.
///
/// Per-axis extents are odd so one cell sits exactly at the origin. Cell
/// centers along axis `k` are `p * h` for integer `p` in
/// `-half..=half` with `half = (extent - 1) / 2`. Unused trailing axes have
/// extent 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    spacing: f64,
    extent: [usize; MAX_DIM],
}

impl Grid {
    pub fn new(dim: usize, spacing: f64, extent: &[usize]) -> Result<Self, GeometryError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GeometryError::InvalidGrid(format!(
                "dimension must be 1..=3, got {dim}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(GeometryError::InvalidGrid(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        if extent.len() != dim {
            return Err(GeometryError::InvalidGrid(format!(
                "expected {dim} extents, got {}",
                extent.len()
            )));
        }
        let mut ext = [1usize; MAX_DIM];
        for (k, &n) in extent.iter().enumerate() {
            if n < 3 || n % 2 == 0 {
                return Err(GeometryError::InvalidGrid(format!(
                    "extent along axis {k} must be odd and >= 3, got {n}"
                )));
            }
            ext[k] = n;
        }
        Ok(Grid {
            dim,
            spacing,
            extent: ext,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn extent(&self) -> &[usize; MAX_DIM] {
        &self.extent
    }

    /// Half-extent along an axis: cells span lattice coordinates
    /// `-half..=half`.
    pub fn half_extent(&self, axis: usize) -> i64 {
        (self.extent[axis] as i64 - 1) / 2
    }

    pub fn cell_count(&self) -> usize {
        self.extent.iter().product()
    }

    /// Cell volume `h^d`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Row-major strides: axis 0 fastest.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        [1, self.extent[0], self.extent[0] * self.extent[1]]
    }

    #[inline]
    pub fn linear_of_lattice(&self, p: LatticePoint) -> Option<usize> {
        let mut lin = 0usize;
        let strides = self.strides();
        for k in 0..MAX_DIM {
            let half = self.half_extent(k);
            if p[k] < -half || p[k] > half {
                return None;
            }
            lin += (p[k] + half) as usize * strides[k];
        }
        Some(lin)
    }

    #[inline]
    pub fn lattice_of_linear(&self, lin: usize) -> LatticePoint {
        let mut p = [0i64; MAX_DIM];
        let mut rest = lin;
        for k in 0..MAX_DIM {
            let idx = rest % self.extent[k];
            rest /= self.extent[k];
            p[k] = idx as i64 - self.half_extent(k);
        }
        p
    }

    #[inline]
    pub fn cell_center(&self, p: LatticePoint) -> Point {
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = p[k] as f64 * self.spacing;
        }
        x
    }

    /// Lattice cell whose center is nearest to `x`, or `None` when `x` lies
    /// outside the grid box (component-wise nearest-center rounding).
    #[inline]
    pub fn cell_containing(&self, x: Point) -> Option<LatticePoint> {
        let mut p = [0i64; MAX_DIM];
        for k in 0..self.dim {
            let v = (x[k] / self.spacing).round();
            if !v.is_finite() || v.abs() > self.half_extent(k) as f64 {
                return None;
            }
            p[k] = v as i64;
        }
        Some(p)
    }

    /// True when the cell touches the outermost layer along any active axis.
    #[inline]
    pub fn is_margin(&self, p: LatticePoint) -> bool {
        (0..self.dim).any(|k| p[k].abs() == self.half_extent(k))
    }

    /// Distance (in cells) from the nearest grid face; margin cells have 0.
    #[inline]
    pub fn boundary_distance(&self, p: LatticePoint) -> i64 {
        (0..self.dim)
            .map(|k| self.half_extent(k) - p[k].abs())
            .min()
            .unwrap_or(0)
    }

    /// Iterate lattice coordinates of every cell in linear (row-major) order.
    pub fn iter_lattice(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.cell_count()).map(move |lin| self.lattice_of_linear(lin))
    }

    /// Squared radius of a cell center in lattice units (exact integer).
    #[inline]
    pub fn lattice_radius_sq(p: LatticePoint) -> i64 {
        p[0] * p[0] + p[1] * p[1] + p[2] * p[2]
    }

    /// Linear cell indices sorted by distance from the origin, ties broken
    /// by linear (lexicographic) index. This is the canonical order used by
    /// both the Schwarz rearrangement and the discrete equal-volume ball.
    pub fn radius_sorted_cells(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = (0..self.cell_count()).collect();
        cells.sort_by_key(|&lin| (Self::lattice_radius_sq(self.lattice_of_linear(lin)), lin));
        cells
    }

    /// Compact human-readable description for report provenance.
    pub fn describe(&self) -> String {
        let ext: Vec<String> = self.extent[..self.dim]
            .iter()
            .map(|n| n.to_string())
            .collect();
        format!("d={} h={} extent={}", self.dim, self.spacing, ext.join("x"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_extent() {
        assert!(Grid::new(1, 0.1, &[10]).is_err());
        assert!(Grid::new(2, 0.1, &[9, 11]).is_ok());
        assert!(Grid::new(2, -0.1, &[9, 9]).is_err());
        assert!(Grid::new(2, 0.1, &[9]).is_err());
    }

    #[test]
    fn linear_lattice_round_trip() {
        let g = Grid::new(3, 0.5, &[5, 7, 3]).unwrap();
        for lin in 0..g.cell_count() {
            let p = g.lattice_of_linear(lin);
            assert_eq!(g.linear_of_lattice(p), Some(lin));
        }
        assert_eq!(g.linear_of_lattice([3, 0, 0]), None);
    }

    #[test]
    fn cell_center_and_containing() {
        let g = Grid::new(2, 0.25, &[9, 9]).unwrap();
        let x = g.cell_center([2, -3, 0]);
        assert_eq!(x[0], 0.5);
        assert_eq!(x[1], -0.75);
        assert_eq!(g.cell_containing([0.51, -0.7, 0.0]), Some([2, -3, 0]));
        assert_eq!(g.cell_containing([5.0, 0.0, 0.0]), None);
    }

    #[test]
    fn margin_and_boundary_distance() {
        let g = Grid::new(2, 1.0, &[5, 5]).unwrap();
        assert!(g.is_margin([2, 0, 0]));
        assert!(!g.is_margin([1, 1, 0]));
        assert_eq!(g.boundary_distance([1, 0, 0]), 1);
        assert_eq!(g.boundary_distance([0, 0, 0]), 2);
    }

    #[test]
    fn radius_order_starts_at_origin() {
        let g = Grid::new(2, 1.0, &[5, 5]).unwrap();
        let order = g.radius_sorted_cells();
        assert_eq!(g.lattice_of_linear(order[0]), [0, 0, 0]);
        // next four are the unit neighbors in linear order
        let next: Vec<LatticePoint> = order[1..5]
            .iter()
            .map(|&l| g.lattice_of_linear(l))
            .collect();
        assert_eq!(next, vec![[0, -1, 0], [-1, 0, 0], [1, 0, 0], [0, 1, 0]]);
    }
}
