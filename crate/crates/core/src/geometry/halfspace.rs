use super::grid::{Grid, LatticePoint, Point, MAX_DIM};
use super::GeometryError;

/// Closed half-space `H = { x : <x, normal> <= offset }` with unit normal.
///
/// `offset >= 0` means the origin belongs to `H`; schedules that polarize
/// toward the origin require that.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    normal: Point,
    offset: f64,
}

impl HalfSpace {
    /// Builds a half-space, normalizing the given normal (the offset is
    /// rescaled accordingly so the point set is unchanged).
    pub fn new(normal: &[f64], offset: f64) -> Result<Self, GeometryError> {
        if normal.is_empty() || normal.len() > MAX_DIM {
            return Err(GeometryError::InvalidData(format!(
                "half-space normal must have 1..=3 components, got {}",
                normal.len()
            )));
        }
        let mut nu = [0.0; MAX_DIM];
        nu[..normal.len()].copy_from_slice(normal);
        let len = (nu[0] * nu[0] + nu[1] * nu[1] + nu[2] * nu[2]).sqrt();
        if !(len.is_finite() && len > 0.0) {
            return Err(GeometryError::InvalidData(
                "half-space normal must be nonzero".to_string(),
            ));
        }
        for v in &mut nu {
            *v /= len;
        }
        let offset = offset / len;
        if !offset.is_finite() {
            return Err(GeometryError::InvalidData(
                "half-space offset must be finite".to_string(),
            ));
        }
        Ok(HalfSpace { normal: nu, offset })
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Membership in the family of half-spaces containing the origin.
    pub fn contains_origin(&self) -> bool {
        self.offset >= 0.0
    }

    pub fn contains(&self, x: Point) -> bool {
        dot(&self.normal, &x) <= self.offset
    }

    /// Signed distance to the bounding hyperplane (positive outside `H`).
    pub fn signed_distance(&self, x: Point) -> f64 {
        dot(&self.normal, &x) - self.offset
    }

    /// Affine reflection across the bounding hyperplane:
    /// `x - 2 (<x,nu> - c) nu`. An involution and an isometry.
    pub fn reflect_point(&self, x: Point) -> Point {
        let s = 2.0 * (dot(&self.normal, &x) - self.offset);
        let mut y = x;
        for k in 0..MAX_DIM {
            y[k] -= s * self.normal[k];
        }
        y
    }

    pub fn describe(&self) -> String {
        let nu: Vec<String> = self.normal.iter().map(|v| format!("{v:.6}")).collect();
        format!("nu=({}) c={}", nu.join(","), self.offset)
    }
}

#[inline]
fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Normal direction within the lattice symmetry group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LatticeNormal {
    /// `nu = sign * e_axis`
    Axis { axis: usize, sign: i64 },
    /// `nu = (sx, sy)/sqrt(2)` (two-dimensional grids only)
    Diagonal { sx: i64, sy: i64 },
}

/// Exact reflection of the cell lattice across a grid-compatible hyperplane.
///
/// Grid-compatible means the reflection maps cell centers to cell centers:
/// axis-aligned normals with offsets at integer or half-integer multiples of
/// `h`, and (in d=2) diagonal normals with offsets at integer multiples of
/// `h/sqrt(2)`. All membership and reflection arithmetic is integral, so set
/// operations built on this are exact.
#[derive(Debug, Clone, Copy)]
pub struct LatticeReflection {
    normal: LatticeNormal,
    /// Hyperplane level in lattice half-units (see `side`).
    level: i64,
}

impl LatticeReflection {
    /// Classifies a half-space against a grid, or reports incompatibility.
    pub fn for_grid(hs: &HalfSpace, grid: &Grid) -> Result<Self, GeometryError> {
        let nu = hs.normal();
        let h = grid.spacing();
        // axis-aligned?
        for axis in 0..grid.dim() {
            for sign in [1i64, -1] {
                let mut target = [0.0; MAX_DIM];
                target[axis] = sign as f64;
                if close(nu, &target) {
                    // side test uses doubled coordinates: 2*sign*p - m with
                    // m = 2c/h, so half-integer offsets stay integral.
                    let m = 2.0 * hs.offset() / h;
                    let level = near_integer(m).ok_or_else(|| {
                        GeometryError::IncompatibleHalfSpace(format!(
                            "axis offset {} is not a multiple of h/2 = {}",
                            hs.offset(),
                            h / 2.0
                        ))
                    })?;
                    return Ok(LatticeReflection {
                        normal: LatticeNormal::Axis { axis, sign },
                        level,
                    });
                }
            }
        }
        if grid.dim() == 2 {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            for sx in [1i64, -1] {
                for sy in [1i64, -1] {
                    let target = [sx as f64 * r, sy as f64 * r, 0.0];
                    if close(nu, &target) {
                        let m = hs.offset() * std::f64::consts::SQRT_2 / h;
                        let level = near_integer(m).ok_or_else(|| {
                            GeometryError::IncompatibleHalfSpace(format!(
                                "diagonal offset {} is not a multiple of h/sqrt(2) = {}",
                                hs.offset(),
                                h * r
                            ))
                        })?;
                        return Ok(LatticeReflection {
                            normal: LatticeNormal::Diagonal { sx, sy },
                            level,
                        });
                    }
                }
            }
        }
        Err(GeometryError::IncompatibleHalfSpace(format!(
            "normal ({:.6}, {:.6}, {:.6}) is outside the lattice symmetry group",
            nu[0], nu[1], nu[2]
        )))
    }

    /// Exact image of a lattice cell under the reflection.
    #[inline]
    pub fn reflect(&self, p: LatticePoint) -> LatticePoint {
        let mut q = p;
        match self.normal {
            LatticeNormal::Axis { axis, sign } => {
                // x_k -> 2c*sign - x_k; level = 2c/h
                q[axis] = sign * self.level - p[axis];
            }
            LatticeNormal::Diagonal { sx, sy } => {
                // level = c*sqrt(2)/h
                q[0] = -sx * sy * p[1] + self.level * sx;
                q[1] = -sx * sy * p[0] + self.level * sy;
            }
        }
        q
    }

    /// Which side of the hyperplane the cell center lies on:
    /// negative inside `H`, zero on the hyperplane, positive outside.
    #[inline]
    pub fn side(&self, p: LatticePoint) -> i64 {
        match self.normal {
            LatticeNormal::Axis { axis, sign } => 2 * sign * p[axis] - self.level,
            LatticeNormal::Diagonal { sx, sy } => sx * p[0] + sy * p[1] - self.level,
        }
    }

    #[inline]
    pub fn in_halfspace(&self, p: LatticePoint) -> bool {
        self.side(p) <= 0
    }
}

fn close(a: &Point, b: &Point) -> bool {
    (0..MAX_DIM).all(|k| (a[k] - b[k]).abs() <= 1e-9)
}

fn near_integer(x: f64) -> Option<i64> {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) && r.abs() < 1e15 {
        Some(r as i64)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn norm(x: &Point) -> f64 {
        dot(x, x).sqrt()
    }

    #[test]
    fn point_on_hyperplane_is_fixed() {
        let hs = HalfSpace::new(&[1.0, 0.0], 0.0).unwrap();
        let x = [0.0, 0.0, 0.0];
        assert_eq!(hs.reflect_point(x), x);
    }

    #[test]
    fn one_dimensional_reflection() {
        // H = { x <= 1 }: sigma(x) = 2 - x
        let hs = HalfSpace::new(&[1.0], 1.0).unwrap();
        let y = hs.reflect_point([3.0, 0.0, 0.0]);
        assert!((y[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn involution_and_isometry() {
        let mut rng = CounterRng::new(11, 0);
        for _ in 0..200 {
            let nu = [
                rng.standard_normal(),
                rng.standard_normal(),
                rng.standard_normal(),
            ];
            let c = 2.0 * rng.standard_normal();
            let hs = match HalfSpace::new(&nu, c) {
                Ok(h) => h,
                Err(_) => continue,
            };
            let x = [
                rng.standard_normal(),
                rng.standard_normal(),
                rng.standard_normal(),
            ];
            let y = [
                rng.standard_normal(),
                rng.standard_normal(),
                rng.standard_normal(),
            ];
            let xx = hs.reflect_point(hs.reflect_point(x));
            for k in 0..3 {
                assert!((xx[k] - x[k]).abs() < 1e-12);
            }
            let d0 = norm(&sub(x, y));
            let d1 = norm(&sub(hs.reflect_point(x), hs.reflect_point(y)));
            assert!((d0 - d1).abs() < 1e-12);
        }
    }

    fn sub(a: Point, b: Point) -> Point {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    #[test]
    fn normalizes_input() {
        let hs = HalfSpace::new(&[2.0, 0.0], 3.0).unwrap();
        assert!((hs.normal()[0] - 1.0).abs() < 1e-15);
        assert!((hs.offset() - 1.5).abs() < 1e-15);
        assert!(HalfSpace::new(&[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn lattice_axis_reflection_matches_float() {
        let grid = Grid::new(2, 0.5, &[9, 9]).unwrap();
        let hs = HalfSpace::new(&[1.0, 0.0], 0.75).unwrap(); // c = 1.5 h
        let refl = LatticeReflection::for_grid(&hs, &grid).unwrap();
        for p in grid.iter_lattice() {
            let q = refl.reflect(p);
            let img = hs.reflect_point(grid.cell_center(p));
            for k in 0..2 {
                assert!((img[k] - q[k] as f64 * 0.5).abs() < 1e-12);
            }
            assert_eq!(refl.in_halfspace(p), hs.contains(grid.cell_center(p)));
            assert_eq!(refl.reflect(q), p);
        }
    }

    #[test]
    fn lattice_diagonal_reflection_matches_float() {
        let grid = Grid::new(2, 0.5, &[11, 11]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (sx, sy, m) in [
            (1.0, 1.0, 3i64),
            (1.0, -1.0, 0),
            (-1.0, 1.0, 2),
            (-1.0, -1.0, 1),
        ] {
            let c = m as f64 * 0.5 * r; // m * h / sqrt(2)
            let hs = HalfSpace::new(&[sx * r, sy * r], c).unwrap();
            let refl = LatticeReflection::for_grid(&hs, &grid).unwrap();
            for p in grid.iter_lattice() {
                let q = refl.reflect(p);
                let img = hs.reflect_point(grid.cell_center(p));
                for k in 0..2 {
                    assert!(
                        (img[k] - q[k] as f64 * 0.5).abs() < 1e-12,
                        "sx={sx} sy={sy} p={p:?}"
                    );
                }
                assert_eq!(refl.reflect(q), p);
            }
        }
    }

    #[test]
    fn incompatible_cases() {
        let grid = Grid::new(2, 0.5, &[9, 9]).unwrap();
        // tilted normal
        let hs = HalfSpace::new(&[2.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            LatticeReflection::for_grid(&hs, &grid),
            Err(GeometryError::IncompatibleHalfSpace(_))
        ));
        // bad offset (not a multiple of h/2)
        let hs = HalfSpace::new(&[1.0, 0.0], 0.3).unwrap();
        assert!(LatticeReflection::for_grid(&hs, &grid).is_err());
        // diagonal in 1D grids is meaningless
        let g1 = Grid::new(1, 0.5, &[9]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let hs = HalfSpace::new(&[r, r], 0.0).unwrap();
        assert!(LatticeReflection::for_grid(&hs, &g1).is_err());
    }
}
