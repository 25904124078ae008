//! Union-of-translates accumulation on a bit grid.
//!
//! Stamping a mask at every path step is wasteful: when the snapped offset
//! moves by one lattice step, the only newly covered cells are the mask's
//! boundary layer in that direction (`{c in A : c + delta not in A}`,
//! delta = new - old). Those face lists are precomputed for every unit-box
//! move; larger jumps (rare) fall back to a full stamp. Both paths OR into
//! the accumulator, so the union is exactly the union of the stamps at the
//! visited offsets.

use super::StochasticError;
use crate::geometry::{Grid, GridSet, LatticePoint, Point, MAX_DIM};

pub(super) struct BitGrid {
    words: Vec<u64>,
    count: usize,
}

impl BitGrid {
    pub fn new(cells: usize) -> Self {
        BitGrid {
            words: vec![0; cells.div_ceil(64)],
            count: 0,
        }
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
        self.count = 0;
    }

    #[inline]
    pub fn set(&mut self, idx: usize) {
        let w = &mut self.words[idx / 64];
        let bit = 1u64 << (idx % 64);
        if *w & bit == 0 {
            *w |= bit;
            self.count += 1;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds 1 to `counts[i]` for every set bit `i`.
    pub fn add_into(&self, counts: &mut [u64]) {
        for (wi, &word) in self.words.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                counts[wi * 64 + b] += 1;
                w &= w - 1;
            }
        }
    }
}

pub(super) struct MaskStamp {
    grid: Grid,
    cells: Vec<LatticePoint>,
    /// Newly covered cells per unit-box move; index = delta packed base 3.
    faces: Vec<Vec<LatticePoint>>,
    bbox: Option<(LatticePoint, LatticePoint)>,
}

#[inline]
fn face_index(delta: &[i64; MAX_DIM]) -> usize {
    ((delta[0] + 1) + 3 * (delta[1] + 1) + 9 * (delta[2] + 1)) as usize
}

impl MaskStamp {
    pub fn new(set: &GridSet) -> Self {
        let grid = *set.grid();
        let cells: Vec<LatticePoint> = set.cells().collect();
        let mut faces = vec![Vec::new(); 27];
        let deltas = unit_box_deltas(grid.dim());
        for delta in &deltas {
            let mut list = Vec::new();
            for c in &cells {
                let q = [c[0] + delta[0], c[1] + delta[1], c[2] + delta[2]];
                if !set.contains_lattice(q) {
                    list.push(*c);
                }
            }
            faces[face_index(delta)] = list;
        }
        MaskStamp {
            grid,
            cells,
            faces,
            bbox: set.bounding_box(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Nearest lattice offset for a path position.
    #[inline]
    pub fn offset_of(
        &self,
        pos: &Point,
        negate: bool,
        out: &mut LatticePoint,
    ) -> Result<(), StochasticError> {
        let h = self.grid.spacing();
        for k in 0..MAX_DIM {
            let v = if k < self.grid.dim() {
                (pos[k] / h).round()
            } else {
                0.0
            };
            if !v.is_finite() || v.abs() > 1e15 {
                return Err(StochasticError::Clipped);
            }
            out[k] = if negate { -(v as i64) } else { v as i64 };
        }
        Ok(())
    }

    #[inline]
    fn check(&self, off: LatticePoint) -> Result<(), StochasticError> {
        if let Some((lo, hi)) = &self.bbox {
            for k in 0..self.grid.dim() {
                let half = self.grid.half_extent(k);
                if lo[k] + off[k] < -half || hi[k] + off[k] > half {
                    return Err(StochasticError::Clipped);
                }
            }
        }
        Ok(())
    }

    pub fn stamp_full(&self, bits: &mut BitGrid, off: LatticePoint) -> Result<(), StochasticError> {
        self.check(off)?;
        for c in &self.cells {
            let q = [c[0] + off[0], c[1] + off[1], c[2] + off[2]];
            bits.set(self.grid.linear_of_lattice(q).expect("checked bounds"));
        }
        Ok(())
    }

    /// Stamps at `new`, assuming the stamp at `old` is already in `bits`.
    pub fn stamp_move(
        &self,
        bits: &mut BitGrid,
        old: LatticePoint,
        new: LatticePoint,
    ) -> Result<(), StochasticError> {
        let delta = [new[0] - old[0], new[1] - old[1], new[2] - old[2]];
        if delta == [0, 0, 0] {
            return Ok(());
        }
        if delta.iter().all(|d| d.abs() <= 1) {
            self.check(new)?;
            for c in &self.faces[face_index(&delta)] {
                let q = [c[0] + new[0], c[1] + new[1], c[2] + new[2]];
                bits.set(self.grid.linear_of_lattice(q).expect("checked bounds"));
            }
            Ok(())
        } else {
            self.stamp_full(bits, new)
        }
    }
}

fn unit_box_deltas(dim: usize) -> Vec<LatticePoint> {
    let range = |active: bool| if active { -1..=1 } else { 0..=0 };
    let mut out = Vec::new();
    for dz in range(dim > 2) {
        for dy in range(dim > 1) {
            for dx in range(true) {
                if (dx, dy, dz) != (0, 0, 0) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incremental_stamps_match_full_stamps() {
        let grid = Grid::new(2, 1.0, &[21, 21]).unwrap();
        let set = GridSet::ball(grid, &[0.0, 0.0], 2.2).unwrap();
        let stamp = MaskStamp::new(&set);
        let offsets: Vec<LatticePoint> = vec![
            [0, 0, 0],
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 0],
            [-1, 1, 0],
            [-1, -1, 0],
            [2, -1, 0], // multi-cell jump takes the full-stamp path
            [2, 0, 0],
        ];
        let cells = grid.cell_count();
        let mut inc = BitGrid::new(cells);
        stamp.stamp_full(&mut inc, offsets[0]).unwrap();
        for w in offsets.windows(2) {
            stamp.stamp_move(&mut inc, w[0], w[1]).unwrap();
        }
        let mut full = BitGrid::new(cells);
        for &off in &offsets {
            stamp.stamp_full(&mut full, off).unwrap();
        }
        assert_eq!(inc.count(), full.count());
        assert_eq!(inc.words, full.words);
    }

    #[test]
    fn clip_detection() {
        let grid = Grid::new(1, 1.0, &[9]).unwrap();
        let set = GridSet::ball(grid, &[0.0], 2.0).unwrap();
        let stamp = MaskStamp::new(&set);
        let mut bits = BitGrid::new(grid.cell_count());
        assert!(stamp.stamp_full(&mut bits, [2, 0, 0]).is_ok());
        assert!(matches!(
            stamp.stamp_full(&mut bits, [3, 0, 0]),
            Err(StochasticError::Clipped)
        ));
    }

    #[test]
    fn bit_counts_accumulate() {
        let mut bits = BitGrid::new(130);
        bits.set(0);
        bits.set(64);
        bits.set(64);
        bits.set(129);
        assert_eq!(bits.count(), 3);
        let mut counts = vec![0u64; 130];
        bits.add_into(&mut counts);
        assert_eq!(counts[0], 1);
        assert_eq!(counts[64], 1);
        assert_eq!(counts[129], 1);
        assert_eq!(counts.iter().sum::<u64>(), 3);
        bits.clear();
        assert_eq!(bits.count(), 0);
    }
}
