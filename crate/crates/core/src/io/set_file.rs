//! Set specification files.
//!
//! ```text
//! # comment
//! grid dim=2 h=0.1 extent=81,81
//! ball center=0.5,0 radius=0.8
//! box min=-1,-1 max=-0.2,-0.3
//! ```
//!
//! or an explicit raster (one line of 0/1 per row, rows from the lowest
//! lattice coordinate up; in 3D, planes separated by one blank line):
//!
//! ```text
//! grid dim=1 h=0.5 extent=9
//! raster
//! 001111100
//! ```
//!
//! Serialization always writes the raster form; masks round-trip
//! bit-exactly.

use super::{key_value, parse_f64, parse_f64_list, parse_usize, ParseError};
use crate::geometry::{GeometryError, Grid, GridSet};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub spacing: f64,
    pub extent: Vec<usize>,
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<Grid, GeometryError> {
        Grid::new(self.dim, self.spacing, &self.extent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Ball { center: Vec<f64>, radius: f64 },
    Box { min: Vec<f64>, max: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetBody {
    Primitives(Vec<Primitive>),
    Raster(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetSpec {
    pub grid: GridSpec,
    pub body: SetBody,
}

impl SetSpec {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut grid: Option<GridSpec> = None;
        let mut primitives = Vec::new();
        let mut lines = text.lines().enumerate().peekable();

        while let Some((idx, raw)) = lines.next() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let directive = tokens.next().expect("nonempty line");
            match directive {
                "grid" => {
                    if grid.is_some() {
                        return Err(ParseError::new(line_no, "duplicate `grid` directive"));
                    }
                    grid = Some(parse_grid_tokens(tokens, line_no)?);
                }
                "ball" => {
                    let mut center = None;
                    let mut radius = None;
                    for tok in tokens {
                        let (k, v) = key_value(tok, line_no)?;
                        match k {
                            "center" => center = Some(parse_f64_list(v, k, line_no)?),
                            "radius" => radius = Some(parse_f64(v, k, line_no)?),
                            other => {
                                return Err(ParseError::new(
                                    line_no,
                                    format!("unknown key `{other}` in `ball`"),
                                ))
                            }
                        }
                    }
                    primitives.push(Primitive::Ball {
                        center: center
                            .ok_or_else(|| ParseError::new(line_no, "ball needs `center=`"))?,
                        radius: radius
                            .ok_or_else(|| ParseError::new(line_no, "ball needs `radius=`"))?,
                    });
                }
                "box" => {
                    let mut min = None;
                    let mut max = None;
                    for tok in tokens {
                        let (k, v) = key_value(tok, line_no)?;
                        match k {
                            "min" => min = Some(parse_f64_list(v, k, line_no)?),
                            "max" => max = Some(parse_f64_list(v, k, line_no)?),
                            other => {
                                return Err(ParseError::new(
                                    line_no,
                                    format!("unknown key `{other}` in `box`"),
                                ))
                            }
                        }
                    }
                    primitives.push(Primitive::Box {
                        min: min.ok_or_else(|| ParseError::new(line_no, "box needs `min=`"))?,
                        max: max.ok_or_else(|| ParseError::new(line_no, "box needs `max=`"))?,
                    });
                }
                "raster" => {
                    if !primitives.is_empty() {
                        return Err(ParseError::new(
                            line_no,
                            "`raster` cannot be mixed with primitives",
                        ));
                    }
                    let g = grid.as_ref().ok_or_else(|| {
                        ParseError::new(line_no, "`raster` must come after `grid`")
                    })?;
                    let mask = parse_raster_lines(g, &mut lines, line_no)?;
                    return Ok(SetSpec {
                        grid: grid.expect("checked"),
                        body: SetBody::Raster(mask),
                    });
                }
                other => {
                    return Err(ParseError::new(
                        line_no,
                        format!("unknown directive `{other}` in set file"),
                    ))
                }
            }
        }
        let grid = grid.ok_or_else(|| ParseError::new(1, "missing `grid` directive"))?;
        Ok(SetSpec {
            grid,
            body: SetBody::Primitives(primitives),
        })
    }

    /// Builds the occupancy mask on the specified grid.
    pub fn rasterize(&self) -> Result<GridSet, GeometryError> {
        let grid = self.grid.to_grid()?;
        match &self.body {
            SetBody::Raster(mask) => GridSet::new(grid, mask.clone()),
            SetBody::Primitives(prims) => {
                let mut acc = GridSet::empty(grid);
                for p in prims {
                    let s = match p {
                        Primitive::Ball { center, radius } => GridSet::ball(grid, center, *radius)?,
                        Primitive::Box { min, max } => GridSet::boxed(grid, min, max)?,
                    };
                    acc = acc.union(&s)?;
                }
                Ok(acc)
            }
        }
    }

    /// Half the spacing, doubled resolution, same physical box
    /// (`extent' = 2 extent - 1`). Primitives re-rasterize exactly; raster
    /// bodies are upsampled by nearest original cell.
    pub fn refined(&self) -> SetSpec {
        let grid = GridSpec {
            dim: self.grid.dim,
            spacing: self.grid.spacing / 2.0,
            extent: self.grid.extent.iter().map(|n| 2 * n - 1).collect(),
        };
        let body = match &self.body {
            SetBody::Primitives(p) => SetBody::Primitives(p.clone()),
            SetBody::Raster(mask) => {
                let coarse = self.grid.to_grid().expect("validated at parse");
                let fine = grid.to_grid().expect("refinement keeps validity");
                let mut out = vec![false; fine.cell_count()];
                for (lin, slot) in out.iter_mut().enumerate() {
                    let q = fine.lattice_of_linear(lin);
                    let p = [round_half(q[0]), round_half(q[1]), round_half(q[2])];
                    if let Some(src) = coarse.linear_of_lattice(p) {
                        *slot = mask[src];
                    }
                }
                SetBody::Raster(out)
            }
        };
        SetSpec { grid, body }
    }

    /// Raster-form serialization of a mask; parsing reproduces it exactly.
    pub fn serialize(set: &GridSet) -> String {
        let grid = set.grid();
        let ext = grid.extent();
        let mut out = format!(
            "grid dim={} h={} extent={}\nraster\n",
            grid.dim(),
            crate::util::format_f64(grid.spacing()),
            ext[..grid.dim()]
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let (nx, ny, nz) = (ext[0], ext[1], ext[2]);
        for z in 0..nz {
            if z > 0 {
                out.push('\n');
            }
            for y in 0..ny {
                for x in 0..nx {
                    let lin = (z * ny + y) * nx + x;
                    out.push(if set.mask()[lin] { '1' } else { '0' });
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Lattice coordinate of the coarse cell nearest a fine cell (ties away
/// from zero).
fn round_half(q: i64) -> i64 {
    if q >= 0 {
        (q + 1) / 2
    } else {
        (q - 1) / 2
    }
}

fn parse_grid_tokens<'a>(
    tokens: impl Iterator<Item = &'a str>,
    line_no: usize,
) -> Result<GridSpec, ParseError> {
    let mut dim = None;
    let mut h = None;
    let mut extent = None;
    for tok in tokens {
        let (k, v) = key_value(tok, line_no)?;
        match k {
            "dim" => dim = Some(parse_usize(v, k, line_no)?),
            "h" => h = Some(parse_f64(v, k, line_no)?),
            "extent" => {
                extent = Some(
                    v.split(',')
                        .map(|s| parse_usize(s.trim(), "extent", line_no))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            }
            other => {
                return Err(ParseError::new(
                    line_no,
                    format!("unknown key `{other}` in `grid`"),
                ))
            }
        }
    }
    Ok(GridSpec {
        dim: dim.ok_or_else(|| ParseError::new(line_no, "grid needs `dim=`"))?,
        spacing: h.ok_or_else(|| ParseError::new(line_no, "grid needs `h=`"))?,
        extent: extent.ok_or_else(|| ParseError::new(line_no, "grid needs `extent=`"))?,
    })
}

fn parse_raster_lines<'a>(
    grid: &GridSpec,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    start_line: usize,
) -> Result<Vec<bool>, ParseError> {
    if grid.extent.len() != grid.dim {
        return Err(ParseError::new(
            start_line,
            format!(
                "grid has {} extents for dim {}",
                grid.extent.len(),
                grid.dim
            ),
        ));
    }
    let nx = grid.extent[0];
    let ny = if grid.dim > 1 { grid.extent[1] } else { 1 };
    let nz = if grid.dim > 2 { grid.extent[2] } else { 1 };
    let mut mask = vec![false; nx * ny * nz];
    for z in 0..nz {
        if z > 0 {
            // exactly one blank separator line between planes
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => {}
                Some((idx, _)) => {
                    return Err(ParseError::new(
                        idx + 1,
                        "expected blank line between planes",
                    ))
                }
                None => return Err(ParseError::new(start_line, "raster ended early")),
            }
        }
        for y in 0..ny {
            let (idx, raw) = lines
                .next()
                .ok_or_else(|| ParseError::new(start_line, "raster ended early"))?;
            let line_no = idx + 1;
            let row = raw.trim();
            if row.len() != nx {
                return Err(ParseError::new(
                    line_no,
                    format!("raster row has {} cells, expected {nx}", row.len()),
                ));
            }
            for (x, ch) in row.chars().enumerate() {
                mask[(z * ny + y) * nx + x] = match ch {
                    '0' => false,
                    '1' => true,
                    other => {
                        return Err(ParseError::new(
                            line_no,
                            format!("raster cells must be 0 or 1, found `{other}`"),
                        ))
                    }
                };
            }
        }
    }
    for (idx, raw) in lines {
        if !raw.trim().is_empty() && !raw.trim_start().starts_with('#') {
            return Err(ParseError::new(idx + 1, "unexpected content after raster"));
        }
    }
    Ok(mask)
}
