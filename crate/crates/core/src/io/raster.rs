//! Field rasters: plain-text floats, row-major (x fastest), rows from the
//! lowest lattice coordinate up, planes separated by a blank line in 3D.
//! Values use 17 significant digits, so read-back is bit-exact.

use super::{key_value, parse_f64, parse_usize, ParseError};
use crate::geometry::{Grid, GridField};
use crate::util::format_f64;

pub fn write_field(field: &GridField, t: f64) -> String {
    let grid = field.grid();
    let ext = grid.extent();
    let mut out = format!(
        "field dim={} h={} extent={} t={}\n",
        grid.dim(),
        format_f64(grid.spacing()),
        ext[..grid.dim()]
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(","),
        format_f64(t),
    );
    let (nx, ny, nz) = (ext[0], ext[1], ext[2]);
    for z in 0..nz {
        if z > 0 {
            out.push('\n');
        }
        for y in 0..ny {
            let row: Vec<String> = (0..nx)
                .map(|x| format_f64(field.values()[(z * ny + y) * nx + x]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn parse_field(text: &str) -> Result<(GridField, f64), ParseError> {
    let mut lines = text.lines().enumerate();
    let (idx, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .ok_or_else(|| ParseError::new(1, "empty field raster"))?;
    let line_no = idx + 1;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("field") {
        return Err(ParseError::new(line_no, "expected `field` header"));
    }
    let mut dim = None;
    let mut h = None;
    let mut extent: Option<Vec<usize>> = None;
    let mut t = None;
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
            "t" => t = Some(parse_f64(v, k, line_no)?),
            other => {
                return Err(ParseError::new(
                    line_no,
                    format!("unknown key `{other}` in field header"),
                ))
            }
        }
    }
    let dim = dim.ok_or_else(|| ParseError::new(line_no, "field needs `dim=`"))?;
    let h = h.ok_or_else(|| ParseError::new(line_no, "field needs `h=`"))?;
    let extent = extent.ok_or_else(|| ParseError::new(line_no, "field needs `extent=`"))?;
    let t = t.ok_or_else(|| ParseError::new(line_no, "field needs `t=`"))?;
    let grid = Grid::new(dim, h, &extent)
        .map_err(|e| ParseError::new(line_no, format!("bad grid: {e}")))?;

    let ext = grid.extent();
    let (nx, ny, nz) = (ext[0], ext[1], ext[2]);
    let mut values = vec![0.0; grid.cell_count()];
    for z in 0..nz {
        if z > 0 {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => {}
                Some((i, _)) => {
                    return Err(ParseError::new(i + 1, "expected blank line between planes"))
                }
                None => return Err(ParseError::new(line_no, "field raster ended early")),
            }
        }
        for y in 0..ny {
            let (i, raw) = lines
                .next()
                .ok_or_else(|| ParseError::new(line_no, "field raster ended early"))?;
            let row: Vec<&str> = raw.split_whitespace().collect();
            if row.len() != nx {
                return Err(ParseError::new(
                    i + 1,
                    format!("row has {} values, expected {nx}", row.len()),
                ));
            }
            for (x, tok) in row.iter().enumerate() {
                values[(z * ny + y) * nx + x] = parse_f64(tok, "value", i + 1)?;
            }
        }
    }
    let field = GridField::new(grid, values)
        .map_err(|e| ParseError::new(line_no, format!("bad field: {e}")))?;
    Ok((field, t))
}
