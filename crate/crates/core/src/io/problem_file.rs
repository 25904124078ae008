//! Problem files: obstacle set reference, initial condition, operator
//! block, horizon, step, and sample times.
//!
//! ```text
//! set sets/interval.set
//! initial indicator
//! operator laplacian_half
//! T 0.5
//! dt auto
//! sample_times 0.1,0.25,0.5
//! ```
//!
//! A general operator lists its coefficient matrix (row-major, d*d entries)
//! at one or more times; several `a` lines interpolate linearly:
//!
//! ```text
//! operator general kappa=0.2
//! a t=0 m=0.5,0,0,0.25
//! a t=1 m=1.0,0,0,0.25
//! ```

use super::{key_value, parse_f64, parse_f64_list, ParseError};
use crate::geometry::MAX_DIM;
use crate::pde::{CoeffMatrix, Coefficients, OperatorSpec, PdeError};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    /// Zero off the obstacle (the solver pins the obstacle to 1 anyway).
    Zero,
    Indicator,
    /// Path to a field raster.
    Raster(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DtSpec {
    /// `h^2`
    Auto,
    Given(f64),
}

impl DtSpec {
    pub fn resolve(&self, spacing: f64) -> f64 {
        match self {
            DtSpec::Auto => spacing * spacing,
            DtSpec::Given(dt) => *dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorConfig {
    LaplacianHalf,
    General {
        kappa: f64,
        nodes: Vec<(f64, Vec<f64>)>,
    },
}

impl OperatorConfig {
    pub fn to_operator(&self, dim: usize) -> Result<OperatorSpec, PdeError> {
        match self {
            OperatorConfig::LaplacianHalf => Ok(OperatorSpec::laplacian_half()),
            OperatorConfig::General { kappa, nodes } => {
                let mut parsed = Vec::new();
                for (t, flat) in nodes {
                    if flat.len() != dim * dim {
                        return Err(PdeError::InvalidProblem(format!(
                            "coefficient matrix needs {} entries for dim {dim}, got {}",
                            dim * dim,
                            flat.len()
                        )));
                    }
                    let mut m: CoeffMatrix = [[0.0; MAX_DIM]; MAX_DIM];
                    for i in 0..dim {
                        for j in 0..dim {
                            m[i][j] = flat[i * dim + j];
                        }
                    }
                    parsed.push((*t, m));
                }
                let coeff = if parsed.len() == 1 {
                    Coefficients::Constant(parsed[0].1)
                } else {
                    Coefficients::PiecewiseLinear(parsed)
                };
                OperatorSpec::general(coeff, *kappa)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Path to the set file, relative to the problem file.
    pub set: String,
    pub initial: InitialSpec,
    pub operator: OperatorConfig,
    pub horizon: f64,
    pub dt: DtSpec,
    pub sample_times: Vec<f64>,
    pub leak_tol: Option<f64>,
}

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut set = None;
        let mut initial = None;
        let mut operator: Option<OperatorConfig> = None;
        let mut horizon = None;
        let mut dt = None;
        let mut sample_times = None;
        let mut leak_tol = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let directive = tokens.next().expect("nonempty");
            match directive {
                "set" => {
                    set = Some(
                        tokens
                            .next()
                            .ok_or_else(|| ParseError::new(line_no, "`set` needs a path"))?
                            .to_string(),
                    );
                }
                "initial" => {
                    let kind = tokens
                        .next()
                        .ok_or_else(|| ParseError::new(line_no, "`initial` needs a value"))?;
                    initial = Some(match kind {
                        "zero" => InitialSpec::Zero,
                        "indicator" => InitialSpec::Indicator,
                        "raster" => InitialSpec::Raster(
                            tokens
                                .next()
                                .ok_or_else(|| {
                                    ParseError::new(line_no, "`initial raster` needs a path")
                                })?
                                .to_string(),
                        ),
                        other => {
                            return Err(ParseError::new(
                                line_no,
                                format!("unknown initial condition `{other}`"),
                            ))
                        }
                    });
                }
                "operator" => {
                    let kind = tokens
                        .next()
                        .ok_or_else(|| ParseError::new(line_no, "`operator` needs a mode"))?;
                    operator = Some(match kind {
                        "laplacian_half" => OperatorConfig::LaplacianHalf,
                        "general" => {
                            let mut kappa = None;
                            for tok in tokens.by_ref() {
                                let (k, v) = key_value(tok, line_no)?;
                                match k {
                                    "kappa" => kappa = Some(parse_f64(v, k, line_no)?),
                                    other => {
                                        return Err(ParseError::new(
                                            line_no,
                                            format!("unknown key `{other}` in `operator`"),
                                        ))
                                    }
                                }
                            }
                            OperatorConfig::General {
                                kappa: kappa.ok_or_else(|| {
                                    ParseError::new(line_no, "general operator needs `kappa=`")
                                })?,
                                nodes: Vec::new(),
                            }
                        }
                        other => {
                            return Err(ParseError::new(
                                line_no,
                                format!("unknown operator mode `{other}`"),
                            ))
                        }
                    });
                }
                "a" => {
                    let Some(OperatorConfig::General { nodes, .. }) = operator.as_mut() else {
                        return Err(ParseError::new(
                            line_no,
                            "`a` lines require `operator general` first",
                        ));
                    };
                    let mut t = None;
                    let mut m = None;
                    for tok in tokens.by_ref() {
                        let (k, v) = key_value(tok, line_no)?;
                        match k {
                            "t" => t = Some(parse_f64(v, k, line_no)?),
                            "m" => m = Some(parse_f64_list(v, k, line_no)?),
                            other => {
                                return Err(ParseError::new(
                                    line_no,
                                    format!("unknown key `{other}` in `a`"),
                                ))
                            }
                        }
                    }
                    nodes.push((
                        t.ok_or_else(|| ParseError::new(line_no, "`a` needs `t=`"))?,
                        m.ok_or_else(|| ParseError::new(line_no, "`a` needs `m=`"))?,
                    ));
                }
                "T" => {
                    let v = tokens
                        .next()
                        .ok_or_else(|| ParseError::new(line_no, "`T` needs a value"))?;
                    horizon = Some(parse_f64(v, "T", line_no)?);
                }
                "dt" => {
                    let v = tokens
                        .next()
                        .ok_or_else(|| ParseError::new(line_no, "`dt` needs a value"))?;
                    dt = Some(if v == "auto" {
                        DtSpec::Auto
                    } else {
                        DtSpec::Given(parse_f64(v, "dt", line_no)?)
                    });
                }
                "sample_times" => {
                    let v = tokens
                        .next()
                        .ok_or_else(|| ParseError::new(line_no, "`sample_times` needs values"))?;
                    sample_times = Some(parse_f64_list(v, "sample_times", line_no)?);
                }
                "leak_tol" => {
                    let v = tokens
                        .next()
                        .ok_or_else(|| ParseError::new(line_no, "`leak_tol` needs a value"))?;
                    if v != "auto" {
                        leak_tol = Some(parse_f64(v, "leak_tol", line_no)?);
                    }
                }
                other => {
                    return Err(ParseError::new(
                        line_no,
                        format!("unknown directive `{other}` in problem file"),
                    ))
                }
            }
            if let Some(extra) = tokens.next() {
                return Err(ParseError::new(
                    line_no,
                    format!("unexpected trailing token `{extra}`"),
                ));
            }
        }

        if let Some(OperatorConfig::General { nodes, .. }) = &operator {
            if nodes.is_empty() {
                return Err(ParseError::new(
                    1,
                    "general operator needs at least one `a` line",
                ));
            }
        }
        Ok(ProblemSpec {
            set: set.ok_or_else(|| ParseError::new(1, "missing `set`"))?,
            initial: initial.unwrap_or(InitialSpec::Indicator),
            operator: operator.unwrap_or(OperatorConfig::LaplacianHalf),
            horizon: horizon.ok_or_else(|| ParseError::new(1, "missing `T`"))?,
            dt: dt.unwrap_or(DtSpec::Auto),
            sample_times: sample_times
                .ok_or_else(|| ParseError::new(1, "missing `sample_times`"))?,
            leak_tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_problem() {
        let text = "set a.set\nT 0.5\nsample_times 0.25,0.5\n";
        let p = ProblemSpec::parse(text).unwrap();
        assert_eq!(p.set, "a.set");
        assert_eq!(p.initial, InitialSpec::Indicator);
        assert_eq!(p.operator, OperatorConfig::LaplacianHalf);
        assert_eq!(p.dt, DtSpec::Auto);
        assert_eq!(p.sample_times, vec![0.25, 0.5]);
    }

    #[test]
    fn parses_general_operator() {
        let text = "set a.set\noperator general kappa=0.2\na t=0 m=0.5,0,0,0.25\na t=1 m=1,0,0,0.25\nT 1\ndt 0.001\nsample_times 1\n";
        let p = ProblemSpec::parse(text).unwrap();
        let op = p.operator.to_operator(2).unwrap();
        let m = op.coeff.eval(0.5);
        assert_eq!(m[0][0], 0.75);
        assert_eq!(m[1][1], 0.25);
        assert_eq!(p.dt, DtSpec::Given(0.001));
    }

    #[test]
    fn strict_parsing_rejects_unknowns() {
        let err = ProblemSpec::parse("set a.set\nT 1\nsample_times 1\nwobble 3\n").unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.to_string().contains("wobble"));

        let err = ProblemSpec::parse("set a.set\nT 1 2\nsample_times 1\n").unwrap_err();
        assert_eq!(err.line, 2);

        let err =
            ProblemSpec::parse("set a.set\noperator general kappa=0.2\nT 1\nsample_times 1\n")
                .unwrap_err();
        assert!(err.to_string().contains("`a` line"));
    }
}
