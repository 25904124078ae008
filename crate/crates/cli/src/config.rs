//! CLI-side config files: scenario/battery, sausage runs, and polarize
//! jobs. Strict line-based parsing; errors name the key and line.

use anyhow::{anyhow, bail, Context, Result};
use sausage_sym::io::{DtSpec, ParseError, SetSpec};
use sausage_sym::stochastic::Scheme;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Polarization,
    Symmetrization,
    Sausage,
    Representation,
}

impl Theorem {
    fn parse(s: &str, line: usize) -> Result<Self, ParseError> {
        match s {
            "polarization" => Ok(Theorem::Polarization),
            "symmetrization" => Ok(Theorem::Symmetrization),
            "sausage" => Ok(Theorem::Sausage),
            "representation" => Ok(Theorem::Representation),
            other => Err(ParseError::new(
                line,
                format!("unknown theorem `{other}` (polarization | symmetrization | sausage | representation)"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub theorem: Theorem,
    pub set_path: String,
    pub halfspace: Option<(Vec<f64>, f64)>,
    pub times: Vec<f64>,
    pub horizon: Option<f64>,
    pub delta: Option<f64>,
    pub n_paths: usize,
    pub tol: Option<f64>,
    pub stop_tol: Option<f64>,
    pub max_steps: usize,
    pub band: f64,
    pub scheme: Scheme,
    pub dt: Option<DtSpec>,
}

impl Scenario {
    fn new(name: String) -> Self {
        Scenario {
            name,
            theorem: Theorem::Polarization,
            set_path: String::new(),
            halfspace: None,
            times: Vec::new(),
            horizon: None,
            delta: None,
            n_paths: 10_000,
            tol: None,
            stop_tol: None,
            max_steps: 40,
            band: 0.02,
            scheme: Scheme::GaussianIncrements,
            dt: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatteryConfig {
    pub seed: u64,
    pub dt: DtSpec,
    pub scenarios: Vec<Scenario>,
}

fn parse_kv(token: &str, line: usize) -> Result<(&str, &str), ParseError> {
    token
        .split_once('=')
        .ok_or_else(|| ParseError::new(line, format!("expected key=value, found `{token}`")))
}

fn num(v: &str, key: &str, line: usize) -> Result<f64, ParseError> {
    v.parse()
        .map_err(|_| ParseError::new(line, format!("`{key}` is not a number: `{v}`")))
}

fn num_list(v: &str, key: &str, line: usize) -> Result<Vec<f64>, ParseError> {
    v.split(',').map(|x| num(x.trim(), key, line)).collect()
}

impl BatteryConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut seed = 0u64;
        let mut dt = DtSpec::Auto;
        let mut scenarios: Vec<Scenario> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix("[scenario") {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ParseError::new(line_no, "missing `]` in scenario header"))?
                    .trim();
                if name.is_empty() {
                    return Err(ParseError::new(line_no, "scenario needs a name"));
                }
                if scenarios.iter().any(|s| s.name == name) {
                    return Err(ParseError::new(
                        line_no,
                        format!("duplicate scenario name `{name}`"),
                    ));
                }
                scenarios.push(Scenario::new(name.to_string()));
                continue;
            }
            let mut tokens = line.split_whitespace();
            let key = tokens.next().expect("nonempty");
            let scenario = scenarios.last_mut();
            match (key, scenario) {
                ("seed", None) => {
                    let v = tokens
                        .next()
                        .ok_or_else(|| ParseError::new(line_no, "`seed` needs a value"))?;
                    seed = v.parse().map_err(|_| {
                        ParseError::new(line_no, format!("`seed` is not an integer: `{v}`"))
                    })?;
                }
                ("dt", None) => {
                    let v = tokens
                        .next()
                        .ok_or_else(|| ParseError::new(line_no, "`dt` needs a value"))?;
                    dt = if v == "auto" {
                        DtSpec::Auto
                    } else {
                        DtSpec::Given(num(v, "dt", line_no)?)
                    };
                }
                (other, None) => {
                    return Err(ParseError::new(
                        line_no,
                        format!("`{other}` must appear inside a [scenario ...] block"),
                    ));
                }
                (key, Some(sc)) => parse_scenario_key(key, &mut tokens, sc, line_no)?,
            }
            if let Some(extra) = tokens.next() {
                return Err(ParseError::new(
                    line_no,
                    format!("unexpected trailing token `{extra}`"),
                ));
            }
        }
        for sc in &scenarios {
            if sc.set_path.is_empty() {
                return Err(ParseError::new(
                    1,
                    format!("scenario `{}` is missing `set`", sc.name),
                ));
            }
        }
        Ok(BatteryConfig {
            seed,
            dt,
            scenarios,
        })
    }
}

fn parse_scenario_key<'a>(
    key: &str,
    tokens: &mut impl Iterator<Item = &'a str>,
    sc: &mut Scenario,
    line_no: usize,
) -> Result<(), ParseError> {
    let mut need = |what: &str| -> Result<&'a str, ParseError> {
        tokens
            .next()
            .ok_or_else(|| ParseError::new(line_no, format!("`{what}` needs a value")))
    };
    match key {
        "theorem" => sc.theorem = Theorem::parse(need("theorem")?, line_no)?,
        "set" => sc.set_path = need("set")?.to_string(),
        "psi" => {
            let v = need("psi")?;
            if v != "indicator" {
                return Err(ParseError::new(
                    line_no,
                    format!("only `psi indicator` is supported in scenarios, got `{v}`"),
                ));
            }
        }
        "halfspace" => {
            let mut nu = None;
            let mut c = None;
            for tok in tokens {
                let (k, v) = parse_kv(tok, line_no)?;
                match k {
                    "nu" => nu = Some(num_list(v, "nu", line_no)?),
                    "c" => c = Some(num(v, "c", line_no)?),
                    other => {
                        return Err(ParseError::new(
                            line_no,
                            format!("unknown key `{other}` in `halfspace`"),
                        ))
                    }
                }
            }
            sc.halfspace = Some((
                nu.ok_or_else(|| ParseError::new(line_no, "halfspace needs `nu=`"))?,
                c.ok_or_else(|| ParseError::new(line_no, "halfspace needs `c=`"))?,
            ));
        }
        "times" => sc.times = num_list(need("times")?, "times", line_no)?,
        "T" => sc.horizon = Some(num(need("T")?, "T", line_no)?),
        "delta" => sc.delta = Some(num(need("delta")?, "delta", line_no)?),
        "n_paths" => {
            let v = need("n_paths")?;
            sc.n_paths = v.parse().map_err(|_| {
                ParseError::new(line_no, format!("`n_paths` is not an integer: `{v}`"))
            })?;
        }
        "tol" => {
            let v = need("tol")?;
            if v != "auto" {
                sc.tol = Some(num(v, "tol", line_no)?);
            }
        }
        "stop_tol" => {
            let v = need("stop_tol")?;
            if v != "auto" {
                sc.stop_tol = Some(num(v, "stop_tol", line_no)?);
            }
        }
        "max_steps" => {
            let v = need("max_steps")?;
            sc.max_steps = v.parse().map_err(|_| {
                ParseError::new(line_no, format!("`max_steps` is not an integer: `{v}`"))
            })?;
        }
        "band" => sc.band = num(need("band")?, "band", line_no)?,
        "scheme" => {
            sc.scheme = match need("scheme")? {
                "gaussian" => Scheme::GaussianIncrements,
                "donsker" => Scheme::DonskerWalk,
                other => {
                    return Err(ParseError::new(
                        line_no,
                        format!("unknown scheme `{other}` (gaussian | donsker)"),
                    ))
                }
            }
        }
        "dt" => {
            let v = need("dt")?;
            sc.dt = Some(if v == "auto" {
                DtSpec::Auto
            } else {
                DtSpec::Given(num(v, "dt", line_no)?)
            });
        }
        other => {
            return Err(ParseError::new(
                line_no,
                format!("unknown scenario key `{other}`"),
            ))
        }
    }
    Ok(())
}

/// `polarize` job: a set plus one half-space.
#[derive(Debug, Clone)]
pub struct PolarizeConfig {
    pub set_path: String,
    pub halfspace: (Vec<f64>, f64),
}

impl PolarizeConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut set_path = None;
        let mut halfspace = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            match tokens.next().expect("nonempty") {
                "set" => {
                    set_path = Some(
                        tokens
                            .next()
                            .ok_or_else(|| ParseError::new(line_no, "`set` needs a path"))?
                            .to_string(),
                    )
                }
                "halfspace" => {
                    let mut nu = None;
                    let mut c = None;
                    for tok in tokens.by_ref() {
                        let (k, v) = parse_kv(tok, line_no)?;
                        match k {
                            "nu" => nu = Some(num_list(v, "nu", line_no)?),
                            "c" => c = Some(num(v, "c", line_no)?),
                            other => {
                                return Err(ParseError::new(
                                    line_no,
                                    format!("unknown key `{other}` in `halfspace`"),
                                ))
                            }
                        }
                    }
                    halfspace = Some((
                        nu.ok_or_else(|| ParseError::new(line_no, "halfspace needs `nu=`"))?,
                        c.ok_or_else(|| ParseError::new(line_no, "halfspace needs `c=`"))?,
                    ));
                }
                other => {
                    return Err(ParseError::new(
                        line_no,
                        format!("unknown directive `{other}` in polarize config"),
                    ))
                }
            }
        }
        Ok(PolarizeConfig {
            set_path: set_path.ok_or_else(|| ParseError::new(1, "missing `set`"))?,
            halfspace: halfspace.ok_or_else(|| ParseError::new(1, "missing `halfspace`"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SausageMethod {
    Stamp,
    Hitting,
    Both,
}

/// `sausage` job.
#[derive(Debug, Clone)]
pub struct SausageConfig {
    pub set_path: String,
    pub horizon: f64,
    pub delta: f64,
    pub n_paths: usize,
    pub method: SausageMethod,
    pub scheme: Scheme,
    pub seed: u64,
    /// Also write the hitting-probability field as a raster.
    pub field_raster: bool,
}

impl SausageConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut set_path = None;
        let mut horizon = None;
        let mut delta = None;
        let mut n_paths = None;
        let mut method = SausageMethod::Both;
        let mut scheme = Scheme::GaussianIncrements;
        let mut seed = 0u64;
        let mut field_raster = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let key = tokens.next().expect("nonempty");
            let v = tokens
                .next()
                .ok_or_else(|| ParseError::new(line_no, format!("`{key}` needs a value")))?;
            match key {
                "set" => set_path = Some(v.to_string()),
                "T" => horizon = Some(num(v, "T", line_no)?),
                "delta" => delta = Some(num(v, "delta", line_no)?),
                "n_paths" => {
                    n_paths = Some(v.parse().map_err(|_| {
                        ParseError::new(line_no, format!("`n_paths` is not an integer: `{v}`"))
                    })?)
                }
                "method" => {
                    method = match v {
                        "stamp" => SausageMethod::Stamp,
                        "hitting" => SausageMethod::Hitting,
                        "both" => SausageMethod::Both,
                        other => {
                            return Err(ParseError::new(
                                line_no,
                                format!("unknown method `{other}` (stamp | hitting | both)"),
                            ))
                        }
                    }
                }
                "scheme" => {
                    scheme = match v {
                        "gaussian" => Scheme::GaussianIncrements,
                        "donsker" => Scheme::DonskerWalk,
                        other => {
                            return Err(ParseError::new(
                                line_no,
                                format!("unknown scheme `{other}`"),
                            ))
                        }
                    }
                }
                "seed" => {
                    seed = v.parse().map_err(|_| {
                        ParseError::new(line_no, format!("`seed` is not an integer: `{v}`"))
                    })?
                }
                "field_raster" => {
                    field_raster = match v {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(ParseError::new(
                                line_no,
                                format!("`field_raster` must be true or false, got `{other}`"),
                            ))
                        }
                    }
                }
                other => {
                    return Err(ParseError::new(
                        line_no,
                        format!("unknown directive `{other}` in sausage config"),
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
        Ok(SausageConfig {
            set_path: set_path.ok_or_else(|| ParseError::new(1, "missing `set`"))?,
            horizon: horizon.ok_or_else(|| ParseError::new(1, "missing `T`"))?,
            delta: delta.ok_or_else(|| ParseError::new(1, "missing `delta`"))?,
            n_paths: n_paths.ok_or_else(|| ParseError::new(1, "missing `n_paths`"))?,
            method,
            scheme,
            seed,
            field_raster,
        })
    }
}

/// Reads a config file, attaching the path to parse errors.
pub fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))
}

/// Loads and rasterizes a set file referenced from a config.
pub fn load_set_spec(base: &Path, rel: &str) -> Result<SetSpec> {
    let path = base.join(rel);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read set file {}", path.display()))?;
    SetSpec::parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Output directory: the SAUSAGE_SYM_OUT environment variable overrides
/// `--out`; the default is `./out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    if let Ok(env) = std::env::var("SAUSAGE_SYM_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    flag.unwrap_or_else(|| PathBuf::from("out"))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(())
}

pub fn check_single_scenario(cfg: &BatteryConfig) -> Result<()> {
    if cfg.scenarios.len() != 1 {
        bail!(
            "`check` expects exactly one [scenario ...] block, found {}",
            cfg.scenarios.len()
        );
    }
    Ok(())
}
