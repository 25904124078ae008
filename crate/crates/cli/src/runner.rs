//! Scenario execution: builds the comparison checks from parsed configs and
//! collects the artifacts each run writes.

use crate::config::{Scenario, Theorem};
use anyhow::{anyhow, bail, Context, Result};
use sausage_sym::compare::{
    check_polarization_pointwise, check_representation, check_sausage_isoperimetry,
    check_symmetrization_mass, emit_plot_data, CheckParams, SummaryRow, Verdict,
};
use sausage_sym::geometry::{GridField, GridSet, HalfSpace, PolarizationSchedule, Selection};
use sausage_sym::io::{DtSpec, SetSpec};
use sausage_sym::stochastic::PathSpec;
use sausage_sym::util::format_f64;
use std::path::PathBuf;

/// Everything one scenario produced: summary rows plus named artifacts
/// (relative path, contents).
pub struct ScenarioOutcome {
    pub rows: Vec<SummaryRow>,
    pub files: Vec<(PathBuf, String)>,
    pub verdict: Verdict,
}

pub struct ScenarioInputs {
    pub scenario: Scenario,
    pub set_spec: SetSpec,
    pub dt: DtSpec,
    pub seed: u64,
    pub config_hash: u64,
}

impl ScenarioInputs {
    /// The `(h/2, dt/2, delta/2)` ladder variant.
    pub fn refined(&self) -> ScenarioInputs {
        let coarse_h = self.set_spec.grid.spacing;
        let mut scenario = self.scenario.clone();
        scenario.name = format!("{}_refined", scenario.name);
        scenario.delta = scenario.delta.map(|d| d / 2.0);
        let dt_resolved = self
            .scenario
            .dt
            .clone()
            .unwrap_or_else(|| self.dt.clone())
            .resolve(coarse_h);
        scenario.dt = Some(DtSpec::Given(dt_resolved / 2.0));
        ScenarioInputs {
            scenario,
            set_spec: self.set_spec.refined(),
            dt: self.dt.clone(),
            seed: self.seed,
            config_hash: self.config_hash,
        }
    }
}

pub fn run_scenario(inputs: &ScenarioInputs) -> Result<ScenarioOutcome> {
    let sc = &inputs.scenario;
    let set: GridSet = inputs
        .set_spec
        .rasterize()
        .map_err(|e| anyhow!("scenario `{}`: {e}", sc.name))?;
    let grid = *set.grid();
    let h = grid.spacing();
    let psi = GridField::indicator(&set);
    let dt = sc
        .dt
        .clone()
        .unwrap_or_else(|| inputs.dt.clone())
        .resolve(h);
    let params = CheckParams {
        scenario: sc.name.clone(),
        dt: Some(dt),
        tolerance: sc.tol,
        seed: inputs.seed,
        config_hash: inputs.config_hash,
    };
    let dir = PathBuf::from(&sc.name);
    let mut files = Vec::new();
    let mut rows = Vec::new();

    let verdict = match sc.theorem {
        Theorem::Polarization => {
            let (nu, c) = sc
                .halfspace
                .as_ref()
                .ok_or_else(|| anyhow!("scenario `{}` needs a `halfspace`", sc.name))?;
            let hs = HalfSpace::new(nu, *c).map_err(|e| anyhow!("scenario `{}`: {e}", sc.name))?;
            require_times(sc)?;
            let report = check_polarization_pointwise(&set, &psi, &hs, &sc.times, &params)
                .with_context(|| format!("scenario `{}`", sc.name))?;
            files.push((dir.join("report.csv"), emit_plot_data(&report)));
            rows.push(SummaryRow::of(&report));
            report.verdict
        }
        Theorem::Symmetrization => {
            require_times(sc)?;
            let stop_tol = sc.stop_tol.unwrap_or(3.0 * h * set.perimeter());
            let schedule = PolarizationSchedule::new(
                PolarizationSchedule::dense_pool(&grid),
                Selection::Greedy,
                stop_tol,
                sc.max_steps,
            )
            .map_err(|e| anyhow!("scenario `{}`: {e}", sc.name))?;
            let out = check_symmetrization_mass(&set, &psi, &schedule, &sc.times, &params)
                .with_context(|| format!("scenario `{}`", sc.name))?;
            files.push((dir.join("report.csv"), emit_plot_data(&out.report)));
            let mut chain = String::from("step,worst_margin_vs_previous,halfspace\n");
            for link in &out.chain {
                chain.push_str(&format!(
                    "{},{},{}\n",
                    link.step,
                    format_f64(link.worst_margin_vs_previous),
                    link.halfspace.replace(',', ";"),
                ));
            }
            files.push((dir.join("chain.csv"), chain));
            let mut row = SummaryRow::of(&out.report);
            row.verdict = out.overall_verdict();
            // the row's margin covers the induction chain as well
            row.worst_margin = out
                .chain
                .iter()
                .map(|l| l.worst_margin_vs_previous)
                .fold(row.worst_margin, f64::min);
            rows.push(row);
            out.overall_verdict()
        }
        Theorem::Sausage => {
            let horizon = sc
                .horizon
                .ok_or_else(|| anyhow!("scenario `{}` needs `T`", sc.name))?;
            let delta = sc
                .delta
                .ok_or_else(|| anyhow!("scenario `{}` needs `delta`", sc.name))?;
            let spec = PathSpec::new(
                grid.dim(),
                horizon,
                delta,
                sausage_sym::stochastic::Driver::Standard,
                inputs.seed,
                sc.scheme,
            )
            .map_err(|e| anyhow!("scenario `{}`: {e}", sc.name))?;
            let report = check_sausage_isoperimetry(&set, &spec, sc.n_paths, &params)
                .with_context(|| format!("scenario `{}`", sc.name))?;
            files.push((dir.join("report.csv"), emit_plot_data(&report)));
            rows.push(SummaryRow::of(&report));
            report.verdict
        }
        Theorem::Representation => {
            require_times(sc)?;
            let delta = sc
                .delta
                .ok_or_else(|| anyhow!("scenario `{}` needs `delta`", sc.name))?;
            let horizon = sc
                .horizon
                .unwrap_or_else(|| *sc.times.last().expect("validated nonempty"));
            let spec = PathSpec::new(
                grid.dim(),
                horizon,
                delta,
                sausage_sym::stochastic::Driver::Standard,
                inputs.seed,
                sc.scheme,
            )
            .map_err(|e| anyhow!("scenario `{}`: {e}", sc.name))?;
            let rep = check_representation(
                &set,
                &sausage_sym::pde::OperatorSpec::laplacian_half(),
                &sc.times,
                &spec,
                sc.n_paths,
                sc.band,
                &params,
            )
            .with_context(|| format!("scenario `{}`", sc.name))?;
            let mut csv = String::from("t,pde_mass,stamp_mean,stamp_ci,hitting_mean,hitting_ci\n");
            for i in 0..rep.times.len() {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    format_f64(rep.times[i]),
                    format_f64(rep.pde_mass[i]),
                    format_f64(rep.stamp[i].mean),
                    format_f64(rep.stamp[i].half_width_95),
                    format_f64(rep.hitting[i].mean),
                    format_f64(rep.hitting[i].half_width_95),
                ));
            }
            files.push((dir.join("representation.csv"), csv));
            let report = rep.to_comparison_report();
            files.push((dir.join("report.csv"), emit_plot_data(&report)));
            rows.push(SummaryRow::of(&report));
            report.verdict
        }
    };
    Ok(ScenarioOutcome {
        rows,
        files,
        verdict,
    })
}

fn require_times(sc: &Scenario) -> Result<()> {
    if sc.times.is_empty() {
        bail!("scenario `{}` needs `times`", sc.name);
    }
    Ok(())
}
