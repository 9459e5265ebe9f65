//! Runs a [`RunConfig`] and writes its output files.
//!
//! All results are rendered in memory first; files are written only after
//! every computation succeeded, and any file already written is removed if a
//! later write fails.

use std::io::Write;
use std::path::{Path, PathBuf};

use qpiston_core::engine::{
    adiabaticity_scan, initial_state, run_with_assets, AdiabaticityScan, BathSpectra, EngineAssets, StrokeDirection,
};
use qpiston_core::model::EngineModel;
use qpiston_core::thermo::interaction_energy_map;
use qpiston_core::{CycleRecord, EngineParams, EngineRun, Mode, RunSummary};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, OutputFormat, RunConfig};
use crate::CliError;

/// A rendered output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub contents: Vec<u8>,
}

#[derive(Serialize)]
struct MapRow {
    #[serde(rename = "omega_T")]
    omega_t: f64,
    y_over_sigma: f64,
    energy: f64,
}

#[derive(Serialize)]
struct AdiabaticityRow {
    tau_p: f64,
    final_energy: f64,
    adiabatic_bound: f64,
    sudden_bound: f64,
    direction: &'static str,
}

#[derive(Serialize)]
struct SweepRow<'a> {
    sigma: f64,
    tau_p: f64,
    mode: Mode,
    steady_state_index: Option<usize>,
    averaged_from: usize,
    mean_q_in: f64,
    mean_net_work: f64,
    mean_efficiency: Option<f64>,
    cumulative_efficiency: Option<f64>,
    mean_power: f64,
    records: &'a str,
}

#[derive(Serialize)]
struct RunReport<'a> {
    manifest: serde_json::Value,
    summary: &'a RunSummary,
    max_top_population: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    records: Option<&'a [CycleRecord]>,
}

fn encode<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Encode(e.to_string())
}

fn manifest_value(config: &RunConfig) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(config.to_file()).map_err(encode)
}

fn csv_bytes<R: Serialize>(config: &RunConfig, rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    writeln!(out, "# manifest {}", config.manifest()?).map_err(encode)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(encode)?;
    }
    w.into_inner().map_err(encode)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(encode)?;
    out.push(b'\n');
    Ok(out)
}

/// `dir/stem<suffix>` for the primary output path `dir/stem.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn run_artifacts(config: &RunConfig, run: &EngineRun, records_path: &Path) -> Result<Vec<Artifact>, CliError> {
    let summary = RunSummary::of_run(run)?;
    let manifest = manifest_value(config)?;
    let report = |records| RunReport {
        manifest: manifest.clone(),
        summary: &summary,
        max_top_population: run.max_top_population,
        records,
    };
    Ok(match config.output_format {
        OutputFormat::Csv => vec![
            Artifact {
                path: records_path.to_path_buf(),
                contents: csv_bytes(config, &run.records)?,
            },
            Artifact {
                path: sibling(records_path, ".summary.json"),
                contents: json_bytes(&report(None))?,
            },
        ],
        OutputFormat::Json => vec![Artifact {
            path: records_path.to_path_buf(),
            contents: json_bytes(&report(Some(&run.records)))?,
        }],
    })
}

fn interaction_map(config: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let p = &config.params;
    let y_grid: Vec<f64> = config.y_over_sigma.iter().map(|r| r * p.sigma).collect();
    let energy = interaction_energy_map(p, &config.omega_grid, &y_grid)?;
    let contents = match config.output_format {
        OutputFormat::Csv => {
            let rows = config.omega_grid.iter().zip(&energy).flat_map(|(&omega_t, row)| {
                config
                    .y_over_sigma
                    .iter()
                    .zip(row)
                    .map(move |(&y_over_sigma, &energy)| MapRow {
                        omega_t,
                        y_over_sigma,
                        energy,
                    })
            });
            csv_bytes(config, rows)?
        }
        OutputFormat::Json => json_bytes(&serde_json::json!({
            "manifest": manifest_value(config)?,
            "omega_T": config.omega_grid,
            "y_over_sigma": config.y_over_sigma,
            "energy": energy,
        }))?,
    };
    Ok(vec![Artifact {
        path: config.output_path.clone(),
        contents,
    }])
}

fn adiabaticity(config: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let scans = [StrokeDirection::Retract, StrokeDirection::Advance]
        .iter()
        .map(|&d| adiabaticity_scan(&config.params, &config.tau_grid, d, config.numerics.dtau))
        .collect::<qpiston_core::Result<Vec<AdiabaticityScan>>>()?;
    let contents = match config.output_format {
        OutputFormat::Csv => {
            let rows = scans.iter().flat_map(|s| {
                s.points.iter().map(move |&(tau_p, final_energy)| AdiabaticityRow {
                    tau_p,
                    final_energy,
                    adiabatic_bound: s.adiabatic_bound,
                    sudden_bound: s.sudden_bound,
                    direction: s.direction.as_str(),
                })
            });
            csv_bytes(config, rows)?
        }
        OutputFormat::Json => json_bytes(&serde_json::json!({
            "manifest": manifest_value(config)?,
            "scans": scans,
        }))?,
    };
    Ok(vec![Artifact {
        path: config.output_path.clone(),
        contents,
    }])
}

fn single_run(config: &RunConfig, mode: Mode) -> Result<Vec<Artifact>, CliError> {
    let assets = EngineAssets::build(&config.params, mode, &config.numerics)?;
    let run = run_with_assets(&assets, config.n_cycles, &initial_state(&config.params)?)?;
    run_artifacts(config, &run, &config.output_path)
}

fn sweep_point_name(mode: Mode, sigma: f64, tau_p: f64) -> String {
    let mode = match mode {
        Mode::Bath => "bath",
        Mode::Measurement => "measurement",
    };
    format!("-{mode}-sigma{sigma}-tau{tau_p}")
}

fn sweep(config: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let spectra_mode = if config.modes.contains(&Mode::Bath) {
        Mode::Bath
    } else {
        Mode::Measurement
    };
    let base = &config.params;
    // y_retracted/σ is held fixed across the sweep.
    let at_sigma = |sigma: f64| EngineParams {
        sigma,
        y_retracted: base.y_retracted * sigma / base.sigma,
        ..base.clone()
    };
    // Bath spectra depend on σ but not on the stroke time: one set per σ.
    let per_sigma = config
        .sigmas
        .par_iter()
        .map(|&sigma| {
            let model = EngineModel::new(&at_sigma(sigma))?;
            let spectra = BathSpectra::new(&model, spectra_mode)?;
            let points: Vec<(f64, Mode)> = config
                .tau_grid
                .iter()
                .flat_map(|&tau| config.modes.iter().map(move |&m| (tau, m)))
                .collect();
            points
                .par_iter()
                .map(|&(tau_p, mode)| {
                    let params = EngineParams {
                        tau_p,
                        tau_b: tau_p * base.tau_b / base.tau_p,
                        ..at_sigma(sigma)
                    };
                    let model = EngineModel::new(&params)?;
                    let assets = EngineAssets::with_spectra(&model, mode, &config.numerics, &spectra)?;
                    let run = run_with_assets(&assets, config.n_cycles, &initial_state(&params)?)?;
                    Ok((sigma, tau_p, mode, run))
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let ext = config.output_format.extension();
    let mut artifacts = Vec::new();
    let mut rows = Vec::new();
    for (sigma, tau_p, mode, run) in per_sigma.into_iter().flatten() {
        let point = RunConfig {
            experiment: match mode {
                Mode::Bath => Experiment::RunBath,
                Mode::Measurement => Experiment::RunMeasurement,
            },
            params: run.params.clone(),
            sigmas: vec![sigma],
            tau_grid: vec![tau_p],
            modes: vec![mode],
            output_path: sibling(
                &config.output_path,
                &format!("{}.{ext}", sweep_point_name(mode, sigma, tau_p)),
            ),
            ..config.clone()
        };
        artifacts.extend(run_artifacts(&point, &run, &point.output_path)?);
        rows.push((sigma, tau_p, mode, RunSummary::of_run(&run)?, point.output_path));
    }
    let contents = match config.output_format {
        OutputFormat::Csv => {
            let names: Vec<String> = rows
                .iter()
                .map(|r| r.4.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect();
            csv_bytes(
                config,
                rows.iter()
                    .zip(&names)
                    .map(|((sigma, tau_p, mode, s, _), name)| SweepRow {
                        sigma: *sigma,
                        tau_p: *tau_p,
                        mode: *mode,
                        steady_state_index: s.steady_state_index,
                        averaged_from: s.averaged_from,
                        mean_q_in: s.mean_q_in,
                        mean_net_work: s.mean_net_work,
                        mean_efficiency: s.mean_efficiency,
                        cumulative_efficiency: s.cumulative_efficiency,
                        mean_power: s.mean_power,
                        records: name,
                    }),
            )?
        }
        OutputFormat::Json => {
            let runs: Vec<serde_json::Value> = rows
                .iter()
                .map(|(sigma, tau_p, mode, s, path)| {
                    serde_json::json!({
                        "sigma": sigma,
                        "tau_p": tau_p,
                        "mode": mode,
                        "summary": s,
                        "records": path.file_name().unwrap_or_default().to_string_lossy(),
                    })
                })
                .collect();
            json_bytes(&serde_json::json!({ "manifest": manifest_value(config)?, "runs": runs }))?
        }
    };
    artifacts.push(Artifact {
        path: config.output_path.clone(),
        contents,
    });
    Ok(artifacts)
}

/// Computes every output of the experiment without touching the filesystem.
pub fn render(config: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    match config.experiment {
        Experiment::InteractionMap => interaction_map(config),
        Experiment::Adiabaticity => adiabaticity(config),
        Experiment::RunBath => single_run(config, Mode::Bath),
        Experiment::RunMeasurement => single_run(config, Mode::Measurement),
        Experiment::Sweep => sweep(config),
    }
}

/// Writes the artifacts; on failure, removes every file written so far.
pub fn write_artifacts(artifacts: &[Artifact]) -> Result<(), CliError> {
    let mut written: Vec<&Path> = Vec::new();
    for a in artifacts {
        let result = a
            .path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .map_or(Ok(()), std::fs::create_dir_all)
            .and_then(|_| std::fs::write(&a.path, &a.contents));
        match result {
            Ok(()) => written.push(&a.path),
            Err(source) => {
                let _ = std::fs::remove_file(&a.path);
                for p in written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(CliError::Io {
                    path: a.path.clone(),
                    source,
                });
            }
        }
    }
    Ok(())
}

/// Runs the experiment and writes its files, returning their paths.
pub fn execute(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let artifacts = render(config)?;
    write_artifacts(&artifacts)?;
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}
