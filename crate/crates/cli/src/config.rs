//! Configuration files, flag overrides and the fully resolved [`RunConfig`].
//!
//! A configuration is a flat TOML table. Every key is optional except
//! `sigma` (and `experiment`, unless a subcommand names it). Command-line
//! flags are parsed into the same [`ConfigFile`] shape and take precedence
//! over the file.

use std::path::{Path, PathBuf};

use qpiston_core::{AdvanceModel, CutoffPolicy, EngineParams, Mode, Numerics};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Name of the environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PISTON_OUTPUT_DIR";

pub const DEFAULT_TAU_P: f64 = 10.0;
pub const DEFAULT_CYCLES: usize = 80;
pub const DEFAULT_OMEGA_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
pub const DEFAULT_ADIABATICITY_TAUS: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
/// The hard cutoff failure applies from this cutoff upwards; smaller desk-scale
/// cutoffs only warn.
pub const STRICT_CUTOFF_FROM: usize = 51;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    InteractionMap,
    Adiabaticity,
    RunBath,
    RunMeasurement,
    Sweep,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::InteractionMap => "interaction-map",
            Experiment::Adiabaticity => "adiabaticity",
            Experiment::RunBath => "run-bath",
            Experiment::RunMeasurement => "run-measurement",
            Experiment::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// On-disk configuration; also the shape of command-line overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_advanced: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_retracted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_amp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_hot: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_cold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cycles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dtau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advance: Option<AdvanceModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_warn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_fail: Option<f64>,
    /// Whether exceeding `cutoff_fail` aborts the run; off below the
    /// production cutoff unless set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strict_cutoff: Option<bool>,
    /// Thermal frequencies of the interaction map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_grid: Option<Vec<f64>>,
    /// Piston positions of the interaction map, in units of σ.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_over_sigma: Option<Vec<f64>>,
    /// Stroke times of the adiabaticity scan or the sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<Mode>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_format: Option<OutputFormat>,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Encode(e.to_string()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            experiment: over.experiment.or(self.experiment),
            sigma: over.sigma.or(self.sigma),
            tau_p: over.tau_p.or(self.tau_p),
            tau_b: over.tau_b.or(self.tau_b),
            phi0: over.phi0.or(self.phi0),
            y_advanced: over.y_advanced.or(self.y_advanced),
            y_retracted: over.y_retracted.or(self.y_retracted),
            x0: over.x0.or(self.x0),
            z0: over.z0.or(self.z0),
            lambda: over.lambda.or(self.lambda),
            y_amp: over.y_amp.or(self.y_amp),
            omega_hot: over.omega_hot.or(self.omega_hot),
            omega_cold: over.omega_cold.or(self.omega_cold),
            cutoff: over.cutoff.or(self.cutoff),
            n_cycles: over.n_cycles.or(self.n_cycles),
            dtau: over.dtau.or(self.dtau),
            advance: over.advance.or(self.advance),
            cutoff_warn: over.cutoff_warn.or(self.cutoff_warn),
            cutoff_fail: over.cutoff_fail.or(self.cutoff_fail),
            strict_cutoff: over.strict_cutoff.or(self.strict_cutoff),
            omega_grid: over.omega_grid.or(self.omega_grid),
            y_over_sigma: over.y_over_sigma.or(self.y_over_sigma),
            tau_grid: over.tau_grid.or(self.tau_grid),
            sigmas: over.sigmas.or(self.sigmas),
            modes: over.modes.or(self.modes),
            output_path: over.output_path.or(self.output_path),
            output_format: over.output_format.or(self.output_format),
        }
    }
}

/// A validated experiment description with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub params: EngineParams,
    pub numerics: Numerics,
    pub n_cycles: usize,
    pub omega_grid: Vec<f64>,
    pub y_over_sigma: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub modes: Vec<Mode>,
    pub output_path: PathBuf,
    pub output_format: OutputFormat,
}

fn default_y_over_sigma() -> Vec<f64> {
    (0..=20).map(|i| 0.5 * i as f64).collect()
}

fn positive_list(name: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::config(format!("`{name}` must not be empty")));
    }
    match values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(v) => Err(CliError::config(format!("`{name}` entries must be positive, got {v}"))),
        None => Ok(()),
    }
}

/// Resolves a configuration against the standard defaults and validates it.
/// `output_dir` is used when no output path is given.
pub fn resolve(file: ConfigFile, output_dir: Option<&Path>) -> Result<RunConfig, CliError> {
    let experiment = file
        .experiment
        .ok_or_else(|| CliError::config("missing required field `experiment`"))?;
    let sigma = file
        .sigma
        .ok_or_else(|| CliError::config("missing required field `sigma`"))?;
    let tau_p = file.tau_p.unwrap_or(DEFAULT_TAU_P);
    let mut params = EngineParams::new(sigma, tau_p);
    params.tau_b = file.tau_b.unwrap_or(tau_p);
    if let Some(v) = file.phi0 {
        params.phi0 = v;
    }
    if let Some(v) = file.y_advanced {
        params.y_advanced = v;
    }
    if let Some(v) = file.y_retracted {
        params.y_retracted = v;
    }
    if let Some(v) = file.x0 {
        params.x0 = v;
    }
    if let Some(v) = file.z0 {
        params.z0 = v;
    }
    if let Some(v) = file.lambda {
        params.lambda = v;
    }
    if let Some(v) = file.y_amp {
        params.y_amp = v;
    }
    if let Some(v) = file.omega_hot {
        params.omega_hot = v;
    }
    if let Some(v) = file.omega_cold {
        params.omega_cold = v;
    }
    if let Some(v) = file.cutoff {
        params.cutoff = v;
    }
    params.validate()?;

    let default_policy = CutoffPolicy::default();
    let strict = file.strict_cutoff.unwrap_or(params.cutoff >= STRICT_CUTOFF_FROM);
    let numerics = Numerics {
        dtau: file.dtau.unwrap_or(qpiston_core::dynamics::DEFAULT_DTAU),
        cutoff_policy: CutoffPolicy {
            warn: file.cutoff_warn.unwrap_or(default_policy.warn),
            fail: if strict {
                file.cutoff_fail.or(default_policy.fail)
            } else {
                None
            },
        },
        advance: file.advance.unwrap_or_default(),
    };
    numerics.validate()?;

    let n_cycles = file.n_cycles.unwrap_or(DEFAULT_CYCLES);
    if n_cycles == 0 {
        return Err(CliError::config("`n_cycles` must be positive"));
    }
    let omega_grid = file.omega_grid.unwrap_or_else(|| DEFAULT_OMEGA_GRID.to_vec());
    positive_list("omega_grid", &omega_grid)?;
    let y_over_sigma = file.y_over_sigma.unwrap_or_else(default_y_over_sigma);
    if y_over_sigma.is_empty() || y_over_sigma.iter().any(|y| !y.is_finite()) {
        return Err(CliError::config(
            "`y_over_sigma` must be a non-empty list of finite numbers",
        ));
    }
    let tau_grid = file.tau_grid.unwrap_or_else(|| match experiment {
        Experiment::Sweep => vec![tau_p],
        _ => DEFAULT_ADIABATICITY_TAUS.to_vec(),
    });
    positive_list("tau_grid", &tau_grid)?;
    let sigmas = file.sigmas.unwrap_or_else(|| vec![sigma]);
    positive_list("sigmas", &sigmas)?;
    let modes = file.modes.unwrap_or_else(|| vec![Mode::Bath, Mode::Measurement]);
    if modes.is_empty() {
        return Err(CliError::config("`modes` must not be empty"));
    }

    let output_format = file.output_format.unwrap_or_default();
    let output_path = file.output_path.unwrap_or_else(|| {
        output_dir
            .unwrap_or(Path::new("."))
            .join(format!("{}.{}", experiment.as_str(), output_format.extension()))
    });

    Ok(RunConfig {
        experiment,
        params,
        numerics,
        n_cycles,
        omega_grid,
        y_over_sigma,
        tau_grid,
        sigmas,
        modes,
        output_path,
        output_format,
    })
}

/// Reads the optional configuration file, applies the overrides and resolves.
pub fn parse_config(
    path: Option<&Path>,
    overrides: ConfigFile,
    output_dir: Option<&Path>,
) -> Result<RunConfig, CliError> {
    let base = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    resolve(base.merge(overrides), output_dir)
}

impl RunConfig {
    /// The configuration file that reproduces this run exactly.
    pub fn to_file(&self) -> ConfigFile {
        let p = &self.params;
        ConfigFile {
            experiment: Some(self.experiment),
            sigma: Some(p.sigma),
            tau_p: Some(p.tau_p),
            tau_b: Some(p.tau_b),
            phi0: Some(p.phi0),
            y_advanced: Some(p.y_advanced),
            y_retracted: Some(p.y_retracted),
            x0: Some(p.x0),
            z0: Some(p.z0),
            lambda: Some(p.lambda),
            y_amp: Some(p.y_amp),
            omega_hot: Some(p.omega_hot),
            omega_cold: Some(p.omega_cold),
            cutoff: Some(p.cutoff),
            n_cycles: Some(self.n_cycles),
            dtau: Some(self.numerics.dtau),
            advance: Some(self.numerics.advance),
            cutoff_warn: Some(self.numerics.cutoff_policy.warn),
            cutoff_fail: self.numerics.cutoff_policy.fail,
            strict_cutoff: Some(self.numerics.cutoff_policy.fail.is_some()),
            omega_grid: Some(self.omega_grid.clone()),
            y_over_sigma: Some(self.y_over_sigma.clone()),
            tau_grid: Some(self.tau_grid.clone()),
            sigmas: Some(self.sigmas.clone()),
            modes: Some(self.modes.clone()),
            output_path: Some(self.output_path.clone()),
            output_format: Some(self.output_format),
        }
    }

    /// Single-line manifest of every resolved parameter.
    pub fn manifest(&self) -> Result<String, CliError> {
        serde_json::to_string(&self.to_file()).map_err(|e| CliError::Encode(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ConfigFile {
        ConfigFile::from_toml("experiment = \"run-bath\"\nsigma = 0.5\ntau_p = 10\n").unwrap()
    }

    #[test]
    fn minimal_config_fills_standard_values() {
        let c = resolve(minimal(), None).unwrap();
        assert_eq!(c.experiment, Experiment::RunBath);
        assert_eq!(c.params.phi0, -5.0);
        assert_eq!(c.params.y_retracted, 5.0);
        assert_eq!(
            (c.params.x0, c.params.z0, c.params.lambda, c.params.y_amp),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!((c.params.omega_hot, c.params.omega_cold), (5.0, 0.1));
        assert_eq!(c.params.cutoff, 51);
        assert_eq!(c.params.tau_b, 10.0);
        assert_eq!(c.n_cycles, 80);
        assert_eq!(c.numerics.cutoff_policy, CutoffPolicy::default());
        assert_eq!(c.output_path, Path::new("./run-bath.csv"));
    }

    #[test]
    fn overrides_take_precedence() {
        let over = ConfigFile {
            tau_p: Some(5.0),
            cutoff: Some(21),
            ..ConfigFile::default()
        };
        let c = resolve(minimal().merge(over), Some(Path::new("/tmp/out"))).unwrap();
        assert_eq!(c.params.tau_p, 5.0);
        assert_eq!(c.params.tau_b, 5.0);
        assert_eq!(c.numerics.cutoff_policy.fail, None);
        assert_eq!(c.output_path, Path::new("/tmp/out/run-bath.csv"));
    }

    #[test]
    fn rejects_missing_sigma_and_unknown_keys() {
        let e = resolve(ConfigFile::from_toml("experiment = \"sweep\"").unwrap(), None).unwrap_err();
        assert!(e.to_string().contains("sigma"));
        let e = ConfigFile::from_toml("sigma = 0.5\nsgima = 1").unwrap_err();
        assert!(e.to_string().contains("sgima"));
        let e = resolve(
            ConfigFile::from_toml("experiment = \"run-bath\"\nsigma = -1").unwrap(),
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("sigma"));
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut file = minimal();
        file.omega_hot = Some(5.0);
        file.omega_cold = Some(0.1);
        let c = resolve(file, None).unwrap();
        let text = c.to_file().to_toml().unwrap();
        let again = resolve(ConfigFile::from_toml(&text).unwrap(), None).unwrap();
        assert_eq!(again, c);
        assert_eq!((again.params.omega_hot, again.params.omega_cold), (5.0, 0.1));
    }

    #[test]
    fn relaxed_cutoff_round_trips() {
        let mut file = minimal();
        file.strict_cutoff = Some(false);
        let c = resolve(file, None).unwrap();
        assert_eq!(c.numerics.cutoff_policy.fail, None);
        let text = c.to_file().to_toml().unwrap();
        assert_eq!(resolve(ConfigFile::from_toml(&text).unwrap(), None).unwrap(), c);
        let json: ConfigFile = serde_json::from_str(&c.manifest().unwrap()).unwrap();
        assert_eq!(resolve(json, None).unwrap(), c);
    }
}
