use std::path::{Path, PathBuf};

use anyhow::Context;
use dyadic_core::galerkin::{ForcingOrder, SchemeKind, SchemeSpec};
use dyadic_core::{Boundary, ModelParams, TruncationSpec};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
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

macro_rules! settings {
    ($($field:ident: $ty:ty),* $(,)?) => {
        /// Every option a run can take. Config files hold any subset;
        /// command-line flags win over file values.
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct Settings {
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl Settings {
            /// `self` with every field set in `flags` replaced.
            pub fn overlay(self, flags: Settings) -> Settings {
                Settings { $($field: flags.$field.or(self.$field),)* }
            }
        }
    };
}

settings! {
    lambda: f64,
    sigma: f64,
    n_modes: usize,
    boundary: Boundary,
    scheme: SchemeKind,
    dt: f64,
    t_final: f64,
    samples: usize,
    refinement: u32,
    forcing_order: ForcingOrder,
    richardson: bool,
    paths: usize,
    seed: u64,
    x0: String,
    u0: String,
    checkpoints: usize,
    start: u32,
    horizon: f64,
    cap: u32,
    grid: Vec<f64>,
    out: PathBuf,
    format: OutputFormat,
}

pub const DEFAULT_N_MODES: usize = 16;
pub const DEFAULT_OUT: &str = "dyadic-lab-output";

/// Read a config file. A run manifest is accepted too, in which case its
/// recorded options are used.
pub fn load(path: &Path) -> anyhow::Result<Settings> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", path.display())))?;
    let value = match value.get("options") {
        Some(options) if value.get("tool").is_some() => options.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
}

impl Settings {
    pub fn params(&self) -> Result<ModelParams, UsageError> {
        let lambda = self
            .lambda
            .ok_or_else(|| UsageError("missing --lambda (give it as a flag or in --config)".into()))?;
        ModelParams::new(lambda, self.sigma.unwrap_or(0.0)).map_err(|e| UsageError(e.to_string()))
    }

    pub fn truncation(&self) -> Result<TruncationSpec, UsageError> {
        TruncationSpec::new(
            self.n_modes.unwrap_or(DEFAULT_N_MODES),
            self.boundary.unwrap_or(Boundary::Conservative),
        )
        .map_err(|e| UsageError(e.to_string()))
    }

    pub fn scheme_spec(&self, params: &ModelParams, trunc: &TruncationSpec) -> anyhow::Result<SchemeSpec> {
        let t_final = self.t_final.unwrap_or(1.0);
        let dt = match self.dt {
            Some(dt) => dt,
            None => SchemeSpec::default_dt(params, trunc)?.min(t_final),
        };
        let spec = SchemeSpec::new(self.scheme.unwrap_or(SchemeKind::RotationSplitting), dt, t_final)
            .map_err(|e| UsageError(e.to_string()))?
            .with_samples(self.samples.unwrap_or(10))
            .with_refinement(self.refinement.unwrap_or(0))
            .with_forcing_order(self.forcing_order.unwrap_or_default());
        spec.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(spec)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn output_format(&self) -> OutputFormat {
        self.format.unwrap_or_default()
    }
}

/// The resolved configuration of a run, stored in its manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trunc: Option<TruncationSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSpec>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    pub output_dir: PathBuf,
    pub output_format: OutputFormat,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win() {
        let file = Settings {
            lambda: Some(3.0),
            sigma: Some(0.5),
            ..Settings::default()
        };
        let flags = Settings {
            lambda: Some(2.0),
            ..Settings::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.lambda, Some(2.0));
        assert_eq!(merged.sigma, Some(0.5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = serde_json::from_str::<Settings>(r#"{"lambda": 2, "lamda": 3}"#);
        assert!(e.is_err());
        let s: Settings = serde_json::from_str(r#"{"boundary": "absorbing", "scheme": "cayley_stratonovich"}"#).unwrap();
        assert_eq!(s.boundary, Some(Boundary::Absorbing));
    }

    #[test]
    fn lambda_is_required() {
        assert!(Settings::default().params().unwrap_err().0.contains("--lambda"));
    }
}
