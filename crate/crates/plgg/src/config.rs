//! The JSON run configuration shared by every command.

use std::path::{Path, PathBuf};

use plgg_core::error::Error as CoreError;
use plgg_core::eval::{CvConfig, ImageBranchConfig};
use plgg_core::radiomics::RadiomicsConfig;
use plgg_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// File locations. Inputs default to the layout `synth` writes under
/// `output_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub output_dir: PathBuf,
    pub cohort_csv: Option<PathBuf>,
    pub image_dir: Option<PathBuf>,
    pub mask_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { output_dir: PathBuf::from("run"), cohort_csv: None, image_dir: None, mask_dir: None }
    }
}

impl Paths {
    pub fn cohort_csv(&self) -> PathBuf {
        self.cohort_csv.clone().unwrap_or_else(|| self.output_dir.join("clinical.csv"))
    }

    pub fn image_dir(&self) -> PathBuf {
        self.image_dir.clone().unwrap_or_else(|| self.output_dir.join("images"))
    }

    pub fn mask_dir(&self) -> PathBuf {
        self.mask_dir.clone().unwrap_or_else(|| self.output_dir.join("masks"))
    }

    pub fn radiomics_csv(&self) -> PathBuf {
        self.output_dir.join("radiomics.csv")
    }

    pub fn embeddings_csv(&self) -> PathBuf {
        self.output_dir.join("embeddings.csv")
    }

    pub fn skipped_csv(&self) -> PathBuf {
        self.output_dir.join("skipped.csv")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.output_dir.join("models")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("report")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub synth: SynthConfig,
    pub radiomics: RadiomicsConfig,
    pub cv: CvConfig,
    /// `case_id,prob` file for the external image branch.
    pub external_probs: Option<PathBuf>,
    /// Thread count; `None` uses every available core.
    pub workers: Option<usize>,
}

/// Maps a core validation error to the config field it concerns.
fn field_error(section: &str, e: CoreError) -> Error {
    match e {
        CoreError::Range { what, value } => {
            Error::config(format!("{section}.{what}"), format!("out of range: {value}"))
        }
        other => Error::config(section, other),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::config(if field == "." { "(root)".into() } else { field }, e.into_inner())
        })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sets every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.cv.fold_seed = seed;
        self.cv.search_seed = seed;
        if let ImageBranchConfig::Baseline(tc) = &mut self.cv.image {
            tc.seed = seed;
        }
    }

    /// Semantic checks that need no files.
    pub fn validate(&self) -> Result<()> {
        self.synth.validate().map_err(|e| field_error("synth", e))?;
        self.radiomics.validate().map_err(|e| field_error("radiomics", e))?;
        self.cv.validate().map_err(|e| field_error("cv", e))?;
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if matches!(self.cv.image, ImageBranchConfig::External) && self.external_probs.is_none() {
            return Err(Error::config("external_probs", "required by the external image branch"));
        }
        Ok(())
    }

    /// Fails unless `path` exists; `field` names the config entry it came
    /// from.
    pub fn require(field: &str, path: &Path) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::config(field, format!("{} does not exist", path.display())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(7);
        cfg.cv.image = ImageBranchConfig::External;
        cfg.external_probs = Some("p.csv".into());
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::from_json(r#"{"cv": {"space": {"max_depth": "deep"}}}"#).unwrap_err();
        match e {
            Error::Config { field, .. } => assert_eq!(field, "cv.space.max_depth"),
            other => panic!("{other}"),
        }
        let e = RunConfig::from_json(r#"{"synth": {"n_cases": 3}}"#).unwrap().validate().unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field.starts_with("synth")), "{e}");
        let e = RunConfig::from_json(r#"{"cv": {"folds": 1}}"#).unwrap().validate().unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "cv.folds"), "{e}");
        let e = RunConfig::from_json(r#"{"bogus": 1}"#).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::EXIT_CONFIG);
    }
}
