//! Pipeline configuration, read from TOML or JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chromakey::ChromaParams;
use crate::error::{Error, Result};
use crate::eval::EvalParams;
use crate::inpaint::InpaintParams;
use crate::propagate::DEFAULT_GATE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateParams {
    /// Meters.
    pub gate: f64,
}

impl Default for PropagateParams {
    fn default() -> Self {
        Self { gate: DEFAULT_GATE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportParams {
    /// RoI expansion factor for the exported `bbox_plus`.
    pub roi_alpha: f64,
}

impl Default for ExportParams {
    fn default() -> Self {
        Self { roi_alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub chromakey: ChromaParams,
    pub inpaint: InpaintParams,
    pub propagate: PropagateParams,
    pub eval: EvalParams,
    pub export: ExportParams,
}

impl Config {
    /// Parses JSON when the first non-blank character is `{`, TOML otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.chromakey.validate()?;
        self.inpaint.validate()?;
        self.eval.validate()?;
        if !(self.propagate.gate > 0.0) {
            return Err(Error::InvalidParam(format!("propagate.gate must be > 0, got {}", self.propagate.gate)));
        }
        if !(self.export.roi_alpha >= 0.0) {
            return Err(Error::InvalidParam(format!("export.roi_alpha must be >= 0, got {}", self.export.roi_alpha)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.chromakey.key_threshold, 40.0);
        assert_eq!(c.chromakey.min_area, 20);
        assert_eq!(c.chromakey.merge_distance, 0.07);
        assert_eq!(c.propagate.gate, 0.15);
        assert_eq!(c.export.roi_alpha, 0.5);
        assert_eq!(c.inpaint.num_scales, 3);
        assert_eq!(c.eval.max_dets, 50);
    }

    #[test]
    fn toml_and_json_agree() {
        let t = Config::parse("[propagate]\ngate = 0.2\n[chromakey]\nmin_area = 10\n").unwrap();
        let j = Config::parse(r#"{"propagate": {"gate": 0.2}, "chromakey": {"min_area": 10}}"#).unwrap();
        assert_eq!(t, j);
        assert_eq!(t.propagate.gate, 0.2);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::parse("[chromakey]\nthreshold = 3\n").is_err());
        assert!(Config::parse("[propagate]\ngate = -1.0\n").is_err());
        assert!(Config::parse("[eval]\nmode = \"fuzzy\"\n").is_err());
    }
}
