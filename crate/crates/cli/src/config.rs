//! Tool configuration: one JSON file plus flag overrides. Environment
//! variables are never consulted, so runs are reproducible from the
//! command line alone.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use beetscan_core::geometry::MarkerDims;
use beetscan_core::pipeline::PatchTier;
use beetscan_core::MarkerClass;

/// On-disk configuration. Every field has a default, so an absent or
/// empty file is valid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    /// Physical marker dimensions in mm, keyed by marker class name.
    /// Scale recovery is skipped for classes without an entry.
    pub markers: BTreeMap<String, MarkerDims>,
    pub tier: PatchTier,
    pub margin_frac: f64,
    pub scale_residual_bound: f64,
    /// Adapter command line, split on whitespace.
    pub adapter: Option<String>,
    pub split_ratios: [f64; 3],
    pub split_seed: u64,
    pub dice_epsilon: f64,
    pub workers: usize,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            markers: BTreeMap::new(),
            tier: PatchTier::Large,
            margin_frac: 0.05,
            scale_residual_bound: 0.1,
            adapter: None,
            split_ratios: [0.7, 0.15, 0.15],
            split_seed: 0,
            dice_epsilon: 1e-6,
            workers: 1,
        }
    }
}

impl ToolConfig {
    pub fn load(path: Option<&Path>) -> Result<ToolConfig> {
        match path {
            None => Ok(ToolConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                let config: ToolConfig = serde_json::from_str(&text)
                    .with_context(|| format!("invalid config {}", path.display()))?;
                config.validate()?;
                Ok(config)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        for (class, dims) in &self.markers {
            if MarkerClass::from_name(class).is_none() {
                bail!("config: unknown marker class `{class}`");
            }
            if dims.length_mm <= 0.0 || dims.width_mm <= 0.0 {
                bail!("config: marker `{class}` dimensions must be positive");
            }
        }
        if self.margin_frac < 0.0 {
            bail!("config: margin_frac must be non-negative");
        }
        if self.scale_residual_bound <= 0.0 {
            bail!("config: scale_residual_bound must be positive");
        }
        if self.dice_epsilon <= 0.0 {
            bail!("config: dice_epsilon must be positive");
        }
        Ok(())
    }

    pub fn marker_dims(&self) -> BTreeMap<MarkerClass, MarkerDims> {
        self.markers
            .iter()
            .filter_map(|(name, dims)| MarkerClass::from_name(name).map(|class| (class, *dims)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let config = ToolConfig::default();
        assert!(config.validate().is_ok());
        assert_eq!(config.tier.size(), (1056, 576));
    }

    #[test]
    fn config_round_trips() {
        let mut config = ToolConfig::default();
        config.markers.insert(
            "Sign".into(),
            MarkerDims {
                length_mm: 148.0,
                width_mm: 105.0,
            },
        );
        let text = serde_json::to_string(&config).unwrap();
        let back: ToolConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.markers["Sign"].length_mm, 148.0);
        assert_eq!(back.marker_dims()[&MarkerClass::Sign].width_mm, 105.0);
    }

    #[test]
    fn unknown_marker_class_is_rejected() {
        let text = r#"{"markers": {"Banana": {"length_mm": 1.0, "width_mm": 1.0}}}"#;
        let config: ToolConfig = serde_json::from_str(text).unwrap();
        assert!(config.validate().is_err());
    }
}
