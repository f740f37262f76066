use std::fs;
use std::path::Path;

use fdb_core::evaluation::{EvalOptions, NamingRule};
use fdb_core::params::{parse_config, PARAM_KEYS};
use fdb_core::texture::{ShrinkageKind, Synthesis, TextureOptions};
use fdb_core::FdbParams;

use crate::error::CliError;

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: FdbParams,
    pub naming: NamingRule,
    pub resize: Option<f64>,
    pub synthesis: Synthesis,
    pub shrinkage: ShrinkageKind,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: FdbParams::default(),
            naming: NamingRule::default(),
            resize: None,
            synthesis: Synthesis::Factorized,
            shrinkage: ShrinkageKind::Soft,
            workers: 1,
        }
    }
}

impl RunConfig {
    /// Applies one `key = value` setting from a config file or `--params`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "naming_rule" => {
                self.naming = NamingRule::new(value).map_err(CliError::from)?;
            }
            "resize" => {
                let f: f64 = value
                    .parse()
                    .map_err(|_| CliError::usage(format!("resize: cannot parse `{value}`")))?;
                self.resize = Some(f);
            }
            k if PARAM_KEYS.contains(&k) => {
                self.params.set(k, value).map_err(|e| CliError::usage(e.to_string()))?;
            }
            _ => return Err(CliError::usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let pairs = parse_config(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Applies an inline `k=v` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--params expects key=value, got `{kv}`")))?;
        self.set(k.trim(), v.trim())
    }

    /// Checks every parameter invariant before the pipeline runs.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params
            .validate()
            .map_err(|e| CliError::invariant(e.to_string()))?;
        if let Some(f) = self.resize {
            if !(f.is_finite() && f > 0.0) {
                return Err(CliError::invariant(format!("resize must be positive, got {f}")));
            }
        }
        if self.workers == 0 {
            return Err(CliError::invariant("workers must be at least 1"));
        }
        Ok(())
    }

    pub fn texture_options(&self) -> TextureOptions {
        TextureOptions {
            synthesis: self.synthesis,
            shrinkage: self.shrinkage,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            naming: self.naming.clone(),
            texture: self.texture_options(),
            resize: self.resize,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.cfg");
        fs::write(&path, "C = 0.08\ngamma = 2\nnaming_rule = {stem}.bmp\nresize = 0.5\n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.load_file(&path).unwrap();
        cfg.apply_override("t=7").unwrap();
        cfg.apply_override("C = 0.03").unwrap();
        assert_eq!(cfg.params.c, 0.03);
        assert_eq!(cfg.params.gamma, 2);
        assert_eq!(cfg.params.t, 7.0);
        assert_eq!(cfg.resize, Some(0.5));
        assert_eq!(cfg.naming.template(), "{stem}.bmp");
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.set("workers", "3").unwrap_err().code(), 1);
        assert_eq!(cfg.apply_override("C").unwrap_err().code(), 1);
        cfg.set("s", "8").unwrap();
        assert_eq!(cfg.validate().unwrap_err().code(), 3);
    }
}
