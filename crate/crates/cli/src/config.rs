//! Defaults resolved in the order built-in < config file < environment < flags.

use std::path::Path;

use gpi_core::mc::{DEFAULT_CI_LEVEL, DEFAULT_SAMPLES, DEFAULT_SEED};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub tol: Option<String>,
    pub samples: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub workers: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tol: None,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            ci_level: DEFAULT_CI_LEVEL,
            workers: None,
        }
    }
}

fn bad(location: &str, msg: String) -> CliError {
    CliError::usage(msg).at(location)
}

impl Settings {
    pub fn load(config: Option<&Path>) -> Result<Self, CliError> {
        let mut s = Settings::default();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| bad(&path.display().to_string(), format!("cannot read config: {e}")))?;
            s.apply_file(&text, &path.display().to_string())?;
        }
        if let Ok(v) = std::env::var("GPI_SEED") {
            s.seed = v.trim().parse().map_err(|_| bad("GPI_SEED", format!("not an integer: {v:?}")))?;
        }
        if let Ok(v) = std::env::var("GPI_WORKERS") {
            s.workers = Some(v.trim().parse().map_err(|_| bad("GPI_WORKERS", format!("not an integer: {v:?}")))?);
        }
        Ok(s)
    }

    fn apply_file(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let loc = format!("{origin}:{}", lineno + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(&loc, format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num_err = |_: std::num::ParseIntError| bad(&loc, format!("invalid value for {key}: {value:?}"));
            match key {
                "tol" => self.tol = Some(value.to_owned()),
                "N" => self.samples = value.parse().map_err(num_err)?,
                "seed" => self.seed = value.parse().map_err(num_err)?,
                "ci_level" => self.ci_level = value.parse().map_err(|_| bad(&loc, format!("invalid value for {key}: {value:?}")))?,
                "workers" => self.workers = Some(value.parse().map_err(num_err)?),
                other => return Err(bad(&loc, format!("unknown config key {other:?}"))),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values_and_comments() {
        let mut s = Settings::default();
        s.apply_file("# defaults\nN = 5000\nseed=9 # trailing\n\nci_level=0.9\ntol=1/1000\n", "cfg").unwrap();
        assert_eq!(s.samples, 5000);
        assert_eq!(s.seed, 9);
        assert_eq!(s.ci_level, 0.9);
        assert_eq!(s.tol.as_deref(), Some("1/1000"));
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut s = Settings::default();
        let e = s.apply_file("colour=blue\n", "cfg").unwrap_err();
        assert_eq!(e.location.as_deref(), Some("cfg:1"));
    }
}
