//! Pipeline configuration file (TOML or JSON). Command line flags take
//! precedence over values read here.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Raw stack path or `%03d` frame pattern.
    pub input: Option<String>,
    pub frames: Option<usize>,
    /// Voxel size in µm, `[x, y, z]`.
    pub spacing: Option<[f64; 3]>,
    pub frame_interval: Option<f64>,
    pub shell: ShellSection,
    pub seg: SegSection,
    pub track: TrackSection,
    pub quantify: QuantifySection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShellSection {
    pub t: Option<f64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegSection {
    pub h: Option<f64>,
    pub connectivity: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackSection {
    pub max_dist: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantifySection {
    pub shell_radius: Option<f64>,
    pub plane_cell: Option<f64>,
}

impl PipelineConfig {
    /// Reads `.toml` or `.json`, chosen by extension.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| CliError::io(path, e))?,
            Some("json") => serde_json::from_str(&text).map_err(|e| CliError::io(path, e))?,
            _ => return Err(CliError::usage(format!("{}: config must be .toml or .json", path.display()))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(s) = self.spacing {
            if s.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(CliError::usage(format!("config spacing must be positive, got {s:?}")));
            }
        }
        if self.frames == Some(0) {
            return Err(CliError::usage("config frames must be >= 1"));
        }
        if let (Some(input), Some(n)) = (&self.input, self.frames) {
            for p in expand_pattern(input, n)? {
                if !p.exists() {
                    return Err(CliError::usage(format!("config input {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

/// Expands a `printf` style integer field (`%d`, `%03d`) for frames
/// `0..n`. A path without a field is returned once.
pub fn expand_pattern(pattern: &str, n: usize) -> Result<Vec<PathBuf>, CliError> {
    let Some(start) = pattern.find('%') else {
        return Ok(vec![PathBuf::from(pattern)]);
    };
    let rest = &pattern[start + 1..];
    let Some(d) = rest.find('d') else {
        return Err(CliError::usage(format!("bad frame pattern {pattern:?}")));
    };
    let spec = &rest[..d];
    let (zero, width) = match spec {
        "" => (false, 0),
        s if s.chars().all(|c| c.is_ascii_digit()) => (s.starts_with('0'), s.parse::<usize>().unwrap_or(0)),
        _ => return Err(CliError::usage(format!("bad frame pattern {pattern:?}"))),
    };
    let (head, tail) = (&pattern[..start], &rest[d + 1..]);
    if tail.contains('%') {
        return Err(CliError::usage(format!("frame pattern {pattern:?} has more than one field")));
    }
    Ok((0..n)
        .map(|i| {
            let num = if zero { format!("{i:0width$}") } else { format!("{i:width$}") };
            PathBuf::from(format!("{head}{num}{tail}"))
        })
        .collect())
}

/// Input list from either explicit paths or a single pattern plus a count.
pub fn resolve_inputs(values: &[PathBuf], frames: Option<usize>) -> Result<Vec<PathBuf>, CliError> {
    match values {
        [] => Err(CliError::usage("no input files given")),
        [one] if one.to_string_lossy().contains('%') => {
            let n = frames.ok_or_else(|| CliError::usage("a frame pattern needs --frames"))?;
            expand_pattern(&one.to_string_lossy(), n)
        }
        many => {
            if let Some(n) = frames {
                if n != many.len() {
                    return Err(CliError::usage(format!("--frames {n} but {} files given", many.len())));
                }
            }
            Ok(many.to_vec())
        }
    }
}
