//! Experiment sweep configuration: a line-oriented `key=value` file with
//! repeated keys for list-valued settings.
//!
//! ```text
//! depth=7
//! depth=8
//! dim=16
//! dim=32
//! mode=fullset
//! repetitions=3
//! seed_base=42
//! out_dir=runs
//! ```
//!
//! `depth` rows build closed binary trees; `edges` rows point at edge-list
//! files to ingest and close. Unknown keys are errors.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::train::{TrainConfig, TrainMode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    /// Closed complete binary tree of this depth.
    Depth(u32),
    /// Edge-list file to ingest and transitively close.
    EdgeList(PathBuf),
}

impl GraphSource {
    /// Short stable label used in artifact names and reports.
    pub fn label(&self) -> String {
        match self {
            GraphSource::Depth(d) => format!("depth{d}"),
            GraphSource::EdgeList(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "edges".into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub sources: Vec<GraphSource>,
    pub dims: Vec<usize>,
    pub modes: Vec<TrainMode>,
    pub repetitions: usize,
    pub seed_base: u64,
    pub out_dir: PathBuf,
    /// Training hyperparameters shared by every cell; `dim`, `mode`, and
    /// `seed` are filled per cell.
    pub train: TrainConfig,
    /// Exact complement evaluation up to this many pairs.
    pub ec_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sources: Vec::new(),
            dims: Vec::new(),
            modes: Vec::new(),
            repetitions: 5,
            seed_base: 0,
            out_dir: PathBuf::from("runs"),
            train: TrainConfig::fullset(0),
            ec_cap: 10_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen_scalar = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = lineno + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            let list_key = matches!(key, "depth" | "edges" | "dim" | "mode");
            if !list_key && !seen_scalar.insert(key.to_string()) {
                return Err(Error::Config(format!(
                    "line {lineno}: duplicate key `{key}`"
                )));
            }
            let bad = |msg: String| Error::Config(format!("line {lineno}: {msg}"));
            match key {
                "depth" => cfg.sources.push(GraphSource::Depth(
                    value
                        .parse()
                        .map_err(|_| bad(format!("bad depth `{value}`")))?,
                )),
                "edges" => cfg.sources.push(GraphSource::EdgeList(PathBuf::from(value))),
                "dim" => cfg.dims.push(
                    value
                        .parse()
                        .map_err(|_| bad(format!("bad dim `{value}`")))?,
                ),
                "mode" => cfg.modes.push(value.parse()?),
                "repetitions" => {
                    cfg.repetitions = value
                        .parse()
                        .map_err(|_| bad(format!("bad repetitions `{value}`")))?
                }
                "seed_base" => {
                    cfg.seed_base = value
                        .parse()
                        .map_err(|_| bad(format!("bad seed_base `{value}`")))?
                }
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "ec_cap" => {
                    cfg.ec_cap = value
                        .parse()
                        .map_err(|_| bad(format!("bad ec_cap `{value}`")))?
                }
                _ => cfg
                    .train
                    .apply_key(key, value)
                    .map_err(|e| Error::Config(format!("line {lineno}: {e}")))?,
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config(
                "at least one data source (`depth=` or `edges=`) is required".into(),
            ));
        }
        if self.dims.is_empty() {
            return Err(Error::Config("at least one `dim=` is required".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one `mode=` is required".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        Ok(())
    }

    /// The per-cell training configuration.
    pub fn cell_train_config(&self, mode: TrainMode, dim: usize, seed: u64) -> TrainConfig {
        let mut t = self.train.clone();
        t.mode = mode;
        t.dim = dim;
        t.seed = seed;
        t
    }
}

/// FNV-1a over raw bytes; stable across platforms and runs, used to stamp
/// artifacts with the configuration that produced them.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# sweep
depth=7
depth=8
dim=16
dim=32
mode=fullset
mode=subset
repetitions=3
seed_base=42
out_dir=out
sweeps=20
regularization=0.02
";

    #[test]
    fn parses_lists_and_scalars() {
        let cfg = ExperimentConfig::parse_str(SAMPLE).unwrap();
        assert_eq!(
            cfg.sources,
            vec![GraphSource::Depth(7), GraphSource::Depth(8)]
        );
        assert_eq!(cfg.dims, vec![16, 32]);
        assert_eq!(cfg.modes, vec![TrainMode::FullSet, TrainMode::SubSet]);
        assert_eq!(cfg.repetitions, 3);
        assert_eq!(cfg.seed_base, 42);
        assert_eq!(cfg.train.sweeps, 20);
        assert_eq!(cfg.train.regularization, 0.02);
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = ExperimentConfig::parse_str("depth=3\ndim=4\nmode=fullset\nwat=1\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn rejects_duplicate_scalars_but_not_lists() {
        assert!(ExperimentConfig::parse_str("depth=3\ndepth=4\ndim=4\nmode=fullset\n").is_ok());
        assert!(matches!(
            ExperimentConfig::parse_str("depth=3\ndim=4\nmode=fullset\nseed_base=1\nseed_base=2\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn requires_a_source_dim_and_mode() {
        assert!(ExperimentConfig::parse_str("dim=4\nmode=fullset\n").is_err());
        assert!(ExperimentConfig::parse_str("depth=3\nmode=fullset\n").is_err());
        assert!(ExperimentConfig::parse_str("depth=3\ndim=4\n").is_err());
    }

    #[test]
    fn cell_config_overrides_mode_dim_seed() {
        let cfg = ExperimentConfig::parse_str(SAMPLE).unwrap();
        let t = cfg.cell_train_config(TrainMode::SubSet, 32, 45);
        assert_eq!(t.mode, TrainMode::SubSet);
        assert_eq!(t.dim, 32);
        assert_eq!(t.seed, 45);
        assert_eq!(t.regularization, 0.02);
    }

    #[test]
    fn fnv_hash_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        let h1 = fnv1a64(SAMPLE.as_bytes());
        let h2 = fnv1a64(SAMPLE.as_bytes());
        assert_eq!(h1, h2);
    }
}
