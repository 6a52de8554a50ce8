use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::oracle::OracleOptions;
use crate::pipeline::PipelineConfig;
use crate::ranking::RankingParams;

/// Query generator for one hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorMode {
    Oracle,
    Question,
    /// Precomputed queries from a JSON-lines file.
    External(PathBuf),
}

impl FromStr for GeneratorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "oracle" => Ok(Self::Oracle),
            "question" => Ok(Self::Question),
            other => match other.strip_prefix("external:") {
                Some(p) if !p.is_empty() => Ok(Self::External(PathBuf::from(p))),
                _ => Err(Error::Config(format!(
                    "unknown generator {other:?} (expected oracle, question or external:<path>)"
                ))),
            },
        }
    }
}

impl fmt::Display for GeneratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Oracle => f.write_str("oracle"),
            Self::Question => f.write_str("question"),
            Self::External(p) => write!(f, "external:{}", p.display()),
        }
    }
}

impl Serialize for GeneratorMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GeneratorMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dump: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub folding: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WriterConfig {
    pub segment_docs: usize,
    pub batch_docs: usize,
    pub spill_dir: Option<PathBuf>,
}

impl Default for WriterConfig {
    fn default() -> Self {
        let w = crate::index::WriterOptions::default();
        Self {
            segment_docs: w.segment_docs,
            batch_docs: w.batch_docs,
            spill_dir: w.spill_dir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopConfig {
    pub hops: usize,
    pub n: usize,
}

impl Default for HopConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self { hops: p.hops, n: p.n }
    }
}

/// Everything a CLI run needs; loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub pipeline: HopConfig,
    pub ranking: RankingParams,
    pub oracle: OracleOptions,
    pub writer: WriterConfig,
    /// One per hop.
    pub generators: Vec<GeneratorMode>,
    pub limit: Option<usize>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hops = HopConfig::default();
        Self {
            paths: PathsConfig::default(),
            pipeline: hops,
            ranking: RankingParams::default(),
            oracle: OracleOptions::default(),
            writer: WriterConfig::default(),
            generators: vec![GeneratorMode::Oracle; hops.hops],
            limit: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            hops: self.pipeline.hops,
            n: self.pipeline.n,
            ranking: self.ranking,
        }
    }

    /// Range checks plus `generators.len() == hops`.
    pub fn validate(&self) -> Result<()> {
        self.pipeline_config().validate()?;
        if !(self.oracle.min_ratio > 0.0 && self.oracle.min_ratio <= 1.0) {
            return Err(Error::Config("oracle.min_ratio must lie in (0, 1]".into()));
        }
        if self.oracle.target_token_cap == 0 {
            return Err(Error::Config("oracle.target_token_cap must be >= 1".into()));
        }
        if self.generators.len() != self.pipeline.hops {
            return Err(Error::Config(format!(
                "{} generators configured for {} hops",
                self.generators.len(),
                self.pipeline.hops
            )));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_overrides() {
        let c = RunConfig::from_toml_str(
            r#"
            generators = ["question", "external:q.jsonl"]
            limit = 10
            [pipeline]
            n = 3
            [ranking]
            k1 = 0.9
            [oracle]
            min_ratio = 0.7
            "#,
        )
        .unwrap();
        assert_eq!(c.pipeline.n, 3);
        assert_eq!(c.pipeline.hops, 2);
        assert_eq!(c.ranking.k1, 0.9);
        assert_eq!(c.ranking.b, 0.75);
        assert_eq!(c.generators[1], GeneratorMode::External("q.jsonl".into()));
        c.validate().unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
        assert_eq!(c.hash(), RunConfig::from_toml_str(&text).unwrap().hash());
        assert_ne!(c.hash(), RunConfig::default().hash());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("generators = [\"magic\"]").is_err());
        let mut c = RunConfig::default();
        c.generators.pop();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.oracle.min_ratio = 0.0;
        assert!(c.validate().is_err());
    }
}
