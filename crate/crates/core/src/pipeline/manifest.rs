use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "voxframe-manifest/1";

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Topopt,
    Threshold,
    Skeleton,
    Graph,
    Frame,
    Csg,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Topopt, Stage::Threshold, Stage::Skeleton, Stage::Graph, Stage::Frame, Stage::Csg];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Topopt => "topopt",
            Stage::Threshold => "threshold",
            Stage::Skeleton => "skeleton",
            Stage::Graph => "graph",
            Stage::Frame => "frame",
            Stage::Csg => "csg",
        }
    }

    /// Stage whose primary artifact this one reads.
    pub fn upstream(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|&s| s == self).unwrap();
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Content hash of one file in the run directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHash {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl ArtifactHash {
    pub fn of(dir: &Path, name: &str) -> Result<Self> {
        let data = std::fs::read(dir.join(name))?;
        Ok(Self { path: name.to_string(), sha256: sha256_hex(&data), bytes: data.len() as u64 })
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub inputs: Vec<ArtifactHash>,
    pub outputs: Vec<ArtifactHash>,
    pub wall_time_s: f64,
    /// Scalar results and timings; timings live only here so that the
    /// artifacts themselves are reproducible byte for byte.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub name: String,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn new(name: &str) -> Self {
        Self { format: MANIFEST_FORMAT.into(), name: name.into(), stages: Vec::new() }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::format("run manifest", format!("unsupported format tag {:?}", m.format)));
        }
        Ok(m)
    }

    pub fn load_or_new(dir: &Path, name: &str) -> Result<Self> {
        if dir.join(MANIFEST_FILE).exists() {
            Self::load(dir)
        } else {
            Ok(Self::new(name))
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn get(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    /// Replaces the record of the same stage, keeping stage order.
    pub fn upsert(&mut self, record: StageRecord) {
        self.stages.retain(|r| r.stage != record.stage);
        self.stages.push(record);
        self.stages.sort_by_key(|r| r.stage);
    }

    pub fn total_wall_time(&self) -> f64 {
        self.stages.iter().map(|r| r.wall_time_s).sum()
    }

    /// Files whose current content differs from the recorded hash, as
    /// `(stage, path)` pairs.
    pub fn verify(&self, dir: &Path) -> Vec<(Stage, String)> {
        let mut bad = Vec::new();
        for r in &self.stages {
            for a in r.inputs.iter().chain(&r.outputs) {
                let ok = ArtifactHash::of(dir, &a.path).map(|h| h.sha256 == a.sha256).unwrap_or(false);
                if !ok && !bad.iter().any(|(s, p)| *s == r.stage && *p == a.path) {
                    bad.push((r.stage, a.path.clone()));
                }
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!(matches!("mesh".parse::<Stage>(), Err(Error::Config(_))));
        assert_eq!(Stage::Topopt.upstream(), None);
        assert_eq!(Stage::Csg.upstream(), Some(Stage::Frame));
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn upsert_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "one").unwrap();
        let mut m = Manifest::new("t");
        let rec = |stage, t| StageRecord {
            stage,
            inputs: vec![],
            outputs: vec![ArtifactHash::of(dir.path(), "a.txt").unwrap()],
            wall_time_s: t,
            metrics: BTreeMap::new(),
        };
        m.upsert(rec(Stage::Graph, 1.0));
        m.upsert(rec(Stage::Topopt, 2.0));
        m.upsert(rec(Stage::Graph, 0.5));
        assert_eq!(m.stages.iter().map(|r| r.stage).collect::<Vec<_>>(), vec![Stage::Topopt, Stage::Graph]);
        assert_eq!(m.total_wall_time(), 2.5);
        assert!(m.verify(dir.path()).is_empty());
        m.save(dir.path()).unwrap();
        assert_eq!(Manifest::load(dir.path()).unwrap(), m);
        std::fs::write(dir.path().join("a.txt"), "two").unwrap();
        assert_eq!(m.verify(dir.path()).len(), 2);
    }
}
