//! Files a run directory holds, and the manifest that checksums them.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use specinfer::campaign::{RunConfig, StageSeeds};
use specinfer::observations::{load_points_csv, read_matrix_csv, write_matrix_csv, NoiseModel, ObservationSet, SeriesKind};

pub const MANIFEST: &str = "manifest.json";

/// Noise description as stored next to an observation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseFile {
    IidGaussian { sigma: f64 },
    Covariance { covariance_file: String, variance_floor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMeta {
    pub series: SeriesKind,
    pub n_obs: usize,
    pub noise: NoiseFile,
}

pub fn create(path: &Path) -> specinfer::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> specinfer::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> specinfer::Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| specinfer::Error::Parse(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `<name>.csv`, `<name>.json` and, for dense noise, `<name>_covariance.csv`.
pub fn save_observations(dir: &Path, name: &str, obs: &ObservationSet) -> specinfer::Result<()> {
    obs.save_csv(&dir.join(format!("{name}.csv")))?;
    let noise = match &obs.noise {
        NoiseModel::IidGaussian { sigma } => NoiseFile::IidGaussian { sigma: *sigma },
        NoiseModel::Covariance { matrix, variance_floor } => {
            let file = format!("{name}_covariance.csv");
            let mut w = create(&dir.join(&file))?;
            write_matrix_csv(&mut w, matrix, obs.len())?;
            w.flush()?;
            NoiseFile::Covariance {
                covariance_file: file,
                variance_floor: *variance_floor,
            }
        }
    };
    write_json(
        &dir.join(format!("{name}.json")),
        &ObservationMeta {
            series: obs.kind,
            n_obs: obs.len(),
            noise,
        },
    )
}

pub fn load_observations(dir: &Path, name: &str) -> specinfer::Result<ObservationSet> {
    let meta: ObservationMeta = read_json(&dir.join(format!("{name}.json")))?;
    let (points, values) = load_points_csv(&dir.join(format!("{name}.csv")))?;
    let noise = match meta.noise {
        NoiseFile::IidGaussian { sigma } => NoiseModel::IidGaussian { sigma },
        NoiseFile::Covariance {
            covariance_file,
            variance_floor,
        } => {
            let (matrix, n) = read_matrix_csv(fs::File::open(dir.join(covariance_file))?)?;
            if n != points.len() {
                return Err(specinfer::Error::DimensionMismatch {
                    context: "covariance file",
                    expected: points.len(),
                    got: n,
                });
            }
            NoiseModel::Covariance { matrix, variance_floor }
        }
    };
    ObservationSet::new(points, values, noise, meta.series)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub seeds: StageSeeds,
    /// Stages completed in this directory, in order.
    pub stages: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            tool: "specinfer".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            seeds: config.seeds(),
            stages: Vec::new(),
            failed_stage: None,
            error: None,
            artifacts: Vec::new(),
        }
    }

    /// Existing manifest in `dir`, or a fresh one for `config`.
    pub fn load_or_new(dir: &Path, config: &RunConfig) -> Self {
        match read_json::<Manifest>(&dir.join(MANIFEST)) {
            Ok(mut m) => {
                m.config = config.clone();
                m.seeds = config.seeds();
                m
            }
            Err(_) => Self::new(config),
        }
    }

    pub fn record_stage(&mut self, stage: &str) {
        self.stages.retain(|s| s != stage);
        self.stages.push(stage.into());
        self.failed_stage = None;
        self.error = None;
    }

    /// Re-checksums every file in `dir` except the manifest itself.
    pub fn refresh(&mut self, dir: &Path) -> std::io::Result<()> {
        let mut files = Vec::new();
        collect(dir, dir, &mut files)?;
        files.sort();
        self.artifacts = files
            .into_iter()
            .filter(|p| p != MANIFEST)
            .map(|p| {
                let data = fs::read(dir.join(&p))?;
                Ok(ArtifactEntry {
                    sha256: hex::encode(Sha256::digest(&data)),
                    bytes: data.len() as u64,
                    path: p,
                })
            })
            .collect::<std::io::Result<_>>()?;
        Ok(())
    }

    pub fn save(&mut self, dir: &Path) -> specinfer::Result<()> {
        self.refresh(dir)?;
        write_json(&dir.join(MANIFEST), self)
    }

    /// Single digest over all artifact checksums.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.artifacts {
            h.update(a.path.as_bytes());
            h.update(a.sha256.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path: PathBuf = entry?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}
