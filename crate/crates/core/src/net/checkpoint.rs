//! JSON checkpoints: named tensors as nested arrays, normalizer statistics,
//! hyperparameters and model lineage.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::cell::LstmParams;
use crate::net::network::{HeadParams, Network};
use crate::signal::NormalizerStats;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub keep_prob: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub layers: usize,
    pub batch_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub network: Network,
    pub normalizer: NormalizerStats,
    pub hyper: Hyper,
    pub lineage: Vec<String>,
}

impl ModelCheckpoint {
    pub fn label(&self) -> &str {
        self.lineage.last().map(String::as_str).unwrap_or("")
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.normalizer.validate()?;
        if !(self.hyper.keep_prob > 0.0 && self.hyper.keep_prob <= 1.0) {
            return Err(Error::Config(format!(
                "keep_prob must lie in (0, 1], got {}",
                self.hyper.keep_prob
            )));
        }
        if self.lineage.is_empty() {
            return Err(Error::Config("checkpoint lineage is empty".into()));
        }
        if self.network.input_dim() != crate::signal::INPUT_DIM {
            return Err(Error::Config(format!(
                "network takes {} inputs, the pouring features have {}",
                self.network.input_dim(),
                crate::signal::INPUT_DIM
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile::from(self);
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptCheckpoint("missing format_version".into()))?;
        if found != FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found as u32,
                expected: FORMAT_VERSION,
            });
        }
        let file: CheckpointFile =
            serde_json::from_value(value).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let ckpt = file.into_checkpoint()?;
        ckpt.validate()
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    hyper: Hyper,
    normalizer: NormalizerFile,
    layers: Vec<LayerFile>,
    head: HeadFile,
    lineage: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NormalizerFile {
    input_features: Vec<String>,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    output_mean: f64,
    output_std: f64,
    /// The ω target is z-scored in training as well as the inputs.
    output_normalized: bool,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    hidden: usize,
    input: usize,
    w_i: Vec<Vec<f64>>,
    w_f: Vec<Vec<f64>>,
    w_g: Vec<Vec<f64>>,
    w_o: Vec<Vec<f64>>,
    b_i: Vec<f64>,
    b_f: Vec<f64>,
    b_g: Vec<f64>,
    b_o: Vec<f64>,
    p_i: Vec<f64>,
    p_f: Vec<f64>,
    p_o: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    w_y: Vec<Vec<f64>>,
    b_y: f64,
}

fn to_rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(cols).map(<[f64]>::to_vec).collect()
}

fn from_rows(name: &str, rows: Vec<Vec<f64>>, cols: usize) -> Result<Vec<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::CorruptCheckpoint(format!("{name}: ragged rows")));
    }
    Ok(rows.into_iter().flatten().collect())
}

impl From<&ModelCheckpoint> for CheckpointFile {
    fn from(c: &ModelCheckpoint) -> Self {
        let layers = c
            .network
            .layers
            .iter()
            .map(|l| {
                let cols = l.cols();
                LayerFile {
                    hidden: l.hidden,
                    input: l.input,
                    w_i: to_rows(&l.w_i, cols),
                    w_f: to_rows(&l.w_f, cols),
                    w_g: to_rows(&l.w_g, cols),
                    w_o: to_rows(&l.w_o, cols),
                    b_i: l.b_i.clone(),
                    b_f: l.b_f.clone(),
                    b_g: l.b_g.clone(),
                    b_o: l.b_o.clone(),
                    p_i: l.p_i.clone(),
                    p_f: l.p_f.clone(),
                    p_o: l.p_o.clone(),
                }
            })
            .collect();
        let n = &c.normalizer;
        Self {
            format_version: FORMAT_VERSION,
            hyper: c.hyper.clone(),
            normalizer: NormalizerFile {
                input_features: ["theta_deg", "f_lbf", "f_total_lbf", "f_2pour_lbf", "H_mm", "kappa_per_mm"]
                    .map(String::from)
                    .to_vec(),
                input_mean: n.input_mean.to_vec(),
                input_std: n.input_std.to_vec(),
                output_mean: n.output_mean,
                output_std: n.output_std,
                output_normalized: true,
            },
            layers,
            head: HeadFile {
                w_y: vec![c.network.head.w_y.clone()],
                b_y: c.network.head.b_y,
            },
            lineage: c.lineage.clone(),
        }
    }
}

impl CheckpointFile {
    fn into_checkpoint(self) -> Result<ModelCheckpoint> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.into_iter().enumerate() {
            let cols = l.hidden + l.input;
            let p = LstmParams {
                hidden: l.hidden,
                input: l.input,
                w_i: from_rows(&format!("lstm{k}.w_i"), l.w_i, cols)?,
                w_f: from_rows(&format!("lstm{k}.w_f"), l.w_f, cols)?,
                w_g: from_rows(&format!("lstm{k}.w_g"), l.w_g, cols)?,
                w_o: from_rows(&format!("lstm{k}.w_o"), l.w_o, cols)?,
                b_i: l.b_i,
                b_f: l.b_f,
                b_g: l.b_g,
                b_o: l.b_o,
                p_i: l.p_i,
                p_f: l.p_f,
                p_o: l.p_o,
            };
            layers.push(p);
        }
        if layers.is_empty() {
            return Err(Error::CorruptCheckpoint("no LSTM layers".into()));
        }
        let [w_y]: [Vec<f64>; 1] = self
            .head
            .w_y
            .try_into()
            .map_err(|_| Error::CorruptCheckpoint("head.w_y must be a 1×n matrix".into()))?;
        let n = self.normalizer;
        let six = |name: &str, v: Vec<f64>| -> Result<[f64; 6]> {
            v.try_into()
                .map_err(|_| Error::CorruptCheckpoint(format!("normalizer {name} must have 6 entries")))
        };
        Ok(ModelCheckpoint {
            network: Network {
                layers,
                head: HeadParams {
                    w_y,
                    b_y: self.head.b_y,
                },
            },
            normalizer: NormalizerStats {
                input_mean: six("input_mean", n.input_mean)?,
                input_std: six("input_std", n.input_std)?,
                output_mean: n.output_mean,
                output_std: n.output_std,
            },
            hyper: self.hyper,
            lineage: self.lineage,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn sample_checkpoint(seed: u64) -> ModelCheckpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut network = Network::init(6, 16, 1, &mut rng);
        network.layers[0].p_o.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        network.head.b_y = std::f64::consts::PI * 1e-17;
        ModelCheckpoint {
            network,
            normalizer: NormalizerStats {
                input_mean: [20.0, 0.2, 0.6, 0.3, 115.0, 0.03],
                input_std: [15.0, 0.1, 0.2, 0.1, 17.0, 1e-6],
                output_mean: 1.2345678901234567,
                output_std: 19.0,
            },
            hyper: Hyper {
                keep_prob: 0.5,
                lr: 0.001,
                epochs: 300,
                seed,
                hidden: 16,
                layers: 1,
                batch_size: 16,
            },
            lineage: vec!["M0".into()],
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let ckpt = sample_checkpoint(3);
        ckpt.save(&a).unwrap();
        let loaded = ModelCheckpoint::load(&a).unwrap();
        assert_eq!(loaded, ckpt);
        loaded.save(&b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let text = sample_checkpoint(4).to_json().unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(ModelCheckpoint::from_json(cut), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn unknown_version_refused() {
        let text = sample_checkpoint(5)
            .to_json()
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(
            ModelCheckpoint::from_json(&text),
            Err(Error::VersionMismatch { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn invalid_keep_prob_refused() {
        let mut c = sample_checkpoint(6);
        c.hyper.keep_prob = 0.0;
        let text = c.to_json().unwrap();
        assert!(ModelCheckpoint::from_json(&text).is_err());
    }

    #[test]
    fn tensors_are_nested_arrays() {
        let v: serde_json::Value = serde_json::from_str(&sample_checkpoint(7).to_json().unwrap()).unwrap();
        let w_i = &v["layers"][0]["w_i"];
        assert_eq!(w_i.as_array().unwrap().len(), 16);
        assert_eq!(w_i[0].as_array().unwrap().len(), 22);
        assert_eq!(v["head"]["w_y"][0].as_array().unwrap().len(), 16);
        assert_eq!(v["normalizer"]["output_normalized"], true);
    }
}
