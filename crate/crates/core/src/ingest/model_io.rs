//! Model file layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes   OPTBGBDT | OPTBFFNN
//! version    u32
//! manifest   u32 length + JSON
//! payload    model-specific, must end exactly at end of file
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::IngestError;
use crate::gbdt::{GbdtConfig, GbdtError, Node, Tree, TreeEnsemble};
use crate::mlp::{Activation, Architecture, Dense, MlpError, MlpTrainConfig, Network, NetworkModel, Standardizer};

pub const TREES_MAGIC: &[u8; 8] = b"OPTBGBDT";
pub const NETWORK_MAGIC: &[u8; 8] = b"OPTBFFNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Trees(TreeEnsemble),
    Network(NetworkModel),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Trees(#[from] GbdtError),
    #[error(transparent)]
    Network(#[from] MlpError),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Trees(m) => m.n_features,
            Model::Network(m) => m.n_features(),
        }
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
        Ok(match self {
            Model::Trees(m) => m.predict_batch(x)?,
            Model::Network(m) => m.predict_batch(x)?,
        })
    }

    fn magic(&self) -> &'static [u8; 8] {
        match self {
            Model::Trees(_) => TREES_MAGIC,
            Model::Network(_) => NETWORK_MAGIC,
        }
    }
}

/// Hyperparameters and provenance stored ahead of the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelManifest {
    Gbdt {
        n_features: usize,
        n_trees: usize,
        best_round: Option<usize>,
        config: GbdtConfig,
        dataset_digest: Option<String>,
    },
    Mlp {
        n_features: usize,
        layers: Vec<usize>,
        architecture: Architecture,
        best_epoch: Option<usize>,
        config: MlpTrainConfig,
        dataset_digest: Option<String>,
    },
}

impl ModelManifest {
    pub fn for_model(model: &Model, dataset_digest: Option<&str>) -> Self {
        let dataset_digest = dataset_digest.map(str::to_string);
        match model {
            Model::Trees(m) => ModelManifest::Gbdt {
                n_features: m.n_features,
                n_trees: m.trees.len(),
                best_round: m.best_round(),
                config: m.config,
                dataset_digest,
            },
            Model::Network(m) => {
                let architecture = m.network.architecture();
                ModelManifest::Mlp {
                    n_features: m.n_features(),
                    layers: architecture.units(),
                    architecture,
                    best_epoch: m.best_epoch,
                    config: m.config,
                    dataset_digest,
                }
            }
        }
    }

    pub fn dataset_digest(&self) -> Option<&str> {
        match self {
            ModelManifest::Gbdt { dataset_digest, .. } | ModelManifest::Mlp { dataset_digest, .. } => {
                dataset_digest.as_deref()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub model: Model,
    pub manifest: ModelManifest,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        vs.into_iter().for_each(|&v| self.f64(v));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {} (needed {n} more)", self.pos)),
        }
    }
    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<usize, String> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| format!("count {v} out of range"))
    }
    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_bits(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"))))
    }
    /// Reads a count of items that each occupy at least `min_size` bytes,
    /// rejecting counts the remaining input cannot hold.
    fn count(&mut self, min_size: usize) -> Result<usize, String> {
        let n = self.u64()?;
        let remaining = self.bytes.len() - self.pos;
        if n.checked_mul(min_size).is_none_or(|need| need > remaining) {
            return Err(format!("declared count {n} exceeds remaining {remaining} bytes"));
        }
        Ok(n)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, String> {
        let raw = self.take(n.checked_mul(8).ok_or("count overflow")?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }
    fn finish(&self) -> Result<(), String> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            extra => Err(format!("{extra} trailing bytes after payload")),
        }
    }
}

fn encode_trees(w: &mut Writer, m: &TreeEnsemble) {
    w.u64(m.n_features);
    w.f64(m.base_score);
    w.u64(m.trees.len());
    for (tree, &eta) in m.trees.iter().zip(&m.etas) {
        w.f64(eta);
        w.u64(tree.nodes.len());
        for node in &tree.nodes {
            match *node {
                Node::Leaf { value } => {
                    w.u8(0);
                    w.f64(value);
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    w.u8(1);
                    w.u64(feature);
                    w.f64(threshold);
                    w.u64(left);
                    w.u64(right);
                }
            }
        }
    }
}

fn decode_trees(r: &mut Reader, config: GbdtConfig) -> Result<TreeEnsemble, String> {
    let n_features = r.u64()?;
    let base_score = r.f64()?;
    let n_trees = r.count(16)?;
    let mut model = TreeEnsemble::empty(n_features, base_score, config);
    for t in 0..n_trees {
        let eta = r.f64()?;
        let n_nodes = r.count(9)?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            nodes.push(match r.u8()? {
                0 => Node::Leaf { value: r.f64()? },
                1 => Node::Split {
                    feature: r.u64()?,
                    threshold: r.f64()?,
                    left: r.u64()?,
                    right: r.u64()?,
                },
                tag => return Err(format!("tree {t}: unknown node tag {tag}")),
            });
        }
        let tree = Tree { nodes };
        tree.validate(n_features).map_err(|e| format!("tree {t}: {e}"))?;
        model.trees.push(tree);
        model.etas.push(eta);
    }
    Ok(model)
}

fn encode_network(w: &mut Writer, m: &NetworkModel) {
    w.u64(m.network.layers.len());
    for layer in &m.network.layers {
        w.u8(match layer.activation {
            Activation::Relu => 0,
            Activation::Linear => 1,
        });
        w.u64(layer.units());
        w.u64(layer.fan_in());
        w.f64s(layer.weights.iter());
        w.f64s(layer.bias.iter());
    }
    w.u64(m.standardizer.n_features());
    w.f64s(&m.standardizer.mean);
    w.f64s(&m.standardizer.std);
}

fn decode_network(
    r: &mut Reader,
    config: MlpTrainConfig,
    best_epoch: Option<usize>,
) -> Result<NetworkModel, String> {
    let n_layers = r.count(17)?;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let activation = match r.u8()? {
            0 => Activation::Relu,
            1 => Activation::Linear,
            tag => return Err(format!("layer {l}: unknown activation tag {tag}")),
        };
        let units = r.u64()?;
        let fan_in = r.u64()?;
        let n_weights = units.checked_mul(fan_in).ok_or("layer size overflow")?;
        let weights = Array2::from_shape_vec((units, fan_in), r.f64s(n_weights)?)
            .map_err(|e| format!("layer {l}: {e}"))?;
        let bias = Array1::from(r.f64s(units)?);
        layers.push(Dense {
            weights,
            bias,
            activation,
        });
    }
    if layers.is_empty() {
        return Err("network has no layers".into());
    }
    for (l, pair) in layers.windows(2).enumerate() {
        if pair[1].fan_in() != pair[0].units() {
            return Err(format!("layer {} fan-in does not match layer {l} width", l + 1));
        }
    }
    let network = Network { layers };
    network.architecture().validate().map_err(|e| e.to_string())?;
    let n_std = r.count(16)?;
    if n_std != network.input_dim() {
        return Err(format!(
            "standardizer covers {n_std} features, network takes {}",
            network.input_dim()
        ));
    }
    let standardizer = Standardizer {
        mean: r.f64s(n_std)?,
        std: r.f64s(n_std)?,
    };
    if standardizer.std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err("standardizer deviations must be positive".into());
    }
    Ok(NetworkModel {
        network,
        standardizer,
        history: Vec::new(),
        best_epoch,
        config,
    })
}

/// Serializes a model. Training histories are not stored.
pub fn encode_model(model: &Model, dataset_digest: Option<&str>) -> Vec<u8> {
    let manifest = ModelManifest::for_model(model, dataset_digest);
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(model.magic());
    w.u32(FORMAT_VERSION);
    w.u32(json.len() as u32);
    w.0.extend_from_slice(&json);
    match model {
        Model::Trees(m) => encode_trees(&mut w, m),
        Model::Network(m) => encode_network(&mut w, m),
    }
    w.0
}

/// Parses a model file image, returning a reason string on any mismatch.
pub fn decode_model(bytes: &[u8]) -> Result<LoadedModel, String> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(8)?;
    if magic != TREES_MAGIC && magic != NETWORK_MAGIC {
        return Err("unrecognized magic tag".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("format version {version}, expected {FORMAT_VERSION}"));
    }
    let json_len = r.u32()? as usize;
    let manifest: ModelManifest =
        serde_json::from_slice(r.take(json_len)?).map_err(|e| format!("manifest: {e}"))?;
    let model = match (&manifest, magic == TREES_MAGIC) {
        (
            ModelManifest::Gbdt {
                n_features,
                n_trees,
                config,
                ..
            },
            true,
        ) => {
            let m = decode_trees(&mut r, *config)?;
            if m.n_features != *n_features || m.trees.len() != *n_trees {
                return Err("payload disagrees with manifest".into());
            }
            Model::Trees(m)
        }
        (
            ModelManifest::Mlp {
                architecture,
                best_epoch,
                config,
                ..
            },
            false,
        ) => {
            let m = decode_network(&mut r, *config, *best_epoch)?;
            if m.network.architecture() != *architecture {
                return Err("payload disagrees with manifest".into());
            }
            Model::Network(m)
        }
        _ => return Err("manifest kind does not match magic tag".into()),
    };
    r.finish()?;
    Ok(LoadedModel { model, manifest })
}

pub fn save_model(model: &Model, dataset_digest: Option<&str>, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    fs::write(path, encode_model(model, dataset_digest)).map_err(|e| IngestError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel, IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    decode_model(&bytes).map_err(|reason| IngestError::IncompatibleModel {
        path: path.into(),
        reason,
    })
}

fn expect_magic(path: &Path, bytes: &[u8], magic: &[u8; 8], what: &str) -> Result<(), IngestError> {
    if bytes.get(..8) != Some(&magic[..]) {
        return Err(IngestError::IncompatibleModel {
            path: path.into(),
            reason: format!("not a {what} file"),
        });
    }
    Ok(())
}

pub fn load_trees(path: impl AsRef<Path>) -> Result<(TreeEnsemble, ModelManifest), IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    expect_magic(path, &bytes, TREES_MAGIC, "tree ensemble")?;
    match load_model(path)? {
        LoadedModel {
            model: Model::Trees(m),
            manifest,
        } => Ok((m, manifest)),
        _ => unreachable!("magic checked"),
    }
}

pub fn load_network(path: impl AsRef<Path>) -> Result<(NetworkModel, ModelManifest), IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    expect_magic(path, &bytes, NETWORK_MAGIC, "network")?;
    match load_model(path)? {
        LoadedModel {
            model: Model::Network(m),
            manifest,
        } => Ok((m, manifest)),
        _ => unreachable!("magic checked"),
    }
}
