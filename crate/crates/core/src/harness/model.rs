use std::path::Path;

use crate::classify::{route, Decision, Gallery, KnnParams, GALLERY_EMBEDDINGS, GALLERY_LABELS};
use crate::error::{CheckpointError, Error, Result};
use crate::net::{forward, read_tensors, write_tensors, NetworkConfig, NetworkParams, SampleFeatures, Tensor};

use super::config::TrainConfig;

const META_CLASSES: &str = "meta.class_names";
const META_JOINTS: &str = "meta.skeleton_joints";

/// A trained network with its gallery and class names.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub network: NetworkConfig,
    pub params: NetworkParams,
    pub gallery: Gallery,
    pub class_names: Vec<String>,
    /// Joint count of the skeleton branch, if the network has one.
    pub skeleton_joints: Option<usize>,
}

impl Model {
    pub fn predict(&self, features: &SampleFeatures, knn: &KnnParams) -> Result<Decision> {
        let (probs, trace) = forward(&self.network, &self.params, features)?;
        route(&probs, trace.penultimate(), &self.gallery, knn)
    }

    /// Network tensors, then the gallery, then class names (as bytes) and
    /// the skeleton joint count.
    pub fn save(&self, path: &Path) -> Result<()> {
        let names = self.class_names.join("\n");
        let extra = [
            (
                META_CLASSES.to_string(),
                Tensor::from_vec(&[names.len()], names.bytes().map(f64::from).collect())?,
            ),
            (
                META_JOINTS.to_string(),
                Tensor::from_vec(&[1], vec![self.skeleton_joints.unwrap_or(0) as f64])?,
            ),
        ];
        let gallery = self.gallery.to_tensors();
        write_tensors(
            path,
            self.params
                .iter()
                .chain(gallery.iter().map(|(n, t)| (n.as_str(), t)))
                .chain(extra.iter().map(|(n, t)| (n.as_str(), t))),
        )
    }

    /// Loads a model; the network layout comes from `config` plus the
    /// class count and joint count stored in the file.
    pub fn load(path: &Path, config: &TrainConfig) -> Result<Model> {
        let mut tensors = read_tensors(path)?;
        let mut take = |name: &str| -> Result<Tensor> {
            let i = tensors
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))?;
            Ok(tensors.remove(i).1)
        };
        let names_t = take(META_CLASSES)?;
        let bytes: Vec<u8> = names_t.data().iter().map(|&v| v as u8).collect();
        let names = String::from_utf8(bytes)
            .map_err(|_| CheckpointError::Malformed("class names are not UTF-8".into()))?;
        let class_names: Vec<String> = names.split('\n').map(str::to_string).collect();
        let joints = take(META_JOINTS)?.data().first().copied().unwrap_or(0.0) as usize;
        let skeleton_joints = (joints > 0).then_some(joints);
        let gallery = Gallery::from_tensors(&take(GALLERY_EMBEDDINGS)?, &take(GALLERY_LABELS)?)?;
        let network = config.network(class_names.len(), skeleton_joints)?;
        let params = NetworkParams::from_named(tensors).canonicalize(&network)?;
        let dims = network.validate()?;
        if gallery.dim() != dims.penultimate {
            return Err(Error::from(CheckpointError::ShapeMismatch {
                name: GALLERY_EMBEDDINGS.into(),
                expected: vec![gallery.len(), dims.penultimate],
                found: vec![gallery.len(), gallery.dim()],
            }));
        }
        Ok(Model {
            network,
            params,
            gallery,
            class_names,
            skeleton_joints,
        })
    }
}
