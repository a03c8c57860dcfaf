use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{BranchSpec, LayerSpec, NetworkConfig, Shape};
use super::tensor::Tensor;
use crate::error::{CheckpointError, Result};

pub const GATES: [&str; 4] = ["i", "f", "o", "g"];
pub const GATE_I: usize = 0;
pub const GATE_F: usize = 1;
pub const GATE_O: usize = 2;
pub const GATE_G: usize = 3;

pub const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];

/// Initial forget-gate bias.
pub const FORGET_BIAS: f64 = 1.0;

/// Every learnable tensor, in a fixed order, addressed by name.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Where each parameter group lives inside [`NetworkParams`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamIndex {
    /// Per branch layer: index of the weight tensor (bias follows it).
    pub frame: Vec<Option<usize>>,
    pub skeleton: Vec<Option<usize>>,
    pub proj: usize,
    /// `lstm[layer][direction]`: index of `w_i`; order is w_i, w_f, w_o, w_g, b_i, b_f, b_o, b_g.
    pub lstm: Vec<Vec<usize>>,
    pub head: usize,
}

/// Name and shape of every tensor `config` needs, plus fan-in/fan-out for init.
pub fn param_specs(config: &NetworkConfig) -> Result<(Vec<(String, Vec<usize>, (usize, usize))>, ParamIndex)> {
    let dims = config.validate()?;
    let mut specs = Vec::new();

    let branch = |prefix: &str, spec: &BranchSpec, specs: &mut Vec<_>| -> Result<Vec<Option<usize>>> {
        let shapes = spec.shapes(prefix)?;
        let mut idx = Vec::new();
        for (i, layer) in spec.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Conv {
                    kernel: (kh, kw),
                    out_channels,
                    ..
                } => {
                    let c = match shapes[i] {
                        Shape::Spatial(s) => s.channels,
                        Shape::Flat(_) => unreachable!("validated"),
                    };
                    idx.push(Some(specs.len()));
                    specs.push((
                        format!("{prefix}.{i}.weight"),
                        vec![out_channels, c, kh, kw],
                        (c * kh * kw, out_channels * kh * kw),
                    ));
                    specs.push((format!("{prefix}.{i}.bias"), vec![out_channels], (0, 0)));
                }
                LayerSpec::Fc { out_dim } => {
                    let n = shapes[i].len();
                    idx.push(Some(specs.len()));
                    specs.push((format!("{prefix}.{i}.weight"), vec![out_dim, n], (n, out_dim)));
                    specs.push((format!("{prefix}.{i}.bias"), vec![out_dim], (0, 0)));
                }
                _ => idx.push(None),
            }
        }
        Ok(idx)
    };

    let frame = if config.fusion.cnn_embedding {
        branch("frame", &config.frame_cnn, &mut specs)?
    } else {
        vec![None; config.frame_cnn.layers.len()]
    };
    let skeleton = match (&config.skeleton_cnn, config.fusion.skeleton_embedding) {
        (Some(b), true) => branch("skeleton", b, &mut specs)?,
        _ => Vec::new(),
    };

    let h = dims.hidden;
    let proj = specs.len();
    specs.push(("proj.weight".into(), vec![h, dims.fused], (dims.fused, h)));
    specs.push(("proj.bias".into(), vec![h], (0, 0)));

    let mut lstm = Vec::new();
    for layer in 0..config.lstm.num_layers {
        let mut dirs = Vec::new();
        for dir in &DIRECTIONS[..config.lstm.directions()] {
            dirs.push(specs.len());
            for g in GATES {
                specs.push((format!("lstm.{layer}.{dir}.w_{g}"), vec![h, h], (h, h)));
            }
            for g in GATES {
                specs.push((format!("lstm.{layer}.{dir}.b_{g}"), vec![h], (0, 0)));
            }
        }
        lstm.push(dirs);
    }

    let head = specs.len();
    specs.push((
        "head.weight".into(),
        vec![dims.classes, dims.penultimate],
        (dims.penultimate, dims.classes),
    ));
    specs.push(("head.bias".into(), vec![dims.classes], (0, 0)));

    Ok((
        specs,
        ParamIndex {
            frame,
            skeleton,
            proj,
            lstm,
            head,
        },
    ))
}

impl NetworkParams {
    pub fn from_named(named: Vec<(String, Tensor)>) -> Self {
        let (names, tensors) = named.into_iter().unzip();
        NetworkParams { names, tensors }
    }

    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        let (specs, _) = param_specs(config)?;
        Ok(NetworkParams {
            names: specs.iter().map(|s| s.0.clone()).collect(),
            tensors: specs.iter().map(|s| Tensor::zeros(&s.1)).collect(),
        })
    }

    /// Glorot-uniform weights, zero biases except the forget gate; rounded to
    /// `f32` so checkpoints reproduce them exactly.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        let (specs, _) = param_specs(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (name, shape, (fan_in, fan_out)) in specs {
            let mut t = Tensor::zeros(&shape);
            if fan_in + fan_out > 0 {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in t.data_mut() {
                    *v = rng.gen_range(-a..a);
                }
            } else if name.ends_with(".b_f") {
                t.data_mut().fill(FORGET_BIAS);
            }
            t.quantize();
            names.push(name);
            tensors.push(t);
        }
        Ok(NetworkParams { names, tensors })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&mut self.tensors[i])
    }

    #[inline]
    pub(crate) fn at(&self, i: usize) -> &[f64] {
        self.tensors[i].data()
    }

    #[inline]
    pub(crate) fn at_mut(&mut self, i: usize) -> &mut [f64] {
        self.tensors[i].data_mut()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Checks names and shapes against `config`, reporting the first mismatch.
    pub fn validate(&self, config: &NetworkConfig) -> Result<()> {
        let (specs, _) = param_specs(config)?;
        for (name, shape, _) in &specs {
            let found = self
                .get(name)
                .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
            if found.shape() != shape.as_slice() {
                return Err(CheckpointError::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: found.shape().to_vec(),
                }
                .into());
            }
        }
        if self.len() != specs.len() {
            let extra = self
                .names
                .iter()
                .find(|n| !specs.iter().any(|s| &s.0 == *n))
                .cloned()
                .unwrap_or_default();
            return Err(CheckpointError::Malformed(format!("unexpected tensor {extra}")).into());
        }
        if !self.is_finite() {
            return Err(CheckpointError::Malformed("non-finite parameter".into()).into());
        }
        Ok(())
    }

    /// Reorders to the canonical order for `config` (after loading from disk).
    pub fn canonicalize(self, config: &NetworkConfig) -> Result<Self> {
        self.validate(config)?;
        let (specs, _) = param_specs(config)?;
        let mut named: Vec<Option<(String, Tensor)>> =
            self.names.into_iter().zip(self.tensors).map(Some).collect();
        let mut out = Vec::with_capacity(specs.len());
        for (name, _, _) in specs {
            let pos = named
                .iter()
                .position(|e| e.as_ref().is_some_and(|(n, _)| *n == name))
                .expect("validated");
            out.push(named[pos].take().unwrap());
        }
        Ok(NetworkParams::from_named(out))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &NetworkParams, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
    }

    pub fn quantize(&mut self) {
        for t in &mut self.tensors {
            t.quantize();
        }
    }
}
