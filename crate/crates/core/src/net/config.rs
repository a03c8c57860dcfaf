use crate::error::{Error, Result};

/// Channels x height x width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape3 {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape3 {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Activation shape between layers: spatial until the first fully connected layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Spatial(Shape3),
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match self {
            Shape::Spatial(s) => s.len(),
            Shape::Flat(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
        out_channels: usize,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
    },
    Relu,
    Fc {
        out_dim: usize,
    },
}

impl LayerSpec {
    pub fn conv(kernel: usize, stride: usize, padding: usize, out_channels: usize) -> Self {
        LayerSpec::Conv {
            kernel: (kernel, kernel),
            stride,
            padding,
            out_channels,
        }
    }

    pub fn pool(kernel: usize, stride: usize) -> Self {
        LayerSpec::MaxPool { kernel, stride }
    }

    pub fn fc(out_dim: usize) -> Self {
        LayerSpec::Fc { out_dim }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Relu => "relu",
            LayerSpec::Fc { .. } => "fc",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Fc { .. })
    }

    /// Output shape for `input`, or why the layer cannot accept it.
    pub fn output_shape(&self, input: Shape) -> std::result::Result<Shape, String> {
        match (*self, input) {
            (
                LayerSpec::Conv {
                    kernel: (kh, kw),
                    stride,
                    padding,
                    out_channels,
                },
                Shape::Spatial(s),
            ) => {
                if kh == 0 || kw == 0 || stride == 0 || out_channels == 0 {
                    return Err("kernel, stride and channels must be positive".into());
                }
                let (ph, pw) = (s.height + 2 * padding, s.width + 2 * padding);
                if ph < kh || pw < kw {
                    return Err(format!(
                        "{kh}x{kw} kernel larger than padded {ph}x{pw} input"
                    ));
                }
                Ok(Shape::Spatial(Shape3::new(
                    out_channels,
                    (ph - kh) / stride + 1,
                    (pw - kw) / stride + 1,
                )))
            }
            (LayerSpec::MaxPool { kernel, stride }, Shape::Spatial(s)) => {
                if kernel == 0 || stride == 0 {
                    return Err("pool kernel and stride must be positive".into());
                }
                if s.height < kernel || s.width < kernel {
                    return Err(format!(
                        "{kernel}x{kernel} pool larger than {}x{} input",
                        s.height, s.width
                    ));
                }
                Ok(Shape::Spatial(Shape3::new(
                    s.channels,
                    (s.height - kernel) / stride + 1,
                    (s.width - kernel) / stride + 1,
                )))
            }
            (LayerSpec::Relu, shape) => Ok(shape),
            (LayerSpec::Fc { out_dim }, shape) => {
                if out_dim == 0 {
                    return Err("fc output must be positive".into());
                }
                if shape.is_empty() {
                    return Err("fc input is empty".into());
                }
                Ok(Shape::Flat(out_dim))
            }
            (layer, Shape::Flat(_)) => Err(format!(
                "{} needs a spatial input but follows a fully connected layer",
                layer.kind()
            )),
        }
    }
}

/// A convolutional feature extractor: input shape plus layer stack.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchSpec {
    pub input: Shape3,
    pub layers: Vec<LayerSpec>,
}

impl BranchSpec {
    /// Shape after every layer, `shapes[0]` being the input.
    pub fn shapes(&self, name: &str) -> Result<Vec<Shape>> {
        if self.input.is_empty() {
            return Err(Error::structure(format!("{name}.input"), "empty input shape"));
        }
        let mut shapes = vec![Shape::Spatial(self.input)];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(*shapes.last().unwrap())
                .map_err(|reason| Error::structure(format!("{name}.{i} ({})", layer.kind()), reason))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_dim(&self, name: &str) -> Result<usize> {
        Ok(self.shapes(name)?.last().unwrap().len())
    }
}

/// Which per-frame blocks are concatenated before the LSTM input projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FusionSpec {
    pub cnn_embedding: bool,
    /// HOG descriptor length, when the HOG block is included.
    pub hog_dim: Option<usize>,
    pub skeleton_embedding: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmSpec {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub bidirectional: bool,
}

impl LstmSpec {
    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub frame_cnn: BranchSpec,
    pub skeleton_cnn: Option<BranchSpec>,
    pub fusion: FusionSpec,
    pub lstm: LstmSpec,
    pub num_classes: usize,
}

/// Widths derived from a validated config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub cnn_embedding: usize,
    pub hog: usize,
    pub skeleton_embedding: usize,
    pub fused: usize,
    pub hidden: usize,
    /// Width of the concatenated final LSTM states fed to the head.
    pub penultimate: usize,
    pub classes: usize,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<Dims> {
        let cnn = if self.fusion.cnn_embedding {
            self.frame_cnn.output_dim("frame")?
        } else {
            0
        };
        let skel = match (&self.skeleton_cnn, self.fusion.skeleton_embedding) {
            (Some(b), true) => b.output_dim("skeleton")?,
            (None, true) => {
                return Err(Error::structure(
                    "fusion",
                    "skeleton embedding requested without a skeleton branch",
                ))
            }
            (_, false) => 0,
        };
        let hog = self.fusion.hog_dim.unwrap_or(0);
        let fused = cnn + hog + skel;
        if fused == 0 {
            return Err(Error::structure("fusion", "no feature blocks selected"));
        }
        if self.lstm.hidden_dim == 0 || self.lstm.num_layers == 0 {
            return Err(Error::structure(
                "lstm",
                "hidden size and layer count must be positive",
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::structure("head", "need at least two classes"));
        }
        Ok(Dims {
            cnn_embedding: cnn,
            hog,
            skeleton_embedding: skel,
            fused,
            hidden: self.lstm.hidden_dim,
            penultimate: self.lstm.hidden_dim * self.lstm.directions(),
            classes: self.num_classes,
        })
    }

    /// Small CNN suited to 64x64 crops: two conv layers (16 and 32 channels)
    /// and a 64-wide embedding, feeding a 2-layer bidirectional LSTM.
    pub fn desk(
        num_classes: usize,
        roi_size: usize,
        hog_dim: Option<usize>,
        skeleton: Option<(usize, usize)>,
    ) -> Self {
        NetworkConfig {
            frame_cnn: BranchSpec {
                input: Shape3::new(1, roi_size, roi_size),
                layers: vec![
                    LayerSpec::conv(5, 2, 2, 16),
                    LayerSpec::Relu,
                    LayerSpec::pool(2, 2),
                    LayerSpec::conv(3, 1, 1, 32),
                    LayerSpec::Relu,
                    LayerSpec::pool(2, 2),
                    LayerSpec::fc(64),
                    LayerSpec::Relu,
                ],
            },
            skeleton_cnn: skeleton.map(|(joints, frames)| skeleton_branch(joints, frames)),
            fusion: FusionSpec {
                cnn_embedding: true,
                hog_dim,
                skeleton_embedding: skeleton.is_some(),
            },
            lstm: LstmSpec {
                hidden_dim: 64,
                num_layers: 2,
                bidirectional: true,
            },
            num_classes,
        }
    }

    /// Frame branch laid out as the classic 227x227 AlexNet (five conv, three
    /// pool, three fully connected layers ending in a 1000-wide FC8).
    pub fn alexnet_preset(num_classes: usize) -> Self {
        NetworkConfig {
            frame_cnn: alexnet_branch(),
            skeleton_cnn: None,
            fusion: FusionSpec {
                cnn_embedding: true,
                hog_dim: None,
                skeleton_embedding: false,
            },
            lstm: LstmSpec {
                hidden_dim: 256,
                num_layers: 2,
                bidirectional: true,
            },
            num_classes,
        }
    }
}

/// Small branch over a joints x frames x RGB skeleton image.
pub fn skeleton_branch(joints: usize, frames: usize) -> BranchSpec {
    BranchSpec {
        input: Shape3::new(3, joints, frames),
        layers: vec![
            LayerSpec::conv(3, 1, 1, 8),
            LayerSpec::Relu,
            LayerSpec::fc(32),
            LayerSpec::Relu,
        ],
    }
}

pub fn alexnet_branch() -> BranchSpec {
    BranchSpec {
        input: Shape3::new(3, 227, 227),
        layers: vec![
            LayerSpec::conv(11, 4, 0, 96),
            LayerSpec::Relu,
            LayerSpec::pool(3, 2),
            LayerSpec::conv(5, 1, 2, 256),
            LayerSpec::Relu,
            LayerSpec::pool(3, 2),
            LayerSpec::conv(3, 1, 1, 384),
            LayerSpec::Relu,
            LayerSpec::conv(3, 1, 1, 384),
            LayerSpec::Relu,
            LayerSpec::conv(3, 1, 1, 256),
            LayerSpec::Relu,
            LayerSpec::pool(3, 2),
            LayerSpec::fc(4096),
            LayerSpec::Relu,
            LayerSpec::fc(4096),
            LayerSpec::Relu,
            LayerSpec::fc(1000),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alexnet_shapes() {
        let shapes = alexnet_branch().shapes("frame").unwrap();
        assert_eq!(shapes[1], Shape::Spatial(Shape3::new(96, 55, 55)));
        assert_eq!(shapes[3], Shape::Spatial(Shape3::new(96, 27, 27)));
        assert_eq!(shapes[13], Shape::Spatial(Shape3::new(256, 6, 6)));
        assert_eq!(*shapes.last().unwrap(), Shape::Flat(1000));
        let dims = NetworkConfig::alexnet_preset(101).validate().unwrap();
        assert_eq!(dims.cnn_embedding, 1000);
    }

    #[test]
    fn desk_dims() {
        let cfg = NetworkConfig::desk(3, 64, Some(1764), Some((5, 32)));
        let d = cfg.validate().unwrap();
        assert_eq!(d.cnn_embedding, 64);
        assert_eq!(d.skeleton_embedding, 32);
        assert_eq!(d.fused, 64 + 1764 + 32);
        assert_eq!(d.penultimate, 128);
    }

    #[test]
    fn structural_errors_name_the_layer() {
        let mut cfg = NetworkConfig::desk(3, 64, None, None);
        cfg.frame_cnn.layers.push(LayerSpec::pool(2, 2));
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("frame.8 (maxpool)"), "{err}");

        let mut cfg = NetworkConfig::desk(3, 4, None, None);
        cfg.frame_cnn.layers[0] = LayerSpec::conv(9, 1, 0, 4);
        assert!(cfg.validate().unwrap_err().to_string().contains("frame.0 (conv)"));

        let mut cfg = NetworkConfig::desk(3, 64, None, None);
        cfg.fusion.skeleton_embedding = true;
        assert!(cfg.validate().is_err());
    }
}
