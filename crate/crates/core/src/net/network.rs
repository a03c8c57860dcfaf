use super::config::{BranchSpec, Dims, LayerSpec, NetworkConfig, Shape};
use super::layers::{
    conv_backward, conv_forward, fc_backward, fc_forward, maxpool_backward, maxpool_forward, ConvGeom,
};
use super::lstm::{step_backward, step_traced, LstmCell, LstmState, StepTrace};
use super::params::{param_specs, NetworkParams, ParamIndex};
use crate::error::{Error, Result};

/// Inputs of one representative frame.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFeatures {
    /// ROI crop, channel-major, matching the frame branch input shape.
    pub roi: Vec<f64>,
    /// HOG descriptor; empty when the fusion excludes HOG.
    pub hog: Vec<f64>,
}

/// Network input for one clip.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleFeatures {
    pub steps: Vec<StepFeatures>,
    /// Skeleton image channels (`[c][joint][frame]`), shared by every step.
    pub skeleton: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
struct BranchTrace {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Vec<f64>>,
    argmax: Vec<Vec<usize>>,
}

impl BranchTrace {
    fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// Everything `backward` needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    dims: Dims,
    frame: Vec<BranchTrace>,
    skeleton: Option<BranchTrace>,
    fused: Vec<Vec<f64>>,
    /// `dirs[d][layer]`: step traces in processing order.
    dirs: Vec<Vec<Vec<StepTrace>>>,
    penultimate: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

impl ForwardTrace {
    pub fn steps(&self) -> usize {
        self.fused.len()
    }

    /// Concatenated final LSTM states, the input of the output projection.
    pub fn penultimate(&self) -> &[f64] {
        &self.penultimate
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

struct Plan {
    dims: Dims,
    index: ParamIndex,
    frame_shapes: Vec<Shape>,
    skeleton_shapes: Vec<Shape>,
}

fn plan(config: &NetworkConfig, params: &NetworkParams) -> Result<Plan> {
    let dims = config.validate()?;
    let (specs, index) = param_specs(config)?;
    if params.len() != specs.len() {
        return Err(Error::structure(
            "params",
            format!("expected {} tensors, found {}", specs.len(), params.len()),
        ));
    }
    for ((name, shape, _), (found_name, t)) in specs.iter().zip(params.iter()) {
        if name != found_name || t.shape() != shape.as_slice() {
            return Err(Error::structure(
                name.clone(),
                format!("expected tensor {name} {shape:?}, found {found_name} {:?}", t.shape()),
            ));
        }
    }
    let frame_shapes = if dims.cnn_embedding > 0 {
        config.frame_cnn.shapes("frame")?
    } else {
        Vec::new()
    };
    let skeleton_shapes = match &config.skeleton_cnn {
        Some(b) if dims.skeleton_embedding > 0 => b.shapes("skeleton")?,
        _ => Vec::new(),
    };
    Ok(Plan {
        dims,
        index,
        frame_shapes,
        skeleton_shapes,
    })
}

fn spatial(shape: Shape) -> super::config::Shape3 {
    match shape {
        Shape::Spatial(s) => s,
        Shape::Flat(_) => unreachable!("validated config"),
    }
}

fn geom(layer: &LayerSpec, input: Shape, output: Shape) -> ConvGeom {
    let LayerSpec::Conv {
        kernel: (kh, kw),
        stride,
        padding,
        ..
    } = *layer
    else {
        unreachable!()
    };
    ConvGeom {
        input: spatial(input),
        output: spatial(output),
        kh,
        kw,
        stride,
        pad: padding,
    }
}

fn branch_forward(
    prefix: &str,
    spec: &BranchSpec,
    shapes: &[Shape],
    idx: &[Option<usize>],
    params: &NetworkParams,
    input: &[f64],
) -> Result<BranchTrace> {
    if input.len() != shapes[0].len() {
        return Err(Error::structure(
            format!("{prefix}.input"),
            format!("expected {} values, got {}", shapes[0].len(), input.len()),
        ));
    }
    let mut acts = vec![input.to_vec()];
    let mut argmax = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        let x = acts.last().unwrap();
        let mut out = vec![0.0; shapes[i + 1].len()];
        let mut am = Vec::new();
        match *layer {
            LayerSpec::Conv { .. } => {
                let w = idx[i].unwrap();
                conv_forward(
                    &geom(layer, shapes[i], shapes[i + 1]),
                    params.at(w),
                    params.at(w + 1),
                    x,
                    &mut out,
                );
            }
            LayerSpec::MaxPool { kernel, stride } => {
                am = vec![0; out.len()];
                maxpool_forward(
                    spatial(shapes[i]),
                    spatial(shapes[i + 1]),
                    kernel,
                    stride,
                    x,
                    &mut out,
                    &mut am,
                );
            }
            LayerSpec::Relu => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v.max(0.0);
                }
            }
            LayerSpec::Fc { .. } => {
                let w = idx[i].unwrap();
                fc_forward(params.at(w), params.at(w + 1), x, &mut out);
            }
        }
        argmax.push(am);
        acts.push(out);
    }
    Ok(BranchTrace { acts, argmax })
}

fn pair_mut(grads: &mut NetworkParams, w: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = grads.tensors_mut().split_at_mut(w + 1);
    (a[w].data_mut(), b[0].data_mut())
}

fn branch_backward(
    spec: &BranchSpec,
    shapes: &[Shape],
    idx: &[Option<usize>],
    params: &NetworkParams,
    trace: &BranchTrace,
    dout: Vec<f64>,
    grads: &mut NetworkParams,
) {
    let mut d = dout;
    for i in (0..spec.layers.len()).rev() {
        let layer = &spec.layers[i];
        let need_din = i > 0;
        let x = &trace.acts[i];
        match *layer {
            LayerSpec::Conv { .. } => {
                let w = idx[i].unwrap();
                let mut din = need_din.then(|| vec![0.0; x.len()]);
                let (dw, db) = pair_mut(grads, w);
                conv_backward(
                    &geom(layer, shapes[i], shapes[i + 1]),
                    params.at(w),
                    x,
                    &d,
                    dw,
                    db,
                    din.as_deref_mut(),
                );
                d = din.unwrap_or_default();
            }
            LayerSpec::MaxPool { .. } => {
                let mut din = vec![0.0; x.len()];
                maxpool_backward(&trace.argmax[i], &d, &mut din);
                d = din;
            }
            LayerSpec::Relu => {
                for (g, y) in d.iter_mut().zip(&trace.acts[i + 1]) {
                    if *y <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            LayerSpec::Fc { .. } => {
                let w = idx[i].unwrap();
                let mut din = need_din.then(|| vec![0.0; x.len()]);
                let (dw, db) = pair_mut(grads, w);
                fc_backward(params.at(w), x, &d, dw, db, din.as_deref_mut());
                d = din.unwrap_or_default();
            }
        }
        if !need_din {
            break;
        }
    }
}

fn cell(params: &NetworkParams, base: usize) -> Result<LstmCell<'_>> {
    LstmCell::new(
        std::array::from_fn(|g| params.at(base + g)),
        std::array::from_fn(|g| params.at(base + 4 + g)),
    )
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `-ln p[label]`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(f64::MIN_POSITIVE).ln()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn forward(
    config: &NetworkConfig,
    params: &NetworkParams,
    input: &SampleFeatures,
) -> Result<(Vec<f64>, ForwardTrace)> {
    let plan = plan(config, params)?;
    let dims = plan.dims;
    let t_len = input.steps.len();
    if t_len == 0 {
        return Err(Error::structure("input", "sample has no steps"));
    }

    let skeleton = if dims.skeleton_embedding > 0 {
        let img = input
            .skeleton
            .as_deref()
            .ok_or_else(|| Error::structure("skeleton.input", "sample has no skeleton image"))?;
        Some(branch_forward(
            "skeleton",
            config.skeleton_cnn.as_ref().unwrap(),
            &plan.skeleton_shapes,
            &plan.index.skeleton,
            params,
            img,
        )?)
    } else {
        None
    };

    let mut frame = Vec::new();
    let mut fused = Vec::with_capacity(t_len);
    for (t, step) in input.steps.iter().enumerate() {
        if step.hog.len() != dims.hog {
            return Err(Error::structure(
                "fusion.hog",
                format!("step {t}: expected {} values, got {}", dims.hog, step.hog.len()),
            ));
        }
        let mut v = Vec::with_capacity(dims.fused);
        if dims.cnn_embedding > 0 {
            let tr = branch_forward(
                "frame",
                &config.frame_cnn,
                &plan.frame_shapes,
                &plan.index.frame,
                params,
                &step.roi,
            )?;
            v.extend_from_slice(tr.output());
            frame.push(tr);
        }
        v.extend_from_slice(&step.hog);
        if let Some(s) = &skeleton {
            v.extend_from_slice(s.output());
        }
        fused.push(v);
    }

    let h = dims.hidden;
    let proj: Vec<Vec<f64>> = fused
        .iter()
        .map(|f| {
            let mut out = vec![0.0; h];
            fc_forward(params.at(plan.index.proj), params.at(plan.index.proj + 1), f, &mut out);
            out
        })
        .collect();

    let mut dirs = Vec::new();
    let mut penultimate = Vec::with_capacity(dims.penultimate);
    for dir in 0..config.lstm.directions() {
        let mut xs: Vec<Vec<f64>> = if dir == 0 {
            proj.clone()
        } else {
            proj.iter().rev().cloned().collect()
        };
        let mut layers = Vec::with_capacity(config.lstm.num_layers);
        for l in 0..config.lstm.num_layers {
            let c = cell(params, plan.index.lstm[l][dir])?;
            let mut state = LstmState::zeros(h);
            let mut traces = Vec::with_capacity(t_len);
            for x in &xs {
                let tr = step_traced(&c, x, &state);
                state = LstmState {
                    s: tr.s.clone(),
                    c: tr.c.clone(),
                };
                traces.push(tr);
            }
            xs = traces.iter().map(|tr| tr.s.clone()).collect();
            layers.push(traces);
        }
        penultimate.extend_from_slice(xs.last().unwrap());
        dirs.push(layers);
    }

    let mut logits = vec![0.0; dims.classes];
    fc_forward(
        params.at(plan.index.head),
        params.at(plan.index.head + 1),
        &penultimate,
        &mut logits,
    );
    let probs = softmax(&logits);
    Ok((
        probs.clone(),
        ForwardTrace {
            dims,
            frame,
            skeleton,
            fused,
            dirs,
            penultimate,
            logits,
            probs,
        },
    ))
}

/// Gradients of a loss with respect to every parameter, given the loss
/// gradient with respect to the logits.
pub fn backward(
    config: &NetworkConfig,
    params: &NetworkParams,
    trace: &ForwardTrace,
    dlogits: &[f64],
) -> Result<NetworkParams> {
    let plan = plan(config, params)?;
    let dims = plan.dims;
    let t_len = trace.steps();
    let consistent = trace.dims == dims
        && trace.dirs.len() == config.lstm.directions()
        && trace.dirs.iter().all(|d| d.len() == config.lstm.num_layers)
        && trace.frame.len() == if dims.cnn_embedding > 0 { t_len } else { 0 }
        && trace.skeleton.is_some() == (dims.skeleton_embedding > 0);
    if !consistent {
        return Err(Error::structure("trace", "trace does not match the network config"));
    }
    if dlogits.len() != dims.classes {
        return Err(Error::structure(
            "head",
            format!("expected {} logit gradients, got {}", dims.classes, dlogits.len()),
        ));
    }

    let mut grads = NetworkParams::zeros(config)?;
    let h = dims.hidden;

    let mut dpen = vec![0.0; dims.penultimate];
    {
        let (dw, db) = pair_mut(&mut grads, plan.index.head);
        fc_backward(
            params.at(plan.index.head),
            &trace.penultimate,
            dlogits,
            dw,
            db,
            Some(&mut dpen),
        );
    }

    let mut dproj = vec![vec![0.0; h]; t_len];
    for (dir, layers) in trace.dirs.iter().enumerate() {
        let mut ds_above = vec![vec![0.0; h]; t_len];
        ds_above[t_len - 1].copy_from_slice(&dpen[dir * h..(dir + 1) * h]);
        for l in (0..layers.len()).rev() {
            let base = plan.index.lstm[l][dir];
            let c = cell(params, base)?;
            let steps = &layers[l];
            let zeros = vec![0.0; h];
            let mut ds_rec = vec![0.0; h];
            let mut dc = vec![0.0; h];
            let mut dx = vec![Vec::new(); t_len];
            for p in (0..t_len).rev() {
                let ds: Vec<f64> = ds_above[p].iter().zip(&ds_rec).map(|(a, b)| a + b).collect();
                let c_prev = if p > 0 { &steps[p - 1].c } else { &zeros };
                let (da, dz, dc_prev) = step_backward(&c, &steps[p], c_prev, &ds, &dc);
                let z = &steps[p].z;
                for (g, da_g) in da.iter().enumerate() {
                    let dw = grads.at_mut(base + g);
                    for (j, &d) in da_g.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (w, zk) in dw[j * h..(j + 1) * h].iter_mut().zip(z) {
                            *w += d * zk;
                        }
                    }
                    for (b, d) in grads.at_mut(base + 4 + g).iter_mut().zip(da_g) {
                        *b += d;
                    }
                }
                ds_rec.clone_from(&dz);
                dx[p] = dz;
                dc = dc_prev;
            }
            ds_above = dx;
        }
        for (p, d) in ds_above.iter().enumerate() {
            let t = if dir == 0 { p } else { t_len - 1 - p };
            for (a, b) in dproj[t].iter_mut().zip(d) {
                *a += b;
            }
        }
    }

    let need_fused = dims.cnn_embedding > 0 || dims.skeleton_embedding > 0;
    let mut dskel = vec![0.0; dims.skeleton_embedding];
    for t in 0..t_len {
        let mut dfused = need_fused.then(|| vec![0.0; dims.fused]);
        {
            let (dw, db) = pair_mut(&mut grads, plan.index.proj);
            fc_backward(
                params.at(plan.index.proj),
                &trace.fused[t],
                &dproj[t],
                dw,
                db,
                dfused.as_deref_mut(),
            );
        }
        let Some(dfused) = dfused else { continue };
        if dims.cnn_embedding > 0 {
            branch_backward(
                &config.frame_cnn,
                &plan.frame_shapes,
                &plan.index.frame,
                params,
                &trace.frame[t],
                dfused[..dims.cnn_embedding].to_vec(),
                &mut grads,
            );
        }
        for (a, b) in dskel.iter_mut().zip(&dfused[dims.cnn_embedding + dims.hog..]) {
            *a += b;
        }
    }
    if let Some(st) = &trace.skeleton {
        branch_backward(
            config.skeleton_cnn.as_ref().unwrap(),
            &plan.skeleton_shapes,
            &plan.index.skeleton,
            params,
            st,
            dskel,
            &mut grads,
        );
    }
    Ok(grads)
}

/// Cross-entropy loss for `label` and its gradient.
pub fn loss_and_gradient(
    config: &NetworkConfig,
    params: &NetworkParams,
    input: &SampleFeatures,
    label: usize,
) -> Result<(f64, NetworkParams)> {
    let (probs, trace) = forward(config, params, input)?;
    if label >= probs.len() {
        return Err(Error::Data(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let loss = log_sum_exp(&trace.logits) - trace.logits[label];
    let mut d = probs;
    d[label] -= 1.0;
    let grads = backward(config, params, &trace, &d)?;
    Ok((loss, grads))
}

/// Penultimate representation used for nearest-neighbour lookup.
pub fn embed(config: &NetworkConfig, params: &NetworkParams, input: &SampleFeatures) -> Result<Vec<f64>> {
    Ok(forward(config, params, input)?.1.penultimate)
}
