//! Minimal CPU neural-network substrate: enough forward/backward machinery to
//! train a small convnet and to differentiate any supported architecture with
//! respect to its input pixels.
//!
//! Design constraints:
//! * `Network` is immutable during inference; every forward pass records its
//!   intermediates on a per-call [`Tape`], so concurrent passes never share
//!   mutable state.
//! * All reductions run in a fixed sequential order, so results are
//!   bit-reproducible across runs and across worker counts.

use ndarray::{Array1, Array2, Array3, Array4, ArrayD, Axis, IxDyn};

use crate::error::{Error, Result};
use crate::io::NamedArray;

/// An image tensor in (channels, height, width) layout, unit-interval intensities.
pub type Image = Array3<f32>;

pub struct Conv2d {
    /// (out_channels, in_channels, k, k)
    pub weight: Array4<f32>,
    pub bias: Array1<f32>,
    pub stride: usize,
    pub padding: usize,
    /// Convs followed by batchnorm carry no bias parameter on disk; the
    /// in-memory bias stays zero for those.
    pub has_bias: bool,
}

pub struct BatchNorm2d {
    pub gamma: Array1<f32>,
    pub beta: Array1<f32>,
    pub running_mean: Array1<f32>,
    pub running_var: Array1<f32>,
    pub eps: f32,
}

pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub ceil_mode: bool,
}

pub struct Linear {
    /// (out_features, in_features)
    pub weight: Array2<f32>,
    pub bias: Array1<f32>,
}

pub enum Layer {
    Conv2d(Conv2d),
    BatchNorm2d(BatchNorm2d),
    Relu,
    MaxPool2d(MaxPool2d),
    GlobalAvgPool,
    Linear(Linear),
    Flatten,
}

impl Layer {
    /// Flatten is pure bookkeeping; everything else is an enumerable layer
    /// whose output activations get captured.
    pub fn is_capture(&self) -> bool {
        !matches!(self, Layer::Flatten)
    }

    fn has_params(&self) -> bool {
        matches!(self, Layer::Conv2d(_) | Layer::Linear(_))
    }
}

/// Computation graph over leaf layers stored in `Network::layers`.
/// Leaves appear in the vector in forward execution order.
pub enum Block {
    Leaf(usize),
    Seq(Vec<Block>),
    /// `main(x) + shortcut(x)`; an empty `Seq` shortcut is the identity.
    Residual { main: Box<Block>, shortcut: Box<Block> },
    /// Parallel branches concatenated along the channel axis.
    Branches(Vec<Block>),
}

/// Per-call record of forward intermediates, consumed in reverse by backward.
pub enum TapeItem {
    ConvCols {
        cols: Array2<f32>,
        in_shape: [usize; 3],
    },
    ReluMask(ArrayD<f32>),
    MaxPoolIdx {
        // flat input index feeding each output element; usize::MAX for
        // windows that saw only padding
        indices: Vec<usize>,
        in_shape: [usize; 3],
    },
    GapShape([usize; 3]),
    LinearInput(Array1<f32>),
    FlattenShape(Vec<usize>),
    BranchSplit(Vec<usize>),
    Plain,
}

pub type Tape = Vec<TapeItem>;

pub enum ParamGrad {
    Conv { dw: Array4<f32>, db: Array1<f32> },
    Linear { dw: Array2<f32>, db: Array1<f32> },
}

/// Per-leaf parameter gradients accumulated by a backward pass.
pub struct GradStore {
    pub grads: Vec<Option<ParamGrad>>,
}

impl GradStore {
    pub fn zeros_like(net: &Network) -> Self {
        let grads = net
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv2d(c) => Some(ParamGrad::Conv {
                    dw: Array4::zeros(c.weight.raw_dim()),
                    db: Array1::zeros(c.bias.raw_dim()),
                }),
                Layer::Linear(l) => Some(ParamGrad::Linear {
                    dw: Array2::zeros(l.weight.raw_dim()),
                    db: Array1::zeros(l.bias.raw_dim()),
                }),
                _ => None,
            })
            .collect();
        GradStore { grads }
    }

    pub fn zero(&mut self) {
        for g in self.grads.iter_mut().flatten() {
            match g {
                ParamGrad::Conv { dw, db } => {
                    dw.fill(0.0);
                    db.fill(0.0);
                }
                ParamGrad::Linear { dw, db } => {
                    dw.fill(0.0);
                    db.fill(0.0);
                }
            }
        }
    }
}

pub struct Network {
    pub layers: Vec<Layer>,
    /// Stable human-readable name per leaf, torchvision-style for the
    /// pretrained architectures.
    pub names: Vec<String>,
    pub root: Block,
}

pub struct ForwardResult {
    pub logits: Array1<f32>,
    pub tape: Tape,
    /// Flattened output per capture layer, in enumeration order.
    pub captured: Vec<Vec<f32>>,
}

fn conv_out_dim(input: usize, k: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - k) / stride + 1
}

fn pool_out_dim(input: usize, k: usize, stride: usize, pad: usize, ceil: bool) -> usize {
    let span = input + 2 * pad - k;
    let mut out = if ceil {
        span.div_ceil(stride) + 1
    } else {
        span / stride + 1
    };
    // last window must start inside the (padded-left) input
    if ceil && (out - 1) * stride >= input + pad {
        out -= 1;
    }
    out
}

fn im2col(x: &Array3<f32>, k: usize, stride: usize, pad: usize, oh: usize, ow: usize) -> Array2<f32> {
    let (c, h, w) = x.dim();
    let mut cols = Array2::<f32>::zeros((c * k * k, oh * ow));
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ci * k * k + ki * k + kj;
                let mut row_view = cols.row_mut(row);
                for oi in 0..oh {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for oj in 0..ow {
                        let jj = (oj * stride + kj) as isize - pad as isize;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        row_view[oi * ow + oj] = x[(ci, ii as usize, jj as usize)];
                    }
                }
            }
        }
    }
    cols
}

fn col2im(
    dcols: &Array2<f32>,
    in_shape: [usize; 3],
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array3<f32> {
    let [c, h, w] = in_shape;
    let mut dx = Array3::<f32>::zeros((c, h, w));
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ci * k * k + ki * k + kj;
                let row_view = dcols.row(row);
                for oi in 0..oh {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for oj in 0..ow {
                        let jj = (oj * stride + kj) as isize - pad as isize;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        dx[(ci, ii as usize, jj as usize)] += row_view[oi * ow + oj];
                    }
                }
            }
        }
    }
    dx
}

fn as_3d(x: ArrayD<f32>) -> Array3<f32> {
    x.into_dimensionality::<ndarray::Ix3>()
        .expect("expected a (C,H,W) tensor")
}

fn as_1d(x: ArrayD<f32>) -> Array1<f32> {
    x.into_dimensionality::<ndarray::Ix1>()
        .expect("expected a flat vector")
}

impl Layer {
    fn forward(&self, x: ArrayD<f32>, tape: Option<&mut Tape>) -> ArrayD<f32> {
        match self {
            Layer::Conv2d(c) => {
                let x = as_3d(x);
                let (ic, h, w) = x.dim();
                let (oc, wic, k, _) = c.weight.dim();
                assert_eq!(ic, wic, "conv input channel mismatch");
                let oh = conv_out_dim(h, k, c.stride, c.padding);
                let ow = conv_out_dim(w, k, c.stride, c.padding);
                let cols = im2col(&x, k, c.stride, c.padding, oh, ow);
                let w2 = c
                    .weight
                    .view()
                    .into_shape_with_order((oc, ic * k * k))
                    .expect("conv weight is contiguous");
                let mut y = w2.dot(&cols);
                for (mut row, b) in y.axis_iter_mut(Axis(0)).zip(c.bias.iter()) {
                    row += *b;
                }
                if let Some(t) = tape {
                    t.push(TapeItem::ConvCols {
                        cols,
                        in_shape: [ic, h, w],
                    });
                }
                y.into_shape_with_order(IxDyn(&[oc, oh, ow])).unwrap()
            }
            Layer::BatchNorm2d(bn) => {
                let mut x = as_3d(x);
                for (ci, mut plane) in x.axis_iter_mut(Axis(0)).enumerate() {
                    let scale = bn.gamma[ci] / (bn.running_var[ci] + bn.eps).sqrt();
                    let shift = bn.beta[ci] - bn.running_mean[ci] * scale;
                    plane.mapv_inplace(|v| v * scale + shift);
                }
                if let Some(t) = tape {
                    t.push(TapeItem::Plain);
                }
                x.into_dyn()
            }
            Layer::Relu => {
                let y = x.mapv(|v| v.max(0.0));
                if let Some(t) = tape {
                    t.push(TapeItem::ReluMask(y.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 })));
                }
                y
            }
            Layer::MaxPool2d(p) => {
                let x = as_3d(x);
                let (c, h, w) = x.dim();
                let oh = pool_out_dim(h, p.kernel, p.stride, p.padding, p.ceil_mode);
                let ow = pool_out_dim(w, p.kernel, p.stride, p.padding, p.ceil_mode);
                let mut y = Array3::<f32>::zeros((c, oh, ow));
                let mut indices = vec![usize::MAX; c * oh * ow];
                for ci in 0..c {
                    for oi in 0..oh {
                        for oj in 0..ow {
                            let mut best = f32::NEG_INFINITY;
                            let mut best_idx = usize::MAX;
                            for ki in 0..p.kernel {
                                let ii = (oi * p.stride + ki) as isize - p.padding as isize;
                                if ii < 0 || ii >= h as isize {
                                    continue;
                                }
                                for kj in 0..p.kernel {
                                    let jj = (oj * p.stride + kj) as isize - p.padding as isize;
                                    if jj < 0 || jj >= w as isize {
                                        continue;
                                    }
                                    let v = x[(ci, ii as usize, jj as usize)];
                                    if v > best {
                                        best = v;
                                        best_idx =
                                            ci * h * w + ii as usize * w + jj as usize;
                                    }
                                }
                            }
                            if best_idx != usize::MAX {
                                y[(ci, oi, oj)] = best;
                            }
                            indices[ci * oh * ow + oi * ow + oj] = best_idx;
                        }
                    }
                }
                if let Some(t) = tape {
                    t.push(TapeItem::MaxPoolIdx {
                        indices,
                        in_shape: [c, h, w],
                    });
                }
                y.into_dyn()
            }
            Layer::GlobalAvgPool => {
                let x = as_3d(x);
                let (c, h, w) = x.dim();
                let mut y = Array1::<f32>::zeros(c);
                for ci in 0..c {
                    y[ci] = x.index_axis(Axis(0), ci).sum() / (h * w) as f32;
                }
                if let Some(t) = tape {
                    t.push(TapeItem::GapShape([c, h, w]));
                }
                y.into_dyn()
            }
            Layer::Linear(l) => {
                let x = as_1d(x);
                let y = l.weight.dot(&x) + &l.bias;
                if let Some(t) = tape {
                    t.push(TapeItem::LinearInput(x));
                }
                y.into_dyn()
            }
            Layer::Flatten => {
                let shape = x.shape().to_vec();
                let numel: usize = shape.iter().product();
                let y = x.into_shape_with_order(IxDyn(&[numel])).unwrap();
                if let Some(t) = tape {
                    t.push(TapeItem::FlattenShape(shape));
                }
                y
            }
        }
    }

    fn backward(
        &self,
        dy: ArrayD<f32>,
        item: TapeItem,
        grad: Option<&mut Option<ParamGrad>>,
    ) -> ArrayD<f32> {
        match (self, item) {
            (Layer::Conv2d(c), TapeItem::ConvCols { cols, in_shape }) => {
                let dy = as_3d(dy);
                let (oc, oh, ow) = dy.dim();
                let (_, ic, k, _) = c.weight.dim();
                let dy2 = dy
                    .into_shape_with_order((oc, oh * ow))
                    .expect("conv dy is contiguous");
                if let Some(slot) = grad {
                    if let Some(ParamGrad::Conv { dw, db }) = slot {
                        let dw2 = dy2.dot(&cols.t());
                        let dw2 = dw2
                            .into_shape_with_order(c.weight.raw_dim())
                            .expect("conv dw shape");
                        *dw += &dw2;
                        *db += &dy2.sum_axis(Axis(1));
                    }
                }
                let w2 = c
                    .weight
                    .view()
                    .into_shape_with_order((oc, ic * k * k))
                    .expect("conv weight is contiguous");
                let dcols = w2.t().dot(&dy2);
                col2im(&dcols, in_shape, k, c.stride, c.padding, oh, ow).into_dyn()
            }
            (Layer::BatchNorm2d(bn), TapeItem::Plain) => {
                let mut dy = as_3d(dy);
                for (ci, mut plane) in dy.axis_iter_mut(Axis(0)).enumerate() {
                    let scale = bn.gamma[ci] / (bn.running_var[ci] + bn.eps).sqrt();
                    plane.mapv_inplace(|v| v * scale);
                }
                dy.into_dyn()
            }
            (Layer::Relu, TapeItem::ReluMask(mask)) => dy * &mask,
            (Layer::MaxPool2d(_), TapeItem::MaxPoolIdx { indices, in_shape }) => {
                let mut dx = vec![0.0f32; in_shape.iter().product()];
                for (&idx, &g) in indices.iter().zip(dy.iter()) {
                    if idx != usize::MAX {
                        dx[idx] += g;
                    }
                }
                Array3::from_shape_vec((in_shape[0], in_shape[1], in_shape[2]), dx)
                    .unwrap()
                    .into_dyn()
            }
            (Layer::GlobalAvgPool, TapeItem::GapShape([c, h, w])) => {
                let dy = as_1d(dy);
                let mut dx = Array3::<f32>::zeros((c, h, w));
                for ci in 0..c {
                    let g = dy[ci] / (h * w) as f32;
                    dx.index_axis_mut(Axis(0), ci).fill(g);
                }
                dx.into_dyn()
            }
            (Layer::Linear(l), TapeItem::LinearInput(x)) => {
                let dy = as_1d(dy);
                if let Some(slot) = grad {
                    if let Some(ParamGrad::Linear { dw, db }) = slot {
                        for (i, &g) in dy.iter().enumerate() {
                            let mut row = dw.row_mut(i);
                            row.scaled_add(g, &x);
                        }
                        *db += &dy;
                    }
                }
                l.weight.t().dot(&dy).into_dyn()
            }
            (Layer::Flatten, TapeItem::FlattenShape(shape)) => {
                dy.into_shape_with_order(IxDyn(&shape)).unwrap()
            }
            _ => panic!("tape out of sync with network structure"),
        }
    }
}

impl Network {
    pub fn forward(&self, input: Image, want_tape: bool, want_capture: bool) -> ForwardResult {
        let mut tape = Vec::new();
        let mut captured = Vec::new();
        let out = self.forward_block(
            &self.root,
            input.into_dyn(),
            if want_tape { Some(&mut tape) } else { None },
            if want_capture { Some(&mut captured) } else { None },
        );
        ForwardResult {
            logits: as_1d(out),
            tape,
            captured,
        }
    }

    fn forward_block(
        &self,
        block: &Block,
        x: ArrayD<f32>,
        mut tape: Option<&mut Tape>,
        mut cap: Option<&mut Vec<Vec<f32>>>,
    ) -> ArrayD<f32> {
        match block {
            Block::Leaf(idx) => {
                let layer = &self.layers[*idx];
                let y = layer.forward(x, tape.as_deref_mut());
                if layer.is_capture() {
                    if let Some(c) = cap {
                        c.push(y.iter().copied().collect());
                    }
                }
                y
            }
            Block::Seq(blocks) => {
                let mut cur = x;
                for b in blocks {
                    cur = self.forward_block(b, cur, tape.as_deref_mut(), cap.as_deref_mut());
                }
                cur
            }
            Block::Residual { main, shortcut } => {
                let ym = self.forward_block(main, x.clone(), tape.as_deref_mut(), cap.as_deref_mut());
                let ys = self.forward_block(shortcut, x, tape.as_deref_mut(), cap.as_deref_mut());
                ym + ys
            }
            Block::Branches(branches) => {
                let mut outs: Vec<Array3<f32>> = Vec::with_capacity(branches.len());
                for b in branches {
                    let y = self.forward_block(b, x.clone(), tape.as_deref_mut(), cap.as_deref_mut());
                    outs.push(as_3d(y));
                }
                let sizes: Vec<usize> = outs.iter().map(|o| o.dim().0).collect();
                let views: Vec<_> = outs.iter().map(|o| o.view()).collect();
                let y = ndarray::concatenate(Axis(0), &views).expect("branch shapes agree");
                if let Some(t) = tape.as_deref_mut() {
                    t.push(TapeItem::BranchSplit(sizes));
                }
                y.into_dyn()
            }
        }
    }

    /// Backpropagates `dlogits` through the pass recorded on `tape`, returning
    /// the gradient with respect to the input image. Parameter gradients
    /// accumulate into `grads` when provided.
    pub fn backward(
        &self,
        dlogits: Array1<f32>,
        mut tape: Tape,
        mut grads: Option<&mut GradStore>,
    ) -> Image {
        let dx = self.backward_block(&self.root, dlogits.into_dyn(), &mut tape, &mut grads);
        assert!(tape.is_empty(), "tape not fully consumed");
        as_3d(dx)
    }

    fn backward_block(
        &self,
        block: &Block,
        dy: ArrayD<f32>,
        tape: &mut Tape,
        grads: &mut Option<&mut GradStore>,
    ) -> ArrayD<f32> {
        match block {
            Block::Leaf(idx) => {
                let item = tape.pop().expect("tape underrun");
                let slot = grads.as_deref_mut().map(|g| &mut g.grads[*idx]);
                self.layers[*idx].backward(dy, item, slot)
            }
            Block::Seq(blocks) => {
                let mut cur = dy;
                for b in blocks.iter().rev() {
                    cur = self.backward_block(b, cur, tape, grads);
                }
                cur
            }
            Block::Residual { main, shortcut } => {
                let ds = self.backward_block(shortcut, dy.clone(), tape, grads);
                let dm = self.backward_block(main, dy, tape, grads);
                dm + ds
            }
            Block::Branches(branches) => {
                let sizes = match tape.pop() {
                    Some(TapeItem::BranchSplit(s)) => s,
                    _ => panic!("tape out of sync at branch split"),
                };
                let dy = as_3d(dy);
                let mut dx: Option<ArrayD<f32>> = None;
                let mut end: usize = sizes.iter().sum();
                for (b, &sz) in branches.iter().zip(sizes.iter()).rev() {
                    let slice = dy
                        .slice(ndarray::s![end - sz..end, .., ..])
                        .to_owned()
                        .into_dyn();
                    end -= sz;
                    let d = self.backward_block(b, slice, tape, grads);
                    dx = Some(match dx {
                        None => d,
                        Some(acc) => acc + d,
                    });
                }
                dx.expect("at least one branch")
            }
        }
    }

    /// Names of capture layers (every leaf except reshapes) in forward order.
    pub fn capture_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .zip(self.names.iter())
            .filter(|(l, _)| l.is_capture())
            .map(|(_, n)| n.clone())
            .collect()
    }

    pub fn named_parameters(&self) -> Vec<NamedArray> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter().zip(self.names.iter()) {
            match layer {
                Layer::Conv2d(c) => {
                    out.push(NamedArray {
                        name: format!("{name}.weight"),
                        shape: c.weight.shape().to_vec(),
                        data: c.weight.iter().copied().collect(),
                    });
                    if c.has_bias {
                        out.push(NamedArray {
                            name: format!("{name}.bias"),
                            shape: c.bias.shape().to_vec(),
                            data: c.bias.to_vec(),
                        });
                    }
                }
                Layer::Linear(l) => {
                    out.push(NamedArray {
                        name: format!("{name}.weight"),
                        shape: l.weight.shape().to_vec(),
                        data: l.weight.iter().copied().collect(),
                    });
                    out.push(NamedArray {
                        name: format!("{name}.bias"),
                        shape: l.bias.shape().to_vec(),
                        data: l.bias.to_vec(),
                    });
                }
                Layer::BatchNorm2d(bn) => {
                    for (suffix, arr) in [
                        ("weight", &bn.gamma),
                        ("bias", &bn.beta),
                        ("running_mean", &bn.running_mean),
                        ("running_var", &bn.running_var),
                    ] {
                        out.push(NamedArray {
                            name: format!("{name}.{suffix}"),
                            shape: arr.shape().to_vec(),
                            data: arr.to_vec(),
                        });
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Assigns parameters by name. Every parameter the network owns must be
    /// present; unknown names (aux classifiers, bookkeeping buffers) are ignored.
    pub fn load_named_parameters(&mut self, params: &[NamedArray]) -> Result<()> {
        let lookup: std::collections::HashMap<&str, &NamedArray> =
            params.iter().map(|p| (p.name.as_str(), p)).collect();
        let fetch = |name: String, shape: &[usize]| -> Result<Vec<f32>> {
            let p = lookup
                .get(name.as_str())
                .ok_or_else(|| Error::Input(format!("missing parameter '{name}'")))?;
            if p.shape != shape {
                return Err(Error::Input(format!(
                    "parameter '{name}' has shape {:?}, expected {:?}",
                    p.shape, shape
                )));
            }
            Ok(p.data.clone())
        };
        for (layer, name) in self.layers.iter_mut().zip(self.names.iter()) {
            match layer {
                Layer::Conv2d(c) => {
                    let w = fetch(format!("{name}.weight"), c.weight.shape())?;
                    c.weight = Array4::from_shape_vec(c.weight.raw_dim(), w).unwrap();
                    if c.has_bias {
                        c.bias = Array1::from_vec(fetch(format!("{name}.bias"), c.bias.shape())?);
                    }
                }
                Layer::Linear(l) => {
                    let w = fetch(format!("{name}.weight"), l.weight.shape())?;
                    l.weight = Array2::from_shape_vec(l.weight.raw_dim(), w).unwrap();
                    l.bias = Array1::from_vec(fetch(format!("{name}.bias"), l.bias.shape())?);
                }
                Layer::BatchNorm2d(bn) => {
                    bn.gamma = Array1::from_vec(fetch(format!("{name}.weight"), bn.gamma.shape())?);
                    bn.beta = Array1::from_vec(fetch(format!("{name}.bias"), bn.beta.shape())?);
                    bn.running_mean =
                        Array1::from_vec(fetch(format!("{name}.running_mean"), bn.running_mean.shape())?);
                    bn.running_var =
                        Array1::from_vec(fetch(format!("{name}.running_var"), bn.running_var.shape())?);
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn param_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.has_params()).count()
    }
}

/// Elementwise Adam update with bias correction.
#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl AdamHyper {
    pub fn with_lr(lr: f32) -> Self {
        AdamHyper {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f32>,
    v: Vec<f32>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// One step; `t` is the 1-based step count.
    pub fn step(&mut self, hyper: &AdamHyper, t: u64, x: &mut [f32], g: &[f32]) {
        assert_eq!(x.len(), g.len());
        assert_eq!(x.len(), self.m.len());
        let bc1 = 1.0 - hyper.beta1.powi(t as i32);
        let bc2 = 1.0 - hyper.beta2.powi(t as i32);
        for i in 0..x.len() {
            self.m[i] = hyper.beta1 * self.m[i] + (1.0 - hyper.beta1) * g[i];
            self.v[i] = hyper.beta2 * self.v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            x[i] -= hyper.lr * mhat / (vhat.sqrt() + hyper.eps);
        }
    }
}

/// Adam over every parameterized layer of a network.
pub struct NetworkAdam {
    hyper: AdamHyper,
    t: u64,
    states: Vec<Option<(AdamState, AdamState)>>,
}

impl NetworkAdam {
    pub fn new(net: &Network, hyper: AdamHyper) -> Self {
        let states = net
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv2d(c) => Some((
                    AdamState::new(c.weight.len()),
                    AdamState::new(c.bias.len()),
                )),
                Layer::Linear(l) => Some((
                    AdamState::new(l.weight.len()),
                    AdamState::new(l.bias.len()),
                )),
                _ => None,
            })
            .collect();
        NetworkAdam {
            hyper,
            t: 0,
            states,
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &GradStore) {
        self.t += 1;
        for (idx, layer) in net.layers.iter_mut().enumerate() {
            let Some((ws, bs)) = self.states[idx].as_mut() else {
                continue;
            };
            match (layer, &grads.grads[idx]) {
                (Layer::Conv2d(c), Some(ParamGrad::Conv { dw, db })) => {
                    ws.step(
                        &self.hyper,
                        self.t,
                        c.weight.as_slice_mut().unwrap(),
                        dw.as_slice().unwrap(),
                    );
                    bs.step(
                        &self.hyper,
                        self.t,
                        c.bias.as_slice_mut().unwrap(),
                        db.as_slice().unwrap(),
                    );
                }
                (Layer::Linear(l), Some(ParamGrad::Linear { dw, db })) => {
                    ws.step(
                        &self.hyper,
                        self.t,
                        l.weight.as_slice_mut().unwrap(),
                        dw.as_slice().unwrap(),
                    );
                    bs.step(
                        &self.hyper,
                        self.t,
                        l.bias.as_slice_mut().unwrap(),
                        db.as_slice().unwrap(),
                    );
                }
                _ => panic!("gradient store out of sync with network"),
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy loss and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f32], target: usize) -> (f32, Vec<f32>) {
    let probs = softmax(logits);
    let loss = -(probs[target].max(1e-12)).ln();
    let mut dlogits = probs;
    dlogits[target] -= 1.0;
    (loss, dlogits)
}
