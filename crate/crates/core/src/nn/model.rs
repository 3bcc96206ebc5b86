use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::layers::{self, Mode, KERNEL};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Activation shape: an `h x w x c` image or a flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Image { h: usize, w: usize, c: usize },
    Vector(usize),
}

impl Shape {
    pub fn image(h: usize, w: usize, c: usize) -> Self {
        Shape::Image { h, w, c }
    }

    pub fn len(&self) -> usize {
        match *self {
            Shape::Image { h, w, c } => h * w * c,
            Shape::Vector(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Image { h, w, c } => write!(f, "({h}, {w}, {c})"),
            Shape::Vector(n) => write!(f, "({n})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid 3x3 convolution, stride 1.
    Conv2d { filters: usize },
    /// 2x2 max pooling, stride 2.
    MaxPool2,
    Dropout { p_keep: f64 },
    Relu,
    Flatten,
    Dense { units: usize },
    /// Dense projection to `classes` outputs followed by softmax.
    Softmax { classes: usize },
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "Conv2D",
            LayerSpec::MaxPool2 => "MaxPooling",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::Relu => "ReLU",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::Dense { .. } => "Fully connected",
            LayerSpec::Softmax { .. } => "Softmax",
        }
    }

    /// Output shape for `input`, or a shape error.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let bad = |msg: &str| Err(Error::ShapeMismatch(alloc::format!("{} after {input}: {msg}", self.name())));
        match (*self, input) {
            (LayerSpec::Conv2d { filters }, Shape::Image { h, w, .. }) => {
                if h < KERNEL || w < KERNEL || filters == 0 {
                    return bad("needs at least 3x3 input and one filter");
                }
                Ok(Shape::image(h - 2, w - 2, filters))
            }
            (LayerSpec::MaxPool2, Shape::Image { h, w, c }) => {
                if h < 2 || w < 2 {
                    return bad("needs at least 2x2 input");
                }
                Ok(Shape::image(h / 2, w / 2, c))
            }
            (LayerSpec::Conv2d { .. } | LayerSpec::MaxPool2, Shape::Vector(_)) => bad("needs an image"),
            (LayerSpec::Dropout { p_keep }, s) => {
                if !(p_keep > 0.0 && p_keep <= 1.0) {
                    return Err(Error::InvalidProbability(p_keep));
                }
                Ok(s)
            }
            (LayerSpec::Relu, s) => Ok(s),
            (LayerSpec::Flatten, s) => Ok(Shape::Vector(s.len())),
            (LayerSpec::Dense { units }, Shape::Vector(_)) if units > 0 => Ok(Shape::Vector(units)),
            (LayerSpec::Softmax { classes }, Shape::Vector(_)) if classes >= 2 => Ok(Shape::Vector(classes)),
            (LayerSpec::Dense { .. } | LayerSpec::Softmax { .. }, Shape::Vector(_)) => bad("needs positive width"),
            (LayerSpec::Dense { .. } | LayerSpec::Softmax { .. }, Shape::Image { .. }) => bad("needs a flattened input"),
        }
    }

    /// `(weight count, bias count)` for this layer on `input`.
    pub fn param_sizes(&self, input: Shape) -> (usize, usize) {
        match (*self, input) {
            (LayerSpec::Conv2d { filters }, Shape::Image { c, .. }) => (KERNEL * KERNEL * c * filters, filters),
            (LayerSpec::Dense { units }, s) => (s.len() * units, units),
            (LayerSpec::Softmax { classes }, s) => (s.len() * classes, classes),
            _ => (0, 0),
        }
    }
}

/// Ordered layer stack over a fixed input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(input: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { input, layers };
        spec.shape_chain()?;
        match spec.layers.last() {
            Some(LayerSpec::Softmax { .. }) => Ok(spec),
            _ => Err(Error::ShapeMismatch("model must end in a softmax layer".into())),
        }
    }

    /// Output shape after every layer, statically inferred.
    pub fn shape_chain(&self) -> Result<Vec<Shape>> {
        let mut s = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            s = l.output_shape(s)?;
            out.push(s);
        }
        Ok(out)
    }

    /// Input shape of each layer.
    pub fn input_shapes(&self) -> Result<Vec<Shape>> {
        let chain = self.shape_chain()?;
        let mut ins = vec![self.input];
        ins.extend_from_slice(&chain[..chain.len().saturating_sub(1)]);
        Ok(ins)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self
            .input_shapes()?
            .iter()
            .zip(&self.layers)
            .map(|(&s, l)| {
                let (w, b) = l.param_sizes(s);
                w + b
            })
            .sum())
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Softmax { classes }) => *classes,
            _ => 0,
        }
    }

    /// `(name, output shape)` rows.
    pub fn summary(&self) -> Result<Vec<(String, Shape)>> {
        Ok(self
            .layers
            .iter()
            .zip(self.shape_chain()?)
            .map(|(l, s)| (String::from(l.name()), s))
            .collect())
    }
}

/// The published from-scratch architecture: two conv/pool blocks, dropout
/// then ReLU, two fully connected layers and a two-way softmax.
pub fn build_table4(input: Shape) -> Result<ModelSpec> {
    build_table4_variant(input, false)
}

/// As [`build_table4`]; `conv_relu` adds a ReLU after each convolution.
pub fn build_table4_variant(input: Shape, conv_relu: bool) -> Result<ModelSpec> {
    let mut layers = Vec::new();
    for _ in 0..2 {
        layers.push(LayerSpec::Conv2d { filters: 32 });
        if conv_relu {
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::MaxPool2);
    }
    layers.extend([
        LayerSpec::Dropout { p_keep: 0.5 },
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 1024 },
        LayerSpec::Dense { units: 512 },
        LayerSpec::Softmax { classes: 2 },
    ]);
    ModelSpec::new(input, layers)
}

/// Conv/pool blocks, dropout, ReLU, then `fc_units` dense layers with ReLU
/// between them when `hidden_relu` is set.
pub fn build_stack(input: Shape, conv_filters: &[usize], fc_units: &[usize], hidden_relu: bool) -> Result<ModelSpec> {
    let mut layers = Vec::new();
    for &f in conv_filters {
        layers.push(LayerSpec::Conv2d { filters: f });
        layers.push(LayerSpec::MaxPool2);
    }
    layers.extend([LayerSpec::Dropout { p_keep: 0.5 }, LayerSpec::Relu, LayerSpec::Flatten]);
    for &u in fc_units {
        layers.push(LayerSpec::Dense { units: u });
        if hidden_relu {
            layers.push(LayerSpec::Relu);
        }
    }
    layers.push(LayerSpec::Softmax { classes: 2 });
    ModelSpec::new(input, layers)
}

/// Where one layer's parameters live in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub offset: usize,
    pub weights: usize,
    pub biases: usize,
}

impl ParamSlot {
    pub fn weight_range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.weights
    }

    pub fn bias_range(&self) -> core::ops::Range<usize> {
        self.offset + self.weights..self.offset + self.weights + self.biases
    }
}

pub fn param_slots(spec: &ModelSpec) -> Result<Vec<ParamSlot>> {
    let mut offset = 0;
    Ok(spec
        .input_shapes()?
        .iter()
        .zip(&spec.layers)
        .map(|(&s, l)| {
            let (weights, biases) = l.param_sizes(s);
            let slot = ParamSlot { offset, weights, biases };
            offset += weights + biases;
            slot
        })
        .collect())
}

/// Anything that maps a flat channel-last input to class probabilities.
pub trait Classifier {
    fn input_shape(&self) -> Shape;
    fn predict(&self, input: &[f64]) -> Result<Vec<f64>>;
}

/// Cached per-layer state needed by the backward pass.
enum Tape {
    None,
    Pool(Vec<usize>),
    Dropout(Vec<f64>),
}

pub(crate) struct ForwardPass {
    /// `acts[i]` is the input of layer `i`; the last entry is the output.
    acts: Vec<Vec<f64>>,
    tapes: Vec<Tape>,
}

impl ForwardPass {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// A model spec with its parameters. Parameters live in one flat vector in
/// layer order, weights before biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    pub params: Vec<f64>,
    slots: Vec<ParamSlot>,
    shapes: Vec<Shape>,
}

impl Network {
    /// He-normal weights (std `sqrt(2 / fan_in)`), zero biases.
    pub fn init(spec: &ModelSpec, rng: &mut SeededRng) -> Result<Self> {
        let slots = param_slots(spec)?;
        let shapes = spec.input_shapes()?;
        let total = spec.param_count()?;
        let mut params = vec![0.0; total];
        for ((slot, layer), &input) in slots.iter().zip(&spec.layers).zip(&shapes) {
            let fan_in = match (*layer, input) {
                (LayerSpec::Conv2d { .. }, Shape::Image { c, .. }) => KERNEL * KERNEL * c,
                (_, s) => s.len(),
            };
            let std = libm::sqrt(2.0 / fan_in.max(1) as f64);
            for p in &mut params[slot.weight_range()] {
                *p = std * rng.normal();
            }
        }
        Ok(Self {
            spec: spec.clone(),
            params,
            slots,
            shapes,
        })
    }

    /// Wraps existing parameters, checking their count.
    pub fn from_params(spec: &ModelSpec, params: Vec<f64>) -> Result<Self> {
        let total = spec.param_count()?;
        if params.len() != total {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} parameters for a model with {total}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameters("non-finite parameter".into()));
        }
        Ok(Self {
            spec: spec.clone(),
            params,
            slots: param_slots(spec)?,
            shapes: spec.input_shapes()?,
        })
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub(crate) fn forward_pass(&self, input: &[f64], mode: Mode, rng: &mut SeededRng) -> Result<ForwardPass> {
        if input.len() != self.spec.input.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "input has {} values, model expects {}",
                input.len(),
                self.spec.input
            )));
        }
        let mut acts = Vec::with_capacity(self.spec.layers.len() + 1);
        let mut tapes = Vec::with_capacity(self.spec.layers.len());
        acts.push(input.to_vec());
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let x = acts.last().unwrap();
            let slot = self.slots[i];
            let (y, tape) = match (*layer, self.shapes[i]) {
                (LayerSpec::Conv2d { .. }, Shape::Image { h, w, c }) => (
                    layers::conv2d_valid(
                        x,
                        h,
                        w,
                        c,
                        &self.params[slot.weight_range()],
                        &self.params[slot.bias_range()],
                    )?,
                    Tape::None,
                ),
                (LayerSpec::MaxPool2, Shape::Image { h, w, c }) => {
                    let (y, arg) = layers::maxpool2(x, h, w, c)?;
                    (y, Tape::Pool(arg))
                }
                (LayerSpec::Dropout { p_keep }, _) => {
                    let (y, scale) = layers::dropout(x, p_keep, mode, rng)?;
                    (y, Tape::Dropout(scale))
                }
                (LayerSpec::Relu, _) => (layers::relu(x), Tape::None),
                (LayerSpec::Flatten, _) => (x.clone(), Tape::None),
                (LayerSpec::Dense { .. }, _) => (
                    layers::dense(x, &self.params[slot.weight_range()], &self.params[slot.bias_range()])?,
                    Tape::None,
                ),
                (LayerSpec::Softmax { .. }, _) => {
                    let logits = layers::dense(x, &self.params[slot.weight_range()], &self.params[slot.bias_range()])?;
                    (layers::softmax(&logits), Tape::None)
                }
                _ => return Err(Error::ShapeMismatch(alloc::format!("layer {i} got an incompatible input"))),
            };
            debug_assert_eq!(y.len(), self.spec.shape_chain().unwrap()[i].len());
            acts.push(y);
            tapes.push(tape);
        }
        Ok(ForwardPass { acts, tapes })
    }

    /// Accumulates parameter gradients into `grads`, given the gradient with
    /// respect to the final logits.
    pub(crate) fn backward(&self, pass: &ForwardPass, grad_logits: &[f64], grads: &mut [f64]) {
        let n_layers = self.spec.layers.len();
        let mut g = grad_logits.to_vec();
        for i in (0..n_layers).rev() {
            let x = &pass.acts[i];
            let slot = self.slots[i];
            let want_input = i > 0;
            let (gw_range, gb_range) = (slot.weight_range(), slot.bias_range());
            g = match (self.spec.layers[i], self.shapes[i]) {
                (LayerSpec::Conv2d { filters }, Shape::Image { h, w, c }) => {
                    let (gw, gb) = split_grads(grads, gw_range, gb_range);
                    layers::conv2d_valid_backward(
                        x,
                        h,
                        w,
                        c,
                        &self.params[slot.weight_range()],
                        filters,
                        &g,
                        gw,
                        gb,
                        want_input,
                    )
                    .unwrap_or_default()
                }
                (LayerSpec::MaxPool2, _) => match &pass.tapes[i] {
                    Tape::Pool(arg) => layers::maxpool2_backward(arg, &g, x.len()),
                    _ => unreachable!(),
                },
                (LayerSpec::Dropout { .. }, _) => match &pass.tapes[i] {
                    Tape::Dropout(scale) if !scale.is_empty() => g.iter().zip(scale).map(|(a, s)| a * s).collect(),
                    _ => g,
                },
                (LayerSpec::Relu, _) => layers::relu_backward(x, &g),
                (LayerSpec::Flatten, _) => g,
                (LayerSpec::Dense { .. } | LayerSpec::Softmax { .. }, _) => {
                    let (gw, gb) = split_grads(grads, gw_range, gb_range);
                    layers::dense_backward(x, &self.params[slot.weight_range()], &g, gw, gb, want_input)
                        .unwrap_or_default()
                }
                _ => unreachable!("shape chain validated at construction"),
            };
        }
    }

    /// Loss and accumulated gradient for one labelled example.
    pub fn loss_and_grad(
        &self,
        input: &[f64],
        label: usize,
        mode: Mode,
        rng: &mut SeededRng,
        grads: &mut [f64],
    ) -> Result<(f64, Vec<f64>)> {
        let classes = self.spec.classes();
        if label >= classes {
            return Err(Error::InvalidLabel(alloc::format!("label {label} for {classes} classes")));
        }
        let pass = self.forward_pass(input, mode, rng)?;
        let probs = pass.output().to_vec();
        let target = layers::one_hot(label, classes);
        let loss = -libm::log(probs[label].max(f64::MIN_POSITIVE));
        let grad_logits: Vec<f64> = probs.iter().zip(&target).map(|(p, y)| p - y).collect();
        self.backward(&pass, &grad_logits, grads);
        Ok((loss, probs))
    }

    /// Eval-mode loss without gradients.
    pub fn loss(&self, input: &[f64], label: usize) -> Result<f64> {
        let probs = self.predict(input)?;
        if label >= probs.len() {
            return Err(Error::InvalidLabel(alloc::format!("label {label}")));
        }
        Ok(-libm::log(probs[label].max(f64::MIN_POSITIVE)))
    }

    /// Runs every layer and returns the output shape of each, for checking
    /// against the static chain.
    pub fn runtime_shapes(&self, input: &[f64]) -> Result<Vec<usize>> {
        let mut rng = SeededRng::new(0);
        let pass = self.forward_pass(input, Mode::Eval, &mut rng)?;
        Ok(pass.acts[1..].iter().map(|a| a.len()).collect())
    }
}

fn split_grads(
    grads: &mut [f64],
    w: core::ops::Range<usize>,
    b: core::ops::Range<usize>,
) -> (&mut [f64], &mut [f64]) {
    let (head, tail) = grads.split_at_mut(b.start);
    (&mut head[w], &mut tail[..b.end - b.start])
}

impl Classifier for Network {
    fn input_shape(&self) -> Shape {
        self.spec.input
    }

    fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut rng = SeededRng::new(0);
        let pass = self.forward_pass(input, Mode::Eval, &mut rng)?;
        Ok(pass.acts.into_iter().last().unwrap())
    }
}
