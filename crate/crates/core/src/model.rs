//! Feedforward ReLU networks: loading, evaluation and input gradients.
//!
//! A [`Network`] is an ordered list of [`Layer`]s, each either an affine map or
//! an element-wise ReLU. The last layer's output is read as raw logits;
//! probabilities are always obtained through [`softmax`].
//!
//! Weights are stored row-major with one row per output neuron, in `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result, FORMAT_TAG};

/// Dense affine map `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl Affine {
    /// Builds an affine map; `weights[i]` is the row for output neuron `i`.
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        Self::checked(weights, bias, 0)
    }

    fn checked(weights: Vec<Vec<f64>>, bias: Vec<f64>, layer: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::MalformedModel(format!(
                "layer {layer}: affine layer has no output rows"
            )));
        }
        let in_dim = weights[0].len();
        if in_dim == 0 {
            return Err(Error::MalformedModel(format!(
                "layer {layer}: affine layer has zero-width rows"
            )));
        }
        if let Some((row, r)) = weights.iter().enumerate().find(|(_, r)| r.len() != in_dim) {
            return Err(Error::MalformedModel(format!(
                "layer {layer}: weight row {row} has {} entries, row 0 has {in_dim}",
                r.len()
            )));
        }
        if bias.len() != weights.len() {
            return Err(Error::dim(format!("layer {layer} bias"), weights.len(), bias.len()));
        }
        let finite = weights.iter().flatten().chain(bias.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFiniteWeight { layer });
        }
        Ok(Self { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Evaluates `W x + b`. Each output accumulates bias first, then terms in
    /// column order; the bound propagators rely on the same order.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, v)| acc + w * v))
            .collect()
    }
}

/// One layer of a network.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Affine(Affine),
    Relu,
}

impl Layer {
    pub fn is_relu(&self) -> bool {
        matches!(self, Layer::Relu)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Affine(_) => "affine",
            Layer::Relu => "relu",
        }
    }
}

/// Post-activation values of every layer, indexed by layer position.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub per_layer: Vec<Vec<f64>>,
}

impl ActivationTrace {
    pub fn layer(&self, index: usize) -> &[f64] {
        &self.per_layer[index]
    }

    pub fn len(&self) -> usize {
        self.per_layer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_layer.is_empty()
    }
}

/// A validated feedforward network. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    widths: Vec<usize>,
    class_labels: Option<Vec<String>>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>, class_labels: Option<Vec<String>>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::MalformedModel("input_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::MalformedModel("network has no layers".into()));
        }
        let mut widths = Vec::with_capacity(layers.len());
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if let Layer::Affine(a) = layer {
                if a.in_dim() != width {
                    return Err(Error::dim(format!("layer {i} input width"), width, a.in_dim()));
                }
                width = a.out_dim();
            }
            widths.push(width);
        }
        if let Some(labels) = &class_labels {
            if labels.len() != width {
                return Err(Error::MalformedModel(format!(
                    "{} class labels for {width} logits",
                    labels.len()
                )));
            }
        }
        Ok(Self {
            input_dim,
            layers,
            widths,
            class_labels,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least one layer")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Output width of every layer.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Input width of layer `index`.
    pub fn input_width(&self, index: usize) -> usize {
        if index == 0 {
            self.input_dim
        } else {
            self.widths[index - 1]
        }
    }

    pub fn class_labels(&self) -> Option<&[String]> {
        self.class_labels.as_deref()
    }

    /// Positions of all ReLU layers, ascending.
    pub fn relu_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_relu())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn relu_count(&self) -> usize {
        self.relu_layers().iter().map(|&i| self.widths[i]).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::dim("network input", self.input_dim, input.len()));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("network input".into()));
        }
        Ok(())
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.output_dim() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: self.output_dim(),
            });
        }
        Ok(())
    }

    /// Runs the network, returning logits and every layer's output.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ActivationTrace)> {
        self.check_input(input)?;
        let mut per_layer: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = per_layer.last().map_or(input, |v| v.as_slice());
            let y = match layer {
                Layer::Affine(a) => a.apply(x),
                Layer::Relu => x.iter().map(|&v| relu(v)).collect(),
            };
            per_layer.push(y);
        }
        let logits = per_layer.last().cloned().expect("at least one layer");
        Ok((logits, ActivationTrace { per_layer }))
    }

    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    pub fn probabilities(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(input)?))
    }

    /// Predicted class: argmax of the logits, lowest index on ties.
    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(input)?))
    }

    /// Gradient of `cotangent · f(x)` with respect to `x`.
    ///
    /// ReLU derivative at exactly zero is taken as zero.
    pub fn vector_jacobian(&self, input: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        if cotangent.len() != self.output_dim() {
            return Err(Error::dim("output cotangent", self.output_dim(), cotangent.len()));
        }
        let (_, trace) = self.forward(input)?;
        Ok(self.backward(input, &trace, cotangent.to_vec()))
    }

    fn backward(&self, input: &[f64], trace: &ActivationTrace, mut grad: Vec<f64>) -> Vec<f64> {
        for (i, layer) in self.layers.iter().enumerate().rev() {
            grad = match layer {
                Layer::Affine(a) => {
                    let mut g = vec![0.0; a.in_dim()];
                    for (row, &go) in a.weights.iter().zip(&grad) {
                        if go == 0.0 {
                            continue;
                        }
                        for (gi, w) in g.iter_mut().zip(row) {
                            *gi += w * go;
                        }
                    }
                    g
                }
                Layer::Relu => {
                    let pre = if i == 0 { input } else { trace.layer(i - 1) };
                    grad.iter()
                        .zip(pre)
                        .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                        .collect()
                }
            };
        }
        grad
    }

    /// Gradient of the cross-entropy loss `-log softmax(f(x))[label]`
    /// with respect to the input.
    pub fn input_gradient(&self, input: &[f64], label: usize) -> Result<Vec<f64>> {
        self.check_label(label)?;
        let (logits, trace) = self.forward(input)?;
        let mut seed = softmax(&logits);
        seed[label] -= 1.0;
        Ok(self.backward(input, &trace, seed))
    }

    /// Cross-entropy loss of `input` against `label`.
    pub fn loss(&self, input: &[f64], label: usize) -> Result<f64> {
        self.check_label(label)?;
        let logits = self.logits(input)?;
        Ok(-log_softmax(&logits)[label])
    }

    /// Reads a model file (`"format": "depkit/1"` JSON).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::MalformedModel(e.to_string()))?;
        file.into_network()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile::from(self)).expect("model serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    input_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_labels: Option<Vec<String>>,
    layers: Vec<LayerSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum LayerSpec {
    Affine { weights: Vec<Vec<f64>>, bias: Vec<f64> },
    Relu,
}

impl ModelFile {
    fn into_network(self) -> Result<Network> {
        if self.format != FORMAT_TAG {
            return Err(Error::MalformedModel(format!(
                "unsupported format {:?}, expected {FORMAT_TAG:?}",
                self.format
            )));
        }
        let layers = self
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, spec)| match spec {
                LayerSpec::Affine { weights, bias } => Affine::checked(weights, bias, i).map(Layer::Affine),
                LayerSpec::Relu => Ok(Layer::Relu),
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(self.input_dim, layers, self.class_labels)
    }
}

impl From<&Network> for ModelFile {
    fn from(net: &Network) -> Self {
        ModelFile {
            format: FORMAT_TAG.to_string(),
            input_dim: net.input_dim,
            class_labels: net.class_labels.clone(),
            layers: net
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Affine(a) => LayerSpec::Affine {
                        weights: a.weights.clone(),
                        bias: a.bias.clone(),
                    },
                    Layer::Relu => LayerSpec::Relu,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(w: Vec<Vec<f64>>, b: Vec<f64>) -> Layer {
        Layer::Affine(Affine::new(w, b).unwrap())
    }

    #[test]
    fn identity_layer_loads() {
        let net = Network::from_json(
            r#"{"format":"depkit/1","input_dim":2,
                "layers":[{"kind":"affine","weights":[[1,0],[0,1]],"bias":[0,0]}]}"#,
        )
        .unwrap();
        assert_eq!(net.layers().len(), 1);
        assert_eq!(net.output_dim(), 2);
        assert_eq!(net.logits(&[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn broken_chain_is_dimension_mismatch() {
        let err = Network::from_json(
            r#"{"format":"depkit/1","input_dim":2,"layers":[
                {"kind":"affine","weights":[[1,0],[0,1],[1,1]],"bias":[0,0,0]},
                {"kind":"affine","weights":[[1,1,1,1]],"bias":[0]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }), "{err}");
    }

    #[test]
    fn rejects_schema_violations() {
        for text in [
            r#"{"format":"depkit/1","input_dim":1,"layers":[{"kind":"softmax"}]}"#,
            r#"{"format":"depkit/2","input_dim":1,"layers":[{"kind":"relu"}]}"#,
            r#"{"input_dim":1,"layers":[{"kind":"relu"}]}"#,
            r#"{"format":"depkit/1","input_dim":1,"layers":[]}"#,
            r#"{"format":"depkit/1","input_dim":2,"layers":[{"kind":"affine","weights":[[1,0],[1]],"bias":[0,0]}]}"#,
            r#"{"format":"depkit/1","input_dim":1,"class_labels":["a","b"],"layers":[{"kind":"relu"}]}"#,
        ] {
            let err = Network::from_json(text).unwrap_err();
            assert!(matches!(err, Error::MalformedModel(_)), "{text}: {err}");
        }
    }

    #[test]
    fn non_finite_weights_rejected() {
        let err = Affine::new(vec![vec![f64::NAN]], vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteWeight { .. }));
    }

    #[test]
    fn forward_examples() {
        let net = Network::new(2, vec![affine(vec![vec![1.0, 1.0]], vec![0.0])], None).unwrap();
        assert_eq!(net.logits(&[1.0, 2.0]).unwrap(), vec![3.0]);

        let net = Network::new(
            1,
            vec![affine(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]), Layer::Relu],
            None,
        )
        .unwrap();
        let (logits, trace) = net.forward(&[-2.0]).unwrap();
        assert_eq!(logits, vec![0.0, 2.0]);
        assert_eq!(trace.len(), 2);
        assert_eq!(trace.layer(0), &[-2.0, 2.0]);

        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        for c in [-50.0, 0.0, 3.5, 700.0] {
            for p in softmax(&[c, c, c]) {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
    }

    #[test]
    fn linear_gradient_closed_form() {
        let w = vec![vec![0.5, -1.0, 2.0], vec![1.5, 0.25, -0.75]];
        let b = vec![0.1, -0.2];
        let net = Network::new(3, vec![affine(w.clone(), b)], None).unwrap();
        let x = [0.3, -0.4, 0.9];
        let p = net.probabilities(&x).unwrap();
        for label in 0..2 {
            let g = net.input_gradient(&x, label).unwrap();
            for j in 0..3 {
                let expected: f64 = (0..2)
                    .map(|i| (p[i] - if i == label { 1.0 } else { 0.0 }) * w[i][j])
                    .sum();
                assert!((g[j] - expected).abs() < 1e-12);
            }
        }
        assert!(matches!(net.input_gradient(&x, 2), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn zero_weight_gradient_is_zero() {
        let net = Network::new(
            2,
            vec![affine(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, -1.0])],
            None,
        )
        .unwrap();
        assert_eq!(net.input_gradient(&[0.2, 0.8], 0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn relu_gradient_at_zero_is_zero() {
        let net = Network::new(
            1,
            vec![
                affine(vec![vec![1.0]], vec![0.0]),
                Layer::Relu,
                affine(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]),
            ],
            None,
        )
        .unwrap();
        assert_eq!(net.input_gradient(&[0.0], 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let w = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 123456.789e10]];
        let net = Network::new(
            2,
            vec![affine(w, vec![f64::MIN_POSITIVE, -0.0]), Layer::Relu],
            Some(vec!["a".into(), "b".into()]),
        )
        .unwrap();
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.fingerprint(), net.fingerprint());
    }
}
