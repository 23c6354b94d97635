//! Runtime monitoring with binarized activation patterns.
//!
//! At build time each training input's activations at one ReLU layer are
//! turned into a bit pattern (`bit i = activation_i > threshold`) and recorded
//! in a per-class BDD, then relaxed to a Hamming ball of radius `gamma`. At
//! operation time an input whose pattern is absent from the BDD of its
//! predicted class raises a warning.

pub mod bdd;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bdd::{Bdd, NodeId};

use crate::dataset::Sample;
use crate::{argmax, ActivationTrace, Error, Layer, Network, Result, FORMAT_TAG};

/// One bit per monitored neuron.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern(pub Vec<bool>);

impl Pattern {
    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn hamming(&self, other: &Pattern) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Resolves a layer selector to a network layer index.
///
/// Non-negative values index `net.layers()` directly and must name a ReLU
/// layer. Negative values count ReLU layers from the end: `-1` is the last.
pub fn resolve_layer(net: &Network, selector: i64) -> Result<usize> {
    let relus = net.relu_layers();
    if selector < 0 {
        let back = selector.unsigned_abs() as usize;
        return relus
            .len()
            .checked_sub(back)
            .map(|i| relus[i])
            .ok_or(Error::LayerNotMonitorable(selector));
    }
    let i = selector as usize;
    match net.layers().get(i) {
        Some(Layer::Relu) => Ok(i),
        _ => Err(Error::LayerNotMonitorable(selector)),
    }
}

/// `bit i = activation_i > threshold` at layer `layer` of the trace.
pub fn binarize(net: &Network, trace: &ActivationTrace, layer: usize, threshold: f64) -> Result<Pattern> {
    if !matches!(net.layers().get(layer), Some(Layer::Relu)) {
        return Err(Error::LayerNotMonitorable(layer as i64));
    }
    if trace.len() != net.layers().len() {
        return Err(Error::dim("activation trace", net.layers().len(), trace.len()));
    }
    Ok(binarize_values(trace.layer(layer), threshold))
}

pub fn binarize_values(values: &[f64], threshold: f64) -> Pattern {
    Pattern(values.iter().map(|&v| v > threshold).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    /// Layer selector, see [`resolve_layer`].
    pub layer: i64,
    pub gamma: usize,
    pub threshold: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            layer: -1,
            gamma: 0,
            threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MonitorVerdict {
    Supported { class: usize },
    Warning { class: usize, pattern: Pattern },
}

impl MonitorVerdict {
    pub fn is_warning(&self) -> bool {
        matches!(self, MonitorVerdict::Warning { .. })
    }

    pub fn class(&self) -> usize {
        match self {
            MonitorVerdict::Supported { class } | MonitorVerdict::Warning { class, .. } => *class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    /// Distinct patterns recorded before relaxation.
    pub patterns: u128,
    /// Accepted patterns after relaxation.
    pub accepted: u128,
    /// Training inputs with this label.
    pub samples: usize,
}

/// Per-class pattern sets over one monitored layer. Frozen after build.
#[derive(Debug, Clone)]
pub struct Monitor {
    bdd: Bdd,
    roots: Vec<NodeId>,
    layer: usize,
    config: MonitorConfig,
    stats: Vec<ClassStats>,
    model_hash: String,
    /// Where the model was loaded from, when known.
    pub model_path: Option<String>,
}

pub fn build_monitor(net: &Network, data: &[Sample], config: &MonitorConfig) -> Result<Monitor> {
    let layer = resolve_layer(net, config.layer)?;
    let width = net.widths()[layer];
    if config.gamma > width {
        return Err(Error::BadParameters(format!(
            "gamma {} exceeds monitored width {width}",
            config.gamma
        )));
    }
    if !config.threshold.is_finite() {
        return Err(Error::BadParameters("threshold must be finite".into()));
    }
    let classes = net.output_dim();
    let mut bdd = Bdd::new(width);
    let mut raw = vec![bdd::FALSE; classes];
    let mut samples = vec![0usize; classes];
    for s in data {
        if s.label >= classes {
            return Err(Error::LabelOutOfRange {
                label: s.label,
                classes,
            });
        }
        let (_, trace) = net.forward(&s.x)?;
        let p = binarize_values(trace.layer(layer), config.threshold);
        raw[s.label] = bdd.insert(raw[s.label], &p.0)?;
        samples[s.label] += 1;
    }
    let mut roots = Vec::with_capacity(classes);
    let mut stats = Vec::with_capacity(classes);
    for c in 0..classes {
        let relaxed = bdd.hamming_relax(raw[c], config.gamma)?;
        stats.push(ClassStats {
            patterns: bdd.satcount(raw[c]),
            accepted: bdd.satcount(relaxed),
            samples: samples[c],
        });
        roots.push(relaxed);
    }
    // drop intermediate nodes so the stored table is canonical
    let (nodes, exported) = bdd.export(&roots);
    let (bdd, roots) = Bdd::import(width, &nodes, &exported)?;
    Ok(Monitor {
        bdd,
        roots,
        layer,
        config: config.clone(),
        stats,
        model_hash: net.fingerprint(),
        model_path: None,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonitorFile {
    format: String,
    model_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model_path: Option<String>,
    layer: usize,
    layer_selector: i64,
    width: usize,
    gamma: usize,
    threshold: f64,
    nodes: Vec<[u32; 3]>,
    roots: Vec<NodeId>,
    stats: Vec<ClassStats>,
}

impl Monitor {
    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn width(&self) -> usize {
        self.bdd.num_vars()
    }

    pub fn gamma(&self) -> usize {
        self.config.gamma
    }

    pub fn threshold(&self) -> f64 {
        self.config.threshold
    }

    pub fn classes(&self) -> usize {
        self.roots.len()
    }

    pub fn stats(&self) -> &[ClassStats] {
        &self.stats
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    /// Nodes in the stored table, terminals included.
    pub fn node_count(&self) -> usize {
        self.bdd.node_count()
    }

    pub fn accepts(&self, class: usize, pattern: &Pattern) -> Result<bool> {
        let root = *self.roots.get(class).ok_or(Error::LabelOutOfRange {
            label: class,
            classes: self.classes(),
        })?;
        self.bdd.contains(root, &pattern.0)
    }

    fn check_model(&self, net: &Network) -> Result<()> {
        if net.fingerprint() != self.model_hash {
            return Err(Error::BadParameters(
                "model does not match the one the monitor was built from".into(),
            ));
        }
        Ok(())
    }

    /// Predicted class (lowest index on ties) and whether its pattern was seen.
    pub fn check(&self, net: &Network, input: &[f64]) -> Result<MonitorVerdict> {
        self.check_model(net)?;
        let (logits, trace) = net.forward(input)?;
        let class = argmax(&logits);
        let pattern = binarize_values(trace.layer(self.layer), self.config.threshold);
        Ok(if self.accepts(class, &pattern)? {
            MonitorVerdict::Supported { class }
        } else {
            MonitorVerdict::Warning { class, pattern }
        })
    }

    pub fn to_json(&self) -> String {
        let (nodes, roots) = self.bdd.export(&self.roots);
        let file = MonitorFile {
            format: FORMAT_TAG.into(),
            model_hash: self.model_hash.clone(),
            model_path: self.model_path.clone(),
            layer: self.layer,
            layer_selector: self.config.layer,
            width: self.width(),
            gamma: self.config.gamma,
            threshold: self.config.threshold,
            nodes,
            roots,
            stats: self.stats.clone(),
        };
        serde_json::to_string_pretty(&file).expect("monitor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: MonitorFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedInput(format!("monitor file: {e}")))?;
        if f.format != FORMAT_TAG {
            return Err(Error::MalformedInput(format!(
                "monitor file: unsupported format {:?}",
                f.format
            )));
        }
        if f.stats.len() != f.roots.len() {
            return Err(Error::MalformedInput(
                "monitor file: stats and roots differ in length".into(),
            ));
        }
        let (bdd, roots) = Bdd::import(f.width, &f.nodes, &f.roots)?;
        Ok(Self {
            bdd,
            roots,
            layer: f.layer,
            config: MonitorConfig {
                layer: f.layer_selector,
                gamma: f.gamma,
                threshold: f.threshold,
            },
            stats: f.stats,
            model_hash: f.model_hash,
            model_path: f.model_path,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Validates the monitor against `net`: same fingerprint, layer and width.
    pub fn bind(&self, net: &Network) -> Result<()> {
        self.check_model(net)?;
        if net.layers().get(self.layer) != Some(&Layer::Relu) || net.widths()[self.layer] != self.width() {
            return Err(Error::LayerNotMonitorable(self.layer as i64));
        }
        if net.output_dim() != self.classes() {
            return Err(Error::dim("monitor classes", net.output_dim(), self.classes()));
        }
        Ok(())
    }
}
