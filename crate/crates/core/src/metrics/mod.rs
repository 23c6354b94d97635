//! Robustness metrics: loss under perturbation and occlusion sensitivity.

mod perturb;

pub use perturb::{apply, fgsm, perturb, Perturbation};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{softmax, Error, Network, Result};

/// Row-major `(height, width, channels)` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInput {
    values: Vec<f64>,
    height: usize,
    width: usize,
    channels: usize,
}

impl ImageInput {
    /// Validates the shape and clamps values into `[0, 1]`.
    pub fn new(values: Vec<f64>, shape: (usize, usize, usize)) -> Result<Self> {
        let (height, width, channels) = shape;
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::BadParameters("image dimensions must be positive".into()));
        }
        if height * width * channels != values.len() {
            return Err(Error::dim("image values", height * width * channels, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("image values".into()));
        }
        let mut img = Self {
            values,
            height,
            width,
            channels,
        };
        img.clamp();
        Ok(img)
    }

    /// Guesses a shape for a flat vector: a square single-channel image, then
    /// a square three-channel one, then a single row.
    pub fn infer_shape(len: usize) -> (usize, usize, usize) {
        let side = |n: usize| {
            let s = (n as f64).sqrt().round() as usize;
            (s * s == n).then_some(s)
        };
        if let Some(s) = side(len) {
            return (s, s, 1);
        }
        if len % 3 == 0 {
            if let Some(s) = side(len / 3) {
                return (s, s, 3);
            }
        }
        (1, len, 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    fn offset(&self, r: usize, c: usize, ch: usize) -> usize {
        (r * self.width + c) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, ch: usize) -> f64 {
        self.values[self.offset(r, c, ch)]
    }

    /// Sets every channel of pixel `p` (row-major pixel index).
    fn set_pixel(&mut self, p: usize, v: f64) {
        let start = p * self.channels;
        self.values[start..start + self.channels].fill(v);
    }

    fn clamp(&mut self) {
        for v in self.values.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub kind: Perturbation,
    pub average_loss: f64,
    pub max_loss: f64,
    /// `max(0, p_orig - p_pert)` per example, dataset order.
    pub losses: Vec<f64>,
    /// `p_orig - p_pert` before clamping.
    pub drops: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub examples: usize,
    pub kinds: Vec<KindReport>,
}

/// Clamped loss and raw drop of the label's probability.
pub fn probability_drop(net: &Network, original: &[f64], perturbed: &[f64], label: usize) -> Result<(f64, f64)> {
    let p0 = net.probabilities(original)?;
    if label >= p0.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: p0.len(),
        });
    }
    let p1 = softmax(&net.logits(perturbed)?);
    let drop = p0[label] - p1[label];
    Ok((drop.max(0.0), drop))
}

pub(crate) fn aggregate(losses: &[f64]) -> (f64, f64) {
    let sum: f64 = losses.iter().sum();
    let max = losses.iter().copied().fold(0.0, f64::max);
    (sum / losses.len() as f64, max)
}

/// Loss of each perturbation kind over a labelled image set. Example `i` uses
/// seed `seed ^ i`, so results do not depend on scheduling.
pub fn perturbation_loss(
    net: &Network,
    data: &[(ImageInput, usize)],
    kinds: &[Perturbation],
    seed: u64,
) -> Result<PerturbationReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for k in kinds {
        k.validate()?;
    }
    for (img, label) in data {
        if img.values.len() != net.input_dim() {
            return Err(Error::dim("image size", net.input_dim(), img.values.len()));
        }
        if *label >= net.output_dim() {
            return Err(Error::LabelOutOfRange {
                label: *label,
                classes: net.output_dim(),
            });
        }
    }
    let mut reports = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let pairs: Vec<(f64, f64)> = data
            .par_iter()
            .enumerate()
            .map(|(i, (img, label))| {
                let pert = apply(net, img, *label, kind, seed ^ i as u64)?;
                probability_drop(net, &img.values, &pert.values, *label)
            })
            .collect::<Result<_>>()?;
        let (losses, drops): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (average_loss, max_loss) = aggregate(&losses);
        reports.push(KindReport {
            kind: *kind,
            average_loss,
            max_loss,
            losses,
            drops,
        });
    }
    Ok(PerturbationReport {
        examples: data.len(),
        kinds: reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionOptions {
    pub patch: usize,
    pub stride: usize,
    pub patch_value: f64,
}

impl OcclusionOptions {
    /// Patch a quarter of the smaller side, stride half the patch, mid-gray.
    pub fn default_for(image: &ImageInput) -> Self {
        let patch = (image.height.min(image.width) / 4).max(1);
        Self {
            patch,
            stride: (patch / 2).max(1),
            patch_value: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionMap {
    /// `heatmap[i][j]`: drop with the patch's top-left corner at
    /// `(i * stride, j * stride)`.
    pub heatmap: Vec<Vec<f64>>,
    pub max_drop: f64,
    pub options: OcclusionOptions,
}

/// Probability drop of `label` as a square patch slides over the image.
/// Drops may be negative.
pub fn occlusion_sensitivity(
    net: &Network,
    image: &ImageInput,
    label: usize,
    opts: &OcclusionOptions,
) -> Result<OcclusionMap> {
    let (h, w, c) = image.shape();
    if opts.patch == 0 || opts.patch > h.min(w) {
        return Err(Error::BadParameters(format!(
            "patch size {} must be in 1..={}",
            opts.patch,
            h.min(w)
        )));
    }
    if opts.stride == 0 {
        return Err(Error::BadParameters("stride must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&opts.patch_value) {
        return Err(Error::BadParameters("patch value must lie in [0, 1]".into()));
    }
    let base = net.probabilities(&image.values)?;
    if label >= base.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: base.len(),
        });
    }
    let rows = (h - opts.patch) / opts.stride + 1;
    let cols = (w - opts.patch) / opts.stride + 1;
    let heatmap: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .map(|i| {
            (0..cols)
                .map(|j| {
                    let mut occ = image.values.clone();
                    for r in i * opts.stride..i * opts.stride + opts.patch {
                        for col in j * opts.stride..j * opts.stride + opts.patch {
                            for ch in 0..c {
                                occ[image.offset(r, col, ch)] = opts.patch_value;
                            }
                        }
                    }
                    Ok(base[label] - net.probabilities(&occ)?[label])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let max_drop = heatmap.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(OcclusionMap {
        heatmap,
        max_drop,
        options: *opts,
    })
}

/// Binary PGM of a heatmap, linearly scaled so the smallest entry is black
/// and the largest white.
pub fn heatmap_pgm(heatmap: &[Vec<f64>]) -> Vec<u8> {
    let rows = heatmap.len();
    let cols = heatmap.first().map_or(0, Vec::len);
    let flat = heatmap.iter().flatten();
    let lo = flat.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = flat.copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for v in heatmap.iter().flatten() {
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
        out.push((t * 255.0).round() as u8);
    }
    out
}
