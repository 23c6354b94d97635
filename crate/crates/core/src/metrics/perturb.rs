use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ImageInput;
use crate::{Error, Network, Result};

/// A known input perturbation. See [`perturb`] for the exact semantics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    Gaussian { sigma: f64 },
    Haze { alpha: f64 },
    Fog { alpha: f64, radius: usize },
    Snow { density: f64, brightness: f64 },
    SaltPepper { density: f64 },
    Blur { radius: usize },
    Fgsm { epsilon: f64 },
}

impl Perturbation {
    pub const NAMES: [&'static str; 7] = ["gaussian", "haze", "fog", "snow", "salt_pepper", "blur", "fgsm"];

    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "gaussian" => Self::Gaussian { sigma: 0.1 },
            "haze" => Self::Haze { alpha: 0.3 },
            "fog" => Self::Fog { alpha: 0.5, radius: 2 },
            "snow" => Self::Snow {
                density: 0.05,
                brightness: 1.0,
            },
            "salt_pepper" | "saltpepper" => Self::SaltPepper { density: 0.05 },
            "blur" => Self::Blur { radius: 2 },
            "fgsm" => Self::Fgsm { epsilon: 8.0 / 255.0 },
            _ => return Err(Error::BadParameters(format!("unknown perturbation {name:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Haze { .. } => "haze",
            Self::Fog { .. } => "fog",
            Self::Snow { .. } => "snow",
            Self::SaltPepper { .. } => "salt_pepper",
            Self::Blur { .. } => "blur",
            Self::Fgsm { .. } => "fgsm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = match *self {
            Self::Gaussian { sigma } => sigma > 0.0 && sigma.is_finite(),
            Self::Haze { alpha } => unit(alpha),
            Self::Fog { alpha, radius } => unit(alpha) && radius >= 1,
            Self::Snow { density, brightness } => unit(density) && unit(brightness),
            Self::SaltPepper { density } => unit(density),
            Self::Blur { radius } => radius >= 1,
            Self::Fgsm { epsilon } => epsilon > 0.0 && epsilon.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadParameters(format!("invalid parameters for {self}")))
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            Self::Haze { alpha } => write!(f, "haze:{alpha}"),
            Self::Fog { alpha, radius } => write!(f, "fog:{alpha}:{radius}"),
            Self::Snow { density, brightness } => write!(f, "snow:{density}:{brightness}"),
            Self::SaltPepper { density } => write!(f, "salt_pepper:{density}"),
            Self::Blur { radius } => write!(f, "blur:{radius}"),
            Self::Fgsm { epsilon } => write!(f, "fgsm:{epsilon}"),
        }
    }
}

/// `name[:p1[:p2]]`, missing parameters take their defaults.
impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let params: Vec<&str> = parts.collect();
        let bad = || Error::BadParameters(format!("cannot parse perturbation {s:?}"));
        let num = |i: usize| -> Result<Option<f64>> {
            params.get(i).map(|p| p.parse::<f64>().map_err(|_| bad())).transpose()
        };
        let int = |i: usize| -> Result<Option<usize>> {
            params.get(i).map(|p| p.parse::<usize>().map_err(|_| bad())).transpose()
        };
        let mut p = Self::default_for(name)?;
        match &mut p {
            Self::Gaussian { sigma } => *sigma = num(0)?.unwrap_or(*sigma),
            Self::Haze { alpha } => *alpha = num(0)?.unwrap_or(*alpha),
            Self::Fog { alpha, radius } => {
                *alpha = num(0)?.unwrap_or(*alpha);
                *radius = int(1)?.unwrap_or(*radius);
            }
            Self::Snow { density, brightness } => {
                *density = num(0)?.unwrap_or(*density);
                *brightness = num(1)?.unwrap_or(*brightness);
            }
            Self::SaltPepper { density } => *density = num(0)?.unwrap_or(*density),
            Self::Blur { radius } => *radius = int(0)?.unwrap_or(*radius),
            Self::Fgsm { epsilon } => *epsilon = num(0)?.unwrap_or(*epsilon),
        }
        let arity = match p {
            Self::Fog { .. } | Self::Snow { .. } => 2,
            _ => 1,
        };
        if params.len() > arity {
            return Err(bad());
        }
        p.validate()?;
        Ok(p)
    }
}

/// Applies a non-gradient perturbation. Deterministic for a given seed; the
/// result is clamped to `[0, 1]`.
pub fn perturb(image: &ImageInput, kind: &Perturbation, seed: u64) -> Result<ImageInput> {
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    match *kind {
        Perturbation::Gaussian { sigma } => {
            let n = Normal::new(0.0, sigma).map_err(|e| Error::BadParameters(e.to_string()))?;
            for v in out.values.iter_mut() {
                *v += n.sample(&mut rng);
            }
        }
        Perturbation::Haze { alpha } => blend_white(&mut out, alpha),
        Perturbation::Fog { alpha, radius } => {
            blend_white(&mut out, alpha);
            out = box_blur(&out, radius);
        }
        Perturbation::Snow { density, brightness } => {
            for p in pick_pixels(image, density, &mut rng) {
                out.set_pixel(p, brightness);
            }
        }
        Perturbation::SaltPepper { density } => {
            let picked = pick_pixels(image, density, &mut rng);
            let half = picked.len() / 2;
            for (k, p) in picked.into_iter().enumerate() {
                out.set_pixel(p, if k < half { 0.0 } else { 1.0 });
            }
        }
        Perturbation::Blur { radius } => out = box_blur(image, radius),
        Perturbation::Fgsm { .. } => {
            return Err(Error::BadParameters(
                "fgsm needs a network and label; use fgsm()".into(),
            ))
        }
    }
    out.clamp();
    Ok(out)
}

/// Fast gradient sign step: `clamp(x + epsilon * sign(grad), 0, 1)`, with
/// `sign(0) = 0`.
pub fn fgsm(net: &Network, image: &ImageInput, label: usize, epsilon: f64) -> Result<ImageInput> {
    Perturbation::Fgsm { epsilon }.validate()?;
    let g = net.input_gradient(&image.values, label)?;
    let mut out = image.clone();
    for (v, gi) in out.values.iter_mut().zip(g) {
        if gi > 0.0 {
            *v += epsilon;
        } else if gi < 0.0 {
            *v -= epsilon;
        }
    }
    out.clamp();
    Ok(out)
}

/// Applies any kind, dispatching FGSM to [`fgsm`].
pub fn apply(net: &Network, image: &ImageInput, label: usize, kind: &Perturbation, seed: u64) -> Result<ImageInput> {
    match *kind {
        Perturbation::Fgsm { epsilon } => fgsm(net, image, label, epsilon),
        _ => perturb(image, kind, seed),
    }
}

fn blend_white(img: &mut ImageInput, alpha: f64) {
    if alpha == 0.0 {
        return;
    }
    for v in img.values.iter_mut() {
        *v = (1.0 - alpha) * *v + alpha;
    }
}

fn pick_pixels(img: &ImageInput, density: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = img.height * img.width;
    let k = ((density * n as f64).round() as usize).min(n);
    index::sample(rng, n, k).into_vec()
}

/// Mean over a `(2r-1) x (2r-1)` window, per channel, clamping coordinates.
fn box_blur(img: &ImageInput, radius: usize) -> ImageInput {
    if radius <= 1 {
        return img.clone();
    }
    let reach = (radius - 1) as isize;
    let side = (2 * reach + 1) as f64;
    let norm = side * side;
    let (h, w, c) = (img.height as isize, img.width as isize, img.channels);
    let mut out = img.clone();
    for r in 0..h {
        for col in 0..w {
            for ch in 0..c {
                let mut s = 0.0;
                for dr in -reach..=reach {
                    let rr = (r + dr).clamp(0, h - 1) as usize;
                    for dc in -reach..=reach {
                        let cc = (col + dc).clamp(0, w - 1) as usize;
                        s += img.get(rr, cc, ch);
                    }
                }
                out.values[img.offset(r as usize, col as usize, ch)] = s / norm;
            }
        }
    }
    out
}
