use std::collections::BTreeMap;

use super::IntervalBox;
use crate::{Affine, Error, Layer, Network, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    Active,
    Inactive,
}

/// Phase decisions keyed by `(layer index, neuron)`.
pub(crate) type PhaseFixes = BTreeMap<(usize, usize), Phase>;

/// Per-layer boxes plus pre-activation bounds of every ReLU layer, the latter
/// already intersected with any phase decision.
pub(crate) struct IntervalPass {
    pub layers: Vec<IntervalBox>,
    pub relu_pre: Vec<(usize, IntervalBox)>,
}

/// Box after each layer, in order. Sound: every concrete forward pass from a
/// point of `input` stays inside the returned boxes.
pub fn propagate_interval(net: &Network, input: &IntervalBox) -> Result<Vec<IntervalBox>> {
    if input.dim() != net.input_dim() {
        return Err(Error::dim("input box", net.input_dim(), input.dim()));
    }
    let pass = interval_pass(net, input, &PhaseFixes::new()).ok_or(Error::EmptyDomain)?;
    Ok(pass.layers)
}

pub(crate) fn affine_interval(a: &Affine, x: &IntervalBox) -> IntervalBox {
    let mut lo = Vec::with_capacity(a.out_dim());
    let mut hi = Vec::with_capacity(a.out_dim());
    for (row, b) in a.weights().iter().zip(a.bias()) {
        let (l, u) = row
            .iter()
            .zip(x.lower().iter().zip(x.upper()))
            .fold((*b, *b), |(l, u), (w, (xl, xu))| {
                if *w >= 0.0 {
                    (l + w * xl, u + w * xu)
                } else {
                    (l + w * xu, u + w * xl)
                }
            });
        lo.push(l);
        hi.push(u);
    }
    IntervalBox::from_parts(lo, hi)
}

pub(crate) fn interval_pass(net: &Network, input: &IntervalBox, fixes: &PhaseFixes) -> Option<IntervalPass> {
    let mut layers = Vec::with_capacity(net.layers().len());
    let mut relu_pre = Vec::new();
    let mut cur = input.clone();
    for (li, layer) in net.layers().iter().enumerate() {
        cur = match layer {
            Layer::Affine(a) => affine_interval(a, &cur),
            Layer::Relu => {
                let mut pre_lo = cur.lower().to_vec();
                let mut pre_hi = cur.upper().to_vec();
                for i in 0..pre_lo.len() {
                    match fixes.get(&(li, i)) {
                        Some(Phase::Active) => pre_lo[i] = pre_lo[i].max(0.0),
                        Some(Phase::Inactive) => pre_hi[i] = pre_hi[i].min(0.0),
                        None => {}
                    }
                    if pre_lo[i] > pre_hi[i] {
                        return None;
                    }
                }
                let post = IntervalBox::from_parts(
                    pre_lo.iter().map(|v| v.max(0.0)).collect(),
                    pre_hi.iter().map(|v| v.max(0.0)).collect(),
                );
                relu_pre.push((li, IntervalBox::from_parts(pre_lo, pre_hi)));
                post
            }
        };
        layers.push(cur.clone());
    }
    Some(IntervalPass { layers, relu_pre })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Network {
        Network::new(
            2,
            vec![
                Layer::Affine(Affine::new(vec![vec![1.0, -1.0], vec![1.0, 1.0]], vec![0.0, -1.0]).unwrap()),
                Layer::Relu,
                Layer::Affine(Affine::new(vec![vec![2.0, -1.0]], vec![0.5]).unwrap()),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_bounds() {
        let b = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let layers = propagate_interval(&net(), &b).unwrap();
        assert_eq!(layers[0].lower(), &[-1.0, -1.0]);
        assert_eq!(layers[0].upper(), &[1.0, 1.0]);
        assert_eq!(layers[1].lower(), &[0.0, 0.0]);
        assert_eq!(layers[1].upper(), &[1.0, 1.0]);
        assert_eq!(layers[2].lower(), &[-0.5]);
        assert_eq!(layers[2].upper(), &[2.5]);
    }

    #[test]
    fn point_box_matches_forward() {
        let x = [0.3, 0.9];
        let layers = propagate_interval(&net(), &IntervalBox::point(&x)).unwrap();
        let (y, trace) = net().forward(&x).unwrap();
        assert_eq!(layers[2].lower(), &y[..]);
        assert_eq!(layers[2].upper(), &y[..]);
        assert_eq!(layers[1].lower(), &trace.per_layer[1][..]);
    }

    #[test]
    fn phase_fix_can_empty_the_domain() {
        let b = IntervalBox::new(vec![0.0, 0.0], vec![0.2, 0.2]).unwrap();
        let mut fixes = PhaseFixes::new();
        // second neuron's pre-activation is at most -0.6
        fixes.insert((1, 1), Phase::Active);
        assert!(interval_pass(&net(), &b, &fixes).is_none());
        fixes.insert((1, 1), Phase::Inactive);
        fixes.insert((1, 0), Phase::Active);
        let pass = interval_pass(&net(), &b, &fixes).unwrap();
        assert_eq!(pass.relu_pre[0].1.lower(), &[0.0, -1.0]);
    }

    #[test]
    fn rejects_wrong_dimension() {
        let b = IntervalBox::new(vec![0.0], vec![1.0]).unwrap();
        assert!(propagate_interval(&net(), &b).is_err());
    }
}
