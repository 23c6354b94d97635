use std::path::Path;

use depkit_core::dataset::load_jsonl;
use depkit_core::metrics::{heatmap_pgm, occlusion_sensitivity, perturbation_loss, OcclusionOptions};
use depkit_core::{AnalysisReport, Error, GsnTag, ImageInput, Network, Perturbation, Result};
use serde_json::json;

use super::{Context, Outcome};
use crate::args::{OcclusionArgs, PerturbArgs};
use crate::io;

fn shape_for(
    net: &Network,
    flag: Option<&str>,
    from_file: Option<(usize, usize, usize)>,
) -> Result<(usize, usize, usize)> {
    let shape = match (flag, from_file) {
        (Some(s), _) => io::parse_shape(s)?,
        (None, Some(s)) => s,
        (None, None) => ImageInput::infer_shape(net.input_dim()),
    };
    if shape.0 * shape.1 * shape.2 != net.input_dim() {
        return Err(Error::BadParameters(format!(
            "shape {}x{}x{} does not match model input size {}",
            shape.0,
            shape.1,
            shape.2,
            net.input_dim()
        )));
    }
    Ok(shape)
}

fn image(x: Vec<f64>, shape: (usize, usize, usize)) -> Result<ImageInput> {
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        log::warn!("input values outside [0, 1] are clamped");
    }
    ImageInput::new(x, shape)
}

pub fn perturb(ctx: &Context, args: &PerturbArgs) -> Result<Outcome> {
    let net = Network::load(&args.model)?;
    let samples = load_jsonl(&args.data)?;
    let shape = shape_for(&net, args.shape.as_deref(), None)?;
    let kinds: Vec<Perturbation> = if args.kinds.is_empty() {
        Perturbation::NAMES
            .iter()
            .map(|n| Perturbation::default_for(n))
            .collect::<Result<_>>()?
    } else {
        args.kinds.iter().map(|k| k.parse()).collect::<Result<_>>()?
    };
    let data = samples
        .into_iter()
        .map(|s| Ok((image(s.x, shape)?, s.label)))
        .collect::<Result<Vec<_>>>()?;
    let report = perturbation_loss(&net, &data, &kinds, ctx.seed)?;
    for k in &report.kinds {
        log::info!("{}: average {:.4}, max {:.4}", k.kind, k.average_loss, k.max_loss);
    }
    let mut payload = serde_json::to_value(&report).expect("report serializes");
    payload["shape"] = json!([shape.0, shape.1, shape.2]);
    payload["seed"] = json!(ctx.seed);
    let inputs = vec![io::input("model", &args.model)?, io::input("data", &args.data)?];
    Ok(Outcome {
        report: AnalysisReport::new("perturb", ctx.args.clone(), inputs, GsnTag::Sn8, payload),
        finding: false,
    })
}

pub fn occlusion(ctx: &Context, args: &OcclusionArgs) -> Result<Outcome> {
    let net = Network::load(&args.model)?;
    let v = io::read_vector(&args.input)?;
    let shape = shape_for(&net, args.shape.as_deref(), v.shape)?;
    let img = image(v.x, shape)?;
    let label = match args.label.or(v.label) {
        Some(l) => l,
        None => net.predict(img.values())?,
    };
    let defaults = OcclusionOptions::default_for(&img);
    let opts = OcclusionOptions {
        patch: args.patch.unwrap_or(defaults.patch),
        stride: args.stride.unwrap_or(defaults.stride),
        patch_value: args.patch_value.unwrap_or(defaults.patch_value),
    };
    let map = occlusion_sensitivity(&net, &img, label, &opts)?;
    if let Some(p) = &args.pgm {
        write_pgm(p, &map.heatmap)?;
    }
    let mut payload = serde_json::to_value(&map).expect("map serializes");
    payload["label"] = json!(label);
    payload["probability"] = json!(net.probabilities(img.values())?[label]);
    payload["shape"] = json!([shape.0, shape.1, shape.2]);
    let inputs = vec![io::input("model", &args.model)?, io::input("input", &args.input)?];
    Ok(Outcome {
        report: AnalysisReport::new("occlusion", ctx.args.clone(), inputs, GsnTag::Sn6, payload),
        finding: false,
    })
}

fn write_pgm(path: &Path, heatmap: &[Vec<f64>]) -> Result<()> {
    io::write_atomic(path, &heatmap_pgm(heatmap))
}
