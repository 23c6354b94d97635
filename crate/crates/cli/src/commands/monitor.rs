use std::path::{Path, PathBuf};

use depkit_core::dataset::load_jsonl;
use depkit_core::monitoring::{build_monitor, MonitorConfig};
use depkit_core::{AnalysisReport, Error, GsnTag, Monitor, MonitorVerdict, Network, Result};
use serde_json::json;

use super::{Context, Outcome};
use crate::io;

pub struct BuildArgs<'a> {
    pub model: &'a Path,
    pub data: &'a Path,
    pub layer: i64,
    pub gamma: usize,
    pub threshold: f64,
    pub out: &'a Path,
}

pub fn build(ctx: &Context, args: &BuildArgs) -> Result<Outcome> {
    let net = Network::load(args.model)?;
    let data = load_jsonl(args.data)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let config = MonitorConfig {
        layer: args.layer,
        gamma: args.gamma,
        threshold: args.threshold,
    };
    let mut monitor = build_monitor(&net, &data, &config)?;
    monitor.model_path = Some(std::path::absolute(args.model)?.display().to_string());
    io::write_atomic(args.out, monitor.to_json().as_bytes())?;

    let mut correct = 0;
    let mut supported = 0;
    for s in &data {
        let v = monitor.check(&net, &s.x)?;
        correct += usize::from(v.class() == s.label);
        supported += usize::from(!v.is_warning());
    }
    let payload = json!({
        "model_hash": monitor.model_hash(),
        "layer": monitor.layer(),
        "layer_selector": args.layer,
        "width": monitor.width(),
        "gamma": monitor.gamma(),
        "threshold": monitor.threshold(),
        "classes": monitor.classes(),
        "node_count": monitor.node_count(),
        "samples": data.len(),
        "correct": correct,
        "supported": supported,
        "stats": monitor.stats(),
    });
    let inputs = vec![io::input("model", args.model)?, io::input("data", args.data)?];
    Ok(Outcome {
        report: AnalysisReport::new("monitor build", ctx.args.clone(), inputs, GsnTag::Sn10, payload),
        finding: false,
    })
}

fn recorded_model(monitor: &Monitor, monitor_path: &Path) -> Result<PathBuf> {
    let p = monitor
        .model_path
        .as_ref()
        .ok_or_else(|| Error::BadParameters("monitor records no model path; pass --model".into()))?;
    let p = PathBuf::from(p);
    Ok(match monitor_path.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    })
}

pub fn check(
    ctx: &Context,
    monitor_path: &Path,
    model: Option<&Path>,
    input: Option<&Path>,
    data: Option<&Path>,
) -> Result<Outcome> {
    let monitor = Monitor::load(monitor_path)?;
    let model_path = match model {
        Some(m) => m.to_path_buf(),
        None => recorded_model(&monitor, monitor_path)?,
    };
    let net = Network::load(&model_path)?;
    monitor.bind(&net)?;
    let mut inputs = vec![io::input("monitor", monitor_path)?, io::input("model", &model_path)?];
    let samples: Vec<(Vec<f64>, Option<usize>)> = match (input, data) {
        (Some(p), _) => {
            inputs.push(io::input("input", p)?);
            let v = io::read_vector(p)?;
            vec![(v.x, v.label)]
        }
        (None, Some(p)) => {
            inputs.push(io::input("data", p)?);
            load_jsonl(p)?.into_iter().map(|s| (s.x, Some(s.label))).collect()
        }
        (None, None) => return Err(Error::BadParameters("give --input or --data".into())),
    };
    let mut results = Vec::with_capacity(samples.len());
    let mut warnings = 0;
    for (i, (x, label)) in samples.iter().enumerate() {
        let v = monitor.check(&net, x)?;
        if let MonitorVerdict::Warning { class, pattern } = &v {
            warnings += 1;
            log::warn!("input {i}: class {class} pattern {pattern} was never seen in training");
        }
        let mut r = serde_json::to_value(&v).expect("verdict serializes");
        r["index"] = json!(i);
        if let Some(l) = label {
            r["label"] = json!(l);
        }
        results.push(r);
    }
    let payload = json!({
        "model_hash": monitor.model_hash(),
        "layer": monitor.layer(),
        "gamma": monitor.gamma(),
        "checked": samples.len(),
        "warnings": warnings,
        "results": results,
    });
    Ok(Outcome {
        report: AnalysisReport::new("monitor check", ctx.args.clone(), inputs, GsnTag::Sn10, payload),
        finding: warnings > 0,
    })
}
