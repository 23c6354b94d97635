use depkit_core::verification::{
    propagate_interval, propagate_octagon, tighten_box, verify as run_verify, DomainKind, Octagon, ProblemFile,
    VerifyOptions,
};
use depkit_core::{AnalysisReport, GsnTag, IntervalBox, Network, Result, Verdict, VerificationProblem};
use serde_json::{json, Value};

use super::{Context, Outcome};
use crate::args::{Domain, VerifyArgs};
use crate::io;

/// Bounds of every layer over the (tightened) input region.
fn layer_bounds(net: &Network, p: &VerificationProblem, domain: DomainKind) -> Result<Vec<Value>> {
    let Some(b) = tighten_box(&p.input_box, &p.input_constraints)? else {
        return Ok(vec![]);
    };
    let boxes: Vec<IntervalBox> = match domain {
        DomainKind::Interval => propagate_interval(net, &b)?,
        DomainKind::Octagon => propagate_octagon(net, &Octagon::from_box(&b))?
            .iter()
            .map(Octagon::interval_box)
            .collect(),
    };
    Ok(boxes
        .iter()
        .zip(net.layers())
        .enumerate()
        .map(|(i, (b, layer))| {
            json!({
                "layer": i,
                "kind": layer.kind_name(),
                "lower": b.lower(),
                "upper": b.upper(),
            })
        })
        .collect())
}

pub fn verify(ctx: &Context, args: &VerifyArgs) -> Result<Outcome> {
    let file = ProblemFile::load(&args.problem)?;
    let model_path = file.model_path(&args.problem);
    let net = Network::load(&model_path)?;
    let problems = file.instantiate(&net)?;
    let domain = match args.domain {
        Domain::Interval => DomainKind::Interval,
        Domain::Octagon => DomainKind::Octagon,
    };
    let opts = VerifyOptions {
        domain,
        split_budget: args.budget,
        attempts: args.attempts,
        seed: ctx.seed,
    };
    let mut cases = Vec::with_capacity(problems.len());
    let mut witness = Value::Null;
    let (mut any_cex, mut any_unknown) = (false, false);
    for (i, p) in problems.iter().enumerate() {
        let out = run_verify(p, &opts)?;
        log::info!("case {i}: {} after {} nodes", out.verdict.name(), out.stats.nodes);
        match &out.verdict {
            Verdict::Counterexample { input, output } => {
                if !any_cex {
                    witness = json!({"case": i, "input": input, "output": output});
                }
                any_cex = true;
            }
            Verdict::Unknown { .. } => any_unknown = true,
            Verdict::Proved { .. } => {}
        }
        cases.push(json!({
            "case": i,
            "result": out.verdict,
            "stats": out.stats,
            "output_bounds": out.output_bounds,
        }));
    }
    let verdict = if any_cex {
        "counterexample"
    } else if any_unknown {
        "unknown"
    } else {
        "proved"
    };
    let payload = json!({
        "verdict": verdict,
        "domain": match domain { DomainKind::Interval => "interval", DomainKind::Octagon => "octagon" },
        "budget": args.budget,
        "attempts": args.attempts,
        "cases": cases,
        "witness": witness,
        "layer_bounds": layer_bounds(&net, &problems[0], domain)?,
    });
    let inputs = vec![io::input("problem", &args.problem)?, io::input("model", &model_path)?];
    Ok(Outcome {
        report: AnalysisReport::new("verify", ctx.args.clone(), inputs, GsnTag::Sn9, payload),
        finding: verdict != "proved",
    })
}
