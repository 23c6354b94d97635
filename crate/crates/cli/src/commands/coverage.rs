use std::path::Path;

use depkit_core::coverage::{projection_coverage, propose_next, Catalog, DenominatorMode, SearchStrategy};
use depkit_core::dataset::load_jsonl;
use depkit_core::{AnalysisReport, CoverageLedger, Error, GsnTag, Result, ScenarioItem};
use serde_json::{json, Map, Value};

use super::{Context, Outcome};
use crate::args::{CatalogArgs, Denominator, Strategy};
use crate::io;

struct Loaded {
    catalog: Catalog,
    items: Vec<ScenarioItem>,
    inputs: Vec<depkit_core::report::InputFile>,
    mode: DenominatorMode,
}

fn load(args: &CatalogArgs) -> Result<Loaded> {
    let catalog = Catalog::load(&args.catalog)?;
    let mut inputs = vec![io::input("catalog", &args.catalog)?];
    let mut items = catalog.items.clone();
    if let Some(path) = &args.data {
        items.extend(items_from_tags(&catalog, path)?);
        inputs.push(io::input("data", path)?);
    }
    let mode = match args.denominator {
        Denominator::All => DenominatorMode::All,
        Denominator::Attainable => DenominatorMode::Attainable,
    };
    Ok(Loaded {
        catalog,
        items,
        inputs,
        mode,
    })
}

/// Scenario items from dataset `tags`; every sample must tag every category.
fn items_from_tags(catalog: &Catalog, path: &Path) -> Result<Vec<ScenarioItem>> {
    let cats = catalog.space.categories();
    load_jsonl(path)?
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let tags = s
                .tags
                .as_ref()
                .ok_or_else(|| Error::InvalidItem(format!("sample {i} has no tags")))?;
            let names = cats
                .iter()
                .map(|c| {
                    tags.get(&c.name)
                        .map(String::as_str)
                        .ok_or_else(|| Error::InvalidItem(format!("sample {i} lacks a {:?} tag", c.name)))
                })
                .collect::<Result<Vec<_>>>()?;
            catalog.space.item(&names)
        })
        .collect()
}

fn ledger_json(catalog: &Catalog, ledger: &CoverageLedger) -> Value {
    let cats = catalog.space.categories();
    let per_subset: Vec<Value> = ledger
        .per_subset()
        .into_iter()
        .map(|(subset, covered, total)| {
            json!({
                "categories": subset.iter().map(|&c| cats[c].name.as_str()).collect::<Vec<_>>(),
                "covered": covered,
                "total": total,
            })
        })
        .collect();
    json!({
        "covered": ledger.covered_count(),
        "denominator": ledger.denominator(),
        "fraction": ledger.ratio_fraction(),
        "ratio": ledger.ratio(),
        "per_subset": per_subset,
    })
}

fn named_item(catalog: &Catalog, item: &ScenarioItem) -> Value {
    let mut m = Map::new();
    for (c, v) in catalog.space.categories().iter().zip(catalog.space.value_names(item)) {
        m.insert(c.name.clone(), Value::String(v.into()));
    }
    Value::Object(m)
}

/// Applies `--min-coverage`; returns (gate json, failed).
fn gate(ctx: &Context, ledger: &CoverageLedger) -> Result<(Value, bool)> {
    match ctx.min_coverage {
        None => Ok((Value::Null, false)),
        Some(min) if !(0.0..=1.0).contains(&min) => {
            Err(Error::BadParameters(format!("--min-coverage {min} outside [0, 1]")))
        }
        Some(min) => {
            let passed = ledger.ratio() >= min;
            Ok((json!({"min_coverage": min, "passed": passed}), !passed))
        }
    }
}

fn mode_name(mode: DenominatorMode) -> &'static str {
    match mode {
        DenominatorMode::All => "all",
        DenominatorMode::Attainable => "attainable",
    }
}

pub fn compute(ctx: &Context, args: &CatalogArgs) -> Result<Outcome> {
    let l = load(args)?;
    let ledger = projection_coverage(&l.catalog.space, &l.items, args.k, &l.catalog.constraints, l.mode)?;
    log::info!("{ledger}");
    let (gate, failed) = gate(ctx, &ledger)?;
    let mut payload = ledger_json(&l.catalog, &ledger);
    payload["k"] = json!(args.k);
    payload["items"] = json!(l.items.len());
    payload["denominator_mode"] = json!(mode_name(l.mode));
    payload["gate"] = gate;
    Ok(Outcome {
        report: AnalysisReport::new("coverage compute", ctx.args.clone(), l.inputs, GsnTag::Sn1, payload),
        finding: failed,
    })
}

pub fn propose(ctx: &Context, args: &CatalogArgs, count: usize, strategy: Strategy) -> Result<Outcome> {
    let l = load(args)?;
    let space = &l.catalog.space;
    let mut ledger = projection_coverage(space, &l.items, args.k, &l.catalog.constraints, l.mode)?;
    let (gate, failed) = gate(ctx, &ledger)?;
    let before = ledger_json(&l.catalog, &ledger);
    let strategy = match strategy {
        Strategy::Exact => SearchStrategy::Exact,
        Strategy::Greedy => SearchStrategy::Greedy,
    };
    let proposals = propose_next(space, &ledger, &l.catalog.constraints, count, strategy)?;
    let mut listed = Vec::with_capacity(proposals.len());
    for p in &proposals {
        ledger.add(&p.item)?;
        listed.push(json!({
            "item": named_item(&l.catalog, &p.item),
            "values": space.value_names(&p.item),
            "gain": p.gain,
        }));
    }
    let payload = json!({
        "k": args.k,
        "items": l.items.len(),
        "denominator_mode": mode_name(l.mode),
        "strategy": match strategy { SearchStrategy::Exact => "exact", SearchStrategy::Greedy => "greedy" },
        "before": before,
        "proposals": listed,
        "after": ledger_json(&l.catalog, &ledger),
        "gate": gate,
    });
    Ok(Outcome {
        report: AnalysisReport::new("coverage propose", ctx.args.clone(), l.inputs, GsnTag::Sn2, payload),
        finding: failed,
    })
}
