mod common;

use common::{depkit, p, violations, Workspace};
use depkit_core::report::canonical_json;
use depkit_core::{Monitor, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn assert_valid(report: &Value) {
    let v = violations(report);
    assert!(v.is_empty(), "{v:#?}");
    assert_eq!(
        report["payload_sha256"],
        depkit_core::report::sha256_hex(canonical_json(&report["payload"]).as_bytes())
    );
}

#[test]
fn coverage_compute_reports_the_scenario_denominator() {
    let ws = Workspace::new();
    let r = depkit(&["coverage", "compute", "--catalog", &p(&ws.files.catalog), "--k", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = r.report();
    assert_valid(&report);
    let payload = &report["payload"];
    assert_eq!(payload["denominator"], 57);
    assert_eq!(report["gsn_tag"], "Sn1");
    let covered = payload["covered"].as_u64().unwrap();
    assert_eq!(payload["fraction"], format!("{covered}/57"));

    let r = depkit(&["coverage", "compute", "--catalog", &p(&ws.files.catalog), "--k", "5"]);
    assert_eq!(r.report()["payload"]["denominator"], 72);

    let r = depkit(&[
        "coverage",
        "compute",
        "--catalog",
        &p(&ws.files.catalog),
        "--denominator",
        "attainable",
    ]);
    assert_eq!(r.report()["payload"]["denominator"], 56);
}

#[test]
fn min_coverage_is_a_gate() {
    let ws = Workspace::new();
    let cat = p(&ws.files.catalog);
    let fail = depkit(&["coverage", "compute", "--catalog", &cat, "--min-coverage", "0.95"]);
    assert_eq!(fail.code, 1);
    assert_eq!(fail.report()["payload"]["gate"]["passed"], false);
    let pass = depkit(&["coverage", "compute", "--catalog", &cat, "--min-coverage", "0.1"]);
    assert_eq!(pass.code, 0);
    assert_eq!(pass.report()["payload"]["gate"]["passed"], true);
    let bad = depkit(&["coverage", "compute", "--catalog", &cat, "--min-coverage", "2"]);
    assert_eq!(bad.code, 2);
    assert_eq!(bad.error()["error"], "BadParameters");
}

#[test]
fn proposals_respect_the_constraint() {
    let ws = Workspace::new();
    let r = depkit(&[
        "coverage",
        "propose",
        "--catalog",
        &p(&ws.files.catalog),
        "--count",
        "20",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = r.report();
    assert_valid(&report);
    assert_eq!(report["gsn_tag"], "Sn2");
    let payload = &report["payload"];
    for prop in payload["proposals"].as_array().unwrap() {
        assert!(!(prop["item"]["weather"] == "sunny" && prop["item"]["daytime"] == "night"));
        assert!(prop["gain"].as_u64().unwrap() > 0);
    }
    // the only unreachable pair is sunny-night
    assert_eq!(payload["after"]["covered"], 56);
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let ws = Workspace::new();
    for domain in ["interval", "octagon"] {
        let r = depkit(&["verify", "--problem", &p(&ws.files.safe_problem), "--domain", domain]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let report = r.report();
        assert_valid(&report);
        assert_eq!(report["payload"]["verdict"], "proved");
        assert_eq!(report["payload"]["witness"], Value::Null);
        assert_eq!(report["payload"]["layer_bounds"].as_array().unwrap().len(), 3);

        let r = depkit(&["verify", "--problem", &p(&ws.files.buggy_problem), "--domain", domain]);
        assert_eq!(r.code, 1, "{}", r.stderr);
        let report = r.report();
        assert_valid(&report);
        let payload = &report["payload"];
        assert_eq!(payload["verdict"], "counterexample");
        let input: Vec<f64> = serde_json::from_value(payload["witness"]["input"].clone()).unwrap();
        let net = Network::load(&ws.files.buggy_model).unwrap();
        assert_eq!(depkit_core::argmax(&net.logits(&input).unwrap()), 9);
        assert!(input[8] <= -1.0 && input[9] <= -1.0);
    }
}

#[test]
fn verify_without_search_is_unknown() {
    let ws = Workspace::new();
    let r = depkit(&[
        "verify",
        "--problem",
        &p(&ws.files.buggy_problem),
        "--budget",
        "0",
        "--attempts",
        "0",
    ]);
    let report = r.report();
    assert_valid(&report);
    let v = report["payload"]["verdict"].as_str().unwrap().to_string();
    assert!(v == "unknown" || v == "counterexample", "{v}");
    assert_eq!(r.code, 1);
}

#[test]
fn monitor_build_and_check() {
    let ws = Workspace::new();
    let mon = ws.path("mon.json");
    let built = depkit(&[
        "monitor",
        "build",
        "--model",
        &p(&ws.files.sign_model),
        "--data",
        &p(&ws.files.sign_data),
        "--layer",
        "-1",
        "--gamma",
        "0",
        "--out",
        &p(&mon),
    ]);
    assert_eq!(built.code, 0, "{}", built.stderr);
    let report = built.report();
    assert_valid(&report);
    assert_eq!(report["payload"]["supported"], 40);
    assert_eq!(report["payload"]["correct"], 40);

    let ok = depkit(&[
        "monitor",
        "check",
        "--monitor",
        &p(&mon),
        "--input",
        &p(&ws.files.sign_input),
    ]);
    assert_eq!(ok.code, 0, "{}", ok.stderr);
    let report = ok.report();
    assert_valid(&report);
    assert_eq!(report["payload"]["results"][0]["verdict"], "supported");

    let batch = depkit(&[
        "monitor",
        "check",
        "--monitor",
        &p(&mon),
        "--data",
        &p(&ws.files.sign_data),
    ]);
    assert_eq!(batch.code, 0);
    assert_eq!(batch.report()["payload"]["checked"], 40);

    // find an input the monitor has not seen
    let net = Network::load(&ws.files.sign_model).unwrap();
    let monitor = Monitor::load(&mon).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = (0..1000)
        .map(|_| {
            (0..net.input_dim())
                .map(|_| rng.random_range(0.0..1.0))
                .collect::<Vec<f64>>()
        })
        .find(|x| monitor.check(&net, x).unwrap().is_warning())
        .expect("some unseen pattern");
    let odd = ws.path("odd.json");
    std::fs::write(&odd, serde_json::to_string(&x).unwrap()).unwrap();
    let warn = depkit(&["monitor", "check", "--monitor", &p(&mon), "--input", &p(&odd)]);
    assert_eq!(warn.code, 1);
    let report = warn.report();
    assert_valid(&report);
    assert_eq!(report["payload"]["warnings"], 1);
    assert_eq!(report["payload"]["results"][0]["verdict"], "warning");

    // a different model is refused
    let other = depkit(&[
        "monitor",
        "check",
        "--monitor",
        &p(&mon),
        "--model",
        &p(&ws.files.safe_model),
        "--input",
        &p(&odd),
    ]);
    assert_eq!(other.code, 2);
}

#[test]
fn monitor_build_needs_an_output_path() {
    let ws = Workspace::new();
    let r = depkit(&[
        "monitor",
        "build",
        "--model",
        &p(&ws.files.sign_model),
        "--data",
        &p(&ws.files.sign_data),
    ]);
    assert_eq!(r.code, 2);
    assert_eq!(r.error()["error"], "BadParameters");
}

#[test]
fn perturb_payload_is_reproducible() {
    let ws = Workspace::new();
    let args = |seed: &str, jobs: &str| {
        vec![
            "perturb".to_string(),
            "--model".into(),
            p(&ws.files.sign_model),
            "--data".into(),
            p(&ws.files.sign_data),
            "--kinds".into(),
            "gaussian,haze,fog,snow,salt_pepper,blur,fgsm".into(),
            "--seed".into(),
            seed.into(),
            "--jobs".into(),
            jobs.into(),
        ]
    };
    let a = depkit(&args("7", "1"));
    let b = depkit(&args("7", "4"));
    assert_eq!(a.code, 0, "{}", a.stderr);
    let (ra, rb) = (a.report(), b.report());
    assert_valid(&ra);
    assert_eq!(ra["gsn_tag"], "Sn8");
    assert_eq!(canonical_json(&ra["payload"]), canonical_json(&rb["payload"]));
    assert_eq!(ra["payload"]["kinds"].as_array().unwrap().len(), 7);
    let c = depkit(&args("8", "1")).report();
    assert_ne!(ra["payload"]["kinds"][0], c["payload"]["kinds"][0]);
}

#[test]
fn occlusion_writes_heatmap_and_image() {
    let ws = Workspace::new();
    let out = ws.path("occ.json");
    let pgm = ws.path("occ.pgm");
    let r = depkit(&[
        "occlusion",
        "--model",
        &p(&ws.files.sign_model),
        "--input",
        &p(&ws.files.sign_input),
        "--patch",
        "2",
        "--stride",
        "2",
        "--pgm",
        &p(&pgm),
        "--out",
        &p(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_valid(&report);
    assert_eq!(report["gsn_tag"], "Sn6");
    let heat = report["payload"]["heatmap"].as_array().unwrap();
    assert_eq!((heat.len(), heat[0].as_array().unwrap().len()), (4, 4));
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n4 4\n255\n"));
}

#[test]
fn errors_exit_two_with_json() {
    let ws = Workspace::new();
    let missing = depkit(&["verify", "--problem", "/nonexistent/p.json"]);
    assert_eq!(missing.code, 2);
    assert_eq!(missing.error()["error"], "Io");

    let usage = depkit(&["coverage", "compute", "--catalog", &p(&ws.files.catalog), "--bogus"]);
    assert_eq!(usage.code, 2);
    assert_eq!(usage.error()["error"], "Usage");

    let bad = ws.path("bad.json");
    std::fs::write(&bad, r#"{"input_dim":1,"layers":[]}"#).unwrap();
    let r = depkit(&["occlusion", "--model", &p(&bad), "--input", &p(&ws.files.sign_input)]);
    assert_eq!(r.code, 2);
    assert_eq!(r.error()["error"], "MalformedModel");

    let r = depkit(&[
        "perturb",
        "--model",
        &p(&ws.files.sign_model),
        "--data",
        &p(&ws.files.sign_data),
        "--kinds",
        "rain",
    ]);
    assert_eq!(r.code, 2);

    let r = depkit(&[
        "perturb",
        "--model",
        &p(&ws.files.sign_model),
        "--data",
        &p(&ws.files.sign_data),
        "--jobs",
        "0",
    ]);
    assert_eq!(r.code, 2);

    assert_eq!(depkit(&["--help"]).code, 0);
    assert_eq!(depkit::<&str>(&[]).code, 2);
}
