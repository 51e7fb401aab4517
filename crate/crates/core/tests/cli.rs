mod common;

use std::path::Path;
use std::process::{Command, Output};

use rzones::cfe::{explain_field, global_relevance, CfeSettings};
use rzones::cli::{emit_plots, run_pipeline, Manifest, PlotSettings, RunConfig};
use rzones::response::{field_curves, read_curves_csv};
use rzones::zones::ZoneModel;

fn rz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rz"))
        .args(args)
        .env("RZ_THREADS", "1")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = rz(args);
    assert!(
        out.status.success(),
        "rz {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn subcommands_chain_on_a_tiny_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--seed", "3", "--size", "14", "--out-field", &p(d, "field.csv"), "--out-yield", &p(d, "yield.csv"), "--out-classes", &p(d, "classes.csv")]);
    ok(&["train", "--field", &p(d, "field.csv"), "--yield", &p(d, "yield.csv"), "--out", &p(d, "model.json"), "--epochs", "3", "--hidden", "8", "--optimizer", "adam", "--lr", "0.003"]);
    ok(&["curves", "--model", &p(d, "model.json"), "--field", &p(d, "field.csv"), "--out", &p(d, "curves.csv"), "--steps", "11"]);
    ok(&["fpca", "--curves", &p(d, "curves.csv"), "--out", &p(d, "fpca.json")]);
    ok(&["cluster", "--fpca", &p(d, "fpca.json"), "--curves", &p(d, "curves.csv"), "--zones", "2", "--out", &p(d, "zones.json"), "--map", &p(d, "zones.pgm"), "--field", &p(d, "field.csv")]);
    ok(&["explain", "--model", &p(d, "model.json"), "--fpca", &p(d, "fpca.json"), "--zones", &p(d, "zones.json"), "--field", &p(d, "field.csv"), "--pop", "4", "--gens", "2", "--epsilon", "0.6", "--sites-per-zone", "2", "--out", &p(d, "cfe.jsonl")]);
    ok(&["report", "--cfe", &p(d, "cfe.jsonl"), "--field", &p(d, "field.csv"), "--zones", &p(d, "zones.json"), "--out", &p(d, "relevance.json"), "--csv", &p(d, "relevance.csv"), "--plots", &p(d, "plots"), "--curves", &p(d, "curves.csv")]);

    let curves = read_curves_csv(d.join("curves.csv")).unwrap();
    assert_eq!(curves.grid.steps, 11);
    let zones = ZoneModel::load(d.join("zones.json")).unwrap();
    assert_eq!(zones.c, 2);
    assert_eq!(zones.sites.len(), curves.curves.len());
    let cfe = std::fs::read_to_string(d.join("cfe.jsonl")).unwrap();
    assert!((1..=4).contains(&cfe.lines().count()));
    let csv = std::fs::read_to_string(d.join("relevance.csv")).unwrap();
    assert!(csv.starts_with("zone,explained,success_rate,"));
    assert!(std::fs::read(d.join("zones.pgm")).unwrap().starts_with(b"P5\n14 14\n255\n"));
    assert!(d.join("plots/relevance_bars.csv").exists());
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = p(dir.path(), "nope.csv");
    let out = rz(&["fpca", "--curves", &missing, "--out", &p(dir.path(), "f.json")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    let out = rz(&["cluster", "--fpca", "a", "--curves", "b", "--out", "c", "--map", "m.pgm"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(rz(&["frobnicate"]).status.code(), Some(2));
    assert!(rz(&["--help"]).status.success());
}

fn small_config(dir: &Path) -> RunConfig {
    let text = r#"{
        "synthetic": { "seed": 5, "height": 14, "width": 14 },
        "surrogate": { "hidden": [8], "train": { "epochs": 2 } },
        "grid": { "steps": 9 },
        "zones": { "zones": 2 },
        "cfe": { "pop_size": 4, "generations": 2, "epsilon": 0.6, "sites_per_zone": 2 },
        "plots": { "curves_per_zone": 5 }
    }"#;
    let path = dir.join("cfg.json");
    std::fs::write(&path, text).unwrap();
    RunConfig::load(&path).unwrap()
}

#[test]
fn run_is_reproducible_and_records_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.output_dir = dir.path().join("a");
    let a = run_pipeline(&cfg).unwrap();
    cfg.output_dir = dir.path().join("b");
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a.manifest.hashes(), b.manifest.hashes());
    let stages: Vec<&str> = a.manifest.artifacts.iter().map(|e| e.stage.as_str()).collect();
    assert_eq!(stages, ["ingest", "train", "curves", "fpca", "cluster", "explain", "report"]);
    let on_disk: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk.hashes(), a.manifest.hashes());

    // the binary gives the same bytes
    let out = p(dir.path(), "c");
    ok(&["run", "--config", &p(dir.path(), "cfg.json"), "--out", &out]);
    let c: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/manifest.json")).unwrap()).unwrap();
    assert_eq!(c.hashes(), a.manifest.hashes());
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{ "synthetic": {}, "colour": "red" }"#).unwrap();
    assert!(RunConfig::load(&path).is_err());
    let mut cfg = small_config(dir.path());
    cfg.cfe.epsilon = 0.4;
    cfg.output_dir = dir.path().join("never");
    assert!(run_pipeline(&cfg).is_err());
    assert!(!dir.path().join("never/manifest.json").exists());
}

#[test]
fn plot_exports_cover_every_zone() {
    let t = common::toy(12, 2);
    let curves = field_curves(&t.model, &t.field, &t.grid).unwrap();
    let settings = CfeSettings { pop_size: 8, generations: 5, sites_per_zone: Some(2), ..CfeSettings::default() };
    let results = explain_field(&t.field, &t.model, &t.grid, &t.fpca, &t.zones, &settings).unwrap();
    let report = global_relevance(&results, &t.names, t.zones.c);
    let dir = tempfile::tempdir().unwrap();
    // more curves requested than any zone holds: every member is exported
    let plots = PlotSettings { curves_per_zone: 1000, ..PlotSettings::default() };
    let written = emit_plots(dir.path(), &t.field, &curves, &t.zones, &report, &plots).unwrap();
    assert_eq!(written.len(), t.zones.c + 2);
    let mut total = 0;
    for z in 0..t.zones.c {
        total += read_curves_csv(dir.path().join(format!("zone_{z}_curves.csv"))).unwrap().curves.len();
    }
    assert_eq!(total, curves.curves.len());

    let few = PlotSettings { curves_per_zone: 3, seed: 4, ..PlotSettings::default() };
    let again = tempfile::tempdir().unwrap();
    emit_plots(dir.path(), &t.field, &curves, &t.zones, &report, &few).unwrap();
    emit_plots(again.path(), &t.field, &curves, &t.zones, &report, &few).unwrap();
    for name in &written {
        assert_eq!(std::fs::read(dir.path().join(name)).unwrap(), std::fs::read(again.path().join(name)).unwrap());
    }
    assert_eq!(read_curves_csv(dir.path().join("zone_0_curves.csv")).unwrap().curves.len(), 3);
}
