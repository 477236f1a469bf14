use std::fs;

use confpair::chart::Grid;
use confpair::cli::gallery::{catalog, find, manifests};
use confpair::cli::manifest::{Analysis, Manifest};
use confpair::cli::spec::{build_jet, build_map, tabulate, AmbientSpec, ExprSpec, ImmersionSpec, JetMode};
use confpair::cli::{canonical_bytes, main_with, run_manifest, RunOptions};
use confpair::error::Error;
use serde_json::{json, Value};

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut full = vec!["confpair"];
    full.extend_from_slice(args);
    let code = main_with(full, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn report(name: &str) -> (i32, Value) {
    let (code, out) = run(&["gallery", "run", name]);
    (code, serde_json::from_str(&out).unwrap())
}

fn write_manifest(dir: &tempfile::TempDir, name: &str, v: &Value) -> String {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn cylinder_manifest() -> Value {
    json!({
        "analysis": {
            "kind": "single",
            "n": 3,
            "p": 1,
            "immersion": { "builtin": "cylinder", "params": { "n": 3, "radius": 1.0 } },
            "grid": { "center": [0.1, 0.2, 0.3], "half": 0.1, "count": 2 },
            "nullity": [1]
        },
        "expect": { "nu_1": 2 }
    })
}

#[test]
fn catalog_covers_the_required_builtins() {
    let cat = catalog();
    assert!(cat.len() >= 8);
    for name in ["plane", "sphere", "cylinder", "cone-over-sphere", "torus", "inversion", "psi-lift", "psi-line"] {
        assert!(cat.iter().any(|e| e.name == name), "{name} missing");
    }
}

#[test]
fn catalog_closed_form_and_fd_jets_agree() {
    for e in catalog() {
        let grid = e.example_grid.build("grid").unwrap();
        let cf = build_jet(&e.example, "example", &grid).unwrap();
        let fd_spec = ImmersionSpec {
            jets: JetMode::FiniteDifference(1e-3),
            ..e.example.clone()
        };
        let fd = build_jet(&fd_spec, "example", &grid).unwrap();
        let n = grid.dim();
        let mut worst: f64 = 0.0;
        for k in 0..grid.len() {
            worst = worst.max((cf.position(k) - fd.position(k)).amax());
            worst = worst.max((cf.d1(k) - fd.d1(k)).amax());
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((cf.d2(k, i, j) - fd.d2(k, i, j)).amax());
                }
            }
        }
        assert!(worst < 1e-4, "{}: closed form vs FD {worst:e}", e.name);
    }
}

#[test]
fn wrappers_compose() {
    let spec = ImmersionSpec::wrap(
        "inversion",
        json!({ "center": [2.5, 0.3, 0.4, -0.6], "radius": 1.3 }),
        ImmersionSpec::builtin("cylinder", json!({ "n": 3, "radius": 1.0 })),
    );
    let grid = Grid::cube(&[0.1, 0.2, 0.3], 0.1, 2);
    let map = build_map(&spec, "f", &grid).unwrap();
    assert_eq!(map.domain_dim(), 3);
    assert_eq!(map.ambient().dim(), 4);
}

#[test]
fn unknown_builtin_and_bad_params_are_field_errors() {
    let grid = Grid::cube(&[0.1, 0.2], 0.1, 2);
    match build_map(&ImmersionSpec::builtin("klein-bottle", json!({})), "analysis.f", &grid) {
        Err(Error::Manifest { field, .. }) => assert_eq!(field, "analysis.f.builtin"),
        other => panic!("{other:?}"),
    }
    match build_map(&ImmersionSpec::builtin("sphere", json!({ "n": 2, "radius": 1.0, "colour": 3 })), "analysis.f", &grid) {
        Err(Error::Manifest { field, message }) => {
            assert!(field.starts_with("analysis.f"), "{field}");
            assert!(message.contains("colour"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn gallery_list_succeeds() {
    let (code, out) = run(&["gallery", "list"]);
    assert_eq!(code, 0);
    for e in catalog() {
        assert!(out.contains(e.name));
    }
    for m in manifests() {
        assert!(out.contains(m.name.as_deref().unwrap()));
    }
}

#[test]
fn psi_invariants_pass_at_machine_precision() {
    let (code, r) = report("psi-invariants");
    assert_eq!(code, 0);
    let checks = r["checks"].as_array().unwrap();
    let identities: Vec<&Value> = checks.iter().filter(|c| c["name"].as_str().unwrap().starts_with("psi_")).collect();
    assert_eq!(identities.len(), 4);
    for c in identities {
        assert!(c["value"].as_f64().unwrap() <= 1e-12);
        assert_eq!(c["threshold"].as_f64().unwrap(), 1e-12);
    }
    assert!(checks.iter().all(|c| c["pass"].as_bool().unwrap()));
}

#[test]
fn cylinder_nullity_is_n_minus_one() {
    let (code, r) = report("cylinder-nullity");
    assert_eq!(code, 0);
    assert_eq!(r["results"]["facts"]["nu_1"], json!(2));
    assert_eq!(r["results"]["facts"]["conformally_ruled"], json!(1));
}

#[test]
fn missing_q_is_a_schema_error() {
    let text = r#"{
  "analysis": {
    "kind": "pair",
    "n": 2,
    "p": 1,
    "f": { "builtin": "plane", "params": { "n": 2 } },
    "g": { "builtin": "cylinder", "params": { "n": 2, "radius": 1.0 } },
    "grid": { "center": [0.1, 0.2], "half": 0.1, "count": 2 }
  }
}"#;
    match Manifest::from_json(text) {
        Err(Error::Manifest { field, message }) => {
            assert!(field.starts_with("line "), "{field}");
            assert!(message.contains("missing field `q`"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let (code, _) = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn unknown_fields_and_bad_tolerance_are_rejected() {
    let mut v = cylinder_manifest();
    v["analysis"]["colour"] = json!("red");
    let err = Manifest::from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("colour"), "{err}");

    let mut v = cylinder_manifest();
    v["tolerance"] = json!(1e-2);
    match Manifest::from_json(&v.to_string()) {
        Err(Error::Manifest { field, .. }) => assert_eq!(field, "tolerance"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn exit_codes_follow_check_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_manifest(&dir, "good.json", &cylinder_manifest());
    assert_eq!(run(&["analyze", &good]).0, 0);

    let mut v = cylinder_manifest();
    v["expect"]["nu_1"] = json!(3);
    let bad = write_manifest(&dir, "bad.json", &v);
    let (code, out) = run(&["analyze", &bad]);
    assert_eq!(code, 2);
    let r: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["pass"], json!(false));

    assert_eq!(run(&["analyze", "/nonexistent/manifest.json"]).0, 1);
    assert_eq!(run(&["gallery", "run", "no-such-manifest"]).0, 1);
}

#[test]
fn flags_override_and_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(&dir, "m.json", &cylinder_manifest());
    let csv = dir.path().join("rows.csv");
    let rep = dir.path().join("report.json");
    let (code, _) = run(&[
        "analyze",
        &m,
        "--tolerance",
        "1e-10",
        "--seed",
        "7",
        "--csv-dump",
        csv.to_str().unwrap(),
        "--report",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(r["provenance"]["tolerance"], json!(1e-10));
    assert_eq!(r["provenance"]["seed"], json!(7));
    assert_eq!(r["provenance"]["manifest_sha256"].as_str().unwrap().len(), 64);
    let rows = fs::read_to_string(&csv).unwrap();
    let mut lines = rows.lines();
    assert!(lines.next().unwrap().starts_with("point,x1,x2,x3"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn region_flag_restricts_pair_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let (code, _) = run(&["gallery", "run", "flat-pair", "--region", "0", "--csv-dump", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 9);
    let (_, _) = run(&["gallery", "run", "flat-pair", "--region", "5", "--csv-dump", csv.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1);
}

#[test]
fn expression_and_table_specs_match_builtins() {
    let grid = Grid::cube(&[0.1, 0.2, 0.3], 0.1, 2);
    let builtin = ImmersionSpec::builtin("cylinder", json!({ "n": 3, "radius": 1.0 }));
    let expr = ImmersionSpec {
        expr: Some(ExprSpec {
            vars: 3,
            ambient: AmbientSpec::Euclidean(4),
            components: vec!["cos(x1)".into(), "sin(x1)".into(), "x2".into(), "x3".into()],
        }),
        ..ImmersionSpec::default()
    };
    let map = build_map(&builtin, "f", &grid).unwrap();
    let table = ImmersionSpec {
        table: Some(tabulate(map.as_ref(), &grid, AmbientSpec::Euclidean(4)).unwrap()),
        ..ImmersionSpec::default()
    };
    // the table survives a JSON round trip
    let table: ImmersionSpec = serde_json::from_str(&serde_json::to_string(&table).unwrap()).unwrap();
    let reference = build_jet(&builtin, "f", &grid).unwrap();
    for spec in [&expr, &table] {
        let j = build_jet(spec, "f", &grid).unwrap();
        for k in 0..grid.len() {
            assert!((j.position(k) - reference.position(k)).amax() < 1e-14);
            assert!((j.d1(k) - reference.d1(k)).amax() < 1e-14);
            for i in 0..3 {
                for l in 0..3 {
                    assert!((j.d2(k, i, l) - reference.d2(k, i, l)).amax() < 1e-14);
                    for m in 0..3 {
                        assert!((j.d3(k, i, l, m) - reference.d3(k, i, l, m)).amax() < 1e-12);
                    }
                }
            }
        }
        let mut v = cylinder_manifest();
        v["analysis"]["immersion"] = serde_json::to_value(spec).unwrap();
        let m = Manifest::from_json(&v.to_string()).unwrap();
        let out = run_manifest(&m, v.to_string().as_bytes(), &RunOptions::default()).unwrap();
        assert!(out.report.pass);
    }
}

#[test]
fn gallery_manifests_round_trip_through_json() {
    for m in manifests() {
        let bytes = canonical_bytes(&m);
        let back = Manifest::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(back, m);
    }
    assert!(matches!(find("generated-pair").unwrap().analysis, Analysis::Generate(_)));
}

#[test]
fn cheap_reports_are_byte_identical() {
    for name in ["psi-invariants", "sphere-nullity", "congruent-torus", "mobius-pair"] {
        let a = run(&["gallery", "run", name]);
        let b = run(&["gallery", "run", name]);
        assert_eq!(a, b, "{name}");
    }
}
