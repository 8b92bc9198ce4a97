use ckren::graph::{builtin, unlabeled_form};
use ckren::hopf::disjoint_union;
use ckren_cli::config::{Format, RunConfig};
use std::path::Path;
use std::process::{Command, Output};

fn ckren(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ckren"));
    c.args(args).env_remove("CKREN_CACHE_DIR").env_remove("CKREN_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn graph_listings() {
    let one = json(&ckren(&["--format", "json", "--no-cache", "graphs", "prop", "1"], &[]));
    assert_eq!(one["schema"], "ckren.graphs/1");
    assert_eq!(one["classes"].as_array().unwrap().len(), 1);
    assert_eq!(one["classes"][0]["weight"], "1/2");
    assert_eq!(one["classes"][0]["sdd"], 2);
    let two = json(&ckren(&["--format", "json", "--no-cache", "graphs", "vert", "2"], &[]));
    assert_eq!(two["classes"].as_array().unwrap().len(), 7);
    let zero = json(&ckren(&["--format", "json", "graphs", "prop", "0"], &[]));
    assert!(zero["classes"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(ckren(&["graphs", "tadpole", "1"], &[]).status.code(), Some(2));
    assert_eq!(ckren(&["graphs", "prop", "4"], &[]).status.code(), Some(3));
    assert_eq!(ckren(&["--loop-bound", "1", "birkhoff", "vert", "2"], &[]).status.code(), Some(3));
    assert_eq!(ckren(&["coproduct", "no-such-graph"], &[]).status.code(), Some(2));
    assert_eq!(ckren(&["graphs", "prop", "1"], &[("CKREN_THREADS", "many")]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"theory":{"m":3,"d":6},"vertices":["a","b"],"edges":[["a","b"]],"external":[]}"#).unwrap();
    let o = ckren(&["coproduct", bad.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degree 1, expected 3"), "{}", String::from_utf8_lossy(&o.stderr));

    let strict = dir.path().join("strict.toml");
    let mut cfg = RunConfig::default();
    cfg.tolerances.closed_form = 1e-60;
    std::fs::write(&strict, cfg.to_toml()).unwrap();
    assert_eq!(ckren(&["--config", strict.to_str().unwrap(), "hadamard", "sweep"], &[]).status.code(), Some(4));
}

#[test]
fn coproduct_output() {
    let b = json(&ckren(&["--format", "json", "coproduct", "bubble"], &[]));
    assert_eq!(b["coproduct"]["terms"].as_array().unwrap().len(), 2);
    assert!(b["reduced"]["terms"].as_array().unwrap().is_empty());
    let v = json(&ckren(&["--format", "json", "coproduct", "bubble-vertex-correction"], &[]));
    let reduced = v["reduced"]["terms"].as_array().unwrap();
    assert_eq!(reduced.len(), 1);
    assert_eq!(reduced[0]["coefficient"], "2");

    // the coproduct is an algebra map on disconnected input
    let dir = tempfile::tempdir().unwrap();
    let keys = [unlabeled_form(&builtin::bubble()), unlabeled_form(&builtin::triangle())];
    let file = dir.path().join("pair.json");
    std::fs::write(&file, disjoint_union(&keys).unwrap().to_json()).unwrap();
    let p = json(&ckren(&["--format", "json", "coproduct", file.to_str().unwrap()], &[]));
    assert_eq!(p["coproduct"]["terms"].as_array().unwrap().len(), 4);
    assert_eq!(p["reduced"]["terms"].as_array().unwrap().len(), 2);
}

#[test]
fn birkhoff_and_zfactors() {
    for (r, l) in [("prop", "1"), ("prop", "2"), ("vert", "2")] {
        let o = json(&ckren(&["--format", "json", "birkhoff", r, l], &[]));
        assert_eq!(o["multiplicative_renormalization"], true);
    }
    let unit = json(&ckren(&["--format", "json", "birkhoff", "vert", "0"], &[]));
    assert_eq!(unit["greens_function"], "1");
    assert!(unit["graphs"].as_array().unwrap().is_empty());

    let z0 = stdout(&ckren(&["zfactors", "0"], &[]));
    assert!(z0.contains("Z_Kin[0] = (|) : 1") && z0.contains("Z_Int[0] = (|) : 1"));
    let z2 = json(&ckren(&["--format", "json", "zfactors", "2"], &[]));
    assert_eq!(z2["series"]["Z_Int"].as_array().unwrap().len(), 3);
    assert!(z2["series"]["Z_Kin"][1].as_str().unwrap().contains("bubble"));
}

#[test]
fn hadamard_reports() {
    let t = json(&ckren(&["--format", "json", "hadamard", "theta"], &[]));
    assert_eq!(t["rows"].as_array().unwrap().len(), 28);
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bubble.csv");
    let b = json(&ckren(&["--format", "json", "hadamard", "bubble", "--csv", csv.to_str().unwrap()], &[]));
    assert_eq!(b["schema"], "ckren.bubble/1");
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("eps,value\n"));
    assert!(ckren(&["hadamard", "scaling"], &[]).status.success());
}

#[test]
fn config_round_trip_and_overrides() {
    let mut c = RunConfig::default();
    assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    c.cache.dir = Some("/tmp/x".into());
    c.threads = Some(3);
    c.output.format = Format::Json;
    c.bounds.loop_bound = 2;
    assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    assert!(RunConfig::from_toml("[bounds]\nloop_bound = 0\n").is_err());
    assert!(RunConfig::from_toml("[theory]\nq = 1\n").is_err());

    let mut e = RunConfig::default();
    e.apply_env(|k| match k {
        "CKREN_CACHE_DIR" => Some("/var/cache/ckren".into()),
        "CKREN_THREADS" => Some("2".into()),
        _ => None,
    })
    .unwrap();
    assert_eq!(e.cache.dir.as_deref(), Some(Path::new("/var/cache/ckren")));
    assert_eq!(e.threads, Some(2));
    let shown = stdout(&ckren(&["--threads", "5", "config"], &[("CKREN_THREADS", "2")]));
    assert!(shown.contains("threads = 5"));
}

#[test]
fn warm_and_cold_cache_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cold = ckren(&["--format", "json", "graphs", "vert", "2"], &[("CKREN_CACHE_DIR", d)]);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    let warm = ckren(&["--format", "json", "graphs", "vert", "2"], &[("CKREN_CACHE_DIR", d)]);
    let none = ckren(&["--format", "json", "--no-cache", "graphs", "vert", "2"], &[("CKREN_CACHE_DIR", d)]);
    assert_eq!(cold.stdout, warm.stdout);
    assert_eq!(cold.stdout, none.stdout);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let runs: [&[&str]; 4] = [
        &["--format", "json", "--no-cache", "graphs", "vert", "2"],
        &["--format", "json", "birkhoff", "vert", "2"],
        &["zfactors", "2"],
        &["--format", "json", "hadamard", "bubble"],
    ];
    for args in runs {
        let base = ckren(args, &[("CKREN_THREADS", "1")]);
        assert!(base.status.success());
        for t in ["2", "4"] {
            assert_eq!(ckren(args, &[("CKREN_THREADS", t)]).stdout, base.stdout, "{args:?} threads={t}");
        }
        assert_eq!(ckren(args, &[("CKREN_THREADS", "1")]).stdout, base.stdout);
    }
}
