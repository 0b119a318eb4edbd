use std::path::Path;
use std::process::{Command, Output};

fn select(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_select")).args(args).env_remove("SELECT_WORKERS").output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const DYNAMIC: &str = r#"{
    "id": "cli_dyn", "master_seed": 3,
    "scene": {"generator": {"seed": 1, "m_max": 8, "d_s": 4, "d_max": 14, "g": 2, "mode": "random"}},
    "experiments": 2, "m_values": [4, 5],
    "algorithms": [{"name": "gss_t"}, {"name": "gss_f"}, {"name": "bof"}, {"name": "exhaustive"}]
}"#;

#[test]
fn dynamic_run_is_worker_independent_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dyn.json");
    write(&cfg, DYNAMIC);
    let mut texts = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("dyn{workers}.csv"));
        let res = select(&["--workers", workers, "dynamic", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        assert!(String::from_utf8_lossy(&res.stdout).contains("32 rows written"));
        assert!(out.with_extension("scenes.json").exists() && out.with_extension("summary.json").exists());
        let verify = select(&["verify", out.to_str().unwrap()]);
        assert!(verify.status.success());
        assert!(String::from_utf8_lossy(&verify.stdout).contains("32 rows checked, 0 skipped, 0 mismatches"));
        texts.push(sensel::harness::records::strip_wall_time(&std::fs::read_to_string(&out).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn verify_flags_tampered_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dyn.json");
    write(&cfg, DYNAMIC);
    let out = dir.path().join("dyn.csv");
    assert!(select(&["dynamic", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let mut records = sensel::harness::read_records(std::fs::File::open(&out).unwrap()).unwrap();
    records[5].value *= 2.0;
    sensel::harness::write_records(std::fs::File::create(&out).unwrap(), &records).unwrap();
    let verify = select(&["verify", out.to_str().unwrap()]);
    assert_eq!(verify.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&verify.stdout).contains("row 5: value"));
}

#[test]
fn robust_run_on_generated_scene() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    let res = select(&[
        "gen-scene", "--seed", "5", "--m-max", "7", "--g", "8", "--mode", "even", "--out", scene.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let scene_json = std::fs::read_to_string(&scene).unwrap();
    let parsed: sensel::scene::Scene = serde_json::from_str(&scene_json).unwrap();
    assert_eq!((parsed.sensor_count(), parsed.targets.len()), (7, 8));

    let cfg = dir.path().join("rob.json");
    write(
        &cfg,
        &format!(
            r#"{{"id": "cli_rob", "master_seed": 1, "scene": {{"explicit": {scene_json}}}, "experiments": 1,
                "m_values": [3], "algorithms": [{{"name": "relaxed"}}, {{"name": "ico"}}, {{"name": "exhaustive_robust"}}]}}"#
        ),
    );
    let out = dir.path().join("rob.csv");
    let res = select(&["robust", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(select(&["verify", out.to_str().unwrap()]).status.success());
}

#[test]
fn prism_scene_generation() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("prism.json");
    let res = select(&["gen-scene", "--prism-sides", "5", "--g", "12", "--out", scene.to_str().unwrap()]);
    assert!(res.status.success());
    let parsed: sensel::scene::Scene = serde_json::from_str(&std::fs::read_to_string(&scene).unwrap()).unwrap();
    assert_eq!(parsed.sensor_count(), 10);
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, &DYNAMIC.replace("\"experiments\"", "\"experimentz\""));
    let out = dir.path().join("x.csv");
    let res = select(&["dynamic", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    assert_eq!(select(&["robust", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(2));
    write(&cfg, DYNAMIC);
    assert_eq!(select(&["robust", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(select(&["verify", dir.path().join("missing.csv").to_str().unwrap()]).status.code(), Some(2));
}
