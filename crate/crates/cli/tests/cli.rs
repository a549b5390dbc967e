use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn heegner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heegner"))
        .args(args)
        .env_remove("HEEGNER_CACHE_DIR")
        .output()
        .expect("run heegner")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn classnum_example() {
    let o = heegner(&["classnum", "--D", "-23", "--c", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "{\"h\":3}\n");
    let csv = heegner(&["classnum", "--D", "-3", "--c", "2", "--format", "csv"]);
    assert_eq!(stdout(&csv), "D,c,h\n-3,2,1\n");
}

#[test]
fn measure_example() {
    let o = heegner(&["measure", "--ell", "11", "--D", "-3", "--c", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["ell"], 11);
    assert_eq!(v["N"], 1);
    assert_eq!(v["D"], -3);
    let classes = v["classes"].as_array().unwrap();
    assert_eq!(classes.len(), 2);
    assert!(classes.iter().all(|c| c["mu"].is_string() && c["w"].is_u64()));
    assert!(v["tv_to_canonical"].as_str().unwrap().contains('/'));
}

#[test]
fn surject_eleven_matches_published() {
    let o = heegner(&["surject", "--ell", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!((v["count"].as_u64(), v["max"].as_u64()), (Some(116), Some(5124)));
    assert_eq!(v["conductors"].as_array().unwrap().len(), 116);
    assert!(stdout(&o).starts_with("{\"ell\":11,\"N\":1,\"count\":116,\"max\":5124,"));
    let csv = heegner(&["surject", "--ell", "11", "--format", "csv"]);
    assert_eq!(stdout(&csv).lines().count(), 117);
}

#[test]
fn surject_mismatch_exits_two_with_assumptions() {
    let o = heegner(&["surject", "--ell", "19"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["count"], 96);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("published 165 / 8502") && err.contains("sign_convention"), "{err}");
    let o = heegner(&["surject", "--ell", "19", "--threshold", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!((json(&o)["count"].as_u64(), json(&o)["max"].as_u64()), (Some(165), Some(8502)));
}

#[test]
fn validation_errors_exit_one() {
    for args in [
        &["classnum", "--D", "-12"][..],
        &["classnum", "--D", "5"],
        &["measure", "--ell", "11", "--D", "-7", "--c", "1"],
        &["measure", "--ell", "11", "--D", "-3", "--c", "11"],
        &["genus", "--ell", "12"],
        &["genus", "--ell", "11", "--N", "2"],
        &["surject", "--ell", "11", "--threshold", "-1"],
        &["surject", "--ell", "23"],
        &["theta", "--bound", "10"],
        &["theta", "--gram", "1,1,1,0,0,5", "--bound", "10"],
        &["theta", "--gram", "1,1,1", "--bound", "10"],
        &["eigen", "--ell", "13", "--source", "curve"],
        &["bogus"],
        &["genus", "--ell", "11", "--frobnicate"],
    ] {
        let o = heegner(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    let o = heegner(&["measure", "--ell", "11", "--D", "-7", "--c", "1"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("inert"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(heegner(&["--help"]).status.code(), Some(0));
    assert_eq!(heegner(&["surject", "--help"]).status.code(), Some(0));
}

#[test]
fn json_is_byte_identical_across_runs_and_execution_modes() {
    for args in [
        &["genus", "--ell", "17"][..],
        &["converge", "--ell", "11", "--D", "-3", "--c-max", "40"],
        &["eigen", "--ell", "19", "--p-max", "30", "--source", "both"],
    ] {
        let a = heegner(args);
        let b = heegner(args);
        let mut seq = args.to_vec();
        seq.push("--sequential");
        let c = heegner(&seq);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.stdout, c.stdout, "{args:?}");
    }
}

#[test]
fn genus_formats() {
    let v = json(&heegner(&["genus", "--ell", "11"]));
    assert_eq!(v["mass"], "5/12");
    assert_eq!(v["classes"].as_array().unwrap().len(), 2);
    let csv = stdout(&heegner(&["genus", "--ell", "11", "--format", "csv"]));
    assert!(csv.starts_with("class,a11,a22,a33,a23,a13,a12,automorphs,w\n"));
    assert_eq!(csv.lines().count(), 3);
    let text = stdout(&heegner(&["genus", "--ell", "11", "--format", "text"]));
    assert!(text.contains("mass 5/12"));
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.json");
    let o = heegner(&["classnum", "--D", "-23", "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(fs::read_to_string(&path).unwrap(), "{\"h\":3}\n");
}

fn cache_files(dir: &Path) -> Vec<std::path::PathBuf> {
    fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "json")).collect()
}

#[test]
fn theta_cache_round_trip_tamper_and_cold_start() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["theta", "--ell", "11", "--class", "1", "--bound", "300"];
    let cold = heegner(&args);
    assert_eq!(cold.status.code(), Some(0));

    let mut with_cache = args.to_vec();
    with_cache.extend(["--cache-dir", cache]);
    let first = heegner(&with_cache);
    let files = cache_files(dir.path());
    assert_eq!(files.len(), 1);
    let stored = fs::read(&files[0]).unwrap();
    let second = heegner(&with_cache);
    assert_eq!(cold.stdout, first.stdout);
    assert_eq!(first.stdout, second.stdout);
    assert!(second.stderr.is_empty());
    assert_eq!(fs::read(&files[0]).unwrap(), stored, "a valid hit must not rewrite the block");

    // tamper with one coefficient, keeping the JSON well formed
    let mut block: serde_json::Value = serde_json::from_slice(&stored).unwrap();
    let coeffs = block["coeffs"].as_array_mut().unwrap();
    coeffs[4] = serde_json::json!(coeffs[4].as_u64().unwrap() + 1);
    fs::write(&files[0], serde_json::to_vec(&block).unwrap()).unwrap();
    let healed = heegner(&with_cache);
    assert_eq!(healed.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&healed.stderr).contains("checksum mismatch"));
    assert_eq!(healed.stdout, cold.stdout);
    assert_eq!(fs::read(&files[0]).unwrap(), stored, "recomputed block overwrites the tampered one");

    // garbage and truncated files are recomputed too
    fs::write(&files[0], b"{not json").unwrap();
    let healed = heegner(&with_cache);
    assert!(String::from_utf8_lossy(&healed.stderr).contains("warning"));
    assert_eq!(healed.stdout, cold.stdout);

    // the environment variable selects the same cache
    let o = Command::new(env!("CARGO_BIN_EXE_heegner"))
        .args(args)
        .env("HEEGNER_CACHE_DIR", cache)
        .output()
        .unwrap();
    assert_eq!(o.stdout, cold.stdout);
    assert!(o.stderr.is_empty());
}

#[test]
fn theta_cache_detects_consistent_forgery_by_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["theta", "--gram", "1,1,1,0,0,0", "--bound", "3", "--cache-dir", cache];
    let clean = heegner(&args);
    let file = &cache_files(dir.path())[0];
    // a block whose checksum matches but every coefficient is wrong
    let mut block: serde_json::Value = serde_json::from_slice(&fs::read(file).unwrap()).unwrap();
    block["coeffs"] = serde_json::json!([2, 7, 13, 9]);
    let forged: Vec<u64> = vec![2, 7, 13, 9];
    block["checksum"] = serde_json::json!(checksum(&[[1, 0, 0], [0, 1, 0], [0, 0, 1]], 3, &forged));
    fs::write(file, serde_json::to_vec(&block).unwrap()).unwrap();
    let o = heegner(&args);
    assert!(String::from_utf8_lossy(&o.stderr).contains("recomputes to"), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.stdout, clean.stdout);
}

/// The cache checksum: SHA-256 of the JSON triple `(gram, bound, coeffs)`.
fn checksum(gram: &[[i64; 3]; 3], bound: u64, coeffs: &[u64]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(serde_json::to_vec(&(gram, bound, coeffs)).unwrap());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
