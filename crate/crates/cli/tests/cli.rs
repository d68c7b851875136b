use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dirpart(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirpart"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_manifest(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Header fields and payload of a binary PGM.
fn parse_pgm(bytes: &[u8]) -> (usize, usize, usize, &[u8]) {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap().to_string());
    }
    assert_eq!(fields[0], "P5");
    let p = |i: usize| fields[i].parse::<usize>().unwrap();
    (p(1), p(2), p(3), &bytes[pos + 1..])
}

const TORUS_K3: &str = r#"
name = "small"
n = 64
k = 3
tau0 = 0.25
seed = 4
overlay = true
"#;

#[test]
fn solve_writes_consistent_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_manifest(tmp.path(), TORUS_K3);
    let out = tmp.path().join("out");
    let res = dirpart(&["solve", "--config", &config, "--out", out.to_str().unwrap()], tmp.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let pgm = fs::read(out.join("labels.pgm")).unwrap();
    let (w, h, max, data) = parse_pgm(&pgm);
    assert_eq!((w, h, max), (64, 64, 255));
    assert_eq!(data.len(), 64 * 64);
    assert!(out.join("overlay.ppm").exists());

    let summary = read_json(&out.join("summary.json"));
    let total = summary["total_energy"].as_f64().unwrap();
    let per_region: f64 = summary["per_region"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - per_region).abs() <= 1e-12 * total.abs().max(1.0));
    let cells: u64 = summary["region_cells"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(cells, 64 * 64);

    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "iter,tau,energy,changed_cells,wall_ms");
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len() as u64, summary["iterations"].as_u64().unwrap());
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-10 * 3.0 / 0.25, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn reruns_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_manifest(tmp.path(), TORUS_K3);
    let mut results = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let res = dirpart(&["solve", "--config", &config, "--out", out.to_str().unwrap()], tmp.path());
        assert!(res.status.success());
        let summary = read_json(&out.join("summary.json"));
        results.push((fs::read(out.join("labels.pgm")).unwrap(), summary["total_energy"].as_f64().unwrap()));
    }
    assert_eq!(results[0], results[1]);
}

#[test]
fn best_of_seeds_does_not_depend_on_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_manifest(tmp.path(), TORUS_K3);
    let mut picks = Vec::new();
    for jobs in ["1", "3"] {
        let res = dirpart(&["solve", "--config", &config, "--seeds", "4", "--jobs", jobs], tmp.path());
        assert!(res.status.success());
        let summary: Value = serde_json::from_slice(&res.stdout).unwrap();
        assert_eq!(summary["seeds"].as_array().unwrap().len(), 4);
        let best = summary["best_energy"].as_f64().unwrap();
        assert!(summary["seeds"].as_array().unwrap().iter().all(|s| s["total_energy"].as_f64().unwrap() >= best));
        picks.push((summary["seed"].as_u64().unwrap(), best));
    }
    assert_eq!(picks[0], picks[1]);
}

#[test]
fn invalid_manifests_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_manifest(tmp.path(), "name = \"bad\"\nn = 64\nk = 0\n");
    let res = dirpart(&["solve", "--config", &config], tmp.path());
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains('k'));

    let config = write_manifest(tmp.path(), "name = \"bad\"\nn = 64\nk = 2\ncolour = 3\n");
    let res = dirpart(&["solve", "--config", &config], tmp.path());
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));
}

#[test]
fn iteration_cap_exits_with_two_unless_allowed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_manifest(tmp.path(), "name = \"capped\"\nn = 64\nk = 4\nmax_outer = 1\n");
    let res = dirpart(&["solve", "--config", &config], tmp.path());
    assert_eq!(res.status.code(), Some(2));
    let res = dirpart(&["solve", "--config", &config, "--allow-nonconverged"], tmp.path());
    assert_eq!(res.status.code(), Some(0));
    let summary: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(summary["converged"], Value::Bool(false));
}

#[test]
fn eigen_command_reports_value_below_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eig");
    let res = dirpart(
        &["eigen", "--shape", "square", "--n", "64", "--tol", "1e-3", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = read_json(&out.join("summary.json"));
    let lambda = summary["results"][0]["lambda"].as_f64().unwrap();
    assert!(lambda > 1.5 && lambda < 2.0, "{lambda}");
    assert!(out.join("eigenfunction.pgm").exists());
}

#[test]
fn refined_eigenvalues_sum_to_refined_total() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_manifest(
        tmp.path(),
        "name = \"halves\"\nshape = \"square\"\nn = 64\nk = 2\nadaptive = true\nrefine_tol = 1e-3\n",
    );
    let res = dirpart(&["solve", "--config", &config], tmp.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: Value = serde_json::from_slice(&res.stdout).unwrap();
    let values: Vec<f64> =
        summary["refined_eigenvalues"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 2);
    assert!(values.iter().all(|&v| v > 0.0));
    let total = summary["refined_total"].as_f64().unwrap();
    assert!((total - values.iter().sum::<f64>()).abs() < 1e-12);
}

#[test]
fn presets_list_and_show() {
    let tmp = tempfile::tempdir().unwrap();
    let res = dirpart(&["presets", "list"], tmp.path());
    assert!(res.status.success());
    let listing = String::from_utf8(res.stdout).unwrap();
    assert!(listing.lines().any(|l| l.starts_with("torus_k3_alg1")));

    let res = dirpart(&["presets", "show", "square_relaxation"], tmp.path());
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("relaxation"));

    let res = dirpart(&["presets", "show", "no_such_preset"], tmp.path());
    assert_eq!(res.status.code(), Some(1));
}
