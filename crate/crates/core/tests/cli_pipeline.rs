use std::fs;
use std::path::{Path, PathBuf};

use manipcode::analysis::import_matrix_csv;
use manipcode::cli::dispatch;
use manipcode::foon::{motion_frequency, node_counts, parse_foon};
use manipcode::gmm::{GaussianComponent, GaussianMixture};
use manipcode::taxonomy::{code_distance, CodeDistanceWeights, MotionCode};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("manipcode").chain(args.iter().copied());
    let code = dispatch(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    out
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn two_bumps(at: f64) -> GaussianMixture {
    GaussianMixture::new(vec![
        GaussianComponent::new(0.5, vec![at, 0.0, 1.0], diag(&[1.0, 0.5, 0.5])).unwrap(),
        GaussianComponent::new(0.5, vec![at + 3.0, 1.0, 0.0], diag(&[0.5, 1.0, 0.5])).unwrap(),
    ])
    .unwrap()
}

fn diag(v: &[f64]) -> Vec<Vec<f64>> {
    (0..v.len())
        .map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect())
        .collect()
}

/// synth -> fit -> matrix -> eval, returning the bytes of every output file.
fn pipeline(dir: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let specs = dir.join("specs");
    let samples = dir.join("samples");
    let models = dir.join("models");
    for d in [&specs, &samples, &models] {
        fs::create_dir_all(d).unwrap();
    }
    fs::write(specs.join("knife.json"), two_bumps(0.0).to_json()).unwrap();
    fs::write(specs.join("pour.json"), two_bumps(12.0).to_json()).unwrap();

    let jobs = [
        ("cut", "a", "knife", 11),
        ("cut", "b", "knife", 12),
        ("slice", "a", "knife", 13),
        ("slice", "b", "knife", 14),
        ("pour", "a", "pour", 15),
        ("pour", "b", "pour", 16),
        ("rotate", "a", "pour", 17),
        ("rotate", "b", "pour", 18),
    ];
    for (label, variant, spec, seed) in jobs {
        let seed = seed.to_string();
        let csv = samples.join(format!("{label}_{variant}.csv"));
        let model = models.join(format!("{label}_{variant}.json"));
        let spec = specs.join(format!("{spec}.json"));
        ok(&["--threads", threads, "--seed", &seed, "synth", "--spec", s(&spec), "--n", "600", "--out", s(&csv)]);
        ok(&["--threads", threads, "--seed", &seed, "fit", "--in", s(&csv), "--k", "2", "--out", s(&model)]);
    }
    let matrix = dir.join("m.csv");
    let heat = dir.join("m.pgm");
    let report = dir.join("report.json");
    ok(&["--threads", threads, "matrix", "--models", s(&models), "--out", s(&matrix), "--heatmap", s(&heat)]);
    ok(&["--threads", threads, "eval", "--matrix", s(&matrix), "--out", s(&report)]);

    let mut files = Vec::new();
    for d in [&samples, &models] {
        let mut names: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
        }
    }
    for p in [&matrix, &heat, &report] {
        files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()));
    }
    files
}

#[test]
fn pipeline_is_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline(a.path(), "1");
    let second = pipeline(b.path(), "4");
    assert_eq!(first.len(), second.len());
    for ((na, fa), (nb, fb)) in first.iter().zip(&second) {
        assert_eq!(na, nb);
        assert!(fa == fb, "{na} differs between runs");
    }

    let m = import_matrix_csv(a.path().join("m.csv")).unwrap();
    assert_eq!(m.labels(), ["cut", "pour", "rotate", "slice"]);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["consistency"]["nn_agreement"], 1.0);
    assert!(report["consistency"]["ratio"].as_f64().unwrap() < 0.5);
}

#[test]
fn adapters_agree_with_the_library() {
    let a = MotionCode::parse("11111010").unwrap();
    let b = MotionCode::parse("00001000").unwrap();
    let d = code_distance(a, b, &CodeDistanceWeights::uniform());
    assert_eq!(ok(&["dist", "11111010", "00001000"]), format!("{d}\n"));

    let path = fixture("kitchen.foon");
    let g = parse_foon(&fs::read_to_string(&path).unwrap()).unwrap();
    let counts = node_counts(&g);
    let report = motion_frequency(&g).unwrap();
    let out = ok(&["--json", "foon-stats", s(&path), "--top", "5"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["nodes"]["objects"], counts.objects);
    assert_eq!(v["nodes"]["motions"], counts.motions);
    assert_eq!(v["top_coverage"], report.top_k_coverage(5).unwrap());
    assert_eq!(v["rows"][0]["motion"], report.rows[0].motion.as_str());
}

#[test]
fn foon_stats_writes_the_frequency_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("freq.csv");
    let out = ok(&["foon-stats", s(&fixture("three_units.foon")), "--top", "2", "--out", s(&csv)]);
    assert!(out.contains("objects: 8\nmotions: 3\ntotal: 11\n"));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("rank,motion,count,share,code"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn failures_use_the_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.foon");
    fs::write(&bad, "O\tbowl\nM\tstir\n").unwrap();
    let (code, _, err) = run(&["foon-stats", s(&bad)]);
    assert_eq!(code, 1);
    assert!(err.contains("unit 1"), "{err}");

    let (code, _, err) = run(&["--json", "kl", "--f", "missing.json", "--g", "missing.json"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "data");

    let (code, _, _) = run(&["fit", "--in", "x.csv", "--out", "y.json"]);
    assert_eq!(code, 2);
    let (code, _, err) = run(&["dist", "11111010"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"));
    let out_dir = dir.path().join("nope").join("m.csv");
    let (code, _, _) = run(&["matrix", "--models", s(dir.path()), "--out", s(&out_dir)]);
    assert_eq!(code, 1);
}

#[test]
fn consolidate_and_kl_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.txt");
    fs::write(&labels, "insert\nPierce\nstir\npour\nwhisk\n").unwrap();
    let out = ok(&["consolidate", s(&labels)]);
    assert!(out.contains("11001010: insert, pierce, stir\n"), "{out}");
    assert!(out.contains("unknown: whisk"));

    let f = dir.path().join("f.json");
    let g = dir.path().join("g.json");
    fs::write(&f, GaussianMixture::single(vec![0.0], vec![vec![1.0]]).unwrap().to_json()).unwrap();
    fs::write(&g, GaussianMixture::single(vec![1.0], vec![vec![1.0]]).unwrap().to_json()).unwrap();
    let out = ok(&["kl", "--f", s(&f), "--g", s(&g)]);
    assert!(out.starts_with("variational KL(f||g): 0.5\n"), "{out}");
    let (code, _, _) = run(&["kl", "--f", s(&f), "--g", s(&g), "--mc", "2000"]);
    assert_eq!(code, 2);
    let a = ok(&["--seed", "3", "kl", "--f", s(&f), "--g", s(&g), "--mc", "2000"]);
    let b = ok(&["--seed", "3", "--threads", "2", "kl", "--f", s(&f), "--g", s(&g), "--mc", "2000"]);
    assert_eq!(a, b);
}
