use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_localscore"));
    c.env_remove("LOCALSCORE_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn localscore")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of `key=` on the first line starting with `record`.
fn field(out: &str, record: &str, key: &str) -> String {
    let line = out
        .lines()
        .find(|l| l.starts_with(&format!("{record} ")))
        .unwrap_or_else(|| panic!("no `{record}` record in:\n{out}"));
    let pat = format!(" {key}=");
    let start = line.find(&pat).unwrap_or_else(|| panic!("no {key} in {line}")) + pat.len();
    let rest = &line[start..];
    if let Some(quoted) = rest.strip_prefix('"') {
        quoted[..quoted.find('"').unwrap()].to_string()
    } else {
        rest.split(' ').next().unwrap().to_string()
    }
}

fn num(out: &str, record: &str, key: &str) -> f64 {
    field(out, record, key).parse().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

// Ten balanced labels; column `y` of a row with label y is 16, the rest cycle through 0..4.
fn write_digits(path: &Path, rows: usize, cols: usize) {
    let mut text = String::new();
    for i in 0..rows {
        let y = i % 10;
        let row: Vec<String> = (0..cols)
            .map(|j| if j == y { 16 } else { (i * 7 + j * 3) % 5 })
            .map(|v| v.to_string())
            .collect();
        text.push_str(&format!("{},{y}\n", row.join(",")));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn graph_reports_the_parity_split() {
    let o = run(&["graph", "--space", "hypercube:2", "--radius", "1", "--potential", "ps:1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "diagnostics", "g0prime_components"), "2");
    assert_eq!(field(&out, "diagnostics", "coincidence_guaranteed"), "false");
    assert_eq!(field(&out, "summary", "message"), "coincidence NOT guaranteed; G0' components: 2");

    let o = run(&["graph", "--space", "hypercube:2", "--radius", "2", "--potential", "ps"]);
    let out = stdout(&o);
    assert_eq!(field(&out, "summary", "message"), "coincidence guaranteed");
    assert_eq!(field(&out, "graph", "edges"), "6");
}

#[test]
fn graph_checks_block_covers() {
    let o = run(&["graph", "--space", "hypercube:3", "--blocks", "1;2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "blocks", "coordinate_cover"), "false");
    assert_eq!(field(&out, "blocks", "g0_connected"), "false");
    assert_eq!(field(&out, "blocks", "agree"), "true");

    let out = stdout(&run(&["graph", "--space", "hypercube:3", "--blocks", "1,2;2,3"]));
    assert_eq!(field(&out, "blocks", "coordinate_cover"), "true");
    assert_eq!(field(&out, "blocks", "g0_connected"), "true");
}

#[test]
fn graph_reads_edge_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("path.graph");
    fs::write(&g, "space enumerated 4\n# a path\n0 1\n1 2\n2 3\n").unwrap();
    let out = stdout(&run(&["graph", "--graph", p(&g)]));
    assert_eq!(field(&out, "graph", "vertices"), "4");
    assert_eq!(field(&out, "graph", "connected"), "true");

    fs::write(&g, "space enumerated 4\n0 1\n2 3\n").unwrap();
    let out = stdout(&run(&["graph", "--graph", p(&g)]));
    assert_eq!(field(&out, "graph", "connected"), "false");
}

#[test]
fn check_exit_codes() {
    let o = run(&["check", "--trials", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(field(&stdout(&o), "checks", "failures"), "0");

    let o = run(&["check", "--checks", "coincidence-ps-r1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("hypercube-parity-pair"));

    let o = run(&["check", "--checks", "coincidence-ps-r1,cl-graph-properness", "--expect-fail", "coincidence-ps-r1,cl-graph-properness", "--trials", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let o = run(&["check", "--checks", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown check"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["graph", "--space", "cube:3"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--samples", "/nonexistent/file"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn zero_model_has_uniform_loss() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let samples = dir.path().join("s.txt");
    let o = run(&["sample", "--random-bm", "4", "--weight-scale", "0", "--save-model", p(&model), "--n", "100", "--seed", "3", "--output", p(&samples)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&run(&["eval", "--model", p(&model), "--samples", p(&samples)]));
    assert!((num(&out, "eval", "test_loss") - 4.0 * 2f64.ln()).abs() < 1e-12);

    let out = stdout(&run(&["eval", "--model", p(&model), "--samples", p(&samples), "--logz", "ais", "--ais-temperatures", "50", "--ais-chains", "5"]));
    assert!((num(&out, "eval", "log_z") - 4.0 * 2f64.ln()).abs() < 1e-9);
}

#[test]
fn sample_fit_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.json");
    let train = dir.path().join("train.txt");
    let test = dir.path().join("test.txt");
    let fitted = dir.path().join("fit.json");
    assert!(run(&["sample", "--random-bm", "4", "--save-model", p(&truth), "--n", "5000", "--seed", "11", "--output", p(&train)]).status.success());
    assert!(run(&["sample", "--model", p(&truth), "--n", "5000", "--seed", "12", "--output", p(&test)]).status.success());
    let o = run(&["fit", "--samples", p(&train), "--estimator", "pl@1", "--output", p(&fitted)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(field(&stdout(&o), "fit", "converged"), "true");

    let reference = num(&stdout(&run(&["eval", "--model", p(&truth), "--samples", p(&test)])), "eval", "test_loss");
    let loss = num(&stdout(&run(&["eval", "--model", p(&fitted), "--samples", p(&test)])), "eval", "test_loss");
    assert!(loss < 4.0 * 2f64.ln());
    assert!((loss - reference).abs() < 0.05, "{loss} vs {reference}");
}

#[test]
fn fit_reports_every_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.txt");
    assert!(run(&["sample", "--random-bm", "3", "--n", "300", "--seed", "5", "--output", p(&train)]).status.success());
    let out = stdout(&run(&["fit", "--samples", p(&train), "--estimator", "mle", "--estimator", "rm@1", "--estimator", "ps:1@2", "--estimator", "mcl:1,2;3"]));
    for e in ["mle", "rm@1", "ps:1@2", "mcl:1,2;3"] {
        assert!(out.contains(&format!("fit estimator={e} ")), "{e} missing:\n{out}");
    }
    // more than one estimator with --output is rejected
    let o = run(&["fit", "--samples", p(&train), "--estimator", "mle", "--estimator", "pl@1", "--output", p(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tabular_mle_matches_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.txt");
    fs::write(&s, "# space enumerated 3\n0\n1\n1\n2\n").unwrap();
    let m = dir.path().join("m.json");
    let o = run(&["fit", "--samples", p(&s), "--model", "tabular", "--estimator", "mle", "--output", p(&m)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let loss = num(&stdout(&run(&["eval", "--model", p(&m), "--samples", p(&s)])), "eval", "test_loss");
    let expect = -(0.25f64.ln() * 2.0 + 0.5f64.ln() * 2.0) / 4.0;
    assert!((loss - expect).abs() < 1e-6, "{loss} vs {expect}");
}

#[test]
fn zero_conditional_model_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_digits(&data, 60, 10);
    let m = dir.path().join("c.json");
    let theta = vec![vec![0.0; 3]; 10];
    fs::write(&m, format!("{{\"kind\":\"conditional\",\"L\":10,\"d\":3,\"theta\":{theta:?}}}")).unwrap();
    let out = stdout(&run(&["eval", "--model", p(&m), "--digits", p(&data), "--features", "0,1,2"]));
    assert!((num(&out, "eval", "test_loss") - 10f64.ln()).abs() < 1e-12);
    // all scores tie, so every row is assigned label 0
    assert!((num(&out, "eval", "test_error") - 0.9).abs() < 1e-12);
}

#[test]
fn ingest_binarizes_and_injects_noise() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "0,5,16,3\n7,0,0,9\n").unwrap();
    let rows = dir.path().join("rows.csv");
    let samples = dir.path().join("s.txt");
    let o = run(&["ingest", "--data", p(&data), "--features", "0,1", "--binarize", "--output", p(&rows), "--samples", p(&samples)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&rows).unwrap(), "-1,1,3\n1,-1,9\n");
    let s = fs::read_to_string(&samples).unwrap();
    assert!(s.starts_with("# space hypercube 2"));
    assert_eq!(s.lines().skip(1).collect::<Vec<_>>(), ["-1 1", "1 -1"]);

    let o = run(&["ingest", "--data", p(&data), "--features", "0,3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("out of range"));

    write_digits(&data, 95, 10);
    let out = stdout(&run(&["ingest", "--data", p(&data), "--noise", "0.1", "--seed", "4"]));
    assert_eq!(field(&out, "ingest", "noisy_rows"), "9");
}

#[test]
fn config_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "task = \"boltzmann\"\nspace = \"hypercube:3\"\nestimators = [\"mle\"]\nn_train = 200\nn_test = 200\n\n[fit]\nmax_iterations = 300\n",
    )
    .unwrap();
    let o = run(&["fit", "--config", p(&cfg), "--set", "estimators=[\"pl@1\", \"rm@1\"]", "--set", "seed=9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("estimator=pl@1") && out.contains("estimator=rm@1"));
    assert!(!out.contains("estimator=mle"));

    let o = run(&["fit", "--config", p(&cfg), "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for (path, via_env) in [(&a, false), (&b, true)] {
        let mut c = bin();
        c.args(["sample", "--random-bm", "6", "--n", "500", "--method", "gibbs", "--output", p(path)]);
        if via_env {
            c.env("LOCALSCORE_SEED", "21");
        } else {
            c.args(["--seed", "21"]);
        }
        assert!(c.output().unwrap().status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let r1 = stdout(&run(&["check", "--checks", "properness", "--trials", "30", "--seed", "8"]));
    let r2 = stdout(&run(&["check", "--checks", "properness", "--trials", "30", "--seed", "8"]));
    assert_eq!(r1, r2);
}

#[test]
fn classify_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_digits(&data, 300, 10);
    let report = dir.path().join("report.txt");
    let o = run(&[
        "classify", "--data", p(&data), "--n-train", "200", "--noise", "0.1", "--estimator", "mle", "--estimator", "pl@1",
        "--estimator", "mcl@1", "--splits", "2", "--seed", "1", "--set", "fit.l2_penalty=0.1", "--report", p(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("outcome ")).count(), 6);
    for line in out.lines().filter(|l| l.starts_with("summary ")) {
        let loss: f64 = field(line, "summary", "loss_mean").parse().unwrap();
        assert!(loss < 10f64.ln(), "{line}");
    }
    assert_eq!(fs::read_to_string(&report).unwrap(), out);
}
