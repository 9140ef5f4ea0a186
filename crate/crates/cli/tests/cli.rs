//! End-to-end checks of the command-line surface: exit codes, diagnostics,
//! output formats, and the no-partial-output guarantee.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn telecare() -> Command {
    Command::new(env!("CARGO_BIN_EXE_telecare"))
}

fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name]
        .iter()
        .collect()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn telecare");
    assert!(
        output.status.success(),
        "expected success, stderr: {}",
        stderr_of(&output)
    );
    output
}

fn run_err(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn telecare");
    assert!(!output.status.success(), "expected failure");
    output
}

#[test]
fn cep_replays_fixture_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        run_ok(
            telecare()
                .arg("cep")
                .arg("--rules")
                .arg(fixture("rules_demo.rules"))
                .arg("--log")
                .arg(fixture("events_demo.csv"))
                .arg("--out")
                .arg(out),
        );
    }
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b, "same inputs must give byte-identical outputs");

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "fire_time,patient_id,rule_name,severity,predicted_crossing_time"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty(), "demo fixture should raise alerts");
    assert!(rows.iter().any(|r| r.contains(",hypo,")));
    assert!(rows.iter().any(|r| r.contains(",fall_still,")));
    // Trend alerts carry the fifth column; plain ones do not.
    assert!(rows
        .iter()
        .filter(|r| r.contains(",hypo_trend,"))
        .all(|r| r.split(',').count() == 5));
    assert!(rows
        .iter()
        .filter(|r| r.contains(",hypo,"))
        .all(|r| r.split(',').count() == 4));
}

#[test]
fn cep_merges_multiple_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log_a = dir.path().join("a.log");
    let log_b = dir.path().join("b.log");
    fs::write(&log_a, "p1,100,glucose,65\n").unwrap();
    fs::write(&log_b, "p2,50,glucose,60\n").unwrap();
    let out = dir.path().join("alerts.csv");
    run_ok(
        telecare()
            .arg("cep")
            .arg("--rules")
            .arg(fixture("rules_demo.rules"))
            .arg("--log")
            .arg(&log_a)
            .arg(&log_b)
            .arg("--out")
            .arg(&out),
    );
    let text = fs::read_to_string(&out).unwrap();
    let hypo_rows: Vec<&str> = text
        .lines()
        .filter(|r| r.contains(",hypo,"))
        .collect();
    assert_eq!(hypo_rows.len(), 2);
    assert!(hypo_rows[0].starts_with("50,p2,"), "merged order: {text}");
    assert!(hypo_rows[1].starts_with("100,p1,"), "merged order: {text}");
}

#[test]
fn cep_empty_log_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.log");
    fs::write(&log, "# nothing today\n").unwrap();
    let out = dir.path().join("alerts.csv");
    run_ok(
        telecare()
            .arg("cep")
            .arg("--rules")
            .arg(fixture("rules_demo.rules"))
            .arg("--log")
            .arg(&log)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "fire_time,patient_id,rule_name,severity,predicted_crossing_time\n"
    );
}

#[test]
fn cep_bad_log_fails_with_diagnostics_and_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.log");
    fs::write(&log, "p1,0,glucose,100\nnot a record\np1,5,glucose,9999\n").unwrap();
    let out = dir.path().join("alerts.csv");
    let output = run_err(
        telecare()
            .arg("cep")
            .arg("--rules")
            .arg(fixture("rules_demo.rules"))
            .arg("--log")
            .arg(&log)
            .arg("--out")
            .arg(&out),
    );
    let stderr = stderr_of(&output);
    // One diagnostic line per problem, each naming the source and line.
    assert_eq!(stderr.lines().filter(|l| l.starts_with("error:")).count(), 2);
    assert!(stderr.contains(":2:"), "line number of parse error: {stderr}");
    assert!(stderr.contains(":3:"), "line number of range error: {stderr}");
    assert!(!out.exists(), "failed run must not leave an output file");
}

#[test]
fn cep_bad_rules_point_at_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("bad.rules");
    fs::write(&rules, "rule r: when glucoze < 70 severity high\n").unwrap();
    let log = dir.path().join("ok.log");
    fs::write(&log, "p1,0,glucose,65\n").unwrap();
    let out = dir.path().join("alerts.csv");
    let output = run_err(
        telecare()
            .arg("cep")
            .arg("--rules")
            .arg(&rules)
            .arg("--log")
            .arg(&log)
            .arg("--out")
            .arg(&out),
    );
    let stderr = stderr_of(&output);
    assert!(stderr.contains("line 1, column 14"), "{stderr}");
    assert!(!out.exists());
}

#[test]
fn catalyst_fixture_yields_single_exact_proposal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("proposals.csv");
    run_ok(
        telecare()
            .arg("catalyst")
            .arg("--registry")
            .arg(fixture("registry_mary_ann.csv"))
            .arg("--taxonomy")
            .arg(fixture("taxonomy.csv"))
            .arg("--out")
            .arg(&out),
    );
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "partyA,partyB,provideA,requestB,degree1,provideB,requestA,degree2,score"
    );
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "ann,mary,a_prov,m_req,exact,m_prov,a_req,exact,2");
}

#[test]
fn catalyst_empty_registry_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let registry = dir.path().join("empty.csv");
    fs::write(&registry, "# no entries yet\n").unwrap();
    let out = dir.path().join("proposals.csv");
    run_ok(
        telecare()
            .arg("catalyst")
            .arg("--registry")
            .arg(&registry)
            .arg("--taxonomy")
            .arg(fixture("taxonomy.csv"))
            .arg("--out")
            .arg(&out),
    );
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn catalyst_unknown_capability_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let registry = dir.path().join("bad.csv");
    fs::write(
        &registry,
        "e1,a,provide,transport,0,10,0,0,1\ne2,b,request,surgery,0,10,0,0,1\n",
    )
    .unwrap();
    let out = dir.path().join("proposals.csv");
    let output = run_err(
        telecare()
            .arg("catalyst")
            .arg("--registry")
            .arg(&registry)
            .arg("--taxonomy")
            .arg(fixture("taxonomy.csv"))
            .arg("--out")
            .arg(&out),
    );
    let stderr = stderr_of(&output);
    assert!(stderr.contains(":2:"), "{stderr}");
    assert!(stderr.contains("surgery"), "{stderr}");
    assert!(!out.exists());
}

#[test]
fn sim_zero_ticks_writes_zero_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("zero.conf");
    fs::write(&config, "ticks = 0\nseed = 4\n").unwrap();
    let out = dir.path().join("metrics.csv");
    run_ok(
        telecare()
            .arg("sim")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out),
    );
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("mode,seed,total_social_cost"));
    assert_eq!(lines[1], "traditional,4,0,0,0,0,0,0,0,0,0,0,0");
}

#[test]
fn sim_rejects_unknown_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    fs::write(&config, "n_doctors = 3\n").unwrap();
    let out = dir.path().join("metrics.csv");
    let output = run_err(
        telecare()
            .arg("sim")
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out),
    );
    assert!(stderr_of(&output).contains("n_doctors"));
    assert!(!out.exists());
}

#[test]
fn sim_default_fixture_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("metrics.csv");
    run_ok(
        telecare()
            .arg("sim")
            .arg("--config")
            .arg(fixture("sim_default.conf"))
            .arg("--out")
            .arg(&out),
    );
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("traditional,1,"));
}

#[test]
fn compare_without_verifiers_reports_zero_paired_differences() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cmp.conf");
    fs::write(
        &config,
        "n_patients = 20\nn_professionals = 2\nn_verifiers = 0\nticks = 200\n",
    )
    .unwrap();
    let out = dir.path().join("compare.csv");
    run_ok(
        telecare()
            .arg("compare")
            .arg("--config")
            .arg(&config)
            .arg("--seeds")
            .arg("1..3")
            .arg("--out")
            .arg(&out),
    );
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // Header + 3 traditional + 3 soc + 4 mode summaries + 2 diff rows.
    assert_eq!(lines.len(), 13);
    let zeros = "0,".repeat(10) + "0";
    assert_eq!(lines[11], format!("diff,mean,{zeros}"));
    assert_eq!(lines[12], format!("diff,sd,{zeros}"));
}

#[test]
fn compare_needs_at_least_two_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cmp.conf");
    fs::write(&config, "ticks = 10\n").unwrap();
    let out = dir.path().join("compare.csv");
    let output = run_err(
        telecare()
            .arg("compare")
            .arg("--config")
            .arg(&config)
            .arg("--seeds")
            .arg("7..7")
            .arg("--out")
            .arg(&out),
    );
    assert!(stderr_of(&output).contains("at least 2 seeds"));
    assert!(!out.exists());
}

#[test]
fn compare_rejects_malformed_seed_range() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cmp.conf");
    fs::write(&config, "ticks = 10\n").unwrap();
    let output = run_err(
        telecare()
            .arg("compare")
            .arg("--config")
            .arg(&config)
            .arg("--seeds")
            .arg("five")
            .arg("--out")
            .arg(dir.path().join("x.csv")),
    );
    assert!(stderr_of(&output).contains("a..b"));
}

#[test]
fn unknown_flags_are_errors() {
    let output = run_err(telecare().arg("sim").arg("--config").arg("x").arg("--frobnicate"));
    assert!(stderr_of(&output).contains("--frobnicate"));
}

#[test]
fn help_documents_every_flag() {
    for (sub, flags) in [
        ("cep", vec!["--rules", "--log", "--out", "--refractory-secs"]),
        ("catalyst", vec!["--registry", "--taxonomy", "--out"]),
        ("sim", vec!["--config", "--out"]),
        ("compare", vec!["--config", "--seeds", "--out"]),
    ] {
        let output = run_ok(telecare().arg(sub).arg("--help"));
        let help = String::from_utf8_lossy(&output.stdout).into_owned();
        for flag in flags {
            assert!(help.contains(flag), "{sub} --help missing {flag}");
        }
    }
}

#[test]
fn missing_input_file_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alerts.csv");
    let output = run_err(
        telecare()
            .arg("cep")
            .arg("--rules")
            .arg(dir.path().join("nope.rules"))
            .arg("--log")
            .arg(dir.path().join("nope.log"))
            .arg("--out")
            .arg(&out),
    );
    assert!(stderr_of(&output).starts_with("error:"));
    assert!(!out.exists());
}

#[test]
fn fixture_paths_exist() {
    for name in [
        "rules_demo.rules",
        "rules_corpus.rules",
        "events_demo.csv",
        "taxonomy.csv",
        "registry_mary_ann.csv",
        "sim_default.conf",
    ] {
        assert!(Path::new(&fixture(name)).exists(), "missing fixture {name}");
    }
}
