//! End-to-end checks of the command-line surface: JSON shapes, exit codes,
//! determinism under sharding, and the assert/apply/query loop against a
//! persisted store.

use serde_json::Value;
use std::process::{Command, Output};

fn divseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divseq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

#[test]
fn kernel_emits_a_replayable_certificate() {
    let out = divseq(&[
        "kernel", "--p", "7", "--q", "16", "--domain", "pos", "--element", "8", "--seed-bound", "1",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["schema"], "divseq-report/1");
    assert_eq!(doc["result"], "yes");
    assert_eq!(doc["certificate"]["element"], "8");
    let rows = doc["certificate"]["handle"]["rows"].as_array().unwrap();
    // the q = 1 row and the single-step relation from 7*1+1 = 8
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["kind"], "q_is_one");
    assert_eq!(rows[1]["kind"], "orbit_step");
    assert_eq!(rows[1]["source"], "1");
}

#[test]
fn kernel_reports_unknown_outside_the_truncation() {
    let out = divseq(&[
        "kernel", "--p", "3", "--q", "2", "--domain", "pos", "--element", "11", "--seed-bound", "1",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["result"], "unknown");
    assert!(!doc["diagnostic"].as_str().unwrap().is_empty());
    assert!(doc.get("certificate").is_none());
}

#[test]
fn census_summary_shape() {
    let out = divseq(&[
        "census", "--p", "3", "--q", "2", "--domain", "pos", "--seeds", "1..1000",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["schema"], "divseq-report/1");
    assert_eq!(doc["cycle_count"], 1);
    assert_eq!(doc["class_lower_bound"], 1);
    assert_eq!(doc["unresolved_count"], 0);
    assert_eq!(doc["cycles"][0]["members"], serde_json::json!(["1", "4", "2"]));
}

#[test]
fn census_is_observationally_identical_across_jobs() {
    let base = divseq(&[
        "census", "--p", "3", "--q", "2", "--domain", "nonzero", "--seeds", "-500..500",
    ]);
    assert!(base.status.success());
    for jobs in ["2", "4", "8"] {
        let sharded = divseq(&[
            "census", "--p", "3", "--q", "2", "--domain", "nonzero", "--seeds", "-500..500",
            "--jobs", jobs,
        ]);
        assert!(sharded.status.success());
        // everything but the echoed jobs count must match byte for byte
        let a = String::from_utf8_lossy(&base.stdout).replace("\"jobs\": 1", "\"jobs\": J");
        let b = String::from_utf8_lossy(&sharded.stdout)
            .replace(&format!("\"jobs\": {jobs}"), "\"jobs\": J");
        assert_eq!(a, b, "jobs={jobs} changed the observable output");
    }
}

#[test]
fn census_csv_lists_every_seed() {
    let out = divseq(&[
        "census", "--p", "3", "--q", "2", "--domain", "pos", "--seeds", "1..50", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,status,cycle_id,detail"));
    assert_eq!(lines.count(), 50);
}

#[test]
fn orbit_rejects_seeds_outside_the_domain() {
    let out = divseq(&["orbit", "--p", "3", "--q", "2", "--domain", "pos", "--seed", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["schema"], "divseq-report/1");
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn orbit_reports_the_cycle_and_path() {
    let out = divseq(&["orbit", "--p", "3", "--q", "2", "--domain", "pos", "--seed", "3"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["status"]["kind"], "reached_cycle");
    assert_eq!(
        doc["status"]["cycle"]["members"],
        serde_json::json!(["1", "4", "2"])
    );
    assert_eq!(doc["path"][0], "3");
    assert_eq!(doc["steps"], 7); // 3 10 5 16 8 4 2 1
}

#[test]
fn negative_range_bounds_require_the_nonzero_domain() {
    let out = divseq(&[
        "census", "--p", "3", "--q", "2", "--domain", "pos", "--seeds", "-10..10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
}

#[test]
fn present_reports_a_trivial_truncated_quotient() {
    let out = divseq(&[
        "present", "--p", "7", "--q", "16", "--domain", "pos", "--seed-bound", "1",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["quotient"]["order"]["kind"], "finite");
    assert_eq!(doc["report"]["quotient"]["order"]["order"], "1");
    assert_eq!(doc["report"]["primes"][0]["prime"], "2");
    assert_eq!(doc["report"]["primes"][0]["in_kernel_certified"], true);
    assert_eq!(doc["report"]["truncated"], true);
}

#[test]
fn overline_certifies_negative_components() {
    let out = divseq(&[
        "overline", "--p", "3", "--q", "2", "--domain", "nonzero", "--seeds", "-50..50",
    ]);
    let doc = stdout_json(&out);
    assert!(doc["certified_count"].as_u64().unwrap() > 0);
    assert_eq!(doc["has_hypotheses"], false);
    let rows = doc["rows"].as_array().unwrap();
    assert!(rows.iter().any(|r| {
        r["provenance"]["kind"] == "value_is_one" && r["provenance"]["value"] == "-1"
    }));
}

#[test]
fn deduce_round_trip_with_store_file() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("facts.json");
    let store_arg = store.to_str().unwrap();

    // two kernel reports feed the store
    for q in ["2", "16"] {
        let report = divseq(&[
            "kernel", "--p", "7", "--q", q, "--domain", "pos", "--element", "8", "--seed-bound",
            "10",
        ]);
        let path = dir.path().join(format!("k{q}.json"));
        std::fs::write(&path, &report.stdout).unwrap();
        let out = divseq(&[
            "deduce", "--store", store_arg, "--assert", &format!("@{}", path.display()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }

    // apply the rules and query both quotient directions
    let out = divseq(&["deduce", "--store", store_arg, "--apply"]);
    let doc = stdout_json(&out);
    assert!(doc["derived"].as_array().unwrap().len() > 2);

    let query = r#"{"kind":"quotient_of","groups":[{"p":"7","q":"16","domain":"positive_integers","variant":"h"},{"p":"7","q":"2","domain":"positive_integers","variant":"h"}]}"#;
    let out = divseq(&["deduce", "--store", store_arg, "--query", query]);
    let doc = stdout_json(&out);
    let hits = doc["query"].as_array().unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0]["fact"]["status"]["kind"], "certified");
    assert_eq!(hits[0]["premises"].as_array().unwrap().len(), 2);

    // a hypothesis taints downstream facts as conditional
    let out = divseq(&[
        "deduce", "--store", store_arg, "--assert",
        r#"{"hypothesis":{"kind":"single_class","params":{"p":"7","q":"2","domain":"positive_integers"}}}"#,
        "--apply",
    ]);
    let doc = stdout_json(&out);
    assert!(doc["derived"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["status"]["kind"] == "conditional"));

    // tampering with a stored certificate coefficient is caught on reload
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&store).unwrap()).unwrap();
    let coefficient = &mut doc["facts"][0]["derivation"]["witness"]["coefficients"][0][1];
    assert_eq!(*coefficient, serde_json::json!("3"));
    *coefficient = serde_json::json!("4");
    std::fs::write(&store, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let out = divseq(&["deduce", "--store", store_arg, "--query", r#"{"id":0}"#]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "replay_failure");
}

#[test]
fn deduce_accepts_power_quotient_requests() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("facts.json");
    let out = divseq(&[
        "deduce", "--store", store.to_str().unwrap(), "--assert",
        r#"{"request_power_quotient":{"p":"3","q":"2","n":3,"domain":"pos"}}"#,
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["asserted"].as_array().unwrap().len(), 1);
    let out = divseq(&[
        "deduce", "--store", store.to_str().unwrap(), "--query", r#"{"id":0}"#,
    ]);
    let doc = stdout_json(&out);
    let fact = &doc["query"][0]["fact"];
    assert_eq!(fact["statement"]["kind"], "quotient_of");
    assert_eq!(fact["statement"]["quotient"]["q"], "2");
    assert_eq!(fact["statement"]["of"]["q"], "8");
    assert_eq!(fact["status"]["kind"], "certified");
}

#[test]
fn present_with_fixed_prime_bound_logs_exclusions() {
    let out = divseq(&[
        "present", "--p", "3", "--q", "2", "--domain", "pos", "--seed-bound", "20",
        "--prime-bound", "7",
    ]);
    let doc = stdout_json(&out);
    assert!(!doc["excluded"].as_array().unwrap().is_empty());
    // the harvested basis stays under the bound
    assert!(doc["basis_size"].as_u64().unwrap() <= 4);

    // --prime-bound and --adaptive are mutually exclusive
    let out = divseq(&[
        "present", "--p", "3", "--q", "2", "--domain", "pos", "--prime-bound", "7", "--adaptive",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn present_bounded_report_keeps_the_sign_class() {
    let out = divseq(&[
        "present", "--p", "3", "--q", "2", "--domain", "nonzero", "--seed-bound", "50",
        "--depth", "200", "--report-bound", "10",
    ]);
    let doc = stdout_json(&out);
    let quotient = &doc["report"]["quotient"];
    // sign slot plus the primes up to 10; nothing identifies -1 with 1, so
    // an order-2 class survives
    assert_eq!(quotient["ambient_rank"], 5);
    assert_eq!(quotient["order"]["order"], "2");
}

#[test]
fn overline_hypotheses_are_opt_in() {
    let args = [
        "overline", "--p", "5", "--q", "2", "--domain", "pos", "--seeds", "1..60",
        "--max-steps", "2000", "--max-magnitude", "1000000000000000000",
    ];
    let strict = stdout_json(&divseq(&args));
    assert_eq!(strict["has_hypotheses"], false);

    let mut with_flag: Vec<&str> = args.to_vec();
    with_flag.push("--allow-hypotheses");
    let relaxed = stdout_json(&divseq(&with_flag));
    assert_eq!(relaxed["has_hypotheses"], true);
    assert!(relaxed["row_count"].as_u64().unwrap() > strict["row_count"].as_u64().unwrap());
    // certified rows are the same either way
    assert_eq!(relaxed["certified_count"], strict["certified_count"]);
}

#[test]
fn orbit_honors_budget_flags() {
    let out = divseq(&[
        "orbit", "--p", "5", "--q", "2", "--domain", "pos", "--seed", "7", "--max-steps", "10",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["status"]["kind"], "budget_exceeded");
    assert_eq!(doc["status"]["steps"], 10);

    let out = divseq(&[
        "orbit", "--p", "5", "--q", "2", "--domain", "pos", "--seed", "7", "--max-magnitude",
        "100",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["status"]["kind"], "magnitude_exceeded");
}

#[test]
fn malformed_flags_exit_with_usage_code() {
    let out = divseq(&["census", "--p", "three", "--q", "2", "--domain", "pos", "--seeds", "1..10"]);
    assert_eq!(out.status.code(), Some(1));
    let out = divseq(&["orbit", "--p", "3", "--q", "1", "--domain", "pos", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = divseq(&["nonsense"]);
    assert_eq!(out.status.code(), Some(1));
}
