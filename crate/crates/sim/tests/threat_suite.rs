//! Verdicts of the attack suite: every countermeasure has a configuration
//! where it blocks, and every documented weakness one where the attack
//! goes through.

use std::collections::BTreeMap;

use gridkey_sim::threats::{self, Verdict};

fn modes(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn finding(report: &threats::AttackReport, label: &str) -> Verdict {
    report
        .findings
        .iter()
        .find(|f| f.label == label)
        .unwrap_or_else(|| panic!("missing finding {label}"))
        .verdict
}

#[test]
fn golden_suite_verdict_vector() {
    let expected = [
        ("eavesdrop", "encryption=on", Verdict::Blocked),
        ("eavesdrop", "encryption=off", Verdict::Succeeded),
        ("replay", "counters=on", Verdict::Blocked),
        ("replay", "counters=off", Verdict::Succeeded),
        ("replay", "counters=off,modified=yes", Verdict::Blocked),
        ("spoof", "clone=random", Verdict::Blocked),
        ("spoof", "clone=replay,puf=faithful", Verdict::Succeeded),
        ("spoof", "clone=replay,puf=hardened", Verdict::Blocked),
        ("revoked", "backend=acp,secrecy=forward", Verdict::Blocked),
        ("revoked", "backend=lock,secrecy=forward", Verdict::Blocked),
        ("revoked", "secrecy=none", Verdict::Succeeded),
        ("revoked", "stale=pubinfo", Verdict::Blocked),
        ("fake_utility", "-", Verdict::Succeeded),
        ("physical_dump", "keys=static", Verdict::Succeeded),
        ("physical_dump", "keys=puf", Verdict::Succeeded),
        ("default_password", "state=fresh", Verdict::Succeeded),
        ("default_password", "state=rotated", Verdict::Blocked),
        ("dos", "throttle=off", Verdict::Succeeded),
        ("dos", "throttle=on", Verdict::Blocked),
    ];
    let reports = threats::golden_suite(7).unwrap();
    assert_eq!(reports.len(), expected.len());
    for (report, (id, mode, verdict)) in reports.iter().zip(expected) {
        assert_eq!(report.scenario, id);
        assert_eq!(report.mode_string(), mode);
        assert_eq!(report.verdict, verdict, "{id} [{mode}]: {}", report.evidence);
    }
}

#[test]
fn verdicts_are_stable_across_seeds() {
    let v = |seed| -> Vec<Verdict> {
        threats::golden_suite(seed)
            .unwrap()
            .iter()
            .map(|r| r.verdict)
            .collect()
    };
    assert_eq!(v(1), v(2));
    assert_eq!(v(1), v(424242));
}

#[test]
fn physical_dump_findings_differ_by_key_storage() {
    let puf = threats::run_standalone("physical_dump", &modes(&[("keys", "puf")]), 3).unwrap();
    assert_eq!(finding(&puf, "password_login"), Verdict::Succeeded);
    assert_eq!(finding(&puf, "envelope_decrypt"), Verdict::Blocked);
    assert_eq!(finding(&puf, "bgkm_secret"), Verdict::Blocked);
    assert_eq!(finding(&puf, "serial_key_capture"), Verdict::Blocked);

    let st = threats::run_standalone("physical_dump", &modes(&[("keys", "static")]), 3).unwrap();
    assert_eq!(finding(&st, "password_login"), Verdict::Succeeded);
    assert_eq!(finding(&st, "envelope_decrypt"), Verdict::Succeeded);
    assert_eq!(finding(&st, "bgkm_secret"), Verdict::Succeeded);
    assert_eq!(finding(&st, "serial_key_capture"), Verdict::Succeeded);
}

#[test]
fn physical_dump_static_compromises_lock_backend_too() {
    let st = threats::run_standalone(
        "physical_dump",
        &modes(&[("keys", "static"), ("backend", "lock")]),
        4,
    )
    .unwrap();
    assert_eq!(finding(&st, "bgkm_secret"), Verdict::Succeeded);
}

#[test]
fn eavesdrop_always_reports_traffic_metadata() {
    let on = threats::run_standalone("eavesdrop", &modes(&[("encryption", "on")]), 5).unwrap();
    assert_eq!(finding(&on, "payload"), Verdict::Blocked);
    assert_eq!(finding(&on, "traffic_analysis"), Verdict::Succeeded);
}

#[test]
fn fake_utility_findings() {
    let r = threats::run_standalone("fake_utility", &BTreeMap::new(), 6).unwrap();
    assert_eq!(r.verdict, Verdict::Succeeded);
    assert_eq!(finding(&r, "harvested_pairs"), Verdict::Succeeded);
    assert_eq!(finding(&r, "preauth_cleartext"), Verdict::Succeeded);
    assert_eq!(finding(&r, "bgkm_payload"), Verdict::Blocked);
}

#[test]
fn perfect_clone_defeats_challenge_response() {
    // The authentication rests on the assumption that a physical duplicate
    // is infeasible; a perfect clone by construction authenticates.
    let r = threats::run_standalone("spoof", &modes(&[("clone", "perfect")]), 8).unwrap();
    assert_eq!(r.verdict, Verdict::Succeeded);
}

#[test]
fn revoked_collector_finding_always_blocked() {
    for mode in [modes(&[("secrecy", "forward")]), modes(&[("secrecy", "none")])] {
        let r = threats::run_standalone("revoked", &mode, 9).unwrap();
        assert_eq!(finding(&r, "collector_decrypt"), Verdict::Blocked);
    }
}

#[test]
fn selection_and_unknown_scenarios() {
    let subset = threats::select_from_matrix("replay").unwrap();
    assert_eq!(subset.len(), 3);
    assert!(subset.iter().all(|(id, _)| *id == "replay"));
    assert!(threats::select_from_matrix("meteor").is_err());
    assert!(threats::run_standalone("meteor", &BTreeMap::new(), 1).is_err());
}
