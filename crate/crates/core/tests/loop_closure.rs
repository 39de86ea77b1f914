//! End-to-end loop closure: for every server policy variant, a scan against
//! a mock fleet must classify exactly the behavior the fleet was configured
//! with. Expected outcomes are written out by hand here, independent of the
//! decision logic the mock shares with the simulator.

use epdg_audit::attack_sim::{EpdgPolicy, ServerPreference, UnsupportedAction};
use epdg_audit::discovery::PlmnId;
use epdg_audit::mock::{loopback_fleet, MockFleet};
use epdg_audit::scanner::{self, ProbeConfig, ProbeOutcome};

fn cfg() -> ProbeConfig {
    ProbeConfig {
        timeout_ms: 300,
        retries: 0,
        inter_probe_delay_ms: 0,
        seed: Some(4242),
        ..ProbeConfig::default()
    }
}

fn plmn(i: usize) -> PlmnId {
    format!("9{:02}-{:02}", i / 100, i % 100).parse().unwrap()
}

fn policy(supported: &[u16], preference: ServerPreference) -> EpdgPolicy {
    EpdgPolicy {
        supported_groups: supported.iter().copied().collect(),
        preference,
        ..EpdgPolicy::accept_all_modp()
    }
}

/// What a probe of `group` must classify as, stated per policy semantics.
#[derive(Debug, PartialEq)]
enum Expect {
    Accepted(u16),
    Switch(u16, u16),
    Error,
    Ignored,
}

fn check(outcome: &ProbeOutcome, expect: &Expect, what: &str) {
    match (outcome, expect) {
        (ProbeOutcome::Accepted { group, .. }, Expect::Accepted(g)) if group == g => {}
        (ProbeOutcome::SwitchProposed { from, to }, Expect::Switch(f, t))
            if from == f && to == t => {}
        (ProbeOutcome::ErrorNotify { .. }, Expect::Error) => {}
        (ProbeOutcome::Ignored { .. }, Expect::Ignored) => {}
        _ => panic!("{what}: expected {expect:?}, classified {outcome:?}"),
    }
}

#[test]
fn every_policy_variant_round_trips_through_the_wire() {
    let mut drop_unsupported = policy(&[2], ServerPreference::AcceptClientChoice);
    drop_unsupported.on_unsupported = UnsupportedAction::Ignore;

    // (policy, probed group, expected classification)
    type Case = (&'static str, EpdgPolicy, Vec<(u16, Expect)>);
    let cases: Vec<Case> = vec![
        (
            "accept-client-choice",
            policy(&[1, 2, 14], ServerPreference::AcceptClientChoice),
            vec![
                (1, Expect::Accepted(1)),
                (2, Expect::Accepted(2)),
                (14, Expect::Accepted(14)),
                (5, Expect::Error),
                (19, Expect::Error),
            ],
        ),
        (
            "demand-strongest",
            policy(&[2, 14], ServerPreference::DemandStrongest),
            vec![
                // A single-group offer of a supported group leaves nothing
                // stronger to demand; capability probing sees an accept.
                (2, Expect::Accepted(2)),
                (14, Expect::Accepted(14)),
                (5, Expect::Switch(5, 14)),
                (19, Expect::Switch(19, 14)),
            ],
        ),
        (
            "demand-specific-2",
            policy(&[2, 14], ServerPreference::DemandSpecific(2)),
            vec![
                (2, Expect::Accepted(2)),
                (14, Expect::Switch(14, 2)),
                (5, Expect::Switch(5, 2)),
            ],
        ),
        (
            "drop-unsupported",
            drop_unsupported,
            vec![
                (2, Expect::Accepted(2)),
                (14, Expect::Ignored),
                (19, Expect::Ignored),
            ],
        ),
        (
            "error-always",
            policy(&[], ServerPreference::AcceptClientChoice),
            vec![(1, Expect::Error), (2, Expect::Error), (18, Expect::Error)],
        ),
        (
            "ecp-capable",
            policy(&[2, 19], ServerPreference::AcceptClientChoice),
            vec![(19, Expect::Accepted(19)), (2, Expect::Accepted(2))],
        ),
    ];

    let spec = loopback_fleet(
        cases
            .iter()
            .enumerate()
            .map(|(i, (_, p, _))| (plmn(i), p.clone()))
            .collect(),
        Some(99),
    );
    let fleet = MockFleet::spawn(&spec).unwrap();
    let targets = fleet.targets();
    let cfg = cfg();

    for (i, (name, _, expectations)) in cases.iter().enumerate() {
        for (group, expect) in expectations {
            let outcome = scanner::probe_group(&targets[i], *group, &cfg);
            check(&outcome, expect, &format!("{name}, DH{group}"));
        }
    }
    fleet.shutdown();
}

#[test]
fn ecp_accept_is_flagged_unverified() {
    let spec = loopback_fleet(
        vec![(plmn(40), policy(&[19], ServerPreference::AcceptClientChoice))],
        Some(7),
    );
    let fleet = MockFleet::spawn(&spec).unwrap();
    let outcome = scanner::probe_group(&fleet.targets()[0], 19, &cfg());
    match outcome {
        ProbeOutcome::Accepted {
            unverified_keyshare,
            ..
        } => assert!(unverified_keyshare),
        other => panic!("{other:?}"),
    }
    fleet.shutdown();
}

#[test]
fn survey_is_deterministic_against_identical_fleets() {
    let policies = vec![
        (plmn(50), policy(&[1, 2], ServerPreference::AcceptClientChoice)),
        (plmn(51), policy(&[2, 14, 18], ServerPreference::DemandStrongest)),
    ];
    let groups = [1u16, 2, 5, 14, 18];
    let mut survey_cfg = cfg();
    survey_cfg.now_iso = Some("1970-01-01T00:00:00Z".into());

    let run = |seed| {
        let spec = loopback_fleet(policies.clone(), Some(seed));
        let fleet = MockFleet::spawn(&spec).unwrap();
        let results: Vec<_> = fleet
            .targets()
            .iter()
            .map(|t| scanner::survey(t, &groups, &survey_cfg))
            .collect();
        fleet.shutdown();
        results
    };
    let first = run(31337);
    let second = run(31337);
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a.per_group, b.per_group, "identical policy, identical survey");
        assert_eq!(a.support_label, b.support_label);
    }
}

#[test]
fn survey_labels_match_fleet_construction() {
    let all = [1u16, 2, 5, 14, 15, 16, 17, 18];
    let policies = vec![
        (plmn(60), policy(&[1, 2], ServerPreference::AcceptClientChoice)),
        (plmn(61), policy(&all, ServerPreference::AcceptClientChoice)),
        (plmn(62), policy(&[], ServerPreference::AcceptClientChoice)),
        (plmn(63), policy(&[2, 14], ServerPreference::AcceptClientChoice)),
    ];
    let spec = loopback_fleet(policies, Some(8));
    let fleet = MockFleet::spawn(&spec).unwrap();
    let cfg = cfg();
    let labels: Vec<String> = fleet
        .targets()
        .iter()
        .map(|t| scanner::survey(t, &all, &cfg).support_label)
        .collect();
    assert_eq!(labels, vec!["DH1+DH2", "DH1-DH18", "none", "DH2+DH14"]);
    fleet.shutdown();
}

#[test]
fn non_esp_marker_framing_reaches_the_mock() {
    // Port-4500 style framing: the scanner prefixes the marker, the mock
    // strips it and still answers.
    let spec = loopback_fleet(
        vec![(plmn(80), policy(&[2], ServerPreference::AcceptClientChoice))],
        Some(80),
    );
    let fleet = MockFleet::spawn(&spec).unwrap();
    let mut marked_cfg = cfg();
    marked_cfg.non_esp_marker = true;
    let outcome = scanner::probe_group(&fleet.targets()[0], 2, &marked_cfg);
    assert!(outcome.is_accepted(), "{outcome:?}");
    fleet.shutdown();
}

#[test]
fn collect_keys_counts_non_accepts_as_gaps() {
    // Silence and redirects both appear as gaps, never observations.
    let mut silent = policy(&[2], ServerPreference::AcceptClientChoice);
    silent.on_unsupported = UnsupportedAction::Ignore;
    let spec = loopback_fleet(vec![(plmn(70), silent)], Some(70));
    let fleet = MockFleet::spawn(&spec).unwrap();
    let collection = scanner::collect_keys(&fleet.targets()[0], 14, 3, &cfg()).unwrap();
    assert!(collection.observations.is_empty());
    assert_eq!(collection.gaps.len(), 3);
    assert!(scanner::collect_keys(&fleet.targets()[0], 19, 1, &cfg()).is_err());
    fleet.shutdown();
}
