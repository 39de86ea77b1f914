//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! and enforcing its runtime budget. Run with `--nocapture` to see the lines
//! on success.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use epdg_audit::attack_sim::{
    self, EpdgPolicy, Layer, Outcome, Scenario, ServerPreference, UnsupportedAction,
};
use epdg_audit::config_audit::{self, Category, ConfigRecord, RuleSet};
use epdg_audit::datafiles;
use epdg_audit::dh_engine;
use epdg_audit::discovery::PlmnId;
use epdg_audit::ike_codec::{
    self, AttributeValue, IkeHeader, IkeMessage, KePayload, NoncePayload, NotifyPayload,
    OpaquePayload, Payload, Proposal, SaPayload, Transform, TransformAttribute, TransformType,
};
use epdg_audit::key_analysis::{self, KeyObservation};
use epdg_audit::mock::{loopback_fleet, MockFleet};
use epdg_audit::scanner::{self, ProbeConfig, ToleranceResult};

fn criterion<F>(number: u32, name: &str, budget: Duration, body: F)
where
    F: FnOnce() + std::panic::UnwindSafe,
{
    let start = Instant::now();
    let result = std::panic::catch_unwind(body);
    let elapsed = start.elapsed();
    let verdict = match &result {
        Ok(()) if elapsed <= budget => "PASS",
        _ => "FAIL",
    };
    println!(
        "ACCEPTANCE {number} ({name}): {verdict} in {elapsed:.2?} (budget {budget:?})"
    );
    if let Err(panic) = result {
        std::panic::resume_unwind(panic);
    }
    assert!(
        elapsed <= budget,
        "criterion {number} blew its budget: {elapsed:?} > {budget:?}"
    );
}

fn quick_cfg(seed: u64) -> ProbeConfig {
    ProbeConfig {
        timeout_ms: 400,
        retries: 0,
        inter_probe_delay_ms: 0,
        seed: Some(seed),
        ..ProbeConfig::default()
    }
}

fn load_scenario(name: &str) -> Scenario {
    let path = datafiles::data_dir().join(datafiles::SCENARIO_DIR).join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    serde_json::from_str(&text).unwrap()
}

// 1. DH agreement across every MODP group plus exhaustive toy-group oracle.
#[test]
fn criterion_1_dh_agreement() {
    criterion(1, "dh-agreement", Duration::from_secs(60), || {
        let mut rng = ChaCha20Rng::seed_from_u64(0xacce);
        for id in dh_engine::MODP_GROUP_IDS {
            let group = dh_engine::group_params(id).unwrap();
            for round in 0..50 {
                let alice = dh_engine::gen_keypair(group, &mut rng);
                let bob = dh_engine::gen_keypair(group, &mut rng);
                let ka = dh_engine::shared_secret(group, &alice.private, &bob.public).unwrap();
                let kb = dh_engine::shared_secret(group, &bob.private, &alice.public).unwrap();
                assert_eq!(ka.k, kb.k, "group {id} round {round}");
                assert!(ka.k >= BigUint::from(1u8) && ka.k < group.p);
            }
        }

        // Brute-force repeated-multiplication oracle, exhaustive exponent
        // sweeps on toy groups below 2^16: the oracle builds g^a by
        // multiplying g in one at a time.
        for (p, g) in [(23u64, 5u64), (251, 6), (4093, 2), (65521, 17)] {
            let group = dh_engine::DhGroup::custom(BigUint::from(p), BigUint::from(g));
            let mut oracle = g % p; // g^1
            for a in 2..(p - 1) {
                oracle = oracle * g % p;
                let fast = group.g.modpow(&BigUint::from(a), &group.p);
                assert_eq!(
                    fast,
                    BigUint::from(oracle),
                    "oracle mismatch at p={p} a={a}"
                );
            }
        }
    });
}

// 2. Codec round-trip over randomized valid messages plus a decoder fuzz.
#[test]
fn criterion_2_codec_round_trip() {
    criterion(2, "codec-round-trip", Duration::from_secs(30), || {
        let mut rng = ChaCha20Rng::seed_from_u64(0xc0dec);
        for i in 0..1_000 {
            let msg = random_valid_message(&mut rng);
            let wire = ike_codec::encode(&msg).unwrap();
            assert_eq!(wire.len() as u32, msg.header.length, "message {i}");
            let back = ike_codec::decode(&wire).unwrap();
            assert_eq!(back, msg, "decode(encode) identity, message {i}");
            assert_eq!(
                ike_codec::encode(&back).unwrap(),
                wire,
                "encode(decode) identity, message {i}"
            );
        }
        for _ in 0..10_000 {
            let len = (rng.next_u32() % 512) as usize;
            let mut raw = vec![0u8; len];
            rng.fill_bytes(&mut raw);
            let _ = ike_codec::decode(&raw);
            let _ = scanner::classify_raw(&raw, 2);
        }
    });
}

fn random_valid_message(rng: &mut ChaCha20Rng) -> IkeMessage {
    let mut ispi = [0u8; 8];
    rng.fill_bytes(&mut ispi);
    let mut rspi = [0u8; 8];
    rng.fill_bytes(&mut rspi);
    let n_payloads = rng.gen_range(0..5);
    let payloads: Vec<Payload> = (0..n_payloads).map(|_| random_payload(rng)).collect();
    IkeMessage::new(
        IkeHeader {
            initiator_spi: ispi,
            responder_spi: rspi,
            next_payload: 0,
            version: ike_codec::VERSION_IKEV2,
            exchange_type: ike_codec::ExchangeType(34 + rng.gen_range(0..4)),
            flags: if rng.gen_bool(0.5) {
                ike_codec::flags::INITIATOR
            } else {
                ike_codec::flags::RESPONSE
            },
            message_id: rng.next_u32(),
            length: 0,
        },
        payloads,
    )
}

fn random_payload(rng: &mut ChaCha20Rng) -> Payload {
    match rng.gen_range(0..5) {
        0 => {
            let n_props = rng.gen_range(1..3);
            let proposals = (1..=n_props)
                .map(|number| {
                    let mut transforms = vec![
                        Transform::new(TransformType::ENCR, 12),
                        Transform::new(TransformType::PRF, rng.gen_range(1..8)),
                        Transform::new(TransformType::INTEG, rng.gen_range(1..15)),
                    ];
                    if rng.gen_bool(0.5) {
                        transforms[0]
                            .attributes
                            .push(TransformAttribute::key_length(128 << rng.gen_range(0..2)));
                    }
                    if rng.gen_bool(0.2) {
                        transforms[1].attributes.push(TransformAttribute {
                            attr_type: rng.gen_range(0..0x7fff),
                            value: AttributeValue::Long(
                                (0..rng.gen_range(0..10)).map(|_| rng.gen()).collect(),
                            ),
                        });
                    }
                    for _ in 0..rng.gen_range(1..4) {
                        const GROUPS: [u16; 10] = [1, 2, 5, 14, 15, 16, 17, 18, 19, 31];
                        transforms.push(Transform::new(
                            TransformType::KE_GROUP,
                            GROUPS[rng.gen_range(0..GROUPS.len())],
                        ));
                    }
                    Proposal {
                        number,
                        protocol: ike_codec::PROTOCOL_IKE,
                        spi: (0..if rng.gen_bool(0.2) { 8 } else { 0 })
                            .map(|_| rng.gen())
                            .collect(),
                        transforms,
                    }
                })
                .collect();
            Payload::Sa(SaPayload { proposals })
        }
        1 => {
            const GROUPS: [u16; 6] = [1, 2, 5, 14, 19, 31];
            let group = GROUPS[rng.gen_range(0..GROUPS.len())];
            let len = ike_codec::ke_payload_len(group).unwrap();
            let mut data = vec![0u8; len];
            rng.fill_bytes(&mut data);
            Payload::KeyExchange(KePayload { group, data })
        }
        2 => {
            let mut data = vec![0u8; rng.gen_range(16..=256)];
            rng.fill_bytes(&mut data);
            Payload::Nonce(NoncePayload { data })
        }
        3 => Payload::Notify(if rng.gen_bool(0.5) {
            const GROUPS: [u16; 4] = [1, 2, 14, 18];
            NotifyPayload::invalid_ke(GROUPS[rng.gen_range(0..GROUPS.len())])
        } else {
            NotifyPayload {
                protocol_id: 0,
                spi: Vec::new(),
                notify_type: ike_codec::NotifyType(rng.gen()),
                data: (0..rng.gen_range(0..12)).map(|_| rng.gen()).collect(),
            }
        }),
        _ => Payload::Opaque(OpaquePayload {
            type_code: rng.gen_range(42..=255),
            flags: if rng.gen_bool(0.2) { 0x80 } else { 0 },
            body: (0..rng.gen_range(0..40)).map(|_| rng.gen()).collect(),
        }),
    }
}

// 3. fig7 scenario: server-initiated switch to the weaker offered group,
// exactly the three depicted messages.
#[test]
fn criterion_3_fig7_reproduction() {
    criterion(3, "fig7-switch-sequence", Duration::from_secs(1), || {
        let scenario = load_scenario("fig7.json");
        let transcript = attack_sim::run_scenario(&scenario).unwrap();
        assert_eq!(transcript.negotiated_group, Some(2));
        assert_eq!(transcript.outcome, Outcome::Success);
        let msgs = transcript.message_summaries();
        assert_eq!(
            msgs,
            vec![
                "SA_INIT([DH2, DH14], KE_DH14)",
                "INVALID_KE(USE DH2)",
                "SA_INIT([DH2, DH14], KE_DH2)",
            ],
            "exactly the depicted 3-message sequence"
        );
        // Deterministic: identical bytes on a second run.
        let again = attack_sim::run_scenario(&scenario).unwrap();
        assert_eq!(
            serde_json::to_vec(&transcript).unwrap(),
            serde_json::to_vec(&again).unwrap()
        );
    });
}

// 4. fig8 scenario: spoofed fixation to a never-offered group.
#[test]
fn criterion_4_fig8_reproduction() {
    criterion(4, "fig8-unoffered-fixation", Duration::from_secs(1), || {
        let scenario = load_scenario("fig8.json");
        assert_eq!(scenario.ue.offered_groups, vec![14]);
        let transcript = attack_sim::run_scenario(&scenario).unwrap();
        assert_eq!(transcript.outcome, Outcome::Downgraded(1));
        let msgs = transcript.message_summaries();
        assert_eq!(
            msgs,
            vec![
                "SA_INIT([DH14], KE_DH14)",
                "INVALID_KE(USE DH1)",
                "SA_INIT([DH1], KE_DH1)",
            ]
        );

        // A compliant client rejects the same fixation.
        let mut compliant = scenario.clone();
        compliant.ue.invalid_ke_rule = attack_sim::InvalidKeRule::OfferedOnly;
        let transcript = attack_sim::run_scenario(&compliant).unwrap();
        assert!(
            matches!(transcript.outcome, Outcome::AttackFailed(ref r) if r.contains("unoffered")),
            "{:?}",
            transcript.outcome
        );
    });
}

fn table7_plmns() -> Vec<PlmnId> {
    [
        "232-05", "231-03", "216-01", "724-29", "724-26", "250-99", "502-11", "502-153",
        "510-09", "502-18", "502-16", "410-06", "429-01",
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect()
}

// 5. Static-key census over a 13-operator fleet sharing a 10-exponent pool.
#[test]
fn criterion_5_static_key_census() {
    criterion(5, "static-key-census", Duration::from_secs(120), || {
        let pool: Vec<String> = (1u32..=10)
            .map(|i| format!("{:064x}", 0xd00d_0000u64 + u64::from(i) * 0x1111))
            .collect();
        let policies: Vec<(PlmnId, EpdgPolicy)> = table7_plmns()
            .into_iter()
            .map(|plmn| {
                (
                    plmn,
                    EpdgPolicy {
                        supported_groups: [2u16].into_iter().collect(),
                        ..EpdgPolicy::accept_all_modp()
                    },
                )
            })
            .collect();
        let mut spec = loopback_fleet(policies, Some(55));
        spec.shared_key_pool = Some(pool.clone());
        let fleet = MockFleet::spawn(&spec).unwrap();
        let targets = fleet.targets();

        let cfg = quick_cfg(5);
        let collections = scanner::for_each_target_parallel(&targets, 13, |target| {
            scanner::collect_keys(target, 2, 500, &cfg).unwrap()
        });
        let mut observations: Vec<KeyObservation> = Vec::new();
        for collection in collections {
            assert!(collection.gaps.is_empty(), "no gaps expected on loopback");
            observations.extend(collection.observations);
        }
        assert_eq!(observations.len(), 13 * 500);

        let report = key_analysis::census(&observations);
        assert_eq!(report.distinct_keys, 10, "exactly the pool size");
        assert_eq!(report.sharing_matrix.len(), 10);
        for (fp, operators) in &report.sharing_matrix {
            assert_eq!(operators.len(), 13, "key {fp} must appear at all 13 operators");
        }

        // Coupon-collector completeness, checked against a Monte-Carlo
        // oracle within 3 standard errors.
        let exact = key_analysis::coverage_confidence(10, 500).unwrap();
        assert!(exact > 0.9999, "exact = {exact}");
        let trials = 100_000u32;
        let mut rng = ChaCha20Rng::seed_from_u64(0x5ca1e);
        let mut complete = 0u32;
        for _ in 0..trials {
            let mut mask = 0u16;
            for _ in 0..500 {
                mask |= 1 << rng.gen_range(0..10);
                if mask == 0x3ff {
                    break;
                }
            }
            if mask == 0x3ff {
                complete += 1;
            }
        }
        let estimate = f64::from(complete) / f64::from(trials);
        let se = (exact * (1.0 - exact) / f64::from(trials)).sqrt().max(1e-12);
        assert!(
            (estimate - exact).abs() <= 3.0 * se,
            "monte-carlo {estimate} vs exact {exact}"
        );
        fleet.shutdown();
    });
}

// 6. Tolerance classifier against a ground-truth fleet with the published
// behavior split. The four shares sum to 99% (rounding in the source
// percentages), so the exact-count fleet has 41+42+12+4 = 99 mocks.
#[test]
fn criterion_6_tolerance_proportions() {
    criterion(6, "tolerance-proportions", Duration::from_secs(120), || {
        let all_modp: BTreeSet<u16> = dh_engine::MODP_GROUP_IDS.into_iter().collect();
        let plmn =
            |i: usize| -> PlmnId { format!("9{:02}-{:02}", i / 100, i % 100).parse().unwrap() };
        let mut policies = Vec::new();
        for i in 0..41 {
            policies.push((
                plmn(i),
                EpdgPolicy {
                    supported_groups: all_modp.clone(),
                    preference: ServerPreference::AcceptClientChoice,
                    ..EpdgPolicy::accept_all_modp()
                },
            ));
        }
        for i in 41..83 {
            policies.push((
                plmn(i),
                EpdgPolicy {
                    supported_groups: all_modp.clone(),
                    preference: ServerPreference::DemandStrongest,
                    ..EpdgPolicy::accept_all_modp()
                },
            ));
        }
        for i in 83..95 {
            policies.push((
                plmn(i),
                EpdgPolicy {
                    supported_groups: BTreeSet::new(),
                    preference: ServerPreference::AcceptClientChoice,
                    on_unsupported: UnsupportedAction::ErrorNotify,
                    ..EpdgPolicy::accept_all_modp()
                },
            ));
        }
        for i in 95..99 {
            policies.push((
                plmn(i),
                EpdgPolicy {
                    supported_groups: [1u16, 2].into_iter().collect(),
                    preference: ServerPreference::DemandSpecific(1),
                    ..EpdgPolicy::accept_all_modp()
                },
            ));
        }
        assert_eq!(policies.len(), 99);

        let spec = loopback_fleet(policies, Some(66));
        let fleet = MockFleet::spawn(&spec).unwrap();
        let targets = fleet.targets();
        let cfg = quick_cfg(6);
        let results = scanner::for_each_target_parallel(&targets, 16, |target| {
            scanner::weak_preference_test(target, &cfg)
        });

        let mut tolerated = 0;
        let mut upgrade = 0;
        let mut downgrade = 0;
        let mut error = 0;
        for result in &results {
            match result {
                ToleranceResult::Tolerated => tolerated += 1,
                ToleranceResult::UpgradeRequested { group } => {
                    assert_eq!(*group, 18, "strongest-demanding mocks pick DH18");
                    upgrade += 1;
                }
                ToleranceResult::DowngradeIndicated { group } => {
                    assert_eq!(*group, 1);
                    downgrade += 1;
                }
                ToleranceResult::Error => error += 1,
            }
        }
        assert_eq!(
            (tolerated, upgrade, error, downgrade),
            (41, 42, 12, 4),
            "classification must reproduce the fleet's configured split exactly"
        );
        fleet.shutdown();
    });
}

// 7. Cross-group exposure: shared exponent detected, independent not.
#[test]
fn criterion_7_cross_group_exposure() {
    criterion(7, "cross-group-exposure", Duration::from_secs(10), || {
        let shared_exponent = format!("{:064x}", 0xfeed_beef_cafe_u64);
        let plmn: PlmnId = "232-05".parse().unwrap();
        let mut spec = loopback_fleet(
            vec![(
                plmn.clone(),
                EpdgPolicy {
                    supported_groups: [1u16, 14].into_iter().collect(),
                    ..EpdgPolicy::accept_all_modp()
                },
            )],
            Some(77),
        );
        spec.shared_key_pool = Some(vec![shared_exponent.clone()]);
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let cfg = quick_cfg(7);
        let mut observations = Vec::new();
        for group in [1u16, 14] {
            observations.extend(
                scanner::collect_keys(target, group, 3, &cfg)
                    .unwrap()
                    .observations,
            );
        }
        fleet.shutdown();
        let exponents = vec![BigUint::from_bytes_be(&hex::decode(&shared_exponent).unwrap())];
        let evidence = key_analysis::cross_group_exposure(&observations, Some(&exponents));
        assert_eq!(evidence.len(), 1, "{evidence:?}");
        match &evidence[0] {
            key_analysis::ExposureEvidence::SharedExponent { groups, .. } => {
                assert_eq!(groups.iter().copied().collect::<Vec<u16>>(), vec![1, 14]);
            }
            other => panic!("unexpected evidence {other:?}"),
        }

        // Independent exponents per group: no shared-exponent claim.
        let g1 = dh_engine::group_params(1).unwrap();
        let g14 = dh_engine::group_params(14).unwrap();
        let a1 = BigUint::from(0x1234_5678_9abc_u64);
        let a14 = BigUint::from(0xcba9_8765_4321_u64);
        let fp = |g: &dh_engine::DhGroup, a: &BigUint| {
            let kp = dh_engine::keypair_from_exponent(g, a.clone()).unwrap();
            dh_engine::pubkey_fingerprint(&kp.public, g).unwrap()
        };
        let independent = vec![
            KeyObservation {
                operator: plmn.clone(),
                endpoint: "127.0.0.1".parse().unwrap(),
                group: 1,
                pubkey_fp: fp(g1, &a1),
                nonce_fp: dh_engine::sha256_hex(b"n1"),
                observed_at: "1970-01-01T00:00:00Z".into(),
            },
            KeyObservation {
                operator: plmn,
                endpoint: "127.0.0.1".parse().unwrap(),
                group: 14,
                pubkey_fp: fp(g14, &a14),
                nonce_fp: dh_engine::sha256_hex(b"n2"),
                observed_at: "1970-01-01T00:00:00Z".into(),
            },
        ];
        let evidence =
            key_analysis::cross_group_exposure(&independent, Some(&[a1.clone(), a14.clone()]));
        assert!(evidence.is_empty(), "{evidence:?}");

        // Against real targets (exponents unknown) only cardinalities are
        // reported, never exponent claims.
        let circumstantial = key_analysis::cross_group_exposure(&independent, None);
        assert!(matches!(
            circumstantial.as_slice(),
            [key_analysis::ExposureEvidence::Circumstantial { .. }]
        ));
    });
}

// 8. Config audit against the shipped Table-2 defaults and a 83% corpus.
#[test]
fn criterion_8_config_audit() {
    criterion(8, "config-audit", Duration::from_secs(5), || {
        let rules = RuleSet::from_json(
            &std::fs::read_to_string(datafiles::data_path(datafiles::DEPRECATED_RULES_FILE))
                .unwrap(),
        )
        .unwrap();
        let defaults: Vec<ConfigRecord> = serde_json::from_str(
            &std::fs::read_to_string(datafiles::data_path(datafiles::DEFAULTS_FILE)).unwrap(),
        )
        .unwrap();
        let qualcomm = defaults.iter().find(|r| r.vendor == "Qualcomm").unwrap();
        let report = config_audit::audit(qualcomm, &rules);
        let ke_flags: BTreeSet<u16> = report
            .flags
            .iter()
            .filter(|f| f.category == Category::KeyExchange)
            .map(|f| f.id)
            .collect();
        assert_eq!(ke_flags, [2u16, 5].into_iter().collect::<BTreeSet<u16>>());
        let enc_flags = report
            .flags
            .iter()
            .filter(|f| f.category == Category::Encryption)
            .count();
        assert_eq!(enc_flags, 0, "AES/3DES list carries no deprecated cipher");

        // Corpus engineered to 83% KE deprecation.
        let mut reports = Vec::new();
        for i in 0..100 {
            let record = ConfigRecord {
                vendor: "Oppo".into(),
                operator: format!("90{:01}-0{:01}", i % 10, i / 10),
                dh_groups: Some(if i < 83 { vec![2, 14] } else { vec![14] }),
                encryption: None,
                integrity: None,
                prf: None,
                rekey_soft_s: None,
                rekey_hard_s: None,
            };
            reports.push(config_audit::audit(&record, &rules));
        }
        let summary = config_audit::aggregate(&reports);
        let share = &summary.per_vendor["Oppo"][&Category::KeyExchange];
        assert_eq!(share.flagged, 83);
        assert_eq!(share.total, 100);
        assert_eq!(share.share, 83.0 / 100.0, "exact share");
    });
}

// 9. Full-attack gate logic on the shipped scenario and its variants.
#[test]
fn criterion_9_full_attack_gates() {
    criterion(9, "full-attack-gates", Duration::from_secs(1), || {
        let scenario = load_scenario("full_attack.json");
        let transcript = attack_sim::run_scenario(&scenario).unwrap();
        assert_eq!(transcript.outcome, Outcome::Success);
        assert_eq!(transcript.negotiated_group, Some(2), "pivoted to DH2 first");
        let layers: Vec<Layer> = transcript.layers_compromised.iter().copied().collect();
        assert_eq!(layers, vec![Layer::L1, Layer::L2, Layer::L3]);

        let mut enforced = scenario.clone();
        enforced.epdg.enforce_sip_encryption = true;
        let transcript = attack_sim::run_scenario(&enforced).unwrap();
        let layers: Vec<Layer> = transcript.layers_compromised.iter().copied().collect();
        assert_eq!(layers, vec![Layer::L1, Layer::L2], "SIP enforcement gates L3");

        let mut slow = scenario.clone();
        slow.attacker.as_mut().unwrap().crack_latency_s = slow.ue.rekey_hard_s + 3_600;
        let transcript = attack_sim::run_scenario(&slow).unwrap();
        assert!(
            matches!(transcript.outcome, Outcome::AttackFailed(ref r) if r.contains("rotated")),
            "{:?}",
            transcript.outcome
        );
        assert!(transcript.layers_compromised.is_empty());
    });
}

// 10. Shipped blacklist integrity and a synthetic match.
#[test]
fn criterion_10_blacklist_integrity() {
    criterion(10, "blacklist-integrity", Duration::from_secs(1), || {
        let text =
            std::fs::read_to_string(datafiles::data_path(datafiles::BLACKLIST_FILE)).unwrap();
        let entries = key_analysis::parse_blacklist(&text).unwrap();
        assert_eq!(entries.len(), 49);
        let per_group: Vec<(u16, usize)> = [1u16, 2, 5, 14, 15]
            .iter()
            .map(|&g| (g, entries.iter().filter(|e| e.group == g).count()))
            .collect();
        assert_eq!(
            per_group,
            vec![(1, 10), (2, 10), (5, 10), (14, 10), (15, 9)],
            "10+10+10+10+9 across groups 1/2/5/14/15"
        );
        let digests: HashSet<&str> = entries.iter().map(|e| e.digest.as_str()).collect();
        assert_eq!(digests.len(), 49, "all published digests distinct");

        let synthetic = KeyObservation {
            operator: "232-05".parse().unwrap(),
            endpoint: "127.0.0.1".parse().unwrap(),
            group: entries[0].group,
            pubkey_fp: entries[0].digest.clone(),
            nonce_fp: dh_engine::sha256_hex(b"nonce"),
            observed_at: "1970-01-01T00:00:00Z".into(),
        };
        let innocent = KeyObservation {
            pubkey_fp: dh_engine::sha256_hex(b"fresh"),
            ..synthetic.clone()
        };
        let matches = key_analysis::match_blacklist(&[synthetic, innocent], &entries);
        assert_eq!(matches.len(), 1, "exactly one hit");
        assert_eq!(matches[0].pubkey_fp, entries[0].digest);
    });
}
