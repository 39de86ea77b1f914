//! Active probing of ePDG targets over UDP: per-group capability surveys,
//! weak-preference tolerance tests and key-collection runs.
//!
//! Probes are strictly sequential per target with a configurable
//! inter-probe delay; protocol-level anomalies are classification outcomes,
//! never errors.

use std::collections::{BTreeMap, BTreeSet};
use std::net::{IpAddr, SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dh_engine::{self, PeerKeyClass};
use crate::discovery::EpdgTarget;
use crate::ike_codec::{self, ClientProposalSpec, IkeMessage};
use crate::key_analysis::KeyObservation;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("group {0} is not a MODP group")]
    NotModp(u16),
}

/// Knobs for one probing run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Silence threshold per attempt.
    pub timeout_ms: u64,
    /// Re-sends after silence; `Ignored` is reported only once all attempts
    /// stay quiet.
    pub retries: u32,
    pub inter_probe_delay_ms: u64,
    /// Destination port when the target does not carry its own.
    pub port: u16,
    /// Prefix the 4-octet non-ESP marker (port 4500 framing).
    pub non_esp_marker: bool,
    /// Retain raw request/response octets.
    pub capture: bool,
    /// Deterministic client SPIs/keys for tests.
    pub seed: Option<u64>,
    /// Fixed ISO-8601 timestamp for emitted records (hermetic runs).
    pub now_iso: Option<String>,
}

impl Default for ProbeConfig {
    fn default() -> ProbeConfig {
        ProbeConfig {
            timeout_ms: 5_000,
            retries: 1,
            inter_probe_delay_ms: 500,
            port: 500,
            non_esp_marker: false,
            capture: false,
            seed: None,
            now_iso: None,
        }
    }
}

impl ProbeConfig {
    fn now(&self) -> String {
        self.now_iso.clone().unwrap_or_else(now_iso)
    }
}

/// Current time, ISO-8601 UTC with second precision.
pub fn now_iso() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Classification of one server response to one proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeOutcome {
    Accepted {
        group: u16,
        server_public_hex: String,
        server_nonce_hex: String,
        /// Degenerate or order-2 public value served; accepted for scan
        /// continuity but flagged.
        #[serde(default)]
        small_subgroup: bool,
        /// ECP accepts carry no verified key material (no curve math is
        /// performed).
        #[serde(default)]
        unverified_keyshare: bool,
    },
    SwitchProposed {
        from: u16,
        to: u16,
    },
    ErrorNotify {
        notify_type: u16,
    },
    Ignored {
        timeout_ms: u64,
    },
    TransportError {
        detail: String,
    },
}

impl ProbeOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, ProbeOutcome::Accepted { .. })
    }
}

/// Raw octets kept when `cfg.capture` is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawCapture {
    pub request_hex: String,
    pub response_hex: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRun {
    pub outcome: ProbeOutcome,
    pub capture: Option<RawCapture>,
}

/// Map a decoded response to exactly one outcome. Total on its input.
pub fn classify_response(msg: &IkeMessage, probed_group: u16) -> ProbeOutcome {
    if let Some(invalid_ke) = msg
        .notifications()
        .find(|n| n.notify_type == ike_codec::NotifyType::INVALID_KE_PAYLOAD)
    {
        return match invalid_ke.invalid_ke_group() {
            Some(to) if to != probed_group => ProbeOutcome::SwitchProposed {
                from: probed_group,
                to,
            },
            // Data missing or echoing the probed group: a bare error.
            _ => ProbeOutcome::ErrorNotify {
                notify_type: ike_codec::NotifyType::INVALID_KE_PAYLOAD.0,
            },
        };
    }
    if let Some(err) = msg.notifications().find(|n| n.notify_type.is_error()) {
        return ProbeOutcome::ErrorNotify {
            notify_type: err.notify_type.0,
        };
    }
    if let Some(ke) = msg.ke_payload() {
        if ke.group != probed_group {
            return ProbeOutcome::SwitchProposed {
                from: probed_group,
                to: ke.group,
            };
        }
        let nonce_hex = msg
            .nonce_payload()
            .map(|n| hex::encode(&n.data))
            .unwrap_or_default();
        let mut small_subgroup = false;
        if let Ok(params) = dh_engine::group_params(ke.group) {
            let value = BigUint::from_bytes_be(&ke.data);
            small_subgroup = dh_engine::classify_peer_key(params, &value) != PeerKeyClass::Valid;
        }
        return ProbeOutcome::Accepted {
            group: ke.group,
            server_public_hex: hex::encode(&ke.data),
            server_nonce_hex: nonce_hex,
            small_subgroup,
            unverified_keyshare: !ike_codec::is_modp_code(ke.group),
        };
    }
    ProbeOutcome::TransportError {
        detail: "response carries neither a key exchange nor an error notify".into(),
    }
}

/// Total classifier over raw octets; never panics, every byte sequence maps
/// to exactly one outcome.
pub fn classify_raw(raw: &[u8], probed_group: u16) -> ProbeOutcome {
    match ike_codec::decode(ike_codec::unframe_datagram(raw)) {
        Ok(msg) => classify_response(&msg, probed_group),
        Err(e) => ProbeOutcome::TransportError {
            detail: format!("undecodable response: {e}"),
        },
    }
}

fn probe_rng(cfg: &ProbeConfig, salt: u64) -> ChaCha20Rng {
    match cfg.seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed.wrapping_add(salt)),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn client_key_material(group: u16, rng: &mut ChaCha20Rng) -> Vec<u8> {
    match dh_engine::group_params(group) {
        Ok(params) => {
            let kp = dh_engine::gen_keypair(params, rng);
            params.to_padded_bytes(&kp.public)
        }
        Err(_) => {
            // ECP probing: a well-formed payload of the standard length,
            // random octets, classification only.
            let len = ike_codec::ke_payload_len(group).unwrap_or(32);
            let mut data = vec![0u8; len];
            rng.fill_bytes(&mut data);
            data
        }
    }
}

fn target_socket_addr(target: &EpdgTarget, cfg: &ProbeConfig) -> Option<SocketAddr> {
    let ip = *target.addresses.first()?;
    Some(SocketAddr::new(ip, target.port.unwrap_or(cfg.port)))
}

/// Send one SA_INIT offering `offered` with a KE payload for `chosen`, and
/// classify the first parseable response.
pub fn probe_offer(
    target: &EpdgTarget,
    offered: &[u16],
    chosen: u16,
    cfg: &ProbeConfig,
) -> ProbeRun {
    let mut rng = probe_rng(cfg, u64::from(chosen));
    let transport_error = |detail: String, request_hex: Option<String>| ProbeRun {
        outcome: ProbeOutcome::TransportError { detail },
        capture: cfg.capture.then(|| RawCapture {
            request_hex: request_hex.unwrap_or_default(),
            response_hex: None,
        }),
    };

    let Some(dest) = target_socket_addr(target, cfg) else {
        return transport_error("target has no addresses".into(), None);
    };
    let spec = ClientProposalSpec::multi_group(
        offered.to_vec(),
        chosen,
        client_key_material(chosen, &mut rng),
    );
    let msg = match ike_codec::build_sa_init(&spec, &mut rng) {
        Ok(m) => m,
        Err(e) => return transport_error(format!("could not build probe: {e}"), None),
    };
    let initiator_spi = msg.header.initiator_spi;
    let wire = match ike_codec::encode(&msg) {
        Ok(w) => ike_codec::frame_datagram(w, cfg.non_esp_marker),
        Err(e) => return transport_error(format!("could not encode probe: {e}"), None),
    };
    let request_hex = hex::encode(&wire);

    let bind_addr: SocketAddr = if dest.is_ipv4() {
        "0.0.0.0:0".parse().unwrap()
    } else {
        "[::]:0".parse().unwrap()
    };
    let socket = match UdpSocket::bind(bind_addr) {
        Ok(s) => s,
        Err(e) => return transport_error(format!("bind failed: {e}"), Some(request_hex)),
    };
    let _ = socket.set_read_timeout(Some(Duration::from_millis(cfg.timeout_ms.clamp(1, 250))));

    let mut undecodable: Option<String> = None;
    let mut buf = [0u8; 65_536];
    for _attempt in 0..=cfg.retries {
        if let Err(e) = socket.send_to(&wire, dest) {
            return transport_error(format!("send failed: {e}"), Some(request_hex));
        }
        let deadline = Instant::now() + Duration::from_millis(cfg.timeout_ms);
        while Instant::now() < deadline {
            match socket.recv_from(&mut buf) {
                Ok((n, from)) => {
                    if from.ip() != dest.ip() {
                        continue;
                    }
                    let raw = &buf[..n];
                    let inner = ike_codec::unframe_datagram(raw);
                    match ike_codec::decode(inner) {
                        Ok(reply) => {
                            if reply.header.initiator_spi != initiator_spi {
                                continue;
                            }
                            return ProbeRun {
                                outcome: classify_response(&reply, chosen),
                                capture: cfg.capture.then(|| RawCapture {
                                    request_hex: request_hex.clone(),
                                    response_hex: Some(hex::encode(raw)),
                                }),
                            };
                        }
                        Err(e) => {
                            undecodable = Some(format!("undecodable response: {e}"));
                        }
                    }
                }
                Err(ref e)
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut => {}
                Err(e) => {
                    return transport_error(format!("recv failed: {e}"), Some(request_hex))
                }
            }
        }
    }
    match undecodable {
        Some(detail) => transport_error(detail, Some(request_hex)),
        None => ProbeRun {
            outcome: ProbeOutcome::Ignored {
                timeout_ms: cfg.timeout_ms,
            },
            capture: cfg.capture.then_some(RawCapture {
                request_hex,
                response_hex: None,
            }),
        },
    }
}

/// Single-group capability probe: pretend to support only `group`.
pub fn probe_group(target: &EpdgTarget, group: u16, cfg: &ProbeConfig) -> ProbeOutcome {
    probe_offer(target, &[group], group, cfg).outcome
}

/// Per-target capability survey across `groups`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurveyResult {
    pub target: EpdgTarget,
    pub per_group: BTreeMap<u16, ProbeOutcome>,
    pub support_label: String,
    pub started_at: String,
    pub finished_at: String,
}

/// Canonical combination label over the accepted group set.
pub fn support_label(accepted: &BTreeSet<u16>) -> String {
    if accepted.is_empty() {
        return "none".to_string();
    }
    const CANON: [u16; 8] = [1, 2, 5, 14, 15, 16, 17, 18];
    let modp: Vec<u16> = CANON
        .iter()
        .copied()
        .filter(|g| accepted.contains(g))
        .collect();
    let ecp: Vec<u16> = accepted
        .iter()
        .copied()
        .filter(|g| !ike_codec::is_modp_code(*g))
        .collect();
    if ecp.is_empty() && modp.len() >= 3 {
        let first_idx = CANON.iter().position(|&g| g == modp[0]).unwrap();
        let contiguous = CANON[first_idx..first_idx + modp.len()] == modp[..];
        if contiguous {
            return format!("DH{}-DH{}", modp[0], modp[modp.len() - 1]);
        }
    }
    modp.iter()
        .chain(ecp.iter())
        .map(|g| format!("DH{g}"))
        .collect::<Vec<_>>()
        .join("+")
}

fn pace(cfg: &ProbeConfig, index: usize) {
    if index > 0 && cfg.inter_probe_delay_ms > 0 {
        std::thread::sleep(Duration::from_millis(cfg.inter_probe_delay_ms));
    }
}

/// Probe each group in turn; a group counts as supported iff the server
/// accepted it (redirects do not count).
pub fn survey(target: &EpdgTarget, groups: &[u16], cfg: &ProbeConfig) -> SurveyResult {
    survey_with_captures(target, groups, cfg).0
}

/// [`survey`] variant that also returns the per-group raw captures when
/// `cfg.capture` is set.
pub fn survey_with_captures(
    target: &EpdgTarget,
    groups: &[u16],
    cfg: &ProbeConfig,
) -> (SurveyResult, Vec<(u16, RawCapture)>) {
    let started_at = cfg.now();
    let mut per_group = BTreeMap::new();
    let mut captures = Vec::new();
    for (i, &group) in groups.iter().enumerate() {
        pace(cfg, i);
        let run = probe_offer(target, &[group], group, cfg);
        if let Some(capture) = run.capture {
            captures.push((group, capture));
        }
        per_group.insert(group, run.outcome);
    }
    let accepted: BTreeSet<u16> = per_group
        .iter()
        .filter(|(_, o)| o.is_accepted())
        .map(|(&g, _)| g)
        .collect();
    (
        SurveyResult {
            target: target.clone(),
            support_label: support_label(&accepted),
            per_group,
            started_at,
            finished_at: cfg.now(),
        },
        captures,
    )
}

/// Outcome of the weak-preference tolerance test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToleranceResult {
    Tolerated,
    UpgradeRequested { group: u16 },
    DowngradeIndicated { group: u16 },
    Error,
}

/// The weak-preference group the tolerance test pins its KE payload to.
pub const TOLERANCE_PROBE_GROUP: u16 = 2;

/// Offer every MODP group but choose DH2; classify how the server treats the
/// weak preference.
pub fn weak_preference_test(target: &EpdgTarget, cfg: &ProbeConfig) -> ToleranceResult {
    let offered: Vec<u16> = dh_engine::MODP_GROUP_IDS.to_vec();
    let run = probe_offer(target, &offered, TOLERANCE_PROBE_GROUP, cfg);
    tolerance_from_outcome(&run.outcome)
}

/// Pure mapping from a probe outcome to the tolerance classification.
pub fn tolerance_from_outcome(outcome: &ProbeOutcome) -> ToleranceResult {
    match outcome {
        ProbeOutcome::Accepted { group, .. } if *group == TOLERANCE_PROBE_GROUP => {
            ToleranceResult::Tolerated
        }
        ProbeOutcome::SwitchProposed { to, .. } => {
            match ike_codec::group_bits(*to) {
                Some(bits) if ike_codec::is_modp_code(*to) => {
                    if bits > 1024 {
                        ToleranceResult::UpgradeRequested { group: *to }
                    } else {
                        ToleranceResult::DowngradeIndicated { group: *to }
                    }
                }
                // A curve redirect counts as an upgrade request.
                Some(_) => ToleranceResult::UpgradeRequested { group: *to },
                None => ToleranceResult::Error,
            }
        }
        _ => ToleranceResult::Error,
    }
}

/// A non-accepting attempt inside a key-collection run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectGap {
    pub attempt: usize,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyCollection {
    pub observations: Vec<KeyObservation>,
    pub gaps: Vec<CollectGap>,
}

/// Run `n` independent handshakes against one target and fingerprint every
/// served key and nonce. Transport errors abort only the affected attempt.
pub fn collect_keys(
    target: &EpdgTarget,
    group: u16,
    n: usize,
    cfg: &ProbeConfig,
) -> Result<KeyCollection, ScanError> {
    let params = dh_engine::group_params(group).map_err(|_| ScanError::NotModp(group))?;
    let mut observations = Vec::new();
    let mut gaps = Vec::new();
    let endpoint = target.addresses.first().copied();
    for attempt in 0..n {
        pace(cfg, attempt);
        // Salt the per-attempt RNG so fixed seeds still yield fresh client
        // keys per handshake.
        let mut attempt_cfg = cfg.clone();
        if let Some(seed) = cfg.seed {
            attempt_cfg.seed = Some(seed.wrapping_add(attempt as u64 * 7919));
        }
        let outcome = probe_group(target, group, &attempt_cfg);
        match (&outcome, endpoint) {
            (
                ProbeOutcome::Accepted {
                    server_public_hex,
                    server_nonce_hex,
                    ..
                },
                Some(endpoint),
            ) => {
                let public = BigUint::from_bytes_be(&hex::decode(server_public_hex).unwrap_or_default());
                match dh_engine::pubkey_fingerprint(&public, params) {
                    Ok(pubkey_fp) => observations.push(KeyObservation {
                        operator: target.plmn.clone(),
                        endpoint,
                        group,
                        pubkey_fp,
                        nonce_fp: dh_engine::sha256_hex(
                            &hex::decode(server_nonce_hex).unwrap_or_default(),
                        ),
                        observed_at: cfg.now(),
                    }),
                    // Degenerate key: record the attempt as a gap.
                    Err(_) => gaps.push(CollectGap { attempt, outcome }),
                }
            }
            _ => gaps.push(CollectGap { attempt, outcome }),
        }
    }
    Ok(KeyCollection { observations, gaps })
}

/// Targets a scan may touch without explicit authorization: loopback and
/// private/ULA ranges.
pub fn is_safe_target(ip: &IpAddr) -> bool {
    match ip {
        IpAddr::V4(v4) => v4.is_loopback() || v4.is_private() || v4.is_link_local(),
        IpAddr::V6(v6) => {
            v6.is_loopback()
                || (v6.segments()[0] & 0xfe00) == 0xfc00 // fc00::/7
                || (v6.segments()[0] & 0xffc0) == 0xfe80 // fe80::/10
        }
    }
}

/// Run `f` over targets with at most `width` workers; each target is handled
/// by exactly one worker, preserving input order in the result.
pub fn for_each_target_parallel<T, R, F>(items: &[T], width: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let width = width.max(1).min(items.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<R>>> =
        items.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..width {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                *results[i].lock().unwrap() = Some(f(&items[i]));
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ike_codec::{
        build_notify_response, build_sa_init_response, KePayload, NotifyPayload, Proposal,
        Transform, TransformType,
    };
    use proptest::prelude::*;

    fn accept_reply(group: u16, data_len: usize) -> IkeMessage {
        let proposal = Proposal {
            number: 1,
            protocol: ike_codec::PROTOCOL_IKE,
            spi: Vec::new(),
            transforms: vec![
                Transform::new(TransformType::ENCR, 12),
                Transform::new(TransformType::PRF, 5),
                Transform::new(TransformType::INTEG, 2),
                Transform::new(TransformType::KE_GROUP, group),
            ],
        };
        build_sa_init_response(
            [1; 8],
            [2; 8],
            proposal,
            KePayload {
                group,
                data: vec![0x23; data_len],
            },
            vec![0x11; 32],
        )
    }

    #[test]
    fn classify_accept() {
        let outcome = classify_response(&accept_reply(2, 128), 2);
        match outcome {
            ProbeOutcome::Accepted {
                group,
                small_subgroup,
                unverified_keyshare,
                ..
            } => {
                assert_eq!(group, 2);
                assert!(!small_subgroup);
                assert!(!unverified_keyshare);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn classify_switch_via_invalid_ke() {
        let reply = build_notify_response([1; 8], [2; 8], NotifyPayload::invalid_ke(14));
        assert_eq!(
            classify_response(&reply, 2),
            ProbeOutcome::SwitchProposed { from: 2, to: 14 }
        );
    }

    #[test]
    fn classify_error_notify() {
        let reply = build_notify_response(
            [1; 8],
            [2; 8],
            NotifyPayload {
                protocol_id: 0,
                spi: Vec::new(),
                notify_type: ike_codec::NotifyType::NO_PROPOSAL_CHOSEN,
                data: Vec::new(),
            },
        );
        assert_eq!(
            classify_response(&reply, 2),
            ProbeOutcome::ErrorNotify { notify_type: 14 }
        );
    }

    #[test]
    fn classify_flags_degenerate_server_key() {
        // All-zero public value for DH2.
        let outcome = classify_response(&accept_reply_zero_key(), 2);
        assert!(matches!(
            outcome,
            ProbeOutcome::Accepted {
                small_subgroup: true,
                ..
            }
        ));
    }

    fn accept_reply_zero_key() -> IkeMessage {
        let mut reply = accept_reply(2, 128);
        for p in &mut reply.payloads {
            if let ike_codec::Payload::KeyExchange(ke) = p {
                ke.data = vec![0u8; 128];
            }
        }
        reply.refresh_derived_fields();
        reply
    }

    #[test]
    fn classify_flags_ecp_accept_as_unverified() {
        let outcome = classify_response(&accept_reply(19, 64), 19);
        assert!(matches!(
            outcome,
            ProbeOutcome::Accepted {
                unverified_keyshare: true,
                ..
            }
        ));
    }

    #[test]
    fn classify_switch_when_ke_group_differs() {
        let outcome = classify_response(&accept_reply(14, 256), 2);
        assert_eq!(outcome, ProbeOutcome::SwitchProposed { from: 2, to: 14 });
    }

    #[test]
    fn tolerance_mapping() {
        assert_eq!(
            tolerance_from_outcome(&ProbeOutcome::SwitchProposed { from: 2, to: 18 }),
            ToleranceResult::UpgradeRequested { group: 18 }
        );
        assert_eq!(
            tolerance_from_outcome(&ProbeOutcome::SwitchProposed { from: 2, to: 1 }),
            ToleranceResult::DowngradeIndicated { group: 1 }
        );
        assert_eq!(
            tolerance_from_outcome(&ProbeOutcome::ErrorNotify { notify_type: 14 }),
            ToleranceResult::Error
        );
        assert_eq!(
            tolerance_from_outcome(&ProbeOutcome::Ignored { timeout_ms: 100 }),
            ToleranceResult::Error
        );
    }

    #[test]
    fn support_labels() {
        let set = |ids: &[u16]| ids.iter().copied().collect::<BTreeSet<u16>>();
        assert_eq!(support_label(&set(&[])), "none");
        assert_eq!(support_label(&set(&[2])), "DH2");
        assert_eq!(support_label(&set(&[1, 2])), "DH1+DH2");
        assert_eq!(support_label(&set(&[2, 14])), "DH2+DH14");
        assert_eq!(
            support_label(&set(&[1, 2, 5, 14, 15, 16, 17, 18])),
            "DH1-DH18"
        );
        assert_eq!(support_label(&set(&[2, 5, 14, 15, 16, 17, 18])), "DH2-DH18");
        // Non-contiguous sets never use the range form.
        assert_eq!(support_label(&set(&[1, 2, 14])), "DH1+DH2+DH14");
        assert_eq!(support_label(&set(&[2, 19])), "DH2+DH19");
    }

    #[test]
    fn safe_target_ranges() {
        let safe = ["127.0.0.1", "10.1.2.3", "192.168.1.1", "172.16.0.1", "::1", "fd00::1"];
        for ip in safe {
            assert!(is_safe_target(&ip.parse().unwrap()), "{ip}");
        }
        let unsafe_ = ["8.8.8.8", "193.0.14.129", "2001:db8::1"];
        for ip in unsafe_ {
            assert!(!is_safe_target(&ip.parse().unwrap()), "{ip}");
        }
    }

    #[test]
    fn parallel_runner_preserves_order() {
        let items: Vec<u32> = (0..50).collect();
        let out = for_each_target_parallel(&items, 8, |x| x * 2);
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<u32>>());
    }

    proptest! {
        #[test]
        fn classifier_is_total_over_random_octets(raw in prop::collection::vec(any::<u8>(), 0..400)) {
            let _ = classify_raw(&raw, 2);
        }
    }
}
