//! Policy-driven mock ePDG fleet speaking real IKEv2 over UDP.
//!
//! The fleet is the test double for every scanner path: each listener
//! applies an [`EpdgPolicy`] to incoming SA_INIT offers using the same
//! decision logic as the simulator, so a scan against a fleet must
//! reproduce the configured policies exactly.

use std::collections::HashMap;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack_sim::{
    server_decide, EpdgPolicy, KeyMode, NonceMode, ServerDecision,
};
use crate::dh_engine;
use crate::discovery::{EpdgTarget, PlmnId};
use crate::ike_codec::{
    self, ExchangeType, IkeMessage, KePayload, NotifyPayload, Proposal, Transform, TransformType,
};
use crate::scanner::now_iso;

#[derive(Debug, Error)]
pub enum MockError {
    #[error("address {addr} in use or unbindable: {source}")]
    AddressInUse {
        addr: String,
        source: std::io::Error,
    },
    #[error("invalid fleet spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockOperatorSpec {
    pub plmn: PlmnId,
    pub policy: EpdgPolicy,
    /// Bind address; port 0 picks an ephemeral port.
    pub listen: String,
}

/// Fleet description as stored in a spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockFleetSpec {
    pub operators: Vec<MockOperatorSpec>,
    /// Private exponents (hex) installed as a static pool across the member
    /// operators, overriding their own key mode.
    #[serde(default)]
    pub shared_key_pool: Option<Vec<String>>,
    /// Operators the shared pool applies to; all of them when absent.
    #[serde(default)]
    pub shared_pool_members: Option<Vec<PlmnId>>,
    /// Seed for deterministic pool draws and nonces.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl MockFleetSpec {
    pub fn validate(&self) -> Result<(), MockError> {
        if self.operators.is_empty() {
            return Err(MockError::InvalidSpec("no operators".into()));
        }
        let mut seen = Vec::new();
        for op in &self.operators {
            let addr: SocketAddr = op
                .listen
                .parse()
                .map_err(|e| MockError::InvalidSpec(format!("listen {:?}: {e}", op.listen)))?;
            if addr.port() != 0 {
                if seen.contains(&addr) {
                    return Err(MockError::InvalidSpec(format!(
                        "duplicate listen address {addr}"
                    )));
                }
                seen.push(addr);
            }
        }
        if let Some(members) = &self.shared_pool_members {
            for member in members {
                if !self.operators.iter().any(|o| &o.plmn == member) {
                    return Err(MockError::InvalidSpec(format!(
                        "shared pool member {member} not among operators"
                    )));
                }
            }
            if self.shared_key_pool.is_none() {
                return Err(MockError::InvalidSpec(
                    "shared_pool_members given without shared_key_pool".into(),
                ));
            }
        }
        if let Some(pool) = &self.shared_key_pool {
            if pool.is_empty() {
                return Err(MockError::InvalidSpec("shared key pool is empty".into()));
            }
            for entry in pool {
                if hex::decode(entry).is_err() {
                    return Err(MockError::InvalidSpec(format!(
                        "pool entry {entry:?} is not hex"
                    )));
                }
            }
        }
        for op in &self.operators {
            op.policy
                .validate()
                .map_err(|e| MockError::InvalidSpec(format!("{}: {e}", op.plmn)))?;
        }
        Ok(())
    }
}

/// Per-listener key material state.
struct KeyState {
    mode: KeyMode,
    /// (group, pool index) -> padded public value.
    pool_pub_cache: HashMap<(u16, usize), Vec<u8>>,
    /// group -> (created, padded public value) for reuse windows.
    window_cache: HashMap<u16, (Instant, Vec<u8>)>,
}

impl KeyState {
    fn ke_data(&mut self, group: u16, rng: &mut ChaCha20Rng) -> Vec<u8> {
        let Ok(params) = dh_engine::group_params(group) else {
            // ECP or unknown codes: random octets of the standard length.
            let len = ike_codec::ke_payload_len(group).unwrap_or(32);
            let mut data = vec![0u8; len];
            rng.fill_bytes(&mut data);
            return data;
        };
        match &self.mode {
            KeyMode::FreshPerHandshake => {
                let kp = dh_engine::gen_keypair(params, rng);
                params.to_padded_bytes(&kp.public)
            }
            KeyMode::StaticPool(pool) => {
                let idx = (rng.next_u32() as usize) % pool.len();
                if let Some(cached) = self.pool_pub_cache.get(&(group, idx)) {
                    return cached.clone();
                }
                let exponent = BigUint::from_bytes_be(&hex::decode(&pool[idx]).unwrap_or_default());
                let data = dh_engine::keypair_from_exponent(params, exponent)
                    .map(|kp| params.to_padded_bytes(&kp.public))
                    .unwrap_or_else(|_| {
                        let kp = dh_engine::gen_keypair(params, rng);
                        params.to_padded_bytes(&kp.public)
                    });
                self.pool_pub_cache.insert((group, idx), data.clone());
                data
            }
            KeyMode::ReuseWindow(seconds) => {
                let window = Duration::from_secs(*seconds);
                if let Some((created, data)) = self.window_cache.get(&group) {
                    if created.elapsed() < window {
                        return data.clone();
                    }
                }
                let kp = dh_engine::gen_keypair(params, rng);
                let data = params.to_padded_bytes(&kp.public);
                self.window_cache.insert(group, (Instant::now(), data.clone()));
                data
            }
        }
    }
}

fn response_proposal(request: &IkeMessage, group: u16) -> Proposal {
    let mut transforms = Vec::new();
    if let Some(sa) = request.sa_payload() {
        for ty in [TransformType::ENCR, TransformType::PRF, TransformType::INTEG] {
            if let Some(t) = sa
                .proposals
                .first()
                .and_then(|p| p.transforms.iter().find(|t| t.transform_type == ty))
            {
                transforms.push(t.clone());
            }
        }
    }
    // Requests missing algorithm transforms still get a well-formed reply.
    if !transforms.iter().any(|t| t.transform_type == TransformType::ENCR) {
        transforms.push(Transform::new(TransformType::ENCR, 12));
    }
    if !transforms.iter().any(|t| t.transform_type == TransformType::PRF) {
        transforms.push(Transform::new(TransformType::PRF, 5));
    }
    if !transforms.iter().any(|t| t.transform_type == TransformType::INTEG) {
        transforms.push(Transform::new(TransformType::INTEG, 2));
    }
    transforms.push(Transform::new(TransformType::KE_GROUP, group));
    Proposal {
        number: 1,
        protocol: ike_codec::PROTOCOL_IKE,
        spi: Vec::new(),
        transforms,
    }
}

/// Apply a policy to one decoded SA_INIT request. `None` means stay silent.
fn respond(
    policy: &EpdgPolicy,
    keys: &mut KeyState,
    rng: &mut ChaCha20Rng,
    request: &IkeMessage,
) -> Option<IkeMessage> {
    if request.header.exchange_type != ExchangeType::IKE_SA_INIT || request.is_response() {
        return None;
    }
    let offered: Vec<u16> = request
        .sa_payload()
        .map(|sa| sa.proposals.iter().flat_map(|p| p.ke_groups()).collect())
        .unwrap_or_default();
    let Some(ke) = request.ke_payload() else {
        return Some(ike_codec::build_notify_response(
            request.header.initiator_spi,
            random_spi(rng),
            NotifyPayload {
                protocol_id: 0,
                spi: Vec::new(),
                notify_type: ike_codec::NotifyType::NO_PROPOSAL_CHOSEN,
                data: Vec::new(),
            },
        ));
    };
    match server_decide(policy, &offered, ke.group) {
        ServerDecision::Accept(group) => {
            let nonce = match &policy.nonce_mode {
                NonceMode::Fresh => {
                    let mut n = vec![0u8; 32];
                    rng.fill_bytes(&mut n);
                    n
                }
                NonceMode::FixedHex(h) => hex::decode(h).unwrap_or_else(|_| vec![0u8; 32]),
            };
            Some(ike_codec::build_sa_init_response(
                request.header.initiator_spi,
                random_spi(rng),
                response_proposal(request, group),
                KePayload {
                    group,
                    data: keys.ke_data(group, rng),
                },
                nonce,
            ))
        }
        ServerDecision::RequestSwitch(group) => Some(ike_codec::build_notify_response(
            request.header.initiator_spi,
            random_spi(rng),
            NotifyPayload::invalid_ke(group),
        )),
        ServerDecision::Reject(notify_type) => Some(ike_codec::build_notify_response(
            request.header.initiator_spi,
            random_spi(rng),
            NotifyPayload {
                protocol_id: 0,
                spi: Vec::new(),
                notify_type,
                data: Vec::new(),
            },
        )),
        ServerDecision::Silent => None,
    }
}

fn random_spi(rng: &mut ChaCha20Rng) -> [u8; 8] {
    let mut spi = [0u8; 8];
    rng.fill_bytes(&mut spi);
    spi
}

pub struct MockListener {
    pub plmn: PlmnId,
    pub addr: SocketAddr,
    pub policy: EpdgPolicy,
    request_log: Arc<Mutex<Vec<Instant>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockListener {
    /// Instants of every datagram received, for pacing assertions.
    pub fn request_instants(&self) -> Vec<Instant> {
        self.request_log.lock().unwrap().clone()
    }
}

/// A running fleet; listeners shut down on drop.
pub struct MockFleet {
    listeners: Vec<MockListener>,
    shutdown: Arc<AtomicBool>,
}

impl MockFleet {
    /// Bind every listener (failing fast on conflicts) and start serving.
    pub fn spawn(spec: &MockFleetSpec) -> Result<MockFleet, MockError> {
        spec.validate()?;
        let shared_members: Option<Vec<PlmnId>> = spec.shared_key_pool.as_ref().map(|_| {
            spec.shared_pool_members
                .clone()
                .unwrap_or_else(|| spec.operators.iter().map(|o| o.plmn.clone()).collect())
        });
        let shutdown = Arc::new(AtomicBool::new(false));
        let mut listeners = Vec::new();
        for (idx, op) in spec.operators.iter().enumerate() {
            let requested: SocketAddr = op.listen.parse().expect("validated");
            let socket = UdpSocket::bind(requested).map_err(|source| MockError::AddressInUse {
                addr: op.listen.clone(),
                source,
            })?;
            socket
                .set_read_timeout(Some(Duration::from_millis(25)))
                .expect("socket timeout");
            let addr = socket.local_addr().expect("bound socket has an address");

            let mut policy = op.policy.clone();
            if let (Some(pool), Some(members)) = (&spec.shared_key_pool, &shared_members) {
                if members.contains(&op.plmn) {
                    policy.key_mode = KeyMode::StaticPool(pool.clone());
                }
            }
            let mut keys = KeyState {
                mode: policy.key_mode.clone(),
                pool_pub_cache: HashMap::new(),
                window_cache: HashMap::new(),
            };
            let mut rng = match spec.seed {
                Some(seed) => ChaCha20Rng::seed_from_u64(seed.wrapping_add(idx as u64)),
                None => ChaCha20Rng::from_entropy(),
            };
            let request_log = Arc::new(Mutex::new(Vec::new()));
            let log = Arc::clone(&request_log);
            let stop = Arc::clone(&shutdown);
            let thread_policy = policy.clone();
            let handle = std::thread::spawn(move || {
                let mut buf = [0u8; 65_536];
                while !stop.load(Ordering::Relaxed) {
                    match socket.recv_from(&mut buf) {
                        Ok((n, peer)) => {
                            log.lock().unwrap().push(Instant::now());
                            let raw = ike_codec::unframe_datagram(&buf[..n]);
                            let Ok(request) = ike_codec::decode(raw) else {
                                continue;
                            };
                            if let Some(reply) =
                                respond(&thread_policy, &mut keys, &mut rng, &request)
                            {
                                if let Ok(wire) = ike_codec::encode(&reply) {
                                    let _ = socket.send_to(&wire, peer);
                                }
                            }
                        }
                        Err(ref e)
                            if e.kind() == std::io::ErrorKind::WouldBlock
                                || e.kind() == std::io::ErrorKind::TimedOut => {}
                        Err(_) => break,
                    }
                }
            });
            listeners.push(MockListener {
                plmn: op.plmn.clone(),
                addr,
                policy,
                request_log,
                handle: Some(handle),
            });
        }
        Ok(MockFleet {
            listeners,
            shutdown,
        })
    }

    pub fn listeners(&self) -> &[MockListener] {
        &self.listeners
    }

    /// Probe targets pointing at the fleet's listeners.
    pub fn targets(&self) -> Vec<EpdgTarget> {
        self.listeners
            .iter()
            .map(|l| EpdgTarget::direct(l.plmn.clone(), l.addr, now_iso()))
            .collect()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        for listener in &mut self.listeners {
            if let Some(handle) = listener.handle.take() {
                let _ = handle.join();
            }
        }
    }
}

impl Drop for MockFleet {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Spec for a uniform loopback fleet, the common test construction.
pub fn loopback_fleet(policies: Vec<(PlmnId, EpdgPolicy)>, seed: Option<u64>) -> MockFleetSpec {
    MockFleetSpec {
        operators: policies
            .into_iter()
            .map(|(plmn, policy)| MockOperatorSpec {
                plmn,
                policy,
                listen: "127.0.0.1:0".to_string(),
            })
            .collect(),
        shared_key_pool: None,
        shared_pool_members: None,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack_sim::ServerPreference;
    use crate::scanner::{self, ProbeConfig, ProbeOutcome, ToleranceResult};

    fn plmn(n: u32) -> PlmnId {
        format!("9{:02}-{:02}", n / 100, n % 100).parse().unwrap()
    }

    fn quick_cfg() -> ProbeConfig {
        ProbeConfig {
            timeout_ms: 300,
            retries: 0,
            inter_probe_delay_ms: 0,
            seed: Some(11),
            ..ProbeConfig::default()
        }
    }

    fn policy(supported: &[u16], preference: ServerPreference) -> EpdgPolicy {
        EpdgPolicy {
            supported_groups: supported.iter().copied().collect(),
            preference,
            ..EpdgPolicy::accept_all_modp()
        }
    }

    #[test]
    fn accepting_mock_accepts_supported_probe() {
        let spec = loopback_fleet(
            vec![(plmn(1), policy(&[2, 14], ServerPreference::AcceptClientChoice))],
            Some(1),
        );
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let outcome = scanner::probe_group(target, 2, &quick_cfg());
        assert!(outcome.is_accepted(), "{outcome:?}");
    }

    #[test]
    fn strongest_demanding_mock_switches_weak_probe() {
        let spec = loopback_fleet(
            vec![(plmn(2), policy(&[14], ServerPreference::DemandStrongest))],
            Some(2),
        );
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let outcome = scanner::probe_group(target, 2, &quick_cfg());
        assert_eq!(outcome, ProbeOutcome::SwitchProposed { from: 2, to: 14 });
    }

    #[test]
    fn drop_mock_yields_ignored_on_unsupported_probe() {
        let mut p = policy(&[2, 14], ServerPreference::AcceptClientChoice);
        p.on_unsupported = crate::attack_sim::UnsupportedAction::Ignore;
        let spec = loopback_fleet(vec![(plmn(3), p)], Some(3));
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let outcome = scanner::probe_group(target, 19, &quick_cfg());
        assert!(matches!(outcome, ProbeOutcome::Ignored { .. }), "{outcome:?}");
    }

    #[test]
    fn error_mock_yields_error_notify() {
        let spec = loopback_fleet(
            vec![(plmn(4), policy(&[], ServerPreference::AcceptClientChoice))],
            Some(4),
        );
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let outcome = scanner::probe_group(target, 2, &quick_cfg());
        assert_eq!(outcome, ProbeOutcome::ErrorNotify { notify_type: 14 });
    }

    #[test]
    fn tolerance_classifications_match_policies() {
        let accept = policy(&[1, 2, 5, 14, 15, 16, 17, 18], ServerPreference::AcceptClientChoice);
        let strongest = policy(&[1, 2, 5, 14, 15, 16, 17, 18], ServerPreference::DemandStrongest);
        let downgrader = policy(&[1, 2], ServerPreference::DemandSpecific(1));
        let erroring = policy(&[], ServerPreference::AcceptClientChoice);
        let spec = loopback_fleet(
            vec![
                (plmn(5), accept),
                (plmn(6), strongest),
                (plmn(7), downgrader),
                (plmn(8), erroring),
            ],
            Some(5),
        );
        let fleet = MockFleet::spawn(&spec).unwrap();
        let targets = fleet.targets();
        let cfg = quick_cfg();
        assert_eq!(
            scanner::weak_preference_test(&targets[0], &cfg),
            ToleranceResult::Tolerated
        );
        assert_eq!(
            scanner::weak_preference_test(&targets[1], &cfg),
            ToleranceResult::UpgradeRequested { group: 18 }
        );
        assert_eq!(
            scanner::weak_preference_test(&targets[2], &cfg),
            ToleranceResult::DowngradeIndicated { group: 1 }
        );
        assert_eq!(
            scanner::weak_preference_test(&targets[3], &cfg),
            ToleranceResult::Error
        );
    }

    #[test]
    fn static_pool_serves_exactly_the_pool() {
        let pool: Vec<String> = (1u32..=3).map(|i| format!("{:064x}", 0x1000 + i)).collect();
        let mut spec = loopback_fleet(
            vec![(plmn(9), policy(&[2], ServerPreference::AcceptClientChoice))],
            Some(9),
        );
        spec.shared_key_pool = Some(pool);
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let collection = scanner::collect_keys(target, 2, 60, &quick_cfg()).unwrap();
        assert!(collection.gaps.is_empty());
        let distinct: std::collections::HashSet<&str> = collection
            .observations
            .iter()
            .map(|o| o.pubkey_fp.as_str())
            .collect();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn reuse_window_serves_one_key_within_window() {
        let mut p = policy(&[2], ServerPreference::AcceptClientChoice);
        p.key_mode = KeyMode::ReuseWindow(60);
        let spec = loopback_fleet(vec![(plmn(10), p)], Some(10));
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let collection = scanner::collect_keys(target, 2, 10, &quick_cfg()).unwrap();
        let distinct: std::collections::HashSet<&str> = collection
            .observations
            .iter()
            .map(|o| o.pubkey_fp.as_str())
            .collect();
        assert_eq!(distinct.len(), 1, "one key within the reuse window");
    }

    #[test]
    fn fixed_nonce_mock_reuses_nonces() {
        let mut p = policy(&[2], ServerPreference::AcceptClientChoice);
        p.nonce_mode = NonceMode::FixedHex("ab".repeat(32));
        let spec = loopback_fleet(vec![(plmn(11), p)], Some(11));
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let collection = scanner::collect_keys(target, 2, 3, &quick_cfg()).unwrap();
        let report = crate::key_analysis::census(&collection.observations);
        assert_eq!(report.nonce_reuse_events, 2);
    }

    #[test]
    fn duplicate_fixed_listen_addresses_rejected() {
        let mut spec = loopback_fleet(
            vec![
                (plmn(12), policy(&[2], ServerPreference::AcceptClientChoice)),
                (plmn(13), policy(&[2], ServerPreference::AcceptClientChoice)),
            ],
            None,
        );
        spec.operators[0].listen = "127.0.0.1:46111".into();
        spec.operators[1].listen = "127.0.0.1:46111".into();
        assert!(matches!(
            MockFleet::spawn(&spec),
            Err(MockError::InvalidSpec(_))
        ));
    }

    #[test]
    fn occupied_port_reports_address_in_use() {
        let blocker = UdpSocket::bind("127.0.0.1:0").unwrap();
        let addr = blocker.local_addr().unwrap();
        let mut spec = loopback_fleet(
            vec![(plmn(16), policy(&[2], ServerPreference::AcceptClientChoice))],
            None,
        );
        spec.operators[0].listen = addr.to_string();
        assert!(matches!(
            MockFleet::spawn(&spec),
            Err(MockError::AddressInUse { .. })
        ));
    }

    #[test]
    fn fresh_keys_differ_between_handshakes() {
        let spec = loopback_fleet(
            vec![(plmn(14), policy(&[2], ServerPreference::AcceptClientChoice))],
            Some(14),
        );
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let collection = scanner::collect_keys(target, 2, 5, &quick_cfg()).unwrap();
        let distinct: std::collections::HashSet<&str> = collection
            .observations
            .iter()
            .map(|o| o.pubkey_fp.as_str())
            .collect();
        assert_eq!(distinct.len(), 5);
    }

    #[test]
    fn probe_pacing_respects_inter_probe_delay() {
        let spec = loopback_fleet(
            vec![(plmn(15), policy(&[1, 2], ServerPreference::AcceptClientChoice))],
            Some(15),
        );
        let fleet = MockFleet::spawn(&spec).unwrap();
        let target = &fleet.targets()[0];
        let cfg = ProbeConfig {
            timeout_ms: 300,
            retries: 0,
            inter_probe_delay_ms: 120,
            seed: Some(15),
            ..ProbeConfig::default()
        };
        let _ = scanner::survey(target, &[1, 2], &cfg);
        let instants = fleet.listeners()[0].request_instants();
        assert_eq!(instants.len(), 2);
        let gap = instants[1].duration_since(instants[0]);
        assert!(
            gap >= Duration::from_millis(115),
            "inter-probe gap was {gap:?}"
        );
    }
}
