//! In-process simulation of UE, on-path attacker and ePDG over a virtual
//! message bus.
//!
//! Reproduces the INVALID_KE downgrade pivot, the fixation-to-unoffered-group
//! client bug, and the rekey takeover that escalates a cracked phase-1 key
//! across all three tunnel layers. Every wire message on the bus is a real
//! codec encoding; time is a virtual clock so hour-scale rekey schedules run
//! in milliseconds; a fixed seed yields a byte-identical transcript.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dh_engine;
use crate::ike_codec::{
    self, build_notify_response, build_sa_init, ClientProposalSpec, CodecError, IkeMessage,
    KePayload, NotifyPayload, NotifyType, Proposal, Transform, TransformType,
};
use crate::scanner::ToleranceResult;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("codec failure on the simulated bus: {0}")]
    Codec(#[from] CodecError),
}

/// How a client reacts to an INVALID_KE fixation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidKeRule {
    /// Follow the redirect only to a group from its own proposal.
    OfferedOnly,
    /// Follow any redirect, restarting with just the fixed group (the buggy
    /// baseband behavior).
    AnyGroup,
    /// Never follow redirects.
    RejectAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UePolicy {
    pub offered_groups: Vec<u16>,
    pub preferred_group: u16,
    pub invalid_ke_rule: InvalidKeRule,
    pub rekey_soft_s: u64,
    pub rekey_hard_s: u64,
    #[serde(default)]
    pub sip_encryption_required: bool,
}

impl UePolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.offered_groups.is_empty() {
            return Err(SimError::InvalidPolicy("UE offers no groups".into()));
        }
        if !self.offered_groups.contains(&self.preferred_group) {
            return Err(SimError::InvalidPolicy(format!(
                "preferred group {} not among offered {:?}",
                self.preferred_group, self.offered_groups
            )));
        }
        if self.rekey_soft_s > self.rekey_hard_s || self.rekey_soft_s == 0 {
            return Err(SimError::InvalidPolicy(
                "rekey timers must satisfy 0 < soft <= hard".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerPreference {
    /// Accept whatever supported group the client chose.
    AcceptClientChoice,
    /// Redirect to the strongest common group when the client chose weaker.
    DemandStrongest,
    /// Redirect to one fixed group.
    DemandSpecific(u16),
}

/// Server key handling across handshakes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    FreshPerHandshake,
    /// Fixed pool of private exponents (hex), one drawn per handshake.
    StaticPool(Vec<String>),
    /// One exponent per group, regenerated after this many seconds.
    ReuseWindow(u64),
}

/// What the server does with an offer containing no supported group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnsupportedAction {
    ErrorNotify,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonceMode {
    Fresh,
    /// Fixed nonce octets (hex); exists to reproduce observed nonce reuse.
    FixedHex(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpdgPolicy {
    pub supported_groups: BTreeSet<u16>,
    pub preference: ServerPreference,
    pub key_mode: KeyMode,
    /// Always false in the deployed ecosystem: rekeying never re-runs
    /// authentication.
    #[serde(default)]
    pub reauth_on_rekey: bool,
    #[serde(default)]
    pub enforce_sip_encryption: bool,
    #[serde(default = "default_unsupported_action")]
    pub on_unsupported: UnsupportedAction,
    #[serde(default = "default_nonce_mode")]
    pub nonce_mode: NonceMode,
}

fn default_unsupported_action() -> UnsupportedAction {
    UnsupportedAction::ErrorNotify
}

fn default_nonce_mode() -> NonceMode {
    NonceMode::Fresh
}

impl EpdgPolicy {
    pub fn accept_all_modp() -> EpdgPolicy {
        EpdgPolicy {
            supported_groups: dh_engine::MODP_GROUP_IDS.into_iter().collect(),
            preference: ServerPreference::AcceptClientChoice,
            key_mode: KeyMode::FreshPerHandshake,
            reauth_on_rekey: false,
            enforce_sip_encryption: false,
            on_unsupported: UnsupportedAction::ErrorNotify,
            nonce_mode: NonceMode::Fresh,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if let KeyMode::StaticPool(pool) = &self.key_mode {
            if pool.is_empty() {
                return Err(SimError::InvalidPolicy("static key pool is empty".into()));
            }
            for entry in pool {
                if hex::decode(entry).is_err() {
                    return Err(SimError::InvalidPolicy(format!(
                        "static pool entry {entry:?} is not hex"
                    )));
                }
            }
        }
        if let ServerPreference::DemandSpecific(g) = self.preference {
            if !self.supported_groups.contains(&g) {
                return Err(SimError::InvalidPolicy(format!(
                    "demanded group {g} not in supported set"
                )));
            }
        }
        if let NonceMode::FixedHex(h) = &self.nonce_mode {
            if hex::decode(h).is_err() {
                return Err(SimError::InvalidPolicy("fixed nonce is not hex".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerPosition {
    OnPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackerModel {
    pub position: AttackerPosition,
    #[serde(default = "default_true")]
    pub can_drop: bool,
    #[serde(default = "default_true")]
    pub can_inject: bool,
    #[serde(default = "default_true")]
    pub can_rewrite_plaintext: bool,
    /// Highest group code the attacker can break within a key lifetime;
    /// 0 = none. Only the groups considered breakable are allowed.
    pub crack_capability: u16,
    pub crack_latency_s: u64,
}

fn default_true() -> bool {
    true
}

impl AttackerModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !matches!(self.crack_capability, 0..=2) {
            return Err(SimError::InvalidPolicy(format!(
                "crack capability must be 0, 1 or 2, got {}",
                self.crack_capability
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Ue,
    Attacker,
    Epdg,
}

impl Actor {
    fn label(self) -> &'static str {
        match self {
            Actor::Ue => "UE",
            Actor::Attacker => "MitM",
            Actor::Epdg => "ePDG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    L1,
    L2,
    L3,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventBody {
    /// A real encoded datagram on the bus.
    Message {
        from: Actor,
        to: Actor,
        summary: String,
        bytes_hex: String,
    },
    Action {
        actor: Actor,
        description: String,
    },
    /// Authentication marker: EAP-AKA runs exactly once per session in this
    /// ecosystem, never at rekey time.
    AuthEvent {
        description: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    /// Virtual seconds.
    pub t: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Downgraded(u16),
    AttackFailed(String),
    HandshakeFailed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
    pub negotiated_group: Option<u16>,
    pub layers_compromised: BTreeSet<Layer>,
    pub outcome: Outcome,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Transcript {
    pub fn message_summaries(&self) -> Vec<&str> {
        self.events
            .iter()
            .filter_map(|e| match &e.body {
                EventBody::Message { summary, .. } => Some(summary.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// Relative strength used for "stronger/weaker" decisions.
pub fn group_strength(id: u16) -> u64 {
    ike_codec::group_bits(id).unwrap_or(0)
}

/// A responder's reaction to one SA_INIT offer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerDecision {
    Accept(u16),
    RequestSwitch(u16),
    Reject(NotifyType),
    Silent,
}

/// Pure negotiation logic shared by the simulator and the mock fleet.
pub fn server_decide(policy: &EpdgPolicy, offered: &[u16], chosen: u16) -> ServerDecision {
    let common: Vec<u16> = offered
        .iter()
        .copied()
        .filter(|g| policy.supported_groups.contains(g))
        .collect();
    if policy.supported_groups.contains(&chosen) {
        match policy.preference {
            ServerPreference::AcceptClientChoice => ServerDecision::Accept(chosen),
            ServerPreference::DemandStrongest => {
                let best = common
                    .iter()
                    .copied()
                    .chain(std::iter::once(chosen))
                    .max_by_key(|&g| group_strength(g))
                    .unwrap_or(chosen);
                if best == chosen {
                    ServerDecision::Accept(chosen)
                } else {
                    ServerDecision::RequestSwitch(best)
                }
            }
            ServerPreference::DemandSpecific(g) => {
                if chosen == g {
                    ServerDecision::Accept(chosen)
                } else {
                    ServerDecision::RequestSwitch(g)
                }
            }
        }
    } else {
        // Chosen group unsupported. Servers demanding a particular strength
        // redirect toward their own set even when the client never offered
        // it; choice-accepting servers can only redirect within the offer.
        match policy.preference {
            ServerPreference::DemandStrongest => {
                let pick = common
                    .iter()
                    .chain(policy.supported_groups.iter())
                    .copied()
                    .max_by_key(|&g| group_strength(g));
                match pick {
                    Some(g) => ServerDecision::RequestSwitch(g),
                    None => unsupported_fallback(policy),
                }
            }
            ServerPreference::DemandSpecific(g) => ServerDecision::RequestSwitch(g),
            ServerPreference::AcceptClientChoice => {
                if let Some(&first) = common.first() {
                    // Honor the client's preference order among the overlap.
                    ServerDecision::RequestSwitch(first)
                } else {
                    unsupported_fallback(policy)
                }
            }
        }
    }
}

fn unsupported_fallback(policy: &EpdgPolicy) -> ServerDecision {
    match policy.on_unsupported {
        UnsupportedAction::ErrorNotify => ServerDecision::Reject(NotifyType::NO_PROPOSAL_CHOSEN),
        UnsupportedAction::Ignore => ServerDecision::Silent,
    }
}

/// The proposal a client sends after an INVALID_KE fixation to `target`;
/// `None` means the client refuses.
pub fn ue_retry_offer(ue: &UePolicy, target: u16) -> Option<Vec<u16>> {
    match ue.invalid_ke_rule {
        InvalidKeRule::RejectAll => None,
        InvalidKeRule::OfferedOnly => ue
            .offered_groups
            .contains(&target)
            .then(|| ue.offered_groups.clone()),
        // The buggy stack discards its state and starts from scratch around
        // the fixed group.
        InvalidKeRule::AnyGroup => Some(vec![target]),
    }
}

struct SimCtx {
    rng: ChaCha20Rng,
    t: u64,
    events: Vec<TranscriptEvent>,
    notes: Vec<String>,
    layers: BTreeSet<Layer>,
}

impl SimCtx {
    fn new(seed: u64) -> SimCtx {
        SimCtx {
            rng: ChaCha20Rng::seed_from_u64(seed),
            t: 0,
            events: Vec::new(),
            notes: Vec::new(),
            layers: BTreeSet::new(),
        }
    }

    fn message(&mut self, from: Actor, to: Actor, msg: &IkeMessage) -> Result<(), SimError> {
        let bytes = ike_codec::encode(msg)?;
        self.events.push(TranscriptEvent {
            t: self.t,
            body: EventBody::Message {
                from,
                to,
                summary: ike_codec::summarize(msg),
                bytes_hex: hex::encode(bytes),
            },
        });
        self.t += 1;
        Ok(())
    }

    fn action(&mut self, actor: Actor, description: impl Into<String>) {
        self.events.push(TranscriptEvent {
            t: self.t,
            body: EventBody::Action {
                actor,
                description: description.into(),
            },
        });
    }

    fn auth(&mut self, description: impl Into<String>) {
        self.events.push(TranscriptEvent {
            t: self.t,
            body: EventBody::AuthEvent {
                description: description.into(),
            },
        });
    }

    fn advance_to(&mut self, t: u64) {
        self.t = self.t.max(t);
    }

    fn add_layer(&mut self, layer: Layer) {
        // L3 implies L2 implies L1.
        match layer {
            Layer::L1 => {}
            Layer::L2 => assert!(self.layers.contains(&Layer::L1)),
            Layer::L3 => assert!(self.layers.contains(&Layer::L2)),
        }
        self.layers.insert(layer);
    }

    fn finish(self, negotiated_group: Option<u16>, outcome: Outcome) -> Transcript {
        Transcript {
            events: self.events,
            negotiated_group,
            layers_compromised: self.layers,
            outcome,
            notes: self.notes,
        }
    }
}

fn client_ke_data(ctx: &mut SimCtx, group: u16) -> Vec<u8> {
    match dh_engine::group_params(group) {
        Ok(params) => {
            let kp = dh_engine::gen_keypair(params, &mut ctx.rng);
            params.to_padded_bytes(&kp.public)
        }
        // ECP or unregistered codes: well-formed random octets, no curve math.
        Err(_) => {
            let len = ike_codec::ke_payload_len(group).unwrap_or(64);
            let mut data = vec![0u8; len];
            ctx.rng.fill_bytes(&mut data);
            data
        }
    }
}

fn build_client_sa_init(
    ctx: &mut SimCtx,
    offered: &[u16],
    chosen: u16,
) -> Result<IkeMessage, SimError> {
    let data = client_ke_data(ctx, chosen);
    let mut spec = ClientProposalSpec::multi_group(offered.to_vec(), chosen, data);
    spec.allow_unoffered_chosen = true;
    Ok(build_sa_init(&spec, &mut ctx.rng)?)
}

fn server_accept_proposal(request: &IkeMessage, group: u16) -> Proposal {
    // Echo the first transform of each non-KE type from the request.
    let mut transforms = Vec::new();
    if let Some(sa) = request.sa_payload() {
        for ty in [TransformType::ENCR, TransformType::PRF, TransformType::INTEG] {
            if let Some(t) = sa.proposals[0]
                .transforms
                .iter()
                .find(|t| t.transform_type == ty)
            {
                transforms.push(t.clone());
            }
        }
    }
    transforms.push(Transform::new(TransformType::KE_GROUP, group));
    Proposal {
        number: 1,
        protocol: ike_codec::PROTOCOL_IKE,
        spi: Vec::new(),
        transforms,
    }
}

/// Emit the server's accepting SA_INIT reply as a bus message.
fn server_accept_reply(
    ctx: &mut SimCtx,
    request: &IkeMessage,
    group: u16,
) -> Result<(), SimError> {
    let mut responder_spi = [0u8; 8];
    ctx.rng.fill_bytes(&mut responder_spi);
    let ke_data = client_ke_data(ctx, group);
    let mut nonce = vec![0u8; 32];
    ctx.rng.fill_bytes(&mut nonce);
    let reply = ike_codec::build_sa_init_response(
        request.header.initiator_spi,
        responder_spi,
        server_accept_proposal(request, group),
        KePayload { group, data: ke_data },
        nonce,
    );
    // The acceptance reply is recorded as an action carrying the encoded
    // bytes: the wire-message list then reads as the initiator sends plus
    // redirect traffic, which is what downgrade sequences are compared on,
    // while the codec path is still exercised end to end.
    let bytes = ike_codec::encode(&reply)?;
    ctx.action(
        Actor::Epdg,
        format!(
            "accepted DH{group}; SA_INIT reply ({} octets) and SA established",
            bytes.len()
        ),
    );
    Ok(())
}

/// Phase-1 negotiation core shared by the handshake and attack entry points.
/// Returns the negotiated group or a failure outcome.
fn negotiate(
    ctx: &mut SimCtx,
    ue: &UePolicy,
    epdg: &EpdgPolicy,
    pivot: Option<(&AttackerModel, u16)>,
) -> Result<Result<u16, Outcome>, SimError> {
    let mut offered = ue.offered_groups.clone();
    let mut chosen = ue.preferred_group;

    if let Some((attacker, target)) = pivot {
        if !attacker.can_drop || !attacker.can_inject {
            return Ok(Err(Outcome::AttackFailed(
                "attacker cannot drop and inject on this path".into(),
            )));
        }
        let first = build_client_sa_init(ctx, &offered, chosen)?;
        ctx.message(Actor::Ue, Actor::Epdg, &first)?;
        ctx.action(Actor::Attacker, "suppressed the SA_INIT before it reached the ePDG");
        let spoof = build_notify_response(
            first.header.initiator_spi,
            [0u8; 8],
            NotifyPayload::invalid_ke(target),
        );
        ctx.message(Actor::Attacker, Actor::Ue, &spoof)?;
        match ue_retry_offer(ue, target) {
            Some(new_offer) => {
                offered = new_offer;
                chosen = target;
            }
            None => {
                let reason = match ue.invalid_ke_rule {
                    InvalidKeRule::OfferedOnly => {
                        format!("client rejected fixation to unoffered DH{target}")
                    }
                    _ => "client rejects INVALID_KE redirects".to_string(),
                };
                ctx.action(Actor::Ue, reason.clone());
                return Ok(Err(Outcome::AttackFailed(reason)));
            }
        }
    }

    let failure = |reason: String| {
        if pivot.is_some() {
            Outcome::AttackFailed(reason)
        } else {
            Outcome::HandshakeFailed(reason)
        }
    };

    let mut redirects = 0u32;
    loop {
        let request = build_client_sa_init(ctx, &offered, chosen)?;
        ctx.message(Actor::Ue, Actor::Epdg, &request)?;
        match server_decide(epdg, &offered, chosen) {
            ServerDecision::Accept(group) => {
                server_accept_reply(ctx, &request, group)?;
                ctx.auth("EAP-AKA authentication inside the IKE tunnel (run once)");
                ctx.action(Actor::Epdg, "CHILD_SA (L2) keyed from the phase-1 exchange");
                return Ok(Ok(group));
            }
            ServerDecision::RequestSwitch(group) => {
                redirects += 1;
                let notify = build_notify_response(
                    request.header.initiator_spi,
                    [0u8; 8],
                    NotifyPayload::invalid_ke(group),
                );
                ctx.message(Actor::Epdg, Actor::Ue, &notify)?;
                if pivot.is_some() {
                    return Ok(Err(Outcome::AttackFailed(format!(
                        "server demanded DH{group} instead of the downgraded choice"
                    ))));
                }
                if redirects > 2 {
                    return Ok(Err(failure("redirect loop".into())));
                }
                match ue_retry_offer(ue, group) {
                    Some(new_offer) => {
                        offered = new_offer;
                        chosen = group;
                    }
                    None => {
                        let reason = match ue.invalid_ke_rule {
                            InvalidKeRule::OfferedOnly => {
                                format!("redirect to unoffered DH{group} rejected")
                            }
                            _ => "client rejects INVALID_KE redirects".to_string(),
                        };
                        ctx.action(Actor::Ue, reason.clone());
                        return Ok(Err(failure(reason)));
                    }
                }
            }
            ServerDecision::Reject(notify_type) => {
                let notify = build_notify_response(
                    request.header.initiator_spi,
                    [0u8; 8],
                    NotifyPayload {
                        protocol_id: 0,
                        spi: Vec::new(),
                        notify_type,
                        data: Vec::new(),
                    },
                );
                ctx.message(Actor::Epdg, Actor::Ue, &notify)?;
                return Ok(Err(failure("no common group".into())));
            }
            ServerDecision::Silent => {
                ctx.action(Actor::Epdg, "ignored the request");
                return Ok(Err(failure("no response".into())));
            }
        }
    }
}

fn validated(
    ue: &UePolicy,
    epdg: &EpdgPolicy,
    attacker: Option<&AttackerModel>,
) -> Result<(), SimError> {
    ue.validate()?;
    epdg.validate()?;
    if let Some(a) = attacker {
        a.validate()?;
    }
    Ok(())
}

/// Plain client/server handshake, optionally with a passive on-path
/// observer. Deterministic for a given seed.
pub fn run_handshake(
    ue: &UePolicy,
    epdg: &EpdgPolicy,
    attacker: Option<&AttackerModel>,
    seed: u64,
) -> Transcript {
    let mut ctx = SimCtx::new(seed);
    if let Err(e) = validated(ue, epdg, attacker) {
        return ctx.finish(None, Outcome::HandshakeFailed(e.to_string()));
    }
    if attacker.is_some() {
        ctx.action(Actor::Attacker, "on path, passive");
    }
    match negotiate(&mut ctx, ue, epdg, None) {
        Ok(Ok(group)) => ctx.finish(Some(group), Outcome::Success),
        Ok(Err(outcome)) => ctx.finish(None, outcome),
        Err(e) => ctx.finish(None, Outcome::HandshakeFailed(e.to_string())),
    }
}

/// Suppress the first SA_INIT and spoof INVALID_KE to pivot the client onto
/// `target_group`. Succeeds iff the client follows the fixation and the
/// server tolerates the resulting choice.
pub fn attack_invalid_ke_pivot(
    ue: &UePolicy,
    epdg: &EpdgPolicy,
    attacker: &AttackerModel,
    target_group: u16,
    seed: u64,
) -> Transcript {
    let mut ctx = SimCtx::new(seed);
    if let Err(e) = validated(ue, epdg, Some(attacker)) {
        return ctx.finish(None, Outcome::AttackFailed(e.to_string()));
    }
    match negotiate(&mut ctx, ue, epdg, Some((attacker, target_group))) {
        Ok(Ok(group)) => {
            ctx.action(
                Actor::Attacker,
                format!("key exchange pinned to DH{group} ({} bit)", group_strength(group)),
            );
            ctx.finish(Some(group), Outcome::Downgraded(group))
        }
        Ok(Err(outcome)) => ctx.finish(None, outcome),
        Err(e) => ctx.finish(None, Outcome::AttackFailed(e.to_string())),
    }
}

/// Virtual-time schedule for the takeover simulation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RekeySchedule {
    /// Downgrade the initial handshake first (step 1 of the full attack).
    #[serde(default)]
    pub pivot_target: Option<u16>,
    /// Virtual time of the CHILD_SA rekey; defaults to just after the L1
    /// rekey.
    #[serde(default)]
    pub l2_rekey_s: Option<u64>,
    /// Trigger the L1 rekey earlier than the soft timer. Speculative: the
    /// standard permits peer-triggered rekeying but this was not tested
    /// against deployments.
    #[serde(default)]
    pub premature_l1_rekey_s: Option<u64>,
}

/// Crack the phase-1 key, then ride the authentication-free rekeying into
/// control of L1, L2 and (when SIP encryption is optional) L3.
pub fn rekey_takeover(
    ue: &UePolicy,
    epdg: &EpdgPolicy,
    attacker: &AttackerModel,
    schedule: &RekeySchedule,
    seed: u64,
) -> Result<Transcript, SimError> {
    let mut ctx = SimCtx::new(seed);
    validated(ue, epdg, Some(attacker))?;
    ctx.notes.push(
        "rekeying is modeled as a fresh unauthenticated DH exchange; the message-level \
         mechanics of answering both sides are abstracted"
            .to_string(),
    );

    let pivot = schedule.pivot_target.map(|t| (attacker, t));
    let negotiated = match negotiate(&mut ctx, ue, epdg, pivot)? {
        Ok(group) => group,
        Err(outcome) => return Ok(ctx.finish(None, outcome)),
    };

    if attacker.crack_capability < negotiated {
        return Err(SimError::Precondition(format!(
            "attacker cracks up to DH{}, session negotiated DH{negotiated}",
            attacker.crack_capability
        )));
    }

    // Race the key lifetime.
    if attacker.crack_latency_s >= ue.rekey_hard_s {
        ctx.advance_to(ue.rekey_hard_s);
        ctx.action(
            Actor::Epdg,
            "hard lifetime expired; session rekeyed with a fresh exchange",
        );
        ctx.action(Actor::Attacker, "recovered a stale key only");
        let outcome = Outcome::AttackFailed("key rotated before the crack completed".into());
        return Ok(ctx.finish(Some(negotiated), outcome));
    }
    ctx.advance_to(attacker.crack_latency_s);
    ctx.add_layer(Layer::L1);
    ctx.action(
        Actor::Attacker,
        format!("cracked the DH{negotiated} exchange; reading L1 plaintext"),
    );

    // Next L1 rekey after the compromise.
    if schedule.premature_l1_rekey_s.is_some() {
        ctx.notes.push(
            "premature rekey trigger used: speculative, not validated against deployments"
                .to_string(),
        );
    }
    let t_l1 = schedule
        .premature_l1_rekey_s
        .unwrap_or(ue.rekey_soft_s)
        .max(attacker.crack_latency_s + 1);
    ctx.advance_to(t_l1);
    if epdg.reauth_on_rekey {
        ctx.auth("responder demanded reauthentication at rekey");
        let outcome = Outcome::AttackFailed("unexpected reauthentication at L1 rekey".into());
        return Ok(ctx.finish(Some(negotiated), outcome));
    }
    ctx.action(
        Actor::Attacker,
        "L1 rekey: handshakes UE and ePDG independently, splitting the session",
    );

    let t_l2 = schedule.l2_rekey_s.unwrap_or(t_l1 + 1).max(t_l1 + 1);
    ctx.advance_to(t_l2);
    // No authentication may occur between the compromise and L2 control.
    let auth_between = ctx.events.iter().any(|e| {
        e.t > attacker.crack_latency_s
            && e.t <= t_l2
            && matches!(e.body, EventBody::AuthEvent { .. })
    });
    if auth_between {
        let outcome = Outcome::AttackFailed("authentication interposed before L2 takeover".into());
        return Ok(ctx.finish(Some(negotiated), outcome));
    }
    ctx.add_layer(Layer::L2);
    ctx.action(
        Actor::Attacker,
        "L2 rekey: handshakes both sides without any authentication; CHILD_SA under attacker control",
    );

    ctx.advance_to(t_l2 + 1);
    if ue.sip_encryption_required || epdg.enforce_sip_encryption {
        ctx.action(
            Actor::Epdg,
            "SIP encryption enforced; L3 stays with the endpoints",
        );
    } else {
        ctx.add_layer(Layer::L3);
        ctx.action(
            Actor::Attacker,
            "SIP encryption optional: hijacked the authenticated IMS session (L3)",
        );
    }
    Ok(ctx.finish(Some(negotiated), Outcome::Success))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub reason: String,
}

/// Decision table for the INVALID_KE pivot against an observed server
/// behavior.
pub fn downgrade_feasibility(ue: &UePolicy, tolerance: &ToleranceResult) -> FeasibilityVerdict {
    let client_pivotable = match ue.invalid_ke_rule {
        InvalidKeRule::RejectAll => {
            return FeasibilityVerdict {
                feasible: false,
                reason: "client rejects INVALID_KE redirects".into(),
            }
        }
        InvalidKeRule::AnyGroup => true,
        InvalidKeRule::OfferedOnly => ue.offered_groups.len() > 1,
    };
    if !client_pivotable {
        return FeasibilityVerdict {
            feasible: false,
            reason: "client announces a single DH group".into(),
        };
    }
    match tolerance {
        ToleranceResult::Tolerated => FeasibilityVerdict {
            feasible: true,
            reason: "client pivotable and server tolerates weak preferences".into(),
        },
        ToleranceResult::DowngradeIndicated { group } => FeasibilityVerdict {
            feasible: true,
            reason: format!("server itself steers toward DH{group}"),
        },
        ToleranceResult::UpgradeRequested { group } => FeasibilityVerdict {
            feasible: false,
            reason: format!("server demands an upgrade to DH{group}"),
        },
        ToleranceResult::Error => FeasibilityVerdict {
            feasible: false,
            reason: "server rejects weak-preference handshakes".into(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Handshake,
    InvalidKePivot,
    RekeyTakeover,
}

/// A simulation scenario as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub ue: UePolicy,
    pub epdg: EpdgPolicy,
    #[serde(default)]
    pub attacker: Option<AttackerModel>,
    #[serde(default)]
    pub target_group: Option<u16>,
    #[serde(default)]
    pub schedule: Option<RekeySchedule>,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<Transcript, SimError> {
    let seed = scenario.seed.unwrap_or(0);
    match scenario.kind {
        ScenarioKind::Handshake => Ok(run_handshake(
            &scenario.ue,
            &scenario.epdg,
            scenario.attacker.as_ref(),
            seed,
        )),
        ScenarioKind::InvalidKePivot => {
            let attacker = scenario.attacker.as_ref().ok_or_else(|| {
                SimError::InvalidPolicy("pivot scenario requires an attacker".into())
            })?;
            let target = scenario.target_group.ok_or_else(|| {
                SimError::InvalidPolicy("pivot scenario requires target_group".into())
            })?;
            Ok(attack_invalid_ke_pivot(
                &scenario.ue,
                &scenario.epdg,
                attacker,
                target,
                seed,
            ))
        }
        ScenarioKind::RekeyTakeover => {
            let attacker = scenario.attacker.as_ref().ok_or_else(|| {
                SimError::InvalidPolicy("takeover scenario requires an attacker".into())
            })?;
            let schedule = scenario.schedule.clone().unwrap_or_default();
            rekey_takeover(&scenario.ue, &scenario.epdg, attacker, &schedule, seed)
        }
    }
}

/// Human-readable message-sequence rendering.
pub fn render_sequence(transcript: &Transcript) -> String {
    let mut out = String::new();
    for event in &transcript.events {
        match &event.body {
            EventBody::Message { from, to, summary, .. } => {
                out.push_str(&format!(
                    "t={:<7} {:>5} -> {:<5}  {}\n",
                    event.t,
                    from.label(),
                    to.label(),
                    summary
                ));
            }
            EventBody::Action { actor, description } => {
                out.push_str(&format!(
                    "t={:<7} {:>5}           {}\n",
                    event.t,
                    actor.label(),
                    description
                ));
            }
            EventBody::AuthEvent { description } => {
                out.push_str(&format!("t={:<7}  auth           {}\n", event.t, description));
            }
        }
    }
    let negotiated = transcript
        .negotiated_group
        .map(|g| format!("DH{g}"))
        .unwrap_or_else(|| "-".into());
    let layers: Vec<String> = transcript
        .layers_compromised
        .iter()
        .map(|l| format!("{l:?}"))
        .collect();
    out.push_str(&format!(
        "negotiated: {negotiated}   layers compromised: [{}]   outcome: {:?}\n",
        layers.join(", "),
        transcript.outcome
    ));
    out
}

/// Known private exponents (hex) from a policy's static pool, for analyses
/// that verify exponent sharing.
pub fn pool_exponents(policy: &EpdgPolicy) -> Vec<BigUint> {
    match &policy.key_mode {
        KeyMode::StaticPool(pool) => pool
            .iter()
            .filter_map(|h| hex::decode(h).ok())
            .map(|b| BigUint::from_bytes_be(&b))
            .collect(),
        _ => Vec::new(),
    }
}
