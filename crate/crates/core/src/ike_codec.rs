//! Bit-exact encoder/decoder for the IKEv2 subset needed to audit SA_INIT
//! exchanges: SA, KE, Nonce and Notify payloads per RFC 7296, with opaque
//! passthrough for everything else.
//!
//! Deployed ePDGs answer probes with all kinds of extra payloads (vendor
//! ids, certificates, fragmentation notifies), so the decoder never rejects
//! an unanticipated payload type: it is preserved byte-exactly and survives
//! re-encoding.

use rand::RngCore;
use thiserror::Error;

/// IKEv2 header size on the wire.
pub const HEADER_LEN: usize = 28;
/// Version octet: major 2, minor 0.
pub const VERSION_IKEV2: u8 = 0x20;
/// Four zero octets prefixed to IKE datagrams on port 4500.
pub const NON_ESP_MARKER: [u8; 4] = [0, 0, 0, 0];

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("truncated message: need {needed} octets, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("malformed payload chain: {0}")]
    MalformedChain(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("proposal offers no key-exchange group")]
    EmptyProposal,
}

/// Exchange type code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeType(pub u8);

impl ExchangeType {
    pub const IKE_SA_INIT: ExchangeType = ExchangeType(34);
    pub const IKE_AUTH: ExchangeType = ExchangeType(35);
    pub const CREATE_CHILD_SA: ExchangeType = ExchangeType(36);
    pub const INFORMATIONAL: ExchangeType = ExchangeType(37);
}

/// Payload type code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadType(pub u8);

impl PayloadType {
    pub const NONE: PayloadType = PayloadType(0);
    pub const SA: PayloadType = PayloadType(33);
    pub const KE: PayloadType = PayloadType(34);
    pub const NONCE: PayloadType = PayloadType(40);
    pub const NOTIFY: PayloadType = PayloadType(41);
}

/// Notify message type code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NotifyType(pub u16);

impl NotifyType {
    pub const NO_PROPOSAL_CHOSEN: NotifyType = NotifyType(14);
    pub const INVALID_KE_PAYLOAD: NotifyType = NotifyType(17);

    /// Types below 16384 report errors.
    pub fn is_error(self) -> bool {
        self.0 < 16384
    }
}

/// Transform type within an SA proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransformType(pub u8);

impl TransformType {
    pub const ENCR: TransformType = TransformType(1);
    pub const PRF: TransformType = TransformType(2);
    pub const INTEG: TransformType = TransformType(3);
    pub const KE_GROUP: TransformType = TransformType(4);

    const REQUIRED: [TransformType; 4] = [
        TransformType::ENCR,
        TransformType::PRF,
        TransformType::INTEG,
        TransformType::KE_GROUP,
    ];
}

/// Common transform ids used by the probe builders.
pub mod transform_ids {
    pub const ENCR_3DES: u16 = 3;
    pub const ENCR_AES_CBC: u16 = 12;
    pub const PRF_HMAC_SHA1: u16 = 2;
    pub const PRF_HMAC_SHA2_256: u16 = 5;
    pub const INTEG_HMAC_SHA1_96: u16 = 2;
    /// Key Length attribute type (TV format).
    pub const ATTR_KEY_LENGTH: u16 = 14;
}

/// Header flag bits.
pub mod flags {
    pub const INITIATOR: u8 = 0x08;
    pub const VERSION: u8 = 0x10;
    pub const RESPONSE: u8 = 0x20;
}

/// Octet counts of KE payload data per group code: modulus length for MODP,
/// point encoding length for ECP (no curve math is done on these).
pub fn ke_payload_len(group: u16) -> Option<usize> {
    match group {
        1 => Some(96),
        2 => Some(128),
        5 => Some(192),
        14 => Some(256),
        15 => Some(384),
        16 => Some(512),
        17 => Some(768),
        18 => Some(1024),
        19 => Some(64),  // 256-bit ECP: x || y
        20 => Some(96),  // 384-bit ECP
        21 => Some(132), // 521-bit ECP
        25 => Some(48),  // 192-bit ECP
        26 => Some(56),  // 224-bit ECP
        31 => Some(32),  // Curve25519
        _ => None,
    }
}

/// True for the eight MODP group codes this toolkit does key agreement for.
pub fn is_modp_code(group: u16) -> bool {
    matches!(group, 1 | 2 | 5 | 14 | 15 | 16 | 17 | 18)
}

/// Nominal bit strength per group code: modulus bits for MODP, curve bits
/// for ECP. ECP codes deliberately rank below the MODP moduli, matching how
/// the surveyed deployments order them.
pub fn group_bits(group: u16) -> Option<u64> {
    match group {
        g if is_modp_code(g) => ke_payload_len(g).map(|octets| octets as u64 * 8),
        19 => Some(256),
        20 => Some(384),
        21 => Some(521),
        25 => Some(192),
        26 => Some(224),
        31 => Some(255),
        _ => None,
    }
}

/// Transform attribute, TV (short) or TLV (long) form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeValue {
    Short(u16),
    Long(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformAttribute {
    pub attr_type: u16,
    pub value: AttributeValue,
}

impl TransformAttribute {
    pub fn key_length(bits: u16) -> TransformAttribute {
        TransformAttribute {
            attr_type: transform_ids::ATTR_KEY_LENGTH,
            value: AttributeValue::Short(bits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transform {
    pub transform_type: TransformType,
    pub transform_id: u16,
    pub attributes: Vec<TransformAttribute>,
}

impl Transform {
    pub fn new(transform_type: TransformType, transform_id: u16) -> Transform {
        Transform {
            transform_type,
            transform_id,
            attributes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    /// Ordinal, starting at 1.
    pub number: u8,
    /// Protocol id; 1 = IKE.
    pub protocol: u8,
    pub spi: Vec<u8>,
    pub transforms: Vec<Transform>,
}

pub const PROTOCOL_IKE: u8 = 1;

impl Proposal {
    /// Group codes offered by this proposal's KE-GROUP transforms, in order.
    pub fn ke_groups(&self) -> Vec<u16> {
        self.transforms
            .iter()
            .filter(|t| t.transform_type == TransformType::KE_GROUP)
            .map(|t| t.transform_id)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaPayload {
    pub proposals: Vec<Proposal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KePayload {
    pub group: u16,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoncePayload {
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotifyPayload {
    pub protocol_id: u8,
    pub spi: Vec<u8>,
    pub notify_type: NotifyType,
    pub data: Vec<u8>,
}

impl NotifyPayload {
    /// INVALID_KE carrying the responder-selected group in two data octets.
    pub fn invalid_ke(group: u16) -> NotifyPayload {
        NotifyPayload {
            protocol_id: 0,
            spi: Vec::new(),
            notify_type: NotifyType::INVALID_KE_PAYLOAD,
            data: group.to_be_bytes().to_vec(),
        }
    }

    /// Group code carried by an INVALID_KE notification, if well-formed.
    pub fn invalid_ke_group(&self) -> Option<u16> {
        if self.notify_type == NotifyType::INVALID_KE_PAYLOAD && self.data.len() >= 2 {
            Some(u16::from_be_bytes([self.data[0], self.data[1]]))
        } else {
            None
        }
    }
}

/// A payload the codec does not interpret, kept byte-exact. Also used for
/// known type codes whose contents fail strict parsing, so that decoding
/// never discards information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpaquePayload {
    pub type_code: u8,
    /// Raw critical/reserved octet from the generic payload header.
    pub flags: u8,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Sa(SaPayload),
    KeyExchange(KePayload),
    Nonce(NoncePayload),
    Notify(NotifyPayload),
    Opaque(OpaquePayload),
}

impl Payload {
    pub fn type_code(&self) -> u8 {
        match self {
            Payload::Sa(_) => PayloadType::SA.0,
            Payload::KeyExchange(_) => PayloadType::KE.0,
            Payload::Nonce(_) => PayloadType::NONCE.0,
            Payload::Notify(_) => PayloadType::NOTIFY.0,
            Payload::Opaque(p) => p.type_code,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IkeHeader {
    pub initiator_spi: [u8; 8],
    pub responder_spi: [u8; 8],
    /// Type code of the first payload; derived from the payload list when
    /// encoding.
    pub next_payload: u8,
    pub version: u8,
    pub exchange_type: ExchangeType,
    pub flags: u8,
    pub message_id: u32,
    /// Total message length; derived when encoding.
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IkeMessage {
    pub header: IkeHeader,
    pub payloads: Vec<Payload>,
}

impl IkeMessage {
    pub fn new(header: IkeHeader, payloads: Vec<Payload>) -> IkeMessage {
        let mut msg = IkeMessage { header, payloads };
        msg.refresh_derived_fields();
        msg
    }

    /// Recompute `next_payload` and `length` from the payload list.
    pub fn refresh_derived_fields(&mut self) {
        self.header.next_payload = self
            .payloads
            .first()
            .map(Payload::type_code)
            .unwrap_or(PayloadType::NONE.0);
        let body: usize = self.payloads.iter().map(encoded_payload_len).sum();
        self.header.length = (HEADER_LEN + body) as u32;
    }

    pub fn sa_payload(&self) -> Option<&SaPayload> {
        self.payloads.iter().find_map(|p| match p {
            Payload::Sa(sa) => Some(sa),
            _ => None,
        })
    }

    pub fn ke_payload(&self) -> Option<&KePayload> {
        self.payloads.iter().find_map(|p| match p {
            Payload::KeyExchange(ke) => Some(ke),
            _ => None,
        })
    }

    pub fn nonce_payload(&self) -> Option<&NoncePayload> {
        self.payloads.iter().find_map(|p| match p {
            Payload::Nonce(n) => Some(n),
            _ => None,
        })
    }

    pub fn notifications(&self) -> impl Iterator<Item = &NotifyPayload> {
        self.payloads.iter().filter_map(|p| match p {
            Payload::Notify(n) => Some(n),
            _ => None,
        })
    }

    pub fn is_response(&self) -> bool {
        self.header.flags & flags::RESPONSE != 0
    }
}

fn encoded_attr_len(attr: &TransformAttribute) -> usize {
    match &attr.value {
        AttributeValue::Short(_) => 4,
        AttributeValue::Long(v) => 4 + v.len(),
    }
}

fn encoded_transform_len(t: &Transform) -> usize {
    8 + t.attributes.iter().map(encoded_attr_len).sum::<usize>()
}

fn encoded_proposal_len(p: &Proposal) -> usize {
    8 + p.spi.len() + p.transforms.iter().map(encoded_transform_len).sum::<usize>()
}

fn payload_body_len(p: &Payload) -> usize {
    match p {
        Payload::Sa(sa) => sa.proposals.iter().map(encoded_proposal_len).sum(),
        Payload::KeyExchange(ke) => 4 + ke.data.len(),
        Payload::Nonce(n) => n.data.len(),
        Payload::Notify(n) => 4 + n.spi.len() + n.data.len(),
        Payload::Opaque(o) => o.body.len(),
    }
}

fn encoded_payload_len(p: &Payload) -> usize {
    4 + payload_body_len(p)
}

fn validate_payload(p: &Payload) -> Result<(), CodecError> {
    match p {
        Payload::Sa(sa) => {
            for prop in &sa.proposals {
                if prop.number == 0 {
                    return Err(CodecError::InvariantViolation(
                        "proposal number must be >= 1".into(),
                    ));
                }
                if prop.transforms.is_empty() {
                    return Err(CodecError::InvariantViolation(
                        "proposal has no transforms".into(),
                    ));
                }
                for required in TransformType::REQUIRED {
                    if !prop.transforms.iter().any(|t| t.transform_type == required) {
                        return Err(CodecError::InvariantViolation(format!(
                            "IKE proposal missing transform type {}",
                            required.0
                        )));
                    }
                }
                for t in &prop.transforms {
                    if t.transform_type == TransformType::KE_GROUP
                        && ke_payload_len(t.transform_id).is_none()
                    {
                        return Err(CodecError::InvariantViolation(format!(
                            "KE-GROUP transform id {} is not a known group code",
                            t.transform_id
                        )));
                    }
                }
                if prop.transforms.len() > 255 {
                    return Err(CodecError::InvariantViolation(
                        "more than 255 transforms".into(),
                    ));
                }
            }
        }
        Payload::KeyExchange(ke) => {
            if is_modp_code(ke.group) {
                let want = ke_payload_len(ke.group).expect("modp length");
                if ke.data.len() != want {
                    return Err(CodecError::InvariantViolation(format!(
                        "KE data for MODP group {} must be {} octets, got {}",
                        ke.group,
                        want,
                        ke.data.len()
                    )));
                }
            }
        }
        Payload::Nonce(n) => {
            if n.data.len() < 16 || n.data.len() > 256 {
                return Err(CodecError::InvariantViolation(format!(
                    "nonce length {} outside [16, 256]",
                    n.data.len()
                )));
            }
        }
        Payload::Notify(_) | Payload::Opaque(_) => {}
    }
    if encoded_payload_len(p) > u16::MAX as usize {
        return Err(CodecError::InvariantViolation(
            "payload exceeds 65535 octets".into(),
        ));
    }
    Ok(())
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn encode_payload_body(p: &Payload, out: &mut Vec<u8>) {
    match p {
        Payload::Sa(sa) => {
            for (i, prop) in sa.proposals.iter().enumerate() {
                let last = i + 1 == sa.proposals.len();
                out.push(if last { 0 } else { 2 });
                out.push(0);
                put_u16(out, encoded_proposal_len(prop) as u16);
                out.push(prop.number);
                out.push(prop.protocol);
                out.push(prop.spi.len() as u8);
                out.push(prop.transforms.len() as u8);
                out.extend_from_slice(&prop.spi);
                for (j, t) in prop.transforms.iter().enumerate() {
                    let t_last = j + 1 == prop.transforms.len();
                    out.push(if t_last { 0 } else { 3 });
                    out.push(0);
                    put_u16(out, encoded_transform_len(t) as u16);
                    out.push(t.transform_type.0);
                    out.push(0);
                    put_u16(out, t.transform_id);
                    for attr in &t.attributes {
                        match &attr.value {
                            AttributeValue::Short(v) => {
                                put_u16(out, attr.attr_type | 0x8000);
                                put_u16(out, *v);
                            }
                            AttributeValue::Long(v) => {
                                put_u16(out, attr.attr_type & 0x7fff);
                                put_u16(out, v.len() as u16);
                                out.extend_from_slice(v);
                            }
                        }
                    }
                }
            }
        }
        Payload::KeyExchange(ke) => {
            put_u16(out, ke.group);
            put_u16(out, 0);
            out.extend_from_slice(&ke.data);
        }
        Payload::Nonce(n) => out.extend_from_slice(&n.data),
        Payload::Notify(n) => {
            out.push(n.protocol_id);
            out.push(n.spi.len() as u8);
            put_u16(out, n.notify_type.0);
            out.extend_from_slice(&n.spi);
            out.extend_from_slice(&n.data);
        }
        Payload::Opaque(o) => out.extend_from_slice(&o.body),
    }
}

/// Encode a message to its exact wire form. The header's `next_payload` and
/// `length` fields are derived from the payload list.
pub fn encode(msg: &IkeMessage) -> Result<Vec<u8>, CodecError> {
    for p in &msg.payloads {
        validate_payload(p)?;
    }
    let body: usize = msg.payloads.iter().map(encoded_payload_len).sum();
    let total = HEADER_LEN + body;
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&msg.header.initiator_spi);
    out.extend_from_slice(&msg.header.responder_spi);
    out.push(
        msg.payloads
            .first()
            .map(Payload::type_code)
            .unwrap_or(PayloadType::NONE.0),
    );
    out.push(msg.header.version);
    out.push(msg.header.exchange_type.0);
    out.push(msg.header.flags);
    out.extend_from_slice(&msg.header.message_id.to_be_bytes());
    out.extend_from_slice(&(total as u32).to_be_bytes());
    for (i, p) in msg.payloads.iter().enumerate() {
        let next = msg
            .payloads
            .get(i + 1)
            .map(Payload::type_code)
            .unwrap_or(PayloadType::NONE.0);
        out.push(next);
        out.push(match p {
            Payload::Opaque(o) => o.flags,
            _ => 0,
        });
        put_u16(&mut out, encoded_payload_len(p) as u16);
        encode_payload_body(p, &mut out);
    }
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

fn parse_sa_body(body: &[u8]) -> Option<SaPayload> {
    let mut proposals = Vec::new();
    let mut rest = body;
    loop {
        if rest.len() < 8 {
            return None;
        }
        let more = rest[0];
        if more != 0 && more != 2 {
            return None;
        }
        let length = u16::from_be_bytes([rest[2], rest[3]]) as usize;
        if length < 8 || length > rest.len() {
            return None;
        }
        let number = rest[4];
        let protocol = rest[5];
        let spi_size = rest[6] as usize;
        let transform_count = rest[7] as usize;
        let prop_body = &rest[8..length];
        if prop_body.len() < spi_size {
            return None;
        }
        let spi = prop_body[..spi_size].to_vec();
        let mut transforms = Vec::new();
        let mut t_rest = &prop_body[spi_size..];
        for i in 0..transform_count {
            if t_rest.len() < 8 {
                return None;
            }
            let t_more = t_rest[0];
            if t_more != 0 && t_more != 3 {
                return None;
            }
            if (t_more == 0) != (i + 1 == transform_count) {
                return None;
            }
            let t_len = u16::from_be_bytes([t_rest[2], t_rest[3]]) as usize;
            if t_len < 8 || t_len > t_rest.len() {
                return None;
            }
            let transform_type = TransformType(t_rest[4]);
            if t_rest[5] != 0 {
                return None;
            }
            let transform_id = u16::from_be_bytes([t_rest[6], t_rest[7]]);
            let mut attributes = Vec::new();
            let mut a_rest = &t_rest[8..t_len];
            while !a_rest.is_empty() {
                if a_rest.len() < 4 {
                    return None;
                }
                let raw_type = u16::from_be_bytes([a_rest[0], a_rest[1]]);
                if raw_type & 0x8000 != 0 {
                    attributes.push(TransformAttribute {
                        attr_type: raw_type & 0x7fff,
                        value: AttributeValue::Short(u16::from_be_bytes([a_rest[2], a_rest[3]])),
                    });
                    a_rest = &a_rest[4..];
                } else {
                    let v_len = u16::from_be_bytes([a_rest[2], a_rest[3]]) as usize;
                    if a_rest.len() < 4 + v_len {
                        return None;
                    }
                    attributes.push(TransformAttribute {
                        attr_type: raw_type,
                        value: AttributeValue::Long(a_rest[4..4 + v_len].to_vec()),
                    });
                    a_rest = &a_rest[4 + v_len..];
                }
            }
            transforms.push(Transform {
                transform_type,
                transform_id,
                attributes,
            });
            t_rest = &t_rest[t_len..];
        }
        if !t_rest.is_empty() {
            return None;
        }
        proposals.push(Proposal {
            number,
            protocol,
            spi,
            transforms,
        });
        rest = &rest[length..];
        if more == 0 {
            if !rest.is_empty() {
                return None;
            }
            break;
        }
    }
    if proposals.is_empty() {
        return None;
    }
    Some(SaPayload { proposals })
}

fn parse_typed_payload(type_code: u8, body: &[u8]) -> Option<Payload> {
    match PayloadType(type_code) {
        PayloadType::SA => parse_sa_body(body).map(Payload::Sa),
        PayloadType::KE => {
            if body.len() < 4 || body[2] != 0 || body[3] != 0 {
                return None;
            }
            Some(Payload::KeyExchange(KePayload {
                group: u16::from_be_bytes([body[0], body[1]]),
                data: body[4..].to_vec(),
            }))
        }
        PayloadType::NONCE => {
            if body.len() < 16 || body.len() > 256 {
                return None;
            }
            Some(Payload::Nonce(NoncePayload {
                data: body.to_vec(),
            }))
        }
        PayloadType::NOTIFY => {
            if body.len() < 4 {
                return None;
            }
            let spi_size = body[1] as usize;
            if body.len() < 4 + spi_size {
                return None;
            }
            Some(Payload::Notify(NotifyPayload {
                protocol_id: body[0],
                spi: body[4..4 + spi_size].to_vec(),
                notify_type: NotifyType(u16::from_be_bytes([body[2], body[3]])),
                data: body[4 + spi_size..].to_vec(),
            }))
        }
        _ => None,
    }
}

/// Decode a datagram. Unknown payload types (and known types whose bodies do
/// not parse strictly) come back as [`Payload::Opaque`] so re-encoding
/// reproduces the input.
pub fn decode(raw: &[u8]) -> Result<IkeMessage, CodecError> {
    if raw.len() < HEADER_LEN {
        return Err(CodecError::Truncated {
            needed: HEADER_LEN,
            have: raw.len(),
        });
    }
    let mut initiator_spi = [0u8; 8];
    initiator_spi.copy_from_slice(&raw[0..8]);
    let mut responder_spi = [0u8; 8];
    responder_spi.copy_from_slice(&raw[8..16]);
    let length = u32::from_be_bytes([raw[24], raw[25], raw[26], raw[27]]);
    if length as usize > raw.len() {
        return Err(CodecError::Truncated {
            needed: length as usize,
            have: raw.len(),
        });
    }
    if (length as usize) < HEADER_LEN {
        return Err(CodecError::MalformedChain(format!(
            "length field {length} below header size"
        )));
    }
    if length as usize != raw.len() {
        return Err(CodecError::MalformedChain(format!(
            "length field {} does not cover the {}-octet datagram",
            length,
            raw.len()
        )));
    }
    let header = IkeHeader {
        initiator_spi,
        responder_spi,
        next_payload: raw[16],
        version: raw[17],
        exchange_type: ExchangeType(raw[18]),
        flags: raw[19],
        message_id: u32::from_be_bytes([raw[20], raw[21], raw[22], raw[23]]),
        length,
    };

    let mut payloads = Vec::new();
    let mut next = header.next_payload;
    let mut offset = HEADER_LEN;
    while next != PayloadType::NONE.0 {
        if raw.len() < offset + 4 {
            return Err(CodecError::Truncated {
                needed: offset + 4,
                have: raw.len(),
            });
        }
        let following = raw[offset];
        let flags_octet = raw[offset + 1];
        let p_len = u16::from_be_bytes([raw[offset + 2], raw[offset + 3]]) as usize;
        if p_len < 4 {
            return Err(CodecError::MalformedChain(format!(
                "payload length {p_len} below generic header size"
            )));
        }
        if offset + p_len > raw.len() {
            return Err(CodecError::Truncated {
                needed: offset + p_len,
                have: raw.len(),
            });
        }
        let body = &raw[offset + 4..offset + p_len];
        // A set critical/reserved octet on a known type is preserved opaquely
        // rather than parsed-and-normalized away.
        let payload = if flags_octet == 0 {
            parse_typed_payload(next, body)
        } else {
            None
        };
        payloads.push(payload.unwrap_or(Payload::Opaque(OpaquePayload {
            type_code: next,
            flags: flags_octet,
            body: body.to_vec(),
        })));
        offset += p_len;
        next = following;
    }
    if offset != raw.len() {
        return Err(CodecError::MalformedChain(format!(
            "{} trailing octets after final payload",
            raw.len() - offset
        )));
    }
    Ok(IkeMessage { header, payloads })
}

/// One-line rendering of a message for transcripts and captures:
/// `SA_INIT([DH2, DH14], KE_DH14)`, `INVALID_KE(USE DH2)`.
pub fn summarize(msg: &IkeMessage) -> String {
    if let Some(group) = msg
        .notifications()
        .find_map(NotifyPayload::invalid_ke_group)
    {
        return format!("INVALID_KE(USE DH{group})");
    }
    if let Some(notify) = msg.notifications().next() {
        let name = match notify.notify_type {
            NotifyType::NO_PROPOSAL_CHOSEN => "NO_PROPOSAL_CHOSEN".to_string(),
            NotifyType::INVALID_KE_PAYLOAD => "INVALID_KE".to_string(),
            NotifyType(code) => format!("NOTIFY_{code}"),
        };
        return format!("NOTIFY({name})");
    }
    let exchange = match msg.header.exchange_type {
        ExchangeType::IKE_SA_INIT => "SA_INIT",
        ExchangeType::IKE_AUTH => "IKE_AUTH",
        ExchangeType::CREATE_CHILD_SA => "CREATE_CHILD_SA",
        ExchangeType::INFORMATIONAL => "INFORMATIONAL",
        _ => "IKE",
    };
    let mut parts = Vec::new();
    if let Some(sa) = msg.sa_payload() {
        let groups: Vec<String> = sa
            .proposals
            .iter()
            .flat_map(|p| p.ke_groups())
            .map(|g| format!("DH{g}"))
            .collect();
        parts.push(format!("[{}]", groups.join(", ")));
    }
    if let Some(ke) = msg.ke_payload() {
        parts.push(format!("KE_DH{}", ke.group));
    }
    if parts.is_empty() {
        format!("{exchange}()")
    } else {
        format!("{exchange}({})", parts.join(", "))
    }
}

/// Prefix the non-ESP marker used on UDP port 4500.
pub fn frame_datagram(wire: Vec<u8>, non_esp_marker: bool) -> Vec<u8> {
    if !non_esp_marker {
        return wire;
    }
    let mut framed = Vec::with_capacity(4 + wire.len());
    framed.extend_from_slice(&NON_ESP_MARKER);
    framed.extend(wire);
    framed
}

/// Strip a leading non-ESP marker if present.
pub fn unframe_datagram(raw: &[u8]) -> &[u8] {
    if raw.len() > 4 && raw[..4] == NON_ESP_MARKER {
        &raw[4..]
    } else {
        raw
    }
}

/// What a probe or simulated client offers in its first SA_INIT.
#[derive(Debug, Clone)]
pub struct ClientProposalSpec {
    /// KE groups announced in the proposal, preference order.
    pub offered_groups: Vec<u16>,
    /// Group the KE payload is built for.
    pub chosen_group: u16,
    /// Public value octets for the chosen group (callers generate real MODP
    /// keys; ECP probes pass random octets of the standard length).
    pub chosen_public: Vec<u8>,
    /// Build even when `chosen_group` is not among `offered_groups`,
    /// emulating the buggy fixation path.
    pub allow_unoffered_chosen: bool,
    /// Fixed initiator SPI; fresh random when absent.
    pub initiator_spi: Option<[u8; 8]>,
    /// Fixed nonce; fresh random (32 octets) when absent. Fixing it exists to
    /// reproduce observed nonce-reuse behavior in mocks.
    pub nonce: Option<Vec<u8>>,
    /// (encryption id, optional key-length bits) entries; a default list is
    /// used when empty.
    pub encryption: Vec<(u16, Option<u16>)>,
    pub prf: Vec<u16>,
    pub integrity: Vec<u16>,
}

impl ClientProposalSpec {
    pub fn single_group(group: u16, public: Vec<u8>) -> ClientProposalSpec {
        ClientProposalSpec {
            offered_groups: vec![group],
            chosen_group: group,
            chosen_public: public,
            allow_unoffered_chosen: false,
            initiator_spi: None,
            nonce: None,
            encryption: Vec::new(),
            prf: Vec::new(),
            integrity: Vec::new(),
        }
    }

    pub fn multi_group(offered: Vec<u16>, chosen: u16, public: Vec<u8>) -> ClientProposalSpec {
        ClientProposalSpec {
            offered_groups: offered,
            chosen_group: chosen,
            chosen_public: public,
            allow_unoffered_chosen: false,
            initiator_spi: None,
            nonce: None,
            encryption: Vec::new(),
            prf: Vec::new(),
            integrity: Vec::new(),
        }
    }
}

/// Default SA algorithms offered alongside the KE groups.
fn default_noncrypto_transforms() -> Vec<Transform> {
    let mut aes = Transform::new(TransformType::ENCR, transform_ids::ENCR_AES_CBC);
    aes.attributes.push(TransformAttribute::key_length(256));
    let mut aes128 = Transform::new(TransformType::ENCR, transform_ids::ENCR_AES_CBC);
    aes128.attributes.push(TransformAttribute::key_length(128));
    vec![
        aes,
        aes128,
        Transform::new(TransformType::PRF, transform_ids::PRF_HMAC_SHA2_256),
        Transform::new(TransformType::PRF, transform_ids::PRF_HMAC_SHA1),
        Transform::new(TransformType::INTEG, transform_ids::INTEG_HMAC_SHA1_96),
    ]
}

fn proposal_from_spec(spec: &ClientProposalSpec) -> Proposal {
    let mut transforms = Vec::new();
    if spec.encryption.is_empty() && spec.prf.is_empty() && spec.integrity.is_empty() {
        transforms.extend(default_noncrypto_transforms());
    } else {
        for &(id, bits) in &spec.encryption {
            let mut t = Transform::new(TransformType::ENCR, id);
            if let Some(bits) = bits {
                t.attributes.push(TransformAttribute::key_length(bits));
            }
            transforms.push(t);
        }
        for &id in &spec.prf {
            transforms.push(Transform::new(TransformType::PRF, id));
        }
        for &id in &spec.integrity {
            transforms.push(Transform::new(TransformType::INTEG, id));
        }
    }
    for &group in &spec.offered_groups {
        transforms.push(Transform::new(TransformType::KE_GROUP, group));
    }
    Proposal {
        number: 1,
        protocol: PROTOCOL_IKE,
        spi: Vec::new(),
        transforms,
    }
}

/// Build a client's first SA_INIT: SA + KE + Nonce, zero responder SPI,
/// message id 0, initiator flag set.
pub fn build_sa_init<R: RngCore + ?Sized>(
    spec: &ClientProposalSpec,
    rng: &mut R,
) -> Result<IkeMessage, CodecError> {
    if spec.offered_groups.is_empty() {
        return Err(CodecError::EmptyProposal);
    }
    if !spec.offered_groups.contains(&spec.chosen_group) && !spec.allow_unoffered_chosen {
        return Err(CodecError::InvariantViolation(format!(
            "chosen group {} not among offered {:?}",
            spec.chosen_group, spec.offered_groups
        )));
    }
    let initiator_spi = spec.initiator_spi.unwrap_or_else(|| {
        let mut spi = [0u8; 8];
        rng.fill_bytes(&mut spi);
        spi
    });
    let nonce = spec.nonce.clone().unwrap_or_else(|| {
        let mut n = vec![0u8; 32];
        rng.fill_bytes(&mut n);
        n
    });
    let payloads = vec![
        Payload::Sa(SaPayload {
            proposals: vec![proposal_from_spec(spec)],
        }),
        Payload::KeyExchange(KePayload {
            group: spec.chosen_group,
            data: spec.chosen_public.clone(),
        }),
        Payload::Nonce(NoncePayload { data: nonce }),
    ];
    let header = IkeHeader {
        initiator_spi,
        responder_spi: [0u8; 8],
        next_payload: 0,
        version: VERSION_IKEV2,
        exchange_type: ExchangeType::IKE_SA_INIT,
        flags: flags::INITIATOR,
        message_id: 0,
        length: 0,
    };
    let msg = IkeMessage::new(header, payloads);
    // Surfaces KE-length and nonce violations at build time.
    encode(&msg)?;
    Ok(msg)
}

/// Build a responder's accepting SA_INIT reply.
pub fn build_sa_init_response(
    initiator_spi: [u8; 8],
    responder_spi: [u8; 8],
    chosen: Proposal,
    ke: KePayload,
    nonce: Vec<u8>,
) -> IkeMessage {
    let header = IkeHeader {
        initiator_spi,
        responder_spi,
        next_payload: 0,
        version: VERSION_IKEV2,
        exchange_type: ExchangeType::IKE_SA_INIT,
        flags: flags::RESPONSE,
        message_id: 0,
        length: 0,
    };
    IkeMessage::new(
        header,
        vec![
            Payload::Sa(SaPayload {
                proposals: vec![chosen],
            }),
            Payload::KeyExchange(ke),
            Payload::Nonce(NoncePayload { data: nonce }),
        ],
    )
}

/// Build a responder's single-notify reply (INVALID_KE redirects, error
/// notifies).
pub fn build_notify_response(
    initiator_spi: [u8; 8],
    responder_spi: [u8; 8],
    notify: NotifyPayload,
) -> IkeMessage {
    let header = IkeHeader {
        initiator_spi,
        responder_spi,
        next_payload: 0,
        version: VERSION_IKEV2,
        exchange_type: ExchangeType::IKE_SA_INIT,
        flags: flags::RESPONSE,
        message_id: 0,
        length: 0,
    };
    IkeMessage::new(header, vec![Payload::Notify(notify)])
}
