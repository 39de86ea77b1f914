//! ePDG endpoint discovery: FQDN construction from operator codes and
//! resolution to probe targets.

use std::collections::BTreeSet;
use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("invalid PLMN: {0}")]
    InvalidPlmn(String),
    #[error("resolver unavailable: {0}")]
    ResolverUnavailable(String),
}

/// MCC-MNC pair identifying an operator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PlmnId {
    mcc: String,
    mnc: String,
}

impl PlmnId {
    pub fn new(mcc: &str, mnc: &str) -> Result<PlmnId, DiscoveryError> {
        if mcc.len() != 3 || !mcc.bytes().all(|b| b.is_ascii_digit()) {
            return Err(DiscoveryError::InvalidPlmn(format!(
                "mcc {mcc:?} must be exactly 3 digits"
            )));
        }
        if !(2..=3).contains(&mnc.len()) || !mnc.bytes().all(|b| b.is_ascii_digit()) {
            return Err(DiscoveryError::InvalidPlmn(format!(
                "mnc {mnc:?} must be 2 or 3 digits"
            )));
        }
        Ok(PlmnId {
            mcc: mcc.to_string(),
            mnc: mnc.to_string(),
        })
    }

    pub fn mcc(&self) -> &str {
        &self.mcc
    }

    pub fn mnc(&self) -> &str {
        &self.mnc
    }

    /// The ePDG FQDN for this operator: mnc is left-zero-padded to 3 digits
    /// per the numbering plan.
    pub fn epdg_fqdn(&self) -> String {
        format!(
            "epdg.epc.mnc{:0>3}.mcc{}.pub.3gppnetwork.org",
            self.mnc, self.mcc
        )
    }
}

impl fmt::Display for PlmnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.mcc, self.mnc)
    }
}

impl From<PlmnId> for String {
    fn from(p: PlmnId) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PlmnId {
    type Error = DiscoveryError;

    fn try_from(s: String) -> Result<PlmnId, DiscoveryError> {
        let (mcc, mnc) = s
            .split_once(['-', ','])
            .ok_or_else(|| DiscoveryError::InvalidPlmn(format!("{s:?} is not MCC-MNC")))?;
        PlmnId::new(mcc.trim(), mnc.trim())
    }
}

impl std::str::FromStr for PlmnId {
    type Err = DiscoveryError;

    fn from_str(s: &str) -> Result<PlmnId, DiscoveryError> {
        PlmnId::try_from(s.to_string())
    }
}

/// A rectangle of the PLMN code space to enumerate.
#[derive(Debug, Clone)]
pub struct PlmnRange {
    pub mcc_start: u16,
    pub mcc_end: u16,
    pub mnc_start: u16,
    pub mnc_end: u16,
    /// Rendered MNC width for values that fit (2 or 3); values >= 100 always
    /// take 3 digits.
    pub mnc_width: u8,
}

impl PlmnRange {
    /// Parse `"232"` / `"200-799"` and `"05"` / `"00-10"` / `"000-999"`
    /// specs. The MNC's digit count in the range spec fixes the rendered width.
    pub fn parse(mcc_spec: &str, mnc_spec: &str) -> Result<PlmnRange, DiscoveryError> {
        fn bounds(spec: &str, what: &str) -> Result<(String, String), DiscoveryError> {
            let (lo, hi) = match spec.split_once('-') {
                Some((lo, hi)) => (lo.trim(), hi.trim()),
                None => (spec.trim(), spec.trim()),
            };
            if lo.is_empty() || hi.is_empty() {
                return Err(DiscoveryError::InvalidPlmn(format!("empty {what} range")));
            }
            Ok((lo.to_string(), hi.to_string()))
        }
        fn numeric(s: &str, what: &str) -> Result<u16, DiscoveryError> {
            s.parse::<u16>()
                .map_err(|_| DiscoveryError::InvalidPlmn(format!("bad {what} value {s:?}")))
        }
        let (mcc_lo, mcc_hi) = bounds(mcc_spec, "mcc")?;
        if mcc_lo.len() != 3 || mcc_hi.len() != 3 {
            return Err(DiscoveryError::InvalidPlmn(format!(
                "mcc must be 3 digits, got {mcc_spec:?}"
            )));
        }
        let (mnc_lo, mnc_hi) = bounds(mnc_spec, "mnc")?;
        if !(2..=3).contains(&mnc_lo.len()) || !(2..=3).contains(&mnc_hi.len()) {
            return Err(DiscoveryError::InvalidPlmn(format!(
                "mnc must be 2 or 3 digits, got {mnc_spec:?}"
            )));
        }
        Ok(PlmnRange {
            mcc_start: numeric(&mcc_lo, "mcc")?,
            mcc_end: numeric(&mcc_hi, "mcc")?,
            mnc_start: numeric(&mnc_lo, "mnc")?,
            mnc_end: numeric(&mnc_hi, "mnc")?,
            mnc_width: mnc_lo.len() as u8,
        })
    }
}

/// Cartesian expansion of the requested ranges, deduplicated, in
/// deterministic (mcc, mnc) order.
pub fn enumerate_plmns(ranges: &[PlmnRange]) -> Vec<PlmnId> {
    let mut out = BTreeSet::new();
    for range in ranges {
        for mcc in range.mcc_start..=range.mcc_end.min(999) {
            for mnc in range.mnc_start..=range.mnc_end.min(999) {
                let mnc_str = if mnc >= 100 || range.mnc_width == 3 {
                    format!("{mnc:03}")
                } else {
                    format!("{mnc:02}")
                };
                if let Ok(plmn) = PlmnId::new(&format!("{mcc:03}"), &mnc_str) {
                    out.insert(plmn);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// A discovered probe target: one operator endpoint set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpdgTarget {
    pub plmn: PlmnId,
    pub fqdn: String,
    /// Resolved addresses, v4 before v6, each sorted ascending. Empty means
    /// "no ePDG published", which is a finding, not an error.
    pub addresses: Vec<IpAddr>,
    /// ISO-8601 UTC.
    pub resolved_at: String,
    /// Port override for targets not on 500/4500, e.g. mock listeners on
    /// ephemeral ports. Absent for discovered operators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<u16>,
}

impl EpdgTarget {
    /// Synthesize a target for an already-known socket address (mock fleets,
    /// ad-hoc probing).
    pub fn direct(plmn: PlmnId, addr: std::net::SocketAddr, resolved_at: String) -> EpdgTarget {
        let fqdn = plmn.epdg_fqdn();
        EpdgTarget {
            plmn,
            fqdn,
            addresses: vec![addr.ip()],
            resolved_at,
            port: Some(addr.port()),
        }
    }
}

/// DNS record class queried for a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordType {
    A,
    Aaaa,
}

/// Name-resolution service. NXDOMAIN and empty answers come back as
/// `Ok(vec![])`; `Err` is reserved for transport-level failure.
pub trait Resolver {
    fn lookup(&self, fqdn: &str, record: RecordType) -> Result<Vec<IpAddr>, DiscoveryError>;
}

/// Resolve both A and AAAA for an operator's ePDG name.
pub fn resolve(
    plmn: &PlmnId,
    resolver: &dyn Resolver,
    resolved_at: String,
) -> Result<EpdgTarget, DiscoveryError> {
    let fqdn = plmn.epdg_fqdn();
    let mut v4: Vec<Ipv4Addr> = resolver
        .lookup(&fqdn, RecordType::A)?
        .into_iter()
        .filter_map(|a| match a {
            IpAddr::V4(a) => Some(a),
            IpAddr::V6(_) => None,
        })
        .collect();
    let mut v6: Vec<Ipv6Addr> = resolver
        .lookup(&fqdn, RecordType::Aaaa)?
        .into_iter()
        .filter_map(|a| match a {
            IpAddr::V6(a) => Some(a),
            IpAddr::V4(_) => None,
        })
        .collect();
    v4.sort();
    v4.dedup();
    v6.sort();
    v6.dedup();
    let mut addresses: Vec<IpAddr> = v4.into_iter().map(IpAddr::V4).collect();
    addresses.extend(v6.into_iter().map(IpAddr::V6));
    Ok(EpdgTarget {
        plmn: plmn.clone(),
        fqdn,
        addresses,
        resolved_at,
        port: None,
    })
}

/// Deterministic resolver backed by a fixture map; the production default in
/// tests and hermetic CLI runs.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct StubResolver {
    /// fqdn -> answer; names absent from the map resolve to nothing
    /// (NXDOMAIN-equivalent).
    #[serde(flatten)]
    pub entries: std::collections::BTreeMap<String, StubAnswer>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct StubAnswer {
    #[serde(default)]
    pub a: Vec<Ipv4Addr>,
    #[serde(default)]
    pub aaaa: Vec<Ipv6Addr>,
    /// Simulate resolver transport failure for this name.
    #[serde(default)]
    pub unavailable: bool,
}

impl StubResolver {
    pub fn from_json(text: &str) -> Result<StubResolver, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn insert_a(&mut self, fqdn: &str, addrs: Vec<Ipv4Addr>) {
        self.entries.entry(fqdn.to_string()).or_default().a = addrs;
    }

    pub fn insert_aaaa(&mut self, fqdn: &str, addrs: Vec<Ipv6Addr>) {
        self.entries.entry(fqdn.to_string()).or_default().aaaa = addrs;
    }

    pub fn mark_unavailable(&mut self, fqdn: &str) {
        self.entries.entry(fqdn.to_string()).or_default().unavailable = true;
    }
}

impl Resolver for StubResolver {
    fn lookup(&self, fqdn: &str, record: RecordType) -> Result<Vec<IpAddr>, DiscoveryError> {
        match self.entries.get(fqdn) {
            None => Ok(Vec::new()),
            Some(ans) if ans.unavailable => Err(DiscoveryError::ResolverUnavailable(format!(
                "timeout resolving {fqdn}"
            ))),
            Some(ans) => Ok(match record {
                RecordType::A => ans.a.iter().copied().map(IpAddr::V4).collect(),
                RecordType::Aaaa => ans.aaaa.iter().copied().map(IpAddr::V6).collect(),
            }),
        }
    }
}

/// System resolver via getaddrinfo. The libc interface cannot cleanly
/// separate NXDOMAIN from transport failure, so the gai error text is
/// matched: definite name-not-found strings become empty answers, anything
/// else is `ResolverUnavailable`.
#[derive(Debug, Default)]
pub struct SystemResolver;

impl Resolver for SystemResolver {
    fn lookup(&self, fqdn: &str, record: RecordType) -> Result<Vec<IpAddr>, DiscoveryError> {
        use std::net::ToSocketAddrs;
        match (fqdn, 0u16).to_socket_addrs() {
            Ok(addrs) => Ok(addrs
                .map(|sa| sa.ip())
                .filter(|ip| match record {
                    RecordType::A => ip.is_ipv4(),
                    RecordType::Aaaa => ip.is_ipv6(),
                })
                .collect()),
            Err(e) => {
                let text = e.to_string();
                if text.contains("Name or service not known")
                    || text.contains("No address associated")
                    || text.contains("nodename nor servname provided")
                {
                    Ok(Vec::new())
                } else {
                    Err(DiscoveryError::ResolverUnavailable(text))
                }
            }
        }
    }
}
