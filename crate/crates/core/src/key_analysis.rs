//! Reuse analytics over collected key observations: intra-operator key and
//! nonce reuse, inter-operator static key sharing, blacklist matching,
//! coupon-collector coverage confidence and cross-group exposure evidence.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::net::IpAddr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dh_engine::{self, DhGroup};
use crate::discovery::PlmnId;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("malformed blacklist at line {line}: {detail}")]
    MalformedBlacklist { line: usize, detail: String },
}

/// One observed server public key + nonce, the unit of reuse analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyObservation {
    pub operator: PlmnId,
    pub endpoint: IpAddr,
    pub group: u16,
    /// SHA-256 of the padded public value, 64 lowercase hex chars.
    pub pubkey_fp: String,
    /// SHA-256 of the server nonce octets.
    pub nonce_fp: String,
    /// ISO-8601 UTC.
    pub observed_at: String,
}

pub fn is_valid_fingerprint(fp: &str) -> bool {
    fp.len() == 64 && fp.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReuseScope {
    Intra,
    Inter,
}

/// Census of key and nonce reuse over a batch of observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseReport {
    pub scope: ReuseScope,
    pub groups: BTreeSet<u16>,
    /// Distinct public-key fingerprints over the whole batch.
    pub distinct_keys: usize,
    pub total_obs: usize,
    /// Distinct key count per operator and group.
    pub per_operator: BTreeMap<String, BTreeMap<u16, usize>>,
    /// Every fingerprint seen at two or more operators, with the operators
    /// serving it.
    pub sharing_matrix: BTreeMap<String, BTreeSet<String>>,
    /// Repeated nonce fingerprints within one operator.
    pub nonce_reuse_events: usize,
}

/// Count distinct keys, cross-operator sharing and nonce repeats. Permutation
/// invariant over the input.
pub fn census(observations: &[KeyObservation]) -> ReuseReport {
    let mut groups = BTreeSet::new();
    let mut all_keys: HashSet<&str> = HashSet::new();
    let mut per_operator_keys: HashMap<(String, u16), HashSet<&str>> = HashMap::new();
    let mut key_operators: HashMap<&str, BTreeSet<String>> = HashMap::new();
    let mut nonce_counts: HashMap<(String, &str), usize> = HashMap::new();
    let mut operators = BTreeSet::new();

    for obs in observations {
        let op = obs.operator.to_string();
        operators.insert(op.clone());
        groups.insert(obs.group);
        all_keys.insert(&obs.pubkey_fp);
        per_operator_keys
            .entry((op.clone(), obs.group))
            .or_default()
            .insert(&obs.pubkey_fp);
        key_operators
            .entry(&obs.pubkey_fp)
            .or_default()
            .insert(op.clone());
        *nonce_counts.entry((op, &obs.nonce_fp)).or_default() += 1;
    }

    let mut per_operator: BTreeMap<String, BTreeMap<u16, usize>> = BTreeMap::new();
    for ((op, group), keys) in per_operator_keys {
        per_operator.entry(op).or_default().insert(group, keys.len());
    }
    let sharing_matrix: BTreeMap<String, BTreeSet<String>> = key_operators
        .into_iter()
        .filter(|(_, ops)| ops.len() >= 2)
        .map(|(fp, ops)| (fp.to_string(), ops))
        .collect();
    let nonce_reuse_events = nonce_counts.values().map(|c| c.saturating_sub(1)).sum();

    ReuseReport {
        scope: if operators.len() >= 2 {
            ReuseScope::Inter
        } else {
            ReuseScope::Intra
        },
        groups,
        distinct_keys: all_keys.len(),
        total_obs: observations.len(),
        per_operator,
        sharing_matrix,
        nonce_reuse_events,
    }
}

/// Probability that uniform draws over exactly `distinct_seen` keys would
/// show all of them within `draws` draws (coupon-collector completeness),
/// by inclusion-exclusion:
///
/// P = sum_{i=0..k} (-1)^i C(k,i) ((k-i)/k)^n
pub fn coverage_confidence(distinct_seen: u64, draws: u64) -> Result<f64, AnalysisError> {
    if distinct_seen == 0 {
        return Err(AnalysisError::DomainError(
            "distinct_seen must be >= 1".into(),
        ));
    }
    if draws < distinct_seen {
        return Err(AnalysisError::DomainError(format!(
            "draws {draws} < distinct_seen {distinct_seen}"
        )));
    }
    let k = distinct_seen as f64;
    let n = draws as i32;
    let mut sum = 0.0f64;
    let mut binom = 1.0f64; // C(k, i), updated multiplicatively
    for i in 0..=distinct_seen {
        let term = binom * ((k - i as f64) / k).powi(n);
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        binom = binom * (k - i as f64) / (i as f64 + 1.0);
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Optional PLMN alias map: one operator can hold several MCC-MNC
/// designations (mergers, shared infrastructure). By default every PlmnId
/// counts as its own operator; an alias file merges them.
///
/// File format: one `<plmn> <canonical-plmn>` pair per line, `#` comments
/// allowed.
pub fn parse_aliases(text: &str) -> Result<BTreeMap<PlmnId, PlmnId>, AnalysisError> {
    let mut aliases = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(from), Some(to), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(AnalysisError::MalformedBlacklist {
                line: idx + 1,
                detail: "expected `<plmn> <canonical-plmn>`".into(),
            });
        };
        let from: PlmnId = from.parse().map_err(|e| AnalysisError::MalformedBlacklist {
            line: idx + 1,
            detail: format!("{e}"),
        })?;
        let to: PlmnId = to.parse().map_err(|e| AnalysisError::MalformedBlacklist {
            line: idx + 1,
            detail: format!("{e}"),
        })?;
        aliases.insert(from, to);
    }
    Ok(aliases)
}

/// Rewrite observation operators through the alias map.
pub fn canonicalize_operators(
    observations: &mut [KeyObservation],
    aliases: &BTreeMap<PlmnId, PlmnId>,
) {
    for obs in observations {
        if let Some(canonical) = aliases.get(&obs.operator) {
            obs.operator = canonical.clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlacklistEntry {
    pub group: u16,
    pub digest: String,
}

/// Parse the blacklist format: one `<group-code> <64-hex-char sha256>` per
/// line; blank lines and `#` comments allowed.
pub fn parse_blacklist(text: &str) -> Result<Vec<BlacklistEntry>, AnalysisError> {
    let mut entries = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (group, digest) = match (parts.next(), parts.next(), parts.next()) {
            (Some(g), Some(d), None) => (g, d),
            _ => {
                return Err(AnalysisError::MalformedBlacklist {
                    line: idx + 1,
                    detail: "expected `<group> <sha256>`".into(),
                })
            }
        };
        let group: u16 = group.parse().map_err(|_| AnalysisError::MalformedBlacklist {
            line: idx + 1,
            detail: format!("bad group code {group:?}"),
        })?;
        let digest = digest.to_ascii_lowercase();
        if !is_valid_fingerprint(&digest) {
            return Err(AnalysisError::MalformedBlacklist {
                line: idx + 1,
                detail: "digest is not 64 hex chars".into(),
            });
        }
        entries.push(BlacklistEntry { group, digest });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlacklistMatch {
    pub operator: PlmnId,
    pub endpoint: IpAddr,
    pub group: u16,
    pub pubkey_fp: String,
    pub observed_at: String,
}

/// Return every observation whose (group, fingerprint) appears in the
/// blacklist.
pub fn match_blacklist(
    observations: &[KeyObservation],
    blacklist: &[BlacklistEntry],
) -> Vec<BlacklistMatch> {
    let set: HashSet<(u16, &str)> = blacklist
        .iter()
        .map(|e| (e.group, e.digest.as_str()))
        .collect();
    observations
        .iter()
        .filter(|o| set.contains(&(o.group, o.pubkey_fp.as_str())))
        .map(|o| BlacklistMatch {
            operator: o.operator.clone(),
            endpoint: o.endpoint,
            group: o.group,
            pubkey_fp: o.pubkey_fp.clone(),
            observed_at: o.observed_at.clone(),
        })
        .collect()
}

/// Evidence that an operator shares private exponents across DH groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExposureEvidence {
    /// Simulation mode: a known exponent reproduces observed public values
    /// in two or more groups.
    SharedExponent {
        operator: String,
        exponent_index: usize,
        groups: BTreeSet<u16>,
    },
    /// Real-target mode: only the fingerprint-set cardinality per group can
    /// be reported; no exponent claims.
    Circumstantial {
        operator: String,
        distinct_per_group: BTreeMap<u16, usize>,
    },
}

/// Check for exponent sharing across groups, per operator with observations
/// from two or more groups.
///
/// With `known_exponents` (mock fleets disclose theirs), each candidate
/// exponent's public value is recomputed per group and matched against the
/// observed fingerprints. Without them the evidence is circumstantial only.
pub fn cross_group_exposure(
    observations: &[KeyObservation],
    known_exponents: Option<&[BigUint]>,
) -> Vec<ExposureEvidence> {
    let mut per_op_group_fps: BTreeMap<String, BTreeMap<u16, BTreeSet<&str>>> = BTreeMap::new();
    for obs in observations {
        per_op_group_fps
            .entry(obs.operator.to_string())
            .or_default()
            .entry(obs.group)
            .or_default()
            .insert(&obs.pubkey_fp);
    }

    let mut evidence = Vec::new();
    for (operator, groups) in &per_op_group_fps {
        if groups.len() < 2 {
            continue;
        }
        match known_exponents {
            Some(exponents) => {
                for (idx, exponent) in exponents.iter().enumerate() {
                    let mut covered = BTreeSet::new();
                    for (&group_id, fps) in groups {
                        let Ok(group) = dh_engine::group_params(group_id) else {
                            continue;
                        };
                        let Some(fp) = exponent_fingerprint(group, exponent) else {
                            continue;
                        };
                        if fps.contains(fp.as_str()) {
                            covered.insert(group_id);
                        }
                    }
                    if covered.len() >= 2 {
                        evidence.push(ExposureEvidence::SharedExponent {
                            operator: operator.clone(),
                            exponent_index: idx,
                            groups: covered,
                        });
                    }
                }
            }
            None => {
                evidence.push(ExposureEvidence::Circumstantial {
                    operator: operator.clone(),
                    distinct_per_group: groups
                        .iter()
                        .map(|(&g, fps)| (g, fps.len()))
                        .collect(),
                });
            }
        }
    }
    evidence
}

fn exponent_fingerprint(group: &DhGroup, exponent: &BigUint) -> Option<String> {
    let kp = dh_engine::keypair_from_exponent(group, exponent.clone()).ok()?;
    dh_engine::pubkey_fingerprint(&kp.public, group).ok()
}
