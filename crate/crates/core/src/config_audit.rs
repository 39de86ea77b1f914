//! Deprecation audit of normalized client/operator IKEv2 configuration
//! records, plus aggregate statistics (per-vendor deprecation shares and
//! rekey-timer distributions).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigAuditError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid rule set: {0}")]
    InvalidRules(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    KeyExchange,
    Encryption,
    Prf,
    Integrity,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::KeyExchange,
        Category::Encryption,
        Category::Prf,
        Category::Integrity,
    ];
}

/// An algorithm reference inside a config record: IANA transform id plus an
/// optional display name and key length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmRef {
    pub id: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_bits: Option<u16>,
}

/// One normalized IKEv2 configuration record, as extracted from a client
/// database or written by hand. Absent categories inherit the vendor default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub vendor: String,
    /// `"default"` or an MCC-MNC string.
    pub operator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dh_groups: Option<Vec<u16>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encryption: Option<Vec<AlgorithmRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrity: Option<Vec<AlgorithmRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prf: Option<Vec<AlgorithmRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rekey_soft_s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rekey_hard_s: Option<u64>,
}

impl ConfigRecord {
    /// Deduplicate lists in place and check that the record carries at least
    /// one field.
    pub fn normalize(&mut self) -> Result<(), ConfigAuditError> {
        fn dedup_ids(v: &mut Vec<u16>) {
            let mut seen = Vec::new();
            v.retain(|id| {
                if seen.contains(id) {
                    false
                } else {
                    seen.push(*id);
                    true
                }
            });
        }
        fn dedup_algs(v: &mut Vec<AlgorithmRef>) {
            let mut seen: Vec<(u16, Option<u16>)> = Vec::new();
            v.retain(|a| {
                let key = (a.id, a.key_bits);
                if seen.contains(&key) {
                    false
                } else {
                    seen.push(key);
                    true
                }
            });
        }
        if let Some(v) = &mut self.dh_groups {
            dedup_ids(v);
        }
        for v in [&mut self.encryption, &mut self.integrity, &mut self.prf]
            .into_iter()
            .flatten()
        {
            dedup_algs(v);
        }
        let empty = self.dh_groups.is_none()
            && self.encryption.is_none()
            && self.integrity.is_none()
            && self.prf.is_none()
            && self.rekey_soft_s.is_none()
            && self.rekey_hard_s.is_none();
        if empty {
            return Err(ConfigAuditError::InvalidRecord(format!(
                "record {}/{} carries no fields",
                self.vendor, self.operator
            )));
        }
        Ok(())
    }

    fn has_category(&self, category: Category) -> bool {
        match category {
            Category::KeyExchange => self.dh_groups.is_some(),
            Category::Encryption => self.encryption.is_some(),
            Category::Prf => self.prf.is_some(),
            Category::Integrity => self.integrity.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeprecationRule {
    pub category: Category,
    pub id: u16,
    pub name: String,
}

/// The deprecation taxonomy, loaded from `deprecated_table6.json`.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<DeprecationRule>,
    by_key: HashMap<(Category, u16), String>,
}

impl RuleSet {
    pub fn new(rules: Vec<DeprecationRule>) -> Result<RuleSet, ConfigAuditError> {
        if rules.is_empty() {
            return Err(ConfigAuditError::InvalidRules("empty rule set".into()));
        }
        let by_key = rules
            .iter()
            .map(|r| ((r.category, r.id), r.name.clone()))
            .collect();
        Ok(RuleSet { rules, by_key })
    }

    pub fn from_json(text: &str) -> Result<RuleSet, ConfigAuditError> {
        let rules: Vec<DeprecationRule> = serde_json::from_str(text)
            .map_err(|e| ConfigAuditError::InvalidRules(e.to_string()))?;
        RuleSet::new(rules)
    }

    pub fn rules(&self) -> &[DeprecationRule] {
        &self.rules
    }

    pub fn lookup(&self, category: Category, id: u16) -> Option<&str> {
        self.by_key.get(&(category, id)).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeprecationFlag {
    pub category: Category,
    pub id: u16,
    pub name: String,
}

/// Outcome of auditing one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeprecationReport {
    pub record: ConfigRecord,
    pub flags: Vec<DeprecationFlag>,
    /// Per category present in the record: 1.0 if at least one deprecated
    /// entry was flagged, else 0.0.
    pub deprecated_share_by_category: BTreeMap<Category, f64>,
    /// Categories filled in from the vendor default rather than the record.
    #[serde(default)]
    pub inherited: Vec<Category>,
    /// PRF absent with no default: derived from integrity, not flagged.
    #[serde(default)]
    pub prf_derived: bool,
}

/// Flag every Table-6 entry present in the record.
pub fn audit(record: &ConfigRecord, rules: &RuleSet) -> DeprecationReport {
    audit_inner(record.clone(), rules, Vec::new(), false)
}

fn audit_inner(
    record: ConfigRecord,
    rules: &RuleSet,
    inherited: Vec<Category>,
    prf_derived: bool,
) -> DeprecationReport {
    let mut flags = Vec::new();
    let mut shares = BTreeMap::new();

    let mut check = |category: Category, ids: Vec<u16>| {
        let mut any = false;
        for id in ids {
            if let Some(name) = rules.lookup(category, id) {
                flags.push(DeprecationFlag {
                    category,
                    id,
                    name: name.to_string(),
                });
                any = true;
            }
        }
        shares.insert(category, if any { 1.0 } else { 0.0 });
    };

    if let Some(groups) = &record.dh_groups {
        check(Category::KeyExchange, groups.clone());
    }
    if let Some(list) = &record.encryption {
        check(Category::Encryption, list.iter().map(|a| a.id).collect());
    }
    if let Some(list) = &record.prf {
        check(Category::Prf, list.iter().map(|a| a.id).collect());
    }
    if let Some(list) = &record.integrity {
        check(Category::Integrity, list.iter().map(|a| a.id).collect());
    }

    DeprecationReport {
        record,
        flags,
        deprecated_share_by_category: shares,
        inherited,
        prf_derived,
    }
}

/// Fill missing categories from the vendor's default record, then audit.
/// PRF absent from both the record and the default is recorded as derived
/// (from the integrity algorithms) and not flagged.
pub fn audit_with_defaults(
    record: &ConfigRecord,
    defaults: &[ConfigRecord],
    rules: &RuleSet,
) -> DeprecationReport {
    let default = defaults
        .iter()
        .find(|d| d.vendor == record.vendor && d.operator == "default");
    let mut resolved = record.clone();
    let mut inherited = Vec::new();
    if let Some(default) = default {
        for category in Category::ALL {
            if !resolved.has_category(category) && default.has_category(category) {
                match category {
                    Category::KeyExchange => resolved.dh_groups = default.dh_groups.clone(),
                    Category::Encryption => resolved.encryption = default.encryption.clone(),
                    Category::Prf => resolved.prf = default.prf.clone(),
                    Category::Integrity => resolved.integrity = default.integrity.clone(),
                }
                inherited.push(category);
            }
        }
        if resolved.rekey_soft_s.is_none() {
            resolved.rekey_soft_s = default.rekey_soft_s;
        }
        if resolved.rekey_hard_s.is_none() {
            resolved.rekey_hard_s = default.rekey_hard_s;
        }
    }
    let prf_derived = resolved.prf.is_none();
    audit_inner(resolved, rules, inherited, prf_derived)
}

/// A rekey timer beyond this is reported as an outlier (the distribution
/// otherwise concentrates within a day).
pub const REKEY_OUTLIER_S: u64 = 30 * 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    /// Records with at least one deprecated entry in this category.
    pub flagged: usize,
    /// Records configuring this category at all.
    pub total: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub seconds: u64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RekeyOutlier {
    pub vendor: String,
    pub operator: String,
    pub rekey_hard_s: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RekeySummary {
    pub soft_cdf: Vec<CdfPoint>,
    pub hard_cdf: Vec<CdfPoint>,
    pub outliers: Vec<RekeyOutlier>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateSummary {
    /// vendor -> category -> share of records with >= 1 deprecated entry.
    pub per_vendor: BTreeMap<String, BTreeMap<Category, CategoryShare>>,
    pub rekey: RekeySummary,
}

fn cdf(mut values: Vec<u64>) -> Vec<CdfPoint> {
    values.sort_unstable();
    let n = values.len() as f64;
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let cumulative = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.seconds == *v => last.cumulative = cumulative,
            _ => points.push(CdfPoint {
                seconds: *v,
                cumulative,
            }),
        }
    }
    points
}

/// Per-vendor deprecation shares and rekey-timer distribution over a batch of
/// reports.
pub fn aggregate(reports: &[DeprecationReport]) -> AggregateSummary {
    let mut per_vendor: BTreeMap<String, BTreeMap<Category, (usize, usize)>> = BTreeMap::new();
    let mut soft = Vec::new();
    let mut hard = Vec::new();
    let mut outliers = Vec::new();

    for report in reports {
        let vendor = per_vendor.entry(report.record.vendor.clone()).or_default();
        for category in Category::ALL {
            if let Some(share) = report.deprecated_share_by_category.get(&category) {
                let entry = vendor.entry(category).or_insert((0, 0));
                entry.1 += 1;
                if *share > 0.0 {
                    entry.0 += 1;
                }
            }
        }
        if let Some(s) = report.record.rekey_soft_s {
            soft.push(s);
        }
        if let Some(h) = report.record.rekey_hard_s {
            hard.push(h);
            if h > REKEY_OUTLIER_S {
                outliers.push(RekeyOutlier {
                    vendor: report.record.vendor.clone(),
                    operator: report.record.operator.clone(),
                    rekey_hard_s: h,
                });
            }
        }
    }

    AggregateSummary {
        per_vendor: per_vendor
            .into_iter()
            .map(|(vendor, cats)| {
                (
                    vendor,
                    cats.into_iter()
                        .map(|(c, (flagged, total))| {
                            (
                                c,
                                CategoryShare {
                                    flagged,
                                    total,
                                    share: flagged as f64 / total as f64,
                                },
                            )
                        })
                        .collect(),
                )
            })
            .collect(),
        rekey: RekeySummary {
            soft_cdf: cdf(soft),
            hard_cdf: cdf(hard),
            outliers,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_rules() -> RuleSet {
        let text = std::fs::read_to_string(crate::datafiles::data_path(
            crate::datafiles::DEPRECATED_RULES_FILE,
        ))
        .expect("rule set file");
        RuleSet::from_json(&text).unwrap()
    }

    fn record(vendor: &str, dh: &[u16]) -> ConfigRecord {
        ConfigRecord {
            vendor: vendor.into(),
            operator: "default".into(),
            dh_groups: Some(dh.to_vec()),
            encryption: None,
            integrity: None,
            prf: None,
            rekey_soft_s: None,
            rekey_hard_s: None,
        }
    }

    fn alg(id: u16, name: &str) -> AlgorithmRef {
        AlgorithmRef {
            id,
            name: Some(name.into()),
            key_bits: None,
        }
    }

    #[test]
    fn qualcomm_style_dh_list_flags_2_and_5_only() {
        let rules = test_rules();
        let report = audit(&record("Qualcomm", &[2, 5, 14]), &rules);
        let ke_flags: Vec<u16> = report
            .flags
            .iter()
            .filter(|f| f.category == Category::KeyExchange)
            .map(|f| f.id)
            .collect();
        assert_eq!(ke_flags, vec![2, 5]);
        assert_eq!(report.deprecated_share_by_category[&Category::KeyExchange], 1.0);
    }

    #[test]
    fn modern_record_has_zero_flags() {
        let rules = test_rules();
        let mut rec = record("x", &[14]);
        rec.encryption = Some(vec![AlgorithmRef {
            id: 12,
            name: Some("AES_CBC".into()),
            key_bits: Some(128),
        }]);
        let report = audit(&rec, &rules);
        assert!(report.flags.is_empty());
        assert_eq!(report.deprecated_share_by_category[&Category::KeyExchange], 0.0);
        assert_eq!(report.deprecated_share_by_category[&Category::Encryption], 0.0);
    }

    #[test]
    fn des_and_md5_prf_yield_two_flags() {
        let rules = test_rules();
        let mut rec = record("x", &[14]);
        rec.encryption = Some(vec![alg(2, "DES")]);
        rec.prf = Some(vec![alg(1, "HMAC_MD5")]);
        let report = audit(&rec, &rules);
        assert_eq!(report.flags.len(), 2);
    }

    #[test]
    fn audit_is_order_independent() {
        let rules = test_rules();
        let a = audit(&record("x", &[2, 5, 14]), &rules);
        let b = audit(&record("x", &[14, 5, 2]), &rules);
        let ids = |r: &DeprecationReport| {
            let mut v: Vec<u16> = r.flags.iter().map(|f| f.id).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(ids(&a), ids(&b));
        assert_eq!(
            a.deprecated_share_by_category,
            b.deprecated_share_by_category
        );
    }

    #[test]
    fn every_rule_is_matchable() {
        let rules = test_rules();
        for rule in rules.rules() {
            let mut rec = record("fixture", &[14]);
            match rule.category {
                Category::KeyExchange => rec.dh_groups = Some(vec![rule.id]),
                Category::Encryption => rec.encryption = Some(vec![alg(rule.id, &rule.name)]),
                Category::Prf => rec.prf = Some(vec![alg(rule.id, &rule.name)]),
                Category::Integrity => rec.integrity = Some(vec![alg(rule.id, &rule.name)]),
            }
            let report = audit(&rec, &rules);
            assert!(
                report
                    .flags
                    .iter()
                    .any(|f| f.category == rule.category && f.id == rule.id),
                "rule {:?}/{} not matched",
                rule.category,
                rule.id
            );
        }
    }

    #[test]
    fn missing_category_inherits_vendor_default() {
        let rules = test_rules();
        let defaults_text = std::fs::read_to_string(crate::datafiles::data_path(
            crate::datafiles::DEFAULTS_FILE,
        ))
        .unwrap();
        let defaults: Vec<ConfigRecord> = serde_json::from_str(&defaults_text).unwrap();
        // Operator record with only a rekey timer set, on Samsung: inherits
        // DH2 default and gets a KE flag.
        let rec = ConfigRecord {
            vendor: "Samsung".into(),
            operator: "232-05".into(),
            dh_groups: None,
            encryption: None,
            integrity: None,
            prf: None,
            rekey_soft_s: None,
            rekey_hard_s: Some(86_400),
        };
        let report = audit_with_defaults(&rec, &defaults, &rules);
        assert!(report.inherited.contains(&Category::KeyExchange));
        assert!(report
            .flags
            .iter()
            .any(|f| f.category == Category::KeyExchange && f.id == 2));
        // Samsung ships no default PRF: derived, not flagged.
        assert!(report.prf_derived);
        assert!(!report.flags.iter().any(|f| f.category == Category::Prf));
    }

    #[test]
    fn aggregate_share_and_single_record_degeneracy() {
        let rules = test_rules();
        let mut reports = Vec::new();
        for i in 0..100 {
            let dh = if i < 83 { vec![2u16, 14] } else { vec![14u16] };
            reports.push(audit(&record("Oppo", &dh), &rules));
        }
        let summary = aggregate(&reports);
        let share = &summary.per_vendor["Oppo"][&Category::KeyExchange];
        assert_eq!(share.flagged, 83);
        assert_eq!(share.total, 100);
        assert!((share.share - 0.83).abs() < f64::EPSILON);

        let single = aggregate(&reports[..1]);
        for s in single.per_vendor["Oppo"].values() {
            assert!(s.share == 0.0 || s.share == 1.0);
        }
    }

    #[test]
    fn aggregate_empty_input_is_empty() {
        let summary = aggregate(&[]);
        assert!(summary.per_vendor.is_empty());
        assert!(summary.rekey.hard_cdf.is_empty());
    }

    #[test]
    fn year_long_rekey_is_an_outlier() {
        let rules = test_rules();
        let mut rec = record("Samsung", &[14]);
        rec.operator = "216-01".into();
        rec.rekey_hard_s = Some(31_536_000);
        let summary = aggregate(&[audit(&rec, &rules)]);
        assert_eq!(summary.rekey.outliers.len(), 1);
        assert_eq!(summary.rekey.outliers[0].rekey_hard_s, 31_536_000);
        // A day-scale timer is not.
        let mut rec2 = record("Samsung", &[14]);
        rec2.rekey_hard_s = Some(86_400);
        assert!(aggregate(&[audit(&rec2, &rules)]).rekey.outliers.is_empty());
    }

    #[test]
    fn normalize_dedups_and_rejects_empty() {
        let mut rec = record("x", &[2, 2, 14]);
        rec.normalize().unwrap();
        assert_eq!(rec.dh_groups.as_deref(), Some(&[2u16, 14][..]));
        let mut empty = ConfigRecord {
            vendor: "x".into(),
            operator: "default".into(),
            dh_groups: None,
            encryption: None,
            integrity: None,
            prf: None,
            rekey_soft_s: None,
            rekey_hard_s: None,
        };
        assert!(empty.normalize().is_err());
    }

    #[test]
    fn cdf_points_are_cumulative() {
        let points = cdf(vec![7200, 14400, 7200, 86400]);
        assert_eq!(points.len(), 3);
        assert_eq!(points[0].seconds, 7200);
        assert!((points[0].cumulative - 0.5).abs() < 1e-12);
        assert!((points[2].cumulative - 1.0).abs() < 1e-12);
    }
}
