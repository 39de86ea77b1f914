//! Auditing toolkit for the IKEv2 phase-1 key exchange of VoWiFi ePDG
//! endpoints.
//!
//! The crate is organized around the audit pipeline:
//!
//! - [`discovery`]: build ePDG FQDNs from operator codes and resolve them,
//! - [`ike_codec`]: bit-exact encode/decode of the SA_INIT message subset,
//! - [`dh_engine`]: MODP Diffie-Hellman and key fingerprinting,
//! - [`scanner`]: per-group capability probes, weak-preference tolerance
//!   tests and key-collection runs over UDP,
//! - [`key_analysis`]: reuse census, coupon-collector confidence, blacklist
//!   matching and cross-group exposure checks,
//! - [`attack_sim`]: deterministic in-process reproduction of the
//!   INVALID_KE downgrade and rekey-takeover attacks,
//! - [`config_audit`]: deprecation audit of client/operator IKEv2 configs,
//! - [`mock`]: a policy-driven mock ePDG fleet speaking real UDP, used as
//!   the test double for every scanner path.

pub mod attack_sim;
pub mod config_audit;
pub mod datafiles;
pub mod dh_engine;
pub mod discovery;
pub mod ike_codec;
pub mod key_analysis;
pub mod mock;
pub mod scanner;
