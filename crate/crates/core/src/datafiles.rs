//! Location of the shipped data files (blacklist, config rule sets, default
//! records, scenarios).
//!
//! `EPDG_AUDIT_DATA` overrides the directory; otherwise `data/` is searched
//! relative to the working directory and, as a development fallback, the
//! workspace root.

use std::path::{Path, PathBuf};

pub const BLACKLIST_FILE: &str = "static_key_blacklist.txt";
pub const DEFAULTS_FILE: &str = "defaults_table2.json";
pub const DEPRECATED_RULES_FILE: &str = "deprecated_table6.json";
pub const SCENARIO_DIR: &str = "scenarios";

/// Resolve the data directory.
pub fn data_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("EPDG_AUDIT_DATA") {
        return PathBuf::from(dir);
    }
    for candidate in ["data", "../data", "../../data"] {
        let p = Path::new(candidate);
        if p.is_dir() {
            return p.to_path_buf();
        }
    }
    // Workspace-root fallback for tests run from a crate directory.
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data"))
}

/// Path of a named data file inside the resolved data directory.
pub fn data_path(name: &str) -> PathBuf {
    data_dir().join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_files_are_present() {
        for name in [BLACKLIST_FILE, DEFAULTS_FILE, DEPRECATED_RULES_FILE] {
            assert!(data_path(name).is_file(), "missing data file {name}");
        }
        for scenario in ["fig7.json", "fig8.json", "full_attack.json"] {
            let p = data_dir().join(SCENARIO_DIR).join(scenario);
            assert!(p.is_file(), "missing scenario {scenario}");
        }
    }
}
