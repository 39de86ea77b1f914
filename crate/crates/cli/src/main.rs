//! `epdg-audit`: discover ePDG endpoints, probe their IKEv2 key exchange,
//! analyze collected keys, audit configuration records and simulate the
//! downgrade/takeover attacks against a mock fleet.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use epdg_audit::attack_sim;
use epdg_audit::config_audit::{self, ConfigRecord, RuleSet};
use epdg_audit::datafiles;
use epdg_audit::discovery::{
    self, EpdgTarget, PlmnId, PlmnRange, Resolver, StubResolver, SystemResolver,
};
use epdg_audit::ike_codec;
use epdg_audit::key_analysis::{self, KeyObservation};
use epdg_audit::mock::{MockFleet, MockFleetSpec};
use epdg_audit::scanner::{self, ProbeConfig, ProbeOutcome, ToleranceResult};

const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn jsonl_line<T: Serialize>(body: &T) -> Result<String> {
    Ok(serde_json::to_string(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })?)
}

#[derive(Parser)]
#[command(
    name = "epdg-audit",
    version,
    about = "Audit the IKEv2 phase-1 key exchange of VoWiFi ePDG endpoints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Deterministic seed for client SPIs, nonces and keys.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Per-attempt silence threshold.
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
    /// Pause between probes against the same target.
    #[arg(long, global = true)]
    delay_ms: Option<u64>,
    /// Confirm authorization to probe targets outside loopback/private
    /// ranges.
    #[arg(long = "i-am-authorized", global = true)]
    i_am_authorized: bool,
    /// Write results here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// Fixed ISO-8601 timestamp stamped into emitted records (hermetic
    /// runs).
    #[arg(long, global = true)]
    fixed_now: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate PLMN codes, build ePDG FQDNs and resolve them.
    Discover {
        /// MCC or MCC range, e.g. `232` or `200-799`.
        #[arg(long)]
        mcc: Option<String>,
        /// MNC or MNC range, e.g. `05` or `00-10`; digit count fixes the
        /// rendered width.
        #[arg(long)]
        mnc: Option<String>,
        /// File of `mcc,mnc` or `mcc-mnc` lines.
        #[arg(long)]
        plmn_file: Option<PathBuf>,
        /// Stub-resolver fixture (JSON) instead of the system resolver.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Probe targets: per-group survey, weak-preference tolerance or key
    /// collection.
    Scan {
        /// Targets JSONL produced by `discover` or `mock-fleet`.
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, value_enum, default_value = "survey")]
        mode: ScanMode,
        /// Comma-separated group codes for survey mode.
        #[arg(long)]
        groups: Option<String>,
        /// Group for collect-keys mode.
        #[arg(long, default_value_t = 2)]
        group: u16,
        /// Handshake count per target for collect-keys mode.
        #[arg(long, default_value_t = 500)]
        count: usize,
        /// Re-sends after silence.
        #[arg(long, default_value_t = 1)]
        retries: u32,
        /// Destination port when a target does not carry one.
        #[arg(long, default_value_t = 500)]
        port: u16,
        /// Frame datagrams with the 4-octet non-ESP marker (port 4500).
        #[arg(long)]
        non_esp_marker: bool,
        /// Directory for raw request/response hex dumps.
        #[arg(long)]
        capture: Option<PathBuf>,
        /// Concurrent targets.
        #[arg(long, default_value_t = 8)]
        workers: usize,
        /// Exit 3 if any target stays unreachable.
        #[arg(long)]
        strict: bool,
    },
    /// Census, blacklist matching and cross-group exposure over collected
    /// key observations.
    Analyze {
        /// KeyObservation JSONL from `scan --mode collect-keys`.
        #[arg(long)]
        observations: PathBuf,
        /// Blacklist file; defaults to the shipped static-key list.
        #[arg(long)]
        blacklist: Option<PathBuf>,
        /// Known private exponents (hex, one per line) for exponent-sharing
        /// verification against mock fleets.
        #[arg(long)]
        exponents: Option<PathBuf>,
        /// Alias file merging PLMN designations into one operator
        /// (`<plmn> <canonical-plmn>` per line).
        #[arg(long)]
        aliases: Option<PathBuf>,
    },
    /// Flag deprecated parameters in normalized IKEv2 config records.
    AuditConfig {
        /// JSON array of config records.
        #[arg(long)]
        records: PathBuf,
        /// Vendor default records; defaults to the shipped table.
        #[arg(long)]
        defaults: Option<PathBuf>,
        /// Deprecation rule set; defaults to the shipped table.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Audit records as-is without inheriting vendor defaults.
        #[arg(long)]
        no_defaults: bool,
    },
    /// Run an attack scenario and emit the transcript.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Also print the message sequence to stderr.
        #[arg(long)]
        render: bool,
    },
    /// Serve a mock ePDG fleet over UDP until interrupted.
    MockFleet {
        #[arg(long)]
        spec: PathBuf,
        /// Also write the fleet's probe targets as JSONL.
        #[arg(long)]
        targets_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScanMode {
    Survey,
    Tolerance,
    CollectKeys,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Discover {
            ref mcc,
            ref mnc,
            ref plmn_file,
            ref fixture,
        } => cmd_discover(&cli, mcc.as_deref(), mnc.as_deref(), plmn_file.as_deref(), fixture.as_deref()),
        Command::Scan {
            ref targets,
            mode,
            ref groups,
            group,
            count,
            retries,
            port,
            non_esp_marker,
            ref capture,
            workers,
            strict,
        } => cmd_scan(
            &cli,
            targets,
            mode,
            groups.as_deref(),
            group,
            count,
            retries,
            port,
            non_esp_marker,
            capture.as_deref(),
            workers,
            strict,
        ),
        Command::Analyze {
            ref observations,
            ref blacklist,
            ref exponents,
            ref aliases,
        } => cmd_analyze(
            &cli,
            observations,
            blacklist.as_deref(),
            exponents.as_deref(),
            aliases.as_deref(),
        ),
        Command::AuditConfig {
            ref records,
            ref defaults,
            ref rules,
            no_defaults,
        } => cmd_audit_config(&cli, records, defaults.as_deref(), rules.as_deref(), no_defaults),
        Command::Simulate { ref scenario, render } => cmd_simulate(&cli, scenario, render),
        Command::MockFleet {
            ref spec,
            ref targets_out,
        } => cmd_mock_fleet(&cli, spec, targets_out.as_deref()),
    }
}

fn write_output(output: Option<&Path>, content: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn now_or_fixed(cli: &Cli) -> String {
    cli.fixed_now.clone().unwrap_or_else(scanner::now_iso)
}

// --- discover ---

fn parse_plmn_file(path: &Path) -> Result<Vec<PlmnId>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut plmns = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let plmn: PlmnId = line
            .parse()
            .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        plmns.push(plmn);
    }
    Ok(plmns)
}

fn cmd_discover(
    cli: &Cli,
    mcc: Option<&str>,
    mnc: Option<&str>,
    plmn_file: Option<&Path>,
    fixture: Option<&Path>,
) -> Result<ExitCode> {
    let mut plmns = Vec::new();
    match (mcc, mnc) {
        (Some(mcc), Some(mnc)) => {
            plmns.extend(discovery::enumerate_plmns(&[PlmnRange::parse(mcc, mnc)?]));
        }
        (None, None) => {}
        _ => bail!("--mcc and --mnc must be given together"),
    }
    if let Some(file) = plmn_file {
        plmns.extend(parse_plmn_file(file)?);
    }
    if plmns.is_empty() {
        bail!("nothing to discover: give --mcc/--mnc or --plmn-file");
    }
    plmns.sort();
    plmns.dedup();

    let resolver: Box<dyn Resolver> = match fixture {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Box::new(StubResolver::from_json(&text)?)
        }
        None => Box::new(SystemResolver),
    };

    let mut lines = String::new();
    let mut published = 0usize;
    for plmn in &plmns {
        match discovery::resolve(plmn, resolver.as_ref(), now_or_fixed(cli)) {
            Ok(target) => {
                if !target.addresses.is_empty() {
                    published += 1;
                }
                lines.push_str(&jsonl_line(&target)?);
                lines.push('\n');
            }
            Err(e) => {
                eprintln!("resolver failure at {}: {e}", plmn.epdg_fqdn());
                return Ok(ExitCode::from(2));
            }
        }
    }
    write_output(cli.output.as_deref(), &lines)?;
    eprintln!(
        "queried {} names, {} published ePDG records",
        plmns.len(),
        published
    );
    Ok(ExitCode::SUCCESS)
}

// --- scan ---

fn read_targets(path: &Path) -> Result<Vec<EpdgTarget>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut targets = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let target: EpdgTarget = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        targets.push(target);
    }
    Ok(targets)
}

fn enforce_target_safety(targets: &[EpdgTarget], authorized: bool) -> Result<()> {
    if authorized {
        return Ok(());
    }
    for target in targets {
        for addr in &target.addresses {
            if !scanner::is_safe_target(addr) {
                bail!(
                    "{} resolves to public address {addr}; probing production \
                     infrastructure requires --i-am-authorized",
                    target.fqdn
                );
            }
        }
    }
    Ok(())
}

fn probe_config(cli: &Cli, retries: u32, port: u16, non_esp_marker: bool, capture: bool) -> ProbeConfig {
    ProbeConfig {
        timeout_ms: cli.timeout_ms.unwrap_or(5_000),
        retries,
        inter_probe_delay_ms: cli.delay_ms.unwrap_or(500),
        port,
        non_esp_marker,
        capture,
        seed: cli.seed,
        now_iso: cli.fixed_now.clone(),
    }
}

fn parse_groups(spec: Option<&str>) -> Result<Vec<u16>> {
    match spec {
        None => Ok(vec![1, 2, 5, 14, 15, 16, 17, 18, 19, 20, 21, 25, 26, 31]),
        Some(s) => s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u16>()
                    .with_context(|| format!("bad group code {p:?}"))
            })
            .collect(),
    }
}

fn outcome_unreached(outcome: &ProbeOutcome) -> bool {
    matches!(
        outcome,
        ProbeOutcome::Ignored { .. } | ProbeOutcome::TransportError { .. }
    )
}

fn support_count_table(per_group_counts: &BTreeMap<u16, usize>, total: usize) -> String {
    let mut out = String::from("supported key exchange methods across responding targets:\n");
    for (&group, &count) in per_group_counts {
        let bits = ike_codec::group_bits(group).unwrap_or(0);
        let pct = if total > 0 {
            100.0 * count as f64 / total as f64
        } else {
            0.0
        };
        out.push_str(&format!(
            "  DH{group:<3} {bits:>5} bit  {count:>5} ({pct:.1}%)\n"
        ));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_scan(
    cli: &Cli,
    targets_path: &Path,
    mode: ScanMode,
    groups: Option<&str>,
    group: u16,
    count: usize,
    retries: u32,
    port: u16,
    non_esp_marker: bool,
    capture: Option<&Path>,
    workers: usize,
    strict: bool,
) -> Result<ExitCode> {
    let targets = read_targets(targets_path)?;
    if targets.is_empty() {
        bail!("no targets in {}", targets_path.display());
    }
    enforce_target_safety(&targets, cli.i_am_authorized)?;
    if let Some(dir) = capture {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
    }
    let cfg = probe_config(cli, retries, port, non_esp_marker, capture.is_some());

    let mut lines = String::new();
    let mut any_unreachable = false;

    match mode {
        ScanMode::Survey => {
            let group_list = parse_groups(groups)?;
            let results = scanner::for_each_target_parallel(&targets, workers, |target| {
                scanner::survey_with_captures(target, &group_list, &cfg)
            });
            let mut counts: BTreeMap<u16, usize> =
                group_list.iter().map(|&g| (g, 0)).collect();
            for (result, captures) in &results {
                for (&g, outcome) in &result.per_group {
                    if outcome.is_accepted() {
                        *counts.entry(g).or_default() += 1;
                    }
                }
                if result.per_group.values().all(outcome_unreached) {
                    any_unreachable = true;
                }
                if let Some(dir) = capture {
                    write_captures(dir, &result.target.plmn, captures)?;
                }
                lines.push_str(&jsonl_line(result)?);
                lines.push('\n');
            }
            eprint!("{}", support_count_table(&counts, targets.len()));
        }
        ScanMode::Tolerance => {
            let offered = epdg_audit::dh_engine::MODP_GROUP_IDS.to_vec();
            let results = scanner::for_each_target_parallel(&targets, workers, |target| {
                scanner::probe_offer(target, &offered, scanner::TOLERANCE_PROBE_GROUP, &cfg)
            });
            let mut tally: BTreeMap<String, usize> = BTreeMap::new();
            for (target, run) in targets.iter().zip(&results) {
                let result = scanner::tolerance_from_outcome(&run.outcome);
                if outcome_unreached(&run.outcome) {
                    any_unreachable = true;
                }
                if let (Some(dir), Some(cap)) = (capture, &run.capture) {
                    write_captures(dir, &target.plmn, &[(scanner::TOLERANCE_PROBE_GROUP, cap.clone())])?;
                }
                *tally.entry(tolerance_label(&result)).or_default() += 1;
                let record = ToleranceRecord {
                    plmn: target.plmn.clone(),
                    fqdn: target.fqdn.clone(),
                    result,
                };
                lines.push_str(&jsonl_line(&record)?);
                lines.push('\n');
            }
            let total = results.len();
            eprintln!("weak-preference tolerance across {total} targets:");
            for (label, n) in &tally {
                eprintln!("  {label:<24} {n:>5} ({:.2})", *n as f64 / total as f64);
            }
        }
        ScanMode::CollectKeys => {
            let results = scanner::for_each_target_parallel(&targets, workers, |target| {
                scanner::collect_keys(target, group, count, &cfg)
            });
            let mut total_obs = 0usize;
            let mut total_gaps = 0usize;
            for (target, collection) in targets.iter().zip(results) {
                let collection = collection?;
                if collection.observations.is_empty() && count > 0 {
                    any_unreachable = true;
                }
                total_obs += collection.observations.len();
                total_gaps += collection.gaps.len();
                for obs in &collection.observations {
                    lines.push_str(&jsonl_line(obs)?);
                    lines.push('\n');
                }
                if !collection.gaps.is_empty() {
                    eprintln!(
                        "{}: {} of {} attempts yielded no key",
                        target.plmn,
                        collection.gaps.len(),
                        count
                    );
                }
            }
            eprintln!(
                "collected {total_obs} observations ({total_gaps} gaps) from {} targets",
                targets.len()
            );
        }
    }

    write_output(cli.output.as_deref(), &lines)?;
    if strict && any_unreachable {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ToleranceRecord {
    plmn: PlmnId,
    fqdn: String,
    result: ToleranceResult,
}

fn tolerance_label(result: &ToleranceResult) -> String {
    match result {
        ToleranceResult::Tolerated => "tolerated".into(),
        ToleranceResult::UpgradeRequested { group } => format!("upgrade_requested(DH{group})"),
        ToleranceResult::DowngradeIndicated { group } => format!("downgrade_indicated(DH{group})"),
        ToleranceResult::Error => "error".into(),
    }
}

fn write_captures(
    dir: &Path,
    plmn: &PlmnId,
    captures: &[(u16, scanner::RawCapture)],
) -> Result<()> {
    for (group, capture) in captures {
        let path = dir.join(format!("{plmn}_dh{group}.hex"));
        let mut text = format!("# probe {plmn} group {group}\n{}\n", capture.request_hex);
        if let Some(resp) = &capture.response_hex {
            text.push_str(resp);
            text.push('\n');
        }
        std::fs::write(&path, text)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

// --- analyze ---

#[derive(Serialize)]
struct AnalysisOutput {
    schema_version: u32,
    report: key_analysis::ReuseReport,
    blacklist_matches: Vec<key_analysis::BlacklistMatch>,
    cross_group: Vec<key_analysis::ExposureEvidence>,
    /// Coupon-collector plausibility that the observed pool is complete,
    /// per (operator, group) with repeated draws.
    coverage_confidence: BTreeMap<String, f64>,
}

fn cmd_analyze(
    cli: &Cli,
    observations_path: &Path,
    blacklist: Option<&Path>,
    exponents: Option<&Path>,
    aliases: Option<&Path>,
) -> Result<ExitCode> {
    let text = std::fs::read_to_string(observations_path)
        .with_context(|| format!("reading {}", observations_path.display()))?;
    let mut observations = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let obs: KeyObservation = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", observations_path.display(), idx + 1))?;
        if !key_analysis::is_valid_fingerprint(&obs.pubkey_fp) {
            bail!(
                "{}:{}: pubkey_fp is not 64 lowercase hex chars",
                observations_path.display(),
                idx + 1
            );
        }
        observations.push(obs);
    }

    if let Some(path) = aliases {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let map = key_analysis::parse_aliases(&text)?;
        key_analysis::canonicalize_operators(&mut observations, &map);
    }

    let report = key_analysis::census(&observations);

    let blacklist_path = blacklist
        .map(Path::to_path_buf)
        .unwrap_or_else(|| datafiles::data_path(datafiles::BLACKLIST_FILE));
    let blacklist_text = std::fs::read_to_string(&blacklist_path)
        .with_context(|| format!("reading {}", blacklist_path.display()))?;
    let entries = key_analysis::parse_blacklist(&blacklist_text)?;
    let blacklist_matches = key_analysis::match_blacklist(&observations, &entries);

    let known_exponents = match exponents {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut values = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let bytes = hex::decode(line).context("exponent lines must be hex")?;
                values.push(num_bigint::BigUint::from_bytes_be(&bytes));
            }
            Some(values)
        }
        None => None,
    };
    let cross_group = key_analysis::cross_group_exposure(&observations, known_exponents.as_deref());

    // Completeness confidence per (operator, group) with draws >= distinct.
    let mut draws: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for obs in &observations {
        let key = format!("{}/DH{}", obs.operator, obs.group);
        draws.entry(key).or_insert((0, 0)).0 += 1;
    }
    for (key, (_, distinct)) in draws.iter_mut() {
        let (op, grp) = key.split_once("/DH").unwrap();
        let group: u16 = grp.parse().unwrap();
        let set: std::collections::HashSet<&str> = observations
            .iter()
            .filter(|o| o.operator.to_string() == op && o.group == group)
            .map(|o| o.pubkey_fp.as_str())
            .collect();
        *distinct = set.len() as u64;
    }
    let coverage_confidence: BTreeMap<String, f64> = draws
        .into_iter()
        .filter(|(_, (n, k))| *k >= 1 && n >= k)
        .map(|(key, (n, k))| {
            (
                key,
                key_analysis::coverage_confidence(k, n).unwrap_or(0.0),
            )
        })
        .collect();

    eprintln!(
        "{} observations, {} distinct keys, {} shared across operators, {} nonce reuse events, {} blacklist matches",
        report.total_obs,
        report.distinct_keys,
        report.sharing_matrix.len(),
        report.nonce_reuse_events,
        blacklist_matches.len()
    );

    let output = AnalysisOutput {
        schema_version: SCHEMA_VERSION,
        report,
        blacklist_matches,
        cross_group,
        coverage_confidence,
    };
    write_output(
        cli.output.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&output)?),
    )?;
    Ok(ExitCode::SUCCESS)
}

// --- audit-config ---

#[derive(Serialize)]
struct AuditOutput {
    schema_version: u32,
    reports: Vec<config_audit::DeprecationReport>,
    summary: config_audit::AggregateSummary,
}

fn cmd_audit_config(
    cli: &Cli,
    records_path: &Path,
    defaults: Option<&Path>,
    rules: Option<&Path>,
    no_defaults: bool,
) -> Result<ExitCode> {
    let rules_path = rules
        .map(Path::to_path_buf)
        .unwrap_or_else(|| datafiles::data_path(datafiles::DEPRECATED_RULES_FILE));
    let rules = RuleSet::from_json(
        &std::fs::read_to_string(&rules_path)
            .with_context(|| format!("reading {}", rules_path.display()))?,
    )?;

    let defaults_path = defaults
        .map(Path::to_path_buf)
        .unwrap_or_else(|| datafiles::data_path(datafiles::DEFAULTS_FILE));
    let default_records: Vec<ConfigRecord> = serde_json::from_str(
        &std::fs::read_to_string(&defaults_path)
            .with_context(|| format!("reading {}", defaults_path.display()))?,
    )?;

    let mut records: Vec<ConfigRecord> = serde_json::from_str(
        &std::fs::read_to_string(records_path)
            .with_context(|| format!("reading {}", records_path.display()))?,
    )?;
    for record in &mut records {
        record.normalize()?;
    }

    let reports: Vec<config_audit::DeprecationReport> = records
        .iter()
        .map(|r| {
            if no_defaults {
                config_audit::audit(r, &rules)
            } else {
                config_audit::audit_with_defaults(r, &default_records, &rules)
            }
        })
        .collect();
    let summary = config_audit::aggregate(&reports);

    for (vendor, categories) in &summary.per_vendor {
        let shares: Vec<String> = categories
            .iter()
            .map(|(c, s)| format!("{c:?} {:.0}%", s.share * 100.0))
            .collect();
        eprintln!("{vendor}: {}", shares.join(", "));
    }
    if !summary.rekey.outliers.is_empty() {
        eprintln!("rekey outliers: {}", summary.rekey.outliers.len());
    }

    let output = AuditOutput {
        schema_version: SCHEMA_VERSION,
        reports,
        summary,
    };
    write_output(
        cli.output.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&output)?),
    )?;
    Ok(ExitCode::SUCCESS)
}

// --- simulate ---

fn cmd_simulate(cli: &Cli, scenario_path: &Path, render: bool) -> Result<ExitCode> {
    let scenario: attack_sim::Scenario = serde_json::from_str(
        &std::fs::read_to_string(scenario_path)
            .with_context(|| format!("reading {}", scenario_path.display()))?,
    )?;
    let mut scenario = scenario;
    if let Some(seed) = cli.seed {
        scenario.seed = Some(seed);
    }
    let transcript = attack_sim::run_scenario(&scenario)?;
    if render {
        eprint!("{}", attack_sim::render_sequence(&transcript));
    }
    #[derive(Serialize)]
    struct TranscriptOutput<'a> {
        schema_version: u32,
        scenario: &'a str,
        #[serde(flatten)]
        transcript: &'a attack_sim::Transcript,
    }
    write_output(
        cli.output.as_deref(),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&TranscriptOutput {
                schema_version: SCHEMA_VERSION,
                scenario: &scenario.name,
                transcript: &transcript,
            })?
        ),
    )?;
    Ok(ExitCode::SUCCESS)
}

// --- mock-fleet ---

fn cmd_mock_fleet(cli: &Cli, spec_path: &Path, targets_out: Option<&Path>) -> Result<ExitCode> {
    let mut spec: MockFleetSpec = serde_json::from_str(
        &std::fs::read_to_string(spec_path)
            .with_context(|| format!("reading {}", spec_path.display()))?,
    )?;
    if spec.seed.is_none() {
        spec.seed = cli.seed;
    }
    for op in &spec.operators {
        let addr: std::net::SocketAddr = op
            .listen
            .parse()
            .with_context(|| format!("listen address {:?}", op.listen))?;
        if !scanner::is_safe_target(&addr.ip()) {
            bail!(
                "mock listener {} must bind loopback or a private range",
                op.listen
            );
        }
    }
    let fleet = MockFleet::spawn(&spec)?;

    if let Some(path) = targets_out {
        let mut lines = String::new();
        for target in fleet.targets() {
            lines.push_str(&jsonl_line(&target)?);
            lines.push('\n');
        }
        std::fs::write(path, lines)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    for listener in fleet.listeners() {
        println!("{} {}", listener.plmn, listener.addr);
    }
    std::io::stdout().flush()?;

    let stop = Arc::new(AtomicBool::new(false));
    for signal in [libc::SIGINT, libc::SIGTERM] {
        let stop = Arc::clone(&stop);
        // Registration only fails for forbidden signal numbers.
        unsafe {
            signal_hook_registry::register(signal, move || {
                stop.store(true, Ordering::Relaxed);
            })
        }
        .context("registering signal handler")?;
    }
    while !stop.load(Ordering::Relaxed) {
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    eprintln!("shutting down {} listeners", fleet.listeners().len());
    fleet.shutdown();
    Ok(ExitCode::SUCCESS)
}
