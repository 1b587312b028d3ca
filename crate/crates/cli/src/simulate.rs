//! `simulate`, `tamper-demo` and `dump-chain`.

use std::path::Path;

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::Value;
use xref_core::hysteresis::{self, AuditVerdict, DomainId};
use xref_core::netsim::{build_world, SimWorld};
use xref_core::protocol::{self, ProtocolOutcome, ProtocolStatus};
use xref_core::scenario::{self, TamperVerdict};

use crate::config;
use crate::output::{ensure_dir, to_json_pretty, write_json, write_text};
use crate::{CliError, CliResult};

#[derive(Debug, Serialize)]
struct PhaseCounts {
    t1: u64,
    t2: u64,
    t3: u64,
}

impl From<[u64; 3]> for PhaseCounts {
    fn from(v: [u64; 3]) -> Self {
        Self { t1: v[0], t2: v[1], t3: v[2] }
    }
}

#[derive(Debug, Serialize)]
struct AuditLine {
    domain: DomainId,
    height: u64,
    digest: String,
    verdict: AuditVerdict,
    agreeing: Vec<DomainId>,
    conflicting: Vec<DomainId>,
    no_evidence: Vec<DomainId>,
}

#[derive(Debug, Serialize)]
struct SimSummary {
    schema_version: u32,
    flowchart: u8,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    seed: u64,
    m: u32,
    l: u64,
    t: u32,
    initiator: DomainId,
    completed_domains: Vec<DomainId>,
    failed_domains: Vec<DomainId>,
    phase_rounds: PhaseCounts,
    phase_messages: [u64; 3],
    messages_total: u64,
    bytes_total: u64,
    messages_dropped: u64,
    rounds_total: u64,
    audits: Vec<AuditLine>,
}

fn summarize(flowchart: u8, world: &SimWorld, result: &Result<ProtocolOutcome, protocol::ProtocolError>) -> SimSummary {
    let cfg = &world.config;
    let metrics = &world.network.metrics;
    let (status, reason) = match result {
        Ok(o) => match &o.status {
            ProtocolStatus::Completed => ("completed", None),
            ProtocolStatus::Aborted { reason } => ("aborted", Some(reason.clone())),
        },
        Err(e) => ("error", Some(e.to_string())),
    };
    let audits = scenario::audit_all_referenced(world)
        .into_iter()
        .map(|a| AuditLine {
            domain: a.target_domain,
            height: a.target_height,
            digest: a.local_digest.to_hex(),
            verdict: a.verdict(),
            agreeing: a.agreeing_domains(),
            conflicting: a.conflicting_domains(),
            no_evidence: a.no_evidence_domains(),
        })
        .collect();
    SimSummary {
        schema_version: config::SCHEMA_VERSION,
        flowchart,
        status,
        reason,
        seed: cfg.seed,
        m: cfg.m,
        l: cfg.l,
        t: cfg.t,
        initiator: cfg.initiator,
        completed_domains: result.as_ref().map(|o| o.completed_domains.iter().copied().collect()).unwrap_or_default(),
        failed_domains: world.failed_domains().into_iter().collect(),
        phase_rounds: metrics.phase_rounds.into(),
        phase_messages: metrics.phase_messages,
        messages_total: metrics.messages_total,
        bytes_total: metrics.bytes_total,
        messages_dropped: metrics.messages_dropped,
        rounds_total: metrics.rounds_total,
        audits,
    }
}

pub fn simulate(config_path: Option<&Path>, flowchart: u8, out: &Path, seed: Option<u64>) -> CliResult {
    let file = config::load_optional(config_path)?
        .ok_or_else(|| anyhow!("no configuration: pass --config or set {}", config::CONFIG_DIR_ENV))?;
    let mut sim = file.simulation.ok_or_else(|| anyhow!("configuration has no simulation section"))?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    if flowchart == 1 && !sim.failure_schedule.is_empty() {
        return Err(anyhow!("flowchart 1 requires an empty failure_schedule").into());
    }
    let (initiator, l, t) = (sim.initiator, sim.l, sim.t);
    let mut world = build_world(sim)?;
    let result = match flowchart {
        1 => world.run_flowchart1(initiator, l),
        _ => world.run_flowchart2(initiator, l, t),
    };

    ensure_dir(out)?;
    let mut transcript = Vec::new();
    protocol::write_jsonl(&mut transcript, &world.network.trace)?;
    write_text(&out.join("transcript.jsonl"), std::str::from_utf8(&transcript)?)?;
    let summary = summarize(flowchart, &world, &result);
    write_json(&out.join("summary.json"), &summary)?;
    let mut snapshot = world.to_json()?;
    snapshot.push('\n');
    write_text(&out.join("world.json"), &snapshot)?;

    println!(
        "{}: {} of {} domains completed, {} messages, {} bytes, T1={} T2={} T3={}",
        summary.status,
        summary.completed_domains.len(),
        summary.m,
        summary.messages_total,
        summary.bytes_total,
        summary.phase_rounds.t1,
        summary.phase_rounds.t2,
        summary.phase_rounds.t3,
    );
    match (summary.status, summary.reason) {
        ("completed", _) => Ok(()),
        (_, reason) => Err(CliError::Outcome(reason.unwrap_or_else(|| "protocol failed".into()))),
    }
}

fn load_snapshot(path: &Path) -> anyhow::Result<SimWorld> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read snapshot {}", path.display()))?;
    SimWorld::from_json(&text).with_context(|| format!("invalid snapshot {}", path.display()))
}

pub fn tamper_demo(snapshot: &Path, domain: DomainId, height: u64, remine: bool, out: Option<&Path>) -> CliResult {
    let world = load_snapshot(snapshot)?;
    let outcome = scenario::tamper_and_audit(&world, domain, height, remine)?;
    println!("tampered domain {domain} height {height}{}", if remine { " (re-mined)" } else { "" });
    match outcome.local_validation {
        xref_core::chain::ValidationReport::Valid => println!("local validation: valid"),
        xref_core::chain::ValidationReport::Invalid { first_invalid_height, cause } => {
            println!(
                "local validation: invalid at height {first_invalid_height} ({})",
                serde_json::to_value(cause)?.as_str().unwrap_or("?")
            )
        }
    }
    if let (Some(h), Some(audit)) = (outcome.audited_height, &outcome.audit) {
        let list = |v: Vec<DomainId>| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
        println!("audited height: {h}");
        println!("conflicting domains: {}", list(audit.conflicting_domains()));
        println!("agreeing domains: {}", list(audit.agreeing_domains()));
        println!("no evidence: {}", list(audit.no_evidence_domains()));
    }
    let verdict = match outcome.verdict {
        TamperVerdict::DetectedLocally => "detected locally",
        TamperVerdict::DetectedByAudit => "detected by audit",
        TamperVerdict::Undetected => "undetected",
        TamperVerdict::NoEvidence => "no evidence",
    };
    println!("verdict: {verdict}");
    if let Some(path) = out {
        write_json(path, &outcome)?;
    }
    if outcome.verdict.detected() {
        Ok(())
    } else {
        Err(CliError::Outcome(format!("tamper not detected: {verdict}")))
    }
}

pub fn dump_chain(snapshot: &Path, domain: DomainId) -> CliResult {
    let world = load_snapshot(snapshot)?;
    let Some(chain) = world.chains.get(&domain) else {
        return Err(anyhow!("unknown domain {domain}").into());
    };
    let blocks: Vec<Value> = chain
        .blocks
        .iter()
        .map(|b| {
            let mut v = serde_json::to_value(b).expect("block serializes");
            v["hash"] = Value::String(b.hash().to_hex());
            v
        })
        .collect();
    let embedded = chain.embedded_hysteresis_chain();
    let doc = serde_json::json!({
        "schema_version": config::SCHEMA_VERSION,
        "domain_id": chain.domain_id,
        "difficulty_bits": chain.difficulty_bits,
        "validation": chain.validate(),
        "hysteresis_entries": embedded.len(),
        "hysteresis_verification": hysteresis::verify_chain(&embedded, &world.public_keys()),
        "blocks": blocks,
    });
    print!("{}", to_json_pretty(&doc)?);
    Ok(())
}
