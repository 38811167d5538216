//! `solve`: lowest modes of the configured problem, with certification
//! residuals, boundary-condition residuals, and oracle deltas when a
//! semi-analytic reference covers the run.

use anyhow::Result;
use platelab_core::traces::extract_trace;
use serde::Serialize;

use super::{oracle_values, slug, solve_modes, CommonArgs};
use crate::config::RunConfig;
use crate::report::{self, sig, sig_opt, Table};

#[derive(clap::Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of modes to compute
    #[arg(long)]
    pub modes: Option<usize>,
    /// Also write one boundary-trace CSV per mode
    #[arg(long)]
    pub trace: bool,
}

#[derive(Serialize)]
struct ModeRow {
    ordinal: usize,
    group: usize,
    tag: String,
    eigenvalue: f64,
    residual: f64,
    residual_floor: f64,
    bc_residual: f64,
    oracle: Option<f64>,
    oracle_rel_delta: Option<f64>,
}

#[derive(Serialize)]
struct Payload {
    domain: String,
    bc: String,
    resolution: String,
    modes: Vec<ModeRow>,
}

pub fn run(args: &SolveArgs) -> Result<bool> {
    let mut config = args.common.load()?;
    if let Some(modes) = args.modes {
        config.set("modes", modes.to_string());
    }
    if args.trace {
        config.set("trace", "true");
    }
    let count = config.modes()?;
    let solved = solve_modes(&config, count)?;
    let oracle = oracle_values(&solved.domain, &solved.bc, solved.pairs.len())?;

    let mut rows = Vec::with_capacity(solved.pairs.len());
    for (i, pair) in solved.pairs.iter().enumerate() {
        let trace = extract_trace(pair)?;
        let reference = oracle.as_ref().and_then(|v| v.get(i).copied());
        rows.push(ModeRow {
            ordinal: pair.ordinal,
            group: pair.group,
            tag: pair.tag.label(),
            eigenvalue: pair.value,
            residual: pair.residual,
            residual_floor: pair.floor,
            bc_residual: trace.bc_residual()?,
            oracle: reference,
            oracle_rel_delta: reference.map(|want| (pair.value - want).abs() / want.abs()),
        });
    }

    let mut table = Table::new([
        "ordinal",
        "group",
        "tag",
        "eigenvalue",
        "residual",
        "residual_floor",
        "bc_residual",
        "oracle",
        "oracle_rel_delta",
    ]);
    for row in &rows {
        table.push([
            row.ordinal.to_string(),
            row.group.to_string(),
            row.tag.clone(),
            sig(row.eigenvalue),
            sig(row.residual),
            sig(row.residual_floor),
            sig(row.bc_residual),
            sig_opt(row.oracle),
            sig_opt(row.oracle_rel_delta),
        ]);
    }

    let tag = format!("{}_{}", slug(&solved.domain.label()), slug(&solved.bc.label()));
    let out = config.out_dir().to_path_buf();
    let mut artifacts = Vec::new();
    let csv = report::write_artifact(&out, &format!("solve_{tag}.csv"), &table.render())?;
    artifacts.push(csv.display().to_string());

    if config.trace()? {
        for pair in &solved.pairs {
            let trace = extract_trace(pair)?;
            let name = format!("trace_{tag}_mode{}.csv", pair.ordinal);
            let path = report::write_artifact(&out, &name, &report::trace_table(&trace).render())?;
            artifacts.push(path.display().to_string());
        }
    }

    let payload = Payload {
        domain: solved.domain.label(),
        bc: solved.bc.label(),
        resolution: solved.resolution.label(),
        modes: rows,
    };
    let envelope = report::Envelope {
        command: "solve".into(),
        config: config.effective(),
        verdict: report::verdict_label(true),
        artifacts: artifacts.clone(),
        payload,
    };
    let json = report::write_artifact(&out, &format!("solve_{tag}.json"), &report::to_json(&envelope)?)?;

    println!(
        "solved {} under {} at {}: {} modes",
        solved.domain.label(),
        solved.bc.label(),
        solved.resolution.label(),
        solved.pairs.len()
    );
    for pair in &solved.pairs {
        println!("  mode {}: {} (residual {:.2e})", pair.ordinal, sig(pair.value), pair.residual);
    }
    for path in &artifacts {
        println!("wrote {path}");
    }
    println!("wrote {}", json.display());
    Ok(true)
}
