//! `oracle`: semi-analytic reference tables (disk dispersion roots, separable
//! rectangle values) exported as CSV for documentation and cross-checks.

use anyhow::{bail, Result};
use platelab_core::discretize::BcKind;
use platelab_core::geometry::DomainSpec;
use platelab_core::oracles;
use serde::Serialize;

use super::{slug, CommonArgs};
use crate::report::{self, sig, Table};

#[derive(clap::Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of modes to tabulate
    #[arg(long)]
    pub modes: Option<usize>,
}

#[derive(Serialize)]
struct OracleRow {
    angular: usize,
    radial: usize,
    multiplicity: usize,
    /// Dispersion root `k R` for disk families, blank for the rectangle.
    root: Option<f64>,
    eigenvalue: f64,
}

#[derive(Serialize)]
struct Payload {
    domain: String,
    bc: String,
    rows: Vec<OracleRow>,
}

pub fn run(args: &OracleArgs) -> Result<bool> {
    let mut config = args.common.load()?;
    if let Some(modes) = args.modes {
        config.set("modes", modes.to_string());
    }
    let count = config.modes()?;
    let domain = config.domain()?;
    let bc = config.bc()?;

    let rows: Vec<OracleRow> = match (&domain, &bc) {
        (DomainSpec::Disk { radius }, _) => {
            let r = *radius;
            let table = match &bc {
                BcKind::Dirichlet => {
                    oracles::disk_table(|m, n| oracles::disk_clamped(m, n, r), count)?
                }
                BcKind::Navier => oracles::disk_table(|m, n| oracles::disk_navier(m, n, r), count)?,
                BcKind::Supported { mu, .. } => {
                    let mu = *mu;
                    oracles::disk_table(|m, n| oracles::disk_supported(m, n, r, mu), count)?
                }
            };
            table
                .iter()
                .map(|mode| OracleRow {
                    angular: mode.m,
                    radial: mode.n,
                    multiplicity: mode.multiplicity(),
                    root: Some(mode.k * mode.radius),
                    eigenvalue: mode.alpha,
                })
                .collect()
        }
        (DomainSpec::Rectangle { a, b }, BcKind::Navier) => {
            oracles::rectangle_navier_table(*a, *b, count)?
                .into_iter()
                .map(|(p, q, alpha)| OracleRow {
                    angular: p,
                    radial: q,
                    multiplicity: 1,
                    root: None,
                    eigenvalue: alpha,
                })
                .collect()
        }
        _ => bail!(
            "no oracle covers {} under {}; oracles exist for the disk (all conditions) and the rectangle (hinged)",
            domain.label(),
            bc.label()
        ),
    };

    let mut table = Table::new(["angular", "radial", "multiplicity", "root", "eigenvalue"]);
    for row in &rows {
        table.push([
            row.angular.to_string(),
            row.radial.to_string(),
            row.multiplicity.to_string(),
            report::sig_opt(row.root),
            sig(row.eigenvalue),
        ]);
    }

    let tag = format!("{}_{}", slug(&domain.label()), slug(&bc.label()));
    let out = config.out_dir().to_path_buf();
    let csv = report::write_artifact(&out, &format!("oracle_{tag}.csv"), &table.render())?;
    let payload = Payload { domain: domain.label(), bc: bc.label(), rows };
    let envelope = report::Envelope {
        command: "oracle".into(),
        config: config.effective(),
        verdict: report::verdict_label(true),
        artifacts: vec![csv.display().to_string()],
        payload,
    };
    let json =
        report::write_artifact(&out, &format!("oracle_{tag}.json"), &report::to_json(&envelope)?)?;

    println!("oracle table for {} under {}: {} entries", domain.label(), bc.label(), table_len(&envelope.payload));
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    Ok(true)
}

fn table_len(payload: &Payload) -> usize {
    payload.rows.len()
}
