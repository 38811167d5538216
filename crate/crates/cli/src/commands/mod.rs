//! Shared command plumbing: flag-over-file configuration loading, the
//! common solve path, oracle joins, and artifact naming.

pub mod energy;
pub mod oracle;
pub mod solve;
pub mod study;
pub mod sweep;
pub mod verify;

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use platelab_core::discretize::{assemble, BcKind, Resolution};
use platelab_core::eigensolve::{solve_lowest, EigenPair};
use platelab_core::geometry::DomainSpec;
use platelab_core::oracles;

use crate::config::RunConfig;

/// Flags shared by every subcommand. Precedence: flag, then config file,
/// then built-in default; the effective merge is echoed in each report.
#[derive(clap::Args, Debug)]
pub struct CommonArgs {
    /// Configuration file with one `key = value` per line
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Domain: disk:R, ellipse:A,B, rect:A,B, star:R0,cos3=0.2,sin2=-0.1
    #[arg(long)]
    pub domain: Option<String>,
    /// Boundary condition: dirichlet|clamped, navier|hinged, supported
    #[arg(long)]
    pub bc: Option<String>,
    /// Poisson ratio (supported condition and material)
    #[arg(long)]
    pub mu: Option<String>,
    /// Grid size as counts like 200,32 (polar) or 24,24 (tensor),
    /// or a scale of the domain default like 2x
    #[arg(long)]
    pub resolution: Option<String>,
    /// Output directory for CSV and JSON artifacts
    #[arg(long)]
    pub out_dir: Option<String>,
}

impl CommonArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::empty(),
        };
        if let Some(v) = &self.domain {
            config.set("domain", v);
        }
        if let Some(v) = &self.bc {
            config.set("bc", v);
        }
        if let Some(v) = &self.mu {
            config.set("mu", v);
        }
        if let Some(v) = &self.resolution {
            config.set("resolution", v);
        }
        if let Some(v) = &self.out_dir {
            config.set("out_dir", v);
        }
        Ok(config)
    }
}

/// File-name fragment from a report label: `disk(1)` becomes `disk-1`.
pub fn slug(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() || ch == '.' {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

pub struct Solved {
    pub domain: DomainSpec<f64>,
    pub bc: BcKind<f64>,
    pub resolution: Resolution,
    pub pairs: Vec<EigenPair<f64>>,
}

/// Assemble and solve the configured problem for the lowest `count` modes.
pub fn solve_modes(config: &RunConfig, count: usize) -> Result<Solved> {
    let domain = config.domain()?;
    let bc = config.bc()?;
    let resolution = config.resolution(&domain, &bc)?;
    let op = assemble(&domain, bc.clone(), resolution)
        .map_err(|err| anyhow!("assembling {} under {}: {err}", domain.label(), bc.label()))?;
    let pairs = solve_lowest(&op, count)?;
    Ok(Solved { domain, bc, resolution, pairs })
}

/// Reference eigenvalues for the configured problem, expanded to one entry
/// per mode (degenerate pairs appear twice), or `None` when no closed or
/// semi-analytic oracle covers the combination.
pub fn oracle_values(
    domain: &DomainSpec<f64>,
    bc: &BcKind<f64>,
    count: usize,
) -> Result<Option<Vec<f64>>> {
    match (domain, bc) {
        (DomainSpec::Disk { radius }, _) => {
            let r = *radius;
            let table = match bc {
                BcKind::Dirichlet => oracles::disk_table(|m, n| oracles::disk_clamped(m, n, r), count)?,
                BcKind::Navier => oracles::disk_table(|m, n| oracles::disk_navier(m, n, r), count)?,
                BcKind::Supported { mu, .. } => {
                    let mu = *mu;
                    oracles::disk_table(|m, n| oracles::disk_supported(m, n, r, mu), count)?
                }
            };
            let mut values = Vec::with_capacity(count);
            for mode in &table {
                for _ in 0..mode.multiplicity() {
                    values.push(mode.alpha);
                }
            }
            values.truncate(count);
            Ok(Some(values))
        }
        (DomainSpec::Rectangle { a, b }, BcKind::Navier) => {
            let table = oracles::rectangle_navier_table(*a, *b, count)?;
            Ok(Some(table.into_iter().map(|(_, _, alpha)| alpha).collect()))
        }
        _ => Ok(None),
    }
}
