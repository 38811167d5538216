//! Plate elasticity on top of the spectral layer: material constants and
//! flexural rigidity, strain energy as a volume integral of Hessian
//! invariants and as boundary-only expressions, the boundary identity that
//! adjudicates the curvature weight of those expressions, and Poisson-ratio
//! sweeps with overlap-based mode tracking.
//!
//! Energies are reported in the eigenpair's own normalization (unit mass
//! after [`solve_lowest`], the sampled field's for analytic traces), so
//! relative gaps between routes are normalization-free.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{assemble, BcKind, Resolution};
use crate::eigensolve::{solve_lowest, EigenPair};
use crate::error::{Error, Result};
use crate::geometry::{build_boundary, C0Extension, DomainSpec};
use crate::identities::IdentityReport;
use crate::scalar::Scalar;
use crate::traces::{extract_trace, BoundaryTrace};

/// Guard against 0/0 in relative gaps.
const REL_GUARD: f64 = 1e-300;

/// Smallest dominant overlap accepted when continuing a mode across a
/// Poisson step; anything weaker is ambiguous and triggers bisection.
const OVERLAP_FLOOR: f64 = 0.99;

/// Bisection depth per grid interval when mode matching is ambiguous.
const MAX_BRIDGE_DEPTH: usize = 3;

/// Isotropic plate material: Poisson ratio, Young modulus, thickness, and
/// mass per unit area. Frequencies and energies enter only through the
/// derived flexural rigidity `D = E h^3 / (12 (1 - mu^2))`.
#[derive(Clone, Copy, Debug)]
pub struct Material<T: Scalar> {
    pub poisson: T,
    pub young_modulus: T,
    pub thickness: T,
    pub areal_density: T,
}

impl<T: Scalar> Material<T> {
    pub fn new(poisson: T, young_modulus: T, thickness: T, areal_density: T) -> Result<Self> {
        let material = Material { poisson, young_modulus, thickness, areal_density };
        material.validate()?;
        Ok(material)
    }

    /// Material with `E = 12 (1 - mu^2)` and unit thickness and density, so
    /// the rigidity is exactly one and spectral quantities pass through.
    pub fn with_unit_rigidity(poisson: T) -> Result<Self> {
        let one = T::one();
        Self::new(poisson, T::fl(12.0) * (one - poisson * poisson), one, one)
    }

    pub fn validate(&self) -> Result<()> {
        check_poisson(self.poisson)?;
        for (name, value) in [
            ("young_modulus", self.young_modulus),
            ("thickness", self.thickness),
            ("areal_density", self.areal_density),
        ] {
            if !(value > T::zero()) {
                return Err(Error::OutOfRange { name, value: value.f64(), expected: "> 0" });
            }
        }
        Ok(())
    }

    /// `D = E h^3 / (12 (1 - mu^2))`.
    pub fn flexural_rigidity(&self) -> Result<T> {
        self.validate()?;
        let h = self.thickness;
        let denom = T::fl(12.0) * (T::one() - self.poisson * self.poisson);
        Ok(self.young_modulus * h * h * h / denom)
    }

    /// The rigidity denominator collapses as `mu -> 1`; computations near
    /// that end of the admissible range lose accuracy before they error.
    pub fn near_singular(&self) -> bool {
        T::one() - self.poisson < T::fl(0.01)
    }

    /// Same stiffness data at a different Poisson ratio.
    pub fn with_poisson(&self, poisson: T) -> Result<Self> {
        Self::new(poisson, self.young_modulus, self.thickness, self.areal_density)
    }
}

fn check_poisson<T: Scalar>(mu: T) -> Result<()> {
    if !(mu > T::zero() && mu < T::one()) {
        return Err(Error::OutOfRange {
            name: "poisson_ratio",
            value: mu.f64(),
            expected: "(0, 1)",
        });
    }
    Ok(())
}

/// Natural angular frequency `omega = sqrt(gamma D / m)` of a plate
/// eigenvalue `gamma` on a material of rigidity `D` and areal density `m`.
pub fn natural_frequency<T: Scalar>(gamma: T, material: &Material<T>) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::OutOfRange { name: "gamma", value: gamma.f64(), expected: "> 0" });
    }
    let rigidity = material.flexural_rigidity()?;
    Ok((gamma * rigidity / material.areal_density).sqrt())
}

/// Strain energy as a volume integral of the Hessian invariants,
/// `E = D/2 [ int (lap u)^2 - 2 (1 - mu) int det(Hess u) ]`.
#[derive(Clone, Debug, Serialize)]
pub struct VolumeEnergy {
    pub total: f64,
    /// `int (lap u)^2`, taken from the operator's own sigma field.
    pub lap_sq: f64,
    /// `int det(Hess u)` in mapped coordinates, boundary strip included.
    pub det_hessian: f64,
    pub poisson: f64,
    pub rigidity: f64,
}

impl VolumeEnergy {
    /// Relative size of the determinant term against the membrane term.
    /// For a clamped mode the determinant integral vanishes in the limit,
    /// so this fraction measures pure discretization error.
    pub fn cross_term_fraction(&self) -> f64 {
        (2.0 * (1.0 - self.poisson) * self.det_hessian).abs() / self.lap_sq.abs().max(REL_GUARD)
    }
}

/// Evaluate the volume strain energy of one eigenpair. For the supported
/// condition the material must carry the same Poisson ratio the condition
/// was assembled with.
pub fn strain_energy_volume<T: Scalar>(
    pair: &EigenPair<T>,
    material: &Material<T>,
) -> Result<VolumeEnergy> {
    check_consistent_poisson(&pair.bc, material)?;
    let rigidity = material.flexural_rigidity()?.f64();
    let poisson = material.poisson.f64();
    let lap_sq = pair.grid.integrate_sq(&pair.sigma).f64();
    let det_hessian = pair.grid.det_hessian_integral(&pair.field).f64();
    Ok(VolumeEnergy {
        total: 0.5 * rigidity * (lap_sq - 2.0 * (1.0 - poisson) * det_hessian),
        lap_sq,
        det_hessian,
        poisson,
        rigidity,
    })
}

fn check_consistent_poisson<T: Scalar>(bc: &BcKind<T>, material: &Material<T>) -> Result<()> {
    if let BcKind::Supported { mu, .. } = bc {
        if (*mu - material.poisson).abs().f64() > 1e-12 {
            return Err(Error::Unsupported(format!(
                "material poisson ratio {} disagrees with the supported condition's {}",
                material.poisson.f64(),
                mu.f64()
            )));
        }
    }
    Ok(())
}

/// Curvature weight of the boundary term in the Hessian identity and in the
/// hinged and supported energy forms: the curvature itself or its
/// reciprocal. The two coincide on the unit disk, so telling them apart
/// needs a boundary of non-unit curvature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvatureWeight {
    Kappa,
    Reciprocal,
}

impl CurvatureWeight {
    pub const BOTH: [CurvatureWeight; 2] = [CurvatureWeight::Kappa, CurvatureWeight::Reciprocal];

    pub fn label(self) -> &'static str {
        match self {
            CurvatureWeight::Kappa => "kappa",
            CurvatureWeight::Reciprocal => "1/kappa",
        }
    }
}

/// `loop kappa u_nu^2 ds`. Straight boundary runs have zero curvature and
/// contribute nothing.
fn kappa_flux<T: Scalar>(trace: &BoundaryTrace<T>) -> T {
    trace.loop_ds(|k, node| {
        let kappa = node.curvature.unwrap_or_else(T::zero);
        kappa * trace.u_nu[k] * trace.u_nu[k]
    })
}

/// `loop (1/kappa) u_nu^2 ds`. Needs strictly positive curvature at every
/// node; straight runs leave the weight undefined.
fn reciprocal_flux<T: Scalar>(trace: &BoundaryTrace<T>) -> Result<T> {
    for node in &trace.nodes {
        let Some(kappa) = node.curvature else {
            return Err(Error::Unsupported(
                "reciprocal curvature weight is undefined on straight boundary runs".into(),
            ));
        };
        if !(kappa > T::zero()) {
            return Err(Error::OutOfRange {
                name: "curvature",
                value: kappa.f64(),
                expected: "> 0 for the reciprocal weight",
            });
        }
    }
    Ok(trace.loop_ds(|k, node| {
        let kappa = node.curvature.expect("checked above");
        trace.u_nu[k] * trace.u_nu[k] / kappa
    }))
}

/// Boundary identity for the Hessian determinant of a field vanishing on a
/// smooth boundary: `2 int det(Hess u) = loop w u_nu^2 ds` with curvature
/// weight `w`. Exactly one weight choice closes once the curvature is not
/// identically one; boundaries with straight runs are rejected because the
/// tangential-trace terms dropped here need not vanish at corners.
pub fn hessian_boundary_identity<T: Scalar>(
    pair: &EigenPair<T>,
    weight: CurvatureWeight,
) -> Result<IdentityReport> {
    let trace = extract_trace(pair)?;
    if trace.nodes.iter().any(|node| node.curvature.is_none()) {
        return Err(Error::Unsupported(
            "the Hessian boundary identity needs a smooth boundary; corners shed extra terms".into(),
        ));
    }
    let lhs = 2.0 * pair.grid.det_hessian_integral(&pair.field).f64();
    let rhs = match weight {
        CurvatureWeight::Kappa => kappa_flux(&trace),
        CurvatureWeight::Reciprocal => reciprocal_flux(&trace)?,
    };
    let mut report = IdentityReport::new(
        "hessian.boundary",
        lhs,
        rhs.f64(),
        trace.provenance.label().to_string(),
    );
    report.variant = Some(weight.label().into());
    Ok(report)
}

/// Boundary-only strain energy forms, in the trace's own normalization.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryEnergy {
    /// The boundary form with the curvature weight `kappa` wherever a
    /// curvature-weighted term enters (the weight the Hessian identity
    /// certifies).
    pub primary: f64,
    /// The same form with the reciprocal weight, where defined; `None` for
    /// the clamped condition (no weighted term) and on straight runs.
    pub reciprocal: Option<f64>,
    /// Supported condition only: energy through the boundary flux balance
    /// of the eigenvalue equation, an independent boundary-only route.
    pub flux_form: Option<f64>,
}

/// Evaluate the boundary strain energy form matching the trace's condition.
///
/// Clamped: `E = D/8 loop (x.nu) u_nunu^2 ds`.
/// Hinged: `E = -D/2 [ 1/2 loop (x.nu) u_nu d(lap u)/dnu ds + (1-mu) loop w u_nu^2 ds ]`.
/// Supported: four terms in the coefficient `c0` and its normal derivative
/// plus the same curvature-weighted correction.
pub fn strain_energy_boundary<T: Scalar>(
    trace: &BoundaryTrace<T>,
    material: &Material<T>,
) -> Result<BoundaryEnergy> {
    check_consistent_poisson(&trace.bc, material)?;
    let rigidity = material.flexural_rigidity()?.f64();
    let poisson = material.poisson.f64();
    match &trace.bc {
        BcKind::Dirichlet => {
            let bending = trace
                .loop_ds(|k, node| node.x_dot_nu * trace.u_nunu[k] * trace.u_nunu[k])
                .f64();
            Ok(BoundaryEnergy {
                primary: 0.125 * rigidity * bending,
                reciprocal: None,
                flux_form: None,
            })
        }
        BcKind::Navier => {
            let rellich = trace
                .loop_ds(|k, node| node.x_dot_nu * trace.u_nu[k] * trace.dlap_dnu[k])
                .f64();
            let form = |weighted: f64| -0.5 * rigidity * (0.5 * rellich + (1.0 - poisson) * weighted);
            Ok(BoundaryEnergy {
                primary: form(kappa_flux(trace).f64()),
                reciprocal: reciprocal_flux(trace).ok().map(|f| form(f.f64())),
                flux_form: None,
            })
        }
        BcKind::Supported { .. } => {
            let c0 = trace.c0.as_ref().ok_or_else(|| {
                Error::Unsupported("supported energy needs the stored c0 boundary field".into())
            })?;
            // Flux balance needs the curvature; validate once up front.
            if trace.nodes.iter().any(|node| node.curvature.is_none()) {
                return Err(Error::Unsupported(
                    "supported energy needs a smooth boundary with curvature data".into(),
                ));
            }
            let sq = trace.loop_ds(|k, node| {
                let s = c0.values[k] * trace.u_nu[k];
                node.x_dot_nu * s * s
            });
            let coupling = trace.loop_ds(|k, node| {
                node.x_dot_nu * c0.normal_derivative[k] * trace.u_nu[k] * trace.u_nu[k]
            });
            let mixed = trace.loop_ds(|k, _| c0.values[k] * trace.u_nu[k] * trace.u_nu[k]);
            let unweighted =
                rigidity * (-0.125 * sq.f64() - 0.25 * coupling.f64() + 0.5 * mixed.f64());
            let form = |weighted: f64| unweighted - 0.5 * rigidity * (1.0 - poisson) * weighted;
            // 2 gamma m2 = 1/2 sq - loop (x.nu) kappa c0 u_nu^2 - loop (x.nu) u_nu d(lap u)/dnu,
            // so E = D/2 gamma m2 follows from boundary data alone.
            let curl = trace.loop_ds(|k, node| {
                let kappa = node.curvature.expect("checked above");
                node.x_dot_nu * kappa * c0.values[k] * trace.u_nu[k] * trace.u_nu[k]
            });
            let drain = trace
                .loop_ds(|k, node| node.x_dot_nu * trace.dlap_dnu[k] * trace.u_nu[k]);
            let flux = 0.25 * rigidity * (0.5 * sq.f64() - curl.f64() - drain.f64());
            Ok(BoundaryEnergy {
                primary: form(kappa_flux(trace).f64()),
                reciprocal: reciprocal_flux(trace).ok().map(|f| form(f.f64())),
                flux_form: Some(flux),
            })
        }
    }
}

/// Volume and boundary strain energies of one eigenpair side by side, with
/// relative gaps for every boundary route. When the curvature weight cannot
/// be resolved from the domain (unit curvature everywhere) both weighted
/// forms are present and agree.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub bc: String,
    pub resolution: String,
    pub poisson: f64,
    pub rigidity: f64,
    pub eigenvalue: f64,
    pub e_volume: f64,
    pub e_boundary: f64,
    pub rel_gap: f64,
    pub e_boundary_reciprocal: Option<f64>,
    pub rel_gap_reciprocal: Option<f64>,
    pub e_flux_form: Option<f64>,
    pub rel_gap_flux: Option<f64>,
}

pub fn strain_energy_report<T: Scalar>(
    pair: &EigenPair<T>,
    material: &Material<T>,
) -> Result<EnergyReport> {
    let volume = strain_energy_volume(pair, material)?;
    let trace = extract_trace(pair)?;
    let boundary = strain_energy_boundary(&trace, material)?;
    let gap = |b: f64| (volume.total - b).abs() / volume.total.abs().max(b.abs()).max(REL_GUARD);
    Ok(EnergyReport {
        bc: pair.bc.label(),
        resolution: trace.provenance.label().to_string(),
        poisson: volume.poisson,
        rigidity: volume.rigidity,
        eigenvalue: pair.value.f64(),
        e_volume: volume.total,
        e_boundary: boundary.primary,
        rel_gap: gap(boundary.primary),
        e_boundary_reciprocal: boundary.reciprocal,
        rel_gap_reciprocal: boundary.reciprocal.map(gap),
        e_flux_form: boundary.flux_form,
        rel_gap_flux: boundary.flux_form.map(gap),
    })
}

/// Default 19-point Poisson grid, `0.05` through `0.95` in steps of `0.05`.
pub fn default_mu_grid<T: Scalar>() -> Vec<T> {
    (1..=19).map(|i| T::fl(0.05) * T::of_usize(i)).collect()
}

/// One tracked mode across the Poisson grid.
#[derive(Clone, Debug, Serialize)]
pub struct SweepMode {
    /// Ordinal of the mode in the spectrum at the first grid point.
    pub index: usize,
    pub gammas: Vec<f64>,
    pub omegas: Vec<f64>,
    /// Boundary formula for `d gamma / d mu`: `loop kappa u_nu^2 ds / int u^2`.
    pub formula_dgamma: Vec<f64>,
    /// Central difference of `gammas`; `None` at the grid ends.
    pub central_dgamma: Vec<Option<f64>>,
    pub strictly_increasing: bool,
    /// Smallest increase of `gamma` between consecutive grid points.
    pub min_step: f64,
    /// Largest relative gap between the boundary formula and the central
    /// difference over interior grid points.
    pub formula_vs_central: f64,
}

/// A supported-condition eigenvalue sweep over the Poisson ratio.
#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub domain: String,
    pub resolution: String,
    pub mu_grid: Vec<f64>,
    pub modes: Vec<SweepMode>,
    /// Interval midpoints solved to disambiguate mode matching.
    pub bridge_solves: usize,
}

fn solve_supported_at<T: Scalar>(
    domain: &DomainSpec<T>,
    resolution: Resolution,
    mu: T,
    count: usize,
) -> Result<Vec<EigenPair<T>>> {
    let bc = BcKind::Supported { mu, extension: C0Extension::ParallelCurve };
    let op = assemble(domain, bc, resolution)?;
    solve_lowest(&op, count)
}

/// Match each selected mode of `from` to its continuation in `to` by the
/// grid inner product, greedily and without reuse. A winner below the
/// overlap floor is ambiguous.
fn match_selected<T: Scalar>(
    from: &[EigenPair<T>],
    selected: &[usize],
    to: &[EigenPair<T>],
) -> Result<Vec<usize>> {
    let mut used = BTreeSet::new();
    let mut matches = Vec::with_capacity(selected.len());
    for &i in selected {
        let mut best = (usize::MAX, 0.0f64);
        let mut second = 0.0f64;
        for (j, candidate) in to.iter().enumerate() {
            if used.contains(&j) {
                continue;
            }
            let overlap = from[i].overlap(candidate).f64().abs();
            if overlap > best.1 {
                second = best.1;
                best = (j, overlap);
            } else if overlap > second {
                second = overlap;
            }
        }
        if best.0 == usize::MAX || best.1 < OVERLAP_FLOOR {
            return Err(Error::AmbiguousMatching {
                group: from[i].ordinal,
                first: best.1,
                second,
                tol: OVERLAP_FLOOR,
            });
        }
        used.insert(best.0);
        matches.push(best.0);
    }
    Ok(matches)
}

/// Continue the selected modes from one grid point to the next, solving at
/// interval midpoints (up to a fixed depth) when the direct match is
/// ambiguous.
#[allow(clippy::too_many_arguments)]
fn bridge_match<T: Scalar>(
    domain: &DomainSpec<T>,
    resolution: Resolution,
    count: usize,
    from_mu: T,
    from: &[EigenPair<T>],
    selected: &[usize],
    to_mu: T,
    to: &[EigenPair<T>],
    depth: usize,
    bridges: &mut usize,
) -> Result<Vec<usize>> {
    match match_selected(from, selected, to) {
        Ok(matched) => Ok(matched),
        Err(err @ Error::AmbiguousMatching { .. }) => {
            if depth == 0 {
                return Err(err);
            }
            let mid_mu = (from_mu + to_mu) * T::fl(0.5);
            let mid = solve_supported_at(domain, resolution, mid_mu, count)?;
            *bridges += 1;
            let through = bridge_match(
                domain, resolution, count, from_mu, from, selected, mid_mu, &mid, depth - 1,
                bridges,
            )?;
            bridge_match(
                domain, resolution, count, mid_mu, &mid, &through, to_mu, to, depth - 1, bridges,
            )
        }
        Err(err) => Err(err),
    }
}

/// Sweep the supported-condition spectrum over a Poisson grid, tracking the
/// lowest `n_modes` modes by overlap, and report eigenvalues, natural
/// frequencies, and both routes to `d gamma / d mu`. Grid points solve in
/// parallel; the matching reduction is sequential.
pub fn poisson_sweep<T: Scalar>(
    domain: &DomainSpec<T>,
    resolution: Resolution,
    mu_grid: &[T],
    n_modes: usize,
    material: &Material<T>,
) -> Result<SweepResult> {
    if n_modes == 0 {
        return Err(Error::OutOfRange { name: "n_modes", value: 0.0, expected: ">= 1" });
    }
    if mu_grid.len() < 2 {
        return Err(Error::OutOfRange {
            name: "mu_grid",
            value: mu_grid.len() as f64,
            expected: "at least two points",
        });
    }
    for window in mu_grid.windows(2) {
        if !(window[1] > window[0]) {
            return Err(Error::OutOfRange {
                name: "mu_grid",
                value: window[1].f64(),
                expected: "strictly increasing",
            });
        }
    }
    for &mu in mu_grid {
        check_poisson(mu)?;
    }
    // The tracked derivative formula integrates kappa u_nu^2, and the
    // supported condition itself is posed on curved boundaries; reject
    // domains whose boundary is not strictly convex.
    let probe_nodes = build_boundary(domain, 64)?;
    for node in &probe_nodes {
        let Some(kappa) = node.curvature else {
            return Err(Error::Unsupported(
                "the Poisson sweep needs a smooth boundary with curvature data".into(),
            ));
        };
        if !(kappa > T::zero()) {
            return Err(Error::OutOfRange {
                name: "curvature",
                value: kappa.f64(),
                expected: "> 0 on the whole boundary",
            });
        }
    }

    // Two spare candidates keep the greedy matching stable when a tracked
    // doublet sits at the cut.
    let count = n_modes + 2;
    let solved: Result<Vec<Vec<EigenPair<T>>>> = mu_grid
        .par_iter()
        .map(|&mu| solve_supported_at(domain, resolution, mu, count))
        .collect();
    let solved = solved?;

    // Sequential continuation across the grid.
    let mut bridges = 0usize;
    let mut selected: Vec<Vec<usize>> = Vec::with_capacity(mu_grid.len());
    selected.push((0..n_modes).collect());
    for i in 1..mu_grid.len() {
        let previous = selected[i - 1].clone();
        let matched = bridge_match(
            domain,
            resolution,
            count,
            mu_grid[i - 1],
            &solved[i - 1],
            &previous,
            mu_grid[i],
            &solved[i],
            MAX_BRIDGE_DEPTH,
            &mut bridges,
        )?;
        selected.push(matched);
    }

    let mut modes = Vec::with_capacity(n_modes);
    for mode in 0..n_modes {
        let mut gammas = Vec::with_capacity(mu_grid.len());
        let mut omegas = Vec::with_capacity(mu_grid.len());
        let mut formula = Vec::with_capacity(mu_grid.len());
        for (i, &mu) in mu_grid.iter().enumerate() {
            let pair = &solved[i][selected[i][mode]];
            let gamma = pair.value;
            let trace = extract_trace(pair)?;
            gammas.push(gamma.f64());
            omegas.push(natural_frequency(gamma, &material.with_poisson(mu)?)?.f64());
            formula.push(kappa_flux(&trace).f64() / trace.m2.f64());
        }
        let mut central = vec![None; mu_grid.len()];
        for i in 1..mu_grid.len() - 1 {
            let span = (mu_grid[i + 1] - mu_grid[i - 1]).f64();
            central[i] = Some((gammas[i + 1] - gammas[i - 1]) / span);
        }
        let steps: Vec<f64> = gammas.windows(2).map(|w| w[1] - w[0]).collect();
        let min_step = steps.iter().copied().fold(f64::INFINITY, f64::min);
        let formula_vs_central = central
            .iter()
            .zip(&formula)
            .filter_map(|(c, f)| c.map(|c| (c - f).abs() / c.abs().max(f.abs()).max(REL_GUARD)))
            .fold(0.0f64, f64::max);
        modes.push(SweepMode {
            index: mode,
            gammas,
            omegas,
            formula_dgamma: formula,
            central_dgamma: central,
            strictly_increasing: min_step > 0.0,
            min_step,
            formula_vs_central,
        });
    }

    let resolution_label = extract_trace(&solved[0][0])?.provenance.label().to_string();
    Ok(SweepResult {
        domain: domain.label(),
        resolution: resolution_label,
        mu_grid: mu_grid.iter().map(|mu| mu.f64()).collect(),
        modes,
        bridge_solves: bridges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadialProfile;
    use crate::oracles::trace::disk_mode_trace;
    use crate::oracles::{disk_clamped, disk_navier, disk_supported};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn supported_bc(mu: f64) -> BcKind<f64> {
        BcKind::Supported { mu, extension: C0Extension::ParallelCurve }
    }

    fn unit_material() -> Material<f64> {
        Material::with_unit_rigidity(0.3).unwrap()
    }

    fn ground_pair(domain: &DomainSpec<f64>, bc: BcKind<f64>, resolution: Resolution) -> EigenPair<f64> {
        let op = assemble(domain, bc, resolution).unwrap();
        solve_lowest(&op, 1).unwrap().remove(0)
    }

    const DEFAULT_DISK: Resolution = Resolution::Polar { radial: 200, angular: 32 };

    #[test]
    fn material_constants_validate_and_scale() {
        let steel = Material::new(0.3, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(
            steel.flexural_rigidity().unwrap(),
            0.0915750915750916,
            max_relative = 1e-13
        );
        assert_relative_eq!(unit_material().flexural_rigidity().unwrap(), 1.0, max_relative = 0.0);

        // Rigidity grows with the Poisson ratio at fixed stiffness data.
        let mut previous = 0.0;
        for i in 1..20 {
            let d = steel.with_poisson(0.05 * i as f64).unwrap().flexural_rigidity().unwrap();
            assert!(d > previous);
            previous = d;
        }

        assert!(!steel.near_singular());
        assert!(steel.with_poisson(0.995).unwrap().near_singular());
        assert!(!steel.with_poisson(0.95).unwrap().near_singular());

        for bad in [-0.1, 0.0, 1.0, 1.3] {
            assert!(matches!(
                Material::new(bad, 1.0, 1.0, 1.0),
                Err(Error::OutOfRange { name: "poisson_ratio", .. })
            ));
        }
        assert!(Material::new(0.3, 0.0, 1.0, 1.0).is_err());
        assert!(Material::new(0.3, 1.0, -1.0, 1.0).is_err());
        assert!(Material::new(0.3, 1.0, 1.0, 0.0).is_err());

        // omega = sqrt(gamma D / m) on the supported unit-disk ground value.
        let omega = natural_frequency(24.3556960724, &unit_material()).unwrap();
        assert_relative_eq!(omega, 4.935149042572, max_relative = 1e-12);
        assert!(natural_frequency(0.0, &unit_material()).is_err());
        assert!(natural_frequency(-3.0, &unit_material()).is_err());

        // The supported condition pins the Poisson ratio; a disagreeing
        // material must be rejected rather than silently mixed in.
        let pair = ground_pair(
            &DomainSpec::Disk { radius: 1.0 },
            supported_bc(0.3),
            Resolution::Polar { radial: 50, angular: 8 },
        );
        let mismatched = Material::with_unit_rigidity(0.4).unwrap();
        assert!(strain_energy_volume(&pair, &mismatched).is_err());
    }

    #[test]
    fn analytic_boundary_energies_close_where_the_identities_do() {
        let material = unit_material();

        // Clamped: E = D/8 loop (x.nu) u_nunu^2 equals D/2 alpha m2.
        let mode = disk_clamped(0, 1, 1.0).unwrap();
        let trace = disk_mode_trace(&mode, BcKind::Dirichlet, 256).unwrap();
        let energy = strain_energy_boundary(&trace, &material).unwrap();
        let volume = 0.5 * mode.alpha * trace.m2;
        assert_relative_eq!(energy.primary, volume, max_relative = 1e-13);
        assert_relative_eq!(energy.primary / trace.m2, 52.1815527794, max_relative = 1e-11);
        assert!(energy.reciprocal.is_none());
        assert!(energy.flux_form.is_none());

        // Hinged: the curvature-weighted form closes against the volume
        // integral; on the unit disk the reciprocal weight is the same sum.
        let mode = disk_navier(0, 1, 1.0).unwrap();
        let trace = disk_mode_trace(&mode, BcKind::Navier, 256).unwrap();
        let energy = strain_energy_boundary(&trace, &material).unwrap();
        let det_flux: f64 =
            trace.loop_ds(|k, node| node.curvature.unwrap() * trace.u_nu[k] * trace.u_nu[k]);
        let volume = 0.5 * (mode.alpha * trace.m2 - 0.7 * det_flux);
        assert_relative_eq!(energy.primary, volume, max_relative = 1e-13);
        assert_relative_eq!(energy.primary / trace.m2, 12.674389766950, max_relative = 1e-11);
        // 2 int det(Hess u) for the normalized mode is exactly 2 k^2.
        assert_relative_eq!(det_flux / trace.m2, 11.566371925894, max_relative = 1e-11);
        assert_eq!(energy.reciprocal.unwrap(), energy.primary);
    }

    #[test]
    fn supported_energy_stalls_like_its_identity_but_the_flux_route_closes() {
        let material = unit_material();
        let mode = disk_supported(0, 1, 1.0, 0.3).unwrap();
        let trace = disk_mode_trace(&mode, supported_bc(0.3), 256).unwrap();
        let energy = strain_energy_boundary(&trace, &material).unwrap();
        let volume = 0.5 * mode.alpha * trace.m2;
        assert_relative_eq!(volume / trace.m2, 12.177848036214, max_relative = 1e-11);

        // The four-term boundary form inherits the stalled supported
        // identity: its relative gap is the same O(1) constant.
        let gap = (volume - energy.primary).abs() / volume.abs().max(energy.primary.abs());
        assert_relative_eq!(gap, 0.863911160178, max_relative = 1e-8);
        // Unit curvature: the printed reciprocal weight changes nothing.
        assert_eq!(energy.reciprocal.unwrap(), energy.primary);

        // The flux-balance route uses the same boundary data and closes to
        // quadrature accuracy, so the stall is in the form, not the trace.
        let flux = energy.flux_form.unwrap();
        assert_relative_eq!(flux, volume, max_relative = 1e-13);
    }

    #[test]
    fn discrete_energy_reports_close_for_clamped_and_hinged() {
        let disk = DomainSpec::Disk { radius: 1.0 };
        let material = unit_material();

        let pair = ground_pair(&disk, BcKind::Dirichlet, DEFAULT_DISK);
        let report = strain_energy_report(&pair, &material).unwrap();
        assert_relative_eq!(report.e_volume, 52.1815527794, max_relative = 5e-5);
        assert!(report.rel_gap < 1e-4, "clamped gap {}", report.rel_gap);
        assert!(report.e_boundary_reciprocal.is_none());
        // The Hessian determinant integral vanishes for clamped modes; the
        // discrete cross term is pure discretization error.
        let volume = strain_energy_volume(&pair, &material).unwrap();
        assert!(volume.cross_term_fraction() < 1e-3, "cross {}", volume.cross_term_fraction());

        let pair = ground_pair(&disk, BcKind::Navier, DEFAULT_DISK);
        let report = strain_energy_report(&pair, &material).unwrap();
        assert_relative_eq!(report.e_volume, 12.674389766950, max_relative = 5e-5);
        assert!(report.rel_gap < 5e-6, "hinged gap {}", report.rel_gap);
        // Unit disk: both weights, same value.
        assert_eq!(report.rel_gap_reciprocal.unwrap(), report.rel_gap);

        let pair = ground_pair(&disk, supported_bc(0.3), DEFAULT_DISK);
        let report = strain_energy_report(&pair, &material).unwrap();
        assert_relative_eq!(report.e_volume, 12.177848036214, max_relative = 5e-5);
        assert!((report.rel_gap - 0.863911160178).abs() < 5e-4, "gap {}", report.rel_gap);
        assert!(report.rel_gap_flux.unwrap() < 1e-4, "flux {:?}", report.rel_gap_flux);
    }

    #[test]
    fn hessian_identity_adjudicates_the_curvature_weight() {
        let material = unit_material();

        // Unit disk: the weights coincide, a control for the rescaled run.
        let pair = ground_pair(&DomainSpec::Disk { radius: 1.0 }, BcKind::Navier, DEFAULT_DISK);
        for weight in CurvatureWeight::BOTH {
            let id = hessian_boundary_identity(&pair, weight).unwrap();
            assert!(id.rel_residual < 1e-4, "{} rel {}", weight.label(), id.rel_residual);
            assert_relative_eq!(id.lhs, 11.566371925894, max_relative = 5e-5);
            assert_eq!(id.variant.as_deref(), Some(weight.label()));
        }

        // Radius-2 disk, curvature 1/2: only the curvature weight closes;
        // the reciprocal misses by the frozen factor-of-four gap.
        let pair = ground_pair(&DomainSpec::Disk { radius: 2.0 }, BcKind::Navier, DEFAULT_DISK);
        let kappa = hessian_boundary_identity(&pair, CurvatureWeight::Kappa).unwrap();
        let reciprocal = hessian_boundary_identity(&pair, CurvatureWeight::Reciprocal).unwrap();
        assert!(kappa.rel_residual < 1e-4, "kappa rel {}", kappa.rel_residual);
        // 2 int det(Hess u) = j01^2 / 8 for the normalized ground mode.
        assert_relative_eq!(kappa.lhs, 0.7228982453683481, max_relative = 5e-5);
        assert_relative_eq!(reciprocal.rel_residual, 0.750006497123, max_relative = 1e-6);
        let within_tol =
            [&kappa, &reciprocal].iter().filter(|id| id.rel_residual < 0.01).count();
        assert_eq!(within_tol, 1, "exactly one weight closes off the unit disk");

        // The rescaled energy report discriminates the same way.
        let report = strain_energy_report(&pair, &material).unwrap();
        assert!(report.rel_gap < 5e-6, "gap {}", report.rel_gap);
        assert!((report.rel_gap_reciprocal.unwrap() - 0.958225).abs() < 1e-4);

        // Corners shed boundary terms the identity drops: reject rectangles.
        let square = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
        let pair = ground_pair(&square, BcKind::Navier, Resolution::Tensor { nx: 64, ny: 64 });
        for weight in CurvatureWeight::BOTH {
            assert!(matches!(
                hessian_boundary_identity(&pair, weight),
                Err(Error::Unsupported(_))
            ));
        }
        // The rectangle energy report still closes: straight edges carry a
        // zero curvature weight, and the square's determinant integral
        // vanishes by symmetry.
        let report = strain_energy_report(&pair, &material).unwrap();
        assert!(report.rel_gap < 2e-3, "square gap {}", report.rel_gap);
        assert!(report.e_boundary_reciprocal.is_none());
    }

    #[test]
    fn analytic_derivative_formula_matches_the_frozen_slopes() {
        // d gamma / d mu = loop kappa u_nu^2 ds / int u^2 on the supported
        // ground mode, against independently computed slopes.
        let frozen = [
            (0.2, 15.08741863),
            (0.25, 14.82518178),
            (0.3, 14.56939966),
            (0.35, 14.31987256),
            (0.5, 13.60693155),
            (0.95, 11.74982332),
            (0.999, 11.57000035),
        ];
        for (mu, slope) in frozen {
            let mode = disk_supported(0, 1, 1.0, mu).unwrap();
            let trace = disk_mode_trace(&mode, supported_bc(mu), 256).unwrap();
            let formula = kappa_flux(&trace) / trace.m2;
            assert!((formula - slope).abs() < 5e-8, "mu {mu}: {formula} vs {slope}");
        }
    }

    #[test]
    fn poisson_sweep_tracks_stiffening_modes_on_the_disk() {
        let disk = DomainSpec::Disk { radius: 1.0 };
        let material = unit_material();
        let grid = default_mu_grid::<f64>();
        assert_eq!(grid.len(), 19);
        assert_relative_eq!(grid[5], 0.3, max_relative = 1e-15);

        let sweep = poisson_sweep(
            &disk,
            Resolution::Polar { radial: 100, angular: 16 },
            &grid,
            2,
            &material,
        )
        .unwrap();
        assert_eq!(sweep.domain, disk.label());
        assert_eq!(sweep.bridge_solves, 0, "smooth steps need no bisection");
        assert_eq!(sweep.modes.len(), 2);

        let ground = &sweep.modes[0];
        assert!(ground.strictly_increasing);
        assert!(ground.min_step > 0.5, "min step {}", ground.min_step);
        assert_relative_eq!(ground.gammas[5], 24.3556960724, max_relative = 2e-4);
        // The sweep approaches the hinged limit from below as mu -> 1.
        assert!(ground.gammas[18] < 33.4452398820);
        assert!(ground.gammas[18] > 32.5);
        assert!(33.4452398820 - ground.gammas[18] < 33.4452398820 - ground.gammas[9]);
        // Both derivative routes agree far inside the certification band.
        assert!(ground.formula_vs_central < 5e-4, "fvc {}", ground.formula_vs_central);
        for i in [3, 5, 9] {
            let central = ground.central_dgamma[i].unwrap();
            let formula = ground.formula_dgamma[i];
            assert!(
                (central - formula).abs() / central < 0.02,
                "mu {}: {central} vs {formula}",
                sweep.mu_grid[i]
            );
        }
        // Frequencies stiffen monotonically and match the closed form.
        assert!(ground.omegas.windows(2).all(|w| w[1] > w[0]));
        let d = material.with_poisson(grid[5]).unwrap().flexural_rigidity().unwrap();
        assert_relative_eq!(ground.omegas[5], (ground.gammas[5] * d).sqrt(), max_relative = 1e-13);

        let first = &sweep.modes[1];
        assert!(first.strictly_increasing);
        assert!(first.min_step > 1.0, "min step {}", first.min_step);
        assert_relative_eq!(first.gammas[5], 193.1589923977, max_relative = 5e-4);
        assert!(first.formula_vs_central < 5e-4, "fvc {}", first.formula_vs_central);
    }

    #[test]
    fn poisson_sweep_exercises_the_dense_route_on_the_ellipse() {
        let ellipse = DomainSpec::Ellipse { a: 1.5, b: 1.0 };
        let grid = [0.25, 0.3, 0.35];
        let sweep = poisson_sweep(
            &ellipse,
            Resolution::Polar { radial: 24, angular: 20 },
            &grid,
            2,
            &unit_material(),
        )
        .unwrap();
        assert_eq!(sweep.bridge_solves, 0);
        for mode in &sweep.modes {
            assert!(mode.strictly_increasing, "mode {} not increasing", mode.index);
            let central = mode.central_dgamma[1].unwrap();
            let formula = mode.formula_dgamma[1];
            assert!(
                (central - formula).abs() / central < 0.02,
                "mode {}: {central} vs {formula}",
                mode.index
            );
        }
        // The tracked ground value sits near its finer-resolution limit.
        assert_relative_eq!(sweep.modes[0].gammas[1], 13.54, max_relative = 5e-3);
    }

    #[test]
    fn poisson_sweep_rejects_malformed_requests() {
        let disk = DomainSpec::Disk { radius: 1.0 };
        let res = Resolution::Polar { radial: 25, angular: 8 };
        let material = unit_material();
        let grid = default_mu_grid::<f64>();

        assert!(matches!(
            poisson_sweep(&disk, res, &grid, 0, &material),
            Err(Error::OutOfRange { name: "n_modes", .. })
        ));
        assert!(matches!(
            poisson_sweep(&disk, res, &[0.3], 1, &material),
            Err(Error::OutOfRange { name: "mu_grid", .. })
        ));
        assert!(matches!(
            poisson_sweep(&disk, res, &[0.3, 0.3], 1, &material),
            Err(Error::OutOfRange { name: "mu_grid", .. })
        ));
        assert!(matches!(
            poisson_sweep(&disk, res, &[0.3, 1.2], 1, &material),
            Err(Error::OutOfRange { name: "poisson_ratio", .. })
        ));

        // Straight edges carry no curvature weight for the tracked formula.
        let square = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
        assert!(matches!(
            poisson_sweep(&square, Resolution::Tensor { nx: 16, ny: 16 }, &[0.25, 0.3], 1, &material),
            Err(Error::Unsupported(_))
        ));

        // A nonconvex star has negative curvature arcs: the sweep's
        // curvature-weighted machinery does not apply there.
        let star = DomainSpec::Star {
            profile: RadialProfile { constant: 1.0, cos: vec![0.0, 0.0, 0.35], sin: vec![] },
        };
        assert!(matches!(
            poisson_sweep(&star, res, &[0.25, 0.3], 1, &material),
            Err(Error::OutOfRange { name: "curvature", .. })
        ));
    }

    proptest! {
        #[test]
        fn rigidity_and_frequency_scale_as_power_laws(
            mu in 0.01f64..0.99,
            e in 0.1f64..100.0,
            h in 0.1f64..10.0,
            density in 0.1f64..100.0,
            gamma in 0.01f64..1e6,
        ) {
            let material = Material::new(mu, e, h, density).unwrap();
            let d = material.flexural_rigidity().unwrap();
            prop_assert!(d > 0.0);
            // Doubling the thickness multiplies the rigidity by exactly 8.
            let thick = Material::new(mu, e, 2.0 * h, density).unwrap();
            let ratio = thick.flexural_rigidity().unwrap() / d;
            prop_assert!((ratio - 8.0).abs() < 1e-12 * 8.0);
            // omega scales as the square root of gamma.
            let omega = natural_frequency(gamma, &material).unwrap();
            let omega4 = natural_frequency(4.0 * gamma, &material).unwrap();
            prop_assert!((omega4 - 2.0 * omega).abs() <= 1e-12 * omega4);
            prop_assert!((omega - (gamma * d / density).sqrt()).abs() <= 1e-12 * omega);
        }

        #[test]
        fn stiffer_poisson_coupling_always_raises_rigidity(
            lo in 0.01f64..0.98,
            gap in 0.001f64..0.5,
        ) {
            let hi = (lo + gap).min(0.995);
            let base = Material::new(lo, 2.5, 0.7, 1.3).unwrap();
            let d_lo = base.flexural_rigidity().unwrap();
            let d_hi = base.with_poisson(hi).unwrap().flexural_rigidity().unwrap();
            prop_assert!(d_hi > d_lo);
        }
    }
}
