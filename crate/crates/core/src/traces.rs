//! Boundary traces: the per-node boundary data every boundary-integral
//! identity and energy form in the crate consumes.
//!
//! A trace carries two versions of each quantity the discretization imposes:
//! the imposed value (what the operator row enforced) and an independent
//! one-sided reconstruction from interior values only. The gap between them
//! is the honest consistency check of the discrete boundary condition; for
//! analytic traces the two coincide by construction.

use crate::discretize::{BcKind, GridHandle};
use crate::eigensolve::EigenPair;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryNode, C0Field};
use crate::grid::{PolarGrid, RectGrid, StencilOrder};
use crate::scalar::Scalar;

/// Where a trace came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceProvenance {
    /// Extracted from a discrete eigenpair; the label records the grid.
    Discrete { resolution: String },
    /// Sampled from a semi-analytic mode; the label names it.
    Analytic { oracle: String },
}

impl TraceProvenance {
    pub fn label(&self) -> &str {
        match self {
            TraceProvenance::Discrete { resolution } => resolution,
            TraceProvenance::Analytic { oracle } => oracle,
        }
    }
}

/// Boundary data of one eigenfunction (or manufactured field), sampled on
/// quadrature nodes, plus the volume scalars the identities divide by.
///
/// Conventions: `u` vanishes on the boundary for every condition handled
/// here, so the tangential derivative vanishes and `x . grad u` reduces to
/// `(x . nu) u_nu`; likewise `u_nunu = lap - kappa * u_nu` on smooth
/// boundaries and `u_nunu = lap` on straight edges.
#[derive(Clone, Debug)]
pub struct BoundaryTrace<T: Scalar> {
    pub provenance: TraceProvenance,
    pub bc: BcKind<T>,
    pub nodes: Vec<BoundaryNode<T>>,
    /// Boundary values of the deflection (zero for all conditions here).
    pub u: Vec<T>,
    /// Outward normal derivative: zero (imposed) for the clamped condition,
    /// one-sided otherwise.
    pub u_nu: Vec<T>,
    /// One-sided normal derivative regardless of the condition; for the
    /// clamped condition this measures how well the discrete mode honors
    /// `u_nu = 0`.
    pub u_nu_onesided: Vec<T>,
    /// Second outward normal derivative.
    pub u_nunu: Vec<T>,
    /// Boundary Laplacian as the operator imposed/produced it.
    pub lap: Vec<T>,
    /// Boundary Laplacian reconstructed from interior values only.
    pub lap_extrapolated: Vec<T>,
    /// Outward normal derivative of the Laplacian (the flux trace).
    pub dlap_dnu: Vec<T>,
    /// `x . grad u` on the boundary.
    pub x_dot_grad: Vec<T>,
    /// Supported-condition coefficient data when the condition carries one.
    pub c0: Option<C0Field<T>>,
    pub eigenvalue: T,
    /// `int u^2` over the domain.
    pub m2: T,
    /// `int (Delta u)^2` over the domain.
    pub int_lap2: T,
    /// Domain area under the producing quadrature.
    pub area: T,
}

impl<T: Scalar> BoundaryTrace<T> {
    /// Boundary integral `loop f ds` of a per-node integrand.
    pub fn loop_ds<F: Fn(usize, &BoundaryNode<T>) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, node)| acc + node.arc_weight * f(k, node))
    }

    /// Largest gap between the imposed boundary Laplacian and its
    /// interior-only reconstruction, relative to the trace's Laplacian
    /// scale. Zero for analytic traces.
    pub fn lap_consistency(&self) -> T {
        let scale = self.lap_scale();
        let mut sup = T::zero();
        for k in 0..self.nodes.len() {
            sup = sup.max((self.lap[k] - self.lap_extrapolated[k]).abs());
        }
        sup / scale
    }

    /// Natural magnitude of the boundary Laplacian of a mode with this mass
    /// and eigenvalue: `sqrt(alpha m2 / area)`. Used to normalize condition
    /// violations so margins compare across domains and modes.
    pub fn lap_scale(&self) -> T {
        (self.eigenvalue.abs() * self.m2 / self.area).sqrt().max(T::fl(1e-300))
    }

    /// Natural magnitude of the normal derivative: `sqrt(m2/area) alpha^(1/4)`.
    pub fn u_nu_scale(&self) -> T {
        ((self.m2 / self.area).sqrt() * self.eigenvalue.abs().sqrt().sqrt())
            .max(T::fl(1e-300))
    }

    /// Normalized sup violation of `target` by this trace, measured from the
    /// interior-only reconstructions (never the imposed values). Vanishing
    /// violation of the trace's own condition certifies the discretization;
    /// a large violation of a different condition is a uniqueness margin.
    pub fn bc_violation(&self, target: &BcKind<T>) -> Result<T> {
        let n = self.nodes.len();
        match target {
            BcKind::Dirichlet => {
                let mut sup = T::zero();
                for k in 0..n {
                    sup = sup.max(self.u_nu_onesided[k].abs());
                }
                Ok(sup / self.u_nu_scale())
            }
            BcKind::Navier => {
                let mut sup = T::zero();
                for k in 0..n {
                    sup = sup.max(self.lap_extrapolated[k].abs());
                }
                Ok(sup / self.lap_scale())
            }
            BcKind::Supported { mu, .. } => {
                let one_minus = T::one() - *mu;
                let mut sup = T::zero();
                for (k, node) in self.nodes.iter().enumerate() {
                    let kappa = node.curvature.ok_or_else(|| {
                        Error::Unsupported(
                            "supported-condition violation needs a curvature; \
                             polygon edges have none"
                                .into(),
                        )
                    })?;
                    let c0 = one_minus * kappa;
                    let v = self.lap_extrapolated[k] - c0 * self.u_nu_onesided[k];
                    sup = sup.max(v.abs());
                }
                Ok(sup / self.lap_scale())
            }
        }
    }

    /// Violation of the trace's own condition (honest discretization check).
    pub fn bc_residual(&self) -> Result<T> {
        let bc = self.bc;
        self.bc_violation(&bc)
    }
}

/// Extract the boundary trace of a computed eigenpair.
pub fn extract_trace<T: Scalar>(pair: &EigenPair<T>) -> Result<BoundaryTrace<T>> {
    match &pair.grid {
        GridHandle::Polar(g) => polar_trace(pair, g),
        GridHandle::Rect(g) => rect_trace(pair, g),
    }
}

fn polar_trace<T: Scalar>(
    pair: &EigenPair<T>,
    grid: &PolarGrid<T>,
) -> Result<BoundaryTrace<T>> {
    let nt = grid.n_theta;
    let f = &pair.field;
    let sig = &pair.sigma;

    let u: Vec<T> = (0..nt).map(|j| f.boundary[j]).collect();
    let us = grid.boundary_ds(f, StencilOrder::Three);
    let u_nu_onesided: Vec<T> = (0..nt).map(|j| grid.normal_metric(j) * us[j]).collect();
    let u_nu: Vec<T> = match pair.bc {
        BcKind::Dirichlet => vec![T::zero(); nt],
        _ => u_nu_onesided.clone(),
    };

    let lap: Vec<T> = (0..nt).map(|j| sig.boundary[j]).collect();
    let lap_extrapolated = grid.boundary_extrapolated(sig);

    let sig_s = grid.boundary_ds(sig, StencilOrder::Three);
    let sig_t = grid.boundary_angular_deriv(sig.boundary.as_slice());
    let dlap_dnu: Vec<T> = (0..nt)
        .map(|j| grid.normal_deriv_from_parts(j, sig_s[j], sig_t[j]))
        .collect();

    let mut u_nunu = Vec::with_capacity(nt);
    let mut x_dot_grad = Vec::with_capacity(nt);
    for (j, node) in grid.boundary.iter().enumerate() {
        let kappa = node
            .curvature
            .expect("smooth boundaries carry curvatures");
        u_nunu.push(lap[j] - kappa * u_nu[j]);
        x_dot_grad.push(node.x_dot_nu * u_nu[j]);
    }

    Ok(BoundaryTrace {
        provenance: TraceProvenance::Discrete {
            resolution: format!("r{}.a{}", grid.rings + 1, nt),
        },
        bc: pair.bc,
        nodes: grid.boundary.clone(),
        u,
        u_nu,
        u_nu_onesided,
        u_nunu,
        lap,
        lap_extrapolated,
        dlap_dnu,
        x_dot_grad,
        c0: pair.c0.clone(),
        eigenvalue: pair.value,
        m2: pair.mass(),
        int_lap2: pair.int_lap_sq(),
        area: pair.grid.area(),
    })
}

fn rect_trace<T: Scalar>(
    pair: &EigenPair<T>,
    grid: &RectGrid<T>,
) -> Result<BoundaryTrace<T>> {
    let f = &pair.field;
    let sig = &pair.sigma;
    let nodes = rect_boundary_nodes(grid);
    let n = nodes.len();

    let u: Vec<T> = (0..n).map(|k| f.boundary[k]).collect();
    let u_nu_onesided = grid.edge_normal_derivs(f, StencilOrder::Three);
    let u_nu: Vec<T> = match pair.bc {
        BcKind::Dirichlet => vec![T::zero(); n],
        _ => u_nu_onesided.clone(),
    };

    let lap: Vec<T> = (0..n).map(|k| sig.boundary[k]).collect();
    let lap_extrapolated = grid.edge_extrapolated(sig);
    let dlap_dnu = grid.edge_normal_derivs(sig, StencilOrder::Three);

    // Straight edges: no curvature term, u_nunu is the boundary Laplacian.
    let u_nunu = lap.clone();
    let x_dot_grad: Vec<T> = nodes
        .iter()
        .enumerate()
        .map(|(k, node)| node.x_dot_nu * u_nu[k])
        .collect();

    Ok(BoundaryTrace {
        provenance: TraceProvenance::Discrete {
            resolution: format!("nx{}.ny{}", grid.nx, grid.ny),
        },
        bc: pair.bc,
        nodes,
        u,
        u_nu,
        u_nu_onesided,
        u_nunu,
        lap,
        lap_extrapolated,
        dlap_dnu,
        x_dot_grad,
        c0: None,
        eigenvalue: pair.value,
        m2: pair.mass(),
        int_lap2: pair.int_lap_sq(),
        area: pair.grid.area(),
    })
}

/// Boundary nodes of the tensor grid in the edge ordering of
/// `Field::boundary`, with trapezoid arc weights. Integrands integrated on
/// these nodes must vanish toward the corners (every trace quantity here
/// does, since the deflection vanishes along both edges of a corner).
pub fn rect_boundary_nodes<T: Scalar>(grid: &RectGrid<T>) -> Vec<BoundaryNode<T>> {
    let half = T::fl(0.5);
    let (a, b) = (grid.a, grid.b);
    let (ha, hb) = (half * a, half * b);
    let perimeter = T::fl(2.0) * (a + b);
    grid.edges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let [x, y] = e.position;
            // CCW tangent and cumulative arclength from the corner (ha, -hb).
            let (tangent, arclength): ([T; 2], T) = match e.edge {
                0 => ([T::zero(), T::one()], y + hb),
                1 => ([-T::one(), T::zero()], b + (ha - x)),
                2 => ([T::zero(), -T::one()], a + b + (hb - y)),
                _ => ([T::one(), T::zero()], a + T::fl(2.0) * b + (x + ha)),
            };
            BoundaryNode {
                index: k,
                param: arclength / perimeter,
                arclength,
                position: e.position,
                normal: e.normal,
                x_dot_nu: e.x_dot_nu,
                x_dot_tau: x * tangent[0] + y * tangent[1],
                curvature: None,
                arc_weight: e.arc_weight,
            }
        })
        .collect()
}
