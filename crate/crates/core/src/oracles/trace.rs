//! Analytic boundary traces of the oracle modes: the same per-node data the
//! discrete extraction produces, but sampled from closed-form fields.
//! Identities evaluated on these traces isolate pure quadrature error from
//! discretization error.

use std::f64::consts::PI;

use crate::discretize::BcKind;
use crate::error::Result;
use crate::geometry::{build_boundary, extend_c0, DomainSpec};
use crate::oracles::{rectangle_navier, DiskMode};
use crate::traces::{BoundaryTrace, TraceProvenance};

/// Boundary trace of a separated disk mode under the given condition, using
/// the cos variant of the angular factor. `n_nodes` boundary samples give
/// spectral (trapezoid) quadrature accuracy.
pub fn disk_mode_trace(
    mode: &DiskMode,
    bc: BcKind<f64>,
    n_nodes: usize,
) -> Result<BoundaryTrace<f64>> {
    let radius = mode.radius;
    let domain = DomainSpec::Disk { radius };
    let nodes = build_boundary(&domain, n_nodes)?;
    let m = mode.m as f64;

    let w_b = mode.value(radius);
    let w_nu = mode.deriv(radius);
    let w_nunu = mode.second(radius);
    let lap_b = mode.laplacian(radius);
    let lap_nu = mode.laplacian_deriv(radius);

    let n = nodes.len();
    let mut u = Vec::with_capacity(n);
    let mut u_nu = Vec::with_capacity(n);
    let mut u_nunu = Vec::with_capacity(n);
    let mut lap = Vec::with_capacity(n);
    let mut dlap_dnu = Vec::with_capacity(n);
    let mut x_dot_grad = Vec::with_capacity(n);
    for node in &nodes {
        let ang = (m * node.param).cos();
        u.push(w_b * ang);
        u_nu.push(w_nu * ang);
        u_nunu.push(w_nunu * ang);
        lap.push(lap_b * ang);
        dlap_dnu.push(lap_nu * ang);
        x_dot_grad.push(node.x_dot_nu * w_nu * ang);
    }

    let c0 = match &bc {
        BcKind::Supported { mu, extension } => Some(extend_c0(*mu, &nodes, *extension)?),
        _ => None,
    };

    let ang_l2 = mode.angular_l2();
    Ok(BoundaryTrace {
        provenance: TraceProvenance::Analytic {
            oracle: format!("disk.m{}n{}.{}", mode.m, mode.n, bc.label()),
        },
        bc,
        nodes,
        u,
        u_nu: u_nu.clone(),
        u_nu_onesided: u_nu,
        u_nunu,
        lap: lap.clone(),
        lap_extrapolated: lap,
        dlap_dnu,
        x_dot_grad,
        c0,
        eigenvalue: mode.alpha,
        m2: mode.radial_l2() * ang_l2,
        int_lap2: mode.laplacian_l2() * ang_l2,
        area: PI * radius * radius,
    })
}

/// Boundary trace of the hinged rectangle product mode with half-wave counts
/// `(p, q)` on the centered rectangle, mass-normalized. `n_nodes` must be a
/// positive multiple of 4 (Gauss nodes per edge).
pub fn rectangle_navier_trace(
    a: f64,
    b: f64,
    p: usize,
    q: usize,
    n_nodes: usize,
) -> Result<BoundaryTrace<f64>> {
    let alpha = rectangle_navier(a, b, p, q)?;
    let domain = DomainSpec::Rectangle { a, b };
    let nodes = build_boundary(&domain, n_nodes)?;

    let kx = p as f64 * PI / a;
    let ky = q as f64 * PI / b;
    let eta = kx * kx + ky * ky;
    let amp = 2.0 / (a * b).sqrt();
    let sx = move |x: f64| (kx * (x + 0.5 * a)).sin();
    let sy = move |y: f64| (ky * (y + 0.5 * b)).sin();
    let dsx = move |x: f64| kx * (kx * (x + 0.5 * a)).cos();
    let dsy = move |y: f64| ky * (ky * (y + 0.5 * b)).cos();

    let n = nodes.len();
    let mut u = Vec::with_capacity(n);
    let mut u_nu = Vec::with_capacity(n);
    let mut u_nunu = Vec::with_capacity(n);
    let mut lap = Vec::with_capacity(n);
    let mut dlap_dnu = Vec::with_capacity(n);
    let mut x_dot_grad = Vec::with_capacity(n);
    for node in &nodes {
        let [x, y] = node.position;
        let [nx, ny] = node.normal;
        let val = amp * sx(x) * sy(y);
        let ux = amp * dsx(x) * sy(y);
        let uy = amp * sx(x) * dsy(y);
        // Pure product mode: u_xx = -kx^2 u, u_yy = -ky^2 u, u_xy = ux uy / u
        // is never needed on edges where one factor vanishes.
        let uxx = -kx * kx * val;
        let uyy = -ky * ky * val;
        let un = ux * nx + uy * ny;
        u.push(val);
        u_nu.push(un);
        u_nunu.push(uxx * nx * nx + uyy * ny * ny);
        lap.push(-eta * val);
        dlap_dnu.push(-eta * un);
        x_dot_grad.push(x * ux + y * uy);
    }

    Ok(BoundaryTrace {
        provenance: TraceProvenance::Analytic {
            oracle: format!("rect.p{p}q{q}.navier"),
        },
        bc: BcKind::Navier,
        nodes,
        u,
        u_nu: u_nu.clone(),
        u_nu_onesided: u_nu,
        u_nunu,
        lap: lap.clone(),
        lap_extrapolated: lap,
        dlap_dnu,
        x_dot_grad,
        c0: None,
        eigenvalue: alpha,
        m2: 1.0,
        int_lap2: eta * eta,
        area: a * b,
    })
}
