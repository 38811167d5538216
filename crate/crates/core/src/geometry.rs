//! Planar domains, boundary sampling, and curvature-derived boundary data.
//!
//! Smooth domains (disk, ellipse, star) are described in polar form by a
//! radius function `rho(theta)` that must stay positive, which is exactly the
//! star-shapedness the solvers rely on. The rectangle is kept as an explicit
//! polygon because its boundary has no curvature and is sampled per edge.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Truncated Fourier series for a star-shaped radius function:
/// `rho(t) = constant + sum_j cos[j-1] * cos(j t) + sin[j-1] * sin(j t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile<T> {
    pub constant: T,
    pub cos: Vec<T>,
    pub sin: Vec<T>,
}

impl<T: Scalar> RadialProfile<T> {
    /// Radius and its first two parameter derivatives at angle `t`.
    pub fn eval(&self, t: T) -> (T, T, T) {
        let mut rho = self.constant;
        let mut d1 = T::zero();
        let mut d2 = T::zero();
        let terms = self.cos.len().max(self.sin.len());
        for idx in 0..terms {
            let j = T::of_usize(idx + 1);
            let (s, c) = (j * t).sin_cos();
            if let Some(&a) = self.cos.get(idx) {
                rho += a * c;
                d1 -= a * j * s;
                d2 -= a * j * j * c;
            }
            if let Some(&b) = self.sin.get(idx) {
                rho += b * s;
                d1 += b * j * c;
                d2 -= b * j * j * s;
            }
        }
        (rho, d1, d2)
    }
}

/// Domain of the plate problem. Smooth kinds are star-shaped about the
/// origin; the rectangle is centered at the origin so that `x . nu > 0`
/// holds on every edge, which the stretching identities require.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec<T> {
    Disk { radius: T },
    /// Semi-axes `a` along x and `b` along y.
    Ellipse { a: T, b: T },
    Star { profile: RadialProfile<T> },
    /// Full side lengths `a` along x and `b` along y.
    Rectangle { a: T, b: T },
}

impl<T: Scalar> DomainSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: T| -> Result<()> {
            if v > T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{name} = {} must be positive", v.f64())))
            }
        };
        match self {
            DomainSpec::Disk { radius } => positive("radius", *radius),
            DomainSpec::Ellipse { a, b } => {
                positive("semi-axis a", *a)?;
                positive("semi-axis b", *b)
            }
            DomainSpec::Star { profile } => {
                positive("constant term", profile.constant)?;
                // Positivity of rho itself is checked pointwise in build_boundary.
                Ok(())
            }
            DomainSpec::Rectangle { a, b } => {
                positive("side a", *a)?;
                positive("side b", *b)
            }
        }
    }

    /// True for boundaries with a well-defined curvature everywhere.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, DomainSpec::Rectangle { .. })
    }

    /// Radius function and its first two derivatives at angle `t`.
    ///
    /// Panics on `Rectangle`, which has no polar description; callers must
    /// check `is_smooth` first.
    pub fn radial(&self, t: T) -> (T, T, T) {
        match self {
            DomainSpec::Disk { radius } => (*radius, T::zero(), T::zero()),
            DomainSpec::Ellipse { a, b } => {
                let (s, c) = t.sin_cos();
                let w2 = (*b * c) * (*b * c) + (*a * s) * (*a * s);
                let d = T::fl(2.0) * t;
                let w2p = (*a * *a - *b * *b) * d.sin();
                let w2pp = T::fl(2.0) * (*a * *a - *b * *b) * d.cos();
                let ab = *a * *b;
                let half = T::fl(0.5);
                let rho = ab / w2.sqrt();
                let w2_32 = w2 * w2.sqrt();
                let rho_p = -half * ab * w2p / w2_32;
                let rho_pp = T::fl(0.75) * ab * w2p * w2p / (w2_32 * w2)
                    - half * ab * w2pp / w2_32;
                (rho, rho_p, rho_pp)
            }
            DomainSpec::Star { profile } => profile.eval(t),
            DomainSpec::Rectangle { .. } => {
                panic!("rectangle has no polar radius; check is_smooth() first")
            }
        }
    }

    /// Short human-readable tag used in reports, e.g. `disk(1)` or `rect(1,2)`.
    pub fn label(&self) -> String {
        fn num(x: f64) -> String {
            if x == x.trunc() && x.abs() < 1.0e6 {
                format!("{}", x as i64)
            } else {
                format!("{x}")
            }
        }
        match self {
            DomainSpec::Disk { radius } => format!("disk({})", num(radius.f64())),
            DomainSpec::Ellipse { a, b } => {
                format!("ellipse({},{})", num(a.f64()), num(b.f64()))
            }
            DomainSpec::Star { profile } => {
                let mut parts = vec![num(profile.constant.f64())];
                for (i, &a) in profile.cos.iter().enumerate() {
                    if a != T::zero() {
                        parts.push(format!("cos{}={}", i + 1, num(a.f64())));
                    }
                }
                for (i, &b) in profile.sin.iter().enumerate() {
                    if b != T::zero() {
                        parts.push(format!("sin{}={}", i + 1, num(b.f64())));
                    }
                }
                format!("star({})", parts.join(","))
            }
            DomainSpec::Rectangle { a, b } => {
                format!("rect({},{})", num(a.f64()), num(b.f64()))
            }
        }
    }
}

/// One quadrature node on the domain boundary with the geometric data every
/// boundary integral in the crate consumes.
#[derive(Clone, Debug)]
pub struct BoundaryNode<T> {
    pub index: usize,
    /// Parameter along the boundary: the polar angle for smooth domains, the
    /// arclength fraction in [0,1) for the rectangle.
    pub param: T,
    /// Cumulative arclength from the starting node.
    pub arclength: T,
    pub position: [T; 2],
    /// Outward unit normal.
    pub normal: [T; 2],
    /// `x . nu`, positive on star-shaped boundaries about the origin.
    pub x_dot_nu: T,
    /// `x . tau` with `tau` the counterclockwise unit tangent.
    pub x_dot_tau: T,
    /// Signed curvature (positive for convex boundaries); `None` on polygon
    /// edges where it is undefined.
    pub curvature: Option<T>,
    /// Quadrature weight approximating the arclength element `ds`.
    pub arc_weight: T,
}

/// Sample the boundary of `domain` with `m` quadrature nodes.
///
/// Smooth domains get the equispaced-angle trapezoid rule, which is
/// spectrally accurate for periodic integrands. The rectangle gets `m/4`
/// Gauss-Legendre nodes per edge (`m` must be a positive multiple of 4), so
/// corners are never sampled. Fails with `NonStarShaped` if the radius
/// function is not strictly positive at a sample.
pub fn build_boundary<T: Scalar>(domain: &DomainSpec<T>, m: usize) -> Result<Vec<BoundaryNode<T>>> {
    domain.validate()?;
    match domain {
        DomainSpec::Rectangle { a, b } => rectangle_boundary(*a, *b, m),
        _ => smooth_boundary(domain, m),
    }
}

fn smooth_boundary<T: Scalar>(domain: &DomainSpec<T>, m: usize) -> Result<Vec<BoundaryNode<T>>> {
    if m < 4 {
        return Err(Error::InvalidDomain(format!(
            "boundary sampling needs at least 4 nodes, got {m}"
        )));
    }
    let dt = T::two_pi() / T::of_usize(m);
    let mut nodes = Vec::with_capacity(m);
    let mut speeds = Vec::with_capacity(m);
    for j in 0..m {
        let t = dt * T::of_usize(j);
        let (rho, rho_p, rho_pp) = domain.radial(t);
        if rho <= T::zero() {
            return Err(Error::NonStarShaped {
                theta: t.f64(),
                rho: rho.f64(),
            });
        }
        let (s, c) = t.sin_cos();
        let speed = (rho * rho + rho_p * rho_p).sqrt();
        let normal = [(rho * c + rho_p * s) / speed, (rho * s - rho_p * c) / speed];
        let curvature =
            (rho * rho + T::fl(2.0) * rho_p * rho_p - rho * rho_pp) / (speed * speed * speed);
        speeds.push(speed);
        nodes.push(BoundaryNode {
            index: j,
            param: t,
            arclength: T::zero(),
            position: [rho * c, rho * s],
            normal,
            x_dot_nu: rho * rho / speed,
            x_dot_tau: rho * rho_p / speed,
            curvature: Some(curvature),
            arc_weight: speed * dt,
        });
    }
    // Cumulative arclength by the trapezoid rule between consecutive samples.
    let half = T::fl(0.5);
    let mut s_acc = T::zero();
    for j in 1..m {
        s_acc += half * (speeds[j - 1] + speeds[j]) * dt;
        nodes[j].arclength = s_acc;
    }
    Ok(nodes)
}

fn rectangle_boundary<T: Scalar>(a: T, b: T, m: usize) -> Result<Vec<BoundaryNode<T>>> {
    if m < 8 || m % 4 != 0 {
        return Err(Error::InvalidDomain(format!(
            "rectangle boundary sampling needs a node count that is a multiple of 4 \
             and at least 8, got {m}"
        )));
    }
    let q = m / 4;
    let (gx, gw) = gauss_legendre::<T>(q);
    let half = T::fl(0.5);
    let ha = half * a;
    let hb = half * b;
    // Counterclockwise edge order: right, top, left, bottom.
    // Each entry: (start point, edge vector, outward normal, x . nu).
    let edges: [([T; 2], [T; 2], [T; 2], T); 4] = [
        ([ha, -hb], [T::zero(), b], [T::one(), T::zero()], ha),
        ([ha, hb], [-a, T::zero()], [T::zero(), T::one()], hb),
        ([-ha, hb], [T::zero(), -b], [-T::one(), T::zero()], ha),
        ([-ha, -hb], [a, T::zero()], [T::zero(), -T::one()], hb),
    ];
    let perimeter = T::fl(2.0) * (a + b);
    let mut nodes = Vec::with_capacity(m);
    let mut s_edge_start = T::zero();
    for (start, along, normal, xdn) in edges {
        let len = (along[0] * along[0] + along[1] * along[1]).sqrt();
        for k in 0..q {
            // Map Gauss node from [-1,1] to the edge parameter [0,1].
            let f = half * (gx[k] + T::one());
            let position = [start[0] + f * along[0], start[1] + f * along[1]];
            let tangent = [along[0] / len, along[1] / len];
            let arclength = s_edge_start + f * len;
            nodes.push(BoundaryNode {
                index: nodes.len(),
                param: arclength / perimeter,
                arclength,
                position,
                normal,
                x_dot_nu: xdn,
                x_dot_tau: position[0] * tangent[0] + position[1] * tangent[1],
                curvature: None,
                arc_weight: half * len * gw[k],
            });
        }
        s_edge_start += len;
    }
    Ok(nodes)
}

/// Gauss-Legendre nodes and weights on [-1, 1], exact for polynomials of
/// degree `2q - 1`. Computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre<T: Scalar>(q: usize) -> (Vec<T>, Vec<T>) {
    assert!(q >= 1, "need at least one Gauss node");
    let mut xs = vec![T::zero(); q];
    let mut ws = vec![T::zero(); q];
    let qf = q as f64;
    for k in 0..q {
        // Tricomi's initial guess for the k-th root of P_q.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (qf + 0.5)).cos();
        for _ in 0..64 {
            // Legendre value and derivative at x via the three-term recurrence.
            let (mut p0, mut p1) = (1.0_f64, x);
            for n in 2..=q {
                let nf = n as f64;
                let p2 = ((2.0 * nf - 1.0) * x * p1 - (nf - 1.0) * p0) / nf;
                p0 = p1;
                p1 = p2;
            }
            let dp = qf * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1.0e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0_f64, x);
        for n in 2..=q {
            let nf = n as f64;
            let p2 = ((2.0 * nf - 1.0) * x * p1 - (nf - 1.0) * p0) / nf;
            p0 = p1;
            p1 = p2;
        }
        let dp = qf * (x * p1 - p0) / (x * x - 1.0);
        xs[k] = T::fl(x);
        ws[k] = T::fl(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

/// How the boundary coefficient `c0 = (1 - mu) * kappa` of the supported
/// condition is extended off the boundary, which fixes its normal derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum C0Extension {
    /// Extend along inward parallel curves, where curvature evolves as
    /// `kappa / (1 - t kappa)`; gives `d c0 / d nu = -(1 - mu) kappa^2`.
    ParallelCurve,
    /// Extend as a constant along the normal; `d c0 / d nu = 0`.
    Constant,
}

/// The supported-condition coefficient `c0` sampled on boundary nodes,
/// together with the normal derivative implied by the chosen extension.
#[derive(Clone, Debug)]
pub struct C0Field<T> {
    pub mu: T,
    pub extension: C0Extension,
    pub values: Vec<T>,
    pub normal_derivative: Vec<T>,
}

/// Build `c0 = (1 - mu) * kappa` on the given boundary nodes.
///
/// Fails if `mu` is outside the open interval (0, 1) or if any node lacks a
/// curvature (polygon edges), since the supported condition is only posed on
/// smooth boundaries here.
pub fn extend_c0<T: Scalar>(
    mu: T,
    nodes: &[BoundaryNode<T>],
    extension: C0Extension,
) -> Result<C0Field<T>> {
    check_poisson_ratio(mu)?;
    let one_minus = T::one() - mu;
    let mut values = Vec::with_capacity(nodes.len());
    let mut normal_derivative = Vec::with_capacity(nodes.len());
    for node in nodes {
        let kappa = node.curvature.ok_or_else(|| {
            Error::Unsupported(
                "supported boundary data needs a curvature; polygon edges have none".into(),
            )
        })?;
        values.push(one_minus * kappa);
        normal_derivative.push(match extension {
            C0Extension::ParallelCurve => -one_minus * kappa * kappa,
            C0Extension::Constant => T::zero(),
        });
    }
    Ok(C0Field {
        mu,
        extension,
        values,
        normal_derivative,
    })
}

/// `c0` on the inward parallel curve at distance `t_inward` from `node`,
/// using the parallel-curve evolution of curvature. Fails once the offset
/// reaches the focal distance `1/kappa`, where the parallel curve degenerates.
pub fn c0_at_offset<T: Scalar>(mu: T, node: &BoundaryNode<T>, t_inward: T) -> Result<T> {
    check_poisson_ratio(mu)?;
    let kappa = node.curvature.ok_or_else(|| {
        Error::Unsupported("offset curvature needs a smooth boundary".into())
    })?;
    let denom = T::one() - t_inward * kappa;
    if denom <= T::fl(1.0e-12) {
        return Err(Error::Numeric(format!(
            "offset {} reaches the focal set of a boundary point with curvature {}",
            t_inward.f64(),
            kappa.f64()
        )));
    }
    Ok((T::one() - mu) * kappa / denom)
}

pub(crate) fn check_poisson_ratio<T: Scalar>(mu: T) -> Result<()> {
    if mu > T::zero() && mu < T::one() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "mu",
            value: mu.f64(),
            expected: "open interval (0, 1)",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn disk(r: f64) -> DomainSpec<f64> {
        DomainSpec::Disk { radius: r }
    }

    fn ellipse(a: f64, b: f64) -> DomainSpec<f64> {
        DomainSpec::Ellipse { a, b }
    }

    fn wiggly_star() -> DomainSpec<f64> {
        DomainSpec::Star {
            profile: RadialProfile {
                constant: 1.0,
                cos: vec![0.0, 0.0, 0.2],
                sin: vec![0.0, -0.1],
            },
        }
    }

    #[test]
    fn ellipse_curvature_hits_axis_values() {
        // kappa = a/b^2 at the end of the major axis and b/a^2 on the minor.
        let dom = ellipse(2.0, 1.0);
        let nodes = build_boundary(&dom, 8).unwrap();
        assert_relative_eq!(nodes[0].curvature.unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(nodes[2].curvature.unwrap(), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn disk_boundary_geometry_is_exact() {
        let r = 1.7;
        let nodes = build_boundary(&disk(r), 16).unwrap();
        for n in &nodes {
            assert_relative_eq!(n.x_dot_nu, r, max_relative = 1e-14);
            assert_abs_diff_eq!(n.x_dot_tau, 0.0, epsilon = 1e-14);
            assert_relative_eq!(n.curvature.unwrap(), 1.0 / r, max_relative = 1e-14);
            let norm = (n.normal[0].powi(2) + n.normal[1].powi(2)).sqrt();
            assert_relative_eq!(norm, 1.0, max_relative = 1e-14);
        }
        let total: f64 = nodes.iter().map(|n| n.arc_weight).sum();
        assert_relative_eq!(total, std::f64::consts::TAU * r, max_relative = 1e-14);
    }

    #[test]
    fn turning_number_integral_is_spectrally_accurate() {
        // The total curvature of a simple closed curve is 2*pi. On the wiggly
        // star the trapezoid rule should be essentially exact already at
        // moderate node counts and not degrade under refinement.
        let dom = wiggly_star();
        let err = |m: usize| -> f64 {
            let nodes = build_boundary(&dom, m).unwrap();
            let total: f64 = nodes.iter().map(|n| n.curvature.unwrap() * n.arc_weight).sum();
            (total - std::f64::consts::TAU).abs()
        };
        let coarse = err(64);
        let fine = err(128);
        assert!(coarse < 1e-5, "coarse turning-number error {coarse:.3e}");
        assert!(fine < 1e-11, "fine turning-number error {fine:.3e}");
        assert!(fine < coarse, "refinement made it worse: {fine:.3e} vs {coarse:.3e}");
    }

    #[test]
    fn boundary_flux_of_position_is_twice_the_area() {
        // Divergence theorem: integral of x . nu over the boundary equals
        // 2 * area. Exercised on the rectangle where the two sides of the
        // identity are computed by genuinely different quadratures.
        let nodes = build_boundary(&DomainSpec::Rectangle { a: 1.5, b: 0.8 }, 24).unwrap();
        let flux: f64 = nodes.iter().map(|n| n.x_dot_nu * n.arc_weight).sum();
        assert_relative_eq!(flux, 2.0 * 1.5 * 0.8, max_relative = 1e-14);
        let perimeter: f64 = nodes.iter().map(|n| n.arc_weight).sum();
        assert_relative_eq!(perimeter, 2.0 * (1.5 + 0.8), max_relative = 1e-14);
    }

    #[test]
    fn rectangle_nodes_avoid_corners_and_carry_no_curvature() {
        let nodes = build_boundary(&DomainSpec::<f64>::Rectangle { a: 1.0, b: 1.0 }, 16).unwrap();
        assert_eq!(nodes.len(), 16);
        for n in &nodes {
            assert!(n.curvature.is_none());
            assert!(n.position[0].abs() < 0.5 || n.position[1].abs() < 0.5);
            assert!(n.x_dot_nu > 0.0);
        }
        assert!(build_boundary(&DomainSpec::Rectangle { a: 1.0, b: 1.0 }, 18).is_err());
    }

    #[test]
    fn non_star_shaped_profile_is_rejected() {
        let dom = DomainSpec::Star {
            profile: RadialProfile {
                constant: 1.0,
                cos: vec![1.2],
                sin: vec![],
            },
        };
        match build_boundary(&dom, 32) {
            Err(Error::NonStarShaped { rho, .. }) => assert!(rho <= 0.0),
            other => panic!("expected NonStarShaped, got {other:?}"),
        }
    }

    #[test]
    fn gauss_rule_integrates_high_degree_monomials() {
        let q = 6;
        let (xs, ws) = gauss_legendre::<f64>(q);
        for k in 0..=(2 * q - 1) {
            let got: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * x.powi(k as i32)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn c0_matches_classical_supported_coefficient_on_disk() {
        let nodes = build_boundary(&disk(2.0), 8).unwrap();
        let c0 = extend_c0(0.3, &nodes, C0Extension::ParallelCurve).unwrap();
        for &v in &c0.values {
            assert_relative_eq!(v, 0.7 / 2.0, max_relative = 1e-14);
        }
        for &d in &c0.normal_derivative {
            assert_relative_eq!(d, -0.7 / 4.0, max_relative = 1e-14);
        }
        let constant = extend_c0(0.3, &nodes, C0Extension::Constant).unwrap();
        assert!(constant.normal_derivative.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn c0_offset_derivative_matches_parallel_curve_extension() {
        let nodes = build_boundary(&ellipse(1.5, 1.0), 16).unwrap();
        let mu = 0.3;
        let c0 = extend_c0(mu, &nodes, C0Extension::ParallelCurve).unwrap();
        let tau = 1e-6;
        for (j, node) in nodes.iter().enumerate() {
            let plus = c0_at_offset(mu, node, tau).unwrap();
            let minus = c0_at_offset(mu, node, -tau).unwrap();
            // d/dnu = -d/dt_inward.
            let fd = -(plus - minus) / (2.0 * tau);
            assert_relative_eq!(fd, c0.normal_derivative[j], max_relative = 1e-7);
        }
    }

    #[test]
    fn c0_offset_fails_past_the_focal_distance() {
        let nodes = build_boundary(&disk(1.0), 8).unwrap();
        assert!(c0_at_offset(0.3, &nodes[0], 0.5).is_ok());
        assert!(c0_at_offset(0.3, &nodes[0], 1.0).is_err());
    }

    #[test]
    fn poisson_ratio_bounds_are_enforced() {
        let nodes = build_boundary(&disk(1.0), 8).unwrap();
        for bad in [0.0, 1.0, -0.1, 1.7] {
            assert!(extend_c0(bad, &nodes, C0Extension::ParallelCurve).is_err());
        }
    }

    #[test]
    fn rectangle_rejects_c0_extension() {
        let nodes = build_boundary(&DomainSpec::Rectangle { a: 1.0, b: 1.0 }, 16).unwrap();
        assert!(matches!(
            extend_c0(0.3, &nodes, C0Extension::ParallelCurve),
            Err(Error::Unsupported(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn profile_strategy() -> impl Strategy<Value = RadialProfile<f64>> {
            // Coefficients small enough that rho stays positive.
            (
                0.8f64..1.5,
                proptest::collection::vec(-0.08f64..0.08, 0..4),
                proptest::collection::vec(-0.08f64..0.08, 0..4),
            )
                .prop_map(|(constant, cos, sin)| RadialProfile { constant, cos, sin })
        }

        proptest! {
            #[test]
            fn star_boundaries_have_unit_normals_and_positive_flux(
                profile in profile_strategy(),
                m in (24usize..48).prop_map(|m| 2 * m),
            ) {
                let dom = DomainSpec::Star { profile };
                let nodes = build_boundary(&dom, m).unwrap();
                let mut total_curv = 0.0;
                for n in &nodes {
                    let norm = (n.normal[0].powi(2) + n.normal[1].powi(2)).sqrt();
                    prop_assert!((norm - 1.0).abs() < 1e-12);
                    prop_assert!(n.x_dot_nu > 0.0);
                    total_curv += n.curvature.unwrap() * n.arc_weight;
                }
                // Total curvature of a simple closed curve; the bound is loose
                // because the node count can be as low as 16.
                prop_assert!((total_curv - std::f64::consts::TAU).abs() < 1e-3);
            }
        }
    }
}
