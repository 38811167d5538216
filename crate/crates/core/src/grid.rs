//! Computational grids: a boundary-fitted polar grid for smooth star-shaped
//! domains and a uniform tensor grid for the rectangle.
//!
//! The polar grid maps the domain onto the unit parameter disk through
//! `r = s * rho(theta)` with `s` in [0, 1]. Radial levels sit at
//! `s_i = (i + 1/2) h`, staggered so that no node lands on the coordinate
//! axis singularity; the last level `s = 1` is the boundary. The ghost level
//! at `s = -h/2` is eliminated by the parity rule
//! `u(-h/2, theta) = u(h/2, theta + pi)`. Angular derivatives use spectral
//! differentiation matrices, radial ones second-order central differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{build_boundary, BoundaryNode, DomainSpec};
use crate::scalar::Scalar;

/// Grid samples of a scalar function: interior nodes plus boundary nodes.
///
/// Interior layout is grid-specific (`PolarGrid::idx` / `RectGrid::idx`);
/// the boundary vector is ordered like the grid's boundary node list.
/// `corners` holds the four rectangle corner values (counterclockwise from
/// the lower left); it is empty on polar grids, whose boundary is smooth.
#[derive(Clone, Debug)]
pub struct Field<T: Scalar> {
    pub interior: DVector<T>,
    pub boundary: DVector<T>,
    pub corners: DVector<T>,
}

/// Accuracy of the one-sided boundary stencils used for traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StencilOrder {
    /// Three-point (four-point for second derivatives), O(h^2).
    #[default]
    Two,
    /// One extra point, O(h^3).
    Three,
}

/// Interior first and second parameter derivatives of a field on the polar
/// grid: radial (`ds`, `dss`), angular (`dt`, `dtt`), and mixed (`dst`).
pub struct InteriorDerivs<T: Scalar> {
    pub ds: DVector<T>,
    pub dss: DVector<T>,
    pub dt: DVector<T>,
    pub dtt: DVector<T>,
    pub dst: DVector<T>,
}

/// Boundary-fitted polar grid over a smooth star-shaped domain.
pub struct PolarGrid<T: Scalar> {
    pub domain: DomainSpec<T>,
    /// Number of interior radial levels; the boundary is level `rings`.
    pub rings: usize,
    /// Number of angular nodes (even).
    pub n_theta: usize,
    pub h: T,
    pub dtheta: T,
    /// Radius function and log-derivative data per angular node:
    /// `rho`, `g = rho'/rho`, `gp = g'`.
    pub rho: Vec<T>,
    pub g: Vec<T>,
    pub gp: Vec<T>,
    pub boundary: Vec<BoundaryNode<T>>,
    /// Spectral first and second angular derivative matrices.
    pub d1: DMatrix<T>,
    pub d2: DMatrix<T>,
}

impl<T: Scalar> PolarGrid<T> {
    /// Build a grid with `radial` levels (including the boundary level) and
    /// `angular` nodes. Requires a smooth domain, `radial >= 5`, and an even
    /// `angular >= 8`.
    pub fn new(domain: DomainSpec<T>, radial: usize, angular: usize) -> Result<Self> {
        domain.validate()?;
        if !domain.is_smooth() {
            return Err(Error::Unsupported(
                "polar grids need a smooth star-shaped domain; use the tensor grid \
                 for rectangles"
                    .into(),
            ));
        }
        if radial < 5 {
            return Err(Error::InvalidDomain(format!(
                "need at least 5 radial levels, got {radial}"
            )));
        }
        if angular < 8 || angular % 2 != 0 {
            return Err(Error::InvalidDomain(format!(
                "need an even angular count of at least 8, got {angular}"
            )));
        }
        let rings = radial - 1;
        let h = T::one() / (T::of_usize(rings) + T::fl(0.5));
        let dtheta = T::two_pi() / T::of_usize(angular);
        let boundary = build_boundary(&domain, angular)?;
        let mut rho = Vec::with_capacity(angular);
        let mut g = Vec::with_capacity(angular);
        let mut gp = Vec::with_capacity(angular);
        for j in 0..angular {
            let t = dtheta * T::of_usize(j);
            let (r, r1, r2) = domain.radial(t);
            let gj = r1 / r;
            rho.push(r);
            g.push(gj);
            // g' = rho''/rho - g^2.
            gp.push(r2 / r - gj * gj);
        }
        let (d1, d2) = fourier_diff_matrices(angular);
        Ok(Self {
            domain,
            rings,
            n_theta: angular,
            h,
            dtheta,
            rho,
            g,
            gp,
            boundary,
            d1,
            d2,
        })
    }

    /// Radial parameter of level `i` (level `rings` is the boundary).
    pub fn s(&self, i: usize) -> T {
        (T::of_usize(i) + T::fl(0.5)) * self.h
    }

    pub fn theta(&self, j: usize) -> T {
        self.dtheta * T::of_usize(j)
    }

    pub fn n_interior(&self) -> usize {
        self.rings * self.n_theta
    }

    /// Flat index of interior node (level `i`, angle `j`).
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rings && j < self.n_theta);
        i * self.n_theta + j
    }

    /// Angular index of the parity partner across the origin.
    pub fn parity_partner(&self, j: usize) -> usize {
        (j + self.n_theta / 2) % self.n_theta
    }

    /// Cartesian position of interior node (i, j).
    pub fn point(&self, i: usize, j: usize) -> [T; 2] {
        let r = self.s(i) * self.rho[j];
        let (sin, cos) = self.theta(j).sin_cos();
        [r * cos, r * sin]
    }

    pub fn zero_field(&self) -> Field<T> {
        Field {
            interior: DVector::zeros(self.n_interior()),
            boundary: DVector::zeros(self.n_theta),
            corners: DVector::zeros(0),
        }
    }

    /// Sample a Cartesian function on all nodes.
    pub fn sample<F: Fn(T, T) -> T>(&self, f: F) -> Field<T> {
        let mut field = self.zero_field();
        for i in 0..self.rings {
            for j in 0..self.n_theta {
                let [x, y] = self.point(i, j);
                field.interior[self.idx(i, j)] = f(x, y);
            }
        }
        for (j, node) in self.boundary.iter().enumerate() {
            field.boundary[j] = f(node.position[0], node.position[1]);
        }
        field
    }

    /// Quadrature weight of interior node (i, j): the area element
    /// `s rho^2 h dtheta` of the polar map.
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.s(i) * self.rho[j] * self.rho[j] * self.h * self.dtheta
    }

    /// Quadrature weight of the boundary half cell behind boundary node `j`.
    pub fn boundary_cell_weight(&self, j: usize) -> T {
        self.rho[j] * self.rho[j] * T::fl(0.5) * self.h * self.dtheta
    }

    /// `int f g dx` over the domain, boundary half cells included.
    pub fn integrate_product(&self, f: &Field<T>, g: &Field<T>) -> T {
        let mut acc = T::zero();
        for i in 0..self.rings {
            for j in 0..self.n_theta {
                let id = self.idx(i, j);
                acc += self.weight(i, j) * f.interior[id] * g.interior[id];
            }
        }
        for j in 0..self.n_theta {
            acc += self.boundary_cell_weight(j) * f.boundary[j] * g.boundary[j];
        }
        acc
    }

    /// `int f^2 dx` over the domain.
    pub fn integrate_sq(&self, f: &Field<T>) -> T {
        self.integrate_product(f, f)
    }

    /// Value of the ghost node below level 0 via the parity rule.
    fn ghost(&self, f: &Field<T>, j: usize) -> T {
        f.interior[self.idx(0, self.parity_partner(j))]
    }

    /// Value at level `i` in column `j`, reaching into ghost and boundary
    /// levels as needed. `i` is offset by one so that 0 means the ghost level.
    fn level_value(&self, f: &Field<T>, i_plus1: usize, j: usize) -> T {
        if i_plus1 == 0 {
            self.ghost(f, j)
        } else if i_plus1 == self.rings + 1 {
            f.boundary[j]
        } else {
            f.interior[self.idx(i_plus1 - 1, j)]
        }
    }

    /// All interior parameter derivatives of `f`. Radial derivatives are
    /// second-order central, angular ones spectral.
    pub fn interior_derivs(&self, f: &Field<T>) -> InteriorDerivs<T> {
        let n = self.n_interior();
        let nt = self.n_theta;
        let half = T::fl(0.5);
        let h2 = self.h * self.h;
        let mut ds = DVector::zeros(n);
        let mut dss = DVector::zeros(n);
        for i in 0..self.rings {
            for j in 0..nt {
                let um = self.level_value(f, i, j);
                let u0 = f.interior[self.idx(i, j)];
                let up = self.level_value(f, i + 2, j);
                ds[self.idx(i, j)] = half * (up - um) / self.h;
                dss[self.idx(i, j)] = (up - T::fl(2.0) * u0 + um) / h2;
            }
        }
        let dt = self.apply_angular(&self.d1, &f.interior);
        let dtt = self.apply_angular(&self.d2, &f.interior);
        let dst = self.apply_angular(&self.d1, &ds);
        InteriorDerivs { ds, dss, dt, dtt, dst }
    }

    /// Apply an angular differentiation matrix ring by ring.
    fn apply_angular(&self, d: &DMatrix<T>, values: &DVector<T>) -> DVector<T> {
        let nt = self.n_theta;
        let mut out = DVector::zeros(values.len());
        for i in 0..self.rings {
            for j in 0..nt {
                let mut acc = T::zero();
                for l in 0..nt {
                    acc += d[(j, l)] * values[self.idx(i, l)];
                }
                out[self.idx(i, j)] = acc;
            }
        }
        out
    }

    /// Spectral derivative of a per-boundary-node array.
    pub fn boundary_angular_deriv(&self, values: &[T]) -> Vec<T> {
        let nt = self.n_theta;
        (0..nt)
            .map(|j| {
                let mut acc = T::zero();
                for l in 0..nt {
                    acc += self.d1[(j, l)] * values[l];
                }
                acc
            })
            .collect()
    }

    /// One-sided radial derivative at the boundary, per angular node.
    pub fn boundary_ds(&self, f: &Field<T>, order: StencilOrder) -> Vec<T> {
        let nr = self.rings;
        (0..self.n_theta)
            .map(|j| {
                let ub = f.boundary[j];
                let u1 = f.interior[self.idx(nr - 1, j)];
                let u2 = f.interior[self.idx(nr - 2, j)];
                match order {
                    StencilOrder::Two => {
                        (T::fl(3.0) * ub - T::fl(4.0) * u1 + u2) / (T::fl(2.0) * self.h)
                    }
                    StencilOrder::Three => {
                        let u3 = f.interior[self.idx(nr - 3, j)];
                        (T::fl(11.0) * ub - T::fl(18.0) * u1 + T::fl(9.0) * u2 - T::fl(2.0) * u3)
                            / (T::fl(6.0) * self.h)
                    }
                }
            })
            .collect()
    }

    /// One-sided radial second derivative at the boundary (no constraint on
    /// the first derivative), O(h^2).
    pub fn boundary_dss(&self, f: &Field<T>) -> Vec<T> {
        let nr = self.rings;
        let h2 = self.h * self.h;
        (0..self.n_theta)
            .map(|j| {
                let ub = f.boundary[j];
                let u1 = f.interior[self.idx(nr - 1, j)];
                let u2 = f.interior[self.idx(nr - 2, j)];
                let u3 = f.interior[self.idx(nr - 3, j)];
                (T::fl(2.0) * ub - T::fl(5.0) * u1 + T::fl(4.0) * u2 - u3) / h2
            })
            .collect()
    }

    /// One-sided radial second derivative at a boundary point where both the
    /// value and the radial first derivative vanish (clamped closure). The
    /// constraint buys one order: O(h^2) from two points, O(h^3) from three.
    pub fn boundary_dss_clamped(&self, f: &Field<T>, order: StencilOrder) -> Vec<T> {
        let nr = self.rings;
        let h2 = self.h * self.h;
        (0..self.n_theta)
            .map(|j| {
                let u1 = f.interior[self.idx(nr - 1, j)];
                let u2 = f.interior[self.idx(nr - 2, j)];
                match order {
                    StencilOrder::Two => {
                        (T::fl(8.0) * u1 - u2) / (T::fl(2.0) * h2)
                    }
                    StencilOrder::Three => {
                        let u3 = f.interior[self.idx(nr - 3, j)];
                        (T::fl(108.0) * u1 - T::fl(27.0) * u2 + T::fl(4.0) * u3)
                            / (T::fl(18.0) * h2)
                    }
                }
            })
            .collect()
    }

    /// Boundary value by cubic extrapolation of the three innermost rings,
    /// ignoring whatever the field stores at the boundary level. This is the
    /// independent cross-check for quantities whose boundary value was
    /// imposed during assembly.
    pub fn boundary_extrapolated(&self, f: &Field<T>) -> Vec<T> {
        let nr = self.rings;
        let three = T::fl(3.0);
        (0..self.n_theta)
            .map(|j| {
                let u1 = f.interior[self.idx(nr - 1, j)];
                let u2 = f.interior[self.idx(nr - 2, j)];
                let u3 = f.interior[self.idx(nr - 3, j)];
                three * u1 - three * u2 + u3
            })
            .collect()
    }

    /// Metric factor turning the one-sided radial derivative into the
    /// outward normal derivative: `u_nu = sqrt(1+g^2)/rho * u_s` when the
    /// field vanishes along the boundary (no tangential contribution).
    pub fn normal_metric(&self, j: usize) -> T {
        (T::one() + self.g[j] * self.g[j]).sqrt() / self.rho[j]
    }

    /// Outward normal derivative of a general field at boundary node `j`
    /// given its boundary radial derivative and boundary angular derivative:
    /// `[(1+g^2) u_s - g u_theta] / (rho sqrt(1+g^2))`.
    pub fn normal_deriv_from_parts(&self, j: usize, ds_b: T, dt_b: T) -> T {
        let g = self.g[j];
        let one_g2 = T::one() + g * g;
        (one_g2 * ds_b - g * dt_b) / (self.rho[j] * one_g2.sqrt())
    }

    /// Cartesian Hessian invariants at every interior node:
    /// `A = u_rr`, `B = u_rtheta/r - u_theta/r^2`,
    /// `C = u_r/r + u_thetatheta/r^2`. The Hessian determinant is the
    /// rotation-invariant `A*C - B^2` and the Laplacian is `A + C`.
    fn hessian_invariants(
        &self,
        d: &InteriorDerivs<T>,
    ) -> (DVector<T>, DVector<T>, DVector<T>) {
        let n = self.n_interior();
        let mut a = DVector::zeros(n);
        let mut b = DVector::zeros(n);
        let mut c = DVector::zeros(n);
        for i in 0..self.rings {
            let s = self.s(i);
            for j in 0..self.n_theta {
                let id = self.idx(i, j);
                let rho = self.rho[j];
                let g = self.g[j];
                let gp = self.gp[j];
                let r = s * rho;
                // Polar derivatives from mapped ones at fixed radius/angle.
                let u_r = d.ds[id] / rho;
                let u_rr = d.dss[id] / (rho * rho);
                let u_t = d.dt[id] - s * g * d.ds[id];
                let u_tt = d.dtt[id] - s * gp * d.ds[id]
                    - T::fl(2.0) * s * g * d.dst[id]
                    + s * g * g * d.ds[id]
                    + s * s * g * g * d.dss[id];
                let u_rt = (d.dst[id] - g * d.ds[id] - s * g * d.dss[id]) / rho;
                a[id] = u_rr;
                b[id] = u_rt / r - u_t / (r * r);
                c[id] = u_r / r + u_tt / (r * r);
            }
        }
        (a, b, c)
    }

    /// `int det(Hess u) dx` over the domain, including the boundary strip
    /// where the integrand does not vanish for free boundary derivatives.
    pub fn det_hessian_integral(&self, f: &Field<T>) -> T {
        let d = self.interior_derivs(f);
        let (a, b, c) = self.hessian_invariants(&d);
        let mut acc = T::zero();
        for i in 0..self.rings {
            for j in 0..self.n_theta {
                let id = self.idx(i, j);
                acc += self.weight(i, j) * (a[id] * c[id] - b[id] * b[id]);
            }
        }
        // Boundary strip: one-sided radial data, spectral tangential data.
        let ds_b = self.boundary_ds(f, StencilOrder::Two);
        let dss_b = self.boundary_dss(f);
        let dst_b = self.boundary_angular_deriv(&ds_b);
        let bvals: Vec<T> = (0..self.n_theta).map(|j| f.boundary[j]).collect();
        let dt_b = self.boundary_angular_deriv(&bvals);
        let dtt_b = {
            let nt = self.n_theta;
            (0..nt)
                .map(|j| {
                    let mut v = T::zero();
                    for l in 0..nt {
                        v += self.d2[(j, l)] * f.boundary[l];
                    }
                    v
                })
                .collect::<Vec<T>>()
        };
        for j in 0..self.n_theta {
            let rho = self.rho[j];
            let g = self.g[j];
            let gp = self.gp[j];
            let u_r = ds_b[j] / rho;
            let u_rr = dss_b[j] / (rho * rho);
            let u_t = dt_b[j] - g * ds_b[j];
            let u_tt = dtt_b[j] - gp * ds_b[j] - T::fl(2.0) * g * dst_b[j]
                + g * g * ds_b[j]
                + g * g * dss_b[j];
            let u_rt = (dst_b[j] - g * ds_b[j] - g * dss_b[j]) / rho;
            let a = u_rr;
            let b = u_rt / rho - u_t / (rho * rho);
            let c = u_r / rho + u_tt / (rho * rho);
            acc += self.boundary_cell_weight(j) * (a * c - b * b);
        }
        acc
    }
}

/// Uniform tensor grid on the centered rectangle `[-a/2, a/2] x [-b/2, b/2]`
/// with `nx` cells along x and `ny` along y.
pub struct RectGrid<T: Scalar> {
    pub a: T,
    pub b: T,
    pub nx: usize,
    pub ny: usize,
    pub hx: T,
    pub hy: T,
    /// Edge nodes in counterclockwise order (right, top, left, bottom),
    /// excluding corners. `Field::boundary` follows this ordering.
    pub edges: Vec<RectEdgeNode<T>>,
}

/// One boundary node of the tensor grid, on a grid line of some edge.
#[derive(Clone, Debug)]
pub struct RectEdgeNode<T> {
    /// Edge id: 0 right, 1 top, 2 left, 3 bottom.
    pub edge: usize,
    /// Grid coordinates of the node (i along x, j along y).
    pub i: usize,
    pub j: usize,
    pub position: [T; 2],
    pub normal: [T; 2],
    pub x_dot_nu: T,
    /// Spacing-based arc weight (trapezoid rule along the edge).
    pub arc_weight: T,
}

impl<T: Scalar> RectGrid<T> {
    pub fn new(a: T, b: T, nx: usize, ny: usize) -> Result<Self> {
        if a <= T::zero() || b <= T::zero() {
            return Err(Error::InvalidDomain(format!(
                "rectangle sides must be positive, got {} x {}",
                a.f64(),
                b.f64()
            )));
        }
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidDomain(format!(
                "need at least 4 cells per side, got {nx} x {ny}"
            )));
        }
        let hx = a / T::of_usize(nx);
        let hy = b / T::of_usize(ny);
        let half = T::fl(0.5);
        let mut edges = Vec::with_capacity(2 * (nx - 1) + 2 * (ny - 1));
        // Right edge, y ascending.
        for j in 1..ny {
            let y = -half * b + hy * T::of_usize(j);
            edges.push(RectEdgeNode {
                edge: 0,
                i: nx,
                j,
                position: [half * a, y],
                normal: [T::one(), T::zero()],
                x_dot_nu: half * a,
                arc_weight: hy,
            });
        }
        // Top edge, x descending.
        for i in (1..nx).rev() {
            let x = -half * a + hx * T::of_usize(i);
            edges.push(RectEdgeNode {
                edge: 1,
                i,
                j: ny,
                position: [x, half * b],
                normal: [T::zero(), T::one()],
                x_dot_nu: half * b,
                arc_weight: hx,
            });
        }
        // Left edge, y descending.
        for j in (1..ny).rev() {
            let y = -half * b + hy * T::of_usize(j);
            edges.push(RectEdgeNode {
                edge: 2,
                i: 0,
                j,
                position: [-half * a, y],
                normal: [-T::one(), T::zero()],
                x_dot_nu: half * a,
                arc_weight: hy,
            });
        }
        // Bottom edge, x ascending.
        for i in 1..nx {
            let x = -half * a + hx * T::of_usize(i);
            edges.push(RectEdgeNode {
                edge: 3,
                i,
                j: 0,
                position: [x, -half * b],
                normal: [T::zero(), -T::one()],
                x_dot_nu: half * b,
                arc_weight: hx,
            });
        }
        Ok(Self { a, b, nx, ny, hx, hy, edges })
    }

    pub fn n_interior(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    /// Flat index of interior node `(i, j)`, `1 <= i <= nx-1`, `1 <= j <= ny-1`.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..self.nx).contains(&i) && (1..self.ny).contains(&j));
        (i - 1) * (self.ny - 1) + (j - 1)
    }

    pub fn point(&self, i: usize, j: usize) -> [T; 2] {
        let half = T::fl(0.5);
        [
            -half * self.a + self.hx * T::of_usize(i),
            -half * self.b + self.hy * T::of_usize(j),
        ]
    }

    pub fn zero_field(&self) -> Field<T> {
        Field {
            interior: DVector::zeros(self.n_interior()),
            boundary: DVector::zeros(self.edges.len()),
            corners: DVector::zeros(4),
        }
    }

    /// Corner positions, counterclockwise from the lower left.
    pub fn corner_points(&self) -> [[T; 2]; 4] {
        let half = T::fl(0.5);
        let (ha, hb) = (half * self.a, half * self.b);
        [[-ha, -hb], [ha, -hb], [ha, hb], [-ha, hb]]
    }

    fn corner_id(&self, i: usize, j: usize) -> usize {
        match (i == self.nx, j == self.ny) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        }
    }

    pub fn sample<F: Fn(T, T) -> T>(&self, f: F) -> Field<T> {
        let mut field = self.zero_field();
        for i in 1..self.nx {
            for j in 1..self.ny {
                let [x, y] = self.point(i, j);
                field.interior[self.idx(i, j)] = f(x, y);
            }
        }
        for (k, node) in self.edges.iter().enumerate() {
            field.boundary[k] = f(node.position[0], node.position[1]);
        }
        for (k, [x, y]) in self.corner_points().into_iter().enumerate() {
            field.corners[k] = f(x, y);
        }
        field
    }

    /// Grid value at node `(i, j)` including boundary lines and corners.
    fn value_at(&self, f: &Field<T>, i: usize, j: usize) -> T {
        let corner = (i == 0 || i == self.nx) && (j == 0 || j == self.ny);
        if corner {
            return f.corners[self.corner_id(i, j)];
        }
        if i > 0 && i < self.nx && j > 0 && j < self.ny {
            f.interior[self.idx(i, j)]
        } else {
            let k = self
                .edges
                .iter()
                .position(|e| e.i == i && e.j == j)
                .expect("boundary node exists");
            f.boundary[k]
        }
    }

    /// `int f g dx`, trapezoid rule (edge cells at half weight).
    pub fn integrate_product(&self, f: &Field<T>, g: &Field<T>) -> T {
        let cell = self.hx * self.hy;
        let mut acc = T::zero();
        for i in 1..self.nx {
            for j in 1..self.ny {
                let id = self.idx(i, j);
                acc += cell * f.interior[id] * g.interior[id];
            }
        }
        let half = T::fl(0.5);
        for k in 0..self.edges.len() {
            acc += half * cell * f.boundary[k] * g.boundary[k];
        }
        let quarter = T::fl(0.25);
        for k in 0..4 {
            acc += quarter * cell * f.corners[k] * g.corners[k];
        }
        acc
    }

    pub fn integrate_sq(&self, f: &Field<T>) -> T {
        self.integrate_product(f, f)
    }

    /// Outward normal derivative at every edge node by one-sided stencils.
    pub fn edge_normal_derivs(&self, f: &Field<T>, order: StencilOrder) -> Vec<T> {
        self.edges
            .iter()
            .map(|e| {
                let (h, line) = self.inward_line(e);
                let ub = self.value_at(f, e.i, e.j);
                let u1 = self.value_at(f, line(1).0, line(1).1);
                let u2 = self.value_at(f, line(2).0, line(2).1);
                // Derivative along the inward direction, negated to point outward.
                -match order {
                    StencilOrder::Two => {
                        (T::fl(-3.0) * ub + T::fl(4.0) * u1 - u2) / (T::fl(2.0) * h)
                    }
                    StencilOrder::Three => {
                        let u3 = self.value_at(f, line(3).0, line(3).1);
                        (T::fl(-11.0) * ub + T::fl(18.0) * u1 - T::fl(9.0) * u2 + T::fl(2.0) * u3)
                            / (T::fl(6.0) * h)
                    }
                }
            })
            .collect()
    }

    /// Second derivative along the normal at every edge node, one-sided and
    /// unconstrained (O(h^2)).
    pub fn edge_normal_second(&self, f: &Field<T>) -> Vec<T> {
        self.edges
            .iter()
            .map(|e| {
                let (h, line) = self.inward_line(e);
                let ub = self.value_at(f, e.i, e.j);
                let u1 = self.value_at(f, line(1).0, line(1).1);
                let u2 = self.value_at(f, line(2).0, line(2).1);
                let u3 = self.value_at(f, line(3).0, line(3).1);
                (T::fl(2.0) * ub - T::fl(5.0) * u1 + T::fl(4.0) * u2 - u3) / (h * h)
            })
            .collect()
    }

    /// Edge value by cubic extrapolation of the three nodes along the inward
    /// normal, ignoring the stored edge value (cross-check for imposed data).
    pub fn edge_extrapolated(&self, f: &Field<T>) -> Vec<T> {
        let three = T::fl(3.0);
        self.edges
            .iter()
            .map(|e| {
                let (_, line) = self.inward_line(e);
                let u1 = self.value_at(f, line(1).0, line(1).1);
                let u2 = self.value_at(f, line(2).0, line(2).1);
                let u3 = self.value_at(f, line(3).0, line(3).1);
                three * u1 - three * u2 + u3
            })
            .collect()
    }

    /// Spacing and node walker along the inward normal from an edge node.
    fn inward_line(&self, e: &RectEdgeNode<T>) -> (T, impl Fn(usize) -> (usize, usize)) {
        let (i, j, edge) = (e.i, e.j, e.edge);
        let h = match edge {
            0 | 2 => self.hx,
            _ => self.hy,
        };
        let f = move |step: usize| match edge {
            0 => (i - step, j),
            1 => (i, j - step),
            2 => (i + step, j),
            _ => (i, j + step),
        };
        (h, f)
    }

    /// `int det(Hess u) dx` with centered differences in the interior and
    /// the trapezoid edge contribution `u_nn u_ss - u_ns^2`. Corner cells
    /// (total area `hx hy`) are omitted, an O(h^2) quadrature cost.
    pub fn det_hessian_integral(&self, f: &Field<T>) -> T {
        let cell = self.hx * self.hy;
        let hx2 = self.hx * self.hx;
        let hy2 = self.hy * self.hy;
        let quarter = T::fl(0.25);
        let two = T::fl(2.0);
        let mut acc = T::zero();
        for i in 1..self.nx {
            for j in 1..self.ny {
                let u0 = f.interior[self.idx(i, j)];
                let uxp = self.value_at(f, i + 1, j);
                let uxm = self.value_at(f, i - 1, j);
                let uyp = self.value_at(f, i, j + 1);
                let uym = self.value_at(f, i, j - 1);
                let upp = self.value_at(f, i + 1, j + 1);
                let upm = self.value_at(f, i + 1, j - 1);
                let ump = self.value_at(f, i - 1, j + 1);
                let umm = self.value_at(f, i - 1, j - 1);
                let uxx = (uxp - two * u0 + uxm) / hx2;
                let uyy = (uyp - two * u0 + uym) / hy2;
                let uxy = quarter * (upp - upm - ump + umm) / (self.hx * self.hy);
                acc += cell * (uxx * uyy - uxy * uxy);
            }
        }
        // Edge strips: u_nn u_ss - u_ns^2 along each straight edge.
        let un = self.edge_normal_derivs(f, StencilOrder::Two);
        let uns = self.edge_tangential_deriv(&un);
        let unn = self.edge_normal_second(f);
        let uss = self.edge_tangential_second(f);
        let half = T::fl(0.5);
        for (k, e) in self.edges.iter().enumerate() {
            let h_perp = match e.edge {
                0 | 2 => self.hx,
                _ => self.hy,
            };
            acc += half * h_perp * e.arc_weight * (unn[k] * uss[k] - uns[k] * uns[k]);
        }
        acc
    }

    /// Second derivative along the edge direction of the boundary values,
    /// using the corner values at the run ends.
    pub fn edge_tangential_second(&self, f: &Field<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.edges.len()];
        let two = T::fl(2.0);
        // Corner ids at the (start, end) of each CCW edge run.
        let run_corners = [(1usize, 2usize), (2, 3), (3, 0), (0, 1)];
        let mut start = 0;
        while start < self.edges.len() {
            let edge = self.edges[start].edge;
            let mut end = start;
            while end < self.edges.len() && self.edges[end].edge == edge {
                end += 1;
            }
            let h = match edge {
                0 | 2 => self.hy,
                _ => self.hx,
            };
            let (c_start, c_end) = run_corners[edge];
            for k in start..end {
                let prev = if k == start { f.corners[c_start] } else { f.boundary[k - 1] };
                let next = if k + 1 == end { f.corners[c_end] } else { f.boundary[k + 1] };
                out[k] = (next - two * f.boundary[k] + prev) / (h * h);
            }
            start = end;
        }
        out
    }

    /// Tangential derivative of a per-edge-node array along each edge run:
    /// centered inside a run, one-sided at the run ends (no corner data
    /// needed). The sign follows the walk direction of the CCW ordering,
    /// which all call sites square away.
    pub fn edge_tangential_deriv(&self, values: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); values.len()];
        let two = T::fl(2.0);
        let mut start = 0;
        while start < self.edges.len() {
            let edge = self.edges[start].edge;
            let mut end = start;
            while end < self.edges.len() && self.edges[end].edge == edge {
                end += 1;
            }
            let h = match edge {
                0 | 2 => self.hy,
                _ => self.hx,
            };
            for k in start..end {
                out[k] = if k == start {
                    (values[k + 1] - values[k]) / h
                } else if k + 1 == end {
                    (values[k] - values[k - 1]) / h
                } else {
                    (values[k + 1] - values[k - 1]) / (two * h)
                };
            }
            start = end;
        }
        out
    }
}

/// Spectral differentiation matrices for an even number of equispaced nodes
/// on the periodic interval [0, 2 pi).
pub fn fourier_diff_matrices<T: Scalar>(n: usize) -> (DMatrix<T>, DMatrix<T>) {
    assert!(n >= 2 && n % 2 == 0, "need an even node count");
    let mut d1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    let nf = n as f64;
    let h = std::f64::consts::TAU / nf;
    for j in 0..n {
        for l in 0..n {
            if j == l {
                d2[(j, l)] = T::fl(-(nf * nf) / 12.0 - 1.0 / 6.0);
            } else {
                let diff = j as isize - l as isize;
                let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let angle = 0.5 * h * diff as f64;
                d1[(j, l)] = T::fl(sign * 0.5 / angle.tan());
                d2[(j, l)] = T::fl(-sign * 0.5 / (angle.sin() * angle.sin()));
            }
        }
    }
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadialProfile;
    use approx::assert_relative_eq;

    fn disk(r: f64) -> DomainSpec<f64> {
        DomainSpec::Disk { radius: r }
    }

    fn ellipse(a: f64, b: f64) -> DomainSpec<f64> {
        DomainSpec::Ellipse { a, b }
    }

    fn star() -> DomainSpec<f64> {
        DomainSpec::Star {
            profile: RadialProfile {
                constant: 1.0,
                cos: vec![0.0, 0.0, 0.15],
                sin: vec![],
            },
        }
    }

    #[test]
    fn fourier_matrices_differentiate_trig_exactly() {
        let n = 16;
        let (d1, d2) = fourier_diff_matrices::<f64>(n);
        let h = std::f64::consts::TAU / n as f64;
        for m in [1usize, 3, 5] {
            let u: Vec<f64> = (0..n).map(|j| (m as f64 * j as f64 * h + 0.7).cos()).collect();
            for j in 0..n {
                let t = j as f64 * h;
                let got1: f64 = (0..n).map(|l| d1[(j, l)] * u[l]).sum();
                let got2: f64 = (0..n).map(|l| d2[(j, l)] * u[l]).sum();
                let mf = m as f64;
                assert_relative_eq!(
                    got1,
                    -mf * (mf * t + 0.7).sin(),
                    max_relative = 1e-10,
                    epsilon = 1e-10
                );
                assert_relative_eq!(
                    got2,
                    -mf * mf * (mf * t + 0.7).cos(),
                    max_relative = 1e-10,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn polar_quadrature_recovers_areas() {
        for (dom, area) in [
            (disk(1.0), std::f64::consts::PI),
            (disk(2.0), 4.0 * std::f64::consts::PI),
            (ellipse(1.5, 1.0), 1.5 * std::f64::consts::PI),
        ] {
            let grid = PolarGrid::new(dom, 60, 16).unwrap();
            let ones = grid.sample(|_, _| 1.0);
            let got = grid.integrate_sq(&ones);
            assert_relative_eq!(got, area, max_relative = 2e-4);
        }
    }

    #[test]
    fn quadratic_fields_have_exact_hessian_determinants() {
        // u = 1 - x^2/a^2 - y^2/b^2 pulls back to 1 - s^2 on the mapped grid,
        // so every derivative in the chain is exact and only the O(h^2)
        // quadrature of a constant integrand remains.
        let (a, b) = (1.5, 1.0);
        let grid = PolarGrid::new(ellipse(a, b), 80, 16).unwrap();
        let u = grid.sample(|x, y| 1.0 - x * x / (a * a) - y * y / (b * b));
        let got = grid.det_hessian_integral(&u);
        let exact = 4.0 / (a * b) * std::f64::consts::PI;
        assert_relative_eq!(got, exact, max_relative = 2e-4);
    }

    #[test]
    fn hessian_determinant_integral_converges_at_second_order() {
        // u = x^3 y on the unit disk: det H = -9 x^4, integral -9 pi / 8.
        let exact = -9.0 * std::f64::consts::PI / 8.0;
        let err = |radial: usize| {
            let grid = PolarGrid::new(disk(1.0), radial, 24).unwrap();
            let u = grid.sample(|x, y| x * x * x * y);
            (grid.det_hessian_integral(&u) - exact).abs()
        };
        let coarse = err(40);
        let fine = err(80);
        assert!(coarse < 3e-2, "coarse error {coarse:.3e}");
        let rate = (coarse / fine).log2();
        assert!(rate > 1.6, "observed order {rate:.2}");
    }

    #[test]
    fn hessian_determinant_on_star_domain_matches_closed_form() {
        // Same integrand on a wiggly star, exercising the full metric chain.
        // For u = x^3 y, det H = -9 x^4; integrate x^4 in polar form.
        let dom = star();
        let grid = PolarGrid::new(dom.clone(), 90, 32).unwrap();
        let u = grid.sample(|x, y| x * x * x * y);
        // Reference: int x^4 = int rho^6/6 cos^4 dtheta by exact radial integral.
        let nt = 4096;
        let mut exact = 0.0;
        for j in 0..nt {
            let t = std::f64::consts::TAU * j as f64 / nt as f64;
            let (rho, _, _) = dom.radial(t);
            exact += rho.powi(6) / 6.0 * t.cos().powi(4);
        }
        exact *= -9.0 * std::f64::consts::TAU / nt as f64;
        let got = grid.det_hessian_integral(&u);
        assert_relative_eq!(got, exact, max_relative = 3e-3);
    }

    #[test]
    fn one_sided_boundary_stencils_hit_expected_orders() {
        // u = (1 - r^2)^2 exp(r) on the unit disk is clamped (u and u_r both
        // vanish at r = 1) but not polynomial, so no stencil is trivially
        // exact. u_rr(1) = 8 e.
        let exact = 8.0 * 1.0f64.exp();
        let errs = |radial: usize| -> (f64, f64, f64) {
            let grid = PolarGrid::new(disk(1.0), radial, 8).unwrap();
            let u = grid.sample(|x, y| {
                let r2 = x * x + y * y;
                (1.0 - r2) * (1.0 - r2) * r2.sqrt().exp()
            });
            let two = grid.boundary_dss_clamped(&u, StencilOrder::Two)[0];
            let three = grid.boundary_dss_clamped(&u, StencilOrder::Three)[0];
            let general = grid.boundary_dss(&u)[0];
            (
                (two - exact).abs(),
                (three - exact).abs(),
                (general - exact).abs(),
            )
        };
        let (c2, c3, cg) = errs(40);
        let (f2, f3, fg) = errs(80);
        assert!(c3 < c2, "order-3 stencil should beat order-2: {c3:.2e} vs {c2:.2e}");
        assert!((c2 / f2).log2() > 1.6, "clamped 2nd-order rate");
        assert!((c3 / f3).log2() > 2.5, "clamped 3rd-order rate");
        assert!((cg / fg).log2() > 1.6, "general stencil rate");
    }

    #[test]
    fn boundary_first_derivative_stencils_converge() {
        // u = sin(r) on the unit disk; u_s(1) = cos(1).
        let exact = 1.0f64.cos();
        let errs = |radial: usize| -> (f64, f64) {
            let grid = PolarGrid::new(disk(1.0), radial, 8).unwrap();
            let u = grid.sample(|x, y| (x * x + y * y).sqrt().sin());
            let two = grid.boundary_ds(&u, StencilOrder::Two)[0];
            let three = grid.boundary_ds(&u, StencilOrder::Three)[0];
            ((two - exact).abs(), (three - exact).abs())
        };
        let (c2, c3) = errs(40);
        let (f2, f3) = errs(80);
        assert!((c2 / f2).log2() > 1.7);
        assert!((c3 / f3).log2() > 2.6);
    }

    #[test]
    fn rect_quadrature_and_normal_derivatives() {
        let grid = RectGrid::new(1.0, 1.0, 48, 48).unwrap();
        let pi = std::f64::consts::PI;
        // Fundamental hinged mode, shifted to the centered rectangle.
        let u = grid.sample(|x, y| (pi * (x + 0.5)).sin() * (pi * (y + 0.5)).sin());
        let m2 = grid.integrate_sq(&u);
        assert_relative_eq!(m2, 0.25, max_relative = 1e-3);
        // Outward normal derivative on the right edge at mid-height:
        // u_x(1/2, y) = -pi sin(pi (y + 1/2)).
        let un = grid.edge_normal_derivs(&u, StencilOrder::Three);
        let mid = grid.ny / 2 - 1; // right edge starts at j = 1
        let expect = -pi * (pi * (grid.edges[mid].position[1] + 0.5)).sin();
        assert_relative_eq!(un[mid], expect, max_relative = 1e-4);
        // det H integral vanishes for this separable mode; the discrete
        // value should shrink at second order.
        let det48 = grid.det_hessian_integral(&u).abs();
        let grid96 = RectGrid::<f64>::new(1.0, 1.0, 96, 96).unwrap();
        let u96 = grid96.sample(|x, y| (pi * (x + 0.5)).sin() * (pi * (y + 0.5)).sin());
        let det96 = grid96.det_hessian_integral(&u96).abs();
        assert!(det48 < 0.5, "det H integral {det48:.3e} should be near 0");
        assert!((det48 / det96).log2() > 1.5, "det H cancellation rate");
    }

    #[test]
    fn rect_det_hessian_matches_polynomial_reference() {
        // u = x^3 y on the centered unit square: det H = -9 x^4,
        // integral = -9 * 2 * (1/2)^5 / 5 = -9/80.
        let exact = -9.0 / 80.0;
        let err = |n: usize| {
            let grid = RectGrid::<f64>::new(1.0, 1.0, n, n).unwrap();
            let u = grid.sample(|x, y| x * x * x * y);
            (grid.det_hessian_integral(&u) - exact).abs()
        };
        let coarse = err(24);
        let fine = err(96);
        assert!(coarse < 5e-3);
        // Factor-4 refinement; demand an average order well above 1.
        assert!((coarse / fine).log2() > 2.6, "rect det H rate");
    }

    #[test]
    fn parity_ghost_is_consistent_for_even_and_odd_modes() {
        // Radial derivative at the first ring must see the smooth
        // continuation through the origin: test on u = x (odd, m = 1) and
        // u = x^2 - y^2 (even, m = 2) where all derivatives are known.
        let grid = PolarGrid::new(disk(1.0), 60, 16).unwrap();
        let ux = grid.sample(|x, _| x);
        let d = grid.interior_derivs(&ux);
        // du/ds at (0, theta=0) should be rho cos(theta) = 1.
        assert_relative_eq!(d.ds[grid.idx(0, 0)], 1.0, max_relative = 1e-10);
        // d2u/ds2 of a linear function vanishes, including at the first ring.
        assert!(d.dss[grid.idx(0, 0)].abs() < 1e-9);
        let uq = grid.sample(|x, y| x * x - y * y);
        let dq = grid.interior_derivs(&uq);
        // u = s^2 cos(2 theta): dss = 2 cos(2 theta) everywhere.
        assert_relative_eq!(dq.dss[grid.idx(0, 0)], 2.0, max_relative = 1e-9);
        assert_relative_eq!(
            dq.dss[grid.idx(0, grid.n_theta / 4)],
            -2.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn polar_grid_rejects_bad_parameters() {
        assert!(PolarGrid::new(DomainSpec::<f64>::Rectangle { a: 1.0, b: 1.0 }, 20, 16).is_err());
        assert!(PolarGrid::new(disk(1.0), 3, 16).is_err());
        assert!(PolarGrid::new(disk(1.0), 20, 7).is_err());
        assert!(RectGrid::new(1.0, -1.0, 8, 8).is_err());
        assert!(RectGrid::new(1.0, 1.0, 2, 8).is_err());
    }
}
