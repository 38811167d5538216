//! Eigenvalue extraction for the assembled operators.
//!
//! Dense blocks go through a real Schur decomposition for the spectrum,
//! then shifted inverse iteration for the eigenvectors. Every vector is
//! certified by the relative residual `|A x - alpha x| / |A x|`; a pair is
//! never returned with a residual above `max(RESIDUAL_TOL, floor)`, where
//! the floor is a rounding bound on evaluating the residual itself (see
//! [`EigenPair::floor`]). All randomness is a seeded integer stream, so
//! repeated runs produce bit-identical results.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::discretize::{BcKind, DenseBlock, DiscreteOperator, GridHandle, ModeBlock, OpKind};
use crate::error::{Error, Result};
use crate::geometry::C0Field;
use crate::grid::{Field, PolarGrid, RectGrid};
use crate::scalar::Scalar;

/// Angular factor of a separated disk mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularVariant {
    Cos,
    Sin,
}

/// How a mode is indexed by the route that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeTag {
    /// Disk per-order route: angular order and cos/sin variant.
    Radial { m: usize, variant: AngularVariant },
    /// Separable rectangle route: half-wave counts per axis (1-based).
    Grid { p: usize, q: usize },
    /// Full 2D route; no separation structure is assumed.
    Generic,
}

impl ModeTag {
    pub fn label(&self) -> String {
        match self {
            ModeTag::Radial { m, variant } => {
                let v = match variant {
                    AngularVariant::Cos => "cos",
                    AngularVariant::Sin => "sin",
                };
                format!("m{m}.{v}")
            }
            ModeTag::Grid { p, q } => format!("p{p}q{q}"),
            ModeTag::Generic => "2d".into(),
        }
    }
}

/// One computed eigenpair, self-contained: it carries the grid handle, the
/// condition, and both the deflection `field` and `sigma = Delta u`
/// (interior and boundary values). The field is normalized to unit L2 mass
/// and a deterministic sign.
pub struct EigenPair<T: Scalar> {
    pub value: T,
    /// Position in the globally sorted spectrum, 0-based.
    pub ordinal: usize,
    /// Degeneracy group: consecutive values within a relative gap of 1e-6
    /// share a group.
    pub group: usize,
    pub tag: ModeTag,
    /// Certified relative residual `|A x - alpha x| / |A x|`.
    pub residual: T,
    /// Floating-point floor of the residual metric at this resolution: a
    /// forward rounding bound on evaluating `A x - alpha x` itself. The
    /// certificate is `residual <= max(RESIDUAL_TOL, floor)`.
    pub floor: T,
    pub field: Field<T>,
    pub sigma: Field<T>,
    pub grid: GridHandle<T>,
    pub bc: BcKind<T>,
    pub c0: Option<C0Field<T>>,
}

impl<T: Scalar> EigenPair<T> {
    /// `integral u^2` over the domain (1 after normalization, kept honest).
    pub fn mass(&self) -> T {
        self.grid.integrate_sq(&self.field)
    }

    /// `integral (Delta u)^2` over the domain.
    pub fn int_lap_sq(&self) -> T {
        self.grid.integrate_sq(&self.sigma)
    }

    /// L2 inner product of the deflections. Panics if the two pairs do not
    /// share grid dimensions.
    pub fn overlap(&self, other: &EigenPair<T>) -> T {
        self.grid.integrate_product(&self.field, &other.field)
    }
}

/// Compute the `count` lowest eigenpairs of the assembled operator. May
/// return one extra pair when the cut would split a cos/sin doublet.
pub fn solve_lowest<T: Scalar>(
    op: &DiscreteOperator<T>,
    count: usize,
) -> Result<Vec<EigenPair<T>>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut pairs = match &op.kind {
        OpKind::DiskModes(blocks) => solve_disk_modes(op, blocks, count)?,
        OpKind::Dense2d(block) => solve_dense(op, block, count)?,
        OpKind::RectDense(block) => solve_dense(op, block, count)?,
        OpKind::RectSeparable { lx, ly } => solve_separable(op, lx, ly, count)?,
    };
    finalize(&mut pairs);
    Ok(pairs)
}

/// Sort, assign ordinals and degeneracy groups, normalize mass and sign.
fn finalize<T: Scalar>(pairs: &mut [EigenPair<T>]) {
    pairs.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite eigenvalues"));
    let mut group = 0;
    for i in 0..pairs.len() {
        if i > 0 {
            let prev = pairs[i - 1].value;
            let gap = (pairs[i].value - prev) / pairs[i].value.max(T::fl(1e-300));
            if gap > T::fl(1e-6) {
                group += 1;
            }
        }
        pairs[i].ordinal = i;
        pairs[i].group = group;
        let mass = pairs[i].grid.integrate_sq(&pairs[i].field);
        let mut scale = T::one() / mass.sqrt();
        if leading_sign_negative(&pairs[i].field.interior) {
            scale = -scale;
        }
        pairs[i].field.interior *= scale;
        pairs[i].field.boundary *= scale;
        pairs[i].sigma.interior *= scale;
        pairs[i].sigma.boundary *= scale;
        if pairs[i].field.corners.len() > 0 {
            pairs[i].field.corners *= scale;
            pairs[i].sigma.corners *= scale;
        }
    }
}

/// Sign rule: the first interior entry exceeding 1e-8 of the max magnitude
/// must be positive.
fn leading_sign_negative<T: Scalar>(v: &DVector<T>) -> bool {
    let max = v.amax();
    let floor = max * T::fl(1e-8);
    for &x in v.iter() {
        if x.abs() > floor {
            return x < T::zero();
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Spectrum extraction.

/// Diagonal similarity scaling by powers of two so row and column norms
/// match (Parlett-Reinsch). The mapped-polar operator is strongly graded
/// (axis rows carry 1/s^2 factors squared by the composition) and the QR
/// iteration stalls on it unbalanced. Powers of two keep the similarity
/// exact in floating point, so the eigenvalues are untouched.
fn balance<T: Scalar>(a: &mut DMatrix<T>) {
    let n = a.nrows();
    let radix = T::fl(2.0);
    let radix2 = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c > T::zero() && r > T::zero() {
                let s = c + r;
                let mut f = T::one();
                let mut g = r / radix;
                while c < g {
                    f *= radix;
                    c *= radix2;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= radix2;
                }
                if (c + r) / f < s * T::fl(0.95) {
                    done = false;
                    let inv = T::one() / f;
                    for j in 0..n {
                        a[(i, j)] *= inv;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Real eigenvalues of a dense nonsymmetric matrix via real Schur form,
/// after balancing. A stalled QR iteration is retried under an exact
/// diagonal shift (which changes the iteration trajectory but moves every
/// eigenvalue by the known delta), so only a genuinely pathological matrix
/// fails, and it fails loudly instead of spinning.
fn schur_eigenvalues<T: Scalar>(a: &DMatrix<T>, context: &str) -> Result<Vec<Complex<T>>> {
    let n = a.nrows();
    let max_niter = 200 * n.max(10);
    let scale = a.amax().max(T::one());
    for attempt in 0..4u32 {
        let delta = scale * T::fl(1e-3) * T::of_usize(attempt as usize);
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] -= delta;
        }
        balance(&mut b);
        if let Some(schur) = nalgebra::linalg::Schur::try_new(b, T::default_epsilon(), max_niter)
        {
            return Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|z| Complex::new(z.re + delta, z.im))
                .collect());
        }
    }
    Err(Error::EigenFailure(format!("{context}: Schur iteration stalled")))
}

/// Select the `count` lowest strictly positive real eigenvalues, sorted.
/// Fails if the spectrum is too short, or if a complex or negative
/// eigenvalue intrudes below the selected range (the continuum operator is
/// positive with a real spectrum, so such an intruder means the
/// discretization cannot be trusted at this resolution).
fn select_lowest_real<T: Scalar>(
    values: &[Complex<T>],
    count: usize,
    context: &str,
) -> Result<Vec<T>> {
    let scale = values
        .iter()
        .map(|z| z.re.abs())
        .fold(T::zero(), |a, b| a.max(b))
        .max(T::one());
    let im_tol = scale * T::fl(1e-10);
    let mut reals: Vec<T> = values
        .iter()
        .filter(|z| z.im.abs() <= im_tol && z.re > T::zero())
        .map(|z| z.re)
        .collect();
    reals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    if reals.len() < count {
        return Err(Error::EigenFailure(format!(
            "{context}: requested {count} eigenvalues, found {} positive real ones",
            reals.len()
        )));
    }
    let threshold = reals[count - 1];
    for z in values {
        let intrudes = z.re < threshold;
        if intrudes && z.im.abs() > im_tol {
            return Err(Error::EigenFailure(format!(
                "{context}: complex eigenvalue {:.3e}+{:.3e}i below the requested range",
                z.re.f64(),
                z.im.f64()
            )));
        }
        if z.im.abs() <= im_tol && z.re < -im_tol {
            return Err(Error::EigenFailure(format!(
                "{context}: negative eigenvalue {:.3e} in a positive spectrum",
                z.re.f64()
            )));
        }
    }
    reals.truncate(count);
    Ok(reals)
}

// ---------------------------------------------------------------------------
// Inverse iteration.

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random start vector with entries in [-0.5, 0.5).
fn deterministic_start<T: Scalar>(n: usize, seed: u64) -> DVector<T> {
    let mut state = seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ 0xDEAD_BEEF_CAFE_F00D;
    DVector::from_fn(n, |_, _| {
        let v = (splitmix_next(&mut state) >> 11) as f64 / 9007199254740992.0 - 0.5;
        T::fl(v)
    })
}

/// Reciprocal row sums of a matrix, used to equilibrate the residual
/// metric. The composed fourth-order operator on a polar grid is strongly
/// graded: near-axis rows reach magnitudes around `n_theta^4 / h^4`, so a
/// plain l2 residual is dominated by the rounding of those few rows (its
/// floating-point floor is roughly `eps * |A| / alpha`, which crosses 1e-8
/// at moderate resolutions). Scaling each collocation row to unit size
/// certifies the same eigenproblem written as the pencil
/// `(D A) x = alpha (D) x`, i.e. relative satisfaction of every discrete
/// equation, independent of the grading.
fn row_scales<T: Scalar>(a: &DMatrix<T>) -> DVector<T> {
    DVector::from_fn(a.nrows(), |i, _| {
        let mut s = T::zero();
        for j in 0..a.ncols() {
            s += a[(i, j)].abs();
        }
        T::one() / s.max(T::fl(1e-300))
    })
}

/// Rayleigh quotient and equilibrated residual of a unit vector in one
/// pass. The quotient is the best value estimate a converged iterate
/// offers; the incoming shift estimate (Schur or Ritz) can carry more
/// error than the vector does.
fn quotient_and_residual<T: Scalar>(
    a: &DMatrix<T>,
    d: &DVector<T>,
    x: &DVector<T>,
) -> (T, T) {
    let ax = a * x;
    let rq = x.dot(&ax) / x.dot(x);
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..ax.len() {
        let w = d[i];
        let r = w * (ax[i] - rq * x[i]);
        num += r * r;
        let s = w * ax[i];
        den += s * s;
    }
    (rq, num.sqrt() / den.sqrt().max(T::fl(1e-300)))
}

/// Final certification of an eigenvector: refined value, equilibrated
/// residual, and the floating-point floor of the residual evaluation.
///
/// The floor is a forward rounding bound: row i of `A x - rq x` cannot be
/// evaluated more accurately than `eps * (nnz_i + 4) * (|A||x| + |rq||x|)_i`
/// in this precision, so residuals are certified against
/// `max(tolerance, floor)`. At deep refinements the composed fourth-order
/// operator norm grows like `1/h^4` and the floor crosses any fixed
/// tolerance; that is a property of the metric's arithmetic, not of the
/// eigenvector.
fn certify<T: Scalar>(a: &DMatrix<T>, d: &DVector<T>, x: &DVector<T>) -> (T, T, T) {
    let n = a.nrows();
    let ax = a * x;
    let rq = x.dot(&ax) / x.dot(x);
    let eps = T::default_epsilon();
    let mut num = T::zero();
    let mut den = T::zero();
    let mut noise = T::zero();
    for i in 0..n {
        let w = d[i];
        let r = w * (ax[i] - rq * x[i]);
        num += r * r;
        let s = w * ax[i];
        den += s * s;
        let mut t = T::zero();
        let mut k = T::fl(4.0);
        for j in 0..n {
            let av = a[(i, j)].abs();
            if av > T::zero() {
                t += av * x[j].abs();
                k += T::one();
            }
        }
        let b = eps * k * w * (t + rq.abs() * x[i].abs());
        noise += b * b;
    }
    let den = den.sqrt().max(T::fl(1e-300));
    (rq, num.sqrt() / den, noise.sqrt() / den)
}

/// Default certification tolerance for eigenpair residuals.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Remove components along previously accepted vectors of the same
/// degeneracy cluster (modified Gram-Schmidt). Returns the remaining norm.
fn orthogonalize<T: Scalar>(x: &mut DVector<T>, accepted: &[DVector<T>]) -> T {
    for q in accepted {
        let proj = q.dot(x);
        *x -= q * proj;
    }
    x.norm()
}

/// Shifted inverse iteration for the eigenvector of `a` at eigenvalue
/// `lambda`, orthogonalized within its cluster. The shift sits a relative
/// 1e-9 off the eigenvalue so the factorization stays regular while the
/// convergence factor per sweep is the eigenvalue gap over 1e-9 * lambda.
fn inverse_iteration<T: Scalar>(
    a: &DMatrix<T>,
    d: &DVector<T>,
    lambda: T,
    scale: T,
    seed: u64,
    start: Option<&DVector<T>>,
    accepted: &[DVector<T>],
    context: &str,
) -> Result<(DVector<T>, T, T, T)> {
    let n = a.nrows();
    let mut shift = lambda * (T::one() + T::fl(1e-9)) + scale * T::fl(1e-13);
    let factorize = |shift: T| {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] -= shift;
        }
        b.lu()
    };
    let mut lu = factorize(shift);
    let mut x = match start {
        Some(v) => v.clone(),
        None => deterministic_start::<T>(n, seed),
    };
    let norm = orthogonalize(&mut x, accepted);
    if norm < T::fl(1e-10) {
        x = deterministic_start::<T>(n, seed);
        let norm = orthogonalize(&mut x, accepted);
        x /= norm;
    } else {
        x /= norm;
    }
    let mut best: Option<(DVector<T>, T, T)> = None;
    let mut reseed = 1u64;
    let mut stall = 0u32;
    for iter in 0..60 {
        let y = lu.solve(&x);
        let y = match y {
            Some(y) if y.iter().all(|v| v.f64().is_finite()) => y,
            _ => {
                // Singular or overflowed factorization: nudge the shift.
                shift = shift * (T::one() + T::fl(1e-8)) + scale * T::fl(1e-11);
                lu = factorize(shift);
                continue;
            }
        };
        x = &y / y.norm();
        let rem = orthogonalize(&mut x, accepted);
        if rem < T::fl(1e-10) {
            // Iterate collapsed onto the accepted cluster basis: restart
            // from a fresh deterministic direction.
            x = deterministic_start::<T>(n, seed.wrapping_add(reseed));
            reseed += 1;
            let norm = orthogonalize(&mut x, accepted);
            x /= norm;
            continue;
        }
        x /= rem;
        let (rq, r) = quotient_and_residual(a, d, &x);
        match best.as_ref() {
            Some((_, _, br)) if r >= *br * T::fl(0.7) => {
                // No meaningful progress: the iterate has hit the
                // arithmetic floor of the residual metric.
                stall += 1;
                if r < *br {
                    best = Some((x.clone(), rq, r));
                }
                if stall >= 3 {
                    break;
                }
            }
            _ => {
                best = Some((x.clone(), rq, r));
                stall = 0;
            }
        }
        if r <= T::fl(1e-12) || (iter >= 4 && r <= T::fl(1e-10)) {
            break;
        }
    }
    let (v, _, _) = best.ok_or_else(|| {
        Error::EigenFailure(format!("{context}: inverse iteration produced no iterate"))
    })?;
    let (value, r, floor) = certify(a, d, &v);
    let tol = T::fl(RESIDUAL_TOL).max(floor);
    if r > tol {
        return Err(Error::EigenFailure(format!(
            "{context}: eigenvector residual {:.3e} exceeds {:.3e}",
            r.f64(),
            tol.f64()
        )));
    }
    // The refined quotient must stay consistent with the requested
    // eigenvalue; a drift beyond the cluster tolerance means the iteration
    // latched onto a different part of the spectrum. Below the arithmetic
    // floor the input value itself is that uncertain, so the guard widens
    // with it (reduced-precision scalars refine across their own rounding).
    let drift = (value - lambda).abs() / lambda.abs().max(T::fl(1e-300));
    if drift > T::fl(1e-5).max(floor * T::fl(10.0)) {
        return Err(Error::EigenFailure(format!(
            "{context}: refined value drifted {:.3e} from the requested eigenvalue",
            drift.f64()
        )));
    }
    Ok((v, value, r, floor))
}

// ---------------------------------------------------------------------------
// Shift-invert subspace iteration for the dense 2D routes.
//
// The composed fourth-order operator on mapped 2D grids defeats the plain QR
// iteration (the clamped closure rows on the graded polar metric stall it),
// so the low end of the spectrum is extracted by the classical robust
// alternative: block inverse iteration with A factored once, followed by a
// small Rayleigh-Ritz projection whose eigenproblem QR handles easily.

/// Orthonormalize the columns of `x` in place (modified Gram-Schmidt).
/// Columns that collapse are replaced from the deterministic stream.
fn orthonormalize_columns<T: Scalar>(x: &mut DMatrix<T>, seed_base: u64) {
    let n = x.nrows();
    let s = x.ncols();
    let mut reseed = 0u64;
    for c in 0..s {
        loop {
            for p in 0..c {
                let proj = x.column(p).dot(&x.column(c));
                let prev = x.column(p).into_owned();
                let mut col = x.column_mut(c);
                col.axpy(-proj, &prev, T::one());
            }
            let norm = x.column(c).norm();
            if norm > T::fl(1e-12) {
                let mut col = x.column_mut(c);
                col /= norm;
                break;
            }
            reseed += 1;
            let fresh = deterministic_start::<T>(n, seed_base.wrapping_add(1000 + reseed));
            x.set_column(c, &fresh);
        }
    }
}

/// Lowest `count` eigenvalues (and Ritz starting vectors) of `a` by inverse
/// subspace iteration. Returns sorted positive real eigenvalues with their
/// Ritz vectors; the same intruder guards as the direct path apply to the
/// projected spectrum.
fn subspace_lowest<T: Scalar>(
    a: &DMatrix<T>,
    count: usize,
    context: &str,
) -> Result<Vec<(T, DVector<T>)>> {
    let n = a.nrows();
    let s = (count + 6).min(n);
    let mut x = DMatrix::zeros(n, s);
    for c in 0..s {
        x.set_column(c, &deterministic_start::<T>(n, 7 + c as u64));
    }
    orthonormalize_columns(&mut x, 7);
    let lu = a.clone().lu();
    let mut prev_ritz: Option<Vec<T>> = None;
    let mut stable = 0;
    for sweep in 0..120 {
        let y = lu.solve(&x).ok_or_else(|| {
            Error::EigenFailure(format!("{context}: operator factorization is singular"))
        })?;
        x = y;
        orthonormalize_columns(&mut x, 7 + sweep as u64);
        // Ritz check every few sweeps once the subspace has settled a bit.
        if sweep >= 6 && sweep % 2 == 0 {
            let g = x.transpose() * a * &x;
            if let Ok(vals) = schur_eigenvalues(&g, context) {
                let mut reals: Vec<T> = vals
                    .iter()
                    .filter(|z| z.im.abs() <= z.re.abs().max(T::one()) * T::fl(1e-8))
                    .map(|z| z.re)
                    .collect();
                reals.sort_by(|p, q| p.partial_cmp(q).expect("finite eigenvalues"));
                reals.truncate(count);
                if let Some(prev) = &prev_ritz {
                    if prev.len() == reals.len() {
                        let drift = prev
                            .iter()
                            .zip(&reals)
                            .map(|(p, r)| ((*p - *r) / r.max(T::fl(1e-300))).abs())
                            .fold(T::zero(), |acc, d| acc.max(d));
                        stable = if drift < T::fl(1e-12) { stable + 1 } else { 0 };
                    }
                }
                prev_ritz = Some(reals);
                if stable >= 2 {
                    break;
                }
            }
        }
    }
    // Final projection: eigenvalues and eigenvectors of the small matrix.
    let g = x.transpose() * a * &x;
    let gvals = schur_eigenvalues(&g, context)?;
    let gd = row_scales(&g);
    let lows = select_lowest_real(&gvals, count, context)?;
    let gscale = lows[lows.len() - 1];
    let mut out = Vec::with_capacity(count);
    for range in clusters(&lows) {
        let mut accepted: Vec<DVector<T>> = Vec::new();
        for k in range {
            let (gv, _val, _r, _floor) = inverse_iteration(
                &g,
                &gd,
                lows[k],
                gscale,
                900 + k as u64,
                None,
                &accepted,
                &format!("{context} projected ordinal {k}"),
            )?;
            let ritz = &x * &gv;
            out.push((lows[k], &ritz / ritz.norm()));
            accepted.push(gv);
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
    Ok(out)
}

/// Partition a sorted value list into clusters with relative gaps <= 1e-6.
fn clusters<T: Scalar>(values: &[T]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || {
            let gap = (values[i] - values[i - 1]) / values[i].max(T::fl(1e-300));
            gap > T::fl(1e-6)
        };
        if split {
            out.push(start..i);
            start = i;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Disk per-order route.

fn solve_disk_modes<T: Scalar>(
    op: &DiscreteOperator<T>,
    blocks: &[ModeBlock<T>],
    count: usize,
) -> Result<Vec<EigenPair<T>>> {
    let GridHandle::Polar(grid) = &op.grid else { unreachable!("disk route is polar") };
    // Collect candidate (value, m, rank) triples; order m contributes
    // multiplicity 2 for m >= 1 once expanded to cos/sin variants.
    struct Cand<T> {
        value: T,
        m: usize,
        rank: usize,
    }
    let mut cands: Vec<Cand<T>> = Vec::new();
    for mb in blocks {
        let a = mb.block.compose();
        let vals = schur_eigenvalues(&a, &format!("disk order {}", mb.m))?;
        let take = count.min(a.nrows());
        let lows = select_lowest_real(&vals, take, &format!("disk order {}", mb.m))?;
        for (rank, &v) in lows.iter().enumerate() {
            cands.push(Cand { value: v, m: mb.m, rank });
        }
    }
    cands.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .expect("finite eigenvalues")
            .then(a.m.cmp(&b.m))
    });
    // Walk candidates until the requested multiplicity is covered.
    let mut chosen: Vec<&Cand<T>> = Vec::new();
    let mut mult = 0;
    for c in &cands {
        if mult >= count {
            break;
        }
        chosen.push(c);
        mult += if c.m == 0 { 1 } else { 2 };
    }
    if mult < count {
        return Err(Error::EigenFailure(format!(
            "disk route: requested {count} modes, grid resolves only {mult}"
        )));
    }

    let scale = chosen
        .iter()
        .map(|c| c.value)
        .fold(T::zero(), |a, b| a.max(b));
    let mut pairs = Vec::new();
    for c in &chosen {
        let block = &blocks[c.m].block;
        let a = block.compose();
        let d = row_scales(&a);
        let seed = (c.m as u64) << 32 | c.rank as u64;
        // Radial spectra are simple (no clusters within one order).
        let (f, value, residual, floor) = inverse_iteration(
            &a,
            &d,
            c.value,
            scale,
            seed,
            None,
            &[],
            &format!("disk order {} rank {}", c.m, c.rank),
        )?;
        let (sig_int, sig_b) = block.sigma_parts(&f);
        let variants: &[AngularVariant] = if c.m == 0 {
            &[AngularVariant::Cos]
        } else {
            &[AngularVariant::Cos, AngularVariant::Sin]
        };
        for &variant in variants {
            let (field, sigma) =
                expand_radial(grid, c.m, variant, &f, &sig_int, sig_b[0]);
            pairs.push(EigenPair {
                value,
                ordinal: 0,
                group: 0,
                tag: ModeTag::Radial { m: c.m, variant },
                residual,
                floor,
                field,
                sigma,
                grid: op.grid.clone(),
                bc: op.bc,
                c0: op.c0.clone(),
            });
        }
    }
    Ok(pairs)
}

/// Lowest `count` modes of a single angular order on the disk route, cos
/// variant only (the sin partner is the same mode rotated). Convergence
/// ladders refine one known mode deeply with this instead of sweeping every
/// angular block; large blocks switch from full Schur to shift-invert
/// subspace iteration.
pub fn solve_radial_mode<T: Scalar>(
    op: &DiscreteOperator<T>,
    m: usize,
    count: usize,
) -> Result<Vec<EigenPair<T>>> {
    let OpKind::DiskModes(blocks) = &op.kind else {
        return Err(Error::EigenFailure(
            "per-order solve needs the decoupled disk route".into(),
        ));
    };
    let GridHandle::Polar(grid) = &op.grid else { unreachable!("disk route is polar") };
    let Some(mb) = blocks.iter().find(|b| b.m == m) else {
        return Err(Error::EigenFailure(format!(
            "angular order {m} is not resolved at this angular resolution"
        )));
    };
    let a = mb.block.compose();
    let context = format!("disk order {m}");
    if count == 0 || count > a.nrows() {
        return Err(Error::EigenFailure(format!(
            "{context}: requested {count} of {} resolvable modes",
            a.nrows()
        )));
    }
    let (values, starts): (Vec<T>, Vec<Option<DVector<T>>>) = if a.nrows() <= 450 {
        let vals = schur_eigenvalues(&a, &context)?;
        let lows = select_lowest_real(&vals, count, &context)?;
        let n = lows.len();
        (lows, vec![None; n])
    } else {
        let ritz = subspace_lowest(&a, count, &context)?;
        let vals = ritz.iter().map(|(v, _)| *v).collect();
        (vals, ritz.into_iter().map(|(_, v)| Some(v)).collect())
    };
    let d = row_scales(&a);
    let scale = values[values.len() - 1];
    let mut pairs = Vec::new();
    for (rank, lam) in values.iter().enumerate() {
        let seed = (m as u64) << 32 | rank as u64;
        let (f, value, residual, floor) = inverse_iteration(
            &a,
            &d,
            *lam,
            scale,
            seed,
            starts[rank].as_ref(),
            &[],
            &format!("{context} rank {rank}"),
        )?;
        let (sig_int, sig_b) = mb.block.sigma_parts(&f);
        let (field, sigma) =
            expand_radial(grid, m, AngularVariant::Cos, &f, &sig_int, sig_b[0]);
        pairs.push(EigenPair {
            value,
            ordinal: 0,
            group: 0,
            tag: ModeTag::Radial { m, variant: AngularVariant::Cos },
            residual,
            floor,
            field,
            sigma,
            grid: op.grid.clone(),
            bc: op.bc,
            c0: op.c0.clone(),
        });
    }
    finalize(&mut pairs);
    Ok(pairs)
}

/// Expand radial data to a full polar field with the given angular factor.
fn expand_radial<T: Scalar>(
    grid: &PolarGrid<T>,
    m: usize,
    variant: AngularVariant,
    f: &DVector<T>,
    sig_int: &DVector<T>,
    sig_b: T,
) -> (Field<T>, Field<T>) {
    let nt = grid.n_theta;
    let ang: Vec<T> = (0..nt)
        .map(|j| {
            let arg = grid.theta(j) * T::of_usize(m);
            match variant {
                AngularVariant::Cos => arg.cos(),
                AngularVariant::Sin => arg.sin(),
            }
        })
        .collect();
    let mut field = grid.zero_field();
    let mut sigma = grid.zero_field();
    for i in 0..grid.rings {
        for j in 0..nt {
            let id = grid.idx(i, j);
            field.interior[id] = f[i] * ang[j];
            sigma.interior[id] = sig_int[i] * ang[j];
        }
    }
    for j in 0..nt {
        sigma.boundary[j] = sig_b * ang[j];
    }
    (field, sigma)
}

// ---------------------------------------------------------------------------
// Dense 2D route (mapped polar or rectangle tensor grid).

fn solve_dense<T: Scalar>(
    op: &DiscreteOperator<T>,
    block: &DenseBlock<T>,
    count: usize,
) -> Result<Vec<EigenPair<T>>> {
    let a = block.compose();
    let context = "dense 2d route";
    if count > a.nrows() {
        return Err(Error::EigenFailure(format!(
            "{context}: requested {count} modes, operator has {}",
            a.nrows()
        )));
    }
    let ritz = subspace_lowest(&a, count, context)?;
    let d = row_scales(&a);
    let lows: Vec<T> = ritz.iter().map(|(v, _)| *v).collect();
    let scale = lows[lows.len() - 1];
    let mut pairs = Vec::new();
    for range in clusters(&lows) {
        let mut accepted: Vec<DVector<T>> = Vec::new();
        for k in range.clone() {
            let (v, value, residual, floor) = inverse_iteration(
                &a,
                &d,
                lows[k],
                scale,
                k as u64 + 101,
                Some(&ritz[k].1),
                &accepted,
                &format!("{context} ordinal {k}"),
            )?;
            let (sig_int, sig_b) = block.sigma_parts(&v);
            let (field, sigma) = match &op.grid {
                GridHandle::Polar(g) => fields_polar(g, &v, &sig_int, &sig_b),
                GridHandle::Rect(g) => fields_rect(g, &v, &sig_int, &sig_b),
            };
            pairs.push(EigenPair {
                value,
                ordinal: 0,
                group: 0,
                tag: ModeTag::Generic,
                residual,
                floor,
                field,
                sigma,
                grid: op.grid.clone(),
                bc: op.bc,
                c0: op.c0.clone(),
            });
            accepted.push(v);
        }
    }
    Ok(pairs)
}

fn fields_polar<T: Scalar>(
    grid: &PolarGrid<T>,
    u: &DVector<T>,
    sig_int: &DVector<T>,
    sig_b: &DVector<T>,
) -> (Field<T>, Field<T>) {
    let mut field = grid.zero_field();
    let mut sigma = grid.zero_field();
    field.interior.copy_from(u);
    sigma.interior.copy_from(sig_int);
    sigma.boundary.copy_from(sig_b);
    (field, sigma)
}

fn fields_rect<T: Scalar>(
    grid: &RectGrid<T>,
    u: &DVector<T>,
    sig_int: &DVector<T>,
    sig_b: &DVector<T>,
) -> (Field<T>, Field<T>) {
    let mut field = grid.zero_field();
    let mut sigma = grid.zero_field();
    field.interior.copy_from(u);
    sigma.interior.copy_from(sig_int);
    // sigma corners stay zero: a clamped deflection is quadratic in each
    // wall distance, so its Laplacian vanishes at the corners.
    sigma.boundary.copy_from(sig_b);
    (field, sigma)
}

// ---------------------------------------------------------------------------
// Separable hinged rectangle.

fn solve_separable<T: Scalar>(
    op: &DiscreteOperator<T>,
    lx: &DMatrix<T>,
    ly: &DMatrix<T>,
    count: usize,
) -> Result<Vec<EigenPair<T>>> {
    let GridHandle::Rect(grid) = &op.grid else { unreachable!("separable route is rect") };
    // 1D Dirichlet Laplacians are symmetric negative definite; eta = -lambda.
    let ex = SymmetricEigen::new(lx.clone());
    let ey = SymmetricEigen::new(ly.clone());
    let order = |e: &SymmetricEigen<T, nalgebra::Dyn>| -> Vec<(T, DVector<T>)> {
        let mut v: Vec<(T, DVector<T>)> = e
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &l)| (-l, e.eigenvectors.column(i).into_owned()))
            .collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
        v
    };
    let etax = order(&ex);
    let etay = order(&ey);
    let total = etax.len() * etay.len();
    if count > total {
        return Err(Error::EigenFailure(format!(
            "separable route: requested {count} modes, grid resolves {total}"
        )));
    }
    let mut cands: Vec<(T, usize, usize)> = Vec::new();
    for p in 0..etax.len() {
        for q in 0..etay.len() {
            let eta = etax[p].0 + etay[q].0;
            cands.push((eta * eta, p, q));
        }
    }
    cands.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite eigenvalues")
            .then(a.1.cmp(&b.1))
    });
    cands.truncate(count);

    let mut pairs = Vec::new();
    for &(alpha, p, q) in &cands {
        let eta = etax[p].0 + etay[q].0;
        let vx = &etax[p].1;
        let vy = &etay[q].1;
        let mut field = grid.zero_field();
        let mut sigma = grid.zero_field();
        for i in 1..grid.nx {
            for j in 1..grid.ny {
                let id = grid.idx(i, j);
                let u = vx[i - 1] * vy[j - 1];
                field.interior[id] = u;
                sigma.interior[id] = -eta * u;
            }
        }
        // Residual computed honestly from the 1D operators:
        // L u = lx U + U ly^T acting on the interior tensor.
        let umat = DMatrix::from_fn(grid.nx - 1, grid.ny - 1, |i, j| {
            field.interior[grid.idx(i + 1, j + 1)]
        });
        let lu = lx * &umat + &umat * ly.transpose();
        let llu = lx * &lu + &lu * ly.transpose();
        let residual = (&llu - &umat * alpha).norm() / llu.norm();
        // Rounding floor of the tensor evaluation: two applications of the
        // 1D operators, each bounded by its max absolute row sum.
        let row_sum = |m: &DMatrix<T>| {
            (0..m.nrows())
                .map(|i| m.row(i).iter().fold(T::zero(), |s, v| s + v.abs()))
                .fold(T::zero(), |a, b| a.max(b))
        };
        let op_norm = row_sum(lx) + row_sum(ly);
        let floor = T::default_epsilon() * T::fl(16.0) * op_norm * op_norm / alpha;
        let tol = T::fl(RESIDUAL_TOL).max(floor);
        if residual > tol {
            return Err(Error::EigenFailure(format!(
                "separable route: tensor mode residual {:.3e} exceeds {:.3e}",
                residual.f64(),
                tol.f64()
            )));
        }
        pairs.push(EigenPair {
            value: alpha,
            ordinal: 0,
            group: 0,
            tag: ModeTag::Grid { p: p + 1, q: q + 1 },
            residual,
            floor,
            field,
            sigma,
            grid: op.grid.clone(),
            bc: op.bc,
            c0: op.c0.clone(),
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble, assemble_with, AssemblyOptions, Resolution, Strategy};
    use crate::geometry::{C0Extension, DomainSpec};
    use crate::oracles;

    fn disk(r: f64) -> DomainSpec<f64> {
        DomainSpec::Disk { radius: r }
    }

    fn solve_disk(bc: BcKind<f64>, radial: usize, count: usize) -> Vec<EigenPair<f64>> {
        let op = assemble(&disk(1.0), bc, Resolution::Polar { radial, angular: 32 }).unwrap();
        solve_lowest(&op, count).unwrap()
    }

    #[test]
    fn clamped_disk_spectrum_matches_the_dispersion_roots() {
        let pairs = solve_disk(BcKind::Dirichlet, 200, 8);
        let table = oracles::disk_table(|m, n| oracles::disk_clamped(m, n, 1.0), 8).unwrap();
        // Expand oracle multiplicities to compare one-to-one.
        let mut expect = Vec::new();
        for mode in &table {
            for _ in 0..mode.multiplicity() {
                expect.push((mode.m, mode.alpha));
            }
        }
        assert!(pairs.len() >= 8);
        for (pair, (m, alpha)) in pairs.iter().zip(&expect) {
            let rel = (pair.value - alpha).abs() / alpha;
            assert!(
                rel < 5e-4,
                "ordinal {}: got {:.6}, want {:.6} (rel {rel:.2e})",
                pair.ordinal,
                pair.value,
                alpha
            );
            match pair.tag {
                ModeTag::Radial { m: got, .. } => assert_eq!(got, *m),
                _ => panic!("disk route must tag angular orders"),
            }
            assert!(pair.residual < RESIDUAL_TOL.max(pair.floor));
            assert!((pair.mass() - 1.0).abs() < 1e-12, "unit mass");
        }
        // Doublets share the exact same value and group.
        assert_eq!(pairs[1].value, pairs[2].value);
        assert_eq!(pairs[1].group, pairs[2].group);
        assert_ne!(pairs[0].group, pairs[1].group);
    }

    #[test]
    fn clamped_disk_eigenvalue_converges_at_second_order() {
        let alpha = oracles::disk_clamped(0, 1, 1.0).unwrap().alpha;
        let coarse = (solve_disk(BcKind::Dirichlet, 50, 1)[0].value - alpha).abs();
        let fine = (solve_disk(BcKind::Dirichlet, 100, 1)[0].value - alpha).abs();
        let rate = (coarse / fine).log2();
        assert!(rate > 1.6 && rate < 2.6, "rate {rate:.2}");
    }

    #[test]
    fn hinged_disk_spectrum_matches_the_bessel_zeros() {
        let pairs = solve_disk(BcKind::Navier, 200, 6);
        let table = oracles::disk_table(|m, n| oracles::disk_navier(m, n, 1.0), 6).unwrap();
        let mut expect = Vec::new();
        for mode in &table {
            for _ in 0..mode.multiplicity() {
                expect.push(mode.alpha);
            }
        }
        for (pair, alpha) in pairs.iter().zip(&expect) {
            let rel = (pair.value - alpha).abs() / alpha;
            assert!(rel < 5e-4, "got {:.6}, want {:.6}", pair.value, alpha);
        }
    }

    #[test]
    fn supported_disk_spectrum_matches_the_oracle() {
        let bc = BcKind::Supported { mu: 0.3, extension: C0Extension::ParallelCurve };
        let pairs = solve_disk(bc, 200, 4);
        let table =
            oracles::disk_table(|m, n| oracles::disk_supported(m, n, 1.0, 0.3), 4).unwrap();
        let mut expect = Vec::new();
        for mode in &table {
            for _ in 0..mode.multiplicity() {
                expect.push(mode.alpha);
            }
        }
        for (pair, alpha) in pairs.iter().zip(&expect) {
            let rel = (pair.value - alpha).abs() / alpha;
            assert!(rel < 5e-4, "got {:.6}, want {:.6}", pair.value, alpha);
        }
    }

    #[test]
    fn dense_route_reproduces_the_disk_doublet() {
        // The full 2D operator on the disk must find the m=1 pair as two
        // nearly identical eigenvalues with residual-certified vectors.
        let opts = AssemblyOptions { strategy: Strategy::Dense2d, ..Default::default() };
        let op = assemble_with(
            &disk(1.0),
            BcKind::Dirichlet,
            Resolution::Polar { radial: 40, angular: 16 },
            opts,
        )
        .unwrap();
        let pairs = solve_lowest(&op, 3).unwrap();
        let alpha1 = oracles::disk_clamped(0, 1, 1.0).unwrap().alpha;
        let alpha2 = oracles::disk_clamped(1, 1, 1.0).unwrap().alpha;
        assert!((pairs[0].value - alpha1).abs() / alpha1 < 5e-3);
        assert!((pairs[1].value - alpha2).abs() / alpha2 < 5e-3);
        assert!((pairs[2].value - alpha2).abs() / alpha2 < 5e-3);
        // Exact discrete symmetry: the doublet splits only at rounding level.
        let split = (pairs[2].value - pairs[1].value).abs() / pairs[1].value;
        assert!(split < 1e-9, "doublet split {split:.2e}");
        assert_eq!(pairs[1].group, pairs[2].group);
        // The two vectors are genuinely independent.
        let overlap = pairs[1].overlap(&pairs[2]).abs();
        assert!(overlap < 1e-6, "doublet overlap {overlap:.2e}");
        for p in &pairs {
            assert!(p.residual < RESIDUAL_TOL.max(p.floor));
        }
    }

    #[test]
    fn separable_route_matches_the_product_formula() {
        let rect = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
        let op = assemble(&rect, BcKind::Navier, Resolution::Tensor { nx: 60, ny: 60 }).unwrap();
        let pairs = solve_lowest(&op, 4).unwrap();
        // Discrete dispersion is known in closed form:
        // eta_p = (4/h^2) sin^2(p pi h / 2).
        let h = 1.0 / 60.0;
        let eta = |p: f64| (2.0 / h * (p * std::f64::consts::PI * h / 2.0).sin()).powi(2);
        let expect11 = (eta(1.0) + eta(1.0)).powi(2);
        assert!((pairs[0].value - expect11).abs() / expect11 < 1e-12);
        // And converges to the continuum product eigenvalue at O(h^2).
        let alpha11 = oracles::rectangle_navier(1.0, 1.0, 1, 1).unwrap();
        assert!((pairs[0].value - alpha11).abs() / alpha11 < 2e-3);
        // Square symmetry: (1,2) and (2,1) form a degenerate group.
        assert_eq!(pairs[1].group, pairs[2].group);
        assert!(matches!(pairs[1].tag, ModeTag::Grid { .. }));
        for p in &pairs {
            assert!(p.residual < RESIDUAL_TOL.max(p.floor), "separable residual {:.2e}", p.residual);
            assert!((p.mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clamped_rectangle_eigenvalue_is_consistent_under_refinement() {
        // No separable reference exists for the clamped rectangle; check
        // second-order self-convergence and the hinged lower bound
        // (clamping shrinks the trial space, so the eigenvalue grows).
        let rect = DomainSpec::Rectangle { a: 1.0, b: 1.0 };
        let solve1 = |n: usize| {
            let op = assemble(&rect, BcKind::Dirichlet, Resolution::Tensor { nx: n, ny: n })
                .unwrap();
            solve_lowest(&op, 1).unwrap()[0].value
        };
        let (a16, a24, a32) = (solve1(16), solve1(24), solve1(32));
        let hinged = oracles::rectangle_navier(1.0, 1.0, 1, 1).unwrap();
        assert!(a32 > hinged, "clamped above hinged");
        // Self-convergence against the finest grid: for errors C h^2 the
        // ratio (a16 - a32)/(a24 - a32) is (1/16^2 - 1/32^2)/(1/24^2 -
        // 1/32^2) = 3.86; corner regularity and the closure stencil move it
        // a little above that.
        let ratio = (a16 - a32) / (a24 - a32);
        assert!(
            ratio > 2.8 && ratio < 5.5,
            "refinement ratio {ratio:.2} (values {a16:.3}, {a24:.3}, {a32:.3})"
        );
        assert!(a32 > 1200.0 && a32 < 1400.0, "first clamped square value {a32:.1}");
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let run = || {
            let pairs = solve_disk(BcKind::Dirichlet, 60, 3);
            pairs
                .iter()
                .flat_map(|p| {
                    p.field
                        .interior
                        .iter()
                        .map(|v| v.to_bits())
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
