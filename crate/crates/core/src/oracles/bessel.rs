//! Bessel functions J_m and modified Bessel functions I_m of integer order,
//! evaluated by Miller's downward recurrence with sum normalization.
//!
//! Downward recurrence is stable for both families because the wanted
//! solution is minimal in the downward direction above the turning point.
//! Normalization uses `J_0 + 2 sum J_{2k} = 1` and
//! `e^x = I_0 + 2 sum I_k`; the latter has all-positive terms, so no
//! cancellation occurs. Accuracy is pinned against an mpmath-generated
//! fixture in `tests/fixtures/bessel_reference.csv`.

/// `J_n(x)` for all orders `n = 0..=m_max` at once. Requires `x >= 0`.
pub fn bessel_j_seq(m_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel argument must be finite and nonnegative");
    if x == 0.0 {
        let mut out = vec![0.0; m_max + 1];
        out[0] = 1.0;
        return out;
    }
    if x < 1.0e-8 {
        // Two-term power series; at this size the truncation error is below
        // f64 resolution and the recurrence path would need many rescales.
        return (0..=m_max)
            .map(|m| {
                let half = 0.5 * x;
                let lead = half.powi(m as i32) / factorial(m);
                lead * (1.0 - half * half / (m as f64 + 1.0))
            })
            .collect();
    }
    let start = start_order(m_max, x);
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1.0e-30;
    for n in (1..=start).rev() {
        vals[n - 1] = (2.0 * n as f64 / x) * vals[n] - vals[n + 1];
        if vals[n - 1].abs() > 1.0e250 {
            for v in vals[n - 1..].iter_mut() {
                *v *= 1.0e-250;
            }
        }
    }
    let mut norm = vals[0];
    let mut k = 2;
    while k <= start {
        norm += 2.0 * vals[k];
        k += 2;
    }
    vals.truncate(m_max + 1);
    for v in &mut vals {
        *v /= norm;
    }
    vals
}

/// `I_n(x)` for all orders `n = 0..=m_max` at once. Requires `x >= 0`.
pub fn bessel_i_seq(m_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel argument must be finite and nonnegative");
    if x == 0.0 {
        let mut out = vec![0.0; m_max + 1];
        out[0] = 1.0;
        return out;
    }
    if x < 1.0e-8 {
        return (0..=m_max)
            .map(|m| {
                let half = 0.5 * x;
                let lead = half.powi(m as i32) / factorial(m);
                lead * (1.0 + half * half / (m as f64 + 1.0))
            })
            .collect();
    }
    let start = start_order(m_max, x);
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1.0e-30;
    for n in (1..=start).rev() {
        vals[n - 1] = (2.0 * n as f64 / x) * vals[n] + vals[n + 1];
        if vals[n - 1].abs() > 1.0e250 {
            for v in vals[n - 1..].iter_mut() {
                *v *= 1.0e-250;
            }
        }
    }
    let mut norm = vals[0];
    for v in vals.iter().take(start + 1).skip(1) {
        norm += 2.0 * v;
    }
    let scale = x.exp() / norm;
    vals.truncate(m_max + 1);
    for v in &mut vals {
        *v *= scale;
    }
    vals
}

pub fn bessel_j(m: usize, x: f64) -> f64 {
    bessel_j_seq(m, x)[m]
}

pub fn bessel_i(m: usize, x: f64) -> f64 {
    bessel_i_seq(m, x)[m]
}

/// `J_m'(x)` via `J_0' = -J_1` and `2 J_m' = J_{m-1} - J_{m+1}`.
pub fn bessel_j_prime(m: usize, x: f64) -> f64 {
    let seq = bessel_j_seq(m + 1, x);
    if m == 0 {
        -seq[1]
    } else {
        0.5 * (seq[m - 1] - seq[m + 1])
    }
}

/// `I_m'(x)` via `I_0' = I_1` and `2 I_m' = I_{m-1} + I_{m+1}`.
pub fn bessel_i_prime(m: usize, x: f64) -> f64 {
    let seq = bessel_i_seq(m + 1, x);
    if m == 0 {
        seq[1]
    } else {
        0.5 * (seq[m - 1] + seq[m + 1])
    }
}

/// `J_m''(x)` from the defining ODE `x^2 J'' + x J' + (x^2 - m^2) J = 0`.
pub fn bessel_j_second(m: usize, x: f64) -> f64 {
    let m2 = (m * m) as f64;
    -bessel_j_prime(m, x) / x + (m2 / (x * x) - 1.0) * bessel_j(m, x)
}

/// `I_m''(x)` from `x^2 I'' + x I' - (x^2 + m^2) I = 0`.
pub fn bessel_i_second(m: usize, x: f64) -> f64 {
    let m2 = (m * m) as f64;
    -bessel_i_prime(m, x) / x + (m2 / (x * x) + 1.0) * bessel_i(m, x)
}

/// `J_m'''(x)`, obtained by differentiating the defining ODE once.
pub fn bessel_j_third(m: usize, x: f64) -> f64 {
    let m2 = (m * m) as f64;
    let (j, jp, jpp) = (bessel_j(m, x), bessel_j_prime(m, x), bessel_j_second(m, x));
    -jpp / x + jp / (x * x) - 2.0 * m2 / (x * x * x) * j + (m2 / (x * x) - 1.0) * jp
}

/// `I_m'''(x)`, obtained by differentiating the defining ODE once.
pub fn bessel_i_third(m: usize, x: f64) -> f64 {
    let m2 = (m * m) as f64;
    let (i, ip, ipp) = (bessel_i(m, x), bessel_i_prime(m, x), bessel_i_second(m, x));
    -ipp / x + ip / (x * x) - 2.0 * m2 / (x * x * x) * i + (m2 / (x * x) + 1.0) * ip
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Starting order for the downward recurrence: comfortably above both the
/// requested order and the turning point `n ~ x`.
fn start_order(m_max: usize, x: f64) -> usize {
    let base = m_max.max(x.ceil() as usize);
    base + 34 + base / 2
}

/// Bisect a bracketed sign change of `f` down to f64 resolution.
///
/// The caller guarantees `f(lo)` and `f(hi)` have opposite signs. Iteration
/// stops when the midpoint can no longer be distinguished from an endpoint.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if (flo < 0.0) == (fmid < 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
}

/// First `count` roots of `f` in `(lo, hi)`, located by a uniform sign scan
/// with step `step` followed by bisection. Returns fewer roots if the
/// interval holds fewer sign changes.
pub fn scan_roots<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, step: f64, count: usize) -> Vec<f64> {
    let mut roots = Vec::with_capacity(count);
    let mut x0 = lo;
    let mut f0 = f(x0);
    while x0 < hi && roots.len() < count {
        let x1 = (x0 + step).min(hi);
        let f1 = f(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if (f0 < 0.0) != (f1 < 0.0) {
            roots.push(bisect(f, x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Parse the mpmath fixture: columns m, x, J, J', I, I'.
    fn fixture() -> Vec<(usize, f64, f64, f64, f64, f64)> {
        let text = include_str!("../../tests/fixtures/bessel_reference.csv");
        text.lines()
            .skip(1)
            .map(|line| {
                let c: Vec<&str> = line.split(',').collect();
                (
                    c[0].parse().unwrap(),
                    c[1].parse().unwrap(),
                    c[2].parse().unwrap(),
                    c[3].parse().unwrap(),
                    c[4].parse().unwrap(),
                    c[5].parse().unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn matches_reference_fixture_to_near_machine_precision() {
        for (m, x, j, dj, i, di) in fixture() {
            assert_relative_eq!(bessel_j(m, x), j, max_relative = 1e-14, epsilon = 1e-15);
            assert_relative_eq!(bessel_j_prime(m, x), dj, max_relative = 1e-14, epsilon = 1e-15);
            assert_relative_eq!(bessel_i(m, x), i, max_relative = 1e-14);
            assert_relative_eq!(bessel_i_prime(m, x), di, max_relative = 1e-14);
        }
    }

    #[test]
    fn squared_sum_identity_holds() {
        // J_0^2 + 2 sum_{k>=1} J_k^2 = 1, independent of the linear-sum
        // normalization used inside the evaluator.
        for x in [0.3, 1.0, 4.2, 9.7] {
            let seq = bessel_j_seq(60, x);
            let total = seq[0] * seq[0]
                + 2.0 * seq[1..].iter().map(|v| v * v).sum::<f64>();
            assert_relative_eq!(total, 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn addition_theorem_links_x_and_2x() {
        // I_0(2x) = I_0(x)^2 + 2 sum_{k>=1} I_k(x)^2.
        for x in [0.5, 1.5, 4.0] {
            let seq = bessel_i_seq(60, x);
            let total = seq[0] * seq[0]
                + 2.0 * seq[1..].iter().map(|v| v * v).sum::<f64>();
            assert_relative_eq!(bessel_i(0, 2.0 * x), total, max_relative = 1e-13);
        }
    }

    #[test]
    fn second_derivatives_satisfy_the_defining_odes() {
        for (m, x) in [(0usize, 1.3), (1, 2.7), (2, 5.5), (3, 8.1)] {
            let m2 = (m * m) as f64;
            let lhs = x * x * bessel_j_second(m, x) + x * bessel_j_prime(m, x)
                + (x * x - m2) * bessel_j(m, x);
            assert!(lhs.abs() < 1e-12, "J ODE residual {lhs:.3e} at m={m} x={x}");
            let lhs = x * x * bessel_i_second(m, x) + x * bessel_i_prime(m, x)
                - (x * x + m2) * bessel_i(m, x);
            assert!(
                lhs.abs() < 1e-10 * bessel_i(m, x).max(1.0),
                "I ODE residual {lhs:.3e} at m={m} x={x}"
            );
        }
    }

    #[test]
    fn small_argument_series_joins_the_recurrence_branch() {
        // Dividing out the leading power x^m / (2^m m!) must give values
        // that agree across the series cutoff at x = 1e-8.
        for m in 0..4usize {
            let fact: f64 = (1..=m).map(|k| k as f64).product::<f64>().max(1.0);
            let scaled = |x: f64| bessel_j(m, x) * fact / (0.5 * x).powi(m as i32);
            assert_relative_eq!(scaled(0.99e-8), scaled(1.01e-8), max_relative = 1e-10);
            assert_relative_eq!(scaled(1.01e-8), 1.0, max_relative = 1e-10);
        }
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
        assert_eq!(bessel_i(0, 0.0), 1.0);
    }

    #[test]
    fn scan_and_bisect_find_the_first_bessel_zeros() {
        // j_{0,1} and j_{1,1} to full precision.
        let roots = scan_roots(&|x| bessel_j(0, x), 0.05, 9.0, 0.05, 2);
        assert_eq!(roots.len(), 2);
        assert_relative_eq!(roots[0], 2.404825557695773, max_relative = 1e-14);
        assert_relative_eq!(roots[1], 5.520078110286311, max_relative = 1e-14);
        let roots = scan_roots(&|x| bessel_j(1, x), 0.05, 9.0, 0.05, 1);
        assert_relative_eq!(roots[0], 3.831705970207512, max_relative = 1e-14);
    }
}
