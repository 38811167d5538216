//! Smoke coverage for the f32 instantiation of the whole pipeline. Single
//! precision cannot certify the tight residuals the f64 tests freeze; these
//! checks only pin that the generic code paths stay finite, certified, and
//! within the widened floor of a fourth-order pencil.

use platelab_core::discretize::{assemble, Resolution};
use platelab_core::eigensolve::solve_lowest;
use platelab_core::elasticity::{natural_frequency, strain_energy_report};
use platelab_core::identities::green_identity;
use platelab_core::traces::extract_trace;
use platelab_core::{BcKind32, DomainSpec32, Material32};

#[test]
fn single_precision_disk_solve_stays_certified() {
    let disk = DomainSpec32::Disk { radius: 1.0 };
    let op = assemble(&disk, BcKind32::Navier, Resolution::Polar { radial: 25, angular: 8 })
        .unwrap();
    let pair = solve_lowest(&op, 1).unwrap().remove(0);

    // j01^4 to f32 working accuracy at a coarse grid.
    let rel = (pair.value - 33.4452f32).abs() / 33.4452;
    assert!(rel < 0.02, "f32 ground value {} off by {rel}", pair.value);
    assert!(pair.residual <= 1e-8f32.max(pair.floor), "uncertified: {}", pair.residual);

    // The identity layer runs generically; f32 quadrature plus one-sided
    // stencils keep a few digits.
    let trace = extract_trace(&pair).unwrap();
    let green = green_identity(&trace);
    assert!(green.rel_residual < 1e-2, "green rel {}", green.rel_residual);

    let material = Material32::with_unit_rigidity(0.3).unwrap();
    let report = strain_energy_report(&pair, &material).unwrap();
    assert!(report.rel_gap < 1e-2, "energy gap {}", report.rel_gap);
    assert!(natural_frequency(pair.value, &material).unwrap().is_finite());
}

#[test]
fn single_precision_rectangle_matches_the_separable_value() {
    let square = DomainSpec32::Rectangle { a: 1.0, b: 1.0 };
    let op = assemble(&square, BcKind32::Navier, Resolution::Tensor { nx: 24, ny: 24 }).unwrap();
    let pair = solve_lowest(&op, 1).unwrap().remove(0);
    let rel = (pair.value - 389.6364f32).abs() / 389.6364;
    assert!(rel < 0.02, "f32 square value {} off by {rel}", pair.value);
}
