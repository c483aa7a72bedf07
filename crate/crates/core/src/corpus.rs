//! The scalar test problems and maps used by the tests, benches and docs.

use crate::bolza::BolzaSpec;
use crate::expr::parse_expression;
use crate::linalg::Vector;
use crate::reference::{uniform_grid, Provenance, ReferenceTrajectory};
use crate::sets::CompactConvexSet;
use crate::setmap::{MapClass, SetMap};

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

/// `F(x, t) = g1 + [-1, 1]` on `[-5, 5]` with horizon `horizon`.
pub fn scalar_map(g1: &str, rosl_l: f64, horizon: f64) -> SetMap {
    let class = MapClass::affine(&[g1], &[&["1"]], CompactConvexSet::interval(-1.0, 1.0).unwrap()).unwrap();
    SetMap::new(class, v1(-5.0), v1(5.0))
        .unwrap()
        .with_rosl(rosl_l)
        .with_horizon(horizon)
}

/// Minimize `x(1)` over `ẋ ∈ [-1, 1]`, `x(0) = 0`, around `x̄(t) = -t`.
pub fn problem_a(ref_intervals: usize) -> (BolzaSpec, ReferenceTrajectory) {
    let spec = BolzaSpec::new(
        scalar_map("0", 0.0, 1.0),
        v1(0.0),
        parse_expression("x1").unwrap(),
        parse_expression("0").unwrap(),
        10.0,
    )
    .unwrap();
    let reference = ReferenceTrajectory::from_analytic(|t| v1(-t), |_| v1(-1.0), 1.0, ref_intervals).unwrap();
    (spec, reference)
}

/// Minimize `∫ x²` over `ẋ ∈ [-1, 1]` on `[0, 2]`, `x(0) = 1`, around
/// `x̄(t) = max(1 - t, 0)`. The reference carries `t = 1` twice so the jump
/// of `ẋ̄` is represented exactly.
pub fn problem_b(ref_intervals: usize) -> (BolzaSpec, ReferenceTrajectory) {
    let spec = BolzaSpec::new(
        scalar_map("0", 0.0, 2.0),
        v1(1.0),
        parse_expression("0").unwrap(),
        parse_expression("x1^2").unwrap(),
        1.0,
    )
    .unwrap();
    let mut t: Vec<f64> = uniform_grid(2.0, ref_intervals).into_iter().filter(|&s| s != 1.0).collect();
    let split = t.partition_point(|&s| s < 1.0);
    t.splice(split..split, [1.0, 1.0]);
    let x = t.iter().map(|&s| v1((1.0 - s).max(0.0))).collect();
    let xdot = t
        .iter()
        .enumerate()
        .map(|(i, &s)| v1(if s < 1.0 || (s == 1.0 && i == split) { -1.0 } else { 0.0 }))
        .collect();
    let reference = ReferenceTrajectory::new(t, x, xdot, Provenance::Analytic).unwrap();
    (spec, reference)
}

/// `F(x) = -x + [-1, 1]` with the reference driven by `u(t) = sin(2πt)`.
pub fn dissipative_reference(ref_intervals: usize) -> (SetMap, ReferenceTrajectory) {
    let map = scalar_map("-x1", -1.0, 1.0);
    let reference = ReferenceTrajectory::from_control(
        &map,
        &v1(0.0),
        |t| v1((2.0 * std::f64::consts::PI * t).sin()),
        1.0,
        ref_intervals,
    )
    .unwrap();
    (map, reference)
}
