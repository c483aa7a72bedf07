//! Implicit Euler approximation of references on the map catalog.

mod common;

use common::{catalog, v};
use rosl::implicit::approximate_trajectory;
use rosl::linalg::Vector;
use rosl::reference::ReferenceTrajectory;
use rosl::setmap::SetMap;

const KS: [usize; 4] = [16, 32, 64, 128];

/// A point well inside the control set: the mean of its extreme points
/// along the coordinate axes.
fn control_center(map: &SetMap) -> Vector {
    let c = map.controls().unwrap();
    let m = c.dim();
    let mut acc = Vector::zeros(m);
    for i in 0..m {
        for s in [1.0, -1.0] {
            let mut d = Vector::zeros(m);
            d[i] = s;
            acc += c.support(&d).unwrap().1;
        }
    }
    acc / (2 * m) as f64
}

fn smooth_reference(map: &SetMap) -> ReferenceTrajectory {
    let center = control_center(map);
    let m = center.len();
    let control = move |t: f64| {
        let wiggle = Vector::from_fn(m, |i, _| 0.02 * (2.0 * std::f64::consts::PI * t + i as f64).sin());
        &center + wiggle
    };
    let x0 = Vector::from_element(map.n(), 0.3);
    ReferenceTrajectory::from_control(map, &x0, control, 1.0, 4096).unwrap()
}

#[test]
fn catalog_references_converge() {
    for e in catalog().into_iter().filter(|e| e.map.is_affine_control()) {
        let reference = smooth_reference(&e.map);
        let reports: Vec<_> = KS
            .iter()
            .map(|&k| approximate_trajectory(&e.map, &reference, k, 1e-12).unwrap().1)
            .collect();
        for r in &reports {
            assert!(r.bound_ok, "{}: gap {} above bound {} at k = {}", e.name, r.max_gap, r.gap_bound, r.k);
            assert!(r.sup_err <= r.eta_k + 1e-12, "{}: sup_err above eta_k at k = {}", e.name, r.k);
        }
        for w in reports.windows(2) {
            assert!(w[1].sup_err <= w[0].sup_err + 1e-9, "{}: sup_err grew at k = {}", e.name, w[1].k);
            assert!(w[1].w12_err < w[0].w12_err, "{}: w12_err did not decrease at k = {}", e.name, w[1].k);
        }
    }
}

#[test]
fn exact_steps_for_a_linear_reference() {
    // x̄ = t/2 solves ẋ = 1.5 x + u with u = 0.5 - 0.75 t in [-1, 1], and
    // its velocity is constant, so every error term vanishes
    let map = catalog().remove(0).map;
    let reference = ReferenceTrajectory::from_analytic(|t| v(&[0.5 * t]), |_| v(&[0.5]), 1.0, 64).unwrap();
    let (_, r) = approximate_trajectory(&map, &reference, 8, 1e-12).unwrap();
    assert!(r.xi_k <= 1e-15);
    assert!(r.zeta_k <= 1e-14);
    assert!(r.sup_err <= 1e-12 && r.w12_err <= 1e-12);
}
