//! Implicit Euler steps `y ∈ x + h F(y, t)` and the reference-tracking
//! construction that certifies discrete trajectories against `x̄`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::reference::{DiscreteTrajectory, ReferenceTrajectory};
use crate::setmap::{MapClass, SetMap};

/// Step tolerance for problems the Gauss-Newton iteration solves exactly.
pub const STEP_TOL: f64 = 1e-10;
/// Step tolerance for genuinely iterative cases.
pub const STEP_TOL_ITERATIVE: f64 = 1e-8;
pub const MAX_STEP_ITERS: usize = 200;
/// Reference samples must satisfy the inclusion to this accuracy.
pub const REF_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct StepResult {
    pub y: Vector,
    /// `dist(y, x + h F(y, t))`
    pub residual: f64,
    pub iterations: usize,
}

/// `e^{2 l T}` with `l` clipped at zero: for `l <= 0` every factor
/// `1 / (1 - l h)` is at most one.
pub fn growth_factor(l: f64, horizon: f64) -> f64 {
    (2.0 * l.max(0.0) * horizon).exp()
}

/// `dist(y, x + h F(y, t))`, evaluated without the domain check on `y`.
pub fn step_residual(map: &SetMap, x: &Vector, t: f64, h: f64, y: &Vector) -> Result<f64> {
    match &map.class {
        MapClass::AffineControl { .. } => {
            let c = scaled_controls(map, t, h);
            let s = y - x - map.g1(y, t) * h;
            Ok(c.distance(&s)?)
        }
        MapClass::SmoothInverse { .. } => {
            let v = map.invert(y, t)?;
            Ok((y - x - v * h).norm())
        }
    }
}

fn scaled_controls(map: &SetMap, t: f64, h: f64) -> crate::sets::CompactConvexSet {
    let c = map.control_image(t).expect("affine-control map");
    c.scale_translate(h, &Vector::zeros(map.n()))
}

/// Solves the implicit Euler inclusion starting from `guess`.
pub fn implicit_step(map: &SetMap, x: &Vector, t: f64, h: f64, guess: &Vector, tol: f64) -> Result<StepResult> {
    map.check_domain(x)?;
    map.check_time(t)?;
    if guess.len() != map.n() {
        return Err(Error::DimensionMismatch {
            expected: map.n(),
            got: guess.len(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::Invalid("step size must be positive".into()));
    }
    let lh = map.rosl_l * h;
    if lh >= 1.0 {
        return Err(Error::StepsizeTooLarge { lh, bound: 1.0 });
    }
    match &map.class {
        MapClass::AffineControl { .. } => affine_step(map, x, t, h, guess, tol),
        MapClass::SmoothInverse { .. } => inverse_step(map, x, t, h, guess, tol),
    }
}

/// Gauss-Newton on `s(y) = y - x - h g1(y)` against its projection onto
/// `h C`, falling back to damped fixed-point sweeps `y <- Proj_{x + hF(y)}(y)`.
fn affine_step(map: &SetMap, x: &Vector, t: f64, h: f64, guess: &Vector, tol: f64) -> Result<StepResult> {
    let n = map.n();
    let hc = scaled_controls(map, t, h);
    let eval = |y: &Vector| -> Result<(Vector, Vector, f64)> {
        let s = y - x - map.g1(y, t) * h;
        let (p, r) = hc.project(&s)?;
        Ok((s, p, r))
    };
    let mut y = guess.clone();
    let (mut s, mut p, mut r) = eval(&y)?;
    let mut best = (y.clone(), r);
    let mut it = 0;
    let mut use_fixed_point = false;
    while it < MAX_STEP_ITERS && r > tol {
        it += 1;
        let cand = if !use_fixed_point {
            let jac = Matrix::identity(n, n) - map.g1_jacobian(&y, t) * h;
            match jac.lu().solve(&(&p - &s)) {
                Some(delta) => {
                    let mut alpha = 1.0;
                    let mut accepted = None;
                    while alpha > 1e-10 {
                        let yc = &y + &delta * alpha;
                        let e = eval(&yc)?;
                        if e.2 < r * (1.0 - 1e-4 * alpha) || e.2 <= tol {
                            accepted = Some((yc, e));
                            break;
                        }
                        alpha *= 0.5;
                    }
                    accepted
                }
                None => None,
            }
        } else {
            None
        };
        match cand {
            Some((yc, e)) => {
                y = yc;
                (s, p, r) = e;
            }
            None => {
                use_fixed_point = true;
                // projection of y onto x + h F(y)
                let target = &y - (&s - &p);
                y = (&y + target) * 0.5;
                (s, p, r) = eval(&y)?;
            }
        }
        if r < best.1 {
            best = (y.clone(), r);
        }
    }
    let (y, r) = best;
    if r > tol {
        return Err(Error::NoConvergence {
            iterations: it,
            residual: r,
        });
    }
    Ok(StepResult {
        y,
        residual: r,
        iterations: it,
    })
}

/// Solves `psi(z) - h z = x` for the velocity `z` and returns `y = x + h z`.
fn inverse_step(map: &SetMap, x: &Vector, t: f64, h: f64, guess: &Vector, tol: f64) -> Result<StepResult> {
    let n = map.n();
    let g = |z: &Vector| map.psi(z, t) - z * h - x;
    let mut z = (guess - x) / h;
    let mut gz = g(&z);
    let mut it = 0;
    while it < MAX_STEP_ITERS && gz.norm() > 1e-15 * (1.0 + x.norm()) {
        it += 1;
        let jac = map.psi_jacobian(&z, t) - Matrix::identity(n, n) * h;
        let step = jac.lu().solve(&(-&gz));
        let Some(step) = step else { break };
        let mut alpha = 1.0;
        let gn = gz.norm();
        loop {
            let zc = &z + &step * alpha;
            let gc = g(&zc);
            if gc.norm() < gn || alpha < 1e-12 {
                z = zc;
                gz = gc;
                break;
            }
            alpha *= 0.5;
        }
        if alpha < 1e-12 {
            break;
        }
    }
    let y = x + &z * h;
    let residual = step_residual(map, x, t, h, &y)?;
    if residual > tol {
        return Err(Error::NoConvergence {
            iterations: it,
            residual,
        });
    }
    Ok(StepResult {
        y,
        residual,
        iterations: it,
    })
}

/// The point of `x + h F(x, t)` nearest to `target`.
pub fn explicit_step(map: &SetMap, x: &Vector, t: f64, h: f64, target: &Vector) -> Result<Vector> {
    let set = map.evaluate(x, t)?.scale_translate(h, x);
    Ok(set.project(target)?.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxReport {
    pub k: usize,
    pub h: f64,
    pub xi_k: f64,
    pub zeta_k: f64,
    /// `tau(F; h_k)` contained in `zeta_k`
    pub tau: f64,
    pub eta_k: f64,
    /// `max_j |z_j - y_j|`
    pub max_gap: f64,
    /// `zeta_k e^{2 l T}`
    pub gap_bound: f64,
    pub sup_err: f64,
    pub w12_err: f64,
    pub bound_ok: bool,
}

/// Velocities `w_j` (interval averages of `ẋ̄`) and `xi_k = ∫ |ẋ̄ - w|`.
pub fn step_velocities(reference: &ReferenceTrajectory, k: usize) -> (Vec<Vector>, f64) {
    let h = reference.horizon() / k as f64;
    let mut w = Vec::with_capacity(k);
    let mut xi = 0.0;
    for j in 1..=k {
        let (a, b) = (h * (j - 1) as f64, if j == k { reference.horizon() } else { h * j as f64 });
        let wj = reference.interval_average(a, b);
        xi += reference.integrate(a, b, |xd| (xd - &wj).norm());
        w.push(wj);
    }
    (w, xi)
}

/// Builds `z^k` by implicit steps tracking `y^k`, with the error quantities
/// `xi_k`, `zeta_k` and `eta_k`.
pub fn approximate_trajectory(
    map: &SetMap,
    reference: &ReferenceTrajectory,
    k: usize,
    tol: f64,
) -> Result<(DiscreteTrajectory, ApproxReport)> {
    if k == 0 {
        return Err(Error::Invalid("k must be positive".into()));
    }
    if reference.n() != map.n() {
        return Err(Error::DimensionMismatch {
            expected: map.n(),
            got: reference.n(),
        });
    }
    let horizon = reference.horizon();
    if (horizon - map.horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::Invalid(format!(
            "reference horizon {horizon} differs from the map horizon {}",
            map.horizon
        )));
    }
    let h = horizon / k as f64;
    let lh = map.rosl_l * h;
    if lh >= 0.5 {
        return Err(Error::StepsizeTooLarge { lh, bound: 0.5 });
    }
    let ref_res = reference.max_inclusion_residual(map)?;
    if ref_res > REF_TOL {
        return Err(Error::Invalid(format!(
            "reference violates the inclusion (residual {ref_res:e})"
        )));
    }

    let (w, xi) = step_velocities(reference, k);
    let mut y = vec![reference.x0().clone()];
    for wj in &w {
        let next = y.last().unwrap() + wj * h;
        y.push(next);
    }

    let mut z = vec![reference.x0().clone()];
    for j in 1..=k {
        let tj = h * j as f64;
        let step = implicit_step(map, &z[j - 1], tj, h, &y[j], tol).map_err(|e| Error::StepFailed {
            index: j,
            source: Box::new(e),
        })?;
        z.push(step.y);
    }

    let mut dist_sum = 0.0;
    for j in 1..=k {
        let set = map.evaluate_unchecked(&y[j], h * j as f64)?;
        dist_sum += h * set.distance(&w[j - 1])?;
    }
    let tau = if map.is_autonomous() {
        0.0
    } else {
        map.avg_modulus(h, 8 * k + 1, 3)?
    };
    let zeta = dist_sum + tau;
    let growth = growth_factor(map.rosl_l, horizon);
    let eta = zeta * growth + xi;
    let max_gap = z
        .iter()
        .zip(&y)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let gap_bound = zeta * growth;
    // each step solve may leave a residual of tol, amplified like the data term
    let slack = (k as f64 * tol / (1.0 - lh.max(0.0))) * growth + 1e-12;
    let traj = DiscreteTrajectory::new(h, z);
    let (sup_err, w12_err) = extend_and_compare(&traj, reference)?;
    let report = ApproxReport {
        k,
        h,
        xi_k: xi,
        zeta_k: zeta,
        tau,
        eta_k: eta,
        max_gap,
        gap_bound,
        sup_err,
        w12_err,
        bound_ok: max_gap <= gap_bound + slack,
    };
    Ok((traj, report))
}

/// Uniform error of the piecewise-linear extension on the reference grid and
/// the `L^2` error of the piecewise-constant velocities.
pub fn extend_and_compare(traj: &DiscreteTrajectory, reference: &ReferenceTrajectory) -> Result<(f64, f64)> {
    let horizon = traj.h * traj.k() as f64;
    if (horizon - reference.horizon()).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::Invalid("trajectory and reference horizons differ".into()));
    }
    if traj.n() != reference.n() {
        return Err(Error::DimensionMismatch {
            expected: reference.n(),
            got: traj.n(),
        });
    }
    let sup = reference
        .t
        .iter()
        .zip(&reference.x)
        .map(|(&s, x)| (traj.state_at(s) - x).norm())
        .fold(0.0, f64::max);
    let mut sq = 0.0;
    for j in 1..=traj.k() {
        let vj = traj.velocity(j);
        let b = if j == traj.k() { reference.horizon() } else { traj.t(j) };
        sq += reference.integrate(traj.t(j - 1), b, |xd| (xd - &vj).norm_squared());
    }
    Ok((sup, sq.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::CompactConvexSet;

    fn v1(a: f64) -> Vector {
        Vector::from_element(1, a)
    }

    fn map(g1: &str, lo: f64, hi: f64, l: f64) -> SetMap {
        let class = MapClass::affine(&[g1], &[&["1"]], CompactConvexSet::interval(lo, hi).unwrap()).unwrap();
        SetMap::new(class, v1(-10.0), v1(10.0)).unwrap().with_rosl(l)
    }

    #[test]
    fn linear_dissipative_step() {
        let m = map("-x1", 0.0, 0.0, -1.0);
        for guess in [-3.0, 0.0, 5.0] {
            let r = implicit_step(&m, &v1(1.0), 0.5, 0.5, &v1(guess), STEP_TOL).unwrap();
            assert!((r.y[0] - 2.0 / 3.0).abs() < 1e-14);
            assert!(r.residual < 1e-14);
        }
    }

    #[test]
    fn interval_step_obeys_step_bound() {
        let m = map("-x1", -1.0, 1.0, -1.0);
        let r = implicit_step(&m, &v1(1.0), 0.5, 0.5, &v1(0.0), STEP_TOL).unwrap();
        assert!((r.y[0] - 1.0 / 3.0).abs() < 1e-14);
        let bound = 0.5 / 1.5;
        assert!(r.y[0].abs() <= bound + 1e-12);
    }

    #[test]
    fn stationary_map() {
        let m = map("0", 0.0, 0.0, 0.0);
        let r = implicit_step(&m, &v1(0.7), 0.0, 0.3, &v1(-2.0), STEP_TOL).unwrap();
        assert!((r.y[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn step_size_limit() {
        let m = map("x1", 0.0, 0.0, 1.0);
        assert!(matches!(
            implicit_step(&m, &v1(1.0), 0.0, 1.0, &v1(0.0), STEP_TOL),
            Err(Error::StepsizeTooLarge { .. })
        ));
    }

    #[test]
    fn explicit_step_examples() {
        let m = map("-x1", 0.0, 0.0, -1.0);
        assert!((explicit_step(&m, &v1(1.0), 0.0, 0.5, &v1(9.0)).unwrap()[0] - 0.5).abs() < 1e-15);
        let m = map("0", -1.0, 1.0, 0.0);
        assert_eq!(explicit_step(&m, &v1(0.0), 0.0, 1.0, &v1(5.0)).unwrap()[0], 1.0);
        let m = map("-x1", -1.0, 1.0, -1.0);
        let y = explicit_step(&m, &v1(1.0), 0.0, 0.5, &v1(1.0 / 3.0)).unwrap();
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_inverse_step() {
        let class = MapClass::smooth_inverse(&["v1^3 + v1"]).unwrap();
        let m = SetMap::new(class, v1(-5.0), v1(5.0)).unwrap().with_rosl(1.0);
        let (x, h) = (0.4, 0.25);
        let r = implicit_step(&m, &v1(x), 0.0, h, &v1(0.0), STEP_TOL).unwrap();
        // y = x + h z with z^3 + z = y
        let z = (r.y[0] - x) / h;
        assert!((z.powi(3) + z - r.y[0]).abs() < 1e-12);
    }

    #[test]
    fn exponential_reference_converges() {
        let m = map("-x1", 0.0, 0.0, -1.0);
        let reference =
            ReferenceTrajectory::from_analytic(|t| v1((-t).exp()), |t| v1(-(-t).exp()), 1.0, 4096).unwrap();
        let mut prev = f64::INFINITY;
        for k in [16, 32, 64] {
            let (_, rep) = approximate_trajectory(&m, &reference, k, STEP_TOL).unwrap();
            assert!(rep.sup_err <= rep.eta_k, "{rep:?}");
            assert!(rep.sup_err < prev);
            assert!(rep.bound_ok);
            prev = rep.sup_err;
        }
    }

    #[test]
    fn self_consistent_reference() {
        let m = map("0", -1.0, 1.0, 0.0);
        let reference = ReferenceTrajectory::from_analytic(|t| v1(-0.5 * t), |_| v1(-0.5), 1.0, 64).unwrap();
        let (traj, rep) = approximate_trajectory(&m, &reference, 8, STEP_TOL).unwrap();
        assert!(rep.sup_err < 1e-14 && rep.w12_err < 1e-14);
        assert!(rep.xi_k < 1e-14);
        assert!((traj.x[4][0] + 0.25).abs() < 1e-14);
    }
}
