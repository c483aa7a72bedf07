//! Discrete problems, solver and certificates on the scalar test problems.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::v;
use rosl::bolza::{self, assemble_from_reference, nonincreasing, Mode, SolveOptions, Status};
use rosl::corpus;
use rosl::expr::parse_expression;
use rosl::gendiff::graph_normal_cone;
use rosl::kkt;
use rosl::linalg::{Matrix, Vector};
use rosl::sets::CompactConvexSet;
use rosl::setmap::{MapClass, SetMap};

const KS: [usize; 4] = [8, 16, 32, 64];

fn cases() -> Vec<(&'static str, bolza::BolzaSpec, rosl::reference::ReferenceTrajectory, Mode)> {
    let (a, ra) = corpus::problem_a(4096);
    let (b, rb) = corpus::problem_b(4096);
    vec![("A", a, ra, Mode::PkTilde), ("B", b, rb, Mode::Pk)]
}

#[test]
fn solutions_are_feasible_dominate_and_certify() {
    let opts = SolveOptions::default();
    for (name, spec, reference, mode) in cases() {
        let mut el = Vec::new();
        for k in KS {
            let (dp, _) = assemble_from_reference(spec.clone(), k, mode, reference.clone(), 1e-10).unwrap();
            let sol = bolza::solve(&dp, &opts).unwrap();
            assert_eq!(sol.status, Status::OptimalLocal, "{name} k = {k}");
            assert!(dp.feasible(&sol.traj, 10.0 * opts.tol).pass, "{name} k = {k} infeasible");

            let z = dp.warm.as_ref().unwrap();
            if dp.feasible(z, 1e-9).pass {
                assert!(sol.cost <= dp.cost(z).unwrap() + 1e-8, "{name} k = {k}: worse than z^k");
            }

            let rec = kkt::recover_adjoint(&dp, &sol.traj).unwrap();
            assert!(!rec.multipliers.is_zero());
            assert!(rec.report.pass, "{name} k = {k}: {:?}", rec.report);
            el.push(rec.report.el);
        }
        // the residuals sit at rounding level; allow that much slack
        assert!(nonincreasing(&el, 1e-8), "{name}: {el:?}");
    }
}

#[test]
fn solves_are_deterministic() {
    let opts = SolveOptions {
        seed: 11,
        ..SolveOptions::default()
    };
    for (_, spec, reference, mode) in cases() {
        let (dp, _) = assemble_from_reference(spec, 16, mode, reference, 1e-10).unwrap();
        let a = bolza::solve(&dp, &opts).unwrap();
        let b = bolza::solve(&dp, &opts).unwrap();
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        assert_eq!(a.traj, b.traj);
        assert_eq!(a.multipliers, b.multipliers);
    }
}

#[test]
fn reference_grid_refinement_leaves_costs_unchanged() {
    for (name, build, mode) in [
        ("A", corpus::problem_a as fn(usize) -> _, Mode::PkTilde),
        ("B", corpus::problem_b, Mode::Pk),
    ] {
        for k in [8, 16] {
            let cost = |grid: usize| {
                let (spec, reference) = build(grid);
                let (dp, _) = assemble_from_reference(spec, k, mode, reference, 1e-10).unwrap();
                bolza::solve(&dp, &SolveOptions::default()).unwrap().cost
            };
            let (coarse, fine) = (cost(4096), cost(8192));
            assert!((coarse - fine).abs() <= 1e-8, "{name} k = {k}: {coarse} vs {fine}");
        }
    }
}

/// Exact minimizer of problem B's discrete cost over `v ∈ [-1, 1]^k` by
/// enumerating active sets of the box-constrained convex QP. The penalty is
/// integrated in closed form: `ẋ̄ = -1` before `t = 1` and `0` after.
fn problem_b_qp(k: usize) -> (f64, Vec<f64>) {
    let h = 2.0 / k as f64;
    let mut q = Matrix::zeros(k, k);
    let mut c = Vector::zeros(k);
    let mut c0 = 0.0;
    // h Σ_j x_j² with x_j = 1 + h Σ_{i<=j} v_i
    for j in 0..k {
        for a in 0..=j {
            c[a] += 2.0 * h * h;
            for b in 0..=j {
                q[(a, b)] += 2.0 * h * h * h;
            }
        }
        c0 += h;
    }
    // ∫ |v_j - ẋ̄|² = neg (v + 1)² + pos v²
    for j in 0..k {
        let (a, b) = (h * j as f64, h * (j + 1) as f64);
        let neg = (b.min(1.0) - a.min(1.0)).max(0.0);
        let pos = (b - a) - neg;
        q[(j, j)] += 2.0 * (neg + pos);
        c[j] += 2.0 * neg;
        c0 += neg;
    }
    let value = |x: &Vector| 0.5 * x.dot(&(&q * x)) + c.dot(x) + c0;
    let mut best = (f64::INFINITY, vec![]);
    for code in 0..3usize.pow(k as u32) {
        // 0: at -1, 1: at +1, 2: free
        let state: Vec<usize> = (0..k).map(|j| (code / 3usize.pow(j as u32)) % 3).collect();
        let free: Vec<usize> = (0..k).filter(|&j| state[j] == 2).collect();
        let mut x = Vector::from_fn(k, |j, _| match state[j] {
            0 => -1.0,
            1 => 1.0,
            _ => 0.0,
        });
        if !free.is_empty() {
            let qf = Matrix::from_fn(free.len(), free.len(), |a, b| q[(free[a], free[b])]);
            let rhs = Vector::from_fn(free.len(), |a, _| {
                -c[free[a]] - (0..k).filter(|j| state[*j] != 2).map(|j| q[(free[a], j)] * x[j]).sum::<f64>()
            });
            let Some(sol) = qf.lu().solve(&rhs) else { continue };
            for (a, &j) in free.iter().enumerate() {
                x[j] = sol[a];
            }
        }
        let g = &q * &x + &c;
        let kkt_ok = (0..k).all(|j| match state[j] {
            0 => g[j] >= -1e-12,
            1 => g[j] <= 1e-12,
            _ => x[j].abs() <= 1.0 + 1e-12,
        });
        if kkt_ok && value(&x) < best.0 {
            best = (value(&x), x.iter().copied().collect());
        }
    }
    best
}

#[test]
fn problem_b_matches_the_qp_oracle() {
    let (spec, reference) = corpus::problem_b(4096);
    for k in [3, 4, 5, 6] {
        let (dp, _) = assemble_from_reference(spec.clone(), k, Mode::Pk, reference.clone(), 1e-10).unwrap();
        let sol = bolza::solve(&dp, &SolveOptions::default()).unwrap();
        let (j_star, v_star) = problem_b_qp(k);
        // the tube and energy constraints do not bind at this optimum
        let oracle = rosl::reference::DiscreteTrajectory::from_velocities(dp.h(), v(&[1.0]), &v_star.iter().map(|&x| v(&[x])).collect::<Vec<_>>());
        assert!(dp.feasible(&oracle, 1e-9).pass, "k = {k}");
        assert!((sol.cost - j_star).abs() <= 1e-7, "k = {k}: {} vs {j_star}", sol.cost);
        for (vj, &oj) in sol.traj.velocities().iter().zip(&v_star) {
            assert!((vj[0] - oj).abs() <= 1e-4, "k = {k}");
        }
    }
}

#[test]
fn residuals_scale_with_the_multipliers() {
    let (spec, reference) = corpus::problem_b(4096);
    let (dp, _) = assemble_from_reference(spec, 8, Mode::Pk, reference, 1e-10).unwrap();
    let sol = bolza::solve(&dp, &SolveOptions::default()).unwrap();
    let rec = kkt::recover_adjoint(&dp, &sol.traj).unwrap();
    let mut perturbed = rec.multipliers.clone();
    perturbed.p[3][0] += 0.3;
    perturbed.lambda[0] += 0.1;
    let base = kkt::check(&dp, &sol.traj, &perturbed, None).unwrap();
    assert!(base.el > 1e-3);
    for alpha in [0.25, 3.0, 40.0] {
        let r = kkt::check(&dp, &sol.traj, &perturbed.scaled(alpha), None).unwrap();
        for (got, want) in [
            (r.el, base.el),
            (r.transversality, base.transversality),
            (r.sign, base.sign),
            (r.slackness, base.slackness),
        ] {
            assert!((got - alpha * want).abs() <= 1e-12 * (1.0 + alpha * want), "alpha {alpha}: {got} vs {want}");
        }
        let normalized = kkt::normalize(&rec.multipliers.scaled(alpha)).unwrap();
        assert_eq!(kkt::check(&dp, &sol.traj, &normalized, None).unwrap().pass, rec.report.pass);
    }
}

#[test]
fn equality_endpoint_constraint_certifies() {
    let (spec, reference) = corpus::problem_a(4096);
    let spec = spec
        .with_constraints(vec![], vec![parse_expression("x1 + 1").unwrap()], 1.0)
        .unwrap();
    let (dp, _) = assemble_from_reference(spec, 16, Mode::PkTilde, reference, 1e-10).unwrap();
    let sol = bolza::solve(&dp, &SolveOptions::default()).unwrap();
    assert!((sol.cost + 1.0).abs() <= 1e-8);
    let rec = kkt::recover_adjoint(&dp, &sol.traj).unwrap();
    assert!(rec.report.pass, "{:?}", rec.report);
    // one signed multiplier per equality, next to λ0
    assert_eq!(rec.multipliers.lambda.len(), 2);
    assert!(rec.multipliers.lambda[0] >= 0.0);
}

/// Graph normals of a linear map with polyhedral controls, checked against
/// sampled feasible directions of the (convex) graph.
#[test]
fn graph_normals_match_sampled_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = [[-1.0, 0.5], [0.2, -2.0]];
    let g1 = ["-x1 + 0.5*x2", "0.2*x1 - 2*x2"];
    let triangle = CompactConvexSet::polytope(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
    let square = CompactConvexSet::new_box(v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap();
    for controls in [triangle, square] {
        let vertices = controls.vertices().unwrap();
        let map = SetMap::new(
            MapClass::affine(&g1, &[&["1", "0"], &["0", "1"]], controls.clone()).unwrap(),
            v(&[-5.0, -5.0]),
            v(&[5.0, 5.0]),
        )
        .unwrap();
        let x = v(&[0.3, -0.2]);
        let gx = v(&[a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]);
        // a vertex, an edge midpoint and an interior point of the controls
        let picks = [
            vertices[0].clone(),
            (&vertices[0] + &vertices[1]) * 0.5,
            vertices.iter().fold(Vector::zeros(2), |s, p| s + p) / vertices.len() as f64,
        ];
        for c in picks {
            let y = &gx + &c;
            let cone = graph_normal_cone(&map, &x, &y, 0.0).unwrap();
            let directions: Vec<(Vector, Vector)> = (0..3000)
                .map(|_| {
                    let dx = v(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                    let target = if rng.random_bool(0.5) {
                        vertices[rng.random_range(0..vertices.len())].clone()
                    } else {
                        let w: f64 = rng.random_range(0.0..1.0);
                        &vertices[rng.random_range(0..vertices.len())] * w + &c * (1.0 - w)
                    };
                    let dy = v(&[a[0][0] * dx[0] + a[0][1] * dx[1], a[1][0] * dx[0] + a[1][1] * dx[1]]) + (target - &c);
                    (dx, dy)
                })
                .collect();
            let worst = |u: &Vector, q: &Vector| {
                directions
                    .iter()
                    .map(|(dx, dy)| u.dot(dx) + q.dot(dy))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let (gens, lin) = cone.cone.parts();
            for g in gens.iter().chain(&lin).chain(lin.iter().map(|l| -l).collect::<Vec<_>>().iter()) {
                let (u, q) = (g.rows(0, 2).into_owned(), g.rows(2, 2).into_owned());
                assert!(worst(&u, &q) <= 1e-9, "generator {g:?} is not normal");
            }
            for _ in 0..200 {
                let u = v(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                let q = v(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                let mut w = Vector::zeros(4);
                w.rows_mut(0, 2).copy_from(&u);
                w.rows_mut(2, 2).copy_from(&q);
                if cone.cone.distance(&w) > 1e-2 {
                    assert!(worst(&u, &q) > 0.0, "({u:?}, {q:?}) outside the cone but never separated");
                } else {
                    assert!(cone.contains(&u, &q, 1e-2));
                }
            }
        }
    }
}
