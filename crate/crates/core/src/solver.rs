//! Augmented-Lagrangian transcription of the discrete problems.
//!
//! The decision variables are the controls `u_j ∈ U`. States follow from
//! the implicit relation `x_j - h g1(x_j, t_j) = x_{j-1} + h M(t_j) u_j`,
//! solved by Newton per step. Tube, energy, endpoint and `Omega_k`
//! constraints enter a PHR augmented Lagrangian; the inner problem is a
//! box-like projected problem solved by spectral projected gradients with
//! gradients from the discrete adjoint.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bolza::{DiscretizedProblem, Mode, SolveOptions, SolveResult, Status};
use crate::error::{Error, Result};
use crate::expr::{Env, Wrt};
use crate::kkt::Multipliers;
use crate::linalg::{self, Matrix, Vector};
use crate::par;
use crate::reference::DiscreteTrajectory;
use crate::sets::{gaussian, CompactConvexSet, Region};

const SMOOTHING_STAGES: [f64; 3] = [1e-2, 1e-3, 1e-4];

struct Transcription<'a> {
    dp: &'a DiscretizedProblem,
    controls: &'a CompactConvexSet,
    m_mats: Vec<Matrix>,
    smoothing: Option<f64>,
    n_cons: usize,
}

/// States, velocities and per-constraint values for one control sequence.
struct Forward {
    x: Vec<Vector>,
    v: Vec<Vector>,
    c: Vec<f64>,
    base: f64,
}

/// Constraint layout: tube rows, energy row (Pk), inequalities, equality
/// pairs `(+φ, -φ)`, then `Omega_k` when `Omega` is a set.
struct Layout {
    energy: Option<usize>,
    ineq: usize,
    eq: usize,
    omega: Option<usize>,
}

impl<'a> Transcription<'a> {
    fn new(dp: &'a DiscretizedProblem, smoothing: Option<f64>) -> Result<Self> {
        let map = &dp.spec.dynamics;
        let controls = map
            .controls()
            .ok_or_else(|| Error::Invalid("the solver supports affine-control dynamics only".into()))?;
        let m_mats = (1..=dp.k).map(|j| map.m_at(dp.t(j))).collect();
        let l = Self::layout_of(dp);
        let n_cons = l.omega.map_or(l.eq + 2 * dp.spec.r(), |o| o + 1);
        Ok(Transcription {
            dp,
            controls,
            m_mats,
            smoothing,
            n_cons,
        })
    }

    fn layout_of(dp: &DiscretizedProblem) -> Layout {
        let k = dp.k;
        let energy = (dp.mode == Mode::Pk).then_some(k);
        let ineq = k + usize::from(energy.is_some());
        let eq = ineq + dp.spec.m();
        let omega = matches!(dp.spec.omega, Region::Set(_)).then_some(eq + 2 * dp.spec.r());
        Layout {
            energy,
            ineq,
            eq,
            omega,
        }
    }

    fn layout(&self) -> Layout {
        Self::layout_of(self.dp)
    }

    fn project(&self, u: &mut [Vector]) -> Result<()> {
        for uj in u.iter_mut() {
            *uj = self.controls.project(uj)?.0;
        }
        Ok(())
    }

    /// Solves `x - h g1(x, t) = b` by damped Newton.
    fn state(&self, guess: &Vector, t: f64, b: &Vector) -> Option<Vector> {
        let map = &self.dp.spec.dynamics;
        let h = self.dp.h();
        let n = b.len();
        let resid = |x: &Vector| x - map.g1(x, t) * h - b;
        let mut x = guess.clone();
        let mut r = resid(&x);
        let scale = 1e-14 * (1.0 + b.norm());
        for _ in 0..60 {
            if r.norm() <= scale {
                return Some(x);
            }
            let jac = Matrix::identity(n, n) - map.g1_jacobian(&x, t) * h;
            let step = jac.lu().solve(&r)?;
            let mut alpha = 1.0;
            loop {
                let trial = &x - &step * alpha;
                let rt = resid(&trial);
                if rt.norm() < r.norm() || alpha < 1e-10 {
                    x = trial;
                    r = rt;
                    break;
                }
                alpha *= 0.5;
            }
        }
        (r.norm() <= 1e-10 * (1.0 + b.norm())).then_some(x)
    }

    fn forward(&self, u: &[Vector]) -> Option<Forward> {
        let dp = self.dp;
        let map = &dp.spec.dynamics;
        let (k, h) = (dp.k, dp.h());
        let mut x = Vec::with_capacity(k + 1);
        x.push(dp.spec.x0.clone());
        for j in 1..=k {
            let b = &x[j - 1] + &self.m_mats[j - 1] * &u[j - 1] * h;
            let guess = &b + map.g1(&x[j - 1], dp.t(j)) * h;
            let xj = self.state(&guess, dp.t(j), &b)?;
            x.push(xj);
        }
        let v: Vec<Vector> = (1..=k).map(|j| (&x[j] - &x[j - 1]) / h).collect();

        let mut base = dp.terminal(&dp.spec.phi0, &x[k], self.smoothing);
        let mut energy = 0.0;
        for j in 1..=k {
            base += h * dp.integrand(j, &x[j], &v[j - 1], self.smoothing);
            match dp.mode {
                Mode::Pk => energy += dp.penalty(j, &v[j - 1]),
                Mode::PkTilde => base += (&x[j] - dp.xbar(j)).norm_squared(),
            }
        }
        base += energy;

        let l = self.layout();
        let mut c = vec![0.0; self.n_cons];
        let quarter = 0.25 * dp.spec.eps * dp.spec.eps;
        for j in 1..=k {
            c[j - 1] = (&x[j] - dp.xbar(j)).norm_squared() - quarter;
        }
        if let Some(e) = l.energy {
            c[e] = energy - 0.5 * dp.spec.eps;
        }
        let bound = dp.spec.lipschitz * dp.eta_k;
        for (i, e) in dp.spec.ineq.iter().enumerate() {
            c[l.ineq + i] = dp.terminal(e, &x[k], self.smoothing) - bound;
        }
        for (i, e) in dp.spec.eq.iter().enumerate() {
            let val = dp.terminal(e, &x[k], self.smoothing);
            c[l.eq + 2 * i] = val - bound;
            c[l.eq + 2 * i + 1] = -val - bound;
        }
        if let Some(o) = l.omega {
            c[o] = dp.spec.omega.distance(&x[k]).ok()? - dp.eta_k;
        }
        Some(Forward { x, v, c, base })
    }

    fn al_value(&self, fw: &Forward, lam: &[f64], rho: f64) -> f64 {
        let mut val = fw.base;
        for (ci, li) in fw.c.iter().zip(lam) {
            let w = (li + rho * ci).max(0.0);
            val += (w * w - li * li) / (2.0 * rho);
        }
        val
    }

    fn weights(&self, fw: &Forward, lam: &[f64], rho: f64) -> Vec<f64> {
        fw.c.iter().zip(lam).map(|(ci, li)| (li + rho * ci).max(0.0)).collect()
    }

    /// Gradient of the terminal part (cost plus weighted endpoint rows).
    fn terminal_grad(&self, fw: &Forward, w: &[f64]) -> Vector {
        let dp = self.dp;
        let n = dp.spec.n;
        let xk = &fw.x[dp.k];
        let env = Env::x(xk.as_slice(), dp.spec.horizon);
        let grad = |e: &crate::expr::Expr| e.grad_with(&env, Wrt::X(n), self.smoothing).1;
        let l = self.layout();
        let mut g = grad(&dp.spec.phi0);
        for (i, e) in dp.spec.ineq.iter().enumerate() {
            if w[l.ineq + i] > 0.0 {
                g += grad(e) * w[l.ineq + i];
            }
        }
        for (i, e) in dp.spec.eq.iter().enumerate() {
            let s = w[l.eq + 2 * i] - w[l.eq + 2 * i + 1];
            if s != 0.0 {
                g += grad(e) * s;
            }
        }
        if let Some(o) = l.omega {
            if w[o] > 0.0 {
                let (p, d) = dp.spec.omega.project(xk).expect("dimension checked");
                if d > 0.0 {
                    g += (xk - p) * (w[o] / d);
                }
            }
        }
        g
    }

    /// `a_j = h ∂_v f_j + (1 + w_E) θ_j`, the v-gradient of the step terms.
    fn velocity_terms(&self, fw: &Forward, w: &[f64]) -> (Vec<Vector>, Vec<Vector>) {
        let dp = self.dp;
        let (n, h) = (dp.spec.n, dp.h());
        let energy_w = self.layout().energy.map_or(0.0, |e| w[e]);
        let mut a = Vec::with_capacity(dp.k);
        let mut fx = Vec::with_capacity(dp.k);
        for j in 1..=dp.k {
            let env = Env::new(fw.x[j].as_slice(), fw.v[j - 1].as_slice(), &[], dp.t(j));
            let g = dp.spec.f.grad_with(&env, Wrt::XV(n), self.smoothing).1;
            let mut aj = g.rows(n, n).into_owned() * h;
            if dp.mode == Mode::Pk {
                aj += dp.penalty_grad(j, &fw.v[j - 1]) * (1.0 + energy_w);
            }
            a.push(aj);
            fx.push(g.rows(0, n).into_owned());
        }
        (a, fx)
    }

    /// Adjoint states `ψ_1..ψ_k`, the terminal gradient and the step terms.
    fn adjoint(&self, fw: &Forward, w: &[f64]) -> Option<(Vec<Vector>, Vector, Vec<Vector>)> {
        let dp = self.dp;
        let map = &dp.spec.dynamics;
        let (k, n, h) = (dp.k, dp.spec.n, dp.h());
        let (a, fx) = self.velocity_terms(fw, w);
        let g_term = self.terminal_grad(fw, w);
        let mut psi = vec![Vector::zeros(n); k];
        let mut next = Vector::zeros(n);
        for j in (1..=k).rev() {
            // ∂ℓ/∂x_j = h ∂_x f_j + (a_j - a_{j+1}) / h + tube and tilde terms
            let mut dl = &fx[j - 1] * h + &a[j - 1] / h;
            if j < k {
                dl -= &a[j] / h;
            } else {
                dl += &g_term;
            }
            let diff = &fw.x[j] - dp.xbar(j);
            let mut coef = 2.0 * w[j - 1];
            if dp.mode == Mode::PkTilde {
                coef += 2.0;
            }
            dl += &diff * coef;
            let jac = Matrix::identity(n, n) - map.g1_jacobian(&fw.x[j], dp.t(j)) * h;
            let pj = jac.transpose().lu().solve(&(dl + &next))?;
            next = pj.clone();
            psi[j - 1] = pj;
        }
        Some((psi, g_term, a))
    }

    fn gradient(&self, fw: &Forward, lam: &[f64], rho: f64) -> Option<Vec<Vector>> {
        let w = self.weights(fw, lam, rho);
        let (psi, _, _) = self.adjoint(fw, &w)?;
        let h = self.dp.h();
        Some(
            psi.iter()
                .zip(&self.m_mats)
                .map(|(p, m)| m.transpose() * p * h)
                .collect(),
        )
    }

    fn multipliers(&self, fw: &Forward, w: &[f64]) -> Option<Multipliers> {
        let dp = self.dp;
        let (k, h) = (dp.k, dp.h());
        let l = self.layout();
        let (psi, g_term, a) = self.adjoint(fw, w)?;
        let mut p = Vec::with_capacity(k + 1);
        for j in 1..=k {
            p.push(&a[j - 1] / h - &psi[j - 1]);
        }
        p.push(-g_term);
        let mut lambda = vec![1.0];
        lambda.extend((0..dp.spec.m()).map(|i| w[l.ineq + i]));
        lambda.extend((0..dp.spec.r()).map(|i| w[l.eq + 2 * i] - w[l.eq + 2 * i + 1]));
        let mut mu: Vec<f64> = w[..k].to_vec();
        mu.push(l.energy.map_or(0.0, |e| w[e]));
        let traj = DiscreteTrajectory::new(h, fw.x.clone());
        Some(Multipliers {
            lambda,
            p,
            theta: crate::kkt::step_theta(dp, &traj),
            mu,
        })
    }
}

fn flat_dot(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn flat_inf(a: &[Vector]) -> f64 {
    a.iter().map(|x| x.amax()).fold(0.0, f64::max)
}

fn axpy(u: &[Vector], d: &[Vector], s: f64) -> Vec<Vector> {
    u.iter().zip(d).map(|(x, y)| x + y * s).collect()
}

fn sub(a: &[Vector], b: &[Vector]) -> Vec<Vector> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

struct Inner {
    u: Vec<Vector>,
    converged: bool,
}

/// Nonmonotone spectral projected gradient on the augmented Lagrangian.
fn spg(tr: &Transcription, u0: Vec<Vector>, lam: &[f64], rho: f64, tol: f64, max_iter: usize) -> Result<Option<Inner>> {
    const MEMORY: usize = 10;
    let mut u = u0;
    tr.project(&mut u)?;
    let Some(fw) = tr.forward(&u) else {
        return Ok(None);
    };
    let mut f = tr.al_value(&fw, lam, rho);
    let Some(mut g) = tr.gradient(&fw, lam, rho) else {
        return Ok(None);
    };
    let mut hist: VecDeque<f64> = VecDeque::from([f]);
    let pg = |u: &[Vector], g: &[Vector]| -> Result<f64> {
        let mut t = sub(u, g);
        tr.project(&mut t)?;
        Ok(flat_inf(&sub(&t, u)))
    };
    let mut alpha = {
        let p = pg(&u, &g)?;
        if p > 0.0 { 1.0 / p } else { 1.0 }
    }
    .clamp(1e-10, 1e10);
    for _ in 0..max_iter {
        if pg(&u, &g)? <= tol {
            return Ok(Some(Inner { u, converged: true }));
        }
        let mut target = axpy(&u, &g, -alpha);
        tr.project(&mut target)?;
        let d = sub(&target, &u);
        let gd = flat_dot(&g, &d);
        let fmax = hist.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut step = 1.0;
        let accepted = loop {
            let trial = axpy(&u, &d, step);
            if let Some(fw) = tr.forward(&trial) {
                let ft = tr.al_value(&fw, lam, rho);
                if ft.is_finite() && ft <= fmax + 1e-4 * step * gd {
                    break Some((trial, fw, ft));
                }
            }
            step *= 0.5;
            if step < 1e-16 {
                break None;
            }
        };
        let Some((un, fwn, fnew)) = accepted else {
            // no decrease along the projected direction: stationary to rounding
            let done = pg(&u, &g)? <= tol.max(1e-13);
            return Ok(Some(Inner { u, converged: done }));
        };
        let Some(gn) = tr.gradient(&fwn, lam, rho) else {
            return Ok(None);
        };
        let s = sub(&un, &u);
        let y = sub(&gn, &g);
        let sty = flat_dot(&s, &y);
        alpha = if sty > 0.0 {
            (flat_dot(&s, &s) / sty).clamp(1e-10, 1e10)
        } else {
            1e10
        };
        u = un;
        g = gn;
        f = fnew;
        hist.push_back(f);
        if hist.len() > MEMORY {
            hist.pop_front();
        }
    }
    Ok(Some(Inner { u, converged: false }))
}

struct StartOutcome {
    u: Vec<Vector>,
    converged: bool,
    feasible: bool,
    cost: f64,
    /// AL multiplier estimates after the last update
    weights: Vec<f64>,
}

fn run_start(dp: &DiscretizedProblem, opts: &SolveOptions, u0: Vec<Vector>, stages: &[Option<f64>]) -> Result<Option<StartOutcome>> {
    let mut u = u0;
    let mut converged = false;
    let mut weights = Vec::new();
    let inner_tol = 0.1 * opts.tol * dp.h();
    for &mu in stages {
        let tr = Transcription::new(dp, mu)?;
        let mut lam = vec![0.0; tr.n_cons];
        let mut rho = 10.0;
        let mut prev = f64::INFINITY;
        converged = false;
        for _ in 0..opts.max_outer {
            let Some(inner) = spg(&tr, u.clone(), &lam, rho, inner_tol, opts.max_inner)? else {
                return Ok(None);
            };
            u = inner.u;
            let Some(fw) = tr.forward(&u) else {
                return Ok(None);
            };
            let viol = fw
                .c
                .iter()
                .zip(&lam)
                .map(|(c, l)| (-c).min(l / rho).abs())
                .fold(0.0, f64::max);
            lam = tr.weights(&fw, &lam, rho);
            if viol <= opts.tol && inner.converged {
                converged = true;
                break;
            }
            if viol > 0.25 * prev {
                rho = (rho * 10.0).min(1e12);
            }
            prev = viol;
        }
        weights = lam;
    }
    let tr = Transcription::new(dp, None)?;
    let Some(fw) = tr.forward(&u) else {
        return Ok(None);
    };
    let traj = DiscreteTrajectory::new(dp.h(), fw.x);
    let feasible = dp.feasible(&traj, 10.0 * opts.tol).pass;
    Ok(Some(StartOutcome {
        cost: dp.cost(&traj)?,
        u,
        converged,
        feasible,
        weights,
    }))
}

/// Least-squares controls reproducing a trajectory, projected onto `U`.
fn controls_from(dp: &DiscretizedProblem, x: &[Vector]) -> Result<Vec<Vector>> {
    let map = &dp.spec.dynamics;
    let controls = map.controls().expect("affine-control map");
    let h = dp.h();
    (1..=dp.k)
        .map(|j| {
            let t = dp.t(j);
            let rhs = (&x[j] - &x[j - 1]) / h - map.g1(&x[j], t);
            let u = linalg::least_squares(&map.m_at(t), &rhs);
            Ok(controls.project(&u)?.0)
        })
        .collect()
}

fn random_controls(dp: &DiscretizedProblem, seed: u64) -> Result<Vec<Vector>> {
    let controls = dp.spec.dynamics.controls().expect("affine-control map");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = controls.any_point();
    let r = controls.outer_radius().max(1e-12);
    (0..dp.k)
        .map(|_| {
            let z = Vector::from_fn(c.len(), |_, _| gaussian(&mut rng));
            Ok(controls.project(&(&c + z * r))?.0)
        })
        .collect()
}

pub fn solve(dp: &DiscretizedProblem, opts: &SolveOptions) -> Result<SolveResult> {
    let tr = Transcription::new(dp, None)?;
    if opts.starts == 0 {
        return Err(Error::Config("at least one start is required".into()));
    }
    let stages: Vec<Option<f64>> = if dp.spec.has_kink() {
        if !opts.smoothing {
            return Err(Error::Config(
                "nonsmooth cost or constraints need smoothing enabled".into(),
            ));
        }
        SMOOTHING_STAGES.iter().map(|&m| Some(m)).collect()
    } else {
        vec![None]
    };
    let first = match &dp.warm {
        Some(z) => controls_from(dp, &z.x)?,
        None => {
            let xs: Vec<Vector> = (0..=dp.k).map(|j| dp.xbar(j).clone()).collect();
            controls_from(dp, &xs)?
        }
    };
    let starts: Vec<usize> = (0..opts.starts).collect();
    let outcomes = par::map(&starts, |&s| -> Result<Option<StartOutcome>> {
        let u0 = if s == 0 {
            first.clone()
        } else {
            random_controls(dp, opts.seed.wrapping_add(s as u64))?
        };
        run_start(dp, opts, u0, &stages)
    });
    let mut best: Option<StartOutcome> = None;
    for out in outcomes {
        let Some(out) = out? else { continue };
        if !out.feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => out.cost < b.cost - 1e-12 * (1.0 + b.cost.abs()),
        };
        if better {
            best = Some(out);
        }
    }
    let best = best.ok_or(Error::Infeasible)?;
    let fw = tr.forward(&best.u).ok_or(Error::Infeasible)?;
    let final_tr = Transcription::new(dp, *stages.last().unwrap())?;
    let fw_final = final_tr.forward(&best.u).ok_or(Error::Infeasible)?;
    let multipliers = final_tr
        .multipliers(&fw_final, &best.weights)
        .ok_or(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        })?;
    Ok(SolveResult {
        traj: DiscreteTrajectory::new(dp.h(), fw.x),
        controls: best.u,
        cost: best.cost,
        multipliers,
        status: if best.converged {
            Status::OptimalLocal
        } else {
            Status::MaxIter
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bolza::{assemble, assemble_from_reference};
    use crate::corpus;
    use crate::expr::parse_expression;

    fn fd_check(dp: &DiscretizedProblem, u: &[Vector], lam: &[f64], rho: f64) {
        let tr = Transcription::new(dp, None).unwrap();
        let fw = tr.forward(u).unwrap();
        let g = tr.gradient(&fw, lam, rho).unwrap();
        let step = 1e-6;
        for j in 0..u.len() {
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[j][0] += step;
            um[j][0] -= step;
            let fp = tr.al_value(&tr.forward(&up).unwrap(), lam, rho);
            let fm = tr.al_value(&tr.forward(&um).unwrap(), lam, rho);
            let fd = (fp - fm) / (2.0 * step);
            assert!((fd - g[j][0]).abs() <= 1e-6 * (1.0 + fd.abs()), "j={j}: {fd} vs {}", g[j][0]);
        }
    }

    #[test]
    fn adjoint_gradient_matches_differences() {
        let (mut spec, reference) = corpus::problem_b(1024);
        spec.dynamics = corpus::scalar_map("-x1 + 0.3*sin(x1)", 1.0, 2.0);
        spec.eps = 0.3;
        spec.f = parse_expression("x1^2 + 0.5*v1^2*x1").unwrap();
        spec.phi0 = parse_expression("x1^3").unwrap();
        let spec = spec
            .with_constraints(
                vec![parse_expression("x1 - 0.1").unwrap()],
                vec![parse_expression("2*x1").unwrap()],
                2.0,
            )
            .unwrap();
        let dp = assemble(spec, 8, Mode::Pk, 0.01, reference).unwrap();
        let u: Vec<Vector> = (0..8).map(|j| Vector::from_element(1, (j as f64 * 0.7).sin())).collect();
        let tr = Transcription::new(&dp, None).unwrap();
        let lam: Vec<f64> = (0..tr.n_cons).map(|i| 0.1 * i as f64).collect();
        fd_check(&dp, &u, &lam, 5.0);
    }

    #[test]
    fn problem_a_bang_control() {
        let (spec, reference) = corpus::problem_a(256);
        let (dp, _) = assemble_from_reference(spec, 8, Mode::PkTilde, reference, 1e-10).unwrap();
        let res = solve(&dp, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::OptimalLocal);
        assert!((res.cost + 1.0).abs() < 1e-9);
        for u in &res.controls {
            assert!((u[0] + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn smooth_inverse_is_rejected() {
        let (mut spec, reference) = corpus::problem_a(64);
        spec.dynamics = crate::setmap::SetMap::new(
            crate::setmap::MapClass::smooth_inverse(&["v1"]).unwrap(),
            Vector::from_element(1, -5.0),
            Vector::from_element(1, 5.0),
        )
        .unwrap();
        let dp = assemble(spec, 4, Mode::PkTilde, 0.0, reference).unwrap();
        assert!(matches!(solve(&dp, &SolveOptions::default()), Err(Error::Invalid(_))));
    }

    #[test]
    fn kinks_need_smoothing() {
        let (mut spec, reference) = corpus::problem_a(64);
        spec.phi0 = parse_expression("abs(x1 + 0.5)").unwrap();
        let dp = assemble(spec, 4, Mode::PkTilde, 0.0, reference).unwrap();
        assert!(matches!(solve(&dp, &SolveOptions::default()), Err(Error::Config(_))));
        let opts = SolveOptions {
            smoothing: true,
            ..SolveOptions::default()
        };
        let res = solve(&dp, &opts).unwrap();
        // the tracking term pulls toward -t; the kink pulls x(1) to -0.5
        assert!(res.traj.x[4][0] > -1.0 && res.traj.x[4][0] < -0.4);
    }
}
