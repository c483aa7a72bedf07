//! Discrete approximation problems for the generalized Bolza problem and
//! their convergence studies.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var, Wrt};
use crate::implicit::{approximate_trajectory, extend_and_compare, ApproxReport};
use crate::kkt::{self, Multipliers};
use crate::linalg::Vector;
use crate::par;
use crate::reference::{fmt_num, DiscreteTrajectory, ReferenceTrajectory};
use crate::sets::Region;
use crate::setmap::SetMap;
use crate::solver;

#[derive(Clone, Debug)]
pub struct BolzaSpec {
    pub n: usize,
    pub horizon: f64,
    pub x0: Vector,
    pub dynamics: SetMap,
    pub phi0: Expr,
    /// integrand in `(x, v, t)`
    pub f: Expr,
    pub ineq: Vec<Expr>,
    pub eq: Vec<Expr>,
    pub omega: Region,
    pub eps: f64,
    /// common Lipschitz constant of the endpoint constraint functions
    pub lipschitz: f64,
}

impl BolzaSpec {
    /// No endpoint constraints, `Omega` the whole space, horizon taken from
    /// the dynamics.
    pub fn new(dynamics: SetMap, x0: Vector, phi0: Expr, f: Expr, eps: f64) -> Result<Self> {
        let spec = BolzaSpec {
            n: dynamics.n(),
            horizon: dynamics.horizon,
            x0,
            dynamics,
            phi0,
            f,
            ineq: vec![],
            eq: vec![],
            omega: Region::WholeSpace,
            eps,
            lipschitz: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_constraints(mut self, ineq: Vec<Expr>, eq: Vec<Expr>, lipschitz: f64) -> Result<Self> {
        self.ineq = ineq;
        self.eq = eq;
        self.lipschitz = lipschitz;
        self.validate()?;
        Ok(self)
    }

    pub fn with_omega(mut self, omega: Region) -> Result<Self> {
        self.omega = omega;
        self.validate()?;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.ineq.len()
    }

    pub fn r(&self) -> usize {
        self.eq.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.dynamics.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.dynamics.n(),
            });
        }
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.x0.len(),
            });
        }
        if !(self.horizon > 0.0) || (self.horizon - self.dynamics.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::Config("horizon must be positive and match the dynamics".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.m() + self.r() > 0 && !(self.lipschitz > 0.0) {
            return Err(Error::Config("L must be positive when endpoint constraints are present".into()));
        }
        let state = |v: Var| matches!(v, Var::X(i) if i < n);
        self.phi0.check_vars(state, "phi0")?;
        for (i, e) in self.ineq.iter().chain(&self.eq).enumerate() {
            e.check_vars(state, &format!("endpoint constraint {}", i + 1))?;
        }
        self.f.check_vars(
            |v| matches!(v, Var::X(i) | Var::V(i) if i < n) || v == Var::T,
            "f",
        )?;
        if let Region::Set(s) = &self.omega {
            if s.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.dim() });
            }
        }
        Ok(())
    }

    pub fn endpoint_exprs(&self) -> impl Iterator<Item = &Expr> {
        self.ineq.iter().chain(&self.eq)
    }

    pub fn has_kink(&self) -> bool {
        self.phi0.has_kink() || self.f.has_kink() || self.endpoint_exprs().any(Expr::has_kink)
    }

    /// Largest sampled gradient norm of the endpoint functions over the
    /// dynamics domain, compared with `L`.
    pub fn lipschitz_sample(&self, samples: usize, seed: u64) -> LipschitzReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (&self.dynamics.domain_lo, &self.dynamics.domain_hi);
        let mut est = 0.0_f64;
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.n).map(|i| rng.random_range(lo[i]..=hi[i])).collect();
            let env = Env::x(&x, self.horizon);
            for e in self.endpoint_exprs() {
                est = est.max(e.grad(&env, Wrt::X(self.n)).1.norm());
            }
        }
        LipschitzReport {
            estimate: est,
            pass: est <= self.lipschitz * (1.0 + 1e-9),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzReport {
    pub estimate: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Pk,
    PkTilde,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pk => "pk",
            Mode::PkTilde => "pktilde",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pk" => Ok(Mode::Pk),
            "pktilde" => Ok(Mode::PkTilde),
            other => Err(Error::Config(format!("unknown mode {other:?} (expected pk or pktilde)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiscretizedProblem {
    pub spec: BolzaSpec,
    pub k: usize,
    pub mode: Mode,
    pub eta_k: f64,
    pub reference: ReferenceTrajectory,
    /// `z^k` from the approximation run, used as the first start
    pub warm: Option<DiscreteTrajectory>,
    xbar: Vec<Vector>,
    // per interval: length, ∫ẋ̄, ∫|ẋ̄|²
    len: Vec<f64>,
    int1: Vec<Vector>,
    int2: Vec<f64>,
}

pub fn assemble(
    spec: BolzaSpec,
    k: usize,
    mode: Mode,
    eta_k: f64,
    reference: ReferenceTrajectory,
) -> Result<DiscretizedProblem> {
    spec.validate()?;
    if k == 0 {
        return Err(Error::Invalid("k must be positive".into()));
    }
    if !(eta_k >= 0.0) {
        return Err(Error::Invalid(format!("eta_k must be nonnegative, got {eta_k}")));
    }
    if mode == Mode::PkTilde && spec.f.depends_on_v() {
        return Err(Error::ModeMismatch);
    }
    if reference.n() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: reference.n(),
        });
    }
    if (reference.horizon() - spec.horizon).abs() > 1e-9 * spec.horizon.max(1.0) {
        return Err(Error::Invalid("reference horizon differs from T".into()));
    }
    let h = spec.horizon / k as f64;
    let mut xbar = Vec::with_capacity(k + 1);
    let mut len = Vec::with_capacity(k);
    let mut int1 = Vec::with_capacity(k);
    let mut int2 = Vec::with_capacity(k);
    xbar.push(reference.state_at(0.0));
    for j in 1..=k {
        let (a, b) = (h * (j - 1) as f64, if j == k { spec.horizon } else { h * j as f64 });
        xbar.push(reference.state_at(b));
        len.push(b - a);
        int1.push(reference.integral_of_xdot(a, b));
        int2.push(reference.integrate(a, b, |xd| xd.norm_squared()));
    }
    Ok(DiscretizedProblem {
        spec,
        k,
        mode,
        eta_k,
        reference,
        warm: None,
        xbar,
        len,
        int1,
        int2,
    })
}

/// Assembles with `eta_k` and the warm start taken from the approximation
/// of the reference at the same `k`.
pub fn assemble_from_reference(
    spec: BolzaSpec,
    k: usize,
    mode: Mode,
    reference: ReferenceTrajectory,
    tol: f64,
) -> Result<(DiscretizedProblem, ApproxReport)> {
    let (z, report) = approximate_trajectory(&spec.dynamics, &reference, k, tol)?;
    let mut dp = assemble(spec, k, mode, report.eta_k, reference)?;
    dp.warm = Some(z);
    Ok((dp, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityReport {
    pub shape_ok: bool,
    pub initial: f64,
    /// `max_j dist(v_j, F(x_j, t_j))`
    pub inclusion: f64,
    /// `|x_j - x̄(t_j)|² - ε²/4`
    pub tube: Vec<f64>,
    /// `Σ∫|v_j - ẋ̄|² - ε/2`, absent for the simplified problem
    pub energy: Option<f64>,
    /// `dist(x_k, Omega) - eta_k`
    pub omega: f64,
    pub ineq: Vec<f64>,
    pub eq: Vec<f64>,
    pub pass: bool,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        let mut m = self.initial.max(self.inclusion).max(self.omega);
        for &v in self.tube.iter().chain(&self.ineq).chain(&self.eq).chain(self.energy.iter()) {
            m = m.max(v);
        }
        if self.shape_ok {
            m
        } else {
            f64::INFINITY
        }
    }
}

impl DiscretizedProblem {
    pub fn h(&self) -> f64 {
        self.spec.horizon / self.k as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        if j == self.k {
            self.spec.horizon
        } else {
            self.h() * j as f64
        }
    }

    pub fn xbar(&self, j: usize) -> &Vector {
        &self.xbar[j]
    }

    /// Tube rows, the energy row (for `Pk`) and one row per endpoint
    /// constraint.
    pub fn constraint_count(&self) -> usize {
        self.k + usize::from(self.mode == Mode::Pk) + self.spec.m() + self.spec.r()
    }

    /// `∫_{t_{j-1}}^{t_j} |v - ẋ̄|²` by trapezoid on the reference grid (`j` is 1-based).
    pub fn penalty(&self, j: usize, v: &Vector) -> f64 {
        let i = j - 1;
        (self.len[i] * v.norm_squared() - 2.0 * v.dot(&self.int1[i]) + self.int2[i]).max(0.0)
    }

    /// Gradient of [`penalty`](Self::penalty) in `v`.
    pub fn penalty_grad(&self, j: usize, v: &Vector) -> Vector {
        let i = j - 1;
        (v * self.len[i] - &self.int1[i]) * 2.0
    }

    pub(crate) fn check_shape(&self, traj: &DiscreteTrajectory) -> Result<()> {
        if traj.k() != self.k || traj.n() != self.spec.n || (traj.h - self.h()).abs() > 1e-12 * self.h() {
            return Err(Error::Invalid(format!(
                "trajectory shape (k={}, n={}) does not match the problem (k={}, n={})",
                traj.k(),
                traj.n(),
                self.k,
                self.spec.n
            )));
        }
        Ok(())
    }

    pub fn integrand(&self, j: usize, x: &Vector, v: &Vector, smoothing: Option<f64>) -> f64 {
        self.spec
            .f
            .eval_with(&Env::new(x.as_slice(), v.as_slice(), &[], self.t(j)), smoothing)
    }

    pub fn terminal(&self, e: &Expr, x: &Vector, smoothing: Option<f64>) -> f64 {
        e.eval_with(&Env::x(x.as_slice(), self.spec.horizon), smoothing)
    }

    /// `J_k` (or its simplified form) of a trajectory.
    pub fn cost(&self, traj: &DiscreteTrajectory) -> Result<f64> {
        self.check_shape(traj)?;
        let h = self.h();
        let mut j_k = self.terminal(&self.spec.phi0, &traj.x[self.k], None);
        for j in 1..=self.k {
            let v = traj.velocity(j);
            j_k += h * self.integrand(j, &traj.x[j], &v, None);
            j_k += match self.mode {
                Mode::Pk => self.penalty(j, &v),
                Mode::PkTilde => (&traj.x[j] - &self.xbar[j]).norm_squared(),
            };
        }
        Ok(j_k)
    }

    /// Largest `|x_j - x_{j-1} - h(g1(x_j, t_j) + M(t_j) u_j)|`.
    pub fn dynamics_residual(&self, traj: &DiscreteTrajectory, controls: &[Vector]) -> Result<f64> {
        self.check_shape(traj)?;
        let map = &self.spec.dynamics;
        if !map.is_affine_control() {
            return Err(Error::Invalid("controls require affine-control dynamics".into()));
        }
        if controls.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: controls.len(),
            });
        }
        let h = self.h();
        let mut worst = 0.0_f64;
        for j in 1..=self.k {
            let t = self.t(j);
            let rhs = map.g1(&traj.x[j], t) + map.m_at(t) * &controls[j - 1];
            worst = worst.max((&traj.x[j] - &traj.x[j - 1] - rhs * h).norm());
        }
        Ok(worst)
    }

    /// [`cost`](Self::cost) after checking the trajectory against its controls.
    pub fn cost_with_controls(&self, traj: &DiscreteTrajectory, controls: &[Vector], tol: f64) -> Result<f64> {
        let res = self.dynamics_residual(traj, controls)?;
        if res > tol {
            return Err(Error::Invalid(format!(
                "trajectory inconsistent with controls (residual {res:e})"
            )));
        }
        self.cost(traj)
    }

    pub fn feasible(&self, traj: &DiscreteTrajectory, tol: f64) -> FeasibilityReport {
        let k = self.k;
        let mut rep = FeasibilityReport {
            shape_ok: self.check_shape(traj).is_ok(),
            initial: f64::INFINITY,
            inclusion: f64::INFINITY,
            tube: vec![f64::INFINITY; k],
            energy: (self.mode == Mode::Pk).then_some(f64::INFINITY),
            omega: f64::INFINITY,
            ineq: vec![f64::INFINITY; self.spec.m()],
            eq: vec![f64::INFINITY; self.spec.r()],
            pass: false,
        };
        if !rep.shape_ok {
            return rep;
        }
        rep.initial = (&traj.x[0] - &self.spec.x0).norm();
        let map = &self.spec.dynamics;
        let mut incl = 0.0_f64;
        for j in 1..=k {
            let v = traj.velocity(j);
            let d = map
                .evaluate(&traj.x[j], self.t(j))
                .and_then(|set| set.distance(&v))
                .unwrap_or(f64::INFINITY);
            incl = incl.max(d);
        }
        rep.inclusion = incl;
        let half = 0.25 * self.spec.eps * self.spec.eps;
        for j in 1..=k {
            rep.tube[j - 1] = (&traj.x[j] - &self.xbar[j]).norm_squared() - half;
        }
        if self.mode == Mode::Pk {
            let e: f64 = (1..=k).map(|j| self.penalty(j, &traj.velocity(j))).sum();
            rep.energy = Some(e - 0.5 * self.spec.eps);
        }
        let xk = &traj.x[k];
        rep.omega = self.spec.omega.distance(xk).unwrap_or(f64::INFINITY) - self.eta_k;
        let bound = self.spec.lipschitz * self.eta_k;
        for (i, e) in self.spec.ineq.iter().enumerate() {
            rep.ineq[i] = self.terminal(e, xk, None) - bound;
        }
        for (i, e) in self.spec.eq.iter().enumerate() {
            rep.eq[i] = self.terminal(e, xk, None).abs() - bound;
        }
        rep.pass = rep.max_violation() <= tol;
        rep
    }
}

/// The relaxed cost `φ0(x_k) + h Σ f(x_j, v_j, t_j)`, or `+∞` when the
/// trajectory leaves the inclusion (the indicator part of the relaxed
/// integrand).
pub fn relaxed_cost(spec: &BolzaSpec, traj: &DiscreteTrajectory, tol: f64) -> Result<f64> {
    if !spec.f.curvature(&|v| matches!(v, Var::V(_))).is_convex() {
        return Err(Error::NonConvexIntegrand);
    }
    if traj.n() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: traj.n(),
        });
    }
    let k = traj.k();
    let mut worst = 0.0_f64;
    let mut total = spec.phi0.eval(&Env::x(traj.x[k].as_slice(), spec.horizon));
    for j in 1..=k {
        let v = traj.velocity(j);
        let t = traj.t(j);
        let d = spec
            .dynamics
            .evaluate(&traj.x[j], t)
            .and_then(|set| set.distance(&v))
            .unwrap_or(f64::INFINITY);
        worst = worst.max(d);
        total += traj.h * spec.f.eval(&Env::new(traj.x[j].as_slice(), v.as_slice(), &[], t));
    }
    if worst > tol || (&traj.x[0] - &spec.x0).norm() > tol {
        return Ok(f64::INFINITY);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    OptimalLocal,
    MaxIter,
    Infeasible,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::OptimalLocal => "optimal-local",
            Status::MaxIter => "max-iter",
            Status::Infeasible => "infeasible",
        })
    }
}

impl FromStr for Status {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal-local" => Ok(Status::OptimalLocal),
            "max-iter" => Ok(Status::MaxIter),
            "infeasible" => Ok(Status::Infeasible),
            other => Err(Error::Config(format!("unknown status {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
    pub smoothing: bool,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            starts: 8,
            seed: 0,
            smoothing: false,
            max_outer: 40,
            max_inner: 20_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub traj: DiscreteTrajectory,
    pub controls: Vec<Vector>,
    pub cost: f64,
    pub multipliers: Multipliers,
    pub status: Status,
}

/// Solves the discrete problem; the returned multipliers are whichever of
/// the solver's own estimates and the recovered ones certify better.
pub fn solve(dp: &DiscretizedProblem, opts: &SolveOptions) -> Result<SolveResult> {
    let mut res = solver::solve(dp, opts)?;
    if let Ok(rec) = kkt::recover_adjoint(dp, &res.traj) {
        let own = kkt::check(dp, &res.traj, &res.multipliers, None)
            .map(|r| r.total)
            .unwrap_or(f64::INFINITY);
        if rec.report.total < own {
            res.multipliers = rec.multipliers;
        }
    }
    Ok(res)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub k: usize,
    pub h: f64,
    pub eta_k: f64,
    pub j_k: f64,
    pub sup_err: f64,
    pub w12_err: f64,
    pub el_residual: f64,
}

pub type StudyOutcome = std::result::Result<StudyRow, String>;

/// One row per `k` in the given order; failing rows keep their error and do
/// not stop the others.
pub fn study(
    spec: &BolzaSpec,
    reference: &ReferenceTrajectory,
    ks: &[usize],
    mode: Mode,
    opts: &SolveOptions,
) -> Result<Vec<StudyOutcome>> {
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("study ks must be increasing".into()));
    }
    Ok(par::map(ks, |&k| study_row(spec, reference, k, mode, opts).map_err(|e| e.to_string())))
}

fn study_row(
    spec: &BolzaSpec,
    reference: &ReferenceTrajectory,
    k: usize,
    mode: Mode,
    opts: &SolveOptions,
) -> Result<StudyRow> {
    let (dp, report) = assemble_from_reference(spec.clone(), k, mode, reference.clone(), 1e-10)?;
    let sol = solve(&dp, opts)?;
    let (sup_err, w12_err) = extend_and_compare(&sol.traj, reference)?;
    let el = kkt::check(&dp, &sol.traj, &sol.multipliers, None)?.el;
    Ok(StudyRow {
        k,
        h: dp.h(),
        eta_k: report.eta_k,
        j_k: sol.cost,
        sup_err,
        w12_err,
        el_residual: el,
    })
}

pub const STUDY_HEADER: &str = "k,h,eta_k,J_k,sup_err,w12_err,el_residual";

/// Writes the study table; failed rows carry `nan` values.
pub fn write_study_csv(rows: &[StudyOutcome], ks: &[usize], mut out: impl Write) -> Result<()> {
    writeln!(out, "{STUDY_HEADER}")?;
    for (row, &k) in rows.iter().zip(ks) {
        match row {
            Ok(r) => writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k,
                fmt_num(r.h),
                fmt_num(r.eta_k),
                fmt_num(r.j_k),
                fmt_num(r.sup_err),
                fmt_num(r.w12_err),
                fmt_num(r.el_residual)
            )?,
            Err(_) => writeln!(out, "{k},NaN,NaN,NaN,NaN,NaN,NaN")?,
        }
    }
    Ok(())
}

/// True when each value is at most its predecessor plus `slack`.
pub fn nonincreasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}
