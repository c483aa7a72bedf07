//! Set-valued right-hand sides `F(x, t)` and their hypothesis diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Env, Expr, Var, Wrt};
use crate::linalg::{Matrix, Vector};
use crate::par;
use crate::sets::{hausdorff, CompactConvexSet};

/// The two supported representations of `F`.
#[derive(Clone, Debug)]
pub enum MapClass {
    /// `F(x, t) = g1(x, t) + M(t) * controls`
    AffineControl {
        g1: Vec<Expr>,
        /// `n x m` matrix of expressions in `t`
        m: Vec<Vec<Expr>>,
        controls: CompactConvexSet,
    },
    /// `F(x, t) = {y : x = psi(y, t)}` with `psi` written in `v1..vn`.
    SmoothInverse { psi: Vec<Expr> },
}

impl MapClass {
    /// Parses an affine-control class from expression strings.
    pub fn affine(g1: &[&str], m: &[&[&str]], controls: CompactConvexSet) -> Result<Self> {
        let g1 = g1.iter().map(|s| parse_expression(s)).collect::<Result<Vec<_>>>()?;
        let m = m
            .iter()
            .map(|row| row.iter().map(|s| parse_expression(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(MapClass::AffineControl { g1, m, controls })
    }

    pub fn smooth_inverse(psi: &[&str]) -> Result<Self> {
        let psi = psi.iter().map(|s| parse_expression(s)).collect::<Result<Vec<_>>>()?;
        Ok(MapClass::SmoothInverse { psi })
    }
}

#[derive(Clone, Debug)]
pub struct SetMap {
    pub class: MapClass,
    pub domain_lo: Vector,
    pub domain_hi: Vector,
    /// claimed ROSL modulus `l` (any sign)
    pub rosl_l: f64,
    /// claimed uniform bound `m_F`
    pub m_f: f64,
    /// horizon `T`
    pub horizon: f64,
}

/// Whether batch diagnostics use the worker pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Parallel,
    Sequential,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoslReport {
    pub max_quotient: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub m_hat: f64,
    pub pass: bool,
}

const DOMAIN_TOL: f64 = 1e-12;

impl SetMap {
    /// Builds a map with `rosl_l = 0`, `m_F = inf` and horizon 1; adjust with
    /// the `with_*` methods.
    pub fn new(class: MapClass, domain_lo: Vector, domain_hi: Vector) -> Result<Self> {
        let map = SetMap {
            class,
            domain_lo,
            domain_hi,
            rosl_l: 0.0,
            m_f: f64::INFINITY,
            horizon: 1.0,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn with_rosl(mut self, l: f64) -> Self {
        self.rosl_l = l;
        self
    }

    pub fn with_bound(mut self, m_f: f64) -> Self {
        self.m_f = m_f;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn n(&self) -> usize {
        self.domain_lo.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        CompactConvexSet::new_box(self.domain_lo.clone(), self.domain_hi.clone())?;
        match &self.class {
            MapClass::AffineControl { g1, m, controls } => {
                controls.validate()?;
                if g1.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: g1.len(),
                    });
                }
                if m.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.len(),
                    });
                }
                for row in m {
                    if row.len() != controls.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: controls.dim(),
                            got: row.len(),
                        });
                    }
                    for e in row {
                        e.check_vars(|v| v == Var::T, "control matrix")?;
                    }
                }
                for e in g1 {
                    e.check_vars(|v| matches!(v, Var::T) || matches!(v, Var::X(i) if i < n), "g1")?;
                }
            }
            MapClass::SmoothInverse { psi } => {
                if psi.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: psi.len(),
                    });
                }
                for e in psi {
                    e.check_vars(|v| matches!(v, Var::T) || matches!(v, Var::V(i) if i < n), "psi")?;
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> CompactConvexSet {
        CompactConvexSet::Box {
            lo: self.domain_lo.clone(),
            hi: self.domain_hi.clone(),
        }
    }

    pub fn in_domain(&self, x: &Vector) -> bool {
        x.len() == self.n()
            && (0..self.n()).all(|i| {
                x[i] >= self.domain_lo[i] - DOMAIN_TOL && x[i] <= self.domain_hi[i] + DOMAIN_TOL
            })
    }

    pub fn check_domain(&self, x: &Vector) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        if !self.in_domain(x) {
            return Err(Error::OutsideDomain {
                x: x.iter().copied().collect(),
            });
        }
        Ok(())
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon.max(1.0);
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::OutsideHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// True if no expression of the map references `t`.
    pub fn is_autonomous(&self) -> bool {
        let uses_t = |e: &Expr| e.depends_on(|v| v == Var::T);
        match &self.class {
            MapClass::AffineControl { g1, m, .. } => {
                !g1.iter().any(uses_t) && !m.iter().flatten().any(uses_t)
            }
            MapClass::SmoothInverse { psi } => !psi.iter().any(uses_t),
        }
    }

    pub fn is_affine_control(&self) -> bool {
        matches!(self.class, MapClass::AffineControl { .. })
    }

    pub fn controls(&self) -> Option<&CompactConvexSet> {
        match &self.class {
            MapClass::AffineControl { controls, .. } => Some(controls),
            MapClass::SmoothInverse { .. } => None,
        }
    }

    pub fn g1(&self, x: &Vector, t: f64) -> Vector {
        match &self.class {
            MapClass::AffineControl { g1, .. } => {
                let xs = x.as_slice();
                let env = Env::x(xs, t);
                Vector::from_iterator(g1.len(), g1.iter().map(|e| e.eval(&env)))
            }
            MapClass::SmoothInverse { .. } => Vector::zeros(self.n()),
        }
    }

    /// Jacobian of `g1` in `x`.
    pub fn g1_jacobian(&self, x: &Vector, t: f64) -> Matrix {
        let n = self.n();
        let mut jac = Matrix::zeros(n, n);
        if let MapClass::AffineControl { g1, .. } = &self.class {
            let env = Env::x(x.as_slice(), t);
            for (i, e) in g1.iter().enumerate() {
                let (_, g) = e.grad(&env, Wrt::X(n));
                jac.set_row(i, &g.transpose());
            }
        }
        jac
    }

    pub fn m_at(&self, t: f64) -> Matrix {
        match &self.class {
            MapClass::AffineControl { m, controls, .. } => {
                let env = Env::x(&[], t);
                let mut out = Matrix::zeros(m.len(), controls.dim());
                for (i, row) in m.iter().enumerate() {
                    for (j, e) in row.iter().enumerate() {
                        out[(i, j)] = e.eval(&env);
                    }
                }
                out
            }
            MapClass::SmoothInverse { .. } => Matrix::zeros(self.n(), 0),
        }
    }

    /// `C(t) = M(t) * controls` for affine-control maps.
    pub fn control_image(&self, t: f64) -> Option<CompactConvexSet> {
        let controls = self.controls()?;
        Some(
            CompactConvexSet::AffineImage {
                matrix: self.m_at(t),
                offset: Vector::zeros(self.n()),
                base: Box::new(controls.clone()),
            }
            .simplify(),
        )
    }

    pub fn psi(&self, y: &Vector, t: f64) -> Vector {
        match &self.class {
            MapClass::SmoothInverse { psi } => {
                let env = Env::new(&[], y.as_slice(), &[], t);
                Vector::from_iterator(psi.len(), psi.iter().map(|e| e.eval(&env)))
            }
            MapClass::AffineControl { .. } => Vector::zeros(self.n()),
        }
    }

    pub fn psi_jacobian(&self, y: &Vector, t: f64) -> Matrix {
        let n = self.n();
        let mut jac = Matrix::zeros(n, n);
        if let MapClass::SmoothInverse { psi } = &self.class {
            let env = Env::new(&[], y.as_slice(), &[], t);
            for (i, e) in psi.iter().enumerate() {
                let (_, g) = e.grad(&env, Wrt::V(n));
                jac.set_row(i, &g.transpose());
            }
        }
        jac
    }

    /// Value `F(x, t)`; rejects points outside the domain box.
    pub fn evaluate(&self, x: &Vector, t: f64) -> Result<CompactConvexSet> {
        self.check_domain(x)?;
        self.check_time(t)?;
        self.evaluate_unchecked(x, t)
    }

    /// As [`SetMap::evaluate`] without the domain and horizon checks, for
    /// solver iterates.
    pub(crate) fn evaluate_unchecked(&self, x: &Vector, t: f64) -> Result<CompactConvexSet> {
        match &self.class {
            MapClass::AffineControl { controls, .. } => Ok(CompactConvexSet::AffineImage {
                matrix: self.m_at(t),
                offset: self.g1(x, t),
                base: Box::new(controls.clone()),
            }
            .simplify()),
            MapClass::SmoothInverse { .. } => Ok(CompactConvexSet::point(self.invert(x, t)?)),
        }
    }

    /// Solves `psi(y, t) = x`.
    pub fn invert(&self, x: &Vector, t: f64) -> Result<Vector> {
        let n = self.n();
        let resid = |y: &Vector| self.psi(y, t) - x;
        if n == 1 {
            return invert_scalar(|y| resid(&Vector::from_element(1, y))[0], |y| {
                self.psi_jacobian(&Vector::from_element(1, y), t)[(0, 0)]
            })
            .map(|y| Vector::from_element(1, y));
        }
        let mut y = x.clone();
        let mut r = resid(&y);
        for _ in 0..200 {
            let rn = r.norm();
            if rn <= 1e-13 * (1.0 + x.norm()) {
                return Ok(y);
            }
            let jac = self.psi_jacobian(&y, t);
            let step = jac
                .clone()
                .lu()
                .solve(&(-&r))
                .unwrap_or_else(|| -(jac.transpose() * &r));
            let mut alpha = 1.0;
            loop {
                let cand = &y + &step * alpha;
                let rc = resid(&cand);
                if rc.norm() < rn || alpha < 1e-12 {
                    y = cand;
                    r = rc;
                    break;
                }
                alpha *= 0.5;
            }
        }
        let rn = r.norm();
        if rn <= 1e-9 * (1.0 + x.norm()) {
            Ok(y)
        } else {
            Err(Error::RootFinding { residual: rn })
        }
    }

    /// Worst sampled ROSL quotient `(sigma_F(x1)(d) - sigma_F(x2)(d)) / |d|^2`.
    pub fn rosl_check(&self, l_claim: f64, n_pairs: usize, seed: u64) -> Result<RoslReport> {
        self.rosl_check_exec(l_claim, n_pairs, seed, Exec::Parallel)
    }

    pub fn rosl_check_exec(&self, l_claim: f64, n_pairs: usize, seed: u64, exec: Exec) -> Result<RoslReport> {
        if n_pairs == 0 {
            return Err(Error::Invalid("rosl_check needs at least one pair".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(n_pairs);
        while samples.len() < n_pairs {
            let x1 = self.sample_domain(&mut rng);
            let x2 = self.sample_domain(&mut rng);
            let t = rng.random_range(0.0..=self.horizon);
            if (&x1 - &x2).norm() > 0.0 {
                samples.push((x1, x2, t));
            }
        }
        let quotient = |(x1, x2, t): &(Vector, Vector, f64)| -> Result<f64> {
            let d = x1 - x2;
            let s1 = self.evaluate(x1, *t)?.support_any(&d).0;
            let s2 = self.evaluate(x2, *t)?.support_any(&d).0;
            Ok((s1 - s2) / d.norm_squared())
        };
        let qs = match exec {
            Exec::Parallel => par::map(&samples, quotient),
            Exec::Sequential => par::map_seq(&samples, quotient),
        };
        let mut max_q = f64::NEG_INFINITY;
        for q in qs {
            max_q = max_q.max(q?);
        }
        let tol = 1e-9 * (1.0 + l_claim.abs());
        Ok(RoslReport {
            max_quotient: max_q,
            pass: max_q <= l_claim + tol,
        })
    }

    fn sample_domain(&self, rng: &mut impl Rng) -> Vector {
        Vector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| {
                let (lo, hi) = (self.domain_lo[i], self.domain_hi[i]);
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            }),
        )
    }

    /// Tensor grid over the domain box with `per_axis` points per coordinate
    /// (the center when `per_axis == 1`).
    pub fn domain_grid(&self, per_axis: usize) -> Vec<Vector> {
        let n = self.n();
        let axis = |i: usize| -> Vec<f64> {
            let (lo, hi) = (self.domain_lo[i], self.domain_hi[i]);
            if per_axis <= 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..per_axis)
                    .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
                    .collect()
            }
        };
        let axes: Vec<Vec<f64>> = (0..n).map(axis).collect();
        let mut out = vec![Vector::zeros(n)];
        for (i, ax) in axes.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * ax.len());
            for p in &out {
                for &c in ax {
                    let mut q = p.clone();
                    q[i] = c;
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }

    /// Quadrature estimate of the average modulus of continuity `tau(F; h)`.
    pub fn avg_modulus(&self, h: f64, t_grid: usize, x_grid: usize) -> Result<f64> {
        self.avg_modulus_exec(h, t_grid, x_grid, Exec::Parallel)
    }

    pub fn avg_modulus_exec(&self, h: f64, t_grid: usize, x_grid: usize, exec: Exec) -> Result<f64> {
        if !(h > 0.0) || t_grid < 2 || x_grid < 2 {
            return Err(Error::Invalid("avg_modulus needs h > 0 and grids >= 2".into()));
        }
        if self.is_autonomous() {
            return Ok(0.0);
        }
        let ts: Vec<f64> = (0..t_grid)
            .map(|i| self.horizon * i as f64 / (t_grid - 1) as f64)
            .collect();
        let dt = self.horizon / (t_grid - 1) as f64;
        let half = 0.5 * h;
        let per_x = |x: &Vector| -> Result<f64> {
            let sets = ts
                .iter()
                .map(|&t| self.evaluate(x, t))
                .collect::<Result<Vec<_>>>()?;
            // pairwise distances are reused across overlapping windows
            let w = ((half / dt) + 1e-9).floor() as usize;
            let mut osc = vec![0.0; ts.len()];
            let mut cache = std::collections::HashMap::new();
            for i in 0..ts.len() {
                let lo = i.saturating_sub(w);
                let hi = (i + w).min(ts.len() - 1);
                let mut m = 0.0_f64;
                for a in lo..=hi {
                    for b in (a + 1)..=hi {
                        let d = match cache.get(&(a, b)) {
                            Some(&d) => d,
                            None => {
                                let d = hausdorff(&sets[a], &sets[b])?.value;
                                cache.insert((a, b), d);
                                d
                            }
                        };
                        m = m.max(d);
                    }
                }
                osc[i] = m;
            }
            let integral: f64 = osc.windows(2).map(|p| 0.5 * (p[0] + p[1]) * dt).sum();
            Ok(integral)
        };
        let xs = self.domain_grid(x_grid);
        let vals = match exec {
            Exec::Parallel => par::map(&xs, per_x),
            Exec::Sequential => par::map_seq(&xs, per_x),
        };
        let mut best = 0.0_f64;
        for v in vals {
            best = best.max(v?);
        }
        Ok(best)
    }

    /// Sampled `max |y|` over `y in F(x, t)`.
    pub fn uniform_bound(&self, grid: usize) -> Result<BoundReport> {
        if grid == 0 {
            return Err(Error::Invalid("uniform_bound needs grid >= 1".into()));
        }
        let ts: Vec<f64> = if grid == 1 {
            vec![0.5 * self.horizon]
        } else {
            (0..grid)
                .map(|i| self.horizon * i as f64 / (grid - 1) as f64)
                .collect()
        };
        let xs = self.domain_grid(grid);
        let vals = par::map(&xs, |x| -> Result<f64> {
            let mut m = 0.0_f64;
            for &t in &ts {
                m = m.max(self.evaluate(x, t)?.max_norm(360));
            }
            Ok(m)
        });
        let mut m_hat = 0.0_f64;
        for v in vals {
            m_hat = m_hat.max(v?);
        }
        Ok(BoundReport {
            m_hat,
            pass: m_hat <= self.m_f + 1e-9 * (1.0 + self.m_f.abs()),
        })
    }
}

/// Safeguarded Newton-bisection for a scalar equation `g(y) = 0`.
fn invert_scalar(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64) -> Result<f64> {
    let g0 = g(0.0);
    if g0 == 0.0 {
        return Ok(0.0);
    }
    let mut bracket = None;
    let mut s = 1e-3;
    while s <= 1e12 {
        for cand in [s, -s] {
            let gc = g(cand);
            if gc == 0.0 {
                return Ok(cand);
            }
            if gc.signum() != g0.signum() {
                bracket = Some(if cand > 0.0 { (0.0, cand) } else { (cand, 0.0) });
                break;
            }
        }
        if bracket.is_some() {
            break;
        }
        s *= 2.0;
    }
    let Some((mut a, mut b)) = bracket else {
        return Err(Error::RootFinding { residual: g0.abs() });
    };
    let mut ga = g(a);
    let mut y = 0.5 * (a + b);
    for _ in 0..400 {
        let gy = g(y);
        if gy == 0.0 {
            return Ok(y);
        }
        if gy.signum() == ga.signum() {
            a = y;
            ga = gy;
        } else {
            b = y;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * y.abs().max(f64::MIN_POSITIVE) {
            return Ok(y);
        }
        let d = dg(y);
        let newton = y - gy / d;
        y = if d != 0.0 && newton > a.min(b) && newton < a.max(b) {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn interval_map(g1: &str, lo: f64, hi: f64, dom: f64) -> SetMap {
        let class = MapClass::affine(&[g1], &[&["1"]], CompactConvexSet::interval(lo, hi).unwrap()).unwrap();
        SetMap::new(class, v(&[-dom]), v(&[dom])).unwrap()
    }

    #[test]
    fn evaluate_translate() {
        let map = interval_map("-x1", -1.0, 1.0, 5.0);
        let s = map.evaluate(&v(&[1.0]), 0.3).unwrap();
        assert_eq!(s, CompactConvexSet::interval(-2.0, 0.0).unwrap());
    }

    #[test]
    fn evaluate_degenerate_control_matrix() {
        let class = MapClass::affine(&["0"], &[&["0"]], CompactConvexSet::interval(-4.0, 7.0).unwrap()).unwrap();
        let map = SetMap::new(class, v(&[-1.0]), v(&[1.0])).unwrap();
        let s = map.evaluate(&v(&[0.5]), 0.0).unwrap();
        assert_eq!(s.max_norm(4), 0.0);
    }

    #[test]
    fn smooth_inverse_cube_root() {
        let map = SetMap::new(MapClass::smooth_inverse(&["v1^3"]).unwrap(), v(&[-1.0]), v(&[1.0])).unwrap();
        let y = map.invert(&v(&[0.008]), 0.0).unwrap();
        assert!((y[0] - 0.2).abs() < 1e-14);
        let y = map.invert(&v(&[-0.5]), 0.0).unwrap();
        assert!((y[0] + 0.5f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn domain_is_enforced() {
        let map = interval_map("-x1", -1.0, 1.0, 1.0);
        assert!(matches!(map.evaluate(&v(&[1.5]), 0.0), Err(Error::OutsideDomain { .. })));
        assert!(matches!(map.evaluate(&v(&[0.5]), 2.0), Err(Error::OutsideHorizon { .. })));
    }

    #[test]
    fn rosl_examples() {
        let map = interval_map("-x1", 0.0, 0.0, 3.0);
        let r = map.rosl_check(-1.0, 50, 1).unwrap();
        assert!((r.max_quotient + 1.0).abs() < 1e-12 && r.pass);

        let map = interval_map("-x1", -1.0, 1.0, 3.0);
        let r = map.rosl_check(-1.0, 50, 2).unwrap();
        assert!((r.max_quotient + 1.0).abs() < 1e-12 && r.pass);

        let map = interval_map("x1", 0.0, 0.0, 3.0);
        assert!(!map.rosl_check(0.0, 50, 3).unwrap().pass);
        assert!(map.rosl_check(1.0, 50, 3).unwrap().pass);
        assert!(map.rosl_check(1.0, 0, 3).is_err());
    }

    #[test]
    fn uniform_bound_examples() {
        assert_eq!(interval_map("0", -1.0, 1.0, 4.0).uniform_bound(5).unwrap().m_hat, 1.0);
        let r = interval_map("-x1", -1.0, 1.0, 2.0).uniform_bound(5).unwrap();
        assert_eq!(r.m_hat, 3.0);
        assert!(!r.pass || r.m_hat <= 3.0);
        assert_eq!(interval_map("0", 0.0, 0.0, 4.0).uniform_bound(3).unwrap().m_hat, 0.0);
    }

    #[test]
    fn avg_modulus_of_growing_ball() {
        let class = MapClass::affine(
            &["0", "0"],
            &[&["t", "0"], &["0", "t"]],
            CompactConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
        )
        .unwrap();
        let map = SetMap::new(class, v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap();
        let tau = map.avg_modulus(0.1, 201, 2).unwrap();
        // full windows give oscillation h; the two half windows at the ends lose h^2/4
        assert!((tau - 0.1).abs() < 0.01, "tau = {tau}");
        assert_eq!(interval_map("-x1", -1.0, 1.0, 1.0).avg_modulus(0.1, 11, 3).unwrap(), 0.0);
    }
}
