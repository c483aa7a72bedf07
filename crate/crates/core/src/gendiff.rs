//! Normal cones, subdifferentials and coderivatives for the supported set
//! catalog and the nonsmooth expression fragment.
//!
//! Every object here is exact: cones are computed from the set geometry,
//! subdifferentials from branch gradients of active kinks.

use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Func, Wrt};
use crate::linalg::{self, Bound, Matrix, Vector};
use crate::sets::{CompactConvexSet, Region};
use crate::setmap::{MapClass, SetMap};

/// A closed convex cone.
#[derive(Clone, Debug, PartialEq)]
pub enum ConeRep {
    Zero {
        dim: usize,
    },
    FinitelyGenerated {
        generators: Vec<Vector>,
    },
    /// `cone(generators) + span(lineality)`
    Polyhedral {
        generators: Vec<Vector>,
        lineality: Vec<Vector>,
    },
    WholeSpace {
        dim: usize,
    },
    /// `{w : <w, g> <= 0 for all g}`, the polar of `cone(generators)`.
    Polar {
        generators: Vec<Vector>,
    },
}

const CONE_TOL: f64 = 1e-10;

impl ConeRep {
    pub fn dim(&self) -> usize {
        match self {
            ConeRep::Zero { dim } | ConeRep::WholeSpace { dim } => *dim,
            ConeRep::FinitelyGenerated { generators } | ConeRep::Polar { generators } => generators[0].len(),
            ConeRep::Polyhedral {
                generators,
                lineality,
            } => generators.first().or(lineality.first()).map_or(0, |v| v.len()),
        }
    }

    /// Builds the simplest representation of `cone(generators) + span(lineality)`.
    pub fn from_parts(dim: usize, generators: Vec<Vector>, lineality: Vec<Vector>) -> ConeRep {
        let generators: Vec<Vector> = generators.into_iter().filter(|g| g.norm() > 0.0).collect();
        let lineality: Vec<Vector> = lineality.into_iter().filter(|g| g.norm() > 0.0).collect();
        if generators.is_empty() && lineality.is_empty() {
            return ConeRep::Zero { dim };
        }
        if !lineality.is_empty() && linalg::rank(&linalg::columns(&lineality, dim), 1e-12) == dim {
            return ConeRep::WholeSpace { dim };
        }
        if lineality.is_empty() {
            ConeRep::FinitelyGenerated { generators }
        } else {
            ConeRep::Polyhedral {
                generators,
                lineality,
            }
        }
    }

    /// Generators and lineality basis; polars are converted by enumerating
    /// extreme rays.
    pub fn parts(&self) -> (Vec<Vector>, Vec<Vector>) {
        match self {
            ConeRep::Zero { .. } => (vec![], vec![]),
            ConeRep::WholeSpace { dim } => (vec![], (0..*dim).map(|i| linalg::unit(*dim, i)).collect()),
            ConeRep::FinitelyGenerated { generators } => (generators.clone(), vec![]),
            ConeRep::Polyhedral {
                generators,
                lineality,
            } => (generators.clone(), lineality.clone()),
            ConeRep::Polar { generators } => polar_parts(generators),
        }
    }

    /// Equivalent representation without the `Polar` variant.
    pub fn normalized(&self) -> ConeRep {
        match self {
            ConeRep::Polar { generators } => {
                let (g, l) = self.parts();
                ConeRep::from_parts(generators[0].len(), g, l)
            }
            other => other.clone(),
        }
    }

    pub fn project(&self, w: &Vector) -> Vector {
        match self {
            ConeRep::Zero { .. } => Vector::zeros(w.len()),
            ConeRep::WholeSpace { .. } => w.clone(),
            ConeRep::FinitelyGenerated { generators } => linalg::project_onto_cone(generators, &[], w).0,
            ConeRep::Polyhedral {
                generators,
                lineality,
            } => linalg::project_onto_cone(generators, lineality, w).0,
            // Moreau: w = P_K w + P_{K°} w
            ConeRep::Polar { generators } => w - linalg::project_onto_cone(generators, &[], w).0,
        }
    }

    pub fn distance(&self, w: &Vector) -> f64 {
        (w - self.project(w)).norm()
    }

    pub fn contains(&self, w: &Vector, tol: f64) -> bool {
        self.distance(w) <= tol
    }

    /// True when the cone is `{0}`.
    pub fn is_zero(&self) -> bool {
        match self {
            ConeRep::Zero { .. } => true,
            ConeRep::WholeSpace { .. } => false,
            _ => matches!(self.normalized(), ConeRep::Zero { .. }),
        }
    }
}

/// Extreme rays and lineality of `{w : G w <= 0}` (rows of `G` are the
/// generators).
fn polar_parts(generators: &[Vector]) -> (Vec<Vector>, Vec<Vector>) {
    let n = generators[0].len();
    let gens: Vec<Vector> = generators.iter().filter(|g| g.norm() > 0.0).cloned().collect();
    if gens.is_empty() {
        return (vec![], (0..n).map(|i| linalg::unit(n, i)).collect());
    }
    let g_rows = linalg::columns(&gens, n).transpose();
    let lineality = linalg::null_space(&g_rows, 1e-12);
    let r = n - lineality.len();
    let mut rays: Vec<Vector> = Vec::new();
    let feasible = |d: &Vector| gens.iter().all(|g| g.dot(d) <= CONE_TOL * g.norm());
    let push = |d: Vector, rays: &mut Vec<Vector>| {
        let d = d.normalize();
        if !rays.iter().any(|e| (e - &d).norm() < 1e-9) {
            rays.push(d);
        }
    };
    for subset in subsets(gens.len(), r.saturating_sub(1)) {
        let mut rows: Vec<Vector> = subset.iter().map(|&i| gens[i].clone()).collect();
        rows.extend(lineality.iter().cloned());
        let m = if rows.is_empty() {
            Matrix::zeros(0, n)
        } else {
            linalg::columns(&rows, n).transpose()
        };
        let ns = linalg::null_space(&m, 1e-12);
        if ns.len() != 1 {
            continue;
        }
        let d = ns[0].clone();
        if feasible(&d) {
            push(d.clone(), &mut rays);
        }
        if feasible(&-&d) {
            push(-d, &mut rays);
        }
    }
    (rays, lineality)
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

fn membership_tol(x: &Vector) -> f64 {
    1e-8 * (1.0 + x.norm())
}

/// Normal cone of a convex set (or the whole space) at a member `x`.
pub fn normal_cone(region: &Region, x: &Vector) -> Result<ConeRep> {
    match region {
        Region::WholeSpace => Ok(ConeRep::Zero { dim: x.len() }),
        Region::Set(set) => normal_cone_set(set, x),
    }
}

pub fn normal_cone_set(set: &CompactConvexSet, x: &Vector) -> Result<ConeRep> {
    let tol = membership_tol(x);
    let dist = set.distance(x)?;
    if dist > tol {
        return Err(Error::PointNotInSet { distance: dist });
    }
    let n = x.len();
    let set = set.simplify();
    Ok(match &set {
        CompactConvexSet::Box { lo, hi } => {
            let mut gens = Vec::new();
            for i in 0..n {
                if x[i] >= hi[i] - tol {
                    gens.push(linalg::unit(n, i));
                }
                if x[i] <= lo[i] + tol {
                    gens.push(-linalg::unit(n, i));
                }
            }
            ConeRep::from_parts(n, gens, vec![])
        }
        CompactConvexSet::Ball { center, radius } => {
            let r = x - center;
            if *radius == 0.0 {
                ConeRep::WholeSpace { dim: n }
            } else if r.norm() >= radius - tol {
                ConeRep::FinitelyGenerated {
                    generators: vec![r.normalize()],
                }
            } else {
                ConeRep::Zero { dim: n }
            }
        }
        CompactConvexSet::AffineImage {
            matrix,
            offset,
            base,
        } if !set.is_polytope() => {
            let CompactConvexSet::Ball { center, radius } = base.as_ref() else {
                return Err(Error::UnsupportedExpression(
                    "normal cone of this affine image is not supported".into(),
                ));
            };
            // N_{AB+o}(As+o) = {w : A^T w in N_B(s)} for any preimage s
            let at = matrix.transpose();
            let lineality = linalg::null_space(&at, 1e-12);
            let e = linalg::least_squares(&(matrix * *radius), &(x - offset - matrix * center));
            let gens = if e.norm() >= 1.0 - 1e-8 {
                vec![linalg::least_squares(&at, &e.normalize())]
            } else {
                vec![]
            };
            ConeRep::from_parts(n, gens, lineality)
        }
        _ => {
            let verts = set.vertices().expect("polytope-like set");
            let dirs: Vec<Vector> = verts.iter().map(|v| v - x).filter(|d| d.norm() > tol).collect();
            if dirs.is_empty() {
                ConeRep::WholeSpace { dim: n }
            } else {
                ConeRep::Polar { generators: dirs }.normalized()
            }
        }
    })
}

/// Normal cone of `Omega + eta B` at `x`.
pub fn normal_cone_inflated(region: &Region, eta: f64, x: &Vector) -> Result<ConeRep> {
    let n = x.len();
    if eta <= 0.0 {
        return normal_cone(region, x);
    }
    let (p, d) = region.project(x)?;
    let tol = membership_tol(x);
    if d > eta + tol {
        return Err(Error::PointNotInSet { distance: d - eta });
    }
    if d < eta - tol {
        return Ok(ConeRep::Zero { dim: n });
    }
    Ok(ConeRep::FinitelyGenerated {
        generators: vec![(x - p).normalize()],
    })
}

// ---------------------------------------------------------------------------
// subdifferentials

#[derive(Clone, Debug, PartialEq)]
pub enum SubdiffRep {
    Singleton(Vector),
    ConvexHull(Vec<Vector>),
    UnionOfPoints(Vec<Vector>),
    Sum(Vec<SubdiffRep>),
    Union(Vec<SubdiffRep>),
}

impl SubdiffRep {
    pub fn dim(&self) -> usize {
        match self {
            SubdiffRep::Singleton(g) => g.len(),
            SubdiffRep::ConvexHull(p) | SubdiffRep::UnionOfPoints(p) => p[0].len(),
            SubdiffRep::Sum(parts) | SubdiffRep::Union(parts) => parts[0].dim(),
        }
    }

    /// Normal form: a union of convex hulls of finitely many points.
    pub fn pieces(&self) -> Vec<Vec<Vector>> {
        match self {
            SubdiffRep::Singleton(g) => vec![vec![g.clone()]],
            SubdiffRep::ConvexHull(p) => vec![p.clone()],
            SubdiffRep::UnionOfPoints(p) => p.iter().map(|q| vec![q.clone()]).collect(),
            SubdiffRep::Union(parts) => parts.iter().flat_map(|p| p.pieces()).collect(),
            SubdiffRep::Sum(parts) => {
                let mut acc: Vec<Vec<Vector>> = vec![vec![Vector::zeros(self.dim())]];
                for part in parts {
                    let mut next = Vec::new();
                    for a in &acc {
                        for b in part.pieces() {
                            let mut pts = Vec::with_capacity(a.len() * b.len());
                            for p in a {
                                for q in &b {
                                    pts.push(p + q);
                                }
                            }
                            next.push(dedup(pts));
                        }
                    }
                    acc = next;
                }
                acc
            }
        }
    }

    pub fn scale(&self, s: f64) -> SubdiffRep {
        let sc = |p: &Vec<Vector>| p.iter().map(|q| q * s).collect::<Vec<_>>();
        match self {
            SubdiffRep::Singleton(g) => SubdiffRep::Singleton(g * s),
            SubdiffRep::ConvexHull(p) => SubdiffRep::ConvexHull(sc(p)),
            SubdiffRep::UnionOfPoints(p) => SubdiffRep::UnionOfPoints(sc(p)),
            SubdiffRep::Sum(parts) => SubdiffRep::Sum(parts.iter().map(|q| q.scale(s)).collect()),
            SubdiffRep::Union(parts) => SubdiffRep::Union(parts.iter().map(|q| q.scale(s)).collect()),
        }
    }

    pub fn shift(&self, g: &Vector) -> SubdiffRep {
        let sh = |p: &Vec<Vector>| p.iter().map(|q| q + g).collect::<Vec<_>>();
        match self {
            SubdiffRep::Singleton(h) => SubdiffRep::Singleton(h + g),
            SubdiffRep::ConvexHull(p) => SubdiffRep::ConvexHull(sh(p)),
            SubdiffRep::UnionOfPoints(p) => SubdiffRep::UnionOfPoints(sh(p)),
            SubdiffRep::Union(parts) => SubdiffRep::Union(parts.iter().map(|q| q.shift(g)).collect()),
            SubdiffRep::Sum(parts) => {
                let mut parts = parts.clone();
                parts[0] = parts[0].shift(g);
                SubdiffRep::Sum(parts)
            }
        }
    }

    pub fn distance(&self, w: &Vector) -> f64 {
        self.pieces()
            .iter()
            .map(|p| linalg::project_onto_hull(p, w).1)
            .fold(f64::INFINITY, f64::min)
    }

    /// `dist(w, self + cone)`.
    pub fn distance_plus_cone(&self, cone: &ConeRep, w: &Vector) -> f64 {
        let (gens, lin) = cone.parts();
        self.pieces()
            .iter()
            .map(|p| dist_hull_plus_cone(p, &gens, &lin, w))
            .fold(f64::INFINITY, f64::min)
    }

    /// Every piece of `other` lies in a single piece of `self`.
    pub fn contains_rep(&self, other: &SubdiffRep, tol: f64) -> bool {
        let mine = self.pieces();
        other.pieces().iter().all(|piece| {
            mine.iter()
                .any(|m| piece.iter().all(|q| linalg::project_onto_hull(m, q).1 <= tol))
        })
    }

    /// Set equality by mutual containment of the normal forms.
    pub fn set_eq(&self, other: &SubdiffRep, tol: f64) -> bool {
        self.contains_rep(other, tol) && other.contains_rep(self, tol)
    }
}

fn dedup(pts: Vec<Vector>) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(pts.len());
    for p in pts {
        if !out.iter().any(|q| (q - &p).norm() <= 1e-14 * (1.0 + p.norm())) {
            out.push(p);
        }
    }
    out
}

/// `dist(w, conv(points) + cone(gens) + span(lin))`.
pub fn dist_hull_plus_cone(points: &[Vector], gens: &[Vector], lin: &[Vector], w: &Vector) -> f64 {
    let mut cols = points.to_vec();
    cols.extend_from_slice(gens);
    cols.extend_from_slice(lin);
    let a = linalg::columns(&cols, w.len());
    let mut bounds = vec![Bound::NonNeg; points.len() + gens.len()];
    bounds.extend(std::iter::repeat_n(Bound::Free, lin.len()));
    let simplex: Vec<usize> = (0..points.len()).collect();
    linalg::bounded_lsq(&a, w, &bounds, &simplex).residual
}

fn kink_is_active(func: Func, args: &[Expr], env: &Env) -> bool {
    let a = args[0].eval(env);
    let (gap, scale) = match func {
        Func::Abs => (a.abs(), a.abs()),
        Func::Max | Func::Min => {
            let b = args[1].eval(env);
            ((a - b).abs(), a.abs().max(b.abs()))
        }
        _ => return false,
    };
    gap <= 1e-12 * (1.0 + scale)
}

fn has_active_kink(e: &Expr, env: &Env) -> bool {
    let mut found = false;
    e.walk(&mut |node| {
        if let Expr::Call(f, args) = node {
            if f.is_kink() && kink_is_active(*f, args, env) {
                found = true;
            }
        }
    });
    found
}

/// Splits `e` into `sum c_i * term_i` through +, -, unary minus and
/// multiplication or division by constants.
fn linear_terms<'a>(e: &'a Expr, scale: f64, out: &mut Vec<(f64, &'a Expr)>) {
    match e {
        Expr::Add(a, b) => {
            linear_terms(a, scale, out);
            linear_terms(b, scale, out);
        }
        Expr::Sub(a, b) => {
            linear_terms(a, scale, out);
            linear_terms(b, -scale, out);
        }
        Expr::Neg(a) => linear_terms(a, -scale, out),
        Expr::Mul(a, b) => match (a.constant_value(), b.constant_value()) {
            (Some(c), _) => linear_terms(b, scale * c, out),
            (None, Some(c)) => linear_terms(a, scale * c, out),
            _ => out.push((scale, e)),
        },
        Expr::Div(a, b) => match b.constant_value() {
            Some(c) if c != 0.0 => linear_terms(a, scale / c, out),
            _ => out.push((scale, e)),
        },
        _ => out.push((scale, e)),
    }
}

/// Limiting subdifferential of `expr` at `env` with respect to `wrt`.
pub fn subdiff(expr: &Expr, env: &Env, wrt: Wrt) -> Result<SubdiffRep> {
    let dim = wrt.dim();
    let mut terms = Vec::new();
    linear_terms(expr, 1.0, &mut terms);
    let mut smooth = Vector::zeros(dim);
    let mut kinks: Vec<SubdiffRep> = Vec::new();
    for (c, term) in terms {
        if c == 0.0 {
            continue;
        }
        if !has_active_kink(term, env) {
            smooth += term.grad(env, wrt).1 * c;
            continue;
        }
        let Expr::Call(func, args) = term else {
            return Err(Error::UnsupportedExpression(format!(
                "active kink inside a nonlinear composition: {term}"
            )));
        };
        if args.iter().any(|a| has_active_kink(a, env)) || !kink_is_active(*func, args, env) {
            return Err(Error::UnsupportedExpression(format!("nested active kinks in {term}")));
        }
        let ga = args[0].grad(env, wrt).1;
        let (branches, convex) = match func {
            Func::Abs => (vec![ga.clone(), -ga], true),
            Func::Max => (vec![ga, args[1].grad(env, wrt).1], true),
            Func::Min => (vec![ga, args[1].grad(env, wrt).1], false),
            _ => unreachable!("only kink atoms are active"),
        };
        let pts = dedup(branches.into_iter().map(|g| g * c).collect());
        let convex = convex == (c > 0.0);
        kinks.push(if pts.len() == 1 {
            SubdiffRep::Singleton(pts[0].clone())
        } else if convex {
            SubdiffRep::ConvexHull(pts)
        } else {
            SubdiffRep::UnionOfPoints(pts)
        });
    }
    Ok(match kinks.len() {
        0 => SubdiffRep::Singleton(smooth),
        1 => kinks[0].shift(&smooth),
        _ => {
            kinks[0] = kinks[0].shift(&smooth);
            SubdiffRep::Sum(kinks)
        }
    })
}

/// Symmetric subdifferential `∂φ ∪ (-∂(-φ))`.
pub fn sym_subdiff(expr: &Expr, env: &Env, wrt: Wrt) -> Result<SubdiffRep> {
    let a = subdiff(expr, env, wrt)?;
    let neg = Expr::Neg(Box::new(expr.clone()));
    let b = subdiff(&neg, env, wrt)?.scale(-1.0);
    let tol = 1e-12;
    Ok(if a.contains_rep(&b, tol) {
        a
    } else if b.contains_rep(&a, tol) {
        b
    } else {
        SubdiffRep::Union(vec![a, b])
    })
}

// ---------------------------------------------------------------------------
// graph normals and coderivatives

/// The normal cone to `gph F(., t)` at `(x, y)`, as a cone in `R^{2n}` over
/// pairs `(u, q)`.
#[derive(Clone, Debug)]
pub struct GraphCone {
    pub n: usize,
    pub cone: ConeRep,
}

impl GraphCone {
    pub fn contains(&self, u: &Vector, q: &Vector, tol: f64) -> bool {
        let mut w = Vector::zeros(2 * self.n);
        w.rows_mut(0, self.n).copy_from(u);
        w.rows_mut(self.n, self.n).copy_from(q);
        self.cone.contains(&w, tol)
    }
}

fn graph_tol(x: &Vector, y: &Vector) -> f64 {
    1e-8 * (1.0 + x.norm() + y.norm())
}

fn check_on_graph(map: &SetMap, x: &Vector, y: &Vector, t: f64) -> Result<()> {
    let d = match &map.class {
        MapClass::AffineControl { .. } => map.evaluate_unchecked(x, t)?.distance(y)?,
        MapClass::SmoothInverse { .. } => (map.psi(y, t) - x).norm(),
    };
    if d > graph_tol(x, y) {
        return Err(Error::PointNotOnGraph { distance: d });
    }
    Ok(())
}

/// Normal cone of `C(t) = M(t) U` at `y - g1(x, t)`.
pub fn control_normal_cone(map: &SetMap, x: &Vector, y: &Vector, t: f64) -> Result<ConeRep> {
    let c = map
        .control_image(t)
        .ok_or_else(|| Error::Invalid("control normal cone needs an affine-control map".into()))?;
    let w = y - map.g1(x, t);
    normal_cone_set(&c, &w).map_err(|e| match e {
        Error::PointNotInSet { distance } => Error::PointNotOnGraph { distance },
        other => other,
    })
}

pub fn graph_normal_cone(map: &SetMap, x: &Vector, y: &Vector, t: f64) -> Result<GraphCone> {
    check_on_graph(map, x, y, t)?;
    let n = map.n();
    let stack = |u: &Vector, q: &Vector| {
        let mut w = Vector::zeros(2 * n);
        w.rows_mut(0, n).copy_from(u);
        w.rows_mut(n, n).copy_from(q);
        w
    };
    let cone = match &map.class {
        MapClass::AffineControl { .. } => {
            let jt = map.g1_jacobian(x, t).transpose();
            let (gens, lin) = control_normal_cone(map, x, y, t)?.parts();
            let lift = |q: &Vector| stack(&(-(&jt * q)), q);
            ConeRep::from_parts(2 * n, gens.iter().map(lift).collect(), lin.iter().map(lift).collect())
        }
        MapClass::SmoothInverse { .. } => {
            let jt = map.psi_jacobian(y, t).transpose();
            let lin = (0..n)
                .map(|i| {
                    let q = linalg::unit(n, i);
                    stack(&q, &(-(&jt * &q)))
                })
                .collect();
            ConeRep::from_parts(2 * n, vec![], lin)
        }
    };
    Ok(GraphCone { n, cone })
}

/// `D*F(x, y)(v)`, a translate of a cone or empty.
#[derive(Clone, Debug)]
pub enum CoderivativeSet {
    Empty,
    /// `{base + w : w in cone}`
    Translate { base: Vector, cone: ConeRep },
}

impl CoderivativeSet {
    pub fn contains(&self, u: &Vector, tol: f64) -> bool {
        match self {
            CoderivativeSet::Empty => false,
            CoderivativeSet::Translate { base, cone } => cone.contains(&(u - base), tol),
        }
    }

    pub fn is_zero_singleton(&self, tol: f64) -> bool {
        match self {
            CoderivativeSet::Empty => false,
            CoderivativeSet::Translate { base, cone } => base.norm() <= tol && cone.is_zero(),
        }
    }
}

pub fn coderivative(map: &SetMap, x: &Vector, y: &Vector, t: f64, v: &Vector) -> Result<CoderivativeSet> {
    check_on_graph(map, x, y, t)?;
    let n = map.n();
    let tol = 1e-10 * (1.0 + v.norm());
    match &map.class {
        MapClass::AffineControl { .. } => {
            // (u, -v) = (-J^T q, q) forces q = -v
            let cone = control_normal_cone(map, x, y, t)?;
            if !cone.contains(&(-v), tol) {
                return Ok(CoderivativeSet::Empty);
            }
            let jt = map.g1_jacobian(x, t).transpose();
            Ok(CoderivativeSet::Translate {
                base: jt * v,
                cone: ConeRep::Zero { dim: n },
            })
        }
        MapClass::SmoothInverse { .. } => {
            // (u, -v) = (q, -J^T q) forces J^T u = v
            let jt = map.psi_jacobian(y, t).transpose();
            let base = linalg::least_squares(&jt, v);
            if (&jt * &base - v).norm() > tol {
                return Ok(CoderivativeSet::Empty);
            }
            let null = linalg::null_space(&jt, 1e-12);
            Ok(CoderivativeSet::Translate {
                base,
                cone: ConeRep::from_parts(n, vec![], null),
            })
        }
    }
}

/// Coderivative criterion `D*F(x, y)(0) = {0}`.
pub fn lipschitz_like_check(map: &SetMap, x: &Vector, y: &Vector, t: f64) -> Result<bool> {
    let zero = Vector::zeros(map.n());
    Ok(coderivative(map, x, y, t, &zero)?.is_zero_singleton(1e-12))
}
