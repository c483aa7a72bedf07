//! Compact convex sets with exact support functions and projections, and the
//! Pompeiu-Hausdorff distance between them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

#[derive(Clone, Debug, PartialEq)]
pub enum CompactConvexSet {
    Box {
        lo: Vector,
        hi: Vector,
    },
    Ball {
        center: Vector,
        radius: f64,
    },
    PolytopeV {
        vertices: Vec<Vector>,
    },
    Segment {
        a: Vector,
        b: Vector,
    },
    /// `{matrix * s + offset : s in base}`
    AffineImage {
        matrix: Matrix,
        offset: Vector,
        base: Box<CompactConvexSet>,
    },
}

/// Largest number of box corners we are willing to enumerate.
const MAX_ENUM_DIM: usize = 12;

impl CompactConvexSet {
    pub fn new_box(lo: Vector, hi: Vector) -> Result<Self> {
        let s = CompactConvexSet::Box { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(Vector::from_element(1, lo), Vector::from_element(1, hi))
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        let s = CompactConvexSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn polytope(vertices: Vec<Vector>) -> Result<Self> {
        let s = CompactConvexSet::PolytopeV { vertices };
        s.validate()?;
        Ok(s)
    }

    pub fn segment(a: Vector, b: Vector) -> Result<Self> {
        let s = CompactConvexSet::Segment { a, b };
        s.validate()?;
        Ok(s)
    }

    pub fn point(p: Vector) -> Self {
        CompactConvexSet::PolytopeV { vertices: vec![p] }
    }

    pub fn affine_image(matrix: Matrix, offset: Vector, base: CompactConvexSet) -> Result<Self> {
        let s = CompactConvexSet::AffineImage {
            matrix,
            offset,
            base: Box::new(base),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        match self {
            CompactConvexSet::Box { lo, .. } => lo.len(),
            CompactConvexSet::Ball { center, .. } => center.len(),
            CompactConvexSet::PolytopeV { vertices } => vertices.first().map_or(0, |v| v.len()),
            CompactConvexSet::Segment { a, .. } => a.len(),
            CompactConvexSet::AffineImage { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSet(m.to_string()));
        match self {
            CompactConvexSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return bad("box bounds must be nonempty and of equal length");
                }
                if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
                    return bad("box requires finite lo <= hi componentwise");
                }
            }
            CompactConvexSet::Ball { center, radius } => {
                if center.is_empty() || !(*radius >= 0.0) || !radius.is_finite() {
                    return bad("ball requires a nonempty center and finite radius >= 0");
                }
            }
            CompactConvexSet::PolytopeV { vertices } => {
                let Some(first) = vertices.first() else {
                    return bad("polytope needs at least one vertex");
                };
                if first.is_empty() || vertices.iter().any(|v| v.len() != first.len()) {
                    return bad("polytope vertices must share a positive dimension");
                }
            }
            CompactConvexSet::Segment { a, b } => {
                if a.is_empty() || a.len() != b.len() {
                    return bad("segment endpoints must share a positive dimension");
                }
            }
            CompactConvexSet::AffineImage {
                matrix,
                offset,
                base,
            } => {
                base.validate()?;
                if matrix.ncols() != base.dim() || matrix.nrows() != offset.len() || offset.is_empty() {
                    return bad("affine image matrix does not match base dimension or offset");
                }
            }
        }
        Ok(())
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Support function `max_{s in S} <s, d>` with a maximizer.
    pub fn support(&self, d: &Vector) -> Result<(f64, Vector)> {
        self.check_dim(d.len())?;
        if d.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroDirection);
        }
        Ok(self.support_any(d))
    }

    /// Support function without the direction check; a zero direction
    /// returns value 0 and an arbitrary member.
    pub(crate) fn support_any(&self, d: &Vector) -> (f64, Vector) {
        match self {
            CompactConvexSet::Box { lo, hi } => {
                let p = Vector::from_iterator(
                    lo.len(),
                    (0..lo.len()).map(|i| if d[i] >= 0.0 { hi[i] } else { lo[i] }),
                );
                (p.dot(d), p)
            }
            CompactConvexSet::Ball { center, radius } => {
                let norm = d.norm();
                let p = if norm > 0.0 {
                    center + d * (*radius / norm)
                } else {
                    center.clone()
                };
                (center.dot(d) + radius * norm, p)
            }
            CompactConvexSet::PolytopeV { vertices } => {
                let mut best = (vertices[0].dot(d), 0);
                for (i, v) in vertices.iter().enumerate().skip(1) {
                    let val = v.dot(d);
                    if val > best.0 {
                        best = (val, i);
                    }
                }
                (best.0, vertices[best.1].clone())
            }
            CompactConvexSet::Segment { a, b } => {
                let (va, vb) = (a.dot(d), b.dot(d));
                if vb > va {
                    (vb, b.clone())
                } else {
                    (va, a.clone())
                }
            }
            CompactConvexSet::AffineImage {
                matrix,
                offset,
                base,
            } => {
                let (_, s) = base.support_any(&(matrix.transpose() * d));
                let p = matrix * s + offset;
                (p.dot(d), p)
            }
        }
    }

    /// Euclidean projection of `x` and the distance to it.
    pub fn project(&self, x: &Vector) -> Result<(Vector, f64)> {
        self.check_dim(x.len())?;
        let p = match self {
            CompactConvexSet::Box { lo, hi } => {
                Vector::from_iterator(x.len(), (0..x.len()).map(|i| x[i].clamp(lo[i], hi[i])))
            }
            CompactConvexSet::Ball { center, radius } => {
                let r = x - center;
                let n = r.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + r * (*radius / n)
                }
            }
            CompactConvexSet::PolytopeV { vertices } => {
                if vertices.len() == 1 {
                    vertices[0].clone()
                } else {
                    linalg::project_onto_hull(vertices, x).0
                }
            }
            CompactConvexSet::Segment { a, b } => {
                let ab = b - a;
                let len2 = ab.norm_squared();
                if len2 == 0.0 {
                    a.clone()
                } else {
                    let s = ((x - a).dot(&ab) / len2).clamp(0.0, 1.0);
                    a + ab * s
                }
            }
            CompactConvexSet::AffineImage { .. } => {
                let simple = self.simplify();
                if !matches!(simple, CompactConvexSet::AffineImage { .. }) {
                    return simple.project(x);
                }
                if let Some(verts) = simple.vertices() {
                    linalg::project_onto_hull(&verts, x).0
                } else {
                    project_affine_ball(&simple, x)
                }
            }
        };
        let dist = (x - &p).norm();
        Ok((p, dist))
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok(self.project(x)?.1)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= tol)
    }

    /// Rewrites affine images into primitive sets when this is exact.
    pub fn simplify(&self) -> CompactConvexSet {
        let CompactConvexSet::AffineImage {
            matrix,
            offset,
            base,
        } = self
        else {
            return self.clone();
        };
        let base = base.simplify();
        match base {
            CompactConvexSet::AffineImage {
                matrix: inner,
                offset: inner_off,
                base: inner_base,
            } => CompactConvexSet::AffineImage {
                matrix: matrix * &inner,
                offset: matrix * inner_off + offset,
                base: inner_base,
            }
            .simplify(),
            CompactConvexSet::Segment { a, b } => CompactConvexSet::Segment {
                a: matrix * a + offset,
                b: matrix * b + offset,
            },
            CompactConvexSet::PolytopeV { vertices } => CompactConvexSet::PolytopeV {
                vertices: vertices.iter().map(|v| matrix * v + offset).collect(),
            },
            CompactConvexSet::Box { lo, hi } if is_diagonal(matrix) => {
                let n = lo.len();
                let (mut l, mut h) = (Vector::zeros(n), Vector::zeros(n));
                for i in 0..n {
                    let (p, q) = (matrix[(i, i)] * lo[i], matrix[(i, i)] * hi[i]);
                    l[i] = p.min(q) + offset[i];
                    h[i] = p.max(q) + offset[i];
                }
                CompactConvexSet::Box { lo: l, hi: h }
            }
            CompactConvexSet::Ball { center, radius } if scalar_multiple_of_identity(matrix).is_some() => {
                let s = scalar_multiple_of_identity(matrix).unwrap_or(1.0);
                CompactConvexSet::Ball {
                    center: center * s + offset,
                    radius: radius * s.abs(),
                }
            }
            base => CompactConvexSet::AffineImage {
                matrix: matrix.clone(),
                offset: offset.clone(),
                base: Box::new(base),
            },
        }
    }

    /// Finite vertex (or generating point) list for polytope-like sets.
    pub fn vertices(&self) -> Option<Vec<Vector>> {
        match self {
            CompactConvexSet::Box { lo, hi } => {
                let n = lo.len();
                if n > MAX_ENUM_DIM {
                    return None;
                }
                let free: Vec<usize> = (0..n).filter(|&i| hi[i] > lo[i]).collect();
                let mut out = Vec::with_capacity(1 << free.len());
                for mask in 0..(1usize << free.len()) {
                    let mut p = lo.clone();
                    for (bit, &i) in free.iter().enumerate() {
                        if mask >> bit & 1 == 1 {
                            p[i] = hi[i];
                        }
                    }
                    out.push(p);
                }
                Some(out)
            }
            CompactConvexSet::Ball { radius, center } => (*radius == 0.0).then(|| vec![center.clone()]),
            CompactConvexSet::PolytopeV { vertices } => Some(vertices.clone()),
            CompactConvexSet::Segment { a, b } => Some(vec![a.clone(), b.clone()]),
            CompactConvexSet::AffineImage {
                matrix,
                offset,
                base,
            } => base
                .vertices()
                .map(|vs| vs.iter().map(|v| matrix * v + offset).collect()),
        }
    }

    pub fn is_polytope(&self) -> bool {
        match self {
            CompactConvexSet::Box { lo, .. } => lo.len() <= MAX_ENUM_DIM,
            CompactConvexSet::Ball { radius, .. } => *radius == 0.0,
            CompactConvexSet::PolytopeV { .. } | CompactConvexSet::Segment { .. } => true,
            CompactConvexSet::AffineImage { base, .. } => base.is_polytope(),
        }
    }

    /// Radius of a ball about the origin containing the set.
    pub fn outer_radius(&self) -> f64 {
        match self {
            CompactConvexSet::Ball { center, radius } => center.norm() + radius,
            CompactConvexSet::AffineImage {
                matrix,
                offset,
                base,
            } => {
                if let Some(vs) = self.vertices() {
                    return vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
                }
                matrix.norm() * base.outer_radius() + offset.norm()
            }
            _ => self
                .vertices()
                .map(|vs| vs.iter().map(|v| v.norm()).fold(0.0, f64::max))
                .unwrap_or_else(|| {
                    // huge boxes: corner norm
                    if let CompactConvexSet::Box { lo, hi } = self {
                        lo.iter()
                            .zip(hi.iter())
                            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    } else {
                        0.0
                    }
                }),
        }
    }

    /// `max_{y in S} |y|`, exact for polytopes and balls, otherwise the max of
    /// the support function over `n_dirs` sampled unit directions.
    pub fn max_norm(&self, n_dirs: usize) -> f64 {
        let simple = self.simplify();
        if let Some(vs) = simple.vertices() {
            return vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        if let CompactConvexSet::Ball { center, radius } = &simple {
            return center.norm() + radius;
        }
        sample_directions(simple.dim(), n_dirs, 0x5eed)
            .iter()
            .map(|d| simple.support_any(d).0)
            .fold(0.0, f64::max)
    }

    /// Some member of the set (the image of a center point).
    pub fn any_point(&self) -> Vector {
        match self {
            CompactConvexSet::Box { lo, hi } => (lo + hi) * 0.5,
            CompactConvexSet::Ball { center, .. } => center.clone(),
            CompactConvexSet::PolytopeV { vertices } => vertices[0].clone(),
            CompactConvexSet::Segment { a, .. } => a.clone(),
            CompactConvexSet::AffineImage {
                matrix,
                offset,
                base,
            } => matrix * base.any_point() + offset,
        }
    }

    /// Returns `offset + scale * self`.
    pub fn scale_translate(&self, scale: f64, offset: &Vector) -> CompactConvexSet {
        let n = self.dim();
        CompactConvexSet::AffineImage {
            matrix: Matrix::identity(n, n) * scale,
            offset: offset.clone(),
            base: Box::new(self.clone()),
        }
        .simplify()
    }
}

fn is_diagonal(m: &Matrix) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

fn scalar_multiple_of_identity(m: &Matrix) -> Option<f64> {
    if !is_diagonal(m) || m.nrows() == 0 {
        return None;
    }
    let s = m[(0, 0)];
    (0..m.nrows()).all(|i| m[(i, i)] == s).then_some(s)
}

/// Projection onto `A * Ball(c, r) + o` through the trust-region subproblem
/// `min |r A e - (x - o - A c)|, |e| <= 1`.
fn project_affine_ball(set: &CompactConvexSet, x: &Vector) -> Vector {
    let CompactConvexSet::AffineImage {
        matrix,
        offset,
        base,
    } = set
    else {
        unreachable!("caller passes an affine image");
    };
    let CompactConvexSet::Ball { center, radius } = base.as_ref() else {
        // non-polytope bases other than balls do not arise after simplify
        return set.any_point();
    };
    let b = x - offset - matrix * center;
    if *radius == 0.0 {
        return offset + matrix * center;
    }
    let a = matrix * *radius;
    let e0 = linalg::least_squares(&a, &b);
    let e = if e0.norm() <= 1.0 {
        e0
    } else {
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &b;
        let n = ata.nrows();
        let solve = |lam: f64| -> Vector {
            let m = &ata + Matrix::identity(n, n) * lam;
            m.lu().solve(&atb).unwrap_or_else(|| Vector::zeros(n))
        };
        let (mut lo, mut hi) = (0.0_f64, atb.norm().max(1e-300));
        // |e(hi)| <= |atb| / hi = 1 at hi = |atb|
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if solve(mid).norm() > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let e = solve(hi);
        let n = e.norm();
        if n > 1.0 {
            e / n
        } else {
            e
        }
    };
    offset + matrix * (center + e * *radius)
}

/// A compact convex set or the whole space, as allowed for endpoint sets.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    WholeSpace,
    Set(CompactConvexSet),
}

impl Region {
    pub fn project(&self, x: &Vector) -> Result<(Vector, f64)> {
        match self {
            Region::WholeSpace => Ok((x.clone(), 0.0)),
            Region::Set(s) => s.project(x),
        }
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok(self.project(x)?.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HausdorffMethod {
    Exact,
    DirectionSampled { n_dirs: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HausdorffReport {
    pub value: f64,
    pub method: HausdorffMethod,
    pub error_bound: f64,
}

/// Default direction budget for sampled Hausdorff distances.
pub const HAUSDORFF_DIRS: usize = 720;

/// Pompeiu-Hausdorff distance between two compact convex sets.
pub fn hausdorff(a: &CompactConvexSet, b: &CompactConvexSet) -> Result<HausdorffReport> {
    hausdorff_with(a, b, HAUSDORFF_DIRS)
}

pub fn hausdorff_with(a: &CompactConvexSet, b: &CompactConvexSet, n_dirs: usize) -> Result<HausdorffReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let (a, b) = (a.simplify(), b.simplify());
    let exact = |value: f64| HausdorffReport {
        value,
        method: HausdorffMethod::Exact,
        error_bound: 0.0,
    };
    if a == b {
        return Ok(exact(0.0));
    }
    if a.dim() == 1 {
        let e = Vector::from_element(1, 1.0);
        let (ahi, alo) = (a.support_any(&e).0, -a.support_any(&-&e).0);
        let (bhi, blo) = (b.support_any(&e).0, -b.support_any(&-&e).0);
        return Ok(exact((ahi - bhi).abs().max((alo - blo).abs())));
    }
    if let (
        CompactConvexSet::Ball {
            center: c1,
            radius: r1,
        },
        CompactConvexSet::Ball {
            center: c2,
            radius: r2,
        },
    ) = (&a, &b)
    {
        return Ok(exact((c1 - c2).norm() + (r1 - r2).abs()));
    }
    let va = a.vertices();
    let vb = b.vertices();
    let one_sided = |verts: &[Vector], other: &CompactConvexSet| -> Result<f64> {
        let mut m = 0.0_f64;
        for v in verts {
            m = m.max(other.distance(v)?);
        }
        Ok(m)
    };
    match (&va, &vb) {
        (Some(va), Some(vb)) => {
            let d = one_sided(va, &b)?.max(one_sided(vb, &a)?);
            Ok(exact(d))
        }
        _ => {
            // h(A, B) = max_{|d| = 1} |sigma_A(d) - sigma_B(d)|
            let n = a.dim();
            let dirs = sample_directions(n, n_dirs, 0x4a75);
            let mut value = dirs
                .iter()
                .map(|d| (a.support_any(d).0 - b.support_any(d).0).abs())
                .fold(0.0, f64::max);
            if let Some(va) = &va {
                value = value.max(one_sided(va, &b)?);
            }
            if let Some(vb) = &vb {
                value = value.max(one_sided(vb, &a)?);
            }
            let lip = a.outer_radius() + b.outer_radius();
            let gap = covering_gap(n, &dirs);
            Ok(HausdorffReport {
                value,
                method: HausdorffMethod::DirectionSampled { n_dirs: dirs.len() },
                error_bound: lip * gap,
            })
        }
    }
}

/// Unit directions: uniform angles in 2-D, coordinate axes plus seeded
/// Gaussian samples otherwise.
pub fn sample_directions(n: usize, count: usize, seed: u64) -> Vec<Vector> {
    let count = count.max(2 * n);
    if n == 1 {
        return vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)];
    }
    if n == 2 {
        return (0..count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / count as f64;
                Vector::from_column_slice(&[a.cos(), a.sin()])
            })
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..n {
        out.push(linalg::unit(n, i));
        out.push(-linalg::unit(n, i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let v = Vector::from_iterator(n, (0..n).map(|_| gaussian(&mut rng)));
        let norm = v.norm();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    out
}

/// Chordal covering radius of the sample: exact in 2-D, estimated from probe
/// directions in higher dimension.
fn covering_gap(n: usize, dirs: &[Vector]) -> f64 {
    if n == 2 {
        // half the angular spacing
        return std::f64::consts::PI / dirs.len() as f64;
    }
    let probes = sample_directions(n, 256, 0x9e37);
    probes
        .iter()
        .map(|p| dirs.iter().map(|d| (p - d).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

pub(crate) fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn support_examples() {
        let b = CompactConvexSet::new_box(v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap();
        let (val, arg) = b.support(&v(&[1.0, 0.0])).unwrap();
        assert_eq!(val, 1.0);
        assert_eq!(arg[0], 1.0);

        let ball = CompactConvexSet::ball(v(&[0.0, 0.0]), 2.0).unwrap();
        let (val, arg) = ball.support(&v(&[0.0, 3.0])).unwrap();
        assert_eq!(val, 6.0);
        assert_eq!(arg, v(&[0.0, 2.0]));

        let p = CompactConvexSet::polytope(vec![v(&[0.0, 0.0]), v(&[2.0, 1.0]), v(&[1.0, 3.0])]).unwrap();
        let (val, arg) = p.support(&v(&[1.0, 1.0])).unwrap();
        assert_eq!(val, 4.0);
        assert_eq!(arg, v(&[1.0, 3.0]));
    }

    #[test]
    fn support_rejects_bad_input() {
        let b = CompactConvexSet::interval(0.0, 1.0).unwrap();
        assert!(matches!(b.support(&v(&[0.0])), Err(Error::ZeroDirection)));
        assert!(matches!(
            b.support(&v(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(CompactConvexSet::interval(1.0, 0.0).is_err());
        assert!(CompactConvexSet::ball(v(&[0.0]), -1.0).is_err());
        assert!(CompactConvexSet::polytope(vec![]).is_err());
    }

    #[test]
    fn projection_examples() {
        let ball = CompactConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let (p, d) = ball.project(&v(&[3.0, 0.0])).unwrap();
        assert_eq!(p, v(&[1.0, 0.0]));
        assert_eq!(d, 2.0);

        let b = CompactConvexSet::new_box(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
        let (p, d) = b.project(&v(&[0.5, 0.5])).unwrap();
        assert_eq!(p, v(&[0.5, 0.5]));
        assert_eq!(d, 0.0);

        let tri = CompactConvexSet::polytope(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let (p, d) = tri.project(&v(&[2.0, 2.0])).unwrap();
        assert!((p - v(&[0.5, 0.5])).norm() < 1e-12);
        assert!((d - 3.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn affine_ball_projection_matches_ellipse_geometry() {
        // ellipse with semi-axes 2 and 1; the nearest point to (5, 0) is (2, 0)
        let e = CompactConvexSet::affine_image(
            Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            v(&[0.0, 0.0]),
            CompactConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
        )
        .unwrap();
        let (p, d) = e.project(&v(&[5.0, 0.0])).unwrap();
        assert!((p - v(&[2.0, 0.0])).norm() < 1e-9);
        assert!((d - 3.0).abs() < 1e-9);
        let (p, d) = e.project(&v(&[0.5, 0.5])).unwrap();
        assert!(d < 1e-12 && (p - v(&[0.5, 0.5])).norm() < 1e-12);
    }

    #[test]
    fn hausdorff_examples() {
        let a = CompactConvexSet::interval(0.0, 1.0).unwrap();
        let b = CompactConvexSet::interval(0.0, 2.0).unwrap();
        let r = hausdorff(&a, &b).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.method, HausdorffMethod::Exact);
        assert_eq!(hausdorff(&b, &b).unwrap().value, 0.0);

        let ball = CompactConvexSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let sq = CompactConvexSet::new_box(v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap();
        let r = hausdorff(&ball, &sq).unwrap();
        assert!((r.value - (2f64.sqrt() - 1.0)).abs() <= 1e-12 + r.error_bound);
    }

    #[test]
    fn simplify_reduces_translates() {
        let seg = CompactConvexSet::affine_image(
            Matrix::identity(1, 1),
            v(&[-1.0]),
            CompactConvexSet::interval(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(seg.simplify(), CompactConvexSet::interval(-2.0, 0.0).unwrap());
        let zero = CompactConvexSet::affine_image(
            Matrix::zeros(1, 1),
            v(&[0.0]),
            CompactConvexSet::interval(-1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(zero.simplify(), CompactConvexSet::interval(0.0, 0.0).unwrap());
    }

    #[test]
    fn max_norm_cases() {
        let s = CompactConvexSet::interval(-3.0, 1.0).unwrap();
        assert_eq!(s.max_norm(8), 3.0);
        let ball = CompactConvexSet::ball(v(&[3.0, 4.0]), 1.0).unwrap();
        assert_eq!(ball.max_norm(8), 6.0);
    }
}
