//! Dense linear-algebra kernels.
//!
//! The workhorse is [`bounded_lsq`], an active-set least-squares solver for
//!
//! ```text
//!     minimize |A z - b|   subject to  z_i >= 0 (i nonneg),  sum_{i in S} z_i = 1
//! ```
//!
//! with free variables allowed. It covers projection onto convex hulls of
//! finitely many points, distance to finitely generated cones, the sum of a
//! hull and a cone, and the multiplier-recovery systems in [`crate::kkt`].
//! The method is Lawson-Hanson with the simplex row eliminated inside each
//! passive-set subproblem.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Sign restriction of one unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Free,
    NonNeg,
}

#[derive(Clone, Debug)]
pub struct LsqSolution {
    pub z: Vector,
    /// `|A z - b|`
    pub residual: f64,
    pub iterations: usize,
}

/// Bounded least squares with an optional simplex group.
///
/// Every index in `simplex` must carry [`Bound::NonNeg`]. An empty `simplex`
/// drops the equality row.
pub fn bounded_lsq(a: &Matrix, b: &Vector, bounds: &[Bound], simplex: &[usize]) -> LsqSolution {
    if simplex.is_empty() {
        bounded_lsq_groups(a, b, bounds, &[])
    } else {
        bounded_lsq_groups(a, b, bounds, &[simplex.to_vec()])
    }
}

/// Bounded least squares with several disjoint simplex groups, each
/// constrained to sum to one.
pub fn bounded_lsq_groups(a: &Matrix, b: &Vector, bounds: &[Bound], groups: &[Vec<usize>]) -> LsqSolution {
    let n = a.ncols();
    assert_eq!(bounds.len(), n, "one bound per column");
    assert_eq!(a.nrows(), b.len());
    let mut group_of: Vec<Option<usize>> = vec![None; n];
    for (g, members) in groups.iter().enumerate() {
        assert!(!members.is_empty(), "simplex groups must be nonempty");
        for &i in members {
            debug_assert!(bounds[i] == Bound::NonNeg && group_of[i].is_none());
            group_of[i] = Some(g);
        }
    }
    let mut passive: Vec<bool> = bounds.iter().map(|&bd| bd == Bound::Free).collect();
    let mut z = Vector::zeros(n);

    for members in groups {
        let start = members
            .iter()
            .copied()
            .min_by(|&i, &j| (a.column(i) - b).norm().total_cmp(&(a.column(j) - b).norm()))
            .expect("nonempty group");
        passive[start] = true;
        z[start] = 1.0;
    }
    if passive.iter().any(|&p| p) {
        z = solve_passive(a, b, &passive, &group_of, groups.len());
    }

    let scale = a.norm().max(1.0) * (b.norm() + 1.0);
    let dual_tol = 1e-13 * scale;
    let max_iter = 3 * n + 20;
    let mut iterations = 0;
    let mut blocked = vec![false; n];

    'outer: while iterations < max_iter {
        iterations += 1;
        let grad = a.transpose() * (a * &z - b);
        let nu = group_multipliers(&grad, &passive, &group_of, groups.len());
        let mut enter = None;
        let mut best = -dual_tol;
        for j in 0..n {
            if passive[j] || blocked[j] || bounds[j] == Bound::Free {
                continue;
            }
            let mu = grad[j] + group_of[j].map_or(0.0, |g| nu[g]);
            if mu < best {
                best = mu;
                enter = Some(j);
            }
        }
        let Some(j) = enter else { break };
        passive[j] = true;

        loop {
            iterations += 1;
            if iterations > max_iter {
                break 'outer;
            }
            let s = solve_passive(a, b, &passive, &group_of, groups.len());
            let mut alpha = 1.0_f64;
            let mut limiting = false;
            for i in 0..n {
                if passive[i] && bounds[i] == Bound::NonNeg && s[i] <= 1e-14 {
                    let denom = z[i] - s[i];
                    let ratio = if denom > 0.0 { z[i] / denom } else { 0.0 };
                    if ratio < alpha {
                        alpha = ratio;
                    }
                    limiting = true;
                }
            }
            if !limiting {
                z = s;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            z = &z + (s - &z) * alpha;
            let mut removed_entering = false;
            for i in 0..n {
                if passive[i] && bounds[i] == Bound::NonNeg && z[i] <= 1e-14 {
                    // keep at least one member of every group passive
                    if let Some(g) = group_of[i] {
                        let others = (0..n).any(|k| k != i && passive[k] && group_of[k] == Some(g));
                        if !others {
                            continue;
                        }
                    }
                    passive[i] = false;
                    z[i] = 0.0;
                    if i == j {
                        removed_entering = true;
                    }
                }
            }
            if removed_entering && alpha <= 1e-15 {
                // the entering column cannot move; skip it until the passive set changes
                blocked[j] = true;
                break;
            }
        }
    }

    let residual = (a * &z - b).norm();
    LsqSolution {
        z,
        residual,
        iterations,
    }
}

fn group_multipliers(grad: &Vector, passive: &[bool], group_of: &[Option<usize>], n_groups: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n_groups];
    let mut count = vec![0usize; n_groups];
    for i in 0..grad.len() {
        if let (true, Some(g)) = (passive[i], group_of[i]) {
            sum[g] += grad[i];
            count[g] += 1;
        }
    }
    (0..n_groups)
        .map(|g| if count[g] == 0 { 0.0 } else { -sum[g] / count[g] as f64 })
        .collect()
}

/// Unconstrained (up to the simplex rows) least squares on the passive columns.
fn solve_passive(a: &Matrix, b: &Vector, passive: &[bool], group_of: &[Option<usize>], n_groups: usize) -> Vector {
    let n = a.ncols();
    let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
    let mut out = Vector::zeros(n);
    if idx.is_empty() {
        return out;
    }
    let mut pivot: Vec<Option<usize>> = vec![None; n_groups];
    for &i in &idx {
        if let Some(g) = group_of[i] {
            if pivot[g].is_none() {
                pivot[g] = Some(i);
            }
        }
    }
    let is_pivot = |i: usize| group_of[i].is_some_and(|g| pivot[g] == Some(i));
    let cols: Vec<usize> = idx.iter().copied().filter(|&i| !is_pivot(i)).collect();
    let mut rhs = b.clone();
    for p in pivot.iter().flatten() {
        rhs -= a.column(*p);
    }
    if !cols.is_empty() {
        let mut sub = Matrix::zeros(a.nrows(), cols.len());
        for (c, &i) in cols.iter().enumerate() {
            let mut col = a.column(i).clone_owned();
            if let Some(p) = group_of[i].and_then(|g| pivot[g]) {
                col -= a.column(p);
            }
            sub.set_column(c, &col);
        }
        let sol = least_squares(&sub, &rhs);
        for (c, &i) in cols.iter().enumerate() {
            out[i] = sol[c];
        }
    }
    for (g, p) in pivot.iter().enumerate() {
        if let Some(p) = p {
            let others: f64 = cols.iter().filter(|&&i| group_of[i] == Some(g)).map(|&i| out[i]).sum();
            out[*p] = 1.0 - others;
        }
    }
    out
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
pub fn least_squares(a: &Matrix, b: &Vector) -> Vector {
    if a.ncols() == 0 {
        return Vector::zeros(0);
    }
    if a.nrows() == 0 {
        return Vector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-13).max(1e-300);
    svd.solve(b, eps).unwrap_or_else(|_| Vector::zeros(a.ncols()))
}

/// Orthonormal basis of the null space of `m` (columns).
pub fn null_space(m: &Matrix, tol: f64) -> Vec<Vector> {
    let n = m.ncols();
    if n == 0 {
        return Vec::new();
    }
    if m.nrows() == 0 {
        return (0..n).map(|i| unit(n, i)).collect();
    }
    let gram = m.transpose() * m;
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax().max(1.0);
    (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() <= tol * scale)
        .map(|i| eig.eigenvectors.column(i).clone_owned())
        .collect()
}

pub fn rank(m: &Matrix, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let scale = sv.max().max(1.0);
    sv.iter().filter(|&&s| s > tol * scale).count()
}

pub fn unit(n: usize, i: usize) -> Vector {
    let mut e = Vector::zeros(n);
    e[i] = 1.0;
    e
}

/// Euclidean projection onto the convex hull of `points`.
pub fn project_onto_hull(points: &[Vector], x: &Vector) -> (Vector, f64) {
    let a = columns(points, x.len());
    let bounds = vec![Bound::NonNeg; points.len()];
    let simplex: Vec<usize> = (0..points.len()).collect();
    let sol = bounded_lsq(&a, x, &bounds, &simplex);
    let p = &a * &sol.z;
    (p, sol.residual)
}

/// Projection onto `cone(generators) + span(lineality)`.
pub fn project_onto_cone(generators: &[Vector], lineality: &[Vector], x: &Vector) -> (Vector, f64) {
    let mut cols = generators.to_vec();
    cols.extend_from_slice(lineality);
    if cols.is_empty() {
        return (Vector::zeros(x.len()), x.norm());
    }
    let a = columns(&cols, x.len());
    let mut bounds = vec![Bound::NonNeg; generators.len()];
    bounds.extend(std::iter::repeat_n(Bound::Free, lineality.len()));
    let sol = bounded_lsq(&a, x, &bounds, &[]);
    (&a * &sol.z, sol.residual)
}

/// Stack vectors as matrix columns.
pub fn columns(vs: &[Vector], nrows: usize) -> Matrix {
    let mut a = Matrix::zeros(nrows, vs.len());
    for (j, v) in vs.iter().enumerate() {
        a.set_column(j, v);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn hull_projection_matches_triangle_face() {
        let pts = vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let (p, d) = project_onto_hull(&pts, &v(&[2.0, 2.0]));
        assert!((p - v(&[0.5, 0.5])).norm() < 1e-12);
        assert!((d - 3.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hull_projection_interior_point_is_fixed() {
        let pts = vec![v(&[0.0, 0.0]), v(&[2.0, 0.0]), v(&[0.0, 2.0])];
        let (p, d) = project_onto_hull(&pts, &v(&[0.3, 0.4]));
        assert!((p - v(&[0.3, 0.4])).norm() < 1e-12);
        assert!(d < 1e-12);
    }

    #[test]
    fn cone_projection_quadrant() {
        let gens = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let (p, d) = project_onto_cone(&gens, &[], &v(&[-1.0, 2.0]));
        assert!((p - v(&[0.0, 2.0])).norm() < 1e-12);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_variables_absorb_lineality() {
        let gens = vec![v(&[1.0, 0.0])];
        let lin = vec![v(&[0.0, 1.0])];
        let (_, d) = project_onto_cone(&gens, &lin, &v(&[3.0, -7.0]));
        assert!(d < 1e-12);
        let (_, d) = project_onto_cone(&gens, &lin, &v(&[-3.0, -7.0]));
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_do_not_cycle() {
        let pts = vec![v(&[1.0]), v(&[1.0]), v(&[-1.0]), v(&[-1.0])];
        let (p, d) = project_onto_hull(&pts, &v(&[5.0]));
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!((d - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_simplex_groups() {
        // distance from (3, 3) to [0,1]^2 written as hull{0, e1} + hull{0, e2}
        let a = columns(&[v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 0.0]), v(&[0.0, 1.0])], 2);
        let sol = bounded_lsq_groups(&a, &v(&[3.0, 3.0]), &[Bound::NonNeg; 4], &[vec![0, 1], vec![2, 3]]);
        assert!((sol.residual - 8f64.sqrt()).abs() < 1e-12);
        assert!((sol.z[0] + sol.z[1] - 1.0).abs() < 1e-14);
        assert!((sol.z[2] + sol.z[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = Matrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.len(), 2);
        for b in &ns {
            assert!((&m * b).norm() < 1e-10);
        }
    }
}
