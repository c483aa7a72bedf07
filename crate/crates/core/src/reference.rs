//! Reference trajectories `x̄(t)` on a fine grid and discrete trajectories
//! produced by the implicit scheme, with their CSV formats.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::setmap::SetMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    IntegratedControl,
    File,
}

/// Fine-grid samples of a feasible trajectory and its derivative.
#[derive(Clone, Debug)]
pub struct ReferenceTrajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vector>,
    pub xdot: Vec<Vector>,
    pub provenance: Provenance,
}

impl ReferenceTrajectory {
    pub fn new(t: Vec<f64>, x: Vec<Vector>, xdot: Vec<Vector>, provenance: Provenance) -> Result<Self> {
        let r = ReferenceTrajectory {
            t,
            x,
            xdot,
            provenance,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if self.t.len() < 2 {
            return Err(Error::Invalid("reference needs at least two samples".into()));
        }
        if self.x.len() != self.t.len() || self.xdot.len() != self.t.len() {
            return Err(Error::Invalid("reference columns have different lengths".into()));
        }
        if self.t[0] != 0.0 {
            return Err(Error::Invalid("reference must start at t = 0".into()));
        }
        let n = self.x[0].len();
        if n == 0 || self.x.iter().chain(self.xdot.iter()).any(|v| v.len() != n) {
            return Err(Error::Invalid("reference states have inconsistent dimension".into()));
        }
        // a time may appear twice to mark a jump of the derivative; the
        // state must agree across it
        let last = self.t.len() - 1;
        for i in 0..last {
            let (a, b) = (self.t[i], self.t[i + 1]);
            if !(b >= a) {
                return Err(Error::Invalid("reference times must be nondecreasing".into()));
            }
            if b == a {
                let interior = i > 0 && i + 1 < last && self.t[i - 1] < a && self.t[i + 2] > a;
                if !interior {
                    return Err(Error::Invalid(format!("repeated reference time {a} must be an isolated interior node")));
                }
                if (&self.x[i] - &self.x[i + 1]).norm() > 1e-12 * (1.0 + self.x[i].norm()) {
                    return Err(Error::Invalid(format!("reference state jumps at t = {a}")));
                }
            }
        }
        Ok(())
    }

    /// Samples closed-form `x̄` and `ẋ̄` on `intervals + 1` uniform points.
    pub fn from_analytic(
        x: impl Fn(f64) -> Vector,
        xdot: impl Fn(f64) -> Vector,
        horizon: f64,
        intervals: usize,
    ) -> Result<Self> {
        let t = uniform_grid(horizon, intervals);
        let xs = t.iter().map(|&s| x(s)).collect();
        let xds = t.iter().map(|&s| xdot(s)).collect();
        Self::new(t, xs, xds, Provenance::Analytic)
    }

    /// Integrates `ẋ = g1(x, t) + M(t) u(t)` with classical RK4 on
    /// `intervals` uniform steps. The control must take values in the
    /// control set.
    pub fn from_control(
        map: &SetMap,
        x0: &Vector,
        control: impl Fn(f64) -> Vector,
        horizon: f64,
        intervals: usize,
    ) -> Result<Self> {
        if !map.is_affine_control() {
            return Err(Error::Invalid("control integration needs an affine-control map".into()));
        }
        let rhs = |x: &Vector, t: f64| map.g1(x, t) + map.m_at(t) * control(t);
        let t = uniform_grid(horizon, intervals);
        let dt = horizon / intervals as f64;
        let mut xs = vec![x0.clone()];
        for i in 0..intervals {
            let (s, x) = (t[i], &xs[i]);
            let k1 = rhs(x, s);
            let k2 = rhs(&(x + &k1 * (0.5 * dt)), s + 0.5 * dt);
            let k3 = rhs(&(x + &k2 * (0.5 * dt)), s + 0.5 * dt);
            let k4 = rhs(&(x + &k3 * dt), s + dt);
            xs.push(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0));
        }
        let xdot = t.iter().zip(&xs).map(|(&s, x)| rhs(x, s)).collect();
        Self::new(t, xs, xdot, Provenance::IntegratedControl)
    }

    pub fn n(&self) -> usize {
        self.x[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.t.last().unwrap_or(&0.0)
    }

    pub fn x0(&self) -> &Vector {
        &self.x[0]
    }

    /// Index `i` with `t[i] <= s <= t[i+1]` and `t[i] < t[i+1]`, clamped to
    /// the grid. At a repeated time this is the cell to the right.
    fn locate(&self, s: f64) -> usize {
        let n = self.t.len();
        self.t.partition_point(|&p| p <= s).saturating_sub(1).min(n - 2)
    }

    fn lerp(&self, vals: &[Vector], s: f64) -> Vector {
        let i = self.locate(s);
        let (a, b) = (self.t[i], self.t[i + 1]);
        let w = ((s - a) / (b - a)).clamp(0.0, 1.0);
        &vals[i] * (1.0 - w) + &vals[i + 1] * w
    }

    /// Piecewise-linear interpolant of the state.
    pub fn state_at(&self, s: f64) -> Vector {
        self.lerp(&self.x, s)
    }

    /// Piecewise-linear interpolant of the derivative samples.
    pub fn xdot_at(&self, s: f64) -> Vector {
        self.lerp(&self.xdot, s)
    }

    /// Grid cells clipped to `[a, b]` as `(s0, ẋ̄(s0), s1, ẋ̄(s1))`, with the
    /// derivative interpolated inside each cell so jumps stay exact.
    fn cells(&self, a: f64, b: f64) -> Vec<(f64, Vector, f64, Vector)> {
        let mut out = Vec::new();
        for i in self.locate(a)..self.t.len() - 1 {
            let (t0, t1) = (self.t[i], self.t[i + 1]);
            if t0 >= b {
                break;
            }
            let (s0, s1) = (a.max(t0), b.min(t1));
            if s1 <= s0 {
                continue;
            }
            let at = |s: f64| {
                let w = (s - t0) / (t1 - t0);
                &self.xdot[i] * (1.0 - w) + &self.xdot[i + 1] * w
            };
            out.push((s0, at(s0), s1, at(s1)));
        }
        out
    }

    /// Composite trapezoid of `g(ẋ̄(s))` over `[a, b]` on the merged grid.
    pub fn integrate<G>(&self, a: f64, b: f64, g: G) -> f64
    where
        G: Fn(&Vector) -> f64,
    {
        self.cells(a, b)
            .iter()
            .map(|(s0, d0, s1, d1)| 0.5 * (s1 - s0) * (g(d0) + g(d1)))
            .sum()
    }

    /// `∫_a^b ẋ̄(s) ds`, exact for the piecewise-linear derivative interpolant.
    pub fn integral_of_xdot(&self, a: f64, b: f64) -> Vector {
        let mut acc = Vector::zeros(self.n());
        for (s0, d0, s1, d1) in self.cells(a, b) {
            acc += (d0 + d1) * (0.5 * (s1 - s0));
        }
        acc
    }

    pub fn interval_average(&self, a: f64, b: f64) -> Vector {
        self.integral_of_xdot(a, b) / (b - a)
    }

    /// Largest `dist(ẋ̄(t_i), F(x̄(t_i), t_i))` over the grid.
    pub fn max_inclusion_residual(&self, map: &SetMap) -> Result<f64> {
        let mut m = 0.0_f64;
        for i in 0..self.t.len() {
            let set = map.evaluate(&self.x[i], self.t[i])?;
            m = m.max(set.distance(&self.xdot[i])?);
        }
        Ok(m)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    /// Header `t,x1..xn,xdot1..xdotn`; lines starting with `#` are comments.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 3 || cols.len().is_multiple_of(2) || cols[0] != "t" {
            return Err(Error::Invalid(
                "reference header must be `t, x1..xn, xdot1..xdotn`".into(),
            ));
        }
        let n = (cols.len() - 1) / 2;
        for i in 0..n {
            if cols[1 + i] != format!("x{}", i + 1) || cols[1 + n + i] != format!("xdot{}", i + 1) {
                return Err(Error::Invalid(format!("unexpected reference column `{}`", cols[1 + i])));
            }
        }
        let (mut t, mut x, mut xdot) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Invalid(format!("bad number `{s}` in reference")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != cols.len() {
                return Err(Error::Invalid("ragged reference row".into()));
            }
            t.push(vals[0]);
            x.push(Vector::from_column_slice(&vals[1..=n]));
            xdot.push(Vector::from_column_slice(&vals[1 + n..]));
        }
        Self::new(t, x, xdot, Provenance::File)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let n = self.n();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("xdot{i}")));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.t.len() {
            let mut row = vec![fmt_num(self.t[i])];
            row.extend(self.x[i].iter().map(|&v| fmt_num(v)));
            row.extend(self.xdot[i].iter().map(|&v| fmt_num(v)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn uniform_grid(horizon: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|i| {
            if i == intervals {
                horizon
            } else {
                horizon * i as f64 / intervals as f64
            }
        })
        .collect()
}

/// Shortest round-trip formatting.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

/// Nodes `x_0..x_k` on the uniform grid `t_j = j h`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTrajectory {
    pub h: f64,
    pub x: Vec<Vector>,
}

impl DiscreteTrajectory {
    pub fn new(h: f64, x: Vec<Vector>) -> Self {
        DiscreteTrajectory { h, x }
    }

    /// Builds nodes by summing velocities from `x0`.
    pub fn from_velocities(h: f64, x0: Vector, v: &[Vector]) -> Self {
        let mut x = vec![x0];
        for vj in v {
            let next = x.last().unwrap() + vj * h;
            x.push(next);
        }
        DiscreteTrajectory { h, x }
    }

    pub fn k(&self) -> usize {
        self.x.len() - 1
    }

    pub fn n(&self) -> usize {
        self.x[0].len()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// `v_j = (x_j - x_{j-1}) / h` for `j = 1..k`, stored at index `j - 1`.
    pub fn velocities(&self) -> Vec<Vector> {
        self.x.windows(2).map(|w| (&w[1] - &w[0]) / self.h).collect()
    }

    pub fn velocity(&self, j: usize) -> Vector {
        (&self.x[j] - &self.x[j - 1]) / self.h
    }

    /// Piecewise-linear extension.
    pub fn state_at(&self, s: f64) -> Vector {
        let k = self.k();
        let pos = (s / self.h).clamp(0.0, k as f64);
        let j = (pos.floor() as usize).min(k.saturating_sub(1));
        let w = pos - j as f64;
        &self.x[j] * (1.0 - w) + &self.x[j + 1] * w
    }

    /// Index `j` of the interval `(t_{j-1}, t_j]` containing `s`.
    pub fn interval_of(&self, s: f64) -> usize {
        let k = self.k();
        ((s / self.h).ceil() as usize).clamp(1, k)
    }

    /// Largest `dist(v_j, F(x_j, t_j))`.
    pub fn max_inclusion_residual(&self, map: &SetMap) -> Result<f64> {
        let mut m = 0.0_f64;
        for j in 1..=self.k() {
            let set = map.evaluate(&self.x[j], self.t(j))?;
            m = m.max(set.distance(&self.velocity(j))?);
        }
        Ok(m)
    }

    /// CSV rows `j,t_j,x1..xn,v1..vn`; row 0 has empty velocity fields.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let n = self.n();
        let mut header = vec!["j".to_string(), "t_j".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("v{i}")));
        writeln!(out, "{}", header.join(","))?;
        for j in 0..=self.k() {
            let mut row = vec![j.to_string(), fmt_num(self.t(j))];
            row.extend(self.x[j].iter().map(|&v| fmt_num(v)));
            if j == 0 {
                row.extend(std::iter::repeat_n(String::new(), n));
            } else {
                row.extend(self.velocity(j).iter().map(|&v| fmt_num(v)));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let ncols = rdr.headers()?.len();
        if ncols < 4 || ncols % 2 != 0 {
            return Err(Error::Invalid("trajectory header must be `j,t_j,x..,v..`".into()));
        }
        let n = (ncols - 2) / 2;
        let mut ts = Vec::new();
        let mut x = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad number `{s}` in trajectory")))
            };
            ts.push(parse(&rec[1])?);
            x.push(Vector::from_iterator(
                n,
                (0..n).map(|i| parse(&rec[2 + i])).collect::<Result<Vec<_>>>()?,
            ));
        }
        if x.len() < 2 {
            return Err(Error::Invalid("trajectory needs at least two nodes".into()));
        }
        Ok(DiscreteTrajectory { h: ts[1] - ts[0], x })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v1(a: f64) -> Vector {
        Vector::from_element(1, a)
    }

    #[test]
    fn interval_average_of_linear_derivative() {
        let r = ReferenceTrajectory::from_analytic(|t| v1(t * t / 2.0), v1, 1.0, 64).unwrap();
        assert!((r.interval_average(0.0, 1.0)[0] - 0.5).abs() < 1e-15);
        // off-grid window
        let avg = r.interval_average(0.1, 0.35)[0];
        assert!((avg - 0.225).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let r = ReferenceTrajectory::from_analytic(|t| v1((-t).exp()), |t| v1(-(-t).exp()), 1.0, 8).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let back = ReferenceTrajectory::from_reader(buf.as_slice()).unwrap();
        assert_eq!(back.t, r.t);
        assert_eq!(back.x, r.x);
        assert_eq!(back.xdot, r.xdot);
    }

    #[test]
    fn csv_rejects_bad_grids() {
        let bad = "t,x1,xdot1\n0,1,0\n0,1,0\n";
        assert!(ReferenceTrajectory::from_reader(bad.as_bytes()).is_err());
        let late = "t,x1,xdot1\n0.5,1,0\n1,1,0\n";
        assert!(ReferenceTrajectory::from_reader(late.as_bytes()).is_err());
        let header = "s,x1,xdot1\n0,1,0\n1,1,0\n";
        assert!(ReferenceTrajectory::from_reader(header.as_bytes()).is_err());
    }

    #[test]
    fn repeated_time_marks_a_jump() {
        let text = "t,x1,xdot1\n0,1,-1\n0.5,0.5,-1\n1,0,-1\n1,0,0\n1.5,0,0\n2,0,0\n";
        let r = ReferenceTrajectory::from_reader(text.as_bytes()).unwrap();
        assert_eq!(r.integral_of_xdot(0.0, 2.0)[0], -1.0);
        assert_eq!(r.interval_average(0.75, 1.0)[0], -1.0);
        assert_eq!(r.interval_average(1.0, 1.25)[0], 0.0);
        assert_eq!(r.integrate(0.5, 1.5, |d| d.norm_squared()), 0.5);
        assert_eq!(r.state_at(1.0)[0], 0.0);
        let torn = "t,x1,xdot1\n0,1,-1\n1,0,-1\n1,0.5,0\n2,0.5,0\n";
        assert!(ReferenceTrajectory::from_reader(torn.as_bytes()).is_err());
        let at_end = "t,x1,xdot1\n0,1,-1\n1,0,-1\n1,0,0\n";
        assert!(ReferenceTrajectory::from_reader(at_end.as_bytes()).is_err());
    }

    #[test]
    fn discrete_trajectory_csv_and_extensions() {
        let tr = DiscreteTrajectory::from_velocities(0.25, v1(1.0), &[v1(-1.0), v1(0.0), v1(2.0), v1(1.0)]);
        assert_eq!(tr.k(), 4);
        assert!((tr.state_at(0.125)[0] - 0.875).abs() < 1e-15);
        assert_eq!(tr.interval_of(0.25), 1);
        assert_eq!(tr.interval_of(0.26), 2);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("j,t_j,x1,v1\n0,0.0,1.0,\n"));
        let back = DiscreteTrajectory::from_reader(buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }
}
