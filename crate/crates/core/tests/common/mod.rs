#![allow(dead_code)]

use std::io::Write;

use rosl::linalg::{Matrix, Vector};
use rosl::sets::CompactConvexSet;
use rosl::setmap::{MapClass, SetMap};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

/// Writes past the test harness capture so result lines always show up.
pub fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

/// A map together with a one-sided Lipschitz modulus known by hand.
pub struct Entry {
    pub name: &'static str,
    pub map: SetMap,
    pub l: f64,
}

fn boxed(class: MapClass, n: usize, r: f64, horizon: f64) -> SetMap {
    SetMap::new(class, Vector::from_element(n, -r), Vector::from_element(n, r))
        .unwrap()
        .with_horizon(horizon)
}

/// Maps with hand-derived moduli:
/// `a x` has modulus `a`; `-x³` is monotone decreasing so `0`;
/// `[[a, b], [-b, a]] x` has symmetric part `a I`;
/// `-2x + sin(swap x)` has symmetric Jacobian part at most `-2 + 1`;
/// the inverse of `y + y³` has slope at most one.
pub fn catalog() -> Vec<Entry> {
    let interval = CompactConvexSet::interval(-1.0, 1.0).unwrap();
    let ball = CompactConvexSet::ball(v(&[0.0, 0.0]), 0.5).unwrap();
    let square = CompactConvexSet::new_box(v(&[-0.3, -0.2]), v(&[0.4, 0.1])).unwrap();
    let triangle = CompactConvexSet::polytope(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
    let mut out = vec![
        Entry {
            name: "linear-growth",
            map: boxed(MapClass::affine(&["1.5*x1"], &[&["1"]], interval.clone()).unwrap(), 1, 5.0, 1.0),
            l: 1.5,
        },
        Entry {
            name: "linear-decay",
            map: boxed(MapClass::affine(&["-3*x1"], &[&["1"]], interval.clone()).unwrap(), 1, 5.0, 1.0),
            l: -3.0,
        },
        Entry {
            name: "cubic",
            map: boxed(MapClass::affine(&["-x1^3"], &[&["1"]], CompactConvexSet::interval(-0.5, 0.5).unwrap()).unwrap(), 1, 2.0, 1.0),
            l: 0.0,
        },
        Entry {
            name: "time-varying",
            map: boxed(MapClass::affine(&["-x1"], &[&["cos(t)"]], interval).unwrap(), 1, 5.0, 1.0),
            l: -1.0,
        },
        Entry {
            name: "rotation",
            map: boxed(
                MapClass::affine(&["0.5*x1 + 2*x2", "-2*x1 + 0.5*x2"], &[&["1", "0"], &["0", "1"]], ball).unwrap(),
                2,
                5.0,
                1.0,
            ),
            l: 0.5,
        },
        Entry {
            name: "sine-coupled",
            map: boxed(
                MapClass::affine(&["-2*x1 + sin(x2)", "-2*x2 + sin(x1)"], &[&["1", "0"], &["0", "1"]], square).unwrap(),
                2,
                5.0,
                1.0,
            ),
            l: -1.0,
        },
        Entry {
            name: "triangle",
            map: boxed(
                MapClass::affine(&["-x1", "-x2"], &[&["1", "0"], &["1", "1"]], triangle).unwrap(),
                2,
                5.0,
                1.0,
            ),
            l: -1.0,
        },
        Entry {
            name: "inverse-cubic",
            map: boxed(MapClass::smooth_inverse(&["v1 + v1^3"]).unwrap(), 1, 3.0, 1.0),
            l: 1.0,
        },
    ];
    for e in &mut out {
        e.map = e.map.clone().with_rosl(e.l);
    }
    out
}

pub fn affine_matrix(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, data)
}
