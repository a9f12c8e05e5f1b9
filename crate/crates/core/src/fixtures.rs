//! Small named complexes and maps used by tests, the CLI and the demo.

use crate::complex::{key, Complex};
use crate::exact::{point, point_int};
use crate::maps::PLMap;
use std::sync::Arc;

/// conv{(0,0),(1,0),(0,1)} with vertices v0, v1, v2.
pub fn standard_simplex() -> Complex {
    Complex::from_parts(
        2,
        vec!["v0".into(), "v1".into(), "v2".into()],
        vec![point_int(&[0, 0]), point_int(&[1, 0]), point_int(&[0, 1])],
        vec![key(&[0, 1, 2])],
    )
}

/// The square [0,2]² split along the diagonal w0w2.
pub fn square_l() -> Complex {
    Complex::from_parts(
        2,
        vec!["w0".into(), "w1".into(), "w2".into(), "w3".into()],
        vec![point_int(&[0, 0]), point_int(&[2, 0]), point_int(&[2, 2]), point_int(&[0, 2])],
        vec![key(&[0, 1, 2]), key(&[0, 2, 3])],
    )
}

/// The triangle with vertices (0,0), (3,0), (0,3), named n0, n1, n2.
pub fn big_triangle() -> Complex {
    Complex::from_parts(
        2,
        vec!["n0".into(), "n1".into(), "n2".into()],
        vec![point_int(&[0, 0]), point_int(&[3, 0]), point_int(&[0, 3])],
        vec![key(&[0, 1, 2])],
    )
}

/// A PL homeomorphism from [`big_triangle`] onto the square of [`square_l`]
/// sending n0, n1, n2 to w0, w1, w2. The centroid goes to (1,1) and the
/// midpoint of n0n2 to w3.
pub fn patch_homeomorphism() -> PLMap {
    let dom = Complex::from_parts(
        2,
        vec!["n0".into(), "n1".into(), "n2".into(), "c".into(), "p".into()],
        vec![point_int(&[0, 0]), point_int(&[3, 0]), point_int(&[0, 3]), point_int(&[1, 1]), point(&[(0, 1), (3, 2)])],
        vec![key(&[0, 1, 3]), key(&[1, 2, 3]), key(&[0, 3, 4]), key(&[3, 2, 4])],
    );
    let images = vec![point_int(&[0, 0]), point_int(&[2, 0]), point_int(&[2, 2]), point_int(&[1, 1]), point_int(&[0, 2])];
    PLMap::new(Arc::new(dom), Arc::new(square_l()), images).expect("fixture images lie in the square")
}

/// Three triangles abc, acd, ade with vertices a(0,0), b(2,0), c(2,2), d(0,2), e(−2,2).
pub fn fold_domain() -> Complex {
    Complex::from_parts(
        2,
        vec!["a".into(), "b".into(), "c".into(), "d".into(), "e".into()],
        vec![point_int(&[0, 0]), point_int(&[2, 0]), point_int(&[2, 2]), point_int(&[0, 2]), point_int(&[-2, 2])],
        vec![key(&[0, 1, 2]), key(&[0, 2, 3]), key(&[0, 3, 4])],
    )
}

/// Folds [`fold_domain`] onto the square: the third triangle is reflected back onto w0w2w3.
pub fn pl_fold() -> PLMap {
    let l = square_l();
    let images = ["w0", "w1", "w2", "w3", "w2"].iter().map(|w| l.point(l.vertex(w).unwrap()).clone()).collect();
    PLMap::new(Arc::new(fold_domain()), Arc::new(l), images).expect("fixture images are vertices")
}
