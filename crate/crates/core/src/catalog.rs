//! Small problems with known closed forms, shared by tests, benches and the CLI.

use crate::linalg::Vector;
use crate::polyhedral::PolyhedralFunction;
use crate::smooth::{CompositeProblem, PolyMap, Polynomial};
use crate::tol::Tolerances;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn poly(n: usize, terms: &[(f64, &[u32])]) -> Polynomial {
    Polynomial::new(n, terms.iter().map(|(c, e)| (*c, e.to_vec())).collect()).expect("catalog polynomial")
}

/// `max(z, -z)` on R.
pub fn abs_g() -> PolyhedralFunction {
    PolyhedralFunction::new(1, vec![(v(&[1.0]), 0.0), (v(&[-1.0]), 0.0)], vec![]).expect("abs")
}

/// `δ_{R^m_-}`.
pub fn nonpositive_orthant(m: usize) -> PolyhedralFunction {
    let rows = (0..m)
        .map(|i| {
            let mut b = Vector::zeros(m);
            b[i] = 1.0;
            (b, 0.0)
        })
        .collect();
    PolyhedralFunction::new(m, vec![(Vector::zeros(m), 0.0)], rows).expect("orthant")
}

/// `δ_{0}` on R via two opposite rows.
pub fn zero_indicator() -> PolyhedralFunction {
    PolyhedralFunction::new(1, vec![(v(&[0.0]), 0.0)], vec![(v(&[1.0]), 0.0), (v(&[-1.0]), 0.0)]).expect("zero")
}

/// `|x|` as `max(z, -z) ∘ id`.
pub fn abs() -> CompositeProblem {
    CompositeProblem::new(abs_g(), PolyMap::identity(1)).expect("abs")
}

/// `|x² - x|`.
pub fn abs_quadratic() -> CompositeProblem {
    let phi = PolyMap::new(1, vec![poly(1, &[(1.0, &[2]), (-1.0, &[1])])]).expect("phi");
    CompositeProblem::new(abs_g(), phi).expect("abs quadratic")
}

/// `δ_{R²_-}(x₂² - x₁, x₁² - x₂)`.
pub fn nlp() -> CompositeProblem {
    let phi = PolyMap::new(
        2,
        vec![
            poly(2, &[(1.0, &[0, 2]), (-1.0, &[1, 0])]),
            poly(2, &[(1.0, &[2, 0]), (-1.0, &[0, 1])]),
        ],
    )
    .expect("phi");
    CompositeProblem::new(nonpositive_orthant(2), phi).expect("nlp")
}

/// Indicator of the unit circle, `δ_{0}(‖x‖² - 1)`.
pub fn circle() -> CompositeProblem {
    let phi = PolyMap::new(2, vec![poly(2, &[(1.0, &[2, 0]), (1.0, &[0, 2]), (-1.0, &[0, 0])])]).expect("phi");
    CompositeProblem::new(zero_indicator(), phi).expect("circle")
}

/// Indicator of the unit sphere in R³.
pub fn sphere() -> CompositeProblem {
    let phi = PolyMap::new(
        3,
        vec![poly(3, &[(1.0, &[2, 0, 0]), (1.0, &[0, 2, 0]), (1.0, &[0, 0, 2]), (-1.0, &[0, 0, 0])])],
    )
    .expect("phi");
    CompositeProblem::new(zero_indicator(), phi).expect("sphere")
}

/// `-x² + δ_{R_-}(x)` as `g(z) = z₂ + δ_{z₁ <= 0}` with `Φ = (x, -x²)`.
pub fn neg_square_halfline() -> CompositeProblem {
    let g = PolyhedralFunction::new(2, vec![(v(&[0.0, 1.0]), 0.0)], vec![(v(&[1.0, 0.0]), 0.0)]).expect("g");
    let phi = PolyMap::new(1, vec![poly(1, &[(1.0, &[1])]), poly(1, &[(-1.0, &[2])])]).expect("phi");
    CompositeProblem::new(g, phi).expect("neg square")
}

/// `δ_{R_-}` on R.
pub fn halfline() -> CompositeProblem {
    CompositeProblem::new(nonpositive_orthant(1), PolyMap::identity(1)).expect("halfline")
}

/// `x²` written as `z ∘ x²`.
pub fn square() -> CompositeProblem {
    let g = PolyhedralFunction::new(1, vec![(v(&[1.0]), 0.0)], vec![]).expect("g");
    let phi = PolyMap::new(1, vec![poly(1, &[(1.0, &[2])])]).expect("phi");
    CompositeProblem::new(g, phi).expect("square")
}

/// `φ ≡ 0` on R^n.
pub fn zero(n: usize) -> CompositeProblem {
    let g = PolyhedralFunction::new(n, vec![(Vector::zeros(n), 0.0)], vec![]).expect("g");
    CompositeProblem::new(g, PolyMap::identity(n)).expect("zero")
}

/// A named base pair on a catalog problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: &'static str,
    pub cp: CompositeProblem,
    pub x: Vector,
    pub v: Vector,
}

fn inst(name: &'static str, cp: CompositeProblem, x: &[f64], v_: &[f64]) -> Instance {
    let tol = Tolerances::default();
    let (x, v_) = (v(x), v(v_));
    let cp = cp.with_base(x.clone(), v_.clone(), &tol).expect("catalog base pair");
    Instance { name, cp, x, v: v_ }
}

/// Every catalog base pair; all satisfy SOQC with a unique multiplier.
pub fn instances() -> Vec<Instance> {
    vec![
        inst("abs-v0", abs(), &[0.0], &[0.0]),
        inst("abs-v0.5", abs(), &[0.0], &[0.5]),
        inst("abs-v1", abs(), &[0.0], &[1.0]),
        inst("abs-quadratic", abs_quadratic(), &[0.0], &[-1.0]),
        inst("nlp", nlp(), &[0.0, 0.0], &[-1.0, -2.0]),
        inst("nlp-degenerate", nlp(), &[0.0, 0.0], &[-1.0, 0.0]),
        inst("circle", circle(), &[1.0, 0.0], &[2.0, 0.0]),
        inst("circle-v0", circle(), &[1.0, 0.0], &[0.0, 0.0]),
        inst("neg-square-v0", neg_square_halfline(), &[0.0], &[0.0]),
        inst("neg-square-v1", neg_square_halfline(), &[0.0], &[1.0]),
    ]
}
