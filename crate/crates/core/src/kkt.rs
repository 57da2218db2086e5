//! Active-pattern enumeration and damped Gauss-Newton for `u ∈ f(x) + ∂φ(x)`,
//! plus Gauss-Newton restoration onto faces of `g ∘ Φ`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::smooth::{CompositeProblem, SmoothMap};
use crate::tol::Tolerances;

const MAX_NEWTON: usize = 50;

/// Pieces assumed tied and domain rows assumed tight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub pieces: Vec<usize>,
    pub rows: Vec<usize>,
}

fn subsets(items: &[usize], max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &it in items {
        let k = out.len();
        for s in 0..k {
            if out[s].len() < max_len {
                let mut t = out[s].clone();
                t.push(it);
                out.push(t);
            }
        }
    }
    out.sort_by_key(|s| s.len());
    out
}

fn binom_sum(l: usize, kmax: usize) -> usize {
    let mut total = 0usize;
    let mut c = 1usize;
    for k in 0..=kmax.min(l) {
        if k > 0 {
            c = c.saturating_mul(l - k + 1) / k;
        }
        total = total.saturating_add(c);
    }
    total
}

/// Every (nonempty piece subset of size <= n+1) x (row subset), refused above the limit.
pub fn enumerate_patterns(l: usize, rows: usize, n: usize, tol: &Tolerances) -> Result<Vec<Pattern>> {
    let piece_count = binom_sum(l, n + 1) - 1;
    let row_count = if rows >= usize::BITS as usize { usize::MAX } else { 1usize << rows };
    let count = piece_count.saturating_mul(row_count);
    if count > tol.max_patterns {
        return Err(Error::TooManyPatterns {
            count,
            limit: tol.max_patterns,
        });
    }
    let pieces: Vec<usize> = (0..l).collect();
    let row_ids: Vec<usize> = (0..rows).collect();
    let ps = subsets(&pieces, n + 1);
    let rs = subsets(&row_ids, rows);
    let mut out = Vec::with_capacity(count);
    for p in ps.iter().filter(|p| !p.is_empty()) {
        for r in &rs {
            out.push(Pattern {
                pieces: p.clone(),
                rows: r.clone(),
            });
        }
    }
    Ok(out)
}

/// Face patterns inside the given active sets (tied pieces need two members).
pub(crate) fn face_patterns(active_pieces: &[usize], active_rows: &[usize], tol: &Tolerances) -> Result<Vec<Pattern>> {
    let count = 1usize
        .checked_shl((active_pieces.len() + active_rows.len()) as u32)
        .unwrap_or(usize::MAX);
    if count > tol.max_patterns {
        return Err(Error::TooManyPatterns {
            count,
            limit: tol.max_patterns,
        });
    }
    let mut out = Vec::new();
    for p in subsets(active_pieces, active_pieces.len()) {
        if p.len() == 1 {
            continue;
        }
        for r in subsets(active_rows, active_rows.len()) {
            if p.is_empty() && r.is_empty() {
                continue;
            }
            out.push(Pattern {
                pieces: p.clone(),
                rows: r,
            });
        }
    }
    Ok(out)
}

// equalities <a_j - a_j0, Φ> = α_j - α_j0 and <b_i, Φ> = β_i, with their Jacobian
fn face_system(cp: &CompositeProblem, pat: &Pattern, x: &Vector) -> (Vector, Matrix) {
    let g = cp.g();
    let z = cp.phi().eval(x);
    let jac = cp.phi().jacobian(x);
    let neq = pat.pieces.len().saturating_sub(1) + pat.rows.len();
    let mut e = Vector::zeros(neq);
    let mut de = Matrix::zeros(neq, cp.n());
    let mut k = 0;
    if let Some((&j0, rest)) = pat.pieces.split_first() {
        let (a0, al0) = &g.pieces()[j0];
        for &j in rest {
            let (a, al) = &g.pieces()[j];
            let d = a - a0;
            e[k] = d.dot(&z) - (al - al0);
            de.set_row(k, &(d.transpose() * &jac));
            k += 1;
        }
    }
    for &i in &pat.rows {
        let (b, beta) = &g.rows()[i];
        e[k] = b.dot(&z) - beta;
        de.set_row(k, &(b.transpose() * &jac));
        k += 1;
    }
    (e, de)
}

/// Gauss-Newton with minimum-norm steps from `y` onto the face `pat`; `None`
/// when the residual does not reach machine level.
pub(crate) fn restore(cp: &CompositeProblem, y: &Vector, pat: &Pattern, tol: &Tolerances) -> Option<Vector> {
    let mut x = y.clone();
    let (mut e, mut de) = face_system(cp, pat, &x);
    let scale = 1.0 + cp.phi().eval(y).amax();
    for _ in 0..MAX_NEWTON {
        let r = e.amax();
        if r <= 1e-14 * scale {
            break;
        }
        let step = linalg::lstsq(&de, &(-&e), tol.rank);
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-8 {
            let xn = &x + &step * alpha;
            let (en, den) = face_system(cp, pat, &xn);
            if en.amax() < r {
                x = xn;
                e = en;
                de = den;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if e.amax() <= 1e-12 * scale && x.iter().all(|c| c.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// `u ∈ f(x) + ∂φ(x)` with `f: R^n -> R^n`.
pub(crate) struct Inclusion<'a> {
    pub f: &'a dyn SmoothMap,
    pub cp: &'a CompositeProblem,
}

impl Inclusion<'_> {
    // unknowns y = (x, μ, ν)
    fn system(&self, pat: &Pattern, u: &Vector, y: &Vector) -> (Vector, Matrix) {
        let n = self.cp.n();
        let g = self.cp.g();
        let p = pat.pieces.len();
        let q = pat.rows.len();
        let x = y.rows(0, n).into_owned();
        let jac = self.cp.phi().jacobian(&x);
        let mut lambda = Vector::zeros(self.cp.m());
        for (k, &j) in pat.pieces.iter().enumerate() {
            lambda.axpy(y[n + k], &g.pieces()[j].0, 1.0);
        }
        for (k, &i) in pat.rows.iter().enumerate() {
            lambda.axpy(y[n + p + k], &g.rows()[i].0, 1.0);
        }
        let (fe, fde) = face_system(self.cp, pat, &x);
        let neq = n + 1 + fe.len();
        let nvar = n + p + q;
        let mut r = Vector::zeros(neq);
        let mut d = Matrix::zeros(neq, nvar);
        let stat = self.f.eval(&x) + jac.transpose() * &lambda - u;
        r.rows_mut(0, n).copy_from(&stat);
        let dx = self.f.jacobian(&x) + self.cp.phi().hessian_lambda(&x, &lambda);
        d.view_mut((0, 0), (n, n)).copy_from(&dx);
        for (k, &j) in pat.pieces.iter().enumerate() {
            d.view_mut((0, n + k), (n, 1)).copy_from(&(jac.transpose() * &g.pieces()[j].0));
            d[(n, n + k)] = 1.0;
        }
        for (k, &i) in pat.rows.iter().enumerate() {
            d.view_mut((0, n + p + k), (n, 1)).copy_from(&(jac.transpose() * &g.rows()[i].0));
        }
        r[n] = y.rows(n, p).sum() - 1.0;
        r.rows_mut(n + 1, fe.len()).copy_from(&fe);
        d.view_mut((n + 1, 0), (fe.len(), n)).copy_from(&fde);
        (r, d)
    }

    fn newton(&self, pat: &Pattern, u: &Vector, x0: &Vector, tol: &Tolerances) -> Option<Vector> {
        let n = self.cp.n();
        let p = pat.pieces.len();
        let q = pat.rows.len();
        let g = self.cp.g();
        // multipliers from a least-squares fit at x0
        let jac = self.cp.phi().jacobian(x0);
        let mut gm = Matrix::zeros(n + 1, p + q);
        for (k, &j) in pat.pieces.iter().enumerate() {
            gm.view_mut((0, k), (n, 1)).copy_from(&(jac.transpose() * &g.pieces()[j].0));
            gm[(n, k)] = 1.0;
        }
        for (k, &i) in pat.rows.iter().enumerate() {
            gm.view_mut((0, p + k), (n, 1)).copy_from(&(jac.transpose() * &g.rows()[i].0));
        }
        let mut rhs = Vector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(u - self.f.eval(x0)));
        rhs[n] = 1.0;
        let m0 = linalg::lstsq(&gm, &rhs, tol.rank);
        let mut y = Vector::zeros(n + p + q);
        y.rows_mut(0, n).copy_from(x0);
        y.rows_mut(n, p + q).copy_from(&m0);

        let scale = 1.0 + u.amax();
        let (mut r, mut d) = self.system(pat, u, &y);
        for _ in 0..MAX_NEWTON {
            let res = r.norm();
            if r.amax() <= tol.res * scale {
                break;
            }
            let step = linalg::lstsq(&d, &(-&r), tol.rank);
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-10 {
                let yn = &y + &step * alpha;
                let (rn, dn) = self.system(pat, u, &yn);
                if rn.norm() < (1.0 - 1e-4 * alpha) * res {
                    y = yn;
                    r = rn;
                    d = dn;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if r.amax() <= tol.res * scale && y.iter().all(|c| c.is_finite()) {
            Some(y.rows(0, n).into_owned())
        } else {
            None
        }
    }

    /// `dist_∞(u, f(x) + ∇Φ(x)*∂g(Φ(x)))`, `None` outside the domain.
    pub fn residual(&self, u: &Vector, x: &Vector, tol: &Tolerances) -> Result<Option<f64>> {
        let z = self.cp.phi().eval(x);
        if !self.cp.g().in_domain(&z, tol) {
            return Ok(None);
        }
        let sd = self.cp.g().subdifferential(&z, tol)?;
        let target = u - self.f.eval(x);
        sd.linf_distance_of_image(&self.cp.phi().jacobian(x).transpose(), &target)
    }

    /// All certified solutions reachable from the given starts, deduplicated.
    pub fn solve_all(&self, u: &Vector, starts: &[Vector], tol: &Tolerances) -> Result<Vec<Vector>> {
        let g = self.cp.g();
        let pats = enumerate_patterns(g.pieces().len(), g.rows().len(), self.cp.n(), tol)?;
        let scale = 1.0 + u.amax();
        let mut found: Vec<Vector> = Vec::new();
        for pat in &pats {
            for x0 in starts {
                let Some(x) = self.newton(pat, u, x0, tol) else { continue };
                if found.iter().any(|f| (f - &x).norm() <= 1e-8 * (1.0 + x.norm())) {
                    continue;
                }
                if let Some(d) = self.residual(u, &x, tol)? {
                    if d <= tol.cert * scale {
                        found.push(x);
                    }
                }
            }
        }
        Ok(found)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedral::PolyhedralFunction;
    use crate::smooth::{PolyMap, Polynomial};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn pattern_counts() {
        let t = Tolerances::default();
        // |.| in 1D: {0}, {1}, {0,1}
        assert_eq!(enumerate_patterns(2, 0, 1, &t).unwrap().len(), 3);
        // one piece, two rows: 4 row subsets
        assert_eq!(enumerate_patterns(1, 2, 2, &t).unwrap().len(), 4);
        let small = Tolerances {
            max_patterns: 8,
            ..Tolerances::default()
        };
        assert!(matches!(
            enumerate_patterns(3, 3, 2, &small),
            Err(Error::TooManyPatterns { .. })
        ));
    }

    #[test]
    fn face_patterns_skip_single_pieces() {
        let t = Tolerances::default();
        let f = face_patterns(&[0, 1], &[0], &t).unwrap();
        // pieces {} or {0,1}, rows {} or {0}, minus the empty pattern
        assert_eq!(f.len(), 3);
    }

    #[test]
    fn restoration_onto_circle() {
        let t = Tolerances::default();
        let g = PolyhedralFunction::new(1, vec![(v(&[0.0]), 0.0)], vec![(v(&[1.0]), 0.0), (v(&[-1.0]), 0.0)]).unwrap();
        let phi = PolyMap::new(
            2,
            vec![Polynomial::new(2, vec![(1.0, vec![2, 0]), (1.0, vec![0, 2]), (-1.0, vec![0, 0])]).unwrap()],
        )
        .unwrap();
        let cp = CompositeProblem::new(g, phi).unwrap();
        let pat = Pattern {
            pieces: vec![],
            rows: vec![0],
        };
        let y = restore(&cp, &v(&[1.2, 0.3]), &pat, &t).unwrap();
        assert!((y.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn halfline_inclusion() {
        let t = Tolerances::default();
        let g = PolyhedralFunction::new(1, vec![(v(&[0.0]), 0.0)], vec![(v(&[1.0]), 0.0)]).unwrap();
        let cp = CompositeProblem::new(g, PolyMap::identity(1)).unwrap();
        let f = PolyMap::identity(1);
        let inc = Inclusion { f: &f, cp: &cp };
        let s = inc.solve_all(&v(&[0.7]), &[v(&[0.0])], &t).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0][0].abs() < 1e-12);
        let s = inc.solve_all(&v(&[-0.3]), &[v(&[0.0])], &t).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0][0] + 0.3).abs() < 1e-12);
    }
}
