//! Double-description conversion from a halfspace system to cone generators.
//!
//! The cone `{x : <h, x> <= 0 for every h}` is built up one halfspace at a
//! time starting from the whole space. The lineality space is tracked
//! explicitly; rays are kept unit-normalized together with the set of
//! processed halfspaces they are tight on, and new rays are created only for
//! adjacent pairs (algebraic rank test).

use crate::linalg::{rank, rows, Vector};

const SIGN_EPS: f64 = 1e-10;

struct Ray {
    v: Vector,
    tight: Vec<usize>,
}

/// Generators of `{x : <h, x> <= 0}`. Lines are returned as `+l` and `-l`.
pub(crate) fn generators_of_halfspaces(halfspaces: &[Vector], dim: usize, rank_tol: f64) -> Vec<Vector> {
    let mut lineality: Vec<Vector> = (0..dim)
        .map(|i| {
            let mut e = Vector::zeros(dim);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut rays: Vec<Ray> = Vec::new();
    let mut processed: Vec<Vector> = Vec::new();

    for h in halfspaces {
        let nrm = h.norm();
        if nrm <= 1e-12 {
            continue;
        }
        let h = h / nrm;
        let k = processed.len();

        let pick = lineality
            .iter()
            .enumerate()
            .map(|(i, l)| (i, h.dot(l)))
            .filter(|(_, s)| s.abs() > SIGN_EPS)
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));

        if let Some((idx, s_star)) = pick {
            let mut l_star = lineality.swap_remove(idx);
            let mut s_star = s_star;
            if s_star > 0.0 {
                l_star = -l_star;
                s_star = -s_star;
            }
            for l in lineality.iter_mut() {
                let c = h.dot(l) / s_star;
                l.axpy(-c, &l_star, 1.0);
            }
            orthonormalize(&mut lineality);
            for r in rays.iter_mut() {
                let c = h.dot(&r.v) / s_star;
                r.v.axpy(-c, &l_star, 1.0);
                let n = r.v.norm();
                if n > 0.0 {
                    r.v /= n;
                }
                r.tight.push(k);
            }
            let n = l_star.norm();
            rays.push(Ray {
                v: l_star / n,
                tight: (0..k).collect(),
            });
        } else {
            let vals: Vec<f64> = rays.iter().map(|r| h.dot(&r.v)).collect();
            let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] > SIGN_EPS).collect();
            let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] < -SIGN_EPS).collect();
            if pos.is_empty() {
                // every ray already satisfies h; record tightness only
                for (i, r) in rays.iter_mut().enumerate() {
                    if vals[i].abs() <= SIGN_EPS {
                        r.tight.push(k);
                    }
                }
                processed.push(h);
                continue;
            }
            let pointed_dim = dim - lineality.len();
            let mut created = Vec::new();
            if pointed_dim >= 2 {
                let need = pointed_dim - 2;
                for &p in &pos {
                    for &q in &neg {
                        let common = intersect(&rays[p].tight, &rays[q].tight);
                        if common.len() < need {
                            continue;
                        }
                        let adjacent = if need == 0 {
                            true
                        } else {
                            let sub: Vec<Vector> = common.iter().map(|&i| processed[i].clone()).collect();
                            rank(&rows(&sub, dim), rank_tol) == need
                        };
                        if adjacent {
                            let mut v = &rays[q].v * vals[p] - &rays[p].v * vals[q];
                            let n = v.norm();
                            if n <= 1e-14 {
                                continue;
                            }
                            v /= n;
                            let mut tight = common;
                            tight.push(k);
                            created.push(Ray { v, tight });
                        }
                    }
                }
            }
            let mut next = Vec::with_capacity(rays.len() + created.len());
            for (i, mut r) in rays.into_iter().enumerate() {
                if vals[i] > SIGN_EPS {
                    continue;
                }
                if vals[i].abs() <= SIGN_EPS {
                    r.tight.push(k);
                }
                next.push(r);
            }
            next.extend(created);
            rays = next;
        }
        processed.push(h);
    }

    let mut out: Vec<Vector> = rays.into_iter().map(|r| r.v).collect();
    for l in lineality {
        out.push(-&l);
        out.push(l);
    }
    out
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|i| b.contains(i)).cloned().collect()
}

fn orthonormalize(vs: &mut Vec<Vector>) {
    let mut out: Vec<Vector> = Vec::with_capacity(vs.len());
    for v in vs.drain(..) {
        let mut w = v;
        for _ in 0..2 {
            for u in &out {
                let d = u.dot(&w);
                w.axpy(-d, u, 1.0);
            }
        }
        let n = w.norm();
        if n > 1e-10 {
            out.push(w / n);
        }
    }
    *vs = out;
}
