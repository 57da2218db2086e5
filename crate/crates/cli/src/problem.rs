//! Line-oriented problem files. Grammar: `docs/problem-format.md`.

use std::fmt::Write as _;

use nalgebra::DVector;
use varpoly_core::{CompositeProblem, PolyMap, PolyhedralFunction, Polynomial, Tolerances};

/// `line` is 0 for whole-file problems (missing keys, inconsistent dimensions).
#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            0 => write!(f, "{}", self.msg),
            l => write!(f, "line {l}: {}", self.msg),
        }
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, msg: msg.into() })
}

/// One monomial `coeff * x^exps` of output component `comp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub comp: usize,
    pub coeff: f64,
    pub exps: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Points {
    pub x: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub r: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub count: Option<usize>,
    /// Directions, one `w = ...` line each.
    pub w: Vec<Vec<f64>>,
    /// Prox evaluation points, one `at = ...` line each.
    pub at: Vec<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub w_samples: Option<usize>,
    pub base_samples: Option<usize>,
    pub base_factor: Option<f64>,
    pub rho: Option<f64>,
    pub per_axis: Option<usize>,
    pub prox_rho: Option<f64>,
    pub prox_eps: Option<f64>,
    /// `tol.KEY = VAL` lines, in file order.
    pub tol: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub dim: usize,
    pub pieces: Vec<(Vec<f64>, f64)>,
    pub rows: Vec<(Vec<f64>, f64)>,
    pub inputs: usize,
    pub phi: Vec<Term>,
    /// `None`: `f` is the identity.
    pub f: Option<Vec<Term>>,
    pub points: Points,
    pub params: Params,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    G,
    Phi,
    F,
    Points,
    Params,
}

fn floats(line: usize, s: &str) -> Result<Vec<f64>, ParseError> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ParseError { line, msg: format!("bad number `{tok}`") })
        })
        .collect()
}

fn float(line: usize, s: &str) -> Result<f64, ParseError> {
    match floats(line, s)?.as_slice() {
        [x] => Ok(*x),
        _ => err(line, format!("expected one number, got `{s}`")),
    }
}

fn uint(line: usize, s: &str) -> Result<usize, ParseError> {
    s.trim().parse().or_else(|_| err(line, format!("expected a non-negative integer, got `{s}`")))
}

fn once<T>(slot: &mut Option<T>, line: usize, key: &str, value: T) -> Result<(), ParseError> {
    if slot.is_some() {
        return err(line, format!("duplicate key `{key}`"));
    }
    *slot = Some(value);
    Ok(())
}

// `a.. | alpha`
fn affine(line: usize, s: &str) -> Result<(Vec<f64>, f64), ParseError> {
    let parts: Vec<&str> = s.split('|').collect();
    let [a, c] = parts.as_slice() else {
        return err(line, "expected `coefficients | constant`");
    };
    let a = floats(line, a)?;
    if a.is_empty() {
        return err(line, "empty coefficient vector");
    }
    Ok((a, float(line, c)?))
}

// `comp | coeff | exps`
fn term(line: usize, s: &str) -> Result<Term, ParseError> {
    let parts: Vec<&str> = s.split('|').collect();
    let [c, k, e] = parts.as_slice() else {
        return err(line, "expected `component | coefficient | exponents`");
    };
    let exps = e
        .split_whitespace()
        .map(|tok| tok.parse::<u32>().or_else(|_| err(line, format!("bad exponent `{tok}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Term {
        comp: uint(line, c)?,
        coeff: float(line, k)?,
        exps,
    })
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut section: Option<Section> = None;
        let mut seen = Vec::new();
        let (mut dim, mut inputs) = (None, None);
        let (mut pieces, mut rows, mut phi) = (Vec::new(), Vec::new(), Vec::new());
        let mut f: Option<Vec<Term>> = None;
        let mut points = Points::default();
        let mut params = Params::default();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let s = match name.trim() {
                    "g" => Section::G,
                    "phi" => Section::Phi,
                    "f" => Section::F,
                    "points" => Section::Points,
                    "params" => Section::Params,
                    other => return err(ln, format!("unknown section `[{other}]`")),
                };
                if seen.contains(&s) {
                    return err(ln, format!("duplicate section `[{}]`", name.trim()));
                }
                seen.push(s);
                if s == Section::F {
                    f = Some(Vec::new());
                }
                section = Some(s);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(ln, format!("expected `key = value`, got `{line}`"));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section else {
                return err(ln, "key outside of any section");
            };
            match (sec, key) {
                (Section::G, "dim") => once(&mut dim, ln, key, uint(ln, value)?)?,
                (Section::G, "piece") => pieces.push(affine(ln, value)?),
                (Section::G, "row") => rows.push(affine(ln, value)?),
                (Section::Phi, "inputs") => once(&mut inputs, ln, key, uint(ln, value)?)?,
                (Section::Phi, "term") => phi.push(term(ln, value)?),
                (Section::F, "term") => f.get_or_insert_with(Vec::new).push(term(ln, value)?),
                (Section::Points, "x") => once(&mut points.x, ln, key, floats(ln, value)?)?,
                (Section::Points, "v") => once(&mut points.v, ln, key, floats(ln, value)?)?,
                (Section::Points, "u") => once(&mut points.u, ln, key, floats(ln, value)?)?,
                (Section::Points, "lambda") => once(&mut points.lambda, ln, key, floats(ln, value)?)?,
                (Section::Params, _) => params.set(ln, key, value)?,
                _ => return err(ln, format!("unknown key `{key}` in this section")),
            }
        }
        let Some(dim) = dim else { return err(0, "`[g]` needs `dim`") };
        let Some(inputs) = inputs else { return err(0, "`[phi]` needs `inputs`") };
        let pf = ProblemFile {
            dim,
            pieces,
            rows,
            inputs,
            phi,
            f,
            points,
            params,
        };
        pf.validate()?;
        Ok(pf)
    }

    fn validate(&self) -> Result<(), ParseError> {
        let bad = |msg: String| err(0, msg);
        if self.dim == 0 || self.inputs == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.pieces.is_empty() {
            return bad("`[g]` needs at least one piece".into());
        }
        for (a, _) in self.pieces.iter().chain(&self.rows) {
            if a.len() != self.dim {
                return bad(format!("piece/row has {} coefficients, dim is {}", a.len(), self.dim));
            }
        }
        for (name, terms, outs) in [("phi", Some(&self.phi), self.dim), ("f", self.f.as_ref(), self.inputs)] {
            for t in terms.into_iter().flatten() {
                if t.comp >= outs {
                    return bad(format!("[{name}] component {} out of range 0..{outs}", t.comp));
                }
                if t.exps.len() != self.inputs {
                    return bad(format!("[{name}] term has {} exponents, inputs is {}", t.exps.len(), self.inputs));
                }
            }
        }
        let p = &self.points;
        for (name, vec, len) in [("x", &p.x, self.inputs), ("v", &p.v, self.inputs), ("u", &p.u, self.inputs), ("lambda", &p.lambda, self.dim)] {
            if let Some(v) = vec {
                if v.len() != len || v.iter().any(|x| !x.is_finite()) {
                    return bad(format!("`{name}` needs {len} finite entries"));
                }
            }
        }
        for w in self.params.w.iter().chain(&self.params.at) {
            if w.len() != self.inputs || w.iter().any(|x| !x.is_finite()) {
                return bad(format!("directions and `at` points need {} finite entries", self.inputs));
            }
        }
        let mut tol = Tolerances::default();
        for (k, v) in &self.params.tol {
            tol.set(k, v).or_else(|e| bad(e.to_string()))?;
        }
        self.composite().map_err(|e| ParseError { line: 0, msg: e.to_string() })?;
        self.f_map().map_err(|e| ParseError { line: 0, msg: e.to_string() })?;
        Ok(())
    }

    fn poly_map(&self, terms: &[Term], outs: usize) -> varpoly_core::Result<PolyMap> {
        let comps = (0..outs)
            .map(|c| {
                let ts = terms.iter().filter(|t| t.comp == c).map(|t| (t.coeff, t.exps.clone())).collect();
                Polynomial::new(self.inputs, ts)
            })
            .collect::<varpoly_core::Result<Vec<_>>>()?;
        PolyMap::new(self.inputs, comps)
    }

    pub fn composite(&self) -> varpoly_core::Result<CompositeProblem> {
        let vecs = |xs: &[(Vec<f64>, f64)]| xs.iter().map(|(a, c)| (DVector::from_vec(a.clone()), *c)).collect();
        let g = PolyhedralFunction::new(self.dim, vecs(&self.pieces), vecs(&self.rows))?;
        CompositeProblem::new(g, self.poly_map(&self.phi, self.dim)?)
    }

    pub fn f_map(&self) -> varpoly_core::Result<PolyMap> {
        match &self.f {
            None => Ok(PolyMap::identity(self.inputs)),
            Some(ts) => self.poly_map(ts, self.inputs),
        }
    }

    /// Defaults, then `tol.*` lines of the file.
    pub fn tolerances(&self) -> Tolerances {
        let mut tol = Tolerances::default();
        for (k, v) in &self.params.tol {
            tol.set(k, v).expect("validated at parse time");
        }
        tol
    }

    /// Canonical text; `parse(serialize(p)) == p`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[g]\ndim = {}", self.dim);
        for (a, c) in &self.pieces {
            let _ = writeln!(s, "piece = {} | {}", join(a), num(*c));
        }
        for (b, c) in &self.rows {
            let _ = writeln!(s, "row = {} | {}", join(b), num(*c));
        }
        let _ = writeln!(s, "\n[phi]\ninputs = {}", self.inputs);
        write_terms(&mut s, &self.phi);
        if let Some(f) = &self.f {
            s.push_str("\n[f]\n");
            write_terms(&mut s, f);
        }
        let p = &self.points;
        let pts: Vec<(&str, &Option<Vec<f64>>)> = vec![("x", &p.x), ("v", &p.v), ("u", &p.u), ("lambda", &p.lambda)];
        if pts.iter().any(|(_, v)| v.is_some()) {
            s.push_str("\n[points]\n");
            for (k, v) in pts {
                if let Some(v) = v {
                    let _ = writeln!(s, "{k} = {}", join(v));
                }
            }
        }
        let params = self.params.lines();
        if !params.is_empty() {
            s.push_str("\n[params]\n");
            for l in params {
                let _ = writeln!(s, "{l}");
            }
        }
        s
    }
}

impl Params {
    fn set(&mut self, ln: usize, key: &str, value: &str) -> Result<(), ParseError> {
        if let Some(k) = key.strip_prefix("tol.") {
            if self.tol.iter().any(|(q, _)| q == k) {
                return err(ln, format!("duplicate key `{key}`"));
            }
            Tolerances::default().set(k, value).or_else(|e| err(ln, e.to_string()))?;
            self.tol.push((k.to_string(), value.to_string()));
            return Ok(());
        }
        match key {
            "r" => once(&mut self.r, ln, key, floats(ln, value)?),
            "radius" => once(&mut self.radius, ln, key, float(ln, value)?),
            "count" => once(&mut self.count, ln, key, uint(ln, value)?),
            "w" => {
                self.w.push(floats(ln, value)?);
                Ok(())
            }
            "at" => {
                self.at.push(floats(ln, value)?);
                Ok(())
            }
            "t" => once(&mut self.t, ln, key, floats(ln, value)?),
            "w_samples" => once(&mut self.w_samples, ln, key, uint(ln, value)?),
            "base_samples" => once(&mut self.base_samples, ln, key, uint(ln, value)?),
            "base_factor" => once(&mut self.base_factor, ln, key, float(ln, value)?),
            "rho" => once(&mut self.rho, ln, key, float(ln, value)?),
            "per_axis" => once(&mut self.per_axis, ln, key, uint(ln, value)?),
            "prox_rho" => once(&mut self.prox_rho, ln, key, float(ln, value)?),
            "prox_eps" => once(&mut self.prox_eps, ln, key, float(ln, value)?),
            _ => err(ln, format!("unknown key `{key}` in [params]")),
        }
    }

    fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push(format!("{k} = {v}"));
            }
        };
        push("r", self.r.as_deref().map(join));
        push("radius", self.radius.map(num));
        push("count", self.count.map(|c| c.to_string()));
        push("t", self.t.as_deref().map(join));
        push("w_samples", self.w_samples.map(|c| c.to_string()));
        push("base_samples", self.base_samples.map(|c| c.to_string()));
        push("base_factor", self.base_factor.map(num));
        push("rho", self.rho.map(num));
        push("per_axis", self.per_axis.map(|c| c.to_string()));
        push("prox_rho", self.prox_rho.map(num));
        push("prox_eps", self.prox_eps.map(num));
        for w in &self.w {
            push("w", Some(join(w)));
        }
        for a in &self.at {
            push("at", Some(join(a)));
        }
        for (k, v) in &self.tol {
            push(&format!("tol.{k}"), Some(v.clone()));
        }
        out
    }
}

fn write_terms(s: &mut String, ts: &[Term]) {
    for t in ts {
        let exps: Vec<String> = t.exps.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "term = {} | {} | {}", t.comp, num(t.coeff), exps.join(" "));
    }
}

// shortest repr that parses back to the same f64
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}
