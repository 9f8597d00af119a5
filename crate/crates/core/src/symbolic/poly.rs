//! Dense-coefficient polynomials in `(v1, v2, conj v1, conj v2)`.
//!
//! The same type serves the original coordinates `z` and chart
//! coordinates `w`; exponent slot order always follows [`Var::index`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;

use super::{Node, SymError, SymExpr, Var};
use crate::point::C2;

type Exps = [u8; 4];

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<Exps, Complex64>,
}

/// Cached powers of the four variables at one point.
pub struct Powers {
    tab: [Vec<Complex64>; 4],
}

impl Powers {
    pub fn new(p: &C2, max_deg: [u8; 4]) -> Powers {
        let mut tab: [Vec<Complex64>; 4] = Default::default();
        for (k, t) in tab.iter_mut().enumerate() {
            let v = Var::from_index(k).value(p);
            let n = max_deg[k] as usize;
            t.reserve(n + 1);
            t.push(Complex64::new(1.0, 0.0));
            for j in 1..=n {
                let prev = t[j - 1];
                t.push(prev * v);
            }
        }
        Powers { tab }
    }

    fn get(&self, k: usize, e: u8) -> Complex64 {
        self.tab[k][e as usize]
    }
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: Complex64) -> Poly {
        let mut p = Poly::zero();
        p.add_term([0; 4], c);
        p
    }

    pub fn var(v: Var) -> Poly {
        let mut e = [0; 4];
        e[v.index()] = 1;
        let mut p = Poly::zero();
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    pub fn monomial(exps: [u8; 4], c: Complex64) -> Poly {
        let mut p = Poly::zero();
        p.add_term(exps, c);
        p
    }

    pub fn add_term(&mut self, exps: [u8; 4], c: Complex64) {
        if c == CZERO {
            return;
        }
        let slot = self.terms.entry(exps).or_insert(CZERO);
        *slot += c;
        if *slot == CZERO {
            self.terms.remove(&exps);
        }
    }

    pub fn coeff(&self, exps: [u8; 4]) -> Complex64 {
        self.terms.get(&exps).copied().unwrap_or(CZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8; 4], &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.iter().map(|&x| x as usize).sum()).max().unwrap_or(0)
    }

    /// Largest exponent of each variable.
    pub fn max_exps(&self) -> [u8; 4] {
        let mut m = [0u8; 4];
        for e in self.terms.keys() {
            for k in 0..4 {
                m[k] = m[k].max(e[k]);
            }
        }
        m
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(*e, *c);
        }
        out
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(*e, -*c);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            out.add_term(*e, c * s);
        }
        out
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        self.mul_truncated(o, usize::MAX)
    }

    /// Product keeping only monomials of total degree `<= cap`.
    pub fn mul_truncated(&self, o: &Poly, cap: usize) -> Poly {
        let mut acc: HashMap<Exps, Complex64> = HashMap::with_capacity(self.len() * o.len());
        for (ea, ca) in &self.terms {
            let da: usize = ea.iter().map(|&x| x as usize).sum();
            for (eb, cb) in &o.terms {
                let db: usize = eb.iter().map(|&x| x as usize).sum();
                if da + db > cap {
                    continue;
                }
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                *acc.entry(e).or_insert(CZERO) += ca * cb;
            }
        }
        let mut out = Poly::zero();
        for (e, c) in acc {
            if c != CZERO {
                out.terms.insert(e, c);
            }
        }
        out
    }

    pub fn powi(&self, n: u32) -> Poly {
        let mut out = Poly::constant(Complex64::new(1.0, 0.0));
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Polynomial whose values are the conjugates of `self`'s values.
    pub fn conj(&self) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            out.add_term([e[2], e[3], e[0], e[1]], c.conj());
        }
        out
    }

    /// Formal Wirtinger partial derivative.
    pub fn derivative(&self, v: Var) -> Poly {
        let k = v.index();
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            if e[k] == 0 {
                continue;
            }
            let mut f = *e;
            f[k] -= 1;
            out.add_term(f, c * e[k] as f64);
        }
        out
    }

    /// Drops monomials of total degree above `cap`.
    pub fn truncate(&self, cap: usize) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().map(|&x| x as usize).sum::<usize>() <= cap)
                .map(|(e, c)| (*e, *c))
                .collect(),
        }
    }

    /// Removes coefficients with modulus at most `tol`.
    pub fn prune(&self, tol: f64) -> Poly {
        Poly { terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(e, c)| (*e, *c)).collect() }
    }

    pub fn eval(&self, p: &C2) -> Complex64 {
        let pw = Powers::new(p, self.max_exps());
        self.eval_with(&pw)
    }

    /// Evaluates using a precomputed power table that covers `max_exps`.
    pub fn eval_with(&self, pw: &Powers) -> Complex64 {
        let mut s = CZERO;
        for (e, c) in &self.terms {
            let mut t = *c;
            for k in 0..4 {
                if e[k] != 0 {
                    t *= pw.get(k, e[k]);
                }
            }
            s += t;
        }
        s
    }

    /// Substitutes each variable slot by a polynomial, truncating at `cap`.
    pub fn compose(&self, subst: &[Poly; 4], cap: usize) -> Poly {
        let mx = self.max_exps();
        let mut pows: [Vec<Poly>; 4] = Default::default();
        for k in 0..4 {
            pows[k].push(Poly::constant(Complex64::new(1.0, 0.0)));
            for j in 1..=mx[k] as usize {
                let next = pows[k][j - 1].mul_truncated(&subst[k], cap);
                pows[k].push(next);
            }
        }
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            let mut t = Poly::constant(*c);
            for k in 0..4 {
                if e[k] != 0 {
                    t = t.mul_truncated(&pows[k][e[k] as usize], cap);
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Expands a quotient-free expression.
    pub fn from_expr(e: &SymExpr) -> Result<Poly, SymError> {
        let mut memo = HashMap::new();
        Self::from_expr_memo(e, &mut memo)
    }

    fn from_expr_memo(e: &SymExpr, memo: &mut HashMap<SymExpr, Poly>) -> Result<Poly, SymError> {
        if let Some(p) = memo.get(e) {
            return Ok(p.clone());
        }
        let p = match e.node() {
            Node::Const(c) => Poly::constant(*c),
            Node::Var(v) => Poly::var(*v),
            Node::Add(ts) => {
                let mut acc = Poly::zero();
                for t in ts {
                    acc = acc.add(&Self::from_expr_memo(t, memo)?);
                }
                acc
            }
            Node::Mul(fs) => {
                let mut acc = Poly::constant(Complex64::new(1.0, 0.0));
                for f in fs {
                    acc = acc.mul(&Self::from_expr_memo(f, memo)?);
                }
                acc
            }
            Node::Div(..) => {
                return Err(SymError::Unsupported(format!("quotient node `{e}` in polynomial context")));
            }
            Node::Pow(b, n) => {
                if *n < 0 {
                    return Err(SymError::Unsupported(format!("negative power in `{e}`")));
                }
                Self::from_expr_memo(b, memo)?.powi(*n as u32)
            }
        };
        memo.insert(e.clone(), p.clone());
        Ok(p)
    }

    /// Sum-of-monomials expression with the same values.
    pub fn to_expr(&self) -> SymExpr {
        SymExpr::add_all(self.terms.iter().map(|(e, c)| {
            let mut fs = vec![SymExpr::constant(*c)];
            for k in 0..4 {
                if e[k] > 0 {
                    fs.push(SymExpr::var(Var::from_index(k)).powi(e[k] as i32));
                }
            }
            SymExpr::mul_all(fs)
        }).collect::<Vec<_>>())
    }

    /// Part that is homogeneous of total degree `k`.
    pub fn homogeneous(&self, k: usize) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().map(|&x| x as usize).sum::<usize>() == k)
                .map(|(e, c)| (*e, *c))
                .collect(),
        }
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

/// Affine holomorphic substitution `z = A·w + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineSubst {
    pub a: [[Complex64; 2]; 2],
    pub b: [Complex64; 2],
}

impl AffineSubst {
    pub fn identity() -> AffineSubst {
        let one = Complex64::new(1.0, 0.0);
        AffineSubst { a: [[one, CZERO], [CZERO, one]], b: [CZERO; 2] }
    }

    pub fn det(&self) -> Complex64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    pub fn apply(&self, w: &C2) -> C2 {
        C2::new(
            self.a[0][0] * w[0] + self.a[0][1] * w[1] + self.b[0],
            self.a[1][0] * w[0] + self.a[1][1] * w[1] + self.b[1],
        )
    }

    /// The four variable images as polynomials in `(w1, w2, conj w1, conj w2)`.
    pub fn as_polys(&self) -> [Poly; 4] {
        let mk = |row: usize| {
            let mut p = Poly::constant(self.b[row]);
            p.add_term([1, 0, 0, 0], self.a[row][0]);
            p.add_term([0, 1, 0, 0], self.a[row][1]);
            p
        };
        let z1 = mk(0);
        let z2 = mk(1);
        let zb1 = z1.conj();
        let zb2 = z2.conj();
        [z1, z2, zb1, zb2]
    }
}

/// Taylor expansion of a polynomial expression under `z = A·w + b`,
/// exact through total degree `degree_cap` in `(w, conj w)`.
pub fn taylor_in_chart(e: &SymExpr, subst: &AffineSubst, degree_cap: usize) -> Result<Poly, SymError> {
    if subst.det().norm() < 1e-300 {
        return Err(SymError::Unsupported("singular substitution".into()));
    }
    let p = Poly::from_expr(e)?;
    Ok(p.compose(&subst.as_polys(), degree_cap))
}

/// Polynomial in `(w2, conj w2)`; key `(j, l)` is the monomial `w2^j conj(w2)^l`.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolyInW {
    pub coeffs: Vec<((u8, u8), Complex64)>,
}

impl PolyInW {
    /// The `w1`-free part of `p` of exact total degree `k`.
    pub fn from_chart_poly(p: &Poly, k: usize) -> PolyInW {
        let mut coeffs = Vec::new();
        for (e, c) in p.terms() {
            if e[0] == 0 && e[2] == 0 && (e[1] as usize + e[3] as usize) == k {
                coeffs.push(((e[1], e[3]), *c));
            }
        }
        PolyInW { coeffs }
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        let wb = w.conj();
        self.coeffs.iter().map(|((j, l), c)| c * w.powi(*j as i32) * wb.powi(*l as i32)).sum()
    }

    /// Value at `e^{iθ}` (homogeneous case reduces to a trigonometric sum).
    pub fn eval_circle(&self, theta: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|((j, l), c)| c * Complex64::from_polar(1.0, (*j as f64 - *l as f64) * theta))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|(_, c)| *c == CZERO)
    }

    /// Largest modulus among pure (`w2^j` or `conj(w2)^j`) coefficients.
    pub fn max_pure_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .filter(|((j, l), _)| *j == 0 || *l == 0)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|a_{jl} − conj(a_{lj})|`, zero for real-valued polynomials.
    pub fn reality_defect(&self) -> f64 {
        let map: BTreeMap<(u8, u8), Complex64> = self.coeffs.iter().copied().collect();
        let mut worst = 0.0f64;
        for ((j, l), c) in &map {
            let other = map.get(&(*l, *j)).copied().unwrap_or(CZERO);
            worst = worst.max((c - other.conj()).norm());
        }
        worst
    }

    /// `max_θ |P(e^{iθ})|`: 1024-point grid, then golden-section refinement
    /// around the best few grid cells.
    pub fn sup_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        const GRID: usize = 1024;
        let h = std::f64::consts::TAU / GRID as f64;
        let f = |t: f64| self.eval_circle(t).norm();
        let vals: Vec<f64> = (0..GRID).map(|i| f(i as f64 * h)).collect();
        let mut best = vals.iter().cloned().fold(0.0, f64::max);
        // local maxima of the grid
        for i in 0..GRID {
            let prev = vals[(i + GRID - 1) % GRID];
            let next = vals[(i + 1) % GRID];
            if vals[i] >= prev && vals[i] >= next && vals[i] >= 0.5 * best {
                best = best.max(golden_max(&f, (i as f64 - 1.0) * h, (i as f64 + 1.0) * h));
            }
        }
        best
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-13 {
            break;
        }
    }
    fc.max(fd).max(f(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::parse_expr;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn expansion_matches_evaluation() {
        let e = parse_expr("z1*conj(z1) + 0.1*(z2^2+conj(z2)^2)*z2*conj(z2) + (z2*conj(z2))^2 - 1").unwrap();
        let p = Poly::from_expr(&e).unwrap();
        let pt = C2::new(c(0.3, -0.4), c(0.7, 0.2));
        assert!((p.eval(&pt) - e.eval(&pt).unwrap()).norm() < 1e-14);
        assert!((p.to_expr().eval(&pt).unwrap() - e.eval(&pt).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn derivative_agrees_with_tree() {
        let e = parse_expr("(z1*conj(z2) + i*z2^3)*conj(z1)^2").unwrap();
        let p = Poly::from_expr(&e).unwrap();
        let pt = C2::new(c(0.3, -0.4), c(0.7, 0.2));
        for v in Var::ALL {
            let a = p.derivative(v).eval(&pt);
            let b = e.wirtinger(v).eval(&pt).unwrap();
            assert!((a - b).norm() < 1e-13, "{v:?}");
        }
    }

    #[test]
    fn quotients_are_rejected() {
        let e = parse_expr("1/z1").unwrap();
        assert!(matches!(Poly::from_expr(&e), Err(SymError::Unsupported(_))));
    }

    #[test]
    fn ball_expansion_at_north_pole() {
        // z1 = -w2, z2 = 1 + w1/2 gives r = Re w1 + |w1|^2/4 + |w2|^2
        let e = parse_expr("z1*conj(z1)+z2*conj(z2)-1").unwrap();
        let s = AffineSubst { a: [[CZERO, c(-1.0, 0.0)], [c(0.5, 0.0), CZERO]], b: [CZERO, c(1.0, 0.0)] };
        let t = taylor_in_chart(&e, &s, 4).unwrap();
        assert!((t.coeff([1, 0, 0, 0]) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((t.coeff([0, 0, 1, 0]) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((t.coeff([0, 1, 0, 1]) - c(1.0, 0.0)).norm() < 1e-15);
        assert!(t.coeff([0, 2, 0, 0]).norm() < 1e-15);
    }

    #[test]
    fn identity_substitution_returns_own_monomials() {
        let e = parse_expr("z1*conj(z1)+(z2*conj(z2))^2-1").unwrap();
        let t = taylor_in_chart(&e, &AffineSubst::identity(), 8).unwrap();
        assert_eq!(t, Poly::from_expr(&e).unwrap());
    }

    #[test]
    fn sup_norms() {
        let abs2 = PolyInW { coeffs: vec![((1, 1), c(1.0, 0.0))] };
        assert!((abs2.sup_norm() - 1.0).abs() < 1e-12);
        // 2 Re(w^2 conj w) = w^2 conj(w) + w conj(w)^2
        let p = PolyInW { coeffs: vec![((2, 1), c(1.0, 0.0)), ((1, 2), c(1.0, 0.0))] };
        assert!((p.sup_norm() - 2.0).abs() < 1e-9);
        assert_eq!(PolyInW::default().sup_norm(), 0.0);
    }

    #[test]
    fn sup_norm_off_grid_maximum() {
        // |w|^4 + a Re(e^{-iφ} w^3 conj w) peaks at θ = φ/2, which is off-grid
        let phi = 0.123_456_789_f64;
        let a = 0.3;
        let h = c(0.5 * a, 0.0) * Complex64::from_polar(1.0, -phi);
        let p = PolyInW { coeffs: vec![((2, 2), c(1.0, 0.0)), ((3, 1), h), ((1, 3), h.conj())] };
        assert!((p.sup_norm() - (1.0 + a)).abs() < 1e-9 * (1.0 + a));
    }
}
