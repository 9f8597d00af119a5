use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use super::SymError;
use crate::point::C2;

/// Denominators with modulus below this are reported as division by zero.
pub const DIVISION_EPS: f64 = 1e-14;

/// The four independent variables of the Wirtinger calculus on C².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Z1,
    Z2,
    Zbar1,
    Zbar2,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::Z1, Var::Z2, Var::Zbar1, Var::Zbar2];

    /// Position in the `(z1, z2, zbar1, zbar2)` ordering.
    pub fn index(self) -> usize {
        match self {
            Var::Z1 => 0,
            Var::Z2 => 1,
            Var::Zbar1 => 2,
            Var::Zbar2 => 3,
        }
    }

    pub fn from_index(i: usize) -> Var {
        Var::ALL[i]
    }

    /// `z_k` for `k ∈ {0, 1}`.
    pub fn holomorphic(k: usize) -> Var {
        Var::ALL[k]
    }

    /// `conj(z_k)` for `k ∈ {0, 1}`.
    pub fn antiholomorphic(k: usize) -> Var {
        Var::ALL[k + 2]
    }

    pub fn conj(self) -> Var {
        Var::ALL[(self.index() + 2) % 4]
    }

    pub fn value(self, p: &C2) -> Complex64 {
        match self {
            Var::Z1 => p.0[0],
            Var::Z2 => p.0[1],
            Var::Zbar1 => p.0[0].conj(),
            Var::Zbar2 => p.0[1].conj(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::Z1 => "z1",
            Var::Z2 => "z2",
            Var::Zbar1 => "zbar1",
            Var::Zbar2 => "zbar2",
        }
    }
}

impl std::str::FromStr for Var {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "z1" => Ok(Var::Z1),
            "z2" => Ok(Var::Z2),
            "zbar1" | "conj(z1)" => Ok(Var::Zbar1),
            "zbar2" | "conj(z2)" => Ok(Var::Zbar2),
            other => Err(format!("unknown variable {other:?}")),
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Const(Complex64),
    Var(Var),
    Add(Vec<SymExpr>),
    Mul(Vec<SymExpr>),
    Div(SymExpr, SymExpr),
    Pow(SymExpr, i32),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    hash: u64,
    size: usize,
}

/// Immutable rational expression in `z1, z2, conj(z1), conj(z2)`.
///
/// Cloning is cheap (reference counted). Equality and hashing are
/// structural, so expressions can key caches and be deduplicated.
#[derive(Clone)]
pub struct SymExpr(Arc<Inner>);

fn mix(h: u64, v: u64) -> u64 {
    // splitmix64 finaliser over the running state
    let mut z = h ^ v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn canonical_bits(x: f64) -> u64 {
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

impl SymExpr {
    fn from_node(node: Node) -> SymExpr {
        let (hash, size) = match &node {
            Node::Const(c) => (mix(mix(1, canonical_bits(c.re)), canonical_bits(c.im)), 1),
            Node::Var(v) => (mix(2, v.index() as u64), 1),
            Node::Add(ts) => ts
                .iter()
                .fold((3, 1), |(h, s), t| (mix(h, t.0.hash), s + t.0.size)),
            Node::Mul(fs) => fs
                .iter()
                .fold((4, 1), |(h, s), t| (mix(h, t.0.hash), s + t.0.size)),
            Node::Div(a, b) => (mix(mix(5, a.0.hash), b.0.hash), 1 + a.0.size + b.0.size),
            Node::Pow(a, n) => (mix(mix(6, a.0.hash), *n as u64), 1 + a.0.size),
        };
        SymExpr(Arc::new(Inner { node, hash, size }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Number of nodes of the tree (shared subtrees counted repeatedly).
    pub fn size(&self) -> usize {
        self.0.size
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn ptr_eq(&self, other: &SymExpr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn constant(c: Complex64) -> SymExpr {
        SymExpr::from_node(Node::Const(c))
    }

    pub fn real(x: f64) -> SymExpr {
        SymExpr::constant(Complex64::new(x, 0.0))
    }

    pub fn zero() -> SymExpr {
        SymExpr::real(0.0)
    }

    pub fn one() -> SymExpr {
        SymExpr::real(1.0)
    }

    pub fn imag_unit() -> SymExpr {
        SymExpr::constant(Complex64::new(0.0, 1.0))
    }

    pub fn var(v: Var) -> SymExpr {
        SymExpr::from_node(Node::Var(v))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(Complex64::new(0.0, 0.0))
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(Complex64::new(1.0, 0.0))
    }

    /// Sum with constant folding, flattening and zero elimination.
    pub fn add_all(terms: impl IntoIterator<Item = SymExpr>) -> SymExpr {
        let mut konst = Complex64::new(0.0, 0.0);
        let mut rest = Vec::new();
        for t in terms {
            match t.node() {
                Node::Const(c) => konst += c,
                Node::Add(inner) => {
                    for u in inner {
                        match u.node() {
                            Node::Const(c) => konst += c,
                            _ => rest.push(u.clone()),
                        }
                    }
                }
                _ => rest.push(t),
            }
        }
        if konst != Complex64::new(0.0, 0.0) {
            rest.insert(0, SymExpr::constant(konst));
        }
        match rest.len() {
            0 => SymExpr::zero(),
            1 => rest.pop().unwrap(),
            _ => SymExpr::from_node(Node::Add(rest)),
        }
    }

    /// Product with constant folding, flattening, one/zero elimination and
    /// merging of repeated bases into integer powers.
    pub fn mul_all(factors: impl IntoIterator<Item = SymExpr>) -> SymExpr {
        let mut konst = Complex64::new(1.0, 0.0);
        let mut bases: Vec<(SymExpr, i32)> = Vec::new();
        let push = |base: SymExpr, n: i32, bases: &mut Vec<(SymExpr, i32)>| {
            if let Some(slot) = bases.iter_mut().find(|(b, _)| *b == base) {
                slot.1 += n;
            } else {
                bases.push((base, n));
            }
        };
        let mut stack: Vec<SymExpr> = factors.into_iter().collect();
        stack.reverse();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Const(c) => konst *= c,
                Node::Mul(inner) => {
                    for u in inner.iter().rev() {
                        stack.push(u.clone());
                    }
                }
                Node::Pow(b, n) => push(b.clone(), *n, &mut bases),
                _ => push(f.clone(), 1, &mut bases),
            }
        }
        if konst == Complex64::new(0.0, 0.0) {
            return SymExpr::zero();
        }
        let mut rest: Vec<SymExpr> = bases
            .into_iter()
            .filter(|(_, n)| *n != 0)
            .map(|(b, n)| SymExpr::pow_raw(b, n))
            .collect();
        if konst != Complex64::new(1.0, 0.0) {
            rest.insert(0, SymExpr::constant(konst));
        }
        match rest.len() {
            0 => SymExpr::constant(konst),
            1 => rest.pop().unwrap(),
            _ => SymExpr::from_node(Node::Mul(rest)),
        }
    }

    fn pow_raw(base: SymExpr, n: i32) -> SymExpr {
        match n {
            0 => SymExpr::one(),
            1 => base,
            _ => SymExpr::from_node(Node::Pow(base, n)),
        }
    }

    /// Integer power with folding of constants and nested powers.
    pub fn powi(&self, n: i32) -> SymExpr {
        if n == 0 {
            return SymExpr::one();
        }
        if n == 1 {
            return self.clone();
        }
        match self.node() {
            Node::Const(c) if n > 0 || c.norm() > DIVISION_EPS => SymExpr::constant(c.powi(n)),
            Node::Pow(b, k) => b.powi(k * n),
            _ => SymExpr::from_node(Node::Pow(self.clone(), n)),
        }
    }

    /// Quotient; constant denominators are folded into a product.
    pub fn div(&self, den: &SymExpr) -> SymExpr {
        if self.is_zero() {
            return SymExpr::zero();
        }
        if den.is_one() {
            return self.clone();
        }
        if let Some(c) = den.as_const() {
            if c.norm() > DIVISION_EPS {
                return SymExpr::mul_all([SymExpr::constant(c.inv()), self.clone()]);
            }
        }
        SymExpr::from_node(Node::Div(self.clone(), den.clone()))
    }

    pub fn scale(&self, c: Complex64) -> SymExpr {
        SymExpr::mul_all([SymExpr::constant(c), self.clone()])
    }

    /// The expression whose value is the complex conjugate of `self`
    /// everywhere: constants are conjugated and `z_k ↔ conj(z_k)`.
    pub fn conj(&self) -> SymExpr {
        let mut memo = HashMap::new();
        self.conj_memo(&mut memo)
    }

    fn conj_memo(&self, memo: &mut HashMap<SymExpr, SymExpr>) -> SymExpr {
        if let Some(v) = memo.get(self) {
            return v.clone();
        }
        let out = match self.node() {
            Node::Const(c) => SymExpr::constant(c.conj()),
            Node::Var(v) => SymExpr::var(v.conj()),
            Node::Add(ts) => SymExpr::add_all(ts.iter().map(|t| t.conj_memo(memo)).collect::<Vec<_>>()),
            Node::Mul(fs) => SymExpr::mul_all(fs.iter().map(|t| t.conj_memo(memo)).collect::<Vec<_>>()),
            Node::Div(a, b) => a.conj_memo(memo).div(&b.conj_memo(memo)),
            Node::Pow(a, n) => a.conj_memo(memo).powi(*n),
        };
        memo.insert(self.clone(), out.clone());
        out
    }

    /// True when no quotient or negative power occurs.
    pub fn is_polynomial(&self) -> bool {
        match self.node() {
            Node::Const(_) | Node::Var(_) => true,
            Node::Add(ts) | Node::Mul(ts) => ts.iter().all(SymExpr::is_polynomial),
            Node::Div(..) => false,
            Node::Pow(a, n) => *n >= 0 && a.is_polynomial(),
        }
    }

    /// Formal Wirtinger partial derivative (uncached).
    pub fn wirtinger(&self, var: Var) -> SymExpr {
        DerivCache::new().wirtinger(self, var)
    }

    /// Evaluates at `p`, flagging quotients whose denominator is near zero.
    pub fn eval(&self, p: &C2) -> Result<Complex64, SymError> {
        Ok(match self.node() {
            Node::Const(c) => *c,
            Node::Var(v) => v.value(p),
            Node::Add(ts) => {
                let mut s = Complex64::new(0.0, 0.0);
                for t in ts {
                    s += t.eval(p)?;
                }
                s
            }
            Node::Mul(fs) => {
                let mut s = Complex64::new(1.0, 0.0);
                for f in fs {
                    s *= f.eval(p)?;
                }
                s
            }
            Node::Div(a, b) => {
                let den = b.eval(p)?;
                if den.norm() < DIVISION_EPS {
                    return Err(SymError::DivisionByZero {
                        subexpr: b.to_string(),
                        modulus: den.norm(),
                    });
                }
                a.eval(p)? / den
            }
            Node::Pow(a, n) => {
                let base = a.eval(p)?;
                if *n < 0 && base.norm() < DIVISION_EPS {
                    return Err(SymError::DivisionByZero {
                        subexpr: a.to_string(),
                        modulus: base.norm(),
                    });
                }
                base.powi(*n)
            }
        })
    }
}

impl PartialEq for SymExpr {
    fn eq(&self, other: &SymExpr) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.0.hash != other.0.hash || self.0.size != other.0.size {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => {
                canonical_bits(a.re) == canonical_bits(b.re) && canonical_bits(a.im) == canonical_bits(b.im)
            }
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Add(a), Node::Add(b)) | (Node::Mul(a), Node::Mul(b)) => a == b,
            (Node::Div(a1, b1), Node::Div(a2, b2)) => a1 == a2 && b1 == b2,
            (Node::Pow(a1, n1), Node::Pow(a2, n2)) => n1 == n2 && a1 == a2,
            _ => false,
        }
    }
}

impl Eq for SymExpr {}

impl Hash for SymExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymExpr({self})")
    }
}

fn fmt_const(c: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        if c.re < 0.0 {
            write!(f, "({})", c.re)
        } else {
            write!(f, "{}", c.re)
        }
    } else if c.re == 0.0 {
        write!(f, "({}*i)", c.im)
    } else {
        write!(f, "({}+({})*i)", c.re, c.im)
    }
}

impl fmt::Display for SymExpr {
    /// Prints in the input grammar, so `parse_expr(e.to_string())`
    /// evaluates identically to `e`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => fmt_const(*c, f),
            Node::Var(v) => match v {
                Var::Z1 => write!(f, "z1"),
                Var::Z2 => write!(f, "z2"),
                Var::Zbar1 => write!(f, "conj(z1)"),
                Var::Zbar2 => write!(f, "conj(z2)"),
            },
            Node::Add(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Node::Mul(fs) => {
                for (i, t) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
            Node::Div(a, b) => write!(f, "({a})/({b})"),
            Node::Pow(a, n) => {
                if *n < 0 {
                    write!(f, "({a})^({n})")
                } else {
                    write!(f, "({a})^{n}")
                }
            }
        }
    }
}

impl ops::Add for SymExpr {
    type Output = SymExpr;
    fn add(self, o: SymExpr) -> SymExpr {
        SymExpr::add_all([self, o])
    }
}

impl ops::Add for &SymExpr {
    type Output = SymExpr;
    fn add(self, o: &SymExpr) -> SymExpr {
        SymExpr::add_all([self.clone(), o.clone()])
    }
}

impl ops::Sub for SymExpr {
    type Output = SymExpr;
    fn sub(self, o: SymExpr) -> SymExpr {
        SymExpr::add_all([self, -o])
    }
}

impl ops::Sub for &SymExpr {
    type Output = SymExpr;
    fn sub(self, o: &SymExpr) -> SymExpr {
        SymExpr::add_all([self.clone(), -o.clone()])
    }
}

impl ops::Mul for SymExpr {
    type Output = SymExpr;
    fn mul(self, o: SymExpr) -> SymExpr {
        SymExpr::mul_all([self, o])
    }
}

impl ops::Mul for &SymExpr {
    type Output = SymExpr;
    fn mul(self, o: &SymExpr) -> SymExpr {
        SymExpr::mul_all([self.clone(), o.clone()])
    }
}

impl ops::Div for SymExpr {
    type Output = SymExpr;
    fn div(self, o: SymExpr) -> SymExpr {
        SymExpr::div(&self, &o)
    }
}

impl ops::Div for &SymExpr {
    type Output = SymExpr;
    fn div(self, o: &SymExpr) -> SymExpr {
        SymExpr::div(self, o)
    }
}

impl ops::Neg for SymExpr {
    type Output = SymExpr;
    fn neg(self) -> SymExpr {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl ops::Neg for &SymExpr {
    type Output = SymExpr;
    fn neg(self) -> SymExpr {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Memoises Wirtinger derivatives per `(expression, variable)`.
///
/// Iterated vector-field derivatives revisit the same subtrees many times;
/// the cache keeps their cost linear in the number of distinct subtrees.
#[derive(Default)]
pub struct DerivCache {
    map: Mutex<HashMap<(SymExpr, Var), SymExpr>>,
}

impl DerivCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn wirtinger(&self, e: &SymExpr, var: Var) -> SymExpr {
        if let Some(d) = self.map.lock().unwrap().get(&(e.clone(), var)) {
            return d.clone();
        }
        let d = match e.node() {
            Node::Const(_) => SymExpr::zero(),
            Node::Var(v) => {
                if *v == var {
                    SymExpr::one()
                } else {
                    SymExpr::zero()
                }
            }
            Node::Add(ts) => SymExpr::add_all(ts.iter().map(|t| self.wirtinger(t, var)).collect::<Vec<_>>()),
            Node::Mul(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for i in 0..fs.len() {
                    let di = self.wirtinger(&fs[i], var);
                    if di.is_zero() {
                        continue;
                    }
                    let mut prod: Vec<SymExpr> = Vec::with_capacity(fs.len());
                    for (j, fj) in fs.iter().enumerate() {
                        prod.push(if i == j { di.clone() } else { fj.clone() });
                    }
                    terms.push(SymExpr::mul_all(prod));
                }
                SymExpr::add_all(terms)
            }
            Node::Div(a, b) => {
                let da = self.wirtinger(a, var);
                let db = self.wirtinger(b, var);
                if db.is_zero() {
                    da.div(b)
                } else {
                    let num = &(&da * b) - &(a * &db);
                    num.div(&b.powi(2))
                }
            }
            Node::Pow(a, n) => {
                let da = self.wirtinger(a, var);
                if da.is_zero() {
                    SymExpr::zero()
                } else {
                    SymExpr::mul_all([SymExpr::real(*n as f64), a.powi(n - 1), da])
                }
            }
        };
        self.map.lock().unwrap().insert((e.clone(), var), d.clone());
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(k: usize) -> SymExpr {
        SymExpr::var(Var::holomorphic(k))
    }
    fn zb(k: usize) -> SymExpr {
        SymExpr::var(Var::antiholomorphic(k))
    }

    #[test]
    fn simplification_folds_constants_and_merges_powers() {
        let e = SymExpr::mul_all([z(0), SymExpr::real(2.0), z(0), SymExpr::real(0.5)]);
        assert_eq!(e, z(0).powi(2));
        assert!(SymExpr::mul_all([z(0), SymExpr::zero()]).is_zero());
        assert_eq!(SymExpr::add_all([z(1), SymExpr::zero()]), z(1));
        assert_eq!(z(0).powi(2).powi(3), z(0).powi(6));
    }

    #[test]
    fn wirtinger_treats_conjugates_as_independent() {
        let e = &z(0) * &zb(0);
        assert_eq!(e.wirtinger(Var::Z1), zb(0));
        assert_eq!(e.wirtinger(Var::Zbar1), z(0));
        assert!(e.wirtinger(Var::Z2).is_zero());
    }

    #[test]
    fn chain_rule_on_square() {
        // d/dzbar2 (z2 conj z2)^2 = 2 (z2 conj z2) z2
        let e = (&z(1) * &zb(1)).powi(2);
        let d = e.wirtinger(Var::Zbar2);
        let expected = SymExpr::mul_all([SymExpr::real(2.0), &z(1) * &zb(1), z(1)]);
        let p = C2::new(Complex64::new(0.3, -0.7), Complex64::new(0.2, 0.9));
        let (a, b) = (d.eval(&p).unwrap(), expected.eval(&p).unwrap());
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn quotient_rule() {
        let e = z(0).div(&z(1));
        let d = e.wirtinger(Var::Z2);
        let p = C2::new(Complex64::new(0.4, 0.1), Complex64::new(-0.5, 0.3));
        let expected = -p.0[0] / (p.0[1] * p.0[1]);
        assert!((d.eval(&p).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn conj_evaluates_to_conjugate() {
        let i = SymExpr::imag_unit();
        let e = &(&i * &z(0)) + &z(1).powi(3).div(&(&zb(0) + &SymExpr::real(2.0)));
        let p = C2::new(Complex64::new(0.4, 0.1), Complex64::new(-0.5, 0.3));
        let a = e.conj().eval(&p).unwrap();
        let b = e.eval(&p).unwrap().conj();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn near_zero_denominator_is_flagged() {
        let e = SymExpr::one().div(&z(0));
        let err = e.eval(&C2::ZERO).unwrap_err();
        match err {
            SymError::DivisionByZero { subexpr, .. } => assert_eq!(subexpr, "z1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cache_reuses_entries() {
        let cache = DerivCache::new();
        let e = (&z(0) * &zb(1)).powi(3);
        let a = cache.wirtinger(&e, Var::Z1);
        let n = cache.len();
        let b = cache.wirtinger(&e, Var::Z1);
        assert!(a.ptr_eq(&b));
        assert_eq!(cache.len(), n);
    }
}
