//! Points and vectors of C².

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A point (or tangent vector) of C².
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct C2(pub [Complex64; 2]);

impl C2 {
    pub const ZERO: C2 = C2([Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]);

    pub fn new(z1: Complex64, z2: Complex64) -> Self {
        C2([z1, z2])
    }

    /// Builds a point from its real coordinates `(x1, y1, x2, y2)`.
    pub fn from_real(r: [f64; 4]) -> Self {
        C2([Complex64::new(r[0], r[1]), Complex64::new(r[2], r[3])])
    }

    pub fn to_real(self) -> [f64; 4] {
        [self.0[0].re, self.0[0].im, self.0[1].re, self.0[1].im]
    }

    pub fn norm_sqr(self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Hermitian product `⟨a, b⟩ = a₁·conj(b₁) + a₂·conj(b₂)`.
    pub fn hdot(self, other: C2) -> Complex64 {
        self.0[0] * other.0[0].conj() + self.0[1] * other.0[1].conj()
    }

    /// Bilinear pairing `a₁b₁ + a₂b₂` (no conjugation).
    pub fn pair(self, other: C2) -> Complex64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }

    pub fn conj(self) -> C2 {
        C2([self.0[0].conj(), self.0[1].conj()])
    }

    pub fn scale(self, s: Complex64) -> C2 {
        C2([self.0[0] * s, self.0[1] * s])
    }

    pub fn dist(self, other: C2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.to_real().iter().all(|v| v.is_finite())
    }

    /// Bit pattern used as an exact cache key.
    pub fn key(self) -> [u64; 4] {
        let r = self.to_real();
        [r[0].to_bits(), r[1].to_bits(), r[2].to_bits(), r[3].to_bits()]
    }

    /// Total lexicographic order on the real coordinates.
    pub fn lex_cmp(&self, other: &C2) -> std::cmp::Ordering {
        let a = self.to_real();
        let b = other.to_real();
        for k in 0..4 {
            let o = a[k].total_cmp(&b[k]);
            if o != std::cmp::Ordering::Equal {
                return o;
            }
        }
        std::cmp::Ordering::Equal
    }
}

impl Index<usize> for C2 {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for C2 {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl Add for C2 {
    type Output = C2;
    fn add(self, o: C2) -> C2 {
        C2([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl AddAssign for C2 {
    fn add_assign(&mut self, o: C2) {
        self.0[0] += o.0[0];
        self.0[1] += o.0[1];
    }
}

impl Sub for C2 {
    type Output = C2;
    fn sub(self, o: C2) -> C2 {
        C2([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl Neg for C2 {
    type Output = C2;
    fn neg(self) -> C2 {
        C2([-self.0[0], -self.0[1]])
    }
}

impl Mul<f64> for C2 {
    type Output = C2;
    fn mul(self, s: f64) -> C2 {
        C2([self.0[0] * s, self.0[1] * s])
    }
}

impl Mul<C2> for f64 {
    type Output = C2;
    fn mul(self, v: C2) -> C2 {
        v * self
    }
}

impl fmt::Display for C2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.to_real();
        write!(f, "{},{},{},{}", r[0], r[1], r[2], r[3])
    }
}

impl std::str::FromStr for C2 {
    type Err = String;

    /// Parses `x1r,x1i,x2r,x2i`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected 4 comma-separated reals, got {}", parts.len()));
        }
        let mut r = [0.0; 4];
        for (slot, p) in r.iter_mut().zip(&parts) {
            *slot = p.parse::<f64>().map_err(|e| format!("bad coordinate {p:?}: {e}"))?;
        }
        Ok(C2::from_real(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_convention_conjugates_second_argument() {
        let i = Complex64::new(0.0, 1.0);
        let a = C2::new(i, Complex64::new(1.0, 0.0));
        let b = C2::new(i, Complex64::new(0.0, 0.0));
        // i * conj(i) = 1
        assert_eq!(a.hdot(b), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn parse_round_trip() {
        let p: C2 = "0.5,-0.25,1e-3,0".parse().unwrap();
        assert_eq!(p.to_real(), [0.5, -0.25, 1e-3, 0.0]);
        assert_eq!(p.to_string().parse::<C2>().unwrap(), p);
        assert!("1,2,3".parse::<C2>().is_err());
    }
}
