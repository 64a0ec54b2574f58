//! Arithmetic over Z_d and X-type Pauli operators stored as exponent vectors.
//!
//! Phases are never tracked. An X-type operator `⊗ X^{b_i}` is fully described
//! by its exponents `b_i`, and composition is component-wise addition mod d.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// The qudit dimension `d`, i.e. the modulus of the charge group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Zd(u8);

impl Zd {
    pub fn new(d: u32) -> Result<Self> {
        if (2..=255).contains(&d) {
            Ok(Zd(d as u8))
        } else {
            Err(Error::InvalidModulus(d))
        }
    }

    #[inline]
    pub fn get(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn as_usize(self) -> usize {
        self.0 as usize
    }

    /// Reduces an arbitrary signed integer into `[0, d)`.
    #[inline]
    pub fn reduce(self, v: i64) -> u8 {
        v.rem_euclid(self.0 as i64) as u8
    }

    #[inline]
    pub fn add(self, a: u8, b: u8) -> u8 {
        let s = a as u16 + b as u16;
        let d = self.0 as u16;
        (if s >= d { s - d } else { s }) as u8
    }

    #[inline]
    pub fn neg(self, a: u8) -> u8 {
        if a == 0 {
            0
        } else {
            self.0 - a
        }
    }

    #[inline]
    pub fn sub(self, a: u8, b: u8) -> u8 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(self, a: u8, b: u8) -> u8 {
        ((a as u32 * b as u32) % self.0 as u32) as u8
    }

    /// Multiplicative inverse, when `a` is a unit mod d.
    pub fn inverse(self, a: u8) -> Option<u8> {
        (1..self.0).find(|&x| self.mul(a, x) == 1)
    }

    pub fn charge(self, v: i64) -> ZdCharge {
        ZdCharge {
            value: self.reduce(v),
            modulus: self,
        }
    }

    pub fn zero(self) -> ZdCharge {
        self.charge(0)
    }
}

impl fmt::Display for Zd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z_{}", self.0)
    }
}

/// An element of Z_d. The value is always kept in `[0, d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ZdCharge {
    value: u8,
    modulus: Zd,
}

impl ZdCharge {
    pub fn new(value: i64, modulus: Zd) -> Self {
        modulus.charge(value)
    }

    #[inline]
    pub fn value(self) -> u8 {
        self.value
    }

    #[inline]
    pub fn modulus(self) -> Zd {
        self.modulus
    }
}

impl Add for ZdCharge {
    type Output = ZdCharge;
    fn add(self, rhs: ZdCharge) -> ZdCharge {
        assert_eq!(self.modulus, rhs.modulus, "mixed moduli");
        ZdCharge {
            value: self.modulus.add(self.value, rhs.value),
            modulus: self.modulus,
        }
    }
}

impl Sub for ZdCharge {
    type Output = ZdCharge;
    fn sub(self, rhs: ZdCharge) -> ZdCharge {
        self + (-rhs)
    }
}

impl Neg for ZdCharge {
    type Output = ZdCharge;
    fn neg(self) -> ZdCharge {
        ZdCharge {
            value: self.modulus.neg(self.value),
            modulus: self.modulus,
        }
    }
}

impl Mul for ZdCharge {
    type Output = ZdCharge;
    fn mul(self, rhs: ZdCharge) -> ZdCharge {
        assert_eq!(self.modulus, rhs.modulus, "mixed moduli");
        ZdCharge {
            value: self.modulus.mul(self.value, rhs.value),
            modulus: self.modulus,
        }
    }
}

impl fmt::Display for ZdCharge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// An X-type Pauli operator `⊗_i X^{b_i}` as its exponent vector over Z_d.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct XOperator {
    modulus: Zd,
    exponents: Vec<u8>,
}

impl XOperator {
    pub fn identity(modulus: Zd, len: usize) -> Self {
        XOperator {
            modulus,
            exponents: vec![0; len],
        }
    }

    /// Builds an operator from signed exponents, reducing each into `[0, d)`.
    pub fn from_signed(modulus: Zd, exponents: &[i64]) -> Self {
        XOperator {
            modulus,
            exponents: exponents.iter().map(|&e| modulus.reduce(e)).collect(),
        }
    }

    pub fn from_exponents(modulus: Zd, exponents: Vec<u8>) -> Self {
        let d = modulus.get();
        let exponents = exponents.into_iter().map(|e| e % d).collect();
        XOperator { modulus, exponents }
    }

    #[inline]
    pub fn modulus(&self) -> Zd {
        self.modulus
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    #[inline]
    pub fn exponents(&self) -> &[u8] {
        &self.exponents
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.exponents[i]
    }

    pub fn charge(&self, i: usize) -> ZdCharge {
        self.modulus.charge(self.exponents[i] as i64)
    }

    pub fn is_identity(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// Multiplies qudit `i` by `X^k` in place.
    #[inline]
    pub fn apply(&mut self, i: usize, k: u8) {
        self.exponents[i] = self.modulus.add(self.exponents[i], k);
    }

    pub fn compose(&self, other: &XOperator) -> Result<XOperator> {
        self.check_compatible(other)?;
        let m = self.modulus;
        let exponents = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .map(|(&a, &b)| m.add(a, b))
            .collect();
        Ok(XOperator {
            modulus: m,
            exponents,
        })
    }

    pub fn compose_in_place(&mut self, other: &XOperator) -> Result<()> {
        self.check_compatible(other)?;
        let m = self.modulus;
        for (a, &b) in self.exponents.iter_mut().zip(&other.exponents) {
            *a = m.add(*a, b);
        }
        Ok(())
    }

    pub fn inverse(&self) -> XOperator {
        let m = self.modulus;
        XOperator {
            modulus: m,
            exponents: self.exponents.iter().map(|&a| m.neg(a)).collect(),
        }
    }

    pub fn pow(&self, k: u8) -> XOperator {
        let m = self.modulus;
        XOperator {
            modulus: m,
            exponents: self.exponents.iter().map(|&a| m.mul(a, k)).collect(),
        }
    }

    fn check_compatible(&self, other: &XOperator) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch {
                left: self.modulus.get(),
                right: other.modulus.get(),
            });
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

/// Exponent of ω picked up when commuting `⊗ Z^{a_i}` past `⊗ X^{b_i}`,
/// i.e. `Σ a_i b_i mod d`.
pub fn commutation_exponent(modulus: Zd, x_powers: &[u8], z_powers: &[u8]) -> Result<ZdCharge> {
    if x_powers.len() != z_powers.len() {
        return Err(Error::LengthMismatch {
            expected: x_powers.len(),
            found: z_powers.len(),
        });
    }
    let d = modulus.get() as u64;
    let total = x_powers
        .iter()
        .zip(z_powers)
        .map(|(&b, &a)| a as u64 * b as u64)
        .sum::<u64>();
    Ok(modulus.charge((total % d) as i64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(d: u32) -> Zd {
        Zd::new(d).unwrap()
    }

    #[test]
    fn compose_examples() {
        let d3 = z(3);
        let a = XOperator::from_exponents(d3, vec![1, 2]);
        let b = XOperator::from_exponents(d3, vec![2, 2]);
        assert_eq!(a.compose(&b).unwrap().exponents(), &[0, 1]);

        let zero = XOperator::identity(d3, 2);
        assert_eq!(a.compose(&zero).unwrap(), a);
        assert!(a.compose(&a.inverse()).unwrap().is_identity());
    }

    #[test]
    fn compose_length_mismatch() {
        let d3 = z(3);
        let a = XOperator::identity(d3, 2);
        let b = XOperator::identity(d3, 3);
        assert!(matches!(a.compose(&b), Err(Error::LengthMismatch { .. })));
        let c = XOperator::identity(z(5), 2);
        assert!(matches!(a.compose(&c), Err(Error::ModulusMismatch { .. })));
    }

    #[test]
    fn commutation_examples() {
        assert_eq!(commutation_exponent(z(3), &[1], &[1]).unwrap().value(), 1);
        assert_eq!(commutation_exponent(z(5), &[3], &[2]).unwrap().value(), 1);
        assert_eq!(
            commutation_exponent(z(4), &[0, 0], &[3, 1])
                .unwrap()
                .value(),
            0
        );
        assert!(commutation_exponent(z(4), &[0], &[3, 1]).is_err());
    }

    #[test]
    fn modulus_bounds() {
        assert!(Zd::new(1).is_err());
        assert!(Zd::new(256).is_err());
        assert_eq!(z(6).inverse(5), Some(5));
        assert_eq!(z(6).inverse(2), None);
    }

    /// Exhaustive group axioms on Z_d^2 for small d.
    #[test]
    fn group_axioms_exhaustive() {
        for d in 2..=4u32 {
            let m = z(d);
            let elems: Vec<XOperator> = (0..d * d)
                .map(|k| XOperator::from_exponents(m, vec![(k % d) as u8, (k / d) as u8]))
                .collect();
            let zero = XOperator::identity(m, 2);
            for a in &elems {
                assert_eq!(a.compose(&zero).unwrap(), *a);
                assert!(a.compose(&a.inverse()).unwrap().is_identity());
                for b in &elems {
                    let ab = a.compose(b).unwrap();
                    assert!(elems.contains(&ab));
                    assert_eq!(ab, b.compose(a).unwrap());
                    for c in &elems {
                        assert_eq!(
                            ab.compose(c).unwrap(),
                            a.compose(&b.compose(c).unwrap()).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn charge_ops() {
        let m = z(5);
        let a = m.charge(3);
        let b = m.charge(4);
        assert_eq!((a + b).value(), 2);
        assert_eq!((a - b).value(), 4);
        assert_eq!((-a).value(), 2);
        assert_eq!((a * b).value(), 2);
        assert_eq!(m.charge(-1).value(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn commutation_is_bilinear(
                d in 2u32..=6,
                raw in proptest::collection::vec((0u8..=255, 0u8..=255, 0u8..=255), 1..12),
            ) {
                let m = z(d);
                let dd = d as u8;
                let a: Vec<u8> = raw.iter().map(|t| t.0 % dd).collect();
                let a2: Vec<u8> = raw.iter().map(|t| t.1 % dd).collect();
                let b: Vec<u8> = raw.iter().map(|t| t.2 % dd).collect();
                let sum: Vec<u8> = a.iter().zip(&a2).map(|(&x, &y)| m.add(x, y)).collect();
                let lhs = commutation_exponent(m, &b, &sum).unwrap();
                let rhs = commutation_exponent(m, &b, &a).unwrap()
                    + commutation_exponent(m, &b, &a2).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
