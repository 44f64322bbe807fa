//! Truncated Laurent series in one formal variable over a generic
//! coefficient ring: the computational substrate for residue extraction.
//!
//! A series carries coefficients for exponents `lead_exponent ..= trunc_order`
//! and knows nothing beyond `trunc_order`; products shrink the truncation by
//! the usual rule `min(a.trunc + b.lead, b.trunc + a.lead)`. There is no
//! series inversion: integrands are polynomial in their atoms, so division
//! is never needed.

use crate::{Error, Result};
use num_complex::Complex64;

/// Coefficient-ring operations required by the series engine.
///
/// Instantiated by `Complex64` for numeric jets and by `expr::Expr` for
/// symbolic expansions.
pub trait Ring: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    /// Multiplication by an integer (for term-wise differentiation).
    fn mul_int(&self, n: i64) -> Self;
    /// Exact division by a nonzero integer (coefficients live over a field).
    fn div_int(&self, n: i64) -> Self;
}

impl Ring for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn mul_int(&self, n: i64) -> Self {
        self * n as f64
    }
    fn div_int(&self, n: i64) -> Self {
        self / n as f64
    }
}

/// Truncated Laurent series: coefficients for `w^lead ..= w^trunc`.
#[derive(Debug, Clone)]
pub struct LaurentSeries<C: Ring> {
    lead: i64,
    trunc: i64,
    coeffs: Vec<C>,
}

impl<C: Ring> LaurentSeries<C> {
    /// Builds a series from coefficients starting at exponent `lead`,
    /// normalizing away leading zeros. `coeffs.len()` must equal
    /// `trunc - lead + 1`.
    pub fn new(lead: i64, coeffs: Vec<C>, trunc: i64) -> Self {
        debug_assert_eq!(coeffs.len() as i64, trunc - lead + 1);
        let mut s = Self { lead, trunc, coeffs };
        s.normalize();
        s
    }

    /// The zero series, known up to `trunc`.
    pub fn zero(trunc: i64) -> Self {
        Self {
            lead: trunc + 1,
            trunc,
            coeffs: Vec::new(),
        }
    }

    /// A single coefficient at exponent 0.
    pub fn constant(c: C, trunc: i64) -> Self {
        if trunc < 0 {
            return Self::zero(trunc);
        }
        let mut coeffs = vec![C::zero(); (trunc + 1) as usize];
        coeffs[0] = c;
        Self::new(0, coeffs, trunc)
    }

    fn normalize(&mut self) {
        while !self.coeffs.is_empty() && self.coeffs[0].is_zero() {
            self.coeffs.remove(0);
            self.lead += 1;
        }
    }

    pub fn lead_exponent(&self) -> i64 {
        self.lead
    }
    pub fn trunc_order(&self) -> i64 {
        self.trunc
    }
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Iterates `(exponent, coefficient)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &C)> {
        self.coeffs.iter().enumerate().map(move |(i, c)| (self.lead + i as i64, c))
    }

    /// Exponent-`k` coefficient: ring zero below the lead, error beyond the
    /// truncation order.
    pub fn coefficient(&self, k: i64) -> Result<C> {
        if k > self.trunc {
            return Err(Error::BeyondTruncation {
                index: k,
                trunc: self.trunc,
            });
        }
        if k < self.lead {
            return Ok(C::zero());
        }
        Ok(self.coeffs[(k - self.lead) as usize].clone())
    }

    /// The holomorphic residue: the `w^-1` coefficient (ring zero when the
    /// series has no polar part or is identically zero).
    pub fn residue(&self) -> Result<C> {
        if self.is_zero() {
            return Ok(C::zero());
        }
        self.coefficient(-1)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let trunc = self.trunc.min(other.trunc);
        let lead = self.lead.min(other.lead).min(trunc + 1);
        if trunc < lead - 1 {
            return Err(Error::TruncationUnderflow);
        }
        let mut coeffs = vec![C::zero(); (trunc - lead + 1) as usize];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let e = lead + i as i64;
            let mut v = C::zero();
            if e >= self.lead && e <= self.trunc {
                v = v.add(&self.coeffs[(e - self.lead) as usize]);
            }
            if e >= other.lead && e <= other.trunc {
                v = v.add(&other.coeffs[(e - other.lead) as usize]);
            }
            *c = v;
        }
        Ok(Self::new(lead, coeffs, trunc))
    }

    pub fn scale(&self, c: &C) -> Self {
        let coeffs = self.coeffs.iter().map(|x| x.mul(c)).collect();
        Self::new(self.lead, coeffs, self.trunc)
    }

    pub fn neg(&self) -> Self {
        let coeffs = self.coeffs.iter().map(|x| x.neg()).collect();
        Self::new(self.lead, coeffs, self.trunc)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.is_zero() || other.is_zero() {
            // A factor that is zero up to its truncation gives a product
            // that is zero up to the induced truncation.
            let trunc = (self.trunc + other.lead).min(other.trunc + self.lead);
            return Ok(Self::zero(trunc));
        }
        let lead = self.lead + other.lead;
        let trunc = (self.trunc + other.lead).min(other.trunc + self.lead);
        if trunc < lead - 1 {
            return Err(Error::TruncationUnderflow);
        }
        let mut coeffs = vec![C::zero(); (trunc - lead + 1) as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                let e = self.lead + i as i64 + other.lead + j as i64;
                if e > trunc {
                    break;
                }
                let idx = (e - lead) as usize;
                coeffs[idx] = coeffs[idx].add(&a.mul(b));
            }
        }
        Ok(Self::new(lead, coeffs, trunc))
    }

    /// Integer power by repeated multiplication; `S^0` is the constant one,
    /// known up to the truncation order of `S`.
    pub fn int_pow(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(Self::constant(C::one(), self.trunc));
        }
        let mut out = self.clone();
        for _ in 1..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    pub fn divide_by_integer(&self, n: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("division by integer zero".into()));
        }
        let coeffs = self.coeffs.iter().map(|x| x.div_int(n)).collect();
        Ok(Self::new(self.lead, coeffs, self.trunc))
    }

    /// Term-wise derivative `k c_k w^(k-1)`.
    pub fn differentiate(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (e, c) in self.iter() {
            coeffs.push(c.mul_int(e));
        }
        Self::new(self.lead - 1, coeffs, self.trunc - 1)
    }

    /// Re-truncates to a lower order (no-op if already lower).
    pub fn truncate(&self, trunc: i64) -> Self {
        if trunc >= self.trunc {
            return self.clone();
        }
        let keep = (trunc - self.lead + 1).max(0) as usize;
        Self::new(
            self.lead.min(trunc + 1),
            self.coeffs[..keep].to_vec(),
            trunc,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn s(lead: i64, vals: &[(f64, f64)]) -> LaurentSeries<Complex64> {
        let coeffs: Vec<_> = vals.iter().map(|&(r, i)| c(r, i)).collect();
        let trunc = lead + coeffs.len() as i64 - 1;
        LaurentSeries::new(lead, coeffs, trunc)
    }

    #[test]
    fn simple_products() {
        // (1/w) * w = 1
        let a = s(-1, &[(1.0, 0.0)]);
        let b = s(1, &[(1.0, 0.0)]);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.lead_exponent(), 0);
        assert_eq!(p.coefficient(0).unwrap(), c(1.0, 0.0));

        // (w^-2 + 6 G4 w^2)^2 = w^-4 + 12 G4 + 36 G4^2 w^4
        let g4 = 1.375;
        let mut coeffs = vec![c(0.0, 0.0); 9]; // exponents -2 ..= 6
        coeffs[0] = c(1.0, 0.0);
        coeffs[4] = c(6.0 * g4, 0.0);
        let a = LaurentSeries::new(-2, coeffs, 6);
        let p = a.mul(&a).unwrap();
        assert!((p.coefficient(-4).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((p.coefficient(0).unwrap() - c(12.0 * g4, 0.0)).norm() < 1e-14);
        assert!((p.coefficient(4).unwrap() - c(36.0 * g4 * g4, 0.0)).norm() < 1e-13);
        assert!(p.coefficient(-2).unwrap().norm() < 1e-15);
    }

    #[test]
    fn add_with_negation_cancels() {
        let a = s(-2, &[(1.0, 2.0), (0.5, 0.0), (3.0, -1.0)]);
        let z = a.add(&a.neg()).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn coefficient_bounds() {
        let a = s(-1, &[(1.0, 0.0), (2.0, 0.0)]);
        assert_eq!(a.coefficient(-5).unwrap(), c(0.0, 0.0));
        assert!(matches!(
            a.coefficient(5),
            Err(Error::BeyondTruncation { .. })
        ));
    }

    #[test]
    fn differentiate_kills_residue() {
        let a = s(-3, &[(2.0, 1.0), (4.0, 0.0), (1.0, -1.0), (0.3, 0.0), (9.0, 2.0)]);
        let d = a.differentiate();
        assert!(d.residue().unwrap().norm() < 1e-15);
        // d/dw (1/w) = -w^-2
        let inv = s(-1, &[(1.0, 0.0)]);
        let di = inv.differentiate();
        assert_eq!(di.lead_exponent(), -2);
        assert_eq!(di.coefficient(-2).unwrap(), c(-1.0, 0.0));
        // d/dw const = 0
        let k = s(0, &[(5.0, 0.0)]);
        assert!(k.differentiate().is_zero());
    }

    #[test]
    fn truncation_underflow_detected() {
        let a = s(-1, &[(1.0, 0.0)]); // trunc -1
        let b = s(2, &[(1.0, 0.0)]); // lead 2, trunc 2
        // product: lead 1, trunc min(-1+2, 2-1) = 1 -> fine
        assert!(a.mul(&b).is_ok());
        let deep = LaurentSeries::new(-4, vec![c(1.0, 0.0)], -4);
        // trunc of product: min(-4 + -4, ...) = -8, lead -8: single coeff ok;
        // against a high-lead short series the window can vanish:
        let hi = LaurentSeries::new(3, vec![c(1.0, 0.0)], 3);
        let p = deep.mul(&hi);
        // lead -1, trunc min(-4+3, 3-4) = -1 -> exactly the residue survives
        let p = p.unwrap();
        assert_eq!(p.lead_exponent(), -1);
        assert_eq!(p.trunc_order(), -1);
    }

    proptest! {
        #[test]
        fn ring_axioms(
            av in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..5),
            bv in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..5),
            cv in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..5),
            la in -3i64..2, lb in -3i64..2, lc in -3i64..2,
        ) {
            let a = s(la, &av);
            let b = s(lb, &bv);
            let c3 = s(lc, &cv);
            let close = |x: &LaurentSeries<Complex64>, y: &LaurentSeries<Complex64>| {
                let lo = x.lead_exponent().min(y.lead_exponent());
                let hi = x.trunc_order().min(y.trunc_order());
                for e in lo..=hi {
                    let xv = x.coefficient(e).unwrap();
                    let yv = y.coefficient(e).unwrap();
                    prop_assert!((xv - yv).norm() <= 1e-12 * (1.0 + xv.norm().max(yv.norm())));
                }
                Ok(())
            };
            // commutativity and associativity of mul
            close(&a.mul(&b).unwrap(), &b.mul(&a).unwrap())?;
            close(&a.mul(&b).unwrap().mul(&c3).unwrap(), &a.mul(&b.mul(&c3).unwrap()).unwrap())?;
            // distributivity (align truncations via the product rule)
            let lhs = a.mul(&b.add(&c3).unwrap()).unwrap();
            let rhs = a.mul(&b).unwrap().add(&a.mul(&c3).unwrap()).unwrap();
            close(&lhs, &rhs)?;
        }

        #[test]
        fn residue_matches_convolution(
            av in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..6),
            bv in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..6),
            la in -4i64..1, lb in -4i64..1,
        ) {
            let a = s(la, &av);
            let b = s(lb, &bv);
            if let Ok(p) = a.mul(&b) {
                if p.trunc_order() >= -1 {
                    let got = p.residue().unwrap();
                    let mut want = c(0.0, 0.0);
                    for (e, ac) in a.iter() {
                        let k = -1 - e;
                        if k >= b.lead_exponent() && k <= b.trunc_order() {
                            want += ac * b.coefficient(k).unwrap();
                        }
                    }
                    prop_assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
                }
            }
        }

        #[test]
        fn residue_of_derivative_vanishes(
            av in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..7),
            la in -4i64..1,
        ) {
            let a = s(la, &av);
            let d = a.differentiate();
            if d.trunc_order() >= -1 {
                prop_assert!(d.residue().unwrap().norm() < 1e-14);
            }
        }

        #[test]
        fn leibniz_rule(
            av in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..5),
            bv in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..5),
            la in -2i64..2, lb in -2i64..2,
        ) {
            let a = s(la, &av);
            let b = s(lb, &bv);
            let lhs = a.mul(&b).unwrap().differentiate();
            let rhs = a.differentiate().mul(&b).unwrap()
                .add(&a.mul(&b.differentiate()).unwrap()).unwrap();
            let lo = lhs.lead_exponent().min(rhs.lead_exponent());
            let hi = lhs.trunc_order().min(rhs.trunc_order());
            for e in lo..=hi {
                let x = lhs.coefficient(e).unwrap();
                let y = rhs.coefficient(e).unwrap();
                prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }
    }

    #[test]
    fn powers_and_integer_division() {
        let a = s(-1, &[(1.0, 0.0), (2.0, 0.0), (0.5, -1.0)]);
        // S^0 is the constant one at the same truncation
        let p0 = a.int_pow(0).unwrap();
        assert_eq!(p0.lead_exponent(), 0);
        assert_eq!(p0.coefficient(0).unwrap(), c(1.0, 0.0));
        assert_eq!(p0.trunc_order(), a.trunc_order());
        // S^2 agrees with S*S
        let p2 = a.int_pow(2).unwrap();
        let ss = a.mul(&a).unwrap();
        for e in p2.lead_exponent()..=p2.trunc_order() {
            assert_eq!(p2.coefficient(e).unwrap(), ss.coefficient(e).unwrap());
        }
        // divide_by_integer is exact and rejects zero
        let d = a.divide_by_integer(4).unwrap();
        assert_eq!(d.coefficient(0).unwrap(), c(0.5, 0.0));
        assert!(a.divide_by_integer(0).is_err());
        // scale
        let sc = a.scale(&c(0.0, 2.0));
        assert_eq!(sc.coefficient(-1).unwrap(), c(0.0, 2.0));
    }

    #[test]
    fn truncation_monotonicity() {
        // Re-running a computation with higher truncation changes no
        // previously produced coefficient.
        let mk = |trunc: i64| {
            let mut coeffs = vec![c(0.0, 0.0); (trunc + 3) as usize];
            coeffs[0] = c(1.0, 0.0);
            coeffs[4] = c(0.25, -1.0);
            let a = LaurentSeries::new(-2, coeffs, trunc);
            a.mul(&a).unwrap()
        };
        let low = mk(4);
        let high = mk(9);
        for e in low.lead_exponent()..=low.trunc_order() {
            assert_eq!(
                low.coefficient(e).unwrap(),
                high.coefficient(e).unwrap(),
                "exponent {e}"
            );
        }
    }
}
