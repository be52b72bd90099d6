//! The explicit ring Acris(C) for C = B[x_1^(1/p^inf),...,x_n^(1/p^inf)]/(x_i)
//! at precision p^N: elements are finite sums of b_a * x^a/(a!)_p over a
//! perfect coefficient base, with Frobenius, the Nygaard ideal, Teichmüller
//! lifts from the tilt C♭, the unit logarithm and the map F/p - 1.

use std::collections::BTreeMap;
use std::fmt;

use crate::arith::{factorial_val, Prec, Rng};
use crate::linalg::{intersect, Submodule};
use crate::padic::{GaloisRing, GrElem};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AcrisError {
    NotNygaard,
    PrecisionExhausted,
    WindowTooSmall,
    PrecisionMismatch,
    NotInKernel,
}

impl fmt::Display for AcrisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcrisError::NotNygaard => write!(f, "element is not in the Nygaard ideal"),
            AcrisError::PrecisionExhausted => write!(f, "exact division failed"),
            AcrisError::WindowTooSmall => write!(f, "window cannot represent the computation"),
            AcrisError::PrecisionMismatch => write!(f, "wrong working precision"),
            AcrisError::NotInKernel => write!(f, "element is not in the kernel"),
        }
    }
}

impl std::error::Error for AcrisError {}

/// Nonnegative exponent in Z[1/p]: num / p^den_exp, canonical
/// (p does not divide num unless den_exp = 0).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FracExp {
    pub p: u64,
    pub num: u64,
    pub den_exp: u32,
}

impl fmt::Debug for FracExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den_exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}^{}", self.num, self.p, self.den_exp)
        }
    }
}

impl FracExp {
    pub fn new(p: u64, mut num: u64, mut den_exp: u32) -> FracExp {
        if num == 0 {
            return FracExp { p, num: 0, den_exp: 0 };
        }
        while den_exp > 0 && num % p == 0 {
            num /= p;
            den_exp -= 1;
        }
        FracExp { p, num, den_exp }
    }

    pub fn int(p: u64, k: u64) -> FracExp {
        FracExp::new(p, k, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn floor(&self) -> u64 {
        self.num / self.p.pow(self.den_exp)
    }

    pub fn add(&self, other: &FracExp) -> FracExp {
        assert_eq!(self.p, other.p);
        let e = self.den_exp.max(other.den_exp);
        let a = self.num as u128 * (self.p as u128).pow(e - self.den_exp);
        let b = other.num as u128 * (self.p as u128).pow(e - other.den_exp);
        let sum = a + b;
        assert!(sum <= u64::MAX as u128, "exponent overflow");
        FracExp::new(self.p, sum as u64, e)
    }

    pub fn mul_p(&self) -> FracExp {
        if self.den_exp > 0 {
            FracExp { p: self.p, num: self.num, den_exp: self.den_exp - 1 }
        } else {
            FracExp::new(self.p, self.num.checked_mul(self.p).expect("exponent overflow"), 0)
        }
    }

    pub fn div_p(&self) -> FracExp {
        if self.is_zero() {
            return *self;
        }
        if self.den_exp == 0 && self.num % self.p == 0 {
            FracExp { p: self.p, num: self.num / self.p, den_exp: 0 }
        } else {
            FracExp { p: self.p, num: self.num, den_exp: self.den_exp + 1 }
        }
    }

    pub fn scale_int(&self, k: u64) -> FracExp {
        FracExp::new(self.p, self.num.checked_mul(k).expect("exponent overflow"), self.den_exp)
    }

    /// v_p((a!)_p) = v_p(floor(a)!).
    pub fn gamma(&self) -> u64 {
        factorial_val(self.p, self.floor())
    }
}

impl Ord for FracExp {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let e = self.den_exp.max(other.den_exp);
        let a = self.num as u128 * (self.p as u128).pow(e - self.den_exp);
        let b = other.num as u128 * (other.p as u128).pow(e - other.den_exp);
        a.cmp(&b)
    }
}

impl PartialOrd for FracExp {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-exponent: one fractional exponent per PD variable.
pub type ExpVec = Vec<FracExp>;

pub fn expvec_zero(p: u64, nvars: usize) -> ExpVec {
    vec![FracExp::int(p, 0); nvars]
}

pub fn expvec_add(a: &ExpVec, b: &ExpVec) -> ExpVec {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

pub fn expvec_mul_p(a: &ExpVec) -> ExpVec {
    a.iter().map(|x| x.mul_p()).collect()
}

pub fn expvec_div_p(a: &ExpVec) -> ExpVec {
    a.iter().map(|x| x.div_p()).collect()
}

/// Sum of the per-coordinate integer parts, floor(a_1) + ... + floor(a_n).
pub fn expvec_floor_sum(a: &ExpVec) -> u64 {
    a.iter().map(|x| x.floor()).sum()
}

/// True when every coordinate is < 1 (the low part of the monomial basis).
pub fn expvec_all_low(a: &ExpVec) -> bool {
    a.iter().all(|x| x.floor() == 0)
}

/// Membership in the monomial ideal J = ker(C♭ -> C): some coordinate >= 1.
pub fn expvec_in_j(a: &ExpVec) -> bool {
    !expvec_all_low(a)
}

pub fn expvec_gamma(a: &ExpVec) -> u64 {
    a.iter().map(|x| x.gamma()).sum()
}

/// v_p((a!)_p) named as an operation: the largest power of p dividing
/// floor(a)!, Legendre-summed per coordinate.
pub fn gamma_val(alpha: &FracExp) -> u64 {
    alpha.gamma()
}

/// Coefficient base for Acris: the mod-p^N Witt vectors of a perfect ring,
/// with the Frobenius pair and enough arithmetic for the series ops.
pub trait PerfectBase: Clone {
    type Elem: Clone + PartialEq + Eq + fmt::Debug;

    fn prec(&self) -> Prec;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn scalar_mul(&self, c: u64, a: &Self::Elem) -> Self::Elem;
    /// Frobenius of W(B)/p^N.
    fn frobenius(&self, a: &Self::Elem) -> Self::Elem;
    fn frobenius_inv(&self, a: &Self::Elem) -> Self::Elem;
    /// Minimal p-adic valuation across coordinates.
    fn val(&self, a: &Self::Elem) -> u32;
    fn div_pow_p(&self, a: &Self::Elem, k: u32) -> Result<Self::Elem, ()>;
    fn at_precision(&self, n: u32) -> Self;
    fn reduce_elem(&self, a: &Self::Elem) -> Self::Elem;
    fn random(&self, rng: &mut Rng) -> Self::Elem;
    /// Z/p^N coordinates in a fixed free basis (used to flatten series into
    /// matrices). Monoid bases are infinite rank; coordinates are taken
    /// relative to a caller-supplied support.
    fn coord_rank(&self) -> Option<usize>;
    fn coords(&self, a: &Self::Elem) -> Vec<u64>;
    fn from_coords(&self, coords: &[u64]) -> Self::Elem;
}

impl PerfectBase for GaloisRing {
    type Elem = GrElem;

    fn prec(&self) -> Prec {
        self.prec
    }
    fn zero(&self) -> GrElem {
        GaloisRing::zero(self)
    }
    fn one(&self) -> GrElem {
        GaloisRing::one(self)
    }
    fn is_zero(&self, a: &GrElem) -> bool {
        GaloisRing::is_zero(self, a)
    }
    fn add(&self, a: &GrElem, b: &GrElem) -> GrElem {
        GaloisRing::add(self, a, b)
    }
    fn sub(&self, a: &GrElem, b: &GrElem) -> GrElem {
        GaloisRing::sub(self, a, b)
    }
    fn neg(&self, a: &GrElem) -> GrElem {
        GaloisRing::neg(self, a)
    }
    fn mul(&self, a: &GrElem, b: &GrElem) -> GrElem {
        GaloisRing::mul(self, a, b)
    }
    fn scalar_mul(&self, c: u64, a: &GrElem) -> GrElem {
        GaloisRing::scalar_mul(self, c, a)
    }
    fn frobenius(&self, a: &GrElem) -> GrElem {
        self.sigma(a)
    }
    fn frobenius_inv(&self, a: &GrElem) -> GrElem {
        self.sigma_inv(a)
    }
    fn val(&self, a: &GrElem) -> u32 {
        GaloisRing::val(self, a)
    }
    fn div_pow_p(&self, a: &GrElem, k: u32) -> Result<GrElem, ()> {
        GaloisRing::div_pow_p(self, a, k)
    }
    fn at_precision(&self, n: u32) -> GaloisRing {
        GaloisRing::at_precision(self, n)
    }
    fn reduce_elem(&self, a: &GrElem) -> GrElem {
        GaloisRing::reduce_elem(self, a)
    }
    fn random(&self, rng: &mut Rng) -> GrElem {
        GaloisRing::random(self, rng)
    }
    fn coord_rank(&self) -> Option<usize> {
        Some(self.degree())
    }
    fn coords(&self, a: &GrElem) -> Vec<u64> {
        a.coeffs.clone()
    }
    fn from_coords(&self, coords: &[u64]) -> GrElem {
        assert_eq!(coords.len(), self.degree());
        GrElem { coeffs: coords.iter().map(|&c| self.prec.reduce(c)).collect() }
    }
}

/// Truncated perfect monoid algebra (Z/p^N)[u_1^(1/p^inf), ..., u_k^(1/p^inf)]:
/// the Witt lift of a perfect polynomial base. Frobenius scales exponents
/// by p and is bijective.
#[derive(Clone, PartialEq, Eq)]
pub struct MonoidAlg {
    pub prec: Prec,
    pub nvars: usize,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MonoidElem {
    pub terms: BTreeMap<ExpVec, u64>,
}

impl fmt::Debug for MonoidAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W(F_{}[u^(1/p^inf)]^{})/{:?}", self.prec.p, self.nvars, self.prec)
    }
}

impl MonoidAlg {
    pub fn new(prec: Prec, nvars: usize) -> MonoidAlg {
        MonoidAlg { prec, nvars }
    }

    pub fn monomial(&self, exps: ExpVec, coeff: u64) -> MonoidElem {
        assert_eq!(exps.len(), self.nvars);
        let mut terms = BTreeMap::new();
        let c = self.prec.reduce(coeff);
        if c != 0 {
            terms.insert(exps, c);
        }
        MonoidElem { terms }
    }

    /// Largest exponent value appearing in any coordinate, as (num, den).
    pub fn max_degree(a: &MonoidElem) -> Option<FracExp> {
        a.terms.keys().flat_map(|e| e.iter().copied()).max()
    }
}

impl PerfectBase for MonoidAlg {
    type Elem = MonoidElem;

    fn prec(&self) -> Prec {
        self.prec
    }
    fn zero(&self) -> MonoidElem {
        MonoidElem { terms: BTreeMap::new() }
    }
    fn one(&self) -> MonoidElem {
        self.monomial(expvec_zero(self.prec.p, self.nvars), 1)
    }
    fn is_zero(&self, a: &MonoidElem) -> bool {
        a.terms.is_empty()
    }
    fn add(&self, a: &MonoidElem, b: &MonoidElem) -> MonoidElem {
        let mut terms = a.terms.clone();
        for (e, &c) in &b.terms {
            let entry = terms.entry(e.clone()).or_insert(0);
            *entry = self.prec.add(*entry, c);
            if *entry == 0 {
                terms.remove(e);
            }
        }
        MonoidElem { terms }
    }
    fn sub(&self, a: &MonoidElem, b: &MonoidElem) -> MonoidElem {
        self.add(a, &self.neg(b))
    }
    fn neg(&self, a: &MonoidElem) -> MonoidElem {
        MonoidElem { terms: a.terms.iter().map(|(e, &c)| (e.clone(), self.prec.neg(c))).collect() }
    }
    fn mul(&self, a: &MonoidElem, b: &MonoidElem) -> MonoidElem {
        let mut out = self.zero();
        for (ea, &ca) in &a.terms {
            for (eb, &cb) in &b.terms {
                let c = self.prec.mul(ca, cb);
                if c != 0 {
                    let e = expvec_add(ea, eb);
                    let entry = out.terms.entry(e.clone()).or_insert(0);
                    *entry = self.prec.add(*entry, c);
                    if *entry == 0 {
                        out.terms.remove(&e);
                    }
                }
            }
        }
        out
    }
    fn scalar_mul(&self, c: u64, a: &MonoidElem) -> MonoidElem {
        let c = self.prec.reduce(c);
        let mut terms = BTreeMap::new();
        for (e, &x) in &a.terms {
            let v = self.prec.mul(c, x);
            if v != 0 {
                terms.insert(e.clone(), v);
            }
        }
        MonoidElem { terms }
    }
    fn frobenius(&self, a: &MonoidElem) -> MonoidElem {
        MonoidElem { terms: a.terms.iter().map(|(e, &c)| (expvec_mul_p(e), c)).collect() }
    }
    fn frobenius_inv(&self, a: &MonoidElem) -> MonoidElem {
        MonoidElem { terms: a.terms.iter().map(|(e, &c)| (expvec_div_p(e), c)).collect() }
    }
    fn val(&self, a: &MonoidElem) -> u32 {
        a.terms.values().map(|&c| self.prec.val(c)).min().unwrap_or(self.prec.n)
    }
    fn div_pow_p(&self, a: &MonoidElem, k: u32) -> Result<MonoidElem, ()> {
        let mut terms = BTreeMap::new();
        for (e, &c) in &a.terms {
            terms.insert(e.clone(), self.prec.div_pow_p(c, k)?);
        }
        Ok(MonoidElem { terms })
    }
    fn at_precision(&self, n: u32) -> MonoidAlg {
        MonoidAlg { prec: Prec::new(self.prec.p, n), nvars: self.nvars }
    }
    fn reduce_elem(&self, a: &MonoidElem) -> MonoidElem {
        let mut terms = BTreeMap::new();
        for (e, &c) in &a.terms {
            let v = self.prec.reduce(c);
            if v != 0 {
                terms.insert(e.clone(), v);
            }
        }
        MonoidElem { terms }
    }
    fn random(&self, rng: &mut Rng) -> MonoidElem {
        // small random support for sampled identities
        let p = self.prec.p;
        let mut out = self.zero();
        for _ in 0..1 + rng.below(3) {
            let exps: ExpVec = (0..self.nvars)
                .map(|_| FracExp::new(p, rng.below(2 * p + 1), rng.below(2) as u32))
                .collect();
            out = self.add(&out, &self.monomial(exps, rng.residue(&self.prec)));
        }
        out
    }
    fn coord_rank(&self) -> Option<usize> {
        None
    }
    fn coords(&self, _a: &MonoidElem) -> Vec<u64> {
        panic!("monoid base has no fixed finite coordinate system");
    }
    fn from_coords(&self, _coords: &[u64]) -> MonoidElem {
        panic!("monoid base has no fixed finite coordinate system");
    }
}

/// A truncated element of the tilt C♭: a finite sum of residue
/// coefficients times fractional-exponent monomials. Coefficients are
/// meaningful modulo p only.
#[derive(Clone, Debug)]
pub struct SharpSeries<B: PerfectBase> {
    pub terms: BTreeMap<ExpVec, B::Elem>,
}

impl<B: PerfectBase> PartialEq for SharpSeries<B> {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl<B: PerfectBase> Eq for SharpSeries<B> {}

impl<B: PerfectBase> SharpSeries<B> {
    pub fn zero() -> SharpSeries<B> {
        SharpSeries { terms: BTreeMap::new() }
    }

    pub fn monomial(base: &B, exps: ExpVec, coeff: B::Elem) -> SharpSeries<B> {
        let base1 = base.at_precision(1);
        let c = base1.reduce_elem(&coeff);
        let mut terms = BTreeMap::new();
        if !base1.is_zero(&c) {
            terms.insert(exps, c);
        }
        SharpSeries { terms }
    }

    pub fn add(base: &B, a: &SharpSeries<B>, b: &SharpSeries<B>) -> SharpSeries<B> {
        let base1 = base.at_precision(1);
        let mut terms = a.terms.clone();
        for (e, c) in &b.terms {
            let cur = terms.remove(e).unwrap_or_else(|| base1.zero());
            let sum = base1.add(&cur, c);
            if !base1.is_zero(&sum) {
                terms.insert(e.clone(), sum);
            }
        }
        SharpSeries { terms }
    }

    pub fn mul(base: &B, a: &SharpSeries<B>, b: &SharpSeries<B>) -> SharpSeries<B> {
        let base1 = base.at_precision(1);
        let mut out = SharpSeries::zero();
        for (ea, ca) in &a.terms {
            for (eb, cb) in &b.terms {
                let c = base1.mul(ca, cb);
                if base1.is_zero(&c) {
                    continue;
                }
                let single = SharpSeries { terms: BTreeMap::from([(expvec_add(ea, eb), c)]) };
                out = SharpSeries::add(base, &out, &single);
            }
        }
        out
    }

    /// Inverse Frobenius of the perfect ring: coefficientwise p-th root and
    /// exponents divided by p.
    pub fn sharp_root(base: &B, s: &SharpSeries<B>) -> SharpSeries<B> {
        let base1 = base.at_precision(1);
        SharpSeries {
            terms: s
                .terms
                .iter()
                .map(|(e, c)| (expvec_div_p(e), base1.frobenius_inv(c)))
                .collect(),
        }
    }

    /// p-th power in C♭ (char p: coefficientwise Frobenius, exponents * p).
    pub fn sharp_pow_p(base: &B, s: &SharpSeries<B>) -> SharpSeries<B> {
        let base1 = base.at_precision(1);
        SharpSeries {
            terms: s.terms.iter().map(|(e, c)| (expvec_mul_p(e), base1.frobenius(c))).collect(),
        }
    }
}

/// Finite sum of b_a * x^a/(a!)_p: the truncated Acris element. The finite
/// support is exact, not a truncation: modulo p^N only finitely many
/// coefficients survive the finiteness condition.
#[derive(Clone)]
pub struct PdSeries<B: PerfectBase> {
    pub base: B,
    pub nvars: usize,
    pub terms: BTreeMap<ExpVec, B::Elem>,
}

impl<B: PerfectBase> PartialEq for PdSeries<B> {
    fn eq(&self, other: &Self) -> bool {
        self.nvars == other.nvars
            && self.base.prec() == other.base.prec()
            && self.terms == other.terms
    }
}

impl<B: PerfectBase> Eq for PdSeries<B> {}

impl<B: PerfectBase> fmt::Debug for PdSeries<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{:?}*[x^{:?}/gamma]", c, e)?;
        }
        Ok(())
    }
}

impl<B: PerfectBase> PdSeries<B> {
    pub fn zero(base: &B, nvars: usize) -> PdSeries<B> {
        PdSeries { base: base.clone(), nvars, terms: BTreeMap::new() }
    }

    pub fn one(base: &B, nvars: usize) -> PdSeries<B> {
        PdSeries::scalar(base, nvars, base.one())
    }

    pub fn scalar(base: &B, nvars: usize, c: B::Elem) -> PdSeries<B> {
        let mut s = PdSeries::zero(base, nvars);
        s.add_term(expvec_zero(base.prec().p, nvars), c);
        s
    }

    /// The basis element x^a/(a!)_p scaled by a coefficient.
    pub fn basis_term(base: &B, nvars: usize, exps: ExpVec, coeff: B::Elem) -> PdSeries<B> {
        assert_eq!(exps.len(), nvars);
        let mut s = PdSeries::zero(base, nvars);
        s.add_term(exps, coeff);
        s
    }

    /// The naive monomial x^a = (a!)_p * (x^a/(a!)_p).
    pub fn naive_monomial(base: &B, nvars: usize, exps: ExpVec, coeff: B::Elem) -> PdSeries<B> {
        let gamma = expvec_gamma(&exps);
        let p = base.prec().p;
        let scale = base.prec().reduce(pow_u64_mod(p, gamma, base.prec().modulus()));
        PdSeries::basis_term(base, nvars, exps, base.scalar_mul(scale, &coeff))
    }

    fn add_term(&mut self, exps: ExpVec, coeff: B::Elem) {
        if self.base.is_zero(&coeff) {
            return;
        }
        match self.terms.remove(&exps) {
            None => {
                self.terms.insert(exps, coeff);
            }
            Some(old) => {
                let sum = self.base.add(&old, &coeff);
                if !self.base.is_zero(&sum) {
                    self.terms.insert(exps, sum);
                }
            }
        }
    }

    pub fn coeff(&self, exps: &ExpVec) -> B::Elem {
        self.terms.get(exps).cloned().unwrap_or_else(|| self.base.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn assert_compatible(&self, other: &PdSeries<B>) {
        assert_eq!(self.nvars, other.nvars, "base mismatch: nvars differ");
        assert_eq!(self.base.prec(), other.base.prec(), "base mismatch: precision differs");
    }

    pub fn add(&self, other: &PdSeries<B>) -> PdSeries<B> {
        self.assert_compatible(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> PdSeries<B> {
        PdSeries {
            base: self.base.clone(),
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), self.base.neg(c))).collect(),
        }
    }

    pub fn sub(&self, other: &PdSeries<B>) -> PdSeries<B> {
        self.add(&other.neg())
    }

    pub fn scalar_mul(&self, c: &B::Elem) -> PdSeries<B> {
        let mut out = PdSeries::zero(&self.base, self.nvars);
        for (e, x) in &self.terms {
            out.add_term(e.clone(), self.base.mul(c, x));
        }
        out
    }

    /// Product with the divided-power carry: (x^a/(a!)_p)(x^b/(b!)_p) =
    /// p^c(a,b) * x^(a+b)/((a+b)!)_p, c(a,b) = sum_i gamma(a_i + b_i) -
    /// gamma(a_i) - gamma(b_i). The carry is a nonnegative integer because
    /// binomial coefficients are integers.
    pub fn mul(&self, other: &PdSeries<B>) -> PdSeries<B> {
        self.assert_compatible(other);
        let prec = self.base.prec();
        let mut out = PdSeries::zero(&self.base, self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let mut carry: u64 = 0;
                let mut sum = Vec::with_capacity(self.nvars);
                for (xa, xb) in ea.iter().zip(eb) {
                    let s = xa.add(xb);
                    let c = s.gamma() - xa.gamma() - xb.gamma();
                    carry += c;
                    sum.push(s);
                }
                let scale = if carry >= prec.n as u64 {
                    0
                } else {
                    prec.reduce(prec.p.pow(carry as u32))
                };
                if scale == 0 {
                    continue;
                }
                let coeff = self.base.scalar_mul(scale, &self.base.mul(ca, cb));
                out.add_term(sum, coeff);
            }
        }
        out
    }

    pub fn pow(&self, mut e: u64) -> PdSeries<B> {
        let mut acc = PdSeries::one(&self.base, self.nvars);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Frobenius: b_a * x^a/(a!)_p -> sigma(b_a) * p^floor(a) * x^(pa)/((pa)!)_p.
    /// The carry exponent is computed as gamma(pa) - gamma(a) per coordinate.
    pub fn frobenius(&self) -> PdSeries<B> {
        self.frobenius_with_gamma(&|x: &FracExp| x.gamma())
    }

    /// Frobenius with an injectable gamma valuation; the honest gamma gives
    /// the p^floor(a) carry. Used by the fault-detection battery.
    pub fn frobenius_with_gamma(&self, gamma: &dyn Fn(&FracExp) -> u64) -> PdSeries<B> {
        let prec = self.base.prec();
        let mut out = PdSeries::zero(&self.base, self.nvars);
        for (e, c) in &self.terms {
            let mut carry: u64 = 0;
            let pe: ExpVec = e
                .iter()
                .map(|x| {
                    let px = x.mul_p();
                    carry += gamma(&px).saturating_sub(gamma(x));
                    px
                })
                .collect();
            let scale = if carry >= prec.n as u64 {
                0
            } else {
                prec.reduce(prec.p.pow(carry as u32))
            };
            if scale == 0 {
                continue;
            }
            out.add_term(pe, self.base.scalar_mul(scale, &self.base.frobenius(c)));
        }
        out
    }

    /// Minimal coefficient valuation; p^N for zero.
    pub fn val(&self) -> u32 {
        self.terms.values().map(|c| self.base.val(c)).min().unwrap_or(self.base.prec().n)
    }

    pub fn div_pow_p(&self, k: u32) -> Result<PdSeries<B>, AcrisError> {
        let mut out = PdSeries::zero(&self.base, self.nvars);
        for (e, c) in &self.terms {
            let d = self.base.div_pow_p(c, k).map_err(|_| AcrisError::PrecisionExhausted)?;
            out.add_term(e.clone(), d);
        }
        Ok(out)
    }

    /// Reinterpret canonical coefficient representatives at precision n
    /// (raising) or reduce them (lowering).
    pub fn at_precision(&self, n: u32) -> PdSeries<B> {
        let base = self.base.at_precision(n);
        let mut out = PdSeries::zero(&base, self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), base.reduce_elem(c));
        }
        out
    }

    /// Nygaard membership: every term supported entirely below exponent 1
    /// must have coefficient divisible by p.
    pub fn nygaard_test(&self) -> bool {
        self.terms
            .iter()
            .all(|(e, c)| !expvec_all_low(e) || self.base.val(c) >= 1)
    }

    /// The equivalent criterion: F(a) divisible by p.
    pub fn nygaard_test_via_frobenius(&self) -> bool {
        self.frobenius().val() >= 1
    }

    pub fn random_in_window(
        base: &B,
        nvars: usize,
        rng: &mut Rng,
        max_int: u64,
        max_den: u32,
        nterms: usize,
    ) -> PdSeries<B> {
        let p = base.prec().p;
        let mut out = PdSeries::zero(base, nvars);
        for _ in 0..nterms {
            let exps: ExpVec = (0..nvars)
                .map(|_| {
                    let den = rng.below(max_den as u64 + 1) as u32;
                    let num = rng.below(max_int * p.pow(den) + 1);
                    FracExp::new(p, num, den)
                })
                .collect();
            out.add_term(exps, base.random(rng));
        }
        out
    }
}

fn pow_u64_mod(base: u64, e: u64, m: u64) -> u64 {
    let mut acc: u128 = 1;
    let mut b: u128 = base as u128 % m as u128;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m as u128;
        }
        b = b * b % m as u128;
        e >>= 1;
    }
    acc as u64
}

/// Teichmüller lift of a sharp series at precision N: take the N-fold sharp
/// root, lift naively, and raise to the p^N-th power in PD arithmetic. Lifts
/// agreeing mod p have p-th powers agreeing mod p^2, so the choice of naive
/// lift does not matter.
pub fn teichmuller_lift<B: PerfectBase>(
    base: &B,
    nvars: usize,
    s: &SharpSeries<B>,
    n: u32,
) -> PdSeries<B> {
    let base_n = base.at_precision(n);
    let mut root = s.clone();
    for _ in 0..n {
        root = SharpSeries::sharp_root(&base_n, &root);
    }
    // naive lift: residue coefficients reinterpreted at precision n
    let mut lift = PdSeries::zero(&base_n, nvars);
    for (e, c) in &root.terms {
        lift = lift.add(&PdSeries::naive_monomial(&base_n, nvars, e.clone(), c.clone()));
    }
    lift.pow(pow_u64_mod(base_n.prec().p, n as u64, u64::MAX))
}

/// A formal product of binomial units (1 + c x^a)^e with every factor
/// congruent to 1 modulo J, i.e. some coordinate of a at least 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TateUnit<B: PerfectBase> {
    pub factors: Vec<TateFactor<B>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TateFactor<B: PerfectBase> {
    /// residue coefficient (mod p)
    pub coeff: B::Elem,
    /// monomial exponent, in J
    pub exps: ExpVec,
    /// exponent of the factor, mod p^N
    pub power: u64,
}

impl<B: PerfectBase> TateUnit<B> {
    pub fn one() -> TateUnit<B> {
        TateUnit { factors: Vec::new() }
    }

    pub fn single(base: &B, coeff: B::Elem, exps: ExpVec, power: u64) -> TateUnit<B> {
        assert!(expvec_in_j(&exps), "factor monomial must lie in J");
        let base1 = base.at_precision(1);
        let c = base1.reduce_elem(&coeff);
        if base1.is_zero(&c) || power == 0 {
            return TateUnit::one();
        }
        TateUnit { factors: vec![TateFactor { coeff: c, exps, power }] }
    }

    pub fn mul(&self, other: &TateUnit<B>) -> TateUnit<B> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        TateUnit { factors }
    }

    /// The underlying sharp series of one factor: 1 + c x^a.
    pub fn factor_sharp(base: &B, f: &TateFactor<B>) -> SharpSeries<B> {
        let one = SharpSeries::monomial(
            base,
            expvec_zero(base.prec().p, f.exps.len()),
            base.one(),
        );
        let mono = SharpSeries::monomial(base, f.exps.clone(), f.coeff.clone());
        SharpSeries::add(base, &one, &mono)
    }

    /// Teichmüller lift of the whole unit at precision n.
    pub fn teichmuller(&self, base: &B, nvars: usize, n: u32) -> PdSeries<B> {
        let base_n = base.at_precision(n);
        let mut acc = PdSeries::one(&base_n, nvars);
        for f in &self.factors {
            let lift = teichmuller_lift(&base_n, nvars, &TateUnit::factor_sharp(&base_n, f), n);
            acc = acc.mul(&lift.pow(f.power));
        }
        acc
    }
}

/// log([u]) = sum_{d>=1} (-1)^(d-1) ([u]-1)^d / d, truncated at the least
/// d_max with v_p((d_max - 1)!) >= N; each z^d/d equals (d-1)! times a
/// divided power of z in Fil^1 so the dropped tail vanishes mod p^N. The
/// divisions are exact at working precision N + max v_p(d).
pub fn pd_log_unit<B: ScalarEmbed>(
    base: &B,
    nvars: usize,
    u: &TateUnit<B>,
    n: u32,
) -> Result<PdSeries<B>, AcrisError> {
    let p = base.prec().p;
    let mut d_max = 1u64;
    while factorial_val(p, d_max - 1) < n as u64 {
        d_max += 1;
    }
    let vp_of = |mut d: u64| -> u32 {
        let mut v = 0;
        while d % p == 0 {
            v += 1;
            d /= p;
        }
        v
    };
    let max_vp = (1..d_max).map(vp_of).max().unwrap_or(0);
    let work_n = n + max_vp;
    let base_w = base.at_precision(work_n);
    let prec_w = base_w.prec();
    let mut total = PdSeries::zero(&base_w, nvars);
    for f in &u.factors {
        let lift = teichmuller_lift(&base_w, nvars, &TateUnit::factor_sharp(&base_w, f), work_n);
        let z = lift.sub(&PdSeries::one(&base_w, nvars));
        let mut zpow = PdSeries::one(&base_w, nvars);
        let mut flog = PdSeries::zero(&base_w, nvars);
        for d in 1..d_max {
            zpow = zpow.mul(&z);
            // divide by d = unit * p^v exactly
            let vp = vp_of(d);
            let divided = zpow.div_pow_p(vp)?;
            let unit_inv = prec_w.inv(prec_w.reduce(d / p.pow(vp)));
            let mut term = divided.scalar_mul(&base_w.from_scalar(unit_inv));
            if d % 2 == 0 {
                term = term.neg();
            }
            flog = flog.add(&term);
        }
        total = total.add(&flog.scalar_mul(&base_w.from_scalar(prec_w.reduce(f.power))));
    }
    let out = total.at_precision(n);
    debug_assert!(out.nygaard_test(), "logarithm must land in the Nygaard ideal");
    Ok(out)
}

/// Scalar embedding helper for PerfectBase.
pub trait ScalarEmbed: PerfectBase {
    fn from_scalar(&self, c: u64) -> Self::Elem;
}

impl ScalarEmbed for GaloisRing {
    fn from_scalar(&self, c: u64) -> GrElem {
        self.scalar(c)
    }
}

impl ScalarEmbed for MonoidAlg {
    fn from_scalar(&self, c: u64) -> MonoidElem {
        self.monomial(expvec_zero(self.prec.p, self.nvars), c)
    }
}

/// The syntomic map on elements: F(a)/p - a for Nygaard a. Division by p
/// consumes one digit of precision, so the input must be carried at
/// working precision N+1 to get an output valid at N: the result is
/// returned at precision n-1 for an input at precision n.
pub fn f_over_p_minus_1<B: PerfectBase>(a: &PdSeries<B>) -> Result<PdSeries<B>, AcrisError> {
    if !a.nygaard_test() {
        return Err(AcrisError::NotNygaard);
    }
    let n = a.base.prec().n;
    if n < 2 {
        return Err(AcrisError::PrecisionMismatch);
    }
    let fa = a.frobenius();
    let divided = fa.div_pow_p(1)?;
    Ok(divided.sub(a).at_precision(n - 1))
}

/// Finite monomial window for flattening Acris elements over a Galois-ring
/// base into Z/p^N coordinate vectors.
#[derive(Clone, Debug)]
pub struct AcrisWindow {
    pub p: u64,
    pub nvars: usize,
    /// integer cap per coordinate: exponents take values in [0, max_int]
    pub max_int: u64,
    /// denominator depth: exponents have denominator up to p^depth
    pub depth: u32,
    /// hard budget on representable denominators (preimages under F^k add k)
    pub max_den_budget: u32,
}

impl AcrisWindow {
    pub fn new(p: u64, nvars: usize, max_int: u64, depth: u32) -> AcrisWindow {
        AcrisWindow { p, nvars, max_int, depth, max_den_budget: depth + 8 }
    }

    /// All exponent vectors in the window, in BTreeMap order.
    pub fn monomials(&self) -> Vec<ExpVec> {
        let per_coord: Vec<FracExp> = {
            let mut set = std::collections::BTreeSet::new();
            for den in 0..=self.depth {
                let scale = self.p.pow(den);
                for num in 0..=self.max_int * scale {
                    set.insert(FracExp::new(self.p, num, den));
                }
            }
            set.into_iter().collect()
        };
        let mut out: Vec<ExpVec> = vec![vec![]];
        for _ in 0..self.nvars {
            let mut next = Vec::with_capacity(out.len() * per_coord.len());
            for base in &out {
                for &e in &per_coord {
                    let mut v = base.clone();
                    v.push(e);
                    next.push(v);
                }
            }
            out = next;
        }
        out.sort();
        out
    }

    pub fn contains(&self, e: &ExpVec) -> bool {
        e.iter().all(|x| x.den_exp <= self.depth && x.floor() <= self.max_int && {
            // value <= max_int exactly
            (x.num as u128) <= self.max_int as u128 * (self.p as u128).pow(x.den_exp)
        })
    }
}

/// Flatten a PD series over a Galois-ring base to window coordinates:
/// (monomial index, base coordinate) -> Z/p^N. Returns None when a term
/// falls outside the window.
pub fn flatten_to_window(
    ring: &GaloisRing,
    window_monomials: &[ExpVec],
    a: &PdSeries<GaloisRing>,
) -> Option<Vec<u64>> {
    let f = ring.degree();
    let index: BTreeMap<&ExpVec, usize> =
        window_monomials.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let mut out = vec![0u64; window_monomials.len() * f];
    for (e, c) in &a.terms {
        let &i = index.get(e)?;
        for k in 0..f {
            out[i * f + k] = c.coeffs[k];
        }
    }
    Some(out)
}

/// The infinitesimal-comparison check: inside the window, the intersection
/// of the images of F^j for j <= n_max equals the naive-lift submodule of
/// elements with (a!)_p dividing the coefficient of x^a/(a!)_p.
pub fn frobenius_intersection(
    ring: &GaloisRing,
    window: &AcrisWindow,
    n_max: u32,
) -> Result<(Submodule, Submodule), AcrisError> {
    if window.depth + n_max > window.max_den_budget {
        return Err(AcrisError::WindowTooSmall);
    }
    let monomials = window.monomials();
    let f = ring.degree();
    let dim = monomials.len() * f;
    let prec = ring.prec;
    let nvars = window.nvars;

    // image of F^j restricted to the window: columns are F^j of basis
    // monomials whose j-fold p-division stays representable
    let mut inter: Option<Submodule> = None;
    for j in 1..=n_max {
        let mut gens: Vec<Vec<u64>> = Vec::new();
        for target in &monomials {
            // preimage exponent: target / p^j
            let mut src = target.clone();
            for _ in 0..j {
                src = expvec_div_p(&src);
            }
            for k in 0..f {
                let mono =
                    PdSeries::basis_term(ring, nvars, src.clone(), ring.basis_elem(k));
                let mut img = mono;
                for _ in 0..j {
                    img = img.frobenius();
                }
                if let Some(v) = flatten_to_window(ring, &monomials, &img) {
                    gens.push(v);
                } else {
                    return Err(AcrisError::WindowTooSmall);
                }
            }
        }
        let sub = Submodule::from_generators(prec, dim, gens);
        inter = Some(match inter {
            None => sub,
            Some(acc) => intersect(&acc, &sub).expect("same ambient"),
        });
    }
    let inter = inter.expect("n_max >= 1");

    // the naive-lift (Ainf) submodule: (a!)_p * (x^a/(a!)_p) per monomial
    let mut ainf_gens = Vec::new();
    for e in &monomials {
        let gamma = expvec_gamma(e);
        if gamma >= prec.n as u64 {
            continue;
        }
        let scale = prec.p.pow(gamma as u32);
        for k in 0..f {
            let mono = PdSeries::basis_term(
                ring,
                nvars,
                e.clone(),
                ring.scalar_mul(scale, &ring.basis_elem(k)),
            );
            ainf_gens.push(flatten_to_window(ring, &monomials, &mono).expect("in window"));
        }
    }
    let ainf = Submodule::from_generators(prec, dim, ainf_gens);
    Ok((inter, ainf))
}
