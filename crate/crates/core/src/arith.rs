//! Exact residue arithmetic modulo p^N and a deterministic test generator.

use std::fmt;

/// Working precision: all arithmetic is exact modulo `p^n`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prec {
    pub p: u64,
    pub n: u32,
}

impl fmt::Debug for Prec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z/{}^{}", self.p, self.n)
    }
}

impl Prec {
    /// Panics when `p` is not prime, `n` is zero, or `p^n` does not fit
    /// the headroom needed for exact single multiplications.
    pub fn new(p: u64, n: u32) -> Prec {
        assert!(is_prime(p), "modulus base {p} is not prime");
        assert!(n >= 1, "precision exponent must be >= 1");
        let mut m: u64 = 1;
        for _ in 0..n {
            m = m.checked_mul(p).expect("p^n overflows u64");
        }
        assert!(m <= (1 << 62), "p^n too large for exact arithmetic");
        Prec { p, n }
    }

    pub fn modulus(&self) -> u64 {
        self.p.pow(self.n)
    }

    /// Same prime, exponent raised by `extra`.
    pub fn raised(&self, extra: u32) -> Prec {
        Prec::new(self.p, self.n + extra)
    }

    pub fn lowered_to(&self, n: u32) -> Prec {
        assert!(n >= 1 && n <= self.n);
        Prec { p: self.p, n }
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        let m = self.modulus();
        let s = a + b;
        if s >= m { s - m } else { s }
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let m = self.modulus();
        if a >= b { a - b } else { a + m - b }
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 { 0 } else { self.modulus() - a }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus() as u128) as u64
    }

    pub fn reduce(&self, a: u64) -> u64 {
        a % self.modulus()
    }

    pub fn reduce_i64(&self, a: i64) -> u64 {
        let m = self.modulus() as i64;
        (((a % m) + m) % m) as u64
    }

    pub fn pow(&self, mut base: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        base = self.reduce(base);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// p-adic valuation of a residue, capped at `n` (v(0) = n).
    pub fn val(&self, a: u64) -> u32 {
        if a == 0 {
            return self.n;
        }
        let mut v = 0;
        let mut a = a;
        while a % self.p == 0 {
            a /= self.p;
            v += 1;
        }
        v
    }

    /// Inverse of a unit. Panics on non-units.
    pub fn inv(&self, a: u64) -> u64 {
        assert!(a % self.p != 0, "inverting non-unit {} mod {}^{}", a, self.p, self.n);
        let mut x = inv_mod_prime(a % self.p, self.p);
        let m = self.modulus() as u128;
        let a = a as u128;
        // Newton lifting doubles the valid digits each round
        for _ in 0..self.n.ilog2() + 2 {
            let ax = (a * x as u128) % m;
            let two_minus = (2 + m - ax) % m;
            x = ((x as u128 * two_minus) % m) as u64;
        }
        debug_assert_eq!(self.mul(x, a as u64), 1);
        x
    }

    /// Exact division: `a / b` where `v_p(b) <= v_p(a)`. The quotient is
    /// well defined modulo p^(n - v_p(b)); the caller owns that bookkeeping.
    pub fn div_exact(&self, a: u64, b: u64) -> u64 {
        let vb = self.val(b);
        if vb == 0 {
            return self.mul(a, self.inv(b));
        }
        assert!(self.val(a) >= vb, "inexact division {a}/{b} mod {}^{}", self.p, self.n);
        let pv = self.p.pow(vb);
        let lower = self.lowered_to(self.n - vb);
        lower.mul(a / pv, lower.inv(b / pv))
    }

    /// Divide by p^k, requiring exact divisibility of the representative.
    pub fn div_pow_p(&self, a: u64, k: u32) -> Result<u64, ()> {
        if k == 0 {
            return Ok(a);
        }
        let pk = self.p.pow(k);
        if a % pk != 0 {
            return Err(());
        }
        Ok(a / pk)
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn inv_mod_prime(a: u64, p: u64) -> u64 {
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (p as i64, a as i64);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    assert!(r == 1, "{} not invertible mod {}", a, p);
    (((t % p as i64) + p as i64) % p as i64) as u64
}

/// v_p(k!) by Legendre's formula.
pub fn factorial_val(p: u64, k: u64) -> u64 {
    let mut total = 0;
    let mut q = p;
    while q <= k {
        total += k / q;
        match q.checked_mul(p) {
            Some(next) => q = next,
            None => break,
        }
    }
    total
}

/// Splitmix64: small deterministic generator for sampled checks. The stream
/// is fixed by the seed and never depends on platform or crate versions.
#[derive(Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform-ish in [0, bound).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        self.next_u64() % bound
    }

    pub fn residue(&mut self, prec: &Prec) -> u64 {
        self.below(prec.modulus())
    }
}
