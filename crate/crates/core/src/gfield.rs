//! Finite fields GF(p^n).
//!
//! Elements are dense indices `0..q`. Index `i` corresponds to the
//! polynomial `c_0 + c_1 x + ... + c_{n-1} x^{n-1}` whose coefficients are
//! the base-`p` digits of `i` (least significant digit first), so `0` is the
//! additive identity and `1` the multiplicative identity. Arithmetic is
//! reduced modulo the lexicographically least monic irreducible polynomial
//! of degree `n`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest field order accepted by [`Field::new`].
pub const MAX_FIELD_ORDER: u64 = 1 << 20;

/// Fields up to this order get full addition and multiplication tables.
const TABLE_LIMIT: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("field order {p}^{n} exceeds 2^20")]
    OrderTooLarge { p: u64, n: u32 },
    #[error("exponent must be at least 1")]
    ZeroExponent,
    #[error("element {elem} out of range for GF({q})")]
    IndexOutOfRange { elem: u32, q: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// Deterministic trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut f = 3u64;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

/// Smallest prime factor of `n >= 2`.
pub fn smallest_prime_factor(n: u64) -> u64 {
    debug_assert!(n >= 2);
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut f = 3u64;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return f;
        }
        f += 2;
    }
    n
}

/// A prime power `q = p^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrimePower {
    p: u64,
    n: u32,
}

impl PrimePower {
    pub fn new(p: u64, n: u32) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if n == 0 {
            return Err(FieldError::ZeroExponent);
        }
        match p.checked_pow(n) {
            Some(q) if q <= MAX_FIELD_ORDER => Ok(PrimePower { p, n }),
            _ => Err(FieldError::OrderTooLarge { p, n }),
        }
    }

    /// Recognize `q` as a prime power by trial factorization.
    pub fn from_order(q: u64) -> Result<Self, FieldError> {
        Self::detect(q).ok_or(FieldError::NotPrimePower(q))
    }

    /// Like [`PrimePower::from_order`] but returns `None` for non prime powers
    /// and for orders above 2^20.
    pub fn detect(q: u64) -> Option<Self> {
        if !(2..=MAX_FIELD_ORDER).contains(&q) {
            return None;
        }
        let p = smallest_prime_factor(q);
        let mut rest = q;
        let mut n = 0u32;
        while rest.is_multiple_of(p) {
            rest /= p;
            n += 1;
        }
        (rest == 1).then_some(PrimePower { p, n })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.n)
    }
}

impl fmt::Display for PrimePower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 1 {
            write!(f, "{}", self.p)
        } else {
            write!(f, "{}^{}", self.p, self.n)
        }
    }
}

struct Tables {
    add: Vec<u32>,
    mul: Vec<u32>,
}

/// The finite field GF(p^n) over dense element indices.
pub struct Field {
    order: PrimePower,
    q: u32,
    /// Low coefficients `c_0..c_{n-1}` of the monic modulus.
    modulus: Vec<u32>,
    tables: Option<Tables>,
    inv: Vec<u32>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("order", &self.order)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl Field {
    pub fn new(p: u64, n: u32) -> Result<Self, FieldError> {
        Ok(Self::from_prime_power(PrimePower::new(p, n)?))
    }

    pub fn from_prime_power(order: PrimePower) -> Self {
        let q = order.q() as u32;
        let p = order.p() as u32;
        let modulus = least_irreducible(p, order.n());
        let mut field = Field {
            order,
            q,
            modulus,
            tables: None,
            inv: Vec::new(),
        };
        if u64::from(q) <= TABLE_LIMIT {
            let qs = q as usize;
            let mut add = vec![0u32; qs * qs];
            let mut mul = vec![0u32; qs * qs];
            for a in 0..q {
                for b in 0..q {
                    add[a as usize * qs + b as usize] = field.poly_add(a, b);
                    mul[a as usize * qs + b as usize] = field.poly_mul(a, b);
                }
            }
            field.tables = Some(Tables { add, mul });
        }
        // a^(q-2) = a^-1 in the multiplicative group
        let mut inv = vec![0u32; q as usize];
        for a in 1..q {
            inv[a as usize] = field.pow_raw(a, u64::from(q) - 2);
        }
        field.inv = inv;
        field
    }

    pub fn order(&self) -> PrimePower {
        self.order
    }

    /// Number of elements.
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn characteristic(&self) -> u32 {
        self.order.p() as u32
    }

    /// Coefficients of the modulus, constant term first, including the
    /// leading 1.
    pub fn modulus(&self) -> Vec<u32> {
        let mut m = self.modulus.clone();
        m.push(1);
        m
    }

    pub fn elements(&self) -> std::ops::Range<u32> {
        0..self.q
    }

    fn check(&self, a: u32) -> Result<(), FieldError> {
        if a < self.q {
            Ok(())
        } else {
            Err(FieldError::IndexOutOfRange {
                elem: a,
                q: u64::from(self.q),
            })
        }
    }

    pub fn add(&self, a: u32, b: u32) -> Result<u32, FieldError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.add_raw(a, b))
    }

    pub fn sub(&self, a: u32, b: u32) -> Result<u32, FieldError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.add_raw(a, self.neg_raw(b)))
    }

    pub fn neg(&self, a: u32) -> Result<u32, FieldError> {
        self.check(a)?;
        Ok(self.neg_raw(a))
    }

    pub fn mul(&self, a: u32, b: u32) -> Result<u32, FieldError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul_raw(a, b))
    }

    pub fn inv(&self, a: u32) -> Result<u32, FieldError> {
        self.check(a)?;
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.inv[a as usize])
    }

    /// Quadratic character: 0 for zero, 1 for nonzero squares, -1 otherwise.
    /// Only meaningful for odd characteristic.
    pub fn quadratic_character(&self) -> Vec<i8> {
        let mut chi = vec![-1i8; self.q as usize];
        chi[0] = 0;
        for a in 1..self.q {
            chi[self.mul_raw(a, a) as usize] = 1;
        }
        chi
    }

    pub(crate) fn add_raw(&self, a: u32, b: u32) -> u32 {
        match &self.tables {
            Some(t) => t.add[a as usize * self.q as usize + b as usize],
            None => self.poly_add(a, b),
        }
    }

    pub(crate) fn mul_raw(&self, a: u32, b: u32) -> u32 {
        match &self.tables {
            Some(t) => t.mul[a as usize * self.q as usize + b as usize],
            None => self.poly_mul(a, b),
        }
    }

    pub(crate) fn neg_raw(&self, a: u32) -> u32 {
        let p = self.characteristic();
        let digits: Vec<u32> = self.digits(a).into_iter().map(|c| (p - c) % p).collect();
        self.index(&digits)
    }

    fn pow_raw(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1u32;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul_raw(acc, base);
            }
            base = self.mul_raw(base, base);
            exp >>= 1;
        }
        acc
    }

    fn digits(&self, mut a: u32) -> Vec<u32> {
        let p = self.characteristic();
        let n = self.order.n() as usize;
        let mut out = vec![0u32; n];
        for d in out.iter_mut() {
            *d = a % p;
            a /= p;
        }
        out
    }

    fn index(&self, digits: &[u32]) -> u32 {
        let p = self.characteristic();
        digits.iter().rev().fold(0u32, |acc, &c| acc * p + c)
    }

    fn poly_add(&self, a: u32, b: u32) -> u32 {
        let p = self.characteristic();
        let da = self.digits(a);
        let db = self.digits(b);
        let sum: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
        self.index(&sum)
    }

    fn poly_mul(&self, a: u32, b: u32) -> u32 {
        let p = u64::from(self.characteristic());
        let n = self.order.n() as usize;
        let da = self.digits(a);
        let db = self.digits(b);
        let mut prod = vec![0u64; 2 * n];
        for (i, &x) in da.iter().enumerate() {
            for (j, &y) in db.iter().enumerate() {
                prod[i + j] = (prod[i + j] + u64::from(x) * u64::from(y)) % p;
            }
        }
        // x^n = -(c_0 + ... + c_{n-1} x^{n-1})
        for deg in (n..2 * n).rev() {
            let lead = prod[deg];
            if lead == 0 {
                continue;
            }
            prod[deg] = 0;
            for (i, &c) in self.modulus.iter().enumerate() {
                let sub = lead * u64::from(c) % p;
                let slot = &mut prod[deg - n + i];
                *slot = (*slot + p - sub) % p;
            }
        }
        let low: Vec<u32> = prod[..n].iter().map(|&c| c as u32).collect();
        self.index(&low)
    }
}

/// Lexicographically least monic irreducible polynomial of degree `n` over
/// GF(p), as its low coefficients (constant term first). Candidates are
/// ordered by the base-`p` index of their low coefficients.
fn least_irreducible(p: u32, n: u32) -> Vec<u32> {
    if n == 1 {
        return vec![0];
    }
    let count = (p as u64).pow(n);
    (0..count)
        .map(|idx| to_digits(idx, p, n as usize))
        .find(|low| {
            let mut f = low.clone();
            f.push(1);
            is_irreducible(&f, p)
        })
        .expect("an irreducible polynomial exists for every degree")
}

fn to_digits(mut idx: u64, p: u32, len: usize) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for d in out.iter_mut() {
        *d = (idx % u64::from(p)) as u32;
        idx /= u64::from(p);
    }
    out
}

/// Trial division by every monic polynomial of degree `1..=deg/2`.
fn is_irreducible(f: &[u32], p: u32) -> bool {
    let deg = f.len() - 1;
    if f[0] == 0 {
        return false;
    }
    for d in 1..=deg / 2 {
        let count = (p as u64).pow(d as u32);
        for idx in 0..count {
            let mut g = to_digits(idx, p, d);
            g.push(1);
            if poly_rem(f, &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

/// Remainder of `f` modulo the monic `g` over GF(p).
fn poly_rem(f: &[u32], g: &[u32], p: u32) -> Vec<u32> {
    let mut r: Vec<u64> = f.iter().map(|&c| u64::from(c)).collect();
    let dg = g.len() - 1;
    let p = u64::from(p);
    while r.len() > dg {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dg;
        if lead != 0 {
            for (i, &c) in g.iter().enumerate() {
                let v = &mut r[shift + i];
                *v = (*v + p - lead * u64::from(c) % p) % p;
            }
        }
        r.pop();
    }
    r.into_iter().map(|c| c as u32).collect()
}
