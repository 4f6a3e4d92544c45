//! Exact rational constants.
//!
//! Values live in a machine-word ratio while they fit and are promoted to a
//! big rational on overflow, so arithmetic never loses exactness.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedMul, One, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug)]
pub enum Number {
    Small(Ratio<i64>),
    Big(BigRational),
}

impl Number {
    pub fn int(n: i64) -> Self {
        Number::Small(Ratio::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Number::Small(Ratio::new(num, den))
    }

    pub fn zero() -> Self {
        Number::int(0)
    }

    pub fn one() -> Self {
        Number::int(1)
    }

    fn from_big(r: BigRational) -> Self {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(n), Some(d)) => Number::Small(Ratio::new_raw(n, d)),
            _ => Number::Big(r),
        }
    }

    pub fn to_big(&self) -> BigRational {
        match self {
            Number::Small(r) => BigRational::new_raw(BigInt::from(*r.numer()), BigInt::from(*r.denom())),
            Number::Big(r) => r.clone(),
        }
    }

    /// Parses a decimal literal such as `12`, `0.25` or `1.5e-3` exactly.
    pub fn from_decimal(lit: &str) -> Option<Self> {
        let (mantissa, exp) = match lit.find(['e', 'E']) {
            Some(pos) => (&lit[..pos], lit[pos + 1..].parse::<i64>().ok()?),
            None => (lit, 0),
        };
        let (int_part, frac_part) = match mantissa.find('.') {
            Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = digits.parse().ok()?;
        let scale = exp - frac_part.len() as i64;
        if scale.unsigned_abs() > 4096 {
            return None;
        }
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
        };
        Some(Number::from_big(value))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Small(r) => r.is_zero(),
            Number::Big(r) => r.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Number::Small(r) => r.is_one(),
            Number::Big(r) => r.is_one(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Number::Small(r) => r.is_negative(),
            Number::Big(r) => r.is_negative(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Number::Small(r) => r.is_integer(),
            Number::Big(r) => r.is_integer(),
        }
    }

    /// The value as an `i64`, if it is an integer that fits.
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Number::Small(r) if r.is_integer() => Some(*r.numer()),
            _ => None,
        }
    }

    pub fn numer_denom(&self) -> (BigInt, BigInt) {
        let b = self.to_big();
        (b.numer().clone(), b.denom().clone())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Small(r) => *r.numer() as f64 / *r.denom() as f64,
            Number::Big(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    pub fn neg(&self) -> Number {
        match self {
            Number::Small(r) if *r.numer() != i64::MIN => Number::Small(-*r),
            _ => Number::from_big(-self.to_big()),
        }
    }

    pub fn add(&self, other: &Number) -> Number {
        if let (Number::Small(a), Number::Small(b)) = (self, other) {
            if let Some(s) = a.checked_add(b) {
                return Number::Small(s);
            }
        }
        Number::from_big(self.to_big() + other.to_big())
    }

    pub fn sub(&self, other: &Number) -> Number {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Number) -> Number {
        if let (Number::Small(a), Number::Small(b)) = (self, other) {
            if let Some(p) = a.checked_mul(b) {
                return Number::Small(p);
            }
        }
        Number::from_big(self.to_big() * other.to_big())
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn recip(&self) -> Option<Number> {
        if self.is_zero() {
            return None;
        }
        match self {
            Number::Small(r) if *r.numer() != i64::MIN => Some(Number::Small(r.recip())),
            _ => Some(Number::from_big(self.to_big().recip())),
        }
    }

    pub fn div(&self, other: &Number) -> Option<Number> {
        other.recip().map(|inv| self.mul(&inv))
    }

    /// Integer power; `None` for `0^negative`.
    pub fn powi(&self, exp: i64) -> Option<Number> {
        if exp < 0 {
            return self.recip()?.powi(-exp);
        }
        let mut result = Number::one();
        let mut base = self.clone();
        let mut e = exp as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Some(result)
    }

    /// Exact rational power when the result is rational, e.g. `(4/9)^(1/2) = 2/3`.
    pub fn pow_exact(&self, exp: &Number) -> Option<Number> {
        if let Some(e) = exp.as_i64() {
            return self.powi(e);
        }
        let (p, q) = exp.numer_denom();
        let q = q.to_u32()?;
        let p = p.to_i64()?;
        if self.is_negative() {
            return None;
        }
        let (n, d) = self.numer_denom();
        let rn = n.nth_root(q);
        let rd = d.nth_root(q);
        if num_traits::pow(rn.clone(), q as usize) != n || num_traits::pow(rd.clone(), q as usize) != d {
            return None;
        }
        Number::from_big(BigRational::new(rn, rd)).powi(p)
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Number::Small(a), Number::Small(b)) => a == b,
            _ => self.to_big() == other.to_big(),
        }
    }
}

impl Eq for Number {}

// Representations are unique: values that fit a machine ratio are always `Small`.
impl std::hash::Hash for Number {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            Number::Small(r) => {
                r.numer().hash(state);
                r.denom().hash(state);
            }
            Number::Big(r) => {
                r.numer().hash(state);
                r.denom().hash(state);
            }
        }
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Number::Small(a), Number::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl From<i64> for Number {
    fn from(n: i64) -> Self {
        Number::int(n)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Small(r) => write!(f, "{r}"),
            Number::Big(r) => write!(f, "{r}"),
        }
    }
}
