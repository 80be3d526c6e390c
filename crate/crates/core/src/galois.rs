//! Exact arithmetic in binary extension fields GF(2^m), 1 <= m <= 16.
//!
//! Elements are polynomial bitmasks over GF(2): bit i holds the coefficient
//! of x^i. Addition is XOR; multiplication is a carry-less shift-and-add
//! reduced modulo an irreducible polynomial. Every operation is a direct bit
//! computation with no lookup tables, so all supported fields share one code
//! path and results are reproducible from the context alone.

use rand::RngCore;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 16;

/// Smallest-bitmask irreducible polynomial with nonzero constant term for
/// each degree m in 1..=16 (index 0 unused). Bit i is the coefficient of
/// x^i, so e.g. 0x13 = x^4 + x + 1. Fixing these makes every seeded run
/// reproducible without naming a polynomial explicitly.
pub const DEFAULT_POLYS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11B, 0x203, 0x409, 0x805, 0x1009, 0x201B, 0x4021,
    0x8003, 0x1002B,
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("extension degree m={m} out of range (1..={MAX_DEGREE})")]
    DegreeOutOfRange { m: u32 },
    #[error("polynomial {poly:#x} does not have degree {expected}")]
    WrongPolyDegree { poly: u32, expected: u32 },
    #[error("polynomial {poly:#x} is reducible (divisible by {factor:#x})")]
    ReduciblePoly { poly: u32, factor: u32 },
    #[error("value {value} out of range for field of size {q}")]
    ValueOutOfRange { value: u32, q: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("operands belong to different field contexts")]
    ContextMismatch,
}

/// Degree of a nonzero GF(2) polynomial bitmask.
fn poly_degree(p: u32) -> u32 {
    debug_assert!(p != 0);
    31 - p.leading_zeros()
}

/// Remainder of polynomial division over GF(2).
fn poly_mod(mut a: u32, b: u32) -> u32 {
    let db = poly_degree(b);
    while a != 0 && poly_degree(a) >= db {
        a ^= b << (poly_degree(a) - db);
    }
    a
}

/// Trial division by every polynomial of degree 1..=deg/2. Returns the first
/// factor found, or None when `poly` is irreducible.
fn find_factor(poly: u32) -> Option<u32> {
    let deg = poly_degree(poly);
    for d in 1..=deg / 2 {
        for q in (1u32 << d)..(1u32 << (d + 1)) {
            if poly_mod(poly, q) == 0 {
                return Some(q);
            }
        }
    }
    None
}

/// A binary extension field GF(2^m) together with its reduction polynomial.
///
/// Immutable and `Copy`; share it freely across threads. All arithmetic on
/// raw element values flows through the methods here.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct FieldContext {
    m: u32,
    poly: u32,
}

impl FieldContext {
    /// Field with the documented default polynomial for degree `m`.
    pub fn new(m: u32) -> Result<Self, FieldError> {
        if m == 0 || m > MAX_DEGREE {
            return Err(FieldError::DegreeOutOfRange { m });
        }
        Ok(Self {
            m,
            poly: DEFAULT_POLYS[m as usize],
        })
    }

    /// Field with an explicit reduction polynomial, verified irreducible of
    /// degree exactly `m`.
    pub fn with_poly(m: u32, poly: u32) -> Result<Self, FieldError> {
        if m == 0 || m > MAX_DEGREE {
            return Err(FieldError::DegreeOutOfRange { m });
        }
        if poly >> m != 1 {
            return Err(FieldError::WrongPolyDegree { poly, expected: m });
        }
        if let Some(factor) = find_factor(poly) {
            return Err(FieldError::ReduciblePoly { poly, factor });
        }
        Ok(Self { m, poly })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Field size q = 2^m.
    pub fn q(&self) -> u32 {
        1 << self.m
    }

    pub fn reduction_poly(&self) -> u32 {
        self.poly
    }

    /// Sum of two elements (XOR; every element is its own additive inverse).
    pub fn add(&self, a: u32, b: u32) -> u32 {
        debug_assert!(a < self.q() && b < self.q());
        a ^ b
    }

    /// Product modulo the reduction polynomial, computed shift-and-add with
    /// reduction after every shift so intermediates stay below 2^(m+1).
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        debug_assert!(a < self.q() && b < self.q());
        let mut a = a;
        let mut b = b;
        let mut acc = 0;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if (a >> self.m) & 1 == 1 {
                a ^= self.poly;
            }
        }
        acc
    }

    /// `a` raised to `e` by square-and-multiply.
    pub fn pow(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a;
        let mut acc = 1;
        while e != 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via a^(q-2); errors on zero.
    pub fn inv(&self, a: u32) -> Result<u32, FieldError> {
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(a, u64::from(self.q()) - 2))
    }

    /// One element drawn uniformly from the field. q is a power of two, so a
    /// mask of the raw stream is exactly uniform.
    pub fn uniform(&self, rng: &mut impl RngCore) -> u32 {
        rng.next_u32() & (self.q() - 1)
    }

    /// Wrap a raw value as a context-bound element.
    pub fn element(&self, value: u32) -> Result<FieldElement, FieldError> {
        if value >= self.q() {
            return Err(FieldError::ValueOutOfRange { value, q: self.q() });
        }
        Ok(FieldElement { value, ctx: *self })
    }
}

// Contexts appear in configs and reports as {"m": 4, "poly": "0x13"}.
#[derive(Serialize, Deserialize)]
struct ContextRepr {
    m: u32,
    poly: String,
}

impl Serialize for FieldContext {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ContextRepr {
            m: self.m,
            poly: format!("{:#x}", self.poly),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FieldContext {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ContextRepr::deserialize(deserializer)?;
        let digits = repr
            .poly
            .strip_prefix("0x")
            .or_else(|| repr.poly.strip_prefix("0X"))
            .unwrap_or(&repr.poly);
        let poly = u32::from_str_radix(digits, 16)
            .map_err(|e| D::Error::custom(format!("bad polynomial {:?}: {e}", repr.poly)))?;
        FieldContext::with_poly(repr.m, poly).map_err(D::Error::custom)
    }
}

/// An element of a specific GF(2^m): a value in [0, q) bound to its context.
/// Mixing elements from different contexts is rejected.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct FieldElement {
    value: u32,
    ctx: FieldContext,
}

impl FieldElement {
    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn context(&self) -> FieldContext {
        self.ctx
    }

    fn same_context(&self, rhs: &FieldElement) -> Result<(), FieldError> {
        if self.ctx != rhs.ctx {
            return Err(FieldError::ContextMismatch);
        }
        Ok(())
    }

    pub fn add(&self, rhs: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_context(rhs)?;
        Ok(FieldElement {
            value: self.ctx.add(self.value, rhs.value),
            ctx: self.ctx,
        })
    }

    pub fn mul(&self, rhs: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_context(rhs)?;
        Ok(FieldElement {
            value: self.ctx.mul(self.value, rhs.value),
            ctx: self.ctx,
        })
    }

    pub fn inv(&self) -> Result<FieldElement, FieldError> {
        Ok(FieldElement {
            value: self.ctx.inv(self.value)?,
            ctx: self.ctx,
        })
    }
}

impl std::fmt::Display for FieldElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Carry-less product without reduction; independent of `FieldContext::mul`.
    fn clmul(a: u32, b: u32) -> u64 {
        let mut acc = 0u64;
        for i in 0..32 {
            if (b >> i) & 1 == 1 {
                acc ^= u64::from(a) << i;
            }
        }
        acc
    }

    /// Oracle: p (degree m) is reducible iff it is a product of two smaller
    /// nonconstant polynomials. Enumerates products directly.
    fn reducible_by_products(p: u32) -> bool {
        let m = poly_degree(p);
        for da in 1..m {
            let db = m - da;
            for a in (1u32 << da)..(1u32 << (da + 1)) {
                for b in (1u32 << db)..(1u32 << (db + 1)) {
                    if clmul(a, b) == u64::from(p) {
                        return true;
                    }
                }
            }
        }
        false
    }

    #[test]
    fn default_polys_have_right_degree_and_are_irreducible() {
        for m in 1..=MAX_DEGREE {
            let poly = DEFAULT_POLYS[m as usize];
            assert_eq!(poly >> m, 1, "m={m}");
            assert_eq!(poly & 1, 1, "m={m}: constant term");
            assert!(find_factor(poly).is_none(), "m={m}");
        }
    }

    #[test]
    fn default_polys_are_smallest_for_small_degrees() {
        // Product-enumeration oracle, affordable for m <= 8, cross-checks both
        // irreducibility of the table entry and reducibility of everything
        // smaller (restricted to nonzero constant term).
        for m in 1..=8u32 {
            let table = DEFAULT_POLYS[m as usize];
            assert!(!reducible_by_products(table), "m={m}");
            for p in ((1u32 << m) | 1..table).step_by(2) {
                assert!(reducible_by_products(p), "m={m} candidate {p:#x}");
            }
        }
    }

    #[test]
    fn make_field_validates_inputs() {
        assert!(FieldContext::new(1).is_ok());
        assert!(FieldContext::new(16).is_ok());
        assert!(matches!(
            FieldContext::new(0),
            Err(FieldError::DegreeOutOfRange { m: 0 })
        ));
        assert!(matches!(
            FieldContext::new(17),
            Err(FieldError::DegreeOutOfRange { m: 17 })
        ));
        // x^2 + x + 1 is irreducible over GF(2)
        assert!(FieldContext::with_poly(2, 0x7).is_ok());
        // x^2 + 1 = (x + 1)^2
        assert!(matches!(
            FieldContext::with_poly(2, 0x5),
            Err(FieldError::ReduciblePoly { .. })
        ));
        // degree mismatch
        assert!(matches!(
            FieldContext::with_poly(2, 0xB),
            Err(FieldError::WrongPolyDegree { .. })
        ));
    }

    #[test]
    fn gf2_is_xor_and_and() {
        let f = FieldContext::new(1).unwrap();
        assert_eq!(f.q(), 2);
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(f.add(a, b), a ^ b);
                assert_eq!(f.mul(a, b), a & b);
            }
        }
    }

    #[test]
    fn gf4_examples() {
        // GF(4) with x^2 + x + 1: elements 0, 1, x=2, x+1=3.
        let f = FieldContext::with_poly(2, 0x7).unwrap();
        assert_eq!(f.add(2, 3), 1); // x + (x+1) = 1
        assert_eq!(f.mul(2, 2), 3); // x * x = x^2 = x + 1
        assert_eq!(f.inv(2).unwrap(), 3); // x * (x+1) = x^2 + x = 1
        assert_eq!(f.inv(1).unwrap(), 1);
        assert!(matches!(f.inv(0), Err(FieldError::ZeroInverse)));
    }

    #[test]
    fn add_is_involutive_and_has_identity() {
        for m in [1, 4, 8] {
            let f = FieldContext::new(m).unwrap();
            for a in 0..f.q().min(64) {
                assert_eq!(f.add(a, a), 0);
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                assert_eq!(f.mul(a, 0), 0);
            }
        }
    }

    fn assert_axioms(f: &FieldContext, a: u32, b: u32, c: u32) {
        assert_eq!(f.add(a, b), f.add(b, a));
        assert_eq!(f.mul(a, b), f.mul(b, a));
        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        assert_eq!(f.add(a, a), 0);
        if a != 0 {
            assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
    }

    #[test]
    fn field_axioms_exhaustive_small() {
        for m in 1..=4 {
            let f = FieldContext::new(m).unwrap();
            for a in 0..f.q() {
                for b in 0..f.q() {
                    for c in 0..f.q() {
                        assert_axioms(&f, a, b, c);
                    }
                }
            }
        }
    }

    #[test]
    fn field_axioms_random_large() {
        for m in 5..=16 {
            let f = FieldContext::new(m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ u64::from(m));
            for _ in 0..10_000 {
                let (a, b, c) = (
                    f.uniform(&mut rng),
                    f.uniform(&mut rng),
                    f.uniform(&mut rng),
                );
                assert_axioms(&f, a, b, c);
            }
        }
    }

    #[test]
    fn multiplication_table_zero_count_is_2q_minus_1() {
        // A field has no zero divisors, so the only zero products are the two
        // axes of the table: exactly 2q - 1 entries.
        for m in 1..=8 {
            let f = FieldContext::new(m).unwrap();
            let q = f.q();
            let mut zeros = 0u64;
            for a in 0..q {
                for b in 0..q {
                    let p = f.mul(a, b);
                    if p == 0 {
                        zeros += 1;
                        assert!(a == 0 || b == 0, "zero divisor {a},{b} in GF(2^{m})");
                    }
                }
            }
            assert_eq!(zeros, 2 * u64::from(q) - 1, "m={m}");
        }
    }

    #[test]
    fn uniform_gf2_fraction_within_3_sigma() {
        let f = FieldContext::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let ones: u64 = (0..n).map(|_| u64::from(f.uniform(&mut rng))).sum();
        let mean = 0.5 * n as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!(
            (ones as f64 - mean).abs() < 3.0 * sigma,
            "ones={ones} out of {n}"
        );
    }

    #[test]
    fn uniform_gf4_chi_square() {
        let f = FieldContext::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000u64;
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[f.uniform(&mut rng) as usize] += 1;
        }
        let expected = n as f64 / 4.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // chi-square critical value, 3 degrees of freedom, alpha = 0.01
        assert!(stat < 11.345, "chi-square statistic {stat}");
    }

    #[test]
    fn uniform_is_deterministic_per_seed() {
        let f = FieldContext::new(8).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| f.uniform(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(99), draw(99));
        assert_ne!(draw(99), draw(100));
    }

    #[test]
    fn elements_reject_context_mixing() {
        let f4 = FieldContext::new(2).unwrap();
        let f8 = FieldContext::new(3).unwrap();
        let a = f4.element(3).unwrap();
        let b = f8.element(3).unwrap();
        assert_eq!(a.add(&b), Err(FieldError::ContextMismatch));
        assert_eq!(a.mul(&b), Err(FieldError::ContextMismatch));
        assert!(matches!(
            f4.element(4),
            Err(FieldError::ValueOutOfRange { value: 4, q: 4 })
        ));
        let c = f4.element(2).unwrap();
        assert_eq!(a.add(&c).unwrap().value(), 1);
    }

    #[test]
    fn context_serde_round_trip() {
        let f = FieldContext::with_poly(4, 0x13).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"m":4,"poly":"0x13"}"#);
        let back: FieldContext = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<FieldContext>(r#"{"m":2,"poly":"0x5"}"#).is_err());
    }
}
