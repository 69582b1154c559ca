//! Arithmetic in GF(2^128) modulo x^128 + x^7 + x^2 + x + 1, used for the
//! OPPRF hint polynomials.

use std::ops::{Add, Mul};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Gf128(pub u128);

impl Gf128 {
    pub const ZERO: Gf128 = Gf128(0);
    pub const ONE: Gf128 = Gf128(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn square(self) -> Gf128 {
        self * self
    }

    /// Multiplicative inverse via `a^(2^128 - 2)`; zero maps to zero.
    pub fn inverse(self) -> Gf128 {
        // 2^128 - 2 = 0b111...110: square-and-multiply over 127 ones then a
        // final squaring.
        let mut acc = self;
        for _ in 0..126 {
            acc = acc.square() * self;
        }
        acc.square()
    }
}

impl Add for Gf128 {
    type Output = Gf128;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf128) -> Gf128 {
        Gf128(self.0 ^ rhs.0)
    }
}

impl Mul for Gf128 {
    type Output = Gf128;
    fn mul(self, rhs: Gf128) -> Gf128 {
        Gf128(mul(self.0, rhs.0))
    }
}

fn reduce(lo: u128, hi: u128) -> u128 {
    // x^128 = x^7 + x^2 + x + 1. Fold the high half twice; the second fold
    // only carries the 7 bits shifted past position 127.
    let fold = |h: u128| h ^ (h << 1) ^ (h << 2) ^ (h << 7);
    let spill = (hi >> 127) ^ (hi >> 126) ^ (hi >> 121);
    lo ^ fold(hi) ^ fold(spill)
}

pub fn mul_soft(a: u128, b: u128) -> u128 {
    let (mut lo, mut hi) = (0u128, 0u128);
    for i in 0..128 {
        if (b >> i) & 1 == 1 {
            lo ^= a << i;
            if i > 0 {
                hi ^= a >> (128 - i);
            }
        }
    }
    reduce(lo, hi)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "pclmulqdq", enable = "sse2")]
unsafe fn mul_clmul(a: u128, b: u128) -> u128 {
    use std::arch::x86_64::*;
    let x = _mm_set_epi64x((a >> 64) as i64, a as i64);
    let y = _mm_set_epi64x((b >> 64) as i64, b as i64);
    let ll = _mm_clmulepi64_si128(x, y, 0x00);
    let hh = _mm_clmulepi64_si128(x, y, 0x11);
    let lh = _mm_clmulepi64_si128(x, y, 0x10);
    let hl = _mm_clmulepi64_si128(x, y, 0x01);
    let mid = _mm_xor_si128(lh, hl);
    let to_u128 = |v: __m128i| -> u128 {
        let lo = _mm_cvtsi128_si64(v) as u64 as u128;
        let hi = _mm_cvtsi128_si64(_mm_unpackhi_epi64(v, v)) as u64 as u128;
        lo | (hi << 64)
    };
    let mid = to_u128(mid);
    let lo = to_u128(ll) ^ (mid << 64);
    let hi = to_u128(hh) ^ (mid >> 64);
    reduce(lo, hi)
}

pub fn mul(a: u128, b: u128) -> u128 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("pclmulqdq") {
            // SAFETY: the required CPU feature was detected at runtime.
            return unsafe { mul_clmul(a, b) };
        }
    }
    mul_soft(a, b)
}

/// Inverts every non-zero element in place with a single field inversion.
pub fn batch_invert(xs: &mut [Gf128]) {
    let mut prefix = Vec::with_capacity(xs.len());
    let mut acc = Gf128::ONE;
    for &x in xs.iter() {
        prefix.push(acc);
        if !x.is_zero() {
            acc = acc * x;
        }
    }
    let mut inv = acc.inverse();
    for (x, p) in xs.iter_mut().zip(prefix).rev() {
        if x.is_zero() {
            continue;
        }
        let next = inv * *x;
        *x = inv * p;
        inv = next;
    }
}

/// Coefficients (lowest degree first) of the unique polynomial of degree
/// below `xs.len()` through the given points. Returns `None` when two `xs`
/// coincide.
pub fn interpolate(xs: &[Gf128], ys: &[Gf128]) -> Option<Vec<Gf128>> {
    let k = xs.len();
    assert_eq!(k, ys.len());
    if k == 0 {
        return Some(Vec::new());
    }
    // Z(x) = prod (x - x_i), degree k.
    let mut z = vec![Gf128::ZERO; k + 1];
    z[0] = Gf128::ONE;
    for (deg, &xi) in xs.iter().enumerate() {
        for d in (0..=deg + 1).rev() {
            let lower = if d > 0 { z[d - 1] } else { Gf128::ZERO };
            z[d] = lower + z[d] * xi;
        }
    }
    let mut numerators = Vec::with_capacity(k);
    let mut denoms = Vec::with_capacity(k);
    for &xi in xs {
        // Synthetic division of Z by (x - xi).
        let mut q = vec![Gf128::ZERO; k];
        let mut carry = Gf128::ZERO;
        for d in (0..k).rev() {
            carry = z[d + 1] + carry * xi;
            q[d] = carry;
        }
        let d = eval(&q, xi);
        if d.is_zero() {
            return None;
        }
        numerators.push(q);
        denoms.push(d);
    }
    batch_invert(&mut denoms);
    let mut coeffs = vec![Gf128::ZERO; k];
    for ((q, inv), &y) in numerators.iter().zip(&denoms).zip(ys) {
        let w = y * *inv;
        for (c, &qd) in coeffs.iter_mut().zip(q) {
            *c = *c + w * qd;
        }
    }
    Some(coeffs)
}

pub fn eval(coeffs: &[Gf128], x: Gf128) -> Gf128 {
    coeffs.iter().rev().fold(Gf128::ZERO, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference: schoolbook multiply with bit-by-bit reduction.
    fn mul_ref(a: u128, b: u128) -> u128 {
        let mut acc = 0u128;
        let mut a = a;
        for i in 0..128 {
            if (b >> i) & 1 == 1 {
                acc ^= a;
            }
            let carry = a >> 127;
            a <<= 1;
            if carry == 1 {
                a ^= 0x87;
            }
        }
        acc
    }

    proptest! {
        #[test]
        fn backends_agree(a: u128, b: u128) {
            prop_assert_eq!(mul_soft(a, b), mul_ref(a, b));
            prop_assert_eq!(mul(a, b), mul_ref(a, b));
        }

        #[test]
        fn inverse_is_inverse(a in 1u128..) {
            prop_assert_eq!(Gf128(a) * Gf128(a).inverse(), Gf128::ONE);
        }

        #[test]
        fn interpolation_hits_points(pts in proptest::collection::vec((any::<u128>(), any::<u128>()), 1..12)) {
            let mut xs: Vec<Gf128> = pts.iter().map(|p| Gf128(p.0)).collect();
            xs.sort_by_key(|x| x.0);
            xs.dedup();
            let ys: Vec<Gf128> = pts.iter().take(xs.len()).map(|p| Gf128(p.1)).collect();
            let c = interpolate(&xs, &ys).unwrap();
            prop_assert_eq!(c.len(), xs.len());
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert_eq!(eval(&c, *x), *y);
            }
        }
    }

    #[test]
    fn known_products() {
        assert_eq!(mul(1 << 127, 2), 0x87);
        assert_eq!(mul(3, 3), 5);
        assert_eq!(Gf128::ZERO.inverse(), Gf128::ZERO);
    }

    #[test]
    fn batch_invert_skips_zero() {
        let mut xs = vec![Gf128(3), Gf128::ZERO, Gf128(0xdead_beef)];
        batch_invert(&mut xs);
        assert_eq!(xs[0], Gf128(3).inverse());
        assert_eq!(xs[1], Gf128::ZERO);
        assert_eq!(xs[2], Gf128(0xdead_beef).inverse());
    }

    #[test]
    fn repeated_abscissa_fails() {
        assert!(interpolate(&[Gf128(5), Gf128(5)], &[Gf128(1), Gf128(2)]).is_none());
    }
}
