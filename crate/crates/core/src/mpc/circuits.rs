//! Composite gates: conversions, comparisons, division and selection.

use super::{Arith, Bool, Engine};
use crate::error::Result;
use crate::mpc::Party;

const SHIFTS: [u32; 6] = [1, 2, 4, 8, 16, 32];

impl Engine<'_> {
    /// Bit 0 of each word as an arithmetic 0/1 value.
    pub fn bits_to_arith(&mut self, b: &Bool) -> Result<Arith> {
        // x = u + v - 2uv where u, v are the parties' bits; uv is one product
        // of two inputs each known to one side.
        let mine: Vec<u64> = b.0.iter().map(|w| w & 1).collect();
        let zeros = vec![0u64; mine.len()];
        let (x, y) = if self.is_alice() {
            (Arith(mine.clone()), Arith(zeros))
        } else {
            (Arith(zeros), Arith(mine.clone()))
        };
        let uv = self.mul(&x, &y)?;
        Ok(Arith(
            mine.iter()
                .zip(&uv.0)
                .map(|(&m, &p)| m.wrapping_sub(p.wrapping_mul(2)))
                .collect(),
        ))
    }

    /// Arithmetic value of the low `bits` bits of each word.
    pub fn b2a(&mut self, x: &Bool, bits: u32) -> Result<Arith> {
        let bits = bits as usize;
        let spread = Bool(x.0.iter().flat_map(|&w| (0..bits).map(move |j| (w >> j) & 1)).collect());
        let a = self.bits_to_arith(&spread)?;
        Ok(Arith(
            a.0.chunks(bits.max(1))
                .map(|c| {
                    c.iter()
                        .enumerate()
                        .fold(0u64, |s, (j, &v)| s.wrapping_add(v.wrapping_shl(j as u32)))
                })
                .take(x.len())
                .collect(),
        ))
    }

    /// Group generates of a Kogge-Stone prefix tree: bit `i` of the result is
    /// the carry out of position `i`.
    fn carries(&mut self, mut g: Bool, mut p: Bool) -> Result<Bool> {
        let n = g.len();
        for (k, &s) in SHIFTS.iter().enumerate() {
            if k + 1 == SHIFTS.len() {
                let t = self.and(&p, &g.shl(s))?;
                g = g.xor(&t);
            } else {
                let lhs = Bool::concat(&[&p, &p]);
                let rhs = Bool::concat(&[&g.shl(s), &p.shl(s)]);
                let t = self.and(&lhs, &rhs)?;
                // Generate and propagate of a group are never both set, so
                // OR reduces to XOR.
                g = g.xor(&t.slice(0..n));
                p = t.slice(n..2 * n);
            }
        }
        Ok(g)
    }

    /// Sum of two shared words modulo 2^64.
    pub fn add_bool(&mut self, x: &Bool, y: &Bool) -> Result<Bool> {
        let g = self.and(x, y)?;
        let p = x.xor(y);
        let c = self.carries(g, p.clone())?;
        Ok(p.xor(&c.shl(1)))
    }

    /// Additive to XOR sharing of the same 64-bit values.
    pub fn a2b(&mut self, x: &Arith) -> Result<Bool> {
        let zeros = Bool(vec![0; x.len()]);
        let mine = Bool(x.0.clone());
        let (a, b) = if self.is_alice() { (mine, zeros) } else { (zeros, mine) };
        self.add_bool(&a, &b)
    }

    /// `x - y` on words and, in every bit of the second result, whether
    /// `x >= y` as unsigned integers.
    fn sub_ge(&mut self, x: &Bool, y: &Bool) -> Result<(Bool, Bool)> {
        let ny = self.not(y);
        let g = self.and(x, &ny)?;
        let p = x.xor(&ny);
        // Carry-in of one folded into position 0.
        let g0 = Bool(g.0.iter().zip(&p.0).map(|(g, p)| g ^ (p & 1)).collect());
        let p0 = p.mask(!1);
        let c = self.carries(g0, p0)?;
        let diff = self.xor_const(&p.xor(&c.shl(1)), 1);
        Ok((diff, c.spread_top()))
    }

    /// `[x < y]` in bit 0 for unsigned shared words.
    pub fn lt_bool(&mut self, x: &Bool, y: &Bool) -> Result<Bool> {
        let ny = self.not(y);
        let g = self.and(x, &ny)?;
        let p = x.xor(&ny);
        let g0 = Bool(g.0.iter().zip(&p.0).map(|(g, p)| g ^ (p & 1)).collect());
        let c = self.carries(g0, p.mask(!1))?;
        Ok(self.not_bit(&c.shr(63)))
    }

    /// `[x < y]` in bit 0 for unsigned 64-bit ring elements.
    pub fn lt(&mut self, x: &Arith, y: &Arith) -> Result<Bool> {
        let n = x.len();
        let b = self.a2b(&Arith::concat(&[x, y]))?;
        self.lt_bool(&b.slice(0..n), &b.slice(n..2 * n))
    }

    /// `[value == 0]` in bit 0, where each value spans `words` consecutive
    /// words.
    pub fn eq_zero(&mut self, z: &Bool, words: usize) -> Result<Bool> {
        let mut w = self.not(z);
        let mut width = words;
        while width > 1 {
            let half = width / 2;
            let n = w.len() / width;
            let (mut lhs, mut rhs) = (Vec::with_capacity(n * half), Vec::with_capacity(n * half));
            let mut rest = Vec::new();
            for chunk in w.0.chunks(width) {
                lhs.extend_from_slice(&chunk[..half]);
                rhs.extend_from_slice(&chunk[half..2 * half]);
                rest.push(chunk.get(2 * half).copied());
            }
            let t = self.and(&Bool(lhs), &Bool(rhs))?;
            let mut next = Vec::with_capacity(n * (half + 1));
            for (i, r) in rest.into_iter().enumerate() {
                next.extend_from_slice(&t.0[i * half..(i + 1) * half]);
                next.extend(r);
            }
            width = half + (width % 2);
            w = Bool(next);
        }
        for s in SHIFTS.iter().rev() {
            w = self.and(&w, &w.shr(*s))?;
        }
        Ok(w.mask(1))
    }

    /// `[x == y]` in bit 0 for 128-bit values where `x` is this party's own
    /// value and `y` the peer's.
    pub fn eq_u128_private(&mut self, mine: &[u128]) -> Result<Bool> {
        let words: Vec<u64> = mine.iter().flat_map(|&v| [v as u64, (v >> 64) as u64]).collect();
        self.eq_zero(&Bool(words), 2)
    }

    /// `[x == y]` in bit 0 for shared ring elements.
    pub fn eq(&mut self, x: &Arith, y: &Arith) -> Result<Bool> {
        let d = self.sub(x, y);
        // d0 + d1 = 0 exactly when d0 and -d1 agree, so the two words form
        // XOR shares of a value that is zero iff x == y.
        let words = if self.is_alice() {
            d.0
        } else {
            d.0.iter().map(|v| v.wrapping_neg()).collect()
        };
        self.eq_zero(&Bool(words), 1)
    }

    /// `c ? a : b` with `c` in bit 0.
    pub fn mux(&mut self, c: &Bool, a: &Arith, b: &Arith) -> Result<Arith> {
        let ca = self.bits_to_arith(c)?;
        let diff = self.sub(a, b);
        let t = self.mul(&ca, &diff)?;
        Ok(self.add(&t, b))
    }

    /// Shared values uniform on `[0, 2^p)`: each party contributes `p`
    /// private random bits and the shared value is their XOR.
    pub fn joint_random(&mut self, p: u32, len: usize) -> Result<Arith> {
        use rand::Rng;
        if p == 0 {
            return Ok(Arith(vec![0; len]));
        }
        let mask = if p >= 64 { !0 } else { (1u64 << p) - 1 };
        let mine: Vec<u64> = (0..len).map(|_| self.rng.gen::<u64>() & mask).collect();
        self.joint_random_from(p, mine)
    }

    /// As [`Engine::joint_random`] with this party's bits supplied.
    pub fn joint_random_from(&mut self, p: u32, mine: Vec<u64>) -> Result<Arith> {
        self.b2a(&Bool(mine), p)
    }

    /// `floor(eta * r / 2^p)` for `r < 2^p`, computed exactly through the
    /// boolean domain.
    pub fn scale_and_truncate(&mut self, r: &Arith, eta: &Arith, p: u32) -> Result<Arith> {
        let prod = self.mul(r, eta)?;
        let b = self.a2b(&prod)?;
        self.b2a(&b.shr(p), 64 - p)
    }

    /// `(sum of flagged values, number of flags)`, flags in bit 0.
    pub fn conditional_sum(&mut self, flags: &Bool, values: &Arith) -> Result<(Arith, Arith)> {
        let f = self.bits_to_arith(flags)?;
        let prod = self.mul(&f, values)?;
        Ok((self.sum(&prod), self.sum(&f)))
    }

    /// Signed quotient `num / den` rounded to nearest with ties away from
    /// zero, as XOR-shared words. Requires `0 < den` and a quotient below
    /// `2^quotient_bits`; a zero denominator yields an arbitrary word.
    pub fn div_round(&mut self, num: &Arith, den: &Arith, quotient_bits: u32) -> Result<Bool> {
        let n = num.len();
        let b = self.a2b(&Arith::concat(&[num, den]))?;
        let (nb, db) = (b.slice(0..n), b.slice(n..2 * n));
        let sign = nb.spread_top();
        let sign_bit = nb.shr(63);
        let abs = self.add_bool(&nb.xor(&sign), &sign_bit)?;
        // round(|num| / den) = floor((2|num| + den) / (2 den)).
        let top = self.add_bool(&abs.shl(1), &db)?;
        let d = db.shl(1);
        let t = quotient_bits;
        let mut rem = if t >= 64 { Bool(vec![0; n]) } else { top.shr(t) };
        let mut q = Bool(vec![0; n]);
        for i in (0..t).rev() {
            rem = rem.shl(1).xor(&top.shr(i).mask(1));
            let (diff, ge) = self.sub_ge(&rem, &d)?;
            let delta = self.and(&ge, &diff.xor(&rem))?;
            rem = rem.xor(&delta);
            q = q.xor(&ge.mask(1u64 << i));
        }
        self.add_bool(&q.xor(&sign), &sign_bit)
    }

    /// Reveals the rounded quotient to `to` only, together with whether the
    /// denominator was zero. The recipient gets `Some(None)` for a zero
    /// denominator.
    pub fn shared_div_reveal(
        &mut self,
        num: &Arith,
        den: &Arith,
        to: Party,
        quotient_bits: u32,
    ) -> Result<Option<Vec<Option<i64>>>> {
        let q = self.div_round(num, den, quotient_bits)?;
        let zeros = self.const_arith(&vec![0; den.len()]);
        let zero = self.eq(den, &zeros)?;
        let n = q.len();
        let out = self.reveal_bool(&Bool::concat(&[&q, &zero]), to)?;
        Ok(out.map(|v| {
            (0..n)
                .map(|i| if v[n + i] & 1 == 1 { None } else { Some(v[i] as i64) })
                .collect()
        }))
    }

    /// The `idx`-th value among those whose flag (bit 0) is set, counting
    /// from zero. Yields zero when `idx` is past the last flagged value.
    pub fn select_at_shared_index(&mut self, flags: &Bool, values: &Arith, idx: &Arith) -> Result<Arith> {
        let f = self.bits_to_arith(flags)?;
        let mut prefix = Vec::with_capacity(f.len());
        let mut acc = 0u64;
        for v in &f.0 {
            prefix.push(acc);
            acc = acc.wrapping_add(*v);
        }
        let target = Arith(vec![idx.0[0]; f.len()]);
        let hit = self.eq(&Arith(prefix), &target)?;
        let pick = self.and(&hit, flags)?;
        let pa = self.bits_to_arith(&pick)?;
        let prod = self.mul(&pa, values)?;
        Ok(self.sum(&prod))
    }
}
