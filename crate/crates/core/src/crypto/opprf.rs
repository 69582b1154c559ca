//! Oblivious programmable PRF built from the OPRF plus public hints.
//!
//! Points are grouped into slots. For each slot the programmer publishes a
//! polynomial `P` over GF(2^128) with `P(tag(x)) = pad(x) ⊕ y` for every
//! programmed `(x, y)`, padded with random points to a fixed degree. An
//! evaluator holding `F_k(x)` computes `pad(x) ⊕ P(tag(x))`: the programmed
//! value on programmed points and a pseudorandom value elsewhere. Since every
//! slot polynomial of a given size is uniformly distributed, the hints do not
//! tell the evaluator which of its points were programmed.

use std::collections::HashMap;

use rand::{CryptoRng, Rng, RngCore};

use super::gf128::{eval, interpolate, Gf128};
use super::oprf::{OprfKey, PrfOutput};
use crate::error::{Error, Result};

pub struct OpprfProgram {
    key: OprfKey,
    slots: Vec<Vec<u128>>,
}

impl OpprfProgram {
    pub fn new(key: OprfKey) -> Self {
        OpprfProgram { key, slots: Vec::new() }
    }

    pub fn key(&self) -> &OprfKey {
        &self.key
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Programs one slot with at most `size` distinct points and returns its
    /// index. Repeating a point with the same output is allowed.
    pub fn program_slot<R: RngCore + CryptoRng, P: AsRef<[u8]>>(
        &mut self,
        points: &[(P, u128)],
        size: usize,
        rng: &mut R,
    ) -> Result<usize> {
        let mut by_input: HashMap<&[u8], u128> = HashMap::with_capacity(points.len());
        for (x, y) in points {
            if let Some(prev) = by_input.insert(x.as_ref(), *y) {
                if prev != *y {
                    return Err(Error::ConflictingProgram);
                }
            }
        }
        if by_input.len() > size {
            return Err(Error::InvalidSpec(format!(
                "{} points do not fit a slot of size {size}",
                by_input.len()
            )));
        }
        let mut xs = Vec::with_capacity(size);
        let mut ys = Vec::with_capacity(size);
        // Deterministic order keeps hints reproducible for a fixed rng.
        let mut inputs: Vec<(&[u8], u128)> = by_input.into_iter().collect();
        inputs.sort_unstable();
        for (x, y) in inputs {
            let out = self.key.eval(x);
            xs.push(Gf128(out.tag));
            ys.push(Gf128(out.pad ^ y));
        }
        while xs.len() < size {
            xs.push(Gf128(rng.gen()));
            ys.push(Gf128(rng.gen()));
        }
        let coeffs = interpolate(&xs, &ys).ok_or(Error::ConflictingProgram)?;
        self.slots.push(coeffs.into_iter().map(|c| c.0).collect());
        Ok(self.slots.len() - 1)
    }

    /// What an evaluator holding the hints obtains for `x` in `slot`.
    pub fn eval(&self, slot: usize, x: &[u8]) -> u128 {
        hint_eval(&self.slots[slot], self.key.eval(x))
    }

    pub fn into_hints(self) -> Hints {
        Hints { slots: self.slots }
    }

    pub fn hints(&self) -> Hints {
        Hints {
            slots: self.slots.clone(),
        }
    }
}

fn hint_eval(coeffs: &[u128], out: PrfOutput) -> u128 {
    let c: Vec<Gf128> = coeffs.iter().map(|&c| Gf128(c)).collect();
    out.pad ^ eval(&c, Gf128(out.tag)).0
}

/// Published per-slot polynomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hints {
    pub slots: Vec<Vec<u128>>,
}

impl Hints {
    pub fn eval(&self, slot: usize, out: PrfOutput) -> u128 {
        hint_eval(&self.slots[slot], out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let total: usize = self.slots.iter().map(|s| 4 + 16 * s.len()).sum();
        let mut out = Vec::with_capacity(4 + total);
        out.extend_from_slice(&(self.slots.len() as u32).to_be_bytes());
        for s in &self.slots {
            out.extend_from_slice(&(s.len() as u32).to_be_bytes());
            for c in s {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let mut r = crate::net::codec::Reader::new(b);
        let n = r.u32()? as usize;
        let mut slots = Vec::with_capacity(n.min(b.len() / 4));
        for _ in 0..n {
            let k = r.u32()? as usize;
            let body = r.take(16 * k)?;
            slots.push(crate::net::codec::u128s(body)?);
        }
        r.finish()?;
        Ok(Hints { slots })
    }
}
