//! Semi-honest two-party computation over additive shares in Z_2^64 and
//! XOR shares of 64-bit words, with Beaver triples for multiplication.
//!
//! All operations are vectorized: one call processes a whole vector and
//! costs one exchange per multiplicative layer. Boolean words hold the bits
//! of one value, so word shifts are local.

mod circuits;
pub mod triples;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::net::{codec, Channel, MsgKind};
pub use triples::TripleProvider;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

/// This party's additive shares of a vector of ring elements.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Arith(pub Vec<u64>);

/// This party's XOR shares of a vector of 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Bool(pub Vec<u64>);

impl Arith {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(parts: &[&Arith]) -> Arith {
        Arith(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub fn slice(&self, r: std::ops::Range<usize>) -> Arith {
        Arith(self.0[r].to_vec())
    }
}

impl Bool {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(parts: &[&Bool]) -> Bool {
        Bool(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub fn slice(&self, r: std::ops::Range<usize>) -> Bool {
        Bool(self.0[r].to_vec())
    }

    pub fn xor(&self, o: &Bool) -> Bool {
        Bool(self.0.iter().zip(&o.0).map(|(a, b)| a ^ b).collect())
    }

    pub fn shl(&self, s: u32) -> Bool {
        Bool(self.0.iter().map(|w| w << s).collect())
    }

    pub fn shr(&self, s: u32) -> Bool {
        Bool(self.0.iter().map(|w| w >> s).collect())
    }

    /// Keeps only the bits set in `mask`; linear, so local.
    pub fn mask(&self, mask: u64) -> Bool {
        Bool(self.0.iter().map(|w| w & mask).collect())
    }

    /// Copies bit 63 of each word to every position.
    pub fn spread_top(&self) -> Bool {
        Bool(self.0.iter().map(|&w| ((w as i64) >> 63) as u64).collect())
    }
}

pub struct Engine<'c> {
    party: Party,
    ch: &'c mut Channel,
    triples: TripleProvider,
    rng: ChaCha20Rng,
}

impl<'c> Engine<'c> {
    pub fn new(party: Party, ch: &'c mut Channel, triples: TripleProvider, seed: u64) -> Self {
        Engine {
            party,
            ch,
            triples,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn is_alice(&self) -> bool {
        self.party == Party::Alice
    }

    pub fn channel(&mut self) -> &mut Channel {
        self.ch
    }

    pub fn triples(&self) -> &TripleProvider {
        &self.triples
    }

    pub fn build_nanos(&self) -> u64 {
        self.triples.build_nanos()
    }

    /// Sends `mine` and returns the peer's vector of the same length. Alice
    /// sends first so socket buffers never fill on both sides at once.
    fn exchange(&mut self, kind: MsgKind, mine: &[u64]) -> Result<Vec<u64>> {
        let mut body = Vec::new();
        codec::put_u64s(&mut body, mine);
        let theirs = if self.is_alice() {
            self.ch.send_msg(kind, &body)?;
            codec::u64s(&self.ch.recv_msg(kind)?)?
        } else {
            let t = codec::u64s(&self.ch.recv_msg(kind)?)?;
            self.ch.send_msg(kind, &body)?;
            t
        };
        if theirs.len() != mine.len() {
            return Err(Error::Protocol(format!(
                "peer sent {} words, expected {}",
                theirs.len(),
                mine.len()
            )));
        }
        Ok(theirs)
    }

    fn input<F: Fn(u64, u64) -> u64>(
        &mut self,
        owner: Party,
        values: Option<&[u64]>,
        len: Option<usize>,
        hide: F,
    ) -> Result<Vec<u64>> {
        if owner == self.party {
            let values = values.ok_or_else(|| Error::Protocol("input owner passed no values".into()))?;
            let len = values.len();
            let masks: Vec<u64> = (0..len).map(|_| self.rng.gen()).collect();
            let mut body = Vec::new();
            codec::put_u64s(&mut body, &masks);
            self.ch.send_msg(MsgKind::ShareInput, &body)?;
            Ok(values.iter().zip(&masks).map(|(&v, &m)| hide(v, m)).collect())
        } else {
            let got = codec::u64s(&self.ch.recv_msg(MsgKind::ShareInput)?)?;
            if len.is_some_and(|l| l != got.len()) {
                return Err(Error::Protocol("input length mismatch".into()));
            }
            Ok(got)
        }
    }

    /// Additively shares `owner`'s values; the other party passes `None`.
    pub fn share_arith(&mut self, owner: Party, values: Option<&[u64]>, len: usize) -> Result<Arith> {
        if values.is_some_and(|v| v.len() != len) {
            return Err(Error::Protocol("input length mismatch".into()));
        }
        self.input(owner, values, Some(len), |v, m| v.wrapping_sub(m))
            .map(Arith)
    }

    /// As [`Engine::share_arith`], with the length chosen by the owner.
    pub fn share_arith_from(&mut self, owner: Party, values: Option<&[u64]>) -> Result<Arith> {
        self.input(owner, values, None, |v, m| v.wrapping_sub(m)).map(Arith)
    }

    /// XOR-shares `owner`'s words; the other party passes `None`.
    pub fn share_bool(&mut self, owner: Party, values: Option<&[u64]>, len: usize) -> Result<Bool> {
        if values.is_some_and(|v| v.len() != len) {
            return Err(Error::Protocol("input length mismatch".into()));
        }
        self.input(owner, values, Some(len), |v, m| v ^ m).map(Bool)
    }

    pub fn share_bool_from(&mut self, owner: Party, values: Option<&[u64]>) -> Result<Bool> {
        self.input(owner, values, None, |v, m| v ^ m).map(Bool)
    }

    /// Treats each party's private words as its own XOR share, without
    /// communication. The shared value is the XOR of both inputs.
    pub fn own_bool(&self, mine: Vec<u64>) -> Bool {
        Bool(mine)
    }

    /// A public constant as arithmetic shares.
    pub fn const_arith(&self, values: &[u64]) -> Arith {
        if self.is_alice() {
            Arith(values.to_vec())
        } else {
            Arith(vec![0; values.len()])
        }
    }

    pub fn const_bool(&self, values: &[u64]) -> Bool {
        if self.is_alice() {
            Bool(values.to_vec())
        } else {
            Bool(vec![0; values.len()])
        }
    }

    fn reveal(&mut self, shares: &[u64], to: Party, combine: fn(u64, u64) -> u64) -> Result<Option<Vec<u64>>> {
        let mut body = Vec::new();
        codec::put_u64s(&mut body, shares);
        if to == self.party {
            let theirs = codec::u64s(&self.ch.recv_msg(MsgKind::Reveal)?)?;
            if theirs.len() != shares.len() {
                return Err(Error::Protocol("reveal length mismatch".into()));
            }
            Ok(Some(shares.iter().zip(theirs).map(|(&a, b)| combine(a, b)).collect()))
        } else {
            self.ch.send_msg(MsgKind::Reveal, &body)?;
            Ok(None)
        }
    }

    /// Reconstructs at `to` only; the other party gets `None`.
    pub fn reveal_arith(&mut self, x: &Arith, to: Party) -> Result<Option<Vec<u64>>> {
        self.reveal(&x.0, to, u64::wrapping_add)
    }

    pub fn reveal_bool(&mut self, x: &Bool, to: Party) -> Result<Option<Vec<u64>>> {
        self.reveal(&x.0, to, |a, b| a ^ b)
    }

    /// Reconstructs at both parties. Intended for tests.
    pub fn open_arith(&mut self, x: &Arith) -> Result<Vec<u64>> {
        let theirs = self.exchange(MsgKind::Reveal, &x.0)?;
        Ok(x.0.iter().zip(theirs).map(|(&a, b)| a.wrapping_add(b)).collect())
    }

    pub fn open_bool(&mut self, x: &Bool) -> Result<Vec<u64>> {
        let theirs = self.exchange(MsgKind::Reveal, &x.0)?;
        Ok(x.0.iter().zip(theirs).map(|(&a, b)| a ^ b).collect())
    }

    pub fn add(&self, x: &Arith, y: &Arith) -> Arith {
        Arith(x.0.iter().zip(&y.0).map(|(a, b)| a.wrapping_add(*b)).collect())
    }

    pub fn sub(&self, x: &Arith, y: &Arith) -> Arith {
        Arith(x.0.iter().zip(&y.0).map(|(a, b)| a.wrapping_sub(*b)).collect())
    }

    pub fn add_const(&self, x: &Arith, c: u64) -> Arith {
        if self.is_alice() {
            Arith(x.0.iter().map(|a| a.wrapping_add(c)).collect())
        } else {
            x.clone()
        }
    }

    pub fn mul_const(&self, x: &Arith, c: u64) -> Arith {
        Arith(x.0.iter().map(|a| a.wrapping_mul(c)).collect())
    }

    pub fn sum(&self, x: &Arith) -> Arith {
        Arith(vec![x.0.iter().fold(0u64, |s, a| s.wrapping_add(*a))])
    }

    pub fn xor_const(&self, x: &Bool, c: u64) -> Bool {
        if self.is_alice() {
            Bool(x.0.iter().map(|a| a ^ c).collect())
        } else {
            x.clone()
        }
    }

    /// Complements every bit of every word.
    pub fn not(&self, x: &Bool) -> Bool {
        self.xor_const(x, !0)
    }

    /// Complements bit 0 of every word.
    pub fn not_bit(&self, x: &Bool) -> Bool {
        self.xor_const(x, 1)
    }

    /// Elementwise product.
    pub fn mul(&mut self, x: &Arith, y: &Arith) -> Result<Arith> {
        let n = x.len();
        assert_eq!(n, y.len(), "mul operands differ in length");
        let t = self.triples.arith(n)?;
        let mut open = Vec::with_capacity(2 * n);
        open.extend(x.0.iter().zip(&t.a).map(|(v, a)| v.wrapping_sub(*a)));
        open.extend(y.0.iter().zip(&t.b).map(|(v, b)| v.wrapping_sub(*b)));
        let theirs = self.exchange(MsgKind::BeaverOpen, &open)?;
        let alice = self.is_alice();
        Ok(Arith(
            (0..n)
                .map(|i| {
                    let d = open[i].wrapping_add(theirs[i]);
                    let e = open[n + i].wrapping_add(theirs[n + i]);
                    let mut z = t.c[i]
                        .wrapping_add(d.wrapping_mul(t.b[i]))
                        .wrapping_add(e.wrapping_mul(t.a[i]));
                    if alice {
                        z = z.wrapping_add(d.wrapping_mul(e));
                    }
                    z
                })
                .collect(),
        ))
    }

    /// Elementwise AND of words.
    pub fn and(&mut self, x: &Bool, y: &Bool) -> Result<Bool> {
        let n = x.len();
        assert_eq!(n, y.len(), "and operands differ in length");
        let t = self.triples.boolean(n)?;
        let mut open = Vec::with_capacity(2 * n);
        open.extend(x.0.iter().zip(&t.a).map(|(v, a)| v ^ a));
        open.extend(y.0.iter().zip(&t.b).map(|(v, b)| v ^ b));
        let theirs = self.exchange(MsgKind::BeaverOpen, &open)?;
        let alice = self.is_alice();
        Ok(Bool(
            (0..n)
                .map(|i| {
                    let d = open[i] ^ theirs[i];
                    let e = open[n + i] ^ theirs[n + i];
                    let mut z = t.c[i] ^ (d & t.b[i]) ^ (e & t.a[i]);
                    if alice {
                        z ^= d & e;
                    }
                    z
                })
                .collect(),
        ))
    }
}

/// Runs both parties of a computation over an in-process channel, Alice on a
/// helper thread. Both engines use dealer triples from `seed`.
pub fn run_pair<FA, FB, RA, RB>(seed: u64, alice: FA, bob: FB) -> (RA, RB)
where
    FA: FnOnce(&mut Engine) -> RA + Send + 'static,
    FB: FnOnce(&mut Engine) -> RB,
    RA: Send + 'static,
{
    let (mut ca, mut cb) = Channel::pair();
    let h = std::thread::spawn(move || {
        let mut e = Engine::new(
            Party::Alice,
            &mut ca,
            TripleProvider::dealer(Party::Alice, seed),
            seed ^ 0xa11ce,
        );
        alice(&mut e)
    });
    let mut e = Engine::new(
        Party::Bob,
        &mut cb,
        TripleProvider::dealer(Party::Bob, seed),
        seed ^ 0xb0b,
    );
    let rb = bob(&mut e);
    (h.join().expect("alice thread panicked"), rb)
}
