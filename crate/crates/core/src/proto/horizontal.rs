//! Imputation over a horizontal split: each party holds whole rows.
//!
//! Bob holds the query tuple. For every Alice tuple `ω` and attribute
//! `j ≠ β` he programs an OPPRF slot so that Alice's quantized value maps to
//! a random `σ_{ω,j}` exactly when it matches his. Alice's outputs `τ_{ω,j}`
//! XOR to `σ_ω = ⊕_j σ_{ω,j}` precisely for neighbors. The plain variants
//! send `σ_ω` to Alice; the blind ones compare inside the secure computation.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{Outcome, MEAN_QUOTIENT_BITS, SAMPLING_BITS};
use crate::crypto::hash::{encode_bottom, encode_point};
use crate::crypto::{oprf, Hints, OpprfProgram, OprfKey, PrfOutput};
use crate::dataset::{Cell, Table};
use crate::error::{Error, Result};
use crate::mpc::{Arith, Bool, Engine, Party, TripleProvider};
use crate::net::codec::{self, Reader};
use crate::net::{Channel, MsgKind};
use crate::rnn::{neighbors, QuantizationScheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    PlainMean,
    PlainRandom,
    BlindMean,
    BlindRandom,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::PlainMean,
        Variant::PlainRandom,
        Variant::BlindMean,
        Variant::BlindRandom,
    ];

    pub fn is_blind(self) -> bool {
        matches!(self, Variant::BlindMean | Variant::BlindRandom)
    }

    pub fn is_mean(self) -> bool {
        matches!(self, Variant::PlainMean | Variant::BlindMean)
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(b: u8) -> Result<Variant> {
        Variant::ALL
            .get(b as usize)
            .copied()
            .ok_or_else(|| Error::Protocol(format!("unknown horizontal variant {b}")))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::PlainMean => "plain-mean",
            Variant::PlainRandom => "plain-random",
            Variant::BlindMean => "blind-mean",
            Variant::BlindRandom => "blind-random",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown horizontal variant {s:?}")))
    }
}

/// Alice's inputs: her rows and the public radii.
#[derive(Clone, Debug)]
pub struct AliceInput<'a> {
    pub table: &'a Table,
    pub scheme: &'a QuantizationScheme,
}

/// Bob's inputs. `bounds` holds the public value range of each attribute and
/// is needed wherever the query tuple has a missing attribute other than
/// `beta`.
#[derive(Clone, Debug)]
pub struct BobInput<'a> {
    pub table: &'a Table,
    pub query: &'a [Cell],
    pub beta: usize,
    pub scheme: &'a QuantizationScheme,
    pub bounds: &'a [Option<(i64, i64)>],
    pub variant: Variant,
    pub epsilon: f64,
    /// Expected fraction of Alice's rows that neighbor the query. Estimated
    /// from Bob's own rows when unset.
    pub ell_fraction: Option<f64>,
}

/// Chooses `c` tuples per slot and `d` slots so that, with `ell` of `n_a`
/// tuples being neighbors, some slot holds exactly one neighbor except with
/// probability about `epsilon`.
pub fn compute_packing(ell: f64, n_a: usize, epsilon: f64) -> Result<(usize, usize)> {
    if !(ell > 0.0 && ell < n_a as f64) {
        return Err(Error::Config(format!(
            "expected neighbor count {ell} must lie strictly between 0 and {n_a}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!(
            "failure probability {epsilon} must lie in (0, 1)"
        )));
    }
    let p = ell / n_a as f64;
    let q = |c: usize| c as f64 * p * (1.0 - p).powi(c as i32 - 1);
    let peak = -1.0 / (-p).ln_1p();
    let lo = (peak.floor() as usize).max(1);
    let hi = (peak.ceil() as usize).max(1);
    // The continuous optimum sits between two integers that often score the
    // same up to rounding; prefer the larger.
    let c = if q(lo) > q(hi) * (1.0 + 1e-9) { lo } else { hi };
    let miss = (1.0 - q(c)).ln();
    let d = if miss == f64::NEG_INFINITY {
        1
    } else {
        let mut d = (epsilon.ln() / miss).ceil().max(1.0) as usize;
        while d > 1 && (d - 1) as f64 * miss <= epsilon.ln() {
            d -= 1;
        }
        while d as f64 * miss > epsilon.ln() {
            d += 1;
        }
        d
    };
    Ok((c, d))
}

/// Expected number of Alice neighbors judged from Bob's own rows, with one
/// pseudo-neighbor and one pseudo-non-neighbor added.
pub fn estimate_ell(n_a: usize, n_b: usize, local_neighbors: usize) -> f64 {
    n_a as f64 * (local_neighbors as f64 + 1.0) / (n_b as f64 + 2.0)
}

/// The Alice tuples to pack, in slot order: `c * d` distinct tuples when
/// that is fewer than `n_a`, otherwise concatenated random permutations.
pub fn packing_sequence<R: Rng>(n_a: usize, c: usize, d: usize, rng: &mut R) -> Vec<u32> {
    let total = c * d;
    if total < n_a {
        return index::sample(rng, n_a, total).into_iter().map(|i| i as u32).collect();
    }
    let mut seq = Vec::with_capacity(total);
    while seq.len() < total {
        let mut perm: Vec<u32> = (0..n_a as u32).collect();
        perm.shuffle(rng);
        seq.extend(perm);
    }
    seq.truncate(total);
    seq
}

/// Distinct tuples of `seq` in order of first use, and each position's
/// index into that list.
fn distinct(seq: &[u32]) -> (Vec<u32>, Vec<usize>) {
    let mut at = HashMap::new();
    let mut order = Vec::new();
    let pos = seq
        .iter()
        .map(|&w| {
            *at.entry(w).or_insert_with(|| {
                order.push(w);
                order.len() - 1
            })
        })
        .collect();
    (order, pos)
}

/// Every `(q1, q2)` bucket pair realized by some value in `[lo, hi]`.
pub fn wildcard_pairs(lo: i64, hi: i64, r: i64) -> Vec<(i64, i64)> {
    let h = r / 2;
    let mut out = vec![crate::rnn::quantize(lo, r)];
    // Bucket pairs only change at multiples of r/2.
    let mut v = (lo.div_euclid(h) + 1) * h;
    while v <= hi {
        out.push(crate::rnn::quantize(v, r));
        v += h;
    }
    out.dedup();
    out
}

/// The bucket pairs of attribute `j` that Bob's value matches.
fn match_pairs(scheme: &QuantizationScheme, j: usize, x: Cell, bound: Option<(i64, i64)>) -> Result<Vec<(i64, i64)>> {
    match x {
        Some(v) => {
            let (q1, q2) = scheme.quantize(v, j);
            let (a1, a2) = scheme.adjacent(v, j);
            Ok(vec![(q1, q2), (q1, a2), (a1, q2)])
        }
        None => {
            let (lo, hi) = bound.ok_or_else(|| {
                Error::Config(format!(
                    "query attribute {j} is missing; declare its public bounds in the radii file"
                ))
            })?;
            Ok(wildcard_pairs(lo, hi, scheme.radius(j)))
        }
    }
}

fn other_attributes(m: usize, beta: usize) -> Vec<usize> {
    (0..m).filter(|&j| j != beta).collect()
}

/// Programs one slot per `(ω, j)` for `ω` in `tuples` and `j ≠ β`. Returns the
/// program and `σ_ω` per tuple.
pub fn program_neighbor_opprf<R: Rng + rand::CryptoRng>(
    query: &[Cell],
    beta: usize,
    scheme: &QuantizationScheme,
    bounds: &[Option<(i64, i64)>],
    tuples: &[u32],
    rng: &mut R,
) -> Result<(OpprfProgram, Vec<u128>)> {
    let attrs = other_attributes(query.len(), beta);
    let pairs: Vec<Vec<(i64, i64)>> = attrs
        .iter()
        .map(|&j| match_pairs(scheme, j, query[j], bounds.get(j).copied().flatten()))
        .collect::<Result<_>>()?;
    let mut program = OpprfProgram::new(OprfKey::random(rng));
    let mut sigmas = Vec::with_capacity(tuples.len());
    for &w in tuples {
        let mut sigma = 0u128;
        for (&j, pairs) in attrs.iter().zip(&pairs) {
            let s: u128 = rng.gen();
            sigma ^= s;
            let mut points: Vec<([u8; 23], u128)> = pairs
                .iter()
                .map(|&(q1, q2)| (encode_point(w, j as u16, q1, q2), s))
                .collect();
            points.push((encode_bottom(w, j as u16), s));
            program.program_slot(&points, pairs.len() + 1, rng)?;
        }
        sigmas.push(sigma);
    }
    Ok((program, sigmas))
}

/// Alice's OPPRF inputs for the given tuples, slot by slot.
pub fn neighbor_inputs(table: &Table, beta: usize, scheme: &QuantizationScheme, tuples: &[u32]) -> Vec<[u8; 23]> {
    let attrs = other_attributes(table.m(), beta);
    let mut out = Vec::with_capacity(tuples.len() * attrs.len());
    for &w in tuples {
        for &j in &attrs {
            out.push(match table.get(w as usize, j) {
                Some(v) => {
                    let (q1, q2) = scheme.quantize(v, j);
                    encode_point(w, j as u16, q1, q2)
                }
                None => encode_bottom(w, j as u16),
            });
        }
    }
    out
}

/// `τ_ω` per tuple from Alice's OPRF outputs and Bob's hints.
fn tau_sums(outs: &[PrfOutput], hints: &Hints, per_tuple: usize) -> Vec<u128> {
    if per_tuple == 0 {
        return vec![0; outs.len()];
    }
    outs.chunks(per_tuple)
        .enumerate()
        .map(|(t, c)| {
            c.iter()
                .enumerate()
                .fold(0u128, |acc, (k, &o)| acc ^ hints.eval(t * per_tuple + k, o))
        })
        .collect()
}

fn put_hello(n: u64, m: usize) -> Vec<u8> {
    let mut b = n.to_be_bytes().to_vec();
    b.extend_from_slice(&(m as u16).to_be_bytes());
    b
}

/// Runs Alice's side. She learns `β` and the variant; plain variants also
/// reveal to her which of her tuples neighbor the query.
pub fn run_alice(ch: &mut Channel, input: &AliceInput, triples: TripleProvider, seed: u64) -> Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t = input.table;
    let (n_a, m) = (t.n(), t.m());
    if input.scheme.m() != m {
        return Err(Error::Config(format!("{} radii for {m} attributes", input.scheme.m())));
    }
    ch.send_msg(MsgKind::Hello, &put_hello(n_a as u64, m))?;
    let q = ch.recv_msg(MsgKind::Query)?;
    let mut r = Reader::new(&q);
    let variant = Variant::from_code(r.u8()?)?;
    let beta = r.u16()? as usize;
    r.finish()?;
    if beta >= m {
        return Err(Error::Protocol(format!("attribute {beta} out of range")));
    }

    let (tuples, slots) = if variant == Variant::BlindRandom {
        let body = ch.recv_msg(MsgKind::Packing)?;
        let mut r = Reader::new(&body);
        let c = r.u32()? as usize;
        let d = r.u32()? as usize;
        let seq: Vec<u32> = (0..c * d).map(|_| r.u32()).collect::<Result<_>>()?;
        r.finish()?;
        if c == 0 || d == 0 || seq.iter().any(|&w| w as usize >= n_a) {
            return Err(Error::Protocol("malformed packing".into()));
        }
        let (u, pos) = distinct(&seq);
        (u, Some((c, d, pos)))
    } else {
        ((0..n_a as u32).collect(), None)
    };

    let inputs = neighbor_inputs(t, beta, input.scheme, &tuples);
    let outs = oprf::request(ch, &inputs, &mut rng)?;
    let hints = Hints::from_bytes(&ch.recv_msg(MsgKind::OpprfHints)?)?;
    if hints.slots.len() != inputs.len() {
        return Err(Error::Protocol("hint count differs from query count".into()));
    }
    let tau = tau_sums(&outs, &hints, m - 1);
    let values: Vec<Cell> = tuples.iter().map(|&w| t.get(w as usize, beta)).collect();

    let flags: Option<Vec<bool>> = if variant.is_blind() {
        None
    } else {
        let sig = codec::u128s(&ch.recv_msg(MsgKind::SigmaSums)?)?;
        if sig.len() != tuples.len() {
            return Err(Error::Protocol("sigma count differs from tuple count".into()));
        }
        Some(
            tau.iter()
                .zip(&sig)
                .zip(&values)
                .map(|((a, b), v)| a == b && v.is_some())
                .collect(),
        )
    };
    ch.close_phase("opprf");

    let mut e = Engine::new(Party::Alice, ch, triples, rng.gen());
    match variant {
        Variant::PlainMean => {
            let flags = flags.expect("plain variant");
            let (mut s, mut c) = (0u64, 0u64);
            for (f, v) in flags.iter().zip(&values) {
                if *f {
                    s = s.wrapping_add(v.expect("flagged") as u64);
                    c += 1;
                }
            }
            let a = e.share_arith(Party::Alice, Some(&[s, c]), 2)?;
            let b = e.share_arith(Party::Bob, None, 2)?;
            finish_mean(&mut e, &a, &b)?;
        }
        Variant::PlainRandom => {
            let flags = flags.expect("plain variant");
            let pool: Vec<i64> = flags
                .iter()
                .zip(&values)
                .filter(|(f, _)| **f)
                .map(|(_, v)| v.expect("flagged"))
                .collect();
            let v_a = pool.choose(&mut rng).copied().unwrap_or(0);
            let a = e.share_arith(Party::Alice, Some(&[v_a as u64, pool.len() as u64]), 2)?;
            finish_random(&mut e, &a.slice(0..1), &a.slice(1..2), None, None)?;
        }
        Variant::BlindMean | Variant::BlindRandom => {
            // A tuple without β must not match: spoil its τ.
            let tau: Vec<u128> = tau
                .iter()
                .zip(&values)
                .map(|(&x, v)| {
                    if v.is_some() {
                        x
                    } else {
                        x ^ rng.gen_range(1..=u128::MAX)
                    }
                })
                .collect();
            let vals: Vec<u64> = values.iter().map(|v| v.unwrap_or(0) as u64).collect();
            let flags = e.eq_u128_private(&tau)?;
            let vals = e.share_arith(Party::Alice, Some(&vals), vals.len())?;
            match slots {
                None => blind_mean(&mut e, &flags, &vals)?,
                Some((c, d, pos)) => blind_random(&mut e, &flags, &vals, n_a, c, d, &pos)?,
            };
        }
    }
    let build = e.build_nanos();
    drop(e);
    ch.close_mpc_phase(build);
    Ok(())
}

/// Runs Bob's side and returns the imputed value.
pub fn run_bob(ch: &mut Channel, input: &BobInput, triples: TripleProvider, seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (t, beta, scheme) = (input.table, input.beta, input.scheme);
    let m = input.query.len();
    if t.m() != m || scheme.m() != m {
        return Err(Error::Config(
            "query, table and radii disagree on the attribute count".into(),
        ));
    }
    if beta >= m || input.query[beta].is_some() {
        return Err(Error::Config(format!("query attribute {beta} must be missing")));
    }
    let hello = ch.recv_msg(MsgKind::Hello)?;
    let mut r = Reader::new(&hello);
    let n_a = r.u64()? as usize;
    let m_a = r.u16()? as usize;
    r.finish()?;
    if m_a != m {
        return Err(Error::Protocol(format!("Alice has {m_a} attributes, Bob {m}")));
    }
    let mut q = vec![input.variant.code()];
    q.extend_from_slice(&(beta as u16).to_be_bytes());
    ch.send_msg(MsgKind::Query, &q)?;

    let local = neighbors(t, input.query, beta, scheme);
    let (tuples, slots) = if input.variant == Variant::BlindRandom {
        let ell = match input.ell_fraction {
            Some(f) => f * n_a as f64,
            None => estimate_ell(n_a, t.n(), local.len()),
        };
        let (c, d) = compute_packing(ell, n_a, input.epsilon)?;
        let seq = packing_sequence(n_a, c, d, &mut rng);
        let mut body = Vec::with_capacity(8 + 4 * seq.len());
        body.extend_from_slice(&(c as u32).to_be_bytes());
        body.extend_from_slice(&(d as u32).to_be_bytes());
        for w in &seq {
            body.extend_from_slice(&w.to_be_bytes());
        }
        ch.send_msg(MsgKind::Packing, &body)?;
        let (u, pos) = distinct(&seq);
        (u, Some((c, d, pos)))
    } else {
        ((0..n_a as u32).collect(), None)
    };

    let (program, sigma) = program_neighbor_opprf(input.query, beta, scheme, input.bounds, &tuples, &mut rng)?;
    oprf::respond(ch, program.key())?;
    ch.send_msg(MsgKind::OpprfHints, &program.into_hints().to_bytes())?;
    if !input.variant.is_blind() {
        let mut body = Vec::new();
        codec::put_u128s(&mut body, &sigma);
        ch.send_msg(MsgKind::SigmaSums, &body)?;
    }
    ch.close_phase("opprf");

    let local_vals: Vec<i64> = local
        .iter()
        .map(|&i| t.get(i, beta).expect("neighbors carry beta"))
        .collect();
    let s_b = local_vals.iter().fold(0u64, |s, &v| s.wrapping_add(v as u64));
    let rows = BobRows::new(t, beta, &local);

    let mut e = Engine::new(Party::Bob, ch, triples, rng.gen());
    let out = match input.variant {
        Variant::PlainMean => {
            let a = e.share_arith(Party::Alice, None, 2)?;
            let b = e.share_arith(Party::Bob, Some(&[s_b, local.len() as u64]), 2)?;
            finish_mean(&mut e, &a, &b)?
        }
        Variant::PlainRandom => {
            let a = e.share_arith(Party::Alice, None, 2)?;
            finish_random(&mut e, &a.slice(0..1), &a.slice(1..2), None, Some(&rows))?
        }
        Variant::BlindMean | Variant::BlindRandom => {
            let flags = e.eq_u128_private(&sigma)?;
            let vals = e.share_arith(Party::Alice, None, tuples.len())?;
            match slots {
                None => {
                    let (s, c) = e.conditional_sum(&flags, &vals)?;
                    let b = e.share_arith(Party::Bob, Some(&[s_b, local.len() as u64]), 2)?;
                    finish_mean(&mut e, &Arith::concat(&[&s, &c]), &b)?
                }
                Some((c, d, pos)) => blind_random_bob(&mut e, &flags, &vals, n_a, c, d, &pos, &rows)?,
            }
        }
    };
    let build = e.build_nanos();
    drop(e);
    ch.close_mpc_phase(build);
    out.ok_or_else(|| Error::Protocol("no output at Bob".into()))
}

/// Bob's rows as inputs to oblivious selection: a flag and value per row.
struct BobRows {
    flags: Vec<u64>,
    values: Vec<u64>,
    count: u64,
}

impl BobRows {
    fn new(t: &Table, beta: usize, local: &[usize]) -> BobRows {
        let mut flags = vec![0u64; t.n()];
        let mut values = vec![0u64; t.n()];
        for &i in local {
            flags[i] = 1;
            values[i] = t.get(i, beta).expect("neighbors carry beta") as u64;
        }
        BobRows {
            flags,
            values,
            count: local.len() as u64,
        }
    }
}

fn blind_mean(e: &mut Engine, flags: &Bool, vals: &Arith) -> Result<()> {
    let (s, c) = e.conditional_sum(flags, vals)?;
    let b = e.share_arith(Party::Bob, None, 2)?;
    finish_mean(e, &Arith::concat(&[&s, &c]), &b)?;
    Ok(())
}

/// `(s_A + s_B) / (|I_A| + |I_B|)` revealed to Bob.
fn finish_mean(e: &mut Engine, a: &Arith, b: &Arith) -> Result<Option<Outcome>> {
    let t = e.add(a, b);
    let out = e.shared_div_reveal(&t.slice(0..1), &t.slice(1..2), Party::Bob, MEAN_QUOTIENT_BITS)?;
    Ok(out.map(|v| match v[0] {
        Some(x) => Outcome::Value(x),
        None => Outcome::NoNeighbor,
    }))
}

/// Picks Alice's candidate with probability `|I_A| / (|I_A| + |I_B|)` and a
/// uniform one of Bob's otherwise, revealing the result and the empty and
/// abort flags to Bob.
fn finish_random(
    e: &mut Engine,
    v_a: &Arith,
    count_a: &Arith,
    abort: Option<&Bool>,
    bob: Option<&BobRows>,
) -> Result<Option<Outcome>> {
    let flags = e.share_bool_from(Party::Bob, bob.map(|b| &b.flags[..]))?;
    let vals = e.share_arith(Party::Bob, bob.map(|b| &b.values[..]), flags.len())?;
    let count_b = e.share_arith(Party::Bob, bob.map(|b| std::slice::from_ref(&b.count)), 1)?;
    let total = e.add(count_a, &count_b);
    let r = e.joint_random(SAMPLING_BITS, 2)?;
    let scaled = e.scale_and_truncate(&r, &Arith::concat(&[&count_b, &total]), SAMPLING_BITS)?;
    let v_b = e.select_at_shared_index(&flags, &vals, &scaled.slice(0..1))?;
    let alice_side = e.lt(&scaled.slice(1..2), count_a)?;
    let out = e.mux(&alice_side, v_a, &v_b)?;
    let zero = e.const_arith(&[0]);
    let empty = e.eq(&total, &zero)?;
    let status = match abort {
        Some(a) => Bool::concat(&[&empty, a]),
        None => empty,
    };
    let v = e.reveal_arith(&out, Party::Bob)?;
    let s = e.reveal_bool(&status, Party::Bob)?;
    Ok(match (v, s) {
        (Some(v), Some(s)) => Some(if s.get(1).is_some_and(|b| b & 1 == 1) {
            Outcome::Aborted
        } else if s[0] & 1 == 1 {
            Outcome::NoNeighbor
        } else {
            Outcome::Value(v[0] as i64)
        }),
        _ => None,
    })
}

/// Packed sampling on Alice's side: per-slot neighbor counts, the first
/// slot holding exactly one neighbor, and the estimate of `|I_A|`.
fn packed_candidate(
    e: &mut Engine,
    flags: &Bool,
    vals: &Arith,
    n_a: usize,
    c: usize,
    d: usize,
    pos: &[usize],
) -> Result<(Arith, Arith, Bool)> {
    let fa = e.bits_to_arith(flags)?;
    let prod = e.mul(&fa, vals)?;
    let (mut counts, mut sums) = (vec![0u64; d], vec![0u64; d]);
    for (p, &u) in pos.iter().enumerate() {
        counts[p / c] = counts[p / c].wrapping_add(fa.0[u]);
        sums[p / c] = sums[p / c].wrapping_add(prod.0[u]);
    }
    let ones = e.const_arith(&vec![1; d]);
    let valid = e.eq(&Arith(counts), &ones)?;
    let first = e.const_arith(&[0]);
    let v_a = e.select_at_shared_index(&valid, &Arith(sums), &first)?;
    let sampled = e.sum(&fa);
    let valid_a = e.bits_to_arith(&valid)?;
    let n_valid = e.sum(&valid_a);
    let zeros = e.const_arith(&[0, 0]);
    let z = e.eq(&Arith::concat(&[&sampled, &n_valid]), &zeros)?;
    let some_sampled = e.not_bit(&z.slice(0..1));
    let abort = e.and(&some_sampled, &z.slice(1..2))?;
    let dc = (c * d) as u64;
    let count_a = if (dc as usize) < n_a {
        let num = e.mul_const(&sampled, n_a as u64);
        let den = e.const_arith(&[dc]);
        let q = e.div_round(&num, &den, 34)?;
        e.b2a(&q, 34)?
    } else {
        sampled
    };
    Ok((v_a, count_a, abort))
}

fn blind_random(
    e: &mut Engine,
    flags: &Bool,
    vals: &Arith,
    n_a: usize,
    c: usize,
    d: usize,
    pos: &[usize],
) -> Result<()> {
    let (v_a, count_a, abort) = packed_candidate(e, flags, vals, n_a, c, d, pos)?;
    finish_random(e, &v_a, &count_a, Some(&abort), None)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn blind_random_bob(
    e: &mut Engine,
    flags: &Bool,
    vals: &Arith,
    n_a: usize,
    c: usize,
    d: usize,
    pos: &[usize],
    rows: &BobRows,
) -> Result<Option<Outcome>> {
    let (v_a, count_a, abort) = packed_candidate(e, flags, vals, n_a, c, d, pos)?;
    finish_random(e, &v_a, &count_a, Some(&abort), Some(rows))
}

/// Runs both parties in-process.
pub fn run_local(alice: &AliceInput, bob: &BobInput, seed: u64) -> Result<super::LocalRun<Outcome>> {
    run_session(Channel::pair(), alice, bob, seed)
}

/// Runs both parties in-process over the given endpoints, Alice's first.
pub fn run_session(
    channels: (Channel, Channel),
    alice: &AliceInput,
    bob: &BobInput,
    seed: u64,
) -> Result<super::LocalRun<Outcome>> {
    let mut root = ChaCha20Rng::seed_from_u64(seed);
    let (sa, sb, st): (u64, u64, u64) = (root.gen(), root.gen(), root.gen());
    super::run_over(
        channels,
        |ch| run_alice(ch, alice, TripleProvider::dealer(Party::Alice, st), sa),
        |ch| run_bob(ch, bob, TripleProvider::dealer(Party::Bob, st), sb),
    )
}
