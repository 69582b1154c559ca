//! Private set intersection over 128-bit elements.
//!
//! In every variant Alice is the sender and Bob the receiver. The plain
//! variants reveal the intersection to Bob; circuit-PSI leaves each party
//! with one 128-bit value per receiver bin, equal across parties exactly
//! when the bin's element is in the intersection.

use std::collections::HashSet;

use curve25519_dalek::ristretto::CompressedRistretto;
use curve25519_dalek::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::{CryptoRng, Rng, RngCore};

use super::cuckoo::{self, CuckooParams, CuckooTable};
use super::hash::{encode_bin_element, encode_element, hash_to_point};
use super::opprf::{Hints, OpprfProgram};
use super::oprf::{self, OprfKey};
use crate::error::{Error, Result};
use crate::net::{codec, Channel, MsgKind};

/// Alice's side of OPRF-based PSI.
pub fn psi_plain_sender<R: RngCore + CryptoRng>(ch: &mut Channel, items: &[u128], rng: &mut R) -> Result<()> {
    let key = OprfKey::random(rng);
    oprf::respond(ch, &key)?;
    let mut tags: Vec<u128> = items.iter().map(|&x| key.eval(&encode_element(x)).tag).collect();
    tags.shuffle(rng);
    let mut body = Vec::new();
    codec::put_u128s(&mut body, &tags);
    ch.send_msg(MsgKind::PsiTags, &body)
}

/// Bob's side of OPRF-based PSI; returns indices of his items in the
/// intersection, ascending.
pub fn psi_plain_receiver<R: RngCore + CryptoRng>(ch: &mut Channel, items: &[u128], rng: &mut R) -> Result<Vec<usize>> {
    let inputs: Vec<[u8; 17]> = items.iter().map(|&x| encode_element(x)).collect();
    let outs = oprf::request(ch, &inputs, rng)?;
    let tags: HashSet<u128> = codec::u128s(&ch.recv_msg(MsgKind::PsiTags)?)?.into_iter().collect();
    Ok(outs
        .iter()
        .enumerate()
        .filter(|(_, o)| tags.contains(&o.tag))
        .map(|(i, _)| i)
        .collect())
}

fn points_times(body: &[u8], k: &Scalar) -> Result<Vec<[u8; 32]>> {
    if !body.len().is_multiple_of(32) {
        return Err(Error::Protocol("ragged group element vector".into()));
    }
    body.chunks_exact(32)
        .map(|c| {
            let p = CompressedRistretto::from_slice(c)
                .map_err(|_| Error::GroupDecode)?
                .decompress()
                .ok_or(Error::GroupDecode)?;
            Ok((p * k).compress().to_bytes())
        })
        .collect()
}

/// Alice's side of Diffie-Hellman PSI.
pub fn dh_psi_sender<R: RngCore + CryptoRng>(ch: &mut Channel, items: &[u128], rng: &mut R) -> Result<()> {
    let a = Scalar::random(rng);
    let mut mine: Vec<[u8; 32]> = items
        .iter()
        .map(|&x| (hash_to_point(&encode_element(x)) * a).compress().to_bytes())
        .collect();
    mine.shuffle(rng);
    ch.send_msg(MsgKind::DhPsiA, &mine.concat())?;
    let theirs = ch.recv_msg(MsgKind::DhPsiB)?;
    let both = points_times(&theirs, &a)?;
    ch.send_msg(MsgKind::DhPsiAB, &both.concat())
}

/// Bob's side of Diffie-Hellman PSI; returns indices of his items in the
/// intersection, ascending.
pub fn dh_psi_receiver<R: RngCore + CryptoRng>(ch: &mut Channel, items: &[u128], rng: &mut R) -> Result<Vec<usize>> {
    let b = Scalar::random(rng);
    let from_alice = ch.recv_msg(MsgKind::DhPsiA)?;
    let mine: Vec<[u8; 32]> = items
        .iter()
        .map(|&x| (hash_to_point(&encode_element(x)) * b).compress().to_bytes())
        .collect();
    ch.send_msg(MsgKind::DhPsiB, &mine.concat())?;
    let alice_ab: HashSet<[u8; 32]> = points_times(&from_alice, &b)?.into_iter().collect();
    let back = ch.recv_msg(MsgKind::DhPsiAB)?;
    if back.len() != 32 * items.len() {
        return Err(Error::Protocol("DH-PSI reply has the wrong length".into()));
    }
    Ok(back
        .chunks_exact(32)
        .enumerate()
        .filter(|(_, c)| alice_ab.contains(<&[u8; 32]>::try_from(*c).unwrap()))
        .map(|(i, _)| i)
        .collect())
}

/// Alice's output of circuit-PSI: one random value per Bob bin.
#[derive(Clone, Debug)]
pub struct CircuitSender {
    pub values: Vec<u128>,
    pub bound: usize,
}

/// Bob's output of circuit-PSI: his cuckoo table and the value obtained for
/// each bin.
#[derive(Clone, Debug)]
pub struct CircuitReceiver {
    pub table: CuckooTable,
    pub values: Vec<u128>,
}

pub fn psi_circuit_sender<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    items: &[u128],
    rng: &mut R,
) -> Result<CircuitSender> {
    let params = CuckooParams::from_bytes(&ch.recv_msg(MsgKind::CuckooParams)?)?;
    let bins = cuckoo::simple_hash(items, &params);
    let bound = cuckoo::max_bin_load(items.len(), params.mu, params.h(), cuckoo::LAMBDA);
    if let Some((bin, b)) = bins.iter().enumerate().find(|(_, b)| b.len() > bound) {
        return Err(Error::BinOverflow {
            bin,
            load: b.len(),
            bound,
        });
    }
    let mut program = OpprfProgram::new(OprfKey::random(rng));
    let mut values = Vec::with_capacity(params.mu);
    for (b, members) in bins.iter().enumerate() {
        let rho: u128 = rng.gen();
        let points: Vec<([u8; 21], u128)> = members
            .iter()
            .map(|&i| (encode_bin_element(b as u32, items[i]), rho))
            .collect();
        program.program_slot(&points, bound, rng)?;
        values.push(rho);
    }
    oprf::respond(ch, program.key())?;
    ch.send_msg(MsgKind::OpprfHints, &program.into_hints().to_bytes())?;
    Ok(CircuitSender { values, bound })
}

pub fn psi_circuit_receiver<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    items: &[u128],
    rng: &mut R,
) -> Result<CircuitReceiver> {
    let mu = cuckoo::bin_count(items.len(), cuckoo::EXPANSION);
    let table = cuckoo::cuckoo_insert_all(items, mu, cuckoo::HASHES, rng)?;
    ch.send_msg(MsgKind::CuckooParams, &table.params.to_bytes())?;
    let queries: Vec<[u8; 21]> = table
        .bins
        .iter()
        .enumerate()
        .map(|(b, slot)| {
            let e = match slot {
                Some(i) => items[*i],
                None => rng.gen(),
            };
            encode_bin_element(b as u32, e)
        })
        .collect();
    let outs = oprf::request(ch, &queries, rng)?;
    let hints = Hints::from_bytes(&ch.recv_msg(MsgKind::OpprfHints)?)?;
    if hints.slots.len() != outs.len() {
        return Err(Error::Protocol("hint count differs from bin count".into()));
    }
    let values = outs.iter().enumerate().map(|(b, &o)| hints.eval(b, o)).collect();
    Ok(CircuitReceiver { table, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn planted(n: usize, overlap: usize, seed: u64) -> (Vec<u128>, Vec<u128>, HashSet<u128>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let common: Vec<u128> = (0..overlap).map(|_| rng.gen()).collect();
        let mut a: Vec<u128> = (0..n - overlap).map(|_| rng.gen()).collect();
        let mut b: Vec<u128> = (0..n - overlap).map(|_| rng.gen()).collect();
        a.extend(&common);
        b.extend(&common);
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        (a, b, common.into_iter().collect())
    }

    type Receiver = fn(&mut Channel, &[u128], &mut ChaCha20Rng) -> Result<Vec<usize>>;
    type Sender = fn(&mut Channel, &[u128], &mut ChaCha20Rng) -> Result<()>;

    fn run(a: Vec<u128>, b: &[u128], send: Sender, recv: Receiver) -> HashSet<u128> {
        let (mut ca, mut cb) = Channel::pair();
        let h = std::thread::spawn(move || send(&mut ca, &a, &mut ChaCha20Rng::seed_from_u64(10)).unwrap());
        let idx = recv(&mut cb, b, &mut ChaCha20Rng::seed_from_u64(11)).unwrap();
        h.join().unwrap();
        idx.into_iter().map(|i| b[i]).collect()
    }

    const BACKENDS: [(Sender, Receiver); 2] =
        [(psi_plain_sender, psi_plain_receiver), (dh_psi_sender, dh_psi_receiver)];

    #[test]
    fn plain_backends_agree_with_oracle() {
        for (s, r) in BACKENDS {
            let (a, b, common) = planted(1000, 100, 1);
            assert_eq!(run(a, &b, s, r), common);
            let (a, b, _) = planted(50, 0, 2);
            assert!(run(a, &b, s, r).is_empty());
            let (a, _, _) = planted(40, 0, 3);
            let full: HashSet<u128> = a.iter().copied().collect();
            assert_eq!(run(a.clone(), &a, s, r), full);
            assert_eq!(run(vec![9], &[9], s, r), HashSet::from([9]));
        }
    }

    #[test]
    fn dh_exponentiation_commutes() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (a, b) = (Scalar::random(&mut rng), Scalar::random(&mut rng));
        let h = hash_to_point(b"m");
        assert_eq!((h * a) * b, (h * b) * a);
    }

    fn circuit(a: Vec<u128>, b: Vec<u128>) -> (CircuitSender, CircuitReceiver, Vec<u128>) {
        let (mut ca, mut cb) = Channel::pair();
        let h =
            std::thread::spawn(move || psi_circuit_sender(&mut ca, &a, &mut ChaCha20Rng::seed_from_u64(5)).unwrap());
        let r = psi_circuit_receiver(&mut cb, &b, &mut ChaCha20Rng::seed_from_u64(6)).unwrap();
        (h.join().unwrap(), r, b)
    }

    #[test]
    fn circuit_values_match_membership_per_bin() {
        let (a, b, common) = planted(300, 40, 7);
        let (s, r, b) = circuit(a, b);
        assert_eq!(s.values.len(), r.values.len());
        for (bin, slot) in r.table.bins.iter().enumerate() {
            let member = slot.map(|i| common.contains(&b[i])).unwrap_or(false);
            assert_eq!(s.values[bin] == r.values[bin], member, "bin {bin}");
        }
    }

    #[test]
    fn circuit_subset_and_disjoint() {
        let (a, _, _) = planted(60, 0, 8);
        let b: Vec<u128> = a[..25].to_vec();
        let (s, r, _) = circuit(a, b);
        for (bin, slot) in r.table.bins.iter().enumerate() {
            assert_eq!(s.values[bin] == r.values[bin], slot.is_some());
        }
        let (a, b, _) = planted(60, 0, 9);
        let (s, r, _) = circuit(a, b);
        assert!(s.values.iter().zip(&r.values).all(|(x, y)| x != y));
    }
}
