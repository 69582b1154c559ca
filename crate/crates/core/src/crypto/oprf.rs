//! Blinded Diffie-Hellman OPRF over ristretto255.
//!
//! `F_k(x) = SHA-256(x ‖ (H(x)·k))`. The client sends `H(x)·ρ` for a fresh
//! scalar `ρ` per input, the server multiplies by `k`, and the client strips
//! `ρ`. The server sees only uniformly random group elements.

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::{CryptoRng, RngCore};

use super::hash::{finalize, hash_to_point};
use crate::error::{Error, Result};
use crate::net::{Channel, MsgKind};

/// A PRF output split into a lookup tag and a one-time pad.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrfOutput {
    pub tag: u128,
    pub pad: u128,
}

impl From<[u8; 32]> for PrfOutput {
    fn from(b: [u8; 32]) -> Self {
        PrfOutput {
            tag: u128::from_le_bytes(b[..16].try_into().unwrap()),
            pad: u128::from_le_bytes(b[16..].try_into().unwrap()),
        }
    }
}

#[derive(Clone)]
pub struct OprfKey(Scalar);

impl OprfKey {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        OprfKey(Scalar::random(rng))
    }

    /// Local evaluation, available to the key holder.
    pub fn eval(&self, input: &[u8]) -> PrfOutput {
        let point = (hash_to_point(input) * self.0).compress();
        finalize(input, point.as_bytes()).into()
    }

    /// Exponentiates compressed points supplied by a client.
    pub fn respond_to(&self, request: &[u8]) -> Result<Vec<u8>> {
        if !request.len().is_multiple_of(32) {
            return Err(Error::Protocol("ragged OPRF request".into()));
        }
        let mut out = Vec::with_capacity(request.len());
        for chunk in request.chunks_exact(32) {
            let p = decompress(chunk)?;
            out.extend_from_slice((p * self.0).compress().as_bytes());
        }
        Ok(out)
    }
}

fn decompress(b: &[u8]) -> Result<RistrettoPoint> {
    CompressedRistretto::from_slice(b)
        .map_err(|_| Error::GroupDecode)?
        .decompress()
        .ok_or(Error::GroupDecode)
}

/// Client state between sending a request and receiving the response.
pub struct Blinded {
    inverses: Vec<Scalar>,
}

pub fn blind<R: RngCore + CryptoRng, I: AsRef<[u8]>>(inputs: &[I], rng: &mut R) -> (Blinded, Vec<u8>) {
    let mut rhos: Vec<Scalar> = (0..inputs.len()).map(|_| Scalar::random(rng)).collect();
    let mut msg = Vec::with_capacity(32 * inputs.len());
    for (x, rho) in inputs.iter().zip(&rhos) {
        msg.extend_from_slice((hash_to_point(x.as_ref()) * rho).compress().as_bytes());
    }
    Scalar::batch_invert(&mut rhos);
    (Blinded { inverses: rhos }, msg)
}

pub fn unblind<I: AsRef<[u8]>>(state: Blinded, inputs: &[I], response: &[u8]) -> Result<Vec<PrfOutput>> {
    if response.len() != 32 * inputs.len() {
        return Err(Error::Protocol("OPRF response has the wrong length".into()));
    }
    inputs
        .iter()
        .zip(response.chunks_exact(32))
        .zip(&state.inverses)
        .map(|((x, chunk), inv)| {
            let p = (decompress(chunk)? * inv).compress();
            Ok(finalize(x.as_ref(), p.as_bytes()).into())
        })
        .collect()
}

/// Client side of one batched OPRF session.
pub fn request<R: RngCore + CryptoRng, I: AsRef<[u8]>>(
    ch: &mut Channel,
    inputs: &[I],
    rng: &mut R,
) -> Result<Vec<PrfOutput>> {
    let (state, msg) = blind(inputs, rng);
    ch.send_msg(MsgKind::OprfRequest, &msg)?;
    let resp = ch.recv_msg(MsgKind::OprfResponse)?;
    unblind(state, inputs, &resp)
}

/// Server side of one batched OPRF session; returns the number of inputs
/// served.
pub fn respond(ch: &mut Channel, key: &OprfKey) -> Result<usize> {
    let req = ch.recv_msg(MsgKind::OprfRequest)?;
    let resp = key.respond_to(&req)?;
    ch.send_msg(MsgKind::OprfResponse, &resp)?;
    Ok(req.len() / 32)
}
