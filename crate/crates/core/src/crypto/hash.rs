//! Input encodings and hashing shared by the OPRF-based constructions.

use curve25519_dalek::ristretto::RistrettoPoint;
use sha2::{Digest, Sha256, Sha512};

const POINT_TAG: u8 = 0x00;
const BOTTOM_TAG: u8 = 0x01;
const BIN_TAG: u8 = 0x02;
const ELEMENT_TAG: u8 = 0x03;

/// Encodes a quantized attribute value of Alice's tuple `omega`, attribute
/// `j`: tag ‖ ω (4 bytes) ‖ j (2 bytes) ‖ q1 (8 bytes) ‖ q2 (8 bytes), all
/// big-endian.
pub fn encode_point(omega: u32, j: u16, q1: i64, q2: i64) -> [u8; 23] {
    encode(POINT_TAG, omega, j, q1, q2)
}

/// Encoding of a missing attribute value.
pub fn encode_bottom(omega: u32, j: u16) -> [u8; 23] {
    encode(BOTTOM_TAG, omega, j, 0, 0)
}

fn encode(tag: u8, omega: u32, j: u16, q1: i64, q2: i64) -> [u8; 23] {
    let mut out = [0u8; 23];
    out[0] = tag;
    out[1..5].copy_from_slice(&omega.to_be_bytes());
    out[5..7].copy_from_slice(&j.to_be_bytes());
    out[7..15].copy_from_slice(&q1.to_be_bytes());
    out[15..23].copy_from_slice(&q2.to_be_bytes());
    out
}

/// Encodes a set element placed in cuckoo bin `bin`.
pub fn encode_bin_element(bin: u32, element: u128) -> [u8; 21] {
    let mut out = [0u8; 21];
    out[0] = BIN_TAG;
    out[1..5].copy_from_slice(&bin.to_be_bytes());
    out[5..].copy_from_slice(&element.to_be_bytes());
    out
}

pub fn encode_element(element: u128) -> [u8; 17] {
    let mut out = [0u8; 17];
    out[0] = ELEMENT_TAG;
    out[1..].copy_from_slice(&element.to_be_bytes());
    out
}

/// 128-bit set element for a row identifier under a session salt.
pub fn element_id(salt: &[u8; 16], id: u64) -> u128 {
    let digest = Sha256::new()
        .chain_update(b"privimpute/element")
        .chain_update(salt)
        .chain_update(id.to_be_bytes())
        .finalize();
    u128::from_be_bytes(digest[..16].try_into().unwrap())
}

pub fn hash_to_point(input: &[u8]) -> RistrettoPoint {
    RistrettoPoint::hash_from_bytes::<Sha512>(input)
}

/// Final PRF output derived from an input and its keyed group element.
pub fn finalize(input: &[u8], point: &[u8; 32]) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"privimpute/oprf")
        .chain_update((input.len() as u32).to_be_bytes())
        .chain_update(input)
        .chain_update(point)
        .finalize()
        .into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_layout() {
        let e = encode_point(0x0102_0304, 0x0506, -1, 2);
        assert_eq!(e[0], 0);
        assert_eq!(&e[1..5], &[1, 2, 3, 4]);
        assert_eq!(&e[5..7], &[5, 6]);
        assert_eq!(&e[7..15], &[0xff; 8]);
        assert_eq!(&e[15..23], &[0, 0, 0, 0, 0, 0, 0, 2]);
        let b = encode_bottom(7, 1);
        assert_eq!(b[0], 1);
        assert!(b[7..].iter().all(|&x| x == 0));
        assert_ne!(b, encode_point(7, 1, 0, 0));
    }

    #[test]
    fn element_ids_depend_on_salt() {
        assert_ne!(element_id(&[0; 16], 5), element_id(&[1; 16], 5));
        assert_ne!(element_id(&[0; 16], 5), element_id(&[0; 16], 6));
    }
}
