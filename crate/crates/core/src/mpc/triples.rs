//! Beaver multiplication triples.
//!
//! Dealer mode derives both parties' triples from a shared seed. It models
//! an offline phase for testing and benchmarking; anyone holding the seed can
//! reconstruct every triple, so it provides no security of its own. File
//! mode reads triples produced elsewhere.
//!
//! File layout: 4-byte magic `PITR`, triple count (u64 LE), ring bits
//! (u32 LE; 64 for arithmetic triples, 1 for boolean word triples), then
//! `count` little-endian `(a, b, c)` words.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::Party;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PITR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ring {
    Arith,
    Bool,
}

impl Ring {
    fn bits(self) -> u32 {
        match self {
            Ring::Arith => 64,
            Ring::Bool => 1,
        }
    }
}

/// One party's share of a batch of triples, as parallel vectors.
#[derive(Clone, Debug, Default)]
pub struct TripleBatch {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
}

enum Stream {
    Dealer(Box<ChaCha20Rng>),
    File { reader: BufReader<File>, remaining: u64 },
}

struct Source {
    ring: Ring,
    stream: Stream,
    consumed: u64,
}

fn dealer_triple(rng: &mut ChaCha20Rng, ring: Ring, party: Party) -> (u64, u64, u64) {
    let (a0, b0, c0, a1, b1) = (
        rng.next_u64(),
        rng.next_u64(),
        rng.next_u64(),
        rng.next_u64(),
        rng.next_u64(),
    );
    match party {
        Party::Alice => (a0, b0, c0),
        Party::Bob => {
            let c1 = match ring {
                Ring::Arith => a0.wrapping_add(a1).wrapping_mul(b0.wrapping_add(b1)).wrapping_sub(c0),
                Ring::Bool => ((a0 ^ a1) & (b0 ^ b1)) ^ c0,
            };
            (a1, b1, c1)
        }
    }
}

impl Source {
    fn fetch(&mut self, party: Party, n: usize) -> Result<TripleBatch> {
        let mut out = TripleBatch {
            a: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
        };
        match &mut self.stream {
            Stream::Dealer(rng) => {
                for _ in 0..n {
                    let (a, b, c) = dealer_triple(rng, self.ring, party);
                    out.a.push(a);
                    out.b.push(b);
                    out.c.push(c);
                }
            }
            Stream::File { reader, remaining } => {
                if (*remaining) < n as u64 {
                    return Err(Error::TriplesExhausted);
                }
                let mut buf = [0u8; 24];
                for _ in 0..n {
                    reader.read_exact(&mut buf)?;
                    out.a.push(u64::from_le_bytes(buf[..8].try_into().unwrap()));
                    out.b.push(u64::from_le_bytes(buf[8..16].try_into().unwrap()));
                    out.c.push(u64::from_le_bytes(buf[16..].try_into().unwrap()));
                }
                *remaining -= n as u64;
            }
        }
        self.consumed += n as u64;
        Ok(out)
    }
}

/// Supplies each triple exactly once and tracks how many were used.
pub struct TripleProvider {
    party: Party,
    arith: Source,
    boolean: Source,
    build_nanos: u64,
}

impl TripleProvider {
    /// Non-private dealer: both parties must use the same seed.
    pub fn dealer(party: Party, seed: u64) -> Self {
        let mut root = ChaCha20Rng::seed_from_u64(seed);
        let arith = ChaCha20Rng::seed_from_u64(root.next_u64());
        let boolean = ChaCha20Rng::seed_from_u64(root.next_u64());
        TripleProvider {
            party,
            arith: Source {
                ring: Ring::Arith,
                stream: Stream::Dealer(Box::new(arith)),
                consumed: 0,
            },
            boolean: Source {
                ring: Ring::Bool,
                stream: Stream::Dealer(Box::new(boolean)),
                consumed: 0,
            },
            build_nanos: 0,
        }
    }

    pub fn from_files(party: Party, arith: &Path, boolean: &Path) -> Result<Self> {
        let open = |p: &Path, ring: Ring| -> Result<Source> {
            let mut reader = BufReader::new(File::open(p)?);
            let mut header = [0u8; 16];
            reader
                .read_exact(&mut header)
                .map_err(|_| Error::TripleFile(format!("{}: short header", p.display())))?;
            if &header[..4] != MAGIC {
                return Err(Error::TripleFile(format!("{}: bad magic", p.display())));
            }
            let count = u64::from_le_bytes(header[4..12].try_into().unwrap());
            let bits = u32::from_le_bytes(header[12..].try_into().unwrap());
            if bits != ring.bits() {
                return Err(Error::TripleFile(format!(
                    "{}: ring of {bits} bits, expected {}",
                    p.display(),
                    ring.bits()
                )));
            }
            Ok(Source {
                ring,
                stream: Stream::File {
                    reader,
                    remaining: count,
                },
                consumed: 0,
            })
        };
        Ok(TripleProvider {
            party,
            arith: open(arith, Ring::Arith)?,
            boolean: open(boolean, Ring::Bool)?,
            build_nanos: 0,
        })
    }

    pub fn arith(&mut self, n: usize) -> Result<TripleBatch> {
        let t = Instant::now();
        let out = self.arith.fetch(self.party, n);
        self.build_nanos += t.elapsed().as_nanos() as u64;
        out
    }

    pub fn boolean(&mut self, n: usize) -> Result<TripleBatch> {
        let t = Instant::now();
        let out = self.boolean.fetch(self.party, n);
        self.build_nanos += t.elapsed().as_nanos() as u64;
        out
    }

    pub fn consumed(&self) -> (u64, u64) {
        (self.arith.consumed, self.boolean.consumed)
    }

    /// Time spent producing triples, reported as the build phase.
    pub fn build_nanos(&self) -> u64 {
        self.build_nanos
    }
}

/// Writes matching dealer triple files for both parties.
pub fn write_dealer_files(seed: u64, ring: Ring, count: u64, alice: &Path, bob: &Path) -> Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut outs = [BufWriter::new(File::create(alice)?), BufWriter::new(File::create(bob)?)];
    for w in outs.iter_mut() {
        w.write_all(MAGIC)?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&ring.bits().to_le_bytes())?;
    }
    for _ in 0..count {
        let mut fork = rng.clone();
        let ta = dealer_triple(&mut rng, ring, Party::Alice);
        let tb = dealer_triple(&mut fork, ring, Party::Bob);
        for (w, (a, b, c)) in outs.iter_mut().zip([ta, tb]) {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for w in outs.iter_mut() {
        w.flush()?;
    }
    Ok(())
}
