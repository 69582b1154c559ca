//! Imputation over a vertical split: both parties hold the same rows, each
//! with its own attributes, and the row id is the common identifier.
//!
//! Each party finds the rows matching the query on its own attributes, pads
//! that set with dummies, and the two sets are intersected. The plain variant
//! reveals the intersection to Bob; the blind ones leave only shared
//! membership bits per cuckoo bin.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{Outcome, MEAN_QUOTIENT_BITS, SAMPLING_BITS};
use crate::crypto::hash::element_id;
use crate::crypto::psi;
use crate::dataset::Table;
use crate::error::{Error, Result};
use crate::mpc::{Arith, Engine, Party, TripleProvider};
use crate::net::codec::Reader;
use crate::net::{Channel, MsgKind};
use crate::rnn::{attributes_match, fixed_mean, QuantizationScheme};

/// Default padding granularity as a fraction of the row count.
pub const DEFAULT_PADDING: f64 = 0.05;

/// Dummy identifiers have this bit set; row ids never do.
pub const DUMMY_BIT: u64 = 1 << 63;

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

    fn from_code(b: u8) -> Result<Variant> {
        Variant::ALL
            .get(b as usize)
            .copied()
            .ok_or_else(|| Error::Protocol(format!("unknown vertical variant {b}")))
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
            .ok_or_else(|| Error::Config(format!("unknown vertical variant {s:?}")))
    }
}

/// Set intersection used by the plain variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsiBackend {
    Oprf,
    Dh,
}

impl FromStr for PsiBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<PsiBackend> {
        match s {
            "oprf" => Ok(PsiBackend::Oprf),
            "dh" => Ok(PsiBackend::Dh),
            _ => Err(Error::Config(format!("unknown PSI backend {s:?}"))),
        }
    }
}

/// One party's columns with radii for them, in the table's column order.
#[derive(Clone, Debug)]
pub struct AliceInput<'a> {
    pub table: &'a Table,
    pub scheme: &'a QuantizationScheme,
    pub padding: f64,
}

#[derive(Clone, Debug)]
pub struct BobInput<'a> {
    pub table: &'a Table,
    pub scheme: &'a QuantizationScheme,
    pub alpha: usize,
    /// Index of the imputed attribute among Bob's columns.
    pub beta: usize,
    pub variant: Variant,
    pub psi: PsiBackend,
    pub padding: f64,
}

/// Rows other than `alpha` whose own attributes match row `alpha`. With
/// `beta` set, the rows must also carry a value there and `beta` is not
/// compared.
pub fn local_neighbors(t: &Table, alpha: usize, beta: Option<usize>, s: &QuantizationScheme) -> Vec<usize> {
    let q = t.row(alpha);
    (0..t.n())
        .filter(|&w| w != alpha)
        .filter(|&w| beta.is_none_or(|b| t.get(w, b).is_some()))
        .filter(|&w| attributes_match(q, t.row(w), beta, s))
        .collect()
}

/// Pads `indices` with fresh dummy ids up to the next multiple of
/// `ceil(rho * n)`, and to at least one such block.
pub fn pad_set<R: RngCore>(indices: &[usize], n: usize, rho: f64, rng: &mut R) -> Result<Vec<u64>> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::Config(format!("padding fraction {rho} must be positive")));
    }
    let block = ((rho * n as f64).ceil() as usize).max(1);
    let size = indices.len().div_ceil(block).max(1) * block;
    let mut out: Vec<u64> = indices.iter().map(|&i| i as u64).collect();
    while out.len() < size {
        out.push(DUMMY_BIT | rng.next_u64());
    }
    Ok(out)
}

fn elements(salt: &[u8; 16], ids: &[u64]) -> Vec<u128> {
    ids.iter().map(|&id| element_id(salt, id)).collect()
}

/// Runs Alice's side. She learns `α` and the variant.
pub fn run_alice(ch: &mut Channel, input: &AliceInput, triples: TripleProvider, seed: u64) -> Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t = input.table;
    if input.scheme.m() != t.m() {
        return Err(Error::Config(format!(
            "{} radii for {} attributes",
            input.scheme.m(),
            t.m()
        )));
    }
    let mut hello = (t.n() as u64).to_be_bytes().to_vec();
    hello.extend_from_slice(&(t.m() as u16).to_be_bytes());
    ch.send_msg(MsgKind::Hello, &hello)?;
    let q = ch.recv_msg(MsgKind::Query)?;
    let mut r = Reader::new(&q);
    let variant = Variant::from_code(r.u8()?)?;
    let alpha = r.u64()? as usize;
    let salt: [u8; 16] = r.take(16)?.try_into().unwrap();
    let backend = r.u8()?;
    r.finish()?;
    if alpha >= t.n() {
        return Err(Error::Protocol(format!("row {alpha} out of range")));
    }

    let local = local_neighbors(t, alpha, None, input.scheme);
    let ids = pad_set(&local, t.n(), input.padding, &mut rng)?;
    let items = elements(&salt, &ids);
    match variant {
        Variant::PlainMean | Variant::PlainRandom => {
            match backend {
                0 => psi::psi_plain_sender(ch, &items, &mut rng)?,
                1 => psi::dh_psi_sender(ch, &items, &mut rng)?,
                b => return Err(Error::Protocol(format!("unknown PSI backend {b}"))),
            }
            ch.close_phase("psi");
            ch.close_mpc_phase(0);
        }
        Variant::BlindMean | Variant::BlindRandom => {
            let out = psi::psi_circuit_sender(ch, &items, &mut rng)?;
            ch.close_phase("psi");
            let mut e = Engine::new(Party::Alice, ch, triples, rng.gen());
            let flags = e.eq_u128_private(&out.values)?;
            let vals = e.share_arith(Party::Bob, None, out.values.len())?;
            blind_tail(&mut e, variant, &flags, &vals)?;
            let build = e.build_nanos();
            drop(e);
            ch.close_mpc_phase(build);
        }
    }
    Ok(())
}

/// Runs Bob's side and returns the imputed value.
pub fn run_bob(ch: &mut Channel, input: &BobInput, triples: TripleProvider, seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t = input.table;
    let (alpha, beta) = (input.alpha, input.beta);
    if input.scheme.m() != t.m() {
        return Err(Error::Config(format!(
            "{} radii for {} attributes",
            input.scheme.m(),
            t.m()
        )));
    }
    if alpha >= t.n() || beta >= t.m() {
        return Err(Error::Config(format!("query cell ({alpha}, {beta}) out of range")));
    }
    let hello = ch.recv_msg(MsgKind::Hello)?;
    let mut r = Reader::new(&hello);
    let n = r.u64()? as usize;
    r.u16()?;
    r.finish()?;
    if n != t.n() {
        return Err(Error::Protocol(format!("Alice has {n} rows, Bob {}", t.n())));
    }
    let salt: [u8; 16] = rng.gen();
    let mut q = vec![input.variant as u8];
    q.extend_from_slice(&(alpha as u64).to_be_bytes());
    q.extend_from_slice(&salt);
    q.push(match input.psi {
        PsiBackend::Oprf => 0,
        PsiBackend::Dh => 1,
    });
    ch.send_msg(MsgKind::Query, &q)?;

    let local = local_neighbors(t, alpha, Some(beta), input.scheme);
    let ids = pad_set(&local, t.n(), input.padding, &mut rng)?;
    let items = elements(&salt, &ids);
    let value = |id: u64| -> Option<i64> {
        if id & DUMMY_BIT != 0 {
            None
        } else {
            t.get(id as usize, beta)
        }
    };
    match input.variant {
        Variant::PlainMean | Variant::PlainRandom => {
            let hits = match input.psi {
                PsiBackend::Oprf => psi::psi_plain_receiver(ch, &items, &mut rng)?,
                PsiBackend::Dh => psi::dh_psi_receiver(ch, &items, &mut rng)?,
            };
            ch.close_phase("psi");
            ch.close_mpc_phase(0);
            let vals: Vec<i64> = hits.iter().filter_map(|&i| value(ids[i])).collect();
            Ok(plain_outcome(&vals, input.variant, &mut rng))
        }
        Variant::BlindMean | Variant::BlindRandom => {
            let out = psi::psi_circuit_receiver(ch, &items, &mut rng)?;
            ch.close_phase("psi");
            let per_bin: Vec<u64> = out
                .table
                .bins
                .iter()
                .map(|b| b.and_then(|i| value(ids[i])).unwrap_or(0) as u64)
                .collect();
            let mut e = Engine::new(Party::Bob, ch, triples, rng.gen());
            let flags = e.eq_u128_private(&out.values)?;
            let vals = e.share_arith(Party::Bob, Some(&per_bin), per_bin.len())?;
            let res = blind_tail(&mut e, input.variant, &flags, &vals)?;
            let build = e.build_nanos();
            drop(e);
            ch.close_mpc_phase(build);
            res.ok_or_else(|| Error::Protocol("no output at Bob".into()))
        }
    }
}

fn plain_outcome<R: Rng>(vals: &[i64], variant: Variant, rng: &mut R) -> Outcome {
    if vals.is_empty() {
        return Outcome::NoNeighbor;
    }
    match variant {
        Variant::PlainMean => Outcome::Value(fixed_mean(vals).expect("non-empty")),
        _ => Outcome::Value(vals[rng.gen_range(0..vals.len())]),
    }
}

/// Mean or uniform sample over flagged bins, revealed to Bob.
fn blind_tail(e: &mut Engine, variant: Variant, flags: &crate::mpc::Bool, vals: &Arith) -> Result<Option<Outcome>> {
    let (sum, count) = e.conditional_sum(flags, vals)?;
    if variant == Variant::BlindMean {
        let out = e.shared_div_reveal(&sum, &count, Party::Bob, MEAN_QUOTIENT_BITS)?;
        return Ok(out.map(|v| match v[0] {
            Some(x) => Outcome::Value(x),
            None => Outcome::NoNeighbor,
        }));
    }
    let r = e.joint_random(SAMPLING_BITS, 1)?;
    let mu = e.scale_and_truncate(&r, &count, SAMPLING_BITS)?;
    let v = e.select_at_shared_index(flags, vals, &mu)?;
    let zero = e.const_arith(&[0]);
    let empty = e.eq(&count, &zero)?;
    let v = e.reveal_arith(&v, Party::Bob)?;
    let empty = e.reveal_bool(&empty, Party::Bob)?;
    Ok(match (v, empty) {
        (Some(v), Some(z)) => Some(if z[0] & 1 == 1 {
            Outcome::NoNeighbor
        } else {
            Outcome::Value(v[0] as i64)
        }),
        _ => None,
    })
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Cell;
    use crate::rnn::{impute_oracle, is_neighbor, ImputeMode};
    use std::collections::HashSet;

    fn table(rows: Vec<Vec<Cell>>) -> Table {
        let m = rows[0].len();
        Table::from_rows((0..m).map(|j| format!("a{j}")).collect(), 1, rows).unwrap()
    }

    #[test]
    fn padding_sizes() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(pad_set(&[1, 2, 3], 200, 0.05, &mut rng).unwrap().len(), 10);
        assert_eq!(
            pad_set(&(0..10).collect::<Vec<_>>(), 200, 0.05, &mut rng)
                .unwrap()
                .len(),
            10
        );
        assert_eq!(
            pad_set(&(0..11).collect::<Vec<_>>(), 200, 0.05, &mut rng)
                .unwrap()
                .len(),
            20
        );
        assert_eq!(pad_set(&[], 200, 0.05, &mut rng).unwrap().len(), 10);
        let p = pad_set(&[4], 200, 0.05, &mut rng).unwrap();
        assert_eq!(p[0], 4);
        assert!(p[1..].iter().all(|&d| d & DUMMY_BIT != 0));
        assert!(pad_set(&[1], 10, 0.0, &mut rng).is_err());
    }

    #[test]
    fn dummies_never_meet() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut clashes = 0;
        for _ in 0..10_000 {
            let a: HashSet<u64> = pad_set(&[0, 1], 100, 0.05, &mut rng).unwrap().into_iter().collect();
            let b = pad_set(&[1, 2], 100, 0.05, &mut rng).unwrap();
            clashes += b.iter().filter(|&&d| d & DUMMY_BIT != 0 && a.contains(&d)).count();
        }
        assert_eq!(clashes, 0);
    }

    #[test]
    fn local_sets_intersect_to_global_neighbors() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s = QuantizationScheme::uniform(5, 4).unwrap();
        for _ in 0..50 {
            let rows: Vec<Vec<Cell>> = (0..60)
                .map(|_| {
                    (0..5)
                        .map(|_| (rng.gen_bool(0.85)).then(|| rng.gen_range(0..12)))
                        .collect()
                })
                .collect();
            let full = table(rows);
            let alpha = rng.gen_range(0..60);
            let cut = rng.gen_range(1..4);
            let beta = 4;
            let ta = full.select_columns(&(0..cut).collect::<Vec<_>>());
            let tb = full.select_columns(&(cut..5).collect::<Vec<_>>());
            let la: HashSet<usize> = local_neighbors(&ta, alpha, None, &s.select(&(0..cut).collect::<Vec<_>>()))
                .into_iter()
                .collect();
            let lb = local_neighbors(&tb, alpha, Some(beta - cut), &s.select(&(cut..5).collect::<Vec<_>>()));
            let both: Vec<usize> = lb.into_iter().filter(|w| la.contains(w)).collect();
            let mut q = full.row(alpha).to_vec();
            q[beta] = None;
            let want: Vec<usize> = (0..60)
                .filter(|&w| w != alpha && is_neighbor(&q, full.row(w), beta, &s))
                .collect();
            assert_eq!(both, want);
        }
    }

    #[test]
    fn local_neighbors_edge_cases() {
        let t = table(vec![vec![Some(1), None], vec![Some(100), Some(3)], vec![Some(2), None]]);
        let s = QuantizationScheme::uniform(2, 4).unwrap();
        assert_eq!(local_neighbors(&t, 0, Some(1), &s), Vec::<usize>::new());
        assert_eq!(local_neighbors(&t, 0, None, &s), vec![2]);
    }

    fn session(full: &Table, cut: usize, alpha: usize, variant: Variant, psi: PsiBackend, seed: u64) -> Outcome {
        let m = full.m();
        let s = QuantizationScheme::uniform(m, 10).unwrap();
        let (ca, cb): (Vec<usize>, Vec<usize>) = ((0..cut).collect(), (cut..m).collect());
        let (ta, tb) = (full.select_columns(&ca), full.select_columns(&cb));
        let (sa, sb) = (s.select(&ca), s.select(&cb));
        let a = AliceInput {
            table: &ta,
            scheme: &sa,
            padding: DEFAULT_PADDING,
        };
        let b = BobInput {
            table: &tb,
            scheme: &sb,
            alpha,
            beta: m - 1 - cut,
            variant,
            psi,
            padding: DEFAULT_PADDING,
        };
        run_local(&a, &b, seed).unwrap().output
    }

    #[test]
    fn variants_match_the_oracle() {
        let full = table(vec![
            vec![Some(0), Some(0), None],
            vec![Some(3), Some(-2), Some(10)],
            vec![Some(1), None, Some(13)],
            vec![None, Some(4), Some(40)],
            vec![Some(90), Some(0), Some(1000)],
            vec![Some(0), Some(80), Some(2000)],
            vec![Some(0), Some(0), None],
        ]);
        let s = QuantizationScheme::uniform(3, 10).unwrap();
        let want = impute_oracle(&full, full.row(0), 2, &s, ImputeMode::Mean).unwrap();
        assert_eq!(want, 21);
        for psi in [PsiBackend::Oprf, PsiBackend::Dh] {
            assert_eq!(session(&full, 1, 0, Variant::PlainMean, psi, 1), Outcome::Value(want));
        }
        assert_eq!(
            session(&full, 1, 0, Variant::BlindMean, PsiBackend::Oprf, 2),
            Outcome::Value(want)
        );
        for v in [Variant::PlainRandom, Variant::BlindRandom] {
            for seed in 0..4 {
                let got = session(&full, 2, 0, v, PsiBackend::Oprf, seed).value().unwrap();
                assert!([10, 13, 40].contains(&got), "{v} gave {got}");
            }
        }
    }

    #[test]
    fn disjoint_local_sets_give_no_neighbor() {
        let full = table(vec![
            vec![Some(0), Some(0), None],
            vec![Some(0), Some(90), Some(1)],
            vec![Some(90), Some(0), Some(2)],
        ]);
        for v in Variant::ALL {
            assert_eq!(session(&full, 1, 0, v, PsiBackend::Oprf, 5), Outcome::NoNeighbor, "{v}");
        }
    }
}
