//! Cuckoo hashing for the receiver side of circuit-PSI, simple hashing for
//! the sender side, and the sender's per-bin load bound.

use rand::Rng;

use crate::error::{Error, Result};

pub const HASHES: usize = 3;
pub const EXPANSION: f64 = 1.27;
pub const RELOCATION_LIMIT: usize = 500;
pub const MAX_ATTEMPTS: usize = 8;
pub const LAMBDA: f64 = 40.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CuckooParams {
    pub mu: usize,
    pub seeds: Vec<u64>,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CuckooParams {
    pub fn random<R: Rng>(mu: usize, h: usize, rng: &mut R) -> Self {
        CuckooParams {
            mu: mu.max(1),
            seeds: (0..h).map(|_| rng.gen()).collect(),
        }
    }

    pub fn h(&self) -> usize {
        self.seeds.len()
    }

    /// Bin of `x` under hash function `i`. Elements are already uniform
    /// hashes, so a keyed mixer suffices.
    pub fn bin(&self, i: usize, x: u128) -> usize {
        let folded = (x as u64) ^ ((x >> 64) as u64).rotate_left(29);
        let z = mix(folded ^ self.seeds[i]);
        ((z as u128 * self.mu as u128) >> 64) as usize
    }

    /// Distinct candidate bins of `x`, in hash-function order.
    pub fn candidates(&self, x: u128) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.h());
        for i in 0..self.h() {
            let b = self.bin(i, x);
            if !out.contains(&b) {
                out.push(b);
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 8 * self.seeds.len());
        out.extend_from_slice(&(self.mu as u32).to_be_bytes());
        out.push(self.seeds.len() as u8);
        for s in &self.seeds {
            out.extend_from_slice(&s.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let mut r = crate::net::codec::Reader::new(b);
        let mu = r.u32()? as usize;
        let h = r.u8()? as usize;
        let seeds = (0..h).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        if mu == 0 || h == 0 {
            return Err(Error::Protocol("degenerate cuckoo parameters".into()));
        }
        Ok(CuckooParams { mu, seeds })
    }
}

pub fn bin_count(n: usize, expansion: f64) -> usize {
    ((expansion * n as f64).ceil() as usize).max(1)
}

#[derive(Clone, Debug)]
pub struct CuckooTable {
    pub params: CuckooParams,
    /// Index into the inserted items, per bin.
    pub bins: Vec<Option<usize>>,
    /// Always empty after a successful build.
    pub stash: Vec<usize>,
    /// Number of hash-seed draws used, starting at 1.
    pub attempts: usize,
}

fn try_build<R: Rng>(items: &[u128], params: &CuckooParams, limit: usize, rng: &mut R) -> Option<Vec<Option<usize>>> {
    let mut bins: Vec<Option<usize>> = vec![None; params.mu];
    for idx in 0..items.len() {
        let mut cur = idx;
        let mut last = usize::MAX;
        let mut placed = false;
        for step in 0..=limit {
            let cands = params.candidates(items[cur]);
            if let Some(&b) = cands.iter().find(|&&b| bins[b].is_none()) {
                bins[b] = Some(cur);
                placed = true;
                break;
            }
            if step == limit {
                break;
            }
            let choices: Vec<usize> = cands.iter().copied().filter(|&b| b != last).collect();
            let b = if choices.is_empty() {
                last
            } else {
                choices[rng.gen_range(0..choices.len())]
            };
            cur = bins[b].replace(cur).expect("occupied");
            last = b;
        }
        if !placed {
            return None;
        }
    }
    Some(bins)
}

/// Places every item in one of its candidate bins, redrawing hash seeds up
/// to [`MAX_ATTEMPTS`] times when an eviction chain exceeds the limit.
pub fn cuckoo_insert_all<R: Rng>(items: &[u128], mu: usize, h: usize, rng: &mut R) -> Result<CuckooTable> {
    if mu < items.len() {
        return Err(Error::InvalidSpec(format!(
            "{mu} bins cannot hold {} items",
            items.len()
        )));
    }
    for attempt in 1..=MAX_ATTEMPTS {
        let params = CuckooParams::random(mu, h, rng);
        if let Some(bins) = try_build(items, &params, RELOCATION_LIMIT, rng) {
            return Ok(CuckooTable {
                params,
                bins,
                stash: Vec::new(),
                attempts: attempt,
            });
        }
    }
    Err(Error::CuckooFailure { attempts: MAX_ATTEMPTS })
}

/// Every item placed in each of its distinct candidate bins.
pub fn simple_hash(items: &[u128], params: &CuckooParams) -> Vec<Vec<usize>> {
    let mut bins = vec![Vec::new(); params.mu];
    for (idx, &x) in items.iter().enumerate() {
        for b in params.candidates(x) {
            bins[b].push(idx);
        }
    }
    bins
}

/// Smallest load `k` such that, with `h * n` balls thrown uniformly into
/// `mu` bins, some bin reaching `k` has probability at most `2^-lambda`
/// (union bound over bins).
pub fn max_bin_load(n: usize, mu: usize, h: usize, lambda: f64) -> usize {
    let balls = (h * n) as u64;
    if balls == 0 {
        return 1;
    }
    if mu <= 1 {
        return balls as usize;
    }
    let p = 1.0 / mu as f64;
    let target = -lambda * std::f64::consts::LN_2 - (mu as f64).ln();
    // log pmf of Binomial(balls, p), built incrementally.
    let top = balls.min(100_000);
    let mut logpmf = Vec::with_capacity(top as usize + 1);
    let mut lp = balls as f64 * (-p).ln_1p();
    logpmf.push(lp);
    let ratio = (p / (1.0 - p)).ln();
    for k in 1..=top {
        lp += ((balls - k + 1) as f64 / k as f64).ln() + ratio;
        logpmf.push(lp);
    }
    // Tail sums from the top down in log space.
    let mut tail = f64::NEG_INFINITY;
    let mut answer = top as usize + 1;
    for k in (0..=top as usize).rev() {
        let a = tail.max(logpmf[k]);
        tail = if a == f64::NEG_INFINITY {
            a
        } else {
            a + ((tail - a).exp() + (logpmf[k] - a).exp()).ln()
        };
        if tail > target {
            break;
        }
        answer = k;
    }
    answer.max(1)
}
