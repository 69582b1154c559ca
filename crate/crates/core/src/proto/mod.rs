//! The imputation protocols and an in-process runner for both parties.

pub mod audit;
pub mod horizontal;
pub mod vertical;

use crate::error::{Error, Result};
use crate::net::{Channel, MsgKind, PhaseRecord};

/// Precision of joint random sampling, in bits.
pub const SAMPLING_BITS: u32 = 30;
/// Quotient width for means of fixed-point values.
pub const MEAN_QUOTIENT_BITS: u32 = 33;

/// What Bob learns at the end of a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Value(i64),
    NoNeighbor,
    /// Packed sampling found no slot with exactly one neighbor.
    Aborted,
}

impl Outcome {
    pub fn value(self) -> Option<i64> {
        match self {
            Outcome::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// What one party's channel recorded during a session.
#[derive(Clone, Debug)]
pub struct Transcript {
    pub received: Vec<(MsgKind, usize, Vec<u8>)>,
    pub sent: Vec<(MsgKind, usize)>,
    pub phases: Vec<PhaseRecord>,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

impl Transcript {
    fn of(ch: &Channel) -> Transcript {
        Transcript {
            received: ch.received_log().to_vec(),
            sent: ch.sent_log().to_vec(),
            phases: ch.phases().to_vec(),
            bytes_sent: ch.bytes_sent(),
            bytes_received: ch.bytes_received(),
        }
    }

    /// Wall time of all phases with the given name.
    pub fn phase_nanos(&self, name: &str) -> u64 {
        self.phases
            .iter()
            .filter(|p| p.phase == name)
            .map(|p| p.wall_nanos)
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct LocalRun<T> {
    pub output: T,
    pub alice: Transcript,
    pub bob: Transcript,
}

/// Runs Alice on a scoped helper thread and Bob on the caller's, connected
/// by an in-process channel. A failure on either side drops its channel so
/// the peer sees a disconnect instead of waiting for the timeout.
pub fn run_local<A, B, T>(alice: A, bob: B) -> Result<LocalRun<T>>
where
    A: FnOnce(&mut Channel) -> Result<()> + Send,
    B: FnOnce(&mut Channel) -> Result<T>,
{
    run_over(Channel::pair(), alice, bob)
}

/// Like [`run_local`] over a given pair of connected endpoints, Alice's first.
pub fn run_over<A, B, T>(channels: (Channel, Channel), alice: A, bob: B) -> Result<LocalRun<T>>
where
    A: FnOnce(&mut Channel) -> Result<()> + Send,
    B: FnOnce(&mut Channel) -> Result<T>,
{
    let (mut ca, mut cb) = channels;
    std::thread::scope(|scope| {
        let h = scope.spawn(move || {
            let r = alice(&mut ca);
            (r, Transcript::of(&ca))
        });
        let rb = bob(&mut cb);
        let tb = Transcript::of(&cb);
        drop(cb);
        let (ra, ta) = h.join().map_err(|_| Error::Protocol("alice thread panicked".into()))?;
        // Report the root cause: the other side's failure is usually just
        // the resulting disconnect.
        match (ra, rb) {
            (Ok(()), Ok(output)) => Ok(LocalRun {
                output,
                alice: ta,
                bob: tb,
            }),
            (Err(e), Err(Error::Disconnected)) | (Ok(()), Err(e)) => Err(e),
            (Err(Error::Disconnected), Err(e)) | (Err(e), _) => Err(e),
        }
    })
}
