//! Transcript scanner: checks every message a party received against a
//! whitelist of kinds and decodes the few plaintext metadata messages.

use super::{horizontal, vertical, Transcript};
use crate::net::MsgKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    Horizontal(horizontal::Variant),
    Vertical(vertical::Variant, vertical::PsiBackend),
}

/// The public query parameter Alice is allowed to learn: `β` for horizontal
/// sessions, `α` for vertical ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disclosed {
    Beta(usize),
    Alpha(usize),
}

fn alice_kinds(p: Protocol) -> Vec<MsgKind> {
    use MsgKind::*;
    match p {
        Protocol::Horizontal(v) => {
            let mut k = vec![Query, OprfResponse, OpprfHints, ShareInput, BeaverOpen];
            if !v.is_blind() {
                k.push(SigmaSums);
            }
            if v == horizontal::Variant::BlindRandom {
                k.push(Packing);
            }
            k
        }
        Protocol::Vertical(v, psi) if !v.is_blind() => match psi {
            vertical::PsiBackend::Oprf => vec![Query, OprfRequest],
            vertical::PsiBackend::Dh => vec![Query, DhPsiB],
        },
        Protocol::Vertical(..) => vec![Query, CuckooParams, OprfRequest, ShareInput, BeaverOpen],
    }
}

fn bob_kinds(p: Protocol) -> Vec<MsgKind> {
    use MsgKind::*;
    match p {
        Protocol::Horizontal(_) => vec![Hello, OprfRequest, ShareInput, BeaverOpen, Reveal],
        Protocol::Vertical(v, psi) if !v.is_blind() => match psi {
            vertical::PsiBackend::Oprf => vec![Hello, OprfResponse, PsiTags],
            vertical::PsiBackend::Dh => vec![Hello, DhPsiA, DhPsiAB],
        },
        Protocol::Vertical(..) => vec![Hello, OprfResponse, OpprfHints, ShareInput, BeaverOpen, Reveal],
    }
}

/// Number of reveal messages Bob receives: the output, plus a status word
/// for sampling variants.
fn bob_reveals(p: Protocol) -> usize {
    match p {
        Protocol::Horizontal(v) if v.is_mean() => 1,
        Protocol::Horizontal(_) => 2,
        Protocol::Vertical(v, _) if !v.is_blind() => 0,
        Protocol::Vertical(v, _) if v.is_mean() => 1,
        Protocol::Vertical(..) => 2,
    }
}

fn variant_code(p: Protocol) -> u8 {
    match p {
        Protocol::Horizontal(v) => horizontal::Variant::ALL.iter().position(|&x| x == v).unwrap() as u8,
        Protocol::Vertical(v, _) => vertical::Variant::ALL.iter().position(|&x| x == v).unwrap() as u8,
    }
}

/// Violations in what Alice received; empty when the transcript is clean.
pub fn audit_alice(p: Protocol, disclosed: Disclosed, t: &Transcript) -> Vec<String> {
    let allowed = alice_kinds(p);
    let mut out = Vec::new();
    for (kind, len, payload) in &t.received {
        if !allowed.contains(kind) {
            out.push(format!("Alice received unexpected {kind:?} ({len} bytes)"));
            continue;
        }
        if *kind != MsgKind::Query {
            continue;
        }
        let code = variant_code(p);
        let ok = match (p, disclosed) {
            (Protocol::Horizontal(_), Disclosed::Beta(b)) => {
                let mut want = vec![code];
                want.extend_from_slice(&(b as u16).to_be_bytes());
                *payload == want
            }
            (Protocol::Vertical(_, psi), Disclosed::Alpha(a)) => {
                payload.len() == 26
                    && payload[0] == code
                    && payload[1..9] == (a as u64).to_be_bytes()
                    && payload[25] == (psi == vertical::PsiBackend::Dh) as u8
            }
            _ => false,
        };
        if !ok {
            out.push(format!("query carries more than {disclosed:?}: {payload:02x?}"));
        }
    }
    let queries = t.received.iter().filter(|m| m.0 == MsgKind::Query).count();
    if queries != 1 {
        out.push(format!("Alice received {queries} queries"));
    }
    out
}

/// Violations in what Bob received.
pub fn audit_bob(p: Protocol, t: &Transcript) -> Vec<String> {
    let allowed = bob_kinds(p);
    let mut out = Vec::new();
    for (kind, len, payload) in &t.received {
        if !allowed.contains(kind) {
            out.push(format!("Bob received unexpected {kind:?} ({len} bytes)"));
        } else if *kind == MsgKind::Hello && payload.len() != 10 {
            out.push(format!("hello of {} bytes", payload.len()));
        }
    }
    let reveals = t.received.iter().filter(|m| m.0 == MsgKind::Reveal).count();
    if reveals != bob_reveals(p) {
        out.push(format!("Bob received {reveals} reveals, expected {}", bob_reveals(p)));
    }
    out
}
