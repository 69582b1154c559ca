mod common;

use privimpute::net::Channel;
use privimpute::proto::{horizontal, vertical, Outcome};
use proptest::prelude::*;

use common::{consistent, random_instance};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn horizontal_means_match_the_oracle(seed in any::<u64>()) {
        let inst = random_instance(seed, 120);
        let oracle = inst.oracle_mean();
        for v in [horizontal::Variant::PlainMean, horizontal::Variant::BlindMean] {
            let out = inst.run_horizontal(v).unwrap().output;
            prop_assert!(consistent(out, true, oracle, &[]), "{v}: {out:?} vs {oracle:?}");
        }
    }

    #[test]
    fn vertical_samples_are_neighbor_values(seed in any::<u64>()) {
        let inst = random_instance(seed, 120);
        let values = inst.neighbor_values();
        for psi in [vertical::PsiBackend::Oprf, vertical::PsiBackend::Dh] {
            let out = inst.run_vertical(vertical::Variant::PlainRandom, psi).unwrap().output;
            prop_assert!(consistent(out, false, None, &values), "{out:?} vs {values:?}");
        }
        let out = inst.run_vertical(vertical::Variant::BlindRandom, vertical::PsiBackend::Oprf).unwrap().output;
        prop_assert!(consistent(out, false, None, &values), "{out:?} vs {values:?}");
    }
}

#[test]
fn tcp_sessions_agree_with_in_memory_ones() {
    let inst = (0..)
        .map(|s| random_instance(s, 300))
        .find(|i| i.oracle_mean().is_some())
        .unwrap();
    let bob_cols = inst.bob_cols();
    let (ta, tb) = (
        inst.full.select_columns(&inst.alice_cols),
        inst.full.select_columns(&bob_cols),
    );
    let (sa, sb) = (inst.scheme.select(&inst.alice_cols), inst.scheme.select(&bob_cols));
    let alice = vertical::AliceInput {
        table: &ta,
        scheme: &sa,
        padding: vertical::DEFAULT_PADDING,
    };
    let bob = vertical::BobInput {
        table: &tb,
        scheme: &sb,
        alpha: inst.alpha,
        beta: bob_cols.iter().position(|&j| j == inst.beta).unwrap(),
        variant: vertical::Variant::BlindMean,
        psi: vertical::PsiBackend::Oprf,
        padding: vertical::DEFAULT_PADDING,
    };
    let mem = vertical::run_session(Channel::pair(), &alice, &bob, 3).unwrap();
    let tcp = vertical::run_session(Channel::loopback_pair().unwrap(), &alice, &bob, 3).unwrap();
    assert_eq!(tcp.output, Outcome::Value(inst.oracle_mean().unwrap()));
    assert_eq!(mem.output, tcp.output);
    assert_eq!(mem.alice.bytes_sent, tcp.alice.bytes_sent);
    assert_eq!(tcp.alice.bytes_sent, tcp.bob.bytes_received);
    assert_eq!(tcp.bob.bytes_sent, tcp.alice.bytes_received);
}
