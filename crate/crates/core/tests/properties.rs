use onionlab::analysis::binomial::{ln_pmf, lower_tail, upper_tail};
use onionlab::analysis::estimate::{dp_ratio_estimate, tv_distance_estimate, DpConfig, TvConfig};
use onionlab::onion::{peel_chain, Nonce, OnionScheme, Payload, PeelResult, RoutingPath};
use onionlab::rng::{crypto_rng, sim_rng};
use onionlab::sim::{correctness_check, input_distance, run, sender_message, InputVector, NetworkConfig};
use onionlab::{Adversary, AnyProtocol, IdealScheme, ProtocolId, ProtocolParams};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ideal_onions_peel_back_to_their_message(
        hops in prop::collection::vec(0u32..8, 1..12),
        msg in prop::collection::vec(any::<u8>(), 0..48),
        marks in prop::collection::vec(any::<bool>(), 11),
        seed in any::<u64>(),
    ) {
        let mut s = IdealScheme::new(64);
        let keys: Vec<_> = (0..8).map(|p| s.gen(128, p, &mut crypto_rng(seed, "k", p as u64, 0))).collect();
        let nonces: Vec<Option<Nonce>> = (1..hops.len())
            .map(|i| marks[i - 1].then(|| Nonce::checkpoint([i as u8; 32])))
            .collect();
        let path = RoutingPath::new(hops.clone(), 8).unwrap();
        let pks: Vec<_> = hops.iter().map(|&p| &keys[p as usize].public_key).collect();
        let sks: Vec<_> = hops.iter().map(|&p| &keys[p as usize].secret_key).collect();
        let m = Payload::Message(msg);
        let formed = s.form_onion(&m, &path, &pks, &nonces, &mut crypto_rng(seed, "f", 0, 0)).unwrap();
        let (chain, revealed, last) = peel_chain(&s, &sks, &formed[0]);
        prop_assert_eq!(chain, formed);
        prop_assert_eq!(revealed, nonces);
        prop_assert_eq!(last, PeelResult::Deliver(m));
    }

    #[test]
    fn binomial_pmf_sums_to_one(n in 1u64..400, p in 0.001f64..0.999) {
        let total: f64 = (0..=n).map(|k| ln_pmf::<f64>(k, n, p).exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{}", total);
        let k = n / 3;
        let split = lower_tail::<f64>(k, n, p) + upper_tail::<f64>(k + 1, n, p);
        prop_assert!((split - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pi_p_delivers_every_permutation(seed in any::<u64>()) {
        let params = ProtocolParams { parties: 24, servers: 4, path_len: 4, ..Default::default() };
        let input = InputVector::permutation(24, &mut sim_rng(seed, "in", 0, 0));
        let mut proto = AnyProtocol::new(ProtocolId::PiP, &params).unwrap();
        let report = run(&mut IdealScheme::new(64), &mut proto, &input, Adversary::none(24), &NetworkConfig::new(24, seed)).unwrap();
        prop_assert!(correctness_check(&report, &input).correct);
        prop_assert_eq!(report.stats.onions_sent, 24 * 5);
    }
}

#[test]
fn input_distance_counts_tuple_moves() {
    let base = InputVector::from_permutation(&[1, 2, 3, 0]);
    assert_eq!(input_distance(&base, &base), 0);
    assert_eq!(input_distance(&base, &base.swap_recipients(0, 1)), 4);
    assert_eq!(
        input_distance(&base, &base.with_extra_message(0, sender_message(9), 2)),
        1
    );
}

fn bernoulli(p: f64, n: usize, seed: u64) -> Vec<u8> {
    let mut rng = sim_rng(seed, "bern", 0, 0);
    (0..n).map(|_| rng.gen_bool(p) as u8).collect()
}

#[test]
fn tv_estimate_approaches_the_bernoulli_distance() {
    // TV(Bern(a), Bern(b)) = |a − b|.
    let (a, b) = (bernoulli(0.3, 20_000, 1), bernoulli(0.5, 20_000, 2));
    let est = tv_distance_estimate::<_, f64>(&a, &b, &TvConfig::default()).unwrap();
    assert!((est.estimate - 0.2).abs() < 0.02, "{}", est.estimate);
    assert!(!est.contains_zero);

    let (a, b) = (bernoulli(0.4, 20_000, 3), bernoulli(0.4, 20_000, 4));
    let est = tv_distance_estimate::<_, f64>(&a, &b, &TvConfig::default()).unwrap();
    assert!(est.contains_zero, "{est:?}");
}

#[test]
fn dp_estimate_approaches_the_bernoulli_log_ratio() {
    // With δ = 0 the tight ε is max(ln(a/b), ln((1−b)/(1−a))).
    let (pa, pb) = (0.6f64, 0.4f64);
    let exact = (pa / pb).ln().max(((1.0 - pb) / (1.0 - pa)).ln());
    let (a, b) = (bernoulli(pa, 50_000, 5), bernoulli(pb, 50_000, 6));
    let cfg = DpConfig {
        delta: 0.0,
        ..Default::default()
    };
    let est = dp_ratio_estimate::<_, f64>(&a, &b, &cfg).unwrap();
    let eps = est.epsilon.unwrap();
    assert!((eps - exact).abs() < 0.05, "{eps} vs {exact}");
}
