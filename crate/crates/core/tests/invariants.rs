use proptest::prelude::*;

use channelcert::channel::{choi_distance, eta_choi, eta_kraus, kraus_from_choi};
use channelcert::linalg::{
    fidelity, partial_trace, schatten_norm, trace_norm, ComplexMatrix, DensityMatrix, SchattenP,
    Subsystem,
};
use channelcert::povm::{haar_columns_povm, outcome_distribution, CategoricalSampler};
use channelcert::random::{haar_unitary, random_channel, random_density, RngStream};
use channelcert::weingarten::{f_alpha, f_alpha_direct, tr_alpha, Permutation};

fn channel_params() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=3, 1usize..=3, 1usize..=4, any::<u64>())
        .prop_filter("isometry must exist", |(di, dout, k, _)| dout * k >= *di)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_channels_are_cptp((di, dout, k, seed) in channel_params()) {
        let ch = random_channel(di, dout, k, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert!(ch.cptp_residual() <= 1e-10);
        let j = ch.choi();
        let marginal = partial_trace(j.matrix(), (di, dout), Subsystem::A).unwrap();
        let target = ComplexMatrix::identity(di).scale_real(1.0 / di as f64);
        prop_assert!((&marginal - &target).max_abs() < 1e-12);
        prop_assert!((j.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn choi_roundtrip((di, dout, k, seed) in channel_params()) {
        let ch = random_channel(di, dout, k, &mut RngStream::new(seed, 1)).unwrap();
        let back = kraus_from_choi(&ch.choi()).unwrap();
        prop_assert!(back.num_kraus() <= di * dout);
        prop_assert!((back.choi().matrix() - ch.choi().matrix()).max_abs() < 1e-10);
        prop_assert!(choi_distance(&ch, &back, SchattenP::One).unwrap() < 1e-9);
    }

    #[test]
    fn eta_two_ways((di, dout, k, seed) in channel_params()) {
        let ch = random_channel(di, dout, k, &mut RngStream::new(seed, 2)).unwrap();
        let (a, b) = (eta_kraus(&ch), eta_choi(&ch));
        prop_assert!((a * a - b * b).abs() < 1e-8);
    }

    #[test]
    fn fidelity_bounds_and_fuchs_van_de_graaf(d in 2usize..=4, r1 in 1usize..=4, r2 in 1usize..=4, seed: u64) {
        let mut rng = RngStream::new(seed, 3);
        let rho = random_density(d, r1, &mut rng);
        let sigma = random_density(d, r2, &mut rng);
        let f = fidelity(&rho, &sigma).unwrap();
        let g = fidelity(&sigma, &rho).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - g).abs() < 1e-8);
        let half_tn = 0.5 * trace_norm(&(rho.matrix() - sigma.matrix()));
        prop_assert!(1.0 - f.sqrt() <= half_tn + 1e-9);
        prop_assert!(half_tn <= (1.0 - f).max(0.0).sqrt() + 1e-9);
    }

    #[test]
    fn schatten_ordering(d in 1usize..=5, seed: u64) {
        let m = channelcert::random::ginibre(d, d, &mut RngStream::new(seed, 4));
        let (n1, n2, ninf) = (
            schatten_norm(&m, SchattenP::One),
            schatten_norm(&m, SchattenP::Two),
            schatten_norm(&m, SchattenP::Inf),
        );
        prop_assert!(ninf <= n2 + 1e-12 && n2 <= n1 + 1e-12);
        prop_assert!(n1 <= (d as f64).sqrt() * n2 + 1e-10);
    }

    #[test]
    fn unitary_invariance_of_trace_norm(d in 1usize..=4, seed: u64) {
        let mut rng = RngStream::new(seed, 5);
        let m = channelcert::random::ginibre(d, d, &mut rng);
        let u = haar_unitary(d, &mut rng);
        let rotated = &(&u * &m) * &u.adjoint();
        prop_assert!((trace_norm(&m) - trace_norm(&rotated)).abs() < 1e-9 * (1.0 + trace_norm(&m)));
    }

    #[test]
    fn born_distribution_is_a_distribution(d in 2usize..=5, l in 1usize..=3, seed: u64) {
        let mut rng = RngStream::new(seed, 6);
        let povm = haar_columns_povm(d, l, &mut rng).unwrap();
        let rho = random_density(d, 2, &mut rng);
        let p = outcome_distribution(&povm, &rho).unwrap();
        prop_assert_eq!(p.len(), d * l);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multinomial_counts_preserve_total(n in 0u64..5000, seed: u64) {
        let s = CategoricalSampler::new(&[0.1, 0.0, 0.6, 0.3]).unwrap();
        let c = s.counts(n, &mut RngStream::new(seed, 7));
        prop_assert_eq!(c.iter().sum::<u64>(), n);
        prop_assert_eq!(c[1], 0);
    }

    #[test]
    fn permutation_group_laws(a in 0usize..24, b in 0usize..24, c in 0usize..24) {
        let all = Permutation::all(4);
        let (p, q, r) = (&all[a], &all[b], &all[c]);
        prop_assert_eq!(p.compose(q).compose(r), p.compose(&q.compose(r)));
        prop_assert_eq!(p.compose(q).inverse(), q.inverse().compose(&p.inverse()));
        prop_assert_eq!(p.num_cycles(), p.inverse().num_cycles());
    }

    #[test]
    fn tr_alpha_conjugation_invariance(a in 0usize..24, seed: u64) {
        // Tr_alpha(U M_1 U^dag, ...) = Tr_alpha(M_1, ...)
        let mut rng = RngStream::new(seed, 8);
        let alpha = &Permutation::all(4)[a];
        let mats: Vec<ComplexMatrix> = (0..4).map(|_| channelcert::random::ginibre(3, 3, &mut rng)).collect();
        let u = haar_unitary(3, &mut rng);
        let conj: Vec<ComplexMatrix> = mats.iter().map(|m| &(&u * m) * &u.adjoint()).collect();
        let x = tr_alpha(&mats, alpha).unwrap();
        let y = tr_alpha(&conj, alpha).unwrap();
        prop_assert!((x - y).norm() < 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn f_alpha_fast_matches_direct(a in 0usize..24, seed: u64, k in 1usize..=3) {
        let ch = random_channel(2, 2, k, &mut RngStream::new(seed, 9)).unwrap();
        let alpha = &Permutation::all(4)[a];
        let x = f_alpha(&ch, alpha).unwrap();
        let y = f_alpha_direct(&ch, alpha).unwrap();
        prop_assert!((x - y).norm() < 1e-10 * (1.0 + y.norm()));
    }

    #[test]
    fn density_validation_accepts_random_states(d in 1usize..=5, r in 1usize..=5, seed: u64) {
        let rho = random_density(d, r, &mut RngStream::new(seed, 10));
        prop_assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
    }
}
