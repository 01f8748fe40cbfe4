mod common;

use hybrid_teleport::fock::{apply_kraus, tensor_product, CMatrix, ModeSpace};
use hybrid_teleport::hbsm::{two_state_hbsm, two_state_hbsm_inefficient, BellState};
use hybrid_teleport::nongauss::{qs_ideal, qs_inefficient, QsParams};
use hybrid_teleport::protocols::{
    classical_limit, hbsm_teleport, Distillation, HbsmProbeMap, Protocol, ProtocolConfig, QubitSpec,
};
use hybrid_teleport::resource::{
    charfn_from_density, loss_channel, lossy_tmsv, lossy_tmsv_charfn, tmsv_ket, CharFn, TmsvParams,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn config(protocol: Protocol, dist: Distillation, lambda: f64, t: f64) -> ProtocolConfig {
    let tmsv = TmsvParams::from_lambda(lambda, t, t).unwrap();
    ProtocolConfig::new(protocol, tmsv).with_distillation(dist)
}

fn distillation() -> impl Strategy<Value = Distillation> {
    prop_oneof![
        Just(Distillation::None),
        (0.02..0.48f64).prop_map(|ts| Distillation::Qs { ts }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn loss_kraus_is_complete(t in 0.0..=1.0f64, dim in 1usize..8) {
        let ks = loss_channel(t, dim).unwrap();
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &ks {
            sum += k.elements().adjoint() * k.elements();
        }
        let err = common::max_abs(&(sum - CMatrix::identity(dim, dim)));
        prop_assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn loss_keeps_trace_and_hermiticity(seed in any::<u64>(), t in 0.0..=1.0f64) {
        let mut rng = common::rng(seed);
        let rho = common::random_density(&mut rng, ModeSpace::new(vec![3, 4]).unwrap());
        let out = apply_kraus(&rho, &loss_channel(t, 4).unwrap(), 1).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-12);
        prop_assert!(out.hermiticity_error() < 1e-12);
        prop_assert!(out.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn truncated_tmsv_mass(lambda in 0.0..0.95f64, dim in 1usize..30) {
        let k = tmsv_ket(lambda, dim).unwrap();
        let expect = 1.0 - lambda.powi(2 * dim as i32);
        prop_assert!((k.norm_sqr() - expect).abs() < 1e-12);
    }

    #[test]
    fn probe_map_matches_direct_pipeline(
        lambda in 0.0..0.6f64,
        t in 0.2..=1.0f64,
        theta in 0.0..std::f64::consts::PI,
        phi in 0.0..6.28f64,
        four in any::<bool>(),
        dist in distillation(),
    ) {
        let protocol = if four { Protocol::HbsmFourState } else { Protocol::HbsmTwoState };
        let cfg = config(protocol, dist, lambda, t);
        let direct = hbsm_teleport(QubitSpec::new(theta, phi).unwrap(), &cfg).unwrap();
        let probe = HbsmProbeMap::new(&cfg).unwrap().evaluate(theta, phi);
        prop_assert!((direct.p_bsm - probe.p_bsm).abs() < 1e-10);
        prop_assert!((direct.p_total - probe.p_total).abs() < 1e-10);
        prop_assert!((direct.weighted_fidelity - probe.weighted_fidelity).abs() < 1e-10);
    }

    #[test]
    fn results_are_probabilities(
        lambda in 0.0..0.8f64,
        t in 0.05..=1.0f64,
        theta in 0.0..std::f64::consts::PI,
        four in any::<bool>(),
        dist in distillation(),
    ) {
        let protocol = if four { Protocol::HbsmFourState } else { Protocol::HbsmTwoState };
        let r = hbsm_teleport(QubitSpec::new(theta, 1.0).unwrap(), &config(protocol, dist, lambda, t)).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&r.p_bsm));
        prop_assert!(r.p_total <= r.p_bsm + 1e-12);
        for o in &r.outcomes {
            if let Some(f) = o.fidelity {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            }
        }
    }

    #[test]
    fn unit_efficiency_is_ideal(seed in any::<u64>(), lambda in 0.0..0.7f64, ts in 0.05..0.45f64) {
        let mut rng = common::rng(seed);
        let q = common::qubit_density(1.3, 0.7, 4);
        let res = tmsv_ket(lambda, 4).unwrap().to_density();
        let joint = tensor_product(&q, &res).unwrap();
        let a = two_state_hbsm(&joint).unwrap();
        let b = two_state_hbsm_inefficient(&joint, 1.0).unwrap();
        for bell in BellState::ALL {
            prop_assert!((a.prob(bell) - b.prob(bell)).abs() < 1e-10);
        }

        let rho = common::random_density(&mut rng, ModeSpace::new(vec![2, 4]).unwrap());
        let (p1, s1) = qs_ideal(&rho, ts, 1).unwrap();
        let (p2, s2) = qs_inefficient(&rho, QsParams::new(ts, 1.0).unwrap(), 1).unwrap();
        prop_assert!((p1 - p2).abs() < 1e-10);
        prop_assert!(common::max_abs(&(s1.elements() - s2.elements())) < 1e-10);
    }

    #[test]
    fn gaussian_and_density_charfns_agree(
        lambda in 0.0..0.5f64,
        t in 0.3..=1.0f64,
        a in (-1.0..1.0f64, -1.0..1.0f64),
        b in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        let params = TmsvParams::from_lambda(lambda, t, t).unwrap().with_dim(25).unwrap();
        let xi = [Complex64::new(a.0, a.1), Complex64::new(b.0, b.1)];
        let g = lossy_tmsv_charfn(&params).eval(&xi).unwrap();
        let d = charfn_from_density(&lossy_tmsv(&params).unwrap()).unwrap().eval(&xi).unwrap();
        prop_assert!((g - d).norm() < 1e-6, "{g} vs {d}");
    }

    #[test]
    fn classical_limit_is_monotone(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(classical_limit(lo) <= classical_limit(hi));
        prop_assert!((0.5..=2.0 / 3.0).contains(&classical_limit(a)));
    }
}
