use std::f64::consts::PI;

use proptest::prelude::*;

use clusterpovm::catalog;
use clusterpovm::mbqc::{build_cluster, run_projective_mbqc, ClusterSpec, MeasurementPlan};
use clusterpovm::metrics::{fidelity, fidelity_with_ket, purity};
use clusterpovm::povm::{measure, parameter_map, povm_chi, povm_experimental, validate};
use clusterpovm::tomography::{mle_reconstruct_data, pauli_settings, AnalyzerSetting, MleOptions, TomographyData};
use clusterpovm::{c, DensityMatrix, Ket, Tensor};

fn qubit() -> impl Strategy<Value = Ket> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(a, b, x, y)| a * a + b * b + x * x + y * y > 1e-3)
        .prop_map(|(a, b, x, y)| Ket::new(vec![c(a, b), c(x, y)]).unwrap())
}

fn qubit_state() -> impl Strategy<Value = DensityMatrix> {
    (qubit(), qubit(), 0.0..=1.0f64)
        .prop_map(|(a, b, w)| DensityMatrix::from_ket(&a).mix(&DensityMatrix::from_ket(&b), w).unwrap())
}

fn two_qubit_state() -> impl Strategy<Value = DensityMatrix> {
    (qubit(), qubit(), -PI..PI, -PI..PI, -PI..PI, 0.0..=1.0f64).prop_map(|(a, b, x, y, z, w)| {
        let product = DensityMatrix::from_ket(&a.tensor(&b));
        let local = (&catalog::z_rotation(x) * &catalog::x_rotation(y)).tensor(&catalog::x_rotation(z));
        let entangled = DensityMatrix::from_ket(&catalog::phi_plus()).conjugate_by(&local);
        product.mix(&entangled, w).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn povm_forms_agree_and_are_valid(phi in 0.0..PI, theta in -PI..PI) {
        let exp = povm_experimental(phi, theta);
        prop_assert!(povm_chi(phi, parameter_map(theta)).labelled_distance(&exp) < 1e-10);
        let d = validate(&exp).unwrap();
        prop_assert!(d.passes);
    }

    #[test]
    fn measurement_probabilities_sum_to_one(rho in two_qubit_state(), phi in 0.0..PI, theta in -PI..PI, target in 1usize..=2) {
        let branches = measure(&rho, &povm_experimental(phi, theta), target).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for b in &branches {
            prop_assert!(b.probability >= -1e-15);
        }
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in qubit_state(), b in qubit_state(), k in qubit()) {
        let ab = fidelity(&a, &b).unwrap();
        let ba = fidelity(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-8);
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-8);
        let pure = fidelity(&a, &DensityMatrix::from_ket(&k)).unwrap();
        prop_assert!((pure - fidelity_with_ket(&a, &k).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn purity_is_in_range(rho in two_qubit_state()) {
        let p = purity(&rho);
        prop_assert!((0.25 - 1e-12..=1.0 + 1e-12).contains(&p));
    }

    #[test]
    fn partial_trace_keeps_unit_trace(rho in two_qubit_state(), q in 1usize..=2) {
        let reduced = rho.operator().partial_trace(q).unwrap();
        prop_assert!((reduced.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(DensityMatrix::new(reduced).is_ok());
    }

    #[test]
    fn chain_output_is_branch_independent(a in -PI..PI, b in -PI..PI) {
        let cluster = build_cluster(&ClusterSpec::linear(3)).unwrap();
        let branches = run_projective_mbqc(&cluster, &MeasurementPlan { angles: vec![a, b] }).unwrap();
        let first = branches[0].corrected_output.clone().unwrap();
        for br in &branches {
            prop_assert!(br.corrected_output.as_ref().unwrap().approx_eq(&first, 1e-10));
        }
    }

    #[test]
    fn mle_output_is_a_state(counts in proptest::collection::vec(0u32..2000, 6)) {
        prop_assume!(counts.iter().any(|&n| n > 0));
        let tallies: Vec<(AnalyzerSetting, f64)> = pauli_settings().into_iter().zip(counts.iter().map(|&n| n as f64)).collect();
        let data = TomographyData::from_tallies(tallies).unwrap();
        if let Ok(r) = mle_reconstruct_data(&data, &MleOptions::default()) {
            prop_assert!(r.rho.operator().min_eigenvalue() > -1e-12);
            prop_assert!((r.rho.operator().trace().re - 1.0).abs() < 1e-12);
            prop_assert!(r.rho.operator().is_hermitian(1e-12));
        }
    }
}
