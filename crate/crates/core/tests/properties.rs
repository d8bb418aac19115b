//! Invariants of the state engine over random layouts and states.

mod common;

use common::{dim_of, layout_from, random_state, random_unitary};
use num_complex::Complex64;
use proptest::prelude::*;
use qballot::fock::{LocalBasis, PureState};
use qballot::states::{phase_measurement_basis, tally_measurement_basis, BallotParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn kinds() -> impl Strategy<Value = Vec<Option<usize>>> {
    prop::collection::vec(prop_oneof![3 => (0usize..=12).prop_map(Some), 1 => Just(None)], 1..=4)
        .prop_filter("dimension at most 4096", |k| dim_of(k) <= common::MAX_DIM)
}

fn setup(kinds: &[Option<usize>], seed: u64) -> (PureState, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = layout_from(kinds);
    (random_state(&layout, &mut rng), rng)
}

fn fock_basis(site: &str, d: usize) -> LocalBasis {
    let outcomes = (0..d)
        .map(|k| {
            let mut v = vec![Complex64::new(0.0, 0.0); d];
            v[k] = Complex64::new(1.0, 0.0);
            (k.to_string(), v)
        })
        .collect();
    LocalBasis::new(site, outcomes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn local_unitaries_preserve_norm(k in kinds(), seed in any::<u64>(), site_pick in any::<prop::sample::Index>()) {
        let (psi, mut rng) = setup(&k, seed);
        let site = &psi.layout().sites()[site_pick.index(k.len())];
        let u = random_unitary(site.local_dim(), &mut rng);
        let out = psi.apply_local(&site.label, &u).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn number_phases_compose_additively(k in kinds(), seed in any::<u64>(), a in -7.0f64..7.0, b in -7.0f64..7.0) {
        let (psi, _) = setup(&k, seed);
        let Some(label) = psi.layout().sites().iter().find(|s| s.is_mode()).map(|s| s.label.clone()) else {
            return Ok(());
        };
        let ab = psi.apply_number_phase(&label, |n| n as f64 * a).unwrap()
            .apply_number_phase(&label, |n| n as f64 * b).unwrap();
        let ba = psi.apply_number_phase(&label, |n| n as f64 * b).unwrap()
            .apply_number_phase(&label, |n| n as f64 * a).unwrap();
        let sum = psi.apply_number_phase(&label, |n| n as f64 * (a + b)).unwrap();
        prop_assert!(ab.distance(&ba).unwrap() < TOL);
        prop_assert!(ab.distance(&sum).unwrap() < TOL);
        prop_assert!((ab.norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn partial_traces_are_states(k in kinds(), seed in any::<u64>(), mask in 1u8..16) {
        let (psi, _) = setup(&k, seed);
        let keep: Vec<String> = psi.layout().labels().enumerate()
            .filter(|(i, _)| mask >> (i % 4) & 1 == 1)
            .map(|(_, l)| l.to_string())
            .collect();
        prop_assume!(!keep.is_empty());
        let kept: usize = psi.layout().sites().iter().filter(|s| keep.contains(&s.label)).map(|s| s.local_dim()).product();
        prop_assume!(kept <= 256);
        let rho = psi.partial_trace(&keep).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < TOL);
        prop_assert!(rho.trace().im.abs() < TOL);
        prop_assert!(rho.hermiticity_error() < TOL);
        prop_assert!(rho.purity() <= 1.0 + TOL);
        // Eigenvalue checks are slow on large matrices in unoptimized builds.
        if kept <= 64 {
            prop_assert!(rho.validate().is_ok());
        }
    }

    #[test]
    fn local_measurements_are_complete(k in kinds(), seed in any::<u64>()) {
        let (psi, mut rng) = setup(&k, seed);
        for site in psi.layout().sites().to_vec() {
            let basis = if site.is_mode() { fock_basis(&site.label, site.local_dim()) } else { LocalBasis::spin_z(&site.label) };
            let total: f64 = psi.local_outcome_probabilities(&basis).unwrap().iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < TOL);
            let out = psi.measure_local(&basis, &mut rng).unwrap();
            prop_assert!(out.probability > 0.0);
            prop_assert!((out.post_state.norm() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn global_phase_is_unobservable(k in kinds(), seed in any::<u64>(), alpha in 0.0f64..std::f64::consts::TAU) {
        let (psi, _) = setup(&k, seed);
        let phase = Complex64::from_polar(1.0, alpha);
        let rotated = PureState::from_amplitudes(
            psi.shared_layout(),
            psi.amplitudes().iter().map(|a| a * phase).collect(),
        ).unwrap();
        prop_assert!(psi.approx_eq_up_to_phase(&rotated, 1e-9));
        prop_assert!((psi.fidelity(&rotated).unwrap() - 1.0).abs() < TOL);
        let first = [psi.layout().labels().next().unwrap().to_string()];
        let d = psi.partial_trace(&first).unwrap().trace_distance(&rotated.partial_trace(&first).unwrap()).unwrap();
        prop_assert!(d < TOL);
        let (p, q) = (psi.total_number_distribution(), rotated.total_number_distribution());
        for (n, x) in &p {
            prop_assert!((x - q[n]).abs() < TOL);
        }
    }

    #[test]
    fn snapshots_round_trip(k in kinds(), seed in any::<u64>()) {
        prop_assume!(dim_of(&k) <= 512);
        let (psi, _) = setup(&k, seed);
        let json = serde_json::to_string(&psi).unwrap();
        let back: PureState = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.layout(), psi.layout());
        prop_assert!(back.distance(&psi).unwrap() < 1e-15);
    }

    #[test]
    fn ballot_bases_are_orthonormal(n in 1usize..12, k in 1usize..3) {
        prop_assume!((k * n + 1) * (n + 1).pow(k as u32) <= common::MAX_DIM);
        let params = BallotParams::new(n, k).unwrap();
        let ballot = qballot::states::multiparty_survey_state(&params).unwrap();
        // Construction checks orthonormality and fails otherwise.
        let basis = tally_measurement_basis(&params, ballot.layout()).unwrap();
        prop_assert_eq!(basis.len(), n + 1);
        let phase = phase_measurement_basis("V1", n);
        let total: f64 = ballot.local_outcome_probabilities(&phase).unwrap().iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < TOL);
    }
}
