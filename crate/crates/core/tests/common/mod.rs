#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qballot::fock::{ModeLayout, PureState};
use rand::Rng;

pub const MAX_DIM: usize = 4096;

/// Site kinds: `Some(cutoff)` for a mode, `None` for a qutrit.
pub fn layout_from(kinds: &[Option<usize>]) -> ModeLayout {
    let modes: Vec<(String, usize)> = kinds
        .iter()
        .enumerate()
        .filter_map(|(i, k)| k.map(|c| (format!("m{i}"), c)))
        .collect();
    let qutrits: Vec<String> = kinds
        .iter()
        .enumerate()
        .filter(|(_, k)| k.is_none())
        .map(|(i, _)| format!("q{i}"))
        .collect();
    ModeLayout::new(modes, qutrits).expect("valid layout")
}

pub fn dim_of(kinds: &[Option<usize>]) -> usize {
    kinds.iter().map(|k| k.map_or(3, |c| c + 1)).product()
}

/// Between one and four sites, total dimension at most [`MAX_DIM`].
pub fn random_kinds<R: Rng>(rng: &mut R) -> Vec<Option<usize>> {
    loop {
        let n = rng.random_range(1..=4);
        let kinds: Vec<Option<usize>> = (0..n)
            .map(|_| {
                if rng.random_bool(0.3) {
                    None
                } else {
                    Some(rng.random_range(0..=12))
                }
            })
            .collect();
        if dim_of(&kinds) <= MAX_DIM {
            return kinds;
        }
    }
}

pub fn random_amplitudes<R: Rng>(dim: usize, rng: &mut R) -> Vec<Complex64> {
    loop {
        let amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        if amps.iter().any(|a| a.norm() > 1e-3) {
            return amps;
        }
    }
}

pub fn random_state<R: Rng>(layout: &ModeLayout, rng: &mut R) -> PureState {
    let amps = random_amplitudes(layout.dim(), rng);
    PureState::from_amplitudes(layout.clone(), amps)
        .and_then(PureState::normalized)
        .expect("nonzero amplitudes")
}

/// Haar-ish random unitary: the Q factor of a random complex matrix.
pub fn random_unitary<R: Rng>(d: usize, rng: &mut R) -> Vec<Complex64> {
    let m = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let q = m.qr().q();
    (0..d)
        .flat_map(|r| (0..d).map(move |c| (r, c)))
        .map(|(r, c)| q[(r, c)])
        .collect()
}
