use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use super::layout::{ModeLayout, Spin};
use super::state::{PureState, ONE, ZERO};
use crate::error::{Error, Result};

/// Maximum deviation of `⟨b_i|b_j⟩` from `δ_ij` accepted for a basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Residual probability above which strict measurements fail.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Label of the outcome "outside the span of the declared basis".
pub const OUTSIDE_LABEL: &str = "outside";

/// What to do with probability that falls outside an incomplete basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualPolicy {
    /// Report the residual as an extra outcome labelled [`OUTSIDE_LABEL`].
    #[default]
    Outcome,
    /// Fail with [`Error::IncompleteBasis`] if the residual exceeds [`RESIDUAL_TOL`].
    Strict,
}

/// Orthonormal set of labelled vectors, not necessarily spanning the space.
#[derive(Debug, Clone)]
pub struct MeasurementBasis {
    layout: Arc<ModeLayout>,
    outcomes: Vec<(String, PureState)>,
}

impl MeasurementBasis {
    pub fn new(outcomes: Vec<(String, PureState)>) -> Result<Self> {
        let Some((_, first)) = outcomes.first() else {
            return Err(Error::layout("measurement basis is empty"));
        };
        let layout = first.shared_layout();
        for (_, v) in &outcomes {
            first.check_same_layout(v)?;
        }
        check_orthonormal(outcomes.iter().map(|(_, v)| v.amplitudes()))?;
        Ok(Self { layout, outcomes })
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|(l, _)| l.as_str())
    }

    pub fn vectors(&self) -> impl Iterator<Item = &PureState> {
        self.outcomes.iter().map(|(_, v)| v)
    }
}

fn check_orthonormal<'a>(vectors: impl Iterator<Item = &'a [Complex64]> + Clone) -> Result<()> {
    for (i, a) in vectors.clone().enumerate() {
        for (j, b) in vectors.clone().enumerate().skip(i) {
            let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            let want = if i == j { ONE } else { ZERO };
            let deviation = (ip - want).norm();
            if deviation > ORTHONORMAL_TOL {
                return Err(Error::Basis { i, j, deviation });
            }
        }
    }
    Ok(())
}

/// Result of one projective measurement.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub label: String,
    /// Position of the outcome in the basis; `None` for the residual outcome.
    pub index: Option<usize>,
    pub probability: f64,
    pub post_state: PureState,
    /// Probability of every outcome, in basis order, residual last if present.
    pub distribution: Vec<(String, f64)>,
}

/// Observable with a declared eigenbasis; the orthogonal complement of the
/// eigenbasis span carries a single eigenvalue.
#[derive(Debug, Clone)]
pub struct Observable {
    basis: MeasurementBasis,
    eigenvalues: Vec<f64>,
    complement: f64,
}

impl Observable {
    pub fn new(eigen: Vec<(f64, String, PureState)>) -> Result<Self> {
        let eigenvalues = eigen.iter().map(|(l, _, _)| *l).collect();
        let basis = MeasurementBasis::new(eigen.into_iter().map(|(_, label, v)| (label, v)).collect())?;
        Ok(Self {
            basis,
            eigenvalues,
            complement: 0.0,
        })
    }

    pub fn with_complement(mut self, eigenvalue: f64) -> Self {
        self.complement = eigenvalue;
        self
    }

    pub fn basis(&self) -> &MeasurementBasis {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn complement_eigenvalue(&self) -> f64 {
        self.complement
    }
}

/// Orthonormal basis of one site's local space.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    site: String,
    outcomes: Vec<(String, Vec<Complex64>)>,
}

impl LocalBasis {
    pub fn new(site: impl Into<String>, outcomes: Vec<(String, Vec<Complex64>)>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::layout("local basis is empty"));
        }
        let d = outcomes[0].1.len();
        if outcomes.iter().any(|(_, v)| v.len() != d) {
            return Err(Error::layout("local basis vectors differ in length"));
        }
        check_orthonormal(outcomes.iter().map(|(_, v)| v.as_slice()))?;
        Ok(Self {
            site: site.into(),
            outcomes,
        })
    }

    /// Eigenbasis of σ_z on a qutrit, labelled `-1`, `0`, `+1`.
    pub fn spin_z(site: impl Into<String>) -> Self {
        let outcomes = Spin::ALL
            .iter()
            .map(|s| {
                let mut v = vec![ZERO; 3];
                v[s.level()] = ONE;
                (format!("{:+}", s.value()).replace("+0", "0"), v)
            })
            .collect();
        Self {
            site: site.into(),
            outcomes,
        }
    }

    pub fn site(&self) -> &str {
        &self.site
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|(l, _)| l.as_str())
    }
}

fn sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding at the top end: fall back to the last nonzero outcome.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl PureState {
    fn basis_overlaps(&self, basis: &MeasurementBasis) -> Result<Vec<Complex64>> {
        if *basis.layout != *self.layout() {
            return Err(Error::layout(format!(
                "measurement basis on {} applied to state on {}",
                basis.layout,
                self.layout()
            )));
        }
        basis.outcomes.iter().map(|(_, v)| v.inner(self)).collect()
    }

    /// Born-rule probabilities for `basis`. Under [`ResidualPolicy::Outcome`]
    /// the residual is appended when it exceeds [`RESIDUAL_TOL`].
    pub fn outcome_probabilities(
        &self,
        basis: &MeasurementBasis,
        policy: ResidualPolicy,
    ) -> Result<Vec<(String, f64)>> {
        let overlaps = self.basis_overlaps(basis)?;
        let norm2 = self.norm().powi(2);
        let mut dist: Vec<(String, f64)> = basis
            .labels()
            .zip(&overlaps)
            .map(|(l, c)| (l.to_string(), c.norm_sqr()))
            .collect();
        let residual = (norm2 - dist.iter().map(|(_, p)| p).sum::<f64>()).max(0.0);
        if residual > RESIDUAL_TOL {
            match policy {
                ResidualPolicy::Strict => return Err(Error::IncompleteBasis(residual)),
                ResidualPolicy::Outcome => dist.push((OUTSIDE_LABEL.to_string(), residual)),
            }
        }
        Ok(dist)
    }

    /// Projective measurement in `basis`; the post-state is the normalized
    /// projection onto the observed vector (or onto the complement).
    pub fn measure_projective<R: Rng + ?Sized>(
        &self,
        basis: &MeasurementBasis,
        policy: ResidualPolicy,
        rng: &mut R,
    ) -> Result<MeasurementOutcome> {
        let overlaps = self.basis_overlaps(basis)?;
        let distribution = self.outcome_probabilities(basis, policy)?;
        let probs: Vec<f64> = distribution.iter().map(|(_, p)| *p).collect();
        let k = sample(&probs, rng);
        let probability = probs[k];
        if k < basis.len() {
            let c = overlaps[k];
            let v = &basis.outcomes[k].1;
            let rot = c / c.norm();
            let post = PureState::from_amplitudes(v.shared_layout(), v.amplitudes().iter().map(|a| a * rot).collect())?;
            Ok(MeasurementOutcome {
                label: basis.outcomes[k].0.clone(),
                index: Some(k),
                probability,
                post_state: post,
                distribution,
            })
        } else {
            let mut amps = self.amplitudes().to_vec();
            for ((_, v), c) in basis.outcomes.iter().zip(&overlaps) {
                for (a, b) in amps.iter_mut().zip(v.amplitudes()) {
                    *a -= c * b;
                }
            }
            let post = PureState::from_amplitudes(self.shared_layout(), amps)?.normalized()?;
            Ok(MeasurementOutcome {
                label: OUTSIDE_LABEL.to_string(),
                index: None,
                probability,
                post_state: post,
                distribution,
            })
        }
    }

    /// `Σ_k λ_k |⟨e_k|ψ⟩|² + λ_⊥ (1 − Σ_k |⟨e_k|ψ⟩|²)`.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        let overlaps = self.basis_overlaps(&obs.basis)?;
        let mut inside = 0.0;
        let mut value = 0.0;
        for (c, l) in overlaps.iter().zip(&obs.eigenvalues) {
            let p = c.norm_sqr();
            inside += p;
            value += l * p;
        }
        let residual = (self.norm().powi(2) - inside).max(0.0);
        Ok(value + obs.complement * residual)
    }

    /// For each local outcome, the unnormalized projection `(I ⊗ |b⟩⟨b|)ψ`
    /// and its probability.
    pub fn local_projections(&self, basis: &LocalBasis) -> Result<(Vec<PureState>, Vec<f64>)> {
        let s = self.layout().site_index(&basis.site)?;
        let d = self.layout().sites()[s].local_dim();
        if basis.outcomes[0].1.len() != d {
            return Err(Error::layout(format!(
                "local basis has dimension {}, site `{}` has {d}",
                basis.outcomes[0].1.len(),
                basis.site
            )));
        }
        let stride = self.layout().stride(s);
        let mut projections = Vec::with_capacity(basis.outcomes.len());
        let mut probs = Vec::with_capacity(basis.outcomes.len());
        for (_, b) in &basis.outcomes {
            let mut coeff = vec![ZERO; self.dim()];
            for (i, &c) in self.amplitudes().iter().enumerate() {
                if c != ZERO {
                    let j = self.layout().level(i, s);
                    coeff[i - j * stride] += b[j].conj() * c;
                }
            }
            let mut amps = vec![ZERO; self.dim()];
            let mut p = 0.0;
            for (base, &c) in coeff.iter().enumerate() {
                if c == ZERO {
                    continue;
                }
                p += c.norm_sqr();
                for (j, bj) in b.iter().enumerate() {
                    amps[base + j * stride] = bj * c;
                }
            }
            probs.push(p);
            projections.push(PureState::from_amplitudes(self.shared_layout(), amps)?);
        }
        Ok((projections, probs))
    }

    pub fn local_outcome_probabilities(&self, basis: &LocalBasis) -> Result<Vec<(String, f64)>> {
        let (_, probs) = self.local_projections(basis)?;
        Ok(basis.labels().map(str::to_string).zip(probs).collect())
    }

    /// Projective measurement of a single site in `basis`, leaving the other
    /// sites untouched. A local basis that does not span the site's space
    /// fails with [`Error::IncompleteBasis`] when the state has weight outside it.
    pub fn measure_local<R: Rng + ?Sized>(&self, basis: &LocalBasis, rng: &mut R) -> Result<MeasurementOutcome> {
        let (projections, probs) = self.local_projections(basis)?;
        let residual = (self.norm().powi(2) - probs.iter().sum::<f64>()).max(0.0);
        if residual > RESIDUAL_TOL {
            return Err(Error::IncompleteBasis(residual));
        }
        let k = sample(&probs, rng);
        let distribution = basis.labels().map(str::to_string).zip(probs.iter().copied()).collect();
        Ok(MeasurementOutcome {
            label: basis.outcomes[k].0.clone(),
            index: Some(k),
            probability: probs[k],
            post_state: projections[k].clone().normalized()?,
            distribution,
        })
    }

    /// Measures the total occupation over all bosonic modes.
    pub fn measure_total_number<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64, PureState) {
        let dist: Vec<(usize, f64)> = self.total_number_distribution().into_iter().collect();
        let probs: Vec<f64> = dist.iter().map(|(_, p)| *p).collect();
        let (n, p) = dist[sample(&probs, rng)];
        let (_, post) = self.project_total_number(n).expect("sampled sector has weight");
        (n, p, post)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::layout::BasisState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ab() -> Arc<ModeLayout> {
        Arc::new(ModeLayout::modes(&[("A", 1), ("B", 1)]).unwrap())
    }

    fn pair(sign: f64) -> PureState {
        PureState::superpose(
            ab(),
            &[
                (ONE, BasisState::modes(&[1, 0])),
                (Complex64::new(sign, 0.0), BasisState::modes(&[0, 1])),
            ],
        )
        .unwrap()
    }

    fn same_diff() -> MeasurementBasis {
        MeasurementBasis::new(vec![("same".into(), pair(1.0)), ("diff".into(), pair(-1.0))]).unwrap()
    }

    #[test]
    fn eigenstates_measure_deterministically() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let out = pair(-1.0)
                .measure_projective(&same_diff(), ResidualPolicy::Strict, &mut rng)
                .unwrap();
            assert_eq!(out.label, "diff");
            assert!((out.probability - 1.0).abs() < 1e-12);
            let out = pair(1.0)
                .measure_projective(&same_diff(), ResidualPolicy::Strict, &mut rng)
                .unwrap();
            assert_eq!(out.label, "same");
        }
    }

    #[test]
    fn equal_superposition_splits_evenly() {
        let s = PureState::from_amplitudes(
            ab(),
            pair(1.0)
                .amplitudes()
                .iter()
                .zip(pair(-1.0).amplitudes())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap()
        .normalized()
        .unwrap();
        let dist = s.outcome_probabilities(&same_diff(), ResidualPolicy::Strict).unwrap();
        assert!((dist[0].1 - 0.5).abs() < 1e-12);
        assert!((dist[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let err = MeasurementBasis::new(vec![("a".into(), pair(1.0)), ("b".into(), pair(1.0))]).unwrap_err();
        assert!(matches!(err, Error::Basis { i: 0, j: 1, .. }));
    }

    #[test]
    fn residual_policy() {
        let s = PureState::basis(ab(), &BasisState::modes(&[0, 0])).unwrap();
        let err = s
            .measure_projective(&same_diff(), ResidualPolicy::Strict, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap_err();
        assert!(matches!(err, Error::IncompleteBasis(p) if (p - 1.0).abs() < 1e-12));
        let out = s
            .measure_projective(&same_diff(), ResidualPolicy::Outcome, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(out.label, OUTSIDE_LABEL);
        assert!(out.index.is_none());
        assert!(out.post_state.approx_eq_up_to_phase(&s, 1e-12));
    }

    #[test]
    fn expectation_uses_complement_eigenvalue() {
        let obs = Observable::new(vec![(0.0, "same".into(), pair(1.0)), (1.0, "diff".into(), pair(-1.0))])
            .unwrap()
            .with_complement(5.0);
        assert!((pair(-1.0).expectation(&obs).unwrap() - 1.0).abs() < 1e-12);
        let vac = PureState::basis(ab(), &BasisState::modes(&[0, 0])).unwrap();
        assert!((vac.expectation(&obs).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn local_spin_measurement_collapses_partner() {
        let l = Arc::new(ModeLayout::qutrits(&["q1", "q2"]).unwrap());
        let yes = PureState::superpose(
            l,
            &[
                (ONE, BasisState::spins(&[Spin::Zero, Spin::Up])),
                (ONE, BasisState::spins(&[Spin::Up, Spin::Zero])),
            ],
        )
        .unwrap();
        let basis = LocalBasis::spin_z("q1");
        assert_eq!(basis.labels().collect::<Vec<_>>(), vec!["-1", "0", "+1"]);
        let dist = yes.local_outcome_probabilities(&basis).unwrap();
        assert!((dist[1].1 - 0.5).abs() < 1e-12 && (dist[2].1 - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = yes.measure_local(&basis, &mut rng).unwrap();
        let expect = if out.label == "+1" {
            BasisState::spins(&[Spin::Up, Spin::Zero])
        } else {
            BasisState::spins(&[Spin::Zero, Spin::Up])
        };
        assert!((out.post_state.amplitude(&expect).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn total_number_measurement() {
        let s = PureState::superpose(
            ab(),
            &[(ONE, BasisState::modes(&[0, 0])), (ONE, BasisState::modes(&[1, 1]))],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, p, post) = s.measure_total_number(&mut rng);
        assert!(n == 0 || n == 2);
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(post.total_number_distribution().len(), 1);
    }
}
