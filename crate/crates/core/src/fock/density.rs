use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::layout::ModeLayout;
use super::state::{PureState, ZERO};
use crate::error::{Error, Result};

/// Tolerance for Hermiticity and unit trace.
pub const DENSITY_TOL: f64 = 1e-12;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = -1e-10;

/// Reduced (mixed) state on a sub-layout.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    layout: ModeLayout,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(layout: ModeLayout, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::layout(format!(
                "density matrix is {}x{}, layout dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                layout.dim()
            )));
        }
        Ok(Self { layout, matrix })
    }

    /// `Σ_k p_k |k⟩⟨k|` in the computational basis of `layout`.
    pub fn diagonal(layout: ModeLayout, probs: &[f64]) -> Result<Self> {
        let d = layout.dim();
        if probs.len() != d {
            return Err(Error::layout(format!("{} weights for dimension {d}", probs.len())));
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(probs[i], 0.0) } else { ZERO });
        Ok(Self { layout, matrix })
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(layout: ModeLayout) -> Self {
        let d = layout.dim();
        let probs = vec![1.0 / d as f64; d];
        Self::diagonal(layout, &probs).expect("dimension matches")
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ.
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .filter(|&l| l > 1e-15)
            .map(|l| -l * l.ln())
            .sum()
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().into_iter().filter(|&l| l > tol).count()
    }

    /// `½ Σ |λ_i(ρ − σ)|`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::layout(format!(
                "trace distance between {} and {}",
                self.layout, other.layout
            )));
        }
        let diff = &self.matrix - &other.matrix;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
    }

    /// Checks Hermiticity, unit trace and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_error();
        let t = self.trace();
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if h > DENSITY_TOL || (t - Complex64::new(1.0, 0.0)).norm() > DENSITY_TOL || min < PSD_TOL {
            return Err(Error::layout(format!(
                "invalid density matrix: hermiticity error {h:.3e}, trace {t}, min eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    // Symmetrize to absorb rounding before the Hermitian solver.
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

impl PureState {
    /// Reduced density operator on the `keep` sites, tracing out the rest.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::layout("partial trace must keep at least one site"));
        }
        let (kl, rl, m) = self.bipartition(keep)?;
        let (dk, dr) = (kl.dim(), rl.dim());
        let mut rho = DMatrix::from_element(dk, dk, ZERO);
        for a in 0..dk {
            let row_a = &m[a * dr..(a + 1) * dr];
            for b in a..dk {
                let row_b = &m[b * dr..(b + 1) * dr];
                let v: Complex64 = row_a.iter().zip(row_b).map(|(x, y)| x * y.conj()).sum();
                rho[(a, b)] = v;
                rho[(b, a)] = v.conj();
            }
        }
        DensityMatrix::new(kl, rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::layout::BasisState;
    use crate::fock::state::ONE;

    #[test]
    fn ballot_pair_reduces_to_maximally_mixed() {
        let l = ModeLayout::modes(&[("A", 1), ("B", 1)]).unwrap();
        let c0 = PureState::superpose(
            l,
            &[(ONE, BasisState::modes(&[1, 0])), (ONE, BasisState::modes(&[0, 1]))],
        )
        .unwrap();
        let rho = c0.partial_trace(&["A"]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(ModeLayout::modes(&[("A", 1)]).unwrap());
        assert!(rho.trace_distance(&mixed).unwrap() < 1e-15);
        assert!((rho.entropy() - 2f64.ln()).abs() < 1e-12);
        rho.validate().unwrap();
    }

    #[test]
    fn product_state_reduces_to_pure() {
        let l = ModeLayout::modes(&[("A", 1), ("B", 1)]).unwrap();
        let s = PureState::basis(l, &BasisState::modes(&[1, 0])).unwrap();
        let rho = s.partial_trace(&["A"]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-15);
        assert_eq!(rho.matrix()[(1, 1)], ONE);
        assert_eq!(rho.rank(1e-10), 1);
    }

    #[test]
    fn empty_keep_is_an_error() {
        let l = ModeLayout::modes(&[("A", 1)]).unwrap();
        let s = PureState::basis(l, &BasisState::modes(&[0])).unwrap();
        assert!(matches!(s.partial_trace::<&str>(&[]), Err(Error::Layout(_))));
        assert!(s.partial_trace(&["Z"]).is_err());
    }

    #[test]
    fn keeping_everything_gives_the_projector() {
        let l = ModeLayout::modes(&[("A", 1), ("B", 2)]).unwrap();
        let s = PureState::superpose(
            l,
            &[
                (ONE, BasisState::modes(&[1, 2])),
                (Complex64::new(0.0, 1.0), BasisState::modes(&[0, 1])),
            ],
        )
        .unwrap();
        let rho = s.partial_trace(&["B", "A"]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!((rho.matrix()[(5, 1)] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn validate_rejects_bad_trace() {
        let l = ModeLayout::modes(&[("A", 1)]).unwrap();
        let rho = DensityMatrix::diagonal(l, &[0.7, 0.7]).unwrap();
        assert!(rho.validate().is_err());
    }
}
