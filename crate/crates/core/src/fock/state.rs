use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::layout::{BasisState, ModeLayout};
use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Normalization tolerance used by constructors and factorization.
pub const NORM_TOL: f64 = 1e-12;

/// Magnitudes within this of the maximum count as ties when choosing the
/// reference amplitude for global-phase canonicalization.
const PHASE_TIE_TOL: f64 = 1e-12;

/// Complex amplitude vector over the basis of a [`ModeLayout`].
///
/// Operations take `&self` and return a new state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "StateSnapshot", try_from = "StateSnapshot")]
pub struct PureState {
    layout: Arc<ModeLayout>,
    amps: Vec<Complex64>,
}

/// JSON form of a [`PureState`]: amplitudes as `[re, im]` pairs in the
/// layout's row-major index order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub layout: ModeLayout,
    pub index_order: String,
    pub amplitudes: Vec<[f64; 2]>,
}

pub const INDEX_ORDER_TAG: &str = "row-major";

impl From<PureState> for StateSnapshot {
    fn from(s: PureState) -> Self {
        StateSnapshot {
            layout: (*s.layout).clone(),
            index_order: INDEX_ORDER_TAG.to_string(),
            amplitudes: s.amps.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl TryFrom<StateSnapshot> for PureState {
    type Error = Error;

    fn try_from(s: StateSnapshot) -> Result<Self> {
        if s.index_order != INDEX_ORDER_TAG {
            return Err(Error::layout(format!(
                "unsupported index order `{}`, expected `{INDEX_ORDER_TAG}`",
                s.index_order
            )));
        }
        let amps = s.amplitudes.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        PureState::from_amplitudes(s.layout, amps)
    }
}

impl PureState {
    /// Wraps raw amplitudes. The vector is taken as-is; call
    /// [`normalized`](Self::normalized) if it may not be a unit vector.
    pub fn from_amplitudes(layout: impl Into<Arc<ModeLayout>>, amps: Vec<Complex64>) -> Result<Self> {
        let layout = layout.into();
        if amps.len() != layout.dim() {
            return Err(Error::layout(format!(
                "{} amplitudes for a layout of dimension {}",
                amps.len(),
                layout.dim()
            )));
        }
        Ok(Self { layout, amps })
    }

    pub fn basis(layout: impl Into<Arc<ModeLayout>>, b: &BasisState) -> Result<Self> {
        let layout = layout.into();
        let idx = layout.index_of(b)?;
        let mut amps = vec![ZERO; layout.dim()];
        amps[idx] = ONE;
        Ok(Self { layout, amps })
    }

    /// Normalized superposition `Σ c_k |b_k⟩ / ‖c‖`. Repeated basis states add.
    pub fn superpose(layout: impl Into<Arc<ModeLayout>>, terms: &[(Complex64, BasisState)]) -> Result<Self> {
        let layout = layout.into();
        let mut amps = vec![ZERO; layout.dim()];
        for (c, b) in terms {
            amps[layout.index_of(b)?] += c;
        }
        Self { layout, amps }.normalized()
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn shared_layout(&self) -> Arc<ModeLayout> {
        Arc::clone(&self.layout)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, b: &BasisState) -> Result<Complex64> {
        Ok(self.amps[self.layout.index_of(b)?])
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateState);
        }
        let inv = 1.0 / n;
        self.amps.iter_mut().for_each(|c| *c *= inv);
        Ok(self)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub(crate) fn check_same_layout(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout {
            Ok(())
        } else {
            Err(Error::layout(format!(
                "layout mismatch: {} vs {}",
                self.layout, other.layout
            )))
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_layout(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// 2-norm of `self − other` (no normalization, no phase alignment).
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same_layout(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Multiplies every amplitude by `exp(i·phase(index))`.
    pub(crate) fn map_phases(&self, phase: impl Fn(usize) -> f64) -> Self {
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if c == ZERO {
                    c
                } else {
                    c * Complex64::from_polar(1.0, phase(i))
                }
            })
            .collect();
        Self {
            layout: Arc::clone(&self.layout),
            amps,
        }
    }

    /// Applies `exp(i·f(N̂))` on bosonic mode `site`: each basis component
    /// with occupation `n` at that site picks up phase `f(n)`.
    pub fn apply_number_phase(&self, site: &str, phase_fn: impl Fn(usize) -> f64) -> Result<Self> {
        let s = self.layout.mode_index(site)?;
        let cutoff = self.layout.cutoff(site)?;
        let table: Vec<f64> = (0..=cutoff).map(&phase_fn).collect();
        Ok(self.map_phases(|i| table[self.layout.level(i, s)]))
    }

    /// Applies `exp[i N̂ (a + b σ̂_z)]` coupling mode `mode_site` to qutrit
    /// `qutrit_site`; a basis state with occupation `n` and spin `s` picks up
    /// phase `n·(a + b·s)`. Callers fold any overall angle into `a` and `b`.
    pub fn apply_conditional_spin_phase(&self, mode_site: &str, qutrit_site: &str, a: f64, b: f64) -> Result<Self> {
        let m = self.layout.mode_index(mode_site)?;
        let q = self.layout.qutrit_index(qutrit_site)?;
        Ok(self.map_phases(|i| {
            let n = self.layout.level(i, m) as f64;
            let s = self.layout.level(i, q) as f64 - 1.0;
            n * (a + b * s)
        }))
    }

    /// Applies a `d×d` matrix (row-major, `d` the local dimension) to one site.
    pub fn apply_local(&self, site: &str, matrix: &[Complex64]) -> Result<Self> {
        let s = self.layout.site_index(site)?;
        let d = self.layout.sites()[s].local_dim();
        if matrix.len() != d * d {
            return Err(Error::layout(format!(
                "local operator on `{site}` must be {d}x{d}, got {} entries",
                matrix.len()
            )));
        }
        let stride = self.layout.stride(s);
        let mut amps = vec![ZERO; self.dim()];
        for (i, &c) in self.amps.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let col = self.layout.level(i, s);
            let base = i - col * stride;
            for row in 0..d {
                let m = matrix[row * d + col];
                if m != ZERO {
                    amps[base + row * stride] += m * c;
                }
            }
        }
        Ok(Self {
            layout: Arc::clone(&self.layout),
            amps,
        })
    }

    /// `self ⊗ other`; sites of `self` come first within each group.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.tensor(&other.layout)?;
        let mut amps = vec![ZERO; layout.dim()];
        // Map every (i, j) pair through the combined basis states so the
        // modes-before-qutrits reordering is handled by the layout.
        for (i, &a) in self.amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let bi = self.layout.basis_state(i);
            for (j, &b) in other.amps.iter().enumerate() {
                if b == ZERO {
                    continue;
                }
                let bj = other.layout.basis_state(j);
                let combined = BasisState::new(
                    bi.occupations.iter().chain(&bj.occupations).copied().collect(),
                    bi.spins.iter().chain(&bj.spins).copied().collect(),
                );
                amps[layout.index_of(&combined)?] = a * b;
            }
        }
        Ok(Self {
            layout: Arc::new(layout),
            amps,
        })
    }

    pub fn relabel(&self, renames: &BTreeMap<String, String>) -> Result<Self> {
        Ok(Self {
            layout: Arc::new(self.layout.relabel(renames)?),
            amps: self.amps.clone(),
        })
    }

    /// Index of the reference amplitude for phase canonicalization: the
    /// largest magnitude, ties broken by lowest index.
    fn phase_reference(&self) -> Option<usize> {
        let max = self.amps.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return None;
        }
        self.amps.iter().position(|c| c.norm() >= max - PHASE_TIE_TOL)
    }

    /// Copy of the state with the global phase removed: the reference
    /// amplitude is made real and positive.
    pub fn canonical(&self) -> Self {
        match self.phase_reference() {
            None => self.clone(),
            Some(r) => {
                let rot = self.amps[r].conj() / self.amps[r].norm();
                Self {
                    layout: Arc::clone(&self.layout),
                    amps: self.amps.iter().map(|c| c * rot).collect(),
                }
            }
        }
    }

    /// Equality up to a global phase: the canonical forms agree entrywise
    /// within `tol`.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        if self.check_same_layout(other).is_err() {
            return false;
        }
        // Align on self's reference amplitude so near-ties cannot pick
        // different references in the two states.
        let Some(r) = self.phase_reference() else {
            return other.norm() <= tol;
        };
        let (a, b) = (self.amps[r], other.amps[r]);
        if b.norm() == 0.0 {
            return false;
        }
        let rot = (a / a.norm()) * (b.conj() / b.norm());
        self.amps
            .iter()
            .zip(&other.amps)
            .all(|(x, y)| (x - y * rot).norm() <= tol)
    }

    /// Probability of each total occupation summed over all bosonic modes.
    pub fn total_number_distribution(&self) -> BTreeMap<usize, f64> {
        let mut dist = BTreeMap::new();
        for (i, c) in self.amps.iter().enumerate() {
            let p = c.norm_sqr();
            if p > 0.0 {
                *dist.entry(self.layout.total_occupation(i)).or_insert(0.0) += p;
            }
        }
        dist
    }

    /// Projection onto the total-occupation-`n` sector: `(probability,
    /// normalized post-state)`, or `None` if the sector has zero weight.
    pub fn project_total_number(&self, n: usize) -> Option<(f64, Self)> {
        let amps: Vec<Complex64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, &c)| if self.layout.total_occupation(i) == n { c } else { ZERO })
            .collect();
        let p: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        if p == 0.0 {
            return None;
        }
        let post = Self {
            layout: Arc::clone(&self.layout),
            amps,
        }
        .normalized()
        .ok()?;
        Some((p, post))
    }

    /// Reshapes the amplitudes into a matrix `M[first][rest]` over the split
    /// `first | rest`, returning the two sub-layouts and the row-major matrix.
    pub(crate) fn bipartition<S: AsRef<str>>(&self, first: &[S]) -> Result<(ModeLayout, ModeLayout, Vec<Complex64>)> {
        if first.is_empty() {
            return Err(Error::layout("bipartition needs at least one site"));
        }
        let first_layout = self.layout.select(first)?;
        let keep: Vec<bool> = self
            .layout
            .labels()
            .map(|l| first_layout.site_index(l).is_ok())
            .collect();
        let rest_labels: Vec<&str> = self
            .layout
            .labels()
            .zip(&keep)
            .filter(|(_, &k)| !k)
            .map(|(l, _)| l)
            .collect();
        let rest_layout = if rest_labels.is_empty() {
            ModeLayout::modes(&[])?
        } else {
            self.layout.select(&rest_labels)?
        };
        let (dk, dr) = (first_layout.dim(), rest_layout.dim());
        let mut m = vec![ZERO; dk * dr];
        for (i, &c) in self.amps.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let (mut ki, mut ri) = (0, 0);
            for (s, site) in self.layout.sites().iter().enumerate() {
                let lvl = self.layout.level(i, s);
                if keep[s] {
                    ki = ki * site.local_dim() + lvl;
                } else {
                    ri = ri * site.local_dim() + lvl;
                }
            }
            m[ki * dr + ri] = c;
        }
        Ok((first_layout, rest_layout, m))
    }

    /// Splits a product state into its factors on `first` and on the
    /// remaining sites, failing with [`Error::Entangled`] if the best rank-1
    /// approximation leaves a residual above `tol`.
    pub fn factorize<S: AsRef<str>>(&self, first: &[S], tol: f64) -> Result<(Self, Self)> {
        let (fl, rl, m) = self.bipartition(first)?;
        let (dk, dr) = (fl.dim(), rl.dim());
        if dr == 1 {
            return Ok((Self::from_amplitudes(fl, m)?, Self::from_amplitudes(rl, vec![ONE])?));
        }
        let (mut best, mut col) = (0.0, 0);
        for (idx, c) in m.iter().enumerate() {
            if c.norm_sqr() > best {
                best = c.norm_sqr();
                col = idx % dr;
            }
        }
        if best == 0.0 {
            return Err(Error::DegenerateState);
        }
        // u ∝ column `col`; v = u† M is the matching row factor.
        let u_raw: Vec<Complex64> = (0..dk).map(|k| m[k * dr + col]).collect();
        let u = Self::from_amplitudes(fl, u_raw)?.normalized()?;
        let v: Vec<Complex64> = (0..dr)
            .map(|r| (0..dk).map(|k| u.amps[k].conj() * m[k * dr + r]).sum())
            .collect();
        let mut residual = 0.0;
        for k in 0..dk {
            for r in 0..dr {
                residual += (m[k * dr + r] - u.amps[k] * v[r]).norm_sqr();
            }
        }
        let residual = residual.sqrt();
        if residual > tol {
            return Err(Error::Entangled(residual));
        }
        let v = Self::from_amplitudes(rl, v)?.normalized()?;
        Ok((u, v))
    }
}
