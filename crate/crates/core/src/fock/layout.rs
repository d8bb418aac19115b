use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the tensor-product dimension of a layout.
pub const DEFAULT_DIM_LIMIT: usize = 1 << 24;

/// Eigenvalue of the z component of spin for one qutrit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Spin {
    Down,
    Zero,
    Up,
}

impl Spin {
    pub const ALL: [Spin; 3] = [Spin::Down, Spin::Zero, Spin::Up];

    pub fn value(self) -> i8 {
        match self {
            Spin::Down => -1,
            Spin::Zero => 0,
            Spin::Up => 1,
        }
    }

    /// Position of this spin in the qutrit's local basis (−1, 0, +1 → 0, 1, 2).
    pub fn level(self) -> usize {
        (self.value() + 1) as usize
    }

    pub fn from_level(level: usize) -> Option<Self> {
        Self::ALL.get(level).copied()
    }
}

impl From<Spin> for i8 {
    fn from(s: Spin) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for Spin {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Spin::Down),
            0 => Ok(Spin::Zero),
            1 => Ok(Spin::Up),
            other => Err(format!("spin must be -1, 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    Mode { cutoff: usize },
    Qutrit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub label: String,
    pub kind: SiteKind,
}

impl Site {
    pub fn local_dim(&self) -> usize {
        match self.kind {
            SiteKind::Mode { cutoff } => cutoff + 1,
            SiteKind::Qutrit => 3,
        }
    }

    pub fn is_mode(&self) -> bool {
        matches!(self.kind, SiteKind::Mode { .. })
    }
}

/// A computational basis element: one occupation per bosonic mode and one
/// spin per qutrit, each listed in layout order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisState {
    pub occupations: Vec<usize>,
    #[serde(default)]
    pub spins: Vec<Spin>,
}

impl BasisState {
    pub fn new(occupations: Vec<usize>, spins: Vec<Spin>) -> Self {
        Self { occupations, spins }
    }

    pub fn modes(occupations: &[usize]) -> Self {
        Self::new(occupations.to_vec(), Vec::new())
    }

    pub fn spins(spins: &[Spin]) -> Self {
        Self::new(Vec::new(), spins.to_vec())
    }

    pub fn total_occupation(&self) -> usize {
        self.occupations.iter().sum()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .occupations
            .iter()
            .map(|n| n.to_string())
            .chain(self.spins.iter().map(|s| s.value().to_string()))
            .collect();
        write!(f, "|{}>", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub label: String,
    pub cutoff: usize,
}

/// Serialized form of a [`ModeLayout`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub bosonic_modes: Vec<ModeSpec>,
    #[serde(default)]
    pub qutrits: Vec<String>,
}

/// Subsystem structure of a finite occupation-number Hilbert space.
///
/// Sites are ordered bosonic modes first, then qutrits, each group in the
/// order it was declared. Basis indices are row-major over that order: the
/// first site is the most significant digit and the last site has stride 1.
/// A qutrit with spin `s` contributes local digit `s + 1`. This ordering is
/// part of the serialized-state contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "LayoutSpec", try_from = "LayoutSpec")]
pub struct ModeLayout {
    sites: Vec<Site>,
    strides: Vec<usize>,
    dim: usize,
    limit: usize,
}

impl PartialEq for ModeLayout {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites
    }
}

impl Eq for ModeLayout {}

impl ModeLayout {
    pub fn new<M, Q>(modes: M, qutrits: Q) -> Result<Self>
    where
        M: IntoIterator,
        M::Item: Into<(String, usize)>,
        Q: IntoIterator,
        Q::Item: Into<String>,
    {
        Self::with_limit(modes, qutrits, DEFAULT_DIM_LIMIT)
    }

    pub fn with_limit<M, Q>(modes: M, qutrits: Q, limit: usize) -> Result<Self>
    where
        M: IntoIterator,
        M::Item: Into<(String, usize)>,
        Q: IntoIterator,
        Q::Item: Into<String>,
    {
        let mut sites: Vec<Site> = modes
            .into_iter()
            .map(|m| {
                let (label, cutoff) = m.into();
                Site {
                    label,
                    kind: SiteKind::Mode { cutoff },
                }
            })
            .collect();
        sites.extend(qutrits.into_iter().map(|q| Site {
            label: q.into(),
            kind: SiteKind::Qutrit,
        }));
        Self::from_sites(sites, limit)
    }

    /// Layout containing only bosonic modes.
    pub fn modes(modes: &[(&str, usize)]) -> Result<Self> {
        Self::new(
            modes.iter().map(|&(l, c)| (l.to_string(), c)),
            std::iter::empty::<String>(),
        )
    }

    /// Layout containing only qutrits.
    pub fn qutrits(labels: &[&str]) -> Result<Self> {
        Self::new(
            std::iter::empty::<(String, usize)>(),
            labels.iter().map(|l| l.to_string()),
        )
    }

    fn from_sites(sites: Vec<Site>, limit: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &sites {
            if s.label.is_empty() {
                return Err(Error::layout("site labels must be nonempty"));
            }
            if !seen.insert(s.label.as_str()) {
                return Err(Error::layout(format!("duplicate site label `{}`", s.label)));
            }
        }
        // Modes first, qutrits second, stable within each group.
        let mut sites = sites;
        sites.sort_by_key(|s| !s.is_mode());

        let dim128 = sites
            .iter()
            .try_fold(1u128, |acc, s| acc.checked_mul(s.local_dim() as u128))
            .unwrap_or(u128::MAX);
        if dim128 > limit as u128 {
            return Err(Error::DimensionLimit { dim: dim128, limit });
        }
        let dim = dim128 as usize;
        let mut strides = vec![1usize; sites.len()];
        for i in (0..sites.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sites[i + 1].local_dim();
        }
        Ok(Self {
            sites,
            strides,
            dim,
            limit,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dim_limit(&self) -> usize {
        self.limit
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_modes(&self) -> usize {
        self.sites.iter().filter(|s| s.is_mode()).count()
    }

    pub fn num_qutrits(&self) -> usize {
        self.sites.len() - self.num_modes()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.sites.iter().map(|s| s.label.as_str())
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    pub fn site_index(&self, label: &str) -> Result<usize> {
        self.sites
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::layout(format!("unknown site `{label}`")))
    }

    /// Index of a bosonic mode, failing if the label is unknown or names a qutrit.
    pub fn mode_index(&self, label: &str) -> Result<usize> {
        let i = self.site_index(label)?;
        if !self.sites[i].is_mode() {
            return Err(Error::layout(format!("site `{label}` is a qutrit, not a bosonic mode")));
        }
        Ok(i)
    }

    pub fn qutrit_index(&self, label: &str) -> Result<usize> {
        let i = self.site_index(label)?;
        if self.sites[i].is_mode() {
            return Err(Error::layout(format!("site `{label}` is a bosonic mode, not a qutrit")));
        }
        Ok(i)
    }

    pub fn cutoff(&self, label: &str) -> Result<usize> {
        match self.sites[self.mode_index(label)?].kind {
            SiteKind::Mode { cutoff } => Ok(cutoff),
            SiteKind::Qutrit => unreachable!(),
        }
    }

    /// Local level of site `site` in basis index `index`.
    #[inline]
    pub fn level(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.sites[site].local_dim()
    }

    pub fn index_of(&self, b: &BasisState) -> Result<usize> {
        let n_modes = self.num_modes();
        if b.occupations.len() != n_modes || b.spins.len() != self.num_qutrits() {
            return Err(Error::layout(format!(
                "basis state {b} has {} occupations and {} spins, layout has {} modes and {} qutrits",
                b.occupations.len(),
                b.spins.len(),
                n_modes,
                self.num_qutrits()
            )));
        }
        let mut index = 0;
        for (i, &n) in b.occupations.iter().enumerate() {
            let site = &self.sites[i];
            if let SiteKind::Mode { cutoff } = site.kind {
                if n > cutoff {
                    return Err(Error::Cutoff {
                        site: site.label.clone(),
                        occupation: n,
                        cutoff,
                    });
                }
            }
            index += n * self.strides[i];
        }
        for (j, s) in b.spins.iter().enumerate() {
            index += s.level() * self.strides[n_modes + j];
        }
        Ok(index)
    }

    pub fn basis_state(&self, index: usize) -> BasisState {
        let mut occupations = Vec::with_capacity(self.num_modes());
        let mut spins = Vec::with_capacity(self.num_qutrits());
        for (i, site) in self.sites.iter().enumerate() {
            let level = self.level(index, i);
            if site.is_mode() {
                occupations.push(level);
            } else {
                spins.push(Spin::from_level(level).expect("qutrit level < 3"));
            }
        }
        BasisState { occupations, spins }
    }

    /// Sub-layout of the given sites, kept in this layout's order.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let mut keep = vec![false; self.sites.len()];
        for l in labels {
            keep[self.site_index(l.as_ref())?] = true;
        }
        let sites = self
            .sites
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(s, _)| s.clone())
            .collect();
        Self::from_sites(sites, self.limit)
    }

    /// Layout of the tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let sites = self.sites.iter().chain(&other.sites).cloned().collect();
        Self::from_sites(sites, self.limit.max(other.limit))
    }

    /// Same structure with some sites renamed.
    pub fn relabel(&self, renames: &BTreeMap<String, String>) -> Result<Self> {
        let sites = self
            .sites
            .iter()
            .map(|s| Site {
                label: renames.get(&s.label).cloned().unwrap_or_else(|| s.label.clone()),
                kind: s.kind,
            })
            .collect();
        Self::from_sites(sites, self.limit)
    }

    /// Total occupation over all bosonic modes of basis index `index`.
    pub fn total_occupation(&self, index: usize) -> usize {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_mode())
            .map(|(i, _)| self.level(index, i))
            .sum()
    }
}

impl From<ModeLayout> for LayoutSpec {
    fn from(l: ModeLayout) -> Self {
        let mut bosonic_modes = Vec::new();
        let mut qutrits = Vec::new();
        for s in l.sites {
            match s.kind {
                SiteKind::Mode { cutoff } => bosonic_modes.push(ModeSpec { label: s.label, cutoff }),
                SiteKind::Qutrit => qutrits.push(s.label),
            }
        }
        LayoutSpec { bosonic_modes, qutrits }
    }
}

impl TryFrom<LayoutSpec> for ModeLayout {
    type Error = Error;

    fn try_from(spec: LayoutSpec) -> Result<Self> {
        ModeLayout::new(
            spec.bosonic_modes.into_iter().map(|m| (m.label, m.cutoff)),
            spec.qutrits,
        )
    }
}

impl fmt::Display for ModeLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .sites
            .iter()
            .map(|s| match s.kind {
                SiteKind::Mode { cutoff } => format!("{}:{}", s.label, cutoff),
                SiteKind::Qutrit => format!("{}:qutrit", s.label),
            })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_indexing() {
        let l = ModeLayout::modes(&[("A", 1), ("B", 1)]).unwrap();
        assert_eq!(l.dim(), 4);
        assert_eq!(l.index_of(&BasisState::modes(&[0, 1])).unwrap(), 1);
        assert_eq!(l.index_of(&BasisState::modes(&[1, 0])).unwrap(), 2);
        for i in 0..l.dim() {
            assert_eq!(l.index_of(&l.basis_state(i)).unwrap(), i);
        }
    }

    #[test]
    fn qutrits_follow_modes() {
        let l = ModeLayout::new([("q".to_string(), 0)], ["s1", "s2"]).unwrap();
        assert_eq!(l.dim(), 9);
        let b = BasisState::new(vec![0], vec![Spin::Down, Spin::Up]);
        assert_eq!(l.index_of(&b).unwrap(), 2);
        assert_eq!(l.basis_state(2), b);
    }

    #[test]
    fn cutoff_violation() {
        let l = ModeLayout::modes(&[("A", 1)]).unwrap();
        let err = l.index_of(&BasisState::modes(&[2])).unwrap_err();
        assert!(matches!(
            err,
            Error::Cutoff {
                occupation: 2,
                cutoff: 1,
                ..
            }
        ));
        assert!(err.is_cutoff());
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = ModeLayout::modes(&[("A", 1), ("A", 2)]).unwrap_err();
        assert!(matches!(err, Error::Layout(_)));
        let err = ModeLayout::new([("A".to_string(), 1)], ["A"]).unwrap_err();
        assert!(matches!(err, Error::Layout(_)));
    }

    #[test]
    fn dimension_limit() {
        let err =
            ModeLayout::with_limit([("A".to_string(), 9), ("B".to_string(), 9)], Vec::<String>::new(), 50).unwrap_err();
        assert_eq!(err, Error::DimensionLimit { dim: 100, limit: 50 });
        let ok = ModeLayout::with_limit([("A".to_string(), 9)], Vec::<String>::new(), 10).unwrap();
        assert_eq!(ok.dim(), 10);
    }

    #[test]
    fn zero_cutoff_mode_has_dimension_one() {
        let l = ModeLayout::modes(&[("A", 0), ("B", 2)]).unwrap();
        assert_eq!(l.dim(), 3);
    }

    #[test]
    fn select_keeps_layout_order() {
        let l = ModeLayout::new([("T".to_string(), 4), ("V".to_string(), 2)], ["q"]).unwrap();
        let sub = l.select(&["q", "T"]).unwrap();
        assert_eq!(sub.labels().collect::<Vec<_>>(), vec!["T", "q"]);
        assert_eq!(sub.dim(), 15);
        assert!(l.select(&["X"]).is_err());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let l = ModeLayout::new([("T".to_string(), 3)], ["q1"]).unwrap();
        let json = serde_json::to_string(&l).unwrap();
        assert_eq!(json, r#"{"bosonic_modes":[{"label":"T","cutoff":3}],"qutrits":["q1"]}"#);
        let back: ModeLayout = serde_json::from_str(&json).unwrap();
        assert_eq!(back, l);
        let dup = r#"{"bosonic_modes":[{"label":"T","cutoff":3}],"qutrits":["T"]}"#;
        assert!(serde_json::from_str::<ModeLayout>(dup).is_err());
    }
}
