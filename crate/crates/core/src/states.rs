//! Named ballot states, vote states and measurement bases.
//!
//! Ballot states share the branch structure `Σ_n |K(N−n), n, …, n⟩` over a
//! tally mode `T` followed by `K` voting modes. A vote of value `ν` advances
//! the relative phase between neighbouring branches by `2πν/(N+1)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{BasisState, LocalBasis, MeasurementBasis, ModeLayout, Observable, PureState, Spin, ONE};

pub const COMPARATIVE_SITES: [&str; 2] = ["A", "B"];
pub const TALLY_SITE: &str = "T";
/// Shared voting site of the two-mode survey.
pub const SURVEY_VOTER_SITE: &str = "V";

/// Label of the `i`-th voting site (1-based) of a multiparty ballot.
pub fn voting_site(i: usize) -> String {
    format!("V{i}")
}

/// Label of the `i`-th qutrit (1-based) of a qutrit vote register.
pub fn qutrit_site(i: usize) -> String {
    format!("q{i}")
}

/// Particle number `N` and number of voting sites / agents `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotParams {
    pub n: usize,
    pub k: usize,
}

impl BallotParams {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::protocol("particle number N must be at least 1"));
        }
        if k == 0 {
            return Err(Error::protocol("number of voting sites K must be at least 1"));
        }
        Ok(Self { n, k })
    }

    /// Tally modulus `N + 1`.
    pub fn modulus(&self) -> usize {
        self.n + 1
    }

    /// Phase step of one unit vote, `2π/(N+1)`.
    pub fn delta(&self) -> f64 {
        2.0 * PI / self.modulus() as f64
    }

    /// Phase angle of a vote of value `nu`.
    pub fn vote_angle(&self, nu: i64) -> f64 {
        2.0 * PI * nu as f64 / self.modulus() as f64
    }

    /// `nu mod (N+1)` in `[0, N]`.
    pub fn residue(&self, nu: i64) -> usize {
        nu.rem_euclid(self.modulus() as i64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vote {
    Yes,
    No,
}

impl Vote {
    fn spin(self) -> Spin {
        match self {
            Vote::Yes => Spin::Up,
            Vote::No => Spin::Down,
        }
    }
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vote::Yes => "yes",
            Vote::No => "no",
        })
    }
}

impl FromStr for Vote {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "yes" | "y" | "1" => Ok(Vote::Yes),
            "no" | "n" | "0" => Ok(Vote::No),
            other => Err(format!("expected yes or no, got `{other}`")),
        }
    }
}

/// `(|1,0⟩ + |0,1⟩)/√2` on modes `A`, `B` with cutoff 1.
pub fn comparative_state() -> PureState {
    PureState::superpose(
        comparative_layout(),
        &[(ONE, BasisState::modes(&[1, 0])), (ONE, BasisState::modes(&[0, 1]))],
    )
    .expect("fixed two-mode state")
}

pub fn comparative_layout() -> ModeLayout {
    ModeLayout::modes(&[(COMPARATIVE_SITES[0], 1), (COMPARATIVE_SITES[1], 1)]).expect("fixed layout")
}

/// `(|1,0⟩ − |0,1⟩)/√2`, the comparative ballot after differing votes.
pub fn comparative_flipped_state() -> PureState {
    PureState::superpose(
        comparative_layout(),
        &[(ONE, BasisState::modes(&[1, 0])), (-ONE, BasisState::modes(&[0, 1]))],
    )
    .expect("fixed two-mode state")
}

/// Layout with tally mode `T` (cutoff `K·N`) followed by the voting modes
/// (cutoff `N` each).
pub fn branch_layout<S: AsRef<str>>(n: usize, voting_sites: &[S]) -> Result<ModeLayout> {
    let k = voting_sites.len();
    let t_cutoff = k.checked_mul(n).ok_or(Error::DimensionLimit {
        dim: u128::MAX,
        limit: crate::fock::DEFAULT_DIM_LIMIT,
    })?;
    ModeLayout::new(
        std::iter::once((TALLY_SITE.to_string(), t_cutoff))
            .chain(voting_sites.iter().map(|l| (l.as_ref().to_string(), n))),
        std::iter::empty::<String>(),
    )
}

/// Branch `m` of a ballot with `k` voting modes: `|K(N−m), m, …, m⟩`.
pub fn ballot_branch(n: usize, k: usize, m: usize) -> BasisState {
    let mut occ = Vec::with_capacity(k + 1);
    occ.push(k * (n - m));
    occ.extend(std::iter::repeat_n(m, k));
    BasisState::modes(&occ)
}

/// `(1/√(N+1)) Σ_m e^{i·phase(m)} |K(N−m), m, …, m⟩` on `layout`, whose
/// first mode is the tally mode and whose remaining modes are voting modes.
pub fn phased_ballot_state(
    n: usize,
    layout: impl Into<Arc<ModeLayout>>,
    phase: impl Fn(usize) -> f64,
) -> Result<PureState> {
    let layout = layout.into();
    let k = branch_structure(n, &layout)?;
    let terms: Vec<(Complex64, BasisState)> = (0..=n)
        .map(|m| (Complex64::from_polar(1.0, phase(m)), ballot_branch(n, k, m)))
        .collect();
    PureState::superpose(layout, &terms)
}

/// Number of voting modes of a ballot layout, after checking that the
/// layout can hold every branch for particle number `n`.
fn branch_structure(n: usize, layout: &ModeLayout) -> Result<usize> {
    if layout.num_qutrits() != 0 || layout.num_modes() < 2 {
        return Err(Error::layout(format!(
            "{layout} is not a ballot layout (tally mode plus at least one voting mode)"
        )));
    }
    let k = layout.num_modes() - 1;
    let sites = layout.sites();
    let cutoff = |i: usize| match sites[i].kind {
        crate::fock::SiteKind::Mode { cutoff } => cutoff,
        crate::fock::SiteKind::Qutrit => 0,
    };
    if cutoff(0) < k * n || (1..=k).any(|i| cutoff(i) < n) {
        return Err(Error::layout(format!(
            "{layout} cannot hold N={n} across {k} voting modes"
        )));
    }
    Ok(k)
}

/// Two-mode survey ballot `(1/√(N+1)) Σ_n |N−n, n⟩` on `(T, V)`.
pub fn survey_state(params: &BallotParams) -> Result<PureState> {
    let layout = branch_layout(params.n, &[SURVEY_VOTER_SITE])?;
    phased_ballot_state(params.n, layout, |_| 0.0)
}

/// Multiparty ballot `(1/√(N+1)) Σ_n |K(N−n), n, …, n⟩` on `(T, V1 … VK)`.
pub fn multiparty_survey_state(params: &BallotParams) -> Result<PureState> {
    let labels: Vec<String> = (1..=params.k).map(voting_site).collect();
    let layout = branch_layout(params.n, &labels)?;
    phased_ballot_state(params.n, layout, |_| 0.0)
}

fn check_agents(agents: usize) -> Result<()> {
    if agents == 2 || agents == 3 {
        Ok(())
    } else {
        Err(Error::protocol(format!("ballot agents must be 2 or 3, got {agents}")))
    }
}

/// Ballot shared by `agents` ballot agents; same form as the multiparty
/// ballot with `K = agents`.
pub fn agent_ballot_state(params: &BallotParams, agents: usize) -> Result<PureState> {
    check_agents(agents)?;
    multiparty_survey_state(&BallotParams::new(params.n, agents)?)
}

pub fn qutrit_layout(width: usize) -> Result<ModeLayout> {
    check_agents(width)?;
    ModeLayout::new(std::iter::empty::<(String, usize)>(), (1..=width).map(qutrit_site))
}

/// Symmetric qutrit register with one spin set to `±1` and the rest `0`:
/// `+1` for yes, `−1` for no.
pub fn qutrit_vote_state(vote: Vote, width: usize) -> Result<PureState> {
    let layout = qutrit_layout(width)?;
    let terms: Vec<(Complex64, BasisState)> = (0..width)
        .map(|hot| {
            let spins: Vec<Spin> = (0..width)
                .map(|i| if i == hot { vote.spin() } else { Spin::Zero })
                .collect();
            (ONE, BasisState::spins(&spins))
        })
        .collect();
    PureState::superpose(layout, &terms)
}

/// Product qutrit state with every spin `+1`.
pub fn cheat_vote_state(width: usize) -> Result<PureState> {
    let layout = qutrit_layout(width)?;
    PureState::basis(layout, &BasisState::spins(&vec![Spin::Up; width]))
}

/// Tally basis `|T_t⟩ = (1/√(N+1)) Σ_m e^{i t m θ} |branch m⟩`, `t = 0..N`,
/// on a ballot layout (tally mode first, then the voting modes).
pub fn tally_basis(params: &BallotParams, layout: &ModeLayout) -> Result<Vec<(usize, PureState)>> {
    let layout = Arc::new(layout.clone());
    branch_structure(params.n, &layout)?;
    let theta = params.delta();
    (0..=params.n)
        .map(|t| phased_ballot_state(params.n, Arc::clone(&layout), |m| (t * m) as f64 * theta).map(|s| (t, s)))
        .collect()
}

pub fn tally_measurement_basis(params: &BallotParams, layout: &ModeLayout) -> Result<MeasurementBasis> {
    MeasurementBasis::new(
        tally_basis(params, layout)?
            .into_iter()
            .map(|(t, s)| (t.to_string(), s))
            .collect(),
    )
}

/// Tally operator `Σ_t t |T_t⟩⟨T_t|`; the complement of the ballot subspace
/// carries eigenvalue 0.
pub fn tally_observable(params: &BallotParams, layout: &ModeLayout) -> Result<Observable> {
    Observable::new(
        tally_basis(params, layout)?
            .into_iter()
            .map(|(t, s)| (t as f64, t.to_string(), s))
            .collect(),
    )
}

/// Which factor of the two-mode phase-state decomposition to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSide {
    /// `(1/√(N+1)) Σ_n e^{−inθ} |N−n⟩` on the tally mode.
    Tally,
    /// `(1/√(N+1)) Σ_n e^{inθ} |n⟩` on the voting mode.
    Voter,
}

/// Single-mode phase state with cutoff `N`, on site `T` or `V`.
pub fn single_mode_phase_state(n: usize, theta: f64, side: PhaseSide) -> Result<PureState> {
    let (label, sign) = match side {
        PhaseSide::Tally => (TALLY_SITE, -1.0),
        PhaseSide::Voter => (SURVEY_VOTER_SITE, 1.0),
    };
    let layout = ModeLayout::modes(&[(label, n)])?;
    let terms: Vec<(Complex64, BasisState)> = (0..=n)
        .map(|m| {
            let occ = if side == PhaseSide::Tally { n - m } else { m };
            (
                Complex64::from_polar(1.0, sign * m as f64 * theta),
                BasisState::modes(&[occ]),
            )
        })
        .collect();
    PureState::superpose(layout, &terms)
}

/// Grid angle `θ_j = 2πj/(N+1)`.
pub fn phase_grid_angle(n: usize, j: usize) -> f64 {
    2.0 * PI * j as f64 / (n + 1) as f64
}

/// Discrete phase basis `{|φ(θ_j)⟩ : j = 0..N}` of a mode with cutoff `N`,
/// as a local measurement on `site`. Outcome labels are the grid indices.
pub fn phase_measurement_basis(site: &str, n: usize) -> LocalBasis {
    let r = 1.0 / ((n + 1) as f64).sqrt();
    let outcomes = (0..=n)
        .map(|j| {
            let theta = phase_grid_angle(n, j);
            let v = (0..=n).map(|m| Complex64::from_polar(r, m as f64 * theta)).collect();
            (j.to_string(), v)
        })
        .collect();
    LocalBasis::new(site, outcomes).expect("discrete phase states are orthonormal")
}

/// Basis `{same, different}` for the comparative ballot.
pub fn comparative_basis() -> MeasurementBasis {
    MeasurementBasis::new(vec![
        ("same".to_string(), comparative_state()),
        ("different".to_string(), comparative_flipped_state()),
    ])
    .expect("orthonormal pair")
}

/// Complete orthonormal basis of a qutrit register whose first two elements
/// are the yes and no vote states, labelled `yes` and `no`. The remaining
/// vectors are labelled `other-<i>`.
pub fn vote_check_basis(width: usize) -> Result<MeasurementBasis> {
    let yes = qutrit_vote_state(Vote::Yes, width)?;
    let no = qutrit_vote_state(Vote::No, width)?;
    let layout = yes.shared_layout();
    let mut vectors = vec![yes.clone(), no.clone()];
    // Gram–Schmidt over the computational basis.
    for i in 0..layout.dim() {
        let mut v = PureState::basis(Arc::clone(&layout), &layout.basis_state(i))?;
        for u in &vectors {
            let c = u.inner(&v)?;
            let amps = v
                .amplitudes()
                .iter()
                .zip(u.amplitudes())
                .map(|(a, b)| a - c * b)
                .collect();
            v = PureState::from_amplitudes(Arc::clone(&layout), amps)?;
        }
        if v.norm() > 1e-6 {
            vectors.push(v.normalized()?);
        }
    }
    let labelled = vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let label = match i {
                0 => "yes".to_string(),
                1 => "no".to_string(),
                _ => format!("other-{}", i - 2),
            };
            (label, v)
        })
        .collect();
    MeasurementBasis::new(labelled)
}
