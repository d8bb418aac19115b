//! Dining-cryptographers broadcast: the classical baseline.
//!
//! Every unordered pair of diners shares a one-bit pad. Each diner announces
//! the parity of all pads they hold, flipped if they paid. The announcements
//! sum to 1 mod 2 exactly when someone paid.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{run_trials, total_variation, total_variation_sigma, Z_SCORE};

/// Largest table for which [`anonymity_exhaustive_check`] enumerates every
/// pad assignment (`2^15` assignments at 6 diners).
pub const EXHAUSTIVE_MAX_DINERS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcRound {
    pub n_diners: usize,
    /// Pad shared by diners `i < j`, keyed `(i, j)`.
    #[serde(with = "pad_map")]
    pub pads: BTreeMap<(usize, usize), bool>,
    pub payer: Option<usize>,
    pub announcements: Vec<bool>,
}

mod pad_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(pads: &BTreeMap<(usize, usize), bool>, s: S) -> Result<S::Ok, S::Error> {
        pads.iter()
            .map(|(&(i, j), &bit)| (format!("{i}-{j}"), bit))
            .collect::<BTreeMap<_, _>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, usize), bool>, D::Error> {
        let raw = BTreeMap::<String, bool>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, bit)| {
                let (i, j) = k
                    .split_once('-')
                    .and_then(|(i, j)| Some((i.parse().ok()?, j.parse().ok()?)))
                    .ok_or_else(|| serde::de::Error::custom(format!("bad pad key `{k}`")))?;
                Ok(((i, j), bit))
            })
            .collect()
    }
}

impl DcRound {
    /// Parity of all announcements.
    pub fn broadcast(&self) -> bool {
        self.announcements.iter().fold(false, |acc, &b| acc ^ b)
    }

    /// Pads held by `diner`, in partner order.
    pub fn pads_of(&self, diner: usize) -> Vec<bool> {
        (0..self.n_diners)
            .filter(|&j| j != diner)
            .map(|j| self.pads[&pair(diner, j)])
            .collect()
    }
}

pub enum PadSource<'a, R: Rng + ?Sized> {
    Random(&'a mut R),
    /// Pads in the order `(0,1), (0,2), …, (0,n−1), (1,2), …`.
    Explicit(&'a [bool]),
}

fn pair(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

pub fn pad_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn check_table(n: usize, payer: Option<usize>) -> Result<()> {
    if n < 3 {
        return Err(Error::protocol(format!(
            "a dining-cryptographers round needs at least 3 diners, got {n}"
        )));
    }
    if let Some(p) = payer.filter(|&p| p >= n) {
        return Err(Error::protocol(format!("payer {p} is not one of the {n} diners")));
    }
    Ok(())
}

pub fn run_round<R: Rng + ?Sized>(n_diners: usize, payer: Option<usize>, pads: PadSource<'_, R>) -> Result<DcRound> {
    check_table(n_diners, payer)?;
    let n_pads = n_diners * (n_diners - 1) / 2;
    let bits: Vec<bool> = match pads {
        PadSource::Random(rng) => (0..n_pads).map(|_| rng.random()).collect(),
        PadSource::Explicit(bits) => {
            if bits.len() != n_pads {
                return Err(Error::protocol(format!(
                    "{n_diners} diners need {n_pads} pads, got {}",
                    bits.len()
                )));
            }
            bits.to_vec()
        }
    };
    let pads: BTreeMap<(usize, usize), bool> = pad_pairs(n_diners).zip(bits).collect();
    let announcements = (0..n_diners)
        .map(|i| {
            let parity = (0..n_diners)
                .filter(|&j| j != i)
                .fold(false, |acc, j| acc ^ pads[&pair(i, j)]);
            parity ^ (payer == Some(i))
        })
        .collect();
    Ok(DcRound {
        n_diners,
        pads,
        payer,
        announcements,
    })
}

/// What `observer` sees: their own pads followed by every announcement,
/// packed into an integer.
fn view_key(round: &DcRound, observer: usize) -> u64 {
    round
        .pads_of(observer)
        .into_iter()
        .chain(round.announcements.iter().copied())
        .fold(0u64, |acc, b| (acc << 1) | b as u64)
}

/// Exact distribution (as counts over all pad assignments) of `observer`'s
/// view when `payer` paid.
pub fn view_distribution(n: usize, observer: usize, payer: Option<usize>) -> Result<BTreeMap<u64, u64>> {
    check_table(n, payer)?;
    if n > EXHAUSTIVE_MAX_DINERS {
        return Err(Error::protocol(format!(
            "exhaustive enumeration is limited to {EXHAUSTIVE_MAX_DINERS} diners"
        )));
    }
    let n_pads = n * (n - 1) / 2;
    let mut counts = BTreeMap::new();
    for mask in 0u64..1 << n_pads {
        let bits: Vec<bool> = (0..n_pads).map(|b| mask >> b & 1 == 1).collect();
        let round = run_round::<rand_chacha::ChaCha8Rng>(n, payer, PadSource::Explicit(&bits))?;
        *counts.entry(view_key(&round, observer)).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Enumerates every pad assignment and payer and checks that the broadcast
/// is correct and that each diner's view is identical whichever other diner
/// paid.
pub fn anonymity_exhaustive_check(n: usize) -> Result<bool> {
    for observer in 0..n {
        let mut reference: Option<BTreeMap<u64, u64>> = None;
        for payer in (0..n).filter(|&p| p != observer) {
            let dist = view_distribution(n, observer, Some(payer))?;
            match &reference {
                None => reference = Some(dist),
                Some(r) if *r != dist => return Ok(false),
                Some(_) => {}
            }
        }
    }
    let n_pads = n * (n - 1) / 2;
    for payer in std::iter::once(None).chain((0..n).map(Some)) {
        for mask in 0u64..1 << n_pads {
            let bits: Vec<bool> = (0..n_pads).map(|b| mask >> b & 1 == 1).collect();
            let round = run_round::<rand_chacha::ChaCha8Rng>(n, payer, PadSource::Explicit(&bits))?;
            if round.broadcast() != payer.is_some() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledAnonymity {
    pub n_diners: usize,
    pub observer: usize,
    pub payers: (usize, usize),
    pub trials_per_payer: u64,
    pub total_variation: f64,
    pub sigma: f64,
    pub within_z_sigma: bool,
    /// Rounds whose broadcast parity disagreed with the payer indicator.
    pub broadcast_errors: u64,
}

/// Monte Carlo comparison of `observer`'s view when diner `payers.0` pays
/// versus `payers.1`.
pub fn sampled_anonymity(
    n: usize,
    observer: usize,
    payers: (usize, usize),
    trials_per_payer: u64,
    seed: u64,
) -> Result<SampledAnonymity> {
    check_table(n, Some(payers.0))?;
    check_table(n, Some(payers.1))?;
    if observer >= n || observer == payers.0 || observer == payers.1 {
        return Err(Error::protocol("observer must be a diner other than the payers"));
    }
    if trials_per_payer == 0 {
        return Err(Error::protocol("at least one trial is required"));
    }
    let views = |payer: usize, stream: u64| -> Result<Vec<u64>> {
        run_trials(seed ^ stream, trials_per_payer, |_, rng| {
            run_round(n, Some(payer), PadSource::Random(rng)).map(|r| (view_key(&r, observer), r.broadcast()))
        })
        .into_iter()
        .map(|r| r.map(|(key, parity)| if parity { key } else { u64::MAX }))
        .collect()
    };
    let a = views(payers.0, 0)?;
    let b = views(payers.1, 0x5555_5555_5555_5555)?;
    let broadcast_errors = a.iter().chain(&b).filter(|&&k| k == u64::MAX).count() as u64;
    let width = 1usize << (2 * n - 1);
    let histogram = |keys: &[u64]| {
        let mut h = vec![0u64; width];
        for &k in keys.iter().filter(|&&k| k != u64::MAX) {
            h[k as usize] += 1;
        }
        h
    };
    let (ha, hb) = (histogram(&a), histogram(&b));
    let freq = |h: &[u64]| {
        h.iter()
            .map(|&c| c as f64 / trials_per_payer as f64)
            .collect::<Vec<_>>()
    };
    let tv = total_variation(&freq(&ha), &freq(&hb));
    let sigma = total_variation_sigma(&ha, &hb);
    Ok(SampledAnonymity {
        n_diners: n,
        observer,
        payers,
        trials_per_payer,
        total_variation: tv,
        sigma,
        within_z_sigma: tv < Z_SCORE * sigma,
        broadcast_errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadComplexity {
    pub voters: usize,
    /// One pad per pair of voters.
    pub classical_pads: usize,
    pub classical_pads_per_voter: usize,
    pub quantum_states_per_voter: usize,
}

pub fn pad_complexity(voters: usize) -> Result<PadComplexity> {
    if voters < 2 {
        return Err(Error::protocol(format!(
            "pad counting needs at least 2 voters, got {voters}"
        )));
    }
    Ok(PadComplexity {
        voters,
        classical_pads: voters * (voters - 1) / 2,
        classical_pads_per_voter: voters - 1,
        quantum_states_per_voter: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type Rng8 = ChaCha8Rng;

    #[test]
    fn explicit_rounds() {
        let r = run_round::<Rng8>(3, Some(0), PadSource::Explicit(&[false; 3])).unwrap();
        assert_eq!(r.announcements, vec![true, false, false]);
        assert!(r.broadcast());
        // Pad order (0,1), (0,2), (1,2): AB = 1, CA = 1, BC = 0, with B = 1 paying.
        let r = run_round::<Rng8>(3, Some(1), PadSource::Explicit(&[true, true, false])).unwrap();
        // A: AB ^ AC = 0; B: AB ^ BC ^ 1 = 0; C: AC ^ BC = 1.
        assert_eq!(r.announcements, vec![false, false, true]);
        assert!(r.broadcast());
    }

    #[test]
    fn no_payer_sums_to_zero() {
        let mut rng = Rng8::seed_from_u64(5);
        for n in 3..=8 {
            let r = run_round(n, None, PadSource::Random(&mut rng)).unwrap();
            assert_eq!(r.pads.len(), n * (n - 1) / 2);
            assert!(!r.broadcast());
        }
    }

    #[test]
    fn rejects_small_tables() {
        assert!(run_round::<Rng8>(2, None, PadSource::Explicit(&[false])).is_err());
        assert!(run_round::<Rng8>(3, Some(3), PadSource::Explicit(&[false; 3])).is_err());
        assert!(run_round::<Rng8>(3, None, PadSource::Explicit(&[false; 2])).is_err());
    }

    #[test]
    fn exhaustive_and_sampled_anonymity() {
        assert!(anonymity_exhaustive_check(3).unwrap());
        assert!(anonymity_exhaustive_check(4).unwrap());
        let s = sampled_anonymity(4, 0, (1, 2), 4000, 11).unwrap();
        assert_eq!(s.broadcast_errors, 0);
        assert!(s.within_z_sigma, "{s:?}");
    }

    #[test]
    fn payer_recognises_own_payment() {
        // The payer's view differs from a non-payer's: they know their own
        // flip, so their views under "I paid" and "someone else paid" differ.
        let mine = view_distribution(3, 0, Some(0)).unwrap();
        let other = view_distribution(3, 0, Some(1)).unwrap();
        assert_ne!(mine, other);
    }

    #[test]
    fn complexity() {
        assert_eq!(pad_complexity(2).unwrap().classical_pads, 1);
        let c = pad_complexity(10).unwrap();
        assert_eq!((c.classical_pads, c.quantum_states_per_voter), (45, 1));
        assert_eq!(c.classical_pads_per_voter, 9);
        assert!(pad_complexity(1).is_err());
    }

    #[test]
    fn round_serde() {
        let r = run_round::<Rng8>(3, Some(1), PadSource::Explicit(&[true, false, true])).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: DcRound = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
