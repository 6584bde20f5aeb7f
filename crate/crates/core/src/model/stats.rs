//! Label distributions and annotation lead-time summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{PhaseState, PhaseTriple};

/// Counts and hierarchical probabilities of a sequence of phase triples.
/// Conditionals with an empty denominator are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    pub n: usize,
    pub n_match: usize,
    pub n_active: usize,
    pub n_standing: usize,
    pub p_match: f64,
    pub p_active_given_match: Option<f64>,
    pub p_standing_given_active: Option<f64>,
    /// Standing conditioned on the grandparent instead of the parent.
    pub p_standing_given_match: Option<f64>,
}

pub fn conditional_distribution(triples: &[PhaseTriple]) -> Result<ConditionalDistribution> {
    if triples.is_empty() {
        return Err(Error::Empty("no phase labels"));
    }
    let count = |f: fn(&PhaseTriple) -> bool| triples.iter().filter(|t| f(t)).count();
    let n = triples.len();
    let n_match = count(PhaseTriple::is_match);
    let n_active = count(PhaseTriple::is_active);
    let n_standing = count(PhaseTriple::is_standing);
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok(ConditionalDistribution {
        n,
        n_match,
        n_active,
        n_standing,
        p_match: n_match as f64 / n as f64,
        p_active_given_match: ratio(n_active, n_match),
        p_standing_given_active: ratio(n_standing, n_active),
        p_standing_given_match: ratio(n_standing, n_match),
    })
}

/// Expands per-state counts, in [`PhaseState::ALL`] order, into a flat
/// sequence of triples.
pub fn expand_state_counts(counts: [usize; 4]) -> Vec<PhaseTriple> {
    PhaseState::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&s, c)| std::iter::repeat_n(PhaseTriple::from_state(s), c))
        .collect()
}

/// Mean and 95% normal-approximation half width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
}

/// `mean ± 1.96 · s / sqrt(n)` with the sample standard deviation.
pub fn lead_time_ci(durations: &[f64]) -> Result<MeanCi> {
    let n = durations.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, actual: n });
    }
    let mean = durations.iter().sum::<f64>() / n as f64;
    let var = durations.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(MeanCi {
        mean,
        half_width: 1.96 * var.sqrt() / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_label_counts() {
        // no match, paused, standing, ground
        let ts = expand_state_counts([132, 155, 106, 177]);
        let d = conditional_distribution(&ts).unwrap();
        assert_eq!(d.n, 570);
        assert_eq!((d.n_match, d.n_active, d.n_standing), (438, 283, 106));
        assert!((d.p_match - 0.768).abs() < 1e-3);
        assert!((d.p_active_given_match.unwrap() - 0.646).abs() < 1e-3);
        assert!((d.p_standing_given_active.unwrap() - 0.375).abs() < 1e-3);
        assert!((d.p_standing_given_match.unwrap() - 0.242).abs() < 1e-3);
    }

    #[test]
    fn all_outside_match() {
        let d = conditional_distribution(&[PhaseTriple::NO_MATCH; 5]).unwrap();
        assert_eq!(d.p_match, 0.0);
        assert_eq!(d.p_active_given_match, None);
        assert_eq!(d.p_standing_given_active, None);
        assert!(conditional_distribution(&[]).is_err());
    }

    #[test]
    fn ci_examples() {
        assert_eq!(
            lead_time_ci(&[10.0, 10.0, 10.0]).unwrap(),
            MeanCi {
                mean: 10.0,
                half_width: 0.0
            }
        );
        let ci = lead_time_ci(&[8.0, 12.0]).unwrap();
        assert_eq!(ci.mean, 10.0);
        assert!((ci.half_width - 1.96 * 8f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
        assert!((ci.half_width - 3.92).abs() < 1e-12);
        let flat = lead_time_ci(&[9.66; 100]).unwrap();
        assert!((flat.mean - 9.66).abs() < 1e-12);
        assert!(flat.half_width < 1e-12);
        assert!(lead_time_ci(&[1.0]).is_err());
    }
}
