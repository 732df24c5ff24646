//! Gap-based root selection.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RootDecision {
    /// Action with the smallest upper bound on its gap.
    pub best: usize,
    /// Most optimistic action other than `best`.
    pub challenger: usize,
    /// Whichever of the two has the wider interval.
    pub selected: usize,
    /// `U(challenger) - L(best)`.
    pub stop_stat: f64,
}

/// Ties are broken towards the lowest action index.
pub fn root_decision(upper: &[f64], lower: &[f64]) -> Result<RootDecision> {
    let k = upper.len();
    if k < 2 || lower.len() != k {
        return Err(Error::Precondition("root decision needs at least two actions with both bounds"));
    }
    let (mut first, mut second) = (0usize, usize::MAX);
    for a in 1..k {
        if upper[a] > upper[first] {
            second = first;
            first = a;
        } else if second == usize::MAX || upper[a] > upper[second] {
            second = a;
        }
    }
    let mut best = 0;
    let mut best_index = f64::INFINITY;
    for b in 0..k {
        let rival = if b == first { upper[second] } else { upper[first] };
        let index = rival - lower[b];
        if index < best_index {
            best_index = index;
            best = b;
        }
    }
    let challenger = if best == first { second } else { first };
    let width_b = upper[best] - lower[best];
    let width_c = upper[challenger] - lower[challenger];
    let selected = if width_b > width_c || (width_b == width_c && best < challenger) { best } else { challenger };
    Ok(RootDecision { best, challenger, selected, stop_stat: upper[challenger] - lower[best] })
}
