use glam::DVec3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub shift: usize,
    pub reversed: bool,
    pub score: f64,
}

/// Index into `next` of position `j` after orientation `reversed` and shift `s`.
///
/// The reversed ring is `q'_k = q_{(m-k) mod m}`; position `j` then reads `q'_{(j+s) mod m}`.
#[inline]
pub fn source_index(j: usize, shift: usize, reversed: bool, m: usize) -> usize {
    let k = (j + shift) % m;
    if reversed {
        (m - k) % m
    } else {
        k
    }
}

/// `Σ_j ‖next'_{(j+s) mod m} - prev_j‖` for one candidate.
pub fn alignment_score(prev: &[DVec3], next: &[DVec3], shift: usize, reversed: bool) -> f64 {
    let m = prev.len();
    (0..m)
        .map(|j| next[source_index(j, shift, reversed, m)].distance(prev[j]))
        .sum()
}

/// Exhaustive search over all `2m` (shift, orientation) candidates. Ties go to the
/// smallest shift, then to the unreversed orientation.
pub fn align_rings(prev: &[DVec3], next: &[DVec3]) -> Result<Alignment> {
    let m = prev.len();
    if next.len() != m {
        return Err(Error::arg(format!(
            "ring sizes differ: {m} and {}",
            next.len()
        )));
    }
    if m == 0 {
        return Err(Error::arg("rings are empty"));
    }
    let mut best = Alignment {
        shift: 0,
        reversed: false,
        score: f64::INFINITY,
    };
    for shift in 0..m {
        for reversed in [false, true] {
            let score = alignment_score(prev, next, shift, reversed);
            if score < best.score {
                best = Alignment {
                    shift,
                    reversed,
                    score,
                };
            }
        }
    }
    Ok(best)
}

/// `next` reordered so that position `j` holds the point matched to `prev_j`.
pub fn apply_alignment(next: &[DVec3], a: &Alignment) -> Vec<DVec3> {
    let m = next.len();
    (0..m)
        .map(|j| next[source_index(j, a.shift, a.reversed, m)])
        .collect()
}
