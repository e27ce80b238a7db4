// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PezResult {
    pub epsilon: f64,
    pub max_accuracy: f64,
    pub threshold: f64,
    /// Layers with accuracy at least `max − ε`, ascending.
    pub pez_layers: Vec<i32>,
    /// Best `k` PEZ layers by accuracy, ties to the lower layer.
    pub top_k: Vec<i32>,
}

/// Near-peak layer set from `(layer, accuracy)` pairs.
pub fn find_pez(accuracies: &[(i32, f64)], epsilon: f64, k: usize) -> Result<PezResult> {
    if accuracies.is_empty() {
        return Err(Error::Invalid("no layer accuracies".into()));
    }
    if let Some((l, a)) = accuracies.iter().find(|(_, a)| !a.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("accuracy {a} at layer {l}"),
        });
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let max_accuracy = accuracies.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let threshold = max_accuracy - epsilon;
    let mut members: Vec<(i32, f64)> = accuracies.iter().copied().filter(|p| p.1 >= threshold).collect();
    members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let top_k = members.iter().take(k).map(|p| p.0).collect();
    let mut pez_layers: Vec<i32> = members.iter().map(|p| p.0).collect();
    pez_layers.sort_unstable();
    pez_layers.dedup();
    Ok(PezResult {
        epsilon,
        max_accuracy,
        threshold,
        pez_layers,
        top_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_accuracies_all_in_zone() {
        let acc: Vec<(i32, f64)> = (0..6).map(|l| (l, 0.8)).collect();
        let r = find_pez(&acc, 0.05, 3).unwrap();
        assert_eq!(r.pez_layers, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(r.top_k, vec![0, 1, 2]);
    }

    #[test]
    fn single_layer() {
        let r = find_pez(&[(4, 0.6)], 0.05, 3).unwrap();
        assert_eq!(r.pez_layers, vec![4]);
        assert_eq!(r.top_k, vec![4]);
    }

    #[test]
    fn empty_rejected() {
        assert!(find_pez(&[], 0.05, 3).is_err());
    }
}
