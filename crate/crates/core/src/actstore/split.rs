// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{Block, Plausibility, Split, VideoMeta};
use crate::error::{Error, Result};
use crate::util::rng_for;

/// Smallest stratum that can be split.
pub const MIN_STRATUM: usize = 5;

/// Assigns train/val/test jointly stratified over (plausibility, block).
///
/// Within every stratum the split counts are the largest-remainder rounding
/// of `fraction × stratum size`, so each count is within one video of its
/// target. Membership is a seeded shuffle of the stratum.
pub fn split_indices(videos: &[VideoMeta], fractions: [f64; 3], seed: u64) -> Result<Vec<Split>> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::Config(format!("invalid split fractions {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions must sum to 1, got {total}")));
    }

    let mut strata: BTreeMap<(Plausibility, Block), Vec<usize>> = BTreeMap::new();
    for (i, v) in videos.iter().enumerate() {
        strata.entry((v.plausibility, v.block)).or_default().push(i);
    }

    let mut out = vec![Split::Train; videos.len()];
    for ((plaus, block), mut members) in strata {
        if members.len() < MIN_STRATUM {
            return Err(Error::Stratify(format!(
                "stratum ({}, {block}) has {} videos, need at least {MIN_STRATUM}",
                plaus.label(),
                members.len()
            )));
        }
        let counts = largest_remainder(members.len(), fractions);
        let mut rng = rng_for(seed, &format!("split/{}/{block}", plaus.label()));
        members.shuffle(&mut rng);
        let mut it = members.into_iter();
        for (split, count) in [Split::Train, Split::Val, Split::Test].into_iter().zip(counts) {
            for idx in it.by_ref().take(count) {
                out[idx] = split;
            }
        }
    }
    Ok(out)
}

fn largest_remainder(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let targets = fractions.map(|f| f * n as f64);
    let mut counts = targets.map(|t| (t + 1e-9).floor() as usize);
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    // stable: ties go to the earlier split
    order.sort_by(|&a, &b| {
        let ra = targets[a] - counts[a] as f64;
        let rb = targets[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actstore::Motion;

    fn videos(per_stratum: usize) -> Vec<VideoMeta> {
        let mut out = Vec::new();
        for block in Block::ALL {
            for plaus in [Plausibility::Possible, Plausibility::Impossible] {
                for i in 0..per_stratum {
                    out.push(VideoMeta {
                        id: format!("{block}-{}-{i}", plaus.label()),
                        plausibility: plaus,
                        block,
                        motion: if i % 2 == 0 { Motion::Left } else { Motion::Right },
                        split: Split::Train,
                    });
                }
            }
        }
        out
    }

    fn count(splits: &[Split], which: Split) -> usize {
        splits.iter().filter(|s| **s == which).count()
    }

    #[test]
    fn reference_dataset_splits_216_72_72() {
        let v = videos(60);
        let s = split_indices(&v, [0.6, 0.2, 0.2], 11).unwrap();
        assert_eq!(count(&s, Split::Train), 216);
        assert_eq!(count(&s, Split::Val), 72);
        assert_eq!(count(&s, Split::Test), 72);
    }

    #[test]
    fn single_stratum_all_train() {
        let v: Vec<_> = videos(9).into_iter().take(9).collect();
        let s = split_indices(&v, [1.0, 0.0, 0.0], 1).unwrap();
        assert!(s.iter().all(|x| *x == Split::Train));
    }

    #[test]
    fn seeds_change_membership_not_counts() {
        let v = videos(60);
        let a = split_indices(&v, [0.6, 0.2, 0.2], 1).unwrap();
        let b = split_indices(&v, [0.6, 0.2, 0.2], 2).unwrap();
        assert_ne!(a, b);
        for block in Block::ALL {
            for plaus in [Plausibility::Possible, Plausibility::Impossible] {
                for which in [Split::Train, Split::Val, Split::Test] {
                    let c = |s: &[Split]| {
                        v.iter()
                            .zip(s)
                            .filter(|(m, x)| m.block == block && m.plausibility == plaus && **x == which)
                            .count()
                    };
                    assert_eq!(c(&a), c(&b));
                }
            }
        }
        assert_eq!(a, split_indices(&v, [0.6, 0.2, 0.2], 1).unwrap());
    }

    #[test]
    fn small_stratum_is_an_error() {
        let v = videos(4);
        assert!(matches!(split_indices(&v, [0.6, 0.2, 0.2], 0), Err(Error::Stratify(_))));
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let v = videos(10);
        assert!(split_indices(&v, [0.5, 0.2, 0.2], 0).is_err());
    }

    #[test]
    fn uneven_strata_stay_within_one_video() {
        let v = videos(13);
        let s = split_indices(&v, [0.6, 0.2, 0.2], 5).unwrap();
        for block in Block::ALL {
            for plaus in [Plausibility::Possible, Plausibility::Impossible] {
                for (which, f) in [(Split::Train, 0.6), (Split::Val, 0.2), (Split::Test, 0.2)] {
                    let c = v
                        .iter()
                        .zip(&s)
                        .filter(|(m, x)| m.block == block && m.plausibility == plaus && **x == which)
                        .count();
                    assert!((c as f64 - f * 13.0).abs() <= 1.0);
                }
            }
        }
    }
}
