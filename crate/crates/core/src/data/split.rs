use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::window::WindowedDataset;

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Sample indices of each split, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: WindowedDataset,
    pub validation: WindowedDataset,
    pub test: WindowedDataset,
}

impl Splits {
    pub fn from_indices(ds: &WindowedDataset, idx: &SplitIndices) -> Result<Self> {
        Ok(Self {
            train: ds.subset(&idx.train)?,
            validation: ds.subset(&idx.validation)?,
            test: ds.subset(&idx.test)?,
        })
    }
}

/// Largest-remainder allocation of `n` items over `ratios`; ties go to the
/// earlier split.
fn allocate(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| n as f64 * r);
    let mut counts = exact.map(|e| e.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>().min(n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Per-class seeded shuffle followed by proportional allocation, so every
/// split keeps each class count within one of its proportional share.
pub fn stratified_split(labels: &[u8], ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::invalid(format!("split ratios {ratios:?} must be positive")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios sum to {total}, not 1")));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("label {bad} is not 0 or 1")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitIndices {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for class in 0..=1u8 {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < ratios.len() {
            return Err(Error::Stratification(format!(
                "class {class} has {} samples, fewer than the {} splits",
                members.len(),
                ratios.len()
            )));
        }
        members.shuffle(&mut rng);
        let [n_train, n_val, _] = allocate(members.len(), &ratios);
        out.train.extend_from_slice(&members[..n_train]);
        out.validation
            .extend_from_slice(&members[n_train..n_train + n_val]);
        out.test.extend_from_slice(&members[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn balanced(n0: usize, n1: usize) -> Vec<u8> {
        let mut v = vec![0u8; n0];
        v.extend(vec![1u8; n1]);
        v
    }

    fn positives(labels: &[u8], idx: &[usize]) -> usize {
        idx.iter().filter(|&&i| labels[i] == 1).count()
    }

    #[test]
    fn exact_division() {
        let labels = balanced(50, 50);
        let s = stratified_split(&labels, DEFAULT_RATIOS, 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 10, 10));
        assert_eq!(positives(&labels, &s.train), 40);
        assert_eq!(positives(&labels, &s.validation), 5);
        assert_eq!(positives(&labels, &s.test), 5);
    }

    #[test]
    fn deterministic_membership() {
        let labels = balanced(30, 44);
        assert_eq!(
            stratified_split(&labels, DEFAULT_RATIOS, 3).unwrap(),
            stratified_split(&labels, DEFAULT_RATIOS, 3).unwrap()
        );
        assert_ne!(
            stratified_split(&labels, DEFAULT_RATIOS, 3).unwrap(),
            stratified_split(&labels, DEFAULT_RATIOS, 4).unwrap()
        );
    }

    #[test]
    fn odd_counts_stay_proportional() {
        let labels = balanced(50, 51);
        let s = stratified_split(&labels, DEFAULT_RATIOS, 1).unwrap();
        for (idx, r) in [(&s.train, 0.8), (&s.validation, 0.1), (&s.test, 0.1)] {
            let pos = positives(&labels, idx) as f64;
            let neg = (idx.len() - positives(&labels, idx)) as f64;
            assert!((pos - 51.0 * r).abs() <= 1.0);
            assert!((neg - 50.0 * r).abs() <= 1.0);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            stratified_split(&balanced(2, 10), DEFAULT_RATIOS, 0),
            Err(Error::Stratification(_))
        ));
        assert!(stratified_split(&balanced(5, 5), [0.5, 0.5, 0.0], 0).is_err());
        assert!(stratified_split(&balanced(5, 5), [0.5, 0.3, 0.3], 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(
            n0 in 3usize..200, n1 in 3usize..200,
            a in 1u32..20, b in 1u32..20, c in 1u32..20,
            seed in any::<u64>(),
        ) {
            let t = f64::from(a + b + c);
            let ratios = [f64::from(a) / t, f64::from(b) / t, 1.0 - f64::from(a) / t - f64::from(b) / t];
            let labels = balanced(n0, n1);
            let s = stratified_split(&labels, ratios, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for (idx, r) in [(&s.train, ratios[0]), (&s.validation, ratios[1]), (&s.test, ratios[2])] {
                let pos = positives(&labels, idx) as f64;
                let neg = idx.len() as f64 - pos;
                prop_assert!((pos - n1 as f64 * r).abs() <= 1.0);
                prop_assert!((neg - n0 as f64 * r).abs() <= 1.0);
            }
        }
    }
}
