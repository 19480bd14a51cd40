//! Seeded stratified k-fold splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, GraphDataset};

/// One train/validation partition out of k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train_ids: Vec<usize>,
    pub validation_ids: Vec<usize>,
}

/// Splits `ds` into `k` folds stratified by graph label. Class members are
/// shuffled with a seeded generator and dealt round-robin, continuing the
/// fold pointer across classes so overall fold sizes differ by at most one.
pub fn stratified_kfold(
    ds: &GraphDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<FoldSplit>, DataError> {
    if k < 2 {
        return Err(DataError::BadFoldCount { k });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_graph_classes()];
    for (i, label) in ds.graph_labels().enumerate() {
        by_class[label].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(DataError::ClassTooSmall {
                class,
                members: members.len(),
                k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut validation: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut fold = 0usize;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &id in members.iter() {
            validation[fold].push(id);
            fold = (fold + 1) % k;
        }
    }
    Ok(validation
        .into_iter()
        .enumerate()
        .map(|(fold_index, mut validation_ids)| {
            validation_ids.sort_unstable();
            let train_ids = (0..ds.len())
                .filter(|i| validation_ids.binary_search(i).is_err())
                .collect();
            FoldSplit {
                fold_index,
                train_ids,
                validation_ids,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_toy_dataset, ToyClassSpec, ToySpec};

    fn dataset(per_class: usize) -> GraphDataset {
        generate_toy_dataset(
            &ToySpec {
                graphs_per_class: per_class,
                classes: vec![
                    ToyClassSpec { node_counts: vec![2, 2] },
                    ToyClassSpec { node_counts: vec![1, 3] },
                ],
                extra_edge_prob: 0.2,
            },
            7,
        )
        .unwrap()
    }

    #[test]
    fn folds_partition_exactly() {
        let ds = dataset(13);
        let folds = stratified_kfold(&ds, 5, 3).unwrap();
        let mut seen = vec![0usize; ds.len()];
        for f in &folds {
            for &id in &f.validation_ids {
                seen[id] += 1;
                assert!(f.train_ids.binary_search(&id).is_err());
            }
            assert_eq!(f.train_ids.len() + f.validation_ids.len(), ds.len());
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn balanced_classes_balanced_folds() {
        let ds = dataset(5);
        let folds = stratified_kfold(&ds, 5, 0).unwrap();
        for f in &folds {
            assert_eq!(f.validation_ids.len(), 2);
            let class1 = f
                .validation_ids
                .iter()
                .filter(|&&id| ds.graph(id).graph_label() == 1)
                .count();
            assert_eq!(class1, 1);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let ds = dataset(9);
        assert_eq!(
            stratified_kfold(&ds, 4, 42).unwrap(),
            stratified_kfold(&ds, 4, 42).unwrap()
        );
        assert_ne!(
            stratified_kfold(&ds, 4, 42).unwrap(),
            stratified_kfold(&ds, 4, 43).unwrap()
        );
    }

    #[test]
    fn small_class_rejected() {
        let ds = dataset(3);
        assert!(matches!(
            stratified_kfold(&ds, 4, 0),
            Err(DataError::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn fold_sizes_differ_by_at_most_one() {
        // 2 classes x 13 = 26 graphs over 4 folds: sizes 7/7/6/6.
        let ds = dataset(13);
        let folds = stratified_kfold(&ds, 4, 1).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(|f| f.validation_ids.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![6, 6, 7, 7]);
    }
}
