use rand::seq::SliceRandom;

use super::{ClientDataset, Dataset};
use crate::error::{Error, Result};
use crate::rng;

/// Label-sorted shard partitioning: sort rows by label, cut them into
/// `num_clients · shards_per_client` contiguous shards (sizes differ by at
/// most one), and deal shuffled shards to clients.
pub fn shard_partition(
    dataset: &Dataset,
    num_clients: usize,
    shards_per_client: usize,
    seed: u64,
) -> Result<Vec<ClientDataset>> {
    let num_shards = num_clients * shards_per_client;
    if num_shards == 0 {
        return Err(Error::InvalidArgument(
            "need at least one client and one shard per client".into(),
        ));
    }
    if dataset.len() < num_shards {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot fill {num_shards} shards",
            dataset.len()
        )));
    }
    let mut sorted: Vec<usize> = (0..dataset.len()).collect();
    sorted.sort_by_key(|&i| (dataset.labels[i], i));

    let base = dataset.len() / num_shards;
    let extra = dataset.len() % num_shards;
    let mut shards = Vec::with_capacity(num_shards);
    let mut start = 0;
    for s in 0..num_shards {
        let len = base + usize::from(s < extra);
        shards.push(&sorted[start..start + len]);
        start += len;
    }
    let mut rng = rng::stream(seed, &[rng::TAG_PARTITION]);
    shards.shuffle(&mut rng);

    Ok(shards
        .chunks(shards_per_client)
        .enumerate()
        .map(|(client_id, own)| {
            let mut indices: Vec<usize> = own.concat();
            indices.sort_unstable();
            ClientDataset {
                client_id,
                dataset: dataset.subset(&indices),
                source_indices: indices,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticSpec};

    fn mnist_like() -> Dataset {
        gen_synthetic(
            &SyntheticSpec::clustered(4, vec![100; 10], 3.0, 1.0, 1.0, 2),
            2,
        )
        .unwrap()
    }

    #[test]
    fn is_a_partition() {
        let d = mnist_like();
        let clients = shard_partition(&d, 7, 3, 1).unwrap();
        let mut all: Vec<usize> = clients
            .iter()
            .flat_map(|c| c.source_indices.clone())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
        for c in &clients {
            for (local, &global) in c.source_indices.iter().enumerate() {
                assert_eq!(c.dataset.labels[local], d.labels[global]);
            }
        }
    }

    #[test]
    fn two_shards_each_gives_class_mismatch() {
        let clients = shard_partition(&mnist_like(), 50, 2, 9).unwrap();
        let supports: Vec<usize> = clients
            .iter()
            .map(|c| c.dataset.class_counts().iter().filter(|&&n| n > 0).count())
            .collect();
        assert!(supports.iter().all(|&s| s <= 2), "{supports:?}");
        assert!(supports.iter().filter(|&&s| s <= 3).count() >= 40);
        assert_eq!(
            clients
                .iter()
                .map(ClientDataset::total_count)
                .sum::<usize>(),
            1000
        );
    }

    #[test]
    fn single_client_holds_everything() {
        let d = mnist_like();
        let clients = shard_partition(&d, 1, 4, 3).unwrap();
        assert_eq!(clients.len(), 1);
        assert_eq!(clients[0].dataset.class_counts(), d.class_counts());
        assert_eq!(clients[0].total_count(), d.len());
    }

    #[test]
    fn too_many_shards_fail() {
        assert!(shard_partition(&mnist_like(), 600, 2, 0).is_err());
    }
}
