use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::Dataset;

/// Inclusive bounds on the number of shards a device receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardRange {
    pub min: usize,
    pub max: usize,
}

impl ShardRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::InvalidInput(format!("shard range must satisfy 1 <= min <= max, got [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Sample indices into the parent dataset, per device.
    pub device_indices: Vec<Vec<usize>>,
    /// Sample indices of every shard, in label-sorted order.
    pub shards: Vec<Vec<usize>>,
    /// Owning device of each shard; `None` for shards left unused.
    pub shard_owner: Vec<Option<usize>>,
}

impl Partition {
    pub fn num_devices(&self) -> usize {
        self.device_indices.len()
    }

    pub fn shards_of(&self, device: usize) -> usize {
        self.shard_owner.iter().filter(|o| **o == Some(device)).count()
    }
}

/// Label-sorted shard partitioning. Samples are sorted by label (stable),
/// cut into consecutive shards of `shard_size` (a short tail is dropped),
/// and each device draws a shard count uniformly from `range`. Shards are
/// then dealt in a seeded random order, device by device, holding back
/// enough shards for every later device to reach `range.min`. Shards nobody
/// asks for stay unused.
pub fn shard_partition(data: &Dataset, shard_size: usize, range: ShardRange, num_devices: usize, seed: u64) -> Result<Partition> {
    ShardRange::new(range.min, range.max)?;
    if shard_size == 0 || num_devices == 0 {
        return Err(Error::InvalidInput("shard_size and num_devices must be positive".into()));
    }
    if data.len() < shard_size {
        return Err(Error::InvalidInput(format!("{} samples cannot fill a shard of {shard_size}", data.len())));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by_key(|&i| data.labels()[i]);
    let shards: Vec<Vec<usize>> = order.chunks_exact(shard_size).map(<[usize]>::to_vec).collect();
    let needed = range.min * num_devices;
    if shards.len() < needed {
        return Err(Error::Shortfall { feasible: shards.len(), required: needed });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let demand: Vec<usize> = (0..num_devices).map(|_| rng.random_range(range.min..=range.max)).collect();
    let mut deck: Vec<usize> = (0..shards.len()).collect();
    deck.shuffle(&mut rng);

    let mut shard_owner = vec![None; shards.len()];
    let mut device_indices = vec![Vec::new(); num_devices];
    let mut next = 0;
    for (device, &want) in demand.iter().enumerate() {
        let reserved = range.min * (num_devices - device - 1);
        let take = want.min(deck.len() - next - reserved);
        for &shard in &deck[next..next + take] {
            shard_owner[shard] = Some(device);
            device_indices[device].extend_from_slice(&shards[shard]);
        }
        next += take;
    }
    Ok(Partition { device_indices, shards, shard_owner })
}

/// Per-device training indices and the pooled global test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<Vec<usize>>,
    pub test: Vec<usize>,
}

/// Holds out `round(test_fraction * n)` random samples of every device and
/// pools them into one test set.
pub fn train_test_split(partition: &Partition, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(partition.num_devices());
    let mut test = Vec::new();
    for (device, indices) in partition.device_indices.iter().enumerate() {
        let mut local = indices.clone();
        local.shuffle(&mut rng);
        let holdout = (test_fraction * local.len() as f64).round() as usize;
        if holdout >= local.len() {
            return Err(Error::NoData(format!(
                "device {device} keeps no training samples out of {}",
                local.len()
            )));
        }
        test.extend_from_slice(&local[..holdout]);
        let mut rest = local[holdout..].to_vec();
        rest.sort_unstable();
        train.push(rest);
    }
    test.sort_unstable();
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_data(per_class: usize, classes: usize) -> Dataset {
        let n = per_class * classes;
        let labels: Vec<usize> = (0..n).map(|i| (i * 7919) % classes).collect();
        Dataset::new(vec![0.5; n], labels, 1, classes).unwrap()
    }

    #[test]
    fn shards_are_single_label_when_classes_divide() {
        let data = sorted_data(100, 4);
        let p = shard_partition(&data, 50, ShardRange::new(1, 2).unwrap(), 3, 0).unwrap();
        assert_eq!(p.shards.len(), 8);
        for shard in &p.shards {
            let first = data.labels()[shard[0]];
            assert!(shard.iter().all(|&i| data.labels()[i] == first));
        }
    }

    #[test]
    fn boundary_shards_mix_at_most_two_labels() {
        let data = sorted_data(70, 3);
        let p = shard_partition(&data, 50, ShardRange::new(1, 1).unwrap(), 4, 1).unwrap();
        assert_eq!(p.shards.len(), 4);
        for shard in &p.shards {
            let mut labels: Vec<usize> = shard.iter().map(|&i| data.labels()[i]).collect();
            labels.dedup();
            assert!(labels.len() <= 2);
        }
    }

    #[test]
    fn reserves_minimum_for_late_devices() {
        let data = sorted_data(50, 4);
        // four shards, four devices that each want up to three
        let p = shard_partition(&data, 50, ShardRange::new(1, 3).unwrap(), 4, 2).unwrap();
        assert!((0..4).all(|d| p.shards_of(d) == 1));
        assert!(matches!(
            shard_partition(&data, 50, ShardRange::new(2, 3).unwrap(), 4, 2),
            Err(Error::Shortfall { feasible: 4, required: 8 })
        ));
    }

    #[test]
    fn split_holds_out_rounded_fraction() {
        let p = Partition { device_indices: vec![(0..100).collect(), (100..104).collect()], shards: vec![], shard_owner: vec![] };
        let s = train_test_split(&p, 0.1, 0).unwrap();
        assert_eq!(s.train[0].len(), 90);
        assert_eq!(s.train[1].len(), 4);
        assert_eq!(s.test.len(), 10);
        assert_eq!(s, train_test_split(&p, 0.1, 0).unwrap());
        let tiny = Partition { device_indices: vec![vec![0]], shards: vec![], shard_owner: vec![] };
        assert!(train_test_split(&tiny, 0.6, 0).is_err());
    }
}
