use feel_core::dataio::*;
use feel_core::diversity::{gini_simpson, label_distribution};
use feel_core::fl::Dataset;
use feel_core::Error;
use std::io::Write;

fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::File::create(&path).unwrap().write_all(bytes).unwrap();
    path
}

// Two 2x2 images and their labels, written out byte by byte.
const IMAGES: [u8; 24] = [
    0x00, 0x00, 0x08, 0x03, // magic
    0x00, 0x00, 0x00, 0x02, // count
    0x00, 0x00, 0x00, 0x02, // rows
    0x00, 0x00, 0x00, 0x02, // cols
    0x00, 0xff, 0x33, 0x66, // image 0
    0xcc, 0x00, 0x00, 0x99, // image 1
];
const LABELS: [u8; 10] = [0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 0x07, 0x03];

#[test]
fn loads_handcrafted_pair() {
    let dir = tempfile::tempdir().unwrap();
    let data = load_idx(&write(&dir, "img", &IMAGES), &write(&dir, "lbl", &LABELS)).unwrap();
    assert_eq!(data.len(), 2);
    assert_eq!(data.feature_dim(), 4);
    assert_eq!(data.labels(), &[7, 3]);
    assert_eq!(data.row(0), &[0.0, 1.0, 0.2, 0.4]);
    assert_eq!(data.row(1), &[0.8, 0.0, 0.0, 0.6]);
    assert_eq!(data.num_classes(), 8);
}

#[test]
fn reports_format_errors_distinctly() {
    let dir = tempfile::tempdir().unwrap();
    let labels = write(&dir, "lbl", &LABELS);

    let mut bad = IMAGES;
    bad[3] = 0x01;
    assert_eq!(
        load_idx(&write(&dir, "bad", &bad), &labels),
        Err(Error::BadMagic { expected: IMAGES_MAGIC, found: LABELS_MAGIC })
    );
    assert!(matches!(load_idx(&write(&dir, "short", &IMAGES[..22]), &labels), Err(Error::Truncated(_))));
    assert!(matches!(load_idx(&write(&dir, "hdr", &IMAGES[..10]), &labels), Err(Error::Truncated(_))));

    let mut one_label = LABELS[..9].to_vec();
    one_label[7] = 0x01;
    assert_eq!(
        load_idx(&write(&dir, "img", &IMAGES), &write(&dir, "one", &one_label)),
        Err(Error::CountMismatch { images: 2, labels: 1 })
    );
    assert!(matches!(load_idx(&dir.path().join("missing"), &labels), Err(Error::Io(_))));
}

fn mnist_shaped() -> Dataset {
    // 60000 samples, 6000 per digit, one feature each
    let labels: Vec<usize> = (0..60_000).map(|i| i % 10).collect();
    Dataset::new(vec![0.0; 60_000], labels, 1, 10).unwrap()
}

#[test]
fn sixty_thousand_samples_make_1200_shards() {
    let data = mnist_shaped();
    let p = shard_partition(&data, 50, ShardRange::new(1, 30).unwrap(), 100, 0).unwrap();
    assert_eq!(p.shards.len(), 1200);
    for shard in &p.shards {
        let first = data.labels()[shard[0]];
        assert!(shard.iter().all(|&i| data.labels()[i] == first));
    }
}

#[test]
fn partitions_are_disjoint_and_bounded() {
    let data = mnist_shaped();
    let range = ShardRange::new(1, 30).unwrap();
    for seed in 0..100 {
        let p = shard_partition(&data, 50, range, 100, seed).unwrap();
        let mut seen = vec![false; data.len()];
        for (device, indices) in p.device_indices.iter().enumerate() {
            assert!((range.min..=range.max).contains(&p.shards_of(device)), "seed {seed}");
            assert_eq!(indices.len(), 50 * p.shards_of(device));
            for &i in indices {
                assert!(!seen[i], "seed {seed}: sample {i} dealt twice");
                seen[i] = true;
            }
        }
    }
}

#[test]
fn single_shard_devices_have_zero_diversity() {
    let data = mnist_shaped();
    let p = shard_partition(&data, 50, ShardRange::new(1, 30).unwrap(), 100, 3).unwrap();
    let mut checked = 0;
    for (device, indices) in p.device_indices.iter().enumerate() {
        let labels: Vec<usize> = indices.iter().map(|&i| data.labels()[i]).collect();
        let score = gini_simpson(&label_distribution(&labels, 10).unwrap()).unwrap();
        if p.shards_of(device) == 1 {
            assert_eq!(score, 0.0);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn split_is_disjoint_and_seeded() {
    let data = mnist_shaped();
    let p = shard_partition(&data, 50, ShardRange::new(1, 30).unwrap(), 100, 4).unwrap();
    let s = train_test_split(&p, 0.1, 9).unwrap();
    assert_eq!(s, train_test_split(&p, 0.1, 9).unwrap());
    let mut seen = vec![false; data.len()];
    for &i in s.train.iter().flatten().chain(&s.test) {
        assert!(!seen[i]);
        seen[i] = true;
    }
    let dealt: usize = p.device_indices.iter().map(Vec::len).sum();
    assert_eq!(seen.iter().filter(|&&x| x).count(), dealt);
    for (train, all) in s.train.iter().zip(&p.device_indices) {
        assert_eq!(train.len(), all.len() - (all.len() as f64 * 0.1).round() as usize);
    }
}
