//! Generated data against independent geometric and statistical checks.

use std::collections::HashSet;

use uml::mask::LabelMap;
use uml::synthdata::{
    add_gaussian_noise, generate_sample, gaussian_noise_field, make_dataset, make_dataset_parallel, positive_fraction,
    DataConfig, Split, BACKGROUND, CUP, DISC,
};

/// Bounding-box height of the pixels for which `keep` holds.
fn vertical_extent(mask: &LabelMap, keep: impl Fn(u8) -> bool) -> usize {
    let w = mask.width();
    let rows: Vec<usize> = mask.labels().iter().enumerate().filter(|(_, &v)| keep(v)).map(|(i, _)| i / w).collect();
    rows.iter().max().unwrap() - rows.iter().min().unwrap() + 1
}

fn oracle_label(mask: &LabelMap, threshold: f64) -> usize {
    let cup = vertical_extent(mask, |v| v == CUP) as f64;
    let disc = vertical_extent(mask, |v| v != BACKGROUND) as f64;
    usize::from(cup / disc > threshold)
}

#[test]
fn labels_follow_the_mask_for_every_sample() {
    let cfg = DataConfig::default();
    let data = make_dataset(&cfg).unwrap();
    let mut total = 0;
    for split in Split::ALL {
        let samples = data.split(split);
        assert_eq!(samples.len(), split.size(&cfg));
        for s in samples {
            assert_eq!(s.label, oracle_label(&s.mask, cfg.ratio_threshold), "seed {}", s.seed);
            total += 1;
        }
        let frac = positive_fraction(samples);
        assert!((0.4..=0.6).contains(&frac), "{} positives {frac}", split.name());
    }
    assert_eq!(total, 512 + 128 + 128);
}

#[test]
fn every_sample_has_all_classes_and_a_nested_cup() {
    let cfg = DataConfig::default();
    for seed in 0..300 {
        let s = generate_sample(seed, &cfg).unwrap();
        let m = &s.mask;
        for class in [BACKGROUND, DISC, CUP] {
            assert!(m.count(class) > 0, "seed {seed} lacks class {class}");
        }
        for y in 0..m.height() {
            for x in 0..m.width() {
                if m.get(y, x) != CUP {
                    continue;
                }
                assert!(y > 0 && x > 0 && y + 1 < m.height() && x + 1 < m.width());
                for (ny, nx) in [(y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)] {
                    assert_ne!(m.get(ny, nx), BACKGROUND, "seed {seed}: cup touches background");
                }
            }
        }
        assert!(s.image.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn cup_pixels_are_brighter_than_the_background() {
    let cfg = DataConfig::default();
    for seed in 0..50 {
        let s = generate_sample(seed, &cfg).unwrap();
        let mean = |class: u8| {
            let v: Vec<f64> =
                s.mask.labels().iter().zip(&s.image).filter(|(&l, _)| l == class).map(|(_, &p)| p as f64).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(CUP) > mean(DISC) && mean(DISC) > mean(BACKGROUND), "seed {seed}");
    }
}

#[test]
fn generation_is_deterministic_and_splits_are_disjoint() {
    let cfg = DataConfig { n_train: 40, n_val: 20, n_test: 20, ..DataConfig::default() };
    assert_eq!(generate_sample(99, &cfg).unwrap(), generate_sample(99, &cfg).unwrap());
    let a = make_dataset(&cfg).unwrap();
    let b = make_dataset_parallel(&cfg, 3).unwrap();
    assert_eq!(a, b);
    let mut seeds = HashSet::new();
    let mut images = HashSet::new();
    for split in Split::ALL {
        for s in a.split(split) {
            assert!(seeds.insert(s.seed));
            assert!(images.insert(s.image.iter().map(|v| v.to_bits()).collect::<Vec<_>>()));
        }
    }
    let other = make_dataset(&DataConfig { master_seed: 1, ..cfg }).unwrap();
    assert_ne!(other.train[0].image, a.train[0].image);
}

#[test]
fn noise_has_the_requested_spread() {
    let clean = vec![0.5f32; 64 * 64];
    assert_eq!(add_gaussian_noise(&clean, 0.0, 4).unwrap(), clean);
    for seed in 0..5 {
        let field = gaussian_noise_field(64 * 64, 0.05, seed).unwrap();
        let n = field.len() as f64;
        let mean = field.iter().sum::<f64>() / n;
        let sd = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.05).abs() < 0.05 * 0.05, "seed {seed}: sd {sd}");
        let noisy = add_gaussian_noise(&clean, 0.05, seed).unwrap();
        for (v, f) in noisy.iter().zip(&field) {
            assert!((0.0..=1.0).contains(v));
            assert!((*v as f64 - (0.5 + f).clamp(0.0, 1.0)).abs() < 1e-6);
        }
    }
    let saturated = add_gaussian_noise(&[0.0, 1.0, 0.99], 10.0, 1).unwrap();
    assert!(saturated.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(add_gaussian_noise(&clean, -0.1, 0).is_err());
    assert_eq!(add_gaussian_noise(&clean, 0.03, 7).unwrap(), add_gaussian_noise(&clean, 0.03, 7).unwrap());
}
