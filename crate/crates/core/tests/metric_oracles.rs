//! Metrics against brute-force and hand-computed references.

use proptest::prelude::*;
use uml::mask::LabelMap;
use uml::metrics::{accuracy, assd, confusion, dice_score, f1_score, surface_pixels};
use uml::rng::SplitMix64;

mod common;
use common::{brute_force_assd, random_binary_mask, random_shapes};

#[test]
fn assd_is_bit_exact_against_brute_force() {
    let mut rng = SplitMix64::new(31);
    let mut excluded = 0;
    for i in 0..200 {
        let h = 1 + (rng.next_f64() * 32.0) as usize;
        let w = 1 + (rng.next_f64() * 32.0) as usize;
        let (p, g) = if i % 2 == 0 {
            let d = rng.uniform(0.0, 0.6);
            (random_binary_mask(&mut rng, h, w, d), random_binary_mask(&mut rng, h, w, d))
        } else {
            (random_shapes(&mut rng, h, w), random_shapes(&mut rng, h, w))
        };
        let fast = assd(&p, &g, 1).unwrap();
        let slow = brute_force_assd(&p, &g, 1);
        assert_eq!(fast.map(f64::to_bits), slow.map(f64::to_bits), "case {i}: {h}x{w}");
        excluded += fast.is_none() as usize;
    }
    assert!(excluded < 200);
}

#[test]
fn hand_examples() {
    assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.5);
    let c = confusion(&[1, 1, 1, 0, 0, 0], &[1, 1, 0, 1, 0, 0], 1).unwrap();
    assert_eq!((c.tp, c.fp, c.fn_, c.tn), (2, 1, 1, 2));
    assert_eq!(f1_score(&[1, 1, 1, 0, 0, 0], &[1, 1, 0, 1, 0, 0], 1).unwrap(), 4.0 / 6.0);
    let p = LabelMap::new(2, 3, vec![1, 1, 0, 0, 1, 0]).unwrap();
    let g = LabelMap::new(2, 3, vec![1, 0, 0, 0, 1, 1]).unwrap();
    // |P| = 3, |G| = 3, overlap 2
    assert_eq!(dice_score(&p, &g, 1).unwrap(), 4.0 / 6.0);
    let a = LabelMap::new(6, 6, (0..36).map(|i| (i == 0) as u8).collect()).unwrap();
    let b = LabelMap::new(6, 6, (0..36).map(|i| (i == 3 * 6 + 4) as u8).collect()).unwrap();
    assert_eq!(assd(&a, &b, 1).unwrap(), Some(5.0));
    assert_eq!(surface_pixels(&a, 1), vec![(0, 0)]);
}

fn shift(m: &LabelMap, dy: usize, dx: usize, h: usize, w: usize) -> LabelMap {
    let mut out = LabelMap::filled(h, w, 0);
    for y in 0..m.height() {
        for x in 0..m.width() {
            out.set(y + dy, x + dx, m.get(y, x));
        }
    }
    out
}

proptest! {
    #[test]
    fn dice_and_assd_are_symmetric(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let (p, g) = (random_shapes(&mut rng, 16, 20), random_shapes(&mut rng, 16, 20));
        prop_assert_eq!(dice_score(&p, &g, 1).unwrap(), dice_score(&g, &p, 1).unwrap());
        prop_assert_eq!(assd(&p, &g, 1).unwrap(), assd(&g, &p, 1).unwrap());
    }

    #[test]
    fn translation_invariance(seed in any::<u64>(), dy in 1usize..4, dx in 1usize..4) {
        let mut rng = SplitMix64::new(seed);
        // keep shapes off the border so the shift does not create new border surface
        let (p, g) = (random_shapes(&mut rng, 12, 12), random_shapes(&mut rng, 12, 12));
        let (p0, g0) = (shift(&p, 4, 4, 20, 20), shift(&g, 4, 4, 20, 20));
        let (p1, g1) = (shift(&p, 4 + dy, 4 + dx, 20, 20), shift(&g, 4 + dy, 4 + dx, 20, 20));
        prop_assert_eq!(dice_score(&p0, &g0, 1).unwrap(), dice_score(&p1, &g1, 1).unwrap());
        let (a0, a1) = (assd(&p0, &g0, 1).unwrap(), assd(&p1, &g1, 1).unwrap());
        match (a0, a1) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x, y),
        }
    }

    #[test]
    fn f1_is_harmonic_mean(preds in prop::collection::vec(0usize..2, 1..40), seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let gts: Vec<usize> = preds.iter().map(|_| (rng.next_f64() < 0.5) as usize).collect();
        let c = confusion(&preds, &gts, 1).unwrap();
        prop_assert_eq!(c.total(), preds.len());
        if c.tp + c.fp > 0 && c.tp + c.fn_ > 0 && c.tp > 0 {
            let pr = c.tp as f64 / (c.tp + c.fp) as f64;
            let re = c.tp as f64 / (c.tp + c.fn_) as f64;
            prop_assert!((f1_score(&preds, &gts, 1).unwrap() - 2.0 * pr * re / (pr + re)).abs() < 1e-12);
        }
        let acc = accuracy(&preds, &gts).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
    }
}
