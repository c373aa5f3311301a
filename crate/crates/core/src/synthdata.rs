//! Synthetic disc/cup fundus-like images. The class label is the vertical
//! cup-to-disc ratio thresholded, so it is a function of the mask alone.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, UmlError};
use crate::mask::LabelMap;
use crate::metrics::Structure;
use crate::rng::{derive_seed, SplitMix64};

pub const BACKGROUND: u8 = 0;
pub const DISC: u8 = 1;
pub const CUP: u8 = 2;

/// Scored structures: the optic disc is the whole disc region including the
/// cup, as in standard disc/cup benchmarks.
pub const STRUCTURES: [Structure; 2] = [
    Structure { key: DISC, labels: &[DISC, CUP] },
    Structure { key: CUP, labels: &[CUP] },
];

const MAX_RETRIES: usize = 100;
const GEOMETRY_TAG: u64 = 0x6765_6f6d;
const TEXTURE_TAG: u64 = 0x7465_7874;
const NOISE_TAG: u64 = 0x6e6f_6973;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub height: usize,
    pub width: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub ratio_threshold: f64,
    /// Drawn and measured ratios must stay this far from the threshold.
    pub ratio_margin: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Disc vertical radius as a fraction of the image height.
    pub disc_radius_min: f64,
    pub disc_radius_max: f64,
    /// Horizontal/vertical radius ratio range.
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub background_min: f64,
    pub background_max: f64,
    pub disc_contrast_min: f64,
    pub disc_contrast_max: f64,
    pub cup_contrast_min: f64,
    pub cup_contrast_max: f64,
    pub texture_amplitude: f64,
    pub grain_amplitude: f64,
    /// Width in pixels of the boundary falloff.
    pub edge_softness: f64,
    pub master_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            n_train: 512,
            n_val: 128,
            n_test: 128,
            ratio_threshold: 0.6,
            ratio_margin: 0.05,
            ratio_min: 0.35,
            ratio_max: 0.85,
            disc_radius_min: 0.15,
            disc_radius_max: 0.28,
            aspect_min: 0.85,
            aspect_max: 1.15,
            background_min: 0.1,
            background_max: 0.25,
            disc_contrast_min: 0.25,
            disc_contrast_max: 0.35,
            cup_contrast_min: 0.2,
            cup_contrast_max: 0.3,
            texture_amplitude: 0.05,
            grain_amplitude: 0.02,
            edge_softness: 0.7,
            master_seed: 2023,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || !self.height.is_multiple_of(8) || !self.width.is_multiple_of(8) {
            return Err(UmlError::config(format!(
                "image size {}x{} must be positive and divisible by 8",
                self.height, self.width
            )));
        }
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold < 1.0) {
            return Err(UmlError::config("ratio_threshold must lie in (0, 1)"));
        }
        if !(self.ratio_margin >= 0.0
            && 0.0 < self.ratio_min
            && self.ratio_min < self.ratio_threshold - self.ratio_margin
            && self.ratio_threshold + self.ratio_margin < self.ratio_max
            && self.ratio_max < 1.0)
        {
            return Err(UmlError::config(
                "ratio range must straddle the threshold with room for the margin inside (0, 1)",
            ));
        }
        let ranges = [
            ("disc_radius", self.disc_radius_min, self.disc_radius_max),
            ("aspect", self.aspect_min, self.aspect_max),
            ("background", self.background_min, self.background_max),
            ("disc_contrast", self.disc_contrast_min, self.disc_contrast_max),
            ("cup_contrast", self.cup_contrast_min, self.cup_contrast_max),
        ];
        for (name, lo, hi) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(UmlError::config(format!("{name} range [{lo}, {hi}] is invalid")));
            }
        }
        if self.disc_radius_max * self.aspect_max >= 0.45 || self.disc_radius_max >= 0.45 {
            return Err(UmlError::config("disc radius too large to fit the image"));
        }
        if self.texture_amplitude < 0.0 || self.grain_amplitude < 0.0 || self.edge_softness <= 0.0 {
            return Err(UmlError::config("texture amplitudes must be >= 0 and edge_softness > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub height: usize,
    pub width: usize,
    /// Row-major intensities in `[0, 1]`.
    pub image: Vec<f32>,
    pub mask: LabelMap,
    pub label: usize,
    pub seed: u64,
}

/// First and one-past-last row holding a label that satisfies `pred`.
fn row_extent(mask: &LabelMap, pred: impl Fn(u8) -> bool) -> Option<(usize, usize)> {
    let mut first = None;
    let mut last = 0;
    for y in 0..mask.height() {
        if (0..mask.width()).any(|x| pred(mask.get(y, x))) {
            first.get_or_insert(y);
            last = y + 1;
        }
    }
    first.map(|f| (f, last))
}

/// Vertical cup diameter over vertical disc diameter, in whole pixel rows.
pub fn vertical_cup_disc_ratio(mask: &LabelMap) -> Option<f64> {
    let (d0, d1) = row_extent(mask, |v| v == DISC || v == CUP)?;
    let (c0, c1) = row_extent(mask, |v| v == CUP)?;
    Some((c1 - c0) as f64 / (d1 - d0) as f64)
}

pub fn label_for_ratio(ratio: f64, threshold: f64) -> usize {
    (ratio > threshold) as usize
}

struct Geometry {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    ratio: f64,
}

fn ellipse_radius(dy: f64, dx: f64, ry: f64, rx: f64) -> f64 {
    ((dy / ry).powi(2) + (dx / rx).powi(2)).sqrt()
}

fn render_mask(g: &Geometry, h: usize, w: usize) -> LabelMap {
    let mut mask = LabelMap::filled(h, w, BACKGROUND);
    for y in 0..h {
        for x in 0..w {
            let r = ellipse_radius(y as f64 - g.cy, x as f64 - g.cx, g.ry, g.rx);
            if r <= g.ratio {
                mask.set(y, x, CUP);
            } else if r <= 1.0 {
                mask.set(y, x, DISC);
            }
        }
    }
    mask
}

fn smoothstep_inside(r: f64, radius_px: f64, softness: f64) -> f64 {
    // signed distance to the boundary, in approximate pixels
    let d = (1.0 - r) * radius_px;
    1.0 / (1.0 + (-d / softness).exp())
}

fn render_image(g: &Geometry, cfg: &DataConfig, rng: &mut SplitMix64) -> Vec<f32> {
    let (h, w) = (cfg.height, cfg.width);
    let base = rng.uniform(cfg.background_min, cfg.background_max);
    let disc_level = base + rng.uniform(cfg.disc_contrast_min, cfg.disc_contrast_max);
    let cup_level = disc_level + rng.uniform(cfg.cup_contrast_min, cfg.cup_contrast_max);
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let theta = rng.uniform(0.0, std::f64::consts::TAU);
            let freq = rng.uniform(1.0, 4.0) * std::f64::consts::TAU / h as f64;
            (freq * theta.cos(), freq * theta.sin(), rng.uniform(0.0, std::f64::consts::TAU))
        })
        .collect();
    let mean_r = (g.ry + g.rx) / 2.0;
    let mut image = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (yf, xf) = (y as f64, x as f64);
            let texture: f64 = waves.iter().map(|&(ky, kx, ph)| (ky * yf + kx * xf + ph).sin()).sum::<f64>() / 3.0;
            let grain = rng.uniform(-1.0, 1.0);
            let r = ellipse_radius(yf - g.cy, xf - g.cx, g.ry, g.rx);
            let in_disc = smoothstep_inside(r, mean_r, cfg.edge_softness);
            let in_cup = smoothstep_inside(r / g.ratio, mean_r * g.ratio, cfg.edge_softness);
            let v = base
                + cfg.texture_amplitude * texture
                + cfg.grain_amplitude * grain
                + in_disc * (disc_level - base)
                + in_cup * (cup_level - disc_level);
            image.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    image
}

fn draw_geometry(cfg: &DataConfig, rng: &mut SplitMix64) -> Option<(Geometry, LabelMap, usize)> {
    let (h, w) = (cfg.height as f64, cfg.width as f64);
    let ry = rng.uniform(cfg.disc_radius_min, cfg.disc_radius_max) * h;
    let rx = ry * rng.uniform(cfg.aspect_min, cfg.aspect_max);
    let ratio = rng.uniform(cfg.ratio_min, cfg.ratio_max);
    // keep the whole disc plus a margin for the soft edge inside the frame
    let pad = 2.0;
    let cy = rng.uniform(ry + pad, h - 1.0 - pad - ry);
    let cx = rng.uniform(rx + pad, w - 1.0 - pad - rx);
    if cy - ry < pad || cy + ry > h - 1.0 - pad || cx - rx < pad || cx + rx > w - 1.0 - pad {
        return None;
    }
    if (ratio - cfg.ratio_threshold).abs() < cfg.ratio_margin {
        return None;
    }
    let g = Geometry { cy, cx, ry, rx, ratio };
    let mask = render_mask(&g, cfg.height, cfg.width);
    if mask.count(BACKGROUND) == 0 || mask.count(DISC) == 0 || mask.count(CUP) == 0 {
        return None;
    }
    let measured = vertical_cup_disc_ratio(&mask)?;
    let label = label_for_ratio(ratio, cfg.ratio_threshold);
    if label_for_ratio(measured, cfg.ratio_threshold) != label
        || (measured - cfg.ratio_threshold).abs() < cfg.ratio_margin / 2.0
    {
        return None;
    }
    Some((g, mask, label))
}

/// Render one sample; identical `(seed, cfg)` give bitwise-identical output.
pub fn generate_sample(seed: u64, cfg: &DataConfig) -> Result<Sample> {
    cfg.validate()?;
    let mut geo_rng = SplitMix64::new(derive_seed(seed, GEOMETRY_TAG));
    for _ in 0..MAX_RETRIES {
        if let Some((g, mask, label)) = draw_geometry(cfg, &mut geo_rng) {
            let mut tex_rng = SplitMix64::new(derive_seed(seed, TEXTURE_TAG));
            let image = render_image(&g, cfg, &mut tex_rng);
            return Ok(Sample { height: cfg.height, width: cfg.width, image, mask, label, seed });
        }
    }
    Err(UmlError::invalid(format!(
        "seed {seed}: no valid geometry after {MAX_RETRIES} draws"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn index(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn size(self, cfg: &DataConfig) -> usize {
        match self {
            Split::Train => cfg.n_train,
            Split::Val => cfg.n_val,
            Split::Test => cfg.n_test,
        }
    }

    /// Split `s` owns seeds `master + s * 2^32 + j` for `j < 2^32`.
    pub fn seed(self, master_seed: u64, j: u64) -> u64 {
        master_seed.wrapping_add(self.index() << 32).wrapping_add(j)
    }
}

impl std::str::FromStr for Split {
    type Err = UmlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(UmlError::config(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn split(&self, s: Split) -> &[Sample] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn positive_fraction(samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| s.label == 1).count() as f64 / samples.len() as f64
}

/// Candidates are generated in seed order and accepted while the class
/// quota (half positives, rounded down) still has room.
fn fill_split(cfg: &DataConfig, split: Split, threads: usize) -> Result<Vec<Sample>> {
    let n = split.size(cfg);
    let want_pos = n / 2;
    let want_neg = n - want_pos;
    let (mut pos, mut neg) = (0, 0);
    let mut out = Vec::with_capacity(n);
    let chunk = (n.max(8) / 2).max(threads * 4);
    let mut next = 0u64;
    while out.len() < n {
        let seeds: Vec<u64> = (next..next + chunk as u64).map(|j| split.seed(cfg.master_seed, j)).collect();
        next += chunk as u64;
        for s in generate_many(&seeds, cfg, threads)? {
            if out.len() == n {
                break;
            }
            if s.label == 1 && pos < want_pos {
                pos += 1;
                out.push(s);
            } else if s.label == 0 && neg < want_neg {
                neg += 1;
                out.push(s);
            }
        }
        if next > (1 << 32) {
            return Err(UmlError::invalid("seed range exhausted while balancing split"));
        }
    }
    Ok(out)
}

fn generate_many(seeds: &[u64], cfg: &DataConfig, threads: usize) -> Result<Vec<Sample>> {
    if threads <= 1 {
        return seeds.iter().map(|&s| generate_sample(s, cfg)).collect();
    }
    let per = seeds.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(per)
            .map(|part| scope.spawn(move || part.iter().map(|&s| generate_sample(s, cfg)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(seeds.len());
        for h in handles {
            out.extend(h.join().expect("generator thread panicked")?);
        }
        Ok(out)
    })
}

/// One split on its own; identical to the matching field of [`make_dataset`].
pub fn make_split(cfg: &DataConfig, split: Split, threads: usize) -> Result<Vec<Sample>> {
    cfg.validate()?;
    fill_split(cfg, split, threads)
}

pub fn make_dataset(cfg: &DataConfig) -> Result<Dataset> {
    make_dataset_parallel(cfg, 1)
}

/// Same result as [`make_dataset`] for any thread count.
pub fn make_dataset_parallel(cfg: &DataConfig, threads: usize) -> Result<Dataset> {
    cfg.validate()?;
    Ok(Dataset {
        train: fill_split(cfg, Split::Train, threads)?,
        val: fill_split(cfg, Split::Val, threads)?,
        test: fill_split(cfg, Split::Test, threads)?,
    })
}

/// The zero-mean, unit-sigma field behind [`add_gaussian_noise`], scaled.
pub fn gaussian_noise_field(len: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(UmlError::invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut rng = SplitMix64::new(derive_seed(seed, NOISE_TAG));
    Ok((0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect())
}

/// Add i.i.d. Gaussian noise and clamp to `[0, 1]`. The underlying normal
/// draws depend only on `seed`, so sweeps over sigma share one noise pattern.
pub fn add_gaussian_noise(image: &[f32], sigma: f64, seed: u64) -> Result<Vec<f32>> {
    let field = gaussian_noise_field(image.len(), sigma, seed)?;
    if sigma == 0.0 {
        return Ok(image.to_vec());
    }
    Ok(image
        .iter()
        .zip(field)
        .map(|(&v, n)| (v as f64 + n).clamp(0.0, 1.0) as f32)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DataConfig {
        DataConfig { n_train: 24, n_val: 10, n_test: 11, ..DataConfig::default() }
    }

    #[test]
    fn same_seed_same_sample() {
        let cfg = DataConfig::default();
        assert_eq!(generate_sample(7, &cfg).unwrap(), generate_sample(7, &cfg).unwrap());
        assert_ne!(generate_sample(7, &cfg).unwrap().image, generate_sample(8, &cfg).unwrap().image);
    }

    #[test]
    fn every_sample_has_all_three_regions() {
        let cfg = DataConfig::default();
        for seed in 0..200 {
            let s = generate_sample(seed, &cfg).unwrap();
            for class in [BACKGROUND, DISC, CUP] {
                assert!(s.mask.count(class) > 0, "seed {seed} class {class}");
            }
            assert!(s.image.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn ratio_threshold_defines_label() {
        assert_eq!(label_for_ratio(0.75, 0.6), 1);
        assert_eq!(label_for_ratio(0.45, 0.6), 0);
        assert_eq!(label_for_ratio(0.6, 0.6), 0);
    }

    #[test]
    fn default_dataset_sizes_and_balance() {
        let d = make_dataset(&DataConfig::default()).unwrap();
        assert_eq!((d.train.len(), d.val.len(), d.test.len()), (512, 128, 128));
        for split in Split::ALL {
            let f = positive_fraction(d.split(split));
            assert!((0.4..=0.6).contains(&f), "{f}");
        }
    }

    #[test]
    fn splits_do_not_share_seeds_or_images() {
        let d = make_dataset(&small()).unwrap();
        let mut seeds: Vec<u64> = d.train.iter().chain(&d.val).chain(&d.test).map(|s| s.seed).collect();
        let n = seeds.len();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), n);
        for a in &d.train {
            assert!(d.test.iter().all(|b| a.image != b.image));
        }
    }

    #[test]
    fn parallel_generation_matches_serial() {
        let cfg = small();
        assert_eq!(make_dataset(&cfg).unwrap(), make_dataset_parallel(&cfg, 3).unwrap());
    }

    #[test]
    fn noise_contract() {
        let img = vec![0.5f32; 64 * 64];
        assert_eq!(add_gaussian_noise(&img, 0.0, 1).unwrap(), img);
        assert!(matches!(add_gaussian_noise(&img, -0.1, 1), Err(UmlError::InvalidInput(_))));
        let field = gaussian_noise_field(64 * 64, 0.05, 3).unwrap();
        let mean = field.iter().sum::<f64>() / field.len() as f64;
        let var = field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (field.len() - 1) as f64;
        assert!((var.sqrt() / 0.05 - 1.0).abs() < 0.05, "{}", var.sqrt());
        let noisy = add_gaussian_noise(&[0.0, 1.0, 0.99], 0.5, 9).unwrap();
        assert!(noisy.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(add_gaussian_noise(&img, 0.05, 4).unwrap(), add_gaussian_noise(&img, 0.05, 4).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(DataConfig { height: 60, ..DataConfig::default() }.validate().is_err());
        assert!(DataConfig { ratio_threshold: 1.2, ..DataConfig::default() }.validate().is_err());
        assert!(DataConfig::default().validate().is_ok());
    }
}
