//! Training, evaluation, noise sweeps, the ablation grid and artifact export.

mod checkpoint;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use uml_autograd::{Adam, Graph};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{OptimConfig, RunConfig};

use crate::error::{Result, UmlError};
use crate::losses::{anneal, LossWeights};
use crate::metrics::{summarize, MetricsReport, SampleOutcome};
use crate::model::{extract_outputs, image_batch, Model};
use crate::objective::{batch_objective, LossTerms, Targets};
use crate::pgm::{export_split, image_to_pgm, intensity_to_gray, mask_to_pgm, write_pgm, Pgm};
use crate::rng::{derive_seed, SplitMix64};
use crate::synthdata::{add_gaussian_noise, make_dataset_parallel, make_split, Dataset, Sample, Split, CUP, DISC, STRUCTURES};

const SHUFFLE_TAG: u64 = 0x7368_7566;
const CHANNEL_TAG: u64 = 0x6368_616e;
const EVAL_BATCH: usize = 16;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOSSES_FILE: &str = "losses.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RECORD_FILE: &str = "run.json";

/// One row of the loss curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Annealing factor applied to the KL coefficients.
    pub anneal: f64,
    pub train_mutual: f64,
    pub train_cls: f64,
    pub train_seg: f64,
    pub train_total: f64,
    pub val_mutual: f64,
    pub val_cls: f64,
    pub val_seg: f64,
    pub val_total: f64,
    pub val_acc: f64,
    pub val_mean_dice: f64,
    pub selection: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept; `None` for the untrained model.
    pub best_epoch: Option<usize>,
    /// Validation and test reports at every configured noise level.
    pub reports: Vec<MetricsReport>,
    pub split_hash: String,
    pub wall_clock_secs: f64,
    pub checkpoint: PathBuf,
}

impl RunRecord {
    pub fn report(&self, split: &str, sigma: f64) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.split == split && r.sigma == sigma)
    }
}

/// Noise-sweep table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    #[serde(rename = "ACC")]
    pub acc: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "DI_disc")]
    pub di_disc: f64,
    #[serde(rename = "ASSD_disc")]
    pub assd_disc: Option<f64>,
    #[serde(rename = "DI_cup")]
    pub di_cup: f64,
    #[serde(rename = "ASSD_cup")]
    pub assd_cup: Option<f64>,
    #[serde(rename = "mean_Uc")]
    pub mean_uc: f64,
    #[serde(rename = "mean_Us")]
    pub mean_us: f64,
}

impl From<&MetricsReport> for SweepRow {
    fn from(r: &MetricsReport) -> Self {
        Self {
            sigma: r.sigma,
            acc: r.acc,
            f1: r.f1,
            di_disc: r.dice_per_class.get(&DISC).copied().unwrap_or(f64::NAN),
            assd_disc: r.assd_per_class.get(&DISC).copied().flatten(),
            di_cup: r.dice_per_class.get(&CUP).copied().unwrap_or(f64::NAN),
            assd_cup: r.assd_per_class.get(&CUP).copied().flatten(),
            mean_uc: r.mean_uc,
            mean_us: r.mean_us,
        }
    }
}

/// One line of `metrics.csv`: a [`SweepRow`] tagged with its split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub split: String,
    pub sigma: f64,
    #[serde(rename = "ACC")]
    pub acc: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "DI_disc")]
    pub di_disc: f64,
    #[serde(rename = "ASSD_disc")]
    pub assd_disc: Option<f64>,
    #[serde(rename = "DI_cup")]
    pub di_cup: f64,
    #[serde(rename = "ASSD_cup")]
    pub assd_cup: Option<f64>,
    #[serde(rename = "mean_Uc")]
    pub mean_uc: f64,
    #[serde(rename = "mean_Us")]
    pub mean_us: f64,
    pub n_excluded_assd: usize,
}

impl From<&MetricsReport> for MetricsRow {
    fn from(r: &MetricsReport) -> Self {
        let s = SweepRow::from(r);
        Self {
            split: r.split.clone(),
            sigma: s.sigma,
            acc: s.acc,
            f1: s.f1,
            di_disc: s.di_disc,
            assd_disc: s.assd_disc,
            di_cup: s.di_cup,
            assd_cup: s.assd_cup,
            mean_uc: s.mean_uc,
            mean_us: s.mean_us,
            n_excluded_assd: r.n_excluded_assd,
        }
    }
}

/// One line of `ablation.csv`, scored on the test split at the first noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub use_un: bool,
    pub use_ui: bool,
    /// The full configuration proposed by the method.
    pub proposed: bool,
    pub split_hash: String,
    pub best_epoch: Option<usize>,
    pub sigma: f64,
    #[serde(rename = "ACC")]
    pub acc: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "DI_disc")]
    pub di_disc: f64,
    #[serde(rename = "ASSD_disc")]
    pub assd_disc: Option<f64>,
    #[serde(rename = "DI_cup")]
    pub di_cup: f64,
    #[serde(rename = "ASSD_cup")]
    pub assd_cup: Option<f64>,
    #[serde(rename = "mean_Uc")]
    pub mean_uc: f64,
    #[serde(rename = "mean_Us")]
    pub mean_us: f64,
}

impl AblationRow {
    pub fn sweep(&self) -> SweepRow {
        SweepRow {
            sigma: self.sigma,
            acc: self.acc,
            f1: self.f1,
            di_disc: self.di_disc,
            assd_disc: self.assd_disc,
            di_cup: self.di_cup,
            assd_cup: self.assd_cup,
            mean_uc: self.mean_uc,
            mean_us: self.mean_us,
        }
    }
}

fn config_comment(cfg: &RunConfig) -> String {
    format!("config: {}", cfg.to_json())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| UmlError::io(dir, e))
}

/// CSV with a leading `# config: {...}` comment line, then a header row.
pub fn write_csv<S: Serialize>(path: &Path, cfg: &RunConfig, rows: &[S]) -> Result<()> {
    let mut body = format!("# {}\n", config_comment(cfg)).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut body);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| UmlError::io(path, e))?;
    }
    fs::write(path, body).map_err(|e| UmlError::io(path, e))
}

pub fn read_csv<D: DeserializeOwned>(path: &Path) -> Result<Vec<D>> {
    let file = fs::File::open(path).map_err(|e| UmlError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    r.deserialize().map(|row| row.map_err(UmlError::from)).collect()
}

/// FNV-1a over every sample's seed, label, mask and image bits.
pub fn dataset_hash(d: &Dataset) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for split in Split::ALL {
        for s in d.split(split) {
            eat(&s.seed.to_le_bytes());
            eat(&(s.label as u64).to_le_bytes());
            eat(s.mask.labels());
            for v in &s.image {
                eat(&v.to_bits().to_le_bytes());
            }
        }
    }
    format!("{h:016x}")
}

fn noisy_images(samples: &[Sample], sigma: f64) -> Result<Vec<Vec<f32>>> {
    // the noise seed is the sample seed, so every sigma shares one pattern
    samples.iter().map(|s| add_gaussian_noise(&s.image, sigma, s.seed)).collect()
}

fn annealed_weights(cfg: &RunConfig, epoch: usize) -> Result<(f64, LossWeights)> {
    let a = anneal(epoch, &cfg.anneal)?;
    let w = LossWeights { lambda_m1: cfg.loss.lambda_m1 * a, lambda_c: cfg.loss.lambda_c * a, ..cfg.loss };
    Ok((a, w))
}

/// Forward `samples` (with noise `sigma`) and reduce to a report; with
/// `weights`, also the batch-mean losses.
pub fn evaluate_samples(
    model: &Model<f32>,
    samples: &[Sample],
    split: &str,
    sigma: f64,
    weights: Option<(&LossWeights, usize)>,
) -> Result<(MetricsReport, LossTerms)> {
    let images = noisy_images(samples, sigma)?;
    let mut outcomes = Vec::with_capacity(samples.len());
    let mut losses = LossTerms::default();
    for (chunk, imgs) in samples.chunks(EVAL_BATCH).zip(images.chunks(EVAL_BATCH)) {
        let refs: Vec<&[f32]> = imgs.iter().map(Vec::as_slice).collect();
        let (h, w) = (chunk[0].height, chunk[0].width);
        let mut g = Graph::new();
        let x = g.input(image_batch(&refs, h, w)?);
        let vars = model.forward_graph(&mut g, x)?;
        if let Some((lw, epoch)) = weights {
            let masks: Vec<_> = chunk.iter().map(|s| &s.mask).collect();
            let labels: Vec<_> = chunk.iter().map(|s| s.label).collect();
            let (terms, _) = batch_objective(&g, &vars, &Targets { masks: &masks, labels: &labels }, lw, epoch)?;
            losses = losses + terms.scaled(chunk.len() as f64);
        }
        for (s, out) in chunk.iter().zip(extract_outputs(&g, &vars)?) {
            let mean_us = out.seg_uncertainty.iter().sum::<f64>() / out.seg_uncertainty.len() as f64;
            outcomes.push(SampleOutcome {
                pred_label: out.cls_opinion.predicted_class(),
                true_label: s.label,
                pred_mask: out.final_seg,
                true_mask: s.mask.clone(),
                uc: out.cls_opinion.uncertainty,
                mean_us,
            });
        }
    }
    let report = summarize(split, sigma, &outcomes, &STRUCTURES)?;
    Ok((report, losses.scaled(1.0 / samples.len() as f64)))
}

fn check_gradients(grads: &[(uml_autograd::ParamId, uml_autograd::Tensor<f32>)], model: &Model<f32>) -> Result<()> {
    // the instructor gate is off the tape when UI is disabled
    let skip_ui = !model.config().use_ui;
    for (id, p) in model.params().iter() {
        if skip_ui && p.name.starts_with("ui.") {
            continue;
        }
        let Some((_, g)) = grads.iter().find(|(gid, _)| *gid == id) else {
            return Err(UmlError::Numerical { epoch: 0, term: format!("no gradient for {}", p.name), value: f64::NAN });
        };
        if let Some(v) = g.data().iter().find(|v| !v.is_finite()) {
            return Err(UmlError::Numerical { epoch: 0, term: format!("gradient of {}", p.name), value: *v as f64 });
        }
    }
    Ok(())
}

/// Train, keep the weights with the best `(val ACC + val mean Dice) / 2`,
/// then evaluate validation and test at every configured noise level.
/// Writes the checkpoint, loss and metric CSVs and a JSON record to
/// `cfg.out_dir`.
pub fn train(cfg: &RunConfig) -> Result<RunRecord> {
    train_with_progress(cfg, |_| {})
}

/// [`train`], calling `progress` after every epoch.
pub fn train_with_progress(cfg: &RunConfig, mut progress: impl FnMut(&EpochRecord)) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    ensure_dir(&cfg.out_dir)?;
    let data = make_dataset_parallel(&cfg.data, cfg.data_threads)?;
    let split_hash = dataset_hash(&data);
    let mut model = Model::<f32>::new(cfg.model.clone())?;
    let mut adam = Adam::<f32>::new(cfg.optimizer.adam(), model.params());
    let mut rng = SplitMix64::new(derive_seed(cfg.seed, SHUFFLE_TAG));
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let (h, w) = (cfg.data.height, cfg.data.width);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, uml_autograd::ParamStore<f32>)> = None;
    for epoch in 0..cfg.epochs {
        let (a, weights) = annealed_weights(cfg, epoch)?;
        order.shuffle(&mut rng);
        let mut train_terms = LossTerms::default();
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &data.train[i]).collect();
            let refs: Vec<&[f32]> = batch.iter().map(|s| s.image.as_slice()).collect();
            let masks: Vec<_> = batch.iter().map(|s| &s.mask).collect();
            let labels: Vec<_> = batch.iter().map(|s| s.label).collect();
            let mut g = Graph::new();
            let x = g.input(image_batch(&refs, h, w)?);
            let vars = model.forward_graph(&mut g, x)?;
            let (terms, seeds) = batch_objective(&g, &vars, &Targets { masks: &masks, labels: &labels }, &weights, epoch)?;
            train_terms = train_terms + terms.scaled(batch.len() as f64);
            let grads = g.backward(&seeds).params();
            if adam.steps() == 0 {
                check_gradients(&grads, &model)?;
            }
            adam.update(model.params_mut(), &grads);
        }
        let train_terms = train_terms.scaled(1.0 / data.train.len() as f64);
        let (val, val_terms) = evaluate_samples(&model, &data.val, "val", 0.0, Some((&weights, epoch)))?;
        let selection = (val.acc + val.mean_dice()) / 2.0;
        if best.as_ref().is_none_or(|(s, _, _)| selection > *s) {
            best = Some((selection, epoch, model.params().clone()));
        }
        epochs.push(EpochRecord {
            epoch,
            anneal: a,
            train_mutual: train_terms.mutual,
            train_cls: train_terms.cls,
            train_seg: train_terms.seg,
            train_total: train_terms.total,
            val_mutual: val_terms.mutual,
            val_cls: val_terms.cls,
            val_seg: val_terms.seg,
            val_total: val_terms.total,
            val_acc: val.acc,
            val_mean_dice: val.mean_dice(),
            selection,
        });
        progress(&epochs[epoch]);
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.load_params(params)?;
            Some(epoch)
        }
        None => None,
    };
    let checkpoint = cfg.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&checkpoint, cfg, &model)?;
    let mut reports = Vec::new();
    for (name, samples) in [("val", &data.val), ("test", &data.test)] {
        for &sigma in &cfg.sigmas {
            reports.push(evaluate_samples(&model, samples, name, sigma, None)?.0);
        }
    }
    write_csv(&cfg.out_dir.join(LOSSES_FILE), cfg, &epochs)?;
    let rows: Vec<MetricsRow> = reports.iter().map(MetricsRow::from).collect();
    write_csv(&cfg.out_dir.join(METRICS_FILE), cfg, &rows)?;
    let record = RunRecord {
        config: cfg.clone(),
        epochs,
        best_epoch,
        reports,
        split_hash,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        checkpoint,
    };
    let path = cfg.out_dir.join(RECORD_FILE);
    let json = serde_json::to_string_pretty(&record)?;
    fs::write(&path, json).map_err(|e| UmlError::io(&path, e))?;
    Ok(record)
}

/// Load a checkpoint and score one split at noise level `sigma`.
pub fn evaluate(checkpoint: &Path, split: Split, sigma: f64) -> Result<MetricsReport> {
    let (cfg, model) = load_checkpoint(checkpoint)?;
    let samples = make_split(&cfg.data, split, cfg.data_threads)?;
    Ok(evaluate_samples(&model, &samples, split.name(), sigma, None)?.0)
}

/// Evaluate the test split at each noise level; optionally write the table.
pub fn noise_sweep(checkpoint: &Path, sigmas: &[f64], out: Option<&Path>) -> Result<Vec<SweepRow>> {
    let (cfg, model) = load_checkpoint(checkpoint)?;
    let samples = make_split(&cfg.data, Split::Test, cfg.data_threads)?;
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        rows.push(SweepRow::from(&evaluate_samples(&model, &samples, "test", sigma, None)?.0));
    }
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            ensure_dir(dir)?;
        }
        write_csv(path, &cfg, &rows)?;
    }
    Ok(rows)
}

/// The four ablation settings, in table order.
pub const ABLATION_GRID: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];

/// Train and test every ablation setting on the same data; writes
/// `ablation.csv` under `cfg.out_dir` with one row per setting.
pub fn ablate(cfg: &RunConfig) -> Result<(Vec<AblationRow>, Vec<RunRecord>)> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(4);
    let mut records = Vec::with_capacity(4);
    for (use_un, use_ui) in ABLATION_GRID {
        let mut c = cfg.clone();
        c.model.use_un = use_un;
        c.model.use_ui = use_ui;
        c.md_only = !use_un && !use_ui;
        c.out_dir = cfg.out_dir.join(c.variant_name().to_lowercase().replace('+', "_"));
        let record = train(&c)?;
        let sigma = cfg.sigmas.first().copied().unwrap_or(0.0);
        let report = match record.report("test", sigma) {
            Some(r) => r.clone(),
            None => evaluate(&record.checkpoint, Split::Test, sigma)?,
        };
        let s = SweepRow::from(&report);
        rows.push(AblationRow {
            variant: c.variant_name().to_string(),
            use_un,
            use_ui,
            proposed: use_un && use_ui,
            split_hash: record.split_hash.clone(),
            best_epoch: record.best_epoch,
            sigma: s.sigma,
            acc: s.acc,
            f1: s.f1,
            di_disc: s.di_disc,
            assd_disc: s.assd_disc,
            di_cup: s.di_cup,
            assd_cup: s.assd_cup,
            mean_uc: s.mean_uc,
            mean_us: s.mean_us,
        });
        records.push(record);
    }
    write_csv(&cfg.out_dir.join("ablation.csv"), cfg, &rows)?;
    Ok((rows, records))
}

#[derive(Clone, Debug, Default)]
pub struct ExportOptions {
    /// Export at most this many samples.
    pub limit: Option<usize>,
    /// Also dump three random channels of f^c_4 and r^c per sample.
    pub channel_dump: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExportSummary {
    pub samples: usize,
    pub files: Vec<PathBuf>,
    /// Mean gray level over all written uncertainty maps.
    pub mean_uncertainty_gray: f64,
}

fn min_max_gray(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    values.iter().map(|v| intensity_to_gray((v - lo) / span)).collect()
}

fn pick_channels(rng: &mut SplitMix64, channels: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..channels).collect();
    all.shuffle(rng);
    all.truncate(3.min(channels));
    all
}

/// Write per-sample PGMs (input, predicted mask, pixel uncertainty) and
/// `maps.csv` with image-level beliefs and uncertainty.
pub fn export_maps(checkpoint: &Path, split: Split, sigma: f64, out_dir: &Path, opts: &ExportOptions) -> Result<ExportSummary> {
    let (cfg, model) = load_checkpoint(checkpoint)?;
    ensure_dir(out_dir)?;
    let mut samples = make_split(&cfg.data, split, cfg.data_threads)?;
    if let Some(n) = opts.limit {
        samples.truncate(n);
    }
    let images = noisy_images(&samples, sigma)?;
    let comment = vec![config_comment(&cfg), format!("split: {} sigma: {sigma}", split.name())];
    let mut rng = SplitMix64::new(derive_seed(cfg.seed, CHANNEL_TAG));
    let cls_channels = pick_channels(&mut rng, cfg.model.widths[3]);
    let rc_channels = pick_channels(&mut rng, cfg.model.widths[3]);
    let k = cfg.model.cls_classes;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut files = Vec::new();
    let (mut gray_sum, mut gray_n) = (0.0, 0usize);
    let (h, w) = (cfg.data.height, cfg.data.width);
    let mut index = 0usize;
    for (chunk, imgs) in samples.chunks(EVAL_BATCH).zip(images.chunks(EVAL_BATCH)) {
        let refs: Vec<&[f32]> = imgs.iter().map(Vec::as_slice).collect();
        let mut g = Graph::new();
        let x = g.input(image_batch(&refs, h, w)?);
        let vars = model.forward_graph(&mut g, x)?;
        let outs = extract_outputs(&g, &vars)?;
        for (j, (s, out)) in chunk.iter().zip(&outs).enumerate() {
            let stem = format!("{index:04}");
            index += 1;
            let mut put = |name: String, pgm: Pgm| -> Result<()> {
                let path = out_dir.join(name);
                write_pgm(&path, &pgm)?;
                files.push(path);
                Ok(())
            };
            put(format!("{stem}_image.pgm"), image_to_pgm(&imgs[j], h, w, comment.clone()))?;
            put(format!("{stem}_pred.pgm"), mask_to_pgm(&out.final_seg, comment.clone()))?;
            let u: Vec<u8> = out.seg_uncertainty.iter().map(|&u| intensity_to_gray(u)).collect();
            gray_sum += u.iter().map(|&v| v as f64).sum::<f64>();
            gray_n += u.len();
            put(format!("{stem}_uncertainty.pgm"), Pgm { width: w, height: h, pixels: u, comments: comment.clone() })?;
            if opts.channel_dump {
                for (tag, var, chans) in [("fc4", vars.cls_top, &cls_channels), ("rc", vars.reliable_cls, &rc_channels)] {
                    let t = g.value(var).sample(j);
                    let (_, _, fh, fw) = t.dims4();
                    for &c in chans {
                        let plane: Vec<f64> = t.data()[c * fh * fw..(c + 1) * fh * fw].iter().map(|&v| v as f64).collect();
                        let pgm = Pgm { width: fw, height: fh, pixels: min_max_gray(&plane), comments: comment.clone() };
                        put(format!("{stem}_{tag}_ch{c:03}.pgm"), pgm)?;
                    }
                }
            }
            let mut row = vec![format!("{stem}_image.pgm"), s.label.to_string(), out.cls_opinion.predicted_class().to_string()];
            // U^c is written as the complement of the rounded beliefs so each
            // row sums to one at the printed precision
            let rounded: Vec<f64> = out.cls_opinion.beliefs.iter().map(|b| (b * 1e4).round() / 1e4).collect();
            row.extend(rounded.iter().map(|b| format!("{b:.4}")));
            row.push(format!("{:.4}", (1.0 - rounded.iter().sum::<f64>()).max(0.0)));
            rows.push(row);
        }
    }
    let csv_path = out_dir.join("maps.csv");
    let mut body = format!("# {}\n", config_comment(&cfg)).into_bytes();
    {
        let mut wtr = csv::Writer::from_writer(&mut body);
        let mut header = vec!["filename".to_string(), "true_label".into(), "pred_label".into()];
        header.extend((0..k).map(|i| format!("b_{i}")));
        header.push("u_c".into());
        wtr.write_record(&header)?;
        for r in &rows {
            wtr.write_record(r)?;
        }
        wtr.flush().map_err(|e| UmlError::io(&csv_path, e))?;
    }
    fs::write(&csv_path, body).map_err(|e| UmlError::io(&csv_path, e))?;
    files.push(csv_path);
    Ok(ExportSummary {
        samples: samples.len(),
        files,
        mean_uncertainty_gray: if gray_n == 0 { 0.0 } else { gray_sum / gray_n as f64 },
    })
}

/// Export the three splits as PGM images and masks with CSV manifests.
pub fn gen_data(cfg: &RunConfig, out_dir: &Path) -> Result<Dataset> {
    cfg.validate()?;
    let data = make_dataset_parallel(&cfg.data, cfg.data_threads)?;
    let json = cfg.to_json();
    for split in Split::ALL {
        export_split(&out_dir.join(split.name()), data.split(split), &json)?;
    }
    Ok(data)
}
