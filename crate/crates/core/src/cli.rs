//! Command-line driver: `generate`, `extract`, `analyze`, `train`, `ablate`
//! and `report`.
//!
//! Every command resolves a [`RunConfig`] from an optional TOML/JSON file plus
//! flag overrides, writes it as `config.json` into its output directory and
//! stamps its SHA-256 on the first line of every CSV it emits.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::biostats::screen_features;
use crate::datamodel::{
    generate_synthetic, write_dataset, DatasetReader, Period, Substance, SyntheticConfig,
    SyntheticGenerator,
};
use crate::diffcore::{checkpoint, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{Extractor, FoldStats, LeakageGuard, SubjectFeatures};
use crate::fsutil::write_atomic;
use crate::harness::{
    self, baseline_lr_tf, cross_validate_trained, default_plan, report, run_ablation_fam,
    run_ablation_k, AblationRow, FoldReport,
};
use crate::matrix::Matrix;
use crate::model::ModelConfig;
use crate::signal::Biomarker;

/// Everything that determines a run's outputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset directory; synthetic data from `synthetic` is used when absent.
    pub dataset: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub cv: CvConfig,
    pub analysis: AnalysisConfig,
    pub ablation: AblationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { folds: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub proportions: Vec<f64>,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            proportions: vec![0.4, 0.7, 1.0],
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub k_values: Vec<usize>,
    pub fam_k_values: Vec<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            k_values: (1..=10).collect(),
            fam_k_values: vec![2, 5, 8],
        }
    }
}

impl RunConfig {
    /// Reads a config file, TOML when the extension is `.toml`, JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.cv.folds < 2 {
            return Err(Error::Config(format!(
                "cv.folds: {} is below 2",
                self.cv.folds
            )));
        }
        if let Some(p) = self
            .analysis
            .proportions
            .iter()
            .find(|&&p| !(p > 0.0 && p <= 1.0))
        {
            return Err(Error::Config(format!(
                "analysis.proportions: {p} is not in (0, 1]"
            )));
        }
        if self
            .ablation
            .k_values
            .iter()
            .chain(&self.ablation.fam_k_values)
            .any(|&k| k == 0)
        {
            return Err(Error::Config("ablation: k values must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the pretty JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// First-line comment for emitted CSVs.
    pub fn stamp(&self) -> String {
        format!("config-sha256: {}", self.hash())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "freqfusion",
    version,
    about = "Frequency-feature fusion GCN for fNIRS classification"
)]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (manifest plus one CSV per subject).
    Generate(GenerateArgs),
    /// Extract biomarkers and connectivity priors from a dataset.
    Extract(ExtractArgs),
    /// Point-biserial screening heatmaps on stratified subsamples.
    Analyze(AnalyzeArgs),
    /// Cross-validated training with per-fold metrics, ROC curves and checkpoints.
    Train(TrainArgs),
    /// Sweep k or toggle the frequency attention module.
    Ablate(AblateArgs),
    /// Render the k-sweep plot and a text summary of a finished run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML or JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    /// Number of subjects [config default: 200].
    #[arg(long)]
    pub n_subjects: Option<usize>,
    /// Generator seed [config default: 2024].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of label-1 subjects [config default: 0.5].
    #[arg(long)]
    pub positive_fraction: Option<f64>,
    /// Planted effect amplitude [config default: 3.0].
    #[arg(long)]
    pub effect_amplitude: Option<f64>,
    /// Background noise standard deviation [config default: 1.0].
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Retained DFT components [config default: 8].
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Retained DFT components [config default: 8].
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated subsample proportions [config default: 0.4,0.7,1.0].
    #[arg(long, value_delimiter = ',')]
    pub proportions: Option<Vec<f64>>,
    /// Subsampling seed [config default: 2024].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// Dataset directory or manifest file; synthetic data from the config when omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Retained DFT components [config default: 8].
    #[arg(long)]
    pub k: Option<usize>,
    /// Embedding width d_k [config default: 16].
    #[arg(long)]
    pub d_k: Option<usize>,
    /// GCN layers per stack [config default: 2].
    #[arg(long)]
    pub gcn_layers: Option<usize>,
    /// GRU hidden size [config default: 32].
    #[arg(long)]
    pub gru_hidden: Option<usize>,
    /// GRU layers [config default: 3].
    #[arg(long)]
    pub gru_layers: Option<usize>,
    /// Disable the frequency attention module [config default: enabled].
    #[arg(long)]
    pub no_fam: bool,
    /// Training epochs [config default: 100].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size [config default: 16].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Base learning rate [config default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Fold and initialization seed [config default: 2024].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cross-validation folds [config default: 4].
    #[arg(long)]
    pub folds: Option<usize>,
    /// Synthetic subjects when no dataset is given [config default: 200].
    #[arg(long)]
    pub n_subjects: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Also run the logistic-regression baseline on the same folds.
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    /// One row per k in `ablation.k_values`.
    K,
    /// With and without FAM for each k in `ablation.fam_k_values`.
    Fam,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Which ablation to run.
    #[arg(long, value_enum, default_value_t = Sweep::K)]
    pub sweep: Sweep,
    /// Comma-separated k values [config default: 1..10 for k, 2,5,8 for fam].
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `train` or `ablate`.
    #[arg(long)]
    pub run: PathBuf,
    /// Where to write the plot and summary [default: the run directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    common
        .config
        .as_deref()
        .map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn override_synthetic(cfg: &mut SyntheticConfig, args: &SyntheticArgs) {
    if let Some(n) = args.n_subjects {
        cfg.n_subjects = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(f) = args.positive_fraction {
        cfg.positive_fraction = f;
    }
    if let Some(a) = args.effect_amplitude {
        cfg.effect_amplitude = a;
    }
    if let Some(s) = args.noise_sd {
        cfg.noise_sd = s;
    }
}

fn override_training(cfg: &mut RunConfig, args: &TrainingArgs) {
    if let Some(d) = &args.dataset {
        cfg.dataset = Some(d.clone());
    }
    let m = &mut cfg.model;
    m.k = args.k.unwrap_or(m.k);
    m.d_k = args.d_k.unwrap_or(m.d_k);
    m.gcn_layers = args.gcn_layers.unwrap_or(m.gcn_layers);
    m.gru_hidden = args.gru_hidden.unwrap_or(m.gru_hidden);
    m.gru_layers = args.gru_layers.unwrap_or(m.gru_layers);
    if args.no_fam {
        m.fam_enabled = false;
    }
    let t = &mut cfg.train;
    t.epochs = args.epochs.unwrap_or(t.epochs);
    t.batch_size = args.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = args.lr.unwrap_or(t.learning_rate);
    t.seed = args.seed.unwrap_or(t.seed);
    cfg.cv.folds = args.folds.unwrap_or(cfg.cv.folds);
    cfg.synthetic.n_subjects = args.n_subjects.unwrap_or(cfg.synthetic.n_subjects);
}

/// Validates the config, creates `out` and writes `config.json` there.
fn prepare(cfg: &RunConfig, out: &Path) -> Result<String> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join("config.json"), cfg.to_json().as_bytes())?;
    Ok(cfg.stamp())
}

/// Features at extraction depth `k` from a dataset directory or, without
/// one, from the configured synthetic generator.
fn load_features(cfg: &RunConfig, k: usize) -> Result<Vec<SubjectFeatures>> {
    match &cfg.dataset {
        Some(dir) => {
            let reader = DatasetReader::open(dir)?;
            let extractor = Extractor::new(&reader.manifest, k)?;
            extractor.extract_all(reader.len(), |i| reader.load(i))
        }
        None => {
            let generator = SyntheticGenerator::new(cfg.synthetic.clone())?;
            let extractor = Extractor::new(generator.manifest(), k)?;
            extractor.extract_all(generator.len(), |i| Ok(generator.subject(i)))
        }
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    override_synthetic(&mut cfg.synthetic, &args.synthetic);
    cfg.synthetic.validate()?;
    let (manifest, records) = generate_synthetic(&cfg.synthetic)?;
    let out = &args.common.out;
    write_dataset(&manifest, &records, out)?;
    prepare(&cfg, out)?;
    println!("wrote {} subjects to {}", records.len(), out.display());
    Ok(())
}

/// Per-subject extraction output: summary statistics and biomarkers per block.
#[derive(Serialize)]
struct BiomarkerFile<'a> {
    id: &'a str,
    label: u8,
    k: usize,
    blocks: Vec<BiomarkerBlock<'a>>,
}

#[derive(Serialize)]
struct BiomarkerBlock<'a> {
    period: Period,
    substance: Substance,
    otf: &'a Matrix<f64>,
    biomarkers: &'a [Biomarker<f64>],
}

fn matrix_rows(m: &Matrix<f64>) -> (Vec<String>, Vec<Vec<String>>) {
    let header = (0..m.cols()).map(|c| format!("ch{c:02}")).collect();
    let rows = (0..m.rows())
        .map(|r| m.row(r).iter().map(f64::to_string).collect())
        .collect();
    (header, rows)
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    cfg.dataset = Some(args.dataset.clone());
    cfg.model.k = args.k.unwrap_or(cfg.model.k);
    let out = &args.common.out;
    let stamp = prepare(&cfg, out)?;
    let features = load_features(&cfg, cfg.model.k)?;
    for f in &features {
        let file = BiomarkerFile {
            id: &f.id,
            label: f.label,
            k: f.k,
            blocks: f
                .blocks
                .iter()
                .map(|b| BiomarkerBlock {
                    period: b.period,
                    substance: b.substance,
                    otf: &b.otf_raw,
                    biomarkers: &b.biomarkers,
                })
                .collect(),
        };
        let json = serde_json::to_vec_pretty(&file).map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(
            &out.join("biomarkers").join(format!("{}.json", f.id)),
            &json,
        )?;
    }
    let all: Vec<usize> = (0..features.len()).collect();
    let stats = FoldStats::fit(&features, &all, cfg.model.k, &LeakageGuard::default())?;
    for prior in &stats.priors {
        for (relation, m) in [("corr", &prior.corr), ("cohe", &prior.cohe)] {
            let (header, rows) = matrix_rows(m);
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let name = format!(
                "{}_{}_{relation}.csv",
                prior.period.name(),
                prior.substance.name()
            );
            report::write_csv(&out.join("priors").join(name), Some(&stamp), &header, &rows)?;
        }
    }
    println!(
        "extracted {} subjects at k = {} into {}",
        features.len(),
        cfg.model.k,
        out.display()
    );
    Ok(())
}

/// Heatmap file name for a period and subsample proportion.
pub fn heatmap_name(period: Period, proportion: f64) -> String {
    format!("pb_heatmap_{}_p{proportion}.csv", period.name())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    cfg.dataset = Some(args.dataset.clone());
    cfg.model.k = args.k.unwrap_or(cfg.model.k);
    if let Some(p) = &args.proportions {
        cfg.analysis.proportions = p.clone();
    }
    cfg.analysis.seed = args.seed.unwrap_or(cfg.analysis.seed);
    let out = &args.common.out;
    let stamp = prepare(&cfg, out)?;
    let features = load_features(&cfg, cfg.model.k)?;
    let screenings = screen_features(
        &features,
        cfg.model.k,
        &cfg.analysis.proportions,
        cfg.analysis.seed,
    )?;
    let mut summary = Vec::new();
    for s in &screenings {
        for map in s.maps.iter().filter(|m| m.substance == Substance::HbO) {
            report::write_heatmap(
                &out.join(heatmap_name(map.period, s.proportion)),
                map,
                Some(&stamp),
            )?;
        }
        for map in &s.maps {
            let max_abs = map.r.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            summary.push(vec![
                s.proportion.to_string(),
                s.n_subjects.to_string(),
                map.period.name().to_string(),
                map.substance.name().to_string(),
                max_abs.to_string(),
                map.undefined_cells.to_string(),
            ]);
        }
    }
    report::write_csv(
        &out.join("pb_summary.csv"),
        Some(&stamp),
        &[
            "proportion",
            "n_subjects",
            "period",
            "substance",
            "max_abs_r",
            "undefined_cells",
        ],
        &summary,
    )?;
    println!(
        "screened {} subjects at {} proportions into {}",
        features.len(),
        screenings.len(),
        out.display()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(path, &json)
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    override_training(&mut cfg, &args.training);
    let out = &args.common.out;
    let stamp = prepare(&cfg, out)?;
    let features = load_features(&cfg, cfg.model.k)?;
    let plan = default_plan(&features, cfg.cv.folds, &cfg.train)?;
    let trained = cross_validate_trained(&features, &plan, &cfg.model, &cfg.train)?;
    for t in &trained {
        checkpoint::save(
            &t.params,
            &out.join("checkpoints")
                .join(format!("fold{}.ckpt", t.result.fold)),
        )?;
    }
    let report = FoldReport::new(trained.into_iter().map(|t| t.result).collect());
    report::write_fold_report(out, &report, Some(&stamp))?;
    write_json(&out.join("report.json"), &report)?;
    print_mean("gcn", &report);
    if args.baseline {
        let baseline = baseline_lr_tf(&features, &plan, &cfg.train)?;
        report::write_fold_report(&out.join("baseline_lr_tf"), &baseline, Some(&stamp))?;
        write_json(&out.join("baseline_lr_tf").join("report.json"), &baseline)?;
        print_mean("lr(tf)", &baseline);
    }
    Ok(())
}

fn print_mean(name: &str, report: &FoldReport) {
    let m = &report.mean_best;
    println!(
        "{name}: accuracy {:.3} precision {:.3} recall {:.3} f1 {:.3} auc {:.3}",
        m.accuracy, m.precision, m.recall, m.f1, m.auc
    );
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    override_training(&mut cfg, &args.training);
    if let Some(ks) = &args.k_values {
        match args.sweep {
            Sweep::K => cfg.ablation.k_values = ks.clone(),
            Sweep::Fam => cfg.ablation.fam_k_values = ks.clone(),
        }
    }
    let out = &args.common.out;
    let stamp = prepare(&cfg, out)?;
    let ks = match args.sweep {
        Sweep::K => &cfg.ablation.k_values,
        Sweep::Fam => &cfg.ablation.fam_k_values,
    };
    let k_max = ks
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::Config("ablation: no k values".into()))?;
    let features = load_features(&cfg, k_max)?;
    let plan = default_plan(&features, cfg.cv.folds, &cfg.train)?;
    match args.sweep {
        Sweep::K => {
            let rows = run_ablation_k(&features, &plan, ks, &cfg.model, &cfg.train)?;
            report::write_ablation_k(&out.join("ablation_k.csv"), &rows, Some(&stamp))?;
            write_json(&out.join("ablation_k.json"), &rows)?;
        }
        Sweep::Fam => {
            let rows = run_ablation_fam(&features, &plan, ks, &cfg.model, &cfg.train)?;
            report::write_ablation_fam(&out.join("ablation_fam.csv"), &rows, Some(&stamp))?;
            write_json(&out.join("ablation_fam.json"), &rows)?;
            println!("mean F1 gain from FAM: {:+.4}", harness::fam_f1_gain(&rows));
        }
    }
    println!("ablation written to {}", out.display());
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Data {
            subject: path.display().to_string(),
            detail: e.to_string(),
        })
}

fn summarize_rows(s: &mut String, title: &str, rows: &[AblationRow]) {
    let _ = writeln!(s, "{title}");
    let _ = writeln!(
        s,
        "{:>4} {:>5} {:>9} {:>9} {:>9} {:>9}",
        "k", "fam", "accuracy", "precision", "recall", "f1"
    );
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{:>4} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            r.k, r.fam_enabled, m.accuracy, m.precision, m.recall, m.f1
        );
    }
    let _ = writeln!(s);
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    let run = &args.run;
    let out = args.out.as_deref().unwrap_or(run);
    let cfg: RunConfig = read_json(&run.join("config.json"))?
        .ok_or_else(|| Error::MissingFile(run.join("config.json")))?;
    let mut summary = format!("run {}\n{}\n\n", run.display(), cfg.stamp());
    let mut found = false;
    if let Some(report) = read_json::<FoldReport>(&run.join("report.json"))? {
        found = true;
        let _ = writeln!(summary, "cross-validation ({} folds)", report.folds.len());
        let _ = writeln!(
            summary,
            "{:>5} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "fold", "epoch", "accuracy", "precision", "recall", "f1", "auc"
        );
        for f in &report.folds {
            let m = &f.best;
            let _ = writeln!(
                summary,
                "{:>5} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                f.fold, f.best_epoch, m.accuracy, m.precision, m.recall, m.f1, m.auc
            );
        }
        for (name, m) in [("best", &report.mean_best), ("last", &report.mean_last)] {
            let _ = writeln!(
                summary,
                "{:>5} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                "mean", name, m.accuracy, m.precision, m.recall, m.f1, m.auc
            );
        }
        let _ = writeln!(summary);
    }
    if let Some(rows) = read_json::<Vec<AblationRow>>(&run.join("ablation_k.json"))? {
        found = true;
        write_atomic(
            &out.join("ablation_k.svg"),
            report::ablation_k_svg(&rows).as_bytes(),
        )?;
        summarize_rows(&mut summary, "k sweep", &rows);
    }
    if let Some(rows) = read_json::<Vec<AblationRow>>(&run.join("ablation_fam.json"))? {
        found = true;
        summarize_rows(&mut summary, "FAM ablation", &rows);
        let _ = writeln!(
            summary,
            "mean F1 gain from FAM: {:+.4}",
            harness::fam_f1_gain(&rows)
        );
    }
    if !found {
        return Err(Error::MissingFile(run.join("report.json")));
    }
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Train(a) => cmd_train(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
