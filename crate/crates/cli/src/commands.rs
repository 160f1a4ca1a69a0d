//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use spectc_core::compactor::{
    compact, compute_metrics, cost_savings, CompactionConfig, CompactionReport, CostReport,
    OrderingStrategy, StepMetrics,
};
use spectc_core::datamodel::{
    load_specs, read_dataset, write_dataset, Dataset, Label, SpecificationDef,
};
use spectc_core::grid::{build_lookup_table, load_lut, write_lut, GridSpec, DEFAULT_BOUNDS};
use spectc_core::guardband::GuardBandModel;
use spectc_core::rng::derive;
use spectc_core::svc::KernelSpec;
use spectc_core::syngen::{
    generate, generate_planted, population_yield, GeneratorConfig, GeneratorKind,
};

use crate::manifest::RunManifest;
use crate::{CliError, GlobalOpts};


/// Informational output; write errors (for example a closed pipe) are not
/// failures of the run itself.
fn say(args: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{args}");
}

fn ensure_out_dir(global: &GlobalOpts) -> Result<PathBuf, CliError> {
    let dir = global.out_dir();
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))?;
    Ok(dir)
}

fn load_config_file<T: for<'de> Deserialize<'de>>(
    path: Option<&PathBuf>,
) -> Result<Option<T>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
    let parsed = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
    Ok(Some(parsed))
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct GenerateArgs {
    /// Population family: opamp, accel or planted.
    #[arg(long)]
    kind: Option<String>,
    /// Number of device instances.
    #[arg(long)]
    n: Option<usize>,
    /// Latent-parameter variation (fraction of nominal).
    #[arg(long)]
    param_variation: Option<f64>,
    /// Measurement-noise scale.
    #[arg(long)]
    noise: Option<f64>,
}

pub fn cmd_generate(global: &GlobalOpts, args: GenerateArgs) -> Result<(), CliError> {
    let out = ensure_out_dir(global)?;
    let mut manifest = RunManifest::new("generate", global.seed(), global.config().cloned());

    let file_cfg: Option<GeneratorConfig> = load_config_file(global.config())?;
    let kind = match args.kind.as_deref() {
        Some("opamp") => GeneratorKind::OpAmpLike,
        Some("accel") => GeneratorKind::AccelTriTemp,
        Some("planted") => GeneratorKind::PlantedRedundancy,
        Some(other) => return Err(CliError::config(format!("unknown kind `{other}`"))),
        None => match &file_cfg {
            Some(cfg) => cfg.kind,
            None => return Err(CliError::config("--kind is required (opamp|accel|planted)")),
        },
    };
    let mut cfg = match kind {
        GeneratorKind::OpAmpLike => GeneratorConfig::opamp(0, global.seed()),
        GeneratorKind::AccelTriTemp => GeneratorConfig::accel(0, global.seed()),
        GeneratorKind::PlantedRedundancy => GeneratorConfig::planted(0, global.seed()),
    };
    if let Some(file_cfg) = file_cfg {
        cfg = GeneratorConfig { kind, seed: global.seed(), ..file_cfg };
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(v) = args.param_variation {
        cfg.param_variation = v;
    }
    if let Some(noise) = args.noise {
        cfg.noise_scale = noise;
    }
    if cfg.n == 0 {
        return Err(CliError::config("n must be >= 1"));
    }

    let (ds, truth_json) = match kind {
        GeneratorKind::PlantedRedundancy => {
            let (ds, truth) = generate_planted(&cfg)?;
            (ds, Some(serde_json::to_string_pretty(&truth).expect("truth serialization")))
        }
        _ => (generate(&cfg)?, None),
    };
    manifest.phase("generate");

    let mut csv_bytes = Vec::new();
    write_dataset(&mut csv_bytes, &ds)?;
    manifest.write_output(&out.join("dataset.csv"), &csv_bytes)?;
    let specs_json = serde_json::to_string_pretty(ds.specs()).expect("spec serialization");
    manifest.write_output(&out.join("specs.json"), specs_json.as_bytes())?;
    if let Some(truth) = truth_json {
        manifest.write_output(&out.join("truth.json"), truth.as_bytes())?;
    }
    manifest.phase("write");

    if !global.quiet() {
        say(format_args!(
            "generated {} records over {} specs, yield {:.1}%",
            ds.len(),
            ds.specs().len(),
            100.0 * population_yield(&ds)
        ));
    }
    manifest.finish(&out)
}

// ---------------------------------------------------------------------------
// compact
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct CompactArgs {
    /// Training population CSV.
    #[arg(long)]
    train: PathBuf,
    /// Held-out test population CSV.
    #[arg(long)]
    test: PathBuf,
    /// Specification-set JSON.
    #[arg(long)]
    specs: PathBuf,
    /// Prediction-error tolerance e_T.
    #[arg(long, value_name = "FRACTION")]
    e_t: Option<f64>,
    /// Guard-band half-width (normalized range units).
    #[arg(long)]
    delta: Option<f64>,
    /// Candidate order: `marginal` or a comma-separated name list.
    #[arg(long)]
    order: Option<String>,
    /// Box constraint of the classifier.
    #[arg(long)]
    c: Option<f64>,
    /// Radial kernel width, or `auto` for 1/dim.
    #[arg(long)]
    gamma: Option<String>,
    /// Grid-compact the training data with this many bins per dimension.
    #[arg(long)]
    grid_bins: Option<usize>,
    /// Dimensions of the training-compaction grid (default: all specs).
    #[arg(long, value_delimiter = ',')]
    grid_dims: Vec<String>,
    /// Run one compaction per training-set size and emit per-size series.
    #[arg(long, value_delimiter = ',')]
    train_sizes: Vec<usize>,
    /// Test stages for the cost block.
    #[arg(long)]
    stages: Option<u32>,
    /// Per-stage test cost for the cost block.
    #[arg(long)]
    cost: Option<f64>,
}

#[derive(Deserialize, Default)]
struct CompactFileConfig {
    e_t: Option<f64>,
    delta: Option<f64>,
    order: Option<String>,
    c: Option<f64>,
    gamma: Option<String>,
    grid_bins: Option<usize>,
    #[serde(default)]
    grid_dims: Vec<String>,
    stages: Option<u32>,
    cost: Option<f64>,
}

fn parse_order(text: &str) -> OrderingStrategy {
    if text == "marginal" {
        OrderingStrategy::MarginalScore
    } else {
        OrderingStrategy::FixedList(text.split(',').map(|s| s.trim().to_string()).collect())
    }
}

fn steps_csv(steps: &[StepMetrics]) -> Vec<u8> {
    let mut text = String::from(
        "candidate,accepted,n_retained,e_p,yield_loss_pct,defect_escape_pct,guard_pct,n_eval,n_guard\n",
    );
    for s in steps {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.candidate,
            s.accepted,
            s.n_retained,
            s.metrics.e_p,
            s.metrics.yield_loss_pct,
            s.metrics.defect_escape_pct,
            s.metrics.guard_pct,
            s.metrics.n_eval,
            s.metrics.n_guard
        ));
    }
    text.into_bytes()
}

/// Cost block over the final model's test-set evaluation: stage 1 is the
/// retained set; guard-band devices rerun all stages.
fn cost_block(
    test: &Dataset,
    retained: &[String],
    history: &[StepMetrics],
    stages: u32,
    per_stage_cost: f64,
) -> Result<Option<CostReport>, CliError> {
    let Some(last) = history.iter().rev().find(|s| s.accepted) else {
        return Ok(None);
    };
    let pass1 = test
        .label_pass_fail(retained)?
        .labels()
        .iter()
        .filter(|l| **l == Label::Pass)
        .count();
    let report = cost_savings(test.len(), last.metrics.n_guard, pass1, stages, per_stage_cost)?;
    Ok(Some(report))
}

pub fn cmd_compact(global: &GlobalOpts, args: CompactArgs) -> Result<(), CliError> {
    let out = ensure_out_dir(global)?;
    let mut manifest = RunManifest::new("compact", global.seed(), global.config().cloned());
    let file_cfg: CompactFileConfig = load_config_file(global.config())?.unwrap_or_default();

    let specs = load_specs(&args.specs)?;
    manifest.record_input(&args.specs);
    let train_raw = load_dataset_at(&args.train, specs.clone())?;
    manifest.record_input(&args.train);
    let test_raw = load_dataset_at(&args.test, specs.clone())?;
    manifest.record_input(&args.test);
    let train = train_raw.normalize()?;
    let test = test_raw.normalize()?;
    manifest.phase("load");

    let e_t = args.e_t.or(file_cfg.e_t).unwrap_or(0.02);
    let delta = args.delta.or(file_cfg.delta).unwrap_or(0.01);
    let mut cfg = CompactionConfig::new(e_t, delta, global.seed());
    let order_text = args.order.or(file_cfg.order);
    cfg.ordering = order_text.as_deref().map(parse_order).unwrap_or(OrderingStrategy::MarginalScore);
    if let Some(c) = args.c.or(file_cfg.c) {
        cfg.hp.c = c;
    }
    match args.gamma.or(file_cfg.gamma).as_deref() {
        None | Some("auto") => {
            cfg.auto_gamma = true;
        }
        Some(text) => {
            let gamma: f64 = text
                .parse()
                .map_err(|_| CliError::config(format!("--gamma must be a number or `auto`, got `{text}`")))?;
            cfg.hp.kernel = KernelSpec::Rbf { gamma };
            cfg.auto_gamma = false;
        }
    }
    if let Some(bins) = args.grid_bins.or(file_cfg.grid_bins) {
        let dims = if !args.grid_dims.is_empty() {
            args.grid_dims.clone()
        } else if !file_cfg.grid_dims.is_empty() {
            file_cfg.grid_dims.clone()
        } else {
            train.spec_names()
        };
        cfg.grid = Some(GridSpec::uniform(dims, bins)?);
    }
    let stages = args.stages.or(file_cfg.stages).unwrap_or(2);
    let per_stage_cost = args.cost.or(file_cfg.cost).unwrap_or(1.0);

    if args.train_sizes.is_empty() {
        let result = compact(&train, &test, &cfg)?;
        manifest.phase("compact");
        let cost = cost_block(&test, &result.retained, &result.history, stages, per_stage_cost)?;
        let report = CompactionReport {
            config: cfg,
            retained: result.retained.clone(),
            eliminated: result.eliminated.clone(),
            steps: result.history.clone(),
            cost: cost.clone(),
        };
        let report_json = serde_json::to_string_pretty(&report).expect("report serialization");
        manifest.write_output(&out.join("report.json"), report_json.as_bytes())?;
        manifest.write_output(&out.join("steps.csv"), &steps_csv(&result.history))?;
        if let Some(model) = &result.final_model {
            manifest.write_output(&out.join("model.json"), model.to_json().as_bytes())?;
        }
        manifest.phase("write");
        if !global.quiet() {
            say(format_args!(
                "eliminated {} of {} specs: [{}]",
                result.eliminated.len(),
                train.specs().len(),
                result.eliminated.join(", ")
            ));
            if let Some(cost) = &cost {
                say(format_args!(
                    "cost: ${:.2} -> ${:.2} ({:.1}% saved)",
                    cost.baseline_cost, cost.compacted_cost, cost.savings_pct
                ));
            }
        }
    } else {
        // Training-size sweep: one series per size, each on a seeded subset.
        for &size in &args.train_sizes {
            if size == 0 || size > train.len() {
                return Err(CliError::config(format!(
                    "train size {size} outside 1..={}",
                    train.len()
                )));
            }
            let (subset, _) = train.split_count(size, derive(global.seed(), 9000 + size as u64))?;
            let result = compact(&subset, &test, &cfg)?;
            manifest.write_output(
                &out.join(format!("steps_{size}.csv")),
                &steps_csv(&result.history),
            )?;
            if !global.quiet() {
                say(format_args!(
                    "train size {size}: eliminated {} of {} specs",
                    result.eliminated.len(),
                    train.specs().len()
                ));
            }
        }
        manifest.phase("sweep");
    }
    manifest.finish(&out)
}

fn load_dataset_at(path: &Path, specs: Vec<SpecificationDef>) -> Result<Dataset, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::io(format!("opening {}: {e}", path.display())))?;
    Ok(read_dataset(std::io::BufReader::new(file), specs)?)
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct ClassifyArgs {
    /// Guard-band model JSON.
    #[arg(long, conflicts_with = "lut")]
    model: Option<PathBuf>,
    /// Exported lookup-table file.
    #[arg(long)]
    lut: Option<PathBuf>,
    /// Device measurements CSV (id + one column per measured spec).
    #[arg(long)]
    data: PathBuf,
    /// Specification-set JSON (required to normalize measurements).
    #[arg(long)]
    specs: PathBuf,
    /// Per-stage test cost; enables the cost block.
    #[arg(long)]
    cost: Option<f64>,
    /// Test stages for the cost block.
    #[arg(long, default_value_t = 3)]
    stages: u32,
}

/// Load a measurements CSV whose columns are any subset of the defined
/// specifications, in any order.
fn load_measurements(path: &Path, defs: &[SpecificationDef]) -> Result<Dataset, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::io(format!("opening {}: {e}", path.display())))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let headers = rdr
        .headers()
        .map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?
        .clone();
    if headers.get(0) != Some("id") {
        return Err(CliError::config("first column must be `id`"));
    }
    let mut ordered = Vec::new();
    for col in headers.iter().skip(1) {
        let def = defs
            .iter()
            .find(|d| d.name == col)
            .ok_or_else(|| CliError::config(format!("column `{col}` has no specification definition")))?;
        ordered.push(def.clone());
    }
    drop(rdr);
    load_dataset_at(path, ordered)
}

pub fn cmd_classify(global: &GlobalOpts, args: ClassifyArgs) -> Result<(), CliError> {
    let out = ensure_out_dir(global)?;
    let mut manifest = RunManifest::new("classify", global.seed(), global.config().cloned());

    let defs = load_specs(&args.specs)?;
    manifest.record_input(&args.specs);
    let raw = load_measurements(&args.data, &defs)?;
    manifest.record_input(&args.data);
    let data = raw.normalize()?;
    manifest.phase("load");

    enum Backend {
        Model(Box<GuardBandModel>),
        Table(spectc_core::LookupTable),
    }
    let backend = match (&args.model, &args.lut) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
            manifest.record_input(path);
            Backend::Model(Box::new(GuardBandModel::from_json(&text)?))
        }
        (None, Some(path)) => {
            manifest.record_input(path);
            Backend::Table(load_lut(path)?)
        }
        _ => return Err(CliError::config("exactly one of --model or --lut is required")),
    };

    let feature_names: Vec<String> = match &backend {
        Backend::Model(m) => m.retained_specs().to_vec(),
        Backend::Table(t) => t.grid().dims().to_vec(),
    };
    for name in &feature_names {
        if data.spec_index(name).is_none() {
            return Err(CliError::config(format!(
                "dataset is missing the retained specification column `{name}`"
            )));
        }
    }
    let features = data.feature_matrix(&feature_names)?;
    let dispositions: Vec<spectc_core::TriState> = match &backend {
        Backend::Model(m) => features
            .iter()
            .map(|x| m.classify(x))
            .collect::<Result<_, _>>()?,
        Backend::Table(t) => features
            .iter()
            .map(|x| t.classify(x))
            .collect::<Result<_, _>>()?,
    };
    manifest.phase("classify");

    let mut csv_text = String::from("id,disposition\n");
    for (rec, d) in data.records().iter().zip(&dispositions) {
        let label = match d {
            spectc_core::TriState::Good => "Good",
            spectc_core::TriState::Bad => "Bad",
            spectc_core::TriState::GuardBand => "GuardBand",
        };
        csv_text.push_str(&format!("{},{label}\n", rec.id));
    }
    manifest.write_output(&out.join("dispositions.csv"), csv_text.as_bytes())?;

    // Metrics need ground truth for the predicted (eliminated) specs.
    if let Backend::Model(model) = &backend {
        let have_truth = model
            .eliminated_specs()
            .iter()
            .all(|name| data.spec_index(name).is_some());
        if have_truth {
            let truth = data.label_pass_fail(model.eliminated_specs())?;
            let metrics = compute_metrics(&truth, &dispositions)?;
            let summary = serde_json::to_string_pretty(&metrics).expect("metrics serialization");
            manifest.write_output(&out.join("summary.json"), summary.as_bytes())?;
            if !global.quiet() {
                say(format_args!(
                    "DE {:.1}% YL {:.1}% GB {:.1}%",
                    metrics.defect_escape_pct, metrics.yield_loss_pct, metrics.guard_pct
                ));
            }
        }
    }

    if let Some(per_stage_cost) = args.cost {
        let n_guard = dispositions
            .iter()
            .filter(|d| **d == spectc_core::TriState::GuardBand)
            .count();
        let pass1 = data
            .label_pass_fail(&feature_names)?
            .labels()
            .iter()
            .filter(|l| **l == Label::Pass)
            .count();
        let report = cost_savings(data.len(), n_guard, pass1, args.stages, per_stage_cost)?;
        if !global.quiet() {
            say(format_args!(
                "cost: ${:.2} -> ${:.2} ({:.1}% saved)",
                report.baseline_cost, report.compacted_cost, report.savings_pct
            ));
        }
    }
    manifest.phase("write");
    manifest.finish(&out)
}

// ---------------------------------------------------------------------------
// export-lut
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct ExportLutArgs {
    /// Guard-band model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Bins per dimension.
    #[arg(long)]
    bins: usize,
    /// Grid bounds (normalized units), as `lo,hi`.
    #[arg(long)]
    bounds: Option<String>,
    /// Maximum cell count the table may materialize.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u128,
}

pub fn cmd_export_lut(global: &GlobalOpts, args: ExportLutArgs) -> Result<(), CliError> {
    let out = ensure_out_dir(global)?;
    let mut manifest = RunManifest::new("export-lut", global.seed(), global.config().cloned());

    let text = fs::read_to_string(&args.model)
        .map_err(|e| CliError::io(format!("reading {}: {e}", args.model.display())))?;
    manifest.record_input(&args.model);
    let model = GuardBandModel::from_json(&text)?;

    let bounds = match &args.bounds {
        None => DEFAULT_BOUNDS,
        Some(text) => {
            let parts: Vec<&str> = text.split(',').collect();
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::config(format!("bad bounds `{text}`")))
            };
            match parts.as_slice() {
                [lo, hi] => (parse(lo)?, parse(hi)?),
                _ => return Err(CliError::config(format!("bad bounds `{text}`"))),
            }
        }
    };
    let dims = model.retained_specs().to_vec();
    let n_dims = dims.len();
    let grid = GridSpec::new(dims, vec![args.bins; n_dims], vec![bounds; n_dims])?;
    let lut = build_lookup_table(&model, grid, args.budget)?;
    manifest.phase("build");

    let mut bytes = Vec::new();
    write_lut(&mut bytes, &lut)?;
    manifest.write_output(&out.join("table.lut"), &bytes)?;
    manifest.phase("write");

    if !global.quiet() {
        let (good, bad, guard) = lut.histogram();
        say(format_args!(
            "{} cells: G {good} B {bad} U {guard}",
            lut.attributes().len()
        ));
    }
    manifest.finish(&out)
}
