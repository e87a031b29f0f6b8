//! Pipeline stages and their artifacts.
//!
//! Every run is keyed by a content hash of the resolved configuration and
//! all input files, and owns a directory `out/<run-id>/` with one
//! subdirectory per stage:
//!
//! - `ingest.json` — normalized dataset, scaling record, affinity graph
//! - `train/<model>/model.json`, `losses.csv`
//! - `agg/<spatial>__<temporal>__K<k>.json` — aggregation artifacts
//! - `build/<cell>.mps` (+ name map), `build/<cell>.stats.json`
//! - `solve/<cell>.solution.csv`, `solve/<cell>.summary.json`
//! - `ub/<cell>.json`, `ledger.csv`
//! - `report/spatial_best.csv`, `report/temporal_best.csv`,
//!   `report/genmix.csv`
//!
//! Artifacts are written atomically (temp file + rename) and re-running a
//! stage overwrites them deterministically: byte-identical for identical
//! config, inputs, and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stagg_core::aggregate::{
    spatial_vote, temporal_baseline, temporal_from_latents, weighted_spatial_vote, BaselineMode,
    SpatialAggregation, SpatioTemporalAggregation, TemporalAggregation,
};
use stagg_core::autoencoder::{train, TrainedAutoencoder};
use stagg_core::features::{
    assemble_stacked, build_period_features, flatten, normalize, Dataset, DatasetManifest,
    ScalingRecord, TimeSeriesTable,
};
use stagg_core::graph::{
    build_affinity, euclidean, renormalized_laplacian, AffinityMatrix, CatalogNode, NodeCatalog,
    RenormalizedLaplacian,
};
use stagg_core::matrix::Matrix;
use stagg_opt::branch_bound::solve_milp;
use stagg_opt::gep::io::load_instance_dir;
use stagg_opt::gep::{aggregate_instance, build_gep, GepInstance, NodeGrouping};
use stagg_opt::milp::SolveStatus;
use stagg_opt::mps::{export_mps, write_solution_csv};
use stagg_opt::ub::{upper_bound, UbReport};

use crate::config::RunConfig;

pub struct RunContext {
    pub config: RunConfig,
    pub config_dir: PathBuf,
    pub run_dir: PathBuf,
    pub run_id: String,
    pub jobs: usize,
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().ok_or_else(|| anyhow!("no parent for {}", path.display()))?;
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().unwrap().to_string_lossy()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_json_artifact<T: DeserializeOwned>(path: &Path, producer: &str) -> Result<T> {
    if !path.exists() {
        bail!(
            "missing artifact {}; run `stagg {}` first",
            path.display(),
            producer
        );
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

/// Simple fan-out over worker threads; results keep item order.
pub fn parallel_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send + Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut results: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let slots: Vec<std::sync::Mutex<&mut Option<R>>> =
        results.iter_mut().map(std::sync::Mutex::new).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                **slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    results.into_iter().map(|r| r.unwrap()).collect()
}

impl RunContext {
    /// Load the config, apply CLI overrides, hash config + inputs into the
    /// run id, and set up the run directory.
    pub fn prepare(
        config_path: &Path,
        out_override: Option<PathBuf>,
        seed_override: Option<u64>,
        jobs: usize,
    ) -> Result<RunContext> {
        let mut config = RunConfig::load(config_path)?;
        if let Some(seed) = seed_override {
            config.training.seed = seed;
        }
        let config_dir = config_path
            .parent()
            .unwrap_or(Path::new("."))
            .to_path_buf();

        let out_root = out_override
            .or_else(|| std::env::var_os("STAGG_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(&config.output.dir));

        let resolved = toml::to_string_pretty(&config)?;
        let mut hasher = Sha256::new();
        hasher.update(resolved.as_bytes());
        for path in input_files(&config, &config_dir)? {
            hasher.update(path.file_name().unwrap_or_default().to_string_lossy().as_bytes());
            let bytes = std::fs::read(&path)
                .with_context(|| format!("cannot read input {}", path.display()))?;
            hasher.update(&bytes);
        }
        let run_id = hex::encode(&hasher.finalize()[..6]);
        let run_dir = out_root.join(&run_id);
        std::fs::create_dir_all(&run_dir)?;
        write_atomic(&run_dir.join("config.resolved.toml"), resolved.as_bytes())?;

        Ok(RunContext {
            config,
            config_dir,
            run_dir,
            run_id,
            jobs,
        })
    }

    fn instance_dir(&self) -> PathBuf {
        self.config.resolve(&self.config_dir, &self.config.dataset.instance)
    }

    fn dataset_manifest_path(&self) -> PathBuf {
        self.config.resolve(&self.config_dir, &self.config.dataset.manifest)
    }

    pub fn load_instance(&self) -> Result<GepInstance> {
        load_instance_dir(&self.instance_dir())
            .with_context(|| format!("loading instance {}", self.instance_dir().display()))
    }
}

/// All files whose bytes feed the run id.
fn input_files(config: &RunConfig, config_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let manifest_path = config.resolve(config_dir, &config.dataset.manifest);
    if manifest_path.exists() {
        files.push(manifest_path.clone());
        let manifest: DatasetManifest =
            toml::from_str(&std::fs::read_to_string(&manifest_path)?)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        files.push(base.join(&manifest.catalog));
        for class in &manifest.classes {
            for feature in &class.features {
                files.push(base.join(&feature.file));
            }
        }
    }
    let instance_dir = config.resolve(config_dir, &config.dataset.instance);
    if instance_dir.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&instance_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        files.extend(entries);
    }
    Ok(files)
}

// --- ingest ---

#[derive(Serialize, Deserialize)]
pub struct IngestArtifact {
    pub nodes: Vec<CatalogNode>,
    pub tables: Vec<TimeSeriesTable>,
    pub days: usize,
    pub scaling: ScalingRecord,
    pub sigma: f64,
    pub affinity: Matrix,
    pub aggregation_resolution: usize,
}

impl IngestArtifact {
    pub fn dataset(&self) -> Result<Dataset> {
        Ok(Dataset {
            catalog: NodeCatalog::new(self.nodes.clone())?,
            tables: self.tables.clone(),
            days: self.days,
        })
    }

    pub fn laplacian(&self) -> Result<RenormalizedLaplacian> {
        let affinity = AffinityMatrix::from_matrix(self.affinity.clone(), self.sigma)?;
        Ok(renormalized_laplacian(&affinity))
    }
}

pub fn cmd_ingest(ctx: &RunContext) -> Result<()> {
    let manifest_path = ctx.dataset_manifest_path();
    let dataset = Dataset::load(&manifest_path)
        .with_context(|| format!("ingesting {}", manifest_path.display()))?;
    let (normalized, scaling) = normalize(&dataset);
    let affinity = build_affinity(&normalized.catalog, &euclidean, ctx.config.sigma())?;
    let aggregation_resolution = ctx
        .config
        .dataset
        .aggregation_resolution
        .unwrap_or_else(|| normalized.resolutions().into_iter().min().unwrap_or(1));
    if !normalized.resolutions().contains(&aggregation_resolution) {
        bail!(
            "aggregation resolution {} is not one of the class resolutions {:?}",
            aggregation_resolution,
            normalized.resolutions()
        );
    }

    let artifact = IngestArtifact {
        nodes: normalized.catalog.nodes().to_vec(),
        tables: normalized.tables.clone(),
        days: normalized.days,
        scaling,
        sigma: affinity.sigma(),
        affinity: affinity.matrix().clone(),
        aggregation_resolution,
    };
    write_atomic(
        &ctx.run_dir.join("ingest.json"),
        serde_json::to_string_pretty(&artifact)?.as_bytes(),
    )?;
    println!(
        "ingest: {} nodes, {} classes, {} days -> {}",
        artifact.nodes.len(),
        artifact.tables.len(),
        artifact.days,
        ctx.run_dir.join("ingest.json").display()
    );
    Ok(())
}

pub fn load_ingest(ctx: &RunContext) -> Result<IngestArtifact> {
    read_json_artifact(&ctx.run_dir.join("ingest.json"), "ingest")
}

// --- train ---

/// Model keys needed by the configured experiment grid.
pub fn model_keys(config: &RunConfig) -> Vec<String> {
    let mut keys = Vec::new();
    for spatial in &config.experiments.spatial {
        if matches!(spatial.as_str(), "pl" | "prl" | "phl" | "prhl") {
            keys.push(format!("spatial-{}", spatial));
        }
    }
    for temporal in &config.experiments.temporal {
        if matches!(temporal.as_str(), "a1" | "a2") {
            keys.push(format!("temporal-{}", temporal));
        }
    }
    keys
}

/// Build stacked inputs for a (possibly feature-filtered) dataset.
pub fn stacked_inputs(
    dataset: &Dataset,
    aggregation_resolution: usize,
    one_hot: bool,
) -> Result<(Vec<Matrix>, stagg_core::features::StackedLayout)> {
    let (periods, _) = build_period_features(dataset, aggregation_resolution)?;
    let mut inputs = Vec::with_capacity(periods.len());
    let mut layout = None;
    for period in &periods {
        let (x, dims) = assemble_stacked(period, one_hot);
        inputs.push(x);
        if layout.is_none() {
            layout = Some(
                dims.with_classes(dataset.tables.iter().map(|t| t.class.clone()).collect()),
            );
        }
    }
    Ok((inputs, layout.expect("at least one period")))
}

fn train_one(ctx: &RunContext, ingest: &IngestArtifact, key: &str) -> Result<()> {
    let dataset = ingest.dataset()?;
    let lap = ingest.laplacian()?;
    let (subset, preset) = match key {
        k if k.starts_with("spatial-") => (dataset.clone(), k.trim_start_matches("spatial-")),
        "temporal-a1" => (
            dataset.subset(&ctx.config.experiments.a1_features)?,
            "prhl",
        ),
        "temporal-a2" => (
            dataset.subset(&ctx.config.experiments.a2_features)?,
            "prhl",
        ),
        other => bail!("unknown model key {:?}", other),
    };
    let (inputs, layout) = stacked_inputs(
        &subset,
        ingest.aggregation_resolution,
        ctx.config.architecture.one_hot,
    )?;
    let weights = ctx.config.loss_weights(preset, &layout.classes)?;
    let arch = ctx.config.architecture_config(ctx.config.training.seed);
    let trained = train(&inputs, &layout, &lap, &arch, &weights)
        .with_context(|| format!("training model {}", key))?;

    let dir = ctx.run_dir.join("train").join(key);
    std::fs::create_dir_all(&dir)?;
    write_atomic(
        &dir.join("model.json"),
        serde_json::to_string(&ModelFileArtifact {
            trained: trained.clone(),
            layout_classes: layout.classes.clone(),
        })?
        .as_bytes(),
    )?;
    let mut csv = String::from("epoch,total,recon,cut,ortho,entropy\n");
    for (epoch, l) in trained.trajectory.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            epoch, l.total, l.recon, l.cut, l.ortho, l.entropy
        ));
    }
    write_atomic(&dir.join("losses.csv"), csv.as_bytes())?;
    println!(
        "train {}: {} epochs, final loss {:.6}",
        key,
        trained.trajectory.len(),
        trained.final_losses.total
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ModelFileArtifact {
    trained: TrainedAutoencoder,
    layout_classes: Vec<String>,
}

pub fn cmd_train(ctx: &RunContext) -> Result<()> {
    let ingest = load_ingest(ctx)?;
    let keys = model_keys(&ctx.config);
    if keys.is_empty() {
        println!("train: no learned methods in the grid; nothing to do");
        return Ok(());
    }
    let results = parallel_map(keys, ctx.jobs, |key| train_one(ctx, &ingest, key));
    for r in results {
        r?;
    }
    Ok(())
}

fn load_model(ctx: &RunContext, key: &str) -> Result<TrainedAutoencoder> {
    let path = ctx.run_dir.join("train").join(key).join("model.json");
    let artifact: ModelFileArtifact = read_json_artifact(&path, "train")?;
    Ok(artifact.trained)
}

// --- aggregate ---

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridCell {
    pub spatial: String,
    pub temporal: String,
    pub k: usize,
}

impl GridCell {
    pub fn key(&self) -> String {
        format!("{}__{}__K{}", self.spatial, self.temporal, self.k)
    }
}

pub fn grid(config: &RunConfig) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for spatial in &config.experiments.spatial {
        for temporal in &config.experiments.temporal {
            for &k in &config.experiments.k_list {
                cells.push(GridCell {
                    spatial: spatial.clone(),
                    temporal: temporal.clone(),
                    k,
                });
            }
        }
    }
    cells
}

fn temporal_for(
    ctx: &RunContext,
    ingest: &IngestArtifact,
    method: &str,
    k: usize,
) -> Result<TemporalAggregation> {
    let dataset = ingest.dataset()?;
    match method {
        "identity" => {
            let (periods, _) = build_period_features(&dataset, ingest.aggregation_resolution)?;
            Ok(TemporalAggregation::identity(periods.len()))
        }
        "raw" | "pca" => {
            let (periods, _) = build_period_features(&dataset, ingest.aggregation_resolution)?;
            let flat: Vec<Vec<f64>> = periods.iter().map(flatten).collect();
            let mode = if method == "raw" {
                BaselineMode::Raw
            } else {
                BaselineMode::Pca(ctx.config.experiments.pca_dim)
            };
            Ok(temporal_baseline(&flat, k, mode)?)
        }
        "a1" | "a2" => {
            let model = load_model(ctx, &format!("temporal-{}", method))?;
            Ok(temporal_from_latents(&model, k)?)
        }
        other => bail!("unknown temporal method {:?}", other),
    }
}

fn spatial_for(
    ctx: &RunContext,
    ingest: &IngestArtifact,
    method: &str,
    temporal: &TemporalAggregation,
) -> Result<SpatialAggregation> {
    let catalog = NodeCatalog::new(ingest.nodes.clone())?;
    let raw = match method {
        "identity" => SpatialAggregation::identity(catalog.len()),
        "label" => {
            let labels: Vec<Option<String>> =
                catalog.nodes().iter().map(|n| n.region.clone()).collect();
            SpatialAggregation::from_labels(&labels)
        }
        preset => {
            let model = load_model(ctx, &format!("spatial-{}", preset))?;
            if ctx.config.experiments.weighted_vote {
                weighted_spatial_vote(&model.assignments, temporal)?
            } else {
                spatial_vote(&model.assignments)?
            }
        }
    };
    // The planning model needs class-pure groups; mixed groups split.
    Ok(raw.class_pure(&catalog))
}

pub fn cmd_aggregate(ctx: &RunContext) -> Result<()> {
    let ingest = load_ingest(ctx)?;
    let catalog = NodeCatalog::new(ingest.nodes.clone())?;
    let cells = grid(&ctx.config);
    let results = parallel_map(cells, ctx.jobs, |cell| -> Result<String> {
        let temporal = temporal_for(ctx, &ingest, &cell.temporal, cell.k)?;
        let spatial = spatial_for(ctx, &ingest, &cell.spatial, &temporal)?;
        let artifact = SpatioTemporalAggregation::new(&catalog, &spatial, temporal);
        let path = ctx.run_dir.join("agg").join(format!("{}.json", cell.key()));
        write_atomic(&path, artifact.to_json().as_bytes())?;
        Ok(cell.key())
    });
    for r in results {
        println!("aggregate {}", r?);
    }
    Ok(())
}

pub fn load_aggregation(ctx: &RunContext, cell: &GridCell) -> Result<SpatioTemporalAggregation> {
    let path = ctx.run_dir.join("agg").join(format!("{}.json", cell.key()));
    if !path.exists() {
        bail!(
            "missing artifact {}; run `stagg aggregate` first",
            path.display()
        );
    }
    Ok(SpatioTemporalAggregation::from_json(&std::fs::read_to_string(path)?)?)
}

/// Resolve an aggregation artifact into the reduced instance pieces.
pub fn reduced_for(
    ctx: &RunContext,
    instance: &GepInstance,
    cell: &GridCell,
) -> Result<(NodeGrouping, TemporalAggregation, GepInstance)> {
    let artifact = load_aggregation(ctx, cell)?;
    let ingest = load_ingest(ctx)?;
    let catalog = NodeCatalog::new(ingest.nodes)?;
    let spatial = artifact.spatial_for(&catalog)?;
    let grouping = NodeGrouping::from_spatial(
        &spatial,
        instance.power_nodes.len(),
        instance.ng_nodes.len(),
    )?;
    let temporal = artifact.temporal.clone();
    let reduced = aggregate_instance(instance, &grouping, &temporal)?;
    Ok((grouping, temporal, reduced))
}

// --- build ---

#[derive(Serialize, Deserialize)]
struct BuildStats {
    variables: usize,
    rows: usize,
    families: BTreeMap<String, usize>,
}

pub fn cmd_build(ctx: &RunContext) -> Result<()> {
    let instance = ctx.load_instance()?;
    let cells = grid(&ctx.config);
    let results = parallel_map(cells, ctx.jobs, |cell| -> Result<String> {
        let (_, _, reduced) = reduced_for(ctx, &instance, cell)?;
        let built = build_gep(&reduced)?;
        let dir = ctx.run_dir.join("build");
        std::fs::create_dir_all(&dir)?;
        export_mps(&built.problem, &dir.join(format!("{}.mps", cell.key())))?;
        let stats = BuildStats {
            variables: built.problem.n_vars(),
            rows: built.problem.n_rows(),
            families: built.problem.family_counts(),
        };
        write_atomic(
            &dir.join(format!("{}.stats.json", cell.key())),
            serde_json::to_string_pretty(&stats)?.as_bytes(),
        )?;
        Ok(format!(
            "{} ({} vars, {} rows)",
            cell.key(),
            built.problem.n_vars(),
            built.problem.n_rows()
        ))
    });
    for r in results {
        println!("build {}", r?);
    }
    Ok(())
}

// --- solve ---

#[derive(Serialize, Deserialize)]
struct SolveSummary {
    status: String,
    objective: f64,
    bound: f64,
    gap: f64,
    simplex_iterations: u64,
    nodes: u64,
}

pub fn cmd_solve(ctx: &RunContext) -> Result<()> {
    let instance = ctx.load_instance()?;
    let options = ctx.config.solver_options();
    let cells = grid(&ctx.config);
    let results = parallel_map(cells, ctx.jobs, |cell| -> Result<String> {
        let (_, _, reduced) = reduced_for(ctx, &instance, cell)?;
        let built = build_gep(&reduced)?;
        let solution = solve_milp(&built.problem, &options);
        if matches!(solution.status, SolveStatus::Infeasible | SolveStatus::Unbounded) {
            bail!("aggregated model {} is {:?}", cell.key(), solution.status);
        }
        let dir = ctx.run_dir.join("solve");
        std::fs::create_dir_all(&dir)?;
        write_solution_csv(
            &built.problem,
            &solution.values,
            &dir.join(format!("{}.solution.csv", cell.key())),
        )?;
        let summary = SolveSummary {
            status: format!("{:?}", solution.status),
            objective: solution.objective,
            bound: solution.bound,
            gap: solution.gap,
            simplex_iterations: solution.simplex_iterations,
            nodes: solution.nodes,
        };
        write_atomic(
            &dir.join(format!("{}.summary.json", cell.key())),
            serde_json::to_string_pretty(&summary)?.as_bytes(),
        )?;
        Ok(format!("{} obj {:.3} gap {:.4}", cell.key(), solution.objective, solution.gap))
    });
    for r in results {
        println!("solve {}", r?);
    }
    Ok(())
}

// --- evaluate ---

pub fn cmd_evaluate(ctx: &RunContext) -> Result<()> {
    let instance = ctx.load_instance()?;
    let options = ctx.config.solver_options();
    let cells = grid(&ctx.config);
    let reports = parallel_map(cells.clone(), ctx.jobs, |cell| -> Result<UbReport> {
        let (grouping, temporal, _) = reduced_for(ctx, &instance, cell)?;
        let report = upper_bound(&instance, &grouping, &temporal, &options)
            .with_context(|| format!("evaluating {}", cell.key()))?;
        let dir = ctx.run_dir.join("ub");
        std::fs::create_dir_all(&dir)?;
        write_atomic(
            &dir.join(format!("{}.json", cell.key())),
            serde_json::to_string_pretty(&report)?.as_bytes(),
        )?;
        Ok(report)
    });

    let mut ledger = String::from(
        "cell,spatial,temporal,k,ub,step1_objective,step1_gap,step2_objective,step2_gap,feasibility_max_violation\n",
    );
    let mut rows: Vec<(String, String)> = Vec::new();
    // Wall times are volatile; they go to a plain-text log so the CSV and
    // JSON artifacts stay byte-identical across identical runs.
    let mut timings = String::new();
    for (cell, report) in cells.iter().zip(reports) {
        let report = report?;
        rows.push((
            cell.key(),
            format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                cell.key(),
                cell.spatial,
                cell.temporal,
                cell.k,
                report.ub,
                report.step1_objective,
                report.step1_gap,
                report.step2_objective,
                report.step2_gap,
                report.feasibility_max_violation
            ),
        ));
        timings.push_str(&format!(
            "{} step1 {:.3}s step2 {:.3}s step3 {:.3}s\n",
            cell.key(),
            report.step1_seconds,
            report.step2_seconds,
            report.step3_seconds
        ));
        println!("evaluate {} -> UB {:.3}", cell.key(), report.ub);
    }
    rows.sort();
    for (_, row) in rows {
        ledger.push_str(&row);
    }
    write_atomic(&ctx.run_dir.join("ledger.csv"), ledger.as_bytes())?;
    std::fs::write(ctx.run_dir.join("timings.log"), timings)?;
    Ok(())
}

// --- report ---

struct LedgerRow {
    spatial: String,
    temporal: String,
    k: usize,
    ub: f64,
}

fn read_ledger(ctx: &RunContext) -> Result<Vec<LedgerRow>> {
    let path = ctx.run_dir.join("ledger.csv");
    if !path.exists() {
        bail!(
            "missing artifact {}; run `stagg evaluate` first",
            path.display()
        );
    }
    let text = std::fs::read_to_string(&path)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            continue;
        }
        rows.push(LedgerRow {
            spatial: fields[1].to_string(),
            temporal: fields[2].to_string(),
            k: fields[3].parse().unwrap_or(0),
            ub: fields[4].parse().unwrap_or(f64::NAN),
        });
    }
    Ok(rows)
}

pub fn cmd_report(ctx: &RunContext) -> Result<()> {
    let rows = read_ledger(ctx)?;
    let dir = ctx.run_dir.join("report");
    std::fs::create_dir_all(&dir)?;

    // Best UB per spatial method across all temporal methods and K.
    let mut spatial_best: BTreeMap<String, (f64, String, usize)> = BTreeMap::new();
    let mut temporal_best: BTreeMap<String, (f64, String, usize)> = BTreeMap::new();
    for row in &rows {
        let entry = spatial_best
            .entry(row.spatial.clone())
            .or_insert((f64::INFINITY, String::new(), 0));
        if row.ub < entry.0 {
            *entry = (row.ub, row.temporal.clone(), row.k);
        }
        let entry = temporal_best
            .entry(row.temporal.clone())
            .or_insert((f64::INFINITY, String::new(), 0));
        if row.ub < entry.0 {
            *entry = (row.ub, row.spatial.clone(), row.k);
        }
    }
    let mut out = String::from("spatial,best_ub,best_temporal,best_k\n");
    for (spatial, (ub, temporal, k)) in &spatial_best {
        out.push_str(&format!("{},{},{},{}\n", spatial, ub, temporal, k));
    }
    write_atomic(&dir.join("spatial_best.csv"), out.as_bytes())?;

    let mut out = String::from("temporal,best_ub,best_spatial,best_k\n");
    for (temporal, (ub, spatial, k)) in &temporal_best {
        out.push_str(&format!("{},{},{},{}\n", temporal, ub, spatial, k));
    }
    write_atomic(&dir.join("temporal_best.csv"), out.as_bytes())?;

    // Generation mix per cell from the evaluation artifacts.
    let mut out = String::from("cell,spatial,temporal,k,plant,generation_mwh\n");
    for cell in grid(&ctx.config) {
        let path = ctx.run_dir.join("ub").join(format!("{}.json", cell.key()));
        if !path.exists() {
            continue;
        }
        let report: UbReport = read_json_artifact(&path, "evaluate")?;
        for (plant, energy) in &report.generation_by_plant {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.key(),
                cell.spatial,
                cell.temporal,
                cell.k,
                plant,
                energy
            ));
        }
    }
    write_atomic(&dir.join("genmix.csv"), out.as_bytes())?;

    println!("report: {} ledger rows -> {}", rows.len(), dir.display());
    Ok(())
}

pub fn cmd_all(ctx: &RunContext) -> Result<()> {
    cmd_ingest(ctx)?;
    cmd_train(ctx)?;
    cmd_aggregate(ctx)?;
    cmd_build(ctx)?;
    cmd_solve(ctx)?;
    cmd_evaluate(ctx)?;
    cmd_report(ctx)?;
    println!("all: artifacts under {}", ctx.run_dir.display());
    Ok(())
}
