//! Time-series ingestion and per-period feature construction.
//!
//! Each node class carries its own temporal resolution (samples per day);
//! resolutions must all divide the finest one. For a chosen aggregation
//! resolution, every node's features within one aggregation period are
//! concatenated (fine classes contribute several columns per feature) and
//! coarse classes have their values repeated across the periods they span.
//! Class matrices are then stacked block-diagonally into the autoencoder
//! input, optionally with one-hot node identity columns appended.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeCatalog;
use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("ingestion error in {file}: {detail}")]
    Ingest { file: String, detail: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest parse error: {0}")]
    Manifest(#[from] toml::de::Error),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

fn ingest_err(file: &Path, detail: String) -> FeatureError {
    FeatureError::Ingest {
        file: file.display().to_string(),
        detail,
    }
}

/// Role of a feature series in the planning model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Model parameter (demands, capacity factors).
    Parameter,
    /// Derived from pilot solves; optional input, unused by default.
    Derived,
    /// Exogenous data (weather, prices).
    Exogenous,
}

/// One named series per node of a class, stored node-major in catalog order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub name: String,
    pub kind: FeatureKind,
    /// `|N_s| x (resolution * days)` values.
    pub values: Matrix,
}

/// All series of one node class at that class's resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeriesTable {
    pub class: String,
    /// Samples per day.
    pub resolution: usize,
    pub features: Vec<FeatureSeries>,
}

/// Manifest describing where the per-(class, feature) CSV files live.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub catalog: String,
    #[serde(rename = "class")]
    pub classes: Vec<ClassManifest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassManifest {
    pub name: String,
    pub resolution: usize,
    #[serde(rename = "feature", default)]
    pub features: Vec<FeatureManifest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub name: String,
    pub kind: FeatureKind,
    pub file: String,
}

/// A validated dataset: catalog plus one table per class, all sharing one
/// day count.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub catalog: NodeCatalog,
    pub tables: Vec<TimeSeriesTable>,
    pub days: usize,
}

impl Dataset {
    /// Load a manifest and all referenced CSVs. Paths are resolved relative
    /// to the manifest location.
    pub fn load(manifest_path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(manifest_path)?;
        let manifest: DatasetManifest = toml::from_str(&text)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let catalog = NodeCatalog::from_csv(&base.join(&manifest.catalog))?;
        Dataset::ingest(catalog, &manifest, base)
    }

    /// Ingest the CSVs named by `manifest` for an already-loaded catalog.
    pub fn ingest(
        catalog: NodeCatalog,
        manifest: &DatasetManifest,
        base: &Path,
    ) -> Result<Self, FeatureError> {
        let mut resolutions = Vec::new();
        for class in &manifest.classes {
            if class.resolution == 0 {
                return Err(FeatureError::Config(format!(
                    "class {:?} has zero resolution",
                    class.name
                )));
            }
            if catalog.class_range(&class.name).is_none() {
                return Err(FeatureError::Config(format!(
                    "manifest class {:?} not present in catalog",
                    class.name
                )));
            }
            resolutions.push(class.resolution);
        }
        let finest = *resolutions.iter().max().ok_or_else(|| {
            FeatureError::Config("manifest declares no classes".into())
        })?;
        for (class, res) in manifest.classes.iter().zip(&resolutions) {
            if finest % res != 0 {
                return Err(FeatureError::Config(format!(
                    "class {:?} resolution {} does not divide the finest resolution {}",
                    class.name, res, finest
                )));
            }
        }

        let mut days: Option<usize> = None;
        let mut tables = Vec::new();
        for class in &manifest.classes {
            let range = catalog.class_range(&class.name).unwrap();
            let ids: Vec<&str> = catalog.nodes()[range].iter().map(|n| n.id.as_str()).collect();
            let mut features = Vec::new();
            for feature in &class.features {
                let file = base.join(&feature.file);
                let values = read_series_csv(&file, &ids)?;
                let samples = values.cols();
                if samples % class.resolution != 0 {
                    return Err(ingest_err(
                        &file,
                        format!(
                            "{} samples is not a whole number of days at resolution {}",
                            samples, class.resolution
                        ),
                    ));
                }
                let file_days = samples / class.resolution;
                match days {
                    None => days = Some(file_days),
                    Some(d) if d == file_days => {}
                    Some(d) => {
                        return Err(ingest_err(
                            &file,
                            format!("covers {} days but the dataset has {}", file_days, d),
                        ))
                    }
                }
                features.push(FeatureSeries {
                    name: feature.name.clone(),
                    kind: feature.kind,
                    values,
                });
            }
            tables.push(TimeSeriesTable {
                class: class.name.clone(),
                resolution: class.resolution,
                features,
            });
        }
        let days = days.ok_or_else(|| FeatureError::Config("dataset has no features".into()))?;
        Ok(Dataset {
            catalog,
            tables,
            days,
        })
    }

    /// Keep only the named `(class, feature)` pairs; classes keep their
    /// place (possibly with zero features) so row layouts stay aligned.
    pub fn subset(&self, keep: &[(String, String)]) -> Result<Dataset, FeatureError> {
        for (class, feature) in keep {
            let table = self
                .tables
                .iter()
                .find(|t| t.class == *class)
                .ok_or_else(|| FeatureError::Config(format!("unknown class {:?}", class)))?;
            if !table.features.iter().any(|f| f.name == *feature) {
                return Err(FeatureError::Config(format!(
                    "class {:?} has no feature {:?}",
                    class, feature
                )));
            }
        }
        let tables = self
            .tables
            .iter()
            .map(|t| TimeSeriesTable {
                class: t.class.clone(),
                resolution: t.resolution,
                features: t
                    .features
                    .iter()
                    .filter(|f| {
                        keep.iter()
                            .any(|(c, name)| *c == t.class && *name == f.name)
                    })
                    .cloned()
                    .collect(),
            })
            .collect();
        Ok(Dataset {
            catalog: self.catalog.clone(),
            tables,
            days: self.days,
        })
    }

    pub fn resolutions(&self) -> Vec<usize> {
        self.tables.iter().map(|t| t.resolution).collect()
    }
}

/// Read one `node_id,p1,p2,...` series file covering exactly `expected_ids`.
fn read_series_csv(path: &Path, expected_ids: &[&str]) -> Result<Matrix, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest_err(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| ingest_err(path, e.to_string()))?;
    if headers.get(0) != Some("node_id") {
        return Err(ingest_err(path, "first column must be node_id".into()));
    }
    let width = headers.len() - 1;
    if width == 0 {
        return Err(ingest_err(path, "no period columns".into()));
    }

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ingest_err(path, e.to_string()))?;
        let row_no = line + 2;
        if record.len() != width + 1 {
            return Err(ingest_err(
                path,
                format!("row {} has {} cells, expected {}", row_no, record.len(), width + 1),
            ));
        }
        let id = record[0].to_string();
        let mut vals = Vec::with_capacity(width);
        for (c, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                ingest_err(path, format!("row {} column {}: {:?} is not numeric", row_no, c + 2, cell))
            })?;
            if !v.is_finite() {
                return Err(ingest_err(
                    path,
                    format!("row {} column {}: non-finite value", row_no, c + 2),
                ));
            }
            vals.push(v);
        }
        rows.push((id, vals));
    }
    if rows.is_empty() {
        return Err(ingest_err(path, "file has no data rows".into()));
    }

    let mut values = Matrix::zeros(expected_ids.len(), width);
    let mut seen = vec![false; expected_ids.len()];
    for (id, vals) in rows {
        let idx = expected_ids
            .iter()
            .position(|e| *e == id)
            .ok_or_else(|| ingest_err(path, format!("unknown node id {:?}", id)))?;
        if seen[idx] {
            return Err(ingest_err(path, format!("duplicate node id {:?}", id)));
        }
        seen[idx] = true;
        for (c, v) in vals.into_iter().enumerate() {
            values.set(idx, c, v);
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(ingest_err(
            path,
            format!("missing series for node {:?}", expected_ids[missing]),
        ));
    }
    Ok(values)
}

/// Per-period class feature matrices `X_s` (rows follow catalog order).
#[derive(Debug, Clone)]
pub struct PeriodFeatureMatrix {
    pub period: usize,
    pub class_blocks: Vec<Matrix>,
}

/// Column layout of one class block: which columns belong to which feature.
#[derive(Debug, Clone)]
pub struct ClassColumns {
    pub class: String,
    pub feature_cols: Vec<(String, usize)>,
    pub width: usize,
}

/// Build the per-period feature matrices at `agg_resolution` periods per
/// day. Fine classes contribute `resolution / agg_resolution` columns per
/// feature; coarse classes repeat their covering sample.
pub fn build_period_features(
    dataset: &Dataset,
    agg_resolution: usize,
) -> Result<(Vec<PeriodFeatureMatrix>, Vec<ClassColumns>), FeatureError> {
    if !dataset.resolutions().contains(&agg_resolution) {
        return Err(FeatureError::Config(format!(
            "aggregation resolution {} is not one of the class resolutions {:?}",
            agg_resolution,
            dataset.resolutions()
        )));
    }
    let mut layouts = Vec::new();
    for table in &dataset.tables {
        let per_feature = if table.resolution >= agg_resolution {
            if table.resolution % agg_resolution != 0 {
                return Err(FeatureError::Config(format!(
                    "class {:?} resolution {} is not a multiple of aggregation resolution {}",
                    table.class, table.resolution, agg_resolution
                )));
            }
            table.resolution / agg_resolution
        } else {
            if agg_resolution % table.resolution != 0 {
                return Err(FeatureError::Config(format!(
                    "aggregation resolution {} is not a multiple of class {:?} resolution {}",
                    agg_resolution, table.class, table.resolution
                )));
            }
            1
        };
        let feature_cols: Vec<(String, usize)> = table
            .features
            .iter()
            .map(|f| (f.name.clone(), per_feature))
            .collect();
        layouts.push(ClassColumns {
            class: table.class.clone(),
            width: feature_cols.iter().map(|(_, w)| w).sum(),
            feature_cols,
        });
    }

    let n_periods = dataset.days * agg_resolution;
    let mut periods = Vec::with_capacity(n_periods);
    for t in 0..n_periods {
        let day = t / agg_resolution;
        let slot = t % agg_resolution;
        let mut class_blocks = Vec::with_capacity(dataset.tables.len());
        for (table, layout) in dataset.tables.iter().zip(&layouts) {
            let n_nodes = dataset
                .catalog
                .class_range(&table.class)
                .map(|r| r.len())
                .unwrap_or(0);
            let mut block = Matrix::zeros(n_nodes, layout.width);
            let mut col = 0;
            for feature in &table.features {
                if table.resolution >= agg_resolution {
                    let per = table.resolution / agg_resolution;
                    let start = day * table.resolution + slot * per;
                    for node in 0..n_nodes {
                        for k in 0..per {
                            block.set(node, col + k, feature.values.get(node, start + k));
                        }
                    }
                    col += per;
                } else {
                    // Coarse class: the sample covering this period repeats.
                    let sample = day * table.resolution + (slot * table.resolution) / agg_resolution;
                    for node in 0..n_nodes {
                        block.set(node, col, feature.values.get(node, sample));
                    }
                    col += 1;
                }
            }
            class_blocks.push(block);
        }
        periods.push(PeriodFeatureMatrix {
            period: t,
            class_blocks,
        });
    }
    Ok((periods, layouts))
}

/// Row/column geometry of the stacked block-diagonal input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackedLayout {
    pub classes: Vec<String>,
    pub row_ranges: Vec<Range<usize>>,
    pub col_ranges: Vec<Range<usize>>,
    pub feature_cols: usize,
    pub one_hot: bool,
    pub total_rows: usize,
    pub total_cols: usize,
}

/// Assemble `X` as the block diagonal of the class matrices, optionally
/// appending an identity block of node one-hot columns.
pub fn assemble_stacked(period: &PeriodFeatureMatrix, one_hot: bool) -> (Matrix, StackedLayoutDims) {
    let total_rows: usize = period.class_blocks.iter().map(|b| b.rows()).sum();
    let feature_cols: usize = period.class_blocks.iter().map(|b| b.cols()).sum();
    let total_cols = feature_cols + if one_hot { total_rows } else { 0 };
    let mut x = Matrix::zeros(total_rows, total_cols);
    let mut row = 0;
    let mut col = 0;
    let mut row_ranges = Vec::new();
    let mut col_ranges = Vec::new();
    for block in &period.class_blocks {
        for r in 0..block.rows() {
            for c in 0..block.cols() {
                x.set(row + r, col + c, block.get(r, c));
            }
        }
        row_ranges.push(row..row + block.rows());
        col_ranges.push(col..col + block.cols());
        row += block.rows();
        col += block.cols();
    }
    if one_hot {
        for r in 0..total_rows {
            x.set(r, feature_cols + r, 1.0);
        }
    }
    (
        x,
        StackedLayoutDims {
            row_ranges,
            col_ranges,
            feature_cols,
            one_hot,
            total_rows,
            total_cols,
        },
    )
}

/// Geometry produced by [`assemble_stacked`]; pair with class names from
/// the dataset to get a full [`StackedLayout`].
#[derive(Debug, Clone)]
pub struct StackedLayoutDims {
    pub row_ranges: Vec<Range<usize>>,
    pub col_ranges: Vec<Range<usize>>,
    pub feature_cols: usize,
    pub one_hot: bool,
    pub total_rows: usize,
    pub total_cols: usize,
}

impl StackedLayoutDims {
    pub fn with_classes(self, classes: Vec<String>) -> StackedLayout {
        StackedLayout {
            classes,
            row_ranges: self.row_ranges,
            col_ranges: self.col_ranges,
            feature_cols: self.feature_cols,
            one_hot: self.one_hot,
            total_rows: self.total_rows,
            total_cols: self.total_cols,
        }
    }
}

/// Min-max scaling bounds for one feature of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub class: String,
    pub feature: String,
    pub min: f64,
    pub max: f64,
}

/// Record of the scaling applied by [`normalize`]; supports exact inverse
/// transforms for reporting in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub scales: Vec<FeatureScale>,
}

impl ScalingRecord {
    pub fn lookup(&self, class: &str, feature: &str) -> Option<&FeatureScale> {
        self.scales
            .iter()
            .find(|s| s.class == class && s.feature == feature)
    }

    pub fn apply(&self, scale: &FeatureScale, v: f64) -> f64 {
        if scale.max > scale.min {
            (v - scale.min) / (scale.max - scale.min)
        } else {
            0.0
        }
    }

    pub fn invert(&self, scale: &FeatureScale, v: f64) -> f64 {
        if scale.max > scale.min {
            v * (scale.max - scale.min) + scale.min
        } else {
            scale.min
        }
    }
}

/// Min-max scale every feature to `[0, 1]` over all nodes and periods.
/// Constant features map to 0. Returns the scaled dataset and the record
/// needed to invert the transform.
pub fn normalize(dataset: &Dataset) -> (Dataset, ScalingRecord) {
    let mut scales = Vec::new();
    let mut out = dataset.clone();
    for table in &mut out.tables {
        for feature in &mut table.features {
            let min = feature
                .values
                .data()
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            let max = feature
                .values
                .data()
                .iter()
                .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let scale = FeatureScale {
                class: table.class.clone(),
                feature: feature.name.clone(),
                min,
                max,
            };
            feature.values = if max > min {
                feature.values.map(|v| (v - min) / (max - min))
            } else {
                feature.values.map(|_| 0.0)
            };
            scales.push(scale);
        }
    }
    (out, ScalingRecord { scales })
}

/// Vectorize one period's class matrices: class-major, node-major,
/// feature-minor. The order is stable across runs.
pub fn flatten(period: &PeriodFeatureMatrix) -> Vec<f64> {
    let mut out = Vec::new();
    for block in &period.class_blocks {
        out.extend_from_slice(block.data());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::path::PathBuf;

    fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn two_class_fixture(dir: &Path) -> PathBuf {
        write_file(
            dir,
            "nodes.csv",
            "id,class,x,y\np1,power,0,0\np2,power,1,0\ng1,gas,0,1\n",
        );
        // 2 days of hourly power demand at resolution 3.
        write_file(
            dir,
            "power_demand.csv",
            "node_id,p1,p2,p3,p4,p5,p6\np1,1,2,3,4,5,6\np2,10,20,30,40,50,60\n",
        );
        // 2 days of daily gas demand.
        write_file(dir, "gas_demand.csv", "node_id,p1,p2\ng1,7,9\n");
        write_file(
            dir,
            "manifest.toml",
            r#"catalog = "nodes.csv"

[[class]]
name = "power"
resolution = 3

[[class.feature]]
name = "demand"
kind = "parameter"
file = "power_demand.csv"

[[class]]
name = "gas"
resolution = 1

[[class.feature]]
name = "demand"
kind = "parameter"
file = "gas_demand.csv"
"#,
        )
    }

    #[test]
    fn ingest_two_classes() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = two_class_fixture(dir.path());
        let dataset = Dataset::load(&manifest).unwrap();
        assert_eq!(dataset.days, 2);
        assert_eq!(dataset.tables[0].resolution, 3);
        assert_eq!(dataset.tables[1].resolution, 1);
        assert_eq!(dataset.tables[0].features[0].values.get(1, 2), 30.0);
    }

    #[test]
    fn ingest_rejects_empty_and_ragged_and_unknown() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "nodes.csv", "id,class,x,y\np1,power,0,0\n");
        write_file(dir.path(), "empty.csv", "node_id,p1\n");
        let manifest = write_file(
            dir.path(),
            "manifest.toml",
            r#"catalog = "nodes.csv"

[[class]]
name = "power"
resolution = 1

[[class.feature]]
name = "demand"
kind = "parameter"
file = "empty.csv"
"#,
        );
        let err = Dataset::load(&manifest).unwrap_err();
        assert!(matches!(err, FeatureError::Ingest { .. }), "{err}");

        write_file(dir.path(), "empty.csv", "node_id,p1\nbogus,1\n");
        let err = Dataset::load(&manifest).unwrap_err();
        assert!(err.to_string().contains("unknown node id"), "{err}");

        write_file(dir.path(), "empty.csv", "node_id,p1\np1,abc\n");
        let err = Dataset::load(&manifest).unwrap_err();
        assert!(err.to_string().contains("not numeric"), "{err}");
    }

    #[test]
    fn daily_aggregation_concatenates_fine_and_keeps_coarse() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = Dataset::load(&two_class_fixture(dir.path())).unwrap();
        let (periods, layouts) = build_period_features(&dataset, 1).unwrap();
        assert_eq!(periods.len(), 2);
        // Power block: 3 hourly columns per feature per day.
        assert_eq!(layouts[0].width, 3);
        assert_eq!(periods[0].class_blocks[0].row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(periods[1].class_blocks[0].row(1), &[40.0, 50.0, 60.0]);
        // Gas block: one daily column.
        assert_eq!(layouts[1].width, 1);
        assert_eq!(periods[1].class_blocks[1].get(0, 0), 9.0);
    }

    #[test]
    fn hourly_aggregation_repeats_daily_values() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = Dataset::load(&two_class_fixture(dir.path())).unwrap();
        let (periods, _) = build_period_features(&dataset, 3).unwrap();
        assert_eq!(periods.len(), 6);
        // The gas value of day 0 shows up in all 3 fine periods of day 0.
        for t in 0..3 {
            assert_eq!(periods[t].class_blocks[1].get(0, 0), 7.0);
        }
        for t in 3..6 {
            assert_eq!(periods[t].class_blocks[1].get(0, 0), 9.0);
        }
        // Power contributes exactly one sample per fine period.
        assert_eq!(periods[4].class_blocks[0].get(0, 0), 5.0);
    }

    #[test]
    fn unsupported_aggregation_resolution_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = Dataset::load(&two_class_fixture(dir.path())).unwrap();
        assert!(matches!(
            build_period_features(&dataset, 2),
            Err(FeatureError::Config(_))
        ));
    }

    #[test]
    fn stacked_blocks_are_block_diagonal() {
        let period = PeriodFeatureMatrix {
            period: 0,
            class_blocks: vec![
                Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]),
                Matrix::from_rows(&[vec![7.0], vec![8.0]]),
            ],
        };
        let (x, dims) = assemble_stacked(&period, false);
        assert_eq!(x.shape(), (5, 3));
        assert_eq!(x.get(0, 0), 1.0);
        assert_eq!(x.get(3, 2), 7.0);
        // Off-block entries are exactly zero.
        for r in 0..3 {
            assert_eq!(x.get(r, 2), 0.0);
        }
        for r in 3..5 {
            assert_eq!(x.get(r, 0), 0.0);
            assert_eq!(x.get(r, 1), 0.0);
        }
        assert_eq!(dims.row_ranges, vec![0..3, 3..5]);
        assert_eq!(dims.col_ranges, vec![0..2, 2..3]);
    }

    #[test]
    fn one_hot_appends_identity() {
        let period = PeriodFeatureMatrix {
            period: 0,
            class_blocks: vec![Matrix::from_rows(&[vec![0.5], vec![0.25]])],
        };
        let (x, dims) = assemble_stacked(&period, true);
        assert_eq!(x.shape(), (2, 3));
        assert_eq!(x.get(0, 1), 1.0);
        assert_eq!(x.get(1, 2), 1.0);
        assert_eq!(x.get(0, 2), 0.0);
        assert_eq!(dims.feature_cols, 1);
    }

    #[test]
    fn normalize_scales_and_inverts() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "nodes.csv", "id,class,x,y\np1,power,0,0\n");
        write_file(dir.path(), "d.csv", "node_id,p1,p2,p3\np1,10,20,30\n");
        write_file(dir.path(), "c.csv", "node_id,p1,p2,p3\np1,5,5,5\n");
        let manifest = write_file(
            dir.path(),
            "manifest.toml",
            r#"catalog = "nodes.csv"

[[class]]
name = "power"
resolution = 1

[[class.feature]]
name = "demand"
kind = "parameter"
file = "d.csv"

[[class.feature]]
name = "flat"
kind = "exogenous"
file = "c.csv"
"#,
        );
        let dataset = Dataset::load(&manifest).unwrap();
        let (scaled, record) = normalize(&dataset);
        assert_eq!(scaled.tables[0].features[0].values.get(0, 1), 0.5);
        // Constant features map to zero.
        assert_eq!(scaled.tables[0].features[1].values.get(0, 0), 0.0);

        let scale = record.lookup("power", "demand").unwrap();
        for v in [10.0, 17.5, 30.0] {
            let roundtrip = record.invert(scale, record.apply(scale, v));
            assert!((roundtrip - v).abs() < 1e-12);
        }

        // Idempotence: normalizing normalized data changes nothing.
        let (rescaled, _) = normalize(&scaled);
        assert_eq!(
            rescaled.tables[0].features[0].values,
            scaled.tables[0].features[0].values
        );
    }

    #[test]
    fn flatten_is_class_major_node_major_feature_minor() {
        let period = PeriodFeatureMatrix {
            period: 0,
            class_blocks: vec![
                Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]),
                Matrix::from_rows(&[vec![7.0, 8.0]]),
            ],
        };
        let flat = flatten(&period);
        assert_eq!(flat.len(), 2 * 3 + 1 * 2);
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }
}
