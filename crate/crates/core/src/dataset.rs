//! Incomplete multi-view, multi-label data.
//!
//! Feature matrices are stored feature-by-instance (`d_v × n`) and labels
//! label-by-instance (`k × n`). Each view carries a presence vector; the
//! columns of absent instances are stored as zeros.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{AslslError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewBlock {
    view_id: usize,
    features: Array2<f64>,
    presence: Vec<bool>,
}

impl ViewBlock {
    /// Builds a view, zeroing the columns of absent instances.
    ///
    /// Present entries must be finite and non-negative. Absent columns may
    /// hold anything (including NaN); they are overwritten.
    pub fn new(view_id: usize, mut features: Array2<f64>, presence: Vec<bool>) -> Result<Self> {
        if features.ncols() != presence.len() {
            return Err(AslslError::Shape(format!(
                "view {view_id}: {} feature columns but presence vector has length {}",
                features.ncols(),
                presence.len()
            )));
        }
        zero_absent_columns(&mut features, &presence);
        for ((row, col), &value) in features.indexed_iter() {
            if !value.is_finite() {
                return Err(AslslError::InvalidParameter(format!(
                    "view {view_id}: non-finite value {value} at row {row}, column {col}"
                )));
            }
            if value < 0.0 {
                return Err(AslslError::InvalidParameter(format!(
                    "view {view_id}: negative value {value} at row {row}, column {col}"
                )));
            }
        }
        Ok(ViewBlock {
            view_id,
            features,
            presence,
        })
    }

    pub fn view_id(&self) -> usize {
        self.view_id
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Raw mutable access to the feature matrix.
    ///
    /// Writes to absent columns are never read by the optimizer, which
    /// applies the mask itself; they are not re-zeroed here.
    pub fn features_mut(&mut self) -> &mut Array2<f64> {
        &mut self.features
    }

    pub fn presence(&self) -> &[bool] {
        &self.presence
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_instances(&self) -> usize {
        self.presence.len()
    }

    pub fn n_present(&self) -> usize {
        self.presence.iter().filter(|&&p| p).count()
    }

    /// Diagonal of the indicator matrix as 0/1 reals.
    pub fn mask_vector(&self) -> Array1<f64> {
        self.presence.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect()
    }

    /// Features with absent columns set to exactly zero, whatever is stored.
    pub fn masked_features(&self) -> Array2<f64> {
        let mut out = self.features.clone();
        zero_absent_columns(&mut out, &self.presence);
        out
    }

    pub(crate) fn with_presence(&self, presence: Vec<bool>) -> ViewBlock {
        let mut features = self.features.clone();
        zero_absent_columns(&mut features, &presence);
        ViewBlock {
            view_id: self.view_id,
            features,
            presence,
        }
    }

    pub(crate) fn select_rows(&self, rows: &[usize]) -> ViewBlock {
        ViewBlock {
            view_id: self.view_id,
            features: self.features.select(Axis(0), rows),
            presence: self.presence.clone(),
        }
    }

    pub(crate) fn select_instances(&self, cols: &[usize]) -> ViewBlock {
        ViewBlock {
            view_id: self.view_id,
            features: self.features.select(Axis(1), cols),
            presence: cols.iter().map(|&j| self.presence[j]).collect(),
        }
    }
}

fn zero_absent_columns(features: &mut Array2<f64>, presence: &[bool]) {
    for (mut col, &present) in features.columns_mut().into_iter().zip(presence) {
        if !present {
            col.fill(0.0);
        }
    }
}

/// The `n × n` diagonal indicator matrix of a view.
pub fn mask_matrix(view: &ViewBlock) -> Array2<f64> {
    Array2::from_diag(&view.mask_vector())
}

/// Binary `k × n` label matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatrix {
    labels: Array2<f64>,
}

impl LabelMatrix {
    pub fn new(labels: Array2<f64>) -> Result<Self> {
        if labels.nrows() == 0 {
            return Err(AslslError::InvalidParameter(
                "label matrix needs at least one label row".into(),
            ));
        }
        if let Some(((row, col), &value)) = labels.indexed_iter().find(|(_, &v)| v != 0.0 && v != 1.0) {
            return Err(AslslError::NonBinaryLabel { row, col, value });
        }
        let out = LabelMatrix { labels };
        for row in out.constant_rows() {
            log::warn!("label row {row} is constant across all instances");
        }
        Ok(out)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.labels.nrows()
    }

    pub fn n_instances(&self) -> usize {
        self.labels.ncols()
    }

    pub fn get(&self, label: usize, instance: usize) -> bool {
        self.labels[[label, instance]] == 1.0
    }

    pub fn constant_rows(&self) -> Vec<usize> {
        self.labels
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, row)| row.iter().all(|&v| v == row[0]))
            .map(|(i, _)| i)
            .collect()
    }

    pub(crate) fn select_instances(&self, cols: &[usize]) -> LabelMatrix {
        LabelMatrix {
            labels: self.labels.select(Axis(1), cols),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewDataset {
    name: String,
    views: Vec<ViewBlock>,
    labels: LabelMatrix,
    groups: Option<Vec<String>>,
}

impl MultiViewDataset {
    pub fn new(name: impl Into<String>, views: Vec<ViewBlock>, labels: LabelMatrix) -> Result<Self> {
        let ds = MultiViewDataset {
            name: name.into(),
            views,
            labels,
            groups: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Attaches a per-instance grouping (e.g. subject id) used for
    /// group-wise train/test splits.
    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.n_instances() {
            return Err(AslslError::Shape(format!(
                "{} group entries for {} instances",
                groups.len(),
                self.n_instances()
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(AslslError::InvalidParameter("dataset has no views".into()));
        }
        let n = self.labels.n_instances();
        for view in &self.views {
            if view.n_instances() != n {
                return Err(AslslError::Shape(format!(
                    "view {} has {} instances, labels have {n}",
                    view.view_id,
                    view.n_instances()
                )));
            }
        }
        if let Some(instance) = (0..n).find(|&j| self.views.iter().all(|v| !v.presence[j])) {
            return Err(AslslError::InstanceAbsent { instance });
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn views(&self) -> &[ViewBlock] {
        &self.views
    }

    pub fn views_mut(&mut self) -> &mut [ViewBlock] {
        &mut self.views
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn n_instances(&self) -> usize {
        self.labels.n_instances()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.n_labels()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(ViewBlock::dim).collect()
    }

    pub fn total_features(&self) -> usize {
        self.views.iter().map(ViewBlock::dim).sum()
    }

    /// All views stacked into one `(Σ d_v) × n` matrix, absent columns zero.
    pub fn concatenated_features(&self) -> Array2<f64> {
        let n = self.n_instances();
        let mut out = Array2::zeros((self.total_features(), n));
        let mut offset = 0;
        for view in &self.views {
            let d = view.dim();
            out.slice_mut(ndarray::s![offset..offset + d, ..])
                .assign(&view.masked_features());
            offset += d;
        }
        out
    }

    /// Restricts to a subset of instances, in the given order.
    pub fn select_instances(&self, cols: &[usize]) -> MultiViewDataset {
        MultiViewDataset {
            name: self.name.clone(),
            views: self.views.iter().map(|v| v.select_instances(cols)).collect(),
            labels: self.labels.select_instances(cols),
            groups: self
                .groups
                .as_ref()
                .map(|g| cols.iter().map(|&j| g[j].clone()).collect()),
        }
    }

    /// Keeps only the given feature rows of each view. Views may end up
    /// with zero rows; masks are untouched.
    pub fn select_features(&self, rows_per_view: &[Vec<usize>]) -> MultiViewDataset {
        MultiViewDataset {
            name: self.name.clone(),
            views: self
                .views
                .iter()
                .zip(rows_per_view)
                .map(|(v, rows)| v.select_rows(rows))
                .collect(),
            labels: self.labels.clone(),
            groups: self.groups.clone(),
        }
    }

    pub(crate) fn with_views(&self, views: Vec<ViewBlock>) -> MultiViewDataset {
        MultiViewDataset {
            name: self.name.clone(),
            views,
            labels: self.labels.clone(),
            groups: self.groups.clone(),
        }
    }

    /// A single-view dataset sharing this dataset's labels. Instances absent
    /// from the view stay in with an empty column.
    pub fn single_view(&self, index: usize) -> MultiViewDataset {
        self.with_views(vec![self.views[index].clone()])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// One row per feature, one column per instance.
    #[default]
    FeatureMajor,
    /// One row per instance; transposed on load.
    InstanceMajor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub id: usize,
    pub path: String,
    #[serde(default)]
    pub orientation: Orientation,
}

/// On-disk description of a dataset. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub views: Vec<ManifestView>,
    pub labels: String,
    pub masks: String,
    /// Optional CSV with one row of `n` group identifiers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Shift each feature row with a negative minimum so that its minimum
    /// over present instances becomes zero. Without it, negative entries
    /// are rejected.
    pub shift_nonneg: bool,
    /// Min-max scale each feature row to [0, 1] over present instances.
    pub standardize: bool,
}

pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<MultiViewDataset> {
    load_dataset_with(manifest_path, LoadOptions::default())
}

pub fn load_dataset_with(manifest_path: impl AsRef<Path>, options: LoadOptions) -> Result<MultiViewDataset> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| AslslError::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| AslslError::Manifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    if manifest.views.is_empty() {
        return Err(AslslError::Manifest {
            path: manifest_path.to_path_buf(),
            message: "no views listed".into(),
        });
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let labels_path = base.join(&manifest.labels);
    let labels = read_csv_matrix(&labels_path, |_, _| true)?;
    let n = labels.ncols();
    if let Some(((row, col), &v)) = labels.indexed_iter().find(|(_, &v)| v != 0.0 && v != 1.0) {
        return Err(AslslError::Cell {
            file: labels_path,
            row,
            col,
            message: format!("non-binary label {v}"),
        });
    }

    let masks_path = base.join(&manifest.masks);
    let masks = read_csv_matrix(&masks_path, |_, _| true)?;
    if masks.nrows() != manifest.views.len() || masks.ncols() != n {
        return Err(AslslError::FileDimension {
            file: masks_path,
            message: format!(
                "expected {} rows × {n} columns, found {} × {}",
                manifest.views.len(),
                masks.nrows(),
                masks.ncols()
            ),
        });
    }
    if let Some(((row, col), &v)) = masks.indexed_iter().find(|(_, &v)| v != 0.0 && v != 1.0) {
        return Err(AslslError::Cell {
            file: masks_path,
            row,
            col,
            message: format!("mask entry {v} is not 0 or 1"),
        });
    }
    if let Some(instance) = (0..n).find(|&j| masks.column(j).iter().all(|&v| v == 0.0)) {
        return Err(AslslError::InstanceAbsent { instance });
    }

    let mut views = Vec::with_capacity(manifest.views.len());
    for (v, entry) in manifest.views.iter().enumerate() {
        let path = base.join(&entry.path);
        let presence: Vec<bool> = masks.row(v).iter().map(|&x| x == 1.0).collect();
        // Cells of absent instances may hold anything parseable, including NaN.
        let is_present = |row: usize, col: usize| match entry.orientation {
            Orientation::FeatureMajor => presence.get(col).copied().unwrap_or(true),
            Orientation::InstanceMajor => presence.get(row).copied().unwrap_or(true),
        };
        let raw = read_csv_matrix(&path, is_present)?;
        let features = match entry.orientation {
            Orientation::FeatureMajor => raw,
            Orientation::InstanceMajor => raw.reversed_axes().as_standard_layout().to_owned(),
        };
        if features.ncols() != n {
            return Err(AslslError::FileDimension {
                file: path,
                message: format!("view {} has {} instances, labels have {n}", entry.id, features.ncols()),
            });
        }
        let features = preprocess(features, &presence, options, &path, entry.orientation)?;
        views.push(ViewBlock::new(entry.id, features, presence)?);
    }

    let mut dataset = MultiViewDataset::new(manifest.name.clone(), views, LabelMatrix::new(labels)?)?;
    if let Some(groups) = &manifest.groups {
        let path = base.join(groups);
        let text = fs::read_to_string(&path).map_err(|e| AslslError::io(&path, e))?;
        let ids: Vec<String> = text
            .lines()
            .next()
            .unwrap_or("")
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        if ids.len() != n {
            return Err(AslslError::FileDimension {
                file: path,
                message: format!("{} group ids for {n} instances", ids.len()),
            });
        }
        dataset = dataset.with_groups(ids)?;
    }
    Ok(dataset)
}

fn preprocess(
    mut features: Array2<f64>,
    presence: &[bool],
    options: LoadOptions,
    path: &Path,
    orientation: Orientation,
) -> Result<Array2<f64>> {
    zero_absent_columns(&mut features, presence);
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let present = || row_present(presence);
        let (lo, hi) = present().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
            (lo.min(row[j]), hi.max(row[j]))
        });
        if !lo.is_finite() {
            continue;
        }
        if options.standardize {
            let span = hi - lo;
            for j in present() {
                row[j] = if span > 0.0 { (row[j] - lo) / span } else { 0.0 };
            }
        } else if lo < 0.0 {
            if options.shift_nonneg {
                for j in present() {
                    row[j] -= lo;
                }
            } else {
                let j = present().find(|&j| row[j] == lo).unwrap_or(0);
                let (r, c) = match orientation {
                    Orientation::FeatureMajor => (i, j),
                    Orientation::InstanceMajor => (j, i),
                };
                return Err(AslslError::Cell {
                    file: path.to_path_buf(),
                    row: r,
                    col: c,
                    message: format!("negative feature value {lo} (use the shift-nonneg option)"),
                });
            }
        }
    }
    Ok(features)
}

fn row_present(presence: &[bool]) -> impl Iterator<Item = usize> + '_ {
    presence.iter().enumerate().filter(|(_, &p)| p).map(|(j, _)| j)
}

/// Reads a headerless numeric CSV. Non-finite values are rejected wherever
/// `must_be_finite(row, col)` holds.
fn read_csv_matrix(path: &Path, must_be_finite: impl Fn(usize, usize) -> bool) -> Result<Array2<f64>> {
    let file = fs::File::open(path).map_err(|e| AslslError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        match ncols {
            None => ncols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(AslslError::FileDimension {
                    file: path.to_path_buf(),
                    message: format!("row {row} has {} columns, expected {c}", record.len()),
                })
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| AslslError::Cell {
                file: path.to_path_buf(),
                row,
                col,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !value.is_finite() && must_be_finite(row, col) {
                return Err(AslslError::Cell {
                    file: path.to_path_buf(),
                    row,
                    col,
                    message: format!("non-finite value {value}"),
                });
            }
            data.push(value);
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    Array2::from_shape_vec((nrows, ncols), data).map_err(|e| AslslError::FileDimension {
        file: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub(crate) fn write_csv_matrix(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let mut out = String::with_capacity(matrix.len() * 8);
    for row in matrix.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| AslslError::io(path, e))
}

/// Writes the dataset as a manifest plus CSV files into `dir` and returns
/// the manifest path. Views are written feature-major.
pub fn save_dataset(dataset: &MultiViewDataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| AslslError::io(dir, e))?;
    let mut views = Vec::with_capacity(dataset.n_views());
    for view in dataset.views() {
        let file = format!("view_{}.csv", view.view_id());
        write_csv_matrix(&dir.join(&file), view.features())?;
        views.push(ManifestView {
            id: view.view_id(),
            path: file,
            orientation: Orientation::FeatureMajor,
        });
    }
    write_csv_matrix(&dir.join("labels.csv"), dataset.labels().as_array())?;
    let masks = Array2::from_shape_fn((dataset.n_views(), dataset.n_instances()), |(v, j)| {
        if dataset.views()[v].presence()[j] {
            1.0
        } else {
            0.0
        }
    });
    write_csv_matrix(&dir.join("masks.csv"), &masks)?;
    let groups = match dataset.groups() {
        Some(ids) => {
            let path = dir.join("groups.csv");
            fs::write(&path, format!("{}\n", ids.join(","))).map_err(|e| AslslError::io(&path, e))?;
            Some("groups.csv".to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        name: dataset.name().to_string(),
        views,
        labels: "labels.csv".into(),
        masks: "masks.csv".into(),
        groups,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| AslslError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn fixture(dir: &Path, labels: &str, masks: &str) -> PathBuf {
        write(dir, "v0.csv", "1,2,3,4\n0,1,0,1\n5,5,5,5\n");
        write(dir, "v1.csv", "0.5,0.25,1,2\n3,3,0,1\n");
        write(dir, "labels.csv", labels);
        write(dir, "masks.csv", masks);
        let manifest = r#"{"name":"toy","views":[{"id":0,"path":"v0.csv","orientation":"feature_major"},{"id":1,"path":"v1.csv"}],"labels":"labels.csv","masks":"masks.csv"}"#;
        write(dir, "manifest.json", manifest);
        dir.join("manifest.json")
    }

    #[test]
    fn loads_consistent_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,1,0\n0,1,1,0\n", "1,1,1,1\n1,1,1,1\n");
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.n_views(), 2);
        assert_eq!(ds.n_instances(), 4);
        assert_eq!(ds.n_labels(), 2);
        assert_eq!(ds.dims(), vec![3, 2]);
    }

    #[test]
    fn rejects_non_binary_label() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,0.5,0\n0,1,1,0\n", "1,1,1,1\n1,1,1,1\n");
        let err = load_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-binary label"), "{msg}");
        assert!(msg.contains("row 0, column 2"), "{msg}");
        assert!(msg.contains("labels.csv"), "{msg}");
    }

    #[test]
    fn rejects_instance_absent_everywhere() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,1,0\n0,1,1,0\n", "1,1,1,0\n1,1,1,0\n");
        let err = load_dataset(&path).unwrap_err();
        assert!(matches!(err, AslslError::InstanceAbsent { instance: 3 }));
        assert!(err.to_string().contains("instance 3 absent from all views"));
    }

    #[test]
    fn masked_columns_are_zeroed_and_may_be_nan() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,1,0\n0,1,1,0\n", "1,0,1,1\n1,1,1,1\n");
        write(tmp.path(), "v0.csv", "1,NaN,3,4\n0,-7,0,1\n5,5,5,5\n");
        let ds = load_dataset(&path).unwrap();
        assert!(ds.views()[0].features().column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_present_value_reports_position() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,1,0\n0,1,1,0\n", "1,1,1,1\n1,1,1,1\n");
        write(tmp.path(), "v1.csv", "0.5,0.25,1,2\n3,inf,0,1\n");
        let msg = load_dataset(&path).unwrap_err().to_string();
        assert!(msg.contains("v1.csv") && msg.contains("row 1, column 1"), "{msg}");
    }

    #[test]
    fn dimension_mismatch_names_file() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,1,0\n0,1,1,0\n", "1,1,1,1\n1,1,1,1\n");
        write(tmp.path(), "v1.csv", "0.5,0.25,1\n3,3,0\n");
        let msg = load_dataset(&path).unwrap_err().to_string();
        assert!(msg.contains("v1.csv") && msg.contains("dimension mismatch"), "{msg}");
    }

    #[test]
    fn negative_values_rejected_or_shifted() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,1,0\n0,1,1,0\n", "1,1,1,1\n1,1,1,1\n");
        write(tmp.path(), "v1.csv", "0.5,-0.25,1,2\n3,3,0,1\n");
        let msg = load_dataset(&path).unwrap_err().to_string();
        assert!(msg.contains("row 0, column 1"), "{msg}");
        let opts = LoadOptions {
            shift_nonneg: true,
            ..Default::default()
        };
        let ds = load_dataset_with(&path, opts).unwrap();
        assert_eq!(ds.views()[1].features().row(0).to_vec(), vec![0.75, 0.0, 1.25, 2.25]);
        assert_eq!(ds.views()[1].features().row(1).to_vec(), vec![3.0, 3.0, 0.0, 1.0]);
    }

    #[test]
    fn instance_major_is_transposed() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,1,0\n0,1,1,0\n", "1,1,1,1\n1,1,1,1\n");
        write(tmp.path(), "v1.csv", "0.5,3\n0.25,3\n1,0\n2,1\n");
        let text = fs::read_to_string(&path).unwrap().replace(
            r#""path":"v1.csv""#,
            r#""path":"v1.csv","orientation":"instance_major""#,
        );
        fs::write(&path, text).unwrap();
        let ds = load_dataset(&path).unwrap();
        assert_eq!(
            ds.views()[1].features(),
            &array![[0.5, 0.25, 1.0, 2.0], [3.0, 3.0, 0.0, 1.0]]
        );
    }

    #[test]
    fn standardize_scales_rows_to_unit_range() {
        let tmp = tempfile::tempdir().unwrap();
        let path = fixture(tmp.path(), "1,0,1,0\n0,1,1,0\n", "1,1,1,1\n1,1,1,1\n");
        let opts = LoadOptions {
            standardize: true,
            ..Default::default()
        };
        let ds = load_dataset_with(&path, opts).unwrap();
        let v0 = ds.views()[0].features();
        assert_eq!(v0.row(0).to_vec(), vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(v0.row(2).to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn mask_matrix_is_diagonal_indicator() {
        let full = ViewBlock::new(0, Array2::ones((2, 3)), vec![true; 3]).unwrap();
        assert_eq!(mask_matrix(&full), Array2::<f64>::eye(3));
        let partial = ViewBlock::new(0, Array2::ones((2, 3)), vec![true, false, true]).unwrap();
        assert_eq!(mask_matrix(&partial), Array2::from_diag(&array![1.0, 0.0, 1.0]));
        let none = ViewBlock::new(0, Array2::ones((1, 2)), vec![false, false]).unwrap();
        assert_eq!(mask_matrix(&none), Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn features_times_mask_equals_stored_features() {
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let view = ViewBlock::new(0, x, vec![true, false, true]).unwrap();
        assert_eq!(view.features().dot(&mask_matrix(&view)), view.features());
        assert_eq!(view.features(), &array![[1.0, 0.0, 3.0], [4.0, 0.0, 6.0]]);
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let x0 = array![[0.1, 1e-300, 3.0, 7.25], [1.0 / 3.0, 0.0, 2.0, 1e10]];
        let x1 = array![[std::f64::consts::PI, 2.0, 0.0, 5.5]];
        let views = vec![
            ViewBlock::new(0, x0, vec![true, true, false, true]).unwrap(),
            ViewBlock::new(1, x1, vec![true, false, true, true]).unwrap(),
        ];
        let labels = LabelMatrix::new(array![[1.0, 0.0, 1.0, 0.0]]).unwrap();
        let ds = MultiViewDataset::new("rt", views, labels)
            .unwrap()
            .with_groups(vec!["a".into(), "a".into(), "b".into(), "c".into()])
            .unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&ds, tmp.path()).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_eq!(back, ds);
        for (a, b) in back.views().iter().zip(ds.views()) {
            for (x, y) in a.features().iter().zip(b.features()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
