//! Datasets, client shards, the synthetic generator, CSV ingestion and
//! partitioning of a pooled dataset into a federation.

use std::collections::HashMap;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Features, binary labels and a binary protected attribute.
///
/// Features are stored row-major. All three containers have the same length,
/// which is at least one.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
    protected: Vec<u8>,
}

impl TabularDataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, protected: Vec<u8>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        let features = rows.into_iter().flatten().collect();
        Self::from_flat(features, dim, labels, protected)
    }

    pub fn from_flat(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<u8>,
        protected: Vec<u8>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Validation("dataset must contain at least one row".into()));
        }
        if dim == 0 {
            return Err(Error::Validation("dataset must have at least one feature".into()));
        }
        if protected.len() != n || features.len() != n * dim {
            return Err(Error::Validation(format!(
                "length mismatch: {} labels, {} protected values, {} feature values for dim {}",
                n,
                protected.len(),
                features.len(),
                dim
            )));
        }
        if labels.iter().chain(protected.iter()).any(|&v| v > 1) {
            return Err(Error::Validation(
                "labels and protected attribute must be 0 or 1".into(),
            ));
        }
        Ok(TabularDataset {
            features,
            dim,
            labels,
            protected,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false for a constructed dataset; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn protected(&self, i: usize) -> u8 {
        self.protected[i]
    }

    pub fn protected_values(&self) -> &[u8] {
        &self.protected
    }

    /// Number of rows with protected attribute `a`.
    pub fn group_count(&self, a: u8) -> usize {
        self.protected.iter().filter(|&&p| p == a).count()
    }

    /// Rows at the given indices, in the given order. Returns `None` for an
    /// empty index list.
    pub fn subset(&self, indices: &[usize]) -> Option<TabularDataset> {
        if indices.is_empty() {
            return None;
        }
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Some(TabularDataset {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            protected: indices.iter().map(|&i| self.protected[i]).collect(),
        })
    }

    /// Concatenates datasets of equal dimension.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a TabularDataset>) -> Result<Self> {
        let mut it = parts.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::Validation("nothing to concatenate".into()))?;
        let mut out = first.clone();
        for part in it {
            if part.dim != out.dim {
                return Err(Error::DimensionMismatch {
                    expected: out.dim,
                    got: part.dim,
                });
            }
            out.features.extend_from_slice(&part.features);
            out.labels.extend_from_slice(&part.labels);
            out.protected.extend_from_slice(&part.protected);
        }
        Ok(out)
    }

    fn map_features(&self, mut f: impl FnMut(usize, f64) -> f64) -> TabularDataset {
        let dim = self.dim;
        let features = self
            .features
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(idx % dim, v))
            .collect();
        TabularDataset {
            features,
            ..self.clone()
        }
    }
}

/// The data owned by one client, with its mixture weight `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    pub weight: f64,
    pub dataset: TabularDataset,
}

/// Checks that shard weights are non-negative and sum to one.
pub fn validate_weights(shards: &[ClientShard]) -> Result<()> {
    if shards.is_empty() {
        return Err(Error::EmptyFederation("no clients".into()));
    }
    if shards.iter().any(|s| !(s.weight >= 0.0)) {
        return Err(Error::Validation("client weights must be non-negative".into()));
    }
    let total: f64 = shards.iter().map(|s| s.weight).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!(
            "client weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Replaces shard weights with `weights`, normalized to sum to one.
pub fn reweight(shards: &mut [ClientShard], weights: &[f64]) -> Result<()> {
    if weights.len() != shards.len() {
        return Err(Error::DimensionMismatch {
            expected: shards.len(),
            got: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
        return Err(Error::Validation("weights must be non-negative with a positive sum".into()));
    }
    for (s, w) in shards.iter_mut().zip(weights) {
        s.weight = w / total;
    }
    Ok(())
}

/// Parameters of the synthetic federation.
///
/// Client `k` (zero-based id) draws `A ~ Bernoulli(1/2)` and
/// `X ~ h N(mu(k, A), I) + (1 - h) N(mu(k, 1 - A), I)` where `h` is the
/// heterogeneity and `mu(k, a)` has all entries `+1` when `k + a` is even and
/// `-1` otherwise. Labels are `1[sum(X) > 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_clients: usize,
    pub samples_per_client: usize,
    pub dim: usize,
    pub heterogeneity: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_clients: 10,
            samples_per_client: 200,
            dim: 10,
            heterogeneity: 1.0,
            seed: 0,
        }
    }
}

/// Sign of the group mean vector for client `k` and group `a`.
pub fn group_mean_sign(k: usize, a: u8) -> f64 {
    if (k + a as usize) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<ClientShard>> {
    if spec.n_clients == 0 || spec.samples_per_client == 0 || spec.dim == 0 {
        return Err(Error::Config(
            "synthetic spec needs at least one client, sample and feature".into(),
        ));
    }
    if !(0.5..=1.0).contains(&spec.heterogeneity) {
        return Err(Error::Config(format!(
            "heterogeneity must lie in [0.5, 1], got {}",
            spec.heterogeneity
        )));
    }
    let weight = 1.0 / spec.n_clients as f64;
    (0..spec.n_clients)
        .map(|k| {
            let mut rng = stream_rng(spec.seed, Stream::Synthetic, 0, k as u64);
            let n = spec.samples_per_client;
            let mut features = Vec::with_capacity(n * spec.dim);
            let mut labels = Vec::with_capacity(n);
            let mut protected = Vec::with_capacity(n);
            for _ in 0..n {
                let a: u8 = rng.random_bool(0.5).into();
                let own_component = rng.random::<f64>() < spec.heterogeneity;
                let component_group = if own_component { a } else { 1 - a };
                let mean = group_mean_sign(k, component_group);
                let mut total = 0.0;
                for _ in 0..spec.dim {
                    let z: f64 = rng.sample(StandardNormal);
                    let x = mean + z;
                    total += x;
                    features.push(x);
                }
                labels.push(u8::from(total > 0.0));
                protected.push(a);
            }
            Ok(ClientShard {
                client_id: k,
                weight,
                dataset: TabularDataset::from_flat(features, spec.dim, labels, protected)?,
            })
        })
        .collect()
}

/// How the protected attribute is derived from its CSV column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtectedThreshold {
    /// `A = 1[value > threshold]`.
    Value(f64),
    /// Threshold at the median of the column (after dropping incomplete rows).
    Median,
}

/// Column selection for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvColumns {
    pub features: Vec<String>,
    pub label: String,
    pub protected: String,
    #[serde(default)]
    pub protected_threshold: Option<ProtectedThreshold>,
    /// Column used to split rows into clients; kept aligned with the dataset.
    #[serde(default)]
    pub group: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: TabularDataset,
    pub groups: Option<Vec<String>>,
    pub dropped_rows: usize,
}

fn is_missing(field: &str) -> bool {
    matches!(field.trim(), "" | "?" | "NA" | "na" | "NaN" | "nan" | "null")
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Reads a header-first, comma-separated file. Rows with a missing value in
/// any selected column are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, columns: &CsvColumns) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Config(format!("cannot open {}: {e}", path.display())),
            _ => Error::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in {}", path.display())))
    };
    let feature_idx = columns
        .features
        .iter()
        .map(|c| position(c))
        .collect::<Result<Vec<_>>>()?;
    if feature_idx.is_empty() {
        return Err(Error::Config("at least one feature column is required".into()));
    }
    let label_idx = position(&columns.label)?;
    let protected_idx = position(&columns.protected)?;
    let group_idx = columns.group.as_deref().map(position).transpose()?;

    let parse = |field: &str, col: &str, line: u64| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| {
            Error::Validation(format!("line {line}: column `{col}` is not numeric: `{field}`"))
        })
    };

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut raw_protected = Vec::new();
    let mut groups = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut selected = feature_idx.clone();
        selected.extend([label_idx, protected_idx]);
        selected.extend(group_idx);
        if selected
            .iter()
            .any(|&i| record.get(i).map(is_missing).unwrap_or(true))
        {
            dropped += 1;
            continue;
        }
        for (&i, name) in feature_idx.iter().zip(&columns.features) {
            features.push(parse(&record[i], name, line)?);
        }
        let label = parse(&record[label_idx], &columns.label, line)?;
        if label != 0.0 && label != 1.0 {
            return Err(Error::Validation(format!(
                "line {line}: label column `{}` must be 0 or 1, got {label}",
                columns.label
            )));
        }
        labels.push(label as u8);
        raw_protected.push(parse(&record[protected_idx], &columns.protected, line)?);
        if let Some(g) = group_idx {
            groups.push(record[g].trim().to_string());
        }
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} rows with missing values", path.display());
    }
    if labels.is_empty() {
        return Err(Error::Validation(format!("{} has no complete rows", path.display())));
    }

    let protected = match columns.protected_threshold {
        Some(ProtectedThreshold::Value(t)) => raw_protected.iter().map(|&v| u8::from(v > t)).collect(),
        Some(ProtectedThreshold::Median) => {
            let t = median(&raw_protected);
            raw_protected.iter().map(|&v| u8::from(v > t)).collect()
        }
        None => {
            if raw_protected.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Validation(format!(
                    "protected column `{}` is not binary and no threshold was given",
                    columns.protected
                )));
            }
            raw_protected.iter().map(|&v| v as u8).collect()
        }
    };

    Ok(LoadedCsv {
        dataset: TabularDataset::from_flat(features, feature_idx.len(), labels, protected)?,
        groups: group_idx.map(|_| groups),
        dropped_rows: dropped,
    })
}

/// One shard per distinct group value (in order of first appearance). Groups
/// smaller than `min_shard_size` are dropped; weights are proportional to the
/// retained shard sizes.
pub fn partition_by_column(
    dataset: &TabularDataset,
    group_values: &[String],
    min_shard_size: usize,
) -> Result<Vec<ClientShard>> {
    if group_values.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.len(),
            got: group_values.len(),
        });
    }
    let mut order: Vec<&str> = Vec::new();
    let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, g) in group_values.iter().enumerate() {
        members
            .entry(g.as_str())
            .or_insert_with(|| {
                order.push(g.as_str());
                Vec::new()
            })
            .push(i);
    }
    let mut kept = Vec::new();
    for g in order {
        let rows = &members[g];
        if rows.len() < min_shard_size {
            warn!("dropping group `{g}` with {} rows (< {min_shard_size})", rows.len());
            continue;
        }
        kept.push(rows);
    }
    if kept.is_empty() {
        return Err(Error::EmptyFederation(format!(
            "every group has fewer than {min_shard_size} rows"
        )));
    }
    let total: usize = kept.iter().map(|r| r.len()).sum();
    Ok(kept
        .into_iter()
        .enumerate()
        .map(|(client_id, rows)| ClientShard {
            client_id,
            weight: rows.len() as f64 / total as f64,
            dataset: dataset.subset(rows).expect("non-empty group"),
        })
        .collect())
}

/// Train and test shards of the same clients.
#[derive(Debug, Clone)]
pub struct Federation {
    pub train: Vec<ClientShard>,
    pub test: Vec<ClientShard>,
}

impl Federation {
    pub fn n_clients(&self) -> usize {
        self.train.len()
    }

    pub fn dim(&self) -> usize {
        self.train[0].dataset.dim()
    }

    pub fn pooled_train(&self) -> TabularDataset {
        TabularDataset::concat(self.train.iter().map(|s| &s.dataset)).expect("non-empty federation")
    }

    pub fn pooled_test(&self) -> TabularDataset {
        TabularDataset::concat(self.test.iter().map(|s| &s.dataset)).expect("non-empty federation")
    }

    /// Uses the full shards for both training and evaluation.
    pub fn without_split(shards: Vec<ClientShard>) -> Self {
        Federation {
            test: shards.clone(),
            train: shards,
        }
    }
}

/// Splits each shard at random into train and test parts.
///
/// Every shard keeps at least one training row; the test part falls back to
/// the training rows when the shard is too small to hold out anything.
pub fn train_test_split(shards: Vec<ClientShard>, test_fraction: f64, seed: u64) -> Result<Federation> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config(format!(
            "test_fraction must lie in [0, 1), got {test_fraction}"
        )));
    }
    validate_weights(&shards)?;
    let mut train = Vec::with_capacity(shards.len());
    let mut test = Vec::with_capacity(shards.len());
    for shard in shards {
        let n = shard.dataset.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = stream_rng(seed, Stream::Split, 0, shard.client_id as u64);
        idx.shuffle(&mut rng);
        let n_test = ((n as f64 * test_fraction).round() as usize).min(n - 1);
        let (test_idx, train_idx) = idx.split_at(n_test);
        let train_ds = shard.dataset.subset(train_idx).expect("at least one training row");
        let test_ds = shard.dataset.subset(test_idx).unwrap_or_else(|| train_ds.clone());
        train.push(ClientShard {
            dataset: train_ds,
            ..shard.clone()
        });
        test.push(ClientShard {
            dataset: test_ds,
            ..shard
        });
    }
    Ok(Federation { train, test })
}

/// Per-feature z-scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &TabularDataset) -> Self {
        let n = data.len() as f64;
        let d = data.dim();
        let mut mean = vec![0.0; d];
        for row in data.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in data.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        // Constant columns keep their scale.
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, data: &TabularDataset) -> TabularDataset {
        data.map_features(|j, v| (v - self.mean[j]) / self.scale[j])
    }

    /// Fits on the pooled training split and transforms every shard.
    pub fn standardize(fed: &Federation) -> Federation {
        let st = Standardizer::fit(&fed.pooled_train());
        let map = |shards: &[ClientShard]| {
            shards
                .iter()
                .map(|s| ClientShard {
                    dataset: st.apply(&s.dataset),
                    ..s.clone()
                })
                .collect()
        };
        Federation {
            train: map(&fed.train),
            test: map(&fed.test),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn synthetic_shapes_and_weights() {
        let spec = SyntheticSpec {
            seed: 3,
            ..Default::default()
        };
        let shards = generate_synthetic(&spec).unwrap();
        assert_eq!(shards.len(), 10);
        for s in &shards {
            assert_eq!(s.dataset.len(), 200);
            assert_eq!(s.dataset.dim(), 10);
            assert_eq!(s.weight, 0.1);
        }
        validate_weights(&shards).unwrap();
    }

    #[test]
    fn synthetic_is_reproducible() {
        let spec = SyntheticSpec {
            seed: 11,
            heterogeneity: 0.8,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 12, ..spec.clone() };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn synthetic_rejects_bad_heterogeneity() {
        for h in [0.49, 1.01, f64::NAN] {
            let spec = SyntheticSpec {
                heterogeneity: h,
                ..Default::default()
            };
            assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
        }
    }

    #[test]
    fn synthetic_group_means_follow_parity() {
        let spec = SyntheticSpec {
            samples_per_client: 400,
            seed: 5,
            ..Default::default()
        };
        for shard in generate_synthetic(&spec).unwrap() {
            for a in 0..2u8 {
                let sums: Vec<f64> = (0..shard.dataset.len())
                    .filter(|&i| shard.dataset.protected(i) == a)
                    .map(|i| shard.dataset.row(i).iter().sum())
                    .collect();
                let mean = sums.iter().sum::<f64>() / sums.len() as f64;
                assert_eq!(mean.signum(), group_mean_sign(shard.client_id, a));
            }
        }
    }

    #[test]
    fn csv_binary_protected_copied() {
        let f = write_csv("x1,x2,y,a\n1,2,0,1\n3,4,1,0\n5,6,1,1\n7,8,0,0\n");
        let cols = CsvColumns {
            features: vec!["x1".into(), "x2".into()],
            label: "y".into(),
            protected: "a".into(),
            protected_threshold: None,
            group: None,
        };
        let loaded = load_csv(f.path(), &cols).unwrap();
        assert_eq!(loaded.dataset.len(), 4);
        assert_eq!(loaded.dataset.protected_values(), &[1, 0, 1, 0]);
        assert_eq!(loaded.dataset.row(2), &[5.0, 6.0]);
        assert_eq!(loaded.dropped_rows, 0);
    }

    #[test]
    fn csv_threshold_and_missing_rows() {
        let f = write_csv("x,y,p\n1,0,0.1\n2,1,0.3\n?,1,0.2\n3,0,0.5\n4,1,0.9\n");
        let mut cols = CsvColumns {
            features: vec!["x".into()],
            label: "y".into(),
            protected: "p".into(),
            protected_threshold: Some(ProtectedThreshold::Value(0.4)),
            group: None,
        };
        let loaded = load_csv(f.path(), &cols).unwrap();
        assert_eq!(loaded.dropped_rows, 1);
        assert_eq!(loaded.dataset.protected_values(), &[0, 0, 1, 1]);
        cols.protected_threshold = Some(ProtectedThreshold::Median);
        let loaded = load_csv(f.path(), &cols).unwrap();
        assert_eq!(loaded.dataset.protected_values(), &[0, 0, 1, 1]);
    }

    #[test]
    fn csv_errors() {
        let f = write_csv("x,a\n1,0\n");
        let cols = CsvColumns {
            features: vec!["x".into()],
            label: "label".into(),
            protected: "a".into(),
            protected_threshold: None,
            group: None,
        };
        match load_csv(f.path(), &cols) {
            Err(Error::Config(msg)) => assert!(msg.contains("label")),
            other => panic!("expected config error, got {other:?}"),
        }

        let f = write_csv("x,y,a\n1,0,0.3\n2,1,0.7\n");
        let cols = CsvColumns {
            label: "y".into(),
            ..cols
        };
        assert!(matches!(load_csv(f.path(), &cols), Err(Error::Validation(_))));
    }

    fn toy(n: usize) -> TabularDataset {
        TabularDataset::from_flat((0..n).map(|i| i as f64).collect(), 1, vec![0; n], vec![0; n]).unwrap()
    }

    #[test]
    fn partition_counts() {
        let groups: Vec<String> = ["a", "a", "a", "b", "b", "c"].iter().map(|s| s.to_string()).collect();
        let shards = partition_by_column(&toy(6), &groups, 2).unwrap();
        assert_eq!(shards.len(), 2);
        assert!((shards[0].weight - 0.6).abs() < 1e-15);
        assert!((shards[1].weight - 0.4).abs() < 1e-15);
        assert_eq!(shards[1].dataset.row(0), &[3.0]);

        let one: Vec<String> = vec!["z".into(); 6];
        let shards = partition_by_column(&toy(6), &one, 2).unwrap();
        assert_eq!(shards.len(), 1);
        assert_eq!(shards[0].weight, 1.0);

        assert!(matches!(
            partition_by_column(&toy(6), &groups, 4),
            Err(Error::EmptyFederation(_))
        ));
    }

    #[test]
    fn partition_weight_range() {
        let sizes = [50, 150, 250, 100, 50, 100];
        let groups: Vec<String> = sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &n)| std::iter::repeat_n(g.to_string(), n))
            .collect();
        let shards = partition_by_column(&toy(groups.len()), &groups, 1).unwrap();
        let w: Vec<f64> = shards.iter().map(|s| s.weight).collect();
        assert!((w[0] - 0.0714).abs() < 1e-4 && (w[4] - 0.0714).abs() < 1e-4);
        assert!((w[2] - 0.3571).abs() < 1e-4);
        validate_weights(&shards).unwrap();
    }

    #[test]
    fn split_is_disjoint_and_sized() {
        let shards = generate_synthetic(&SyntheticSpec::default()).unwrap();
        let fed = train_test_split(shards.clone(), 0.25, 9).unwrap();
        for (orig, (tr, te)) in shards.iter().zip(fed.train.iter().zip(&fed.test)) {
            assert_eq!(tr.dataset.len(), 150);
            assert_eq!(te.dataset.len(), 50);
            let mut all: Vec<Vec<u64>> = tr
                .dataset
                .rows()
                .chain(te.dataset.rows())
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect();
            let mut want: Vec<Vec<u64>> = orig
                .dataset
                .rows()
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect();
            all.sort();
            want.sort();
            assert_eq!(all, want);
        }
    }

    #[test]
    fn standardizer_centers_pooled_train() {
        let shards = generate_synthetic(&SyntheticSpec::default()).unwrap();
        let fed = Standardizer::standardize(&train_test_split(shards, 0.25, 1).unwrap());
        let refit = Standardizer::fit(&fed.pooled_train());
        for (m, s) in refit.mean.iter().zip(&refit.scale) {
            assert!(m.abs() < 1e-12);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
