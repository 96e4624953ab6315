//! Dataset ingestion, anomaly splits and the training sampler.

mod csv;
mod idx;
mod kdd;
mod sampler;

pub use self::csv::{load_csv, read_csv, save_csv, CsvOptions};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use kdd::{
    load_kdd, parse_kdd_line, preprocess_kdd, read_kdd, KddPreprocessor, KddRecord, KDD_CONTINUOUS_COUNT,
    KDD_FEATURE_COLUMNS, KDD_SYMBOLIC_COLUMNS,
};
pub use sampler::{Sampler, SamplingMode};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{ExposeError, Result};
use crate::scoring::Class;

/// Splits a labelled dataset into an unlabelled one-class training set and a
/// binary-labelled test set.
///
/// `test_size` rows are drawn uniformly at random from the whole pool; their
/// labels become [`Class::Normal`] / [`Class::Anomaly`] codes. Every remaining
/// row carrying `normal_label` goes to the training set.
pub fn make_anomaly_split(
    data: &Dataset,
    normal_label: i64,
    test_size: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let labels = data
        .labels()
        .ok_or_else(|| ExposeError::input("anomaly split needs a labelled dataset"))?;
    if !labels.contains(&normal_label) {
        return Err(ExposeError::input(format!("normal label {normal_label} does not occur in the dataset")));
    }
    if test_size == 0 || test_size >= data.n() {
        return Err(ExposeError::input(format!(
            "test size {test_size} must be between 1 and {} (dataset has {} rows)",
            data.n() - 1,
            data.n()
        )));
    }
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test_idx, rest) = order.split_at(test_size);
    let mut train_idx: Vec<usize> = rest.iter().copied().filter(|&i| labels[i] == normal_label).collect();
    train_idx.sort_unstable();
    if train_idx.is_empty() {
        return Err(ExposeError::input(format!(
            "no rows with normal label {normal_label} remain for training after drawing {test_size} test rows"
        )));
    }
    let train = data
        .select(&train_idx, format!("{}[train, label {normal_label}]", data.name))?
        .without_labels();
    let test_labels = test_idx
        .iter()
        .map(|&i| Class::from_is_normal(labels[i] == normal_label).label())
        .collect();
    let test = data.select(test_idx, format!("{}[test]", data.name))?;
    let test = Dataset::new(
        test.features().to_vec(),
        test.dim(),
        Some(test_labels),
        test.name.clone(),
        format!("{}; binary labels 1 = normal (label {normal_label}), 0 = anomaly", data.provenance),
    )?;
    Ok((train, test))
}
