//! Labeled image datasets: MNIST ingestion, parity relabeling, seeded
//! rarefaction of one digit, and oversampling of selected samples.

pub mod idx;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub use idx::{read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxImages};

/// Class names of the parity task, indexed by class.
pub const PARITY_CLASS_NAMES: [&str; 2] = ["even", "odd"];

/// Images with class labels, subclass tags and unique sample ids.
///
/// For MNIST parity the class is `digit % 2` and the subclass tag is the digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
    class_labels: Vec<usize>,
    subclass_tags: Vec<u8>,
    sample_ids: Vec<u64>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(
        images: IdxImages,
        class_labels: Vec<usize>,
        subclass_tags: Vec<u8>,
        sample_ids: Vec<u64>,
        classes: usize,
    ) -> Result<Self> {
        let n = images.count;
        for (what, len) in [
            ("class label count", class_labels.len()),
            ("subclass tag count", subclass_tags.len()),
            ("sample id count", sample_ids.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(&bad) = class_labels.iter().find(|&&c| c >= classes) {
            return Err(Error::invalid(format!("class label {bad} out of range for {classes} classes")));
        }
        let unique: BTreeSet<_> = sample_ids.iter().collect();
        if unique.len() != n {
            return Err(Error::invalid("sample ids are not unique"));
        }
        Ok(Self {
            rows: images.rows,
            cols: images.cols,
            pixels: images.pixels,
            class_labels,
            subclass_tags,
            sample_ids,
            classes,
        })
    }

    /// Parity dataset from raw digit labels; ids are positions `0..N`.
    pub fn parity(images: IdxImages, digits: &[u8]) -> Result<Self> {
        if images.count != digits.len() {
            return Err(Error::format(format!(
                "image file holds {} images but label file holds {} labels",
                images.count,
                digits.len()
            )));
        }
        let (classes, subclasses) = parity_labels(digits)?;
        let ids = (0..digits.len() as u64).collect();
        Self::new(images, classes, subclasses, ids, 2)
    }

    pub fn len(&self) -> usize {
        self.class_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn input_dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.input_dim();
        &self.pixels[i * size..(i + 1) * size]
    }

    /// Pixels of sample `i` scaled to `[0, 1]`, written into `out`.
    pub fn input_into(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.image(i).iter().map(|&p| f64::from(p) / 255.0));
    }

    pub fn input(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.input_dim());
        self.input_into(i, &mut out);
        out
    }

    pub fn class_labels(&self) -> &[usize] {
        &self.class_labels
    }

    pub fn subclass_tags(&self) -> &[u8] {
        &self.subclass_tags
    }

    pub fn sample_ids(&self) -> &[u64] {
        &self.sample_ids
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.sample_ids.iter().position(|&s| s == id)
    }

    /// Keeps the samples at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        let size = self.input_dim();
        let mut pixels = Vec::with_capacity(positions.len() * size);
        for &p in positions {
            pixels.extend_from_slice(self.image(p));
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels,
            class_labels: positions.iter().map(|&p| self.class_labels[p]).collect(),
            subclass_tags: positions.iter().map(|&p| self.subclass_tags[p]).collect(),
            sample_ids: positions.iter().map(|&p| self.sample_ids[p]).collect(),
            classes: self.classes,
        }
    }

    pub fn images(&self) -> IdxImages {
        IdxImages {
            count: self.len(),
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels.clone(),
        }
    }
}

/// Maps digits to parity classes (even 0, odd 1); the digit becomes the subclass tag.
pub fn parity_labels(digits: &[u8]) -> Result<(Vec<usize>, Vec<u8>)> {
    if let Some(&bad) = digits.iter().find(|&&d| d > 9) {
        return Err(Error::invalid(format!("digit label {bad} outside 0-9")));
    }
    Ok((digits.iter().map(|&d| usize::from(d % 2)).collect(), digits.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RarefactionSpec {
    pub target_digit: u8,
    pub drop_probability: f64,
    pub seed: u64,
}

impl RarefactionSpec {
    pub fn new(target_digit: u8, drop_probability: f64, seed: u64) -> Result<Self> {
        if target_digit > 9 {
            return Err(Error::invalid(format!("target digit {target_digit} outside 0-9")));
        }
        if !(0.0..=1.0).contains(&drop_probability) {
            return Err(Error::invalid(format!(
                "drop probability {drop_probability} outside [0, 1]"
            )));
        }
        Ok(Self {
            target_digit,
            drop_probability,
            seed,
        })
    }
}

/// Drops each sample of the target subclass independently with the given
/// probability. One uniform draw is consumed per target sample, in order;
/// the sample is dropped when the draw is below the probability.
pub fn rarify(dataset: &LabeledDataset, spec: &RarefactionSpec) -> LabeledDataset {
    let mut rng = SplitMix64::new(spec.seed);
    let keep: Vec<usize> = (0..dataset.len())
        .filter(|&i| {
            dataset.subclass_tags[i] != spec.target_digit || rng.next_f64() >= spec.drop_probability
        })
        .collect();
    dataset.select(&keep)
}

/// Appends `added_count` verbatim copies of samples drawn uniformly with
/// replacement from `selected_ids`. Copies get fresh ids counting up from
/// the current maximum id.
pub fn oversample(
    dataset: &LabeledDataset,
    selected_ids: &BTreeSet<u64>,
    added_count: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if selected_ids.is_empty() {
        return Err(Error::invalid("oversampling needs at least one selected sample"));
    }
    let mut positions = Vec::with_capacity(selected_ids.len());
    for (pos, id) in dataset.sample_ids.iter().enumerate() {
        if selected_ids.contains(id) {
            positions.push((*id, pos));
        }
    }
    if positions.len() != selected_ids.len() {
        let present: BTreeSet<u64> = positions.iter().map(|(id, _)| *id).collect();
        let missing: Vec<_> = selected_ids.difference(&present).take(5).collect();
        return Err(Error::invalid(format!("selected ids not in dataset: {missing:?}")));
    }
    if added_count == 0 {
        return Ok(dataset.clone());
    }
    // Ascending-id order makes the draw independent of dataset order.
    positions.sort_unstable();

    let mut rng = SplitMix64::new(seed);
    let mut out = dataset.clone();
    let first_id = dataset.sample_ids.iter().max().map_or(0, |m| m + 1);
    out.pixels.reserve(added_count * dataset.input_dim());
    for next_id in (first_id..).take(added_count) {
        let (_, pos) = positions[rng.below(positions.len() as u64) as usize];
        out.pixels.extend_from_slice(dataset.image(pos));
        out.class_labels.push(dataset.class_labels[pos]);
        out.subclass_tags.push(dataset.subclass_tags[pos]);
        out.sample_ids.push(next_id);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }

    pub fn images_file(self) -> String {
        format!("{}-images-idx3-ubyte", self.prefix())
    }

    pub fn labels_file(self) -> String {
        format!("{}-labels-idx1-ubyte", self.prefix())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split {other:?}, expected train or test"))),
        }
    }
}

/// Finds `name` or `name.gz` in `dir`, preferring the uncompressed file.
fn locate(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::io(
        plain,
        std::io::Error::new(std::io::ErrorKind::NotFound, "MNIST file not found (also tried .gz)"),
    ))
}

/// Reads one MNIST split from a directory holding the standard file names.
pub fn load_mnist_digits(dir: impl AsRef<Path>, split: Split) -> Result<(IdxImages, Vec<u8>)> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "data directory not found"),
        ));
    }
    let images = read_idx_images(locate(dir, &split.images_file())?)?;
    let labels = read_idx_labels(locate(dir, &split.labels_file())?)?;
    Ok((images, labels))
}

/// MNIST split relabeled for parity classification.
pub fn load_mnist_parity(dir: impl AsRef<Path>, split: Split) -> Result<LabeledDataset> {
    let (images, digits) = load_mnist_digits(dir, split)?;
    LabeledDataset::parity(images, &digits)
}

/// Writes a parity dataset back out as an MNIST split (images plus digit labels).
pub fn write_mnist_split(dataset: &LabeledDataset, dir: impl AsRef<Path>, split: Split) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_idx_images(&dataset.images(), dir.join(split.images_file()))?;
    write_idx_labels(dataset.subclass_tags(), dir.join(split.labels_file()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One 2x2 image per digit label; pixel values encode the sample position.
    fn toy(digits: &[u8]) -> LabeledDataset {
        let pixels = (0..digits.len()).flat_map(|i| [i as u8; 4]).collect();
        let images = IdxImages::new(digits.len(), 2, 2, pixels).unwrap();
        LabeledDataset::parity(images, digits).unwrap()
    }

    #[test]
    fn parity_of_digits() {
        let (classes, subs) = parity_labels(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        assert_eq!(classes, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        assert_eq!(subs, (0..10).collect::<Vec<u8>>());
        assert_eq!(parity_labels(&[7]).unwrap().0, vec![1]);
        assert!(parity_labels(&[10]).is_err());
    }

    #[test]
    fn dataset_rejects_mismatched_counts_and_duplicate_ids() {
        let images = IdxImages::new(2, 1, 1, vec![0, 1]).unwrap();
        assert!(LabeledDataset::parity(images.clone(), &[1, 2, 3]).is_err());
        assert!(LabeledDataset::new(images.clone(), vec![0, 1], vec![0, 1], vec![4, 4], 2).is_err());
        assert!(LabeledDataset::new(images, vec![0, 2], vec![0, 1], vec![0, 1], 2).is_err());
    }

    #[test]
    fn rarify_extremes() {
        let ds = toy(&[9, 1, 9, 4, 9, 9, 0]);
        let keep_all = rarify(&ds, &RarefactionSpec::new(9, 0.0, 3).unwrap());
        assert_eq!(keep_all, ds);
        let drop_all = rarify(&ds, &RarefactionSpec::new(9, 1.0, 3).unwrap());
        assert_eq!(drop_all.subclass_tags(), &[1, 4, 0]);
        assert_eq!(drop_all.sample_ids(), &[1, 3, 6]);
        assert_eq!(drop_all.image(1), ds.image(3));
    }

    #[test]
    fn rarify_is_seeded() {
        let digits: Vec<u8> = (0..200).map(|i| (i % 10) as u8).collect();
        let ds = toy(&digits);
        let spec = RarefactionSpec::new(3, 0.5, 11).unwrap();
        assert_eq!(rarify(&ds, &spec), rarify(&ds, &spec));
        let other = rarify(&ds, &RarefactionSpec::new(3, 0.5, 12).unwrap());
        assert_ne!(rarify(&ds, &spec).sample_ids(), other.sample_ids());
    }

    #[test]
    fn rarefaction_spec_validates() {
        assert!(RarefactionSpec::new(10, 0.5, 0).is_err());
        assert!(RarefactionSpec::new(3, 1.5, 0).is_err());
        assert!(RarefactionSpec::new(3, -0.1, 0).is_err());
    }

    #[test]
    fn oversample_singleton_and_zero() {
        let ds = toy(&[2, 5, 8]);
        let sel: BTreeSet<u64> = [1].into();
        assert_eq!(oversample(&ds, &sel, 0, 1).unwrap(), ds);
        let out = oversample(&ds, &sel, 5, 1).unwrap();
        assert_eq!(out.len(), 8);
        assert_eq!(&out.sample_ids()[3..], &[3, 4, 5, 6, 7]);
        for i in 3..8 {
            assert_eq!(out.image(i), ds.image(1));
            assert_eq!(out.subclass_tags()[i], 5);
            assert_eq!(out.class_labels()[i], 1);
        }
    }

    #[test]
    fn oversample_rejects_bad_selection() {
        let ds = toy(&[2, 5]);
        assert!(oversample(&ds, &BTreeSet::new(), 3, 0).is_err());
        assert!(oversample(&ds, &[7].into(), 3, 0).is_err());
    }

    #[test]
    fn split_names() {
        assert_eq!(Split::Train.images_file(), "train-images-idx3-ubyte");
        assert_eq!(Split::Test.labels_file(), "t10k-labels-idx1-ubyte");
        assert!("dev".parse::<Split>().is_err());
    }

    #[test]
    fn mnist_split_round_trip_through_directory() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy(&[3, 1, 4, 1, 5]);
        write_mnist_split(&ds, dir.path(), Split::Test).unwrap();
        assert_eq!(load_mnist_parity(dir.path(), Split::Test).unwrap(), ds);
        assert!(load_mnist_parity(dir.path(), Split::Train).is_err());
        assert!(load_mnist_parity(dir.path().join("nope"), Split::Test).is_err());
    }
}
