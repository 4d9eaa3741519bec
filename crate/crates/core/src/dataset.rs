//! In-memory datasets and the `KPD1` binary file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "KPD1" | u32 version | u32 n | u32 C | u32 H | u32 W
//!        | n*C*H*W f32 | u8 has_labels | [n u32 labels] | u32 num_classes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::augment::Image;
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"KPD1";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    shape: [usize; 3],
    images: Vec<Image>,
    labels: Option<Vec<usize>>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        shape: [usize; 3],
        images: Vec<Image>,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Dimension(format!("bad image shape {shape:?}")));
        }
        if let Some(img) = images.iter().find(|i| i.shape() != shape) {
            return Err(Error::Dimension(format!(
                "image shape {:?} differs from dataset shape {shape:?}",
                img.shape()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != images.len() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} images",
                    labels.len(),
                    images.len()
                )));
            }
            if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
                return Err(Error::InvalidLabel { label, num_classes });
            }
        }
        Ok(Self {
            shape,
            images,
            labels,
            num_classes,
        })
    }

    pub fn labeled(images: Vec<Image>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let shape = images
            .first()
            .map(Image::shape)
            .ok_or(Error::EmptyDataset("cannot infer shape from no images"))?;
        Self::new(shape, images, Some(labels), num_classes)
    }

    pub fn unlabeled(images: Vec<Image>, num_classes: usize) -> Result<Self> {
        let shape = images
            .first()
            .map(Image::shape)
            .ok_or(Error::EmptyDataset("cannot infer shape from no images"))?;
        Self::new(shape, images, None, num_classes)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn input_dim(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Config("dataset has no labels".into()))
    }

    /// Same images with labels dropped.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            labels: None,
            ..self.clone()
        }
    }

    /// Keeps the examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            shape: self.shape,
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            num_classes: self.num_classes,
        }
    }

    /// First `per_class` examples of every class, in original order.
    pub fn take_per_class(&self, per_class: usize) -> Result<Dataset> {
        let labels = self.require_labels()?;
        let mut counts = vec![0usize; self.num_classes];
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let c = &mut counts[labels[i]];
                *c += 1;
                *c <= per_class
            })
            .collect();
        Ok(self.select(&keep))
    }

    /// Number of examples per class.
    pub fn class_counts(&self) -> Result<Vec<usize>> {
        let labels = self.require_labels()?;
        let mut counts = vec![0usize; self.num_classes];
        for &l in labels {
            counts[l] += 1;
        }
        Ok(counts)
    }

    /// Errors with the first class that has no labeled example.
    pub fn check_coverage(&self) -> Result<()> {
        match self.class_counts()?.iter().position(|&c| c == 0) {
            Some(c) => Err(Error::Coverage(c)),
            None => Ok(()),
        }
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.shape != other.shape || self.num_classes != other.num_classes {
            return Err(Error::Dimension("cannot concatenate incompatible datasets".into()));
        }
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(Dataset {
            shape: self.shape,
            images: self.images.iter().chain(&other.images).cloned().collect(),
            labels,
            num_classes: self.num_classes,
        })
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_dataset(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

pub fn encode_dataset(w: &mut impl Write, ds: &Dataset) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(ds.len(), "sample count")?.to_le_bytes())?;
    for d in ds.shape {
        w.write_all(&to_u32(d, "dimension")?.to_le_bytes())?;
    }
    for img in &ds.images {
        for v in img.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    match &ds.labels {
        Some(labels) => {
            w.write_all(&[1u8])?;
            for &l in labels {
                w.write_all(&to_u32(l, "label")?.to_le_bytes())?;
            }
        }
        None => w.write_all(&[0u8])?,
    }
    w.write_all(&to_u32(ds.num_classes, "class count")?.to_le_bytes())?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_dataset(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != DATASET_MAGIC {
        return Err(Error::Format("bad magic, expected KPD1".into()));
    }
    let version = cur.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = cur.u32()? as usize;
    let shape = [cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize];
    let per_image = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let total = per_image
        .checked_mul(n)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("sample data size overflows".into()))?;
    if total > bytes.len() {
        return Err(Error::Format(format!(
            "header claims {total} bytes of pixels but file has {}",
            bytes.len()
        )));
    }
    let pixels = cur.take(total)?;
    let mut images = Vec::with_capacity(n);
    for chunk in pixels.chunks_exact(per_image * 4).take(n) {
        let data = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        images.push(
            Image::new(shape[0], shape[1], shape[2], data)
                .map_err(|e| Error::Format(e.to_string()))?,
        );
    }
    let labels = match cur.u8()? {
        0 => None,
        1 => {
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                labels.push(cur.u32()? as usize);
            }
            Some(labels)
        }
        flag => return Err(Error::Format(format!("bad has_labels flag {flag}"))),
    };
    let num_classes = cur.u32()? as usize;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Dataset::new(shape, images, labels, num_classes).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_dataset(seed: u64, n: usize, labeled: bool) -> Dataset {
        let mut rng = Rng::new(seed);
        let images: Vec<Image> = (0..n)
            .map(|_| Image::new(3, 2, 3, (0..18).map(|_| rng.unit() as f32).collect()).unwrap())
            .collect();
        let labels = labeled.then(|| (0..n).map(|i| i % 4).collect());
        Dataset::new([3, 2, 3], images, labels, 4).unwrap()
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let mut bytes = Vec::new();
        encode_dataset(&mut bytes, &random_dataset(1, 3, true)).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_dataset(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let mut bytes = Vec::new();
        encode_dataset(&mut bytes, &random_dataset(1, 3, true)).unwrap();
        for cut in [3, 10, 30, bytes.len() - 1] {
            assert!(matches!(decode_dataset(&bytes[..cut]), Err(Error::Format(_))));
        }
    }

    #[test]
    fn oversized_header_is_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(DATASET_MAGIC);
        for v in [1u32, u32::MAX, u32::MAX, u32::MAX, u32::MAX] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(decode_dataset(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = Dataset::new([3, 8, 8], vec![], None, 10).unwrap();
        let mut bytes = Vec::new();
        encode_dataset(&mut bytes, &ds).unwrap();
        assert_eq!(bytes.len(), 4 + 4 * 5 + 1 + 4);
        let back = decode_dataset(&bytes).unwrap();
        assert!(back.is_empty());
        assert_eq!(back, ds);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.kpd");
        let ds = random_dataset(9, 7, true);
        write_dataset(&path, &ds).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn labels_are_validated() {
        let img = Image::filled(1, 1, 1, 0.5);
        assert!(matches!(
            Dataset::labeled(vec![img], vec![3], 2),
            Err(Error::InvalidLabel { label: 3, num_classes: 2 })
        ));
    }

    #[test]
    fn per_class_selection_and_coverage() {
        let ds = random_dataset(2, 10, true);
        let small = ds.take_per_class(2).unwrap();
        assert_eq!(small.class_counts().unwrap(), vec![2, 2, 2, 2]);
        assert_eq!(small.labels().unwrap(), &[0, 1, 2, 3, 0, 1, 2, 3]);
        assert!(small.check_coverage().is_ok());
        let partial = ds.select(&[0, 1]);
        assert!(matches!(partial.check_coverage(), Err(Error::Coverage(2))));
    }

    proptest! {
        #[test]
        fn encode_decode_is_byte_exact(seed in any::<u64>(), n in 0usize..12, labeled in any::<bool>()) {
            let ds = random_dataset(seed, n, labeled);
            let mut bytes = Vec::new();
            encode_dataset(&mut bytes, &ds).unwrap();
            let back = decode_dataset(&bytes).unwrap();
            let mut again = Vec::new();
            encode_dataset(&mut again, &back).unwrap();
            prop_assert_eq!(&back, &ds);
            prop_assert_eq!(bytes, again);
        }
    }
}
