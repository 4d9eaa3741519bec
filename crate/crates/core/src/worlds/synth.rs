use serde::{Deserialize, Serialize};

use crate::augment::{Family, Image, TransformParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::knowledge::Labeler;
use crate::rng::Rng;

/// Recipe for a synthetic image world with known ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub labeled_per_class: usize,
    pub unlabeled_per_class: usize,
    pub test_per_class: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Share of classes whose label survives the coded transform.
    pub invariant_class_fraction: f64,
    /// Classes sharing one base pattern, told apart by a small detail.
    pub classes_per_knowledge_cell: usize,
    /// Per-pixel Gaussian noise level.
    pub noise: f64,
    /// Each sample's brightness is scaled by a factor in `[1 - b, 1 + b]`.
    pub nuisance_brightness: f64,
    /// Each sample is shifted by up to this many pixels along each axis.
    pub nuisance_shift: f64,
    /// Family whose extreme transform moves non-invariant classes to
    /// their twin class.
    pub coded_family: Family,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 4,
            labeled_per_class: 5,
            unlabeled_per_class: 250,
            test_per_class: 250,
            channels: 3,
            height: 8,
            width: 8,
            invariant_class_fraction: 1.0,
            classes_per_knowledge_cell: 1,
            noise: 0.05,
            nuisance_brightness: 0.0,
            nuisance_shift: 0.0,
            coded_family: Family::RandomHorizontalFlip,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be at least 1".into()));
        }
        if self.channels == 0 || self.height < 4 || self.width < 4 {
            return Err(Error::Config("synthetic images need a channel and at least 4 x 4 pixels".into()));
        }
        if !(0.0..=1.0).contains(&self.invariant_class_fraction) {
            return Err(Error::Config("invariant_class_fraction must lie in [0, 1]".into()));
        }
        if self.classes_per_knowledge_cell == 0 {
            return Err(Error::Config("classes_per_knowledge_cell must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config("noise must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.nuisance_brightness) {
            return Err(Error::Config("nuisance_brightness must lie in [0, 1]".into()));
        }
        if !(self.nuisance_shift >= 0.0 && self.nuisance_shift.is_finite()) {
            return Err(Error::Config("nuisance_shift must be finite and non-negative".into()));
        }
        if self.labeled_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::Config("labeled and test sets must be non-empty".into()));
        }
        if self.invariant_classes() < self.num_classes && self.num_classes < 2 {
            return Err(Error::Config("a non-invariant class needs a second class as its twin".into()));
        }
        coded_transform(self.coded_family)?;
        Ok(())
    }

    pub fn invariant_classes(&self) -> usize {
        (self.invariant_class_fraction * self.num_classes as f64).round() as usize
    }

    pub fn is_invariant(&self, class: usize) -> bool {
        class < self.invariant_classes()
    }

    pub fn knowledge_cell(&self, class: usize) -> usize {
        class / self.classes_per_knowledge_cell
    }

    /// Class that the coded transform of a non-invariant class belongs to.
    pub fn twin(&self, class: usize) -> usize {
        let inv = self.invariant_classes();
        if self.is_invariant(class) {
            class
        } else if inv > 0 {
            (class - inv) % inv
        } else {
            (class + 1) % self.num_classes
        }
    }
}

/// The most extreme transform of `family` that still leaves an image
/// recognisable.
pub fn coded_transform(family: Family) -> Result<TransformParams> {
    match family {
        Family::RandomHorizontalFlip => Ok(TransformParams::HorizontalFlip),
        Family::RandomVerticalFlip => Ok(TransformParams::VerticalFlip),
        Family::RandomRotation => Ok(TransformParams::rotation_degrees(180.0)),
        Family::Hue => Ok(TransformParams::Hue(0.5)),
        other => Err(Error::Config(format!("{other} cannot be the coded family"))),
    }
}

/// Nearest-template ground truth of a synthetic world.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    templates: Vec<Image>,
    labels: Vec<usize>,
    patterns: Vec<Image>,
}

impl SynthTruth {
    pub fn templates(&self) -> impl Iterator<Item = (&Image, usize)> {
        self.templates.iter().zip(self.labels.iter().copied())
    }

    /// Noise-free pattern of each class.
    pub fn patterns(&self) -> &[Image] {
        &self.patterns
    }
}

fn sq_dist(a: &Image, b: &Image) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = (x - y) as f64;
            d * d
        })
        .sum()
}

impl Labeler for SynthTruth {
    fn predict(&self, img: &Image) -> usize {
        let mut best = (0, f64::INFINITY);
        for (t, &y) in self.templates.iter().zip(&self.labels) {
            let d = sq_dist(t, img);
            if d < best.1 {
                best = (y, d);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub spec: SynthSpec,
    pub labeled: Dataset,
    pub unlabeled: Dataset,
    pub test: Dataset,
    pub truth: SynthTruth,
}

fn blob_pattern(spec: &SynthSpec, rng: &mut Rng) -> Vec<f64> {
    let (c, h, w) = (spec.channels, spec.height, spec.width);
    let mut data = vec![0.0; c * h * w];
    for ch in 0..c {
        let bg = rng.uniform(0.3, 0.7);
        data[ch * h * w..(ch + 1) * h * w].iter_mut().for_each(|v| *v = bg);
    }
    for _ in 0..3 {
        let cy = rng.uniform(0.0, h as f64 - 1.0);
        let cx = rng.uniform(0.0, w as f64 - 1.0);
        let sigma = rng.uniform(0.8, 1.8);
        let amp: Vec<f64> = (0..c)
            .map(|_| rng.uniform(0.2, 0.45) * if rng.bernoulli(0.5) { 1.0 } else { -1.0 })
            .collect();
        for y in 0..h {
            for x in 0..w {
                let r2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let g = (-r2 / (2.0 * sigma * sigma)).exp();
                for ch in 0..c {
                    data[(ch * h + y) * w + x] += amp[ch] * g;
                }
            }
        }
    }
    data
}

fn to_image(spec: &SynthSpec, data: &[f64]) -> Image {
    let px = data.iter().map(|&v| v.clamp(0.05, 0.95) as f32).collect();
    Image::new(spec.channels, spec.height, spec.width, px).expect("pattern has the configured shape")
}

/// Clean class patterns: one blob pattern per knowledge cell, a small
/// class detail inside a cell, and a corner marker on non-invariant
/// classes.
fn class_patterns(spec: &SynthSpec, rng: &mut Rng) -> Vec<Image> {
    let (c, h, w) = (spec.channels, spec.height, spec.width);
    let cells = spec.num_classes.div_ceil(spec.classes_per_knowledge_cell);
    let bases: Vec<Vec<f64>> = (0..cells).map(|_| blob_pattern(spec, rng)).collect();
    (0..spec.num_classes)
        .map(|class| {
            let mut data = bases[spec.knowledge_cell(class)].clone();
            let j = class % spec.classes_per_knowledge_cell;
            if j > 0 {
                // two pixels near the centre, shifted per class within the cell
                let y = h / 2;
                let x = (w / 2 + j - 1) % w;
                for ch in 0..c {
                    let sign = if (ch + j).is_multiple_of(2) { 1.0 } else { -1.0 };
                    data[(ch * h + y) * w + x] += 0.3 * sign;
                    data[(ch * h + y - 1) * w + x] += 0.3 * sign;
                }
            }
            if !spec.is_invariant(class) {
                for (y, x) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    data[y * w + x] = 1.0;
                    for ch in 1..c {
                        data[(ch * h + y) * w + x] = 0.0;
                    }
                }
            }
            to_image(spec, &data)
        })
        .collect()
}

fn nuisance(spec: &SynthSpec, pattern: &Image, rng: &mut Rng) -> Image {
    let mut img = pattern.clone();
    if spec.nuisance_shift > 0.0 {
        let m = spec.nuisance_shift;
        let (dy, dx) = (rng.uniform(-m, m), rng.uniform(-m, m));
        img = TransformParams::Affine { a: 1.0, b: 0.0, c: 0.0, d: 1.0, shift_y: dy, shift_x: dx }.apply(&img);
    }
    if spec.nuisance_brightness > 0.0 {
        let b = spec.nuisance_brightness;
        img = TransformParams::Brightness(rng.uniform(1.0 - b, 1.0 + b)).apply(&img);
    }
    img
}

fn sample_split(spec: &SynthSpec, patterns: &[Image], per_class: usize, labeled: bool, rng: &mut Rng) -> Result<Dataset> {
    let n = per_class * spec.num_classes;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % spec.num_classes;
        let clean = nuisance(spec, &patterns[class], rng);
        let px = clean
            .data()
            .iter()
            .map(|&v| (v as f64 + spec.noise * rng.normal()).clamp(0.0, 1.0) as f32)
            .collect();
        images.push(Image::new(spec.channels, spec.height, spec.width, px)?);
        labels.push(class);
    }
    let ds = Dataset::labeled(images, labels, spec.num_classes)?;
    Ok(if labeled { ds } else { ds.without_labels() })
}

/// Draws the labeled, unlabeled and test sets of `spec` and the matching
/// ground-truth labeler.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<SynthWorld> {
    spec.validate()?;
    let root = Rng::new(spec.seed);
    let patterns = class_patterns(spec, &mut root.fork_named("patterns"));
    let coded = coded_transform(spec.coded_family)?;
    let mut templates = Vec::new();
    let mut labels = Vec::new();
    for (class, p) in patterns.iter().enumerate() {
        templates.push(p.clone());
        labels.push(class);
        templates.push(coded.apply(p));
        labels.push(spec.twin(class));
    }
    let truth = SynthTruth {
        templates,
        labels,
        patterns: patterns.clone(),
    };
    Ok(SynthWorld {
        labeled: sample_split(spec, &patterns, spec.labeled_per_class, true, &mut root.fork_named("labeled"))?,
        unlabeled: sample_split(spec, &patterns, spec.unlabeled_per_class, false, &mut root.fork_named("unlabeled"))?,
        test: sample_split(spec, &patterns, spec.test_per_class, true, &mut root.fork_named("test"))?,
        truth,
        spec: spec.clone(),
    })
}
