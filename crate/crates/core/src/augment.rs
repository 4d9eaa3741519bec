//! The eleven augmentation families, their integer strength grids, and
//! deterministic application to `C x H x W` images.
//!
//! Sampling and application are split: [`TransformParams::sample`] draws one
//! concrete parameterisation from a task, [`TransformParams::apply`] is a
//! pure function of the image and those parameters. Tests force extreme
//! parameters through the second half directly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// A `C x H x W` image with values in `[0, 1]`, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension("image dimensions must be positive".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "{channels}x{height}x{width} image needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite pixel".into()));
        }
        let mut img = Self {
            channels,
            height,
            width,
            data,
        };
        img.clamp();
        Ok(img)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value.clamp(0.0, 1.0); channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    fn clamp(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Bilinear sample at continuous pixel coordinates, zero outside.
    fn bilinear(&self, c: usize, y: f64, x: f64) -> f64 {
        let y0 = y.floor();
        let x0 = x.floor();
        let fy = y - y0;
        let fx = x - x0;
        let (y0, x0) = (y0 as i64, x0 as i64);
        let mut acc = 0.0;
        for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
            if wy == 0.0 {
                continue;
            }
            let yy = y0 + dy;
            if yy < 0 || yy >= self.height as i64 {
                continue;
            }
            for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
                if wx == 0.0 {
                    continue;
                }
                let xx = x0 + dx;
                if xx < 0 || xx >= self.width as i64 {
                    continue;
                }
                acc += wy * wx * self.get(c, yy as usize, xx as usize) as f64;
            }
        }
        acc
    }

    /// Resamples every output pixel from `source(y, x)` source coordinates.
    fn warp(&self, source: impl Fn(f64, f64) -> (f64, f64)) -> Image {
        let mut out = Image::filled(self.channels, self.height, self.width, 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                let (sy, sx) = source(y as f64, x as f64);
                for c in 0..self.channels {
                    out.set(c, y, x, self.bilinear(c, sy, sx) as f32);
                }
            }
        }
        out.clamp();
        out
    }

    fn luma_plane(&self) -> Vec<f64> {
        let n = self.height * self.width;
        if self.channels == 3 {
            let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
            (0..n)
                .map(|i| 0.299 * r[i] as f64 + 0.587 * g[i] as f64 + 0.114 * b[i] as f64)
                .collect()
        } else {
            (0..n)
                .map(|i| {
                    (0..self.channels).map(|c| self.plane(c)[i] as f64).sum::<f64>()
                        / self.channels as f64
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    RandomResizedCrop,
    RandomRotation,
    Translate,
    Shear,
    Scale,
    Brightness,
    Contrast,
    Saturation,
    Hue,
    RandomHorizontalFlip,
    RandomVerticalFlip,
}

impl Family {
    /// Canonical order used by the task grid.
    pub const ALL: [Family; 11] = [
        Family::RandomResizedCrop,
        Family::RandomRotation,
        Family::Translate,
        Family::Shear,
        Family::Scale,
        Family::Brightness,
        Family::Contrast,
        Family::Saturation,
        Family::Hue,
        Family::RandomHorizontalFlip,
        Family::RandomVerticalFlip,
    ];

    pub fn strength_range(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Family::Scale => 1..=10,
            Family::Hue => 0..=5,
            _ => 0..=10,
        }
    }

    /// Strength at which the family never changes an image.
    pub fn identity_strength(self) -> u8 {
        match self {
            Family::Scale => 10,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomResizedCrop => "RandomResizedCrop",
            Family::RandomRotation => "RandomRotation",
            Family::Translate => "Translate",
            Family::Shear => "Shear",
            Family::Scale => "Scale",
            Family::Brightness => "Brightness",
            Family::Contrast => "Contrast",
            Family::Saturation => "Saturation",
            Family::Hue => "Hue",
            Family::RandomHorizontalFlip => "RandomHorizontalFlip",
            Family::RandomVerticalFlip => "RandomVerticalFlip",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Task(format!("unknown family {s:?}")))
    }
}

/// One augmentation family at one integer strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PretextTask {
    family: Family,
    strength: u8,
}

impl PretextTask {
    pub fn new(family: Family, strength: u8) -> Result<Self> {
        if !family.strength_range().contains(&strength) {
            let r = family.strength_range();
            return Err(Error::Task(format!(
                "{family} strength {strength} outside {}..={}",
                r.start(),
                r.end()
            )));
        }
        Ok(Self { family, strength })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn strength(&self) -> u8 {
        self.strength
    }

    /// `s / 10`.
    pub fn level(&self) -> f64 {
        self.strength as f64 / 10.0
    }

    pub fn is_identity(&self) -> bool {
        self.strength == self.family.identity_strength()
    }

    /// Position of this task in [`task_grid`].
    pub fn grid_index(&self) -> usize {
        let mut idx = 0;
        for f in Family::ALL {
            let range = f.strength_range();
            if f == self.family {
                return idx + (self.strength - range.start()) as usize;
            }
            idx += range.count();
        }
        unreachable!("family is always in Family::ALL")
    }
}

impl fmt::Display for PretextTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family, self.strength)
    }
}

impl FromStr for PretextTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (fam, strength) = s
            .split_once(':')
            .ok_or_else(|| Error::Task(format!("expected <Family>:<strength>, got {s:?}")))?;
        let strength = strength
            .parse::<u8>()
            .map_err(|_| Error::Task(format!("bad strength in {s:?}")))?;
        PretextTask::new(fam.parse()?, strength)
    }
}

impl Serialize for PretextTask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PretextTask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All 115 tasks: families in canonical order, strengths ascending.
pub fn task_grid() -> Vec<PretextTask> {
    Family::ALL
        .into_iter()
        .flat_map(|family| {
            family
                .strength_range()
                .map(move |strength| PretextTask { family, strength })
        })
        .collect()
}

/// One concrete draw of a task's random parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformParams {
    Identity,
    /// Square crop window in pixel units, resized back to the full image.
    Crop { top: f64, left: f64, side_y: f64, side_x: f64 },
    /// Forward linear map `[[a, b], [c, d]]` about the image centre, then a
    /// shift of `(shift_y, shift_x)` pixels.
    Affine { a: f64, b: f64, c: f64, d: f64, shift_y: f64, shift_x: f64 },
    Brightness(f64),
    Contrast(f64),
    Saturation(f64),
    /// Hue offset as a fraction of the colour circle.
    Hue(f64),
    HorizontalFlip,
    VerticalFlip,
}

impl TransformParams {
    pub fn rotation_degrees(deg: f64) -> Self {
        let t = deg.to_radians();
        let (s, c) = t.sin_cos();
        TransformParams::Affine { a: c, b: -s, c: s, d: c, shift_y: 0.0, shift_x: 0.0 }
    }

    /// Draws parameters for `task` on an image of the given height and width.
    pub fn sample(task: &PretextTask, height: usize, width: usize, rng: &mut Rng) -> Self {
        if task.is_identity() {
            return TransformParams::Identity;
        }
        let s = task.level();
        match task.family {
            Family::RandomResizedCrop => {
                let min_area = (1.0 - s).max(1.0 / (height * width) as f64);
                let area = rng.uniform(min_area, 1.0);
                let side_y = area.sqrt() * height as f64;
                let side_x = area.sqrt() * width as f64;
                let top = rng.uniform(0.0, height as f64 - side_y);
                let left = rng.uniform(0.0, width as f64 - side_x);
                TransformParams::Crop { top, left, side_y, side_x }
            }
            Family::RandomRotation => {
                let max = s * 180.0;
                Self::rotation_degrees(rng.uniform(-max, max))
            }
            Family::Translate => {
                let fx = rng.uniform(-s, s);
                let fy = rng.uniform(-s, s);
                TransformParams::Affine {
                    a: 1.0,
                    b: 0.0,
                    c: 0.0,
                    d: 1.0,
                    shift_y: fy * height as f64,
                    shift_x: fx * width as f64,
                }
            }
            Family::Shear => {
                let max = s.atan();
                let sx = rng.uniform(-max, max).tan();
                let sy = rng.uniform(-max, max).tan();
                // rows are (y, x): x' = x + sx * y, y' = y + sy * x
                TransformParams::Affine { a: 1.0, b: sy, c: sx, d: 1.0, shift_y: 0.0, shift_x: 0.0 }
            }
            Family::Scale => {
                let k = rng.uniform(s, s.max(2.0 - s));
                TransformParams::Affine { a: k, b: 0.0, c: 0.0, d: k, shift_y: 0.0, shift_x: 0.0 }
            }
            Family::Brightness => TransformParams::Brightness(rng.uniform((1.0 - s).max(0.0), 1.0 + s)),
            Family::Contrast => TransformParams::Contrast(rng.uniform((1.0 - s).max(0.0), 1.0 + s)),
            Family::Saturation => TransformParams::Saturation(rng.uniform((1.0 - s).max(0.0), 1.0 + s)),
            Family::Hue => TransformParams::Hue(rng.uniform(-s, s)),
            Family::RandomHorizontalFlip => {
                if rng.bernoulli(s) {
                    TransformParams::HorizontalFlip
                } else {
                    TransformParams::Identity
                }
            }
            Family::RandomVerticalFlip => {
                if rng.bernoulli(s) {
                    TransformParams::VerticalFlip
                } else {
                    TransformParams::Identity
                }
            }
        }
    }

    /// Applies these parameters. Shape is preserved and output is in `[0, 1]`.
    pub fn apply(&self, img: &Image) -> Image {
        let (h, w) = (img.height as f64, img.width as f64);
        match *self {
            TransformParams::Identity => img.clone(),
            TransformParams::Crop { top, left, side_y, side_x } => img.warp(|y, x| {
                (
                    top + (y + 0.5) * side_y / h - 0.5,
                    left + (x + 0.5) * side_x / w - 0.5,
                )
            }),
            TransformParams::Affine { a, b, c, d, shift_y, shift_x } => {
                let det = a * d - b * c;
                if det.abs() < 1e-12 {
                    return Image::filled(img.channels, img.height, img.width, 0.0);
                }
                let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
                let (cy, cx) = ((h - 1.0) / 2.0, (w - 1.0) / 2.0);
                img.warp(|y, x| {
                    let (py, px) = (y - cy - shift_y, x - cx - shift_x);
                    (ia * py + ib * px + cy, ic * py + id * px + cx)
                })
            }
            TransformParams::Brightness(f) => map_values(img, |v| v * f),
            TransformParams::Contrast(f) => {
                let luma = img.luma_plane();
                let mean = luma.iter().sum::<f64>() / luma.len() as f64;
                map_values(img, |v| mean + f * (v - mean))
            }
            TransformParams::Saturation(f) => {
                if img.channels != 3 {
                    return img.clone();
                }
                let luma = img.luma_plane();
                let n = luma.len();
                let mut out = img.clone();
                for (i, v) in out.data.iter_mut().enumerate() {
                    let g = luma[i % n];
                    *v = (g + f * (*v as f64 - g)) as f32;
                }
                out.clamp();
                out
            }
            TransformParams::Hue(offset) => shift_hue(img, offset),
            TransformParams::HorizontalFlip => {
                let mut out = img.clone();
                for c in 0..img.channels {
                    for y in 0..img.height {
                        for x in 0..img.width {
                            out.set(c, y, x, img.get(c, y, img.width - 1 - x));
                        }
                    }
                }
                out
            }
            TransformParams::VerticalFlip => {
                let mut out = img.clone();
                for c in 0..img.channels {
                    for y in 0..img.height {
                        for x in 0..img.width {
                            out.set(c, y, x, img.get(c, img.height - 1 - y, x));
                        }
                    }
                }
                out
            }
        }
    }
}

fn map_values(img: &Image, f: impl Fn(f64) -> f64) -> Image {
    let mut out = img.clone();
    for v in &mut out.data {
        *v = f(*v as f64) as f32;
    }
    out.clamp();
    out
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

fn shift_hue(img: &Image, offset: f64) -> Image {
    if img.channels != 3 {
        return img.clone();
    }
    let n = img.height * img.width;
    let mut out = img.clone();
    for i in 0..n {
        let (r, g, b) = (img.data[i] as f64, img.data[n + i] as f64, img.data[2 * n + i] as f64);
        let (h, s, v) = rgb_to_hsv(r, g, b);
        let (r, g, b) = hsv_to_rgb(h + offset, s, v);
        out.data[i] = r as f32;
        out.data[n + i] = g as f32;
        out.data[2 * n + i] = b as f32;
    }
    out.clamp();
    out
}

/// One random application of `task` to `img`.
pub fn apply_transform(img: &Image, task: &PretextTask, rng: &mut Rng) -> Image {
    TransformParams::sample(task, img.height, img.width, rng).apply(img)
}

/// Two independent views; the first view's parameters are drawn first.
pub fn sample_view_pair(img: &Image, task: &PretextTask, rng: &mut Rng) -> (Image, Image) {
    let first = apply_transform(img, task, rng);
    let second = apply_transform(img, task, rng);
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn random_image(rng: &mut Rng, c: usize, h: usize, w: usize) -> Image {
        let data = (0..c * h * w).map(|_| rng.unit() as f32).collect();
        Image::new(c, h, w, data).unwrap()
    }

    #[test]
    fn grid_has_115_tasks_with_table_ranges() {
        let grid = task_grid();
        assert_eq!(grid.len(), 115);
        let strengths = |f: Family| -> Vec<u8> {
            grid.iter().filter(|t| t.family() == f).map(|t| t.strength()).collect()
        };
        assert_eq!(strengths(Family::Hue), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(strengths(Family::Scale), (1..=10).collect::<Vec<_>>());
        assert_eq!(strengths(Family::Brightness), (0..=10).collect::<Vec<_>>());
        let mut sorted = grid.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 115);
        for (i, t) in grid.iter().enumerate() {
            assert_eq!(t.grid_index(), i);
        }
        assert_eq!(grid, task_grid());
    }

    #[test]
    fn task_names_round_trip() {
        for t in task_grid() {
            assert_eq!(t.to_string().parse::<PretextTask>().unwrap(), t);
        }
        assert_eq!(
            PretextTask::new(Family::RandomRotation, 7).unwrap().to_string(),
            "RandomRotation:7"
        );
        assert!("RandomRotation:11".parse::<PretextTask>().is_err());
        assert!("Scale:0".parse::<PretextTask>().is_err());
        assert!("Hue:6".parse::<PretextTask>().is_err());
        assert!("Blur:1".parse::<PretextTask>().is_err());
        assert!("Hue".parse::<PretextTask>().is_err());
    }

    #[test]
    fn identity_strengths_are_bit_exact() {
        let mut rng = Rng::new(3);
        let img = random_image(&mut rng, 3, 8, 8);
        for f in Family::ALL {
            let task = PretextTask::new(f, f.identity_strength()).unwrap();
            for _ in 0..5 {
                assert_eq!(apply_transform(&img, &task, &mut rng), img, "{task}");
            }
        }
    }

    #[test]
    fn horizontal_flip_swaps_pixels() {
        let img = Image::new(1, 1, 2, vec![0.25, 0.75]).unwrap();
        let task = PretextTask::new(Family::RandomHorizontalFlip, 10).unwrap();
        let out = apply_transform(&img, &task, &mut Rng::new(0));
        assert_eq!(out.data(), &[0.75, 0.25]);
    }

    #[test]
    fn double_flip_is_identity() {
        let mut rng = Rng::new(5);
        let img = random_image(&mut rng, 3, 5, 7);
        let twice = TransformParams::HorizontalFlip.apply(&TransformParams::HorizontalFlip.apply(&img));
        assert_eq!(twice, img);
        let twice = TransformParams::VerticalFlip.apply(&TransformParams::VerticalFlip.apply(&img));
        assert_eq!(twice, img);
    }

    #[test]
    fn rotation_by_180_is_point_reflection() {
        let (a, b, c, d) = (0.1, 0.2, 0.3, 0.4);
        let img = Image::new(1, 2, 2, vec![a, b, c, d]).unwrap();
        let out = TransformParams::rotation_degrees(180.0).apply(&img);
        for (got, want) in out.data().iter().zip([d, c, b, a]) {
            assert!((got - want).abs() < 1e-6, "{:?}", out.data());
        }
    }

    #[test]
    fn null_geometric_warps_are_identity() {
        let mut rng = Rng::new(8);
        let img = random_image(&mut rng, 3, 6, 6);
        let nulls = [
            TransformParams::rotation_degrees(0.0),
            TransformParams::Affine { a: 1.0, b: 0.0, c: 0.0, d: 1.0, shift_y: 0.0, shift_x: 0.0 },
            TransformParams::Crop { top: 0.0, left: 0.0, side_y: 6.0, side_x: 6.0 },
        ];
        for p in nulls {
            let out = p.apply(&img);
            for (x, y) in out.data().iter().zip(img.data()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn one_pixel_images_are_legal() {
        let img = Image::new(3, 1, 1, vec![0.2, 0.5, 0.9]).unwrap();
        let mut rng = Rng::new(1);
        for task in task_grid() {
            let out = apply_transform(&img, &task, &mut rng);
            assert_eq!(out.shape(), img.shape());
        }
    }

    #[test]
    fn view_pairs() {
        let mut rng = Rng::new(2);
        let img = random_image(&mut rng, 3, 8, 8);

        let zero = PretextTask::new(Family::RandomRotation, 0).unwrap();
        let (v1, v2) = sample_view_pair(&img, &zero, &mut rng);
        assert_eq!(v1, img);
        assert_eq!(v2, img);

        let task = PretextTask::new(Family::Shear, 6).unwrap();
        let p1 = sample_view_pair(&img, &task, &mut Rng::new(77));
        let p2 = sample_view_pair(&img, &task, &mut Rng::new(77));
        assert_eq!(p1, p2);
        assert_ne!(p1.0, p1.1);

        let vflip = PretextTask::new(Family::RandomVerticalFlip, 10).unwrap();
        let (v1, v2) = sample_view_pair(&img, &vflip, &mut rng);
        let flipped = TransformParams::VerticalFlip.apply(&img);
        assert_eq!(v1, flipped);
        assert_eq!(v2, flipped);
    }

    #[test]
    fn sampled_ranges_follow_strength() {
        let mut rng = Rng::new(4);
        let rot = PretextTask::new(Family::RandomRotation, 5).unwrap();
        for _ in 0..200 {
            match TransformParams::sample(&rot, 8, 8, &mut rng) {
                TransformParams::Affine { a, c, .. } => {
                    let deg = c.atan2(a).to_degrees();
                    assert!(deg.abs() <= 90.0 + 1e-9);
                }
                p => panic!("unexpected {p:?}"),
            }
        }
        let bright = PretextTask::new(Family::Brightness, 3).unwrap();
        for _ in 0..200 {
            match TransformParams::sample(&bright, 8, 8, &mut rng) {
                TransformParams::Brightness(f) => assert!((0.7..=1.3).contains(&f)),
                p => panic!("unexpected {p:?}"),
            }
        }
        let scale = PretextTask::new(Family::Scale, 4).unwrap();
        for _ in 0..200 {
            match TransformParams::sample(&scale, 8, 8, &mut rng) {
                TransformParams::Affine { a, d, .. } => {
                    assert_eq!(a, d);
                    assert!((0.4..=1.6).contains(&a));
                }
                p => panic!("unexpected {p:?}"),
            }
        }
        let crop = PretextTask::new(Family::RandomResizedCrop, 3).unwrap();
        for _ in 0..200 {
            match TransformParams::sample(&crop, 8, 8, &mut rng) {
                TransformParams::Crop { top, left, side_y, side_x } => {
                    let area = side_y * side_x / 64.0;
                    assert!((0.7 - 1e-9..=1.0 + 1e-9).contains(&area));
                    assert!(top >= 0.0 && top + side_y <= 8.0 + 1e-9);
                    assert!(left >= 0.0 && left + side_x <= 8.0 + 1e-9);
                }
                p => panic!("unexpected {p:?}"),
            }
        }
    }

    #[test]
    fn hue_round_trip_and_grayscale_fixed_points() {
        for (r, g, b) in [(0.2, 0.5, 0.9), (0.9, 0.1, 0.1), (0.3, 0.3, 0.3), (0.0, 1.0, 0.5)] {
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            assert!((r - r2).abs() < 1e-12 && (g - g2).abs() < 1e-12 && (b - b2).abs() < 1e-12);
        }
        let gray = Image::filled(3, 2, 2, 0.4);
        assert_eq!(shift_hue(&gray, 0.3), gray);
        assert_eq!(TransformParams::Saturation(0.0).apply(&gray), gray);
        // a full turn leaves the colour where it was
        let img = Image::new(3, 1, 1, vec![0.9, 0.2, 0.4]).unwrap();
        let turned = shift_hue(&img, 1.0);
        for (a, b) in turned.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn contrast_zero_gives_mean_luma() {
        let img = Image::new(3, 1, 2, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let out = TransformParams::Contrast(0.0).apply(&img);
        assert!(out.data().iter().all(|&v| (v - 0.5).abs() < 1e-6));
    }

    proptest! {
        #[test]
        fn transforms_preserve_shape_and_range(seed in any::<u64>(), idx in 0usize..115, h in 1usize..7, w in 1usize..7) {
            let mut rng = Rng::new(seed);
            let img = random_image(&mut rng, 3, h, w);
            let task = task_grid()[idx];
            let out = apply_transform(&img, &task, &mut rng);
            prop_assert_eq!(out.shape(), img.shape());
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
