//! Satisfaction of the invariance knowledge carried by a pretext task.
//!
//! A labeler satisfies the knowledge at `x` when its predicted class agrees
//! across every one of `num_pairs` independently augmented view pairs.

use serde::{Deserialize, Serialize};

use crate::augment::{sample_view_pair, Image, PretextTask};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Anything that maps an image to a class index.
pub trait Labeler {
    fn predict(&self, img: &Image) -> usize;
}

impl<F: Fn(&Image) -> usize> Labeler for F {
    fn predict(&self, img: &Image) -> usize {
        self(img)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SatisfactionParams {
    pub num_pairs: usize,
}

impl Default for SatisfactionParams {
    fn default() -> Self {
        Self { num_pairs: 4 }
    }
}

impl SatisfactionParams {
    pub fn new(num_pairs: usize) -> Result<Self> {
        let p = Self { num_pairs };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_pairs == 0 {
            return Err(Error::Config("num_pairs must be at least 1".into()));
        }
        Ok(())
    }
}

fn agrees_on_all_pairs(
    labeler: &(impl Labeler + ?Sized),
    x: &Image,
    task: &PretextTask,
    params: &SatisfactionParams,
    rng: &mut Rng,
) -> bool {
    if task.is_identity() {
        return true;
    }
    (0..params.num_pairs).all(|_| {
        let (a, b) = sample_view_pair(x, task, rng);
        labeler.predict(&a) == labeler.predict(&b)
    })
}

/// Whether a trained model's predictions at `x` are consistent with the task.
pub fn model_satisfies(
    model: &(impl Labeler + ?Sized),
    x: &Image,
    task: &PretextTask,
    params: &SatisfactionParams,
    rng: &mut Rng,
) -> bool {
    agrees_on_all_pairs(model, x, task, params, rng)
}

/// Whether the (proxy) true label at `x` is consistent with the task.
pub fn label_satisfies(
    proxy: &(impl Labeler + ?Sized),
    x: &Image,
    task: &PretextTask,
    params: &SatisfactionParams,
    rng: &mut Rng,
) -> bool {
    agrees_on_all_pairs(proxy, x, task, params, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{task_grid, Family, TransformParams};

    fn img2(a: f32, b: f32) -> Image {
        Image::new(1, 1, 2, vec![a, b]).unwrap()
    }

    fn task(f: Family, s: u8) -> PretextTask {
        PretextTask::new(f, s).unwrap()
    }

    /// Class 1 when the left pixel is brighter than the right one.
    fn left_brighter(img: &Image) -> usize {
        (img.get(0, 0, 0) > img.get(0, 0, 1)) as usize
    }

    #[test]
    fn constant_predictor_always_satisfies() {
        let p = SatisfactionParams::default();
        let mut rng = Rng::new(1);
        let x = Image::new(3, 4, 4, (0..48).map(|i| i as f32 / 48.0).collect()).unwrap();
        for t in task_grid() {
            assert!(model_satisfies(&|_: &Image| 0usize, &x, &t, &p, &mut rng));
            assert!(label_satisfies(&|_: &Image| 2usize, &x, &t, &p, &mut rng));
        }
    }

    #[test]
    fn identity_task_always_satisfies() {
        let p = SatisfactionParams::new(16).unwrap();
        let mut rng = Rng::new(1);
        let x = img2(0.9, 0.1);
        for f in Family::ALL {
            let t = task(f, f.identity_strength());
            assert!(model_satisfies(&left_brighter, &x, &t, &p, &mut rng));
            assert!(label_satisfies(&left_brighter, &x, &t, &p, &mut rng));
        }
    }

    #[test]
    fn asymmetric_image_under_random_flip() {
        // views: flip with p = 1/2 each; the two-view outcomes are
        // (id, id) -> 1 == 1, (flip, flip) -> 0 == 0, mixed -> disagree.
        let x = img2(0.9, 0.1);
        assert_eq!(left_brighter(&x), 1);
        assert_eq!(left_brighter(&TransformParams::HorizontalFlip.apply(&x)), 0);
        let p = SatisfactionParams::default();
        let t = task(Family::RandomHorizontalFlip, 5);
        let mut rng = Rng::new(3);
        let trials = 4000;
        let sat = (0..trials)
            .filter(|_| model_satisfies(&left_brighter, &x, &t, &p, &mut rng))
            .count() as f64
            / trials as f64;
        // all four pairs must agree: (1/2)^4
        assert!((sat - 1.0 / 16.0).abs() < 0.02, "{sat}");

        // a flip-symmetric image is never flagged
        let sym = img2(0.4, 0.4);
        assert!((0..100).all(|_| model_satisfies(&left_brighter, &sym, &t, &p, &mut rng)));
    }

    #[test]
    fn invariant_predictor_satisfies_everywhere() {
        // mean intensity is invariant under flips, and so is any function of it
        let by_mean = |img: &Image| (img.data().iter().sum::<f32>() > 1.0) as usize;
        let p = SatisfactionParams::default();
        let mut rng = Rng::new(9);
        for s in 0..=10 {
            for f in [Family::RandomHorizontalFlip, Family::RandomVerticalFlip] {
                for k in 0..20 {
                    let x = Image::new(3, 2, 2, (0..12).map(|i| ((i * 7 + k) % 11) as f32 / 10.0).collect()).unwrap();
                    assert!(model_satisfies(&by_mean, &x, &task(f, s), &p, &mut rng));
                }
            }
        }
    }

    #[test]
    fn same_seed_same_verdict() {
        let x = img2(0.8, 0.3);
        let p = SatisfactionParams::default();
        let t = task(Family::RandomHorizontalFlip, 5);
        let a: Vec<bool> = {
            let mut rng = Rng::new(12);
            (0..50).map(|_| model_satisfies(&left_brighter, &x, &t, &p, &mut rng)).collect()
        };
        let b: Vec<bool> = {
            let mut rng = Rng::new(12);
            (0..50).map(|_| model_satisfies(&left_brighter, &x, &t, &p, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn more_pairs_never_raise_satisfaction_rate() {
        let x = img2(0.8, 0.3);
        let t = task(Family::RandomHorizontalFlip, 3);
        let trials = 2000;
        let mut rates = Vec::new();
        for k in 1..=5 {
            let p = SatisfactionParams::new(k).unwrap();
            let mut rng = Rng::new(100 + k as u64);
            let sat = (0..trials)
                .filter(|_| model_satisfies(&left_brighter, &x, &t, &p, &mut rng))
                .count();
            rates.push(sat as f64 / trials as f64);
        }
        for w in rates.windows(2) {
            assert!(w[1] <= w[0] + 0.02, "{rates:?}");
        }
    }

    #[test]
    fn zero_pairs_rejected() {
        assert!(SatisfactionParams::new(0).is_err());
    }
}
