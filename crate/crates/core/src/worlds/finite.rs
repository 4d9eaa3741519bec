use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

const PROB_TOL: f64 = 1e-12;
/// Slack allowed when checking a bound.
pub const BOUND_SLACK: f64 = 1e-12;
/// Largest hypothesis space [`verify_bound`] will enumerate.
pub const MAX_HYPOTHESES: u128 = 10_000_000;

/// A finite input/label space with an exact joint distribution and the
/// knowledge given as satisfaction tables.
///
/// `model_sat[x][k]` says whether predicting `k` at `x` satisfies the
/// knowledge; `label_sat[x][y]` whether the true label `y` at `x` does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteWorld {
    pub num_inputs: usize,
    pub num_labels: usize,
    /// Row-major `p(x, y)`, `num_inputs x num_labels`.
    pub joint: Vec<f64>,
    pub model_sat: Vec<Vec<bool>>,
    pub label_sat: Vec<Vec<bool>>,
}

/// Exact risks of one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactRisks {
    pub r_target: f64,
    pub r_unlearnable: f64,
    pub r_unreliable: f64,
    pub r_incomplete: f64,
}

impl ExactRisks {
    /// `1 - (1 - a)(1 - b)(1 - c)`.
    pub fn product_bound(&self) -> f64 {
        product_form(self.r_unlearnable, self.r_unreliable, self.r_incomplete)
    }

    /// `a + (1 - a) b`.
    pub fn two_term_bound(&self) -> f64 {
        self.r_unlearnable + (1.0 - self.r_unlearnable) * self.r_unreliable
    }
}

pub fn product_form(a: f64, b: f64, c: f64) -> f64 {
    1.0 - (1.0 - a) * (1.0 - b) * (1.0 - c)
}

pub fn sum_form(a: f64, b: f64, c: f64) -> f64 {
    a + (1.0 - a) * b + (1.0 - a) * (1.0 - b) * c
}

fn ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        0.0
    } else {
        (num / den).clamp(0.0, 1.0)
    }
}

impl FiniteWorld {
    pub fn new(
        num_inputs: usize,
        num_labels: usize,
        joint: Vec<f64>,
        model_sat: Vec<Vec<bool>>,
        label_sat: Vec<Vec<bool>>,
    ) -> Result<Self> {
        let w = Self {
            num_inputs,
            num_labels,
            joint,
            model_sat,
            label_sat,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_inputs == 0 || self.num_labels == 0 {
            return Err(Error::Dimension("world needs at least one input and one label".into()));
        }
        if self.joint.len() != self.num_inputs * self.num_labels {
            return Err(Error::Dimension("joint table has the wrong size".into()));
        }
        if self.joint.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("joint probabilities must be finite and non-negative".into()));
        }
        let total: f64 = self.joint.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Config(format!("joint table sums to {total}, not 1")));
        }
        for (name, table) in [("model_sat", &self.model_sat), ("label_sat", &self.label_sat)] {
            if table.len() != self.num_inputs || table.iter().any(|r| r.len() != self.num_labels) {
                return Err(Error::Dimension(format!("{name} must be {} x {}", self.num_inputs, self.num_labels)));
            }
        }
        Ok(())
    }

    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.joint[x * self.num_labels + y]
    }

    pub fn p_x(&self, x: usize) -> f64 {
        (0..self.num_labels).map(|y| self.p(x, y)).sum()
    }

    /// Every supported `(x, y)` has a satisfying label.
    pub fn is_reliable(&self) -> bool {
        self.support().all(|(x, y)| self.label_sat[x][y])
    }

    /// Whenever the label satisfies the knowledge, the only satisfying
    /// prediction is the label itself; satisfying both means being right.
    pub fn is_complete(&self) -> bool {
        self.support()
            .filter(|&(x, y)| self.label_sat[x][y])
            .all(|(x, y)| (0..self.num_labels).all(|k| !self.model_sat[x][k] || k == y))
    }

    fn support(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_inputs)
            .flat_map(move |x| (0..self.num_labels).map(move |y| (x, y)))
            .filter(move |&(x, y)| self.p(x, y) > 0.0)
    }

    /// Number of total maps `X -> Y`.
    pub fn hypothesis_count(&self) -> Result<u128> {
        let mut n: u128 = 1;
        for _ in 0..self.num_inputs {
            n = n
                .checked_mul(self.num_labels as u128)
                .ok_or(Error::EnumerationOverflow(u128::MAX))?;
        }
        Ok(n)
    }

    /// The `index`-th hypothesis in mixed-radix order, input 0 fastest.
    pub fn hypothesis(&self, mut index: u128) -> Vec<usize> {
        let base = self.num_labels as u128;
        (0..self.num_inputs)
            .map(|_| {
                let k = (index % base) as usize;
                index /= base;
                k
            })
            .collect()
    }
}

/// Exact target risk and the three indicator rates of `h`. Conditional
/// rates with an empty conditioning event are 0.
pub fn exact_risks(world: &FiniteWorld, h: &[usize]) -> Result<ExactRisks> {
    if h.len() != world.num_inputs || h.iter().any(|&k| k >= world.num_labels) {
        return Err(Error::Dimension("hypothesis must map every input to a label".into()));
    }
    let mut target = 0.0;
    let mut unlearnable = 0.0;
    let mut learnable = 0.0;
    let mut learnable_unreliable = 0.0;
    let mut reliable = 0.0;
    let mut reliable_wrong = 0.0;
    for (x, &hx) in h.iter().enumerate() {
        let fx_ok = world.model_sat[x][hx];
        for y in 0..world.num_labels {
            let p = world.p(x, y);
            let wrong = hx != y;
            if wrong {
                target += p;
            }
            if !fx_ok {
                unlearnable += p;
                continue;
            }
            learnable += p;
            if !world.label_sat[x][y] {
                learnable_unreliable += p;
                continue;
            }
            reliable += p;
            if wrong {
                reliable_wrong += p;
            }
        }
    }
    Ok(ExactRisks {
        r_target: target,
        r_unlearnable: unlearnable,
        r_unreliable: ratio(learnable_unreliable, learnable),
        r_incomplete: ratio(reliable_wrong, reliable),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub hypotheses: u128,
    /// Hypotheses whose target risk exceeds the product bound.
    pub violations: u64,
    /// Largest and smallest of `bound - r_target` over hypotheses.
    pub max_slack: f64,
    pub min_slack: f64,
    pub reliable_complete: bool,
    pub complete: bool,
    /// Violations of `r_target <= r_unlearnable`; checked only when the
    /// world is reliable and complete.
    pub unlearnable_violations: u64,
    /// Violations of the two-term bound; checked only on complete worlds.
    pub two_term_violations: u64,
}

impl BoundReport {
    pub fn total_violations(&self) -> u64 {
        self.violations + self.unlearnable_violations + self.two_term_violations
    }
}

#[derive(Clone, Copy)]
struct Tally {
    violations: u64,
    max_slack: f64,
    min_slack: f64,
    unlearnable: u64,
    two_term: u64,
}

impl Tally {
    fn empty() -> Self {
        Self {
            violations: 0,
            max_slack: f64::NEG_INFINITY,
            min_slack: f64::INFINITY,
            unlearnable: 0,
            two_term: 0,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            violations: self.violations + o.violations,
            max_slack: self.max_slack.max(o.max_slack),
            min_slack: self.min_slack.min(o.min_slack),
            unlearnable: self.unlearnable + o.unlearnable,
            two_term: self.two_term + o.two_term,
        }
    }
}

/// Enumerates every hypothesis of `world` and checks the product bound
/// and, where the world's structure allows, its specialisations.
pub fn verify_bound(world: &FiniteWorld) -> Result<BoundReport> {
    world.validate()?;
    let n = world.hypothesis_count()?;
    if n > MAX_HYPOTHESES {
        return Err(Error::EnumerationOverflow(n));
    }
    let reliable_complete = world.is_reliable() && world.is_complete();
    let complete = world.is_complete();
    let t = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let r = exact_risks(world, &world.hypothesis(i as u128)).expect("enumerated hypotheses are total");
            let slack = r.product_bound() - r.r_target;
            Tally {
                violations: (slack < -BOUND_SLACK) as u64,
                max_slack: slack,
                min_slack: slack,
                unlearnable: (reliable_complete && r.r_target > r.r_unlearnable + BOUND_SLACK) as u64,
                two_term: (complete && r.r_target > r.two_term_bound() + BOUND_SLACK) as u64,
            }
        })
        .reduce(Tally::empty, Tally::merge);
    Ok(BoundReport {
        hypotheses: n,
        violations: t.violations,
        max_slack: t.max_slack,
        min_slack: t.min_slack,
        reliable_complete,
        complete,
        unlearnable_violations: t.unlearnable,
        two_term_violations: t.two_term,
    })
}

fn random_joint(nx: usize, ny: usize, rng: &mut Rng) -> Vec<f64> {
    // a few exact zeros exercise the empty-conditioning convention
    let mut w: Vec<f64> = (0..nx * ny)
        .map(|_| if rng.bernoulli(0.2) { 0.0 } else { rng.unit() })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[0] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

fn random_table(nx: usize, ny: usize, p: f64, rng: &mut Rng) -> Vec<Vec<bool>> {
    (0..nx).map(|_| (0..ny).map(|_| rng.bernoulli(p)).collect()).collect()
}

fn dims(max_inputs: usize, max_labels: usize, rng: &mut Rng) -> (usize, usize) {
    (1 + rng.below(max_inputs.max(1)), 1 + rng.below(max_labels.max(1)))
}

/// Random joint table and independent random satisfaction tables.
pub fn random_world(max_inputs: usize, max_labels: usize, rng: &mut Rng) -> FiniteWorld {
    let (nx, ny) = dims(max_inputs, max_labels, rng);
    let joint = random_joint(nx, ny, rng);
    let model_sat = random_table(nx, ny, 0.5, rng);
    let label_sat = random_table(nx, ny, 0.7, rng);
    FiniteWorld::new(nx, ny, joint, model_sat, label_sat).expect("generated world is valid")
}

/// Deterministic labels, every label satisfies the knowledge, and the
/// knowledge pins the prediction to the label wherever it is learnable.
pub fn random_reliable_complete_world(max_inputs: usize, max_labels: usize, rng: &mut Rng) -> FiniteWorld {
    let (nx, ny) = dims(max_inputs, max_labels, rng);
    let truth: Vec<usize> = (0..nx).map(|_| rng.below(ny)).collect();
    let px = random_joint(nx, 1, rng);
    let mut joint = vec![0.0; nx * ny];
    for x in 0..nx {
        joint[x * ny + truth[x]] = px[x];
    }
    let model_sat = (0..nx).map(|x| (0..ny).map(|k| k == truth[x]).collect()).collect();
    let label_sat = vec![vec![true; ny]; nx];
    FiniteWorld::new(nx, ny, joint, model_sat, label_sat).expect("generated world is valid")
}

/// Complete worlds where some labels violate the knowledge.
pub fn random_complete_world(max_inputs: usize, max_labels: usize, rng: &mut Rng) -> FiniteWorld {
    let (nx, ny) = dims(max_inputs, max_labels, rng);
    let joint = random_joint(nx, ny, rng);
    let label_sat = random_table(nx, ny, 0.6, rng);
    let model_sat = (0..nx)
        .map(|x| {
            let sat: Vec<usize> = (0..ny)
                .filter(|&y| label_sat[x][y] && joint[x * ny + y] > 0.0)
                .collect();
            match sat.as_slice() {
                // no satisfying label with mass: the model relation is free
                [] => (0..ny).map(|_| rng.bernoulli(0.5)).collect(),
                [y] => (0..ny).map(|k| k == *y).collect(),
                _ => vec![false; ny],
            }
        })
        .collect();
    FiniteWorld::new(nx, ny, joint, model_sat, label_sat).expect("generated world is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub worlds: usize,
    pub hypotheses: u128,
    pub violations: u64,
    pub min_slack: f64,
    pub reliable_complete_worlds: usize,
    pub unlearnable_violations: u64,
    pub complete_worlds: usize,
    pub two_term_violations: u64,
    pub identity_triples: usize,
    /// Largest gap between the sum and product forms.
    pub identity_max_error: f64,
}

impl SweepReport {
    pub fn total_violations(&self) -> u64 {
        self.violations + self.unlearnable_violations + self.two_term_violations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub worlds: usize,
    pub max_inputs: usize,
    pub max_labels: usize,
    pub identity_triples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            worlds: 100,
            max_inputs: 6,
            max_labels: 3,
            identity_triples: 100_000,
        }
    }
}

/// Largest `|sum_form - product_form|` over `n` uniform triples.
pub fn identity_max_error(n: usize, rng: &mut Rng) -> f64 {
    (0..n)
        .map(|_| {
            let (a, b, c) = (rng.unit(), rng.unit(), rng.unit());
            (sum_form(a, b, c) - product_form(a, b, c)).abs()
        })
        .fold(0.0, f64::max)
}

/// Exhaustive bound checks over `cfg.worlds` worlds of each kind: general,
/// reliable and complete, and complete but unreliable.
pub fn sweep(cfg: &SweepConfig, seed: u64) -> Result<SweepReport> {
    let root = Rng::new(seed);
    let mut out = SweepReport {
        worlds: 0,
        hypotheses: 0,
        violations: 0,
        min_slack: f64::INFINITY,
        reliable_complete_worlds: 0,
        unlearnable_violations: 0,
        complete_worlds: 0,
        two_term_violations: 0,
        identity_triples: cfg.identity_triples,
        identity_max_error: identity_max_error(cfg.identity_triples, &mut root.fork_named("identity")),
    };
    type Gen = fn(usize, usize, &mut Rng) -> FiniteWorld;
    let kinds: [(&str, Gen); 3] = [
        ("general", random_world),
        ("reliable-complete", random_reliable_complete_world),
        ("complete", random_complete_world),
    ];
    for (name, gen) in kinds {
        let mut rng = root.fork_named(name);
        for _ in 0..cfg.worlds {
            let w = gen(cfg.max_inputs, cfg.max_labels, &mut rng);
            let r = verify_bound(&w)?;
            out.worlds += 1;
            out.hypotheses += r.hypotheses;
            out.violations += r.violations;
            out.min_slack = out.min_slack.min(r.min_slack);
            out.reliable_complete_worlds += r.reliable_complete as usize;
            out.complete_worlds += r.complete as usize;
            out.unlearnable_violations += r.unlearnable_violations;
            out.two_term_violations += r.two_term_violations;
        }
    }
    Ok(out)
}

/// The three chain factors for one `(x, y)` next to `p(y | x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDecomposition {
    /// `p(y | label satisfies)`.
    pub completeness: f64,
    /// `p(label satisfies | input satisfies)`.
    pub reliability: f64,
    /// `p(input satisfies | x)`.
    pub learnability: f64,
    pub product: f64,
    pub posterior: f64,
}

impl PosteriorDecomposition {
    pub fn gap(&self) -> f64 {
        (self.product - self.posterior).abs()
    }
}

/// An input satisfies the knowledge when some prediction at it does.
pub fn input_satisfies(world: &FiniteWorld, x: usize) -> bool {
    world.model_sat[x].iter().any(|&s| s)
}

/// Chain factors of `p(y | x)` computed from the joint table. The product
/// equals the posterior only under conditional-independence assumptions,
/// so both are reported.
pub fn decompose_posterior(world: &FiniteWorld, x: usize, y: usize) -> Result<PosteriorDecomposition> {
    if x >= world.num_inputs || y >= world.num_labels {
        return Err(Error::Dimension(format!("({x}, {y}) outside the world")));
    }
    let px = world.p_x(x);
    if px <= 0.0 {
        return Err(Error::ZeroProbability(x));
    }
    let mut input_sat = 0.0;
    let mut both_sat = 0.0;
    let mut label_sat = 0.0;
    let mut y_and_label_sat = 0.0;
    for xi in 0..world.num_inputs {
        let is = input_satisfies(world, xi);
        for yi in 0..world.num_labels {
            let p = world.p(xi, yi);
            let ls = world.label_sat[xi][yi];
            if is {
                input_sat += p;
            }
            if is && ls {
                both_sat += p;
            }
            if ls {
                label_sat += p;
                if yi == y {
                    y_and_label_sat += p;
                }
            }
        }
    }
    let learnability = if input_satisfies(world, x) { 1.0 } else { 0.0 };
    let reliability = ratio(both_sat, input_sat);
    let completeness = ratio(y_and_label_sat, label_sat);
    Ok(PosteriorDecomposition {
        completeness,
        reliability,
        learnability,
        product: completeness * reliability * learnability,
        posterior: world.p(x, y) / px,
    })
}
