//! Group-fairness criteria, empirical MMD, the tracked `C` function and the
//! client-side fairness gradients built from it.
//!
//! A criterion is a score `S(h(x), y)` (the prediction or the task loss) and a
//! family of conditioning sets `C_j`. For every `j` the score distributions of
//! the two protected groups restricted to `C_j` should match. Training
//! penalizes the sum over `j` of the squared MMD between them; reporting uses
//! the maximum over `j`.

use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::kernels::{Kernel, ScalarKernel};
use crate::models::{axpy, cross_entropy, Model};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum Criterion {
    StatisticalParity,
    EqualOpportunity,
    EqualizedOdds,
    RiskParity,
    /// Statistical parity restricted to rows with `x[feature] > threshold`.
    ConditionalStatisticalParity { feature: usize, threshold: f64 },
    PredictiveEquality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Prediction,
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConditioningSet {
    All,
    Label(u8),
    FeatureAbove { feature: usize, threshold: f64 },
}

impl ConditioningSet {
    #[inline]
    pub fn contains(&self, x: &[f64], y: u8) -> bool {
        match *self {
            ConditioningSet::All => true,
            ConditioningSet::Label(l) => y == l,
            ConditioningSet::FeatureAbove { feature, threshold } => x[feature] > threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessSpec {
    #[serde(flatten)]
    pub criterion: Criterion,
}

impl Default for FairnessSpec {
    fn default() -> Self {
        FairnessSpec::new(Criterion::StatisticalParity)
    }
}

impl FairnessSpec {
    pub fn new(criterion: Criterion) -> Self {
        FairnessSpec { criterion }
    }

    pub fn score_kind(&self) -> ScoreKind {
        match self.criterion {
            Criterion::RiskParity => ScoreKind::Loss,
            _ => ScoreKind::Prediction,
        }
    }

    pub fn conditioning_sets(&self) -> Vec<ConditioningSet> {
        match self.criterion {
            Criterion::StatisticalParity | Criterion::RiskParity => vec![ConditioningSet::All],
            Criterion::EqualOpportunity => vec![ConditioningSet::Label(1)],
            Criterion::EqualizedOdds => vec![ConditioningSet::Label(0), ConditioningSet::Label(1)],
            Criterion::PredictiveEquality => vec![ConditioningSet::Label(0)],
            Criterion::ConditionalStatisticalParity { feature, threshold } => {
                vec![ConditioningSet::FeatureAbove { feature, threshold }]
            }
        }
    }

    pub fn n_sets(&self) -> usize {
        self.conditioning_sets().len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Criterion::ConditionalStatisticalParity { feature, .. } = self.criterion {
            if feature >= dim {
                return Err(Error::Config(format!(
                    "conditioning feature {feature} out of range for dimension {dim}"
                )));
            }
        }
        Ok(())
    }

    /// `S(h(x), y)`.
    pub fn score(&self, model: &Model, x: &[f64], y: u8) -> f64 {
        let h = model.score(x);
        match self.score_kind() {
            ScoreKind::Prediction => h,
            ScoreKind::Loss => cross_entropy(h, y),
        }
    }

    fn score_and_grad(&self, model: &Model, x: &[f64], y: u8, grad: &mut [f64]) -> f64 {
        match self.score_kind() {
            ScoreKind::Prediction => model.score_and_grad(x, grad),
            ScoreKind::Loss => model.loss_and_grad(x, y, grad),
        }
    }

    /// Row indices of `data` (restricted to `rows`) in group `a` and set `set`.
    pub(crate) fn cell_rows(
        data: &TabularDataset,
        rows: &[usize],
        set: &ConditioningSet,
        a: u8,
    ) -> Vec<usize> {
        rows.iter()
            .copied()
            .filter(|&i| data.protected(i) == a && set.contains(data.row(i), data.label(i)))
            .collect()
    }
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn mean_kernel<K: ScalarKernel + ?Sized>(a: &[f64], b: &[f64], kernel: &K) -> f64 {
    let mut acc = CompensatedSum::default();
    for &x in a {
        for &y in b {
            acc.add(kernel.eval(x, y));
        }
    }
    acc.total() / (a.len() as f64 * b.len() as f64)
}

/// Plug-in (V-statistic) squared MMD between two scalar samples.
///
/// Samples are sorted before summation, so the result does not depend on the
/// order of either sample and is exactly zero for equal multisets.
pub fn mmd_squared<K: ScalarKernel + ?Sized>(sample0: &[f64], sample1: &[f64], kernel: &K) -> Result<f64> {
    if sample0.is_empty() || sample1.is_empty() {
        return Err(Error::DegenerateGroup("MMD needs two non-empty samples".into()));
    }
    let s0 = sorted(sample0);
    let s1 = sorted(sample1);
    let k00 = mean_kernel(&s0, &s0, kernel);
    let k11 = mean_kernel(&s1, &s1, kernel);
    // Order the cross term canonically so swapping the samples is exact.
    let k01 = if s0 <= s1 {
        mean_kernel(&s0, &s1, kernel)
    } else {
        mean_kernel(&s1, &s0, kernel)
    };
    Ok(k00 + k11 - 2.0 * k01)
}

/// Tracked score sets of one conditioning set, `Y_{0,j}` and `Y_{1,j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSets {
    pub group0: Vec<f64>,
    pub group1: Vec<f64>,
}

impl ScoreSets {
    fn check(&self) -> Result<()> {
        if self.group0.is_empty() || self.group1.is_empty() {
            return Err(Error::DegenerateGroup("empty prediction set".into()));
        }
        Ok(())
    }
}

/// Prediction sets broadcast in a round, one entry per conditioning set.
/// `None` marks a set excluded because a group is globally empty in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSets {
    pub round: usize,
    pub sets: Vec<Option<ScoreSets>>,
}

impl PredictionSets {
    pub fn single(round: usize, group0: Vec<f64>, group1: Vec<f64>) -> Self {
        PredictionSets {
            round,
            sets: vec![Some(ScoreSets { group0, group1 })],
        }
    }
}

fn mean_over(values: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for &v in values {
        acc.add(f(v));
    }
    acc.total() / values.len() as f64
}

/// `C(z) = mean_{y in Y0} k(z, y) - mean_{y in Y1} k(z, y)`.
pub fn c_function<K: ScalarKernel + ?Sized>(z: f64, sets: &ScoreSets, kernel: &K) -> Result<f64> {
    sets.check()?;
    Ok(mean_over(&sets.group0, |y| kernel.eval(z, y))
        - mean_over(&sets.group1, |y| kernel.eval(z, y)))
}

/// `C'(z)`, the derivative of [`c_function`] in `z`.
pub fn c_prime<K: ScalarKernel + ?Sized>(z: f64, sets: &ScoreSets, kernel: &K) -> Result<f64> {
    sets.check()?;
    Ok(TrackedC::new(sets, kernel).derivative(z))
}

/// Evaluator of `C'` for one set pair. For the distance-induced kernel the
/// derivative only depends on how many tracked scores lie on either side of
/// `z`, which is counted by binary search on sorted copies.
pub(crate) struct TrackedC<'a, K: ScalarKernel + ?Sized> {
    sets: &'a ScoreSets,
    kernel: &'a K,
    sorted: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a, K: ScalarKernel + ?Sized> TrackedC<'a, K> {
    pub fn new(sets: &'a ScoreSets, kernel: &'a K) -> Self {
        TrackedC {
            sets,
            kernel,
            sorted: None,
        }
    }

    fn with_sign_counting(mut self) -> Self {
        self.sorted = Some((sorted(&self.sets.group0), sorted(&self.sets.group1)));
        self
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match &self.sorted {
            Some((s0, s1)) => sign_mean(s0, z) - sign_mean(s1, z),
            None => {
                mean_over(&self.sets.group0, |y| self.kernel.grad1(z, y))
                    - mean_over(&self.sets.group1, |y| self.kernel.grad1(z, y))
            }
        }
    }
}

/// `mean_y -sign(z - y)` over a sorted sample; this is the mean of the
/// distance kernel's derivative and is exact because it sums integers.
fn sign_mean(sorted: &[f64], z: f64) -> f64 {
    let below = sorted.partition_point(|&y| y < z);
    let not_above = sorted.partition_point(|&y| y <= z);
    let above = sorted.len() - not_above;
    (above as f64 - below as f64) / sorted.len() as f64
}

fn tracked_for<'a>(sets: &'a ScoreSets, kernel: &'a Kernel) -> TrackedC<'a, Kernel> {
    let t = TrackedC::new(sets, kernel);
    if matches!(kernel, Kernel::DistanceInduced) {
        t.with_sign_counting()
    } else {
        t
    }
}

/// Gradient of a client fairness function plus the number of
/// (group, conditioning set) cells that had no rows in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessGradient {
    pub grad: Vec<f64>,
    pub empty_cells: usize,
}

/// Per-client correction weights `alpha_{k,j}^a`, indexed `[j][a]`.
pub type ClientAlpha = [[f64; 2]];

/// Value of the client function `f_k(theta; Y)` on `batch`, summed over
/// conditioning sets. Excluded sets and empty batch cells contribute zero.
pub fn fk_value(
    model: &Model,
    batch: &TabularDataset,
    alpha: &ClientAlpha,
    sets: &PredictionSets,
    spec: &FairnessSpec,
    kernel: &Kernel,
) -> Result<f64> {
    let rows: Vec<usize> = (0..batch.len()).collect();
    let mut total = 0.0;
    for (j, (cset, tracked)) in spec.conditioning_sets().iter().zip(&sets.sets).enumerate() {
        let Some(tracked) = tracked else { continue };
        tracked.check()?;
        for a in 0..2u8 {
            let cell = FairnessSpec::cell_rows(batch, &rows, cset, a);
            if cell.is_empty() {
                continue;
            }
            let mut acc = CompensatedSum::default();
            for &i in &cell {
                let s = spec.score(model, batch.row(i), batch.label(i));
                acc.add(c_function(s, tracked, kernel)?);
            }
            let sign = if a == 0 { 1.0 } else { -1.0 };
            total += 2.0 * sign * alpha[j][a as usize] * acc.total() / cell.len() as f64;
        }
    }
    Ok(total)
}

/// Partial gradient of `f_k` in `theta` with the prediction sets held fixed.
pub fn grad_fk(
    model: &Model,
    batch: &TabularDataset,
    alpha: &ClientAlpha,
    sets: &PredictionSets,
    spec: &FairnessSpec,
    kernel: &Kernel,
) -> Result<FairnessGradient> {
    let rows: Vec<usize> = (0..batch.len()).collect();
    grad_fk_rows(model, batch, &rows, alpha, sets, spec, kernel)
}

pub(crate) fn grad_fk_rows(
    model: &Model,
    data: &TabularDataset,
    rows: &[usize],
    alpha: &ClientAlpha,
    sets: &PredictionSets,
    spec: &FairnessSpec,
    kernel: &Kernel,
) -> Result<FairnessGradient> {
    let n_params = model.n_params();
    let mut grad = vec![0.0; n_params];
    let mut cell_grad = vec![0.0; n_params];
    let mut score_grad = vec![0.0; n_params];
    let mut empty_cells = 0;
    let csets = spec.conditioning_sets();
    if sets.sets.len() != csets.len() {
        return Err(Error::DimensionMismatch {
            expected: csets.len(),
            got: sets.sets.len(),
        });
    }
    for (j, (cset, tracked)) in csets.iter().zip(&sets.sets).enumerate() {
        let Some(tracked) = tracked else { continue };
        tracked.check()?;
        let c = tracked_for(tracked, kernel);
        for a in 0..2u8 {
            let cell = FairnessSpec::cell_rows(data, rows, cset, a);
            if cell.is_empty() {
                empty_cells += 1;
                continue;
            }
            let weight = alpha[j][a as usize];
            if weight == 0.0 {
                continue;
            }
            cell_grad.fill(0.0);
            for &i in &cell {
                let s = spec.score_and_grad(model, data.row(i), data.label(i), &mut score_grad);
                axpy(c.derivative(s), &score_grad, &mut cell_grad);
            }
            let sign = if a == 0 { 1.0 } else { -1.0 };
            axpy(2.0 * sign * weight / cell.len() as f64, &cell_grad, &mut grad);
        }
    }
    Ok(FairnessGradient { grad, empty_cells })
}

/// Scores of `rows` split by conditioning set and group. A set is `None` when
/// either group is empty in it.
pub(crate) fn own_score_sets(
    model: &Model,
    data: &TabularDataset,
    rows: &[usize],
    spec: &FairnessSpec,
) -> Vec<Option<ScoreSets>> {
    spec.conditioning_sets()
        .iter()
        .map(|cset| {
            let scores = |a| -> Vec<f64> {
                FairnessSpec::cell_rows(data, rows, cset, a)
                    .into_iter()
                    .map(|i| spec.score(model, data.row(i), data.label(i)))
                    .collect()
            };
            let (group0, group1) = (scores(0), scores(1));
            (!group0.is_empty() && !group1.is_empty()).then_some(ScoreSets { group0, group1 })
        })
        .collect()
}

/// Exact gradient of `sum_j MMD^2_j` over `rows` of `data`.
///
/// This is [`grad_fk`] with unit weights and the rows' own score lists as the
/// tracked sets, which is exactly the V-statistic gradient. Sets with an empty
/// group are skipped and counted in `empty_cells`.
pub fn mmd_squared_grad_rows(
    model: &Model,
    data: &TabularDataset,
    rows: &[usize],
    spec: &FairnessSpec,
    kernel: &Kernel,
) -> Result<FairnessGradient> {
    let own = own_score_sets(model, data, rows, spec);
    let skipped = own.iter().filter(|s| s.is_none()).count();
    let sets = PredictionSets { round: 0, sets: own };
    let alpha = vec![[1.0, 1.0]; sets.sets.len()];
    let mut g = grad_fk_rows(model, data, rows, &alpha, &sets, spec, kernel)?;
    g.empty_cells += skipped;
    Ok(g)
}

pub fn mmd_squared_grad(
    model: &Model,
    data: &TabularDataset,
    spec: &FairnessSpec,
    kernel: &Kernel,
) -> Result<FairnessGradient> {
    let rows: Vec<usize> = (0..data.len()).collect();
    mmd_squared_grad_rows(model, data, &rows, spec, kernel)
}

/// Squared MMD per conditioning set; `None` where a group is empty.
pub fn mmd_squared_by_set(
    model: &Model,
    data: &TabularDataset,
    spec: &FairnessSpec,
    kernel: &Kernel,
) -> Result<Vec<Option<f64>>> {
    let rows: Vec<usize> = (0..data.len()).collect();
    own_score_sets(model, data, &rows, spec)
        .into_iter()
        .map(|s| s.map(|s| mmd_squared(&s.group0, &s.group1, kernel)).transpose())
        .collect()
}

/// The training regularizer: sum over conditioning sets of the squared MMD.
pub fn mmd_regularizer(
    model: &Model,
    data: &TabularDataset,
    spec: &FairnessSpec,
    kernel: &Kernel,
) -> Result<f64> {
    Ok(mmd_squared_by_set(model, data, spec, kernel)?
        .into_iter()
        .flatten()
        .sum())
}

/// Reported unfairness: max over conditioning sets of `sqrt(MMD^2)`.
pub fn mmd_unfairness(
    model: &Model,
    data: &TabularDataset,
    spec: &FairnessSpec,
    kernel: &Kernel,
) -> Result<f64> {
    let per_set = mmd_squared_by_set(model, data, spec, kernel)?;
    if per_set.iter().all(Option::is_none) {
        return Err(Error::DegenerateGroup(
            "no conditioning set contains both groups".into(),
        ));
    }
    Ok(per_set
        .into_iter()
        .flatten()
        .map(|m| m.max(0.0).sqrt())
        .fold(0.0, f64::max))
}

/// `|P(h(x) >= 1/2 | A = 0) - P(h(x) >= 1/2 | A = 1)|`.
pub fn sp_unfairness(model: &Model, data: &TabularDataset) -> Result<f64> {
    let mut positives = [0usize; 2];
    let mut counts = [0usize; 2];
    for i in 0..data.len() {
        let a = data.protected(i) as usize;
        counts[a] += 1;
        if model.score(data.row(i)) >= 0.5 {
            positives[a] += 1;
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::DegenerateGroup("SP unfairness needs both groups".into()));
    }
    Ok((positives[0] as f64 / counts[0] as f64 - positives[1] as f64 / counts[1] as f64).abs())
}

/// Two clients with swapped group score distributions (`{0}` and `{1}`) and
/// equal weights. Returns the squared MMD between the mixture's groups and the
/// weighted sum of the clients' own squared MMDs.
pub fn decomposition_counterexample_check(kernel: &Kernel) -> Result<(f64, f64)> {
    let client1 = ([0.0], [1.0]);
    let client2 = ([1.0], [0.0]);
    let mixture0 = [client1.0[0], client2.0[0]];
    let mixture1 = [client1.1[0], client2.1[0]];
    let lhs = mmd_squared(&mixture0, &mixture1, kernel)?;
    let rhs = 0.5 * mmd_squared(&client1.0, &client1.1, kernel)?
        + 0.5 * mmd_squared(&client2.0, &client2.1, kernel)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Architecture;

    const G1: Kernel = Kernel::Gaussian { bandwidth: 1.0 };

    fn two_point_value() -> f64 {
        2.0 * (1.0 - (-0.5f64).exp())
    }

    #[test]
    fn mmd_examples() {
        let s = [0.1, 0.5, 0.9, 0.2];
        assert_eq!(mmd_squared(&s, &s, &G1).unwrap(), 0.0);
        let v = mmd_squared(&[0.0], &[1.0], &G1).unwrap();
        assert!((v - two_point_value()).abs() < 1e-15);
        assert!((v - 0.786_939).abs() < 1e-6);
        assert_eq!(mmd_squared(&[0.0], &[1.0], &Kernel::DistanceInduced).unwrap(), 2.0);
        assert!(matches!(mmd_squared(&[], &[1.0], &G1), Err(Error::DegenerateGroup(_))));
    }

    #[test]
    fn mmd_symmetry_and_permutation() {
        let a = [0.3, 0.11, 0.7, 0.52, 0.05];
        let b = [0.9, 0.4, 0.41];
        for k in [G1, Kernel::Laplacian { scale: 0.3 }, Kernel::DistanceInduced] {
            let ab = mmd_squared(&a, &b, &k).unwrap();
            assert_eq!(ab, mmd_squared(&b, &a, &k).unwrap());
            let mut a2 = a;
            a2.reverse();
            assert_eq!(ab, mmd_squared(&a2, &b, &k).unwrap());
        }
    }

    #[test]
    fn c_function_examples() {
        let same = ScoreSets {
            group0: vec![0.2, 0.8],
            group1: vec![0.2, 0.8],
        };
        assert_eq!(c_function(0.37, &same, &G1).unwrap(), 0.0);
        assert_eq!(c_prime(0.37, &same, &G1).unwrap(), 0.0);

        let sets = ScoreSets {
            group0: vec![0.0],
            group1: vec![1.0],
        };
        let v = c_function(0.0, &sets, &G1).unwrap();
        assert!((v - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((v - 0.393_469).abs() < 1e-6);

        let doubled = ScoreSets {
            group0: vec![0.0, 0.0],
            group1: vec![1.0],
        };
        assert_eq!(c_function(0.3, &doubled, &G1).unwrap(), c_function(0.3, &sets, &G1).unwrap());

        let empty = ScoreSets {
            group0: vec![],
            group1: vec![1.0],
        };
        assert!(matches!(c_function(0.0, &empty, &G1), Err(Error::DegenerateGroup(_))));
    }

    #[test]
    fn sign_counting_matches_direct_sum() {
        let sets = ScoreSets {
            group0: vec![0.1, 0.5, 0.5, 0.9, 0.3],
            group1: vec![0.2, 0.5, 0.7],
        };
        let k = Kernel::DistanceInduced;
        let direct = TrackedC::new(&sets, &k);
        let fast = tracked_for(&sets, &k);
        for z in [0.0, 0.1, 0.25, 0.5, 0.6, 0.9, 1.0] {
            assert_eq!(direct.derivative(z), fast.derivative(z));
        }
    }

    #[test]
    fn identical_sets_give_zero_gradient() {
        let model = Model::init(Architecture::Logistic, 2, 1);
        let batch = TabularDataset::new(
            vec![vec![0.1, 1.0], vec![-0.5, 0.3], vec![2.0, -1.0]],
            vec![0, 1, 1],
            vec![0, 1, 0],
        )
        .unwrap();
        let sets = PredictionSets::single(0, vec![0.3, 0.6], vec![0.3, 0.6]);
        let g = grad_fk(&model, &batch, &[[1.3, 0.7]], &sets, &FairnessSpec::default(), &G1).unwrap();
        assert!(g.grad.iter().all(|&v| v == 0.0));
        assert_eq!(g.empty_cells, 0);
    }

    #[test]
    fn empty_batch_cell_is_counted() {
        let model = Model::init(Architecture::Logistic, 1, 1);
        let batch = TabularDataset::new(vec![vec![0.1], vec![0.4]], vec![0, 1], vec![0, 0]).unwrap();
        let sets = PredictionSets::single(0, vec![0.3], vec![0.6]);
        let g = grad_fk(&model, &batch, &[[1.0, 1.0]], &sets, &FairnessSpec::default(), &G1).unwrap();
        assert_eq!(g.empty_cells, 1);
        let bad = PredictionSets::single(0, vec![], vec![0.6]);
        assert!(grad_fk(&model, &batch, &[[1.0, 1.0]], &bad, &FairnessSpec::default(), &G1).is_err());
    }

    #[test]
    fn sp_unfairness_counts() {
        // Logistic on one feature; positives are exactly the rows with x > 0.
        let model = Model::from_params(Architecture::Logistic, 1, vec![10.0, 0.0]).unwrap();
        let rows = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        let data = TabularDataset::new(
            rows.into_iter().map(|v| vec![v]).collect(),
            vec![0; 8],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
        )
        .unwrap();
        assert_eq!(sp_unfairness(&model, &data).unwrap(), 0.5);

        let constant = Model::from_params(Architecture::Logistic, 1, vec![0.0, 2.2]).unwrap();
        assert_eq!(sp_unfairness(&constant, &data).unwrap(), 0.0);
        assert_eq!(mmd_unfairness(&constant, &data, &FairnessSpec::default(), &G1).unwrap(), 0.0);

        let one_group = TabularDataset::new(vec![vec![1.0]], vec![0], vec![1]).unwrap();
        assert!(sp_unfairness(&model, &one_group).is_err());
    }

    #[test]
    fn mmd_unfairness_is_root_of_mmd_squared() {
        let model = Model::from_params(Architecture::Logistic, 1, vec![1.5, -0.2]).unwrap();
        let xs = [0.3, -1.2, 0.8, 2.0, -0.1, 0.6];
        let data = TabularDataset::new(
            xs.iter().map(|&v| vec![v]).collect(),
            vec![0, 1, 0, 1, 1, 0],
            vec![0, 0, 0, 1, 1, 1],
        )
        .unwrap();
        let sp = FairnessSpec::default();
        let scores = |a: u8| -> Vec<f64> {
            (0..6)
                .filter(|&i| data.protected(i) == a)
                .map(|i| model.predict(data.row(i)).unwrap())
                .collect()
        };
        let m2 = mmd_squared(&scores(0), &scores(1), &G1).unwrap();
        assert_eq!(mmd_unfairness(&model, &data, &sp, &G1).unwrap(), m2.sqrt());

        let eo = FairnessSpec::new(Criterion::EqualizedOdds);
        let per_set = mmd_squared_by_set(&model, &data, &eo, &G1).unwrap();
        let want = per_set.iter().flatten().map(|v| v.sqrt()).fold(0.0, f64::max);
        assert_eq!(mmd_unfairness(&model, &data, &eo, &G1).unwrap(), want);
        assert_eq!(
            mmd_regularizer(&model, &data, &eo, &G1).unwrap(),
            per_set.iter().flatten().sum::<f64>()
        );
    }

    #[test]
    fn criteria_table() {
        use ConditioningSet::*;
        let sets = |c| FairnessSpec::new(c).conditioning_sets();
        assert_eq!(sets(Criterion::StatisticalParity), vec![All]);
        assert_eq!(sets(Criterion::EqualOpportunity), vec![Label(1)]);
        assert_eq!(sets(Criterion::EqualizedOdds), vec![Label(0), Label(1)]);
        assert_eq!(sets(Criterion::RiskParity), vec![All]);
        assert_eq!(sets(Criterion::PredictiveEquality), vec![Label(0)]);
        assert_eq!(FairnessSpec::new(Criterion::RiskParity).score_kind(), ScoreKind::Loss);
        assert_eq!(FairnessSpec::default().score_kind(), ScoreKind::Prediction);
        let csp = Criterion::ConditionalStatisticalParity {
            feature: 3,
            threshold: 0.0,
        };
        assert!(FairnessSpec::new(csp).validate(3).is_err());
        assert!(FairnessSpec::new(csp).validate(4).is_ok());
    }

    #[test]
    fn counterexample() {
        let (lhs, rhs) = decomposition_counterexample_check(&G1).unwrap();
        assert_eq!(lhs, 0.0);
        assert!((rhs - two_point_value()).abs() < 1e-15);
        let (lhs, rhs) = decomposition_counterexample_check(&Kernel::DistanceInduced).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 2.0);
        let (lhs, _) = decomposition_counterexample_check(&Kernel::Laplacian { scale: 0.1 }).unwrap();
        assert_eq!(lhs, 0.0);
    }
}
