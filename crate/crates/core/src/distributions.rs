//! Finite-support data distributions, seeded sampling and exact population
//! quantities.
//!
//! Replicate streams are derived as `ChaCha8(stream_seed(seed, replicate))`
//! where `stream_seed` is a SplitMix64-based mix. The stream only depends on
//! `(seed, replicate)`, so replicates can be drawn in any order or in parallel.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, config, Result};
use crate::objectives::{ConvexObjective, Instance};
use crate::vector::WeightVector;

const PROB_TOLERANCE: f64 = 1e-12;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the stream for replicate `replicate` under master `seed`:
/// `splitmix64(seed ^ splitmix64(replicate))`.
pub fn stream_seed(seed: u64, replicate: u64) -> u64 {
    splitmix64(seed ^ splitmix64(replicate))
}

/// RNG for one replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, replicate))
}

/// Distribution over finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDistribution {
    atoms: Vec<Instance>,
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(atoms: Vec<Instance>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(config("distribution needs at least one atom"));
        }
        if atoms.len() != probs.len() {
            return Err(config(format!(
                "{} atoms but {} probabilities",
                atoms.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(config("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(config(format!("probabilities sum to {total}, not 1")));
        }
        let d = atoms[0].features.len();
        if atoms.iter().any(|a| a.features.len() != d) {
            return Err(config("atoms have inconsistent feature dimension"));
        }
        Ok(FiniteDistribution { atoms, probs })
    }

    pub fn single(atom: Instance) -> Self {
        FiniteDistribution {
            atoms: vec![atom],
            probs: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[Instance] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn feature_dim(&self) -> usize {
        self.atoms[0].features.len()
    }

    /// The distribution viewed as a weighted measure.
    pub fn measure(&self) -> Measure {
        Measure {
            atoms: self.atoms.clone(),
            weights: self.probs.clone(),
        }
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        // validated at construction: weights non-negative with positive total
        WeightedIndex::new(&self.probs).expect("validated probabilities")
    }

    /// Draw atom indices from an existing RNG.
    pub fn draw_indices(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
        let sampler = self.sampler();
        (0..n).map(|_| sampler.sample(rng)).collect()
    }
}

/// An ordered i.i.d. sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub instances: Vec<Instance>,
    /// Atom index of each instance when drawn from a [`FiniteDistribution`].
    pub atom_indices: Option<Vec<usize>>,
    pub seed: u64,
    pub replicate_index: u64,
}

impl SampleSet {
    /// A sample given explicitly rather than drawn.
    pub fn from_instances(instances: Vec<Instance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(config("sample must contain at least one instance"));
        }
        Ok(SampleSet {
            instances,
            atom_indices: None,
            seed: 0,
            replicate_index: 0,
        })
    }

    /// Sample built from atom indices into `dist`.
    pub fn from_indices(
        dist: &FiniteDistribution,
        indices: Vec<usize>,
        seed: u64,
        replicate: u64,
    ) -> Self {
        SampleSet {
            instances: indices.iter().map(|&i| dist.atoms[i].clone()).collect(),
            atom_indices: Some(indices),
            seed,
            replicate_index: replicate,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Empirical measure `(1/n) sum_i delta_{z_i}`. Repeated atoms are merged
    /// into a single weighted atom.
    pub fn measure(&self) -> Measure {
        let n = self.instances.len() as f64;
        match &self.atom_indices {
            Some(idx) => {
                let max = idx.iter().copied().max().unwrap_or(0);
                let mut counts = vec![0usize; max + 1];
                let mut first = vec![usize::MAX; max + 1];
                for (pos, &a) in idx.iter().enumerate() {
                    counts[a] += 1;
                    if first[a] == usize::MAX {
                        first[a] = pos;
                    }
                }
                let mut atoms = Vec::new();
                let mut weights = Vec::new();
                for (a, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        atoms.push(self.instances[first[a]].clone());
                        weights.push(c as f64 / n);
                    }
                }
                Measure { atoms, weights }
            }
            None => Measure {
                atoms: self.instances.clone(),
                weights: vec![1.0 / n; self.instances.len()],
            },
        }
    }
}

/// Draw `n` i.i.d. instances using the stream for `(seed, replicate)`.
pub fn sample(dist: &FiniteDistribution, n: usize, seed: u64, replicate: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(config("sample size must be >= 1"));
    }
    let mut rng = replicate_rng(seed, replicate);
    let idx = dist.draw_indices(&mut rng, n);
    Ok(SampleSet::from_indices(dist, idx, seed, replicate))
}

/// Finite weighted measure `sum_j weight_j delta_{atom_j}`; both empirical and
/// population risks are of this form.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    pub atoms: Vec<Instance>,
    pub weights: Vec<f64>,
}

impl Measure {
    pub fn check(&self, obj: &ConvexObjective) -> Result<()> {
        for a in &self.atoms {
            obj.check_instance(a)?;
        }
        Ok(())
    }

    /// `sum_j weight_j f(w; atom_j)`; caller guarantees dimensions.
    pub(crate) fn risk_unchecked(&self, obj: &ConvexObjective, w: &[f64]) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(z, p)| p * obj.value_unchecked(w, z))
            .sum()
    }

    /// Writes `sum_j weight_j g_j(w)` into `out`.
    pub(crate) fn subgrad_into(&self, obj: &ConvexObjective, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (z, p) in self.atoms.iter().zip(&self.weights) {
            obj.add_subgrad_unchecked(w, z, *p, out);
        }
    }

    pub fn risk(&self, obj: &ConvexObjective, w: &[f64]) -> Result<f64> {
        check_dim(obj.dim(), w.len())?;
        self.check(obj)?;
        Ok(self.risk_unchecked(obj, w))
    }

    pub fn subgrad(&self, obj: &ConvexObjective, w: &[f64]) -> Result<WeightVector> {
        check_dim(obj.dim(), w.len())?;
        self.check(obj)?;
        let mut g = WeightVector::zeros(w.len());
        self.subgrad_into(obj, w, &mut g);
        Ok(g)
    }
}

/// `F_D(w)`, summed exactly over atoms.
pub fn population_risk(dist: &FiniteDistribution, obj: &ConvexObjective, w: &[f64]) -> Result<f64> {
    check_dim(obj.dim(), w.len())?;
    let mut total = 0.0;
    for (z, p) in dist.atoms.iter().zip(&dist.probs) {
        obj.check_instance(z)?;
        total += p * obj.value_unchecked(w, z);
    }
    Ok(total)
}

/// A subgradient of `F_D` at `w`: the probability-weighted instance subgradients.
pub fn population_subgrad(
    dist: &FiniteDistribution,
    obj: &ConvexObjective,
    w: &[f64],
) -> Result<WeightVector> {
    dist.measure().subgrad(obj, w)
}

/// `F_S(w)`: mean of instance values over the sample, in sample order.
pub fn empirical_risk(s: &SampleSet, obj: &ConvexObjective, w: &[f64]) -> Result<f64> {
    check_dim(obj.dim(), w.len())?;
    let mut total = 0.0;
    for z in &s.instances {
        obj.check_instance(z)?;
        total += obj.value_unchecked(w, z);
    }
    Ok(total / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{LinearObjective, ScalarLoss};

    fn rademacher() -> FiniteDistribution {
        FiniteDistribution::new(
            vec![Instance::scalar(1.0), Instance::scalar(-1.0)],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    fn linear() -> ConvexObjective {
        ConvexObjective::Linear(LinearObjective {
            lipschitz: 1.0,
            dim: 1,
        })
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(FiniteDistribution::new(vec![], vec![]).is_err());
        assert!(FiniteDistribution::new(vec![Instance::scalar(1.0)], vec![0.9]).is_err());
        assert!(FiniteDistribution::new(
            vec![Instance::scalar(1.0), Instance::scalar(0.0)],
            vec![1.2, -0.2]
        )
        .is_err());
        assert!(FiniteDistribution::new(
            vec![
                Instance::glm(vec![1.0], 1.0),
                Instance::glm(vec![1.0, 0.0], 1.0)
            ],
            vec![0.5, 0.5]
        )
        .is_err());
    }

    #[test]
    fn single_atom_sample_repeats_the_atom() {
        let atom = Instance::glm(vec![0.5, 0.5], 1.0);
        let s = sample(&FiniteDistribution::single(atom.clone()), 3, 7, 0).unwrap();
        assert_eq!(s.instances, vec![atom.clone(), atom.clone(), atom]);
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let d = rademacher();
        let a = sample(&d, 50, 11, 3).unwrap();
        let b = sample(&d, 50, 11, 3).unwrap();
        let c = sample(&d, 50, 11, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.instances, c.instances);
        assert!(sample(&d, 0, 1, 1).is_err());
    }

    #[test]
    fn rademacher_mean_is_near_zero() {
        // sd of the mean is 1/sqrt(n) ~ 0.00316; 0.02 is > 6 sd
        let s = sample(&rademacher(), 100_000, 2024, 0).unwrap();
        let m: f64 = s.instances.iter().map(|z| z.label).sum::<f64>() / s.len() as f64;
        assert!(m.abs() < 0.02, "mean {m}");
    }

    #[test]
    fn symmetric_linear_population_is_flat() {
        let d = rademacher();
        for w in [-3.0, 0.0, 0.7] {
            assert_eq!(population_risk(&d, &linear(), &[w]).unwrap(), 0.0);
            assert_eq!(
                population_subgrad(&d, &linear(), &[w]).unwrap().as_slice(),
                &[0.0]
            );
        }
    }

    #[test]
    fn single_atom_population_equals_instance() {
        let atom = Instance::glm(vec![0.6, 0.0], -1.0);
        let obj = ConvexObjective::glm(ScalarLoss::hinge(), 2);
        let d = FiniteDistribution::single(atom.clone());
        let w = [0.4, -2.0];
        assert_eq!(
            population_risk(&d, &obj, &w).unwrap(),
            crate::objectives::instance_value(&obj, &w, &atom).unwrap()
        );
        assert_eq!(
            population_subgrad(&d, &obj, &w).unwrap(),
            crate::objectives::instance_subgrad(&obj, &w, &atom).unwrap()
        );
    }

    #[test]
    fn population_subgrad_matches_central_differences() {
        let atoms = vec![
            Instance::glm(vec![0.5, 0.5], 1.0),
            Instance::glm(vec![0.8, -0.2], -1.0),
            Instance::glm(vec![-0.3, 0.9], 1.0),
        ];
        let d = FiniteDistribution::new(atoms, vec![0.5, 0.3, 0.2]).unwrap();
        let obj = ConvexObjective::glm(ScalarLoss::hinge(), 2);
        let w = [0.37, -0.21];
        let g = population_subgrad(&d, &obj, &w).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut wp = w;
            let mut wm = w;
            wp[i] += h;
            wm[i] -= h;
            let fd = (population_risk(&d, &obj, &wp).unwrap()
                - population_risk(&d, &obj, &wm).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn empirical_measure_merges_duplicates() {
        let d = rademacher();
        let s = sample(&d, 1000, 5, 0).unwrap();
        let m = s.measure();
        assert!(m.atoms.len() <= 2);
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let w = [0.25];
        let direct = empirical_risk(&s, &linear(), &w).unwrap();
        assert!((m.risk(&linear(), &w).unwrap() - direct).abs() < 1e-12);
    }
}
