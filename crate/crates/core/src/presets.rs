//! Named objective/distribution pairs used by the experiments.
//!
//! `hinge`: three-dimensional hinge GLM with 20% label noise. Every base
//! feature `x_k` satisfies `w* . x_k = 1` for `w* = (1, 1/2, 1/2)`, so `w*` is
//! the unique population minimizer and `min F_D = 2 * 0.2 = 0.4`.

use std::str::FromStr;

use crate::constructions::{GnVariant, LinearConstruction, NonsmoothConstruction};
use crate::distributions::FiniteDistribution;
use crate::error::{config, Error, Result};
use crate::objectives::{ConvexObjective, Instance, ScalarLoss};

/// Base features of the hinge preset.
pub const HINGE_FEATURES: [[f64; 3]; 5] = [
    [0.5, 0.5, 0.5],
    [0.8, 0.4, 0.0],
    [0.8, 0.0, 0.4],
    [0.4, 0.8, 0.4],
    [0.4, 0.4, 0.8],
];

/// Label-flip probability of the hinge preset.
pub const HINGE_NOISE: f64 = 0.2;

/// Population minimizer of the hinge preset.
pub const HINGE_MINIMIZER: [f64; 3] = [1.0, 0.5, 0.5];

/// Minimum population risk of the hinge preset.
pub const HINGE_MIN_RISK: f64 = 2.0 * HINGE_NOISE;

pub fn hinge_objective() -> ConvexObjective {
    ConvexObjective::glm(ScalarLoss::hinge(), 3)
}

pub fn hinge_distribution() -> FiniteDistribution {
    let k = HINGE_FEATURES.len() as f64;
    let mut atoms = Vec::new();
    let mut probs = Vec::new();
    for x in HINGE_FEATURES {
        atoms.push(Instance::glm(x.to_vec(), 1.0));
        probs.push((1.0 - HINGE_NOISE) / k);
        atoms.push(Instance::glm(x.to_vec(), -1.0));
        probs.push(HINGE_NOISE / k);
    }
    FiniteDistribution::new(atoms, probs).expect("static preset")
}

/// Single atom `(e_1, 0)` under the absolute loss: `w = 0` is optimal and
/// every sample equals the population.
pub fn single_atom() -> (ConvexObjective, FiniteDistribution) {
    let loss = ScalarLoss::absolute(1.0).expect("static preset");
    (
        ConvexObjective::glm(loss, 2),
        FiniteDistribution::single(Instance::glm(vec![1.0, 0.0], 0.0)),
    )
}

/// Parameters a preset may need beyond its name.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresetContext {
    pub lipschitz: f64,
    pub n: usize,
    pub eta: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Hinge,
    SingleAtom,
    /// Linear construction with equiprobable `z = +-1`.
    Rademacher,
    /// Nonsmooth construction with `d = 2T`.
    AppC2,
    G4Drift,
    G4ScaledDrift,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hinge" => Ok(Preset::Hinge),
            "single-atom" => Ok(Preset::SingleAtom),
            "rademacher" | "appc1" => Ok(Preset::Rademacher),
            "appc2" => Ok(Preset::AppC2),
            "g4-drift" | "g4" => Ok(Preset::G4Drift),
            "g4-scaled-drift" => Ok(Preset::G4ScaledDrift),
            other => Err(config(format!("unknown preset `{other}`"))),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Hinge => "hinge",
            Preset::SingleAtom => "single-atom",
            Preset::Rademacher => "rademacher",
            Preset::AppC2 => "appc2",
            Preset::G4Drift => "g4-drift",
            Preset::G4ScaledDrift => "g4-scaled-drift",
        }
    }

    /// Builds the objective and distribution.
    pub fn build(self, ctx: &PresetContext) -> Result<(ConvexObjective, FiniteDistribution)> {
        match self {
            Preset::Hinge => Ok((hinge_objective(), hinge_distribution())),
            Preset::SingleAtom => Ok(single_atom()),
            Preset::Rademacher => {
                let c = LinearConstruction::new(ctx.lipschitz, 1)?;
                Ok((c.objective(), c.distribution()))
            }
            Preset::AppC2 => {
                let c = NonsmoothConstruction::new(
                    ctx.lipschitz,
                    ctx.eta,
                    ctx.steps,
                    ctx.n,
                    2 * ctx.steps,
                )?;
                Ok((c.objective(), c.distribution()))
            }
            Preset::G4Drift => Ok(GnVariant::Drift.instance(ctx.lipschitz, ctx.n)),
            Preset::G4ScaledDrift => Ok(GnVariant::ScaledDrift.instance(ctx.lipschitz, ctx.n)),
        }
    }
}
