//! Maximal monotone relations given by their resolvents `J_λ = (I + λA)^{-1}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tolerances::MONOTONE;
use crate::weighted_space::WeightedSignal;

type ResolventFn = dyn Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync;

/// A relation `A ⊆ ℝ^m × ℝ^m` represented by its resolvent.
#[derive(Clone)]
pub struct MonotoneRelation {
    name: String,
    dim: usize,
    zero_in: bool,
    kind: Kind,
    resolvent: Arc<ResolventFn>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Zero,
    Other,
}

impl fmt::Debug for MonotoneRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneRelation")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("zero_in", &self.zero_in)
            .finish()
    }
}

impl MonotoneRelation {
    /// A relation from a user resolvent `(λ, y, x)`, writing `J_λ y` into `x`.
    pub fn custom<F>(name: &str, dim: usize, zero_in: bool, resolvent: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        Self { name: name.to_string(), dim, zero_in, kind: Kind::Other, resolvent: Arc::new(resolvent) }
    }

    pub fn zero(dim: usize) -> Self {
        let mut r = Self::custom("zero", dim, true, |_, y, x| {
            x.copy_from_slice(y);
            Ok(())
        });
        r.kind = Kind::Zero;
        r
    }

    /// `A x = a x` with `a >= 0`.
    pub fn linear(dim: usize, a: f64) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(Error::Precondition(format!("linear relation needs a >= 0, got {a}")));
        }
        Ok(Self::custom(&format!("linear({a})"), dim, true, move |lambda, y, x| {
            for (xi, yi) in x.iter_mut().zip(y) {
                *xi = yi / (1.0 + lambda * a);
            }
            Ok(())
        }))
    }

    /// Subdifferential of the indicator of the box `[lower, upper]^m`; the resolvent is the clamp.
    pub fn box_indicator(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::Precondition(format!("empty box [{lower}, {upper}]")));
        }
        let zero_in = lower <= 0.0 && 0.0 <= upper;
        Ok(Self::custom(&format!("box[{lower}, {upper}]"), dim, zero_in, move |_, y, x| {
            for (xi, yi) in x.iter_mut().zip(y) {
                *xi = yi.clamp(lower, upper);
            }
            Ok(())
        }))
    }

    /// The maximal monotone completion of the inverse Heaviside graph: the indicator
    /// subdifferential of `[0, 1]`.
    pub fn heaviside_inverse(dim: usize) -> Self {
        let mut r = Self::box_indicator(dim, 0.0, 1.0).expect("valid box");
        r.name = "heaviside_inverse".into();
        r
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains_origin(&self) -> bool {
        self.zero_in
    }

    pub fn is_zero(&self) -> bool {
        self.kind == Kind::Zero
    }

    pub fn resolve_into(&self, lambda: f64, y: &[f64], x: &mut [f64]) -> Result<()> {
        if !(lambda > 0.0) {
            return Err(Error::Precondition(format!("resolvent parameter must be positive, got {lambda}")));
        }
        if y.len() != self.dim || x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "relation `{}` acts on dimension {}, got {}",
                self.name,
                self.dim,
                y.len()
            )));
        }
        (self.resolvent)(lambda, y, x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Resolvent(format!("`{}` returned a non-finite value", self.name)));
        }
        Ok(())
    }
}

/// `J_λ y`: the unique `x` with `(x, (y - x)/λ) ∈ A`.
pub fn resolve(a: &MonotoneRelation, lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
    let mut x = vec![0.0; y.len()];
    a.resolve_into(lambda, y, &mut x)?;
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCheck {
    pub pass: bool,
    /// Most negative `⟨J y1 - J y2, (y1 - J y1) - (y2 - J y2)⟩` found (0 if none negative).
    pub worst_violation: f64,
    /// `J_λ(0)` norm, when the relation claims `(0, 0) ∈ A`.
    pub origin_residual: f64,
}

/// A sample `(λ, y1, y2)` for [`check_monotone`].
pub type SamplePair = (f64, Vec<f64>, Vec<f64>);

/// Seeded random pairs with entries in `[-scale, scale]` and `λ` in `[0.01, 10]`.
pub fn random_pairs(dim: usize, count: usize, scale: f64, seed: u64) -> Vec<SamplePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
            let y1 = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
            let y2 = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
            (lambda, y1, y2)
        })
        .collect()
}

/// Firm nonexpansiveness on the sampled pairs, with slack `1e-10`.
pub fn check_monotone(a: &MonotoneRelation, pairs: &[SamplePair]) -> Result<MonotoneCheck> {
    let mut worst: f64 = 0.0;
    let mut origin: f64 = 0.0;
    for (lambda, y1, y2) in pairs {
        let x1 = resolve(a, *lambda, y1)?;
        let x2 = resolve(a, *lambda, y2)?;
        let mut ip = 0.0;
        for k in 0..a.dim {
            ip += (x1[k] - x2[k]) * ((y1[k] - x1[k]) - (y2[k] - x2[k]));
        }
        worst = worst.min(ip);
        if a.zero_in {
            let z = resolve(a, *lambda, &vec![0.0; a.dim])?;
            origin = origin.max(z.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
    }
    Ok(MonotoneCheck { pass: worst >= -MONOTONE && origin == 0.0, worst_violation: worst, origin_residual: origin })
}

/// Applies `J_λ` at every sample of `u` independently.
pub fn extend_pointwise(a: &MonotoneRelation, u: &WeightedSignal, lambda: f64) -> Result<WeightedSignal> {
    if u.dim() != a.dim {
        return Err(Error::DimensionMismatch(format!("relation dimension {} vs signal {}", a.dim, u.dim())));
    }
    let dim = a.dim;
    let mut out = vec![0.0; u.data().len()];
    let failures: Vec<String> = out
        .par_chunks_mut(dim)
        .zip(u.data().par_chunks(dim))
        .enumerate()
        .filter_map(|(j, (x, y))| a.resolve_into(lambda, y, x).err().map(|e| format!("sample {j}: {e}")))
        .collect();
    if !failures.is_empty() {
        return Err(Error::Resolvent(format!("{} samples failed; first: {}", failures.len(), failures[0])));
    }
    WeightedSignal::new(*u.grid(), u.nu(), dim, out)
}

pub type RelationParams = BTreeMap<String, f64>;
type Builder = Box<dyn Fn(usize, &RelationParams) -> Result<MonotoneRelation> + Send + Sync>;

/// Relations addressed by name from config files.
pub struct RelationRegistry {
    builders: BTreeMap<String, Builder>,
}

impl Default for RelationRegistry {
    fn default() -> Self {
        let mut r = Self { builders: BTreeMap::new() };
        r.register("zero", |dim, _| Ok(MonotoneRelation::zero(dim)));
        r.register("linear", |dim, p| {
            let a = p.get("a").copied().ok_or_else(|| Error::Config("relation `linear` needs `a`".into()))?;
            MonotoneRelation::linear(dim, a)
        });
        r.register("box", |dim, p| {
            MonotoneRelation::box_indicator(
                dim,
                p.get("lower").copied().unwrap_or(0.0),
                p.get("upper").copied().unwrap_or(1.0),
            )
        });
        r.register("heaviside_inverse", |dim, _| Ok(MonotoneRelation::heaviside_inverse(dim)));
        r
    }
}

impl RelationRegistry {
    pub fn register<F>(&mut self, name: &str, build: F)
    where
        F: Fn(usize, &RelationParams) -> Result<MonotoneRelation> + Send + Sync + 'static,
    {
        self.builders.insert(name.to_string(), Box::new(build));
    }

    pub fn build(&self, name: &str, dim: usize, params: &RelationParams) -> Result<MonotoneRelation> {
        let b = self.builders.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown relation `{name}` (known: {})",
                self.builders.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?;
        b(dim, params)
    }
}
