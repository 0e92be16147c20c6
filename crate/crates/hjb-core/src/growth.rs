//! Growth-class witnesses: certificates that sampled values stay inside the
//! strict `o(1+|x|^p)` or bounded `O(1+|x|^p)` envelope.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("empty grid: no sample points")]
    EmptyGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthMode {
    /// Strict class: for every `ε > 0` there is `M_ε` with
    /// `|u| ≤ M_ε + ε(1+|x|^p)`.
    Strict,
    /// Bounded class: `|u| ≤ C(1+|x|^p)`.
    Bounded,
}

/// Witness of membership in a growth class, produced from grid samples.
///
/// Strict witnesses retain the samples so the map `ε ↦ M_ε` (and the signed
/// envelope `λ ↦ M_λ`) can be evaluated for any positive argument.
pub struct GrowthClassWitness {
    pub mode: GrowthMode,
    /// Smallest sampled constant for the bounded class.
    pub bound_constant: f64,
    /// `(value, signed value, 1+|x|^p)` triples retained for envelope queries.
    samples: Vec<(f64, f64, f64)>,
}

impl GrowthClassWitness {
    /// `M_ε = max over samples of (|u| − ε(1+|x|^p))`, clamped at zero.
    pub fn m_eps(&self, eps: f64) -> f64 {
        self.samples
            .iter()
            .map(|&(a, _, g)| a - eps * g)
            .fold(0.0f64, f64::max)
    }

    /// Signed envelope `M_λ = sup (u − λ(1+|x|^p))` over the samples.
    pub fn signed_envelope(&self, lambda: f64) -> f64 {
        self.samples
            .iter()
            .map(|&(_, s, g)| s - lambda * g)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks the defining inequality at every retained sample.
    pub fn verify(&self, eps: f64) -> bool {
        match self.mode {
            GrowthMode::Bounded => self
                .samples
                .iter()
                .all(|&(a, _, g)| a <= self.bound_constant * g + 1e-12),
            GrowthMode::Strict => {
                let m = self.m_eps(eps);
                self.samples
                    .iter()
                    .all(|&(a, _, g)| a <= m + eps * g + 1e-12)
            }
        }
    }
}

/// Builds a growth witness for values sampled at the given points.
///
/// `points` and `values` are parallel; typically the flattening of a
/// space-time grid slice sequence.
pub fn growth_witness(
    points: &[Vec<f64>],
    values: &[f64],
    p: f64,
    mode: GrowthMode,
) -> Result<GrowthClassWitness, GrowthError> {
    if points.is_empty() || values.is_empty() {
        return Err(GrowthError::EmptyGrid);
    }
    assert_eq!(points.len(), values.len());
    let samples: Vec<(f64, f64, f64)> = points
        .iter()
        .zip(values)
        .map(|(x, &v)| {
            let g = 1.0 + crate::util::norm(x).powf(p);
            (v.abs(), v, g)
        })
        .collect();
    let bound_constant = samples
        .iter()
        .map(|&(a, _, g)| a / g)
        .fold(0.0f64, f64::max);
    Ok(GrowthClassWitness {
        mode,
        bound_constant,
        samples,
    })
}
