//! Quantum probability measures on finite outcome spaces.
//!
//! A [`Povm`] assigns a positive effect `h_j` to every outcome, with the
//! effects summing to the identity. The reference state is the normalized
//! trace, so the induced classical measure is `μ_j = tr(h_j) / d`. Outcomes
//! with `μ_j = 0` are kept in the data model but are μ-null: they are ignored
//! by essential suprema, essential ranges and dilations.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::matkit::{self, c64, identity, operator_norm, CMatrix};
use crate::random::rng_from;

/// Outcomes whose induced mass is at most this are treated as μ-null.
pub const NULL_MASS: f64 = 1e-12;

/// Ordered list of distinct outcome labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidOutcomeSpace("no outcomes".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidOutcomeSpace(format!("duplicate label {l:?}")));
            }
        }
        Ok(OutcomeSpace { labels })
    }

    pub fn from_strs(labels: &[&str]) -> Result<Self> {
        Self::new(labels.iter().map(|s| s.to_string()).collect())
    }

    pub fn singleton(label: &str) -> Self {
        OutcomeSpace { labels: vec![label.to_string()] }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Quantum probability measure on a finite outcome space.
#[derive(Debug, Clone)]
pub struct Povm {
    space: OutcomeSpace,
    dim: usize,
    effects: Vec<CMatrix>,
    sqrt_effects: Vec<CMatrix>,
    weights: Vec<f64>,
}

/// Diagnostics from [`validate_povm`].
#[derive(Debug, Clone)]
pub struct PovmValidation {
    pub povm: Povm,
    pub min_eigenvalues: Vec<f64>,
    pub sum_deviation: f64,
}

/// Validates effects as a quantum probability measure.
///
/// Each effect must be hermitian and positive within `tol`, and
/// `||Σ h_j - I||` must not exceed `tol`.
pub fn validate_povm(space: OutcomeSpace, effects: Vec<CMatrix>, tol: f64) -> Result<PovmValidation> {
    if effects.is_empty() {
        return Err(Error::InvalidOutcomeSpace("no effects".into()));
    }
    if effects.len() != space.len() {
        return Err(Error::DimensionMismatch { expected: space.len(), found: effects.len() });
    }
    let d = effects[0].nrows();
    if d == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    for h in &effects {
        matkit::ensure_square(h)?;
        if h.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, found: h.nrows() });
        }
        if !matkit::is_finite(h) {
            return Err(Error::NonFinite);
        }
    }
    let mut min_eigenvalues = Vec::with_capacity(effects.len());
    let mut hermitian = Vec::with_capacity(effects.len());
    for (index, h) in effects.iter().enumerate() {
        if !matkit::is_hermitian(h, tol) {
            return Err(Error::EffectNotHermitian { index, asymmetry: matkit::asymmetry(h) });
        }
        let hh = matkit::hermitian_part(h);
        let min = matkit::min_eigenvalue(&hh);
        if min < -tol {
            return Err(Error::EffectNotPsd { index, min_eigenvalue: min });
        }
        min_eigenvalues.push(min);
        hermitian.push(hh);
    }
    let mut total = CMatrix::zeros(d, d);
    for h in &hermitian {
        total += h;
    }
    let sum_deviation = operator_norm(&(total - identity(d)));
    if sum_deviation > tol {
        return Err(Error::SumNotIdentity { deviation: sum_deviation });
    }
    let sqrt_effects = hermitian.iter().map(|h| matkit::psd_sqrt(h, tol)).collect::<Result<Vec<_>>>()?;
    let weights = hermitian.iter().map(|h| matkit::trace(h).re.max(0.0) / d as f64).collect();
    let povm = Povm { space, dim: d, effects: hermitian, sqrt_effects, weights };
    Ok(PovmValidation { povm, min_eigenvalues, sum_deviation })
}

impl Povm {
    pub fn new(space: OutcomeSpace, effects: Vec<CMatrix>, tol: f64) -> Result<Povm> {
        validate_povm(space, effects, tol).map(|v| v.povm)
    }

    /// Point mass `{I}` at a single outcome.
    pub fn point_mass(label: &str, dim: usize) -> Povm {
        Povm::new(OutcomeSpace::singleton(label), vec![identity(dim)], 0.0).expect("identity is a POVM")
    }

    /// Point mass at `x0` inside a larger space (all other effects zero).
    pub fn point_mass_in(space: OutcomeSpace, x0: usize, dim: usize) -> Result<Povm> {
        let effects = (0..space.len()).map(|j| if j == x0 { identity(dim) } else { CMatrix::zeros(dim, dim) }).collect();
        Povm::new(space, effects, 0.0)
    }

    /// Classical measure `p_j · I_d`.
    pub fn classical(space: OutcomeSpace, probabilities: &[f64], dim: usize, tol: f64) -> Result<Povm> {
        let effects = probabilities.iter().map(|&p| identity(dim) * c64(p, 0.0)).collect();
        Povm::new(space, effects, tol)
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn effect(&self, j: usize) -> &CMatrix {
        &self.effects[j]
    }

    /// `h_j^{1/2}`.
    pub fn sqrt_effect(&self, j: usize) -> &CMatrix {
        &self.sqrt_effects[j]
    }

    pub fn sqrt_effects(&self) -> &[CMatrix] {
        &self.sqrt_effects
    }

    /// Induced weight `μ_j = tr(h_j)/d`.
    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn is_supported(&self, j: usize) -> bool {
        self.weights[j] > NULL_MASS
    }

    /// Indices of outcomes with positive induced mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.is_supported(j)).collect()
    }
}

/// Density operator: positive, trace one.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix, tol: f64) -> Result<DensityOperator> {
        matkit::ensure_square(&matrix)?;
        if !matkit::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        if !matkit::is_hermitian(&matrix, tol) {
            return Err(Error::InvalidState("not hermitian".into()));
        }
        let m = matkit::hermitian_part(&matrix);
        let min = matkit::min_eigenvalue(&m);
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        let t = matkit::trace(&m).re;
        if (t - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {t} is not 1")));
        }
        Ok(DensityOperator { matrix: m })
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(d: usize) -> DensityOperator {
        DensityOperator { matrix: identity(d) / c64(d as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// Operator-valued function on a finite outcome space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRandomVariable {
    space: OutcomeSpace,
    dim: usize,
    values: Vec<CMatrix>,
}

impl QuantumRandomVariable {
    pub fn new(space: OutcomeSpace, dim: usize, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::DimensionMismatch { expected: space.len(), found: values.len() });
        }
        for v in &values {
            if v.nrows() != dim || v.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.nrows().max(v.ncols()) });
            }
            if !matkit::is_finite(v) {
                return Err(Error::NonFinite);
            }
        }
        Ok(QuantumRandomVariable { space, dim, values })
    }

    pub fn constant(space: OutcomeSpace, z: &CMatrix) -> Self {
        let n = space.len();
        QuantumRandomVariable { space, dim: z.nrows(), values: vec![z.clone(); n] }
    }

    /// Scalar-valued variable `f(x_j) · I_d`.
    pub fn scalar(space: OutcomeSpace, values: &[num_complex::Complex64], dim: usize) -> Result<Self> {
        let v = values.iter().map(|&z| identity(dim) * z).collect();
        Self::new(space, dim, v)
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn value(&self, j: usize) -> &CMatrix {
        &self.values[j]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        QuantumRandomVariable { space: self.space.clone(), dim: self.dim, values: self.values.iter().map(f).collect() }
    }

    /// Pointwise combination with another variable on the same space.
    pub fn zip_with(&self, other: &Self, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect();
        Ok(QuantumRandomVariable { space: self.space.clone(), dim: self.dim, values })
    }

    /// Pointwise adjoint `ψ*`.
    pub fn adjoint(&self) -> Self {
        self.map(|v| v.adjoint())
    }

    /// Pointwise power `ψ^k`.
    pub fn pow(&self, k: usize) -> Self {
        self.map(|v| matkit::matrix_power(v, k))
    }

    /// Pointwise product `ψ φ`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Essential supremum of `||ψ(x)||` over supported outcomes of `nu`.
    pub fn ess_sup_norm(&self, nu: &Povm) -> f64 {
        nu.support().into_iter().map(|j| operator_norm(&self.values[j])).fold(0.0, f64::max)
    }
}

/// Classical measure `μ = tr ∘ ν / d`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMeasure {
    pub space: OutcomeSpace,
    pub weights: Vec<f64>,
}

pub fn induced_measure(nu: &Povm) -> InducedMeasure {
    InducedMeasure { space: nu.space.clone(), weights: nu.weights.clone() }
}

/// Principal Radon–Nikodým derivative `dν/dμ`: `h_j / μ_j` on supported
/// outcomes and zero on μ-null ones.
pub fn radon_nikodym(nu: &Povm) -> QuantumRandomVariable {
    let values = (0..nu.len())
        .map(|j| {
            if nu.is_supported(j) {
                let t = matkit::trace(nu.effect(j)).re;
                nu.effect(j) * c64(nu.dim as f64 / t, 0.0)
            } else {
                CMatrix::zeros(nu.dim, nu.dim)
            }
        })
        .collect();
    QuantumRandomVariable { space: nu.space.clone(), dim: nu.dim, values }
}

/// Outcome probabilities `p_j = tr(ρ h_j)`, clipped to `[0, 1]`.
pub fn outcome_probabilities(nu: &Povm, rho: &DensityOperator) -> Result<Vec<f64>> {
    if rho.dim() != nu.dim {
        return Err(Error::DimensionMismatch { expected: nu.dim, found: rho.dim() });
    }
    let mut p: Vec<f64> = nu.effects.iter().map(|h| matkit::trace(&(rho.matrix() * h)).re.clamp(0.0, 1.0)).collect();
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 && total > 0.0 {
        p.iter_mut().for_each(|v| *v /= total);
    }
    Ok(p)
}

/// Draws `n` i.i.d. outcome indices from the measurement statistics.
pub fn sample_indices(nu: &Povm, rho: &DensityOperator, n: usize, seed: u64) -> Result<Vec<usize>> {
    let p = outcome_probabilities(nu, rho)?;
    if n == 0 {
        return Ok(vec![]);
    }
    let dist = WeightedIndex::new(&p).map_err(|e| Error::InvalidState(format!("degenerate probabilities: {e}")))?;
    let mut rng = rng_from(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// Draws `n` outcome labels; deterministic in `seed`.
pub fn sample_outcomes(nu: &Povm, rho: &DensityOperator, n: usize, seed: u64) -> Result<Vec<String>> {
    Ok(sample_indices(nu, rho, n, seed)?.into_iter().map(|j| nu.space.label(j).to_string()).collect())
}
