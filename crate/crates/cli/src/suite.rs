//! Property sweeps over seeded random instances, one entry per module
//! invariant.
//!
//! Case `t` of sweep `s` draws from the sub-seed `(seed, s, t)`, so every
//! sweep is reproducible on its own. A case fails when its measured value
//! exceeds the sweep's limit (NaN counts as a failure).

use std::fmt;
use std::str::FromStr;

use qpmkit::dilation::{
    moments_via_semiinvariance, naimark_dilate, realize_spectrum_point, stinespring_expectation, UcpCertificate,
    SEMI_INVARIANCE_TOL,
};
use qpmkit::expectation::{cp_level_check, expect, CP_TOL};
use qpmkit::hulls::{
    cstar_combine, cstar_hull_membership, essential_range, hypoconvex_sample, kraus_extract, replay, HullOptions, HullVerdict,
    HULL_MAX_ITER,
};
use qpmkit::io;
use qpmkit::matkit::{
    abs, c64, hermitian_part, identity, invariant_hull, max_abs, min_eigenvalue, operator_norm, polar_decompose, psd_sqrt, trace,
    CMatrix, Frame, DEFAULT_TOL, FRAME_TOL,
};
use qpmkit::noise::{
    builtin_family, intrinsic_noise_upper, noise_value, random_noise, randomisation_laws_check, reproduction_error, NoiseOptions,
    REPRODUCTION_TOL,
};
use qpmkit::qpm::{induced_measure, outcome_probabilities, radon_nikodym};
use qpmkit::random::{
    commuting_projective_instance, derive_seed, ginibre, haar_unitary, labels, pinched_evaluation_instance, random_density,
    random_hermitian, random_povm, random_povm_with_null, random_psd, random_qrv, rng_from, SeededRng,
};
use qpmkit::variance::{
    default_max_k, is_variance_zero, moment_sequence, moments_multiplicative, variance_report, MomentSequence,
};
use qpmkit::{Povm, QuantumRandomVariable};
use rand::Rng;
use serde_json::{json, Value};

/// Largest dimension the suite accepts.
pub const MAX_DIM: usize = 5;
/// Largest outcome count the suite accepts.
pub const MAX_OUTCOMES: usize = 6;

const MOMENT_TOL: f64 = 1e-8;
const HULL_TOL: f64 = 1e-7;

/// Instance size bounds, written `DxN`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sizes {
    pub max_dim: usize,
    pub max_outcomes: usize,
}

impl FromStr for Sizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (d, n) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected DxN, got {s:?}"))?;
        let max_dim: usize = d.trim().parse().map_err(|_| format!("bad dimension {d:?}"))?;
        let max_outcomes: usize = n.trim().parse().map_err(|_| format!("bad outcome count {n:?}"))?;
        if !(1..=MAX_DIM).contains(&max_dim) || !(1..=MAX_OUTCOMES).contains(&max_outcomes) {
            return Err(format!("sizes must satisfy 1 <= D <= {MAX_DIM} and 1 <= N <= {MAX_OUTCOMES}"));
        }
        Ok(Sizes { max_dim, max_outcomes })
    }
}

impl fmt::Display for Sizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.max_dim, self.max_outcomes)
    }
}

/// Result of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub module: &'static str,
    pub name: &'static str,
    /// The statement being checked.
    pub statement: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest measured value over the cases.
    pub worst: f64,
    pub limit: f64,
    pub note: String,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn to_json(&self) -> Value {
        json!({
            "module": self.module,
            "name": self.name,
            "statement": self.statement,
            "passed": self.passed(),
            "cases": self.cases,
            "failures": self.failures,
            "worst": self.worst,
            "limit": self.limit,
            "note": self.note,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SuiteSummary {
    pub seed: u64,
    pub sizes: Sizes,
    pub properties: Vec<PropertyResult>,
}

impl SuiteSummary {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }

    /// `module/name` of every failed sweep.
    pub fn failed(&self) -> Vec<String> {
        self.properties.iter().filter(|p| !p.passed()).map(|p| format!("{}/{}", p.module, p.name)).collect()
    }

    pub fn get(&self, module: &str, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.module == module && p.name == name)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "seed": self.seed,
            "sizes": self.sizes.to_string(),
            "passed": self.passed(),
            "properties": self.properties.iter().map(PropertyResult::to_json).collect::<Vec<_>>(),
        })
    }
}

struct Tally {
    module: &'static str,
    name: &'static str,
    statement: &'static str,
    limit: f64,
    cases: usize,
    failures: usize,
    worst: f64,
    note: String,
}

impl Tally {
    fn new(module: &'static str, name: &'static str, statement: &'static str, limit: f64) -> Self {
        Tally { module, name, statement, limit, cases: 0, failures: 0, worst: f64::NEG_INFINITY, note: String::new() }
    }

    fn record(&mut self, value: f64) {
        self.cases += 1;
        if value.is_nan() || value > self.limit {
            self.failures += 1;
        }
        self.worst = if value.is_nan() { f64::NAN } else { self.worst.max(value) };
    }

    /// Records a case that could not be evaluated.
    fn error(&mut self, e: impl fmt::Display) {
        self.cases += 1;
        self.failures += 1;
        if self.note.is_empty() {
            self.note = format!("error: {e}");
        }
    }

    fn flag(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 });
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            module: self.module,
            name: self.name,
            statement: self.statement,
            cases: self.cases,
            failures: self.failures,
            worst: if self.cases == 0 { 0.0 } else { self.worst },
            limit: self.limit,
            note: self.note,
        }
    }
}

struct Ctx<'a> {
    seed: u64,
    sizes: Sizes,
    fixtures: &'a [(String, Value)],
    tol: f64,
}

impl Ctx<'_> {
    fn rng(&self, stream: u64, case: usize) -> SeededRng {
        rng_from(derive_seed(self.seed, stream, case as u64))
    }

    fn dim(&self, rng: &mut SeededRng) -> usize {
        rng.random_range(1..=self.sizes.max_dim)
    }

    fn outcomes(&self, rng: &mut SeededRng) -> usize {
        rng.random_range(1..=self.sizes.max_outcomes)
    }

    /// Random measure (sometimes with a null outcome) and random variable.
    fn instance(&self, rng: &mut SeededRng, scale: f64) -> (Povm, QuantumRandomVariable) {
        let d = self.dim(rng);
        let n = self.outcomes(rng);
        let nu = if n >= 2 && rng.random_bool(0.25) {
            let null_at = rng.random_range(0..n);
            random_povm_with_null(rng, n, d, null_at)
        } else {
            random_povm(rng, n, d)
        };
        let psi = random_qrv(rng, nu.space(), d, scale);
        (nu, psi)
    }

    /// Generic instances, commuting projective instances (semi-invariant by
    /// construction) and fair coins with distinct values (never semi-invariant),
    /// rescaled by [`unit_bounded`].
    fn moment_instance(&self, rng: &mut SeededRng, t: usize) -> (Povm, QuantumRandomVariable) {
        let (nu, psi) = self.raw_moment_instance(rng, t);
        (nu, unit_bounded(psi))
    }

    fn raw_moment_instance(&self, rng: &mut SeededRng, t: usize) -> (Povm, QuantumRandomVariable) {
        let d = self.dim(rng);
        match t % 5 {
            0 | 1 => {
                let n = self.outcomes(rng);
                let nu = random_povm(rng, n, d);
                let psi = random_qrv(rng, nu.space(), d, 0.6);
                (nu, psi)
            }
            2 | 3 => {
                let n = rng.random_range(1..=d.min(self.sizes.max_outcomes));
                commuting_projective_instance(rng, n, d, 0.6)
            }
            _ => {
                let space = labels(2);
                let nu = Povm::classical(space.clone(), &[0.5, 0.5], d, DEFAULT_TOL).expect("fair coin");
                let a: f64 = rng.random_range(-1.0..1.0);
                let b = a + rng.random_range(0.2..1.0);
                let psi = QuantumRandomVariable::scalar(space, &[c64(a, 0.0), c64(b, 0.0)], d).expect("scalar values");
                (nu, psi)
            }
        }
    }

    /// Small sizes for the optimizer sweeps.
    fn noise_instance(&self, rng: &mut SeededRng) -> Povm {
        let d = rng.random_range(1..=self.sizes.max_dim.min(2));
        let n = rng.random_range(1..=self.sizes.max_outcomes.min(3));
        random_povm(rng, n, d)
    }
}

/// Divides `ψ` by `max(1, max_j ||ψ(x_j)||)`. Powers up to `2d²` of larger
/// values carry rounding error of order `eps·||ψ||^k`, far above the moment
/// tolerance once `d > 3`.
fn unit_bounded(psi: QuantumRandomVariable) -> QuantumRandomVariable {
    let norm = psi.values().iter().map(operator_norm).fold(1.0, f64::max);
    psi.map(|v| v / c64(norm, 0.0))
}

fn supported_norm(nu: &Povm, psi: &QuantumRandomVariable) -> f64 {
    psi.ess_sup_norm(nu)
}

// matkit

fn tracial_abs_trace(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("matkit", "tracial_abs_trace", "|tr y| <= tr|y|", 1e-10);
    for c in 0..1000 {
        let mut rng = ctx.rng(101, c);
        let d = ctx.dim(&mut rng);
        let y = ginibre(&mut rng, d, d);
        t.record(trace(&y).norm() - trace(&abs(&y)).re);
    }
    t.finish()
}

fn tracial_product(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("matkit", "tracial_product", "tr|yz*| <= (tr|y|^2 + tr|z|^2)/2", 1e-10);
    for c in 0..1000 {
        let mut rng = ctx.rng(102, c);
        let d = ctx.dim(&mut rng);
        let y = ginibre(&mut rng, d, d);
        let z = ginibre(&mut rng, d, d);
        t.record(trace(&abs(&(&y * z.adjoint()))).re - 0.5 * y.norm_squared() - 0.5 * z.norm_squared());
    }
    t.finish()
}

fn sqrt_idempotence(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("matkit", "sqrt_idempotence", "psd_sqrt(r^2) = r for PSD r", 1e-8);
    for c in 0..200 {
        let mut rng = ctx.rng(103, c);
        let d = ctx.dim(&mut rng);
        let rank = rng.random_range(1..=d);
        let r = random_psd(&mut rng, d, rank);
        match psd_sqrt(&(&r * &r), ctx.tol) {
            Ok(s) => t.record(operator_norm(&(s - &r)) / operator_norm(&r).max(1.0)),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn polar_factors(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("matkit", "polar_factors", "u*u = I and p >= 0", 1e-10);
    for c in 0..1000 {
        let mut rng = ctx.rng(104, c);
        let d = ctx.dim(&mut rng);
        let rank = rng.random_range(1..=d);
        let a = ginibre(&mut rng, d, rank) * ginibre(&mut rng, rank, d);
        match polar_decompose(&a) {
            Ok(p) => {
                let unitarity = operator_norm(&(p.unitary.adjoint() * &p.unitary - identity(d)));
                t.record(unitarity.max(-min_eigenvalue(&p.positive)));
            }
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn invariant_hull_invariance(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("matkit", "invariant_hull_invariance", "||(I - P) z P|| small for the hull projection P", 1e-8);
    let max_n = ctx.sizes.max_dim * ctx.sizes.max_outcomes;
    for c in 0..200 {
        let mut rng = ctx.rng(105, c);
        let n = rng.random_range(1..=max_n);
        let u = haar_unitary(&mut rng, n);
        // Block upper triangular in the basis `u` when `k < n`, so proper invariant subspaces exist.
        let k = rng.random_range(1..=n);
        let mut core = ginibre(&mut rng, n, n);
        for i in k..n {
            for j in 0..k {
                core[(i, j)] = c64(0.0, 0.0);
            }
        }
        let z = &u * core * u.adjoint();
        let j = rng.random_range(1..=k);
        let seed_vectors = u.columns(0, k).into_owned() * ginibre(&mut rng, k, j);
        let m = Frame::span(&seed_vectors, FRAME_TOL);
        match invariant_hull(&z, &m, FRAME_TOL) {
            Ok(h) => {
                let p = h.projector();
                t.record(operator_norm(&((identity(n) - &p) * &z * &p)));
            }
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

// qpm

fn radon_nikodym_psd(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("qpm", "radon_nikodym_psd", "dnu/dmu is positive on supported outcomes", DEFAULT_TOL);
    for c in 0..200 {
        let mut rng = ctx.rng(201, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        let rn = radon_nikodym(&nu);
        let worst =
            nu.support().iter().map(|&j| -min_eigenvalue(rn.value(j)) / operator_norm(rn.value(j)).max(1.0)).fold(0.0, f64::max);
        t.record(worst);
    }
    t.finish()
}

fn radon_nikodym_reconstruction(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("qpm", "radon_nikodym_reconstruction", "(dnu/dmu)(x_j) mu_j = h_j", 1e-12);
    for c in 0..200 {
        let mut rng = ctx.rng(202, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        let rn = radon_nikodym(&nu);
        let mu = induced_measure(&nu);
        let worst = nu
            .support()
            .iter()
            .map(|&j| operator_norm(&(rn.value(j) * c64(mu.weights[j], 0.0) - nu.effect(j))))
            .fold(0.0, f64::max);
        t.record(worst);
    }
    t.finish()
}

fn probability_sum(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("qpm", "probability_sum", "sum_j tr(rho h_j) = 1", 1e-10);
    for c in 0..200 {
        let mut rng = ctx.rng(203, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        let rho = random_density(&mut rng, nu.dim());
        match outcome_probabilities(&nu, &rho) {
            Ok(p) => t.record((p.iter().sum::<f64>() - 1.0).abs()),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn absolute_continuity(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("qpm", "absolute_continuity", "mu_j = 0 iff h_j = 0", 0.0);
    for c in 0..200 {
        let mut rng = ctx.rng(204, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        let mu = induced_measure(&nu);
        let ok = (0..nu.len()).all(|j| (mu.weights[j] == 0.0) == (max_abs(nu.effect(j)) == 0.0));
        t.flag(ok);
    }
    t.finish()
}

fn validation(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("qpm", "validation", "POVM documents validate", 0.0);
    for c in 0..100 {
        let mut rng = ctx.rng(205, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        let text = io::povm_to_json(&nu).to_string();
        let ok = io::parse_document(&text).and_then(|v| io::povm_from_json(&v, "", ctx.tol)).is_ok();
        t.flag(ok);
    }
    for (name, doc) in ctx.fixtures {
        match io::povm_from_json(doc, "", ctx.tol) {
            Ok(_) => t.flag(true),
            Err(e) => t.error(format!("{name}: {e}")),
        }
    }
    t.note = format!(
        "{} generated, {} fixtures{}",
        100,
        ctx.fixtures.len(),
        if t.note.is_empty() { String::new() } else { format!("; {}", t.note) }
    );
    t.finish()
}

// expectation

fn unitality(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("expectation", "unitality", "E[I] = I", 1e-12);
    for c in 0..200 {
        let mut rng = ctx.rng(301, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        let one = QuantumRandomVariable::constant(nu.space().clone(), &identity(nu.dim()));
        match expect(&nu, &one) {
            Ok(e) => t.record(operator_norm(&(e - identity(nu.dim())))),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn linearity(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("expectation", "linearity", "E[a psi + phi] = a E[psi] + E[phi]", 1e-10);
    for c in 0..200 {
        let mut rng = ctx.rng(302, c);
        let (nu, psi) = ctx.instance(&mut rng, 1.0);
        let phi = random_qrv(&mut rng, nu.space(), nu.dim(), 1.0);
        let a = c64(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo = psi.zip_with(&phi, |x, y| x * a + y).expect("same space");
        let lhs = expect(&nu, &combo).expect("compatible");
        let rhs = expect(&nu, &psi).expect("compatible") * a + expect(&nu, &phi).expect("compatible");
        t.record(operator_norm(&(lhs - rhs)));
    }
    t.finish()
}

fn contractivity(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("expectation", "contractivity", "||E[psi]|| <= ess-sup ||psi||", 1e-9);
    for c in 0..200 {
        let mut rng = ctx.rng(303, c);
        let (nu, psi) = ctx.instance(&mut rng, 1.0);
        let e = expect(&nu, &psi).expect("compatible");
        t.record(operator_norm(&e) - supported_norm(&nu, &psi));
    }
    t.finish()
}

fn hull_containment(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("expectation", "hull_containment", "E[psi] in C*conv{psi(x_j) : mu_j > 0}", 0.0);
    let opts = HullOptions { max_iter: HULL_MAX_ITER, tol: HULL_TOL };
    for c in 0..50 {
        let mut rng = ctx.rng(304, c);
        let (nu, psi) = ctx.instance(&mut rng, 1.0);
        let atoms: Vec<CMatrix> = nu.support().iter().map(|&j| psi.value(j).clone()).collect();
        let b = expect(&nu, &psi).expect("compatible");
        match cstar_hull_membership(&b, &atoms, opts) {
            Ok(v) => t.flag(v.is_member()),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn star_preservation(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("expectation", "star_preservation", "E[psi*] = E[psi]*", 1e-12);
    for c in 0..200 {
        let mut rng = ctx.rng(305, c);
        let (nu, psi) = ctx.instance(&mut rng, 1.0);
        let lhs = expect(&nu, &psi.adjoint()).expect("compatible");
        let rhs = expect(&nu, &psi).expect("compatible").adjoint();
        t.record(operator_norm(&(lhs - rhs)));
    }
    t.finish()
}

fn complete_positivity(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("expectation", "complete_positivity", "E tensor id_n is positive, n = 1, 2, 3", CP_TOL);
    for c in 0..10 {
        let mut rng = ctx.rng(306, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        for level in 1..=3 {
            match cp_level_check(&nu, level, 20, derive_seed(ctx.seed, 306, (100 * c + level) as u64)) {
                Ok(r) => t.record(-r.worst_eigenvalue),
                Err(e) => t.error(e),
            }
        }
    }
    t.finish()
}

// variance

fn schwarz_positivity(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("variance", "schwarz_positivity", "left, right and symmetric variance are PSD", 1e-9);
    for c in 0..500 {
        let mut rng = ctx.rng(401, c);
        let (nu, psi) = ctx.instance(&mut rng, 1.0);
        let n = supported_norm(&nu, &psi);
        let r = variance_report(&nu, &psi).expect("compatible");
        let worst = r.min_eigs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        t.record(-worst / (1.0 + n * n));
    }
    t.finish()
}

fn hermitian_symmetry(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("variance", "hermitian_symmetry", "hermitian psi has left variance = right variance", 1e-12);
    for c in 0..200 {
        let mut rng = ctx.rng(402, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        let values = (0..nu.len()).map(|_| random_hermitian(&mut rng, nu.dim())).collect();
        let psi = QuantumRandomVariable::new(nu.space().clone(), nu.dim(), values).expect("shapes");
        let n = supported_norm(&nu, &psi);
        let r = variance_report(&nu, &psi).expect("compatible");
        t.record(max_abs(&(&r.left - &r.right)) / (1.0 + n * n));
    }
    t.finish()
}

fn scalar_reduction(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("variance", "scalar_reduction", "d = 1: all three variances equal the classical variance", 1e-12);
    for c in 0..200 {
        let mut rng = ctx.rng(403, c);
        let n = ctx.outcomes(&mut rng);
        let nu = random_povm(&mut rng, n, 1);
        let psi = random_qrv(&mut rng, nu.space(), 1, 1.0);
        let mu = induced_measure(&nu);
        let mean: num_complex::Complex64 = (0..n).map(|j| psi.value(j)[(0, 0)] * mu.weights[j]).sum();
        let classical: f64 = (0..n).map(|j| mu.weights[j] * (psi.value(j)[(0, 0)] - mean).norm_sqr()).sum();
        let r = variance_report(&nu, &psi).expect("compatible");
        let scale = 1.0 + supported_norm(&nu, &psi).powi(2);
        let worst =
            [&r.left, &r.right, &r.symmetric].iter().map(|m| (m[(0, 0)] - c64(classical, 0.0)).norm()).fold(0.0, f64::max);
        t.record(worst / scale);
    }
    t.finish()
}

fn zero_implies_multiplicative(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("variance", "zero_implies_multiplicative", "Var = 0 implies multiplicative moments for every K", 0.0);
    let mut zeros = 0;
    for c in 0..200 {
        let mut rng = ctx.rng(404, c);
        let (nu, psi) = ctx.moment_instance(&mut rng, c);
        let z = is_variance_zero(&nu, &psi, None).expect("compatible");
        if !z.flag {
            t.flag(true);
            continue;
        }
        zeros += 1;
        let top = default_max_k(nu.dim()) + 2;
        let g = moment_sequence(&nu, &psi, top).expect("compatible");
        let ok = (1..=top).all(|k| moments_multiplicative(&MomentSequence { values: g.values[..=k].to_vec() }, MOMENT_TOL));
        t.flag(ok);
    }
    t.note = format!("{zeros} variance-zero instances");
    t.finish()
}

fn variance_zero_vs_semiinvariance(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("variance", "variance_zero_vs_semiinvariance", "Var = 0 iff the dilated psi is semi-invariant", 0.0);
    let mut zeros = 0;
    for c in 0..500 {
        let mut rng = ctx.rng(405, c);
        let (nu, psi) = ctx.moment_instance(&mut rng, c);
        let z = is_variance_zero(&nu, &psi, None).expect("compatible").flag;
        match moments_via_semiinvariance(&nu, &psi, SEMI_INVARIANCE_TOL) {
            Ok(s) => t.flag(s.flag == z),
            Err(e) => t.error(e),
        }
        zeros += usize::from(z);
    }
    t.note = format!("{zeros} variance-zero instances");
    t.finish()
}

// dilation

fn dilation_identity(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("dilation", "dilation_identity", "V*P_jV = h_j and V*Delta(psi)V = E[psi]", 1e-9);
    for c in 0..200 {
        let mut rng = ctx.rng(501, c);
        let (nu, psi) = ctx.instance(&mut rng, 1.0);
        let n = naimark_dilate(&nu);
        let naimark = n
            .support
            .iter()
            .enumerate()
            .map(|(b, &j)| operator_norm(&(n.compressed_projection(b) - nu.effect(j))))
            .fold(0.0, f64::max);
        let s = stinespring_expectation(&nu);
        let stine = operator_norm(&(s.compress(&psi).expect("compatible") - expect(&nu, &psi).expect("compatible")));
        t.record(naimark.max(stine));
    }
    t.finish()
}

fn projectivity(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("dilation", "projectivity", "P_jP_k = delta_jk P_j and sum_j P_j = I", 0.0);
    for c in 0..200 {
        let mut rng = ctx.rng(502, c);
        let (nu, _) = ctx.instance(&mut rng, 1.0);
        let n = naimark_dilate(&nu);
        let mut worst: f64 = 0.0;
        let mut sum = CMatrix::zeros(n.big_dim, n.big_dim);
        for (a, p) in n.projections.iter().enumerate() {
            sum += p;
            for (b, q) in n.projections.iter().enumerate() {
                let target = if a == b { p.clone() } else { CMatrix::zeros(n.big_dim, n.big_dim) };
                worst = worst.max(max_abs(&(p * q - target)));
            }
        }
        t.record(worst.max(max_abs(&(sum - identity(n.big_dim)))));
    }
    t.finish()
}

fn semiinvariance_vs_moments(ctx: &Ctx) -> PropertyResult {
    let mut t =
        Tally::new("dilation", "semiinvariance_vs_moments", "semi-invariance iff multiplicative moments up to 2 big_dim", 0.0);
    let mut positives = 0;
    for c in 0..500 {
        let mut rng = ctx.rng(503, c);
        let (nu, psi) = ctx.moment_instance(&mut rng, c);
        let k = 2 * stinespring_expectation(&nu).big_dim;
        let direct = moments_multiplicative(&moment_sequence(&nu, &psi, k).expect("compatible"), MOMENT_TOL);
        match moments_via_semiinvariance(&nu, &psi, SEMI_INVARIANCE_TOL) {
            Ok(s) => {
                positives += usize::from(s.flag);
                t.flag(s.flag == direct);
            }
            Err(e) => t.error(e),
        }
    }
    t.note = format!("{positives} semi-invariant instances");
    t.finish()
}

fn realization_cases(ctx: &Ctx) -> (PropertyResult, PropertyResult) {
    let mut moments = Tally::new("dilation", "realization_moments", "lambda^k = E[w* psi^k w] for k <= K", 1e-8);
    let mut unitary = Tally::new("dilation", "realization_unitary", "realized w values are unitary", 1e-10);
    for c in 0..100 {
        let mut rng = ctx.rng(504, c);
        let d = ctx.dim(&mut rng);
        let n = rng.random_range(1..=ctx.sizes.max_outcomes);
        let space = labels(n);
        let (psi, theta) = match c % 3 {
            0 | 1 => {
                let psi = random_qrv(&mut rng, &space, d, 0.8);
                let x0 = rng.random_range(0..n);
                let u = if c % 3 == 0 { identity(d) } else { haar_unitary(&mut rng, d) };
                (psi, UcpCertificate::conjugated_evaluation(space, x0, u))
            }
            _ => {
                let parts = rng.random_range(1..=n.min(d));
                pinched_evaluation_instance(&mut rng, n, d, parts, c % 2 == 0, 0.8)
            }
        };
        let psi = unit_bounded(psi);
        match realize_spectrum_point(&psi, &theta, default_max_k(d), MOMENT_TOL) {
            Ok(r) => {
                moments.record(r.max_moment_error);
                let worst =
                    r.unitary.values().iter().map(|w| operator_norm(&(w.adjoint() * w - identity(d)))).fold(0.0, f64::max);
                unitary.record(worst);
            }
            Err(e) => {
                moments.error(&e);
                unitary.error(e);
            }
        }
    }
    (moments.finish(), unitary.finish())
}

// hulls

fn combine_norm_bound(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("hulls", "combine_norm_bound", "||sum t* a t|| <= max ||a_j|| for normalized t", 1e-9);
    for c in 0..200 {
        let mut rng = ctx.rng(601, c);
        let d = ctx.dim(&mut rng);
        let m = ctx.outcomes(&mut rng);
        let w = haar_unitary(&mut rng, m * d);
        let ts: Vec<CMatrix> = (0..m).map(|j| w.view((j * d, 0), (d, d)).into_owned()).collect();
        let atoms: Vec<CMatrix> = (0..m).map(|_| ginibre(&mut rng, d, d)).collect();
        match cstar_combine(&ts, &atoms) {
            Ok(b) => t.record(operator_norm(&b) - atoms.iter().map(operator_norm).fold(0.0, f64::max)),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn expectation_membership(ctx: &Ctx) -> (PropertyResult, PropertyResult) {
    let mut member = Tally::new("hulls", "expectation_membership", "E[psi] in C*conv(ess-ran psi)", 0.0);
    let mut round_trip =
        Tally::new("hulls", "kraus_round_trip", "combine(kraus_extract(certificate)) = b within 10 tol", 10.0 * HULL_TOL);
    let opts = HullOptions { max_iter: HULL_MAX_ITER, tol: HULL_TOL };
    for c in 0..200 {
        let mut rng = ctx.rng(602, c);
        let (nu, psi) = ctx.instance(&mut rng, 1.0);
        let b = expect(&nu, &psi).expect("compatible");
        let atoms = essential_range(&nu, &psi, DEFAULT_TOL).expect("compatible").elements;
        match cstar_hull_membership(&b, &atoms, opts) {
            Ok(HullVerdict::Member { certificate, .. }) => {
                member.flag(true);
                match kraus_extract(&certificate).and_then(|k| k.combine()) {
                    Ok(r) => round_trip.record(operator_norm(&(r - &b))),
                    Err(e) => round_trip.error(e),
                }
            }
            Ok(_) => member.flag(false),
            Err(e) => member.error(e),
        }
    }
    (member.finish(), round_trip.finish())
}

fn hypoconvex_replay(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("hulls", "hypoconvex_replay", "replaying the move log reproduces the sample", 0.0);
    for c in 0..100 {
        let mut rng = ctx.rng(603, c);
        let d = ctx.dim(&mut rng);
        let m = ctx.outcomes(&mut rng);
        let elements: Vec<CMatrix> = (0..m).map(|_| hermitian_part(&ginibre(&mut rng, d, d))).collect();
        let moves = rng.random_range(1..=8);
        let seed = derive_seed(ctx.seed, 603, 1_000 + c as u64);
        match hypoconvex_sample(&elements, moves, seed).and_then(|s| Ok((replay(&elements, &s.log)?, s.value))) {
            Ok((again, value)) => t.record(max_abs(&(again - value))),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

// noise

fn noise_options(ctx: &Ctx, c: usize, restarts: usize) -> NoiseOptions {
    NoiseOptions { restarts, max_iter: 100, step: 0.1, seed: derive_seed(ctx.seed, 700, c as u64) }
}

fn fundamental_inequality(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("noise", "fundamental_inequality", "0 <= N_in <= N <= 1", 1e-6);
    for c in 0..25 {
        let mut rng = ctx.rng(701, c);
        let nu = ctx.noise_instance(&mut rng);
        let opts = noise_options(ctx, c, 2);
        let n = random_noise(&nu, &opts);
        let upper = builtin_family(&nu).and_then(|f| intrinsic_noise_upper(&nu, &f, &opts));
        match (n, upper) {
            (Ok(n), Ok(up)) => t.record((-up.value).max(up.value - n.value).max(n.value - 1.0)),
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t.finish()
}

fn monotone_restarts(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("noise", "monotone_restarts", "noise value is non-decreasing in restarts", 0.0);
    for c in 0..10 {
        let mut rng = ctx.rng(702, c);
        let nu = ctx.noise_instance(&mut rng);
        let values: Result<Vec<f64>, _> =
            [0, 1, 2, 4].iter().map(|&r| random_noise(&nu, &noise_options(ctx, c, r)).map(|e| e.value)).collect();
        match values {
            Ok(v) => t.record(v.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max)),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn certified_lower_bound(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("noise", "certified_lower_bound", "||Var(argmax psi)|| reproduces the reported value", 1e-9);
    for c in 0..25 {
        let mut rng = ctx.rng(703, c);
        let nu = ctx.noise_instance(&mut rng);
        match random_noise(&nu, &noise_options(ctx, c, 2)).and_then(|e| Ok((noise_value(&nu, &e.argmax_psi)?, e.value))) {
            Ok((again, value)) => t.record((again - value).abs()),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn variance_contraction(ctx: &Ctx) -> PropertyResult {
    let mut t = Tally::new("noise", "variance_contraction", "Var_nu(psi) >= Var_nu'(Gamma psi) on accepted kernel pairs", 1e-8);
    let mut pairs = 0;
    for c in 0..10 {
        let mut rng = ctx.rng(704, c);
        let nu = ctx.noise_instance(&mut rng);
        let family = match builtin_family(&nu) {
            Ok(f) => f,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        for pair in family.iter().filter(|p| reproduction_error(&nu, p).is_ok_and(|r| r <= REPRODUCTION_TOL)) {
            pairs += 1;
            for _ in 0..50 {
                let psi = random_qrv(&mut rng, nu.space(), nu.dim(), 1.0);
                match randomisation_laws_check(&pair.kernel, &pair.measure, &psi, DEFAULT_TOL) {
                    Ok(r) => t.record(-r.contraction_min_eig),
                    Err(e) => t.error(e),
                }
            }
        }
    }
    t.note = format!("{pairs} kernel pairs, 50 random psi each");
    t.finish()
}

// cli

fn coverage(_: &Ctx) -> PropertyResult {
    let mut t = Tally::new("cli", "coverage", "every module operation maps to exactly one subcommand", 0.0);
    match crate::coverage::check() {
        Ok(()) => t.flag(true),
        Err(e) => t.error(e),
    }
    t.finish()
}

/// Runs every sweep. `fixtures` are extra POVM documents for the validation sweep.
pub fn run_suite(seed: u64, sizes: Sizes, fixtures: &[(String, Value)], tol: f64) -> SuiteSummary {
    let ctx = Ctx { seed, sizes, fixtures, tol };
    let singles: [fn(&Ctx) -> PropertyResult; 26] = [
        tracial_abs_trace,
        tracial_product,
        sqrt_idempotence,
        polar_factors,
        invariant_hull_invariance,
        radon_nikodym_psd,
        radon_nikodym_reconstruction,
        probability_sum,
        absolute_continuity,
        validation,
        unitality,
        linearity,
        contractivity,
        hull_containment,
        star_preservation,
        complete_positivity,
        schwarz_positivity,
        hermitian_symmetry,
        scalar_reduction,
        zero_implies_multiplicative,
        variance_zero_vs_semiinvariance,
        dilation_identity,
        projectivity,
        semiinvariance_vs_moments,
        combine_norm_bound,
        hypoconvex_replay,
    ];
    let mut properties = Vec::with_capacity(34);
    for f in singles {
        let r = f(&ctx);
        log::info!("{}/{}: {} failures of {}", r.module, r.name, r.failures, r.cases);
        properties.push(r);
    }
    let (a, b) = realization_cases(&ctx);
    properties.extend([a, b]);
    let (a, b) = expectation_membership(&ctx);
    properties.extend([a, b]);
    for f in [fundamental_inequality, monotone_restarts, certified_lower_bound, variance_contraction, coverage] {
        properties.push(f(&ctx));
    }
    properties.sort_by_key(|p| module_rank(p.module));
    SuiteSummary { seed, sizes, properties }
}

fn module_rank(module: &str) -> usize {
    ["matkit", "qpm", "expectation", "variance", "dilation", "hulls", "noise", "cli"]
        .iter()
        .position(|m| *m == module)
        .unwrap_or(usize::MAX)
}
