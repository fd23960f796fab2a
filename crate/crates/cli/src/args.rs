//! Command-line grammar.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use qpmkit::dilation::SEMI_INVARIANCE_TOL;
use qpmkit::hulls::HULL_MAX_ITER;

use crate::suite::Sizes;

#[derive(Debug, Parser)]
#[command(name = "qpmkit", version, about = "Quantum probability measures on finite outcome spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a POVM; report its induced measure and Radon–Nikodým derivative.
    Validate { povm: PathBuf },

    /// Outcome probabilities in a state and seeded samples.
    Sample {
        povm: PathBuf,
        /// Density operator document (default: maximally mixed).
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Quantum expectation, with density checks for each `--state`.
    Expect {
        povm: PathBuf,
        psi: PathBuf,
        #[arg(long = "state")]
        states: Vec<PathBuf>,
    },

    /// Schwarz gap `E[ψ*ψ] − E[ψ]*E[ψ]`.
    Schwarz { povm: PathBuf, psi: PathBuf },

    /// Positivity of the expectation amplified to `n×n` blocks.
    Cpcheck {
        povm: PathBuf,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Left, right and symmetric operator variance.
    Variance { povm: PathBuf, psi: PathBuf },

    /// Decide whether the variance vanishes.
    Varzero {
        povm: PathBuf,
        psi: PathBuf,
        /// Gap tolerance (default `1e-8·(1 + ||ψ||²)`).
        #[arg(long)]
        tol: Option<f64>,
    },

    /// Moment sequence `E[ψ^k]` and its multiplicativity.
    Moments {
        povm: PathBuf,
        psi: PathBuf,
        /// Horizon K (default `2d²`).
        #[arg(long)]
        max_k: Option<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },

    /// Semi-invariance, either of the dilated `ψ` or of a frame under an operator.
    Semiinv {
        povm: Option<PathBuf>,
        psi: Option<PathBuf>,
        /// Operator matrix document (with `--frame`, instead of POVM and ψ).
        #[arg(long, requires = "frame", conflicts_with_all = ["povm", "psi"])]
        operator: Option<PathBuf>,
        #[arg(long, requires = "operator")]
        frame: Option<PathBuf>,
        #[arg(long, default_value_t = SEMI_INVARIANCE_TOL)]
        tol: f64,
    },

    /// Naimark or Stinespring dilation.
    Dilate {
        #[command(subcommand)]
        kind: DilateKind,
    },

    /// Realize a spectrum point from a UCP certificate.
    Realize {
        psi: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        /// Moment horizon (default `2d²`).
        #[arg(long)]
        max_k: Option<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },

    /// Essential range of a random variable, as an atoms document.
    Essrange {
        povm: PathBuf,
        psi: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        dedup_tol: f64,
    },

    /// Certify `b ∈ C*conv(atoms)` and extract Kraus coefficients.
    HullMember {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        atoms: PathBuf,
        #[arg(long, default_value_t = HULL_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },

    /// Evaluate `Σ t_j* a_j t_j`.
    Combine {
        #[arg(long)]
        coefficients: PathBuf,
        #[arg(long)]
        atoms: PathBuf,
    },

    /// Random chain of unitary conjugations and commuting pinchings.
    HypoSample {
        #[arg(long)]
        elements: PathBuf,
        #[arg(long, default_value_t = 8)]
        moves: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Lower bound on the random quantum noise by projected gradient ascent.
    Noise {
        povm: PathBuf,
        #[command(flatten)]
        opts: NoiseArgs,
    },

    /// Randomise a measure through a kernel; with `--psi`, push ψ through and check the laws.
    Smear {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },

    /// Upper bound on the intrinsic noise over a kernel family.
    NoiseIntrinsic {
        povm: PathBuf,
        /// Kernel family document (default: the built-in family).
        #[arg(long)]
        family: Option<PathBuf>,
        #[command(flatten)]
        opts: NoiseArgs,
    },

    /// Matrix kernels: square root, polar form, norm, invariant hull.
    Linalg {
        #[command(subcommand)]
        op: LinalgOp,
    },

    /// Run every property sweep.
    Suite {
        #[arg(long, default_value_t = 20_260_101)]
        seed: u64,
        /// Largest dimension and outcome count, as `DxN` (D ≤ 5, N ≤ 6).
        #[arg(long, default_value = "3x4")]
        sizes: Sizes,
        /// Extra POVM documents for the validation property.
        #[arg(long = "fixture")]
        fixtures: Vec<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DilateKind {
    /// Projection-valued dilation `V*P_jV = h_j`.
    Naimark { povm: PathBuf },
    /// Minimal Stinespring dilation of the expectation; compresses `--psi` if given.
    Stinespring {
        povm: PathBuf,
        #[arg(long)]
        psi: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LinalgOp {
    /// Square root of a hermitian PSD matrix.
    Sqrt { matrix: PathBuf },
    /// `a = u p` with `u` unitary and `p` PSD.
    Polar { matrix: PathBuf },
    /// Operator norm.
    Norm { matrix: PathBuf },
    /// Smallest `z`-invariant subspace containing a frame.
    Hull {
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        frame: PathBuf,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct NoiseArgs {
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long)]
    pub seed: u64,
}

impl Command {
    /// Subcommand path as typed, e.g. `dilate naimark`.
    pub fn name(&self) -> String {
        match self {
            Command::Validate { .. } => "validate".into(),
            Command::Sample { .. } => "sample".into(),
            Command::Expect { .. } => "expect".into(),
            Command::Schwarz { .. } => "schwarz".into(),
            Command::Cpcheck { .. } => "cpcheck".into(),
            Command::Variance { .. } => "variance".into(),
            Command::Varzero { .. } => "varzero".into(),
            Command::Moments { .. } => "moments".into(),
            Command::Semiinv { .. } => "semiinv".into(),
            Command::Dilate { kind: DilateKind::Naimark { .. } } => "dilate naimark".into(),
            Command::Dilate { kind: DilateKind::Stinespring { .. } } => "dilate stinespring".into(),
            Command::Realize { .. } => "realize".into(),
            Command::Essrange { .. } => "essrange".into(),
            Command::HullMember { .. } => "hull-member".into(),
            Command::Combine { .. } => "combine".into(),
            Command::HypoSample { .. } => "hypo-sample".into(),
            Command::Noise { .. } => "noise".into(),
            Command::Smear { .. } => "smear".into(),
            Command::NoiseIntrinsic { .. } => "noise-intrinsic".into(),
            Command::Linalg { op } => match op {
                LinalgOp::Sqrt { .. } => "linalg sqrt".into(),
                LinalgOp::Polar { .. } => "linalg polar".into(),
                LinalgOp::Norm { .. } => "linalg norm".into(),
                LinalgOp::Hull { .. } => "linalg hull".into(),
            },
            Command::Suite { .. } => "suite".into(),
        }
    }
}
