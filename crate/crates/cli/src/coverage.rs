//! Which subcommand exposes each module operation.

use clap::CommandFactory;

use crate::args::Cli;

/// `(module, operation, subcommand path)`.
pub const COVERAGE: &[(&str, &str, &str)] = &[
    ("matkit", "psd_sqrt", "linalg sqrt"),
    ("matkit", "polar_decompose", "linalg polar"),
    ("matkit", "operator_norm", "linalg norm"),
    ("matkit", "invariant_hull", "linalg hull"),
    ("qpm", "validate_povm", "validate"),
    ("qpm", "induced_measure", "validate"),
    ("qpm", "radon_nikodym", "validate"),
    ("qpm", "outcome_probabilities", "sample"),
    ("qpm", "sample_outcomes", "sample"),
    ("expectation", "expect", "expect"),
    ("expectation", "expect_density_check", "expect"),
    ("expectation", "schwarz_gap", "schwarz"),
    ("expectation", "cp_level_check", "cpcheck"),
    ("variance", "left_var", "variance"),
    ("variance", "right_var", "variance"),
    ("variance", "var", "variance"),
    ("variance", "is_variance_zero", "varzero"),
    ("variance", "moment_sequence", "moments"),
    ("variance", "moments_multiplicative", "moments"),
    ("dilation", "naimark_dilate", "dilate naimark"),
    ("dilation", "stinespring_expectation", "dilate stinespring"),
    ("dilation", "is_semi_invariant", "semiinv"),
    ("dilation", "moments_via_semiinvariance", "semiinv"),
    ("dilation", "realize_spectrum_point", "realize"),
    ("hulls", "essential_range", "essrange"),
    ("hulls", "cstar_combine", "combine"),
    ("hulls", "cstar_hull_membership", "hull-member"),
    ("hulls", "kraus_extract", "hull-member"),
    ("hulls", "hypoconvex_sample", "hypo-sample"),
    ("noise", "randomise_measure", "smear"),
    ("noise", "gamma_apply", "smear"),
    ("noise", "randomisation_laws_check", "smear"),
    ("noise", "random_noise", "noise"),
    ("noise", "intrinsic_noise_upper", "noise-intrinsic"),
    ("cli", "suite", "suite"),
];

/// Every leaf subcommand path of the grammar, e.g. `dilate naimark`.
pub fn subcommand_paths() -> Vec<String> {
    fn walk(cmd: &clap::Command, prefix: &str, out: &mut Vec<String>) {
        for sub in cmd.get_subcommands() {
            let path = if prefix.is_empty() { sub.get_name().to_string() } else { format!("{prefix} {}", sub.get_name()) };
            if sub.has_subcommands() {
                walk(sub, &path, out);
            } else {
                out.push(path);
            }
        }
    }
    let mut out = Vec::new();
    walk(&Cli::command(), "", &mut out);
    out
}

/// Each operation is listed once, names an existing subcommand, and every
/// subcommand exposes at least one operation.
pub fn check() -> Result<(), String> {
    let paths = subcommand_paths();
    for (i, (module, op, sub)) in COVERAGE.iter().enumerate() {
        if COVERAGE[..i].iter().any(|(m, o, _)| m == module && o == op) {
            return Err(format!("{module}::{op} is listed twice"));
        }
        if !paths.iter().any(|p| p == sub) {
            return Err(format!("{module}::{op} maps to unknown subcommand {sub:?}"));
        }
    }
    for p in &paths {
        if !COVERAGE.iter().any(|(_, _, s)| s == p) {
            return Err(format!("subcommand {p:?} exposes no operation"));
        }
    }
    Ok(())
}
