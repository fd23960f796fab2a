//! One function per subcommand: load documents, call the library, shape the outputs.

use std::path::Path;

use num_complex::Complex64;
use qpmkit::dilation::{
    is_semi_invariant, moments_via_semiinvariance, naimark_dilate, realize_spectrum_point, stinespring_expectation,
    SemiInvariance,
};
use qpmkit::expectation::{cp_level_check, expect, expect_density_check, schwarz_gap};
use qpmkit::hulls::{
    cstar_combine, cstar_hull_membership, essential_range, hypoconvex_sample, kraus_extract, HullOptions, HullVerdict, Move,
};
use qpmkit::io::{self, matrix_to_json as mj};
use qpmkit::matkit::{invariant_hull, min_eigenvalue, operator_norm, polar_decompose, psd_sqrt, CMatrix, FRAME_TOL};
use qpmkit::noise::{
    builtin_family, gamma_apply, intrinsic_noise_upper, random_noise, randomisation_laws_check, randomise_measure, NoiseOptions,
};
use qpmkit::qpm::{induced_measure, outcome_probabilities, radon_nikodym, sample_outcomes, validate_povm};
use qpmkit::variance::{default_max_k, is_variance_zero, moment_sequence, multiplicativity_defect, variance_report};
use qpmkit::{DensityOperator, Povm, QuantumRandomVariable};
use serde_json::{json, Map, Value};

use crate::args::{Command, DilateKind, LinalgOp, NoiseArgs};
use crate::report::{ErrorObject, Inputs, Outcome, Status};
use crate::suite;

fn povm(inputs: &mut Inputs, path: &Path) -> Result<Povm, ErrorObject> {
    inputs.load(path, |v, tol| io::povm_from_json(v, "", tol))
}

fn qrv(inputs: &mut Inputs, path: &Path) -> Result<QuantumRandomVariable, ErrorObject> {
    inputs.load(path, |v, _| io::qrv_from_json(v, ""))
}

fn matrix(inputs: &mut Inputs, path: &Path) -> Result<CMatrix, ErrorObject> {
    inputs.load(path, |v, _| io::matrix_from_json(v, ""))
}

fn atoms(inputs: &mut Inputs, path: &Path) -> Result<Vec<CMatrix>, ErrorObject> {
    inputs.load(path, |v, _| io::atoms_from_json(v, ""))
}

fn state(inputs: &mut Inputs, path: &Path) -> Result<DensityOperator, ErrorObject> {
    inputs.load(path, |v, tol| io::state_from_json(v, "", tol))
}

fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn by_label(labels: &[String], values: impl IntoIterator<Item = Value>) -> Value {
    Value::Object(labels.iter().cloned().zip(values).collect::<Map<_, _>>())
}

fn options(args: &NoiseArgs, inputs: &mut Inputs) -> NoiseOptions {
    inputs.param("restarts", args.restarts);
    inputs.param("max_iter", args.max_iter);
    inputs.param("step", args.step);
    inputs.param("seed", args.seed);
    NoiseOptions { restarts: args.restarts, max_iter: args.max_iter, step: args.step, seed: args.seed }
}

fn semi_invariance_json(s: &SemiInvariance) -> Value {
    json!({
        "semi_invariant": s.flag,
        "defect": s.defect,
        "l0": io::frame_to_json(&s.l0),
        "l1": io::frame_to_json(&s.l1),
    })
}

fn move_json(m: &Move) -> Value {
    match m {
        Move::Conjugate { element, unitary } => json!({ "move": "conjugate", "element": element, "unitary": mj(unitary) }),
        Move::Pinch { first, second, projection } => {
            json!({ "move": "pinch", "first": first, "second": second, "projection": mj(projection) })
        }
        Move::Skipped { first, second } => json!({ "move": "skipped", "first": first, "second": second }),
    }
}

/// Runs `command`, reading its documents through `inputs`.
pub fn execute(command: &Command, inputs: &mut Inputs) -> Result<Outcome, ErrorObject> {
    match command {
        Command::Validate { povm } => {
            let name = povm.display().to_string();
            let (space, _, effects) = inputs.load(povm, |v, _| io::povm_parts_from_json(v, ""))?;
            let checked = validate_povm(space, effects, inputs.tol).map_err(|e| ErrorObject::from_core(&e, Some(&name)))?;
            let nu = &checked.povm;
            let mu = induced_measure(nu);
            Ok(Outcome::ok(
                json!({
                    "valid": true,
                    "dim": nu.dim(),
                    "outcomes": nu.space().labels(),
                    "induced_measure": by_label(nu.space().labels(), mu.weights.iter().map(|w| json!(w))),
                    "radon_nikodym": io::qrv_to_json(&radon_nikodym(nu)),
                }),
                json!({ "min_eigenvalues": checked.min_eigenvalues, "sum_deviation": checked.sum_deviation, "tol": inputs.tol }),
            ))
        }

        Command::Sample { povm: p, state: s, shots, seed } => {
            inputs.param("shots", shots);
            inputs.param("seed", seed);
            let nu = povm(inputs, p)?;
            let rho = match s {
                Some(path) => state(inputs, path)?,
                None => DensityOperator::maximally_mixed(nu.dim()),
            };
            let probs = outcome_probabilities(&nu, &rho)?;
            let draws = sample_outcomes(&nu, &rho, *shots, *seed)?;
            let counts = nu.space().labels().iter().map(|l| json!(draws.iter().filter(|d| *d == l).count()));
            Ok(Outcome::ok(
                json!({
                    "probabilities": by_label(nu.space().labels(), probs.iter().map(|p| json!(p))),
                    "samples": draws,
                    "counts": by_label(nu.space().labels(), counts),
                }),
                json!({ "probability_sum": probs.iter().sum::<f64>() }),
            ))
        }

        Command::Expect { povm: p, psi, states } => {
            let nu = povm(inputs, p)?;
            let psi = qrv(inputs, psi)?;
            let value = expect(&nu, &psi)?;
            let mut checks = Vec::new();
            for path in states {
                let rho = state(inputs, path)?;
                let c = expect_density_check(&nu, &psi, &rho)?;
                checks.push(json!({ "state": path.display().to_string(), "lhs": complex(c.lhs), "rhs": complex(c.rhs), "discrepancy": c.discrepancy() }));
            }
            Ok(Outcome::ok(
                json!({ "expectation": mj(&value), "density_checks": checks }),
                json!({ "norm": operator_norm(&value) }),
            ))
        }

        Command::Schwarz { povm: p, psi } => {
            let nu = povm(inputs, p)?;
            let psi = qrv(inputs, psi)?;
            let gap = schwarz_gap(&nu, &psi)?;
            let min = min_eigenvalue(&gap);
            Ok(Outcome::ok(json!({ "gap": mj(&gap), "min_eigenvalue": min }), json!({ "norm": operator_norm(&gap) })))
        }

        Command::Cpcheck { povm: p, level, trials, seed } => {
            inputs.param("level", level);
            inputs.param("trials", trials);
            inputs.param("seed", seed);
            let nu = povm(inputs, p)?;
            let r = cp_level_check(&nu, *level, *trials, *seed)?;
            Ok(Outcome::ok(
                json!({ "passed": r.passed(), "level": r.level, "trials": r.trials, "worst_eigenvalue": r.worst_eigenvalue, "failures": r.failures }),
                json!({ "threshold": r.threshold }),
            ))
        }

        Command::Variance { povm: p, psi } => {
            let nu = povm(inputs, p)?;
            let psi = qrv(inputs, psi)?;
            let r = variance_report(&nu, &psi)?;
            Ok(Outcome::ok(
                json!({ "left": mj(&r.left), "right": mj(&r.right), "symmetric": mj(&r.symmetric) }),
                json!({ "min_eigenvalues": { "left": r.min_eigs[0], "right": r.min_eigs[1], "symmetric": r.min_eigs[2] } }),
            ))
        }

        Command::Varzero { povm: p, psi, tol } => {
            inputs.param("tol", format!("{tol:?}"));
            let nu = povm(inputs, p)?;
            let psi = qrv(inputs, psi)?;
            let r = is_variance_zero(&nu, &psi, *tol)?;
            let witness = r.witness.as_ref().map(|w| json!({ "lambda": mj(&w.lambda), "basis": mj(&w.basis) }));
            Ok(Outcome::ok(
                json!({ "variance_zero": r.flag, "witness": witness }),
                json!({ "left_gap": r.left_gap, "right_gap": r.right_gap, "tol": r.tol }),
            ))
        }

        Command::Moments { povm: p, psi, max_k, tol } => {
            inputs.param("max_k", format!("{max_k:?}"));
            inputs.param("tol", tol);
            let nu = povm(inputs, p)?;
            let psi = qrv(inputs, psi)?;
            let k = max_k.unwrap_or_else(|| default_max_k(nu.dim()));
            let g = moment_sequence(&nu, &psi, k)?;
            let defect = multiplicativity_defect(&g);
            Ok(Outcome::ok(
                json!({ "max_k": k, "moments": g.values.iter().map(mj).collect::<Vec<_>>(), "multiplicative": defect <= *tol }),
                json!({ "defect": defect, "tol": tol }),
            ))
        }

        Command::Semiinv { povm: p, psi, operator, frame, tol } => {
            inputs.param("tol", tol);
            let s = match (p, psi, operator, frame) {
                (Some(p), Some(psi), None, None) => {
                    let nu = povm(inputs, p)?;
                    let psi = qrv(inputs, psi)?;
                    moments_via_semiinvariance(&nu, &psi, *tol)?
                }
                (None, None, Some(z), Some(m)) => {
                    let z = matrix(inputs, z)?;
                    let m = inputs.load(m, |v, _| io::frame_from_json(v, ""))?;
                    is_semi_invariant(&z, &m, *tol)?
                }
                _ => return Err(ErrorObject::new("MissingArgument", "give POVM and PSI, or --operator and --frame")),
            };
            Ok(Outcome::ok(semi_invariance_json(&s), json!({ "l0_dim": s.l0.dim(), "l1_dim": s.l1.dim() })))
        }

        Command::Dilate { kind: DilateKind::Naimark { povm: p } } => {
            let nu = povm(inputs, p)?;
            let n = naimark_dilate(&nu);
            let labels: Vec<&str> = n.support.iter().map(|&j| nu.space().label(j)).collect();
            let err = n
                .support
                .iter()
                .enumerate()
                .map(|(b, &j)| operator_norm(&(n.compressed_projection(b) - nu.effect(j))))
                .fold(0.0, f64::max);
            Ok(Outcome::ok(
                json!({
                    "big_dim": n.big_dim,
                    "support": labels,
                    "isometry": mj(&n.isometry),
                    "projections": n.projections.iter().map(mj).collect::<Vec<_>>(),
                }),
                json!({ "max_compression_error": err }),
            ))
        }

        Command::Dilate { kind: DilateKind::Stinespring { povm: p, psi } } => {
            let nu = povm(inputs, p)?;
            let s = stinespring_expectation(&nu);
            let labels: Vec<&str> = s.support.iter().map(|&j| nu.space().label(j)).collect();
            let mut outputs = json!({
                "big_dim": s.big_dim,
                "support": labels,
                "isometry": mj(&s.isometry),
                "minimal": s.is_minimal(),
            });
            let mut diagnostics = json!({ "generated_rank": s.generated_rank() });
            if let Some(path) = psi {
                let psi = qrv(inputs, path)?;
                let c = s.compress(&psi)?;
                diagnostics["identity_error"] = json!(operator_norm(&(&c - expect(&nu, &psi)?)));
                outputs["compression"] = mj(&c);
            }
            Ok(Outcome::ok(outputs, diagnostics))
        }

        Command::Realize { psi, certificate, max_k, tol } => {
            inputs.param("max_k", format!("{max_k:?}"));
            inputs.param("tol", tol);
            let psi = qrv(inputs, psi)?;
            let space = psi.space().clone();
            let theta = inputs.load(certificate, |v, _| io::ucp_certificate_from_json(v, "", &space))?;
            let k = max_k.unwrap_or_else(|| default_max_k(psi.dim()));
            let r = realize_spectrum_point(&psi, &theta, k, *tol)?;
            Ok(Outcome::ok(
                json!({
                    "measure": io::povm_to_json(&r.measure),
                    "unitary": io::qrv_to_json(&r.unitary),
                    "psi": io::qrv_to_json(&r.psi),
                    "lambda": mj(&r.lambda),
                }),
                json!({ "max_moment_error": r.max_moment_error, "max_k": r.max_k }),
            ))
        }

        Command::Essrange { povm: p, psi, dedup_tol } => {
            inputs.param("dedup_tol", dedup_tol);
            let nu = povm(inputs, p)?;
            let psi = qrv(inputs, psi)?;
            let r = essential_range(&nu, &psi, *dedup_tol)?;
            let sources: Vec<&str> = r.sources.iter().map(|&j| nu.space().label(j)).collect();
            let mut outputs = io::atoms_to_json(&r.elements);
            outputs["sources"] = json!(sources);
            Ok(Outcome::ok(outputs, json!({ "count": r.elements.len() })))
        }

        Command::HullMember { target, atoms: a, max_iter, tol } => {
            inputs.param("max_iter", max_iter);
            inputs.param("tol", tol);
            let b = matrix(inputs, target)?;
            let atoms = atoms(inputs, a)?;
            match cstar_hull_membership(&b, &atoms, HullOptions { max_iter: *max_iter, tol: *tol })? {
                HullVerdict::Member { certificate, residual, iterations } => {
                    let comb = kraus_extract(&certificate)?;
                    let recon = operator_norm(&(comb.combine()? - &b));
                    Ok(Outcome::ok(
                        json!({
                            "verdict": "member",
                            "certificate": io::choi_certificate_to_json(&certificate),
                            "combination": {
                                "coefficients": comb.coefficients.iter().map(mj).collect::<Vec<_>>(),
                                "atoms": comb.atoms.iter().map(mj).collect::<Vec<_>>(),
                                "atom_index": comb.atom_index,
                            },
                        }),
                        json!({ "residual": residual, "iterations": iterations, "reconstruction_error": recon }),
                    ))
                }
                HullVerdict::Rejected { target_norm, max_atom_norm } => Ok(Outcome {
                    status: Status::Failed(ErrorObject::new(
                        "PrefilterRejected",
                        format!("||b|| = {target_norm} exceeds max ||a_j|| = {max_atom_norm}"),
                    )),
                    outputs: json!({ "verdict": "rejected" }),
                    diagnostics: json!({ "target_norm": target_norm, "max_atom_norm": max_atom_norm }),
                }),
                HullVerdict::Inconclusive { residual, iterations } => Ok(Outcome {
                    status: Status::Inconclusive,
                    outputs: json!({ "verdict": "inconclusive" }),
                    diagnostics: json!({ "residual": residual, "iterations": iterations }),
                }),
            }
        }

        Command::Combine { coefficients, atoms: a } => {
            let ts = inputs.load(coefficients, |v, _| {
                let list = v.get("coefficients").unwrap_or(v);
                let pointer = if v.get("coefficients").is_some() { "/coefficients" } else { "" };
                io::atoms_from_json(list, pointer)
            })?;
            let atoms = atoms(inputs, a)?;
            let value = cstar_combine(&ts, &atoms)?;
            let bound = atoms.iter().map(operator_norm).fold(0.0, f64::max);
            Ok(Outcome::ok(json!({ "value": mj(&value) }), json!({ "norm": operator_norm(&value), "max_atom_norm": bound })))
        }

        Command::HypoSample { elements, moves, seed } => {
            inputs.param("moves", moves);
            inputs.param("seed", seed);
            let elements = atoms(inputs, elements)?;
            let s = hypoconvex_sample(&elements, *moves, *seed)?;
            let skipped = s.log.iter().filter(|m| matches!(m, Move::Skipped { .. })).count();
            Ok(Outcome::ok(
                json!({ "value": mj(&s.value), "log": s.log.iter().map(move_json).collect::<Vec<_>>() }),
                json!({ "skipped_pinches": skipped }),
            ))
        }

        Command::Noise { povm: p, opts } => {
            let o = options(opts, inputs);
            let nu = povm(inputs, p)?;
            let est = random_noise(&nu, &o)?;
            Ok(Outcome::ok(
                json!({ "value": est.value, "argmax_psi": io::qrv_to_json(&est.argmax_psi) }),
                json!({ "restarts_used": est.restarts_used, "iterations": est.iterations, "converged": est.converged }),
            ))
        }

        Command::Smear { kernel, psi, tol } => {
            inputs.param("tol", tol);
            let pair = inputs.load(kernel, |v, tol| io::kernel_pair_from_json(v, "", tol))?;
            let nu = randomise_measure(&pair.kernel, &pair.measure)?;
            let mut outputs = json!({ "measure": io::povm_to_json(&nu) });
            let mut diagnostics = json!({ "kernel": pair.name });
            if let Some(path) = psi {
                let psi = qrv(inputs, path)?;
                let pushed = gamma_apply(&pair.kernel, &pair.measure, &psi)?;
                let laws = randomisation_laws_check(&pair.kernel, &pair.measure, &psi, *tol)?;
                outputs["gamma_psi"] = io::qrv_to_json(&pushed);
                outputs["laws"] = json!({
                    "passed": laws.passed(),
                    "expectation_gap": laws.expectation_gap,
                    "contraction_min_eigenvalue": laws.contraction_min_eig,
                    "cp_worst_eigenvalue": laws.cp_worst_eig,
                });
                diagnostics["violations"] = json!(laws.violations);
            }
            Ok(Outcome::ok(outputs, diagnostics))
        }

        Command::NoiseIntrinsic { povm: p, family, opts } => {
            let o = options(opts, inputs);
            let nu = povm(inputs, p)?;
            let family = match family {
                Some(path) => inputs.load(path, |v, tol| io::kernel_family_from_json(v, "", tol))?,
                None => builtin_family(&nu)?,
            };
            let r = intrinsic_noise_upper(&nu, &family, &o)?;
            let members: Vec<Value> =
                family.iter().zip(&r.per_member).map(|(k, v)| json!({ "name": k.name, "value": v })).collect();
            Ok(Outcome::ok(json!({ "value": r.value, "best": family[r.best_index].name }), json!({ "members": members })))
        }

        Command::Linalg { op } => linalg(op, inputs),

        Command::Suite { seed, sizes, fixtures } => {
            inputs.param("seed", seed);
            inputs.param("sizes", sizes);
            let mut docs = Vec::with_capacity(fixtures.len());
            for path in fixtures {
                docs.push((path.display().to_string(), inputs.read(path)?));
            }
            let summary = suite::run_suite(*seed, *sizes, &docs, inputs.tol);
            let status = if summary.passed() {
                Status::Ok
            } else {
                Status::Failed(ErrorObject::new("PropertyFailed", format!("{} properties failed", summary.failed().len())))
            };
            Ok(Outcome { status, outputs: summary.to_json(), diagnostics: json!({ "failed": summary.failed() }) })
        }
    }
}

fn linalg(op: &LinalgOp, inputs: &mut Inputs) -> Result<Outcome, ErrorObject> {
    match op {
        LinalgOp::Sqrt { matrix: m } => {
            let a = matrix(inputs, m)?;
            let r = psd_sqrt(&a, inputs.tol)?;
            let err = operator_norm(&(&r * &r - &a));
            Ok(Outcome::ok(json!({ "sqrt": mj(&r) }), json!({ "square_error": err })))
        }
        LinalgOp::Polar { matrix: m } => {
            let a = matrix(inputs, m)?;
            let p = polar_decompose(&a)?;
            let err = operator_norm(&(&p.unitary * &p.positive - &a));
            Ok(Outcome::ok(
                json!({ "unitary": mj(&p.unitary), "positive": mj(&p.positive) }),
                json!({ "reconstruction_error": err }),
            ))
        }
        LinalgOp::Norm { matrix: m } => {
            let a = matrix(inputs, m)?;
            Ok(Outcome::ok(json!({ "norm": operator_norm(&a) }), json!({ "rows": a.nrows(), "cols": a.ncols() })))
        }
        LinalgOp::Hull { operator, frame } => {
            let z = matrix(inputs, operator)?;
            let m = inputs.load(frame, |v, _| io::frame_from_json(v, ""))?;
            let hull = invariant_hull(&z, &m, FRAME_TOL)?;
            let p = hull.projector();
            let n = z.nrows();
            let leak = operator_norm(&((CMatrix::identity(n, n) - &p) * &z * &p));
            Ok(Outcome::ok(json!({ "hull": io::frame_to_json(&hull), "dim": hull.dim() }), json!({ "invariance_defect": leak })))
        }
    }
}
