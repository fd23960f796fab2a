//! JSON documents for matrices, measures, random variables, states,
//! certificates, kernels and frames.
//!
//! Complex entries are `[re, im]` pairs (a bare number is read as a real
//! entry). Matrices are `{"rows": r, "cols": c, "data": [...]}` in row-major
//! order. Parse errors carry a JSON pointer to the offending field.

use serde_json::{json, Map, Value};

use crate::dilation::UcpCertificate;
use crate::error::{Error, Result};
use crate::hulls::ChoiCertificate;
use crate::matkit::{c64, CMatrix, Frame};
use crate::noise::{KernelPair, RandomisationKernel};
use crate::qpm::{DensityOperator, OutcomeSpace, Povm, QuantumRandomVariable};

fn child(pointer: &str, key: &str) -> String {
    format!("{pointer}/{}", key.replace('~', "~0").replace('/', "~1"))
}

fn index(pointer: &str, i: usize) -> String {
    format!("{pointer}/{i}")
}

fn malformed(pointer: &str, message: impl Into<String>) -> Error {
    Error::MalformedInput { pointer: pointer.to_string(), message: message.into() }
}

/// Parses UTF-8 JSON text.
pub fn parse_document(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| malformed("", format!("invalid JSON: {e}")))
}

fn field<'a>(v: &'a Value, pointer: &str, key: &str) -> Result<&'a Value> {
    let obj = v.as_object().ok_or_else(|| malformed(pointer, "expected an object"))?;
    obj.get(key).ok_or_else(|| malformed(&child(pointer, key), "missing field"))
}

fn usize_field(v: &Value, pointer: &str, key: &str) -> Result<usize> {
    let f = field(v, pointer, key)?;
    f.as_u64().map(|n| n as usize).ok_or_else(|| malformed(&child(pointer, key), "expected a non-negative integer"))
}

fn str_field<'a>(v: &'a Value, pointer: &str, key: &str) -> Result<&'a str> {
    field(v, pointer, key)?.as_str().ok_or_else(|| malformed(&child(pointer, key), "expected a string"))
}

fn array<'a>(v: &'a Value, pointer: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| malformed(pointer, "expected an array"))
}

fn number(v: &Value, pointer: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| malformed(pointer, "expected a number"))
}

pub fn matrix_to_json(m: &CMatrix) -> Value {
    let mut data = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            data.push(json!([m[(i, j)].re, m[(i, j)].im]));
        }
    }
    json!({ "rows": m.nrows(), "cols": m.ncols(), "data": data })
}

pub fn matrix_from_json(v: &Value, pointer: &str) -> Result<CMatrix> {
    let rows = usize_field(v, pointer, "rows")?;
    let cols = usize_field(v, pointer, "cols")?;
    let data_ptr = child(pointer, "data");
    let data = array(field(v, pointer, "data")?, &data_ptr)?;
    if data.len() != rows * cols {
        return Err(malformed(&data_ptr, format!("expected {} entries, found {}", rows * cols, data.len())));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (k, entry) in data.iter().enumerate() {
        let p = index(&data_ptr, k);
        let z = match entry {
            Value::Array(pair) if pair.len() == 2 => c64(number(&pair[0], &index(&p, 0))?, number(&pair[1], &index(&p, 1))?),
            Value::Number(_) => c64(number(entry, &p)?, 0.0),
            _ => return Err(malformed(&p, "expected [re, im]")),
        };
        m[(k / cols.max(1), k % cols.max(1))] = z;
    }
    Ok(m)
}

fn square_matrix(v: &Value, pointer: &str, dim: usize) -> Result<CMatrix> {
    let m = matrix_from_json(v, pointer)?;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(malformed(pointer, format!("expected a {dim}x{dim} matrix, found {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m)
}

/// Labelled per-outcome matrices under `outcomes`, each stored under `key`.
fn labelled_matrices(v: &Value, pointer: &str, key: &str) -> Result<(OutcomeSpace, usize, Vec<CMatrix>)> {
    let dim = usize_field(v, pointer, "dim")?;
    let out_ptr = child(pointer, "outcomes");
    let outcomes = array(field(v, pointer, "outcomes")?, &out_ptr)?;
    if outcomes.is_empty() {
        return Err(malformed(&out_ptr, "at least one outcome is required"));
    }
    let mut labels = Vec::with_capacity(outcomes.len());
    let mut mats = Vec::with_capacity(outcomes.len());
    for (k, o) in outcomes.iter().enumerate() {
        let p = index(&out_ptr, k);
        labels.push(str_field(o, &p, "label")?.to_string());
        mats.push(square_matrix(field(o, &p, key)?, &child(&p, key), dim)?);
    }
    let space = OutcomeSpace::new(labels).map_err(|e| malformed(&out_ptr, e.to_string()))?;
    Ok((space, dim, mats))
}

fn labelled_to_json(space: &OutcomeSpace, dim: usize, mats: &[CMatrix], key: &str) -> Value {
    let outcomes: Vec<Value> = space
        .labels()
        .iter()
        .zip(mats)
        .map(|(l, m)| {
            let mut o = Map::new();
            o.insert("label".into(), json!(l));
            o.insert(key.into(), matrix_to_json(m));
            Value::Object(o)
        })
        .collect();
    json!({ "dim": dim, "outcomes": outcomes })
}

/// Outcome space and raw effects, without validation.
pub fn povm_parts_from_json(v: &Value, pointer: &str) -> Result<(OutcomeSpace, usize, Vec<CMatrix>)> {
    labelled_matrices(v, pointer, "effect")
}

pub fn povm_from_json(v: &Value, pointer: &str, tol: f64) -> Result<Povm> {
    let (space, _, effects) = povm_parts_from_json(v, pointer)?;
    Povm::new(space, effects, tol)
}

pub fn povm_to_json(nu: &Povm) -> Value {
    labelled_to_json(nu.space(), nu.dim(), nu.effects(), "effect")
}

pub fn qrv_from_json(v: &Value, pointer: &str) -> Result<QuantumRandomVariable> {
    let (space, dim, values) = labelled_matrices(v, pointer, "value")?;
    QuantumRandomVariable::new(space, dim, values)
}

pub fn qrv_to_json(psi: &QuantumRandomVariable) -> Value {
    labelled_to_json(psi.space(), psi.dim(), psi.values(), "value")
}

pub fn state_from_json(v: &Value, pointer: &str, tol: f64) -> Result<DensityOperator> {
    let dim = usize_field(v, pointer, "dim")?;
    let m = square_matrix(field(v, pointer, "matrix")?, &child(pointer, "matrix"), dim)?;
    DensityOperator::new(m, tol)
}

pub fn state_to_json(rho: &DensityOperator) -> Value {
    json!({ "dim": rho.dim(), "matrix": matrix_to_json(rho.matrix()) })
}

fn matrix_list(v: &Value, pointer: &str, dim: Option<usize>) -> Result<Vec<CMatrix>> {
    array(v, pointer)?
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let p = index(pointer, k);
            match dim {
                Some(d) => square_matrix(m, &p, d),
                None => matrix_from_json(m, &p),
            }
        })
        .collect()
}

fn matrices_to_json(ms: &[CMatrix]) -> Value {
    Value::Array(ms.iter().map(matrix_to_json).collect())
}

/// Kraus certificate `{"dim": d, "kraus": {label: [M, ...]}}` or Choi form
/// `{"dim": d, "choi": {label: C}}`, aligned with `space`.
pub fn ucp_certificate_from_json(v: &Value, pointer: &str, space: &OutcomeSpace) -> Result<UcpCertificate> {
    let dim = usize_field(v, pointer, "dim")?;
    let obj = v.as_object().ok_or_else(|| malformed(pointer, "expected an object"))?;
    let (key, by_label) = if let Some(k) = obj.get("kraus") {
        ("kraus", k)
    } else if let Some(c) = obj.get("choi") {
        ("choi", c)
    } else {
        return Err(malformed(&child(pointer, "kraus"), "missing field (or \"choi\")"));
    };
    let map_ptr = child(pointer, key);
    let map = by_label.as_object().ok_or_else(|| malformed(&map_ptr, "expected an object keyed by outcome label"))?;
    for label in map.keys() {
        if space.index_of(label).is_none() {
            return Err(malformed(&child(&map_ptr, label), "label is not an outcome of the random variable"));
        }
    }
    if key == "kraus" {
        let mut kraus = vec![Vec::new(); space.len()];
        for (label, list) in map {
            kraus[space.index_of(label).expect("checked")] = matrix_list(list, &child(&map_ptr, label), Some(dim))?;
        }
        UcpCertificate::new(space.clone(), dim, kraus)
    } else {
        let mut choi = vec![CMatrix::zeros(dim * dim, dim * dim); space.len()];
        for (label, c) in map {
            choi[space.index_of(label).expect("checked")] = square_matrix(c, &child(&map_ptr, label), dim * dim)?;
        }
        UcpCertificate::from_choi(space.clone(), dim, &choi)
    }
}

pub fn ucp_certificate_to_json(theta: &UcpCertificate) -> Value {
    let mut map = Map::new();
    for (label, ks) in theta.space.labels().iter().zip(&theta.kraus) {
        map.insert(label.clone(), matrices_to_json(ks));
    }
    json!({ "dim": theta.dim, "kraus": Value::Object(map) })
}

pub fn choi_certificate_to_json(c: &ChoiCertificate) -> Value {
    json!({
        "dim": c.dim,
        "target": matrix_to_json(&c.target),
        "atoms": matrices_to_json(&c.atoms),
        "blocks": matrices_to_json(&c.blocks),
    })
}

pub fn choi_certificate_from_json(v: &Value, pointer: &str) -> Result<ChoiCertificate> {
    let dim = usize_field(v, pointer, "dim")?;
    let target = square_matrix(field(v, pointer, "target")?, &child(pointer, "target"), dim)?;
    let atoms = matrix_list(field(v, pointer, "atoms")?, &child(pointer, "atoms"), Some(dim))?;
    let blocks = matrix_list(field(v, pointer, "blocks")?, &child(pointer, "blocks"), Some(dim * dim))?;
    if blocks.len() != atoms.len() {
        return Err(malformed(&child(pointer, "blocks"), format!("expected {} blocks, found {}", atoms.len(), blocks.len())));
    }
    Ok(ChoiCertificate { dim, atoms, target, blocks })
}

/// A list of matrices, or `{"atoms": [...]}`.
pub fn atoms_from_json(v: &Value, pointer: &str) -> Result<Vec<CMatrix>> {
    let (list, p) = match v {
        Value::Object(o) if o.contains_key("atoms") => (&o["atoms"], child(pointer, "atoms")),
        _ => (v, pointer.to_string()),
    };
    let atoms = matrix_list(list, &p, None)?;
    let d = atoms.first().ok_or_else(|| malformed(&p, "at least one atom is required"))?.nrows();
    for (k, a) in atoms.iter().enumerate() {
        if a.nrows() != d || a.ncols() != d {
            return Err(malformed(&index(&p, k), format!("expected a {d}x{d} matrix")));
        }
    }
    Ok(atoms)
}

pub fn atoms_to_json(atoms: &[CMatrix]) -> Value {
    json!({ "atoms": matrices_to_json(atoms) })
}

/// `{"measure": <ν′ on Y>, "kernels": [{"label": y, "povm": <γ_y on X>}, ...]}`.
pub fn kernel_pair_from_json(v: &Value, pointer: &str, tol: f64) -> Result<KernelPair> {
    let measure = povm_from_json(field(v, pointer, "measure")?, &child(pointer, "measure"), tol)?;
    let k_ptr = child(pointer, "kernels");
    let list = array(field(v, pointer, "kernels")?, &k_ptr)?;
    let target = measure.space().clone();
    let mut slots: Vec<Option<Povm>> = vec![None; target.len()];
    for (k, item) in list.iter().enumerate() {
        let p = index(&k_ptr, k);
        let label = str_field(item, &p, "label")?;
        let y = target.index_of(label).ok_or_else(|| malformed(&child(&p, "label"), "label is not an outcome of the measure"))?;
        if slots[y].is_some() {
            return Err(malformed(&child(&p, "label"), "duplicate kernel label"));
        }
        slots[y] = Some(povm_from_json(field(item, &p, "povm")?, &child(&p, "povm"), tol)?);
    }
    let mut kernels = Vec::with_capacity(slots.len());
    for (y, slot) in slots.into_iter().enumerate() {
        kernels.push(slot.ok_or_else(|| malformed(&k_ptr, format!("missing kernel for label {}", target.label(y))))?);
    }
    let source = kernels[0].space().clone();
    for (k, g) in kernels.iter().enumerate() {
        if g.space() != &source {
            return Err(malformed(&index(&k_ptr, k), "all kernels must share one outcome space"));
        }
    }
    let name = v.get("name").and_then(Value::as_str).unwrap_or("custom").to_string();
    let kernel = RandomisationKernel::new(target, source, kernels)?;
    Ok(KernelPair { kernel, measure, name })
}

pub fn kernel_pair_to_json(pair: &KernelPair) -> Value {
    let kernels: Vec<Value> = pair
        .kernel
        .target_space
        .labels()
        .iter()
        .zip(&pair.kernel.kernels)
        .map(|(l, g)| json!({ "label": l, "povm": povm_to_json(g) }))
        .collect();
    json!({ "name": pair.name, "measure": povm_to_json(&pair.measure), "kernels": kernels })
}

/// A list of kernel pairs, or `{"family": [...]}`.
pub fn kernel_family_from_json(v: &Value, pointer: &str, tol: f64) -> Result<Vec<KernelPair>> {
    let (list, p) = match v {
        Value::Object(o) if o.contains_key("family") => (&o["family"], child(pointer, "family")),
        _ => (v, pointer.to_string()),
    };
    array(list, &p)?.iter().enumerate().map(|(k, item)| kernel_pair_from_json(item, &index(&p, k), tol)).collect()
}

pub fn frame_from_json(v: &Value, pointer: &str) -> Result<Frame> {
    let n = usize_field(v, pointer, "ambient_dim")?;
    let c_ptr = child(pointer, "columns");
    let cols = array(field(v, pointer, "columns")?, &c_ptr)?;
    let mut m = CMatrix::zeros(n, cols.len());
    for (j, col) in cols.iter().enumerate() {
        let p = index(&c_ptr, j);
        let entries = array(col, &p)?;
        if entries.len() != n {
            return Err(malformed(&p, format!("expected {n} entries")));
        }
        for (i, e) in entries.iter().enumerate() {
            let q = index(&p, i);
            m[(i, j)] = match e {
                Value::Array(pair) if pair.len() == 2 => c64(number(&pair[0], &index(&q, 0))?, number(&pair[1], &index(&q, 1))?),
                Value::Number(_) => c64(number(e, &q)?, 0.0),
                _ => return Err(malformed(&q, "expected [re, im]")),
            };
        }
    }
    Frame::from_orthonormal(m).map_err(|e| malformed(&c_ptr, e.to_string()))
}

pub fn frame_to_json(f: &Frame) -> Value {
    let cols: Vec<Value> =
        (0..f.dim()).map(|j| Value::Array(f.columns().column(j).iter().map(|z| json!([z.re, z.im])).collect())).collect();
    json!({ "ambient_dim": f.ambient_dim(), "columns": cols })
}
