//! Builders for the worked instances and the JSON problem document.
//!
//! Document layout (matrices are arrays of rows):
//!
//! ```json
//! { "m": 3, "n": 3, "l": 4, "r": 2, "rank_tol": 1e-8, "tol": 1e-8,
//!   "objective": { "kind": "frobenius_distance", "target": [[...]],
//!                  "strong_convexity_modulus": 1.0, "convex": true },
//!   "constraints": [ { "matrix": [[...]], "rhs": 0.0 } ],
//!   "named_points": [ { "label": "Xbar", "matrix": [[...]] } ] }
//! ```
//!
//! Objective kinds: `frobenius_distance {target}`, `row_quadratic {blocks}`,
//! `linear_trace {c}` and `registered_custom {id}`. The convexity fields are
//! optional for the built-in kinds; when present they must agree with the
//! values derived from the parameters.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::affine::AffineMap;
use crate::error::{Error, Result};
use crate::linalg::{to_rows, unit, Mat, Vector};
use crate::model::{ObjectiveKind, ObjectiveModel, ProblemSpec, SmoothObjective};

/// A problem together with labelled points of interest.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: ProblemSpec,
    pub points: Vec<(String, Mat)>,
}

impl ProblemFile {
    pub fn new(problem: ProblemSpec) -> Self {
        Self { problem, points: Vec::new() }
    }

    pub fn with_point(mut self, label: &str, x: Mat) -> Self {
        self.points.push((label.to_string(), x));
        self
    }

    pub fn point(&self, label: &str) -> Option<&Mat> {
        self.points.iter().find(|(l, _)| l == label).map(|(_, x)| x)
    }
}

/// Anti-diagonal equalities `X[k][j] = X[k-1][j+1]` for `k = 2..m`,
/// `j = 1..n-1` (one-based), enumerated row-major in `(k, j)`.
pub fn hankel_constraints(m: usize, n: usize) -> Result<AffineMap> {
    if m < 2 || n < 2 {
        return Err(Error::InvalidInput(format!("Hankel structure needs m, n >= 2, got {m}x{n}")));
    }
    let mut mats = Vec::with_capacity((m - 1) * (n - 1));
    for k in 1..m {
        for j in 0..n - 1 {
            mats.push(unit(m, n, k, j) - unit(m, n, k - 1, j + 1));
        }
    }
    let l = mats.len();
    AffineMap::new(m, n, mats, Vector::zeros(l))
}

/// Nearest rank-`r` Hankel matrix to `h` in the Frobenius norm.
pub fn build_hankel(h: &Mat, r: usize) -> Result<ProblemSpec> {
    let (m, n) = h.shape();
    ProblemSpec::new(ObjectiveModel::frobenius_distance(h.clone()), hankel_constraints(m, n)?, r)
}

/// `min 1/2 sum_i w_i B^i w_i^T` subject to unit row sums and `rank(W) <= r`.
pub fn build_lrr(blocks: Vec<Mat>, r: usize) -> Result<ProblemSpec> {
    let n = blocks.len();
    if n == 0 {
        return Err(Error::InvalidInput("at least one block is required".into()));
    }
    let mats = (0..n)
        .map(|i| {
            let mut e = Mat::zeros(n, n);
            e.row_mut(i).fill(1.0);
            e
        })
        .collect();
    let affine = AffineMap::new(n, n, mats, Vector::from_element(n, 1.0))?;
    ProblemSpec::new(ObjectiveModel::row_quadratic(blocks)?, affine, r)
}

/// The 3x3 Hankel instance with target `[[112, 7.5, 0], [7.5, 0, 0], [0, 0, 1e-6]]`.
///
/// Named points: `H`, `Xbar` (the target with its `(3, 3)` entry removed)
/// and `Xtilde = 112 e1 e1^T`.
pub fn hankel_3x3(r: usize) -> Result<ProblemFile> {
    let h = Mat::from_row_slice(3, 3, &[112.0, 7.5, 0.0, 7.5, 0.0, 0.0, 0.0, 0.0, 1e-6]);
    let mut xbar = h.clone();
    xbar[(2, 2)] = 0.0;
    Ok(ProblemFile::new(build_hankel(&h, r)?)
        .with_point("H", h)
        .with_point("Xbar", xbar)
        .with_point("Xtilde", unit(3, 3, 0, 0) * 112.0))
}

/// `min <e2 e2^T, X>` over 3x3 diagonal matrices with `X11 = X22`, `X33 = 1`
/// and rank at most 2. Constraint order: `e1e1^T - e2e2^T`, the six
/// off-diagonal units row-major, then `e3e3^T`.
pub fn build_example_laf() -> Result<ProblemFile> {
    let mut mats = vec![unit(3, 3, 0, 0) - unit(3, 3, 1, 1)];
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                mats.push(unit(3, 3, i, j));
            }
        }
    }
    mats.push(unit(3, 3, 2, 2));
    let mut rhs = Vector::zeros(8);
    rhs[7] = 1.0;
    let affine = AffineMap::new(3, 3, mats, rhs)?;
    let prob = ProblemSpec::new(ObjectiveModel::linear_trace(unit(3, 3, 1, 1)), affine, 2)?;
    Ok(ProblemFile::new(prob).with_point("Xbar", unit(3, 3, 2, 2)))
}

/// `min 1/2 ||H - X||^2` with `H = -e3 e3^T`, `<I, X> = 2`, `rank(X) <= 3` (4x4).
pub fn build_example_tr() -> Result<ProblemFile> {
    let h = -unit(4, 4, 2, 2);
    let affine = AffineMap::new(4, 4, vec![Mat::identity(4, 4)], Vector::from_element(1, 2.0))?;
    let prob = ProblemSpec::new(ObjectiveModel::frobenius_distance(h.clone()), affine, 3)?;
    let d = |v: [f64; 4]| Mat::from_diagonal(&Vector::from_row_slice(&v));
    let t = 2.0 / 3.0;
    Ok(ProblemFile::new(prob)
        .with_point("X1", d([1.0, 1.0, 0.0, 0.0]))
        .with_point("X2", d([0.0, 1.0, 0.0, 1.0]))
        .with_point("X3", d([1.0, 0.0, 0.0, 1.0]))
        .with_point("X4", d([t, t, 0.0, t]))
        .with_point("H", h))
}

/// Low-rank representation with `B^i = I_N` and `r = 2`; named point
/// `Wbar = e e^T / N`.
pub fn lrr_identity(n: usize) -> Result<ProblemFile> {
    let prob = build_lrr(vec![Mat::identity(n, n); n], 2)?;
    let wbar = Mat::from_element(n, n, 1.0 / n as f64);
    Ok(ProblemFile::new(prob).with_point("Wbar", wbar))
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 6] = ["hankel33", "hankel33_r1", "laf", "tr", "lrr3", "lrr5"];

pub fn builtin(name: &str) -> Result<ProblemFile> {
    match name {
        "hankel33" => hankel_3x3(2),
        "hankel33_r1" => hankel_3x3(1),
        "laf" => build_example_laf(),
        "tr" => build_example_tr(),
        "lrr3" => lrr_identity(3),
        "lrr5" => lrr_identity(5),
        other => Err(Error::InvalidInput(format!(
            "unknown built-in problem '{other}' (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// Objectives available to `registered_custom` entries, by id.
#[derive(Debug, Clone, Default)]
pub struct ObjectiveRegistry {
    entries: HashMap<String, (Arc<dyn SmoothObjective>, bool, Option<f64>)>,
}

impl ObjectiveRegistry {
    pub fn register(
        &mut self,
        id: &str,
        objective: Arc<dyn SmoothObjective>,
        convex: bool,
        strong_convexity: Option<f64>,
    ) {
        self.entries.insert(id.to_string(), (objective, convex, strong_convexity));
    }

    fn get(&self, id: &str) -> Option<ObjectiveModel> {
        self.entries
            .get(id)
            .map(|(o, c, s)| ObjectiveModel::custom(id, Arc::clone(o), *c, *s))
    }
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    m: usize,
    n: usize,
    l: usize,
    r: usize,
    rank_tol: f64,
    tol: f64,
    objective: ObjectiveDoc,
    constraints: Vec<ConstraintDoc>,
    #[serde(default)]
    named_points: Vec<PointDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObjectiveDoc {
    #[serde(flatten)]
    params: ObjectiveParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strong_convexity_modulus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    convex: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ObjectiveParams {
    FrobeniusDistance { target: Rows },
    RowQuadratic { blocks: Vec<Rows> },
    LinearTrace { c: Rows },
    RegisteredCustom { id: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    matrix: Rows,
    rhs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointDoc {
    label: String,
    matrix: Rows,
}

fn field_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { location: location.into(), message: message.into() }
}

fn to_matrix(rows: &Rows, shape: (usize, usize), path: &str) -> Result<Mat> {
    let (m, n) = shape;
    if rows.len() != m || rows.iter().any(|r| r.len() != n) {
        let found = rows.iter().map(Vec::len).collect::<Vec<_>>();
        return Err(field_err(path, format!("expected {m}x{n} matrix, got row lengths {found:?}")));
    }
    Ok(Mat::from_fn(m, n, |i, j| rows[i][j]))
}

fn document_of(file: &ProblemFile) -> Result<Document> {
    let p = &file.problem;
    let (m, n) = p.shape();
    let params = match &p.objective.kind {
        ObjectiveKind::FrobeniusDistance { target } => {
            ObjectiveParams::FrobeniusDistance { target: to_rows(target) }
        }
        ObjectiveKind::RowQuadratic { blocks } => {
            ObjectiveParams::RowQuadratic { blocks: blocks.iter().map(to_rows).collect() }
        }
        ObjectiveKind::LinearTrace { c } => ObjectiveParams::LinearTrace { c: to_rows(c) },
        ObjectiveKind::Custom { id, .. } => ObjectiveParams::RegisteredCustom { id: id.clone() },
    };
    Ok(Document {
        m,
        n,
        l: p.affine.len(),
        r: p.r(),
        rank_tol: p.rank_tol,
        tol: p.tol,
        objective: ObjectiveDoc {
            params,
            strong_convexity_modulus: p.objective.strong_convexity,
            convex: Some(p.objective.convex),
        },
        constraints: p
            .affine
            .mats()
            .iter()
            .zip(p.affine.rhs().iter())
            .map(|(a, &b)| ConstraintDoc { matrix: to_rows(a), rhs: b })
            .collect(),
        named_points: file
            .points
            .iter()
            .map(|(label, x)| PointDoc { label: label.clone(), matrix: to_rows(x) })
            .collect(),
    })
}

fn from_document(doc: Document, registry: &ObjectiveRegistry) -> Result<ProblemFile> {
    let shape = (doc.m, doc.n);
    if doc.m == 0 || doc.n == 0 {
        return Err(field_err("m/n", "dimensions must be positive"));
    }
    if doc.r >= doc.m.min(doc.n) {
        return Err(field_err("r", format!("rank bound {} must be below min(m, n) = {}", doc.r, doc.m.min(doc.n))));
    }
    if doc.constraints.len() != doc.l {
        return Err(field_err("l", format!("declares {} constraints but {} are listed", doc.l, doc.constraints.len())));
    }
    let obj = &doc.objective;
    let mut objective = match &obj.params {
        ObjectiveParams::FrobeniusDistance { target } => {
            ObjectiveModel::frobenius_distance(to_matrix(target, shape, "objective.target")?)
        }
        ObjectiveParams::RowQuadratic { blocks } => {
            if doc.m != doc.n || blocks.len() != doc.m {
                return Err(field_err(
                    "objective.blocks",
                    format!("expected {} blocks for a square {}x{} variable", doc.m, doc.m, doc.n),
                ));
            }
            let mats = blocks
                .iter()
                .enumerate()
                .map(|(i, b)| to_matrix(b, (doc.n, doc.n), &format!("objective.blocks[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            ObjectiveModel::row_quadratic(mats)?
        }
        ObjectiveParams::LinearTrace { c } => {
            ObjectiveModel::linear_trace(to_matrix(c, shape, "objective.c")?)
        }
        ObjectiveParams::RegisteredCustom { id } => {
            let mut model = registry
                .get(id)
                .ok_or_else(|| field_err("objective.id", format!("no objective registered as '{id}'")))?;
            if model.shape() != shape {
                return Err(field_err("objective.id", format!("registered objective has shape {:?}", model.shape())));
            }
            if let Some(c) = obj.convex {
                model.convex = c;
            }
            if obj.strong_convexity_modulus.is_some() {
                model.strong_convexity = obj.strong_convexity_modulus;
            }
            model
        }
    };
    if !matches!(obj.params, ObjectiveParams::RegisteredCustom { .. }) {
        if let Some(c) = obj.convex {
            if c != objective.convex {
                return Err(field_err("objective.convex", format!("declared {c}, parameters give {}", objective.convex)));
            }
        }
        if let Some(l) = obj.strong_convexity_modulus {
            match objective.strong_convexity {
                Some(d) if (d - l).abs() <= 1e-9 * d.abs().max(1.0) => objective.strong_convexity = Some(l),
                derived => {
                    return Err(field_err(
                        "objective.strong_convexity_modulus",
                        format!("declared {l}, parameters give {derived:?}"),
                    ))
                }
            }
        }
    }
    let mut mats = Vec::with_capacity(doc.l);
    let mut rhs = Vector::zeros(doc.l);
    for (i, c) in doc.constraints.iter().enumerate() {
        mats.push(to_matrix(&c.matrix, shape, &format!("constraints[{i}].matrix"))?);
        rhs[i] = c.rhs;
    }
    let affine = AffineMap::new(doc.m, doc.n, mats, rhs)?;
    let problem = ProblemSpec::new(objective, affine, doc.r)?
        .with_tolerances(doc.rank_tol, doc.tol)
        .map_err(|e| field_err("rank_tol/tol", e.to_string()))?;
    let mut points = Vec::with_capacity(doc.named_points.len());
    for (i, p) in doc.named_points.iter().enumerate() {
        points.push((p.label.clone(), to_matrix(&p.matrix, shape, &format!("named_points[{i}].matrix"))?));
    }
    Ok(ProblemFile { problem, points })
}

/// Serializes `file` as a pretty-printed JSON document.
pub fn to_json(file: &ProblemFile) -> Result<String> {
    serde_json::to_string_pretty(&document_of(file)?)
        .map_err(|e| field_err("document", e.to_string()))
}

/// Parses a JSON problem document, resolving custom objectives in `registry`.
pub fn from_json_with(text: &str, registry: &ObjectiveRegistry) -> Result<ProblemFile> {
    let doc: Document = serde_json::from_str(text).map_err(|e| {
        field_err(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    from_document(doc, registry)
}

pub fn from_json(text: &str) -> Result<ProblemFile> {
    from_json_with(text, &ObjectiveRegistry::default())
}

pub fn save_problem(file: &ProblemFile, path: impl AsRef<Path>) -> Result<()> {
    let mut text = to_json(file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemFile> {
    load_problem_with(path, &ObjectiveRegistry::default())
}

pub fn load_problem_with(path: impl AsRef<Path>, registry: &ObjectiveRegistry) -> Result<ProblemFile> {
    from_json_with(&std::fs::read_to_string(path)?, registry)
}
