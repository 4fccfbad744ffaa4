//! The JSON document format shared by the command line and the library.
//!
//! A document names one computation subject (a matrix, a complex, a space,
//! a pushout, a product or a bundle) together with the algebra and the
//! coefficient system it needs. Group-ring scalars are written as lists of
//! `{key, re, im}` terms; floats are emitted with 17 significant digits.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::{AlgebraModel, FiniteGroupTable, GroupRingElement, GroupRingMatrix, Key, ModelKind};
use crate::complex::CochainComplex;
use crate::error::{Error, Result};
use crate::spaces::{
    product_space, pushout_assemble, Bundle, BuiltinSpace, ChainMap, CoefficientSystem, EquivariantCWComplex,
    GeneratorImage, Pushout, Subcomplex,
};

pub const VERSION: &str = "l2torsion/1";

/// Which algebra the scalars live in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AlgebraDoc {
    FiniteGroup { table: FiniteGroupTable },
    Torus { rank: usize },
    Mixed { table: FiniteGroupTable, rank: usize },
    Scalars,
}

impl AlgebraDoc {
    pub fn model(&self) -> AlgebraModel {
        match self {
            AlgebraDoc::FiniteGroup { table } => AlgebraModel::finite_group(table.clone()),
            AlgebraDoc::Torus { rank } => AlgebraModel::torus(*rank),
            AlgebraDoc::Mixed { table, rank } => AlgebraModel::mixed(table.clone(), *rank),
            AlgebraDoc::Scalars => AlgebraModel::scalars(),
        }
    }

    pub fn from_model(m: &AlgebraModel) -> Self {
        match m.kind() {
            _ if m.is_trivial() => AlgebraDoc::Scalars,
            ModelKind::FiniteGroup => AlgebraDoc::FiniteGroup { table: m.group().clone() },
            ModelKind::Torus => AlgebraDoc::Torus { rank: m.torus_rank() },
            ModelKind::Mixed => AlgebraDoc::Mixed { table: m.group().clone(), rank: m.torus_rank() },
        }
    }
}

fn one() -> f64 {
    1.0
}

/// One term `(re + i im) * key` of a group-ring element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarDoc {
    pub key: Key,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

pub type ElementDoc = Vec<ScalarDoc>;
/// Row-major nested arrays of elements.
pub type MatrixDoc = Vec<Vec<ElementDoc>>;

fn element_from_doc(e: &ElementDoc, model: &AlgebraModel) -> Result<GroupRingElement> {
    let mut out = GroupRingElement::zero();
    for s in e {
        model.check_key(&s.key)?;
        out.add_term(s.key.clone(), Complex64::new(s.re, s.im));
    }
    Ok(out)
}

fn element_to_doc(e: &GroupRingElement) -> ElementDoc {
    e.terms().map(|(k, c)| ScalarDoc { key: k.clone(), re: c.re, im: c.im }).collect()
}

pub fn matrix_from_doc(m: &MatrixDoc, model: &Arc<AlgebraModel>) -> Result<GroupRingMatrix> {
    let rows = m
        .iter()
        .map(|row| row.iter().map(|e| element_from_doc(e, model)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    GroupRingMatrix::from_rows(model.clone(), rows)
}

/// Like [`matrix_from_doc`], with the shape known in advance; nested arrays
/// cannot express a matrix with no rows.
fn shaped_matrix(m: &MatrixDoc, model: &Arc<AlgebraModel>, rows: usize, cols: usize) -> Result<GroupRingMatrix> {
    if rows == 0 || cols == 0 {
        if m.iter().any(|r| !r.is_empty()) || (m.len() != rows && !m.is_empty()) {
            return Err(Error::Document(format!("expected an empty {rows}x{cols} matrix")));
        }
        return Ok(GroupRingMatrix::zeros(model.clone(), rows, cols));
    }
    let out = matrix_from_doc(m, model)?;
    if out.shape() != (rows, cols) {
        return Err(Error::Document(format!("matrix has shape {:?}, expected ({rows}, {cols})", out.shape())));
    }
    Ok(out)
}

pub fn matrix_to_doc(m: &GroupRingMatrix) -> MatrixDoc {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| element_to_doc(m.get(i, j))).collect()).collect()
}

/// A cochain complex `C^offset -> C^{offset+1} -> ...` over the document algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexDoc {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub offset: i64,
    pub ranks: Vec<usize>,
    pub differentials: Vec<MatrixDoc>,
}

fn default_name() -> String {
    "C".into()
}

/// Image `(re + i im) * key` of one generator of the group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageDoc {
    pub key: Key,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn default_multiplicity() -> usize {
    1
}

/// How the group acts on the coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientDoc {
    /// `l^2` of the group itself; needs a finite or free abelian group.
    Regular,
    /// `C` with trivial action.
    Trivial,
    /// A homomorphism given by generator images.
    Homomorphism {
        target: AlgebraDoc,
        images: Vec<ImageDoc>,
        #[serde(default = "default_multiplicity")]
        multiplicity: usize,
    },
}

impl CoefficientDoc {
    pub fn from_system(h: &CoefficientSystem) -> Self {
        CoefficientDoc::Homomorphism {
            target: AlgebraDoc::from_model(h.target()),
            images: h.images().iter().map(|g| ImageDoc { key: g.key.clone(), re: g.scale.re, im: g.scale.im }).collect(),
            multiplicity: h.multiplicity(),
        }
    }

    pub fn resolve(&self, x: &EquivariantCWComplex) -> Result<CoefficientSystem> {
        match self {
            CoefficientDoc::Regular => CoefficientSystem::regular(&x.group),
            CoefficientDoc::Trivial => Ok(CoefficientSystem::trivial(&x.group)),
            CoefficientDoc::Homomorphism { target, images, multiplicity } => {
                let images = images.iter().map(|g| GeneratorImage { scale: Complex64::new(g.re, g.im), key: g.key.clone() }).collect();
                Ok(CoefficientSystem::new(x.group.clone(), Arc::new(target.model()), images)?.with_multiplicity(*multiplicity))
            }
        }
    }
}

fn resolve(c: &Option<CoefficientDoc>, x: &EquivariantCWComplex) -> Result<CoefficientSystem> {
    c.as_ref().unwrap_or(&CoefficientDoc::Regular).resolve(x)
}

/// A space with its own coefficients, one factor of a product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorDoc {
    pub space: EquivariantCWComplex,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientDoc>,
}

impl FactorDoc {
    pub fn from_builtin(b: &BuiltinSpace) -> Self {
        FactorDoc { space: b.space.clone(), coefficients: Some(CoefficientDoc::from_system(&b.coefficients)) }
    }

    pub fn resolve(&self) -> Result<(EquivariantCWComplex, CoefficientSystem)> {
        let x = validated(&self.space)?;
        let h = resolve(&self.coefficients, &x)?;
        Ok((x, h))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductDoc {
    pub left: FactorDoc,
    pub right: FactorDoc,
}

/// Gluing data `X_1 <- X_0 -> X_2`: `j1` lists where the cells of `X_0` sit
/// in `X_1`, `j2` is a cellular map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushoutDoc {
    pub x0: EquivariantCWComplex,
    pub x1: EquivariantCWComplex,
    pub j1: Subcomplex,
    pub x2: EquivariantCWComplex,
    pub j2: ChainMap,
}

/// Which subject a document carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subject {
    Matrix,
    Complex,
    Space,
    Pushout,
    Product,
    Bundle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex: Option<ComplexDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<EquivariantCWComplex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pushout: Option<PushoutDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<ProductDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<Bundle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientDoc>,
    /// `ln` of the chosen element of the determinant line of `H`.
    #[serde(default)]
    pub sigma_log: f64,
    /// User assertion that the relevant maps are injective on fundamental
    /// groups. Nothing checks it; it only decides whether the theorem applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi1_injective: Option<bool>,
}

fn validated(x: &EquivariantCWComplex) -> Result<EquivariantCWComplex> {
    EquivariantCWComplex::new(x.name.clone(), x.group.clone(), x.cells.clone(), x.boundaries.clone())
}

impl Document {
    fn empty() -> Self {
        Document {
            version: VERSION.into(),
            algebra: None,
            matrix: None,
            complex: None,
            space: None,
            pushout: None,
            product: None,
            bundle: None,
            coefficients: None,
            sigma_log: 0.0,
            pi1_injective: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        if doc.version != VERSION {
            return Err(Error::Document(format!("unsupported version {:?}, expected {VERSION:?}", doc.version)));
        }
        doc.subject()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    pub fn from_matrix(m: &GroupRingMatrix) -> Self {
        Document { algebra: Some(AlgebraDoc::from_model(m.model())), matrix: Some(matrix_to_doc(m)), ..Document::empty() }
    }

    /// Standard inner products only; preferred Gram matrices are not recorded.
    pub fn from_complex(c: &CochainComplex) -> Self {
        Document {
            algebra: Some(AlgebraDoc::from_model(c.model())),
            complex: Some(ComplexDoc {
                name: c.name().to_string(),
                offset: c.offset(),
                ranks: c.ranks(),
                differentials: c.differentials().iter().map(|d| matrix_to_doc(d.matrix())).collect(),
            }),
            ..Document::empty()
        }
    }

    pub fn from_space(x: &EquivariantCWComplex, h: &CoefficientSystem) -> Self {
        Document {
            space: Some(x.clone()),
            coefficients: Some(CoefficientDoc::from_system(h)),
            ..Document::empty()
        }
    }

    pub fn from_builtin(b: &BuiltinSpace) -> Self {
        Document::from_space(&b.space, &b.coefficients)
    }

    pub fn from_product(left: &BuiltinSpace, right: &BuiltinSpace) -> Self {
        Document {
            product: Some(ProductDoc { left: FactorDoc::from_builtin(left), right: FactorDoc::from_builtin(right) }),
            ..Document::empty()
        }
    }

    pub fn from_pushout(p: &Pushout, h: &CoefficientSystem, j1: Subcomplex) -> Self {
        Document {
            pushout: Some(PushoutDoc { x0: p.x0.clone(), x1: p.x1.clone(), j1, x2: p.x2.clone(), j2: p.j2.clone() }),
            coefficients: Some(CoefficientDoc::from_system(h)),
            ..Document::empty()
        }
    }

    pub fn from_bundle(b: &Bundle, h: &CoefficientSystem) -> Self {
        Document { bundle: Some(b.clone()), coefficients: Some(CoefficientDoc::from_system(h)), ..Document::empty() }
    }

    /// The unique subject, or an error naming what is missing or ambiguous.
    pub fn subject(&self) -> Result<Subject> {
        let present: Vec<Subject> = [
            (self.matrix.is_some(), Subject::Matrix),
            (self.complex.is_some(), Subject::Complex),
            (self.space.is_some(), Subject::Space),
            (self.pushout.is_some(), Subject::Pushout),
            (self.product.is_some(), Subject::Product),
            (self.bundle.is_some(), Subject::Bundle),
        ]
        .into_iter()
        .filter_map(|(p, s)| p.then_some(s))
        .collect();
        match present.as_slice() {
            [s] => Ok(*s),
            [] => Err(Error::Document("no computation subject".into())),
            many => Err(Error::Document(format!("exactly one subject allowed, found {many:?}"))),
        }
    }

    fn model(&self) -> Result<Arc<AlgebraModel>> {
        self.algebra
            .as_ref()
            .map(|a| Arc::new(a.model()))
            .ok_or_else(|| Error::Document("this subject needs an algebra block".into()))
    }

    pub fn matrix(&self) -> Result<GroupRingMatrix> {
        let m = self.matrix.as_ref().ok_or_else(|| Error::Document("no matrix block".into()))?;
        matrix_from_doc(m, &self.model()?)
    }

    /// The complex block, or the cochain complex of the space-like subject.
    pub fn complex(&self) -> Result<CochainComplex> {
        if let Some(c) = &self.complex {
            let model = self.model()?;
            if c.differentials.len() + 1 != c.ranks.len() {
                return Err(Error::Document(format!("{} ranks but {} differentials", c.ranks.len(), c.differentials.len())));
            }
            let ms = c
                .differentials
                .iter()
                .enumerate()
                .map(|(j, m)| shaped_matrix(m, &model, c.ranks[j + 1], c.ranks[j]))
                .collect::<Result<Vec<_>>>()?;
            return CochainComplex::from_matrices(model, c.name.clone(), c.offset, &c.ranks, ms);
        }
        let (x, h) = self.space_with_coefficients()?;
        crate::spaces::cochain_with_coefficients(&x, &h)
    }

    /// The space a space, pushout, product or bundle document describes, with
    /// its coefficients.
    pub fn space_with_coefficients(&self) -> Result<(EquivariantCWComplex, CoefficientSystem)> {
        match self.subject()? {
            Subject::Space => {
                let x = validated(self.space.as_ref().expect("subject"))?;
                let h = resolve(&self.coefficients, &x)?;
                Ok((x, h))
            }
            Subject::Pushout => {
                let p = self.pushout()?;
                let h = resolve(&self.coefficients, &p.x)?;
                Ok((p.x, h))
            }
            Subject::Product => {
                let ((x1, h1), (x2, h2)) = self.product()?;
                let x = product_space(&x1, &x2)?;
                let (_, h) = CoefficientSystem::product(&h1, &h2)?;
                Ok((x, h))
            }
            Subject::Bundle => {
                let b = self.bundle()?;
                let e = b.total_space()?;
                let h = resolve(&self.coefficients, &e)?;
                Ok((e, h))
            }
            s => Err(Error::Document(format!("a {s:?} document does not describe a space"))),
        }
    }

    pub fn pushout(&self) -> Result<Pushout> {
        let p = self.pushout.as_ref().ok_or_else(|| Error::Document("no pushout block".into()))?;
        let (x0, x1, x2) = (validated(&p.x0)?, validated(&p.x1)?, validated(&p.x2)?);
        pushout_assemble(&x0, &x1, &p.j1, &x2, &p.j2)
    }

    pub fn pushout_coefficients(&self, p: &Pushout) -> Result<CoefficientSystem> {
        resolve(&self.coefficients, &p.x)
    }

    #[allow(clippy::type_complexity)]
    pub fn product(&self) -> Result<((EquivariantCWComplex, CoefficientSystem), (EquivariantCWComplex, CoefficientSystem))> {
        let p = self.product.as_ref().ok_or_else(|| Error::Document("no product block".into()))?;
        Ok((p.left.resolve()?, p.right.resolve()?))
    }

    pub fn bundle(&self) -> Result<Bundle> {
        let b = self.bundle.as_ref().ok_or_else(|| Error::Document("no bundle block".into()))?;
        Bundle::new(validated(&b.base)?, validated(&b.fiber)?, b.transports.clone())
    }

    pub fn bundle_coefficients(&self, b: &Bundle) -> Result<CoefficientSystem> {
        resolve(&self.coefficients, &b.fiber)
    }
}

/// Pretty JSON with every float written as `{:.16e}`, so that values survive
/// a round trip bit for bit and look the same on every platform.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("documents and reports serialize");
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize, out: &mut String| out.extend(std::iter::repeat_n(' ', 2 * n));
    match v {
        Value::Number(n) if n.is_f64() => out.push_str(&format!("{:.16e}", n.as_f64().expect("f64"))),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Object(o) if o.is_empty() => out.push_str("{}"),
        Value::Array(a) if a.iter().all(|x| !x.is_array() && !x.is_object()) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(x, indent, out);
            }
            out.push(']');
        }
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(indent + 1, out);
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(o) => {
            out.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                pad(indent + 1, out);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(x, indent + 1, out);
                out.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}
