//! JSON forms of sampled functions, Bloch families, operators and LLE waves.
//!
//! Complex numbers are written as `[re, im]`; plain numbers are read as real.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{BlochFamily, FamilyKind, QuadratureRule};
use crate::error::{Error, Result};
use crate::grids::{LineFunction, LineGrid, PeriodicFunction, PeriodicGrid};
use crate::lle::{LLEParams, PeriodicWave};
use crate::semigroup::{OperatorSpec, PeriodicCoefficient};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexJson {
    Pair([f64; 2]),
    Real(f64),
}

impl From<ComplexJson> for Complex64 {
    fn from(c: ComplexJson) -> Self {
        match c {
            ComplexJson::Pair([re, im]) => Complex64::new(re, im),
            ComplexJson::Real(re) => Complex64::new(re, 0.0),
        }
    }
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        ComplexJson::Pair([z.re, z.im])
    }
}

fn to_json_values(v: &[Complex64]) -> Vec<ComplexJson> {
    v.iter().map(|&z| z.into()).collect()
}

fn from_json_values(v: Vec<ComplexJson>) -> Vec<Complex64> {
    v.into_iter().map(Into::into).collect()
}

/// A function on either domain.
#[derive(Debug, Clone, PartialEq)]
pub enum SampledFunction {
    Periodic(PeriodicFunction),
    Line(LineFunction),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DomainKind {
    Periodic,
    Line,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FunctionJson {
    kind: DomainKind,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dx: Option<f64>,
    #[serde(default = "one")]
    dim: usize,
    values: Vec<ComplexJson>,
}

fn one() -> usize {
    1
}

fn missing(field: &str) -> Error {
    Error::InvalidInput(format!("missing field {field:?}"))
}

impl SampledFunction {
    pub fn to_json(&self) -> Result<String> {
        let j = match self {
            Self::Periodic(g) => FunctionJson {
                kind: DomainKind::Periodic,
                period: Some(g.grid().period()),
                n: Some(g.grid().periods()),
                m: Some(g.grid().points_per_period()),
                half_width: None,
                dx: None,
                dim: g.dim(),
                values: to_json_values(g.values()),
            },
            Self::Line(f) => FunctionJson {
                kind: DomainKind::Line,
                period: None,
                n: None,
                m: None,
                half_width: Some(f.grid().half_width()),
                dx: Some(f.grid().spacing()),
                dim: f.dim(),
                values: to_json_values(f.values()),
            },
        };
        Ok(serde_json::to_string(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: FunctionJson = serde_json::from_str(s)?;
        let values = from_json_values(j.values);
        match j.kind {
            DomainKind::Periodic => {
                let grid = PeriodicGrid::new(
                    j.period.ok_or_else(|| missing("T"))?,
                    j.n.unwrap_or(1),
                    j.m.ok_or_else(|| missing("M"))?,
                )?;
                Ok(Self::Periodic(PeriodicFunction::new(grid, j.dim, values)?))
            }
            DomainKind::Line => {
                let grid = LineGrid::new(j.half_width.ok_or_else(|| missing("X"))?, j.dx.ok_or_else(|| missing("dx"))?)?;
                Ok(Self::Line(LineFunction::new(grid, j.dim, values)?))
            }
        }
    }

    pub fn into_line(self) -> Result<LineFunction> {
        match self {
            Self::Line(f) => Ok(f),
            Self::Periodic(_) => Err(Error::InvalidInput("expected a line function".into())),
        }
    }

    pub fn into_periodic(self) -> Result<PeriodicFunction> {
        match self {
            Self::Periodic(g) => Ok(g),
            Self::Line(_) => Err(Error::InvalidInput("expected a periodic function".into())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FamilyJson {
    #[serde(rename = "T")]
    period: f64,
    #[serde(rename = "M")]
    m: usize,
    dim: usize,
    kind: DomainKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<String>,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dx: Option<f64>,
    xi: Vec<f64>,
    weights: Vec<f64>,
    slices: Vec<Vec<ComplexJson>>,
}

pub fn family_to_json(family: &BlochFamily) -> Result<String> {
    let (kind, n, rule, half_width, dx) = match family.kind() {
        FamilyKind::Torus { periods } => (DomainKind::Periodic, Some(*periods), None, None, None),
        FamilyKind::Line { rule, grid } => (
            DomainKind::Line,
            None,
            Some(rule.name().to_string()),
            Some(grid.half_width()),
            Some(grid.spacing()),
        ),
    };
    let j = FamilyJson {
        period: family.period(),
        m: family.points_per_period(),
        dim: family.dim(),
        kind,
        n,
        rule,
        half_width,
        dx,
        xi: family.xi().to_vec(),
        weights: family.weights().to_vec(),
        slices: family.slices().iter().map(|s| to_json_values(s)).collect(),
    };
    Ok(serde_json::to_string(&j)?)
}

pub fn family_from_json(s: &str) -> Result<BlochFamily> {
    let j: FamilyJson = serde_json::from_str(s)?;
    let kind = match j.kind {
        DomainKind::Periodic => FamilyKind::Torus { periods: j.n.ok_or_else(|| missing("n"))? },
        DomainKind::Line => FamilyKind::Line {
            rule: j.rule.as_deref().unwrap_or("midpoint").parse::<QuadratureRule>()?,
            grid: LineGrid::new(j.half_width.ok_or_else(|| missing("X"))?, j.dx.ok_or_else(|| missing("dx"))?)?,
        },
    };
    BlochFamily::new(
        j.period,
        j.m,
        j.dim,
        kind,
        j.xi,
        j.weights,
        j.slices.into_iter().map(from_json_values).collect(),
    )
}

type MatrixJson = Vec<Vec<ComplexJson>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CoeffJson {
    #[serde(rename = "T")]
    period: f64,
    #[serde(rename = "M")]
    m: usize,
    values: Vec<MatrixJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OperatorJson {
    dim: usize,
    symbol: Vec<MatrixJson>,
    coeff: Option<CoeffJson>,
}

fn matrix_to_json(m: &DMatrix<Complex64>) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

fn matrix_from_json(rows: MatrixJson, dim: usize) -> Result<DMatrix<Complex64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidInput(format!("expected a {dim}x{dim} matrix")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j].into()))
}

pub fn operator_to_json(op: &OperatorSpec) -> Result<String> {
    let coeff = op.coefficient().map(|v| CoeffJson {
        period: v.period(),
        m: v.points(),
        values: v.samples().iter().map(matrix_to_json).collect(),
    });
    let j = OperatorJson { dim: op.dim(), symbol: op.symbol().iter().map(matrix_to_json).collect(), coeff };
    Ok(serde_json::to_string(&j)?)
}

pub fn operator_from_json(s: &str) -> Result<OperatorSpec> {
    let j: OperatorJson = serde_json::from_str(s)?;
    let symbol = j.symbol.into_iter().map(|m| matrix_from_json(m, j.dim)).collect::<Result<_>>()?;
    let coeff = match j.coeff {
        Some(c) => {
            if c.values.len() != c.m {
                return Err(Error::InvalidInput(format!("coefficient lists {} samples, M = {}", c.values.len(), c.m)));
            }
            let samples = c.values.into_iter().map(|m| matrix_from_json(m, j.dim)).collect::<Result<_>>()?;
            Some(PeriodicCoefficient::new(c.period, samples)?)
        }
        None => None,
    };
    OperatorSpec::new(j.dim, symbol, coeff)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WaveJson {
    params: LLEParams,
    #[serde(rename = "M")]
    m: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    residual: f64,
}

pub fn wave_to_json(wave: &PeriodicWave) -> Result<String> {
    let j = WaveJson { params: *wave.params(), m: wave.points(), u: wave.u(), v: wave.v(), residual: wave.residual() };
    Ok(serde_json::to_string(&j)?)
}

/// The stored residual is recomputed, not trusted.
pub fn wave_from_json(s: &str) -> Result<PeriodicWave> {
    let j: WaveJson = serde_json::from_str(s)?;
    if j.u.len() != j.m {
        return Err(Error::InvalidInput(format!("wave lists {} samples, M = {}", j.u.len(), j.m)));
    }
    PeriodicWave::from_components(j.params, &j.u, &j.v)
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}
