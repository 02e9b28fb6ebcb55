//! Radial functions on log-uniform grids.
//!
//! A [`RadialField`] carries its samples, a model of the function near the
//! origin (finite with a quadratic extension, or a known power singularity),
//! and a power-law tail model `A ρ^(-γ) (ln ρ)^κ` valid beyond the last node.
//! The tail model is what lets quadrature and quasinorm computations treat
//! the whole half-line instead of truncating at the grid boundary.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("grid needs at least {min} nodes, got {actual}")]
    TooFewNodes { min: usize, actual: usize },
    #[error("grid radii must be positive and increasing (node {index})")]
    BadRadii { index: usize },
    #[error("grid is not log-uniform at node {index}: step {step} vs {expected}")]
    NotLogUniform { index: usize, step: f64, expected: f64 },
    #[error("value at node {index} is not finite: {value}")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("field declared nonnegative has negative value {value} at node {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("values length {values} does not match grid length {grid}")]
    LengthMismatch { values: usize, grid: usize },
    #[error("tail model invalid: amplitude {amplitude}, exponent {exponent}, log_power {log_power}")]
    BadTailModel {
        amplitude: f64,
        exponent: f64,
        log_power: f64,
    },
    #[error("fractional power {exponent} of a field with negative values")]
    FractionalPowerOfSignedField { exponent: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },
}

impl From<std::io::Error> for FieldError {
    fn from(e: std::io::Error) -> Self {
        FieldError::Io(e.to_string())
    }
}

/// Strictly increasing, log-uniform radii `ρ_1 < … < ρ_N` with the ambient
/// dimension they discretize.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    n: u32,
    log_step: f64,
}

/// Relative tolerance for the log-uniformity of loaded grids.
const LOG_UNIFORM_TOL: f64 = 1e-12;

pub const MIN_GRID_NODES: usize = 16;

impl RadialGrid {
    /// Log-uniform grid of `count` nodes on `[rho_min, rho_max]`.
    pub fn new(n: u32, rho_min: f64, rho_max: f64, count: usize) -> Result<Arc<Self>, FieldError> {
        if count < MIN_GRID_NODES {
            return Err(FieldError::TooFewNodes {
                min: MIN_GRID_NODES,
                actual: count,
            });
        }
        if !(rho_min > 0.0 && rho_max > rho_min && rho_min.is_finite() && rho_max.is_finite()) {
            return Err(FieldError::BadRadii { index: 0 });
        }
        let log_step = (rho_max / rho_min).ln() / (count - 1) as f64;
        let ln_min = rho_min.ln();
        let mut nodes: Vec<f64> = (0..count)
            .map(|i| (ln_min + i as f64 * log_step).exp())
            .collect();
        nodes[0] = rho_min;
        nodes[count - 1] = rho_max;
        Ok(Arc::new(Self { nodes, n, log_step }))
    }

    /// Default laboratory grid: 4096 nodes spanning `[1e-4, 1e6]`.
    pub fn standard(n: u32) -> Arc<Self> {
        Self::new(n, 1e-4, 1e6, 4096).expect("standard grid parameters are valid")
    }

    /// Wraps explicit radii, verifying positivity, monotonicity, and
    /// log-uniformity within `1e-12`.
    pub fn from_nodes(n: u32, nodes: Vec<f64>) -> Result<Arc<Self>, FieldError> {
        if nodes.len() < MIN_GRID_NODES {
            return Err(FieldError::TooFewNodes {
                min: MIN_GRID_NODES,
                actual: nodes.len(),
            });
        }
        if !(nodes[0] > 0.0 && nodes[0].is_finite()) {
            return Err(FieldError::BadRadii { index: 0 });
        }
        let log_step = (nodes[nodes.len() - 1] / nodes[0]).ln() / (nodes.len() - 1) as f64;
        for i in 1..nodes.len() {
            if !(nodes[i].is_finite() && nodes[i] > nodes[i - 1]) {
                return Err(FieldError::BadRadii { index: i });
            }
            let step = (nodes[i] / nodes[i - 1]).ln();
            if (step - log_step).abs() > LOG_UNIFORM_TOL * log_step.max(1e-300) {
                return Err(FieldError::NotLogUniform {
                    index: i,
                    step,
                    expected: log_step,
                });
            }
        }
        Ok(Arc::new(Self { nodes, n, log_step }))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    pub fn rho_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn rho_max(&self) -> f64 {
        *self.nodes.last().expect("grid is nonempty")
    }

    /// Index of the last node at or below `rho`, if any.
    pub fn bracket(&self, rho: f64) -> Option<usize> {
        if rho < self.nodes[0] {
            return None;
        }
        let i = ((rho / self.nodes[0]).ln() / self.log_step).floor() as usize;
        let i = i.min(self.len() - 1);
        // Guard against rounding at node boundaries.
        if self.nodes[i] > rho {
            Some(i - 1)
        } else if i + 1 < self.len() && self.nodes[i + 1] <= rho {
            Some(i + 1)
        } else {
            Some(i)
        }
    }
}

/// Far-field model `f(ρ) ≈ amplitude · ρ^(-exponent) · (ln ρ)^(log_power)`
/// for `ρ` beyond the last grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub amplitude: f64,
    pub exponent: f64,
    pub log_power: f64,
}

impl TailModel {
    pub fn new(amplitude: f64, exponent: f64, log_power: f64) -> Result<Self, FieldError> {
        let ok = amplitude.is_finite()
            && exponent.is_finite()
            && log_power.is_finite()
            && log_power >= 0.0
            && (amplitude == 0.0 || exponent > 0.0);
        if !ok {
            return Err(FieldError::BadTailModel {
                amplitude,
                exponent,
                log_power,
            });
        }
        Ok(Self {
            amplitude,
            exponent,
            log_power,
        })
    }

    /// A zero tail: the field vanishes beyond the grid.
    pub fn zero() -> Self {
        Self {
            amplitude: 0.0,
            exponent: 1.0,
            log_power: 0.0,
        }
    }

    /// Pure power tail `A ρ^(-γ)`.
    pub fn power(amplitude: f64, exponent: f64) -> Result<Self, FieldError> {
        Self::new(amplitude, exponent, 0.0)
    }

    pub fn eval(&self, rho: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let log_factor = if self.log_power == 0.0 {
            1.0
        } else {
            rho.ln().powf(self.log_power)
        };
        self.amplitude * rho.powf(-self.exponent) * log_factor
    }

    /// Tail of `f^e`.
    pub fn pow(&self, e: f64) -> Result<Self, FieldError> {
        if self.amplitude < 0.0 && e.fract() != 0.0 {
            return Err(FieldError::FractionalPowerOfSignedField { exponent: e });
        }
        Self::new(self.amplitude.powf(e), self.exponent * e, self.log_power * e)
    }

    /// Tail of `f · g`.
    pub fn mul(&self, other: &Self) -> Result<Self, FieldError> {
        Self::new(
            self.amplitude * other.amplitude,
            self.exponent + other.exponent,
            self.log_power + other.log_power,
        )
    }
}

/// Behavior of the field on `[0, ρ_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OriginModel {
    /// Finite value with the even extension `f(t) ≈ f(0) + ½ f''(0) t²`;
    /// the curvature is inferred from the first node.
    Quadratic { value: f64 },
    /// Power singularity at the origin; the local exponent is inferred from
    /// the first two nodes.
    SingularPower,
}

/// A radial function: samples on a [`RadialGrid`], an origin model, and a
/// [`TailModel`] past the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    origin: OriginModel,
    tail: TailModel,
    nonnegative: bool,
}

impl RadialField {
    pub fn new(
        grid: Arc<RadialGrid>,
        values: Vec<f64>,
        origin: OriginModel,
        tail: TailModel,
    ) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                values: values.len(),
                grid: grid.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(FieldError::NonFiniteValue { index, value });
            }
        }
        Ok(Self {
            grid,
            values,
            origin,
            tail,
            nonnegative: false,
        })
    }

    /// Samples a closed-form function on the grid.
    pub fn sample(
        grid: Arc<RadialGrid>,
        f: impl Fn(f64) -> f64,
        origin: OriginModel,
        tail: TailModel,
    ) -> Result<Self, FieldError> {
        let values = grid.nodes().iter().map(|&rho| f(rho)).collect();
        Self::new(grid, values, origin, tail)
    }

    /// Declares the field nonnegative, validating every sample.
    pub fn declare_nonnegative(mut self) -> Result<Self, FieldError> {
        for (index, &value) in self.values.iter().enumerate() {
            if value < 0.0 {
                return Err(FieldError::NegativeValue { index, value });
            }
        }
        self.nonnegative = true;
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> OriginModel {
        self.origin
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn set_tail(&mut self, tail: TailModel) {
        self.tail = tail;
    }

    /// `f(0)` when the origin model is finite.
    pub fn value_at_zero(&self) -> Option<f64> {
        match self.origin {
            OriginModel::Quadratic { value } => Some(value),
            OriginModel::SingularPower => None,
        }
    }

    /// Local power exponent `g` with `f ≈ f(ρ_1) (ρ/ρ_1)^(-g)` near the
    /// origin, inferred from the first two nodes. Only meaningful for the
    /// singular origin model.
    pub fn origin_power_exponent(&self) -> f64 {
        let (r0, r1) = (self.grid.nodes()[0], self.grid.nodes()[1]);
        let (f0, f1) = (self.values[0], self.values[1]);
        if f0 <= 0.0 || f1 <= 0.0 {
            return 0.0;
        }
        -(f1 / f0).ln() / (r1 / r0).ln()
    }

    /// Evaluates the field at any `rho > 0`: origin model below the first
    /// node, log-log interpolation inside the grid, tail model beyond.
    pub fn eval(&self, rho: f64) -> f64 {
        assert!(rho > 0.0 && rho.is_finite(), "eval requires rho > 0");
        let nodes = self.grid.nodes();
        if rho < nodes[0] {
            return match self.origin {
                OriginModel::Quadratic { value } => {
                    let c2 = (self.values[0] - value) / (nodes[0] * nodes[0]);
                    value + c2 * rho * rho
                }
                OriginModel::SingularPower => {
                    let g = self.origin_power_exponent();
                    self.values[0] * (rho / nodes[0]).powf(-g)
                }
            };
        }
        if rho > self.grid.rho_max() {
            // Within a couple of steps of the edge, extrapolating the last
            // segment is continuous; the tail model is asymptotic and can
            // carry a percent-level offset at the boundary (its subleading
            // corrections decay only logarithmically in the critical case).
            let len = nodes.len();
            if rho <= self.grid.rho_max() * (2.0 * self.grid.log_step()).exp() {
                return interpolate_segment(
                    nodes[len - 2],
                    nodes[len - 1],
                    self.values[len - 2],
                    self.values[len - 1],
                    rho,
                );
            }
            return self.tail.eval(rho);
        }
        let i = self.grid.bracket(rho).expect("rho is inside the grid");
        if i + 1 == nodes.len() {
            return self.values[i];
        }
        interpolate_segment(
            nodes[i],
            nodes[i + 1],
            self.values[i],
            self.values[i + 1],
            rho,
        )
    }

    /// Like [`RadialField::eval`] but with cubic log-log interpolation
    /// inside the grid (falling back to the two-point rule near the
    /// boundary or where values change sign). Exact on pure powers, and
    /// smooth enough that finite differences of a resampled field do not
    /// pick up segment kinks.
    pub fn eval_smooth(&self, rho: f64) -> f64 {
        let nodes = self.grid.nodes();
        if rho < nodes[0] || rho > self.grid.rho_max() {
            return self.eval(rho);
        }
        let i = self.grid.bracket(rho).expect("rho is inside the grid");
        if i == 0 || i + 2 >= nodes.len() {
            return self.eval(rho);
        }
        let window = &self.values[i - 1..=i + 2];
        if window.iter().any(|&v| v <= 0.0) {
            return self.eval(rho);
        }
        // Uniform four-point Lagrange interpolation of ln f in t = ln rho.
        let h = self.grid.log_step();
        let x = (rho / nodes[i]).ln() / h;
        let (l0, l1, l2, l3) = (
            window[0].ln(),
            window[1].ln(),
            window[2].ln(),
            window[3].ln(),
        );
        let c0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
        let c1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
        let c2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
        let c3 = (x + 1.0) * x * (x - 1.0) / 6.0;
        (c0 * l0 + c1 * l1 + c2 * l2 + c3 * l3).exp()
    }

    /// Pointwise power `f^e`, with the tail and origin models transformed
    /// consistently. Fractional powers require a nonnegative field.
    pub fn powf(&self, e: f64) -> Result<Self, FieldError> {
        let fractional = e.fract() != 0.0;
        if fractional && self.values.iter().any(|&v| v < 0.0) {
            return Err(FieldError::FractionalPowerOfSignedField { exponent: e });
        }
        let values = self.values.iter().map(|&v| v.powf(e)).collect();
        let origin = match self.origin {
            OriginModel::Quadratic { value } => OriginModel::Quadratic {
                value: value.powf(e),
            },
            OriginModel::SingularPower => OriginModel::SingularPower,
        };
        let mut out = Self::new(self.grid.clone(), values, origin, self.tail.pow(e)?)?;
        out.nonnegative = self.nonnegative;
        Ok(out)
    }

    /// Pointwise product on a shared grid.
    pub fn mul(&self, other: &Self) -> Result<Self, FieldError> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| x * y)
            .collect();
        let origin = match (self.origin, other.origin) {
            (OriginModel::Quadratic { value: a }, OriginModel::Quadratic { value: b }) => {
                OriginModel::Quadratic { value: a * b }
            }
            _ => OriginModel::SingularPower,
        };
        let mut out = Self::new(
            self.grid.clone(),
            values,
            origin,
            self.tail.mul(&other.tail)?,
        )?;
        out.nonnegative = self.nonnegative && other.nonnegative;
        Ok(out)
    }

    /// Pointwise linear combination `α·self + β·other` on a shared grid.
    /// The tail keeps the slower-decaying summand's model.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self, FieldError> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| alpha * x + beta * y)
            .collect();
        let origin = match (self.origin, other.origin) {
            (OriginModel::Quadratic { value: a }, OriginModel::Quadratic { value: b }) => {
                OriginModel::Quadratic {
                    value: alpha * a + beta * b,
                }
            }
            _ => OriginModel::SingularPower,
        };
        let ta = TailModel {
            amplitude: alpha * self.tail.amplitude,
            ..self.tail
        };
        let tb = TailModel {
            amplitude: beta * other.tail.amplitude,
            ..other.tail
        };
        let tail = if tb.amplitude == 0.0 {
            ta
        } else if ta.amplitude == 0.0 {
            tb
        } else if ta.exponent == tb.exponent && ta.log_power == tb.log_power {
            TailModel {
                amplitude: ta.amplitude + tb.amplitude,
                ..ta
            }
        } else if ta.exponent < tb.exponent
            || (ta.exponent == tb.exponent && ta.log_power >= tb.log_power)
        {
            ta
        } else {
            tb
        };
        Self::new(self.grid.clone(), values, origin, tail)
    }

    pub fn scale(&self, c: f64) -> Result<Self, FieldError> {
        let values = self.values.iter().map(|&v| c * v).collect();
        let origin = match self.origin {
            OriginModel::Quadratic { value } => OriginModel::Quadratic { value: c * value },
            OriginModel::SingularPower => OriginModel::SingularPower,
        };
        let tail = TailModel {
            amplitude: c * self.tail.amplitude,
            ..self.tail
        };
        let mut out = Self::new(self.grid.clone(), values, origin, tail)?;
        out.nonnegative = self.nonnegative && c >= 0.0;
        Ok(out)
    }

    /// Writes the `rho,value` CSV next to a JSON header file carrying the
    /// grid metadata and models: `stem.csv` and `stem.json`. Decimals carry
    /// 17 significant digits so the round trip is bit-exact.
    pub fn save(&self, stem: &Path) -> Result<(), FieldError> {
        std::fs::write(stem.with_extension("csv"), self.to_csv_string())?;
        let meta = serde_json::to_string_pretty(&self.metadata())
            .expect("field metadata serializes");
        std::fs::write(stem.with_extension("json"), meta + "\n")?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 48 + 16);
        out.push_str("rho,value\n");
        for (rho, value) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", format_g17(*rho), format_g17(*value));
        }
        out
    }

    pub fn metadata(&self) -> FieldMetadata {
        FieldMetadata {
            n: self.grid.dim(),
            rho_min: self.grid.rho_min(),
            rho_max: self.grid.rho_max(),
            points: self.grid.len(),
            origin: self.origin,
            tail: self.tail,
            nonnegative: self.nonnegative,
        }
    }

    /// Loads a field from `stem.csv` + `stem.json`.
    pub fn load(stem: &Path) -> Result<Self, FieldError> {
        let csv_path = stem.with_extension("csv");
        let json_path = stem.with_extension("json");
        let meta_text = std::fs::read_to_string(&json_path)?;
        let meta: FieldMetadata =
            serde_json::from_str(&meta_text).map_err(|e| FieldError::Parse {
                file: json_path.display().to_string(),
                message: e.to_string(),
            })?;
        let csv_text = std::fs::read_to_string(&csv_path)?;
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in csv_text.lines().enumerate() {
            if lineno == 0 {
                if line.trim() != "rho,value" {
                    return Err(FieldError::Parse {
                        file: csv_path.display().to_string(),
                        message: format!("expected header 'rho,value', got '{line}'"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let parse = |s: Option<&str>| -> Result<f64, FieldError> {
                s.ok_or_else(|| FieldError::Parse {
                    file: csv_path.display().to_string(),
                    message: format!("line {} is missing a column", lineno + 1),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| FieldError::Parse {
                    file: csv_path.display().to_string(),
                    message: format!("line {}: {e}", lineno + 1),
                })
            };
            nodes.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        if nodes.len() != meta.points {
            return Err(FieldError::Parse {
                file: csv_path.display().to_string(),
                message: format!("expected {} rows, got {}", meta.points, nodes.len()),
            });
        }
        let grid = RadialGrid::from_nodes(meta.n, nodes)?;
        let mut field = Self::new(grid, values, meta.origin, meta.tail)?;
        if meta.nonnegative {
            field = field.declare_nonnegative()?;
        }
        Ok(field)
    }
}

/// JSON header block stored beside the CSV samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMetadata {
    pub n: u32,
    pub rho_min: f64,
    pub rho_max: f64,
    pub points: usize,
    pub origin: OriginModel,
    pub tail: TailModel,
    pub nonnegative: bool,
}

/// Log-log interpolation on one segment, falling back to linear
/// interpolation when the endpoint values change sign or vanish.
pub(crate) fn interpolate_segment(r0: f64, r1: f64, f0: f64, f1: f64, rho: f64) -> f64 {
    let theta = (rho / r0).ln() / (r1 / r0).ln();
    if f0 > 0.0 && f1 > 0.0 {
        (((1.0 - theta) * f0.ln()) + theta * f1.ln()).exp()
    } else if f0 < 0.0 && f1 < 0.0 {
        -((((1.0 - theta) * (-f0).ln()) + theta * (-f1).ln()).exp())
    } else {
        (1.0 - theta) * f0 + theta * f1
    }
}

/// Formats a float with 17 significant digits (bit-exact round trip).
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}
