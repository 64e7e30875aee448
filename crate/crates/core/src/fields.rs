//! Layer-potential evaluation of PDE solutions away from the boundary.
//!
//! Every field is a trapezoid sum over `Q` boundary nodes. The kernels are
//! smooth at points kept [`EvalGrid::clearance`] away from the curve, so the
//! sums converge spectrally. No near-singular correction is attempted.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::{BieProblem, BoundaryData, ProblemKind};
use crate::boundary::{BoundaryCurve, BoundaryNodes, Polyline, SIMPLICITY_SAMPLES};
use crate::error::{Error, Result};
use crate::kernels::{
    helmholtz_double_point, helmholtz_fundamental, laplace_double_point, laplace_fundamental, laplace_grad_x,
    navier_t_point, navier_u_point,
};
use crate::trigseries::{CoeffVec, ComplexCoeffVec};

pub const DEFAULT_CLEARANCE: f64 = 0.1;
pub const DEFAULT_FIELD_QUADRATURE: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Interior,
    Exterior,
}

/// Lattice placement of grid points, kept for image output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    /// `(column, row)` of each retained point, row 0 at the top.
    pub cells: Vec<(usize, usize)>,
}

/// Evaluation points on one side of a boundary, each at least `clearance`
/// from the boundary polyline.
#[derive(Debug, Clone)]
pub struct EvalGrid {
    pub points: Vec<[f64; 2]>,
    pub side: Side,
    pub clearance: f64,
    pub quadrature: usize,
    pub lattice: Option<Lattice>,
}

fn dense_polyline(b: &BoundaryCurve) -> Polyline {
    b.polyline(SIMPLICITY_SAMPLES)
}

fn classify(poly: &Polyline, p: [f64; 2], side: Side, clearance: f64) -> Result<()> {
    let inside = poly.contains(p);
    if inside != (side == Side::Interior) {
        return Err(Error::InvalidParameter(format!(
            "point ({:.4}, {:.4}) is not on the {:?} side",
            p[0], p[1], side
        )));
    }
    let distance = poly.distance(p);
    if distance < clearance {
        return Err(Error::NearSingularEvaluation {
            x: p[0],
            y: p[1],
            distance,
            clearance,
        });
    }
    Ok(())
}

fn check_clearance(clearance: f64) -> Result<()> {
    if !(clearance > 0.0 && clearance.is_finite()) {
        return Err(Error::InvalidParameter(format!("clearance {clearance} must be positive")));
    }
    Ok(())
}

impl EvalGrid {
    /// Validates explicit points against the boundary.
    pub fn from_points(b: &BoundaryCurve, side: Side, points: Vec<[f64; 2]>, clearance: f64) -> Result<Self> {
        check_clearance(clearance)?;
        let poly = dense_polyline(b);
        points
            .par_iter()
            .try_for_each(|&p| classify(&poly, p, side, clearance))?;
        Ok(Self {
            points,
            side,
            clearance,
            quadrature: DEFAULT_FIELD_QUADRATURE,
            lattice: None,
        })
    }

    /// `nx × ny` lattice over the boundary's bounding box grown by `margin`,
    /// keeping points on `side` that respect `clearance`.
    pub fn lattice(b: &BoundaryCurve, side: Side, nx: usize, ny: usize, margin: f64, clearance: f64) -> Result<Self> {
        check_clearance(clearance)?;
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter(format!("lattice {nx}x{ny} needs at least 2x2 points")));
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::InvalidParameter(format!("margin {margin} must be non-negative")));
        }
        let poly = dense_polyline(b);
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &poly.pts {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d] - margin);
                hi[d] = hi[d].max(p[d] + margin);
            }
        }
        let hx = (hi[0] - lo[0]) / (nx - 1) as f64;
        let hy = (hi[1] - lo[1]) / (ny - 1) as f64;
        let kept: Vec<((usize, usize), [f64; 2])> = (0..nx * ny)
            .into_par_iter()
            .filter_map(|idx| {
                let (row, col) = (idx / nx, idx % nx);
                let p = [lo[0] + col as f64 * hx, hi[1] - row as f64 * hy];
                classify(&poly, p, side, clearance).ok().map(|_| ((col, row), p))
            })
            .collect();
        let (cells, points) = kept.into_iter().unzip();
        Ok(Self {
            points,
            side,
            clearance,
            quadrature: DEFAULT_FIELD_QUADRATURE,
            lattice: Some(Lattice { nx, ny, cells }),
        })
    }

    pub fn with_quadrature(mut self, q: usize) -> Result<Self> {
        if q < 16 || !q.is_power_of_two() {
            return Err(Error::InsufficientSamples { got: q, need: 16 });
        }
        self.quadrature = q;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Re-checks every point against `b`, which may differ from the curve
    /// the grid was built for.
    pub fn validate_for(&self, b: &BoundaryCurve) -> Result<()> {
        check_clearance(self.clearance)?;
        let poly = dense_polyline(b);
        self.points
            .par_iter()
            .try_for_each(|&p| classify(&poly, p, self.side, self.clearance))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValues {
    Scalar(Vec<f64>),
    Complex(Vec<Complex64>),
    Vector(Vec<[f64; 2]>),
}

impl FieldValues {
    pub fn len(&self) -> usize {
        match self {
            FieldValues::Scalar(v) => v.len(),
            FieldValues::Complex(v) => v.len(),
            FieldValues::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind(&self) -> &'static str {
        match self {
            FieldValues::Scalar(_) => "scalar",
            FieldValues::Complex(_) => "complex",
            FieldValues::Vector(_) => "vector",
        }
    }

    /// Columns written per point: value, real/imag, or the two components.
    fn columns(&self, i: usize) -> Vec<f64> {
        match self {
            FieldValues::Scalar(v) => vec![v[i]],
            FieldValues::Complex(v) => vec![v[i].re, v[i].im],
            FieldValues::Vector(v) => vec![v[i][0], v[i][1]],
        }
    }

    fn column_names(&self, prefix: &str) -> Vec<String> {
        let suffixes: &[&str] = match self {
            FieldValues::Scalar(_) => &[""],
            FieldValues::Complex(_) => &["_re", "_im"],
            FieldValues::Vector(_) => &["_1", "_2"],
        };
        suffixes.iter().map(|s| format!("{prefix}{s}")).collect()
    }

    /// One real per point for plotting: the value, the real part, or the
    /// vector magnitude.
    pub fn plot_channel(&self) -> Vec<f64> {
        match self {
            FieldValues::Scalar(v) => v.clone(),
            FieldValues::Complex(v) => v.iter().map(|c| c.re).collect(),
            FieldValues::Vector(v) => v.iter().map(|p| p[0].hypot(p[1])).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldResult {
    pub points: Vec<[f64; 2]>,
    pub values: FieldValues,
    pub reference: Option<FieldValues>,
    pub abs_error: Option<Vec<f64>>,
}

impl FieldResult {
    pub fn new(points: Vec<[f64; 2]>, values: FieldValues) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        Ok(Self {
            points,
            values,
            reference: None,
            abs_error: None,
        })
    }

    pub fn max_abs_error(&self) -> Option<f64> {
        self.abs_error.as_ref().map(|e| e.iter().fold(0.0_f64, |a, &b| a.max(b)))
    }
}

// ---------------------------------------------------------------------------
// Quadrature

struct Quad {
    nodes: BoundaryNodes,
    /// `(2π/Q)|γ'(s_j)|`
    w: Vec<f64>,
}

fn quad(b: &BoundaryCurve, q: usize) -> Result<Quad> {
    let nodes = b.nodes(q)?;
    let h = 2.0 * std::f64::consts::PI / q as f64;
    let w = nodes.speed.iter().map(|s| h * s).collect();
    Ok(Quad { nodes, w })
}

fn prepare(p: &BieProblem, grid: &EvalGrid, want: Side) -> Result<Quad> {
    if grid.side != want {
        return Err(Error::InvalidParameter(format!(
            "{} field needs an {:?} grid, got {:?}",
            p.kind.name(),
            want,
            grid.side
        )));
    }
    grid.validate_for(&p.boundary)?;
    quad(&p.boundary, grid.quadrature)
}

fn sample_real(c: &CoeffVec, q: usize) -> Result<Vec<f64>> {
    if q < 2 * c.order() + 2 {
        return Err(Error::InsufficientSamples {
            got: q,
            need: 2 * c.order() + 2,
        });
    }
    Ok(c.sample_uniform(q))
}

/// Harmonic field of a Laplace density. IDP uses `𝓓φ`, EDP uses
/// `∫(∂Φ/∂ν + 1)φ ds`, INP and ENP use `𝓢φ`, and PotentialFlow returns
/// the total potential `v₀x₁ + 𝓢φ`.
pub fn laplace_field(p: &BieProblem, density: &CoeffVec, grid: &EvalGrid) -> Result<FieldResult> {
    let side = match p.kind {
        ProblemKind::Idp | ProblemKind::Inp => Side::Interior,
        ProblemKind::Edp | ProblemKind::Enp | ProblemKind::PotentialFlow { .. } => Side::Exterior,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{} is not a Laplace problem",
                p.kind.name()
            )))
        }
    };
    let qd = prepare(p, grid, side)?;
    let phi = sample_real(density, grid.quadrature)?;
    let wphi: Vec<f64> = phi.iter().zip(&qd.w).map(|(a, b)| a * b).collect();
    let nodes = &qd.nodes;
    let kind = p.kind;
    let values = grid
        .points
        .par_iter()
        .map(|&x| {
            let mut u = 0.0;
            for j in 0..nodes.len() {
                let y = nodes.pos[j];
                let k = match kind {
                    ProblemKind::Idp => laplace_double_point(x, y, nodes.normal[j]),
                    ProblemKind::Edp => laplace_double_point(x, y, nodes.normal[j]) + 1.0,
                    _ => laplace_fundamental(x, y),
                };
                u += k * wphi[j];
            }
            if let ProblemKind::PotentialFlow { v0 } = kind {
                u += v0 * x[0];
            }
            u
        })
        .collect();
    FieldResult::new(grid.points.clone(), FieldValues::Scalar(values))
}

/// `v = (v₀, 0) + ∇𝓢φ` with the analytic gradient
/// `∇ₓΦ(x, y) = −(x − y)/(2π|x − y|²)` under the sum.
pub fn velocity_field(p: &BieProblem, density: &CoeffVec, grid: &EvalGrid) -> Result<FieldResult> {
    let ProblemKind::PotentialFlow { v0 } = p.kind else {
        return Err(Error::InvalidParameter(format!(
            "velocity field needs a PotentialFlow problem, got {}",
            p.kind.name()
        )));
    };
    let qd = prepare(p, grid, Side::Exterior)?;
    let phi = sample_real(density, grid.quadrature)?;
    let wphi: Vec<f64> = phi.iter().zip(&qd.w).map(|(a, b)| a * b).collect();
    let nodes = &qd.nodes;
    let values = grid
        .points
        .par_iter()
        .map(|&x| {
            let mut v = [v0, 0.0];
            for j in 0..nodes.len() {
                let g = laplace_grad_x(x, nodes.pos[j]);
                v[0] += g[0] * wphi[j];
                v[1] += g[1] * wphi[j];
            }
            v
        })
        .collect();
    FieldResult::new(grid.points.clone(), FieldValues::Vector(values))
}

/// Interior displacement `u_α = ∫u*_{αβ} t_β ds − ∫t*_{αβ} v_β ds`, with
/// `v` taken from the problem data.
pub fn elastic_field(p: &BieProblem, traction: &[CoeffVec; 2], grid: &EvalGrid) -> Result<FieldResult> {
    let (ProblemKind::Elastostatic { g, nu }, BoundaryData::Displacement(v)) = (&p.kind, &p.data) else {
        return Err(Error::InvalidParameter(format!(
            "elastic field needs an Elastostatic problem, got {}",
            p.kind.name()
        )));
    };
    let (g, nu) = (*g, *nu);
    let qd = prepare(p, grid, Side::Interior)?;
    let q = grid.quadrature;
    let ts = [sample_real(&traction[0], q)?, sample_real(&traction[1], q)?];
    let vs = [sample_real(&v[0], q)?, sample_real(&v[1], q)?];
    let nodes = &qd.nodes;
    let w = &qd.w;
    let values = grid
        .points
        .par_iter()
        .map(|&x| {
            let mut u = [0.0; 2];
            for j in 0..nodes.len() {
                let y = nodes.pos[j];
                let us = navier_u_point(g, nu, x, y);
                let tk = navier_t_point(nu, x, y, nodes.normal[j]);
                for (a, ua) in u.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for b in 0..2 {
                        s += us[a][b] * ts[b][j] - tk[a][b] * vs[b][j];
                    }
                    *ua += s * w[j];
                }
            }
            u
        })
        .collect();
    FieldResult::new(grid.points.clone(), FieldValues::Vector(values))
}

fn helmholtz_params(p: &BieProblem) -> Result<(f64, f64, [f64; 2])> {
    match p.kind {
        ProblemKind::Helmholtz { k, eta, d } => Ok((k, eta, d)),
        _ => Err(Error::InvalidParameter(format!(
            "scattered field needs a Helmholtz problem, got {}",
            p.kind.name()
        ))),
    }
}

/// `u^s(x) = ∫(∂Φ(x, y)/∂ν(y) − iηΦ(x, y)) φ(y) ds(y)`.
pub fn scattered_field(p: &BieProblem, density: &ComplexCoeffVec, grid: &EvalGrid) -> Result<FieldResult> {
    let (k, eta, _) = helmholtz_params(p)?;
    let qd = prepare(p, grid, Side::Exterior)?;
    let q = grid.quadrature;
    if q < 2 * density.order() + 2 {
        return Err(Error::InsufficientSamples {
            got: q,
            need: 2 * density.order() + 2,
        });
    }
    let wphi: Vec<Complex64> = density
        .sample_uniform(q)
        .into_iter()
        .zip(&qd.w)
        .map(|(a, b)| a * b)
        .collect();
    let nodes = &qd.nodes;
    let ieta = Complex64::new(0.0, eta);
    let values = grid
        .points
        .par_iter()
        .map(|&x| {
            let mut u = Complex64::new(0.0, 0.0);
            for j in 0..nodes.len() {
                let y = nodes.pos[j];
                let kern = helmholtz_double_point(k, x, y, nodes.normal[j]) - ieta * helmholtz_fundamental(k, x, y);
                u += kern * wphi[j];
            }
            u
        })
        .collect();
    FieldResult::new(grid.points.clone(), FieldValues::Complex(values))
}

/// Incident plane wave `e^{ik x·d}` at the grid points.
pub fn incident_field(p: &BieProblem, points: &[[f64; 2]]) -> Result<Vec<Complex64>> {
    let (k, _, d) = helmholtz_params(p)?;
    Ok(points
        .iter()
        .map(|x| Complex64::from_polar(1.0, k * (x[0] * d[0] + x[1] * d[1])))
        .collect())
}

/// Total field `u^i + u^s`.
pub fn total_field(p: &BieProblem, density: &ComplexCoeffVec, grid: &EvalGrid) -> Result<FieldResult> {
    let mut r = scattered_field(p, density, grid)?;
    let inc = incident_field(p, &grid.points)?;
    if let FieldValues::Complex(v) = &mut r.values {
        for (a, b) in v.iter_mut().zip(inc) {
            *a += b;
        }
    }
    Ok(r)
}

/// Pointwise `|pred − ref|`, the modulus for complex values and the
/// Euclidean length for vectors.
pub fn error_map(pred: &FieldResult, reference: &FieldResult) -> Result<FieldResult> {
    if pred.points.len() != reference.points.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted points vs {} reference points",
            pred.points.len(),
            reference.points.len()
        )));
    }
    let err: Vec<f64> = match (&pred.values, &reference.values) {
        (FieldValues::Scalar(a), FieldValues::Scalar(b)) => a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect(),
        (FieldValues::Complex(a), FieldValues::Complex(b)) => a.iter().zip(b).map(|(x, y)| (x - y).norm()).collect(),
        (FieldValues::Vector(a), FieldValues::Vector(b)) => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x[0] - y[0]).hypot(x[1] - y[1]))
            .collect(),
        (a, b) => {
            return Err(Error::ShapeMismatch(format!(
                "{} field compared with {} field",
                a.kind(),
                b.kind()
            )))
        }
    };
    Ok(FieldResult {
        points: pred.points.clone(),
        values: pred.values.clone(),
        reference: Some(reference.values.clone()),
        abs_error: Some(err),
    })
}

// ---------------------------------------------------------------------------
// Output

/// CSV with columns `x, y, value…[, ref…, abs_error]`.
pub fn write_field_csv<W: Write>(field: &FieldResult, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend(field.values.column_names("value"));
    if let Some(r) = &field.reference {
        header.extend(r.column_names("reference"));
    }
    if field.abs_error.is_some() {
        header.push("abs_error".into());
    }
    wr.write_record(&header).map_err(csv_err)?;
    for (i, p) in field.points.iter().enumerate() {
        let mut row = vec![p[0], p[1]];
        row.extend(field.values.columns(i));
        if let Some(r) = &field.reference {
            row.extend(r.columns(i));
        }
        if let Some(e) = &field.abs_error {
            row.push(e[i]);
        }
        wr.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Piecewise-linear approximation of a perceptually ordered colormap.
fn colormap(s: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let s = if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.0 };
    let x = s * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mut c = [0u8; 3];
    for (ch, out) in c.iter_mut().enumerate() {
        *out = (STOPS[i][ch] + f * (STOPS[i + 1][ch] - STOPS[i][ch])).round() as u8;
    }
    c
}

/// Renders one value per lattice point as a colormapped PNG, scaled
/// linearly between the data minimum and maximum. Cells without a point
/// are white.
pub fn write_field_png(grid: &EvalGrid, values: &[f64], path: &Path) -> Result<()> {
    let lat = grid
        .lattice
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("image output needs a lattice grid".into()))?;
    if values.len() != lat.cells.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} lattice points",
            values.len(),
            lat.cells.len()
        )));
    }
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut img = image::RgbImage::from_pixel(lat.nx as u32, lat.ny as u32, image::Rgb([255, 255, 255]));
    for (&(col, row), &v) in lat.cells.iter().zip(values) {
        img.put_pixel(col as u32, row as u32, image::Rgb(colormap((v - lo) / span)));
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), [68, 1, 84]);
        assert_eq!(colormap(1.0), [253, 231, 37]);
        assert_eq!(colormap(f64::NAN), [68, 1, 84]);
    }

    #[test]
    fn lattice_respects_side_and_clearance() {
        let b = BoundaryCurve::circle([0.0, 0.0], 1.0, 2).unwrap();
        let g = EvalGrid::lattice(&b, Side::Interior, 41, 41, 0.0, 0.1).unwrap();
        assert!(!g.is_empty());
        assert!(g.points.iter().all(|p| p[0].hypot(p[1]) <= 0.9 + 1e-6));
        let e = EvalGrid::lattice(&b, Side::Exterior, 41, 41, 1.0, 0.1).unwrap();
        assert!(e.points.iter().all(|p| p[0].hypot(p[1]) >= 1.1 - 1e-6));
        assert_eq!(e.lattice.as_ref().unwrap().cells.len(), e.len());
    }

    #[test]
    fn explicit_points_checked() {
        let b = BoundaryCurve::circle([0.0, 0.0], 1.0, 2).unwrap();
        let err = EvalGrid::from_points(&b, Side::Interior, vec![[0.95, 0.0]], 0.1).unwrap_err();
        assert!(matches!(err, Error::NearSingularEvaluation { .. }));
        let err = EvalGrid::from_points(&b, Side::Interior, vec![[2.0, 0.0]], 0.1).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        assert!(EvalGrid::from_points(&b, Side::Exterior, vec![[2.0, 0.0]], 0.1).is_ok());
    }
}
