//! 2-D hyperbolic multilateration from RSTDs and error statistics.

use thiserror::Error;

use crate::deployment::{Point, SPEED_OF_LIGHT};
use crate::receiver::RstdMeasurement;

pub const MAX_ITERATIONS: usize = 50;
pub const STEP_TOLERANCE_M: f64 = 1e-3;
/// Weighted RMS residual below which a fix counts as converged.
pub const DEFAULT_RESIDUAL_TOLERANCE_S: f64 = 1e-6;
pub const MAX_CONDITION_NUMBER: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PositionError {
    #[error("at least 2 RSTD measurements are needed for a 2-D fix, got {0}")]
    InsufficientMeasurements(usize),
    #[error("no error samples")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdoaProblem {
    pub reference: Point,
    pub neighbors: Vec<Point>,
    pub rstd_s: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TdoaProblem {
    pub fn new(reference: Point, neighbors: Vec<Point>, rstd_s: Vec<f64>) -> Self {
        let weights = vec![1.0; neighbors.len()];
        Self { reference, neighbors, rstd_s, weights }
    }

    /// Problem from measurements; `position` maps a cell id to its location.
    /// The reference's own zero entry is dropped.
    pub fn from_measurements(
        reference: Point,
        rstds: &[RstdMeasurement],
        position: impl Fn(u16) -> Point,
    ) -> Self {
        let neighbors: Vec<&RstdMeasurement> = rstds.iter().filter(|r| r.neighbor_cell_id != r.reference_cell_id).collect();
        let qualities: Vec<f64> = neighbors.iter().map(|r| r.quality_db).collect();
        Self {
            reference,
            neighbors: neighbors.iter().map(|r| position(r.neighbor_cell_id)).collect(),
            rstd_s: neighbors.iter().map(|r| r.rstd_s).collect(),
            weights: quality_weights(&qualities),
        }
    }

    /// Exact RSTDs for a UE at `x`.
    pub fn noise_free(reference: Point, neighbors: Vec<Point>, x: Point) -> Self {
        let rstd = neighbors
            .iter()
            .map(|p| (x.distance(*p) - x.distance(reference)) / SPEED_OF_LIGHT)
            .collect();
        Self::new(reference, neighbors, rstd)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// `max(quality_db, 0)` normalized to unit mean; uniform when all are zero.
pub fn quality_weights(quality_db: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = quality_db.iter().map(|q| q.max(0.0)).collect();
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    if mean > 0.0 && mean.is_finite() {
        raw.iter().map(|w| w / mean).collect()
    } else {
        vec![1.0; raw.len()]
    }
}

/// Weighted residuals in seconds: `((|x-p_i| - |x-p_ref|)/c - rstd_i) sqrt(w_i)`.
pub fn residual(x: Point, problem: &TdoaProblem) -> Vec<f64> {
    let d_ref = x.distance(problem.reference);
    problem
        .neighbors
        .iter()
        .zip(&problem.rstd_s)
        .zip(&problem.weights)
        .map(|((p, r), w)| ((x.distance(*p) - d_ref) / SPEED_OF_LIGHT - r) * w.sqrt())
        .collect()
}

/// Analytic Jacobian of [`residual`], one `[d/dx, d/dy]` row per neighbor.
pub fn jacobian(x: Point, problem: &TdoaProblem) -> Vec<[f64; 2]> {
    let unit = |p: Point| {
        let d = x - p;
        let n = d.norm().max(1e-9);
        [d.x / n, d.y / n]
    };
    let u_ref = unit(problem.reference);
    problem
        .neighbors
        .iter()
        .zip(&problem.weights)
        .map(|(p, w)| {
            let u = unit(*p);
            let s = w.sqrt() / SPEED_OF_LIGHT;
            [(u[0] - u_ref[0]) * s, (u[1] - u_ref[1]) * s]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionResult {
    pub estimate: Point,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted RMS residual in seconds.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub residual_tolerance_s: f64,
    /// Half-width of the restart grid around the initial point.
    pub restart_radius_m: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tolerance_s: DEFAULT_RESIDUAL_TOLERANCE_S,
            restart_radius_m: 700.0,
        }
    }
}

fn rms(r: &[f64]) -> f64 {
    (r.iter().map(|v| v * v).sum::<f64>() / r.len().max(1) as f64).sqrt()
}

fn cost(x: Point, problem: &TdoaProblem) -> f64 {
    residual(x, problem).iter().map(|v| v * v).sum()
}

/// Condition number of the 2-column Jacobian.
fn condition(j: &[[f64; 2]]) -> f64 {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for row in j {
        a += row[0] * row[0];
        b += row[0] * row[1];
        c += row[1] * row[1];
    }
    let tr = a + c;
    let disc = ((a - c).powi(2) + 4.0 * b * b).sqrt();
    let (hi, lo) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).sqrt()
    }
}

fn gauss_newton(problem: &TdoaProblem, init: Point, opts: &SolverOptions) -> PositionResult {
    let mut x = init;
    let mut f = cost(x, problem);
    let mut iterations = 0;
    let mut step_converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let r = residual(x, problem);
        let j = jacobian(x, problem);
        let (mut a, mut b, mut c, mut gx, mut gy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (row, ri) in j.iter().zip(&r) {
            a += row[0] * row[0];
            b += row[0] * row[1];
            c += row[1] * row[1];
            gx += row[0] * ri;
            gy += row[1] * ri;
        }
        // Small Levenberg damping keeps the normal equations solvable.
        let mu = 1e-9 * (a + c);
        let (a, c) = (a + mu, c + mu);
        let det = a * c - b * b;
        if det <= 0.0 || !det.is_finite() {
            break;
        }
        let mut dx = -(c * gx - b * gy) / det;
        let mut dy = -(a * gy - b * gx) / det;
        let len = dx.hypot(dy);
        if len > opts.restart_radius_m {
            dx *= opts.restart_radius_m / len;
            dy *= opts.restart_radius_m / len;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let cand = Point::new(x.x + t * dx, x.y + t * dy);
            let fc = cost(cand, problem);
            if fc <= f {
                let stagnated = f - fc <= 1e-12 * f.max(1e-300);
                x = cand;
                f = fc;
                accepted = true;
                if t * dx.hypot(dy) < STEP_TOLERANCE_M || stagnated {
                    step_converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            step_converged = true;
        }
        if step_converged {
            break;
        }
    }
    let residual_norm = rms(&residual(x, problem));
    let well_conditioned = condition(&jacobian(x, problem)) <= MAX_CONDITION_NUMBER;
    PositionResult {
        estimate: x,
        converged: step_converged && well_conditioned && residual_norm <= opts.residual_tolerance_s,
        iterations,
        residual_norm,
    }
}

/// Damped Gauss-Newton from `init`, restarting from a 5x5 grid around `init`
/// when the first run does not converge.
pub fn solve(problem: &TdoaProblem, init: Point) -> Result<PositionResult, PositionError> {
    solve_with(problem, init, &SolverOptions::default())
}

pub fn solve_with(problem: &TdoaProblem, init: Point, opts: &SolverOptions) -> Result<PositionResult, PositionError> {
    let effective = problem.weights.iter().filter(|w| **w > 0.0).count();
    if effective < 2 {
        return Err(PositionError::InsufficientMeasurements(effective));
    }
    let mut start = init;
    if std::iter::once(&problem.reference).chain(&problem.neighbors).any(|p| p.distance(start) < 1e-6) {
        start = Point::new(start.x + 1.0, start.y + 1.0);
    }
    let first = gauss_newton(problem, start, opts);
    if first.converged {
        return Ok(first);
    }
    let r = opts.restart_radius_m;
    // Converged first, then inside the search region, then smallest residual.
    let rank = |p: &PositionResult| {
        let inside = p.estimate.distance(init) <= 4.0 * r;
        (!p.converged, !inside, p.residual_norm)
    };
    let mut best = first;
    for i in 0..5 {
        for j in 0..5 {
            let p = Point::new(init.x + r * (i as f64 / 2.0 - 1.0), init.y + r * (j as f64 / 2.0 - 1.0));
            let cand = gauss_newton(problem, p, opts);
            if rank(&cand).partial_cmp(&rank(&best)) == Some(std::cmp::Ordering::Less) {
                best = cand;
            }
        }
    }
    Ok(best)
}

/// Sorted horizontal errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCdf {
    sorted: Vec<f64>,
}

pub fn cdf(errors: &[f64]) -> Result<ErrorCdf, PositionError> {
    if errors.is_empty() {
        return Err(PositionError::Empty);
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ErrorCdf { sorted })
}

impl ErrorCdf {
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Percentile with linear interpolation between order statistics.
    pub fn percentile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 100.0);
        let h = (self.sorted.len() - 1) as f64 * q / 100.0;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        self.sorted[lo] + (h - lo as f64) * (self.sorted[hi] - self.sorted[lo])
    }

    /// Fraction of errors not larger than `threshold_m`.
    pub fn fraction_within(&self, threshold_m: f64) -> f64 {
        self.sorted.partition_point(|e| *e <= threshold_m) as f64 / self.sorted.len() as f64
    }

    /// `(error, probability)` at `n` evenly spaced probabilities from 0 to 1.
    pub fn table(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let p = if n > 1 { i as f64 / (n - 1) as f64 } else { 1.0 };
                (self.percentile(100.0 * p), p)
            })
            .collect()
    }
}

pub fn percentile(cdf: &ErrorCdf, q: f64) -> f64 {
    cdf.percentile(q)
}
