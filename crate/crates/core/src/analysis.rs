//! Decay-curve fitting.
//!
//! Survival data is fit to A * alpha^x + B, where x counts dynamic blocks.
//! The fitter is a small damped least-squares loop (Levenberg-Marquardt
//! with multiplicative damping) with all three parameters clamped to
//! [0, 1]; probabilities make the box both natural and effective at
//! keeping the exponential out of pathological corners. Weighted by
//! 1/stderr^2 with a configurable floor so exact synthetic curves (zero
//! scatter) remain fittable.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbproto::{BlockKind, DdMode};

/// One survival curve: block counts, seed-averaged survivals, and the
/// standard error of each mean.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayCurve {
    x: Vec<f64>,
    mean: Vec<f64>,
    stderr: Vec<f64>,
}

impl DecayCurve {
    pub fn new(x: Vec<f64>, mean: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if x.len() != mean.len() || x.len() != stderr.len() {
            return Err(Error::Dimension {
                context: "decay curve columns",
                expected: x.len(),
                got: mean.len().max(stderr.len()),
            });
        }
        for (&xi, (&yi, &si)) in x.iter().zip(mean.iter().zip(stderr.iter())) {
            if !xi.is_finite() || xi < 0.0 {
                return Err(Error::Validation(format!("bad abscissa {xi}")));
            }
            if !yi.is_finite() {
                return Err(Error::Validation(format!("bad survival {yi} at x {xi}")));
            }
            if !si.is_finite() || si < 0.0 {
                return Err(Error::Validation(format!("bad stderr {si} at x {xi}")));
            }
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        Ok(Self {
            x: order.iter().map(|&i| x[i]).collect(),
            mean: order.iter().map(|&i| mean[i]).collect(),
            stderr: order.iter().map(|&i| stderr[i]).collect(),
        })
    }

    /// From (length, mean, stderr) rows as the simulator reports them,
    /// converting sequence length to block count via the block period `k`.
    pub fn from_lengths(points: &[(usize, f64, f64)], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter {
                name: "k",
                value: 0.0,
                reason: "block period must be positive",
            });
        }
        let x = points.iter().map(|p| p.0 as f64 / k as f64).collect();
        let mean = points.iter().map(|p| p.1).collect();
        let stderr = points.iter().map(|p| p.2).collect();
        Self::new(x, mean, stderr)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn stderr(&self) -> &[f64] {
        &self.stderr
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Provenance tag carried alongside a curve into output files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub block: BlockKind,
    pub dd: DdMode,
    pub k: usize,
    pub seeds: usize,
    pub shots: usize,
    pub data_pos: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Hold B at this value instead of fitting it.
    pub fix_b: Option<f64>,
    /// Drop this many of the shortest sequences before fitting; the
    /// conditional blocks have a one-block transient before the decay
    /// settles onto its asymptotic rate.
    pub skip_depths: usize,
    /// Lower bound applied to every stderr before weighting.
    pub stderr_floor: f64,
    /// Iteration cap. The stopping thresholds are near machine precision,
    /// so a shallow optimum can take a few hundred iterations to settle;
    /// the default leaves generous headroom (iterations are microseconds).
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fix_b: None,
            skip_depths: 0,
            stderr_floor: 1e-6,
            max_iter: 5000,
        }
    }
}

impl FitOptions {
    /// Floor the stderr at 1 / (2 * samples per point), the scale below
    /// which counting statistics cannot resolve a probability; saturated
    /// points (all shots identical, apparent stderr zero) then carry large
    /// but finite weight.
    pub fn with_counting_floor(seeds: usize, shots: usize) -> Self {
        Self {
            stderr_floor: 0.5 / (seeds * shots).max(1) as f64,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub alpha_stderr: f64,
    /// Raw per-block error (1 - alpha) / 2; interleaved extraction is a
    /// separate step, see [`extract_epsilon`].
    pub epsilon: f64,
    pub epsilon_stderr: f64,
    pub converged: bool,
    /// Set when the amplitude vanished or the information matrix was
    /// singular at the optimum; alpha may still be meaningful (a perfectly
    /// flat curve pins alpha at 1) but its stderr is not.
    pub degenerate: bool,
    pub residual_norm: f64,
    pub iterations: usize,
}

struct Model<'a> {
    x: &'a [f64],
    y: &'a [f64],
    w: &'a [f64], // 1/sigma per point (sqrt of the weight)
    fix_b: Option<f64>,
}

impl Model<'_> {
    fn unpack(&self, p: &[f64]) -> (f64, f64, f64) {
        match self.fix_b {
            Some(b) => (p[0], b, p[1]),
            None => (p[0], p[1], p[2]),
        }
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let (a, b, alpha) = self.unpack(p);
        for (i, (&x, &y)) in self.x.iter().zip(self.y).enumerate() {
            out[i] = (y - (a * alpha.powf(x) + b)) * self.w[i];
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        let (a, _, alpha) = self.unpack(p);
        for (i, &x) in self.x.iter().enumerate() {
            let pow = alpha.powf(x);
            let dalpha = if x == 0.0 { 0.0 } else { a * x * alpha.powf(x - 1.0) };
            match self.fix_b {
                Some(_) => {
                    out[(i, 0)] = pow * self.w[i];
                    out[(i, 1)] = dalpha * self.w[i];
                }
                None => {
                    out[(i, 0)] = pow * self.w[i];
                    out[(i, 1)] = self.w[i];
                    out[(i, 2)] = dalpha * self.w[i];
                }
            }
        }
    }
}

fn clamp_unit(p: &mut [f64]) {
    for v in p {
        *v = v.clamp(0.0, 1.0);
    }
}

fn initial_guess(x: &[f64], y: &[f64], fix_b: Option<f64>) -> Vec<f64> {
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let b0 = fix_b.unwrap_or_else(|| ymin.clamp(0.0, 0.6));
    let a0 = (y[0] - b0).clamp(0.0, 1.0);
    // Log-linear regression of y - b0 against x for a slope estimate;
    // fall back to a mild decay when the shifted data is not positive.
    let mut sx = 0.0;
    let mut sz = 0.0;
    let mut sxx = 0.0;
    let mut sxz = 0.0;
    let mut n = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let z = yi - b0;
        if z > 1e-12 {
            let lz = z.ln();
            sx += xi;
            sz += lz;
            sxx += xi * xi;
            sxz += xi * lz;
            n += 1.0;
        }
    }
    let denom = n * sxx - sx * sx;
    let alpha0 = if n >= 2.0 && denom.abs() > 1e-30 {
        let slope = (n * sxz - sx * sz) / denom;
        slope.exp().clamp(1e-6, 1.0)
    } else {
        0.95
    };
    match fix_b {
        Some(_) => vec![a0, alpha0],
        None => vec![a0, b0, alpha0],
    }
}

/// Fit A * alpha^x + B to a survival curve.
///
/// Returns an error when the curve (after `skip_depths`) has fewer
/// distinct abscissas than free parameters, or when weighting is
/// impossible (zero stderr with a zero floor).
pub fn fit_exponential(curve: &DecayCurve, opts: &FitOptions) -> Result<FitResult> {
    if let Some(b) = opts.fix_b {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Parameter {
                name: "fix_b",
                value: b,
                reason: "must lie in [0, 1]",
            });
        }
    }
    let skip = opts.skip_depths;
    if skip >= curve.len() {
        return Err(Error::Fit(format!(
            "skip_depths {} leaves no data (curve has {} points)",
            skip,
            curve.len()
        )));
    }
    let x = &curve.x[skip..];
    let y = &curve.mean[skip..];
    let s = &curve.stderr[skip..];

    let n_params = if opts.fix_b.is_some() { 2 } else { 3 };
    let mut distinct = 1;
    for pair in x.windows(2) {
        if pair[1] > pair[0] {
            distinct += 1;
        }
    }
    if distinct < n_params {
        return Err(Error::Fit(format!(
            "{distinct} distinct sequence lengths cannot constrain {n_params} parameters"
        )));
    }

    let mut w = Vec::with_capacity(s.len());
    for &si in s {
        let sigma = si.max(opts.stderr_floor);
        if sigma <= 0.0 {
            return Err(Error::Fit(
                "zero stderr with zero stderr_floor makes weights infinite".into(),
            ));
        }
        w.push(1.0 / sigma);
    }

    let model = Model {
        x,
        y,
        w: &w,
        fix_b: opts.fix_b,
    };
    let mut params = initial_guess(x, y, opts.fix_b);
    clamp_unit(&mut params);

    let n = x.len();
    let mut resid = vec![0.0; n];
    let mut jac = DMatrix::zeros(n, n_params);
    model.residuals(&params, &mut resid);
    let mut cost: f64 = resid.iter().map(|r| r * r).sum();

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        model.jacobian(&params, &mut jac);
        let jt = jac.transpose();
        let h = &jt * &jac;
        let r = DMatrix::from_column_slice(n, 1, &resid);
        let g = &jt * &r;

        let mut accepted = false;
        for _ in 0..20 {
            let mut damped = h.clone();
            for i in 0..n_params {
                let d = h[(i, i)];
                damped[(i, i)] = d + lambda * d.max(1e-30);
            }
            let Some(step) = damped.lu().solve(&g) else {
                lambda *= 7.0;
                continue;
            };
            let mut trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .map(|(p, d)| p + d)
                .collect();
            clamp_unit(&mut trial);
            model.residuals(&trial, &mut resid);
            let trial_cost: f64 = resid.iter().map(|r| r * r).sum();
            if trial_cost <= cost {
                let step_size = trial
                    .iter()
                    .zip(params.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let improvement = cost - trial_cost;
                params = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if step_size < 1e-12 || cost < 1e-28 || improvement < 1e-14 * cost.max(1e-30) {
                    converged = true;
                }
                break;
            }
            lambda *= 7.0;
        }
        if !accepted {
            // No downhill step at any damping: we are at (or numerically
            // pinned to) a local optimum.
            model.residuals(&params, &mut resid);
            converged = true;
        }
        if converged {
            break;
        }
    }

    let (a, b, alpha) = model.unpack(&params);

    // Covariance from the information matrix at the optimum, using the
    // supplied per-point errors (no chi-square rescaling, so reported
    // uncertainties reflect the claimed measurement errors).
    model.jacobian(&params, &mut jac);
    let h = jac.transpose() * &jac;
    let alpha_idx = n_params - 1;
    let mut degenerate = a < 1e-6 || n <= n_params;
    let alpha_stderr = match h.clone().try_inverse() {
        Some(cov) if cov[(alpha_idx, alpha_idx)] >= 0.0 && !degenerate => {
            cov[(alpha_idx, alpha_idx)].sqrt()
        }
        _ => {
            degenerate = true;
            f64::NAN
        }
    };

    Ok(FitResult {
        a,
        b,
        alpha,
        alpha_stderr,
        epsilon: 0.5 * (1.0 - alpha),
        epsilon_stderr: 0.5 * alpha_stderr,
        converged,
        degenerate,
        residual_norm: cost.sqrt(),
        iterations,
    })
}

/// Per-block error of the interleaved element, with its propagated
/// stderr. With `alpha_ref = None` this is the raw (1 - alpha) / 2.
/// Refuses unconverged fits: their alpha is whatever the iteration limit
/// left behind, not an estimate.
pub fn extract_epsilon(fit: &FitResult, alpha_ref: Option<f64>) -> Result<(f64, f64)> {
    if !fit.converged {
        return Err(Error::Fit(
            "cannot extract an error rate from an unconverged fit".into(),
        ));
    }
    match alpha_ref {
        None => Ok((fit.epsilon, fit.epsilon_stderr)),
        Some(r) => {
            if !(r > 0.0) || r > 1.0 {
                return Err(Error::Parameter {
                    name: "alpha_ref",
                    value: r,
                    reason: "reference decay must lie in (0, 1]",
                });
            }
            Ok((0.5 * (1.0 - fit.alpha / r), 0.5 * fit.alpha_stderr / r))
        }
    }
}
