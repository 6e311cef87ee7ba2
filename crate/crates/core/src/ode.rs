//! Adaptive Dormand–Prince 5(4) integrator for non-stiff initial value problems.
//!
//! Steps are clipped so the integrator lands exactly on every requested output
//! time; no interpolation is involved. All runs are deterministic.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid initial value problem: {0}")]
    InvalidSpec(String),
    #[error("step size underflow at t = {t} (h = {h:e}); last accepted time {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("right-hand side produced a non-finite value at t = {t}")]
    NonFinite { t: f64 },
    #[error("exceeded {max_steps} steps; last accepted time {t}")]
    TooManySteps { t: f64, max_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub fn halved(self) -> Self {
        Self {
            abs: self.abs / 2.0,
            rel: self.rel / 2.0,
        }
    }
}

/// An initial value problem `y' = rhs(t, y)`, `y(t0) = y0`.
pub struct IvpSpec<F> {
    pub rhs: F,
    pub t0: f64,
    pub t1: f64,
    pub y0: Vec<f64>,
    pub tol: Tolerances,
    pub output_times: Vec<f64>,
    pub max_steps: usize,
}

impl<F> IvpSpec<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    /// Problem on `[output_times[0], last output time]` with default tolerances.
    pub fn new(rhs: F, y0: Vec<f64>, output_times: Vec<f64>) -> Self {
        let t0 = output_times.first().copied().unwrap_or(0.0);
        let t1 = output_times.last().copied().unwrap_or(t0);
        Self {
            rhs,
            t0,
            t1,
            y0,
            tol: Tolerances::default(),
            output_times,
            max_steps: 10_000_000,
        }
    }

    pub fn span(mut self, t0: f64, t1: f64) -> Self {
        self.t0 = t0;
        self.t1 = t1;
        self
    }

    pub fn tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn dimension(&self) -> usize {
        self.y0.len()
    }

    fn validate(&self) -> Result<(), OdeError> {
        let bad = |m: String| Err(OdeError::InvalidSpec(m));
        if self.y0.is_empty() {
            return bad("dimension must be positive".into());
        }
        if !(self.t0 < self.t1) && !(self.t0 == self.t1 && self.output_times.len() <= 1) {
            return bad(format!("need t0 < t1, got [{}, {}]", self.t0, self.t1));
        }
        if !(self.tol.abs > 0.0 && self.tol.rel > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.output_times.is_empty() {
            return bad("no output times".into());
        }
        if self.output_times.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("output times must be strictly increasing".into());
        }
        let first = self.output_times[0];
        let last = *self.output_times.last().unwrap();
        if first < self.t0 || last > self.t1 {
            return bad(format!(
                "output times [{first}, {last}] outside [{}, {}]",
                self.t0, self.t1
            ));
        }
        if self.y0.iter().any(|v| !v.is_finite()) {
            return bad("initial state is not finite".into());
        }
        Ok(())
    }
}

/// Solution samples: one row per output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self {
            times: Vec::new(),
            dim,
            data: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, y: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        self.times.push(t);
        self.data.extend_from_slice(y);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    /// Time series of component `i`.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states().map(|s| s[i]).collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth- minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

fn check_finite(v: &[f64], t: f64) -> Result<(), OdeError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(OdeError::NonFinite { t })
    }
}

fn scaled_rms(err: &[f64], y: &[f64], y_new: &[f64], tol: Tolerances) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = tol.abs + tol.rel * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

/// Integrates the problem and returns the states at exactly `output_times`.
pub fn integrate<F>(mut spec: IvpSpec<F>) -> Result<Trajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    spec.validate()?;
    let dim = spec.dimension();
    let tol = spec.tol;
    let rhs = &mut spec.rhs;
    let mut out = Trajectory::new(dim);

    let mut t = spec.t0;
    let mut y = spec.y0.clone();
    let mut k1 = vec![0.0; dim];
    rhs(t, &y, &mut k1);
    check_finite(&k1, t)?;

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    );
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let span = spec.t1 - spec.t0;
    let mut h = initial_step(rhs, t, &y, &k1, tol, span)?;
    let mut steps = 0usize;
    let mut rejected_last = false;

    for &t_out in &spec.output_times {
        while t < t_out {
            if steps >= spec.max_steps {
                return Err(OdeError::TooManySteps {
                    t,
                    max_steps: spec.max_steps,
                });
            }
            let remaining = t_out - t;
            let landing = h >= remaining;
            let h_step = if landing { remaining } else { h };
            if h_step <= 16.0 * f64::EPSILON * t.abs().max(1.0) && !landing {
                return Err(OdeError::StepUnderflow { t, h: h_step });
            }

            for i in 0..dim {
                stage[i] = y[i] + h_step * A21 * k1[i];
            }
            rhs(t + C2 * h_step, &stage, &mut k2);
            for i in 0..dim {
                stage[i] = y[i] + h_step * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t + C3 * h_step, &stage, &mut k3);
            for i in 0..dim {
                stage[i] = y[i] + h_step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t + C4 * h_step, &stage, &mut k4);
            for i in 0..dim {
                stage[i] =
                    y[i] + h_step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t + C5 * h_step, &stage, &mut k5);
            for i in 0..dim {
                stage[i] = y[i]
                    + h_step
                        * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(t + h_step, &stage, &mut k6);
            for i in 0..dim {
                y_new[i] = y[i]
                    + h_step
                        * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let t_new = if landing { t_out } else { t + h_step };
            rhs(t_new, &y_new, &mut k7);
            steps += 1;

            let finite = y_new.iter().chain(&k7).all(|v| v.is_finite());
            let err_norm = if finite {
                for i in 0..dim {
                    err[i] = h_step
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                            + E7 * k7[i]);
                }
                scaled_rms(&err, &y, &y_new, tol)
            } else {
                f64::INFINITY
            };

            if err_norm <= 1.0 {
                let fac = if err_norm == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err_norm.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                let fac = if rejected_last { fac.min(1.0) } else { fac };
                rejected_last = false;
                t = t_new;
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                // a short landing step says little about the natural step size
                h = if landing { h.max(h_step * fac) } else { h_step * fac };
            } else {
                if !finite && h_step <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                    return Err(OdeError::NonFinite { t });
                }
                let fac = if err_norm.is_finite() {
                    (SAFETY * err_norm.powf(-0.2)).clamp(FAC_MIN, 1.0)
                } else {
                    FAC_MIN
                };
                rejected_last = true;
                h = h_step * fac;
                if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                    if !finite {
                        return Err(OdeError::NonFinite { t });
                    }
                    return Err(OdeError::StepUnderflow { t, h });
                }
            }
        }
        out.push(t_out, &y);
    }
    Ok(out)
}

fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    tol: Tolerances,
    span: f64,
) -> Result<f64, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if span <= 0.0 {
        return Ok(1.0);
    }
    let dim = y0.len();
    let norm = |v: &[f64]| {
        let s: f64 = v
            .iter()
            .zip(y0)
            .map(|(x, y)| (x / (tol.abs + tol.rel * y.abs())).powi(2))
            .sum();
        (s / dim as f64).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; dim];
    rhs(t0 + h0, &y1, &mut f1);
    check_finite(&f1, t0 + h0)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}
