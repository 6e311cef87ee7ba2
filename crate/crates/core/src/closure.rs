//! Pair closures `W(x, y) ≈ <I_i I_j>` given node marginals `x = <I_i>`, `y = <I_j>`.
//!
//! A closure must be symmetric and stay between the Fréchet bounds
//! `max(x + y - 1, 0) <= W(x, y) <= min(x, y)`. The threshold analysis further
//! asks for an envelope `V` with `xy <= W <= xy + V(x, y) min(x, y) <= min(x, y)`,
//! `0 <= V <= r < 1`, `V` continuous and `V(0, 0) = 0`. Both are checked here
//! on sample grids, which can falsify a closure but never prove it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Slack for the bound checks; built-ins satisfy them up to rounding.
pub const BOUND_TOL: f64 = 1e-12;
/// Arguments this far outside `[0, 1]` are clamped instead of rejected.
pub const DOMAIN_SLACK: f64 = 1e-12;
/// Grid resolution used when a custom closure is loaded.
pub const LOAD_RESOLUTION: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureKind {
    Product,
    Min,
    GeoSqrt,
    Custom,
}

/// Serialized closure choice: `{kind, expr?, r?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    pub kind: ClosureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    kind: ClosureKind,
    expr: Option<(String, Expr)>,
    r: Option<f64>,
}

impl Closure {
    /// `W(x, y) = xy`, independence of neighbouring nodes.
    pub fn product() -> Self {
        Self {
            kind: ClosureKind::Product,
            expr: None,
            r: None,
        }
    }

    /// `W(x, y) = min(x, y)`.
    pub fn min() -> Self {
        Self {
            kind: ClosureKind::Min,
            expr: None,
            r: None,
        }
    }

    /// `W(x, y) = sqrt(xy) min(sqrt x, sqrt y)`, i.e. `min(x, y) sqrt(max(x, y))`.
    pub fn geo_sqrt() -> Self {
        Self {
            kind: ClosureKind::GeoSqrt,
            expr: None,
            r: Some(0.25),
        }
    }

    /// Parses and validates a custom closure; fails if the grid check finds
    /// any symmetry or bound violation.
    pub fn custom(expr: &str, r: Option<f64>) -> Result<Self> {
        let c = Self::custom_unvalidated(expr, r)?;
        let report = c.validate(LOAD_RESOLUTION);
        if !report.passed() {
            return Err(Error::Validation(format!(
                "closure `{expr}` is not a valid closure relation: {report}"
            )));
        }
        Ok(c)
    }

    /// Parses a custom closure without the load-time validation.
    pub fn custom_unvalidated(expr: &str, r: Option<f64>) -> Result<Self> {
        if let Some(r) = r {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Validation(format!("envelope bound r must lie in (0, 1), got {r}")));
            }
        }
        let parsed = Expr::parse(expr)?;
        Ok(Self {
            kind: ClosureKind::Custom,
            expr: Some((expr.to_string(), parsed)),
            r,
        })
    }

    pub fn from_config(cfg: &ClosureConfig) -> Result<Self> {
        match cfg.kind {
            ClosureKind::Custom => {
                let expr = cfg.expr.as_deref().ok_or_else(|| {
                    Error::Validation("custom closure requires an `expr` field".into())
                })?;
                Self::custom(expr, cfg.r)
            }
            kind => {
                if cfg.expr.is_some() {
                    return Err(Error::Validation(format!(
                        "`expr` is only allowed for custom closures, not {kind:?}"
                    )));
                }
                let mut c = match kind {
                    ClosureKind::Product => Self::product(),
                    ClosureKind::Min => Self::min(),
                    _ => Self::geo_sqrt(),
                };
                if cfg.r.is_some() {
                    c.r = cfg.r;
                }
                Ok(c)
            }
        }
    }

    pub fn to_config(&self) -> ClosureConfig {
        ClosureConfig {
            kind: self.kind,
            expr: self.expr.as_ref().map(|(s, _)| s.clone()),
            r: self.r,
        }
    }

    pub fn kind(&self) -> ClosureKind {
        self.kind
    }

    /// Declared envelope bound, if any.
    pub fn r(&self) -> Option<f64> {
        self.r
    }

    pub fn name(&self) -> String {
        match self.kind {
            ClosureKind::Product => "product".into(),
            ClosureKind::Min => "min".into(),
            ClosureKind::GeoSqrt => "geo_sqrt".into(),
            ClosureKind::Custom => format!("custom:{}", self.expr.as_ref().unwrap().0),
        }
    }

    /// `W(x, y)` with domain checking.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let inside = |v: f64| (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&v);
        if !(inside(x) && inside(y)) {
            return Err(Error::ClosureDomain { x, y });
        }
        Ok(self.eval_clamped(x.clamp(0.0, 1.0), y.clamp(0.0, 1.0)))
    }

    /// `W(x, y)` for arguments already in `[0, 1]`.
    #[inline]
    pub(crate) fn eval_clamped(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            ClosureKind::Product => x * y,
            ClosureKind::Min => x.min(y),
            ClosureKind::GeoSqrt => (x * y).sqrt() * x.sqrt().min(y.sqrt()),
            ClosureKind::Custom => self.expr.as_ref().unwrap().1.eval(x, y),
        }
    }

    /// Closed-form envelope `V` where one is known.
    pub fn analytic_envelope(&self, x: f64, y: f64) -> Option<f64> {
        match self.kind {
            ClosureKind::Product => Some(0.0),
            ClosureKind::GeoSqrt => {
                let m = x.max(y);
                Some(m.sqrt() - m)
            }
            _ => None,
        }
    }

    /// `(W(x, y) - xy) / min(x, y)`, undefined on the axes.
    pub fn empirical_envelope(&self, x: f64, y: f64) -> Option<f64> {
        let m = x.min(y);
        (m > 0.0).then(|| (self.eval_clamped(x, y) - x * y) / m)
    }

    fn envelope(&self, x: f64, y: f64) -> Option<f64> {
        self.analytic_envelope(x, y)
            .or_else(|| self.empirical_envelope(x, y))
    }

    /// Symmetry and Fréchet-bound check on the `(resolution + 1)^2` grid.
    pub fn validate(&self, resolution: usize) -> ClosureValidation {
        let resolution = resolution.max(2);
        let mut report = ClosureValidation {
            resolution,
            points: (resolution + 1) * (resolution + 1),
            max_symmetry_error: 0.0,
            max_lower_violation: 0.0,
            max_upper_violation: 0.0,
            worst: None,
        };
        let mut worst_value = 0.0;
        let mut note = |kind: ViolationKind, x: f64, y: f64, w: f64, bound: f64, excess: f64| {
            if excess > 0.0 && excess >= worst_value {
                worst_value = excess;
                Some(Violation { kind, x, y, w, bound, excess })
            } else {
                None
            }
        };
        for a in 0..=resolution {
            for b in 0..=resolution {
                let x = a as f64 / resolution as f64;
                let y = b as f64 / resolution as f64;
                let w = self.eval_clamped(x, y);
                let w_swap = self.eval_clamped(y, x);
                let lower = (x + y - 1.0).max(0.0);
                let upper = x.min(y);
                let (sym, low, up) = if w.is_finite() && w_swap.is_finite() {
                    ((w - w_swap).abs(), lower - w, w - upper)
                } else {
                    (f64::INFINITY, f64::INFINITY, f64::INFINITY)
                };
                report.max_symmetry_error = report.max_symmetry_error.max(sym);
                report.max_lower_violation = report.max_lower_violation.max(low);
                report.max_upper_violation = report.max_upper_violation.max(up);
                for v in [
                    note(ViolationKind::Symmetry, x, y, w, w_swap, sym),
                    note(ViolationKind::Lower, x, y, w, lower, low),
                    note(ViolationKind::Upper, x, y, w, upper, up),
                ]
                .into_iter()
                .flatten()
                {
                    report.worst = Some(v);
                }
            }
        }
        report
    }

    /// Checks the envelope condition behind the endemic threshold.
    ///
    /// Uses the closed-form `V` for built-ins and `(W - xy) / min(x, y)`
    /// otherwise. `V(0, 0) = 0` is probed on shrinking boxes `[0, d]^2`,
    /// `d = 10^-1 ... 10^-12`, and continuity by comparing the largest
    /// neighbour jump at `resolution` and `2 * resolution`.
    pub fn check_wcond(&self, resolution: usize) -> WcondReport {
        let resolution = resolution.max(2);
        let analytic = self.analytic_envelope(0.5, 0.5).is_some();
        let mut lower = 0.0f64;
        let mut upper = 0.0f64;
        let mut cap = 0.0f64;
        let mut sup_v = 0.0f64;
        let mut min_v = 0.0f64;
        for a in 0..=resolution {
            for b in 0..=resolution {
                let x = a as f64 / resolution as f64;
                let y = b as f64 / resolution as f64;
                let w = self.eval_clamped(x, y);
                let xy = x * y;
                let m = x.min(y);
                if !w.is_finite() {
                    lower = f64::INFINITY;
                    continue;
                }
                lower = lower.max(xy - w);
                if let Some(v) = self.envelope(x, y) {
                    sup_v = sup_v.max(v);
                    min_v = min_v.min(v);
                    upper = upper.max(w - (xy + v * m));
                    cap = cap.max(xy + v * m - m);
                } else {
                    // on the axes W is pinned to 0 by the Fréchet bounds
                    upper = upper.max(w - xy);
                }
            }
        }

        let jump_coarse = self.max_envelope_jump(resolution);
        let jump_fine = self.max_envelope_jump(2 * resolution);
        let continuous = jump_fine <= 1e-9 || jump_fine <= 0.8 * jump_coarse;

        let mut origin_limit = Vec::new();
        let mut diagonal_witness = Vec::new();
        for k in 1..=12 {
            let d = 10f64.powi(-k);
            let mut sup = 0.0f64;
            for a in 1..=8 {
                for b in 1..=8 {
                    if let Some(v) = self.envelope(d * a as f64 / 8.0, d * b as f64 / 8.0) {
                        sup = sup.max(v.abs());
                    }
                }
            }
            origin_limit.push((d, sup));
            diagonal_witness.push((d, self.envelope(d, d).unwrap_or(f64::NAN)));
        }
        let v_origin = origin_limit.last().map(|p| p.1).unwrap_or(f64::NAN);

        WcondReport {
            resolution,
            analytic_envelope: analytic,
            max_lower_violation: lower,
            max_upper_violation: upper,
            max_cap_violation: cap,
            sup_v,
            min_v,
            r: self.r.unwrap_or(sup_v),
            jump_coarse,
            jump_fine,
            continuous,
            origin_limit,
            diagonal_witness,
            v_near_origin: v_origin,
        }
    }

    fn max_envelope_jump(&self, resolution: usize) -> f64 {
        let at = |a: usize, b: usize| {
            self.envelope(a as f64 / resolution as f64, b as f64 / resolution as f64)
        };
        let mut jump = 0.0f64;
        for a in 0..=resolution {
            for b in 0..=resolution {
                let Some(v) = at(a, b) else { continue };
                if a < resolution {
                    if let Some(w) = at(a + 1, b) {
                        jump = jump.max((v - w).abs());
                    }
                }
                if b < resolution {
                    if let Some(w) = at(a, b + 1) {
                        jump = jump.max((v - w).abs());
                    }
                }
            }
        }
        jump
    }

    /// Checks that `y -> y - W(x, y)` is nondecreasing for every sampled `x`.
    pub fn check_monotone(&self, resolution: usize) -> MonotoneReport {
        let resolution = resolution.max(2);
        let mut worst = 0.0f64;
        let mut at = (0.0, 0.0);
        for a in 0..=resolution {
            let x = a as f64 / resolution as f64;
            let mut prev = 0.0 - self.eval_clamped(x, 0.0);
            for b in 1..=resolution {
                let y = b as f64 / resolution as f64;
                let cur = y - self.eval_clamped(x, y);
                let drop = prev - cur;
                if drop > worst || drop.is_nan() {
                    worst = if drop.is_nan() { f64::INFINITY } else { drop };
                    at = (x, y);
                }
                prev = cur;
            }
        }
        MonotoneReport {
            max_decrease: worst,
            location: at,
        }
    }
}

impl fmt::Display for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Accepts `product`, `min`, `geo_sqrt`, `custom:<expr>` or a JSON config object.
impl FromStr for Closure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let cfg: ClosureConfig = serde_json::from_str(s)?;
            return Self::from_config(&cfg);
        }
        if let Some(expr) = s.strip_prefix("custom:") {
            return Self::custom(expr, None);
        }
        match s {
            "product" | "nimfa" => Ok(Self::product()),
            "min" => Ok(Self::min()),
            "geo_sqrt" => Ok(Self::geo_sqrt()),
            other => Err(Error::Validation(format!(
                "unknown closure `{other}` (expected product, min, geo_sqrt, custom:<expr> or a JSON object)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Symmetry,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    /// The bound that was crossed (or `W(y, x)` for symmetry).
    pub bound: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureValidation {
    pub resolution: usize,
    pub points: usize,
    pub max_symmetry_error: f64,
    pub max_lower_violation: f64,
    pub max_upper_violation: f64,
    pub worst: Option<Violation>,
}

impl ClosureValidation {
    pub fn passed(&self) -> bool {
        self.max_symmetry_error <= BOUND_TOL
            && self.max_lower_violation <= BOUND_TOL
            && self.max_upper_violation <= BOUND_TOL
    }
}

impl fmt::Display for ClosureValidation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.worst, self.passed()) {
            (Some(v), false) => write!(
                f,
                "{:?} violation at ({}, {}): W = {}, bound = {}",
                v.kind, v.x, v.y, v.w, v.bound
            ),
            _ => write!(f, "no violations on {} grid points", self.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcondReport {
    pub resolution: usize,
    /// Whether `V` came from a closed form rather than `(W - xy) / min`.
    pub analytic_envelope: bool,
    /// `max (xy - W)`.
    pub max_lower_violation: f64,
    /// `max (W - xy - V min)`.
    pub max_upper_violation: f64,
    /// `max (xy + V min - min)`.
    pub max_cap_violation: f64,
    pub sup_v: f64,
    pub min_v: f64,
    /// Declared bound, or the observed supremum when none was declared.
    pub r: f64,
    pub jump_coarse: f64,
    pub jump_fine: f64,
    pub continuous: bool,
    /// `(d, sup |V| over (0, d]^2)` for shrinking `d`.
    pub origin_limit: Vec<(f64, f64)>,
    /// `(d, V(d, d))`.
    pub diagonal_witness: Vec<(f64, f64)>,
    pub v_near_origin: f64,
}

impl WcondReport {
    /// Largest `|V|` tolerated on the smallest origin box.
    pub const ORIGIN_TOL: f64 = 1e-3;

    pub fn bounds_ok(&self) -> bool {
        self.max_lower_violation <= BOUND_TOL
            && self.max_upper_violation <= BOUND_TOL
            && self.max_cap_violation <= BOUND_TOL
    }

    pub fn envelope_ok(&self) -> bool {
        self.min_v >= -BOUND_TOL && self.sup_v <= self.r + BOUND_TOL && self.r < 1.0
    }

    pub fn origin_ok(&self) -> bool {
        self.v_near_origin <= Self::ORIGIN_TOL
    }

    pub fn passed(&self) -> bool {
        self.bounds_ok() && self.envelope_ok() && self.continuous && self.origin_ok()
    }
}

impl fmt::Display for WcondReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let source = if self.analytic_envelope { "closed form" } else { "(W - xy) / min(x, y)" };
        writeln!(f, "V from {source}: {} <= V <= {} (r = {})", self.min_v, self.sup_v, self.r)?;
        writeln!(f, "bounds xy <= W <= xy + V min <= min: {}", if self.bounds_ok() { "ok" } else { "violated" })?;
        writeln!(
            f,
            "continuity: largest jump {:e} (coarse {:e}) -> {}",
            self.jump_fine,
            self.jump_coarse,
            if self.continuous { "ok" } else { "suspect" }
        )?;
        write!(f, "sup |V| near the origin: {:e}", self.v_near_origin)?;
        if let Some((d, v)) = self.diagonal_witness.last() {
            write!(f, "; V({d:e}, {d:e}) = {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneReport {
    pub max_decrease: f64,
    pub location: (f64, f64),
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.max_decrease <= BOUND_TOL
    }
}
