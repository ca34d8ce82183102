//! Radius laws for the Boolean model.
//!
//! Every law is described by its survival function `S(x) = P(Z ≥ x)`,
//! sampled by survival inversion, and comes with the closed-form tail
//! integral `∫_{[s, ∞)} x² μ(dx)` that drives the truncation budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius distribution `μ`.
///
/// The log-Pareto variants only prescribe the tail above `x0 ≥ e`; the
/// remaining mass sits in an atom at `x0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusLaw {
    Constant { radius: f64 },
    Uniform { low: f64, high: f64 },
    /// `S(x) = (x / x_min)^-(2+alpha)` for `x ≥ x_min`.
    ParetoTail { alpha: f64, x_min: f64 },
    /// `S(x) = (x / x_min)^-2`: infinite second moment.
    Pareto2 { x_min: f64 },
    /// `S(x) = x^-2 (log x)^-2` for `x > x0`.
    LogPareto2 {
        #[serde(default = "euler")]
        x0: f64,
    },
    /// `S(x) = x^-(2+alpha) (log x)^-2` for `x > x0`.
    LogPareto2Alpha {
        alpha: f64,
        #[serde(default = "euler")]
        x0: f64,
    },
    /// `min(Z, cap)` for `Z ~ base`: mass above `cap` becomes an atom at `cap`.
    Truncated { base: Box<RadiusLaw>, cap: f64 },
}

fn euler() -> f64 {
    std::f64::consts::E
}

/// Which moment conditions the law satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentFlags {
    /// `∫ x² μ(dx) < ∞`
    pub has_m2: bool,
    /// `∫ x² log x μ(dx) < ∞`
    pub has_m2log: bool,
    /// Supremum of the `α'` with `∫ x^(2+α') μ(dx) < ∞`; `None` if no such `α' > 0`.
    pub m2alpha: Option<f64>,
}

/// Padding and the certified probability that discs centred beyond it
/// reach the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBudget {
    pub padding: f64,
    pub bias_bound: f64,
}

impl TailBudget {
    pub const ZERO: TailBudget = TailBudget { padding: 0.0, bias_bound: 0.0 };
}

/// Growth factor of the padding search grid.
pub const PADDING_GRID_FACTOR: f64 = 1.05;
const PADDING_K_MIN: i32 = -142; // 1.05^-142 ≈ 1e-3
const PADDING_K_MAX: i32 = 708; // 1.05^708 ≈ 1e15

impl RadiusLaw {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        match self {
            RadiusLaw::Constant { radius } if !(*radius > 0.0 && radius.is_finite()) => {
                bad(format!("constant radius must be positive, got {radius}"))
            }
            RadiusLaw::Uniform { low, high } if !(*low > 0.0 && low < high && high.is_finite()) => {
                bad(format!("uniform radius needs 0 < low < high, got [{low}, {high}]"))
            }
            RadiusLaw::ParetoTail { alpha, x_min } if !(*alpha > 0.0 && *x_min > 0.0 && alpha.is_finite()) => {
                bad(format!("pareto tail needs alpha > 0 and x_min > 0, got {alpha}, {x_min}"))
            }
            RadiusLaw::Pareto2 { x_min } if !(*x_min > 0.0 && x_min.is_finite()) => {
                bad(format!("pareto2 needs x_min > 0, got {x_min}"))
            }
            RadiusLaw::LogPareto2 { x0 } if !(*x0 >= euler() - 1e-12 && x0.is_finite()) => {
                bad(format!("log-pareto needs x0 >= e, got {x0}"))
            }
            RadiusLaw::LogPareto2Alpha { alpha, x0 } if !(*alpha > 0.0 && *x0 >= euler() - 1e-12 && x0.is_finite()) => {
                bad(format!("log-pareto-alpha needs alpha > 0 and x0 >= e, got {alpha}, {x0}"))
            }
            RadiusLaw::Truncated { base, cap } => {
                base.validate()?;
                if !(*cap > 0.0 && cap.is_finite()) {
                    return bad(format!("truncation cap must be positive, got {cap}"));
                }
                if *cap < base.min_support() {
                    return Err(Error::DegenerateLaw(format!(
                        "cap {cap} lies below the minimum support {} of the base law",
                        base.min_support()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `law` truncated at `cap`, validated.
    pub fn truncated(&self, cap: f64) -> Result<RadiusLaw> {
        let t = RadiusLaw::Truncated { base: Box::new(self.clone()), cap };
        t.validate()?;
        Ok(t)
    }

    /// Smallest point of the support.
    pub fn min_support(&self) -> f64 {
        match self {
            RadiusLaw::Constant { radius } => *radius,
            RadiusLaw::Uniform { low, .. } => *low,
            RadiusLaw::ParetoTail { x_min, .. } | RadiusLaw::Pareto2 { x_min } => *x_min,
            RadiusLaw::LogPareto2 { x0 } | RadiusLaw::LogPareto2Alpha { x0, .. } => *x0,
            RadiusLaw::Truncated { base, cap } => base.min_support().min(*cap),
        }
    }

    /// Largest point of the support, `∞` for unbounded laws.
    pub fn max_support(&self) -> f64 {
        match self {
            RadiusLaw::Constant { radius } => *radius,
            RadiusLaw::Uniform { high, .. } => *high,
            RadiusLaw::Truncated { base, cap } => base.max_support().min(*cap),
            _ => f64::INFINITY,
        }
    }

    /// Points where the survival function jumps or changes formula.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            RadiusLaw::Constant { radius } => vec![*radius],
            RadiusLaw::Uniform { low, high } => vec![*low, *high],
            RadiusLaw::ParetoTail { x_min, .. } | RadiusLaw::Pareto2 { x_min } => vec![*x_min],
            RadiusLaw::LogPareto2 { x0 } | RadiusLaw::LogPareto2Alpha { x0, .. } => vec![*x0],
            RadiusLaw::Truncated { base, cap } => {
                let mut b: Vec<f64> = base.breakpoints().into_iter().filter(|x| x < cap).collect();
                b.push(*cap);
                b
            }
        }
    }

    pub fn moment_flags(&self) -> MomentFlags {
        let all = MomentFlags { has_m2: true, has_m2log: true, m2alpha: Some(f64::INFINITY) };
        match self {
            RadiusLaw::Constant { .. } | RadiusLaw::Uniform { .. } | RadiusLaw::Truncated { .. } => all,
            RadiusLaw::ParetoTail { alpha, .. } => MomentFlags { m2alpha: Some(*alpha), ..all },
            RadiusLaw::Pareto2 { .. } => MomentFlags { has_m2: false, has_m2log: false, m2alpha: None },
            RadiusLaw::LogPareto2 { .. } => MomentFlags { has_m2: true, has_m2log: false, m2alpha: None },
            RadiusLaw::LogPareto2Alpha { alpha, .. } => MomentFlags { m2alpha: Some(*alpha), ..all },
        }
    }

    /// `P(Z ≥ x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            RadiusLaw::Constant { radius } => f64::from(x <= *radius),
            RadiusLaw::Uniform { low, high } => {
                if x <= *low {
                    1.0
                } else if x >= *high {
                    0.0
                } else {
                    (high - x) / (high - low)
                }
            }
            RadiusLaw::ParetoTail { alpha, x_min } => {
                if x <= *x_min {
                    1.0
                } else {
                    (x / x_min).powf(-(2.0 + alpha))
                }
            }
            RadiusLaw::Pareto2 { x_min } => {
                if x <= *x_min {
                    1.0
                } else {
                    (x / x_min).powi(-2)
                }
            }
            RadiusLaw::LogPareto2 { x0 } => {
                if x <= *x0 {
                    1.0
                } else {
                    log_tail(x, 0.0)
                }
            }
            RadiusLaw::LogPareto2Alpha { alpha, x0 } => {
                if x <= *x0 {
                    1.0
                } else {
                    log_tail(x, *alpha)
                }
            }
            RadiusLaw::Truncated { base, cap } => {
                if x <= *cap {
                    base.survival(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup { x : S(x) ≥ v }` for `v ∈ (0, 1]`.
    pub fn survival_quantile(&self, v: f64) -> f64 {
        match self {
            RadiusLaw::Constant { radius } => *radius,
            RadiusLaw::Uniform { low, high } => high - v * (high - low),
            RadiusLaw::ParetoTail { alpha, x_min } => x_min * v.powf(-1.0 / (2.0 + alpha)),
            RadiusLaw::Pareto2 { x_min } => x_min * v.powf(-0.5),
            RadiusLaw::LogPareto2 { x0 } => invert_log_tail(v, 0.0, *x0),
            RadiusLaw::LogPareto2Alpha { alpha, x0 } => invert_log_tail(v, *alpha, *x0),
            RadiusLaw::Truncated { base, cap } => base.survival_quantile(v).min(*cap),
        }
    }

    /// Inverse-CDF transform of `u ∈ (0, 1)`.
    pub fn sample_radius(&self, u: f64) -> f64 {
        self.survival_quantile(1.0 - u)
    }

    /// Sample from `Z | Z ≥ t` using `u ∈ (0, 1)`.
    pub fn sample_radius_at_least(&self, t: f64, u: f64) -> f64 {
        let st = self.survival(t);
        self.survival_quantile(((1.0 - u) * st).min(1.0)).max(t)
    }

    /// `∫_{[s, ∞)} x² μ(dx)`, or [`Error::InfiniteMoment`].
    pub fn tail_m2(&self, s: f64) -> Result<f64> {
        let s = s.max(0.0);
        Ok(match self {
            RadiusLaw::Constant { radius } => {
                if s <= *radius {
                    radius * radius
                } else {
                    0.0
                }
            }
            RadiusLaw::Uniform { low, high } => {
                let m = s.clamp(*low, *high);
                (high.powi(3) - m.powi(3)) / (3.0 * (high - low))
            }
            RadiusLaw::ParetoTail { alpha, x_min } => {
                let m = s.max(*x_min);
                (2.0 + alpha) / alpha * x_min.powf(2.0 + alpha) * m.powf(-alpha)
            }
            RadiusLaw::Pareto2 { .. } => return Err(Error::InfiniteMoment(format!("{self:?}"))),
            RadiusLaw::LogPareto2 { x0 } => {
                let m = s.max(*x0);
                let l = m.ln();
                let cont = 2.0 / l + 1.0 / (l * l);
                if s <= *x0 {
                    cont + x0 * x0 * (1.0 - log_tail(*x0, 0.0))
                } else {
                    cont
                }
            }
            RadiusLaw::LogPareto2Alpha { alpha, x0 } => {
                let m = s.max(*x0);
                let cont = log_alpha_tail_m2(*alpha, m.ln());
                if s <= *x0 {
                    cont + x0 * x0 * (1.0 - log_tail(*x0, *alpha))
                } else {
                    cont
                }
            }
            RadiusLaw::Truncated { base, cap } => {
                if s > *cap {
                    0.0
                } else {
                    base.partial_m2(s, *cap) + cap * cap * base.survival(*cap)
                }
            }
        })
    }

    /// `∫_{[a, b)} x² μ(dx)` for `a ≤ b`; finite for every law.
    fn partial_m2(&self, a: f64, b: f64) -> f64 {
        if let RadiusLaw::Pareto2 { x_min } = self {
            let lo = a.max(*x_min);
            let hi = b.max(*x_min);
            let atomless = 2.0 * x_min * x_min * (hi / lo).ln();
            return atomless;
        }
        // Closed tails at both ends: [a, ∞) minus [b, ∞).
        let ta = self.tail_m2(a).unwrap_or(f64::INFINITY);
        let tb = self.tail_m2(b).unwrap_or(f64::INFINITY);
        (ta - tb).max(0.0)
    }

    /// `∫ x² μ(dx)`.
    pub fn second_moment(&self) -> Result<f64> {
        self.tail_m2(0.0)
    }
}

/// `x^-(2+alpha) (log x)^-2`.
fn log_tail(x: f64, alpha: f64) -> f64 {
    let l = x.ln();
    x.powf(-(2.0 + alpha)) / (l * l)
}

/// Solves `x^-(2+alpha) (log x)^-2 = v` for `x > x0`, or returns `x0` when
/// `v` falls inside the atom.
fn invert_log_tail(v: f64, alpha: f64, x0: f64) -> f64 {
    if v >= log_tail(x0, alpha) {
        return x0;
    }
    // In y = log x: (2 + alpha) y + 2 log y + log v = 0, increasing in y.
    let target = -v.ln();
    let h = |y: f64| (2.0 + alpha) * y + 2.0 * y.ln() - target;
    let mut lo = x0.ln();
    let mut hi = lo.max(1.0);
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = h(y);
        if f < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y - f / ((2.0 + alpha) + 2.0 / y);
        y = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (hi - lo) <= 1e-15 * hi || f == 0.0 {
            break;
        }
    }
    y.exp()
}

/// `∫_{e^L}^∞ x² d(-S)` for `S = x^-(2+α) (log x)^-2`:
/// `e^{-αL} L^-2 + 2 (e^{-αL} / L - α E1(αL))`.
fn log_alpha_tail_m2(alpha: f64, l: f64) -> f64 {
    let e = (-alpha * l).exp();
    let e1 = statrs::function::exponential::integral(alpha * l, 1).unwrap_or(0.0);
    e / (l * l) + 2.0 * (e / l - alpha * e1)
}

/// The truncation bound `8 λ (1 + (r + 1)/s)² ∫_s^∞ x² μ(dx)`.
pub fn decoupling_bound(law: &RadiusLaw, lambda: f64, r: f64, s: f64) -> Result<f64> {
    let tail = law.tail_m2(s)?;
    if tail == 0.0 || lambda == 0.0 {
        return Ok(0.0);
    }
    let f = 1.0 + (r + 1.0) / s;
    Ok(8.0 * lambda * f * f * tail)
}

/// Smallest padding on the `1.05^k` grid whose truncation bound is at most `eps`.
pub fn padding_for(law: &RadiusLaw, lambda: f64, r: f64, eps: f64) -> Result<TailBudget> {
    law.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("intensity must be non-negative, got {lambda}")));
    }
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::invalid(format!("padding needs r >= 1, got {r}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("error budget must lie in (0, 1], got {eps}")));
    }
    if !law.moment_flags().has_m2 {
        return Err(Error::Unpaddable(format!("{law:?} has an infinite second moment")));
    }
    let grid = |k: i32| PADDING_GRID_FACTOR.powi(k);
    let bound = |k: i32| decoupling_bound(law, lambda, r, grid(k));
    if bound(PADDING_K_MAX)? > eps {
        return Err(Error::Unpaddable(format!(
            "{law:?}: no padding below {:.1e} meets the budget {eps}",
            grid(PADDING_K_MAX)
        )));
    }
    // The bound is non-increasing in s, so bisect on the grid index.
    let mut hi = PADDING_K_MAX;
    if bound(PADDING_K_MIN)? <= eps {
        hi = PADDING_K_MIN;
    } else {
        let mut lo = PADDING_K_MIN;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if bound(mid)? <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(TailBudget { padding: grid(hi), bias_bound: bound(hi)? })
}
