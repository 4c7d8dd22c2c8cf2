//! Band-by-band solution of the relay integral equation
//!
//! ω(x) = Γ − Σ_{xᵢ<x} (−1)ⁱ ρᵢ(x),   ρᵢ(x) = x² ∫_{xᵢ/x}^1 K,
//!
//! with precipitation on (xᵢ, xᵢ₊₁) for even i and off for odd i.
//!
//! Past the first zero, ω is evaluated relative to the last recorded zero xₙ,
//! using ω(xₙ) = 0 and
//! ρᵢ(x) − ρᵢ(xₙ) = (x − xₙ)(x + xₙ) T(xᵢ/x) + xₙ² ∫_{xᵢ/x}^{xᵢ/xₙ} K,
//! with T(θ) = ∫_θ^1 K. Each term is then of the size of x − xₙ, which keeps
//! full relative precision on bands many orders of magnitude narrower
//! than x.

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Ratio};

/// How a ring pattern computation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Widths fell below `min_width`; zeros accumulate at a finite point.
    NonDegenerateAccumulation,
    /// Neither continuation past the last zero is self-consistent.
    Degenerate,
    /// Stopped by `max_zeros` or the horizon.
    Truncated,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::NonDegenerateAccumulation => "NonDegenerateAccumulation",
            Classification::Degenerate => "Degenerate",
            Classification::Truncated => "Truncated",
        };
        f.write_str(s)
    }
}

/// Stopping limits for [`solve_pattern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingLimits {
    pub max_zeros: usize,
    /// Absolute minimum width; `None` means 1e-9·x₁.
    pub min_width: Option<f64>,
    pub horizon: f64,
}

impl Default for RingLimits {
    fn default() -> Self {
        RingLimits { max_zeros: 200, min_width: None, horizon: 100.0 }
    }
}

/// Numerical tolerances for [`solve_pattern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingTols {
    /// Absolute bisection width for zeros.
    pub root_tol: f64,
    /// Largest step of the sign scan.
    pub scan_step: f64,
    /// Growth factor of the scan offsets measured from the last zero.
    pub scan_growth: f64,
    /// Probe offset as a fraction of the last width.
    pub probe_frac: f64,
    /// Tolerance on |q_n − q*| used when checking the ratio bound.
    pub ratio_slack: f64,
}

impl Default for RingTols {
    fn default() -> Self {
        RingTols { root_tol: 1e-15, scan_step: 1e-2, scan_growth: 1.02, probe_frac: 1e-6, ratio_slack: 0.05 }
    }
}

/// Outcome of testing both sign hypotheses just past a zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationVerdict {
    pub positive_consistent: bool,
    pub negative_consistent: bool,
    /// Probe offsets δ·2⁻ʲ from the last zero.
    pub probe_offsets: Vec<f64>,
    /// Candidate ω with precipitation switched on past the zero.
    pub probe_plus: Vec<f64>,
    /// Candidate ω with precipitation switched off past the zero.
    pub probe_minus: Vec<f64>,
    /// Whether the derivative fallback decided the verdict.
    pub used_derivative: bool,
}

impl ContinuationVerdict {
    pub fn is_degenerate(&self) -> bool {
        !self.positive_consistent && !self.negative_consistent
    }
}

/// Solution of the relay equation up to breakdown or truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct RingPattern {
    pub zeros: Vec<f64>,
    pub widths: Vec<f64>,
    pub ratios: Vec<f64>,
    pub classification: Classification,
    pub x_star: f64,
    pub q_star_bound: f64,
    /// Verdict at the last zero.
    pub last_verdict: Option<ContinuationVerdict>,
}

impl RingPattern {
    fn from_zeros(zeros: Vec<f64>, classification: Classification, q_star_bound: f64) -> Self {
        let widths: Vec<f64> = zeros.windows(2).map(|w| w[1] - w[0]).collect();
        let ratios: Vec<f64> = widths.windows(2).map(|w| w[1] / w[0]).collect();
        let x_star = *zeros.last().unwrap_or(&0.0);
        RingPattern { zeros, widths, ratios, classification, x_star, q_star_bound, last_verdict: None }
    }

    /// Whether precipitation is on in band n, i.e. on (xₙ, xₙ₊₁).
    pub fn band_is_ring(n: usize) -> bool {
        n.is_multiple_of(2)
    }
}

/// ω(x) = Γ − Σ_{xᵢ<x} (−1)ⁱ ρᵢ(x), with `zeros` starting at x₀ = 0.
pub fn omega_eval<K: Kernel + ?Sized>(kern: &K, zeros: &[f64], x: f64) -> f64 {
    let mut s = 0.0;
    for (i, &xi) in zeros.iter().enumerate() {
        if xi >= x {
            break;
        }
        let rho = x * x * kern.tail(Ratio::of(xi, x));
        if i % 2 == 0 {
            s += rho;
        } else {
            s -= rho;
        }
    }
    kern.gamma_const() - s
}

/// ρ_c(x₀ + dx) − ρ_c(x₀) for dx ≥ 0, x₀ > 0.
fn rho_increment<K: Kernel + ?Sized>(kern: &K, c: f64, x0: f64, dx: f64) -> f64 {
    let x = x0 + dx;
    let t = kern.tail(Ratio { theta: c / x, comp: (x0 - c + dx) / x });
    let len = c * dx / (x * x0);
    let head = if c == 0.0 {
        0.0
    } else {
        let a = Ratio { theta: c / x, comp: (x0 - c + dx) / x };
        x0 * x0 * kern.cum_between(a, Ratio::of(c, x0), len)
    };
    dx * (x + x0) * t + head
}

/// Both continuation candidates at offset `dx` past the last zero, as
/// (ω_on, ω_off, scale). See [`candidates`].
pub fn candidates_at_offset<K: Kernel + ?Sized>(kern: &K, zeros: &[f64], dx: f64) -> (f64, f64, f64) {
    let n = zeros.len() - 1;
    let xn = zeros[n];
    let x = xn + dx;
    if n == 0 {
        let c = x * x * kern.total();
        let g = kern.gamma_const();
        return (g - c, g, g.max(c));
    }
    // The partial sum over i < n continues the state of band n − 1 past xₙ.
    let mut sum = 0.0;
    let mut scale = 0.0;
    for (i, &xi) in zeros[..n].iter().enumerate() {
        let inc = rho_increment(kern, xi, xn, dx);
        scale += inc.abs();
        if i % 2 == 0 {
            sum -= inc;
        } else {
            sum += inc;
        }
    }
    let rho_n = x * x * kern.tail(Ratio { theta: xn / x, comp: dx / x });
    if n % 2 == 1 {
        (sum, sum + rho_n, scale + rho_n)
    } else {
        (sum - rho_n, sum, scale + rho_n)
    }
}

/// Both continuation candidates past the last zero, as (ω_on, ω_off, scale):
/// ω_on has precipitation on (xₙ, x), ω_off has it off. `scale` bounds the
/// magnitude of the summed terms and sets the rounding floor.
pub fn candidates<K: Kernel + ?Sized>(kern: &K, zeros: &[f64], x: f64) -> (f64, f64, f64) {
    let xn = *zeros.last().expect("zeros start with x0 = 0");
    candidates_at_offset(kern, zeros, x - xn)
}

fn natural_at_offset<K: Kernel + ?Sized>(kern: &K, zeros: &[f64], dx: f64) -> f64 {
    let (on, off, _) = candidates_at_offset(kern, zeros, dx);
    if RingPattern::band_is_ring(zeros.len() - 1) {
        on
    } else {
        off
    }
}

/// The candidate that continues the natural alternation (precipitation on
/// in band n iff n is even) past the last zero xₙ.
pub fn band_omega<K: Kernel + ?Sized>(kern: &K, zeros: &[f64], x: f64) -> f64 {
    let xn = *zeros.last().expect("zeros start with x0 = 0");
    natural_at_offset(kern, zeros, x - xn)
}

/// One-sided derivative at the last zero, shared by both candidates
/// (K(1) = 0 makes ρₙ′(xₙ) vanish).
fn derivative_at_last_zero<K: Kernel + ?Sized>(kern: &K, zeros: &[f64]) -> f64 {
    let n = zeros.len() - 1;
    let xn = zeros[n];
    let mut d = 0.0;
    for (i, &xi) in zeros[..n].iter().enumerate() {
        let r = Ratio::of(xi, xn);
        let term = 2.0 * xn * kern.tail(r) + xi * kern.value(r);
        if i % 2 == 0 {
            d -= term;
        } else {
            d += term;
        }
    }
    d
}

/// Tests both sign hypotheses just past the last zero.
pub fn classify_continuation<K: Kernel + ?Sized>(kern: &K, zeros: &[f64], delta_probe: f64) -> ContinuationVerdict {
    let offsets: Vec<f64> = (0..=6).map(|j| delta_probe * 0.5f64.powi(j)).collect();
    let mut plus = Vec::with_capacity(7);
    let mut minus = Vec::with_capacity(7);
    let mut all_small = true;
    for &d in &offsets {
        let (on, off, scale) = candidates_at_offset(kern, zeros, d);
        let floor = 64.0 * f64::EPSILON * scale;
        if on.abs() > floor || off.abs() > floor {
            all_small = false;
        }
        plus.push(on);
        minus.push(off);
    }
    if all_small {
        let d = derivative_at_last_zero(kern, zeros);
        return ContinuationVerdict {
            positive_consistent: d > 0.0,
            negative_consistent: d < 0.0,
            probe_offsets: offsets,
            probe_plus: plus,
            probe_minus: minus,
            used_derivative: true,
        };
    }
    ContinuationVerdict {
        positive_consistent: plus.iter().all(|&v| v > 0.0),
        negative_consistent: minus.iter().all(|&v| v < 0.0),
        probe_offsets: offsets,
        probe_plus: plus,
        probe_minus: minus,
        used_derivative: false,
    }
}

/// Locates the next sign change of the band candidate past the last zero.
///
/// The scan starts `start_offset` past the last zero and grows the offset
/// geometrically by `tols.scan_growth`, with steps capped at
/// `tols.scan_step`; the bracket is then bisected to `tols.root_tol`.
pub fn next_zero<K: Kernel + ?Sized>(
    kern: &K,
    zeros: &[f64],
    start_offset: f64,
    tols: &RingTols,
    horizon: f64,
) -> Result<f64> {
    let xn = *zeros.last().expect("zeros start with x0 = 0");
    let positive = RingPattern::band_is_ring(zeros.len() - 1);
    let f = |dx: f64| {
        let v = natural_at_offset(kern, zeros, dx);
        if positive {
            v
        } else {
            -v
        }
    };
    let mut off = start_offset.max(f64::MIN_POSITIVE);
    let mut lo = off;
    if f(lo) <= 0.0 {
        return Ok(xn + bisect_zero(&f, 0.0, lo, tols.root_tol));
    }
    loop {
        let step = (off * (tols.scan_growth - 1.0)).min(tols.scan_step).max(off * 1e-3);
        off += step;
        if xn + off > horizon {
            return Err(Error::NotFound { horizon });
        }
        if f(off) <= 0.0 {
            return Ok(xn + bisect_zero(&f, lo, off, tols.root_tol));
        }
        lo = off;
    }
}

fn bisect_zero<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    // Invariant: f(lo) > 0 ≥ f(hi).
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The positive root q* of (1+q)^{1+σ} − q^{1+σ} − q − 1.
pub fn q_star(sigma: f64, tol: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < crate::kernel::sigma_max()) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} outside (0, log2(3) - 1)")));
    }
    let g = |q: f64| (1.0 + q).powf(1.0 + sigma) - q.powf(1.0 + sigma) - q - 1.0;
    let dg = |q: f64| (1.0 + sigma) * ((1.0 + q).powf(sigma) - q.powf(sigma)) - 1.0;
    // G′ decreases strictly from σ at 0 to a negative value at 1.
    let (mut a, mut b) = (0.0, 1.0);
    while b - a > 1e-15 {
        let m = 0.5 * (a + b);
        if dg(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let (mut lo, mut hi) = (a, 1.0);
    loop {
        let m = 0.5 * (lo + hi);
        let gm = g(m);
        if gm.abs() <= tol || hi - lo < 1e-16 {
            return Ok(m);
        }
        if gm > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
}

/// x* = x_last + d_last·q̂/(1−q̂), with q̂ the geometric mean of the last
/// `window` ratios clamped to [0, q_star_bound].
pub fn estimate_accumulation_window(pattern: &RingPattern, window: usize) -> Result<f64> {
    if pattern.widths.len() < 4 || pattern.ratios.len() < window || window == 0 {
        return Err(Error::InsufficientData(format!(
            "{} widths recorded; need at least 4 and {window} ratios",
            pattern.widths.len()
        )));
    }
    let last = &pattern.ratios[pattern.ratios.len() - window..];
    let q = (last.iter().map(|r| r.ln()).sum::<f64>() / window as f64).exp();
    let q = q.clamp(0.0, pattern.q_star_bound);
    let d = *pattern.widths.last().unwrap();
    Ok(*pattern.zeros.last().unwrap() + d * q / (1.0 - q))
}

/// [`estimate_accumulation_window`] with the last three ratios.
pub fn estimate_accumulation(pattern: &RingPattern) -> Result<f64> {
    estimate_accumulation_window(pattern, 3)
}

/// Iterates zero location and continuation checks until breakdown.
pub fn solve_pattern<K: Kernel + ?Sized>(kern: &K, limits: &RingLimits, tols: &RingTols) -> Result<RingPattern> {
    let q_bound = q_star(kern.sigma(), 1e-14)?;
    let mut zeros = vec![0.0];
    let mut min_width = limits.min_width;
    let mut verdict: Option<ContinuationVerdict> = None;
    let finish = |zeros: Vec<f64>, class, verdict: Option<ContinuationVerdict>| {
        let mut p = RingPattern::from_zeros(zeros, class, q_bound);
        p.last_verdict = verdict;
        p
    };
    loop {
        if zeros.len() > limits.max_zeros {
            return Ok(finish(zeros, Classification::Truncated, verdict));
        }
        let n = zeros.len() - 1;
        let start = if n == 0 {
            tols.scan_step
        } else {
            tols.probe_frac * (zeros[n] - zeros[n - 1])
        };
        let x = match next_zero(kern, &zeros, start, tols, limits.horizon) {
            Ok(x) => x,
            Err(Error::NotFound { .. }) => return Ok(finish(zeros, Classification::Truncated, verdict)),
            Err(e) => return Err(e),
        };
        let width = x - zeros[n];
        zeros.push(x);
        let mw = *min_width.get_or_insert(1e-9 * x);
        if width < mw && zeros.len() >= 6 {
            let mut p = finish(zeros, Classification::NonDegenerateAccumulation, verdict);
            p.x_star = estimate_accumulation(&p)?;
            return Ok(p);
        }
        let v = classify_continuation(kern, &zeros, tols.probe_frac * width);
        let natural_on = RingPattern::band_is_ring(zeros.len() - 1);
        let natural = if natural_on { v.positive_consistent } else { v.negative_consistent };
        if v.positive_consistent && v.negative_consistent {
            return Err(Error::Ambiguous { x });
        }
        if v.is_degenerate() {
            return Ok(finish(zeros, Classification::Degenerate, Some(v)));
        }
        if !natural {
            // The sign did not actually change: ω touched zero and turned back.
            return Ok(finish(zeros, Classification::Truncated, Some(v)));
        }
        verdict = Some(v);
    }
}
