//! The kernel G(θ) derived from the self-similar profile, the symmetrized
//! kernel K(θ) = θ²(G(θ) + G(−θ)) and the constant Γ = γ ∫₋₁¹ G.
//!
//! G is evaluated in the substituted variable σ, where the integrand
//! exp(−1/σ²)·Φ(ζ(σ))/ζ(σ)³ is smooth on [0, z(θ)] with
//! ζ(σ) = α|θ|·√(1 + σ²α²(1−θ)²/4) and z(θ) = 2/(α|θ|)·√((1+θ)/(1−θ)).
//! For small |θ| the upper part of the range, where ζ ≥ 2α|θ|, is
//! integrated in log ζ instead, because the σ-integrand only decays
//! algebraically there.

use super::{Kernel, Ratio};
use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::quad::{adaptive, AdaptiveOpts};
use std::cell::Cell;
use std::f64::consts::PI;

/// Tolerances for the direct kernel quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhmoKernelOpts {
    pub quad_tol: f64,
    pub max_segments: usize,
}

impl Default for HhmoKernelOpts {
    fn default() -> Self {
        HhmoKernelOpts { quad_tol: 1e-12, max_segments: 4000 }
    }
}

fn check_tol(quad_tol: f64) -> Result<()> {
    if !(quad_tol > 0.0 && quad_tol <= 1e-6) {
        return Err(Error::InvalidParameter(format!("quad_tol = {quad_tol} must lie in (0, 1e-6]")));
    }
    Ok(())
}

/// Runs an adaptive quadrature whose integrand may itself fail.
fn fallible_adaptive<F>(mut f: F, breaks: &[f64], opts: AdaptiveOpts) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let failure: Cell<Option<Error>> = Cell::new(None);
    let out = adaptive(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        breaks,
        opts,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    out
}

/// G(θ) as `exp(log_prefactor) * integral`, so that callers can rescale
/// values that underflow near θ = −1.
pub fn g_eval_log(profile: &Profile, theta: f64, quad_tol: f64) -> Result<(f64, f64)> {
    check_tol(quad_tol)?;
    if !(-1.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [-1, 1]")));
    }
    let a = profile.params.alpha;
    if theta == 0.0 {
        if profile.kappa <= 2.0 {
            return Err(Error::SingularAtZero { kappa: profile.kappa });
        }
        return Ok(((a / PI.sqrt()).ln() - a * a / 4.0, g_zero_integral(profile, quad_tol)?));
    }
    if theta == 1.0 || theta == -1.0 {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    let w = theta.abs();
    let om = 1.0 - theta;
    let op = 1.0 + theta;
    let inv_z2 = a * a * w * w * om / (4.0 * op);
    let z = 1.0 / inv_z2.sqrt();
    let log_pref = (a.powi(3) * w * om / (2.0 * PI.sqrt())).ln() - a * a * om * om / 4.0 - inv_z2;
    let aw = a * w;
    let c = a * om / 2.0;
    let opts = AdaptiveOpts { rel_tol: quad_tol, abs_tol: 0.0, max_segments: 4000 };

    let zeta_c = a.min(2.0 * aw);
    let full_range = zeta_c >= a;
    let sigma_c = if full_range { z } else { 2.0 * 3f64.sqrt() / (a * om) };
    // Integrate in the offset v = σ_c − σ. When σ_c = z the exponent
    // 1/z² − 1/σ² = −v(2z − v)/(σ²z²) is then free of cancellation near
    // the endpoint, where the integrand is concentrated as θ → −1.
    let sigma_part = |v: f64| -> Result<f64> {
        let s = sigma_c - v;
        if s <= 0.0 {
            return Ok(0.0);
        }
        let e = if full_range { -v * (2.0 * z - v) / (s * s * z * z) } else { inv_z2 - 1.0 / (s * s) };
        if e < -745.0 {
            return Ok(0.0);
        }
        let zeta = aw * (1.0 + (s * c) * (s * c)).sqrt();
        Ok(e.exp() * profile.phi(zeta) / (zeta * zeta * zeta))
    };

    let breaks: Vec<f64> = [0.0, 0.003, 0.01, 0.03, 0.1, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|t| t * sigma_c)
        .collect();
    let mut integral = fallible_adaptive(sigma_part, &breaks, opts)?;

    if zeta_c < a {
        // ζ ∈ [2α|θ|, α] in the variable v = ln ζ.
        let a2w = a * a * w * om;
        let log_part = |v: f64| -> Result<f64> {
            let zeta = v.exp();
            let d = (zeta - aw) * (zeta + aw);
            let inv_s2 = a2w * a2w / (4.0 * d);
            let e = inv_z2 - inv_s2;
            if e < -745.0 {
                return Ok(0.0);
            }
            let dsigma = 2.0 * zeta * zeta / (a2w * d.sqrt());
            Ok(e.exp() * profile.phi(zeta) / (zeta * zeta * zeta) * dsigma)
        };
        let lo = zeta_c.ln();
        let hi = a.ln();
        let n = ((hi - lo) / 2.0).ceil().max(1.0) as usize;
        let breaks: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        integral += fallible_adaptive(log_part, &breaks, opts)?;
    }
    Ok((log_pref, integral))
}

/// ∫₀^α Φ(ζ)/ζ³ dζ for κ > 2, integrated in ln ζ.
fn g_zero_integral(profile: &Profile, quad_tol: f64) -> Result<f64> {
    let a = profile.params.alpha;
    let k = profile.kappa;
    // Integrand ~ ζ^{κ−2} in the variable ln ζ; cut where it falls below the tolerance.
    let span = (quad_tol * 1e-3).ln().abs() / (k - 2.0);
    let lo = a.ln() - span;
    let hi = a.ln();
    let n = (span / 2.0).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect();
    let opts = AdaptiveOpts { rel_tol: quad_tol, abs_tol: 0.0, max_segments: 4000 };
    fallible_adaptive(
        |v| {
            let zeta = v.exp();
            Ok(profile.phi(zeta) / (zeta * zeta))
        },
        &breaks,
        opts,
    )
}

/// G(θ) for θ ∈ [−1, 1].
pub fn g_eval(profile: &Profile, theta: f64, quad_tol: f64) -> Result<f64> {
    let (lp, i) = g_eval_log(profile, theta, quad_tol)?;
    if i == 0.0 {
        return Ok(0.0);
    }
    Ok(lp.exp() * i)
}

/// K(θ) = θ²(G(θ) + G(−θ)) for θ ∈ [0, 1].
pub fn k_eval(profile: &Profile, theta: f64, quad_tol: f64) -> Result<f64> {
    check_tol(quad_tol)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, 1]")));
    }
    if theta == 0.0 || theta == 1.0 {
        return Ok(0.0);
    }
    Ok(theta * theta * (g_eval(profile, theta, quad_tol)? + g_eval(profile, -theta, quad_tol)?))
}

/// Innermost point of the graded mesh used for Γ.
pub const GRADED_MESH_FLOOR: f64 = 1e-10;

/// Γ = γ ∫₋₁¹ G(θ) dθ.
pub fn gamma_const(profile: &Profile, quad_tol: f64) -> Result<f64> {
    gamma_const_with_floor(profile, quad_tol, GRADED_MESH_FLOOR)
}

/// Γ with the graded mesh stopped at `floor`; the remaining piece
/// [0, floor] is integrated from the leading-order behaviour of G near 0.
pub fn gamma_const_with_floor(profile: &Profile, quad_tol: f64, floor: f64) -> Result<f64> {
    check_tol(quad_tol)?;
    let mut breaks = vec![1.0];
    while breaks[breaks.len() - 1] * 0.5 >= floor {
        let next = breaks[breaks.len() - 1] * 0.5;
        breaks.push(next);
    }
    breaks.reverse();
    let theta_m = breaks[0];
    let inner = (quad_tol * 0.05).max(1e-15);
    let opts = AdaptiveOpts { rel_tol: quad_tol, abs_tol: 0.0, max_segments: 4000 };
    let k = profile.kappa;
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        total += fallible_adaptive(|t| g_eval(profile, sign * t, inner), &breaks, opts)?;
        let gm = g_eval(profile, sign * theta_m, inner)?;
        let tail = if (k - 2.0).abs() < 1e-12 {
            let l = -theta_m.ln();
            gm * theta_m * (1.0 + l) / l
        } else if k < 2.0 {
            gm * theta_m / (k - 1.0)
        } else {
            gm * theta_m
        };
        total += tail;
    }
    Ok(profile.gamma * total)
}

/// F(z) = z²K′(z) − 2zK(z) − 2∫_z^1 K, with K′ from a central difference.
pub fn f_diagnostic<K: Kernel + ?Sized>(kern: &K, z: f64) -> f64 {
    let h = (1e-4f64).min(0.25 * (1.0 - z)).min(0.25 * z);
    let kp = (kern.eval(z + h) - kern.eval(z - h)) / (2.0 * h);
    z * z * kp - 2.0 * z * kern.eval(z) - 2.0 * kern.tail(Ratio::new(z))
}

/// Locations of sign changes of the discrete second difference of K on the
/// uniform grid θᵢ = i/n, i = 1..n−1, evaluated by direct quadrature.
///
/// Clusters of sign changes in neighbouring cells are re-examined on a grid
/// ten times finer before they are reported.
pub fn kernel_second_difference_sign_changes(profile: &Profile, n: usize, quad_tol: f64) -> Result<Vec<(f64, i8)>> {
    let h = 1.0 / n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|i| k_eval(profile, i as f64 * h, quad_tol))
        .collect::<Result<_>>()?;
    let d2 = |v: &[f64], i: usize| v[i + 1] - 2.0 * v[i] + v[i - 1];
    let mut changes: Vec<(usize, i8)> = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for i in 1..n {
        let d = d2(&vals, i);
        if d == 0.0 {
            continue;
        }
        if let Some((_, prev)) = last {
            if prev.signum() != d.signum() {
                changes.push((i, if d < 0.0 { -1 } else { 1 }));
            }
        }
        last = Some((i, d));
    }
    let mut out = Vec::new();
    let mut idx = 0;
    while idx < changes.len() {
        let mut end = idx;
        while end + 1 < changes.len() && changes[end + 1].0 <= changes[end].0 + 2 {
            end += 1;
        }
        if end == idx {
            out.push((changes[idx].0 as f64 * h, changes[idx].1));
        } else {
            // Refine the cluster on a ×10 grid.
            let lo = (changes[idx].0.saturating_sub(2)) as f64 * h;
            let hi = ((changes[end].0 + 2).min(n)) as f64 * h;
            let m = 10 * ((hi - lo) / h).round() as usize;
            let hf = (hi - lo) / m as f64;
            let fine: Vec<f64> = (0..=m)
                .map(|j| k_eval(profile, (lo + j as f64 * hf).clamp(0.0, 1.0), quad_tol))
                .collect::<Result<_>>()?;
            let mut prev: Option<f64> = None;
            for j in 1..m {
                let d = d2(&fine, j);
                if d == 0.0 {
                    continue;
                }
                if let Some(p) = prev {
                    if p.signum() != d.signum() {
                        out.push((lo + j as f64 * hf, if d < 0.0 { -1 } else { 1 }));
                    }
                }
                prev = Some(d);
            }
        }
        idx = end + 1;
    }
    Ok(out)
}
