//! Self-similar profile: the eigenvalue pair (κ, γ) and the profiles Φ, Ψ.

use crate::error::{Error, Result};
use crate::specfun::{erfcx, kummer_m, SeriesAccuracy};
use std::f64::consts::PI;

/// Physical parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub u_star: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, u_star: f64) -> Result<Self> {
        let p = ModelParams { alpha, beta, u_star };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("u_star", self.u_star)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive and finite")));
            }
        }
        if self.alpha * self.alpha / 4.0 > crate::specfun::KUMMER_Z_MAX {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} too large (alpha^2/4 must not exceed {})",
                self.alpha,
                crate::specfun::KUMMER_Z_MAX
            )));
        }
        Ok(())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { alpha: 1.0, beta: 1.0, u_star: 0.2 }
    }
}

/// Upper end of the κ bracket.
pub const KAPPA_MAX: f64 = 50.0;

/// The threshold value u*_γ(κ) for which κ solves the eigenvalue problem.
pub fn u_star_of_kappa(params: &ModelParams, kappa: f64, acc: SeriesAccuracy) -> Result<f64> {
    let a = params.alpha;
    let z = -a * a / 4.0;
    let first = if kappa == 0.0 {
        0.0
    } else {
        let num = kummer_m(kappa / 2.0 + 1.0, kappa + 0.5, z, acc)?;
        let den = kummer_m(kappa / 2.0, kappa + 0.5, z, acc)?;
        kappa * num / (a * den)
    };
    let second = 1.0 / (PI.sqrt() * erfcx(a / 2.0));
    Ok(a * params.beta / 2.0 / (first + second))
}

/// Solved self-similar profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub params: ModelParams,
    pub kappa: f64,
    pub gamma: f64,
    /// Prefactor c₁ with Φ(η) = c₁ η^κ M(κ/2, κ+½, −η²/4) for η < α.
    pub c1: f64,
    m_alpha: f64,
    acc: SeriesAccuracy,
}

/// Result of the solvability check, with both candidate thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solvability {
    pub solvable: bool,
    /// u*_γ at κ = 0 (equals Ψ(α)).
    pub u0_kappa0: f64,
    /// u*_γ at κ = 1.
    pub u0_kappa1: f64,
}

pub fn check_solvability(params: &ModelParams) -> Solvability {
    let acc = SeriesAccuracy::default();
    let u0 = u_star_of_kappa(params, 0.0, acc).unwrap_or(f64::NAN);
    let u1 = u_star_of_kappa(params, 1.0, acc).unwrap_or(f64::NAN);
    let umax = u_star_of_kappa(params, KAPPA_MAX, acc).unwrap_or(f64::NAN);
    let solvable = params.validate().is_ok() && params.u_star < u1 && params.u_star > umax;
    Solvability { solvable, u0_kappa0: u0, u0_kappa1: u1 }
}

/// Finds κ ∈ (1, 50] with u*_γ(κ) = u* and builds the profile.
pub fn solve_kappa(params: &ModelParams, tol: f64) -> Result<Profile> {
    params.validate()?;
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidParameter(format!("tol = {tol} must lie in (0, 1e-6]")));
    }
    let acc = SeriesAccuracy::default();
    let f = |k: f64| -> Result<f64> { Ok(u_star_of_kappa(params, k, acc)? - params.u_star) };
    let mut lo = 1.0;
    let mut hi = KAPPA_MAX;
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::NoRoot(format!(
            "u*_gamma(kappa) - u* has no sign change on (1, {KAPPA_MAX}]: values {flo:.6e} at kappa=1, {fhi:.6e} at kappa={KAPPA_MAX}"
        )));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm > 0.0 {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let fh = f(hi)?;
    let mut kappa = if fh != flo { lo - flo * (hi - lo) / (fh - flo) } else { 0.5 * (lo + hi) };
    if !(kappa > lo - 1e-12 && kappa < hi + 1e-12) {
        kappa = 0.5 * (lo + hi);
    }
    let resid = f(kappa)?;
    if resid.abs() > tol {
        return Err(Error::NonConvergence(format!("kappa residual {resid:.3e} above tolerance {tol:.1e}")));
    }
    Profile::with_kappa(*params, kappa)
}

impl Profile {
    /// Builds a profile for a given κ > 1 without checking the threshold equation.
    pub fn with_kappa(params: ModelParams, kappa: f64) -> Result<Profile> {
        if !(kappa > 1.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} must exceed 1")));
        }
        let acc = SeriesAccuracy::default();
        let a = params.alpha;
        let m_alpha = kummer_m(kappa / 2.0, kappa + 0.5, -a * a / 4.0, acc)?;
        let c1 = params.u_star / (a.powf(kappa) * m_alpha);
        Ok(Profile { params, kappa, gamma: kappa * (kappa - 1.0), c1, m_alpha, acc })
    }

    /// Residual u* − u*_γ(κ).
    pub fn residual(&self) -> Result<f64> {
        Ok(self.params.u_star - u_star_of_kappa(&self.params, self.kappa, self.acc)?)
    }

    /// Φ(η) for η ≥ 0.
    pub fn phi(&self, eta: f64) -> f64 {
        let a = self.params.alpha;
        let us = self.params.u_star;
        if eta < a {
            if eta <= 0.0 {
                return 0.0;
            }
            let m = kummer_m(self.kappa / 2.0, self.kappa + 0.5, -eta * eta / 4.0, self.acc)
                .expect("Kummer argument within validated range");
            us * (eta / a).powf(self.kappa) * m / self.m_alpha
        } else {
            us * (-(eta * eta - a * a) / 4.0).exp() * erfcx(eta / 2.0) / erfcx(a / 2.0)
        }
    }

    /// Φ from the erfc branch formula, evaluated at any η (used to check continuity at α).
    pub fn phi_outer(&self, eta: f64) -> f64 {
        let a = self.params.alpha;
        self.params.u_star * (-(eta * eta - a * a) / 4.0).exp() * erfcx(eta / 2.0) / erfcx(a / 2.0)
    }

    /// Φ from the Kummer branch formula, evaluated at any η ≥ 0.
    pub fn phi_inner(&self, eta: f64) -> Result<f64> {
        let a = self.params.alpha;
        let m = kummer_m(self.kappa / 2.0, self.kappa + 0.5, -eta * eta / 4.0, self.acc)?;
        Ok(self.params.u_star * (eta / a).powf(self.kappa) * m / self.m_alpha)
    }

    /// Asymptotic coefficient k of K(θ) ~ k √(1−θ) as θ → 1.
    pub fn k_coeff(&self) -> f64 {
        (2.0 / PI).sqrt() * self.params.u_star / self.params.alpha
    }
}

/// Checked evaluation of Φ.
pub fn phi_eval(profile: &Profile, eta: f64) -> Result<f64> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must be finite and nonnegative")));
    }
    Ok(profile.phi(eta))
}

/// Value of the precipitation-free profile on [0, α].
pub fn psi_alpha(params: &ModelParams) -> f64 {
    params.alpha * params.beta * PI.sqrt() / 2.0 * erfcx(params.alpha / 2.0)
}

/// Precipitation-free self-similar profile Ψ.
pub fn psi_eval(params: &ModelParams, eta: f64) -> f64 {
    let a = params.alpha;
    let pa = psi_alpha(params);
    if eta <= a {
        pa
    } else {
        pa * (-(eta * eta - a * a) / 4.0).exp() * erfcx(eta / 2.0) / erfcx(a / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_solves() {
        let p = solve_kappa(&ModelParams::default(), 1e-10).unwrap();
        assert!(p.residual().unwrap().abs() < 1e-10);
        assert_eq!(p.gamma, p.kappa * (p.kappa - 1.0));
        assert!((p.kappa - 1.769_601_248).abs() < 1e-6);
    }

    #[test]
    fn threshold_above_boundary_has_no_root() {
        let params = ModelParams::new(1.0, 1.0, 10.0).unwrap();
        assert!(matches!(solve_kappa(&params, 1e-10), Err(Error::NoRoot(_))));
        assert!(!check_solvability(&params).solvable);
    }

    #[test]
    fn candidate_thresholds() {
        let s = check_solvability(&ModelParams::default());
        assert!(s.solvable);
        assert!((s.u0_kappa1 - 0.284_006).abs() < 1e-5);
        assert!((s.u0_kappa0 - psi_alpha(&ModelParams::default())).abs() < 1e-14);
    }

    #[test]
    fn phi_branches_meet() {
        let p = solve_kappa(&ModelParams::default(), 1e-10).unwrap();
        assert!((p.phi(1.0) - 0.2).abs() < 1e-12);
        assert!((p.phi_inner(1.0).unwrap() - p.phi_outer(1.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(-1.0, 1.0, 0.2).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, 0.2).is_err());
        assert!(ModelParams::new(20.0, 1.0, 0.2).is_err());
    }
}
