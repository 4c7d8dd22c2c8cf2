//! Extended solutions (ω, ρ) of ω(x) = Γ − x²∫₀¹K(θ)ρ(xθ)dθ with ρ taken
//! from the Heaviside graph of ω, and the regular extension ω ≡ 0 past the
//! breakdown point.

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Ratio};
use crate::quad::GaussLegendre;
use crate::rings::RingPattern;
use std::sync::OnceLock;

/// Smooth ramp H_ε with H_ε = 0 below −ε, 1 above ε and H_ε(0) = ½.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub epsilon: f64,
}

impl Mollifier {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
        }
        Ok(Mollifier { epsilon })
    }

    pub fn eval(&self, z: f64) -> f64 {
        let t = (z + self.epsilon) / (2.0 * self.epsilon);
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            let a = (-1.0 / t).exp();
            let b = (-1.0 / (1.0 - t)).exp();
            a / (a + b)
        }
    }
}

/// Grid function on x_k = k·h, k = 0..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedSolution {
    pub h: f64,
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
}

impl MollifiedSolution {
    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.h
    }
}

const PICARD_TOL: f64 = 1e-12;
const PICARD_MAX: usize = 60;

fn grid_len(b: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("need b > 0 and h > 0 (b = {b}, h = {h})")));
    }
    let n = (b / h).round() as usize;
    if !(2..=2_000_000).contains(&n) {
        return Err(Error::InvalidParameter(format!("b/h = {} outside [2, 2e6]", b / h)));
    }
    Ok(n)
}

/// Marches the mollified equation across the grid.
///
/// Panel j contributes ½(H_j + H_{j+1})·x_k²[T(j/k) − T((j+1)/k)] to the
/// integral at x_k, with T(θ) = ∫_θ^1 K; the unknown H_k enters only
/// through the last panel and is resolved by Picard iteration.
pub fn mollified_solve<K: Kernel + ?Sized>(kern: &K, moll: Mollifier, b: f64, h: f64) -> Result<MollifiedSolution> {
    Ok(mollified_solve_levels(kern, &[moll], b, h)?.remove(0))
}

/// [`mollified_solve`] for several mollifiers at once, sharing the kernel
/// tails T(j/k), which do not depend on ε or h.
pub fn mollified_solve_levels<K: Kernel + ?Sized>(
    kern: &K,
    molls: &[Mollifier],
    b: f64,
    h: f64,
) -> Result<Vec<MollifiedSolution>> {
    for m in molls {
        if h > m.epsilon / 4.0 {
            return Err(Error::InvalidParameter(format!("h = {h} must not exceed epsilon/4 = {}", m.epsilon / 4.0)));
        }
    }
    let n = grid_len(b, h)?;
    let gamma = kern.gamma_const();
    let mut sols: Vec<MollifiedSolution> = molls
        .iter()
        .map(|m| {
            let mut omega = vec![0.0; n + 1];
            let mut rho = vec![0.0; n + 1];
            omega[0] = gamma;
            rho[0] = m.eval(gamma);
            MollifiedSolution { h, omega, rho }
        })
        .collect();
    let mut tails = vec![0.0; n + 1];
    for k in 1..=n {
        let kf = k as f64;
        for (j, t) in tails.iter_mut().enumerate().take(k + 1) {
            *t = kern.tail(Ratio { theta: j as f64 / kf, comp: (k - j) as f64 / kf });
        }
        let x = kf * h;
        let x2 = x * x;
        let w_last = 0.5 * tails[k - 1];
        for (sol, moll) in sols.iter_mut().zip(molls) {
            let rho = &sol.rho;
            let mut known = 0.0;
            for j in 0..k - 1 {
                known += 0.5 * (rho[j] + rho[j + 1]) * (tails[j] - tails[j + 1]);
            }
            known += w_last * rho[k - 1];
            let base = gamma - x2 * known;
            let mut w = sol.omega[k - 1];
            let mut converged = false;
            let mut change = f64::INFINITY;
            for _ in 0..PICARD_MAX {
                let next = base - x2 * w_last * moll.eval(w);
                change = (next - w).abs();
                w = next;
                if change < PICARD_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::PicardStall { x, change });
            }
            sol.omega[k] = w;
            sol.rho[k] = moll.eval(w);
        }
    }
    Ok(sols)
}

fn gl6() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(6))
}

/// x∫₀ˣ K(y/x) ρ(y) dy for the piecewise-linear interpolant of grid values
/// ρ_j at y_j = j·h, x = x_k, by Gauss–Legendre on each panel; on the last
/// panel y = x − h·t² removes the (1 − θ)^σ endpoint behaviour.
fn linear_history_integral<K: Kernel + ?Sized>(kern: &K, rho: &[f64], h: f64, k: usize) -> f64 {
    let gl = gl6();
    let x = k as f64 * h;
    let kf = k as f64;
    let mut s = 0.0;
    for j in 0..k {
        let (r0, r1) = (rho[j], rho[j + 1]);
        if r0 == 0.0 && r1 == 0.0 {
            continue;
        }
        if j + 1 < k {
            for (t, w) in gl.nodes.iter().zip(&gl.weights) {
                let u = 0.5 * (1.0 + t);
                let theta = (j as f64 + u) / kf;
                let comp = (kf - j as f64 - u) / kf;
                s += 0.5 * w * kern.value(Ratio { theta, comp }) * (r0 + (r1 - r0) * u);
            }
        } else {
            // y = x − h·t², t ∈ [0, 1], dy = 2h·t dt.
            for (t, w) in gl.nodes.iter().zip(&gl.weights) {
                let tt = 0.5 * (1.0 + t);
                let comp = tt * tt / kf;
                let u = 1.0 - tt * tt;
                s += 0.5 * w * kern.value(Ratio { theta: 1.0 - comp, comp }) * (r0 + (r1 - r0) * u) * 2.0 * tt;
            }
        }
    }
    x * s * h
}

fn parallel_map<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> Vec<f64> {
    let threads = std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1).min(16);
    let mut out = vec![0.0; n];
    let chunk = n.div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        for (c, slot) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (i, v) in slot.iter_mut().enumerate() {
                    *v = f(c * chunk + i);
                }
            });
        }
    });
    out
}

/// |ω(x_k) − Γ + x_k∫₀^{x_k}K(y/x_k)ρ(y)dy| at every grid node.
pub fn residual_profile<K: Kernel + ?Sized>(kern: &K, sol: &MollifiedSolution) -> Vec<f64> {
    let gamma = kern.gamma_const();
    parallel_map(sol.omega.len(), |k| {
        if k == 0 {
            return (sol.omega[0] - gamma).abs();
        }
        (sol.omega[k] - gamma + linear_history_integral(kern, &sol.rho, sol.h, k)).abs()
    })
}

/// Extended solution on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSolution {
    pub h: f64,
    pub x: Vec<f64>,
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
    /// Pointwise defect of the integral equation.
    pub residual_local: Vec<f64>,
    /// Sup of `residual_local`.
    pub residual: f64,
    pub epsilon_trace: Vec<f64>,
    /// max_k |ω_{εᵢ} − ω_{εᵢ₊₁}| between consecutive levels.
    pub level_differences: Vec<f64>,
}

impl ExtendedSolution {
    /// Largest violation of the relay inclusion with ω-tolerance `tol_omega`:
    /// ρ outside [0, 1], ρ ≠ 1 where ω > tol, ρ ≠ 0 where ω < −tol.
    pub fn relay_violation(&self, tol_omega: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (&w, &r) in self.omega.iter().zip(&self.rho) {
            worst = worst.max(-r).max(r - 1.0);
            if w > tol_omega {
                worst = worst.max((1.0 - r).abs());
            } else if w < -tol_omega {
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}

/// Runs [`mollified_solve`] down a decreasing sequence of ε and returns
/// the last level together with its residual certificate.
pub fn extended_solve<K: Kernel + ?Sized>(kern: &K, b: f64, h: f64, eps_sequence: &[f64]) -> Result<ExtendedSolution> {
    if eps_sequence.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon sequence".into()));
    }
    if eps_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("epsilon sequence must be strictly decreasing".into()));
    }
    let last_eps = *eps_sequence.last().unwrap();
    if last_eps < 4.0 * h {
        return Err(Error::InvalidParameter(format!("last epsilon {last_eps} is below 4h = {}", 4.0 * h)));
    }
    let molls = eps_sequence.iter().map(|&e| Mollifier::new(e)).collect::<Result<Vec<_>>>()?;
    let levels = mollified_solve_levels(kern, &molls, b, h)?;
    let diffs = levels
        .windows(2)
        .map(|w| w[0].omega.iter().zip(&w[1].omega).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let sol = levels.into_iter().last().unwrap();
    let residual_local = residual_profile(kern, &sol);
    let residual = residual_local.iter().cloned().fold(0.0, f64::max);
    Ok(ExtendedSolution {
        h,
        x: (0..sol.omega.len()).map(|k| sol.x(k)).collect(),
        omega: sol.omega,
        rho: sol.rho,
        residual_local,
        residual,
        epsilon_trace: eps_sequence.to_vec(),
        level_differences: diffs,
    })
}

/// ρ on (x*, b] for the regular extension ω ≡ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularExtension {
    pub x_star: f64,
    pub h: f64,
    /// Right panel ends x* + m·h, m = 1..=M.
    pub x: Vec<f64>,
    /// Constant value of ρ on each panel.
    pub rho: Vec<f64>,
    /// |Γ − x∫K(y/x)ρ̃(y)dy| at each panel end by independent quadrature.
    pub residual: Vec<f64>,
    /// Panels whose ρ leaves [−tol, 1 + tol].
    pub flagged: Vec<usize>,
    /// Fraction of [x_N, x*] covered by the unresolved rings.
    pub tail_fraction: f64,
}

/// Piecewise-constant precipitation history on [0, x*].
#[derive(Debug, Clone)]
struct History {
    /// Intervals with ρ = 1.
    rings: Vec<(f64, f64)>,
    /// Unresolved interval (x_N, x*) and its average ρ.
    tail: (f64, f64, f64),
}

impl History {
    fn from_pattern(p: &RingPattern) -> Self {
        let z = &p.zeros;
        let n = z.len() - 1;
        let mut rings = Vec::new();
        for i in (0..n).step_by(2) {
            rings.push((z[i], z[i + 1]));
        }
        let q = if p.ratios.len() >= 3 {
            let last = &p.ratios[p.ratios.len() - 3..];
            (last.iter().map(|r| r.ln()).sum::<f64>() / 3.0).exp().clamp(0.0, p.q_star_bound)
        } else {
            0.0
        };
        let frac = if RingPattern::band_is_ring(n) { 1.0 / (1.0 + q) } else { q / (1.0 + q) };
        History { rings, tail: (z[n], p.x_star, frac) }
    }

    /// ∫ over [a, b] of ρ against x·K(y/x), exactly via tails.
    fn exact<K: Kernel + ?Sized>(&self, kern: &K, x: f64) -> f64 {
        let piece = |a: f64, b: f64| x * x * (kern.tail(Ratio::of(a, x)) - kern.tail(Ratio::of(b, x)));
        let mut s: f64 = self.rings.iter().map(|&(a, b)| piece(a, b)).sum();
        let (a, b, f) = self.tail;
        if b > a {
            s += f * piece(a, b);
        }
        s
    }

    fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let mut v: Vec<(f64, f64, f64)> = self.rings.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        if self.tail.1 > self.tail.0 {
            v.push(self.tail);
        }
        v
    }
}

fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// x∫_a^b K(y/x) dy by Gauss–Legendre, with y = b − (b−a)t² when b = x.
fn gl_piece<K: Kernel + ?Sized>(kern: &K, x: f64, a: f64, b: f64) -> f64 {
    let gl = gl8();
    let len = b - a;
    let mut s = 0.0;
    if b >= x {
        for (t, w) in gl.nodes.iter().zip(&gl.weights) {
            let tt = 0.5 * (1.0 + t);
            let d = len * tt * tt;
            s += 0.5 * w * kern.value(Ratio { theta: (x - d) / x, comp: d / x }) * 2.0 * tt;
        }
    } else {
        for (t, w) in gl.nodes.iter().zip(&gl.weights) {
            let off = 0.5 * len * (1.0 + t);
            s += 0.5 * w * kern.value(Ratio { theta: (a + off) / x, comp: (x - a - off) / x });
        }
    }
    x * s * len
}

/// Solves Γ = x∫₀ˣK(y/x)ρ̃(y)dy on (x*, b] panel by panel, with ρ̃ the
/// relay history of `pattern` on [0, x*] and a constant unknown on each
/// new panel, collocated at the right panel end.
pub fn regular_extension_solve<K: Kernel + ?Sized>(
    kern: &K,
    pattern: &RingPattern,
    b: f64,
    h: f64,
) -> Result<RegularExtension> {
    let x_star = pattern.x_star;
    if pattern.zeros.len() < 2 || !(x_star.is_finite() && x_star > 0.0) {
        return Err(Error::InsufficientData("pattern has no breakdown point".into()));
    }
    let m = grid_len(b - x_star, h)?;
    let gamma = kern.gamma_const();
    let hist = History::from_pattern(pattern);
    let mut xs = Vec::with_capacity(m);
    let mut rho: Vec<f64> = Vec::with_capacity(m);
    for i in 1..=m {
        let x = x_star + i as f64 * h;
        let mut rhs = gamma - hist.exact(kern, x);
        for (l, &r) in rho.iter().enumerate() {
            let a = x_star + l as f64 * h;
            rhs -= r * x * x * (kern.tail(Ratio::of(a, x)) - kern.tail(Ratio::of(a + h, x)));
        }
        let a = x_star + (i - 1) as f64 * h;
        let coef = x * x * kern.tail(Ratio { theta: a / x, comp: h / x });
        if !(coef > 1e-300) {
            return Err(Error::SingularPanel { x, coefficient: coef });
        }
        rho.push(rhs / coef);
        xs.push(x);
    }
    let pieces = hist.pieces();
    let residual = parallel_map(m, |i| {
        let x = xs[i];
        let mut s = 0.0;
        for &(a, b, f) in &pieces {
            s += f * gl_piece(kern, x, a, b);
        }
        for (l, &r) in rho[..=i].iter().enumerate() {
            let a = x_star + l as f64 * h;
            let b = if l == i { x } else { a + h };
            s += r * gl_piece(kern, x, a, b);
        }
        (gamma - s).abs()
    });
    let tol = 1e-6;
    let flagged = rho.iter().enumerate().filter(|(_, &r)| r < -tol || r > 1.0 + tol).map(|(i, _)| i).collect();
    Ok(RegularExtension { x_star, h, x: xs, rho, residual, flagged, tail_fraction: hist.tail.2 })
}

/// The ring solution ω on a grid, for comparison with extended solutions.
pub fn ring_omega_on_grid<K: Kernel + ?Sized>(kern: &K, pattern: &RingPattern, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| crate::rings::omega_eval(kern, &pattern.zeros, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SyntheticKernel;

    #[test]
    fn mollifier_shape() {
        let m = Mollifier::new(0.1).unwrap();
        assert_eq!(m.eval(0.0), 0.5);
        assert_eq!(m.eval(0.1), 1.0);
        assert_eq!(m.eval(-0.1), 0.0);
        let mut prev = 0.0;
        for i in 0..=200 {
            let v = m.eval(-0.1 + 0.2 * i as f64 / 200.0);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn before_first_crossing_matches_closed_form() {
        let k = SyntheticKernel::new(0.5, 1.0).unwrap();
        let sol = mollified_solve(&k, Mollifier::new(1e-2).unwrap(), 1.0, 1e-3).unwrap();
        for i in [0usize, 250, 500, 1000] {
            let x = sol.x(i);
            assert!((sol.omega[i] - (2.0 / 3.0 - x * x * 16.0 / 105.0)).abs() < 1e-12);
        }
    }
}
