//! A kernel whose ring solution cannot be continued past the end of the
//! first gap.
//!
//! Starting from a template K⋆ = θ²G⋆ with zeros x₁ < x₂, the solution ω⋆
//! is modified near x₂ into ω_ε, which touches zero tangentially at x₂ + ε
//! and then behaves like ½x²∫_{(x₂+ε)/x}^1 K⋆. The kernel that reproduces
//! ω_ε through the integral equation is read off on [r, 1] with
//! r = x₁/(x₂ + 2ε); on [0, r) it is completed by a spline head chosen so
//! that ∫K and ∫K/θ² keep their template values.

use crate::error::{Error, Result};
use crate::kernel::{short_span_integral, Kernel, Ratio, TabulatedKernel};
use crate::quad::{adaptive, AdaptiveOpts, GaussLegendre};
use crate::rings::{self, Classification, ContinuationVerdict, RingLimits, RingPattern, RingTols};

/// Zeros of the template solution are only located to this width near the
/// tangential zero x₂ + ε.
pub const DEGENERACY_ROOT_TOL: f64 = 1e-8;

const MAX_HALVINGS: usize = 40;
const MAX_POWER: usize = 200;
const POSITIVITY_SAMPLES: usize = 1000;

/// The template solution ω⋆ on [0, x₂].
#[derive(Debug, Clone)]
pub struct TemplateSolution<T> {
    pub template: T,
    pub gamma: f64,
    pub total: f64,
    pub x1: f64,
    pub x2: f64,
}

impl<T: Kernel> TemplateSolution<T> {
    /// Locates x₁ and x₂ with the ring solver.
    pub fn new(template: T) -> Result<Self> {
        let tols = RingTols::default();
        let x1 = rings::next_zero(&template, &[0.0], tols.scan_step, &tols, 1e6)?;
        let x2 = rings::next_zero(&template, &[0.0, x1], 1e-6 * x1, &tols, 1e6)?;
        let gamma = template.gamma_const();
        let total = template.total();
        Ok(TemplateSolution { template, gamma, total, x1, x2 })
    }

    pub fn omega(&self, x: f64) -> f64 {
        if x < self.x1 {
            self.gamma - x * x * self.total
        } else {
            self.gamma - x * x * (self.total - self.template.tail(Ratio::of(self.x1, x)))
        }
    }

    pub fn omega_prime(&self, x: f64) -> f64 {
        if x < self.x1 {
            -2.0 * x * self.total
        } else {
            let r = Ratio::of(self.x1, x);
            -2.0 * x * (self.total - self.template.tail(r)) + self.x1 * self.template.value(r)
        }
    }
}

/// The modified solution ω_ε on [0, x₂ + 2ε].
#[derive(Debug, Clone)]
pub struct GapBridge<T> {
    pub base: TemplateSolution<T>,
    pub epsilon: f64,
    /// x₂ − ε, where the cubic bridge starts.
    pub xa: f64,
    /// x₂ + ε, the tangential zero.
    pub xb: f64,
    /// x₂ + 2ε, the end of the domain.
    pub xe: f64,
    /// End of the ½x²∫K⋆ piece.
    pub z: f64,
    z_slope: f64,
    p0: f64,
    m0: f64,
}

/// Builds ω_ε for the given ε.
pub fn build_gap_bridge<T: Kernel>(base: TemplateSolution<T>, epsilon: f64) -> Result<GapBridge<T>> {
    let d2 = base.omega_prime(base.x2);
    if d2 <= 0.0 {
        return Err(Error::TangentialTemplate { derivative: d2 });
    }
    if !(epsilon > 0.0 && base.x2 - epsilon > base.x1) {
        return Err(Error::BridgeInfeasible(format!("epsilon = {epsilon} does not fit inside the first gap")));
    }
    let xa = base.x2 - epsilon;
    let xb = base.x2 + epsilon;
    let xe = base.x2 + 2.0 * epsilon;
    let p0 = base.omega(xa);
    let m0 = base.omega_prime(xa);
    if !(p0 < 0.0 && m0 > 0.0) {
        return Err(Error::BridgeInfeasible(format!(
            "template not increasing through zero at x2 - epsilon (value {p0:e}, slope {m0:e})"
        )));
    }
    // A cubic from (p0, m0) to (0, 0) is monotone iff m0 ≤ 3·secant.
    let secant = -p0 / (xb - xa);
    if m0 > 3.0 * secant {
        return Err(Error::BridgeInfeasible(format!("slope ratio {} exceeds 3", m0 / secant)));
    }
    let mut bridge = GapBridge { base, epsilon, xa, xb, xe, z: xe, z_slope: 0.0, p0, m0 };
    let half = 0.5 * bridge.base.gamma;
    if bridge.right_piece(xe) >= half {
        let (mut lo, mut hi) = (xb, xe);
        while hi - lo > 1e-15 * hi {
            let mid = 0.5 * (lo + hi);
            if bridge.right_piece(mid) < half {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        bridge.z = hi;
    }
    bridge.z_slope = bridge.right_piece_prime(bridge.z);
    Ok(bridge)
}

impl<T: Kernel> GapBridge<T> {
    fn right_piece(&self, x: f64) -> f64 {
        0.5 * x * x * self.base.template.tail(Ratio::of(self.xb, x))
    }

    fn right_piece_prime(&self, x: f64) -> f64 {
        let r = Ratio::of(self.xb, x);
        x * self.base.template.tail(r) + 0.5 * self.xb * self.base.template.value(r)
    }

    pub fn omega(&self, x: f64) -> f64 {
        if x <= self.xa {
            self.base.omega(x)
        } else if x < self.xb {
            let h = self.xb - self.xa;
            let t = (x - self.xa) / h;
            let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
            let h10 = t * (1.0 - t) * (1.0 - t);
            h00 * self.p0 + h10 * h * self.m0
        } else if x <= self.z {
            self.right_piece(x)
        } else {
            let g = self.base.gamma;
            g - 0.5 * g * (-2.0 * self.z_slope * (x - self.z) / g).exp()
        }
    }

    pub fn omega_prime(&self, x: f64) -> f64 {
        if x <= self.xa {
            self.base.omega_prime(x)
        } else if x < self.xb {
            let h = self.xb - self.xa;
            let t = (x - self.xa) / h;
            let d00 = 6.0 * t * (t - 1.0);
            let d10 = (1.0 - t) * (1.0 - 3.0 * t);
            (d00 * self.p0 + d10 * h * self.m0) / h
        } else if x <= self.z {
            self.right_piece_prime(x)
        } else {
            let g = self.base.gamma;
            self.z_slope * (-2.0 * self.z_slope * (x - self.z) / g).exp()
        }
    }
}

/// The kernel K_ε on [r, 1] read off from ω_ε.
#[derive(Debug, Clone)]
pub struct PartialKernel<T> {
    pub bridge: GapBridge<T>,
    /// x₁/(x₂ + 2ε).
    pub r: f64,
    /// x₁/(x₂ − ε); K_ε = K⋆ above this point.
    pub theta_c: f64,
    tail_c: f64,
    f_c: f64,
}

/// Derives K_ε from the bridge and checks its positivity.
pub fn kernel_from_bridge<T: Kernel>(bridge: GapBridge<T>) -> Result<PartialKernel<T>> {
    let x1 = bridge.base.x1;
    let r = x1 / bridge.xe;
    let theta_c = x1 / bridge.xa;
    let tail_c = bridge.base.template.tail(Ratio::of(x1, bridge.xa));
    let mut pk = PartialKernel { bridge, r, theta_c, tail_c, f_c: 0.0 };
    pk.f_c = pk.antiderivative(theta_c);
    for i in 0..=POSITIVITY_SAMPLES {
        let theta = r + (theta_c - r) * i as f64 / POSITIVITY_SAMPLES as f64;
        let v = pk.value_at(theta);
        if !(v > 0.0) {
            return Err(Error::PositivityViolation { theta, value: v });
        }
    }
    Ok(pk)
}

impl<T: Kernel> PartialKernel<T> {
    fn gamma(&self) -> f64 {
        self.bridge.base.gamma
    }

    /// F(θ) = (ω_ε(x₁/θ) − Γ)θ²/x₁², so that ∫_θ^{θ_c} K_ε = F(θ) − F(θ_c).
    fn antiderivative(&self, theta: f64) -> f64 {
        let x1 = self.bridge.base.x1;
        (self.bridge.omega(x1 / theta) - self.gamma()) * theta * theta / (x1 * x1)
    }

    fn value_at(&self, theta: f64) -> f64 {
        self.value(Ratio::new(theta))
    }

    /// K_ε(θ) for θ ∈ [r, 1].
    pub fn value(&self, r: Ratio) -> f64 {
        if r.theta >= self.theta_c {
            return self.bridge.base.template.value(r);
        }
        let x1 = self.bridge.base.x1;
        let x = x1 / r.theta;
        self.bridge.omega_prime(x) / x1 - 2.0 * r.theta * (self.bridge.omega(x) - self.gamma()) / (x1 * x1)
    }

    /// ∫_θ^1 K_ε for θ ∈ [r, 1].
    pub fn tail(&self, r: Ratio) -> f64 {
        if r.theta >= self.theta_c {
            return self.bridge.base.template.tail(r);
        }
        self.tail_c + self.antiderivative(r.theta) - self.f_c
    }

    /// Breakpoints of K_ε inside (r, θ_c).
    pub fn breakpoints(&self) -> Vec<f64> {
        let x1 = self.bridge.base.x1;
        let mut b = vec![x1 / self.bridge.xb];
        if self.bridge.z < self.bridge.xe {
            b.push(x1 / self.bridge.z);
        }
        b
    }

    /// ∫_r^1 K_ε/θ².
    pub fn g_tail(&self) -> Result<f64> {
        Ok(self.gamma() - self.template_g_head()? + self.g_between(self.r)?)
    }

    /// ∫_0^{θ_c} G⋆.
    fn template_g_head(&self) -> Result<f64> {
        let tpl = &self.bridge.base.template;
        adaptive(
            |t| if t == 0.0 { 0.0 } else { tpl.eval(t) / (t * t) },
            &[0.0, self.theta_c],
            AdaptiveOpts::rel(1e-13),
        )
    }

    /// ∫_θ^{θ_c} G_ε for θ ≥ r.
    fn g_between(&self, theta: f64) -> Result<f64> {
        let mut breaks = vec![theta];
        breaks.extend(self.breakpoints().into_iter().filter(|&b| b > theta));
        breaks.push(self.theta_c);
        breaks.sort_by(f64::total_cmp);
        adaptive(|t| self.value_at(t) / (t * t), &breaks, AdaptiveOpts::rel(1e-13))
    }

    /// (∫K⋆ − ∫_r^1 K_ε, Γ − ∫_r^1 G_ε), the quantities whose ratio is
    /// compared against r².
    pub fn head_masses(&self) -> Result<(f64, f64)> {
        let num = self.bridge.base.total - self.tail(Ratio::new(self.r));
        let den = self.template_g_head()? - self.g_between(self.r)?;
        Ok((num, den))
    }
}

/// Scans ε = x₂·2⁻ᵏ, k = 2, 3, …, for the first admissible bridge whose head
/// masses satisfy num/den ≤ 0.9·r².
pub fn choose_epsilon<T: Kernel + Clone>(base: &TemplateSolution<T>) -> Result<f64> {
    let d2 = base.omega_prime(base.x2);
    if d2 <= 0.0 {
        return Err(Error::TangentialTemplate { derivative: d2 });
    }
    for k in 2..MAX_HALVINGS + 2 {
        let eps = base.x2 * 0.5f64.powi(k as i32);
        let bridge = match build_gap_bridge(base.clone(), eps) {
            Ok(b) => b,
            Err(Error::BridgeInfeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        let pk = match kernel_from_bridge(bridge) {
            Ok(p) => p,
            Err(Error::PositivityViolation { .. }) => continue,
            Err(e) => return Err(e),
        };
        let (num, den) = pk.head_masses()?;
        if num > 0.0 && den > 0.0 && num / den <= 0.9 * pk.r * pk.r {
            return Ok(eps);
        }
    }
    Err(Error::EpsilonNotFound { halvings: MAX_HALVINGS })
}

/// Spline head parameters on [0, r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadSpline {
    pub r: f64,
    pub r_star: f64,
    pub n_power: usize,
    pub lambda_star: f64,
    /// k⋆/B₁(λ⋆).
    pub scale: f64,
    /// G_ε(r).
    pub g_r: f64,
}

impl HeadSpline {
    fn b1(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.r_star {
            0.0
        } else {
            (t * (self.r_star - t)).powi(4)
        }
    }

    fn b2(&self, t: f64) -> f64 {
        if t <= self.r_star || t >= self.r {
            0.0
        } else {
            ((self.r - t) * (t - self.r_star)).powi(4)
        }
    }

    /// K̂/θ² on [0, r).
    pub fn g_value(&self, t: f64) -> f64 {
        let l = self.lambda_star;
        self.scale * (l * self.b1(t) + (1.0 - l) * self.b2(t)) + self.g_r * (t / self.r).powi(self.n_power as i32)
    }

    /// K̂ on [0, r).
    pub fn value(&self, t: f64) -> f64 {
        t * t * self.g_value(t)
    }

    /// ∫_θ^r K̂ for θ ∈ [0, r].
    pub fn integral_from(&self, theta: f64) -> f64 {
        let gl = gl6();
        let l = self.lambda_star;
        let mut s = 0.0;
        if theta < self.r_star {
            s += l * self.scale * gl.integrate(theta, self.r_star, |t| t * t * self.b1(t));
        }
        let lo = theta.max(self.r_star);
        s += (1.0 - l) * self.scale * gl.integrate(lo, self.r, |t| t * t * self.b2(t));
        let m = self.n_power as i32 + 3;
        s + self.g_r * self.r * self.r * self.r * (1.0 - (theta / self.r).powi(m)) / m as f64
    }

    /// ∫_0^r K̂/θ².
    pub fn g_integral(&self) -> f64 {
        let gl = gl6();
        let l = self.lambda_star;
        l * self.scale * gl.integrate(0.0, self.r_star, |t| self.b1(t))
            + (1.0 - l) * self.scale * gl.integrate(self.r_star, self.r, |t| self.b2(t))
            + self.g_r * self.r / (self.n_power as f64 + 1.0)
    }
}

fn gl6() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(6))
}

/// Chooses n, r⋆ and λ⋆ and returns the completed kernel.
pub fn fill_head<T: Kernel>(partial: PartialKernel<T>) -> Result<DegenerateKernel<T>> {
    let r = partial.r;
    let (num, den) = partial.head_masses()?;
    let g_r = partial.value_at(r) / (r * r);
    let mut found = None;
    for n in 1..=MAX_POWER {
        let k_star = num - g_r * r.powi(3) / (n as f64 + 3.0);
        let d_star = den - g_r * r / (n as f64 + 1.0);
        if k_star > 0.0 && d_star > 0.0 && k_star / d_star < r * r {
            found = Some((n, k_star, d_star));
            break;
        }
    }
    let (n_power, k_star, d_star) = found.ok_or(Error::NoN { max: MAX_POWER })?;
    let rs2 = k_star / d_star;
    let r_star = rs2.sqrt();
    // Beta-function moments of θ⁴(r⋆−θ)⁴ on [0, r⋆] and (r−θ)⁴(θ−r⋆)⁴ on [r⋆, r].
    let j1 = r_star.powi(9) / 630.0;
    let i1 = r_star.powi(11) / 2310.0;
    let len = r - r_star;
    let j2 = len.powi(9) / 630.0;
    let i2 = len.powi(9) * (rs2 / 630.0 + r_star * len / 630.0 + len * len / 2310.0);
    let e1 = i1 - rs2 * j1;
    let e2 = i2 - rs2 * j2;
    let lambda = e2 / (e2 - e1);
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    let b1 = lambda * i1 + (1.0 - lambda) * i2;
    let head = HeadSpline { r, r_star, n_power, lambda_star: lambda, scale: k_star / b1, g_r };
    let tail_r = partial.tail(Ratio::new(r));
    let tpl = &partial.bridge.base.template;
    let (sigma, k_coeff, gamma) = (tpl.sigma(), tpl.k_coeff(), tpl.gamma_const());
    Ok(DegenerateKernel { partial, head, tail_r, sigma, k_coeff, gamma })
}

/// The completed kernel K̂ on [0, 1].
#[derive(Debug, Clone)]
pub struct DegenerateKernel<T> {
    pub partial: PartialKernel<T>,
    pub head: HeadSpline,
    tail_r: f64,
    sigma: f64,
    k_coeff: f64,
    gamma: f64,
}

impl<T: Kernel> DegenerateKernel<T> {
    /// Points where K̂ or one of its derivatives is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.head.r_star, self.head.r];
        b.extend(self.partial.breakpoints());
        b.push(self.partial.theta_c);
        b.sort_by(f64::total_cmp);
        b
    }

    /// ∫_0^1 K̂/θ² by quadrature over the pieces.
    pub fn g_total(&self) -> Result<f64> {
        Ok(self.head.g_integral() + self.partial.g_tail()?)
    }

    /// Samples K̂ on a Chebyshev grid plus breakpoints and returns the
    /// tabulated kernel.
    pub fn to_table(&self, n_points: usize) -> Result<TabulatedKernel> {
        let mut thetas: Vec<f64> = (0..=n_points)
            .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / n_points as f64).cos()))
            .collect();
        thetas.extend(self.breakpoints());
        thetas.sort_by(f64::total_cmp);
        thetas.dedup();
        let ks: Vec<f64> = thetas.iter().map(|&t| self.eval(t)).collect();
        TabulatedKernel::from_samples(&thetas, &ks, self.sigma, self.k_coeff, self.gamma)
    }
}

impl<T: Kernel> Kernel for DegenerateKernel<T> {
    fn value(&self, r: Ratio) -> f64 {
        if r.theta < self.head.r {
            self.head.value(r.theta.max(0.0))
        } else {
            self.partial.value(r)
        }
    }

    fn tail(&self, r: Ratio) -> f64 {
        if r.theta < self.head.r {
            self.tail_r + self.head.integral_from(r.theta.max(0.0))
        } else {
            self.partial.tail(r)
        }
    }

    fn gamma_const(&self) -> f64 {
        self.gamma
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn k_coeff(&self) -> f64 {
        self.k_coeff
    }

    fn cum_between(&self, a: Ratio, b: Ratio, len: f64) -> f64 {
        if len <= 0.0 {
            return 0.0;
        }
        // K̂ is only piecewise smooth; near a breakpoint the exact tail
        // difference is used. All breakpoints lie well below θ = 1, where
        // tails carry full relative precision.
        let near = self.breakpoints().into_iter().any(|p| p >= a.theta - len && p <= b.theta + len);
        if near {
            self.tail(a) - self.tail(b)
        } else {
            short_span_integral(self, a, b, len)
        }
    }
}

/// All parameters and the resulting kernel of the construction.
#[derive(Debug, Clone)]
pub struct DegenerateConstruction<T> {
    pub x1: f64,
    pub x2: f64,
    pub epsilon: f64,
    pub r: f64,
    pub r_star: f64,
    pub n_power: usize,
    pub lambda_star: f64,
    pub kernel: DegenerateKernel<T>,
}

impl<T: Kernel + Clone> DegenerateConstruction<T> {
    /// Runs the full pipeline on a template kernel.
    pub fn build(template: T) -> Result<Self> {
        let base = TemplateSolution::new(template)?;
        let epsilon = choose_epsilon(&base)?;
        Self::with_epsilon(base, epsilon)
    }

    /// Runs the pipeline with a fixed ε.
    pub fn with_epsilon(base: TemplateSolution<T>, epsilon: f64) -> Result<Self> {
        let (x1, x2) = (base.x1, base.x2);
        let partial = kernel_from_bridge(build_gap_bridge(base, epsilon)?)?;
        let kernel = fill_head(partial)?;
        let h = kernel.head;
        Ok(DegenerateConstruction {
            x1,
            x2,
            epsilon,
            r: h.r,
            r_star: h.r_star,
            n_power: h.n_power,
            lambda_star: h.lambda_star,
            kernel,
        })
    }

    /// The tangential zero x₂ + ε.
    pub fn x_break(&self) -> f64 {
        self.x2 + self.epsilon
    }
}

/// Outcome of [`verify_degeneracy`].
#[derive(Debug, Clone)]
pub struct DegeneracyReport {
    pub pattern: RingPattern,
    pub verdict: ContinuationVerdict,
    /// ∫K̂ − ∫K⋆.
    pub mass_error: f64,
    /// ∫Ĝ − Γ.
    pub gamma_error: f64,
    /// Candidates at x₂ + ε + 10⁻⁴ (or a quarter of ε if smaller).
    pub probe_x: f64,
    pub on_candidate: f64,
    pub off_candidate: f64,
    /// −½x²∫_{(x₂+ε)/x}^1 K⋆ at `probe_x`.
    pub on_expected: f64,
}

/// Solves the ring problem for K̂ and checks every ingredient of the
/// degeneracy argument; fails with the first violated check.
pub fn verify_degeneracy<T: Kernel + Clone>(c: &DegenerateConstruction<T>) -> Result<DegeneracyReport> {
    let k = &c.kernel;
    let fail = |m: String| Err(Error::VerificationFailed(m));
    let template = &k.partial.bridge.base.template;
    let mass_error = k.total() - template.total();
    let gamma_error = k.g_total()? - template.gamma_const();
    if mass_error.abs() > 1e-8 {
        return fail(format!("mass identity off by {mass_error:e}"));
    }
    if gamma_error.abs() > 1e-8 {
        return fail(format!("Gamma identity off by {gamma_error:e}"));
    }
    let tols = RingTols { scan_step: (c.epsilon / 8.0).min(RingTols::default().scan_step), ..RingTols::default() };
    let limits = RingLimits { max_zeros: 10, min_width: None, horizon: 10.0 * c.x2 };
    let pattern = rings::solve_pattern(k, &limits, &tols)?;
    if pattern.zeros.len() != 3 {
        return fail(format!("expected zeros 0, x1, x2 + eps; found {:?}", pattern.zeros));
    }
    if (pattern.zeros[1] - c.x1).abs() > 10.0 * DEGENERACY_ROOT_TOL {
        return fail(format!("first zero {} differs from x1 = {}", pattern.zeros[1], c.x1));
    }
    if (pattern.zeros[2] - c.x_break()).abs() > 10.0 * DEGENERACY_ROOT_TOL {
        return fail(format!("second zero {} differs from x2 + eps = {}", pattern.zeros[2], c.x_break()));
    }
    if pattern.classification != Classification::Degenerate {
        return fail(format!("classification {}", pattern.classification));
    }
    let verdict = pattern.last_verdict.clone().expect("degenerate patterns carry a verdict");
    let probe_x = c.x_break() + (1e-4f64).min(0.25 * c.epsilon);
    let (on, off, _) = rings::candidates(k, &[0.0, c.x1, c.x_break()], probe_x);
    let on_expected = -0.5 * probe_x * probe_x * template.tail(Ratio::of(c.x_break(), probe_x));
    if !(on < 0.0 && off > 0.0) {
        return fail(format!("candidates at {probe_x}: on = {on:e}, off = {off:e}"));
    }
    if (on - on_expected).abs() > 1e-8 * on_expected.abs().max(1e-12) {
        return fail(format!("positive candidate {on:e} differs from {on_expected:e}"));
    }
    Ok(DegeneracyReport {
        pattern,
        verdict,
        mass_error,
        gamma_error,
        probe_x,
        on_candidate: on,
        off_candidate: off,
        on_expected,
    })
}
