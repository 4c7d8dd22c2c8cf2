//! Memory kernels K(θ) on [0, 1] and their integrals.
//!
//! Kernels are accessed through [`Ratio`] arguments that carry both θ and
//! its complement 1 − θ. Ring widths shrink geometrically towards an
//! accumulation point, so the solver evaluates K and ∫K at θ = xᵢ/x with
//! 1 − θ as small as 1e-12; forming 1 − θ by subtraction would lose most
//! significant digits there.

mod hhmo;
mod synthetic;
mod table;

pub use hhmo::{
    f_diagnostic, g_eval, g_eval_log, gamma_const, k_eval, kernel_second_difference_sign_changes,
    HhmoKernelOpts,
};
pub use synthetic::SyntheticKernel;
pub use table::{build_kernel_table, KernelTable, TabulatedKernel};

use crate::quad::GaussLegendre;
use std::sync::OnceLock;

/// Upper end (exclusive) of the admissible degeneracy exponents.
pub fn sigma_max() -> f64 {
    3f64.log2() - 1.0
}

/// A point θ of [0, 1] together with its complement u = 1 − θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub theta: f64,
    pub comp: f64,
}

impl Ratio {
    /// θ given directly; the complement is formed by subtraction.
    pub fn new(theta: f64) -> Ratio {
        Ratio { theta, comp: 1.0 - theta }
    }

    /// θ = num/den with 0 ≤ num ≤ den, complement (den − num)/den.
    pub fn of(num: f64, den: f64) -> Ratio {
        Ratio { theta: num / den, comp: (den - num) / den }
    }

    /// Complement given directly.
    pub fn from_comp(comp: f64) -> Ratio {
        Ratio { theta: 1.0 - comp, comp }
    }

    pub const ZERO: Ratio = Ratio { theta: 0.0, comp: 1.0 };
    pub const ONE: Ratio = Ratio { theta: 1.0, comp: 0.0 };
}

fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// ∫_a^b K by 20-point Gauss–Legendre when the span is short compared
/// with the distance to θ = 1, by a difference of tails otherwise. This is
/// the default behind [`Kernel::cum_between`].
pub fn short_span_integral<K: Kernel + ?Sized>(k: &K, a: Ratio, b: Ratio, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if len <= 0.5 * b.comp {
        let rule = gl20();
        let h = 0.5 * len;
        let mut s = 0.0;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let off = h * (1.0 + t);
            s += w * k.value(Ratio { theta: a.theta + off, comp: a.comp - off });
        }
        s * h
    } else {
        k.tail(a) - k.tail(b)
    }
}

/// Kernel evaluator.
pub trait Kernel: Send + Sync {
    /// K(θ).
    fn value(&self, r: Ratio) -> f64;

    /// ∫_θ^1 K.
    fn tail(&self, r: Ratio) -> f64;

    /// Γ.
    fn gamma_const(&self) -> f64;

    /// Degeneracy exponent σ in K(θ) ~ k (1−θ)^σ.
    fn sigma(&self) -> f64;

    /// Asymptotic coefficient k.
    fn k_coeff(&self) -> f64;

    /// ∫_a^b K for a = θ_a ≤ θ_b = b, where `len` = θ_b − θ_a is supplied
    /// by the caller (it is often known far more accurately than the
    /// difference of the endpoints).
    fn cum_between(&self, a: Ratio, b: Ratio, len: f64) -> f64 {
        short_span_integral(self, a, b, len)
    }

    /// K(θ) for plain θ.
    fn eval(&self, theta: f64) -> f64 {
        self.value(Ratio::new(theta))
    }

    /// ∫_a^b K for plain endpoints.
    fn cum(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.cum(b, a);
        }
        self.cum_between(Ratio::new(a), Ratio::new(b), b - a)
    }

    /// ∫_0^1 K.
    fn total(&self) -> f64 {
        self.tail(Ratio::ZERO)
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn value(&self, r: Ratio) -> f64 {
        (**self).value(r)
    }
    fn tail(&self, r: Ratio) -> f64 {
        (**self).tail(r)
    }
    fn gamma_const(&self) -> f64 {
        (**self).gamma_const()
    }
    fn sigma(&self) -> f64 {
        (**self).sigma()
    }
    fn k_coeff(&self) -> f64 {
        (**self).k_coeff()
    }
    fn cum_between(&self, a: Ratio, b: Ratio, len: f64) -> f64 {
        (**self).cum_between(a, b, len)
    }
}

impl<K: Kernel + ?Sized> Kernel for Box<K> {
    fn value(&self, r: Ratio) -> f64 {
        (**self).value(r)
    }
    fn tail(&self, r: Ratio) -> f64 {
        (**self).tail(r)
    }
    fn gamma_const(&self) -> f64 {
        (**self).gamma_const()
    }
    fn sigma(&self) -> f64 {
        (**self).sigma()
    }
    fn k_coeff(&self) -> f64 {
        (**self).k_coeff()
    }
    fn cum_between(&self, a: Ratio, b: Ratio, len: f64) -> f64 {
        (**self).cum_between(a, b, len)
    }
}
