use super::{sigma_max, Kernel, Ratio};
use crate::error::{Error, Result};

/// Power-law template K(θ) = scale·θ²(1−θ)^σ with closed-form integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticKernel {
    sigma: f64,
    scale: f64,
}

impl SyntheticKernel {
    pub fn new(sigma: f64, scale: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < sigma_max()) {
            return Err(Error::InvalidParameter(format!(
                "sigma = {sigma} outside (0, log2(3) - 1)"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale = {scale} must be positive")));
        }
        Ok(SyntheticKernel { sigma, scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Kernel for SyntheticKernel {
    fn value(&self, r: Ratio) -> f64 {
        if r.comp <= 0.0 || r.theta <= 0.0 {
            return 0.0;
        }
        self.scale * r.theta * r.theta * r.comp.powf(self.sigma)
    }

    fn tail(&self, r: Ratio) -> f64 {
        // ∫_θ^1 θ'^2 (1−θ')^σ dθ' with θ' = 1 − v:
        // ∫_0^u (1−v)^2 v^σ dv = u^{σ+1}/(σ+1) − 2u^{σ+2}/(σ+2) + u^{σ+3}/(σ+3).
        let u = r.comp.clamp(0.0, 1.0);
        if u == 0.0 {
            return 0.0;
        }
        let s = self.sigma;
        let us = u.powf(s + 1.0);
        self.scale * us * (1.0 / (s + 1.0) - 2.0 * u / (s + 2.0) + u * u / (s + 3.0))
    }

    fn gamma_const(&self) -> f64 {
        self.scale / (1.0 + self.sigma)
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn k_coeff(&self) -> f64 {
        self.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_integral_and_gamma() {
        let k = SyntheticKernel::new(0.5, 1.0).unwrap();
        assert!((k.cum(0.0, 1.0) - 16.0 / 105.0).abs() < 1e-15);
        assert!((k.gamma_const() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(k.cum(0.0, 0.0), 0.0);
    }

    #[test]
    fn rejects_out_of_range_sigma() {
        assert!(SyntheticKernel::new(0.6, 1.0).is_err());
        assert!(SyntheticKernel::new(0.0, 1.0).is_err());
        assert!(SyntheticKernel::new(0.5, -1.0).is_err());
    }
}
