//! Kernel selection shared by the subcommands that accept `--kernel`.

use hhmo::kernel::{build_kernel_table, Kernel, Ratio, SyntheticKernel, TabulatedKernel};
use hhmo::profile::solve_kappa;
use hhmo::{Error, ModelParams};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Synthetic,
    Hhmo,
    File(PathBuf),
}

impl std::str::FromStr for KernelSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "synthetic" => Ok(KernelSpec::Synthetic),
            "hhmo" => Ok(KernelSpec::Hhmo),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(KernelSpec::File(PathBuf::from(p))),
                _ => Err(format!("expected synthetic, hhmo or file:PATH, got '{s}'")),
            },
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Synthetic => f.write_str("synthetic"),
            KernelSpec::Hhmo => f.write_str("hhmo"),
            KernelSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// A loaded kernel of any supported kind.
#[derive(Debug, Clone)]
pub enum AnyKernel {
    Synthetic(SyntheticKernel),
    Tabulated(TabulatedKernel),
}

pub struct KernelOptions {
    pub sigma: f64,
    pub scale: f64,
    pub params: ModelParams,
    pub table_points: usize,
    pub quad_tol: f64,
}

pub enum LoadError {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for LoadError {
    fn from(e: Error) -> Self {
        LoadError::Core(e)
    }
}

pub fn load(spec: &KernelSpec, o: &KernelOptions) -> std::result::Result<AnyKernel, LoadError> {
    Ok(match spec {
        KernelSpec::Synthetic => AnyKernel::Synthetic(SyntheticKernel::new(o.sigma, o.scale)?),
        KernelSpec::Hhmo => {
            let profile = solve_kappa(&o.params, 1e-12)?;
            AnyKernel::Tabulated(build_kernel_table(&profile, o.table_points, o.quad_tol)?.kernel)
        }
        KernelSpec::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.clone(), e))?;
            AnyKernel::Tabulated(TabulatedKernel::from_csv(&text)?)
        }
    })
}

macro_rules! delegate {
    ($self:ident, $k:ident => $e:expr) => {
        match $self {
            AnyKernel::Synthetic($k) => $e,
            AnyKernel::Tabulated($k) => $e,
        }
    };
}

impl Kernel for AnyKernel {
    fn value(&self, r: Ratio) -> f64 {
        delegate!(self, k => k.value(r))
    }
    fn tail(&self, r: Ratio) -> f64 {
        delegate!(self, k => k.tail(r))
    }
    fn gamma_const(&self) -> f64 {
        delegate!(self, k => k.gamma_const())
    }
    fn sigma(&self) -> f64 {
        delegate!(self, k => k.sigma())
    }
    fn k_coeff(&self) -> f64 {
        delegate!(self, k => k.k_coeff())
    }
    fn cum_between(&self, a: Ratio, b: Ratio, len: f64) -> f64 {
        delegate!(self, k => k.cum_between(a, b, len))
    }
}
