//! Action, Sobolev quotient and the scalar couplings of the bubble length.
//!
//! Every integral here is radial: the integrands depend on `|x - x₀|` only,
//! so they reduce to one-dimensional quadratures via
//! [`radial_integral`](crate::geometry::radial_integral).

use crate::calculus::{scalar_residual, DerivativeStencil, ResidualNorms};
use crate::clifford::CliffordRep;
use crate::fields::{bubble_length, Bubble, BubbleParams, SpinorField};
use crate::geometry::{conformal_factor, radial_integral, sphere_volume, Grid};
use crate::{norm, Error, Result};

/// Default relative tolerance for [`lower_bound_check`].
pub const LOWER_BOUND_TOLERANCE: f64 = 1e-8;

/// A measured quantity against its closed-form reference.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalReport {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    pub relative_error: f64,
    pub reference_label: String,
}

impl FunctionalReport {
    pub fn new(name: &str, measured: f64, reference: f64, reference_label: &str) -> Self {
        Self {
            name: name.to_string(),
            measured,
            reference,
            relative_error: relative_error(measured, reference),
            reference_label: reference_label.to_string(),
        }
    }
}

/// `|measured - reference| / max(|reference|, ε)`.
pub fn relative_error(measured: f64, reference: f64) -> f64 {
    (measured - reference).abs() / reference.abs().max(f64::EPSILON)
}

fn critical_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 1.0)
}

/// `∫_{R^n} |ψ|^{2n/(n-1)}` for a bubble.
pub fn critical_norm(p: &BubbleParams) -> Result<f64> {
    p.validate()?;
    let q = critical_exponent(p.dim());
    radial_integral(|r| bubble_length(p, r).powf(q), p.dim())
}

/// On-shell action `(1/2n) ∫ |ψ|^{2n/(n-1)}`.
pub fn action(p: &BubbleParams) -> Result<f64> {
    Ok(critical_norm(p)? / (2.0 * p.dim() as f64))
}

/// `(1/2n) (n/2)^n ω_n`: the least action of a nonzero solution.
pub fn ground_state_level(n: usize) -> f64 {
    let nf = n as f64;
    (nf / 2.0).powi(n as i32) * sphere_volume(n) / (2.0 * nf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowerBoundVerdict {
    GroundState,
    AboveBound,
    Violated,
}

impl LowerBoundVerdict {
    pub fn passes(self) -> bool {
        self != LowerBoundVerdict::Violated
    }
}

/// Compares an action value with [`ground_state_level`] at relative tolerance `tol`.
pub fn lower_bound_check(value: f64, n: usize, tol: f64) -> LowerBoundVerdict {
    let level = ground_state_level(n);
    let slack = tol * level;
    if value < level - slack {
        LowerBoundVerdict::Violated
    } else if value <= level + slack {
        LowerBoundVerdict::GroundState
    } else {
        LowerBoundVerdict::AboveBound
    }
}

/// `(∫ |ψ|^{2n/(n-1)})^{1/n}` for a bubble.
pub fn sobolev_quotient(p: &BubbleParams) -> Result<f64> {
    Ok(critical_norm(p)?.powf(1.0 / p.dim() as f64))
}

/// `(∫ ℓ(|x|)^{2n/(n-1)})^{1/n}` for an arbitrary radial length profile `ℓ`.
pub fn sobolev_quotient_of_profile(length: impl Fn(f64) -> f64, n: usize) -> Result<f64> {
    let q = critical_exponent(n);
    Ok(radial_integral(|r| length(r).powf(q), n)?.powf(1.0 / n as f64))
}

/// `(n/2) ω_n^{1/n}`.
pub fn sobolev_bound(n: usize) -> f64 {
    n as f64 / 2.0 * sphere_volume(n).powf(1.0 / n as f64)
}

/// The Talenti profile `u(x) = (2λ / (λ² + |x - x₀|²))^{(n-2)/2}`, `n ≥ 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct TalentiProfile {
    pub scale: f64,
    pub center: Vec<f64>,
}

impl TalentiProfile {
    pub fn new(scale: f64, center: Vec<f64>) -> Result<Self> {
        if center.len() < 3 {
            return Err(Error::DimensionOutOfRange {
                dim: center.len(),
                min: 3,
                max: usize::MAX,
            });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { scale, center })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn exponent(&self) -> f64 {
        (self.dim() as f64 - 2.0) / 2.0
    }

    pub fn radial(&self, r: f64) -> f64 {
        let lam = self.scale;
        (2.0 * lam / (lam * lam + r * r)).powf(self.exponent())
    }

    /// `du/dr`.
    pub fn radial_derivative(&self, r: f64) -> f64 {
        let lam = self.scale;
        -self.exponent() * self.radial(r) * 2.0 * r / (lam * lam + r * r)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.radial(norm(&d))
    }
}

/// `c_n = 4(n-1)/(n-2)`.
pub fn conformal_laplacian_constant(n: usize) -> f64 {
    4.0 * (n as f64 - 1.0) / (n as f64 - 2.0)
}

/// Residual of `-c_n Δu = n(n-1) u^{(n+2)/(n-2)}` for the Talenti profile.
pub fn yamabe_residual(
    scale: f64,
    center: &[f64],
    grid: &Grid,
    stencil: &DerivativeStencil,
) -> Result<ResidualNorms> {
    let profile = TalentiProfile::new(scale, center.to_vec())?;
    yamabe_residual_of(|x| profile.eval(x), profile.dim(), grid, stencil)
}

/// Same residual for an arbitrary scalar function `u`.
pub fn yamabe_residual_of(
    u: impl Fn(&[f64]) -> f64 + Sync,
    n: usize,
    grid: &Grid,
    stencil: &DerivativeStencil,
) -> Result<ResidualNorms> {
    if n < 3 {
        return Err(Error::DimensionOutOfRange {
            dim: n,
            min: 3,
            max: usize::MAX,
        });
    }
    if grid.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: grid.dim(),
        });
    }
    let nf = n as f64;
    let power = (nf + 2.0) / (nf - 2.0);
    scalar_residual(grid, stencil, conformal_laplacian_constant(n), u, |v| {
        nf * (nf - 1.0) * v.powf(power)
    })
}

/// Largest relative gap between the Talenti profile and the rescaled bubble
/// length `(2/n)^{(n-2)/2} |φ|^{(n-2)/(n-1)}` transported from the sphere.
///
/// The bubble is pushed to the sphere with weight `((1 + |x|²)/2)^{(n-1)/2}`
/// and the resulting function pulled back as a conformal factor with weight
/// `(2/(1 + |x|²))^{(n-2)/2}`.
pub fn length_coupling_check(
    rep: &CliffordRep,
    p: &BubbleParams,
    profile: &TalentiProfile,
    samples: &[Vec<f64>],
) -> Result<f64> {
    let n = p.dim();
    if n < 3 {
        return Err(Error::DimensionOutOfRange {
            dim: n,
            min: 3,
            max: usize::MAX,
        });
    }
    if profile.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: profile.dim(),
        });
    }
    let bubble = Bubble::new(rep, p.clone())?;
    let nf = n as f64;
    let mut worst = 0.0_f64;
    for x in samples {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let w = conformal_factor(x);
        let on_sphere = w.powf(-(nf - 1.0) / 2.0) * bubble.eval(x).norm();
        let h = (2.0 / nf).powf((nf - 2.0) / 2.0) * on_sphere.powf((nf - 2.0) / (nf - 1.0));
        let coupled = w.powf((nf - 2.0) / 2.0) * h;
        let talenti = profile.eval(x);
        worst = worst.max((coupled - talenti).abs() / talenti);
    }
    Ok(worst)
}

/// `v(z) = ln(4λ / (4 + λ² |z - z₀|²))`, a solution of `-Δv = e^{2v}` on `R²`.
pub fn liouville_profile(scale: f64, center: &[f64], z: &[f64]) -> f64 {
    let r2: f64 = z.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
    (4.0 * scale / (4.0 + scale * scale * r2)).ln()
}

/// Residual of `-Δv = e^{2v}` for [`liouville_profile`].
pub fn liouville_residual(
    scale: f64,
    center: &[f64],
    grid: &Grid,
    stencil: &DerivativeStencil,
) -> Result<ResidualNorms> {
    if center.len() != 2 || grid.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: if center.len() != 2 { center.len() } else { grid.dim() },
        });
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
    }
    scalar_residual(grid, stencil, 1.0, |z| liouville_profile(scale, center, z), |v| (2.0 * v).exp())
}

/// `∫_{R²} e^{2v}` for [`liouville_profile`].
pub fn liouville_total_curvature(scale: f64) -> Result<f64> {
    radial_integral(|r| (2.0 * liouville_profile(scale, &[0.0, 0.0], &[r, 0.0])).exp(), 2)
}

/// The Yamabe quotient at a Talenti bubble, with the Dirichlet energy both as
/// `∫ c_n |∇u|²` and, after integrating by parts against the equation, as
/// `∫ n(n-1) u^{2n/(n-2)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YamabeQuotient {
    pub gradient_form: f64,
    pub by_parts_form: f64,
}

pub fn yamabe_quotient(n: usize, scale: f64) -> Result<YamabeQuotient> {
    let profile = TalentiProfile::new(scale, vec![0.0; n])?;
    let nf = n as f64;
    let crit = 2.0 * nf / (nf - 2.0);
    let c_n = conformal_laplacian_constant(n);
    let energy = radial_integral(|r| c_n * profile.radial_derivative(r).powi(2), n)?;
    let mass = radial_integral(|r| profile.radial(r).powf(crit), n)?;
    let denominator = mass.powf((nf - 2.0) / nf);
    Ok(YamabeQuotient {
        gradient_form: energy / denominator,
        by_parts_form: nf * (nf - 1.0) * mass / denominator,
    })
}

/// `n(n-1) ω_n^{2/n}`.
pub fn yamabe_invariant(n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf - 1.0) * sphere_volume(n).powf(2.0 / nf)
}

pub fn yamabe_invariant_check(n: usize, scale: f64) -> Result<FunctionalReport> {
    let q = yamabe_quotient(n, scale)?;
    Ok(FunctionalReport::new(
        "yamabe_invariant",
        q.gradient_form,
        yamabe_invariant(n),
        "Yamabe invariant of the round sphere",
    ))
}
