//! Closed-form spinor fields.
//!
//! The central object is the ground-state bubble
//!
//! ```text
//! ψ(x) = λ^{-(n-1)/2} (2 / (1 + |u|²))^{n/2} (1 - γ(u)) Φ₀,   u = (x - x₀) / λ,
//! ```
//!
//! with `|Φ₀| = (n/2)^{(n-1)/2} / √2`. It solves `Dψ = |ψ|^{2/(n-1)} ψ`
//! for every `λ > 0` and `x₀`, has length `(nλ / (λ² + |x - x₀|²))^{(n-1)/2}`,
//! and is the pullback of a `-1/2`-Killing spinor on the round sphere.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::clifford::{spinor_rank, CliffordRep};
use crate::geometry::stereo_to_plane;
use crate::{norm, norm_sq, Error, Result, Spinor};

/// A spinor-valued function on `R^n`.
pub trait SpinorField: Sync {
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Spinor;
    /// Exponent `p` with `|ψ(x)| ~ |x|^{-p}` at infinity, when known.
    fn decay_exponent(&self) -> Option<f64> {
        None
    }
}

/// A field with closed-form first partial derivatives.
pub trait DifferentiableField: SpinorField {
    fn partials(&self, x: &[f64]) -> Vec<Spinor>;
}

/// Exact `Dψ = Σ_j γ_j ∂_j ψ` from the closed-form partials.
pub fn dirac_exact(field: &dyn DifferentiableField, rep: &CliffordRep, x: &[f64]) -> Spinor {
    field
        .partials(x)
        .iter()
        .zip(rep.gammas())
        .fold(DVector::zeros(rep.rank()), |acc, (d, g)| acc + g * d)
}

/// Exact Penrose components `∂_jψ + (1/n) γ_j Dψ`.
pub fn penrose_exact(field: &dyn DifferentiableField, rep: &CliffordRep, x: &[f64]) -> Vec<Spinor> {
    let partials = field.partials(x);
    let dirac = partials
        .iter()
        .zip(rep.gammas())
        .fold(DVector::zeros(rep.rank()), |acc, (d, g)| acc + g * d);
    let inv_n = Complex64::new(1.0 / rep.dim() as f64, 0.0);
    partials
        .into_iter()
        .zip(rep.gammas())
        .map(|(d, g)| d + g * &dirac * inv_n)
        .collect()
}

/// How the scale `λ` enters the amplitude of a bubble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    /// `λ^{-(n-1)/2} ψ₁((x - x₀)/λ)`: every member solves the equation.
    #[default]
    Scaling,
    /// `(2λ / (λ² + |x - x₀|²))^{n/2} (1 - γ((x - x₀)/λ)) Φ₀`, which differs
    /// from [`Normalization::Scaling`] by a factor `λ^{-1/2}`.
    Printed,
}

/// Required amplitude norm `(n/2)^{(n-1)/2} / √2` of a ground state.
pub fn ground_state_amplitude_norm(n: usize) -> f64 {
    let n = n as f64;
    (n / 2.0).powf((n - 1.0) / 2.0) / 2f64.sqrt()
}

/// Real dimension of the ground-state family: `(2N - 1) + n + 1 = 2^{⌊n/2⌋+1} + n`.
///
/// The amplitude contributes `2N` real components less one norm constraint;
/// the center and the scale contribute `n + 1`.
///
/// ```
/// use nldirac::fields::family_dimension;
/// assert_eq!(family_dimension(2), 6);
/// assert_eq!(family_dimension(3), 7);
/// for n in 2..=8 {
///     assert_eq!(family_dimension(n), (1 << (n / 2 + 1)) + n);
/// }
/// ```
pub fn family_dimension(n: usize) -> usize {
    (2 * spinor_rank(n) - 1) + n + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct BubbleParams {
    pub scale: f64,
    pub center: Vec<f64>,
    pub amplitude: Spinor,
    pub normalization: Normalization,
}

impl BubbleParams {
    /// Ground state with amplitude along the first basis spinor.
    pub fn ground_state(n: usize, scale: f64, center: Vec<f64>) -> Result<Self> {
        if center.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: center.len(),
            });
        }
        let mut amplitude = DVector::zeros(spinor_rank(n));
        amplitude[0] = Complex64::new(ground_state_amplitude_norm(n), 0.0);
        let p = Self {
            scale,
            center,
            amplitude,
            normalization: Normalization::Scaling,
        };
        p.validate()?;
        Ok(p)
    }

    /// The standard bubble `λ = 1`, `x₀ = 0`.
    pub fn standard(n: usize) -> Result<Self> {
        Self::ground_state(n, 1.0, vec![0.0; n])
    }

    pub fn with_amplitude(mut self, amplitude: Spinor) -> Result<Self> {
        self.amplitude = amplitude;
        self.validate()?;
        Ok(self)
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Multiplies the amplitude by `factor`; used for fault injection.
    pub fn with_amplitude_scaled(mut self, factor: f64) -> Self {
        self.amplitude *= Complex64::new(factor, 0.0);
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "bubbles need n >= 2, got {n}"
            )));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if self.amplitude.len() != spinor_rank(n) {
            return Err(Error::DimensionMismatch {
                expected: spinor_rank(n),
                found: self.amplitude.len(),
            });
        }
        if self.amplitude.norm() == 0.0 {
            return Err(Error::InvalidParameter("zero amplitude".into()));
        }
        Ok(())
    }

    /// `|Φ₀|` relative to the ground-state norm; 1 for a ground state.
    pub fn amplitude_ratio(&self) -> f64 {
        self.amplitude.norm() / ground_state_amplitude_norm(self.dim())
    }

    fn prefactor(&self) -> f64 {
        let n = self.dim() as f64;
        match self.normalization {
            Normalization::Scaling => self.scale.powf(-(n - 1.0) / 2.0),
            Normalization::Printed => self.scale.powf(-n / 2.0),
        }
    }
}

/// Closed-form length `|ψ|` at distance `r` from the center:
/// `(|Φ₀| / |Φ_gs|) (nλ / (λ² + r²))^{(n-1)/2}`, times `λ^{-1/2}` for the
/// printed normalization.
pub fn bubble_length(p: &BubbleParams, r: f64) -> f64 {
    let n = p.dim() as f64;
    let lam = p.scale;
    let base = (n * lam / (lam * lam + r * r)).powf((n - 1.0) / 2.0) * p.amplitude_ratio();
    match p.normalization {
        Normalization::Scaling => base,
        Normalization::Printed => base / lam.sqrt(),
    }
}

/// A bubble bound to a Clifford representation.
#[derive(Clone, Debug)]
pub struct Bubble {
    params: BubbleParams,
    rep: CliffordRep,
    gamma_amp: Vec<Spinor>,
    prefactor: f64,
}

impl Bubble {
    pub fn new(rep: &CliffordRep, params: BubbleParams) -> Result<Self> {
        params.validate()?;
        if rep.dim() != params.dim() {
            return Err(Error::DimensionMismatch {
                expected: params.dim(),
                found: rep.dim(),
            });
        }
        let gamma_amp = rep.gammas().iter().map(|g| g * &params.amplitude).collect();
        let prefactor = params.prefactor();
        Ok(Self {
            params,
            rep: rep.clone(),
            gamma_amp,
            prefactor,
        })
    }

    pub fn params(&self) -> &BubbleParams {
        &self.params
    }

    pub fn rep(&self) -> &CliffordRep {
        &self.rep
    }

    fn reduced(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.params.center)
            .map(|(a, c)| (a - c) / self.params.scale)
            .collect()
    }

    /// `(1 - γ(u)) Φ₀`.
    fn core(&self, u: &[f64]) -> Spinor {
        let mut v = self.params.amplitude.clone();
        for (gp, &c) in self.gamma_amp.iter().zip(u) {
            v.axpy(Complex64::new(-c, 0.0), gp, Complex64::new(1.0, 0.0));
        }
        v
    }

    /// The nonlinearity `|ψ|^{2/(n-1)} ψ` at `x`.
    pub fn nonlinearity(&self, x: &[f64]) -> Spinor {
        nonlinear_term(&self.eval(x), self.dim())
    }
}

/// `|ψ|^{2/(n-1)} ψ`, with the value 0 at `ψ = 0`.
pub fn nonlinear_term(psi: &Spinor, n: usize) -> Spinor {
    let len = psi.norm();
    if len == 0.0 {
        return psi.clone();
    }
    let factor = ((2.0 / (n as f64 - 1.0)) * len.ln()).exp();
    psi * Complex64::new(factor, 0.0)
}

impl SpinorField for Bubble {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn rank(&self) -> usize {
        self.rep.rank()
    }

    fn eval(&self, x: &[f64]) -> Spinor {
        let u = self.reduced(x);
        let n = self.dim() as f64;
        let g = (2.0 / (1.0 + norm_sq(&u))).powf(n / 2.0);
        self.core(&u) * Complex64::new(self.prefactor * g, 0.0)
    }

    fn decay_exponent(&self) -> Option<f64> {
        Some(self.dim() as f64 - 1.0)
    }
}

impl DifferentiableField for Bubble {
    fn partials(&self, x: &[f64]) -> Vec<Spinor> {
        let u = self.reduced(x);
        let n = self.dim() as f64;
        let q = 1.0 + norm_sq(&u);
        let g = (2.0 / q).powf(n / 2.0);
        let core = self.core(&u);
        let c = self.prefactor / self.params.scale;
        u.iter()
            .zip(&self.gamma_amp)
            .map(|(&uj, gp)| {
                (&core * Complex64::new(-n * uj / q * g, 0.0) - gp * Complex64::new(g, 0.0))
                    * Complex64::new(c, 0.0)
            })
            .collect()
    }
}

/// Evaluates the bubble `p` at `x`.
pub fn bubble_eval(rep: &CliffordRep, p: &BubbleParams, x: &[f64]) -> Result<Spinor> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: x.len(),
        });
    }
    Ok(Bubble::new(rep, p.clone())?.eval(x))
}

/// Affine conformal map `x ↦ scale · x + shift` of `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MobiusMap {
    pub shift: Vec<f64>,
    pub scale: f64,
}

impl MobiusMap {
    pub fn new(shift: Vec<f64>, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Möbius scale must be positive, got {scale}"
            )));
        }
        Ok(Self { shift, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .map(|(a, t)| self.scale * a + t)
            .collect()
    }

    pub fn inverse_apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .map(|(a, t)| (a - t) / self.scale)
            .collect()
    }

    /// `self` followed by `then`.
    pub fn then(&self, then: &MobiusMap) -> MobiusMap {
        MobiusMap {
            shift: then.apply(&self.shift),
            scale: self.scale * then.scale,
        }
    }
}

/// Parameters of the pushforward `ψ'(x) = s^{-(n-1)/2} ψ((x - t)/s)`.
pub fn mobius_transform(p: &BubbleParams, shift: &[f64], scale: f64) -> Result<BubbleParams> {
    if shift.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: shift.len(),
        });
    }
    let map = MobiusMap::new(shift.to_vec(), scale)?;
    Ok(BubbleParams {
        scale: p.scale * scale,
        center: map.apply(&p.center),
        ..p.clone()
    })
}

/// The weighted pushforward `s^{-(n-1)/2} ψ((x - t)/s)` of an arbitrary field.
pub fn weighted_pushforward(field: &dyn SpinorField, map: &MobiusMap, x: &[f64]) -> Spinor {
    let weight = map.scale.powf(-(field.dim() as f64 - 1.0) / 2.0);
    field.eval(&map.inverse_apply(x)) * Complex64::new(weight, 0.0)
}

/// Length of the sphere field `(1 - y^{n+1})^{-(n-1)/2} ψ(p(y))`.
///
/// Constant `(n/2)^{(n-1)/2}` exactly when the bubble is a Killing pullback
/// (`λ = 1`, `x₀ = 0`, ground-state amplitude).
pub fn sphere_trace_length(p: &BubbleParams, y: &[f64]) -> Result<f64> {
    if y.len() != p.dim() + 1 {
        return Err(Error::DimensionMismatch {
            expected: p.dim() + 1,
            found: y.len(),
        });
    }
    let x = stereo_to_plane(y)?;
    let n = p.dim() as f64;
    let weight = (1.0 / (1.0 - y[p.dim()])).powf((n - 1.0) / 2.0);
    let r = norm(
        &x.iter()
            .zip(&p.center)
            .map(|(a, c)| a - c)
            .collect::<Vec<_>>(),
    );
    Ok(weight * bubble_length(p, r))
}

/// The twistor spinor `Ψ(x) = γ(x) Φ` on the ambient space.
#[derive(Clone, Debug)]
pub struct AmbientTwistor {
    rep: CliffordRep,
    gamma_amp: Vec<Spinor>,
}

impl AmbientTwistor {
    pub fn new(rep: &CliffordRep, amplitude: &Spinor) -> Result<Self> {
        if amplitude.len() != rep.rank() {
            return Err(Error::DimensionMismatch {
                expected: rep.rank(),
                found: amplitude.len(),
            });
        }
        Ok(Self {
            rep: rep.clone(),
            gamma_amp: rep.gammas().iter().map(|g| g * amplitude).collect(),
        })
    }
}

impl SpinorField for AmbientTwistor {
    fn dim(&self) -> usize {
        self.rep.dim()
    }

    fn rank(&self) -> usize {
        self.rep.rank()
    }

    fn eval(&self, x: &[f64]) -> Spinor {
        self.gamma_amp
            .iter()
            .zip(x)
            .fold(DVector::zeros(self.rep.rank()), |acc, (gp, &c)| {
                acc + gp * Complex64::new(c, 0.0)
            })
    }
}

impl DifferentiableField for AmbientTwistor {
    fn partials(&self, _x: &[f64]) -> Vec<Spinor> {
        self.gamma_amp.clone()
    }
}

/// `γ(x) Φ` for a representation of the ambient space `R^{n+1}`.
pub fn ambient_twistor_eval(amplitude: &Spinor, x: &[f64], rep: &CliffordRep) -> Result<Spinor> {
    rep.clifford_mul(x, amplitude)
}

/// Polynomial field `a + Σ_j x_j b_j + Σ_{j,k} x_j x_k c_jk` of degree at most two.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticField {
    pub constant: Spinor,
    pub linear: Vec<Spinor>,
    pub quadratic: Vec<Vec<Spinor>>,
}

impl QuadraticField {
    pub fn constant(value: Spinor, dim: usize) -> Self {
        let rank = value.len();
        Self {
            linear: vec![DVector::zeros(rank); dim],
            quadratic: vec![vec![DVector::zeros(rank); dim]; dim],
            constant: value,
        }
    }

    pub fn random<R: rand::Rng>(dim: usize, rank: usize, rng: &mut R) -> Self {
        let spinor = |rng: &mut R| {
            DVector::from_fn(rank, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        };
        let constant = spinor(rng);
        let linear = (0..dim).map(|_| spinor(rng)).collect();
        let quadratic = (0..dim)
            .map(|_| (0..dim).map(|_| spinor(rng)).collect())
            .collect();
        Self {
            constant,
            linear,
            quadratic,
        }
    }
}

impl SpinorField for QuadraticField {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn rank(&self) -> usize {
        self.constant.len()
    }

    fn eval(&self, x: &[f64]) -> Spinor {
        let mut v = self.constant.clone();
        for (j, bj) in self.linear.iter().enumerate() {
            v += bj * Complex64::new(x[j], 0.0);
            for (k, cjk) in self.quadratic[j].iter().enumerate() {
                v += cjk * Complex64::new(x[j] * x[k], 0.0);
            }
        }
        v
    }
}

impl DifferentiableField for QuadraticField {
    fn partials(&self, x: &[f64]) -> Vec<Spinor> {
        let d = self.dim();
        (0..d)
            .map(|j| {
                let mut v = self.linear[j].clone();
                for k in 0..d {
                    v += (&self.quadratic[j][k] + &self.quadratic[k][j]) * Complex64::new(x[k], 0.0);
                }
                v
            })
            .collect()
    }
}

/// Largest Penrose norm `(Σ_j |∂_jΨ + (1/m) γ_j DΨ|²)^{1/2}` over the samples,
/// from exact derivatives. Zero for twistor spinors.
pub fn killing_defect(
    field: &dyn DifferentiableField,
    rep: &CliffordRep,
    samples: &[Vec<f64>],
) -> Result<f64> {
    if field.dim() != rep.dim() || field.rank() != rep.rank() {
        return Err(Error::DimensionMismatch {
            expected: rep.dim(),
            found: field.dim(),
        });
    }
    Ok(samples
        .iter()
        .map(|x| {
            penrose_exact(field, rep, x)
                .iter()
                .map(|c| c.norm_squared())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_rep;
    use crate::geometry::stereo_to_sphere;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn rng() -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(2024)
    }

    fn random_point<R: Rng>(rng: &mut R, n: usize, r: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-r..r)).collect()
    }

    #[test]
    fn bubble_value_at_origin() {
        let rep = build_rep(2).unwrap();
        let p = BubbleParams::standard(2).unwrap();
        let v = bubble_eval(&rep, &p, &[0.0, 0.0]).unwrap();
        assert!((v.clone() - &p.amplitude * Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert_relative_eq!(v.norm(), 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn bubble_length_examples() {
        let p2 = BubbleParams::standard(2).unwrap();
        assert_relative_eq!(bubble_length(&p2, 0.0), 2f64.sqrt(), max_relative = 1e-15);
        let p3 = BubbleParams::ground_state(3, 2.0, vec![0.0; 3]).unwrap();
        assert_relative_eq!(bubble_length(&p3, 1.0), 1.2, max_relative = 1e-15);
        let rep = build_rep(3).unwrap();
        let v = bubble_eval(&rep, &p3, &[0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(v.norm(), 1.2, max_relative = 1e-14);
        let mut last = f64::INFINITY;
        for i in 0..200 {
            let l = bubble_length(&p3, i as f64 * 0.5);
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn bubble_far_field_limit() {
        let rep = build_rep(3).unwrap();
        let p = BubbleParams::standard(3).unwrap();
        let x = [0.0, 0.0, 1e4];
        let v = bubble_eval(&rep, &p, &x).unwrap();
        assert_relative_eq!(v.norm() * 1e8, 3.0, max_relative = 1e-7);
    }

    #[test]
    fn length_identity_at_random_points() {
        let mut rng = rng();
        for n in 2..=5 {
            let rep = build_rep(n).unwrap();
            let p = BubbleParams::ground_state(n, rng.gen_range(0.3..3.0), random_point(&mut rng, n, 2.0)).unwrap();
            let b = Bubble::new(&rep, p.clone()).unwrap();
            for _ in 0..2000 {
                let x = random_point(&mut rng, n, 6.0);
                let r = norm(&x.iter().zip(&p.center).map(|(a, c)| a - c).collect::<Vec<_>>());
                let got = b.eval(&x).norm();
                assert!((got - bubble_length(&p, r)).abs() <= 1e-12 * got);
            }
        }
    }

    #[test]
    fn translation_covariance() {
        let rep = build_rep(3).unwrap();
        let shifted = BubbleParams::ground_state(3, 1.0, vec![0.5, -1.0, 2.0]).unwrap();
        let centered = BubbleParams::standard(3).unwrap();
        let x = [0.1, 0.2, 0.3];
        let xm: Vec<f64> = x.iter().zip(&shifted.center).map(|(a, c)| a - c).collect();
        let a = bubble_eval(&rep, &shifted, &x).unwrap();
        let b = bubble_eval(&rep, &centered, &xm).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn exact_partials_match_finite_differences() {
        let mut rng = rng();
        for n in 2..=4 {
            let rep = build_rep(n).unwrap();
            let p = BubbleParams::ground_state(n, 1.3, random_point(&mut rng, n, 1.0)).unwrap();
            let b = Bubble::new(&rep, p).unwrap();
            let h = 1e-5;
            for _ in 0..20 {
                let x = random_point(&mut rng, n, 2.0);
                let exact = b.partials(&x);
                for j in 0..n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    let fd = (b.eval(&xp) - b.eval(&xm)) / Complex64::new(2.0 * h, 0.0);
                    assert!((fd - &exact[j]).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn bubble_solves_the_equation_pointwise() {
        let mut rng = rng();
        for n in 2..=6 {
            let rep = build_rep(n).unwrap();
            let p = BubbleParams::ground_state(n, rng.gen_range(0.5..4.0), random_point(&mut rng, n, 1.0)).unwrap();
            let b = Bubble::new(&rep, p).unwrap();
            for _ in 0..100 {
                let x = random_point(&mut rng, n, 3.0);
                let d = dirac_exact(&b, &rep, &x);
                let rhs = b.nonlinearity(&x);
                assert!((d - &rhs).norm() <= 1e-12 * rhs.norm());
            }
        }
    }

    #[test]
    fn printed_normalization_breaks_the_equation_off_unit_scale() {
        let rep = build_rep(3).unwrap();
        let p = BubbleParams::ground_state(3, 2.0, vec![0.0; 3])
            .unwrap()
            .with_normalization(Normalization::Printed);
        let b = Bubble::new(&rep, p.clone()).unwrap();
        let x = [0.3, 0.1, -0.2];
        let d = dirac_exact(&b, &rep, &x);
        let rhs = b.nonlinearity(&x);
        assert!((d.clone() - &rhs).norm() > 0.1 * d.norm());
        // the two conventions agree at λ = 1
        let unit = BubbleParams::standard(3).unwrap();
        let a = bubble_eval(&rep, &unit, &x).unwrap();
        let c = bubble_eval(&rep, &unit.clone().with_normalization(Normalization::Printed), &x).unwrap();
        assert!((a - c).norm() < 1e-15);
        assert_relative_eq!(b.eval(&x).norm(), bubble_length(&p, norm(&x)), max_relative = 1e-13);
    }

    #[test]
    fn decay_rate_on_rays() {
        let rep = build_rep(4).unwrap();
        let p = BubbleParams::ground_state(4, 1.5, vec![0.2, 0.0, -0.1, 0.3]).unwrap();
        let b = Bubble::new(&rep, p.clone()).unwrap();
        let dir = [0.5, -0.5, 0.5, 0.5];
        let at = |r: f64| b.eval(&dir.iter().map(|d| d * r).collect::<Vec<_>>()).norm();
        let slope = (at(1e3).ln() - at(1e2).ln()) / (1e3f64.ln() - 1e2f64.ln());
        let declared = b.decay_exponent().unwrap();
        assert!((-slope - declared).abs() <= 0.05 * declared);
        let r: f64 = 1e3;
        let scaled = r.powi(3) * bubble_length(&p, r);
        assert_relative_eq!(scaled, (4.0 * 1.5f64).powf(1.5), max_relative = 1e-2);
    }

    #[test]
    fn mobius_parameters_and_group_law() {
        let p = BubbleParams::ground_state(3, 2.0, vec![1.0, 0.0, -1.0]).unwrap();
        let t = [0.5, 0.5, 0.5];
        let shifted = mobius_transform(&p, &t, 1.0).unwrap();
        assert_eq!(shifted.center, vec![1.5, 0.5, -0.5]);
        assert_eq!(shifted.scale, 2.0);
        let a = mobius_transform(&mobius_transform(&p, &[0.0; 3], 3.0).unwrap(), &[0.0; 3], 5.0).unwrap();
        let b = mobius_transform(&p, &[0.0; 3], 15.0).unwrap();
        assert_eq!(a.scale, b.scale);
        let f = MobiusMap::new(vec![1.0, 2.0, 3.0], 2.0).unwrap();
        let g = MobiusMap::new(vec![-1.0, 0.5, 0.0], 0.25).unwrap();
        let fg = f.then(&g);
        let two_step = mobius_transform(&mobius_transform(&p, &f.shift, f.scale).unwrap(), &g.shift, g.scale).unwrap();
        let one_step = mobius_transform(&p, &fg.shift, fg.scale).unwrap();
        assert_relative_eq!(two_step.scale, one_step.scale, max_relative = 1e-15);
        for (a, b) in two_step.center.iter().zip(&one_step.center) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(mobius_transform(&p, &t, 0.0).is_err());
        assert!(mobius_transform(&p, &[0.0; 2], 1.0).is_err());
    }

    #[test]
    fn mobius_field_covariance() {
        let mut rng = rng();
        for n in 2..=4 {
            let rep = build_rep(n).unwrap();
            let p = BubbleParams::ground_state(n, 0.7, random_point(&mut rng, n, 1.0)).unwrap();
            let map = MobiusMap::new(random_point(&mut rng, n, 2.0), 2.5).unwrap();
            let moved = Bubble::new(&rep, mobius_transform(&p, &map.shift, map.scale).unwrap()).unwrap();
            let original = Bubble::new(&rep, p).unwrap();
            for _ in 0..1000 {
                let x = random_point(&mut rng, n, 5.0);
                let a = moved.eval(&x);
                let b = weighted_pushforward(&original, &map, &x);
                assert!((a - &b).norm() <= 1e-12 * b.norm());
            }
        }
    }

    #[test]
    fn sphere_trace_is_constant_for_the_killing_pullback() {
        let mut rng = rng();
        for n in 2..=5 {
            let p = BubbleParams::standard(n).unwrap();
            let target = (n as f64 / 2.0).powf((n as f64 - 1.0) / 2.0);
            for _ in 0..500 {
                let y = stereo_to_sphere(&random_point(&mut rng, n, 10.0));
                assert!((sphere_trace_length(&p, &y).unwrap() - target).abs() <= 1e-12);
            }
        }
        let p3 = BubbleParams::standard(3).unwrap();
        assert_relative_eq!(sphere_trace_length(&p3, &[0.0, 0.0, 0.0, -1.0]).unwrap(), 1.5, max_relative = 1e-15);
        let p2 = BubbleParams::standard(2).unwrap();
        assert_relative_eq!(sphere_trace_length(&p2, &[0.0, 1.0, 0.0]).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(sphere_trace_length(&p2, &[0.0, 0.0, 1.0]), Err(Error::NorthPole));
    }

    #[test]
    fn sphere_trace_varies_off_the_standard_bubble() {
        let p = BubbleParams::ground_state(3, 2.0, vec![0.0; 3]).unwrap();
        let a = sphere_trace_length(&p, &[0.0, 0.0, 0.0, -1.0]).unwrap();
        let b = sphere_trace_length(&p, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((a - b).abs() > 1e-3);
        let shifted = BubbleParams::ground_state(3, 1.0, vec![0.5, 0.0, 0.0]).unwrap();
        let a = sphere_trace_length(&shifted, &[0.0, 0.0, 0.0, -1.0]).unwrap();
        let b = sphere_trace_length(&shifted, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn ambient_twistor_basics() {
        let rep = build_rep(4).unwrap();
        let phi = DVector::from_fn(4, |i, _| Complex64::new(i as f64 + 1.0, 0.5));
        assert_eq!(ambient_twistor_eval(&phi, &[0.0; 4], &rep).unwrap().norm(), 0.0);
        let x = [0.3, -1.0, 2.0, 0.7];
        let v = ambient_twistor_eval(&phi, &x, &rep).unwrap();
        assert_relative_eq!(v.norm(), norm(&x) * phi.norm(), max_relative = 1e-14);
        let field = AmbientTwistor::new(&rep, &phi).unwrap();
        let dir = [0.1, 0.2, -0.3, 0.4];
        let h = 1e-4;
        let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
        let xm: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
        let fd = (field.eval(&xp) - field.eval(&xm)) / Complex64::new(2.0 * h, 0.0);
        let exact = rep.clifford_mul(&dir, &phi).unwrap();
        assert!((fd - exact).norm() < 1e-8);
        assert!(ambient_twistor_eval(&phi, &[1.0; 3], &rep).is_err());
    }

    #[test]
    fn killing_defect_examples() {
        let mut rng = rng();
        for m in 2..=6 {
            let rep = build_rep(m).unwrap();
            let phi = DVector::from_fn(rep.rank(), |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let samples: Vec<Vec<f64>> = (0..50).map(|_| random_point(&mut rng, m, 3.0)).collect();
            let twistor = AmbientTwistor::new(&rep, &phi).unwrap();
            assert!(killing_defect(&twistor, &rep, &samples).unwrap() <= 1e-13);
            let constant = QuadraticField::constant(phi.clone(), m);
            assert!(killing_defect(&constant, &rep, &samples).unwrap() <= 1e-13);
            assert!(dirac_exact(&constant, &rep, &samples[0]).norm() == 0.0);
            // Ψ = |x|² Φ: ∂_j Ψ = 2 x_j Φ, DΨ = 2 γ(x) Φ, P_j = 2 x_j Φ + (2/m) γ_j γ(x) Φ
            let mut quad = QuadraticField::constant(DVector::zeros(rep.rank()), m);
            for j in 0..m {
                quad.quadratic[j][j] = phi.clone();
            }
            let x = &samples[1];
            let gx_phi = rep.clifford_mul(x, &phi).unwrap();
            let expected: f64 = (0..m)
                .map(|j| {
                    let pj = &phi * Complex64::new(2.0 * x[j], 0.0)
                        + rep.gamma(j) * &gx_phi * Complex64::new(2.0 / m as f64, 0.0);
                    pj.norm_squared()
                })
                .sum::<f64>()
                .sqrt();
            let got = killing_defect(&quad, &rep, std::slice::from_ref(x)).unwrap();
            assert!(expected > 0.1);
            assert_relative_eq!(got, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn twistor_dirac_is_minus_dimension_times_amplitude() {
        for m in 2..=8 {
            let rep = build_rep(m).unwrap();
            let phi = DVector::from_fn(rep.rank(), |i, _| Complex64::new(1.0 / (i + 1) as f64, -0.25));
            let field = AmbientTwistor::new(&rep, &phi).unwrap();
            let d = dirac_exact(&field, &rep, &vec![0.4; m]);
            assert!((d + &phi * Complex64::new(m as f64, 0.0)).norm() <= 1e-13);
        }
    }

    #[test]
    fn family_dimension_counts_free_parameters() {
        // amplitude on a sphere in C^N (2N - 1 real), center (n), scale (1)
        assert_eq!(family_dimension(2), 6);
        assert_eq!(family_dimension(3), 7);
        assert_eq!(family_dimension(4), 12);
        for n in 2..=8 {
            assert_eq!(family_dimension(n), (1 << (n / 2 + 1)) + n);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(BubbleParams::ground_state(3, -1.0, vec![0.0; 3]).is_err());
        assert!(BubbleParams::ground_state(3, 1.0, vec![0.0; 2]).is_err());
        assert!(BubbleParams::ground_state(1, 1.0, vec![0.0]).is_err());
        let p = BubbleParams::standard(3).unwrap();
        assert!(p.clone().with_amplitude(DVector::zeros(4)).is_err());
        assert!(Bubble::new(&build_rep(4).unwrap(), p).is_err());
    }
}
