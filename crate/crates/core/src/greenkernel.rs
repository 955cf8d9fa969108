//! Gegenbauer expansions of the Dirac Green kernel on `R^n`.
//!
//! With `G(d) = γ(d) / (ω_{n-1} |d|^n)` one has `D_x G(x - y) = -δ_y`, so on
//! the unit ball
//!
//! ```text
//! ψ(x) = -∫_B G(x - y) Dψ(y) dy + ∮_{∂B} G(x - y) γ(y) ψ(y) dS(y).
//! ```
//!
//! For `|x| < |y|` the kernel splits into D-harmonic pieces
//!
//! ```text
//! G(x - y) = (1/ω_{n-1}) Σ_{k≥1} |y|^{-(n-2+k)} Ξ_k(x, y),   Ξ_k = D_x H_k,
//! H_k(x, y) = |x|^k c_k(x̂·ŷ),
//! c_k = -C_k^τ / (2τ) with τ = (n-2)/2 for n ≥ 3,   c_k = -T_k / k for n = 2,
//! ```
//!
//! where `H_k` is the zonal harmonic of degree `k`, so `Ξ_k` is homogeneous
//! of degree `k - 1` in `x`. In both cases `c_k' = -C_{k-1}^{τ+1}`.

use rayon::prelude::*;

use crate::clifford::CliffordRep;
use crate::fields::{dirac_exact, DifferentiableField, SpinorField};
use crate::geometry::{sphere_volume, SphereQuadrature};
use crate::{norm, Error, Result, SpinMatrix, Spinor};
use nalgebra::DVector;
use num_complex::Complex64;

/// Largest degree accepted by [`GegenbauerEvaluator`] and the series.
pub const MAX_DEGREE: usize = 120;

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Gegenbauer index must be positive, got {tau}"
        )));
    }
    Ok(())
}

/// `C_k^τ(t)` by forward recurrence.
pub fn gegenbauer(tau: f64, k: usize, t: f64) -> Result<f64> {
    check_tau(tau)?;
    let (mut prev, mut cur) = (1.0, 2.0 * tau * t);
    if k == 0 {
        return Ok(prev);
    }
    for j in 1..k {
        let jf = j as f64;
        let next = (2.0 * (jf + tau) * t * cur - (jf + 2.0 * tau - 1.0) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `d^j/dt^j C_k^τ(t) = 2^j (τ)_j C_{k-j}^{τ+j}(t)`.
pub fn gegenbauer_derivative(tau: f64, k: usize, t: f64, j: usize) -> Result<f64> {
    check_tau(tau)?;
    if j > k {
        return Ok(0.0);
    }
    let rising: f64 = (0..j).map(|i| 2.0 * (tau + i as f64)).product();
    Ok(rising * gegenbauer(tau + j as f64, k - j, t)?)
}

/// Chebyshev polynomial of the first kind `T_k(t)`.
pub fn chebyshev(k: usize, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, t);
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        let next = 2.0 * t * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// All values `C_0^τ(t), …, C_K^τ(t)` with cached recurrence coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct GegenbauerEvaluator {
    tau: f64,
    max_degree: usize,
    // C_{j+1} = a_j t C_j - b_j C_{j-1}
    a: Vec<f64>,
    b: Vec<f64>,
}

impl GegenbauerEvaluator {
    pub fn new(tau: f64, max_degree: usize) -> Result<Self> {
        check_tau(tau)?;
        if max_degree > MAX_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "degree {max_degree} exceeds the cap {MAX_DEGREE}"
            )));
        }
        let (a, b) = (1..max_degree.max(1))
            .map(|j| {
                let jf = j as f64;
                (2.0 * (jf + tau) / (jf + 1.0), (jf + 2.0 * tau - 1.0) / (jf + 1.0))
            })
            .unzip();
        Ok(Self {
            tau,
            max_degree,
            a,
            b,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.max_degree + 1);
        out.push(1.0);
        if self.max_degree >= 1 {
            out.push(2.0 * self.tau * t);
        }
        for j in 1..self.max_degree {
            let next = self.a[j - 1] * t * out[j] - self.b[j - 1] * out[j - 1];
            out.push(next);
        }
        out
    }
}

/// Zonal profiles `c_k(s)` and `c_k'(s)` for `k = 0..=K` in dimension `n`.
#[derive(Clone, Debug)]
struct Zonal {
    dim: usize,
    max_degree: usize,
    shifted: GegenbauerEvaluator,
    base: Option<GegenbauerEvaluator>,
}

impl Zonal {
    fn new(dim: usize, max_degree: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionOutOfRange {
                dim,
                min: 2,
                max: crate::clifford::MAX_DIM,
            });
        }
        let tau = (dim as f64 - 2.0) / 2.0;
        let base = if dim == 2 {
            None
        } else {
            Some(GegenbauerEvaluator::new(tau, max_degree)?)
        };
        Ok(Self {
            dim,
            max_degree,
            shifted: GegenbauerEvaluator::new(tau + 1.0, max_degree.saturating_sub(1))?,
            base,
        })
    }

    fn profiles(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let c = match &self.base {
            Some(ev) => {
                let tau = ev.tau();
                ev.values(s).into_iter().map(|v| -v / (2.0 * tau)).collect()
            }
            None => (0..=self.max_degree)
                .map(|k| if k == 0 { 0.0 } else { -chebyshev(k, s) / k as f64 })
                .collect(),
        };
        let shifted = self.shifted.values(s);
        let dc = (0..=self.max_degree)
            .map(|k| if k == 0 { 0.0 } else { -shifted[k - 1] })
            .collect();
        (c, dc)
    }

    /// `∇_x H_k(x, y)` for every `k ≤ K`, with `ŷ` a unit vector.
    fn gradients(&self, x: &[f64], y_hat: &[f64]) -> Vec<Vec<f64>> {
        let r = norm(x);
        let mut out = vec![vec![0.0; self.dim]; self.max_degree + 1];
        if r == 0.0 {
            if self.max_degree >= 1 {
                out[1] = y_hat.iter().map(|v| -v).collect();
            }
            return out;
        }
        let x_hat: Vec<f64> = x.iter().map(|v| v / r).collect();
        let s = x_hat.iter().zip(y_hat).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
        let (c, dc) = self.profiles(s);
        let mut rk1 = 1.0;
        for k in 1..=self.max_degree {
            let radial = k as f64 * c[k];
            out[k] = x_hat
                .iter()
                .zip(y_hat)
                .map(|(xh, yh)| rk1 * (radial * xh + dc[k] * (yh - s * xh)))
                .collect();
            rk1 *= r;
        }
        out
    }
}

fn check_point(rep: &CliffordRep, v: &[f64]) -> Result<()> {
    if v.len() != rep.dim() {
        return Err(Error::DimensionMismatch {
            expected: rep.dim(),
            found: v.len(),
        });
    }
    Ok(())
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let r = norm(v);
    if r == 0.0 {
        return Err(Error::Singular);
    }
    Ok(v.iter().map(|c| c / r).collect())
}

/// `G(d) = γ(d) / (ω_{n-1} |d|^n)`.
pub fn kernel_g(d: &[f64], rep: &CliffordRep) -> Result<SpinMatrix> {
    check_point(rep, d)?;
    let r = norm(d);
    if r == 0.0 {
        return Err(Error::Singular);
    }
    let n = rep.dim();
    let scale = 1.0 / (sphere_volume(n - 1) * r.powi(n as i32));
    Ok(rep.clifford_matrix_unchecked(d) * Complex64::new(scale, 0.0))
}

fn kernel_apply(rep: &CliffordRep, d: &[f64], v: &Spinor, omega: f64) -> Spinor {
    let r = norm(d);
    rep.clifford_mul_unchecked(d, v) * Complex64::new(1.0 / (omega * r.powi(rep.dim() as i32)), 0.0)
}

/// `Ξ_k(x, y) = D_x (|x|^k c_k(x̂·ŷ))`.
pub fn xi_matrix(k: usize, x: &[f64], y: &[f64], rep: &CliffordRep) -> Result<SpinMatrix> {
    check_point(rep, x)?;
    check_point(rep, y)?;
    let zonal = Zonal::new(rep.dim(), k)?;
    let grads = zonal.gradients(x, &unit(y)?);
    Ok(rep.clifford_matrix_unchecked(&grads[k]))
}

/// The partial sum `Σ_{k=1}^{K} |y|^{-(n-2+k)} Ξ_k(x, y) / ω_{n-1}`.
pub fn series_expand_kernel(x: &[f64], y: &[f64], terms: usize, rep: &CliffordRep) -> Result<SpinMatrix> {
    check_point(rep, x)?;
    check_point(rep, y)?;
    let (rx, ry) = (norm(x), norm(y));
    if ry == 0.0 || rx >= ry {
        return Err(Error::OutsideConvergence {
            ratio: if ry == 0.0 { f64::INFINITY } else { rx / ry },
        });
    }
    let n = rep.dim();
    let zonal = Zonal::new(n, terms)?;
    let grads = zonal.gradients(x, &unit(y)?);
    let mut total = vec![0.0; n];
    for (k, g) in grads.iter().enumerate().skip(1) {
        let weight = ry.powi(-((n + k) as i32 - 2));
        for (t, gi) in total.iter_mut().zip(g) {
            *t += weight * gi;
        }
    }
    let omega = sphere_volume(n - 1);
    Ok(rep.clifford_matrix_unchecked(&total) * Complex64::new(1.0 / omega, 0.0))
}

/// `x ↦ G(x - y₀) Φ`: D-harmonic away from its pole.
#[derive(Clone, Debug)]
pub struct KernelField {
    rep: CliffordRep,
    pole: Vec<f64>,
    amplitude: Spinor,
    omega: f64,
}

impl KernelField {
    pub fn new(rep: &CliffordRep, pole: Vec<f64>, amplitude: Spinor) -> Result<Self> {
        check_point(rep, &pole)?;
        if amplitude.len() != rep.rank() {
            return Err(Error::DimensionMismatch {
                expected: rep.rank(),
                found: amplitude.len(),
            });
        }
        Ok(Self {
            omega: sphere_volume(rep.dim() - 1),
            rep: rep.clone(),
            pole,
            amplitude,
        })
    }

    fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.pole).map(|(a, b)| a - b).collect()
    }
}

impl SpinorField for KernelField {
    fn dim(&self) -> usize {
        self.rep.dim()
    }

    fn rank(&self) -> usize {
        self.rep.rank()
    }

    fn eval(&self, x: &[f64]) -> Spinor {
        kernel_apply(&self.rep, &self.offset(x), &self.amplitude, self.omega)
    }

    fn decay_exponent(&self) -> Option<f64> {
        Some(self.rep.dim() as f64 - 1.0)
    }
}

impl DifferentiableField for KernelField {
    fn partials(&self, x: &[f64]) -> Vec<Spinor> {
        let d = self.offset(x);
        let r2 = d.iter().map(|c| c * c).sum::<f64>();
        let n = self.rep.dim() as f64;
        let base = 1.0 / (self.omega * r2.powf(n / 2.0));
        let gd = self.rep.clifford_mul_unchecked(&d, &self.amplitude);
        (0..self.rep.dim())
            .map(|j| {
                self.rep.gamma(j) * &self.amplitude * Complex64::new(base, 0.0)
                    - &gd * Complex64::new(n * d[j] * base / r2, 0.0)
            })
            .collect()
    }
}

/// Volume and surface discretization for [`representation_reconstruct`].
///
/// The volume rule is a midpoint rule on cells of side `spacing` centred on
/// the evaluation point, with the cell holding the pole left out. Cells cut
/// by the sphere are split into `boundary_subdivisions^n` sub-cells and only
/// sub-cell centres inside the ball are kept; the default subdivision is 8
/// in the plane, 4 in space and 2 beyond.
#[derive(Clone, Debug)]
pub struct RepresentationQuadrature {
    pub spacing: f64,
    pub boundary_subdivisions: usize,
    pub surface: SphereQuadrature,
}

impl RepresentationQuadrature {
    pub fn new(spacing: f64, surface: SphereQuadrature) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0 && spacing < 1.0) {
            return Err(Error::InvalidParameter(format!("volume spacing {spacing}")));
        }
        let boundary_subdivisions = match surface.dim() + 1 {
            2 => 8,
            3 => 4,
            _ => 2,
        };
        Ok(Self {
            spacing,
            boundary_subdivisions,
            surface,
        })
    }
}

/// The two pieces of the representation formula at `x`:
/// `(∫_B G(x-y) Dψ dy, ∮ G(x-y) γ(y) ψ dS)`.
pub fn representation_parts(
    field: &dyn DifferentiableField,
    rep: &CliffordRep,
    x: &[f64],
    quad: &RepresentationQuadrature,
) -> Result<(Spinor, Spinor)> {
    check_point(rep, x)?;
    let n = rep.dim();
    if field.dim() != n || field.rank() != rep.rank() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: field.dim(),
        });
    }
    if quad.surface.dim() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: quad.surface.dim() + 1,
        });
    }
    let rx = norm(x);
    if rx >= 1.0 {
        return Err(Error::OutsideBall { norm: rx });
    }
    let omega = sphere_volume(n - 1);
    let h = quad.spacing;
    let half_diag = 0.5 * h * (n as f64).sqrt();
    let ranges: Vec<(i64, i64)> = x
        .iter()
        .map(|&c| (((-1.0 - c) / h).floor() as i64 - 1, ((1.0 - c) / h).ceil() as i64 + 1))
        .collect();
    let sub = quad.boundary_subdivisions.max(1);
    let sub_h = h / sub as f64;

    let integrand = |y: &[f64]| -> Spinor {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        kernel_apply(rep, &d, &dirac_exact(field, rep, y), omega)
    };

    // Sum over slabs of the first axis in parallel, then in index order.
    let slabs: Vec<Spinor> = (ranges[0].0..=ranges[0].1)
        .into_par_iter()
        .map(|i0| {
            let mut acc: Spinor = DVector::zeros(rep.rank());
            let mut idx = vec![0i64; n];
            idx[0] = i0;
            for_each_index(&ranges[1..], &mut idx, 1, &mut |idx| {
                if idx.iter().all(|&i| i == 0) {
                    return;
                }
                let centre: Vec<f64> = x.iter().zip(idx).map(|(c, &i)| c + i as f64 * h).collect();
                let rc = norm(&centre);
                if rc - half_diag >= 1.0 {
                    return;
                }
                if rc + half_diag < 1.0 {
                    acc += integrand(&centre) * Complex64::new(h.powi(n as i32), 0.0);
                    return;
                }
                let sub_ranges = vec![(0i64, sub as i64 - 1); n];
                let mut sidx = vec![0i64; n];
                for_each_index(&sub_ranges, &mut sidx, 0, &mut |sidx| {
                    let y: Vec<f64> = centre
                        .iter()
                        .zip(sidx)
                        .map(|(c, &s)| c - 0.5 * h + (s as f64 + 0.5) * sub_h)
                        .collect();
                    if norm(&y) < 1.0 {
                        acc += integrand(&y) * Complex64::new(sub_h.powi(n as i32), 0.0);
                    }
                });
            });
            acc
        })
        .collect();
    let volume = slabs.into_iter().fold(DVector::zeros(rep.rank()), |a, b| a + b);

    let surface = quad
        .surface
        .nodes()
        .iter()
        .zip(quad.surface.weights())
        .fold(DVector::zeros(rep.rank()), |acc: Spinor, (y, w)| {
            let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let gy = rep.clifford_mul_unchecked(y, &field.eval(y));
            acc + kernel_apply(rep, &d, &gy, omega) * Complex64::new(*w, 0.0)
        });
    Ok((volume, surface))
}

fn for_each_index(ranges: &[(i64, i64)], idx: &mut [i64], axis: usize, f: &mut impl FnMut(&[i64])) {
    if axis == idx.len() {
        f(idx);
        return;
    }
    let (lo, hi) = ranges[axis + ranges.len() - idx.len()];
    for i in lo..=hi {
        idx[axis] = i;
        for_each_index(ranges, idx, axis + 1, f);
    }
}

/// `ψ(x)` recovered from `Dψ` in the ball and `ψ` on its boundary.
pub fn representation_reconstruct(
    field: &dyn DifferentiableField,
    rep: &CliffordRep,
    x: &[f64],
    quad: &RepresentationQuadrature,
) -> Result<Spinor> {
    let (volume, surface) = representation_parts(field, rep, x, quad)?;
    Ok(surface - volume)
}

/// Values of a field at the nodes of a sphere quadrature.
pub fn sample_boundary(field: &dyn SpinorField, surface: &SphereQuadrature) -> Vec<Spinor> {
    surface.nodes().iter().map(|y| field.eval(y)).collect()
}

/// `Q_k(x) = (1/ω_{n-1}) ∮ Ξ_k(x, y) γ(y) ψ(y) dS(y)`, a D-harmonic
/// polynomial spinor of degree `k - 1`.
#[derive(Clone, Debug)]
pub struct HarmonicProjection {
    degree: usize,
    rep: CliffordRep,
    zonal: Zonal,
    nodes: Vec<Vec<f64>>,
    moments: Vec<Spinor>,
}

pub fn harmonic_projection(
    samples: &[Spinor],
    degree: usize,
    rep: &CliffordRep,
    surface: &SphereQuadrature,
) -> Result<HarmonicProjection> {
    let n = rep.dim();
    if surface.dim() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: surface.dim() + 1,
        });
    }
    if samples.len() != surface.len() {
        return Err(Error::DimensionMismatch {
            expected: surface.len(),
            found: samples.len(),
        });
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != rep.rank()) {
        return Err(Error::DimensionMismatch {
            expected: rep.rank(),
            found: bad.len(),
        });
    }
    let omega = sphere_volume(n - 1);
    let moments = surface
        .nodes()
        .iter()
        .zip(surface.weights())
        .zip(samples)
        .map(|((y, w), psi)| rep.clifford_mul_unchecked(y, psi) * Complex64::new(w / omega, 0.0))
        .collect();
    Ok(HarmonicProjection {
        degree,
        rep: rep.clone(),
        zonal: Zonal::new(n, degree)?,
        nodes: surface.nodes().to_vec(),
        moments,
    })
}

impl HarmonicProjection {
    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl SpinorField for HarmonicProjection {
    fn dim(&self) -> usize {
        self.rep.dim()
    }

    fn rank(&self) -> usize {
        self.rep.rank()
    }

    fn eval(&self, x: &[f64]) -> Spinor {
        let mut out = DVector::zeros(self.rep.rank());
        if self.degree == 0 {
            return out;
        }
        for (y, m) in self.nodes.iter().zip(&self.moments) {
            let grad = &self.zonal.gradients(x, y)[self.degree];
            out += self.rep.clifford_mul_unchecked(grad, m);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{dirac_apply, DerivativeStencil, Sampled};
    use crate::clifford::build_rep;
    use crate::fields::{Bubble, BubbleParams, QuadraticField};
    use crate::geometry::{sphere_quadrature, Grid};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn rng() -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(2024)
    }

    fn spinor<R: Rng>(rng: &mut R, rank: usize) -> Spinor {
        DVector::from_fn(rank, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn point<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
            if norm(&v) < radius {
                return v;
            }
        }
    }

    fn max_entry(m: &SpinMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Closed forms for low degrees.
    #[test]
    fn gegenbauer_low_degrees() {
        assert_eq!(gegenbauer(0.5, 0, 0.3).unwrap(), 1.0);
        assert_relative_eq!(gegenbauer(0.5, 1, 0.3).unwrap(), 0.3, max_relative = 1e-15);
        for (tau, t) in [(0.5, 0.3), (1.0, -0.7), (2.5, 0.1)] {
            let c2 = 2.0 * tau * (tau + 1.0) * t * t - tau;
            assert_relative_eq!(gegenbauer(tau, 2, t).unwrap(), c2, max_relative = 1e-13);
        }
        // Legendre P_3 and Chebyshev U_3
        let t: f64 = 0.4;
        assert_relative_eq!(gegenbauer(0.5, 3, t).unwrap(), 0.5 * (5.0 * t.powi(3) - 3.0 * t), max_relative = 1e-13);
        assert_relative_eq!(gegenbauer(1.0, 3, t).unwrap(), 8.0 * t.powi(3) - 4.0 * t, max_relative = 1e-13);
        assert!(gegenbauer(0.0, 3, t).is_err());
        assert!(gegenbauer(-1.0, 3, t).is_err());
        assert_relative_eq!(chebyshev(5, (0.3f64).cos()), (1.5f64).cos(), max_relative = 1e-13);
    }

    #[test]
    fn generating_function_identity() {
        let check = |tau: f64, s: f64, t: f64| {
            let ev = GegenbauerEvaluator::new(tau, 60).unwrap();
            let sum: f64 = ev.values(t).iter().enumerate().map(|(k, c)| s.powi(k as i32) * c).sum();
            let exact = (1.0 - 2.0 * s * t + s * s).powf(-tau);
            assert!((sum - exact).abs() <= 1e-12 * exact, "τ={tau} s={s} t={t}");
        };
        check(0.5, 0.4, 0.7);
        for tau in [0.5, 1.0, 1.5, 2.0] {
            for s in [0.05, 0.2, 0.35] {
                for t in [-1.0, -0.5, 0.0, 0.3, 0.9, 1.0] {
                    check(tau, s, t);
                }
            }
        }
    }

    #[test]
    fn evaluator_matches_direct_recurrence_and_caps() {
        let ev = GegenbauerEvaluator::new(1.5, 40).unwrap();
        let vals = ev.values(-0.35);
        assert_eq!(vals.len(), 41);
        for (k, v) in vals.iter().enumerate() {
            assert_relative_eq!(*v, gegenbauer(1.5, k, -0.35).unwrap(), max_relative = 1e-13);
        }
        assert!(GegenbauerEvaluator::new(1.0, MAX_DEGREE + 1).is_err());
        assert_eq!(GegenbauerEvaluator::new(1.0, 0).unwrap().values(0.2), vec![1.0]);
    }

    #[test]
    fn derivative_formula_against_finite_differences() {
        let h = 1e-5;
        for (tau, k, t) in [(0.5, 6, 0.3), (1.0, 9, -0.45), (2.0, 4, 0.8)] {
            let fd = (gegenbauer(tau, k, t + h).unwrap() - gegenbauer(tau, k, t - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(gegenbauer_derivative(tau, k, t, 1).unwrap(), fd, max_relative = 1e-7);
            let fd2 = (gegenbauer_derivative(tau, k, t + h, 1).unwrap()
                - gegenbauer_derivative(tau, k, t - h, 1).unwrap())
                / (2.0 * h);
            assert_relative_eq!(gegenbauer_derivative(tau, k, t, 2).unwrap(), fd2, max_relative = 1e-6);
        }
        assert_eq!(gegenbauer_derivative(1.0, 2, 0.1, 3).unwrap(), 0.0);
    }

    #[test]
    fn derivative_growth_is_polynomial() {
        for n in 3..=5 {
            let tau = (n as f64 - 2.0) / 2.0;
            for j in 0..=2usize {
                let sup = |k: usize| {
                    (0..=2000)
                        .map(|i| -1.0 + i as f64 / 1000.0)
                        .map(|t| gegenbauer_derivative(tau, k, t, j).unwrap().abs())
                        .fold(0.0, f64::max)
                };
                let slope = (sup(80) / sup(40)).ln() / 2f64.ln();
                let bound = (2 * j + n - 3) as f64;
                assert!(slope <= bound + 0.1, "n={n} j={j} slope {slope}");
            }
        }
    }

    #[test]
    fn kernel_values() {
        let rep = build_rep(3).unwrap();
        let g = kernel_g(&[1.0, 0.0, 0.0], &rep).unwrap();
        let expect = rep.gamma(0) * Complex64::new(1.0 / (4.0 * PI), 0.0);
        assert!(max_entry(&(g - expect)) <= 1e-16);
        assert!(matches!(kernel_g(&[0.0; 3], &rep), Err(Error::Singular)));
        let mut rng = rng();
        for n in 2..=5 {
            let rep = build_rep(n).unwrap();
            for _ in 0..20 {
                let d = point(&mut rng, n, 3.0);
                let g = kernel_g(&d, &rep).unwrap();
                let minus: Vec<f64> = d.iter().map(|v| -v).collect();
                assert!(max_entry(&(kernel_g(&minus, &rep).unwrap() + &g)) <= 1e-15 * max_entry(&g));
                let expect = norm(&d).powi(1 - n as i32) / sphere_volume(n - 1);
                assert_relative_eq!(crate::clifford::operator_norm(&g), expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn kernel_is_d_harmonic_away_from_the_pole() {
        let rep = build_rep(3).unwrap();
        let phi = DVector::from_element(2, Complex64::new(1.0, 0.5));
        let field = KernelField::new(&rep, vec![2.0, 0.0, 0.0], phi).unwrap();
        let s = DerivativeStencil::new(2).unwrap();
        let err = |m: usize| {
            let grid = Grid::new(3, 0.5, m).unwrap();
            let d = dirac_apply(&Sampled::new(&grid, &field).unwrap(), &rep, &s).unwrap();
            d.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
        };
        let (a, b) = (err(11), err(21));
        assert!(b < 1e-3);
        assert!((a / b - 4.0).abs() < 0.6, "ratio {}", a / b);
    }

    #[test]
    fn kernel_field_partials_match_finite_differences() {
        let mut rng = rng();
        let rep = build_rep(4).unwrap();
        let field = KernelField::new(&rep, vec![1.5, -0.2, 0.3, 0.0], spinor(&mut rng, 4)).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4];
        let h = 1e-6;
        for (j, p) in field.partials(&x).iter().enumerate() {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[j] += h;
            b[j] -= h;
            let fd = (field.eval(&a) - field.eval(&b)) / Complex64::new(2.0 * h, 0.0);
            assert!((fd - p).norm() <= 1e-7 * p.norm().max(1.0));
        }
        // exact D vanishes too
        assert!(dirac_exact(&field, &rep, &x).norm() <= 1e-12);
    }

    #[test]
    fn xi_first_term_and_homogeneity() {
        let mut rng = rng();
        for n in 2..=5 {
            let rep = build_rep(n).unwrap();
            let y = point(&mut rng, n, 2.0);
            let yh = unit(&y).unwrap();
            let x0 = vec![0.0; n];
            let minus: Vec<f64> = yh.iter().map(|v| -v).collect();
            let xi1 = xi_matrix(1, &x0, &y, &rep).unwrap();
            assert!(max_entry(&(xi1 - rep.clifford_matrix(&minus).unwrap())) <= 1e-15);
            for k in 2..=6 {
                assert_eq!(max_entry(&xi_matrix(k, &x0, &y, &rep).unwrap()), 0.0);
                let x = point(&mut rng, n, 1.0);
                let mu: f64 = rng.gen_range(0.2..3.0);
                let scaled: Vec<f64> = x.iter().map(|v| mu * v).collect();
                let a = xi_matrix(k, &scaled, &y, &rep).unwrap();
                let b = xi_matrix(k, &x, &y, &rep).unwrap() * Complex64::new(mu.powi(k as i32 - 1), 0.0);
                assert!(max_entry(&(a - &b)) <= 1e-12 * max_entry(&b).max(1e-300));
            }
        }
    }

    /// Fourth-order stencils are exact on degree ≤ 4 (first derivative) and
    /// ≤ 5 (second), so both identities hold to rounding for k ≤ 5.
    #[test]
    fn xi_is_harmonic_and_d_harmonic() {
        let mut rng = rng();
        let w1 = [(-2.0, 1.0 / 12.0), (-1.0, -2.0 / 3.0), (1.0, 2.0 / 3.0), (2.0, -1.0 / 12.0)];
        let w2 = [(-2.0, -1.0 / 12.0), (-1.0, 4.0 / 3.0), (0.0, -2.5), (1.0, 4.0 / 3.0), (2.0, -1.0 / 12.0)];
        let h = 0.05;
        for n in 2..=4 {
            let rep = build_rep(n).unwrap();
            let y = point(&mut rng, n, 2.0);
            for k in 1..=5 {
                let x = point(&mut rng, n, 0.8);
                let at = |j: usize, o: f64| {
                    let mut p = x.clone();
                    p[j] += o * h;
                    xi_matrix(k, &p, &y, &rep).unwrap()
                };
                let scale = max_entry(&xi_matrix(k, &x, &y, &rep).unwrap()).max(1e-3);
                let mut lap = SpinMatrix::zeros(rep.rank(), rep.rank());
                let mut dirac = SpinMatrix::zeros(rep.rank(), rep.rank());
                for j in 0..n {
                    for (o, w) in w2 {
                        lap += at(j, o) * Complex64::new(w / (h * h), 0.0);
                    }
                    for (o, w) in w1 {
                        dirac += rep.gamma(j) * at(j, o) * Complex64::new(w / h, 0.0);
                    }
                }
                assert!(max_entry(&lap) <= 1e-9 * scale, "n={n} k={k} Δ {}", max_entry(&lap));
                assert!(max_entry(&dirac) <= 1e-10 * scale, "n={n} k={k} D {}", max_entry(&dirac));
            }
        }
    }

    #[test]
    fn series_matches_kernel() {
        let mut rng = rng();
        for n in 2..=5 {
            let rep = build_rep(n).unwrap();
            // at x = 0 only the k = 1 term survives
            let y = point(&mut rng, n, 3.0);
            let minus: Vec<f64> = y.iter().map(|v| -v).collect();
            let exact = kernel_g(&minus, &rep).unwrap();
            let s = series_expand_kernel(&vec![0.0; n], &y, 2, &rep).unwrap();
            assert!(max_entry(&(s - &exact)) <= 1e-12 * max_entry(&exact));
        }
        let rep = build_rep(3).unwrap();
        for _ in 0..10 {
            let yh = unit(&point(&mut rng, 3, 1.0)).unwrap();
            let xh = unit(&point(&mut rng, 3, 1.0)).unwrap();
            let x: Vec<f64> = xh.iter().map(|v| 0.3 * v).collect();
            let d: Vec<f64> = x.iter().zip(&yh).map(|(a, b)| a - b).collect();
            let exact = kernel_g(&d, &rep).unwrap();
            let s = series_expand_kernel(&x, &yh, 60, &rep).unwrap();
            assert!(max_entry(&(s - &exact)) <= 1e-10 * max_entry(&exact));
        }
    }

    #[test]
    fn series_refuses_outside_convergence() {
        let rep = build_rep(3).unwrap();
        assert!(matches!(
            series_expand_kernel(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 10, &rep),
            Err(Error::OutsideConvergence { .. })
        ));
        assert!(series_expand_kernel(&[0.1, 0.0, 0.0], &[0.0; 3], 10, &rep).is_err());
        assert!(series_expand_kernel(&[0.1, 0.0, 0.0], &[0.0, 1.0, 0.0], MAX_DEGREE + 1, &rep).is_err());
    }

    #[test]
    fn series_error_decays_geometrically() {
        let mut rng = rng();
        for n in [2usize, 3, 4] {
            let rep = build_rep(n).unwrap();
            let y = unit(&point(&mut rng, n, 1.0)).unwrap();
            let x: Vec<f64> = unit(&point(&mut rng, n, 1.0)).unwrap().iter().map(|v| 0.5 * v).collect();
            let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let exact = kernel_g(&d, &rep).unwrap();
            let errs: Vec<f64> = (1..=40)
                .map(|k| max_entry(&(series_expand_kernel(&x, &y, k, &rep).unwrap() - &exact)))
                .collect();
            for k in 5..errs.len() - 1 {
                if errs[k] > 1e-14 {
                    assert!(errs[k + 1] < errs[k], "n={n}: error not decreasing at K={}", k + 2);
                }
            }
            // log-linear fit over K ∈ [10, 30]: slope close to ln(1/2)
            let slope = (errs[29].ln() - errs[9].ln()) / 20.0;
            assert!((slope - 0.5f64.ln()).abs() < 0.1, "n={n} slope {slope}");
        }
    }

    #[test]
    fn constant_spinor_is_reconstructed() {
        let mut rng = rng();
        for n in 2..=4 {
            let rep = build_rep(n).unwrap();
            let c = spinor(&mut rng, rep.rank());
            let field = QuadraticField::constant(c.clone(), n);
            let order = [96, 64, 40][n - 2];
            let quad = RepresentationQuadrature::new(0.1, sphere_quadrature(n - 1, order).unwrap()).unwrap();
            let at0 = representation_reconstruct(&field, &rep, &vec![0.0; n], &quad).unwrap();
            assert!((at0 - &c).norm() <= 1e-12 * c.norm());
            for _ in 0..5 {
                let x = point(&mut rng, n, 0.6);
                let got = representation_reconstruct(&field, &rep, &x, &quad).unwrap();
                assert!((got - &c).norm() <= 1e-8 * c.norm(), "n={n}");
            }
        }
    }

    #[test]
    fn reconstruction_rejects_points_outside_the_ball() {
        let rep = build_rep(2).unwrap();
        let field = QuadraticField::constant(DVector::zeros(2), 2);
        let quad = RepresentationQuadrature::new(0.1, sphere_quadrature(1, 16).unwrap()).unwrap();
        assert!(matches!(
            representation_reconstruct(&field, &rep, &[1.0, 0.0], &quad),
            Err(Error::OutsideBall { .. })
        ));
        assert!(RepresentationQuadrature::new(0.0, sphere_quadrature(1, 16).unwrap()).is_err());
    }

    #[test]
    fn bubble_is_reconstructed_and_refinement_helps() {
        let rep = build_rep(2).unwrap();
        let b = Bubble::new(&rep, BubbleParams::standard(2).unwrap()).unwrap();
        let surface = sphere_quadrature(1, 64).unwrap();
        for x in [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]] {
            let err = |h: f64| {
                let quad = RepresentationQuadrature::new(h, surface.clone()).unwrap();
                let got = representation_reconstruct(&b, &rep, &x, &quad).unwrap();
                (got - b.eval(&x)).norm() / b.eval(&x).norm()
            };
            let (coarse, fine) = (err(0.08), err(0.04));
            assert!(fine <= 1e-3, "x={x:?} err {fine}");
            assert!(fine < coarse);
        }
    }

    /// The printed arrangement (plus sign on the volume term, γ(y) on the
    /// left of G) misses the bubble by O(1).
    #[test]
    fn printed_arrangement_does_not_reconstruct() {
        let rep = build_rep(2).unwrap();
        let b = Bubble::new(&rep, BubbleParams::standard(2).unwrap()).unwrap();
        let surface = sphere_quadrature(1, 64).unwrap();
        let quad = RepresentationQuadrature::new(0.04, surface.clone()).unwrap();
        let x = [0.3, -0.2];
        let (volume, _) = representation_parts(&b, &rep, &x, &quad).unwrap();
        let omega = sphere_volume(1);
        let printed_surface = surface.nodes().iter().zip(surface.weights()).fold(
            DVector::zeros(2),
            |acc: Spinor, (y, w)| {
                let d: Vec<f64> = x.iter().zip(y).map(|(a, c)| a - c).collect();
                let g = kernel_apply(&rep, &d, &b.eval(y), omega);
                acc + rep.clifford_mul_unchecked(y, &g) * Complex64::new(*w, 0.0)
            },
        );
        let printed = volume + printed_surface;
        let truth = b.eval(&x);
        assert!((printed - &truth).norm() / truth.norm() > 0.1);
    }

    #[test]
    fn projections_of_a_constant() {
        let mut rng = rng();
        for n in 2..=4 {
            let rep = build_rep(n).unwrap();
            let c = spinor(&mut rng, rep.rank());
            let surface = sphere_quadrature(n - 1, 24).unwrap();
            let samples = vec![c.clone(); surface.len()];
            for k in 0..=5 {
                let q = harmonic_projection(&samples, k, &rep, &surface).unwrap();
                let x = point(&mut rng, n, 0.9);
                let expect = if k == 1 { c.clone() } else { DVector::zeros(rep.rank()) };
                assert!((q.eval(&x) - expect).norm() <= 1e-12, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn projections_of_the_linear_twistor_vanish() {
        let mut rng = rng();
        for n in 2..=4 {
            let rep = build_rep(n).unwrap();
            let phi = spinor(&mut rng, rep.rank());
            let surface = sphere_quadrature(n - 1, 24).unwrap();
            let samples: Vec<Spinor> = surface.nodes().iter().map(|y| rep.clifford_mul(y, &phi).unwrap()).collect();
            for k in 0..=5 {
                let q = harmonic_projection(&samples, k, &rep, &surface).unwrap();
                let x = point(&mut rng, n, 0.9);
                assert!(q.eval(&x).norm() <= 1e-12, "n={n} k={k} {}", q.eval(&x).norm());
            }
        }
    }

    #[test]
    fn projections_of_a_d_harmonic_linear_field() {
        let mut rng = rng();
        for n in 2..=4 {
            let rep = build_rep(n).unwrap();
            let phi = spinor(&mut rng, rep.rank());
            // ψ = (x₁ - γ₁γ₂ x₂) Φ satisfies Dψ = 0
            let mut field = QuadraticField::constant(DVector::zeros(rep.rank()), n);
            field.linear[0] = phi.clone();
            field.linear[1] = -(rep.gamma(0) * rep.gamma(1) * &phi);
            let x = point(&mut rng, n, 0.5);
            assert!(dirac_exact(&field, &rep, &x).norm() <= 1e-14);
            let surface = sphere_quadrature(n - 1, 24).unwrap();
            let samples = sample_boundary(&field, &surface);
            for k in 0..=5 {
                let q = harmonic_projection(&samples, k, &rep, &surface).unwrap();
                let expect = if k == 2 { field.eval(&x) } else { DVector::zeros(rep.rank()) };
                assert!((q.eval(&x) - expect).norm() <= 1e-12, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn projection_series_recovers_a_harmonic_field() {
        let mut rng = rng();
        for n in 2..=3 {
            let rep = build_rep(n).unwrap();
            let pole: Vec<f64> = unit(&point(&mut rng, n, 1.0)).unwrap().iter().map(|v| 2.0 * v).collect();
            let field = KernelField::new(&rep, pole, spinor(&mut rng, rep.rank())).unwrap();
            let surface = sphere_quadrature(n - 1, 80).unwrap();
            let samples = sample_boundary(&field, &surface);
            let qs: Vec<HarmonicProjection> =
                (1..=30).map(|k| harmonic_projection(&samples, k, &rep, &surface).unwrap()).collect();
            for _ in 0..4 {
                let x = point(&mut rng, n, 0.5);
                let truth = field.eval(&x);
                let partial = |kmax: usize| {
                    qs[..kmax].iter().fold(DVector::zeros(rep.rank()), |acc: Spinor, q| acc + q.eval(&x))
                };
                let errs: Vec<f64> = [2, 5, 10, 30].iter().map(|&k| (partial(k) - &truth).norm() / truth.norm()).collect();
                assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
                assert!(errs[3] <= 1e-8, "{errs:?}");
            }
        }
    }

    #[test]
    fn projections_are_d_harmonic_on_a_grid() {
        let mut rng = rng();
        let rep = build_rep(3).unwrap();
        let b = Bubble::new(&rep, BubbleParams::ground_state(3, 0.7, vec![0.2, -0.1, 0.3]).unwrap()).unwrap();
        let surface = sphere_quadrature(2, 16).unwrap();
        let samples = sample_boundary(&b, &surface);
        let s = DerivativeStencil::new(4).unwrap();
        for k in 1..=4 {
            let q = harmonic_projection(&samples, k, &rep, &surface).unwrap();
            let grid = Grid::centered(point(&mut rng, 3, 0.3), 0.3, 9).unwrap();
            let d = dirac_apply(&Sampled::new(&grid, &q).unwrap(), &rep, &s).unwrap();
            let scale = q.eval(grid.center()).norm().max(1e-6);
            let worst = d.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(worst <= 1e-9 * scale.max(1.0), "k={k} {worst}");
        }
    }

    #[test]
    fn projection_input_validation() {
        let rep = build_rep(3).unwrap();
        let surface = sphere_quadrature(2, 8).unwrap();
        assert!(harmonic_projection(&[], 1, &rep, &surface).is_err());
        let wrong = sphere_quadrature(1, 8).unwrap();
        let samples = vec![DVector::zeros(2); wrong.len()];
        assert!(harmonic_projection(&samples, 1, &rep, &wrong).is_err());
    }
}
