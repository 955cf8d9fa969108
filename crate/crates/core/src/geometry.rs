//! Round spheres, stereographic coordinates, Cartesian grids and quadrature.
//!
//! The stereographic pair used throughout is
//!
//! ```text
//! π(x) = (2x / (|x|² + 1), (|x|² - 1) / (|x|² + 1)),      p(y) = y' / (1 - y^{n+1})
//! ```
//!
//! with `p = π⁻¹` and `π* g₀ = (2 / (1 + |x|²))² g_{R^n}`.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, PI};
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::{norm_sq, Error, Result};

/// Surface measure `ω_m` of the unit sphere `S^m ⊂ R^{m+1}`.
///
/// Uses `ω_0 = 2`, `ω_1 = 2π`, `ω_m = 2π ω_{m-2} / (m - 1)`, which equals
/// `2π^{(m+1)/2} / Γ((m+1)/2)`.
pub fn sphere_volume(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI * sphere_volume(m - 2) / (m as f64 - 1.0),
    }
}

/// Inverse stereographic projection `R^n → S^n \ {N}`.
pub fn stereo_to_sphere(x: &[f64]) -> Vec<f64> {
    let r2 = norm_sq(x);
    let denom = r2 + 1.0;
    let mut y: Vec<f64> = x.iter().map(|xi| 2.0 * xi / denom).collect();
    y.push((r2 - 1.0) / denom);
    y
}

/// Stereographic projection from the north pole, the exact inverse of
/// [`stereo_to_sphere`].
pub fn stereo_to_plane(y: &[f64]) -> Result<Vec<f64>> {
    let (last, head) = y
        .split_last()
        .ok_or_else(|| Error::InvalidParameter("empty sphere point".into()))?;
    let denom = 1.0 - last;
    if denom <= 0.0 {
        return Err(Error::NorthPole);
    }
    Ok(head.iter().map(|yi| yi / denom).collect())
}

/// The forward projection with the extra factor 2, `x^i = 2y^i / (1 - y^{n+1})`.
///
/// Kept only so reports can show its disagreement with [`stereo_to_sphere`];
/// composing the two doubles every point.
pub fn stereo_to_plane_doubled(y: &[f64]) -> Result<Vec<f64>> {
    Ok(stereo_to_plane(y)?.into_iter().map(|x| 2.0 * x).collect())
}

/// Conformal factor `2 / (1 + |x|²)` of the inverse stereographic projection.
pub fn conformal_factor(x: &[f64]) -> f64 {
    2.0 / (1.0 + norm_sq(x))
}

/// Uniform Cartesian box `center + [-L, L]^n` with `m` (odd) nodes per axis.
///
/// Node `i` on an axis sits at `center - L + i h`, `h = 2L / (m - 1)`, so the
/// center is always a node.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    points: usize,
    spacing: f64,
    center: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::centered(vec![0.0; dim], half_width, points)
    }

    pub fn centered(center: Vec<f64>, half_width: f64, points: usize) -> Result<Self> {
        let dim = center.len();
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if points < 5 || points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be odd and >= 5, got {points}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            points,
            spacing: 2.0 * half_width / (points - 1) as f64,
            center,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Total number of nodes, `m^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] - self.half_width + i as f64 * self.spacing
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i))
            .collect()
    }

    /// Row-major linear index, last axis fastest.
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for slot in idx.iter_mut().rev() {
            *slot = linear % self.points;
            linear /= self.points;
        }
        idx
    }

    /// Same box with the spacing halved (`2m - 1` points per axis).
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            spacing: self.spacing / 2.0,
            ..self.clone()
        }
    }

    /// The sub-grid of nodes at least `width` nodes away from the boundary.
    pub fn interior(&self, width: usize) -> Result<Self> {
        if self.points < 2 * width + 5 {
            return Err(Error::GridTooSmall {
                points: self.points,
                half_width: width,
            });
        }
        Ok(Self {
            points: self.points - 2 * width,
            half_width: self.half_width - width as f64 * self.spacing,
            ..self.clone()
        })
    }
}

/// Positive-weight quadrature on the unit sphere `S^m ⊂ R^{m+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereQuadrature {
    dim: usize,
    order: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Largest polynomial order [`sphere_quadrature`] will build.
pub const MAX_SPHERE_ORDER: usize = 512;

/// Product rule on `S^m`, `m ∈ {1, 2, 3}`, exact for polynomials of total
/// degree `<= order` in the ambient coordinates.
///
/// * `S¹`: `order + 1` equally spaced nodes;
/// * `S²`: Gauss–Legendre in `cos θ` times a uniform azimuth;
/// * `S³`: Gauss–Chebyshev (second kind) in `cos χ` times the `S²` rule.
pub fn sphere_quadrature(m: usize, order: usize) -> Result<SphereQuadrature> {
    if order > MAX_SPHERE_ORDER {
        return Err(Error::InvalidParameter(format!(
            "quadrature order {order} exceeds cap {MAX_SPHERE_ORDER}"
        )));
    }
    let (nodes, weights) = match m {
        1 => circle_rule(order + 1),
        2 => two_sphere_rule(order),
        3 => three_sphere_rule(order),
        _ => {
            return Err(Error::DimensionOutOfRange {
                dim: m,
                min: 1,
                max: 3,
            })
        }
    };
    Ok(SphereQuadrature {
        dim: m,
        order,
        nodes,
        weights,
    })
}

fn circle_rule(count: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let w = 2.0 * PI / count as f64;
    (0..count)
        .map(|i| {
            let t = w * i as f64;
            (vec![t.cos(), t.sin()], w)
        })
        .unzip()
}

fn two_sphere_rule(order: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let polar = order / 2 + 1;
    let gl = GaussLegendre::new(NonZeroUsize::new(polar).expect("polar count is positive"));
    let (ring, ring_w) = circle_rule(order + 1);
    let mut nodes = Vec::with_capacity(polar * ring.len());
    let mut weights = Vec::with_capacity(polar * ring.len());
    for (z, wz) in gl.iter() {
        let s = (1.0 - z * z).max(0.0).sqrt();
        for (c, wc) in ring.iter().zip(&ring_w) {
            nodes.push(vec![s * c[0], s * c[1], *z]);
            weights.push(wz * wc);
        }
    }
    (nodes, weights)
}

fn three_sphere_rule(order: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    // ∫ (1 - t²)^{1/2} p(t) dt is exact to degree 2k - 1 with k Chebyshev-U nodes
    let k = order / 2 + 1;
    let (inner, inner_w) = two_sphere_rule(order);
    let mut nodes = Vec::with_capacity(k * inner.len());
    let mut weights = Vec::with_capacity(k * inner.len());
    for i in 1..=k {
        let angle = i as f64 * PI / (k + 1) as f64;
        let (t, s) = (angle.cos(), angle.sin());
        let wt = PI / (k + 1) as f64 * s * s;
        for (u, wu) in inner.iter().zip(&inner_w) {
            nodes.push(vec![s * u[0], s * u[1], s * u[2], t]);
            weights.push(wt * wu);
        }
    }
    (nodes, weights)
}

impl SphereQuadrature {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * f(y))
            .sum()
    }
}

/// Default relative accuracy of [`radial_integral`].
pub const RADIAL_TOLERANCE: f64 = 1e-12;

/// `∫_{R^n} f(|x|) dx = ω_{n-1} ∫₀^∞ r^{n-1} f(r) dr`.
pub fn radial_integral(f: impl Fn(f64) -> f64, n: usize) -> Result<f64> {
    radial_integral_with_tolerance(f, n, RADIAL_TOLERANCE)
}

pub fn radial_integral_with_tolerance(
    f: impl Fn(f64) -> f64,
    n: usize,
    tolerance: f64,
) -> Result<f64> {
    check_tail(&f, n)?;
    radial_integral_to(f, n, f64::INFINITY, tolerance)
}

/// Integral of `f(|x|)` over the ball of radius `r_max` (which may be infinite).
///
/// The substitution `r = tan θ` maps `[0, ∞)` onto `[0, π/2)`; the resulting
/// finite interval is integrated by double-exponential quadrature with
/// bisection until each panel meets its share of the tolerance.
pub fn radial_integral_to(
    f: impl Fn(f64) -> f64,
    n: usize,
    r_max: f64,
    tolerance: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if !(r_max >= 0.0) {
        return Err(Error::InvalidParameter(format!("r_max = {r_max}")));
    }
    let theta_max = if r_max.is_infinite() {
        FRAC_PI_2
    } else {
        r_max.atan()
    };
    let bad = Cell::new(false);
    let integrand = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let r = s / c;
        let v = r.powi(n as i32 - 1) * f(r) / (c * c);
        if v.is_finite() {
            v
        } else {
            // the endpoint θ = π/2 itself may overflow; anything else is a real failure
            if theta < FRAC_PI_2 * (1.0 - 1e-12) {
                bad.set(true);
            }
            0.0
        }
    };
    let coarse = quadrature::double_exponential::integrate(integrand, 0.0, theta_max, 1e-6);
    let scale = coarse.integral.abs().max(f64::MIN_POSITIVE);
    let target = tolerance * scale;
    let value = adaptive_panel(&integrand, 0.0, theta_max, target, 0)?;
    if bad.get() {
        return Err(Error::NonConvergent(
            "integrand produced non-finite values".into(),
        ));
    }
    Ok(sphere_volume(n - 1) * value)
}

fn adaptive_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64, target: f64, depth: usize) -> Result<f64> {
    let out = quadrature::double_exponential::integrate(f, a, b, target);
    if out.error_estimate <= target {
        return Ok(out.integral);
    }
    if depth >= 24 {
        return Err(Error::NonConvergent(format!(
            "panel [{a}, {b}] error estimate {:.3e} above target {target:.3e}",
            out.error_estimate
        )));
    }
    let mid = 0.5 * (a + b);
    Ok(adaptive_panel(f, a, mid, 0.5 * target, depth + 1)?
        + adaptive_panel(f, mid, b, 0.5 * target, depth + 1)?)
}

/// Rejects integrands whose `r^n f(r)` fails to decay between `r = 10³` and `r = 10⁶`.
fn check_tail(f: &impl Fn(f64) -> f64, n: usize) -> Result<()> {
    let weighted = |r: f64| (r.powi(n as i32) * f(r)).abs();
    let (near, far) = (weighted(1e3), weighted(1e6));
    if !near.is_finite() || !far.is_finite() {
        return Err(Error::NonConvergent("non-finite tail".into()));
    }
    if far > 1e-300 && far >= 0.5 * near {
        return Err(Error::NonConvergent(format!(
            "r^n f(r) does not decay: {near:.3e} at r = 1e3, {far:.3e} at r = 1e6"
        )));
    }
    Ok(())
}
