//! Central-difference differential operators on grid-sampled spinor fields.
//!
//! All operators are collocation-only: they act on interior nodes and never
//! impose boundary conditions. Fields can be stored ([`GridField`]) or
//! sampled on demand from a closed form ([`Sampled`]); both read node values
//! at exactly the same coordinates, so they give identical results.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::clifford::CliffordRep;
use crate::fields::{nonlinear_term, Bubble, BubbleParams, SpinorField};
use crate::geometry::Grid;
use crate::{Error, Result, Spinor};

/// Central-difference weights for first and second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeStencil {
    order: usize,
    first: Vec<(isize, f64)>,
    second: Vec<(isize, f64)>,
}

impl DerivativeStencil {
    pub fn new(order: usize) -> Result<Self> {
        match order {
            2 => Ok(Self {
                order,
                first: vec![(-1, -0.5), (1, 0.5)],
                second: vec![(-1, 1.0), (0, -2.0), (1, 1.0)],
            }),
            4 => Ok(Self {
                order,
                first: vec![(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)],
                second: vec![
                    (-2, -1.0 / 12.0),
                    (-1, 4.0 / 3.0),
                    (0, -5.0 / 2.0),
                    (1, 4.0 / 3.0),
                    (2, -1.0 / 12.0),
                ],
            }),
            _ => Err(Error::InvalidParameter(format!(
                "stencil order must be 2 or 4, got {order}"
            ))),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn half_width(&self) -> usize {
        self.order / 2
    }

    pub fn first(&self) -> &[(isize, f64)] {
        &self.first
    }

    pub fn second(&self) -> &[(isize, f64)] {
        &self.second
    }
}

/// Read access to spinor values at grid nodes.
pub trait NodeSource: Sync {
    fn grid(&self) -> &Grid;
    fn rank(&self) -> usize;
    fn value(&self, idx: &[usize]) -> Spinor;
}

/// Spinor values stored at every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    rank: usize,
    values: Vec<Spinor>,
}

impl GridField {
    pub fn new(grid: Grid, rank: usize, values: Vec<Spinor>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| v.len() != rank) {
            return Err(Error::DimensionMismatch {
                expected: rank,
                found: bad.len(),
            });
        }
        if values.iter().any(|v| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite field value".into()));
        }
        Ok(Self { grid, rank, values })
    }

    pub fn sample(grid: &Grid, field: &dyn SpinorField) -> Result<Self> {
        if field.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: field.dim(),
            });
        }
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| field.eval(&grid.node(&grid.multi_index(i))))
            .collect();
        Self::new(grid.clone(), field.rank(), values)
    }

    /// Independent uniform entries in `[-1, 1] + i[-1, 1]`.
    pub fn random<R: rand::Rng>(grid: &Grid, rank: usize, rng: &mut R) -> Self {
        let values = (0..grid.len())
            .map(|_| {
                DVector::from_fn(rank, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        Self {
            grid: grid.clone(),
            rank,
            values,
        }
    }

    pub fn values(&self) -> &[Spinor] {
        &self.values
    }

    pub fn at(&self, idx: &[usize]) -> &Spinor {
        &self.values[self.grid.linear_index(idx)]
    }
}

impl NodeSource for GridField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn value(&self, idx: &[usize]) -> Spinor {
        self.at(idx).clone()
    }
}

/// A closed-form field read at grid nodes on demand.
pub struct Sampled<'a> {
    grid: &'a Grid,
    field: &'a dyn SpinorField,
}

impl<'a> Sampled<'a> {
    pub fn new(grid: &'a Grid, field: &'a dyn SpinorField) -> Result<Self> {
        if field.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: field.dim(),
            });
        }
        Ok(Self { grid, field })
    }
}

impl NodeSource for Sampled<'_> {
    fn grid(&self) -> &Grid {
        self.grid
    }

    fn rank(&self) -> usize {
        self.field.rank()
    }

    fn value(&self, idx: &[usize]) -> Spinor {
        self.field.eval(&self.grid.node(idx))
    }
}

fn check_rep(src: &dyn NodeSource, rep: &CliffordRep) -> Result<()> {
    if rep.dim() != src.grid().dim() {
        return Err(Error::DimensionMismatch {
            expected: src.grid().dim(),
            found: rep.dim(),
        });
    }
    if rep.rank() != src.rank() {
        return Err(Error::DimensionMismatch {
            expected: src.rank(),
            found: rep.rank(),
        });
    }
    Ok(())
}

/// Interior index (relative to the interior grid) to parent index.
fn parent_index(interior: &Grid, linear: usize, width: usize) -> Vec<usize> {
    interior
        .multi_index(linear)
        .into_iter()
        .map(|i| i + width)
        .collect()
}

fn shifted_sum(
    src: &dyn NodeSource,
    idx: &[usize],
    axis: usize,
    weights: &[(isize, f64)],
    scale: f64,
) -> Spinor {
    let mut acc = DVector::zeros(src.rank());
    let mut probe = idx.to_vec();
    for &(offset, w) in weights {
        probe[axis] = (idx[axis] as isize + offset) as usize;
        acc += src.value(&probe) * Complex64::new(w * scale, 0.0);
    }
    acc
}

/// Central-difference `∂_j ψ` for every axis at one (parent-grid) node.
pub fn partials_at(src: &dyn NodeSource, stencil: &DerivativeStencil, idx: &[usize]) -> Vec<Spinor> {
    let inv_h = 1.0 / src.grid().spacing();
    (0..src.grid().dim())
        .map(|axis| shifted_sum(src, idx, axis, stencil.first(), inv_h))
        .collect()
}

/// Compact central-difference Laplacian at one node.
pub fn laplacian_at(src: &dyn NodeSource, stencil: &DerivativeStencil, idx: &[usize]) -> Spinor {
    let inv_h2 = 1.0 / src.grid().spacing().powi(2);
    (0..src.grid().dim()).fold(DVector::zeros(src.rank()), |acc, axis| {
        acc + shifted_sum(src, idx, axis, stencil.second(), inv_h2)
    })
}

fn gamma_sum(rep: &CliffordRep, partials: &[Spinor]) -> Spinor {
    partials
        .iter()
        .zip(rep.gammas())
        .fold(DVector::zeros(rep.rank()), |acc, (d, g)| acc + g * d)
}

fn penrose_from(rep: &CliffordRep, partials: &[Spinor], dirac: &Spinor) -> Vec<Spinor> {
    let inv_n = Complex64::new(1.0 / rep.dim() as f64, 0.0);
    partials
        .iter()
        .zip(rep.gammas())
        .map(|(d, g)| d + g * dirac * inv_n)
        .collect()
}

fn map_interior<T: Send>(
    src: &dyn NodeSource,
    width: usize,
    f: impl Fn(&[usize]) -> T + Sync,
) -> Result<(Grid, Vec<T>)> {
    let interior = src.grid().interior(width)?;
    let values = (0..interior.len())
        .into_par_iter()
        .map(|i| f(&parent_index(&interior, i, width)))
        .collect();
    Ok((interior, values))
}

/// Per-axis central-difference partials on the interior grid.
pub fn fd_partials(f: &dyn NodeSource, stencil: &DerivativeStencil) -> Result<Vec<GridField>> {
    let (interior, per_node) = map_interior(f, stencil.half_width(), |idx| partials_at(f, stencil, idx))?;
    let dim = interior.dim();
    let mut axes: Vec<Vec<Spinor>> = vec![Vec::with_capacity(per_node.len()); dim];
    for node in per_node {
        for (axis, d) in node.into_iter().enumerate() {
            axes[axis].push(d);
        }
    }
    axes.into_iter()
        .map(|values| GridField::new(interior.clone(), f.rank(), values))
        .collect()
}

/// Discrete Dirac operator `Σ_j γ_j ∂_j ψ` on the interior grid.
pub fn dirac_apply(f: &dyn NodeSource, rep: &CliffordRep, stencil: &DerivativeStencil) -> Result<GridField> {
    check_rep(f, rep)?;
    let (interior, values) = map_interior(f, stencil.half_width(), |idx| {
        gamma_sum(rep, &partials_at(f, stencil, idx))
    })?;
    GridField::new(interior, f.rank(), values)
}

/// Discrete Penrose operator, one field per axis: `∂_jψ + (1/n) γ_j Dψ`.
pub fn penrose_apply(
    f: &dyn NodeSource,
    rep: &CliffordRep,
    stencil: &DerivativeStencil,
) -> Result<Vec<GridField>> {
    check_rep(f, rep)?;
    let (interior, per_node) = map_interior(f, stencil.half_width(), |idx| {
        let partials = partials_at(f, stencil, idx);
        let dirac = gamma_sum(rep, &partials);
        penrose_from(rep, &partials, &dirac)
    })?;
    let mut axes: Vec<Vec<Spinor>> = vec![Vec::with_capacity(per_node.len()); rep.dim()];
    for node in per_node {
        for (axis, p) in node.into_iter().enumerate() {
            axes[axis].push(p);
        }
    }
    axes.into_iter()
        .map(|values| GridField::new(interior.clone(), f.rank(), values))
        .collect()
}

/// Compact-stencil Laplacian on the interior grid.
pub fn laplacian_apply(f: &dyn NodeSource, stencil: &DerivativeStencil) -> Result<GridField> {
    let (interior, values) = map_interior(f, stencil.half_width(), |idx| laplacian_at(f, stencil, idx))?;
    GridField::new(interior, f.rank(), values)
}

/// Largest relative defect of `|∂ψ|² = |Pψ|² + (1/n)|Dψ|²` over interior nodes.
pub fn penrose_dirac_defect(
    f: &dyn NodeSource,
    rep: &CliffordRep,
    stencil: &DerivativeStencil,
) -> Result<f64> {
    check_rep(f, rep)?;
    let n = rep.dim() as f64;
    let (_, defects) = map_interior(f, stencil.half_width(), |idx| {
        let partials = partials_at(f, stencil, idx);
        let dirac = gamma_sum(rep, &partials);
        let penrose = penrose_from(rep, &partials, &dirac);
        let grad: f64 = partials.iter().map(|d| d.norm_squared()).sum();
        let pen: f64 = penrose.iter().map(|p| p.norm_squared()).sum();
        let defect = (grad - pen - dirac.norm_squared() / n).abs();
        if grad > 0.0 {
            defect / grad
        } else {
            defect
        }
    })?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

/// Sup and L² norms of a residual over interior nodes.
///
/// `sup_rel = sup|res| / sup|ref|` and `l2_rel = (Σ|res|² / Σ|ref|²)^{1/2}`,
/// where `ref` is the term named by the operation that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualNorms {
    pub sup_abs: f64,
    pub sup_rel: f64,
    pub l2_rel: f64,
    pub spacing: f64,
}

#[derive(Clone, Copy, Default)]
struct Accum {
    sup_res: f64,
    sup_ref: f64,
    sum_res: f64,
    sum_ref: f64,
}

impl Accum {
    fn push(mut self, res: f64, reference: f64) -> Self {
        self.sup_res = self.sup_res.max(res);
        self.sup_ref = self.sup_ref.max(reference);
        self.sum_res += res * res;
        self.sum_ref += reference * reference;
        self
    }

    fn merge(mut self, other: Accum) -> Self {
        self.sup_res = self.sup_res.max(other.sup_res);
        self.sup_ref = self.sup_ref.max(other.sup_ref);
        self.sum_res += other.sum_res;
        self.sum_ref += other.sum_ref;
        self
    }

    fn finish(self, spacing: f64) -> ResidualNorms {
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
        ResidualNorms {
            sup_abs: self.sup_res,
            sup_rel: ratio(self.sup_res, self.sup_ref),
            l2_rel: ratio(self.sum_res, self.sum_ref).sqrt(),
            spacing,
        }
    }
}

const CHUNK: usize = 4096;

/// Deterministic parallel reduction over interior nodes: fixed chunks are
/// reduced in parallel, then merged in index order.
fn reduce_interior(
    grid: &Grid,
    width: usize,
    f: impl Fn(&[usize]) -> (f64, f64) + Sync,
) -> Result<ResidualNorms> {
    let interior = grid.interior(width)?;
    let total = interior.len();
    let chunks = total.div_ceil(CHUNK);
    let partial: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(total)).fold(Accum::default(), |acc, i| {
                let (res, reference) = f(&parent_index(&interior, i, width));
                acc.push(res, reference)
            })
        })
        .collect();
    Ok(partial
        .into_iter()
        .fold(Accum::default(), Accum::merge)
        .finish(grid.spacing()))
}

/// Residual of `Dψ = |ψ|^{2/(n-1)} ψ` for a bubble on a grid, normalized by `sup|Dψ|`.
pub fn nonlinear_residual(
    rep: &CliffordRep,
    params: &BubbleParams,
    grid: &Grid,
    stencil: &DerivativeStencil,
) -> Result<ResidualNorms> {
    let bubble = Bubble::new(rep, params.clone())?;
    let src = Sampled::new(grid, &bubble)?;
    check_rep(&src, rep)?;
    let n = params.dim();
    reduce_interior(grid, stencil.half_width(), |idx| {
        let dirac = gamma_sum(rep, &partials_at(&src, stencil, idx));
        let rhs = nonlinear_term(&src.value(idx), n);
        ((&dirac - rhs).norm(), dirac.norm())
    })
}

/// Residual of the scalar equation `-a Δu = g(u)`, normalized by `sup|g(u)|`.
pub fn scalar_residual(
    grid: &Grid,
    stencil: &DerivativeStencil,
    diffusion: f64,
    u: impl Fn(&[f64]) -> f64 + Sync,
    rhs: impl Fn(f64) -> f64 + Sync,
) -> Result<ResidualNorms> {
    let inv_h2 = 1.0 / grid.spacing().powi(2);
    reduce_interior(grid, stencil.half_width(), |idx| {
        let mut probe = idx.to_vec();
        let mut lap = 0.0;
        for axis in 0..grid.dim() {
            for &(offset, w) in stencil.second() {
                probe[axis] = (idx[axis] as isize + offset) as usize;
                lap += w * u(&grid.node(&probe));
            }
            probe[axis] = idx[axis];
        }
        let g = rhs(u(&grid.node(idx)));
        ((-diffusion * lap * inv_h2 - g).abs(), g.abs())
    })
}

/// `ln(coarse / fine) / ln 2`: the observed order of a halving study.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).ln() / 2f64.ln()
}

/// Default grid for a bubble: half-width `4λ` around `x₀`, with at most
/// `10⁷` node-components and at most 161 points per axis.
pub fn default_grid(params: &BubbleParams) -> Result<Grid> {
    let n = params.dim();
    let rank = params.amplitude.len() as f64;
    let cap = (1e7 / rank).powf(1.0 / n as f64).floor() as usize;
    let mut points = cap.min(161);
    if points.is_multiple_of(2) {
        points -= 1;
    }
    Grid::centered(params.center.clone(), 4.0 * params.scale, points.max(5))
}

/// Smallest `|ψ|` over all grid nodes.
pub fn min_norm_on_grid(field: &dyn SpinorField, grid: &Grid) -> Result<f64> {
    if field.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: field.dim(),
        });
    }
    let total = grid.len();
    Ok((0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(total))
                .map(|i| field.eval(&grid.node(&grid.multi_index(i))).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}
