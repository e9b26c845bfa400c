//! Grids on unions of intervals and the dense collocation matrix of the
//! restricted fractional Laplacian `(-Δ)^s_res`.
//!
//! # Scheme
//!
//! Grid functions are piecewise constant on uniform cells of width `h`,
//! sampled at cell midpoints `x_i`. For such a function the restricted
//! operator at a node,
//!
//! ```text
//! c_s · PV∫_ℝ (u(x_i) − u(y)) |x_i − y|^{−1−2s} dy     (u = 0 off Ω),
//! ```
//!
//! is a finite sum of exact cell integrals:
//!
//! - off-diagonal `A_ij = −c_s ∫_{cell j} |x_i − y|^{−1−2s} dy`,
//! - diagonal `A_ii = c_s ∫_{ℝ∖cell i} |x_i − y|^{−1−2s} dy = 2c_s (h/2)^{−2s} / (2s)`.
//!
//! The symmetric singular cell contributes nothing (its principal value
//! vanishes for piecewise-constant data). Because the cells tile `Ω`, the row
//! sums are exactly the exterior kernel `κ(x_i)`, the matrix is exactly
//! symmetric, strictly diagonally dominant and hence positive definite, and
//! the operator on a sub-union of cells is the principal submatrix of the
//! operator on the whole grid.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of cells in every grid component.
pub const MIN_CELLS_PER_COMPONENT: usize = 8;

/// Relative tolerance (in units of `h`) for cell-boundary alignment checks.
const ALIGN_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    /// Left endpoint.
    pub lo: f64,
    /// Right endpoint.
    pub hi: f64,
}

impl Interval {
    /// `(lo, hi)`; callers validate ordering where it matters.
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    /// `hi − lo`.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Strict interior membership.
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

fn validate_sorted_disjoint(intervals: &[Interval], what: &str) -> Result<()> {
    for iv in intervals {
        if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
            return Err(Error::InvalidGrid(format!(
                "{what}: interval ({}, {}) is empty or non-finite",
                iv.lo, iv.hi
            )));
        }
    }
    for w in intervals.windows(2) {
        if w[0].hi > w[1].lo {
            return Err(Error::InvalidGrid(format!(
                "{what}: intervals ({}, {}) and ({}, {}) overlap or are unsorted",
                w[0].lo, w[0].hi, w[1].lo, w[1].hi
            )));
        }
    }
    Ok(())
}

/// A bounded open set: finitely many sorted, pairwise disjoint intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    components: Vec<Interval>,
}

impl Domain {
    /// Single interval `(lo, hi)`.
    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain {
            components: vec![Interval::new(lo, hi)],
        }
    }

    /// Union of sorted disjoint intervals.
    pub fn union(components: Vec<Interval>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidGrid("domain has no components".into()));
        }
        validate_sorted_disjoint(&components, "domain")?;
        Ok(Domain { components })
    }

    /// The components in increasing order.
    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.components.iter().map(Interval::width).sum()
    }

    /// Index of the component containing `x` in its interior.
    pub fn component_containing(&self, x: f64) -> Option<usize> {
        self.components.iter().position(|c| c.contains(x))
    }
}

/// Disjoint sub-intervals `(x_i − ε, x_i + ε)` of `I = (−1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalUnion {
    centers: Vec<f64>,
    half_width: f64,
}

impl IntervalUnion {
    /// Validates `x_1 < … < x_k` in `(−1, 1)` and `2ε` below every gap
    /// `|x_i − x_j|` and every distance to `±1`.
    pub fn new(centers: Vec<f64>, half_width: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("at least one well center is required"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!("half-width must be positive, got {half_width}")));
        }
        if centers.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("well centers must be finite"));
        }
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("well centers must be strictly increasing: {centers:?}")));
        }
        let two_eps = 2.0 * half_width;
        for (i, &x) in centers.iter().enumerate() {
            if !(two_eps < 1.0 - x && two_eps < 1.0 + x) {
                return Err(Error::invalid(format!(
                    "well {i} at {x}: 2ε = {two_eps} must be below the distance to ±1"
                )));
            }
        }
        for w in centers.windows(2) {
            if !(two_eps < w[1] - w[0]) {
                return Err(Error::invalid(format!(
                    "wells at {} and {}: 2ε = {two_eps} must be below their separation",
                    w[0], w[1]
                )));
            }
        }
        Ok(IntervalUnion {
            centers,
            half_width,
        })
    }

    /// Well centers `x_i`.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Half-width `ε`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of wells `k`.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    /// Always false: construction requires at least one well.
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// The enclosing interval `I = (−1, 1)`.
    pub fn enclosing(&self) -> Interval {
        Interval::new(-1.0, 1.0)
    }

    /// The wells `(x_i − ε, x_i + ε)`.
    pub fn intervals(&self) -> Vec<Interval> {
        self.centers
            .iter()
            .map(|&x| Interval::new(x - self.half_width, x + self.half_width))
            .collect()
    }

    /// Total measure `2kε` of `U`.
    pub fn measure(&self) -> f64 {
        2.0 * self.half_width * self.len() as f64
    }

    /// `U` as a region.
    pub fn region(&self) -> Region {
        Region {
            intervals: self.intervals(),
        }
    }

    /// `I ∖ Ū` as a region.
    pub fn exterior_region(&self) -> Region {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut left = -1.0;
        for iv in self.intervals() {
            out.push(Interval::new(left, iv.lo));
            left = iv.hi;
        }
        out.push(Interval::new(left, 1.0));
        Region { intervals: out }
    }

    /// Index of the well containing `x`.
    pub fn well_of(&self, x: f64) -> Option<usize> {
        self.intervals().iter().position(|iv| iv.contains(x))
    }

    /// Minimum center separation `min |x_i − x_j|` (infinite for one well).
    pub fn min_separation(&self) -> f64 {
        self.centers
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

impl From<&IntervalUnion> for Domain {
    fn from(u: &IntervalUnion) -> Self {
        Domain {
            components: u.intervals(),
        }
    }
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Midpoint grid with a single cell width `h` on every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    components: Vec<Interval>,
    h: f64,
    nodes: Vec<f64>,
    starts: Vec<usize>,
}

/// Builds the midpoint grid with `h = 1 / n_per_unit_length`.
///
/// Every component width must be an integer multiple of `h` (so that all
/// components share one `h`, which keeps the operator exactly symmetric) and
/// must hold at least [`MIN_CELLS_PER_COMPONENT`] cells.
pub fn build_grid(domain: &Domain, n_per_unit_length: usize) -> Result<UniformGrid> {
    if n_per_unit_length == 0 {
        return Err(Error::InvalidGrid("resolution must be positive".into()));
    }
    let h = 1.0 / n_per_unit_length as f64;
    let mut nodes = Vec::new();
    let mut starts = Vec::with_capacity(domain.components.len());
    for comp in &domain.components {
        let exact = comp.width() * n_per_unit_length as f64;
        let cells = exact.round();
        if cells < 2.0 {
            return Err(Error::InvalidGrid(format!(
                "component ({}, {}) is narrower than 2h = {}",
                comp.lo,
                comp.hi,
                2.0 * h
            )));
        }
        if (exact - cells).abs() > ALIGN_TOL * cells.max(1.0) {
            return Err(Error::NotCellAligned(format!(
                "component ({}, {}) has width {} which is not a multiple of h = {h}; \
                 choose a resolution with width·n integral",
                comp.lo,
                comp.hi,
                comp.width()
            )));
        }
        let cells = cells as usize;
        if cells < MIN_CELLS_PER_COMPONENT {
            return Err(Error::InvalidGrid(format!(
                "component ({}, {}) gets {cells} cells; at least {MIN_CELLS_PER_COMPONENT} required",
                comp.lo, comp.hi
            )));
        }
        starts.push(nodes.len());
        nodes.extend((0..cells).map(|j| comp.lo + (j as f64 + 0.5) * h));
    }
    Ok(UniformGrid {
        components: domain.components.clone(),
        h,
        nodes,
        starts,
    })
}

impl UniformGrid {
    /// Cell width.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Cell midpoints in increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the grid has no nodes.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Domain components covered by the grid.
    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    /// The covered domain.
    pub fn domain(&self) -> Domain {
        Domain {
            components: self.components.clone(),
        }
    }

    /// Node index range of component `c`.
    pub fn component_nodes(&self, c: usize) -> Range<usize> {
        let end = self.starts.get(c + 1).copied().unwrap_or(self.nodes.len());
        self.starts[c]..end
    }

    /// Component index of node `i`.
    pub fn component_of(&self, i: usize) -> usize {
        self.starts.partition_point(|&s| s <= i) - 1
    }

    /// Cell boundaries `[x_i − h/2, x_i + h/2]` of node `i`.
    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        let c = self.component_of(i);
        let k = i - self.starts[c];
        let lo = self.components[c].lo;
        (lo + k as f64 * self.h, lo + (k + 1) as f64 * self.h)
    }

    /// Sum of all cell widths.
    pub fn total_cell_measure(&self) -> f64 {
        self.h * self.nodes.len() as f64
    }

    /// Sub-grid of the cells selected by `mask`.
    ///
    /// Node positions are copied verbatim, so operators assembled on the
    /// restriction are principal submatrices of the parent operator.
    pub fn restrict(&self, mask: &[bool]) -> Result<UniformGrid> {
        if mask.len() != self.len() {
            return Err(Error::GeometryMismatch("mask length differs from node count".into()));
        }
        let mut components: Vec<Interval> = Vec::new();
        let mut nodes = Vec::new();
        let mut starts = Vec::new();
        let mut prev: Option<usize> = None;
        for (i, &keep) in mask.iter().enumerate() {
            if !keep {
                continue;
            }
            let (lo, hi) = self.cell_bounds(i);
            let contiguous = prev.is_some_and(|p| p + 1 == i && self.component_of(p) == self.component_of(i));
            if contiguous {
                components.last_mut().expect("open component").hi = hi;
            } else {
                starts.push(nodes.len());
                components.push(Interval::new(lo, hi));
            }
            nodes.push(self.nodes[i]);
            prev = Some(i);
        }
        if nodes.is_empty() {
            return Err(Error::GeometryMismatch("restriction selects no cells".into()));
        }
        Ok(UniformGrid {
            components,
            h: self.h,
            nodes,
            starts,
        })
    }
}

/// A union of intervals used to select grid cells (norm regions, wells,
/// exteriors). Must be cell-aligned with any grid it is applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    intervals: Vec<Interval>,
}

impl Region {
    /// Sorted disjoint intervals.
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        validate_sorted_disjoint(&intervals, "region")?;
        Ok(Region { intervals })
    }

    /// The intervals.
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Selects the cells lying inside the region.
    ///
    /// Fails with [`Error::NotCellAligned`] when some cell straddles a
    /// region boundary.
    pub fn mask(&self, grid: &UniformGrid) -> Result<Vec<bool>> {
        let tol = ALIGN_TOL * grid.h();
        (0..grid.len())
            .map(|i| {
                let (lo, hi) = grid.cell_bounds(i);
                let inside = self
                    .intervals
                    .iter()
                    .any(|r| lo >= r.lo - tol && hi <= r.hi + tol);
                let straddles = self
                    .intervals
                    .iter()
                    .any(|r| lo < r.hi - tol && hi > r.lo + tol);
                match (inside, straddles) {
                    (true, _) => Ok(true),
                    (false, false) => Ok(false),
                    (false, true) => Err(Error::NotCellAligned(format!(
                        "cell [{lo}, {hi}] straddles a region boundary"
                    ))),
                }
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Kernel integrals
// ---------------------------------------------------------------------------

/// The normalization `c_{1,s} = s·4^s·Γ(1/2 + s) / (√π·Γ(1 − s))` of the 1D
/// fractional Laplacian (equals `1/π` at `s = 1/2`).
pub fn fractional_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    use statrs::function::gamma::gamma;
    Ok(s * 4f64.powf(s) * gamma(0.5 + s) / (std::f64::consts::PI.sqrt() * gamma(1.0 - s)))
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!("fractional order s must lie in (0, 1), got {s}")));
    }
    Ok(())
}

/// `∫_lo^hi t^{−1−2s} dt` for `0 < lo < hi ≤ ∞`, evaluated without
/// cancellation when `hi − lo ≪ lo`.
pub fn power_integral(lo: f64, hi: f64, s: f64) -> f64 {
    debug_assert!(lo > 0.0 && hi >= lo);
    let two_s = 2.0 * s;
    if hi.is_infinite() {
        return lo.powf(-two_s) / two_s;
    }
    // lo^{−2s} − hi^{−2s} = −lo^{−2s} · expm1(−2s · ln(hi/lo))
    let log_ratio = ((hi - lo) / lo).ln_1p();
    -lo.powf(-two_s) * (-two_s * log_ratio).exp_m1() / two_s
}

/// `∫_α^β |x − y|^{−1−2s} dy` for an interval `(α, β)` not containing `x`
/// (endpoints may be infinite).
fn interval_kernel_integral(x: f64, alpha: f64, beta: f64, s: f64) -> f64 {
    if beta <= x {
        power_integral(x - beta, x - alpha, s)
    } else {
        power_integral(alpha - x, beta - x, s)
    }
}

/// Exterior kernel `κ(x) = c_s ∫_{ℝ∖Ω} |x − y|^{−1−2s} dy` in closed form,
/// summed over the gaps and the two tails of the complement.
pub fn kappa(x: f64, domain: &Domain, s: f64) -> Result<f64> {
    check_order(s)?;
    if domain.component_containing(x).is_none() {
        return Err(Error::invalid(format!(
            "κ is evaluated at interior points only; {x} is on the boundary or outside"
        )));
    }
    let c_s = fractional_constant(s)?;
    let comps = domain.components();
    let mut total = interval_kernel_integral(x, f64::NEG_INFINITY, comps[0].lo, s);
    for w in comps.windows(2) {
        if w[1].lo > w[0].hi {
            total += interval_kernel_integral(x, w[0].hi, w[1].lo, s);
        }
    }
    total += interval_kernel_integral(x, comps[comps.len() - 1].hi, f64::INFINITY, s);
    Ok(c_s * total)
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// Dense symmetric discretization of `(-Δ)^s_res` (plus any potential).
///
/// `blocks > 1` denotes a block operator on `blocks` copies of the grid
/// (the product-space operators of [`crate::perturb`]).
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix: DMatrix<f64>,
    grid: Arc<UniformGrid>,
    s: f64,
    c_s: f64,
    blocks: usize,
}

impl DiscreteOperator {
    /// Wraps a matrix; the caller guarantees it is symmetric and sized
    /// `blocks · grid.len()`.
    pub fn from_parts(
        matrix: DMatrix<f64>,
        grid: Arc<UniformGrid>,
        s: f64,
        c_s: f64,
        blocks: usize,
    ) -> Result<Self> {
        if blocks == 0 || matrix.nrows() != blocks * grid.len() || !matrix.is_square() {
            return Err(Error::GeometryMismatch(format!(
                "matrix {}×{} does not match {blocks} block(s) of {} nodes",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        Ok(DiscreteOperator {
            matrix,
            grid,
            s,
            c_s,
            blocks,
        })
    }

    /// The matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The (per-block) grid.
    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    /// Shared handle to the grid.
    pub fn grid_arc(&self) -> Arc<UniformGrid> {
        Arc::clone(&self.grid)
    }

    /// Fractional order.
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Normalization constant used in assembly.
    pub fn c_s(&self) -> f64 {
        self.c_s
    }

    /// Number of grid copies.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Matrix dimension.
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    /// True for an empty operator.
    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// Quadrature weight of every unknown.
    pub fn weights(&self) -> Vec<f64> {
        vec![self.grid.h(); self.len()]
    }

    /// Unknowns belonging to the first domain component of the first block.
    pub fn first_component_nodes(&self) -> Range<usize> {
        self.grid.component_nodes(0)
    }

    /// `max |A_ij − A_ji| / max |A_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.len();
        let max = self.matrix.amax();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in (j + 1)..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        if max == 0.0 {
            0.0
        } else {
            worst / max
        }
    }

    /// Principal submatrix on the unknowns selected by `mask`, on the
    /// restricted grid (single-block operators only).
    pub fn principal_submatrix(&self, mask: &[bool]) -> Result<DiscreteOperator> {
        if self.blocks != 1 {
            return Err(Error::GeometryMismatch("restriction of a block operator".into()));
        }
        let grid = self.grid.restrict(mask)?;
        let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let matrix = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.matrix[(idx[r], idx[c])]);
        DiscreteOperator::from_parts(matrix, Arc::new(grid), self.s, self.c_s, 1)
    }
}

/// Assembles the collocation matrix of `(-Δ)^s_res` on `grid`.
///
/// Columns are computed in parallel; entries depend only on `|x_i − x_j|`
/// and `h`, so the result is bitwise symmetric.
pub fn assemble_fractional(grid: Arc<UniformGrid>, s: f64, c_s: f64) -> Result<DiscreteOperator> {
    check_order(s)?;
    if !(c_s > 0.0 && c_s.is_finite()) {
        return Err(Error::invalid(format!("normalization c_s must be positive, got {c_s}")));
    }
    let n = grid.len();
    let h = grid.h();
    let half = 0.5 * h;
    let diag = c_s * 2.0 * power_integral(half, f64::INFINITY, s);
    let nodes = grid.nodes();
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    matrix
        .as_mut_slice()
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(j, col)| {
            let xj = nodes[j];
            for (i, a) in col.iter_mut().enumerate() {
                *a = if i == j {
                    diag
                } else {
                    let d = (nodes[i] - xj).abs();
                    -c_s * power_integral(d - half, d + half, s)
                };
            }
        });
    DiscreteOperator::from_parts(matrix, grid, s, c_s, 1)
}

/// Convenience: grid + standard constant + assembly.
pub fn assemble_on(domain: &Domain, n_per_unit_length: usize, s: f64) -> Result<DiscreteOperator> {
    let grid = build_grid(domain, n_per_unit_length)?;
    assemble_fractional(Arc::new(grid), s, fractional_constant(s)?)
}

/// `A + diag(values)`.
pub fn add_diagonal(op: &DiscreteOperator, values: &[f64]) -> Result<DiscreteOperator> {
    if values.len() != op.len() {
        return Err(Error::GeometryMismatch(format!(
            "{} diagonal values for an operator of size {}",
            values.len(),
            op.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("potential values must be finite"));
    }
    let mut out = op.clone();
    for (i, v) in values.iter().enumerate() {
        out.matrix[(i, i)] += v;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// Largest admissible finite barrier `1/δ`; beyond it the barrier swamps
/// every O(1) eigenvalue in double precision and the infinite well should be
/// used instead.
pub const MAX_BARRIER: f64 = 1e14;

/// Potential outside the wells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Barrier {
    /// `1/δ` on `I ∖ U`.
    Finite {
        /// Barrier parameter `δ > 0`.
        delta: f64,
    },
    /// `+∞` on `I ∖ U`, realized by restricting the grid to `U`.
    Infinite,
}

/// Well potential: value `V_i` on well `i` (times `strength`) plus a barrier.
///
/// `strength` is the multiplier of the `εV` form of the perturbation; it is
/// independent of the geometric half-width of the wells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    /// Well geometry `U`.
    pub wells: IntervalUnion,
    /// `V_i` per well.
    pub values: Vec<f64>,
    /// Potential on `I ∖ U`.
    pub barrier: Barrier,
    /// Multiplier applied to every `V_i`.
    pub strength: f64,
}

impl PotentialSpec {
    /// Validated spec with unit strength.
    pub fn new(wells: IntervalUnion, values: Vec<f64>, barrier: Barrier) -> Result<Self> {
        let spec = PotentialSpec {
            wells,
            values,
            barrier,
            strength: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks value count, finiteness and the barrier range.
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.wells.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} well values for {} wells",
                self.values.len(),
                self.wells.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) || !self.strength.is_finite() {
            return Err(Error::invalid("well values and strength must be finite"));
        }
        if let Barrier::Finite { delta } = self.barrier {
            barrier_height(delta)?;
        }
        Ok(())
    }

    /// Potential at every node of `grid`.
    pub fn values_on(&self, grid: &UniformGrid) -> Result<Vec<f64>> {
        self.validate()?;
        let in_u = self.wells.region().mask(grid)?;
        let outside = match self.barrier {
            Barrier::Finite { delta } => Some(barrier_height(delta)?),
            Barrier::Infinite => None,
        };
        grid.nodes()
            .iter()
            .zip(&in_u)
            .map(|(&x, &inside)| {
                if inside {
                    let k = self.wells.well_of(x).expect("masked node lies in a well");
                    Ok(self.strength * self.values[k])
                } else {
                    outside.ok_or_else(|| {
                        Error::GeometryMismatch(format!(
                            "node {x} lies outside the wells but the barrier is infinite; \
                             restrict the grid to U"
                        ))
                    })
                }
            })
            .collect()
    }
}

/// `1/δ`, rejecting non-positive δ and barriers above [`MAX_BARRIER`].
pub fn barrier_height(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("barrier parameter δ must be positive, got {delta}")));
    }
    let b = 1.0 / delta;
    if !b.is_finite() || b > MAX_BARRIER {
        return Err(Error::invalid(format!(
            "barrier 1/δ = {b:e} exceeds {MAX_BARRIER:e}; use the infinite-well solver for δ → 0"
        )));
    }
    Ok(b)
}

/// `A + diag(V(x_i))` for the potential `p` on the operator's grid.
pub fn add_potential(op: &DiscreteOperator, p: &PotentialSpec) -> Result<DiscreteOperator> {
    if op.blocks() != 1 {
        return Err(Error::GeometryMismatch("potentials apply to single-block operators".into()));
    }
    let values = p.values_on(op.grid())?;
    add_diagonal(op, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::solve_lowest;

    /// Adaptive Simpson quadrature (test oracle).
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    /// `∫_d^∞ t^{−1−2s} dt` by quadrature after the map `t = d/(1−v)^4`.
    fn tail_by_quadrature(d: f64, s: f64) -> f64 {
        let f = |v: f64| {
            let w = 1.0 - v;
            if w <= 0.0 {
                return 0.0;
            }
            let t = d / w.powi(4);
            t.powf(-1.0 - 2.0 * s) * 4.0 * d / w.powi(5)
        };
        simpson(&f, 0.0, 1.0, 1e-14)
    }

    #[test]
    fn constant_at_one_half() {
        assert!((fractional_constant(0.5).unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
        assert!(fractional_constant(1.0).is_err());
        assert!(fractional_constant(0.0).is_err());
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(&Domain::interval(-1.0, 1.0), 4).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.nodes()[0], -0.875);
        let two = Domain::union(vec![Interval::new(-0.6, -0.4), Interval::new(0.2, 0.4)]).unwrap();
        let g2 = build_grid(&two, 50).unwrap();
        assert_eq!(g2.len(), 20);
        assert_eq!(g2.component_nodes(1), 10..20);
        for g in [&g, &g2] {
            assert!((g.total_cell_measure() - g.domain().measure()).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_rejections() {
        assert!(build_grid(&Domain::interval(-1.0, 1.0), 3).is_err());
        assert!(build_grid(&Domain::interval(0.0, 0.01), 100).is_err());
        assert!(matches!(
            build_grid(&Domain::interval(0.0, 0.123), 100),
            Err(Error::NotCellAligned(_))
        ));
        assert!(Domain::union(vec![Interval::new(0.0, 0.5), Interval::new(0.4, 0.9)]).is_err());
    }

    #[test]
    fn interval_union_validation() {
        assert!(IntervalUnion::new(vec![-0.5, 0.0, 0.5], 0.05).is_ok());
        assert!(IntervalUnion::new(vec![-0.5, 0.0, 0.5], 0.25).is_err());
        assert!(IntervalUnion::new(vec![0.0, -0.5], 0.05).is_err());
        assert!(IntervalUnion::new(vec![0.95], 0.05).is_err());
        let u = IntervalUnion::new(vec![-0.5, 0.0, 0.5], 0.05).unwrap();
        let ext: f64 = u.exterior_region().intervals().iter().map(Interval::width).sum();
        assert!((ext + u.measure() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_examples() {
        let d = Domain::interval(-1.0, 1.0);
        let c = fractional_constant(0.5).unwrap();
        assert!((kappa(0.0, &d, 0.5).unwrap() - 2.0 * c).abs() < 1e-15);
        let mut prev = 0.0;
        for x in [0.0, 0.5, 0.9, 0.99, 0.999, 0.99999] {
            let k = kappa(x, &d, 0.5).unwrap();
            assert!(k > prev);
            prev = k;
        }
        assert!(kappa(1.0, &d, 0.5).is_err());
        assert!(kappa(-1.0, &d, 0.5).is_err());
        for (x, s) in [(0.0, 0.25), (0.3, 0.25), (-0.7, 0.75)] {
            let c = fractional_constant(s).unwrap();
            let oracle = c * (tail_by_quadrature(1.0 - x, s) + tail_by_quadrature(1.0 + x, s));
            let k = kappa(x, &d, s).unwrap();
            assert!(((k - oracle) / oracle).abs() < 1e-10, "x={x}, s={s}: {k} vs {oracle}");
        }
    }

    #[test]
    fn kappa_on_union_counts_gaps() {
        let d = Domain::union(vec![Interval::new(-1.0, -0.2), Interval::new(0.2, 1.0)]).unwrap();
        let c = fractional_constant(0.5).unwrap();
        let x = 0.5;
        let want = c * (1.0 / (1.0 - x) + 1.0 / (x + 1.0) + (1.0 / (x - 0.2) - 1.0 / (x + 0.2)));
        assert!((kappa(x, &d, 0.5).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn power_integral_matches_direct_formula() {
        for s in [0.25, 0.5, 0.75] {
            let (lo, hi): (f64, f64) = (0.3, 1.7);
            let direct = (lo.powf(-2.0 * s) - hi.powf(-2.0 * s)) / (2.0 * s);
            assert!((power_integral(lo, hi, s) - direct).abs() < 1e-14);
        }
        // Thin interval: ≈ width · lo^{−1−2s}.
        let hi = 1.0 + 1e-12;
        let width = hi - 1.0;
        let v = power_integral(1.0, hi, 0.5);
        assert!(((v - width) / width).abs() < 1e-10);
    }

    #[test]
    fn operator_symmetry_row_sums_and_definiteness() {
        let op = assemble_on(&Domain::interval(-1.0, 1.0), 100, 0.5).unwrap();
        assert!(op.symmetry_defect() <= 1e-12);
        let d = Domain::interval(-1.0, 1.0);
        for (i, &x) in op.grid().nodes().iter().enumerate() {
            let row: f64 = op.matrix().row(i).sum();
            let k = kappa(x, &d, 0.5).unwrap();
            assert!(((row - k) / k).abs() < 1e-9, "node {x}");
        }
        let lam = solve_lowest(&op, 1).unwrap()[0].value;
        assert!(lam > 0.0);
    }

    #[test]
    fn consistency_with_analytic_half_laplacian() {
        // (−Δ)^{1/2}_res (1 − x²) = (4 + 2x ln((1 − x)/(1 + x))) / π on (−1, 1).
        let exact = |x: f64| (4.0 + 2.0 * x * ((1.0 - x) / (1.0 + x)).ln()) / std::f64::consts::PI;
        let mut prev = f64::INFINITY;
        for n in [25, 50, 100, 200] {
            let op = assemble_on(&Domain::interval(-1.0, 1.0), n, 0.5).unwrap();
            let u: Vec<f64> = op.grid().nodes().iter().map(|x| 1.0 - x * x).collect();
            let au = op.matrix() * nalgebra::DVector::from_vec(u);
            let err = op
                .grid()
                .nodes()
                .iter()
                .enumerate()
                .filter(|(_, x)| x.abs() <= 0.5)
                .map(|(i, &x)| ((au[i] - exact(x)) / exact(x)).abs())
                .fold(0.0, f64::max);
            assert!(err < prev, "n={n}: {err} !< {prev}");
            prev = err;
        }
        assert!(prev < 2e-2);
    }

    #[test]
    fn scaling_law() {
        let base = assemble_on(&Domain::interval(-1.0, 1.0), 40, 0.5).unwrap();
        let l = solve_lowest(&base, 2).unwrap();
        for (r, n) in [(0.5, 80), (2.0, 20)] {
            let op = assemble_on(&Domain::interval(-r, r), n, 0.5).unwrap();
            let lr = solve_lowest(&op, 2).unwrap();
            for k in 0..2 {
                let want = l[k].value * r.powf(-1.0);
                assert!(((lr[k].value - want) / want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn refinement_extrapolates_to_known_ground_state() {
        let lam = |n| {
            solve_lowest(&assemble_on(&Domain::interval(-1.0, 1.0), n, 0.5).unwrap(), 1).unwrap()[0]
                .value
        };
        let (l100, l200) = (lam(50), lam(100));
        let extrap = 2.0 * l200 - l100;
        // Known value of the first eigenvalue of the Cauchy process on (−1, 1).
        assert!((extrap - 1.157_773_883_697_7).abs() < 2e-4, "{extrap}");
        assert!((l200 - 1.157_773_883_697_7).abs() < (l100 - 1.157_773_883_697_7).abs());
    }

    #[test]
    fn separated_identical_wells_nearly_degenerate() {
        let eps = 0.05;
        let wells = IntervalUnion::new(vec![-0.5, 0.5], eps).unwrap();
        let op = assemble_on(&Domain::from(&wells), 400, 0.5).unwrap();
        let l = solve_lowest(&op, 2).unwrap();
        let rel = (l[1].value - l[0].value) / l[0].value;
        assert!(rel > 0.0 && rel < 10.0 * eps.powi(2), "{rel}");
    }

    #[test]
    fn restriction_is_principal_submatrix() {
        let wells = IntervalUnion::new(vec![-0.5, 0.0, 0.5], 0.05).unwrap();
        let full = assemble_on(&Domain::interval(-1.0, 1.0), 100, 0.5).unwrap();
        let mask = wells.region().mask(full.grid()).unwrap();
        let sub = full.principal_submatrix(&mask).unwrap();
        let direct = assemble_on(&Domain::from(&wells), 100, 0.5).unwrap();
        assert_eq!(sub.len(), direct.len());
        for (a, b) in sub.grid().nodes().iter().zip(direct.grid().nodes()) {
            assert!((a - b).abs() < 1e-14);
        }
        let scale = direct.matrix().amax();
        assert!((sub.matrix() - direct.matrix()).amax() <= 1e-12 * scale);
    }

    #[test]
    fn potentials() {
        let wells = IntervalUnion::new(vec![-0.5, 0.0, 0.5], 0.05).unwrap();
        let op = assemble_on(&Domain::interval(-1.0, 1.0), 100, 0.5).unwrap();
        let zero = PotentialSpec::new(wells.clone(), vec![0.0; 3], Barrier::Finite { delta: 1e-3 }).unwrap();
        let with = add_potential(&op, &zero).unwrap();
        let in_u = wells.region().mask(op.grid()).unwrap();
        for i in 0..op.len() {
            let diff = with.matrix()[(i, i)] - op.matrix()[(i, i)];
            let want = if in_u[i] { 0.0 } else { 1e3 };
            assert!((diff - want).abs() < 1e-9);
        }
        // Constant potential on the well grid shifts the spectrum.
        let u_op = assemble_on(&Domain::from(&wells), 100, 0.5).unwrap();
        let unchanged = add_potential(
            &u_op,
            &PotentialSpec::new(wells.clone(), vec![0.0; 3], Barrier::Infinite).unwrap(),
        )
        .unwrap();
        assert_eq!(unchanged.matrix(), u_op.matrix());
        let shifted = add_potential(
            &u_op,
            &PotentialSpec::new(wells.clone(), vec![2.5; 3], Barrier::Infinite).unwrap(),
        )
        .unwrap();
        let a = solve_lowest(&u_op, 3).unwrap();
        let b = solve_lowest(&shifted, 3).unwrap();
        for k in 0..3 {
            assert!((b[k].value - a[k].value - 2.5).abs() < 1e-9);
        }
        // Infinite barrier on a grid reaching outside U is a geometry mismatch.
        let inf = PotentialSpec::new(wells.clone(), vec![0.0; 3], Barrier::Infinite).unwrap();
        assert!(matches!(add_potential(&op, &inf), Err(Error::GeometryMismatch(_))));
        assert!(PotentialSpec::new(wells.clone(), vec![0.0; 2], Barrier::Infinite).is_err());
        assert!(PotentialSpec::new(wells, vec![0.0; 3], Barrier::Finite { delta: 1e-300 }).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn symmetric_and_row_sums_equal_kappa(s in 0.1..0.9f64, n in 10usize..40) {
                let op = assemble_on(&Domain::interval(-1.0, 1.0), n, s).unwrap();
                prop_assert!(op.symmetry_defect() <= 1e-12);
                let d = Domain::interval(-1.0, 1.0);
                for (i, &x) in op.grid().nodes().iter().enumerate() {
                    let row: f64 = op.matrix().row(i).sum();
                    let k = kappa(x, &d, s).unwrap();
                    prop_assert!(((row - k) / k).abs() < 1e-9);
                }
            }
        }
    }
}
