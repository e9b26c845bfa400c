//! Finite and infinite potential wells.
//!
//! Geometry: wells `U = ⋃ (x_i − ε, x_i + ε)` inside `I = (−1, 1)`, potential
//! `V_i` on well `i`, and either
//!
//! - an *infinite* barrier on `I ∖ U`: the eigenproblem lives on `U` with the
//!   zero exterior condition on `ℝ ∖ U` ([`solve_infinite_well`]), or
//! - a *finite* barrier `1/δ` on `I ∖ U` with the zero exterior condition on
//!   `ℝ ∖ I` ([`solve_finite_well`]).
//!
//! Both operators come from one grid on `I` whose cell boundaries include
//! every well endpoint; the infinite-well operator is the principal
//! submatrix of the finite-well operator on the well cells. Consequently the
//! variational ordering `λ_{i,δ} ≤ λ_i` holds exactly at the discrete level.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{
    add_diagonal, assemble_fractional, barrier_height, build_grid, fractional_constant, Barrier,
    DiscreteOperator, Domain, IntervalUnion, PotentialSpec, UniformGrid,
};
use crate::eigen::{grid_sign_changes, l2_inner, l2_norm, lp_norm, solve_lowest_with_norm, EigenPair};
use crate::error::{Error, Result};
use crate::fit::{geometric_sequence, is_geometric_decreasing, loglog_fit, SlopeFit};

/// Relative eigenvalue gap below which a reference level counts as
/// near-degenerate in convergence studies.
pub const NEAR_DEGENERATE_REL_GAP: f64 = 1e-6;

/// Exterior mass below which a record is treated as quadrature noise.
pub const MASS_NOISE_FLOOR: f64 = 1e-13;

/// Default δ sweep: `1e-1 … 1e-5`, two points per decade.
pub fn default_delta_list() -> Vec<f64> {
    geometric_sequence(1e-1, 1e-5, 2).expect("valid constants")
}

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

struct Prepared {
    full: DiscreteOperator,
    in_u: Vec<bool>,
    well_potential: Vec<f64>,
    infinite: DiscreteOperator,
}

/// Well geometry, well values, fractional order and grid resolution.
///
/// The operators are assembled lazily on first use and cached.
#[derive(Serialize, Deserialize)]
pub struct WellProblem {
    wells: IntervalUnion,
    values: Vec<f64>,
    s: f64,
    n_per_unit: usize,
    #[serde(skip)]
    cache: OnceLock<Arc<Prepared>>,
}

impl Clone for WellProblem {
    fn clone(&self) -> Self {
        WellProblem {
            wells: self.wells.clone(),
            values: self.values.clone(),
            s: self.s,
            n_per_unit: self.n_per_unit,
            cache: self.cache.clone(),
        }
    }
}

impl std::fmt::Debug for WellProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WellProblem")
            .field("wells", &self.wells)
            .field("values", &self.values)
            .field("s", &self.s)
            .field("n_per_unit", &self.n_per_unit)
            .finish()
    }
}

impl WellProblem {
    /// Validates the inputs and that the grid resolves every well endpoint.
    pub fn new(wells: IntervalUnion, values: Vec<f64>, s: f64, n_per_unit: usize) -> Result<Self> {
        PotentialSpec::new(wells.clone(), values.clone(), Barrier::Infinite)?;
        fractional_constant(s)?;
        let p = WellProblem {
            wells,
            values,
            s,
            n_per_unit,
            cache: OnceLock::new(),
        };
        let grid = p.full_grid_uncached()?;
        p.wells.region().mask(&grid)?;
        build_grid(&Domain::from(&p.wells), n_per_unit)?;
        Ok(p)
    }

    /// Same wells at another resolution.
    pub fn with_resolution(&self, n_per_unit: usize) -> Result<Self> {
        WellProblem::new(self.wells.clone(), self.values.clone(), self.s, n_per_unit)
    }

    /// Same geometry with other well values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        WellProblem::new(self.wells.clone(), values, self.s, self.n_per_unit)
    }

    /// Well geometry.
    pub fn wells(&self) -> &IntervalUnion {
        &self.wells
    }

    /// `V_i`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fractional order.
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Cells per unit length.
    pub fn n_per_unit(&self) -> usize {
        self.n_per_unit
    }

    /// Potential with the given barrier.
    pub fn potential(&self, barrier: Barrier) -> PotentialSpec {
        PotentialSpec {
            wells: self.wells.clone(),
            values: self.values.clone(),
            barrier,
            strength: 1.0,
        }
    }

    fn full_grid_uncached(&self) -> Result<UniformGrid> {
        build_grid(&Domain::interval(-1.0, 1.0), self.n_per_unit)
    }

    fn prepared(&self) -> Result<Arc<Prepared>> {
        if let Some(p) = self.cache.get() {
            return Ok(Arc::clone(p));
        }
        let grid = Arc::new(self.full_grid_uncached()?);
        let full = assemble_fractional(grid, self.s, fractional_constant(self.s)?)?;
        let in_u = self.wells.region().mask(full.grid())?;
        let restricted = full.principal_submatrix(&in_u)?;
        let infinite = add_diagonal(
            &restricted,
            &self.potential(Barrier::Infinite).values_on(restricted.grid())?,
        )?;
        let well_potential = full
            .grid()
            .nodes()
            .iter()
            .zip(&in_u)
            .map(|(&x, &inside)| {
                if inside {
                    self.values[self.wells.well_of(x).expect("masked node lies in a well")]
                } else {
                    0.0
                }
            })
            .collect();
        let prepared = Arc::new(Prepared {
            full,
            in_u,
            well_potential,
            infinite,
        });
        Ok(Arc::clone(self.cache.get_or_init(|| prepared)))
    }

    /// Grid on `I`.
    pub fn full_grid(&self) -> Result<Arc<UniformGrid>> {
        Ok(self.prepared()?.full.grid_arc())
    }

    /// Grid on `U` (restriction of the grid on `I`).
    pub fn well_grid(&self) -> Result<Arc<UniformGrid>> {
        Ok(self.prepared()?.infinite.grid_arc())
    }

    /// `(-Δ)^s_res` on `I` without potential.
    pub fn fractional_operator(&self) -> Result<DiscreteOperator> {
        Ok(self.prepared()?.full.clone())
    }

    /// Which nodes of the grid on `I` lie in `U`.
    pub fn well_mask(&self) -> Result<Vec<bool>> {
        Ok(self.prepared()?.in_u.clone())
    }

    /// Operator of the infinite well (on the `U` grid, potential included).
    pub fn infinite_operator(&self) -> Result<DiscreteOperator> {
        Ok(self.prepared()?.infinite.clone())
    }

    /// Operator of the finite well with barrier `1/δ` (on the `I` grid).
    pub fn finite_operator(&self, delta: f64) -> Result<DiscreteOperator> {
        let prep = self.prepared()?;
        let barrier = barrier_height(delta)?;
        let diag: Vec<f64> = prep
            .in_u
            .iter()
            .zip(&prep.well_potential)
            .map(|(&inside, &v)| if inside { v } else { barrier })
            .collect();
        add_diagonal(&prep.full, &diag)
    }

    /// Extends a function on the `U` grid by zero to the grid on `I`.
    pub fn extend_by_zero(&self, u_on_wells: &[f64]) -> Result<Vec<f64>> {
        let prep = self.prepared()?;
        let n_u = prep.infinite.len();
        if u_on_wells.len() != n_u {
            return Err(Error::invalid(format!(
                "function has {} samples, the well grid has {n_u}",
                u_on_wells.len()
            )));
        }
        let mut it = u_on_wells.iter();
        Ok(prep
            .in_u
            .iter()
            .map(|&inside| if inside { *it.next().expect("count checked") } else { 0.0 })
            .collect())
    }

    /// Restricts a function on the grid on `I` to the `U` grid.
    pub fn restrict_to_wells(&self, u_full: &[f64]) -> Result<Vec<f64>> {
        let prep = self.prepared()?;
        if u_full.len() != prep.in_u.len() {
            return Err(Error::invalid("function does not live on the grid of I"));
        }
        Ok(u_full
            .iter()
            .zip(&prep.in_u)
            .filter(|(_, &m)| m)
            .map(|(x, _)| *x)
            .collect())
    }

    fn as_full(&self, u: &[f64]) -> Result<Vec<f64>> {
        let prep = self.prepared()?;
        if u.len() == prep.in_u.len() {
            Ok(u.to_vec())
        } else {
            self.extend_by_zero(u)
        }
    }
}

/// Eigenpairs together with the grid they live on and the operator scale.
#[derive(Debug, Clone)]
pub struct WellSpectrum {
    /// Lowest pairs, ascending.
    pub pairs: Vec<EigenPair>,
    /// Grid of the eigenfunctions.
    pub grid: Arc<UniformGrid>,
    /// `‖A‖₂` of the solved operator.
    pub norm: f64,
}

/// Lowest `m` eigenpairs of the infinite well (grid on `U`).
pub fn solve_infinite_well(p: &WellProblem, m: usize) -> Result<WellSpectrum> {
    let op = p.infinite_operator()?;
    let spec = solve_lowest_with_norm(&op, m)?;
    Ok(WellSpectrum {
        pairs: spec.pairs,
        grid: op.grid_arc(),
        norm: spec.norm,
    })
}

/// Lowest `m` eigenpairs of the finite well with barrier `1/δ` (grid on `I`).
pub fn solve_finite_well(p: &WellProblem, delta: f64, m: usize) -> Result<WellSpectrum> {
    let op = p.finite_operator(delta)?;
    let spec = solve_lowest_with_norm(&op, m)?;
    Ok(WellSpectrum {
        pairs: spec.pairs,
        grid: op.grid_arc(),
        norm: spec.norm,
    })
}

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

/// `E[u] = ⟨u, (-Δ)^s_res u⟩ + Σ h V u²` for `u` on the grid of `U` or `I`
/// (functions on `U` are extended by zero).
pub fn energy(u: &[f64], p: &WellProblem) -> Result<f64> {
    let prep = p.prepared()?;
    let u = p.as_full(u)?;
    let h = prep.full.grid().h();
    let v = DVector::from_column_slice(&u);
    let au = prep.full.matrix() * &v;
    let form: f64 = h * v.dot(&au);
    let pot: f64 = h * u
        .iter()
        .zip(&prep.well_potential)
        .map(|(x, vv)| vv * x * x)
        .sum::<f64>();
    Ok(form + pot)
}

/// `E_δ[u] = E[u] + (1/δ) ‖u‖²_{L²(I∖U)}`.
pub fn energy_delta(u: &[f64], p: &WellProblem, delta: f64) -> Result<f64> {
    let barrier = barrier_height(delta)?;
    let full = p.as_full(u)?;
    let ext = exterior_norm(&full, p)?;
    Ok(energy(&full, p)? + barrier * ext * ext)
}

/// `‖u‖_{L²(I∖U)}` for `u` on the grid of `I`.
pub fn exterior_norm(u_full: &[f64], p: &WellProblem) -> Result<f64> {
    l2_norm(u_full, &*p.full_grid()?, Some(&p.wells().exterior_region()))
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One `(δ, i)` record of a δ sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Sweep parameter (δ).
    pub param: f64,
    /// Level (1-based).
    pub index: usize,
    /// Eigenvalue `λ_{i,δ}`.
    pub eigenvalue: f64,
    /// Measured quantity (exterior mass, L² distance, …).
    pub value: f64,
    /// Sign changes of the eigenfunction.
    pub changes: usize,
    /// Grid resolution (cells per unit length).
    pub grid_n: usize,
    /// Set when the record is excluded from fitting.
    pub flag: Option<String>,
}

/// Fitted log-log slope of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    /// Level (1-based).
    pub index: usize,
    /// Fit over the unflagged records.
    pub fit: SlopeFit,
}

/// Records of a parameter sweep plus per-level fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Name of the measured quantity.
    pub quantity: String,
    /// Parameter values, strictly decreasing.
    pub params: Vec<f64>,
    /// Records ordered by parameter, then level.
    pub records: Vec<SweepRecord>,
    /// Fits per level.
    pub fits: Vec<LevelFit>,
    /// Sweep-level flags (truncation, degeneracy, …).
    pub flags: Vec<String>,
}

impl SweepResult {
    /// Records of one level in parameter order.
    pub fn level(&self, index: usize) -> Vec<&SweepRecord> {
        self.records.iter().filter(|r| r.index == index).collect()
    }

    /// Fitted slope of one level.
    pub fn slope(&self, index: usize) -> Option<f64> {
        self.fits.iter().find(|f| f.index == index).map(|f| f.fit.slope)
    }
}

fn check_delta_list(deltas: &[f64]) -> Result<()> {
    if deltas.len() < 2 || !is_geometric_decreasing(deltas) {
        return Err(Error::invalid(
            "δ list must be geometric and strictly decreasing with at least two values",
        ));
    }
    deltas.iter().try_for_each(|&d| barrier_height(d).map(|_| ()))
}

fn fit_levels(records: &[SweepRecord], m: usize) -> Result<Vec<LevelFit>> {
    (1..=m)
        .map(|i| {
            let (x, y): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter(|r| r.index == i && r.flag.is_none())
                .map(|r| (r.param, r.value))
                .unzip();
            Ok(LevelFit {
                index: i,
                fit: loglog_fit(&x, &y)?,
            })
        })
        .collect()
}

/// Finite-well spectra for every δ, solved in parallel, in list order.
pub fn finite_well_sweep(p: &WellProblem, deltas: &[f64], m: usize) -> Result<Vec<WellSpectrum>> {
    check_delta_list(deltas)?;
    p.prepared()?;
    deltas.par_iter().map(|&d| solve_finite_well(p, d, m)).collect()
}

/// `‖u_{i,δ}‖_{L²(I∖U)}` over the sweep, with per-level slopes.
///
/// Once the mass of a level drops below [`MASS_NOISE_FLOOR`] the remaining
/// records of that level are flagged and left out of the fit.
pub fn exterior_mass_sweep(p: &WellProblem, deltas: &[f64], m: usize, tau_rel: f64) -> Result<SweepResult> {
    let spectra = finite_well_sweep(p, deltas, m)?;
    exterior_mass_from(p, deltas, &spectra, tau_rel)
}

/// [`exterior_mass_sweep`] on precomputed spectra.
pub fn exterior_mass_from(
    p: &WellProblem,
    deltas: &[f64],
    spectra: &[WellSpectrum],
    tau_rel: f64,
) -> Result<SweepResult> {
    let m = spectra.first().map_or(0, |s| s.pairs.len());
    let mut records = Vec::new();
    let mut flags = Vec::new();
    let mut floored = vec![false; m];
    for (&d, spec) in deltas.iter().zip(spectra) {
        for (i, pair) in spec.pairs.iter().enumerate() {
            let mass = exterior_norm(&pair.u, p)?;
            if mass < MASS_NOISE_FLOOR && !floored[i] {
                floored[i] = true;
                flags.push(format!("level {} reached the mass floor at δ = {d:e}; sweep truncated", i + 1));
            }
            records.push(SweepRecord {
                param: d,
                index: i + 1,
                eigenvalue: pair.value,
                value: mass,
                changes: grid_sign_changes(&pair.u, &spec.grid, tau_rel)?.changes(),
                grid_n: p.n_per_unit(),
                flag: floored[i].then(|| "below quadrature noise".to_string()),
            });
        }
    }
    Ok(SweepResult {
        quantity: "exterior_mass".into(),
        params: deltas.to_vec(),
        fits: fit_levels(&records, m)?,
        records,
        flags,
    })
}

/// `‖u_{i,δ} − u_i‖_{L²(U)}` over the sweep, with per-level slopes.
///
/// Signs are aligned by the inner product before differencing. For a
/// near-degenerate reference level the distance is the sine of the largest
/// principal angle between the two-dimensional spans instead, and a flag is
/// recorded.
pub fn convergence_study(p: &WellProblem, deltas: &[f64], m: usize, tau_rel: f64) -> Result<SweepResult> {
    let reference = solve_infinite_well(p, (m + 1).min(p.infinite_operator()?.len()))?;
    let spectra = finite_well_sweep(p, deltas, m)?;
    convergence_from(p, deltas, &reference, &spectra, m, tau_rel)
}

/// [`convergence_study`] on precomputed spectra (`reference` may hold more
/// than `m` levels; one extra level improves the degeneracy check).
pub fn convergence_from(
    p: &WellProblem,
    deltas: &[f64],
    reference: &WellSpectrum,
    spectra: &[WellSpectrum],
    m: usize,
    tau_rel: f64,
) -> Result<SweepResult> {
    let u_grid = &*reference.grid;
    let lam: Vec<f64> = reference.pairs.iter().map(|q| q.value).collect();
    let partner = |i: usize| -> Option<usize> {
        let close = |a: usize, b: usize| (lam[b] - lam[a]).abs() < NEAR_DEGENERATE_REL_GAP * lam[a].abs();
        if i + 1 < lam.len() && close(i, i + 1) {
            Some(i + 1)
        } else if i > 0 && close(i - 1, i) {
            Some(i - 1)
        } else {
            None
        }
    };
    let mut flags = Vec::new();
    for i in 0..m {
        if let Some(j) = partner(i) {
            flags.push(format!(
                "level {} is near-degenerate with level {}; principal-angle distance used",
                i + 1,
                j + 1
            ));
        }
    }
    let mut records = Vec::new();
    for (&d, spec) in deltas.iter().zip(spectra) {
        let restricted = spec
            .pairs
            .iter()
            .map(|q| p.restrict_to_wells(&q.u))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..m {
            let value = match partner(i) {
                Some(j) if j < restricted.len() => principal_angle_distance(
                    [&reference.pairs[i].u, &reference.pairs[j].u],
                    [&restricted[i], &restricted[j]],
                    u_grid,
                )?,
                _ => {
                    let ui = &reference.pairs[i].u;
                    let mut v = restricted[i].clone();
                    if l2_inner(&v, ui, u_grid)? < 0.0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    let diff: Vec<f64> = v.iter().zip(ui).map(|(a, b)| a - b).collect();
                    l2_norm(&diff, u_grid, None)?
                }
            };
            records.push(SweepRecord {
                param: d,
                index: i + 1,
                eigenvalue: spec.pairs[i].value,
                value,
                changes: grid_sign_changes(&spec.pairs[i].u, &spec.grid, tau_rel)?.changes(),
                grid_n: p.n_per_unit(),
                flag: None,
            });
        }
    }
    Ok(SweepResult {
        quantity: "l2_distance".into(),
        params: deltas.to_vec(),
        fits: fit_levels(&records, m)?,
        records,
        flags,
    })
}

/// Sine of the largest principal angle between `span(a)` and `span(b)` in
/// the grid L² inner product.
pub fn principal_angle_distance(a: [&Vec<f64>; 2], b: [&Vec<f64>; 2], grid: &UniformGrid) -> Result<f64> {
    let orthonormal = |v: [&Vec<f64>; 2]| -> Result<[Vec<f64>; 2]> {
        let n0 = l2_norm(v[0], grid, None)?;
        let e0: Vec<f64> = v[0].iter().map(|x| x / n0).collect();
        let c = l2_inner(v[1], &e0, grid)?;
        let r: Vec<f64> = v[1].iter().zip(&e0).map(|(x, e)| x - c * e).collect();
        let n1 = l2_norm(&r, grid, None)?;
        if n0 == 0.0 || n1 == 0.0 {
            return Err(Error::Degenerate("span is not two-dimensional".into()));
        }
        Ok([e0, r.iter().map(|x| x / n1).collect()])
    };
    let qa = orthonormal(a)?;
    let qb = orthonormal(b)?;
    // Components of span(b) orthogonal to span(a); the largest singular value
    // of that residual is the sine of the largest principal angle. Working
    // with the residual avoids the cancellation of sqrt(1 − cos²).
    let mut r = Vec::with_capacity(2);
    for q in &qb {
        let c0 = l2_inner(q, &qa[0], grid)?;
        let c1 = l2_inner(q, &qa[1], grid)?;
        r.push(
            q.iter()
                .zip(qa[0].iter().zip(&qa[1]))
                .map(|(x, (e0, e1))| x - c0 * e0 - c1 * e1)
                .collect::<Vec<f64>>(),
        );
    }
    let g00 = l2_inner(&r[0], &r[0], grid)?;
    let g01 = l2_inner(&r[0], &r[1], grid)?;
    let g11 = l2_inner(&r[1], &r[1], grid)?;
    let half_trace = 0.5 * (g00 + g11);
    let disc = (0.25 * (g00 - g11).powi(2) + g01 * g01).sqrt();
    Ok((half_trace + disc).max(0.0).sqrt().min(1.0))
}

// ---------------------------------------------------------------------------
// Exterior-harmonic split
// ---------------------------------------------------------------------------

/// `u = v + w` with `v` supported in `U` and `w` discretely `s`-harmonic in `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSplit {
    /// Component supported in `U` (grid on `I`).
    pub v: Vec<f64>,
    /// Exterior-harmonic component (grid on `I`), equal to `u` off `U`.
    pub w: Vec<f64>,
    /// `‖u − v − w‖_{L²(I)}`.
    pub defect: f64,
    /// `‖(A w)|_U‖₂` — residual of the discrete boundary-value problem.
    pub residual: f64,
    /// `max_i A_ii`, a lower bound for `‖A‖₂`, to scale the residual.
    pub operator_scale: f64,
    /// Fractional order of the operator.
    pub s: f64,
}

/// Splits a finite-well eigenfunction: `A_UU w_U = −A_{U,ext} u_ext`,
/// `w = u` off `U`, `v = u − w`.
pub fn dirichlet_split(u: &EigenPair, p: &WellProblem) -> Result<ProjectionSplit> {
    let prep = p.prepared()?;
    let a = prep.full.matrix();
    let n = a.nrows();
    if u.u.len() != n {
        return Err(Error::invalid("split needs an eigenfunction on the grid of I"));
    }
    let inside: Vec<usize> = (0..n).filter(|&i| prep.in_u[i]).collect();
    let outside: Vec<usize> = (0..n).filter(|&i| !prep.in_u[i]).collect();
    let a_uu = DMatrix::from_fn(inside.len(), inside.len(), |r, c| a[(inside[r], inside[c])]);
    let rhs = DVector::from_fn(inside.len(), |r, _| {
        -outside.iter().map(|&j| a[(inside[r], j)] * u.u[j]).sum::<f64>()
    });
    let chol = a_uu
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("A_UU in the exterior-harmonic split".into()))?;
    let w_u = chol.solve(&rhs);
    let mut w = u.u.clone();
    for (r, &i) in inside.iter().enumerate() {
        w[i] = w_u[r];
    }
    let v: Vec<f64> = u.u.iter().zip(&w).map(|(a, b)| a - b).collect();
    let h = prep.full.grid().h();
    let defect = (h * (0..n).map(|i| (u.u[i] - v[i] - w[i]).powi(2)).sum::<f64>()).sqrt();
    let residual = (&a_uu * &w_u - &rhs).norm();
    let operator_scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    Ok(ProjectionSplit {
        v,
        w,
        defect,
        residual,
        operator_scale,
        s: p.s(),
    })
}

/// One `‖w‖_{L²(U)} / ‖w‖_{L^p(I∖Ū)}` measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRatioRecord {
    /// Exponent `p`.
    pub p: f64,
    /// `‖w‖_{L²(U)}`.
    pub l2_inside: f64,
    /// `‖w‖_{L^p(I∖Ū)}`.
    pub lp_outside: f64,
    /// The ratio (0 when `w = 0`; `None` when skipped).
    pub ratio: Option<f64>,
    /// Reason for skipping, if any.
    pub flag: Option<String>,
}

/// Smallest admissible `L^p` exponent for order `s` (exclusive bound):
/// `2` for `s ≤ 1/2`, `1/(1 − s)` otherwise.
pub fn lp_exponent_bound(s: f64) -> f64 {
    if s <= 0.5 {
        2.0
    } else {
        1.0 / (1.0 - s)
    }
}

/// Evaluates the L²–L^p ratio of a split.
pub fn lp_bound_check(split: &ProjectionSplit, p: &WellProblem, exponent: f64) -> Result<LpRatioRecord> {
    let bound = lp_exponent_bound(split.s);
    if !(exponent > bound) {
        return Err(Error::invalid(format!(
            "exponent p = {exponent} must exceed {bound} for s = {}",
            split.s
        )));
    }
    let grid = p.full_grid()?;
    let l2_inside = l2_norm(&split.w, &grid, Some(&p.wells().region()))?;
    let lp_outside = lp_norm(&split.w, &grid, Some(&p.wells().exterior_region()), exponent)?;
    if split.w.iter().all(|x| *x == 0.0) {
        return Ok(LpRatioRecord {
            p: exponent,
            l2_inside,
            lp_outside,
            ratio: Some(0.0),
            flag: None,
        });
    }
    let scale = split.v.iter().chain(&split.w).fold(0.0_f64, |m, x| m.max(x.abs()));
    if lp_outside <= MASS_NOISE_FLOOR * scale.max(f64::MIN_POSITIVE) {
        return Ok(LpRatioRecord {
            p: exponent,
            l2_inside,
            lp_outside,
            ratio: None,
            flag: Some("denominator below quadrature noise".into()),
        });
    }
    Ok(LpRatioRecord {
        p: exponent,
        l2_inside,
        lp_outside,
        ratio: Some(l2_inside / lp_outside),
        flag: None,
    })
}

// ---------------------------------------------------------------------------
// Counterexample
// ---------------------------------------------------------------------------

/// Inputs of [`counterexample_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    /// Fractional order (must be 1/2).
    pub s: f64,
    /// Well centers.
    pub centers: Vec<f64>,
    /// Well half-width.
    pub eps: f64,
    /// Well values `V_i`.
    pub values: Vec<f64>,
    /// Barrier parameter.
    pub delta: f64,
    /// Cells per unit length of the coarse grid (the fine grid doubles it).
    pub grid_n: usize,
    /// Required factor in `V₂ ≥ factor · max(V₁, V₃, gap scale)`.
    pub v2_factor: f64,
    /// Relative zero threshold for sign counting.
    pub tau_rel: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            s: 0.5,
            centers: vec![-0.5, 0.0, 0.5],
            eps: 0.05,
            values: vec![0.0, 50.0, 0.0],
            delta: 1e-4,
            grid_n: 400,
            v2_factor: 50.0,
            tau_rel: crate::matmodel::DEFAULT_TAU_REL,
        }
    }
}

/// Sign counts of the first three eigenfunctions at two resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    /// Well values used.
    pub values: Vec<f64>,
    /// Sign changes on the coarse grid.
    pub changes: Vec<usize>,
    /// Sign changes on the refined grid.
    pub changes_refined: Vec<usize>,
    /// Counts agree across the two grids.
    pub refinement_stable: bool,
    /// Eigenvalues on the coarse grid.
    pub eigenvalues: Vec<f64>,
    /// `λ_{i+1} − λ_i` on the coarse grid.
    pub gaps: Vec<f64>,
    /// Grid nodes of the coarse grid.
    #[serde(skip)]
    pub nodes: Vec<f64>,
    /// Eigenfunctions on the coarse grid.
    #[serde(skip)]
    pub eigenfunctions: Vec<Vec<f64>>,
}

/// Outcome of the counterexample experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    /// Every predicate holds.
    Pass,
    /// Counts are refinement-stable but a predicate fails.
    Refuted,
    /// Some count changed under refinement.
    Inconclusive,
}

/// Verdict of [`counterexample_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Overall status.
    pub status: VerdictStatus,
    /// Sign changes of the second perturbed eigenfunction.
    pub second_changes: usize,
    /// Expected perturbed counts.
    pub expected_perturbed: Vec<usize>,
    /// Perturbed run.
    pub perturbed: RunCounts,
    /// Convex control run (all `V_i = 0`).
    pub control: RunCounts,
    /// Spectral gap scale used in the `V₂` precondition.
    pub gap_scale: f64,
    /// Inputs.
    pub config: CounterexampleConfig,
}

fn validate_counterexample(config: &CounterexampleConfig) -> Result<WellProblem> {
    if config.s != 0.5 {
        return Err(Error::invalid(format!("the counterexample is stated for s = 1/2, got {}", config.s)));
    }
    if config.centers.len() != 3 || config.values.len() != 3 {
        return Err(Error::invalid("the counterexample needs exactly three wells"));
    }
    if !(config.tau_rel >= 0.0 && config.tau_rel < 1.0) {
        return Err(Error::invalid("tau_rel must lie in [0, 1)"));
    }
    if !(config.v2_factor >= 0.0 && config.v2_factor.is_finite()) {
        return Err(Error::invalid("v2_factor must be non-negative"));
    }
    barrier_height(config.delta)?;
    let wells = IntervalUnion::new(config.centers.clone(), config.eps)?;
    WellProblem::new(wells, config.values.clone(), config.s, config.grid_n)?.with_resolution(2 * config.grid_n)?;
    WellProblem::new(IntervalUnion::new(config.centers.clone(), config.eps)?, config.values.clone(), config.s, config.grid_n)
}

fn run_counts(p: &WellProblem, delta: f64, tau: f64) -> Result<RunCounts> {
    let coarse = solve_finite_well(p, delta, 3)?;
    let fine_p = p.with_resolution(2 * p.n_per_unit())?;
    let fine = solve_finite_well(&fine_p, delta, 3)?;
    let count = |s: &WellSpectrum| -> Result<Vec<usize>> {
        s.pairs
            .iter()
            .map(|q| Ok(grid_sign_changes(&q.u, &s.grid, tau)?.changes()))
            .collect()
    };
    let changes = count(&coarse)?;
    let changes_refined = count(&fine)?;
    let eigenvalues: Vec<f64> = coarse.pairs.iter().map(|q| q.value).collect();
    Ok(RunCounts {
        values: p.values().to_vec(),
        refinement_stable: changes == changes_refined,
        changes,
        changes_refined,
        gaps: eigenvalues.windows(2).map(|w| w[1] - w[0]).collect(),
        eigenvalues,
        nodes: coarse.grid.nodes().to_vec(),
        eigenfunctions: coarse.pairs.into_iter().map(|q| q.u).collect(),
    })
}

/// End-to-end counterexample: sign counts of the first three finite-well
/// eigenfunctions for the configured potential and for the all-zero control,
/// each checked for stability under one grid refinement.
///
/// Predicates: perturbed counts `(0, 2, 1)`; control first count `0`,
/// second count `1`, third count `1` or `2`.
pub fn counterexample_run(config: &CounterexampleConfig) -> Result<Verdict> {
    let p = validate_counterexample(config)?;
    let control_p = p.with_values(vec![0.0; 3])?;
    let unperturbed = solve_infinite_well(&control_p, 3)?;
    let gap_scale = unperturbed.pairs[2].value - unperturbed.pairs[0].value;
    let v = &config.values;
    let required = config.v2_factor * v[0].max(v[2]).max(gap_scale);
    if v[1] < required {
        return Err(Error::invalid(format!(
            "non-convexity precondition violated: V₂ = {} < {} · max(V₁, V₃, gap scale {gap_scale:.4}) = {required:.4}",
            v[1], config.v2_factor
        )));
    }
    let perturbed = run_counts(&p, config.delta, config.tau_rel)?;
    let control = run_counts(&control_p, config.delta, config.tau_rel)?;
    let expected_perturbed = vec![0, 2, 1];
    let stable = perturbed.refinement_stable && control.refinement_stable;
    let holds = perturbed.changes == expected_perturbed
        && control.changes[0] == 0
        && control.changes[1] == 1
        && (control.changes[2] == 1 || control.changes[2] == 2);
    let status = match (stable, holds) {
        (false, _) => VerdictStatus::Inconclusive,
        (true, true) => VerdictStatus::Pass,
        (true, false) => VerdictStatus::Refuted,
    };
    Ok(Verdict {
        status,
        second_changes: perturbed.changes[1],
        expected_perturbed,
        perturbed,
        control,
        gap_scale,
        config: config.clone(),
    })
}
