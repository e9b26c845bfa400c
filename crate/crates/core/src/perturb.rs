//! Rescaled product-space operator and the splitting of the degenerate
//! ground state.
//!
//! Mapping well `i` onto the reference interval `I = (−1, 1)` through
//! `x = εz + x_i` turns the well problem into a `k`-block operator on
//! `L²(I)^k`:
//!
//! ```text
//! [T̄(ε)u]_i(z) = (-Δ)^s_res u_i(z)
//!     + ε^{1+2s} ( V_i u_i(z) + c_s Σ_{j≠i} ∫_I (u_i(z) − u_j(w)) / |ε(z−w) + x_i − x_j|^{1+2s} dw ).
//! ```
//!
//! Eigenvalues of `T̄(ε)` live in the *rescaled frame*; the original-frame
//! value is `λ_rescaled / ε^{2s}` (see [`to_original_frame`]).
//!
//! At `ε = 0` the ground level `λ⁰` of the reference operator is `k`-fold
//! degenerate. The splitting is of order `ε^{1+2s}` (orders `β¹, β², β³` with
//! `β = ε^{1/q}` vanish for `s = 1/2`), with limits
//! `(λ_j(ε) − λ⁰)/ε^{1+2s} → λ⁴_j`, the eigenvalues of the correction
//! matrix `M̂` (see [`assemble_mhat`]).

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{
    assemble_fractional, build_grid, fractional_constant, power_integral, DiscreteOperator, Domain,
    UniformGrid,
};
use crate::eigen::{dense_symmetric_eigen, solve_lowest};
use crate::error::{Error, Result};
use crate::fit::{common_slope_fit, is_geometric_decreasing, loglog_fit, SlopeFit};
use crate::matmodel::{assemble_reduced, count_sign_changes, ReducedMatrix, SignChangeReport};

/// Default cells per unit length of the reference grid (400 cells on `I`).
pub const DEFAULT_REFERENCE_N: usize = 200;

// ---------------------------------------------------------------------------
// System description
// ---------------------------------------------------------------------------

/// Rational fractional order `s = p/q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalOrder {
    /// Numerator.
    pub p: u32,
    /// Denominator.
    pub q: u32,
}

impl RationalOrder {
    /// `p/q` with `0 < p < q`.
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if !(p > 0 && p < q) {
            return Err(Error::invalid(format!("s = {p}/{q} must lie in (0, 1)")));
        }
        Ok(RationalOrder { p, q })
    }

    /// Closest fraction with denominator ≤ 64 to a float order, rejecting
    /// orders that are not (numerically) rational of that size.
    pub fn from_f64(s: f64) -> Result<Self> {
        for q in 2..=64u32 {
            let p = (s * q as f64).round();
            if p > 0.0 && p < q as f64 && (p / q as f64 - s).abs() < 1e-12 {
                return RationalOrder::new(p as u32, q);
            }
        }
        Err(Error::invalid(format!("s = {s} is not a rational p/q with q ≤ 64")))
    }

    /// `s` as a float.
    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

/// The `k`-well system in the rescaled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledSystem {
    centers: Vec<f64>,
    eps: f64,
    order: RationalOrder,
    potentials: Vec<f64>,
    reference_n: usize,
}

impl RescaledSystem {
    /// Validates ordering and admissibility `2ε / min|x_i − x_j| < 1`.
    pub fn new(
        centers: Vec<f64>,
        eps: f64,
        order: RationalOrder,
        potentials: Vec<f64>,
        reference_n: usize,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("at least one center is required"));
        }
        if centers.iter().any(|x| !(x.is_finite() && x.abs() < 1.0)) {
            return Err(Error::invalid("centers must lie in (−1, 1)"));
        }
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("centers must be strictly increasing"));
        }
        if potentials.len() != centers.len() || potentials.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("need one finite potential value per center"));
        }
        let sys = RescaledSystem {
            centers,
            eps: 0.0,
            order,
            potentials,
            reference_n,
        };
        sys.with_eps(eps)
    }

    /// Same system at another `ε`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("ε must be non-negative, got {eps}")));
        }
        let min_sep = self
            .centers
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let value = 2.0 * eps / min_sep;
        if value >= 1.0 {
            return Err(Error::EpsilonTooLarge { eps, value });
        }
        Ok(RescaledSystem {
            eps,
            ..self.clone()
        })
    }

    /// Number of wells.
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Centers `x_i`.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// `ε`.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `β = ε^{1/q}`.
    pub fn beta(&self) -> f64 {
        self.eps.powf(1.0 / self.order.q as f64)
    }

    /// `s = p/q`.
    pub fn order(&self) -> RationalOrder {
        self.order
    }

    /// `s` as a float.
    pub fn s(&self) -> f64 {
        self.order.value()
    }

    /// `V_i`.
    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    /// Cells per unit length of the reference grid.
    pub fn reference_n(&self) -> usize {
        self.reference_n
    }

    /// Splitting exponent `1 + 2s`.
    pub fn splitting_exponent(&self) -> f64 {
        1.0 + 2.0 * self.s()
    }
}

/// Converts a rescaled-frame eigenvalue to the original frame: `λ / ε^{2s}`.
pub fn to_original_frame(lambda_rescaled: f64, eps: f64, s: f64) -> f64 {
    lambda_rescaled / eps.powf(2.0 * s)
}

// ---------------------------------------------------------------------------
// Reference problem
// ---------------------------------------------------------------------------

/// Ground state of `(-Δ)^s_res` on `I`, computed once per grid.
#[derive(Debug, Clone)]
pub struct ReferenceState {
    /// Operator on the reference grid.
    pub op: DiscreteOperator,
    /// Ground eigenvalue `λ⁰`.
    pub lambda0: f64,
    /// Positive ground eigenfunction, unit L² norm.
    pub ground: Vec<f64>,
    /// Mean `ū = (1/|I|) ∫_I u⁰`.
    pub mean: f64,
}

/// Computes `λ⁰`, `u⁰` and `ū` on the reference grid of `sys`.
pub fn reference_state(sys: &RescaledSystem) -> Result<ReferenceState> {
    let grid = build_grid(&Domain::interval(-1.0, 1.0), sys.reference_n())?;
    let op = assemble_fractional(Arc::new(grid), sys.s(), fractional_constant(sys.s())?)?;
    let pair = solve_lowest(&op, 1)?.remove(0);
    if pair.u.iter().any(|&x| x <= 0.0) {
        return Err(Error::NotOneSigned(
            "reference ground state changes sign: discretization failure".into(),
        ));
    }
    let h = op.grid().h();
    let mean = h * pair.u.iter().sum::<f64>() / 2.0;
    Ok(ReferenceState {
        lambda0: pair.value,
        ground: pair.u,
        mean,
        op,
    })
}

// ---------------------------------------------------------------------------
// Rescaled operator
// ---------------------------------------------------------------------------

/// Assembles `T̄(ε)` on `k` copies of the reference grid.
///
/// The coupling kernel is used exactly (no Taylor expansion). The diagonal
/// coupling integral over `I` is evaluated in closed form; off-diagonal
/// blocks use the midpoint rule of the reference grid.
pub fn assemble_rescaled(sys: &RescaledSystem, reference: &ReferenceState) -> Result<DiscreteOperator> {
    let grid: &UniformGrid = reference.op.grid();
    if grid.len() * sys.k() == 0 || (grid.h() - 1.0 / sys.reference_n() as f64).abs() > 1e-15 {
        return Err(Error::GeometryMismatch(
            "reference state was computed on a different grid".into(),
        ));
    }
    let n = grid.len();
    let k = sys.k();
    let s = sys.s();
    let c_s = reference.op.c_s();
    let eps = sys.eps();
    let h = grid.h();
    let z = grid.nodes();
    let scale = eps.powf(1.0 + 2.0 * s);
    let expo = 1.0 + 2.0 * s;
    let a_ref = reference.op.matrix();
    let x = sys.centers();

    let size = n * k;
    let mut m = DMatrix::<f64>::zeros(size, size);
    // Column-major: column (j, q) holds the couplings of node q of block j.
    m.as_mut_slice()
        .par_chunks_mut(size)
        .enumerate()
        .for_each(|(col, column)| {
            let (bj, q) = (col / n, col % n);
            for bi in 0..k {
                let rows = &mut column[bi * n..(bi + 1) * n];
                if bi == bj {
                    for (p, r) in rows.iter_mut().enumerate() {
                        *r = a_ref[(p, q)];
                    }
                    if eps > 0.0 {
                        let zq = z[q];
                        let mut coupling = 0.0;
                        for (l, &xl) in x.iter().enumerate() {
                            if l == bi {
                                continue;
                            }
                            let d = (x[bi] - xl).abs();
                            // |ε(z − w) + x_i − x_l| sweeps [d − ε(1 ± z)] as w ranges over I.
                            let sgn = if x[bi] > xl { 1.0 } else { -1.0 };
                            let lo = d + sgn * eps * (zq - 1.0);
                            let hi = d + sgn * eps * (zq + 1.0);
                            let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
                            coupling += power_integral(lo, hi, s) / eps;
                        }
                        rows[q] += scale * (sys.potentials()[bi] + c_s * coupling);
                    }
                } else if eps > 0.0 {
                    let d = x[bi] - x[bj];
                    for (p, r) in rows.iter_mut().enumerate() {
                        let t = (eps * (z[p] - z[q]) + d).abs();
                        *r = -scale * c_s * h / t.powf(expo);
                    }
                }
            }
        });
    DiscreteOperator::from_parts(m, reference.op.grid_arc(), s, c_s, k)
}

/// `max_i` relative L² distance of block `i` of `v` from the line spanned by
/// the reference ground state, normalized by `‖v‖`.
pub fn block_structure_defect(v: &[f64], reference: &ReferenceState) -> f64 {
    let n = reference.ground.len();
    let h = reference.op.grid().h();
    let total: f64 = (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    v.chunks(n)
        .map(|block| {
            let alpha: f64 = h * block.iter().zip(&reference.ground).map(|(a, b)| a * b).sum::<f64>();
            let rest: f64 = h * block
                .iter()
                .zip(&reference.ground)
                .map(|(a, b)| (a - alpha * b).powi(2))
                .sum::<f64>();
            rest.sqrt() / total
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Correction matrix
// ---------------------------------------------------------------------------

/// The `k × k` matrix `M̂` whose eigenvalues are the limits `λ⁴_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionMatrix {
    /// Row-major entries.
    pub entries: Vec<Vec<f64>>,
    /// Ground-state means `ū_j` (equal by construction: one reference problem).
    pub means: Vec<f64>,
}

/// Eigen-decomposition of `M̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSpectrum {
    /// `λ⁴_j` ascending.
    pub values: Vec<f64>,
    /// Unit eigenvectors (coefficients over wells), one per value.
    pub vectors: Vec<Vec<f64>>,
}

impl CorrectionMatrix {
    /// Size `k`.
    pub fn k(&self) -> usize {
        self.entries.len()
    }

    /// As a dense matrix.
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |i, j| self.entries[i][j])
    }

    /// Ascending eigenvalues and eigenvectors (first nonzero entry positive).
    pub fn spectrum(&self) -> CorrectionSpectrum {
        let (values, vecs) = dense_symmetric_eigen(&self.to_dmatrix());
        let vectors = (0..self.k())
            .map(|c| {
                let mut v: Vec<f64> = vecs.column(c).iter().copied().collect();
                let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                if v.iter().find(|x| x.abs() > 1e-8 * max).is_some_and(|x| *x < 0.0) {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect();
        CorrectionSpectrum { values, vectors }
    }

    /// Sign pattern of eigenvector `j` (zero-based).
    pub fn eigenvector_signs(&self, j: usize, tau_rel: f64) -> Result<SignChangeReport> {
        let spec = self.spectrum();
        let v = spec
            .vectors
            .get(j)
            .ok_or_else(|| Error::invalid(format!("no eigenvector {j} of a {}×{} matrix", self.k(), self.k())))?;
        count_sign_changes(v, tau_rel)
    }

    /// For `k = 3`: the same matrix as a reduced model
    /// `[[U,c,b],[c,V,a],[b,a,W]]`, validating the coupling conditions.
    pub fn as_reduced(&self) -> Result<ReducedMatrix> {
        if self.k() != 3 {
            return Err(Error::invalid("only a 3×3 correction matrix maps to the reduced model"));
        }
        let e = &self.entries;
        assemble_reduced(e[0][0], e[1][1], e[2][2], e[1][2], e[0][2], e[0][1])
    }
}

/// Builds `M̂`:
/// diagonal `V_j + 2c_s Σ_{l≠j} |x_j − x_l|^{−(1+2s)}`,
/// off-diagonal `−4c_s ū_j ū_l |x_j − x_l|^{−(1+2s)}`.
pub fn assemble_mhat(sys: &RescaledSystem, reference: &ReferenceState) -> Result<CorrectionMatrix> {
    if reference.ground.iter().any(|&x| x <= 0.0) {
        return Err(Error::NotOneSigned("reference ground state is not one-signed".into()));
    }
    let h = reference.op.grid().h();
    let norm2: f64 = h * reference.ground.iter().map(|x| x * x).sum::<f64>();
    if (norm2 - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("reference ground state is not L²-normalized"));
    }
    let k = sys.k();
    let c_s = reference.op.c_s();
    let expo = sys.splitting_exponent();
    let x = sys.centers();
    let means = vec![reference.mean; k];
    let entries = (0..k)
        .map(|j| {
            (0..k)
                .map(|l| {
                    if j == l {
                        sys.potentials()[j]
                            + 2.0 * c_s * (0..k)
                                .filter(|&m| m != j)
                                .map(|m| (x[j] - x[m]).abs().powf(-expo))
                                .sum::<f64>()
                    } else {
                        -4.0 * c_s * means[j] * means[l] * (x[j] - x[l]).abs().powf(-expo)
                    }
                })
                .collect()
        })
        .collect();
    Ok(CorrectionMatrix { entries, means })
}

// ---------------------------------------------------------------------------
// Splitting sweep
// ---------------------------------------------------------------------------

/// One `(ε, j)` record of a splitting sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingRecord {
    /// `ε`.
    pub eps: f64,
    /// Level index (1-based).
    pub j: usize,
    /// Rescaled-frame eigenvalue `λ_j(ε)`.
    pub lambda_rescaled: f64,
    /// `λ_j(ε) − λ⁰`.
    pub lambda_minus_lambda0: f64,
    /// `(λ_j(ε) − λ⁰) / (ε^{1+2s} λ⁴_j)`.
    pub ratio_to_mhat: f64,
    /// Reference cells per unit length.
    pub grid_n: usize,
}

/// Result of [`splitting_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingSweep {
    /// Per-`(ε, j)` records, ε decreasing.
    pub records: Vec<SplittingRecord>,
    /// `λ⁰` of the reference grid.
    pub lambda0: f64,
    /// Relative spread of the lowest `k` eigenvalues at `ε = 0`.
    pub degeneracy_spread: f64,
    /// Fitted exponent per level.
    pub level_fits: Vec<SlopeFit>,
    /// Common exponent over all levels.
    pub slope: SlopeFit,
    /// Target exponent `1 + 2s`.
    pub expected_slope: f64,
    /// Exponent in `β = ε^{1/q}`: `q · slope`.
    pub beta_slope: f64,
    /// `λ⁴_j` ascending.
    pub mhat_eigenvalues: Vec<f64>,
    /// `(λ_j(ε_min) − λ⁰)/ε_min^{1+2s}` per level.
    pub limit_ratios: Vec<f64>,
    /// `|limit_ratio_j / λ⁴_j − 1|` per level.
    pub ratio_errors: Vec<f64>,
    /// Levels (1-based) whose `|λ_j − λ⁰|` is not monotone in `ε`.
    pub non_monotone: Vec<usize>,
}

/// Sweeps `ε` over `eps_list` (strictly decreasing, geometric), fitting the
/// splitting exponent and comparing the limits with `M̂`.
pub fn splitting_fit(
    sys: &RescaledSystem,
    eps_list: &[f64],
    reference: &ReferenceState,
) -> Result<SplittingSweep> {
    let k = sys.k();
    if k < 2 {
        return Err(Error::invalid("splitting needs at least two wells"));
    }
    if eps_list.len() < 2 || !is_geometric_decreasing(eps_list) {
        return Err(Error::invalid("ε list must be geometric, strictly decreasing, ≥ 2 values"));
    }
    let systems = eps_list
        .iter()
        .map(|&e| sys.with_eps(e))
        .collect::<Result<Vec<_>>>()?;
    let lowest = |s: &RescaledSystem| -> Result<Vec<f64>> {
        let op = assemble_rescaled(s, reference)?;
        let mut values: Vec<f64> = op.matrix().clone().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values.truncate(k);
        Ok(values)
    };
    let at_zero = lowest(&sys.with_eps(0.0)?)?;
    let degeneracy_spread = (at_zero[k - 1] - at_zero[0]) / reference.lambda0.abs();
    let levels = systems
        .par_iter()
        .map(lowest)
        .collect::<Result<Vec<_>>>()?;

    let mhat = assemble_mhat(sys, reference)?.spectrum().values;
    let expo = sys.splitting_exponent();
    let mut records = Vec::new();
    for (e, vals) in eps_list.iter().zip(&levels) {
        for (j, &l) in vals.iter().enumerate() {
            let diff = l - reference.lambda0;
            records.push(SplittingRecord {
                eps: *e,
                j: j + 1,
                lambda_rescaled: l,
                lambda_minus_lambda0: diff,
                ratio_to_mhat: diff / e.powf(expo) / mhat[j],
                grid_n: sys.reference_n(),
            });
        }
    }
    let series = |j: usize| -> Vec<f64> { levels.iter().map(|v| (v[j] - reference.lambda0).abs()).collect() };
    let non_monotone: Vec<usize> = (0..k)
        .filter(|&j| series(j).windows(2).any(|w| !(w[1] < w[0])))
        .map(|j| j + 1)
        .collect();
    let level_fits = (0..k)
        .map(|j| loglog_fit(eps_list, &series(j)))
        .collect::<Result<Vec<_>>>()?;
    let groups: Vec<(Vec<f64>, Vec<f64>)> = (0..k).map(|j| (eps_list.to_vec(), series(j))).collect();
    let slope = common_slope_fit(&groups)?;
    let e_min = *eps_list.last().expect("non-empty");
    let limit_ratios: Vec<f64> = levels
        .last()
        .expect("non-empty")
        .iter()
        .map(|l| (l - reference.lambda0) / e_min.powf(expo))
        .collect();
    let ratio_errors = limit_ratios
        .iter()
        .zip(&mhat)
        .map(|(r, m)| (r / m - 1.0).abs())
        .collect();
    Ok(SplittingSweep {
        records,
        lambda0: reference.lambda0,
        degeneracy_spread,
        beta_slope: slope.slope * sys.order().q as f64,
        level_fits,
        slope,
        expected_slope: expo,
        mhat_eigenvalues: mhat,
        limit_ratios,
        ratio_errors,
        non_monotone,
    })
}

/// `2^{−4}, …, 2^{−9}`.
pub fn default_eps_list() -> Vec<f64> {
    (4..=9).map(|k| 2f64.powi(-k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::solve_lowest_with_norm;

    fn system(v: Vec<f64>, eps: f64, n: usize) -> RescaledSystem {
        RescaledSystem::new(vec![-0.5, 0.0, 0.5], eps, RationalOrder::new(1, 2).unwrap(), v, n).unwrap()
    }

    #[test]
    fn rational_order() {
        assert_eq!(RationalOrder::from_f64(0.5).unwrap(), RationalOrder { p: 1, q: 2 });
        assert_eq!(RationalOrder::from_f64(0.75).unwrap(), RationalOrder { p: 3, q: 4 });
        assert!(RationalOrder::from_f64(std::f64::consts::FRAC_1_PI).is_err());
        assert!(RationalOrder::new(2, 2).is_err());
    }

    #[test]
    fn admissibility() {
        let s = system(vec![0.0; 3], 0.1, 20);
        assert!(matches!(s.with_eps(0.25), Err(Error::EpsilonTooLarge { .. })));
        assert!(s.with_eps(0.2).is_ok());
    }

    #[test]
    fn eps_zero_is_block_diagonal_and_degenerate() {
        let sys = system(vec![0.0, 50.0, 0.0], 0.0, 20);
        let r = reference_state(&sys).unwrap();
        let op = assemble_rescaled(&sys, &r).unwrap();
        let n = r.ground.len();
        for i in 0..n {
            for j in n..3 * n {
                assert_eq!(op.matrix()[(i, j)], 0.0);
            }
        }
        let l = solve_lowest(&op, 3).unwrap();
        for p in &l {
            assert!(((p.value - r.lambda0) / r.lambda0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_well_is_shifted_reference() {
        let sys = RescaledSystem::new(vec![0.0], 0.1, RationalOrder::new(1, 2).unwrap(), vec![3.0], 20).unwrap();
        let r = reference_state(&sys).unwrap();
        let op = assemble_rescaled(&sys, &r).unwrap();
        let l = solve_lowest(&op, 1).unwrap()[0].value;
        assert!((l - r.lambda0 - 0.1f64.powi(2) * 3.0).abs() < 1e-12);
    }

    #[test]
    fn rescaled_operator_symmetric() {
        let sys = system(vec![0.0, 50.0, 0.0], 1e-2, 50);
        let r = reference_state(&sys).unwrap();
        let op = assemble_rescaled(&sys, &r).unwrap();
        assert!(op.symmetry_defect() <= 1e-12);
        let spec = solve_lowest_with_norm(&op, 3).unwrap();
        for p in &spec.pairs {
            assert!(p.residual < 1e-9 * spec.norm);
        }
    }

    #[test]
    fn mhat_symmetry_and_sign_structure() {
        let sys = system(vec![1.0, 1.0, 1.0], 0.01, 50);
        let r = reference_state(&sys).unwrap();
        let m = assemble_mhat(&sys, &r).unwrap();
        let e = &m.entries;
        assert!((e[0][0] - e[2][2]).abs() < 1e-14);
        assert!((e[0][1] - e[1][2]).abs() < 1e-14);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(e[i][j], e[j][i]);
                if i != j {
                    assert!(e[i][j] < 0.0);
                }
            }
        }
        assert!(e[0][2].abs() < e[0][1].abs());
        assert!(m.as_reduced().is_ok());
    }

    #[test]
    fn mhat_eigenvalues_match_characteristic_polynomial() {
        let sys = system(vec![0.0, 50.0, 0.0], 0.01, 50);
        let r = reference_state(&sys).unwrap();
        let m = assemble_mhat(&sys, &r).unwrap();
        let e = &m.entries;
        let det = |l: f64| {
            let b = |i: usize, j: usize| e[i][j] - if i == j { l } else { 0.0 };
            b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
                - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
                + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0))
        };
        for lam in m.spectrum().values {
            // Bisection bracket around the solver's root must contain a sign change.
            let d = 1e-9 * (1.0 + lam.abs());
            assert!(det(lam - d) * det(lam + d) <= 0.0, "λ⁴ = {lam}");
        }
    }

    #[test]
    fn mhat_second_eigenvector_patterns() {
        let tau = 1e-8;
        // Deep middle well: (+, −, +), two changes.
        let sys = system(vec![30.0, 0.0, 30.0], 0.01, 50);
        let r = reference_state(&sys).unwrap();
        let m = assemble_mhat(&sys, &r).unwrap();
        assert_eq!(m.eigenvector_signs(1, tau).unwrap().changes, 2);
        // High middle well: the second level is the antisymmetric outer mode.
        let sys = system(vec![0.0, 50.0, 0.0], 0.01, 50);
        let m = assemble_mhat(&sys, &r).unwrap();
        let spec = m.spectrum();
        assert!(spec.values.windows(2).all(|w| w[0] < w[1]));
        let signs = m.eigenvector_signs(1, tau).unwrap();
        assert_eq!(signs.changes, 1);
        assert_eq!(signs.pattern_string(), "+0-");
    }

    #[test]
    fn splitting_converges_to_mhat_on_coarse_grid() {
        let sys = system(vec![0.0, 50.0, 0.0], 0.0625, 25);
        let r = reference_state(&sys).unwrap();
        let sweep = splitting_fit(&sys, &[2f64.powi(-4), 2f64.powi(-5), 2f64.powi(-6), 2f64.powi(-7)], &r).unwrap();
        assert!(sweep.degeneracy_spread < 1e-10);
        assert!(sweep.non_monotone.is_empty());
        assert!((sweep.slope.slope - 2.0).abs() < 0.1, "{:?}", sweep.slope);
        assert!(sweep.ratio_errors.iter().all(|e| *e < 0.05), "{:?}", sweep.ratio_errors);
        assert_eq!(sweep.records.len(), 12);
    }

    #[test]
    fn eigenvectors_are_blockwise_ground_states() {
        let sys = system(vec![0.0, 50.0, 0.0], 2f64.powi(-6), 25);
        let r = reference_state(&sys).unwrap();
        let op = assemble_rescaled(&sys, &r).unwrap();
        let bound = 10.0 * sys.eps().powf(sys.splitting_exponent());
        for p in solve_lowest(&op, 3).unwrap() {
            let d = block_structure_defect(&p.u, &r);
            assert!(d <= bound, "{d} > {bound}");
        }
    }

    #[test]
    fn frame_conversion() {
        assert!((to_original_frame(2.0, 0.25, 0.5) - 8.0).abs() < 1e-15);
        assert!((to_original_frame(1.0, 0.25, 0.75) - 8.0).abs() < 1e-14);
    }
}
