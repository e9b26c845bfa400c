//! Dense symmetric eigensolves and grid-function calculus.
//!
//! The solver is nalgebra's symmetric QR iteration (Householder
//! tridiagonalization + implicit shifted QR), which computes the full
//! spectrum; at the grid sizes used here (≤ ~2500 nodes) this is both simple
//! and reproducible.
//!
//! Grid functions are plain `&[f64]` node samples. Norms and inner products
//! use composite midpoint quadrature, `Σ h·u·v` over the selected cells.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::discretize::{DiscreteOperator, Region, UniformGrid};
use crate::error::{Error, Result};
use crate::matmodel::{count_sign_changes, SignChangeReport};

// ---------------------------------------------------------------------------
// Dense solver
// ---------------------------------------------------------------------------

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. Only the lower triangle is read.
pub fn dense_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    assert!(m.is_square(), "eigensolve needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

// ---------------------------------------------------------------------------
// Eigenpairs of discrete operators
// ---------------------------------------------------------------------------

/// Eigenvalue with its grid-sampled eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// Eigenvalue `λ`.
    pub value: f64,
    /// Node samples, normalized to `Σ h·u² = 1`.
    pub u: Vec<f64>,
    /// `‖Av − λv‖₂` for the Euclidean-unit vector `v ∝ u` (scale-free).
    pub residual: f64,
}

/// Lowest eigenpairs of an operator together with the operator's scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowSpectrum {
    /// The lowest `m` pairs in ascending order.
    pub pairs: Vec<EigenPair>,
    /// Spectral norm `‖A‖₂ = max|λ|`.
    pub norm: f64,
}

/// Lowest `m` eigenpairs of `op`, ascending, with multiplicity.
///
/// Eigenfunctions are L²-orthonormal under grid quadrature and carry the
/// sign convention of [`fix_sign`].
pub fn solve_lowest(op: &DiscreteOperator, m: usize) -> Result<Vec<EigenPair>> {
    Ok(solve_lowest_with_norm(op, m)?.pairs)
}

/// As [`solve_lowest`], also returning `‖A‖₂`.
pub fn solve_lowest_with_norm(op: &DiscreteOperator, m: usize) -> Result<LowSpectrum> {
    let n = op.len();
    if m > n {
        return Err(Error::invalid(format!(
            "requested {m} eigenpairs of a {n}×{n} operator"
        )));
    }
    let a = op.matrix();
    let (values, vectors) = dense_symmetric_eigen(a);
    let norm = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let weights = op.weights();
    let first = op.first_component_nodes();
    let mut pairs = Vec::with_capacity(m);
    for (k, &value) in values.iter().take(m).enumerate() {
        let v = vectors.column(k).into_owned();
        let residual = (a * &v - &v * value).norm();
        let mut u: Vec<f64> = v
            .iter()
            .zip(&weights)
            .map(|(x, h)| x / h.sqrt())
            .collect();
        let scale = u
            .iter()
            .zip(&weights)
            .map(|(x, h)| h * x * x)
            .sum::<f64>()
            .sqrt();
        u.iter_mut().for_each(|x| *x /= scale);
        fix_sign(&mut u, &weights, first.clone());
        pairs.push(EigenPair { value, u, residual });
    }
    Ok(LowSpectrum { pairs, norm })
}

/// Global sign convention: the quadrature mean over the first domain
/// component is positive. When that mean is negligible (odd functions), the
/// first node exceeding 1e-3 of the maximum magnitude is made positive.
pub fn fix_sign(u: &mut [f64], weights: &[f64], first: std::ops::Range<usize>) {
    let mean: f64 = first.clone().map(|i| weights[i] * u[i]).sum();
    let mass: f64 = first.clone().map(|i| weights[i] * u[i].abs()).sum();
    let flip = if mean.abs() > 1e-6 * mass {
        mean < 0.0
    } else {
        let max = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        u.iter()
            .find(|x| x.abs() > 1e-3 * max)
            .is_some_and(|x| *x < 0.0)
    };
    if flip {
        u.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Rayleigh quotient `⟨u, Au⟩ / ⟨u, u⟩` in the grid L² inner product.
pub fn rayleigh_quotient(op: &DiscreteOperator, u: &[f64]) -> Result<f64> {
    if u.len() != op.len() {
        return Err(Error::invalid("vector length does not match the operator"));
    }
    let v = nalgebra::DVector::from_column_slice(u);
    let av = op.matrix() * &v;
    let w = op.weights();
    let num: f64 = (0..u.len()).map(|i| w[i] * u[i] * av[i]).sum();
    let den: f64 = (0..u.len()).map(|i| w[i] * u[i] * u[i]).sum();
    if den == 0.0 {
        return Err(Error::invalid("Rayleigh quotient of the zero function"));
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

fn check_len(u: &[f64], grid: &UniformGrid) -> Result<()> {
    if u.len() != grid.len() {
        return Err(Error::invalid(format!(
            "grid function has {} samples, grid has {} nodes",
            u.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// `Σ h·u·v` over all cells.
pub fn l2_inner(u: &[f64], v: &[f64], grid: &UniformGrid) -> Result<f64> {
    check_len(u, grid)?;
    check_len(v, grid)?;
    Ok(grid.h() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
}

/// `(Σ h·u²)^{1/2}` over the cells of `region` (all cells when `None`).
pub fn l2_norm(u: &[f64], grid: &UniformGrid, region: Option<&Region>) -> Result<f64> {
    lp_norm(u, grid, region, 2.0)
}

/// `(Σ h·|u|^p)^{1/p}` over the cells of `region` (all cells when `None`).
pub fn lp_norm(u: &[f64], grid: &UniformGrid, region: Option<&Region>, p: f64) -> Result<f64> {
    check_len(u, grid)?;
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("L^p norm needs p ≥ 1, got {p}")));
    }
    let mask = match region {
        Some(r) => r.mask(grid)?,
        None => vec![true; grid.len()],
    };
    let sum: f64 = u
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(x, _)| x.abs().powf(p))
        .sum();
    Ok((grid.h() * sum).powf(1.0 / p))
}

// ---------------------------------------------------------------------------
// Nodal counts
// ---------------------------------------------------------------------------

/// Sign changes of a grid function, overall and per domain component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    /// Count over all nodes in order.
    pub total: SignChangeReport,
    /// Count within each domain component, with zeros classified against
    /// the global maximum.
    pub per_component: Vec<SignChangeReport>,
}

impl NodalReport {
    /// Total number of sign changes.
    pub fn changes(&self) -> usize {
        self.total.changes
    }
}

/// Sign changes of an eigenfunction on its grid.
pub fn nodal_report(pair: &EigenPair, grid: &UniformGrid, tau_rel: f64) -> Result<NodalReport> {
    grid_sign_changes(&pair.u, grid, tau_rel)
}

/// Sign changes of any grid function on its grid.
pub fn grid_sign_changes(u: &[f64], grid: &UniformGrid, tau_rel: f64) -> Result<NodalReport> {
    check_len(u, grid)?;
    let total = count_sign_changes(u, tau_rel)?;
    let per_component = (0..grid.components().len())
        .map(|c| {
            let range = grid.component_nodes(c);
            let pattern = total.pattern[range].to_vec();
            let mut changes = 0;
            let mut last = None;
            for s in pattern.iter().filter(|s| **s != crate::matmodel::Sign::Zero) {
                if last.is_some_and(|l| l != *s) {
                    changes += 1;
                }
                last = Some(*s);
            }
            SignChangeReport {
                pattern,
                changes,
                tolerance: tau_rel,
            }
        })
        .collect();
    Ok(NodalReport {
        total,
        per_component,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{
        add_diagonal, assemble_fractional, build_grid, fractional_constant, Domain, Interval,
        IntervalUnion,
    };
    use crate::matmodel::{assemble_reduced, eigendecompose};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn interval_op(n: usize) -> DiscreteOperator {
        let grid = build_grid(&Domain::interval(-1.0, 1.0), n).unwrap();
        assemble_fractional(Arc::new(grid), 0.5, fractional_constant(0.5).unwrap()).unwrap()
    }

    #[test]
    fn three_by_three_embedding_matches_matmodel() {
        let m = assemble_reduced(1.0, 2.0, 3.0, -3.0, -1.0, -2.0).unwrap();
        let (values, _) = dense_symmetric_eigen(&m.to_dmatrix());
        let p = eigendecompose(&m);
        for k in 0..3 {
            assert_eq!(values[k], p[k].value);
        }
    }

    #[test]
    fn solve_lowest_contracts() {
        let op = interval_op(50);
        let spec = solve_lowest_with_norm(&op, 5).unwrap();
        let grid = op.grid();
        for (i, p) in spec.pairs.iter().enumerate() {
            assert!(p.residual <= 1e-9 * spec.norm);
            assert!((l2_norm(&p.u, grid, None).unwrap() - 1.0).abs() < 1e-10);
            for q in &spec.pairs[..i] {
                assert!(l2_inner(&p.u, &q.u, grid).unwrap().abs() < 1e-9);
            }
        }
        assert!(spec.pairs.windows(2).all(|w| w[0].value <= w[1].value));
        assert!(solve_lowest(&op, op.len() + 1).is_err());
    }

    #[test]
    fn shift_moves_eigenvalues_only() {
        let op = interval_op(40);
        let shifted = add_diagonal(&op, &vec![3.25; op.len()]).unwrap();
        let p = solve_lowest(&op, 3).unwrap();
        let q = solve_lowest(&shifted, 3).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((b.value - a.value - 3.25).abs() < 1e-10);
            let dot = l2_inner(&a.u, &b.u, op.grid()).unwrap();
            assert!((dot.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ground_state_one_signed_and_second_has_one_change() {
        let op = interval_op(100);
        let p = solve_lowest(&op, 2).unwrap();
        assert!(p[0].u.iter().all(|&x| x > 0.0));
        assert_eq!(nodal_report(&p[0], op.grid(), 1e-8).unwrap().changes(), 0);
        assert_eq!(nodal_report(&p[1], op.grid(), 1e-8).unwrap().changes(), 1);
    }

    #[test]
    fn single_small_well_ground_state_one_signed() {
        let wells = IntervalUnion::new(vec![0.1], 0.05).unwrap();
        let grid = build_grid(&Domain::from(&wells), 400).unwrap();
        let op =
            assemble_fractional(Arc::new(grid), 0.5, fractional_constant(0.5).unwrap()).unwrap();
        let p = solve_lowest(&op, 1).unwrap();
        assert!(p[0].u.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn quadrature_examples() {
        let grid = build_grid(&Domain::interval(-1.0, 1.0), 50).unwrap();
        let ones = vec![1.0; grid.len()];
        assert!((l2_norm(&ones, &grid, None).unwrap().powi(2) - 2.0).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for n in [10, 20, 40, 80] {
            let g = build_grid(&Domain::interval(-1.0, 1.0), n).unwrap();
            let u: Vec<f64> = g.nodes().to_vec();
            let err = (l2_norm(&u, &g, None).unwrap().powi(2) - 2.0 / 3.0).abs();
            assert!(err < prev / 3.5, "second order: {err} vs {prev}");
            prev = err;
        }
        // Piecewise constants are integrated exactly.
        let pc: Vec<f64> = grid.nodes().iter().map(|&x| if x < 0.0 { 2.0 } else { -1.0 }).collect();
        assert!((l2_norm(&pc, &grid, None).unwrap().powi(2) - 5.0).abs() < 1e-13);
    }

    #[test]
    fn region_norm_requires_alignment() {
        let grid = build_grid(&Domain::interval(-1.0, 1.0), 10).unwrap();
        let ones = vec![1.0; grid.len()];
        let aligned = Region::new(vec![Interval::new(-0.5, 0.5)]).unwrap();
        assert!((l2_norm(&ones, &grid, Some(&aligned)).unwrap().powi(2) - 1.0).abs() < 1e-14);
        let ragged = Region::new(vec![Interval::new(-0.55, 0.5)]).unwrap();
        assert!(matches!(
            l2_norm(&ones, &grid, Some(&ragged)),
            Err(Error::NotCellAligned(_))
        ));
    }

    #[test]
    fn min_max_against_random_vectors() {
        let op = interval_op(30);
        let l1 = solve_lowest(&op, 1).unwrap()[0].value;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let best = (0..1000)
            .map(|_| {
                let u: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                rayleigh_quotient(&op, &u).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best >= l1);
    }

    #[test]
    fn sign_convention_positive_mean() {
        let op = interval_op(40);
        let p = solve_lowest(&op, 3).unwrap();
        let h = op.grid().h();
        assert!(p[0].u.iter().sum::<f64>() * h > 0.0);
        assert!(p[2].u.iter().sum::<f64>() * h > 0.0);
        // Odd eigenfunction: first significant node positive.
        assert!(p[1].u[0] > 0.0);
    }
}
