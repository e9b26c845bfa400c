//! The 3×3 reduced matrix model of three coupled wells.
//!
//! The model matrix is
//!
//! ```text
//!     [ U  c  b ]
//! M = [ c  V  a ]      a, b, c < 0,  |b| < |a|, |b| < |c|
//!     [ b  a  W ]
//! ```
//!
//! where `c` couples wells 1–2, `a` couples wells 2–3 and the weaker `b`
//! couples the outer wells 1–3.
//!
//! Two independent eigen-routes are provided and deliberately kept apart:
//!
//! - [`eigendecompose`] runs the general dense symmetric solver from
//!   [`crate::eigen`] (the brute-force route);
//! - [`classify_second_eigenvector`] and [`closed_form_eigenvalues`] use the
//!   trigonometric solution of the characteristic cubic and a cross-product
//!   null vector (the closed-form route).
//!
//! Normalizations: every function takes raw `(a, b, c)`. Only
//! [`eigen_sensitivity`] normalizes, to `b² + c² = 1`, and it says so.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::dense_symmetric_eigen;
use crate::error::{Error, Result};

/// Default relative threshold below which a component counts as zero.
pub const DEFAULT_TAU_REL: f64 = 1e-8;

/// Relative eigenvalue gap (against `‖M‖_F`) below which two eigenvalues are
/// treated as one degenerate level.
pub const DEGENERACY_REL_GAP: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Sign counting
// ---------------------------------------------------------------------------

/// Sign class of one entry of a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    /// Strictly positive beyond the zero threshold.
    Plus,
    /// Strictly negative beyond the zero threshold.
    Minus,
    /// Within the zero threshold.
    Zero,
}

impl Sign {
    /// Single-character symbol: `+`, `-` or `0`.
    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
            Sign::Zero => '0',
        }
    }

    /// The opposite sign (zero stays zero).
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
            Sign::Zero => Sign::Zero,
        }
    }

    /// Sign of a scalar with an absolute zero threshold.
    pub fn of(value: f64, zero_below: f64) -> Sign {
        if value.abs() <= zero_below {
            Sign::Zero
        } else if value > 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Sign pattern of a vector and the number of sign changes it contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignChangeReport {
    /// Per-entry sign classes.
    pub pattern: Vec<Sign>,
    /// Strict sign flips between consecutive entries after deleting zeros.
    pub changes: usize,
    /// Relative threshold `τ` used to classify zeros.
    pub tolerance: f64,
}

impl SignChangeReport {
    /// Pattern as a compact string such as `"-+-"`.
    pub fn pattern_string(&self) -> String {
        self.pattern.iter().map(|s| s.symbol()).collect()
    }

    /// The pattern with every sign reversed.
    pub fn flipped_pattern(&self) -> Vec<Sign> {
        self.pattern.iter().map(|s| s.flipped()).collect()
    }

    /// True when the pattern equals `other` up to a global sign.
    pub fn matches_up_to_sign(&self, other: &[Sign]) -> bool {
        self.pattern == other || self.flipped_pattern() == other
    }

    /// Index positions classified as zero.
    pub fn zero_positions(&self) -> Vec<usize> {
        self.pattern
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Sign::Zero)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Counts strict sign changes of `values`.
///
/// Entries with `|value| ≤ τ_rel · max|value|` are classified as zero and
/// deleted before counting flips between consecutive remaining entries.
pub fn count_sign_changes(values: &[f64], tau_rel: f64) -> Result<SignChangeReport> {
    if values.is_empty() {
        return Err(Error::invalid("cannot count sign changes of an empty vector"));
    }
    if !(0.0..1.0).contains(&tau_rel) {
        return Err(Error::invalid(format!("tau_rel must lie in [0, 1), got {tau_rel}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("vector contains non-finite entries"));
    }
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Err(Error::AllZero);
    }
    let threshold = tau_rel * max;
    let pattern: Vec<Sign> = values.iter().map(|&v| Sign::of(v, threshold)).collect();
    let mut changes = 0;
    let mut last = Sign::Zero;
    for &s in pattern.iter().filter(|s| **s != Sign::Zero) {
        if last != Sign::Zero && s != last {
            changes += 1;
        }
        last = s;
    }
    Ok(SignChangeReport {
        pattern,
        changes,
        tolerance: tau_rel,
    })
}

// ---------------------------------------------------------------------------
// Reduced matrix
// ---------------------------------------------------------------------------

/// The symmetric 3×3 model `[[U,c,b],[c,V,a],[b,a,W]]`.
///
/// Construct through [`assemble_reduced`] or [`assemble_normalized`], which
/// enforce the sign and ordering conditions on the couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedMatrix {
    u: f64,
    v: f64,
    w: f64,
    a: f64,
    b: f64,
    c: f64,
}

impl ReducedMatrix {
    /// Diagonal entry of well 1.
    pub fn u(&self) -> f64 {
        self.u
    }
    /// Diagonal entry of well 2.
    pub fn v(&self) -> f64 {
        self.v
    }
    /// Diagonal entry of well 3.
    pub fn w(&self) -> f64 {
        self.w
    }
    /// Coupling of wells 2–3.
    pub fn a(&self) -> f64 {
        self.a
    }
    /// Coupling of wells 1–3.
    pub fn b(&self) -> f64 {
        self.b
    }
    /// Coupling of wells 1–2.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Entry `(i, j)` with zero-based indices.
    ///
    /// # Panics
    /// Panics if `i` or `j` is not in `0..3`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.as_array()[i][j]
    }

    /// Row-major entries.
    pub fn as_array(&self) -> [[f64; 3]; 3] {
        [
            [self.u, self.c, self.b],
            [self.c, self.v, self.a],
            [self.b, self.a, self.w],
        ]
    }

    /// As a fixed-size nalgebra matrix.
    pub fn to_matrix3(&self) -> Matrix3<f64> {
        let m = self.as_array();
        Matrix3::from_fn(|i, j| m[i][j])
    }

    /// As a dynamically sized nalgebra matrix.
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let m = self.as_array();
        DMatrix::from_fn(3, 3, |i, j| m[i][j])
    }

    /// `M + σI`.
    pub fn shifted(&self, sigma: f64) -> ReducedMatrix {
        ReducedMatrix {
            u: self.u + sigma,
            v: self.v + sigma,
            w: self.w + sigma,
            ..*self
        }
    }

    /// Frobenius norm, used as the scale for relative tolerances.
    pub fn norm(&self) -> f64 {
        self.as_array()
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Trace `U + V + W`.
    pub fn trace(&self) -> f64 {
        self.u + self.v + self.w
    }

    /// `M v` for a 3-vector.
    pub fn apply(&self, x: &[f64; 3]) -> [f64; 3] {
        let m = self.as_array();
        let mut y = [0.0; 3];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..3).map(|j| m[i][j] * x[j]).sum();
        }
        y
    }
}

fn check_couplings(a: f64, b: f64, c: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::invalid("couplings must be finite"));
    }
    if !(a < 0.0 && b < 0.0 && c < 0.0) {
        return Err(Error::invalid(format!(
            "couplings must be negative, got a={a}, b={b}, c={c}"
        )));
    }
    if !(b.abs() < a.abs() && b.abs() < c.abs()) {
        return Err(Error::invalid(format!(
            "outer coupling must be weakest: need |b| < |a| and |b| < |c|, got a={a}, b={b}, c={c}"
        )));
    }
    Ok(())
}

/// Builds `[[U,c,b],[c,V,a],[b,a,W]]` after validating the couplings.
pub fn assemble_reduced(u: f64, v: f64, w: f64, a: f64, b: f64, c: f64) -> Result<ReducedMatrix> {
    check_couplings(a, b, c)?;
    if !(u.is_finite() && v.is_finite() && w.is_finite()) {
        return Err(Error::invalid("diagonal entries must be finite"));
    }
    Ok(ReducedMatrix { u, v, w, a, b, c })
}

/// Free offsets `(X, Z)` around the doubly degenerate configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellCoordinates {
    /// Offset of `U` from `bc/a`.
    pub x: f64,
    /// Offset of `W` from `ab/c`.
    pub z: f64,
    /// Coupling of wells 2–3.
    pub a: f64,
    /// Coupling of wells 1–3.
    pub b: f64,
    /// Coupling of wells 1–2.
    pub c: f64,
}

impl WellCoordinates {
    /// Bundles offsets and couplings.
    pub fn new(x: f64, z: f64, a: f64, b: f64, c: f64) -> Self {
        WellCoordinates { x, z, a, b, c }
    }

    /// Same couplings, different offsets.
    pub fn with_offsets(&self, x: f64, z: f64) -> Self {
        WellCoordinates { x, z, ..*self }
    }
}

/// Builds the matrix with `V = ac/b`, `U = bc/a + X`, `W = ab/c + Z`.
///
/// At `X = Z = 0` it annihilates both `[a, −b, 0]` and `[0, −b, c]`.
pub fn assemble_normalized(coords: &WellCoordinates) -> Result<ReducedMatrix> {
    let WellCoordinates { x, z, a, b, c } = *coords;
    check_couplings(a, b, c)?;
    if !(x.is_finite() && z.is_finite()) {
        return Err(Error::invalid("offsets X, Z must be finite"));
    }
    assemble_reduced(b * c / a + x, a * c / b, a * b / c + z, a, b, c)
}

// ---------------------------------------------------------------------------
// Brute-force route: dense eigensolver
// ---------------------------------------------------------------------------

/// One eigenpair of a 3×3 model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixEigenPair {
    /// Eigenvalue.
    pub value: f64,
    /// Unit eigenvector.
    pub vector: [f64; 3],
    /// `‖Mv − λv‖₂`.
    pub residual: f64,
}

/// All three eigenpairs in ascending order, via the general dense solver.
pub fn eigendecompose(m: &ReducedMatrix) -> [MatrixEigenPair; 3] {
    let (values, vectors) = dense_symmetric_eigen(&m.to_dmatrix());
    std::array::from_fn(|k| {
        let vector = [vectors[(0, k)], vectors[(1, k)], vectors[(2, k)]];
        let residual = residual3(m, values[k], &vector);
        MatrixEigenPair {
            value: values[k],
            vector,
            residual,
        }
    })
}

fn residual3(m: &ReducedMatrix, lambda: f64, v: &[f64; 3]) -> f64 {
    let mv = m.apply(v);
    (0..3)
        .map(|i| (mv[i] - lambda * v[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Rayleigh quotient `vᵀMv / vᵀv`.
pub fn rayleigh_energy(m: &ReducedMatrix, v: &[f64; 3]) -> Result<f64> {
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if vv == 0.0 || !vv.is_finite() {
        return Err(Error::invalid("Rayleigh quotient of a zero or non-finite vector"));
    }
    let mv = m.apply(v);
    Ok((0..3).map(|i| v[i] * mv[i]).sum::<f64>() / vv)
}

/// Simple lowest eigenvalue with its strictly positive eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    /// Minimum eigenvalue.
    pub lambda_min: f64,
    /// Unit eigenvector with all components positive.
    pub vector: [f64; 3],
    /// Distance from `λ_min` to the next eigenvalue.
    pub gap: f64,
}

/// Perron positivity of the ground state.
///
/// With all couplings negative, `σI − M` is a positive matrix for large `σ`,
/// so the lowest eigenvalue of `M` is simple and its eigenvector one-signed.
/// The function verifies both facts numerically and fails loudly otherwise.
pub fn ground_state_positivity(m: &ReducedMatrix) -> Result<GroundState> {
    let pairs = eigendecompose(m);
    let norm = m.norm();
    let gap = pairs[1].value - pairs[0].value;
    if gap <= DEGENERACY_REL_GAP * norm {
        return Err(Error::Degenerate(format!(
            "lowest eigenvalue {} has gap {gap:e} to the next one",
            pairs[0].value
        )));
    }
    let mut vector = pairs[0].vector;
    let sign = if vector.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    vector.iter_mut().for_each(|x| *x *= sign);
    if vector.iter().any(|&x| x <= 0.0) {
        return Err(Error::NotOneSigned(format!(
            "ground-state eigenvector {vector:?} has mixed signs"
        )));
    }
    Ok(GroundState {
        lambda_min: pairs[0].value,
        vector,
        gap,
    })
}

/// True iff `−M` is positive semidefinite according to its principal minors,
/// i.e. `M ≤ 0` and hence `0` bounds the spectrum from above.
///
/// `tol` is an absolute slack on each minor (scaled by the caller).
pub fn negative_semidefinite_by_minors(m: &ReducedMatrix, tol: f64) -> bool {
    let n = m.as_array().map(|row| row.map(|x| -x));
    let d1 = [n[0][0], n[1][1], n[2][2]];
    let d2 = [
        n[0][0] * n[1][1] - n[0][1] * n[1][0],
        n[0][0] * n[2][2] - n[0][2] * n[2][0],
        n[1][1] * n[2][2] - n[1][2] * n[2][1],
    ];
    let d3 = n[0][0] * (n[1][1] * n[2][2] - n[1][2] * n[2][1])
        - n[0][1] * (n[1][0] * n[2][2] - n[1][2] * n[2][0])
        + n[0][2] * (n[1][0] * n[2][1] - n[1][1] * n[2][0]);
    d1.iter().chain(d2.iter()).all(|&d| d >= -tol) && d3 >= -tol
}

// ---------------------------------------------------------------------------
// Closed-form route: trigonometric cubic + cross-product null vector
// ---------------------------------------------------------------------------

/// Eigenvalues in ascending order from the trigonometric solution of the
/// characteristic cubic of a symmetric 3×3 matrix.
pub fn closed_form_eigenvalues(m: &ReducedMatrix) -> [f64; 3] {
    let a = m.as_array();
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = m.trace() / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q, q, q];
    }
    // B = (A − qI) / p, r = det(B) / 2 ∈ [−1, 1].
    let b = Matrix3::from_fn(|i, j| (a[i][j] - if i == j { q } else { 0.0 }) / p);
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + third).cos();
    let mid = 3.0 * q - hi - lo;
    [lo, mid, hi]
}

/// Unit null vector of `M − λI` from the largest cross product of its rows.
fn cross_product_eigenvector(m: &ReducedMatrix, lambda: f64) -> [f64; 3] {
    let a = m.as_array();
    let rows: [Vector3<f64>; 3] = std::array::from_fn(|i| {
        Vector3::from_fn(|j, _| a[i][j] - if i == j { lambda } else { 0.0 })
    });
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
        .copied()
        .unwrap_or_else(Vector3::zeros);
    let n = best.norm();
    if n == 0.0 {
        // λI == M: every vector is an eigenvector.
        return [1.0, 0.0, 0.0];
    }
    [best[0] / n, best[1] / n, best[2] / n]
}

/// Classification of the second eigenvector at one `(X, Z)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SecondEigenvectorClass {
    /// Simple `λ₂`: sign pattern of its eigenvector.
    Classified {
        /// Sign pattern of the unit eigenvector of `λ₂`.
        report: SignChangeReport,
        /// The middle eigenvalue.
        lambda2: f64,
        /// Unit eigenvector of `λ₂` (global sign: first nonzero entry positive).
        vector: [f64; 3],
    },
    /// `λ₂` is within the gap tolerance of a neighbour; no pattern reported.
    NearDegenerate {
        /// The middle eigenvalue.
        lambda2: f64,
        /// Smallest distance from `λ₂` to another eigenvalue.
        gap: f64,
    },
}

impl SecondEigenvectorClass {
    /// Sign changes if classified.
    pub fn changes(&self) -> Option<usize> {
        match self {
            SecondEigenvectorClass::Classified { report, .. } => Some(report.changes),
            SecondEigenvectorClass::NearDegenerate { .. } => None,
        }
    }

    /// The middle eigenvalue.
    pub fn lambda2(&self) -> f64 {
        match self {
            SecondEigenvectorClass::Classified { lambda2, .. }
            | SecondEigenvectorClass::NearDegenerate { lambda2, .. } => *lambda2,
        }
    }
}

/// Fixes the global sign so the first entry above the threshold is positive.
fn canonical_sign(v: &mut [f64], tau_rel: f64) {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().copied().find(|x| x.abs() > tau_rel * max) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Sign pattern of the second eigenvector and the sign of `λ₂`, via the
/// closed-form route.
///
/// `tau` is the relative zero threshold for components and, against
/// `‖M‖_F`, the gap below which `λ₂` is reported as near-degenerate.
pub fn classify_second_eigenvector(
    coords: &WellCoordinates,
    tau: f64,
) -> Result<SecondEigenvectorClass> {
    if coords.x == 0.0 && coords.z == 0.0 {
        return Err(Error::invalid(
            "(X, Z) = (0, 0) is the doubly degenerate point; the second eigenvector is not unique",
        ));
    }
    let m = assemble_normalized(coords)?;
    let lambda = closed_form_eigenvalues(&m);
    let gap = (lambda[1] - lambda[0]).min(lambda[2] - lambda[1]);
    if gap < tau * m.norm() {
        return Ok(SecondEigenvectorClass::NearDegenerate {
            lambda2: lambda[1],
            gap,
        });
    }
    let mut vector = cross_product_eigenvector(&m, lambda[1]);
    canonical_sign(&mut vector, tau);
    let report = count_sign_changes(&vector, tau)?;
    Ok(SecondEigenvectorClass::Classified {
        report,
        lambda2: lambda[1],
        vector,
    })
}

/// Brute-force counterpart of [`classify_second_eigenvector`]: dense
/// eigensolve followed by [`count_sign_changes`].
pub fn brute_force_second_eigenvector(
    coords: &WellCoordinates,
    tau: f64,
) -> Result<SecondEigenvectorClass> {
    let m = assemble_normalized(coords)?;
    let pairs = eigendecompose(&m);
    let gap = (pairs[1].value - pairs[0].value).min(pairs[2].value - pairs[1].value);
    if gap < tau * m.norm() {
        return Ok(SecondEigenvectorClass::NearDegenerate {
            lambda2: pairs[1].value,
            gap,
        });
    }
    let mut vector = pairs[1].vector;
    canonical_sign(&mut vector, tau);
    let report = count_sign_changes(&vector, tau)?;
    Ok(SecondEigenvectorClass::Classified {
        report,
        lambda2: pairs[1].value,
        vector,
    })
}

// ---------------------------------------------------------------------------
// Sensitivities
// ---------------------------------------------------------------------------

/// Derivatives with respect to `Z` of the eigenpair through `[0, −b, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    /// `∂λ/∂Z` of the eigenvalue that is 0 at `Z = 0`.
    pub lambda_prime: f64,
    /// `∂x/∂Z` of the first component `x` of its unit eigenvector.
    pub x_prime: f64,
    /// Coordinates after normalizing to `b² + c² = 1`.
    pub normalized: WellCoordinates,
}

fn sensitivity_preconditions(coords: &WellCoordinates) -> Result<WellCoordinates> {
    check_couplings(coords.a, coords.b, coords.c)?;
    if coords.z != 0.0 {
        return Err(Error::invalid(format!(
            "sensitivities are taken at Z = 0, got Z = {}",
            coords.z
        )));
    }
    if coords.x == 0.0 {
        return Err(Error::invalid(
            "X = 0 is the doubly degenerate point: the sensitivity x' = b²c²/(aX) is singular",
        ));
    }
    if !(coords.x < 0.0) || !coords.x.is_finite() {
        return Err(Error::invalid(format!("sensitivities require X < 0, got X = {}", coords.x)));
    }
    let r = coords.b.hypot(coords.c);
    Ok(WellCoordinates {
        a: coords.a / r,
        b: coords.b / r,
        c: coords.c / r,
        ..*coords
    })
}

/// Closed-form sensitivities `λ′ = c²` and `x′ = b²c²/(aX)` at `Z = 0`.
///
/// The couplings are first rescaled by `r = √(b²+c²)` (all three, preserving
/// their ratios) so that `b² + c² = 1` and `[0, −b, c]` is a unit vector.
pub fn eigen_sensitivity(coords: &WellCoordinates) -> Result<Sensitivity> {
    let n = sensitivity_preconditions(coords)?;
    let (b2, c2) = (n.b * n.b, n.c * n.c);
    Ok(Sensitivity {
        lambda_prime: c2,
        x_prime: b2 * c2 / (n.a * n.x),
        normalized: n,
    })
}

/// Eigenpair of the branch through `[0, −b, c]`: the eigenvector with the
/// largest overlap with that direction, signed to have positive overlap.
pub fn tracked_zero_branch(coords: &WellCoordinates) -> Result<(f64, [f64; 3])> {
    let m = assemble_normalized(coords)?;
    let reference = [0.0, -coords.b, coords.c];
    let pairs = eigendecompose(&m);
    let overlap = |v: &[f64; 3]| (0..3).map(|i| v[i] * reference[i]).sum::<f64>();
    let best = pairs
        .iter()
        .max_by(|p, q| overlap(&p.vector).abs().total_cmp(&overlap(&q.vector).abs()))
        .expect("three eigenpairs");
    let mut v = best.vector;
    if overlap(&v) < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((best.value, v))
}

/// Centered finite differences in `Z` of the tracked branch, on the same
/// normalized coordinates as [`eigen_sensitivity`]. Returns `(λ′, x′)`.
pub fn sensitivity_finite_difference(coords: &WellCoordinates, step: f64) -> Result<(f64, f64)> {
    let n = sensitivity_preconditions(coords)?;
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let (lp, vp) = tracked_zero_branch(&n.with_offsets(n.x, step))?;
    let (lm, vm) = tracked_zero_branch(&n.with_offsets(n.x, -step))?;
    Ok(((lp - lm) / (2.0 * step), (vp[0] - vm[0]) / (2.0 * step)))
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

/// Margin keeping `|b|` away from `min(|a|, |c|)` in random instances.
pub const RANDOM_MARGIN: f64 = 0.01;

/// Random couplings `(a, b, c)`: `a, c ~ U(−1, −0.3)`,
/// `b ~ U(−min(|a|,|c|) + margin, −0.05)`.
pub fn random_couplings<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64, f64) {
    let a: f64 = rng.gen_range(-1.0..-0.3);
    let c: f64 = rng.gen_range(-1.0..-0.3);
    let b = rng.gen_range(-(a.abs().min(c.abs())) + RANDOM_MARGIN..-0.05);
    (a, b, c)
}

/// Random valid model with diagonal entries `~ U(−2, 2)`.
pub fn random_reduced<R: Rng + ?Sized>(rng: &mut R) -> ReducedMatrix {
    let (a, b, c) = random_couplings(rng);
    let u = rng.gen_range(-2.0..2.0);
    let v = rng.gen_range(-2.0..2.0);
    let w = rng.gen_range(-2.0..2.0);
    assemble_reduced(u, v, w, a, b, c).expect("generator respects the coupling conditions")
}

// ---------------------------------------------------------------------------
// Phase diagram
// ---------------------------------------------------------------------------

/// One `(X, Z)` point of a phase-diagram scan, classified by both routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    /// Offset `X`.
    pub x: f64,
    /// Offset `Z`.
    pub z: f64,
    /// Closed-form classification.
    pub closed_form: SecondEigenvectorClass,
    /// Dense-solver classification.
    pub brute_force: SecondEigenvectorClass,
}

impl PhasePoint {
    /// Both routes produced the same pattern and the same sign of `λ₂`.
    pub fn routes_agree(&self) -> bool {
        match (&self.closed_form, &self.brute_force) {
            (
                SecondEigenvectorClass::Classified {
                    report: r1,
                    lambda2: l1,
                    ..
                },
                SecondEigenvectorClass::Classified {
                    report: r2,
                    lambda2: l2,
                    ..
                },
            ) => r1.pattern == r2.pattern && l1.signum() == l2.signum(),
            (
                SecondEigenvectorClass::NearDegenerate { .. },
                SecondEigenvectorClass::NearDegenerate { .. },
            ) => true,
            _ => false,
        }
    }
}

/// Evenly spaced `n` points on `[−1, 1]`.
pub fn scan_axis(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Classifies the second eigenvector on an `n × n` grid of `(X, Z)` in
/// `[−1, 1]²`, skipping points on either axis.
pub fn phase_scan(a: f64, b: f64, c: f64, n: usize, tau: f64) -> Result<Vec<PhasePoint>> {
    check_couplings(a, b, c)?;
    let axis = scan_axis(n);
    let on_axis = |t: f64| t.abs() < 1e-12;
    let mut out = Vec::with_capacity(n * n);
    for &x in &axis {
        for &z in &axis {
            if on_axis(x) || on_axis(z) {
                continue;
            }
            let coords = WellCoordinates::new(x, z, a, b, c);
            out.push(PhasePoint {
                x,
                z,
                closed_form: classify_second_eigenvector(&coords, tau)?,
                brute_force: brute_force_second_eigenvector(&coords, tau)?,
            });
        }
    }
    Ok(out)
}
