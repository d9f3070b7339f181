//! Dense matrix helpers, the SVD pseudoinverse, ridge solves and the block
//! pseudoinverse update used when node columns are appended to a design
//! matrix.
//!
//! All routines work on [`Matrix`] (an owned `faer` matrix of `f64`) and
//! reject non-finite input. The incremental update follows the classical
//! partitioned-pseudoinverse construction: for `M = [A | N]` with
//! `D = A⁺N` and `C = N − AD`,
//!
//! ```text
//! M⁺ = [ A⁺ − D·Bᵀ ]
//!      [     Bᵀ     ]
//! ```
//!
//! where `Bᵀ = C⁺` when `C` has full column rank and
//! `Bᵀ = (I + DᵀD)⁻¹ Dᵀ A⁺` when `C` vanishes. Appends that are partly
//! dependent on `A` use the general form that contains both branches.

use std::cell::Cell;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BlsError, Result};

/// Dense real matrix. Column-major storage; all public constructors and
/// serializers in this crate use row-major element order.
pub type Matrix = Mat<f64>;

/// Build a matrix from row slices. Panics on ragged input; intended for
/// literals in tests and examples.
pub fn from_rows(rows: &[&[f64]]) -> Matrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
    Matrix::from_fn(r, c, |i, j| rows[i][j])
}

/// Build a matrix from row-major data.
pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(BlsError::dim(format!(
            "{} values cannot fill a {rows}x{cols} matrix",
            data.len()
        )));
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| data[i * cols + j]))
}

pub fn to_row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        if m.col_as_slice(j).iter().any(|v| !v.is_finite()) {
            return Err(BlsError::value(format!("{what} contains NaN or infinite entries")));
        }
    }
    Ok(())
}

pub fn frobenius(m: &Matrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        acc += m.col_as_slice(j).iter().map(|v| v * v).sum::<f64>();
    }
    acc.sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`, falling back to the absolute difference when `b`
/// is zero.
pub fn relative_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let diff = a - b;
    let denom = frobenius(b);
    if denom == 0.0 {
        frobenius(&diff)
    } else {
        frobenius(&diff) / denom
    }
}

/// Horizontal concatenation `[a | b]`.
pub fn hcat(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(BlsError::dim(format!(
            "cannot place {} rows beside {} rows",
            b.nrows(),
            a.nrows()
        )));
    }
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.subcols_mut(0, a.ncols()).copy_from(a);
    out.subcols_mut(a.ncols(), b.ncols()).copy_from(b);
    Ok(out)
}

/// Vertical concatenation of `top` over `bottom`.
pub fn vcat(top: &Matrix, bottom: &Matrix) -> Result<Matrix> {
    if top.ncols() != bottom.ncols() {
        return Err(BlsError::dim(format!(
            "cannot stack {} columns under {} columns",
            bottom.ncols(),
            top.ncols()
        )));
    }
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.subrows_mut(0, top.nrows()).copy_from(top);
    out.subrows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    Ok(out)
}

/// Counters for the singular value decompositions run on the current
/// thread. Tests use them to check which code path touched an SVD.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SvdStats {
    pub calls: u64,
    /// Largest `min(rows, cols)` seen so far.
    pub max_rank_dim: usize,
}

thread_local! {
    static SVD_STATS: Cell<SvdStats> = const { Cell::new(SvdStats { calls: 0, max_rank_dim: 0 }) };
}

pub fn svd_stats() -> SvdStats {
    SVD_STATS.with(|s| s.get())
}

pub fn reset_svd_stats() {
    SVD_STATS.with(|s| s.set(SvdStats::default()));
}

fn record_svd(rows: usize, cols: usize) {
    SVD_STATS.with(|s| {
        let mut st = s.get();
        st.calls += 1;
        st.max_rank_dim = st.max_rank_dim.max(rows.min(cols));
        s.set(st);
    });
}

/// Thin SVD pieces with the singular values below the effective-rank cutoff
/// dropped.
struct TruncatedSvd {
    u: Matrix,
    s: Vec<f64>,
    v: Matrix,
}

fn truncated_svd(a: &Matrix) -> Result<TruncatedSvd> {
    truncated_svd_floor(a, 0.0)
}

/// As [`truncated_svd`], also dropping singular values at or below `floor`.
fn truncated_svd_floor(a: &Matrix, floor: f64) -> Result<TruncatedSvd> {
    record_svd(a.nrows(), a.ncols());
    let svd = a
        .thin_svd()
        .map_err(|e| BlsError::Numeric(format!("SVD did not converge: {e:?}")))?;
    let k = a.nrows().min(a.ncols());
    let sigma: Vec<f64> = (0..k).map(|i| svd.S()[i]).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let rtol = 1e-12 * a.nrows().max(a.ncols()) as f64;
    let cutoff = (rtol * smax).max(floor);
    let keep: Vec<usize> = (0..k).filter(|&i| smax > 0.0 && sigma[i] > cutoff).collect();
    let u = Matrix::from_fn(a.nrows(), keep.len(), |i, j| svd.U()[(i, keep[j])]);
    let v = Matrix::from_fn(a.ncols(), keep.len(), |i, j| svd.V()[(i, keep[j])]);
    let s = keep.iter().map(|&i| sigma[i]).collect();
    Ok(TruncatedSvd { u, s, v })
}

fn check_nonempty(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(BlsError::dim(format!(
            "{what} is empty ({}x{})",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Moore-Penrose pseudoinverse via the singular value decomposition.
///
/// Singular values at or below `1e-12 · max(rows, cols) · σ_max` are treated
/// as zero.
pub fn pinv(a: &Matrix) -> Result<Matrix> {
    pinv_floor(a, 0.0)
}

fn pinv_floor(a: &Matrix, floor: f64) -> Result<Matrix> {
    pinv_and_basis(a, floor).map(|(p, _)| p)
}

/// The pseudoinverse and an orthonormal basis of the column space, from one
/// truncated SVD.
fn pinv_and_basis(a: &Matrix, floor: f64) -> Result<(Matrix, Matrix)> {
    check_nonempty(a, "matrix")?;
    ensure_finite(a, "matrix")?;
    let svd = truncated_svd_floor(a, floor)?;
    Ok((pinv_from_svd(&svd), svd.u))
}

/// `V · diag(1/σ) · Uᵀ`
fn pinv_from_svd(svd: &TruncatedSvd) -> Matrix {
    let mut v_scaled = svd.v.clone();
    for (j, s) in svd.s.iter().enumerate() {
        let inv = 1.0 / s;
        v_scaled.col_as_slice_mut(j).iter_mut().for_each(|x| *x *= inv);
    }
    &v_scaled * svd.u.transpose()
}

/// Ridge-regularized least squares: the `W` minimizing
/// `‖AW − Y‖² + λ‖W‖²`. With `λ = 0` this is `A⁺Y`.
pub fn ridge_solve(a: &Matrix, y: &Matrix, lambda: f64) -> Result<Matrix> {
    if a.nrows() != y.nrows() {
        return Err(BlsError::dim(format!(
            "design has {} rows but targets have {}",
            a.nrows(),
            y.nrows()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(BlsError::value(format!("ridge lambda must be finite and >= 0, got {lambda}")));
    }
    check_nonempty(a, "design matrix")?;
    ensure_finite(a, "design matrix")?;
    ensure_finite(y, "targets")?;
    if lambda == 0.0 {
        return Ok(&pinv(a)? * y);
    }
    let (rows, cols) = (a.nrows(), a.ncols());
    let solved = if cols <= rows {
        let mut gram = a.transpose() * a;
        add_to_diagonal(&mut gram, lambda);
        let rhs = a.transpose() * y;
        gram.llt(Side::Lower).ok().map(|llt| llt.solve(&rhs))
    } else {
        let mut gram = a * a.transpose();
        add_to_diagonal(&mut gram, lambda);
        gram.llt(Side::Lower)
            .ok()
            .map(|llt| a.transpose() * llt.solve(y))
    };
    match solved {
        Some(w) if w.col_iter().all(|c| c.iter().all(|v| v.is_finite())) => Ok(w),
        _ => {
            log::debug!("cholesky ridge solve failed, falling back to SVD filter factors");
            svd_ridge(a, y, lambda)
        }
    }
}

fn svd_ridge(a: &Matrix, y: &Matrix, lambda: f64) -> Result<Matrix> {
    let svd = truncated_svd(a)?;
    let mut uty = svd.u.transpose() * y;
    for (i, s) in svd.s.iter().enumerate() {
        let f = s / (s * s + lambda);
        for j in 0..uty.ncols() {
            uty[(i, j)] *= f;
        }
    }
    Ok(&svd.v * &uty)
}

fn add_to_diagonal(m: &mut Matrix, value: f64) {
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] += value;
    }
}

/// A design matrix together with its pseudoinverse and an orthonormal
/// basis of its column space. The basis is what appends project against:
/// `N − Q·QᵀN` is accurate to round-off in `‖N‖`, where `N − A·A⁺N` loses
/// digits in proportion to the condition number of `A`.
#[derive(Debug, Clone)]
pub struct PinvState {
    pub a: Matrix,
    pub a_pinv: Matrix,
    pub basis: Matrix,
}

impl PinvState {
    pub fn new(a: Matrix) -> Result<Self> {
        let (a_pinv, basis) = pinv_and_basis(&a, 0.0)?;
        Ok(Self { a, a_pinv, basis })
    }

    /// Wrap precomputed parts after checking the shapes agree.
    pub fn from_parts(a: Matrix, a_pinv: Matrix, basis: Matrix) -> Result<Self> {
        if a_pinv.nrows() != a.ncols() || a_pinv.ncols() != a.nrows() {
            return Err(BlsError::dim(format!(
                "pseudoinverse is {}x{} but matrix is {}x{}",
                a_pinv.nrows(),
                a_pinv.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if basis.nrows() != a.nrows() || basis.ncols() > a.nrows().min(a.ncols()) {
            return Err(BlsError::dim(format!(
                "range basis is {}x{} for a {}x{} matrix",
                basis.nrows(),
                basis.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { a, a_pinv, basis })
    }

    /// Numerical rank, the width of the range basis.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Relative Frobenius residuals of the four Moore-Penrose conditions:
    /// `AA⁺A = A`, `A⁺AA⁺ = A⁺`, `(AA⁺)ᵀ = AA⁺`, `(A⁺A)ᵀ = A⁺A`.
    pub fn moore_penrose_residuals(&self) -> [f64; 4] {
        moore_penrose_residuals(&self.a, &self.a_pinv)
    }
}

pub fn moore_penrose_residuals(a: &Matrix, p: &Matrix) -> [f64; 4] {
    let ap = a * p;
    let pa = p * a;
    let r1 = relative_diff(&(&ap * a), a);
    let r2 = relative_diff(&(&pa * p), p);
    let r3 = relative_diff(&ap.transpose().to_owned(), &ap);
    let r4 = relative_diff(&pa.transpose().to_owned(), &pa);
    [r1, r2, r3, r4]
}

/// Which case of the block update an append fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendBranch {
    /// `C` has full column rank: `Bᵀ = C⁺`.
    Independent,
    /// `C` vanishes (new columns lie in the span of `A`):
    /// `Bᵀ = (I + DᵀD)⁻¹ Dᵀ A⁺`.
    Dependent,
    /// `C` is nonzero but rank deficient; general form.
    Mixed,
    /// The update failed its accuracy probe and the pseudoinverse was
    /// recomputed from the full design matrix.
    Refactored,
    /// Nothing was appended.
    Empty,
}

/// The `D` and `Bᵀ` blocks of one append step.
#[derive(Debug, Clone)]
pub struct BlockFactors {
    pub d: Matrix,
    pub bt: Matrix,
    pub branch: AppendBranch,
    /// The recomputed pseudoinverse when `branch` is `Refactored`.
    pub refactored: Option<Matrix>,
}

impl BlockFactors {
    /// Output weights after the append: `[W_old − D·Bᵀ·Y ; Bᵀ·Y]`.
    pub fn output_weights(&self, w_old: &Matrix, y: &Matrix) -> Result<Matrix> {
        if w_old.nrows() != self.d.nrows() || w_old.ncols() != y.ncols() {
            return Err(BlsError::dim(format!(
                "old weights {}x{} do not fit an append over {} columns with {} targets",
                w_old.nrows(),
                w_old.ncols(),
                self.d.nrows(),
                y.ncols()
            )));
        }
        if y.nrows() != self.bt.ncols() {
            return Err(BlsError::dim(format!(
                "targets have {} rows, expected {}",
                y.nrows(),
                self.bt.ncols()
            )));
        }
        if let Some(full) = &self.refactored {
            return Ok(full * y);
        }
        let bty = &self.bt * y;
        let top = w_old - &self.d * &bty;
        vcat(&top, &bty)
    }
}

/// Rank tolerance for the residual `C = N − Q·QᵀN` of an appended block
/// `N`, relative to `‖N‖_F`, where `Q` spans the current columns. `C`
/// counts as zero below it, and singular values of `C` below it are
/// dropped, so a round-off residual of columns already in the span is
/// never inverted as a real direction.
pub const C_RANK_RTOL: f64 = 1e-8;

/// Append `new_cols` to the design matrix and update its pseudoinverse
/// without refactoring the existing columns. Returns the new state and
/// the block factors needed to update output weights.
pub fn append_columns(state: &PinvState, new_cols: &Matrix) -> Result<(PinvState, BlockFactors)> {
    let (m, k) = (state.a.nrows(), state.a.ncols());
    if new_cols.nrows() != m {
        return Err(BlsError::dim(format!(
            "appended block has {} rows, design matrix has {m}",
            new_cols.nrows()
        )));
    }
    ensure_finite(new_cols, "appended columns")?;
    let q = new_cols.ncols();
    if q == 0 {
        let factors = BlockFactors {
            d: Matrix::zeros(k, 0),
            bt: Matrix::zeros(0, m),
            branch: AppendBranch::Empty,
            refactored: None,
        };
        return Ok((state.clone(), factors));
    }

    let mut d = &state.a_pinv * new_cols;
    let q_basis = &state.basis;
    let c = new_cols - q_basis * (q_basis.transpose() * new_cols);
    let c_norm = frobenius(&c);
    let threshold = C_RANK_RTOL * frobenius(new_cols);

    let (bt, branch, basis) = if c_norm <= threshold {
        refine(&mut d, state, new_cols);
        (dependent_bt(&d, &state.a_pinv)?, AppendBranch::Dependent, state.basis.clone())
    } else {
        let svd = truncated_svd_floor(&c, threshold)?;
        let c_pinv = pinv_from_svd(&svd);
        // the new directions, projected once more so the basis stays orthogonal
        let fresh = &svd.u - q_basis * (q_basis.transpose() * &svd.u);
        let basis = hcat(q_basis, &fresh)?;
        if svd.s.len() == q {
            (c_pinv, AppendBranch::Independent, basis)
        } else {
            refine(&mut d, state, new_cols);
            // P = I − C⁺C = I − V·Vᵀ over the kept right singular vectors
            let mut p = -(&svd.v * svd.v.transpose());
            add_to_diagonal(&mut p, 1.0);
            (mixed_bt(&d, &state.a_pinv, &c_pinv, &p)?, AppendBranch::Mixed, basis)
        }
    };

    let top = &state.a_pinv - &d * &bt;
    let a_pinv = vcat(&top, &bt)?;
    let a = hcat(&state.a, new_cols)?;
    let probe = pinv_probe(&a, &a_pinv);
    if probe > REFACTOR_TOL {
        log::debug!("block update probe {probe:.2e} over {REFACTOR_TOL:.0e}; refactoring");
        let fresh = PinvState::new(a)?;
        let bt = fresh.a_pinv.subrows(k, q).to_owned();
        let factors = BlockFactors {
            d,
            bt,
            branch: AppendBranch::Refactored,
            refactored: Some(fresh.a_pinv.clone()),
        };
        return Ok((fresh, factors));
    }
    Ok((PinvState { a, a_pinv, basis }, BlockFactors { d, bt, branch, refactored: None }))
}

/// Largest accepted [`pinv_probe`] value before an append falls back to a
/// full SVD. The block update loses accuracy roughly with the square of the
/// condition number of the grown matrix, where the SVD loses it linearly,
/// so very ill-conditioned designs need the fallback.
pub const REFACTOR_TOL: f64 = 1e-9;

/// Cheap estimate of `‖X·A·X − X‖ / ‖X‖` from two fixed random probe
/// vectors, three matrix-vector products each.
pub fn pinv_probe(a: &Matrix, x: &Matrix) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_9b0e);
    let h = Matrix::from_fn(a.nrows(), 2, |_, _| rng.random_range(-1.0..1.0));
    let xh = x * &h;
    let norm = frobenius(&xh);
    if norm == 0.0 {
        return 0.0;
    }
    let back = x * (a * &xh);
    frobenius(&(&back - &xh)) / norm
}

/// One step of iterative refinement of `D = A⁺N`. The dependent and mixed
/// forms are sensitive to its error; the independent form is not, and is
/// checked by the probe anyway.
fn refine(d: &mut Matrix, state: &PinvState, new_cols: &Matrix) {
    let r = new_cols - &state.a * &*d;
    *d += &state.a_pinv * &r;
}

/// `(I + DᵀD)⁻¹ Dᵀ A⁺`
fn dependent_bt(d: &Matrix, a_pinv: &Matrix) -> Result<Matrix> {
    damped_lstsq(d, a_pinv)
}

/// General case: `Bᵀ = C⁺ + P K Dᵀ A⁺ (I − N C⁺)` with
/// `K = (I + P DᵀD P)⁻¹` and `P = I − C⁺C`. Since P is a projector, K
/// commutes with it and the second term is `(I + EᵀE)⁻¹ Eᵀ (A⁺ − D C⁺)`
/// with `E = D P`.
fn mixed_bt(d: &Matrix, a_pinv: &Matrix, c_pinv: &Matrix, p: &Matrix) -> Result<Matrix> {
    let e = d * p;
    let x = a_pinv - d * c_pinv;
    Ok(c_pinv + damped_lstsq(&e, &x)?)
}

/// `(I + EᵀE)⁻¹ Eᵀ X`, the minimiser of `‖E Z − X‖² + ‖Z‖²`, through the
/// SVD of `E` with filter factors `σ/(1 + σ²)`. `E` can be large when A is
/// ill-conditioned; the normal equations square its condition number and
/// even QR pays for it here, since the residual is not small.
fn damped_lstsq(e: &Matrix, x: &Matrix) -> Result<Matrix> {
    record_svd(e.nrows(), e.ncols());
    let svd = e
        .thin_svd()
        .map_err(|err| BlsError::Numeric(format!("SVD did not converge: {err:?}")))?;
    let mut utx = svd.U().transpose() * x;
    for i in 0..utx.nrows() {
        let s = svd.S()[i];
        let f = s / (1.0 + s * s);
        utx.row_mut(i).iter_mut().for_each(|v| *v *= f);
    }
    let z = svd.V() * &utx;
    ensure_finite(&z, "block update")?;
    Ok(z)
}

/// Append columns and return only the updated state.
pub fn pinv_append_columns(state: &PinvState, new_cols: &Matrix) -> Result<PinvState> {
    append_columns(state, new_cols).map(|(s, _)| s)
}

/// Output weights of `[A | new_cols]` from the weights of `A`, using the
/// same block factors as [`pinv_append_columns`]. `state` is the state
/// *before* the append.
pub fn update_output_weights(
    w_old: &Matrix,
    state: &PinvState,
    new_cols: &Matrix,
    y: &Matrix,
) -> Result<Matrix> {
    if w_old.nrows() != state.a.ncols() {
        return Err(BlsError::dim(format!(
            "old weights have {} rows, design matrix has {} columns",
            w_old.nrows(),
            state.a.ncols()
        )));
    }
    if y.nrows() != state.a.nrows() {
        return Err(BlsError::dim(format!(
            "targets have {} rows, design matrix has {}",
            y.nrows(),
            state.a.nrows()
        )));
    }
    let (_, factors) = append_columns(state, new_cols)?;
    factors.output_weights(w_old, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn pinv_of_identity() {
        let i3 = Matrix::identity(3, 3);
        assert!(relative_diff(&pinv(&i3).unwrap(), &i3) < 1e-15);
    }

    #[test]
    fn pinv_of_zero_is_transposed_zero() {
        let p = pinv(&Matrix::zeros(2, 3)).unwrap();
        assert_eq!((p.nrows(), p.ncols()), (3, 2));
        assert_eq!(frobenius(&p), 0.0);
    }

    #[test]
    fn pinv_random_full_rank_conditions() {
        let a = random(20, 5, 1);
        let p = pinv(&a).unwrap();
        for r in moore_penrose_residuals(&a, &p) {
            assert!(r < 1e-10, "{r}");
        }
    }

    #[test]
    fn pinv_rejects_empty_and_nonfinite() {
        assert!(matches!(pinv(&Matrix::zeros(0, 3)), Err(BlsError::Dimension(_))));
        let mut a = Matrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(pinv(&a), Err(BlsError::Value(_))));
    }

    #[test]
    fn ridge_identity_system() {
        let a = Matrix::identity(2, 2);
        let y = from_rows(&[&[3.0], &[4.0]]);
        let w0 = ridge_solve(&a, &y, 0.0).unwrap();
        assert!(relative_diff(&w0, &y) < 1e-15);
        let w1 = ridge_solve(&a, &y, 1.0).unwrap();
        assert!(relative_diff(&w1, &from_rows(&[&[1.5], &[2.0]])) < 1e-15);
    }

    #[test]
    fn ridge_normal_equation_residual() {
        let a = random(50, 10, 2);
        let y = random(50, 3, 3);
        let lambda = 1e-6;
        let w = ridge_solve(&a, &y, lambda).unwrap();
        let mut gram = a.transpose() * &a;
        add_to_diagonal(&mut gram, lambda);
        let resid = &gram * &w - a.transpose() * &y;
        assert!(frobenius(&resid) <= 1e-8);
    }

    #[test]
    fn ridge_wide_dual_form_matches_normal_equations() {
        let a = random(8, 30, 4);
        let y = random(8, 2, 5);
        let lambda = 0.1;
        let w = ridge_solve(&a, &y, lambda).unwrap();
        let mut gram = a.transpose() * &a;
        add_to_diagonal(&mut gram, lambda);
        let resid = &gram * &w - a.transpose() * &y;
        assert!(frobenius(&resid) <= 1e-10);
    }

    #[test]
    fn ridge_row_mismatch() {
        let err = ridge_solve(&Matrix::identity(3, 3), &Matrix::zeros(2, 1), 0.0);
        assert!(matches!(err, Err(BlsError::Dimension(_))));
        let err = ridge_solve(&Matrix::identity(2, 2), &Matrix::zeros(2, 1), -1.0);
        assert!(matches!(err, Err(BlsError::Value(_))));
    }

    #[test]
    fn append_zero_column_to_identity() {
        let state = PinvState::new(Matrix::identity(2, 2)).unwrap();
        let (next, factors) = append_columns(&state, &Matrix::zeros(2, 1)).unwrap();
        assert_eq!(factors.branch, AppendBranch::Dependent);
        let expected = from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        assert!(relative_diff(&next.a_pinv, &expected) < 1e-15);

        let w_old = from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let y = w_old.clone();
        let w = factors.output_weights(&w_old, &y).unwrap();
        let expected_w = from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[0.0, 0.0]]);
        assert!(relative_diff(&w, &expected_w) < 1e-15);
    }

    #[test]
    fn append_independent_columns_matches_batch_pinv() {
        let a = random(20, 5, 6);
        let n = random(20, 3, 7);
        let state = PinvState::new(a.clone()).unwrap();
        let (next, factors) = append_columns(&state, &n).unwrap();
        assert_eq!(factors.branch, AppendBranch::Independent);
        let oracle = pinv(&hcat(&a, &n).unwrap()).unwrap();
        assert!(relative_diff(&next.a_pinv, &oracle) < 1e-9);
    }

    #[test]
    fn append_duplicate_column_takes_dependent_branch() {
        let a = random(20, 5, 8);
        let dup = Matrix::from_fn(20, 1, |i, _| a[(i, 0)]);
        let state = PinvState::new(a.clone()).unwrap();
        let (next, factors) = append_columns(&state, &dup).unwrap();
        assert_eq!(factors.branch, AppendBranch::Dependent);
        let oracle = pinv(&hcat(&a, &dup).unwrap()).unwrap();
        assert!(relative_diff(&next.a_pinv, &oracle) < 1e-8);
    }

    #[test]
    fn append_partly_dependent_block_uses_general_form() {
        let a = random(20, 5, 9);
        let fresh = random(20, 2, 10);
        // one copy of a column of A, one combination, two fresh directions
        let n = Matrix::from_fn(20, 4, |i, j| match j {
            0 => a[(i, 2)],
            1 => fresh[(i, 0)],
            2 => 0.5 * a[(i, 0)] - a[(i, 4)],
            _ => fresh[(i, 1)],
        });
        let state = PinvState::new(a.clone()).unwrap();
        let (next, factors) = append_columns(&state, &n).unwrap();
        assert_eq!(factors.branch, AppendBranch::Mixed);
        let oracle = pinv(&hcat(&a, &n).unwrap()).unwrap();
        assert!(relative_diff(&next.a_pinv, &oracle) < 1e-8);
    }

    #[test]
    fn update_output_weights_matches_resolve() {
        let a = random(30, 6, 11);
        let n = random(30, 4, 12);
        let y = random(30, 3, 13);
        let state = PinvState::new(a.clone()).unwrap();
        let w_old = &state.a_pinv * &y;
        let w_new = update_output_weights(&w_old, &state, &n, &y).unwrap();
        let oracle = ridge_solve(&hcat(&a, &n).unwrap(), &y, 0.0).unwrap();
        assert!(relative_diff(&w_new, &oracle) < 1e-8);

        let dup = Matrix::from_fn(30, 2, |i, j| a[(i, j)] * 2.0);
        let w_dup = update_output_weights(&w_old, &state, &dup, &y).unwrap();
        let oracle = &pinv(&hcat(&a, &dup).unwrap()).unwrap() * &y;
        assert!(relative_diff(&w_dup, &oracle) < 1e-7);
    }

    #[test]
    fn append_row_mismatch() {
        let state = PinvState::new(Matrix::identity(3, 3)).unwrap();
        assert!(matches!(
            append_columns(&state, &Matrix::zeros(2, 1)),
            Err(BlsError::Dimension(_))
        ));
    }

    #[test]
    fn probe_separates_exact_and_perturbed_pinv() {
        let a = random(30, 8, 4);
        let mut p = pinv(&a).unwrap();
        assert!(pinv_probe(&a, &p) < 1e-13);
        p[(2, 5)] += 1e-4;
        assert!(pinv_probe(&a, &p) > REFACTOR_TOL);
    }

    #[test]
    fn svd_counter_tracks_calls() {
        reset_svd_stats();
        pinv(&random(7, 4, 14)).unwrap();
        let st = svd_stats();
        assert_eq!(st.calls, 1);
        assert_eq!(st.max_rank_dim, 4);
    }
}
