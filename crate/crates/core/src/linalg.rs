use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

/// Solves `min ||A b - Y||² + lambda ||b||²` for every column of `Y`.
pub(crate) fn ridge_solve(a: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, lambda: f64) -> Array2<f64> {
    let am = to_nalgebra(a);
    let ym = to_nalgebra(y);
    let at = am.transpose();
    let mut gram = &at * &am;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = &at * &ym;
    let coef = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.svd(true, true).solve(&rhs, 1e-12).expect("SVD computed with both factors"),
    };
    from_nalgebra(&coef)
}

pub(crate) fn to_nalgebra(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}
