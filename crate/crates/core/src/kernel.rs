//! Classic multiply kernels.
//!
//! [`naive_mm`] is the triple-loop oracle every other multiply in the
//! crate is tested against. [`blocked_mm`] is the host kernel: it
//! produces 32x32 output tiles, each computed independently, with the
//! row strips of tiles distributed over threads. Both accumulate along
//! `k` in ascending order per output element, so they agree bit for bit.

use rayon::prelude::*;

use crate::matrix::{MatrixView, MatrixViewMut};
use crate::scalar::Scalar;
use crate::Error;

/// Output tile side of the blocked host kernel.
pub const TILE: usize = 32;

/// Relative Frobenius tolerance for single-precision multiplies at
/// desk scale (inner dimension up to 4096). A testing constant, not a
/// numerical-analysis claim.
pub const REL_TOL_F32: f64 = 1e-4;

fn check_shapes<T: Scalar>(
    c: &MatrixViewMut<'_, T>,
    a: &MatrixView<'_, T>,
    b: &MatrixView<'_, T>,
) -> Result<(usize, usize, usize), Error> {
    let (m, n) = (c.rows(), c.cols());
    let k = a.cols();
    if a.rows() != m || b.rows() != k || b.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "C is {m}x{n}, A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok((m, n, k))
}

/// Handles the degenerate dimensions shared by every multiply:
/// returns `true` when the operation is already complete.
/// With `k == 0` and `accumulate == false` the product is the zero
/// matrix, so C is zeroed.
fn handle_empty<T: Scalar>(
    c: &mut MatrixViewMut<'_, T>,
    m: usize,
    n: usize,
    k: usize,
    accumulate: bool,
) -> bool {
    if m == 0 || n == 0 {
        return true;
    }
    if k == 0 {
        if !accumulate {
            c.fill(T::zero());
        }
        return true;
    }
    false
}

/// Triple-loop matrix multiply: `C = A*B`, or `C += A*B` when
/// `accumulate`. This is the correctness oracle for the whole crate.
pub fn naive_mm<T: Scalar>(
    mut c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
) -> Result<(), Error> {
    let (m, n, k) = check_shapes(&c, &a, &b)?;
    if handle_empty(&mut c, m, n, k, accumulate) {
        return Ok(());
    }
    for i in 0..m {
        let arow = a.row(i);
        for j in 0..n {
            let mut acc = T::zero();
            for (kk, &aik) in arow.iter().enumerate() {
                acc += aik * b.at(kk, j);
            }
            if accumulate {
                let v = c.at(i, j) + acc;
                c.set(i, j, v);
            } else {
                c.set(i, j, acc);
            }
        }
    }
    Ok(())
}

/// Blocked host kernel: 32x32 output tiles, row strips in parallel.
///
/// Each output element still sums its `k` products in ascending order,
/// so the result is identical to [`naive_mm`] bit for bit regardless of
/// how strips are scheduled.
pub fn blocked_mm<T: Scalar>(
    mut c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
) -> Result<(), Error> {
    let (m, n, k) = check_shapes(&c, &a, &b)?;
    if handle_empty(&mut c, m, n, k, accumulate) {
        return Ok(());
    }

    // Carve C into disjoint strips of up to TILE rows.
    let mut strips = Vec::with_capacity(m.div_ceil(TILE));
    let mut rest = c;
    let mut row0 = 0;
    while row0 < m {
        let h = TILE.min(m - row0);
        let (strip, below) = rest.split_rows_at(h);
        strips.push((row0, strip));
        rest = below;
        row0 += h;
    }

    strips.par_iter_mut().for_each(|(row0, strip)| {
        mul_strip(strip, *row0, a, b, accumulate);
    });
    Ok(())
}

/// One strip of up to TILE rows: iterate column tiles, accumulate each
/// row of the tile over `k` with the inner loop on columns so it
/// vectorizes.
fn mul_strip<T: Scalar>(
    c: &mut MatrixViewMut<'_, T>,
    strip_row0: usize,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
) {
    let rows = c.rows();
    let n = c.cols();
    let k = a.cols();
    let mut acc = [T::zero(); TILE];
    let mut col0 = 0;
    while col0 < n {
        let w = TILE.min(n - col0);
        for i in 0..rows {
            let arow = &a.row(strip_row0 + i)[..k];
            acc[..w].fill(T::zero());
            for (kk, &aik) in arow.iter().enumerate() {
                let brow = &b.row(kk)[col0..col0 + w];
                for (dst, &bkj) in acc[..w].iter_mut().zip(brow) {
                    *dst += aik * bkj;
                }
            }
            let crow = &mut c.row_mut(i)[col0..col0 + w];
            if accumulate {
                for (dst, &v) in crow.iter_mut().zip(&acc[..w]) {
                    *dst += v;
                }
            } else {
                crow.copy_from_slice(&acc[..w]);
            }
        }
        col0 += w;
    }
}

/// Relative Frobenius error `||X - Y||_F / max(||Y||_F, tiny)`.
///
/// Accumulates in f64 whatever the element type; `tiny` guards the
/// all-zero reference.
pub fn rel_error<T: Scalar>(x: MatrixView<'_, T>, y: MatrixView<'_, T>) -> Result<f64, Error> {
    if (x.rows(), x.cols()) != (y.rows(), y.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "X is {}x{}, Y is {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let mut diff = 0.0f64;
    let mut norm = 0.0f64;
    for i in 0..x.rows() {
        for (&xe, &ye) in x.row(i).iter().zip(y.row(i)) {
            let d = xe.to_f64() - ye.to_f64();
            diff += d * d;
            let yv = ye.to_f64();
            norm += yv * yv;
        }
    }
    Ok(diff.sqrt() / norm.sqrt().max(f64::MIN_POSITIVE))
}
