//! Winograd-variant fast matrix multiplication.
//!
//! One recursion level trades the eight quadrant products of the
//! classic algorithm for seven, at the price of fifteen quadrant-sized
//! additions. Below the cutoff (or at the depth cap) the work is handed
//! to the blocked host kernel. Odd dimensions are handled by dynamic
//! peeling: the even-floored core runs the fast recursion, then the
//! boundary row/column/rank-1 corrections run through the classic
//! kernel.
//!
//! Temporaries come from a caller-provided scratch arena
//! ([`scratch_len`] gives the exact requirement); [`winograd_mm`]
//! allocates it internally for convenience.

use crate::kernel::blocked_mm;
use crate::matrix::{MatrixView, MatrixViewMut};
use crate::scalar::Scalar;
use crate::Error;

/// Recursion control for the fast multiply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FastMMConfig {
    /// Side length at or below which the blocked kernel is used;
    /// recursion fires only while `min(m, n, k) > cutoff`.
    pub cutoff: usize,
    /// Maximum recursion depth.
    pub max_depth: usize,
}

impl FastMMConfig {
    pub fn new(cutoff: usize, max_depth: usize) -> Result<Self, Error> {
        if cutoff < 2 {
            return Err(Error::PolicyConfig(format!(
                "fast-mm cutoff must be at least 2, got {cutoff}"
            )));
        }
        Ok(FastMMConfig { cutoff, max_depth })
    }

    fn recurses(&self, m: usize, n: usize, k: usize, depth: usize) -> bool {
        depth < self.max_depth && m.min(n).min(k) > self.cutoff
    }
}

impl Default for FastMMConfig {
    fn default() -> Self {
        FastMMConfig {
            cutoff: 64,
            max_depth: 64,
        }
    }
}

/// Exact scratch requirement (in elements) of
/// [`winograd_mm_with_scratch`] for an `m x k` by `k x n` product.
///
/// Per recursion level the schedule keeps one half-size A-shaped
/// buffer, one B-shaped buffer and two C-shaped product buffers alive
/// across the seven sub-products, so the requirement is the sum of
/// `m/2*k/2 + k/2*n/2 + 2*(m/2*n/2)` along the deepest path.
pub fn scratch_len(m: usize, n: usize, k: usize, cfg: &FastMMConfig) -> usize {
    let mut total = 0;
    let (mut m, mut n, mut k) = (m, n, k);
    let mut depth = 0;
    while cfg.recurses(m, n, k, depth) {
        let (m2, n2, k2) = (m / 2, n / 2, k / 2);
        total += m2 * k2 + k2 * n2 + 2 * m2 * n2;
        m = m2;
        n = n2;
        k = k2;
        depth += 1;
    }
    total
}

/// Fast multiply `C = A*B`; allocates its scratch arena internally.
pub fn winograd_mm<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    cfg: &FastMMConfig,
) -> Result<(), Error> {
    let mut scratch = vec![T::zero(); scratch_len(c.rows(), c.cols(), a.cols(), cfg)];
    winograd_mm_with_scratch(c, a, b, cfg, &mut scratch)
}

/// Fast multiply with a caller-provided arena of at least
/// [`scratch_len`] elements.
pub fn winograd_mm_with_scratch<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    cfg: &FastMMConfig,
    scratch: &mut [T],
) -> Result<(), Error> {
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
    let need = scratch_len(m, n, k, cfg);
    if scratch.len() < need {
        return Err(Error::ShapeMismatch(format!(
            "scratch holds {} elements, need {need}",
            scratch.len()
        )));
    }
    recurse(c, a, b, false, cfg, 0, scratch);
    Ok(())
}

/// A scratch-backed dense buffer viewed as a matrix. Plain slices with
/// `lead_dim == cols`; carved off the front of the arena.
struct ScratchMat<'s, T> {
    data: &'s mut [T],
    rows: usize,
    cols: usize,
}

impl<'s, T: Scalar> ScratchMat<'s, T> {
    fn carve(arena: &'s mut [T], rows: usize, cols: usize) -> (Self, &'s mut [T]) {
        let (data, rest) = arena.split_at_mut(rows * cols);
        (ScratchMat { data, rows, cols }, rest)
    }

    #[inline]
    fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn as_view(&self) -> MatrixView<'_, T> {
        unsafe { crate::matrix::raw_view(self.data.as_ptr(), self.rows, self.cols, self.cols) }
    }

    fn as_view_mut(&mut self) -> MatrixViewMut<'_, T> {
        unsafe {
            crate::matrix::raw_view_mut(self.data.as_mut_ptr(), self.rows, self.cols, self.cols)
        }
    }
}

fn recurse<T: Scalar>(
    mut c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
    cfg: &FastMMConfig,
    depth: usize,
    scratch: &mut [T],
) {
    let (m, n) = (c.rows(), c.cols());
    let k = a.cols();
    if !cfg.recurses(m, n, k, depth) {
        // Shapes were validated at entry; sub-shapes are consistent by
        // construction.
        blocked_mm(c, a, b, accumulate).expect("consistent sub-shapes");
        return;
    }

    // Peel to the even-floored core.
    let (mc, nc, kc) = (m & !1, n & !1, k & !1);
    let core_c = c.reborrow().into_subview(0, 0, mc, nc);
    let core_a = a.subview(0, 0, mc, kc);
    let core_b = b.subview(0, 0, kc, nc);
    winograd_step(core_c, core_a, core_b, accumulate, cfg, depth, scratch);

    if kc < k {
        // Rank-1 correction over the core block: C[..mc, ..nc] += a_last_col * b_last_row.
        let ca = a.subview(0, kc, mc, k - kc);
        let cb = b.subview(kc, 0, k - kc, nc);
        blocked_mm(c.reborrow().into_subview(0, 0, mc, nc), ca, cb, true)
            .expect("consistent sub-shapes");
    }
    if mc < m {
        // Last row strip of C, full width, full depth k.
        let ra = a.subview(mc, 0, m - mc, k);
        blocked_mm(c.reborrow().into_subview(mc, 0, m - mc, n), ra, b, accumulate)
            .expect("consistent sub-shapes");
    }
    if nc < n {
        // Last column strip of the core rows, full depth k.
        let cb = b.subview(0, nc, k, n - nc);
        blocked_mm(
            c.reborrow().into_subview(0, nc, mc, n - nc),
            a.subview(0, 0, mc, k),
            cb,
            accumulate,
        )
        .expect("consistent sub-shapes");
    }
}

/// One Winograd level on even dimensions: 7 recursive products and 15
/// quadrant-sized additions, using sa (A-shaped), tb (B-shaped) and
/// u, v (C-shaped) temporaries from the arena.
fn winograd_step<T: Scalar>(
    c: MatrixViewMut<'_, T>,
    a: MatrixView<'_, T>,
    b: MatrixView<'_, T>,
    accumulate: bool,
    cfg: &FastMMConfig,
    depth: usize,
    scratch: &mut [T],
) {
    let (m, n) = (c.rows(), c.cols());
    let k = a.cols();
    debug_assert!(m.is_multiple_of(2) && n.is_multiple_of(2) && k.is_multiple_of(2));
    let (m2, n2, k2) = (m / 2, n / 2, k / 2);

    let aq = a.split_quadrants();
    let bq = b.split_quadrants();
    let mut cq = c.split_quadrants();

    let (mut sa, rest) = ScratchMat::carve(scratch, m2, k2);
    let (mut tb, rest) = ScratchMat::carve(rest, k2, n2);
    let (mut u, rest) = ScratchMat::carve(rest, m2, n2);
    let (mut v, rest) = ScratchMat::carve(rest, m2, n2);

    // u <- A0*B0                                   (product 1)
    recurse(u.as_view_mut(), aq.q0, bq.q0, false, cfg, depth + 1, rest);
    // C0 gets product 1 ...
    copy_or_add(&mut cq.q0, &u, accumulate);
    // ... plus A1*B2 accumulated in place          (product 2)
    recurse(cq.q0.reborrow(), aq.q1, bq.q2, true, cfg, depth + 1, rest);

    // sa <- A2 + A3, tb <- B1 - B0
    ew_views(&mut sa, aq.q2, aq.q3, |x, y| x + y);
    ew_views(&mut tb, bq.q1, bq.q0, |x, y| x - y);
    // v <- sa*tb                                   (product 5)
    recurse(v.as_view_mut(), sa.as_view(), tb.as_view(), false, cfg, depth + 1, rest);

    // sa <- sa - A0, tb <- B3 - tb
    ew_update(&mut sa, aq.q0, |s, x| s - x);
    ew_update(&mut tb, bq.q3, |t, x| x - t);
    // u += sa*tb                                   (product 6)
    recurse(u.as_view_mut(), sa.as_view(), tb.as_view(), true, cfg, depth + 1, rest);

    // C1 gets u + v ...
    combine_into(&mut cq.q1, &u, &v, true, accumulate);
    // ... plus (A1 - sa)*B3: sa <- A1 - sa         (product 3)
    ew_update(&mut sa, aq.q1, |s, x| x - s);
    recurse(cq.q1.reborrow(), sa.as_view(), bq.q3, true, cfg, depth + 1, rest);

    // sa <- A0 - A2, tb <- B3 - B1
    ew_views(&mut sa, aq.q0, aq.q2, |x, y| x - y);
    ew_views(&mut tb, bq.q3, bq.q1, |x, y| x - y);
    // u += sa*tb                                   (product 7)
    recurse(u.as_view_mut(), sa.as_view(), tb.as_view(), true, cfg, depth + 1, rest);

    // C3 gets u + v.
    combine_into(&mut cq.q3, &u, &v, true, accumulate);

    // tb <- tb + B0 - B2, then v <- A3*tb          (product 4)
    ew_update2(&mut tb, bq.q0, bq.q2, |t, x, y| t + x - y);
    recurse(v.as_view_mut(), aq.q3, tb.as_view(), false, cfg, depth + 1, rest);

    // C2 gets u - v.
    combine_into(&mut cq.q2, &u, &v, false, accumulate);
}

fn copy_or_add<T: Scalar>(c: &mut MatrixViewMut<'_, T>, src: &ScratchMat<'_, T>, accumulate: bool) {
    for i in 0..c.rows() {
        let crow = c.row_mut(i);
        let srow = src.row(i);
        if accumulate {
            for (d, &s) in crow.iter_mut().zip(srow) {
                *d += s;
            }
        } else {
            crow.copy_from_slice(srow);
        }
    }
}

/// `c (=|+=) u + v` or `u - v`.
fn combine_into<T: Scalar>(
    c: &mut MatrixViewMut<'_, T>,
    u: &ScratchMat<'_, T>,
    v: &ScratchMat<'_, T>,
    plus: bool,
    accumulate: bool,
) {
    for i in 0..c.rows() {
        let crow = c.row_mut(i);
        for (j, d) in crow.iter_mut().enumerate() {
            let w = if plus {
                u.row(i)[j] + v.row(i)[j]
            } else {
                u.row(i)[j] - v.row(i)[j]
            };
            if accumulate {
                *d += w;
            } else {
                *d = w;
            }
        }
    }
}

/// `dst <- f(x, y)` elementwise over two views.
fn ew_views<T: Scalar>(
    dst: &mut ScratchMat<'_, T>,
    x: MatrixView<'_, T>,
    y: MatrixView<'_, T>,
    f: impl Fn(T, T) -> T,
) {
    for i in 0..dst.rows {
        let xrow = x.row(i);
        let yrow = y.row(i);
        for (j, d) in dst.row_mut(i).iter_mut().enumerate() {
            *d = f(xrow[j], yrow[j]);
        }
    }
}

/// `dst <- f(dst, x)` elementwise.
fn ew_update<T: Scalar>(dst: &mut ScratchMat<'_, T>, x: MatrixView<'_, T>, f: impl Fn(T, T) -> T) {
    for i in 0..dst.rows {
        let xrow = x.row(i);
        for (j, d) in dst.row_mut(i).iter_mut().enumerate() {
            *d = f(*d, xrow[j]);
        }
    }
}

/// `dst <- f(dst, x, y)` elementwise.
fn ew_update2<T: Scalar>(
    dst: &mut ScratchMat<'_, T>,
    x: MatrixView<'_, T>,
    y: MatrixView<'_, T>,
    f: impl Fn(T, T, T) -> T,
) {
    for i in 0..dst.rows {
        let xrow = x.row(i);
        let yrow = y.row(i);
        for (j, d) in dst.row_mut(i).iter_mut().enumerate() {
            *d = f(*d, xrow[j], yrow[j]);
        }
    }
}

/// Multiply-add count of [`winograd_mm`] on an `n x n` problem, `n` a
/// power of two: `F(n) = 7 F(n/2) + 15 (n/2)^2` while recursion fires,
/// `F(n) = 2n^3 - n^2` at the base.
pub fn flop_count_fast(n: usize, cfg: &FastMMConfig) -> u64 {
    fn go(n: u64, cfg: &FastMMConfig, depth: usize) -> u64 {
        if depth < cfg.max_depth && n > cfg.cutoff as u64 {
            let h = n / 2;
            7 * go(h, cfg, depth + 1) + 15 * h * h
        } else {
            2 * n * n * n - n * n
        }
    }
    go(n as u64, cfg, 0)
}
