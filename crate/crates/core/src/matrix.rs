//! Dense row-major matrix storage and zero-copy rectangular views.
//!
//! A [`Matrix`] owns a contiguous buffer with an explicit leading
//! dimension (row stride), so any rectangular window of it — in
//! particular the four quadrants of the recursive algorithms — is a
//! strided view with no copying. Views come in shared
//! ([`MatrixView`]) and exclusive ([`MatrixViewMut`]) flavors; an
//! exclusive view can be split into four disjoint exclusive quadrants,
//! which is what lets two engines write different quadrants of the same
//! output concurrently.

use std::fmt::Write as _;
use std::marker::PhantomData;

use crate::scalar::Scalar;
use crate::Error;

/// Owned dense matrix, row-major with explicit leading dimension.
///
/// Zero-sized matrices (zero rows and/or columns) are legal everywhere;
/// operations on them are no-ops.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    lead_dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    /// All-zero matrix with `lead_dim == cols`.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::zeros_with_lead_dim(rows, cols, cols)
    }

    /// All-zero matrix with a wider row stride (`lead_dim >= cols`).
    pub fn zeros_with_lead_dim(rows: usize, cols: usize, lead_dim: usize) -> Self {
        assert!(lead_dim >= cols, "lead_dim {lead_dim} < cols {cols}");
        Matrix {
            rows,
            cols,
            lead_dim,
            data: vec![T::zero(); rows * lead_dim],
        }
    }

    /// Builds from row-major data with `lead_dim == cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, Error> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix {
            rows,
            cols,
            lead_dim: cols,
            data,
        })
    }

    /// Builds element-wise from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lead_dim(&self) -> usize {
        self.lead_dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(i < self.rows && j < self.cols);
        self.data[i * self.lead_dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(i < self.rows && j < self.cols);
        self.data[i * self.lead_dim + j] = v;
    }

    /// Shared view of the whole matrix.
    pub fn view(&self) -> MatrixView<'_, T> {
        MatrixView {
            ptr: self.data.as_ptr(),
            rows: self.rows,
            cols: self.cols,
            lead_dim: self.lead_dim,
            row_off: 0,
            col_off: 0,
            _marker: PhantomData,
        }
    }

    /// Exclusive view of the whole matrix.
    pub fn view_mut(&mut self) -> MatrixViewMut<'_, T> {
        MatrixViewMut {
            ptr: self.data.as_mut_ptr(),
            rows: self.rows,
            cols: self.cols,
            lead_dim: self.lead_dim,
            row_off: 0,
            col_off: 0,
            _marker: PhantomData,
        }
    }

    /// Parses the text fixture format: first line `rows cols`, then
    /// `rows` lines of space-separated decimals.
    pub fn parse_text(text: &str) -> Result<Self, Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty fixture".into()))?;
        let mut it = header.split_whitespace();
        let rows: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let cols: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        if it.next().is_some() {
            return Err(Error::Parse(format!("trailing tokens in header {header:?}")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {i}")))?;
            let mut count = 0;
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number {tok:?} in row {i}")))?;
                data.push(T::from_f64(v));
                count += 1;
            }
            if count != cols {
                return Err(Error::Parse(format!(
                    "row {i} has {count} values, expected {cols}"
                )));
            }
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing rows in fixture".into()));
        }
        Self::from_vec(rows, cols, data)
    }

    /// Writes the text fixture format; round-trips through
    /// [`Matrix::parse_text`] exactly (shortest float formatting).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }
}

/// Shared strided view into a [`Matrix`].
///
/// `row_off`/`col_off` record where the view sits inside the matrix it
/// was carved from, so queue logs and traces can reason about write
/// sets geometrically.
pub struct MatrixView<'a, T> {
    ptr: *const T,
    rows: usize,
    cols: usize,
    lead_dim: usize,
    row_off: usize,
    col_off: usize,
    _marker: PhantomData<&'a T>,
}

impl<T> Clone for MatrixView<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for MatrixView<'_, T> {}

// A shared view only ever reads.
unsafe impl<T: Sync> Send for MatrixView<'_, T> {}
unsafe impl<T: Sync> Sync for MatrixView<'_, T> {}

impl<'a, T: Scalar> MatrixView<'a, T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lead_dim(&self) -> usize {
        self.lead_dim
    }

    /// Row offset relative to the root matrix.
    pub fn row_off(&self) -> usize {
        self.row_off
    }

    /// Column offset relative to the root matrix.
    pub fn col_off(&self) -> usize {
        self.col_off
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.rows && j < self.cols);
        unsafe { *self.ptr.add(i * self.lead_dim + j) }
    }

    /// Row `i` as a contiguous slice of length `cols`.
    #[inline]
    pub fn row(&self, i: usize) -> &'a [T] {
        assert!(i < self.rows);
        unsafe { std::slice::from_raw_parts(self.ptr.add(i * self.lead_dim), self.cols) }
    }

    /// Rectangular sub-view; aliases the same storage.
    pub fn subview(&self, row: usize, col: usize, rows: usize, cols: usize) -> MatrixView<'a, T> {
        assert!(row + rows <= self.rows && col + cols <= self.cols);
        MatrixView {
            ptr: unsafe { self.ptr.add(row * self.lead_dim + col) },
            rows,
            cols,
            lead_dim: self.lead_dim,
            row_off: self.row_off + row,
            col_off: self.col_off + col,
            _marker: PhantomData,
        }
    }

    /// Quadrant split: q0 gets the ceil halves, q3 the floor halves.
    pub fn split_quadrants(&self) -> Quadrants<MatrixView<'a, T>> {
        let (mt, mb) = split_point(self.rows);
        let (nl, nr) = split_point(self.cols);
        Quadrants {
            q0: self.subview(0, 0, mt, nl),
            q1: self.subview(0, nl, mt, nr),
            q2: self.subview(mt, 0, mb, nl),
            q3: self.subview(mt, nl, mb, nr),
        }
    }
}

/// Exclusive strided view into a [`Matrix`].
pub struct MatrixViewMut<'a, T> {
    ptr: *mut T,
    rows: usize,
    cols: usize,
    lead_dim: usize,
    row_off: usize,
    col_off: usize,
    _marker: PhantomData<&'a mut T>,
}

// An exclusive view is the unique writer of its window.
unsafe impl<T: Send> Send for MatrixViewMut<'_, T> {}

impl<'a, T: Scalar> MatrixViewMut<'a, T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lead_dim(&self) -> usize {
        self.lead_dim
    }

    pub fn row_off(&self) -> usize {
        self.row_off
    }

    pub fn col_off(&self) -> usize {
        self.col_off
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.rows && j < self.cols);
        unsafe { *self.ptr.add(i * self.lead_dim + j) }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.rows && j < self.cols);
        unsafe { *self.ptr.add(i * self.lead_dim + j) = v }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        assert!(i < self.rows);
        unsafe { std::slice::from_raw_parts(self.ptr.add(i * self.lead_dim), self.cols) }
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        assert!(i < self.rows);
        unsafe { std::slice::from_raw_parts_mut(self.ptr.add(i * self.lead_dim), self.cols) }
    }

    /// Shared view of the same window, borrowing this one.
    pub fn as_view(&self) -> MatrixView<'_, T> {
        MatrixView {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            lead_dim: self.lead_dim,
            row_off: self.row_off,
            col_off: self.col_off,
            _marker: PhantomData,
        }
    }

    /// Fresh exclusive view of the same window with a shorter lifetime,
    /// so the original survives being passed to a consuming call.
    pub fn reborrow(&mut self) -> MatrixViewMut<'_, T> {
        MatrixViewMut {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            lead_dim: self.lead_dim,
            row_off: self.row_off,
            col_off: self.col_off,
            _marker: PhantomData,
        }
    }

    /// Exclusive rectangular sub-view, consuming this one.
    pub fn into_subview(
        self,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    ) -> MatrixViewMut<'a, T> {
        assert!(row + rows <= self.rows && col + cols <= self.cols);
        MatrixViewMut {
            ptr: unsafe { self.ptr.add(row * self.lead_dim + col) },
            rows,
            cols,
            lead_dim: self.lead_dim,
            row_off: self.row_off + row,
            col_off: self.col_off + col,
            _marker: PhantomData,
        }
    }

    /// Splits off the first `r` rows; the two views are disjoint.
    pub fn split_rows_at(self, r: usize) -> (MatrixViewMut<'a, T>, MatrixViewMut<'a, T>) {
        assert!(r <= self.rows);
        let top = MatrixViewMut {
            ptr: self.ptr,
            rows: r,
            cols: self.cols,
            lead_dim: self.lead_dim,
            row_off: self.row_off,
            col_off: self.col_off,
            _marker: PhantomData,
        };
        let bottom = MatrixViewMut {
            ptr: unsafe { self.ptr.add(r * self.lead_dim) },
            rows: self.rows - r,
            cols: self.cols,
            lead_dim: self.lead_dim,
            row_off: self.row_off + r,
            col_off: self.col_off,
            _marker: PhantomData,
        };
        (top, bottom)
    }

    /// Quadrant split into four disjoint exclusive views.
    pub fn split_quadrants(self) -> Quadrants<MatrixViewMut<'a, T>> {
        let (mt, mb) = split_point(self.rows);
        let (nl, nr) = split_point(self.cols);
        let base = MatrixViewMut { ..self };
        let sub = |r: usize, c: usize, nrows: usize, ncols: usize| MatrixViewMut {
            ptr: unsafe { base.ptr.add(r * base.lead_dim + c) },
            rows: nrows,
            cols: ncols,
            lead_dim: base.lead_dim,
            row_off: base.row_off + r,
            col_off: base.col_off + c,
            _marker: PhantomData,
        };
        Quadrants {
            q0: sub(0, 0, mt, nl),
            q1: sub(0, nl, mt, nr),
            q2: sub(mt, 0, mb, nl),
            q3: sub(mt, nl, mb, nr),
        }
    }

    pub fn fill(&mut self, v: T) {
        for i in 0..self.rows {
            self.row_mut(i).fill(v);
        }
    }

    /// Copies every element from an equal-shaped source.
    pub fn copy_from(&mut self, src: MatrixView<'_, T>) {
        assert_eq!((self.rows, self.cols), (src.rows(), src.cols()));
        for i in 0..self.rows {
            self.row_mut(i).copy_from_slice(src.row(i));
        }
    }
}

/// The four quadrants of a view: `q0 | q1` over `q2 | q3`.
///
/// `q0` is ceil(m/2) x ceil(n/2) and `q3` is floor(m/2) x floor(n/2);
/// together they tile the parent exactly and disjointly.
#[derive(Debug)]
pub struct Quadrants<V> {
    pub q0: V,
    pub q1: V,
    pub q2: V,
    pub q3: V,
}

/// (ceil(n/2), floor(n/2))
#[inline]
pub fn split_point(n: usize) -> (usize, usize) {
    (n - n / 2, n / 2)
}

/// View over raw storage (scratch arenas, staging buffers).
///
/// Safety: `ptr` must stay valid and unaliased-for-writes for rows x
/// lead_dim elements while the view lives.
pub(crate) unsafe fn raw_view<'a, T>(
    ptr: *const T,
    rows: usize,
    cols: usize,
    lead_dim: usize,
) -> MatrixView<'a, T> {
    MatrixView {
        ptr,
        rows,
        cols,
        lead_dim,
        row_off: 0,
        col_off: 0,
        _marker: PhantomData,
    }
}

/// Exclusive view over raw storage; same contract as [`raw_view`],
/// plus exclusivity of writes.
pub(crate) unsafe fn raw_view_mut<'a, T>(
    ptr: *mut T,
    rows: usize,
    cols: usize,
    lead_dim: usize,
) -> MatrixViewMut<'a, T> {
    MatrixViewMut {
        ptr,
        rows,
        cols,
        lead_dim,
        row_off: 0,
        col_off: 0,
        _marker: PhantomData,
    }
}

/// Quadrant split of a shared view; free-function form of
/// [`MatrixView::split_quadrants`].
pub fn split_quadrants<'a, T: Scalar>(d: MatrixView<'a, T>) -> Quadrants<MatrixView<'a, T>> {
    d.split_quadrants()
}
