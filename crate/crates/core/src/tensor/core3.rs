use nalgebra::{DMatrix, DMatrixView};

/// A three-way core of shape (left, mode, right).
///
/// Storage is column-major with the left rank index fastest, so the left
/// unfolding `(left*mode) x right` and the right unfolding
/// `left x (mode*right)` are both plain column-major views of `data`.
#[derive(Clone, Debug, PartialEq)]
pub struct Core3 {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core3 {
    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Self {
            left,
            mode,
            right,
            data: vec![0.0; left * mode * right],
        }
    }

    pub fn from_fn(
        left: usize,
        mode: usize,
        right: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut core = Self::zeros(left, mode, right);
        for b in 0..right {
            for i in 0..mode {
                for a in 0..left {
                    core.data[a + left * (i + mode * b)] = f(a, i, b);
                }
            }
        }
        core
    }

    /// Wraps column-major data laid out as described on the type.
    pub fn from_data(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), left * mode * right, "core data length mismatch");
        Self {
            left,
            mode,
            right,
            data,
        }
    }

    /// Reinterprets a matrix with `left*mode` rows as a core.
    pub fn from_left_unfolding(m: DMatrix<f64>, left: usize, mode: usize) -> Self {
        assert_eq!(m.nrows(), left * mode);
        let right = m.ncols();
        Self::from_data(left, mode, right, m.data.into())
    }

    /// Reinterprets a matrix with `mode*right` columns as a core.
    pub fn from_right_unfolding(m: DMatrix<f64>, mode: usize, right: usize) -> Self {
        assert_eq!(m.ncols(), mode * right);
        let left = m.nrows();
        Self::from_data(left, mode, right, m.data.into())
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left
    }

    #[inline]
    pub fn mode(&self) -> usize {
        self.mode
    }

    #[inline]
    pub fn right(&self) -> usize {
        self.right
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.mode, self.right)
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[a + self.left * (i + self.mode * b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, value: f64) {
        self.data[a + self.left * (i + self.mode * b)] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn left_unfolding(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.data, self.left * self.mode, self.right)
    }

    pub fn right_unfolding(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.data, self.left, self.mode * self.right)
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += factor * other`, shapes must match.
    pub fn add_scaled(&mut self, other: &Core3, factor: f64) {
        assert_eq!(self.shape(), other.shape());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += factor * y;
        }
    }
}
