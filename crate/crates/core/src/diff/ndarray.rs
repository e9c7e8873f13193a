//! Dense row-major arrays of `Real` values.

/// Element type of all tensors. `f64` by default so finite-difference
/// gradient checks are trustworthy; the `f32` feature trades precision
/// for memory.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

/// A dense array with explicit shape. Row-major storage; the product of
/// the extents always equals the value count.
#[derive(Debug, Clone, PartialEq)]
pub struct NdArray {
    shape: Vec<usize>,
    data: Vec<Real>,
}

impl NdArray {
    pub fn new(shape: Vec<usize>, data: Vec<Real>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "NdArray: shape {:?} implies {} values, got {}",
            shape,
            numel,
            data.len()
        );
        NdArray { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        NdArray { shape: shape.to_vec(), data: vec![0.0; numel] }
    }

    pub fn filled(shape: &[usize], value: Real) -> Self {
        let numel: usize = shape.iter().product();
        NdArray { shape: shape.to_vec(), data: vec![value; numel] }
    }

    pub fn scalar(value: Real) -> Self {
        NdArray { shape: vec![], data: vec![value] }
    }

    pub fn vector(data: Vec<Real>) -> Self {
        NdArray { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<Real>) -> Self {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<Real>]) -> Self {
        assert!(!rows.is_empty(), "NdArray::from_rows: empty row set");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "NdArray::from_rows: ragged rows");
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Real> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.len() <= 1
    }

    pub fn scalar_value(&self) -> Real {
        assert!(self.is_scalar(), "expected scalar, shape {:?}", self.shape);
        self.data[0]
    }

    /// Rows of a 2-D array (or 1 for a vector treated as a single row).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            2 => self.shape[0],
            _ => panic!("rows(): expected 1-D or 2-D, shape {:?}", self.shape),
        }
    }

    /// Last-axis extent of a 1-D or 2-D array.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => self.shape[0],
            2 => self.shape[1],
            _ => panic!("cols(): expected 1-D or 2-D, shape {:?}", self.shape),
        }
    }

    pub fn row(&self, i: usize) -> &[Real] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn at2(&self, i: usize, j: usize) -> Real {
        debug_assert_eq!(self.ndim(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn transposed(&self) -> NdArray {
        assert_eq!(self.ndim(), 2, "transposed(): shape {:?}", self.shape);
        let (n, m) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = self.data[i * m + j];
            }
        }
        NdArray::new(vec![m, n], out)
    }

    pub fn map(&self, f: impl Fn(Real) -> Real) -> NdArray {
        NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<usize> for NdArray {
    type Output = Real;
    fn index(&self, i: usize) -> &Real {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for NdArray {
    fn index_mut(&mut self, i: usize) -> &mut Real {
        &mut self.data[i]
    }
}
