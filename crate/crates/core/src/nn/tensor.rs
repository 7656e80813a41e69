use super::NnError;

/// Row-major `rows x cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2D {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::ShapeMismatch(format!(
                "tensor {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Tensor2D { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2D {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NnError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NnError::ShapeMismatch("ragged rows".into()));
        }
        Ok(Tensor2D {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// New tensor holding the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Tensor2D {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Tensor2D {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

const LANES: usize = 4;

/// Dot products of one weight row against four input rows at once.
///
/// Each lane accumulates independently and the lanes are reduced in a fixed
/// order, so the result does not depend on how the compiler vectorises.
#[inline]
fn dot4(w: &[f64], a: [&[f64]; 4]) -> [f64; 4] {
    let mut acc = [[0.0; LANES]; 4];
    let chunks = w.len() / LANES * LANES;
    let mut k = 0;
    while k < chunks {
        for (r, row) in a.iter().enumerate() {
            for l in 0..LANES {
                acc[r][l] += w[k + l] * row[k + l];
            }
        }
        k += LANES;
    }
    let mut out = [0.0; 4];
    for r in 0..4 {
        let mut s = (acc[r][0] + acc[r][1]) + (acc[r][2] + acc[r][3]);
        for kk in chunks..w.len() {
            s += w[kk] * a[r][kk];
        }
        out[r] = s;
    }
    out
}

#[inline]
fn dot(w: &[f64], a: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let chunks = w.len() / LANES * LANES;
    let mut k = 0;
    while k < chunks {
        for l in 0..LANES {
            acc[l] += w[k + l] * a[k + l];
        }
        k += LANES;
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for kk in chunks..w.len() {
        s += w[kk] * a[kk];
    }
    s
}

/// `out = input * weights^T + bias`, with `weights` stored `out_dim x in_dim`.
pub(crate) fn affine(input: &Tensor2D, weights: &[f64], bias: &[f64]) -> Tensor2D {
    let in_dim = input.cols;
    let out_dim = bias.len();
    debug_assert_eq!(weights.len(), in_dim * out_dim);
    let mut out = Tensor2D::zeros(input.rows, out_dim);
    let full = input.rows / 4 * 4;
    let mut r = 0;
    while r < full {
        let rows = [input.row(r), input.row(r + 1), input.row(r + 2), input.row(r + 3)];
        for j in 0..out_dim {
            let d = dot4(&weights[j * in_dim..(j + 1) * in_dim], rows);
            for (q, v) in d.iter().enumerate() {
                out.data[(r + q) * out_dim + j] = v + bias[j];
            }
        }
        r += 4;
    }
    for r in full..input.rows {
        let row = input.row(r);
        for j in 0..out_dim {
            out.data[r * out_dim + j] = dot(&weights[j * in_dim..(j + 1) * in_dim], row) + bias[j];
        }
    }
    out
}

/// `grad_w += delta^T * input` and `grad_b += column sums of delta`.
pub(crate) fn accumulate_weight_grads(delta: &Tensor2D, input: &Tensor2D, grad_w: &mut [f64], grad_b: &mut [f64]) {
    let in_dim = input.cols;
    let out_dim = delta.cols;
    let full = input.rows / 4 * 4;
    for j in 0..out_dim {
        let gw = &mut grad_w[j * in_dim..(j + 1) * in_dim];
        let mut r = 0;
        while r < full {
            let d = [delta.get(r, j), delta.get(r + 1, j), delta.get(r + 2, j), delta.get(r + 3, j)];
            let (a0, a1, a2, a3) = (input.row(r), input.row(r + 1), input.row(r + 2), input.row(r + 3));
            for k in 0..in_dim {
                gw[k] += (d[0] * a0[k] + d[1] * a1[k]) + (d[2] * a2[k] + d[3] * a3[k]);
            }
            r += 4;
        }
        for r in full..input.rows {
            let d = delta.get(r, j);
            for (g, a) in gw.iter_mut().zip(input.row(r)) {
                *g += d * a;
            }
        }
        for r in 0..delta.rows {
            grad_b[j] += delta.get(r, j);
        }
    }
}

/// `delta * weights`: gradient with respect to the layer input.
pub(crate) fn backprop_input(delta: &Tensor2D, weights: &[f64], in_dim: usize) -> Tensor2D {
    let out_dim = delta.cols;
    let mut out = Tensor2D::zeros(delta.rows, in_dim);
    for r in 0..delta.rows {
        let dst = &mut out.data[r * in_dim..(r + 1) * in_dim];
        for j in 0..out_dim {
            let d = delta.data[r * out_dim + j];
            if d == 0.0 {
                continue;
            }
            for (o, w) in dst.iter_mut().zip(&weights[j * in_dim..(j + 1) * in_dim]) {
                *o += d * w;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_affine(input: &Tensor2D, w: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![];
        for r in 0..input.rows() {
            for j in 0..b.len() {
                let mut s = b[j];
                for k in 0..input.cols() {
                    s += input.get(r, k) * w[j * input.cols() + k];
                }
                out.push(s);
            }
        }
        out
    }

    #[test]
    fn shape_is_validated() {
        assert!(Tensor2D::new(2, 3, vec![0.0; 5]).is_err());
        assert!(Tensor2D::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let t = Tensor2D::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(t.select_rows(&[1, 1, 0]).data(), &[3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn kernels_match_naive_loops() {
        // odd sizes exercise the remainder paths
        let (rows, in_dim, out_dim) = (7, 11, 5);
        let input = Tensor2D::new(rows, in_dim, (0..rows * in_dim).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let w: Vec<f64> = (0..in_dim * out_dim).map(|i| (i as f64 * 0.11).cos()).collect();
        let b: Vec<f64> = (0..out_dim).map(|i| i as f64 * 0.5 - 1.0).collect();
        let out = affine(&input, &w, &b);
        for (x, y) in out.data().iter().zip(naive_affine(&input, &w, &b)) {
            assert!((x - y).abs() < 1e-12);
        }

        let delta = Tensor2D::new(rows, out_dim, (0..rows * out_dim).map(|i| (i as f64).sqrt() - 2.0).collect()).unwrap();
        let mut gw = vec![0.0; in_dim * out_dim];
        let mut gb = vec![0.0; out_dim];
        accumulate_weight_grads(&delta, &input, &mut gw, &mut gb);
        for j in 0..out_dim {
            let bsum: f64 = (0..rows).map(|r| delta.get(r, j)).sum();
            assert!((gb[j] - bsum).abs() < 1e-12);
            for k in 0..in_dim {
                let s: f64 = (0..rows).map(|r| delta.get(r, j) * input.get(r, k)).sum();
                assert!((gw[j * in_dim + k] - s).abs() < 1e-12);
            }
        }

        let back = backprop_input(&delta, &w, in_dim);
        for r in 0..rows {
            for k in 0..in_dim {
                let s: f64 = (0..out_dim).map(|j| delta.get(r, j) * w[j * in_dim + k]).sum();
                assert!((back.get(r, k) - s).abs() < 1e-12);
            }
        }
    }
}
