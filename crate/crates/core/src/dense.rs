//! Row-major dense tensors with per-mode sizes, used internally by the
//! expansion and factorization code. Mode 0 is the most significant index.

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Row-major matrix stored as a flat vector.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *t.at_mut(c, r) = self.at(r, c);
            }
        }
        t
    }

    /// `selfᵀ · self`.
    pub fn rows_vec(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn gram(&self) -> Mat {
        let mut g = Mat::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for i in 0..self.cols {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in 0..self.cols {
                    g.data[i * self.cols + j] += ri * row[j];
                }
            }
        }
        g
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }
}

impl Dense {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Dense { shape, data }
    }

    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.shape[..mode].iter().product();
        let right = self.shape[mode + 1..].iter().product();
        (left, self.shape[mode], right)
    }

    /// `self ×_mode mat`: the index along `mode` is replaced by the row index
    /// of `mat`, so `mat.cols` must equal `shape[mode]`.
    pub fn mode_product(&self, mode: usize, mat: &Mat) -> Dense {
        let (left, mid, right) = self.split(mode);
        debug_assert_eq!(mat.cols, mid);
        let out_mid = mat.rows;
        let mut out = vec![0.0; left * out_mid * right];
        for l in 0..left {
            let src = &self.data[l * mid * right..(l + 1) * mid * right];
            let dst = &mut out[l * out_mid * right..(l + 1) * out_mid * right];
            for j in 0..out_mid {
                let drow = &mut dst[j * right..(j + 1) * right];
                for i in 0..mid {
                    let m = mat.at(j, i);
                    if m == 0.0 {
                        continue;
                    }
                    let srow = &src[i * right..(i + 1) * right];
                    for (d, s) in drow.iter_mut().zip(srow) {
                        *d += m * s;
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = out_mid;
        Dense { shape, data: out }
    }

    /// Apply `mats[m]` along every mode `m != skip`.
    pub fn multi_mode_product(&self, mats: &[Mat], skip: Option<usize>) -> Dense {
        let mut cur = self.clone();
        for (m, mat) in mats.iter().enumerate() {
            if Some(m) != skip {
                cur = cur.mode_product(m, mat);
            }
        }
        cur
    }

    /// Contraction over every mode except `mode`:
    /// `out[i, j] = Σ_s self[.., i, ..](s) · other[.., j, ..](s)`.
    pub fn contract_except(&self, other: &Dense, mode: usize) -> Mat {
        let (left, mid, right) = self.split(mode);
        let (oleft, omid, oright) = other.split(mode);
        debug_assert_eq!((left, right), (oleft, oright));
        let mut out = Mat::zeros(mid, omid);
        for l in 0..left {
            let a = &self.data[l * mid * right..(l + 1) * mid * right];
            let b = &other.data[l * omid * right..(l + 1) * omid * right];
            for i in 0..mid {
                let ar = &a[i * right..(i + 1) * right];
                for j in 0..omid {
                    let br = &b[j * right..(j + 1) * right];
                    out.data[i * omid + j] += ar.iter().zip(br).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        out
    }

    /// Contract with one vector per mode, keeping only `keep`.
    pub fn vectors_except(&self, vecs: &[&[f64]], keep: usize) -> Vec<f64> {
        let mut cur = self.clone();
        // contract from the last mode down so earlier mode indices stay valid
        for m in (0..vecs.len()).rev() {
            if m == keep {
                continue;
            }
            let (left, mid, right) = cur.split(m);
            let v = vecs[m];
            let mut out = vec![0.0; left * right];
            for l in 0..left {
                for i in 0..mid {
                    let vi = v[i];
                    if vi == 0.0 {
                        continue;
                    }
                    let src = &cur.data[(l * mid + i) * right..(l * mid + i + 1) * right];
                    let dst = &mut out[l * right..(l + 1) * right];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += vi * s;
                    }
                }
            }
            let mut shape = cur.shape.clone();
            shape.remove(m);
            cur = Dense { shape, data: out };
        }
        cur.data
    }
}

/// Outer product of vectors, first vector most significant.
pub(crate) fn outer(vectors: &[&[f64]], scale: f64) -> Vec<f64> {
    let mut cur = vec![scale];
    for v in vectors {
        let mut next = Vec::with_capacity(cur.len() * v.len());
        for &c in &cur {
            next.extend(v.iter().map(|x| c * x));
        }
        cur = next;
    }
    cur
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns (`vectors[i][j]` is component `i` of eigenvector `j`). Each
/// eigenvector's first nonzero component is positive.
pub fn jacobi_eigen(sym: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = sym.len();
    let mut a: Vec<Vec<f64>> = sym.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let frob: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * frob.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]).then(x.cmp(&y)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let mut vectors = vec![vec![0.0; n]; n];
    for (col, &src) in order.iter().enumerate() {
        let sign = (0..n).map(|i| v[i][src]).find(|x| x.abs() > 1e-15).map_or(1.0, f64::signum);
        for i in 0..n {
            vectors[i][col] = sign * v[i][src];
        }
    }
    (values, vectors)
}
