//! A small dense third-order tensor plus the symmetrized outer products
//! appearing in Gaussian third derivatives and moment decompositions.

use nalgebra::{DMatrix, DVector};

/// Dense third-order tensor, row-major over (i, j, k).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(a: usize, b: usize, c: usize) -> Self {
        Tensor3 {
            dims: (a, b, c),
            data: vec![0.0; a * b * c],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.data[idx] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.data[idx] += v;
    }

    /// Rank-one tensor `a ⊗ b ⊗ c`.
    pub fn rank_one(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Self {
        let mut t = Tensor3::zeros(a.len(), b.len(), c.len());
        for i in 0..a.len() {
            for j in 0..b.len() {
                let ab = a[i] * b[j];
                for k in 0..c.len() {
                    t.add_at(i, j, k, ab * c[k]);
                }
            }
        }
        t
    }

    pub fn add_scaled(&mut self, other: &Tensor3, scale: f64) {
        assert_eq!(self.dims, other.dims, "tensor dims mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Multilinear contraction: entry (i1,i2,i3) of the result is
    /// `Σ T[a,b,c] A[a,i1] B[b,i2] C[c,i3]`.
    pub fn contract(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Tensor3 {
        assert_eq!(a.nrows(), self.dims.0);
        assert_eq!(b.nrows(), self.dims.1);
        assert_eq!(c.nrows(), self.dims.2);
        let (na, nb, nc) = (a.ncols(), b.ncols(), c.ncols());
        let mut out = Tensor3::zeros(na, nb, nc);
        for i in 0..self.dims.0 {
            for j in 0..self.dims.1 {
                for k in 0..self.dims.2 {
                    let v = self.get(i, j, k);
                    if v == 0.0 {
                        continue;
                    }
                    for p in 0..na {
                        let va = v * a[(i, p)];
                        for q in 0..nb {
                            let vab = va * b[(j, q)];
                            for r in 0..nc {
                                out.add_at(p, q, r, vab * c[(k, r)]);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Contraction of the last two modes with a vector: `T(I, u, u)`.
    pub fn apply_uu(&self, u: &DVector<f64>) -> DVector<f64> {
        assert_eq!(u.len(), self.dims.1);
        assert_eq!(u.len(), self.dims.2);
        let mut out = DVector::zeros(self.dims.0);
        for i in 0..self.dims.0 {
            let mut acc = 0.0;
            for j in 0..self.dims.1 {
                let uj = u[j];
                if uj == 0.0 {
                    continue;
                }
                for k in 0..self.dims.2 {
                    acc += self.get(i, j, k) * uj * u[k];
                }
            }
            out[i] = acc;
        }
        out
    }

    /// Full contraction `T(u, u, u)`.
    pub fn triple(&self, u: &DVector<f64>) -> f64 {
        self.apply_uu(u).dot(u)
    }

    /// Contraction of the last mode with a vector, giving a matrix
    /// `M[i,j] = Σ_k T[i,j,k] v[k]`.
    pub fn apply_last(&self, v: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(v.len(), self.dims.2);
        let mut m = DMatrix::zeros(self.dims.0, self.dims.1);
        for i in 0..self.dims.0 {
            for j in 0..self.dims.1 {
                let mut acc = 0.0;
                for k in 0..self.dims.2 {
                    acc += self.get(i, j, k) * v[k];
                }
                m[(i, j)] = acc;
            }
        }
        m
    }

    /// Max deviation from full symmetry over mode permutations (cubic only).
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.dims.0, self.dims.1);
        assert_eq!(self.dims.1, self.dims.2);
        let n = self.dims.0;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    for w in [
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    /// Averages all six mode permutations (cubic only).
    pub fn symmetrized(&self) -> Tensor3 {
        assert_eq!(self.dims.0, self.dims.1);
        assert_eq!(self.dims.1, self.dims.2);
        let n = self.dims.0;
        let mut out = Tensor3::zeros(n, n, n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let avg = (self.get(i, j, k)
                        + self.get(i, k, j)
                        + self.get(j, i, k)
                        + self.get(j, k, i)
                        + self.get(k, i, j)
                        + self.get(k, j, i))
                        / 6.0;
                    out.set(i, j, k, avg);
                }
            }
        }
        out
    }
}

/// Symmetrized outer product of a vector with the columns of a matrix:
/// `v ⊗̃ Z = Σ_i (v⊗z_i⊗z_i + z_i⊗v⊗z_i + z_i⊗z_i⊗v)`.
pub fn tilde_outer(v: &DVector<f64>, z: &DMatrix<f64>) -> Tensor3 {
    assert_eq!(v.len(), z.nrows(), "tilde_outer dimension mismatch");
    // Only the Gram matrix of Z enters the sum.
    sym_outer(v, &(z * z.transpose()))
}

/// The same object expressed through a symmetric matrix `M = Z Zᵀ`:
/// entry (a,b,c) is `v_a M_bc + v_b M_ac + v_c M_ab`.
pub fn sym_outer(v: &DVector<f64>, m: &DMatrix<f64>) -> Tensor3 {
    let d = v.len();
    assert_eq!(m.nrows(), d);
    assert_eq!(m.ncols(), d);
    let mut t = Tensor3::zeros(d, d, d);
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                t.set(a, b, c, v[a] * m[(b, c)] + v[b] * m[(a, c)] + v[c] * m[(a, b)]);
            }
        }
    }
    t
}
