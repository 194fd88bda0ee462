//! Block-tridiagonal symmetric positive definite systems.

use nalgebra::{linalg::Cholesky, DMatrix, DVector, Dyn};

use super::Preconditioner;

/// Block `LDLᵀ` factorization of a symmetric block-tridiagonal matrix whose
/// stages are scattered over a longer vector. Entries outside every stage
/// are treated as identity rows.
pub struct BlockTridiagonal {
    index: Vec<Vec<usize>>,
    /// Cholesky factors of the Schur complements.
    schur: Vec<Cholesky<f64, Dyn>>,
    /// Sub-diagonal blocks: `lower[k]` couples stage `k + 1` (rows) to `k`.
    lower: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    /// Factors `diag`/`lower` on the stage variables `index`. Returns `None`
    /// when a Schur complement is not positive definite.
    pub fn factor(index: Vec<Vec<usize>>, diag: Vec<DMatrix<f64>>, lower: Vec<DMatrix<f64>>) -> Option<Self> {
        assert_eq!(index.len(), diag.len());
        assert_eq!(lower.len() + 1, diag.len());
        let mut schur: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(diag.len());
        for (k, d) in diag.into_iter().enumerate() {
            let s = match schur.last() {
                Some(prev) => {
                    let l = &lower[k - 1];
                    d - l * prev.solve(&l.transpose())
                }
                None => d,
            };
            schur.push(s.cholesky()?);
        }
        Some(BlockTridiagonal { index, schur, lower })
    }
}

impl Preconditioner for BlockTridiagonal {
    fn apply(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
        let gather = |v: &[f64], idx: &[usize]| DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]));
        let n = self.index.len();
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut yk = gather(r, &self.index[k]);
            if k > 0 {
                yk -= &self.lower[k - 1] * self.schur[k - 1].solve(&y[k - 1]);
            }
            y.push(yk);
        }
        let mut z: Option<DVector<f64>> = None;
        for k in (0..n).rev() {
            let mut rhs = y[k].clone();
            if let Some(next) = &z {
                rhs -= self.lower[k].transpose() * next;
            }
            let zk = self.schur[k].solve(&rhs);
            for (&i, v) in self.index[k].iter().zip(zk.iter()) {
                out[i] = *v;
            }
            z = Some(zk);
        }
    }
}
