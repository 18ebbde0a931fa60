//! Design-matrix algebra: the tested/nuisance column split, hat-matrix
//! diagonals of the full and nuisance-only projections, and RᵀR.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;

/// Least-squares solver from a thin QR factorisation; `solve(v)` returns
/// (AᵀA)⁻¹Aᵀv without ever forming AᵀA.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let qr = a.clone().qr();
        LeastSquares { q: qr.q(), r: qr.r() }
    }

    pub fn cols(&self) -> usize {
        self.r.ncols()
    }

    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let qtv = self.q.tr_mul(v);
        self.r
            .solve_upper_triangular(&qtv)
            .expect("factor of a full-rank design is invertible")
    }

    /// Fitted values A (AᵀA)⁻¹ Aᵀ v = Q Qᵀ v.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.q * self.q.tr_mul(v)
    }

    /// Diagonal of the hat matrix: squared row norms of Q.
    pub fn leverages(&self) -> DVector<f64> {
        DVector::from_iterator(self.q.nrows(), self.q.row_iter().map(|r| r.norm_squared()))
    }

    /// diag((AᵀA)⁻¹) = row norms² of R⁻¹.
    pub fn inverse_gram_diag(&self) -> DVector<f64> {
        let p = self.r.ncols();
        let rinv = self
            .r
            .clone()
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .expect("invertible factor");
        DVector::from_iterator(p, rinv.row_iter().map(|r| r.norm_squared()))
    }
}

/// `X` with the `q` tested columns moved to the front.
#[derive(Debug, Clone)]
pub struct DesignPartition {
    /// Columns reordered as [X₁ | X₂].
    pub x: DMatrix<f64>,
    pub q: usize,
    pub beta10: DVector<f64>,
    /// `perm[j]` is the caller's column index of internal column `j`.
    pub perm: Vec<usize>,
}

impl DesignPartition {
    /// Partition with the tested block given by caller column indices.
    pub fn new(x: DMatrix<f64>, tested: &[usize], beta10: &[f64]) -> Result<Self> {
        let (n, p) = x.shape();
        let q = tested.len();
        if q == 0 || q > p {
            return Err(Error::Design(format!("need 1 <= q <= p, got q = {q}, p = {p}")));
        }
        if beta10.len() != q {
            return Err(Error::Design(format!(
                "{} null values for {q} tested columns",
                beta10.len()
            )));
        }
        if n <= p {
            return Err(Error::Design(format!("need n > p, got n = {n}, p = {p}")));
        }
        let mut seen = vec![false; p];
        for &j in tested {
            if j >= p || seen[j] {
                return Err(Error::Design(format!("tested column {j} out of range or repeated")));
            }
            seen[j] = true;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Design("design has non-finite entries".into()));
        }
        check_rank(&x)?;
        let perm: Vec<usize> = tested
            .iter()
            .copied()
            .chain((0..p).filter(|j| !seen[*j]))
            .collect();
        let xp = x.select_columns(perm.iter());
        Ok(DesignPartition {
            x: xp,
            q,
            beta10: DVector::from_column_slice(beta10),
            perm,
        })
    }

    /// Partition whose tested block is the last `q` columns.
    pub fn trailing(x: DMatrix<f64>, q: usize, beta10: &[f64]) -> Result<Self> {
        let p = x.ncols();
        if q == 0 || q > p {
            return Err(Error::Design(format!("need 1 <= q <= p, got q = {q}, p = {p}")));
        }
        let tested: Vec<usize> = (p - q..p).collect();
        Self::new(x, &tested, beta10)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x1(&self) -> DMatrix<f64> {
        self.x.columns(0, self.q).into_owned()
    }

    pub fn x2(&self) -> DMatrix<f64> {
        self.x.columns(self.q, self.p() - self.q).into_owned()
    }

    /// Maps an internally ordered coefficient vector back to caller order.
    pub fn to_caller_order(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (j, &orig) in self.perm.iter().enumerate() {
            out[orig] = v[j];
        }
        out
    }

    /// Maps a caller-ordered vector to internal order.
    pub fn to_internal_order(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), self.perm.iter().map(|&j| v[j]))
    }
}

/// Scale-free rank check: singular values of the column-normalised design.
fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    let p = x.ncols();
    let mut xn = x.clone();
    for mut c in xn.column_iter_mut() {
        let norm = c.norm();
        if norm == 0.0 {
            continue;
        }
        c /= norm;
    }
    let deficient = |m: &DMatrix<f64>| {
        let sv = m.singular_values();
        let max = sv.max();
        max == 0.0 || sv.min() < RANK_TOL * max
    };
    if !deficient(&xn) {
        return Ok(());
    }
    for j in 0..p {
        if deficient(&xn.columns(0, j + 1).into_owned()) {
            return Err(Error::SingularDesign { column: j });
        }
    }
    Err(Error::SingularDesign { column: p - 1 })
}

/// Hat-matrix diagonals and the n-scaled traces used by the corrections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoSet {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rho_zz: f64,
    pub rho_z2z2: f64,
    pub rho_zz2: f64,
    pub z_diag: Vec<f64>,
    pub z2_diag: Vec<f64>,
}

pub fn projections(part: &DesignPartition) -> RhoSet {
    let n = part.n();
    let z = LeastSquares::new(&part.x).leverages();
    let z2 = if part.q == part.p() {
        DVector::zeros(n)
    } else {
        LeastSquares::new(&part.x2()).leverages()
    };
    let nf = n as f64;
    RhoSet {
        n,
        p: part.p(),
        q: part.q,
        rho_zz: nf * z.dot(&z),
        rho_z2z2: nf * z2.dot(&z2),
        rho_zz2: nf * z.dot(&z2),
        z_diag: z.as_slice().to_vec(),
        z2_diag: z2.as_slice().to_vec(),
    }
}

/// X₁ with the nuisance column space projected out.
pub fn r_factor(part: &DesignPartition) -> DMatrix<f64> {
    let x1 = part.x1();
    if part.q == part.p() {
        return x1;
    }
    let ls = LeastSquares::new(&part.x2());
    let mut r = x1.clone();
    for (mut rc, xc) in r.column_iter_mut().zip(x1.column_iter()) {
        let v = xc.into_owned();
        rc -= ls.project(&v);
    }
    r
}

/// RᵀR = X₁ᵀ(I − Z₂)X₁, q × q.
pub fn r_matrix(part: &DesignPartition) -> DMatrix<f64> {
    let r = r_factor(part);
    r.tr_mul(&r)
}
