use nalgebra::{DMatrix, DVector};

use super::is_full_rank;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub rss: f64,
    /// `(XᵀX)⁻¹`.
    pub xtx_inv: DMatrix<f64>,
}

pub fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if !is_full_rank(x) {
        return Err(Error::RankDeficient);
    }
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &yv;
    let r = qr.r();
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let resid = &yv - x * &beta;
    let r_inv = r.try_inverse().ok_or(Error::RankDeficient)?;
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        rss: resid.norm_squared(),
        xtx_inv: &r_inv * r_inv.transpose(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrEffect {
    pub estimate: f64,
    pub std_error: f64,
}

/// Per-arm least squares `Y(z) = β_z0 + β_z1 L + β_z2 W + ε`, averaged over
/// every subject's covariates: `(1/n) Σ_i [Ê Y_i(1) − Ê Y_i(0)]`.
pub fn lr_treatment_effect(l: &[f64], w: &[f64], z: &[bool], y: &[f64]) -> Result<LrEffect> {
    let n = y.len();
    if l.len() != n || w.len() != n || z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l.len().min(w.len()).min(z.len()),
        });
    }
    let arm = |treated: bool| -> Result<OlsFit> {
        let idx: Vec<usize> = (0..n).filter(|&i| z[i] == treated).collect();
        if idx.is_empty() {
            return Err(Error::Empty("treatment arm"));
        }
        let x = DMatrix::from_fn(idx.len(), 3, |r, c| match c {
            0 => 1.0,
            1 => l[idx[r]],
            _ => w[idx[r]],
        });
        let yy: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        least_squares(&x, &yy)
    };
    let f1 = arm(true)?;
    let f0 = arm(false)?;
    let xbar = DVector::from_vec(vec![
        1.0,
        l.iter().sum::<f64>() / n as f64,
        w.iter().sum::<f64>() / n as f64,
    ]);
    let b1 = DVector::from_column_slice(&f1.coefficients);
    let b0 = DVector::from_column_slice(&f0.coefficients);
    let estimate = xbar.dot(&(&b1 - &b0));
    let n1 = z.iter().filter(|&&t| t).count();
    let s2 = |f: &OlsFit, k: usize| if k > 3 { f.rss / (k - 3) as f64 } else { 0.0 };
    let cov = &f1.xtx_inv * s2(&f1, n1) + &f0.xtx_inv * s2(&f0, n - n1);
    let var = (xbar.transpose() * cov * &xbar)[(0, 0)];
    Ok(LrEffect {
        estimate,
        std_error: var.max(0.0).sqrt(),
    })
}
