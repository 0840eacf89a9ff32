//! Dense linear-algebra cross-check for discovery.
//!
//! Every residual is linear in the generator parameters, so stacking the
//! residuals of the unit-parameter generators over a probe set gives a matrix
//! whose null space is exactly the zero-residual set on those probes.

use nalgebra::{DMatrix, DVector};

use super::loss::LossWeights;
use super::residuals::residuals;
use crate::error::{Error, Result};
use crate::generator::GeneratorPair;
use crate::model::{ActionVec, EnvModel, StateVec};

/// Rows per probe: `[√λ_r R_r; R_b; √λ_Q vec(R_Q)]`, one column per parameter
/// in `GeneratorPair::to_params` order.
pub fn residual_design_matrix(
    model: &dyn EnvModel,
    probes: &[(StateVec, ActionVec)],
    weights: &LossWeights,
) -> Result<DMatrix<f64>> {
    if probes.is_empty() {
        return Err(Error::invalid("probes", "empty probe set"));
    }
    let (d, m) = (model.dim_s(), model.dim_a());
    let p = GeneratorPair::param_count(d, m);
    let rows_per = 1 + d + d * d;
    let (wr, wq) = (weights.lambda_r.sqrt(), weights.lambda_q.sqrt());
    let mut out = DMatrix::zeros(rows_per * probes.len(), p);
    let mut unit = vec![0.0; p];
    for col in 0..p {
        unit[col] = 1.0;
        let gen = GeneratorPair::from_params(d, m, &unit)?;
        unit[col] = 0.0;
        for (k, (s, a)) in probes.iter().enumerate() {
            let r = residuals(model, &gen, s, a);
            let base = k * rows_per;
            out[(base, col)] = wr * r.reward;
            for i in 0..d {
                out[(base + 1 + i, col)] = r.drift[i];
            }
            for (i, v) in r.diffusion.iter().enumerate() {
                out[(base + 1 + d + i, col)] = wq * v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct NullSpace {
    /// All singular values, ascending.
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of the numerical null space, as generators.
    pub basis: Vec<GeneratorPair>,
    /// Threshold used: `rel_tol · σ_max`.
    pub threshold: f64,
}

impl NullSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Ratio of the smallest singular value outside the null space to the
    /// largest; large values mean a well-separated null space.
    pub fn gap(&self) -> Option<f64> {
        let k = self.basis.len();
        let top = *self.singular_values.last()?;
        self.singular_values.get(k).map(|s| s / top)
    }
}

/// Numerical null space of the residual design matrix, by SVD.
pub fn residual_null_space(
    model: &dyn EnvModel,
    probes: &[(StateVec, ActionVec)],
    weights: &LossWeights,
    rel_tol: f64,
) -> Result<NullSpace> {
    let mat = residual_design_matrix(model, probes, weights)?;
    let (d, m) = (model.dim_s(), model.dim_a());
    let p = mat.ncols();
    if mat.nrows() < p {
        return Err(Error::invalid(
            "probes",
            format!("{} residual rows cannot determine {} parameters", mat.nrows(), p),
        ));
    }
    let svd = mat.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = singular_values.last().copied().unwrap_or(0.0);
    let threshold = rel_tol * top;
    let mut basis = Vec::new();
    for &i in &order {
        if svd.singular_values[i] > threshold {
            break;
        }
        let row: DVector<f64> = v_t.row(i).transpose();
        basis.push(GeneratorPair::from_params(d, m, row.as_slice())?);
    }
    Ok(NullSpace {
        singular_values,
        basis,
        threshold,
    })
}
