//! Affine infinitesimal generators `X(s) = A_X s + c_X`, `Y(a) = A_Y a + c_Y`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::rng::standard_normal;

/// A pair of affine vector fields on states and actions.
///
/// The Jacobians are the constant matrices `A_X`, `A_Y` and all second
/// derivatives vanish, so the Itô correction in the drift residual is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorPair {
    pub a_x: DMatrix<f64>,
    pub c_x: DVector<f64>,
    pub a_y: DMatrix<f64>,
    pub c_y: DVector<f64>,
}

/// `[[0, -1], [1, 0]]`, the generator of planar rotations.
pub fn so2_generator() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

impl GeneratorPair {
    pub fn new(
        a_x: DMatrix<f64>,
        c_x: DVector<f64>,
        a_y: DMatrix<f64>,
        c_y: DVector<f64>,
    ) -> Result<Self> {
        let d = a_x.nrows();
        let m = a_y.nrows();
        ensure_dim("A_X columns", d, a_x.ncols())?;
        ensure_dim("c_X", d, c_x.len())?;
        ensure_dim("A_Y columns", m, a_y.ncols())?;
        ensure_dim("c_Y", m, c_y.len())?;
        Ok(Self { a_x, c_x, a_y, c_y })
    }

    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            a_x: DMatrix::zeros(d, d),
            c_x: DVector::zeros(d),
            a_y: DMatrix::zeros(m, m),
            c_y: DVector::zeros(m),
        }
    }

    /// Simultaneous rotation of every planar block of the state and of the
    /// action: `A_X = blockdiag(G, …, G)`, `A_Y = G`.
    ///
    /// `d` must be even and `m` must be 2.
    pub fn rotation(d: usize, m: usize) -> Result<Self> {
        if d % 2 != 0 || d == 0 {
            return Err(Error::invalid("d", "rotation needs an even state dimension"));
        }
        ensure_dim("action dimension for rotation", 2, m)?;
        let g = so2_generator();
        let mut a_x = DMatrix::zeros(d, d);
        for b in 0..d / 2 {
            a_x.view_mut((2 * b, 2 * b), (2, 2)).copy_from(&g);
        }
        Ok(Self {
            a_x,
            c_x: DVector::zeros(d),
            a_y: g,
            c_y: DVector::zeros(2),
        })
    }

    /// Entries drawn i.i.d. from `N(0, scale²)`.
    pub fn random<R: Rng + ?Sized>(d: usize, m: usize, scale: f64, rng: &mut R) -> Self {
        let n = Self::param_count(d, m);
        let params: Vec<f64> = (0..n).map(|_| scale * standard_normal(rng)).collect();
        Self::from_params(d, m, &params).expect("length matches param_count")
    }

    pub fn dim_s(&self) -> usize {
        self.a_x.nrows()
    }

    pub fn dim_a(&self) -> usize {
        self.a_y.nrows()
    }

    pub fn param_count(d: usize, m: usize) -> usize {
        d * d + d + m * m + m
    }

    pub fn state_field(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.a_x * s + &self.c_x
    }

    pub fn action_field(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.a_y * a + &self.c_y
    }

    /// Flattened parameters: `A_X` row-major, `c_X`, `A_Y` row-major, `c_Y`.
    pub fn to_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::param_count(self.dim_s(), self.dim_a()));
        out.extend(self.a_x.transpose().iter());
        out.extend(self.c_x.iter());
        out.extend(self.a_y.transpose().iter());
        out.extend(self.c_y.iter());
        out
    }

    pub fn from_params(d: usize, m: usize, p: &[f64]) -> Result<Self> {
        ensure_dim("generator parameter vector", Self::param_count(d, m), p.len())?;
        let (ax, rest) = p.split_at(d * d);
        let (cx, rest) = rest.split_at(d);
        let (ay, cy) = rest.split_at(m * m);
        Ok(Self {
            a_x: DMatrix::from_row_slice(d, d, ax),
            c_x: DVector::from_column_slice(cx),
            a_y: DMatrix::from_row_slice(m, m, ay),
            c_y: DVector::from_column_slice(cy),
        })
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            a_x: &self.a_x * k,
            c_x: &self.c_x * k,
            a_y: &self.a_y * k,
            c_y: &self.c_y * k,
        }
    }

    /// `self + k · other`.
    pub fn add_scaled(&self, k: f64, other: &Self) -> Self {
        Self {
            a_x: &self.a_x + &other.a_x * k,
            c_x: &self.c_x + &other.c_x * k,
            a_y: &self.a_y + &other.a_y * k,
            c_y: &self.c_y + &other.c_y * k,
        }
    }

    /// Euclidean norm of the flattened parameter vector.
    pub fn param_norm(&self) -> f64 {
        (self.a_x.norm_squared()
            + self.c_x.norm_squared()
            + self.a_y.norm_squared()
            + self.c_y.norm_squared())
        .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_params().iter().all(|x| x.is_finite())
    }

    pub fn to_record(&self) -> GeneratorRecord {
        let rows = |m: &DMatrix<f64>| {
            m.row_iter()
                .map(|r| r.iter().copied().collect())
                .collect::<Vec<Vec<f64>>>()
        };
        GeneratorRecord {
            dim_s: self.dim_s(),
            dim_a: self.dim_a(),
            a_x: rows(&self.a_x),
            c_x: self.c_x.iter().copied().collect(),
            a_y: rows(&self.a_y),
            c_y: self.c_y.iter().copied().collect(),
        }
    }
}

/// JSON form of a [`GeneratorPair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub dim_s: usize,
    pub dim_a: usize,
    pub a_x: Vec<Vec<f64>>,
    pub c_x: Vec<f64>,
    pub a_y: Vec<Vec<f64>>,
    pub c_y: Vec<f64>,
}

impl TryFrom<&GeneratorRecord> for GeneratorPair {
    type Error = Error;

    fn try_from(r: &GeneratorRecord) -> Result<Self> {
        let mat = |rows: &[Vec<f64>], n: usize, what: &'static str| -> Result<DMatrix<f64>> {
            ensure_dim(what, n, rows.len())?;
            for row in rows {
                ensure_dim(what, n, row.len())?;
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        GeneratorPair::new(
            mat(&r.a_x, r.dim_s, "A_X")?,
            DVector::from_vec(r.c_x.clone()),
            mat(&r.a_y, r.dim_a, "A_Y")?,
            DVector::from_vec(r.c_y.clone()),
        )
    }
}
