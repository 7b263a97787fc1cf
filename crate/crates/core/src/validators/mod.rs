//! Independent numerical checks of the asymptotic formulas: a boundary
//! element solver on the sphere and a Brownian-particle flux splitter.

mod bem;
mod mc;

pub use bem::{bem_solve, bem_solve_extrapolated, BemEstimate, BemMesh, BemSolution};
pub use mc::{mc_flux_split, McConfig, McResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed percent error `100 (asym − num) / num`.
pub fn relative_error(asym: f64, num: f64) -> Result<f64> {
    if num == 0.0 {
        return Err(Error::DivisionByZero("relative error against a zero reference".into()));
    }
    Ok(100.0 * (asym - num) / num)
}

/// One comparison row between an asymptotic value and a numerical one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub case: String,
    pub eps: f64,
    pub asym: f64,
    pub num: f64,
    pub re_percent: f64,
    pub stderr: Option<f64>,
}

impl OracleReport {
    pub fn new(case: impl Into<String>, eps: f64, asym: f64, num: f64, stderr: Option<f64>) -> Result<Self> {
        Ok(Self {
            case: case.into(),
            eps,
            asym,
            num,
            re_percent: relative_error(asym, num)?,
            stderr,
        })
    }
}
