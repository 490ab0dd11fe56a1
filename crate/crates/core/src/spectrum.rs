use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::free_resolvent::OperatorMatrix;
use crate::linalg::{self, EigenDecomposition, SYMMETRY_TOL};

/// Sorted spectrum with bound-state bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub count_negative: usize,
    /// `|E_{n+1}| / |E_n|` for consecutive negative eigenvalues, deepest first.
    pub ratios: Vec<f64>,
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let negative: Vec<f64> = eigenvalues.iter().copied().filter(|&e| e < 0.0).collect();
        let ratios = negative.windows(2).map(|w| w[1].abs() / w[0].abs()).collect();
        Self { count_negative: negative.len(), eigenvalues, ratios }
    }

    pub fn negative(&self) -> &[f64] {
        &self.eigenvalues[..self.count_negative]
    }

    pub fn lowest(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn count_below(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().take_while(|&&e| e < threshold).count()
    }
}

/// Full spectrum of a symmetric operator.
pub fn eig_spectrum(m: &OperatorMatrix) -> Result<SpectrumReport> {
    linalg::check_symmetric(m.entries().as_ref(), SYMMETRY_TOL)?;
    let values = linalg::eigvalsh(m.entries().as_ref())?;
    Ok(SpectrumReport::from_eigenvalues(values))
}

/// Spectrum together with eigenvectors (columns, in the symmetric representation).
pub fn eig_decompose(m: &OperatorMatrix) -> Result<(SpectrumReport, EigenDecomposition)> {
    linalg::check_symmetric(m.entries().as_ref(), SYMMETRY_TOL)?;
    let evd = linalg::eigh(m.entries().as_ref())?;
    Ok((SpectrumReport::from_eigenvalues(evd.values.clone()), evd))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_of_geometric_sequence() {
        let s = SpectrumReport::from_eigenvalues(vec![-1.0, 3.0, -0.25, -0.5, 0.0]);
        assert_eq!(s.count_negative, 3);
        assert_eq!(s.eigenvalues, vec![-1.0, -0.5, -0.25, 0.0, 3.0]);
        assert_eq!(s.ratios, vec![0.5, 0.5]);
        assert_eq!(s.count_below(-0.3), 2);
    }
}
