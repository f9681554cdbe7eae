use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-dimension z-scoring with population standard deviation. Constant
/// dimensions (std = 0) are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(invalid!("cannot fit a standardizer on zero rows"));
        };
        let dim = first.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid!("ragged matrix"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for d in 0..dim {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[d]), hi.max(r[d])));
            if lo == hi {
                mean[d] = lo;
                continue;
            }
            let m = rows.iter().map(|r| r[d]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[d] - m).powi(2)).sum::<f64>() / n;
            mean[d] = m;
            std[d] = var.sqrt();
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *x -= m;
            if *s > 0.0 {
                *x /= s;
            }
        }
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                let mut r = r.clone();
                self.apply_row(&mut r);
                r
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_becomes_zero() {
        let rows = vec![vec![0.1, 0.0], vec![0.1, 2.0], vec![0.1, 4.0]];
        let s = Standardizer::fit(&rows).unwrap();
        let out = s.apply(&rows);
        assert!(out.iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn population_std_convention() {
        let rows = vec![vec![0.0], vec![2.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.apply(&rows), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(Standardizer::fit(&[]).is_err());
    }
}
