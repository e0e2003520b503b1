use crate::{Error, Result};

/// `n L + (d/2) ln n`.
pub fn compute_bic(n: usize, loss_at_min: f64, d: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::config("BIC needs n >= 1"));
    }
    let n_f = n as f64;
    Ok(n_f * loss_at_min + d as f64 / 2.0 * n_f.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_has_no_penalty() {
        assert_eq!(compute_bic(1, 0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn direct_substitution() {
        let b = compute_bic(100, 1.0, 10).unwrap();
        assert!((b - 123.025_850_929_940_5).abs() < 1e-9);
    }

    #[test]
    fn penalty_exceeds_llc_penalty_below_half_dimension() {
        let (n, d) = (5000usize, 40usize);
        for lambda in [0.5, 3.0, 19.9] {
            let bic_pen = compute_bic(n, 0.0, d).unwrap();
            assert!(bic_pen > lambda * (n as f64).ln());
        }
    }

    #[test]
    fn zero_n_rejected() {
        assert!(compute_bic(0, 1.0, 1).is_err());
    }
}
