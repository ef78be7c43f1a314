use crate::{Error, Result};

// Lanczos approximation, g = 7, 9 terms. Good for ~1e-14 relative accuracy
// over the positive reals, which covers the Wishart normalizing constants at
// orders up to (N-1)/2.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(log_gamma_unchecked(x))
}

fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - log_gamma_unchecked(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        // Γ(1) = 1, Γ(1/2) = √π, Γ(10) = 9! = 362880.
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!((log_gamma(0.5).unwrap() - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        let ln_fact9 = 12.801_827_480_081_469_6; // ln 362880, mpmath 60 dps
        assert!((log_gamma(10.0).unwrap() - ln_fact9).abs() < 1e-12 * ln_fact9);
    }

    #[test]
    fn twelve_digits_across_range() {
        // Spot-check against the Stirling series at large arguments where it
        // is itself accurate to far better than 1e-12 relative.
        for &x in &[0.5, 1.7, 8.0, 151.5, 1.0e4, 1.0e6] {
            let got = log_gamma(x).unwrap();
            let reference = stirling_ref(x + 20.0)
                - (0..20).map(|k| (x + k as f64).ln()).sum::<f64>();
            let denom = reference.abs().max(1.0);
            assert!(
                (got - reference).abs() / denom < 1e-12,
                "x={x}: got {got}, ref {reference}"
            );
        }
    }

    // Stirling with three correction terms; error ~ 1/(1188 z^9).
    fn stirling_ref(z: f64) -> f64 {
        (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + 1.0 / (12.0 * z)
            - 1.0 / (360.0 * z.powi(3))
            + 1.0 / (1260.0 * z.powi(5))
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-3.2).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }
}
