//! Log-linear fit of `y(t) <= N exp(-beta / (1 - t/t1))`.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Smallest `N` making the fitted curve an upper envelope of the data.
    pub n: f64,
    /// `ln N`, finite even when `N` itself would overflow.
    pub ln_n: f64,
    pub beta: f64,
    /// RMS residual of `ln y` about the regression line.
    pub residual: f64,
}

/// Regresses `ln y` on `x = 1/(1 - t/t1)`; `beta` is minus the slope. Samples
/// with `y <= 0`, non-finite `y`, or `t >= t1` are skipped. `None` when fewer
/// than two samples remain or `x` does not vary.
pub fn fit_decay(times: &[f64], values: &[f64], t1: f64) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|&(&t, &y)| y > 0.0 && y.is_finite() && t < t1)
        .map(|(&t, &y)| (1.0 / (1.0 - t / t1), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let beta = -slope;
    let ln_n = pts
        .iter()
        .map(|p| p.1 + beta * p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(DecayFit {
        n: ln_n.exp(),
        ln_n,
        beta,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_shape() {
        let t1 = 10.0;
        let times: Vec<f64> = (0..900).map(|k| k as f64 * 0.01).collect();
        let ys: Vec<f64> = times
            .iter()
            .map(|t| 3.0 * (-2.5 / (1.0 - t / t1)).exp())
            .collect();
        let f = fit_decay(&times, &ys, t1).unwrap();
        assert!((f.beta - 2.5).abs() < 1e-9);
        assert!((f.n - 3.0).abs() < 1e-8);
        assert!((f.ln_n - 3f64.ln()).abs() < 1e-10);
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_decay(&[0.0], &[1.0], 1.0).is_none());
        assert!(fit_decay(&[0.0, 1.0], &[0.0, 0.0], 2.0).is_none());
    }
}
