use crate::distribution::{std_normal_cdf, std_normal_pdf};

/// Expected improvement of a Gaussian prediction over `f_best`, in the
/// maximization convention.
pub fn expected_improvement(mu: f64, sigma: f64, f_best: f64) -> f64 {
    let gain = mu - f_best;
    if !(sigma > 0.0) {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}
