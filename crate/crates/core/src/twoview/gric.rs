use serde::{Deserialize, Serialize};

/// Motion model scored by GRIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GricModel {
    Fundamental,
    Homography,
}

impl GricModel {
    /// `(d, k, r)`: structure dimension, model parameters, data dimension.
    pub fn dimensions(self) -> (f64, f64, f64) {
        match self {
            GricModel::Fundamental => (3.0, 7.0, 4.0),
            GricModel::Homography => (2.0, 8.0, 4.0),
        }
    }
}

/// `Σ min(e²/σ², 2(r−d)) + ln(4)·d·n + ln(4n)·k` over squared pixel residuals.
/// Lower is better.
pub fn gric_score(residuals_sq: &[f64], model: GricModel, sigma: f64) -> f64 {
    let (d, k, r) = model.dimensions();
    let n = residuals_sq.len() as f64;
    let cap = 2.0 * (r - d);
    let s2 = sigma * sigma;
    let robust: f64 = residuals_sq.iter().map(|e2| (e2 / s2).min(cap)).sum();
    robust + 4f64.ln() * d * n + (4.0 * n).ln() * k
}
