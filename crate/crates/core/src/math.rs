/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probabilities are clamped to this distance from 0 and 1 before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Weighted binary cross-entropy of probability `p` against label `y`.
pub fn log_loss(p: f64, y: u8, weight: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y = y as f64;
    -weight * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}
