use super::GreensError;
use crate::lattice::omega;
use std::f64::consts::PI;

/// Continuum crack Green's function
/// `Ĝ(x, s) = −(1/2π) [ln|ω(x) − ω(s)| − ln|ω(x) − ω(s)′|]`, where `ω(s)′`
/// mirrors `ω(s)` across the image of the crack (`w₁ = 0`).
pub fn continuum_green(x: [f64; 2], s: [f64; 2]) -> Result<f64, GreensError> {
    let on_crack = |p: [f64; 2]| p[1] == 0.0 && p[0] <= 0.0;
    if on_crack(x) || on_crack(s) || x == s {
        return Err(GreensError::ContinuumDomain);
    }
    let wx = omega(x).map_err(|_| GreensError::ContinuumDomain)?;
    let ws = omega(s).map_err(|_| GreensError::ContinuumDomain)?;
    let direct = (wx[0] - ws[0]).hypot(wx[1] - ws[1]);
    let image = (wx[0] + ws[0]).hypot(wx[1] - ws[1]);
    Ok(-(direct.ln() - image.ln()) / (2.0 * PI))
}
