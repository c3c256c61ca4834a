use crate::attacks::deepfool::{deepfool, DeepFoolConfig};
use crate::error::{Error, Result};
use crate::linalg::scale;
use crate::Network;

/// Bisects `t ∈ [0, 1]` on `x + t·δ`, keeping `x + t_hi·δ` adversarial and
/// `x + t_lo·δ` in the original class, and returns `t_hi·δ`.
pub fn boundary_refine(net: &Network, x: &[f64], delta: &[f64], iters: usize) -> Result<Vec<f64>> {
    let current = net.classify(x)?;
    let at = |t: f64| -> Result<usize> {
        let z: Vec<f64> = x.iter().zip(delta).map(|(&xi, &di)| xi + t * di).collect();
        net.classify(&z)
    };
    if at(1.0)? == current {
        return Err(Error::Precondition("x + δ is not adversarial".into()));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if at(mid)? != current {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(scale(hi, delta))
}

/// Boundary point on the segment from `x` to the origin, if the origin is
/// classified differently from `x`.
pub fn fallback_start(net: &Network, x: &[f64], iters: usize) -> Result<Option<Vec<f64>>> {
    let origin = vec![0.0; x.len()];
    if net.classify(&origin)? == net.classify(x)? {
        return Ok(None);
    }
    let towards_origin = scale(-1.0, x);
    boundary_refine(net, x, &towards_origin, iters).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmSource {
    DeepFool,
    Fallback,
    None,
}

impl WarmSource {
    pub fn as_str(self) -> &'static str {
        match self {
            WarmSource::DeepFool => "deepfool",
            WarmSource::Fallback => "fallback",
            WarmSource::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    /// Refined starting perturbation.
    pub delta: Option<Vec<f64>>,
    pub source: WarmSource,
    /// Raw DeepFool output before refinement.
    pub deepfool: Option<Vec<f64>>,
}

/// DeepFool followed by boundary refinement; the segment towards the origin
/// when DeepFool fails.
pub fn warm_start(
    net: &Network,
    x: &[f64],
    df: &DeepFoolConfig,
    refine_iters: usize,
) -> Result<WarmStart> {
    let raw = deepfool(net, x, df)?;
    if let Some(raw_delta) = &raw {
        let delta = boundary_refine(net, x, raw_delta, refine_iters)?;
        return Ok(WarmStart {
            delta: Some(delta),
            source: WarmSource::DeepFool,
            deepfool: raw,
        });
    }
    match fallback_start(net, x, refine_iters)? {
        Some(delta) => Ok(WarmStart {
            delta: Some(delta),
            source: WarmSource::Fallback,
            deepfool: None,
        }),
        None => Ok(WarmStart {
            delta: None,
            source: WarmSource::None,
            deepfool: None,
        }),
    }
}
