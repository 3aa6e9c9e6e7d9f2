use serde::Serialize;

use crate::boundary::BoundaryModel;
use crate::error::{Error, Result};

/// Geometrically shrinking scales `ε_0 > ε_1 > …` with ratio `512 N²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSchedule {
    pub n: usize,
    pub epsilons: Vec<f64>,
    /// Stage count asked for, `None` meaning "run to saturation".
    pub requested: Option<usize>,
    /// Set when the request went past the saturation stage.
    pub truncated: bool,
}

impl ScaleSchedule {
    pub fn ratio(n: usize) -> f64 {
        512.0 * (n * n) as f64
    }

    /// `stages + 1` scales starting at `eps0`.
    pub fn geometric(eps0: f64, n: usize, stages: usize) -> Self {
        let r = Self::ratio(n);
        let mut epsilons = vec![eps0];
        for j in 1..=stages {
            epsilons.push(epsilons[j - 1] / r);
        }
        Self { n, epsilons, requested: Some(stages), truncated: false }
    }

    pub fn stages(&self) -> usize {
        self.epsilons.len() - 1
    }

    pub fn epsilon(&self, j: usize) -> f64 {
        self.epsilons[j]
    }
}

/// Schedule with `ε_0 = max_η d_h(μ⁰, η)` for the first proxy `μ⁰`. The
/// stage count is capped at the first stage whose scale drops below the
/// smallest boundary distance, after which every proxy is selected.
pub fn make_schedule(
    boundary: &BoundaryModel,
    n: usize,
    stages: Option<usize>,
) -> Result<ScaleSchedule> {
    if boundary.is_empty() {
        return Err(Error::InvalidArgument("boundary has no proxies".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("doubling count N must be positive".into()));
    }
    let eps0 = (0..boundary.len()).map(|b| boundary.d(0, b)).fold(0.0, f64::max);
    let saturation = match boundary.min_separation() {
        None => 0,
        Some(min) => {
            let r = ScaleSchedule::ratio(n);
            let mut eps = eps0;
            let mut j = 0;
            while eps >= min {
                eps /= r;
                j += 1;
            }
            j
        }
    };
    let count = stages.map_or(saturation, |s| s.min(saturation));
    let mut schedule = ScaleSchedule::geometric(eps0, n, count);
    schedule.requested = stages;
    schedule.truncated = stages.is_some_and(|s| s > saturation);
    Ok(schedule)
}
