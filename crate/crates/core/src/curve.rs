//! Learning curves and the statistics computed over them.

use alloc::vec::Vec;

/// One window of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    /// Steps completed when the window closed.
    pub step: u64,
    /// Mean delivery time over the window; `None` when nothing was delivered.
    pub mean: Option<f64>,
    pub delivered: u64,
}

/// Windowed mean delivery time over a run, steps strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("no curves to aggregate")]
    Empty,
    #[error("curve {index} has a different step grid")]
    MismatchedGrid { index: usize },
    #[error("curve has no plateau")]
    NotSettled,
}

/// Share of a run, counted from its end, treated as steady state.
pub const STEADY_STATE_SHARE: f64 = 0.2;
/// Default relative tolerance for [`settling_step`].
pub const SETTLING_FRACTION: f64 = 0.10;

impl LearningCurve {
    pub fn new(points: Vec<CurvePoint>) -> Self {
        LearningCurve { points }
    }

    /// Builds a curve from `(step, mean)` pairs with unit delivery counts.
    pub fn from_means(values: &[(u64, Option<f64>)]) -> Self {
        LearningCurve {
            points: values
                .iter()
                .map(|&(step, mean)| CurvePoint {
                    step,
                    mean,
                    delivered: u64::from(mean.is_some()),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = u64> + '_ {
        self.points.iter().map(|p| p.step)
    }

    /// Index of the first point in the trailing steady-state region.
    pub fn plateau_start(&self) -> usize {
        let n = self.points.len();
        let tail = ((n as f64) * STEADY_STATE_SHARE) as usize;
        n - tail.clamp(1.min(n), n)
    }

    /// Mean of the non-gap window means in the steady-state region.
    pub fn plateau_mean(&self) -> Option<f64> {
        mean(
            self.points[self.plateau_start()..]
                .iter()
                .filter_map(|p| p.mean),
        )
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Pointwise mean across curves sharing a step grid. Gaps are skipped; a
/// point is a gap only if it is a gap in every input.
pub fn aggregate_curves(curves: &[LearningCurve]) -> Result<LearningCurve, CurveError> {
    let first = curves.first().ok_or(CurveError::Empty)?;
    for (index, c) in curves.iter().enumerate() {
        if !c.steps().eq(first.steps()) {
            return Err(CurveError::MismatchedGrid { index });
        }
    }
    let points = (0..first.len())
        .map(|i| {
            // sort so the floating-point sum does not depend on input order
            let mut values: Vec<f64> = curves.iter().filter_map(|c| c.points[i].mean).collect();
            values.sort_by(f64::total_cmp);
            CurvePoint {
                step: first.points[i].step,
                mean: mean(values.into_iter()),
                delivered: curves.iter().map(|c| c.points[i].delivered).sum(),
            }
        })
        .collect();
    Ok(LearningCurve { points })
}

/// Earliest step after which every window mean stays at or below
/// `(1 + fraction)` times the plateau mean.
///
/// The plateau mean is taken over the steady-state region (the final
/// [`STEADY_STATE_SHARE`] of windows, at least one). A curve whose
/// steady-state region is still rising by more than `fraction` between its
/// first and second half has no plateau and is reported as
/// [`CurveError::NotSettled`], as is a curve whose last window is above the
/// band.
pub fn settling_step(curve: &LearningCurve, fraction: f64) -> Result<u64, CurveError> {
    let reference = curve.plateau_mean().ok_or(CurveError::NotSettled)?;
    let tail = &curve.points[curve.plateau_start()..];
    let (early, late) = tail.split_at(tail.len() / 2);
    if let (Some(a), Some(b)) = (
        mean(early.iter().filter_map(|p| p.mean)),
        mean(late.iter().filter_map(|p| p.mean)),
    ) {
        if b > (1.0 + fraction) * a {
            return Err(CurveError::NotSettled);
        }
    }
    let limit = (1.0 + fraction) * reference;
    let first_inside = curve
        .points
        .iter()
        .rposition(|p| p.mean.is_some_and(|m| m > limit))
        .map_or(0, |i| i + 1);
    curve
        .points
        .get(first_inside)
        .map(|p| p.step)
        .ok_or(CurveError::NotSettled)
}

/// Mean delivery time over deliveries completing in the final `share` of a
/// run of `total_steps` steps. `deliveries` yields `(delivered_at, time)`.
pub fn steady_state_mean(
    deliveries: impl Iterator<Item = (u64, u64)>,
    total_steps: u64,
    share: f64,
) -> Option<f64> {
    let tail = ((total_steps as f64) * share) as u64;
    let from = total_steps.saturating_sub(tail.max(1));
    let (sum, count) = deliveries
        .filter(|&(at, _)| at > from)
        .fold((0u64, 0u64), |(s, c), (_, t)| (s + t, c + 1));
    (count > 0).then(|| sum as f64 / count as f64)
}
