//! ℓᵖ-summability diagnostics for deviation profiles.
//!
//! Verdicts are drawn from finitely many spheres and are heuristic; reports
//! always carry the raw sphere sums `Σ_{|g|=m} σ_G(φ)(g)^p` so callers can
//! assert on ratios rather than on an infinite statement.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::boundary::VisualStructure;
use crate::deviation::DeviationProfile;
use crate::error::{Error, Result};
use crate::scalar::{format_f64, rational_to_f64, CompensatedSum, Rational};

pub const DEFAULT_MARGIN: f64 = 0.05;

/// Number of trailing sphere ratios a verdict is based on.
const VERDICT_WINDOW: usize = 3;

/// `ln(2n − 1)/ε`.
pub fn hausdorff_dimension(vs: &VisualStructure) -> f64 {
    vs.hausdorff_dimension()
}

/// `max{2, D}`: the canonical module is p-summable for every larger p.
pub fn summability_threshold(vs: &VisualStructure) -> f64 {
    hausdorff_dimension(vs).max(2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub p: f64,
    pub radius: usize,
    pub sphere_sums: Vec<f64>,
    pub partial_sum: f64,
    /// `S_{m+1}/S_m`; `None` where `S_m = 0`.
    pub tail_ratios: Vec<Option<f64>>,
    pub verdict: Verdict,
    pub threshold: f64,
    pub margin: f64,
}

/// `σ^p` summed over each sphere.
///
/// Even integer exponents are summed exactly as `(σ²)^{p/2}`; everything else
/// in binary64 with compensated summation in canonical order.
pub fn sphere_sums(profile: &DeviationProfile, p: f64) -> Vec<f64> {
    let even = (p.fract() == 0.0 && p > 0.0 && (p as u64).is_multiple_of(2)).then_some((p as u64 / 2) as usize);
    (0..=profile.radius)
        .map(|m| match even {
            Some(half) => {
                let exact: Rational = profile
                    .sphere(m)
                    .map(|r| num_traits::pow(r.deviation_sq.clone(), half))
                    .sum();
                rational_to_f64(&exact)
            }
            None => {
                let mut acc = CompensatedSum::default();
                for r in profile.sphere(m) {
                    acc.add(rational_to_f64(&r.deviation_sq).powf(p / 2.0));
                }
                acc.value()
            }
        })
        .collect()
}

pub fn lp_report(profile: &DeviationProfile, p: f64, vs: &VisualStructure) -> Result<SummabilityReport> {
    lp_report_with_margin(profile, p, vs, DEFAULT_MARGIN)
}

pub fn lp_report_with_margin(
    profile: &DeviationProfile,
    p: f64,
    vs: &VisualStructure,
    margin: f64,
) -> Result<SummabilityReport> {
    if profile.radius < 4 {
        return Err(Error::domain(format!(
            "profile radius {} < 4 is too small to judge",
            profile.radius
        )));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("exponent must be positive, got {p}")));
    }
    let sums = sphere_sums(profile, p);
    let mut partial = CompensatedSum::default();
    sums.iter().for_each(|&s| partial.add(s));
    let tail_ratios: Vec<Option<f64>> = sums.windows(2).map(|w| (w[0] > 0.0).then(|| w[1] / w[0])).collect();
    let verdict = if sums.iter().all(|&s| s == 0.0) {
        Verdict::Converging
    } else {
        let last: Vec<_> = tail_ratios.iter().rev().take(VERDICT_WINDOW).collect();
        if last.iter().all(|r| matches!(r, Some(x) if *x < 1.0 - margin)) {
            Verdict::Converging
        } else if last.iter().all(|r| matches!(r, Some(x) if *x >= 1.0)) {
            Verdict::Diverging
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(SummabilityReport {
        p,
        radius: profile.radius,
        sphere_sums: sums,
        partial_sum: partial.value(),
        tail_ratios,
        verdict,
        threshold: summability_threshold(vs),
        margin,
    })
}

impl SummabilityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,m,sphere_sum,ratio\n");
        for (m, s) in self.sphere_sums.iter().enumerate() {
            let ratio = m
                .checked_sub(1)
                .and_then(|i| self.tail_ratios[i])
                .map(format_f64)
                .unwrap_or_default();
            out.push_str(&format!("{},{m},{},{ratio}\n", format_f64(self.p), format_f64(*s)));
        }
        out
    }
}

/// Least-squares slope of `ln max_{|g|=m} σ_G(φ)(g)` against `m`, over the
/// spheres `m ≥ 1` where the maximum is nonzero.
pub fn decay_exponent_fit(profile: &DeviationProfile) -> Result<f64> {
    let points: Vec<(f64, f64)> = (1..=profile.radius)
        .filter_map(|m| {
            let max = profile.sphere_max(m);
            (!max.is_zero()).then(|| (m as f64, 0.5 * rational_to_f64(&max).ln()))
        })
        .collect();
    if points.len() < 4 {
        return Err(Error::domain(format!(
            "need at least 4 spheres with nonzero deviation, have {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Sorted-sequence surrogate for `D⁺`-summability.
///
/// With `A = max_g σ(g) e^{ε|g|}` we have `σ ≤ A·T` pointwise for
/// `T(g) = e^{−ε|g|}`, so the decreasing rearrangements satisfy
/// `s_j(σ) ≤ A s_j(T)`. The `j`-th largest value of `T` is `e^{−εk}` with
/// `j ≤ |B_k| ≤ (2n/(2n−2))(2n−1)^k`, giving `s_j(T) ≤ C j^{−1/D}` with
/// `C = (2n/(2n−2))^{1/D}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DPlusCheck {
    pub dimension: f64,
    pub comparison_constant: f64,
    pub count_constant: f64,
    /// `max_j s_j(σ) j^{1/D} / (A C)`; at most 1 when the bound holds.
    pub worst_ratio: f64,
    pub holds: bool,
}

pub fn d_plus_check(profile: &DeviationProfile, vs: &VisualStructure) -> DPlusCheck {
    let dimension = vs.hausdorff_dimension();
    let eps = vs.epsilon();
    let sigmas: Vec<(f64, usize)> = profile.rows.iter().map(|r| (r.deviation(), r.length())).collect();
    let comparison_constant = sigmas
        .iter()
        .map(|&(s, len)| s * (eps * len as f64).exp())
        .fold(0.0, f64::max);
    let params = profile.params;
    let count_constant =
        (params.alphabet_size() as f64 / (params.alphabet_size() - 2) as f64).powf(1.0 / dimension);
    let mut sorted: Vec<f64> = sigmas.iter().map(|s| s.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let scale = comparison_constant * count_constant;
    let worst_ratio = if scale == 0.0 {
        0.0
    } else {
        sorted
            .iter()
            .enumerate()
            .map(|(j, s)| s * ((j + 1) as f64).powf(1.0 / dimension) / scale)
            .fold(0.0, f64::max)
    };
    DPlusCheck {
        dimension,
        comparison_constant,
        count_constant,
        worst_ratio,
        holds: worst_ratio <= 1.0 + 1e-12,
    }
}
