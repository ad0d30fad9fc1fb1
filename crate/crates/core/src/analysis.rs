//! One-call analysis of a candidate point, serializable with stable keys.

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{orient_svd, Mat, Vector};
use crate::model::ProblemSpec;
use crate::qualification::IntersectionRuleCase;
use crate::second_order::{check_second_order, SecondOrderOptions, SecondOrderReport};
use crate::stationarity::{classify_first_order, StationarityReport};

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub objective: String,
    pub shape: (usize, usize),
    pub r: usize,
    pub objective_value: f64,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub stationarity: StationarityReport,
    /// Present only for F-stationary points.
    pub second_order: Option<SecondOrderReport>,
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalysisOptions {
    pub alpha: Option<f64>,
    pub second_order: SecondOrderOptions,
}

/// First-order classification, qualification certificates and, when the
/// point is F-stationary, the second-order tests.
pub fn analyze(prob: &ProblemSpec, x: &Mat, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    prob.check_point(x)?;
    let svd = orient_svd(x, prob.rank_tol)?;
    let stationarity = classify_first_order(prob, x, opts.alpha)?;
    let second_order = if stationarity.is_f {
        let y = Vector::from_vec(stationarity.y.clone());
        Some(check_second_order(prob, x, &y, &opts.second_order)?)
    } else {
        None
    };
    let certified = stationarity
        .qualification
        .as_ref()
        .is_some_and(|q| q.intersection_rule_case != IntersectionRuleCase::NotCertified);
    Ok(AnalysisReport {
        objective: prob.objective.kind.name().to_string(),
        shape: prob.shape(),
        r: prob.r(),
        objective_value: prob.objective.value(x),
        singular_values: svd.sigma.iter().copied().collect(),
        rank: svd.rank(),
        stationarity,
        second_order,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_example_tr, hankel_3x3};

    #[test]
    fn tr_minimizer_gets_second_order_report() {
        let file = build_example_tr().unwrap();
        let rep = analyze(&file.problem, file.point("X4").unwrap(), &AnalysisOptions::default()).unwrap();
        assert!(rep.stationarity.is_f);
        assert!(rep.certified);
        assert!(rep.second_order.is_some());
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["objective", "shape", "r", "objective_value", "singular_values", "rank", "stationarity", "second_order", "certified"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn non_stationary_point_skips_second_order() {
        let file = hankel_3x3(1).unwrap();
        let rep = analyze(&file.problem, file.point("Xtilde").unwrap(), &AnalysisOptions::default()).unwrap();
        assert!(!rep.stationarity.is_f);
        assert!(rep.second_order.is_none());
    }
}
