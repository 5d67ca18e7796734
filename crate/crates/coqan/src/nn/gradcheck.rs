//! Finite-difference verification of tape gradients.
//!
//! A check perturbs each input entry by a central difference and compares
//! the numeric slope against the analytic gradient. Relative error uses
//! `|a - n| / max(1e-8, |a| + |n|)` so near-zero gradients do not blow up
//! the ratio.

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;

pub const GRAD_CHECK_EPS: f64 = 1e-5;

/// Worst relative error across all checked entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub entries: usize,
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

/// Compare the analytic gradient of `build`'s scalar output w.r.t. each of
/// `inputs` against central differences.
///
/// `build` must construct the same computation each call from the given
/// leaf values (no hidden randomness), returning the graph, the node ids of
/// the leaves corresponding to `inputs` in order, and the scalar output id.
pub fn check<F>(inputs: &[Tensor], mut build: F) -> GradCheckReport
where
    F: FnMut(&[Tensor]) -> (Graph, Vec<NodeId>, NodeId),
{
    let (mut graph, leaf_ids, out) = build(inputs);
    assert_eq!(
        leaf_ids.len(),
        inputs.len(),
        "builder returned {} leaf ids for {} inputs",
        leaf_ids.len(),
        inputs.len()
    );
    let grads = graph.backward(out);
    let analytic: Vec<Vec<f64>> = leaf_ids.iter().map(|&id| grads.of(id, &graph)).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        entries: 0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        for entry in 0..input.len() {
            let orig = input.data()[entry];
            work[which].data_mut()[entry] = orig + GRAD_CHECK_EPS;
            let (g_plus, _, out_plus) = build(&work);
            let f_plus = g_plus.value(out_plus).item();
            work[which].data_mut()[entry] = orig - GRAD_CHECK_EPS;
            let (g_minus, _, out_minus) = build(&work);
            let f_minus = g_minus.value(out_minus).item();
            work[which].data_mut()[entry] = orig;

            let numeric = (f_plus - f_minus) / (2.0 * GRAD_CHECK_EPS);
            let err = rel_err(analytic[which][entry], numeric);
            if err > report.max_rel_err {
                report.max_rel_err = err;
            }
            report.entries += 1;
        }
    }
    report
}
