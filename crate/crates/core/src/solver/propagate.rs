//! Activity-based bound tightening for integer columns.

use super::simplex::LpData;

const TOL: f64 = 1e-9;
const ROUND_TOL: f64 = 1e-7;

/// Tightens the bounds of integer columns implied by the rows and the
/// current bounds. Returns `false` when some row cannot be satisfied.
pub(crate) fn propagate(lp: &LpData, is_int: &[bool], lb: &mut [f64], ub: &mut [f64]) -> bool {
    let m = lp.m;
    let mut queued = vec![true; m];
    let mut queue: std::collections::VecDeque<usize> = (0..m).collect();
    let mut budget = 8 * m + 64;
    while let Some(r) = queue.pop_front() {
        queued[r] = false;
        if budget == 0 {
            break;
        }
        budget -= 1;
        let row = &lp.rows[r];
        let (rlo, rhi) = (lp.row_lb[r], lp.row_ub[r]);
        let mut min_act = 0.0;
        let mut max_act = 0.0;
        let mut finite = true;
        for &(j, a) in row {
            let (lo, hi) = if a > 0.0 { (a * lb[j], a * ub[j]) } else { (a * ub[j], a * lb[j]) };
            if !lo.is_finite() || !hi.is_finite() {
                finite = false;
                break;
            }
            min_act += lo;
            max_act += hi;
        }
        if !finite {
            continue;
        }
        let scale = 1.0 + rlo.abs().min(rhi.abs()).min(1e12);
        if min_act > rhi + TOL * scale || max_act < rlo - TOL * scale {
            return false;
        }
        for &(j, a) in row {
            if !is_int[j] || lb[j] == ub[j] {
                continue;
            }
            let (lo_c, hi_c) = if a > 0.0 { (a * lb[j], a * ub[j]) } else { (a * ub[j], a * lb[j]) };
            let mut new_lb = lb[j];
            let mut new_ub = ub[j];
            if rhi.is_finite() {
                // a x_j <= rhi - (min_act - lo_c)
                let cap = (rhi - (min_act - lo_c)) / a;
                if a > 0.0 {
                    new_ub = new_ub.min((cap + ROUND_TOL).floor());
                } else {
                    new_lb = new_lb.max((cap - ROUND_TOL).ceil());
                }
            }
            if rlo.is_finite() {
                // a x_j >= rlo - (max_act - hi_c)
                let floor_v = (rlo - (max_act - hi_c)) / a;
                if a > 0.0 {
                    new_lb = new_lb.max((floor_v - ROUND_TOL).ceil());
                } else {
                    new_ub = new_ub.min((floor_v + ROUND_TOL).floor());
                }
            }
            if new_lb > new_ub {
                return false;
            }
            if new_lb > lb[j] || new_ub < ub[j] {
                lb[j] = new_lb;
                ub[j] = new_ub;
                for &(r2, _) in &lp.cols[j] {
                    if !queued[r2] {
                        queued[r2] = true;
                        queue.push_back(r2);
                    }
                }
                // activities of this row changed; revisit it later
                break;
            }
        }
    }
    true
}
