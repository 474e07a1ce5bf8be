//! Changepoint detection: binary segmentation, wild binary segmentation,
//! circular binary segmentation and the fused lasso path.

pub mod bs;
pub mod cbs;
pub mod cusum;
pub mod fl;
pub mod wbs;

use alloc::vec::Vec;

pub use bs::bs;
pub use cbs::cbs;
pub use cusum::{circular_cusum, cusum, Prefix};
pub use fl::{fl_knots, fl_path};
pub use wbs::{draw_interval, draw_intervals, wbs, IntervalSet};

use crate::error::{Error, Result};
use crate::model::{Algorithm, ChangepointModel};

pub(crate) fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    let pos = v.partition_point(|&c| c < x);
    v.insert(pos, x);
}

pub(crate) fn normalize_cuts(cuts: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut c = cuts.to_vec();
    c.sort_unstable();
    c.dedup();
    if let Some(&bad) = c.iter().find(|&&x| x == 0 || x >= n) {
        return Err(Error::LocationOutOfRange { location: bad, max: n - 1 });
    }
    Ok(c)
}

/// Run `algo` for `k` steps. WBS needs `intervals`; the fused lasso does not
/// support initial cuts.
pub fn detect(
    algo: Algorithm,
    y: &[f64],
    k: usize,
    initial_cuts: &[usize],
    intervals: Option<&IntervalSet>,
) -> Result<ChangepointModel> {
    match algo {
        Algorithm::Bs => bs(y, k, initial_cuts),
        Algorithm::Wbs => {
            let w = intervals.ok_or(Error::InvalidArgument("WBS needs an interval set"))?;
            wbs(y, k, w, initial_cuts)
        }
        Algorithm::Cbs => cbs(y, k, initial_cuts),
        Algorithm::Fl => {
            if !initial_cuts.is_empty() {
                return Err(Error::InvalidArgument("the fused lasso path does not take initial cuts"));
            }
            fl_path(y, k)
        }
    }
}

/// Whether two models describe the same selection (locations, directions
/// and the algorithm-specific extras). Fused lasso sign vectors are
/// diagnostics and are not compared.
pub fn same_selection(a: &ChangepointModel, b: &ChangepointModel) -> bool {
    a.algo == b.algo
        && a.locations == b.locations
        && a.directions == b.directions
        && a.partners == b.partners
        && a.jmax == b.jmax
        && a.initial_cuts == b.initial_cuts
}
