use alloc::vec::Vec;

use super::bs::push_pair;
use super::{BlockTerm, Polyhedron, RowKind, RowMeta, RowSink};
use crate::error::{Error, Result};
use crate::model::{Algorithm, ChangepointModel};
use crate::segmentation::cusum::cusum_terms;
use crate::segmentation::wbs::interval_active;
use crate::segmentation::{insert_sorted, IntervalSet};

/// Stream the rows of a WBS event for the interval set `w`.
pub fn build_wbs<S: RowSink>(model: &ChangepointModel, w: &IntervalSet, sink: &mut S) -> Result<()> {
    if model.algo != Algorithm::Wbs {
        return Err(Error::ModelMismatch("expected a WBS model"));
    }
    model.validate()?;
    let jmax = model.jmax.as_ref().ok_or(Error::ModelMismatch("WBS model without jmax"))?;
    let mut boundaries: Vec<usize> = model.initial_cuts.clone();
    for (l, ((&b, &d), &j)) in model.locations.iter().zip(&model.directions).zip(jmax).enumerate() {
        let step = l + 1;
        let &(ws, we) = w.intervals.get(j.wrapping_sub(1)).ok_or(Error::ModelMismatch("jmax outside the interval set"))?;
        if !(ws <= b && b < we) || !interval_active(ws, we, &boundaries) {
            return Err(Error::ModelMismatch("winning interval is not admissible"));
        }
        let win = cusum_terms(ws, b, we, d.value());
        for (idx, &(s, e)) in w.intervals.iter().enumerate() {
            if !interval_active(s, e, &boundaries) {
                continue;
            }
            for c in s..e {
                if idx + 1 == j && c == b {
                    continue;
                }
                let meta = RowMeta { step, kind: RowKind::Above, interval: idx + 1, a: 0, b: c };
                push_pair(sink, &win, cusum_terms(s, c, e, 1.0), meta);
            }
        }
        insert_sorted(&mut boundaries, b);
    }
    Ok(())
}

pub(crate) struct WinStep {
    pub boundaries: Vec<usize>,
    pub win: [BlockTerm; 2],
    pub interval: (usize, usize),
    pub b: usize,
}

/// The steps of a fitted WBS model. The rows a candidate interval
/// contributes depend only on its ends, so the event of any interval set
/// that keeps the winners is an intersection of per-interval pieces.
pub(crate) struct WbsSteps {
    pub steps: Vec<WinStep>,
}

impl WbsSteps {
    pub fn new(model: &ChangepointModel, w: &IntervalSet) -> Result<Self> {
        if model.algo != Algorithm::Wbs {
            return Err(Error::ModelMismatch("expected a WBS model"));
        }
        model.validate()?;
        let jmax = model.jmax.as_ref().ok_or(Error::ModelMismatch("WBS model without jmax"))?;
        let mut boundaries: Vec<usize> = model.initial_cuts.clone();
        let mut steps = Vec::with_capacity(model.k());
        for ((&b, &d), &j) in model.locations.iter().zip(&model.directions).zip(jmax) {
            let &(ws, we) = w.intervals.get(j.wrapping_sub(1)).ok_or(Error::ModelMismatch("jmax outside the interval set"))?;
            if !(ws <= b && b < we) || !interval_active(ws, we, &boundaries) {
                return Err(Error::ModelMismatch("winning interval is not admissible"));
            }
            steps.push(WinStep { boundaries: boundaries.clone(), win: cusum_terms(ws, b, we, d.value()), interval: (ws, we), b });
            insert_sorted(&mut boundaries, b);
        }
        Ok(WbsSteps { steps })
    }
}

/// The WBS selection event.
pub fn gamma_wbs(model: &ChangepointModel, w: &IntervalSet) -> Result<Polyhedron> {
    let mut p = Polyhedron::new(model.n);
    build_wbs(model, w, &mut p)?;
    Ok(p)
}
