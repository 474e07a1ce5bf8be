use alloc::vec::Vec;

use super::{BlockTerm, Polyhedron, RowKind, RowMeta, RowSink};
use crate::error::{Error, Result};
use crate::model::{segments, Algorithm, ChangepointModel};
use crate::segmentation::cusum::{circular_terms, circular_weight};
use crate::segmentation::insert_sorted;

/// Stream the rows of a CBS event.
pub fn build_cbs<S: RowSink>(model: &ChangepointModel, sink: &mut S) -> Result<()> {
    if model.algo != Algorithm::Cbs {
        return Err(Error::ModelMismatch("expected a CBS model"));
    }
    model.validate()?;
    let n = model.n;
    let partners = model.partners.as_ref().ok_or(Error::ModelMismatch("CBS model without partners"))?;
    let mut boundaries: Vec<usize> = model.initial_cuts.clone();
    for (l, ((&b, &d), &a)) in model.locations.iter().zip(&model.directions).zip(partners).enumerate() {
        let step = l + 1;
        let (ws, we) = super::bs::segment_of(n, &boundaries, a)?;
        if !(b < we) || boundaries.binary_search(&b).is_ok() {
            return Err(Error::ModelMismatch("CBS pair does not fit in one segment"));
        }
        let ww = circular_weight(ws, a, b, we).ok_or(Error::ModelMismatch("degenerate CBS weight"))?;
        let win = circular_terms(ws, a, b, we, ww, d.value());
        for (s, e) in segments(n, &boundaries) {
            if e < s + 2 {
                continue;
            }
            for t in s + 1..e {
                for r in s..t {
                    if r == a && t == b {
                        continue;
                    }
                    let Some(cw) = circular_weight(s, r, t, e) else { continue };
                    let comp = circular_terms(s, r, t, e, cw, 1.0);
                    let neg = comp.map(|x| BlockTerm { coef: -x.coef, ..x });
                    let meta = RowMeta { step, kind: RowKind::Above, interval: 0, a: r, b: t };
                    sink.push(&[win[0], win[1], neg[0], neg[1]], 0.0, meta);
                    sink.push(&[win[0], win[1], comp[0], comp[1]], 0.0, RowMeta { kind: RowKind::Below, ..meta });
                }
            }
        }
        insert_sorted(&mut boundaries, a);
        insert_sorted(&mut boundaries, b);
    }
    Ok(())
}

/// The CBS selection event.
pub fn gamma_cbs(model: &ChangepointModel) -> Result<Polyhedron> {
    let mut p = Polyhedron::new(model.n);
    build_cbs(model, &mut p)?;
    Ok(p)
}
