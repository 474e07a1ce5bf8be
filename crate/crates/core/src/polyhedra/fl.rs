use alloc::vec::Vec;

use super::{Polyhedron, RowKind, RowMeta, RowSink};
use crate::error::{Error, Result};
use crate::model::{Algorithm, ChangepointModel, Sign};
use crate::segmentation::fl::interior;

/// Stream the rows of a fused lasso event.
///
/// Per step and competing coordinate `i`, the dual coordinate must still be
/// feasible when the winner hits, `|a_i + t_w c_i| <= t_w`:
/// `(1 - c_i) t_w - a_i >= 0` and `(1 + c_i) t_w + a_i >= 0`, where
/// `t_w = d a_w / (1 - d c_w)` is the winner's hitting time (linear in `y`).
/// Since `|u_i(lambda)| - lambda` is convex in `lambda`, this is the same as
/// `i` not hitting anywhere above `t_w`; the competitors' signs are not
/// conditioned on.
pub fn build_fl<S: RowSink>(model: &ChangepointModel, sink: &mut S) -> Result<()> {
    if model.algo != Algorithm::Fl {
        return Err(Error::ModelMismatch("expected a fused lasso model"));
    }
    let signs = model.signs.as_ref().ok_or(Error::ModelMismatch("fused lasso model without sign vectors"))?;
    model.validate()?;
    if !model.initial_cuts.is_empty() {
        return Err(Error::ModelMismatch("fused lasso events do not support initial cuts"));
    }
    let n = model.n;
    let mut bset: Vec<(usize, Sign)> = Vec::with_capacity(model.k());
    for (l, (&b, &d)) in model.locations.iter().zip(&model.directions).enumerate() {
        let step = l + 1;
        let coords = interior(n, &bset);
        if signs[l].len() != coords.len() {
            return Err(Error::ModelMismatch("sign vector length does not match the interior"));
        }
        let w = coords.iter().find(|c| c.i == b).ok_or(Error::ModelMismatch("location is not interior"))?;
        let wden = w.denom(d);
        if !(wden > 1e-12) {
            return Err(Error::ModelMismatch("winning coordinate can never hit"));
        }
        let a_w = |scale: f64| w.a_terms(d.value() * scale / wden);
        for c in coords.iter().filter(|c| c.i != b) {
            let plus = c.a_terms(1.0);
            let minus = c.a_terms(-1.0);
            let t_lo = a_w(1.0 - c.c);
            let t_hi = a_w(1.0 + c.c);
            sink.push(&[t_lo[0], t_lo[1], minus[0], minus[1]], 0.0, RowMeta::new(step, RowKind::HitTime, c.i));
            sink.push(&[t_hi[0], t_hi[1], plus[0], plus[1]], 0.0, RowMeta::new(step, RowKind::HitTime, c.i));
        }
        let pos = bset.partition_point(|&(x, _)| x < b);
        bset.insert(pos, (b, d));
    }
    Ok(())
}

/// The fused lasso selection event (same row count as BS).
pub fn gamma_fl(model: &ChangepointModel) -> Result<Polyhedron> {
    let mut p = Polyhedron::new(model.n);
    build_fl(model, &mut p)?;
    Ok(p)
}
