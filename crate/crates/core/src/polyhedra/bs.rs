use alloc::vec::Vec;

use super::{BlockTerm, Polyhedron, RowKind, RowMeta, RowSink};
use crate::error::{Error, Result};
use crate::model::{segments, Algorithm, ChangepointModel};
use crate::segmentation::cusum::cusum_terms;
use crate::segmentation::insert_sorted;

/// The segment of `boundaries`' partition that contains split `b`.
pub(crate) fn segment_of(n: usize, boundaries: &[usize], b: usize) -> Result<(usize, usize)> {
    if b == 0 || b >= n || boundaries.binary_search(&b).is_ok() {
        return Err(Error::ModelMismatch("location is not a split of the current partition"));
    }
    let i = boundaries.partition_point(|&c| c < b);
    let s = if i == 0 { 1 } else { boundaries[i - 1] + 1 };
    let e = boundaries.get(i).copied().unwrap_or(n);
    Ok((s, e))
}

/// Push `d g_w >= g_c` and `d g_w >= -g_c` for one competitor.
pub(crate) fn push_pair<S: RowSink>(sink: &mut S, win: &[BlockTerm; 2], comp: [BlockTerm; 2], meta: RowMeta) {
    let neg = comp.map(|t| BlockTerm { coef: -t.coef, ..t });
    sink.push(&[win[0], win[1], neg[0], neg[1]], 0.0, RowMeta { kind: RowKind::Above, ..meta });
    sink.push(&[win[0], win[1], comp[0], comp[1]], 0.0, RowMeta { kind: RowKind::Below, ..meta });
}

/// Stream the rows of a BS event.
pub fn build_bs<S: RowSink>(model: &ChangepointModel, sink: &mut S) -> Result<()> {
    if model.algo != Algorithm::Bs {
        return Err(Error::ModelMismatch("expected a BS model"));
    }
    model.validate()?;
    let n = model.n;
    let mut boundaries: Vec<usize> = model.initial_cuts.clone();
    for (l, (&b, &d)) in model.locations.iter().zip(&model.directions).enumerate() {
        let step = l + 1;
        let (ws, we) = segment_of(n, &boundaries, b)?;
        let win = cusum_terms(ws, b, we, d.value());
        for (s, e) in segments(n, &boundaries) {
            for c in s..e {
                if c == b {
                    continue;
                }
                push_pair(sink, &win, cusum_terms(s, c, e, 1.0), RowMeta::new(step, RowKind::Above, c));
            }
        }
        insert_sorted(&mut boundaries, b);
    }
    Ok(())
}

/// The BS selection event: `m = 2 sum_l (n - l - 1)` rows without cuts.
pub fn gamma_bs(model: &ChangepointModel) -> Result<Polyhedron> {
    let mut p = Polyhedron::new(model.n);
    build_bs(model, &mut p)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::bs;

    #[test]
    fn row_count_and_feasibility() {
        let y = [0.0, 0.0, 2.0, 2.0];
        let m = bs(&y, 1, &[]).unwrap();
        let p = gamma_bs(&m).unwrap();
        assert_eq!(p.m(), 4);
        let slack = p.slack(&y).unwrap();
        let min = slack.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - (2.0 - 1.1547005383792515)).abs() < 1e-12);
        let y: alloc::vec::Vec<f64> = (0..10).map(|i| libm::sin(i as f64 * 1.7)).collect();
        let p = gamma_bs(&bs(&y, 2, &[]).unwrap()).unwrap();
        assert_eq!(p.m(), 30);
        assert!(p.contains(&y).unwrap());
    }

    #[test]
    fn rejects_other_algorithms() {
        let mut m = bs(&[0.0, 1.0, 1.0], 1, &[]).unwrap();
        m.algo = Algorithm::Cbs;
        assert!(gamma_bs(&m).is_err());
    }
}
