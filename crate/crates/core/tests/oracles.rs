//! Independent reimplementations checked against the library.

use rand::Rng;
use rand_distr::StandardNormal;

use segsel_core::contrast::segment_contrast;
use segsel_core::model::segments;
use segsel_core::polyhedra::{self, gamma_bs_ic, ic_stop};
use segsel_core::rng::rng_for;
use segsel_core::saturated::truncation_bounds;
use segsel_core::segmentation::{bs, cbs, draw_intervals, fl_knots, fl_path, same_selection, wbs, IntervalSet};
use segsel_core::selected::{build_sufficient_constraints, KnownSigmaSampler};
use segsel_core::{Polyhedron, Sign};

fn normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn mean(y: &[f64], lo: usize, hi: usize) -> f64 {
    y[lo - 1..hi].iter().sum::<f64>() / (hi + 1 - lo) as f64
}

fn cusum(y: &[f64], s: usize, b: usize, e: usize) -> f64 {
    let w = (1.0 / (1.0 / (e - b) as f64 + 1.0 / (b + 1 - s) as f64)).sqrt();
    w * (mean(y, b + 1, e) - mean(y, s, b))
}

fn circular(y: &[f64], s: usize, a: usize, b: usize, e: usize) -> Option<f64> {
    let rest = (e + a).checked_sub(s + b).filter(|&r| r > 0)?;
    let w = (1.0 / (1.0 / (b - a) as f64 + 1.0 / rest as f64)).sqrt();
    let inside = mean(y, a + 1, b);
    let out: Vec<f64> = (s..=a).chain(b + 1..=e).map(|i| y[i - 1]).collect();
    Some(w * (inside - out.iter().sum::<f64>() / out.len() as f64))
}

fn insert(v: &mut Vec<usize>, x: usize) {
    v.push(x);
    v.sort_unstable();
}

#[test]
fn bs_matches_exhaustive_search() {
    let mut rng = rng_for(1, 900, 0);
    for _ in 0..200 {
        let n = rng.random_range(4..16);
        let k = rng.random_range(1..=3.min(n - 1));
        let y = normals(&mut rng, n);
        let m = bs(&y, k, &[]).unwrap();
        let mut cuts = Vec::new();
        for l in 0..k {
            let mut best = (0.0f64, 0, Sign::Plus);
            for (s, e) in segments(n, &cuts) {
                for b in s..e {
                    let g = cusum(&y, s, b, e);
                    if g.abs() > best.0 {
                        best = (g.abs(), b, Sign::of(g));
                    }
                }
            }
            assert_eq!((m.locations[l], m.directions[l]), (best.1, best.2));
            insert(&mut cuts, best.1);
        }
    }
}

#[test]
fn wbs_matches_exhaustive_search() {
    let mut rng = rng_for(1, 901, 0);
    for _ in 0..100 {
        let n = rng.random_range(5..20);
        let w = draw_intervals(n, 12, &mut rng).unwrap();
        let y = normals(&mut rng, n);
        let Ok(m) = wbs(&y, 2, &w, &[]) else { continue };
        let mut cuts: Vec<usize> = Vec::new();
        for l in 0..2 {
            let mut best = (0.0f64, 0, 0, Sign::Plus);
            for (j, &(s, e)) in w.intervals.iter().enumerate() {
                if cuts.iter().any(|&c| s <= c && c < e) {
                    continue;
                }
                for b in s..e {
                    let g = cusum(&y, s, b, e);
                    if g.abs() > best.0 {
                        best = (g.abs(), j + 1, b, Sign::of(g));
                    }
                }
            }
            assert_eq!(m.jmax.as_ref().unwrap()[l], best.1);
            assert_eq!((m.locations[l], m.directions[l]), (best.2, best.3));
            insert(&mut cuts, best.2);
        }
    }
}

#[test]
fn cbs_matches_exhaustive_search() {
    let mut rng = rng_for(1, 902, 0);
    for _ in 0..100 {
        let n = rng.random_range(6..14);
        let y = normals(&mut rng, n);
        let Ok(m) = cbs(&y, 2, &[]) else { continue };
        let mut cuts = Vec::new();
        for l in 0..2 {
            let mut best = (0.0f64, 0, 0, Sign::Plus);
            for (s, e) in segments(n, &cuts) {
                for a in s..e {
                    for b in a + 1..e {
                        let Some(g) = circular(&y, s, a, b, e) else { continue };
                        if g.abs() > best.0 {
                            best = (g.abs(), a, b, Sign::of(g));
                        }
                    }
                }
            }
            let got = (m.partners.as_ref().unwrap()[l], m.locations[l], m.directions[l]);
            assert_eq!(got, (best.1, best.2, best.3));
            insert(&mut cuts, best.1);
            insert(&mut cuts, best.2);
        }
    }
}

/// Primal fused lasso fit at `lambda` by accelerated projected gradient on
/// the box-constrained dual.
fn fused_lasso(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let primal = |u: &[f64]| -> Vec<f64> {
        // beta = y - D^T u with (D beta)_i = beta_{i+1} - beta_i
        (0..n)
            .map(|i| {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i < n - 1 { u[i] } else { 0.0 };
                y[i] - (left - right)
            })
            .collect()
    };
    let mut u = vec![0.0; n - 1];
    let mut z = u.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let beta = primal(&z);
        let next: Vec<f64> = (0..n - 1).map(|i| (z[i] + 0.25 * (beta[i + 1] - beta[i])).clamp(-lambda, lambda)).collect();
        let t2 = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&u).map(|(a, b)| a + (t - 1.0) / t2 * (a - b)).collect();
        u = next;
        t = t2;
    }
    primal(&u)
}

#[test]
fn fused_lasso_path_matches_dual_solution() {
    let mut rng = rng_for(1, 903, 0);
    for _ in 0..5 {
        let n = 10;
        let mut y = normals(&mut rng, n);
        for v in &mut y[4..7] {
            *v += 2.0;
        }
        let m = fl_path(&y, 3).unwrap();
        let knots = fl_knots(&y, &m).unwrap();
        // first knot in closed form
        let ybar = y.iter().sum::<f64>() / n as f64;
        let mut u = 0.0;
        let mut first = (0.0f64, 0);
        for (i, yi) in y.iter().enumerate().take(n - 1) {
            u += yi - ybar;
            if u.abs() > first.0 {
                first = (u.abs(), i + 1);
            }
        }
        assert!((knots[0] - first.0).abs() < 1e-10);
        assert_eq!(m.locations[0], first.1);
        for l in 1..3 {
            let lambda = 0.5 * (knots[l - 1] + knots[l]);
            let beta = fused_lasso(&y, lambda);
            let mut jumps: Vec<usize> = (1..n).filter(|&i| (beta[i] - beta[i - 1]).abs() > 1e-6).collect();
            jumps.sort_unstable();
            let mut want = m.locations[..l].to_vec();
            want.sort_unstable();
            assert_eq!(jumps, want, "lambda {lambda}");
        }
    }
}

fn along(y: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    let nv2: f64 = v.iter().map(|x| x * x).sum();
    let vty: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
    y.iter().zip(v).map(|(a, b)| a + (t - vty) / nv2 * b).collect()
}

fn edge(p: &Polyhedron, y: &[f64], v: &[f64], inside: f64, dir: f64) -> f64 {
    let mut step = 1.0;
    while p.contains(&along(y, v, inside + dir * step)).unwrap() {
        step *= 2.0;
        if step > 1e6 {
            return dir * f64::INFINITY;
        }
    }
    let (mut a, mut b) = (inside, inside + dir * step);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if p.contains(&along(y, v, mid)).unwrap() {
            a = mid;
        } else {
            b = mid;
        }
    }
    a
}

#[test]
fn truncation_limits_match_bisection() {
    let mut rng = rng_for(1, 904, 0);
    for _ in 0..50 {
        let n = 12;
        let mut y = normals(&mut rng, n);
        for v in &mut y[6..] {
            *v += 1.0;
        }
        let m = bs(&y, 2, &[]).unwrap();
        let p = polyhedra::gamma(&m, None).unwrap();
        for j in 1..=2 {
            let v = segment_contrast(&m, j).unwrap();
            let tb = truncation_bounds(&p, &y, &v, 1.0).unwrap();
            let vty = v.dot(&y);
            let lo = edge(&p, &y, &v.v, vty, -1.0);
            let up = edge(&p, &y, &v.v, vty, 1.0);
            for (a, b) in [(tb.vlo, lo), (tb.vup, up)] {
                assert!(a == b || (a - b).abs() < 1e-7 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn intervals_are_uniform_over_pairs() {
    let n = 6;
    let draws = 60_000;
    let mut rng = rng_for(1, 905, 0);
    let w: IntervalSet = draw_intervals(n, draws, &mut rng).unwrap();
    let mut counts = std::collections::HashMap::new();
    for &(s, e) in &w.intervals {
        assert!(1 <= s && s < e && e <= n);
        *counts.entry((s, e)).or_insert(0usize) += 1;
    }
    let cells = n * (n - 1) / 2;
    assert_eq!(counts.len(), cells);
    let expect = draws as f64 / cells as f64;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 0.999 quantile of chi-square with 14 degrees of freedom
    assert!(chi2 < 36.12, "chi2 = {chi2}");
}

#[test]
fn known_sigma_sampler_without_rows_is_the_conditional_gaussian() {
    let n = 10;
    let y: Vec<f64> = (0..n).map(|i| if i < 5 { 0.3 } else { 1.4 } + 0.1 * i as f64).collect();
    let m = bs(&y, 1, &[]).unwrap();
    let v = segment_contrast(&m, 1).unwrap();
    let p = Polyhedron::new(n);
    let sc = build_sufficient_constraints(&m, 1, &y, false).unwrap();
    let sigma2 = 2.0;
    let mut rng = rng_for(1, 906, 0);
    let mut s = KnownSigmaSampler::new(&y, &p, &sc, &v, sigma2, 5, &mut rng).unwrap();
    let draws = 100_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..draws {
        // every other move resamples the contrast coordinate exactly
        s.step(&mut rng);
        s.step(&mut rng);
        let x = s.contrast_value();
        sum += x;
        sum2 += x * x;
    }
    let var = sigma2 * v.norm2();
    let mean = sum / draws as f64;
    let m2 = sum2 / draws as f64;
    assert!(mean.abs() < 3.0 * (var / draws as f64).sqrt(), "mean {mean}");
    // the second moment of a Gaussian has variance 2 var^2
    assert!((m2 - var).abs() < 3.0 * (2.0 * var * var / draws as f64).sqrt(), "{m2} vs {var}");
}

#[test]
fn ic_event_matches_rerun_of_stopping_rule() {
    let mut rng = rng_for(1, 907, 0);
    let n = 30;
    let (q, kmax, sigma2) = (2, 8, 1.0);
    let mut checked = 0;
    let mut inside = 0;
    for _ in 0..10 {
        let mut y = normals(&mut rng, n);
        for v in &mut y[10..20] {
            *v += 2.5;
        }
        let path = bs(&y, kmax, &[]).unwrap();
        let Ok(state) = ic_stop(&y, &path, sigma2, q) else { continue };
        let p = gamma_bs_ic(&path, &state, sigma2).unwrap();
        assert!(p.contains(&y).unwrap());
        let steps = state.conditioned_steps();
        let fixed = path.prefix(steps);
        for i in 0..300 {
            let scale = [0.05, 0.2, 0.6][i % 3];
            let probe: Vec<f64> = y.iter().map(|a| a + scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let slack = p.slack(&probe).unwrap();
            if slack.iter().any(|s| s.abs() < 1e-9) {
                continue;
            }
            let member = slack.iter().all(|&s| s >= 0.0);
            let path2 = bs(&probe, kmax, &[]).unwrap();
            let same_path = same_selection(&path2.prefix(steps), &fixed);
            let signs2 = ic_stop(&probe, &path2, sigma2, q).map(|s| s.signs).unwrap_or_else(|_| {
                // no stop within kmax: signs still defined
                let crit: Vec<f64> = (0..=kmax)
                    .map(|l| segsel_core::model::segment_rss(&probe, &path2.prefix(l).boundaries()) + sigma2 * (n as f64).ln() * l as f64)
                    .collect();
                crit.windows(2).map(|w| Sign::of(w[1] - w[0])).collect()
            });
            let same = same_path && signs2[..steps] == state.signs[..steps];
            assert_eq!(member, same, "probe {i}");
            checked += 1;
            inside += member as usize;
        }
    }
    assert!(checked > 1000 && inside > 100, "{checked} probes, {inside} inside");
}
