//! Lowess: locally weighted linear regression with tricube weights.

/// Smooth `points` (sorted by x) with zero robustness iterations. Each
/// point is fitted by weighted least squares over its nearest
/// `ceil(frac·n)` neighbors, weighted by tricube of the scaled
/// distance, and evaluated at its own x. Fewer than two points come
/// back unchanged.
pub fn lowess(points: &[(f64, f64)], frac: f64) -> Vec<(f64, f64)> {
    assert!(frac > 0.0 && frac <= 1.0, "frac must be in (0, 1]");
    debug_assert!(
        points.windows(2).all(|w| w[0].0 <= w[1].0),
        "points must be sorted by x"
    );
    let n = points.len();
    if n < 2 {
        return points.to_vec();
    }
    let window = ((frac * n as f64).ceil() as usize).clamp(2, n);
    let mut out = Vec::with_capacity(n);
    let mut lo = 0usize;
    for i in 0..n {
        let x = points[i].0;
        // Slide the window right while that brings it closer to x.
        while lo + window < n && points[lo + window].0 - x < x - points[lo].0 {
            lo += 1;
        }
        let hi = lo + window;
        let h = (x - points[lo].0).max(points[hi - 1].0 - x);
        out.push((x, fit_at(&points[lo..hi], x, h)));
    }
    out
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Weighted linear fit over the window, evaluated at `x`. Distances are
/// centered on `x` so the intercept is the prediction.
fn fit_at(window: &[(f64, f64)], x: f64, h: f64) -> f64 {
    let mut sw = 0.0;
    let mut swd = 0.0;
    let mut swdd = 0.0;
    let mut swy = 0.0;
    let mut swdy = 0.0;
    for &(xj, yj) in window {
        let d = xj - x;
        let w = if h > 0.0 { tricube(d.abs() / h) } else { 1.0 };
        sw += w;
        swd += w * d;
        swdd += w * d * d;
        swy += w * yj;
        swdy += w * d * yj;
    }
    let denom = sw * swdd - swd * swd;
    if denom.abs() <= 1e-12 * sw * sw {
        // Degenerate spread: fall back to the weighted mean.
        swy / sw
    } else {
        (swy * swdd - swd * swdy) / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_straight_lines_exactly() {
        let points: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, 3.5 * i as f64 - 2.0)).collect();
        for frac in [0.2, 0.5, 1.0] {
            for (got, want) in lowess(&points, frac).iter().zip(points.iter()) {
                assert!(
                    (got.1 - want.1).abs() <= 1e-9,
                    "frac={frac}: {} vs {}",
                    got.1,
                    want.1
                );
            }
        }
    }

    #[test]
    fn constant_points_stay_constant() {
        let points: Vec<(f64, f64)> = (0..25).map(|i| (i as f64, 0.42)).collect();
        for (_, y) in lowess(&points, 0.3) {
            assert!((y - 0.42).abs() <= 1e-12);
        }
    }

    #[test]
    fn short_inputs_pass_through() {
        assert_eq!(lowess(&[], 0.5), vec![]);
        assert_eq!(lowess(&[(1.0, 2.0)], 0.5), vec![(1.0, 2.0)]);
    }

    /// Five-point hand case, frac 1.0, against a reference run of
    /// statsmodels 0.14 `lowess(y, x, frac=1.0, it=0)`.
    #[test]
    fn matches_frozen_reference_on_hand_case() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 3.0, 7.0, 6.0];
        let points: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
        let expected = [
            REF_HAND_CASE[0],
            REF_HAND_CASE[1],
            REF_HAND_CASE[2],
            REF_HAND_CASE[3],
            REF_HAND_CASE[4],
        ];
        let got = lowess(&points, 1.0);
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g.1 - e).abs() <= 1e-9, "{} vs {e}", g.1);
        }
    }

    // Frozen output of the trusted reference implementation.
    const REF_HAND_CASE: [f64; 5] = [
        2.200561784186708,
        3.232825361657583,
        4.4315525876460775,
        5.502572031567313,
        6.6383729286456274,
    ];
}
