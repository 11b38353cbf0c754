//! Five-number summaries with Tukey hinges, as drawn in Tukey boxplots.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub lower_hinge: f64,
    pub median: f64,
    pub upper_hinge: f64,
    pub max: f64,
    /// Most extreme points within 1.5 × IQR of the hinges.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub mean: f64,
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// `None` for empty input. NaNs are rejected.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    // Tukey hinges: medians of the halves, each half including the median
    // when n is odd.
    let half = n.div_ceil(2);
    let lower_hinge = median_sorted(&xs[..half]);
    let upper_hinge = median_sorted(&xs[n - half..]);
    let iqr = upper_hinge - lower_hinge;
    let (lo_fence, hi_fence) = (lower_hinge - 1.5 * iqr, upper_hinge + 1.5 * iqr);
    let whisker_low = *xs.iter().find(|&&x| x >= lo_fence).expect("non-empty");
    let whisker_high = *xs
        .iter()
        .rev()
        .find(|&&x| x <= hi_fence)
        .expect("non-empty");
    Some(Summary {
        n,
        min: xs[0],
        lower_hinge,
        median: median_sorted(&xs),
        upper_hinge,
        max: xs[n - 1],
        whisker_low,
        whisker_high,
        mean: xs.iter().sum::<f64>() / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn odd_count() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.lower_hinge, s.median, s.upper_hinge), (2.0, 3.0, 4.0));
        assert_eq!((s.min, s.max), (1.0, 5.0));
    }

    #[test]
    fn even_count() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.lower_hinge, s.median, s.upper_hinge), (1.5, 2.5, 3.5));
    }

    #[test]
    fn single_value() {
        let s = summarize(&[7.5]).unwrap();
        assert_eq!(
            (s.min, s.lower_hinge, s.median, s.upper_hinge, s.max),
            (7.5, 7.5, 7.5, 7.5, 7.5)
        );
    }

    #[test]
    fn outlier_is_outside_whiskers() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(s.whisker_high, 4.0);
        assert_eq!(s.max, 100.0);
    }

    #[test]
    fn empty_and_nan() {
        assert!(summarize(&[]).is_none());
        assert!(summarize(&[1.0, f64::NAN]).is_none());
    }

    proptest! {
        #[test]
        fn summary_is_ordered(xs in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let s = summarize(&xs).unwrap();
            prop_assert!(s.min <= s.whisker_low && s.whisker_low <= s.lower_hinge);
            prop_assert!(s.lower_hinge <= s.median && s.median <= s.upper_hinge);
            prop_assert!(s.upper_hinge <= s.whisker_high && s.whisker_high <= s.max);
        }
    }
}
