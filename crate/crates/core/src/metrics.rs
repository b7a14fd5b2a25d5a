//! Angular error and exact-match accuracy over clock predictions.

use crate::schemes::{angular_distance, ClockDirection};

/// Circular error in degrees between two clock positions.
pub fn clock_error_deg(pred: ClockDirection, truth: ClockDirection) -> f64 {
    angular_distance(pred.degrees(), truth.degrees())
}

/// Mean circular error over `(predicted, truth)` pairs, summed in order.
/// `None` for an empty set.
pub fn mean_absolute_error(pairs: &[(ClockDirection, ClockDirection)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let total: f64 = pairs.iter().map(|&(p, t)| clock_error_deg(p, t)).sum();
    Some(total / pairs.len() as f64)
}

/// Percentage of exact clock matches. `None` for an empty set.
pub fn accuracy_pct(pairs: &[(ClockDirection, ClockDirection)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let hits = pairs.iter().filter(|(p, t)| p == t).count();
    Some(100.0 * hits as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(s: &str) -> ClockDirection {
        s.parse().unwrap()
    }

    #[test]
    fn one_hour_error() {
        let pairs = [(c("10:00"), c("11:00"))];
        assert_eq!(mean_absolute_error(&pairs), Some(30.0));
        assert_eq!(accuracy_pct(&pairs), Some(0.0));
    }

    #[test]
    fn ten_pairs_against_scalar_oracle() {
        let labels = [
            ("12:00", "12:00"),
            ("1:00", "1:00"),
            ("9:00", "9:00"),
            ("11:30", "12:30"),
            ("3:00", "9:00"),
            ("10:00", "11:00"),
            ("2:30", "1:00"),
            ("12:00", "9:30"),
            ("10:30", "1:30"),
            ("11:00", "12:00"),
        ];
        let pairs: Vec<_> = labels.iter().map(|&(p, t)| (c(p), c(t))).collect();
        // degrees via hour*30 (+15), distance via min(d, 360 - d)
        let deg = |s: &str| {
            let (h, m) = s.split_once(':').unwrap();
            let h: f64 = h.parse::<f64>().unwrap() % 12.0;
            h * 30.0 + if m == "30" { 15.0 } else { 0.0 }
        };
        let oracle: f64 = labels
            .iter()
            .map(|&(p, t)| {
                let d = (deg(p) - deg(t)).abs();
                if d > 180.0 {
                    360.0 - d
                } else {
                    d
                }
            })
            .sum::<f64>()
            / 10.0;
        // 0+0+0+30+180+30+45+75+90+30 = 480
        assert_eq!(oracle, 48.0);
        assert_eq!(mean_absolute_error(&pairs), Some(oracle));
        assert_eq!(accuracy_pct(&pairs), Some(30.0));
    }

    #[test]
    fn empty_sets() {
        assert_eq!(mean_absolute_error(&[]), None);
        assert_eq!(accuracy_pct(&[]), None);
    }

    proptest! {
        #[test]
        fn symmetric_and_perfect(ix in proptest::collection::vec((0usize..13, 0usize..13), 1..30)) {
            let pairs: Vec<_> = ix.iter().map(|&(a, b)| (ClockDirection::ALL[a], ClockDirection::ALL[b])).collect();
            let swapped: Vec<_> = pairs.iter().map(|&(a, b)| (b, a)).collect();
            prop_assert_eq!(mean_absolute_error(&pairs), mean_absolute_error(&swapped));
            if accuracy_pct(&pairs) == Some(100.0) {
                prop_assert_eq!(mean_absolute_error(&pairs), Some(0.0));
            }
        }
    }
}
