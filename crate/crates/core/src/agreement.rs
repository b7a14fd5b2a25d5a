//! Cohen's kappa between two annotators over the 13 clock labels.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schemes::ClockDirection;

/// One annotator's label for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub image_id: String,
    pub clock: ClockDirection,
    pub annotator: String,
}

impl GroundTruthLabel {
    pub fn new(
        image_id: impl Into<String>,
        clock: ClockDirection,
        annotator: impl Into<String>,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            clock,
            annotator: annotator.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("label sets cover different images (e.g. {0:?})")]
    IdSetMismatch(String),
    #[error("image {0:?} is labeled more than once by the same annotator")]
    DuplicateLabel(String),
    #[error("no labeled images")]
    Empty,
}

/// `confusion[a][b]` counts images annotator A labeled `ALL[a]` and
/// annotator B labeled `ALL[b]`, in dial order 9:00..3:00.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub p_observed: f64,
    pub p_expected: f64,
    pub confusion: [[u32; 13]; 13],
    pub n_items: usize,
}

fn index_by_image(
    labels: &[GroundTruthLabel],
) -> Result<BTreeMap<&str, ClockDirection>, AgreementError> {
    let mut map = BTreeMap::new();
    for l in labels {
        if map.insert(l.image_id.as_str(), l.clock).is_some() {
            return Err(AgreementError::DuplicateLabel(l.image_id.clone()));
        }
    }
    Ok(map)
}

/// Both lists must cover the same image ids, one label each.
/// Defined as 1 when chance agreement is already 1 (a single shared class).
pub fn cohens_kappa(
    labels_a: &[GroundTruthLabel],
    labels_b: &[GroundTruthLabel],
) -> Result<AgreementReport, AgreementError> {
    let a = index_by_image(labels_a)?;
    let b = index_by_image(labels_b)?;
    if let Some(id) = a.keys().find(|k| !b.contains_key(*k)) {
        return Err(AgreementError::IdSetMismatch(String::from(*id)));
    }
    if let Some(id) = b.keys().find(|k| !a.contains_key(*k)) {
        return Err(AgreementError::IdSetMismatch(String::from(*id)));
    }
    if a.is_empty() {
        return Err(AgreementError::Empty);
    }

    let mut confusion = [[0u32; 13]; 13];
    for (id, ca) in &a {
        confusion[ca.index()][b[id].index()] += 1;
    }

    let n = a.len() as u64;
    let agree: u64 = (0..13).map(|k| u64::from(confusion[k][k])).sum();
    let chance: u64 = (0..13)
        .map(|k| {
            let row: u64 = confusion[k].iter().map(|&v| u64::from(v)).sum();
            let col: u64 = confusion.iter().map(|r| u64::from(r[k])).sum();
            row * col
        })
        .sum();

    let p_observed = agree as f64 / n as f64;
    let p_expected = chance as f64 / (n * n) as f64;
    let kappa = if chance == n * n {
        1.0
    } else {
        (p_observed - p_expected) / (1.0 - p_expected)
    };

    Ok(AgreementReport {
        kappa,
        p_observed,
        p_expected,
        confusion,
        n_items: a.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn labels(who: &str, clocks: &[&str]) -> Vec<GroundTruthLabel> {
        clocks
            .iter()
            .enumerate()
            .map(|(i, c)| GroundTruthLabel::new(format!("img{i:02}"), c.parse().unwrap(), who))
            .collect()
    }

    /// Ten items: A = six 12:00 + four 1:00. B agrees on five 12:00 and two
    /// 1:00; one of A's 12:00 becomes 1:00, two of A's 1:00 become 12:00.
    fn ten_item_example() -> (Vec<GroundTruthLabel>, Vec<GroundTruthLabel>) {
        let a = labels(
            "a",
            &[
                "12:00", "12:00", "12:00", "12:00", "12:00", "12:00", "1:00", "1:00", "1:00",
                "1:00",
            ],
        );
        let b = labels(
            "b",
            &[
                "12:00", "12:00", "12:00", "12:00", "12:00", "1:00", "1:00", "1:00", "12:00",
                "12:00",
            ],
        );
        (a, b)
    }

    /// Contingency-table kappa from plain string labels.
    fn kappa_oracle(a: &[&str], b: &[&str]) -> f64 {
        let n = a.len() as f64;
        let mut classes: Vec<&str> = a.iter().chain(b).copied().collect();
        classes.sort();
        classes.dedup();
        let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
        let pe: f64 = classes
            .iter()
            .map(|k| {
                let ca = a.iter().filter(|x| *x == k).count() as f64;
                let cb = b.iter().filter(|x| *x == k).count() as f64;
                (ca / n) * (cb / n)
            })
            .sum();
        (po - pe) / (1.0 - pe)
    }

    #[test]
    fn ten_item_contingency_example() {
        let (a, b) = ten_item_example();
        let r = cohens_kappa(&a, &b).unwrap();
        // p_o = 0.7, p_e = 0.6*0.7 + 0.4*0.3 = 0.54, kappa = 0.16 / 0.46
        let sa: Vec<&str> = a.iter().map(|l| l.clock.label()).collect();
        let sb: Vec<&str> = b.iter().map(|l| l.clock.label()).collect();
        let oracle = kappa_oracle(&sa, &sb);
        assert!((oracle - 0.347_826_086_956_521_7).abs() < 1e-12);
        assert!((r.kappa - oracle).abs() < 1e-12);
        assert!((r.p_observed - 0.7).abs() < 1e-12);
        assert!((r.p_expected - 0.54).abs() < 1e-12);
        assert_eq!(r.n_items, 10);
        let twelve = ClockDirection::Twelve.index();
        let one = ClockDirection::One.index();
        assert_eq!(r.confusion[twelve][twelve], 5);
        assert_eq!(r.confusion[twelve][one], 1);
        assert_eq!(r.confusion[one][twelve], 2);
        assert_eq!(r.confusion[one][one], 2);
    }

    #[test]
    fn identical_lists_are_perfect() {
        let a = labels("a", &["9:00", "12:00", "3:00", "12:30"]);
        let b = labels("b", &["9:00", "12:00", "3:00", "12:30"]);
        assert_eq!(cohens_kappa(&a, &b).unwrap().kappa, 1.0);

        let a = labels("a", &["12:00"; 4]);
        let r = cohens_kappa(&a, &a).unwrap();
        assert_eq!((r.kappa, r.p_expected), (1.0, 1.0));
    }

    #[test]
    fn error_cases() {
        let a = labels("a", &["12:00", "1:00"]);
        let mut b = labels("b", &["12:00", "1:00"]);
        b[1].image_id = "other".into();
        assert!(matches!(
            cohens_kappa(&a, &b),
            Err(AgreementError::IdSetMismatch(_))
        ));

        let mut dup = a.clone();
        dup.push(a[0].clone());
        assert_eq!(
            cohens_kappa(&dup, &a),
            Err(AgreementError::DuplicateLabel("img00".into()))
        );
        assert_eq!(cohens_kappa(&[], &[]), Err(AgreementError::Empty));
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_bounded(
            pairs in proptest::collection::vec((0usize..13, 0usize..13), 1..40),
            seed in any::<u64>(),
        ) {
            let a: Vec<_> = pairs.iter().enumerate()
                .map(|(i, &(x, _))| GroundTruthLabel::new(format!("i{i}"), ClockDirection::ALL[x], "a"))
                .collect();
            let b: Vec<_> = pairs.iter().enumerate()
                .map(|(i, &(_, y))| GroundTruthLabel::new(format!("i{i}"), ClockDirection::ALL[y], "b"))
                .collect();
            let base = cohens_kappa(&a, &b).unwrap();

            let mut shuffled = b.clone();
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(&cohens_kappa(&a, &shuffled).unwrap(), &base);
            prop_assert!(base.kappa <= base.p_observed + 1e-12);
            prop_assert!(base.p_observed <= 1.0);
            let total: u32 = base.confusion.iter().flatten().sum();
            prop_assert_eq!(total as usize, base.n_items);
        }
    }
}
