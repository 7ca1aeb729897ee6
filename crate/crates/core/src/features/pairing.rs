use std::collections::{BTreeMap, HashSet};

use super::FeatureError;
use crate::corpus::{Label, ReviewRecord};

/// Picks `k` AI reference reviews for `target` from the same paper.
///
/// Candidates are grouped by rating distance (exact match first, then
/// nearest, ties toward the lower rating). For AI targets a reference by the
/// target's own generator is never used. Within a group, references by
/// models not yet chosen come first, then the rest; ids break ties.
pub fn pair_references(
    target: &ReviewRecord,
    candidates: &[ReviewRecord],
    k: usize,
) -> Result<Vec<ReviewRecord>, FeatureError> {
    let own_model = if target.is_ai() {
        target.generator_model.as_deref()
    } else {
        None
    };
    let mut groups: BTreeMap<(i64, i64), Vec<&ReviewRecord>> = BTreeMap::new();
    for c in candidates {
        if c.label != Some(Label::Ai) || c.paper_id != target.paper_id || c.id == target.id {
            continue;
        }
        if own_model.is_some() && c.generator_model.as_deref() == own_model {
            continue;
        }
        groups
            .entry(((c.rating - target.rating).abs(), c.rating))
            .or_default()
            .push(c);
    }
    let mut chosen: Vec<&ReviewRecord> = Vec::with_capacity(k);
    let mut models: HashSet<Option<&str>> = HashSet::new();
    for ((distance, _), mut group) in groups {
        if chosen.len() == k {
            break;
        }
        if distance > 0 {
            log::warn!("review {}: using references at rating distance {distance}", target.id);
        }
        group.sort_by(|a, b| a.id.cmp(&b.id));
        let (fresh, repeat): (Vec<_>, Vec<_>) = group
            .into_iter()
            .partition(|c| !models.contains(&c.generator_model.as_deref()));
        let mut fresh_models = HashSet::new();
        let (first, second): (Vec<_>, Vec<_>) = fresh
            .into_iter()
            .partition(|c| fresh_models.insert(c.generator_model.as_deref()));
        for c in first.into_iter().chain(second).chain(repeat) {
            if chosen.len() == k {
                break;
            }
            models.insert(c.generator_model.as_deref());
            chosen.push(c);
        }
    }
    if chosen.len() < k {
        return Err(FeatureError::Pairing {
            review_id: target.id.clone(),
            paper_id: target.paper_id.clone(),
            needed: k,
            found: chosen.len(),
        });
    }
    Ok(chosen.into_iter().cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn review(id: &str, rating: i64, label: Label, model: Option<&str>) -> ReviewRecord {
        ReviewRecord {
            id: id.into(),
            paper_id: "p".into(),
            venue: "v".into(),
            year: 2024,
            rating,
            label: Some(label),
            text: "t".into(),
            generator_model: model.map(String::from),
            source_review_id: None,
        }
    }

    fn ai(id: &str, rating: i64, model: &str) -> ReviewRecord {
        review(id, rating, Label::Ai, Some(model))
    }

    fn ids(v: &[ReviewRecord]) -> Vec<&str> {
        v.iter().map(|r| r.id.as_str()).collect()
    }

    #[test]
    fn exact_fit() {
        let t = review("h", 6, Label::Human, None);
        let c = vec![ai("a", 6, "m1"), ai("b", 6, "m2"), ai("c", 6, "m3")];
        assert_eq!(ids(&pair_references(&t, &c, 3).unwrap()), ["a", "b", "c"]);
    }

    #[test]
    fn ai_target_excludes_own_model() {
        let t = ai("t", 6, "M");
        let c = vec![ai("a", 6, "M"), ai("b", 6, "m2"), ai("c", 6, "m3"), ai("d", 6, "m4")];
        assert_eq!(ids(&pair_references(&t, &c, 3).unwrap()), ["b", "c", "d"]);
    }

    #[test]
    fn too_few_is_error() {
        let t = review("h", 6, Label::Human, None);
        let c = vec![ai("a", 6, "m1"), ai("b", 6, "m2")];
        assert!(matches!(
            pair_references(&t, &c, 3),
            Err(FeatureError::Pairing {
                needed: 3,
                found: 2,
                ..
            })
        ));
    }

    #[test]
    fn non_ai_targets_prefer_distinct_models() {
        let t = review("h", 6, Label::Human, None);
        let c = vec![ai("a", 6, "m1"), ai("b", 6, "m1"), ai("c", 6, "m2"), ai("d", 6, "m3")];
        assert_eq!(ids(&pair_references(&t, &c, 3).unwrap()), ["a", "c", "d"]);
        // but accept repeats rather than fail
        let c = vec![ai("a", 6, "m1"), ai("b", 6, "m1"), ai("c", 6, "m1")];
        assert_eq!(ids(&pair_references(&t, &c, 3).unwrap()), ["a", "b", "c"]);
    }

    #[test]
    fn nearest_rating_fallback_prefers_lower() {
        let t = review("h", 6, Label::Human, None);
        let c = vec![
            ai("a", 6, "m1"),
            ai("b", 8, "m2"),
            ai("c", 5, "m3"),
            ai("d", 7, "m4"),
            ai("e", 3, "m5"),
        ];
        assert_eq!(ids(&pair_references(&t, &c, 3).unwrap()), ["a", "c", "d"]);
    }

    #[test]
    fn ignores_other_papers_and_non_ai() {
        let t = review("h", 6, Label::Human, None);
        let mut other = ai("x", 6, "m9");
        other.paper_id = "q".into();
        let c = vec![
            other,
            review("h2", 6, Label::Human, None),
            review("r", 6, Label::Refined, Some("m1")),
            ai("a", 6, "m1"),
        ];
        assert_eq!(ids(&pair_references(&t, &c, 1).unwrap()), ["a"]);
        assert!(pair_references(&t, &c, 2).is_err());
    }

    proptest! {
        #[test]
        fn result_is_exact_size_unique_and_order_independent(
            specs in proptest::collection::vec((1i64..10, 0usize..4), 0..12),
            target_rating in 1i64..10,
            k in 1usize..5,
        ) {
            let c: Vec<ReviewRecord> = specs.iter().enumerate().map(|(i, (r, m))| ai(&format!("r{i:02}"), *r, &format!("m{m}"))).collect();
            let t = review("h", target_rating, Label::Human, None);
            let mut rev = c.clone();
            rev.reverse();
            match (pair_references(&t, &c, k), pair_references(&t, &rev, k)) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.len(), k);
                    let set: HashSet<_> = a.iter().map(|r| r.id.clone()).collect();
                    prop_assert_eq!(set.len(), k);
                    prop_assert_eq!(ids(&a), ids(&b));
                    // nothing left out is strictly closer than something chosen
                    let worst = a.iter().map(|r| (r.rating - target_rating).abs()).max().unwrap();
                    let closer = c.iter().filter(|r| (r.rating - target_rating).abs() < worst).count();
                    prop_assert!(closer <= k);
                }
                (Err(_), Err(_)) => prop_assert!(c.len() < k),
                _ => prop_assert!(false, "order dependence"),
            }
        }
    }
}
