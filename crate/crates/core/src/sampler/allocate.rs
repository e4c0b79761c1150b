use std::collections::BTreeMap;

use super::ClassAllocation;
use crate::dataset::ClassId;
use crate::error::{CoreError, Result};
use crate::rounding::largest_remainder;

/// Splits the coreset size `m` across classes.
///
/// Shares come from the class sizes (proportional) or from the explicit
/// map. A class whose share exceeds its population is clipped to the
/// population and the overflow is re-apportioned among the remaining
/// classes, again by largest remainder. Budgets sum to `m` unless every
/// class ends up clipped, i.e. `m` exceeds the number of points.
pub fn allocate_class_budgets(
    m: usize,
    class_counts: &BTreeMap<ClassId, usize>,
    policy: &ClassAllocation,
) -> Result<BTreeMap<ClassId, usize>> {
    if class_counts.is_empty() {
        return Err(CoreError::EmptyInput("no classes to allocate".into()));
    }
    if m < class_counts.len() {
        return Err(CoreError::InvalidArgument(format!(
            "coreset size {m} is smaller than the number of classes ({})",
            class_counts.len()
        )));
    }
    if let Some((&c, _)) = class_counts.iter().find(|(_, &k)| k == 0) {
        return Err(CoreError::InvalidArgument(format!("class {c} has no points")));
    }

    let shares: BTreeMap<ClassId, f64> = match policy {
        ClassAllocation::Proportional => class_counts.iter().map(|(&c, &k)| (c, k as f64)).collect(),
        ClassAllocation::Explicit(map) => {
            policy.validate()?;
            if let Some(c) = class_counts.keys().find(|c| !map.contains_key(c)) {
                return Err(CoreError::InfeasibleBudget {
                    class: *c,
                    message: "explicit allocation has no entry for this class".into(),
                });
            }
            if let Some(c) = map.keys().find(|c| !class_counts.contains_key(c)) {
                return Err(CoreError::InfeasibleBudget {
                    class: *c,
                    message: "explicit allocation names a class absent from the data".into(),
                });
            }
            map.clone()
        }
    };

    let mut budgets = BTreeMap::new();
    let mut active: Vec<ClassId> = class_counts.keys().copied().collect();
    let mut remaining = m;
    while !active.is_empty() {
        let parts = largest_remainder(remaining, &active.iter().map(|c| shares[c]).collect::<Vec<_>>());
        let over: Vec<ClassId> = active
            .iter()
            .zip(&parts)
            .filter(|(c, &p)| p > class_counts[*c])
            .map(|(c, _)| *c)
            .collect();
        if over.is_empty() {
            budgets.extend(active.iter().copied().zip(parts));
            break;
        }
        for c in over {
            budgets.insert(c, class_counts[&c]);
            remaining -= class_counts[&c];
            active.retain(|&a| a != c);
        }
    }

    // Tiny shares can round to zero; every class keeps at least one point.
    let starved: Vec<ClassId> = budgets.iter().filter(|(_, &b)| b == 0).map(|(&c, _)| c).collect();
    for c in starved {
        let donor = budgets
            .iter()
            .filter(|(_, &b)| b > 1)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&d, _)| d)
            .ok_or_else(|| CoreError::InfeasibleBudget {
                class: c,
                message: "no class can spare a point".into(),
            })?;
        *budgets.get_mut(&donor).expect("donor exists") -= 1;
        budgets.insert(c, 1);
    }
    Ok(budgets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(pairs: &[(ClassId, usize)]) -> BTreeMap<ClassId, usize> {
        pairs.iter().copied().collect()
    }

    fn explicit(pairs: &[(ClassId, f64)]) -> ClassAllocation {
        ClassAllocation::Explicit(pairs.iter().copied().collect())
    }

    #[test]
    fn proportional_split() {
        let b = allocate_class_budgets(100, &counts(&[(0, 600), (1, 400)]), &ClassAllocation::Proportional).unwrap();
        assert_eq!(b, counts(&[(0, 60), (1, 40)]));
    }

    #[test]
    fn explicit_split() {
        let b =
            allocate_class_budgets(100, &counts(&[(0, 500), (1, 500)]), &explicit(&[(0, 0.65), (1, 0.35)])).unwrap();
        assert_eq!(b, counts(&[(0, 65), (1, 35)]));
    }

    #[test]
    fn clip_and_redistribute() {
        // 5/5 requested, class 1 only has 3 points; the 2 extra go to class 0.
        let b = allocate_class_budgets(10, &counts(&[(0, 9000), (1, 3)]), &explicit(&[(0, 0.5), (1, 0.5)])).unwrap();
        assert_eq!(b, counts(&[(0, 7), (1, 3)]));
    }

    #[test]
    fn oversized_request_clips_everything() {
        let b = allocate_class_budgets(25, &counts(&[(0, 6), (1, 4)]), &ClassAllocation::Proportional).unwrap();
        assert_eq!(b, counts(&[(0, 6), (1, 4)]));
    }

    #[test]
    fn starved_class_gets_one() {
        let b = allocate_class_budgets(10, &counts(&[(0, 990), (1, 10)]), &ClassAllocation::Proportional).unwrap();
        assert_eq!(b, counts(&[(0, 9), (1, 1)]));
    }

    #[test]
    fn errors() {
        let c = counts(&[(0, 10), (1, 10)]);
        assert!(allocate_class_budgets(1, &c, &ClassAllocation::Proportional).is_err());
        assert!(matches!(
            allocate_class_budgets(10, &c, &explicit(&[(0, 1.0)])),
            Err(CoreError::InvalidArgument(_)) | Err(CoreError::InfeasibleBudget { .. })
        ));
        assert!(matches!(
            allocate_class_budgets(10, &counts(&[(0, 10), (2, 10)]), &explicit(&[(0, 0.5), (1, 0.5)])),
            Err(CoreError::InfeasibleBudget { .. })
        ));
    }
}
