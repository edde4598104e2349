//! Version ordering against a hand-ranked pool.

use std::cmp::Ordering;

use depgate_core::version::{compare_versions, max_version};
use proptest::prelude::*;

use super::{run, CASES};

/// Ascending; strings inside one inner slice are equal versions. Ranked by
/// hand from the ordering rules (numeric base with zero padding, then
/// pre-release tags < release < other qualifiers), not by running the code.
pub const RANKED: &[&[&str]] = &[
    &["0.1"],
    &["0.9", "0.9.0"],
    &["0.10"],
    &["1.0-alpha", "1.0-ALPHA"],
    &["1.0-alpha-2", "1.0-alpha2"],
    &["1.0-beta"],
    &["1.0-m1", "1.0-M1"],
    &["1.0-rc1", "1.0-RC1", "1.0rc1", "1.0.rc.1"],
    &["1.0-rc2"],
    &["1.0-SNAPSHOT", "1.0.snapshot"],
    &["1", "1.0", "1.0.0"],
    &["1.0-final"],
    &["1.0.RELEASE"],
    &["1.0-sp1"],
    &["1.0.1", "1.0-1"],
    &["1.0.2"],
    &["1.0.10"],
    &["1.1-beta"],
    &["1.1", "1.01"],
    &["1.2"],
    &["1.4.16"],
    &["1.4.17"],
    &["1.10"],
    &["2.0-SNAPSHOT"],
    &["2.0"],
    &["2.0.0.1"],
    &["2.12.1"],
    &["3.1.0"],
    &["4.12"],
    &["4.13.2"],
    &["10.0"],
    &["20160807"],
    &["20231013"],
];

pub fn pool() -> Vec<(&'static str, usize)> {
    RANKED
        .iter()
        .enumerate()
        .flat_map(|(rank, group)| group.iter().map(move |v| (*v, rank)))
        .collect()
}

pub fn rank_of(v: &str) -> usize {
    pool().into_iter().find(|(p, _)| *p == v).map(|(_, r)| r).expect("pool version")
}

/// Every ordered pair of the pool agrees with the hand ranking.
pub fn pool_agreement() -> Result<(), String> {
    let pool = pool();
    let mut mismatches = Vec::new();
    for (a, ra) in &pool {
        for (b, rb) in &pool {
            let got = compare_versions(a, b);
            let want = ra.cmp(rb);
            if got != want {
                mismatches.push(format!("{a} vs {b}: got {got:?}, want {want:?}"));
            }
        }
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(format!("{} mismatches, first: {}", mismatches.len(), mismatches[0]))
    }
}

fn version_string() -> impl Strategy<Value = String> {
    prop_oneof![
        "[0-9]{1,3}(\\.[0-9]{1,3}){0,3}",
        "[0-9]{1,2}(\\.[0-9]{1,2}){0,2}[-._](alpha|beta|rc|m|pre|SNAPSHOT|final|sp|RELEASE|GA)[0-9]{0,2}",
        "[0-9a-zA-Z]{1,6}([-._][0-9a-zA-Z]{1,4}){0,3}",
        (0..RANKED.len()).prop_map(|i| RANKED[i][0].to_string()),
    ]
}

/// Reflexivity, antisymmetry, transitivity and substitutivity of equals on
/// generated strings.
pub fn total_order_laws() -> Result<(), String> {
    run(CASES, (version_string(), version_string(), version_string()), |(a, b, c)| {
        prop_assert_eq!(compare_versions(&a, &a), Ordering::Equal);
        let ab = compare_versions(&a, &b);
        prop_assert_eq!(ab, compare_versions(&b, &a).reverse());
        let bc = compare_versions(&b, &c);
        let ac = compare_versions(&a, &c);
        if ab != Ordering::Greater && bc != Ordering::Greater {
            prop_assert_ne!(ac, Ordering::Greater, "{} <= {} <= {} but {} > {}", a, b, c, a, c);
        }
        if ab == Ordering::Equal {
            prop_assert_eq!(ac, bc);
        }
        Ok(())
    })
}

/// `max_version` over random pool subsets returns a top-ranked member.
pub fn newest_matches_oracle() -> Result<(), String> {
    let pool = pool();
    let n = pool.len();
    run(CASES, proptest::collection::vec(0..n, 1..12), |idx| {
        let picked: Vec<&str> = idx.iter().map(|&i| pool[i].0).collect();
        let top = idx.iter().map(|&i| pool[i].1).max().unwrap();
        let got = max_version(picked.iter().copied()).unwrap();
        prop_assert_eq!(rank_of(got), top, "picked {:?}", picked);
        Ok(())
    })
}
