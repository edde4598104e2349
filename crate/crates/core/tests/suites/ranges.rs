//! `match_range` against a brute-force filter of the ranked pool.

use depgate_core::range::{match_range, Comparator, Constraint, VersionRange};
use proptest::prelude::*;

use super::versions::{pool, rank_of};
use super::{run, CASES};

fn oracle_holds(op: Comparator, v_rank: usize, c_rank: usize) -> bool {
    match op {
        Comparator::Lt => v_rank < c_rank,
        Comparator::Le => v_rank <= c_rank,
        Comparator::Gt => v_rank > c_rank,
        Comparator::Ge => v_rank >= c_rank,
        Comparator::Eq => v_rank == c_rank,
        Comparator::Ne => v_rank != c_rank,
    }
}

/// The pool members a range admits, by enumeration.
pub fn oracle_filter(range: &[(Comparator, &str)]) -> Vec<&'static str> {
    pool()
        .into_iter()
        .filter(|(_, r)| range.iter().all(|(op, c)| oracle_holds(*op, *r, rank_of(c))))
        .map(|(v, _)| v)
        .collect()
}

fn range_strategy() -> impl Strategy<Value = Vec<(Comparator, &'static str)>> {
    let p = pool();
    let n = p.len();
    proptest::collection::vec((0..6usize, 0..n), 1..=3).prop_map(move |v| {
        v.into_iter().map(|(op, i)| (Comparator::ALL[op], p[i].0)).collect()
    })
}

pub fn pool_oracle() -> Result<(), String> {
    run(CASES, range_strategy(), |spec| {
        let range = VersionRange::new(spec.iter().map(|(op, v)| Constraint::new(*op, *v)).collect()).unwrap();
        let expected = oracle_filter(&spec);
        let got: Vec<&str> = pool().into_iter().map(|(v, _)| v).filter(|v| match_range(v, &range)).collect();
        prop_assert_eq!(got, expected, "range {}", range);
        Ok(())
    })
}
