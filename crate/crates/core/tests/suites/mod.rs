//! Property suites shared by this crate's tests and the acceptance gate.
//! Each check runs its own proptest runner and returns the failure, if
//! any, as a string instead of panicking.
#![allow(dead_code)]

pub mod gate;
pub mod ranges;
pub mod reports;
pub mod store;
pub mod sync;
pub mod versions;

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub const CASES: u32 = 500;

pub fn run<S, F>(cases: u32, strategy: S, test: F) -> Result<(), String>
where
    S: Strategy,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new(config).run(&strategy, test).map_err(|e| e.to_string())
}

pub fn fail(msg: impl Into<String>) -> TestCaseError {
    TestCaseError::fail(msg.into())
}

/// One named suite entry point.
pub type Check = fn() -> Result<(), String>;
