//! Runs the fast criteria of the validation suite (pass criterion ids as
//! arguments to choose others; the PAM criteria take minutes).

use mfshe::harness::suite::{render, run_criterion, SuiteOptions, ValidationSummary};

fn main() {
    let mut ids: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if ids.is_empty() {
        ids = vec![1, 2, 3, 6];
    }
    let opts = SuiteOptions::new(20240611);
    let criteria: Vec<_> = ids.into_iter().map(|id| run_criterion(id, &opts)).collect();
    let s = ValidationSummary {
        all_passed: criteria.iter().all(|c| c.passed),
        criteria,
    };
    print!("{}", render(&s));
}
