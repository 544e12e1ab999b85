//! Acceptance suite: one line per criterion, soft criteria reported only.
//!
//! Run with `cargo test -p cmv-core --test acceptance -- --nocapture`.

use cmv_core::verify::{run_all, VerifyOptions};

#[test]
fn acceptance_criteria() {
    let opts = VerifyOptions::default();
    let report = run_all(&opts, &mut |r| println!("{}  ({:.1}s)", r.line(), r.seconds));
    println!("M_- convention: {}", report.convention);
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.passed && !c.soft)
        .map(|c| c.line())
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
    assert_eq!(report.criteria.len(), 13);
}
