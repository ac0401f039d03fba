//! Finite-difference verification suites at the three scopes.

use gformer::verify::{check_blocks, check_model, check_ops};

#[test]
fn op_scope_passes() {
    for r in check_ops(11).unwrap() {
        assert!(
            r.passed(),
            "{}: {} > {}",
            r.name,
            r.max_rel_error,
            r.tolerance
        );
    }
}

#[test]
fn block_scope_passes() {
    for r in check_blocks(12).unwrap() {
        assert!(
            r.passed(),
            "{}: {} > {}",
            r.name,
            r.max_rel_error,
            r.tolerance
        );
    }
}

#[test]
fn model_scope_passes() {
    let t0 = std::time::Instant::now();
    for r in check_model(13).unwrap() {
        assert!(
            r.passed(),
            "{}: {} > {}",
            r.name,
            r.max_rel_error,
            r.tolerance
        );
        eprintln!("{}: {:.3e} (tol {:.0e})", r.name, r.max_rel_error, r.tolerance);
    }
    eprintln!("model gradcheck took {:?}", t0.elapsed());
}
