//! Thread-local multiply-accumulate counter used by the complexity
//! benchmarks. Matmul and convolution count one MAC per multiply-add;
//! elementwise multiplies count one MAC per element.

use std::cell::Cell;

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

pub fn reset_macs() {
    MACS.with(|c| c.set(0));
}

pub fn macs() -> u64 {
    MACS.with(|c| c.get())
}

pub(crate) fn add_macs(n: u64) {
    MACS.with(|c| c.set(c.get().wrapping_add(n)));
}
