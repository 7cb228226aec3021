//! Multiply-accumulate instrumentation. Layer forward passes report the MACs
//! their inner loops executed; backward passes do not.

use std::cell::Cell;

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub(crate) fn record(n: u64) {
    MACS.with(|m| m.set(m.get() + n));
}

/// Runs `f` and returns its result with the MACs recorded on this thread meanwhile.
pub fn count<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = MACS.with(|m| m.get());
    let r = f();
    let after = MACS.with(|m| m.get());
    (r, after - before)
}
