//! Per-thread instrumentation of table materialization.
//!
//! Every factor or density construction reports the size of its discrete
//! configuration space. The benchmark harness reads the high-water mark and
//! can arm a byte budget that aborts a run (by panic, caught at the harness
//! boundary) once cumulative table allocations exceed it.

use std::cell::Cell;

thread_local! {
    static MAX_CONFIG: Cell<usize> = const { Cell::new(0) };
    static ALLOCATED_BYTES: Cell<u64> = const { Cell::new(0) };
    static BUDGET_BYTES: Cell<Option<u64>> = const { Cell::new(None) };
}

/// Panic payload used to simulate memory exhaustion under a byte budget.
#[derive(Debug, Clone)]
pub struct MemBudgetExceeded {
    pub allocated: u64,
    pub budget: u64,
}

/// Reset counters for a fresh run; `budget` arms the allocation guard.
pub fn reset(budget: Option<u64>) {
    MAX_CONFIG.with(|m| m.set(0));
    ALLOCATED_BYTES.with(|a| a.set(0));
    BUDGET_BYTES.with(|b| b.set(budget));
}

/// Largest discrete configuration size materialized since the last reset.
pub fn max_config() -> usize {
    MAX_CONFIG.with(|m| m.get())
}

pub fn allocated_bytes() -> u64 {
    ALLOCATED_BYTES.with(|a| a.get())
}

pub(crate) fn record_table(config_size: usize, bytes: usize) {
    MAX_CONFIG.with(|m| {
        if config_size > m.get() {
            m.set(config_size);
        }
    });
    let total = ALLOCATED_BYTES.with(|a| {
        let t = a.get() + bytes as u64;
        a.set(t);
        t
    });
    if let Some(budget) = BUDGET_BYTES.with(|b| b.get()) {
        if total > budget {
            std::panic::panic_any(MemBudgetExceeded {
                allocated: total,
                budget,
            });
        }
    }
}
