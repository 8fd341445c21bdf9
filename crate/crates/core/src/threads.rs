//! Global thread-pool setup.
//!
//! `HSU_THREADS` caps the width of every parallel region (0 or unset means
//! automatic). The cap is applied once, at the first parallel call.

use std::sync::Once;

static INIT: Once = Once::new();

pub(crate) fn ensure_pool() {
    INIT.call_once(|| {
        if let Ok(v) = std::env::var("HSU_THREADS") {
            if let Ok(k) = v.trim().parse::<usize>() {
                if k > 0 {
                    // Ignore the error if a pool already exists.
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(k)
                        .build_global();
                }
            }
        }
    });
}
