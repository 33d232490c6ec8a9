#![allow(dead_code)]

pub mod axml_gen;
pub mod vault_oracle;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Polls `cond` until it holds or five seconds pass.
pub fn wait_for(mut cond: impl FnMut() -> bool) {
    let start = Instant::now();
    while !cond() {
        assert!(start.elapsed() < Duration::from_secs(5), "condition not reached");
        std::thread::sleep(Duration::from_millis(2));
    }
}

/// A gate the vault worker's progress hook blocks on for one entry name.
#[derive(Clone, Default)]
pub struct Gate(Arc<AtomicBool>);

impl Gate {
    pub fn hook(&self, name: &'static str) -> morphvault::vault::ProgressHook {
        let open = self.0.clone();
        Arc::new(move |entry: &str, _done: u64| {
            if entry == name {
                while !open.load(Ordering::SeqCst) {
                    std::thread::sleep(Duration::from_millis(1));
                }
            }
        })
    }

    pub fn release(&self) {
        self.0.store(true, Ordering::SeqCst);
    }
}
