use vimu_core::model::{Executor, Serial};

/// Serial or rayon-backed execution. Both produce identical numbers because
/// the core reduces per-sample results in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Serial,
    /// `rayon::join` on the current pool.
    Rayon,
}

impl Exec {
    pub fn for_threads(threads: usize) -> Self {
        if threads <= 1 {
            Exec::Serial
        } else {
            Exec::Rayon
        }
    }
}

impl Executor for Exec {
    fn join<A, B, RA, RB>(&self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        match self {
            Exec::Serial => Serial.join(a, b),
            Exec::Rayon => rayon::join(a, b),
        }
    }
}
