//! Neural-function-evaluation accounting: one surrogate call for one
//! frequency is one NFE, the budget unit of the method comparison.

#[derive(Debug, Default, Clone)]
pub struct NfeCounter {
    total: u64,
}

impl NfeCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, n: u64) {
        self.total += n;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn remaining(&self, budget: u64) -> u64 {
        budget.saturating_sub(self.total)
    }
}
