use std::ops::{Add, AddAssign};

/// Arithmetic operation tally kept by the instrumented kernels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub mults: u64,
    pub adds: u64,
}

impl OpCounts {
    pub fn new(mults: u64, adds: u64) -> Self {
        Self { mults, adds }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.mults += rhs.mults;
        self.adds += rhs.adds;
    }
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}
