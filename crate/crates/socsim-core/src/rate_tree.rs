//! Binary sum tree over event rates.
//!
//! The tree is stored implicitly in a flat array sized to twice its leaf
//! capacity (always a power of two). Leaf `i` lives at `capacity + i`,
//! interior node `n` holds the sum of its two children, and the root at
//! index 1 holds the total rate. Updating a leaf touches only the
//! `log2(capacity)` nodes on its path to the root; selecting a leaf walks
//! one path down. Both are the per-event costs of the simulation loop, so
//! neither may degrade as the tree grows.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RateTreeError {
    #[error("rate at leaf {index} is {value}; rates must be finite and nonnegative")]
    InvalidRate { index: usize, value: f64 },
    #[error("leaf index {index} out of range for tree with {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no selectable event: total rate is zero")]
    NoSelectableEvent,
    #[error("selection point {0} outside (0, 1]")]
    SelectionPointOutOfRange(f64),
}

/// Implicit complete binary tree of nonnegative rates.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTree {
    // storage[1] is the root; storage[capacity + i] is leaf i.
    storage: Vec<f64>,
    capacity: usize,
    len: usize,
}

impl RateTree {
    /// Empty tree able to hold at least `capacity` leaves before growing.
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(1).next_power_of_two();
        Self {
            storage: vec![0.0; 2 * capacity],
            capacity,
            len: 0,
        }
    }

    /// Builds a tree from an explicit rate vector.
    pub fn from_rates(rates: &[f64]) -> Result<Self, RateTreeError> {
        for (index, &value) in rates.iter().enumerate() {
            validate_rate(index, value)?;
        }
        let mut tree = Self::with_capacity(rates.len());
        tree.len = rates.len();
        tree.storage[tree.capacity..tree.capacity + rates.len()].copy_from_slice(rates);
        tree.resum();
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Total rate across all leaves.
    pub fn total(&self) -> f64 {
        self.storage[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        assert!(index < self.len, "leaf {index} out of range");
        self.storage[self.capacity + index]
    }

    /// Sets leaf `index` to `value` and refreshes the sums on its root path.
    pub fn update(&mut self, index: usize, value: f64) -> Result<(), RateTreeError> {
        if index >= self.len {
            return Err(RateTreeError::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        validate_rate(index, value)?;
        let mut node = self.capacity + index;
        self.storage[node] = value;
        node /= 2;
        while node >= 1 {
            self.storage[node] = self.storage[2 * node] + self.storage[2 * node + 1];
            node /= 2;
        }
        Ok(())
    }

    /// Appends a leaf, doubling the backing array when full. Returns the new
    /// leaf's index.
    pub fn push(&mut self, value: f64) -> Result<usize, RateTreeError> {
        validate_rate(self.len, value)?;
        if self.len == self.capacity {
            self.grow();
        }
        let index = self.len;
        self.len += 1;
        self.update(index, value).expect("fresh leaf is in range");
        Ok(index)
    }

    /// Picks the first leaf (in leaf order) whose inclusive prefix sum
    /// reaches `u * total()`. Leaves holding zero rate are never returned.
    pub fn select(&self, u: f64) -> Result<usize, RateTreeError> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(RateTreeError::SelectionPointOutOfRange(u));
        }
        if self.total() <= 0.0 {
            return Err(RateTreeError::NoSelectableEvent);
        }
        let mut target = u * self.total();
        let mut node = 1;
        while node < self.capacity {
            let left = self.storage[2 * node];
            let right = self.storage[2 * node + 1];
            // Every visited node has a positive sum, so when the right child
            // is empty the remaining mass must sit on the left. The guard
            // also absorbs rounding drift that could otherwise step past the
            // last occupied leaf.
            if (target <= left && left > 0.0) || right <= 0.0 {
                node = 2 * node;
            } else {
                target -= left;
                node = 2 * node + 1;
            }
        }
        Ok(node - self.capacity)
    }

    fn grow(&mut self) {
        let old_capacity = self.capacity;
        self.capacity *= 2;
        let mut storage = vec![0.0; 2 * self.capacity];
        storage[self.capacity..self.capacity + self.len]
            .copy_from_slice(&self.storage[old_capacity..old_capacity + self.len]);
        self.storage = storage;
        self.resum();
    }

    fn resum(&mut self) {
        for node in (1..self.capacity).rev() {
            self.storage[node] = self.storage[2 * node] + self.storage[2 * node + 1];
        }
    }
}

fn validate_rate(index: usize, value: f64) -> Result<(), RateTreeError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(RateTreeError::InvalidRate { index, value })
    }
}
