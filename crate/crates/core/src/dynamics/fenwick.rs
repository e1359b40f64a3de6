//! Fenwick (binary indexed) tree over nonnegative weights, supporting
//! prefix-sum search for weighted sampling and O(log N) point updates.

/// Updates are applied as deltas, which slowly accumulates floating point
/// error in the internal sums; the tree therefore keeps the exact leaf
/// values and rebuilds itself periodically.
const REBUILD_EVERY: u64 = 4096;

#[derive(Debug, Clone)]
pub struct FenwickTree {
    values: Vec<f64>,
    tree: Vec<f64>, // 1-based
    updates: u64,
}

impl FenwickTree {
    pub fn new(values: Vec<f64>) -> Self {
        let mut t = FenwickTree {
            tree: Vec::new(),
            values,
            updates: 0,
        };
        t.rebuild();
        t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exact leaf values, unaffected by tree drift.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        let delta = v - self.values[i];
        self.values[i] = v;
        let mut idx = i + 1;
        while idx <= self.values.len() {
            self.tree[idx] += delta;
            idx += idx & idx.wrapping_neg();
        }
        self.updates += 1;
        if self.updates >= REBUILD_EVERY {
            self.rebuild();
        }
    }

    pub fn total(&self) -> f64 {
        self.prefix_sum(self.values.len())
    }

    /// Sum of values[0..i].
    pub fn prefix_sum(&self, i: usize) -> f64 {
        let mut idx = i;
        let mut sum = 0.0;
        while idx > 0 {
            sum += self.tree[idx];
            idx -= idx & idx.wrapping_neg();
        }
        sum
    }

    /// Smallest index i with prefix_sum(i+1) > target, clamped to the last
    /// index. Standard Fenwick descent; target must be in [0, total()).
    pub fn find(&self, target: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0usize;
        let mut rem = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                rem -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }

    fn rebuild(&mut self) {
        let n = self.values.len();
        let mut tree = vec![0.0; n + 1];
        for i in 1..=n {
            tree[i] += self.values[i - 1];
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                let v = tree[i];
                tree[parent] += v;
            }
        }
        self.tree = tree;
        self.updates = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sums_and_find() {
        let t = FenwickTree::new(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.prefix_sum(2), 3.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 1);
        assert_eq!(t.find(2.9), 1);
        assert_eq!(t.find(3.0), 2);
        assert_eq!(t.find(9.999), 3);
    }

    #[test]
    fn set_then_query() {
        let mut t = FenwickTree::new(vec![1.0; 8]);
        t.set(3, 5.0);
        t.set(0, 0.0);
        assert_eq!(t.total(), 11.0);
        assert_eq!(t.find(0.0), 1);
        assert_eq!(t.prefix_sum(4), 7.0);
    }

    #[test]
    fn zero_weight_entries_are_skipped() {
        let t = FenwickTree::new(vec![0.0, 2.0, 0.0, 1.0]);
        assert_eq!(t.find(0.0), 1);
        assert_eq!(t.find(1.9999), 1);
        assert_eq!(t.find(2.0), 3);
    }
}
