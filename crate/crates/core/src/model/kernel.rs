use crate::rng::sample_index;

/// Sparse transition kernel `p(x' | x, a)` for one noise symbol, stored as
/// compressed rows indexed by `x * num_actions + a`. Targets inside a row are
/// sorted and unique.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    num_states: usize,
    num_actions: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel row by row. `fill` pushes `(target, prob)` pairs for
    /// `(x, a)`; duplicates are merged and exact zeros dropped.
    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut fill: impl FnMut(usize, usize, &mut Vec<(usize, f64)>),
    ) -> Self {
        let rows = num_states * num_actions;
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        let mut scratch = Vec::new();
        offsets.push(0);
        for x in 0..num_states {
            for a in 0..num_actions {
                scratch.clear();
                fill(x, a, &mut scratch);
                scratch.sort_by_key(|e| e.0);
                let mut i = 0;
                while i < scratch.len() {
                    let t = scratch[i].0;
                    let mut p = 0.0;
                    while i < scratch.len() && scratch[i].0 == t {
                        p += scratch[i].1;
                        i += 1;
                    }
                    if p != 0.0 {
                        debug_assert!(t < num_states);
                        targets.push(t as u32);
                        probs.push(p);
                    }
                }
                offsets.push(targets.len());
            }
        }
        Self {
            num_states,
            num_actions,
            offsets,
            targets,
            probs,
        }
    }

    /// From a dense `[x][a][x']` table.
    pub fn from_dense(table: &[Vec<Vec<f64>>]) -> Self {
        let num_states = table.len();
        let num_actions = table.first().map_or(0, Vec::len);
        Self::from_fn(num_states, num_actions, |x, a, row| {
            for (t, &p) in table[x][a].iter().enumerate() {
                row.push((t, p));
            }
        })
    }

    /// `p(x'|x,a) = 1` iff `x' = x`.
    pub fn identity(num_states: usize, num_actions: usize) -> Self {
        Self::from_fn(num_states, num_actions, |x, _, row| row.push((x, 1.0)))
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, x: usize, a: usize) -> (&[u32], &[f64]) {
        let r = x * self.num_actions + a;
        let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
        (&self.targets[lo..hi], &self.probs[lo..hi])
    }

    pub fn row_sum(&self, x: usize, a: usize) -> f64 {
        self.row(x, a).1.iter().sum()
    }

    /// Inverse-CDF draw of the next state.
    pub fn sample(&self, x: usize, a: usize, u: f64) -> usize {
        let (targets, probs) = self.row(x, a);
        targets[sample_index(probs, u)] as usize
    }

    pub fn nnz(&self) -> usize {
        self.targets.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_targets_merge() {
        let k = Kernel::from_fn(3, 1, |x, _, row| {
            row.push(((x + 1) % 3, 0.25));
            row.push(((x + 1) % 3, 0.25));
            row.push((x, 0.5));
        });
        let (t, p) = k.row(2, 0);
        assert_eq!(t, &[0, 2]);
        assert_eq!(p, &[0.5, 0.5]);
        assert_eq!(k.nnz(), 6);
    }

    #[test]
    fn sampling_covers_the_row() {
        let k = Kernel::from_dense(&[vec![vec![0.2, 0.8]], vec![vec![0.0, 1.0]]]);
        assert_eq!(k.sample(0, 0, 0.1), 0);
        assert_eq!(k.sample(0, 0, 0.3), 1);
        assert_eq!(k.sample(1, 0, 0.0), 1);
    }
}
