//! Exact dynamic programming over nodal values of a chain `v_0, …, v_n`
//! with link costs depending only on the increment `v_{i+1} − v_i` and
//! costs on the two end values.
//!
//! Every node gets a uniform value window around a center. The first pass
//! uses one wide window shared by all nodes, later passes shrink the step and
//! recenter on the previous optimum. Each window contains its center, so the
//! objective never increases from one pass to the next.

use rayon::prelude::*;

pub(crate) struct Chain<'a> {
    pub links: usize,
    pub link_cost: &'a (dyn Fn(usize, f64) -> f64 + Sync),
    pub first_cost: &'a (dyn Fn(f64) -> f64 + Sync),
    pub last_cost: &'a (dyn Fn(f64) -> f64 + Sync),
}

#[derive(Clone, Debug)]
pub(crate) struct ChainOptions {
    /// Half width of the first (shared) window.
    pub range: f64,
    pub coarse_half: usize,
    pub window_half: usize,
    pub shrink: f64,
    pub min_step: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { range: 8.0, coarse_half: 160, window_half: 8, shrink: 4.0, min_step: 1e-7 }
    }
}

impl Chain<'_> {
    pub fn value(&self, v: &[f64]) -> f64 {
        let mut total = (self.first_cost)(v[0]) + (self.last_cost)(v[self.links]);
        for i in 0..self.links {
            total += (self.link_cost)(i, v[i + 1] - v[i]);
        }
        total
    }

    fn viterbi(&self, centers: &[f64], step: f64, half: usize) -> (f64, Vec<f64>) {
        let m = 2 * half + 1;
        let n = self.links;
        let val = |i: usize, j: usize| centers[i] + step * (j as f64 - half as f64);
        let mut cost: Vec<f64> = (0..m).map(|j| (self.first_cost)(val(0, j))).collect();
        let mut back: Vec<Vec<u32>> = Vec::with_capacity(n);
        for i in 0..n {
            let base = centers[i + 1] - centers[i];
            let table: Vec<f64> =
                (0..2 * m - 1).map(|d| (self.link_cost)(i, base + step * (d as f64 - (m - 1) as f64))).collect();
            let last = i + 1 == n;
            let relax = |k: usize| {
                let mut best = f64::INFINITY;
                let mut arg = 0u32;
                for (j, c) in cost.iter().enumerate() {
                    let c = c + table[k + m - 1 - j];
                    if c < best {
                        best = c;
                        arg = j as u32;
                    }
                }
                let end = if last { (self.last_cost)(val(i + 1, k)) } else { 0.0 };
                (best + end, arg)
            };
            let (next, arg): (Vec<f64>, Vec<u32>) =
                if m > 64 { (0..m).into_par_iter().map(relax).unzip() } else { (0..m).map(relax).unzip() };
            cost = next;
            back.push(arg);
        }
        let (mut k, best) = cost
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &c)| if c < acc.1 { (k, c) } else { acc });
        let mut values = vec![0.0; n + 1];
        values[n] = val(n, k);
        for i in (0..n).rev() {
            k = back[i][k] as usize;
            values[i] = val(i, k);
        }
        (best, values)
    }

    fn refine(&self, mut values: Vec<f64>, mut step: f64, opts: &ChainOptions) -> (f64, Vec<f64>) {
        let mut best = self.value(&values);
        while step >= opts.min_step {
            let (c, v) = self.viterbi(&values, step, opts.window_half);
            if c <= best {
                best = c;
                values = v;
            }
            step /= opts.shrink;
        }
        (best, values)
    }

    /// Global pass followed by refinement; with `warm`, a second refinement
    /// chain from the warm start competes.
    pub fn solve(&self, opts: &ChainOptions, warm: Option<&[f64]>) -> (f64, Vec<f64>) {
        let zeros = vec![0.0; self.links + 1];
        let step = opts.range / opts.coarse_half as f64;
        let (_, v) = self.viterbi(&zeros, step, opts.coarse_half);
        let mut best = self.refine(v, step / opts.shrink, opts);
        if let Some(w) = warm {
            let cand = self.refine(w.to_vec(), step / opts.shrink, opts);
            if cand.0 < best.0 {
                best = cand;
            }
        }
        best
    }
}
