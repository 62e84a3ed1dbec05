//! Brute-force reference: stationary law by Gaussian elimination and
//! probabilities by summing over every explicit path.

#![allow(dead_code)]

use blurchain::engine::{ObservationPattern, Slot};
use blurchain::model::{random_model, RandomModelSpec};
use blurchain::{CoupledKernel, Model};

pub type Pair = (usize, usize);

pub struct Brute {
    pub a: usize,
    pub m: usize,
    s: usize,
    rows: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
}

impl Brute {
    pub fn new(kernel: &CoupledKernel) -> Self {
        let a = kernel.alphabet().size();
        let m = kernel.order();
        let s = a * a;
        let rows: Vec<Vec<f64>> = kernel.rows().map(<[f64]>::to_vec).collect();
        let pi = stationary(&rows, s, m);
        Self { a, m, s, rows, pi }
    }

    pub fn pair(&self, p: usize) -> Pair {
        (p / self.a, p % self.a)
    }

    /// Path masses over `Z_{-depth-m} .. Z_0`, filtered by `keep` on the
    /// window `Z_{-depth} .. Z_0` and binned by `bin`.
    pub fn masses(
        &self,
        depth: usize,
        bins: usize,
        keep: impl Fn(&[Pair]) -> bool,
        bin: impl Fn(&[Pair]) -> usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0; bins];
        let mut path = Vec::with_capacity(self.m + depth + 1);
        for (c, &p) in self.pi.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            path.clear();
            let mut rest = c;
            let mut ctx = vec![0; self.m];
            for slot in ctx.iter_mut().rev() {
                *slot = rest % self.s;
                rest /= self.s;
            }
            path.extend(ctx.iter().map(|&q| self.pair(q)));
            self.extend(c, p, depth + 1, &mut path, &mut out, &keep, &bin);
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        ctx: usize,
        mass: f64,
        left: usize,
        path: &mut Vec<Pair>,
        out: &mut [f64],
        keep: &impl Fn(&[Pair]) -> bool,
        bin: &impl Fn(&[Pair]) -> usize,
    ) {
        if left == 0 {
            let window = &path[self.m..];
            if keep(window) {
                out[bin(window)] += mass;
            }
            return;
        }
        let modulus = self.s.pow(self.m as u32);
        for q in 0..self.s {
            let p = self.rows[ctx][q];
            if p == 0.0 {
                continue;
            }
            path.push(self.pair(q));
            let next = (ctx * self.s + q) % modulus;
            self.extend(next, mass * p, left - 1, path, out, keep, bin);
            path.pop();
        }
    }

    /// `P(event)` where the event constrains `Z_{-d} .. Z_{-1}` by `slots`.
    pub fn event(&self, slots: &[Slot]) -> f64 {
        self.masses(slots.len(), 1, |w| matches_slots(slots, w), |_| 0)[0]
    }

    /// Law of `Z₀` (pair index) given the slots, or `None` at zero mass.
    pub fn predict(&self, slots: &[Slot]) -> Option<Vec<f64>> {
        let a = self.a;
        let v = self.masses(
            slots.len(),
            self.s,
            |w| matches_slots(slots, w),
            |w| {
                let (x, y) = w[w.len() - 1];
                x * a + y
            },
        );
        normalize(v)
    }

    /// Law of `X₀` given the slots.
    pub fn x_law(&self, slots: &[Slot]) -> Option<Vec<f64>> {
        self.predict(slots).map(|z| self.marginal(&z, true))
    }

    /// Law of `Y₀` given the slots.
    pub fn y_law(&self, slots: &[Slot]) -> Option<Vec<f64>> {
        self.predict(slots).map(|z| self.marginal(&z, false))
    }

    fn marginal(&self, z: &[f64], x: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.a];
        for (p, &v) in z.iter().enumerate() {
            let (px, py) = self.pair(p);
            out[if x { px } else { py }] += v;
        }
        out
    }
}

pub fn normalize(v: Vec<f64>) -> Option<Vec<f64>> {
    let total: f64 = v.iter().sum();
    (total > 0.0).then(|| v.into_iter().map(|x| x / total).collect())
}

pub fn matches_slots(slots: &[Slot], window: &[Pair]) -> bool {
    slots.iter().zip(window).all(|(s, &(x, y))| match *s {
        Slot::Free => true,
        Slot::X(a) => x == a,
        Slot::Y(b) => y == b,
        Slot::Pair(p) => p.x == x && p.y == y,
    })
}

/// Solves `π P = π`, `Σπ = 1` on packed contexts with partial pivoting.
fn stationary(rows: &[Vec<f64>], s: usize, m: usize) -> Vec<f64> {
    let n = rows.len();
    let modulus = s.pow(m as u32);
    let mut mat = vec![vec![0.0; n + 1]; n];
    for (c, row) in rows.iter().enumerate() {
        for (q, &p) in row.iter().enumerate() {
            let next = (c * s + q) % modulus;
            mat[next][c] += p;
        }
        mat[c][c] -= 1.0;
    }
    mat[0] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()))
            .unwrap();
        mat.swap(col, piv);
        let d = mat[col][col];
        for j in col..=n {
            mat[col][j] /= d;
        }
        for i in 0..n {
            if i != col && mat[i][col] != 0.0 {
                let f = mat[i][col];
                for j in col..=n {
                    mat[i][j] -= f * mat[col][j];
                }
            }
        }
    }
    mat.iter().map(|r| r[n]).collect()
}

pub fn corpus_model(seed: u64) -> Model {
    Model::new(random_model(&RandomModelSpec::corpus(seed)).unwrap()).unwrap()
}

pub fn star() -> Model {
    Model::new(blurchain::model::binary_symmetric_channel(0.7, 0.1).unwrap()).unwrap()
}

pub fn pattern(slots: &[Slot]) -> ObservationPattern {
    ObservationPattern::new(slots.to_vec())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
