use super::{key_less, LabeledCloud, MultiSampleSet};
use crate::geometry::sq_dist;
use crate::par;

type Key = (f64, usize);

const NONE: Key = (f64::INFINITY, usize::MAX);

/// Squared distances from every cloud point to every sample (row per point),
/// plus each point's two smallest keys. Lets a candidate move of one sample
/// be scored in O(points) once its distance column is known.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DistanceTable {
    n_points: usize,
    stride: usize,
    d2: Vec<f64>,
    owner: Vec<usize>,
    offsets: Vec<usize>,
    best: Vec<Key>,
    second: Vec<Key>,
}

impl DistanceTable {
    pub fn build(msets: &MultiSampleSet, cloud: &LabeledCloud) -> Self {
        let points: Vec<&[f64]> = msets.iter().map(|(_, _, p)| p).collect();
        let stride = points.len();
        let rows = par::map_range(cloud.len(), |p| {
            let x = cloud.point(p);
            points.iter().map(|s| sq_dist(x, s)).collect::<Vec<f64>>()
        });
        let mut offsets = vec![0];
        let mut owner = Vec::with_capacity(stride);
        for (m, s) in msets.sets.iter().enumerate() {
            owner.extend(std::iter::repeat_n(m, s.len()));
            offsets.push(offsets[m] + s.len());
        }
        let mut t = Self {
            n_points: cloud.len(),
            stride,
            d2: rows.concat(),
            owner,
            offsets,
            best: Vec::new(),
            second: Vec::new(),
        };
        t.refresh();
        t
    }

    pub fn column(cloud: &LabeledCloud, point: &[f64]) -> Vec<f64> {
        par::map_range(cloud.len(), |p| sq_dist(cloud.point(p), point))
    }

    pub fn global(&self, m: usize, i: usize) -> usize {
        self.offsets[m] + i
    }

    fn row(&self, p: usize) -> &[f64] {
        &self.d2[p * self.stride..(p + 1) * self.stride]
    }

    fn top2(row: &[f64]) -> (Key, Key) {
        let mut a = NONE;
        let mut b = NONE;
        for (g, &d) in row.iter().enumerate() {
            let k = (d, g);
            if key_less(k, a) {
                b = a;
                a = k;
            } else if key_less(k, b) {
                b = k;
            }
        }
        (a, b)
    }

    fn refresh(&mut self) {
        let tops = par::map_range(self.n_points, |p| Self::top2(self.row(p)));
        (self.best, self.second) = tops.into_iter().unzip();
    }

    /// Number of points whose nearest sample belongs to a foreign class.
    pub fn errors(&self, labels: &[usize]) -> usize {
        par::count_range(self.n_points, |p| self.owner[self.best[p].1] != labels[p])
    }

    /// Error count if sample `g` had distance column `col`.
    pub fn candidate_errors(&self, g: usize, col: &[f64], labels: &[usize]) -> usize {
        par::count_range(self.n_points, |p| {
            let other = if self.best[p].1 != g {
                self.best[p]
            } else {
                self.second[p]
            };
            let k = (col[p], g);
            let win = if key_less(k, other) { k } else { other };
            self.owner[win.1] != labels[p]
        })
    }

    pub fn set_column(&mut self, g: usize, col: &[f64]) {
        for (p, &d) in col.iter().enumerate() {
            self.d2[p * self.stride + g] = d;
        }
        let tops = par::map_range(self.n_points, |p| {
            let (b, s) = (self.best[p], self.second[p]);
            let k = (col[p], g);
            if b.1 == g || s.1 == g {
                Self::top2(self.row(p))
            } else if key_less(k, b) {
                (k, b)
            } else if key_less(k, s) {
                (b, k)
            } else {
                (b, s)
            }
        });
        (self.best, self.second) = tops.into_iter().unzip();
    }

    /// Best key within class `m` for point `p`, and the class-local index.
    fn class_best(&self, p: usize, m: usize) -> (Key, usize) {
        let row = self.row(p);
        let (lo, hi) = (self.offsets[m], self.offsets[m + 1]);
        let mut best = NONE;
        for (g, &d) in row.iter().enumerate().take(hi).skip(lo) {
            if key_less((d, g), best) {
                best = (d, g);
            }
        }
        (best, best.1 - lo)
    }

    /// Best key outside class `m`.
    fn foreign_best(&self, p: usize, m: usize) -> Key {
        let (b, s) = (self.best[p], self.second[p]);
        if self.owner[b.1] != m {
            return b;
        }
        if self.owner[s.1] != m {
            return s;
        }
        let row = self.row(p);
        let mut best = NONE;
        for (g, &d) in row.iter().enumerate() {
            if self.owner[g] != m && key_less((d, g), best) {
                best = (d, g);
            }
        }
        best
    }

    /// Theta and phi point indices of sample `i` of class `m`.
    pub fn regions(&self, m: usize, i: usize, labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let tag = par::map_range(self.n_points, |p| {
            let (own, idx) = self.class_best(p, m);
            if idx != i {
                return 0u8;
            }
            let foreign = self.foreign_best(p, m);
            if labels[p] == m {
                u8::from(key_less(foreign, own))
            } else if key_less(own, foreign) {
                2
            } else {
                0
            }
        });
        let mut theta = Vec::new();
        let mut phi = Vec::new();
        for (p, t) in tag.into_iter().enumerate() {
            match t {
                1 => theta.push(p),
                2 => phi.push(p),
                _ => {}
            }
        }
        (theta, phi)
    }

    /// `(|theta|, |phi|)` for every sample in global order.
    pub fn region_counts(&self, labels: &[usize]) -> Vec<(usize, usize)> {
        let classes = self.offsets.len() - 1;
        let hits = par::map_range(self.n_points, |p| {
            let bests: Vec<Key> = (0..classes).map(|m| self.class_best(p, m).0).collect();
            let foreign = |m: usize| {
                bests
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != m)
                    .map(|(_, k)| *k)
                    .fold(NONE, |a, k| if key_less(k, a) { k } else { a })
            };
            let l = labels[p];
            let mut out = Vec::new();
            if key_less(foreign(l), bests[l]) {
                out.push((bests[l].1, true));
            }
            for (m, &k) in bests.iter().enumerate() {
                if m != l && key_less(k, foreign(m)) {
                    out.push((k.1, false));
                }
            }
            out
        });
        let mut counts = vec![(0, 0); self.stride];
        for (g, theta) in hits.into_iter().flatten() {
            if theta {
                counts[g].0 += 1;
            } else {
                counts[g].1 += 1;
            }
        }
        counts
    }

    fn relayout(&mut self, keep: impl Fn(usize) -> Option<usize>, new_stride: usize) {
        let mut d2 = vec![0.0; self.n_points * new_stride];
        for p in 0..self.n_points {
            for g in 0..self.stride {
                if let Some(h) = keep(g) {
                    d2[p * new_stride + h] = self.d2[p * self.stride + g];
                }
            }
        }
        self.d2 = d2;
        self.stride = new_stride;
    }

    pub fn remove(&mut self, m: usize, i: usize) {
        let g = self.global(m, i);
        self.relayout(
            |h| match h.cmp(&g) {
                std::cmp::Ordering::Less => Some(h),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(h - 1),
            },
            self.stride - 1,
        );
        self.owner.remove(g);
        for o in &mut self.offsets[m + 1..] {
            *o -= 1;
        }
        self.refresh();
    }

    /// Appends a sample with distance column `col` as the last of class `m`.
    pub fn insert(&mut self, m: usize, col: &[f64]) {
        let g = self.offsets[m + 1];
        self.relayout(|h| Some(if h < g { h } else { h + 1 }), self.stride + 1);
        for (p, &d) in col.iter().enumerate() {
            self.d2[p * self.stride + g] = d;
        }
        self.owner.insert(g, m);
        for o in &mut self.offsets[m + 1..] {
            *o += 1;
        }
        self.refresh();
    }
}
