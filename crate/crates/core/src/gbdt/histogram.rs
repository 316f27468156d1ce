use rayon::prelude::*;

use super::binning::BinnedMatrix;

/// Parallel accumulation only pays off above this many rows.
const PAR_MIN_ROWS: usize = 2048;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinStat {
    pub grad: f64,
    pub hess: f64,
    pub count: u32,
}

impl BinStat {
    fn add(&mut self, other: &BinStat) {
        self.grad += other.grad;
        self.hess += other.hess;
        self.count += other.count;
    }
}

/// Gradient/hessian sums per (feature, bin), features laid out back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    offsets: Vec<usize>,
    bins: Vec<BinStat>,
}

impl Histogram {
    pub fn from_features(per_feature: Vec<Vec<BinStat>>) -> Self {
        let mut offsets = Vec::with_capacity(per_feature.len() + 1);
        offsets.push(0);
        for f in &per_feature {
            offsets.push(offsets.last().unwrap() + f.len());
        }
        Histogram {
            offsets,
            bins: per_feature.into_iter().flatten().collect(),
        }
    }

    /// Accumulates `rows` into per-feature histograms. Each feature is
    /// summed sequentially in row order, so the result does not depend on
    /// how features are spread across threads.
    pub fn build(
        binned: &BinnedMatrix,
        bin_counts: &[usize],
        rows: &[u32],
        grad: &[f64],
        hess: &[f64],
    ) -> Self {
        let one = |f: usize| {
            let col = &binned.columns[f];
            let mut h = vec![BinStat::default(); bin_counts[f]];
            for &r in rows {
                let r = r as usize;
                let s = &mut h[col[r] as usize];
                s.grad += grad[r];
                s.hess += hess[r];
                s.count += 1;
            }
            h
        };
        let per_feature: Vec<Vec<BinStat>> = if rows.len() >= PAR_MIN_ROWS {
            (0..bin_counts.len()).into_par_iter().map(one).collect()
        } else {
            (0..bin_counts.len()).map(one).collect()
        };
        Self::from_features(per_feature)
    }

    /// Sibling histogram: `self - child`.
    pub fn subtract(&self, child: &Histogram) -> Histogram {
        let bins = self
            .bins
            .iter()
            .zip(&child.bins)
            .map(|(p, c)| BinStat {
                grad: p.grad - c.grad,
                hess: p.hess - c.hess,
                count: p.count - c.count,
            })
            .collect();
        Histogram {
            offsets: self.offsets.clone(),
            bins,
        }
    }

    pub fn n_features(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn feature(&self, f: usize) -> &[BinStat] {
        &self.bins[self.offsets[f]..self.offsets[f + 1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Rows with bin ≤ `bin` go left.
    pub bin: usize,
    pub gain: f64,
    pub left: BinStat,
    pub right: BinStat,
}

/// `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]`
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let g = gl + gr;
    let h = hl + hr;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda))
}

/// Highest-gain split with both children's hessian sums at least
/// `min_child_weight`. Ties keep the lowest feature, then the lowest bin.
/// Returns `None` when no split has positive gain.
pub fn best_split(hist: &Histogram, lambda: f64, min_child_weight: f64) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    for f in 0..hist.n_features() {
        let bins = hist.feature(f);
        if bins.len() < 2 {
            continue;
        }
        let mut total = BinStat::default();
        bins.iter().for_each(|b| total.add(b));
        let mut left = BinStat::default();
        for (b, stat) in bins[..bins.len() - 1].iter().enumerate() {
            left.add(stat);
            let right = BinStat {
                grad: total.grad - left.grad,
                hess: total.hess - left.hess,
                count: total.count - left.count,
            };
            if left.count == 0 || right.count == 0 {
                continue;
            }
            if left.hess < min_child_weight || right.hess < min_child_weight {
                continue;
            }
            let gain = split_gain(left.grad, left.hess, right.grad, right.hess, lambda);
            if gain > 0.0 && best.is_none_or(|c| gain > c.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    bin: b,
                    gain,
                    left,
                    right,
                });
            }
        }
    }
    best
}
