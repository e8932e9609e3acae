//! Brute-force references. Each one loops over pixels directly and shares
//! no code with the library.

pub const FLOOR: f64 = 1e-3;

pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub irmse: f64,
    pub imae: f64,
    pub silog: f64,
    pub rel: f64,
    pub delta: Vec<f64>,
}

fn valid_pairs(pred: &[f64], gt: &[f64]) -> Vec<(f64, f64)> {
    pred.iter()
        .zip(gt)
        .filter(|(_, g)| **g > 0.0)
        .map(|(&p, &g)| (p, g))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance by the two-pass formula.
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

pub fn metrics(pred: &[f64], gt: &[f64], taus: &[f64]) -> Metrics {
    let px = valid_pairs(pred, gt);
    let n = px.len() as f64;
    let sq: Vec<f64> = px.iter().map(|(p, g)| (p - g).powi(2)).collect();
    let inv: Vec<f64> = px.iter().map(|(p, g)| 1.0 / p.max(FLOOR) - 1.0 / g).collect();
    Metrics {
        rmse: mean(&sq).sqrt(),
        mae: px.iter().map(|(p, g)| (p - g).abs()).sum::<f64>() / n,
        irmse: (inv.iter().map(|x| x * x).sum::<f64>() / n).sqrt() * 1000.0,
        imae: inv.iter().map(|x| x.abs()).sum::<f64>() / n * 1000.0,
        silog: silog(pred, gt),
        rel: px.iter().map(|(p, g)| (p - g).abs() / g).sum::<f64>() / n,
        delta: taus
            .iter()
            .map(|&t| {
                px.iter()
                    .filter(|(p, g)| {
                        let p = p.max(FLOOR);
                        (p / g).max(g / p) < t
                    })
                    .count() as f64
                    / n
            })
            .collect(),
    }
}

pub fn silog(pred: &[f64], gt: &[f64]) -> f64 {
    let d: Vec<f64> = valid_pairs(pred, gt)
        .iter()
        .map(|(p, g)| (p.max(FLOOR) / g).ln())
        .collect();
    variance(&d)
}

pub fn silog_segment(pred: &[f64], gt: &[f64], labels: &[u32]) -> Option<f64> {
    let k = labels.iter().copied().max().unwrap_or(0);
    let mut vals = Vec::new();
    for label in 1..=k {
        let (p, g): (Vec<f64>, Vec<f64>) = (0..pred.len())
            .filter(|&i| labels[i] == label && gt[i] > 0.0)
            .map(|i| (pred[i], gt[i]))
            .unzip();
        if p.len() >= 2 {
            vals.push(silog(&p, &g));
        }
    }
    (!vals.is_empty()).then(|| mean(&vals))
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// SSIM at every pixel from an explicit window gather.
pub fn ssim_map(x: &[f64], y: &[f64], w: usize, h: usize, win: usize, c1: f64, c2: f64) -> Vec<f64> {
    let r = (win / 2) as isize;
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for dr in -r..=r {
                for dc in -r..=r {
                    let i = mirror(row as isize + dr, h) * w + mirror(col as isize + dc, w);
                    xs.push(x[i]);
                    ys.push(y[i]);
                }
            }
            let (mx, my) = (mean(&xs), mean(&ys));
            let cov = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / xs.len() as f64;
            let s = (2.0 * mx * my + c1) * (2.0 * cov + c2)
                / ((mx * mx + my * my + c1) * (variance(&xs) + variance(&ys) + c2));
            out.push(s.clamp(-1.0, 1.0));
        }
    }
    out
}

/// Joint min-max rescale of a pair to [0, 1].
pub fn normalize_pair(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
    let f = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 })
            .collect()
    };
    (f(a), f(b))
}

pub fn total_loss(p: &[f64], t: &[f64], w: usize, h: usize, lambda: f64, win: usize) -> f64 {
    let (np, nt) = normalize_pair(p, t);
    let s = ssim_map(&np, &nt, w, h, win, 1e-4, 9e-4);
    mse(p, t) + lambda * (1.0 - mean(&s))
}

/// Min-max over positive pixels; zeros stay zero.
pub fn normalize(d: &[f64]) -> Vec<f64> {
    let pos: Vec<f64> = d.iter().cloned().filter(|v| *v > 0.0).collect();
    let lo = pos.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = pos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    d.iter()
        .map(|&v| {
            if v <= 0.0 {
                0.0
            } else if hi > lo {
                (v - lo) / (hi - lo)
            } else {
                0.5
            }
        })
        .collect()
}

/// `(label, count, mean, min, max)` over positive pixels of each label.
pub fn segment_stats(d: &[f64], labels: &[u32]) -> Vec<(u32, usize, f64, f64, f64)> {
    let k = labels.iter().copied().max().unwrap_or(0);
    (1..=k)
        .filter_map(|label| {
            let v: Vec<f64> = (0..d.len())
                .filter(|&i| labels[i] == label && d[i] > 0.0)
                .map(|i| d[i])
                .collect();
            if v.is_empty() {
                return None;
            }
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Some((label, v.len(), mean(&v), lo, hi))
        })
        .collect()
}

/// Expected value of pixel `(row, col)` after one fill pass over `d`.
pub fn fill_pixel(d: &[f64], w: usize, h: usize, row: usize, col: usize) -> f64 {
    let v = d[row * w + col];
    if v != 0.0 {
        return v;
    }
    let mut nb = Vec::new();
    for r in row as isize - 2..=row as isize + 2 {
        for c in col as isize - 2..=col as isize + 2 {
            if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                let x = d[r as usize * w + c as usize];
                if x != 0.0 {
                    nb.push(x);
                }
            }
        }
    }
    if nb.is_empty() {
        0.0
    } else {
        mean(&nb)
    }
}

pub fn fill_pass(d: &[f64], w: usize, h: usize) -> Vec<f64> {
    (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| fill_pixel(d, w, h, r, c))
        .collect()
}

/// Least squares `y ≈ a·x + b` from the raw 2×2 normal equations.
/// `None` when the system is singular.
pub fn fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    if points.len() < 2 || det.abs() < 1e-9 * n * sxx {
        return None;
    }
    Some(((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det))
}

/// Per-label fitted parameters; gap pixels and label 0 use the fit over all
/// points, labels without points keep identity.
pub fn segmentwise_prediction(rel: &[f64], sparse: &[f64], labels: &[u32], floor: f64) -> Vec<f64> {
    let k = labels.iter().copied().max().unwrap_or(0);
    let pts = |keep: &dyn Fn(usize) -> bool| -> Vec<(f64, f64)> {
        (0..rel.len())
            .filter(|&i| sparse[i] > 0.0 && rel[i] > 0.0 && keep(i))
            .map(|i| (rel[i], sparse[i]))
            .collect()
    };
    let params_for = |p: Vec<(f64, f64)>| -> (f64, f64) {
        if p.is_empty() {
            (1.0, 0.0)
        } else {
            fit(&p).unwrap_or((0.0, p.iter().map(|q| q.1).sum::<f64>() / p.len() as f64))
        }
    };
    let mut table = vec![params_for(pts(&|_| true))];
    for label in 1..=k {
        table.push(params_for(pts(&|i| labels[i] == label)));
    }
    rel.iter()
        .zip(labels)
        .map(|(&x, &l)| {
            let (a, b) = table[l as usize];
            (a * x + b).max(floor)
        })
        .collect()
}

/// Rescale with explicit per-label `(alpha, beta)`; label 0 and zero
/// relative depth become gaps.
pub fn rescale(rel: &[f64], labels: &[u32], ab: &[(f64, f64)], floor: f64) -> Vec<f64> {
    rel.iter()
        .zip(labels)
        .map(|(&x, &l)| {
            if l == 0 || x <= 0.0 {
                0.0
            } else {
                let (a, b) = ab[l as usize - 1];
                (a * x + b).max(floor)
            }
        })
        .collect()
}
