//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use frdl::net::{loss_and_gradient, NetworkConfig, NetworkParams, SampleFeatures};

/// HOG by direct per-pixel voting. Each pixel votes into every bin with a
/// triangular kernel on the orientation circle, which is the same as
/// splitting the vote linearly between the two nearest bin centres.
pub fn hog_oracle(
    img: &[Vec<f64>],
    cell: usize,
    block: usize,
    stride: usize,
    bins: usize,
    eps: f64,
) -> Vec<f64> {
    let h = img.len() as isize;
    let w = img[0].len() as isize;
    let px = |x: isize, y: isize| img[y.clamp(0, h - 1) as usize][x.clamp(0, w - 1) as usize];
    let width = 180.0 / bins as f64;
    let cell_hist = |cx: usize, cy: usize| -> Vec<f64> {
        let mut hist = vec![0.0; bins];
        for y in cy * cell..(cy + 1) * cell {
            for x in cx * cell..(cx + 1) * cell {
                let (x, y) = (x as isize, y as isize);
                let gx = px(x - 1, y) - px(x + 1, y);
                let gy = px(x, y - 1) - px(x, y + 1);
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    continue;
                }
                let mut a = gx.atan2(gy) * 180.0 / std::f64::consts::PI;
                while a < 0.0 {
                    a += 180.0;
                }
                while a >= 180.0 {
                    a -= 180.0;
                }
                for (b, slot) in hist.iter_mut().enumerate() {
                    let centre = (b as f64 + 0.5) * width;
                    let mut d = (a - centre).abs();
                    if d > 90.0 {
                        d = 180.0 - d;
                    }
                    let k = 1.0 - d / width;
                    if k > 0.0 {
                        *slot += k * mag;
                    }
                }
            }
        }
        hist
    };
    let cells_x = w as usize / cell;
    let cells_y = h as usize / cell;
    let mut out = Vec::new();
    let mut by = 0;
    while by + block <= cells_y {
        let mut bx = 0;
        while bx + block <= cells_x {
            let mut v = Vec::new();
            for cy in by..by + block {
                for cx in bx..bx + block {
                    v.extend(cell_hist(cx, cy));
                }
            }
            let norm = (v.iter().map(|a| a * a).sum::<f64>() + eps * eps).sqrt();
            out.extend(v.iter().map(|a| if norm > 0.0 { a / norm } else { 0.0 }));
            bx += stride;
        }
        by += stride;
    }
    out
}

/// Weighted KNN by rank counting: a point is among the `k` nearest when
/// fewer than `k` points are strictly closer.
pub fn knn_oracle(points: &[Vec<f64>], labels: &[usize], query: &[f64], k: usize) -> usize {
    let dist: Vec<f64> = points
        .iter()
        .map(|p| p.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    let rank = |i: usize| dist.iter().filter(|&&d| d < dist[i]).count();
    if let Some(i) = (0..dist.len())
        .filter(|&i| dist[i] == 0.0)
        .min_by_key(|&i| labels[i])
    {
        return labels[i];
    }
    let k = k.min(points.len());
    let chosen: Vec<usize> = (0..dist.len()).filter(|&i| rank(i) < k).collect();
    let scale = match (0..dist.len()).find(|&i| rank(i) == k) {
        Some(i) => dist[i],
        None => chosen.iter().map(|&i| dist[i]).fold(0.0, f64::max),
    };
    let classes = labels.iter().max().unwrap() + 1;
    let mut votes = vec![0.0; classes];
    for &i in &chosen {
        let d = dist[i] / scale;
        votes[labels[i]] += 1.0 / (d * d);
    }
    let mut best = 0;
    for c in 1..classes {
        if votes[c] > votes[best] {
            best = c;
        }
    }
    best
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter value, with the offending tensor name.
/// Pairs where both magnitudes are below `floor` are compared absolutely.
pub fn gradient_check(
    config: &NetworkConfig,
    params: &NetworkParams,
    input: &SampleFeatures,
    label: usize,
    step: f64,
    floor: f64,
) -> (f64, String) {
    let (_, analytic) = loss_and_gradient(config, params, input, label).unwrap();
    let mut p = params.clone();
    let mut worst = (0.0, String::new());
    for ti in 0..p.len() {
        let name = p.names()[ti].clone();
        for k in 0..p.tensors()[ti].len() {
            let orig = p.tensors()[ti].data()[k];
            p.tensors_mut()[ti].data_mut()[k] = orig + step;
            let lp = loss_and_gradient(config, &p, input, label).unwrap().0;
            p.tensors_mut()[ti].data_mut()[k] = orig - step;
            let lm = loss_and_gradient(config, &p, input, label).unwrap().0;
            p.tensors_mut()[ti].data_mut()[k] = orig;
            let num = (lp - lm) / (2.0 * step);
            let ana = analytic.tensors()[ti].data()[k];
            let scale = num.abs().max(ana.abs());
            let err = if scale < floor {
                (num - ana).abs()
            } else {
                (num - ana).abs() / scale
            };
            if err > worst.0 {
                worst = (err, format!("{name}[{k}] analytic {ana:.6e} numeric {num:.6e}"));
            }
        }
    }
    worst
}
