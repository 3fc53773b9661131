#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use rapid_core::{Image, LabelMap, Weights};

/// Exact energy with means recomputed from the labeled pixels.
pub fn oracle_energy(img: &Image, labels: &[u32], w: &Weights) -> f64 {
    let ch = img.channels() as usize;
    let width = img.width() as usize;
    let k = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut n = vec![0.0f64; k];
    let mut col_sum = vec![[0.0f64; 3]; k];
    let mut pos_sum = vec![[0.0f64; 2]; k];
    for (i, &l) in labels.iter().enumerate() {
        let l = l as usize;
        n[l] += 1.0;
        for (c, &v) in img.data()[i * ch..][..ch].iter().enumerate() {
            col_sum[l][c] += v as f64;
        }
        pos_sum[l][0] += (i % width) as f64;
        pos_sum[l][1] += (i / width) as f64;
    }
    let mut col = 0.0;
    let mut pos = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        let l = l as usize;
        for (c, &v) in img.data()[i * ch..][..ch].iter().enumerate() {
            col += (v as f64 - col_sum[l][c] / n[l]).powi(2);
        }
        pos += ((i % width) as f64 - pos_sum[l][0] / n[l]).powi(2) + ((i / width) as f64 - pos_sum[l][1] / n[l]).powi(2);
    }
    col / w.color_div + w.lambda_pos * pos / w.pos_div + w.lambda_b * ordered_cut_pairs(labels, width) as f64
}

pub fn ordered_cut_pairs(labels: &[u32], width: usize) -> u64 {
    let height = labels.len() / width;
    let mut cut = 0;
    for y in 0..height {
        for x in 0..width {
            let l = labels[y * width + x];
            if x + 1 < width && labels[y * width + x + 1] != l {
                cut += 2;
            }
            if y + 1 < height && labels[(y + 1) * width + x] != l {
                cut += 2;
            }
        }
    }
    cut
}

/// Labels whose pixels form more than one 4-connected component.
pub fn disconnected_labels(lm: &LabelMap) -> Vec<u32> {
    let (w, h) = (lm.width() as usize, lm.height() as usize);
    let labels = lm.labels();
    let mut seen = vec![false; w * h];
    let mut components: HashMap<u32, u32> = HashMap::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] {
            continue;
        }
        let l = labels[start];
        *components.entry(l).or_default() += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !seen[j] && labels[j] == l {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
    }
    let mut bad: Vec<u32> = components.into_iter().filter(|&(_, c)| c > 1).map(|(l, _)| l).collect();
    bad.sort_unstable();
    bad
}

/// Pixel counts per label.
pub fn sizes(lm: &LabelMap) -> Vec<u64> {
    let mut out = vec![0; lm.count() as usize];
    for &l in lm.labels() {
        out[l as usize] += 1;
    }
    out
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
