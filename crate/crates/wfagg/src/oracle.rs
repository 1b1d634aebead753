//! Slow, obviously-correct reimplementations used to cross-check the core
//! crate. They work on plain `Vec<f64>` rows and share no code with the
//! kernels they check.

use wfagg_core::learning::{Dataset, Model};

pub type Row = Vec<f64>;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn column(models: &[Row], k: usize) -> Vec<f64> {
    models.iter().map(|m| m[k]).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn mean(models: &[Row]) -> Row {
    let d = models[0].len();
    (0..d).map(|k| column(models, k).iter().sum::<f64>() / models.len() as f64).collect()
}

/// Per-coordinate sort; middle element, or the average of the two middles.
pub fn median(models: &[Row]) -> Row {
    let d = models[0].len();
    (0..d)
        .map(|k| {
            let c = sorted(column(models, k));
            let n = c.len();
            if n % 2 == 1 {
                c[n / 2]
            } else {
                (c[n / 2 - 1] + c[n / 2]) / 2.0
            }
        })
        .collect()
}

/// Removes the current minimum and maximum `⌊βK⌋` times per coordinate,
/// then averages what is left.
pub fn trimmed_mean(models: &[Row], beta: f64) -> Row {
    let b = (beta * models.len() as f64).floor() as usize;
    let d = models[0].len();
    (0..d)
        .map(|k| {
            let mut c = column(models, k);
            for _ in 0..b {
                let lo = (0..c.len()).min_by(|&i, &j| c[i].total_cmp(&c[j])).unwrap();
                c.remove(lo);
                let hi = (0..c.len()).max_by(|&i, &j| c[i].total_cmp(&c[j])).unwrap();
                c.remove(hi);
            }
            c.iter().sum::<f64>() / c.len() as f64
        })
        .collect()
}

/// Sum of the `K - f - 2` smallest squared distances to the other models.
pub fn krum_scores(models: &[Row], f: usize) -> Vec<f64> {
    let k = models.len();
    let closest = k - f - 2;
    (0..k)
        .map(|i| {
            let others = sorted((0..k).filter(|&j| j != i).map(|j| sq_dist(&models[i], &models[j])).collect());
            others[..closest].iter().sum()
        })
        .collect()
}

/// The `m` lowest scores, ties to the lower index, returned in index order.
pub fn multikrum_select(models: &[Row], f: usize, m: usize) -> Vec<usize> {
    let scores = krum_scores(models, f);
    let mut chosen = Vec::new();
    for _ in 0..m {
        let mut best: Option<usize> = None;
        for i in 0..models.len() {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|b| scores[i] < scores[b]) {
                best = Some(i);
            }
        }
        chosen.push(best.unwrap());
    }
    chosen.sort_unstable();
    chosen
}

/// Cosine distance; a zero vector is at distance 2 from everything.
pub fn cosine_dist(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 2.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    1.0 - dot / (na * nb)
}

fn average_linkage(models: &[Row], a: &[usize], b: &[usize]) -> f64 {
    let mut sum = 0.0;
    for &i in a {
        for &j in b {
            sum += cosine_dist(&models[i], &models[j]);
        }
    }
    sum / (a.len() * b.len()) as f64
}

fn mean_intra(models: &[Row], c: &[usize]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0;
    for x in 0..c.len() {
        for y in x + 1..c.len() {
            sum += cosine_dist(&models[c[x]], &models[c[y]]);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Average-linkage agglomeration on cosine distance down to two clusters,
/// recomputing every linkage from the raw pairwise distances. Returns
/// `(selected, rejected)`: the larger cluster, or on equal sizes the one
/// with the smaller mean intra-cluster distance (then the one holding the
/// lowest index).
pub fn cluster_partition(models: &[Row]) -> (Vec<usize>, Vec<usize>) {
    let mut clusters: Vec<Vec<usize>> = (0..models.len()).map(|i| vec![i]).collect();
    while clusters.len() > 2 {
        clusters.sort_by_key(|c| c[0]);
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let l = average_linkage(models, &clusters[a], &clusters[b]);
                if l < best.2 {
                    best = (a, b, l);
                }
            }
        }
        let absorbed = clusters.remove(best.1);
        clusters[best.0].extend(absorbed);
        clusters[best.0].sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    let (a, b) = (clusters[0].clone(), clusters[1].clone());
    let a_wins = a.len() > b.len() || (a.len() == b.len() && mean_intra(models, &a) <= mean_intra(models, &b));
    if a_wins {
        (a, b)
    } else {
        (b, a)
    }
}

/// `1 - Σ‖v_i − v̄‖² / Σ‖v_i‖²`, or `None` when every vector is zero.
pub fn r_squared(models: &[Row]) -> Option<f64> {
    let centre = mean(models);
    let ssr: f64 = models.iter().map(|m| sq_dist(m, &centre)).sum();
    let sst: f64 = models.iter().map(|m| m.iter().map(|x| x * x).sum::<f64>()).sum();
    (sst != 0.0).then(|| 1.0 - ssr / sst)
}

/// What the mean of `N - M` benign updates and `M` IPM copies equals:
/// `(N − M(1+ε)) / (N(N−M)) · Σ benign`.
pub fn ipm_mean(benign: &[Row], malicious: usize, epsilon: f64) -> Row {
    let m = malicious as f64;
    let n = benign.len() as f64 + m;
    let coeff = (n - m * (1.0 + epsilon)) / (n * (n - m));
    let d = benign[0].len();
    (0..d).map(|k| coeff * column(benign, k).iter().sum::<f64>()).collect()
}

/// Mean cross-entropy of `model` on the rows in `batch`, from logits alone.
fn batch_loss(model: &Model, data: &Dataset, batch: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in batch {
        let z = model.logits(data.sample(i));
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - z[data.label(i)];
    }
    total / batch.len() as f64
}

/// Central finite-difference gradient with step `h`.
pub fn numeric_gradient(model: &Model, data: &Dataset, batch: &[usize], h: f64) -> Row {
    let base = model.params().to_vec();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            plus[k] += h;
            let mut minus = base.clone();
            minus[k] -= h;
            let at = |p: Vec<f64>| {
                let m = model.with_params(wfagg_core::ParamVec::new(p).unwrap()).unwrap();
                batch_loss(&m, data, batch)
            };
            (at(plus) - at(minus)) / (2.0 * h)
        })
        .collect()
}

/// Accuracy from an explicit confusion matrix: trace over total.
pub fn confusion_accuracy(model: &Model, test: &Dataset) -> f64 {
    let c = test.num_classes();
    let mut confusion = vec![vec![0usize; c]; c];
    for i in 0..test.len() {
        let z = model.logits(test.sample(i));
        let mut pred = 0;
        for k in 1..c {
            if z[k] > z[pred] {
                pred = k;
            }
        }
        confusion[test.label(i)][pred] += 1;
    }
    let trace: usize = (0..c).map(|k| confusion[k][k]).sum();
    trace as f64 / test.len() as f64
}

/// `|a - b| / max(|a|, |b|)`, with 0 when both are 0.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest coordinate-wise [`rel_err`], with the scale floored at `floor`
/// so coordinates that are zero up to rounding compare absolutely.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
