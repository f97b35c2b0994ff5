#![allow(clippy::needless_range_loop)]

//! Hand-written reference implementations shared by the integration tests.
//! Nothing here calls into the library's numeric code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use acal_core::corpus::RawAnnotation;
use acal_core::{AnnotatorIdx, Corpus, EmbeddingMatrix, LabelSpace, Pools, SampleIdx};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TIE: f64 = 1e-12;

pub fn entropy_nats(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            total += p[i] * (p[i] / q[i]).log2();
        }
    }
    total
}

/// Jensen-Shannon divergence with base-2 logarithms.
pub fn jsd_bits(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl_bits(p, &m) + 0.5 * kl_bits(q, &m)
}

pub fn random_simplex<R: Rng>(rng: &mut R, c: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..c)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut v = vec![0.0; c];
        v[rng.gen_range(0..c)] = 1.0;
        return v;
    }
    raw.into_iter().map(|x| x / total).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Class probabilities of a row-major `C x d` linear model.
pub fn linear_probs(weights: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let logits: Vec<f64> = (0..bias.len())
        .map(|c| bias[c] + (0..d).map(|j| weights[c * d + j] * x[j]).sum::<f64>())
        .collect();
    softmax(&logits)
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if uu == 0.0 || vv == 0.0 {
        return 0.0;
    }
    (uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues and eigenvectors (as columns of the second result, stored as
/// a list of vectors), unsorted.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// Reference PCA: covariance eigenvectors by Jacobi, sorted by descending
/// eigenvalue, sign-normalized, with the same rank cut as the library.
pub struct RefPca {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl RefPca {
    pub fn fit(points: &[Vec<f64>], k: usize) -> RefPca {
        let n = points.len();
        let d = points[0].len();
        let mut mean = vec![0.0; d];
        for p in points {
            for j in 0..d {
                mean[j] += p[j] / n as f64;
            }
        }
        let mut cov = vec![vec![0.0; d]; d];
        for p in points {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / (n - 1) as f64;
                }
            }
        }
        let (values, vectors) = jacobi_eigen(&cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
        let magnitude: f64 = points.iter().flatten().map(|x| x * x).sum::<f64>() / n as f64;
        let cut = values[order[0]].max(0.0).max(magnitude) * 1e-10;
        let mut components = Vec::new();
        let mut eigenvalues = Vec::new();
        for &i in order.iter().take(k) {
            if values[i] <= cut || values[i] <= 0.0 {
                break;
            }
            let mut c = vectors[i].clone();
            let largest = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = *c.iter().find(|x| x.abs() > largest * 1e-8).unwrap();
            if first < 0.0 {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(c);
            eigenvalues.push(values[i]);
        }
        RefPca {
            mean,
            components,
            eigenvalues,
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(a, (xi, m))| a * (xi - m))
                    .sum()
            })
            .collect()
    }
}

/// Tie rule: candidates within `TIE` of the best, in id order, one draw when
/// there is more than one.
pub fn pick<R: Rng>(scored: &[(usize, f64)], maximize: bool, rng: &mut R) -> usize {
    let best = scored
        .iter()
        .map(|s| s.1)
        .fold(if maximize { f64::NEG_INFINITY } else { f64::INFINITY }, |a, b| {
            if maximize {
                a.max(b)
            } else {
                a.min(b)
            }
        });
    let tied: Vec<usize> = scored
        .iter()
        .filter(|s| (s.1 - best).abs() <= TIE)
        .map(|s| s.0)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

/// A corpus, embeddings and partially consumed pools, plus the consumed set
/// tracked independently of the pool types.
pub struct PoolState {
    pub corpus: Corpus,
    pub emb: EmbeddingMatrix,
    pub pools: Pools,
    pub consumed: BTreeSet<usize>,
}

impl PoolState {
    /// Random state with up to `max_samples` samples and `max_annotators`
    /// annotators. Triples are consumed in index order.
    pub fn random(seed: u64, max_samples: usize, max_annotators: usize) -> PoolState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let n_s = rng.gen_range(2..=max_samples);
            let n_a = rng.gen_range(2..=max_annotators);
            let c = rng.gen_range(2..=4);
            let dim = rng.gen_range(2..=6);
            let mut rows = Vec::new();
            for s in 0..n_s {
                let mut any = false;
                for a in 0..n_a {
                    if rng.gen_bool(0.6) {
                        any = true;
                        rows.push(raw(s, a, rng.gen_range(0..c)));
                    }
                }
                if !any {
                    rows.push(raw(s, rng.gen_range(0..n_a), rng.gen_range(0..c)));
                }
            }
            let corpus = Corpus::from_annotations(LabelSpace::numbered(c).unwrap(), rows).unwrap();
            let ids: Vec<String> = corpus.sample_ids().map(String::from).collect();
            let data: Vec<f64> = (0..ids.len() * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let emb = EmbeddingMatrix::new(dim, ids, data).unwrap();
            let train: Vec<SampleIdx> = (0..corpus.num_samples()).map(SampleIdx).collect();
            let mut pools = Pools::new(&corpus, &train);
            let fraction = rng.gen_range(0.0..0.9);
            let mut consumed = BTreeSet::new();
            for t in 0..corpus.num_triples() {
                if rng.gen_bool(fraction) {
                    pools.consume(&corpus, t).unwrap();
                    consumed.insert(t);
                }
            }
            if consumed.len() < corpus.num_triples() {
                return PoolState {
                    corpus,
                    emb,
                    pools,
                    consumed,
                };
            }
        }
    }

    pub fn selectable(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .corpus
            .triples()
            .iter()
            .enumerate()
            .filter(|(t, _)| !self.consumed.contains(t))
            .map(|(_, tr)| tr.sample.0)
            .collect();
        out.dedup();
        out.sort();
        out.dedup();
        out
    }

    pub fn available(&self, s: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .corpus
            .triples()
            .iter()
            .enumerate()
            .filter(|(t, tr)| tr.sample.0 == s && !self.consumed.contains(t))
            .map(|(_, tr)| tr.annotator.0)
            .collect();
        out.sort();
        out
    }

    /// (sample, label) pairs annotator `a` has contributed.
    pub fn history(&self, a: usize) -> Vec<(usize, usize)> {
        self.consumed
            .iter()
            .map(|&t| self.corpus.triples()[t])
            .filter(|tr| tr.annotator.0 == a)
            .map(|tr| (tr.sample.0, tr.label))
            .collect()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.emb.row(SampleIdx(s))
    }

    pub fn num_classes(&self) -> usize {
        self.corpus.num_classes()
    }

    pub fn oracle_label_minority<R: Rng>(&self, s: usize, rng: &mut R) -> usize {
        let mut counts = vec![0usize; self.num_classes()];
        for &t in &self.consumed {
            counts[self.corpus.triples()[t].label] += 1;
        }
        let minority = if self.consumed.is_empty() {
            None
        } else {
            let lowest = *counts.iter().min().unwrap();
            counts.iter().position(|&n| n == lowest)
        };
        let scored: Vec<(usize, f64)> = self
            .available(s)
            .into_iter()
            .map(|a| {
                let h = self.history(a);
                let bias = match minority {
                    Some(m) if !h.is_empty() => h.iter().filter(|x| x.1 == m).count() as f64 / h.len() as f64,
                    _ => 0.0,
                };
                (a, bias)
            })
            .collect();
        pick(&scored, true, rng)
    }

    fn fresh<R: Rng>(&self, available: &[usize], rng: &mut R) -> Option<usize> {
        let fresh: Vec<usize> = available
            .iter()
            .copied()
            .filter(|&a| self.history(a).is_empty())
            .collect();
        match fresh.len() {
            0 => None,
            1 => Some(fresh[0]),
            n => Some(fresh[rng.gen_range(0..n)]),
        }
    }

    pub fn oracle_semantic<R: Rng>(&self, s: usize, rng: &mut R) -> usize {
        let available = self.available(s);
        if let Some(a) = self.fresh(&available, rng) {
            return a;
        }
        let scored: Vec<(usize, f64)> = available
            .iter()
            .map(|&a| {
                let h = self.history(a);
                let total: f64 = h.iter().map(|&(hs, _)| cosine(self.row(s), self.row(hs))).sum();
                (a, total / h.len() as f64)
            })
            .collect();
        pick(&scored, false, rng)
    }

    pub fn representation(&self, a: usize) -> Vec<f64> {
        let h = self.history(a);
        let d = self.emb.dim();
        let mut v = vec![0.0; d + self.num_classes()];
        for &(s, label) in &h {
            for j in 0..d {
                v[j] += self.row(s)[j];
            }
            v[d + label] += 1.0;
        }
        v.iter_mut().for_each(|x| *x /= h.len() as f64);
        v
    }

    pub fn oracle_representation<R: Rng>(&self, s: usize, rng: &mut R) -> usize {
        let available = self.available(s);
        if available.len() == 1 {
            return available[0];
        }
        if let Some(a) = self.fresh(&available, rng) {
            return a;
        }
        let with_history: Vec<usize> = (0..self.corpus.num_annotators())
            .filter(|&a| !self.history(a).is_empty())
            .collect();
        if with_history.len() < 2 {
            return available[rng.gen_range(0..available.len())];
        }
        let reps: Vec<Vec<f64>> = with_history.iter().map(|&a| self.representation(a)).collect();
        let pca = RefPca::fit(&reps, 10);
        let projected: Vec<Vec<f64>> = available
            .iter()
            .map(|&a| pca.project(&self.representation(a)))
            .collect();
        let n = available.len();
        let scored: Vec<(usize, f64)> = (0..n)
            .map(|i| {
                let total: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| cosine(&projected[i], &projected[j]))
                    .sum();
                (available[i], total / (n - 1) as f64)
            })
            .collect();
        pick(&scored, false, rng)
    }

    /// Top-`b` selectable samples by predictive entropy; equal entropies keep id order.
    pub fn oracle_uncertainty(&self, weights: &[f64], bias: &[f64], b: usize) -> Vec<usize> {
        let mut scored: Vec<(usize, f64)> = self
            .selectable()
            .into_iter()
            .map(|s| (s, entropy_nats(&linear_probs(weights, bias, self.row(s)))))
            .collect();
        scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        scored.into_iter().take(b).map(|x| x.0).collect()
    }
}

pub fn raw(s: usize, a: usize, label: usize) -> RawAnnotation {
    RawAnnotation {
        sample_id: format!("s{s:03}"),
        annotator_id: format!("a{a:03}"),
        label,
    }
}

pub fn annotator(i: usize) -> AnnotatorIdx {
    AnnotatorIdx(i)
}

/// Unit-variance random embeddings for every sample of `corpus`.
pub fn random_embeddings(corpus: &Corpus, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = corpus.sample_ids().map(String::from).collect();
    let data = (0..ids.len() * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    EmbeddingMatrix::new(dim, ids, data).unwrap()
}
