use nalgebra::DMatrix;
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{doc_term_matrix, top_k_from, Topic, TopicError, TopicFit, TopicModel, TopicRepresentation};
use crate::cluster::NOISE;
use crate::textprep::TokenDoc;

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfParams {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfParams {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-6, seed: 0 }
    }
}

/// `V ≈ W H` for `V` the transposed document-term matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    /// terms x k
    pub w: DMatrix<f64>,
    /// k x documents
    pub h: DMatrix<f64>,
    pub k: usize,
    /// Frobenius residual at initialization and after every iteration.
    pub residuals: Vec<f64>,
    /// `‖V‖_F`, for relative residuals.
    pub input_norm: f64,
}

impl NmfFactors {
    pub fn relative_residual(&self) -> f64 {
        let last = *self.residuals.last().expect("initial residual recorded");
        if self.input_norm == 0.0 {
            last
        } else {
            last / self.input_norm
        }
    }

    /// Top-`n` terms of every factor.
    pub fn topic_words(&self, vocab: &[String], n: usize) -> TopicRepresentation {
        let topics = (0..self.k)
            .map(|j| {
                let (words, short) = top_k_from(vocab.iter().map(String::as_str).zip(self.w.column(j).iter().copied()), n);
                Topic { id: j as i64, words, short }
            })
            .collect();
        TopicRepresentation { topics }
    }

    /// Strongest factor per document; all-zero columns are noise.
    pub fn doc_labels(&self) -> Vec<i64> {
        self.h
            .column_iter()
            .map(|col| match col.argmax() {
                (_, v) if v <= 0.0 => NOISE,
                (j, _) => j as i64,
            })
            .collect()
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(Open01))
}

/// Lee-Seung multiplicative updates on `docs x terms` input. `H` is updated
/// before `W` in each iteration; iteration stops once the relative residual
/// improvement drops below `tol`.
pub fn nmf_fit(a: &DMatrix<f64>, k: usize, params: &NmfParams) -> Result<NmfFactors, TopicError> {
    if let Some((i, &value)) = a.iter().enumerate().find(|(_, &x)| x < 0.0 || x.is_nan()) {
        return Err(TopicError::NegativeInput { row: i % a.nrows(), col: i / a.nrows(), value });
    }
    let limit = a.nrows().min(a.ncols());
    if k == 0 || k >= limit {
        return Err(TopicError::BadRank { k, limit });
    }
    let v = a.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w = random_matrix(v.nrows(), k, &mut rng);
    let mut h = random_matrix(k, v.ncols(), &mut rng);
    let residual = |w: &DMatrix<f64>, h: &DMatrix<f64>| (&v - w * h).norm();
    let mut residuals = vec![residual(&w, &h)];
    for _ in 0..params.max_iters {
        let wt = w.transpose();
        let num = &wt * &v;
        let den = &wt * &w * &h;
        h.zip_zip_apply(&num, &den, |x, n, d| *x *= n / (d + EPS));
        let ht = h.transpose();
        let num = &v * &ht;
        let den = &w * (&h * &ht);
        w.zip_zip_apply(&num, &den, |x, n, d| *x *= n / (d + EPS));
        let prev = *residuals.last().expect("non-empty");
        let r = residual(&w, &h);
        residuals.push(r);
        if prev == 0.0 || (prev - r) / prev < params.tol {
            break;
        }
    }
    Ok(NmfFactors { w, h, k, residuals, input_norm: v.norm() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_k: usize,
    /// `(k, score)` in ascending `k`.
    pub scores: Vec<(usize, f64)>,
}

/// Fits one model per candidate rank with the same seed and scores each
/// model's top-`top_n` words. The highest score wins; ties go to the smaller
/// rank.
pub fn grid_search_k(
    a: &DMatrix<f64>,
    vocab: &[String],
    candidates: &[usize],
    top_n: usize,
    params: &NmfParams,
    scorer: impl Fn(&[Vec<String>]) -> f64 + Sync,
) -> Result<GridSearch, TopicError> {
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(TopicError::NoCandidates);
    }
    let scores: Vec<(usize, f64)> = ks
        .par_iter()
        .map(|&k| {
            let f = nmf_fit(a, k, params)?;
            Ok((k, scorer(&f.topic_words(vocab, top_n).word_lists())))
        })
        .collect::<Result<_, TopicError>>()?;
    let best_k = scores
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((k, s)),
        })
        .expect("non-empty")
        .0;
    Ok(GridSearch { best_k, scores })
}

/// NMF over the token docs' count matrix; ignores incoming labels.
#[derive(Debug, Clone)]
pub struct NmfModel {
    pub k: usize,
    pub params: NmfParams,
    pub min_df: usize,
    pub top_k: usize,
}

impl TopicModel for NmfModel {
    fn name(&self) -> &'static str {
        "nmf"
    }

    fn fit(&self, docs: &[TokenDoc], _labels: &[i64]) -> Result<TopicFit, TopicError> {
        let dtm = doc_term_matrix(docs, self.min_df);
        let f = nmf_fit(&dtm.counts, self.k, &self.params)?;
        Ok(TopicFit { topics: f.topic_words(&dtm.vocab, self.top_k), labels: f.doc_labels() })
    }
}
