use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::cluster::NOISE;
use crate::vectors::{cosine, norm, EmbeddingMatrix};

fn unit_row(embeddings: &EmbeddingMatrix, i: usize, label: i64) -> Result<Vec<f64>, MetricError> {
    let mut v = embeddings.row_f64(i);
    let n = norm(&v);
    if n == 0.0 {
        return Err(MetricError::ZeroVector { label });
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

/// Mean unit-length member embedding per non-noise label, in ascending
/// label order. Members are normalized first, so rescaling a member never
/// moves its topic's centroid.
pub fn topic_centroids(embeddings: &EmbeddingMatrix, labels: &[i64]) -> Result<BTreeMap<i64, Vec<f64>>, MetricError> {
    if embeddings.rows() != labels.len() {
        return Err(MetricError::LengthMismatch { rows: embeddings.rows(), labels: labels.len() });
    }
    let mut sums: BTreeMap<i64, (Vec<f64>, usize)> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == NOISE {
            continue;
        }
        let unit = unit_row(embeddings, i, l)?;
        let (sum, n) = sums.entry(l).or_insert_with(|| (vec![0.0; embeddings.dim()], 0));
        sum.iter_mut().zip(unit).for_each(|(s, x)| *s += x);
        *n += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(l, (sum, n))| (l, sum.into_iter().map(|s| s / n as f64).collect()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intratopic {
    /// `(label, mean member-to-centroid cosine)`
    pub per_topic: Vec<(i64, f64)>,
    pub mean: f64,
}

/// Per topic, the mean cosine of each member to the topic centroid; the
/// model score is the unweighted mean over topics. Noise rows are skipped.
pub fn intratopic_similarity(embeddings: &EmbeddingMatrix, labels: &[i64]) -> Result<Intratopic, MetricError> {
    let centroids = topic_centroids(embeddings, labels)?;
    if centroids.is_empty() {
        return Err(MetricError::NoTopics);
    }
    let mut per_topic = Vec::with_capacity(centroids.len());
    for (&label, centroid) in &centroids {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l == label) {
            sum += cosine(&unit_row(embeddings, i, label)?, centroid).ok_or(MetricError::ZeroVector { label })?;
            n += 1;
        }
        per_topic.push((label, sum / n as f64));
    }
    let mean = per_topic.iter().map(|(_, s)| s).sum::<f64>() / per_topic.len() as f64;
    Ok(Intratopic { per_topic, mean })
}

/// Mean of the strict upper triangle of the centroid cosine matrix.
pub fn intertopic_similarity(embeddings: &EmbeddingMatrix, labels: &[i64]) -> Result<f64, MetricError> {
    let centroids: Vec<(i64, Vec<f64>)> = topic_centroids(embeddings, labels)?.into_iter().collect();
    if centroids.len() < 2 {
        return Err(MetricError::TooFewTopics(centroids.len()));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            let (li, ci) = &centroids[i];
            let (lj, cj) = &centroids[j];
            let zero = |l: i64| MetricError::ZeroVector { label: l };
            if ci.iter().all(|&x| x == 0.0) {
                return Err(zero(*li));
            }
            sum += cosine(ci, cj).ok_or_else(|| zero(*lj))?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f32]]) -> EmbeddingMatrix {
        let keys = (0..rows.len()).map(|i| i.to_string()).collect();
        EmbeddingMatrix::from_rows(keys, &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identical_members_score_one() {
        let e = m(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        let r = intratopic_similarity(&e, &[0, 0, 0]).unwrap();
        assert!((r.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn opposite_members_zero_centroid() {
        let e = m(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        assert_eq!(intratopic_similarity(&e, &[0, 0]), Err(MetricError::ZeroVector { label: 0 }));
    }

    #[test]
    fn intertopic_cases() {
        let e = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(intertopic_similarity(&e, &[0, 1]).unwrap(), 0.0);
        let e = m(&[&[1.0, 1.0], &[2.0, 2.0]]);
        assert!((intertopic_similarity(&e, &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
        // pairwise cosines {0, 0, 1}
        let e = m(&[&[1.0, 0.0], &[0.0, 1.0], &[3.0, 0.0]]);
        assert!((intertopic_similarity(&e, &[0, 1, 2]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(intertopic_similarity(&e, &[0, 0, -1]), Err(MetricError::TooFewTopics(1)));
    }

    #[test]
    fn noise_rows_ignored() {
        let e = m(&[&[1.0, 0.0], &[0.0, 5.0], &[1.0, 0.0]]);
        let r = intratopic_similarity(&e, &[0, NOISE, 0]).unwrap();
        assert_eq!(r.per_topic, [(0, 1.0)]);
    }

    #[test]
    fn scale_invariant_and_permutation_invariant() {
        let e = m(&[&[1.0, 0.2], &[0.8, 0.1], &[0.1, 1.0], &[0.3, 0.9], &[0.5, 0.5]]);
        let scaled = m(&[&[3.0, 0.6], &[0.8, 0.1], &[0.1, 1.0], &[0.6, 1.8], &[0.5, 0.5]]);
        let labels = [0, 0, 1, 1, 2];
        let a = intratopic_similarity(&e, &labels).unwrap();
        let b = intratopic_similarity(&scaled, &labels).unwrap();
        for (x, y) in a.per_topic.iter().zip(&b.per_topic) {
            assert!((x.1 - y.1).abs() < 1e-9);
        }
        let permuted = [2, 2, 0, 0, 1];
        let x = intertopic_similarity(&e, &labels).unwrap();
        let y = intertopic_similarity(&e, &permuted).unwrap();
        assert!((x - y).abs() < 1e-12);
    }
}
