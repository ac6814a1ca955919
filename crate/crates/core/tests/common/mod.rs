//! Helpers shared by the integration tests and the acceptance harness:
//! independent oracles and planted fixtures.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use fintopic::keywords::KeywordList;
use fintopic::metrics::{npmi_coherence, CoherenceConfig};
use fintopic::objective::{circle_loss, circle_loss_grad, CircleLossParams, SimilarityBatch};
use fintopic::textprep::{Normalizer, TokenDoc};
use fintopic::topics::{doc_term_matrix, grid_search_k, NmfParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn toy_config() -> PathBuf {
    workspace_root().join("fixtures/toy/config.toml")
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings; noise labels count as one
/// more class.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut table: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut rows: BTreeMap<i64, u64> = BTreeMap::new();
    let mut cols: BTreeMap<i64, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sa: f64 = rows.values().map(|&n| choose2(n)).sum();
    let sb: f64 = cols.values().map(|&n| choose2(n)).sum();
    let expected = sa * sb / choose2(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Topic coherence by explicit enumeration of every window. A document
/// shorter than the window is one window; empty documents have none.
pub fn npmi_oracle(topics: &[Vec<String>], corpus: &[TokenDoc], window: usize, top_k: usize, eps: f64) -> Vec<f64> {
    let mut windows: Vec<&[String]> = Vec::new();
    for d in corpus {
        let t = &d.tokens;
        if t.is_empty() {
            continue;
        }
        if t.len() <= window {
            windows.push(t);
        } else {
            for s in 0..=t.len() - window {
                windows.push(&t[s..s + window]);
            }
        }
    }
    let n = windows.len() as f64;
    let has = |w: &[String], x: &str| w.iter().any(|t| t == x);
    topics
        .iter()
        .map(|topic| {
            let words = &topic[..topic.len().min(top_k)];
            let mut scores = Vec::new();
            for i in 0..words.len() {
                for j in i + 1..words.len() {
                    let (a, b) = (words[i].as_str(), words[j].as_str());
                    let ca = windows.iter().filter(|w| has(w, a)).count() as f64;
                    let cb = windows.iter().filter(|w| has(w, b)).count() as f64;
                    let cab = windows.iter().filter(|w| has(w, a) && has(w, b)).count() as f64;
                    let score = if ca == 0.0 || cb == 0.0 {
                        -1.0
                    } else if cab == n {
                        1.0
                    } else {
                        let pab = cab / n + eps;
                        (pab / ((ca / n) * (cb / n))).ln() / -pab.ln()
                    };
                    scores.push(score);
                }
            }
            if scores.is_empty() {
                0.0
            } else {
                scores.iter().sum::<f64>() / scores.len() as f64
            }
        })
        .collect()
}

/// Random corpus over a small vocabulary: `(corpus, topics)` with five-word
/// topics, occasionally including a word absent from the corpus.
pub fn random_npmi_case(rng: &mut ChaCha8Rng) -> (Vec<TokenDoc>, Vec<Vec<String>>) {
    let vocab: Vec<String> = (0..rng.gen_range(6..=14)).map(|i| format!("w{i}")).collect();
    let docs = rng.gen_range(1..=50);
    let corpus = (0..docs)
        .map(|d| TokenDoc {
            key: format!("d{d}"),
            tokens: (0..rng.gen_range(0..=60)).map(|_| vocab.choose(rng).expect("non-empty").clone()).collect(),
        })
        .collect();
    let mut pool = vocab.clone();
    pool.push("absent".into());
    let topics = (0..rng.gen_range(1..=4))
        .map(|_| pool.choose_multiple(rng, 5).cloned().collect())
        .collect();
    (corpus, topics)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// MST weight of the mutual-reachability graph by Kruskal over every edge,
/// with core distances from a full sort (the point itself is the first
/// neighbour).
pub fn brute_force_mst_weight(points: &[Vec<f64>], min_samples: usize) -> f64 {
    let n = points.len();
    let core: Vec<f64> = points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| dist(p, q)).collect();
            d.sort_by(f64::total_cmp);
            d[min_samples.min(n) - 1]
        })
        .collect();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((dist(&points[i], &points[j]).max(core[i]).max(core[j]), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut total = 0.0;
    for (w, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            total += w;
        }
    }
    total
}

/// `per_blob` Gaussian points (sd 1) around each of `blobs` centres placed
/// `spacing` apart on distinct axes of `dim`-space. Returns points and
/// planted labels.
pub fn planted_blobs(blobs: usize, per_blob: usize, dim: usize, spacing: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("valid sd");
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for b in 0..blobs {
        let mut centre = vec![0.0; dim];
        if b > 0 {
            centre[b - 1] = spacing;
        }
        for _ in 0..per_blob {
            points.push(centre.iter().map(|c| c + noise.sample(&mut rng)).collect());
            labels.push(b as i64);
        }
    }
    (points, labels)
}

/// Three five-word vocabularies; documents are single topics or pairs,
/// each word repeated 5, 4, 3, 2, 1 times by rank.
pub const PLANTED_VOCABS: [[&str; 5]; 3] = [
    ["apple", "banana", "cherry", "grape", "lemon"],
    ["anchor", "harbor", "sail", "vessel", "wharf"],
    ["cobalt", "copper", "nickel", "tin", "zinc"],
];

pub fn planted_topic_corpus(docs: usize) -> Vec<TokenDoc> {
    let kinds: [&[usize]; 6] = [&[0], &[1], &[2], &[0, 1], &[1, 2], &[2, 0]];
    (0..docs)
        .map(|d| {
            let mut tokens = Vec::new();
            for &t in kinds[d % kinds.len()] {
                for (rank, w) in PLANTED_VOCABS[t].iter().enumerate() {
                    tokens.extend(std::iter::repeat(w.to_string()).take(5 - rank));
                }
            }
            TokenDoc { key: format!("p{d}"), tokens }
        })
        .collect()
}

/// Best rank among {2, 3, 4} for the planted corpus, scored by NPMI
/// coherence of each model's top five words.
pub fn planted_grid_search(seed: u64) -> usize {
    let corpus = planted_topic_corpus(60);
    let dtm = doc_term_matrix(&corpus, 1);
    let cfg = CoherenceConfig { window_size: 40, top_k: 5, epsilon: 1e-12 };
    let params = NmfParams { max_iters: 2000, tol: 1e-10, seed };
    let scorer = |topics: &[Vec<String>]| npmi_coherence(topics, &corpus, &cfg).expect("non-empty corpus").mean;
    grid_search_k(&dtm.counts, &dtm.vocab, &[2, 3, 4], 5, &params, scorer).unwrap().best_k
}

/// Planted drop counts of the synthetic funnel manifest.
pub struct FunnelPlan {
    pub short: usize,
    pub long: usize,
    pub out_of_years: usize,
    pub dissimilar: usize,
    pub kept: usize,
}

pub const PRODUCTION_FUNNEL: FunnelPlan =
    FunnelPlan { short: 1019, long: 165, out_of_years: 373, dissimilar: 1604, kept: 1439 };

impl FunnelPlan {
    pub fn total(&self) -> usize {
        self.short + self.long + self.out_of_years + self.dissimilar + self.kept
    }
}

const NORMAL_WORDS: usize = 400;
const SHORT_WORDS: usize = 100;
const LONG_WORDS: usize = 3000;
const SHARED_REPEATS: usize = 5;
/// Dissimilar documents split evenly into this many vocabulary groups.
const GROUPS: usize = 16;
const GROUP_WORDS: usize = 15;
const GROUP_REPEATS: usize = 3;
const PAD: &str = "the";

/// Twenty single-token keywords that normalize to themselves; protected,
/// so they survive the document-frequency ceiling.
fn shared_words(keywords: &KeywordList) -> Vec<String> {
    let norm = Normalizer::builtin(keywords.keyword_set());
    let words: BTreeSet<String> = keywords
        .topics()
        .iter()
        .flat_map(|t| t.keywords.iter())
        .filter(|k| k.len() >= 4 && k.chars().all(|c| c.is_ascii_lowercase()) && norm.normalize(k) == [k.as_str()])
        .cloned()
        .collect();
    words.into_iter().take(20).collect()
}

/// Four-letter pseudo-words: short enough to escape suffix stripping.
fn group_vocab(group: usize) -> Vec<String> {
    const HEAD: [&str; 20] =
        ["zu", "vo", "ky", "qa", "xe", "jo", "wu", "fy", "gi", "hu", "bo", "du", "ka", "ny", "pu", "ry", "tu", "vy", "zo", "xi"];
    const TAIL: [&str; 15] = ["rk", "mb", "lt", "nd", "pt", "rv", "gh", "ft", "xt", "mp", "lk", "nk", "rp", "wt", "zk"];
    TAIL.iter().take(GROUP_WORDS).map(|t| format!("{}{t}", HEAD[group])).collect()
}

fn body(rng: &mut ChaCha8Rng, mut tokens: Vec<String>, words: usize) -> String {
    assert!(tokens.len() <= words);
    tokens.resize(words, PAD.to_string());
    tokens.shuffle(rng);
    format!("Item 7.\n{}\nItem 8.\n", tokens.join(" "))
}

/// Writes the synthetic filings and `manifest.csv` into `dir` and returns the
/// manifest path.
///
/// Documents that survive the word filters hold the same 400 words (after
/// stopword padding); the long ones sit far above two standard deviations.
/// Kept documents share one keyword profile. Dissimilar documents add a
/// heavier block of group-specific words, so each is close only to its own
/// group of about 100 and its mean cosine to the rest stays well under 0.6,
/// while the shared documents stay above it.
pub fn write_funnel_manifest(dir: &Path, plan: &FunnelPlan, keywords: &KeywordList, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared: Vec<String> =
        shared_words(keywords).iter().flat_map(|w| std::iter::repeat(w.clone()).take(SHARED_REPEATS)).collect();
    #[derive(Clone, Copy)]
    enum Kind {
        Short,
        Long,
        OutOfYears,
        Dissimilar(usize),
        Kept,
    }
    let mut kinds = Vec::with_capacity(plan.total());
    kinds.extend(std::iter::repeat(Kind::Short).take(plan.short));
    kinds.extend(std::iter::repeat(Kind::Long).take(plan.long));
    kinds.extend(std::iter::repeat(Kind::OutOfYears).take(plan.out_of_years));
    kinds.extend((0..plan.dissimilar).map(|i| Kind::Dissimilar(i % GROUPS)));
    kinds.extend(std::iter::repeat(Kind::Kept).take(plan.kept));
    kinds.shuffle(&mut rng);

    let filings = dir.join("filings");
    std::fs::create_dir_all(&filings).expect("create filings dir");
    let mut manifest = String::from("id,fiscal_year,path\n");
    for (i, kind) in kinds.into_iter().enumerate() {
        let mut year = rng.gen_range(2016..=2022);
        let text = match kind {
            Kind::Short => body(&mut rng, shared[..SHORT_WORDS].to_vec(), SHORT_WORDS),
            Kind::Long => body(&mut rng, shared.clone(), LONG_WORDS),
            Kind::OutOfYears => {
                year = if rng.gen_bool(0.5) { 2015 } else { 2023 };
                body(&mut rng, shared.clone(), NORMAL_WORDS)
            }
            Kind::Dissimilar(g) => {
                let mut tokens = shared.clone();
                for w in group_vocab(g) {
                    tokens.extend(std::iter::repeat(w).take(GROUP_REPEATS));
                }
                body(&mut rng, tokens, NORMAL_WORDS)
            }
            Kind::Kept => body(&mut rng, shared.clone(), NORMAL_WORDS),
        };
        let rel = format!("filings/f{i:04}.txt");
        std::fs::write(dir.join(&rel), text).expect("write filing");
        manifest.push_str(&format!("f{i:04},{year},{rel}\n"));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).expect("write manifest");
    path
}

/// Scores away from the clamp point `-m` of the negative weights.
fn score(rng: &mut ChaCha8Rng, m: f64) -> f64 {
    loop {
        let s: f64 = rng.gen_range(-0.99..0.99);
        if (s + m).abs() > 1e-3 {
            return s;
        }
    }
}

/// Largest normwise relative difference `|a - n| / max(|a|, |n|)` between
/// the analytic gradient `a` and central differences `n` over `batches`
/// random batches. Componentwise ratios are meaningless for entries near the
/// differencing noise floor (about `1e-16 * L / h`).
pub fn worst_gradient_error(batches: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..batches {
        let p = CircleLossParams::new(rng.gen_range(1.0..32.0), rng.gen_range(0.05..0.4)).unwrap();
        let pos: Vec<f64> = (0..rng.gen_range(1..8)).map(|_| score(&mut rng, p.margin)).collect();
        let neg: Vec<f64> = (0..rng.gen_range(1..8)).map(|_| score(&mut rng, p.margin)).collect();
        let grad = circle_loss_grad(&SimilarityBatch::new(pos.clone(), neg.clone()).unwrap(), &p).unwrap();
        let loss = |pos: &[f64], neg: &[f64]| {
            circle_loss(&SimilarityBatch::from_scores(pos.to_vec(), neg.to_vec()).unwrap(), &p).unwrap()
        };
        let mut numeric = Vec::new();
        for i in 0..pos.len() {
            let (mut up, mut down) = (pos.clone(), pos.clone());
            up[i] += h;
            down[i] -= h;
            numeric.push((loss(&up, &neg) - loss(&down, &neg)) / (2.0 * h));
        }
        for j in 0..neg.len() {
            let (mut up, mut down) = (neg.clone(), neg.clone());
            up[j] += h;
            down[j] -= h;
            numeric.push((loss(&pos, &up) - loss(&pos, &down)) / (2.0 * h));
        }
        let analytic: Vec<f64> = grad.positives.iter().chain(&grad.negatives).copied().collect();
        let l2 = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
        let diff = l2(&mut analytic.iter().zip(&numeric).map(|(a, n)| a - n));
        let scale = l2(&mut analytic.iter().copied()).max(l2(&mut numeric.iter().copied()));
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

/// Ten rows in three topics plus two noise rows, with values worked out by
/// hand. Members are unit-normalized before averaging, so rows are chosen
/// to normalize to axis vectors:
///
/// topic 0: e1, e2            centroid (1/2, 1/2, 0)   member cosines 1/sqrt2, 1/sqrt2
/// topic 1: e3, e3, e3        centroid (0, 0, 1)       member cosines 1, 1, 1
/// topic 2: e1, e3, e1        centroid (2/3, 0, 1/3)   member cosines 2/sqrt5, 1/sqrt5, 2/sqrt5
///
/// Centroid cosines: (0,1) = 0, (0,2) = 2/sqrt10, (1,2) = 1/sqrt5.
pub struct HandFixture {
    pub embeddings: fintopic::vectors::EmbeddingMatrix,
    pub labels: Vec<i64>,
    pub centroids: [[f64; 3]; 3],
    pub member_cosines: [Vec<f64>; 3],
    pub intratopic: [f64; 3],
    pub centroid_cosines: [[f64; 3]; 3],
    pub intertopic: f64,
}

pub fn hand_fixture() -> HandFixture {
    let rows: Vec<Vec<f32>> = vec![
        vec![2.0, 0.0, 0.0],
        vec![0.0, 3.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![0.0, 0.0, 5.0],
        vec![0.0, 0.0, 0.5],
        vec![3.0, 0.0, 0.0],
        vec![0.0, 0.0, 2.0],
        vec![1.0, 0.0, 0.0],
        vec![7.0, 7.0, 7.0],
        vec![-1.0, 2.0, 0.0],
    ];
    let labels = vec![0, 0, 1, 1, 1, 2, 2, 2, -1, -1];
    let keys = (0..rows.len()).map(|i| format!("h{i}")).collect();
    let (r2, r5, r10) = (2f64.sqrt(), 5f64.sqrt(), 10f64.sqrt());
    let member_cosines = [vec![1.0 / r2, 1.0 / r2], vec![1.0, 1.0, 1.0], vec![2.0 / r5, 1.0 / r5, 2.0 / r5]];
    let intratopic = [1.0 / r2, 1.0, 5.0 / (3.0 * r5)];
    let c01 = 0.0;
    let c02 = 2.0 / r10;
    let c12 = 1.0 / r5;
    HandFixture {
        embeddings: fintopic::vectors::EmbeddingMatrix::from_rows(keys, &rows).expect("finite rows"),
        labels,
        centroids: [[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [2.0 / 3.0, 0.0, 1.0 / 3.0]],
        member_cosines,
        intratopic,
        centroid_cosines: [[1.0, c01, c02], [c01, 1.0, c12], [c02, c12, 1.0]],
        intertopic: (c01 + c02 + c12) / 3.0,
    }
}

/// Checks every step of the similarity procedures against the hand fixture:
/// member-to-centroid cosines, centroids, the centroid cosine matrix and
/// the upper-triangle mean. Returns the first discrepancy.
pub fn check_hand_fixture(tol: f64) -> Result<(), String> {
    use fintopic::metrics::{intertopic_similarity, intratopic_similarity, topic_centroids};
    use fintopic::vectors::{cosine, norm};
    let f = hand_fixture();
    let close = |what: &str, got: f64, want: f64| {
        if (got - want).abs() <= tol {
            Ok(())
        } else {
            Err(format!("{what}: got {got}, want {want}"))
        }
    };
    let centroids = topic_centroids(&f.embeddings, &f.labels).map_err(|e| e.to_string())?;
    if centroids.keys().copied().collect::<Vec<_>>() != [0, 1, 2] {
        return Err(format!("topic ids {:?}", centroids.keys().collect::<Vec<_>>()));
    }
    for (t, c) in centroids.values().enumerate() {
        for k in 0..3 {
            close(&format!("centroid {t}[{k}]"), c[k], f.centroids[t][k])?;
        }
    }
    for t in 0..3 {
        let members: Vec<usize> = (0..f.labels.len()).filter(|&i| f.labels[i] == t as i64).collect();
        for (m, &i) in members.iter().enumerate() {
            let row = f.embeddings.row_f64(i);
            let unit: Vec<f64> = row.iter().map(|x| x / norm(&row)).collect();
            let got = cosine(&unit, &centroids[&(t as i64)]).ok_or("zero vector")?;
            close(&format!("member {i} cosine"), got, f.member_cosines[t][m])?;
        }
        for u in 0..3 {
            let got = cosine(&centroids[&(t as i64)], &centroids[&(u as i64)]).ok_or("zero centroid")?;
            close(&format!("centroid cosine ({t},{u})"), got, f.centroid_cosines[t][u])?;
        }
    }
    let intra = intratopic_similarity(&f.embeddings, &f.labels).map_err(|e| e.to_string())?;
    for (t, &(_, s)) in intra.per_topic.iter().enumerate() {
        close(&format!("intratopic {t}"), s, f.intratopic[t])?;
    }
    close("intratopic mean", intra.mean, f.intratopic.iter().sum::<f64>() / 3.0)?;
    let inter = intertopic_similarity(&f.embeddings, &f.labels).map_err(|e| e.to_string())?;
    close("intertopic", inter, f.intertopic)
}
