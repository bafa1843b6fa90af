//! Brute-force reference implementations, written from the formulas and
//! sharing no code with the engine.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Okapi BM25 with IDF ln((N - df + 0.5) / (df + 0.5)) floored at zero.
/// Every query token occurrence contributes.
pub fn bm25(docs: &[&str], query: &str, k1: f64, b: f64) -> Vec<f64> {
    let bags: Vec<Vec<String>> = docs.iter().map(|d| tokens(d)).collect();
    let n = bags.len() as f64;
    let avgdl = bags.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut df: HashMap<&str, f64> = HashMap::new();
    for bag in &bags {
        let mut uniq: Vec<&str> = bag.iter().map(String::as_str).collect();
        uniq.sort_unstable();
        uniq.dedup();
        for t in uniq {
            *df.entry(t).or_default() += 1.0;
        }
    }
    bags.iter()
        .map(|bag| {
            let dl = bag.len() as f64;
            tokens(query)
                .iter()
                .map(|q| {
                    let f = bag.iter().filter(|t| *t == q).count() as f64;
                    if f == 0.0 {
                        return 0.0;
                    }
                    let d = df.get(q.as_str()).copied().unwrap_or(0.0);
                    let idf = ((n - d + 0.5) / (d + 0.5)).ln().max(0.0);
                    idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * dl / avgdl))
                })
                .sum()
        })
        .collect()
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
}

/// Indices of the `p` best scores, best first, ties by id ascending.
fn top(scores: &[f64], ids: &[String], p: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(ids[i].cmp(&ids[j])));
    order.truncate(p);
    order
}

pub fn ranking(scores: &[f64], ids: &[String], p: usize) -> Vec<String> {
    top(scores, ids, p).into_iter().map(|i| ids[i].clone()).collect()
}

/// Pool = top-p dense plus top-p sparse; min-max each component over the
/// pool (0.5 when constant); fuse linearly; rank; keep k.
pub fn fused(ids: &[String], dense: &[f64], sparse: &[f64], alpha: f64, k: usize, p: usize) -> Vec<String> {
    let mut pool = top(dense, ids, p);
    for i in top(sparse, ids, p) {
        if !pool.contains(&i) {
            pool.push(i);
        }
    }
    let norm = |s: &[f64]| -> Vec<f64> {
        let lo = pool.iter().map(|&i| s[i]).fold(f64::INFINITY, f64::min);
        let hi = pool.iter().map(|&i| s[i]).fold(f64::NEG_INFINITY, f64::max);
        pool.iter()
            .map(|&i| if hi > lo { (s[i] - lo) / (hi - lo) } else { 0.5 })
            .collect()
    };
    let (nd, ns) = (norm(dense), norm(sparse));
    let mut scored: Vec<(f64, &String)> = pool
        .iter()
        .enumerate()
        .map(|(j, &i)| ((alpha * nd[j] + (1.0 - alpha) * ns[j]).clamp(0.0, 1.0), &ids[i]))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.clone()).collect()
}

/// Random unit vector, normalized in f64 and rounded to f32.
pub fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f32> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

const WORDS: &[&str] = &[
    "river", "lamp", "town", "bridge", "wool", "market", "inventor", "engine", "north", "valley", "stone", "harbor",
    "mill", "church", "forest", "salt", "canal", "tower", "glass", "copper",
];

/// `n` documents of 5 to 24 words drawn from a small vocabulary.
pub fn random_docs(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(5..25);
            (0..len)
                .map(|_| WORDS[rng.random_range(0..WORDS.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

pub fn random_query(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..4);
    (0..len)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}
