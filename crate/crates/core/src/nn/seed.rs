//! Seed generation: predict an excess of candidate points from the pooled
//! proxy features and flattened centres, refine the first third with a
//! residual MLP, score every candidate and keep the best `I`.

use crate::cloud::Point3;
use crate::error::{Error, Result};
use crate::nn::tensor::{relu, sigmoid, silu, Tensor};
use crate::nn::{dense, mlp2, points_tensor, ProxySet, WeightStore};

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutput {
    /// `I'` predicted candidates.
    pub candidates: Vec<Point3>,
    /// Sigmoid score per candidate.
    pub scores: Vec<f64>,
    /// Indices into `candidates` of the selected seeds, best first.
    pub selected: Vec<usize>,
    /// `I` selected seed points.
    pub seeds: Vec<Point3>,
    /// `I x D_h` seed features.
    pub features: Tensor,
}

/// Indices of the `k` highest scores, descending; equal scores keep the
/// lower index first.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::SampleTooLarge {
            requested: k,
            available: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// `[pooled | row]` for every row of `rows`.
fn with_pooled(pooled: &[f64], rows: &Tensor) -> Tensor {
    let p = Tensor::matrix(rows.rows(), pooled.len(), pooled.repeat(rows.rows()));
    Tensor::hcat(&[&p, rows])
}

pub fn seed_generator(
    proxies: &ProxySet,
    store: &WeightStore,
    candidates: usize,
    seeds: usize,
    residual: usize,
) -> Result<SeedOutput> {
    if seeds > candidates {
        return Err(Error::invalid(format!(
            "seeds {seeds} exceed candidates {candidates}"
        )));
    }
    if proxies.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pooled = proxies.features.max_rows();
    let flat: Vec<f64> = proxies.centers.iter().flatten().copied().collect();
    let input = Tensor::matrix(
        1,
        pooled.len() + flat.len(),
        [pooled.clone(), flat].concat(),
    );
    let raw = mlp2(store, "seed.mlp", &input)?;
    if raw.len() != 3 * candidates {
        return Err(Error::tensor(
            "seed.mlp.1.weight",
            format!("produces {} values, expected {}", raw.len(), 3 * candidates),
        ));
    }
    let mut cand = Tensor::matrix(candidates, 3, raw.into_data());

    let refine = residual.min(candidates);
    if refine > 0 {
        let head = Tensor::matrix(refine, 3, cand.data()[..3 * refine].to_vec());
        let delta = mlp2(store, "seed.residual", &with_pooled(&pooled, &head))?;
        for (v, d) in cand.data_mut()[..3 * refine].iter_mut().zip(delta.data()) {
            *v += d;
        }
    }

    let scores: Vec<f64> = mlp2(store, "seed.score", &with_pooled(&pooled, &cand))?
        .data()
        .iter()
        .map(|&v| sigmoid(v))
        .collect();
    let selected = top_k(&scores, seeds)?;
    let candidates: Vec<Point3> = (0..candidates)
        .map(|i| [cand.row(i)[0], cand.row(i)[1], cand.row(i)[2]])
        .collect();
    let seed_points: Vec<Point3> = selected.iter().map(|&i| candidates[i]).collect();

    let embed = dense(store, "seed.embed", &points_tensor(&seed_points))?.map(silu);
    let h = dense(store, "seed.feat.0", &with_pooled(&pooled, &embed))?.map(relu);
    let features = dense(store, "seed.feat.1", &h)?;

    Ok(SeedOutput {
        candidates,
        scores,
        selected,
        seeds: seed_points,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;

    #[test]
    fn top_k_orders_by_score_then_index() {
        let s = [0.9, 0.1, 0.8, 0.8, 0.2, 0.05];
        assert_eq!(top_k(&s, 4).unwrap(), vec![0, 2, 3, 4]);
        assert_eq!(top_k(&s, 6).unwrap(), vec![0, 2, 3, 4, 1, 5]);
        assert!(top_k(&s, 7).is_err());
    }

    fn tiny() -> (WeightStore, ProxySet) {
        // D = 1, G = 1, I' = 2, I = 1.
        let m = |r, c, d: &[f64]| Tensor::matrix(r, c, d.to_vec());
        let mut w = WeightStore::new();
        // mlp.0: [pooled, cx, cy, cz] -> 1, weights (1, 1, 0, 0), bias 0
        w.insert("seed.mlp.0.weight", m(1, 4, &[1.0, 1.0, 0.0, 0.0]));
        w.insert("seed.mlp.0.bias", m(1, 1, &[0.0]));
        // mlp.1: h -> 6 candidate coordinates
        w.insert(
            "seed.mlp.1.weight",
            m(6, 1, &[1.0, 0.0, 0.0, -1.0, 2.0, 0.5]),
        );
        w.insert("seed.mlp.1.bias", m(1, 6, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]));
        // residual: relu(pooled + x) -> adds (h, 0, 0)
        w.insert("seed.residual.0.weight", m(1, 4, &[1.0, 1.0, 0.0, 0.0]));
        w.insert("seed.residual.0.bias", m(1, 1, &[0.0]));
        w.insert("seed.residual.1.weight", m(3, 1, &[1.0, 0.0, 0.0]));
        w.insert("seed.residual.1.bias", m(1, 3, &[0.0, 0.0, 0.0]));
        // score: relu(y) -> logit
        w.insert("seed.score.0.weight", m(1, 4, &[0.0, 0.0, 1.0, 0.0]));
        w.insert("seed.score.0.bias", m(1, 1, &[0.0]));
        w.insert("seed.score.1.weight", m(1, 1, &[1.0]));
        w.insert("seed.score.1.bias", m(1, 1, &[0.0]));
        w.insert("seed.embed.weight", m(1, 3, &[1.0, 0.0, 0.0]));
        w.insert("seed.embed.bias", m(1, 1, &[0.0]));
        w.insert("seed.feat.0.weight", m(1, 2, &[0.0, 1.0]));
        w.insert("seed.feat.0.bias", m(1, 1, &[0.0]));
        w.insert("seed.feat.1.weight", m(1, 1, &[2.0]));
        w.insert("seed.feat.1.bias", m(1, 1, &[0.0]));
        let p = ProxySet::new(vec![[0.5, 9.0, 9.0]], m(1, 1, &[1.5])).unwrap();
        (w, p)
    }

    #[test]
    fn tiny_weights_by_hand() {
        // h = relu(1.5 + 0.5) = 2
        // raw candidates: (2, 0, 1) and (-2, 4, 1)
        // residual on the first only: relu(1.5 + 2) = 3.5 -> (5.5, 0, 1)
        // scores: sigmoid(relu(y)) -> sigmoid(0) = 0.5, sigmoid(4)
        // selected: candidate 1; feature = 2 * relu(silu(-2))= 0
        let (w, p) = tiny();
        let out = seed_generator(&p, &w, 2, 1, 1).unwrap();
        assert_eq!(out.candidates, vec![[5.5, 0.0, 1.0], [-2.0, 4.0, 1.0]]);
        assert_eq!(out.scores[0], 0.5);
        assert!((out.scores[1] - 1.0 / (1.0 + (-4f64).exp())).abs() < 1e-15);
        assert_eq!(out.selected, vec![1]);
        assert_eq!(out.seeds, vec![[-2.0, 4.0, 1.0]]);
        assert_eq!(out.features.data(), &[0.0]);

        let both = seed_generator(&p, &w, 2, 2, 0).unwrap();
        assert_eq!(both.candidates[0], [2.0, 0.0, 1.0]);
        assert_eq!(both.selected, vec![1, 0]);
        // feature of seed (2,0,1): embed silu(2), feat 2 * silu(2)
        let expect = 2.0 * 2.0 / (1.0 + (-2f64).exp());
        assert!((both.features.row(1)[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn too_many_seeds_rejected() {
        let (w, p) = tiny();
        assert!(seed_generator(&p, &w, 2, 3, 0).is_err());
    }

    #[test]
    fn desk_shapes() {
        let cfg = ModelConfig::default();
        let w = WeightStore::init(&cfg, 1).unwrap();
        let p = ProxySet::new(
            vec![[0.1, 0.2, 0.3]; cfg.groups],
            Tensor::filled(&[cfg.groups, cfg.hidden], 0.2),
        )
        .unwrap();
        let out =
            seed_generator(&p, &w, cfg.candidates, cfg.seeds, cfg.residual_candidates()).unwrap();
        assert_eq!(out.candidates.len(), cfg.candidates);
        assert_eq!(out.seeds.len(), cfg.seeds);
        assert_eq!(out.features.shape(), &[cfg.seeds, cfg.hidden]);

        let all = seed_generator(&p, &w, cfg.candidates, cfg.candidates, 0).unwrap();
        for pair in all.selected.windows(2) {
            assert!(all.scores[pair[0]] >= all.scores[pair[1]]);
        }
    }
}
