//! Pre-norm attention decoder over seed features.
//!
//! Per layer, with `w` the seed features and `E` the encoder proxies:
//!
//! ```text
//! w = w + SelfAttn(LN_s(w))
//! w = w + CrossAttn(LN_c(w), LN_m(E))
//! w = w + FFN(LN_f(w))
//! ```
//!
//! Attention is multi-head scaled dot-product. With the geometric bias
//! enabled, each query adds a learned per-head bias
//! `MLP(pos_query - pos_key)` to the logits of its `k_attn` nearest keys.

use rayon::prelude::*;

use crate::cloud::{sub, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::knn_with_dist2;
use crate::nn::tensor::{softmax_in_place, Tensor};
use crate::nn::{dense, mlp2, norm, points_tensor, ProxySet, WeightStore};

/// Additive logit bias: for query `i`, `(key index, per-head bias)` pairs.
pub type AttentionBias = Vec<Vec<(usize, Vec<f64>)>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderOptions {
    pub layers: usize,
    pub heads: usize,
    /// `Some(k)` enables the geometric bias on the `k` nearest keys.
    pub geometric_k: Option<usize>,
}

/// Softmax attention probabilities per head: `heads` tensors of
/// `queries x keys`.
pub fn attention_probs(
    q: &Tensor,
    k: &Tensor,
    heads: usize,
    bias: Option<&AttentionBias>,
) -> Result<Vec<Tensor>> {
    let width = q.cols();
    if heads == 0 || width % heads != 0 {
        return Err(Error::invalid(format!(
            "width {width} not divisible by {heads} heads"
        )));
    }
    if k.cols() != width {
        return Err(Error::invalid("query and key widths differ"));
    }
    let dh = width / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (nq, nk) = (q.rows(), k.rows());
    Ok((0..heads)
        .map(|h| {
            let mut p = vec![0.0; nq * nk];
            p.par_chunks_mut(nk).enumerate().for_each(|(i, row)| {
                let qi = &q.row(i)[h * dh..(h + 1) * dh];
                for (j, v) in row.iter_mut().enumerate() {
                    let kj = &k.row(j)[h * dh..(h + 1) * dh];
                    let mut acc = 0.0;
                    for (a, b) in qi.iter().zip(kj) {
                        acc += a * b;
                    }
                    *v = acc * scale;
                }
                if let Some(bias) = bias {
                    for (j, b) in &bias[i] {
                        row[*j] += b[h];
                    }
                }
                softmax_in_place(row);
            });
            Tensor::matrix(nq, nk, p)
        })
        .collect())
}

/// Multi-head attention without projections: head `h` of the output is
/// `probs_h · v[:, h]`.
pub fn attend(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    heads: usize,
    bias: Option<&AttentionBias>,
) -> Result<Tensor> {
    let probs = attention_probs(q, k, heads, bias)?;
    if v.rows() != k.rows() || v.cols() != q.cols() {
        return Err(Error::invalid("value shape does not match keys"));
    }
    let width = v.cols();
    let dh = width / heads;
    let mut out = vec![0.0; q.rows() * width];
    out.par_chunks_mut(width).enumerate().for_each(|(i, o)| {
        for (h, p) in probs.iter().enumerate() {
            for (j, &pij) in p.row(i).iter().enumerate() {
                let vj = &v.row(j)[h * dh..(h + 1) * dh];
                for (a, b) in o[h * dh..(h + 1) * dh].iter_mut().zip(vj) {
                    *a += pij * b;
                }
            }
        }
    });
    Ok(Tensor::matrix(q.rows(), width, out))
}

fn geometric_bias(
    store: &WeightStore,
    prefix: &str,
    query_pos: &[Point3],
    key_pos: &[Point3],
    k: usize,
) -> Result<AttentionBias> {
    let keys = PointCloud::new(key_pos.to_vec())?;
    let nearest = knn_with_dist2(&keys, query_pos, k.min(key_pos.len()))?;
    nearest
        .iter()
        .zip(query_pos)
        .map(|(row, qp)| {
            let rel: Vec<Point3> = row.iter().map(|&(j, _)| sub(qp, &key_pos[j])).collect();
            let b = mlp2(store, &format!("{prefix}.geo"), &points_tensor(&rel))?;
            Ok(row
                .iter()
                .enumerate()
                .map(|(r, &(j, _))| (j, b.row(r).to_vec()))
                .collect())
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn attention_block(
    store: &WeightStore,
    prefix: &str,
    queries: &Tensor,
    memory: &Tensor,
    query_pos: &[Point3],
    key_pos: &[Point3],
    opts: &DecoderOptions,
) -> Result<Tensor> {
    let q = dense(store, &format!("{prefix}.q"), queries)?;
    let k = dense(store, &format!("{prefix}.k"), memory)?;
    let v = dense(store, &format!("{prefix}.v"), memory)?;
    let bias = match opts.geometric_k {
        Some(kk) => Some(geometric_bias(store, prefix, query_pos, key_pos, kk)?),
        None => None,
    };
    let mixed = attend(&q, &k, &v, opts.heads, bias.as_ref())?;
    dense(store, &format!("{prefix}.o"), &mixed)
}

pub fn transformer_decoder(
    seed_features: &Tensor,
    seeds: &[Point3],
    proxies: &ProxySet,
    store: &WeightStore,
    opts: &DecoderOptions,
) -> Result<Tensor> {
    if opts.layers == 0 {
        return Err(Error::invalid("decoder needs at least one layer"));
    }
    if opts.heads == 0 || seed_features.cols() % opts.heads != 0 {
        return Err(Error::invalid(format!(
            "hidden width {} not divisible by {} attention heads",
            seed_features.cols(),
            opts.heads
        )));
    }
    let mut w = seed_features.clone();
    for t in 0..opts.layers {
        let p = format!("decoder.{t}");
        let h = norm(store, &format!("{p}.norm_self"), &w)?;
        w = w.add(&attention_block(
            store,
            &format!("{p}.self_attn"),
            &h,
            &h,
            seeds,
            seeds,
            opts,
        )?);

        let h = norm(store, &format!("{p}.norm_cross"), &w)?;
        let mem = norm(store, &format!("{p}.norm_mem"), &proxies.features)?;
        w = w.add(&attention_block(
            store,
            &format!("{p}.cross_attn"),
            &h,
            &mem,
            seeds,
            &proxies.centers,
            opts,
        )?);

        let h = norm(store, &format!("{p}.norm_ffn"), &w)?;
        w = w.add(&mlp2(store, &format!("{p}.ffn"), &h)?);
    }
    Ok(w)
}
