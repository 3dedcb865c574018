//! Diagonal selective state-space scan.
//!
//! Per channel `d` and state `s`, with zero-order-hold discretisation:
//!
//! ```text
//! a_t = exp(delta[t,d] * A[d,s])
//! h_t = a_t * h_{t-1} + delta[t,d] * B[t,s] * x[t,d],   h_0 = 0
//! y[t,d] = sum_s C[t,s] * h_t + d_skip[d] * x[t,d]
//! ```
//!
//! [`ScanMode::Sequential`] is the plain recurrence above and is the
//! reference. [`ScanMode::Parallel`] evaluates the same recurrence as an
//! associative scan over `(a, b)` pairs with
//! `(a1, b1) ∘ (a2, b2) = (a1 a2, a2 b1 + b2)`: each chunk of
//! [`SCAN_CHUNK`] steps is scanned independently, chunk carries are
//! combined in order, and the carries are folded back into every step.
//! Chunk boundaries are fixed, so the result does not depend on the thread
//! count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::tensor::{linear, softplus, Tensor};
use crate::nn::weights::WeightStore;
use crate::rng::SeededRng;

pub const SCAN_CHUNK: usize = 64;

/// Lower bound applied to generated step sizes so `delta > 0` survives
/// softplus underflow.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Sequential,
    Parallel,
}

impl std::str::FromStr for ScanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(ScanMode::Sequential),
            "parallel" => Ok(ScanMode::Parallel),
            other => Err(Error::invalid(format!("unknown scan mode `{other}`"))),
        }
    }
}

/// Fully materialised scan inputs for a sequence of length `L` with `D`
/// channels and `S` states.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmParams {
    /// `D x S`, all negative.
    pub a: Tensor,
    /// `L x D`, all positive.
    pub delta: Tensor,
    /// `L x S`.
    pub b: Tensor,
    /// `L x S`.
    pub c: Tensor,
    /// `D`.
    pub d_skip: Vec<f64>,
}

impl SsmParams {
    pub fn len(&self) -> usize {
        self.delta.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.a.rows()
    }

    pub fn states(&self) -> usize {
        self.a.cols()
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        let (l, d, s) = (x.rows(), self.channels(), self.states());
        if l == 0 {
            return Err(Error::EmptyInput);
        }
        let shapes = [
            ("x", x.shape(), [l, d]),
            ("delta", self.delta.shape(), [l, d]),
            ("b", self.b.shape(), [l, s]),
            ("c", self.c.shape(), [l, s]),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::invalid(format!(
                    "scan input `{name}` has shape {got:?}, expected {want:?}"
                )));
            }
        }
        if self.d_skip.len() != d {
            return Err(Error::invalid("scan skip length != channels"));
        }
        if let Some(v) = self.a.data().iter().find(|v| !(**v < 0.0)) {
            return Err(Error::invalid(format!(
                "state matrix entry {v} is not negative"
            )));
        }
        if let Some(v) = self.delta.data().iter().find(|v| !(**v > 0.0)) {
            return Err(Error::invalid(format!("step size {v} is not positive")));
        }
        Ok(())
    }

    /// Random well-posed parameters and input, for benchmarks and tests.
    pub fn random(len: usize, channels: usize, states: usize, seed: u64) -> (Self, Tensor) {
        let mut rng = SeededRng::new(seed);
        let a = (0..channels * states)
            .map(|_| -rng.uniform_in(0.5f64.ln(), 4f64.ln()).exp())
            .collect();
        let delta = (0..len * channels)
            .map(|_| rng.uniform_in(1e-3f64.ln(), 1e-1f64.ln()).exp())
            .collect();
        let b = (0..len * states).map(|_| rng.normal()).collect();
        let c = (0..len * states).map(|_| rng.normal()).collect();
        let d_skip = (0..channels).map(|_| rng.normal()).collect();
        let x = (0..len * channels).map(|_| rng.normal()).collect();
        (
            SsmParams {
                a: Tensor::matrix(channels, states, a),
                delta: Tensor::matrix(len, channels, delta),
                b: Tensor::matrix(len, states, b),
                c: Tensor::matrix(len, states, c),
                d_skip,
            },
            Tensor::matrix(len, channels, x),
        )
    }
}

pub fn ssm_scan(params: &SsmParams, x: &Tensor, mode: ScanMode) -> Result<Tensor> {
    params.check(x)?;
    let (l, d) = (x.rows(), params.channels());
    let columns: Vec<Vec<f64>> = match mode {
        ScanMode::Sequential => (0..d)
            .map(|ch| scan_channel_sequential(params, x, ch))
            .collect(),
        ScanMode::Parallel => (0..d)
            .into_par_iter()
            .map(|ch| scan_channel_parallel(params, x, ch))
            .collect(),
    };
    let mut out = vec![0.0; l * d];
    for (ch, col) in columns.iter().enumerate() {
        for (t, v) in col.iter().enumerate() {
            out[t * d + ch] = *v;
        }
    }
    Ok(Tensor::matrix(l, d, out))
}

fn scan_channel_sequential(p: &SsmParams, x: &Tensor, ch: usize) -> Vec<f64> {
    let (l, s) = (x.rows(), p.states());
    let a = p.a.row(ch);
    let mut h = vec![0.0; s];
    let mut y = Vec::with_capacity(l);
    for t in 0..l {
        let dt = p.delta.row(t)[ch];
        let xt = x.row(t)[ch];
        let (bt, ct) = (p.b.row(t), p.c.row(t));
        let mut acc = 0.0;
        for k in 0..s {
            h[k] = (dt * a[k]).exp() * h[k] + dt * bt[k] * xt;
            acc += ct[k] * h[k];
        }
        y.push(acc + p.d_skip[ch] * xt);
    }
    y
}

fn scan_channel_parallel(p: &SsmParams, x: &Tensor, ch: usize) -> Vec<f64> {
    let (l, s) = (x.rows(), p.states());
    let a = p.a.row(ch);

    // Per step and state: the pair (a_t, b_t), scanned within each chunk.
    // `decay` holds the running product of a within the chunk, `local` the
    // chunk-local state.
    let mut decay = vec![0.0; l * s];
    let mut local = vec![0.0; l * s];
    decay
        .par_chunks_mut(SCAN_CHUNK * s)
        .zip(local.par_chunks_mut(SCAN_CHUNK * s))
        .enumerate()
        .for_each(|(chunk, (dec, loc))| {
            let start = chunk * SCAN_CHUNK;
            let mut acc_a = vec![1.0; s];
            let mut acc_b = vec![0.0; s];
            for (i, t) in (start..start + dec.len() / s).enumerate() {
                let dt = p.delta.row(t)[ch];
                let xt = x.row(t)[ch];
                let bt = p.b.row(t);
                for k in 0..s {
                    let at = (dt * a[k]).exp();
                    acc_a[k] *= at;
                    acc_b[k] = at * acc_b[k] + dt * bt[k] * xt;
                    dec[i * s + k] = acc_a[k];
                    loc[i * s + k] = acc_b[k];
                }
            }
        });

    // Carry into each chunk: composition of all earlier chunk totals.
    let chunks = l.div_ceil(SCAN_CHUNK);
    let mut carries = vec![vec![0.0; s]; chunks];
    for c in 1..chunks {
        let last = (c * SCAN_CHUNK - 1) * s;
        let prev = carries[c - 1].clone();
        for k in 0..s {
            carries[c][k] = decay[last + k] * prev[k] + local[last + k];
        }
    }

    let mut y = vec![0.0; l];
    y.par_chunks_mut(SCAN_CHUNK)
        .enumerate()
        .for_each(|(chunk, out)| {
            let carry = &carries[chunk];
            for (i, v) in out.iter_mut().enumerate() {
                let t = chunk * SCAN_CHUNK + i;
                let ct = p.c.row(t);
                let mut acc = 0.0;
                for k in 0..s {
                    let h = local[t * s + k] + decay[t * s + k] * carry[k];
                    acc += ct[k] * h;
                }
                *v = acc + p.d_skip[ch] * x.row(t)[ch];
            }
        });
    y
}

/// Largest elementwise `|a - b| / max(|a|, |b|)` (0 where both are 0).
pub fn max_relative_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let m = x.abs().max(y.abs());
            if m == 0.0 {
                0.0
            } else {
                (x - y).abs() / m
            }
        })
        .fold(0.0, f64::max)
}

/// Learned projections that turn an input sequence into [`SsmParams`].
#[derive(Debug, Clone)]
pub struct SsmWeights<'a> {
    a_log: &'a Tensor,
    delta_w: &'a Tensor,
    delta_b: &'a Tensor,
    b_proj: &'a Tensor,
    c_proj: &'a Tensor,
    d_skip: &'a Tensor,
}

impl<'a> SsmWeights<'a> {
    pub fn load(store: &'a WeightStore, prefix: &str) -> Result<Self> {
        Ok(Self {
            a_log: store.get(&format!("{prefix}.a_log"))?,
            delta_w: store.get(&format!("{prefix}.delta.weight"))?,
            delta_b: store.get(&format!("{prefix}.delta.bias"))?,
            b_proj: store.get(&format!("{prefix}.b_proj.weight"))?,
            c_proj: store.get(&format!("{prefix}.c_proj.weight"))?,
            d_skip: store.get(&format!("{prefix}.d_skip"))?,
        })
    }

    /// `A = -exp(a_log)`, `delta = max(softplus(x W + b), MIN_STEP)`,
    /// `B = x W_B`, `C = x W_C`.
    pub fn params(&self, x: &Tensor) -> SsmParams {
        let states = self.a_log.cols();
        let no_bias = Tensor::zeros(&[states]);
        SsmParams {
            a: self.a_log.map(|v| -v.exp()),
            delta: linear(x, self.delta_w, self.delta_b).map(|v| softplus(v).max(MIN_STEP)),
            b: linear(x, self.b_proj, &no_bias),
            c: linear(x, self.c_proj, &no_bias),
            d_skip: self.d_skip.data().to_vec(),
        }
    }
}

/// Forward scan plus a scan over the reversed sequence (re-reversed),
/// averaged.
pub fn bi_ssm(fwd: &SsmWeights, bwd: &SsmWeights, x: &Tensor, mode: ScanMode) -> Result<Tensor> {
    let forward = ssm_scan(&fwd.params(x), x, mode)?;
    let rev = x.reverse_rows();
    let backward = ssm_scan(&bwd.params(&rev), &rev, mode)?.reverse_rows();
    Ok(forward.add(&backward).map(|v| 0.5 * v))
}
