//! Bidirectional LSTM encoder, additive attention, LSTM decoder; forward
//! pass and backpropagation through time.
//!
//! Shapes (`d` = hidden size, `e` = embedding size):
//! - encoder LSTMs read `e`, keep `d`; annotations are `[fwd; bwd]` (`2d`)
//! - decoder state starts at `tanh(W_init · mean(H) + b_init)`
//! - attention scores `vᵀ tanh(W_a s_{t-1} + U_a h_j)`
//! - decoder LSTM reads `[emb(y_{t-1}); ctx_t]` (`e + 2d`)
//! - output logits `W_out [s_t; ctx_t] + b_out`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{axpy, dot, log_softmax, sigmoid, Tensor};
use super::NmtError;
use crate::text::{BOS, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<(), NmtError> {
        if self.src_vocab < 5 || self.tgt_vocab < 5 {
            return Err(NmtError::InvalidConfig("vocabularies need at least one non-reserved token".into()));
        }
        if self.embed == 0 || self.hidden == 0 {
            return Err(NmtError::InvalidConfig("embedding and hidden sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Parameter tensors in a fixed order, addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub src_emb: Tensor,
    pub tgt_emb: Tensor,
    pub enc_fw_w: Tensor,
    pub enc_fw_b: Tensor,
    pub enc_bw_w: Tensor,
    pub enc_bw_b: Tensor,
    pub init_w: Tensor,
    pub init_b: Tensor,
    pub att_w: Tensor,
    pub att_u: Tensor,
    pub att_v: Tensor,
    pub dec_w: Tensor,
    pub dec_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

pub const PARAM_NAMES: [&str; 15] = [
    "src_emb", "tgt_emb", "enc_fw_w", "enc_fw_b", "enc_bw_w", "enc_bw_b", "init_w", "init_b", "att_w", "att_u",
    "att_v", "dec_w", "dec_b", "out_w", "out_b",
];

impl Params {
    pub fn zeros(d: &ModelDims) -> Self {
        let (e, h, vs, vt) = (d.embed, d.hidden, d.src_vocab, d.tgt_vocab);
        Params {
            src_emb: Tensor::zeros(vs, e),
            tgt_emb: Tensor::zeros(vt, e),
            enc_fw_w: Tensor::zeros(4 * h, e + h),
            enc_fw_b: Tensor::zeros(4 * h, 1),
            enc_bw_w: Tensor::zeros(4 * h, e + h),
            enc_bw_b: Tensor::zeros(4 * h, 1),
            init_w: Tensor::zeros(h, 2 * h),
            init_b: Tensor::zeros(h, 1),
            att_w: Tensor::zeros(h, h),
            att_u: Tensor::zeros(h, 2 * h),
            att_v: Tensor::zeros(h, 1),
            dec_w: Tensor::zeros(4 * h, e + 2 * h + h),
            dec_b: Tensor::zeros(4 * h, 1),
            out_w: Tensor::zeros(vt, 3 * h),
            out_b: Tensor::zeros(vt, 1),
        }
    }

    /// Uniform in `±1/sqrt(fan_in)`, embeddings in `±0.1`, LSTM forget
    /// gate biases at 1, other biases at 0.
    pub fn init(d: &ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::zeros(d);
        let h = d.hidden;
        for (name, t) in p.tensors_mut() {
            if name.ends_with("_b") {
                continue;
            }
            let range = if name.ends_with("_emb") { 0.1 } else { 1.0 / (t.cols() as f64).sqrt() };
            *t = Tensor::uniform(t.rows(), t.cols(), range, &mut rng);
        }
        for b in [&mut p.enc_fw_b, &mut p.enc_bw_b, &mut p.dec_b] {
            b.data_mut()[h..2 * h].fill(1.0);
        }
        p
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor); 15] {
        [
            ("src_emb", &self.src_emb),
            ("tgt_emb", &self.tgt_emb),
            ("enc_fw_w", &self.enc_fw_w),
            ("enc_fw_b", &self.enc_fw_b),
            ("enc_bw_w", &self.enc_bw_w),
            ("enc_bw_b", &self.enc_bw_b),
            ("init_w", &self.init_w),
            ("init_b", &self.init_b),
            ("att_w", &self.att_w),
            ("att_u", &self.att_u),
            ("att_v", &self.att_v),
            ("dec_w", &self.dec_w),
            ("dec_b", &self.dec_b),
            ("out_w", &self.out_w),
            ("out_b", &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 15] {
        [
            ("src_emb", &mut self.src_emb),
            ("tgt_emb", &mut self.tgt_emb),
            ("enc_fw_w", &mut self.enc_fw_w),
            ("enc_fw_b", &mut self.enc_fw_b),
            ("enc_bw_w", &mut self.enc_bw_w),
            ("enc_bw_b", &mut self.enc_bw_b),
            ("init_w", &mut self.init_w),
            ("init_b", &mut self.init_b),
            ("att_w", &mut self.att_w),
            ("att_u", &mut self.att_u),
            ("att_v", &mut self.att_v),
            ("dec_w", &mut self.dec_w),
            ("dec_b", &mut self.dec_b),
            ("out_w", &mut self.out_w),
            ("out_b", &mut self.out_b),
        ]
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            src_vocab: self.src_emb.rows(),
            tgt_vocab: self.tgt_emb.rows(),
            embed: self.src_emb.cols(),
            hidden: self.init_w.rows(),
        }
    }

    /// True when every tensor has the shape implied by [`Params::dims`].
    pub fn shapes_consistent(&self) -> bool {
        let expected = Params::zeros(&self.dims());
        let ok = self
            .tensors()
            .iter()
            .zip(expected.tensors())
            .all(|((_, a), (_, b))| a.shape() == b.shape());
        ok
    }

    pub fn sum_squares(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.sum_squares()).sum()
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= k);
        }
    }
}

struct LstmCache {
    input: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i; f; o; g]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// One LSTM step on `[x; h_prev]`. Returns `(h, c, cache)`.
fn lstm_step(w: &Tensor, b: &Tensor, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, LstmCache) {
    let d = h_prev.len();
    let mut input = Vec::with_capacity(x.len() + d);
    input.extend_from_slice(x);
    input.extend_from_slice(h_prev);
    let mut gates = b.data().to_vec();
    w.matvec_add(&input, &mut gates);
    for (k, g) in gates.iter_mut().enumerate() {
        *g = if k < 3 * d { sigmoid(*g) } else { g.tanh() };
    }
    let mut c = vec![0.0; d];
    let mut h = vec![0.0; d];
    let mut tanh_c = vec![0.0; d];
    for j in 0..d {
        c[j] = gates[d + j] * c_prev[j] + gates[j] * gates[3 * d + j];
        tanh_c[j] = c[j].tanh();
        h[j] = gates[2 * d + j] * tanh_c[j];
    }
    let cache = LstmCache {
        input,
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
    };
    (h, c, cache)
}

/// Backward through one LSTM step. Accumulates weight gradients and returns
/// `(d_input, dc_prev)` where `d_input` covers `[x; h_prev]`.
fn lstm_step_back(
    w: &Tensor,
    cache: &LstmCache,
    dh: &[f64],
    dc: &[f64],
    gw: &mut Tensor,
    gb: &mut Tensor,
) -> (Vec<f64>, Vec<f64>) {
    let d = dh.len();
    let g = &cache.gates;
    let mut dpre = vec![0.0; 4 * d];
    let mut dc_prev = vec![0.0; d];
    for j in 0..d {
        let (i, f, o, gg) = (g[j], g[d + j], g[2 * d + j], g[3 * d + j]);
        let tc = cache.tanh_c[j];
        let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
        dpre[j] = dcj * gg * i * (1.0 - i);
        dpre[d + j] = dcj * cache.c_prev[j] * f * (1.0 - f);
        dpre[2 * d + j] = dh[j] * tc * o * (1.0 - o);
        dpre[3 * d + j] = dcj * i * (1.0 - gg * gg);
        dc_prev[j] = dcj * f;
    }
    gw.outer_add(&dpre, &cache.input);
    axpy(1.0, &dpre, gb.data_mut());
    let mut dinput = vec![0.0; cache.input.len()];
    w.t_matvec_add(&dpre, &mut dinput);
    (dinput, dc_prev)
}

/// Encoder output for one source sentence.
pub struct Encoding {
    /// Annotations `[fwd_j; bwd_j]`.
    pub annotations: Vec<Vec<f64>>,
    /// `U_a h_j` for every position.
    pub keys: Vec<Vec<f64>>,
    pub init_state: Vec<f64>,
    src: Vec<u32>,
    fw: Vec<LstmCache>,
    bw: Vec<LstmCache>,
    mean: Vec<f64>,
}

/// Decoder recurrent state between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

struct StepCache {
    s_prev: Vec<f64>,
    /// `tanh(W_a s + U_a h_j)` per position.
    act: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    y_prev: u32,
    lstm: LstmCache,
    out_in: Vec<f64>,
}

impl Params {
    /// Runs both encoder directions over `src` (which should end in EOS).
    pub fn encode(&self, src: &[u32]) -> Encoding {
        let d = self.init_w.rows();
        let n = src.len();
        let mut fw_h = Vec::with_capacity(n);
        let mut fw = Vec::with_capacity(n);
        let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
        for &tok in src {
            let (nh, nc, cache) = lstm_step(&self.enc_fw_w, &self.enc_fw_b, self.src_emb.row(tok as usize), &h, &c);
            fw_h.push(nh.clone());
            fw.push(cache);
            h = nh;
            c = nc;
        }
        let mut bw_h = vec![Vec::new(); n];
        let mut bw: Vec<LstmCache> = Vec::with_capacity(n);
        let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
        for j in (0..n).rev() {
            let (nh, nc, cache) = lstm_step(&self.enc_bw_w, &self.enc_bw_b, self.src_emb.row(src[j] as usize), &h, &c);
            bw_h[j] = nh.clone();
            bw.push(cache);
            h = nh;
            c = nc;
        }
        bw.reverse();
        let annotations: Vec<Vec<f64>> = fw_h.into_iter().zip(bw_h).map(|(f, b)| [f, b].concat()).collect();
        let keys = annotations.iter().map(|a| self.att_u.matvec(a)).collect();
        let mut mean = vec![0.0; 2 * d];
        for a in &annotations {
            axpy(1.0 / n as f64, a, &mut mean);
        }
        let mut init_state = self.init_b.data().to_vec();
        self.init_w.matvec_add(&mean, &mut init_state);
        init_state.iter_mut().for_each(|v| *v = v.tanh());
        Encoding {
            annotations,
            keys,
            init_state,
            src: src.to_vec(),
            fw,
            bw,
            mean,
        }
    }

    pub fn initial_state(&self, enc: &Encoding) -> DecoderState {
        DecoderState {
            h: enc.init_state.clone(),
            c: vec![0.0; enc.init_state.len()],
        }
    }

    fn step_cached(&self, enc: &Encoding, state: &DecoderState, y_prev: u32) -> (DecoderState, Vec<f64>, StepCache) {
        let query = self.att_w.matvec(&state.h);
        let mut act = Vec::with_capacity(enc.keys.len());
        let mut scores = Vec::with_capacity(enc.keys.len());
        for key in &enc.keys {
            let a: Vec<f64> = key.iter().zip(&query).map(|(k, q)| (k + q).tanh()).collect();
            scores.push(dot(self.att_v.data(), &a));
            act.push(a);
        }
        let alpha: Vec<f64> = log_softmax(&scores).into_iter().map(f64::exp).collect();
        let mut ctx = vec![0.0; enc.annotations[0].len()];
        for (a, h) in alpha.iter().zip(&enc.annotations) {
            axpy(*a, h, &mut ctx);
        }
        let x = [self.tgt_emb.row(y_prev as usize), &ctx[..]].concat();
        let (h, c, lstm) = lstm_step(&self.dec_w, &self.dec_b, &x, &state.h, &state.c);
        let out_in = [&h[..], &ctx[..]].concat();
        let mut logits = self.out_b.data().to_vec();
        self.out_w.matvec_add(&out_in, &mut logits);
        let cache = StepCache {
            s_prev: state.h.clone(),
            act,
            alpha,
            y_prev,
            lstm,
            out_in,
        };
        (DecoderState { h, c }, logits, cache)
    }

    /// One decoder step: new state and log-probabilities over the target
    /// vocabulary after reading `y_prev`.
    pub fn step(&self, enc: &Encoding, state: &DecoderState, y_prev: u32) -> (DecoderState, Vec<f64>) {
        let (next, logits, _) = self.step_cached(enc, state, y_prev);
        (next, log_softmax(&logits))
    }

    /// Sum of log-probabilities of `tgt` followed by EOS.
    pub fn sequence_logprob(&self, src: &[u32], tgt: &[u32]) -> f64 {
        let enc = self.encode(src);
        let mut state = self.initial_state(&enc);
        let mut prev = BOS;
        let mut total = 0.0;
        for &y in tgt.iter().chain(std::iter::once(&EOS)) {
            let (next, lp) = self.step(&enc, &state, prev);
            total += lp[y as usize];
            state = next;
            prev = y;
        }
        total
    }

    /// Label-smoothed cross-entropy summed over the tokens of `tgt` + EOS.
    /// When `grads` is given, gradients of that sum are accumulated into it.
    /// Returns `(loss_sum, token_count)`.
    pub fn pair_loss(&self, src: &[u32], tgt: &[u32], smoothing: f64, grads: Option<&mut Params>) -> (f64, usize) {
        let v = self.out_b.rows();
        let enc = self.encode(src);
        let mut state = self.initial_state(&enc);
        let mut prev = BOS;
        let mut caches = Vec::with_capacity(tgt.len() + 1);
        let mut dlogits_all = Vec::with_capacity(tgt.len() + 1);
        let mut loss = 0.0;
        let uniform = smoothing / v as f64;
        for &y in tgt.iter().chain(std::iter::once(&EOS)) {
            let (next, logits, cache) = self.step_cached(&enc, &state, prev);
            let lp = log_softmax(&logits);
            let mut dl = Vec::with_capacity(v);
            for (k, &l) in lp.iter().enumerate() {
                let q = uniform + if k == y as usize { 1.0 - smoothing } else { 0.0 };
                loss -= q * l;
                dl.push(l.exp() - q);
            }
            dlogits_all.push(dl);
            caches.push(cache);
            state = next;
            prev = y;
        }
        let count = caches.len();
        if let Some(g) = grads {
            self.backward(&enc, &caches, &dlogits_all, g);
        }
        (loss, count)
    }

    fn backward(&self, enc: &Encoding, caches: &[StepCache], dlogits: &[Vec<f64>], g: &mut Params) {
        let d = self.init_w.rows();
        let e = self.tgt_emb.cols();
        let n = enc.annotations.len();
        let mut d_ann = vec![vec![0.0; 2 * d]; n];
        let mut d_keys = vec![vec![0.0; d]; n];
        let mut dh_next = vec![0.0; d];
        let mut dc_next = vec![0.0; d];
        for (cache, dl) in caches.iter().zip(dlogits).rev() {
            g.out_w.outer_add(dl, &cache.out_in);
            axpy(1.0, dl, g.out_b.data_mut());
            let mut d_out_in = vec![0.0; 3 * d];
            self.out_w.t_matvec_add(dl, &mut d_out_in);
            let mut dh = dh_next.clone();
            axpy(1.0, &d_out_in[..d], &mut dh);
            let mut dctx = d_out_in[d..].to_vec();

            let (dinput, dc_prev) = lstm_step_back(&self.dec_w, &cache.lstm, &dh, &dc_next, &mut g.dec_w, &mut g.dec_b);
            axpy(1.0, &dinput[..e], g.tgt_emb.row_mut(cache.y_prev as usize));
            axpy(1.0, &dinput[e..e + 2 * d], &mut dctx);
            let mut ds_prev = dinput[e + 2 * d..].to_vec();

            // Attention.
            let dalpha: Vec<f64> = enc.annotations.iter().map(|h| dot(&dctx, h)).collect();
            let mean_da = dot(&dalpha, &cache.alpha);
            let mut dquery = vec![0.0; d];
            for j in 0..n {
                axpy(cache.alpha[j], &dctx, &mut d_ann[j]);
                let dscore = cache.alpha[j] * (dalpha[j] - mean_da);
                if dscore == 0.0 {
                    continue;
                }
                axpy(dscore, &cache.act[j], g.att_v.data_mut());
                let dpre: Vec<f64> = cache.act[j]
                    .iter()
                    .zip(self.att_v.data())
                    .map(|(a, v)| dscore * v * (1.0 - a * a))
                    .collect();
                axpy(1.0, &dpre, &mut d_keys[j]);
                axpy(1.0, &dpre, &mut dquery);
            }
            g.att_w.outer_add(&dquery, &cache.s_prev);
            self.att_w.t_matvec_add(&dquery, &mut ds_prev);

            dh_next = ds_prev;
            dc_next = dc_prev;
        }

        // Initial state: s0 = tanh(W_init mean + b); c0 = 0.
        let dpre0: Vec<f64> = enc.init_state.iter().zip(&dh_next).map(|(s, g)| g * (1.0 - s * s)).collect();
        g.init_w.outer_add(&dpre0, &enc.mean);
        axpy(1.0, &dpre0, g.init_b.data_mut());
        let mut dmean = vec![0.0; 2 * d];
        self.init_w.t_matvec_add(&dpre0, &mut dmean);

        for j in 0..n {
            g.att_u.outer_add(&d_keys[j], &enc.annotations[j]);
            self.att_u.t_matvec_add(&d_keys[j], &mut d_ann[j]);
            axpy(1.0 / n as f64, &dmean, &mut d_ann[j]);
        }

        // Forward encoder, right to left.
        let mut dh = vec![0.0; d];
        let mut dc = vec![0.0; d];
        for j in (0..n).rev() {
            axpy(1.0, &d_ann[j][..d], &mut dh);
            let (dinput, dc_prev) = lstm_step_back(&self.enc_fw_w, &enc.fw[j], &dh, &dc, &mut g.enc_fw_w, &mut g.enc_fw_b);
            axpy(1.0, &dinput[..e], g.src_emb.row_mut(enc.src[j] as usize));
            dh = dinput[e..].to_vec();
            dc = dc_prev;
        }
        // Backward encoder, left to right.
        let mut dh = vec![0.0; d];
        let mut dc = vec![0.0; d];
        for j in 0..n {
            axpy(1.0, &d_ann[j][d..], &mut dh);
            let (dinput, dc_prev) = lstm_step_back(&self.enc_bw_w, &enc.bw[j], &dh, &dc, &mut g.enc_bw_w, &mut g.enc_bw_b);
            axpy(1.0, &dinput[..e], g.src_emb.row_mut(enc.src[j] as usize));
            dh = dinput[e..].to_vec();
            dc = dc_prev;
        }
    }

    /// Mean label-smoothed loss over a batch; with `grads`, accumulates the
    /// gradient of that mean.
    pub fn batch_loss(&self, batch: &[(&[u32], &[u32])], smoothing: f64, grads: Option<&mut Params>) -> f64 {
        let mut total = 0.0;
        let mut tokens = 0;
        match grads {
            Some(g) => {
                let mut acc = Params::zeros(&self.dims());
                for (s, t) in batch {
                    let (l, n) = self.pair_loss(s, t, smoothing, Some(&mut acc));
                    total += l;
                    tokens += n;
                }
                let k = 1.0 / tokens.max(1) as f64;
                for ((_, dst), (_, src)) in g.tensors_mut().into_iter().zip(acc.tensors()) {
                    axpy(k, src.data(), dst.data_mut());
                }
            }
            None => {
                for (s, t) in batch {
                    let (l, n) = self.pair_loss(s, t, smoothing, None);
                    total += l;
                    tokens += n;
                }
            }
        }
        total / tokens.max(1) as f64
    }
}

/// Relative error `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` per
/// parameter group, with central differences of step `1e-5`. Groups whose
/// gradients are both zero report 0.
pub fn gradient_check(p: &Params, batch: &[(&[u32], &[u32])], smoothing: f64) -> Vec<(&'static str, f64)> {
    let mut analytic = Params::zeros(&p.dims());
    p.batch_loss(batch, smoothing, Some(&mut analytic));
    let h = 1e-5;
    let mut out = Vec::new();
    let mut probe = p.clone();
    for (gi, (name, ga)) in analytic.tensors().into_iter().enumerate() {
        let mut diff = 0.0;
        let mut norm_a = 0.0;
        let mut norm_n = 0.0;
        for k in 0..ga.data().len() {
            let orig = probe.tensors_mut()[gi].1.data()[k];
            probe.tensors_mut()[gi].1.data_mut()[k] = orig + h;
            let up = probe.batch_loss(batch, smoothing, None);
            probe.tensors_mut()[gi].1.data_mut()[k] = orig - h;
            let down = probe.batch_loss(batch, smoothing, None);
            probe.tensors_mut()[gi].1.data_mut()[k] = orig;
            let num = (up - down) / (2.0 * h);
            let ana = ga.data()[k];
            diff += (num - ana) * (num - ana);
            norm_a += ana * ana;
            norm_n += num * num;
        }
        let denom = norm_a.sqrt().max(norm_n.sqrt());
        let rel = if denom < 1e-10 { 0.0 } else { diff.sqrt() / denom };
        out.push((name, rel));
    }
    out
}
