use super::params::{ModelParams, ParamId};
use super::Side;
use crate::dataset::Batch;
use crate::error::{Error, Result};
use crate::nn::{
    dropout_mask, matvec_acc, matvec_t_acc, outer_acc, rnn_backward, rnn_forward, sigmoid,
    CellGrads, RnnTrace, Scalar,
};
use crate::par;
use crate::rng::Rng;

/// Probabilities are clamped to `[CLAMP_EPS, 1 − CLAMP_EPS]` before taking logs.
pub const CLAMP_EPS: f64 = 1e-7;

/// Examples per gradient buffer. Fixed so the reduction order, and therefore
/// the result, does not depend on the number of worker threads.
const GRAD_CHUNK: usize = 16;

/// `[forward state at the last token ; backward state at the first token]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRepresentation<S>(Vec<S>);

impl<S: Scalar> SentenceRepresentation<S> {
    pub fn from_vec(v: Vec<S>) -> Self {
        SentenceRepresentation(v)
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<S> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn forward_half(&self) -> &[S] {
        &self.0[..self.0.len() / 2]
    }

    pub fn backward_half(&self) -> &[S] {
        &self.0[self.0.len() / 2..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No dropout.
    Inference,
    /// Dropout active; example `i` of a batch draws its masks from a stream
    /// derived from `(seed, i)`.
    Training { seed: u64 },
}

#[derive(Debug, Clone)]
struct EncodeTrace<S> {
    ids: Vec<u32>,
    side: Side,
    /// Input dropout masks, `len × d_e`.
    in_mask: Option<Vec<S>>,
    fwd: RnnTrace<S>,
    bwd: RnnTrace<S>,
}

impl<S: Scalar> EncodeTrace<S> {
    fn representation(&self) -> Vec<S> {
        let mut h = self.fwd.final_h().to_vec();
        h.extend_from_slice(self.bwd.final_h());
        h
    }
}

/// Matching-head intermediates for one pair.
#[derive(Debug, Clone)]
pub(crate) struct MatchScratch<S> {
    pub u1: Vec<S>,
    pub u2: Vec<S>,
    pub hidden: Vec<S>,
}

impl<S: Scalar> MatchScratch<S> {
    pub fn new(d_enc: usize, d_f: usize) -> Self {
        MatchScratch {
            u1: vec![S::zero(); d_enc],
            u2: vec![S::zero(); d_enc],
            hidden: vec![S::zero(); d_f],
        }
    }
}

/// Forward record of one sentence pair.
#[derive(Debug, Clone)]
pub struct PairTrace<S> {
    src: EncodeTrace<S>,
    tgt: EncodeTrace<S>,
    hs: Vec<S>,
    ht: Vec<S>,
    out_mask: Option<(Vec<S>, Vec<S>)>,
    head: MatchScratch<S>,
    pub logit: S,
    pub p: S,
}

impl<S: Scalar> PairTrace<S> {
    /// Source and target representations, after output dropout if any.
    pub fn representations(&self) -> (&[S], &[S]) {
        (&self.hs, &self.ht)
    }
}

impl<S: Scalar> ModelParams<S> {
    fn check_ids(&self, ids: &[u32], side: Side) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::InvalidArgument("cannot encode an empty sentence".into()));
        }
        let v = self.vocab_size(side);
        if let Some(bad) = ids.iter().find(|&&i| i as usize >= v) {
            return Err(Error::InvalidArgument(format!(
                "token id {bad} out of range for {side:?} vocabulary of {v}"
            )));
        }
        Ok(())
    }

    fn encode_trace(&self, ids: &[u32], side: Side, rng: Option<&mut Rng>) -> Result<EncodeTrace<S>> {
        self.check_ids(ids, side)?;
        let de = self.config.d_e;
        let emb = self.embedding(side);
        let n = ids.len();
        let mut xs = Vec::with_capacity(n * de);
        for &id in ids {
            xs.extend_from_slice(&emb[id as usize * de..(id as usize + 1) * de]);
        }
        let in_mask = match rng {
            Some(r) if self.config.dropout_in > 0.0 => {
                let m = dropout_mask::<S>(n * de, self.config.dropout_in, r);
                xs.iter_mut().zip(&m).for_each(|(x, &k)| *x *= k);
                Some(m)
            }
            _ => None,
        };
        let mut rev = Vec::with_capacity(n * de);
        for t in (0..n).rev() {
            rev.extend_from_slice(&xs[t * de..(t + 1) * de]);
        }
        let fwd = rnn_forward(&self.forward_cell(), xs)?;
        let bwd = rnn_forward(&self.backward_cell(), rev)?;
        Ok(EncodeTrace {
            ids: ids.to_vec(),
            side,
            in_mask,
            fwd,
            bwd,
        })
    }

    /// Encodes a sentence. Input dropout is applied when `rng` is given.
    pub fn encode(
        &self,
        ids: &[u32],
        side: Side,
        rng: Option<&mut Rng>,
    ) -> Result<SentenceRepresentation<S>> {
        Ok(SentenceRepresentation(self.encode_trace(ids, side, rng)?.representation()))
    }

    /// Logit of the matching head. Shared by training, direct scoring and
    /// block scoring so all three agree bitwise.
    pub(crate) fn match_logit(&self, hs: &[S], ht: &[S], scratch: &mut MatchScratch<S>) -> S {
        for k in 0..hs.len() {
            scratch.u1[k] = hs[k] * ht[k];
            scratch.u2[k] = (hs[k] - ht[k]).abs();
        }
        let h = &mut scratch.hidden;
        h.copy_from_slice(self.value(ParamId::MatchB));
        matvec_acc(h, self.value(ParamId::MatchW1), &scratch.u1);
        matvec_acc(h, self.value(ParamId::MatchW2), &scratch.u2);
        let v = self.value(ParamId::MatchV);
        let mut logit = self.value(ParamId::MatchBOut)[0];
        for k in 0..h.len() {
            h[k] = h[k].tanh();
            logit += v[k] * h[k];
        }
        logit
    }

    fn check_reps(&self, hs: &[S], ht: &[S]) -> Result<()> {
        let d = self.config.d_enc();
        if hs.len() != d || ht.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "representations of size {} and {}, model expects {d}",
                hs.len(),
                ht.len()
            )));
        }
        Ok(())
    }

    /// Probability that the two encoded sentences are translations.
    /// Output dropout is applied to both inputs when `rng` is given.
    pub fn match_probability(
        &self,
        hs: &SentenceRepresentation<S>,
        ht: &SentenceRepresentation<S>,
        rng: Option<&mut Rng>,
    ) -> Result<S> {
        self.check_reps(hs.as_slice(), ht.as_slice())?;
        let mut scratch = MatchScratch::new(self.config.d_enc(), self.config.d_f);
        let logit = match rng {
            Some(r) if self.config.dropout_out > 0.0 => {
                let (a, b) = self.output_dropout(hs.as_slice(), ht.as_slice(), r);
                self.match_logit(&a.0, &b.0, &mut scratch)
            }
            _ => self.match_logit(hs.as_slice(), ht.as_slice(), &mut scratch),
        };
        Ok(sigmoid(logit))
    }

    fn output_dropout(&self, hs: &[S], ht: &[S], r: &mut Rng) -> ((Vec<S>, Vec<S>), (Vec<S>, Vec<S>)) {
        let p = self.config.dropout_out;
        let ms = dropout_mask::<S>(hs.len(), p, r);
        let mt = dropout_mask::<S>(ht.len(), p, r);
        let a = hs.iter().zip(&ms).map(|(&x, &m)| x * m).collect();
        let b = ht.iter().zip(&mt).map(|(&x, &m)| x * m).collect();
        ((a, ms), (b, mt))
    }

    /// Full forward pass for one pair, recording what backward needs.
    pub fn forward_pair(&self, src: &[u32], tgt: &[u32], mut rng: Option<&mut Rng>) -> Result<PairTrace<S>> {
        let st = self.encode_trace(src, Side::Source, rng.as_deref_mut())?;
        let tt = self.encode_trace(tgt, Side::Target, rng.as_deref_mut())?;
        let (mut hs, mut ht) = (st.representation(), tt.representation());
        let out_mask = match rng {
            Some(r) if self.config.dropout_out > 0.0 => {
                let ((a, ms), (b, mt)) = self.output_dropout(&hs, &ht, r);
                hs = a;
                ht = b;
                Some((ms, mt))
            }
            _ => None,
        };
        let mut head = MatchScratch::new(self.config.d_enc(), self.config.d_f);
        let logit = self.match_logit(&hs, &ht, &mut head);
        Ok(PairTrace {
            src: st,
            tgt: tt,
            hs,
            ht,
            out_mask,
            head,
            logit,
            p: sigmoid(logit),
        })
    }

    fn backward_encoder(&self, tr: &EncodeTrace<S>, d_rep: &[S], g: &mut Gradients<S>) {
        let (de, dh) = (self.config.d_e, self.config.d_h);
        let n = tr.ids.len();
        let mut dx_f = vec![S::zero(); n * de];
        let mut dx_b = vec![S::zero(); n * de];
        rnn_backward(&self.forward_cell(), &tr.fwd, &d_rep[..dh], &mut g.fwd.view(), &mut dx_f);
        rnn_backward(&self.backward_cell(), &tr.bwd, &d_rep[dh..], &mut g.bwd.view(), &mut dx_b);
        let rows = match tr.side {
            Side::Source => &mut g.emb_source,
            Side::Target => &mut g.emb_target,
        };
        for t in 0..n {
            let mut dx: Vec<S> = dx_f[t * de..(t + 1) * de]
                .iter()
                .zip(&dx_b[(n - 1 - t) * de..(n - t) * de])
                .map(|(&a, &b)| a + b)
                .collect();
            if let Some(m) = &tr.in_mask {
                dx.iter_mut().zip(&m[t * de..(t + 1) * de]).for_each(|(d, &k)| *d *= k);
            }
            rows.push(tr.ids[t], &dx);
        }
    }

    /// Accumulates gradients of a loss whose derivative w.r.t. this pair's
    /// logit is `d_logit`.
    pub fn backward_pair(&self, tr: &PairTrace<S>, d_logit: S, g: &mut Gradients<S>) {
        let one = S::one();
        let v = self.value(ParamId::MatchV);
        let hidden = &tr.head.hidden;
        let df = hidden.len();
        let mut da = vec![S::zero(); df];
        for k in 0..df {
            g.v[k] += d_logit * hidden[k];
            da[k] = d_logit * v[k] * (one - hidden[k] * hidden[k]);
            g.b[k] += da[k];
        }
        g.b_out[0] += d_logit;
        outer_acc(&mut g.w1, &da, &tr.head.u1);
        outer_acc(&mut g.w2, &da, &tr.head.u2);
        let denc = tr.hs.len();
        let mut du1 = vec![S::zero(); denc];
        let mut du2 = vec![S::zero(); denc];
        matvec_t_acc(&mut du1, self.value(ParamId::MatchW1), &da);
        matvec_t_acc(&mut du2, self.value(ParamId::MatchW2), &da);
        let mut dhs = vec![S::zero(); denc];
        let mut dht = vec![S::zero(); denc];
        for k in 0..denc {
            let diff = tr.hs[k] - tr.ht[k];
            let sgn = if diff > S::zero() {
                one
            } else if diff < S::zero() {
                -one
            } else {
                S::zero()
            };
            dhs[k] = du1[k] * tr.ht[k] + du2[k] * sgn;
            dht[k] = du1[k] * tr.hs[k] - du2[k] * sgn;
        }
        if let Some((ms, mt)) = &tr.out_mask {
            dhs.iter_mut().zip(ms).for_each(|(d, &m)| *d *= m);
            dht.iter_mut().zip(mt).for_each(|(d, &m)| *d *= m);
        }
        self.backward_encoder(&tr.src, &dhs, g);
        self.backward_encoder(&tr.tgt, &dht, g);
    }

    /// Mean clamped cross entropy of a batch (forward only).
    pub fn batch_loss(&self, batch: &Batch, mode: Mode) -> Result<f64> {
        LossGraph::new().forward(self, batch, mode)
    }

    pub fn predict(&self, src: &[u32], tgt: &[u32], rho: f64) -> Result<bool> {
        let hs = self.encode(src, Side::Source, None)?;
        let ht = self.encode(tgt, Side::Target, None)?;
        let p = self.match_probability(&hs, &ht, None)?;
        Ok(predict(p.to_f64().unwrap_or(0.0), rho))
    }
}

/// Decision rule: parallel iff `p >= rho`.
pub fn predict(p: f64, rho: f64) -> bool {
    p >= rho
}

/// `−[y ln p + (1 − y) ln(1 − p)]` with `p` clamped away from 0 and 1.
pub fn bce_loss(p: f64, label: bool) -> f64 {
    let p = p.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Embedding-gradient rows in the order they were produced.
#[derive(Debug, Clone, Default)]
pub struct SparseRows<S> {
    width: usize,
    ids: Vec<u32>,
    data: Vec<S>,
}

impl<S: Scalar> SparseRows<S> {
    fn new(width: usize) -> Self {
        SparseRows {
            width,
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    fn push(&mut self, id: u32, row: &[S]) {
        self.ids.push(id);
        self.data.extend_from_slice(row);
    }

    fn scatter_into(&self, dense: &mut [S], scale: S) {
        for (k, &id) in self.ids.iter().enumerate() {
            let src = &self.data[k * self.width..(k + 1) * self.width];
            let dst = &mut dense[id as usize * self.width..(id as usize + 1) * self.width];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellGradBuf<S> {
    w: Vec<S>,
    u: Vec<S>,
    b: Vec<S>,
}

impl<S: Scalar> CellGradBuf<S> {
    fn view(&mut self) -> CellGrads<'_, S> {
        CellGrads {
            w: &mut self.w,
            u: &mut self.u,
            b: &mut self.b,
        }
    }
}

/// Gradient accumulator with dense recurrent/head parts and sparse embedding rows.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    emb_source: SparseRows<S>,
    emb_target: SparseRows<S>,
    fwd: CellGradBuf<S>,
    bwd: CellGradBuf<S>,
    w1: Vec<S>,
    w2: Vec<S>,
    b: Vec<S>,
    v: Vec<S>,
    b_out: Vec<S>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros(params: &ModelParams<S>) -> Self {
        let z = |id: ParamId| vec![S::zero(); params.value(id).len()];
        Gradients {
            emb_source: SparseRows::new(params.config.d_e),
            emb_target: SparseRows::new(params.config.d_e),
            fwd: CellGradBuf {
                w: z(ParamId::FwdW),
                u: z(ParamId::FwdU),
                b: z(ParamId::FwdB),
            },
            bwd: CellGradBuf {
                w: z(ParamId::BwdW),
                u: z(ParamId::BwdU),
                b: z(ParamId::BwdB),
            },
            w1: z(ParamId::MatchW1),
            w2: z(ParamId::MatchW2),
            b: z(ParamId::MatchB),
            v: z(ParamId::MatchV),
            b_out: z(ParamId::MatchBOut),
        }
    }

    fn dense_parts(&self) -> [(ParamId, &[S]); 11] {
        [
            (ParamId::FwdW, &self.fwd.w),
            (ParamId::FwdU, &self.fwd.u),
            (ParamId::FwdB, &self.fwd.b),
            (ParamId::BwdW, &self.bwd.w),
            (ParamId::BwdU, &self.bwd.u),
            (ParamId::BwdB, &self.bwd.b),
            (ParamId::MatchW1, &self.w1),
            (ParamId::MatchW2, &self.w2),
            (ParamId::MatchB, &self.b),
            (ParamId::MatchV, &self.v),
            (ParamId::MatchBOut, &self.b_out),
        ]
    }

    /// Overwrites the store's gradients with `scale ×` these.
    pub fn write_into(&self, params: &mut ModelParams<S>, scale: S) {
        params.store.zero_grads();
        self.add_into(params, scale);
    }

    /// Adds `scale ×` these to the store's gradients.
    pub fn add_into(&self, params: &mut ModelParams<S>, scale: S) {
        for (id, g) in self.dense_parts() {
            let dst = params.store.get_mut(id as usize).grad.data_mut();
            for (d, &s) in dst.iter_mut().zip(g) {
                *d += scale * s;
            }
        }
        self.emb_source.scatter_into(
            params.store.get_mut(ParamId::EmbSource as usize).grad.data_mut(),
            scale,
        );
        self.emb_target.scatter_into(
            params.store.get_mut(ParamId::EmbTarget as usize).grad.data_mut(),
            scale,
        );
    }
}

/// Forward results of a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchForward<S> {
    pub traces: Vec<PairTrace<S>>,
    pub labels: Vec<bool>,
    /// Mean loss.
    pub loss: f64,
}

/// A recorded forward pass over a batch whose loss can be differentiated.
#[derive(Debug, Clone, Default)]
pub struct LossGraph<S> {
    record: Option<BatchForward<S>>,
}

impl<S: Scalar> LossGraph<S> {
    pub fn new() -> Self {
        LossGraph { record: None }
    }

    /// Runs the batch forward and returns its mean loss.
    pub fn forward(&mut self, params: &ModelParams<S>, batch: &Batch, mode: Mode) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let n = batch.len();
        let chunks = par::map_range(n.div_ceil(GRAD_CHUNK), |c| {
            (c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(n))
                .map(|i| {
                    let mut rng = match mode {
                        Mode::Training { seed } => Some(ModelParams::<S>::example_rng(seed, i)),
                        Mode::Inference => None,
                    };
                    params.forward_pair(batch.source.row(i), batch.target.row(i), rng.as_mut())
                })
                .collect::<Result<Vec<_>>>()
        });
        let mut traces = Vec::with_capacity(n);
        for c in chunks {
            traces.extend(c?);
        }
        let loss = traces
            .iter()
            .zip(&batch.labels)
            .map(|(t, &y)| bce_loss(t.p.to_f64().unwrap_or(f64::NAN), y))
            .sum::<f64>()
            / n as f64;
        self.record = Some(BatchForward {
            traces,
            labels: batch.labels.clone(),
            loss,
        });
        Ok(loss)
    }

    pub fn record(&self) -> Option<&BatchForward<S>> {
        self.record.as_ref()
    }

    /// Gradient of the mean loss. Consumes the recorded forward pass.
    ///
    /// The derivative w.r.t. each logit is `(p − y) / n`, the exact gradient
    /// wherever the probability clamp is inactive.
    pub fn backward(&mut self, params: &ModelParams<S>) -> Result<Vec<Gradients<S>>> {
        let rec = self.record.take().ok_or(Error::NoForwardPass)?;
        let n = rec.traces.len();
        let inv_n = S::lit(1.0 / n as f64);
        Ok(par::map_range(n.div_ceil(GRAD_CHUNK), |c| {
            let mut g = Gradients::zeros(params);
            for i in c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(n) {
                let tr = &rec.traces[i];
                let y = if rec.labels[i] { S::one() } else { S::zero() };
                params.backward_pair(tr, (tr.p - y) * inv_n, &mut g);
            }
            g
        }))
    }

    /// Forward, backward and write the gradients into `params.store`.
    pub fn loss_and_gradients(params: &mut ModelParams<S>, batch: &Batch, mode: Mode) -> Result<f64> {
        let mut graph = LossGraph::new();
        let loss = graph.forward(params, batch, mode)?;
        let parts = graph.backward(params)?;
        params.store.zero_grads();
        for g in &parts {
            g.add_into(params, S::one());
        }
        Ok(loss)
    }
}


#[cfg(test)]
mod gradcheck {
    use super::*;
    use crate::dataset::PaddedSide;
    use crate::model::ModelConfig;
    use crate::nn::CellKind;

    fn worst_relative_error(cell: CellKind, mode: Mode) -> f64 {
        let cfg = ModelConfig::new(20, 20).with_dims(8, 8, 4).with_cell(cell);
        let mut m = ModelParams::<f64>::init(cfg, 17).unwrap();
        // spread the weights so the check is not dominated by near-zero slopes
        for p in m.store.iter_mut() {
            for (k, v) in p.value.data_mut().iter_mut().enumerate() {
                *v = *v * 4.0 + 0.05 * ((k as f64) * 0.37).sin();
            }
        }
        let src: [&[u32]; 3] = [&[2, 5, 7, 11, 3], &[4], &[9, 9, 2]];
        let tgt: [&[u32]; 3] = [&[6, 3, 8], &[19, 2, 4, 4, 10], &[1]];
        let b = Batch {
            source: PaddedSide::from_sequences(src),
            target: PaddedSide::from_sequences(tgt),
            labels: vec![true, false, true],
        };
        LossGraph::loss_and_gradients(&mut m, &b, mode).unwrap();
        let analytic = m.store.clone();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for id in 0..m.store.len() {
            for k in 0..m.store.get(id).value.len() {
                let base = m.store.get(id).value.data()[k];
                m.store.get_mut(id).value.data_mut()[k] = base + eps;
                let up = m.batch_loss(&b, mode).unwrap();
                m.store.get_mut(id).value.data_mut()[k] = base - eps;
                let dn = m.batch_loss(&b, mode).unwrap();
                m.store.get_mut(id).value.data_mut()[k] = base;
                let num = (up - dn) / (2.0 * eps);
                let ana = analytic.get(id).grad.data()[k];
                worst = worst.max((ana - num).abs() / ana.abs().max(1.0));
            }
        }
        worst
    }

    #[test]
    fn lstm_and_gru_match_central_differences() {
        for cell in [CellKind::Lstm, CellKind::Gru] {
            for mode in [Mode::Inference, Mode::Training { seed: 4 }] {
                let e = worst_relative_error(cell, mode);
                assert!(e <= 1e-4, "{cell:?} {mode:?}: {e}");
            }
        }
    }
}
