use super::kernels::{matvec_acc, matvec_t_acc, outer_acc, sigmoid};
use super::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    /// Number of stacked gate blocks in `W`, `U` and `b`.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::InvalidArgument(format!("unknown cell type `{other}`"))),
        }
    }
}

/// Borrowed weights of one recurrent cell.
///
/// Gate blocks are stacked row-wise: LSTM `[input; forget; candidate; output]`,
/// GRU `[update; reset; candidate]`. `w` is `(gates·d_h) × d_in`, `u` is
/// `(gates·d_h) × d_h`.
#[derive(Debug, Clone, Copy)]
pub struct CellWeights<'a, S> {
    pub kind: CellKind,
    pub d_in: usize,
    pub d_h: usize,
    pub w: &'a [S],
    pub u: &'a [S],
    pub b: &'a [S],
}

impl<S: Scalar> CellWeights<'_, S> {
    pub fn validate(&self) -> Result<()> {
        let g = self.kind.gates() * self.d_h;
        if self.w.len() != g * self.d_in || self.u.len() != g * self.d_h || self.b.len() != g {
            return Err(Error::ShapeMismatch(format!(
                "{} cell with d_in={} d_h={} got |W|={} |U|={} |b|={}",
                self.kind.name(),
                self.d_in,
                self.d_h,
                self.w.len(),
                self.u.len(),
                self.b.len()
            )));
        }
        Ok(())
    }
}

pub struct CellGrads<'a, S> {
    pub w: &'a mut [S],
    pub u: &'a mut [S],
    pub b: &'a mut [S],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState<S> {
    pub h: Vec<S>,
    /// Memory cell; empty for GRU.
    pub c: Vec<S>,
}

impl<S: Scalar> RecurrentState<S> {
    pub fn zeros(kind: CellKind, d_h: usize) -> Self {
        RecurrentState {
            h: vec![S::zero(); d_h],
            c: match kind {
                CellKind::Lstm => vec![S::zero(); d_h],
                CellKind::Gru => Vec::new(),
            },
        }
    }
}

fn lstm_cell<S: Scalar>(
    cw: &CellWeights<S>,
    x: &[S],
    h_prev: &[S],
    c_prev: &[S],
    gates: &mut [S],
    c: &mut [S],
    tanh_c: &mut [S],
    h: &mut [S],
) {
    let d = cw.d_h;
    gates.copy_from_slice(cw.b);
    matvec_acc(gates, cw.w, x);
    matvec_acc(gates, cw.u, h_prev);
    for k in 0..d {
        let i = sigmoid(gates[k]);
        let f = sigmoid(gates[d + k]);
        let g = gates[2 * d + k].tanh();
        let o = sigmoid(gates[3 * d + k]);
        gates[k] = i;
        gates[d + k] = f;
        gates[2 * d + k] = g;
        gates[3 * d + k] = o;
        c[k] = f * c_prev[k] + i * g;
        tanh_c[k] = c[k].tanh();
        h[k] = o * tanh_c[k];
    }
}

fn gru_cell<S: Scalar>(
    cw: &CellWeights<S>,
    x: &[S],
    h_prev: &[S],
    gates: &mut [S],
    rh: &mut [S],
    h: &mut [S],
) {
    let d = cw.d_h;
    let (zr, n) = gates.split_at_mut(2 * d);
    zr.copy_from_slice(&cw.b[..2 * d]);
    matvec_acc(zr, &cw.w[..2 * d * cw.d_in], x);
    matvec_acc(zr, &cw.u[..2 * d * d], h_prev);
    for v in zr.iter_mut() {
        *v = sigmoid(*v);
    }
    for k in 0..d {
        rh[k] = zr[d + k] * h_prev[k];
    }
    n.copy_from_slice(&cw.b[2 * d..]);
    matvec_acc(n, &cw.w[2 * d * cw.d_in..], x);
    matvec_acc(n, &cw.u[2 * d * d..], rh);
    for k in 0..d {
        n[k] = n[k].tanh();
        let z = zr[k];
        h[k] = (S::one() - z) * h_prev[k] + z * n[k];
    }
}

fn check_step<S: Scalar>(cw: &CellWeights<S>, want: CellKind, x: &[S], h: &[S]) -> Result<()> {
    cw.validate()?;
    if cw.kind != want {
        return Err(Error::InvalidArgument(format!(
            "expected {} weights, got {}",
            want.name(),
            cw.kind.name()
        )));
    }
    if x.len() != cw.d_in || h.len() != cw.d_h {
        return Err(Error::ShapeMismatch(format!(
            "input {} / state {} for cell with d_in={} d_h={}",
            x.len(),
            h.len(),
            cw.d_in,
            cw.d_h
        )));
    }
    Ok(())
}

/// One LSTM step: `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
pub fn lstm_step<S: Scalar>(
    prev: &RecurrentState<S>,
    x: &[S],
    cw: &CellWeights<S>,
) -> Result<RecurrentState<S>> {
    check_step(cw, CellKind::Lstm, x, &prev.h)?;
    if prev.c.len() != cw.d_h {
        return Err(Error::ShapeMismatch("LSTM state needs a memory cell".into()));
    }
    let d = cw.d_h;
    let mut gates = vec![S::zero(); 4 * d];
    let mut next = RecurrentState {
        h: vec![S::zero(); d],
        c: vec![S::zero(); d],
    };
    let mut tc = vec![S::zero(); d];
    lstm_cell(cw, x, &prev.h, &prev.c, &mut gates, &mut next.c, &mut tc, &mut next.h);
    Ok(next)
}

/// One GRU step: `h = (1−z)⊙h_prev + z⊙h̃`.
pub fn gru_step<S: Scalar>(h_prev: &[S], x: &[S], cw: &CellWeights<S>) -> Result<Vec<S>> {
    check_step(cw, CellKind::Gru, x, h_prev)?;
    let d = cw.d_h;
    let mut gates = vec![S::zero(); 3 * d];
    let mut rh = vec![S::zero(); d];
    let mut h = vec![S::zero(); d];
    gru_cell(cw, x, h_prev, &mut gates, &mut rh, &mut h);
    Ok(h)
}

/// Everything the backward pass needs from a forward run over one sequence.
#[derive(Debug, Clone)]
pub struct RnnTrace<S> {
    pub kind: CellKind,
    pub d_in: usize,
    pub d_h: usize,
    pub len: usize,
    /// Inputs, `len × d_in`, in processing order.
    pub xs: Vec<S>,
    /// Hidden states `h_0..h_len`, `(len + 1) × d_h`.
    pub hs: Vec<S>,
    /// LSTM memory cells `c_0..c_len`; empty for GRU.
    pub cs: Vec<S>,
    /// Activated gates per step.
    pub gates: Vec<S>,
    /// `tanh(c_t)` for LSTM, `r_t ⊙ h_{t-1}` for GRU.
    pub aux: Vec<S>,
}

impl<S: Scalar> RnnTrace<S> {
    pub fn final_h(&self) -> &[S] {
        &self.hs[self.len * self.d_h..]
    }

    pub fn final_c(&self) -> Option<&[S]> {
        (!self.cs.is_empty()).then(|| &self.cs[self.len * self.d_h..])
    }
}

/// Runs the cell over `xs` (`len × d_in`) from a zero state.
pub fn rnn_forward<S: Scalar>(cw: &CellWeights<S>, xs: Vec<S>) -> Result<RnnTrace<S>> {
    cw.validate()?;
    if !xs.len().is_multiple_of(cw.d_in) {
        return Err(Error::ShapeMismatch(format!(
            "input buffer of {} values is not a multiple of d_in={}",
            xs.len(),
            cw.d_in
        )));
    }
    let (d, din) = (cw.d_h, cw.d_in);
    let len = xs.len() / din;
    let g = cw.kind.gates() * d;
    let mut hs = vec![S::zero(); (len + 1) * d];
    let mut cs = match cw.kind {
        CellKind::Lstm => vec![S::zero(); (len + 1) * d],
        CellKind::Gru => Vec::new(),
    };
    let mut gates = vec![S::zero(); len * g];
    let mut aux = vec![S::zero(); len * d];
    for t in 0..len {
        let x = &xs[t * din..(t + 1) * din];
        let (h_done, h_rest) = hs.split_at_mut((t + 1) * d);
        let h_prev = &h_done[t * d..];
        let h = &mut h_rest[..d];
        let gt = &mut gates[t * g..(t + 1) * g];
        let at = &mut aux[t * d..(t + 1) * d];
        match cw.kind {
            CellKind::Lstm => {
                let (c_done, c_rest) = cs.split_at_mut((t + 1) * d);
                lstm_cell(cw, x, h_prev, &c_done[t * d..], gt, &mut c_rest[..d], at, h);
            }
            CellKind::Gru => gru_cell(cw, x, h_prev, gt, at, h),
        }
    }
    Ok(RnnTrace {
        kind: cw.kind,
        d_in: din,
        d_h: d,
        len,
        xs,
        hs,
        cs,
        gates,
        aux,
    })
}

/// Backpropagation through time from a gradient on the final hidden state.
/// Weight gradients and input gradients (`dxs`, `len × d_in`) are accumulated.
pub fn rnn_backward<S: Scalar>(
    cw: &CellWeights<S>,
    trace: &RnnTrace<S>,
    dh_final: &[S],
    grads: &mut CellGrads<S>,
    dxs: &mut [S],
) {
    let (d, din) = (cw.d_h, cw.d_in);
    let g = cw.kind.gates() * d;
    let one = S::one();
    let mut dh = dh_final.to_vec();
    let mut dc = vec![S::zero(); d];
    let mut da = vec![S::zero(); g];
    let mut dh_prev = vec![S::zero(); d];
    let mut d_rh = vec![S::zero(); d];
    for t in (0..trace.len).rev() {
        let x = &trace.xs[t * din..(t + 1) * din];
        let h_prev = &trace.hs[t * d..(t + 1) * d];
        let gt = &trace.gates[t * g..(t + 1) * g];
        let at = &trace.aux[t * d..(t + 1) * d];
        dh_prev.iter_mut().for_each(|v| *v = S::zero());
        match cw.kind {
            CellKind::Lstm => {
                let c_prev = &trace.cs[t * d..(t + 1) * d];
                for k in 0..d {
                    let (i, f, gg, o) = (gt[k], gt[d + k], gt[2 * d + k], gt[3 * d + k]);
                    let tc = at[k];
                    let d_o = dh[k] * tc;
                    dc[k] += dh[k] * o * (one - tc * tc);
                    let di = dc[k] * gg;
                    let dg = dc[k] * i;
                    let df = dc[k] * c_prev[k];
                    da[k] = di * i * (one - i);
                    da[d + k] = df * f * (one - f);
                    da[2 * d + k] = dg * (one - gg * gg);
                    da[3 * d + k] = d_o * o * (one - o);
                    dc[k] *= f;
                }
                outer_acc(grads.u, &da, h_prev);
                matvec_t_acc(&mut dh_prev, cw.u, &da);
            }
            CellKind::Gru => {
                for k in 0..d {
                    let (z, n) = (gt[k], gt[2 * d + k]);
                    let dn = dh[k] * z;
                    da[k] = dh[k] * (n - h_prev[k]) * z * (one - z);
                    da[2 * d + k] = dn * (one - n * n);
                    dh_prev[k] = dh[k] * (one - z);
                }
                d_rh.iter_mut().for_each(|v| *v = S::zero());
                matvec_t_acc(&mut d_rh, &cw.u[2 * d * d..], &da[2 * d..]);
                for k in 0..d {
                    let r = gt[d + k];
                    let dr = d_rh[k] * h_prev[k];
                    dh_prev[k] += d_rh[k] * r;
                    da[d + k] = dr * r * (one - r);
                }
                outer_acc(&mut grads.u[..2 * d * d], &da[..2 * d], h_prev);
                outer_acc(&mut grads.u[2 * d * d..], &da[2 * d..], at);
                matvec_t_acc(&mut dh_prev, &cw.u[..2 * d * d], &da[..2 * d]);
            }
        }
        outer_acc(grads.w, &da, x);
        for (gb, &v) in grads.b.iter_mut().zip(&da) {
            *gb += v;
        }
        matvec_t_acc(&mut dxs[t * din..(t + 1) * din], cw.w, &da);
        std::mem::swap(&mut dh, &mut dh_prev);
    }
}
