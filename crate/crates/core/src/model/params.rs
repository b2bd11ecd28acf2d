use super::config::ModelConfig;
use super::Side;
use crate::error::{Error, Result};
use crate::nn::{CellKind, CellWeights, ParameterStore, Scalar, Tensor};
use crate::rng::{self, Rng};

/// Fixed positions of the model tensors inside the parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum ParamId {
    EmbSource = 0,
    EmbTarget,
    FwdW,
    FwdU,
    FwdB,
    BwdW,
    BwdU,
    BwdB,
    MatchW1,
    MatchW2,
    MatchB,
    MatchV,
    MatchBOut,
}

pub const PARAM_NAMES: [&str; 13] = [
    "embedding.source",
    "embedding.target",
    "rnn.forward.w",
    "rnn.forward.u",
    "rnn.forward.b",
    "rnn.backward.w",
    "rnn.backward.u",
    "rnn.backward.b",
    "match.w1",
    "match.w2",
    "match.b",
    "match.v",
    "match.b_out",
];

const INIT_BOUND: f64 = 0.1;
const LSTM_FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    pub config: ModelConfig,
    pub store: ParameterStore<S>,
}

impl<S: Scalar> ModelParams<S> {
    /// The expected shape of every tensor, in store order.
    pub fn shapes(config: &ModelConfig) -> Vec<Vec<usize>> {
        let g = config.cell.gates() * config.d_h;
        let (de, dh, df, denc) = (config.d_e, config.d_h, config.d_f, config.d_enc());
        vec![
            vec![config.src_vocab, de],
            vec![config.tgt_vocab, de],
            vec![g, de],
            vec![g, dh],
            vec![g],
            vec![g, de],
            vec![g, dh],
            vec![g],
            vec![df, denc],
            vec![df, denc],
            vec![df],
            vec![df],
            vec![1],
        ]
    }

    /// Uniform(−0.1, 0.1) matrices, zero biases, LSTM forget bias 1.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::derived(seed, &[rng::stream::INIT]);
        let shapes = Self::shapes(&config);
        let mut store = ParameterStore::new();
        for (i, (name, shape)) in PARAM_NAMES.iter().zip(&shapes).enumerate() {
            let is_bias = matches!(i, 4 | 7 | 10 | 12);
            let mut t = if is_bias {
                Tensor::zeros(shape)
            } else {
                Tensor::uniform(shape, INIT_BOUND, &mut r)
            };
            if config.cell == CellKind::Lstm && (i == 4 || i == 7) {
                let d = config.d_h;
                t.data_mut()[d..2 * d].iter_mut().for_each(|v| *v = S::lit(LSTM_FORGET_BIAS));
            }
            store.add(name, t)?;
        }
        Ok(ModelParams { config, store })
    }

    /// Rebuilds from loaded tensors, checking names and shapes.
    pub fn from_store(config: ModelConfig, store: ParameterStore<S>) -> Result<Self> {
        config.validate()?;
        let shapes = Self::shapes(&config);
        if store.len() != PARAM_NAMES.len() {
            return Err(Error::Corrupt(format!(
                "expected {} tensors, found {}",
                PARAM_NAMES.len(),
                store.len()
            )));
        }
        for (i, ((p, name), shape)) in store.iter().zip(PARAM_NAMES).zip(&shapes).enumerate() {
            if p.name != name {
                return Err(Error::Corrupt(format!("tensor {i} is `{}`, expected `{name}`", p.name)));
            }
            if p.value.shape() != shape.as_slice() {
                return Err(Error::Corrupt(format!(
                    "`{name}` has shape {:?}, config implies {shape:?}",
                    p.value.shape()
                )));
            }
        }
        Ok(ModelParams { config, store })
    }

    pub fn value(&self, id: ParamId) -> &[S] {
        self.store.value(id as usize)
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [S] {
        self.store.get_mut(id as usize).value.data_mut()
    }

    pub fn grad(&self, id: ParamId) -> &[S] {
        self.store.get(id as usize).grad.data()
    }

    pub fn embedding(&self, side: Side) -> &[S] {
        match side {
            Side::Source => self.value(ParamId::EmbSource),
            Side::Target => self.value(ParamId::EmbTarget),
        }
    }

    pub fn vocab_size(&self, side: Side) -> usize {
        match side {
            Side::Source => self.config.src_vocab,
            Side::Target => self.config.tgt_vocab,
        }
    }

    /// The forward-direction cell, shared by both languages.
    pub fn forward_cell(&self) -> CellWeights<'_, S> {
        self.cell(ParamId::FwdW, ParamId::FwdU, ParamId::FwdB)
    }

    /// The backward-direction cell, shared by both languages.
    pub fn backward_cell(&self) -> CellWeights<'_, S> {
        self.cell(ParamId::BwdW, ParamId::BwdU, ParamId::BwdB)
    }

    fn cell(&self, w: ParamId, u: ParamId, b: ParamId) -> CellWeights<'_, S> {
        CellWeights {
            kind: self.config.cell,
            d_in: self.config.d_e,
            d_h: self.config.d_h,
            w: self.value(w),
            u: self.value(u),
            b: self.value(b),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.store.iter().map(|p| p.value.len()).sum()
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        ModelParams {
            config: self.config,
            store: self.store.cast(),
        }
    }

    /// Fresh dropout generator for example `index` under `seed`.
    pub(crate) fn example_rng(seed: u64, index: usize) -> Rng {
        rng::derived(seed, &[rng::stream::DROPOUT, index as u64])
    }
}
