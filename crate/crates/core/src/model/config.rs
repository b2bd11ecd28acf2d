use crate::error::{Error, Result};
use crate::nn::CellKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub d_e: usize,
    /// Recurrent size per direction.
    pub d_h: usize,
    /// Matching-head hidden size.
    pub d_f: usize,
    pub cell: CellKind,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub dropout_in: f64,
    pub dropout_out: f64,
}

impl ModelConfig {
    pub fn new(src_vocab: usize, tgt_vocab: usize) -> Self {
        ModelConfig {
            d_e: 512,
            d_h: 512,
            d_f: 256,
            cell: CellKind::Lstm,
            src_vocab,
            tgt_vocab,
            dropout_in: 0.2,
            dropout_out: 0.3,
        }
    }

    pub fn with_dims(mut self, d_e: usize, d_h: usize, d_f: usize) -> Self {
        self.d_e = d_e;
        self.d_h = d_h;
        self.d_f = d_f;
        self
    }

    pub fn with_cell(mut self, cell: CellKind) -> Self {
        self.cell = cell;
        self
    }

    pub fn with_dropout(mut self, input: f64, output: f64) -> Self {
        self.dropout_in = input;
        self.dropout_out = output;
        self
    }

    /// Size of a sentence representation.
    pub fn d_enc(&self) -> usize {
        2 * self.d_h
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_e", self.d_e),
            ("d_h", self.d_h),
            ("d_f", self.d_f),
            ("source vocabulary", self.src_vocab),
            ("target vocabulary", self.tgt_vocab),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        for (name, p) in [("dropout_in", self.dropout_in), ("dropout_out", self.dropout_out)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name}={p} outside [0, 1)")));
            }
        }
        Ok(())
    }
}
