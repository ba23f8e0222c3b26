//! Attention-based encoder–decoder.
//!
//! The encoder is a unidirectional GRU over source embeddings, so the
//! context set can be extended one token at a time without touching the
//! vectors already computed. The decoder attends over whatever context set it
//! is handed, which is what lets the simultaneous decoder compare a prefix
//! context against an enlarged one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gru::Gru;
use crate::numerics::{log_softmax, softmax, Matrix, Rng};
use crate::vocab::{TokenId, EOS};

/// Standard deviation of the Gaussian used for weight matrices.
pub const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub source_vocab: usize,
    pub target_vocab: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub att_dim: usize,
}

impl ModelConfig {
    /// Desk-scale defaults: embeddings of 32, 64 hidden units and a 64-unit
    /// attention layer.
    pub fn with_vocab(source_vocab: usize, target_vocab: usize) -> Self {
        ModelConfig {
            source_vocab,
            target_vocab,
            emb_dim: 32,
            hidden_dim: 64,
            att_dim: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("source_vocab", self.source_vocab),
            ("target_vocab", self.target_vocab),
            ("emb_dim", self.emb_dim),
            ("hidden_dim", self.hidden_dim),
            ("att_dim", self.att_dim),
        ];
        for (name, d) in dims {
            if d == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.target_vocab <= EOS {
            return Err(Error::InvalidConfig(
                "target vocabulary must contain <eos>".into(),
            ));
        }
        Ok(())
    }
}

/// All learned weights.
///
/// The same struct doubles as the gradient and optimizer-accumulator
/// container, so every per-tensor operation walks [`ModelParams::tensors`]
/// in one fixed order. That order is also the checkpoint layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub src_emb: Matrix,
    pub tgt_emb: Matrix,
    pub encoder: Gru,
    pub decoder: Gru,
    /// Attention: query from the decoder state.
    pub att_w: Matrix,
    /// Attention: key from each context vector.
    pub att_u: Matrix,
    /// Attention: query from the previous target embedding.
    pub att_e: Matrix,
    pub att_b: Vec<f64>,
    pub att_v: Vec<f64>,
    pub out_w: Matrix,
    pub out_b: Vec<f64>,
    pub init_w: Matrix,
    pub init_b: Vec<f64>,
}

/// Tensor names in [`ModelParams::tensors`] order.
pub const TENSOR_NAMES: [&str; 29] = [
    "src_emb", "tgt_emb", "enc.w_r", "enc.w_u", "enc.w_c", "enc.u_r", "enc.u_u", "enc.u_c",
    "enc.b_r", "enc.b_u", "enc.b_c", "dec.w_r", "dec.w_u", "dec.w_c", "dec.u_r", "dec.u_u",
    "dec.u_c", "dec.b_r", "dec.b_u", "dec.b_c", "att.w", "att.u", "att.e", "att.b", "att.v",
    "out.w", "out.b", "init.w", "init.b",
];

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Self {
        Self::gaussian(config, 0.0, &mut Rng::new(0))
    }

    /// Default initialization: matrices from N(0, 0.01), i.e. standard
    /// deviation 0.1; zero biases.
    pub fn init(config: ModelConfig, rng: &mut Rng) -> Self {
        Self::gaussian(config, INIT_STD, rng)
    }

    /// Weight matrices (including embeddings and the attention vector `v`)
    /// from N(0, std²); biases zero.
    pub fn gaussian(config: ModelConfig, std: f64, rng: &mut Rng) -> Self {
        let ModelConfig {
            source_vocab: vs,
            target_vocab: vt,
            emb_dim: e,
            hidden_dim: h,
            att_dim: a,
        } = config;
        ModelParams {
            config,
            src_emb: Matrix::gaussian(vs, e, std, rng),
            tgt_emb: Matrix::gaussian(vt, e, std, rng),
            encoder: Gru::gaussian(e, h, std, rng),
            decoder: Gru::gaussian(e + h, h, std, rng),
            att_w: Matrix::gaussian(a, h, std, rng),
            att_u: Matrix::gaussian(a, h, std, rng),
            att_e: Matrix::gaussian(a, e, std, rng),
            att_b: vec![0.0; a],
            att_v: (0..a).map(|_| rng.next_gaussian() * std).collect(),
            out_w: Matrix::gaussian(vt, h, std, rng),
            out_b: vec![0.0; vt],
            init_w: Matrix::gaussian(h, h, std, rng),
            init_b: vec![0.0; h],
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = vec![self.src_emb.as_slice(), self.tgt_emb.as_slice()];
        t.extend(self.encoder.tensors());
        t.extend(self.decoder.tensors());
        t.extend([
            self.att_w.as_slice(),
            self.att_u.as_slice(),
            self.att_e.as_slice(),
            &self.att_b[..],
            &self.att_v[..],
            self.out_w.as_slice(),
            &self.out_b[..],
            self.init_w.as_slice(),
            &self.init_b[..],
        ]);
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> =
            vec![self.src_emb.as_mut_slice(), self.tgt_emb.as_mut_slice()];
        t.extend(self.encoder.tensors_mut());
        t.extend(self.decoder.tensors_mut());
        t.extend([
            self.att_w.as_mut_slice(),
            self.att_u.as_mut_slice(),
            self.att_e.as_mut_slice(),
            &mut self.att_b[..],
            &mut self.att_v[..],
            self.out_w.as_mut_slice(),
            &mut self.out_b[..],
            self.init_w.as_mut_slice(),
            &mut self.init_b[..],
        ]);
        t
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Overwrites every weight from a flat vector in tensor order.
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn check_ids(&self, ids: &[TokenId], size: usize) -> Result<()> {
        match ids.iter().find(|&&id| id >= size) {
            Some(&id) => Err(Error::TokenOutOfVocab { id, size }),
            None => Ok(()),
        }
    }

    /// Runs the encoder over a whole source sequence from the zero state.
    pub fn encode(&self, source: &[TokenId]) -> Result<ContextSet> {
        self.extend_context(&ContextSet::empty(self.config.hidden_dim), source)
    }

    /// Continues the encoder recurrence from `ctx.carry` over `new_ids`,
    /// returning the enlarged context set. `ctx` is left untouched.
    pub fn extend_context(&self, ctx: &ContextSet, new_ids: &[TokenId]) -> Result<ContextSet> {
        let mut out = ctx.clone();
        self.extend_context_in_place(&mut out, new_ids)?;
        Ok(out)
    }

    pub fn extend_context_in_place(&self, ctx: &mut ContextSet, new_ids: &[TokenId]) -> Result<()> {
        self.check_ids(new_ids, self.config.source_vocab)?;
        for &id in new_ids {
            let h = self.encoder.step(self.src_emb.row(id), &ctx.carry);
            ctx.keys.push(self.att_u.matvec(&h));
            ctx.vectors.push(h.clone());
            ctx.carry = h;
        }
        Ok(())
    }

    /// `z₀ = tanh(W_i · carry + b_i)`, previous token `<eos>`.
    pub fn init_decoder(&self, ctx: &ContextSet) -> Result<DecoderState> {
        if ctx.is_empty() {
            return Err(Error::EmptyContext);
        }
        let mut z = self.init_b.clone();
        self.init_w.matvec_acc(&ctx.carry, &mut z);
        z.iter_mut().for_each(|v| *v = v.tanh());
        Ok(DecoderState {
            hidden: z,
            prev_token: EOS,
        })
    }

    /// Query half of the attention pre-activation: `W_a z + E_a emb(ỹ) + b_a`.
    pub(crate) fn attention_query(&self, state: &DecoderState) -> Vec<f64> {
        let mut q = self.att_b.clone();
        self.att_w.matvec_acc(&state.hidden, &mut q);
        self.att_e.matvec_acc(self.tgt_emb.row(state.prev_token), &mut q);
        q
    }

    /// Content-based attention of the decoder state over `ctx`.
    pub fn attend(&self, state: &DecoderState, ctx: &ContextSet) -> Result<AttentionOutput> {
        if ctx.is_empty() {
            return Err(Error::EmptyContext);
        }
        let q = self.attention_query(state);
        let scores: Vec<f64> = ctx
            .keys
            .iter()
            .map(|k| {
                q.iter()
                    .zip(k)
                    .zip(&self.att_v)
                    .map(|((qi, ki), vi)| vi * (qi + ki).tanh())
                    .sum()
            })
            .collect();
        let weights = softmax(&scores)?;
        let mut context = vec![0.0; self.config.hidden_dim];
        for (a, h) in weights.iter().zip(&ctx.vectors) {
            crate::numerics::axpy(*a, h, &mut context);
        }
        Ok(AttentionOutput { weights, context })
    }

    /// Decoder GRU update with input `[emb(ỹ); c]`. The previous token is
    /// carried over unchanged; it only changes when a token is committed.
    pub fn decoder_step(&self, state: &DecoderState, att: &AttentionOutput) -> DecoderState {
        let input = self.decoder_input(state.prev_token, &att.context);
        DecoderState {
            hidden: self.decoder.step(&input, &state.hidden),
            prev_token: state.prev_token,
        }
    }

    pub(crate) fn decoder_input(&self, prev: TokenId, context: &[f64]) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.config.emb_dim + self.config.hidden_dim);
        input.extend_from_slice(self.tgt_emb.row(prev));
        input.extend_from_slice(context);
        input
    }

    pub(crate) fn logits(&self, hidden: &[f64]) -> Vec<f64> {
        let mut logits = self.out_b.clone();
        self.out_w.matvec_acc(hidden, &mut logits);
        logits
    }

    /// `log_softmax(W_o z + b_o)` over the target vocabulary.
    pub fn output_logprobs(&self, state: &DecoderState) -> Vec<f64> {
        log_softmax(&self.logits(&state.hidden)).expect("target vocabulary is non-empty")
    }

    /// One full decoder forward pass: attend, update the state, project.
    pub fn next_token_logprobs(&self, state: &DecoderState, ctx: &ContextSet) -> Result<Prediction> {
        let attention = self.attend(state, ctx)?;
        let next = self.decoder_step(state, &attention);
        let logprobs = self.output_logprobs(&next);
        Ok(Prediction {
            logprobs,
            attention,
            hidden: next.hidden,
        })
    }
}

/// Encoder outputs for the source prefix read so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    vectors: Vec<Vec<f64>>,
    /// Attention keys `U_a h_t`, one per vector. Derived data.
    keys: Vec<Vec<f64>>,
    carry: Vec<f64>,
}

impl ContextSet {
    pub fn empty(hidden_dim: usize) -> Self {
        ContextSet {
            vectors: Vec::new(),
            keys: Vec::new(),
            carry: vec![0.0; hidden_dim],
        }
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn carry(&self) -> &[f64] {
        &self.carry
    }

    pub fn token_count(&self) -> usize {
        self.vectors.len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Same vectors, attention keys dropped and recomputed by `params`.
    #[doc(hidden)]
    pub fn rekeyed(&self, params: &ModelParams) -> Self {
        ContextSet {
            vectors: self.vectors.clone(),
            keys: self.vectors.iter().map(|h| params.att_u.matvec(h)).collect(),
            carry: self.carry.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub hidden: Vec<f64>,
    pub prev_token: TokenId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
}

/// Result of [`ModelParams::next_token_logprobs`]: the next-token
/// distribution, the attention that produced it, and the advanced hidden
/// state to adopt if a token is committed.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logprobs: Vec<f64>,
    pub attention: AttentionOutput,
    pub hidden: Vec<f64>,
}

impl Prediction {
    pub fn argmax(&self) -> TokenId {
        crate::numerics::argmax(&self.logprobs)
    }

    /// Decoder state after committing `token`.
    pub fn commit(&self, token: TokenId) -> DecoderState {
        DecoderState {
            hidden: self.hidden.clone(),
            prev_token: token,
        }
    }
}
