//! Teacher-forced negative log-likelihood and its exact gradient by reverse
//! accumulation through output layer, decoder GRU, attention, decoder
//! initialization and the encoder.

use crate::gru::GruStep;
use crate::model::{DecoderState, ModelParams};
use crate::numerics::{axpy, dot, softmax};
use crate::vocab::{TokenId, EOS};

use super::SentencePair;

/// `−Σ log p(y_t | y_<t, X)` over the target, conditioning every step on
/// the complete source.
pub fn nll(params: &ModelParams, pair: &SentencePair) -> f64 {
    let ctx = params.encode(&pair.source).expect("source ids in vocabulary");
    let mut state = params.init_decoder(&ctx).expect("non-empty source");
    let mut total = 0.0;
    for &y in &pair.target {
        let pred = params
            .next_token_logprobs(&state, &ctx)
            .expect("non-empty context");
        total -= pred.logprobs[y];
        state = pred.commit(y);
    }
    total
}

struct DecoderCache {
    prev: TokenId,
    z_prev: Vec<f64>,
    /// `tanh(q + k_t)` for every source position.
    act: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    input: Vec<f64>,
    gru: GruStep,
    probs: Vec<f64>,
    target: TokenId,
}

/// Adds `∂ nll / ∂θ` for one pair into `grads` and returns the loss.
pub fn accumulate_grad(params: &ModelParams, pair: &SentencePair, grads: &mut ModelParams) -> f64 {
    let cfg = params.config;
    let (e_dim, h_dim, a_dim) = (cfg.emb_dim, cfg.hidden_dim, cfg.att_dim);

    // Encoder forward.
    let mut enc_steps: Vec<GruStep> = Vec::with_capacity(pair.source.len());
    let mut h = vec![0.0; h_dim];
    for &x in &pair.source {
        let step = params.encoder.step_cached(params.src_emb.row(x), &h);
        h = step.out.clone();
        enc_steps.push(step);
    }
    let hs: Vec<&[f64]> = enc_steps.iter().map(|s| s.out.as_slice()).collect();
    let keys: Vec<Vec<f64>> = hs.iter().map(|h| params.att_u.matvec(h)).collect();
    let carry = hs.last().expect("non-empty source").to_vec();

    let mut z0 = params.init_b.clone();
    params.init_w.matvec_acc(&carry, &mut z0);
    z0.iter_mut().for_each(|v| *v = v.tanh());

    // Decoder forward.
    let mut loss = 0.0;
    let mut caches: Vec<DecoderCache> = Vec::with_capacity(pair.target.len());
    let mut state = DecoderState {
        hidden: z0.clone(),
        prev_token: EOS,
    };
    for &y in &pair.target {
        let q = params.attention_query(&state);
        let act: Vec<Vec<f64>> = keys
            .iter()
            .map(|k| q.iter().zip(k).map(|(a, b)| (a + b).tanh()).collect())
            .collect();
        let scores: Vec<f64> = act.iter().map(|a| dot(a, &params.att_v)).collect();
        let alpha = softmax(&scores).expect("non-empty source");
        let mut context = vec![0.0; h_dim];
        for (a, h) in alpha.iter().zip(&hs) {
            axpy(*a, h, &mut context);
        }
        let input = params.decoder_input(state.prev_token, &context);
        let gru = params.decoder.step_cached(&input, &state.hidden);
        let probs = softmax(&params.logits(&gru.out)).expect("non-empty vocabulary");
        loss -= probs[y].ln();
        let next_hidden = gru.out.clone();
        caches.push(DecoderCache {
            prev: state.prev_token,
            z_prev: std::mem::take(&mut state.hidden),
            act,
            alpha,
            input,
            gru,
            probs,
            target: y,
        });
        state = DecoderState {
            hidden: next_hidden,
            prev_token: y,
        };
    }

    // Backward through the decoder.
    let n_src = hs.len();
    let mut d_keys = vec![vec![0.0; a_dim]; n_src];
    let mut d_hs = vec![vec![0.0; h_dim]; n_src];
    let mut dz_next = vec![0.0; h_dim];
    for c in caches.iter().rev() {
        let mut dlogits = c.probs.clone();
        dlogits[c.target] -= 1.0;
        grads.out_w.add_outer(&dlogits, &c.gru.out);
        axpy(1.0, &dlogits, &mut grads.out_b);
        let mut dz = dz_next;
        params.out_w.matvec_t_acc(&dlogits, &mut dz);

        let mut d_input = vec![0.0; e_dim + h_dim];
        let mut dz_prev = vec![0.0; h_dim];
        params
            .decoder
            .backward(&c.input, &c.gru, &dz, &mut grads.decoder, &mut d_input, &mut dz_prev);
        let (de, dctx) = d_input.split_at_mut(e_dim);

        let d_alpha: Vec<f64> = hs.iter().map(|h| dot(dctx, h)).collect();
        for (dh, &a) in d_hs.iter_mut().zip(&c.alpha) {
            axpy(a, dctx, dh);
        }
        let mean = dot(&c.alpha, &d_alpha);
        let mut dq = vec![0.0; a_dim];
        for t in 0..n_src {
            let d_score = c.alpha[t] * (d_alpha[t] - mean);
            if d_score == 0.0 {
                continue;
            }
            axpy(d_score, &c.act[t], &mut grads.att_v);
            for i in 0..a_dim {
                let a = c.act[t][i];
                let d_pre = d_score * params.att_v[i] * (1.0 - a * a);
                dq[i] += d_pre;
                d_keys[t][i] += d_pre;
            }
        }
        grads.att_w.add_outer(&dq, &c.z_prev);
        params.att_w.matvec_t_acc(&dq, &mut dz_prev);
        let e = params.tgt_emb.row(c.prev);
        grads.att_e.add_outer(&dq, e);
        params.att_e.matvec_t_acc(&dq, de);
        axpy(1.0, &dq, &mut grads.att_b);
        axpy(1.0, de, grads.tgt_emb.row_mut(c.prev));

        dz_next = dz_prev;
    }

    // Decoder initialization.
    let d_pre0: Vec<f64> = dz_next
        .iter()
        .zip(&z0)
        .map(|(d, z)| d * (1.0 - z * z))
        .collect();
    grads.init_w.add_outer(&d_pre0, &carry);
    axpy(1.0, &d_pre0, &mut grads.init_b);
    params.init_w.matvec_t_acc(&d_pre0, &mut d_hs[n_src - 1]);

    // Attention keys.
    for t in 0..n_src {
        grads.att_u.add_outer(&d_keys[t], hs[t]);
        params.att_u.matvec_t_acc(&d_keys[t], &mut d_hs[t]);
    }

    // Encoder, back through time.
    let mut dh_carry = vec![0.0; h_dim];
    for t in (0..n_src).rev() {
        let mut dh = std::mem::take(&mut d_hs[t]);
        axpy(1.0, &dh_carry, &mut dh);
        let x = pair.source[t];
        let mut dx = vec![0.0; e_dim];
        let mut dh_prev = vec![0.0; h_dim];
        params.encoder.backward(
            params.src_emb.row(x),
            &enc_steps[t],
            &dh,
            &mut grads.encoder,
            &mut dx,
            &mut dh_prev,
        );
        axpy(1.0, &dx, grads.src_emb.row_mut(x));
        dh_carry = dh_prev;
    }

    loss
}

/// Loss and gradient for one pair.
pub fn grad_nll(params: &ModelParams, pair: &SentencePair) -> (f64, ModelParams) {
    let mut grads = ModelParams::zeros(params.config);
    let loss = accumulate_grad(params, pair, &mut grads);
    (loss, grads)
}
