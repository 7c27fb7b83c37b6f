use super::config::PredictorConfig;
use super::encoder::lookup;
use crate::autodiff::{ParamSet, Tape, Tensor, Var};
use crate::error::{QppError, Result};
use crate::rng::Rng;

/// Attention logit given to masked keys; exp() of it underflows to exactly 0.
pub const MASKED_LOGIT: f64 = -1e30;

#[derive(Debug, Clone, PartialEq)]
struct LayerIdx {
    wq: usize,
    bq: usize,
    wk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln1_g: usize,
    ln1_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    ln2_g: usize,
    ln2_b: usize,
}

/// Post-norm transformer encoder over a group of pair vectors, with learned
/// position embeddings and a scalar head per slot.
///
/// The key projection has no bias: adding the same vector to every key shifts
/// each attention row by a constant, which softmax ignores.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupwisePredictor {
    pub config: PredictorConfig,
    pos_emb: usize,
    layers: Vec<LayerIdx>,
    head_w: usize,
    head_b: usize,
}

fn layer_names(i: usize) -> impl Fn(&str) -> String {
    move |s| format!("layer{i}.{s}")
}

impl GroupwisePredictor {
    pub fn init(cfg: PredictorConfig, params: &mut ParamSet, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let (d, f) = (cfg.d_model, cfg.ffn_width);
        params.insert_uniform("pos_emb", &[cfg.max_positions, d], d, rng)?;
        for i in 0..cfg.n_layers {
            let n = layer_names(i);
            params.insert_uniform(n("wq"), &[d, d], d, rng)?;
            params.insert_uniform(n("bq"), &[1, d], d, rng)?;
            params.insert_uniform(n("wk"), &[d, d], d, rng)?;
            params.insert_uniform(n("wv"), &[d, d], d, rng)?;
            params.insert_uniform(n("bv"), &[1, d], d, rng)?;
            params.insert_uniform(n("wo"), &[d, d], d, rng)?;
            params.insert_uniform(n("bo"), &[1, d], d, rng)?;
            params.insert(n("ln1_g"), Tensor::full(&[1, d], 1.0))?;
            params.insert(n("ln1_b"), Tensor::zeros(&[1, d]))?;
            params.insert_uniform(n("w1"), &[d, f], d, rng)?;
            params.insert_uniform(n("b1"), &[1, f], d, rng)?;
            params.insert_uniform(n("w2"), &[f, d], f, rng)?;
            params.insert_uniform(n("b2"), &[1, d], f, rng)?;
            params.insert(n("ln2_g"), Tensor::full(&[1, d], 1.0))?;
            params.insert(n("ln2_b"), Tensor::zeros(&[1, d]))?;
        }
        params.insert_uniform("head_w", &[d, 1], d, rng)?;
        params.insert_uniform("head_b", &[1, 1], d, rng)?;
        Self::resolve(cfg, params)
    }

    pub fn resolve(cfg: PredictorConfig, params: &ParamSet) -> Result<Self> {
        cfg.validate()?;
        let (d, f) = (cfg.d_model, cfg.ffn_width);
        let layers = (0..cfg.n_layers)
            .map(|i| {
                let n = layer_names(i);
                Ok(LayerIdx {
                    wq: lookup(params, &n("wq"), &[d, d])?,
                    bq: lookup(params, &n("bq"), &[1, d])?,
                    wk: lookup(params, &n("wk"), &[d, d])?,
                    wv: lookup(params, &n("wv"), &[d, d])?,
                    bv: lookup(params, &n("bv"), &[1, d])?,
                    wo: lookup(params, &n("wo"), &[d, d])?,
                    bo: lookup(params, &n("bo"), &[1, d])?,
                    ln1_g: lookup(params, &n("ln1_g"), &[1, d])?,
                    ln1_b: lookup(params, &n("ln1_b"), &[1, d])?,
                    w1: lookup(params, &n("w1"), &[d, f])?,
                    b1: lookup(params, &n("b1"), &[1, f])?,
                    w2: lookup(params, &n("w2"), &[f, d])?,
                    b2: lookup(params, &n("b2"), &[1, d])?,
                    ln2_g: lookup(params, &n("ln2_g"), &[1, d])?,
                    ln2_b: lookup(params, &n("ln2_b"), &[1, d])?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config: cfg,
            pos_emb: lookup(params, "pos_emb", &[cfg.max_positions, d])?,
            layers,
            head_w: lookup(params, "head_w", &[d, 1])?,
            head_b: lookup(params, "head_b", &[1, 1])?,
        })
    }

    /// `[n, d]` group → `[n, 1]` predictions. Masked slots neither attend nor
    /// are attended to by valid slots; their outputs are meaningless.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        position_ids: &[usize],
        mask: &[bool],
    ) -> Result<Var> {
        let cfg = &self.config;
        let (n, d) = tape.value(x).dims2("predictor input")?;
        if d != cfg.d_model || position_ids.len() != n || mask.len() != n {
            return Err(QppError::Contract(format!(
                "group of shape [{n}, {d}] with {} position ids and {} mask bits; model d = {}",
                position_ids.len(),
                mask.len(),
                cfg.d_model
            )));
        }
        if let Some(&p) = position_ids.iter().find(|&&p| p >= cfg.max_positions) {
            return Err(QppError::Contract(format!(
                "position id {p} >= max_positions {}",
                cfg.max_positions
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(QppError::Contract("group has no valid slot".into()));
        }

        let key_bias: Vec<f64> = (0..n * n)
            .map(|i| if mask[i % n] { 0.0 } else { MASKED_LOGIT })
            .collect();
        let key_bias = tape.constant(Tensor::matrix(n, n, key_bias)?);
        let dh = d / cfg.n_heads;
        let inv_sqrt = 1.0 / (dh as f64).sqrt();

        let pos = tape.gather_rows(vars[self.pos_emb], position_ids)?;
        let mut h = tape.add(x, pos)?;
        for l in &self.layers {
            let q = tape.matmul(h, vars[l.wq])?;
            let q = tape.add(q, vars[l.bq])?;
            let k = tape.matmul(h, vars[l.wk])?;
            let v = tape.matmul(h, vars[l.wv])?;
            let v = tape.add(v, vars[l.bv])?;
            let mut heads = Vec::with_capacity(cfg.n_heads);
            for hd in 0..cfg.n_heads {
                let (a, b) = (hd * dh, (hd + 1) * dh);
                let qh = tape.slice_cols(q, a, b)?;
                let kh = tape.slice_cols(k, a, b)?;
                let vh = tape.slice_cols(v, a, b)?;
                let kt = tape.transpose(kh)?;
                let s = tape.matmul(qh, kt)?;
                let s = tape.scale(s, inv_sqrt);
                let s = tape.add(s, key_bias)?;
                let w = tape.softmax_rows(s)?;
                heads.push(tape.matmul(w, vh)?);
            }
            let o = if heads.len() == 1 {
                heads[0]
            } else {
                tape.concat_cols(&heads)?
            };
            let o = tape.matmul(o, vars[l.wo])?;
            let o = tape.add(o, vars[l.bo])?;
            let r = tape.add(h, o)?;
            h = affine_norm(tape, r, vars[l.ln1_g], vars[l.ln1_b])?;

            let f = tape.matmul(h, vars[l.w1])?;
            let f = tape.add(f, vars[l.b1])?;
            let f = tape.gelu(f);
            let f = tape.matmul(f, vars[l.w2])?;
            let f = tape.add(f, vars[l.b2])?;
            let r = tape.add(h, f)?;
            h = affine_norm(tape, r, vars[l.ln2_g], vars[l.ln2_b])?;
        }
        let out = tape.matmul(h, vars[self.head_w])?;
        tape.add(out, vars[self.head_b])
    }
}

fn affine_norm(tape: &mut Tape, x: Var, gain: Var, bias: Var) -> Result<Var> {
    let n = tape.layer_norm_rows(x)?;
    let n = tape.mul(n, gain)?;
    tape.add(n, bias)
}

/// Mean squared error over the valid slots of `[n, 1]` predictions.
pub fn mse_loss(tape: &mut Tape, predictions: Var, labels: &[f64], mask: &[bool]) -> Result<Var> {
    let n = tape.value(predictions).len();
    if labels.len() != n || mask.len() != n {
        return Err(QppError::Contract("labels/mask length differs from predictions".into()));
    }
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 {
        return Err(QppError::Contract("loss over zero valid slots".into()));
    }
    let shape = tape.shape(predictions).to_vec();
    let target = tape.constant(Tensor::new(shape.clone(), labels.to_vec())?);
    let weights = tape.constant(Tensor::new(
        shape,
        mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )?);
    let diff = tape.sub(predictions, target)?;
    let diff = tape.mul(diff, weights)?;
    let sq = tape.mul(diff, diff)?;
    let total = tape.sum(sq);
    Ok(tape.scale(total, 1.0 / valid as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss_of(pred: &[f64], labels: &[f64], mask: &[bool]) -> f64 {
        let mut t = Tape::new();
        let p = t.param(Tensor::matrix(pred.len(), 1, pred.to_vec()).unwrap());
        let l = mse_loss(&mut t, p, labels, mask).unwrap();
        t.value(l).item()
    }

    #[test]
    fn mse_examples() {
        assert_eq!(loss_of(&[0.3, 0.7], &[0.3, 0.7], &[true, true]), 0.0);
        assert_eq!(loss_of(&[1.0, 0.0], &[0.0, 0.0], &[true, true]), 0.5);
        assert_eq!(
            loss_of(&[1.0, 0.0, 1e12], &[0.0, 0.0, 0.0], &[true, true, false]),
            0.5
        );
        let mut t = Tape::new();
        let p = t.param(Tensor::matrix(1, 1, vec![1.0]).unwrap());
        assert!(mse_loss(&mut t, p, &[0.0], &[false]).is_err());
    }
}
