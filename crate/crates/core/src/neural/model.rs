use rand::distributions::{Distribution, Uniform};

use super::{Matrix, NeuralError, Variant};
use crate::annotate::tokenize;
use crate::corpus::{ClozeInstance, Label};
use crate::embeddings::EmbeddingTable;
use crate::rng;

/// Token sequences longer than this are truncated.
pub const MAX_SEQUENCE_LEN: usize = 128;

/// Gate order in the stacked matrices: input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4h × d`
    pub w_input: Matrix,
    /// `4h × h`
    pub w_hidden: Matrix,
    /// `4h`
    pub bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_input: Matrix::zeros(4 * hidden, input),
            w_hidden: Matrix::zeros(4 * hidden, hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.cols()
    }
}

/// Attention scoring (`w_y`, `w_h`, `w`) and output projection (`w_p`, `w_x`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_y: Matrix,
    pub w_h: Matrix,
    pub w: Vec<f64>,
    pub w_p: Matrix,
    pub w_x: Matrix,
}

impl AttentionParams {
    pub fn zeros(hidden: usize) -> Self {
        AttentionParams {
            w_y: Matrix::zeros(hidden, hidden),
            w_h: Matrix::zeros(hidden, hidden),
            w: vec![0.0; hidden],
            w_p: Matrix::zeros(hidden, hidden),
            w_x: Matrix::zeros(hidden, hidden),
        }
    }
}

/// Softmax layer over the two endings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    /// `2 × width`
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
}

/// All trainable parameters. Gradients and optimizer moments share this type.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub variant: Variant,
    pub lstm: LstmParams,
    pub attention: Option<AttentionParams>,
    pub head: ClassifierHead,
}

impl NeuralModel {
    pub fn zeros(variant: Variant, input: usize, hidden: usize) -> Self {
        NeuralModel {
            variant,
            lstm: LstmParams::zeros(input, hidden),
            attention: variant.uses_attention().then(|| AttentionParams::zeros(hidden)),
            head: ClassifierHead {
                w_o: Matrix::zeros(2, variant.output_width(hidden)),
                b_o: vec![0.0; 2],
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        NeuralModel::zeros(self.variant, self.input_dim(), self.hidden())
    }

    pub fn input_dim(&self) -> usize {
        self.lstm.input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    /// Every tensor with its name and `(rows, cols)` shape, in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, (usize, usize), &[f64])> {
        let mut out: Vec<(&'static str, (usize, usize), &[f64])> = vec![
            ("lstm.w_input", shape(&self.lstm.w_input), self.lstm.w_input.as_slice()),
            ("lstm.w_hidden", shape(&self.lstm.w_hidden), self.lstm.w_hidden.as_slice()),
            ("lstm.bias", (self.lstm.bias.len(), 1), &self.lstm.bias),
        ];
        if let Some(a) = &self.attention {
            out.extend([
                ("att.w_y", shape(&a.w_y), a.w_y.as_slice()),
                ("att.w_h", shape(&a.w_h), a.w_h.as_slice()),
                ("att.w", (a.w.len(), 1), a.w.as_slice()),
                ("att.w_p", shape(&a.w_p), a.w_p.as_slice()),
                ("att.w_x", shape(&a.w_x), a.w_x.as_slice()),
            ]);
        }
        out.push(("head.w_o", shape(&self.head.w_o), self.head.w_o.as_slice()));
        out.push(("head.b_o", (2, 1), &self.head.b_o));
        out
    }

    /// Mutable views in the same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.lstm.w_input.as_mut_slice(),
            self.lstm.w_hidden.as_mut_slice(),
            &mut self.lstm.bias,
        ];
        if let Some(a) = &mut self.attention {
            out.extend([
                a.w_y.as_mut_slice(),
                a.w_h.as_mut_slice(),
                a.w.as_mut_slice(),
                a.w_p.as_mut_slice(),
                a.w_x.as_mut_slice(),
            ]);
        }
        out.push(self.head.w_o.as_mut_slice());
        out.push(&mut self.head.b_o);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &NeuralModel) {
        for (dst, (_, _, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.2.iter().all(|v| v.is_finite()))
    }
}

fn shape(m: &Matrix) -> (usize, usize) {
    (m.rows(), m.cols())
}

/// Xavier-uniform weights in `±√(6/(fan_in + fan_out))` with `fan_in` = columns
/// and `fan_out` = rows; zero biases.
pub fn init_params(seed: u64, input: usize, hidden: usize, variant: Variant) -> NeuralModel {
    let mut model = NeuralModel::zeros(variant, input, hidden);
    let mut rng = rng::seeded(seed);
    let shapes: Vec<(&'static str, (usize, usize))> =
        model.tensors().into_iter().map(|(name, s, _)| (name, s)).collect();
    for ((name, (rows, cols)), tensor) in shapes.into_iter().zip(model.tensors_mut()) {
        if name.ends_with("bias") || name.ends_with("b_o") {
            continue;
        }
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        tensor.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    }
    model
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct StepCache<'a> {
    x: &'a [f64],
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
}

fn step<'a>(p: &LstmParams, x: &'a [f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache<'a> {
    let n = p.hidden();
    let mut gates = p.bias.clone();
    p.w_input.matvec_add(x, &mut gates);
    p.w_hidden.matvec_add(h_prev, &mut gates);
    for (k, v) in gates.iter_mut().enumerate() {
        *v = if (2 * n..3 * n).contains(&k) {
            v.tanh()
        } else {
            sigmoid(*v)
        };
    }
    let (i, rest) = gates.split_at(n);
    let (f, rest) = rest.split_at(n);
    let (g, o) = rest.split_at(n);
    let c: Vec<f64> = (0..n).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..n).map(|k| o[k] * tanh_c[k]).collect();
    StepCache {
        x,
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
        h,
        c,
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), NeuralError> {
    if expected == found {
        Ok(())
    } else {
        Err(NeuralError::Shape { what, expected, found })
    }
}

/// One LSTM transition: `c' = f∘c + i∘g`, `h' = o∘tanh(c')`.
pub fn lstm_step(
    params: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
    check_len("input vector", params.input_dim(), x.len())?;
    check_len("hidden state", params.hidden(), h.len())?;
    check_len("cell state", params.hidden(), c.len())?;
    let s = step(params, x, h, c);
    Ok((s.h, s.c))
}

/// Outputs of an encoder run.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub outputs: Vec<Vec<f64>>,
    pub h_last: Vec<f64>,
    pub c_last: Vec<f64>,
}

fn encode_cached<'a>(
    p: &LstmParams,
    xs: &[&'a [f64]],
    h0: &[f64],
    c0: &[f64],
) -> Vec<StepCache<'a>> {
    let mut steps: Vec<StepCache<'a>> = Vec::with_capacity(xs.len());
    for &x in xs {
        let s = match steps.last() {
            Some(prev) => step(p, x, &prev.h, &prev.c),
            None => step(p, x, h0, c0),
        };
        steps.push(s);
    }
    steps
}

/// Runs the LSTM over `xs` starting from `(h0, c0)`.
pub fn encode(
    params: &LstmParams,
    xs: &[&[f64]],
    h0: &[f64],
    c0: &[f64],
) -> Result<Encoding, NeuralError> {
    if xs.is_empty() {
        return Err(NeuralError::EmptySequence("encode"));
    }
    check_len("hidden state", params.hidden(), h0.len())?;
    check_len("cell state", params.hidden(), c0.len())?;
    for x in xs {
        check_len("input vector", params.input_dim(), x.len())?;
    }
    let steps = encode_cached(params, xs, h0, c0);
    let last = steps.last().expect("nonempty");
    Ok(Encoding {
        h_last: last.h.clone(),
        c_last: last.c.clone(),
        outputs: steps.iter().map(|s| s.h.clone()).collect(),
    })
}

/// Attention weights `alpha`, summary `r` and ending representation `h_star`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub alpha: Vec<f64>,
    pub r: Vec<f64>,
    pub h_star: Vec<f64>,
}

struct AttentionCache {
    m: Vec<Vec<f64>>,
    out: AttentionOutput,
}

fn attend_cached(story: &[&[f64]], h_e: &[f64], ap: &AttentionParams) -> AttentionCache {
    let n = h_e.len();
    let wh_e = ap.w_h.matvec(h_e);
    let m: Vec<Vec<f64>> = story
        .iter()
        .map(|ht| {
            let mut pre = wh_e.clone();
            ap.w_y.matvec_add(ht, &mut pre);
            pre.iter_mut().for_each(|v| *v = v.tanh());
            pre
        })
        .collect();
    let scores: Vec<f64> = m
        .iter()
        .map(|mt| mt.iter().zip(&ap.w).map(|(a, b)| a * b).sum())
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut alpha: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= z);
    let mut r = vec![0.0; n];
    for (a, ht) in alpha.iter().zip(story) {
        r.iter_mut().zip(*ht).for_each(|(ri, hi)| *ri += a * hi);
    }
    let mut h_star = ap.w_p.matvec(&r);
    ap.w_x.matvec_add(h_e, &mut h_star);
    h_star.iter_mut().for_each(|v| *v = v.tanh());
    AttentionCache {
        m,
        out: AttentionOutput { alpha, r, h_star },
    }
}

/// Attention of the final ending state over the story outputs:
/// `M_t = tanh(Wy·H_t + Wh·h_e)`, `α = softmax(wᵀM)`, `r = Σ α_t H_t`,
/// `h* = tanh(Wp·r + Wx·h_e)`.
pub fn attend(story_outputs: &[Vec<f64>], h_e_last: &[f64], ap: &AttentionParams) -> AttentionOutput {
    let story: Vec<&[f64]> = story_outputs.iter().map(Vec::as_slice).collect();
    attend_cached(&story, h_e_last, ap).out
}

/// Word vectors of one instance; borrowed from the embedding table.
#[derive(Debug, Clone)]
pub struct EmbeddedInstance<'a> {
    pub id: String,
    pub story: Vec<&'a [f64]>,
    pub endings: [Vec<&'a [f64]>; 2],
    pub gold: Option<Label>,
}

/// Tokenizes an instance and looks up its vectors. The story is the four
/// context sentences in order; sequences are cut at [`MAX_SEQUENCE_LEN`];
/// unknown tokens map to the zero vector.
pub fn embed_instance<'a>(table: &'a EmbeddingTable, instance: &ClozeInstance) -> EmbeddedInstance<'a> {
    let lookup = |tokens: Vec<String>| -> Vec<&'a [f64]> {
        tokens
            .iter()
            .take(MAX_SEQUENCE_LEN)
            .map(|t| table.lookup_or_zero(t))
            .collect()
    };
    let story_tokens: Vec<String> = instance.context.iter().flat_map(|s| tokenize(s)).collect();
    EmbeddedInstance {
        id: instance.id.clone(),
        story: lookup(story_tokens),
        endings: [lookup(tokenize(&instance.ending1)), lookup(tokenize(&instance.ending2))],
        gold: instance.gold,
    }
}

/// Intermediate values of a forward pass, consumed by [`backward`].
pub struct ForwardCache<'a> {
    story: Vec<StepCache<'a>>,
    endings: [Vec<StepCache<'a>>; 2],
    attention: Option<[AttentionCache; 2]>,
    repr: Vec<f64>,
    probs: [f64; 2],
}

impl ForwardCache<'_> {
    pub fn probs(&self) -> [f64; 2] {
        self.probs
    }

    /// The representation fed to the softmax head.
    pub fn representation(&self) -> &[f64] {
        &self.repr
    }

    /// Attention weights per ending, when the variant uses attention.
    pub fn alphas(&self) -> Option<[&[f64]; 2]> {
        self.attention
            .as_ref()
            .map(|[a, b]| [a.out.alpha.as_slice(), b.out.alpha.as_slice()])
    }
}

/// Probabilities of (ending 1, ending 2) being right.
pub fn forward<'a>(
    model: &NeuralModel,
    input: &EmbeddedInstance<'a>,
) -> Result<([f64; 2], ForwardCache<'a>), NeuralError> {
    let n = model.hidden();
    if input.story.is_empty() {
        return Err(NeuralError::EmptySequence("story"));
    }
    for (k, e) in input.endings.iter().enumerate() {
        if e.is_empty() {
            return Err(NeuralError::EmptySequence(if k == 0 { "ending 1" } else { "ending 2" }));
        }
    }
    for x in input.story.iter().chain(input.endings.iter().flatten()) {
        check_len("input vector", model.input_dim(), x.len())?;
    }
    let zeros = vec![0.0; n];
    let story = encode_cached(&model.lstm, &input.story, &zeros, &zeros);
    let last = story.last().expect("nonempty");
    let endings = [0, 1].map(|k| encode_cached(&model.lstm, &input.endings[k], &last.h, &last.c));
    let e_last = |k: usize| endings[k].last().expect("nonempty").h.as_slice();

    let attention = model.attention.as_ref().map(|ap| {
        let story_h: Vec<&[f64]> = story.iter().map(|s| s.h.as_slice()).collect();
        [0, 1].map(|k| attend_cached(&story_h, e_last(k), ap))
    });

    let mut repr = Vec::with_capacity(model.variant.output_width(n));
    for k in 0..2 {
        let h_star = attention.as_ref().map(|a| a[k].out.h_star.as_slice());
        match model.variant {
            Variant::Raw => repr.extend_from_slice(e_last(k)),
            Variant::Attention => repr.extend_from_slice(h_star.expect("attention params")),
            Variant::Combined => {
                repr.extend_from_slice(e_last(k));
                repr.extend_from_slice(h_star.expect("attention params"));
            }
        }
    }

    let mut logits = model.head.b_o.clone();
    model.head.w_o.matvec_add(&repr, &mut logits);
    let max = logits[0].max(logits[1]);
    let (a, b) = ((logits[0] - max).exp(), (logits[1] - max).exp());
    let probs = [a / (a + b), b / (a + b)];
    Ok((
        probs,
        ForwardCache {
            story,
            endings,
            attention,
            repr,
            probs,
        },
    ))
}

/// Cross-entropy of `probs` against `gold`.
pub fn loss(probs: [f64; 2], gold: Label) -> f64 {
    -probs[gold.index()].ln()
}

/// Backpropagates one step; `dh`, `dc` are gradients on this step's `h`, `c`.
/// Returns the gradients on the previous `(h, c)`.
fn step_backward(
    p: &LstmParams,
    s: &StepCache<'_>,
    dh: &[f64],
    dc: &[f64],
    g: &mut LstmParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = dh.len();
    let (i, rest) = s.gates.split_at(n);
    let (f, rest) = rest.split_at(n);
    let (gg, o) = rest.split_at(n);
    let mut dz = vec![0.0; 4 * n];
    let mut dc_prev = vec![0.0; n];
    for k in 0..n {
        let d_o = dh[k] * s.tanh_c[k];
        let dc_total = dc[k] + dh[k] * o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
        let d_i = dc_total * gg[k];
        let d_g = dc_total * i[k];
        let d_f = dc_total * s.c_prev[k];
        dc_prev[k] = dc_total * f[k];
        dz[k] = d_i * i[k] * (1.0 - i[k]);
        dz[n + k] = d_f * f[k] * (1.0 - f[k]);
        dz[2 * n + k] = d_g * (1.0 - gg[k] * gg[k]);
        dz[3 * n + k] = d_o * o[k] * (1.0 - o[k]);
    }
    g.w_input.add_outer(&dz, s.x);
    g.w_hidden.add_outer(&dz, &s.h_prev);
    g.bias.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
    let mut dh_prev = vec![0.0; n];
    p.w_hidden.matvec_t_add(&dz, &mut dh_prev);
    (dh_prev, dc_prev)
}

/// Backpropagates through a sequence. `dh_out[t]` is the external gradient on
/// output `t`; `dc_last` the gradient on the final cell state. Returns the
/// gradients on the initial `(h0, c0)`.
fn encode_backward(
    p: &LstmParams,
    steps: &[StepCache<'_>],
    dh_out: &[Vec<f64>],
    dc_last: &[f64],
    g: &mut LstmParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = p.hidden();
    let mut dh_next = vec![0.0; n];
    let mut dc_next = dc_last.to_vec();
    for (t, s) in steps.iter().enumerate().rev() {
        let dh: Vec<f64> = dh_next.iter().zip(&dh_out[t]).map(|(a, b)| a + b).collect();
        let (dh_prev, dc_prev) = step_backward(p, s, &dh, &dc_next, g);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    (dh_next, dc_next)
}

/// Backpropagates attention. Adds into `dh_story` and returns the gradient on
/// `h_e`.
fn attend_backward(
    ap: &AttentionParams,
    cache: &AttentionCache,
    story: &[&[f64]],
    h_e: &[f64],
    dh_star: &[f64],
    dh_story: &mut [Vec<f64>],
    g: &mut AttentionParams,
) -> Vec<f64> {
    let n = h_e.len();
    let AttentionOutput { alpha, r, h_star } = &cache.out;
    let dpre: Vec<f64> = dh_star.iter().zip(h_star).map(|(d, h)| d * (1.0 - h * h)).collect();
    g.w_p.add_outer(&dpre, r);
    g.w_x.add_outer(&dpre, h_e);
    let mut dr = vec![0.0; n];
    ap.w_p.matvec_t_add(&dpre, &mut dr);
    let mut dh_e = vec![0.0; n];
    ap.w_x.matvec_t_add(&dpre, &mut dh_e);

    let dalpha: Vec<f64> = story
        .iter()
        .map(|ht| ht.iter().zip(&dr).map(|(a, b)| a * b).sum())
        .collect();
    let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
    let mut dpre_sum = vec![0.0; n];
    for t in 0..story.len() {
        dh_story[t].iter_mut().zip(&dr).for_each(|(d, x)| *d += alpha[t] * x);
        let ds = alpha[t] * (dalpha[t] - mean);
        let mt = &cache.m[t];
        g.w.iter_mut().zip(mt).for_each(|(gw, m)| *gw += ds * m);
        let dpre_t: Vec<f64> = mt
            .iter()
            .zip(&ap.w)
            .map(|(m, w)| ds * w * (1.0 - m * m))
            .collect();
        g.w_y.add_outer(&dpre_t, story[t]);
        ap.w_y.matvec_t_add(&dpre_t, &mut dh_story[t]);
        dpre_sum.iter_mut().zip(&dpre_t).for_each(|(a, b)| *a += b);
    }
    g.w_h.add_outer(&dpre_sum, h_e);
    ap.w_h.matvec_t_add(&dpre_sum, &mut dh_e);
    dh_e
}

/// Adds the cross-entropy gradient of one instance into `grads`; returns
/// the loss.
pub fn backward_into(
    model: &NeuralModel,
    cache: &ForwardCache<'_>,
    gold: Label,
    grads: &mut NeuralModel,
) -> f64 {
    let n = model.hidden();
    let mut dlogits = cache.probs;
    dlogits[gold.index()] -= 1.0;
    grads.head.w_o.add_outer(&dlogits, &cache.repr);
    grads.head.b_o.iter_mut().zip(&dlogits).for_each(|(b, d)| *b += d);
    let mut drepr = vec![0.0; cache.repr.len()];
    model.head.w_o.matvec_t_add(&dlogits, &mut drepr);

    // Split the representation gradient into (d e_k, d h*_k).
    let mut de: [Vec<f64>; 2] = [vec![0.0; n], vec![0.0; n]];
    let mut dstar: [Vec<f64>; 2] = [vec![0.0; n], vec![0.0; n]];
    for k in 0..2 {
        match model.variant {
            Variant::Raw => de[k].copy_from_slice(&drepr[k * n..(k + 1) * n]),
            Variant::Attention => dstar[k].copy_from_slice(&drepr[k * n..(k + 1) * n]),
            Variant::Combined => {
                de[k].copy_from_slice(&drepr[2 * k * n..(2 * k + 1) * n]);
                dstar[k].copy_from_slice(&drepr[(2 * k + 1) * n..(2 * k + 2) * n]);
            }
        }
    }

    let mut dh_story: Vec<Vec<f64>> = vec![vec![0.0; n]; cache.story.len()];
    if let (Some(ap), Some(att)) = (&model.attention, &cache.attention) {
        let story_h: Vec<&[f64]> = cache.story.iter().map(|s| s.h.as_slice()).collect();
        let ga = grads.attention.as_mut().expect("gradient has attention tensors");
        for k in 0..2 {
            let h_e = &cache.endings[k].last().expect("nonempty").h;
            let dh_e = attend_backward(ap, &att[k], &story_h, h_e, &dstar[k], &mut dh_story, ga);
            de[k].iter_mut().zip(&dh_e).for_each(|(a, b)| *a += b);
        }
    }

    let mut dc_story_last = vec![0.0; n];
    for k in 0..2 {
        let steps = &cache.endings[k];
        let mut dh_out = vec![vec![0.0; n]; steps.len()];
        *dh_out.last_mut().expect("nonempty") = std::mem::take(&mut de[k]);
        let (dh0, dc0) = encode_backward(&model.lstm, steps, &dh_out, &vec![0.0; n], &mut grads.lstm);
        let last = dh_story.last_mut().expect("nonempty");
        last.iter_mut().zip(&dh0).for_each(|(a, b)| *a += b);
        dc_story_last.iter_mut().zip(&dc0).for_each(|(a, b)| *a += b);
    }
    encode_backward(&model.lstm, &cache.story, &dh_story, &dc_story_last, &mut grads.lstm);
    loss(cache.probs, gold)
}

/// Exact gradients of the cross-entropy loss for one instance.
pub fn backward(model: &NeuralModel, cache: &ForwardCache<'_>, gold: Label) -> NeuralModel {
    let mut grads = model.zeros_like();
    backward_into(model, cache, gold, &mut grads);
    grads
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_is_zero() {
        let p = LstmParams::zeros(3, 4);
        let (h, c) = lstm_step(&p, &[1.0, -2.0, 0.5], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn step_shape_errors() {
        let p = LstmParams::zeros(3, 4);
        assert!(matches!(
            lstm_step(&p, &[1.0, 2.0], &[0.0; 4], &[0.0; 4]),
            Err(NeuralError::Shape { what: "input vector", expected: 3, found: 2 })
        ));
        assert!(lstm_step(&p, &[1.0; 3], &[0.0; 5], &[0.0; 4]).is_err());
        assert!(matches!(
            encode(&p, &[], &[0.0; 4], &[0.0; 4]),
            Err(NeuralError::EmptySequence(_))
        ));
    }

    #[test]
    fn zero_head_gives_even_odds() {
        let mut m = init_params(3, 4, 5, Variant::Combined);
        m.head.w_o = Matrix::zeros(2, 20);
        let x = [0.3, -0.1, 0.7, 0.2];
        let input = EmbeddedInstance {
            id: "z".into(),
            story: vec![&x, &x],
            endings: [vec![&x], vec![&x, &x]],
            gold: Some(Label::Ending1),
        };
        let (p, cache) = forward(&m, &input).unwrap();
        assert_eq!(p, [0.5, 0.5]);
        assert!((loss(p, Label::Ending1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(cache.representation().len(), 20);
    }

    #[test]
    fn init_biases_zero_and_bounded() {
        let m = init_params(11, 6, 7, Variant::Combined);
        assert!(m.lstm.bias.iter().all(|&b| b == 0.0));
        assert!(m.head.b_o.iter().all(|&b| b == 0.0));
        for (name, (rows, cols), values) in m.tensors() {
            if name.ends_with("bias") || name.ends_with("b_o") {
                continue;
            }
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            assert!(values.iter().all(|v| v.abs() <= bound), "{name}");
            assert!(values.iter().any(|&v| v != 0.0), "{name}");
        }
        assert_eq!(m, init_params(11, 6, 7, Variant::Combined));
    }
}
