//! A small transformer-style noise predictor over frame tokens.
//!
//! ```text
//! latent (F·C × B) ──tokens──▶ C × (B·F)
//!   input_proj + class embedding + timestep sinusoid + frame sinusoid
//!   × blocks: h += attn.o(softmax(q·kᵀ/√dm)·v)      (pre-norm, per sample)
//!             h += mlp.fc2(gelu(mlp.fc1(norm(h))))
//!   output_proj(norm(h)) ──latent──▶ F·C × B
//! ```
//!
//! All base weights are frozen after initialisation. Any linear layer may host
//! an adapter; backward only produces adapter gradients.

use sha2::{Digest, Sha256};

use crate::adapter::{adapted_forward, adapter_backward, Adapter};
use crate::error::{Error, Result};
use crate::tensor::{seeded_gaussian, Matrix, RngState};

const LN_EPS: f64 = 1e-5;
const SINUSOID_MAX_PERIOD: f64 = 10_000.0;
const BIAS_INIT_STD: f64 = 0.02;
const EMBED_INIT_STD: f64 = 0.5;

/// Adapter sites used when no placement is configured: every linear layer
/// inside the blocks.
pub const DEFAULT_PLACEMENT: &[&str] = &[
    "attn.q", "attn.k", "attn.v", "attn.o", "mlp.fc1", "mlp.fc2",
];

const BLOCK_SITES: [&str; 6] = [
    "attn.q", "attn.k", "attn.v", "attn.o", "mlp.fc1", "mlp.fc2",
];

/// Read-only wrapper for base parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Frozen<T>(T);

impl<T> Frozen<T> {
    pub fn new(value: T) -> Self {
        Self(value)
    }

    pub fn get(&self) -> &T {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserConfig {
    pub frames: usize,
    pub channels: usize,
    pub model_dim: usize,
    pub mlp_dim: usize,
    pub blocks: usize,
    pub num_classes: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            frames: 8,
            channels: 4,
            model_dim: 32,
            mlp_dim: 64,
            blocks: 2,
            num_classes: 4,
        }
    }
}

impl DenoiserConfig {
    pub fn latent_dim(&self) -> usize {
        self.frames * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("frames", self.frames),
            ("channels", self.channels),
            ("model_dim", self.model_dim),
            ("mlp_dim", self.mlp_dim),
            ("blocks", self.blocks),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::param(format!("denoiser {name} must be >= 1")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub name: String,
    pub weight: Frozen<Matrix>,
    pub bias: Frozen<Vec<f64>>,
    pub adapter: Option<Adapter>,
}

impl Linear {
    fn init(name: String, out_dim: usize, in_dim: usize, rng: &mut RngState) -> Result<Self> {
        let weight = seeded_gaussian(out_dim, in_dim, 0.0, 1.0 / (in_dim as f64).sqrt(), rng)?;
        let bias = seeded_gaussian(out_dim, 1, 0.0, BIAS_INIT_STD, rng)?.into_data();
        Ok(Self {
            name,
            weight: Frozen::new(weight),
            bias: Frozen::new(bias),
            adapter: None,
        })
    }

    /// `(out, in)`.
    pub fn shape(&self) -> (usize, usize) {
        self.weight.get().shape()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = match &self.adapter {
            Some(a) => adapted_forward(x, self.weight.get(), a)?,
            None => self.weight.get().matmul(x)?,
        };
        h.add_column_broadcast(self.bias.get())?;
        Ok(h)
    }

    /// Input gradient and, when an adapter is attached, its parameter gradients.
    fn backward(&self, x: &Matrix, grad_out: &Matrix) -> Result<(Matrix, Option<Vec<Matrix>>)> {
        match &self.adapter {
            Some(a) => {
                let mut grads = adapter_backward(x, self.weight.get(), a, grad_out)?;
                let input = std::mem::replace(&mut grads.input, Matrix::zeros(0, 0));
                Ok((input, Some(grads.into_param_grads())))
            }
            None => Ok((self.weight.get().t_matmul(grad_out)?, None)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Block {
    fn linears(&self) -> [&Linear; 6] {
        [&self.q, &self.k, &self.v, &self.o, &self.fc1, &self.fc2]
    }

    fn linears_mut(&mut self) -> [&mut Linear; 6] {
        [
            &mut self.q,
            &mut self.k,
            &mut self.v,
            &mut self.o,
            &mut self.fc1,
            &mut self.fc2,
        ]
    }
}

/// Denoiser parameters: frozen base weights plus optional adapters.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserParams {
    pub config: DenoiserConfig,
    /// `model_dim × num_classes`; column `c` conditions prompt class `c`.
    pub class_embedding: Frozen<Matrix>,
    pub input_proj: Linear,
    pub blocks: Vec<Block>,
    pub output_proj: Linear,
}

/// Gradients for every adapter-hosting layer, in canonical layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<(String, Vec<Matrix>)>,
}

impl NetworkGrads {
    /// Flattened in the order of [`DenoiserParams::trainable_params_mut`].
    pub fn into_flat(self) -> Vec<Matrix> {
        self.layers.into_iter().flat_map(|(_, g)| g).collect()
    }
}

struct NormCache {
    normed: Matrix,
    inv_std: Vec<f64>,
}

struct BlockCache {
    ln1: NormCache,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// Attention probabilities per sample, `F × F`, row = query.
    probs: Vec<Matrix>,
    attn: Matrix,
    ln2: NormCache,
    pre_act: Matrix,
    act: Matrix,
}

/// Activations retained by [`DenoiserParams::forward_cached`] for backward.
pub struct ForwardCache {
    batch: usize,
    tokens: Matrix,
    blocks: Vec<BlockCache>,
    final_ln: NormCache,
}

fn layer_norm(x: &Matrix) -> NormCache {
    let (rows, cols) = x.shape();
    let mut normed = Matrix::zeros(rows, cols);
    let mut inv_std = Vec::with_capacity(cols);
    for c in 0..cols {
        let mut mean = 0.0;
        for r in 0..rows {
            mean += x.get(r, c);
        }
        mean /= rows as f64;
        let mut var = 0.0;
        for r in 0..rows {
            var += (x.get(r, c) - mean).powi(2);
        }
        var /= rows as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        for r in 0..rows {
            normed.set(r, c, (x.get(r, c) - mean) * is);
        }
        inv_std.push(is);
    }
    NormCache { normed, inv_std }
}

fn layer_norm_backward(cache: &NormCache, grad: &Matrix) -> Matrix {
    let (rows, cols) = grad.shape();
    let n = rows as f64;
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let mut mean_g = 0.0;
        let mut mean_gn = 0.0;
        for r in 0..rows {
            mean_g += grad.get(r, c);
            mean_gn += grad.get(r, c) * cache.normed.get(r, c);
        }
        mean_g /= n;
        mean_gn /= n;
        for r in 0..rows {
            let v = cache.inv_std[c] * (grad.get(r, c) - mean_g - cache.normed.get(r, c) * mean_gn);
            out.set(r, c, v);
        }
    }
    out
}

const GELU_COEFF: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + GELU_COEFF * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let th = (c * (x + GELU_COEFF * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * c * (1.0 + 3.0 * GELU_COEFF * x * x)
}

/// Standard transformer sinusoid: first half `sin(p·ωᵢ)`, second half
/// `cos(p·ωᵢ)`, `ωᵢ = 10000^(−i/half)`. Odd dimensions leave the last entry 0.
fn sinusoid(position: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(SINUSOID_MAX_PERIOD.ln()) * i as f64 / half as f64).exp();
        out[i] = (position * freq).sin();
        out[i + half] = (position * freq).cos();
    }
    out
}

fn softmax_rows(m: &mut Matrix) {
    for r in 0..m.rows() {
        let max = m.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for c in 0..m.cols() {
            let e = (m.get(r, c) - max).exp();
            m.set(r, c, e);
            total += e;
        }
        for c in 0..m.cols() {
            m.set(r, c, m.get(r, c) / total);
        }
    }
}

impl DenoiserParams {
    /// Random base network without adapters. Draw order is fixed, so a given
    /// seed always produces the same base weights.
    pub fn new(config: DenoiserConfig, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        let dm = config.model_dim;
        let class_embedding = seeded_gaussian(dm, config.num_classes, 0.0, EMBED_INIT_STD, rng)?;
        let input_proj = Linear::init("input_proj".into(), dm, config.channels, rng)?;
        let mut blocks = Vec::with_capacity(config.blocks);
        for i in 0..config.blocks {
            let name = |site: &str| format!("blocks.{i}.{site}");
            blocks.push(Block {
                q: Linear::init(name("attn.q"), dm, dm, rng)?,
                k: Linear::init(name("attn.k"), dm, dm, rng)?,
                v: Linear::init(name("attn.v"), dm, dm, rng)?,
                o: Linear::init(name("attn.o"), dm, dm, rng)?,
                fc1: Linear::init(name("mlp.fc1"), config.mlp_dim, dm, rng)?,
                fc2: Linear::init(name("mlp.fc2"), dm, config.mlp_dim, rng)?,
            });
        }
        let output_proj = Linear::init("output_proj".into(), config.channels, dm, rng)?;
        Ok(Self {
            config,
            class_embedding: Frozen::new(class_embedding),
            input_proj,
            blocks,
            output_proj,
        })
    }

    /// Every linear layer in canonical order: input projection, each block's
    /// q/k/v/o/fc1/fc2, output projection.
    pub fn linears(&self) -> Vec<&Linear> {
        let mut out = vec![&self.input_proj];
        for b in &self.blocks {
            out.extend(b.linears());
        }
        out.push(&self.output_proj);
        out
    }

    pub fn linears_mut(&mut self) -> Vec<&mut Linear> {
        let mut out = vec![&mut self.input_proj];
        for b in &mut self.blocks {
            out.extend(b.linears_mut());
        }
        out.push(&mut self.output_proj);
        out
    }

    /// Layer names matched by a placement list. An entry matches a full layer
    /// name (`blocks.0.attn.q`, `input_proj`) or a block site (`attn.q`) in
    /// every block. `all` selects every linear layer.
    pub fn resolve_placement<S: AsRef<str>>(&self, placement: &[S]) -> Result<Vec<String>> {
        let names: Vec<String> = self.linears().iter().map(|l| l.name.clone()).collect();
        let mut selected = vec![false; names.len()];
        for entry in placement {
            let entry = entry.as_ref().trim();
            let mut hit = false;
            for (i, name) in names.iter().enumerate() {
                let site_match = BLOCK_SITES.contains(&entry)
                    && name.starts_with("blocks.")
                    && name.ends_with(&format!(".{entry}"));
                if entry == "all" || name == entry || site_match {
                    selected[i] = true;
                    hit = true;
                }
            }
            if !hit {
                return Err(Error::Config(format!(
                    "adapter placement '{entry}' matches no linear layer"
                )));
            }
        }
        Ok(names
            .into_iter()
            .zip(selected)
            .filter_map(|(n, s)| s.then_some(n))
            .collect())
    }

    /// Attaches one adapter per selected layer, built in canonical order by
    /// `make(out_dim, in_dim)`.
    pub fn attach_adapters<S: AsRef<str>>(
        &mut self,
        placement: &[S],
        mut make: impl FnMut(usize, usize) -> Result<Adapter>,
    ) -> Result<()> {
        let selected = self.resolve_placement(placement)?;
        for layer in self.linears_mut() {
            if selected.contains(&layer.name) {
                let (d, k) = layer.shape();
                let adapter = make(d, k)?;
                if adapter.host_shape() != (d, k) {
                    return Err(Error::Shape {
                        op: "attach_adapter",
                        lhs: (d, k),
                        rhs: adapter.host_shape(),
                    });
                }
                layer.adapter = Some(adapter);
            }
        }
        Ok(())
    }

    pub fn without_adapters(&self) -> Self {
        let mut out = self.clone();
        for l in out.linears_mut() {
            l.adapter = None;
        }
        out
    }

    pub fn adapters(&self) -> Vec<(&str, &Adapter)> {
        self.linears()
            .into_iter()
            .filter_map(|l| l.adapter.as_ref().map(|a| (l.name.as_str(), a)))
            .collect()
    }

    pub fn trainable_params(&self) -> Vec<&Matrix> {
        self.linears()
            .into_iter()
            .filter_map(|l| l.adapter.as_ref())
            .flat_map(|a| a.params())
            .collect()
    }

    pub fn trainable_params_mut(&mut self) -> Vec<&mut Matrix> {
        self.linears_mut()
            .into_iter()
            .filter_map(|l| l.adapter.as_mut())
            .flat_map(|a| a.params_mut())
            .collect()
    }

    /// `layer.param` labels aligned with [`Self::trainable_params`].
    pub fn trainable_labels(&self) -> Vec<String> {
        self.adapters()
            .into_iter()
            .flat_map(|(name, a)| {
                a.param_names()
                    .into_iter()
                    .map(move |p| format!("{name}.{p}"))
            })
            .collect()
    }

    /// Named base tensors (weights, biases, class embedding).
    pub fn base_tensors(&self) -> Vec<(String, Matrix)> {
        let mut out = vec![("class_embedding".to_string(), self.class_embedding.get().clone())];
        for l in self.linears() {
            out.push((format!("{}.weight", l.name), l.weight.get().clone()));
            out.push((
                format!("{}.bias", l.name),
                Matrix::column_vector(l.bias.get()),
            ));
        }
        out
    }

    /// SHA-256 over every base tensor's name, shape and little-endian entries.
    pub fn base_digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for (name, t) in self.base_tensors() {
            hasher.update(name.as_bytes());
            hasher.update(t.to_le_bytes());
        }
        hasher.finalize().into()
    }

    fn to_tokens(&self, z: &Matrix) -> Matrix {
        let (f_count, c_count) = (self.config.frames, self.config.channels);
        let batch = z.cols();
        let mut tok = Matrix::zeros(c_count, batch * f_count);
        for b in 0..batch {
            for f in 0..f_count {
                for c in 0..c_count {
                    tok.set(c, b * f_count + f, z.get(f * c_count + c, b));
                }
            }
        }
        tok
    }

    fn from_tokens(&self, tok: &Matrix, batch: usize) -> Matrix {
        let (f_count, c_count) = (self.config.frames, self.config.channels);
        let mut z = Matrix::zeros(f_count * c_count, batch);
        for b in 0..batch {
            for f in 0..f_count {
                for c in 0..c_count {
                    z.set(f * c_count + c, b, tok.get(c, b * f_count + f));
                }
            }
        }
        z
    }

    fn check_inputs(&self, z_t: &Matrix, ts: &[usize], classes: &[usize]) -> Result<()> {
        if z_t.rows() != self.config.latent_dim() {
            return Err(Error::Shape {
                op: "denoise_predict",
                lhs: z_t.shape(),
                rhs: (self.config.latent_dim(), z_t.cols()),
            });
        }
        if ts.len() != z_t.cols() || classes.len() != z_t.cols() {
            return Err(Error::param(format!(
                "batch of {} latents with {} timesteps and {} labels",
                z_t.cols(),
                ts.len(),
                classes.len()
            )));
        }
        if let Some(&bad) = classes.iter().find(|&&c| c >= self.config.num_classes) {
            return Err(Error::param(format!(
                "prompt class {bad} outside 0..{}",
                self.config.num_classes
            )));
        }
        Ok(())
    }

    /// Per-token conditioning: class embedding + timestep sinusoid + frame sinusoid.
    fn conditioning(&self, ts: &[usize], classes: &[usize]) -> Matrix {
        let dm = self.config.model_dim;
        let f_count = self.config.frames;
        let frame_emb: Vec<Vec<f64>> = (0..f_count).map(|f| sinusoid(f as f64, dm)).collect();
        let mut cond = Matrix::zeros(dm, ts.len() * f_count);
        for (b, (&t, &class)) in ts.iter().zip(classes).enumerate() {
            let time_emb = sinusoid(t as f64, dm);
            for (f, fe) in frame_emb.iter().enumerate() {
                let col = b * f_count + f;
                for r in 0..dm {
                    let v = self.class_embedding.get().get(r, class) + time_emb[r] + fe[r];
                    cond.set(r, col, v);
                }
            }
        }
        cond
    }

    fn attention(&self, q: &Matrix, k: &Matrix, v: &Matrix, batch: usize) -> Result<(Matrix, Vec<Matrix>)> {
        let f_count = self.config.frames;
        let inv_sqrt = 1.0 / (self.config.model_dim as f64).sqrt();
        let mut out = Matrix::zeros(v.rows(), v.cols());
        let mut probs = Vec::with_capacity(batch);
        for b in 0..batch {
            let (s, e) = (b * f_count, (b + 1) * f_count);
            let (qb, kb, vb) = (q.column_block(s, e), k.column_block(s, e), v.column_block(s, e));
            let mut p = qb.t_matmul(&kb)?.scale(inv_sqrt);
            softmax_rows(&mut p);
            out.set_column_block(s, &vb.matmul_t(&p)?);
            probs.push(p);
        }
        Ok((out, probs))
    }

    /// Forward pass keeping the activations needed by [`Self::backward`].
    pub fn forward_cached(
        &self,
        z_t: &Matrix,
        ts: &[usize],
        classes: &[usize],
    ) -> Result<(Matrix, ForwardCache)> {
        self.check_inputs(z_t, ts, classes)?;
        let batch = z_t.cols();
        let tokens = self.to_tokens(z_t);
        let mut h = self.input_proj.forward(&tokens)?;
        h.add_assign(&self.conditioning(ts, classes))?;

        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let ln1 = layer_norm(&h);
            let q = block.q.forward(&ln1.normed)?;
            let k = block.k.forward(&ln1.normed)?;
            let v = block.v.forward(&ln1.normed)?;
            let (attn, probs) = self.attention(&q, &k, &v, batch)?;
            h.add_assign(&block.o.forward(&attn)?)?;

            let ln2 = layer_norm(&h);
            let pre_act = block.fc1.forward(&ln2.normed)?;
            let act = pre_act.map(gelu);
            h.add_assign(&block.fc2.forward(&act)?)?;

            caches.push(BlockCache {
                ln1,
                q,
                k,
                v,
                probs,
                attn,
                ln2,
                pre_act,
                act,
            });
        }

        let final_ln = layer_norm(&h);
        let out_tokens = self.output_proj.forward(&final_ln.normed)?;
        let out = self.from_tokens(&out_tokens, batch);
        Ok((
            out,
            ForwardCache {
                batch,
                tokens,
                blocks: caches,
                final_ln,
            },
        ))
    }

    pub fn forward(&self, z_t: &Matrix, ts: &[usize], classes: &[usize]) -> Result<Matrix> {
        self.forward_cached(z_t, ts, classes).map(|(out, _)| out)
    }

    /// Adapter gradients of a scalar loss given `∂L/∂ε̂` (latent layout).
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Result<NetworkGrads> {
        if grad_out.shape() != (self.config.latent_dim(), cache.batch) {
            return Err(Error::Shape {
                op: "denoiser_backward",
                lhs: grad_out.shape(),
                rhs: (self.config.latent_dim(), cache.batch),
            });
        }
        let n_layers = 2 + 6 * self.blocks.len();
        let mut slots: Vec<Option<Vec<Matrix>>> = vec![None; n_layers];
        let f_count = self.config.frames;
        let inv_sqrt = 1.0 / (self.config.model_dim as f64).sqrt();

        let g_tokens = self.to_tokens(grad_out);
        let (g_norm, grads) = self.output_proj.backward(&cache.final_ln.normed, &g_tokens)?;
        slots[n_layers - 1] = grads;
        let mut dh = layer_norm_backward(&cache.final_ln, &g_norm);

        for (bi, (block, bc)) in self.blocks.iter().zip(&cache.blocks).enumerate().rev() {
            let base = 1 + 6 * bi;

            // MLP branch.
            let (d_act, g) = block.fc2.backward(&bc.act, &dh)?;
            slots[base + 5] = g;
            let d_pre = d_act.zip_map(&bc.pre_act, "gelu_backward", |d, x| d * gelu_grad(x))?;
            let (d_ln2, g) = block.fc1.backward(&bc.ln2.normed, &d_pre)?;
            slots[base + 4] = g;
            dh.add_assign(&layer_norm_backward(&bc.ln2, &d_ln2))?;

            // Attention branch.
            let (d_attn, g) = block.o.backward(&bc.attn, &dh)?;
            slots[base + 3] = g;
            let mut dq = Matrix::zeros(bc.q.rows(), bc.q.cols());
            let mut dk = Matrix::zeros(bc.k.rows(), bc.k.cols());
            let mut dv = Matrix::zeros(bc.v.rows(), bc.v.cols());
            for (b, p) in bc.probs.iter().enumerate() {
                let (s, e) = (b * f_count, (b + 1) * f_count);
                let da = d_attn.column_block(s, e);
                let (qb, kb, vb) = (
                    bc.q.column_block(s, e),
                    bc.k.column_block(s, e),
                    bc.v.column_block(s, e),
                );
                dv.set_column_block(s, &da.matmul(p)?);
                let dp = da.t_matmul(&vb)?;
                let mut ds = Matrix::zeros(f_count, f_count);
                for i in 0..f_count {
                    let row_dot: f64 = (0..f_count).map(|j| p.get(i, j) * dp.get(i, j)).sum();
                    for j in 0..f_count {
                        ds.set(i, j, p.get(i, j) * (dp.get(i, j) - row_dot) * inv_sqrt);
                    }
                }
                dq.set_column_block(s, &kb.matmul_t(&ds)?);
                dk.set_column_block(s, &qb.matmul(&ds)?);
            }
            let (mut d_ln1, g) = block.q.backward(&bc.ln1.normed, &dq)?;
            slots[base] = g;
            let (d_k_in, g) = block.k.backward(&bc.ln1.normed, &dk)?;
            slots[base + 1] = g;
            let (d_v_in, g) = block.v.backward(&bc.ln1.normed, &dv)?;
            slots[base + 2] = g;
            d_ln1.add_assign(&d_k_in)?;
            d_ln1.add_assign(&d_v_in)?;
            dh.add_assign(&layer_norm_backward(&bc.ln1, &d_ln1))?;
        }

        if self.input_proj.adapter.is_some() {
            let (_, g) = self.input_proj.backward(&cache.tokens, &dh)?;
            slots[0] = g;
        }

        let layers = self
            .linears()
            .into_iter()
            .zip(slots)
            .filter_map(|(l, g)| g.map(|g| (l.name.clone(), g)))
            .collect();
        Ok(NetworkGrads { layers })
    }
}

/// `ε_θ(z_t, t, c)` with one timestep and one prompt class per column.
pub fn denoise_predict(
    z_t: &Matrix,
    ts: &[usize],
    classes: &[usize],
    params: &DenoiserParams,
) -> Result<Matrix> {
    params.forward(z_t, ts, classes)
}

/// Mean over all entries of `(ε − ε̂)²`.
pub fn ldm_loss(eps: &Matrix, eps_hat: &Matrix) -> Result<f64> {
    let diff = eps.sub(eps_hat).map_err(|_| Error::Shape {
        op: "ldm_loss",
        lhs: eps.shape(),
        rhs: eps_hat.shape(),
    })?;
    Ok(diff.data().iter().map(|d| d * d).sum::<f64>() / diff.len() as f64)
}

/// `∂ ldm_loss / ∂ε̂ = 2(ε̂ − ε)/n`.
pub fn ldm_loss_grad(eps: &Matrix, eps_hat: &Matrix) -> Result<Matrix> {
    let n = eps.len() as f64;
    eps_hat.zip_map(eps, "ldm_loss_grad", |h, e| 2.0 * (h - e) / n)
}
