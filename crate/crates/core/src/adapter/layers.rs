use crate::adapter::gate::{gate_weights, GateMode, GateParams};
use crate::error::{Error, Result};
use crate::tensor::{seeded_gaussian, Matrix, RngState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdapterKind {
    Lora,
    Hydra,
}

impl AdapterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::Lora => "lora",
            AdapterKind::Hydra => "hydra",
        }
    }
}

impl std::str::FromStr for AdapterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lora" => Ok(AdapterKind::Lora),
            "hydra" => Ok(AdapterKind::Hydra),
            other => Err(Error::Config(format!(
                "unknown adapter kind '{other}' (expected lora|hydra)"
            ))),
        }
    }
}

fn check_rank(d: usize, k: usize, rank: usize, alpha: f64) -> Result<()> {
    if rank == 0 || rank > d.min(k) {
        return Err(Error::param(format!(
            "rank {rank} must satisfy 1 <= rank <= min({d}, {k})"
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::param(format!("alpha must be finite, got {alpha}")));
    }
    Ok(())
}

/// `A ~ N(0, 1/√k)` entrywise.
fn init_down_projection(rank: usize, k: usize, rng: &mut RngState) -> Result<Matrix> {
    seeded_gaussian(rank, k, 0.0, 1.0 / (k as f64).sqrt(), rng)
}

/// Single-head adapter, `ΔW = (alpha/r)·B·A`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoraAdapter {
    pub a: Matrix,
    pub b: Matrix,
    pub alpha: f64,
}

impl LoraAdapter {
    /// Random `A`, zero `B`, so `ΔW = 0` at construction.
    pub fn new(d: usize, k: usize, rank: usize, alpha: f64, rng: &mut RngState) -> Result<Self> {
        check_rank(d, k, rank, alpha)?;
        Ok(Self {
            a: init_down_projection(rank, k, rng)?,
            b: Matrix::zeros(d, rank),
            alpha,
        })
    }

    pub fn from_parts(a: Matrix, b: Matrix, alpha: f64) -> Result<Self> {
        if b.cols() != a.rows() {
            return Err(Error::Shape {
                op: "lora_from_parts",
                lhs: b.shape(),
                rhs: a.shape(),
            });
        }
        check_rank(b.rows(), a.cols(), a.rows(), alpha)?;
        Ok(Self { a, b, alpha })
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    pub fn scale(&self) -> f64 {
        self.alpha / self.rank() as f64
    }
}

/// Shared `A`, `N` heads `Bᵢ`, gate producing `ωᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct HydraAdapter {
    pub a: Matrix,
    pub heads: Vec<Matrix>,
    pub gate: GateParams,
    pub alpha: f64,
}

impl HydraAdapter {
    pub fn new(
        d: usize,
        k: usize,
        rank: usize,
        num_heads: usize,
        alpha: f64,
        gate_mode: GateMode,
        rng: &mut RngState,
    ) -> Result<Self> {
        check_rank(d, k, rank, alpha)?;
        if num_heads == 0 {
            return Err(Error::param("adapter needs at least one head"));
        }
        Ok(Self {
            a: init_down_projection(rank, k, rng)?,
            heads: vec![Matrix::zeros(d, rank); num_heads],
            gate: GateParams::new(gate_mode, num_heads),
            alpha,
        })
    }

    pub fn from_parts(a: Matrix, heads: Vec<Matrix>, gate: GateParams, alpha: f64) -> Result<Self> {
        let Some(first) = heads.first() else {
            return Err(Error::param("adapter needs at least one head"));
        };
        for h in &heads {
            if h.cols() != a.rows() || h.shape() != first.shape() {
                return Err(Error::Shape {
                    op: "hydra_from_parts",
                    lhs: h.shape(),
                    rhs: a.shape(),
                });
            }
        }
        if gate.num_heads() != heads.len() {
            return Err(Error::param(format!(
                "gate has {} logits for {} heads",
                gate.num_heads(),
                heads.len()
            )));
        }
        check_rank(first.rows(), a.cols(), a.rows(), alpha)?;
        Ok(Self {
            a,
            heads,
            gate,
            alpha,
        })
    }

    /// The single-head, fixed-gate adapter equivalent to `lora`.
    pub fn from_lora(lora: &LoraAdapter) -> Self {
        Self {
            a: lora.a.clone(),
            heads: vec![lora.b.clone()],
            gate: GateParams::new(GateMode::FixedUniform, 1),
            alpha: lora.alpha,
        }
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn scale(&self) -> f64 {
        self.alpha / self.rank() as f64
    }

    /// `Σ ωᵢ·Bᵢ`.
    fn mixed_heads(&self, weights: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(self.heads[0].rows(), self.rank());
        for (w, b) in weights.iter().zip(&self.heads) {
            m.add_scaled(*w, b).expect("heads share a shape");
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Adapter {
    Lora(LoraAdapter),
    Hydra(HydraAdapter),
}

/// Gradients of a scalar loss with respect to one adapter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterGrads {
    pub a: Matrix,
    /// One entry per head; a single entry for plain LoRA.
    pub heads: Vec<Matrix>,
    /// Present only for learnable gates.
    pub logits: Option<Matrix>,
    /// Gradient with respect to the layer input (`W₀ᵀ·g` plus the delta path).
    pub input: Matrix,
}

impl AdapterGrads {
    /// Flattened in the same order as [`Adapter::params`].
    pub fn into_param_grads(self) -> Vec<Matrix> {
        let mut out = Vec::with_capacity(2 + self.heads.len());
        out.push(self.a);
        out.extend(self.heads);
        out.extend(self.logits);
        out
    }
}

impl Adapter {
    pub fn kind(&self) -> AdapterKind {
        match self {
            Adapter::Lora(_) => AdapterKind::Lora,
            Adapter::Hydra(_) => AdapterKind::Hydra,
        }
    }

    pub fn shared_a(&self) -> &Matrix {
        match self {
            Adapter::Lora(l) => &l.a,
            Adapter::Hydra(h) => &h.a,
        }
    }

    /// `(d, k)` of the host weight.
    pub fn host_shape(&self) -> (usize, usize) {
        match self {
            Adapter::Lora(l) => (l.b.rows(), l.a.cols()),
            Adapter::Hydra(h) => (h.heads[0].rows(), h.a.cols()),
        }
    }

    pub fn rank(&self) -> usize {
        self.shared_a().rows()
    }

    pub fn scale(&self) -> f64 {
        match self {
            Adapter::Lora(l) => l.scale(),
            Adapter::Hydra(h) => h.scale(),
        }
    }

    pub fn gate_weights(&self) -> Vec<f64> {
        match self {
            Adapter::Lora(_) => vec![1.0],
            Adapter::Hydra(h) => gate_weights(&h.gate),
        }
    }

    /// Trainable tensors: `A`, then each head, then gate logits when learnable.
    pub fn params(&self) -> Vec<&Matrix> {
        match self {
            Adapter::Lora(l) => vec![&l.a, &l.b],
            Adapter::Hydra(h) => {
                let mut out = vec![&h.a];
                out.extend(h.heads.iter());
                if h.gate.mode == GateMode::Learnable {
                    out.push(&h.gate.logits);
                }
                out
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Adapter::Lora(l) => vec![&mut l.a, &mut l.b],
            Adapter::Hydra(h) => {
                let mut out = vec![&mut h.a];
                out.extend(h.heads.iter_mut());
                if h.gate.mode == GateMode::Learnable {
                    out.push(&mut h.gate.logits);
                }
                out
            }
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            Adapter::Lora(_) => vec!["A".into(), "B".into()],
            Adapter::Hydra(h) => {
                let mut out = vec!["A".to_string()];
                out.extend((0..h.num_heads()).map(|i| format!("B{}", i + 1)));
                if h.gate.mode == GateMode::Learnable {
                    out.push("logits".into());
                }
                out
            }
        }
    }

    /// Dense `ΔW = scale·(Σ ωᵢ·Bᵢ)·A`.
    pub fn delta(&self) -> Matrix {
        match self {
            Adapter::Lora(l) => l.b.matmul(&l.a).expect("validated shapes").scale(l.scale()),
            Adapter::Hydra(h) => h
                .mixed_heads(&gate_weights(&h.gate))
                .matmul(&h.a)
                .expect("validated shapes")
                .scale(h.scale()),
        }
    }

    /// Low-rank delta path: `scale·Σ ωᵢ·Bᵢ·(A·x)`.
    pub fn forward_delta(&self, x: &Matrix) -> Result<Matrix> {
        let u = self.shared_a().matmul(x)?;
        Ok(match self {
            Adapter::Lora(l) => l.b.matmul(&u)?.scale(l.scale()),
            Adapter::Hydra(h) => {
                let weights = gate_weights(&h.gate);
                let mut acc = Matrix::zeros(h.heads[0].rows(), x.cols());
                for (w, b) in weights.iter().zip(&h.heads) {
                    acc.add_scaled(*w, &b.matmul(&u)?)?;
                }
                acc.scale(h.scale())
            }
        })
    }

    /// Gradients of the adapter parameters and of the delta-path input.
    fn backward_delta(&self, x: &Matrix, grad_out: &Matrix) -> Result<AdapterGrads> {
        let u = self.shared_a().matmul(x)?;
        if grad_out.shape() != (self.host_shape().0, x.cols()) {
            return Err(Error::Shape {
                op: "adapter_backward",
                lhs: grad_out.shape(),
                rhs: (self.host_shape().0, x.cols()),
            });
        }
        let scale = self.scale();
        // g·uᵀ is shared by every head gradient.
        let g_ut = grad_out.matmul_t(&u)?;
        match self {
            Adapter::Lora(l) => {
                let t = l.b.t_matmul(grad_out)?;
                Ok(AdapterGrads {
                    a: t.matmul_t(x)?.scale(scale),
                    heads: vec![g_ut.scale(scale)],
                    logits: None,
                    input: l.a.t_matmul(&t)?.scale(scale),
                })
            }
            Adapter::Hydra(h) => {
                let weights = gate_weights(&h.gate);
                let mixed = h.mixed_heads(&weights);
                let t = mixed.t_matmul(grad_out)?;
                let heads = weights.iter().map(|w| g_ut.scale(scale * w)).collect();
                let logits = match h.gate.mode {
                    GateMode::FixedUniform => None,
                    GateMode::Learnable => {
                        // dL/dωᵢ = scale·⟨g, Bᵢ·u⟩ = scale·⟨g·uᵀ, Bᵢ⟩, then the softmax Jacobian.
                        let d_omega: Vec<f64> = h
                            .heads
                            .iter()
                            .map(|b| g_ut.dot(b).map(|v| scale * v))
                            .collect::<Result<_>>()?;
                        let mean: f64 = weights.iter().zip(&d_omega).map(|(w, d)| w * d).sum();
                        let dl = weights
                            .iter()
                            .zip(&d_omega)
                            .map(|(w, d)| w * (d - mean))
                            .collect();
                        Some(Matrix::new(1, weights.len(), dl)?)
                    }
                };
                Ok(AdapterGrads {
                    a: t.matmul_t(x)?.scale(scale),
                    heads,
                    logits,
                    input: h.a.t_matmul(&t)?.scale(scale),
                })
            }
        }
    }
}

fn check_host(w0: &Matrix, adapter: &Adapter) -> Result<()> {
    if w0.shape() != adapter.host_shape() {
        return Err(Error::Shape {
            op: "adapter_host",
            lhs: w0.shape(),
            rhs: adapter.host_shape(),
        });
    }
    Ok(())
}

/// `W₀·x + ΔW·x`, with the delta path evaluated low-rank.
pub fn adapted_forward(x: &Matrix, w0: &Matrix, adapter: &Adapter) -> Result<Matrix> {
    check_host(w0, adapter)?;
    let mut h = w0.matmul(x)?;
    h.add_assign(&adapter.forward_delta(x)?)?;
    Ok(h)
}

/// `W₀ + ΔW` as a new matrix; `w0` is left untouched.
pub fn merge(w0: &Matrix, adapter: &Adapter) -> Result<Matrix> {
    check_host(w0, adapter)?;
    w0.add(&adapter.delta())
}

/// Backward pass of [`adapted_forward`] with `W₀` held fixed.
pub fn adapter_backward(
    x: &Matrix,
    w0: &Matrix,
    adapter: &Adapter,
    grad_out: &Matrix,
) -> Result<AdapterGrads> {
    check_host(w0, adapter)?;
    let mut grads = adapter.backward_delta(x, grad_out)?;
    let mut input = w0.t_matmul(grad_out)?;
    input.add_assign(&grads.input)?;
    grads.input = input;
    Ok(grads)
}
