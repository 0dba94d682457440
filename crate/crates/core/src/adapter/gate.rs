use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateMode {
    /// `ωᵢ = 1/N`, nothing trainable.
    FixedUniform,
    /// `ω = softmax(logits)`, logits trained with the heads.
    Learnable,
}

impl GateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GateMode::FixedUniform => "fixed",
            GateMode::Learnable => "learnable",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            GateMode::FixedUniform => 0,
            GateMode::Learnable => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(GateMode::FixedUniform),
            1 => Ok(GateMode::Learnable),
            other => Err(Error::Format(format!("unknown gate mode code {other}"))),
        }
    }
}

impl std::str::FromStr for GateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "fixed-uniform" => Ok(GateMode::FixedUniform),
            "learnable" | "learnable-logits" => Ok(GateMode::Learnable),
            other => Err(Error::Config(format!(
                "unknown gate mode '{other}' (expected fixed|learnable)"
            ))),
        }
    }
}

/// Input-independent head weights. Logits are stored as a `1 × N` matrix so
/// they can be optimised like any other parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub mode: GateMode,
    pub logits: Matrix,
}

impl GateParams {
    pub fn new(mode: GateMode, num_heads: usize) -> Self {
        Self {
            mode,
            logits: Matrix::zeros(1, num_heads),
        }
    }

    pub fn learnable_with_logits(logits: &[f64]) -> Self {
        Self {
            mode: GateMode::Learnable,
            logits: Matrix::new(1, logits.len(), logits.to_vec()).expect("1xN"),
        }
    }

    pub fn num_heads(&self) -> usize {
        self.logits.cols()
    }

    pub fn weights(&self) -> Vec<f64> {
        gate_weights(self)
    }
}

/// Head weights `ω`: nonnegative and summing to one.
pub fn gate_weights(gate: &GateParams) -> Vec<f64> {
    let n = gate.num_heads();
    match gate.mode {
        GateMode::FixedUniform => vec![1.0 / n as f64; n],
        GateMode::Learnable => softmax(gate.logits.data()),
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_uniform_four_heads() {
        let g = GateParams::new(GateMode::FixedUniform, 4);
        assert_eq!(gate_weights(&g), vec![0.25; 4]);
    }

    #[test]
    fn equal_logits_are_uniform() {
        let g = GateParams::new(GateMode::Learnable, 3);
        for w in gate_weights(&g) {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ln2_logits() {
        let g = GateParams::learnable_with_logits(&[2f64.ln(), 0.0]);
        let w = gate_weights(&g);
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn weights_on_simplex(logits in prop::collection::vec(-30.0f64..30.0, 1..12)) {
            let w = gate_weights(&GateParams::learnable_with_logits(&logits));
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
