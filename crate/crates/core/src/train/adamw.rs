use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// One AdamW step with bias correction and decoupled weight decay:
///
/// ```text
/// m ← β₁m + (1−β₁)g
/// v ← β₂v + (1−β₂)g²
/// p ← p − lr·( m̂/(√v̂ + eps) + wd·p )
/// ```
///
/// `step` is 1-based. Non-finite gradients are rejected before anything is
/// written.
pub fn adamw_update(
    param: &mut Matrix,
    grad: &Matrix,
    m: &mut Matrix,
    v: &mut Matrix,
    step: u64,
    hp: &AdamWParams,
) -> Result<()> {
    for other in [grad, &*m, &*v] {
        if other.shape() != param.shape() {
            return Err(Error::Shape {
                op: "adamw_update",
                lhs: param.shape(),
                rhs: other.shape(),
            });
        }
    }
    if step == 0 {
        return Err(Error::param("AdamW step counter starts at 1"));
    }
    if !grad.is_finite() {
        return Err(Error::Training {
            step,
            msg: "non-finite gradient".into(),
        });
    }
    let bc1 = 1.0 - hp.beta1.powf(step as f64);
    let bc2 = 1.0 - hp.beta2.powf(step as f64);
    let p = param.data_mut().iter_mut();
    let it = p
        .zip(grad.data())
        .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
    for ((p, &g), (m, v)) in it {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= hp.lr * (m_hat / (v_hat.sqrt() + hp.eps) + hp.weight_decay * *p);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{seeded_gaussian, RngState};

    const DEFAULTS: AdamWParams = AdamWParams {
        lr: 2e-5,
        beta1: 0.9,
        beta2: 0.99,
        eps: 1e-8,
        weight_decay: 0.01,
    };

    fn one(v: f64) -> Matrix {
        Matrix::from_rows(&[[v]])
    }

    #[test]
    fn zero_grad_no_decay_is_fixed_point() {
        let hp = AdamWParams {
            weight_decay: 0.0,
            ..DEFAULTS
        };
        let (mut p, mut m, mut v) = (one(1.7), one(0.0), one(0.0));
        adamw_update(&mut p, &one(0.0), &mut m, &mut v, 1, &hp).unwrap();
        assert_eq!(p, one(1.7));
    }

    #[test]
    fn zero_grad_is_pure_decay() {
        let (mut p, mut m, mut v) = (one(3.0), one(0.0), one(0.0));
        adamw_update(&mut p, &one(0.0), &mut m, &mut v, 1, &DEFAULTS).unwrap();
        assert!((p.get(0, 0) - 3.0 * (1.0 - 2e-5 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn first_step_hand_value() {
        let (mut p, mut m, mut v) = (one(1.0), one(0.0), one(0.0));
        adamw_update(&mut p, &one(1.0), &mut m, &mut v, 1, &DEFAULTS).unwrap();
        let expected = 1.0 - 2e-5 * (1.0 / (1.0 + 1e-8) + 0.01);
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
        assert!((p.get(0, 0) - 0.999_979_8).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        let (mut p, mut m, mut v) = (one(1.0), one(0.0), one(0.0));
        let err = adamw_update(&mut p, &one(f64::NAN), &mut m, &mut v, 7, &DEFAULTS).unwrap_err();
        assert!(matches!(err, Error::Training { step: 7, .. }));
        assert_eq!(p, one(1.0));
    }

    /// Scalar reference written straight from the update equations.
    fn reference(p: f64, g: f64, m: f64, v: f64, t: i32, hp: &AdamWParams) -> (f64, f64, f64) {
        let m1 = hp.beta1 * m + (1.0 - hp.beta1) * g;
        let v1 = hp.beta2 * v + (1.0 - hp.beta2) * g.powi(2);
        let mh = m1 / (1.0 - hp.beta1.powi(t));
        let vh = v1 / (1.0 - hp.beta2.powi(t));
        (p - hp.lr * (mh / (vh.sqrt() + hp.eps) + hp.weight_decay * p), m1, v1)
    }

    #[test]
    fn matches_scalar_reference() {
        let hp = AdamWParams { lr: 1e-3, ..DEFAULTS };
        let mut rng = RngState::new(77);
        let mut p = seeded_gaussian(4, 5, 0.0, 1.0, &mut rng).unwrap();
        let mut m = Matrix::zeros(4, 5);
        let mut v = Matrix::zeros(4, 5);
        let (mut rp, mut rm, mut rv) = (p.clone(), m.clone(), v.clone());
        for step in 1..=25u64 {
            let g = seeded_gaussian(4, 5, 0.0, 1.0, &mut rng).unwrap();
            adamw_update(&mut p, &g, &mut m, &mut v, step, &hp).unwrap();
            for i in 0..g.len() {
                let (np, nm, nv) = reference(
                    rp.data()[i],
                    g.data()[i],
                    rm.data()[i],
                    rv.data()[i],
                    step as i32,
                    &hp,
                );
                rp.data_mut()[i] = np;
                rm.data_mut()[i] = nm;
                rv.data_mut()[i] = nv;
            }
            assert!(p.sub(&rp).unwrap().max_abs() <= 1e-12);
        }
    }
}
