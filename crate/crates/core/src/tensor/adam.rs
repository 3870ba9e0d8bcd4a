use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
}

impl<S: Scalar> AdamConfig<S> {
    pub fn with_lr(lr: S) -> Self {
        Self {
            lr,
            beta1: S::cast(0.9),
            beta2: S::cast(0.999),
            eps: S::cast(1e-8),
        }
    }
}

impl<S: Scalar> Default for AdamConfig<S> {
    fn default() -> Self {
        Self::with_lr(S::cast(1e-4))
    }
}

/// Bias-corrected Adam moments for an ordered list of parameters.
///
/// Buffers are allocated on the first step and must keep matching the
/// parameter shapes afterwards.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState<S> {
    first_moment: Vec<Vec<S>>,
    second_moment: Vec<Vec<S>>,
    step_count: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new() -> Self {
        Self {
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn moments(&self) -> (&[Vec<S>], &[Vec<S>]) {
        (&self.first_moment, &self.second_moment)
    }

    /// Restores a state captured with [`AdamState::moments`] and [`AdamState::step_count`].
    pub fn from_parts(first: Vec<Vec<S>>, second: Vec<Vec<S>>, step_count: u64) -> Result<Self> {
        if first.len() != second.len()
            || first.iter().zip(&second).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::dim("adam", "first/second moment layouts differ"));
        }
        Ok(Self {
            first_moment: first,
            second_moment: second,
            step_count,
        })
    }

    /// One in-place update of every parameter with its gradient.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<S>],
        grads: &[&[S]],
        cfg: &AdamConfig<S>,
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::dim(
                "adam_step",
                format!("{} parameters, {} gradients", params.len(), grads.len()),
            ));
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![S::zero(); p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len() {
            return Err(Error::dim(
                "adam_step",
                format!(
                    "state tracks {} parameters, got {}",
                    self.first_moment.len(),
                    params.len()
                ),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || self.first_moment[i].len() != p.len() {
                return Err(Error::dim(
                    "adam_step",
                    format!(
                        "parameter {i} {:?} with gradient of length {} (state {})",
                        p.shape(),
                        g.len(),
                        self.first_moment[i].len()
                    ),
                ));
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let one = S::one();
        let bc1 = one - cfg.beta1.powi(t);
        let bc2 = one - cfg.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                let gj = g[j];
                m[j] = cfg.beta1 * m[j] + (one - cfg.beta1) * gj;
                v[j] = cfg.beta2 * v[j] + (one - cfg.beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = Tensor::from_vec(&[3], vec![0.5, -2.0, 7.0]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new();
        for _ in 0..3 {
            st.step(&mut [&mut p], &[&[0.0; 3]], &AdamConfig::with_lr(0.1))
                .unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 3);
    }

    #[test]
    fn single_step_closed_form() {
        // m̂ = 1, v̂ = 1, so Δθ = −lr · 1/(1 + 1e-8)
        let mut p = Tensor::from_vec(&[1], vec![0.0f64]).unwrap();
        let mut st = AdamState::new();
        st.step(&mut [&mut p], &[&[1.0]], &AdamConfig::with_lr(0.1))
            .unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn two_steps_match_hand_unroll() {
        let cfg = AdamConfig::with_lr(0.01);
        let (g1, g2) = (0.5_f64, -1.5_f64);
        let mut p = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let mut st = AdamState::new();
        st.step(&mut [&mut p], &[&[g1]], &cfg).unwrap();
        st.step(&mut [&mut p], &[&[g2]], &cfg).unwrap();

        let (b1, b2, eps, lr) = (0.9_f64, 0.999_f64, 1e-8, 0.01);
        let mut theta = 1.0;
        let m1 = (1.0 - b1) * g1;
        let v1 = (1.0 - b2) * g1 * g1;
        theta -= lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
        let m2 = b1 * m1 + (1.0 - b1) * g2;
        let v2 = b2 * v1 + (1.0 - b2) * g2 * g2;
        theta -= lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
        assert!((p.data()[0] - theta).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = Tensor::<f64>::zeros(&[2]);
        let mut st = AdamState::new();
        let err = st.step(&mut [&mut p], &[&[1.0]], &AdamConfig::default());
        assert!(matches!(err, Err(Error::Dimension { .. })));
        assert_eq!(st.step_count(), 0);
    }
}
