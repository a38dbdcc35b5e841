use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moment buffers are allocated on the first step and
/// must keep the same layout afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        check_layout(params, grads)?;
        if self.first_moment.is_empty() {
            self.first_moment = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.second_moment = self.first_moment.clone();
        } else if self.first_moment.len() != grads.len()
            || self.first_moment.iter().zip(grads).any(|(m, g)| m.len() != g.len())
        {
            return Err(Error::Shape("optimizer state does not mirror the parameters".into()));
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one, eps) = (T::one(), T::lit(c.eps));
        let t = self.step as i32;
        let step_size = T::lit(c.lr / (1.0 - c.beta1.powi(t)));
        let v_correction = T::lit(1.0 / (1.0 - c.beta2.powi(t)));
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                p[i] = p[i] - step_size * m[i] / ((v[i] * v_correction).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Heavy-ball SGD, kept for optimizer ablations.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum<T> {
    pub lr: f64,
    pub momentum: f64,
    pub velocity: Vec<Vec<T>>,
}

impl<T: Scalar> SgdMomentum<T> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        check_layout(params, grads)?;
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
        }
        let (mu, lr) = (T::lit(self.momentum), T::lit(self.lr));
        for ((p, g), vel) in params.iter_mut().zip(grads).zip(self.velocity.iter_mut()) {
            if vel.len() != g.len() {
                return Err(Error::Shape("optimizer state does not mirror the parameters".into()));
            }
            for i in 0..p.len() {
                vel[i] = mu * vel[i] + g[i];
                p[i] = p[i] - lr * vel[i];
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer<T> {
    Adam(AdamState<T>),
    Sgd(SgdMomentum<T>),
}

impl<T: Scalar> Optimizer<T> {
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        match self {
            Optimizer::Adam(a) => a.step(params, grads),
            Optimizer::Sgd(s) => s.step(params, grads),
        }
    }
}

fn check_layout<T>(params: &[&mut [T]], grads: &[&[T]]) -> Result<()> {
    if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
        return Err(Error::Shape("gradients do not mirror the parameters".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0f64, -2.0, 3.0];
        let g = vec![0.0; 3];
        let mut adam = AdamState::new(AdamConfig::default());
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![0.0f64, 0.0];
        let g = vec![0.3, -7.0];
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut [&mut p], &[&g]).unwrap();
        // m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + eps)
        for (pi, gi) in p.iter().zip(&g) {
            let expect = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((pi - expect).abs() < 1e-15);
            assert!((pi.abs() - 1e-3).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut p = vec![0.5f32; 4];
            let mut adam = AdamState::new(AdamConfig::default());
            for k in 0..10 {
                let g: Vec<f32> = (0..4).map(|i| ((i + k) as f32).sin()).collect();
                adam.step(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        let bits = |v: Vec<f32>| v.into_iter().map(f32::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(run()), bits(run()));
        let mut adam = AdamState::<f64>::new(AdamConfig::default());
        assert!(adam.step(&mut [&mut [0.0; 2]], &[&[0.0; 3]]).is_err());
        adam.step(&mut [&mut [0.0; 2]], &[&[1.0; 2]]).unwrap();
        assert!(adam.step(&mut [&mut [0.0; 3]], &[&[1.0; 3]]).is_err());
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let mut p = vec![1.0f64];
        let mut sgd = SgdMomentum::new(0.1, 0.5);
        sgd.step(&mut [&mut p], &[&[1.0]]).unwrap();
        sgd.step(&mut [&mut p], &[&[1.0]]).unwrap();
        assert!((p[0] - (1.0 - 0.1 - 0.15)).abs() < 1e-15);
    }
}
