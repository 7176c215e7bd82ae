//! Minimal multilayer perceptron with hand-written backpropagation.
//!
//! One hidden tanh layer, scalar output. The nonconvex task families wrap
//! this: sinusoid regression reads the output directly (half mean squared
//! error), blob classification reads it as a logit (sigmoid cross entropy).
//! Gradients are exact analytic backprop; the verification suite checks them
//! against central finite differences.
//!
//! Parameter vectors are flat, laid out as `W1 (hidden × input, row-major) |
//! b1 (hidden) | w2 (hidden) | b2 (1)`.

/// Architecture of the scalar-output MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
}

/// Which scalar loss is attached to the network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `0.5 * mean((output - target)^2)` over the batch.
    HalfSquared,
    /// Mean sigmoid cross entropy of the output logit against 0/1 targets.
    Logistic,
}

impl MlpShape {
    /// Length of the flat parameter vector.
    pub fn param_count(&self) -> usize {
        self.hidden * (self.input + 2) + 1
    }

    #[inline]
    fn w1(&self, j: usize, i: usize) -> usize {
        j * self.input + i
    }

    #[inline]
    fn b1(&self, j: usize) -> usize {
        self.hidden * self.input + j
    }

    #[inline]
    fn w2(&self, j: usize) -> usize {
        self.hidden * (self.input + 1) + j
    }

    #[inline]
    fn b2(&self) -> usize {
        self.hidden * (self.input + 2)
    }

    /// Forward pass for one sample: returns (hidden activations, output).
    fn forward(&self, theta: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
        debug_assert_eq!(theta.len(), self.param_count());
        debug_assert_eq!(x.len(), self.input);
        let mut hidden = vec![0.0; self.hidden];
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut pre = theta[self.b1(j)];
            for (i, &xi) in x.iter().enumerate() {
                pre += theta[self.w1(j, i)] * xi;
            }
            *h = pre.tanh();
        }
        let mut z = theta[self.b2()];
        for (j, &h) in hidden.iter().enumerate() {
            z += theta[self.w2(j)] * h;
        }
        (hidden, z)
    }

    /// Network output for one sample (the logit, for classification).
    pub fn predict(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.forward(theta, x).1
    }

    /// Mean loss and its exact gradient over a batch of samples.
    ///
    /// `samples` yields `(input, target)` pairs; for [`LossKind::Logistic`]
    /// targets must be 0.0 or 1.0. Panics in debug builds on an empty batch.
    pub fn batch_loss_grad<'a, I>(
        &self,
        theta: &[f64],
        samples: I,
        kind: LossKind,
    ) -> (f64, Vec<f64>)
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut grad = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        let mut count = 0usize;
        for (x, target) in samples {
            let (hidden, z) = self.forward(theta, x);
            // dz = d(per-sample loss)/d(output); batch averaging happens at
            // the end so accumulation order is fixed.
            let dz = match kind {
                LossKind::HalfSquared => {
                    let diff = z - target;
                    loss += 0.5 * diff * diff;
                    diff
                }
                LossKind::Logistic => {
                    // Numerically stable softplus form of -log p(target | z).
                    loss += z.max(0.0) - z * target + (-z.abs()).exp().ln_1p();
                    sigmoid(z) - target
                }
            };
            grad[self.b2()] += dz;
            for j in 0..self.hidden {
                let h = hidden[j];
                grad[self.w2(j)] += dz * h;
                let da = dz * theta[self.w2(j)] * (1.0 - h * h);
                grad[self.b1(j)] += da;
                for (i, &xi) in x.iter().enumerate() {
                    grad[self.w1(j, i)] += da * xi;
                }
            }
            count += 1;
        }
        debug_assert!(count > 0, "batch_loss_grad called with an empty batch");
        let inv = 1.0 / count as f64;
        for g in &mut grad {
            *g *= inv;
        }
        (loss * inv, grad)
    }

    /// Fraction of misclassified samples under the sign of the output logit.
    pub fn batch_zero_one_error<'a, I>(&self, theta: &[f64], samples: I) -> f64
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut wrong = 0usize;
        let mut count = 0usize;
        for (x, target) in samples {
            let predicted = if self.predict(theta, x) > 0.0 {
                1.0
            } else {
                0.0
            };
            if predicted != target {
                wrong += 1;
            }
            count += 1;
        }
        debug_assert!(count > 0, "batch_zero_one_error called with an empty batch");
        wrong as f64 / count as f64
    }
}

/// Logistic sigmoid, evaluated stably for large |z|.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
