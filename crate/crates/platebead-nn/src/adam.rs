//! Adam optimizer with bias correction over a [`ParamStore`].

use ndarray::ArrayD;

use crate::params::ParamStore;

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

/// What happened during one optimizer step.
#[derive(Debug, Default)]
pub struct StepReport {
    /// Parameters whose gradient contained NaN/inf and were left untouched.
    pub skipped: Vec<String>,
}

impl Adam {
    pub fn new(lr: f64, store: &ParamStore) -> Self {
        let m = store.iter().map(|(_, v)| ArrayD::zeros(v.raw_dim())).collect();
        let v = store.iter().map(|(_, w)| ArrayD::zeros(w.raw_dim())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m, v }
    }

    /// Apply one update. `grads` is aligned with the store order; `None`
    /// entries and non-finite gradients leave the parameter (and its moment
    /// estimates) untouched, the latter being reported.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<ArrayD<f64>>]) -> StepReport {
        assert_eq!(grads.len(), store.len(), "gradient slots vs parameters");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let mut report = StepReport::default();
        for (i, grad) in grads.iter().enumerate() {
            let Some(g) = grad else { continue };
            let (name, p) = store.at_mut(i);
            if g.iter().any(|v| !v.is_finite()) {
                report.skipped.push(name.to_string());
                continue;
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for ((pv, gv), (mv, vv)) in
                p.iter_mut().zip(g.iter()).zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    fn scalar_store(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("x", ArrayD::from_elem(IxDyn(&[1]), x));
        s
    }

    #[test]
    fn quadratic_converges_to_the_minimum() {
        // minimize (x - 3)^2 from x = 0
        let mut store = scalar_store(0.0);
        let mut opt = Adam::new(0.1, &store);
        for _ in 0..500 {
            let x = store.get("x")[[0]];
            let g = ArrayD::from_elem(IxDyn(&[1]), 2.0 * (x - 3.0));
            opt.step(&mut store, &[Some(g)]);
        }
        let x = store.get("x")[[0]];
        assert!((x - 3.0).abs() < 1e-2, "converged to {x}");
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut store = scalar_store(1.5);
        let mut opt = Adam::new(0.1, &store);
        let r = opt.step(&mut store, &[Some(ArrayD::zeros(IxDyn(&[1])))]);
        assert!(r.skipped.is_empty());
        assert_eq!(store.get("x")[[0]], 1.5);
        let r = opt.step(&mut store, &[None]);
        assert!(r.skipped.is_empty());
        assert_eq!(store.get("x")[[0]], 1.5);
    }

    #[test]
    fn non_finite_gradient_is_skipped_and_reported() {
        let mut store = scalar_store(1.5);
        let mut opt = Adam::new(0.1, &store);
        let r = opt.step(&mut store, &[Some(ArrayD::from_elem(IxDyn(&[1]), f64::NAN))]);
        assert_eq!(r.skipped, ["x"]);
        assert_eq!(store.get("x")[[0]], 1.5);
        // a following finite step still works
        let r = opt.step(&mut store, &[Some(ArrayD::from_elem(IxDyn(&[1]), 1.0))]);
        assert!(r.skipped.is_empty());
        assert!(store.get("x")[[0]] < 1.5);
    }
}
