//! Cylinder functionals `U(mu) = V(int a_1 dmu, ..., int a_m dmu)` and their
//! Lions derivative and generator terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{QuantileState, StepMeasure};

/// Inner test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Basis {
    Sin { k: f64 },
    Cos { k: f64 },
    /// `tanh(x / c)`.
    Tanh { c: f64 },
    /// `x`; unbounded, only accepted when the functional allows it.
    Identity,
}

impl Basis {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Basis::Sin { k } => (k * x).sin(),
            Basis::Cos { k } => (k * x).cos(),
            Basis::Tanh { c } => (x / c).tanh(),
            Basis::Identity => x,
        }
    }

    pub fn d1(self, x: f64) -> f64 {
        match self {
            Basis::Sin { k } => k * (k * x).cos(),
            Basis::Cos { k } => -k * (k * x).sin(),
            Basis::Tanh { c } => {
                let t = (x / c).tanh();
                (1.0 - t * t) / c
            }
            Basis::Identity => 1.0,
        }
    }

    pub fn d2(self, x: f64) -> f64 {
        match self {
            Basis::Sin { k } => -k * k * (k * x).sin(),
            Basis::Cos { k } => -k * k * (k * x).cos(),
            Basis::Tanh { c } => {
                let t = (x / c).tanh();
                -2.0 * t * (1.0 - t * t) / (c * c)
            }
            Basis::Identity => 0.0,
        }
    }

    pub fn is_bounded(self) -> bool {
        !matches!(self, Basis::Identity)
    }

    fn validate(self) -> Result<()> {
        let ok = match self {
            Basis::Sin { k } | Basis::Cos { k } => k.is_finite(),
            Basis::Tanh { c } => c.is_finite() && c != 0.0,
            Basis::Identity => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid basis parameters: {self:?}")))
        }
    }
}

/// Outer function `V: R^m -> R`, at most quadratic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outer {
    Constant { value: f64 },
    /// `b . x`.
    Linear { coeffs: Vec<f64> },
    /// `c + b . x + x^T A x / 2` with `A` symmetric, row-major.
    Quadratic { constant: f64, linear: Vec<f64>, hessian: Vec<f64> },
}

impl Outer {
    fn dims_ok(&self, m: usize) -> bool {
        match self {
            Outer::Constant { .. } => true,
            Outer::Linear { coeffs } => coeffs.len() == m,
            Outer::Quadratic { linear, hessian, .. } => linear.len() == m && hessian.len() == m * m,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Outer::Constant { value } => *value,
            Outer::Linear { coeffs } => coeffs.iter().zip(x).map(|(b, v)| b * v).sum(),
            Outer::Quadratic { constant, linear, hessian } => {
                let m = x.len();
                let mut q = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        q += x[i] * hessian[i * m + j] * x[j];
                    }
                }
                constant + linear.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + 0.5 * q
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let m = x.len();
        match self {
            Outer::Constant { .. } => vec![0.0; m],
            Outer::Linear { coeffs } => coeffs.clone(),
            Outer::Quadratic { linear, hessian, .. } => (0..m)
                .map(|i| linear[i] + (0..m).map(|j| hessian[i * m + j] * x[j]).sum::<f64>())
                .collect(),
        }
    }

    /// Row-major `m x m`.
    pub fn hessian(&self, m: usize) -> Vec<f64> {
        match self {
            Outer::Quadratic { hessian, .. } => hessian.clone(),
            _ => vec![0.0; m * m],
        }
    }

    /// `c V`.
    pub fn scaled(&self, c: f64) -> Outer {
        let s = |v: &Vec<f64>| v.iter().map(|x| c * x).collect();
        match self {
            Outer::Constant { value } => Outer::Constant { value: c * value },
            Outer::Linear { coeffs } => Outer::Linear { coeffs: s(coeffs) },
            Outer::Quadratic { constant, linear, hessian } => {
                Outer::Quadratic { constant: c * constant, linear: s(linear), hessian: s(hessian) }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunctional {
    pub outer: Outer,
    pub basis: Vec<Basis>,
    /// Whether unbounded inner functions were admitted.
    pub unbounded: bool,
}

impl CylinderFunctional {
    /// Rejects unbounded inner functions.
    pub fn new(outer: Outer, basis: Vec<Basis>) -> Result<Self> {
        Self::build(outer, basis, false)
    }

    /// Admits unbounded inner functions such as the identity.
    pub fn new_unbounded(outer: Outer, basis: Vec<Basis>) -> Result<Self> {
        Self::build(outer, basis, true)
    }

    fn build(outer: Outer, basis: Vec<Basis>, allow_unbounded: bool) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Config("cylinder functional needs at least one inner function".into()));
        }
        for b in &basis {
            b.validate()?;
        }
        if !outer.dims_ok(basis.len()) {
            return Err(Error::Config(format!("outer function does not take {} arguments", basis.len())));
        }
        let unbounded = basis.iter().any(|b| !b.is_bounded());
        if unbounded && !allow_unbounded {
            return Err(Error::Config("unbounded inner function requires the unbounded flag".into()));
        }
        Ok(CylinderFunctional { outer, basis, unbounded })
    }

    /// `U(mu) = int x dmu`.
    pub fn mean() -> Self {
        Self::new_unbounded(Outer::Linear { coeffs: vec![1.0] }, vec![Basis::Identity]).expect("valid")
    }

    /// `U(mu) = int sin dmu`.
    pub fn sin_moment() -> Self {
        Self::new(Outer::Linear { coeffs: vec![1.0] }, vec![Basis::Sin { k: 1.0 }]).expect("valid")
    }

    pub fn arity(&self) -> usize {
        self.basis.len()
    }

    fn moments_measure(&self, mu: &StepMeasure) -> Vec<f64> {
        self.basis.iter().map(|b| mu.integrate(|x| b.eval(x))).collect()
    }

    fn moments_state(&self, q: &QuantileState) -> Vec<f64> {
        let du = q.du();
        self.basis.iter().map(|b| q.values().iter().map(|&y| b.eval(y)).sum::<f64>() * du).collect()
    }

    pub fn evaluate(&self, mu: &StepMeasure) -> f64 {
        self.outer.value(&self.moments_measure(mu))
    }

    /// `U` of the pushforward of Lebesgue measure by `q`.
    pub fn evaluate_state(&self, q: &QuantileState) -> f64 {
        self.outer.value(&self.moments_state(q))
    }

    /// `d_mu U(mu)(v) = sum_i d_i V(int a dmu) a_i'(v)`.
    pub fn lions_grad(&self, mu: &StepMeasure, v: f64) -> f64 {
        let g = self.outer.gradient(&self.moments_measure(mu));
        self.basis.iter().zip(&g).map(|(b, gi)| gi * b.d1(v)).sum()
    }

    /// `d_mu U(mu_q)(y_i)` for every cell of `q`.
    pub fn lions_grad_state(&self, q: &QuantileState) -> Vec<f64> {
        let g = self.outer.gradient(&self.moments_state(q));
        q.values()
            .iter()
            .map(|&y| self.basis.iter().zip(&g).map(|(b, gi)| gi * b.d1(y)).sum())
            .collect()
    }

    /// `(L1, L2)` with
    /// `L1 = sum_i d_i V int a_i''(y)/m du` and
    /// `L2 = sum_ij d_ij V int a_i'(y) a_j'(y) du`.
    pub fn generators(&self, q: &QuantileState, mass: &[f64]) -> Result<(f64, f64)> {
        if mass.len() != q.len() {
            return Err(Error::Usage("mass field does not match the state".into()));
        }
        if let Some(i) = mass.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Domain(format!("mass must be positive, got {} at cell {i}", mass[i])));
        }
        let moments = self.moments_state(q);
        let g = self.outer.gradient(&moments);
        let n = self.arity();
        let h = self.outer.hessian(n);
        let du = q.du();
        let mut l1 = 0.0;
        for (b, gi) in self.basis.iter().zip(&g) {
            if *gi != 0.0 {
                l1 += gi * q.values().iter().zip(mass).map(|(&y, m)| b.d2(y) / m).sum::<f64>() * du;
            }
        }
        let mut l2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let hij = h[i * n + j];
                if hij != 0.0 {
                    let (bi, bj) = (self.basis[i], self.basis[j]);
                    l2 += hij * q.values().iter().map(|&y| bi.d1(y) * bj.d1(y)).sum::<f64>() * du;
                }
            }
        }
        Ok((l1, l2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_bases() -> Vec<Basis> {
        vec![Basis::Sin { k: 1.0 }, Basis::Sin { k: 2.5 }, Basis::Cos { k: 1.5 }, Basis::Tanh { c: 0.7 }]
    }

    #[test]
    fn bases_are_bounded_on_sweep() {
        for b in all_bases() {
            let mut sup = [0.0f64; 3];
            for k in 0..=20_000 {
                let x = -10.0 + 20.0 * k as f64 / 20_000.0;
                sup[0] = sup[0].max(b.eval(x).abs());
                sup[1] = sup[1].max(b.d1(x).abs());
                sup[2] = sup[2].max(b.d2(x).abs());
            }
            assert!(sup.iter().all(|s| s.is_finite() && *s < 10.0), "{b:?}: {sup:?}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for b in all_bases().into_iter().chain([Basis::Identity]) {
            for _ in 0..200 {
                let x = rng.random_range(-5.0..5.0);
                let fd1 = (b.eval(x + h) - b.eval(x - h)) / (2.0 * h);
                let fd2 = (b.d1(x + h) - b.d1(x - h)) / (2.0 * h);
                assert!((fd1 - b.d1(x)).abs() <= 1e-6 * b.d1(x).abs().max(1.0), "{b:?} at {x}");
                assert!((fd2 - b.d2(x)).abs() <= 1e-6 * b.d2(x).abs().max(1.0), "{b:?} at {x}");
            }
        }
    }

    #[test]
    fn unbounded_needs_flag() {
        assert!(CylinderFunctional::new(Outer::Linear { coeffs: vec![1.0] }, vec![Basis::Identity]).is_err());
        assert!(CylinderFunctional::mean().unbounded);
        assert!(CylinderFunctional::new(Outer::Linear { coeffs: vec![1.0, 2.0] }, vec![Basis::Sin { k: 1.0 }]).is_err());
    }

    #[test]
    fn constant_outer_has_zero_gradient() {
        let u = CylinderFunctional::new(Outer::Constant { value: 3.0 }, vec![Basis::Sin { k: 1.0 }]).unwrap();
        let mu = StepMeasure::empirical(&[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(u.evaluate(&mu), 3.0);
        for v in [-1.0, 0.0, 2.0] {
            assert_eq!(u.lions_grad(&mu, v), 0.0);
        }
    }

    #[test]
    fn sin_moment_at_dirac_zero() {
        let u = CylinderFunctional::sin_moment();
        let mu = StepMeasure::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(u.evaluate(&mu), 0.0);
        for v in [-2.0, 0.3, 1.7] {
            assert_eq!(u.lions_grad(&mu, v), v.cos());
        }
    }

    #[test]
    fn lions_grad_matches_particle_perturbation() {
        let u = CylinderFunctional::new(
            Outer::Quadratic { constant: 0.3, linear: vec![1.0, -0.5], hessian: vec![2.0, 0.7, 0.7, -1.0] },
            vec![Basis::Sin { k: 1.3 }, Basis::Tanh { c: 0.8 }],
        )
        .unwrap();
        let atoms = vec![-0.7, 0.1, 0.4, 1.2];
        let weights = vec![0.1, 0.4, 0.3, 0.2];
        let mu = StepMeasure::new(atoms.clone(), weights.clone()).unwrap();
        let h = 1e-6;
        for k in 0..atoms.len() {
            let shift = |d: f64| {
                let mut a = atoms.clone();
                a[k] += d;
                StepMeasure::new(a, weights.clone()).unwrap()
            };
            let fd = (u.evaluate(&shift(h)) - u.evaluate(&shift(-h))) / (2.0 * h);
            let formula = weights[k] * u.lions_grad(&mu, atoms[k]);
            assert!((fd - formula).abs() < 1e-5, "atom {k}: {fd} vs {formula}");
        }
    }

    #[test]
    fn linear_functional_generators_vanish() {
        let u = CylinderFunctional::mean();
        let q = QuantileState::new(vec![0.1, 0.1, 0.5, 0.9]).unwrap();
        let (l1, l2) = u.generators(&q, &q.mass_field()).unwrap();
        assert_eq!((l1, l2), (0.0, 0.0));
    }

    #[test]
    fn single_block_sin_generator() {
        let u = CylinderFunctional::sin_moment();
        let x = 0.37;
        let q = QuantileState::new(vec![x; 6]).unwrap();
        let (l1, l2) = u.generators(&q, &q.mass_field()).unwrap();
        assert!((l1 + x.sin()).abs() < 1e-15);
        assert_eq!(l2, 0.0);
    }

    #[test]
    fn quadratic_l2_matches_double_sum() {
        let h = vec![1.5, -0.4, 0.2, -0.4, 0.8, 0.3, 0.2, 0.3, -2.0];
        let basis = vec![Basis::Sin { k: 1.0 }, Basis::Cos { k: 2.0 }, Basis::Tanh { c: 0.5 }];
        let u = CylinderFunctional::new(
            Outer::Quadratic { constant: 0.0, linear: vec![0.1, 0.2, 0.3], hessian: h.clone() },
            basis.clone(),
        )
        .unwrap();
        let q = QuantileState::new(vec![-0.4, -0.4, 0.0, 0.2, 0.2, 0.2, 0.9, 1.1]).unwrap();
        let mass = q.mass_field();
        let (_, l2) = u.generators(&q, &mass).unwrap();
        // int_i int_j over (u, v) of d_i a(y(u)) d_j a(y(v)) 1{same}/m: collapses to
        // the single integral; recompute as an explicit double sum
        let du = q.du();
        let y = q.values();
        let mut brute = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for p in 0..y.len() {
                    for r in 0..y.len() {
                        if y[p] == y[r] {
                            brute += h[a * 3 + b] * basis[a].d1(y[p]) * basis[b].d1(y[r]) / mass[p] * du * du;
                        }
                    }
                }
            }
        }
        assert!((l2 - brute).abs() < 1e-12, "{l2} vs {brute}");
    }

    #[test]
    fn zero_mass_is_a_domain_error() {
        let u = CylinderFunctional::sin_moment();
        let q = QuantileState::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(u.generators(&q, &[0.5, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn refinement_invariance_and_linearity() {
        let u = CylinderFunctional::new(Outer::Linear { coeffs: vec![2.0, -1.0] }, vec![Basis::Sin { k: 1.0 }, Basis::Cos { k: 1.0 }])
            .unwrap();
        let coarse = QuantileState::new(vec![0.2, 0.7]).unwrap();
        let fine = QuantileState::new(vec![0.2, 0.2, 0.7, 0.7]).unwrap();
        assert_eq!(u.evaluate(&coarse.to_measure()), u.evaluate(&fine.to_measure()));
        assert!((u.evaluate_state(&coarse) - u.evaluate_state(&fine)).abs() < 1e-15);
        let (a1, a2) = u.generators(&fine, &fine.mass_field()).unwrap();
        for c in [2.0, 0.5, -4.0] {
            let uc = CylinderFunctional { outer: u.outer.scaled(c), ..u.clone() };
            assert_eq!(uc.generators(&fine, &fine.mass_field()).unwrap(), (c * a1, c * a2));
        }
        let u3 = CylinderFunctional { outer: u.outer.scaled(3.0), ..u.clone() };
        let (b1, _) = u3.generators(&fine, &fine.mass_field()).unwrap();
        assert!((b1 - 3.0 * a1).abs() < 1e-14);
    }
}
