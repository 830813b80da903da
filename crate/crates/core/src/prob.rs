//! Per-class score vectors and their log-space twins.
//!
//! A [`ProbabilityVector`] is a categorical distribution over the registry
//! classes (a CNN score vector after soft-max). A [`LogProbabilityVector`]
//! stores the same distribution as natural logs, the representation the voxel
//! map fuses in. Conversions clamp zeros to a configurable epsilon so the log
//! form is always finite.

use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::scalar::Real;

/// Sum tolerance for a valid probability vector.
pub const PROB_SUM_TOL: f64 = 1e-6;

/// Default clamp applied to zero probabilities before taking logs.
pub const DEFAULT_EPSILON_PROB: f64 = 1e-9;

/// A categorical distribution over `C` classes: values in `[0,1]`, sum `1 ± 1e-6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProbabilityVector<T: Real> {
    values: Vec<T>,
}

/// The log-space form: finite entries `≤ 0`, `logsumexp == 0 ± 1e-6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LogProbabilityVector<T: Real> {
    values: Vec<T>,
}

/// Index of the maximum entry; first index wins ties.
pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `log Σ exp(x_i)` via max subtraction; `-inf` for an empty slice.
pub fn log_sum_exp<T: Real>(values: &[T]) -> T {
    let mut m = T::neg_infinity();
    for &v in values {
        if v > m {
            m = v;
        }
    }
    if m == T::neg_infinity() {
        return m;
    }
    let sum: T = values.iter().map(|&v| (v - m).exp()).sum();
    m + sum.ln()
}

/// Divide by the sum, but only when the sum is meaningfully off 1.
///
/// The skip keeps analytically-exact paths bitwise (boundary weights 0/1
/// reproduce their input exactly); the threshold scales with the scalar's
/// epsilon so the same code is exact for f32 and f64.
pub(crate) fn renormalize_sum<T: Real>(values: &mut [T]) {
    let sum: T = values.iter().copied().sum();
    let tol = T::epsilon() * T::from_usize(8 * values.len().max(1)).unwrap();
    if (sum - T::one()).abs() <= tol {
        return;
    }
    for v in values.iter_mut() {
        *v = *v / sum;
    }
}

impl<T: Real> ProbabilityVector<T> {
    /// Validating constructor.
    pub fn new(values: Vec<T>) -> Result<Self> {
        let v = Self { values };
        v.validate()?;
        Ok(v)
    }

    /// Construct from raw non-negative masses, normalizing to sum 1.
    pub fn from_masses(mut values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(FusionError::InvalidProbability("empty vector".into()));
        }
        let mut sum = T::zero();
        for &v in &values {
            if !v.is_finite() || v < T::zero() {
                return Err(FusionError::InvalidProbability(format!(
                    "mass {} is not a finite non-negative value",
                    v
                )));
            }
            sum += v;
        }
        if sum <= T::zero() {
            return Err(FusionError::InvalidProbability("all masses zero".into()));
        }
        for v in values.iter_mut() {
            *v = *v / sum;
        }
        Ok(Self { values })
    }

    /// Uniform distribution over `count` classes.
    pub fn uniform(count: usize) -> Self {
        let v = T::one() / T::from_usize(count).unwrap();
        Self {
            values: vec![v; count],
        }
    }

    /// One-hot with `epsilon` mass on the other classes, renormalized.
    pub fn one_hot_smoothed(class: usize, count: usize, epsilon: T) -> Self {
        let mut values = vec![epsilon; count];
        values[class] = T::one();
        let sum: T = values.iter().copied().sum();
        for v in values.iter_mut() {
            *v = *v / sum;
        }
        Self { values }
    }

    /// Exact one-hot (valid: values in range, sum exactly 1).
    pub fn one_hot(class: usize, count: usize) -> Self {
        let mut values = vec![T::zero(); count];
        values[class] = T::one();
        Self { values }
    }

    /// Internal constructor for operations that preserve validity analytically.
    pub(crate) fn from_normalized_unchecked(values: Vec<T>) -> Self {
        let v = Self { values };
        debug_assert!(v.validate().is_ok(), "fusion output must stay valid");
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(FusionError::InvalidProbability("empty vector".into()));
        }
        let mut sum = T::zero();
        for &v in &self.values {
            if !v.is_finite() || v < T::zero() || v > T::one() {
                return Err(FusionError::InvalidProbability(format!(
                    "value {} outside [0,1]",
                    v
                )));
            }
            sum += v;
        }
        let tol = T::from_f64_lit(PROB_SUM_TOL);
        if (sum - T::one()).abs() > tol {
            return Err(FusionError::InvalidProbability(format!(
                "sum {} deviates from 1 by more than {}",
                sum, tol
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

impl<T: Real> LogProbabilityVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        let v = Self { values };
        v.validate()?;
        Ok(v)
    }

    /// Uniform prior: every entry `-log C`.
    pub fn uniform(count: usize) -> Self {
        let v = -(T::from_usize(count).unwrap().ln());
        Self {
            values: vec![v; count],
        }
    }

    pub(crate) fn from_normalized_unchecked(values: Vec<T>) -> Self {
        let v = Self { values };
        debug_assert!(v.validate().is_ok(), "log fusion output must stay valid");
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(FusionError::InvalidProbability("empty log vector".into()));
        }
        for &v in &self.values {
            if !v.is_finite() {
                return Err(FusionError::InvalidProbability(format!(
                    "log value {} is not finite",
                    v
                )));
            }
        }
        let lse = log_sum_exp(&self.values);
        let tol = T::from_f64_lit(PROB_SUM_TOL);
        if lse.abs() > tol {
            return Err(FusionError::InvalidProbability(format!(
                "logsumexp {} deviates from 0 by more than {}",
                lse, tol
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

/// Soft-max with max subtraction for overflow safety.
///
/// Order-preserving and shift-invariant; rejects non-finite input.
pub fn soft_max<T: Real>(raw_scores: &[T]) -> Result<ProbabilityVector<T>> {
    if raw_scores.is_empty() {
        return Err(FusionError::InvalidProbability("empty score vector".into()));
    }
    let mut m = T::neg_infinity();
    for &v in raw_scores {
        if !v.is_finite() {
            return Err(FusionError::NonFiniteInput { context: "soft_max" });
        }
        if v > m {
            m = v;
        }
    }
    let mut values: Vec<T> = raw_scores.iter().map(|&v| (v - m).exp()).collect();
    let sum: T = values.iter().copied().sum();
    for v in values.iter_mut() {
        *v = *v / sum;
    }
    Ok(ProbabilityVector::from_normalized_unchecked(values))
}

/// Probability → log space: `log(max(p_i, epsilon))`, renormalized so
/// `logsumexp == 0`.
pub fn to_log<T: Real>(p: &ProbabilityVector<T>, epsilon_prob: T) -> LogProbabilityVector<T> {
    let mut values: Vec<T> = p
        .values()
        .iter()
        .map(|&v| v.max(epsilon_prob).ln())
        .collect();
    let shift = log_sum_exp(&values);
    for v in values.iter_mut() {
        *v = *v - shift;
    }
    LogProbabilityVector::from_normalized_unchecked(values)
}

/// Log space → probability: exponentiate each entry.
pub fn from_log<T: Real>(log_p: &LogProbabilityVector<T>) -> ProbabilityVector<T> {
    let mut values: Vec<T> = log_p.values().iter().map(|&v| v.exp()).collect();
    renormalize_sum(&mut values);
    ProbabilityVector::from_normalized_unchecked(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn soft_max_of_zeros_is_uniform() {
        let p = soft_max(&[0.0f64; 15]).unwrap();
        for &v in p.values() {
            assert_close(v, 1.0 / 15.0, 1e-15);
        }
        assert_close(p.values().iter().sum::<f64>(), 1.0, 1e-9);
    }

    #[test]
    fn soft_max_survives_large_scores() {
        let p = soft_max(&[1000.0f64, 0.0, 0.0]).unwrap();
        assert!(p.values().iter().all(|v| v.is_finite()));
        assert_close(p.values()[0], 1.0, 1e-12);
        assert_close(p.values()[1], 0.0, 1e-12);
    }

    #[test]
    fn soft_max_reference_values() {
        // Reference: high-precision evaluation of exp(x_i)/sum(exp(x_j)).
        let p = soft_max(&[1.0f64, 2.0, 3.0]).unwrap();
        assert_close(p.values()[0], 0.090030573170380457998, 1e-15);
        assert_close(p.values()[1], 0.24472847105479765247, 1e-15);
        assert_close(p.values()[2], 0.66524095577482188953, 1e-15);
    }

    #[test]
    fn soft_max_rejects_non_finite() {
        assert!(soft_max(&[f64::NAN, 0.0]).is_err());
        assert!(soft_max(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn to_log_uniform() {
        let eps = 1e-9;
        let l = to_log(&ProbabilityVector::<f64>::uniform(15), eps);
        for &v in l.values() {
            assert_close(v, (1.0f64 / 15.0).ln(), 1e-12);
        }
    }

    #[test]
    fn to_log_clamps_one_hot() {
        let eps = 1e-9f64;
        let p = ProbabilityVector::one_hot(0, 4);
        // Before renormalization entry 0 is log(1)=0 and the rest log(eps);
        // the shift is log(1 + 3 eps) ≈ 3 eps.
        let l = to_log(&p, eps);
        assert_close(l.values()[0], 0.0, 1e-8);
        for &v in &l.values()[1..] {
            assert_close(v, eps.ln(), 1e-6);
        }
        l.validate().unwrap();
    }

    #[test]
    fn to_log_reference_values() {
        // Reference: high-precision natural logarithms.
        let p = ProbabilityVector::new(vec![0.5f64, 0.3, 0.2]).unwrap();
        let l = to_log(&p, 1e-9);
        assert_close(l.values()[0], -0.69314718055994530942, 1e-12);
        assert_close(l.values()[1], -1.2039728043259359926, 1e-12);
        assert_close(l.values()[2], -1.6094379124341003746, 1e-12);
    }

    #[test]
    fn from_log_uniform() {
        let l = LogProbabilityVector::<f64>::uniform(15);
        let p = from_log(&l);
        for &v in p.values() {
            assert_close(v, 1.0 / 15.0, 1e-12);
        }
    }

    #[test]
    fn argmax_preserved_over_many_random_vectors() {
        // exp/log are monotone, so the argmax must survive the round trip.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let raw: Vec<f64> = (0..15).map(|_| rng.random_range(-8.0..8.0)).collect();
            let p = soft_max(&raw).unwrap();
            let l = to_log(&p, 1e-9);
            let back = from_log(&l);
            assert_eq!(p.argmax(), l.argmax());
            assert_eq!(p.argmax(), back.argmax());
        }
    }

    #[test]
    fn round_trip_identity_within_tolerance() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..15).map(|_| rng.random_range(-6.0..6.0)).collect();
            let p = soft_max(&raw).unwrap();
            let back = from_log(&to_log(&p, 1e-9));
            for (a, b) in p.values().iter().zip(back.values()) {
                assert_close(*a, *b, 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn soft_max_is_shift_invariant(
            raw in proptest::collection::vec(-50.0f64..50.0, 2..20),
            shift in -100.0f64..100.0,
        ) {
            let a = soft_max(&raw).unwrap();
            let shifted: Vec<f64> = raw.iter().map(|v| v + shift).collect();
            let b = soft_max(&shifted).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn soft_max_output_is_valid(raw in proptest::collection::vec(-500.0f64..500.0, 1..32)) {
            let p = soft_max(&raw).unwrap();
            prop_assert!(p.validate().is_ok());
        }

        #[test]
        fn log_round_trip_is_valid(raw in proptest::collection::vec(-20.0f64..20.0, 2..16)) {
            let p = soft_max(&raw).unwrap();
            let l = to_log(&p, 1e-9);
            prop_assert!(l.validate().is_ok());
            prop_assert!(from_log(&l).validate().is_ok());
        }
    }

    #[test]
    fn validation_catches_bad_vectors() {
        assert!(ProbabilityVector::new(vec![0.5f64, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![-0.1f64, 1.1]).is_err());
        assert!(ProbabilityVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbabilityVector::new(Vec::<f64>::new()).is_err());
        assert!(LogProbabilityVector::new(vec![0.0f64, 0.0]).is_err());
    }
}
