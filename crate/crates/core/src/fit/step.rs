use crate::error::{FrailtyError, Result};

/// Right-continuous nondecreasing step function, zero before the first time.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub times: Vec<f64>,
    pub cum_values: Vec<f64>,
}

impl StepFunction {
    pub fn new(times: Vec<f64>, cum_values: Vec<f64>) -> Result<Self> {
        if times.len() != cum_values.len() {
            return Err(FrailtyError::InvalidData("step function times and values differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(FrailtyError::InvalidData("step function times must be strictly increasing".into()));
        }
        if cum_values.first().is_some_and(|v| *v < 0.0) || cum_values.windows(2).any(|w| w[1] < w[0]) {
            return Err(FrailtyError::InvalidData("step function values must be nonnegative and nondecreasing".into()));
        }
        Ok(Self { times, cum_values })
    }

    pub fn zero() -> Self {
        Self {
            times: Vec::new(),
            cum_values: Vec::new(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cum_values[k - 1]
        }
    }

    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cum_values
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_is_right_continuous() {
        let s = StepFunction::new(vec![1.0, 2.0], vec![0.5, 1.5]).unwrap();
        assert_eq!(s.value(0.99), 0.0);
        assert_eq!(s.value(1.0), 0.5);
        assert_eq!(s.value(1.5), 0.5);
        assert_eq!(s.value(2.0), 1.5);
        assert_eq!(s.value(100.0), 1.5);
        assert_eq!(s.increments(), vec![0.5, 1.0]);
    }

    #[test]
    fn validation() {
        assert!(StepFunction::new(vec![1.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(StepFunction::new(vec![1.0, 2.0], vec![1.0, 0.5]).is_err());
        assert!(StepFunction::new(vec![1.0], vec![]).is_err());
        assert_eq!(StepFunction::zero().value(3.0), 0.0);
    }
}
