use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of steps in a pull table.
pub const MAX_STEPS: usize = 64;

/// Non-decreasing, positive step function on `[0, 1]`, given as
/// `(start, value)` pairs: the value applies from `start` up to the next
/// start. The first start is `0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct StepFunction {
    steps: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() || steps.len() > MAX_STEPS {
            return Err(Error::invalid(format!("step table needs 1..={MAX_STEPS} steps, got {}", steps.len())));
        }
        if steps[0].0 != 0.0 {
            return Err(Error::invalid("step table must start at 0"));
        }
        for w in steps.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].0 <= 1.0) {
                return Err(Error::invalid("step starts must increase within [0, 1]"));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::invalid("step values must be non-decreasing"));
            }
        }
        if !steps.iter().all(|s| s.1 > 0.0 && s.1.is_finite()) {
            return Err(Error::invalid("step values must be positive and finite"));
        }
        Ok(StepFunction { steps })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![(0.0, value)])
    }

    pub fn eval(&self, z: f64) -> f64 {
        let k = self.steps.partition_point(|s| s.0 <= z);
        self.steps[k.saturating_sub(1)].1
    }

    pub fn min(&self) -> f64 {
        self.steps[0].1
    }

    pub fn max(&self) -> f64 {
        self.steps[self.steps.len() - 1].1
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }
}

impl TryFrom<Vec<(f64, f64)>> for StepFunction {
    type Error = Error;

    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        StepFunction::new(v)
    }
}

impl From<StepFunction> for Vec<(f64, f64)> {
    fn from(f: StepFunction) -> Self {
        f.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation() {
        let f = StepFunction::new(vec![(0.0, 1.0), (0.5, 2.0), (0.9, 3.0)]).unwrap();
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(0.49), 1.0);
        assert_eq!(f.eval(0.5), 2.0);
        assert_eq!(f.eval(0.95), 3.0);
        assert_eq!((f.min(), f.max()), (1.0, 3.0));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(StepFunction::new(vec![]).is_err());
        assert!(StepFunction::new(vec![(0.1, 1.0)]).is_err());
        assert!(StepFunction::new(vec![(0.0, 2.0), (0.5, 1.0)]).is_err());
        assert!(StepFunction::new(vec![(0.0, 1.0), (0.5, 2.0), (0.5, 3.0)]).is_err());
        assert!(StepFunction::new(vec![(0.0, 0.0)]).is_err());
        assert!(StepFunction::new((0..65).map(|i| (i as f64 / 65.0, 1.0)).collect()).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let f = StepFunction::new(vec![(0.0, 1.0), (0.5, 2.0)]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, "[[0.0,1.0],[0.5,2.0]]");
        assert_eq!(serde_json::from_str::<StepFunction>(&s).unwrap(), f);
        assert!(serde_json::from_str::<StepFunction>("[[0.0,2.0],[0.5,1.0]]").is_err());
    }
}
