//! Equal-width binning of continuous labels.

use crate::error::{bail, Result};
use crate::task::Task;

/// `levels` equal bins over `[lower, upper]`, left-closed with the top bin closed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscretizationSpec {
    pub lower: f64,
    pub upper: f64,
    pub levels: usize,
}

impl DiscretizationSpec {
    pub const BD: DiscretizationSpec = DiscretizationSpec { lower: 0.0, upper: 1.0, levels: 25 };
    pub const FAR: DiscretizationSpec = DiscretizationSpec { lower: 0.0, upper: 10.0, levels: 32 };
    pub const POP: DiscretizationSpec = DiscretizationSpec { lower: 0.0, upper: 7500.0, levels: 40 };

    pub fn new(lower: f64, upper: f64, levels: usize) -> Result<Self> {
        let spec = DiscretizationSpec { lower, upper, levels };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || !(self.lower.is_finite() && self.upper.is_finite()) || self.upper <= self.lower {
            bail!(InvalidArgument, "invalid discretization [{}, {}] / {}", self.lower, self.upper, self.levels);
        }
        Ok(())
    }

    /// Default spec for a continuous task; `None` for land use.
    pub fn for_task(task: Task) -> Option<Self> {
        match task {
            Task::Land => None,
            Task::Bd => Some(Self::BD),
            Task::Far => Some(Self::FAR),
            Task::Pop => Some(Self::POP),
        }
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.levels as f64
    }

    pub fn discretize(&self, value: f64) -> usize {
        discretize(value, self)
    }

    pub fn dediscretize(&self, level: usize) -> Result<f64> {
        dediscretize(level, self)
    }
}

/// Bin index of `value`; out-of-range values clamp to the end bins, NaN to bin 0.
pub fn discretize(value: f64, spec: &DiscretizationSpec) -> usize {
    let t = ((value - spec.lower) / spec.width()).floor();
    if t.is_nan() || t <= 0.0 {
        0
    } else {
        (t as usize).min(spec.levels - 1)
    }
}

/// Midpoint of bin `level`.
pub fn dediscretize(level: usize, spec: &DiscretizationSpec) -> Result<f64> {
    if level >= spec.levels {
        bail!(InvalidArgument, "level {level} outside 0..{}", spec.levels);
    }
    Ok(spec.lower + (level as f64 + 0.5) * spec.width())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        let bd = DiscretizationSpec::BD;
        assert_eq!(discretize(0.5, &bd), 12);
        assert_eq!(discretize(1.0, &bd), 24);
        assert_eq!(discretize(-0.3, &bd), 0);
        assert_eq!(discretize(f64::NAN, &bd), 0);
        assert_eq!(discretize(0.0, &DiscretizationSpec::POP), 0);
        assert!((dediscretize(12, &bd).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(dediscretize(0, &DiscretizationSpec::POP).unwrap(), 93.75);
        assert!(dediscretize(25, &bd).is_err());
        assert_eq!(DiscretizationSpec::FAR.width(), 0.3125);
        assert_eq!(DiscretizationSpec::POP.width(), 187.5);
        assert!(DiscretizationSpec::new(1.0, 1.0, 3).is_err());
        assert!(DiscretizationSpec::new(0.0, 1.0, 0).is_err());
        assert_eq!(DiscretizationSpec::for_task(Task::Land), None);
    }

    fn any_spec() -> impl Strategy<Value = DiscretizationSpec> {
        prop_oneof![
            Just(DiscretizationSpec::BD),
            Just(DiscretizationSpec::FAR),
            Just(DiscretizationSpec::POP)
        ]
    }

    proptest! {
        #[test]
        fn monotone(spec in any_spec(), a in -1.0f64..1.1, b in -1.0f64..1.1) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let scale = spec.upper;
            prop_assert!(discretize(lo * scale, &spec) <= discretize(hi * scale, &spec));
        }

        #[test]
        fn roundtrip_within_half_width(spec in any_spec(), t in 0.0f64..=1.0) {
            let v = spec.lower + t * (spec.upper - spec.lower);
            let back = dediscretize(discretize(v, &spec), &spec).unwrap();
            prop_assert!((back - v).abs() <= spec.width() / 2.0 * (1.0 + 1e-12));
        }
    }
}
