//! Scalar time profiles for Hamiltonian terms and noise strengths.

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    PiecewiseLinear,
    /// Value `v_i` holds on `[t_i, t_{i+1})`; the final knot value applies at `t = T` only.
    PiecewiseConstant,
}

/// A real function on `[0, T]` given by ordered `(time, value)` knots.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSchedule {
    kind: ScheduleKind,
    knots: Vec<(f64, f64)>,
}

impl CoefficientSchedule {
    pub fn constant(value: f64, total_time: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidSchedule(format!("non-finite value {value}")));
        }
        check_total_time(total_time)?;
        let knots = if total_time == 0.0 {
            vec![(0.0, value)]
        } else {
            vec![(0.0, value), (total_time, value)]
        };
        Ok(Self { kind: ScheduleKind::Constant, knots })
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        validate_knots(&knots)?;
        Ok(Self { kind: ScheduleKind::PiecewiseLinear, knots })
    }

    pub fn piecewise_constant(knots: Vec<(f64, f64)>) -> Result<Self> {
        validate_knots(&knots)?;
        Ok(Self { kind: ScheduleKind::PiecewiseConstant, knots })
    }

    /// Straight line from `start` at `t = 0` to `end` at `t = total_time`.
    pub fn linear_ramp(start: f64, end: f64, total_time: f64) -> Result<Self> {
        check_total_time(total_time)?;
        if total_time == 0.0 {
            return Self::piecewise_linear(vec![(0.0, start)]);
        }
        Self::piecewise_linear(vec![(0.0, start), (total_time, end)])
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn total_time(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    /// Every knot value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kind: self.kind,
            knots: self.knots.iter().map(|&(t, v)| (t, v * factor)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.knots.iter().all(|&(_, v)| v == 0.0)
    }

    /// Value at `t`, rejecting times outside `[0, T]`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        let total = self.total_time();
        if !(0.0..=total).contains(&t) {
            return Err(Error::TimeOutOfRange { t, total_time: total });
        }
        Ok(self.value_at(t))
    }

    /// Value at `t` with `t` clamped into `[0, T]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let seg = self.segment(t);
        let (t0, v0) = self.knots[seg];
        match self.kind {
            ScheduleKind::Constant => v0,
            ScheduleKind::PiecewiseConstant => {
                if seg + 1 == self.knots.len() - 1 && t >= self.total_time() {
                    self.knots[seg + 1].1
                } else {
                    v0
                }
            }
            ScheduleKind::PiecewiseLinear => {
                if seg + 1 >= self.knots.len() {
                    return v0;
                }
                let (t1, v1) = self.knots[seg + 1];
                let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                v0 + (v1 - v0) * w
            }
        }
    }

    /// Exact `∫_a^b g(t)² dt` for `0 ≤ a ≤ b ≤ T`.
    pub fn square_integral(&self, a: f64, b: f64) -> Result<f64> {
        let total = self.total_time();
        for t in [a, b] {
            if !(0.0..=total).contains(&t) {
                return Err(Error::TimeOutOfRange { t, total_time: total });
            }
        }
        if b < a {
            return Err(Error::InvalidParameter(format!("integration bounds reversed: {a} > {b}")));
        }
        if a == b || self.knots.len() == 1 {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for w in self.knots.windows(2) {
            let (lo, hi) = (w[0].0.max(a), w[1].0.min(b));
            if hi <= lo {
                continue;
            }
            acc += match self.kind {
                ScheduleKind::Constant | ScheduleKind::PiecewiseConstant => {
                    w[0].1 * w[0].1 * (hi - lo)
                }
                ScheduleKind::PiecewiseLinear => {
                    let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    let ga = w[0].1 + slope * (lo - w[0].0);
                    let gb = w[0].1 + slope * (hi - w[0].0);
                    (hi - lo) * (ga * ga + ga * gb + gb * gb) / 3.0
                }
            };
        }
        Ok(acc)
    }

    /// Index of the knot opening the segment that contains `t`.
    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        if n == 1 {
            return 0;
        }
        // first knot with time > t, minus one
        let idx = self.knots.partition_point(|&(k, _)| k <= t);
        idx.saturating_sub(1).min(n - 2)
    }
}

fn check_total_time(total_time: f64) -> Result<()> {
    if !total_time.is_finite() || total_time < 0.0 {
        return Err(Error::InvalidSchedule(format!("total time {total_time} must be finite and ≥ 0")));
    }
    Ok(())
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<()> {
    let Some(&(first, _)) = knots.first() else {
        return Err(Error::InvalidSchedule("no knots".into()));
    };
    if first != 0.0 {
        return Err(Error::InvalidSchedule(format!("first knot at t = {first}, expected 0")));
    }
    for &(t, v) in knots {
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::InvalidSchedule(format!("non-finite knot ({t}, {v})")));
        }
    }
    for w in knots.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::InvalidSchedule(format!(
                "knot times not strictly increasing: {} then {}",
                w[0].0, w[1].0
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_everywhere() {
        let s = CoefficientSchedule::constant(0.3, 2.0).unwrap();
        for t in [0.0, 0.7, 2.0] {
            assert_eq!(s.evaluate(t).unwrap(), 0.3);
        }
        assert!(s.evaluate(2.1).is_err());
        assert!(s.evaluate(-0.1).is_err());
    }

    #[test]
    fn linear_interpolation() {
        let s = CoefficientSchedule::linear_ramp(0.0, 1.0, 4.0).unwrap();
        assert_eq!(s.evaluate(2.0).unwrap(), 0.5);
        assert_eq!(s.evaluate(4.0).unwrap(), 1.0);
        let s = CoefficientSchedule::piecewise_linear(vec![(0.0, 1.0), (1.0, 3.0), (3.0, -1.0)])
            .unwrap();
        assert!((s.evaluate(0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((s.evaluate(2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_constant_holds_left_value() {
        let s = CoefficientSchedule::piecewise_constant(vec![(0.0, 1.0), (1.0, 2.0), (2.0, 5.0)])
            .unwrap();
        assert_eq!(s.evaluate(0.0).unwrap(), 1.0);
        assert_eq!(s.evaluate(0.999).unwrap(), 1.0);
        assert_eq!(s.evaluate(1.0).unwrap(), 2.0);
        assert_eq!(s.evaluate(1.5).unwrap(), 2.0);
        assert_eq!(s.evaluate(2.0).unwrap(), 5.0);
    }

    #[test]
    fn invalid_knots() {
        assert!(CoefficientSchedule::piecewise_linear(vec![]).is_err());
        assert!(CoefficientSchedule::piecewise_linear(vec![(0.1, 0.0), (1.0, 0.0)]).is_err());
        assert!(CoefficientSchedule::piecewise_linear(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(CoefficientSchedule::piecewise_constant(vec![(0.0, f64::NAN)]).is_err());
        assert!(CoefficientSchedule::constant(1.0, -1.0).is_err());
    }

    #[test]
    fn square_integrals() {
        let s = CoefficientSchedule::linear_ramp(0.0, 1.0, 1.0).unwrap();
        assert!((s.square_integral(0.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // ∫_{0.5}^{1} t² dt = (1 − 1/8)/3
        assert!((s.square_integral(0.5, 1.0).unwrap() - 7.0 / 24.0).abs() < 1e-15);
        let c = CoefficientSchedule::piecewise_constant(vec![(0.0, 1.0), (1.0, 2.0), (2.0, 9.0)])
            .unwrap();
        assert!((c.square_integral(0.0, 2.0).unwrap() - 5.0).abs() < 1e-15);
        assert!((c.square_integral(0.5, 1.5).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn zero_length_domain() {
        let s = CoefficientSchedule::constant(0.4, 0.0).unwrap();
        assert_eq!(s.total_time(), 0.0);
        assert_eq!(s.evaluate(0.0).unwrap(), 0.4);
        assert_eq!(s.square_integral(0.0, 0.0).unwrap(), 0.0);
    }
}
