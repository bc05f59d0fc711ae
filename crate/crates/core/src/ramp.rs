//! Quintic C^2 ramps.
//!
//! [`SmoothRamp`] rises from the constant 0 to the identity over `[0, delta]`:
//! `s(x) = delta * p(x / delta)` with `p(t) = 6t^3 - 8t^4 + 3t^5`, which has
//! `p(0) = p'(0) = p''(0) = 0`, `p(1) = p'(1) = 1`, `p''(1) = 0`. Its
//! derivative bounds are `max |s''| = K2 / delta` and `max |s'''| = K3 / delta^2`
//! with [`K2`] and [`K3`] below.
//!
//! [`WidthRamp`] goes the other way: the identity up to `eps/3`, then a blend
//! to the constant `eps` at `eps`, using `q(t) = t + 4t^3 - 7t^4 + 3t^5`.

use crate::error::{Error, Result};

/// `max_{[0,1]} |p''|`, attained at `t = (16 - sqrt(76)) / 30`.
pub const K2: f64 = 3.940_233_952_969_7;
/// `max_{[0,1]} |p'''| = p'''(0)`.
pub const K3: f64 = 36.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothRamp {
    pub delta: f64,
}

impl SmoothRamp {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid("ramp width must lie in (0, 1]"));
        }
        Ok(Self { delta })
    }

    /// `(s, s', s'', s''')` at `x`.
    pub fn eval(&self, x: f64) -> [f64; 4] {
        let d = self.delta;
        if x <= 0.0 {
            return [0.0; 4];
        }
        if x >= d {
            return [x, 1.0, 0.0, 0.0];
        }
        let t = x / d;
        let t2 = t * t;
        let p = t2 * t * (6.0 - 8.0 * t + 3.0 * t2);
        let p1 = t2 * (18.0 - 32.0 * t + 15.0 * t2);
        let p2 = t * (36.0 - 96.0 * t + 60.0 * t2);
        let p3 = 36.0 - 192.0 * t + 180.0 * t2;
        [d * p, p1, p2 / d, p3 / (d * d)]
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x)[0]
    }

    pub fn second_derivative_bound(&self) -> f64 {
        K2 / self.delta
    }

    pub fn third_derivative_bound(&self) -> f64 {
        K3 / (self.delta * self.delta)
    }
}

/// Kernel width as a function of distance to the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WidthRamp {
    pub eps: f64,
}

/// `max |q''| / (2/3)` on `[0, 1]`, so that `max |w''| = KW / eps`.
pub const KW: f64 = 5.910_350_929_454_55;

impl WidthRamp {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        Ok(Self { eps })
    }

    /// `(w, w', w'')` at distance `z >= 0`; zero width for `z <= 0`.
    pub fn eval(&self, z: f64) -> [f64; 3] {
        let e = self.eps;
        let a = e / 3.0;
        if z <= 0.0 {
            return [0.0, 0.0, 0.0];
        }
        if z < a {
            return [z, 1.0, 0.0];
        }
        if z >= e {
            return [e, 0.0, 0.0];
        }
        let l = e - a;
        let t = (z - a) / l;
        let t2 = t * t;
        let q = t + t2 * t * (4.0 - 7.0 * t + 3.0 * t2);
        let q1 = 1.0 + t2 * (12.0 - 28.0 * t + 15.0 * t2);
        let q2 = t * (24.0 - 84.0 * t + 60.0 * t2);
        [a + l * q, q1, q2 / l]
    }

    pub fn value(&self, z: f64) -> f64 {
        self.eval(z)[0]
    }
}
