//! Activation functions.
//!
//! Besides the usual sigmoid and ReLU this covers the two families that a
//! reaction network can realise as the positive fixed point of
//! `dx/dt = h + y x - (q-1) x^q`:
//!
//! - `SmoothedRelu { h }` (q = 2) has the closed form `(y + sqrt(y^2 + 4h)) / 2`;
//!   at `h = 0` it is exactly ReLU.
//! - `ImplicitRoot { h, q }` for any integer `q >= 2` is the unique positive
//!   root, found numerically. Its derivative follows from implicit
//!   differentiation: `phi'(y) = -phi / (y - q (q-1) phi^(q-1))`.

use alloc::format;
use alloc::string::String;
use core::fmt;

use crate::math::{exp, hypot, powi, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Activation {
    Sigmoid,
    Relu,
    SmoothedRelu { h: f64 },
    ImplicitRoot { h: f64, q: u32 },
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Sigmoid => f.write_str("sigmoid"),
            Activation::Relu => f.write_str("relu"),
            Activation::SmoothedRelu { h } => write!(f, "smoothed-relu(h={h})"),
            Activation::ImplicitRoot { h, q } => write!(f, "implicit-root(h={h}, q={q})"),
        }
    }
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Sigmoid | Activation::Relu => Ok(()),
            Activation::SmoothedRelu { h } if h.is_finite() && h >= 0.0 => Ok(()),
            Activation::SmoothedRelu { h } => Err(Error::InvalidParameter(format!(
                "smoothed ReLU needs finite h >= 0, got {h}"
            ))),
            Activation::ImplicitRoot { h, q } if h.is_finite() && h > 0.0 && q >= 2 => Ok(()),
            Activation::ImplicitRoot { h, q } => Err(Error::InvalidParameter(format!(
                "implicit root activation needs h > 0 and q >= 2, got h={h}, q={q}"
            ))),
        }
    }

    /// `(h, q)` of the activation ODE `h + y x - (q-1) x^q`, when one exists
    /// with `h > 0`.
    pub fn ode_form(&self) -> Option<(f64, u32)> {
        match *self {
            Activation::SmoothedRelu { h } if h > 0.0 => Some((h, 2)),
            Activation::ImplicitRoot { h, q } => Some((h, q)),
            _ => None,
        }
    }

    /// Same as [`Activation::ode_form`] but failing with
    /// [`Error::UnsupportedActivation`].
    pub fn require_ode_form(&self) -> Result<(f64, u32)> {
        self.ode_form()
            .ok_or_else(|| Error::UnsupportedActivation(format!("{self}")))
    }

    pub fn apply(&self, y: f64) -> Result<f64> {
        check_input(y)?;
        Ok(match *self {
            Activation::Sigmoid => 1.0 / (1.0 + exp(-y)),
            Activation::Relu => relu(y),
            Activation::SmoothedRelu { h } => smoothed_relu(h, y),
            Activation::ImplicitRoot { h, q } => implicit_root(h, q, y)?,
        })
    }

    pub fn derivative(&self, y: f64) -> Result<f64> {
        Ok(self.value_and_derivative(y)?.1)
    }

    /// `(phi(y), phi'(y))` with a single root solve for the implicit family.
    pub fn value_and_derivative(&self, y: f64) -> Result<(f64, f64)> {
        check_input(y)?;
        Ok(match *self {
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + exp(-y));
                (s, s * (1.0 - s))
            }
            Activation::Relu => (relu(y), relu_derivative(y)),
            Activation::SmoothedRelu { h: 0.0 } => (relu(y), relu_derivative(y)),
            Activation::SmoothedRelu { h } => {
                let s = hypot(y, 2.0 * sqrt(h));
                // (1 + y/s)/2 cancels for y << 0; use (s + y) = 4h / (s - y).
                let d = if y >= 0.0 {
                    0.5 * (1.0 + y / s)
                } else {
                    2.0 * h / (s * (s - y))
                };
                (smoothed_relu(h, y), d)
            }
            Activation::ImplicitRoot { h, q } => {
                let phi = implicit_root(h, q, y)?;
                (phi, implicit_root_derivative(q, y, phi))
            }
        })
    }
}

fn check_input(y: f64) -> Result<()> {
    if y.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "activation input must be finite, got {y}"
        )))
    }
}

fn relu(y: f64) -> f64 {
    if y > 0.0 {
        y
    } else {
        0.0
    }
}

// Subgradient convention: 0 at the kink.
fn relu_derivative(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `(y + sqrt(y^2 + 4h)) / 2`, rewritten as `2h / (sqrt(y^2 + 4h) - y)` for
/// negative `y`.
pub fn smoothed_relu(h: f64, y: f64) -> f64 {
    let s = hypot(y, 2.0 * sqrt(h));
    if y >= 0.0 {
        0.5 * (y + s)
    } else if h == 0.0 {
        0.0
    } else {
        2.0 * h / (s - y)
    }
}

/// `h + x (y - (q-1) x^(q-1))`, i.e. `h + y x - (q-1) x^q` in Horner form.
#[inline]
pub fn root_residual(h: f64, q: u32, y: f64, x: f64) -> f64 {
    h + x * (y - f64::from(q - 1) * powi(x, q - 1))
}

/// `phi'(y) = -phi / (y - q (q-1) phi^(q-1))`; the denominator is
/// strictly negative at the positive root.
pub fn implicit_root_derivative(q: u32, y: f64, phi: f64) -> f64 {
    -phi / (y - f64::from(q * (q - 1)) * powi(phi, q - 1))
}

const MAX_EXPANSIONS: usize = 1100;
const MAX_BISECTIONS: usize = 400;
const BISECTION_WIDTH: f64 = 1e-14;
const NEWTON_POLISH: usize = 3;

/// Unique positive root of `h + y x - (q-1) x^q` for `h > 0`, `q >= 2`.
///
/// Expand an upper bracket from 1 by doubling until the residual turns
/// negative, bisect to relative width 1e-14, polish with three Newton steps
/// and finally pick whichever of the result and its two float neighbours has
/// the smallest residual.
pub fn implicit_root(h: f64, q: u32, y: f64) -> Result<f64> {
    let fail = |detail| Error::RootNotConverged { h, q, y, detail };
    if !(h > 0.0 && h.is_finite()) || q < 2 {
        return Err(Error::InvalidParameter(format!(
            "implicit root needs h > 0 and q >= 2, got h={h}, q={q}"
        )));
    }
    check_input(y)?;

    // g(0) = h > 0 and g -> -inf, so a sign change exists above zero.
    let g = |x: f64| root_residual(h, q, y, x);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut expansions = 0;
    while g(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !hi.is_finite() {
            return Err(fail("no sign change while expanding the bracket"));
        }
    }

    let mut bisections = 0;
    while hi - lo > BISECTION_WIDTH * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
        if bisections > MAX_BISECTIONS {
            return Err(fail("bisection did not reach the target width"));
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..NEWTON_POLISH {
        let slope = y - f64::from(q * (q - 1)) * powi(x, q - 1);
        if slope == 0.0 {
            break;
        }
        let next = x - g(x) / slope;
        if !(next > 0.0 && next.is_finite()) {
            break;
        }
        x = next;
    }

    let mut best = x;
    for cand in [x.next_down(), x.next_up()] {
        if cand > 0.0 && g(cand).abs() < g(best).abs() {
            best = cand;
        }
    }
    if !(best > 0.0 && best.is_finite()) {
        return Err(fail("root is not a positive finite number"));
    }
    Ok(best)
}

/// Short label used in reports and file formats.
pub fn activation_kind_name(a: &Activation) -> String {
    match a {
        Activation::Sigmoid => "sigmoid".into(),
        Activation::Relu => "relu".into(),
        Activation::SmoothedRelu { .. } => "smoothed-relu".into(),
        Activation::ImplicitRoot { .. } => "implicit-root".into(),
    }
}
