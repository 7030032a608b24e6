use serde::{Deserialize, Serialize};

use crate::harness::NumericCapture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mismatch {
    Shape,
    NanMismatch,
    InfMismatch,
    OutputCount,
    StatusClass,
}

impl Mismatch {
    pub fn as_str(self) -> &'static str {
        match self {
            Mismatch::Shape => "shape",
            Mismatch::NanMismatch => "nan_mismatch",
            Mismatch::InfMismatch => "inf_mismatch",
            Mismatch::OutputCount => "output_count",
            Mismatch::StatusClass => "status_class",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    Value(f64),
    Structural(Mismatch),
}

impl Distance {
    pub fn value(self) -> Option<f64> {
        match self {
            Distance::Value(v) => Some(v),
            Distance::Structural(_) => None,
        }
    }

    /// Strictly above `t`, or structurally different.
    pub fn exceeds(self, t: f64) -> bool {
        match self {
            Distance::Value(v) => v > t,
            Distance::Structural(_) => true,
        }
    }
}

/// Overflow-safe running `sqrt(sum x_i^2)`.
#[derive(Debug, Clone, Copy)]
struct Norm {
    scale: f64,
    ssq: f64,
}

impl Norm {
    fn new() -> Self {
        Norm { scale: 0.0, ssq: 1.0 }
    }

    fn add(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        let ax = x.abs();
        if ax.is_infinite() {
            self.scale = f64::INFINITY;
            return;
        }
        if self.scale < ax {
            if self.scale.is_finite() {
                self.ssq = 1.0 + self.ssq * (self.scale / ax) * (self.scale / ax);
                self.scale = ax;
            }
        } else {
            self.ssq += (ax / self.scale) * (ax / self.scale);
        }
    }

    fn value(self) -> f64 {
        if self.scale.is_infinite() {
            f64::INFINITY
        } else {
            self.scale * self.ssq.sqrt()
        }
    }
}

/// Euclidean distance with structural rules: differing shapes, NaN against a
/// number, or an infinity against anything but the same infinity are
/// mismatches; NaN/NaN and equal infinities contribute nothing.
pub fn euclidean_distance(a: &NumericCapture, b: &NumericCapture) -> Distance {
    if a.shape != b.shape || a.values.len() != b.values.len() {
        return Distance::Structural(Mismatch::Shape);
    }
    let mut norm = Norm::new();
    for (&x, &y) in a.values.iter().zip(&b.values) {
        match (x.is_nan(), y.is_nan()) {
            (true, true) => continue,
            (true, false) | (false, true) => return Distance::Structural(Mismatch::NanMismatch),
            _ => {}
        }
        if x.is_infinite() || y.is_infinite() {
            if x == y {
                continue;
            }
            return Distance::Structural(Mismatch::InfMismatch);
        }
        norm.add(x - y);
    }
    Distance::Value(norm.value())
}

/// Two-norm over the finite elements.
pub fn finite_norm(a: &NumericCapture) -> f64 {
    let mut n = Norm::new();
    for &x in a.values.iter().filter(|x| x.is_finite()) {
        n.add(x);
    }
    n.value()
}

/// `d / (1 + ||a||)`: scale-free distance relative to the reference output.
pub fn normalized_distance(a: &NumericCapture, b: &NumericCapture) -> Distance {
    match euclidean_distance(a, b) {
        Distance::Value(d) => Distance::Value(d / (1.0 + finite_norm(a))),
        s => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(v: &[f64]) -> NumericCapture {
        NumericCapture::new("x", vec![v.len()], "float64", v.to_vec())
    }

    #[test]
    fn three_four_five() {
        assert_eq!(euclidean_distance(&cap(&[0.0, 0.0]), &cap(&[3.0, 4.0])), Distance::Value(5.0));
        assert_eq!(euclidean_distance(&cap(&[1.0, 2.0]), &cap(&[1.0, 2.0])), Distance::Value(0.0));
    }

    #[test]
    fn huge_values_do_not_overflow() {
        let d = euclidean_distance(&cap(&[0.0, 0.0]), &cap(&[3e200, 4e200])).value().unwrap();
        assert!((d / 5e200 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn structural_rules() {
        let nan = f64::NAN;
        let inf = f64::INFINITY;
        assert_eq!(euclidean_distance(&cap(&[nan, 1.0]), &cap(&[nan, 1.0])), Distance::Value(0.0));
        assert_eq!(
            euclidean_distance(&cap(&[nan]), &cap(&[0.0])),
            Distance::Structural(Mismatch::NanMismatch)
        );
        assert_eq!(euclidean_distance(&cap(&[inf]), &cap(&[inf])), Distance::Value(0.0));
        assert_eq!(
            euclidean_distance(&cap(&[inf]), &cap(&[-inf])),
            Distance::Structural(Mismatch::InfMismatch)
        );
        let mut m = cap(&[1.0, 2.0]);
        m.shape = vec![2, 1];
        assert_eq!(euclidean_distance(&cap(&[1.0, 2.0]), &m), Distance::Structural(Mismatch::Shape));
    }

    #[test]
    fn normalization_and_strict_threshold() {
        let d = normalized_distance(&cap(&[3.0, 4.0]), &cap(&[3.0, 4.0 + 0.06])).value().unwrap();
        assert!((d - 0.01).abs() < 1e-12);
        assert!(!Distance::Value(0.01).exceeds(0.01));
        assert!(Distance::Value(0.0100001).exceeds(0.01));
        assert!(Distance::Structural(Mismatch::Shape).exceeds(f64::MAX));
    }
}
