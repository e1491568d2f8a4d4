use std::fmt;
use std::sync::Arc;

/// Value and parameter-space gradient `(g, dg/dtheta, dg/dz)`.
pub type ThicknessSample = [f64; 3];

type ThicknessFn = Arc<dyn Fn(f64, f64) -> ThicknessSample + Send + Sync>;

#[derive(Clone)]
pub enum ThicknessShape {
    /// `g1 = g2 = h`
    Constant,
    /// `g1 = h`, `g2 = h (1 + amplitude sin(theta) sin(z))`
    Sinusoidal { amplitude: f64 },
    /// Arbitrary profiles; `h` is only used as the scale.
    Custom { g1: ThicknessFn, g2: ThicknessFn },
}

impl fmt::Debug for ThicknessShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThicknessShape::Constant => write!(f, "Constant"),
            ThicknessShape::Sinusoidal { amplitude } => {
                write!(f, "Sinusoidal {{ amplitude: {amplitude} }}")
            }
            ThicknessShape::Custom { .. } => write!(f, "Custom(..)"),
        }
    }
}

/// Both thickness functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThicknessPoint {
    pub g1: ThicknessSample,
    pub g2: ThicknessSample,
}

impl ThicknessPoint {
    /// Total thickness `g1 + g2`.
    pub fn total(&self) -> f64 {
        self.g1[0] + self.g2[0]
    }
}

/// The pair `(g1, g2)` bounding the normal coordinate `t in [-g1, g2]`.
///
/// `c1` and `c2` are the declared admissibility constants; `None` means the
/// corresponding clause is only checked for finiteness.
#[derive(Debug, Clone)]
pub struct ThicknessProfile {
    pub shape: ThicknessShape,
    pub h: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl ThicknessProfile {
    pub fn constant(h: f64) -> Self {
        ThicknessProfile {
            shape: ThicknessShape::Constant,
            h,
            c1: Some(1.0),
            c2: Some(0.0),
        }
    }

    pub fn sinusoidal(h: f64, amplitude: f64) -> Self {
        ThicknessProfile {
            shape: ThicknessShape::Sinusoidal { amplitude },
            h,
            c1: Some(1.0 + amplitude.abs()),
            c2: None,
        }
    }

    pub fn custom(
        h: f64,
        g1: impl Fn(f64, f64) -> ThicknessSample + Send + Sync + 'static,
        g2: impl Fn(f64, f64) -> ThicknessSample + Send + Sync + 'static,
    ) -> Self {
        ThicknessProfile {
            shape: ThicknessShape::Custom {
                g1: Arc::new(g1),
                g2: Arc::new(g2),
            },
            h,
            c1: None,
            c2: None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.shape {
            ThicknessShape::Constant => "constant",
            ThicknessShape::Sinusoidal { .. } => "sinusoidal",
            ThicknessShape::Custom { .. } => "custom",
        }
    }

    /// Same shape at a different thickness scale.
    pub fn with_h(&self, h: f64) -> Self {
        match &self.shape {
            ThicknessShape::Custom { g1, g2 } => {
                let ratio = h / self.h;
                let (g1, g2) = (g1.clone(), g2.clone());
                ThicknessProfile {
                    shape: ThicknessShape::Custom {
                        g1: Arc::new(move |a, b| g1(a, b).map(|v| v * ratio)),
                        g2: Arc::new(move |a, b| g2(a, b).map(|v| v * ratio)),
                    },
                    h,
                    c1: self.c1,
                    c2: self.c2,
                }
            }
            _ => ThicknessProfile {
                h,
                ..self.clone()
            },
        }
    }

    pub fn eval(&self, theta: f64, z: f64) -> ThicknessPoint {
        let h = self.h;
        match &self.shape {
            ThicknessShape::Constant => ThicknessPoint {
                g1: [h, 0.0, 0.0],
                g2: [h, 0.0, 0.0],
            },
            ThicknessShape::Sinusoidal { amplitude } => {
                let (st, ct) = theta.sin_cos();
                let (sz, cz) = z.sin_cos();
                let a = amplitude * h;
                ThicknessPoint {
                    g1: [h, 0.0, 0.0],
                    g2: [h + a * st * sz, a * ct * sz, a * st * cz],
                }
            }
            ThicknessShape::Custom { g1, g2 } => ThicknessPoint {
                g1: g1(theta, z),
                g2: g2(theta, z),
            },
        }
    }
}
