//! Second-order first-derivative stencils on uniform 1D grids.

/// Weights of a first-derivative stencil at node `i` of `n` nodes with
/// spacing `d`: central in the interior, one-sided second order at the ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub idx: [usize; 3],
    pub w: [f64; 3],
    pub len: usize,
}

impl Stencil {
    pub fn at(i: usize, n: usize, d: f64) -> Stencil {
        debug_assert!(n >= 3 && i < n);
        let inv = 0.5 / d;
        if i == 0 {
            Stencil {
                idx: [0, 1, 2],
                w: [-3.0 * inv, 4.0 * inv, -inv],
                len: 3,
            }
        } else if i == n - 1 {
            Stencil {
                idx: [n - 1, n - 2, n - 3],
                w: [3.0 * inv, -4.0 * inv, inv],
                len: 3,
            }
        } else {
            Stencil {
                idx: [i - 1, i + 1, 0],
                w: [-inv, inv, 0.0],
                len: 2,
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx[..self.len]
            .iter()
            .copied()
            .zip(self.w[..self.len].iter().copied())
    }

    /// Applies the stencil to `f(index)`.
    pub fn apply(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.iter().map(|(j, w)| w * f(j)).sum()
    }
}

/// Composite trapezoid weights for `n` nodes with spacing `d`.
pub fn trapezoid(n: usize, d: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * d } else { d })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_quadratics_everywhere() {
        let n = 7;
        let d = 0.3;
        let f = |i: usize| {
            let x = i as f64 * d;
            2.0 * x * x - x + 1.0
        };
        for i in 0..n {
            let x = i as f64 * d;
            let s = Stencil::at(i, n, d);
            assert!((s.apply(f) - (4.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_sums_to_length() {
        let w = trapezoid(11, 0.1);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
