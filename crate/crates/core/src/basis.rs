//! Basis expansions for the outcome coefficient function β(t).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::distribution::Grid;
use crate::error::{invalid_config, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BasisKind {
    /// Clamped cubic B-splines with equispaced interior knots on [0, 1].
    #[default]
    Bspline,
    /// Shifted Legendre polynomials on [0, 1].
    Polynomial,
    /// 1, √2 sin(2πkt), √2 cos(2πkt), ...
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BasisConfig {
    pub kind: BasisKind,
    /// Number of basis functions K.
    pub size: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { kind: BasisKind::Bspline, size: 4 }
    }
}

impl BasisConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BasisKind::Bspline if self.size < 4 => {
                Err(invalid_config("cubic B-spline basis needs at least 4 functions"))
            }
            _ if self.size == 0 => Err(invalid_config("basis size must be positive")),
            _ => Ok(()),
        }
    }
}

/// K basis functions evaluated on a grid, stored row-major (K × G).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BasisSet {
    kind: BasisKind,
    grid: Grid,
    size: usize,
    matrix: Vec<f64>,
}

impl BasisSet {
    pub fn new(config: &BasisConfig, grid: Grid) -> Result<Self> {
        config.validate()?;
        let k = config.size;
        let g = grid.size();
        let mut matrix = vec![0.0; k * g];
        match config.kind {
            BasisKind::Bspline => {
                let knots = clamped_knots(k - 4);
                for (j, t) in grid.points().into_iter().enumerate() {
                    let vals = cubic_bspline_row(&knots, k, t);
                    for (i, v) in vals.into_iter().enumerate() {
                        matrix[i * g + j] = v;
                    }
                }
            }
            BasisKind::Polynomial => {
                for (j, t) in grid.points().into_iter().enumerate() {
                    let x = 2.0 * t - 1.0;
                    // Bonnet recursion; scaled to unit L² norm on [0, 1]
                    let (mut p0, mut p1) = (1.0, x);
                    for i in 0..k {
                        let p = match i {
                            0 => p0,
                            1 => p1,
                            _ => {
                                let n = (i - 1) as f64;
                                let p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
                                p0 = p1;
                                p1 = p2;
                                p2
                            }
                        };
                        matrix[i * g + j] = p * libm::sqrt(2.0 * i as f64 + 1.0);
                    }
                }
            }
            BasisKind::Fourier => {
                for (j, t) in grid.points().into_iter().enumerate() {
                    for i in 0..k {
                        let freq = ((i + 1) / 2) as f64;
                        matrix[i * g + j] = match i {
                            0 => 1.0,
                            _ if i % 2 == 1 => SQRT_2 * libm::sin(2.0 * PI * freq * t),
                            _ => SQRT_2 * libm::cos(2.0 * PI * freq * t),
                        };
                    }
                }
            }
        }
        Ok(Self { kind: config.kind, grid, size: k, matrix })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Number of basis functions K.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Values of basis function `k` on the grid.
    pub fn function(&self, k: usize) -> &[f64] {
        let g = self.grid.size();
        &self.matrix[k * g..(k + 1) * g]
    }

    /// `Σ_k coef_k φ_k(t)` on the grid.
    pub fn expand(&self, coef: &[f64]) -> Vec<f64> {
        debug_assert_eq!(coef.len(), self.size);
        let mut out = vec![0.0; self.grid.size()];
        for (k, &c) in coef.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(self.function(k)) {
                *o += c * p;
            }
        }
        out
    }

    /// Gram matrix `∫ φ_k φ_l` under the midpoint rule, row-major K × K.
    pub fn gram(&self) -> Vec<f64> {
        let k = self.size;
        let mut out = vec![0.0; k * k];
        for a in 0..k {
            for b in a..k {
                let v = self.grid.inner(self.function(a), self.function(b));
                out[a * k + b] = v;
                out[b * k + a] = v;
            }
        }
        out
    }
}

fn clamped_knots(interior: usize) -> Vec<f64> {
    let mut knots = vec![0.0; 4];
    for i in 1..=interior {
        knots.push(i as f64 / (interior + 1) as f64);
    }
    knots.extend([1.0; 4]);
    knots
}

/// Cox–de Boor evaluation of all `count` cubic B-splines at `t` in (0, 1).
fn cubic_bspline_row(knots: &[f64], count: usize, t: f64) -> Vec<f64> {
    let m = knots.len() - 1;
    let mut b: Vec<f64> = (0..m)
        .map(|i| if knots[i] <= t && t < knots[i + 1] { 1.0 } else { 0.0 })
        .collect();
    for d in 1..=3 {
        for i in 0..m - d {
            let left_den = knots[i + d] - knots[i];
            let right_den = knots[i + d + 1] - knots[i + 1];
            let left = if left_den > 0.0 { (t - knots[i]) / left_den * b[i] } else { 0.0 };
            let right = if right_den > 0.0 { (knots[i + d + 1] - t) / right_den * b[i + 1] } else { 0.0 };
            b[i] = left + right;
        }
    }
    b.truncate(count);
    b
}
