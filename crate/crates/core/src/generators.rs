//! Analytic and random field generators.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::grid::{Field, Grid, Rect};
use crate::shapes::smootherstep;

pub fn constant(grid: &Arc<Grid>, c: f64) -> Field {
    Field::constant(grid, c)
}

/// `amplitude·exp(−|x − c|²/(2σ²))`.
pub fn gaussian(grid: &Arc<Grid>, amplitude: f64, center: (f64, f64), sigma: f64) -> Result<Field> {
    Field::from_fn(grid, |x, y| {
        let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
        amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Signed distance to a disk, negative inside.
pub fn disk_sdf(grid: &Arc<Grid>, center: (f64, f64), radius: f64) -> Result<Field> {
    Field::from_fn(grid, |x, y| (x - center.0).hypot(y - center.1) - radius)
}

/// `|x − c|² − r²`, negative inside the disk and smooth everywhere.
pub fn disk_quadratic(grid: &Arc<Grid>, center: (f64, f64), radius: f64) -> Result<Field> {
    Field::from_fn(grid, |x, y| {
        (x - center.0).powi(2) + (y - center.1).powi(2) - radius * radius
    })
}

/// Signed distance to a rectangle, negative inside.
pub fn rect_sdf(grid: &Arc<Grid>, rect: Rect) -> Result<Field> {
    Field::from_fn(grid, |x, y| {
        let (cx, cy) = rect.center();
        let dx = (x - cx).abs() - 0.5 * rect.width();
        let dy = (y - cy).abs() - 0.5 * rect.height();
        let outside = dx.max(0.0).hypot(dy.max(0.0));
        outside + dx.max(dy).min(0.0)
    })
}

/// `sin(πx)·sin(πy)`.
pub fn sine_product(grid: &Arc<Grid>) -> Field {
    Field::from_fn(grid, |x, y| (PI * x).sin() * (PI * y).sin())
        .expect("sine product is finite")
}

/// Random trigonometric field `Σ a_kl cos(kπx + φ) cos(lπy + ψ)/(1 + k² + l²)`
/// for `1 ≤ k, l ≤ modes`.
pub fn random_smooth(grid: &Arc<Grid>, rng: &mut impl Rng, modes: usize, amplitude: f64) -> Field {
    let mut terms = Vec::new();
    for k in 1..=modes {
        for l in 1..=modes {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let psi: f64 = rng.gen_range(0.0..2.0 * PI);
            terms.push((k as f64, l as f64, a / (1.0 + (k * k + l * l) as f64), phi, psi));
        }
    }
    Field::from_fn(grid, |x, y| {
        amplitude
            * terms
                .iter()
                .map(|&(k, l, a, phi, psi)| a * (k * PI * x + phi).cos() * (l * PI * y + psi).cos())
                .sum::<f64>()
    })
    .expect("trigonometric sum is finite")
}

/// A random relaxed control: a scaled disk-like bowl around `E` plus a smooth
/// perturbation, clamped to `min{g, 0}` on `E`.
pub fn random_relaxed_control(grid: &Arc<Grid>, rng: &mut impl Rng) -> Field {
    relaxed_control(grid, rng, None)
}

/// As [`random_relaxed_control`], scaled by `amplitude` and multiplied by a
/// ramp that vanishes on `∂D` and reaches one at distance `width`.
pub fn random_relaxed_control_windowed(
    grid: &Arc<Grid>,
    rng: &mut impl Rng,
    width: f64,
    amplitude: f64,
) -> Field {
    relaxed_control(grid, rng, Some((width, amplitude)))
}

fn relaxed_control(grid: &Arc<Grid>, rng: &mut impl Rng, window: Option<(f64, f64)>) -> Field {
    let cx = 0.5 + rng.gen_range(-0.05..0.05);
    let cy = 0.5 + rng.gen_range(-0.05..0.05);
    let r: f64 = rng.gen_range(0.22..0.35);
    let scale: f64 = rng.gen_range(0.4..0.8);
    let bowl = Field::from_fn(grid, |x, y| {
        scale * ((x - cx).powi(2) + (y - cy).powi(2) - r * r) / (r * r)
    })
    .expect("bowl is finite");
    let noise = random_smooth(grid, rng, 4, 1.0);
    let values = (0..grid.len())
        .map(|k| {
            let mut v = bowl.values()[k] + noise.values()[k];
            if let Some((w, a)) = window {
                let (x, y) = grid.coords(k);
                v *= a * smootherstep(grid.domain().distance_to_boundary(x, y) / w);
            }
            if grid.in_e(k) {
                v.min(0.0)
            } else {
                v
            }
        })
        .collect();
    Field::new(grid, values).expect("finite control")
}
