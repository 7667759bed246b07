//! Discrete shapes `Ω_g = {g < 0}`, the component containing `E`, membership
//! tests for the admissible class `F_s`, and measure-based shape metrics.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{measure, Field, Grid};
use crate::heaviside::heaviside;

/// Quintic ramp `6t⁵ − 15t⁴ + 10t³` on `[0, 1]`, clamped outside.
pub fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// The node sets of a discrete shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeMask {
    inside: Vec<bool>,
    component: Vec<bool>,
    area: f64,
    boundary_nodes: Vec<usize>,
}

impl ShapeMask {
    /// Interior nodes with `g < 0`.
    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    /// The 4-connected component of `inside` containing `E`.
    pub fn component(&self) -> &[bool] {
        &self.component
    }

    /// Measure of the component.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Component nodes with a 4-neighbour outside the component.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    /// Whether `inside` consists of the component alone.
    pub fn is_single_component(&self) -> bool {
        self.inside == self.component
    }
}

/// Labels of the 4-connected components of `mask`; `None` off the mask.
pub fn label_components(grid: &Grid, mask: &[bool]) -> (Vec<Option<usize>>, usize) {
    let mut label = vec![None; grid.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !mask[start] || label[start].is_some() {
            continue;
        }
        label[start] = Some(count);
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            for nb in grid.neighbors(k) {
                if mask[nb] && label[nb].is_none() {
                    label[nb] = Some(count);
                    queue.push_back(nb);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Grid-step (4-neighbour) distance from every node to the nearest node of `seed`.
pub(crate) fn bfs_distance(grid: &Grid, seed: &[bool]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut queue = VecDeque::new();
    for k in 0..grid.len() {
        if seed[k] {
            dist[k] = 0.0;
            queue.push_back(k);
        }
    }
    while let Some(k) = queue.pop_front() {
        for nb in grid.neighbors(k) {
            if dist[nb].is_infinite() {
                dist[nb] = dist[k] + 1.0;
                queue.push_back(nb);
            }
        }
    }
    dist
}

/// Extracts `Ω_g` and its `E`-component.
pub fn extract_shape(g: &Field) -> Result<ShapeMask> {
    let grid = g.grid();
    let v = g.values();
    if let Some(k) = (0..grid.len()).find(|&k| grid.in_e(k) && v[k] >= 0.0) {
        let (i, j) = grid.ij(k);
        return Err(Error::ENotInsideShape(format!(
            "g = {} ≥ 0 at E node ({i},{j})",
            v[k]
        )));
    }
    let inside: Vec<bool> = (0..grid.len())
        .map(|k| !grid.is_boundary(k) && v[k] < 0.0)
        .collect();
    let mut component = vec![false; grid.len()];
    let mut queue: VecDeque<usize> = (0..grid.len()).filter(|&k| grid.in_e(k)).collect();
    for &k in &queue {
        component[k] = true;
    }
    while let Some(k) = queue.pop_front() {
        for nb in grid.neighbors(k) {
            if inside[nb] && !component[nb] {
                component[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    let boundary_nodes = (0..grid.len())
        .filter(|&k| component[k] && grid.neighbors(k).any(|nb| !component[nb]))
        .collect();
    Ok(ShapeMask {
        area: measure(grid, &component),
        inside,
        component,
        boundary_nodes,
    })
}

/// The three defining conditions of the discrete admissible class.
#[derive(Clone, Debug, PartialEq)]
pub struct FsReport {
    pub neg_on_e: bool,
    pub positive_on_boundary: bool,
    pub nondegenerate: bool,
    /// `max g` over `E` nodes.
    pub max_on_e: f64,
    /// `min g` over `∂D` nodes.
    pub min_on_boundary: f64,
    /// `min (|∇_h g| + |g|)` over interior nodes.
    pub min_margin: f64,
    pub tau: f64,
}

impl FsReport {
    pub fn is_member(&self) -> bool {
        self.neg_on_e && self.positive_on_boundary && self.nondegenerate
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.neg_on_e {
            out.push("g < 0 on E");
        }
        if !self.positive_on_boundary {
            out.push("g > 0 on boundary");
        }
        if !self.nondegenerate {
            out.push("|grad g| + |g| > tau");
        }
        out
    }

    pub fn report(&self) -> String {
        format!(
            "member={}\nneg_on_e={}\npositive_on_boundary={}\nnondegenerate={}\nmax_on_e={:.6e}\nmin_on_boundary={:.6e}\nmin_margin={:.6e}\ntau={:.6e}\n",
            self.is_member(),
            self.neg_on_e,
            self.positive_on_boundary,
            self.nondegenerate,
            self.max_on_e,
            self.min_on_boundary,
            self.min_margin,
            self.tau
        )
    }
}

/// Default nondegeneracy threshold `1e−8·(1 + ‖g‖_∞)`.
pub fn default_tau(g: &Field) -> f64 {
    1e-8 * (1.0 + g.max_abs())
}

pub fn validate_fs(g: &Field, tau: f64) -> FsReport {
    let grid = g.grid();
    let v = g.values();
    let max_on_e = (0..grid.len())
        .filter(|&k| grid.in_e(k))
        .map(|k| v[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let min_on_boundary = (0..grid.len())
        .filter(|&k| grid.is_boundary(k))
        .map(|k| v[k])
        .fold(f64::INFINITY, f64::min);
    let min_margin = (0..grid.len())
        .filter(|&k| !grid.is_boundary(k))
        .map(|k| g.gradient_norm_at(k) + v[k].abs())
        .fold(f64::INFINITY, f64::min);
    FsReport {
        neg_on_e: max_on_e < 0.0,
        positive_on_boundary: min_on_boundary > 0.0,
        nondegenerate: min_margin > tau,
        max_on_e,
        min_on_boundary,
        min_margin,
        tau,
    }
}

/// `∫_D 1 − H(g)`.
pub fn area_via_heaviside(g: &Field) -> f64 {
    let grid = g.grid();
    g.values()
        .iter()
        .enumerate()
        .map(|(k, &v)| grid.weight(k) * (1.0 - heaviside(v)))
        .sum()
}

/// `μ{h > 0 ∧ h_n ≤ 0}`.
pub fn sign_loss_measure(h: &Field, hn: &Field) -> Result<f64> {
    h.check_same_grid(hn)?;
    let grid = h.grid();
    Ok(h.values()
        .iter()
        .zip(hn.values())
        .enumerate()
        .filter(|(_, (&a, &b))| a > 0.0 && b <= 0.0)
        .fold(0.0, |acc, (k, _)| acc + grid.weight(k)))
}

/// `(μ{g₁ < 0 ∧ g₂ ≥ 0}, μ{g₁ ≥ 0 ∧ g₂ < 0})`.
pub fn shape_distance(g1: &Field, g2: &Field) -> Result<(f64, f64)> {
    let n1 = g1.scale(-1.0);
    let n2 = g2.scale(-1.0);
    Ok((sign_loss_measure(&n1, &n2)?, sign_loss_measure(&n2, &n1)?))
}

/// Lifts every negative region other than the component of `mask` above zero.
///
/// Returns `ĝ + |min ĝ|·p` with a plateau `p` that vanishes on the component,
/// equals 2 on the other negative components and ramps in between along the
/// ratio of grid distances to the two sets.
pub fn reparametrize(g_hat: &Field, mask: &ShapeMask) -> Result<Field> {
    let grid = g_hat.grid();
    if mask.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: mask.len(),
        });
    }
    let min = g_hat.min();
    if min >= 0.0 {
        return Err(Error::NotInFs(format!("min g = {min} is not negative")));
    }
    let others: Vec<bool> = (0..grid.len())
        .map(|k| mask.inside()[k] && !mask.component()[k])
        .collect();
    if !others.iter().any(|&b| b) {
        return Ok(g_hat.clone());
    }
    let d_omega = bfs_distance(grid, mask.component());
    let d_other = bfs_distance(grid, &others);
    let lift = -min;
    let values = (0..grid.len())
        .map(|k| {
            let (a, b) = (d_omega[k], d_other[k]);
            let ratio = if a == 0.0 {
                0.0
            } else if a.is_infinite() {
                1.0
            } else {
                a / (a + b)
            };
            g_hat.values()[k] + lift * 2.0 * smootherstep(ratio)
        })
        .collect();
    Field::new(grid, values)
}

/// A piece of the discrete zero level set.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Zero level set of `g` by marching squares (inside means `g < 0`).
pub fn level_set_polylines(g: &Field) -> Vec<Polyline> {
    let grid = g.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let v = g.values();
    let neg = |k: usize| v[k] < 0.0;
    let hedge = |i: usize, j: usize| 2 * (j * nx + i);
    let vedge = |i: usize, j: usize| 2 * (j * nx + i) + 1;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); 2 * grid.len()];
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [
                grid.index(i, j),
                grid.index(i + 1, j),
                grid.index(i + 1, j + 1),
                grid.index(i, j + 1),
            ];
            let s: Vec<bool> = c.iter().map(|&k| neg(k)).collect();
            // bottom, right, top, left
            let edges = [hedge(i, j), vedge(i + 1, j), hedge(i, j + 1), vedge(i, j)];
            let cut = [s[0] != s[1], s[1] != s[2], s[3] != s[2], s[0] != s[3]];
            let crossing: Vec<usize> = (0..4).filter(|&e| cut[e]).collect();
            let mut link = |a: usize, b: usize| {
                adj[edges[a]].push(edges[b]);
                adj[edges[b]].push(edges[a]);
            };
            match crossing.len() {
                2 => link(crossing[0], crossing[1]),
                4 => {
                    let center = 0.25 * c.iter().map(|&k| v[k]).sum::<f64>();
                    if (center < 0.0) == s[0] {
                        link(0, 1);
                        link(2, 3);
                    } else {
                        link(0, 3);
                        link(1, 2);
                    }
                }
                _ => {}
            }
        }
    }
    let point = |e: usize| -> (f64, f64) {
        let node = e / 2;
        let (i, j) = grid.ij(node);
        let other = if e.is_multiple_of(2) { grid.index(i + 1, j) } else { grid.index(i, j + 1) };
        let (a, b) = (v[node], v[other]);
        let t = if a == b { 0.5 } else { a / (a - b) };
        let (x0, y0) = grid.coords(node);
        if e.is_multiple_of(2) {
            (x0 + t * grid.h(), y0)
        } else {
            (x0, y0 + t * grid.h())
        }
    };
    let mut seen = vec![false; adj.len()];
    let mut out = Vec::new();
    let starts: Vec<usize> = (0..adj.len())
        .filter(|&e| adj[e].len() == 1)
        .chain((0..adj.len()).filter(|&e| adj[e].len() >= 2))
        .collect();
    for start in starts {
        if seen[start] {
            continue;
        }
        let mut chain = vec![start];
        seen[start] = true;
        let mut cur = start;
        let closed;
        loop {
            let next = adj[cur].iter().copied().find(|&n| !seen[n]);
            match next {
                Some(n) => {
                    seen[n] = true;
                    chain.push(n);
                    cur = n;
                }
                None => {
                    closed = chain.len() > 2 && adj[cur].contains(&start);
                    break;
                }
            }
        }
        out.push(Polyline {
            points: chain.into_iter().map(point).collect(),
            closed,
        });
    }
    out
}
