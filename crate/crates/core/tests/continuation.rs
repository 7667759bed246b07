use std::sync::Arc;

use fdshape::generators::disk_quadratic;
use fdshape::heaviside::Smoothing;
use fdshape::nonsmooth::NonsmoothMap;
use fdshape::objective::ProblemData;
use fdshape::optimizer::{continuation, OptimizerConfig};
use fdshape::pde::{solve_masked, solve_state, SolverConfig};
use fdshape::shapes::extract_shape;
use fdshape::{Field, Grid, ObservationRegion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn self_anchored(n: usize) -> (ProblemData, Field) {
    let g = Arc::new(Grid::unit_square(n, ObservationRegion::default()).unwrap());
    let truth = disk_quadratic(&g, (0.5, 0.5), 0.3).unwrap();
    let mask = Arc::new(extract_shape(&truth).unwrap());
    let f = Field::constant(&g, 10.0);
    let solver = SolverConfig::default();
    let y_d = solve_masked(&NonsmoothMap::Max0, &mask, &f, &solver).unwrap().y;
    let data = ProblemData::new(f, y_d, 1e-3, NonsmoothMap::Max0, truth.clone(), solver).unwrap();
    (data, truth)
}

#[test]
fn self_anchored_run_converges_along_the_schedule() {
    let (data, truth) = self_anchored(64);
    let grid = truth.grid().clone();
    let mask = extract_shape(&truth).unwrap();
    let cfg = OptimizerConfig {
        max_iters: 20,
        ..OptimizerConfig::default()
    };
    let res = continuation(&data, &truth, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert!(res.trace.is_monotone_per_phase());

    let mut gaps = Vec::new();
    let mut ext = Vec::new();
    for p in &res.phases {
        let s = Smoothing::new(p.eps).unwrap();
        let y = solve_state(&data.beta, &s, &p.control, &data.f, &data.solver).unwrap().y;
        let (mut gap, mut mass) = (0.0, 0.0);
        for k in 0..grid.len() {
            let w = grid.weight(k);
            if mask.component()[k] {
                gap += w * (y.values()[k] - data.y_d.values()[k]).powi(2);
            } else {
                mass += w * y.values()[k].powi(2);
            }
        }
        gaps.push(gap.sqrt());
        ext.push(mass);
    }
    for w in gaps.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{gaps:?}");
    }
    for w in ext.windows(2) {
        assert!(w[1] <= 0.9 * w[0], "{ext:?}");
    }

    let dist: Vec<f64> = res.phases.iter().map(|p| p.w_dist_anchor).collect();
    let peak = dist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    for w in dist[peak..].windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{dist:?}");
    }
    assert!(*dist.last().unwrap() <= 0.25 * dist[peak], "{dist:?}");
}

#[test]
fn runs_are_deterministic() {
    let (data, truth) = self_anchored(33);
    let start = disk_quadratic(truth.grid(), (0.48, 0.5), 0.22).unwrap();
    let cfg = OptimizerConfig {
        max_iters: 5,
        ..OptimizerConfig::default()
    };
    let a = continuation(&data, &start, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = continuation(&data, &start, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
    assert_eq!(a.certified, b.certified);
}
