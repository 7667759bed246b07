//! Acceptance criteria, one PASS/FAIL line each. Exits with status 1 when
//! any criterion fails or overruns its time budget.

use std::process::ExitCode;
use std::thread;

use fdshape::verify::{
    comparison, density_decay, eps_convergence, gradient_check, heaviside_suite, mesh_convergence,
    reparametrization, shape_recovery_check, sign_loss, Check, HeavisideVariant,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Criterion {
    id: u8,
    budget_s: f64,
    run: fn(&mut ChaCha8Rng) -> Check,
}

const CRITERIA: [Criterion; 9] = [
    Criterion {
        id: 1,
        budget_s: 1.0,
        run: |rng| heaviside_suite(1000, HeavisideVariant::Reference, rng),
    },
    Criterion {
        id: 2,
        budget_s: 30.0,
        run: |_| mesh_convergence(&[33, 65, 129], 1.9),
    },
    Criterion {
        id: 3,
        budget_s: 120.0,
        run: |_| eps_convergence(128, &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5]),
    },
    Criterion {
        id: 4,
        budget_s: 60.0,
        run: |rng| comparison(64, 20, rng),
    },
    Criterion {
        id: 5,
        budget_s: 120.0,
        run: |rng| density_decay(128, 20, &[4, 8, 16, 32], 0.05, rng),
    },
    Criterion {
        id: 6,
        budget_s: 60.0,
        run: |rng| gradient_check(64, 5, 5, rng),
    },
    Criterion {
        id: 7,
        budget_s: 1.0,
        run: |_| sign_loss(128),
    },
    Criterion {
        id: 8,
        budget_s: 300.0,
        run: |rng| shape_recovery_check(96, 0.05, rng),
    },
    Criterion {
        id: 9,
        budget_s: 5.0,
        run: |_| reparametrization(128),
    },
];

fn main() -> ExitCode {
    let results: Vec<(u8, f64, Check)> = thread::scope(|scope| {
        let handles: Vec<_> = CRITERIA
            .iter()
            .map(|c| {
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 + u64::from(c.id));
                    (c.id, c.budget_s, (c.run)(&mut rng))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });

    let mut failed = 0;
    for (id, budget, check) in &results {
        let in_budget = check.seconds <= *budget;
        let ok = check.passed && in_budget;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id}: {} {} ({:.2}s, budget {budget}s) {}",
            if ok { "PASS" } else { "FAIL" },
            check.name,
            check.seconds,
            check.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
