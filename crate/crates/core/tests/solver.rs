use barrierlab::solver::{measure_decay, simulate, InitialData, RadialGrid, SolverOptions};
use barrierlab::{EnvelopeCalculus, ProblemSpec, WeightSpec};

fn reference() -> ProblemSpec {
    ProblemSpec::new(3, 2.0, 2.0, WeightSpec::power(1.0).unwrap()).unwrap()
}

fn opts(checkpoints: Vec<f64>) -> SolverOptions {
    SolverOptions {
        checkpoints,
        ..SolverOptions::default()
    }
}

#[test]
fn ordered_data_stay_ordered() {
    let pr = reference();
    let grid = RadialGrid::new(12.0, 400).unwrap();
    let pairs = [
        (InitialData::Bump { radius: 1.0, height: 1.0 }, InitialData::Bump { radius: 1.0, height: 2.0 }),
        (InitialData::Bump { radius: 0.5, height: 1.0 }, InitialData::Bump { radius: 1.5, height: 1.0 }),
        (InitialData::Zero, InitialData::Bump { radius: 2.0, height: 0.3 }),
    ];
    let checkpoints = vec![0.1, 1.0, 5.0, 20.0];
    for (lo, hi) in pairs {
        let a = simulate(&pr, &lo.sample(&grid), &grid, 20.0, &opts(checkpoints.clone())).unwrap();
        let b = simulate(&pr, &hi.sample(&grid), &grid, 20.0, &opts(checkpoints.clone())).unwrap();
        for (fa, fb) in a.fields.iter().zip(&b.fields) {
            assert!(fa.iter().zip(fb).all(|(x, y)| x <= y), "{lo:?} vs {hi:?}");
        }
    }
}

/// Cell averages of `fine` over groups of `ratio` cells.
fn coarsen(fine: &[f64], ratio: usize) -> Vec<f64> {
    fine.chunks(ratio).map(|c| c.iter().sum::<f64>() / ratio as f64).collect()
}

#[test]
fn refinement_differences_shrink() {
    let pr = reference();
    let data = InitialData::Bump { radius: 1.0, height: 1.0 };
    let t_end = 10.0;
    let levels = [200usize, 400, 800];
    let finals: Vec<Vec<f64>> = levels
        .iter()
        .map(|&n| {
            let grid = RadialGrid::new(8.0, n).unwrap();
            let sol = simulate(&pr, &data.sample(&grid), &grid, t_end, &opts(vec![t_end])).unwrap();
            sol.fields.last().unwrap().clone()
        })
        .collect();
    let diff = |coarse: &[f64], fine: &[f64]| {
        coarse
            .iter()
            .zip(coarsen(fine, 2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let d1 = diff(&finals[0], &finals[1]);
    let d2 = diff(&finals[1], &finals[2]);
    assert!(d2 < d1, "{d1} {d2}");
    assert!(d2 < 0.05 * finals[2].iter().cloned().fold(0.0, f64::max));
}

#[test]
fn decay_exponent_ignores_data_scale() {
    let pr = reference();
    let calc = EnvelopeCalculus::new(pr);
    let grid = RadialGrid::new(40.0, 800).unwrap();
    let t_end = 2e4;
    let fit = |h: f64| {
        let data = InitialData::Bump { radius: 1.0, height: h };
        let sol = simulate(&pr, &data.sample(&grid), &grid, t_end, &SolverOptions::default()).unwrap();
        measure_decay(&sol, &calc).unwrap().fitted_exponent
    };
    let (e1, e2) = (fit(1.0), fit(2.0));
    assert!((e1 - e2).abs() <= 0.05, "{e1} {e2}");
}
