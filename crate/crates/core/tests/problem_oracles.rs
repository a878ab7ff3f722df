//! Problem evaluators against pymoo-generated reference values and the DTLZ2
//! sphere identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqdac_core::moead::{Problem, ProblemKind};

const FIXTURE: &str = include_str!("fixtures/wfg_reference.csv");

#[test]
fn wfg_and_dtlz_match_reference_evaluator() {
    let mut rows = 0;
    let mut worst: f64 = 0.0;
    for line in FIXTURE.lines().filter(|l| !l.starts_with('#') && !l.starts_with("problem")) {
        let mut cols = line.split(',');
        let kind = ProblemKind::from_name(cols.next().unwrap()).unwrap();
        let values: Vec<f64> = cols.map(|c| c.parse().unwrap()).collect();
        let (x, f) = values.split_at(12);
        let problem = Problem::new(kind, 3, 12).unwrap();
        let got = problem.evaluate(x).unwrap();
        for (a, b) in got.iter().zip(f) {
            let err = (a - b).abs();
            worst = worst.max(err);
            assert!(err <= 1e-9, "{kind:?} x={x:?}: got {got:?}, expected {f:?}");
        }
        rows += 1;
    }
    assert_eq!(rows, 400);
    println!("worst absolute deviation {worst:e}");
}

#[test]
fn dtlz2_tail_at_half_lies_on_unit_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for d in [6, 9, 12] {
        let problem = Problem::new(ProblemKind::Dtlz2, 3, d).unwrap();
        for _ in 0..1000 {
            let mut x = vec![0.5; d];
            x[0] = rng.random();
            x[1] = rng.random();
            let f = problem.evaluate(&x).unwrap();
            let norm: f64 = f.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }
}
