mod common;

use blurchain::engine::Budget;
use blurchain::simulate::{
    empirical_conditional, mc_vs_exact, sample_path, McQuery, LOW_POWER_MATCHES, Z_LIMIT,
};

use common::star;

fn queries() -> Vec<McQuery> {
    McQuery::parse_many("y=0,y=0\ny=1 => y\nx=0,* => xy\nxy=1,1,y=0\n").unwrap()
}

#[test]
fn tripling_the_path_shrinks_standard_errors() {
    let model = star();
    let short = sample_path(&model, 100_000, 3).unwrap();
    let long = sample_path(&model, 300_000, 4).unwrap();
    for q in queries() {
        let a = empirical_conditional(&short, model.alphabet(), &q.pattern, q.target).unwrap();
        let b = empirical_conditional(&long, model.alphabet(), &q.pattern, q.target).unwrap();
        for (sa, sb) in a.std_errors.iter().zip(&b.std_errors) {
            assert!(sa / sb >= 2f64.sqrt(), "{} {sa} {sb}", q.pattern);
        }
    }
}

#[test]
fn large_z_scores_are_rare_across_seeds() {
    let model = star();
    let qs = queries();
    let mut bad_runs = 0;
    for seed in 0..50 {
        let report = mc_vs_exact(&model, &qs, 60_000, seed, &Budget::default()).unwrap();
        let powered = report
            .rows
            .iter()
            .filter(|r| r.matches >= LOW_POWER_MATCHES);
        if powered.clone().count() == 0 {
            continue;
        }
        if powered.into_iter().any(|r| r.z.abs() > Z_LIMIT) {
            bad_runs += 1;
        }
    }
    assert!(bad_runs <= 1, "{bad_runs} of 50 runs exceed the z limit");
}

#[test]
fn reports_are_reproducible() {
    let model = star();
    let a = mc_vs_exact(&model, &queries(), 50_000, 9, &Budget::default()).unwrap();
    let b = mc_vs_exact(&model, &queries(), 50_000, 9, &Budget::default()).unwrap();
    assert_eq!(a, b);
    let c = mc_vs_exact(&model, &queries(), 50_000, 10, &Budget::default()).unwrap();
    assert_ne!(a.rows, c.rows);
}
