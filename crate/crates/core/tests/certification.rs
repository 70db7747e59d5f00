use barrierlab::barriers::{select_sub, select_super};
use barrierlab::residual::{verify, ResidualGrid};
use barrierlab::{EnvelopeCalculus, ProblemSpec, WeightSpec};

fn coarse() -> ResidualGrid {
    ResidualGrid {
        n_radii: 120,
        n_times: 12,
        ..ResidualGrid::default()
    }
}

fn certify(n: u32, p: f64, m: f64, w: WeightSpec) {
    let calc = EnvelopeCalculus::new(ProblemSpec::new(n, p, m, w).unwrap());
    for params in [select_super(&calc).unwrap(), select_sub(&calc, 1.0).unwrap(), select_sub(&calc, 0.3).unwrap()] {
        let rep = verify(&params, &calc, &coarse()).unwrap();
        assert!(
            rep.pass,
            "{:?} N={n} p={p} m={m} {w:?}: worst {} at {:?}, disagreements {}, sandwich {:?}",
            params.kind, rep.worst_value, rep.worst_location, rep.reduced_form_disagreements, rep.time_derivative_sandwich
        );
    }
}

#[test]
fn stock_weights_at_p_two() {
    for w in [
        WeightSpec::power(1.0).unwrap(),
        WeightSpec::power(1.5).unwrap(),
        WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap(),
    ] {
        certify(3, 2.0, 2.0, w);
    }
}

#[test]
fn degenerate_and_singular_p() {
    let w = WeightSpec::power(0.8).unwrap();
    certify(4, 2.5, 1.5, w);
    certify(3, 1.5, 2.0, w);
    certify(5, 3.0, 0.5, WeightSpec::zygmund(0.5, 0.5, 2.0).unwrap());
}
