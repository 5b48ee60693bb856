//! The twelve acceptance criteria, one pass/fail line each.
//!
//! Run with `cargo test -p endoscope --test acceptance -- --nocapture` to see the lines.

use endoscope::checks::*;

fn run(c: Check) -> bool {
    println!("{}", c.line());
    if !c.pass {
        println!("    detail: {}", c.detail);
    }
    c.pass
}

#[test]
fn acceptance() {
    let ec = reference_config(1, 0.5).expect("reference config");
    let finals = final_identity_configs().expect("final configs");
    let results = vec![
        run(orbital_closed_forms()),
        run(germ_identity()),
        run(hecke_volumes()),
        run(kloosterman_crt()),
        run(dirichlet_series()),
        run(special_functions()),
        run(zagier_functional_equation()),
        run(zagier_afe()),
        run(poisson_pairs()),
        run(poisson_blocks(&ec)),
        run(spectral_equalities(&ec)),
        run(final_identity(&finals)),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
