use lmg_core::equilibrium::{build_equilibrium, finite_time_average_oracle, DEFAULT_RELATIVE_TOLERANCE};
use lmg_core::spectral::{eigensolve, HamiltonianParams};
use lmg_core::spin::{spin_coherent_state, Parity, SpinBasis};
use lmg_core::Complex64;

fn distances(lambda: f64) -> Vec<f64> {
    let basis = SpinBasis::from_particles(20);
    let dec = eigensolve(&HamiltonianParams::new(basis, lambda).unwrap()).unwrap();
    let psi = spin_coherent_state(basis, 0.5).unwrap();
    let exact = build_equilibrium(&psi, &dec, DEFAULT_RELATIVE_TOLERANCE)
        .unwrap()
        .to_dense(&dec);
    [1e2, 1e3, 1e4]
        .iter()
        .map(|&t| (finite_time_average_oracle(&psi, lambda, t, 0.01).unwrap() - &exact).norm())
        .collect()
}

#[test]
fn time_average_converges_to_ensemble() {
    for lambda in [1.5, 0.5] {
        let d = distances(lambda);
        assert!(d.windows(2).all(|w| w[1] < w[0]), "Λ={lambda}: {d:?}");
        assert!(d[2] <= 1e-2, "Λ={lambda}: {d:?}");
    }
}

#[test]
fn degenerate_coherence_survives_averaging() {
    let basis = SpinBasis::from_particles(40);
    let dec = eigensolve(&HamiltonianParams::new(basis, 3.5).unwrap()).unwrap();
    let pair = dec.doublets()[0];
    let mut c = [
        vec![Complex64::new(0.0, 0.0); dec.sector(Parity::Even).dim()],
        vec![Complex64::new(0.0, 0.0); dec.sector(Parity::Odd).dim()],
    ];
    c[0][pair.even] = Complex64::new(0.5f64.sqrt(), 0.0);
    c[1][pair.odd] = Complex64::new(0.5f64.sqrt(), 0.0);
    let psi = dec.synthesize(&c);
    let exact = build_equilibrium(&psi, &dec, DEFAULT_RELATIVE_TOLERANCE)
        .unwrap()
        .to_dense(&dec);
    let avg = finite_time_average_oracle(&psi, 3.5, 100.0, 0.01).unwrap();
    let d = (avg - &exact).norm();
    assert!(d < 1e-6, "distance {d}, splitting {}", pair.splitting);
    // a pure projector has unit purity
    let purity = (&exact * &exact).trace().re;
    assert!((purity - 1.0).abs() < 1e-10);
}
