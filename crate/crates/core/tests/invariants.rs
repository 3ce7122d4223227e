//! Invariants checked over randomized batteries and step refinement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shrinkflow::cli::{random_admissible_vector, random_band_vector};
use shrinkflow::doubling::{self, DEFAULT_GAMMA0};
use shrinkflow::drift_heat::{self, GapChoice, Verdict};
use shrinkflow::flow::{self, FlowConfig, Trajectory};
use shrinkflow::spectral::{self, ModeVector, Spectrum};
use shrinkflow::{RadialGraph, Shrinker};

fn spectra() -> Vec<Spectrum> {
    vec![
        spectral::build_spectrum(&Shrinker::circle(), 24).unwrap(),
        spectral::build_spectrum(&Shrinker::new(2).unwrap(), 10).unwrap(),
    ]
}

fn random_vector(spectrum: &Spectrum, rng: &mut ChaCha8Rng) -> ModeVector {
    let c = (0..spectrum.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    ModeVector::new(spectrum, c).unwrap()
}

#[test]
fn norm_matches_quadrature_along_linear_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spectrum in spectra() {
        for _ in 0..20 {
            let a = random_vector(&spectrum, &mut rng);
            for s in [0.0, 0.1, 0.5, 1.0, 2.0] {
                let at = drift_heat::evolve_linear(&a, s).unwrap();
                let u = spectral::synthesize(&at);
                let quad = spectral::inner_product(&u, &u, &spectrum).unwrap().sqrt();
                let closed = drift_heat::norm_at(&a, s);
                assert!(
                    (quad - closed).abs() <= 1e-10 * closed.max(1.0),
                    "s={s}: {quad} vs {closed}"
                );
            }
        }
    }
}

#[test]
fn gap_estimate_holds_across_scales() {
    let full = [
        spectral::build_spectrum(&Shrinker::circle(), spectral::DEFAULT_CIRCLE_LEVELS).unwrap(),
        spectral::build_spectrum(&Shrinker::new(2).unwrap(), spectral::DEFAULT_SPHERE_LEVELS)
            .unwrap(),
    ];
    for spectrum in full {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for j in 1..=10 {
            let l0 = 0.045 * j as f64;
            for c0 in [2.0, 5.0] {
                let choice = drift_heat::choose_gap_l(&spectrum, l0, c0).unwrap();
                let violations = (0..1000)
                    .filter(|_| {
                        let a = random_admissible_vector(&spectrum, &choice, &mut rng);
                        drift_heat::quantitative_three_annulus(&a, &choice)
                            .verdict
                            .is_violation()
                    })
                    .count();
                assert_eq!(violations, 0, "L0={l0} C0={c0}");
            }
        }
    }
}

#[test]
fn linear_trajectories_never_violate_the_frequency_implication() {
    let spectrum = spectral::build_spectrum(&Shrinker::circle(), 24).unwrap();
    let (l0, c0, epsilon) = (0.4, 2.0, FlowConfig::DEFAULT_EPSILON);
    let choice = drift_heat::choose_gap_l(&spectrum, l0, c0).unwrap();
    let a_exp = doubling::exponent_from_b(choice.b, DEFAULT_GAMMA0).unwrap();
    let taus: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut admissible, mut violations) = (0usize, 0usize);
    for _ in 0..1000 {
        let a = random_band_vector(&spectrum, 8, &mut rng);
        let amp = 10f64.powf(rng.random_range(-6.0..-2.0)) / a.norm();
        let a = a.scaled(amp);
        let d: Vec<f64> = taus.iter().map(|&t| drift_heat::norm_at(&a, t)).collect();
        let traj = Trajectory::from_distances(&taus, &d).unwrap();
        for &tau in taus.iter().step_by(10).take_while(|t| **t + 1.0 <= 3.0) {
            for j in 0..16 {
                let l = 0.5 * l0 + 0.5 * l0 * j as f64 / 15.0;
                let at = GapChoice { l, ..choice };
                let r = doubling::frequency_window_check(&traj, tau, &at, a_exp, epsilon).unwrap();
                match r.verdict {
                    Verdict::Holds => admissible += 1,
                    Verdict::Violated => {
                        admissible += 1;
                        violations += 1;
                    }
                    _ => {}
                }
            }
        }
    }
    assert!(admissible > 0);
    assert_eq!(
        violations, 0,
        "{violations} of {admissible} admissible windows"
    );
}

#[test]
fn audits_agree_with_closed_forms_on_linear_trajectories() {
    let spectrum = spectral::build_spectrum(&Shrinker::circle(), 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
    for _ in 0..5 {
        let a = random_band_vector(&spectrum, 5, &mut rng).scaled(1e-3);
        let traj = Trajectory::from_linear(&a, &times, 1.0).unwrap();
        for (s, &t) in traj.states.iter().zip(&times) {
            let exact = drift_heat::norm_at(&a, t);
            assert!((s.distance - exact).abs() <= 1e-10 * exact, "t={t}");
        }
        let est = doubling::doubling_constant(&traj).unwrap();
        let exact = times
            .iter()
            .filter(|t| **t + 1.0 <= 2.0 + 1e-9)
            .map(|&t| drift_heat::norm_at(&a, t) / drift_heat::norm_at(&a, t + 1.0))
            .fold(0.0, f64::max);
        let got = est.value;
        assert!((got - exact).abs() <= 1e-8 * exact, "{got} vs {exact}");
        for tau in [0.0, 0.5, 1.0] {
            let n = flow::decay_order(&traj, tau).unwrap();
            let closed = drift_heat::log_norm_at(&a, tau) - drift_heat::log_norm_at(&a, tau + 1.0);
            assert!((n - closed).abs() < 1e-9, "tau={tau}: {n} vs {closed}");
        }
    }
}

#[test]
fn semicontinuity_constant_is_stable_under_step_refinement() {
    let s = Shrinker::circle();
    let grid = s.default_grid().unwrap();
    let profile = flow::mode_profile(&grid, 2, 0, false).unwrap();
    let graph = RadialGraph::new(s, grid, profile.iter().map(|v| v * 1e-3).collect()).unwrap();
    let constants: Vec<f64> = [1e-3, 5e-4]
        .iter()
        .map(|&dtau| {
            let mut config = FlowConfig::for_shrinker(&s);
            config.dtau = dtau;
            let traj = flow::run(&graph, &config, 2.0, 0.01).unwrap();
            let r = flow::semicontinuity_audit(&traj, config.epsilon).unwrap();
            assert_eq!(r.verdict, Verdict::Holds);
            r.empirical_c0
        })
        .collect();
    let rel = (constants[0] - constants[1]).abs() / constants[1];
    assert!(rel < 1e-6, "{constants:?}");
}

#[test]
fn chain_bound_covers_linear_trajectories() {
    let spectrum = spectral::build_spectrum(&Shrinker::circle(), 24).unwrap();
    let (l0, c0) = (0.4, 2.0);
    let choice = drift_heat::choose_gap_l(&spectrum, l0, c0).unwrap();
    let a_exp = doubling::exponent_from_b(choice.b, DEFAULT_GAMMA0).unwrap();
    let taus: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut bounded = 0;
    for _ in 0..200 {
        let a = random_band_vector(&spectrum, 3, &mut rng).scaled(1e-4);
        let d: Vec<f64> = taus.iter().map(|&t| drift_heat::norm_at(&a, t)).collect();
        let traj = Trajectory::from_distances(&taus, &d).unwrap();
        let audit = doubling::doubling_certificate(&traj, l0, a_exp, c0).unwrap();
        assert_ne!(audit.verdict, doubling::AuditOutcome::Violated);
        assert_eq!(audit.frequency_violations, 0);
        let Some(last) = audit.branch_history.last() else {
            continue;
        };
        if last.branch != doubling::StageBranch::BoundedRatio
            || audit.verdict != doubling::AuditOutcome::Bounded
        {
            continue;
        }
        bounded += 1;
        let m = audit.chain_steps.unwrap();
        let chain = audit.chain_constant.unwrap();
        assert_eq!(chain, (2.0 * c0).powi(m as i32) * c0 * c0);
        for &t in taus
            .iter()
            .filter(|t| **t >= last.start && **t + 1.0 <= 4.0)
        {
            let ratio = drift_heat::norm_at(&a, t) / drift_heat::norm_at(&a, t + 1.0);
            assert!(ratio <= chain, "ratio {ratio} at {t} exceeds {chain}");
        }
    }
    assert!(bounded > 0);
}
