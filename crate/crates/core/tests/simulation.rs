use chemostat_core::certificates::{
    check_decay, check_extinction, check_invariance, check_iss, delta2_integral, disturbance_cap, iiss_check,
    multi_certificate, settling_time,
};
use chemostat_core::integrator::{integrate, oracle_integrate};
use chemostat_core::model::error_coords;
use chemostat_core::simulate::{simulate_error, simulate_multi, simulate_single, PerturbedSystem};
use chemostat_core::{
    AugmentedState, Certificate, DisturbanceKind, DisturbanceMode, DisturbanceSpec, IntegratorConfig, ModelParams,
    SpeciesGrowth, State,
};
use proptest::prelude::*;

fn params() -> ModelParams {
    ModelParams::new(10.0, 0.5).unwrap()
}

fn iss_cert() -> Certificate {
    Certificate::new(params(), None, DisturbanceMode::Iss).unwrap()
}

fn fig3_disturbance() -> DisturbanceSpec {
    DisturbanceSpec::new(DisturbanceKind::ExpDecay { amplitude: 0.5, rate: 1.0 }, 0.5, DisturbanceMode::Iiss).unwrap()
}

fn zero_disturbance() -> DisturbanceSpec {
    DisturbanceSpec::zero(1e-4, DisturbanceMode::Iss).unwrap()
}

#[test]
fn error_coordinates_agree_with_direct_error_simulation() {
    let u = fig3_disturbance();
    let cfg = IntegratorConfig::default();
    let traj = simulate_single(params(), &u, &iss_cert(), State::new(1.0, 2.0), &cfg).unwrap();
    let e0 = error_coords(State::new(1.0, 2.0), 0.0).unwrap();
    let direct = simulate_error(params(), &u, e0, &cfg).unwrap();
    assert_eq!(direct.t.len(), traj.samples.len());
    let worst = traj
        .samples
        .iter()
        .zip(&direct.y)
        .map(|(s, e)| (s.z_tilde - e[0]).abs().max((s.xi_tilde - e[1]).abs()))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn oracle_agrees_with_default_step_on_fig3() {
    let u = fig3_disturbance();
    let sys = PerturbedSystem {
        params: params(),
        disturbance: &u,
    };
    let cfg = IntegratorConfig {
        record_every: 100,
        ..Default::default()
    };
    let coarse = integrate(&sys, &[1.0, 2.0], &cfg).unwrap();
    let fine = oracle_integrate(&sys, &[1.0, 2.0], &cfg).unwrap();
    assert_eq!(coarse.t.len(), fine.t.len());
    assert!(coarse.t.iter().zip(&fine.t).all(|(a, b)| (a - b).abs() < 1e-12));
    let worst = coarse
        .y
        .iter()
        .zip(&fine.y)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn pinned_on_reference_decay_holds_with_equality() {
    let cfg = IntegratorConfig {
        tf: 10.0,
        ..Default::default()
    };
    let traj = simulate_single(params(), &zero_disturbance(), &iss_cert(), State::new(0.25, 0.75), &cfg).unwrap();
    assert_eq!(traj.samples[0].v, 0.0);
    let report = check_decay(&traj, &iss_cert()).unwrap();
    assert!(report.pass);
    assert!(report.worst_margin.abs() < 1e-12, "{}", report.worst_margin);
}

#[test]
fn undisturbed_decay_from_fig3_initial_state() {
    let traj =
        simulate_single(params(), &zero_disturbance(), &iss_cert(), State::new(1.0, 2.0), &IntegratorConfig::default())
            .unwrap();
    let report = check_decay(&traj, &iss_cert()).unwrap();
    assert!(report.pass && report.worst_margin >= -1e-9, "{report:?}");
    assert!(report.case_1b.unwrap() > 0 && report.case_2b.unwrap() > 0);
}

#[test]
fn iss_envelope_on_fig3_initial_state() {
    let traj =
        simulate_single(params(), &zero_disturbance(), &iss_cert(), State::new(1.0, 2.0), &IntegratorConfig::default())
            .unwrap();
    assert!(check_iss(&traj, &iss_cert().iss_envelope()).unwrap().pass);
    let pinned = simulate_single(
        params(),
        &zero_disturbance(),
        &iss_cert(),
        State::new(0.25, 0.75),
        &IntegratorConfig {
            tf: 5.0,
            ..Default::default()
        },
    )
    .unwrap();
    let report = check_iss(&pinned, &iss_cert().iss_envelope()).unwrap();
    assert!(report.pass);
}

#[test]
fn decay_outside_certificate_still_reports() {
    let p = params();
    let ubar = 10.0 * disturbance_cap(&p);
    let u = DisturbanceSpec::random(3, ubar, DisturbanceMode::Iiss, 0.0, 20.0, 0.01).unwrap();
    let cfg = IntegratorConfig {
        tf: 20.0,
        ..Default::default()
    };
    let traj = simulate_single(p, &u, &iss_cert(), State::new(0.5, 1.5), &cfg).unwrap();
    let report = check_decay(&traj, &iss_cert()).unwrap();
    assert_eq!(report.n_samples, traj.samples.len());
    assert!(report.worst_margin.is_finite());
}

#[test]
fn iiss_with_zero_and_exponential_disturbance() {
    let p = params();
    let cert = Certificate::new(p, Some(0.5), DisturbanceMode::Iiss).unwrap();
    let cfg = IntegratorConfig::default();
    let zero = DisturbanceSpec::zero(0.5, DisturbanceMode::Iiss).unwrap();
    let traj = simulate_single(p, &zero, &cert, State::new(1.0, 2.0), &cfg).unwrap();
    assert!(iiss_check(&traj, &cert).unwrap().pass);
    let traj = simulate_single(p, &fig3_disturbance(), &cert, State::new(1.0, 2.0), &cfg).unwrap();
    assert!(iiss_check(&traj, &cert).unwrap().pass);
    let integral = *delta2_integral(&traj, cert.c2).unwrap().last().unwrap();
    assert!((integral - cert.c2).abs() <= 1e-6 * cert.c2);
    assert!(iiss_check(&traj, &iss_cert()).is_err());
}

fn multi_setup(y0: f64) -> (chemostat_core::Trajectory, chemostat_core::MultiCertificate) {
    let growths = [SpeciesGrowth::new(1.0, 1.0).unwrap()];
    let mut mc = multi_certificate(&params(), &growths, 0.1, 0.0).unwrap();
    let s0 = AugmentedState {
        s: 1.0,
        x: 2.0,
        y: vec![y0],
    };
    let traj = simulate_multi(params(), &growths, &iss_cert(), &mc, &s0, &IntegratorConfig::default()).unwrap();
    mc.t_settle = settling_time(&traj, mc.epsilon).unwrap();
    (traj, mc)
}

#[test]
fn competitor_dies_out_exponentially() {
    let (traj, mc) = multi_setup(0.3);
    assert_eq!(mc.t_settle, 0.0);
    let report = check_extinction(&traj, &mc, 1e-3).unwrap();
    assert!(report.pass, "{report:?}");
    assert_eq!(report.components.len(), 4);
    let last = traj.samples.last().unwrap();
    assert!(last.y[0] <= 0.3 * (-mc.delta * 60.0).exp() + 1e-9);
}

#[test]
fn absent_competitor_stays_absent() {
    let (traj, mc) = multi_setup(0.0);
    assert!(traj.samples.iter().all(|s| s.y[0] == 0.0));
    assert!(check_extinction(&traj, &mc, 1e-3).unwrap().pass);
}

#[test]
fn extinction_precondition_violation_reported() {
    let (traj, mut mc) = multi_setup(0.3);
    mc.epsilon = -0.5;
    let report = check_extinction(&traj, &mc, 1e-3).unwrap();
    assert!(!report.pass);
    assert!(!report.components[0].pass);
    assert!(check_extinction(&traj, &mc, 0.0).is_ok());
    let single =
        simulate_single(params(), &zero_disturbance(), &iss_cert(), State::new(1.0, 2.0), &IntegratorConfig {
            tf: 1.0,
            ..Default::default()
        })
        .unwrap();
    assert!(check_extinction(&single, &mc, 1e-3).is_err());
}

#[test]
fn fixed_step_runs_are_bit_identical() {
    let u = DisturbanceSpec::random(11, 2e-4, DisturbanceMode::Iss, 0.0, 10.0, 0.01).unwrap();
    let cfg = IntegratorConfig {
        tf: 10.0,
        ..Default::default()
    };
    let a = simulate_single(params(), &u, &iss_cert(), State::new(2.0, 0.3), &cfg).unwrap();
    let b = simulate_single(params(), &u, &iss_cert(), State::new(2.0, 0.3), &cfg).unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iss_admissible_runs_stay_positive(
        s0 in 0.01f64..5.0,
        x0 in 0.01f64..5.0,
        seed in any::<u64>(),
        frac in 0.05f64..0.999,
        h in prop_oneof![Just(1e-3), Just(5e-3), Just(1e-2)],
    ) {
        let p = params();
        let ubar = frac * disturbance_cap(&p);
        let cfg = IntegratorConfig { h, tf: 15.0, ..Default::default() };
        let u = DisturbanceSpec::random(seed, ubar, DisturbanceMode::Iss, 0.0, cfg.tf, 10.0 * h).unwrap();
        let traj = simulate_single(p, &u, &iss_cert(), State::new(s0, x0), &cfg).unwrap();
        prop_assert!(check_invariance(&traj).pass);
        prop_assert_eq!(traj.meta.positivity_retries, 0);
    }

    #[test]
    fn decay_inequality_on_random_disturbances(
        s0 in 0.1f64..3.0,
        x0 in 0.1f64..3.0,
        seed in any::<u64>(),
    ) {
        let p = params();
        let cert = iss_cert();
        let cfg = IntegratorConfig { tf: 10.0, ..Default::default() };
        let u = DisturbanceSpec::random(seed, cert.ubar, DisturbanceMode::Iss, 0.0, cfg.tf, 10.0 * cfg.h).unwrap();
        let traj = simulate_single(p, &u, &cert, State::new(s0, x0), &cfg).unwrap();
        let report = check_decay(&traj, &cert).unwrap();
        prop_assert!(report.pass, "{:?}", report);
    }
}
