//! Jensen direction, incident-power sandwich and ZF orthogonality on Monte Carlo draws.

use nalgebra::DMatrix;
use num_complex::Complex64;
use wpbc::analytics::closed_form_report;
use wpbc::channel::{draw_rng, complex_gaussian, Stream};
use wpbc::montecarlo::{detector, mc_incident_power, mc_rate, McSettings};
use wpbc::{DesignVariables, Estimator, Model, Receiver, SystemConfig};

fn configs() -> Vec<(&'static str, SystemConfig, DesignVariables)> {
    let base = SystemConfig::default();
    let uniform = DesignVariables::uniform(2, base.alpha, base.p_ce);
    vec![
        ("default", base.clone(), uniform.clone()),
        ("r8_m8", SystemConfig { m: 8, r: 8, ..base.clone() }, uniform.clone()),
        ("skewed", base.clone(), DesignVariables { zeta: vec![0.2, 0.8], ..uniform.clone() }),
        ("short_ce", SystemConfig { alpha: 20, ..base.clone() }, DesignVariables { alpha: 20, ..uniform.clone() }),
        ("noisy", SystemConfig { noise_power: 1e-9, ..base.clone() }, uniform.clone()),
    ]
}

#[test]
fn incident_power_within_bounds() {
    for (name, cfg, design) in configs() {
        let model = Model::from_config(&cfg).unwrap();
        for method in Estimator::ALL {
            let closed = closed_form_report(&model, &design, method, Receiver::Mrc).unwrap();
            let mc = mc_incident_power(&cfg, &design, method, &McSettings::new(20_000, 3)).unwrap();
            for (t, e) in closed.tags.iter().zip(&mc) {
                let slack = 3.0 * e.std_error;
                assert!(
                    t.p_i_lower - slack <= e.mean && e.mean <= t.p_i_upper + slack,
                    "{name} {method:?}: {} not in [{}, {}] ± {slack}",
                    e.mean,
                    t.p_i_lower,
                    t.p_i_upper
                );
            }
        }
    }
}

#[test]
fn simulated_rate_is_not_below_closed_form() {
    for (name, cfg, design) in configs() {
        let model = Model::from_config(&cfg).unwrap();
        for rx in Receiver::ALL {
            let closed = closed_form_report(&model, &design, Estimator::Ls, rx).unwrap();
            let mc = mc_rate(&cfg, &design, Estimator::Ls, rx, &McSettings::new(20_000, 4)).unwrap();
            for (k, (t, r)) in closed.tags.iter().zip(&mc.rates).enumerate() {
                assert!(
                    r.mean + 3.0 * r.std_error >= t.rate_exact,
                    "{name} {rx:?} tag {k}: {} + 3·{} < {}",
                    r.mean,
                    r.std_error,
                    t.rate_exact
                );
            }
        }
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    let cfg = SystemConfig::default();
    let design = DesignVariables::uniform(2, cfg.alpha, cfg.p_ce);
    let s = McSettings::new(3_000, 99);
    let a = mc_rate(&cfg, &design, Estimator::Mmse, Receiver::Zf, &s).unwrap();
    let b = mc_rate(&cfg, &design, Estimator::Mmse, Receiver::Zf, &s).unwrap();
    assert_eq!(a, b);
    let c = mc_rate(&cfg, &design, Estimator::Mmse, Receiver::Zf, &McSettings::new(3_000, 100)).unwrap();
    assert_ne!(a.sum_rate.mean, c.sum_rate.mean);
}

#[test]
fn zf_detector_inverts_estimated_channel() {
    for i in 0..200 {
        let mut rng = draw_rng(8, Stream::Auxiliary, i);
        let (r, k) = (4 + (i as usize % 5), 1 + (i as usize % 3));
        let h = DMatrix::from_fn(r, k, |_, _| complex_gaussian(&mut rng, 1e-5));
        let q = detector(&h, Receiver::Zf).expect("well conditioned");
        let eye = q.adjoint() * &h;
        for a in 0..k {
            for b in 0..k {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((eye[(a, b)] - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }
}
