use approx::assert_relative_eq;
use nonmarkov_krotov::bath::{lorentzian_terms, ExpTerm, ExpTermList, LorentzianBath};
use nonmarkov_krotov::dynamics::{
    build_lindbladian, propagate, propagate_adjoint, unvectorize, vectorize, Bounds, ControlPulse,
    Mat4, Trajectory,
};
use num_complex::Complex64 as C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Closed form of `F' = p + F(q + iω) + F²`, `F(0) = 0`.
fn riccati_closed_form(p: C64, q: C64, omega: f64, t: f64) -> C64 {
    let b = q + c(0.0, omega);
    let disc = (b * b - 4.0 * p).sqrt();
    let m1 = (b + disc) / 2.0;
    let m2 = (b - disc) / 2.0;
    let e1 = (m1 * t).exp();
    let e2 = (m2 * t).exp();
    -p * (e1 - e2) / (m2 * e1 - m1 * e2)
}

fn constant_pulse(t_f: f64, dt: f64, epsilon: f64) -> ControlPulse {
    ControlPulse::constant(t_f, dt, epsilon, Bounds::large_range()).unwrap()
}

#[test]
fn lorentzian_memory_matches_riccati_closed_form() {
    let cases = [(0.1, 0.1, 5.0, 0.5708), (1.0, 1.0, 1.0, 0.0), (0.5, 10.0, -2.0, -0.3)];
    for (alpha, gamma, omega_big, eps) in cases {
        let bath = LorentzianBath::new(alpha, gamma, omega_big).unwrap();
        let terms = lorentzian_terms(&bath);
        let t = terms.terms()[0];
        let dt = 1e-3;
        let traj = propagate(&constant_pulse(2.0, dt, eps), &terms, 1.0).unwrap();
        for time in [0.5, 1.0, 2.0] {
            let k = (time / dt).round() as usize;
            let exact = riccati_closed_form(t.amplitude, t.rate, 1.0 + eps, time);
            let got = traj.f_total(k);
            assert!(
                (got - exact).norm() <= 1e-8 * exact.norm(),
                "α={alpha} γ={gamma} Ω={omega_big} t={time}: {got} vs {exact}"
            );
        }
    }
}

/// `F(t) = ∫₀ᵗ c(t-s) exp(Φ(t) - Φ(s)) ds`, `Φ' = iω + F`, by trapezoid marching.
fn nonlocal_memory(terms: &ExpTermList, omega: &[f64], h: f64) -> Vec<C64> {
    let n = omega.len();
    let mut f = vec![c(0.0, 0.0); n + 1];
    let mut phi = vec![c(0.0, 0.0); n + 1];
    for i in 1..=n {
        let mut fi = f[i - 1];
        for _ in 0..30 {
            let phi_i = phi[i - 1] + c(0.0, omega[i - 1] * h) + (f[i - 1] + fi) * (h / 2.0);
            let mut acc = c(0.0, 0.0);
            for m in 0..=i {
                let w = if m == 0 || m == i { 0.5 } else { 1.0 };
                let phi_m = if m == i { phi_i } else { phi[m] };
                acc += terms.evaluate((i - m) as f64 * h) * (phi_i - phi_m).exp() * w;
            }
            let next = acc * h;
            let done = (next - fi).norm() < 1e-15;
            fi = next;
            if done {
                break;
            }
        }
        f[i] = fi;
        phi[i] = phi[i - 1] + c(0.0, omega[i - 1] * h) + (f[i - 1] + f[i]) * (h / 2.0);
    }
    f
}

#[test]
fn local_memory_matches_nonlocal_form() {
    let terms = ExpTermList::new(vec![
        ExpTerm::new(c(0.02, 0.0), c(-0.5, -3.0)),
        ExpTerm::new(c(0.05, -0.01), c(-2.0, 1.0)),
    ])
    .unwrap();
    let t_f = 2.0;
    // Slowly varying pulse held on coarse steps so both grids see the same ω(t).
    let coarse = 0.05;
    let hold: Vec<f64> = (0..40).map(|k| 0.4 * (k as f64 * coarse).sin()).collect();
    let dt = 1e-3;
    let per = (coarse / dt).round() as usize;
    let samples: Vec<f64> = hold.iter().flat_map(|e| std::iter::repeat(*e).take(per)).collect();
    let pulse = ControlPulse::new(dt, samples.clone(), Bounds::small_range()).unwrap();
    let traj = propagate(&pulse, &terms, 1.0).unwrap();

    let h = 2.5e-3;
    let omega_of = |h: f64| -> Vec<f64> {
        let steps = (t_f / h).round() as usize;
        (0..steps).map(|k| 1.0 + hold[((k as f64 + 0.5) * h / coarse) as usize]).collect()
    };
    let f_h = nonlocal_memory(&terms, &omega_of(h), h);
    let f_h2 = nonlocal_memory(&terms, &omega_of(h / 2.0), h / 2.0);
    for time in [0.5, 1.0, 2.0] {
        let i = (time / h).round() as usize;
        let extrapolated = (f_h2[2 * i] * 4.0 - f_h[i]) / 3.0;
        let got = traj.f_total((time / dt).round() as usize);
        assert!(
            (got - extrapolated).norm() <= 1e-6 * extrapolated.norm(),
            "t={time}: {got} vs {extrapolated}"
        );
    }
}

fn apply(g: &Mat4, rho: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    unvectorize(&(g * vectorize(rho)))
}

fn sample_states() -> Vec<[[C64; 2]; 2]> {
    vec![
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]],
        [[c(0.5, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.5, 0.0)]],
        [[c(0.3, 0.0), c(0.1, 0.4)], [c(0.1, -0.4), c(0.7, 0.0)]],
    ]
}

fn strong_trajectory() -> Trajectory {
    let terms = lorentzian_terms(&LorentzianBath::new(1.0, 1.0, 1.0).unwrap());
    let samples: Vec<f64> = (0..3000).map(|k| (k as f64 * 1e-3 * 3.0).cos()).collect();
    let pulse = ControlPulse::new(1e-3, samples, Bounds::small_range()).unwrap();
    propagate(&pulse, &terms, 1.0).unwrap()
}

#[test]
fn trace_and_hermiticity_preserved() {
    let traj = strong_trajectory();
    for k in (0..traj.len()).step_by(250) {
        let g = traj.propagator(k);
        for rho in sample_states() {
            let out = apply(g, &rho);
            let trace = out[0][0] + out[1][1];
            assert!((trace - c(1.0, 0.0)).norm() < 1e-9, "trace {trace} at k={k}");
            assert!((out[0][1] - out[1][0].conj()).norm() < 1e-9);
            assert!(out[0][0].im.abs() < 1e-9 && out[1][1].im.abs() < 1e-9);
        }
    }
}

#[test]
fn zero_coupling_is_unitary_rotation() {
    let terms = lorentzian_terms(&LorentzianBath::new(0.0, 0.1, 1.0).unwrap());
    let eps = 0.37;
    let traj = propagate(&constant_pulse(2.0, 1e-3, eps), &terms, 1.0).unwrap();
    let t = 2.0;
    let phase = c(0.0, -(1.0 + eps) * t).exp();
    let g = traj.final_propagator();
    let expected = Mat4::from_diagonal(&nalgebra::Vector4::new(c(1.0, 0.0), phase, phase.conj(), c(1.0, 0.0)));
    assert!((g - expected).norm() < 1e-12);
    // Pure states stay pure.
    let rho = apply(g, &sample_states()[1]);
    let purity = (rho[0][0] * rho[0][0] + rho[0][1] * rho[1][0] * 2.0 + rho[1][1] * rho[1][1]).re;
    assert_relative_eq!(purity, 1.0, epsilon = 1e-12);
}

#[test]
fn rk4_error_ratio_is_fourth_order() {
    let terms = lorentzian_terms(&LorentzianBath::new(1.0, 2.0, 1.0).unwrap());
    let final_g = |dt: f64| *propagate(&constant_pulse(2.0, dt, 0.5), &terms, 1.0).unwrap().final_propagator();
    let reference = final_g(1e-3);
    let coarse = (final_g(0.04) - reference).norm();
    let fine = (final_g(0.02) - reference).norm();
    let ratio = coarse / fine;
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn adjoint_pairing_is_conserved() {
    let traj = strong_trajectory();
    let samples: Vec<f64> = (0..3000).map(|k| (k as f64 * 1e-3 * 3.0).cos()).collect();
    let pulse = ControlPulse::new(1e-3, samples, Bounds::small_range()).unwrap();
    let mut chi_tf = Mat4::identity();
    chi_tf[(1, 2)] = c(0.3, -0.2);
    chi_tf[(3, 0)] = c(-0.5, 0.1);
    let chi = propagate_adjoint(&pulse, &traj, chi_tf).unwrap();
    let pairing = |k: usize| (chi[k].adjoint() * traj.propagator(k)).trace();
    let end = pairing(traj.len() - 1);
    for k in (0..traj.len()).step_by(100) {
        assert!((pairing(k) - end).norm() < 1e-8 * end.norm(), "k={k}");
    }
}

#[test]
fn generator_matches_memory_coefficient() {
    // d/dt ρ_ee = -2 Re F ρ_ee for a fresh excited state.
    let f = c(0.3, -0.1);
    let l = build_lindbladian(1.0, f);
    let rho = sample_states()[0];
    let d = unvectorize(&(l.matrix() * vectorize(&rho)));
    assert_relative_eq!(d[0][0].re, -0.6, epsilon = 1e-15);
    assert_relative_eq!(d[1][1].re, 0.6, epsilon = 1e-15);
}
