use proptest::prelude::*;
use semilinear_heat::field::pointwise_leq;
use semilinear_heat::nonlinearity::{builtin_from_str, compute_envelopes};
use semilinear_heat::solver::{monotone_solve, MonotoneOptions, TimeGrid};
use semilinear_heat::{GridField, GridSpec, HeatPropagator};

fn bumps(spec: GridSpec, parts: &[(f64, f64, f64)]) -> GridField {
    GridField::from_fn(spec, |x| {
        parts
            .iter()
            .map(|&(amp, width, c)| amp * (-(x[0] - c).powi(2) / (2.0 * width * width)).exp())
            .sum()
    })
    .unwrap()
}

fn part() -> impl Strategy<Value = (f64, f64, f64)> {
    (-0.3f64..0.3, 0.5f64..1.5, -6.0f64..6.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iterates_stay_between_the_envelopes(parts in prop::collection::vec(part(), 1..4)) {
        let spec = GridSpec::new(1, 20.0, 256).unwrap();
        let prop = HeatPropagator::new(spec);
        let f = builtin_from_str("power(1.5)", 1).unwrap();
        let phi = bumps(spec, &parts);
        let grid = TimeGrid::graded(0.05, 32).unwrap();
        let (lower, upper, state) = monotone_solve(&prop, &f, &phi, &grid, &MonotoneOptions::default()).unwrap();
        let scale = state.super_envelope.iter().chain(&state.sub_envelope).map(|u| u.norm_inf()).fold(1e-300, f64::max);
        let slack = 1e-8 * scale + state.positivity_defect;
        for j in 0..grid.nodes().len() {
            prop_assert!(pointwise_leq(&state.sub_envelope[j], &lower.fields[j], slack).unwrap());
            prop_assert!(pointwise_leq(&lower.fields[j], &upper.fields[j], slack).unwrap());
            prop_assert!(pointwise_leq(&upper.fields[j], &state.super_envelope[j], slack).unwrap());
        }
    }

    #[test]
    fn lower_envelope_never_exceeds_upper(p in 1.05f64..4.0, q in 1.05f64..4.0, s in -9.0f64..9.0) {
        let s = 10f64.powf(s);
        for text in [format!("power({p})"), format!("minpower({},{})", p.min(q), p.max(q) + 0.01)] {
            let f = builtin_from_str(&text, 1).unwrap();
            let env = compute_envelopes(&f, 1e6, 64).unwrap();
            prop_assert!(env.ell(s) <= env.big_l(s) * (1.0 + 1e-12), "{text} at {s}");
            prop_assert!(env.ell_plus(s) <= env.big_l_plus(s) * (1.0 + 1e-12), "{text} at {s}");
            prop_assert!(env.ell_plus(s) <= env.ell(s) * (1.0 + 1e-12), "{text} at {s}");
        }
    }

    #[test]
    fn heat_flow_is_a_mass_preserving_contraction(parts in prop::collection::vec(part(), 1..5), t in 1e-3f64..5.0) {
        let spec = GridSpec::new(1, 20.0, 256).unwrap();
        let prop = HeatPropagator::new(spec);
        let phi = bumps(spec, &parts);
        let u = prop.apply(&phi, t).unwrap();
        prop_assert!(u.norm_l1() <= phi.norm_l1() * (1.0 + 1e-12) + 1e-15);
        prop_assert!(u.norm_inf() <= phi.norm_inf() * (1.0 + 1e-12) + 1e-15);
        prop_assert!((u.integral() - phi.integral()).abs() <= 1e-12 * (1.0 + phi.norm_l1()));
    }

    #[test]
    fn binary_round_trip_is_exact(parts in prop::collection::vec(part(), 1..4)) {
        let spec = GridSpec::new(1, 7.5, 64).unwrap();
        let phi = bumps(spec, &parts);
        let mut bytes = Vec::new();
        phi.write_binary(&mut bytes).unwrap();
        let back = GridField::read_binary(bytes.as_slice()).unwrap();
        prop_assert_eq!(back, phi);
    }
}

/// For f(u) = |u|^{p-1} u, `λ^{2/(p-1)} u(λx, λ²t)` solves the same equation.
/// Scaling the box, the data and the time grid together reproduces the
/// discrete solution up to round-off.
#[test]
fn power_solutions_are_scale_covariant() {
    let p: f64 = 1.5;
    let lambda: f64 = 2.0;
    let f = builtin_from_str(&format!("power({p})"), 1).unwrap();
    let base = GridSpec::new(1, 20.0, 256).unwrap();
    let scaled = GridSpec::new(1, 20.0 / lambda, 256).unwrap();
    let parts = [(0.2, 1.0, 1.5), (-0.1, 0.7, -4.0)];
    let phi = bumps(base, &parts);
    let amp = lambda.powf(2.0 / (p - 1.0));
    let phi_scaled = GridField::from_fn(scaled, |x| {
        let y = lambda * x[0];
        amp * parts.iter().map(|&(a, w, c)| a * (-(y - c).powi(2) / (2.0 * w * w)).exp()).sum::<f64>()
    })
    .unwrap();
    let t = 0.1;
    let opts = MonotoneOptions::default();
    let (_, u, _) = monotone_solve(&HeatPropagator::new(base), &f, &phi, &TimeGrid::graded(t, 32).unwrap(), &opts).unwrap();
    let (_, v, _) = monotone_solve(
        &HeatPropagator::new(scaled),
        &f,
        &phi_scaled,
        &TimeGrid::graded(t / (lambda * lambda), 32).unwrap(),
        &opts,
    )
    .unwrap();
    let expected = u.final_field().scaled(amp);
    let err = v
        .final_field()
        .values()
        .iter()
        .zip(expected.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / expected.norm_inf();
    assert!(err < 1e-6, "scaled solution differs by {err:e}");
}
