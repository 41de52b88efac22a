use proptest::prelude::*;
use rdx_core::diagnostics::verify_invariants;
use rdx_core::integrator::{simulate, SimulationSetup};
use rdx_core::{
    BoundaryFlux, Grid, IntegratorConfig, Reaction, ReactionNetwork, Splitting, StateField,
};

const NAMES: [&str; 4] = ["A", "B", "C", "D"];

fn network() -> impl Strategy<Value = ReactionNetwork> {
    (1usize..=4)
        .prop_flat_map(|i| {
            (
                prop::collection::vec(0.01f64..2.0, i),
                prop::collection::vec(
                    (
                        prop::collection::vec(0u32..=2, i),
                        prop::collection::vec(0u32..=2, i),
                        0.0f64..3.0,
                        0.0f64..3.0,
                    ),
                    0..=3,
                ),
            )
        })
        .prop_filter_map("invalid network", |(d, raw)| {
            let reactions = raw
                .into_iter()
                .map(|(mu, nu, kf, kb)| Reaction::new(mu, nu, kf.max(0.05), kb))
                .collect();
            ReactionNetwork::new(NAMES.iter().copied().zip(d), reactions).ok()
        })
}

fn setup(
    net: &ReactionNetwork,
    values: Vec<f64>,
    b: Vec<f64>,
    scheme: Splitting,
) -> SimulationSetup {
    let g = Grid::line(8, 1.0).unwrap();
    let i = net.species_count();
    SimulationSetup {
        initial: StateField::new(g, i, values[..i * 8].to_vec()).unwrap(),
        flux: BoundaryFlux::new(b[..i].to_vec()).unwrap(),
        integrator: IntegratorConfig {
            dt_init: 1e-2,
            dt_min: 1e-12,
            dt_max: 5e-2,
            safety: 0.9,
            scheme,
            t_end: 0.5,
            steady_tol: 1e-12,
        },
        output_interval: 0.1,
        lp: 2.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_stay_nonnegative_and_deterministic(
        net in network(),
        values in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..2.0], 32),
        b in prop::collection::vec(-0.5f64..=0.0, 4),
        strang in any::<bool>(),
    ) {
        let scheme = if strang { Splitting::Strang } else { Splitting::Lie };
        let s = setup(&net, values, b, scheme);
        match simulate(&net, &s) {
            Ok(out) => {
                for snap in &out.snapshots {
                    prop_assert!(snap.min() >= 0.0);
                }
                prop_assert!(out.log.min_concentration() >= 0.0);
                let again = simulate(&net, &s).unwrap();
                prop_assert_eq!(&again.log, &out.log);
                let report = verify_invariants(
                    &out.log, &net, &out.mass_condition, &s.initial.grid, &s.flux,
                ).unwrap();
                prop_assert!(report.get("positivity").unwrap().pass);
                if let Some(g) = report.get("gronwall_envelope") {
                    prop_assert!(g.pass, "{:?}", g);
                }
            }
            // Fast blow-up (degree > 1 autocatalysis) may legitimately
            // exhaust dt_min; it must never produce negative values.
            Err(e) => prop_assert!(
                matches!(e, rdx_core::integrator::IntegratorError::StepTooSmall { .. }),
                "{}", e
            ),
        }
    }
}
