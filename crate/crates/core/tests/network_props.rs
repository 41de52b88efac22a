use proptest::prelude::*;
use rdx_core::network::{parse_network, render_network};
use rdx_core::{MassCondition, Reaction, ReactionNetwork};

const NAMES: [&str; 4] = ["A", "B", "C", "D"];

fn build(species: usize, diff: &[f64], reactions: Vec<Reaction>) -> Option<ReactionNetwork> {
    ReactionNetwork::new(
        NAMES[..species].iter().zip(diff).map(|(n, d)| (*n, *d)),
        reactions,
    )
    .ok()
}

prop_compose! {
    fn reaction(species: usize)(
        mu in prop::collection::vec(0u32..=2, species),
        nu in prop::collection::vec(0u32..=2, species),
        kf in 0.0f64..5.0,
        kb in 0.0f64..5.0,
        reversible in any::<bool>(),
    ) -> Reaction {
        let kb = if reversible { kb } else { 0.0 };
        let kf = if kf + kb == 0.0 { 1.0 } else { kf };
        Reaction::new(mu, nu, kf, kb)
    }
}

fn network() -> impl Strategy<Value = ReactionNetwork> {
    (1usize..=4)
        .prop_flat_map(|i| {
            (
                Just(i),
                prop::collection::vec(0.01f64..2.0, i),
                prop::collection::vec(reaction(i), 0..=3),
            )
        })
        .prop_filter_map("no-op reaction", |(i, d, r)| build(i, &d, r))
}

fn conserved_network() -> impl Strategy<Value = ReactionNetwork> {
    (2usize..=4)
        .prop_flat_map(|i| {
            (
                Just(i),
                prop::collection::vec(0.01f64..2.0, i),
                prop::collection::vec(
                    (
                        prop::collection::vec(0u32..=2, i),
                        1usize..i,
                        0.1f64..5.0,
                        0.0f64..5.0,
                    ),
                    1..=3,
                ),
            )
        })
        .prop_filter_map("no-op reaction", |(i, d, raw)| {
            let reactions = raw
                .into_iter()
                .map(|(mu, shift, kf, kb)| {
                    let mut nu = mu.clone();
                    nu.rotate_left(shift);
                    Reaction::new(mu, nu, kf, kb)
                })
                .collect();
            build(i, &d, reactions)
        })
}

fn state(species: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..10.0, species)
}

fn with_state<S: Strategy<Value = ReactionNetwork>>(
    nets: S,
) -> impl Strategy<Value = (ReactionNetwork, Vec<f64>)> {
    nets.prop_flat_map(|n| {
        let i = n.species_count();
        (Just(n), state(i))
    })
}

/// Sum of the absolute values of every monomial term entering `Σ_i f_i`.
fn term_scale(net: &ReactionNetwork, u: &[f64]) -> f64 {
    let sums = net.column_sums();
    net.reactions()
        .iter()
        .zip(sums)
        .map(|(r, s)| {
            let fwd: f64 = r.mu.iter().zip(u).map(|(m, x)| x.powi(*m as i32)).product();
            let bwd: f64 = r.nu.iter().zip(u).map(|(m, x)| x.powi(*m as i32)).product();
            (s.unsigned_abs() as f64 + 1.0) * (r.kf * fwd + r.kb * bwd)
        })
        .sum()
}

proptest! {
    #[test]
    fn source_obeys_growth_bound((net, u) in with_state(network())) {
        let f = net.source(&u).unwrap();
        let lambda = net.growth_exponent() as i32;
        let norm = u.iter().fold(0.0f64, |m, x| m.max(*x)).max(1.0);
        for (i, fi) in f.iter().enumerate() {
            let c: f64 = net
                .reactions()
                .iter()
                .enumerate()
                .map(|(j, r)| net.stoich(i, j).unsigned_abs() as f64 * (r.kf + r.kb))
                .sum();
            prop_assert!(fi.abs() <= c * norm.powi(lambda) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn conserved_sum_vanishes((net, u) in with_state(conserved_network())) {
        prop_assert_eq!(net.classify_mass_condition(), MassCondition::Conserved);
        let total: f64 = net.source(&u).unwrap().iter().sum();
        let norm = u.iter().fold(0.0f64, |m, x| m.max(*x)).max(1.0);
        let scale = net.reactions().iter().map(|r| r.kf + r.kb).sum::<f64>();
        prop_assert!(
            total.abs() <= 1e-12 * scale * norm.powi(net.growth_exponent() as i32),
            "{}", total
        );
    }

    #[test]
    fn mass_control_bound_holds((net, u) in with_state(network())) {
        if let MassCondition::MassControl { c1, c2 } = net.classify_mass_condition() {
            let total: f64 = net.source(&u).unwrap().iter().sum();
            let mass: f64 = u.iter().sum();
            let tol = 1e-12 * (1.0 + term_scale(&net, &u));
            prop_assert!(total <= c1 * mass + c2 + tol, "{} > {}", total, c1 * mass + c2);
        }
    }

    #[test]
    fn dissipative_sum_is_nonpositive((net, u) in with_state(network())) {
        if net.classify_mass_condition() == MassCondition::Dissipative {
            let total: f64 = net.source(&u).unwrap().iter().sum();
            prop_assert!(total <= 1e-12 * (1.0 + term_scale(&net, &u)));
        }
    }

    #[test]
    fn render_parse_round_trip(net in network()) {
        let text = render_network(&net);
        prop_assert_eq!(parse_network(&text).unwrap(), net);
    }

    #[test]
    fn stoichiometry_is_nu_minus_mu(net in network()) {
        for (j, r) in net.reactions().iter().enumerate() {
            for i in 0..net.species_count() {
                prop_assert_eq!(net.stoich(i, j), i64::from(r.nu[i]) - i64::from(r.mu[i]));
            }
        }
    }

    #[test]
    fn rates_vanish_on_zero_state_without_constant_terms(net in network()) {
        let zero = vec![0.0; net.species_count()];
        for (j, r) in net.reactions().iter().enumerate() {
            let expect = r.kf * f64::from(u8::from(r.forward_order() == 0))
                - r.kb * f64::from(u8::from(r.backward_order() == 0));
            prop_assert_eq!(net.reaction_rate(j, &zero).unwrap(), expect);
        }
    }

    /// `Πa − Πā = Σ_m a₁…a_{m−1}(a_m − ā_m)ā_{m+1}…ā_I`.
    #[test]
    fn product_difference_identity(
        pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..=8)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let lhs = a.iter().product::<f64>() - b.iter().product::<f64>();
        let rhs: f64 = (0..a.len())
            .map(|m| {
                a[..m].iter().product::<f64>() * (a[m] - b[m]) * b[m + 1..].iter().product::<f64>()
            })
            .sum();
        let scale = a.iter().product::<f64>().max(b.iter().product::<f64>()).max(1e-300);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{} vs {}", lhs, rhs);
    }
}
