use proptest::prelude::*;

use crmtrunc::bounds::{bound, error_from_b, BoundQuery, Form, Method};
use crmtrunc::exec::Exec;
use crmtrunc::measures::{Likelihood, RateMeasureSpec};
use crmtrunc::ncrm::{gumbel_max_sample_seeded, normalize};
use crmtrunc::reps::{simulate, RepKind, RepresentationSpec};
use crmtrunc::specialfn::{lambert_w0, Precision};
use crmtrunc::validate::{total_masses, Replication};

const CLOSED: [RepKind; 5] = [
    RepKind::Bondesson,
    RepKind::Rejection,
    RepKind::DecoupledBondesson,
    RepKind::SizeBiased,
    RepKind::PowerLaw,
];

fn closed(spec: RateMeasureSpec, kind: RepKind, n: u32, k: usize) -> f64 {
    let rep = RepresentationSpec::new(kind, &spec, None).unwrap();
    bound(&BoundQuery::new(spec, Likelihood::default_for(spec.family()), rep, n, k).with_method(Method::ClosedForm))
        .unwrap()
        .b
}

fn gamma_spec() -> impl Strategy<Value = RateMeasureSpec> {
    (0.2f64..5.0, 0.2f64..5.0).prop_map(|(g, l)| RateMeasureSpec::gamma_process(g, l, 0.0).unwrap())
}

fn beta_spec() -> impl Strategy<Value = RateMeasureSpec> {
    (0.2f64..5.0, 1.05f64..5.0).prop_map(|(g, a)| RateMeasureSpec::beta_process(g, a, 0.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounds_shrink_in_k_and_grow_in_n(spec in prop_oneof![gamma_spec(), beta_spec()], kind in 0..CLOSED.len(), n in 1u32..20, k in 1usize..200) {
        let kind = CLOSED[kind];
        let b = closed(spec, kind, n, k);
        prop_assert!(b >= 0.0 && b.is_finite());
        prop_assert!(closed(spec, kind, n, k + 1) <= b * (1.0 + 1e-12));
        prop_assert!(closed(spec, kind, n + 1, k) >= b * (1.0 - 1e-12));
        let e = error_from_b(b);
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn closed_forms_dominate_quadrature(spec in gamma_spec(), kind in 0..CLOSED.len(), n in 1u32..10, k in 1usize..60) {
        let kind = CLOSED[kind];
        let rep = RepresentationSpec::new(kind, &spec, None).unwrap();
        let mut q = BoundQuery::new(spec, Likelihood::Poisson, rep, n, k);
        if kind == RepKind::SizeBiased {
            // the telescoped sum is the integral of 1 - pi^N
            q = q.with_form(Form::Exact);
        }
        if let Ok(quad) = bound(&q.clone().with_method(Method::Quadrature)) {
            let c = bound(&q.with_method(Method::ClosedForm)).unwrap().b;
            prop_assert!(quad.b <= c * (1.0 + 1e-8) + 1e-300, "{} > {}", quad.b, c);
        }
    }

    #[test]
    fn inverse_levy_weights_decrease(spec in gamma_spec(), seed in any::<u64>()) {
        let rep = RepresentationSpec::new(RepKind::InverseLevy, &spec, None).unwrap();
        let (m, _) = simulate(&spec, &rep, 40, seed).unwrap();
        prop_assert!(m.atoms.windows(2).all(|w| w[1].weight <= w[0].weight));
        prop_assert!(m.atoms.iter().all(|a| a.weight >= 0.0 && (0.0..1.0).contains(&a.label)));
    }

    #[test]
    fn sequential_and_parallel_agree(spec in gamma_spec(), kind in 0..RepKind::ALL.len(), seed in any::<u64>()) {
        let rep = RepresentationSpec::new(RepKind::ALL[kind], &spec, None).unwrap();
        let plan = Replication::new(64, seed);
        let a = total_masses(&spec, &rep, 30, &plan.with_exec(Exec::Sequential)).unwrap();
        let b = total_masses(&spec, &rep, 30, &plan.with_exec(Exec::Parallel)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gumbel_picks_are_atoms(spec in gamma_spec(), seed in any::<u64>(), draws in 1usize..50) {
        let rep = RepresentationSpec::new(RepKind::Bondesson, &spec, None).unwrap();
        let (m, _) = simulate(&spec, &rep, 20, seed).unwrap();
        if let Ok(norm) = normalize(&m) {
            let total: f64 = norm.probs().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let picks = gumbel_max_sample_seeded(&norm, draws, seed);
            prop_assert_eq!(picks.len(), draws);
            prop_assert!(picks.iter().all(|&i| i < norm.atoms.len() && norm.atoms[i].prob > 0.0));
        }
    }

    #[test]
    fn lambert_w_inverts(y in 0.0f64..1e6) {
        let w = lambert_w0(y, &Precision::default()).unwrap();
        prop_assert!((w * w.exp() - y).abs() <= 1e-12 * y.max(1e-300) * 10.0);
    }
}
