use proptest::prelude::*;

use super::*;
use crate::dataset::GenerateOptions;
use crate::verify::RejectReason;

fn tiny_options() -> PipelineOptions {
    let mut o = PipelineOptions::new(Scale::Desk);
    o.restarts = 2;
    o.dynamics.hidden = vec![16];
    o.dynamics.max_epochs = 2;
    o.dynamics.batches_per_epoch = Some(4);
    o.phi.hidden = vec![8, 8];
    o.phi.max_epochs = 3;
    o.gp.iterations = 2;
    o.gp.cycles_per_iteration = 3;
    o.phi_samples = 256;
    o
}

fn tiny_dataset(system: SystemId) -> Dataset {
    generate(system, 7, &GenerateOptions { n_traj: Some(20), steps: Some(40) }).unwrap()
}

fn point(c: f64, k: usize) -> ParetoPoint {
    ParetoPoint { label: format!("{c}@{k}"), constancy: c, complexity: k }
}

#[test]
fn f1_on_the_unit_grid() {
    // P = 1 − FDR, R = DR.
    for (dr, fdr, f1) in [(1.0, 0.0, 1.0), (0.0, 0.0, 0.0), (1.0, 1.0, 0.0), (0.0, 1.0, 0.0)] {
        assert_eq!(f1_score(dr, fdr), f1, "dr {dr} fdr {fdr}");
    }
    assert!((f1_score(1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn f1_is_the_harmonic_mean(dr in 0.0..=1.0f64, fdr in 0.0..=1.0f64) {
        let (p, r) = (1.0 - fdr, dr);
        let harmonic = if p > 0.0 && r > 0.0 { 1.0 / (0.5 / p + 0.5 / r) } else { 0.0 };
        prop_assert!((f1_score(dr, fdr) - harmonic).abs() < 1e-12);
    }

    #[test]
    fn frontier_matches_the_quadratic_oracle(
        raw in prop::collection::vec((0u32..20, 1usize..15), 1..30),
    ) {
        let pts: Vec<ParetoPoint> = raw.iter().map(|&(c, k)| point(c as f64 / 1000.0, k)).collect();
        let front = pareto_frontier(&pts);
        let oracle: Vec<&ParetoPoint> = pts
            .iter()
            .filter(|p| pts.iter().all(|q| !(q.constancy <= p.constancy && q.complexity <= p.complexity
                && (q.constancy < p.constancy || q.complexity < p.complexity))))
            .collect();
        prop_assert_eq!(front.len(), oracle.len());
        for p in &oracle {
            prop_assert!(front.contains(p));
        }
        for a in &front {
            for b in &front {
                prop_assert!(!dominates(a, b));
            }
        }
        prop_assert!(front.windows(2).all(|w| w[0].complexity <= w[1].complexity));
    }
}

#[test]
fn frontier_examples() {
    let pts = vec![point(0.01, 5), point(0.001, 10), point(0.02, 12)];
    assert_eq!(pareto_frontier(&pts), vec![point(0.01, 5), point(0.001, 10)]);
    assert_eq!(pareto_frontier(&pts[..1]), pts[..1].to_vec());
    let dup = vec![point(0.01, 5), point(0.01, 5)];
    assert_eq!(pareto_frontier(&dup).len(), 2);
    assert!(pareto_frontier(&[point(f64::NAN, 1)]).is_empty());
}

#[test]
fn discovery_rate_conventions() {
    use Verdict::*;
    let ms = SystemId::MassSpring;
    assert_eq!(discovery_rates(ms, &[]), (0.0, 0.0));
    assert_eq!(discovery_rates(ms, &[TrueDiscovery]), (1.0, 0.0));
    assert_eq!(discovery_rates(ms, &[TrueDiscovery, Spurious]), (1.0, 0.5));
    assert_eq!(discovery_rates(ms, &[Spurious]), (0.0, 1.0));
    assert_eq!(discovery_rates(SystemId::Lorenz, &[]), (0.0, 0.0));
    assert_eq!(discovery_rates(SystemId::Lorenz, &[Spurious, Spurious]), (1.0, 1.0));
}

#[test]
fn mean_std_examples() {
    let m = MeanStd::of([1.0, 1.0, 1.0]);
    assert_eq!((m.mean, m.std, m.n), (1.0, 0.0, 3));
    let m = MeanStd::of([0.0, 2.0, f64::NAN]);
    assert_eq!((m.mean, m.std, m.n), (1.0, 1.0, 2));
    assert_eq!(MeanStd::of([0.5]).std, 0.0);
    assert!(MeanStd::of(std::iter::empty()).mean.is_nan());
    assert_eq!(MeanStd::of([1.0, 0.0]).to_string(), "0.50 ± 0.50");
}

#[test]
fn variants_touch_only_their_knob() {
    let base = PipelineOptions::new(Scale::Desk);
    assert_eq!(base.restarts, 3);
    assert_eq!(PipelineOptions::new(Scale::Paper).restarts, 10);
    let v = base.clone().with_variant(AblationVariant::NoRestarts);
    assert_eq!((v.restarts, v.gate), (1, base.gate));
    let v = base.clone().with_variant(AblationVariant::NoDiversity);
    assert_eq!((v.gate.rho_min, v.gate.tau, v.restarts), (0.0, base.gate.tau, 3));
    let v = base.clone().with_variant(AblationVariant::LassoOff);
    assert!(!v.poly_lasso && !v.lv_lasso);
    let v = base.clone().with_variant(AblationVariant::NoLvLasso);
    assert!(v.poly_lasso && !v.lv_lasso);
    for v in AblationVariant::ALL {
        assert_eq!(v.name().parse::<AblationVariant>().unwrap(), v);
    }
    assert!("bogus".parse::<AblationVariant>().is_err());
    assert_eq!(base.gate_for(SystemId::Burgers).max_complexity, Some(PDE_MAX_COMPLEXITY));
    assert_eq!(base.gate_for(SystemId::Lorenz).max_complexity, base.gate.max_complexity);
}

#[test]
fn invalid_options_are_rejected() {
    let mut o = PipelineOptions::new(Scale::Desk);
    o.restarts = 0;
    assert!(matches!(o.validate(), Err(BenchError::Invalid(_))));
    let mut o = PipelineOptions::new(Scale::Desk);
    o.gate.tau = f64::NAN;
    assert!(o.validate().is_err());
    assert!(run_pipeline(&tiny_dataset(SystemId::MassSpring), 0, &o).is_err());
}

#[test]
fn pipeline_is_deterministic_and_regates_consistently() {
    let ds = tiny_dataset(SystemId::HenonHeiles);
    let opts = tiny_options();
    let a = run_pipeline(&ds, 3, &opts).unwrap();
    let b = run_pipeline(&ds, 3, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.restart_constancies.len(), 2);
    assert!(!a.candidates.is_empty());
    assert_eq!(regate(&a, &opts.gate_for(a.system)), a);

    let open = GateConfig { rho_min: 0.0, ..opts.gate };
    let r = regate(&a, &open);
    for (c, o) in a.candidates.iter().zip(&r.candidates) {
        // Dropping the diversity floor can only admit more.
        assert!(!c.gate.accepted || o.gate.accepted);
        if o.gate.reason == Some(RejectReason::Diversity) {
            panic!("diversity rejection under ρ_min = 0");
        }
    }

    let s = compute_metrics(&[a.clone(), b]).unwrap();
    assert_eq!(s.dr.std, 0.0);
    assert!(compute_metrics(&[]).is_err());
    let pr = run_pareto(&a);
    assert!(pr.frontier.iter().all(|p| pr.points.contains(p)));
}

#[test]
fn reports_serialize_without_timings() {
    let ds = tiny_dataset(SystemId::Lorenz);
    let r = run_pipeline(&ds, 0, &tiny_options()).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    assert!(!json.contains("timings"));
    assert!(r.timings.total > 0.0);
    let back: RunReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.candidates, r.candidates);
    assert_eq!(back.schema_version, REPORT_SCHEMA_VERSION);
}

#[test]
fn output_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![point(0.5, 3), point(0.25, 4)];
    write_json(&dir.path().join("a/b.json"), &rows).unwrap();
    let back: Vec<ParetoPoint> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/b.json")).unwrap()).unwrap();
    assert_eq!(back, rows);
    write_csv(&dir.path().join("p.csv"), &rows).unwrap();
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "label,constancy,complexity");
    assert_eq!(text.lines().count(), 3);
}
