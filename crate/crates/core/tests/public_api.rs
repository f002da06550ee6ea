use conslaw::dataset::{add_noise, generate, load, save, GenerateOptions, Split};
use conslaw::extract::{explicit_pde_candidates, lv_lasso_candidate, poly_lasso_candidate};
use conslaw::systems::SystemId;
use conslaw::verify::{adjudicate, evaluate_series, gate_series, GateConfig, Verdict};

fn small() -> GenerateOptions {
    GenerateOptions { n_traj: Some(30), steps: Some(120) }
}

#[test]
fn stored_datasets_reload_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for system in [SystemId::CoupledSprings, SystemId::Ks] {
        let ds = generate(system, 5, &GenerateOptions { n_traj: Some(10), steps: Some(30) }).unwrap();
        let path = dir.path().join(system.name());
        save(&ds, &path).unwrap();
        assert_eq!(load(&path).unwrap(), ds);
    }
}

#[test]
fn noise_keeps_everything_but_the_states() {
    let ds = generate(SystemId::Lorenz, 1, &GenerateOptions { n_traj: Some(10), steps: Some(20) }).unwrap();
    let noisy = add_noise(&ds, 0.05, 3).unwrap();
    assert_eq!(noisy.splits, ds.splits);
    assert_eq!(noisy.times, ds.times);
    assert_eq!(noisy.noise_sigma, 0.05);
    assert_ne!(noisy.trajectories[0].states, ds.trajectories[0].states);
    assert_eq!(add_noise(&ds, 0.0, 3).unwrap().trajectories, ds.trajectories);
}

#[test]
fn quartic_energy_passes_the_gate_on_held_out_trajectories() {
    let ds = generate(SystemId::HenonHeiles, 11, &small()).unwrap();
    let cand = poly_lasso_candidate(&ds.split(Split::Train), ds.dim).unwrap();
    let test = ds.split(Split::Test);
    let series = evaluate_series(&cand.expression, &test, ds.dim);
    let gate = gate_series(&series, cand.expression.complexity(), &GateConfig::default());
    assert!(gate.accepted, "{gate:?}");
    assert_eq!(adjudicate(ds.system, &series, &test, ds.dim), Verdict::TrueDiscovery);
}

#[test]
fn chaotic_data_yields_nothing_that_passes() {
    let ds = generate(SystemId::Lorenz, 11, &small()).unwrap();
    let test = ds.split(Split::Test);
    let train = ds.split(Split::Train);
    for cand in [poly_lasso_candidate(&train, ds.dim), lv_lasso_candidate(&train, ds.dim)].into_iter().flatten() {
        let series = evaluate_series(&cand.expression, &test, ds.dim);
        assert!(!gate_series(&series, cand.expression.complexity(), &GateConfig::default()).accepted);
    }
}

#[test]
fn zero_mean_fields_give_no_field_law() {
    // Sine-series initial fields all have zero mass, so the conserved mean is not diverse.
    let ds = generate(SystemId::Burgers, 2, &GenerateOptions { n_traj: Some(20), steps: Some(40) }).unwrap();
    let test = ds.split(Split::Test);
    for c in explicit_pde_candidates(SystemId::Burgers).unwrap() {
        let series = evaluate_series(&c.expression, &test, ds.dim);
        let gate = gate_series(&series, c.expression.complexity(), &GateConfig::default());
        assert!(!gate.accepted, "{} accepted", c.expression.to_infix());
    }
}
