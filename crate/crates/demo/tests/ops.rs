use conslaw_demo::{extract_invariant, pde_moments, simulate, system_names};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("operation succeeds")).unwrap()
}

#[test]
fn simulation_keeps_the_energy() {
    let v = parse(simulate("henon_heiles", 3, 300));
    assert_eq!(v["states"].as_array().unwrap().len(), 300 * 4);
    assert_eq!(v["times"].as_array().unwrap().len(), 300);
    assert!(v["relative_drift"].as_f64().unwrap() < 1e-5, "{}", v["relative_drift"]);

    let v = parse(simulate("lorenz", 3, 50));
    assert!(v["invariant"].is_null() && v["relative_drift"].is_null());
}

#[test]
fn bad_requests_are_errors() {
    assert!(simulate("nope", 0, 10).unwrap_err().contains("nope"));
    assert!(simulate("burgers", 0, 10).is_err());
    assert!(simulate("mass_spring", 0, 1).is_err());
    assert!(simulate("mass_spring", 0, 1_000_000).is_err());
    assert!(pde_moments("lorenz", 0, 10).is_err());
    assert!(extract_invariant("ks", 0, 20, 50).is_err());
    assert!(extract_invariant("mass_spring", 0, 3, 50).is_err());
}

#[test]
fn quartic_energy_is_recovered() {
    let v = parse(extract_invariant("henon_heiles", 1, 40, 120));
    assert_eq!(v["accepted"], true, "{v}");
    assert_eq!(v["verdict"], "true_discovery");
    assert!(v["constancy"].as_f64().unwrap() < 1e-4);
    assert_eq!(v["basis"], "monomials_grlex_deg4");
}

#[test]
fn log_basis_is_used_for_lotka_volterra() {
    let v = parse(extract_invariant("lotka_volterra", 1, 30, 100));
    assert_eq!(v["basis"], "lotka_volterra_log");
    assert!(v["expression"].as_str().unwrap().contains("log"));
}

#[test]
fn field_mass_is_conserved() {
    for sys in ["burgers", "ks"] {
        let v = parse(pde_moments(sys, 2, 120));
        let mean: Vec<f64> = v["mean"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(mean.len(), 120);
        let spread = mean.iter().map(|m| (m - mean[0]).abs()).fold(0.0, f64::max);
        assert!(spread < 1e-6, "{sys}: {spread}");
        assert!(v["variance"][0].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn names_cover_every_system() {
    let names: Vec<String> = serde_json::from_str(&system_names()).unwrap();
    assert_eq!(names.len(), 9);
    assert!(names.iter().all(|n| n.parse::<conslaw::systems::SystemId>().is_ok()));
}
