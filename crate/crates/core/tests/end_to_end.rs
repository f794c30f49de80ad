use dictsel::datagen::{
    add_noise, add_noise_grid, burgers_default, integrate_rk4, BenchmarkSystem, GridDataset, TrajectoryDataset,
};
use dictsel::library::{
    build_lorenz_paper_library, build_pde_trial_library, build_polynomial_library, evaluate, normalize_columns,
};
use dictsel::regressors::{adopted_removal, esr, gbsr, refit, SearchOptions, SparsityPolicy};
use dictsel::weakform::{build_test_bank, weak_transform_ode, weak_transform_pde_1d};

fn lorenz() -> TrajectoryDataset {
    let sys = BenchmarkSystem::lorenz_default();
    integrate_rk4(&sys, &sys.default_initial_condition(), (0.0, sys.default_final_time()), 0.01).unwrap()
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

#[test]
fn lorenz_weak_gbsr_recovers_support_and_coefficients() {
    let data = lorenz();
    let dict = build_lorenz_paper_library();
    let theta = evaluate(&dict, &data).unwrap();
    let grid = data.time_grid();
    let span = (grid.len - 1) as f64 * grid.step;
    let bank = build_test_bank(&grid, 64, 8, 8, 0.1 * span).unwrap();
    let ws = weak_transform_ode(&theta, &data, &bank).unwrap();
    let lib = normalize_columns(ws.library()).unwrap();

    let trace = gbsr(&lib, ws.targets(), SearchOptions::default()).unwrap();
    let removed = adopted_removal(&trace, SparsityPolicy::MaxRatio).unwrap();
    let kept = sorted(trace.kept_labels_at(removed));
    assert_eq!(kept, ["x", "xy", "xz", "y", "z"]);

    let truth = BenchmarkSystem::lorenz_default().true_coefficients(&dict).unwrap();
    let keep = trace.kept_at(removed);
    for (c, y) in ws.targets().iter().enumerate() {
        let model = refit(&lib, &keep, y).unwrap();
        for (j, t) in truth[c].iter().enumerate() {
            let got = model.coefficients.values()[j];
            assert!((got - t).abs() <= 1e-3 * t.abs().max(1.0), "coordinate {c}, term {j}: {got} vs {t}");
        }
    }
}

#[test]
fn exhaustive_and_greedy_agree_on_clean_lorenz_y() {
    let data = lorenz();
    let dict = build_polynomial_library(3, 2).unwrap();
    let theta = evaluate(&dict, &data).unwrap();
    let grid = data.time_grid();
    let bank = build_test_bank(&grid, 64, 8, 8, 0.1 * (grid.len - 1) as f64 * grid.step).unwrap();
    let ws = weak_transform_ode(&theta, &data, &bank).unwrap();
    let lib = normalize_columns(ws.library()).unwrap();
    let y = std::slice::from_ref(&ws.targets()[1]);
    let n = lib.cols();
    let ex = esr(&lib, y, n - 3, SearchOptions::default()).unwrap();
    let gr = gbsr(&lib, y, SearchOptions::default()).unwrap();
    assert_eq!(sorted(ex.kept_labels_at(n - 3)), ["x", "xz", "y"]);
    assert_eq!(sorted(gr.kept_labels_at(n - 3)), ["x", "xz", "y"]);
    let (e, g) = (ex.level(n - 3).unwrap().score, gr.level(n - 3).unwrap().score);
    assert!(e <= g * (1.0 + 1e-12));
}

#[test]
fn burgers_weak_form_keeps_flux_term() {
    let u = burgers_default().unwrap();
    let dict = build_pde_trial_library(3, 2).unwrap();
    let span = |g: &dictsel::datagen::UniformGrid| (g.len - 1) as f64 * g.step;
    let xb = build_test_bank(u.x_grid(), 8, 4, 4, 0.25 * span(u.x_grid())).unwrap();
    let tb = build_test_bank(u.t_grid(), 8, 4, 4, 0.25 * span(u.t_grid())).unwrap();
    let ws = weak_transform_pde_1d(&u, &dict, &xb, &tb).unwrap();
    let lib = normalize_columns(ws.library()).unwrap();
    let y = &ws.targets()[0];
    let trace = gbsr(&lib, std::slice::from_ref(y), SearchOptions::default()).unwrap();
    let removed = adopted_removal(&trace, SparsityPolicy::MaxRatio).unwrap();
    assert_eq!(trace.kept_labels_at(removed), ["d_x(u^2)"]);
    let model = refit(&lib, &trace.kept_at(removed), y).unwrap();
    let c = model.coefficient("d_x(u^2)").unwrap();
    assert!((c + 0.5).abs() < 0.025, "coefficient {c}");
}

#[test]
fn noise_is_reproducible_and_seed_dependent() {
    let data = lorenz();
    let a = add_noise(&data, 0.01, 11).unwrap();
    let b = add_noise(&data, 0.01, 11).unwrap();
    let c = add_noise(&data, 0.01, 12).unwrap();
    assert_eq!(a.states(), b.states());
    assert_ne!(a.states(), c.states());
    assert_eq!(a.noise().unwrap().seed, 11);

    let u = burgers_default().unwrap();
    let g1 = add_noise_grid(&u, 0.1, 3).unwrap();
    let g2 = add_noise_grid(&u, 0.1, 3).unwrap();
    assert_eq!(g1.values(), g2.values());
}

#[test]
fn datasets_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let data = add_noise(&lorenz(), 0.001, 5).unwrap();
    let path = dir.path().join("traj.csv");
    data.write(&path).unwrap();
    let back = TrajectoryDataset::read(&path).unwrap();
    assert_eq!(back.len(), data.len());
    assert_eq!(back.states(), data.states());
    assert_eq!(back.noise(), data.noise());

    let u = burgers_default().unwrap();
    let path = dir.path().join("grid.csv");
    u.write(&path).unwrap();
    let back = GridDataset::read(&path).unwrap();
    assert_eq!(back.values(), u.values());
    assert_eq!(back.x_grid(), u.x_grid());
}
