//! End-to-end checks: network -> reaction network -> ODE solution.

use neurocrn_core::compiler::compile_network;
use neurocrn_core::integrator::{integrate, IntegratorConfig};
use neurocrn_core::neural_net::{Activation, Architecture, HardwiredNetwork, Matrix, Parameters};
use neurocrn_core::seeded_rng;
use neurocrn_core::training::{train, Dataset, TrainingConfig};
use neurocrn_core::verify::{random_initial_state, verify_implementation, TIGHT_TOLERANCE};
use rand::Rng;

fn single_node(w: f64, b: f64, h: f64) -> HardwiredNetwork {
    let arch = Architecture::new(vec![1, 1]).unwrap();
    let params = Parameters {
        weights: vec![Matrix::from_row_major(1, 1, vec![w]).unwrap()],
        biases: vec![vec![b]],
    };
    HardwiredNetwork::new(arch, params, Activation::SmoothedRelu { h }).unwrap()
}

/// Closed-form solution of `x' = h + rho x - x^2` (a Riccati equation with
/// constant coefficients) through its two real roots.
fn riccati(h: f64, rho: f64, x0: f64, t: f64) -> f64 {
    let disc = (rho * rho + 4.0 * h).sqrt();
    let (a, b) = ((rho + disc) / 2.0, (rho - disc) / 2.0);
    let c = (x0 - a) / (x0 - b);
    let e = c * (-(a - b) * t).exp();
    (a - b * e) / (1.0 - e)
}

#[test]
fn compiled_single_node_follows_the_closed_form() {
    let mut cfg = IntegratorConfig::with_t_end(8.0);
    cfg.rel_tol = 1e-11;
    cfg.abs_tol = 1e-13;
    cfg.stop_at_steady_state = false;
    for (w, b, d, h, x0) in [
        (1.5, -0.5, 0.8, 1.0, 0.0),
        (-2.0, 0.3, 0.6, 0.1, 7.0),
        (0.0, 3.0, 0.0, 1.0, 250.0),
    ] {
        let mut compiled = compile_network(&single_node(w, b, h)).unwrap();
        compiled.set_input(&[d]).unwrap();
        let sys = &compiled.system;
        let traj = integrate(|x, out| sys.rhs_into(x, out), &[x0], &cfg).unwrap();
        let rho = w * d + b;
        for t in [0.01, 0.1, 0.5, 1.0, 3.0, 8.0] {
            let got = traj.interpolate(t)[0];
            let want = riccati(h, rho, x0, t);
            assert!((got - want).abs() <= 1e-7 * want.max(1.0), "t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn first_layer_is_blind_to_later_layers() {
    // the state of layer 1 depends only on the input, so changing layer 2
    // must not move it
    let mut rng = seeded_rng(17);
    let act = Activation::SmoothedRelu { h: 1.0 };
    let net = HardwiredNetwork::random(Architecture::new(vec![3, 4, 2]).unwrap(), act, &mut rng).unwrap();
    let mut params = net.parameters().clone();
    for v in params.weights[1].as_mut_slice() {
        *v = -*v * 3.0;
    }
    let other = net.with_parameters(params).unwrap();
    let d = [0.3, 0.9, 0.1];
    let x0 = random_initial_state(6, 5.0, &mut rng);
    let mut cfg = IntegratorConfig::with_t_end(6.0);
    cfg.stop_at_steady_state = false;
    cfg.rel_tol = 1e-11;
    cfg.abs_tol = 1e-13;
    let run = |n: &HardwiredNetwork| {
        let mut c = compile_network(n).unwrap();
        c.set_input(&d).unwrap();
        let sys = c.system;
        integrate(|x, out| sys.rhs_into(x, out), &x0, &cfg).unwrap()
    };
    let (a, b) = (run(&net), run(&other));
    for t in [0.2, 1.0, 2.5, 6.0] {
        let (xa, xb) = (a.interpolate(t), b.interpolate(t));
        for i in 0..4 {
            assert!((xa[i] - xb[i]).abs() < 1e-8, "t={t} node {i}");
        }
        assert!((xa[4] - xb[4]).abs() + (xa[5] - xb[5]).abs() > 1e-3);
    }
}

#[test]
fn trained_network_is_implemented_by_its_compilation() {
    let mut rng = seeded_rng(4);
    let n = 200;
    let images: Vec<f64> = (0..n * 6).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels: Vec<u8> = (0..n).map(|k| (k % 10) as u8).collect();
    let data = Dataset::new(images, labels, 6).unwrap();
    for q in [2, 3] {
        let cfg = TrainingConfig {
            batch_size: 20,
            iterations: 30,
            sample_pool: n,
            q,
            ..TrainingConfig::default()
        };
        let mut net =
            HardwiredNetwork::random(Architecture::new(vec![6, 5, 10]).unwrap(), cfg.activation(), &mut rng).unwrap();
        train(&data, &mut net, &cfg).unwrap();
        let x0 = random_initial_state(15, 10.0, &mut rng);
        let report = verify_implementation(&net, data.image(3), &x0, 50.0, TIGHT_TOLERANCE).unwrap();
        assert!(report.passed, "q={q}: {}", report.max_abs_diff);
        assert_eq!(report.per_node.len(), 15);
    }
}
