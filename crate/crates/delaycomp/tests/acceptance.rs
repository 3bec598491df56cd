//! Acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture`).

use std::sync::OnceLock;
use std::time::Instant;

use delaycomp::controller::{synth_controller, synth_controller_unchecked, DynamicController, PlantModel};
use delaycomp::densela::{eigenvalues, mat_exp, solve_linear};
use delaycomp::fem::{build_fem_matrices, hat_basis_eval, BasisConfig};
use delaycomp::gauss;
use delaycomp::io::RunSpec;
use delaycomp::lmi::legendre::legendre_eval_deriv;
use delaycomp::lmi::{
    assemble_blocks, build_legendre_block, check_certificate, find_min_l, legendre_eval,
    solve_feasibility, Certificate, FeasOptions, FeasOutcome, LmiBlocks,
};
use delaycomp::matrix::Matrix;
use delaycomp::sim::{compare_metrics, lyapunov_trace, simulate_closed_loop, simulate_ideal, SimConfig};

const EXAMPLE1: &str = include_str!("../../../specs/example1.json");
const EXAMPLE2: &str = include_str!("../../../specs/example2.json");
const EXAMPLE3: &str = include_str!("../../../specs/example3.json");
const DESTABILIZED: &str = include_str!("../../../specs/destabilized.json");

fn report(criterion: usize, desc: &str, ok: bool, detail: &str) {
    println!(
        "[criterion {criterion}] {desc}: {}{}",
        if ok { "PASS" } else { "FAIL" },
        if detail.is_empty() { String::new() } else { format!(" ({detail})") }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_example1_synthesis() {
    let start = Instant::now();
    let spec = RunSpec::from_str(EXAMPLE1).unwrap();
    let (_, _, ctrl) = spec.synthesize(Some(2)).unwrap();
    let errs = [
        (&ctrl.k1 - &Matrix::row(&[-2.0, -1.4366])).max_abs(),
        (&ctrl.k2 - &Matrix::row(&[-5.4366])).max_abs(),
        (&ctrl.a_tilde - &Matrix::from_rows(&[vec![3.0, 5.8731], vec![-9.0, -8.7463]])).max_abs(),
        (&ctrl.b_tilde - &Matrix::column(&[10.8731, -21.7463])).max_abs(),
        (ctrl.h_ff - 1.0).abs(),
    ];
    let elapsed = start.elapsed();
    let worst = errs.iter().fold(0.0f64, |m, &e| m.max(e));
    report(
        1,
        "example-1 controller matrices within 1e-3",
        worst < 1e-3 && elapsed.as_secs_f64() < 1.0,
        &format!("max error {worst:.2e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_2_example2_synthesis() {
    let start = Instant::now();
    let spec = RunSpec::from_str(EXAMPLE2).unwrap();
    let (_, _, ctrl) = spec.synthesize(Some(2)).unwrap();
    let errs = [
        (&ctrl.k1 - &Matrix::row(&[-2.4026, -1.6969])).max_abs(),
        (&ctrl.k2 - &Matrix::row(&[-47.0112, -3.1933, -13.2171])).max_abs(),
        (&ctrl.a_tilde - &Matrix::from_rows(&[vec![7.6103, 12.7876], vec![-21.2206, -19.5753]]))
            .max_abs(),
        (&ctrl.b_tilde
            - &Matrix::from_rows(&[
                vec![188.0448, 12.7732, 52.8685],
                vec![-376.0896, -25.5463, -105.7369],
            ]))
        .max_abs(),
        (ctrl.h_ff - 5.6125).abs(),
    ];
    let elapsed = start.elapsed();
    let worst = errs.iter().fold(0.0f64, |m, &e| m.max(e));
    report(
        2,
        "example-2 controller matrices (LQR + expm + K1 jointly) within 1e-3",
        worst < 1e-3 && elapsed.as_secs_f64() < 1.0,
        &format!("max error {worst:.2e}, {elapsed:.2?}"),
    );
}

struct CertifiedInstance {
    label: String,
    plant: PlantModel,
    ctrl: DynamicController,
    blocks: LmiBlocks,
    cert: Certificate,
    found_l: usize,
    listed_l: usize,
    seconds: f64,
}

fn table1_instances() -> &'static Vec<CertifiedInstance> {
    static CACHE: OnceLock<Vec<CertifiedInstance>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let rows: [(&str, &str, &[(usize, usize)]); 3] = [
            ("example 1", EXAMPLE1, &[(2, 4), (3, 4), (10, 7)]),
            ("example 2", EXAMPLE2, &[(2, 5), (3, 6), (4, 5)]),
            ("example 3", EXAMPLE3, &[(4, 5), (5, 5), (6, 7)]),
        ];
        let mut out = Vec::new();
        for (name, text, pairs) in rows {
            let spec = RunSpec::from_str(text).unwrap();
            for &(n, listed_l) in pairs {
                let start = Instant::now();
                let (plant, _, ctrl) = spec.synthesize(Some(n)).unwrap();
                let rep = find_min_l(&plant, &ctrl, listed_l, &FeasOptions::default(), 1).unwrap();
                let seconds = start.elapsed().as_secs_f64();
                let (found_l, cert) = match (rep.first_feasible, rep.certificate) {
                    (Some(l), Some(c)) => (l, c),
                    _ => panic!("{name} N={n}: no certificate up to listed l={listed_l}"),
                };
                let blocks = assemble_blocks(&plant, &ctrl, cert.l).unwrap();
                out.push(CertifiedInstance {
                    label: format!("{name} N={n}"),
                    plant,
                    ctrl,
                    blocks,
                    cert,
                    found_l,
                    listed_l,
                    seconds,
                });
            }
        }
        out
    })
}

#[test]
fn criterion_3_table1_feasibility() {
    let mut ok = true;
    let mut details = Vec::new();
    for inst in table1_instances() {
        let m = check_certificate(&inst.blocks, &inst.cert.p, inst.cert.alpha).unwrap();
        let row_ok = m.passes(1e-8) && inst.found_l <= inst.listed_l && inst.seconds < 30.0;
        if !row_ok {
            ok = false;
        }
        details.push(format!(
            "{} l={}/{} margins ({:.1e},{:.1e},{:.1e}) {:.1}s",
            inst.label, inst.found_l, inst.listed_l, m.lambda_min_p, m.alpha,
            m.lambda_max_lambda, inst.seconds
        ));
    }
    report(
        3,
        "table-1 feasibility with independently checked margins",
        ok,
        &details.join("; "),
    );
}

#[test]
fn criterion_4_lyapunov_monotonicity() {
    let mut ok = true;
    let mut details = Vec::new();
    for inst in table1_instances() {
        let d = inst.plant.delay;
        let x0 = Matrix::column(&vec![1.0; inst.plant.state_dim()]);
        let cfg = SimConfig::new(d / 100.0, 8.0 * d.max(1.0), x0).unwrap();
        let traj = simulate_closed_loop(&inst.plant, &inst.ctrl, &cfg).unwrap();
        let v = lyapunov_trace(&traj, &inst.cert, &inst.blocks).unwrap();
        let allowed = 1e-6 * v[0] * traj.dt;
        let worst = v
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        if !(worst < allowed) || traj.diverged_at.is_some() {
            ok = false;
            details.push(format!(
                "{}: worst rise {worst:.2e} vs allowed {allowed:.2e}",
                inst.label
            ));
        }
    }
    if details.is_empty() {
        details.push(format!(
            "{} certified instances, r = 0, X0 = 1",
            table1_instances().len()
        ));
    }
    report(4, "sampled V(t) nonincreasing on every certified loop", ok, &details.join("; "));
}

#[test]
fn criterion_5_property_suite() {
    let mut fails: Vec<String> = Vec::new();

    // FEM matrices against a 16-point quadrature oracle
    for (n, d) in [(2usize, 1.0), (3, 1.0), (5, 0.5), (7, 1.65)] {
        let cfg = BasisConfig::new(n, d).unwrap();
        let fem = build_fem_matrices(&cfg);
        let mut e_q = Matrix::zeros(n, n);
        let mut a_q = Matrix::zeros(n, n);
        let dphi = |i: usize, zeta: f64| -> f64 {
            let e = ((zeta / cfg.h) as usize).min(n - 2);
            if i == e {
                -1.0 / cfg.h
            } else if i == e + 1 {
                1.0 / cfg.h
            } else {
                0.0
            }
        };
        for el in 0..cfg.elements() {
            let (a, b) = (cfg.node(el), cfg.node(el + 1));
            for i in 0..n {
                for j in 0..n {
                    e_q[(i, j)] += gauss::integrate(16, a, b, |z| {
                        let phi = hat_basis_eval(&cfg, z).unwrap();
                        phi[i] * phi[j]
                    });
                    a_q[(i, j)] += gauss::integrate(16, a, b, |z| {
                        let phi = hat_basis_eval(&cfg, z).unwrap();
                        -dphi(i, z) * phi[j]
                    });
                }
            }
        }
        a_q[(0, 0)] -= 1.0;
        if (&fem.e_d - &e_q).max_abs() > 1e-12 || (&fem.a_d - &a_q).max_abs() > 1e-12 {
            fails.push(format!("FEM quadrature N={n}"));
        }
    }

    // open-loop FEM spectrum in the closed left half-plane through N = 20
    for n in 2..=20 {
        let cfg = BasisConfig::new(n, 1.0).unwrap();
        let fem = build_fem_matrices(&cfg);
        let sys = solve_linear(&fem.e_d, &fem.a_d).unwrap();
        if eigenvalues(&sys).unwrap().iter().any(|&(re, _)| re > 1e-10) {
            fails.push(format!("FEM spectrum N={n}"));
        }
    }

    // Legendre derivative identity and orthogonality
    let d = 1.3;
    'deriv: for k in 0..7usize {
        for s in 0..=200 {
            let z = d * s as f64 / 200.0;
            let lhs = legendre_eval_deriv(k, z, d).unwrap();
            let mut rhs = 0.0;
            for i in 0..k {
                if (k + i) % 2 == 1 {
                    rhs += 2.0 * (2 * i + 1) as f64 / d * legendre_eval(i, z, d).unwrap();
                }
            }
            if (lhs - rhs).abs() > 1e-9 {
                fails.push(format!("Legendre derivative k={k}"));
                continue 'deriv;
            }
        }
    }
    for j in 0..6usize {
        for k in 0..6usize {
            let ip = gauss::integrate(32, 0.0, d, |z| {
                legendre_eval(j, z, d).unwrap() * legendre_eval(k, z, d).unwrap()
            });
            let expect = if j == k { d / (2 * j + 1) as f64 } else { 0.0 };
            if (ip - expect).abs() > 1e-9 {
                fails.push(format!("Legendre orthogonality ({j},{k})"));
            }
        }
    }

    // Bessel inequality on 1000 random piecewise-smooth signals,
    // equality on pure modes
    let bd = 1.0;
    let l = 5;
    let block = build_legendre_block(l, bd).unwrap();
    let mut state = 42u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for trial in 0..1000 {
        let c: Vec<f64> = (0..4).map(|_| next() * 2.0).collect();
        let kink = 0.2 + 0.6 * (next() + 0.5);
        let u = |z: f64| c[0] + c[1] * z + c[2] * (3.0 * z).sin() + c[3] * (z - kink).abs();
        let energy = gauss::integrate(64, 0.0, bd, |z| u(z) * u(z));
        let mut quad = 0.0;
        for k in 0..l {
            let om = gauss::integrate(64, 0.0, bd, |z| legendre_eval(k, z, bd).unwrap() * u(z));
            quad += block.q[(k, k)] * om * om;
        }
        if energy - quad / bd < -1e-9 {
            fails.push(format!("Bessel trial {trial}"));
            break;
        }
    }
    for j in 0..l {
        let energy = gauss::integrate(64, 0.0, bd, |z| {
            let v = legendre_eval(j, z, bd).unwrap();
            v * v
        });
        let om = gauss::integrate(64, 0.0, bd, |z| {
            let v = legendre_eval(j, z, bd).unwrap();
            v * v
        });
        if (energy - block.q[(j, j)] * om * om / bd).abs() > 1e-9 {
            fails.push(format!("Bessel equality mode {j}"));
        }
    }

    // K1 row consistent with the Galerkin integral on an arbitrary signal
    {
        let spec = RunSpec::from_str(EXAMPLE2).unwrap();
        let plant = spec.plant().unwrap();
        let k = Matrix::row(&[-3.0, -1.5, -5.0]);
        let n_basis = 5;
        let ctrl = synth_controller_unchecked(&plant, &k, n_basis).unwrap();
        let ud: Vec<f64> = (0..n_basis).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
        let lhs: f64 = (0..n_basis).map(|i| ctrl.k1[(0, i)] * ud[i]).sum();
        let cfg = &ctrl.cfg;
        let mut rhs = 0.0;
        for e in 0..cfg.elements() {
            rhs += gauss::integrate(64, cfg.node(e), cfg.node(e + 1), |z| {
                let kern =
                    (&(&k * &mat_exp(&plant.a, plant.delay - z).unwrap()) * &plant.b).as_scalar();
                let phi = hat_basis_eval(cfg, z).unwrap();
                kern * phi.iter().zip(ud.iter()).map(|(p, u)| p * u).sum::<f64>()
            });
        }
        if (lhs - rhs).abs() > 1e-10 {
            fails.push(format!("K1 Galerkin identity ({:.2e})", (lhs - rhs).abs()));
        }
    }

    // midpoint integrator order
    {
        let spec = RunSpec::from_str(EXAMPLE1).unwrap();
        let plant = spec.plant().unwrap();
        let ctrl = synth_controller(&plant, &Matrix::row(&[-2.0]), 3).unwrap();
        let final_y = |dt: f64| {
            let cfg = SimConfig::new(dt, 4.0, Matrix::scalar(1.0)).unwrap();
            *simulate_closed_loop(&plant, &ctrl, &cfg).unwrap().y.last().unwrap()
        };
        let (c, m, f) = (final_y(0.04), final_y(0.02), final_y(0.01));
        let order = ((c - m).abs() / (m - f).abs()).log2();
        if !(1.8..=2.2).contains(&order) {
            fails.push(format!("midpoint order {order:.2}"));
        }
    }

    report(
        5,
        "property suite (FEM quadrature/spectrum, Legendre, Bessel, K1, integrator order)",
        fails.is_empty(),
        &fails.join("; "),
    );
}

#[test]
fn criterion_6_figure_level_behavior() {
    let mut fails: Vec<String> = Vec::new();

    // example 1 with X0 = 1, r = 0: output grows over the dead time, then
    // settles near zero
    {
        let spec = RunSpec::from_str(EXAMPLE1).unwrap();
        let plant = spec.plant().unwrap();
        let ctrl = synth_controller(&plant, &Matrix::row(&[-2.0]), 2).unwrap();
        let cfg = SimConfig::new(0.01, 25.0, Matrix::scalar(1.0)).unwrap();
        let traj = simulate_closed_loop(&plant, &ctrl, &cfg).unwrap();
        let idx = (1.0 / traj.dt).round() as usize;
        let peak = traj.y[..=idx].iter().fold(0.0f64, |m, y| m.max(y.abs()));
        if !(peak > traj.y[0].abs() && traj.y.last().unwrap().abs() < 1e-3) {
            fails.push("example 1 diverge-then-converge".into());
        }
    }

    // deviation from the ideal predictor response strictly decreasing in N
    for (name, text, orders) in [
        ("example 1", EXAMPLE1, vec![2usize, 3, 10]),
        ("example 2", EXAMPLE2, vec![2, 3, 4]),
    ] {
        let spec = RunSpec::from_str(text).unwrap();
        let plant = spec.plant().unwrap();
        let k = spec.design_gain(&plant).unwrap();
        let cfg = spec.sim_config(None).unwrap();
        let ideal = simulate_ideal(&plant, &k, &cfg).unwrap();
        let mut prev = f64::INFINITY;
        for &n in &orders {
            let ctrl = synth_controller(&plant, &k, n).unwrap();
            let traj = simulate_closed_loop(&plant, &ctrl, &cfg).unwrap();
            let m = compare_metrics(&traj, &ideal).unwrap();
            if !(m.sup_deviation < prev) {
                fails.push(format!("{name} deviation not decreasing at N={n}"));
            }
            prev = m.sup_deviation;
        }
    }

    // destabilized fixture: simulation diverges and no l certifies it
    {
        let spec = RunSpec::from_str(DESTABILIZED).unwrap();
        let (plant, _, ctrl) = spec.synthesize(None).unwrap();
        let cfg = spec.sim_config(None).unwrap();
        let traj = simulate_closed_loop(&plant, &ctrl, &cfg).unwrap();
        if traj.diverged_at.is_none() {
            fails.push("destabilized fixture did not diverge".into());
        }
        for l in 1..=spec.l_max {
            let blocks = assemble_blocks(&plant, &ctrl, l).unwrap();
            if let FeasOutcome::Found(_) =
                solve_feasibility(&blocks, &FeasOptions::default()).unwrap()
            {
                fails.push(format!("destabilized fixture certified at l={l}"));
            }
        }
    }

    report(
        6,
        "figure-level behavior (transient shape, order refinement, destabilized loop)",
        fails.is_empty(),
        &fails.join("; "),
    );
}
