//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line per criterion
//! and fails if any of its criteria does. The lines go straight to stdout, so
//! they show up without `--nocapture`.
//!
//! Long reproductions at full scale are `#[ignore]`d; everything else runs in
//! the default test pass.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quditvar::circuit::{build_ansatz, Angle, AnsatzKind, Axis, Circuit, Gate};
use quditvar::models::{BbhParams, BoseHubbardParams, ModelDescriptor};
use quditvar::oracle::{ground_state_fidelity, qudit_ground_manifold, Spectrum};
use quditvar::pauli::{total_spin_component, total_spin_squared};
use quditvar::vqe::{run_vqe, VqeConfig, VqeResult};
use quditvar::vte::{run_vte, ParamInit, VteConfig};
use quditvar::{spin_matrices, Encoder, EncodingKind, Pauli, PauliSum, SparseOperator, C64};

/// Writes past the test harness's output capture.
fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn check(name: &str, pass: bool, detail: String) -> bool {
    say(&format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
    pass
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Builds a Pauli sum from `(coefficient, [labels])` groups.
fn golden(groups: &[(f64, &[&str])]) -> PauliSum {
    let mut terms = Vec::new();
    for (coeff, labels) in groups {
        for l in labels.iter() {
            terms.push((c(*coeff), *l));
        }
    }
    PauliSum::from_labels(4, &terms).unwrap()
}

/// Largest coefficient difference over the union of both term sets.
fn termwise_diff(a: &PauliSum, b: &PauliSum) -> f64 {
    a.sub(b).unwrap().max_abs_coefficient()
}

fn bond_operators() -> (quditvar::CMatrix, quditvar::CMatrix) {
    let ss = spin_matrices(1.0).unwrap().heisenberg_bond();
    let ss2 = &ss * &ss;
    (ss, ss2)
}

// Labels list qubits j, j+1 (first site) then j+2, j+3 (second site).

fn symmetry_ss() -> PauliSum {
    golden(&[(
        0.25,
        &["IXIX", "IXXI", "XIIX", "XIXI", "IYIY", "IYYI", "YIIY", "YIYI", "ZIZI", "ZIIZ", "IZZI", "IZIZ"],
    )])
}

fn symmetry_ss2() -> PauliSum {
    golden(&[
        (0.75, &["IIII"]),
        (0.25, &["IIXX", "XXII", "XXXX"]),
        (
            -0.125,
            &["IZIZ", "IYIY", "IZZI", "IYYI", "ZIIZ", "YIIY", "ZIZI", "YIYI", "IXIX", "IXXI", "XIIX", "XIXI"],
        ),
        (
            0.125,
            &["YXYX", "ZXZX", "YXXY", "ZXXZ", "XYYX", "XZZX", "XYXY", "XZXZ", "ZYZY", "ZYYZ", "YZZY", "YZYZ"],
        ),
        (0.25, &["IIYY", "YYII", "YYYY", "IIZZ", "ZZII", "ZZZZ"]),
    ])
}

fn binary_ss() -> PauliSum {
    golden(&[
        (
            0.125,
            &[
                "IXIX", "IXZX", "IXXI", "ZXIX", "ZXZX", "ZXXI", "XIIX", "XIZX", "XIXI", "XZXZ", "IYIY", "IYZY", "IYYI",
                "ZYIY", "ZYZY", "ZYYI", "YIIY", "YIZY", "YIYI", "YZYZ",
            ],
        ),
        (
            -0.125,
            &["IXXZ", "ZXXZ", "XIXZ", "XZIX", "XZZX", "XZXI", "IYYZ", "ZYYZ", "YIYZ", "YZIY", "YZZY", "YZYI"],
        ),
        (0.25, &["ZIZI", "ZIIZ", "IZZI", "IZIZ"]),
    ])
}

fn binary_ss2() -> PauliSum {
    golden(&[
        (0.75, &["IIII"]),
        (0.25, &["IIZI", "ZIII"]),
        (-0.25, &["IIIZ", "ZIIZ", "IZZI", "IZII"]),
        (
            0.125,
            &[
                "XXXX", "YXYX", "YXXY", "ZXXZ", "XYYX", "YYYY", "XYXY", "IXXZ", "ZYYZ", "XZZX", "XZIX", "YZIY", "YZZY",
            ],
        ),
        (-0.125, &["XXYY", "ZYYI", "IXXI", "YIIY", "YIZY", "XIZX", "XIIX"]),
        (0.25, &["IIZZ", "ZZII", "ZZZZ"]),
    ])
}

fn golden_lines(kind: EncodingKind, cases: [(&str, PauliSum); 2]) -> bool {
    let (ss, ss2) = bond_operators();
    let enc = Encoder::new(kind, 3).unwrap();
    let mut ok = true;
    for ((name, want), op) in cases.iter().zip([&ss, &ss2]) {
        let got = enc.encode_term(op, 2).unwrap();
        let diff = termwise_diff(&got, want);
        ok &= check(
            &format!("1 golden {kind} {name}"),
            diff < 1e-12 && got.len() == want.len(),
            format!("max |Δc| = {diff:.2e}, {} vs {} terms", got.len(), want.len()),
        );
    }
    ok
}

#[test]
fn criterion_01_golden_symmetry() {
    let t = Instant::now();
    let ok = golden_lines(EncodingKind::Symmetry, [("S·S", symmetry_ss()), ("(S·S)²", symmetry_ss2())]);
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_01_golden_binary() {
    let t = Instant::now();
    let ok = golden_lines(EncodingKind::Binary, [("S·S", binary_ss()), ("(S·S)²", binary_ss2())]);
    // Diagnostics: the golden binary S·S is what one gets from the level map
    // 0 → 00, 1 → 01, 2 → 11 (not the binary strings of 0, 1, 2), and the
    // golden (S·S)² is not the square of any encoded S·S.
    let (ss, _) = bond_operators();
    let gray = gray_like_isometry();
    let tt = quditvar::linalg::kron(&gray, &gray);
    let alt = PauliSum::from_matrix(&(&tt * &ss * tt.adjoint()), 4, 1e-14).unwrap();
    say(&format!("    binary S·S under levels → 00, 01, 11: max |Δc| = {:.2e}", termwise_diff(&alt, &binary_ss())));
    let (vals, _) = quditvar::linalg::hermitian_eigh(&binary_ss2().to_matrix().unwrap());
    let not_square = vals.iter().any(|v| [0.0, 1.0, 4.0].iter().all(|w| (v - w).abs() > 1e-6));
    say(&format!("    golden binary (S·S)² has eigenvalues outside {{0, 1, 4}}: {not_square}"));
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}

fn gray_like_isometry() -> quditvar::CMatrix {
    let mut t = quditvar::CMatrix::zeros(4, 3);
    for (level, row) in [0usize, 1, 3].into_iter().enumerate() {
        t[(row, level)] = c(1.0);
    }
    t
}

/// The library's binary expansions against a dense `T⊗T A (T⊗T)†` built here.
#[test]
fn binary_expansions_match_dense_oracle() {
    let (ss, ss2) = bond_operators();
    let mut t = quditvar::CMatrix::zeros(4, 3);
    for j in 0..3 {
        t[(j, j)] = c(1.0);
    }
    let tt = quditvar::linalg::kron(&t, &t);
    let bin = Encoder::binary(3).unwrap();
    for a in [&ss, &ss2] {
        let want = PauliSum::from_matrix(&(&tt * a * tt.adjoint()), 4, 1e-14).unwrap();
        let got = bin.encode_term(a, 2).unwrap();
        assert!(termwise_diff(&got, &want) < 1e-12);
    }
}

#[test]
fn criterion_02_isometries() {
    let mut ok = true;
    for d in [2usize, 3, 4, 5, 9] {
        for kind in [EncodingKind::Binary, EncodingKind::Symmetry] {
            let e = Encoder::new(kind, d).unwrap();
            let t = e.isometry();
            let gram = t.adjoint() * t;
            let err = (&gram - quditvar::CMatrix::identity(d, d)).map(|z| z.norm()).max();
            // Dicke amplitudes are 1/√C(d−1, j); their squares only sum to one up to
            // rounding, so "exact" means within a few ulps.
            ok &= check(&format!("2 T†T = I ({kind}, d = {d})"), err < 1e-14, format!("max |T†T − I| = {err:.1e}"));
            if kind == EncodingKind::Binary {
                let m = t.nrows();
                let proj = t * t.adjoint();
                let full = (&proj - quditvar::CMatrix::identity(m, m)).map(|z| z.norm()).max() < 1e-15;
                let pow2 = d.is_power_of_two();
                ok &= check(
                    &format!("2 T_bT_b† = I iff d is a power of two (d = {d})"),
                    full == pow2,
                    format!("complete = {full}, power of two = {pow2}"),
                );
            }
        }
    }
    assert!(ok);
}

fn bbh(theta: f64, n: usize) -> ModelDescriptor {
    ModelDescriptor::Bbh(BbhParams::new(theta, n))
}

#[test]
fn criterion_03_fidelity_map() {
    let t = Instant::now();
    let sym = Encoder::symmetry(3).unwrap();
    let bin = Encoder::binary(3).unwrap();
    let grid: Vec<f64> = (0..40).map(|k| -PI + 2.0 * PI * k as f64 / 39.0).collect();
    let mut worst: f64 = 0.0;
    for &theta in &grid {
        let model = bbh(theta, 6).build().unwrap();
        let a = ground_state_fidelity(&model, &sym).unwrap().fidelity;
        let b = ground_state_fidelity(&model, &bin).unwrap().fidelity;
        worst = worst.max((a - b).abs());
    }
    let mut ok = check(
        "3 binary and symmetry fidelity curves agree",
        worst < 1e-8,
        format!("max |ΔF| = {worst:.2e} over 40 θ in [−π, π]"),
    );
    let dimer = ground_state_fidelity(&bbh(-0.5 * PI, 6).build().unwrap(), &sym).unwrap().fidelity;
    ok &= check("3 fidelity at θ = −0.5π", dimer > 0.99, format!("F = {dimer:.6} (> 0.99)"));
    let critical = ground_state_fidelity(&bbh(0.32 * PI, 6).build().unwrap(), &sym).unwrap().fidelity;
    ok &= check("3 fidelity at θ = 0.32π", critical < 0.01, format!("F = {critical:.2e} (< 0.01)"));
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_04_eigenstate_rank() {
    let t = Instant::now();
    let model = bbh(0.32 * PI, 6).build().unwrap();
    let sym = Encoder::symmetry(3).unwrap();
    let h = SparseOperator::from_pauli_sum(&sym.encode_hamiltonian(&model).unwrap());
    let spectrum = Spectrum::of(&h).unwrap();
    let target = qudit_ground_manifold(&model).unwrap().encoded(&sym, 6).unwrap();
    let r = spectrum.eigenstate_rank(&target.states[0], 0.5).unwrap();
    let ok = check(
        "4 encoded ground state sits in the cluster containing eigenstate 1228",
        r.cluster_first <= 1228 && 1228 <= r.cluster_last,
        format!(
            "rank {} (overlap {:.6}), cluster {}..={} at E = {:.10}",
            r.rank, r.overlap, r.cluster_first, r.cluster_last, r.energy
        ),
    );
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}

// ---------------------------------------------------------------------------
// Criterion 10: property suites.

fn random_gate(rng: &mut ChaCha8Rng, n: usize, next: &mut usize) -> Gate {
    let q = rng.gen_range(0..n);
    let other = |rng: &mut ChaCha8Rng| loop {
        let r = rng.gen_range(0..n);
        if r != q {
            break r;
        }
    };
    let axes = [Axis::X, Axis::Y, Axis::Z];
    let mut param = || {
        *next += 1;
        Angle::Param(*next - 1)
    };
    match rng.gen_range(0..7) {
        2 if n > 1 => Gate::Cnot { control: q, target: other(rng) },
        3 if n > 1 => {
            let b = other(rng);
            Gate::NGate { a: q, b, angles: [param(), param(), param()] }
        }
        4 if n > 1 => {
            let t = other(rng);
            Gate::Controlled {
                control: q,
                on: rng.gen_bool(0.5),
                gate: Box::new(Gate::Rot { axis: axes[rng.gen_range(0..3)], q: t, angle: param() }),
            }
        }
        5 => Gate::H(q),
        6 => Gate::S(q),
        _ => Gate::Rot { axis: axes[rng.gen_range(0..3)], q, angle: param() },
    }
}

fn random_observable(rng: &mut ChaCha8Rng, n: usize) -> PauliSum {
    let letters = ['I', 'X', 'Y', 'Z'];
    let terms: Vec<(C64, String)> = (0..5)
        .map(|_| (c(rng.gen_range(-1.0..1.0)), (0..n).map(|_| letters[rng.gen_range(0..4)]).collect()))
        .collect();
    PauliSum::from_labels(n, &terms).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..1usize << n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

fn gradient_vs_finite_differences() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let mut circuit = Circuit::new(n);
        let mut next = 0;
        for _ in 0..rng.gen_range(3..25) {
            let g = random_gate(&mut rng, n, &mut next);
            circuit.push(g).unwrap();
        }
        if circuit.n_params() == 0 {
            circuit.push(Gate::Rot { axis: Axis::Y, q: 0, angle: Angle::Param(next) }).unwrap();
        }
        let obs = random_observable(&mut rng, n);
        let op = SparseOperator::from_pauli_sum(&obs);
        let init = random_state(&mut rng, n);
        let params: Vec<f64> = (0..circuit.n_params()).map(|_| rng.gen_range(-PI..PI)).collect();
        let (_, grad) = circuit.expectation_and_gradient(&params, &op, &init).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..params.len())
            .map(|k| {
                let mut p = params.clone();
                p[k] += h;
                let up = op.expectation(&circuit.run(&p, &init).unwrap()).unwrap().re;
                p[k] -= 2.0 * h;
                let down = op.expectation(&circuit.run(&p, &init).unwrap()).unwrap().re;
                (up - down) / (2.0 * h)
            })
            .collect();
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = fd.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-3);
        worst = worst.max(diff / scale);
    }
    check("10 adjoint gradient vs central differences (50 circuits, n ≤ 8)", worst < 1e-5, format!("max rel err {worst:.2e}"))
}

fn ansatz_norms_and_conservation() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_norm: f64 = 0.0;
    let mut worst_sz: f64 = 0.0;
    let mut worst_s2: f64 = 0.0;
    for kind in [AnsatzKind::HardwareEfficient, AnsatzKind::SzConserving, AnsatzKind::TotalSpin] {
        for n in 2..=8 {
            let circuit = build_ansatz(kind, n, 3).unwrap();
            let sz = SparseOperator::from_pauli_sum(&total_spin_component(n, Pauli::Z));
            let s2 = SparseOperator::from_pauli_sum(&total_spin_squared(n));
            for _ in 0..3 {
                let init = random_state(&mut rng, n);
                let params: Vec<f64> = (0..circuit.n_params()).map(|_| rng.gen_range(-PI..PI)).collect();
                let out = circuit.run(&params, &init).unwrap();
                let norm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                worst_norm = worst_norm.max((norm - 1.0).abs());
                let drift = |op: &SparseOperator| {
                    (op.expectation(&out).unwrap() - op.expectation(&init).unwrap()).norm()
                };
                if kind != AnsatzKind::HardwareEfficient {
                    worst_sz = worst_sz.max(drift(&sz));
                }
                if kind == AnsatzKind::TotalSpin {
                    worst_s2 = worst_s2.max(drift(&s2));
                }
            }
        }
    }
    let mut ok = check("10 statevector norm after every ansatz", worst_norm < 1e-12, format!("max |‖ψ‖ − 1| = {worst_norm:.2e}"));
    ok &= check("10 ⟨S_tot^z⟩ drift, conserving ansatzes", worst_sz < 1e-10, format!("max drift {worst_sz:.2e}"));
    ok &= check("10 ⟨S_tot²⟩ drift, total-spin ansatz", worst_s2 < 1e-10, format!("max drift {worst_s2:.2e}"));
    ok
}

fn vte_metric_is_psd() -> bool {
    let mut worst = f64::INFINITY;
    for theta in [PI / 4.0, 0.5f64.atan()] {
        let mut cfg = VteConfig::new(bbh(theta, 2), EncodingKind::Symmetry, AnsatzKind::TotalSpin, 8, 1.0);
        cfg.initial_state = "fock:0,2".into();
        cfg.initial_params = ParamInit::Mirrored { seed: 7, width: 0.5 };
        // run_vte rejects any step whose A^R is asymmetric or has an
        // eigenvalue below −1e-10, so completing the run is the check.
        let traj = run_vte(&cfg).unwrap();
        worst = worst.min(traj.min_eigenvalue_a.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    check("10 A^R symmetric PSD at every VTE step", worst >= -1e-10, format!("min eigenvalue {worst:.2e}"))
}

fn spin_algebra() -> bool {
    let mut worst: f64 = 0.0;
    for s in [0.5, 1.0, 1.5, 2.0] {
        let m = spin_matrices(s).unwrap();
        let i = C64::new(0.0, 1.0);
        let comm = |a: &quditvar::CMatrix, b: &quditvar::CMatrix| a * b - b * a;
        let d = m.sx.nrows();
        let id = quditvar::CMatrix::identity(d, d);
        let casimir = &m.sx * &m.sx + &m.sy * &m.sy + &m.sz * &m.sz;
        let errs = [
            (comm(&m.sx, &m.sy) - &m.sz * i).map(|z| z.norm()).max(),
            (comm(&m.sy, &m.sz) - &m.sx * i).map(|z| z.norm()).max(),
            (comm(&m.sz, &m.sx) - &m.sy * i).map(|z| z.norm()).max(),
            (casimir - id * c(s * (s + 1.0))).map(|z| z.norm()).max(),
        ];
        worst = errs.iter().cloned().fold(worst, f64::max);
    }
    check("10 spin algebra [S^a, S^b] = iε S^c and S² = s(s+1), s ∈ {½, 1, 3/2, 2}", worst < 1e-12, format!("max err {worst:.2e}"))
}

#[test]
fn criterion_10_property_suites() {
    let t = Instant::now();
    let results = [gradient_vs_finite_differences(), ansatz_norms_and_conservation(), vte_metric_is_psd(), spin_algebra()];
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(results.iter().all(|&r| r));
}

// ---------------------------------------------------------------------------
// Criteria 5–9: variational runs at desk scale.

fn bbh_vqe(theta: f64, n: usize, layers: usize) -> VqeConfig {
    VqeConfig::new(bbh(theta, n), EncodingKind::Symmetry, AnsatzKind::TotalSpin, layers)
}

fn fidelities(r: &VqeResult) -> Vec<f64> {
    r.per_restart.iter().map(|x| (x.final_fidelity * 1e4).round() / 1e4).collect()
}

#[test]
fn criterion_05_vqe_convergence() {
    let t = Instant::now();
    let mut ok = true;
    for theta in [-0.71 * PI, -0.3 * PI, -0.16 * PI, (1.0f64 / 3.0).atan()] {
        let mut cfg = bbh_vqe(theta, 4, 5);
        cfg.initial_state = "singlet_product".into();
        cfg.restarts = 5;
        let r = run_vqe(&cfg).unwrap();
        ok &= check(
            &format!("5a VQE N = 4, θ = {:.4}π, 5 layers", theta / PI),
            r.mean_fidelity >= 0.95,
            format!("mean F = {:.4} over {:?}", r.mean_fidelity, fidelities(&r)),
        );
    }
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}

#[test]
#[ignore = "hours: N = 6 at full layer count"]
fn criterion_05b_vqe_convergence_n6() {
    let mut ok = true;
    for theta in [-0.71 * PI, -0.3 * PI, -0.16 * PI, (1.0f64 / 3.0).atan()] {
        let mut cfg = bbh_vqe(theta, 6, 8);
        cfg.initial_state = "singlet_product".into();
        cfg.restarts = 5;
        let r = run_vqe(&cfg).unwrap();
        ok &= check(
            &format!("5b VQE N = 6, θ = {:.4}π", theta / PI),
            r.mean_fidelity >= 0.95,
            format!("mean F = {:.4} over {:?}", r.mean_fidelity, fidelities(&r)),
        );
    }
    assert!(ok);
}

#[test]
fn criterion_06_penalty() {
    let t = Instant::now();
    let run = |penalty: bool| {
        let mut cfg = bbh_vqe(0.32 * PI, 4, 8);
        // A triplet on the first bond: the variational state can only leave
        // the encoded space if the penalty does not hold it back.
        cfg.initial_state = "triplet_at:0".into();
        cfg.penalty = penalty;
        cfg.beta = if penalty { 10.0 } else { 0.0 };
        cfg.max_iterations = 3000;
        cfg.restarts = 5;
        run_vqe(&cfg).unwrap()
    };
    let off = run(false);
    let on = run(true);
    let mut ok = check(
        "6 β = 0 converges away from the ground state",
        off.mean_fidelity < 0.05,
        format!("mean F = {:.4} over {:?}", off.mean_fidelity, fidelities(&off)),
    );
    ok &= check(
        "6 β = 10 reaches the ground state",
        on.mean_fidelity >= 0.95,
        format!("mean F = {:.4} over {:?}", on.mean_fidelity, fidelities(&on)),
    );
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_07_encoding_comparison() {
    let t = Instant::now();
    let model = ModelDescriptor::Bbh(BbhParams::new(-0.36 * PI, 4).with_spin(1.5));
    let mut sym = VqeConfig::new(model.clone(), EncodingKind::Symmetry, AnsatzKind::TotalSpin, 5);
    sym.initial_state = "singlet_product".into();
    let mut bin = VqeConfig::new(model, EncodingKind::Binary, AnsatzKind::HardwareEfficient, 5);
    for cfg in [&mut sym, &mut bin] {
        cfg.restarts = 5;
        cfg.max_iterations = 300;
    }
    let s = run_vqe(&sym).unwrap();
    let b = run_vqe(&bin).unwrap();
    let ok = check(
        "7 symmetry beats binary by ≥ 0.1 at equal budget (spin-3/2, N = 4)",
        s.mean_fidelity - b.mean_fidelity >= 0.1,
        format!("symmetry {:.4} vs binary {:.4}", s.mean_fidelity, b.mean_fidelity),
    );
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_08_bose_hubbard() {
    let t = Instant::now();
    let mut ok = true;
    // The attractive case has a much flatter landscape and needs the longer
    // budget.
    for (u, iterations) in [(2.0, 3000), (-2.0, 12000)] {
        let model =
            ModelDescriptor::BoseHubbard(BoseHubbardParams { t: 1.0, u, n: 4, d_trunc: 4, n_bos: Some(3) });
        let mut cfg = VqeConfig::new(model, EncodingKind::Symmetry, AnsatzKind::SzConserving, 10);
        cfg.initial_state = "fock:3,0,0,0".into();
        cfg.max_iterations = iterations;
        cfg.restarts = 1;
        // 𝒲 on the register is the excitation count Σ(1 − Z)/2, which agrees
        // with T𝒲T† on encoded states; T𝒲T† itself reads zero on in-site
        // illegitimate states, so its drift is only reported.
        cfg.track = vec!["qubit_excitations".into(), "N_tot".into()];
        let r = run_vqe(&cfg).unwrap();
        let trace = || r.per_restart.iter().flat_map(|x| &x.trace);
        let drift = trace().map(|p| (p.tracked[0] - 3.0).abs()).fold(0.0, f64::max);
        let encoded_drift = trace().map(|p| (p.tracked[1] - 3.0).abs()).fold(0.0, f64::max);
        ok &= check(
            &format!("8 Bose-Hubbard U = {u:+}"),
            r.mean_fidelity >= 0.95,
            format!("F = {:.4} after {} iterations", r.mean_fidelity, r.mean_iterations),
        );
        ok &= check(
            &format!("8 ⟨𝒲⟩ = 3 along the optimization, U = {u:+}"),
            drift < 1e-8,
            format!("max |⟨𝒲⟩ − 3| = {drift:.2e} (T𝒲T†: {encoded_drift:.2e})"),
        );
    }
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}

#[test]
fn criterion_09_vte() {
    let t = Instant::now();
    let mut ok = true;
    for theta in [PI / 4.0, 0.5f64.atan()] {
        let mut cfg = VteConfig::new(bbh(theta, 2), EncodingKind::Symmetry, AnsatzKind::TotalSpin, 8, 6.0);
        cfg.dt = 0.01;
        cfg.initial_state = "fock:0,2".into();
        cfg.initial_params = ParamInit::Mirrored { seed: 7, width: 0.5 };
        cfg.references = vec![vec![0, 2], vec![2, 0], vec![1, 1]];
        let traj = run_vte(&cfg).unwrap();
        let e02 = traj.max_population_error(0);
        let e20 = traj.max_population_error(1);
        ok &= check(
            &format!("9 VTE populations track the exact propagator, θ = {:.4}", theta),
            e02 <= 0.05 && e20 <= 0.05,
            format!("max |Δp| = {e02:.4} (0̃2̃), {e20:.4} (2̃0̃) over {} steps", traj.times.len() - 1),
        );
        if theta == PI / 4.0 {
            let p11 = traj.populations.iter().map(|p| p[2]).fold(0.0, f64::max);
            ok &= check("9 |1̃1̃⟩ population stays small at θ = π/4", p11 < 0.02, format!("max p = {p11:.2e}"));
        }
    }
    say(&format!("    ({:.2?})", t.elapsed()));
    assert!(ok);
}
