use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use quditvar::models::{default_string_window, Frame, QuditModel};
use quditvar::oracle::{ground_state_fidelity, qudit_ground_manifold, Spectrum};
use quditvar::vqe::{VqeConfig, VqeProblem, VqeResult};
use quditvar::vte::{run_vte, VteTrajectory};
use quditvar::{Encoder, SparseOperator, C64};

use crate::config::{ExperimentConfig, TraceLevel, SCHEMA_VERSION};
use crate::output::{num, write_atomic, write_csv, write_json};

/// What a subcommand reports back to `main`.
pub struct Outcome {
    pub converged: bool,
    pub summary: Vec<String>,
}

/// Every JSON record starts with the schema version, the command and the
/// configuration that produced it.
fn record<T: Serialize>(cfg: &ExperimentConfig, command: &str, body: T) -> Result<Value> {
    let mut v = json!({ "schema_version": SCHEMA_VERSION, "command": command, "config": cfg });
    let body = serde_json::to_value(body)?;
    let obj = v.as_object_mut().expect("record is an object");
    match body {
        Value::Object(map) => obj.extend(map),
        other => {
            obj.insert("result".into(), other);
        }
    }
    Ok(v)
}

#[derive(Serialize)]
struct OrderParameters {
    dimer: Option<f64>,
    string: Option<f64>,
    nematic: Option<f64>,
}

/// Dimer order at bond 2, string order over the default window and the
/// nematic structure factor at q = 2π/3, where the chain is long enough.
fn order_parameters(model: &QuditModel, state: &[C64], frame: Frame<'_>) -> Result<Option<OrderParameters>> {
    if model.spin.is_none() {
        return Ok(None);
    }
    let n = model.n_sites;
    let (i, r) = default_string_window(n);
    Ok(Some(OrderParameters {
        dimer: if n >= 3 { Some(model.dimer_order(state, frame, 2.min(n - 2).max(1))?) } else { None },
        string: if i + r <= n { Some(model.string_order(state, frame, i, r)?) } else { None },
        nematic: Some(model.nematic_structure_factor(state, frame, 2.0 * std::f64::consts::PI / 3.0)?),
    }))
}

pub fn encode(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sec = cfg.encode.as_ref().context("missing encode section")?;
    let model = sec.model.build()?;
    let encoder = Encoder::new(sec.encoding, model.d)?;
    let h = encoder.encode_hamiltonian(&model)?;
    let n_qubits = model.n_sites * encoder.qubits_per_site();
    std::fs::create_dir_all(&cfg.output_dir)?;
    write_atomic(&cfg.output_dir.join("hamiltonian.txt"), h.to_text().as_bytes())?;
    let header = json!({
        "kind": sec.encoding,
        "d": model.d,
        "M": encoder.qubits_per_site(),
        "N": model.n_sites,
        "n_qubits": n_qubits,
        "model": sec.model,
        "terms": h.len(),
        "max_weight": h.max_weight(),
        "complete": encoder.is_complete(),
    });
    write_json(&cfg.output_dir.join("encoding.json"), &record(cfg, "encode", json!({ "encoding": header }))?)?;
    Ok(Outcome {
        converged: true,
        summary: vec![format!("{} qubits, {} terms, max weight {}", n_qubits, h.len(), h.max_weight())],
    })
}

pub fn exact(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sec = cfg.exact.as_ref().context("missing exact section")?;
    if sec.encodings.is_empty() {
        bail!("exact needs at least one encoding");
    }
    let model = sec.model.build()?;
    let qudit = qudit_ground_manifold(&model)?;
    let mut summary = vec![format!("qudit ground energy {:.10} (degeneracy {})", qudit.energy, qudit.degeneracy())];
    let mut per_encoding = Vec::new();
    for &kind in &sec.encodings {
        let encoder = Encoder::new(kind, model.d)?;
        let point = ground_state_fidelity(&model, &encoder)?;
        summary.push(format!("{kind}: qubit ground energy {:.10}, fidelity {:.6}", point.qubit_energy, point.fidelity));
        per_encoding.push(json!({ "encoding": kind, "ground": point }));
    }

    let first = Encoder::new(sec.encodings[0], model.d)?;
    let mut rank = None;
    if sec.rank || sec.spectrum {
        let h = SparseOperator::from_pauli_sum(&first.encode_hamiltonian(&model)?);
        let spectrum = Spectrum::of(&h)?;
        if sec.rank {
            let target = qudit.encoded(&first, model.n_sites)?;
            let report = spectrum.eigenstate_rank(&target.states[0], 0.0)?;
            summary.push(format!(
                "encoded ground state: eigenstate {} (cluster {}..={})",
                report.rank, report.cluster_first, report.cluster_last
            ));
            rank = Some(report);
        }
        if sec.spectrum {
            write_json(&cfg.output_dir.join("spectrum.json"), &record(cfg, "exact", json!({ "spectrum": spectrum.to_json() }))?)?;
        }
    }

    if let Some(grid) = &sec.theta_grid {
        let thetas = grid.values()?;
        let mut header = vec!["theta".to_string()];
        let mut columns = Vec::new();
        for &kind in &sec.encodings {
            let encoder = Encoder::new(kind, model.d)?;
            let points = thetas
                .iter()
                .map(|&t| {
                    let mut d = sec.model.clone();
                    match &mut d {
                        quditvar::ModelDescriptor::Bbh(p) => p.theta = t,
                        _ => bail!("a θ grid needs a bbh model"),
                    }
                    Ok(ground_state_fidelity(&d.build()?, &encoder)?)
                })
                .collect::<Result<Vec<_>>>()?;
            for col in ["qudit_energy", "qubit_energy", "qubit_degeneracy", "fidelity"] {
                header.push(format!("{kind}_{col}"));
            }
            columns.push(points);
        }
        let rows = thetas.iter().enumerate().map(|(k, &t)| {
            let mut row = vec![num(t)];
            for pts in &columns {
                let p = &pts[k];
                row.extend([num(p.qudit_energy), num(p.qubit_energy), p.qubit_degeneracy.to_string(), num(p.fidelity)]);
            }
            row
        });
        write_csv(&cfg.output_dir.join("fidelity_map.csv"), &header, rows)?;
    }

    let order = order_parameters(&model, &qudit.states[0], Frame::Qudit)?;
    let body = json!({
        "qudit_ground": { "energy": qudit.energy, "degeneracy": qudit.degeneracy() },
        "encodings": per_encoding,
        "rank": rank,
        "order_parameters": order,
    });
    write_json(&cfg.output_dir.join("exact.json"), &record(cfg, "exact", body)?)?;
    Ok(Outcome { converged: true, summary })
}

fn vqe_trace_rows(result: &VqeResult, restart: usize) -> Vec<Vec<String>> {
    result.per_restart[restart]
        .trace
        .iter()
        .map(|p| {
            let mut row = vec![p.iteration.to_string(), num(p.cost), num(p.energy), num(p.fidelity), num(p.grad_norm)];
            row.extend(p.tracked.iter().map(|&v| num(v)));
            row
        })
        .collect()
}

/// Runs one VQE configuration and writes `vqe.json` (plus traces) into `dir`.
fn vqe_into(cfg: &ExperimentConfig, vqe: &VqeConfig, dir: &std::path::Path) -> Result<VqeResult> {
    let problem = VqeProblem::new(vqe)?;
    let mut result = problem.run()?;

    let mut order = None;
    if problem.model.spin.is_some() {
        let frame = Frame::Encoded(&problem.encoder);
        let values = result
            .per_restart
            .iter()
            .map(|r| {
                let state = problem.circuit.run(&r.final_params, &problem.initial_state)?;
                order_parameters(&problem.model, &state, frame)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let qudit = qudit_ground_manifold(&problem.model)?;
        order = Some(json!({
            "per_restart": values,
            "exact": order_parameters(&problem.model, &qudit.states[0], Frame::Qudit)?,
        }));
    }

    std::fs::create_dir_all(dir)?;
    if cfg.trace != TraceLevel::None {
        let mut header: Vec<String> =
            ["iteration", "cost", "energy", "fidelity", "grad_norm"].iter().map(|s| s.to_string()).collect();
        header.extend(result.tracked.iter().cloned());
        for k in 0..result.per_restart.len() {
            write_csv(&dir.join(format!("trace_restart_{k:03}.csv")), &header, vqe_trace_rows(&result, k))?;
        }
    }
    let full = result.clone();
    if cfg.trace != TraceLevel::Full {
        result.per_restart.iter_mut().for_each(|r| r.trace.clear());
    }
    write_json(&dir.join("vqe.json"), &record(cfg, "vqe", json!({ "result": result, "order_parameters": order }))?)?;
    Ok(full)
}

fn vqe_summary(r: &VqeResult) -> String {
    format!(
        "fidelity {:.4} ± {:.4}, energy {:.6} (exact {:.6}), {:.1} iterations, C_R {:.0}, converged: {}",
        r.mean_fidelity, r.std_fidelity, r.mean_energy, r.reference_energy, r.mean_iterations, r.c_r_mean, r.converged
    )
}

pub fn vqe(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sec = cfg.vqe.as_ref().context("missing vqe section")?;
    let result = vqe_into(cfg, sec, &cfg.output_dir)?;
    Ok(Outcome {
        converged: result.converged,
        summary: vec![
            format!("{} qubits, {} parameters, {} CNOTs", result.n_qubits, result.n_params, result.cnot_count),
            vqe_summary(&result),
        ],
    })
}

fn vte_rows(t: &VteTrajectory) -> Vec<Vec<String>> {
    (0..t.times.len())
        .map(|k| {
            let mut row = vec![num(t.times[k]), num(t.energy[k]), num(t.fidelity[k])];
            row.extend(t.populations[k].iter().map(|&v| num(v)));
            row.extend(t.exact_populations[k].iter().map(|&v| num(v)));
            row.extend(t.observables[k].iter().map(|&v| num(v)));
            row.push(t.min_eigenvalue_a.get(k).map_or(String::new(), |&v| num(v)));
            row.push(t.lambda_used.get(k).map_or(String::new(), |&v| num(v)));
            row
        })
        .collect()
}

pub fn vte(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sec = cfg.vte.as_ref().context("missing vte section")?;
    let mut traj = run_vte(sec)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    if cfg.trace != TraceLevel::None {
        let mut header: Vec<String> = ["time", "energy", "fidelity"].iter().map(|s| s.to_string()).collect();
        header.extend(traj.reference_labels.iter().map(|l| format!("pop_{}", l.replace(',', "_"))));
        header.extend(traj.reference_labels.iter().map(|l| format!("exact_pop_{}", l.replace(',', "_"))));
        header.extend(traj.tracked.iter().cloned());
        header.extend(["min_eig_A".to_string(), "lambda".to_string()]);
        write_csv(&cfg.output_dir.join("vte_trace.csv"), &header, vte_rows(&traj))?;
    }
    let min_fidelity = traj.min_fidelity();
    let errors: Vec<f64> = (0..traj.reference_labels.len()).map(|r| traj.max_population_error(r)).collect();
    let converged = traj.converged;
    let mut summary = vec![format!(
        "{} steps, {} parameters, minimum fidelity {:.6}, converged: {}",
        traj.times.len() - 1,
        traj.n_params,
        min_fidelity,
        converged
    )];
    for (l, e) in traj.reference_labels.iter().zip(&errors) {
        summary.push(format!("population |{l}⟩: max deviation {e:.4}"));
    }
    if cfg.trace != TraceLevel::Full {
        traj.params = vec![traj.params[0].clone(), traj.params.last().cloned().unwrap_or_default()];
    }
    let body = json!({ "result": traj, "min_fidelity": min_fidelity, "max_population_error": errors });
    write_json(&cfg.output_dir.join("vte.json"), &record(cfg, "vte", body)?)?;
    Ok(Outcome { converged, summary })
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sec = cfg.sweep.as_ref().context("missing sweep section")?;
    if sec.values.is_empty() {
        bail!("sweep axis has no values");
    }
    let header: Vec<String> = [
        "point",
        "value",
        "mean_fidelity",
        "std_fidelity",
        "mean_energy",
        "reference_energy",
        "mean_iterations",
        "C_R_mean",
        "n_params",
        "cnot_count",
        "converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut all = true;
    for (k, &value) in sec.values.iter().enumerate() {
        let point = sec.point(value)?;
        let r = vqe_into(cfg, &point, &cfg.output_dir.join(format!("point_{k:03}")))?;
        all &= r.converged;
        summary.push(format!("{:?} = {value}: {}", sec.axis, vqe_summary(&r)));
        rows.push(vec![
            k.to_string(),
            num(value),
            num(r.mean_fidelity),
            num(r.std_fidelity),
            num(r.mean_energy),
            num(r.reference_energy),
            num(r.mean_iterations),
            num(r.c_r_mean),
            r.n_params.to_string(),
            r.cnot_count.to_string(),
            r.converged.to_string(),
        ]);
    }
    write_csv(&cfg.output_dir.join("summary.csv"), &header, rows)?;
    Ok(Outcome { converged: all, summary })
}
