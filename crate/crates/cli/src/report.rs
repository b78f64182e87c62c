//! Machine-parseable text renderings of solver outputs: `key: value`
//! lines for forward reports, CSV for identification histories and
//! regularization sweeps. Floats carry 17 significant digits. Wall
//! time is deliberately absent so identical runs produce identical
//! bytes.

use std::fmt::Write as _;

use qvi_core::{IdentHistory, SolveReport, SweepRow};

pub fn render_solve_report(r: &SolveReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "converged: {}", r.converged);
    let _ = writeln!(s, "outer_iterations: {}", r.outer_iterations);
    let _ = writeln!(s, "fp_residual: {:.16e}", r.fp_residual());
    let hist: Vec<String> =
        r.fp_residual_history.iter().map(|v| format!("{v:.16e}")).collect();
    let _ = writeln!(s, "fp_residual_history: {}", hist.join(","));
    let _ = writeln!(s, "self_feasibility_violation: {:.16e}", r.self_feasibility_violation);
    let _ = writeln!(s, "selection_rule: {}", r.selection_rule());
    let _ = writeln!(s, "inner_iterations: {}", r.final_inner.iterations);
    let _ = writeln!(s, "inner_primal_residual: {:.16e}", r.final_inner.primal_residual);
    let _ = writeln!(s, "inner_stationarity_residual: {:.16e}", r.final_inner.stationarity_residual);
    let _ = writeln!(s, "inner_feasibility_violation: {:.16e}", r.final_inner.feasibility_violation);
    let _ = writeln!(s, "inner_converged: {}", r.final_inner.converged);
    if let Some(m) = &r.minty {
        let _ = writeln!(s, "minty_samples: {}", m.samples);
        let _ = writeln!(s, "minty_min_slack: {:.16e}", m.min_slack);
        let _ = writeln!(s, "minty_min_scaled_slack: {:.16e}", m.min_scaled_slack);
        let _ = writeln!(s, "minty_worst_v_index: {}", m.worst_v_index);
        let _ = writeln!(s, "minty_self_feasible: {}", m.self_feasible);
    }
    s
}

pub fn render_history_csv(h: &IdentHistory) -> String {
    let mut s = String::from("eval,J,misfit,tv,converged\n");
    for r in &h.records {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{}",
            r.eval, r.j, r.misfit, r.tv, r.qvi_converged
        );
    }
    s
}

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("kappa,J,misfit,tv,a_digest,status\n");
    for r in rows {
        let status = match &r.error {
            None => "ok".to_string(),
            // keep the CSV single-celled: no commas inside the status
            Some(e) => e.replace(',', ";"),
        };
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.kappa, r.j, r.misfit, r.tv, r.a_digest, status
        );
    }
    s
}
