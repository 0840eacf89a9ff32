//! CSV and JSON export. CSVs carry a header row and use LF line endings.

use std::io::Write;

use serde::Serialize;

use crate::discovery::DiscoveryTrace;
use crate::dynprog::{GridMdp, GridValue};
use crate::envs::Transition;
use crate::error::Result;
use crate::flows::OrderEstimate;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Columns `step, s0.., a0.., reward, flags`.
pub fn write_trajectory_csv<W: Write>(w: W, traj: &[Transition]) -> Result<()> {
    let mut out = writer(w);
    let (d, m) = traj.first().map_or((0, 0), |t| (t.s.len(), t.a.len()));
    let mut header = vec!["step".to_string()];
    header.extend((0..d).map(|i| format!("s{i}")));
    header.extend((0..m).map(|i| format!("a{i}")));
    header.push("reward".into());
    header.push("flags".into());
    out.write_record(&header)?;
    for (k, t) in traj.iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(t.s.iter().map(|x| x.to_string()));
        rec.extend(t.a.iter().map(|x| x.to_string()));
        rec.push(t.reward.to_string());
        rec.push(t.flags.label());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `step, loss, grad_norm, field_norm, residual_loss`.
pub fn write_trace_csv<W: Write>(w: W, trace: &DiscoveryTrace) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["step", "loss", "grad_norm", "field_norm", "residual_loss"])?;
    for r in &trace.rows {
        out.write_record([
            r.step.to_string(),
            r.loss.to_string(),
            r.grad_norm.to_string(),
            r.field_norm.to_string(),
            r.residual_loss.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `h, error, used`.
pub fn write_order_csv<W: Write>(w: W, est: &OrderEstimate) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["h", "error", "used"])?;
    for p in &est.points {
        out.write_record([p.h.to_string(), p.error.to_string(), p.used.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `x0.., value`, one row per lattice point.
pub fn write_value_csv<W: Write>(w: W, values: &GridValue) -> Result<()> {
    let mut out = writer(w);
    let d = values.lattice.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    out.write_record(&header)?;
    for (idx, v) in values.values.iter().enumerate() {
        let mut rec: Vec<String> = values.lattice.point(idx).iter().map(|x| x.to_string()).collect();
        rec.push(v.to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Rows `s, a, next, prob` with one line per nonzero kernel entry.
pub fn write_kernel_csv<W: Write>(w: W, mdp: &GridMdp) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["s", "a", "next", "prob"])?;
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let (c, p) = mdp.row(s, a);
            for (j, v) in c.iter().zip(p) {
                out.write_record([s.to_string(), a.to_string(), j.to_string(), v.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Rows `s, a, reward`.
pub fn write_reward_csv<W: Write>(w: W, mdp: &GridMdp) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["s", "a", "reward"])?;
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            out.write_record([s.to_string(), a.to_string(), mdp.reward(s, a).to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct MdpHeader<'a> {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub lattice: Option<&'a crate::dynprog::Lattice>,
    pub actions: Vec<Vec<f64>>,
    pub flagged_rows: &'a [usize],
    pub nnz: usize,
    pub r_max: f64,
}

pub fn mdp_header(mdp: &GridMdp) -> MdpHeader<'_> {
    MdpHeader {
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        gamma: mdp.gamma,
        lattice: mdp.lattice.as_ref(),
        actions: mdp.actions.iter().map(|a| a.iter().copied().collect()).collect(),
        flagged_rows: &mdp.flagged_rows,
        nnz: mdp.nnz(),
        r_max: mdp.r_max(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}
