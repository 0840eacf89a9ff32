//! Experiment runners. Each writes its artifacts through [`Output`].

use anyhow::{bail, Context};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use vpsd_core::discovery::{
    alignment, measure_mismatch, quadratic_monomials, semigroup_check, sgd_discover, MismatchReport, NonInvariance,
    ReplaySampler, ResidualBatch, SemigroupEstimate, TestFunction,
};
use vpsd_core::dynprog::{
    compass_actions, discretize, fixed_point_gap, greedy_policy, invariant_factorization, noninvariance_stats,
    refinement_error, value_iteration, AugmentationMap, FactorizationReport, FixedPointGap, GridMdp, GridValue,
    NonInvariancePoint,
};
use vpsd_core::envs::{Simulator, SymNav};
use vpsd_core::flows::{estimate_order, estimate_order_against, integrate_flow, LinearTransform, Transform};
use vpsd_core::generator::GeneratorRecord;
use vpsd_core::io::{mdp_header, write_order_csv, write_trace_csv, write_trajectory_csv, write_value_csv};
use vpsd_core::rng::{seeded, uniform};
use vpsd_core::{ActionVec, EnvModel, Error, GeneratorPair, StateVec};

use crate::config::{EnvSpec, ExperimentConfig, Kind, OrderReference, PolicySpec, TransformSource, TransformSpec};
use crate::output::Output;

pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    match cfg.kind {
        Kind::Discover => discover_kind(cfg, out),
        Kind::FlowOrder => flow_order(cfg, out),
        Kind::Mismatch => mismatch(cfg, out),
        Kind::Semigroup => semigroup(cfg, out),
        Kind::Vi => vi(cfg, out),
        Kind::AugmentVi => augment_vi(cfg, out),
        Kind::SymnavRollout => symnav_rollout(cfg, out),
        Kind::Invariants => invariants(cfg, out),
        Kind::Pipeline => pipeline(cfg, out),
    }
}

fn env(cfg: &ExperimentConfig) -> anyhow::Result<&EnvSpec> {
    cfg.env().map_err(anyhow::Error::msg)
}

fn build_transform(spec: &TransformSpec, d: usize, m: usize, env: Option<&EnvSpec>) -> anyhow::Result<Box<dyn Transform>> {
    Ok(match spec {
        TransformSpec::Identity => Box::new(LinearTransform::identity(d, m)),
        TransformSpec::Rotation { angle } => Box::new(LinearTransform::rotation(d, m, *angle)?),
        TransformSpec::ReflectionX => Box::new(LinearTransform::reflection_x(d, m)),
        TransformSpec::Flow { generator, alpha, h } => {
            let gen = match generator {
                Some(r) => GeneratorPair::try_from(r)?,
                None => GeneratorPair::rotation(d, m)?,
            };
            if gen.dim_s() != d || gen.dim_a() != m {
                bail!("transform.generator: dimensions ({}, {}) do not match the model ({d}, {m})", gen.dim_s(), gen.dim_a());
            }
            Box::new(integrate_flow(&gen, *alpha, *h, env.and_then(EnvSpec::state_retraction))?)
        }
    })
}

fn box_probes(seed: u64, d: usize, half_s: f64, m: usize, half_a: f64, n: usize) -> Vec<(StateVec, ActionVec)> {
    ReplaySampler::symmetric_box(d, half_s, m, half_a).sample(&mut seeded(seed), n)
}

fn disk_probes(seed: u64, n: usize, radius: f64) -> Vec<StateVec> {
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = DVector::from_vec(vec![uniform(&mut rng, -radius, radius), uniform(&mut rng, -radius, radius)]);
        if p.norm() <= radius {
            out.push(p);
        }
    }
    out
}

#[derive(Serialize)]
struct RestartReport {
    restart: usize,
    final_loss: f64,
    /// Mean squared `R_b`, `R_Q`, `R_r` on the report probes.
    residual_drift: f64,
    residual_diffusion: f64,
    residual_reward: f64,
    alignment: Option<f64>,
}

#[derive(Serialize)]
struct DiscoverReport {
    env: String,
    steps: usize,
    step_size: f64,
    chosen: usize,
    restarts: Vec<RestartReport>,
    generator: GeneratorRecord,
}

/// SGD from `restarts` random initializations; keeps the run with the lowest
/// residual loss on a fixed probe set.
fn discover(cfg: &ExperimentConfig, env: &EnvSpec, out: &mut Output, prefix: &str) -> anyhow::Result<(GeneratorPair, Option<f64>)> {
    let model = env.dynamics()?;
    let (d, m) = (model.dim_s(), model.dim_a());
    let loss = cfg.loss.loss_config(d, m);
    let probe_seed = out.stage_seed(cfg.seed, &format!("{prefix}discover/probes"));
    let probes = box_probes(probe_seed, d, cfg.loss.state_half_width, m, cfg.loss.action_half_width, cfg.loss.alignment_probes);
    let (states, actions): (Vec<_>, Vec<_>) = probes.iter().cloned().unzip();
    let reference = env.reference_generator();

    let mut reports = Vec::new();
    let mut best: Option<(f64, usize, GeneratorPair)> = None;
    for i in 0..cfg.loss.restarts {
        let init_seed = out.stage_seed(cfg.seed, &format!("{prefix}discover/init-{i}"));
        let sgd_seed = out.stage_seed(cfg.seed, &format!("{prefix}discover/sgd-{i}"));
        let init = GeneratorPair::random(d, m, cfg.loss.init_scale, &mut seeded(init_seed));
        let trace_name = format!("{prefix}trace_{i}.csv");
        let run = match sgd_discover(model.as_ref(), &init, &loss, &mut seeded(sgd_seed)) {
            Ok(run) => run,
            Err(Error::Diverged { step, loss, trace }) => {
                out.file(&trace_name, |w| Ok(write_trace_csv(w, &trace)?))?;
                bail!("structure discovery diverged at step {step} (loss {loss:e}); trace written to {trace_name}");
            }
            Err(e) => return Err(e.into()),
        };
        out.file(&trace_name, |w| Ok(write_trace_csv(w, &run.trace)?))?;
        let (b, q, r) = ResidualBatch::evaluate(model.as_ref(), &run.generator, &probes).mean_squares();
        let align = reference.as_ref().and_then(|g| alignment(&run.generator, g, &states, &actions).ok());
        reports.push(RestartReport {
            restart: i,
            final_loss: run.trace.rows.last().map_or(f64::NAN, |r| r.loss),
            residual_drift: b,
            residual_diffusion: q,
            residual_reward: r,
            alignment: align,
        });
        let total = b + q + r;
        if best.as_ref().is_none_or(|(t, _, _)| total < *t) {
            best = Some((total, i, run.generator));
        }
    }
    let (_, chosen, gen) = best.context("no discovery run")?;
    let align = reports[chosen].alignment;
    out.json(&format!("{prefix}generator.json"), &gen.to_record())?;
    out.json(
        &format!("{prefix}discover_report.json"),
        &DiscoverReport {
            env: model.name().to_string(),
            steps: loss.steps,
            step_size: loss.step_size,
            chosen,
            restarts: reports,
            generator: gen.to_record(),
        },
    )?;
    Ok((gen, align))
}

fn discover_kind(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    discover(cfg, env(cfg)?, out, "").map(|_| ())
}

/// Exact time-`alpha` flow of an affine field from the exponential of
/// `[[A, c], [0, 0]]`.
fn affine_exponential(gen: &GeneratorPair, s: &StateVec, alpha: f64) -> StateVec {
    let d = s.len();
    let mut aug = DMatrix::zeros(d + 1, d + 1);
    aug.view_mut((0, 0), (d, d)).copy_from(&gen.a_x);
    aug.view_mut((0, d), (d, 1)).copy_from(&gen.c_x);
    let mut x = DVector::zeros(d + 1);
    x.rows_mut(0, d).copy_from(s);
    x[d] = 1.0;
    ((aug * alpha).exp() * x).rows(0, d).into_owned()
}

fn flow_order(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    let gen = cfg.flow.generator()?;
    let s0 = match &cfg.flow.s0 {
        Some(s) => DVector::from_column_slice(s),
        None => DVector::from_fn(gen.dim_s(), |i, _| [1.0, 0.5, -0.3, 0.2][i % 4]),
    };
    let est = match cfg.flow.reference {
        OrderReference::Exact => {
            let reference = affine_exponential(&gen, &s0, cfg.flow.alpha);
            estimate_order_against(&gen, cfg.flow.alpha, &s0, &cfg.flow.h_list, &reference)?
        }
        OrderReference::SelfReferenced => estimate_order(&gen, cfg.flow.alpha, &s0, &cfg.flow.h_list)?,
    };
    out.file("order.csv", |w| Ok(write_order_csv(w, &est)?))?;
    out.json("order.json", &est)
}

fn mismatch(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    let env = env(cfg)?;
    let model = env.dynamics()?;
    let (d, m) = (model.dim_s(), model.dim_a());
    let t = build_transform(cfg.transform.as_ref().context("transform missing")?, d, m, Some(env))?;
    let seed = out.stage_seed(cfg.seed, "mismatch/probes");
    let p = &cfg.probes;
    let probes = box_probes(seed, d, p.state_half_width, m, p.action_half_width, p.count);
    let report = mismatch_report(model.as_ref(), t.as_ref(), &probes)?;
    out.json("mismatch.json", &report)
}

fn mismatch_report(model: &dyn EnvModel, t: &dyn Transform, probes: &[(StateVec, ActionVec)]) -> anyhow::Result<MismatchReport> {
    let monomials = quadratic_monomials(model.dim_s());
    let tfs: Vec<&dyn TestFunction> = monomials.iter().map(|m| m as &dyn TestFunction).collect();
    Ok(measure_mismatch(model, t, &tfs, probes)?)
}

#[derive(Serialize)]
struct SemigroupReport {
    env: String,
    t: f64,
    estimate: SemigroupEstimate,
    z_score: f64,
}

fn semigroup(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    let env = env(cfg)?;
    let dynamics = env.dynamics()?;
    let (d, m) = (dynamics.dim_s(), dynamics.dim_a());
    let t = build_transform(cfg.transform.as_ref().context("transform missing")?, d, m, Some(env))?;
    let sg = &cfg.semigroup;
    let f = |s: &StateVec| sg.eval(s.as_slice());
    let seed = out.stage_seed(cfg.seed, "semigroup/paths");
    let est = semigroup_check(
        dynamics.as_ref(),
        t.as_ref(),
        &f,
        &DVector::from_column_slice(&sg.s0),
        &DVector::from_column_slice(&sg.a0),
        sg.t,
        sg.paths,
        &mut seeded(seed),
    )?;
    out.json(
        "semigroup.json",
        &SemigroupReport {
            env: dynamics.name().to_string(),
            t: sg.t,
            z_score: est.z_score(),
            estimate: est,
        },
    )
}

fn grid_mdp(cfg: &ExperimentConfig, env: &EnvSpec, n: usize) -> anyhow::Result<GridMdp> {
    let model = env.dynamics()?;
    let g = &cfg.grid;
    Ok(discretize(model.as_ref(), &g.lattice(n)?, &compass_actions(g.actions), g.dt, g.gamma)?)
}

fn solve(cfg: &ExperimentConfig, mdp: &GridMdp) -> anyhow::Result<GridValue> {
    let vi = value_iteration(mdp, &vec![0.0; mdp.n_states], cfg.grid.max_iter, cfg.grid.tol);
    if !vi.converged {
        bail!("value iteration did not reach tol {} in {} sweeps", cfg.grid.tol, cfg.grid.max_iter);
    }
    Ok(GridValue::new(mdp.lattice.clone().context("grid MDP without lattice")?, vi.values)?)
}

#[derive(Serialize)]
struct ViReport {
    iterations: usize,
    converged: bool,
    final_error_bound: f64,
    envelope_violations: usize,
    last_delta: Option<f64>,
    max_row_sum_error: f64,
}

#[derive(Serialize)]
struct PolicyRow {
    state: usize,
    x: f64,
    y: f64,
    action: usize,
    a0: f64,
    a1: f64,
}

fn vi(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    let mdp = grid_mdp(cfg, env(cfg)?, cfg.grid.n)?;
    out.json("mdp.json", &mdp_header(&mdp))?;
    let vi = value_iteration(&mdp, &vec![0.0; mdp.n_states], cfg.grid.max_iter, cfg.grid.tol);
    let lattice = mdp.lattice.clone().context("grid MDP without lattice")?;
    let policy = greedy_policy(&mdp, &vi.values);
    let rows: Vec<PolicyRow> = policy
        .iter()
        .enumerate()
        .map(|(s, &a)| {
            let p = lattice.point(s);
            PolicyRow {
                state: s,
                x: p[0],
                y: p[1],
                action: a,
                a0: mdp.actions[a][0],
                a1: mdp.actions[a][1],
            }
        })
        .collect();
    out.csv_rows("policy.csv", &rows)?;
    let values = GridValue::new(lattice, vi.values.clone())?;
    out.file("values.csv", |w| Ok(write_value_csv(w, &values)?))?;
    out.json(
        "vi.json",
        &ViReport {
            iterations: vi.iterations,
            converged: vi.converged,
            final_error_bound: vi.final_error_bound,
            envelope_violations: vi.envelope_violations(1e-9).len(),
            last_delta: vi.deltas.last().copied(),
            max_row_sum_error: mdp.max_row_sum_error(),
        },
    )?;
    if !vi.converged {
        bail!("value iteration did not reach tol {} in {} sweeps", cfg.grid.tol, cfg.grid.max_iter);
    }
    Ok(())
}

#[derive(Serialize)]
struct AugmentReport {
    is_permutation: bool,
    fixed_point: FixedPointGap,
    iterations_plain: usize,
    iterations_augmented: usize,
}

fn augment_vi(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    let env = env(cfg)?;
    let mdp = grid_mdp(cfg, env, cfg.grid.n)?;
    let t = build_transform(cfg.transform.as_ref().context("transform missing")?, 2, 2, Some(env))?;
    let aug = if cfg.grid.snap_actions {
        AugmentationMap::from_transform_snapped(&mdp, t.as_ref())?
    } else {
        AugmentationMap::from_transform(&mdp, t.as_ref())?
    };
    let (fp, plain, augmented) = fixed_point_gap(&mdp, &aug)?;
    let lattice = mdp.lattice.clone().context("grid MDP without lattice")?;
    let values = GridValue::new(lattice.clone(), plain.values.clone())?;
    out.file("values.csv", |w| Ok(write_value_csv(w, &values)?))?;
    let aug_values = GridValue::new(lattice, augmented.values.clone())?;
    out.file("augmented_values.csv", |w| Ok(write_value_csv(w, &aug_values)?))?;
    out.json(
        "augment.json",
        &AugmentReport {
            is_permutation: aug.is_permutation(),
            fixed_point: fp,
            iterations_plain: plain.iterations,
            iterations_augmented: augmented.iterations,
        },
    )
}

#[derive(Serialize)]
struct RolloutReport {
    variant: i64,
    steps: usize,
    total_reward: f64,
    success: bool,
    collisions: usize,
    projections: usize,
    final_goal_distance: f64,
}

fn symnav_rollout(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    let EnvSpec::Symnav { variant, sim } = env(cfg)? else {
        bail!("symnav-rollout needs env.id = symnav");
    };
    let env = SymNav::from_variant(*sim, *variant)?;
    let goal = env.map.goal;
    let steps = cfg.rollout.steps.unwrap_or(sim.horizon);
    let seed = out.stage_seed(cfg.seed, "rollout/noise");
    let mut simulator = Simulator::with_seed(env, seed);
    let policy = cfg.rollout.policy;
    let traj = simulator.rollout(&DVector::from_column_slice(&cfg.rollout.s0), steps, |s, _| match policy {
        PolicySpec::Zero => DVector::zeros(2),
        PolicySpec::GoalSeek { gain, damping } => DVector::from_fn(2, |i, _| (gain * (goal[i] - s[i]) - damping * s[2 + i]).clamp(-1.0, 1.0)),
    })?;
    out.file("trajectory.csv", |w| Ok(write_trajectory_csv(w, &traj)?))?;
    let last = traj.last().map(|t| [t.s_next[0], t.s_next[1]]).unwrap_or([cfg.rollout.s0[0], cfg.rollout.s0[1]]);
    out.json(
        "rollout.json",
        &RolloutReport {
            variant: *variant,
            steps: traj.len(),
            total_reward: traj.iter().map(|t| t.reward).sum(),
            success: traj.iter().any(|t| t.flags.success),
            collisions: traj.iter().filter(|t| t.flags.collided).count(),
            projections: traj.iter().filter(|t| t.flags.projected).count(),
            final_goal_distance: simulator.env().map.goal_distance(last),
        },
    )
}

#[derive(Serialize)]
struct InvariantReport {
    n: usize,
    n_fine: usize,
    interpolation_budget: f64,
    limit: f64,
    max_mean_noninvariance: f64,
    within_budget: bool,
    factorization: FactorizationReport,
    factorization_within_budget: bool,
}

fn invariants(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    let env = env(cfg)?;
    let n = cfg.grid.n;
    let n_fine = cfg.invariants.n_fine(n);
    let coarse = solve(cfg, &grid_mdp(cfg, env, n)?)?;
    let fine = solve(cfg, &grid_mdp(cfg, env, n_fine)?)?;
    let seed = out.stage_seed(cfg.seed, "invariants/probes");
    let probes = disk_probes(seed, cfg.probes.count, cfg.probes.disk_radius);
    let budget = refinement_error(&coarse, &fine, &probes);
    let mut curve = Vec::new();
    for &alpha in &cfg.invariants.alphas {
        let mut p = noninvariance_stats(&coarse, &LinearTransform::rotation(2, 2, alpha)?, &probes)?;
        p.alpha = alpha;
        curve.push(p);
    }
    out.csv_rows("noninvariance.csv", &curve)?;
    out.file("values.csv", |w| Ok(write_value_csv(w, &coarse)?))?;
    let worst = curve.iter().map(|p| p.mean).fold(0.0, f64::max);
    let limit = cfg.invariants.budget_factor * budget;
    let factorization = invariant_factorization(&coarse, cfg.probes.disk_radius, cfg.invariants.bins);
    out.json(
        "invariants.json",
        &InvariantReport {
            n,
            n_fine,
            interpolation_budget: budget,
            limit,
            max_mean_noninvariance: worst,
            within_budget: worst <= limit,
            factorization_within_budget: factorization.mean_abs_residual <= limit,
            factorization,
        },
    )
}

#[derive(Serialize)]
struct GridStage {
    n: usize,
    n_fine: usize,
    noninvariance: NonInvariancePoint,
    interpolation_budget: f64,
    limit: f64,
    within_budget: bool,
}

#[derive(Serialize)]
struct PipelineRun {
    source: TransformSource,
    alpha: f64,
    delta: Option<f64>,
    generator: Option<GeneratorRecord>,
    alignment: Option<f64>,
    flow_retraction_fired: bool,
    mismatch: MismatchReport,
    grid: GridStage,
    is_permutation: bool,
    fixed_point: FixedPointGap,
}

#[derive(Serialize)]
struct SweepRow {
    delta: f64,
    eps_l: f64,
    eps_r: f64,
    noninvariance_mean: f64,
    noninvariance_sup: f64,
    fixed_point_gap: f64,
    fixed_point_bound: f64,
}

#[derive(Serialize)]
struct PipelineSummary {
    runs: Vec<PipelineRun>,
    monotone_eps_l: Option<bool>,
    monotone_noninvariance: Option<bool>,
    all_fixed_point_bounds_hold: bool,
}

/// The leading planar block of a generator, acting on the grid state.
fn planar_block(gen: &GeneratorPair) -> anyhow::Result<GeneratorPair> {
    Ok(GeneratorPair::new(
        gen.a_x.view((0, 0), (2, 2)).into_owned(),
        gen.c_x.rows(0, 2).into_owned(),
        gen.a_y.clone(),
        gen.c_y.clone(),
    )?)
}

/// discover → integrate_flow → measure_mismatch → value non-invariance →
/// fixed-point gap, for one environment.
fn pipeline_run(cfg: &ExperimentConfig, env: &EnvSpec, grid_env: &EnvSpec, out: &mut Output, prefix: &str) -> anyhow::Result<PipelineRun> {
    let model = env.dynamics()?;
    let (d, m) = (model.dim_s(), model.dim_a());
    let alpha = cfg.flow.alpha;
    let (gen, align) = match cfg.pipeline.source {
        TransformSource::Discovered => {
            let (g, a) = discover(cfg, env, out, prefix)?;
            (Some(g), a)
        }
        TransformSource::Rotation => (Some(GeneratorPair::rotation(d, m)?), None),
        TransformSource::ReflectionX => (None, None),
    };

    let (transform, grid_transform): (Box<dyn Transform>, Box<dyn Transform>) = match &gen {
        Some(g) => (
            Box::new(integrate_flow(g, alpha, cfg.flow.h, env.state_retraction())?),
            Box::new(integrate_flow(&planar_block(g)?, alpha, cfg.flow.h, None)?),
        ),
        None => (Box::new(LinearTransform::reflection_x(d, m)), Box::new(LinearTransform::reflection_x(2, 2))),
    };

    let probe_seed = out.stage_seed(cfg.seed, &format!("{prefix}mismatch/probes"));
    let p = &cfg.probes;
    let probes = box_probes(probe_seed, d, p.state_half_width, m, p.action_half_width, p.count);
    let fired = probes.iter().try_fold(false, |acc, (s, _)| Ok::<_, Error>(acc || transform.map_state_flagged(s)?.1))?;
    let mut report = mismatch_report(model.as_ref(), transform.as_ref(), &probes)?;

    let n = cfg.grid.n;
    let n_fine = cfg.invariants.n_fine(n);
    let mdp = grid_mdp(cfg, grid_env, n)?;
    let coarse = solve(cfg, &mdp)?;
    let fine = solve(cfg, &grid_mdp(cfg, grid_env, n_fine)?)?;
    let disk_seed = out.stage_seed(cfg.seed, &format!("{prefix}grid/probes"));
    let disk = disk_probes(disk_seed, p.count, p.disk_radius);
    let mut stats = noninvariance_stats(&coarse, grid_transform.as_ref(), &disk)?;
    stats.alpha = alpha;
    let budget = refinement_error(&coarse, &fine, &disk);
    let limit = cfg.invariants.budget_factor * budget;
    report.value_noninvariance = Some(NonInvariance {
        mean: stats.mean,
        sup: stats.sup,
        evaluated: stats.evaluated,
        dropped: stats.dropped,
    });
    out.file(&format!("{prefix}values.csv"), |w| Ok(write_value_csv(w, &coarse)?))?;

    let aug = AugmentationMap::from_transform_snapped(&mdp, grid_transform.as_ref())?;
    let (fp, _, _) = fixed_point_gap(&mdp, &aug)?;

    let run = PipelineRun {
        source: cfg.pipeline.source,
        alpha,
        delta: env.delta(),
        generator: gen.as_ref().map(GeneratorPair::to_record),
        alignment: align,
        flow_retraction_fired: fired,
        mismatch: report,
        grid: GridStage {
            n,
            n_fine,
            noninvariance: stats,
            interpolation_budget: budget,
            limit,
            within_budget: stats.mean <= limit,
        },
        is_permutation: aug.is_permutation(),
        fixed_point: fp,
    };
    out.json(&format!("{prefix}stage_report.json"), &run)?;
    Ok(run)
}

fn increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

fn pipeline(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<()> {
    let env = env(cfg)?;
    let grid_env = cfg.grid_env().map_err(anyhow::Error::msg)?;
    let summary = match &cfg.pipeline.deltas {
        None => {
            let run = pipeline_run(cfg, env, &grid_env, out, "")?;
            PipelineSummary {
                all_fixed_point_bounds_hold: run.fixed_point.holds,
                runs: vec![run],
                monotone_eps_l: None,
                monotone_noninvariance: None,
            }
        }
        Some(deltas) => {
            let mut runs = Vec::new();
            for (k, &delta) in deltas.iter().enumerate() {
                runs.push(pipeline_run(cfg, &env.with_delta(delta), &grid_env.with_delta(delta), out, &format!("delta_{k}/"))?);
            }
            let rows: Vec<SweepRow> = runs
                .iter()
                .map(|r| SweepRow {
                    delta: r.delta.unwrap_or(f64::NAN),
                    eps_l: r.mismatch.eps_l,
                    eps_r: r.mismatch.eps_r,
                    noninvariance_mean: r.grid.noninvariance.mean,
                    noninvariance_sup: r.grid.noninvariance.sup,
                    fixed_point_gap: r.fixed_point.gap,
                    fixed_point_bound: r.fixed_point.bound,
                })
                .collect();
            out.csv_rows("sweep.csv", &rows)?;
            let eps: Vec<f64> = rows.iter().map(|r| r.eps_l).collect();
            let non: Vec<f64> = rows.iter().map(|r| r.noninvariance_mean).collect();
            PipelineSummary {
                all_fixed_point_bounds_hold: runs.iter().all(|r| r.fixed_point.holds),
                runs,
                monotone_eps_l: Some(increasing(&eps)),
                monotone_noninvariance: Some(increasing(&non)),
            }
        }
    };
    out.json("summary.json", &summary)
}
