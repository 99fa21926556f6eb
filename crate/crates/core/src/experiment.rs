//! Training, evaluation and recording pipelines behind the command line.
//!
//! Output layout under the plan's directory:
//!
//! - `checkpoints/{policy}_seed{seed}_ep{episodes}_{network}.bin`
//! - `traces/{policy}_seed{seed}.jsonl`
//! - `kpis/{policy}_kpis.csv`, `kpis/comparison.csv`, `kpis/fig*.csv`,
//!   `kpis/{policy}_seed{seed}_ep{episodes}_rewards.csv`
//!
//! Every run draws from streams derived from its own seed and tags, so runs
//! may execute in any order or in parallel with identical results.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::csv_out::{
    write_delay_figure, write_energy_figure, write_kpi_rows, write_reward_trace,
    write_violation_figure,
};
use crate::metrics::{average_rows, compute_kpis, KpiReport, KpiRow};
use crate::model::Scenario;
use crate::neural::{QNetwork, Transition};
use crate::policies::{AnyPolicy, LearnerKind, LearningPolicy, PolicyKind};
use crate::rng::{derive_seed, name_tag, purpose};
use crate::simcore::{run, write_jsonl, CompletionOutcome, LedgerSnapshot, OffloadingPolicy, RunOutcome, RunSeeds, Snapshot};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    TrainEval,
    Record,
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub scenario: Scenario,
    pub policies: Vec<PolicyKind>,
    pub mode: Mode,
    /// Training seeds in train mode, evaluation seeds in eval mode.
    pub seeds: Vec<u64>,
    /// Training episodes, or recorded simulations in record mode.
    pub episodes: usize,
    pub out_dir: PathBuf,
    /// Directory holding checkpoints for eval; `out_dir/checkpoints` if unset.
    pub checkpoint: Option<PathBuf>,
    /// Training seed whose checkpoints eval loads.
    pub train_seed: u64,
    pub offline_dataset: Option<PathBuf>,
    /// Seeds evaluated after training in train+eval mode.
    pub eval_seeds: Vec<u64>,
}

impl ExperimentPlan {
    pub fn new(scenario: Scenario, mode: Mode, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentPlan {
            scenario,
            policies: Vec::new(),
            mode,
            seeds: vec![0],
            episodes: 0,
            out_dir: out_dir.into(),
            checkpoint: None,
            train_seed: 0,
            offline_dataset: None,
            eval_seeds: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("at least one policy is required"));
        }
        match self.mode {
            Mode::Train | Mode::TrainEval => {
                if let Some(p) = self.policies.iter().find(|p| p.learner().is_none()) {
                    return Err(Error::config(format!("policy {p} does not learn")));
                }
                if self.mode == Mode::TrainEval && self.eval_seeds.is_empty() {
                    return Err(Error::config("train+eval needs evaluation seeds"));
                }
            }
            Mode::Eval => {}
            Mode::Record => {
                if self.policies.len() != 1 || self.policies[0].learner().is_some() {
                    return Err(Error::config("record takes exactly one rule-based behavior policy"));
                }
            }
        }
        Ok(())
    }

    fn dir(&self, sub: &str) -> Result<PathBuf> {
        let d = self.out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Ok(d)
    }

    fn checkpoint_dir(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("checkpoints"))
    }
}

pub fn run_stem(policy: &str, seed: u64, episodes: usize) -> String {
    format!("{policy}_seed{seed}_ep{episodes}")
}

pub fn checkpoint_path(dir: &Path, policy: &str, seed: u64, episodes: usize, network: &str) -> PathBuf {
    dir.join(format!("{}_{network}.bin", run_stem(policy, seed, episodes)))
}

/// Seeds of training episode `episode`. The workload is shared by all
/// policies; the policy stream is not.
pub fn train_seeds(seed: u64, policy: &str, episode: usize) -> RunSeeds {
    RunSeeds {
        workload: derive_seed(seed, &[purpose::TRAIN_EPISODE, episode as u64]),
        policy: derive_seed(seed, &[purpose::TRAIN_EPISODE, name_tag(policy), episode as u64]),
    }
}

pub fn eval_seeds(seed: u64, policy: &str) -> RunSeeds {
    RunSeeds {
        workload: derive_seed(seed, &[purpose::EVAL_EPISODE]),
        policy: derive_seed(seed, &[purpose::EVAL_EPISODE, name_tag(policy)]),
    }
}

fn record_seeds(seed: u64, episode: usize) -> RunSeeds {
    RunSeeds {
        workload: derive_seed(seed, &[purpose::RECORD_EPISODE, episode as u64]),
        policy: derive_seed(seed, &[purpose::RECORD_EPISODE, 1, episode as u64]),
    }
}

/// Trains `kind` from scratch for `episodes` episodes, after optionally
/// seeding the replay buffers with a recorded dataset.
pub fn train_learner(
    scenario: &Scenario,
    kind: LearnerKind,
    seed: u64,
    episodes: usize,
    offline: Option<&Dataset>,
) -> Result<LearningPolicy> {
    let mut schedule = scenario.train.clone();
    schedule.episodes = episodes;
    let mut policy = LearningPolicy::new(kind, scenario, seed);
    if let Some(data) = offline {
        data.check_compatible(scenario)?;
        for (agent, ts) in data.transitions_for(kind) {
            policy.extend_buffer(agent, ts);
        }
        policy.learn(schedule.offline_pretrain_steps)?;
    }
    policy.set_training(true);
    for e in 0..episodes {
        policy.set_epsilon(schedule.epsilon(e));
        run(&scenario.scenario, &mut policy, train_seeds(seed, kind.name(), e))?;
        policy.learn(schedule.updates_per_episode)?;
    }
    policy.set_training(false);
    policy.set_epsilon(0.0);
    Ok(policy)
}

pub fn write_checkpoints(dir: &Path, policy: &LearningPolicy, seed: u64, episodes: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, net) in policy.networks() {
        let path = checkpoint_path(dir, policy.kind().name(), seed, episodes, &name);
        std::fs::write(&path, net.to_bytes()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn load_checkpoints(
    dir: &Path,
    scenario: &Scenario,
    kind: LearnerKind,
    seed: u64,
    episodes: usize,
) -> Result<LearningPolicy> {
    let mut policy = LearningPolicy::new(kind, scenario, seed);
    let names: Vec<String> = policy.networks().into_iter().map(|(n, _)| n).collect();
    for name in names {
        let path = checkpoint_path(dir, kind.name(), seed, episodes, &name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        policy.load_network(&name, QNetwork::from_bytes(&bytes)?)?;
    }
    Ok(policy)
}

/// Per-policy result of a train command.
#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub seed: u64,
    pub policy: LearningPolicy,
}

pub fn cmd_train(plan: &ExperimentPlan) -> Result<Vec<TrainedPolicy>> {
    plan.validate()?;
    let offline = plan
        .offline_dataset
        .as_deref()
        .map(Dataset::read)
        .transpose()?;
    let ckpt = plan.checkpoint_dir();
    let kpis = plan.dir("kpis")?;
    let jobs: Vec<(LearnerKind, u64)> = plan
        .policies
        .iter()
        .filter_map(|p| p.learner())
        .flat_map(|k| plan.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let trained = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let policy = train_learner(&plan.scenario, kind, seed, plan.episodes, offline.as_ref())?;
            write_checkpoints(&ckpt, &policy, seed, plan.episodes)?;
            let traces: Vec<Vec<f64>> =
                policy.agents().iter().map(|a| a.reward_trace.clone()).collect();
            let path = kpis.join(format!("{}_rewards.csv", run_stem(kind.name(), seed, plan.episodes)));
            write_reward_trace(&path, &traces)?;
            Ok(TrainedPolicy { seed, policy })
        })
        .collect::<Result<Vec<_>>>()?;
    if plan.mode == Mode::TrainEval {
        let eval_plan = ExperimentPlan {
            mode: Mode::Eval,
            seeds: plan.eval_seeds.clone(),
            checkpoint: Some(ckpt),
            train_seed: plan.seeds[0],
            ..plan.clone()
        };
        cmd_eval(&eval_plan)?;
    }
    Ok(trained)
}

/// One evaluation run of a policy: greedy for learners.
pub fn evaluate_once(
    scenario: &Scenario,
    policy: &mut impl OffloadingPolicy,
    seed: u64,
) -> Result<(RunOutcome, KpiReport)> {
    let seeds = eval_seeds(seed, policy.name());
    let out = run(&scenario.scenario, policy, seeds)?;
    let kpi = compute_kpis(&scenario.scenario, &out.trace, &out.final_energy, &scenario.objective);
    Ok((out, kpi))
}

/// Seed-ordered KPI reports of one policy.
#[derive(Debug, Clone)]
pub struct PolicyEvaluation {
    pub policy: PolicyKind,
    pub seeds: Vec<u64>,
    pub reports: Vec<KpiReport>,
}

impl PolicyEvaluation {
    pub fn mean(&self, f: impl Fn(&KpiReport) -> f64) -> f64 {
        let mut v: Vec<f64> = self.reports.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    pub fn rows(&self) -> Vec<KpiRow> {
        let mut rows: Vec<KpiRow> = self
            .seeds
            .iter()
            .zip(&self.reports)
            .map(|(&s, r)| r.row(self.policy.name(), s))
            .collect();
        rows.push(average_rows(self.policy.name(), &rows));
        rows
    }
}

/// Evaluates already built policies on `seeds` and writes traces, per-policy
/// KPI tables, the comparison table and the figure tables under `out_dir`.
pub fn evaluate_policies(
    scenario: &Scenario,
    policies: Vec<AnyPolicy>,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Vec<PolicyEvaluation>> {
    let traces = out_dir.join("traces");
    let kpis = out_dir.join("kpis");
    for d in [&traces, &kpis] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let evals = policies
        .into_par_iter()
        .map(|proto| {
            let kind = proto.kind();
            let reports = seeds
                .par_iter()
                .map(|&seed| {
                    let mut policy = proto.clone();
                    let (out, kpi) = evaluate_once(scenario, &mut policy, seed)?;
                    write_jsonl(&traces.join(format!("{}_seed{seed}.jsonl", kind.name())), &out.trace)?;
                    Ok(kpi)
                })
                .collect::<Result<Vec<_>>>()?;
            let eval = PolicyEvaluation {
                policy: kind,
                seeds: seeds.to_vec(),
                reports,
            };
            if let Some(first) = eval.reports.first() {
                write_kpi_rows(
                    &kpis.join(format!("{}_kpis.csv", kind.name())),
                    &first.columns(),
                    &eval.rows(),
                )?;
            }
            Ok(eval)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = evals.iter().find_map(|e| e.reports.first()) {
        let means: Vec<KpiRow> = evals
            .iter()
            .filter_map(|e| e.rows().pop())
            .collect();
        write_kpi_rows(&kpis.join("comparison.csv"), &first.columns(), &means)?;
        let by_policy: Vec<(&str, &[KpiReport])> = evals
            .iter()
            .map(|e| (e.policy.name(), e.reports.as_slice()))
            .collect();
        write_energy_figure(&kpis.join("fig3_energy.csv"), &by_policy)?;
        write_violation_figure(&kpis.join("fig4_violations.csv"), &by_policy)?;
        write_delay_figure(&kpis.join("fig5_delay.csv"), &by_policy)?;
    }
    Ok(evals)
}

pub fn cmd_eval(plan: &ExperimentPlan) -> Result<Vec<PolicyEvaluation>> {
    plan.validate()?;
    let dir = plan.checkpoint_dir();
    let policies = plan
        .policies
        .iter()
        .map(|&kind| {
            Ok(match kind.learner() {
                None => kind.build(&plan.scenario, 0),
                Some(k) => load_checkpoints(&dir, &plan.scenario, k, plan.train_seed, plan.episodes)?.into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_policies(&plan.scenario, policies, &plan.seeds, &plan.out_dir)
}

const DATASET_FORMAT: &str = "riskfleet-transitions";
const DATASET_VERSION: u32 = 1;

/// First line of a recorded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub behavior: String,
    pub simulations: usize,
    pub num_uav: usize,
    pub num_nodes: usize,
    pub state_len: usize,
}

/// A behavior-policy decision priced by every learner's reward scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedTransition {
    pub agent: usize,
    pub state: Vec<f32>,
    pub action: usize,
    pub next_state: Vec<f32>,
    pub terminal: bool,
    pub reward_dql: f64,
    pub reward_drs: f64,
    pub risk_drs: f64,
    pub reward_rq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub transitions: Vec<RecordedTransition>,
}

impl Dataset {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        serde_json::to_writer(&mut out, &self.header).map_err(|e| Error::format("dataset header", e))?;
        out.push(b'\n');
        for t in &self.transitions {
            serde_json::to_writer(&mut out, t).map_err(|e| Error::format("dataset transition", e))?;
            out.push(b'\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(f).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::format("dataset", "missing header line"))?
            .map_err(|e| Error::io(path, e))?;
        let header: DatasetHeader =
            serde_json::from_str(&first).map_err(|e| Error::format("dataset header", e))?;
        if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
            return Err(Error::format(
                "dataset header",
                format!("unsupported format {} v{}", header.format, header.version),
            ));
        }
        let mut transitions = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            transitions.push(
                serde_json::from_str(&line).map_err(|e| Error::format("dataset transition", e))?,
            );
        }
        Ok(Dataset { header, transitions })
    }

    pub fn check_compatible(&self, scenario: &Scenario) -> Result<()> {
        let cfg = &scenario.scenario;
        let state_len = crate::policies::ObservedState::encoded_len(
            cfg.task_types.len(),
            cfg.num_uav,
            cfg.num_nodes(),
        );
        if self.header.num_uav != cfg.num_uav
            || self.header.num_nodes != cfg.num_nodes()
            || self.header.state_len != state_len
        {
            return Err(Error::config(format!(
                "dataset was recorded for {} UAVs / {} nodes / state length {}, scenario has {} / {} / {state_len}",
                self.header.num_uav,
                self.header.num_nodes,
                self.header.state_len,
                cfg.num_uav,
                cfg.num_nodes()
            )));
        }
        Ok(())
    }

    /// Replay transitions per agent with `kind`'s reward.
    pub fn transitions_for(&self, kind: LearnerKind) -> Vec<(usize, Vec<Transition>)> {
        let mut per_agent: Vec<Vec<Transition>> = vec![Vec::new(); self.header.num_uav];
        for t in &self.transitions {
            let (reward, risk) = match kind {
                LearnerKind::Dql => (t.reward_dql, 0.0),
                LearnerKind::Drs => (t.reward_drs, t.risk_drs),
                LearnerKind::Rq => (t.reward_rq, 0.0),
            };
            if let Some(v) = per_agent.get_mut(t.agent) {
                v.push(Transition {
                    state: t.state.clone(),
                    action: t.action,
                    reward,
                    risk,
                    next_state: t.next_state.clone(),
                    terminal: t.terminal,
                });
            }
        }
        per_agent.into_iter().enumerate().collect()
    }
}

/// Runs a behavior policy while every learner's reward scheme prices its
/// decisions.
struct Recorder {
    behavior: AnyPolicy,
    learners: [LearningPolicy; 3],
}

impl OffloadingPolicy for Recorder {
    fn name(&self) -> &str {
        self.behavior.name()
    }

    fn begin_episode(&mut self, cfg: &crate::model::ScenarioConfig) {
        self.behavior.begin_episode(cfg);
        self.learners.iter_mut().for_each(|l| l.begin_episode(cfg));
    }

    fn decide(&mut self, ctx: &Snapshot, rng: &mut SimRng) -> usize {
        let action = self.behavior.decide(ctx, rng);
        self.learners.iter_mut().for_each(|l| l.observe(ctx, action));
        action
    }

    fn on_completion(&mut self, outcome: &CompletionOutcome) -> Option<LedgerSnapshot> {
        self.behavior.on_completion(outcome);
        let mut ledger = None;
        for l in &mut self.learners {
            ledger = ledger.or(l.on_completion(outcome));
        }
        ledger
    }

    fn end_episode(&mut self) {
        self.behavior.end_episode();
        self.learners.iter_mut().for_each(|l| l.end_episode());
    }
}

/// Records `simulations` runs of `behavior` as a transition dataset.
pub fn record_dataset(
    scenario: &Scenario,
    behavior: PolicyKind,
    seed: u64,
    simulations: usize,
) -> Result<Dataset> {
    let mut unbounded = scenario.clone();
    unbounded.train.replay_capacity = usize::MAX;
    let learner = |k| {
        let mut l = LearningPolicy::new(k, &unbounded, seed);
        l.set_training(true);
        l
    };
    let mut rec = Recorder {
        behavior: behavior.build(scenario, seed),
        learners: [
            learner(LearnerKind::Dql),
            learner(LearnerKind::Drs),
            learner(LearnerKind::Rq),
        ],
    };
    for e in 0..simulations {
        run(&scenario.scenario, &mut rec, record_seeds(seed, e))?;
    }
    let cfg = &scenario.scenario;
    let [dql, drs, rq] = &rec.learners;
    let mut transitions = Vec::new();
    for agent in 0..cfg.num_uav {
        let buffers = [dql, drs, rq].map(|l| l.agents()[agent].buffer().iter().collect::<Vec<_>>());
        for ((a, b), c) in buffers[0].iter().zip(&buffers[1]).zip(&buffers[2]) {
            transitions.push(RecordedTransition {
                agent,
                state: a.state.clone(),
                action: a.action,
                next_state: a.next_state.clone(),
                terminal: a.terminal,
                reward_dql: a.reward,
                reward_drs: b.reward,
                risk_drs: b.risk,
                reward_rq: c.reward,
            });
        }
    }
    Ok(Dataset {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            behavior: behavior.name().into(),
            simulations,
            num_uav: cfg.num_uav,
            num_nodes: cfg.num_nodes(),
            state_len: crate::policies::ObservedState::encoded_len(
                cfg.task_types.len(),
                cfg.num_uav,
                cfg.num_nodes(),
            ),
        },
        transitions,
    })
}

pub fn dataset_path(out_dir: &Path, behavior: &str, seed: u64, simulations: usize) -> PathBuf {
    out_dir
        .join("traces")
        .join(format!("{behavior}_seed{seed}_record{simulations}.jsonl"))
}

pub fn cmd_record(plan: &ExperimentPlan) -> Result<(PathBuf, Dataset)> {
    plan.validate()?;
    let behavior = plan.policies[0];
    let seed = plan.seeds[0];
    plan.dir("traces")?;
    let data = record_dataset(&plan.scenario, behavior, seed, plan.episodes)?;
    let path = dataset_path(&plan.out_dir, behavior.name(), seed, plan.episodes);
    data.write(&path)?;
    Ok((path, data))
}
