//! Agent-based click-and-share simulation.
//!
//! Synthetic packages are sets of `n_F` distinct feature indices drawn from
//! a universe of `M`. All agents share one linear decision model: a
//! package's click probability is its raw score `w0 + sum of member
//! weights`, either clamped into `[floor, 1-floor]` (`clipped_linear`) or
//! squashed through a logistic first. Each round allocates package A to one
//! half of the network and B to the other, then spreads synchronously:
//! newly exposed agents draw a click once (one draw per agent-package pair,
//! ever), clickers transmit to each neighbor independently with the
//! infection rate, and unexposed neighbors join the next wave. Impressions
//! count first exposures only, so per-arm CTR is well defined and bounded
//! by the population.
//!
//! After every round a selector draws the next (control, variant) pair:
//! the pure-social selector keeps one package (fair coin or most-clicked)
//! and mutates it; the A/B-led selector promotes the variant only when the
//! Bayesian decision clears the threshold. The first drawing is shared by
//! construction, so both scenarios produce identical first rounds under the
//! same seeds.
//!
//! Determinism: replica `r` derives its graph from stream `2r` and its
//! dynamics from stream `2r+1` of the master seed (see [`crate::rng`]), so
//! results are bit-identical regardless of worker count.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes_ab::{self, AbAction, ArmStats};
use crate::error::Error;
use crate::netgen::{Graph, GraphSpec, Topology};
use crate::rng::{self, PortableRng};
use crate::Result;

pub const DEFAULT_PROBABILITY_FLOOR: f64 = 0.001;
pub const DEFAULT_AB_THRESHOLD: f64 = 0.95;
pub const DEFAULT_ROUND_LENGTH: u32 = 5;
/// Standard deviation of a synthetic package's raw score around the 0.5
/// intercept (see [`DecisionModel::synthetic`]).
pub const SYNTHETIC_SCORE_SD: f64 = 0.0625;

/// How a raw feature score becomes a click probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMapping {
    ClippedLinear,
    Logistic,
}

/// The shared linear decision model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    pub w0: f64,
    pub weights: Vec<f64>,
    pub probability_floor: f64,
    pub mapping: ProbabilityMapping,
}

impl DecisionModel {
    pub fn new(
        w0: f64,
        weights: Vec<f64>,
        probability_floor: f64,
        mapping: ProbabilityMapping,
    ) -> Result<Self> {
        if !(0.0 < probability_floor && probability_floor < 0.5) {
            return Err(Error::invalid(format!(
                "probability floor {probability_floor} outside (0, 0.5)"
            )));
        }
        Ok(DecisionModel { w0, weights, probability_floor, mapping })
    }

    /// Synthetic model for simulation studies: intercept 0.5 and weights
    /// from a seeded standard normal scaled by
    /// [`SYNTHETIC_SCORE_SD`]/sqrt(n_F). Raw scores of n_F-feature packages
    /// then have sd 1/16 around 0.5, keeping them well inside [0, 1] while
    /// selection stays gradual over hundreds of rounds.
    pub fn synthetic(feature_universe: usize, n_features: usize, seed: u64) -> Self {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let scale = SYNTHETIC_SCORE_SD / (n_features as f64).sqrt();
        let mut rng = rng::seeded(seed);
        let weights = (0..feature_universe)
            .map(|_| normal.sample(&mut rng) * scale)
            .collect();
        DecisionModel {
            w0: 0.5,
            weights,
            probability_floor: DEFAULT_PROBABILITY_FLOOR,
            mapping: ProbabilityMapping::ClippedLinear,
        }
    }

    pub fn feature_universe(&self) -> usize {
        self.weights.len()
    }
}

/// A synthetic package: a set of distinct feature indices plus lineage
/// bookkeeping (`lineage_id` = round of creation).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageGenotype {
    /// Sorted distinct indices in [0, M).
    pub features: Vec<usize>,
    pub lineage_id: u32,
    pub parent_id: Option<u32>,
}

impl PackageGenotype {
    /// Uniform draw of `n_features` distinct indices from [0, universe).
    pub fn random(
        universe: usize,
        n_features: usize,
        lineage_id: u32,
        rng: &mut PortableRng,
    ) -> Result<Self> {
        if n_features == 0 || n_features > universe {
            return Err(Error::invalid(format!(
                "cannot draw {n_features} distinct features from a universe of {universe}"
            )));
        }
        let mut features = sample(rng, universe, n_features).into_vec();
        features.sort_unstable();
        Ok(PackageGenotype { features, lineage_id, parent_id: None })
    }

    /// Replaces `round(mu * n_F)` members, chosen uniformly without
    /// replacement, with indices drawn uniformly without replacement from
    /// the complement of the original feature set.
    pub fn mutate(
        &self,
        mutation_rate: f64,
        universe: usize,
        new_lineage_id: u32,
        rng: &mut PortableRng,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&mutation_rate) {
            return Err(Error::invalid(format!(
                "mutation rate {mutation_rate} outside [0,1]"
            )));
        }
        let n_features = self.features.len();
        let replacements = (mutation_rate * n_features as f64).round() as usize;
        let complement: Vec<usize> =
            (0..universe).filter(|i| !self.features.contains(i)).collect();
        if complement.len() < replacements {
            return Err(Error::invalid(format!(
                "complement of size {} cannot supply {replacements} replacement features",
                complement.len()
            )));
        }
        let mut features = self.features.clone();
        if replacements > 0 {
            let removed = sample(rng, n_features, replacements).into_vec();
            let incoming = sample(rng, complement.len(), replacements).into_vec();
            let mut kept: Vec<usize> = features
                .iter()
                .enumerate()
                .filter(|(pos, _)| !removed.contains(pos))
                .map(|(_, &f)| f)
                .collect();
            kept.extend(incoming.iter().map(|&i| complement[i]));
            features = kept;
            features.sort_unstable();
        }
        Ok(PackageGenotype {
            features,
            lineage_id: new_lineage_id,
            parent_id: Some(self.lineage_id),
        })
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.features.binary_search(&feature).is_ok()
    }

    /// Wire format: sorted indices joined by '+', e.g. `3+17+22`.
    pub fn label(&self) -> String {
        self.features
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// Raw score `w0 + sum of member weights` mapped into a probability in
/// `[floor, 1 - floor]`.
pub fn click_probability(model: &DecisionModel, pkg: &PackageGenotype) -> Result<f64> {
    let m = model.feature_universe();
    let mut score = model.w0;
    for &f in &pkg.features {
        if f >= m {
            return Err(Error::invalid(format!(
                "feature index {f} outside universe of {m}"
            )));
        }
        score += model.weights[f];
    }
    let floor = model.probability_floor;
    let p = match model.mapping {
        ProbabilityMapping::ClippedLinear => score,
        ProbabilityMapping::Logistic => 1.0 / (1.0 + (-score).exp()),
    };
    Ok(p.clamp(floor, 1.0 - floor))
}

/// Which selector drives package succession.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Pure,
    AbLed,
}

/// Keep rule for the pure-social selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PureKeepRule {
    Random,
    MostClicked,
}

/// Full experiment recipe. The graph topology is instantiated per replica
/// with `n_agents` nodes and a replica-derived seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_agents: usize,
    pub total_steps: u32,
    pub round_length: u32,
    pub n_features_per_package: usize,
    pub feature_universe: usize,
    pub mutation_rate: f64,
    pub infection_rate: f64,
    pub ab_threshold: f64,
    pub scenario: Scenario,
    pub pure_keep_rule: PureKeepRule,
    pub graph: Topology,
    pub master_seed: u64,
    pub n_replicas: u32,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::invalid("need at least 2 agents"));
        }
        if self.round_length == 0 {
            return Err(Error::invalid("round_length must be >= 1"));
        }
        if self.total_steps == 0 || self.total_steps % self.round_length != 0 {
            return Err(Error::invalid(format!(
                "total_steps ({}) must be a positive multiple of round_length ({})",
                self.total_steps, self.round_length
            )));
        }
        if self.n_features_per_package == 0
            || self.n_features_per_package > self.feature_universe
        {
            return Err(Error::invalid(format!(
                "n_features_per_package ({}) outside [1, feature_universe={}]",
                self.n_features_per_package, self.feature_universe
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::invalid("mutation_rate outside [0,1]"));
        }
        let replacements =
            (self.mutation_rate * self.n_features_per_package as f64).round() as usize;
        if self.feature_universe - self.n_features_per_package < replacements {
            return Err(Error::invalid(format!(
                "mutation needs {replacements} replacement features but the complement \
                 holds only {}",
                self.feature_universe - self.n_features_per_package
            )));
        }
        if !(self.infection_rate > 0.0 && self.infection_rate <= 1.0) {
            return Err(Error::invalid("infection_rate outside (0,1]"));
        }
        if !(self.ab_threshold > 0.0 && self.ab_threshold < 1.0) {
            return Err(Error::invalid("ab_threshold outside (0,1)"));
        }
        if self.n_replicas == 0 {
            return Err(Error::invalid("n_replicas must be >= 1"));
        }
        GraphSpec {
            topology: self.graph.clone(),
            n_nodes: self.n_agents,
            seed: 0,
        }
        .validate()
    }

    pub fn validate_with_model(&self, model: &DecisionModel) -> Result<()> {
        self.validate()?;
        if model.feature_universe() != self.feature_universe {
            return Err(Error::invalid(format!(
                "model covers {} features but the config universe is {}",
                model.feature_universe(),
                self.feature_universe
            )));
        }
        Ok(())
    }

    pub fn n_rounds(&self) -> u32 {
        self.total_steps / self.round_length
    }
}

/// Per-arm tallies for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmLog {
    pub genotype: PackageGenotype,
    pub impressions: u32,
    pub clicks: u32,
    /// clicks / impressions; absent when the arm saw no impressions.
    pub ctr: Option<f64>,
}

impl ArmLog {
    fn new(genotype: PackageGenotype, impressions: u32, clicks: u32) -> Self {
        let ctr = (impressions > 0).then(|| clicks as f64 / impressions as f64);
        ArmLog { genotype, impressions, clicks, ctr }
    }

    pub fn stats(&self) -> ArmStats {
        ArmStats::new(self.clicks as u64, (self.impressions - self.clicks) as u64)
    }
}

/// The selector's action at the end of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundDecision {
    KeepA,
    KeepB,
    PromoteB,
}

impl RoundDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            RoundDecision::KeepA => "keep_a",
            RoundDecision::KeepB => "keep_b",
            RoundDecision::PromoteB => "promote_b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round_index: u32,
    pub arm_a: ArmLog,
    pub arm_b: ArmLog,
    pub decision: RoundDecision,
}

/// Everything one replica produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub replica_index: u32,
    /// RNG stream of this replica's dynamics (its graph uses `seed - 1`;
    /// both are streams of the master seed).
    pub seed: u64,
    pub round_logs: Vec<RoundLog>,
    pub final_control: PackageGenotype,
    /// rounds x M presence of each feature in the round's control (arm A)
    /// genotype.
    pub feature_frequency: Vec<Vec<u8>>,
}

/// Per-agent exposure split of one round: `arm_of[agent]` is 0 for A,
/// 1 for B. A uniformly random permutation gives A the first ceil(N/2)
/// slots.
pub fn init_round(n_agents: usize, rng: &mut PortableRng) -> Vec<u8> {
    let mut order: Vec<usize> = (0..n_agents).collect();
    for i in (1..n_agents).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let a_size = n_agents.div_ceil(2);
    let mut arm_of = vec![0u8; n_agents];
    for &agent in order.iter().skip(a_size) {
        arm_of[agent] = 1;
    }
    arm_of
}

struct RoundState {
    exposed: [Vec<bool>; 2],
    impressions: [u32; 2],
    clicks: [u32; 2],
    /// Agents exposed during the previous step, due to draw their click.
    pending: Vec<(usize, u8)>,
}

impl RoundState {
    fn new(arm_of: &[u8]) -> Self {
        let n = arm_of.len();
        let mut state = RoundState {
            exposed: [vec![false; n], vec![false; n]],
            impressions: [0, 0],
            clicks: [0, 0],
            pending: Vec::with_capacity(n),
        };
        for (agent, &arm) in arm_of.iter().enumerate() {
            state.exposed[arm as usize][agent] = true;
            state.impressions[arm as usize] += 1;
            state.pending.push((agent, arm));
        }
        state
    }
}

/// One synchronous step: agents exposed in the previous step draw their
/// click (probability fixed per arm), clickers transmit to every neighbor
/// independently with rate `eta`, and first-time exposures form the next
/// wave. Returns the number of new exposures.
fn cascade_step(
    state: &mut RoundState,
    graph: &Graph,
    arm_probabilities: [f64; 2],
    eta: f64,
    rng: &mut PortableRng,
) -> usize {
    let wave = std::mem::take(&mut state.pending);
    for (agent, arm) in wave {
        if rng.gen::<f64>() < arm_probabilities[arm as usize] {
            state.clicks[arm as usize] += 1;
            for &neighbor in graph.neighbors(agent) {
                if rng.gen::<f64>() < eta && !state.exposed[arm as usize][neighbor] {
                    state.exposed[arm as usize][neighbor] = true;
                    state.impressions[arm as usize] += 1;
                    state.pending.push((neighbor, arm));
                }
            }
        }
    }
    state.pending.len()
}

/// Outcome of one test administration round.
pub struct RoundOutcome {
    pub arm_a: ArmLog,
    pub arm_b: ArmLog,
    /// Steps consumed, counting the initial allocation as step 1.
    pub steps_used: u32,
}

/// Runs one round: allocation (step 1), then cascades until the round
/// length is exhausted or a step yields no new exposure.
pub fn run_round(
    graph: &Graph,
    model: &DecisionModel,
    pair: (&PackageGenotype, &PackageGenotype),
    round_length: u32,
    eta: f64,
    rng: &mut PortableRng,
) -> Result<RoundOutcome> {
    let arm_probabilities = [
        click_probability(model, pair.0)?,
        click_probability(model, pair.1)?,
    ];
    let arm_of = init_round(graph.n_nodes(), rng);
    let mut state = RoundState::new(&arm_of);
    let mut steps_used = 1;
    while steps_used < round_length {
        steps_used += 1;
        if cascade_step(&mut state, graph, arm_probabilities, eta, rng) == 0 {
            break;
        }
    }
    Ok(RoundOutcome {
        arm_a: ArmLog::new(pair.0.clone(), state.impressions[0], state.clicks[0]),
        arm_b: ArmLog::new(pair.1.clone(), state.impressions[1], state.clicks[1]),
        steps_used,
    })
}

/// Pure-social succession: keep one package (fair coin, or the most
/// clicked with coin ties) and challenge it with its own mutant. No
/// statistical test involved.
pub fn next_pair_pure(
    log_a: &ArmLog,
    log_b: &ArmLog,
    rule: PureKeepRule,
    mutation_rate: f64,
    universe: usize,
    new_lineage_id: u32,
    rng: &mut PortableRng,
) -> Result<(PackageGenotype, PackageGenotype, RoundDecision)> {
    let keep_a = match rule {
        PureKeepRule::Random => rng.gen::<f64>() < 0.5,
        PureKeepRule::MostClicked => {
            if log_a.clicks != log_b.clicks {
                log_a.clicks > log_b.clicks
            } else {
                rng.gen::<f64>() < 0.5
            }
        }
    };
    let (kept, decision) = if keep_a {
        (&log_a.genotype, RoundDecision::KeepA)
    } else {
        (&log_b.genotype, RoundDecision::KeepB)
    };
    let variant = kept.mutate(mutation_rate, universe, new_lineage_id, rng)?;
    Ok((kept.clone(), variant, decision))
}

/// A/B-led succession: promote the variant to control only when the
/// Bayesian decision clears the threshold; either way the next variant is
/// a mutant of the new control.
pub fn next_pair_ab(
    log_a: &ArmLog,
    log_b: &ArmLog,
    threshold: f64,
    mutation_rate: f64,
    universe: usize,
    new_lineage_id: u32,
    rng: &mut PortableRng,
) -> Result<(PackageGenotype, PackageGenotype, RoundDecision)> {
    let decision = bayes_ab::decide(log_a.stats(), log_b.stats(), threshold)?;
    let (kept, round_decision) = match decision.action {
        AbAction::PromoteVariant => (&log_b.genotype, RoundDecision::PromoteB),
        AbAction::KeepControl => (&log_a.genotype, RoundDecision::KeepA),
    };
    let variant = kept.mutate(mutation_rate, universe, new_lineage_id, rng)?;
    Ok((kept.clone(), variant, round_decision))
}

/// Runs one replica start to finish. Deterministic in
/// (config, model, replica_index).
pub fn run_replica(
    config: &SimConfig,
    model: &DecisionModel,
    replica_index: u32,
) -> Result<ReplicaResult> {
    config.validate_with_model(model)?;
    let graph_seed = rng::stream(config.master_seed, rng::replica_graph_stream(replica_index))
        .gen::<u64>();
    let graph = GraphSpec {
        topology: config.graph.clone(),
        n_nodes: config.n_agents,
        seed: graph_seed,
    }
    .generate()?;

    let sim_stream = rng::replica_sim_stream(replica_index);
    let mut rng = rng::stream(config.master_seed, sim_stream);
    let universe = config.feature_universe;

    // shared first drawing: the variant mutates the initial control
    let mut control =
        PackageGenotype::random(universe, config.n_features_per_package, 0, &mut rng)?;
    let mut variant = control.mutate(config.mutation_rate, universe, 0, &mut rng)?;

    let n_rounds = config.n_rounds();
    let mut round_logs = Vec::with_capacity(n_rounds as usize);
    let mut feature_frequency = Vec::with_capacity(n_rounds as usize);
    for round in 0..n_rounds {
        let outcome = run_round(
            &graph,
            model,
            (&control, &variant),
            config.round_length,
            config.infection_rate,
            &mut rng,
        )?;

        let mut presence = vec![0u8; universe];
        for &f in &control.features {
            presence[f] = 1;
        }
        feature_frequency.push(presence);

        let (next_control, next_variant, decision) = match config.scenario {
            Scenario::Pure => next_pair_pure(
                &outcome.arm_a,
                &outcome.arm_b,
                config.pure_keep_rule,
                config.mutation_rate,
                universe,
                round + 1,
                &mut rng,
            )?,
            Scenario::AbLed => next_pair_ab(
                &outcome.arm_a,
                &outcome.arm_b,
                config.ab_threshold,
                config.mutation_rate,
                universe,
                round + 1,
                &mut rng,
            )?,
        };
        round_logs.push(RoundLog {
            round_index: round,
            arm_a: outcome.arm_a,
            arm_b: outcome.arm_b,
            decision,
        });
        control = next_control;
        variant = next_variant;
    }

    Ok(ReplicaResult {
        replica_index,
        seed: sim_stream,
        round_logs,
        final_control: control,
        feature_frequency,
    })
}

/// All replicas in index order, sequentially. This is the `parallel`
/// feature's fallback path and the baseline the benchmarks compare
/// against; results are identical to [`run_experiment`].
pub fn run_experiment_sequential(
    config: &SimConfig,
    model: &DecisionModel,
) -> Result<Vec<ReplicaResult>> {
    config.validate_with_model(model)?;
    (0..config.n_replicas)
        .map(|r| run_replica(config, model, r))
        .collect()
}

/// All replicas in index order. Replicas are independent and derive their
/// RNG streams from (master_seed, index), so the output does not depend on
/// how many workers run them.
#[cfg(feature = "parallel")]
pub fn run_experiment(config: &SimConfig, model: &DecisionModel) -> Result<Vec<ReplicaResult>> {
    use rayon::prelude::*;
    config.validate_with_model(model)?;
    (0..config.n_replicas)
        .into_par_iter()
        .map(|r| run_replica(config, model, r))
        .collect()
}

/// All replicas in index order (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn run_experiment(config: &SimConfig, model: &DecisionModel) -> Result<Vec<ReplicaResult>> {
    run_experiment_sequential(config, model)
}
