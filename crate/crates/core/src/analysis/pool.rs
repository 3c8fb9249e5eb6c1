//! Open-pool estimates: security level, competitive ratio, and the value of a
//! cooperative first partner.
//!
//! In the open-pool model one subject meets a stream of partners. Each new
//! partner is cooperative (OFT by default) with probability `q`, otherwise it
//! is the adversary of the population under test. Partners arrive with a
//! fresh machine; the subject's machine runs on across partners.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::enumerate::{search, SearchSpace};
use super::AnalysisError;
use crate::game::{GameConfig, Payoff, PayoffTable};
use crate::library;
use crate::opd::{expected_rematch_delay, pair_tick, rematch, rematch_due, unpaired_payoff, Memory, Population};
use crate::vm::{reset, StrategyProgram};

/// `(1/q) * ((r + 1) * R - S)`: the expected shortfall bound for Opt-for-Tat.
pub fn oft_constant(q: f64, r: f64, table: &PayoffTable) -> Result<f64, AnalysisError> {
    if q.is_nan() || q <= 0.0 {
        return Err(AnalysisError::ZeroQ);
    }
    Ok(((r + 1.0) * to_f64(table.r) - to_f64(table.s)) / q)
}

pub fn to_f64(p: Payoff) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

/// A sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub trials: usize,
    /// Computed without sampling.
    pub exact: bool,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len().max(1) as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            se: (var / n).sqrt(),
            trials: xs.len(),
            exact: false,
        }
    }

    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            se: 0.0,
            trials: 1,
            exact: true,
        }
    }

    /// Normal-approximation 95% interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.se, self.mean + 1.96 * self.se)
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact {
            write!(f, "{:.4} (exact)", self.mean)
        } else {
            let (lo, hi) = self.ci95();
            write!(f, "{:.4} [95% CI {:.4}, {:.4}; n={}]", self.mean, lo, hi, self.trials)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adversary {
    pub name: String,
    pub program: StrategyProgram,
}

/// The candidate set of populations a security level is taken over.
#[derive(Clone, Debug)]
pub struct PopulationModel {
    /// Chance that a new partner is cooperative.
    pub q: f64,
    pub cooperative: StrategyProgram,
    /// One population per adversary: cooperative partners with probability
    /// `q`, that adversary otherwise.
    pub gamma: Vec<Adversary>,
}

impl PopulationModel {
    /// OFT partners with probability `q`; adversaries AllD and AllW.
    pub fn new(q: f64, config: &GameConfig) -> Self {
        PopulationModel {
            q,
            cooperative: library::get("OFT", config).expect("builtin"),
            gamma: ["AllD", "AllW"]
                .iter()
                .map(|n| Adversary {
                    name: format!("all-{n}"),
                    program: library::get(n, config).expect("builtin"),
                })
                .collect(),
        }
    }

    /// Replaces the adversaries by builtins or strategy files.
    pub fn with_gamma(mut self, specs: &[&str], config: &GameConfig) -> Result<Self, library::LibraryError> {
        self.gamma = specs
            .iter()
            .map(|s| {
                let name = s.strip_prefix("all-").unwrap_or(s);
                Ok(Adversary {
                    name: format!("all-{name}"),
                    program: library::resolve(name, config)?,
                })
            })
            .collect::<Result<_, library::LibraryError>>()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(AnalysisError::InvalidModel(format!("q = {} is not a probability", self.q)));
        }
        if self.gamma.is_empty() {
            return Err(AnalysisError::InvalidModel("the adversary set is empty".into()));
        }
        Ok(())
    }

    /// Draws are deterministic, so one run is the exact value.
    fn deterministic(&self) -> bool {
        self.q == 0.0 || self.q == 1.0
    }
}

/// Seed of trial `i`.
pub fn trial_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

/// The subject's total over one open-pool run.
pub fn open_pool_run(
    subject: &StrategyProgram,
    model: &PopulationModel,
    adversary: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
    seed: u64,
) -> Result<Payoff, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let program = if rng.gen_bool(model.q) { &model.cooperative } else { adversary };
        (program, reset(program), Memory::default())
    };
    let idle = unpaired_payoff(config, table);
    let mut vm = reset(subject);
    let mut memory = Memory::default();
    let mut partner = Some(draw(&mut rng));
    let mut total = Payoff::default();
    for tick in 1..=config.n {
        match partner.as_mut() {
            Some((program, pvm, pmem)) => {
                let out = pair_tick([&mut vm, pvm], [subject, *program], [&mut memory, pmem], config, table)?;
                total += out.payoffs[0];
                if out.split {
                    partner = None;
                }
            }
            None => total += idle,
        }
        if partner.is_none() && rematch_due(config, tick) {
            partner = Some(draw(&mut rng));
            memory = Memory::default();
        }
    }
    Ok(total)
}

/// Sum over `trials` seeded runs; exact and comparable across candidates
/// because every candidate sees the same partner draws.
fn total_over_trials(
    subject: &StrategyProgram,
    model: &PopulationModel,
    adversary: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
    trials: usize,
) -> Result<Payoff, AnalysisError> {
    let mut sum = Payoff::default();
    for i in 0..trials {
        sum += open_pool_run(subject, model, adversary, config, table, trial_seed(config.seed, i))?;
    }
    Ok(sum)
}

fn estimate(
    subject: &StrategyProgram,
    model: &PopulationModel,
    adversary: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
    trials: usize,
) -> Result<Estimate, AnalysisError> {
    if model.deterministic() {
        let v = open_pool_run(subject, model, adversary, config, table, trial_seed(config.seed, 0))?;
        return Ok(Estimate::exact(to_f64(v)));
    }
    let xs = (0..trials.max(1))
        .map(|i| open_pool_run(subject, model, adversary, config, table, trial_seed(config.seed, i)).map(to_f64))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Estimate::from_samples(&xs))
}

#[derive(Clone, Debug)]
pub struct SecurityLevel {
    /// Mean payoff in each population of the model, in model order.
    pub per_population: Vec<(String, Estimate)>,
    /// Index of the population with the lowest mean.
    pub worst: usize,
}

impl SecurityLevel {
    pub fn value(&self) -> Estimate {
        self.per_population[self.worst].1
    }

    pub fn worst_name(&self) -> &str {
        &self.per_population[self.worst].0
    }
}

/// Lowest mean payoff of `subject` over the model's populations. Certified
/// only relative to that finite set.
pub fn security_level(
    subject: &StrategyProgram,
    model: &PopulationModel,
    config: &GameConfig,
    table: &PayoffTable,
    trials: usize,
) -> Result<SecurityLevel, AnalysisError> {
    model.validate()?;
    let per_population = model
        .gamma
        .iter()
        .map(|a| Ok((a.name.clone(), estimate(subject, model, &a.program, config, table, trials)?)))
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let worst = per_population
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.mean.total_cmp(&b.1 .1.mean))
        .map(|(i, _)| i)
        .expect("nonempty");
    Ok(SecurityLevel { per_population, worst })
}

#[derive(Clone, Debug)]
pub struct AnalysisReport {
    pub strategy: String,
    pub n: u64,
    pub q: f64,
    pub r: f64,
    /// Security level and the population attaining it.
    pub sl: Estimate,
    pub worst_population: String,
    /// Mean payoff averaged uniformly over the model's populations.
    pub mu: Estimate,
    /// Best mean payoff found in the worst population.
    pub h: Estimate,
    pub h_witness: String,
    /// `SL / h`, undefined when `h <= 0`.
    pub cr: Option<f64>,
    /// `h - SL`.
    pub best_response_gap: f64,
    /// `h - N * R`: observed excess of the benchmark over full cooperation.
    pub beta_bound: f64,
    /// The OFT constant for this `q` and `r`, when `q > 0`.
    pub oft_constant: Option<f64>,
    pub populations: Vec<String>,
}

impl AnalysisReport {
    pub const CSV_HEADER: &'static str =
        "strategy,N,q,r,SL,SL_se,worst_population,mu,mu_se,h,h_se,h_witness,CR,best_response_gap,beta_bound,oft_constant";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "undefined".into());
        format!(
            "{},{},{},{},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6},{},{},{:.6},{:.6},{}",
            self.strategy,
            self.n,
            self.q,
            self.r,
            self.sl.mean,
            self.sl.se,
            self.worst_population,
            self.mu.mean,
            self.mu.se,
            self.h.mean,
            self.h.se,
            self.h_witness,
            opt(self.cr),
            self.best_response_gap,
            self.beta_bound,
            opt(self.oft_constant),
        )
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "strategy           {}", self.strategy)?;
        writeln!(f, "N, q, r            {}, {}, {}", self.n, self.q, self.r)?;
        writeln!(f, "populations        {}", self.populations.join(", "))?;
        writeln!(f, "security level     {}  (worst: {}; relative to the populations above)", self.sl, self.worst_population)?;
        writeln!(f, "expected payoff    {}", self.mu)?;
        writeln!(f, "benchmark h        {}  ({})", self.h, self.h_witness)?;
        match self.cr {
            Some(cr) => writeln!(f, "competitive ratio  {cr:.6}")?,
            None => writeln!(f, "competitive ratio  undefined (h <= 0)")?,
        }
        writeln!(f, "best-response gap  {:.4}", self.best_response_gap)?;
        writeln!(f, "beta (h - N*R)     {:.4}", self.beta_bound)?;
        if let Some(c) = self.oft_constant {
            writeln!(f, "OFT constant       {c:.4}")?;
        }
        Ok(())
    }
}

/// Settings for the benchmark search behind `h`.
#[derive(Clone, Debug)]
pub struct BenchmarkSearch {
    pub space: SearchSpace,
    /// Trials used to rank enumerated candidates before the winner is
    /// re-estimated with the full trial count.
    pub screen_trials: usize,
}

impl Default for BenchmarkSearch {
    fn default() -> Self {
        BenchmarkSearch {
            space: SearchSpace {
                size_bound: 4,
                max_sections: 2,
                max_guard_terms: 1,
                counter: false,
            },
            screen_trials: 32,
        }
    }
}

/// Security level, benchmark and competitive ratio of `subject`.
///
/// The benchmark `h` is the best mean payoff, in the population attaining the
/// security level, over the subject itself, every builtin, and the winner of
/// an exhaustive search over small programs.
pub fn competitive_ratio(
    subject: &StrategyProgram,
    model: &PopulationModel,
    config: &GameConfig,
    table: &PayoffTable,
    trials: usize,
    bench: &BenchmarkSearch,
) -> Result<AnalysisReport, AnalysisError> {
    let sl = security_level(subject, model, config, table, trials)?;
    let worst = &model.gamma[sl.worst].program;
    let mut candidates: Vec<StrategyProgram> = vec![subject.clone()];
    candidates.extend(library::list().iter().map(|b| b.compile(config)));
    let screen = bench.screen_trials.max(1);
    let found = search(&bench.space, config, |cand| {
        total_over_trials(cand, model, worst, config, table, screen).ok()
    })?;
    let mut winner = found.program;
    winner.name = format!("search:{}", found.source.lines().skip(1).collect::<Vec<_>>().join("; "));
    candidates.push(winner);

    let mut h = sl.value();
    let mut h_witness = subject.name.clone();
    for cand in &candidates[1..] {
        let e = estimate(cand, model, worst, config, table, trials)?;
        if e.mean > h.mean {
            h = e;
            h_witness = cand.name.clone();
        }
    }
    let means: Vec<&Estimate> = sl.per_population.iter().map(|(_, e)| e).collect();
    let k = means.len() as f64;
    let mu = Estimate {
        mean: means.iter().map(|e| e.mean).sum::<f64>() / k,
        se: means.iter().map(|e| e.se * e.se).sum::<f64>().sqrt() / k,
        trials,
        exact: means.iter().all(|e| e.exact),
    };
    let r = expected_rematch_delay(config);
    let nr = to_f64(table.r) * config.n as f64;
    let slv = sl.value();
    Ok(AnalysisReport {
        strategy: subject.name.clone(),
        n: config.n,
        q: model.q,
        r,
        sl: slv,
        worst_population: sl.worst_name().to_string(),
        mu,
        h,
        h_witness,
        cr: (h.mean > 0.0).then(|| slv.mean / h.mean),
        best_response_gap: h.mean - slv.mean,
        beta_bound: h.mean - nr,
        oft_constant: oft_constant(model.q, r, table).ok(),
        populations: model.gamma.iter().map(|a| a.name.clone()).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct FirstPartnerReport {
    /// Subject's payoff when its first partner is cooperative.
    pub cooperative: Estimate,
    /// Subject's payoff when its first partner is drawn uniformly.
    pub random: Estimate,
    /// Paired difference, cooperative minus random.
    pub difference: Estimate,
}

impl FirstPartnerReport {
    /// One-sided 95% test that the paired difference is not negative.
    pub fn cooperative_not_worse(&self) -> bool {
        self.difference.mean - 1.645 * self.difference.se >= 0.0
    }
}

/// Paired runs of a full population. Player 0 plays `subject`; the rest are
/// built from `others`. For each seed the subject's first partner is once a
/// uniformly chosen player running a program in `cooperative`, and once a
/// uniformly chosen player; everyone else is paired at random. Both runs of a
/// seed share the rng stream that drives later rematches.
pub fn first_partner_experiment(
    subject: &StrategyProgram,
    others: &[(StrategyProgram, usize)],
    cooperative: &[&str],
    config: &GameConfig,
    table: &PayoffTable,
    seeds: usize,
) -> Result<FirstPartnerReport, AnalysisError> {
    let mut programs = vec![subject.clone()];
    let mut assignment = vec![0usize];
    for (i, (p, n)) in others.iter().enumerate() {
        programs.push(p.clone());
        assignment.extend(std::iter::repeat_n(i + 1, *n));
    }
    let coop_players: Vec<usize> = (1..assignment.len())
        .filter(|&i| cooperative.contains(&programs[assignment[i]].name.as_str()))
        .collect();
    if coop_players.is_empty() {
        return Err(AnalysisError::InvalidModel("no cooperative player besides the subject".into()));
    }
    let everyone: Vec<usize> = (1..assignment.len()).collect();
    let run = |seed: u64, first: usize| -> Result<f64, AnalysisError> {
        let cfg = GameConfig { seed, ..config.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
        let rest: Vec<usize> = everyone.iter().copied().filter(|&i| i != first).collect();
        let (mut pairs, _) = rematch(&rest, &mut rng);
        pairs.push((0, first));
        let pop = Population::new(&programs, &assignment, &cfg)?
            .recording(false)
            .with_initial_pairs(&pairs)?;
        Ok(to_f64(pop.run(&cfg, table)?.payoff(0)))
    };
    let mut coop = Vec::with_capacity(seeds);
    let mut random = Vec::with_capacity(seeds);
    for i in 0..seeds {
        let seed = trial_seed(config.seed, i);
        let mut pick = ChaCha8Rng::seed_from_u64(seed);
        let c = coop_players[pick.gen_range(0..coop_players.len())];
        let u = everyone[pick.gen_range(0..everyone.len())];
        coop.push(run(seed, c)?);
        random.push(run(seed, u)?);
    }
    let diff: Vec<f64> = coop.iter().zip(&random).map(|(a, b)| a - b).collect();
    Ok(FirstPartnerReport {
        cooperative: Estimate::from_samples(&coop),
        random: Estimate::from_samples(&random),
        difference: Estimate::from_samples(&diff),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameConfig;

    #[test]
    fn constant_examples() {
        let t = PayoffTable::intro();
        assert_eq!(oft_constant(1.0, 0.0, &t).unwrap(), 3.0);
        assert_eq!(oft_constant(0.25, 2.0, &t).unwrap(), 20.0);
        assert!(matches!(oft_constant(0.0, 0.0, &t), Err(AnalysisError::ZeroQ)));
        let s0 = PayoffTable::from_integers(3, 2, 1, 0);
        assert_eq!(oft_constant(1.0, 0.0, &s0).unwrap(), 2.0);
    }

    #[test]
    fn deterministic_levels_are_exact() {
        let cfg = GameConfig::opd(10, 1, 1);
        let model = PopulationModel::new(0.0, &cfg).with_gamma(&["all-AllD"], &cfg).unwrap();
        let all_d = library::get("AllD", &cfg).unwrap();
        let all_c = library::get("AllC", &cfg).unwrap();
        let t = PayoffTable::intro();
        let sl = security_level(&all_d, &model, &cfg, &t, 10).unwrap();
        assert_eq!(sl.value(), Estimate::exact(-10.0));
        assert_eq!(security_level(&all_c, &model, &cfg, &t, 10).unwrap().value().mean, -20.0);
    }

    #[test]
    fn oft_loses_about_four_per_bad_partner() {
        let cfg = GameConfig::opd(200, 1, 1).with_instantaneous_rematch(true).with_seed(3);
        let model = PopulationModel::new(0.5, &cfg);
        let oft = library::get("OFT", &cfg).unwrap();
        let sl = security_level(&oft, &model, &cfg, &PayoffTable::intro(), 400).unwrap();
        assert_eq!(sl.worst_name(), "all-AllD");
        let v = sl.value();
        assert!((v.mean - 196.0).abs() < 4.0 * v.se + 0.5, "{v}");
    }
}
