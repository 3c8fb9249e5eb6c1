//! Best responses, equilibrium checks, security levels and competitive ratios.

pub mod enumerate;
pub mod pool;

use thiserror::Error;

use crate::ftpd::{match_totals, run_match};
use crate::game::{GameConfig, GameError, Payoff, PayoffTable};
use crate::vm::StrategyProgram;

pub use enumerate::{search, search_size, Found, SearchSpace, SEARCH_LIMIT};
pub use pool::{
    competitive_ratio, first_partner_experiment, oft_constant, security_level, Adversary, AnalysisReport, Estimate,
    FirstPartnerReport, PopulationModel, SecurityLevel,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("search space too large: about {estimate} candidates (limit {limit}); lower the size bound")]
    SearchTooLarge { estimate: u64, limit: u64 },
    #[error("no candidate program in the search space")]
    NoCandidates,
    #[error("q must be positive")]
    ZeroQ,
    #[error("invalid population model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Best reply found by exhaustive search against a fixed opponent, as the
/// first player.
pub fn best_response(
    opponent: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
    space: &SearchSpace,
) -> Result<Found, AnalysisError> {
    search(space, config, |cand| match_totals(cand, opponent, config, table).ok().map(|t| t[0]))
}

/// Best reply as the second player against `opponent` in first seat.
fn best_response_second(
    opponent: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
    space: &SearchSpace,
) -> Result<Found, AnalysisError> {
    search(space, config, |cand| match_totals(opponent, cand, config, table).ok().map(|t| t[1]))
}

#[derive(Clone, Debug)]
pub struct Deviation {
    /// 0 or 1: which player deviates.
    pub player: usize,
    pub witness: Found,
    pub gain: Payoff,
}

#[derive(Clone, Debug)]
pub struct EquilibriumVerdict {
    pub payoffs: [Payoff; 2],
    /// A profitable deviation within the search space, if any.
    pub deviation: Option<Deviation>,
    /// Best payoff each player could reach by deviating.
    pub best_replies: [Payoff; 2],
    /// Both players receive `N * R`.
    pub cooperative: bool,
}

impl EquilibriumVerdict {
    pub fn is_nash(&self) -> bool {
        self.deviation.is_none()
    }
}

/// Checks whether either player gains by switching to any program in `space`.
pub fn equilibrium_check(
    sigma1: &StrategyProgram,
    sigma2: &StrategyProgram,
    config: &GameConfig,
    table: &PayoffTable,
    space: &SearchSpace,
) -> Result<EquilibriumVerdict, AnalysisError> {
    let base = run_match(sigma1, sigma2, config, table)?.totals;
    let first = best_response(sigma2, config, table, space)?;
    let second = best_response_second(sigma1, config, table, space)?;
    let best_replies = [first.payoff, second.payoff];
    let mut deviation = None;
    for (player, found) in [(0, first), (1, second)] {
        let gain = found.payoff - base[player];
        if gain > Payoff::default() && deviation.is_none() {
            deviation = Some(Deviation {
                player,
                witness: found,
                gain,
            });
        }
    }
    let nr = table.r * Payoff::from_integer(config.n as i64);
    Ok(EquilibriumVerdict {
        payoffs: base,
        deviation,
        best_replies,
        cooperative: base[0] == nr && base[1] == nr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;

    fn small() -> SearchSpace {
        SearchSpace::new(5)
    }

    #[test]
    fn best_reply_to_all_c_defects() {
        let cfg = GameConfig::ftpd(3);
        let found = best_response(&library::get("AllC", &cfg).unwrap(), &cfg, &PayoffTable::intro(), &small()).unwrap();
        assert_eq!(found.payoff, Payoff::from_integer(6));
        assert_eq!(found.source, "strategy candidate\nalways play D\n");
    }

    #[test]
    fn best_reply_to_all_d_depends_on_the_sign_of_p() {
        let cfg = GameConfig::ftpd(3);
        let all_d = library::get("AllD", &cfg).unwrap();
        // With P < 0 = mixed wait, waiting beats defecting.
        let intro = best_response(&all_d, &cfg, &PayoffTable::intro(), &small()).unwrap();
        assert_eq!(intro.payoff, Payoff::from_integer(0));
        let positive = PayoffTable::from_integers(3, 2, 1, 0).with_h(Payoff::from_integer(-1));
        let found = best_response(&all_d, &cfg, &positive, &small()).unwrap();
        assert_eq!(found.payoff, Payoff::from_integer(3));
        assert_eq!(found.source, "strategy candidate\nalways play D\n");
    }

    #[test]
    fn equilibrium_verdicts() {
        let cfg = GameConfig::ftpd(5);
        let t = PayoffTable::intro();
        let grim = library::get("GRIM", &cfg).unwrap();
        let v = equilibrium_check(&grim, &grim, &cfg, &t, &small()).unwrap();
        assert!(v.is_nash() && v.cooperative);

        let all_c = library::get("AllC", &cfg).unwrap();
        let v = equilibrium_check(&all_c, &all_c, &cfg, &t, &small()).unwrap();
        let dev = v.deviation.clone().expect("defection pays");
        assert_eq!(dev.gain, Payoff::from_integer(5));
        assert!(v.cooperative);

        let cfg4 = GameConfig::ftpd(4);
        let all_d = library::get("AllD", &cfg4).unwrap();
        let positive = PayoffTable::from_integers(3, 2, 1, 0).with_h(Payoff::from_integer(-1));
        let v = equilibrium_check(&all_d, &all_d, &cfg4, &positive, &small()).unwrap();
        assert!(v.is_nash() && !v.cooperative);
    }

    #[test]
    fn argmax_dominates_the_catalog() {
        let cfg = GameConfig::ftpd(4);
        let t = PayoffTable::intro();
        for opp in library::list().iter().filter(|b| b.mode.is_none()) {
            let opponent = opp.compile(&cfg);
            let found = best_response(&opponent, &cfg, &t, &small()).unwrap();
            for b in library::list().iter().filter(|b| b.mode.is_none()) {
                let own = run_match(&b.compile(&cfg), &opponent, &cfg, &t).unwrap().totals[0];
                assert!(found.payoff >= own, "{} vs {}", b.name, opp.name);
            }
        }
    }

    #[test]
    fn oversized_search_is_refused() {
        let cfg = GameConfig::ftpd(6);
        let err = best_response(&library::get("GRIM", &cfg).unwrap(), &cfg, &PayoffTable::intro(), &SearchSpace::new(12));
        assert!(matches!(err, Err(AnalysisError::SearchTooLarge { .. })));
    }
}
