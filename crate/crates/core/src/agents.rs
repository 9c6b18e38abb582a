//! Decision-maker policies: static Nash, best response to last period's
//! market, and scripted replays for deterministic tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{golden_max, MarketModel};

/// Fraction of total baseline production below which an opponents' aggregate
/// counts as a degenerate (near-monopoly) state for the best-response agent.
pub const MONOPOLY_FLOOR_FRACTION: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("production quantity must be a finite non-negative number, got {0}")]
    BadQuantity(f64),
    #[error("investment percent {percent} is outside [0, {max}]")]
    InvestPercentOutOfBounds { percent: f64, max: f64 },
    #[error("script must contain at least one decision")]
    EmptyScript,
    #[error(
        "opponents' aggregate {others_quantity} is below the monopoly floor {floor}; \
         best response is undefined in this regime"
    )]
    MonopolyRegime { others_quantity: f64, floor: f64 },
}

/// One firm's action pair for a period. The absolute investment is always
/// the percentage applied to the firm's baseline profit, so the three fields
/// stay mutually consistent by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub quantity: f64,
    /// Investment as a percentage of baseline profit, in [0, 100*cap].
    pub invest_percent: f64,
    /// Absolute investment, invest_percent/100 times baseline profit.
    pub investment: f64,
}

impl Decision {
    pub fn new(
        model: &MarketModel,
        firm: usize,
        quantity: f64,
        invest_percent: f64,
    ) -> Result<Self, AgentError> {
        if !quantity.is_finite() || quantity < 0.0 {
            return Err(AgentError::BadQuantity(quantity));
        }
        let max = model.invest_cap_percent();
        if !invest_percent.is_finite() || invest_percent < 0.0 || invest_percent > max {
            return Err(AgentError::InvestPercentOutOfBounds {
                percent: invest_percent,
                max,
            });
        }
        Ok(Self {
            quantity,
            invest_percent,
            investment: invest_percent / 100.0 * model.baseline_profits[firm],
        })
    }

    /// The baseline pair: baseline quantity at the full investment cap.
    pub fn nash(model: &MarketModel, firm: usize) -> Self {
        Self {
            quantity: model.spec.baseline_quantities[firm],
            invest_percent: model.invest_cap_percent(),
            investment: model.baseline_investments[firm],
        }
    }
}

/// The exact feedback a firm receives about one period: its own actions and
/// outcomes plus the market aggregates, nothing about opponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub period_index: usize,
    pub own_quantity: f64,
    pub own_invest_percent: f64,
    pub own_unit_cost: f64,
    pub total_quantity: f64,
    pub market_price: f64,
    pub own_profit: f64,
}

/// Which branch produced a best response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BrRoute {
    /// Closed-form candidate at the investment cap won.
    BoundaryCap,
    /// Closed-form candidate at zero investment won (out-of-regime market).
    BoundaryZero,
    /// General-elasticity numeric search.
    Numeric,
}

/// The static Nash policy: the baseline pair every period, independent of
/// market feedback.
pub fn nash_decide(model: &MarketModel, firm: usize) -> Decision {
    Decision::nash(model, firm)
}

/// Profit-maximizing action pair against a fixed opponents' aggregate from
/// the previous period.
pub fn best_response(
    model: &MarketModel,
    firm: usize,
    others_quantity_prev: f64,
) -> Result<Decision, AgentError> {
    best_response_detailed(model, firm, others_quantity_prev).map(|(d, _)| d)
}

/// [`best_response`] plus the branch that produced it, for run-log auditing.
pub fn best_response_detailed(
    model: &MarketModel,
    firm: usize,
    others_quantity_prev: f64,
) -> Result<(Decision, BrRoute), AgentError> {
    let floor = MONOPOLY_FLOOR_FRACTION * model.total_baseline;
    if !(others_quantity_prev >= floor) {
        return Err(AgentError::MonopolyRegime {
            others_quantity: others_quantity_prev,
            floor,
        });
    }
    let (quantity, investment, route) = best_response_point(model, firm, others_quantity_prev);
    let invest_percent = if model.baseline_profits[firm] > 0.0 {
        100.0 * investment / model.baseline_profits[firm]
    } else {
        0.0
    };
    Ok((
        Decision {
            quantity,
            invest_percent,
            investment,
        },
        route,
    ))
}

/// Core best-response map without the monopoly-floor guard. Continuously
/// extended to produce zero output when the opponents produce nothing; the
/// convergence probe iterates this map through states the agent-facing
/// wrapper refuses.
pub(crate) fn best_response_point(
    model: &MarketModel,
    firm: usize,
    others: f64,
) -> (f64, f64, BrRoute) {
    let cap = model.invest_cap(firm);
    if others <= 0.0 {
        return (0.0, 0.0, BrRoute::BoundaryCap);
    }
    if model.spec.elasticity == -1.0 {
        // Interior joint optima are ruled out, so only the investment
        // boundaries compete; each has a closed-form quantity.
        let evaluate = |investment: f64| {
            let w = model.unit_cost_unchecked(investment);
            let quantity = ((model.scale_a * others / w).sqrt() - others).max(0.0);
            let profit = model.profit_unchecked(others, quantity, investment);
            (quantity, profit)
        };
        let (q_cap, profit_cap) = evaluate(cap);
        let (q_zero, profit_zero) = evaluate(0.0);
        // Ties break toward full investment, then higher quantity.
        if profit_cap >= profit_zero {
            (q_cap, cap, BrRoute::BoundaryCap)
        } else {
            (q_zero, 0.0, BrRoute::BoundaryZero)
        }
    } else {
        let (quantity, investment) = numeric_best_response(model, firm, others);
        (quantity, investment, BrRoute::Numeric)
    }
}

/// Grid-plus-refine maximization for general elasticity: for each candidate
/// investment the quantity is bracketed by a coarse scan and polished with
/// golden-section search; investment then follows its closed-form optimum.
fn numeric_best_response(model: &MarketModel, firm: usize, others: f64) -> (f64, f64) {
    let cap = model.invest_cap(firm);
    let w_floor = model.unit_cost_unchecked(cap);
    // Past this output the price sits below the best attainable unit cost.
    let eps = model.spec.elasticity;
    let q_hi = ((model.scale_a / w_floor).powf(-1.0 / eps) - others).max(0.0);
    if q_hi == 0.0 {
        return (0.0, 0.0);
    }

    let best_quantity_for = |investment: f64| -> f64 {
        let coarse = 256;
        let mut best_q = 0.0;
        let mut best_profit = model.profit_unchecked(others, 0.0, investment);
        for i in 0..=coarse {
            let q = q_hi * i as f64 / coarse as f64;
            let profit = model.profit_unchecked(others, q, investment);
            if profit > best_profit {
                best_profit = profit;
                best_q = q;
            }
        }
        let cell = q_hi / coarse as f64;
        golden_max(
            (best_q - cell).max(0.0),
            (best_q + cell).min(q_hi),
            1e-9 * (1.0 + q_hi),
            |q| model.profit_unchecked(others, q, investment),
        )
    };

    let grid = 21;
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..grid {
        let b = cap * i as f64 / (grid - 1) as f64;
        let q = best_quantity_for(b);
        let profit = model.profit_unchecked(others, q, b);
        // Strict improvement keeps ties resolved toward higher investment,
        // which the ascending scan visits later.
        if profit >= best.2 {
            best = (q, b, profit);
        }
    }
    let (mut q, mut b, mut profit) = best;
    for _ in 0..64 {
        b = model.optimal_investment_for_quantity(firm, q);
        q = best_quantity_for(b);
        let next = model.profit_unchecked(others, q, b);
        if (next - profit).abs() <= 1e-12 * (1.0 + profit.abs()) {
            profit = next;
            break;
        }
        profit = next;
    }
    let _ = profit;
    (q, b)
}

/// Replays a fixed decision list; periods past the end repeat the last entry.
pub fn scripted_decide(script: &[Decision], period_index: usize) -> Result<Decision, AgentError> {
    if script.is_empty() {
        return Err(AgentError::EmptyScript);
    }
    Ok(script[period_index.min(script.len() - 1)])
}
