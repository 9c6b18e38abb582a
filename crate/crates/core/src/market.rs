//! Market mathematics for the augmented Cournot framework.
//!
//! A market is parameterized by baseline (status quo) production quantities,
//! a baseline price, a constant elasticity, and an investment cap fraction.
//! From those exogenous inputs [`MarketModel::derive`] reverse-engineers the
//! baseline equilibrium: per-firm unit costs, naive profits, capped
//! investments, and the Cobb-Douglas investment-to-cost curve. Everything
//! downstream (pricing, profits, Nash verification) is a pure function of the
//! derived model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative tolerance for equality assertions on derived quantities.
pub const REL_TOL: f64 = 1e-9;

/// Largest market share a single firm may hold (non-monopolistic condition).
pub const MAX_SHARE: f64 = 0.95;

/// Total production below `QUANTITY_FLOOR_FRACTION * total_baseline` is
/// rejected: the price function is undefined at zero output for negative
/// elasticity.
pub const QUANTITY_FLOOR_FRACTION: f64 = 1e-6;

/// Absolute profit tolerance used by [`MarketModel::verify_nash`].
pub const NASH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("market needs at least two firms, got {0}")]
    TooFewFirms(usize),
    #[error("baseline quantity for firm {firm} must be positive, got {value}")]
    NonPositiveBaselineQuantity { firm: usize, value: f64 },
    #[error("firm {firm} holds share {share:.4}; shares of {MAX_SHARE} or more are monopolistic")]
    MonopolyShare { firm: usize, share: f64 },
    #[error("elasticity must be negative, got {0}")]
    NonNegativeElasticity(f64),
    #[error("baseline price must be positive and finite, got {0}")]
    NonPositivePrice(f64),
    #[error("invest fraction cap must lie strictly inside (0, 1), got {0}")]
    InvalidInvestCap(f64),
    #[error("baseline cost {cost} for firm {firm} falls outside (0, {price}); the spec is degenerate")]
    DegenerateCost { firm: usize, cost: f64, price: f64 },
    #[error("total quantity must be positive, got {0}")]
    NonPositiveQuantity(f64),
    #[error("investment {investment} for firm {firm} is outside [0, {cap}]")]
    InvestmentOutOfBounds {
        firm: usize,
        investment: f64,
        cap: f64,
    },
    #[error("firm index {index} out of range for {firms} firms")]
    FirmIndex { index: usize, firms: usize },
    #[error("deviation grid needs at least 3 points per axis, got {0}")]
    GridTooCoarse(usize),
    #[error("deviation grid radius must lie in (0, 1), got {0}")]
    BadGridRadius(f64),
}

/// Exogenous market parameters: everything needed to instantiate a market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    /// Baseline production per firm (interchangeably physical units or
    /// percentage shares).
    pub baseline_quantities: Vec<f64>,
    /// Baseline market price, 1 unless stated otherwise.
    #[serde(default = "default_price")]
    pub baseline_price: f64,
    /// Constant price-production elasticity; must be negative.
    #[serde(default = "default_elasticity")]
    pub elasticity: f64,
    /// Fraction of baseline profit a firm may invest per period.
    #[serde(default = "default_invest_cap")]
    pub invest_fraction_cap: f64,
}

fn default_price() -> f64 {
    1.0
}

fn default_elasticity() -> f64 {
    -1.0
}

fn default_invest_cap() -> f64 {
    0.2
}

impl MarketSpec {
    /// Spec with the default price (1), elasticity (-1), and cap (0.2).
    pub fn new(baseline_quantities: Vec<f64>) -> Self {
        Self {
            baseline_quantities,
            baseline_price: default_price(),
            elasticity: default_elasticity(),
            invest_fraction_cap: default_invest_cap(),
        }
    }

    pub fn n_firms(&self) -> usize {
        self.baseline_quantities.len()
    }

    pub fn total_baseline(&self) -> f64 {
        self.baseline_quantities.iter().sum()
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if self.n_firms() < 2 {
            return Err(MarketError::TooFewFirms(self.n_firms()));
        }
        for (firm, &q) in self.baseline_quantities.iter().enumerate() {
            if !(q > 0.0) || !q.is_finite() {
                return Err(MarketError::NonPositiveBaselineQuantity { firm, value: q });
            }
        }
        let total = self.total_baseline();
        for (firm, &q) in self.baseline_quantities.iter().enumerate() {
            let share = q / total;
            if share >= MAX_SHARE {
                return Err(MarketError::MonopolyShare { firm, share });
            }
        }
        if !(self.elasticity < 0.0) || !self.elasticity.is_finite() {
            return Err(MarketError::NonNegativeElasticity(self.elasticity));
        }
        if !(self.baseline_price > 0.0) || !self.baseline_price.is_finite() {
            return Err(MarketError::NonPositivePrice(self.baseline_price));
        }
        let c = self.invest_fraction_cap;
        if !(c > 0.0 && c < 1.0) {
            return Err(MarketError::InvalidInvestCap(c));
        }
        Ok(())
    }
}

/// A firm's profit evaluation point: its own action pair against a fixed
/// aggregate of everyone else's production.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitQuery {
    pub firm_index: usize,
    /// Aggregate production of all other firms.
    pub others_quantity: f64,
    pub quantity: f64,
    pub investment: f64,
}

/// The derived market: spec plus every constant the baseline equilibrium
/// pins down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub spec: MarketSpec,
    /// Total baseline production.
    pub total_baseline: f64,
    /// Price-function scale: price(Q) = scale_a * Q^elasticity.
    pub scale_a: f64,
    /// Baseline per-unit production costs, one per firm.
    pub baseline_costs: Vec<f64>,
    /// Baseline (naive) profits, one per firm.
    pub baseline_profits: Vec<f64>,
    /// Baseline investments, cap fraction times baseline profit.
    pub baseline_investments: Vec<f64>,
    /// Cobb-Douglas cost-curve coefficient (negative).
    pub cobb_k1: f64,
    /// Cobb-Douglas exponent; 0.5 by construction.
    pub cobb_k2: f64,
    /// Cobb-Douglas intercept; equals the baseline price.
    pub cobb_k3: f64,
}

impl MarketModel {
    /// Derives all baseline constants from a market spec.
    ///
    /// The unit cost comes from the Cournot first-order condition at the
    /// baseline, the naive profit from the margin, and the Cobb-Douglas
    /// curve from fitting (investment, cost) at the baseline point with a
    /// zero-investment cost equal to the baseline price.
    pub fn derive(spec: MarketSpec) -> Result<Self, MarketError> {
        spec.validate()?;
        let total = spec.total_baseline();
        let p_hat = spec.baseline_price;
        let eps = spec.elasticity;
        let c = spec.invest_fraction_cap;

        // The elasticity used throughout the experiments is exactly -1;
        // evaluating powf there would smear the closed-form identities
        // (w_i = p*(1 - share), price(Q_hat) = p_hat) by one ulp.
        let unit_elasticity = eps == -1.0;
        let scale_a = if unit_elasticity {
            total * p_hat
        } else {
            total.powf(-eps) * p_hat
        };

        let mut costs = Vec::with_capacity(spec.n_firms());
        let mut profits = Vec::with_capacity(spec.n_firms());
        let mut investments = Vec::with_capacity(spec.n_firms());
        for (firm, &q) in spec.baseline_quantities.iter().enumerate() {
            let cost = if unit_elasticity {
                p_hat * (1.0 - q / total)
            } else {
                eps * scale_a * q * total.powf(eps - 1.0) + p_hat
            };
            if !(cost > 0.0 && cost < p_hat) {
                return Err(MarketError::DegenerateCost {
                    firm,
                    cost,
                    price: p_hat,
                });
            }
            let profit = (p_hat - cost) * q;
            costs.push(cost);
            profits.push(profit);
            investments.push(c * profit);
        }

        Ok(Self {
            total_baseline: total,
            scale_a,
            baseline_costs: costs,
            baseline_profits: profits,
            baseline_investments: investments,
            cobb_k1: -(-eps * p_hat / (total * c)).sqrt(),
            cobb_k2: 0.5,
            cobb_k3: p_hat,
            spec,
        })
    }

    pub fn n_firms(&self) -> usize {
        self.spec.n_firms()
    }

    /// Baseline share of one firm.
    pub fn share(&self, firm: usize) -> f64 {
        self.spec.baseline_quantities[firm] / self.total_baseline
    }

    /// Aggregate baseline production of everyone but `firm`.
    pub fn others_baseline(&self, firm: usize) -> f64 {
        self.total_baseline - self.spec.baseline_quantities[firm]
    }

    /// Per-firm investment ceiling, cap fraction times baseline profit.
    pub fn invest_cap(&self, firm: usize) -> f64 {
        self.baseline_investments[firm]
    }

    /// Investment ceiling expressed as a percentage of baseline profit.
    pub fn invest_cap_percent(&self) -> f64 {
        100.0 * self.spec.invest_fraction_cap
    }

    /// Profit earned at the baseline action pair: (1 - c) times the naive
    /// profit. This is the per-firm Nash payoff.
    pub fn nash_profit(&self, firm: usize) -> f64 {
        (1.0 - self.spec.invest_fraction_cap) * self.baseline_profits[firm]
    }

    /// Smallest admissible total production for a period.
    pub fn quantity_floor(&self) -> f64 {
        QUANTITY_FLOOR_FRACTION * self.total_baseline
    }

    fn check_firm(&self, firm: usize) -> Result<(), MarketError> {
        if firm >= self.n_firms() {
            return Err(MarketError::FirmIndex {
                index: firm,
                firms: self.n_firms(),
            });
        }
        Ok(())
    }

    fn check_investment(&self, firm: usize, investment: f64) -> Result<(), MarketError> {
        let cap = self.invest_cap(firm);
        // Tolerate one ulp of slack at the cap; percent-to-investment
        // conversion and the cap itself are computed by the same expression.
        if !investment.is_finite() || investment < 0.0 || investment > cap * (1.0 + 1e-12) {
            return Err(MarketError::InvestmentOutOfBounds {
                firm,
                investment,
                cap,
            });
        }
        Ok(())
    }

    /// Market price at a total production level. Rejects non-positive totals
    /// rather than returning an infinite price.
    pub fn price(&self, total_quantity: f64) -> Result<f64, MarketError> {
        if !(total_quantity > 0.0) || !total_quantity.is_finite() {
            return Err(MarketError::NonPositiveQuantity(total_quantity));
        }
        Ok(self.price_unchecked(total_quantity))
    }

    pub(crate) fn price_unchecked(&self, total_quantity: f64) -> f64 {
        if self.spec.elasticity == -1.0 {
            self.scale_a / total_quantity
        } else {
            self.scale_a * total_quantity.powf(self.spec.elasticity)
        }
    }

    /// Per-unit production cost after investing `investment` this period.
    pub fn unit_cost(&self, firm: usize, investment: f64) -> Result<f64, MarketError> {
        self.check_firm(firm)?;
        self.check_investment(firm, investment)?;
        Ok(self.unit_cost_unchecked(investment))
    }

    pub(crate) fn unit_cost_unchecked(&self, investment: f64) -> f64 {
        self.cobb_k1 * investment.powf(self.cobb_k2) + self.cobb_k3
    }

    /// Profit for one firm holding everyone else fixed. Producing nothing
    /// costs exactly the investment.
    pub fn profit(&self, query: &ProfitQuery) -> Result<f64, MarketError> {
        self.check_firm(query.firm_index)?;
        self.check_investment(query.firm_index, query.investment)?;
        if query.quantity < 0.0 || !query.quantity.is_finite() {
            return Err(MarketError::NonPositiveQuantity(query.quantity));
        }
        if query.quantity == 0.0 {
            return Ok(-query.investment);
        }
        let total = query.others_quantity + query.quantity;
        if !(total > 0.0) {
            return Err(MarketError::NonPositiveQuantity(total));
        }
        Ok(self.profit_unchecked(query.others_quantity, query.quantity, query.investment))
    }

    pub(crate) fn profit_unchecked(&self, others: f64, quantity: f64, investment: f64) -> f64 {
        if quantity == 0.0 {
            return -investment;
        }
        let price = self.price_unchecked(others + quantity);
        (price - self.unit_cost_unchecked(investment)) * quantity - investment
    }

    /// Grid-plus-refinement check that no firm can profit from a unilateral
    /// deviation away from the baseline pair.
    ///
    /// For each firm the opponents are pinned at their baseline decisions,
    /// profit is evaluated on a `grid_points` x `grid_points` grid over
    /// quantity in [(1-r)q, (1+r)q] and investment in [0, cap], and the best
    /// grid point is polished by coordinate ascent. The report passes when
    /// no refined deviation beats the baseline profit by more than
    /// [`NASH_TOLERANCE`].
    pub fn verify_nash(
        &self,
        grid_radius: f64,
        grid_points: usize,
    ) -> Result<DeviationReport, MarketError> {
        if grid_points < 3 {
            return Err(MarketError::GridTooCoarse(grid_points));
        }
        if !(grid_radius > 0.0 && grid_radius < 1.0) {
            return Err(MarketError::BadGridRadius(grid_radius));
        }
        let mut firms = Vec::with_capacity(self.n_firms());
        for firm in 0..self.n_firms() {
            firms.push(self.firm_deviation(firm, grid_radius, grid_points));
        }
        let passed = firms.iter().all(|f| f.margin <= NASH_TOLERANCE);
        Ok(DeviationReport {
            grid_radius,
            grid_points,
            tolerance: NASH_TOLERANCE,
            firms,
            passed,
        })
    }

    fn firm_deviation(&self, firm: usize, radius: f64, points: usize) -> FirmDeviation {
        let q_hat = self.spec.baseline_quantities[firm];
        let b_hat = self.baseline_investments[firm];
        let others = self.others_baseline(firm);
        let cap = self.invest_cap(firm);
        let nash_profit = self.profit_unchecked(others, q_hat, b_hat);

        let q_lo = (1.0 - radius) * q_hat;
        let q_hi = (1.0 + radius) * q_hat;
        let steps = (points - 1) as f64;
        let mut best = (q_hat, b_hat, nash_profit);
        for qi in 0..points {
            let q = q_lo + (q_hi - q_lo) * qi as f64 / steps;
            for bi in 0..points {
                let b = cap * bi as f64 / steps;
                let profit = self.profit_unchecked(others, q, b);
                if profit > best.2 {
                    best = (q, b, profit);
                }
            }
        }
        let best_grid_profit = best.2;

        // Coordinate ascent from the best grid point. The investment leg is
        // closed-form for k2 = 0.5; the quantity leg is closed-form at unit
        // elasticity and golden-section otherwise.
        let (mut q, mut b, mut profit) = best;
        for _ in 0..64 {
            b = self.optimal_investment_for_quantity(firm, q);
            q = self
                .optimal_quantity_for_investment(others, b, q_lo, q_hi)
                .clamp(q_lo, q_hi);
            let next = self.profit_unchecked(others, q, b);
            if (next - profit).abs() <= 1e-13 * (1.0 + profit.abs()) {
                profit = next;
                break;
            }
            profit = next;
        }
        if profit < best_grid_profit {
            // Ascent cannot lose to its own starting point; keep the grid max.
            q = best.0;
            b = best.1;
            profit = best_grid_profit;
        }

        FirmDeviation {
            firm,
            nash_profit,
            best_grid_profit,
            best_refined_profit: profit,
            best_quantity: q,
            best_investment: b,
            margin: profit - nash_profit,
        }
    }

    /// Unconstrained profit-maximizing investment for a fixed quantity,
    /// clamped to [0, cap]. The stationary point sqrt(b) = -k1*q/2 follows
    /// from the cost-side first-order condition and holds for any
    /// elasticity because investment only enters through the cost term.
    pub fn optimal_investment_for_quantity(&self, firm: usize, quantity: f64) -> f64 {
        let cap = self.invest_cap(firm);
        if quantity <= 0.0 {
            return 0.0;
        }
        let root = -self.cobb_k1 * quantity / 2.0;
        (root * root).clamp(0.0, cap)
    }

    /// Profit-maximizing quantity for a fixed investment, searched on
    /// [lo, hi]. Closed form at unit elasticity, golden-section otherwise.
    fn optimal_quantity_for_investment(&self, others: f64, investment: f64, lo: f64, hi: f64) -> f64 {
        let w = self.unit_cost_unchecked(investment);
        if self.spec.elasticity == -1.0 && others > 0.0 && w > 0.0 {
            return ((self.scale_a * others / w).sqrt() - others).max(0.0);
        }
        golden_max(lo, hi, 1e-10 * (1.0 + hi.abs()), |q| {
            self.profit_unchecked(others, q, investment)
        })
    }
}

/// One firm's row in a [`DeviationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct FirmDeviation {
    pub firm: usize,
    pub nash_profit: f64,
    pub best_grid_profit: f64,
    pub best_refined_profit: f64,
    pub best_quantity: f64,
    pub best_investment: f64,
    /// Refined best deviation profit minus the baseline profit.
    pub margin: f64,
}

/// Outcome of [`MarketModel::verify_nash`]; always produced, pass/fail is a
/// field.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub grid_radius: f64,
    pub grid_points: usize,
    pub tolerance: f64,
    pub firms: Vec<FirmDeviation>,
    pub passed: bool,
}

/// Golden-section maximization of a unimodal-ish objective on [lo, hi].
pub(crate) fn golden_max(lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (a + b);
    // Endpoints can beat the interior when the max sits on the boundary.
    let candidates = [lo, mid, hi];
    let mut best = lo;
    let mut best_val = f64::NEG_INFINITY;
    for &c in &candidates {
        let v = f(c);
        if v > best_val {
            best_val = v;
            best = c;
        }
    }
    best
}

/// Diagnostic from the no-interior-optimum argument, in percent-normalized
/// space (total baseline 100, scale 100, cap fraction 0.2).
///
/// `h` is what remains after substituting the investment first-order
/// condition into the quantity first-order condition; a root with positive
/// quantity would be a joint interior optimum. Positivity over the feasible
/// region certifies that none exists.
pub fn proof_h(others_quantity: f64, quantity: f64) -> Result<f64, MarketError> {
    let s = others_quantity + quantity;
    if !(s > 0.0) {
        return Err(MarketError::NonPositiveQuantity(s));
    }
    Ok(100.0 / s + quantity / 40.0 - 1.0 - 100.0 * quantity / (s * s))
}

/// Quantity minimizing `h` for a fixed opponents' aggregate:
/// 20 * Q^(1/3) - Q. Negative once the aggregate exceeds 20^(3/2).
pub fn proof_h_critical_quantity(others_quantity: f64) -> f64 {
    20.0 * others_quantity.cbrt() - others_quantity
}

/// Value of `h` at its critical quantity: 0.75 * Q^(1/3) - 0.025 * Q - 1.
pub fn proof_h_minimum(others_quantity: f64) -> f64 {
    0.75 * others_quantity.cbrt() - 0.025 * others_quantity - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    pub(crate) fn two_firm() -> MarketModel {
        MarketModel::derive(MarketSpec::new(vec![150.0, 150.0])).unwrap()
    }

    pub(crate) fn five_firm() -> MarketModel {
        MarketModel::derive(MarketSpec::new(vec![350.0, 250.0, 200.0, 150.0, 50.0])).unwrap()
    }

    #[test]
    fn two_firm_baseline_matches_golden_values() {
        let m = two_firm();
        assert_eq!(m.scale_a, 300.0);
        for i in 0..2 {
            assert_relative_eq!(m.baseline_costs[i], 0.5, max_relative = 1e-12);
            assert_relative_eq!(m.baseline_profits[i], 75.0, max_relative = 1e-12);
            assert_relative_eq!(m.baseline_investments[i], 15.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn five_firm_baseline_matches_golden_values() {
        let m = five_firm();
        let costs = [0.65, 0.75, 0.8, 0.85, 0.95];
        let profits = [122.5, 62.5, 40.0, 22.5, 2.5];
        for i in 0..5 {
            assert_relative_eq!(m.baseline_costs[i], costs[i], max_relative = 1e-12);
            assert_relative_eq!(m.baseline_profits[i], profits[i], max_relative = 1e-12);
            assert_relative_eq!(
                m.baseline_investments[i],
                0.2 * profits[i],
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn percent_space_reproduces_cobb_douglas_constants() {
        let m = MarketModel::derive(MarketSpec::new(vec![35.0, 25.0, 20.0, 15.0, 5.0])).unwrap();
        assert_abs_diff_eq!(m.cobb_k1, -0.2236, epsilon = 5e-5);
        assert_eq!(m.cobb_k2, 0.5);
        assert_eq!(m.cobb_k3, 1.0);
        // exact value: -sqrt(1/20)
        assert_relative_eq!(m.cobb_k1, -(0.05f64).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn baseline_identity_cost_is_one_minus_share() {
        let m = five_firm();
        for i in 0..5 {
            assert_eq!(m.baseline_costs[i], 1.0 - m.share(i));
        }
    }

    #[test]
    fn price_examples() {
        let m = two_firm();
        assert_eq!(m.price(300.0).unwrap(), 1.0);
        assert_eq!(m.price(200.0).unwrap(), 1.5);
        assert_eq!(m.price(150.0).unwrap(), 2.0);
    }

    #[test]
    fn price_rejects_non_positive_totals() {
        let m = two_firm();
        assert!(matches!(
            m.price(0.0),
            Err(MarketError::NonPositiveQuantity(_))
        ));
        assert!(matches!(
            m.price(-5.0),
            Err(MarketError::NonPositiveQuantity(_))
        ));
        assert!(m.price(f64::INFINITY).is_err());
    }

    #[test]
    fn unit_cost_hits_the_fit_points() {
        let m = two_firm();
        // full investment reproduces the baseline cost
        assert_relative_eq!(m.unit_cost(0, 15.0).unwrap(), 0.5, max_relative = 1e-9);
        // zero investment costs the baseline price
        assert_eq!(m.unit_cost(0, 0.0).unwrap(), 1.0);
        // quarter of the cap buys half the cost reduction
        assert_relative_eq!(m.unit_cost(0, 3.75).unwrap(), 0.75, max_relative = 1e-12);
    }

    #[test]
    fn unit_cost_rejects_out_of_bounds_investment() {
        let m = two_firm();
        assert!(matches!(
            m.unit_cost(0, 15.1),
            Err(MarketError::InvestmentOutOfBounds { .. })
        ));
        assert!(m.unit_cost(0, -0.5).is_err());
        assert!(m.unit_cost(7, 1.0).is_err());
    }

    #[test]
    fn profit_examples() {
        let m = two_firm();
        let nash = m
            .profit(&ProfitQuery {
                firm_index: 0,
                others_quantity: 150.0,
                quantity: 150.0,
                investment: 15.0,
            })
            .unwrap();
        assert_relative_eq!(nash, 60.0, max_relative = 1e-12);

        let idle = m
            .profit(&ProfitQuery {
                firm_index: 0,
                others_quantity: 222.0,
                quantity: 0.0,
                investment: 15.0,
            })
            .unwrap();
        assert_eq!(idle, -15.0);

        // best response to 100, frozen from the grid oracle
        let br = m
            .profit(&ProfitQuery {
                firm_index: 0,
                others_quantity: 100.0,
                quantity: 144.949,
                investment: 15.0,
            })
            .unwrap();
        assert_abs_diff_eq!(br, 90.05, epsilon = 5e-3);
    }

    #[test]
    fn nash_profit_is_eighty_percent_of_naive() {
        for m in [two_firm(), five_firm()] {
            for firm in 0..m.n_firms() {
                let profit = m
                    .profit(&ProfitQuery {
                        firm_index: firm,
                        others_quantity: m.others_baseline(firm),
                        quantity: m.spec.baseline_quantities[firm],
                        investment: m.baseline_investments[firm],
                    })
                    .unwrap();
                assert_relative_eq!(
                    profit,
                    0.8 * m.baseline_profits[firm],
                    max_relative = 1e-9
                );
                assert_relative_eq!(profit, m.nash_profit(firm), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn verify_nash_passes_for_both_golden_markets() {
        for m in [two_firm(), five_firm()] {
            let report = m.verify_nash(0.5, 201).unwrap();
            assert!(report.passed, "margins: {:?}", report.firms);
            for f in &report.firms {
                assert!(f.margin <= NASH_TOLERANCE);
            }
        }
    }

    #[test]
    fn deviation_profits_match_direct_evaluation() {
        let m = two_firm();
        let dev160 = m.profit_unchecked(150.0, 160.0, 15.0);
        let dev140 = m.profit_unchecked(150.0, 140.0, 15.0);
        assert_abs_diff_eq!(dev160, 59.84, epsilon = 5e-3);
        assert_abs_diff_eq!(dev140, 59.83, epsilon = 5e-3);
        assert!(dev160 < 60.0 && dev140 < 60.0);
    }

    #[test]
    fn verify_nash_fails_on_a_corrupted_cost_curve() {
        let mut m = two_firm();
        m.cobb_k1 *= 2.0; // full investment now undershoots the baseline cost
        let report = m.verify_nash(0.5, 51).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn verify_nash_rejects_degenerate_grids() {
        let m = two_firm();
        assert!(matches!(
            m.verify_nash(0.5, 2),
            Err(MarketError::GridTooCoarse(2))
        ));
        assert!(m.verify_nash(1.5, 11).is_err());
    }

    #[test]
    fn spec_validation_rejects_degenerate_markets() {
        assert!(matches!(
            MarketModel::derive(MarketSpec::new(vec![150.0])),
            Err(MarketError::TooFewFirms(1))
        ));
        assert!(matches!(
            MarketModel::derive(MarketSpec::new(vec![96.0, 4.0])),
            Err(MarketError::MonopolyShare { firm: 0, .. })
        ));
        let mut spec = MarketSpec::new(vec![150.0, 150.0]);
        spec.elasticity = 0.5;
        assert!(matches!(
            MarketModel::derive(spec),
            Err(MarketError::NonNegativeElasticity(_))
        ));
        let mut spec = MarketSpec::new(vec![150.0, 150.0]);
        spec.invest_fraction_cap = 1.0;
        assert!(matches!(
            MarketModel::derive(spec),
            Err(MarketError::InvalidInvestCap(_))
        ));
        let mut spec = MarketSpec::new(vec![150.0, 150.0]);
        spec.baseline_quantities[1] = 0.0;
        assert!(MarketModel::derive(spec).is_err());
    }

    #[test]
    fn general_elasticity_keeps_the_cost_fit_point() {
        let mut spec = MarketSpec::new(vec![120.0, 80.0, 60.0]);
        spec.elasticity = -1.7;
        let m = MarketModel::derive(spec).unwrap();
        assert_relative_eq!(
            m.price(m.total_baseline).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        for firm in 0..3 {
            assert_relative_eq!(
                m.unit_cost(firm, m.baseline_investments[firm]).unwrap(),
                m.baseline_costs[firm],
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn proof_h_matches_the_reduced_minimum() {
        for q_others in [5.0, 12.5, 31.7, 60.0, 89.0, 94.0] {
            let q = proof_h_critical_quantity(q_others).max(0.0);
            let direct = proof_h(q_others, q).unwrap();
            if proof_h_critical_quantity(q_others) > 0.0 {
                assert_relative_eq!(direct, proof_h_minimum(q_others), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn proof_h_values_at_the_printed_points() {
        // Exact values of the self-consistent diagnostic; the published
        // decimals (0.162, 0.5875, 0.056) carry a rounded coefficient.
        let h5 = proof_h(5.0, proof_h_critical_quantity(5.0)).unwrap();
        let h317 = proof_h(31.7, proof_h_critical_quantity(31.7)).unwrap();
        let h94 = proof_h(94.0, proof_h_critical_quantity(94.0)).unwrap();
        assert_abs_diff_eq!(h5, 0.157482, epsilon = 1e-6);
        assert_abs_diff_eq!(h317, 0.581137, epsilon = 1e-6);
        assert_abs_diff_eq!(h94, 0.060127, epsilon = 1e-6);
        assert!(h5 > 0.0 && h317 > 0.0 && h94 > 0.0);
    }

    #[test]
    fn proof_h_critical_quantity_turns_negative_past_the_lemma_bound() {
        let bound = 20f64.powf(1.5); // about 89.44
        assert_abs_diff_eq!(proof_h_critical_quantity(bound), 0.0, epsilon = 1e-9);
        assert!(proof_h_critical_quantity(bound + 1.0) < 0.0);
        assert!(proof_h_critical_quantity(bound - 1.0) > 0.0);
    }

    #[test]
    fn proof_h_rejects_zero_total() {
        assert!(proof_h(0.0, 0.0).is_err());
    }
}
