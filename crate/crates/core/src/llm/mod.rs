//! LLM agent harness: renders the instruction prompt from market history,
//! calls a chat-completions endpoint, and parses the decision plus the
//! PLANS/INSIGHTS scratch files out of the reply.
//!
//! The harness is strictly one message per call; the scratch files are the
//! only memory an agent carries between periods.

mod template;
mod transport;

pub use template::{
    LABEL_INSIGHTS, LABEL_INVEST, LABEL_PLANS, LABEL_QUANTITY, PROMPT_TEMPLATE,
};
pub use transport::{
    CallMeta, ChatTransport, DirectoryTransport, HttpTransport, LlmEndpointConfig,
    SequenceTransport, TransportError,
};

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::agents::{Decision, Observation};
use crate::market::MarketModel;
use template::{fmt_plain, fmt_sig};

/// Everything the prompt template needs for one firm in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub n_firms: usize,
    /// The firm's baseline profit, presented as its fixed surplus.
    pub initial_profit: f64,
    /// Investment ceiling in percent.
    pub max_multiplier_percent: f64,
    pub baseline_cost: f64,
    pub baseline_units: f64,
    pub plans_text: String,
    pub insights_text: String,
    pub market_history_text: String,
}

impl PromptContext {
    /// Context at period zero: empty scratch files, empty market history.
    pub fn baseline(model: &MarketModel, firm: usize) -> Self {
        Self {
            n_firms: model.n_firms(),
            initial_profit: model.baseline_profits[firm],
            max_multiplier_percent: model.invest_cap_percent(),
            baseline_cost: model.baseline_costs[firm],
            baseline_units: model.spec.baseline_quantities[firm],
            plans_text: String::new(),
            insights_text: String::new(),
            market_history_text: String::new(),
        }
    }

    /// Context carrying scratch-file contents and rendered history rows.
    pub fn with_history(
        model: &MarketModel,
        firm: usize,
        observations: &[Observation],
        plans: &str,
        insights: &str,
    ) -> Self {
        let mut ctx = Self::baseline(model, firm);
        ctx.plans_text = plans.to_owned();
        ctx.insights_text = insights.to_owned();
        ctx.market_history_text = render_history_rows(observations);
        ctx
    }
}

/// One line per period: the firm's own actions and outcomes plus market
/// aggregates. Prices and costs carry 4 significant digits, quantities and
/// profits 2 decimals.
pub fn render_history_rows(observations: &[Observation]) -> String {
    let mut rows = Vec::with_capacity(observations.len());
    for o in observations {
        rows.push(format!(
            "period={} | my_production={:.2} | my_investment_percent={:.2} | my_unit_cost={} | total_production={:.2} | price={} | my_profit={:.2}",
            o.period_index,
            o.own_quantity,
            o.own_invest_percent,
            fmt_sig(o.own_unit_cost, 4),
            o.total_quantity,
            fmt_sig(o.market_price, 4),
            o.own_profit,
        ));
    }
    rows.join("\n")
}

/// Instantiates the prompt template. Every placeholder is substituted; the
/// output is byte-stable for equal contexts.
pub fn render_prompt(ctx: &PromptContext) -> String {
    PROMPT_TEMPLATE
        .replace("{number_of_players}", &ctx.n_firms.to_string())
        .replace("{initial_profit}", &fmt_plain(ctx.initial_profit))
        .replace("{max_multiplier}", &fmt_plain(ctx.max_multiplier_percent))
        .replace("{production_cost}", &fmt_plain(ctx.baseline_cost))
        .replace("{production_units}", &fmt_plain(ctx.baseline_units))
        .replace("{plans}", &ctx.plans_text)
        .replace("{insights}", &ctx.insights_text)
        .replace("{market_history}", &ctx.market_history_text)
}

#[derive(Debug, Error)]
pub enum ParseFailure {
    #[error("reply is missing the label {label:?}; tail: {excerpt:?}")]
    MissingLabel { label: &'static str, excerpt: String },
    #[error("no numeric value after {label:?}; saw: {excerpt:?}")]
    NonNumeric { label: &'static str, excerpt: String },
    #[error("production quantity must be finite and non-negative, got {value} in {excerpt:?}")]
    BadQuantity { value: f64, excerpt: String },
}

/// A parsed reply: the decision (investment clamped into bounds), the new
/// scratch-file contents, and the pre-clamp percent when clamping fired.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplyDecision {
    pub decision: Decision,
    pub plans: String,
    pub insights: String,
    /// Requested invest percent before clamping, when it was out of bounds.
    pub clamped_from: Option<f64>,
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(?:\d[\d,]*(?:\.\d+)?|\.\d+)").unwrap())
}

fn excerpt(text: &str) -> String {
    let trimmed = text.trim();
    let mut out: String = trimmed.chars().take(80).collect();
    if trimmed.chars().count() > 80 {
        out.push('…');
    }
    out
}

/// First numeric token on the first line after `label` that carries one,
/// scanning no further than `stop` (the next label). Thousands separators
/// are ignored.
fn number_after<'t>(
    text: &'t str,
    label: &'static str,
    stop: Option<&str>,
) -> Result<f64, ParseFailure> {
    let start = text.find(label).ok_or_else(|| ParseFailure::MissingLabel {
        label,
        excerpt: excerpt(text),
    })?;
    let after = &text[start + label.len()..];
    let region = match stop.and_then(|s| after.find(s)) {
        Some(end) => &after[..end],
        None => after,
    };
    for line in region.lines() {
        if let Some(m) = number_regex().find(line) {
            let cleaned = m.as_str().replace(',', "");
            if let Ok(value) = cleaned.parse::<f64>() {
                return Ok(value);
            }
        }
    }
    Err(ParseFailure::NonNumeric {
        label,
        excerpt: excerpt(region),
    })
}

/// Text between `label` and the next `stop` label (or the end); missing
/// sections read as empty.
fn section_after(text: &str, label: &str, stop: &str) -> String {
    let Some(start) = text.find(label) else {
        return String::new();
    };
    let after = &text[start + label.len()..];
    let body = match after.find(stop) {
        Some(end) => &after[..end],
        None => after,
    };
    body.trim().to_owned()
}

/// Extracts the decision and scratch files from a reply.
///
/// The quantity must be a finite non-negative number; an out-of-bounds
/// investment percent is clamped into [0, cap] and reported, matching the
/// hard cap the market enforces.
pub fn parse_response(
    text: &str,
    model: &MarketModel,
    firm: usize,
) -> Result<ReplyDecision, ParseFailure> {
    let quantity = number_after(text, LABEL_QUANTITY, Some(LABEL_INVEST))?;
    if !quantity.is_finite() || quantity < 0.0 {
        return Err(ParseFailure::BadQuantity {
            value: quantity,
            excerpt: excerpt(text),
        });
    }
    let requested_percent = number_after(text, LABEL_INVEST, None)?;
    let max_percent = model.invest_cap_percent();
    let clamped = requested_percent.clamp(0.0, max_percent);
    let clamped_from = (clamped != requested_percent).then_some(requested_percent);

    let plans = section_after(text, LABEL_PLANS, LABEL_INSIGHTS);
    let insights = section_after(text, LABEL_INSIGHTS, LABEL_QUANTITY);

    let decision = Decision::new(model, firm, quantity, clamped)
        .expect("clamped decision is always in bounds");
    Ok(ReplyDecision {
        decision,
        plans,
        insights,
        clamped_from,
    })
}

/// Builds a reply in the response-template shape; used by tests and for
/// authoring mock fixtures.
pub fn synthesize_reply(quantity: f64, invest_percent: f64, plans: &str, insights: &str) -> String {
    format!(
        "My observations and thoughts:\nholding course\n\n{LABEL_PLANS}\n{plans}\n\n{LABEL_INSIGHTS}\n{insights}\n\n{LABEL_QUANTITY}\n{}\n\n{LABEL_INVEST}\n{}\n",
        fmt_plain(quantity),
        fmt_plain(invest_percent),
    )
}

/// Outcome of one decision call, including everything the run log records.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmOutcome {
    pub decision: Decision,
    pub plans: String,
    pub insights: String,
    /// Total attempts issued (1 = first try succeeded).
    pub attempts: u32,
    pub clamped_from: Option<f64>,
    /// True when every attempt failed to parse and the fallback decision was
    /// used; the scratch files then keep their previous contents.
    pub fell_back: bool,
}

/// Renders the prompt, posts it, and parses the reply.
///
/// Parse failures retry with the same prompt up to `max_retries` extra
/// attempts and then fall back to `fallback` (the firm's previous decision,
/// or the baseline pair at period zero). Transport failures retry the same
/// way but abort with an error once exhausted.
pub fn llm_decide(
    transport: &dyn ChatTransport,
    call: &CallMeta,
    ctx: &PromptContext,
    model: &MarketModel,
    firm: usize,
    max_retries: u32,
    fallback: Decision,
) -> Result<LlmOutcome, TransportError> {
    let prompt = render_prompt(ctx);
    let mut attempts = 0u32;
    let mut last_transport_error: Option<TransportError> = None;
    while attempts <= max_retries {
        attempts += 1;
        match transport.complete(call, &prompt) {
            Ok(reply) => match parse_response(&reply, model, firm) {
                Ok(parsed) => {
                    return Ok(LlmOutcome {
                        decision: parsed.decision,
                        plans: parsed.plans,
                        insights: parsed.insights,
                        attempts,
                        clamped_from: parsed.clamped_from,
                        fell_back: false,
                    });
                }
                Err(_) => continue,
            },
            Err(e) => {
                last_transport_error = Some(e);
                continue;
            }
        }
    }
    if let Some(last) = last_transport_error {
        return Err(TransportError::RetriesExhausted {
            attempts,
            last: last.to_string(),
        });
    }
    Ok(LlmOutcome {
        decision: fallback,
        plans: ctx.plans_text.clone(),
        insights: ctx.insights_text.clone(),
        attempts,
        clamped_from: None,
        fell_back: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketSpec;

    fn two_firm() -> MarketModel {
        MarketModel::derive(MarketSpec::new(vec![150.0, 150.0])).unwrap()
    }

    fn five_firm() -> MarketModel {
        MarketModel::derive(MarketSpec::new(vec![350.0, 250.0, 200.0, 150.0, 50.0])).unwrap()
    }

    fn observation(period: usize) -> Observation {
        Observation {
            period_index: period,
            own_quantity: 150.0,
            own_invest_percent: 20.0,
            own_unit_cost: 0.5,
            total_quantity: 300.0,
            market_price: 1.0,
            own_profit: 60.0,
        }
    }

    #[test]
    fn rendered_prompt_carries_the_cap_and_empty_scratch_files() {
        let m = two_firm();
        let prompt = render_prompt(&PromptContext::baseline(&m, 0));
        assert!(prompt.contains("AT MOST 20 percent"));
        assert!(prompt.contains("this 2-firm market"));
        assert!(prompt.contains("Filename: PLANS.txt\n++++++++++++++++++\n\n++++++++++++++++++"));
        assert!(!prompt.contains('{'), "unsubstituted placeholder left behind");
    }

    #[test]
    fn rendered_prompt_shows_the_firms_own_surplus() {
        let m = five_firm();
        let prompt = render_prompt(&PromptContext::baseline(&m, 0));
        assert!(prompt.contains("Your fixed initial surplus is 122.5"));
        assert!(prompt.contains("your average cost of production was 0.65"));
        assert!(prompt.contains("you produced about 350 units"));
    }

    #[test]
    fn history_block_lists_exactly_the_given_rows() {
        let m = two_firm();
        let obs: Vec<_> = (0..3).map(observation).collect();
        let ctx = PromptContext::with_history(&m, 0, &obs, "", "");
        let prompt = render_prompt(&ctx);
        let block = prompt
            .split("Filename: MARKET_DATA (read-only)\n++++++++++++++++++\n")
            .nth(1)
            .unwrap()
            .split("\n++++++++++++++++++")
            .next()
            .unwrap();
        assert_eq!(block.lines().count(), 3);
        assert!(block.contains("period=2"));
    }

    #[test]
    fn parse_roundtrip_for_a_well_formed_reply() {
        let m = two_firm();
        let reply = synthesize_reply(150.0, 20.0, "push output", "price follows total");
        let parsed = parse_response(&reply, &m, 0).unwrap();
        assert_eq!(parsed.decision.quantity, 150.0);
        assert_eq!(parsed.decision.invest_percent, 20.0);
        assert_eq!(parsed.plans, "push output");
        assert_eq!(parsed.insights, "price follows total");
        assert_eq!(parsed.clamped_from, None);
    }

    #[test]
    fn over_cap_investment_is_clamped_and_reported() {
        let m = two_firm();
        let reply = synthesize_reply(150.0, 25.0, "", "");
        let parsed = parse_response(&reply, &m, 0).unwrap();
        assert_eq!(parsed.decision.invest_percent, 20.0);
        assert_eq!(parsed.clamped_from, Some(25.0));

        let reply = synthesize_reply(150.0, -3.0, "", "");
        let parsed = parse_response(&reply, &m, 0).unwrap();
        assert_eq!(parsed.decision.invest_percent, 0.0);
        assert_eq!(parsed.clamped_from, Some(-3.0));
    }

    #[test]
    fn missing_labels_and_bad_payloads_fail_to_parse() {
        let m = two_firm();
        let no_invest = format!("{LABEL_QUANTITY}\n150\n");
        assert!(matches!(
            parse_response(&no_invest, &m, 0),
            Err(ParseFailure::MissingLabel {
                label: LABEL_INVEST,
                ..
            })
        ));

        let no_number = format!("{LABEL_QUANTITY}\nplenty\n{LABEL_INVEST}\n20\n");
        assert!(matches!(
            parse_response(&no_number, &m, 0),
            Err(ParseFailure::NonNumeric { .. })
        ));

        let negative = format!("{LABEL_QUANTITY}\n-5\n{LABEL_INVEST}\n20\n");
        assert!(matches!(
            parse_response(&negative, &m, 0),
            Err(ParseFailure::BadQuantity { .. })
        ));

        // the quantity scan must not leak past the investment label
        let empty_quantity = format!("{LABEL_QUANTITY}\n\n{LABEL_INVEST}\n20\n");
        assert!(parse_response(&empty_quantity, &m, 0).is_err());
    }

    #[test]
    fn thousands_separators_and_prose_around_numbers_are_tolerated() {
        let m = MarketModel::derive(MarketSpec::new(vec![1500.0, 1500.0])).unwrap();
        let reply = format!(
            "{LABEL_QUANTITY}\nI will produce 1,250 units\n{LABEL_INVEST}\nabout 18.5 percent\n"
        );
        let parsed = parse_response(&reply, &m, 0).unwrap();
        assert_eq!(parsed.decision.quantity, 1250.0);
        assert_eq!(parsed.decision.invest_percent, 18.5);
    }

    #[test]
    fn prompt_never_leaks_opponent_data() {
        let m = two_firm();
        // Opponent produced a distinctive quantity; only aggregates may show.
        let own = Observation {
            period_index: 0,
            own_quantity: 100.0,
            own_invest_percent: 20.0,
            own_unit_cost: 0.5,
            total_quantity: 233.77,
            market_price: 1.2833,
            own_profit: 63.3,
        };
        let ctx = PromptContext::with_history(&m, 0, &[own], "", "");
        let prompt = render_prompt(&ctx);
        assert!(!prompt.contains("133.77"), "opponent quantity leaked");
        for label in ["nash", "best_response", "scripted", "opponent"] {
            assert!(!prompt.to_lowercase().contains(label));
        }
    }

    #[test]
    fn retries_then_succeeds_on_the_third_attempt() {
        let m = two_firm();
        let transport = SequenceTransport::of_texts(&[
            "word salad",
            "still nothing",
            &synthesize_reply(140.0, 20.0, "p", "i"),
        ]);
        let call = CallMeta {
            run_label: "t".into(),
            period: 0,
            firm: 0,
        };
        let ctx = PromptContext::baseline(&m, 0);
        let fallback = Decision::nash(&m, 0);
        let out = llm_decide(&transport, &call, &ctx, &m, 0, 3, fallback).unwrap();
        assert_eq!(out.attempts, 3);
        assert!(!out.fell_back);
        assert_eq!(out.decision.quantity, 140.0);
    }

    #[test]
    fn falls_back_to_the_previous_decision_after_exhaustion() {
        let m = two_firm();
        let transport = SequenceTransport::of_texts(&["garbage"]);
        let call = CallMeta {
            run_label: "t".into(),
            period: 5,
            firm: 1,
        };
        let previous = Decision::new(&m, 1, 133.0, 17.0).unwrap();
        let mut ctx = PromptContext::baseline(&m, 1);
        ctx.plans_text = "keep".into();
        let out = llm_decide(&transport, &call, &ctx, &m, 1, 2, previous).unwrap();
        assert!(out.fell_back);
        assert_eq!(out.attempts, 3);
        assert_eq!(out.decision, previous);
        assert_eq!(out.plans, "keep");
        assert_eq!(transport.calls(), 3);
    }

    #[test]
    fn transport_failures_abort_after_retries() {
        let m = two_firm();
        let transport = SequenceTransport::new(vec![Err("connection refused".into())]);
        let call = CallMeta {
            run_label: "t".into(),
            period: 0,
            firm: 0,
        };
        let ctx = PromptContext::baseline(&m, 0);
        let out = llm_decide(&transport, &call, &ctx, &m, 0, 1, Decision::nash(&m, 0));
        assert!(matches!(
            out,
            Err(TransportError::RetriesExhausted { attempts: 2, .. })
        ));
    }
}
