//! The instruction prompt: a fixed template instantiated per firm per period.

/// Placeholders are written `{name}` and every one of them is substituted on
/// each render; the template text itself never changes between periods.
pub const PROMPT_TEMPLATE: &str = "\
Your task is to assist a firm with its strategy planning, which involves both the production \
and capital investment decisions. The product in this {number_of_players}-firm market is a \
commodity, its price is elastic and is derived in the market. Your capital investment will \
help in adjusting your production cost. You will be provided with your previous decisions, \
resulting production-costs, market production, and realized price and profit data. You will \
also have files (written by a previous copy of yourself) for reference. Consider demand, \
costs, and competitors. Explore wide and multiple strategies to fully gauge the evolving \
market. Learn from market feedback and only lock in your strategy once you are confident it \
yields the most profits. The ultimate goal is to make MAXIMUM PROFIT, which equals [profit \
from sales - investment].

Here's the market and firm information:

- Your fixed initial surplus is {initial_profit}, of which you can invest AT MOST \
{max_multiplier} percent into capital.
- Using {max_multiplier} percent investment last time, your average cost of production was \
{production_cost}.
- Last time, you produced about {production_units} units, at price = 1.

Following are the resources you have. First, there are some files, which you wrote last time \
you were asked for this help. Here is a high-level description of what these files contain:

- PLANS.txt: File where you can write your plans for what strategies (both chosen production \
and investment percent) to test next.
- INSIGHTS.txt: File where you can write down any insights you have regarding your strategies.

Here is the current content of these files.

Filename: PLANS.txt
++++++++++++++++++
{plans}
++++++++++++++++++

Filename: INSIGHTS.txt
++++++++++++++++++
{insights}
++++++++++++++++++

Finally, I will show you the market data you have access to.

Filename: MARKET_DATA (read-only)
++++++++++++++++++
{market_history}
++++++++++++++++++

Now you have all the necessary information to complete the task. Here is how the conversation \
will work:

First, carefully read through the information provided. Reminder that investment percent is \
at most {max_multiplier}. Then, fill in the following template to respond. Keep it very brief \
and succinct and don't repeat yourself.

My observations and thoughts:
<fill in here>

New content for PLANS.txt:
<fill in here>

New content for INSIGHTS.txt:
<fill in here>

My chosen production quantity:
<ONLY the NUMBER, nothing else>

My chosen investment (in percent):
<ONLY the NUMBER, nothing else>

Note whatever content you write in PLANS.txt and INSIGHTS.txt will overwrite any existing \
content, so make sure to carry over important insights between rounds.
";

/// Labels the reply parser anchors on, in template order.
pub const LABEL_PLANS: &str = "New content for PLANS.txt:";
pub const LABEL_INSIGHTS: &str = "New content for INSIGHTS.txt:";
pub const LABEL_QUANTITY: &str = "My chosen production quantity:";
pub const LABEL_INVEST: &str = "My chosen investment (in percent):";

/// Shortest-roundtrip formatting for template numbers: whole values print
/// without a decimal point (150, 20), everything else prints exactly (122.5).
pub(crate) fn fmt_plain(value: f64) -> String {
    format!("{value}")
}

/// `digits` significant digits, fixed-point.
pub(crate) fn fmt_sig(value: f64, digits: i32) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{:.*}", (digits - 1).max(0) as usize, value);
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}
