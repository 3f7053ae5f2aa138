use serde::{Deserialize, Serialize};

use crate::types::BlockId;

/// Heats are scaled by this factor and rounded before the capacity DP.
pub const VALUE_SCALE: f64 = 1000.0;

/// DP tables above this many cells fall back to the greedy solver.
const MAX_DP_CELLS: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Dp,
    Greedy,
}

impl std::str::FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dp" => Ok(Solver::Dp),
            "greedy" => Ok(Solver::Greedy),
            other => Err(format!("unknown solver `{other}` (expected dp | greedy)")),
        }
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Solver::Dp => "dp",
            Solver::Greedy => "greedy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnapsackItem {
    pub id: BlockId,
    /// Tuple count.
    pub size: u64,
    /// Current heat.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackInstance {
    /// Edge capacity in tuples.
    pub budget: u64,
    pub items: Vec<KnapsackItem>,
}

impl KnapsackInstance {
    /// Items are kept in ascending id order.
    pub fn new(budget: u64, mut items: Vec<KnapsackItem>) -> Self {
        items.sort_by_key(|it| it.id);
        Self { budget, items }
    }
}

/// 0/1 edge residency for a set of blocks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlacementPlan {
    /// Edge-resident block ids, ascending.
    pub selected: Vec<BlockId>,
    pub value: f64,
    pub used: u64,
    /// False when the DP table was too large and greedy was used instead.
    pub exact: bool,
}

impl PlacementPlan {
    pub fn is_selected(&self, id: BlockId) -> bool {
        self.selected.binary_search(&id).is_ok()
    }

    fn from_picks(inst: &KnapsackInstance, picks: &[bool], exact: bool) -> Self {
        let mut selected = Vec::new();
        let (mut value, mut used) = (0.0, 0);
        for (it, &p) in inst.items.iter().zip(picks) {
            if p {
                selected.push(it.id);
                value += it.value;
                used += it.size;
            }
        }
        selected.sort_unstable();
        Self {
            selected,
            value,
            used,
            exact,
        }
    }
}

pub fn solve_knapsack(inst: &KnapsackInstance, solver: Solver) -> PlacementPlan {
    match solver {
        Solver::Dp => solve_knapsack_dp(inst),
        Solver::Greedy => solve_knapsack_greedy(inst),
    }
}

fn quantize(v: f64) -> u64 {
    (v.max(0.0) * VALUE_SCALE).round() as u64
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Top up with leftover items of positive value that still fit, highest
/// value first. Zero-value items are only taken when everything fits, so a
/// block with no heat is never moved just because there is room.
fn fill_remaining(inst: &KnapsackInstance, picks: &mut [bool]) {
    if inst.items.iter().map(|it| it.size).sum::<u64>() <= inst.budget {
        picks.fill(true);
        return;
    }
    let mut used: u64 = inst.items.iter().zip(picks.iter()).filter(|(_, &p)| p).map(|(it, _)| it.size).sum();
    let mut rest: Vec<usize> = (0..inst.items.len()).filter(|&i| !picks[i] && inst.items[i].value > 0.0).collect();
    rest.sort_by(|&a, &b| inst.items[b].value.total_cmp(&inst.items[a].value).then(a.cmp(&b)));
    for i in rest {
        if used + inst.items[i].size <= inst.budget {
            picks[i] = true;
            used += inst.items[i].size;
        }
    }
}

/// Capacity-indexed 0/1 knapsack DP over values quantized to
/// [`VALUE_SCALE`]ths. Items are considered in id order and only taken on a
/// strict improvement, so ties resolve towards lower ids.
pub fn solve_knapsack_dp(inst: &KnapsackInstance) -> PlacementPlan {
    let n = inst.items.len();
    let fits: Vec<usize> = (0..n).filter(|&i| inst.items[i].size <= inst.budget).collect();
    let mut picks = vec![false; n];
    if fits.is_empty() {
        return PlacementPlan::from_picks(inst, &picks, true);
    }
    let g = fits.iter().fold(0, |g, &i| gcd(g, inst.items[i].size.max(1)));
    let cap = (inst.budget / g) as usize;
    let sizes: Vec<usize> = fits.iter().map(|&i| (inst.items[i].size.max(1) / g) as usize).collect();
    let values: Vec<u64> = fits.iter().map(|&i| quantize(inst.items[i].value)).collect();

    if sizes.iter().all(|&s| s == sizes[0]) {
        // equal sizes: the best `cap / s` values are optimal
        let take = cap / sizes[0];
        let mut order: Vec<usize> = (0..fits.len()).collect();
        order.sort_by(|&a, &b| values[b].cmp(&values[a]).then(a.cmp(&b)));
        for &o in order.iter().take(take) {
            if values[o] > 0 {
                picks[fits[o]] = true;
            }
        }
        fill_remaining(inst, &mut picks);
        return PlacementPlan::from_picks(inst, &picks, true);
    }

    if fits.len() as u64 * (cap as u64 + 1) > MAX_DP_CELLS {
        let mut plan = solve_knapsack_greedy(inst);
        plan.exact = false;
        return plan;
    }

    let words = (cap + 1).div_ceil(64);
    let mut keep = vec![0u64; fits.len() * words];
    let mut dp = vec![0u64; cap + 1];
    for (j, (&s, &v)) in sizes.iter().zip(&values).enumerate() {
        if v == 0 {
            continue;
        }
        let row = &mut keep[j * words..(j + 1) * words];
        for c in (s..=cap).rev() {
            let with = dp[c - s] + v;
            if with > dp[c] {
                dp[c] = with;
                row[c / 64] |= 1 << (c % 64);
            }
        }
    }
    let mut c = cap;
    for j in (0..fits.len()).rev() {
        if keep[j * words + c / 64] >> (c % 64) & 1 == 1 {
            picks[fits[j]] = true;
            c -= sizes[j];
        }
    }
    fill_remaining(inst, &mut picks);
    PlacementPlan::from_picks(inst, &picks, true)
}

/// Density-ordered greedy fill, compared against the single most valuable
/// fitting item; the better of the two is within a factor 2 of optimal.
pub fn solve_knapsack_greedy(inst: &KnapsackInstance) -> PlacementPlan {
    let n = inst.items.len();
    let fits: Vec<usize> = (0..n).filter(|&i| inst.items[i].size <= inst.budget).collect();
    let density = |i: usize| inst.items[i].value / inst.items[i].size.max(1) as f64;
    let mut order: Vec<usize> = fits.iter().copied().filter(|&i| inst.items[i].value > 0.0).collect();
    order.sort_by(|&a, &b| density(b).total_cmp(&density(a)).then(a.cmp(&b)));

    let mut fill = vec![false; n];
    let (mut used, mut fill_value) = (0u64, 0.0);
    for i in order {
        if used + inst.items[i].size <= inst.budget {
            fill[i] = true;
            used += inst.items[i].size;
            fill_value += inst.items[i].value;
        }
    }
    let best_single = fits
        .iter()
        .copied()
        .max_by(|&a, &b| inst.items[a].value.total_cmp(&inst.items[b].value).then(b.cmp(&a)));
    let mut picks = match best_single {
        Some(b) if inst.items[b].value > fill_value => {
            let mut p = vec![false; n];
            p[b] = true;
            p
        }
        _ => fill,
    };
    fill_remaining(inst, &mut picks);
    PlacementPlan::from_picks(inst, &picks, true)
}
