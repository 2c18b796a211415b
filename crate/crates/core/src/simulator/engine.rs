//! Path and tape generation for one stock-day.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use rayon::prelude::*;

use super::scenario::{default_agents, AgentSpec, BurstSpec, Direction, ScriptPhase, SimScenario, StockSpec};
use crate::detector::Phase;
use crate::error::Result;
use crate::types::{Date, DayKey, DayTape, Micros, QuoteEvent, Side, TradeEvent, TraderCategory};

const PRICE_STREAM: u64 = 0;
const TRADE_STREAM: u64 = 1;
const JITTER_STREAM: u64 = 2;

/// A burst as realised on one stock-day.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthBurst {
    pub stock: String,
    pub date: Date,
    /// Seconds after the open.
    pub onset_s: f64,
    pub tau_s: f64,
    pub recovery_end_s: f64,
    pub magnitude: f64,
    pub direction: Direction,
    pub script: String,
    /// Efficient log-price change from onset to `tau`.
    pub realized_return: f64,
}

impl TruthBurst {
    /// Scripted phase of instant `t`, using the burst's own onset and
    /// `tau` in place of detected boundaries.
    pub fn phase_at(&self, t: f64) -> Option<Phase> {
        let d = self.tau_s - self.onset_s;
        if t < self.onset_s - 2.0 * d || t > self.recovery_end_s {
            return None;
        }
        Some(if t <= self.onset_s {
            Phase::PreEvent
        } else if t <= self.onset_s + d / 3.0 {
            Phase::Early
        } else if t <= self.onset_s + 2.0 * d / 3.0 {
            Phase::Intermediate
        } else if t <= self.tau_s {
            Phase::Late
        } else {
            Phase::Recovery
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDay {
    pub tape: DayTape,
    pub truth: Vec<TruthBurst>,
    /// Efficient log price, relative to the opening level, once a second.
    pub efficient: Vec<f64>,
}

/// Seed of one stock-day, stable across platforms and schedules.
pub fn day_seed(master: u64, stock: &str, date: Date) -> u64 {
    // FNV-1a over the master seed, the stock id and the date
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = master
        .to_le_bytes()
        .into_iter()
        .chain(stock.bytes())
        .chain([0xff])
        .chain(date.0.to_le_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Drift of `burst` integrated over `[a, b]`.
fn burst_increment(burst: &TruthBurst, coef: f64, alpha: f64, recovery: f64, a: f64, b: f64) -> f64 {
    let mut x = 0.0;
    let (lo, hi) = (a.max(burst.onset_s), b.min(burst.tau_s));
    if lo < hi {
        let g = |t: f64| (burst.tau_s - t).max(0.0).powf(1.0 - alpha);
        x += coef / (1.0 - alpha) * (g(lo) - g(hi));
    }
    let (lo, hi) = (a.max(burst.tau_s), b.min(burst.recovery_end_s));
    if lo < hi {
        x -= recovery * burst.magnitude * (hi - lo) / (burst.recovery_end_s - burst.tau_s);
    }
    burst.direction.sign() * x
}

struct Mixer<'a> {
    agents: Vec<&'a AgentSpec>,
    buy_cdf: Vec<f64>,
    sell_cdf: Vec<f64>,
}

impl<'a> Mixer<'a> {
    fn new(agents: Vec<&'a AgentSpec>) -> Self {
        let cdf = |f: &dyn Fn(&AgentSpec) -> f64| {
            let mut acc = 0.0;
            let mut v: Vec<f64> = agents
                .iter()
                .map(|a| {
                    acc += f(a);
                    acc
                })
                .collect();
            for x in &mut v {
                *x /= acc;
            }
            v
        };
        let buy_cdf = cdf(&|a| a.weight * a.buy);
        let sell_cdf = cdf(&|a| a.weight * (1.0 - a.buy));
        Mixer {
            agents,
            buy_cdf,
            sell_cdf,
        }
    }

    fn pick(&self, cdf: &[f64], u: f64) -> &'a AgentSpec {
        let i = cdf.partition_point(|c| *c <= u).min(cdf.len() - 1);
        self.agents[i]
    }

    fn draw(&self, r: &mut ChaCha8Rng) -> (TraderCategory, TraderCategory, Side) {
        let buyer = self.pick(&self.buy_cdf, r.random());
        let seller = self.pick(&self.sell_cdf, r.random());
        let total = buyer.aggressive + seller.aggressive;
        let p_buy = if total > 0.0 { buyer.aggressive / total } else { 0.5 };
        let side = if r.random::<f64>() < p_buy { Side::Buy } else { Side::Sell };
        (buyer.category, seller.category, side)
    }
}

/// Agent mixers keyed by script and phase, falling back to the `default`
/// script and finally to the built-in background.
struct Scripts<'a> {
    table: Vec<((String, ScriptPhase), Mixer<'a>)>,
    background: Mixer<'a>,
}

impl<'a> Scripts<'a> {
    fn new(agents: &'a [AgentSpec], builtin: &'a [AgentSpec]) -> Self {
        let mut keys: Vec<(String, ScriptPhase)> = agents.iter().map(|a| (a.script.clone(), a.phase)).collect();
        keys.sort();
        keys.dedup();
        let table = keys
            .into_iter()
            .map(|k| {
                let m = Mixer::new(agents.iter().filter(|a| a.script == k.0 && a.phase == k.1).collect());
                (k, m)
            })
            .collect();
        Scripts {
            table,
            background: Mixer::new(builtin.iter().collect()),
        }
    }

    fn get(&self, script: &str, phase: ScriptPhase) -> &Mixer<'a> {
        let find = |s: &str, p: ScriptPhase| self.table.iter().find(|(k, _)| k.0 == s && k.1 == p).map(|(_, m)| m);
        find(script, phase)
            .or_else(|| find("default", phase))
            .or_else(|| find("default", ScriptPhase::Normal))
            .unwrap_or(&self.background)
    }
}

fn realise_bursts<'a>(scn: &'a SimScenario, stock: &str, date: Date, seed: u64) -> Vec<(TruthBurst, &'a BurstSpec)> {
    let mut jitter = rng(seed, JITTER_STREAM);
    scn.bursts
        .iter()
        .filter(|b| b.date == date && b.applies_to(stock))
        .map(|b| {
            let shift = if b.tau_jitter_s > 0.0 {
                jitter.random_range(-b.tau_jitter_s..=b.tau_jitter_s)
            } else {
                0.0
            };
            let tau = b.tau_s + shift;
            let t = TruthBurst {
                stock: stock.to_string(),
                date,
                onset_s: tau - b.duration_s,
                tau_s: tau,
                recovery_end_s: tau + b.recovery_s,
                magnitude: b.magnitude,
                direction: b.direction,
                script: b.script.clone(),
                realized_return: 0.0,
            };
            (t, b)
        })
        .collect()
}

fn round_tick(p: f64, tick: f64) -> f64 {
    ((p / tick).round() * tick * 1e9).round() / 1e9
}

/// Simulate one stock-day.
pub fn simulate_day(scn: &SimScenario, stock: &StockSpec, date: Date) -> SimDay {
    let session = &scn.session;
    let seed = day_seed(scn.seed, &stock.id, date);
    let mut bursts = realise_bursts(scn, &stock.id, date, seed);
    let len_s = session.length_s() as f64;
    let n_steps = (len_s / scn.dt_s).round() as usize;
    let dt = len_s / n_steps as f64;

    // efficient log price at step boundaries
    let mut pr = rng(seed, PRICE_STREAM);
    let sigma_step = stock.sigma_daily / len_s.sqrt() * dt.sqrt();
    let jump_p = stock.jump_intensity / n_steps as f64;
    let mut x = Vec::with_capacity(n_steps + 1);
    x.push(0.0);
    for i in 0..n_steps {
        let (a, b) = (i as f64 * dt, (i + 1) as f64 * dt);
        let z: f64 = StandardNormal.sample(&mut pr);
        let mut dx = sigma_step * stock.vol_profile.at((a + 0.5 * dt) / len_s) * z;
        if jump_p > 0.0 && pr.random::<f64>() < jump_p {
            let j: f64 = StandardNormal.sample(&mut pr);
            dx += stock.jump_std * j;
        }
        for (t, spec) in &bursts {
            dx += burst_increment(t, spec.coefficient(), spec.alpha, spec.recovery, a, b);
        }
        x.push(x[i] + dx);
    }
    let at = |t: f64| x[((t / dt + 1e-9).floor() as usize).min(n_steps)];
    for (t, _) in &mut bursts {
        t.realized_return = at(t.tau_s) - at(t.onset_s);
    }

    // trades
    let builtin = default_agents();
    let scripts = Scripts::new(&scn.agents, &builtin);
    let mut tr = rng(seed, TRADE_STREAM);
    let size = Exp::new(1.0 / stock.size_mean).expect("positive mean size");
    let noise = stock.noise_bps * 1e-4;
    let mut trades = Vec::new();
    let mut stamps = Vec::new();
    for i in 0..n_steps {
        let a = i as f64 * dt;
        let mid = a + 0.5 * dt;
        let active = bursts.iter().find(|(t, _)| t.phase_at(mid).is_some());
        let mult = match active {
            Some((t, spec)) if t.onset_s < mid && mid <= t.tau_s => spec.intensity,
            _ => 1.0,
        };
        let lambda = stock.trade_rate * mult * dt;
        let count = Poisson::new(lambda).map(|p| p.sample(&mut tr) as usize).unwrap_or(0);
        if count == 0 {
            continue;
        }
        stamps.clear();
        stamps.extend((0..count).map(|_| a + tr.random::<f64>() * dt));
        stamps.sort_by(f64::total_cmp);
        for &t in &stamps {
            let mixer = match active.and_then(|(tb, _)| tb.phase_at(t).map(|p| (tb, p))) {
                Some((tb, p)) => scripts.get(&tb.script, ScriptPhase::Event(p)),
                None => scripts.get("default", ScriptPhase::Normal),
            };
            let (buyer, seller, side) = mixer.draw(&mut tr);
            let e: f64 = StandardNormal.sample(&mut tr);
            let price = round_tick(stock.price * (at(t) + noise * e).exp(), scn.tick).max(scn.tick);
            let quantity = (size.sample(&mut tr)).ceil().max(1.0);
            trades.push(TradeEvent {
                ts: Micros::from_secs_f64(t),
                price,
                quantity,
                side,
                buyer,
                seller,
            });
        }
    }
    // stamps rounded to microseconds stay sorted; equal stamps keep order
    debug_assert!(trades.windows(2).all(|w| w[0].ts <= w[1].ts));

    // quotes, emitted when the rounded book changes
    let mut quotes: Vec<QuoteEvent> = Vec::new();
    let half = 0.5 * stock.spread_bps * 1e-4;
    let n_quotes = (len_s / scn.quote_step_s).floor() as usize;
    for k in 0..=n_quotes {
        let t = k as f64 * scn.quote_step_s;
        let p = stock.price * at(t).exp();
        let bid = ((p * (1.0 - half) / scn.tick).floor() * scn.tick).max(scn.tick);
        let mut ask = (p * (1.0 + half) / scn.tick).ceil() * scn.tick;
        if ask <= bid {
            ask = bid + scn.tick;
        }
        let (bid, ask) = (round_tick(bid, scn.tick), round_tick(ask, scn.tick));
        if quotes.last().is_none_or(|q| q.bid != bid || q.ask != ask) {
            quotes.push(QuoteEvent {
                ts: Micros::from_secs_f64(t),
                bid,
                ask,
            });
        }
    }

    let efficient = (0..=len_s as usize).map(|s| at(s as f64)).collect();
    SimDay {
        tape: DayTape {
            key: Some(DayKey::new(stock.id.clone(), date)),
            trades,
            quotes,
        },
        truth: bursts.into_iter().map(|(t, _)| t).collect(),
        efficient,
    }
}

/// Stock-days a scenario simulates, ordered by date then stock.
pub fn scenario_days(scn: &SimScenario) -> Vec<(&StockSpec, Date)> {
    let mut out = Vec::new();
    for &d in &scn.dates {
        for st in &scn.stocks {
            if scn.burst_days_only && !scn.bursts.iter().any(|b| b.date == d && b.applies_to(&st.id)) {
                continue;
            }
            out.push((st, d));
        }
    }
    out
}

/// Simulate every stock-day of a scenario in parallel.
pub fn simulate(scn: &SimScenario) -> Result<Vec<SimDay>> {
    scn.validate()?;
    Ok(scenario_days(scn)
        .into_par_iter()
        .map(|(st, d)| simulate_day(scn, st, d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowCell;
    use crate::simulator::scenario::VolProfile;

    fn quiet() -> SimScenario {
        SimScenario {
            stocks: vec![StockSpec {
                sigma_daily: 0.0,
                noise_bps: 0.0,
                ..StockSpec::default()
            }],
            ..SimScenario::default()
        }
    }

    #[test]
    fn zero_volatility_gives_constant_prices() {
        let scn = quiet();
        let day = simulate_day(&scn, &scn.stocks[0], scn.dates[0]);
        assert!(day.tape.trades.len() > 13_000);
        assert!(day.tape.trades.iter().all(|t| t.price == 50.0));
        assert_eq!(day.tape.quotes.len(), 1);
    }

    #[test]
    fn repeated_seed_is_identical() {
        let scn = SimScenario::default();
        let a = simulate_day(&scn, &scn.stocks[0], scn.dates[0]);
        let b = simulate_day(&scn, &scn.stocks[0], scn.dates[0]);
        assert_eq!(a, b);
        let other = SimScenario { seed: 2, ..scn.clone() };
        let c = simulate_day(&other, &other.stocks[0], other.dates[0]);
        assert_ne!(a.tape.trades, c.tape.trades);
    }

    #[test]
    fn day_seed_separates_stocks_and_dates() {
        let s = day_seed(1, "A", Date(20130102));
        assert_ne!(s, day_seed(1, "B", Date(20130102)));
        assert_ne!(s, day_seed(1, "A", Date(20130103)));
        assert_ne!(s, day_seed(2, "A", Date(20130102)));
        assert_eq!(s, day_seed(1, "A", Date(20130102)));
    }

    #[test]
    fn realized_volatility_matches_configuration() {
        let mut scn = quiet();
        scn.stocks[0].sigma_daily = 0.02;
        let mut total = 0.0;
        let n = 20;
        for d in 0..n {
            let day = simulate_day(&scn, &scn.stocks[0], Date(20130102 + d));
            total += day.efficient.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
        }
        let rv = (total / n as f64).sqrt();
        assert!((rv - 0.02).abs() < 0.0005, "{rv}");
    }

    #[test]
    fn midday_profile_doubles_volatility() {
        assert_eq!(VolProfile::MiddayDouble.at(0.0), 1.0);
        assert_eq!(VolProfile::MiddayDouble.at(0.5), 2.0);
    }

    #[test]
    fn burst_moves_the_efficient_price_by_its_magnitude() {
        let mut scn = quiet();
        scn.bursts.push(BurstSpec {
            stock: None,
            date: scn.dates[0],
            tau_s: 10_000.0,
            magnitude: 0.0135,
            duration_s: 572.0,
            alpha: 0.75,
            direction: Direction::Down,
            recovery: 0.5,
            recovery_s: 1716.0,
            tau_jitter_s: 0.0,
            script: "default".into(),
            intensity: 1.0,
        });
        let day = simulate_day(&scn, &scn.stocks[0], scn.dates[0]);
        let tb = &day.truth[0];
        assert!((tb.realized_return + 0.0135).abs() < 1e-12, "{}", tb.realized_return);
        let end = day.efficient[(tb.recovery_end_s as usize) + 1];
        assert!((end + 0.0135 * 0.5).abs() < 1e-12);
        // drift concentrates near tau
        let half = day.efficient[(tb.tau_s - 286.0) as usize] - day.efficient[tb.onset_s as usize];
        assert!(half.abs() < 0.0135 * 0.85);
    }

    #[test]
    fn every_trade_has_a_buyer_and_a_seller() {
        let scn = SimScenario::default();
        let day = simulate_day(&scn, &scn.stocks[0], scn.dates[0]);
        let cell = FlowCell::from_trades(&day.tape.trades);
        assert_eq!(cell.market_ti_units(), 0);
        assert!(day.tape.trades.iter().all(|t| t.buyer != TraderCategory::Other));
    }
}
