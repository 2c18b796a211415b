//! Signed order flow per trader category.
//!
//! Amounts are accumulated in integer micro-currency units so that the
//! bookkeeping identities (total = aggressive + passive, market-wide total of
//! zero) hold exactly.

use crate::types::{TradeEvent, TraderCategory};

const UNITS_PER_CURRENCY: f64 = 1e6;

/// Traded value of one trade in micro-currency units.
pub fn value_units(trade: &TradeEvent) -> i64 {
    (trade.volume() * UNITS_PER_CURRENCY).round() as i64
}

pub fn units_to_currency(u: i64) -> f64 {
    u as f64 / UNITS_PER_CURRENCY
}

/// Aggressive and passive signed flow of every category over one period.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCell {
    pub di: [i64; TraderCategory::COUNT],
    pub si: [i64; TraderCategory::COUNT],
}

impl FlowCell {
    /// The buyer accrues `+V`, the seller `-V`; each leg is booked as
    /// aggressive or passive depending on who initiated the trade.
    pub fn add(&mut self, trade: &TradeEvent) {
        let v = value_units(trade);
        let (b, s) = (trade.buyer.index(), trade.seller.index());
        match trade.side {
            crate::types::Side::Buy => {
                self.di[b] += v;
                self.si[s] -= v;
            }
            crate::types::Side::Sell => {
                self.si[b] += v;
                self.di[s] -= v;
            }
        }
    }

    pub fn from_trades<'a>(trades: impl IntoIterator<Item = &'a TradeEvent>) -> Self {
        let mut c = FlowCell::default();
        for t in trades {
            c.add(t);
        }
        c
    }

    pub fn ti_units(&self, cat: TraderCategory) -> i64 {
        self.di[cat.index()] + self.si[cat.index()]
    }

    pub fn ti(&self, cat: TraderCategory) -> f64 {
        units_to_currency(self.ti_units(cat))
    }

    pub fn di(&self, cat: TraderCategory) -> f64 {
        units_to_currency(self.di[cat.index()])
    }

    pub fn si(&self, cat: TraderCategory) -> f64 {
        units_to_currency(self.si[cat.index()])
    }

    /// Sum of total imbalances over every category, OTHER included.
    pub fn market_ti_units(&self) -> i64 {
        TraderCategory::ALL.iter().map(|&c| self.ti_units(c)).sum()
    }

    /// Flow of the NON_HFT categories taken together.
    pub fn non_hft_units(&self) -> (i64, i64) {
        TraderCategory::ALL
            .iter()
            .filter(|c| c.is_non_hft())
            .fold((0, 0), |(d, s), c| (d + self.di[c.index()], s + self.si[c.index()]))
    }

    pub fn merge(&mut self, other: &FlowCell) {
        for i in 0..TraderCategory::COUNT {
            self.di[i] += other.di[i];
            self.si[i] += other.si[i];
        }
    }
}

/// Total signed flow of `cat` over `trades`.
pub fn trading_imbalance(trades: &[TradeEvent], cat: TraderCategory) -> f64 {
    FlowCell::from_trades(trades).ti(cat)
}

/// Aggressive and passive signed flow of `cat` over `trades`.
pub fn demand_supply_imbalance(trades: &[TradeEvent], cat: TraderCategory) -> (f64, f64) {
    let c = FlowCell::from_trades(trades);
    (c.di(cat), c.si(cat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Micros, Side};
    use proptest::prelude::*;

    fn trade(side: Side, buyer: TraderCategory, seller: TraderCategory) -> TradeEvent {
        TradeEvent {
            ts: Micros(0),
            price: 5.0,
            quantity: 10.0,
            side,
            buyer,
            seller,
        }
    }

    #[test]
    fn buyer_initiated_trade() {
        use TraderCategory::*;
        let t = [trade(Side::Buy, PureHftMm, NonHftClient)];
        assert_eq!(trading_imbalance(&t, PureHftMm), 50.0);
        assert_eq!(demand_supply_imbalance(&t, PureHftMm), (50.0, 0.0));
        assert_eq!(trading_imbalance(&t, NonHftClient), -50.0);
        assert_eq!(demand_supply_imbalance(&t, NonHftClient), (0.0, -50.0));
        assert_eq!(trading_imbalance(&t, IbHftMm), 0.0);
    }

    #[test]
    fn seller_initiated_trade() {
        use TraderCategory::*;
        let t = [trade(Side::Sell, IbHftMm, IbHftOwn)];
        assert_eq!(demand_supply_imbalance(&t, IbHftMm), (0.0, 50.0));
        assert_eq!(demand_supply_imbalance(&t, IbHftOwn), (-50.0, 0.0));
    }

    #[test]
    fn same_category_on_both_sides_nets_out() {
        use TraderCategory::*;
        let t = [trade(Side::Sell, Other, Other)];
        let c = FlowCell::from_trades(&t);
        assert_eq!(c.ti_units(Other), 0);
        assert_eq!(c.di(Other), -50.0);
        assert_eq!(c.si(Other), 50.0);
    }

    fn arb_trade() -> impl Strategy<Value = TradeEvent> {
        (1u32..20_000, 1u32..5_000, any::<bool>(), 0usize..10, 0usize..10).prop_map(
            |(p, q, buy, b, s)| TradeEvent {
                ts: Micros(0),
                price: p as f64 * 0.001,
                quantity: q as f64,
                side: if buy { Side::Buy } else { Side::Sell },
                buyer: TraderCategory::ALL[b],
                seller: TraderCategory::ALL[s],
            },
        )
    }

    proptest! {
        #[test]
        fn identities_hold(trades in proptest::collection::vec(arb_trade(), 0..300)) {
            let c = FlowCell::from_trades(&trades);
            prop_assert_eq!(c.market_ti_units(), 0);
            for cat in TraderCategory::ALL {
                prop_assert_eq!(c.ti_units(cat), c.di[cat.index()] + c.si[cat.index()]);
            }
            let gross: i64 = trades.iter().map(value_units).sum();
            let aggressive: i64 = c.di.iter().map(|v| v.abs()).sum();
            prop_assert!(aggressive <= gross);
        }
    }
}
