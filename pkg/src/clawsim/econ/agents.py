"""Agent policies: own-cost tracking, private index (internal regime),
sticky quoting with repricing thresholds, treasury accounting in the
regime's unit, and the three-round bankruptcy rule.

Treasuries are denominated in the prevailing accounting unit of the
regime: USDC for fiat and raw_cost, the agent's private compute unit for
usdc_internal_index (USDC flows convert at the agent's current index
estimate), and ClawCoin for clawcoin. Execution capacity converts a
regime-unit treasury into standardized work units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..fixedpoint import WAD, wdiv, wmul
from ..index_core import PriceQuote, pair_cost, smooth_and_clip
from .config import AgentSpec, ScenarioConfig


def step_treasury(treasury: int, revenue: int, cost: int) -> int:
    """One round of treasury dynamics, exact in the regime's unit."""
    return treasury + revenue - cost


def execution_capacity(treasury: int, regime: str, *, raw_index: int = 0,
                       own_cost: int = 0, initial_index: int = 0) -> int:
    """Standardized work units a regime-unit treasury can fund.

    fiat divides by the economy's current basket cost; raw_cost by the
    agent's own instantaneous provider cost; clawcoin tokens buy constant
    work per token (1/I_0 units each); the internal regime's treasury is
    already kept in the agent's private compute unit, whose definition is
    one standardized work unit at the agent's index estimate.
    """
    if regime == "fiat":
        return wdiv(treasury, raw_index)
    if regime == "raw_cost":
        return wdiv(treasury, own_cost)
    if regime == "clawcoin":
        return wdiv(treasury, initial_index)
    if regime == "usdc_internal_index":
        return treasury
    raise ValueError(f"unknown regime {regime!r}")


@dataclass
class AgentState:
    spec: AgentSpec
    regime: str
    treasury: int = 0              # regime accounting unit (wad)
    alive: bool = True
    exit_epoch: int | None = None

    # cost model
    own_cost: int = 0              # instantaneous own-mix unit cost (reserve)
    primary_cost: int = 0          # instantaneous cost at the primary provider
    smoothed_cost: int = 0         # agent EMA of own_cost
    cost_history: list[int] = field(default_factory=list)

    # private index (internal regime): same EMA + drift-cap pipeline over
    # the agent's own provider mix, observed with index_lag epochs of delay
    private_index: int = 0
    private_initial: int = 0

    # sticky quoting
    posted_price: int = 0          # unit price in the regime's quoting unit
    anchor_estimate: int = 0       # cost estimate embedded in posted_price
    repricings: int = 0

    # per-epoch flow accumulators (Eq. 1 applied at epoch end)
    revenue_epoch: int = 0
    cost_epoch: int = 0
    last_round_cost: int = 0

    def compute_own_cost(self, prices: dict[str, tuple[int, int]], workloads) -> int:
        total = 0
        for pair, weight in self.spec.provider_mix.items():
            p_in, p_out = prices[pair]
            model, vendor = pair.split("/", 1)
            total += wmul(weight, pair_cost(PriceQuote(model, vendor, p_in, p_out), workloads))
        return total

    def _primary_vendor(self) -> str:
        # the vendor carrying the largest share of the agent's mix
        by_vendor: dict[str, int] = {}
        for pair, weight in self.spec.provider_mix.items():
            by_vendor.setdefault(pair.split("/", 1)[1], 0)
            by_vendor[pair.split("/", 1)[1]] += weight
        return min(sorted(by_vendor), key=lambda v: -by_vendor[v])

    def compute_primary_cost(self, prices: dict[str, tuple[int, int]], workloads) -> int:
        """Unit cost seen through the primary provider alone: the
        provider-specific instantaneous price the raw_cost regime quotes
        from, with no cross-vendor diversification."""
        vendor = self._primary_vendor()
        total = 0
        share = sum(
            w for p, w in self.spec.provider_mix.items() if p.endswith("/" + vendor)
        )
        if share == 0:
            return self.compute_own_cost(prices, workloads)
        for pair, weight in self.spec.provider_mix.items():
            if not pair.endswith("/" + vendor):
                continue
            p_in, p_out = prices[pair]
            model, v = pair.split("/", 1)
            total += wmul(wdiv(weight, share),
                          pair_cost(PriceQuote(model, v, p_in, p_out), workloads))
        return total

    def observe(self, epoch: int, prices: dict[str, tuple[int, int]],
                config: ScenarioConfig, published_nav: int) -> None:
        """Update cost estimates, the private index, and the posted quote."""
        workloads = config.basket.workloads
        self.own_cost = self.compute_own_cost(prices, workloads)
        self.primary_cost = self.compute_primary_cost(prices, workloads)
        self.cost_history.append(self.own_cost)
        # Index-denominated regimes inherit the published channel's
        # smoothing discipline, so a shared-unit quote (cost / NAV) stays
        # flat through common movements. Nominal regimes have no
        # prescribed unit: each agent averages costs over its own ad-hoc
        # horizon, which is one source of cross-agent quote divergence.
        if self.smoothed_cost == 0:
            self.smoothed_cost = self.own_cost
        elif self.regime in ("clawcoin", "usdc_internal_index"):
            self.smoothed_cost = smooth_and_clip(
                self.own_cost, self.smoothed_cost,
                config.basket.smoothing, config.basket.drift_cap,
            )
        else:
            lam = self.spec.cost_smoothing
            self.smoothed_cost = (
                wmul(lam, self.smoothed_cost) + wmul(WAD - lam, self.own_cost)
            )

        lag = self.spec.index_lag
        if len(self.cost_history) > lag or (lag == 0 and self.cost_history):
            observed = self.cost_history[-1 - lag]
            if self.private_index == 0:
                self.private_index = observed
                self.private_initial = observed
            else:
                self.private_index = smooth_and_clip(
                    observed, self.private_index,
                    config.basket.smoothing, config.basket.drift_cap,
                )

        self._refresh_quote(published_nav)

    # -- quoting ---------------------------------------------------------

    def _estimate_in_quote_unit(self, published_nav: int) -> int:
        """Current cost estimate expressed in the regime's quoting unit."""
        if self.regime == "raw_cost":
            return self.primary_cost                 # provider-specific, no smoothing
        if self.regime == "fiat":
            return self.smoothed_cost                # nominal USDC
        if self.regime == "usdc_internal_index":
            if self.private_index == 0:
                return WAD
            # own compute units per work unit, via the private NAV
            return wdiv(self.smoothed_cost, self.private_nav())
        # clawcoin: shared NAV turns reserve costs into claw units
        return wdiv(self.smoothed_cost, published_nav)

    def private_nav(self) -> int:
        if self.private_initial == 0:
            return WAD
        return wdiv(self.private_index, self.private_initial)

    def _refresh_quote(self, published_nav: int) -> None:
        estimate = self._estimate_in_quote_unit(published_nav)
        if estimate <= 0:
            return
        if self.posted_price == 0:
            self.posted_price = wmul(WAD + self.spec.markup, estimate)
            self.anchor_estimate = estimate
            return
        moved = abs(estimate - self.anchor_estimate)
        if moved > wmul(self.anchor_estimate, self.spec.repricing_threshold):
            self.posted_price = wmul(WAD + self.spec.markup, estimate)
            self.anchor_estimate = estimate
            self.repricings += 1

    def effective_unit_price(self, published_nav: int) -> int:
        """Posted unit price as settled this epoch, in the settlement unit
        (USDC for fiat/raw/internal, ClawCoin for clawcoin)."""
        if self.regime == "usdc_internal_index":
            return wmul(self.posted_price, self.private_nav())
        return self.posted_price

    # -- treasury accounting ------------------------------------------------

    def to_accounting_unit(self, reserve_amount: int, published_nav: int) -> int:
        """Convert a reserve-currency flow into the regime's unit."""
        if self.regime in ("fiat", "raw_cost"):
            return reserve_amount
        if self.regime == "usdc_internal_index":
            est = self.private_index if self.private_index > 0 else self.smoothed_cost
            return wdiv(reserve_amount, est) if est > 0 else reserve_amount
        return wdiv(reserve_amount, published_nav)  # clawcoin

    def add_revenue(self, amount: int) -> None:
        self.revenue_epoch += amount

    def add_cost(self, amount: int) -> None:
        self.cost_epoch += amount

    def close_epoch(self, epoch: int) -> None:
        """Apply treasury dynamics and the bankruptcy look-ahead: exit at
        the first round where the treasury cannot cover three rounds of
        expected operating cost."""
        if not self.alive:
            self.revenue_epoch = self.cost_epoch = 0
            return
        self.treasury = step_treasury(self.treasury, self.revenue_epoch, self.cost_epoch)
        if self.cost_epoch > 0:
            self.last_round_cost = self.cost_epoch
        self.revenue_epoch = 0
        self.cost_epoch = 0
        if self.last_round_cost > 0 and self.treasury < 3 * self.last_round_cost:
            self.alive = False
            self.exit_epoch = epoch

    def capacity(self, raw_index: int, initial_index: int) -> int:
        return execution_capacity(
            self.treasury, self.regime,
            raw_index=raw_index, own_cost=self.own_cost or raw_index,
            initial_index=initial_index,
        )
