"""NAV-based mint/redeem vault with the full risk module: coverage
gating, adaptive mint throttle, constant redeem cap, FIFO redemption
queue, staleness pause, sticky coverage pause, reserve replenishment,
and the solvency lower-bound oracle.

Coverage comparisons are exact integer cross-multiplications; divisions
appear only in reported ratios, never in guards, so rounding can't sneak
a state change past a threshold.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfigError
from .fixedpoint import WAD, wdiv, wmul, wmul_up
from .ledger import CLAW, RESERVE, Ledger
from .oracle import OracleOnChainState, check_staleness


@dataclass(frozen=True)
class RiskParams:
    gamma_min: int        # minimum coverage ratio (wad, > 1)
    gamma_pause: int      # hard-pause coverage (wad, <= gamma_min)
    delta_max: int        # per-epoch drift cap (wad), shared with the index
    tau: int              # max oracle staleness (epochs)
    mint_cap_base: int    # C^mint_0, tokens per epoch (wad)
    redeem_cap_base: int  # C^red_0, reserve per epoch (wad)
    headroom_ref: int     # h*, coverage headroom for a fully open throttle (wad)
    replenish_rate: int   # rho per epoch (wad)

    def validate(self) -> None:
        if self.gamma_min <= WAD:
            raise ConfigError("gamma_min must exceed 1")
        if self.gamma_pause > self.gamma_min:
            raise ConfigError("gamma_pause must not exceed gamma_min")
        if self.mint_cap_base <= 0 or self.redeem_cap_base <= 0:
            raise ConfigError("per-epoch caps must be positive")
        if self.headroom_ref <= 0:
            raise ConfigError("headroom_ref must be positive")
        if self.replenish_rate < 0:
            raise ConfigError("replenish_rate must be non-negative")


@dataclass(frozen=True)
class QueuedClaim:
    amount: int      # tokens escrowed in vault custody, burned at drain
    claimant: str
    enqueued_at: int


@dataclass(frozen=True)
class SolvencyBound:
    """Closed-form coverage floor under capped index growth."""

    gamma0: int
    horizon: int
    lower_bound: int              # wad floor of the exact bound
    lower_bound_exact: Fraction
    required_rho: float           # replenishment keeping coverage >= gamma_min at T


@dataclass(frozen=True)
class MintResult:
    minted: int
    rejected: str | None = None

    @property
    def ok(self) -> bool:
        return self.rejected is None


@dataclass(frozen=True)
class RedeemResult:
    status: str          # "paid" | "queued" | "rejected"
    amount: int = 0      # reserve paid out (status == "paid")
    reason: str | None = None


def coverage_lt(reserves: int, supply: int, nav: int, gamma: int) -> bool:
    """Exact test of reserves / (supply * nav) < gamma. supply == 0 counts
    as infinite coverage."""
    return reserves * WAD * WAD < gamma * supply * nav


def coverage_ratio(reserves: int, supply: int, nav: int) -> int | None:
    """Reported coverage (wad, floored); None when supply is zero."""
    if supply == 0:
        return None
    return reserves * WAD * WAD // (supply * nav)


def coverage_exact(reserves: int, supply: int, nav: int) -> Fraction:
    if supply == 0:
        raise ConfigError("coverage undefined at zero supply")
    return Fraction(reserves * WAD * WAD, supply * nav)


def solvency_bound(gamma0: int, params: RiskParams, horizon: int) -> SolvencyBound:
    """Coverage floor Gamma_0 * ((1+rho)/(1+delta_max))^T and the
    replenishment rate that keeps horizon-T coverage above gamma_min."""
    if gamma0 < params.gamma_min:
        raise ConfigError("solvency bound assumes gamma0 >= gamma_min")
    ratio = Fraction(WAD + params.replenish_rate, WAD + params.delta_max)
    exact = Fraction(gamma0, WAD) * ratio**horizon
    required = (1 + params.delta_max / WAD) * (
        (params.gamma_min / gamma0) ** (1.0 / horizon)
    ) - 1.0
    return SolvencyBound(
        gamma0=gamma0,
        horizon=horizon,
        lower_bound=int(exact * WAD),
        lower_bound_exact=exact,
        required_rho=required,
    )


class Vault:
    """Vault state machine bound to one ledger account and one oracle.

    All state-changing entry points run the pre-call risk step first:
    staleness flag, coverage-pause flag, per-epoch cap computation, usage
    reset on epoch change, and a FIFO drain of the redemption queue.
    """

    ADDRESS = "vault"

    def __init__(
        self,
        ledger: Ledger,
        oracle_state: OracleOnChainState,
        params: RiskParams,
        initial_index: int,
        address: str = ADDRESS,
    ):
        params.validate()
        if initial_index <= 0:
            raise ConfigError("initial index must be positive")
        self.ledger = ledger
        self.oracle = oracle_state
        self.params = params
        self.initial_index = initial_index
        self.address = address
        ledger.ensure_account(address)
        self.supply: int = 0            # S_t; equals cumulative mints - burns
        self.mint_used: int = 0         # U^mint, tokens this epoch
        self.redeem_used: int = 0       # U^red, reserve this epoch
        self.queue: deque[QueuedClaim] = deque()
        self.paused: bool = False       # sticky; cleared only by unpause()
        self.stale_paused: bool = False
        self.mint_cap: int = 0
        self.redeem_cap: int = params.redeem_cap_base
        self._usage_epoch: int | None = None

    # -- pure views --------------------------------------------------------

    @property
    def reserves(self) -> int:
        return self.ledger.balance(self.address, RESERVE)

    def nav(self) -> int:
        """Published index over its initialization value."""
        return wdiv(self.oracle.published_value, self.initial_index)

    def coverage(self) -> int | None:
        return coverage_ratio(self.reserves, self.supply, self.nav())

    # -- risk module -------------------------------------------------------

    def begin_epoch(self, now: int | None = None) -> None:
        """Epoch-boundary hook: replenish reserves, then run the pre-call
        step (so the per-epoch inequality of the coverage-decay bound is
        exact)."""
        self.replenish()
        self.pre_call_check(now)

    def replenish(self) -> None:
        """Reserves grow by at least rho per epoch (ceil on the wei so the
        stated A' >= A*(1+rho) holds exactly)."""
        if self.params.replenish_rate == 0:
            return
        delta = wmul_up(self.reserves, self.params.replenish_rate)
        if delta > 0:
            self.ledger.external_reserve_in(self.address, delta, "replenish")

    def pre_call_check(self, now: int | None = None) -> dict:
        now = self.ledger.epoch if now is None else now
        if self._usage_epoch != now:
            self.mint_used = 0
            self.redeem_used = 0
            self._usage_epoch = now

        self.stale_paused = check_staleness(self.oracle, now)
        nav = self.nav()
        if not self.paused and self.supply > 0 and coverage_lt(
            self.reserves, self.supply, nav, self.params.gamma_pause
        ):
            self.paused = True
            self.ledger.log.append(now, "CoverageBreach", {
                "coverage": coverage_ratio(self.reserves, self.supply, nav),
                "gamma_pause": self.params.gamma_pause,
            })

        # Adaptive throttle: issuance cannot eat the buffer above gamma_min.
        gamma = coverage_ratio(self.reserves, self.supply, nav)
        if gamma is None:
            headroom = self.params.headroom_ref
        else:
            headroom = max(0, gamma - self.params.gamma_min)
        open_frac = min(WAD, wdiv(headroom, self.params.headroom_ref))
        self.mint_cap = wmul(self.params.mint_cap_base, open_frac)
        self.redeem_cap = self.params.redeem_cap_base

        if not self.paused and not self.stale_paused:
            self._drain_queue(now, nav)
        return {
            "nav": nav,
            "coverage": gamma,
            "mint_cap": self.mint_cap,
            "redeem_cap": self.redeem_cap,
            "stale_paused": self.stale_paused,
            "paused": self.paused,
        }

    def _drain_queue(self, now: int, nav: int) -> None:
        """Honor queued claims FIFO, whole claims only, at drain-time NAV,
        subject to the redeem cap, coverage, and reserve sufficiency.
        Stops at the first claim that cannot be honored (no reordering)."""
        while self.queue:
            claim = self.queue[0]
            payout = wmul(claim.amount, nav)
            if self.redeem_used + payout > self.redeem_cap:
                break
            if self.reserves < payout:
                break
            post_supply = self.supply - claim.amount
            if post_supply > 0 and coverage_lt(
                self.reserves - payout, post_supply, nav, self.params.gamma_min
            ):
                break
            self.queue.popleft()
            self.ledger.vault_burn(self.address, claim.amount, {"queued": True})
            self.supply -= claim.amount
            self.ledger.transfer(self.address, claim.claimant, RESERVE, payout)
            self.redeem_used += payout
            self.ledger.log.append(now, "Redeemed", {
                "caller": claim.claimant,
                "tokens": claim.amount,
                "paid": payout,
                "queued_since": claim.enqueued_at,
            })

    # -- state-changing operations ------------------------------------------

    def mint(self, caller: str, deposit: int) -> MintResult:
        """Deposit reserve currency, receive deposit / NAV tokens."""
        now = self.ledger.epoch
        self.pre_call_check(now)

        def _reject(reason: str) -> MintResult:
            self.ledger.log.append(now, "MintRejected", {"caller": caller, "reason": reason})
            return MintResult(0, reason)

        if self.paused:
            return _reject("paused")
        if self.stale_paused:
            return _reject("stale")
        if deposit <= 0:
            return _reject("non_positive_deposit")
        nav = self.nav()
        tokens = wdiv(deposit, nav)
        if tokens <= 0:
            return _reject("zero_mint")
        if self.mint_used + tokens > self.mint_cap:
            return _reject("rate_limited")
        if coverage_lt(
            self.reserves + deposit, self.supply + tokens, nav, self.params.gamma_min
        ):
            return _reject("coverage")
        if self.ledger.balance(caller, RESERVE) < deposit:
            return _reject("insufficient_funds")

        self.ledger.transfer(caller, self.address, RESERVE, deposit)
        self.ledger.vault_mint(caller, tokens)
        self.supply += tokens
        self.mint_used += tokens
        self.ledger.log.append(now, "Minted", {
            "caller": caller, "deposit": deposit, "tokens": tokens, "nav": nav,
        })
        return MintResult(tokens)

    def redeem(self, caller: str, tokens: int) -> RedeemResult:
        """Burn tokens for tokens * NAV reserve, or queue the claim.

        Queued claims escrow their tokens in vault custody and burn at
        drain time, priced at drain-epoch NAV; a queued claim is honored
        whole or not at all.
        """
        now = self.ledger.epoch
        if tokens <= 0:
            return RedeemResult("rejected", reason="non_positive_amount")
        if self.ledger.balance(caller, CLAW) < tokens:
            return RedeemResult("rejected", reason="insufficient_tokens")
        self.pre_call_check(now)

        nav = self.nav()
        payout = wmul(tokens, nav)
        queue_reason: str | None = None
        if self.paused:
            queue_reason = "paused"
        elif self.stale_paused:
            queue_reason = "stale"
        elif self.queue:
            # Claims still pending after the pre-call drain: a new redeem
            # may not jump ahead of them, so it joins the back.
            queue_reason = "queue_backlog"
        elif self.redeem_used + payout > self.redeem_cap:
            queue_reason = "rate_limited"
        elif self.supply - tokens > 0 and coverage_lt(
            self.reserves - payout, self.supply - tokens, nav, self.params.gamma_min
        ):
            queue_reason = "coverage"
        elif self.reserves < payout:
            queue_reason = "reserves"

        if queue_reason is not None:
            self.ledger.transfer(caller, self.address, CLAW, tokens)
            self.queue.append(QueuedClaim(tokens, caller, now))
            self.ledger.log.append(now, "RedeemQueued", {
                "caller": caller, "tokens": tokens, "reason": queue_reason,
            })
            return RedeemResult("queued", reason=queue_reason)

        self.ledger.vault_burn(caller, tokens)
        self.supply -= tokens
        self.ledger.transfer(self.address, caller, RESERVE, payout)
        self.redeem_used += payout
        self.ledger.log.append(now, "Redeemed", {
            "caller": caller, "tokens": tokens, "paid": payout, "queued_since": None,
        })
        return RedeemResult("paid", payout)

    def unpause(self) -> None:
        """Governance action: the coverage pause is sticky by design."""
        self.paused = False
        self.ledger.log.append(self.ledger.epoch, "Unpaused", {})

    # -- export --------------------------------------------------------------

    def state_dump(self) -> dict:
        return {
            "reserves": self.reserves,
            "supply": self.supply,
            "mint_used": self.mint_used,
            "redeem_used": self.redeem_used,
            "mint_cap": self.mint_cap,
            "redeem_cap": self.redeem_cap,
            "queue": [
                {"amount": c.amount, "claimant": c.claimant, "enqueued_at": c.enqueued_at}
                for c in self.queue
            ],
            "paused": self.paused,
            "stale_paused": self.stale_paused,
        }
