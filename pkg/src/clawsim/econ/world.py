"""One regime world: ledger + oracle + vault + agents driven by a frozen
trajectory. Four worlds with the same trajectory and different regimes is
a regime comparison.

Settlement backends per regime:
  fiat / raw_cost        stage-by-stage nominal USDC transfers; a failed
                         stage leaves earlier stages settled (partial).
  usdc_internal_index    stage-by-stage USDC with per-hop conversion
                         through each agent's private index; disagreement
                         beyond tolerance risks reconciliation failure.
  clawcoin               budget pre-committed to an escrow; one atomic
                         multi-hop bundle settles the whole chain, so
                         partial settlement and budget overrun are
                         structurally impossible (asserted, not measured).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ClawError
from ..fixedpoint import WAD, wdiv, wmul
from ..index_core import IndexPipeline, PriceQuote
from ..ledger import CLAW, RESERVE, Ledger
from ..oracle import (
    MODE_DON,
    CommitteeConfig,
    KeyRegistry,
    OracleOnChainState,
    aggregate_committee,
    aggregate_don,
    build_commitment,
    publish,
    sign_attestation,
)
from ..settlement import HopPayment, atomic_multihop, escrow_open, escrow_refund
from ..vault import Vault
from .agents import AgentState
from .config import ScenarioConfig
from .trajectory import TaskSpec, Trajectory, generate_trajectory

CUSTOMERS = "customers"


class InvariantViolation(ClawError):
    """A structural guarantee failed at runtime; the run is invalid."""


@dataclass
class Workflow:
    task: TaskSpec
    submitted: int
    stage_agents: tuple[str, ...]
    stage_quotes: tuple[int, ...]   # frozen at acceptance, settlement unit
    budget: int                     # settlement unit
    escrow_id: str | None
    stage: int = 0
    settled: int = 0
    invoices: list[int] = field(default_factory=list)
    done: bool = False
    failed_reason: str | None = None


@dataclass
class EpochSample:
    epoch: int
    raw_index: int
    published: int
    nav: int
    capacity: int                  # passive endowed observer, work units
    prices: dict[str, int]         # agent -> effective unit price this epoch
    queue_len: int


class RegimeWorld:
    def __init__(self, config: ScenarioConfig, trajectory: Trajectory | None = None):
        self.config = config
        self.regime = config.regime
        self.trajectory = trajectory or generate_trajectory(config)
        self.ledger = Ledger()
        self.registry = KeyRegistry(f"world:{config.seed}".encode())

        members = tuple(f"oracle{i}" for i in range(config.committee.size))
        self.committee = CommitteeConfig(members, config.committee.threshold,
                                         config.committee.mode)
        for node in members:
            self.registry.register(node)
        self.registry.register(self.committee.writer_id())

        self.pipeline = IndexPipeline(config.basket)
        self.initial_index = self._bootstrap_index()
        self.oracle_state = OracleOnChainState(
            published_value=self.initial_index,
            published_at=0,
            basket_version=config.basket.version,
            commitment_root=bytes(32),
            max_staleness=config.risk.tau,
            writer_id=self.committee.writer_id(),
        )
        self.vault = Vault(self.ledger, self.oracle_state, config.risk,
                           self.initial_index)
        self._genesis()

        self.agents: dict[str, AgentState] = {}
        for spec in config.agents:
            agent = AgentState(spec, self.regime)
            agent.treasury = self._endow(spec.initial_units)
            self.agents[spec.name] = agent

        # Passive observers for the capacity family: one fixed endowment
        # per agent spec, revalued against the regime's unit cost every
        # epoch with no flows. Stats average over observers so one
        # vendor's idiosyncratic wander cannot dominate the family.
        self.observers = [AgentState(spec, self.regime) for spec in config.agents]
        self.observer_units = [spec.initial_units for spec in config.agents]
        self.observer_values = [
            wmul(units, self.initial_index) for units in self.observer_units
        ]
        self.capacity_series: list[list[int]] = [[] for _ in self.observers]

        self.samples: list[EpochSample] = []
        self.inflight: list[Workflow] = []
        self.finished: list[Workflow] = []
        self.rejected_tasks = 0
        self.submitted_tasks = 0
        self.overruns = 0
        self.partials = 0
        self.delegated_stages = 0
        self.settled_stages = 0
        self.total_stages = 0
        self.volume_units = 0

    # -- setup -----------------------------------------------------------------

    def _bootstrap_index(self) -> int:
        quotes = [
            PriceQuote(pair.split("/", 1)[0], pair.split("/", 1)[1], p_in, p_out)
            for pair, (p_in, p_out) in sorted(self.config.vendor_prices.items())
        ]
        state = self.pipeline.step(quotes, epoch=0)
        return state.smoothed

    def _genesis(self) -> None:
        """Seed the vault at the configured initial coverage and endow the
        aggregate customer account in the settlement asset."""
        self.ledger.ensure_account(CUSTOMERS)
        if self.regime == "clawcoin":
            supply = wmul(self.config.market.task_units_mean * 10_000, self.initial_index)
            self.ledger.vault_mint(CUSTOMERS, supply, {"genesis": True})
            self.vault.supply += supply
            reserves = wmul(supply, self.config.initial_coverage)
            self.ledger.external_reserve_in(self.vault.address, reserves, "genesis")
        else:
            self.ledger.external_reserve_in(
                CUSTOMERS,
                wmul(self.config.market.task_units_mean * 10_000, self.initial_index),
                "genesis",
            )

    def _endow(self, units: int) -> int:
        """Initial treasury in the regime's accounting unit for equal
        starting purchasing power across regimes."""
        if self.regime in ("fiat", "raw_cost"):
            return wmul(units, self.initial_index)
        if self.regime == "usdc_internal_index":
            return units  # private unit is one standardized work unit
        return wmul(units, self.initial_index)  # claw: 1 token = 1/I_0 units

    # -- oracle ------------------------------------------------------------------

    def _publish(self, epoch: int, prices: dict[str, tuple[int, int]]) -> int:
        quotes = [
            PriceQuote(pair.split("/", 1)[0], pair.split("/", 1)[1], p[0], p[1],
                       observed_at=epoch)
            for pair, p in sorted(prices.items())
        ]
        state = self.pipeline.step(quotes, epoch)
        stale = self.config.adversary.stale_oracle
        if stale and stale.covers(epoch):
            return state.raw  # adversary delays every submission this epoch
        # Honest nodes clip their submission to the on-chain band so a
        # stale gap cannot deadlock the defense-in-depth drift check.
        on_value = self.oracle_state.published_value
        step = wmul(on_value, self.config.basket.drift_cap)
        submit = max(on_value - step, min(on_value + step, state.smoothed))
        root = build_commitment(quotes)
        atts = [
            sign_attestation(submit, epoch, self.config.basket.version, root,
                             self.registry.key_of(node), self.committee)
            for node in self.committee.members
        ]
        if self.committee.mode == MODE_DON:
            combined = aggregate_don(atts, self.committee, self.registry)
        else:
            combined = aggregate_committee(atts, self.committee, self.registry)
        result = publish(combined, self.oracle_state, self.config.basket.drift_cap,
                         self.registry, self.ledger.log)
        if not result.accepted:
            raise InvariantViolation(f"honest publication rejected: {result.reason}")
        return state.raw

    # -- workflows ---------------------------------------------------------------

    def nav(self) -> int:
        return wdiv(self.oracle_state.published_value, self.initial_index)

    def _alive_agents(self) -> list[AgentState]:
        return [a for a in self.agents.values() if a.alive]

    def _submit_task(self, task: TaskSpec, epoch: int, raw_index: int) -> None:
        alive = self._alive_agents()
        if not alive:
            return
        self.submitted_tasks += 1
        nav = self.nav()
        seq = task.rotation_seq()
        agents = tuple(
            alive[(seq + s) % len(alive)].spec.name for s in range(task.depth)
        )
        quotes = tuple(
            wmul(self.agents[name].effective_unit_price(nav), units)
            for name, units in zip(agents, task.stage_units)
        )
        total_units = sum(task.stage_units)
        fair = wmul(raw_index, total_units)
        if self.regime == "clawcoin":
            fair = wdiv(fair, nav)
        margin = WAD + int(task.budget_margin * WAD)
        budget = wmul(fair, margin)
        if sum(quotes) > budget:
            self.rejected_tasks += 1
            return
        escrow_id = None
        if self.regime == "clawcoin":
            escrow_id = f"esc-{task.task_id}"
            result = escrow_open(self.ledger, escrow_id, CUSTOMERS, budget,
                                 deadline=epoch + task.depth + 2)
            if not result.ok:
                self.rejected_tasks += 1
                return
        self.total_stages += task.depth
        self.delegated_stages += task.depth - 1
        self.inflight.append(Workflow(
            task=task, submitted=epoch, stage_agents=agents,
            stage_quotes=quotes, budget=budget, escrow_id=escrow_id,
        ))

    def _advance_workflows(self, epoch: int) -> None:
        nav = self.nav()
        still: list[Workflow] = []
        for wf in self.inflight:
            self._advance_one(wf, epoch, nav)
            (self.finished if wf.done else still).append(wf)
        self.inflight = still

    def _advance_one(self, wf: Workflow, epoch: int, nav: int) -> None:
        s = wf.stage
        name = wf.stage_agents[s]
        agent = self.agents[name]
        if not agent.alive:
            self._fail(wf, "agent_exit")
            return

        p_fail = self.config.market.stage_failure_rate
        if self.regime == "usdc_internal_index" and s > 0:
            payer = self.agents[wf.stage_agents[0]]
            a, b = payer.private_nav(), agent.private_nav()
            disagreement = abs(a - b) / max(a, 1)
            tol = self.config.market.reconcile_tolerance
            p_fail += self.config.market.reconcile_rate * min(1.0, disagreement / tol)
        if wf.task.failure_draws[s] < p_fail:
            self._fail(wf, "execution")
            return

        units = wf.task.stage_units[s]
        vendor_cost = wmul(agent.own_cost, units)  # reserve, at execution time
        if self.regime == "clawcoin":
            invoice = wf.stage_quotes[s]  # frozen: the escrowed quote is the contract
        else:
            invoice = wmul(agent.effective_unit_price(nav), units)
        wf.invoices.append(invoice)

        if self.regime != "clawcoin":
            if wf.settled + invoice > wf.budget:
                self.overruns += 1
                self._fail(wf, "budget_overrun")
                return
            result = self.ledger.transfer(CUSTOMERS, name, RESERVE, invoice)
            if not result.committed:
                self._fail(wf, "settlement")
                return
            wf.settled += invoice
            self.settled_stages += 1
            self.volume_units += units
            agent.add_revenue(agent.to_accounting_unit(invoice, nav))
            agent.add_cost(agent.to_accounting_unit(vendor_cost, nav))
        else:
            # costs accrue at execution; payment settles atomically at the end
            agent.add_cost(agent.to_accounting_unit(vendor_cost, nav))

        wf.stage += 1
        if wf.stage == wf.task.depth:
            if self.regime == "clawcoin":
                self._settle_claw(wf)
            else:
                wf.done = True

    def _settle_claw(self, wf: Workflow) -> None:
        custody = self.ledger.escrows[wf.escrow_id].account
        hops = [
            HopPayment(custody, name, quote, f"{wf.task.task_id}:{i}")
            for i, (name, quote) in enumerate(zip(wf.stage_agents, wf.stage_quotes))
        ]
        result = atomic_multihop(self.ledger, hops, escrow_id=wf.escrow_id)
        if not result.committed:
            raise InvariantViolation(f"gated settlement bundle rejected: {result.reason}")
        for name, quote in zip(wf.stage_agents, wf.stage_quotes):
            self.agents[name].add_revenue(quote)  # claw is the accounting unit
        wf.settled = sum(wf.stage_quotes)
        self.settled_stages += wf.task.depth
        self.volume_units += sum(wf.task.stage_units)
        wf.done = True

    def _fail(self, wf: Workflow, reason: str) -> None:
        wf.done = True
        wf.failed_reason = reason
        if self.regime == "clawcoin":
            if wf.settled:
                raise InvariantViolation("clawcoin workflow settled partially")
        elif wf.settled > 0:
            self.partials += 1

    def _refund_expired_escrows(self, epoch: int) -> None:
        for eid, rec in list(self.ledger.escrows.items()):
            if epoch > rec.deadline and self.ledger.balance(rec.account, CLAW) > 0:
                escrow_refund(self.ledger, eid)

    # -- risk-event adversaries ----------------------------------------------------

    def _redemption_burst(self, epoch: int) -> None:
        burst = self.config.adversary.redemption_burst
        if not burst or burst.epoch != epoch or self.regime != "clawcoin":
            return
        balance = self.ledger.balance(CUSTOMERS, CLAW)
        amount = wmul(balance, burst.fraction)
        if amount > 0:
            self.vault.redeem(CUSTOMERS, amount)

    # -- capacity observer -----------------------------------------------------------

    def _observer_capacity(self, i: int, raw_index: int) -> int:
        """Work units a fixed endowment funds, in the regime's accounting
        view. Nominal regimes divide the USDC endowment by the unit cost
        they see (current basket cost for fiat, the observer's own
        provider-specific instantaneous cost for raw_cost). The internal
        regime budgets in private units marked at the agent's index
        estimate, so realized capacity is the unit endowment scaled by
        estimate/truth: exact tracking (zero lag) makes it constant,
        matching the clawcoin case, which holds constant work per token
        by construction."""
        obs = self.observers[i]
        if self.regime == "fiat":
            return wdiv(self.observer_values[i], raw_index)
        if self.regime == "raw_cost":
            return wdiv(self.observer_values[i], obs.primary_cost or raw_index)
        if self.regime == "usdc_internal_index":
            estimate = obs.private_index
            truth = obs.own_cost
            if estimate == 0 or truth == 0:
                return self.observer_units[i]
            return wdiv(wmul(self.observer_units[i], estimate), truth)
        return self.observer_units[i]  # clawcoin: tokens / I_0

    # -- main loop -----------------------------------------------------------------

    def run(self) -> None:
        config = self.config
        for ed in self.trajectory.epochs:
            epoch = self.ledger.advance_epoch()
            assert epoch == ed.epoch
            raw_index = self._publish(epoch, ed.prices)
            if self.regime == "clawcoin":
                self.vault.begin_epoch()
            nav = self.nav()

            for agent in self.agents.values():
                if agent.alive:
                    agent.observe(epoch, ed.prices, config, nav)
            for obs in self.observers:
                obs.observe(epoch, ed.prices, config, nav)

            # keep-alive burn: every trading agent consumes baseline work
            for agent in self._alive_agents():
                burn = wmul(agent.spec.baseline_burn_units, agent.own_cost)
                agent.add_cost(agent.to_accounting_unit(burn, nav))

            self._advance_workflows(epoch)
            for task in ed.tasks:
                self._submit_task(task, epoch, raw_index)
            self._redemption_burst(epoch)
            if self.regime == "clawcoin":
                self._refund_expired_escrows(epoch)

            prices_now = {
                a.spec.name: a.effective_unit_price(nav)
                for a in self._alive_agents()
            }
            caps = [
                self._observer_capacity(i, raw_index)
                for i in range(len(self.observers))
            ]
            for i, c in enumerate(caps):
                self.capacity_series[i].append(c)
            self.samples.append(EpochSample(
                epoch=epoch,
                raw_index=raw_index,
                published=self.oracle_state.published_value,
                nav=nav,
                capacity=sum(caps) // len(caps),
                prices=prices_now,
                queue_len=len(self.vault.queue),
            ))

            for agent in self.agents.values():
                agent.close_epoch(epoch)

        self._assert_structural_zeros()

    def _assert_structural_zeros(self) -> None:
        if self.regime == "clawcoin":
            if self.partials != 0:
                raise InvariantViolation("clawcoin partial settlements must be zero")
            if self.overruns != 0:
                raise InvariantViolation("clawcoin budget overruns must be zero")


def run_scenario(config: ScenarioConfig, trajectory: Trajectory | None = None):
    """Run one regime world; returns (MetricsReport, EventLog)."""
    from .metrics import build_report
    world = RegimeWorld(config, trajectory)
    world.run()
    return build_report(world), world.ledger.log
