"""Metric families accumulated over a run, plus CSV/JSON emission.

Definitions the tables leave open are pinned here: price consistency is
1 - mean normalized cross-agent quote spread; settlement error is
|settled - quoted| / quoted averaged over completed workflows; recovery
is the longest stretch of epochs spent below 99% of the starting
capacity.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from ..fixedpoint import from_wad


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _pstdev(xs: list[float]) -> float:
    if not xs:
        return 0.0
    mu = _mean(xs)
    return math.sqrt(sum((x - mu) ** 2 for x in xs) / len(xs))


def gini(values: list[float]) -> float:
    """Gini coefficient over non-negative values."""
    xs = sorted(max(v, 0.0) for v in values)
    n = len(xs)
    total = sum(xs)
    if n == 0 or total == 0:
        return 0.0
    weighted = sum((i + 1) * x for i, x in enumerate(xs))
    return (2 * weighted) / (n * total) - (n + 1) / n


def max_drawdown(series: list[float]) -> float:
    peak = -math.inf
    worst = 0.0
    for x in series:
        peak = max(peak, x)
        if peak > 0:
            worst = max(worst, 1.0 - x / peak)
    return worst


def recovery_epochs(series: list[float]) -> int:
    """Longest run of consecutive epochs below 99% of the series start."""
    if not series:
        return 0
    floor = series[0] * 0.99
    longest = current = 0
    for x in series:
        current = current + 1 if x < floor else 0
        longest = max(longest, current)
    return longest


@dataclass
class MetricsReport:
    regime: str
    seed: int
    epochs: int

    # capacity (passive endowed observer)
    capacity_mean: float = 0.0
    capacity_variance: float = 0.0
    capacity_drawdown: float = 0.0
    capacity_recovery_epochs: int = 0
    capacity_cov: float = 0.0

    # pricing
    quote_volatility: float = 0.0
    repricings_per_100: float = 0.0
    cross_agent_dispersion: float = 0.0
    price_consistency: float = 0.0
    price_drift: float = 0.0

    # market
    acceptance_rate: float = 0.0
    completion_rate: float = 0.0
    overrun_rate: float = 0.0
    rejection_rate: float = 0.0

    # workflow
    failure_rate_by_depth: dict[str, float] = field(default_factory=dict)
    workflow_overrun_rate: float = 0.0
    partial_settlement_rate: float = 0.0
    settlement_error: float = 0.0

    # survival
    survivors: int = 0
    agent_count: int = 0
    median_treasury_change: float = 0.0
    treasury_gini: float = 0.0
    trade_volume_units: float = 0.0
    delegation_rate: float = 0.0

    # queue (clawcoin only; zeros elsewhere)
    queue_peak: int = 0
    queue_honored_within_5: float = 1.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def to_csv_rows(self) -> list[tuple[str, str, str]]:
        rows = []
        for key, value in sorted(asdict(self).items()):
            if isinstance(value, dict):
                for sub, v in sorted(value.items()):
                    rows.append((self.regime, f"{key}[{sub}]", repr(v)))
            else:
                rows.append((self.regime, key, repr(value)))
        return rows


def build_report(world) -> MetricsReport:
    """Assemble every metric family from a finished world."""
    samples = world.samples
    report = MetricsReport(
        regime=world.regime, seed=world.config.seed, epochs=world.config.epochs,
    )

    # capacity stats: per passive observer, then averaged across observers
    per_obs = [
        [from_wad(x) for x in series] for series in world.capacity_series if series
    ]
    if per_obs:
        report.capacity_mean = _mean([_mean(s) for s in per_obs])
        report.capacity_variance = _mean([_pstdev(s) ** 2 for s in per_obs])
        report.capacity_drawdown = _mean([max_drawdown(s) for s in per_obs])
        report.capacity_recovery_epochs = round(
            _mean([recovery_epochs(s) for s in per_obs])
        )
        report.capacity_cov = _mean(
            [_pstdev(s) / _mean(s) for s in per_obs if _mean(s)]
        )

    # pricing: cross-sectional dispersion and per-agent quote paths
    dispersion: list[float] = []
    spreads: list[float] = []
    paths: dict[str, list[float]] = {}
    for s in samples:
        quotes = [from_wad(v) for v in s.prices.values()]
        if len(quotes) >= 2 and _mean(quotes) > 0:
            dispersion.append(_pstdev(quotes) / _mean(quotes))
            spreads.append((max(quotes) - min(quotes)) / _mean(quotes))
        for name, v in s.prices.items():
            paths.setdefault(name, []).append(from_wad(v))
    report.cross_agent_dispersion = _mean(dispersion)
    report.price_consistency = max(0.0, 1.0 - _mean(spreads))
    vols = []
    drifts = []
    for series in paths.values():
        steps = [
            abs(b - a) / a for a, b in zip(series, series[1:]) if a > 0
        ]
        if steps:
            vols.append(_pstdev(steps) + _mean(steps))
        if series and series[0] > 0:
            drifts.append(abs(series[-1] - series[0]) / series[0])
    report.quote_volatility = _mean(vols)
    report.price_drift = _mean(drifts)
    agents = list(world.agents.values())
    report.repricings_per_100 = _mean(
        [a.repricings * 100.0 / world.config.epochs for a in agents]
    )

    # market + workflow
    done = world.finished
    completed = [w for w in done if w.failed_reason is None]
    accepted = world.submitted_tasks - world.rejected_tasks
    if world.submitted_tasks:
        report.acceptance_rate = accepted / world.submitted_tasks
        report.completion_rate = len(completed) / world.submitted_tasks
        report.rejection_rate = world.rejected_tasks / world.submitted_tasks
    if accepted:
        report.overrun_rate = world.overruns / accepted
        report.partial_settlement_rate = world.partials / accepted
    report.workflow_overrun_rate = report.overrun_rate
    by_depth: dict[int, list[int]] = {}
    for w in done:
        by_depth.setdefault(w.task.depth, []).append(0 if w.failed_reason is None else 1)
    report.failure_rate_by_depth = {
        str(d): _mean([float(x) for x in xs]) for d, xs in sorted(by_depth.items())
    }
    errors = []
    for w in completed:
        quoted = sum(w.stage_quotes)
        if quoted > 0:
            errors.append(abs(w.settled - quoted) / quoted)
    report.settlement_error = _mean(errors)

    # survival
    report.agent_count = len(agents)
    report.survivors = sum(1 for a in agents if a.alive)
    changes = []
    for a in agents:
        if a.spec.initial_units > 0:
            start = world._endow(a.spec.initial_units)
            changes.append((a.treasury - start) / start)
    changes.sort()
    if changes:
        mid = len(changes) // 2
        report.median_treasury_change = (
            changes[mid] if len(changes) % 2 else (changes[mid - 1] + changes[mid]) / 2
        )
    report.treasury_gini = gini([from_wad(max(a.treasury, 0)) for a in agents])
    report.trade_volume_units = from_wad(world.volume_units)
    if world.total_stages:
        report.delegation_rate = world.delegated_stages / world.total_stages

    # queue behavior from the event log
    report.queue_peak = max((s.queue_len for s in samples), default=0)
    queued = world.ledger.log.of_kind("RedeemQueued")
    honored_fast = 0
    for ev in world.ledger.log.of_kind("Redeemed"):
        since = ev.payload.get("queued_since")
        if since is not None and ev.epoch - since <= 5:
            honored_fast += 1
    report.queue_honored_within_5 = honored_fast / len(queued) if queued else 1.0
    return report
