"""Frozen task/shock trajectory: everything random in a run is drawn here,
once, from the scenario seed. Every regime world replays the identical
object, which is what makes four-regime comparisons clean."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..fixedpoint import WAD
from .config import DEPTHS, ScenarioConfig


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    depth: int
    stage_units: tuple[int, ...]     # work units per stage (wad)
    budget_margin: float             # customer budget over fair cost at submit
    failure_draws: tuple[float, ...]  # one uniform draw per stage
    rotation: int | None = None      # agent-rotation seed; defaults to task seq

    def rotation_seq(self) -> int:
        return self.rotation if self.rotation is not None else int(self.task_id[1:])


@dataclass(frozen=True)
class EpochData:
    epoch: int
    prices: dict[str, tuple[int, int]]  # pair key -> (price_in, price_out), bias applied
    clean_prices: dict[str, tuple[int, int]]  # same stream without adversary bias
    tasks: tuple[TaskSpec, ...]


@dataclass(frozen=True)
class Trajectory:
    epochs: tuple[EpochData, ...]

    def fingerprint(self) -> int:
        return hash(tuple(
            (e.epoch, tuple(sorted(e.prices.items())), e.tasks) for e in self.epochs
        ))


def _poisson(rng: random.Random, rate: float) -> int:
    # Knuth's method; rate is small (tasks per epoch)
    limit = math.exp(-rate)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def generate_trajectory(config: ScenarioConfig) -> Trajectory:
    """Vendor price paths (mean-reverting noise, scheduled common shocks,
    adversarial vendor bias) and task arrivals for epochs 1..N."""
    price_rng = random.Random(f"{config.seed}:prices")
    task_rng = random.Random(f"{config.seed}:tasks")

    pairs = sorted(config.vendor_prices)
    offsets = {pair: 0.0 for pair in pairs}
    level = 1.0
    common = 0.0  # slow log-level walk shared by every vendor
    shock_at = {s.epoch: s.factor for s in config.shocks}
    depths = sorted(config.market.depth_weights)
    depth_weights = [config.market.depth_weights[d] for d in depths]

    epochs: list[EpochData] = []
    task_seq = 0
    for epoch in range(1, config.epochs + 1):
        if epoch in shock_at:
            level = level * shock_at[epoch] / WAD
        common = (1.0 - config.noise.level_reversion) * common
        if config.noise.level_sigma > 0:
            common += price_rng.gauss(0.0, config.noise.level_sigma)
        clean: dict[str, tuple[int, int]] = {}
        biased: dict[str, tuple[int, int]] = {}
        for pair in pairs:
            x = offsets[pair]
            x = (1.0 - config.noise.reversion) * x
            if config.noise.sigma > 0:
                x += price_rng.gauss(0.0, config.noise.sigma)
            offsets[pair] = x
            factor = level * math.exp(common + x)
            base_in, base_out = config.vendor_prices[pair]
            p_in = int(base_in * factor)
            p_out = int(base_out * factor)
            clean[pair] = (p_in, p_out)
            bias = config.adversary.vendor_bias
            if bias and pair in bias.vendors and bias.covers(epoch):
                p_in = p_in * bias.factor // WAD
            biased[pair] = (p_in, p_out)

        tasks: list[TaskSpec] = []
        for _ in range(_poisson(task_rng, config.market.task_rate)):
            depth = task_rng.choices(depths, weights=depth_weights)[0]
            assert depth in DEPTHS
            total_units = max(
                WAD, int(config.market.task_units_mean * (0.5 + task_rng.random()))
            )
            per_stage = total_units // depth
            stage_units = tuple(per_stage for _ in range(depth))
            margin = config.market.budget_margin_mean + (
                task_rng.random() - 0.5
            ) * 2 * config.market.budget_margin_spread
            tasks.append(TaskSpec(
                task_id=f"t{task_seq}",
                depth=depth,
                stage_units=stage_units,
                budget_margin=max(0.0, margin),
                failure_draws=tuple(task_rng.random() for _ in range(depth)),
            ))
            task_seq += 1
        epochs.append(EpochData(epoch, biased, clean, tuple(tasks)))
    return Trajectory(tuple(epochs))
