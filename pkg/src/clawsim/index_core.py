"""Compute-cost index: workload costing, robust per-model aggregation,
weighted basket, EMA smoothing with a per-epoch drift cap, and the
integrity-bound oracle used by the adversarial test harness.

All amounts are wad ints (see fixedpoint). The pipeline is pure: every
function maps value records to value records with no hidden state except
IndexPipeline, which carries the published series between epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AggregationError, BoundInapplicable, ConfigError, IndexUnavailable
from .fixedpoint import WAD, fmt_wad, to_wad, wdiv, wmul, wmul_up

# |sum(theta) - 1| and |sum(weights) - 1| tolerance: 1e-12 in wad units.
MIX_TOLERANCE = 10**6


@dataclass(frozen=True)
class WorkloadClass:
    """One standardized request shape in the basket mix."""

    alpha: int  # normalized input-token count (wad)
    beta: int   # normalized output-token count (wad)
    theta: int  # basket-mix weight (wad fraction)


@dataclass(frozen=True)
class PriceQuote:
    """Per-token prices observed for one (model, vendor) pair."""

    model: str
    vendor: str
    price_in: int   # reserve currency per input token (wad)
    price_out: int  # reserve currency per output token (wad)
    observed_at: int = 0
    valid: bool = True


@dataclass(frozen=True)
class Estimator:
    """Robust per-model aggregator selection.

    kind: "median", "trimmed" (q = trim fraction, wad), or
    "mad_filtered" (kappa = MAD multiplier, wad). trimmed with q=0 is the
    plain mean, used as the non-robust baseline in sanity checks.
    """

    kind: str
    q: int = 0
    kappa: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("median", "trimmed", "mad_filtered"):
            raise ConfigError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "trimmed" and not 0 <= self.q < WAD // 2:
            raise ConfigError("trimmed estimator requires 0 <= q < 0.5")
        if self.kind == "mad_filtered" and self.kappa <= 0:
            raise ConfigError("mad_filtered estimator requires kappa > 0")

    @classmethod
    def median(cls) -> "Estimator":
        return cls("median")

    @classmethod
    def trimmed(cls, q: int | float | str) -> "Estimator":
        """q in human scale (0.34 means trim 34% per tail)."""
        return cls("trimmed", q=to_wad(q))

    @classmethod
    def mad_filtered(cls, kappa: int | float | str) -> "Estimator":
        """kappa in human scale (3 means keep within 3 * MAD)."""
        return cls("mad_filtered", kappa=to_wad(kappa))


@dataclass(frozen=True)
class BasketConfig:
    """Public, versioned basket definition.

    Canonical JSON field order for commitment hashing: version, models,
    vendors, workloads, weights, estimator, n_min, smoothing, drift_cap.
    """

    version: int
    models: tuple[str, ...]
    vendors: dict[str, tuple[str, ...]]       # model -> registered vendor ids
    workloads: tuple[WorkloadClass, ...]
    weights: dict[str, int]                    # model -> wad weight
    estimator: Estimator
    n_min: int
    smoothing: int   # EMA coefficient lambda (wad), in [0, 1)
    drift_cap: int   # delta_max (wad), in (0, 1)

    def validate(self) -> None:
        if self.n_min < 1:
            raise ConfigError("n_min must be >= 1")
        if not 0 <= self.smoothing < WAD:
            raise ConfigError("smoothing must lie in [0, 1)")
        if not 0 < self.drift_cap < WAD:
            raise ConfigError("drift_cap must lie in (0, 1)")
        validate_workloads(self.workloads)
        total = sum(self.weights.get(m, 0) for m in self.models)
        if abs(total - WAD) > MIX_TOLERANCE:
            raise ConfigError(f"model weights sum to {fmt_wad(total)}, expected 1")
        for m in self.models:
            if self.weights.get(m, 0) < 0:
                raise ConfigError(f"negative weight for model {m}")
            if not self.vendors.get(m):
                raise ConfigError(f"model {m} has no registered vendors")


@dataclass(frozen=True)
class ModelCostSample:
    """Per-model evidence behind one index evaluation."""

    model: str
    costs: tuple[int, ...]   # per-vendor basket-aware costs, registry order
    robust_cost: int
    vendor_count: int


@dataclass(frozen=True)
class IndexState:
    """One epoch of the published index series."""

    raw: int
    smoothed_prev: int
    smoothed: int
    epoch: int
    initial: int
    active_models: tuple[str, ...]
    samples: tuple[ModelCostSample, ...] = field(default=())


@dataclass(frozen=True)
class IntegrityBound:
    """Worst-case index displacement under a per-model vendor minority.

    Test-oracle only: honest_reference is the estimator-consistent honest
    cost (median of honest reports), honest_envelope the max honest
    deviation from it, and index_bound the renormalized weighted sum of
    envelopes. Any adversarial strategy below breakdown keeps
    |raw_index(mixed) - raw_index(honest)| <= index_bound.
    """

    honest_reference: dict[str, int]
    honest_envelope: dict[str, int]
    index_bound: int


def validate_workloads(workloads: tuple[WorkloadClass, ...] | list[WorkloadClass]) -> None:
    if not workloads:
        raise ConfigError("workload vector is empty")
    for k, w in enumerate(workloads):
        if w.alpha < 0 or w.beta < 0 or w.theta < 0:
            raise ConfigError(f"workloads[{k}] has a negative field")
    total = sum(w.theta for w in workloads)
    if abs(total - WAD) > MIX_TOLERANCE:
        raise ConfigError(f"workload thetas sum to {fmt_wad(total)}, expected 1")


def pair_cost(quote: PriceQuote, workloads: tuple[WorkloadClass, ...] | list[WorkloadClass]) -> int:
    """Basket-aware cost of one (model, vendor) pair over the workload mix."""
    validate_workloads(workloads)
    if quote.price_in < 0 or quote.price_out < 0:
        raise ConfigError("quote prices must be non-negative")
    total = 0
    for w in workloads:
        nominal = wmul(w.alpha, quote.price_in) + wmul(w.beta, quote.price_out)
        total += wmul(w.theta, nominal)
    return total


def _median(values: list[int]) -> int:
    # Even count: mean of the two central order statistics (floor on .5 wei).
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) // 2


def aggregate_model(costs: list[int], estimator: Estimator) -> int:
    """Robust per-model cost across vendors."""
    if not costs:
        raise AggregationError("no vendor costs to aggregate")
    if estimator.kind == "median":
        return _median(costs)
    if estimator.kind == "trimmed":
        drop = estimator.q * len(costs) // WAD  # floor(q * n) from each tail
        ordered = sorted(costs)
        kept = ordered[drop: len(ordered) - drop]
        if not kept:
            raise AggregationError("trim fraction removed every sample")
        return sum(kept) // len(kept)
    # mad_filtered
    med = _median(costs)
    mad = _median([abs(c - med) for c in costs])
    if mad == 0:
        return med  # degenerate: all-equal honest reports pass through
    radius = wmul(estimator.kappa, mad)
    kept = [c for c in costs if abs(c - med) <= radius]
    if not kept:  # kappa < 1 can empty the filter; fall back like MAD = 0
        return med
    return sum(kept) // len(kept)


def renormalize_weights(weights: dict[str, int], survivors: list[str]) -> dict[str, int]:
    """Restrict weights to the surviving models and rescale to sum to 1."""
    total = sum(weights[m] for m in survivors)
    if total <= 0:
        raise IndexUnavailable("surviving models carry zero weight")
    return {m: wdiv(weights[m], total) for m in survivors}


def compute_raw_index(
    quotes: list[PriceQuote], config: BasketConfig
) -> tuple[int, list[ModelCostSample]]:
    """Raw basket value over valid quotes, dropping under-sourced models.

    Models with fewer than n_min valid vendor costs are excluded and the
    surviving weights renormalized. Raises IndexUnavailable when nothing
    survives (no publication this epoch).
    """
    by_pair: dict[tuple[str, str], PriceQuote] = {}
    for q in quotes:
        if not q.valid:
            continue
        key = (q.model, q.vendor)
        if key in by_pair:
            raise ConfigError(f"duplicate quote for {key} in one epoch")
        if q.model in config.vendors and q.vendor in config.vendors[q.model]:
            by_pair[key] = q

    samples: list[ModelCostSample] = []
    survivors: list[str] = []
    for m in config.models:
        costs = [
            pair_cost(by_pair[(m, v)], config.workloads)
            for v in config.vendors[m]
            if (m, v) in by_pair
        ]
        if len(costs) < config.n_min:
            continue
        robust = aggregate_model(costs, config.estimator)
        samples.append(ModelCostSample(m, tuple(costs), robust, len(costs)))
        survivors.append(m)

    if not survivors:
        raise IndexUnavailable("every model fell below n_min valid vendors")

    active = renormalize_weights(config.weights, survivors)
    raw = sum(wmul(active[s.model], s.robust_cost) for s in samples)
    return raw, samples


def smooth_and_clip(raw: int, prev: int, smoothing: int, drift_cap: int) -> int:
    """EMA then clip: the published series moves at most drift_cap per epoch.

    The band is prev +/- wmul(prev, drift_cap) so |out - prev| never
    exceeds wmul(prev, drift_cap), wei-exactly, on either side.
    """
    if prev <= 0:
        raise ConfigError("previous published value must be positive")
    blended = wmul(smoothing, prev) + wmul(WAD - smoothing, raw)
    step = wmul(prev, drift_cap)
    return max(prev - step, min(prev + step, blended))


def integrity_bound(
    honest_quotes: list[PriceQuote],
    adversarial_count_per_model: dict[str, int],
    config: BasketConfig,
) -> IntegrityBound:
    """Envelope oracle for the median estimator under vendor minorities.

    For each active model, the honest reference is the median of honest
    costs and the envelope the max honest deviation from it. Applicable
    only while every model's adversarial count stays below half its total
    vendor count; beyond that no bound exists and BoundInapplicable is
    raised so the harness expects no guarantee.
    """
    costs_by_model: dict[str, list[int]] = {}
    for q in honest_quotes:
        if q.valid:
            costs_by_model.setdefault(q.model, []).append(pair_cost(q, config.workloads))

    reference: dict[str, int] = {}
    envelope: dict[str, int] = {}
    survivors: list[str] = []
    for m in config.models:
        honest = costs_by_model.get(m, [])
        f = adversarial_count_per_model.get(m, 0)
        n_total = len(honest) + f
        if n_total < config.n_min:
            continue
        if 2 * f >= n_total:
            raise BoundInapplicable(f"model {m}: {f} adversaries of {n_total} vendors")
        ref = _median(honest)
        reference[m] = ref
        envelope[m] = max(abs(c - ref) for c in honest)
        survivors.append(m)

    if not survivors:
        raise IndexUnavailable("no model is active for the bound")

    active = renormalize_weights(config.weights, survivors)
    # Ceil per term: floor dust must never let a true adversarial
    # displacement look like a bound violation.
    bound = sum(wmul_up(active[m], envelope[m]) for m in survivors)
    return IntegrityBound(reference, envelope, bound)


class IndexPipeline:
    """Carries the published series across epochs for one observer.

    First step initializes the series: smoothed = raw = I_0, no clipping
    (there is no prior epoch to bound against).
    """

    def __init__(self, config: BasketConfig):
        config.validate()
        self.config = config
        self.initial: int | None = None
        self.smoothed: int | None = None
        self.epoch: int | None = None

    def step(self, quotes: list[PriceQuote], epoch: int) -> IndexState:
        raw, samples = compute_raw_index(quotes, self.config)
        if self.smoothed is None:
            prev = raw
            smoothed = raw
            self.initial = raw
        else:
            prev = self.smoothed
            smoothed = smooth_and_clip(raw, prev, self.config.smoothing, self.config.drift_cap)
        self.smoothed = smoothed
        self.epoch = epoch
        assert self.initial is not None
        return IndexState(
            raw=raw,
            smoothed_prev=prev,
            smoothed=smoothed,
            epoch=epoch,
            initial=self.initial,
            active_models=tuple(s.model for s in samples),
            samples=tuple(samples),
        )
