"""Scenario configuration: JSON schema, validation with field paths, and
typed config objects. A ScenarioConfig plus the code version fully
determines a run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from ..fixedpoint import WAD, to_wad
from ..index_core import BasketConfig, Estimator, WorkloadClass
from ..vault import RiskParams

REGIMES = ("fiat", "raw_cost", "usdc_internal_index", "clawcoin")

DEPTHS = (1, 2, 4, 8)


@dataclass(frozen=True)
class ShockSpec:
    epoch: int
    factor: int  # wad multiplier applied to the common cost level


@dataclass(frozen=True)
class NoiseSpec:
    """Two-layer mean-reverting multiplicative noise: a slow common level
    walk shared by every vendor plus per-vendor idiosyncratic offsets.
    Each log-offset x follows x' = (1 - reversion) * x + N(0, sigma);
    price = base * shock_level * exp(x_common) * exp(x_vendor)."""

    sigma: float = 0.0
    reversion: float = 0.1
    level_sigma: float = 0.0
    level_reversion: float = 0.02


@dataclass(frozen=True)
class StaleWindow:
    start: int
    length: int

    def covers(self, epoch: int) -> bool:
        return self.start <= epoch < self.start + self.length


@dataclass(frozen=True)
class VendorBias:
    vendors: tuple[str, ...]  # "model/vendor" pair keys
    factor: int               # wad multiplier on price_in
    start: int
    length: int

    def covers(self, epoch: int) -> bool:
        return self.start <= epoch < self.start + self.length


@dataclass(frozen=True)
class RedemptionBurst:
    epoch: int
    fraction: int  # wad fraction of each holder's tokens redeemed at once


@dataclass(frozen=True)
class AdversarySpec:
    stale_oracle: StaleWindow | None = None
    vendor_bias: VendorBias | None = None
    redemption_burst: RedemptionBurst | None = None
    sandwich: bool = False


@dataclass(frozen=True)
class AgentSpec:
    name: str
    role: str
    provider_mix: dict[str, int]   # "model/vendor" -> wad weight, sums to 1
    markup: int                    # wad fraction >= 0
    repricing_threshold: int       # wad fraction
    initial_units: int             # starting treasury in work units (wad)
    baseline_burn_units: int       # keep-alive work consumed per epoch (wad)
    index_lag: int = 1             # observation lag of the private index, >= 1
    cost_smoothing: int = to_wad("0.5")  # agent-level EMA on own costs


@dataclass(frozen=True)
class MarketSpec:
    task_rate: float = 2.0             # mean tasks per epoch (Poisson)
    task_units_mean: int = to_wad(50)  # mean workload size per task
    budget_margin_mean: float = 0.30   # customer budget over fair cost
    budget_margin_spread: float = 0.20
    depth_weights: dict[int, float] = field(
        default_factory=lambda: {1: 0.4, 2: 0.3, 4: 0.2, 8: 0.1}
    )
    stage_failure_rate: float = 0.01   # base per-stage execution failure
    reconcile_tolerance: float = 0.01  # private-index disagreement tolerated
    reconcile_rate: float = 0.5        # failure bump at full disagreement


@dataclass(frozen=True)
class CommitteeSpec:
    size: int = 3
    threshold: int = 2
    mode: str = "committee"


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    epochs: int
    regime: str
    basket: BasketConfig
    risk: RiskParams
    vendor_prices: dict[str, tuple[int, int]]  # pair key -> (price_in, price_out)
    noise: NoiseSpec
    shocks: tuple[ShockSpec, ...]
    adversary: AdversarySpec
    committee: CommitteeSpec
    market: MarketSpec
    agents: tuple[AgentSpec, ...]
    initial_coverage: int = to_wad("1.5")  # vault genesis coverage (wad)


# --- validation --------------------------------------------------------------


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate_scenario_dict(doc: dict) -> list[str]:
    """Structural validation; returns error strings carrying field paths."""
    errors: list[str] = []

    def need(path: str, container: dict, key: str, kinds, pred=None) -> bool:
        where = f"{path}.{key}" if path else key
        if key not in container:
            errors.append(f"{where}: missing")
            return False
        value = container[key]
        if not isinstance(value, kinds) or isinstance(value, bool):
            kind_name = getattr(kinds, "__name__", "number")
            errors.append(f"{where}: expected {kind_name}")
            return False
        if pred is not None and not pred(value):
            errors.append(f"{where}: invalid value {value!r}")
            return False
        return True

    if not isinstance(doc, dict):
        return ["scenario: expected a JSON object"]

    need("", doc, "seed", int, lambda s: s >= 0)
    need("", doc, "epochs", int, lambda e: e >= 1)
    need("", doc, "regime", str, lambda r: r in REGIMES)

    basket = doc.get("basket")
    if not isinstance(basket, dict):
        errors.append("basket: missing or not an object")
    else:
        need("basket", basket, "version", int, lambda v: v >= 0)
        need("basket", basket, "n_min", int, lambda v: v >= 1)
        need("basket", basket, "smoothing", (int, float), lambda v: 0 <= v < 1)
        need("basket", basket, "drift_cap", (int, float), lambda v: 0 < v < 1)
        models = basket.get("models")
        if not isinstance(models, list) or not models:
            errors.append("basket.models: expected a non-empty list")
            models = []
        vendors = basket.get("vendors", {})
        if not isinstance(vendors, dict):
            errors.append("basket.vendors: expected an object")
            vendors = {}
        for m in models:
            if not vendors.get(m):
                errors.append(f"basket.vendors.{m}: no vendors registered")
        workloads = basket.get("workloads")
        if not isinstance(workloads, list) or not workloads:
            errors.append("basket.workloads: expected a non-empty list")
        else:
            theta_total = 0.0
            for i, w in enumerate(workloads):
                for key in ("alpha", "beta", "theta"):
                    if not (isinstance(w, dict) and _is_num(w.get(key)) and w[key] >= 0):
                        errors.append(f"basket.workloads[{i}].{key}: expected a non-negative number")
                if isinstance(w, dict) and _is_num(w.get("theta")):
                    theta_total += w["theta"]
            if abs(theta_total - 1.0) > 1e-12:
                errors.append(
                    f"basket.workloads: theta values sum to {theta_total}, expected 1"
                )
        weights = basket.get("weights")
        if not isinstance(weights, dict):
            errors.append("basket.weights: expected an object")
        else:
            total = sum(v for v in weights.values() if _is_num(v))
            if abs(total - 1.0) > 1e-12:
                errors.append(f"basket.weights: weights sum to {total}, expected 1")
            for m in models:
                if not _is_num(weights.get(m)):
                    errors.append(f"basket.weights.{m}: missing or not a number")
        est = basket.get("estimator")
        if not isinstance(est, dict) or est.get("kind") not in (
            "median", "trimmed", "mad_filtered"
        ):
            errors.append("basket.estimator.kind: expected median|trimmed|mad_filtered")

    risk = doc.get("risk")
    if not isinstance(risk, dict):
        errors.append("risk: missing or not an object")
    else:
        need("risk", risk, "gamma_min", (int, float), lambda v: v > 1)
        need("risk", risk, "gamma_pause", (int, float), lambda v: v > 0)
        need("risk", risk, "tau", int, lambda v: v >= 1)
        need("risk", risk, "mint_cap_base", (int, float), lambda v: v > 0)
        need("risk", risk, "redeem_cap_base", (int, float), lambda v: v > 0)
        need("risk", risk, "headroom_ref", (int, float), lambda v: v > 0)
        need("risk", risk, "replenish_rate", (int, float), lambda v: v >= 0)
        if _is_num(risk.get("gamma_min")) and _is_num(risk.get("gamma_pause")):
            if risk["gamma_pause"] > risk["gamma_min"]:
                errors.append("risk.gamma_pause: must not exceed risk.gamma_min")

    prices = doc.get("vendor_prices")
    if not isinstance(prices, dict) or not prices:
        errors.append("vendor_prices: missing or empty")
    else:
        for pair, entry in prices.items():
            if "/" not in pair:
                errors.append(f"vendor_prices.{pair}: key must be model/vendor")
            if not (isinstance(entry, dict) and _is_num(entry.get("price_in"))
                    and _is_num(entry.get("price_out"))):
                errors.append(f"vendor_prices.{pair}: expected price_in and price_out numbers")
        if isinstance(basket, dict):
            for m in basket.get("models", []) or []:
                for v in (basket.get("vendors", {}) or {}).get(m, []) or []:
                    if f"{m}/{v}" not in prices:
                        errors.append(f"vendor_prices.{m}/{v}: missing base prices")

    agents = doc.get("agents")
    if not isinstance(agents, list) or not agents:
        errors.append("agents: expected a non-empty list")
    else:
        for i, a in enumerate(agents):
            path = f"agents[{i}]"
            if not isinstance(a, dict):
                errors.append(f"{path}: expected an object")
                continue
            need(path, a, "name", str)
            need(path, a, "markup", (int, float), lambda v: v >= 0)
            need(path, a, "repricing_threshold", (int, float), lambda v: v > 0)
            need(path, a, "initial_units", (int, float), lambda v: v > 0)
            mix = a.get("provider_mix")
            if not isinstance(mix, dict) or not mix:
                errors.append(f"{path}.provider_mix: missing or empty")
            else:
                total = sum(v for v in mix.values() if _is_num(v))
                if abs(total - 1.0) > 1e-12:
                    errors.append(f"{path}.provider_mix: weights sum to {total}, expected 1")
                known = set((doc.get("vendor_prices") or {}).keys())
                for pair in mix:
                    if known and pair not in known:
                        errors.append(f"{path}.provider_mix.{pair}: unknown provider pair")
            lag = a.get("index_lag", 1)
            if not isinstance(lag, int) or lag < 1:
                errors.append(f"{path}.index_lag: must be an integer >= 1")

    market = doc.get("market", {})
    if not isinstance(market, dict):
        errors.append("market: expected an object")
    elif "depth_weights" in market:
        dw = market["depth_weights"]
        if not isinstance(dw, dict) or not dw:
            errors.append("market.depth_weights: expected a non-empty object")
        else:
            for d in dw:
                if str(d) not in ("1", "2", "4", "8"):
                    errors.append(f"market.depth_weights.{d}: depth must be one of 1,2,4,8")

    adversary = doc.get("adversary", {})
    if adversary and not isinstance(adversary, dict):
        errors.append("adversary: expected an object")

    return errors


# --- parsing -----------------------------------------------------------------


def _basket_from_dict(d: dict) -> BasketConfig:
    est = d["estimator"]
    kind = est["kind"]
    if kind == "median":
        estimator = Estimator.median()
    elif kind == "trimmed":
        estimator = Estimator.trimmed(est.get("q", 0))
    else:
        estimator = Estimator.mad_filtered(est.get("kappa", 3))
    basket = BasketConfig(
        version=d["version"],
        models=tuple(d["models"]),
        vendors={m: tuple(v) for m, v in d["vendors"].items()},
        workloads=tuple(
            WorkloadClass(to_wad(w["alpha"]), to_wad(w["beta"]), to_wad(w["theta"]))
            for w in d["workloads"]
        ),
        weights={m: to_wad(w) for m, w in d["weights"].items()},
        estimator=estimator,
        n_min=d["n_min"],
        smoothing=to_wad(d["smoothing"]),
        drift_cap=to_wad(d["drift_cap"]),
    )
    basket.validate()
    return basket


def _risk_from_dict(d: dict, drift_cap: int) -> RiskParams:
    params = RiskParams(
        gamma_min=to_wad(d["gamma_min"]),
        gamma_pause=to_wad(d["gamma_pause"]),
        delta_max=drift_cap,  # shared with the index config by construction
        tau=d["tau"],
        mint_cap_base=to_wad(d["mint_cap_base"]),
        redeem_cap_base=to_wad(d["redeem_cap_base"]),
        headroom_ref=to_wad(d["headroom_ref"]),
        replenish_rate=to_wad(d["replenish_rate"]),
    )
    params.validate()
    return params


def scenario_from_dict(doc: dict, seed_override: int | None = None,
                       regime_override: str | None = None) -> ScenarioConfig:
    problems = validate_scenario_dict(doc)
    if problems:
        raise ConfigError("; ".join(problems))

    basket = _basket_from_dict(doc["basket"])
    adversary_doc = doc.get("adversary", {}) or {}
    stale = adversary_doc.get("stale_oracle")
    bias = adversary_doc.get("vendor_bias")
    burst = adversary_doc.get("redemption_burst")
    adversary = AdversarySpec(
        stale_oracle=StaleWindow(stale["start"], stale["length"]) if stale else None,
        vendor_bias=VendorBias(
            tuple(bias["vendors"]), to_wad(bias["factor"]), bias["start"], bias["length"]
        ) if bias else None,
        redemption_burst=RedemptionBurst(
            burst["epoch"], to_wad(burst["fraction"])
        ) if burst else None,
        sandwich=bool(adversary_doc.get("sandwich", False)),
    )
    market_doc = doc.get("market", {}) or {}
    market = MarketSpec(
        task_rate=float(market_doc.get("task_rate", 2.0)),
        task_units_mean=to_wad(market_doc.get("task_units_mean", 50)),
        budget_margin_mean=float(market_doc.get("budget_margin_mean", 0.30)),
        budget_margin_spread=float(market_doc.get("budget_margin_spread", 0.20)),
        depth_weights={int(k): float(v) for k, v in
                       market_doc.get("depth_weights", {1: 0.4, 2: 0.3, 4: 0.2, 8: 0.1}).items()},
        stage_failure_rate=float(market_doc.get("stage_failure_rate", 0.01)),
        reconcile_tolerance=float(market_doc.get("reconcile_tolerance", 0.01)),
        reconcile_rate=float(market_doc.get("reconcile_rate", 0.5)),
    )
    committee_doc = doc.get("committee", {}) or {}
    committee = CommitteeSpec(
        size=int(committee_doc.get("size", 3)),
        threshold=int(committee_doc.get("threshold", 2)),
        mode=str(committee_doc.get("mode", "committee")),
    )
    noise_doc = doc.get("noise", {}) or {}
    agents = tuple(
        AgentSpec(
            name=a["name"],
            role=str(a.get("role", "generalist")),
            provider_mix={pair: to_wad(w) for pair, w in a["provider_mix"].items()},
            markup=to_wad(a["markup"]),
            repricing_threshold=to_wad(a["repricing_threshold"]),
            initial_units=to_wad(a["initial_units"]),
            baseline_burn_units=to_wad(a.get("baseline_burn_units", 1)),
            index_lag=int(a.get("index_lag", 1)),
            cost_smoothing=to_wad(a.get("cost_smoothing", 0.5)),
        )
        for a in doc["agents"]
    )
    return ScenarioConfig(
        seed=seed_override if seed_override is not None else doc["seed"],
        epochs=doc["epochs"],
        regime=regime_override or doc["regime"],
        basket=basket,
        risk=_risk_from_dict(doc["risk"], basket.drift_cap),
        vendor_prices={
            pair: (to_wad(entry["price_in"]), to_wad(entry["price_out"]))
            for pair, entry in doc["vendor_prices"].items()
        },
        noise=NoiseSpec(
            sigma=float(noise_doc.get("sigma", 0.0)),
            reversion=float(noise_doc.get("reversion", 0.1)),
            level_sigma=float(noise_doc.get("level_sigma", 0.0)),
            level_reversion=float(noise_doc.get("level_reversion", 0.02)),
        ),
        shocks=tuple(
            ShockSpec(s["epoch"], to_wad(s["factor"])) for s in doc.get("shocks", [])
        ),
        adversary=adversary,
        committee=committee,
        market=market,
        agents=agents,
        initial_coverage=to_wad((doc.get("risk") or {}).get("initial_coverage", "1.5")),
    )


def load_scenario(path: str | Path, seed_override: int | None = None,
                  regime_override: str | None = None) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return scenario_from_dict(doc, seed_override, regime_override)


def replace_regime(config: ScenarioConfig, regime: str) -> ScenarioConfig:
    from dataclasses import replace
    if regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}")
    return replace(config, regime=regime)
