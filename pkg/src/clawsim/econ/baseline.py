"""Built-in baseline scenario: three models across five vendors, two
workload classes, mean-reverting vendor noise with three scheduled common
shocks, and eight heterogeneous trading agents."""

from __future__ import annotations

MODELS = ("hermes-72b", "orion-32b", "lyra-8b")
VENDORS = ("nimbus", "quasar", "zephyr", "helix", "triton")

# per-model base prices (reserve currency per token)
_BASE = {
    "hermes-72b": (2.0e-6, 6.0e-6),
    "orion-32b": (1.0e-6, 3.0e-6),
    "lyra-8b": (2.5e-7, 1.0e-6),
}
# persistent vendor level offsets around each model's base price
_LEVELS = {"nimbus": 0.990, "quasar": 0.995, "zephyr": 1.000,
           "helix": 1.005, "triton": 1.010}


def default_scenario_dict() -> dict:
    vendor_prices = {}
    for model in MODELS:
        base_in, base_out = _BASE[model]
        for vendor in VENDORS:
            level = _LEVELS[vendor]
            vendor_prices[f"{model}/{vendor}"] = {
                "price_in": round(base_in * level, 12),
                "price_out": round(base_out * level, 12),
            }

    # Every agent serves the full model basket (basket weights) through its
    # own vendor relationships, so quote levels are comparable and the
    # dispersion metric isolates the unit-of-account effect rather than
    # static catalog differences.
    vendor_pairs = [
        ("nimbus", "quasar"), ("quasar", "zephyr"), ("zephyr", "helix"),
        ("helix", "triton"), ("triton", "nimbus"), ("nimbus", "zephyr"),
        ("quasar", "triton"), ("helix", "nimbus"),
    ]
    model_weights = {"hermes-72b": 0.5, "orion-32b": 0.3, "lyra-8b": 0.2}

    def mix_for(primary: str, secondary: str) -> dict[str, float]:
        mix = {}
        for model, w in model_weights.items():
            mix[f"{model}/{primary}"] = round(w * 0.7, 12)
            mix[f"{model}/{secondary}"] = round(w * 0.3, 12)
        return mix

    mixes = [mix_for(a, b) for a, b in vendor_pairs]
    roles = ("planner", "retriever", "tool-use", "coder",
             "verifier", "synthesizer", "generalist", "generalist")
    markups = (0.18, 0.20, 0.19, 0.22, 0.21, 0.20, 0.18, 0.21)
    thresholds = (0.02, 0.05, 0.03, 0.08, 0.04, 0.06, 0.025, 0.07)
    units = (5000, 4200, 6000, 3600, 4800, 3000, 5400, 4500)
    burns = (2, 1.5, 2.5, 1, 2, 1.5, 3, 2)
    lags = (1, 1, 2, 1, 1, 1, 2, 1)
    smoothings = (0.3, 0.6, 0.4, 0.7, 0.35, 0.65, 0.45, 0.55)
    agents = [
        {
            "name": f"agent{i}",
            "role": roles[i],
            "provider_mix": mixes[i],
            "markup": markups[i],
            "repricing_threshold": thresholds[i],
            "initial_units": units[i],
            "baseline_burn_units": burns[i],
            "index_lag": lags[i],
            "cost_smoothing": smoothings[i],
        }
        for i in range(8)
    ]

    return {
        "seed": 7,
        "epochs": 300,
        "regime": "clawcoin",
        "basket": {
            "version": 1,
            "models": list(MODELS),
            "vendors": {m: list(VENDORS) for m in MODELS},
            "workloads": [
                {"alpha": 1000, "beta": 500, "theta": 0.6},
                {"alpha": 200, "beta": 1600, "theta": 0.4},
            ],
            "weights": {"hermes-72b": 0.5, "orion-32b": 0.3, "lyra-8b": 0.2},
            "estimator": {"kind": "median"},
            "n_min": 2,
            "smoothing": 0.5,
            "drift_cap": 0.02,
        },
        "risk": {
            "gamma_min": 1.2,
            "gamma_pause": 1.05,
            "tau": 4,
            "mint_cap_base": 20000,
            "redeem_cap_base": 20000,
            "headroom_ref": 0.3,
            "replenish_rate": 0.0,
            "initial_coverage": 1.6,
        },
        "vendor_prices": vendor_prices,
        "noise": {"sigma": 0.02, "reversion": 0.3,
                  "level_sigma": 0.012, "level_reversion": 0.02},
        "shocks": [
            {"epoch": 60, "factor": 1.30},
            {"epoch": 140, "factor": 0.85},
            {"epoch": 220, "factor": 1.20},
        ],
        "adversary": {},
        "committee": {"size": 3, "threshold": 2, "mode": "committee"},
        "market": {
            "task_rate": 1.2,
            "task_units_mean": 40,
            "budget_margin_mean": 0.35,
            "budget_margin_spread": 0.25,
            "depth_weights": {"1": 0.4, "2": 0.3, "4": 0.2, "8": 0.1},
            "stage_failure_rate": 0.02,
            "reconcile_tolerance": 0.02,
            "reconcile_rate": 0.10,
        },
        "agents": agents,
    }
