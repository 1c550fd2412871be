"""Shared builders for protocol-level tests."""

from __future__ import annotations

import pytest

from clawsim.fixedpoint import WAD, to_wad
from clawsim.index_core import BasketConfig, Estimator, WorkloadClass
from clawsim.ledger import Ledger
from clawsim.oracle import KeyRegistry, OracleOnChainState
from clawsim.vault import RiskParams, Vault


def simple_workloads() -> tuple[WorkloadClass, ...]:
    return (WorkloadClass(alpha=to_wad(1000), beta=to_wad(500), theta=WAD),)


def basket(models=("m1", "m2"), weights=None, n_min=1, estimator=None,
           smoothing="0.5", drift_cap="0.1", vendors_per_model=3) -> BasketConfig:
    weights = weights or {m: WAD // len(models) for m in models}
    return BasketConfig(
        version=1,
        models=tuple(models),
        vendors={m: tuple(f"{m}-v{i}" for i in range(vendors_per_model)) for m in models},
        workloads=simple_workloads(),
        weights=weights,
        estimator=estimator or Estimator.median(),
        n_min=n_min,
        smoothing=to_wad(smoothing),
        drift_cap=to_wad(drift_cap),
    )


def risk_params(**overrides) -> RiskParams:
    base = dict(
        gamma_min=to_wad("1.2"),
        gamma_pause=to_wad("1.05"),
        delta_max=to_wad("0.02"),
        tau=4,
        mint_cap_base=to_wad(10_000),
        redeem_cap_base=to_wad(10_000),
        headroom_ref=to_wad("0.3"),
        replenish_rate=0,
    )
    base.update(overrides)
    return RiskParams(**base)


def make_vault(initial_index=to_wad(100), params=None, reserves=to_wad(100_000),
               published=None) -> tuple[Ledger, OracleOnChainState, Vault]:
    ledger = Ledger()
    params = params or risk_params()
    state = OracleOnChainState(
        published_value=published if published is not None else initial_index,
        published_at=0,
        basket_version=1,
        commitment_root=bytes(32),
        max_staleness=params.tau,
        writer_id="writer",
    )
    vault = Vault(ledger, state, params, initial_index)
    if reserves:
        ledger.external_reserve_in(vault.address, reserves, "genesis")
    return ledger, state, vault


def fund(ledger: Ledger, address: str, reserve: int = 0, claw: int = 0) -> None:
    ledger.ensure_account(address)
    if reserve:
        ledger.external_reserve_in(address, reserve, "genesis")
    if claw:
        ledger.vault_mint(address, claw, {"genesis": True})


def seed_vault(vault: Vault, supply: int, holder: str = "holder") -> None:
    """Put tokens in circulation so coverage math has a denominator."""
    vault.ledger.vault_mint(holder, supply, {"genesis": True})
    vault.supply += supply


@pytest.fixture
def registry() -> KeyRegistry:
    return KeyRegistry(b"test-registry")
