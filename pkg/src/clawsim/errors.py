"""Exception types shared across the protocol modules."""

from __future__ import annotations


class ClawError(Exception):
    """Base class for protocol errors."""


class ConfigError(ClawError):
    """Malformed configuration (bad weights, workload mix, parameters)."""


class AggregationError(ClawError):
    """Robust estimator invoked on an empty or unusable sample."""


class IndexUnavailable(ClawError):
    """No model survived the minimum-vendor gate; nothing to publish."""


class BoundInapplicable(ClawError):
    """Adversarial share at or above the estimator breakdown point."""


class AuthorizationError(ClawError):
    """Signing or writing attempted by an unregistered identity."""


class QuorumError(ClawError):
    """Committee/DON aggregation could not reach the required threshold."""


class LedgerError(ClawError):
    """Harness misuse of the ledger (unknown snapshot, unknown account)."""
