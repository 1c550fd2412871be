"""Oracle layer: observation commitments, signed attestations, committee
and DON aggregation, and the on-chain publication checks.

The signer is a deterministic keyed-digest mock (sign = sha256(key || payload))
behind a sign/verify interface, so a real threshold scheme can drop in
without touching aggregation or publication. Hash function throughout is
SHA-256; test vectors pin it.

Canonical quote encoding for hashing:
    utf8(model) || 0x00 || utf8(vendor) || 0x00 ||
    price_in (big-endian 128-bit wad) || price_out (big-endian 128-bit wad) ||
    observed_at (big-endian 64-bit)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from .errors import AuthorizationError, QuorumError
from .fixedpoint import wmul
from .index_core import PriceQuote
from .ledger import EventLog

ZERO_LEAF = bytes(32)  # sentinel root for an empty observation set

MODE_COMMITTEE = "committee"
MODE_DON = "don"


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def encode_quote(quote: PriceQuote) -> bytes:
    if quote.price_in < 0 or quote.price_out < 0:
        raise ValueError("quote prices must be non-negative")
    return (
        quote.model.encode("utf-8")
        + b"\x00"
        + quote.vendor.encode("utf-8")
        + b"\x00"
        + quote.price_in.to_bytes(16, "big")
        + quote.price_out.to_bytes(16, "big")
        + quote.observed_at.to_bytes(8, "big")
    )


def merkle_root(leaves: list[bytes]) -> bytes:
    """Binary Merkle root; an odd level duplicates its last node."""
    if not leaves:
        return ZERO_LEAF
    level = list(leaves)
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [_sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def build_commitment(quotes: list[PriceQuote]) -> bytes:
    """Root over the canonically sorted observation set.

    Identical observation sets yield identical roots regardless of input
    order; the empty set commits to the zero-leaf sentinel.
    """
    ordered = sorted(quotes, key=lambda q: (q.model, q.vendor))
    return merkle_root([_sha256(encode_quote(q)) for q in ordered])


# --- signing -----------------------------------------------------------


@dataclass(frozen=True)
class SigningKey:
    node_id: str
    secret: bytes

    def sign(self, payload: bytes) -> bytes:
        return _sha256(self.secret + payload)


class KeyRegistry:
    """Node identity -> key material. Deterministic from a registry seed
    so simulation runs replay byte-identically."""

    def __init__(self, seed: bytes = b"clawsim-registry"):
        self._seed = seed
        self._keys: dict[str, SigningKey] = {}

    def register(self, node_id: str) -> SigningKey:
        if node_id not in self._keys:
            secret = _sha256(self._seed + b"|" + node_id.encode("utf-8"))
            self._keys[node_id] = SigningKey(node_id, secret)
        return self._keys[node_id]

    def key_of(self, node_id: str) -> SigningKey | None:
        return self._keys.get(node_id)

    def verify(self, node_id: str, payload: bytes, signature: bytes) -> bool:
        key = self._keys.get(node_id)
        return key is not None and key.sign(payload) == signature


@dataclass(frozen=True)
class Attestation:
    """Signed index observation: the only object contracts trust."""

    index_value: int       # published smoothed value (wad)
    epoch: int
    basket_version: int
    commitment_root: bytes
    node_id: str
    signature: bytes

    def tuple_key(self) -> tuple[int, int, int, bytes]:
        return (self.index_value, self.epoch, self.basket_version, self.commitment_root)


def attestation_payload(index_value: int, epoch: int, basket_version: int, root: bytes) -> bytes:
    if epoch <= 0:
        raise ValueError("attestation epoch must be strictly positive")
    return (
        index_value.to_bytes(16, "big")
        + epoch.to_bytes(8, "big")
        + basket_version.to_bytes(8, "big")
        + root
    )


@dataclass(frozen=True)
class CommitteeConfig:
    members: tuple[str, ...]
    threshold: int
    mode: str = MODE_COMMITTEE

    def __post_init__(self) -> None:
        if not 1 <= self.threshold <= len(self.members):
            raise ValueError("threshold must satisfy 1 <= k <= n")
        if self.mode not in (MODE_COMMITTEE, MODE_DON):
            raise ValueError(f"unknown trust mode {self.mode!r}")

    def writer_id(self) -> str:
        """Identity the chain authenticates: the combined-signature writer."""
        return "writer[" + ",".join(sorted(self.members)) + f";k={self.threshold}]"


def sign_attestation(
    index_value: int,
    epoch: int,
    basket_version: int,
    commitment_root: bytes,
    key: SigningKey,
    committee: CommitteeConfig,
) -> Attestation:
    if key.node_id not in committee.members:
        raise AuthorizationError(f"node {key.node_id} is not a committee member")
    payload = attestation_payload(index_value, epoch, basket_version, commitment_root)
    return Attestation(
        index_value, epoch, basket_version, commitment_root, key.node_id, key.sign(payload)
    )


def verify_attestation(att: Attestation, registry: KeyRegistry) -> bool:
    payload = attestation_payload(
        att.index_value, att.epoch, att.basket_version, att.commitment_root
    )
    return registry.verify(att.node_id, payload, att.signature)


def _writer_sign(att_value: int, epoch: int, version: int, root: bytes,
                 committee: CommitteeConfig, registry: KeyRegistry) -> Attestation:
    writer = registry.register(committee.writer_id())
    payload = attestation_payload(att_value, epoch, version, root)
    return Attestation(att_value, epoch, version, root, writer.node_id, writer.sign(payload))


def aggregate_committee(
    attestations: list[Attestation],
    committee: CommitteeConfig,
    registry: KeyRegistry,
) -> Attestation:
    """k-of-n exact-match combination.

    Tuples must agree bit-for-bit: honest nodes are deterministic in fixed
    point, and any tolerance window would widen the attack surface. Fails
    when no tuple gathers threshold support.
    """
    if committee.mode != MODE_COMMITTEE:
        raise QuorumError("aggregate_committee requires committee mode")
    groups: dict[tuple, list[Attestation]] = {}
    for att in attestations:
        if att.node_id not in committee.members:
            continue
        if not verify_attestation(att, registry):
            continue
        groups.setdefault(att.tuple_key(), []).append(att)
    # One attestation per member per tuple: drop duplicates by node.
    eligible = []
    for key, atts in groups.items():
        nodes = {a.node_id for a in atts}
        if len(nodes) >= committee.threshold:
            eligible.append(key)
    if not eligible:
        raise QuorumError(
            f"no tuple reached {committee.threshold} matching attestations"
        )
    # Deterministic choice: largest support, then lexicographically smallest.
    best = min(eligible, key=lambda k: (-len({a.node_id for a in groups[k]}),) + k)
    value, epoch, version, root = best
    return _writer_sign(value, epoch, version, root, committee, registry)


def aggregate_don(
    attestations: list[Attestation],
    committee: CommitteeConfig,
    registry: KeyRegistry,
) -> Attestation:
    """DON combination: median of reported values; combined commitment is
    the Merkle root over the sorted per-reporter roots, preserving
    auditability of every reporter's observation set."""
    if committee.mode != MODE_DON:
        raise QuorumError("aggregate_don requires don mode")
    verified = [
        a for a in attestations
        if a.node_id in committee.members and verify_attestation(a, registry)
    ]
    if not verified:
        raise QuorumError("no verifiable reporter attestations")
    epochs = {a.epoch for a in verified}
    versions = {a.basket_version for a in verified}
    if len(epochs) != 1 or len(versions) != 1:
        raise QuorumError("reporters disagree on epoch or basket version")
    values = sorted(a.index_value for a in verified)
    n = len(values)
    median = values[n // 2] if n % 2 == 1 else (values[n // 2 - 1] + values[n // 2]) // 2
    root = merkle_root(sorted(a.commitment_root for a in verified))
    return _writer_sign(median, epochs.pop(), versions.pop(), root, committee, registry)


# --- on-chain state ----------------------------------------------------


REJECT_AUTH = "auth_failure"
REJECT_BACKDATED = "backdated_epoch"
REJECT_DRIFT = "drift_violation"


@dataclass
class OracleOnChainState:
    """What the chain stores and every contract reads."""

    published_value: int
    published_at: int
    basket_version: int
    commitment_root: bytes
    max_staleness: int           # tau, epochs
    writer_id: str
    stale_pause: bool = False


@dataclass(frozen=True)
class PublishResult:
    accepted: bool
    reason: str | None = None


def publish(
    candidate: Attestation,
    state: OracleOnChainState,
    drift_cap: int,
    registry: KeyRegistry,
    log: EventLog | None = None,
) -> PublishResult:
    """On-chain update check: writer auth, monotone epoch, drift cap.

    The drift check duplicates the off-chain clip as defense-in-depth: a
    single-epoch quorum compromise cannot move the published value by more
    than drift_cap. A rejected candidate leaves state untouched (the next
    epoch's EMA absorbs the move); each rejection reason is logged
    distinctly.
    """
    def _reject(reason: str) -> PublishResult:
        if log is not None:
            log.append(candidate.epoch, "IndexRejected", {
                "reason": reason,
                "value": candidate.index_value,
                "node": candidate.node_id,
            })
        return PublishResult(False, reason)

    payload = attestation_payload(
        candidate.index_value, candidate.epoch, candidate.basket_version,
        candidate.commitment_root,
    )
    if candidate.node_id != state.writer_id or not registry.verify(
        candidate.node_id, payload, candidate.signature
    ):
        return _reject(REJECT_AUTH)
    if candidate.epoch <= state.published_at:
        return _reject(REJECT_BACKDATED)
    if abs(candidate.index_value - state.published_value) > wmul(
        state.published_value, drift_cap
    ):
        return _reject(REJECT_DRIFT)

    state.published_value = candidate.index_value
    state.published_at = candidate.epoch
    state.basket_version = candidate.basket_version
    state.commitment_root = candidate.commitment_root
    state.stale_pause = False
    if log is not None:
        log.append(candidate.epoch, "IndexUpdated", {
            "value": candidate.index_value,
            "basket_version": candidate.basket_version,
            "root": candidate.commitment_root.hex(),
        })
    return PublishResult(True)


def check_staleness(state: OracleOnChainState, now: int) -> bool:
    """Stale iff now - t_on > tau (strict: age exactly tau is still fresh)."""
    state.stale_pause = now - state.published_at > state.max_staleness
    return state.stale_pause
