"""Settlement layer: atomic multi-hop payment bundles and budget-gated
escrow with receipt-bound release and timeout refund.

The escrow is pre-funded: the full budget moves into a custody account at
open, so the budget gate is enforceable without trusting the originator.
Bundles attached to an escrow pay out of that custody and count against
the budget atomically with the transfer (ledger gate semantics); hops
with arbitrary payers are for plain, ungated delegation chains.

Receipts reuse the oracle module's canonical-encoding and mock-signature
scheme.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .ledger import (
    CLAW,
    BudgetGate,
    CommitResult,
    Effect,
    EscrowEntry,
    EscrowRecord,
    Ledger,
    TransactionBundle,
)
from .oracle import KeyRegistry, SigningKey


@dataclass(frozen=True)
class HopPayment:
    payer: str
    payee: str
    amount: int       # ClawCoin (wad)
    subtask_id: str


@dataclass(frozen=True)
class SignedReceipt:
    subtask_id: str
    executor: str
    artifact_digest: bytes
    signature: bytes


@dataclass(frozen=True)
class EscrowResult:
    ok: bool
    reason: str | None = None


def receipt_payload(subtask_id: str, executor: str, artifact_digest: bytes) -> bytes:
    return (
        subtask_id.encode("utf-8")
        + b"\x00"
        + executor.encode("utf-8")
        + b"\x00"
        + artifact_digest
    )


def sign_receipt(subtask_id: str, artifact: bytes, key: SigningKey) -> SignedReceipt:
    digest = hashlib.sha256(artifact).digest()
    payload = receipt_payload(subtask_id, key.node_id, digest)
    return SignedReceipt(subtask_id, key.node_id, digest, key.sign(payload))


def verify_receipt(receipt: SignedReceipt, registry: KeyRegistry) -> bool:
    payload = receipt_payload(receipt.subtask_id, receipt.executor, receipt.artifact_digest)
    return registry.verify(receipt.executor, payload, receipt.signature)


def atomic_multihop(
    ledger: Ledger,
    hops: list[HopPayment],
    escrow_id: str | None = None,
    veto_reason: str | None = None,
) -> CommitResult:
    """Settle a delegation chain in one all-or-nothing bundle.

    With an escrow attached, every hop must pay from the escrow custody
    account and the whole bundle reverts unless the escrow has budget
    headroom for the hop total; on commit the total is consumed from the
    budget. A downstream failure signal (veto_reason) reverts everything.
    """
    origin = hops[0].payer if hops else "multihop"
    gates: tuple[BudgetGate, ...] = ()
    if escrow_id is not None:
        rec = ledger.escrows.get(escrow_id)
        if rec is None:
            return CommitResult(False, f"unknown_escrow:{escrow_id}")
        for hop in hops:
            if hop.payer != rec.account:
                return CommitResult(False, f"payer_not_escrow:{hop.subtask_id}")
        gates = (BudgetGate(escrow_id, sum(h.amount for h in hops)),)
        origin = rec.account
    bundle = TransactionBundle(
        effects=tuple(Effect(h.payer, h.payee, CLAW, h.amount) for h in hops),
        origin=origin,
        epoch=ledger.epoch,
        gates=gates,
        veto_reason=veto_reason,
    )
    return ledger.execute_atomic(bundle)


def escrow_open(
    ledger: Ledger, escrow_id: str, originator: str, budget_max: int, deadline: int
) -> EscrowResult:
    """Move the full budget into custody and register the escrow."""
    if escrow_id in ledger.escrows:
        return EscrowResult(False, "duplicate_escrow_id")
    if budget_max <= 0:
        return EscrowResult(False, "non_positive_budget")
    account = f"escrow:{escrow_id}"
    result = ledger.transfer(originator, account, CLAW, budget_max)
    if not result.committed:
        return EscrowResult(False, result.reason)
    ledger.escrows[escrow_id] = EscrowRecord(
        escrow_id=escrow_id,
        originator=originator,
        account=account,
        budget_max=budget_max,
        deadline=deadline,
    )
    ledger.log.append(ledger.epoch, "EscrowOpened", {
        "escrow_id": escrow_id, "originator": originator,
        "budget_max": budget_max, "deadline": deadline,
    })
    return EscrowResult(True)


def escrow_lock(
    ledger: Ledger, escrow_id: str, subtask_id: str, payee: str, amount: int
) -> EscrowResult:
    """Reserve budget for one subtask; funds stay in custody until a
    receipt releases them."""
    rec = ledger.escrows.get(escrow_id)
    if rec is None:
        return EscrowResult(False, "unknown_escrow")
    if ledger.epoch > rec.deadline:
        return EscrowResult(False, "deadline_passed")
    if amount <= 0:
        return EscrowResult(False, "non_positive_amount")
    if subtask_id in rec.entries:
        return EscrowResult(False, "duplicate_subtask")
    if rec.locked + rec.released + amount > rec.budget_max:
        return EscrowResult(False, "budget_exceeded")
    rec.entries[subtask_id] = EscrowEntry(subtask_id, payee, amount, "locked")
    rec.locked += amount
    ledger.log.append(ledger.epoch, "EscrowLocked", {
        "escrow_id": escrow_id, "subtask_id": subtask_id,
        "payee": payee, "amount": amount,
    })
    return EscrowResult(True)


def escrow_release(
    ledger: Ledger, escrow_id: str, receipt: SignedReceipt, registry: KeyRegistry
) -> EscrowResult:
    """Pay a locked entry to its payee against a valid executor receipt.

    The receipt must be signed by the entry's payee over this subtask id;
    a receipt for one subtask can never release another's entry, and an
    entry releases at most once.
    """
    rec = ledger.escrows.get(escrow_id)
    if rec is None:
        return EscrowResult(False, "unknown_escrow")
    if ledger.epoch > rec.deadline:
        return EscrowResult(False, "deadline_passed")
    entry = rec.entries.get(receipt.subtask_id)
    if entry is None:
        return EscrowResult(False, "unknown_subtask")
    if entry.status != "locked":
        return EscrowResult(False, f"entry_{entry.status}")
    if receipt.executor != entry.payee:
        return EscrowResult(False, "executor_mismatch")
    if not verify_receipt(receipt, registry):
        return EscrowResult(False, "bad_signature")
    result = ledger.transfer(rec.account, entry.payee, CLAW, entry.amount)
    if not result.committed:
        return EscrowResult(False, result.reason)
    entry.status = "released"
    rec.locked -= entry.amount
    rec.released += entry.amount
    ledger.log.append(ledger.epoch, "EscrowReleased", {
        "escrow_id": escrow_id, "subtask_id": receipt.subtask_id,
        "payee": entry.payee, "amount": entry.amount,
    })
    return EscrowResult(True)


def escrow_refund(ledger: Ledger, escrow_id: str, now: int | None = None) -> EscrowResult:
    """After the deadline, return everything not already released to the
    originator; released payments are final."""
    rec = ledger.escrows.get(escrow_id)
    if rec is None:
        return EscrowResult(False, "unknown_escrow")
    now = ledger.epoch if now is None else now
    if now <= rec.deadline:
        return EscrowResult(False, "deadline_not_reached")
    residual = ledger.balance(rec.account, CLAW)
    if residual > 0:
        result = ledger.transfer(rec.account, rec.originator, CLAW, residual)
        if not result.committed:
            return EscrowResult(False, result.reason)
    for entry in rec.entries.values():
        if entry.status == "locked":
            entry.status = "refunded"
    rec.locked = 0
    ledger.log.append(ledger.epoch, "EscrowRefunded", {
        "escrow_id": escrow_id, "originator": rec.originator, "amount": residual,
    })
    return EscrowResult(True)
