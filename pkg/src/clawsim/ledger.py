"""In-process deterministic ledger: accounts holding two assets, atomic
transaction bundles with full rollback, an epoch counter, and an
append-only event log.

Epochs are the only clock; wall time does not exist. ClawCoin supply
changes only through the vault-designated mint/burn hooks, and reserves
enter from outside only through external_reserve_in; everything else
conserves per-asset totals, which is what the conservation oracle checks.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

from .errors import LedgerError

RESERVE = "reserve"
CLAW = "claw"
ASSETS = (RESERVE, CLAW)


@dataclass
class Account:
    address: str
    reserve_balance: int = 0
    claw_balance: int = 0

    def get(self, asset: str) -> int:
        return self.reserve_balance if asset == RESERVE else self.claw_balance

    def add(self, asset: str, delta: int) -> None:
        if asset == RESERVE:
            self.reserve_balance += delta
        else:
            self.claw_balance += delta


@dataclass(frozen=True)
class Effect:
    """One transfer: debit -> credit of amount in asset."""

    debit: str
    credit: str
    asset: str
    amount: int


@dataclass(frozen=True)
class BudgetGate:
    """Escrow headroom check evaluated atomically with the bundle: the
    bundle reverts unless released + locked + total stays within the
    escrow's budget; on commit, total is added to released."""

    escrow_id: str
    total: int


@dataclass(frozen=True)
class TransactionBundle:
    effects: tuple[Effect, ...]
    origin: str
    epoch: int
    gates: tuple[BudgetGate, ...] = ()
    veto_reason: str | None = None  # downstream failure signal; forces revert


@dataclass(frozen=True)
class Event:
    seq: int
    epoch: int
    kind: str
    payload: dict


class EventLog:
    """Append-only, totally ordered record of everything that happened."""

    def __init__(self) -> None:
        self._events: list[Event] = []

    def append(self, epoch: int, kind: str, payload: dict) -> Event:
        ev = Event(len(self._events), epoch, kind, payload)
        self._events.append(ev)
        return ev

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self._events if e.kind == kind]

    def to_jsonl(self) -> str:
        """One record per line, stable field ordering, exportable."""
        lines = []
        for e in self._events:
            body = json.dumps(e.payload, sort_keys=True, separators=(",", ":"))
            digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
            record = {
                "seq": e.seq,
                "epoch": e.epoch,
                "kind": e.kind,
                "payload": e.payload,
                "digest": digest,
            }
            lines.append(json.dumps(record, sort_keys=False, separators=(",", ":")))
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class CommitResult:
    committed: bool
    reason: str | None = None


class Ledger:
    """Single-writer state machine over accounts, escrows, and the log."""

    def __init__(self) -> None:
        self.accounts: dict[str, Account] = {}
        self.escrows: dict[str, "EscrowRecord"] = {}
        self.epoch: int = 0
        self.log = EventLog()
        self._snapshots: dict[int, tuple] = {}
        self._next_snapshot = 1
        # per-asset supply created through designated hooks
        self.claw_minted: int = 0
        self.claw_burned: int = 0
        self.reserve_injected: int = 0

    # -- accounts --------------------------------------------------------

    def ensure_account(self, address: str) -> Account:
        if address not in self.accounts:
            self.accounts[address] = Account(address)
        return self.accounts[address]

    def balance(self, address: str, asset: str) -> int:
        acct = self.accounts.get(address)
        return acct.get(asset) if acct else 0

    def total_supply(self, asset: str) -> int:
        return sum(a.get(asset) for a in self.accounts.values())

    # -- atomic bundles ---------------------------------------------------

    def execute_atomic(self, bundle: TransactionBundle) -> CommitResult:
        """Apply every effect or none.

        Reverts on: an explicit veto, a budget-gate failure, a
        non-positive amount, or an underfunded debit at any position.
        The first failure's reason is logged with BundleReverted.
        """
        if bundle.veto_reason is not None:
            return self._revert(bundle, f"veto:{bundle.veto_reason}")
        for gate in bundle.gates:
            rec = self.escrows.get(gate.escrow_id)
            if rec is None:
                return self._revert(bundle, f"unknown_escrow:{gate.escrow_id}")
            if rec.released + rec.locked + gate.total > rec.budget_max:
                return self._revert(bundle, f"budget_exceeded:{gate.escrow_id}")

        touched = {e.debit for e in bundle.effects} | {e.credit for e in bundle.effects}
        before = {addr: copy.copy(self.ensure_account(addr)) for addr in touched}
        for i, eff in enumerate(bundle.effects):
            if eff.asset not in ASSETS:
                self._rollback(before)
                return self._revert(bundle, f"effect[{i}]:unknown_asset:{eff.asset}")
            if eff.amount <= 0:
                self._rollback(before)
                return self._revert(bundle, f"effect[{i}]:non_positive_amount")
            debit = self.accounts[eff.debit]
            if debit.get(eff.asset) < eff.amount:
                self._rollback(before)
                return self._revert(bundle, f"effect[{i}]:insufficient_balance:{eff.debit}")
            debit.add(eff.asset, -eff.amount)
            self.accounts[eff.credit].add(eff.asset, eff.amount)

        for gate in bundle.gates:
            self.escrows[gate.escrow_id].released += gate.total
        self.log.append(self.epoch, "BundleCommitted", {
            "origin": bundle.origin,
            "effects": len(bundle.effects),
            "total": {a: sum(e.amount for e in bundle.effects if e.asset == a) for a in ASSETS},
        })
        return CommitResult(True)

    def _rollback(self, before: dict[str, Account]) -> None:
        for addr, acct in before.items():
            self.accounts[addr] = copy.copy(acct)

    def _revert(self, bundle: TransactionBundle, reason: str) -> CommitResult:
        self.log.append(self.epoch, "BundleReverted", {
            "origin": bundle.origin,
            "reason": reason,
        })
        return CommitResult(False, reason)

    def transfer(self, debit: str, credit: str, asset: str, amount: int) -> CommitResult:
        return self.execute_atomic(TransactionBundle(
            effects=(Effect(debit, credit, asset, amount),),
            origin=debit,
            epoch=self.epoch,
        ))

    # -- supply hooks (vault-designated) ----------------------------------

    def vault_mint(self, credit: str, amount: int, meta: dict | None = None) -> None:
        """ClawCoin enters circulation; only the vault calls this."""
        self.ensure_account(credit).add(CLAW, amount)
        self.claw_minted += amount
        self.log.append(self.epoch, "SupplyMint", {"to": credit, "amount": amount, **(meta or {})})

    def vault_burn(self, debit: str, amount: int, meta: dict | None = None) -> None:
        acct = self.ensure_account(debit)
        if acct.claw_balance < amount:
            raise LedgerError(f"burn exceeds balance of {debit}")
        acct.add(CLAW, -amount)
        self.claw_burned += amount
        self.log.append(self.epoch, "SupplyBurn", {"from": debit, "amount": amount, **(meta or {})})

    def external_reserve_in(self, credit: str, amount: int, kind: str) -> None:
        """Reserve currency entering from outside the ledger (deposits at
        genesis, replenishment yield); logged so conservation stays checkable."""
        self.ensure_account(credit).add(RESERVE, amount)
        self.reserve_injected += amount
        self.log.append(self.epoch, "ReserveIn", {"to": credit, "amount": amount, "kind": kind})

    # -- epochs and harness helpers ---------------------------------------

    def advance_epoch(self) -> int:
        self.epoch += 1
        return self.epoch

    def snapshot(self) -> int:
        handle = self._next_snapshot
        self._next_snapshot += 1
        self._snapshots[handle] = (
            copy.deepcopy(self.accounts),
            copy.deepcopy(self.escrows),
            self.epoch,
            self.claw_minted,
            self.claw_burned,
            self.reserve_injected,
        )
        return handle

    def restore(self, handle: int) -> None:
        if handle not in self._snapshots:
            raise LedgerError(f"unknown snapshot {handle}")
        accounts, escrows, epoch, minted, burned, injected = self._snapshots[handle]
        self.accounts = copy.deepcopy(accounts)
        self.escrows = copy.deepcopy(escrows)
        self.epoch = epoch
        self.claw_minted = minted
        self.claw_burned = burned
        self.reserve_injected = injected

    def state_dump(self) -> str:
        """Canonical JSON of balances/escrows/epoch for exact comparison."""
        body = {
            "epoch": self.epoch,
            "accounts": {
                addr: {RESERVE: a.reserve_balance, CLAW: a.claw_balance}
                for addr, a in sorted(self.accounts.items())
            },
            "escrows": {
                eid: rec.dump() for eid, rec in sorted(self.escrows.items())
            },
            "supply": {
                "claw_minted": self.claw_minted,
                "claw_burned": self.claw_burned,
                "reserve_injected": self.reserve_injected,
            },
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))


@dataclass
class EscrowRecord:
    """Escrow bookkeeping owned by the ledger so budget gates evaluate
    atomically with bundles. The settlement module wraps the workflow
    logic (open/lock/release/refund) around this record."""

    escrow_id: str
    originator: str
    account: str          # custody address holding the pre-funded budget
    budget_max: int       # B*, in ClawCoin
    deadline: int
    locked: int = 0
    released: int = 0
    entries: dict[str, "EscrowEntry"] = field(default_factory=dict)

    def dump(self) -> dict:
        return {
            "originator": self.originator,
            "account": self.account,
            "budget_max": self.budget_max,
            "deadline": self.deadline,
            "locked": self.locked,
            "released": self.released,
            "entries": {
                sid: {"payee": e.payee, "amount": e.amount, "status": e.status}
                for sid, e in sorted(self.entries.items())
            },
        }


@dataclass
class EscrowEntry:
    subtask_id: str
    payee: str
    amount: int
    status: str  # locked | released | refunded
