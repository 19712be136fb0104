"""Pay-per-shot ledger. Money is integer micro-credits throughout."""
from __future__ import annotations

from dataclasses import asdict, dataclass


class DuplicateCharge(Exception):
    pass


@dataclass(frozen=True)
class LedgerEntry:
    tenant: str
    job_id: str
    shots: int
    price_per_shot: int
    cost: int

    def to_dict(self) -> dict:
        return asdict(self)


def price(shots: int, price_per_shot: int) -> int:
    return shots * price_per_shot


class BillingLedger:
    def __init__(self) -> None:
        self.entries: list[LedgerEntry] = []
        self._totals: dict[str, int] = {}
        self._charged: set[str] = set()

    def entry_for(self, tenant: str, job_id: str, shots: int, price_per_shot: int) -> LedgerEntry:
        """Build the entry a charge would append, rejecting already-charged jobs."""
        if job_id in self._charged:
            raise DuplicateCharge(f"job {job_id} has already been charged")
        return LedgerEntry(tenant, job_id, shots, price_per_shot, price(shots, price_per_shot))

    def apply(self, entry: LedgerEntry) -> LedgerEntry:
        if entry.job_id in self._charged:
            raise DuplicateCharge(f"job {entry.job_id} has already been charged")
        self._charged.add(entry.job_id)
        self.entries.append(entry)
        self._totals[entry.tenant] = self._totals.get(entry.tenant, 0) + entry.cost
        return entry

    def charge(self, tenant: str, job_id: str, shots: int, price_per_shot: int) -> LedgerEntry:
        return self.apply(self.entry_for(tenant, job_id, shots, price_per_shot))

    def is_charged(self, job_id: str) -> bool:
        return job_id in self._charged

    def total(self, tenant: str) -> int:
        return self._totals.get(tenant, 0)

    def tenant_entries(self, tenant: str) -> list[LedgerEntry]:
        return [e for e in self.entries if e.tenant == tenant]
