"""Profit extraction: secure a target profit P from the cheapest qualifying sellers.

Given a target P, find the largest unit count u such that the seller
supplying the u-th unit (cheapest first) values it at no more than
(R(u) - P) / u. Buy those u units at that uniform per-unit price: the buyer
keeps exactly P, and no seller is paid below their ask. If no unit count
qualifies, nobody trades.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Instance, leq


@dataclass(frozen=True)
class ExtractionResult:
    """Winners as (seller id, units) in cheapest-first order, all paid the same per-unit price."""

    winners: tuple[tuple[int, int], ...]
    price_per_unit: float
    profit: float

    @property
    def traded(self) -> bool:
        return bool(self.winners)

    def units_for(self, seller_id: int) -> int:
        for sid, units in self.winners:
            if sid == seller_id:
                return units
        return 0


NO_TRADE = ExtractionResult(winners=(), price_per_unit=0.0, profit=0.0)


def run_extraction(sorted_bids, rtable, target: float) -> ExtractionResult:
    """Extraction core over bids already sorted by (valuation, id).

    Scans unit counts from the total supply downward and stops at the first
    (hence largest) count u whose marginal supplier qualifies:
    v <= (R(u) - target) / u. The first winners sell full capacity; the
    marginal one sells the remainder. An empty bid list never trades.
    """
    target = float(target)
    if target < 0:
        raise ValueError(f"target profit must be >= 0, got {target}")
    cums = [0]
    for b in sorted_bids:
        cums.append(cums[-1] + b.capacity)
    for j in range(len(sorted_bids) - 1, -1, -1):
        v = sorted_bids[j].valuation
        for u in range(cums[j + 1], cums[j], -1):
            price = (rtable[u] - target) / u
            if leq(v, price):
                winners = [(sorted_bids[i].id, sorted_bids[i].capacity) for i in range(j)]
                winners.append((sorted_bids[j].id, u - cums[j]))
                return ExtractionResult(winners=tuple(winners), price_per_unit=price, profit=target)
    return NO_TRADE


def pe(instance: Instance, target: float) -> ExtractionResult:
    """Unit-capacity extraction: the largest k cheapest sellers with v_[k] <= (R(k) - P) / k."""
    if not instance.is_unit_capacity:
        raise ValueError("pe requires unit capacities; use pec for capacitated instances")
    return run_extraction(instance.sorted_bids, instance.revenue_table, target)


def pec(instance: Instance, target: float) -> ExtractionResult:
    """Capacitated extraction; reduces to :func:`pe` when all capacities are 1."""
    return run_extraction(instance.sorted_bids, instance.revenue_table, target)
