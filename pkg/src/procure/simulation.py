"""Monte Carlo profit estimation, truthfulness and monotonicity audits, and
generators for the worked instance families.

Per-trial randomness derives from the master seed by a counter split:
trial t uses seed ``master * 2**32 + t``. Trials are independent and their
results are folded in trial-index order, so reports are reproducible for a
fixed (instance, mechanism, seed) triple regardless of how the loop is
scheduled.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import random
import statistics
from dataclasses import dataclass

from . import benchmarks
from .mechanisms import partition_mask, partition_profit_engine, resolve_mechanism
from .model import Bid, Instance, capped_curve, instance_to_json_dict, linear_curve, make_instance, pwl_curve

GAIN_TOL = 1e-6  # a deviation must beat truth by more than this to count as a violation

EXHAUSTIVE_MAX_BIDDERS = 20


class BenchmarkNotPositiveError(ValueError):
    """Ratio reports need a strictly positive benchmark to divide by."""


@dataclass(frozen=True)
class RatioReport:
    trials: int
    mean_profit: float
    std_error: float
    benchmark: float
    ratio_estimate: float
    ratio_lower_bound_3sigma: float
    instance_digest: str

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "mean_profit": self.mean_profit,
            "std_error": self.std_error,
            "benchmark": self.benchmark,
            "ratio_estimate": self.ratio_estimate,
            "ratio_lower_bound_3sigma": self.ratio_lower_bound_3sigma,
            "instance_digest": self.instance_digest,
        }


RATIO_CSV_HEADER = "family,params,mechanism,benchmark,trials,mean,stderr,ratio"


def ratio_csv_row(report: RatioReport, family: str, params: str, mechanism: str, benchmark_name: str) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(
        [
            family,
            params,
            mechanism,
            benchmark_name,
            report.trials,
            repr(report.mean_profit),
            repr(report.std_error),
            repr(report.ratio_estimate),
        ]
    )
    return buf.getvalue()


@dataclass(frozen=True)
class AuditViolation:
    bidder: int
    dim: str
    true_bid: tuple[float, int]
    deviating_bid: tuple[float, int]
    gain: float

    def to_json_dict(self) -> dict:
        return {
            "bidder": self.bidder,
            "dim": self.dim,
            "true_bid": {"v": self.true_bid[0], "q": self.true_bid[1]},
            "deviating_bid": {"v": self.deviating_bid[0], "q": self.deviating_bid[1]},
            "gain": self.gain,
        }


@dataclass(frozen=True)
class AuditReport:
    mechanism: str
    deviations_tested: int
    violations: tuple[AuditViolation, ...]

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "deviations_tested": self.deviations_tested,
            "violations": [v.to_json_dict() for v in self.violations],
        }


def benchmark_value(instance: Instance, name: str) -> float:
    """Profit of the named benchmark: 'f', 't', or 'f2'."""
    if name == "f":
        return benchmarks.optimal_single_price(instance).profit
    if name == "t":
        return benchmarks.optimal_multi_price(instance).profit
    if name == "f2":
        return benchmarks.optimal_single_price_min2(instance).profit
    raise ValueError(f"unknown benchmark {name!r}; expected f, t, or f2")


def trial_seed(master: int, index: int) -> int:
    """Counter-based per-trial seed split: disjoint for distinct trial indices below 2**32."""
    return master * 2**32 + index


def _instance_digest(instance: Instance, mechanism: str, benchmark: str, trials: int, seed: int) -> str:
    payload = {
        "instance": instance_to_json_dict(instance),
        "mechanism": mechanism,
        "benchmark": benchmark,
        "trials": trials,
        "seed": seed,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _check_pepa_applicable(instance: Instance, mechanism: str) -> None:
    if mechanism == "pepa" and not instance.is_unit_capacity:
        raise ValueError("pepa requires unit capacities; use pepac")


def estimate_ratio(
    instance: Instance,
    mechanism: str,
    benchmark: str,
    trials: int,
    seed: int,
    demand_cap: int | None = None,
) -> RatioReport:
    """Monte Carlo estimate of expected profit relative to a benchmark.

    Rejects instances whose benchmark is not strictly positive. A
    deterministic mechanism is executed once and its profit replicated, so
    its standard error is exactly 0.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    bench = benchmark_value(instance, benchmark)
    if bench <= 0:
        raise BenchmarkNotPositiveError(
            f"benchmark {benchmark!r} is {bench:.6g} on this instance; "
            "a ratio against a non-positive benchmark is meaningless"
        )
    mech = resolve_mechanism(mechanism, demand_cap=demand_cap)
    if mech.randomized:
        _check_pepa_applicable(instance, mechanism)
        engine = partition_profit_engine(instance)
        n = instance.n
        profits = [engine(partition_mask(n, trial_seed(seed, t))) for t in range(trials)]
    else:
        profit = mech.run(instance, None).outcome.profit
        profits = [profit] * trials
    mean = math.fsum(profits) / trials
    std = statistics.stdev(profits) if trials > 1 else 0.0
    stderr = std / math.sqrt(trials)
    return RatioReport(
        trials=trials,
        mean_profit=mean,
        std_error=stderr,
        benchmark=bench,
        ratio_estimate=mean / bench,
        ratio_lower_bound_3sigma=(mean - 3.0 * stderr) / bench,
        instance_digest=_instance_digest(instance, mechanism, benchmark, trials, seed),
    )


def exhaustive_expected_profit(instance: Instance, mechanism: str, demand_cap: int | None = None) -> float:
    """Exact expected profit by enumerating all coin-flip partitions.

    Each of the 2^n partitions has probability 2^-n. Refused above
    20 bidders. Deterministic mechanisms are evaluated once.
    """
    mech = resolve_mechanism(mechanism, demand_cap=demand_cap)
    if not mech.randomized:
        return mech.run(instance, None).outcome.profit
    _check_pepa_applicable(instance, mechanism)
    n = instance.n
    if n > EXHAUSTIVE_MAX_BIDDERS:
        raise ValueError(f"exhaustive enumeration refused for n={n} > {EXHAUSTIVE_MAX_BIDDERS} bidders")
    engine = partition_profit_engine(instance)
    total = math.fsum(engine(mask) for mask in range(1 << n))
    return total / (1 << n)


# --- audits -------------------------------------------------------------------


def _utility(instance: Instance, run, position: int, true_valuation: float) -> float:
    x = run.outcome.allocation[position]
    if x == 0:
        return 0.0
    return (run.outcome.payment_per_unit[position] - true_valuation) * x


def _with_bid(instance: Instance, position: int, valuation: float, capacity: int) -> Instance:
    old = instance.bids[position]
    bids = list(instance.bids)
    bids[position] = Bid(valuation, capacity, old.id)
    return Instance(bids=tuple(bids), curve=instance.curve)


def _valuation_grid(instance: Instance, position: int, truth_run) -> list[float]:
    """Deviation probes: scaled own value, the breakpoints set by the other
    bids, and the bidder's own offered payment when they won."""
    v = instance.bids[position].valuation
    delta = 1e-6
    probes = {0.0, 0.5 * v, 0.9 * v, 1.1 * v, 2.0 * v}
    for j, other in enumerate(instance.bids):
        if j == position:
            continue
        probes.add(other.valuation + delta)
        probes.add(max(0.0, other.valuation - delta))
    if truth_run.outcome.allocation[position] > 0:
        p = truth_run.outcome.payment_per_unit[position]
        probes.add(p + delta)
        probes.add(max(0.0, p - delta))
    probes.discard(v)
    return sorted(probes)


def _capacity_grid(capacity: int) -> list[int]:
    """Underreport probes only: oversupply is assumed contract-enforced."""
    if capacity <= 1:
        return []
    probes = {capacity // 2, round(0.9 * capacity), capacity - 1}
    return sorted(q for q in probes if 1 <= q < capacity)


def audit_truthfulness(
    instance: Instance,
    mechanism: str,
    dims=("valuation",),
    seed: int = 0,
    demand_cap: int | None = None,
) -> AuditReport:
    """Search for profitable unilateral misreports under a frozen coin draw.

    Every deviation is replayed with the same seed, so a randomized
    mechanism faces identical flips with and without the lie; reported
    gains are therefore per-realization and replayable. All deviations
    whose utility gain exceeds ``GAIN_TOL`` are reported.
    """
    dims = tuple(dims)
    for d in dims:
        if d not in ("valuation", "capacity"):
            raise ValueError(f"unknown audit dimension {d!r}")
    if not dims:
        raise ValueError("need at least one audit dimension")
    if "capacity" in dims and instance.is_unit_capacity:
        raise ValueError("capacity audits need a capacitated instance")
    mech = resolve_mechanism(mechanism, demand_cap=demand_cap)
    truth_run = mech.run(instance, seed)
    tested = 0
    violations = []
    for pos, bid in enumerate(instance.bids):
        base_utility = _utility(instance, truth_run, pos, bid.valuation)
        deviations = []
        if "valuation" in dims:
            deviations.extend((v, bid.capacity) for v in _valuation_grid(instance, pos, truth_run))
        if "capacity" in dims:
            deviations.extend((bid.valuation, q) for q in _capacity_grid(bid.capacity))
        for dev_v, dev_q in deviations:
            tested += 1
            dev_run = mech.run(_with_bid(instance, pos, dev_v, dev_q), seed)
            gain = _utility(instance, dev_run, pos, bid.valuation) - base_utility
            if gain > GAIN_TOL:
                dim = "capacity" if dev_q != bid.capacity else "valuation"
                violations.append(
                    AuditViolation(
                        bidder=bid.id,
                        dim=dim,
                        true_bid=(bid.valuation, bid.capacity),
                        deviating_bid=(dev_v, dev_q),
                        gain=gain,
                    )
                )
    return AuditReport(mechanism=mechanism, deviations_tested=tested, violations=tuple(violations))


def audit_allocation_monotonicity(
    instance: Instance,
    mechanism: str,
    grid: int = 64,
    seed: int = 0,
    demand_cap: int | None = None,
) -> AuditReport:
    """Sweep each bidder's valuation and flag any allocation increase.

    A sane procurement rule allocates weakly less as a seller asks for
    more. The sweep spans [0, 2 * max bid] on a fixed coin draw; a
    violation records the two valuations and the allocation jump.
    """
    if grid < 2:
        raise ValueError(f"grid must be >= 2, got {grid}")
    mech = resolve_mechanism(mechanism, demand_cap=demand_cap)
    top = 2.0 * max(b.valuation for b in instance.bids)
    if top <= 0:
        top = 1.0
    values = [top * k / (grid - 1) for k in range(grid)]
    tested = 0
    violations = []
    for pos, bid in enumerate(instance.bids):
        prev_v = None
        prev_x = None
        for v in values:
            tested += 1
            run = mech.run(_with_bid(instance, pos, v, bid.capacity), seed)
            x = run.outcome.allocation[pos]
            if prev_x is not None and x > prev_x:
                violations.append(
                    AuditViolation(
                        bidder=bid.id,
                        dim="valuation",
                        true_bid=(prev_v, bid.capacity),
                        deviating_bid=(v, bid.capacity),
                        gain=float(x - prev_x),
                    )
                )
            prev_v, prev_x = v, x
    return AuditReport(mechanism=mechanism, deviations_tested=tested, violations=tuple(violations))


# --- instance families ----------------------------------------------------------


def _family_example1(r: float = 10.0, eps: float = 1.0, n: int = 4) -> Instance:
    """One nearly-free bid, one just under the margin, the rest at the margin.

    The unconstrained single-price optimum lives on the lone cheap bid, so
    forcing a second winner collapses the profit to 2*eps.
    """
    if n < 2:
        raise ValueError("example1 needs n >= 2")
    if not 0 < eps < r:
        raise ValueError("example1 needs 0 < eps < r")
    return make_instance([eps, r - eps] + [r] * (n - 2), curve=linear_curve(r))


def _family_tightness(l: float = 10.0, eps: float = 1.0, n: int = 4) -> Instance:
    """Two winnable bids under a steep linear curve, everyone else priced out.

    The sentinel bids sit at 100*l, high enough that no extraction offer
    under the linear curve can ever reach them.
    """
    if n < 2:
        raise ValueError("tightness needs n >= 2")
    if not 0 < eps < l:
        raise ValueError("tightness needs 0 < eps < l")
    return make_instance([l - eps, l] + [100.0 * l] * (n - 2), curve=linear_curve(2.0 * l))


LOWBALL_DECOY_FRACTION = 0.96


def _family_lowball(r: float = 10.0, L: float = 9.0) -> Instance:
    """A lone low bid L approaching the margin r, plus a fixed decoy at 0.96*r.

    With only the bids L and r, every partition leaves one side worth
    nothing, so the split auction earns exactly 0 and the comparison
    against the unconstrained optimum degenerates. The decoy keeps the
    benchmark bounded away from zero while the mechanism's expectation
    still collapses linearly in (r - L), making the starvation visible as
    a finite, strictly shrinking ratio.
    """
    if not 0 < L < r:
        raise ValueError("lowball needs 0 < L < r")
    return make_instance([L, LOWBALL_DECOY_FRACTION * r, r], curve=linear_curve(r))


def _family_kth_price_demo() -> Instance:
    """Four capacitated sellers under a demand-capped market; the canonical
    input on which a Kth-price auction rewards a capacity underreport."""
    return make_instance(
        [6.0, 8.0, 10.0, 12.0],
        capacities=[100, 100, 200, 100],
        curve=capped_curve(15.0, 200),
    )


def _family_uniform_random(
    n: int,
    seed: int = 0,
    qmin: int = 1,
    qmax: int = 1,
    vmax: float = 1.0,
    curve: str = "linear",
    r: float = 1.0,
) -> Instance:
    """Seeded random instance: valuations U(0, vmax), capacities U{qmin..qmax},
    and a revenue curve drawn from the requested kind ('mixed' picks one)."""
    if n < 1:
        raise ValueError("uniform-random needs n >= 1")
    if not 1 <= qmin <= qmax:
        raise ValueError("uniform-random needs 1 <= qmin <= qmax")
    if vmax <= 0 or r <= 0:
        raise ValueError("uniform-random needs vmax > 0 and r > 0")
    rng = random.Random(seed)
    caps = [rng.randint(qmin, qmax) for _ in range(n)]
    vals = [rng.uniform(0.0, vmax) for _ in range(n)]
    m = sum(caps)
    kind = curve
    if kind == "mixed":
        kind = rng.choice(("linear", "capped", "pwl"))
    if kind == "linear":
        c = linear_curve(r)
    elif kind == "capped":
        c = capped_curve(r, rng.randint(1, m))
    elif kind == "pwl":
        segments = rng.randint(2, 4)
        marginals = sorted((rng.uniform(0.0, r) for _ in range(segments)), reverse=True)
        points = []
        q_acc, rev_acc = 0, 0.0
        for marginal in marginals:
            length = rng.randint(1, max(1, m // segments))
            q_acc += length
            rev_acc += marginal * length
            points.append((q_acc, rev_acc))
        c = pwl_curve(points)
    else:
        raise ValueError(f"unknown curve kind {curve!r} for uniform-random")
    return make_instance(vals, capacities=caps, curve=c)


_FAMILIES = {
    "example1": _family_example1,
    "tightness": _family_tightness,
    "lowball": _family_lowball,
    "kth-price-demo": _family_kth_price_demo,
    "uniform-random": _family_uniform_random,
}


def generate(family: str, params: dict | None = None) -> Instance:
    """Build a named instance family; deterministic for fixed parameters."""
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {sorted(_FAMILIES)}")
    params = dict(params or {})
    try:
        return _FAMILIES[family](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for family {family!r}: {exc}") from exc
