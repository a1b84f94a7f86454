"""Discrete-event simulator of the closed hub-and-satellite network.

The exact model: N units circulate between a state-dependent single-server
hub and k exponential FIFO satellite stations.  A hub service starting with
K units present (the unit entering service included) lasts X/K with X drawn
from the hub law by inversion; the in-progress service is never resampled
when units return from satellites.  A completed hub service routes the unit
to station j with probability p[j]; station j serves at rate n * mu[j] and
sends finished units back to the hub queue.

Randomness is split counter-style from one root seed: replication i uses
SeedSequence(base_seed, spawn_key=(i,)), and within one run stream 0 drives
hub durations, stream 1 routing, and stream 2+j the j-th satellite, so
adding a station never perturbs the other streams.

Simultaneous events are impossible up to floating-point collision; ties are
broken deterministically by event kind (satellite completion before hub
completion), then station index, then insertion order.
"""

from __future__ import annotations

import heapq
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import QueueLengthLaw
from .distributions import ServiceDistribution, distribution_from_config

__all__ = [
    "NetworkConfig",
    "SimTrace",
    "simulate",
    "SimEstimate",
    "replicate",
    "OffspringEstimate",
    "offspring_mean",
    "compare_to_law",
]

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class NetworkConfig:
    """Closed-network instance: population, hub law, routing and rates.

    `mu` holds the fluid service rates; station j physically serves at
    n * mu[j].  Exactly one station must satisfy mu[j] < lam * p[j] (the
    bottleneck) unless `allow_nonstandard` is set, in which case deviations
    only warn.  `initial` is either "all_in_hub" or a (hub, station...)
    count vector summing to n.
    """

    n: int
    hub_service: ServiceDistribution
    p: tuple[float, ...]
    mu: tuple[float, ...]
    bottleneck: int | None = None
    initial: str | tuple[int, ...] = "all_in_hub"
    allow_nonstandard: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n!r}")
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        if len(self.p) == 0 or len(self.p) != len(self.mu):
            raise ValueError("p and mu must be nonempty vectors of equal length")
        if any(v <= 0.0 for v in self.p):
            raise ValueError("all routing probabilities p must be positive")
        if abs(math.fsum(self.p) - 1.0) > 1e-12:
            raise ValueError(f"p must sum to 1 within 1e-12, got sum {math.fsum(self.p)!r}")
        if any(v <= 0.0 for v in self.mu):
            raise ValueError("all service rates mu must be positive")

        lam = self.hub_service.rate
        slow = [j for j in range(len(self.p)) if self.mu[j] < lam * self.p[j]]
        if self.bottleneck is None:
            if len(slow) == 1:
                object.__setattr__(self, "bottleneck", slow[0])
            elif not self.allow_nonstandard:
                raise ValueError(
                    f"expected exactly one bottleneck station (mu_j < lam p_j), found {slow}"
                )
        else:
            if not 0 <= self.bottleneck < len(self.p):
                raise ValueError(f"bottleneck index {self.bottleneck!r} out of range")
            if slow != [self.bottleneck]:
                msg = (
                    f"declared bottleneck {self.bottleneck} but stations {slow} "
                    f"satisfy mu_j < lam p_j"
                )
                if self.allow_nonstandard:
                    warnings.warn(msg, stacklevel=2)
                else:
                    raise ValueError(msg)

        if isinstance(self.initial, str):
            if self.initial != "all_in_hub":
                raise ValueError(f"initial must be 'all_in_hub' or a count vector, got {self.initial!r}")
        else:
            vec = tuple(int(v) for v in self.initial)
            object.__setattr__(self, "initial", vec)
            if len(vec) != len(self.p) + 1:
                raise ValueError("initial vector must hold hub plus one count per station")
            if any(v < 0 for v in vec) or sum(vec) != self.n:
                raise ValueError(f"initial counts must be nonnegative and sum to n = {self.n}")

    @property
    def stations(self) -> int:
        return len(self.p)

    @property
    def lam(self) -> float:
        return self.hub_service.rate

    def initial_counts(self) -> tuple[int, list[int]]:
        if self.initial == "all_in_hub":
            return self.n, [0] * self.stations
        return self.initial[0], list(self.initial[1:])

    def non_bottleneck_stations(self) -> list[int]:
        return [j for j in range(self.stations) if j != self.bottleneck]

    def to_config(self) -> dict:
        return {
            "n": self.n,
            "hub_service": self.hub_service.to_config(),
            "p": list(self.p),
            "mu": list(self.mu),
            "bottleneck": self.bottleneck,
            "initial": self.initial if isinstance(self.initial, str) else list(self.initial),
            "allow_nonstandard": self.allow_nonstandard,
        }

    @classmethod
    def from_config(cls, obj: dict) -> "NetworkConfig":
        initial = obj.get("initial", "all_in_hub")
        if isinstance(initial, list):
            initial = tuple(initial)
        return cls(
            n=obj["n"],
            hub_service=distribution_from_config(obj["hub_service"]),
            p=tuple(obj["p"]),
            mu=tuple(obj["mu"]),
            bottleneck=obj.get("bottleneck"),
            initial=initial,
            allow_nonstandard=bool(obj.get("allow_nonstandard", False)),
        )


@dataclass
class SimTrace:
    """Left-limit snapshots plus counting processes from one run."""

    seed: int
    horizon: float
    sample_times: tuple[float, ...]
    hub: np.ndarray              # (T,) hub counts, left limits
    queues: np.ndarray           # (k, T) satellite counts, left limits
    arrivals: np.ndarray         # (k, T) cumulative arrivals A_j, left limits
    departures: np.ndarray       # (k, T) cumulative departures D_j, left limits
    hub_integral: np.ndarray     # (T,) integral of the hub count up to each time
    final_arrivals: np.ndarray   # (k,)
    final_departures: np.ndarray
    final_hub_integral: float
    busy_periods: list[list[tuple[float, float, int]]]  # per station: (start, end, f1)
    hub_services: list[tuple[int, float]]               # (K at start, duration)
    events: list[tuple] | None   # optional (time, kind, station, hub, queues) log


def _streams(seed: int, stations: int):
    def gen(key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))

    return gen(0), gen(1), [gen(2 + j) for j in range(stations)]


def replication_seed(base_seed: int, index: int) -> int:
    """Deterministic per-replication seed split from the root seed."""
    child = np.random.SeedSequence(base_seed, spawn_key=(index,))
    return int(child.generate_state(1, np.uint64)[0])


def simulate(
    cfg: NetworkConfig,
    horizon: float,
    sample_times,
    seed: int,
    record_events: bool = False,
) -> SimTrace:
    """Run one trajectory and record left-limit state at the sample times."""
    if horizon < 0.0:
        raise ValueError(f"horizon must be nonnegative, got {horizon!r}")
    times = tuple(sorted(float(t) for t in sample_times))
    if times and (times[0] < 0.0 or times[-1] > horizon):
        raise ValueError("sample times must lie within [0, horizon]")

    k = cfg.stations
    hub, counts = cfg.initial_counts()
    hub_rng, route_rng, sat_rngs = _streams(seed, k)
    sample_one = cfg.hub_service.sample_one
    sat_scales = [1.0 / (cfg.n * m) for m in cfg.mu]
    p_cum = np.cumsum(cfg.p)

    nt = len(times)
    out_hub = np.zeros(nt, dtype=np.int64)
    out_queues = np.zeros((k, nt), dtype=np.int64)
    out_arr = np.zeros((k, nt), dtype=np.int64)
    out_dep = np.zeros((k, nt), dtype=np.int64)
    out_integral = np.zeros(nt)

    arrivals = [0] * k
    departures = [0] * k
    busy_periods: list[list[tuple[float, float, int]]] = [[] for _ in range(k)]
    bp_start = [0.0] * k
    bp_f1 = [0] * k
    hub_services: list[tuple[int, float]] = []
    events: list[tuple] | None = [] if record_events else None

    heap: list[tuple[float, int, int, int]] = []
    seq = 0
    t = 0.0
    t_last = 0.0
    integral = 0.0
    hub_busy = False

    def start_hub_service(now: float):
        nonlocal hub_busy, seq
        duration = sample_one(hub_rng) / hub  # scaled law: X/K at occupancy K
        hub_services.append((hub, duration))
        hub_busy = True
        seq += 1
        heapq.heappush(heap, (now + duration, 1, -1, seq))

    def start_satellite_service(j: int, now: float):
        nonlocal seq
        duration = sat_rngs[j].exponential(sat_scales[j])
        seq += 1
        heapq.heappush(heap, (now + duration, 0, j, seq))

    if hub > 0:
        start_hub_service(0.0)
    for j in range(k):
        if counts[j] > 0:
            start_satellite_service(j, 0.0)

    si = 0

    def flush_samples(upto: float):
        nonlocal si
        while si < nt and times[si] <= upto:
            ts = times[si]
            out_hub[si] = hub
            out_queues[:, si] = counts
            out_arr[:, si] = arrivals
            out_dep[:, si] = departures
            out_integral[si] = integral + hub * (ts - t_last)
            si += 1

    while heap:
        ev_t, kind, station, _ = heap[0]
        if ev_t > horizon:
            break
        heapq.heappop(heap)
        assert ev_t >= t, "event clock must be nondecreasing"
        flush_samples(ev_t)
        integral += hub * (ev_t - t_last)
        t_last = ev_t
        t = ev_t

        if kind == 0:
            j = station
            assert counts[j] >= 1
            counts[j] -= 1
            departures[j] += 1
            if counts[j] > 0:
                start_satellite_service(j, t)
            else:
                busy_periods[j].append((bp_start[j], t, bp_f1[j]))
            hub += 1
            if not hub_busy:
                start_hub_service(t)
        else:
            assert hub >= 1 and hub_busy
            hub -= 1
            hub_busy = False
            u = route_rng.random()
            j = int(np.searchsorted(p_cum, u, side="right"))
            if j >= k:
                j = k - 1
            arrivals[j] += 1
            prev = counts[j]
            if prev == 1:
                bp_f1[j] += 1
            elif prev == 0:
                bp_start[j] = t
                bp_f1[j] = 0
            counts[j] += 1
            if prev == 0:
                start_satellite_service(j, t)
            if hub >= 1:
                start_hub_service(t)

        assert hub + sum(counts) == cfg.n, "unit conservation violated"
        if events is not None:
            name = "satellite_completion" if kind == 0 else "hub_completion"
            events.append((t, name, j, hub, tuple(counts)))

    flush_samples(horizon)

    return SimTrace(
        seed=seed,
        horizon=horizon,
        sample_times=times,
        hub=out_hub,
        queues=out_queues,
        arrivals=out_arr,
        departures=out_dep,
        hub_integral=out_integral,
        final_arrivals=np.array(arrivals, dtype=np.int64),
        final_departures=np.array(departures, dtype=np.int64),
        final_hub_integral=integral + hub * (horizon - t_last),
        busy_periods=busy_periods,
        hub_services=hub_services,
        events=events,
    )


@dataclass(frozen=True)
class OffspringEstimate:
    """Across-busy-period mean of f(1) with an undefined-estimate flag."""

    value: float
    busy_periods: int
    defined: bool


def _window_offspring(bps: list[tuple[float, float, int]], window: tuple[float, float]):
    t0, t1 = window
    selected = [f1 for start, end, f1 in bps if start >= t0 and end <= t1]
    return sum(selected), len(selected)


def offspring_mean(trace: SimTrace, station: int, window: tuple[float, float]) -> OffspringEstimate:
    """Mean count of arrivals finding exactly one unit present, per busy period.

    Only busy periods that start and finish inside the window contribute;
    with none completed the estimate is flagged undefined.
    """
    t0, t1 = window
    if not 0.0 <= t0 < t1 <= trace.horizon:
        raise ValueError(f"window [{t0!r}, {t1!r}] must lie within [0, horizon]")
    if not 0 <= station < len(trace.busy_periods):
        raise ValueError(f"station index {station!r} out of range")
    total, count = _window_offspring(trace.busy_periods[station], window)
    if count == 0:
        return OffspringEstimate(value=math.nan, busy_periods=0, defined=False)
    return OffspringEstimate(value=total / count, busy_periods=count, defined=True)


@dataclass
class _RepSummary:
    occupancy: np.ndarray        # (T,) hub counts / n
    queues: np.ndarray           # (k, T)
    arrivals: np.ndarray         # (k, T)
    departures: np.ndarray       # (k, T)
    hub_integral: np.ndarray     # (T,)
    final_arrivals: np.ndarray   # (k,)
    final_departures: np.ndarray
    final_hub_integral: float
    offspring_sum: np.ndarray    # (k,) summed f(1) over completed busy periods in window
    offspring_count: np.ndarray  # (k,) completed busy periods in window


def _run_replication(args) -> _RepSummary:
    cfg, horizon, sample_times, rep_seed, window = args
    trace = simulate(cfg, horizon, sample_times, rep_seed)
    k = cfg.stations
    off_sum = np.zeros(k, dtype=np.int64)
    off_cnt = np.zeros(k, dtype=np.int64)
    for j in range(k):
        off_sum[j], off_cnt[j] = _window_offspring(trace.busy_periods[j], window)
    return _RepSummary(
        occupancy=trace.hub / cfg.n,
        queues=trace.queues,
        arrivals=trace.arrivals,
        departures=trace.departures,
        hub_integral=trace.hub_integral,
        final_arrivals=trace.final_arrivals,
        final_departures=trace.final_departures,
        final_hub_integral=trace.final_hub_integral,
        offspring_sum=off_sum,
        offspring_count=off_cnt,
    )


@dataclass
class SimEstimate:
    """Replication-aggregated estimates with normal-approximation half-widths.

    Histograms are over replications, so each (station, time) histogram sums
    to one; half-widths are None when fewer than two replications (or, for
    offspring, fewer than two replications with a defined estimate) exist.
    """

    n: int
    replications: int
    base_seed: int
    horizon: float
    sample_times: tuple[float, ...]
    seed_set: tuple[int, ...]
    offspring_window: tuple[float, float]
    hub_mean: np.ndarray
    hub_halfwidth: np.ndarray | None
    hub_reps: np.ndarray              # (R, T) per-replication occupancies
    queue_hist: list[list[dict[int, float]]]
    offspring_value: np.ndarray       # (k,) NaN when undefined
    offspring_halfwidth: np.ndarray   # (k,) NaN when unavailable
    offspring_busy_periods: np.ndarray
    offspring_defined_reps: np.ndarray
    arrivals_final: np.ndarray        # (R, k)
    departures_final: np.ndarray      # (R, k)
    hub_integral_final: np.ndarray    # (R,)
    event_counts: dict[str, list[int]]

    def histogram(self, station: int, t: float) -> dict[int, float]:
        for idx, ts in enumerate(self.sample_times):
            if math.isclose(ts, t, rel_tol=0.0, abs_tol=1e-9):
                return self.queue_hist[station][idx]
        raise ValueError(f"no histogram recorded at t = {t!r}")

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "n": self.n,
            "replications": self.replications,
            "base_seed": self.base_seed,
            "horizon": self.horizon,
            "sample_times": list(self.sample_times),
            "seed_set": list(self.seed_set),
            "offspring_window": list(self.offspring_window),
            "hub_mean": arr(self.hub_mean),
            "hub_halfwidth": arr(self.hub_halfwidth),
            "hub_reps": arr(self.hub_reps),
            "queue_hist": [
                [{str(c): p for c, p in sorted(h.items())} for h in per_station]
                for per_station in self.queue_hist
            ],
            "offspring_value": arr(self.offspring_value),
            "offspring_halfwidth": arr(self.offspring_halfwidth),
            "offspring_busy_periods": arr(self.offspring_busy_periods),
            "offspring_defined_reps": arr(self.offspring_defined_reps),
            "arrivals_final": arr(self.arrivals_final),
            "departures_final": arr(self.departures_final),
            "hub_integral_final": arr(self.hub_integral_final),
            "event_counts": self.event_counts,
        }


def replicate(
    cfg: NetworkConfig,
    horizon: float,
    sample_times,
    base_seed: int,
    replications: int,
    workers: int = 1,
    offspring_window: tuple[float, float] | None = None,
) -> SimEstimate:
    """Aggregate independent replications with deterministically split seeds.

    The result is bit-identical for any worker count: seeds depend only on
    (base_seed, replication index) and aggregation runs in index order.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications!r}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers!r}")
    times = tuple(sorted(float(t) for t in sample_times))
    window = offspring_window if offspring_window is not None else (0.0, horizon)
    if not 0.0 <= window[0] < window[1] <= horizon:
        raise ValueError(f"offspring window {window!r} must lie within [0, horizon]")

    seeds = tuple(replication_seed(base_seed, i) for i in range(replications))
    tasks = [(cfg, horizon, times, s, window) for s in seeds]
    if workers == 1 or replications == 1:
        summaries = [_run_replication(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_replication, tasks))

    r = replications
    k = cfg.stations
    nt = len(times)
    occ = np.stack([s.occupancy for s in summaries])          # (R, T)
    queues = np.stack([s.queues for s in summaries])          # (R, k, T)
    hub_mean = occ.mean(axis=0)
    hub_hw = Z_95 * occ.std(axis=0, ddof=1) / math.sqrt(r) if r >= 2 else None

    queue_hist: list[list[dict[int, float]]] = []
    for j in range(k):
        per_station = []
        for ti in range(nt):
            vals, freq = np.unique(queues[:, j, ti], return_counts=True)
            per_station.append({int(v): float(c) / r for v, c in zip(vals, freq)})
        queue_hist.append(per_station)

    off_sum = np.stack([s.offspring_sum for s in summaries])    # (R, k)
    off_cnt = np.stack([s.offspring_count for s in summaries])  # (R, k)
    off_value = np.full(k, math.nan)
    off_hw = np.full(k, math.nan)
    defined_reps = (off_cnt > 0).sum(axis=0)
    for j in range(k):
        mask = off_cnt[:, j] > 0
        if not mask.any():
            continue
        per_rep = off_sum[mask, j] / off_cnt[mask, j]
        off_value[j] = per_rep.mean()
        if mask.sum() >= 2:
            off_hw[j] = Z_95 * per_rep.std(ddof=1) / math.sqrt(mask.sum())

    arrivals_final = np.stack([s.final_arrivals for s in summaries])
    departures_final = np.stack([s.final_departures for s in summaries])
    return SimEstimate(
        n=cfg.n,
        replications=r,
        base_seed=base_seed,
        horizon=horizon,
        sample_times=times,
        seed_set=seeds,
        offspring_window=window,
        hub_mean=hub_mean,
        hub_halfwidth=hub_hw,
        hub_reps=occ,
        queue_hist=queue_hist,
        offspring_value=off_value,
        offspring_halfwidth=off_hw,
        offspring_busy_periods=off_cnt.sum(axis=0),
        offspring_defined_reps=defined_reps,
        arrivals_final=arrivals_final,
        departures_final=departures_final,
        hub_integral_final=np.array([s.final_hub_integral for s in summaries]),
        event_counts={
            "arrivals": arrivals_final.sum(axis=0).tolist(),
            "services": departures_final.sum(axis=0).tolist(),
        },
    )


def compare_to_law(
    est: SimEstimate,
    law: QueueLengthLaw,
    station: int,
    t: float,
) -> tuple[float, float]:
    """Total-variation distance and chi-square statistic against the law.

    The chi-square pools adjacent queue-length bins until each group has
    expected count at least 5 under the law (remainder merged into the last
    group); the observation count is the number of replications.
    """
    return histogram_vs_law(est.histogram(station, t), est.replications, law)


def histogram_vs_law(
    hist: dict[int, float],
    n_obs: int,
    law: QueueLengthLaw,
) -> tuple[float, float]:
    """TV distance and pooled chi-square of a probability histogram vs the law."""
    top = max(max(hist), law.i_max)
    emp = np.array([hist.get(i, 0.0) for i in range(top + 1)])
    theo = np.array([law.pmf(i) for i in range(top + 1)])
    tail = law.rho * law.phi**top  # law mass beyond the tabulated range
    tv = 0.5 * (float(np.abs(emp - theo).sum()) + tail)

    groups: list[tuple[float, float]] = []
    obs_g = exp_g = 0.0
    for i in range(top + 1):
        obs_g += emp[i] * n_obs
        exp_g += theo[i] * n_obs
        if exp_g >= 5.0:
            groups.append((obs_g, exp_g))
            obs_g = exp_g = 0.0
    exp_g += tail * n_obs
    if obs_g > 0.0 or exp_g > 0.0:
        if groups:
            o, e = groups[-1]
            groups[-1] = (o + obs_g, e + exp_g)
        else:
            groups.append((obs_g, exp_g))
    chi2 = sum((o - e) ** 2 / e for o, e in groups if e > 0.0)
    return tv, chi2
