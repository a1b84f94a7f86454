"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.  Every tolerance is pinned here; the heavy simulation
criteria use frozen seeds.
"""

import json
import math
import time

import numpy as np

from hubsat import cli
from hubsat.bounds import queue_length_law, rolski_bounds, traffic_intensity, wald_moments
from hubsat.distributions import (
    AgingClass,
    Deterministic,
    Erlang,
    Exponential,
    Gamma,
    HyperExp2,
    aging_class,
    memoryless_deviation,
)
from hubsat.fluid import FluidParams, difference_quotients, hub_fluid, hub_fluid_mean, partition_expansion
from hubsat.roots import CompoundSpec, finite_n_root, poisson_extinction, satellite_root
from hubsat.simulator import NetworkConfig, compare_to_law, replicate


def report(num: int, ok: bool, budget: float, elapsed: float, detail: str):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {num:2d}: {status} ({elapsed:.2f}s of {budget:g}s budget) - {detail}")
    assert ok, f"criterion {num}: {detail}"
    assert elapsed <= budget, f"criterion {num} exceeded its {budget}s runtime budget ({elapsed:.1f}s)"


def test_criterion_01_exponential_collapse():
    start = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        lam = float(rng.uniform(0.3, 3.0))
        p = float(rng.uniform(0.05, 0.95))
        q = float(rng.uniform(0.2, 1.0))
        mu = lam * p * q * float(rng.uniform(1.02, 6.0))
        spec = CompoundSpec(base=Exponential(lam), branch_prob=p, scale=q, service_rate=mu)
        rho = traffic_intensity(lam, p, mu, q)
        worst = max(worst, abs(satellite_root(spec).root - rho))
    elapsed = time.time() - start
    report(1, worst <= 1e-9, 1.0, elapsed, f"max |root - rho| = {worst:.2e} over 200 draws")


def test_criterion_02_erlang_cubic_oracle():
    start = time.time()
    # oracle: z^3 - 4z^2 + 4z - 1 = (z - 1)(z^2 - 3z + 1)
    expected = (3.0 - math.sqrt(5.0)) / 2.0
    spec = CompoundSpec(base=Erlang(2, 2.0), branch_prob=1.0, scale=1.0, service_rate=2.0)
    got = satellite_root(spec).root
    elapsed = time.time() - start
    report(2, abs(got - expected) <= 1e-9, 1.0, elapsed,
           f"root {got:.12f} vs (3 - sqrt(5))/2 = {expected:.12f}")


def test_criterion_03_rolski_sandwich():
    start = time.time()
    rng = np.random.default_rng(333)
    draws = [
        lambda: Exponential(float(rng.uniform(0.3, 3.0))),
        lambda: Erlang(int(rng.integers(1, 6)), float(rng.uniform(0.5, 4.0))),
        lambda: HyperExp2(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.3, 3.0)),
                          float(rng.uniform(0.3, 3.0))),
        lambda: Deterministic(float(rng.uniform(0.2, 3.0))),
        lambda: Gamma(float(rng.uniform(0.4, 5.0)), float(rng.uniform(0.5, 4.0))),
    ]
    violations = 0
    for i in range(1000):
        dist = draws[i % 5]()
        p = float(rng.uniform(0.05, 0.95))
        q = float(rng.uniform(0.3, 1.0))
        mu = dist.rate * p * q * float(rng.uniform(1.05, 5.0))
        spec = CompoundSpec(base=dist, branch_prob=p, scale=q, service_rate=mu)
        root = satellite_root(spec).root
        sandwich = rolski_bounds(wald_moments(dist, p, q, "corrected"), mu)
        if not (sandwich.lo - 1e-9 <= root <= sandwich.hi + 1e-9):
            violations += 1
    elapsed = time.time() - start
    report(3, violations == 0, 10.0, elapsed,
           f"{violations} sandwich violations in 1000 instances at 1e-9 slack")


def test_criterion_04_continuity_bound():
    start = time.time()
    rng = np.random.default_rng(444)
    t1_ok = t2_ok = accepted = 0
    while accepted < 100:
        w = float(rng.uniform(0.3, 0.7))
        base = float(rng.uniform(0.7, 1.5))
        spread = float(rng.uniform(0.02, 0.22))
        dist = HyperExp2(w, base * (1.0 + spread), base / (1.0 + spread))
        eps = memoryless_deviation(dist)
        if eps > 0.05:
            continue
        accepted += 1
        lam = dist.rate
        p = float(rng.uniform(0.2, 0.9))
        q = float(rng.uniform(0.4, 1.0))
        mu = lam * p * q * float(rng.uniform(1.2, 4.0))
        spec = CompoundSpec(base=dist, branch_prob=p, scale=q, service_rate=mu)
        root = satellite_root(spec).root
        rho = traffic_intensity(lam, p, mu, q)
        ell = poisson_extinction(mu / (lam * p * q)).root
        gap = abs(root - rho)
        if gap <= (2.0 * eps / p) * (1.0 - ell) + 1e-9:
            t1_ok += 1
        if aging_class(dist) in (AgingClass.NWU, AgingClass.BOUNDARY) and \
                gap <= (eps / p) * (1.0 - ell) + 1e-9:
            t2_ok += 1
    elapsed = time.time() - start
    report(4, t1_ok == 100 and t2_ok == 100, 30.0, elapsed,
           f"T1 bound {t1_ok}/100, NWU T2 bound {t2_ok}/100 (measured eps <= 0.05)")


def test_criterion_05_wald_monte_carlo():
    start = time.time()
    # mean 1, second moment 3: rates are the roots of x^2 - 4x + 2
    r1, r2 = 2.0 + math.sqrt(2.0), 2.0 - math.sqrt(2.0)
    dist = HyperExp2(0.5, r1, r2)
    p = 1.0 / 3.0
    rng = np.random.default_rng(555)
    tau = rng.geometric(p, size=1_000_000)
    total = int(tau.sum())
    # independent sampling mechanism: mixture of exponentials, not inversion
    rates = np.where(rng.random(total) < 0.5, r1, r2)
    draws = rng.exponential(1.0, total) / rates
    sums = np.add.reduceat(draws, np.concatenate(([0], np.cumsum(tau)[:-1])))
    mc_a = float(sums.mean())
    mc_b = float(np.mean(sums**2))
    corrected = wald_moments(dist, p, 1.0, "corrected")
    paper = wald_moments(dist, p, 1.0, "paper")
    a_err = abs(mc_a - corrected.a) / corrected.a
    b_err = abs(mc_b - corrected.b) / corrected.b
    paper_dev = abs(paper.b - mc_b) / mc_b
    elapsed = time.time() - start
    report(
        5,
        a_err <= 5e-3 and b_err <= 1e-2 and paper_dev > 0.05,
        10.0,
        elapsed,
        f"oracle a err {a_err:.2%}, corrected b err {b_err:.2%}; "
        f"literal-variance b = {paper.b:g} deviates {paper_dev:.1%} from the oracle "
        f"(corrected b = {corrected.b:g}, oracle {mc_b:.3f})",
    )


def test_criterion_06_fluid_limit():
    start = time.time()
    fp = FluidParams(lam=1.0, p_k=1.0, mu_k=0.5)
    times = [0.5, 1.0, 2.0, 4.0]
    devs = {}
    for n in (200, 2000):
        cfg = NetworkConfig(n=n, hub_service=Exponential(1.0), p=(1.0,), mu=(0.5,))
        est = replicate(cfg, 4.0, times, base_seed=606, replications=20)
        devs[n] = max(abs(float(m) - hub_fluid(fp, t))
                      for m, t in zip(est.hub_mean, est.sample_times))
    elapsed = time.time() - start
    ok = devs[2000] < devs[200] and devs[2000] <= 0.03
    report(6, ok, 120.0, elapsed,
           f"max fluid deviation {devs[200]:.4f} (N=200) -> {devs[2000]:.4f} (N=2000)")


def test_criterion_07_queue_length_law():
    start = time.time()
    cfg = NetworkConfig(n=1000, hub_service=Exponential(1.0), p=(0.5, 0.5), mu=(1.0, 0.25))
    est = replicate(cfg, 3.0, [3.0], base_seed=20260810, replications=500)
    fp = FluidParams(lam=1.0, p_k=0.5, mu_k=0.25)
    q3 = hub_fluid(fp, 3.0)
    rho = traffic_intensity(1.0, 0.5, 1.0, q3)
    law = queue_length_law(rho, rho)  # exponential hub: phi = rho
    tv, chi2 = compare_to_law(est, law, 0, 3.0)
    elapsed = time.time() - start
    report(7, tv <= 0.08, 600.0, elapsed,
           f"TV distance {tv:.4f} (chi2 {chi2:.2f}) vs law(rho={rho:.4f}) at t=3, R=500")


def test_criterion_08_partition_expansion():
    start = time.time()
    fp = FluidParams(lam=1.0, p_k=1.0, mu_k=0.5)
    ratios_ok = True
    for t in (0.5, 1.0, 2.0):
        deltas = [0.002, 0.001, 0.0005, 0.00025]
        errors = [abs(partition_expansion(fp, d, round(t / d)) - hub_fluid(fp, t))
                  for d in deltas]
        ratios = [a / b for a, b in zip(errors, errors[1:])]
        ratios_ok &= all(1.7 <= r <= 2.3 for r in ratios)
    limits = (0.5, 0.5, 0.5)  # drift, lam p drift, (lam p)^2 drift
    quotient_ok = True
    errs = []
    for d in (2e-3, 1e-3, 5e-4, 2.5e-4):
        vals = difference_quotients(fp, d)
        errs.append([abs(v - l) for v, l in zip(vals, limits)])
    final = difference_quotients(fp, 1e-4)
    quotient_ok &= abs(final[0] - 0.5) <= 1e-4
    quotient_ok &= abs(final[1] - 0.5) <= 1e-3
    quotient_ok &= abs(final[2] - 0.5) <= 1e-2
    conv = np.array(errs)
    quotient_ok &= bool(np.all((conv[:-1] / conv[1:] >= 1.7) & (conv[:-1] / conv[1:] <= 2.3)))
    elapsed = time.time() - start
    report(8, ratios_ok and quotient_ok, 1.0, elapsed,
           "expansion error halves with delta; quotients hit (0.5, 0.5, 0.5) at first order")


def test_criterion_09_finite_population_consistency():
    start = time.time()
    q = hub_fluid(FluidParams(1.0, 0.5, 0.25), 2.0)  # 0.68394...
    spec = CompoundSpec(base=Erlang(2, 2.0), branch_prob=0.5, scale=q, service_rate=1.0)
    limit = satellite_root(spec).root
    errors = [abs(finite_n_root(spec, n, q).root - limit)
              for n in (100, 1000, 10_000, 100_000)]
    monotone = all(a > b for a, b in zip(errors, errors[1:]))
    elapsed = time.time() - start
    report(9, monotone and errors[-1] <= 1e-4, 1.0, elapsed,
           "errors " + " > ".join(f"{e:.2e}" for e in errors))


def test_criterion_10_offspring_mean():
    start = time.time()
    cfg = NetworkConfig(n=2000, hub_service=Exponential(1.0), p=(0.5, 0.5), mu=(1.0, 0.25))
    est = replicate(cfg, 4.0, [4.0], base_seed=999, replications=150,
                    offspring_window=(2.0, 4.0))
    fp = FluidParams(lam=1.0, p_k=0.5, mu_k=0.25)
    q_avg = hub_fluid_mean(fp, 2.0, 4.0)
    spec = CompoundSpec(base=Exponential(1.0), branch_prob=0.5, scale=q_avg, service_rate=1.0)
    phi = satellite_root(spec).root
    value = float(est.offspring_value[0])
    halfwidth = float(est.offspring_halfwidth[0])
    elapsed = time.time() - start
    report(10, abs(value - phi) <= halfwidth, 300.0, elapsed,
           f"offspring mean {value:.4f} +/- {halfwidth:.4f} vs phi(q_avg) = {phi:.4f} "
           f"over {int(est.offspring_busy_periods[0])} busy periods")


def test_criterion_11_validate_determinism(tmp_path):
    start = time.time()
    doc = {
        "network": {
            "n": 2000,
            "hub_service": {"family": "exponential", "params": {"rate": 1.0}},
            "p": [1.0],
            "mu": [0.5],
        },
        "times": [0.5, 1.0, 2.0, 4.0],
        "sim": {"replications": 20, "base_seed": 606, "horizon": 4.0},
        "validate": {"fluid_tol": 0.03, "compensator_sigma": 4.0},
        "output": {"dir": str(tmp_path / "a")},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(doc))
    runs = {}
    codes = []
    for name, workers in (("a", 1), ("b", 1), ("c", 4)):
        codes.append(cli.main([
            "validate", "--config", str(cfg_path),
            "--out", str(tmp_path / name), "--workers", str(workers),
        ]))
        runs[name] = (
            (tmp_path / name / "validate.csv").read_bytes(),
            (tmp_path / name / "validate.json").read_bytes(),
        )
    identical = runs["a"] == runs["b"] == runs["c"]
    elapsed = time.time() - start
    report(11, identical and codes == [0, 0, 0], 120.0, elapsed,
           f"3 validate runs (workers 1,1,4) exit {codes}, outputs byte-identical: {identical}")
