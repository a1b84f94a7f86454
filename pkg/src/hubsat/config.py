"""Experiment configuration: one JSON document drives every CLI command.

All defaults are materialized into the resolved dictionary that commands
embed in their JSON outputs, so an experiment is reproducible from its own
artifacts.  Validation failures carry the JSON field path that caused them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .simulator import NetworkConfig

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]


class ConfigError(ValueError):
    """Configuration rejected; `path` names the offending JSON field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _expect(obj: dict, path: str, key: str, types, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigError(f"{path}.{key}", "required field is missing")
        return default
    value = obj[key]
    if types is not None and not isinstance(value, types):
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ConfigError(f"{path}.{key}", f"expected {names}, got {type(value).__name__}")
    return value


def _expect_number(obj, path, key, default=None, required=False, positive=False):
    value = _expect(obj, path, key, (int, float), default=default, required=required)
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}", "expected a number, got a boolean")
    if value is not None and positive and value <= 0:
        raise ConfigError(f"{path}.{key}", f"must be positive, got {value}")
    return value


@dataclass
class SolverSettings:
    tol: float = 1e-12
    max_iter: int = 1_000_000


@dataclass
class BoundsSettings:
    epsilon_source: str | float = "measured"  # "measured" or an explicit value
    variant: str = "corrected"
    theorem: str = "T1"


@dataclass
class SimSettings:
    replications: int = 1
    base_seed: int = 0
    horizon: float = 1.0
    workers: int = 1
    offspring_window: tuple[float, float] | None = None


@dataclass
class ValidateSettings:
    """Tolerances are enforced only when present; metrics are always reported."""

    fluid_tol: float | None = None
    tv_tol: float | None = None
    compensator_sigma: float | None = None
    offspring_sigma: float | None = None
    reference_mu: tuple[float, ...] | None = None  # negative-control override
    reference_lam: float | None = None


@dataclass
class OutputSettings:
    dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass
class ExperimentConfig:
    network: NetworkConfig
    times: tuple[float, ...]
    solver: SolverSettings = field(default_factory=SolverSettings)
    bounds: BoundsSettings = field(default_factory=BoundsSettings)
    sim: SimSettings = field(default_factory=SimSettings)
    validation: ValidateSettings = field(default_factory=ValidateSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def resolved(self) -> dict:
        """Fully materialized configuration for output provenance."""
        return {
            "network": self.network.to_config(),
            "times": list(self.times),
            "solver": {"tol": self.solver.tol, "max_iter": self.solver.max_iter},
            "bounds": {
                "epsilon_source": self.bounds.epsilon_source,
                "variant": self.bounds.variant,
                "theorem": self.bounds.theorem,
            },
            # workers is deliberately absent: results are worker-invariant, so
            # the provenance block stays byte-identical across worker counts
            "sim": {
                "replications": self.sim.replications,
                "base_seed": self.sim.base_seed,
                "horizon": self.sim.horizon,
                "offspring_window": (
                    None if self.sim.offspring_window is None else list(self.sim.offspring_window)
                ),
            },
            "validate": {
                "fluid_tol": self.validation.fluid_tol,
                "tv_tol": self.validation.tv_tol,
                "compensator_sigma": self.validation.compensator_sigma,
                "offspring_sigma": self.validation.offspring_sigma,
                "reference": {
                    "mu": None if self.validation.reference_mu is None else list(self.validation.reference_mu),
                    "lam": self.validation.reference_lam,
                },
            },
            "output": {"dir": self.output.dir, "formats": list(self.output.formats)},
        }


def _parse_network(obj, path="network") -> NetworkConfig:
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    _expect(obj, path, "n", int, required=True)
    hub = _expect(obj, path, "hub_service", dict, required=True)
    p = _expect(obj, path, "p", list, required=True)
    mu = _expect(obj, path, "mu", list, required=True)
    for key, vec in (("p", p), ("mu", mu)):
        for i, v in enumerate(vec):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"{path}.{key}[{i}]", "expected a number")
    initial = obj.get("initial", "all_in_hub")
    if isinstance(initial, list):
        initial = tuple(initial)
    try:
        return NetworkConfig(
            n=obj["n"],
            hub_service=_dist_from(hub, f"{path}.hub_service"),
            p=tuple(p),
            mu=tuple(mu),
            bottleneck=_expect(obj, path, "bottleneck", int),
            initial=initial,
            allow_nonstandard=bool(obj.get("allow_nonstandard", False)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        # NetworkConfig's own message names the offending field (p, mu, ...)
        raise ConfigError(path, str(exc)) from exc


def _dist_from(obj: dict, path: str):
    from .distributions import distribution_from_config

    try:
        return distribution_from_config(obj)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_times(obj, path="times") -> tuple[float, ...]:
    if not isinstance(obj, list) or not obj:
        raise ConfigError(path, "expected a nonempty array of sample times")
    out = []
    for i, v in enumerate(obj):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
            raise ConfigError(f"{path}[{i}]", f"expected a nonnegative number, got {v!r}")
        out.append(float(v))
    return tuple(sorted(out))


def _parse_solver(obj, path="solver") -> SolverSettings:
    if obj is None:
        return SolverSettings()
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    return SolverSettings(
        tol=float(_expect_number(obj, path, "tol", default=1e-12, positive=True)),
        max_iter=int(_expect_number(obj, path, "max_iter", default=1_000_000, positive=True)),
    )


def _parse_bounds(obj, path="bounds") -> BoundsSettings:
    if obj is None:
        return BoundsSettings()
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    source = obj.get("epsilon_source", "measured")
    if isinstance(source, bool) or not isinstance(source, (str, int, float)):
        raise ConfigError(f"{path}.epsilon_source", "expected 'measured' or a number")
    if isinstance(source, str):
        if source != "measured":
            raise ConfigError(f"{path}.epsilon_source", f"expected 'measured' or a number, got {source!r}")
    else:
        source = float(source)
        if source < 0:
            raise ConfigError(f"{path}.epsilon_source", "explicit epsilon must be nonnegative")
    variant = _expect(obj, path, "variant", str, default="corrected")
    if variant not in ("corrected", "paper"):
        raise ConfigError(f"{path}.variant", f"expected 'corrected' or 'paper', got {variant!r}")
    theorem = _expect(obj, path, "theorem", str, default="T1")
    if theorem not in ("T1", "T2"):
        raise ConfigError(f"{path}.theorem", f"expected 'T1' or 'T2', got {theorem!r}")
    return BoundsSettings(epsilon_source=source, variant=variant, theorem=theorem)


def _parse_sim(obj, times, path="sim") -> SimSettings:
    defaults = SimSettings(horizon=max(times) if times else 1.0)
    if obj is None:
        return defaults
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    horizon = float(_expect_number(obj, path, "horizon", default=defaults.horizon, positive=True))
    window = _expect(obj, path, "offspring_window", list)
    if window is not None:
        if len(window) != 2:
            raise ConfigError(f"{path}.offspring_window", "expected [t0, t1]")
        window = (float(window[0]), float(window[1]))
        if not 0.0 <= window[0] < window[1] <= horizon:
            raise ConfigError(f"{path}.offspring_window", "window must lie within [0, horizon]")
    replications = int(_expect_number(obj, path, "replications", default=1))
    if replications < 1:
        raise ConfigError(f"{path}.replications", f"must be >= 1, got {replications}")
    workers = int(_expect_number(obj, path, "workers", default=1))
    if workers < 1:
        raise ConfigError(f"{path}.workers", f"must be >= 1, got {workers}")
    seed = _expect(obj, path, "base_seed", int, default=0)
    if seed < 0:
        raise ConfigError(f"{path}.base_seed", "seed must be nonnegative")
    return SimSettings(
        replications=replications,
        base_seed=seed,
        horizon=horizon,
        workers=workers,
        offspring_window=window,
    )


def _parse_validate(obj, network: NetworkConfig, path="validate") -> ValidateSettings:
    if obj is None:
        return ValidateSettings()
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    out = ValidateSettings(
        fluid_tol=_opt_pos(obj, path, "fluid_tol"),
        tv_tol=_opt_pos(obj, path, "tv_tol"),
        compensator_sigma=_opt_pos(obj, path, "compensator_sigma"),
        offspring_sigma=_opt_pos(obj, path, "offspring_sigma"),
    )
    ref = _expect(obj, path, "reference", dict)
    if ref is not None:
        mu = _expect(ref, f"{path}.reference", "mu", list)
        if mu is not None:
            if len(mu) != network.stations:
                raise ConfigError(f"{path}.reference.mu", f"expected {network.stations} rates")
            out.reference_mu = tuple(float(v) for v in mu)
        lam = _expect_number(ref, f"{path}.reference", "lam", positive=True)
        if lam is not None:
            out.reference_lam = float(lam)
    return out


def _opt_pos(obj, path, key) -> float | None:
    value = _expect_number(obj, path, key, default=None, positive=True)
    return None if value is None else float(value)


def _parse_output(obj, path="output") -> OutputSettings:
    if obj is None:
        return OutputSettings()
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    formats = _expect(obj, path, "formats", list, default=["csv", "json"])
    for i, f in enumerate(formats):
        if f not in ("csv", "json"):
            raise ConfigError(f"{path}.formats[{i}]", f"expected 'csv' or 'json', got {f!r}")
    return OutputSettings(
        dir=_expect(obj, path, "dir", str, default="out"),
        formats=tuple(formats),
    )


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("$", "top-level config must be a JSON object")
    network = _parse_network(_expect(doc, "$", "network", dict, required=True))
    times = _parse_times(_expect(doc, "$", "times", list, required=True))
    return ExperimentConfig(
        network=network,
        times=times,
        solver=_parse_solver(doc.get("solver")),
        bounds=_parse_bounds(doc.get("bounds")),
        sim=_parse_sim(doc.get("sim"), times),
        validation=_parse_validate(doc.get("validate"), network),
        output=_parse_output(doc.get("output")),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("$", f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)
