"""JSON experiment configuration: parsing, defaults, validation.

Configs are strict: unknown keys are rejected and every error message names
the offending location (``$.grid.beta[2]`` style) so batch sweeps fail fast
and explicitly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from gmlab.gauss_markov import ProcessParams, Regime
from gmlab.hermite import Basis, PolySpec

EXPERIMENTS = (
    "VarianceValidation",
    "PhaseTransition",
    "TVDecayRates",
    "GammaContinuity",
    "MixingTimeSweep",
    "CovarianceCheck",
    "IdentitySuite",
)

DEFAULTS = {
    "grid": {"beta": [0.5, 1.0, 2.0], "gamma": [0.5], "n": [512], "regime": ["boundary"]},
    "spec": {"coeffs": {"2": 1.0}, "basis": "fixed"},
    "replicates": 10_000,
    "master_seed": 42,
    "output_dir": "results",
    "mc_budget_guard": 2.0e9,
    "sigma2_scale": 1.0,
    "eps0": 0.5,
    "steps_per_unit": None,
    "mixing_eps": 0.25,
    "mixing_delta": 0.1,
    "dump_samples": False,
    "threads": 1,
}

_TOP_KEYS = {"experiment"} | set(DEFAULTS)


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the JSON path."""


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _want_number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if positive and value <= 0:
        _fail(path, f"expected a positive number, got {value!r}")
    return float(value)


def _want_int(value, path: str, positive: bool = False) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    if positive and value <= 0:
        _fail(path, f"expected a positive integer, got {value!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    grid: tuple[ProcessParams, ...]
    spec: PolySpec
    replicates: int
    master_seed: int
    output_dir: str
    mc_budget_guard: float
    steps_per_unit: int | None
    mixing_eps: float
    mixing_delta: float
    dump_samples: bool
    threads: int
    raw: dict = field(repr=False)

    def resolved_steps_per_unit(self, gamma: float) -> int:
        """Config override, or the resolution rule max(1000, 1000 gamma)."""
        if self.steps_per_unit is not None:
            return self.steps_per_unit
        return max(1000, int(round(1000 * gamma)))


def default_config_document(experiment: str = "VarianceValidation") -> dict:
    doc = {"experiment": experiment}
    for key, value in DEFAULTS.items():
        if key == "steps_per_unit":
            continue
        doc[key] = json.loads(json.dumps(value))  # deep copy of plain JSON
    return doc


def _parse_spec(node, path: str) -> PolySpec:
    if not isinstance(node, dict):
        _fail(path, "expected an object with 'coeffs' and optional 'basis'")
    unknown = set(node) - {"coeffs", "basis"}
    if unknown:
        _fail(path, f"unknown keys {sorted(unknown)}")
    coeffs_node = node.get("coeffs")
    if not isinstance(coeffs_node, dict) or not coeffs_node:
        _fail(f"{path}.coeffs", "expected a nonempty object mapping order to coefficient")
    coeffs = {}
    for key, value in coeffs_node.items():
        try:
            order = int(key)
        except (TypeError, ValueError):
            _fail(f"{path}.coeffs", f"order {key!r} is not an integer")
        coeffs[order] = _want_number(value, f"{path}.coeffs[{key}]")
    basis_name = node.get("basis", "fixed")
    try:
        basis = Basis(basis_name)
    except ValueError:
        _fail(f"{path}.basis", f"expected one of {[b.value for b in Basis]}, got {basis_name!r}")
    try:
        return PolySpec(coeffs, basis)
    except ValueError as exc:
        _fail(path, str(exc))


def _parse_grid(node, path: str, sigma2_scale: float, eps0: float) -> tuple[ProcessParams, ...]:
    if not isinstance(node, dict):
        _fail(path, "expected an object with beta/gamma/n/regime lists")
    unknown = set(node) - {"beta", "gamma", "n", "regime"}
    if unknown:
        _fail(path, f"unknown keys {sorted(unknown)}")
    merged = {**DEFAULTS["grid"], **node}

    def want_list(key):
        values = merged[key]
        if not isinstance(values, list) or not values:
            _fail(f"{path}.{key}", "expected a nonempty list")
        return values

    betas = [_want_number(v, f"{path}.beta[{i}]", positive=True) for i, v in enumerate(want_list("beta"))]
    gammas = [_want_number(v, f"{path}.gamma[{i}]", positive=True) for i, v in enumerate(want_list("gamma"))]
    ns = [_want_int(v, f"{path}.n[{i}]", positive=True) for i, v in enumerate(want_list("n"))]
    regimes = []
    for i, v in enumerate(want_list("regime")):
        try:
            regimes.append(Regime(v))
        except ValueError:
            _fail(f"{path}.regime[{i}]", f"expected one of {[r.value for r in Regime]}, got {v!r}")

    out = []
    for beta, gamma, n, regime in itertools.product(
        sorted(set(betas)), sorted(set(gammas)), sorted(set(ns)), sorted(set(regimes), key=lambda r: r.value)
    ):
        try:
            out.append(
                ProcessParams(beta=beta, gamma=gamma, n=n, regime=regime, sigma2_scale=sigma2_scale, eps0=eps0)
            )
        except ValueError as exc:
            _fail(path, f"tuple (beta={beta:g}, gamma={gamma:g}, n={n}, regime={regime.value}): {exc}")
    return tuple(out)


def validate_config(raw_text: str) -> ExperimentConfig:
    """Parse and validate a JSON config document, applying defaults."""
    try:
        doc = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("$: expected a JSON object")

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        _fail("$", f"unknown keys {sorted(unknown)}; known keys: {sorted(_TOP_KEYS)}")

    experiment = doc.get("experiment")
    if experiment not in EXPERIMENTS:
        _fail("$.experiment", f"expected one of {list(EXPERIMENTS)}, got {experiment!r}")

    merged = {**DEFAULTS, **doc}
    sigma2_scale = _want_number(merged["sigma2_scale"], "$.sigma2_scale", positive=True)
    eps0 = _want_number(merged["eps0"], "$.eps0", positive=True)
    replicates = _want_int(merged["replicates"], "$.replicates", positive=True)
    master_seed = _want_int(merged["master_seed"], "$.master_seed")
    budget = _want_number(merged["mc_budget_guard"], "$.mc_budget_guard", positive=True)
    threads = _want_int(merged["threads"], "$.threads", positive=True)
    mixing_eps = _want_number(merged["mixing_eps"], "$.mixing_eps", positive=True)
    mixing_delta = _want_number(merged["mixing_delta"], "$.mixing_delta", positive=True)
    if not mixing_eps < 1:
        _fail("$.mixing_eps", f"expected a value in (0, 1), got {mixing_eps!r}")
    if not mixing_delta < 1:
        _fail("$.mixing_delta", f"expected a value in (0, 1), got {mixing_delta!r}")
    steps_per_unit = merged["steps_per_unit"]
    if steps_per_unit is not None:
        steps_per_unit = _want_int(steps_per_unit, "$.steps_per_unit", positive=True)
    dump_samples = merged["dump_samples"]
    if not isinstance(dump_samples, bool):
        _fail("$.dump_samples", f"expected a boolean, got {dump_samples!r}")
    output_dir = merged["output_dir"]
    if not isinstance(output_dir, str) or not output_dir:
        _fail("$.output_dir", f"expected a nonempty string, got {output_dir!r}")

    spec = _parse_spec(merged["spec"], "$.spec")
    grid = _parse_grid(merged["grid"], "$.grid", sigma2_scale, eps0)
    if not grid:
        _fail("$.grid", "expanded grid is empty")

    total_steps = replicates * sum(p.n for p in grid)
    if total_steps > budget:
        _fail(
            "$.mc_budget_guard",
            f"budget exceeded: replicates * sum(n) = {total_steps:g} > {budget:g}",
        )

    return ExperimentConfig(
        experiment=experiment,
        grid=grid,
        spec=spec,
        replicates=replicates,
        master_seed=master_seed,
        output_dir=output_dir,
        mc_budget_guard=budget,
        steps_per_unit=steps_per_unit,
        mixing_eps=mixing_eps,
        mixing_delta=mixing_delta,
        dump_samples=dump_samples,
        threads=threads,
        raw=doc,
    )
