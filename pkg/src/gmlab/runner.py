"""Experiment execution: grid dispatch, deterministic seeding, CSV/JSON output.

Each grid tuple gets an independent substream family derived from
(master_seed, tuple index in canonical order), so results do not depend on
the execution schedule and rerunning a config reproduces results.csv byte for
byte.  Wall-clock times go to the manifest only, never into the CSV.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

import gmlab
from gmlab import rng
from gmlab.config import ExperimentConfig
from gmlab.distances import ks_two_sample, ks_vs_std_normal, loglog_slope
from gmlab.functionals import (
    chaos_weights,
    contraction_diagnostic,
    corr_power_sum,
    corr_power_sum_asymptotic,
    functional_variance,
    initial_state_decomposition,
    sample_functional,
    sqrt_decay_sum_bound,
)
from gmlab.gauss_markov import (
    ProcessParams,
    ar_coefficient,
    bulk_radius,
    mixing_bounds,
    mixing_time,
    tv_from_start,
)
from gmlab.hermite import hermite_eval, multiplication_expand
from gmlab.limits import (
    simulate_degenerate,
    simulate_tempered_mixture,
    tempered_hermite_cov,
    tempered_norm_constant,
)

CSV_COLUMNS = ("experiment", "beta", "gamma", "n", "regime", "spec", "metric", "value", "stderr", "detail", "seed")
SCHEMA_VERSION = 1

# sentinel parameter values for rows aggregated over the grid (slope fits)
# and for grid-independent identity rows
AGGREGATE_N = 0


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    beta: float
    gamma: float
    n: int
    regime: str
    spec: str
    metric: str
    value: float
    stderr: float | None = None
    detail: str = ""
    seed: int = 0

    def key(self) -> tuple:
        return (self.experiment, self.beta, self.gamma, self.n, self.regime, self.spec, self.metric)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def _write_csv(path: Path, rows: list[ResultRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)  # RFC 4180: CRLF line endings, minimal quoting
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.experiment,
                    _fmt(row.beta),
                    _fmt(row.gamma),
                    _fmt(row.n),
                    row.regime,
                    row.spec,
                    row.metric,
                    _fmt(row.value),
                    _fmt(row.stderr),
                    row.detail,
                    _fmt(row.seed),
                ]
            )


def _variance_se(values: np.ndarray) -> float:
    m2 = values.var(ddof=1)
    m4 = float(np.mean((values - values.mean()) ** 4))
    return math.sqrt(max(m4 - m2 * m2, 0.0) / values.size)


def _degenerate_cap_weights(params: ProcessParams, spec) -> list[tuple[int, float]]:
    clone = dataclasses.replace(params, beta=2.0)
    return sorted(chaos_weights(clone, spec).limit_values.items())


def _tempered_cap_weights(params: ProcessParams, spec) -> list[tuple[int, float]]:
    clone = dataclasses.replace(params, beta=1.0)
    return sorted(chaos_weights(clone, spec).limit_values.items())


def _functional_sample_at_one(config: ExperimentConfig, params: ProcessParams, seed: int) -> np.ndarray:
    series = sample_functional(params, config.spec, [1.0], config.replicates, seed)
    return series.values[:, 0]


def _phase_transition_distances(
    config: ExperimentConfig, params: ProcessParams, seed: int
) -> tuple[dict[str, float], np.ndarray]:
    """KS of the standardized functional against the three candidate limits."""
    s_hat = _functional_sample_at_one(config, params, rng.derive_seed(seed, 1))
    spu = config.resolved_steps_per_unit(params.gamma)
    tempered = simulate_tempered_mixture(
        _tempered_cap_weights(params, config.spec),
        params.gamma,
        [1.0],
        spu,
        config.replicates,
        rng.derive_seed(seed, 2),
    ).values[:, 0]
    degenerate = simulate_degenerate(
        _degenerate_cap_weights(params, config.spec),
        [1.0],
        config.replicates,
        rng.derive_seed(seed, 3),
    ).values[:, 0]
    distances = {
        "ks_vs_normal": ks_vs_std_normal(s_hat).value,
        "ks_vs_tempered": ks_two_sample(s_hat, tempered).value,
        "ks_vs_degenerate": ks_two_sample(s_hat, degenerate).value,
    }
    return distances, s_hat


def _expected_candidate(beta: float) -> str:
    if beta < 1:
        return "ks_vs_normal"
    if beta == 1:
        return "ks_vs_tempered"
    return "ks_vs_degenerate"


def _single_order(config: ExperimentConfig) -> int:
    orders = sorted(config.spec.coeffs)
    if len(orders) != 1:
        raise ValueError(
            f"{config.experiment} requires a single-order spec, got orders {orders}"
        )
    return orders[0]


def _row_base(config: ExperimentConfig, params: ProcessParams) -> dict:
    return {
        "experiment": config.experiment,
        "beta": params.beta,
        "gamma": params.gamma,
        "n": params.n,
        "regime": params.regime.value,
        "spec": config.spec.label(),
    }


def _run_variance_validation(config, params, seed):
    rows, dumps = [], {}
    base = _row_base(config, params)
    s_hat = _functional_sample_at_one(config, params, seed)
    exact = functional_variance(params, config.spec, 1.0)
    raw = s_hat * math.sqrt(exact)
    emp = raw.var(ddof=1)
    se = _variance_se(raw)
    z = (emp - exact) / se if se > 0 else 0.0
    rows.append(ResultRow(**base, metric="var_exact", value=exact, seed=seed))
    rows.append(ResultRow(**base, metric="var_empirical", value=emp, stderr=se, seed=seed))
    rows.append(
        ResultRow(
            **base,
            metric="var_zscore",
            value=z,
            detail=f"pass={int(abs(z) <= 4)}",
            seed=seed,
        )
    )
    alpha = ar_coefficient(params)
    rel_errs = [
        abs(corr_power_sum_asymptotic(params, q, 1.0) / corr_power_sum(params.n, alpha, q) - 1.0)
        for q in (1, 2, 3)
    ]
    rows.append(
        ResultRow(**base, metric="corr_sum_max_rel_err_q123", value=max(rel_errs), seed=seed)
    )
    dumps["functional"] = raw
    return rows, dumps


def _run_phase_transition(config, params, seed):
    base = _row_base(config, params)
    distances, s_hat = _phase_transition_distances(config, params, seed)
    expected = _expected_candidate(params.beta)
    best = min(distances, key=distances.get)
    rows = [
        ResultRow(**base, metric=metric, value=value, seed=seed)
        for metric, value in sorted(distances.items())
    ]
    rows.append(
        ResultRow(
            **base,
            metric="best_candidate_is_expected",
            value=float(best == expected),
            detail=f"best={best};expected={expected}",
            seed=seed,
        )
    )
    return rows, {"functional": s_hat}


def _run_tv_decay_rates(config, params, seed):
    base = _row_base(config, params)
    distances, s_hat = _phase_transition_distances(config, params, seed)
    target = _expected_candidate(params.beta)
    rows = [
        ResultRow(
            **base,
            metric="ks_decay",
            value=distances[target],
            detail=f"target={target}",
            seed=seed,
        )
    ]
    return rows, {"functional": s_hat}


def _run_gamma_continuity(config, params, seed):
    base = _row_base(config, params)
    q = _single_order(config)
    spu = config.resolved_steps_per_unit(params.gamma)
    reps = config.replicates
    w_here = simulate_tempered_mixture(
        [(q, 1.0)], params.gamma, [1.0], spu, reps, rng.derive_seed(seed, 1)
    ).values[:, 0]
    w_near = simulate_tempered_mixture(
        [(q, 1.0)], params.gamma * 1.001, [1.0], spu, reps, rng.derive_seed(seed, 2)
    ).values[:, 0]
    degenerate = simulate_degenerate([(q, 1.0)], [1.0], reps, rng.derive_seed(seed, 3)).values[:, 0]
    rows = [
        ResultRow(**base, metric="ks_gamma_perturbed", value=ks_two_sample(w_here, w_near).value, seed=seed),
        ResultRow(**base, metric="ks_vs_normal", value=ks_vs_std_normal(w_here).value, seed=seed),
        ResultRow(**base, metric="ks_vs_degenerate", value=ks_two_sample(w_here, degenerate).value, seed=seed),
    ]
    return rows, {"tempered": w_here}


def _run_mixing_time_sweep(config, params, seed):
    base = _row_base(config, params)
    t_mix = mixing_time(params, config.mixing_eps, config.mixing_delta)
    k = bulk_radius(params, config.mixing_delta)
    lower_ok = True
    fitted_c = 0.0
    horizon = max(4, int(5 * params.n**params.beta / params.gamma))
    js = sorted(set(np.unique(np.geomspace(1, horizon, 40).astype(int))))
    for j in js:
        for x in (0.0, k):
            lower, shape = mixing_bounds(params, x, j)
            exact = tv_from_start(params, x, j)
            if exact < lower - 1e-12:
                lower_ok = False
            if shape > 1e-13:
                fitted_c = max(fitted_c, exact / shape)
    rows = [
        ResultRow(
            **base,
            metric="t_mix",
            value=float(t_mix),
            detail=f"eps={config.mixing_eps:g};delta={config.mixing_delta:g}",
            seed=seed,
        ),
        ResultRow(**base, metric="sandwich_lower_ok", value=float(lower_ok), seed=seed),
        ResultRow(**base, metric="sandwich_fitted_C", value=fitted_c, seed=seed),
    ]
    return rows, {}


def _run_covariance_check(config, params, seed):
    base = _row_base(config, params)
    q = _single_order(config)
    spu = config.resolved_steps_per_unit(params.gamma)
    grid = [0.2, 0.4, 0.6, 0.8, 1.0]
    sample = simulate_tempered_mixture([(q, 1.0)], params.gamma, grid, spu, config.replicates, seed)
    max_dev = 0.0
    max_ratio = 0.0
    for i, s in enumerate(grid):
        for j, t in enumerate(grid[i:], start=i):
            u = sample.values[:, i] - sample.values[:, i].mean()
            v = sample.values[:, j] - sample.values[:, j].mean()
            prod = u * v
            emp = float(prod.mean())
            se = float(prod.std(ddof=1)) / math.sqrt(prod.size)
            tol = 4 * se + 10.0 / spu
            dev = abs(emp - tempered_hermite_cov(q, params.gamma, s, t))
            max_dev = max(max_dev, dev)
            max_ratio = max(max_ratio, dev / tol)
    rows = [
        ResultRow(**base, metric="cov_max_abs_dev", value=max_dev, detail=f"steps_per_unit={spu}", seed=seed),
        ResultRow(
            **base,
            metric="cov_max_tol_ratio",
            value=max_ratio,
            detail=f"pass={int(max_ratio <= 1.0)}",
            seed=seed,
        ),
    ]
    return rows, {"tempered_t1": sample.values[:, -1]}


def _identity_rows(config: ExperimentConfig, seed: int) -> list[ResultRow]:
    """Deterministic exact-identity battery; grid-independent."""
    base = {
        "experiment": config.experiment,
        "beta": 0.0,
        "gamma": 0.0,
        "n": AGGREGATE_N,
        "regime": "none",
        "spec": config.spec.label(),
    }
    rows = []

    from numpy.polynomial.hermite_e import hermegauss

    nodes, weights = hermegauss(60)
    weights = weights / math.sqrt(2 * math.pi)
    err = 0.0
    for a in range(9):
        ha = hermite_eval(a, nodes)
        for b in range(9):
            value = math.fsum(weights * ha * hermite_eval(b, nodes))
            expected = math.factorial(a) if a == b else 0.0
            err = max(err, abs(value - expected))
    rows.append(ResultRow(**base, metric="orthogonality_max_abs_err", value=err, detail="tol=1e-9", seed=seed))

    stream = rng.substream(seed, 0)
    zs = stream.standard_normal(100) * 1.5
    err = 0.0
    for q in range(1, 7):
        for v in (0.25, 1.0, 4.0):
            lhs = hermite_eval(q, math.sqrt(v) * zs)
            rhs = np.zeros_like(zs)
            for order, coeff in multiplication_expand(q, v):
                rhs += coeff * hermite_eval(order, zs)
            err = max(err, float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs)))))
    rows.append(ResultRow(**base, metric="multiplication_identity_max_err", value=err, detail="tol=1e-9", seed=seed))

    stream = rng.substream(seed, 1)
    err = 0.0
    for _ in range(100):
        q = int(stream.integers(1, 6))
        i = int(stream.integers(1, 30))
        alpha = float(stream.uniform(0.5, 0.99))
        z0 = float(stream.standard_normal())
        eps = stream.standard_normal(i)
        lhs, rhs = initial_state_decomposition(z0, eps, alpha, q, i)
        err = max(err, abs(lhs - rhs) / max(1.0, abs(lhs)))
    rows.append(ResultRow(**base, metric="initial_state_identity_max_err", value=err, detail="tol=1e-9", seed=seed))

    err = max(
        abs(tempered_hermite_cov(q, gamma, 1.0, 1.0) - 1.0)
        for q in (1, 2, 3, 4)
        for gamma in (0.25, 0.5, 1.0, 4.0)
    )
    rows.append(ResultRow(**base, metric="tempered_cov_unit_time_max_err", value=err, detail="tol=1e-9", seed=seed))

    rows.append(
        ResultRow(
            **base,
            metric="norm_constant_q1_gamma1_err",
            value=abs(tempered_norm_constant(1, 1.0) - math.sqrt(math.e)),
            detail="tol=1e-12",
            seed=seed,
        )
    )

    violations = 0
    points = 0
    for n in (10, 30, 100, 300, 1000):
        for beta in (0.25, 0.5, 1.0, 2.0):
            for gamma in (0.1, 0.5, 0.9):
                lhs, rhs = sqrt_decay_sum_bound(n, beta, gamma)
                points += 1
                if lhs > rhs:
                    violations += 1
    rows.append(
        ResultRow(
            **base,
            metric="sqrt_sum_bound_violations",
            value=float(violations),
            detail=f"points={points}",
            seed=seed,
        )
    )

    edge_ok = True
    convex_ok = True
    for n in (10, 35, 60):
        for alpha in (0.5, 0.9):
            for q in (3, 4, 5):
                vals = [contraction_diagnostic(n, alpha, q, r) for r in range(1, q)]
                if max(vals) > vals[0] * (1 + 1e-12):
                    edge_ok = False
                if abs(vals[0] - vals[-1]) > 1e-9 * vals[0]:
                    edge_ok = False
                for mid in range(1, len(vals) - 1):
                    if vals[mid] ** 2 > vals[mid - 1] * vals[mid + 1] * (1 + 1e-12):
                        convex_ok = False
    rows.append(ResultRow(**base, metric="contraction_edge_maximality_ok", value=float(edge_ok), seed=seed))
    rows.append(ResultRow(**base, metric="contraction_log_convexity_ok", value=float(convex_ok), seed=seed))
    return rows


_PER_TUPLE = {
    "VarianceValidation": _run_variance_validation,
    "PhaseTransition": _run_phase_transition,
    "TVDecayRates": _run_tv_decay_rates,
    "GammaContinuity": _run_gamma_continuity,
    "MixingTimeSweep": _run_mixing_time_sweep,
    "CovarianceCheck": _run_covariance_check,
}


def _decay_reference(beta: float, q: int) -> float:
    if beta < 1:
        return -(1.0 - beta) / 2.0
    if beta == 1:
        return -1.0 / (9.0 * q)
    return (1.0 - beta) / (4.0 * q)


def _aggregate_rows(config: ExperimentConfig, rows: list[ResultRow]) -> list[ResultRow]:
    """Sweep-level slope fits, keyed with the sentinel n = 0."""
    out = []
    if config.experiment not in ("TVDecayRates", "MixingTimeSweep"):
        return out
    metric = "ks_decay" if config.experiment == "TVDecayRates" else "t_mix"
    groups: dict[tuple, list[tuple[int, float]]] = {}
    for row in rows:
        if row.metric != metric:
            continue
        groups.setdefault((row.beta, row.gamma, row.regime, row.spec), []).append((row.n, row.value))
    for (beta, gamma, regime, spec), pairs in sorted(groups.items()):
        if len(pairs) < 3 or any(v <= 0 for _, v in pairs):
            continue
        slope, _, r2 = loglog_slope(sorted(pairs))
        if config.experiment == "TVDecayRates":
            reference = _decay_reference(beta, config.spec.p)
            detail = f"reference={reference:.6g};points={len(pairs)}"
        else:
            detail = f"reference={beta:.6g};points={len(pairs)}"
        out.append(
            ResultRow(
                experiment=config.experiment,
                beta=beta,
                gamma=gamma,
                n=AGGREGATE_N,
                regime=regime,
                spec=spec,
                metric="fit_slope",
                value=slope,
                detail=detail,
                seed=config.master_seed,
            )
        )
        out.append(
            ResultRow(
                experiment=config.experiment,
                beta=beta,
                gamma=gamma,
                n=AGGREGATE_N,
                regime=regime,
                spec=spec,
                metric="fit_r2",
                value=r2,
                seed=config.master_seed,
            )
        )
    return out


def _tuple_label(params: ProcessParams) -> str:
    return f"beta={params.beta:g},gamma={params.gamma:g},n={params.n},regime={params.regime.value}"


def run(config: ExperimentConfig) -> list[ResultRow]:
    """Execute the experiment, write results.csv and manifest.json, return the rows."""
    started = datetime.now(timezone.utc)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    wall: dict[str, float] = {}
    all_rows: list[ResultRow] = []
    dumps: dict[str, np.ndarray] = {}

    if config.experiment == "IdentitySuite":
        t0 = time.perf_counter()
        all_rows.extend(_identity_rows(config, rng.derive_seed(config.master_seed, 0)))
        wall["identity_battery"] = time.perf_counter() - t0
    else:
        runner = _PER_TUPLE[config.experiment]

        def work(item):
            index, params = item
            seed = rng.derive_seed(config.master_seed, index)
            t0 = time.perf_counter()
            rows, tuple_dumps = runner(config, params, seed)
            elapsed = time.perf_counter() - t0
            return params, rows, tuple_dumps, elapsed

        items = list(enumerate(config.grid))
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                results = list(pool.map(work, items))
        else:
            results = [work(item) for item in items]
        for params, rows, tuple_dumps, elapsed in results:
            all_rows.extend(rows)
            wall[_tuple_label(params)] = elapsed
            for name, arr in tuple_dumps.items():
                dumps[f"{_tuple_label(params)}__{name}"] = arr

    all_rows.extend(_aggregate_rows(config, all_rows))
    all_rows.sort(key=lambda r: r.key())
    keys = [r.key() for r in all_rows]
    if len(keys) != len(set(keys)):
        seen, duplicated = set(), set()
        for key in keys:
            if key in seen:
                duplicated.add(key)
            seen.add(key)
        raise RuntimeError(f"duplicate result rows for keys: {sorted(duplicated)}")

    _write_csv(out_dir / "results.csv", all_rows)
    if config.dump_samples:
        samples_dir = out_dir / "samples"
        samples_dir.mkdir(exist_ok=True)
        for name, arr in sorted(dumps.items()):
            safe = name.replace(",", "_").replace("=", "-")
            np.savetxt(samples_dir / f"{safe}.csv", arr, fmt="%.12g", delimiter=",")

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "gmlab_version": gmlab.__version__,
        "experiment": config.experiment,
        "config": config.raw,
        "master_seed": config.master_seed,
        "started_utc": started.isoformat(),
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "wall_time_s": {k: round(v, 6) for k, v in sorted(wall.items())},
        "result_rows": len(all_rows),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return all_rows
