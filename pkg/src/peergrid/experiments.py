"""Seeded Monte Carlo studies: pricing schemes, treatment selection, network mismatch.

Trial ``t`` of a study draws from its own generator built from
``SeedSequence([seed, t])`` on the Philox counter-based bit generator, so
results do not depend on how trials are spread over worker processes.
Aggregates are plain means taken in trial order.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, linalg
from .equilibrium import entity_profit, nash_closed_form
from .errors import AssumptionViolated, ConfigInvalid, UndefinedMetric
from .fileio import atomic_write, parse_key_values, render_key_values, write_csv
from .model import ModelInstance, UserPopulation, build_topology, subnetwork, validate_assumption_1
from .pricing import (
    DistributionSpec,
    baseline_expected_consumption,
    baseline_price_no_peer,
    expected_profit_no_peer,
    incomplete_price_lower_bound,
    ppd_consumption,
    ppd_prices,
    uniform_price_complete,
)
from .selection import exact_selection_sweep, heuristic_selection, performance_metric

log = logging.getLogger(__name__)

STUDIES = ("pricing", "selection", "mismatch")
DEFAULT_GAMMA_GRID = tuple(round(0.05 * k, 2) for k in range(15))
MAX_RESAMPLES = 1000

PRICING_COLUMNS = (
    "gamma",
    "profit_ppd", "profit_uniform", "profit_incomplete",
    "price_uniform", "price_incomplete",
    "mean_x_ppd", "mean_x_uniform", "mean_x_incomplete",
    "max_x_ppd", "max_x_uniform", "max_x_incomplete",
)
SELECTION_COLUMNS = (
    "m", "mean_profit_exact", "mean_profit_heuristic", "expected_profit_m0",
    "pct_optimal", "S_m", "mean_max_x_exact", "mean_max_x_heuristic",
)
MISMATCH_COLUMNS = ("correct_count", "mean_norm_gap", "mean_bound")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))


# -- configuration -------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    study: str = "pricing"
    topology: str = "fully_connected"
    n: int = 10
    iterations: int = 10_000
    seed: int = 20240101
    dist: DistributionSpec = DistributionSpec(8.0, 12.0, 0.75, 1.25)
    c_scalar: float = 2.0
    gamma_grid: tuple[float, ...] = DEFAULT_GAMMA_GRID
    m_range: tuple[int, ...] = tuple(range(11))
    output_path: str = "results/pricing.csv"
    price: float | None = None
    subnet_size: int = 12
    samples_per_stratum: int = 2000
    exhaustive: bool = False
    cap: int = 10**7
    gamma_grid_source: str = field(default="default", compare=False)

    def __post_init__(self):
        self.validate()

    @classmethod
    def defaults(cls, study: str) -> "ExperimentConfig":
        if study == "pricing":
            return cls()
        if study == "selection":
            return cls(study="selection", topology="ring", gamma_grid=(0.05,), output_path="results/selection.csv")
        if study == "mismatch":
            return cls(
                study="mismatch", topology="custom", n=24, gamma_grid=(0.05,), m_range=(), output_path="results/mismatch.csv"
            )
        raise ConfigInvalid("study", f"unknown study {study!r}; expected one of {', '.join(STUDIES)}")

    def validate(self) -> None:
        if self.study not in STUDIES:
            raise ConfigInvalid("study", f"unknown study {self.study!r}")
        if self.iterations < 1:
            raise ConfigInvalid("iterations", "must be at least 1")
        if not self.gamma_grid:
            raise ConfigInvalid("gamma_grid", "must not be empty")
        if any(g < 0 for g in self.gamma_grid):
            raise ConfigInvalid("gamma_grid", "sensitivities must be non-negative")
        if max(self.gamma_grid) >= self.dist.b_low:
            raise ConfigInvalid("gamma_grid", f"every gamma must be below b_low = {self.dist.b_low}")
        if self.c_scalar < 0:
            raise ConfigInvalid("c", "must be non-negative")
        if self.study == "pricing":
            if self.topology not in ("fully_connected", "ring"):
                raise ConfigInvalid("topology", "the incomplete-information case needs a symmetric topology")
            self._check_size()
        elif self.study == "selection":
            self._check_size()
            if len(self.gamma_grid) != 1:
                raise ConfigInvalid("gamma_grid", "the selection study takes a single gamma")
            if not self.m_range or min(self.m_range) < 0 or max(self.m_range) > self.n:
                raise ConfigInvalid("m_range", f"must lie within [0, {self.n}]")
            if self.price is not None and self.price >= self.dist.a_low:
                raise ConfigInvalid("price", f"must be below a_low = {self.dist.a_low}")
        else:
            if len(self.gamma_grid) != 1:
                raise ConfigInvalid("gamma_grid", "the mismatch study takes a single gamma")
            if not 2 <= self.subnet_size <= self.n:
                raise ConfigInvalid("subnet_size", f"must lie in [2, n={self.n}]")
            if self.samples_per_stratum < 1:
                raise ConfigInvalid("samples_per_stratum", "must be at least 1")

    def _check_size(self) -> None:
        minimum = {"fully_connected": 2, "star": 3, "ring": 3}
        if self.topology not in minimum:
            raise ConfigInvalid("topology", f"unknown topology {self.topology!r}")
        if self.n < minimum[self.topology]:
            raise ConfigInvalid("n", f"{self.topology} needs n >= {minimum[self.topology]}")

    @property
    def gamma(self) -> float:
        return self.gamma_grid[0]

    def to_pairs(self) -> dict[str, str]:
        d = self.dist
        pairs = {
            "study": self.study, "topology": self.topology, "n": self.n, "iterations": self.iterations,
            "seed": self.seed, "a_low": d.a_low, "a_high": d.a_high, "b_low": d.b_low, "b_high": d.b_high,
            "c": self.c_scalar, "gamma_grid": ",".join(f"{g:.12g}" for g in self.gamma_grid),
            "gamma_grid_source": self.gamma_grid_source,
            "m_range": ",".join(str(m) for m in self.m_range), "output_path": self.output_path,
            "price": "" if self.price is None else f"{self.price:.12g}",
            "subnet_size": self.subnet_size, "samples_per_stratum": self.samples_per_stratum,
            "exhaustive": int(self.exhaustive), "cap": self.cap,
        }
        return {k: (f"{v:.12g}" if isinstance(v, float) else str(v)) for k, v in pairs.items()}


def _parse_int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    if text.count(":") == 2:
        # start:stop:step, inclusive of stop
        start, stop, step = (float(v) for v in text.split(":"))
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + k * step, 12) for k in range(count))
    return tuple(float(v) for v in text.split(",") if v.strip())


_SCALARS = {
    "topology": str, "n": int, "iterations": int, "seed": int, "output_path": str,
    "subnet_size": int, "samples_per_stratum": int, "cap": int,
}
_DIST_KEYS = ("a_low", "a_high", "b_low", "b_high")


def config_from_pairs(pairs: dict[str, str], study: str | None = None) -> ExperimentConfig:
    """Build a validated config from ``key = value`` pairs over the study defaults."""
    study = pairs.get("study", study)
    if study is None:
        raise ConfigInvalid("study", "no study given")
    base = ExperimentConfig.defaults(study)
    updates: dict = {}
    dist = {k: getattr(base.dist, k) for k in _DIST_KEYS}
    for key, raw in pairs.items():
        try:
            if key == "study":
                continue
            if key in _SCALARS:
                updates[key] = _SCALARS[key](raw.strip())
            elif key in _DIST_KEYS:
                dist[key] = float(raw)
            elif key == "c":
                updates["c_scalar"] = float(raw)
            elif key == "gamma_grid":
                updates["gamma_grid"] = _parse_float_list(raw)
                updates["gamma_grid_source"] = "config"
            elif key == "m_range":
                updates["m_range"] = _parse_int_list(raw)
            elif key == "price":
                updates["price"] = float(raw) if raw.strip() else None
            elif key == "exhaustive":
                if raw.strip().lower() not in ("0", "1", "true", "false", "yes", "no"):
                    raise ValueError(f"not a boolean: {raw!r}")
                updates["exhaustive"] = raw.strip().lower() in ("1", "true", "yes")
            else:
                raise ConfigInvalid(key, "unknown key")
        except ValueError as exc:
            raise ConfigInvalid(key, str(exc)) from exc
    try:
        updates["dist"] = DistributionSpec(**dist)
    except ValueError as exc:
        raise ConfigInvalid("a_low" if "a_" in str(exc) else "b_low", str(exc)) from exc
    if study == "selection" and "m_range" not in updates:
        updates["m_range"] = tuple(range(updates.get("n", base.n) + 1))
    fields_ = {f.name: getattr(base, f.name) for f in fields(base)}
    fields_.update(updates, study=study)
    return ExperimentConfig(**fields_)


def load_config(path, study: str | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid("config", str(exc)) from exc
    try:
        pairs = parse_key_values(text)
    except Exception as exc:  # configparser raises several unrelated types
        raise ConfigInvalid("config", f"cannot parse {path}: {exc}") from exc
    if study is not None and pairs.get("study", study) != study:
        raise ConfigInvalid("study", f"config is for {pairs['study']!r}, not {study!r}")
    return config_from_pairs(pairs, study)


# -- trials ----------------------------------------------------------------------------

@dataclass
class TrialRecord:
    trial_index: int
    gamma: float | tuple[float, ...]
    values: dict[str, np.ndarray]
    rejections: int = 0


def sample_population(rng: np.random.Generator, spec: DistributionSpec, n: int, gamma=0.0) -> UserPopulation:
    a = rng.uniform(spec.a_low, spec.a_high, n)
    b = rng.uniform(spec.b_low, spec.b_high, n)
    return UserPopulation(a, b, gamma)


def _mapped(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _pricing_trial(task) -> TrialRecord:
    cfg, t, network, price_lb = task
    rng = trial_rng(cfg.seed, t)
    c = cfg.c_scalar
    for rejections in range(MAX_RESAMPLES):
        pop = sample_population(rng, cfg.dist, cfg.n)
        try:
            rows = []
            for g, p3 in zip(cfg.gamma_grid, price_lb):
                inst = ModelInstance.build(network, pop.a, pop.b, g, c)
                p1 = ppd_prices(inst)
                if not validate_assumption_1(inst, p1):
                    raise AssumptionViolated("discriminating price above intercept")
                x1 = ppd_consumption(inst)
                p2 = uniform_price_complete(inst)
                x2 = nash_closed_form(inst, p2)
                x3 = nash_closed_form(inst, p3)
                rows.append((
                    entity_profit(x1, p1, inst.c), entity_profit(x2, p2, inst.c), entity_profit(x3, p3, inst.c),
                    p2, p3, x1.mean(), x2.mean(), x3.mean(), x1.max(), x2.max(), x3.max(),
                ))
        except AssumptionViolated:
            continue
        return TrialRecord(t, cfg.gamma_grid, {"table": np.array(rows)}, rejections)
    raise RuntimeError(f"trial {t}: no valid draw after {MAX_RESAMPLES} attempts")


def run_pricing_comparison(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Mean profits, prices and consumption of the three pricing cases per gamma.

    Each trial draws one (a, b) population and evaluates it at every gamma.
    """
    if config.study != "pricing":
        raise ConfigInvalid("study", "expected a pricing config")
    network = build_topology(config.topology, config.n)
    if not network.is_symmetric():
        raise ConfigInvalid("topology", "the incomplete-information case needs a symmetric topology")
    price_lb = [incomplete_price_lower_bound(config.dist, network, g, config.c_scalar) for g in config.gamma_grid]
    records = _mapped(_pricing_trial, [(config, t, network, price_lb) for t in range(config.iterations)], workers)
    _log_rejections(records)
    mean = np.mean([r.values["table"] for r in records], axis=0)
    return [dict(zip(PRICING_COLUMNS, (g, *row))) for g, row in zip(config.gamma_grid, mean)]


def selection_price(config: ExperimentConfig) -> float:
    return baseline_price_no_peer(config.dist, config.c_scalar) if config.price is None else config.price


def _selection_trial(task) -> TrialRecord:
    cfg, t, network = task
    rng = trial_rng(cfg.seed, t)
    p = selection_price(cfg)
    ex = baseline_expected_consumption(cfg.dist, cfg.c_scalar)
    for rejections in range(MAX_RESAMPLES):
        pop = sample_population(rng, cfg.dist, cfg.n)
        inst = ModelInstance.build(network, pop.a, pop.b, cfg.gamma, cfg.c_scalar)
        if validate_assumption_1(inst, p):
            break
    else:
        raise RuntimeError(f"trial {t}: no valid draw after {MAX_RESAMPLES} attempts")
    exact = exact_selection_sweep(inst, p, cfg.m_range, cap=cfg.cap)
    heur = [heuristic_selection(inst, p, m, ex) for m in cfg.m_range]
    s_raw = []
    for e, h in zip(exact, heur):
        try:
            s_raw.append(performance_metric(h.profit, e.profit, e.baseline_profit))
        except UndefinedMetric:
            s_raw.append(np.nan)
    values = {
        "exact": np.array([o.profit for o in exact]),
        "heuristic": np.array([o.profit for o in heur]),
        "match": np.array([e.assignment == h.assignment for e, h in zip(exact, heur)], dtype=float),
        "max_x_exact": np.array([o.consumption.max() for o in exact]),
        "max_x_heuristic": np.array([o.consumption.max() for o in heur]),
        "baseline": np.array(exact[0].baseline_profit),
        "S_m_trial": np.array(s_raw),
    }
    return TrialRecord(t, cfg.gamma, values, rejections)


def run_selection_study(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Exact versus heuristic treatment of m users at the no-peer optimal price.

    S_m is computed from mean profits across trials; per-trial values are
    kept on the records but not reported here.
    """
    if config.study != "selection":
        raise ConfigInvalid("study", "expected a selection config")
    network = build_topology(config.topology, config.n)
    records = _mapped(_selection_trial, [(config, t, network) for t in range(config.iterations)], workers)
    _log_rejections(records)

    def mean(key):
        return np.mean([r.values[key] for r in records], axis=0)

    exact, heur, match = mean("exact"), mean("heuristic"), mean("match")
    base = float(mean("baseline"))
    mx_e, mx_h = mean("max_x_exact"), mean("max_x_heuristic")
    expected_m0 = expected_profit_no_peer(config.dist, selection_price(config), config.c_scalar, config.n)
    rows = []
    for k, m in enumerate(config.m_range):
        try:
            s = performance_metric(heur[k], exact[k], base)
        except UndefinedMetric:
            s = None
        rows.append(dict(zip(SELECTION_COLUMNS, (m, exact[k], heur[k], expected_m0, 100.0 * match[k], s, mx_e[k], mx_h[k]))))
    return rows


def _stratum_subsets(rng, truth: np.ndarray, others: np.ndarray, size: int, k: int, count: int) -> np.ndarray:
    """Estimated member sets sharing exactly k users with the true clique."""
    total = math.comb(len(truth), k) * math.comb(len(others), size - k)
    if total == 0:
        return np.empty((0, size), dtype=int)
    if total <= count:
        return np.array(
            [sorted(hit + miss) for hit in itertools.combinations(truth, k) for miss in itertools.combinations(others, size - k)],
            dtype=int,
        )
    out = np.empty((count, size), dtype=int)
    for s in range(count):
        hit = rng.choice(truth, k, replace=False)
        miss = rng.choice(others, size - k, replace=False)
        out[s] = np.sort(np.concatenate([hit, miss]))
    return out


def _clique_stack(n: int, subsets: np.ndarray) -> np.ndarray:
    member = np.zeros((len(subsets), n))
    np.put_along_axis(member, subsets, 1.0, axis=1)
    size = subsets.shape[1]
    W = member[:, :, None] * member[:, None, :] / (size - 1)
    idx = np.arange(n)
    W[:, idx, idx] = 0.0
    return W


def mismatch_instance(config: ExperimentConfig) -> tuple[ModelInstance, np.ndarray]:
    """The seeded ground truth: a random clique inside n users, plus a population."""
    rng = trial_rng(config.seed, 0)
    truth = np.sort(rng.choice(config.n, config.subnet_size, replace=False))
    pop = sample_population(rng, config.dist, config.n)
    inst = ModelInstance.build(subnetwork(config.n, truth), pop.a, pop.b, config.gamma, config.c_scalar)
    return inst, truth


def _mismatch_stratum(task):
    config, k, lam_min, lam_max, W, truth = task
    n, size, g = config.n, config.subnet_size, config.gamma
    others = np.setdiff1d(np.arange(n), truth)
    rng = trial_rng(config.seed, 1 + k)
    count = math.comb(size, k) * math.comb(n - size, size - k) if config.exhaustive else config.samples_per_stratum
    subsets = _stratum_subsets(rng, truth, others, size, k, count)
    gaps = np.empty(len(subsets))
    for start in range(0, len(subsets), 2048):
        diff = W[None] - _clique_stack(n, subsets[start : start + 2048])
        gaps[start : start + 2048] = np.abs(np.linalg.eigvalsh(diff)).max(axis=1)
    bounds = lam_min / (lam_max + g * gaps)
    return k, len(subsets), gaps, bounds


def run_mismatch_study(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Norm gap and profit bound averaged by the number of correctly placed clique members."""
    if config.study != "mismatch":
        raise ConfigInvalid("study", "expected a mismatch config")
    inst, truth = mismatch_instance(config)
    lam = linalg.sym_eigenvalues(np.diag(inst.c) + inst.system_matrix)
    size = config.subnet_size
    lowest = max(0, 2 * size - config.n)
    tasks = [(config, k, lam[0], lam[-1], np.asarray(inst.W), truth) for k in range(lowest, size + 1)]
    rows = []
    for k, count, gaps, bounds in _mapped(_mismatch_stratum, tasks, workers):
        log.info("mismatch stratum k=%d: %d subsets", k, count)
        rows.append(dict(zip(MISMATCH_COLUMNS, (k, float(gaps.mean()), float(bounds.mean())))))
    return rows


def _log_rejections(records) -> None:
    total = sum(r.rejections for r in records)
    log.info("rejected and resampled %d draws over %d trials", total, len(records))


# -- study driver ------------------------------------------------------------------------

RUNNERS = {
    "pricing": (run_pricing_comparison, PRICING_COLUMNS),
    "selection": (run_selection_study, SELECTION_COLUMNS),
    "mismatch": (run_mismatch_study, MISMATCH_COLUMNS),
}


def resolve_workers(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("PEERGRID_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


def write_manifest(output_path, command: str, pairs: dict, seed, duration: float) -> Path:
    path = Path(f"{output_path}.manifest")
    body = {"command": command, "version": __version__, "seed": seed, **pairs, "duration_s": f"{duration:.3f}"}
    atomic_write(path, render_key_values(body))
    return path


def run_study(config: ExperimentConfig, workers: int = 1, output_path=None) -> tuple[list[dict], Path]:
    """Run a study, write its CSV and manifest, and return the rows."""
    runner, columns = RUNNERS[config.study]
    out = Path(output_path or config.output_path)
    if output_path is not None:
        config = replace(config, output_path=str(out))
    t0 = time.perf_counter()
    rows = runner(config, workers)
    write_csv(out, columns, rows)
    write_manifest(out, f"experiment --study {config.study}", config.to_pairs(), config.seed, time.perf_counter() - t0)
    return rows, out
