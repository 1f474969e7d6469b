"""Experiment configs, result rows and the drivers behind the CLI subcommands."""

from __future__ import annotations

import csv
import io
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import digamma

from . import workloads
from .adversary import eta_cover, sample_omega
from .errors import ConfigError
from .lemma_lab import (InversionInstance, check_bounded_geom, check_inversion_lemma,
                        inversions, inversions_quadratic)
from .opt import belady_cost, brute_force_opt, count_clean
from .policies import (MARKER_KINDS, Kind, PolicySpec, derive_seed, simulate,
                       verify_lemma_injection, verify_lemma_totalerror)
from .trace import NoiseModel, Trace, l1_error, noisy_predictions, read_trace

WORKLOAD_KINDS = ("file", "omega", "uniform_random", "zipf")


def harmonic_real(x: float) -> float:
    """H(x) = digamma(x + 1) + Euler gamma; agrees with the harmonic numbers on integers."""
    if x == 0:
        return 0.0
    return float(digamma(x + 1) + np.euler_gamma)


def lmarker_reference(eta_over_opt: float, k: int) -> float:
    return 4 + 2 * harmonic_real(min(2 * eta_over_opt, k))


def combiner_reference(eta_over_opt: float, k: int) -> float:
    x = eta_over_opt / k
    return 9 * min(4 + 7 * x + 3 * x * harmonic_real(k), 2 * harmonic_real(k))


def lower_bound_floor(k: int, t: int, n: int) -> float:
    return n * t / 2 * (harmonic_real(k) - harmonic_real(t))


# -- config ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Workload:
    kind: str
    path: str | None = None
    t: int | None = None
    n: int | None = None
    random_part_len: int | None = None
    universe_size: int | None = None
    length: int | None = None
    exponent: float | None = None

    def workload_id(self, seed: int) -> str:
        if self.kind == "file":
            return f"file_{Path(self.path).stem}"
        if self.kind == "omega":
            return f"omega_t{self.t}_n{self.n}_s{seed}"
        if self.kind == "uniform_random":
            return f"uniform_u{self.universe_size}_l{self.length}_s{seed}"
        return f"zipf_u{self.universe_size}_l{self.length}_a{self.exponent:g}_s{seed}"

    def build(self, k: int, seed: int) -> Trace:
        """Requests (and predictions, when the workload prescribes them) for one seed."""
        if self.kind == "file":
            return read_trace(self.path)
        if self.kind == "omega":
            return sample_omega(k, self.t, self.n, seed, self.random_part_len).trace
        if self.kind == "uniform_random":
            return Trace(workloads.uniform_random(self.universe_size, self.length, seed))
        return Trace(workloads.zipf(self.universe_size, self.length, self.exponent, seed))


@dataclass(frozen=True)
class ExperimentConfig:
    workload: Workload
    policies: tuple[PolicySpec, ...]
    k: int
    seeds: tuple[int, ...]
    noise: NoiseModel | None = None
    output_path: str | None = None
    noise_grid: tuple[NoiseModel, ...] = ()
    t_list: tuple[int, ...] = ()
    extra: dict = field(default_factory=dict, compare=False)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, list[tuple[int, str]]]:
    """Flat ``key = value`` lines; repeated keys accumulate; ``#`` starts a comment."""
    out: dict[str, list[tuple[int, str]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        out.setdefault(key, []).append((lineno, value))
    return out


def _parse_seeds(entries, source) -> list[int]:
    seeds = []
    for lineno, value in entries:
        for part in value.replace(",", " ").split():
            try:
                if ":" in part:
                    lo, hi = part.split(":")
                    seeds.extend(range(int(lo), int(hi)))
                else:
                    seeds.append(int(part))
            except ValueError:
                raise ConfigError(f"{source}:{lineno}: bad seed spec {part!r}") from None
    return seeds


def config_from_text(text: str, source: str = "<config>", seed_base: int = 0) -> ExperimentConfig:
    raw = parse_config_text(text, source)
    known = {"workload", "k", "t", "n", "random_part_len", "universe_size", "length",
             "exponent", "path", "policy", "noise", "seed", "seeds", "output", "trials"}
    for key, entries in raw.items():
        if key not in known:
            raise ConfigError(f"{source}:{entries[0][0]}: unknown key {key!r}")

    def one(key, conv, required=False, default=None):
        entries = raw.get(key)
        if not entries:
            if required:
                raise ConfigError(f"{source}: missing required key {key!r}")
            return default
        if len(entries) > 1 and key != "t":
            raise ConfigError(f"{source}:{entries[1][0]}: key {key!r} given twice")
        lineno, value = entries[0]
        try:
            return conv(value)
        except (ValueError, ArithmeticError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None

    kind = one("workload", str, default="omega")
    if kind not in WORKLOAD_KINDS:
        raise ConfigError(f"{source}:{raw['workload'][0][0]}: workload must be one of {WORKLOAD_KINDS}")
    k = one("k", int, required=True)
    if k < 1:
        raise ConfigError(f"{source}:{raw['k'][0][0]}: k must be >= 1")
    t_entries = raw.get("t", [])
    t_list = []
    for lineno, value in t_entries:
        if not value.isdigit():
            raise ConfigError(f"{source}:{lineno}: t must be a positive integer")
        t_list.append(int(value))
    t_list = tuple(t_list)
    workload = Workload(
        kind=kind,
        path=one("path", str, required=kind == "file"),
        t=t_list[0] if t_list else None,
        n=one("n", int, required=kind == "omega"),
        random_part_len=one("random_part_len", int),
        universe_size=one("universe_size", int, required=kind in ("zipf", "uniform_random")),
        length=one("length", int, required=kind in ("zipf", "uniform_random")),
        exponent=one("exponent", float, required=kind == "zipf"),
    )
    if kind == "omega":
        if not t_list:
            raise ConfigError(f"{source}: omega workload needs t")
        for lineno, value in t_entries:
            if not 1 <= int(value) <= k:
                raise ConfigError(f"{source}:{lineno}: t must lie in [1, k]")
    policies = []
    for lineno, value in raw.get("policy", []):
        try:
            policies.append(PolicySpec.parse(value))
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    if not policies:
        raise ConfigError(f"{source}: at least one policy is required")
    noise_grid = []
    for lineno, value in raw.get("noise", []):
        try:
            noise_grid.append(NoiseModel.parse(value))
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    seeds = _parse_seeds(raw.get("seed", []) + raw.get("seeds", []), source) or [0]
    return ExperimentConfig(
        workload=workload,
        policies=tuple(policies),
        k=k,
        seeds=tuple(s + seed_base for s in seeds),
        noise=noise_grid[0] if len(noise_grid) == 1 else None,
        output_path=one("output", str),
        noise_grid=tuple(noise_grid),
        t_list=t_list,
        extra={"trials": one("trials", int)},
    )


def load_config(path: str | Path, seed_base: int = 0) -> ExperimentConfig:
    path = Path(path)
    return config_from_text(path.read_text(encoding="utf-8"), str(path), seed_base)


# -- result rows ---------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    """One simulation; ``ratio`` is misses/opt_cost with no additive constant fitted."""

    workload_id: str
    policy: str
    seed: int
    k: int
    misses: int
    opt_cost: int
    ratio: float
    eta: int
    eta_over_opt: float
    clean_L: int
    chains_C: int
    sum_n_star: int
    runtime_ms: float


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_csv(rows: Sequence, out, timing: bool = False, extra_columns=()) -> str:
    """Write dataclass or dict rows; returns the CSV text. ``runtime_ms`` is kept
    only with ``timing`` because it would break byte-identical reruns."""
    if rows and not isinstance(rows[0], dict):
        rows = [asdict(r) for r in rows]
    header = list(rows[0].keys()) if rows else [f.name for f in fields(ResultRow)]
    header += [c for c in extra_columns if c not in header]
    if not timing and "runtime_ms" in header:
        header.remove("runtime_ms")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(col, "")) for col in header])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text


def _prepare(workload: Workload, k: int, seed: int, noise: NoiseModel | None) -> Trace:
    trace = workload.build(k, seed)
    if noise is not None:
        return trace.with_predictions(noisy_predictions(trace.requests, noise,
                                                        derive_seed(seed, "noise")))
    if trace.predictions is None:
        return Trace.perfect(trace.requests)
    return trace


def _run_cell(args) -> list[ResultRow]:
    workload, policies, k, seed, noise = args
    trace = _prepare(workload, k, seed, noise)
    opt = belady_cost(trace, k)
    eta = l1_error(trace).eta
    rows = []
    for spec in policies:
        start = time.perf_counter()
        rep = simulate(spec.with_seed(seed), trace, k)
        elapsed = (time.perf_counter() - start) * 1000
        rows.append(ResultRow(
            workload_id=workload.workload_id(seed), policy=spec.label, seed=seed, k=k,
            misses=rep.misses, opt_cost=opt, ratio=rep.misses / opt, eta=eta,
            eta_over_opt=eta / opt, clean_L=rep.clean_count_L, chains_C=rep.chain_count_C,
            sum_n_star=rep.sum_n_star, runtime_ms=round(elapsed, 3)))
    return rows


def _map(fn: Callable, jobs_args: list, jobs: int) -> list:
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, jobs_args))  # map preserves submission order


def run_experiment(config: ExperimentConfig, jobs: int = 1, noise: NoiseModel | None = None,
                   ) -> list[ResultRow]:
    """Simulate every (instance, policy, seed) cell; rows ordered by workload, policy, seed."""
    noise = noise if noise is not None else config.noise
    cells = [(config.workload, config.policies, config.k, seed, noise) for seed in config.seeds]
    per_seed = _map(_run_cell, cells, jobs)
    rows = []
    for p in range(len(config.policies)):
        rows.extend(cell_rows[p] for cell_rows in per_seed)
    return rows


def sweep_eta(config: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """One block of rows per noise level, with the upper-bound reference curves
    evaluated at each row's realized error ratio."""
    if not config.noise_grid:
        raise ConfigError("sweep needs at least one noise entry")
    out = []
    for noise in config.noise_grid:
        for row in run_experiment(config, jobs, noise=noise):
            d = asdict(row)
            d["noise"] = str(noise)
            d["lmarker_ref"] = lmarker_reference(row.eta_over_opt, config.k)
            d["combiner_ref"] = combiner_reference(row.eta_over_opt, config.k)
            out.append(d)
    return out


def lower_bound_experiment(k: int, t_list: Iterable[int], n: int, policies: Sequence[PolicySpec],
                           seeds: Sequence[int], random_part_len: int | None = None,
                           jobs: int = 1) -> list[dict]:
    """Mean misses per (t, policy) on sampled instances against the lower-bound floor."""
    out = []
    for t in t_list:
        if not 1 <= t <= k:
            raise ConfigError(f"t={t} outside [1, k={k}]")
        workload = Workload("omega", t=t, n=n, random_part_len=random_part_len)
        cfg = ExperimentConfig(workload, tuple(policies), k, tuple(seeds))
        rows = run_experiment(cfg, jobs)
        floor = lower_bound_floor(k, t, n)
        for spec in policies:
            mine = [r for r in rows if r.policy == spec.label]
            mean_misses = statistics.fmean(r.misses for r in mine)
            out.append({
                "k": k, "t": t, "n": n, "policy": spec.label, "seeds": len(mine),
                "mean_misses": mean_misses,
                "floor": floor,
                "mean_opt": statistics.fmean(r.opt_cost for r in mine),
                "mean_eta_over_opt": statistics.fmean(r.eta_over_opt for r in mine),
                "eta_over_opt_cover": eta_cover(k, 1) / t,
                "passed": mean_misses >= floor,
            })
    return out


def write_plot_data(path, series: dict[str, list[tuple[float, float]]]) -> None:
    """Two-column ``x y`` text, one ``# name`` block per series."""
    with open(path, "w", encoding="utf-8") as fh:
        for name, points in series.items():
            fh.write(f"# {name}\n")
            for x, y in points:
                fh.write(f"{x:.6f} {y:.6f}\n")
            fh.write("\n")


def scale_for_target(requests: Sequence[int], k: int, target: float, seed: int,
                     tol: float = 0.05) -> float:
    """Sigma of ``scaled`` noise whose realized eta/OPT lands within ``tol`` of ``target``."""
    trace = Trace(requests)
    opt = belady_cost(trace, k)
    y = np.asarray(trace.true_next)

    def ratio(sigma):
        preds = noisy_predictions(requests, NoiseModel("scaled", sigma), seed)
        return float(np.abs(np.asarray(preds) - y).sum()) / opt

    lo, hi = 0.0, 1.0
    while ratio(hi) < target:
        hi *= 2
    for _ in range(60):
        mid = (lo + hi) / 2
        r = ratio(mid)
        if abs(r - target) <= tol * target:
            return mid
        lo, hi = (mid, hi) if r < target else (lo, mid)
    return (lo + hi) / 2


# -- verification suite --------------------------------------------------------------


def verify_suite(seed: int = 0, scale: float = 1.0) -> list[dict]:
    """Run every checkable claim at a size scaled by ``scale``; one row per check."""
    rng = random.Random(seed)
    rows = []

    def add(check, params, observed, bound, passed):
        rows.append({"check": check, "params": params, "observed": observed,
                     "bound": bound, "passed": bool(passed)})

    # Belady against the exhaustive oracle
    count = max(10, int(2000 * scale))
    bad = 0
    for _ in range(count):
        k = rng.randint(1, 3)
        trace = Trace([rng.randrange(rng.randint(1, 5)) for _ in range(rng.randint(1, 12))])
        bad += belady_cost(trace, k) != brute_force_opt(trace, k)
    add("belady_equals_brute_force", f"instances={count}", bad, 0, bad == 0)

    # clean count brackets OPT
    bad = 0
    for i in range(count):
        k = rng.choice((2, 8, 32))
        u = rng.randint(k + 1, 4 * k)
        reqs = (workloads.zipf(u, 300, 0.8, seed + i) if i % 2
                else workloads.uniform_random(u, 300, seed + i))
        trace = Trace(reqs)
        opt, clean = belady_cost(trace, k), count_clean(trace, k)
        bad += not (clean <= 2 * opt and opt <= clean)
    add("clean_count_brackets_opt", f"traces={count}", bad, 0, bad == 0)

    # inversion lemma, exhaustive plus fuzz
    bad = 0
    for n in range(1, 5):
        m = tuple(range(1, n + 1))
        for a in np.ndindex(*(7,) * n):
            bad += not check_inversion_lemma(InversionInstance(m, tuple(a)))
    fuzz = max(10, int(10000 * scale))
    mismatch = 0
    for _ in range(fuzz):
        n = rng.randint(1, 60)
        m = tuple(sorted(rng.sample(range(-200, 400), n)))
        a = tuple(rng.randint(-250, 450) for _ in range(n))
        bad += not check_inversion_lemma(InversionInstance(m, a))
        mismatch += inversions(a) != inversions_quadratic(a)
    add("inversions_at_most_twice_cost", f"exhaustive_n<=4;fuzz={fuzz}", bad, 0, bad == 0)
    add("fast_inversions_match_quadratic", f"fuzz={fuzz}", mismatch, 0, mismatch == 0)

    # bounded geometric occupation times
    trials = max(1000, int(10000 * scale))
    for k in (8, 32, 128):
        for l in sorted({2, k // 2, k}):
            res = check_bounded_geom(k, l, trials, derive_seed(seed, f"geom{k}:{l}") % 2**32)
            add("bounded_geometric_mean", f"k={k};l={l};trials={trials}",
                len(res.violations), 0, not res.violations)

    # deterministic error lemmas on fuzzed executions
    runs = max(10, int(1000 * scale))
    bad_total = bad_inj = 0
    for i in range(runs):
        k = rng.choice((2, 4, 8, 16))
        u = rng.randint(k + 1, 4 * k)
        reqs = workloads.zipf(u, rng.randint(10, 400), rng.choice((0.0, 0.8, 1.2)), seed + i)
        noise = rng.choice((NoiseModel("additive_uniform", rng.choice((0, 2, 20, 500))),
                            NoiseModel("scaled", rng.choice((1, 30, 3000)))))
        trace = Trace(reqs, noisy_predictions(reqs, noise, seed + i))
        rep = simulate(PolicySpec(Kind.LNONMARKER, seed=seed + i), trace, k)
        err = l1_error(trace, trace.phases(k))
        bad_total += not verify_lemma_totalerror(rep, err, k)
        bad_inj += not verify_lemma_injection(rep, err, k)
    add("n_star_at_most_three_eta", f"runs={runs}", bad_total, 0, bad_total == 0)
    add("extra_chains_paid_by_error", f"runs={runs}", bad_inj, 0, bad_inj == 0)

    # marker policies open exactly one chain per clean page
    bad = 0
    for i in range(max(5, runs // 10)):
        k = rng.choice((2, 4, 8))
        trace = Trace.perfect(workloads.uniform_random(2 * k, 200, seed + i))
        for kind in sorted(MARKER_KINDS, key=lambda x: x.value):
            rep = simulate(PolicySpec(kind, seed=i), trace, k)
            bad += rep.chain_count_C != rep.clean_count_L or rep.marked_evictions != 0
    add("marker_chains_equal_clean", f"runs={max(5, runs // 10)}", bad, 0, bad == 0)
    return rows


def seeds_from(count: int, base: int = 0) -> tuple[int, ...]:
    return tuple(range(base, base + count))

