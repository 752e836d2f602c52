"""Experiment harness: solver grids, trace aggregation, speedup tables.

A run sweeps (tau, variant, seed) cells over one dataset, writes one trace
CSV per run plus JSON provenance, and distills an empirical-vs-theoretical
speedup row per tau. All emitted files are byte-stable given the config.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, generate_synthetic, parse_libsvm
from .eso import (
    alternating_optimization_plan,
    lambda_rule,
    max_over_mean,
    practical_importance_plan,
    tau_nice_bundle,
    uniform_bucket_bundle,
    v_bucket_conservative,
)
from .losses import make_loss
from .oracle import (
    check_eso,
    check_lemma1,
    check_lemma2_lemma3,
    enumerate_bucket_sampling,
    enumerate_tau_nice,
)
from .sampling import bucket_sampling, make_partition, tau_nice_sampling
from .solver import DivergenceError, Trace, reference_solution, solve

VARIANTS = ("nice", "imp", "alt", "unif")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a dataset crossed with taus, variants, and seeds.

    epochs is the budget on the plotted axis (passes divided by tau): every
    run performs ceil(epochs * n) iterations regardless of tau, except that
    with stop_factor > 0 a run ends at the first checkpoint whose gap falls
    to target_gap * stop_factor. log_passes sets the checkpoint cadence in
    raw passes through the data.
    """

    data: str
    out: str
    loss: str = "logistic"
    lam: float | None = None
    taus: tuple = (1, 2, 4, 8, 16, 32)
    variants: tuple = ("nice", "imp", "alt")
    epochs: float = 50.0
    seeds: tuple = (0, 1, 2, 3, 4)
    target_gap: float = 1e-10
    data_seed: int = 0
    shuffle_seed: int | None = None
    log_passes: float = 0.1
    stop_factor: float = 1e-3

    def to_json_dict(self) -> dict:
        return {
            "data": self.data,
            "out": self.out,
            "loss": self.loss,
            "lam": self.lam,
            "taus": list(self.taus),
            "variants": list(self.variants),
            "epochs": self.epochs,
            "seeds": list(self.seeds),
            "target_gap": self.target_gap,
            "data_seed": self.data_seed,
            "shuffle_seed": self.shuffle_seed,
            "log_passes": self.log_passes,
            "stop_factor": self.stop_factor,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ExperimentConfig":
        d = dict(d)
        for key in ("taus", "variants", "seeds"):
            if key in d:
                d[key] = tuple(d[key])
        return ExperimentConfig(**d)


def load_dataset(data: str, data_seed: int = 0) -> tuple[Dataset, str]:
    """Resolve a data string: a LibSVM path or synthetic:<dist>:<n>:<d>:<omega>."""
    if data.startswith("synthetic:"):
        parts = data.split(":")
        if len(parts) != 5:
            raise ValueError(
                f"bad synthetic spec {data!r}; want synthetic:<dist>:<n>:<d>:<omega>"
            )
        _, dist, n, d, omega = parts
        dataset = generate_synthetic(int(n), int(d), float(omega), dist, data_seed)
    else:
        dataset = parse_libsvm(data)
    label = re.sub(r"[^A-Za-z0-9._-]+", "-", data).strip("-")
    return dataset, label


def dataset_summary(dataset: Dataset) -> dict:
    return {
        "n": dataset.n,
        "d": dataset.d,
        "nnz": dataset.X.nnz,
        "sparsity": dataset.X.nnz / (dataset.n * dataset.d),
        "max_over_mean": max_over_mean(dataset.L),
        "digest": dataset.digest(),
    }


def _variant_cell(dataset, partition, variant, lam, gamma):
    """Bundle and sampling spec for one harness variant at one tau."""
    if variant == "nice":
        bundle = tau_nice_bundle(dataset, partition.tau, lam, gamma)
        return bundle, tau_nice_sampling(dataset.n, partition.tau)
    if variant == "imp":
        plan, bundle = practical_importance_plan(dataset, partition, lam, gamma)
    elif variant == "alt":
        plan, bundle, _ = alternating_optimization_plan(dataset, partition, lam, gamma)
    elif variant == "unif":
        plan, bundle = uniform_bucket_bundle(dataset, partition, lam, gamma)
    else:
        raise ValueError(f"unknown variant {variant!r}; pick from {VARIANTS}")
    return bundle, bucket_sampling(plan)


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return repr(float(x))


def write_trace_csv(path, trace: Trace) -> None:
    lines = ["effective_passes,gap,potential"]
    for k in range(len(trace)):
        lines.append(
            f"{_fmt(trace.effective_passes[k])},{_fmt(trace.gap[k])},{_fmt(trace.potential[k])}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def median_gap_trace(traces: list[Trace]) -> tuple[np.ndarray, np.ndarray]:
    """Median gap across seeds on a shared checkpoint grid.

    Runs that halted early (at the stop gap) are carried forward at their
    final gap so the grid stays rectangular.
    """
    K = max(len(t) for t in traces)
    longest = max(traces, key=len)
    G = np.empty((len(traces), K))
    for r, t in enumerate(traces):
        G[r, : len(t)] = t.gap
        G[r, len(t) :] = t.gap[-1]
    return longest.effective_passes, np.median(G, axis=0)


def crossing_point(passes, gaps, target: float) -> float | None:
    """First axis position where the gap reaches target, log-interpolated."""
    below = gaps <= target
    if not below.any():
        return None
    k = int(np.argmax(below))
    if k == 0:
        return float(passes[0])
    g0, g1 = gaps[k - 1], gaps[k]
    if not g0 > g1:
        return float(passes[k])
    frac = (math.log(g0) - math.log(target)) / (math.log(g0) - math.log(g1))
    return float(passes[k - 1] + frac * (passes[k] - passes[k - 1]))


@dataclass(frozen=True)
class RatioRow:
    dataset: str
    tau: int
    theta_nice: float
    theta_imp: float
    theoretical_ratio: float
    passes_nice: float | None
    passes_imp: float | None
    empirical_ratio: float | None
    status: str

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "tau": self.tau,
            "theta_nice": self.theta_nice,
            "theta_imp": self.theta_imp,
            "theoretical_ratio": self.theoretical_ratio,
            "passes_nice": self.passes_nice,
            "passes_imp": self.passes_imp,
            "empirical_ratio": self.empirical_ratio,
            "status": self.status,
        }


@dataclass(frozen=True)
class ExperimentResult:
    out_dir: str
    label: str
    rows: tuple
    runs: tuple
    summary: dict
    all_seeds_diverged: bool


def _json_write(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the full grid and write traces/, ratios.csv|json, config.json,
    bundles.json, runs.json, and summary.json under config.out."""
    out = Path(config.out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    dataset, label = load_dataset(config.data, config.data_seed)
    loss = make_loss(config.loss)
    lam = config.lam if config.lam is not None else lambda_rule(dataset)
    gamma = loss.gamma
    n = dataset.n
    reference = reference_solution(dataset, loss, lam)
    stop_gap = (
        config.target_gap * config.stop_factor if config.stop_factor > 0 else None
    )

    bundles = {}
    runs = []
    medians: dict[tuple[int, str], tuple[np.ndarray, np.ndarray] | None] = {}
    cell_down: dict[tuple[int, str], bool] = {}
    for tau in config.taus:
        partition = make_partition(n, tau, config.shuffle_seed)
        log_every = max(1, math.ceil(config.log_passes * n / tau))
        for variant in config.variants:
            bundle, spec = _variant_cell(dataset, partition, variant, lam, gamma)
            bundles[f"tau{tau}.{variant}"] = bundle.to_json_dict()
            traces = []
            for seed in config.seeds:
                meta = {
                    "tau": int(tau),
                    "variant": variant,
                    "seed": int(seed),
                    "theta": bundle.theta,
                }
                try:
                    state = solve(
                        dataset,
                        loss,
                        lam,
                        spec,
                        bundle,
                        epochs=config.epochs * tau,
                        log_every=log_every,
                        seed=seed,
                        reference=reference,
                        stop_gap=stop_gap,
                    )
                except DivergenceError as err:
                    runs.append({**meta, "diverged": True, "error": str(err)})
                    continue
                fname = f"{label}_{variant}_tau{tau}_seed{seed}.csv"
                write_trace_csv(out / "traces" / fname, state.trace)
                runs.append(
                    {
                        **meta,
                        "diverged": False,
                        "file": f"traces/{fname}",
                        **{
                            k: state.metadata[k]
                            for k in (
                                "sampling",
                                "lam",
                                "gamma",
                                "loss",
                                "dataset_digest",
                                "iterations",
                                "stopped_early",
                            )
                        },
                        "final_gap": float(state.trace.gap[-1]),
                    }
                )
                traces.append(state.trace)
            medians[(tau, variant)] = median_gap_trace(traces) if traces else None
            cell_down[(tau, variant)] = not traces

    rows = []
    if "nice" in config.variants and "imp" in config.variants:
        for tau in config.taus:
            th_nice = bundles[f"tau{tau}.nice"]["theta"]
            th_imp = bundles[f"tau{tau}.imp"]["theta"]
            cross = {}
            status = "ok"
            for variant in ("nice", "imp"):
                if cell_down[(tau, variant)]:
                    cross[variant] = None
                    status = f"diverged:{variant}"
                    continue
                passes, med = medians[(tau, variant)]
                cross[variant] = crossing_point(passes, med, config.target_gap)
                if cross[variant] is None and status == "ok":
                    status = f"missing:{variant}"
            emp = None
            if cross["nice"] is not None and cross["imp"] is not None:
                emp = cross["nice"] / cross["imp"]
            rows.append(
                RatioRow(
                    label,
                    int(tau),
                    th_nice,
                    th_imp,
                    th_imp / th_nice,
                    cross["nice"],
                    cross["imp"],
                    emp,
                    status,
                )
            )

    header = (
        "dataset,tau,theta_nice,theta_imp,theoretical_ratio,"
        "passes_nice,passes_imp,empirical_ratio,status"
    )
    csv_lines = [header]
    for r in rows:
        csv_lines.append(
            ",".join(
                [
                    r.dataset,
                    str(r.tau),
                    _fmt(r.theta_nice),
                    _fmt(r.theta_imp),
                    _fmt(r.theoretical_ratio),
                    _fmt(r.passes_nice),
                    _fmt(r.passes_imp),
                    _fmt(r.empirical_ratio),
                    r.status,
                ]
            )
        )
    (out / "ratios.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    _json_write(out / "ratios.json", [r.to_json_dict() for r in rows])
    _json_write(out / "config.json", config.to_json_dict())
    _json_write(out / "bundles.json", bundles)
    _json_write(out / "runs.json", runs)
    summary = dataset_summary(dataset)
    _json_write(out / "summary.json", {**summary, "label": label, "lam": lam})

    return ExperimentResult(
        str(out), label, tuple(rows), tuple(runs), summary, any(cell_down.values())
    )


def verify_mode(
    data: str,
    tau: int,
    data_seed: int = 0,
    shuffle_seed: int | None = None,
    trials: int = 100,
    lam: float | None = None,
    loss_kind: str = "logistic",
    max_features: int = 64,
) -> tuple[bool, list[str]]:
    """Exhaustively validate every sampling variant on one desk-scale dataset.

    Checks the pair-probability closed form, both PSD certificates on every
    feature support, and the aggregate bound for tau-nice, uniform-bucket,
    practical-importance, alternating, and conservative coefficients, all
    against enumeration. Returns (all_passed, report_lines).
    """
    dataset, label = load_dataset(data, data_seed)
    loss = make_loss(loss_kind)
    if lam is None:
        lam = lambda_rule(dataset)
    gamma = loss.gamma
    partition = make_partition(dataset.n, tau, shuffle_seed)
    imp_plan, imp_bundle = practical_importance_plan(dataset, partition, lam, gamma)
    alt_plan, alt_bundle, _ = alternating_optimization_plan(dataset, partition, lam, gamma)
    unif_plan, unif_bundle = uniform_bucket_bundle(dataset, partition, lam, gamma)
    nice_bundle = tau_nice_bundle(dataset, tau, lam, gamma)

    lines = []
    ok = True

    def record(name, passed, detail):
        nonlocal ok
        ok = ok and passed
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    err = check_lemma1(imp_plan)
    record("pair-probability closed form", err <= 1e-12, f"max abs error {err:.3e}")

    worst2 = worst3 = 0.0
    for j in range(min(dataset.d, max_features)):
        rep = check_lemma2_lemma3(dataset.features.examples_of(j), imp_plan)
        worst2 = min(worst2, rep.min_eig_bucket_bound)
        worst3 = min(worst3, rep.min_eig_diag_bound)
    record(
        "psd certificates on feature supports",
        worst2 >= -1e-10 and worst3 >= -1e-10,
        f"min eigenvalues {worst2:.3e} / {worst3:.3e}",
    )

    rng = np.random.default_rng(0)
    cells = [
        ("tau-nice", enumerate_tau_nice(dataset.n, tau), nice_bundle.p, nice_bundle.v),
        ("uniform-bucket", enumerate_bucket_sampling(unif_plan), unif_bundle.p, unif_bundle.v),
        ("practical-importance", enumerate_bucket_sampling(imp_plan), imp_bundle.p, imp_bundle.v),
        ("alternating", enumerate_bucket_sampling(alt_plan), alt_bundle.p, alt_bundle.v),
        (
            "conservative",
            enumerate_bucket_sampling(imp_plan),
            imp_bundle.p,
            v_bucket_conservative(dataset, imp_plan),
        ),
    ]
    for name, enum, p, v in cells:
        rep = check_eso(dataset, enum, p, v, trials=trials, rng=rng)
        record(
            f"aggregate bound [{name}]",
            rep.passed,
            f"max violation {rep.max_violation:.3e}, min slack {rep.min_slack_ratio:.6f}",
        )
    return ok, lines
