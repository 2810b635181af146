"""Metrics and sweep orchestration for solver benchmarks.

A benchmark is described by a JSON config file::

    {
      "source": "example2",              # "example1", "example2" or "libsvm"
      "sweep": {                         # every combination becomes one cell
        "p": [1000],
        "n_ratio": [0.2],                # or "n": [200]
        "s_ratio": [0.05],               # or "s": [50]
        "rho": [0.5]                     # example2 only
      },
      "solvers": ["nslr", "iht"],
      "trials": 10,
      "seed": 0,
      "solver": {"tau0": 1.0, "tau_decay": 0.1, "epsilon": 1e-6,
                 "max_iter": 1000, "ridge_mu": 1e-10},
      "workers": 1,
      "record_time": true,
      "libsvm": {"path": "train.svm", "test_path": null,
                 "n_train": null, "preprocess": "none"}
    }

Cell ``c`` (in declared sweep order, axes nested p > n > s > rho) draws its
trial seeds from ``SeedSequence([seed ^ c, trial])``. The CSV has one row per
(cell, solver) with indicators averaged over trials; the JSON sidecar keeps
every trial with its iteration trace. With ``"record_time": false`` the time
column is written as 0 so the CSV is byte-identical across runs.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import itertools
import json
import logging

import numpy as np

from . import data, model
from .solver import SolverConfig, iht_solve, nslr_solve

__all__ = [
    "RunResult",
    "ser",
    "evaluate",
    "run_solver",
    "load_config",
    "expand_cells",
    "run_matrix",
    "write_csv",
    "CSV_HEADER",
    "SOLVERS",
]

log = logging.getLogger(__name__)

SOLVERS = {"nslr": nslr_solve, "iht": iht_solve}

CSV_HEADER = [
    "p", "n", "s", "rho", "solver", "loss", "grad_norm", "ser", "time_s", "nnz", "converged",
]

_SOLVER_KEYS = ("tau0", "tau_decay", "epsilon", "max_iter", "ridge_mu")


def ser(ds, z):
    """Sign error rate: fraction of samples where ``1[<x_i, z> > 0] != y_i``."""
    pred = (ds.matvec(np.asarray(z, dtype=np.float64)) > 0).astype(np.float64)
    return float(np.mean(np.abs(ds.y - pred)))


@dataclass
class RunResult:
    solver: str
    loss: float
    grad_norm: float
    ser: float
    time_seconds: float
    nnz: int
    converged: bool
    iterations: int
    seed: int = None
    config: dict = field(default_factory=dict)
    loss_test: float = None
    ser_test: float = None
    stationarity: str = None
    error: str = None
    trace: list = field(default_factory=list)

    def indicators(self):
        out = {
            "loss": self.loss,
            "grad_norm": self.grad_norm,
            "ser": self.ser,
            "time_s": self.time_seconds,
            "nnz": self.nnz,
            "converged": self.converged,
            "iterations": self.iterations,
            "stationarity": self.stationarity,
        }
        if self.loss_test is not None:
            out["loss_test"] = self.loss_test
            out["ser_test"] = self.ser_test
        if self.error:
            out["error"] = self.error
        return out


def run_solver(name, ds, cfg):
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
    return fn(ds, cfg)


def evaluate(report, prepared, seed=None, config=None):
    """Indicators of a solver report on the train split (and test split if any)."""
    z = report.z_final
    res = RunResult(
        solver=report.solver,
        loss=report.loss,
        grad_norm=report.grad_norm,
        ser=ser(prepared.train, z),
        time_seconds=report.time_seconds,
        nnz=report.nnz,
        converged=report.converged,
        iterations=report.iterations,
        seed=seed,
        config=dict(config or {}),
        stationarity=report.certificate,
        error=report.error,
        trace=[r.to_dict() for r in report.trace],
    )
    if prepared.test is not None:
        res.loss_test = model.loss(prepared.test, z)
        res.ser_test = ser(prepared.test, z)
    return res


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg):
    source = cfg.get("source")
    if source not in ("example1", "example2", "libsvm"):
        raise ValueError(f"config 'source' must be example1, example2 or libsvm, got {source!r}")
    for name in cfg.get("solvers", ["nslr"]):
        if name not in SOLVERS:
            raise ValueError(f"unknown solver {name!r}")
    if source == "libsvm" and "path" not in cfg.get("libsvm", {}):
        raise ValueError("libsvm source needs libsvm.path")
    unknown = set(cfg.get("solver", {})) - set(_SOLVER_KEYS)
    if unknown:
        raise ValueError(f"unknown solver settings {sorted(unknown)}")


def _axis(sweep, abs_key, ratio_key):
    if abs_key in sweep:
        return [("abs", v) for v in sweep[abs_key]]
    if ratio_key in sweep:
        return [("ratio", v) for v in sweep[ratio_key]]
    return None


def expand_cells(cfg, p_file=None):
    """List of cell dicts ``{p, n, s, rho}`` in declared order."""
    sweep = cfg.get("sweep", {})
    source = cfg["source"]
    if source == "libsvm":
        ps = [p_file]
        ns = [None]
        rhos = [None]
    else:
        ps = sweep.get("p")
        if not ps:
            raise ValueError("sweep.p is required for synthetic sources")
        ns = _axis(sweep, "n", "n_ratio")
        if ns is None:
            raise ValueError("sweep needs 'n' or 'n_ratio'")
        rhos = sweep.get("rho", [0.5]) if source == "example2" else [None]
    ss = _axis(sweep, "s", "s_ratio")
    if ss is None:
        raise ValueError("sweep needs 's' or 's_ratio'")
    cells = []
    for p, n_spec, s_spec, rho in itertools.product(ps, ns, ss, rhos):
        if n_spec is None:
            n = None
        else:
            n = int(n_spec[1]) if n_spec[0] == "abs" else int(round(n_spec[1] * p))
        s = int(s_spec[1]) if s_spec[0] == "abs" else int(round(s_spec[1] * p))
        cells.append({"p": int(p), "n": n, "s": s, "rho": rho})
    return cells


def _trial_seed(base, cell_index, trial):
    ss = np.random.SeedSequence([(int(base) ^ cell_index) & 0xFFFFFFFFFFFFFFFF, trial])
    return int(ss.generate_state(1, np.uint64)[0])


def _make_data(cfg, cell, seed, libsvm_data):
    source = cfg["source"]
    if source == "libsvm":
        return libsvm_data
    if source == "example1":
        return data.gen_example1(data.Spec1(n=cell["n"], p=cell["p"], seed=seed))
    return data.gen_example2(
        data.Spec2(n=cell["n"], p=cell["p"], s=cell["s"], rho=cell["rho"], seed=seed)
    )


def _run_cell(cfg, cell_index, cell, libsvm_data):
    solvers = cfg.get("solvers", ["nslr"])
    trials = 1 if cfg["source"] == "libsvm" else int(cfg.get("trials", 1))
    settings = cfg.get("solver", {})
    per_solver = {name: [] for name in solvers}
    try:
        for trial in range(trials):
            seed = _trial_seed(cfg.get("seed", 0), cell_index, trial)
            prepared = _make_data(cfg, cell, seed, libsvm_data)
            if cell["n"] is None:
                cell["n"] = prepared.train.n
            scfg = SolverConfig(s=cell["s"], **settings)
            for name in solvers:
                report = run_solver(name, prepared.train, scfg)
                per_solver[name].append(
                    evaluate(report, prepared, seed=seed, config=scfg.snapshot())
                )
        return per_solver, None
    except Exception as exc:  # recorded per cell, the sweep carries on
        log.error("cell %d %s failed: %s", cell_index, cell, exc)
        return per_solver, f"{type(exc).__name__}: {exc}"


def _mean_row(cell, name, results, record_time):
    def avg(attr):
        vals = [getattr(r, attr) for r in results]
        return float(np.mean(vals)) if vals else float("nan")

    return {
        "p": cell["p"],
        "n": cell["n"],
        "s": cell["s"],
        "rho": cell["rho"],
        "solver": name,
        "loss": avg("loss"),
        "grad_norm": avg("grad_norm"),
        "ser": avg("ser"),
        "time_s": avg("time_seconds") if record_time else 0.0,
        "nnz": avg("nnz"),
        "converged": avg("converged"),
    }


def run_matrix(cfg, workers=None):
    """Run every (cell, solver, trial); returns ``(rows, sidecar, n_failed_cells)``.

    ``rows`` holds one trial-averaged dict per (cell, solver) in declared order.
    """
    _validate_config(cfg)
    libsvm_data = None
    p_file = None
    if cfg["source"] == "libsvm":
        lib = cfg["libsvm"]
        libsvm_data = data.load_libsvm_data(
            lib["path"],
            test_path=lib.get("test_path"),
            n_train=lib.get("n_train"),
            preprocess=lib.get("preprocess", "none"),
        )
        p_file = libsvm_data.p
    cells = expand_cells(cfg, p_file=p_file)
    workers = workers or int(cfg.get("workers", 1))
    record_time = bool(cfg.get("record_time", True))
    jobs = list(enumerate(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda job: _run_cell(cfg, job[0], job[1], libsvm_data), jobs))
    else:
        outcomes = [_run_cell(cfg, i, c, libsvm_data) for i, c in jobs]

    rows, sidecar, failed = [], {"cells": []}, 0
    for cell, (per_solver, error) in zip(cells, outcomes):
        if error is not None:
            failed += 1
        for name, results in per_solver.items():
            rows.append(_mean_row(cell, name, results, record_time))
            sidecar["cells"].append(
                {
                    "config": {**cell, "solver": name, "source": cfg["source"],
                               "settings": cfg.get("solver", {})},
                    "error": error,
                    "trials": [
                        {"seed": r.seed, "indicators": r.indicators(), "trace": r.trace}
                        for r in results
                    ],
                }
            )
    return rows, sidecar, failed


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    if np.isnan(value):
        return "nan"
    return f"{value:.6e}"


def write_csv(rows, target=None):
    """Write rows under CSV_HEADER; returns the text when ``target`` is None."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(row[k]) if k != "solver" else row[k] for k in CSV_HEADER])
    text = buf.getvalue()
    if target is None:
        return text
    with open(target, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text
