"""Command-line driver for the experiments and scaling sweeps.

Every experiment writes CSV files into ``--out`` (a directory). Options
may also come from a ``key=value`` config file given by ``--config``;
command-line flags win.
"""
import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from qlinsolve import formats
from qlinsolve.blockenc import banded_spec_from_matrix
from qlinsolve.errors import (
    ConditioningError,
    FitError,
    InvalidInputError,
    NonConvergenceError,
    PostSelectionError,
    QLinSolveError,
)
from qlinsolve.invpoly import degree_parameters
from qlinsolve.numerics import fit_double_exponential, pseudoinverse_solve, singular_extrema
from qlinsolve.pde import (
    HeatConfig,
    burgers_carleman_evolve,
    burgers_reference_explicit,
    heat_evolve,
    heat_explicit_evolve,
    heat_matrix,
    heat_rhs,
    heat_stability_threshold,
    random_complex_tridiagonal,
)
from qlinsolve.qsvt import KAPPA_LADDER, PhaseCache, PreparedSolver

EXPERIMENTS = ("complex", "heat", "burgers", "scaling-dt", "scaling-qubits", "extrapolate")
EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_CONDITIONING, EXIT_POSTSELECT, EXIT_FIT = 0, 1, 2, 3, 4, 5


@dataclass
class ExperimentConfig:
    experiment: str
    nu: float = 0.01
    dx: float = None
    dt: float = None
    grid_points: int = None
    truncation: int = 2
    epsilon: float = 0.1
    kappa: float = None
    steps: int = None
    seed: int = None
    n_qubits: int = 3
    total_time: float = 0.3
    out: str = "."
    phase_cache: str = None
    jobs: int = 1
    deterministic: bool = False
    dt_values: list = field(default_factory=list)
    n_values: list = field(default_factory=list)
    records: str = None
    test_n: int = 7

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidInputError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.experiment == "complex" and self.seed is None:
            raise InvalidInputError("the complex experiment needs --seed")
        if self.experiment == "extrapolate" and not self.records:
            raise InvalidInputError("the extrapolate experiment needs --records")
        if not 0 < self.epsilon < 1:
            raise InvalidInputError("epsilon must lie in (0, 1)")
        if self.kappa is not None and not self.kappa > 1:
            raise InvalidInputError("kappa must exceed 1")
        if self.jobs < 1:
            raise InvalidInputError("jobs must be >= 1")
        burgers = self.experiment == "burgers"
        if self.grid_points is None:
            self.grid_points = 7 if burgers else 9
        if self.dt is None:
            self.dt = 0.1 if burgers else 1.0
        if self.dx is None:
            self.dx = 1.0 / (self.grid_points - 1)
        if self.steps is None:
            self.steps = 100
        if not self.dt_values:
            self.dt_values = list(np.geomspace(0.01, 4.0, 25)) if self.experiment == "scaling-dt" else [1.0, 2.0, 3.0]
        if not self.n_values:
            self.n_values = [3, 4, 5, 6]
        for name in ("nu", "dx", "dt", "total_time"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")

    def cache(self):
        return PhaseCache(self.phase_cache)


@dataclass
class ScalingRecord:
    variable: str
    value: float
    dt: float
    n: int
    sigma_min: float
    alpha: float
    kappa: float
    degree: int
    success_probability: float
    status: str = "ok"
    wall_time_ms: float = 0.0


SCALING_FIELDS = tuple(f.name for f in fields(ScalingRecord))


def _wall(cfg, t0):
    return 0.0 if cfg.deterministic else (time.perf_counter() - t0) * 1e3


def _path(cfg, name):
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def required_kappa(sigma_scaled):
    """Smallest ladder value above ``1/sigma``, continuing the ladder by doubling."""
    if not sigma_scaled > 0:
        raise ConditioningError("matrix is singular", sigma_scaled)
    for k in KAPPA_LADDER:
        if 1.0 / k < sigma_scaled:
            return k
    k = KAPPA_LADDER[-1]
    while not 1.0 / k < sigma_scaled:
        k *= 2
    return k


def polynomial_degree(kappa, epsilon):
    """Degree ``2d + 1`` of the truncated inverse series."""
    return 2 * degree_parameters(kappa, epsilon)[1] + 1


# -- experiments ------------------------------------------------------------------------


def _solve_rows(cfg, matrix_id, report, dim, t0):
    return formats.solve_row(matrix_id, report, dim, _wall(cfg, t0))


def run_complex(cfg):
    A, y = random_complex_tridiagonal(cfg.n_qubits, cfg.seed)
    t0 = time.perf_counter()
    solver = PreparedSolver(A, cfg.epsilon, cfg.kappa, cfg.cache())
    report = solver.solve(y)
    x_true = pseudoinverse_solve(A, y)
    rows = [(i, t.real, t.imag, q.real, q.imag) for i, (t, q) in enumerate(zip(x_true, report.solution))]
    parity = _path(cfg, "complex_parity.csv")
    formats.write_csv(parity, ("index", "true_re", "true_im", "qsvt_re", "qsvt_im"), rows,
                      comments=[f"seed={cfg.seed}", f"n_qubits={cfg.n_qubits}", f"epsilon={cfg.epsilon:.17g}"])
    summary = _path(cfg, "complex_solve.csv")
    formats.write_csv(summary, formats.SOLVE_HEADER, [_solve_rows(cfg, f"complex-seed{cfg.seed}", report, A.shape[0], t0)])
    err = float(np.linalg.norm(report.solution - x_true) / np.linalg.norm(x_true))
    return {"parity": parity, "solve": summary, "relative_error": err}


def _heat_config(cfg):
    n_unknowns = cfg.grid_points - 1
    return HeatConfig(cfg.nu, cfg.dx, cfg.dt, 1.0, 0.0, n_unknowns, np.zeros(n_unknowns))


def run_heat(cfg):
    hc = _heat_config(cfg)
    times = [k * hc.dt for k in range(cfg.steps + 1)]
    meta = [f"nu={hc.nu:.17g}", f"dx={hc.dx:.17g}", f"dt={hc.dt:.17g}", f"lambda={hc.lam:.17g}",
            f"explicit_dt_max={heat_stability_threshold(hc):.17g}", "grid_index 0 is x=dx"]
    out = {}
    t0 = time.perf_counter()
    classical = heat_evolve(hc, cfg.steps, "classical")
    out["classical"] = _path(cfg, "heat_classical.csv")
    formats.write_csv(out["classical"], formats.TRAJECTORY_HEADER, formats.trajectory_rows(times, classical), meta)
    solver = PreparedSolver(heat_matrix(hc), cfg.epsilon, cfg.kappa, cfg.cache())
    traj = [hc.initial.copy()]
    probs = []
    for k in range(cfg.steps):
        rep = solver.solve(heat_rhs(hc, traj[-1]))
        traj.append(rep.solution)
        probs.append(rep.success_probability)
    out["qsvt"] = _path(cfg, "heat_qsvt.csv")
    formats.write_csv(out["qsvt"], formats.TRAJECTORY_HEADER, formats.trajectory_rows(times, traj),
                      meta + [f"kappa={solver.kappa:.17g}", f"degree={solver.degree}", f"alpha={solver.alpha:.17g}"])
    explicit = heat_explicit_evolve(hc, cfg.steps)
    out["explicit"] = _path(cfg, "heat_explicit.csv")
    formats.write_csv(out["explicit"], formats.TRAJECTORY_HEADER, formats.trajectory_rows(times, explicit), meta)
    if probs:
        # summary row: last step, with the mean success probability over all steps
        rep.success_probability = float(np.mean(probs))
        out["solve"] = _path(cfg, "heat_solve.csv")
        formats.write_csv(out["solve"], formats.SOLVE_HEADER, [_solve_rows(cfg, "heat", rep, hc.n_unknowns, t0)])
    out["max_deviation"] = float(np.max(np.abs(np.array(traj) - np.array(classical))))
    out["explicit_max"] = float(np.max(np.abs(explicit[-1])))
    return out


def run_burgers(cfg):
    S, N = cfg.grid_points, cfg.truncation
    common = dict(S=S, nu=cfg.nu, dt=cfg.dt, T=cfg.total_time, N=N)
    meta = [f"S={S}", f"nu={cfg.nu:.17g}", f"dt={cfg.dt:.17g}", f"T={cfg.total_time:.17g}", f"truncation={N}",
            "grid_index 0 is x=0 (boundary)"]
    out = {}
    t_q, s_q = burgers_carleman_evolve(solver="qsvt", epsilon=cfg.epsilon, kappa=cfg.kappa, cache=cfg.cache(), **common)
    t_c, s_c = burgers_carleman_evolve(solver="classical", **common)
    t_r, s_r = burgers_reference_explicit(S, cfg.nu, cfg.dt / 100, cfg.total_time, sample_times=t_c)
    for name, (t, s) in {"qsvt": (t_q, s_q), "classical": (t_c, s_c), "explicit": (t_r, s_r)}.items():
        out[name] = _path(cfg, f"burgers_{name}.csv")
        formats.write_csv(out[name], formats.TRAJECTORY_HEADER, formats.trajectory_rows(t, s), meta)
    out["vs_classical"] = float(np.max(np.abs(s_q[-1] - s_c[-1])))
    out["vs_explicit"] = float(np.max(np.abs(s_q[-1] - s_r[-1])))
    return out


# -- scaling ------------------------------------------------------------------------------


def _scaling_point(cfg, variable, value, dt, n):
    t0 = time.perf_counter()
    N = 1 << n
    try:
        hc = HeatConfig(cfg.nu, 1.0 / N, dt, 1.0, 0.0, N, np.zeros(N))
        A = heat_matrix(hc)
        alpha = banded_spec_from_matrix(A.conj().T).alpha
        smin = singular_extrema(A)[1] / alpha
        kappa = required_kappa(smin)
        degree = polynomial_degree(kappa, cfg.epsilon)
        status, prob = "ok", float("nan")
        if kappa <= KAPPA_LADDER[-1]:
            prob = PreparedSolver(A, cfg.epsilon, kappa, cfg.cache()).solve(heat_rhs(hc, hc.initial)).success_probability
        else:
            status = "beyond-ladder"
        return ScalingRecord(variable, value, dt, n, smin, alpha, kappa, degree, prob, status, _wall(cfg, t0))
    except (QLinSolveError, ArithmeticError, np.linalg.LinAlgError) as exc:
        # a failing point becomes a flagged row; the sweep goes on
        nan = float("nan")
        return ScalingRecord(variable, value, dt, n, nan, nan, nan, -1, nan, f"error:{type(exc).__name__}", _wall(cfg, t0))


def run_scaling(cfg):
    """Heat-matrix sweep over ``dt`` (``scaling-dt``) or matrix qubits (``scaling-qubits``)."""
    if cfg.experiment == "scaling-dt":
        n = int(round(math.log2(1.0 / cfg.dx)))
        points = [("dt", float(dt), float(dt), n) for dt in cfg.dt_values]
    else:
        points = [("n", float(n), float(dt), int(n)) for dt in cfg.dt_values for n in cfg.n_values]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        records = list(pool.map(lambda p: _scaling_point(cfg, *p), points))
    return records


def write_scaling(path, records, comments=()):
    rows = [tuple(getattr(r, f) for f in SCALING_FIELDS) for r in records]
    formats.write_csv(path, SCALING_FIELDS, rows, comments)


def read_scaling(path):
    header, rows = formats.read_csv(path)
    missing = set(SCALING_FIELDS) - set(header)
    if missing:
        raise InvalidInputError(f"records file lacks columns {sorted(missing)}")
    out = []
    for row in rows:
        d = dict(zip(header, row))
        out.append(ScalingRecord(
            d["variable"], float(d["value"]), float(d["dt"]), int(d["n"]), float(d["sigma_min"]),
            float(d["alpha"]), float(d["kappa"]), int(d["degree"]), float(d["success_probability"]),
            d["status"], float(d["wall_time_ms"]),
        ))
    return out


def heat_sigma_min(n, dt, nu=0.01):
    """Subnormalized smallest singular value of the ``2^n``-unknown heat matrix."""
    N = 1 << n
    A = heat_matrix(HeatConfig(nu, 1.0 / N, dt, 1.0, 0.0, N, np.zeros(N)))
    return singular_extrema(A)[1] / banded_spec_from_matrix(A.conj().T).alpha


def extrapolate_report(records, test_n, epsilon=0.1, nu=0.01, compute_truth=True):
    """Double-exponential fit of ``sigma_min(n)`` per ``dt`` and its prediction at ``test_n``."""
    usable = [r for r in records if r.variable == "n" and np.isfinite(r.sigma_min) and r.sigma_min > 0]
    groups = {}
    for r in usable:
        groups.setdefault(r.dt, []).append(r)
    if not groups or any(len(g) < 4 for g in groups.values()):
        raise FitError("need at least 4 valid records per sweep to fit")
    report = []
    for dt in sorted(groups):
        g = sorted(groups[dt], key=lambda r: r.n)
        fit = fit_double_exponential([r.n for r in g], [r.sigma_min for r in g])
        pred = float(fit(test_n))
        if not pred > 0:
            raise FitError(f"fit predicts nonpositive sigma_min {pred:.3g} at n={test_n}")
        degree = polynomial_degree(max(1.0 / pred, 1.0 + 1e-9), epsilon)
        truth = heat_sigma_min(test_n, dt, nu) if compute_truth and test_n <= 7 else float("nan")
        rel = abs(pred - truth) / truth if np.isfinite(truth) else float("nan")
        report.append({
            "dt": dt, "A": fit.A, "B": fit.B, "C": fit.C, "D": fit.D, "residual_rms": fit.residual_rms,
            "degraded": fit.degraded, "test_n": test_n, "predicted_sigma_min": pred,
            "implied_degree": degree, "true_sigma_min": truth, "relative_error": rel,
        })
    return report


EXTRAPOLATION_HEADER = ("dt", "A", "B", "C", "D", "residual_rms", "degraded", "test_n",
                        "predicted_sigma_min", "implied_degree", "true_sigma_min", "relative_error")


def run_experiment(cfg):
    """Run one experiment; returns a dict of output paths and headline numbers."""
    if cfg.experiment == "complex":
        return run_complex(cfg)
    if cfg.experiment == "heat":
        return run_heat(cfg)
    if cfg.experiment == "burgers":
        return run_burgers(cfg)
    if cfg.experiment == "extrapolate":
        rep = extrapolate_report(read_scaling(cfg.records), cfg.test_n, cfg.epsilon, cfg.nu)
        path = _path(cfg, "extrapolation.csv")
        formats.write_csv(path, EXTRAPOLATION_HEADER, [tuple(r[k] for k in EXTRAPOLATION_HEADER) for r in rep])
        return {"extrapolation": path, "report": rep}
    records = run_scaling(cfg)
    path = _path(cfg, f"{cfg.experiment}.csv")
    write_scaling(path, records, [f"nu={cfg.nu:.17g}", f"epsilon={cfg.epsilon:.17g}"])
    return {"scaling": path, "records": records}


# -- argument handling ----------------------------------------------------------------------


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in text.replace(",", " ").split()]


_CONVERTERS = {
    "nu": float, "dx": float, "dt": float, "grid_points": int, "truncation": int, "epsilon": float,
    "kappa": float, "steps": int, "seed": int, "n_qubits": int, "total_time": float, "out": str,
    "phase_cache": str, "jobs": int, "dt_values": _floats, "n_values": _ints, "records": str,
    "test_n": int, "experiment": str,
    "deterministic": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def read_config_file(path):
    """``key=value`` lines; ``#`` starts a comment; dashes in keys read as underscores."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            ln = raw.split("#", 1)[0].strip()
            if not ln:
                continue
            key, sep, val = ln.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in _CONVERTERS:
                raise InvalidInputError(f"{path}:{lineno}: unrecognized line {raw.rstrip()!r}")
            try:
                out[key] = _CONVERTERS[key](val.strip())
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="qlinsolve", description="QSVT linear-system experiments on a state-vector simulator.")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--nu", type=float)
    p.add_argument("--dx", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--grid-points", type=int, help="heat: grid points incl. left boundary (default 9); burgers: S (default 7)")
    p.add_argument("--truncation", type=int, help="Carleman truncation order (default 2)")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--kappa", type=float, help="override the kappa ladder")
    p.add_argument("--steps", type=int, help="heat time steps (default 100)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-qubits", type=int, help="complex experiment matrix qubits (default 3)")
    p.add_argument("--total-time", type=float, help="burgers final time (default 0.3)")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--phase-cache", help="directory for cached phase files")
    p.add_argument("--jobs", type=int, help="parallel sweep workers")
    p.add_argument("--deterministic", action="store_const", const=True, help="write 0 for wall times")
    p.add_argument("--dt-values", type=_floats, help="sweep time steps, comma separated")
    p.add_argument("--n-values", type=_ints, help="sweep matrix qubit counts, comma separated")
    p.add_argument("--records", help="scaling CSV for the extrapolate experiment")
    p.add_argument("--test-n", type=int, help="qubit count to extrapolate to (default 7)")
    return p


def config_from_args(argv=None):
    args = build_parser().parse_args(argv)
    values = read_config_file(args.config) if args.config else {}
    for k, v in vars(args).items():
        if k != "config" and v is not None:
            values[k] = v
    if "experiment" not in values:
        raise InvalidInputError("--experiment is required")
    return ExperimentConfig(**values)


def _summary(result):
    lines = []
    for k, v in result.items():
        if isinstance(v, (str, float, int)):
            lines.append(f"{k}: {v}")
    return "\n".join(lines)


def main(argv=None):
    try:
        cfg = config_from_args(argv)
        result = run_experiment(cfg)
    except (InvalidInputError, OSError) as exc:
        print(f"qlinsolve: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConditioningError as exc:
        print(f"qlinsolve: conditioning failure: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except PostSelectionError as exc:
        print(f"qlinsolve: post-selection failure: {exc}", file=sys.stderr)
        return EXIT_POSTSELECT
    except (FitError, NonConvergenceError) as exc:
        print(f"qlinsolve: fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except QLinSolveError as exc:
        print(f"qlinsolve: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(_summary(result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
