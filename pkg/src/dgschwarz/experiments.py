"""Drivers for the three numerical experiments and log-log rate regression."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import DofMap, PolySpace
from .config import ExperimentConfig
from .forms import assemble_ah, assemble_load_biharmonic_style, broken_norms
from .hjb import HJBDiscretization, build_control_grid, manufactured_problem, semismooth_newton
from .mesh import SubdomainSpec, build_hierarchy
from .problems import exp_sine
from .schwarz import build_preconditioner, condition_number_of_P
from .solvers import pcg

log = logging.getLogger(__name__)

# published reference values used for the acceptance flags
TABLE1 = {
    (2, 2): 2.16e1, (3, 2): 3.34e2, (3, 3): 6.71e1, (4, 2): 1.94e3, (4, 3): 3.16e2, (4, 4): 1.35e2,
    (5, 2): 7.22e3, (5, 3): 1.43e3, (5, 4): 4.11e2, (5, 5): 2.10e2,
    (6, 2): 2.12e4, (6, 3): 4.40e3, (6, 4): 1.31e3, (6, 5): 6.44e2, (6, 6): 3.03e2,
    (7, 2): 5.31e4, (7, 3): 1.10e4, (7, 4): 3.50e3, (7, 5): 1.70e3, (7, 6): 8.97e2,
    (8, 2): 1.18e5, (8, 3): 2.46e4, (8, 4): 7.91e3, (8, 5): 4.27e3, (8, 6): 2.10e3,
    (9, 2): 2.38e5, (9, 3): 4.88e4, (9, 4): 1.61e4, (9, 5): 8.68e3, (9, 6): 4.55e3,
    (10, 2): 4.48e5, (10, 3): 9.17e4, (10, 4): 3.00e4, (10, 5): 1.64e4, (10, 6): 8.86e3,
    (11, 2): 7.92e5, (11, 3): 1.61e5, (11, 4): 5.29e4, (11, 5): 2.90e4, (11, 6): 1.58e4,
    (12, 2): 1.33e6, (12, 3): 2.71e5, (12, 4): 8.89e4, (12, 5): 4.87e4, (12, 6): 2.66e4,
}
TABLE1_GOLDEN = [(2, 2), (4, 3), (6, 4), (8, 5), (12, 6)]
TABLE2 = {  # h denominator -> column -> iterations
    4: {"nonoverlap2": 20},
    8: {"overlap2": 18, "nonoverlap2": 22, "nonoverlap4": 29},
    16: {"overlap2": 18, "overlap4": 24, "nonoverlap2": 22, "nonoverlap4": 30, "nonoverlap8": 43},
    32: {"overlap2": 18, "overlap4": 25, "overlap8": 37, "nonoverlap2": 20, "nonoverlap4": 32, "nonoverlap8": 52},
    64: {"overlap2": 18, "overlap4": 25, "overlap8": 41, "nonoverlap2": 18, "nonoverlap4": 30, "nonoverlap8": 50},
    128: {"overlap2": 18, "overlap4": 26, "overlap8": 41, "nonoverlap2": 17, "nonoverlap4": 27, "nonoverlap8": 48},
    256: {"overlap2": 18, "overlap4": 26, "overlap8": 42, "nonoverlap2": 17, "nonoverlap4": 25, "nonoverlap8": 40},
}


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: int


def fit_rate(x, y) -> RateFit:
    """Least-squares fit of ``log y = slope log x + intercept``."""
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if x.size < 3:
        raise ValueError("a rate fit needs at least three points")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    # constant data: no variance to explain
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 1e-20 * max(np.sum(y**2), 1.0) else 1.0
    return RateFit(float(slope), float(intercept), float(r2), int(x.size))


# ---------------------------------------------------------------------------
# experiment 1: condition numbers


def condition_number_cell(cfg: ExperimentConfig, p: int, q: int, space_kwargs=None) -> tuple[float, float, float]:
    space_kwargs = space_kwargs or {}
    hier = build_hierarchy(cfg.fine_n, cfg.coarse_n,
                           SubdomainSpec(cfg.partition, cfg.delta, overlap=cfg.overlap))
    fine = DofMap(hier.fine, PolySpace(p, cfg.degree_kind, **space_kwargs))
    coarse = DofMap(hier.coarse, PolySpace(q, cfg.degree_kind))
    A = assemble_ah(fine, cfg.penalty)
    B = build_preconditioner(A, hier, fine, coarse)
    return condition_number_of_P(A, B, method=cfg.eig_method)


@dataclass
class Table1Result:
    kappa: dict = field(default_factory=dict)
    lambdas: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    p_rates: dict = field(default_factory=dict)
    q_rates: dict = field(default_factory=dict)

    def to_csv(self, path, ps, qs) -> None:
        with open(path, "w") as fh:
            fh.write("p," + ",".join(f"q={q}" for q in qs) + ",q_rate\n")
            for p in ps:
                cells = [f"{self.kappa[(p, q)]:.6e}" if (p, q) in self.kappa else "" for q in qs]
                rate = f"{self.q_rates[p].slope:.4f}" if p in self.q_rates else ""
                fh.write(f"{p}," + ",".join(cells) + f",{rate}\n")
            fh.write("p_rate," + ",".join(
                f"{self.p_rates[q].slope:.4f}" if q in self.p_rates else "" for q in qs) + ",\n")


def run_experiment_1(cfg: ExperimentConfig) -> Table1Result:
    """Condition numbers of the preconditioned operator over the (p, q) grid.

    Rates are regressed on the last three entries of each column (in p) and
    of each row (in q), as long as the row has at least three entries.
    """
    res = Table1Result()
    ps = range(cfg.p_min, cfg.p + 1)
    for p in ps:
        for q in range(cfg.q_min, min(p, cfg.q) + 1):
            try:
                kappa, lo, hi = condition_number_cell(cfg, p, q)
            except Exception as exc:  # keep sweeping
                log.error("cell p=%d q=%d failed: %s", p, q, exc)
                res.errors[(p, q)] = str(exc)
                continue
            res.kappa[(p, q)] = kappa
            res.lambdas[(p, q)] = (lo, hi)
            log.info("p=%2d q=%d kappa=%.4e", p, q, kappa)
    for q in range(cfg.q_min, cfg.q + 1):
        col = [(p, res.kappa[(p, q)]) for p in ps if (p, q) in res.kappa][-3:]
        if len(col) == 3:
            res.p_rates[q] = fit_rate(*zip(*col))
    for p in ps:
        row = [(q, res.kappa[(p, q)]) for q in range(cfg.q_min, cfg.q + 1) if (p, q) in res.kappa]
        if len(row) >= 3 and len(row) == cfg.q - cfg.q_min + 1:
            qs, ks = zip(*row[-3:])
            # kappa decays in q; regress against 1/q so the rate is positive
            res.q_rates[p] = fit_rate(1.0 / np.array(qs), ks)
    return res


# ---------------------------------------------------------------------------
# experiments 2 and 3: iteration counts


def column_setup(column: str, n: int) -> tuple[int, SubdomainSpec] | None:
    """Coarse mesh size and partition for a table column on an ``n x n`` mesh.

    Returns None when the column is undefined at this resolution.
    """
    ratio = int(column[-1])
    if column.startswith("nonoverlap"):
        coarse_n = n // ratio
        if coarse_n < 2 or n % ratio:
            return None
        return coarse_n, SubdomainSpec("nonoverlapping")
    delta = 0.5 / ratio  # H = 1/2
    if (delta / 2) * n < 1:
        return None
    return 2, SubdomainSpec("overlapping", delta)


@dataclass
class Cell:
    n: int
    column: str
    dofs: int
    iterations: float | None = None
    newton_steps: int | None = None
    assembly_time: float = 0.0
    solve_time: float = 0.0
    error_h2: float | None = None
    failure: str | None = None
    converged: bool = True


def _setup(cfg: ExperimentConfig, n: int, column: str):
    coarse_n, spec = column_setup(column, n)
    hier = build_hierarchy(n, coarse_n, spec)
    fine = DofMap(hier.fine, PolySpace(cfg.p, cfg.degree_kind))
    coarse = DofMap(hier.coarse, PolySpace(cfg.q, cfg.degree_kind))
    return hier, fine, coarse


def model_cell(cfg: ExperimentConfig, n: int, column: str) -> Cell:
    """Preconditioned CG on the model problem with the exp-sine load."""
    exact = exp_sine()
    t0 = time.perf_counter()
    hier, fine, coarse = _setup(cfg, n, column)
    cell = Cell(n, column, fine.ndofs)
    A = assemble_ah(fine, cfg.penalty, check=False)
    b = assemble_load_biharmonic_style(fine, exact.laplacian)
    B = build_preconditioner(A, hier, fine, coarse)
    t1 = time.perf_counter()
    x, rep = pcg(A, B, b, reduction=cfg.pcg_reduction, maxit=2000)
    t2 = time.perf_counter()
    cell.iterations, cell.converged = rep.iterations, rep.converged
    cell.assembly_time, cell.solve_time = t1 - t0, t2 - t1
    cell.error_h2 = broken_norms(fine, x, exact, cfg.penalty).h2_broken
    return cell


def hjb_cell(cfg: ExperimentConfig, n: int, column: str) -> Cell:
    """Semismooth Newton with preconditioned GMRES on the manufactured HJB problem."""
    problem = manufactured_problem(build_control_grid(cfg.n_theta, cfg.n_phi), exp_sine(), cfg.kappa)
    t0 = time.perf_counter()
    hier, fine, coarse = _setup(cfg, n, column)
    cell = Cell(n, column, fine.ndofs)
    A = assemble_ah(fine, cfg.penalty, check=False)
    B = build_preconditioner(A, hier, fine, coarse)
    disc = HJBDiscretization(fine, problem, cfg.penalty, A=A)
    t1 = time.perf_counter()
    _, rep = semismooth_newton(disc, B, newton_tol=cfg.newton_tol, gmres_reduction=cfg.gmres_reduction,
                               max_steps=cfg.newton_max_steps)
    t2 = time.perf_counter()
    if rep.factorizations_after != rep.factorizations_before:
        raise RuntimeError("preconditioner was refactorized during the Newton iteration")
    cell.iterations, cell.newton_steps, cell.converged = rep.average_gmres, rep.newton_steps, rep.converged
    cell.assembly_time, cell.solve_time = t1 - t0, t2 - t1
    cell.error_h2 = rep.final_error_h2
    return cell


@dataclass
class SweepResult:
    cells: dict = field(default_factory=dict)  # (n, column) -> Cell

    def rows(self):
        return sorted({n for n, _ in self.cells})

    def to_csv(self, path, columns, newton: bool = False) -> None:
        with open(path, "w") as fh:
            fh.write("dofs,h," + ",".join(columns) + "\n")
            for n in self.rows():
                dofs = next(c.dofs for (m, _), c in self.cells.items() if m == n)
                vals = []
                for col in columns:
                    c = self.cells.get((n, col))
                    if c is None:
                        vals.append("")
                    elif c.failure:
                        vals.append("failed")
                    elif newton:
                        vals.append(f"{c.iterations:.1f} ({c.newton_steps})")
                    else:
                        vals.append(str(c.iterations))
                fh.write(f"{dofs},1/{n}," + ",".join(f'"{v}"' if "(" in v else v for v in vals) + "\n")

    def timings_csv(self, path, columns) -> None:
        with open(path, "w") as fh:
            fh.write("h,column,assembly_s,solve_s\n")
            for n in self.rows():
                for col in columns:
                    c = self.cells.get((n, col))
                    if c is not None and not c.failure:
                        fh.write(f"1/{n},{col},{c.assembly_time:.3f},{c.solve_time:.3f}\n")


def _sweep(cfg: ExperimentConfig, cell_fn) -> SweepResult:
    res = SweepResult()
    for k in range(cfg.min_refinement, cfg.max_refinement + 1):
        n = 2**k
        for col in cfg.columns:
            if column_setup(col, n) is None:
                continue
            try:
                cell = cell_fn(cfg, n, col)
            except Exception as exc:
                log.error("cell h=1/%d %s failed: %s", n, col, exc)
                cell = Cell(n, col, n * n * PolySpace(cfg.p, cfg.degree_kind).dim, failure=str(exc))
            res.cells[(n, col)] = cell
            log.info("h=1/%d %-11s %s", n, col, cell.iterations)
    return res


def run_experiment_2(cfg: ExperimentConfig) -> SweepResult:
    return _sweep(cfg, model_cell)


def run_experiment_3(cfg: ExperimentConfig) -> SweepResult:
    return _sweep(cfg, hjb_cell)
