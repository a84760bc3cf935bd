"""Rank-d CP decomposition of the view tensor via alternating least squares.

Each sweep solves the three exact least-squares subproblems in the order
first node mode, second node mode, view mode (Gauss-Seidel: every solve
uses the freshest other factors), then renormalizes the node factors and
pushes their column norms into per-component scales.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .dataio import load_matrix, save_matrix
from .errors import DataError, NumericalError
from .tensor import Tensor3, fit, mttkrp

__all__ = [
    "AlsConfig",
    "FactorModel",
    "init_factors",
    "als_step",
    "decompose",
    "save_model",
    "load_model",
]

INIT_CHOICES = ("uniform", "normal")


@dataclass
class AlsConfig:
    """Solver settings; two runs with equal configs give equal models."""

    rank: int
    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0
    init: str = "uniform"

    def validate(self) -> None:
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.init not in INIT_CHOICES:
            raise ValueError(f"init must be one of {INIT_CHOICES}, got {self.init!r}")


@dataclass
class FactorModel:
    """CP factors plus absorbed component scales and the fit trace.

    Reconstruction of view l is sum_r column_scales[r] * C[l, r] *
    outer(A[:, r], B[:, r]). Treat instances as immutable once returned
    by the solver.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    column_scales: np.ndarray
    fit_history: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    def normalized(self) -> "FactorModel":
        """Absorb the node-factor column norms into column_scales."""
        a_norms = np.linalg.norm(self.A, axis=0)
        b_norms = np.linalg.norm(self.B, axis=0)
        a_div = np.where(a_norms > 0, a_norms, 1.0)
        b_div = np.where(b_norms > 0, b_norms, 1.0)
        return FactorModel(
            A=self.A / a_div,
            B=self.B / b_div,
            C=self.C.copy(),
            column_scales=self.column_scales * a_div * b_div,
            fit_history=list(self.fit_history),
            converged=self.converged,
            iterations=self.iterations,
        )


def init_factors(dims, config: AlsConfig) -> FactorModel:
    """Seeded random factors; identical seeds give identical models."""
    config.validate()
    i_dim, j_dim, l_dim = dims
    rng = np.random.default_rng(config.seed)
    if config.init == "uniform":
        draw = rng.random
    else:
        draw = rng.standard_normal
    return FactorModel(
        A=draw((i_dim, config.rank)),
        B=draw((j_dim, config.rank)),
        C=draw((l_dim, config.rank)),
        column_scales=np.ones(config.rank),
    )


def _solve_gram(rhs: np.ndarray, gram: np.ndarray) -> np.ndarray:
    """Solve factor @ gram = rhs for a symmetric PSD gram matrix.

    Cholesky on the fast path; rank-deficient grams fall back to the
    pseudoinverse of a trace-scaled ridge regularization.
    """
    try:
        chol = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        out = scipy.linalg.cho_solve(chol, rhs.T, check_finite=False).T
        if np.all(np.isfinite(out)):
            return out
    except scipy.linalg.LinAlgError:
        pass
    ridge = 1e-12 * np.trace(gram)
    regularized = gram + ridge * np.eye(gram.shape[0])
    return rhs @ np.linalg.pinv(regularized)


def als_step(x: Tensor3, model: FactorModel) -> FactorModel:
    """One full sweep over the three factors.

    The view factor keeps the solved magnitudes; the node factors come
    back with unit-norm columns and their norms pushed into
    column_scales. Never raises on singular grams.
    """
    weighted_c = model.C * model.column_scales

    gram = (model.B.T @ model.B) * (weighted_c.T @ weighted_c)
    a_raw = _solve_gram(mttkrp(x, model.B, weighted_c, 0), gram)

    gram = (a_raw.T @ a_raw) * (weighted_c.T @ weighted_c)
    b_raw = _solve_gram(mttkrp(x, a_raw, weighted_c, 1), gram)

    gram = (a_raw.T @ a_raw) * (b_raw.T @ b_raw)
    c_raw = _solve_gram(mttkrp(x, a_raw, b_raw, 2), gram)

    updated = FactorModel(
        A=a_raw,
        B=b_raw,
        C=c_raw,
        column_scales=np.ones(model.rank),
        fit_history=list(model.fit_history),
        converged=model.converged,
        iterations=model.iterations,
    )
    return updated.normalized()


def decompose(x: Tensor3, config: AlsConfig) -> FactorModel:
    """Iterate ALS sweeps until the fit stops changing or max_iters.

    Non-convergence within max_iters is not an error; the returned model
    carries a converged flag and the full per-iteration fit history.
    """
    config.validate()
    if x.nnz == 0:
        raise ValueError("cannot decompose a tensor with no nonzero entries")
    model = init_factors(x.dims, config)
    prev_fit = None
    for _ in range(config.max_iters):
        model = als_step(x, model)
        current = fit(x, model)
        if not np.isfinite(current):
            raise NumericalError("fit became non-finite during ALS")
        model.fit_history.append(current)
        model.iterations = len(model.fit_history)
        if prev_fit is not None and abs(current - prev_fit) < config.tol:
            model.converged = True
            break
        prev_fit = current
    return model


def save_model(model: FactorModel, directory, config: AlsConfig | None = None) -> None:
    """Persist factors, scales, and the run record under a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(model.A, directory / "A.txt")
    save_matrix(model.B, directory / "B.txt")
    save_matrix(model.C, directory / "C.txt")
    lines = [repr(float(v)) for v in model.column_scales]
    (directory / "scales.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    record = {
        "rank": model.rank,
        "converged": model.converged,
        "iterations": model.iterations,
        "fit_history": [float(v) for v in model.fit_history],
    }
    if config is not None:
        record["config"] = {
            "rank": config.rank,
            "max_iters": config.max_iters,
            "tol": config.tol,
            "seed": config.seed,
            "init": config.init,
        }
    (directory / "run.json").write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(directory) -> FactorModel:
    directory = Path(directory)
    a = load_matrix(directory / "A.txt")
    b = load_matrix(directory / "B.txt")
    c = load_matrix(directory / "C.txt")
    try:
        scale_text = (directory / "scales.txt").read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {directory / 'scales.txt'}: {exc}") from exc
    scales = np.array([float(v) for v in scale_text.split()])
    if not (a.shape[1] == b.shape[1] == c.shape[1] == scales.shape[0]):
        raise DataError(f"{directory}: factor ranks disagree")
    model = FactorModel(A=a, B=b, C=c, column_scales=scales)
    run_path = directory / "run.json"
    if run_path.exists():
        record = json.loads(run_path.read_text(encoding="utf-8"))
        model.fit_history = [float(v) for v in record.get("fit_history", [])]
        model.converged = bool(record.get("converged", False))
        model.iterations = int(record.get("iterations", len(model.fit_history)))
    return model
