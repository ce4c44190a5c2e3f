"""Emulator-versus-analytic experiments: the hbar sweep of sigma_x(t) and the
phase-space localization grids, plus summary error metrics.

A predictor is any callable mapping an (N, 4) input matrix of
(x0, p0, sigma_x0, hbar) rows to an (N, 4) matrix of evolved parameters; both
a trained network and the exact closed form (oracle_predictor) qualify, so
every experiment has a built-in zero-error baseline.

Relative error is always measured against the analytical value.  A predicted
width that is not positive defines no Gaussian: the affected phase-space grid
carries a structured error instead of data, and the affected sweep row gets a
NaN relative error (a missing point) and is excluded from summary metrics.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .network import MlpModel
from .oscillator import GaussianWigner, OscillatorConfig, evolve_batch, wigner_grid, wigner_value

Predictor = Callable[[np.ndarray], np.ndarray]


class DegenerateWidthError(ValueError):
    """Raised when a predicted width is not positive and no Gaussian exists."""


def _default_sweep_hbars() -> np.ndarray:
    return np.logspace(-6.0, 0.0, 50)


@dataclass
class SweepSpec:
    """Fixed initial state swept over a sorted list of positive hbar values."""

    x0: float = 1.0
    p0: float = 0.0
    sigma_x0: float = 1.0
    hbar_values: np.ndarray = field(default_factory=_default_sweep_hbars)
    cfg: OscillatorConfig = field(default_factory=OscillatorConfig)

    def __post_init__(self):
        self.hbar_values = np.asarray(self.hbar_values, dtype=np.float64)
        if self.hbar_values.size == 0 or np.any(self.hbar_values <= 0):
            raise ValueError("hbar_values must be nonempty and strictly positive")
        if np.any(np.diff(self.hbar_values) <= 0):
            raise ValueError("hbar_values must be sorted strictly ascending")


@dataclass
class PhaseSpaceSpec:
    """Fixed initial state evaluated on a square phase-space grid per hbar."""

    x0: float = 1.0
    p0: float = 0.0
    sigma_x0: float = 1.0
    hbar_values: tuple[float, ...] = (1.0, 0.1, 0.01)
    grid_min: float = -10.0
    grid_max: float = 10.0
    grid_points: int = 100
    cfg: OscillatorConfig = field(default_factory=OscillatorConfig)

    def __post_init__(self):
        if any(h <= 0 for h in self.hbar_values):
            raise ValueError("hbar_values must be strictly positive")
        if not (np.isfinite(self.grid_min) and np.isfinite(self.grid_max)):
            raise ValueError("grid bounds must be finite")
        if not self.grid_min < self.grid_max:
            raise ValueError(f"grid_min must be below grid_max, got [{self.grid_min}, {self.grid_max}]")
        if self.grid_points < 2:
            raise ValueError(f"grid needs at least 2 points per axis, got {self.grid_points}")


@dataclass
class SweepResult:
    """Per-hbar predicted and analytical sigma_x(t) (and sigma_p(t)) columns."""

    hbar: np.ndarray
    sigma_xt_pred: np.ndarray
    sigma_xt_analytical: np.ndarray
    rel_err: np.ndarray
    sigma_pt_pred: np.ndarray
    sigma_pt_analytical: np.ndarray

    @property
    def n_degenerate(self) -> int:
        return int(np.sum(~np.isfinite(self.rel_err)))


@dataclass
class PhaseSpaceResult:
    """One reconstructed Wigner grid, or a structured error when degenerate."""

    hbar: float
    prediction: np.ndarray | None = None
    values: np.ndarray | None = None
    x_axis: np.ndarray | None = None
    p_axis: np.ndarray | None = None
    levels: np.ndarray | None = None
    peak_value: float = float("nan")
    grid_max: float = float("nan")
    grid_max_x: float = float("nan")
    grid_max_p: float = float("nan")
    error: str | None = None


@dataclass
class ConvergenceReport:
    """Sweep fidelity inside the trained hbar range plus the extrapolation flag."""

    max_rel_err: float
    median_rel_err: float
    n_in_range: int
    n_degenerate: int
    extrapolation_decreasing: bool
    trained_hbar_min: float
    trained_hbar_max: float


def oracle_predictor(cfg: OscillatorConfig) -> Predictor:
    """Exact closed-form stand-in for a trained model."""

    def predict(inputs: np.ndarray) -> np.ndarray:
        targets, _ = evolve_batch(cfg, inputs)
        return targets

    return predict


def model_predictor(model: MlpModel) -> Predictor:
    """Inference-mode wrapper around a trained network."""
    return model.forward


def _sweep_inputs(spec: SweepSpec, hbars: np.ndarray) -> np.ndarray:
    inputs = np.empty((hbars.size, 4))
    inputs[:, 0] = spec.x0
    inputs[:, 1] = spec.p0
    inputs[:, 2] = spec.sigma_x0
    inputs[:, 3] = hbars
    return inputs


def hbar_sweep(predict: Predictor, spec: SweepSpec) -> SweepResult:
    """Predicted vs analytical widths over the spec's hbar list."""
    inputs = _sweep_inputs(spec, spec.hbar_values)
    preds = np.asarray(predict(inputs), dtype=np.float64)
    analytical, _ = evolve_batch(spec.cfg, inputs)
    sigma_xt_pred = preds[:, 2]
    sigma_xt_ana = analytical[:, 2]
    rel_err = np.abs(sigma_xt_pred - sigma_xt_ana) / sigma_xt_ana
    rel_err = np.where(sigma_xt_pred > 0, rel_err, np.nan)
    return SweepResult(
        hbar=spec.hbar_values.copy(),
        sigma_xt_pred=sigma_xt_pred,
        sigma_xt_analytical=sigma_xt_ana,
        rel_err=rel_err,
        sigma_pt_pred=preds[:, 3],
        sigma_pt_analytical=analytical[:, 3],
    )


def phase_space_grids(predict: Predictor, spec: PhaseSpaceSpec) -> list[PhaseSpaceResult]:
    """Reconstruct the predicted Wigner function on the grid for each hbar.

    The contour levels are 20 linearly spaced values between the grid minimum
    and maximum.  peak_value is the Gaussian evaluated at the predicted
    center, 1/(pi hbar) exactly; grid_max is the largest grid-node value.
    """
    results = []
    for hbar in spec.hbar_values:
        inputs = np.array([[spec.x0, spec.p0, spec.sigma_x0, hbar]])
        pred = np.asarray(predict(inputs), dtype=np.float64)[0]
        xt, pt, sigma_xt, sigma_pt = pred
        if sigma_xt <= 0 or sigma_pt <= 0:
            results.append(
                PhaseSpaceResult(
                    hbar=hbar,
                    prediction=pred,
                    error=(
                        f"degenerate prediction at hbar={hbar:g}: "
                        f"sigma_xt={sigma_xt:g}, sigma_pt={sigma_pt:g} (must be positive)"
                    ),
                )
            )
            continue
        w = GaussianWigner(center_x=xt, center_p=pt, sigma_x=sigma_xt, sigma_p=sigma_pt, hbar=hbar)
        values, x_axis, p_axis = wigner_grid(
            w, spec.grid_min, spec.grid_max, spec.grid_min, spec.grid_max, spec.grid_points
        )
        flat_argmax = int(np.argmax(values))
        i, j = divmod(flat_argmax, values.shape[1])
        results.append(
            PhaseSpaceResult(
                hbar=hbar,
                prediction=pred,
                values=values,
                x_axis=x_axis,
                p_axis=p_axis,
                levels=np.linspace(values.min(), values.max(), 20),
                peak_value=wigner_value(w, xt, pt),
                grid_max=float(values[i, j]),
                grid_max_x=float(x_axis[j]),
                grid_max_p=float(p_axis[i]),
            )
        )
    return results


def convergence_report(
    predict: Predictor,
    spec: SweepSpec,
    trained_hbar_log10_range: tuple[float, float],
) -> ConvergenceReport:
    """Summary metrics of a sweep against the trained hbar range.

    In-range rows (trained range is inclusive) contribute max/median relative
    error; degenerate rows are excluded.  The extrapolation flag probes ten
    log-spaced hbar values spanning the two decades below the trained minimum
    and reports whether the predicted sigma_x(t) at the smallest probe is
    strictly below the prediction at the trained minimum, i.e. whether the
    emulated packet keeps localizing beyond the data it was fitted on.
    """
    lo, hi = trained_hbar_log10_range
    hbar_min, hbar_max = 10.0**lo, 10.0**hi
    sweep = hbar_sweep(predict, spec)

    in_range = (sweep.hbar >= hbar_min) & (sweep.hbar <= hbar_max) & np.isfinite(sweep.rel_err)
    if np.any(in_range):
        max_rel = float(np.max(sweep.rel_err[in_range]))
        median_rel = float(np.median(sweep.rel_err[in_range]))
    else:
        max_rel = float("nan")
        median_rel = float("nan")

    probes = np.logspace(lo - 2.0, lo, 10)
    probe_preds = np.asarray(predict(_sweep_inputs(spec, probes)), dtype=np.float64)[:, 2]
    decreasing = bool(probe_preds[0] < probe_preds[-1])

    return ConvergenceReport(
        max_rel_err=max_rel,
        median_rel_err=median_rel,
        n_in_range=int(np.sum(in_range)),
        n_degenerate=sweep.n_degenerate,
        extrapolation_decreasing=decreasing,
        trained_hbar_min=hbar_min,
        trained_hbar_max=hbar_max,
    )


def save_sweep(result: SweepResult, path: str | os.PathLike) -> None:
    """Plot-ready sweep CSV, one row per hbar."""
    lines = ["hbar,sigma_xt_pred,sigma_xt_analytical,rel_err,sigma_pt_pred,sigma_pt_analytical"]
    for row in zip(
        result.hbar,
        result.sigma_xt_pred,
        result.sigma_xt_analytical,
        result.rel_err,
        result.sigma_pt_pred,
        result.sigma_pt_analytical,
    ):
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def save_phase_space(result: PhaseSpaceResult, path: str | os.PathLike) -> None:
    """Plot-ready grid CSV: metadata header block, then the value matrix.

    Row i of the matrix corresponds to p_axis[i], column j to x_axis[j].
    """
    if result.error is not None:
        raise DegenerateWidthError(result.error)
    xt, pt, sigma_xt, sigma_pt = result.prediction
    lines = [
        f"# hbar {result.hbar:.17g}",
        f"# xt_pred {xt:.17g}",
        f"# pt_pred {pt:.17g}",
        f"# sigma_xt_pred {sigma_xt:.17g}",
        f"# sigma_pt_pred {sigma_pt:.17g}",
        f"# x_min {result.x_axis[0]:.17g}",
        f"# x_max {result.x_axis[-1]:.17g}",
        f"# p_min {result.p_axis[0]:.17g}",
        f"# p_max {result.p_axis[-1]:.17g}",
        f"# n {result.values.shape[0]}",
        "# levels " + " ".join(f"{v:.17g}" for v in result.levels),
    ]
    for row in result.values:
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
