"""Linear pixel-count energy model, error metrics, and meta-analysis.

The per-network model is ``E_hat = alpha * S + beta`` with ``S`` the padded
pixel count: ``alpha`` is the energy per pixel, ``beta`` the per-execution
offset. Model quality is reported as the mean relative estimation error
(mean of ``|E_hat - E| / E``) under seeded k-fold cross-validation, plus the
Pearson correlation of energy against pixels. A second-level fit regresses
the per-network slopes against each network's MAC-per-pixel complexity.

All reductions use ``math.fsum``, so results do not depend on summation
order and repeated runs are bit-identical.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import DegenerateInput, JoinMismatch, TooFewPoints, ZeroMeasured, ZeroVariance
from .trace import EnergyRecord

FIT_SUMMARY_HEADER = ("network", "quality_class", "alpha", "beta", "mre_cv", "pearson_r", "n")
PLOT_DATA_HEADER = ("kmac", "alpha", "quality_class", "network")


@dataclass(frozen=True, slots=True)
class DataPoint:
    """One (padded pixel count, measured energy) observation."""

    s: float
    e: float

    def __post_init__(self):
        if not (self.s > 0):
            raise ValueError(f"pixel count must be > 0, got {self.s}")


@dataclass(frozen=True, slots=True)
class LinearModel:
    """Fitted energy line: joules = alpha * pixels + beta."""

    alpha: float
    beta: float
    label: tuple[str, str] = ("", "")


@dataclass(frozen=True)
class FitReport:
    """Cross-validated fit outcome for one (network, quality_class) group."""

    model: LinearModel
    mre: float
    per_fold_mre: tuple[float, ...]
    pearson_r: float
    n_points: int


def fit_linear(points: Sequence[DataPoint], label: tuple[str, str] = ("", "")) -> LinearModel:
    """Ordinary least squares through the points.

    Uses the closed-form normal equations with mean-centered pixel counts:
    S ranges over ~1e6 while the offset is of order 1, and centering keeps
    the solve well conditioned in double precision.

    Raises:
        DegenerateInput: fewer than 2 points or all pixel counts equal.
    """
    if len(points) < 2:
        raise DegenerateInput(f"need at least 2 points, got {len(points)}")
    s_mean = math.fsum(p.s for p in points) / len(points)
    e_mean = math.fsum(p.e for p in points) / len(points)
    sxx = math.fsum((p.s - s_mean) ** 2 for p in points)
    if sxx == 0.0:
        raise DegenerateInput("all pixel counts are equal; slope is undefined")
    sxy = math.fsum((p.s - s_mean) * (p.e - e_mean) for p in points)
    alpha = sxy / sxx
    beta = e_mean - alpha * s_mean
    return LinearModel(alpha=alpha, beta=beta, label=label)


def predict(model: LinearModel, s: float) -> float:
    """Estimated energy in joules for ``s`` pixels."""
    if s < 0:
        raise ValueError(f"pixel count must be >= 0, got {s}")
    return model.alpha * s + model.beta


def mre(measured: Sequence[float], estimated: Sequence[float]) -> float:
    """Mean relative estimation error: mean of ``|est - meas| / meas``.

    Raises:
        ZeroMeasured: any measured value is exactly zero.
    """
    if len(measured) != len(estimated) or not measured:
        raise ValueError("measured and estimated must be equal-length and non-empty")
    for e in measured:
        if e == 0.0:
            raise ZeroMeasured("relative error undefined for a measured value of 0")
    return math.fsum(abs(eh - e) / e for e, eh in zip(measured, estimated)) / len(measured)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient.

    Raises:
        ZeroVariance: either sequence is constant.
    """
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("x and y must be equal-length with at least 2 values")
    xm = math.fsum(x) / len(x)
    ym = math.fsum(y) / len(y)
    sxx = math.fsum((a - xm) ** 2 for a in x)
    syy = math.fsum((b - ym) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation undefined for a constant sequence")
    sxy = math.fsum((a - xm) * (b - ym) for a, b in zip(x, y))
    return sxy / math.sqrt(sxx * syy)


def kfold_cv(
    points: Sequence[DataPoint],
    folds: int,
    rng_seed: int,
    label: tuple[str, str] = ("", ""),
) -> FitReport:
    """Seeded k-fold cross-validation of the linear model.

    Points are shuffled once with the seed, split into ``folds`` contiguous
    near-equal slices; each fold is scored with the model fitted on its
    complement. The returned model is fitted on all points.

    Raises:
        TooFewPoints: fewer points than folds (or folds < 2).
    """
    if folds < 2:
        raise TooFewPoints(f"need at least 2 folds, got {folds}")
    if len(points) < folds:
        raise TooFewPoints(f"{len(points)} points cannot fill {folds} folds")
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(len(points))
    fold_indices = np.array_split(order, folds)
    per_fold = []
    for held in fold_indices:
        held_set = set(int(i) for i in held)
        train = [p for i, p in enumerate(points) if i not in held_set]
        test = [points[int(i)] for i in held]
        model = fit_linear(train, label)
        per_fold.append(
            mre([p.e for p in test], [predict(model, p.s) for p in test])
        )
    final = fit_linear(points, label)
    return FitReport(
        model=final,
        mre=math.fsum(per_fold) / len(per_fold),
        per_fold_mre=tuple(per_fold),
        pearson_r=pearson([p.s for p in points], [p.e for p in points]),
        n_points=len(points),
    )


def slope_vs_mac(
    models: Sequence[LinearModel], macs: Sequence[float]
) -> tuple[LinearModel, float]:
    """Least-squares fit of the per-pixel slopes against kMAC per pixel.

    Returns the meta-fit and its mean relative error over the given points.
    """
    if len(models) != len(macs) or len(models) < 2:
        raise ValueError("models and macs must be aligned with at least 2 entries")
    points = [DataPoint(s=mac, e=m.alpha) for m, mac in zip(models, macs)]
    meta = fit_linear(points, label=("mac_meta", "all"))
    err = mre([p.e for p in points], [predict(meta, p.s) for p in points])
    return meta, err


class PixelEnergyModel(RegressorMixin, BaseEstimator):
    """Estimator interface around the pixel-count energy line.

    ``X`` is a single column of padded pixel counts, ``y`` the measured
    energies in joules; ``fit``/``predict``/``get_params`` follow the usual
    estimator conventions so the model composes with pipelines and
    cross-validation utilities.

    Attributes after fit: ``alpha_`` (J/pixel), ``beta_`` (J), ``model_``.
    """

    def __init__(self, network_id: str = "", quality_class: str = ""):
        self.network_id = network_id
        self.quality_class = quality_class

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=2)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single pixel-count column, got {X.shape[1]}")
        points = [DataPoint(float(s), float(e)) for s, e in zip(X[:, 0], y)]
        self.model_ = fit_linear(points, label=(self.network_id, self.quality_class))
        self.alpha_ = self.model_.alpha
        self.beta_ = self.model_.beta
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return self.alpha_ * X[:, 0] + self.beta_

    def relative_error(self, X, y) -> float:
        """Mean relative estimation error of the fitted line on (X, y)."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        return mre(list(map(float, y)), list(self.predict(X)))


# --- grouped fitting over results CSV data -----------------------------------


def group_points(
    records: Iterable[EnergyRecord],
    quality_class_of,
) -> dict[tuple[str, str], list[DataPoint]]:
    """Bucket records into (network, quality_class) groups of data points."""
    groups: dict[tuple[str, str], list[DataPoint]] = {}
    for rec in records:
        qc = quality_class_of(rec.network_id, rec.quality_level)
        groups.setdefault((rec.network_id, qc), []).append(
            DataPoint(s=rec.pixels, e=rec.mean_energy_j)
        )
    return groups


def fit_groups(
    records: Iterable[EnergyRecord],
    folds: int,
    rng_seed: int,
    quality_class_of,
) -> dict[tuple[str, str], FitReport]:
    """Cross-validated fit per (network, quality_class) group.

    Each group gets a seed derived from ``rng_seed`` and its position in the
    sorted key order, so reports are reproducible regardless of row order.

    Raises:
        TooFewPoints: some group has fewer points than folds; the message
            names the group.
    """
    groups = group_points(records, quality_class_of)
    reports: dict[tuple[str, str], FitReport] = {}
    for idx, key in enumerate(sorted(groups)):
        points = groups[key]
        try:
            reports[key] = kfold_cv(points, folds, rng_seed + idx, label=key)
        except TooFewPoints as exc:
            raise TooFewPoints(f"group {key[0]}/{key[1]}: {exc}") from exc
    return reports


def write_fit_summary(reports: Mapping[tuple[str, str], FitReport], path: str | Path) -> None:
    """Write the flat fit summary CSV, one row per group."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIT_SUMMARY_HEADER)
        for (network, qc), report in sorted(reports.items()):
            writer.writerow(
                [
                    network,
                    qc,
                    repr(report.model.alpha),
                    repr(report.model.beta),
                    repr(report.mre),
                    repr(report.pearson_r),
                    report.n_points,
                ]
            )


def read_fit_summary(path: str | Path) -> dict[tuple[str, str], dict]:
    """Load a fit summary CSV back into per-group rows."""
    rows: dict[tuple[str, str], dict] = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != list(FIT_SUMMARY_HEADER):
            raise ValueError(f"unexpected fit summary header: {header!r}")
        for row in reader:
            if not row:
                continue
            rows[(row[0], row[1])] = {
                "alpha": float(row[2]),
                "beta": float(row[3]),
                "mre_cv": float(row[4]),
                "pearson_r": float(row[5]),
                "n": int(row[6]),
            }
    return rows


def format_fit_report(key: tuple[str, str], report: FitReport, pixels_mode: str) -> str:
    """Human-readable block for one group's fit report."""
    lines = [
        f"network={key[0]} quality_class={key[1]}",
        f"  alpha_j_per_px = {report.model.alpha!r}",
        f"  beta_j         = {report.model.beta!r}",
        f"  cv_mre         = {report.mre:.4%}",
        f"  pearson_r      = {report.pearson_r:.4f}",
        f"  n_points       = {report.n_points}",
        f"  pixels_mode    = {pixels_mode}",
        "  per_fold_mre   = " + ", ".join(f"{v:.4%}" for v in report.per_fold_mre),
    ]
    return "\n".join(lines) + "\n"


def correlate(
    fit_rows: Mapping[tuple[str, str], dict],
    mac_rows: Mapping[tuple[str, str], dict],
) -> dict:
    """Join fitted slopes with MAC complexities and run both meta-fits.

    Returns a dict with the full-MAC and second-stage meta models, their
    MREs, the Pearson correlation of slope vs full MAC, and plot rows.

    Raises:
        JoinMismatch: the two tables do not cover the same groups.
    """
    missing = sorted(set(fit_rows) ^ set(mac_rows))
    if missing:
        raise JoinMismatch(
            "fit and MAC tables disagree on groups: "
            + ", ".join(f"{n}/{q}" for n, q in missing),
            unmatched=[f"{n}/{q}" for n, q in missing],
        )
    keys = sorted(fit_rows)
    models = [
        LinearModel(alpha=fit_rows[k]["alpha"], beta=fit_rows[k]["beta"], label=k)
        for k in keys
    ]
    full = [mac_rows[k]["kmac_total"] for k in keys]
    second = [mac_rows[k]["kmac_second_stage"] for k in keys]
    full_model, full_mre = slope_vs_mac(models, full)
    second_model, second_mre = slope_vs_mac(models, second)
    plot_rows = [
        {
            "kmac": mac_rows[k]["kmac_total"],
            "alpha": fit_rows[k]["alpha"],
            "quality_class": k[1],
            "network": k[0],
        }
        for k in keys
    ]
    return {
        "full": {"model": full_model, "mre": full_mre},
        "second_stage": {"model": second_model, "mre": second_mre},
        "pearson_full": pearson(full, [m.alpha for m in models]),
        "plot_rows": plot_rows,
    }


def write_plot_data(plot_rows: Sequence[Mapping], path: str | Path) -> None:
    """Write slope-vs-MAC plot data (``kmac,alpha,quality_class,network``)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLOT_DATA_HEADER)
        for row in plot_rows:
            writer.writerow(
                [repr(float(row["kmac"])), repr(float(row["alpha"])), row["quality_class"], row["network"]]
            )
