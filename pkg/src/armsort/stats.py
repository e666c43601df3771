"""Final-error statistics: summaries, PDF histograms and two-parameter Weibull fits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import InsufficientData, InvalidArgument, NumericError

FIELDS = ("dx", "dy", "dz", "euclid_xy", "euclid_xyz")
PROFILE_TOL = 1e-10


@dataclass(frozen=True)
class ErrorSample:
    dx: float
    dy: float
    dz: float

    @classmethod
    def from_positions(cls, reached, target) -> ErrorSample:
        d = np.asarray(reached, dtype=float) - np.asarray(target, dtype=float)
        return cls(float(d[0]), float(d[1]), float(d[2]))

    @property
    def euclid_xy(self) -> float:
        return math.hypot(self.dx, self.dy)

    @property
    def euclid_xyz(self) -> float:
        return math.sqrt(self.dx ** 2 + self.dy ** 2 + self.dz ** 2)


@dataclass(frozen=True)
class FieldSummary:
    mean: float
    std: float
    max: float
    min: float


def describe(values) -> FieldSummary:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InsufficientData(f"need at least 2 samples, got {v.size}")
    return FieldSummary(float(v.mean()), float(v.std(ddof=1)), float(v.max()), float(v.min()))


def summarize(samples: Sequence[ErrorSample]) -> dict[str, FieldSummary]:
    if len(samples) < 2:
        raise InsufficientData(f"need at least 2 samples, got {len(samples)}")
    return {f: describe([getattr(s, f) for s in samples]) for f in FIELDS}


@dataclass(frozen=True)
class Histogram:
    bin_width: float
    edges: np.ndarray
    densities: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2

    @property
    def integral(self) -> float:
        return float(np.sum(self.densities * np.diff(self.edges)))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_center", "density"])
            for c, d in zip(self.centers, self.densities):
                w.writerow([f"{c:.4f}", f"{d:.4f}"])


def histogram_pdf(samples, bin_width: float) -> Histogram:
    """Density histogram on bins of ``bin_width`` anchored at zero.

    Bin k covers [k w, (k + 1) w); the bins run from zero (or the floor of the
    smallest negative sample) to just past the largest sample.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientData("histogram needs at least one sample")
    if not bin_width > 0:
        raise InvalidArgument("bin_width must be > 0")
    idx = np.floor(x / bin_width).astype(np.int64)
    lo = min(0, int(idx.min()))
    counts = np.bincount(idx - lo)
    edges = (lo + np.arange(counts.size + 1)) * bin_width
    return Histogram(bin_width, edges, counts / (x.size * bin_width))


@dataclass(frozen=True)
class WeibullFit:
    shape: float
    scale: float
    loglik: float

    def cdf(self, x) -> np.ndarray:
        return weibull_cdf(x, self.shape, self.scale)


def weibull_loglik(samples, shape: float, scale: float) -> float:
    x = np.asarray(samples, dtype=float)
    z = x / scale
    return float(np.sum(math.log(shape / scale) + (shape - 1) * np.log(z) - z ** shape))


def weibull_cdf(x, shape: float, scale: float):
    return 1.0 - np.exp(-(np.asarray(x, dtype=float) / scale) ** shape)


def _profile(k: float, logx: np.ndarray) -> float:
    # d/dk of the profile log-likelihood, scaled by 1/n
    w = np.exp(k * (logx - logx.max()))
    return 1.0 / k + logx.mean() - float(np.sum(w * logx) / np.sum(w))


def weibull_fit(samples, min_samples: int = 10) -> WeibullFit:
    """Maximum-likelihood shape and scale.

    The shape solves ``1/k + mean(ln x) - sum(x^k ln x) / sum(x^k) = 0``;
    the scale then follows in closed form as ``(mean(x^k))^(1/k)``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < min_samples:
        raise InsufficientData(f"Weibull fit needs at least {min_samples} samples, got {x.size}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise InvalidArgument("Weibull samples must be finite and > 0")
    logx = np.log(x)
    # the profile derivative decreases in k; bracket its root by doubling
    lo, hi = 1.0, 1.0
    tried = []
    while _profile(lo, logx) < 0:
        tried.append((lo, _profile(lo, logx)))
        lo /= 2
        if lo < 1e-6:
            raise NumericError("Weibull shape bracket collapsed towards zero", tried)
    while _profile(hi, logx) > 0:
        tried.append((hi, _profile(hi, logx)))
        hi *= 2
        if hi > 1e6:
            raise NumericError("Weibull shape diverges; samples are (nearly) constant", tried)
    if lo == hi:
        k = lo
    else:
        k, res = brentq(_profile, lo, hi, args=(logx,), xtol=PROFILE_TOL, full_output=True,
                        disp=False)
        if not res.converged:
            raise NumericError("Weibull profile equation did not converge", tried + [(k, _profile(k, logx))])
    m = logx.max()
    scale = math.exp(m + math.log(np.mean(np.exp(k * (logx - m)))) / k)
    return WeibullFit(float(k), float(scale), weibull_loglik(x, k, scale))


@dataclass(frozen=True)
class SuccessProbability:
    empirical: float
    weibull: float | None


def success_probability(samples, threshold: float, fit: WeibullFit | None = None,
                        with_fit: bool = True) -> SuccessProbability:
    """Fraction of samples strictly below ``threshold`` and the fitted Weibull CDF there."""
    if not threshold > 0:
        raise InvalidArgument("threshold must be > 0")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientData("no samples")
    emp = float(np.mean(x < threshold))
    if not with_fit:
        return SuccessProbability(emp, None)
    fit = fit or weibull_fit(x)
    return SuccessProbability(emp, float(fit.cdf(threshold)))


def samples_from_rows(rows: Iterable[dict]) -> list[ErrorSample]:
    """Error samples from route-record CSV rows, skipping routes that never ran."""
    out = []
    for row in rows:
        if row.get("skipped") or row.get("dx", "") == "":
            continue
        out.append(ErrorSample(float(row["dx"]), float(row["dy"]), float(row["dz"])))
    return out


def read_route_csvs(paths) -> list[ErrorSample]:
    samples = []
    for p in paths:
        with open(p, newline="") as fh:
            samples.extend(samples_from_rows(csv.DictReader(fh)))
    return samples
