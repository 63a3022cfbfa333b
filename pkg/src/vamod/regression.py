"""Least-squares core and inference utilities.

The solver uses a column-pivoted QR decomposition (never normal equations)
so near-collinear dummy designs stay numerically stable and rank
deficiency is detected at a pivot threshold of 1e-10 times the largest
column norm. Cluster-robust covariances use the CR1 sandwich; Wald tests
are referred to an F(q, M-1) distribution with M the number of clusters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import stats

from .design import DesignMatrix
from .errors import (
    EmptyInput,
    LengthMismatch,
    RankDeficient,
    SingleCluster,
    SingularSubmatrix,
    TooFewRows,
    UnknownLabel,
    ZeroVariance,
)

PIVOT_RTOL = 1e-10


@dataclass(frozen=True)
class FittedModel:
    """An OLS fit: labelled coefficients, residuals and fit statistics."""

    coefficients: np.ndarray
    labels: tuple[str, ...]
    residuals: np.ndarray
    n_obs: int
    n_params: int
    r_squared: float
    adj_r_squared: float
    rmse: float

    def coefficient(self, label: str) -> float:
        try:
            return float(self.coefficients[self.labels.index(label)])
        except ValueError:
            raise UnknownLabel(f"no coefficient labelled {label!r}") from None

    def coefficients_by_label(self) -> dict[str, float]:
        return {lab: float(c) for lab, c in zip(self.labels, self.coefficients)}


@dataclass(frozen=True)
class ClusterRobustCov:
    """CR1 sandwich covariance of the coefficients under one-way clustering."""

    matrix: np.ndarray
    labels: tuple[str, ...]
    n_clusters: int
    correction: float


@dataclass(frozen=True, slots=True)
class WaldTest:
    statistic: float
    df1: int
    df2: int
    p_value: float


def _unpack(X, labels=None) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(X, DesignMatrix):
        return X.values, X.column_labels
    X = np.asarray(X, dtype=float)
    if labels is None:
        labels = tuple(f"x{j}" for j in range(X.shape[1]))
    return X, tuple(labels)


def fit_ols(X, y, labels=None) -> FittedModel:
    """Fit y on X by pivoted QR least squares.

    ``X`` may be a :class:`DesignMatrix` or a plain 2-D array (``labels``
    optional in that case). Raises ``TooFewRows`` when N <= K and
    ``RankDeficient`` naming the first dependent column otherwise.
    """
    X, labels = _unpack(X, labels)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n <= k:
        raise TooFewRows(f"{n} rows cannot identify {k} parameters")

    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = PIVOT_RTOL * float(np.max(np.linalg.norm(X, axis=0)))
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise RankDeficient(
            f"design has rank {rank} < {k}; column {labels[piv[rank]]!r} is "
            "linearly dependent on earlier columns"
        )
    beta_piv = scipy.linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_piv

    residuals = y - X @ beta
    ssr = float(residuals @ residuals)
    centred = y - y.mean()
    sst = float(centred @ centred)
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
    return FittedModel(
        coefficients=beta,
        labels=labels,
        residuals=residuals,
        n_obs=n,
        n_params=k,
        r_squared=r2,
        adj_r_squared=adj_r2,
        rmse=float(np.sqrt(ssr / (n - k))),
    )


def _cluster_index(cluster_ids) -> tuple[np.ndarray, int]:
    codes: dict = {}
    idx = np.empty(len(cluster_ids), dtype=np.intp)
    for i, cid in enumerate(cluster_ids):
        idx[i] = codes.setdefault(cid, len(codes))
    return idx, len(codes)


def cluster_robust_cov(fit: FittedModel, X, cluster_ids) -> ClusterRobustCov:
    """CR1 cluster-robust sandwich: c * (X'X)^-1 (sum_j X_j'e_j e_j'X_j) (X'X)^-1.

    The small-sample correction is c = (M/(M-1)) * ((N-1)/(N-K)). With all
    singleton clusters this reduces to the HC0 sandwich scaled by c.
    """
    X, labels = _unpack(X, fit.labels)
    n, k = X.shape
    if len(cluster_ids) != n:
        raise LengthMismatch(f"{len(cluster_ids)} cluster ids for {n} rows")
    idx, m = _cluster_index(cluster_ids)
    if m < 2:
        raise SingleCluster("cluster-robust covariance needs at least 2 clusters")

    r = scipy.linalg.qr(X, mode="r")[0][:k]
    rinv = scipy.linalg.solve_triangular(r, np.eye(k))
    xtx_inv = rinv @ rinv.T

    scores = X * fit.residuals[:, None]
    per_cluster = np.empty((m, k))
    for j in range(k):
        per_cluster[:, j] = np.bincount(idx, weights=scores[:, j], minlength=m)
    meat = per_cluster.T @ per_cluster

    c = (m / (m - 1)) * ((n - 1) / (n - k))
    cov = c * (xtx_inv @ meat @ xtx_inv)
    cov = (cov + cov.T) / 2.0
    return ClusterRobustCov(matrix=cov, labels=labels, n_clusters=m, correction=c)


def wald_test(fit: FittedModel, cov: ClusterRobustCov, coef_labels) -> WaldTest:
    """Joint Wald test that the named coefficients are all zero.

    Reported as F = (b' V^-1 b) / q against F(q, M-1).
    """
    coef_labels = list(coef_labels)
    if not coef_labels:
        raise EmptyInput("wald_test needs at least one coefficient label")
    try:
        pos = [fit.labels.index(lab) for lab in coef_labels]
    except ValueError as exc:
        raise UnknownLabel(str(exc)) from None
    b = fit.coefficients[pos]
    v = cov.matrix[np.ix_(pos, pos)]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            solved = scipy.linalg.solve(v, b, assume_a="sym")
    except (scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as exc:
        raise SingularSubmatrix(f"covariance submatrix is singular: {exc}") from None
    w = float(b @ solved)
    residual = float(np.linalg.norm(v @ solved - b))
    if not np.isfinite(w) or residual > 1e-8 * max(float(np.linalg.norm(b)), 1e-30):
        raise SingularSubmatrix("covariance submatrix is numerically singular")
    w = max(w, 0.0)
    df1 = len(pos)
    df2 = cov.n_clusters - 1
    f = w / df1
    return WaldTest(statistic=f, df1=df1, df2=df2, p_value=float(stats.f.sf(f, df1, df2)))


def _paired(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"paired vectors have shapes {x.shape} and {y.shape}")
    if x.size < 2:
        raise LengthMismatch("correlation needs at least 2 observations")
    return x, y


def pearson_corr(x, y) -> float:
    """Product-moment correlation."""
    x, y = _paired(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    return float(dx @ dy / np.sqrt(sxx * syy))


def average_ranks(x) -> np.ndarray:
    """Ranks 1..N with ties sharing the average rank."""
    return stats.rankdata(np.asarray(x, dtype=float), method="average")


def spearman_corr(x, y) -> float:
    """Pearson correlation of average-tie ranks."""
    x, y = _paired(x, y)
    return pearson_corr(average_ranks(x), average_ranks(y))


def rank_competition(scores) -> np.ndarray:
    """League-table ranks: 1 = highest score, ties share the minimum rank."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise EmptyInput("rank_competition needs at least one score")
    return stats.rankdata(-scores, method="min").astype(int)
