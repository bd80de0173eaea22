"""Dense correspondence: score matrices, Sinkhorn normalization with an
optional dustbin, mutual-argmax match extraction, and a matching NLL diagnostic.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NonFiniteScores,
    ZeroProbabilityWarning,
)
from .rgbd import FeatureCloud

_PROB_FLOOR = 1e-12
# beyond this score magnitude the factored kernel update may overflow float64
_FAST_KERNEL_LIMIT = 80.0


def score_matrix(prototypes: Union[FeatureCloud, np.ndarray],
                 queries: Union[FeatureCloud, np.ndarray],
                 temperature: float = 0.05) -> np.ndarray:
    """Pairwise descriptor inner products divided by the temperature."""
    dp = prototypes.descriptors if isinstance(prototypes, FeatureCloud) else np.asarray(prototypes, dtype=float)
    dq = queries.descriptors if isinstance(queries, FeatureCloud) else np.asarray(queries, dtype=float)
    if dp.ndim != 2 or dq.ndim != 2 or dp.shape[1] != dq.shape[1]:
        raise DimensionMismatch(f"descriptor dims {dp.shape} vs {dq.shape}")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return (dp @ dq.T) / temperature


def sinkhorn(scores: np.ndarray, iterations: int = 50, use_dustbin: bool = True,
             dustbin_score: float = 0.0) -> np.ndarray:
    """Log-domain Sinkhorn normalization of a score matrix.

    Without a dustbin the exponentiated output converges to a doubly
    stochastic matrix (square case). With a dustbin, an extra row and column
    absorb unmatched mass: real rows and columns sum to 1 and the dustbin
    row/column carry the remaining mass on the augmented matrix.
    """
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[0] == 0 or s.shape[1] == 0:
        raise ValueError(f"scores must be a non-empty 2D matrix, got {s.shape}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not np.all(np.isfinite(s)):
        raise NonFiniteScores("score matrix contains non-finite entries")
    fast = bool(np.abs(s).max() <= _FAST_KERNEL_LIMIT and
                abs(dustbin_score) <= _FAST_KERNEL_LIMIT)
    if use_dustbin:
        out = _sinkhorn_dustbin(s, float(dustbin_score), iterations, fast)
        if not np.all(np.isfinite(out)):
            out = _sinkhorn_dustbin(s, float(dustbin_score), iterations, False)
    else:
        m, n = s.shape
        # rectangular matrices without a dustbin cannot satisfy all-ones
        # marginals on both sides; scale the longer side to balance mass
        row_marginal = np.ones(m) * (min(m, n) / m if m > n else 1.0)
        col_marginal = np.ones(n) * (min(m, n) / n if n > m else 1.0)
        out = _sinkhorn_plain(s, np.log(row_marginal), np.log(col_marginal),
                              iterations, fast)
        if not np.all(np.isfinite(out)):
            out = _sinkhorn_plain(s, np.log(row_marginal), np.log(col_marginal),
                                  iterations, False)
    return out


def _sinkhorn_plain(s: np.ndarray, log_a: np.ndarray, log_b: np.ndarray,
                    iterations: int, fast: bool) -> np.ndarray:
    """Alternating potential updates u, v in log space.

    The fast path evaluates each log-sum-exp through the exponentiated kernel
    (valid while scores are moderate); the fallback uses fused logsumexp.
    """
    u = np.zeros(len(log_a))
    v = np.zeros(len(log_b))
    if fast:
        kernel = np.exp(s)
        for _ in range(iterations):
            u = log_a - np.log(kernel @ np.exp(v))
            v = log_b - np.log(kernel.T @ np.exp(u))
    else:
        for _ in range(iterations):
            u = log_a - logsumexp(s + v[None, :], axis=1)
            v = log_b - logsumexp(s + u[:, None], axis=0)
    return np.exp(s + u[:, None] + v[None, :])


def _sinkhorn_dustbin(s: np.ndarray, dustbin_score: float, iterations: int,
                      fast: bool) -> np.ndarray:
    """Dustbin-augmented Sinkhorn with an exact per-sweep dustbin solve.

    Marginals: real rows and columns carry mass 1; the dustbin row carries n
    and the dustbin column m. Relaxing the two dustbin potentials only through
    alternating normalization leaves a slowly drifting slack mode (corner mass
    vs. matched mass), so after each sweep the pair is solved exactly: with
    x = e^{u_d}, y = e^{v_d}, g = e^{dustbin_score} (the corner weight),
    A = sum_j e^{s_dj + v_j}, B = sum_i e^{u_i + s_id}, the marginal equations
    x (A + g y) = n and y (B + g x) = m reduce to a quadratic in y with a
    single positive root.
    """
    m, n = s.shape
    work = np.full((m + 1, n + 1), dustbin_score)
    work[:m, :n] = s
    u = np.zeros(m + 1)
    v = np.zeros(n + 1)
    kernel = np.exp(work) if fast else None

    for _ in range(iterations):
        if fast:
            u[:m] = -np.log(kernel[:m] @ np.exp(v))
            v[:n] = -np.log(kernel[:m, :n].T @ np.exp(u[:m])
                            + kernel[m, :n] * math.exp(u[m]))
        else:
            u[:m] = -logsumexp(work[:m] + v[None, :], axis=1)
            # the column update must also see the dustbin row
            v[:n] = -np.logaddexp(logsumexp(work[:m, :n] + u[:m, None], axis=0),
                                  work[m, :n] + u[m])
        log_a = logsumexp(work[m, :n] + v[:n])
        log_b = logsumexp(u[:m] + work[:m, n])
        if log_a + log_b < 600.0 and abs(dustbin_score) < 250.0:
            big_a = math.exp(log_a)
            big_b = math.exp(log_b)
            g = math.exp(dustbin_score)
            lin = big_a * big_b + g * (n - m)
            y = (-lin + math.sqrt(lin * lin + 4.0 * big_b * g * m * big_a)) / (2.0 * big_b * g)
            u[m] = math.log(n) - math.log(big_a + g * y)
            v[n] = math.log(y)
        else:
            # corner mass is negligible against the exponentially large sums
            u[m] = math.log(n) - log_a
            v[n] = math.log(m) - log_b
    return np.exp(work + u[:, None] + v[None, :])


@dataclass(frozen=True)
class MatchSet:
    """One-to-one matches between prototype and query indices with confidences."""

    prototype_indices: np.ndarray
    query_indices: np.ndarray
    confidences: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.prototype_indices, dtype=int).reshape(-1)
        qi = np.asarray(self.query_indices, dtype=int).reshape(-1)
        conf = np.asarray(self.confidences, dtype=float).reshape(-1)
        if not (len(pi) == len(qi) == len(conf)):
            raise ValueError("match arrays have different lengths")
        if len(np.unique(pi)) != len(pi) or len(np.unique(qi)) != len(qi):
            raise ValueError("matches must be one-to-one")
        if len(conf) and (conf.min() < 0 or conf.max() > 1):
            raise ValueError("confidences must lie in [0, 1]")
        object.__setattr__(self, "prototype_indices", pi)
        object.__setattr__(self, "query_indices", qi)
        object.__setattr__(self, "confidences", conf)

    def __len__(self) -> int:
        return len(self.prototype_indices)

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "confidence"])
            for i, j, c in zip(self.prototype_indices, self.query_indices,
                               self.confidences):
                writer.writerow([int(i), int(j), repr(float(c))])

    @classmethod
    def from_csv(cls, path) -> "MatchSet":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([int(r["i"]) for r in rows]),
                   np.array([int(r["j"]) for r in rows]),
                   np.array([float(r["confidence"]) for r in rows]))


def extract_matches(assignment: np.ndarray, confidence_threshold: float = 0.2,
                    has_dustbin: bool = False) -> MatchSet:
    """Mutual row/column argmax pairs above the confidence threshold.

    With has_dustbin the last row and column compete in the argmax but can
    never be part of a match.
    """
    a = np.asarray(assignment, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"assignment must be 2D, got {a.shape}")
    m, n = a.shape
    m_real = m - 1 if has_dustbin else m
    n_real = n - 1 if has_dustbin else n
    if m_real <= 0 or n_real <= 0:
        return MatchSet(np.empty(0, int), np.empty(0, int), np.empty(0))
    row_arg = a.argmax(axis=1)
    col_arg = a.argmax(axis=0)
    pi, qi, conf = [], [], []
    for i in range(m_real):
        j = int(row_arg[i])
        if j < n_real and int(col_arg[j]) == i and a[i, j] >= confidence_threshold:
            pi.append(i)
            qi.append(j)
            conf.append(min(max(a[i, j], 0.0), 1.0))
    return MatchSet(np.array(pi, int), np.array(qi, int), np.array(conf, float))


def matching_nll_loss(assignment: np.ndarray, gt_pairs) -> float:
    """Mean negative log assignment probability over ground-truth cells.

    Probabilities are clamped to [1e-12, 1]; hitting the floor raises a
    ZeroProbabilityWarning instead of failing.
    """
    a = np.asarray(assignment, dtype=float)
    pairs = np.asarray(gt_pairs, dtype=int).reshape(-1, 2)
    if len(pairs) == 0:
        raise ValueError("gt_pairs must be non-empty")
    if (pairs < 0).any() or pairs[:, 0].max() >= a.shape[0] or pairs[:, 1].max() >= a.shape[1]:
        raise IndexOutOfRange("ground-truth pair outside assignment bounds")
    probs = a[pairs[:, 0], pairs[:, 1]]
    if (probs < _PROB_FLOOR).any():
        warnings.warn("assignment probability clamped at 1e-12",
                      ZeroProbabilityWarning, stacklevel=2)
    probs = np.clip(probs, _PROB_FLOOR, 1.0)
    return float(-np.log(probs).mean())


def save_assignment(path, assignment: np.ndarray) -> None:
    """Debug dump of a dense assignment matrix (binary with a shape header)."""
    np.save(Path(path), np.asarray(assignment, dtype=float))


def load_assignment(path) -> np.ndarray:
    return np.load(Path(path))
