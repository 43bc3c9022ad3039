"""Thinning a single graph signal into independent synthetic copies.

The Gaussian and Poisson schemes split a convolution-closed draw into ``m``
mutually independent copies that recombine (by average or sum) to the source
signal.  Gaussian fission creates the two-piece selection/inference split
used for unknown-variance inference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import NodeSignal


@dataclass(frozen=True)
class ThinnedFamily:
    """``m`` synthetic signals plus the rule recovering the source.

    ``recombine`` is ``"average"`` for Gaussian copies (each carries the
    original mean) and ``"sum"`` for Poisson counts.
    """

    copies: tuple
    family: str
    weights: np.ndarray
    recombine: str

    @property
    def m(self) -> int:
        return len(self.copies)

    def recombined(self) -> NodeSignal:
        """Apply the recombination rule to recover the source signal."""
        stack = np.stack([c.values for c in self.copies])
        if self.recombine == "sum":
            vals = stack.sum(axis=0)
        else:
            vals = stack.mean(axis=0)
        return NodeSignal(values=vals, kind=self.copies[0].kind)


@dataclass(frozen=True)
class FissionPair:
    """Selection/inference pair from additive Gaussian fission.

    ``y_sel = y + z`` with user noise ``z ~ N(0, sigma0^2 I)`` and
    ``y_inf = y``.
    """

    y_sel: NodeSignal
    y_inf: NodeSignal
    sigma0: float

    @property
    def z(self) -> np.ndarray:
        return self.y_sel.values - self.y_inf.values


def _require_continuous(y: NodeSignal):
    if y.kind != "continuous":
        raise ValueError("expected a continuous signal")


def thin_gaussian(y: NodeSignal, sigma: float, m: int = 2, seed=None) -> ThinnedFamily:
    """Split a Gaussian signal into ``m`` independent copies.

    Per node, copy ``j`` is ``y_i + eps_j`` with joint noise covariance
    ``sigma^2 (m I - J)`` across copies, so each copy is marginally
    ``N(mu_i, m sigma^2)`` and the copies average back to ``y`` exactly.
    Sampled as ``eps_j = sqrt(m) (w_j - wbar)`` with ``w_j`` iid
    ``N(0, sigma^2)``, which has exactly that covariance.
    """
    _require_continuous(y)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if m < 2:
        raise ValueError("m must be >= 2")
    rng = np.random.default_rng(seed)
    n = len(y)
    w = rng.normal(0.0, sigma, size=(m, n))
    eps = np.sqrt(m) * (w - w.mean(axis=0))
    copies = tuple(NodeSignal(values=y.values + eps[j]) for j in range(m))
    return ThinnedFamily(
        copies=copies,
        family="gaussian",
        weights=np.full(m, 1.0 / m),
        recombine="average",
    )


def thin_gaussian_correlated(y: NodeSignal, Sigma, m: int = 2, seed=None) -> ThinnedFamily:
    """Split a correlated Gaussian signal ``Y ~ N(mu, Sigma)`` into ``m`` copies.

    Sequential scheme: draw ``Y1 | Y ~ N(Y, (m-1) Sigma)``, set the remainder
    ``(m Y - Y1)/(m-1)``, and iterate; each copy is marginally
    ``N(mu, m Sigma)`` and the copies are mutually independent.
    """
    _require_continuous(y)
    if m < 2:
        raise ValueError("m must be >= 2")
    Sigma = np.asarray(Sigma, dtype=float)
    n = len(y)
    if Sigma.shape != (n, n) or not np.allclose(Sigma, Sigma.T, atol=1e-10):
        raise ValueError("Sigma must be a symmetric n x n matrix")
    w, v = np.linalg.eigh(Sigma)
    if w.min() < -1e-10 * max(w.max(), 1.0):
        raise ValueError("Sigma is not positive semidefinite")
    root = v * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    copies = []
    rest = y.values.copy()
    for j in range(1, m):
        scale = np.sqrt((m - j) * m / (m - j + 1.0))
        draw = rest + scale * (root @ rng.standard_normal(n))
        copies.append(draw)
        rest = ((m - j + 1.0) * rest - draw) / (m - j)
    copies.append(rest)
    return ThinnedFamily(
        copies=tuple(NodeSignal(values=c) for c in copies),
        family="gaussian_correlated",
        weights=np.full(m, 1.0 / m),
        recombine="average",
    )


def thin_poisson(y: NodeSignal, m: int = 2, seed=None, weights=None) -> ThinnedFamily:
    """Split a Poisson count signal into ``m`` independent Poisson copies.

    Per node the copies are jointly ``Multinomial(y_i, weights)`` so they sum
    to ``y`` exactly on every draw.  Default weights split evenly.
    """
    if y.kind != "count":
        raise ValueError("expected a count signal")
    if m < 2:
        raise ValueError("m must be >= 2")
    if weights is None:
        weights = np.full(m, 1.0 / m)
    else:
        weights = np.asarray(weights, dtype=float)
        if len(weights) != m or np.any(weights <= 0):
            raise ValueError("weights must be m positive values")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
    rng = np.random.default_rng(seed)
    counts = y.values.astype(np.int64)
    draws = rng.multinomial(counts, weights)  # shape (n, m)
    copies = tuple(
        NodeSignal(values=draws[:, j].astype(float), kind="count") for j in range(m)
    )
    return ThinnedFamily(
        copies=copies, family="poisson", weights=weights, recombine="sum"
    )


def fission_gaussian(y: NodeSignal, sigma0: float, seed=None) -> FissionPair:
    """Additive Gaussian fission: ``y_sel = y + N(0, sigma0^2 I)``, ``y_inf = y``."""
    _require_continuous(y)
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, sigma0, size=len(y))
    return FissionPair(
        y_sel=NodeSignal(values=y.values + z),
        y_inf=y,
        sigma0=float(sigma0),
    )
