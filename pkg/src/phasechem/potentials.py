"""Scalar nonlinearities of the model and the standalone inequality oracles.

Houses the logarithmic double-well potential and its monotone part, the
negative-part pair (gamma, gamma_hat) used for the log-of-sigma bookkeeping,
the reaction-coefficient family alpha(phi, sigma), the Fenchel-Young gap of
the product estimate, and a sampling checker for square-root Lipschitz
continuity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainViolation, NegativeSigma, OutOfDomain

__all__ = [
    "AlphaSpec",
    "ModelParams",
    "F",
    "F_prime",
    "beta",
    "beta_prime",
    "gamma",
    "gamma_hat",
    "alpha_eval",
    "fenchel_gap",
    "check_sqrt_lipschitz",
    "SqrtLipschitzReport",
]


def _check_open_unit(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if np.any(np.abs(arr) >= 1.0):
        bad = float(arr.flat[int(np.argmax(np.abs(arr)))])
        raise OutOfDomain(f"phase value {bad} outside the open interval (-1, 1)")
    return arr


def F(r, lam: float = 0.0):
    """Logarithmic double-well potential, lam-concave quadratic included.

    F(r) = (1+r) ln(1+r) + (1-r) ln(1-r) - (lam/2) r^2 on (-1, 1).
    """
    arr = _check_open_unit(r)
    out = (1.0 + arr) * np.log1p(arr) + (1.0 - arr) * np.log1p(-arr) - 0.5 * lam * arr**2
    return out if isinstance(r, np.ndarray) else float(out)


def beta(r):
    """Monotone part of F': ln(1+r) - ln(1-r); odd and strictly increasing."""
    arr = _check_open_unit(r)
    out = np.log1p(arr) - np.log1p(-arr)
    return out if isinstance(r, np.ndarray) else float(out)


def beta_prime(r):
    """beta'(r) = 2 / (1 - r^2) >= 2, the convexity modulus of the log terms."""
    arr = _check_open_unit(r)
    out = 2.0 / (1.0 - arr**2)
    return out if isinstance(r, np.ndarray) else float(out)


def F_prime(r, lam: float = 0.0):
    """F'(r) = beta(r) - lam * r."""
    arr = _check_open_unit(r)
    out = np.log1p(arr) - np.log1p(-arr) - lam * arr
    return out if isinstance(r, np.ndarray) else float(out)


def gamma(r):
    """-ln(1 + r_-) with r_- = max(-r, 0): zero for r >= 0, 1-Lipschitz, <= 0."""
    rm = np.maximum(-np.asarray(r, dtype=float), 0.0)
    out = -np.log1p(rm)
    return out if isinstance(r, np.ndarray) else float(out)


def gamma_hat(r):
    """Primitive of gamma vanishing on r >= 0: (1 + r_-) ln(1 + r_-) - r_-."""
    rm = np.maximum(-np.asarray(r, dtype=float), 0.0)
    out = (1.0 + rm) * np.log1p(rm) - rm
    return out if isinstance(r, np.ndarray) else float(out)


def fenchel_gap(r: float, w, w_ref, u, u_ref):
    """Slack of the product estimate

        (w - w_ref)(u - u_ref)
          <= max{1/(4r), 4r} * (u_ref |w - w_ref|^2
                                + u - u_ref - u_ref (ln u - ln u_ref)),

    valid for |w|, |w_ref| < r and u, u_ref > 0.  Returns RHS - LHS, which is
    nonnegative on the admissible set.  Accepts scalars or same-shape arrays
    in the last four arguments.
    """
    if not r > 0.0:
        raise DomainViolation(f"r must be positive, got {r}")
    w = np.asarray(w, dtype=float)
    w_ref = np.asarray(w_ref, dtype=float)
    u = np.asarray(u, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    if np.any(np.abs(w) >= r) or np.any(np.abs(w_ref) >= r):
        raise DomainViolation("w arguments must lie strictly inside (-r, r)")
    if np.any(u <= 0.0) or np.any(u_ref <= 0.0):
        raise DomainViolation("u arguments must be strictly positive")
    factor = max(1.0 / (4.0 * r), 4.0 * r)
    x = np.log(u) - np.log(u_ref)
    # u - u_ref - u_ref*(ln u - ln u_ref) rewritten to avoid cancellation
    kl = u_ref * (np.expm1(x) - x)
    gap = factor * (u_ref * (w - w_ref) ** 2 + kl) - (w - w_ref) * (u - u_ref)
    return gap if gap.ndim else float(gap)


def _default_h(r: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + r)


@dataclass(frozen=True)
class AlphaSpec:
    """Reaction coefficient alpha(phi, sigma).

    Two variants:

    * ``constant``: alpha == value everywhere; the declared bounds are tight
      and two-sided, so runs that rely on a uniform bracket should use it.
    * ``logistic``: alpha = h(phi) * (1 - ell * sigma**p) with p in (0, 1],
      ell > 0 and h the nondecreasing interpolation with h(-1) = 0,
      h(1) = 1 (default h(r) = (1+r)/2, or a user table).  This variant is
      unbounded below as sigma grows, so the declared lower bound is only
      valid on the configured sampling box sigma <= sigma_box; the positive
      part is globally bounded by 1.

    ``bounds`` returns the declared (alpha_min, alpha_max) on the box
    phi in [-1, 1], sigma in [0, sigma_box].
    """

    kind: str
    value: float = 0.0
    ell: float = 1.0
    p: float = 1.0
    h_nodes: tuple[float, ...] | None = None
    h_values: tuple[float, ...] | None = None
    sigma_box: float = 10.0

    def __post_init__(self):
        if self.kind not in ("constant", "logistic"):
            raise ValueError(f"unknown alpha variant {self.kind!r}")
        if self.kind == "logistic":
            if not self.ell > 0.0:
                raise ValueError("logistic alpha needs ell > 0")
            if not 0.0 < self.p <= 1.0:
                raise ValueError("logistic alpha needs p in (0, 1]")
            if (self.h_nodes is None) != (self.h_values is None):
                raise ValueError("h table needs both nodes and values")
            if self.h_nodes is not None:
                nodes = np.asarray(self.h_nodes, dtype=float)
                vals = np.asarray(self.h_values, dtype=float)
                if nodes.size != vals.size or nodes.size < 2:
                    raise ValueError("h table needs matching nodes/values, >= 2 points")
                if np.any(np.diff(nodes) <= 0) or np.any(np.diff(vals) < 0):
                    raise ValueError("h table must be strictly sorted and nondecreasing")
                if not (nodes[0] == -1.0 and nodes[-1] == 1.0):
                    raise ValueError("h table must span [-1, 1]")
                if not (vals[0] == 0.0 and vals[-1] == 1.0):
                    raise ValueError("h table must satisfy h(-1)=0 and h(1)=1")
        if not self.sigma_box > 0.0:
            raise ValueError("sigma_box must be positive")

    @classmethod
    def constant(cls, value: float) -> "AlphaSpec":
        return cls(kind="constant", value=float(value))

    @classmethod
    def logistic(
        cls,
        ell: float = 1.0,
        p: float = 1.0,
        h_table: tuple[tuple[float, ...], tuple[float, ...]] | None = None,
        sigma_box: float = 10.0,
    ) -> "AlphaSpec":
        nodes, vals = (None, None) if h_table is None else h_table
        return cls(
            kind="logistic",
            ell=float(ell),
            p=float(p),
            h_nodes=None if nodes is None else tuple(float(x) for x in nodes),
            h_values=None if vals is None else tuple(float(x) for x in vals),
            sigma_box=float(sigma_box),
        )

    def h(self, phi: np.ndarray) -> np.ndarray:
        if self.h_nodes is None:
            return _default_h(phi)
        return np.interp(phi, self.h_nodes, self.h_values)

    def bounds(self) -> tuple[float, float]:
        if self.kind == "constant":
            return (self.value, self.value)
        factor_min = 1.0 - self.ell * self.sigma_box**self.p
        return (min(0.0, factor_min), 1.0)

    def __call__(self, phi, sigma):
        return alpha_eval(self, phi, sigma)


def alpha_eval(spec: AlphaSpec, phi, sigma):
    """Evaluate alpha(phi, sigma); sigma must be nonnegative, |phi| <= 1."""
    phi_arr = np.asarray(phi, dtype=float)
    sig_arr = np.asarray(sigma, dtype=float)
    if np.any(sig_arr < 0.0):
        raise NegativeSigma("alpha evaluated at a negative concentration")
    if np.any(np.abs(phi_arr) > 1.0 + 1e-14):
        raise OutOfDomain("alpha evaluated at |phi| > 1")
    if spec.kind == "constant":
        out = np.full(np.broadcast(phi_arr, sig_arr).shape, spec.value)
    else:
        out = np.asarray(
            spec.h(np.clip(phi_arr, -1.0, 1.0)) * (1.0 - spec.ell * sig_arr**spec.p)
        )
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters of the coupled system.

    chi is the chemotactic coupling strength (nonnegative here; chi = 0
    decouples the flows and is used by the dissipation checks), lam the
    expansive coefficient of the double well, eps the strength of the
    quadratic regularization of the nutrient energy, alpha the reaction
    coefficient, and delta_safe the clamp distance that Newton iterates keep
    from the potential's singularities at +-1.
    """

    chi: float
    lam: float = 0.0
    eps: float = 0.0
    alpha: AlphaSpec = AlphaSpec.constant(0.0)
    delta_safe: float = 1e-6

    def __post_init__(self):
        if not np.isfinite(self.chi) or self.chi < 0.0:
            raise ValueError(f"chi must be finite and >= 0, got {self.chi}")
        if not self.lam >= 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.eps >= 0.0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if not 0.0 < self.delta_safe < 0.5:
            raise ValueError(f"delta_safe must be in (0, 0.5), got {self.delta_safe}")


@dataclass(frozen=True)
class SqrtLipschitzReport:
    """Sampled constants for |f(x)-f(y)| <= C |sqrt(x)-sqrt(y)| on [0, cap]."""

    lipschitz_estimate: float
    growth_estimate: float
    n_pairs: int
    all_finite: bool


def check_sqrt_lipschitz(
    f: Callable[[np.ndarray], np.ndarray],
    cap: float,
    n_pairs: int = 20000,
    seed: int = 0,
) -> SqrtLipschitzReport:
    """Estimate the square-root Lipschitz constant of f on [0, cap] by sampling.

    Draws uniform pairs plus nearly-coincident pairs (which probe the local
    slope 2 xi f'(xi^2) that controls the sharp constant) and pairs against
    zero (which probe the growth bound |f| <= C (1 + sqrt(theta))).  Report
    only; a function that is not square-root Lipschitz shows up as a constant
    that grows with cap.
    """
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, cap, n_pairs)
    eta = rng.uniform(0.0, cap, n_pairs)
    close = theta * (1.0 + 1e-4) + 1e-12
    zeros = np.zeros(n_pairs)
    a = np.concatenate([theta, theta, theta])
    b = np.concatenate([eta, np.minimum(close, cap), zeros])
    fa = np.asarray(f(a), dtype=float)
    fb = np.asarray(f(b), dtype=float)
    denom = np.abs(np.sqrt(a) - np.sqrt(b))
    mask = denom > 0.0
    ratios = np.abs(fa[mask] - fb[mask]) / denom[mask]
    growth = np.abs(fa) / (1.0 + np.sqrt(a))
    finite = bool(np.all(np.isfinite(fa)) and np.all(np.isfinite(fb)))
    lip = float(np.max(ratios)) if ratios.size else 0.0
    return SqrtLipschitzReport(
        lipschitz_estimate=lip,
        growth_estimate=float(np.max(growth)),
        n_pairs=int(mask.sum()),
        all_finite=finite,
    )
