"""Parameter-varying storage functions and the dissipation residual.

A storage family is a monomial basis with a compact coefficient box, so
``lam(theta, x) = theta . phi(x)`` is linear in theta and polynomial
(hence continuous) in x; compactness and continuity therefore hold by
construction.  Selected coefficients can be pinned, which is how the
``lam(theta, xs) = 0`` stability condition is enforced at the type level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from empc import kernels
from empc.errors import DomainError
from empc.model import StageCost, SteadyState

_BOX_TOL = 1e-9


@dataclass(frozen=True)
class StorageFamily:
    """Monomial-basis storage function with coefficient box and pins."""

    exponents: np.ndarray  # (p, n) int
    theta_lo: np.ndarray  # (p,)
    theta_hi: np.ndarray  # (p,)
    pinned: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if np.any(self.theta_lo > self.theta_hi):
            raise ValueError("theta_lo must be <= theta_hi")
        if not (np.all(np.isfinite(self.theta_lo)) and np.all(np.isfinite(self.theta_hi))):
            raise ValueError("theta box must be compact (finite bounds)")
        for i, v in self.pinned:
            if not 0 <= i < self.p:
                raise ValueError(f"pinned index {i} out of range")
            if not self.theta_lo[i] - _BOX_TOL <= v <= self.theta_hi[i] + _BOX_TOL:
                raise ValueError(f"pinned value {v} outside bounds at index {i}")

    @staticmethod
    def create(exponents, theta_lo, theta_hi, pinned=()) -> "StorageFamily":
        E = np.array(exponents, dtype=np.int64)
        E.flags.writeable = False
        lo = np.array(theta_lo, dtype=float)
        hi = np.array(theta_hi, dtype=float)
        lo.flags.writeable = False
        hi.flags.writeable = False
        return StorageFamily(E, lo, hi, tuple((int(i), float(v)) for i, v in pinned))

    @staticmethod
    def symmetric(exponents, bound: float, pinned=()) -> "StorageFamily":
        """Box [-bound, bound] on every coefficient."""
        E = np.array(exponents, dtype=np.int64)
        p = E.shape[0]
        return StorageFamily.create(E, np.full(p, -bound), np.full(p, bound), pinned)

    @property
    def p(self) -> int:
        return self.exponents.shape[0]

    @property
    def n(self) -> int:
        return self.exponents.shape[1]

    def contains(self, theta, tol: float = _BOX_TOL) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.p,):
            return False
        if np.any(theta < self.theta_lo - tol) or np.any(theta > self.theta_hi + tol):
            return False
        return all(abs(theta[i] - v) <= tol for i, v in self.pinned)

    def apply_pins(self, theta) -> np.ndarray:
        out = np.array(theta, dtype=float)
        for i, v in self.pinned:
            out[i] = v
        return out

    def default_theta(self) -> np.ndarray:
        """All-zero coefficients, clipped into the box, pins applied."""
        return self.apply_pins(np.clip(np.zeros(self.p), self.theta_lo, self.theta_hi))


def full_quadratic_basis() -> np.ndarray:
    """Two-state basis (x1^2, x2^2, x1*x2, x1, x2, 1), in that order."""
    return np.array([(2, 0), (0, 2), (1, 1), (1, 0), (0, 1), (0, 0)], dtype=np.int64)


def quartic_x1_basis() -> np.ndarray:
    """Two-state basis (x1^4, x1^3, x1^2, x1, 1), constant on {x1 = 0}."""
    return np.array([(4, 0), (3, 0), (2, 0), (1, 0), (0, 0)], dtype=np.int64)


@dataclass(frozen=True)
class RhoFunction:
    """Strictness margin rho(v) = weight * |v|_2^2; weight 0 degenerates
    to the non-strict dissipation inequality."""

    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("rho weight must be nonnegative")

    def eval(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return self.weight * float(v @ v)

    def grad(self, v) -> np.ndarray:
        return 2.0 * self.weight * np.asarray(v, dtype=float)


def features(fam: StorageFamily, x) -> np.ndarray:
    """Monomial feature vector phi(x), so lam(theta, x) = theta . phi(x)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (fam.n,):
        raise ValueError(f"state must have shape ({fam.n},), got {x.shape}")
    phi, _ = kernels.monomial_batch(fam.exponents, x.reshape(1, fam.n))
    return phi[0]


def features_jacobian(fam: StorageFamily, x) -> np.ndarray:
    """d phi / d x, shape (p, n)."""
    x = np.asarray(x, dtype=float)
    _, dphi = kernels.monomial_batch(fam.exponents, x.reshape(1, fam.n))
    return dphi[0]


def storage_eval(fam: StorageFamily, theta, x) -> float:
    """lam(theta, x) = theta . phi(x); theta must lie in the box with pins."""
    theta = np.asarray(theta, dtype=float)
    if not fam.contains(theta):
        raise DomainError("theta outside its box or pinned coordinates violated")
    return float(theta @ features(fam, x))


def dissipation_residual(fam: StorageFamily, rho: RhoFunction, cost: StageCost,
                         steady: SteadyState, theta, theta_plus, x, u,
                         xnext) -> float:
    """Strict controlled-dissipation residual at one transition.

    Returns ``lam(theta+, xnext) - lam(theta, x) - l(x, u) + l(xs, us)
    + rho(x - xs)``; the inequality holds iff the result is <= 0.  The
    caller is responsible for xnext = f(x, u); it is not re-checked.
    """
    x = np.asarray(x, dtype=float)
    lam_next = storage_eval(fam, theta_plus, xnext)
    lam_here = storage_eval(fam, theta, x)
    return (lam_next - lam_here - cost.eval(x, u) + steady.ls
            + rho.eval(x - steady.xs))


def assumption6_structural(fam: StorageFamily, xs) -> bool:
    """True iff lam(theta, xs) = 0 for every theta in the box, by structure.

    Holds when every unpinned basis monomial vanishes at xs and the pinned
    contributions sum to zero there.
    """
    phi = features(fam, xs)
    pinned_idx = {i for i, _ in fam.pinned}
    free_ok = all(phi[i] == 0.0 for i in range(fam.p) if i not in pinned_idx)
    pin_sum = sum(v * phi[i] for i, v in fam.pinned)
    return free_ok and abs(pin_sum) == 0.0
