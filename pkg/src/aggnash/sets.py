"""Closed convex sets and Euclidean projection onto them.

Every set here is closed and convex by construction. ``project`` returns the
unique nearest point; ``contains`` measures the distance to that point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from aggnash.errors import ContractError, NonConvergenceError

DYKSTRA_TOL = 1e-12
DYKSTRA_MAX_SWEEPS = 10_000


def _vec(y, dim):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != dim:
        raise ContractError(f"expected a vector of dimension {dim}, got shape {y.shape}")
    return y


class ConvexSet:
    """Base class. Subclasses implement ``_project`` and ``dim``."""

    dim: int

    def project(self, y):
        return self._project(_vec(y, self.dim))

    def _project(self, y):
        raise NotImplementedError

    @property
    def bounded(self):
        return True

    def bounding_box(self):
        """Return (lo, hi) enclosing the set, or None when unbounded."""
        raise NotImplementedError

    def sample(self, rng, box=None):
        """Draw a point of the set.

        Bounded sets sample inside their bounding box and project; unbounded
        sets need an explicit ``box``.
        """
        bb = self.bounding_box() if box is None else box
        if bb is None:
            raise ContractError("unbounded set needs a sampling box")
        lo, hi = bb
        return self.project(rng.uniform(lo, hi))


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ContractError("Box bounds must be vectors of equal length")
        if np.any(lo > hi):
            raise ContractError("Box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    def _project(self, y):
        return np.minimum(np.maximum(y, self.lo), self.hi)

    def bounding_box(self):
        return (self.lo, self.hi) if self.bounded else None

    def sample(self, rng, box=None):
        if box is None and self.bounded:
            return rng.uniform(self.lo, self.hi)
        return super().sample(rng, box)

    def minimizing_vertex(self, c):
        """Vertex minimizing the linear function c^T x over the box."""
        return np.where(np.asarray(c) > 0, self.lo, self.hi)


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ContractError("Ball radius must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.shape[0]

    def _project(self, y):
        d = y - self.center
        dist = np.linalg.norm(d)
        if dist <= self.radius:
            return y.copy()
        return self.center + (self.radius / dist) * d

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def sample(self, rng, box=None):
        if box is not None:
            return super().sample(rng, box)
        g = rng.standard_normal(self.dim)
        g /= np.linalg.norm(g)
        return self.center + self.radius * rng.uniform() ** (1.0 / self.dim) * g


@dataclass(frozen=True, eq=False)
class Simplex(ConvexSet):
    """{x >= 0, sum(x) = scale} in ``dim`` dimensions."""

    dim: int
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ContractError("Simplex scale must be positive")
        if self.dim < 1:
            raise ContractError("Simplex dimension must be at least 1")

    def _on_simplex(self, y):
        tol = 4 * np.finfo(float).eps * self.scale * self.dim
        return bool(np.all(y >= 0) and abs(y.sum() - self.scale) <= tol)

    def _project(self, y):
        if self._on_simplex(y):
            return y.copy()
        # sort-and-threshold (Duchi et al. 2008)
        u = np.sort(y)[::-1]
        css = np.cumsum(u)
        k = np.arange(1, self.dim + 1)
        rho = np.nonzero(u * k > css - self.scale)[0][-1]
        theta = (css[rho] - self.scale) / (rho + 1.0)
        return np.maximum(y - theta, 0.0)

    def bounding_box(self):
        return np.zeros(self.dim), np.full(self.dim, self.scale)

    def sample(self, rng, box=None):
        if box is not None:
            return super().sample(rng, box)
        return self.scale * rng.dirichlet(np.ones(self.dim))

    def vertices(self):
        return self.scale * np.eye(self.dim)


@dataclass(frozen=True, eq=False)
class HalfspaceIntersection(ConvexSet):
    """{x : a_k^T x <= b_k for all k}, projected with Dykstra's algorithm.

    ``interior_point`` certifies nonemptiness and must satisfy every
    constraint. ``box`` optionally bounds sampling.
    """

    normals: np.ndarray
    offsets: np.ndarray
    interior_point: np.ndarray
    box: tuple | None = None
    tol: float = DYKSTRA_TOL
    max_sweeps: int = DYKSTRA_MAX_SWEEPS

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        p = np.atleast_1d(np.asarray(self.interior_point, dtype=float))
        if A.shape[0] != b.shape[0] or A.shape[1] != p.shape[0]:
            raise ContractError("halfspace normals, offsets and interior point disagree in shape")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            raise ContractError("halfspace normals must be nonzero")
        if np.any(A @ p > b):
            raise ContractError("interior_point violates a halfspace; set may be empty")
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "interior_point", p)
        if self.box is not None:
            lo, hi = self.box
            object.__setattr__(self, "box", (np.asarray(lo, float), np.asarray(hi, float)))

    @property
    def dim(self):
        return self.normals.shape[1]

    @property
    def bounded(self):
        return self.box is not None

    def bounding_box(self):
        return self.box

    def _violation(self, y):
        return float(np.max(self.normals @ y - self.offsets, initial=0.0))

    def _project(self, y):
        A, b = self.normals, self.offsets
        if self._violation(y) <= 0.0:
            return y.copy()
        sq = np.einsum("ij,ij->i", A, A)
        x = y.copy()
        incr = np.zeros((A.shape[0], y.shape[0]))
        for _ in range(self.max_sweeps):
            x_prev = x
            for k in range(A.shape[0]):
                z = x + incr[k]
                excess = A[k] @ z - b[k]
                xk = z - (excess / sq[k]) * A[k] if excess > 0 else z
                incr[k] = z - xk
                x = xk
            step = np.linalg.norm(x - x_prev)
            if step <= self.tol and self._violation(x) <= self.tol:
                return x
        raise NonConvergenceError(
            f"Dykstra projection did not converge in {self.max_sweeps} sweeps",
            last_iterate=x,
            residual=step,
        )


@dataclass(frozen=True, eq=False)
class WholeSpace(ConvexSet):
    dim: int

    @property
    def bounded(self):
        return False

    def _project(self, y):
        return y.copy()

    def bounding_box(self):
        return None


@dataclass(frozen=True, eq=False)
class Product(ConvexSet):
    """Cartesian product of sets, projected blockwise."""

    parts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ContractError("Product needs at least one factor")

    @property
    def dim(self):
        return sum(p.dim for p in self.parts)

    @property
    def bounded(self):
        return all(p.bounded for p in self.parts)

    def _slices(self):
        start = 0
        for p in self.parts:
            yield p, slice(start, start + p.dim)
            start += p.dim

    def _project(self, y):
        out = np.empty_like(y)
        for p, sl in self._slices():
            out[sl] = p.project(y[sl])
        return out

    def bounding_box(self):
        boxes = [p.bounding_box() for p in self.parts]
        if any(bb is None for bb in boxes):
            return None
        return np.concatenate([bb[0] for bb in boxes]), np.concatenate([bb[1] for bb in boxes])

    def sample(self, rng, box=None):
        if box is None:
            return np.concatenate([p.sample(rng) for p in self.parts])
        lo, hi = box
        return np.concatenate([p.sample(rng, (lo[sl], hi[sl])) for p, sl in self._slices()])


def project(set_: ConvexSet, y):
    """Euclidean projection of ``y`` onto ``set_``."""
    return set_.project(y)


def contains(set_: ConvexSet, y, tol=0.0):
    """True iff the distance from ``y`` to the set is at most ``tol``."""
    if tol < 0:
        raise ContractError("tol must be nonnegative")
    y = _vec(y, set_.dim)
    return bool(np.linalg.norm(y - set_.project(y)) <= tol)


def distance(set_: ConvexSet, y):
    y = _vec(y, set_.dim)
    return float(np.linalg.norm(y - set_.project(y)))
