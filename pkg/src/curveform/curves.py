"""Planar parametric curves in linear-regression form ``c(s) = G(s) @ xi``.

Two basis families are supported.

Fourier (``m`` harmonics, ``H = 2m + 1``)
    ``G(s)`` is ``[g_1, ..., g_m, I_2]`` where each ``g_h`` is the 2x4 block::

        [[cos 2pi h s, sin 2pi h s, 0,           0          ],
         [0,           0,           cos 2pi h s, sin 2pi h s]]

    so ``xi`` is ordered ``(ax_1, bx_1, ay_1, by_1, ..., ax_m, bx_m, ay_m, by_m, x0, y0)``.

Polynomial (degree ``d``, ``H = d + 1``)
    ``G(s) = [1, s, ..., s^d] kron I_2`` so ``xi`` is ``(x_0, y_0, x_1, y_1, ...)``
    with ``(x_k, y_k)`` the coefficient of ``s^k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from curveform.errors import InsufficientSamples, InvalidArgument, SingularSystem

FOURIER = "fourier"
POLYNOMIAL = "polynomial"

# relative singular-value threshold used for every rank decision
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class BasisFamily:
    kind: str
    order: int

    def __post_init__(self):
        if self.kind not in (FOURIER, POLYNOMIAL):
            raise InvalidArgument(f"unknown basis family {self.kind!r}")
        if isinstance(self.order, bool) or int(self.order) != self.order:
            raise InvalidArgument(f"order must be an integer, got {self.order!r}")
        if self.kind == FOURIER and self.order < 1:
            raise InvalidArgument("Fourier family needs at least one harmonic")
        if self.kind == POLYNOMIAL and self.order < 0:
            raise InvalidArgument("polynomial degree must be nonnegative")
        object.__setattr__(self, "order", int(self.order))

    @classmethod
    def fourier(cls, harmonics: int) -> "BasisFamily":
        return cls(FOURIER, harmonics)

    @classmethod
    def polynomial(cls, degree: int) -> "BasisFamily":
        return cls(POLYNOMIAL, degree)

    @property
    def H(self) -> int:
        """Number of scalar basis functions per coordinate."""
        if self.kind == FOURIER:
            return 2 * self.order + 1
        return self.order + 1

    @property
    def n_coefficients(self) -> int:
        return 2 * self.H

    def __str__(self):
        if self.kind == FOURIER:
            return f"fourier(harmonics={self.order})"
        return f"polynomial(degree={self.order})"


def _check_s(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise InvalidArgument(f"curve parameter must lie in [0, 1], got {s}")
    return s


def basis_rows(family: BasisFamily, s) -> np.ndarray:
    """Vectorised :func:`basis_row`: returns shape ``(len(s), 2, 2H)``."""
    s = np.atleast_1d(_check_s(s))
    out = np.zeros((s.size, 2, family.n_coefficients))
    if family.kind == FOURIER:
        m = family.order
        angle = 2.0 * np.pi * np.outer(s, np.arange(1, m + 1))
        c, sn = np.cos(angle), np.sin(angle)
        out[:, 0, 0 : 4 * m : 4] = c
        out[:, 0, 1 : 4 * m : 4] = sn
        out[:, 1, 2 : 4 * m : 4] = c
        out[:, 1, 3 : 4 * m : 4] = sn
        out[:, 0, -2] = 1.0
        out[:, 1, -1] = 1.0
    else:
        powers = s[:, None] ** np.arange(family.order + 1)
        out[:, 0, 0::2] = powers
        out[:, 1, 1::2] = powers
    return out


def basis_row(family: BasisFamily, s: float) -> np.ndarray:
    """The 2 x 2H basis matrix ``G(s)``."""
    if np.ndim(s) != 0:
        raise InvalidArgument("basis_row takes a scalar parameter; use basis_rows")
    return basis_rows(family, s)[0]


def _as_xi(family: BasisFamily, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (family.n_coefficients,):
        raise InvalidArgument(
            f"{family} expects {family.n_coefficients} coefficients, got shape {xi.shape}"
        )
    return xi


def evaluate_curve(family: BasisFamily, xi, s) -> np.ndarray:
    """Point(s) on the curve. Scalar ``s`` gives shape (2,), array gives (N, 2)."""
    xi = _as_xi(family, xi)
    pts = basis_rows(family, s) @ xi
    return pts[0] if np.ndim(s) == 0 else pts


@dataclass(frozen=True)
class ParametricCurve:
    family: BasisFamily
    xi: np.ndarray = field(repr=False)

    def __post_init__(self):
        xi = _as_xi(self.family, self.xi).copy()
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    def __call__(self, s) -> np.ndarray:
        return evaluate_curve(self.family, self.xi, s)

    @property
    def H(self) -> int:
        return self.family.H

    def bounding_box(self, samples: int = 512) -> tuple[np.ndarray, np.ndarray]:
        pts = self(np.linspace(0.0, 1.0, samples))
        return pts.min(axis=0), pts.max(axis=0)


def assign_parameters(n: int, include_endpoint: bool = False) -> np.ndarray:
    """Evenly spaced curve parameters for ``n`` agents.

    The default ``s_i = (i - 1) / n`` never reaches ``s = 1``, which is what a
    closed curve wants. ``include_endpoint=True`` spreads agents over ``[0, 1]``
    inclusive (``(i - 1) / (n - 1)``) for open curves.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidArgument(f"agent count must be a positive integer, got {n!r}")
    n = int(n)
    if include_endpoint and n > 1:
        return np.arange(n) / (n - 1)
    return np.arange(n) / n


def bezier_to_polynomial(control_points, degree: int = 3) -> ParametricCurve:
    """Expand a cubic Bezier curve into monomial coefficients.

    Higher-degree coefficients beyond 3 are zero, so the result can be used
    with any polynomial family of degree >= 3.
    """
    if isinstance(degree, bool) or int(degree) != degree or degree < 3:
        raise InvalidArgument(f"target degree must be an integer >= 3, got {degree!r}")
    o = np.asarray(control_points, dtype=float)
    if o.shape != (4, 2):
        raise InvalidArgument(f"need four planar control points, got shape {o.shape}")
    o1, o2, o3, o4 = o
    mono = np.zeros((int(degree) + 1, 2))
    mono[0] = o1
    mono[1] = 3.0 * (o2 - o1)
    mono[2] = 3.0 * (o1 - 2.0 * o2 + o3)
    mono[3] = o4 - o1 + 3.0 * (o2 - o3)
    return ParametricCurve(BasisFamily.polynomial(degree), mono.ravel())


def bezier_point(control_points, s) -> np.ndarray:
    """Direct cubic Bernstein evaluation (no monomial expansion)."""
    o = np.asarray(control_points, dtype=float)
    s = np.asarray(s, dtype=float)[..., None]
    t = 1.0 - s
    return t**3 * o[0] + 3 * s * t**2 * o[1] + 3 * s**2 * t * o[2] + s**3 * o[3]


@dataclass(frozen=True)
class SampleSet:
    s_values: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        s = _check_s(np.atleast_1d(self.s_values)).astype(float)
        p = np.asarray(self.points, dtype=float).reshape(-1, 2) if np.size(self.points) else np.zeros((0, 2))
        if p.shape[0] != s.shape[0]:
            raise InvalidArgument(f"{s.shape[0]} parameters but {p.shape[0]} points")
        if not np.all(np.isfinite(p)):
            raise InvalidArgument("sample points must be finite")
        object.__setattr__(self, "s_values", s)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.s_values.shape[0]

    @classmethod
    def from_function(
        cls, fn: Callable[[np.ndarray], np.ndarray], count: int, endpoint: bool = False
    ) -> "SampleSet":
        """Sample ``fn`` (vectorised, returns (N, 2)) at ``count`` uniform parameters."""
        s = np.linspace(0.0, 1.0, count, endpoint=endpoint)
        return cls(s, fn(s))


def fit_coefficients(samples: SampleSet, family: BasisFamily) -> np.ndarray:
    """Least-squares coefficients of ``family`` through ``samples``.

    Solved by orthogonal factorisation, which gives the normal-equations
    solution ``(Gh^T Gh)^-1 Gh^T C`` without forming ``Gh^T Gh``.
    """
    N = len(samples)
    if N <= family.n_coefficients:
        raise InsufficientSamples(
            f"{N} samples cannot determine {family.n_coefficients} coefficients of {family}; "
            f"need N > 2H = {family.n_coefficients}"
        )
    Gh = basis_rows(family, samples.s_values).reshape(2 * N, family.n_coefficients)
    C = samples.points.ravel()
    xi, _, rank, sv = np.linalg.lstsq(Gh, C, rcond=None)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise SingularSystem(
            f"sample basis matrix is rank deficient (rank {rank} < {family.n_coefficients})",
            condition_number=float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf,
        )
    return xi


def fit_residuals(samples: SampleSet, family: BasisFamily, xi) -> np.ndarray:
    """Euclidean distance between each sample and its fitted curve point."""
    return np.linalg.norm(evaluate_curve(family, xi, samples.s_values) - samples.points, axis=1)


@dataclass(frozen=True)
class StackedBasis:
    """``G_bar``: the per-agent basis matrices stacked vertically (2n x 2H)."""

    matrix: np.ndarray = field(repr=False)
    s_values: np.ndarray
    family: BasisFamily

    @property
    def n(self) -> int:
        return self.s_values.shape[0]

    @property
    def H(self) -> int:
        return self.family.H

    def block(self, i: int) -> np.ndarray:
        return self.matrix[2 * i : 2 * i + 2]


def stack_basis(family: BasisFamily, s_list: Sequence[float]) -> StackedBasis:
    s = np.asarray(s_list, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise InvalidArgument("stack_basis needs a nonempty 1-D list of parameters")
    G = basis_rows(family, s).reshape(2 * s.size, family.n_coefficients)
    G.setflags(write=False)
    return StackedBasis(G, s, family)


def _matrix(G) -> np.ndarray:
    return np.asarray(G.matrix if isinstance(G, StackedBasis) else G, dtype=float)


def pseudoinverse(G, branch: str = "auto") -> np.ndarray:
    """Full-rank pseudoinverse of a stacked basis.

    ``branch="left"`` is ``(G^T G)^-1 G^T`` (tall, n >= H), ``"right"`` is
    ``G^T (G G^T)^-1`` (wide, n < H); ``"auto"`` picks by shape. Both are
    evaluated through a QR factorisation of ``G`` or ``G^T``, which avoids
    squaring the condition number.
    """
    A = _matrix(G)
    rows, cols = A.shape
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise SingularSystem(
            f"stacked basis is rank deficient (smallest/largest singular value "
            f"{sv[-1]:.3e}/{sv[0]:.3e}, condition number {cond:.3e})",
            condition_number=cond,
        )
    if branch == "auto":
        branch = "left" if rows >= cols else "right"
    if branch == "left":
        if rows < cols:
            raise InvalidArgument("left inverse needs at least as many rows as columns")
        Q, R = np.linalg.qr(A)
        return np.linalg.solve(R, Q.T)
    if branch == "right":
        if rows > cols:
            raise InvalidArgument("right inverse needs at least as many columns as rows")
        Q, R = np.linalg.qr(A.T)
        return Q @ np.linalg.solve(R, np.eye(rows)).T
    raise InvalidArgument(f"unknown pseudoinverse branch {branch!r}")


@dataclass(frozen=True)
class AssumptionReport:
    rank: int
    expected_rank: int
    sigma_min: float
    sigma_max: float
    n: int
    H: int

    @property
    def full_rank(self) -> bool:
        return self.rank == self.expected_rank

    @property
    def enough_basis_functions(self) -> bool:
        return self.n <= self.H

    @property
    def ok(self) -> bool:
        return self.full_rank and self.enough_basis_functions

    def problems(self) -> list[str]:
        out = []
        if not self.full_rank:
            out.append(
                f"stacked basis rank {self.rank} < required {self.expected_rank} "
                f"(smallest singular value {self.sigma_min:.3e})"
            )
        if not self.enough_basis_functions:
            out.append(f"agent count n={self.n} exceeds basis count H={self.H}")
        return out


def validate_assumptions(G, n: int | None = None, H: int | None = None) -> AssumptionReport:
    """Check full rank ``min(2n, 2H)`` of the stacked basis and ``n <= H``."""
    A = _matrix(G)
    if n is None:
        n = A.shape[0] // 2
    if H is None:
        H = A.shape[1] // 2
    sv = np.linalg.svd(A, compute_uv=False)
    tol = max(max(A.shape) * np.finfo(float).eps, RANK_RTOL) * sv[0]
    return AssumptionReport(
        rank=int(np.sum(sv > tol)),
        expected_rank=min(2 * n, 2 * H),
        sigma_min=float(sv[-1]),
        sigma_max=float(sv[0]),
        n=int(n),
        H=int(H),
    )
