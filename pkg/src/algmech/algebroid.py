"""Generalized Lie algebroid data in a single coordinate chart.

An algebroid here is the coordinate payload of a bracket geometry over a
pair of diffeomorphic bases linked by maps h and eta: an anchor matrix,
antisymmetric structure functions, and the two diffeomorphisms.  Everything
downstream (the generalized tangent bundle, connections, mechanics) consumes
only the pulled-back evaluators rho_h = anchor(h(x)) and L_h = structure(h(x)).

Array index conventions, used throughout the package:

    anchor(kappa)[i, alpha]      rows: tangent index i in 0..m-1
                                 cols: fibre index alpha in 0..p-1
    structure(kappa)[gamma, alpha, beta]
                                 contravariant index first; antisymmetric in
                                 (alpha, beta)
    bundle point u = concat(x, y), x of length m, y of length r

All evaluators are pure functions; instances are immutable and safe to share
between threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .smooth import (
    DegeneracyError,
    EvaluationError,
    H_FD,
    InvertibleMap,
    SmoothMap,
    check_finite,
    directional_diff,
    partial_diff,
)

__all__ = [
    "GeneralizedLieAlgebroid",
    "PullbackSection",
    "ChartChange",
    "pullback_eval",
    "structure_from_frame",
    "pullback_bracket",
    "jacobi_defect",
    "anchor_morphism_defect",
    "EvaluationError",
    "DegeneracyError",
]


@dataclass(frozen=True)
class GeneralizedLieAlgebroid:
    """Coordinate data of a generalized Lie algebroid over an m-dim base.

    m = 0 is allowed (base reduced to a point, the Lie algebra case); all
    base-derivative terms then collapse to empty sums.
    """

    m: int
    p: int
    anchor: Callable[[np.ndarray], np.ndarray]      # kappa -> (m, p)
    structure: Callable[[np.ndarray], np.ndarray]   # kappa -> (p, p, p)
    h_map: SmoothMap
    eta_map: SmoothMap
    h_fd: float = H_FD

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("base dimension must be non-negative")
        if self.p <= 0:
            raise ValueError("fibre rank must be positive")

    def rho_h(self, x: np.ndarray) -> np.ndarray:
        """Anchor pulled back to the bundle base: anchor at h(x), shape (m, p)."""
        a = np.asarray(self.anchor(self.h_map(x)), dtype=float).reshape(self.m, self.p)
        return check_finite(a, "anchor")

    def L_h(self, x: np.ndarray) -> np.ndarray:
        """Structure functions at h(x), shape (p, p, p)."""
        L = np.asarray(self.structure(self.h_map(x)), dtype=float)
        L = L.reshape(self.p, self.p, self.p)
        return check_finite(L, "structure functions")

    @staticmethod
    def classical(m: int) -> "GeneralizedLieAlgebroid":
        """Tangent-bundle case: identity anchor, vanishing structure, h = eta = id."""
        eye = np.eye(m)
        zero = np.zeros((m, m, m))
        return GeneralizedLieAlgebroid(
            m=m, p=m,
            anchor=lambda kappa: eye,
            structure=lambda kappa: zero,
            h_map=SmoothMap.identity(m),
            eta_map=SmoothMap.identity(m),
        )

    @staticmethod
    def lie_algebra(constants: np.ndarray) -> "GeneralizedLieAlgebroid":
        """Point base (m = 0) with constant structure constants C[gamma, a, b]."""
        C = np.asarray(constants, dtype=float)
        p = C.shape[0]
        empty_anchor = np.zeros((0, p))
        return GeneralizedLieAlgebroid(
            m=0, p=p,
            anchor=lambda kappa: empty_anchor,
            structure=lambda kappa: C,
            h_map=SmoothMap.identity(0),
            eta_map=SmoothMap.identity(0),
        )


@dataclass(frozen=True)
class PullbackSection:
    """Coefficients Z of a section of the pulled-back bundle over E.

    coeffs maps a bundle point u = (x, y) to the p coefficient values against
    the pulled-back frame.
    """

    coeffs: Callable[[np.ndarray], np.ndarray]

    def __call__(self, u: np.ndarray) -> np.ndarray:
        z = np.asarray(self.coeffs(np.asarray(u, dtype=float)), dtype=float)
        return check_finite(z, "pull-back section coefficients")

    @staticmethod
    def constant(z0) -> "PullbackSection":
        z0 = np.asarray(z0, dtype=float)
        return PullbackSection(coeffs=lambda u: z0)

    @staticmethod
    def frame(alpha: int, p: int) -> "PullbackSection":
        e = np.zeros(p)
        e[alpha] = 1.0
        return PullbackSection(coeffs=lambda u: e)


@dataclass(frozen=True)
class ChartChange:
    """A change of bundle chart, used to test transformation laws.

    base_map  : x -> x', invertible with Jacobian
    fibre_matrix : x -> (r, r), the matrix carrying fibre coordinates
    f_matrix  : kappa -> (p, p), the matrix carrying the outer frame; when the
                two bundles coincide it equals fibre_matrix.
    """

    base_map: InvertibleMap
    fibre_matrix: Callable[[np.ndarray], np.ndarray]
    f_matrix: Optional[Callable[[np.ndarray], np.ndarray]] = None
    cond_bound: float = 1e8

    def M(self, x: np.ndarray) -> np.ndarray:
        M = np.asarray(self.fibre_matrix(np.asarray(x, dtype=float)), dtype=float)
        self._require_invertible(M, x, "fibre matrix")
        return M

    def Lam(self, kappa: np.ndarray) -> np.ndarray:
        fm = self.f_matrix if self.f_matrix is not None else self.fibre_matrix
        L = np.asarray(fm(np.asarray(kappa, dtype=float)), dtype=float)
        self._require_invertible(L, kappa, "frame matrix")
        return L

    def _require_invertible(self, M: np.ndarray, x, what: str):
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > self.cond_bound:
            raise DegeneracyError(
                f"{what} is numerically singular (cond={cond:.3e})",
                point=np.asarray(x), cond=float(cond))

    @staticmethod
    def identity(m: int, r: int) -> "ChartChange":
        eyer = np.eye(r)
        return ChartChange(base_map=InvertibleMap.identity(m),
                           fibre_matrix=lambda x: eyer)


def pullback_eval(A: GeneralizedLieAlgebroid, xM: np.ndarray):
    """Anchor and structure functions pulled back through h at a base point."""
    xM = np.asarray(xM, dtype=float)
    return A.rho_h(xM), A.L_h(xM)


def structure_from_frame(theta: Callable[[np.ndarray], np.ndarray],
                         h_map: Optional[SmoothMap] = None,
                         eta_map: Optional[SmoothMap] = None,
                         m: Optional[int] = None,
                         theta_jac: Optional[Callable] = None,
                         h_fd: float = H_FD) -> GeneralizedLieAlgebroid:
    """Build an algebroid from an invertible moving frame.

    theta(x)[i, alpha] are the coefficients of the frame fields against the
    coordinate fields; the structure functions are the frame brackets

        L^gamma_{ab} = (theta^i_a d_i theta^j_b - theta^i_b d_i theta^j_a)
                       * inv(theta)^gamma_j

    and the anchor pushes the frame through the tangent map of eta.
    Derivatives of theta use theta_jac when supplied (shape (m, m, m), last
    axis the derivative direction) and central differences otherwise.
    """
    if m is None:
        for k in range(1, 17):
            try:
                probe = np.asarray(theta(np.zeros(k)), dtype=float)
            except Exception:
                continue
            if probe.shape == (k, k):
                m = k
                break
        if m is None:
            raise ValueError("could not infer base dimension; pass m explicitly")
    h_map = h_map if h_map is not None else SmoothMap.identity(m)
    eta_map = eta_map if eta_map is not None else SmoothMap.identity(m)

    def theta_at(x):
        th = np.asarray(theta(np.asarray(x, dtype=float)), dtype=float).reshape(m, m)
        return th

    def inv_theta(x):
        th = theta_at(x)
        cond = np.linalg.cond(th)
        if not np.isfinite(cond) or cond > 1e12:
            raise DegeneracyError("frame matrix is singular",
                                  point=np.asarray(x), cond=float(cond))
        return np.linalg.inv(th)

    def dtheta(x):
        if theta_jac is not None:
            return np.asarray(theta_jac(np.asarray(x, dtype=float)), dtype=float)
        return np.stack([partial_diff(theta_at, x, i, h=h_fd) for i in range(m)],
                        axis=-1)

    def structure(kappa):
        th = theta_at(kappa)
        dth = dtheta(kappa)          # (j, alpha, i): d theta^j_alpha / d x^i
        tilde = inv_theta(kappa)
        # bracket^j_{ab} = theta^i_a d_i theta^j_b - theta^i_b d_i theta^j_a
        br = np.einsum("ia,jbi->jab", th, dth) - np.einsum("ib,jai->jab", th, dth)
        return np.einsum("gj,jab->gab", tilde, br)

    def anchor(kappa):
        return eta_map.jacobian(kappa) @ theta_at(kappa)

    return GeneralizedLieAlgebroid(m=m, p=m, anchor=anchor, structure=structure,
                                   h_map=h_map, eta_map=eta_map, h_fd=h_fd)


def _pb_push(A: GeneralizedLieAlgebroid, Z: PullbackSection, u: np.ndarray) -> np.ndarray:
    """Base components of the pulled-back anchor applied to Z at u."""
    x = u[: A.m]
    return A.rho_h(x) @ Z(u)


def pullback_bracket(A: GeneralizedLieAlgebroid, Z1: PullbackSection,
                     Z2: PullbackSection, u: np.ndarray,
                     h_fd: Optional[float] = None) -> np.ndarray:
    """Bracket of two pull-back sections at u, against the pulled-back frame.

    Structure-function term plus anchor-directional derivatives of the
    coefficients; the anchor of the pull-back bundle acts only along base
    directions.
    """
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    m = A.m
    x = u[:m]
    z1 = Z1(u)
    z2 = Z2(u)
    out = np.einsum("gab,a,b->g", A.L_h(x), z1, z2)
    if m > 0:
        w1 = np.concatenate([A.rho_h(x) @ z1, np.zeros(u.size - m)])
        w2 = np.concatenate([A.rho_h(x) @ z2, np.zeros(u.size - m)])
        out = out + directional_diff(Z2, u, w1, h=h) \
                  - directional_diff(Z1, u, w2, h=h)
    return out


def jacobi_defect(A: GeneralizedLieAlgebroid, xM: np.ndarray,
                  probe: tuple[int, int, int],
                  h_fd: Optional[float] = None) -> float:
    """Max-norm of the cyclic triple-bracket sum on three frame indices.

    Zero (to finite-difference accuracy) exactly when the frame Jacobi
    identity holds at xM.
    """
    xM = np.asarray(xM, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    a, b, c = probe
    L = A.L_h(xM)
    rho = A.rho_h(xM)

    if A.m > 0:
        dL = np.stack([partial_diff(A.L_h, xM, i, h=h) for i in range(A.m)],
                      axis=-1)  # (g, a, b, i)
    else:
        dL = np.zeros((A.p, A.p, A.p, 0))

    total = np.zeros(A.p)
    for al, be, ga in ((a, b, c), (b, c, a), (c, a, b)):
        # [[e_al, e_be], e_ga] = L^d_{al be} L^e_{d ga} - rho^i_ga d_i L^e_{al be}
        quad = np.einsum("d,ed->e", L[:, al, be], L[:, :, ga])
        drv = np.einsum("i,ei->e", rho[:, ga], dL[:, al, be, :])
        total = total + quad - drv
    return float(np.max(np.abs(total)))


def anchor_morphism_defect(A: GeneralizedLieAlgebroid, u: np.ndarray,
                           Z1: PullbackSection, Z2: PullbackSection,
                           h_fd: Optional[float] = None) -> float:
    """Mismatch between the pushed bracket and the bracket of the pushes.

    Compares rho_h applied to the pull-back bracket with the finite-difference
    Lie bracket of the two pushed-forward vector fields on the bundle.
    """
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    m = A.m
    if m == 0:
        return 0.0
    x = u[:m]
    lhs = A.rho_h(x) @ pullback_bracket(A, Z1, Z2, u, h_fd=h)

    X1 = lambda v: _pb_push(A, Z1, v)
    X2 = lambda v: _pb_push(A, Z2, v)
    rhs = np.zeros(m)
    x1u = X1(u)
    x2u = X2(u)
    for j in range(m):
        rhs = rhs + x1u[j] * partial_diff(X2, u, j, h=h) \
                  - x2u[j] * partial_diff(X1, u, j, h=h)
    return float(np.max(np.abs(lhs - rhs)))
