"""Mechanical systems on an anchored bundle: Lagrangians, semisprays, forms.

Two pipelines coexist, mirroring the two directions the theory runs in:

* the "mechanical" pipeline, where the user supplies semispray coefficients G
  and an external force F and the engine derives the compatible nonlinear
  connection, and
* the "Lagrange" pipeline, where a regular Lagrangian fixes the combination
  -2(G - F/4) through the Euler-Lagrange covector and the force only
  re-partitions G against F.

Index conventions (continuing geometry.py):

    g(kappa)[alpha, a], g_tilde(kappa)[a, alpha], g_tilde @ g = I
    el_covector -> (r,), lower index
    connection coefficients Gamma[a, c]
    force derivative dF[a, b] = dF^a / dy^b
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .algebroid import GeneralizedLieAlgebroid
from .geometry import (
    AdaptedTensorField,
    GhSection,
    RhoEtaConnection,
    berwald,
    bracket_gh,
    curvature,
    h_cov_deriv,
    rho_tilde,
)
from .smooth import (
    H_FD,
    check_finite,
    directional_diff,
    partial_diff,
    second_partial_diff,
)

__all__ = [
    "GhMorphism", "Lagrangian", "LagrangianJet", "ExternalForce",
    "MechanicalSystem", "LagrangeMechanicalSystem", "SemisprayCoefficients",
    "RegularityError", "lagrangian_jet", "regularity", "hessian_inverse",
    "finsler_validate", "FinslerReport", "energy", "el_covector",
    "canonical_semispray", "mechanical_semispray", "connection_from_semispray",
    "canonical_connection", "ring_connection", "ring_connection_fn",
    "ring_curvature_identity", "liouville_section", "spray_deviation",
    "spray_coefficients", "spray_section", "theta_L", "omega_L",
    "energy_field", "semispray_section", "semispray_equation_residual",
    "transform_lagrange_system", "semispray_transform_check",
]


class RegularityError(RuntimeError):
    """The fibre Hessian of the Lagrangian is rank deficient."""

    def __init__(self, msg: str, singular_values=None):
        super().__init__(msg)
        self.singular_values = singular_values


@dataclass(frozen=True)
class GhMorphism:
    """Locally invertible bundle morphism components over the linked base.

    g and g_tilde are mutually inverse matrix fields; both are evaluated at
    image points of h wherever they enter a formula.  Optional dg / dgt give
    analytic coordinate derivatives, shape (r, r, m).
    """

    g: Callable[[np.ndarray], np.ndarray]
    g_tilde: Callable[[np.ndarray], np.ndarray]
    dg: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dgt: Optional[Callable[[np.ndarray], np.ndarray]] = None
    is_identity: bool = False

    def at(self, kappa: np.ndarray) -> np.ndarray:
        return check_finite(np.atleast_2d(np.asarray(self.g(kappa), dtype=float)),
                            "morphism g")

    def tilde_at(self, kappa: np.ndarray) -> np.ndarray:
        return check_finite(np.atleast_2d(np.asarray(self.g_tilde(kappa), dtype=float)),
                            "morphism g_tilde")

    def invertibility_residual(self, kappa: np.ndarray) -> float:
        g = self.at(kappa)
        gt = self.tilde_at(kappa)
        return float(np.max(np.abs(gt @ g - np.eye(g.shape[0]))))

    @staticmethod
    def identity(r: int) -> "GhMorphism":
        eye = np.eye(r)
        return GhMorphism(g=lambda k: eye, g_tilde=lambda k: eye, is_identity=True)

    @staticmethod
    def constant(gmat: np.ndarray) -> "GhMorphism":
        gmat = np.asarray(gmat, dtype=float)
        ginv = np.linalg.inv(gmat)
        r = gmat.shape[0]
        dz = lambda k: np.zeros((r, r, np.size(k)))
        return GhMorphism(g=lambda k: gmat, g_tilde=lambda k: ginv, dg=dz, dgt=dz)


def _dg_h(gh: GhMorphism, A: GeneralizedLieAlgebroid, x: np.ndarray,
          tilde: bool, h_fd: float) -> np.ndarray:
    """x-derivative of the h-composed morphism matrix, shape (r, r, m)."""
    if gh.is_identity or A.m == 0:
        r = gh.at(A.h_map(x)).shape[0]
        return np.zeros((r, r, A.m))
    ana = gh.dgt if tilde else gh.dg
    if ana is not None:
        dk = np.asarray(ana(A.h_map(x)), dtype=float)     # (r, r, m) in kappa
        Dh = A.h_map.jacobian(x)                          # (m, m)
        return np.einsum("abk,ki->abi", dk, Dh)
    fn = (lambda xx: gh.tilde_at(A.h_map(xx))) if tilde else \
         (lambda xx: gh.at(A.h_map(xx)))
    return np.stack([partial_diff(fn, x, i, h=h_fd, order=4) for i in range(A.m)],
                    axis=-1)


@dataclass(frozen=True)
class Lagrangian:
    """Scalar fibre function with optional analytic jet callbacks.

    Finite differences fill in any missing derivative: fourth-order central
    for gradients, second-order mixed stencils for Hessians.  fibre_smooth
    marks Lagrangians that are differentiable on the null section.
    """

    value: Callable[[np.ndarray], float]
    grad_x: Optional[Callable[[np.ndarray], np.ndarray]] = None
    grad_y: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess_xy: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess_yy: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fibre_smooth: bool = True
    h_fd: float = 1e-4

    def __call__(self, u: np.ndarray) -> float:
        val = float(self.value(np.asarray(u, dtype=float)))
        if not np.isfinite(val):
            raise RegularityError(f"Lagrangian is non-finite at {u}")
        return val


@dataclass(frozen=True)
class LagrangianJet:
    L: float
    Lx: np.ndarray      # (m,)
    Ly: np.ndarray      # (r,)
    Lxy: np.ndarray     # (m, r)
    Lyy: np.ndarray     # (r, r), symmetrized


def lagrangian_jet(L: Lagrangian, u: np.ndarray, m: int) -> LagrangianJet:
    """First and second fibre/base derivatives of L at u."""
    u = np.asarray(u, dtype=float)
    r = u.size - m
    val = L(u)
    h1 = 1e-3 * max(1.0, float(np.max(np.abs(u))) if u.size else 1.0)

    if L.grad_x is not None:
        Lx = np.atleast_1d(np.asarray(L.grad_x(u), dtype=float))
    else:
        Lx = np.array([partial_diff(L.value, u, i, h=h1, order=4) for i in range(m)])

    if L.grad_y is not None:
        Ly = np.atleast_1d(np.asarray(L.grad_y(u), dtype=float))
    else:
        Ly = np.array([partial_diff(L.value, u, m + a, h=h1, order=4) for a in range(r)])

    if L.hess_xy is not None:
        Lxy = np.asarray(L.hess_xy(u), dtype=float).reshape(m, r)
    elif L.grad_y is not None:
        gy = lambda uu: np.atleast_1d(np.asarray(L.grad_y(uu), dtype=float))
        Lxy = np.stack([partial_diff(gy, u, i, h=h1, order=4) for i in range(m)]) \
            if m else np.zeros((0, r))
    else:
        Lxy = np.array([[second_partial_diff(L.value, u, i, m + b, h=L.h_fd)
                         for b in range(r)] for i in range(m)]).reshape(m, r)

    if L.hess_yy is not None:
        Lyy = np.asarray(L.hess_yy(u), dtype=float).reshape(r, r)
    elif L.grad_y is not None:
        gy = lambda uu: np.atleast_1d(np.asarray(L.grad_y(uu), dtype=float))
        Lyy = np.stack([partial_diff(gy, u, m + b, h=h1, order=4) for b in range(r)],
                       axis=-1)
    else:
        Lyy = np.array([[second_partial_diff(L.value, u, m + a, m + b, h=L.h_fd)
                         for b in range(r)] for a in range(r)])
    Lyy = 0.5 * (Lyy + Lyy.T)
    check_finite(Lx, "Lagrangian x-gradient")
    check_finite(Ly, "Lagrangian y-gradient")
    return LagrangianJet(L=val, Lx=Lx, Ly=Ly, Lxy=Lxy, Lyy=Lyy)


def regularity(L: Lagrangian, u: np.ndarray, m: int, tol: float = 1e-10) -> bool:
    Lyy = lagrangian_jet(L, u, m).Lyy
    if Lyy.size == 0:
        return False
    sv = np.linalg.svd(Lyy, compute_uv=False)
    return bool(sv[-1] > tol)


def hessian_inverse(L: Lagrangian, u: np.ndarray, m: int,
                    tol: float = 1e-10) -> np.ndarray:
    """Inverse fibre Hessian; raises RegularityError when rank deficient."""
    Lyy = lagrangian_jet(L, u, m).Lyy
    sv = np.linalg.svd(Lyy, compute_uv=False)
    if sv[-1] <= tol:
        raise RegularityError(
            f"fibre Hessian is singular at {u} (smallest singular value {sv[-1]:.3e})",
            singular_values=sv)
    return np.linalg.inv(Lyy)


@dataclass(frozen=True)
class FinslerReport:
    homogeneity_residual: float
    min_sq_hessian_eig: float

    @property
    def homogeneous(self) -> bool:
        return self.homogeneity_residual < 1e-8

    @property
    def positive_definite(self) -> bool:
        return self.min_sq_hessian_eig > 0.0


def finsler_validate(F: Lagrangian, samples, m: int,
                     lambdas=(0.5, 1.7, 3.2)) -> FinslerReport:
    """Positive 1-homogeneity residual and positivity of the squared Hessian."""
    hom = 0.0
    min_eig = np.inf
    F2 = Lagrangian(value=lambda uu: F.value(uu) ** 2, fibre_smooth=F.fibre_smooth)
    for u in samples:
        u = np.asarray(u, dtype=float)
        x, y = u[:m], u[m:]
        Fu = float(F.value(u))
        for lam in lambdas:
            Fs = float(F.value(np.concatenate([x, lam * y])))
            hom = max(hom, abs(Fs - lam * Fu))
        H = lagrangian_jet(F2, u, m).Lyy
        min_eig = min(min_eig, float(np.linalg.eigvalsh(H)[0]))
    return FinslerReport(homogeneity_residual=hom, min_sq_hessian_eig=float(min_eig))


def energy(L: Lagrangian, u: np.ndarray, m: int) -> float:
    """Fibre-weighted gradient minus the value: y^a L_a - L."""
    u = np.asarray(u, dtype=float)
    jet = lagrangian_jet(L, u, m)
    return float(u[m:] @ jet.Ly - jet.L)


@dataclass(frozen=True)
class ExternalForce:
    """Vertical force coefficients F^a with optional analytic fibre jets."""

    f: Callable[[np.ndarray], np.ndarray]
    df_dy: Optional[Callable[[np.ndarray], np.ndarray]] = None    # (r, r)
    d2f_dy: Optional[Callable[[np.ndarray], np.ndarray]] = None   # (r, r, r)
    h_fd: float = H_FD

    def at(self, u: np.ndarray) -> np.ndarray:
        return check_finite(
            np.atleast_1d(np.asarray(self.f(np.asarray(u, dtype=float)), dtype=float)),
            "external force")

    def dy(self, u: np.ndarray, m: int) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.df_dy is not None:
            return np.asarray(self.df_dy(u), dtype=float)
        r = u.size - m
        return np.stack([partial_diff(self.at, u, m + b, h=self.h_fd)
                         for b in range(r)], axis=-1)

    def d2y(self, u: np.ndarray, m: int) -> np.ndarray:
        """Second fibre derivative, d2F^a / dy^b dy^e -> (a, b, e)."""
        u = np.asarray(u, dtype=float)
        if self.d2f_dy is not None:
            return np.asarray(self.d2f_dy(u), dtype=float)
        r = u.size - m
        out = np.empty((r, r, r))
        for b in range(r):
            for e in range(b, r):
                blk = second_partial_diff(self.at, u, m + b, m + e, h=1e-4)
                out[:, b, e] = blk
                out[:, e, b] = blk
        return out

    @staticmethod
    def zero(r: int) -> "ExternalForce":
        z = np.zeros(r)
        zz = np.zeros((r, r))
        zzz = np.zeros((r, r, r))
        return ExternalForce(f=lambda u: z, df_dy=lambda u: zz, d2f_dy=lambda u: zzz)


@dataclass(frozen=True)
class MechanicalSystem:
    """User-driven pipeline: semispray coefficients G and force F supplied."""

    algebroid: GeneralizedLieAlgebroid
    force: ExternalForce
    conn: RhoEtaConnection
    G: Callable[[np.ndarray], np.ndarray]
    gh: GhMorphism

    def __post_init__(self):
        if self.algebroid.p <= 0:
            raise ValueError("fibre rank must be positive")

    @property
    def m(self) -> int:
        return self.algebroid.m

    @property
    def r(self) -> int:
        return self.algebroid.p


@dataclass(frozen=True)
class LagrangeMechanicalSystem:
    """Lagrangian-driven pipeline: dynamics fixed by the regular Lagrangian."""

    algebroid: GeneralizedLieAlgebroid
    lagrangian: Lagrangian
    force: ExternalForce
    gh: GhMorphism

    @property
    def m(self) -> int:
        return self.algebroid.m

    @property
    def r(self) -> int:
        return self.algebroid.p


@dataclass(frozen=True)
class SemisprayCoefficients:
    """Value bundle of the canonical semispray at a point.

    combo is the vertical component -2(G - F/4) that drives the dynamics;
    G is the isolated coefficient once the force is split off.
    """

    combo: np.ndarray
    G: np.ndarray
    force_value: np.ndarray


def _phi_field(sys: LagrangeMechanicalSystem):
    """The momentum-like scalar fields phi_b = g~^e_b(h(x)) L_e(x, y)."""
    A = sys.algebroid

    def phi(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        jet_Ly = lagrangian_jet(sys.lagrangian, u, A.m).Ly
        if sys.gh.is_identity:
            return jet_Ly
        gt = sys.gh.tilde_at(A.h_map(u[: A.m]))
        return gt.T @ jet_Ly
    return phi


def el_covector(sys: LagrangeMechanicalSystem, u: np.ndarray,
                h_fd: float = 1e-3) -> np.ndarray:
    """Euler-Lagrange covector E_b at u, shape (r,).

    Base-gradient and mixed-Hessian transport terms, two momentum-transport
    terms whose x-derivatives run through both slots of the composed field,
    and the structure-function term.
    """
    A = sys.algebroid
    u = np.asarray(u, dtype=float)
    m, r = A.m, A.p
    x, y = u[:m], u[m:]
    jet = lagrangian_jet(sys.lagrangian, u, m)

    kap = A.h_map(x)
    g = sys.gh.at(kap)
    gt = sys.gh.tilde_at(kap)
    gy = g @ y
    L_h = A.L_h(x)
    phi = gt.T @ jet.Ly
    out = np.einsum("cdb,d,c->b", L_h, gy, phi)
    if m == 0:
        return out

    rho = A.rho_h(x)
    # d phi_b / dx^i at fixed y: product rule when analytic jets exist on
    # both factors, composed finite differences otherwise.
    if sys.gh.is_identity:
        Dphi = jet.Lxy                                     # (m, r)
    elif sys.gh.dgt is not None and sys.lagrangian.hess_xy is not None:
        dgt_h = _dg_h(sys.gh, A, x, tilde=True, h_fd=h_fd)  # (r, r, m)
        Dphi = np.einsum("ebi,e->ib", dgt_h, jet.Ly) + jet.Lxy @ gt
    else:
        def phi_of_x(xx):
            uu = np.concatenate([xx, y])
            Ly = lagrangian_jet(sys.lagrangian, uu, m).Ly
            return sys.gh.tilde_at(A.h_map(xx)).T @ Ly
        Dphi = np.stack([partial_diff(phi_of_x, x, i, h=h_fd, order=4)
                         for i in range(m)])               # (m, r)

    w = rho @ gy
    out = out + rho.T @ jet.Lx
    out = out - rho.T @ (jet.Lxy @ y)
    out = out - Dphi.T @ w
    out = out + rho.T @ (Dphi @ gy)
    return out


def canonical_semispray(sys: LagrangeMechanicalSystem, u: np.ndarray,
                        tol: float = 1e-10) -> SemisprayCoefficients:
    """Semispray coefficients the Lagrangian pins down, with the force split."""
    A = sys.algebroid
    u = np.asarray(u, dtype=float)
    E = el_covector(sys, u)
    Ltil = hessian_inverse(sys.lagrangian, u, A.m, tol=tol)
    if sys.gh.is_identity:
        combo = Ltil @ E
    else:
        g = sys.gh.at(A.h_map(u[: A.m]))
        combo = Ltil @ (g.T @ E)
    F = sys.force.at(u)
    G = 0.25 * F - 0.5 * combo
    return SemisprayCoefficients(combo=combo, G=G, force_value=F)


def combo_field(sys: LagrangeMechanicalSystem) -> Callable[[np.ndarray], np.ndarray]:
    return lambda u: canonical_semispray(sys, u).combo


def mechanical_semispray(ms: MechanicalSystem, u: np.ndarray) -> np.ndarray:
    """Vertical semispray component -2(G - F/4) of the user-driven pipeline."""
    u = np.asarray(u, dtype=float)
    return -2.0 * (np.atleast_1d(np.asarray(ms.G(u), dtype=float))
                   - 0.25 * ms.force.at(u))


def connection_from_semispray(A: GeneralizedLieAlgebroid, gh: GhMorphism,
                              gmq_fn: Callable[[np.ndarray], np.ndarray],
                              u: np.ndarray, h_fd: float = 1e-3) -> np.ndarray:
    """Nonlinear connection induced by semispray coefficients, shape (r, p).

    gmq_fn evaluates G - F/4.  Fibre derivative of gmq plus the three
    morphism/structure correction terms, each with its half factor.
    """
    u = np.asarray(u, dtype=float)
    m, r = A.m, A.p
    x, y = u[:m], u[m:]
    kap = A.h_map(x)
    g = gh.at(kap)
    gt = gh.tilde_at(kap)
    gy = g @ y

    fn = lambda uu: np.atleast_1d(np.asarray(gmq_fn(uu), dtype=float))
    dGF = np.stack([partial_diff(fn, u, m + b, h=h_fd, order=4) for b in range(r)],
                   axis=-1)                                 # (a, b)
    out = dGF @ gt
    L_h = A.L_h(x)
    out = out - 0.5 * np.einsum("d,fdc,af->ac", gy, L_h, gt)
    if m > 0 and not gh.is_identity:
        rho = A.rho_h(x)
        dg_h = _dg_h(gh, A, x, tilde=False, h_fd=h_fd)
        dgt_h = _dg_h(gh, A, x, tilde=True, h_fd=h_fd)
        out = out + 0.5 * np.einsum("jc,bej,e,ab->ac", rho, dg_h, y, gt)
        out = out - 0.5 * np.einsum("i,aci->ac", rho @ gy, dgt_h)
    return out


def canonical_connection(sys: LagrangeMechanicalSystem,
                         h_fd: float = 1e-3) -> RhoEtaConnection:
    """Connection carried by the canonical semispray of the Lagrange pipeline."""
    combo = combo_field(sys)
    gmq = lambda u: -0.5 * combo(u)
    return RhoEtaConnection(
        gamma=lambda u: connection_from_semispray(sys.algebroid, sys.gh, gmq, u,
                                                  h_fd=h_fd),
        h_fd=h_fd)


def ring_connection(conn: RhoEtaConnection, force: ExternalForce, gh: GhMorphism,
                    A: GeneralizedLieAlgebroid, u: np.ndarray) -> np.ndarray:
    """Force-shifted connection: Gamma plus a quarter of the fibre force slope."""
    u = np.asarray(u, dtype=float)
    gt = gh.tilde_at(A.h_map(u[: A.m]))
    return conn.at(u) + 0.25 * force.dy(u, A.m) @ gt


def ring_connection_fn(conn: RhoEtaConnection, force: ExternalForce,
                       gh: GhMorphism, A: GeneralizedLieAlgebroid) -> RhoEtaConnection:
    return RhoEtaConnection(gamma=lambda u: ring_connection(conn, force, gh, A, u),
                            h_fd=conn.h_fd)


def ring_curvature_identity(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
                            force: ExternalForce, gh: GhMorphism,
                            u: np.ndarray, h_fd: float = 1e-4) -> float:
    """Residual between the shifted-connection curvature and its expansion.

    The expansion assembles the unshifted curvature, antisymmetrized
    horizontal covariant derivatives of the force slope in the normal
    Berwald connection, a Berwald-asymmetry correction, the second-slope
    quadratic term, and the structure-function term.
    """
    u = np.asarray(u, dtype=float)
    m, r = A.m, A.p
    x = u[:m]
    gt = gh.tilde_at(A.h_map(x))

    ring = ring_connection_fn(conn, force, gh, A)
    direct = curvature(A, ring, u, h_fd=h_fd)

    R = curvature(A, conn, u, h_fd=h_fd)
    dG = conn.dy(u, m)                                    # (a, gamma, b)
    Phi = force.dy(u, m) @ gt                             # (a, c)
    Psi = np.einsum("ec,abe->abc", gt, force.d2y(u, m))   # (a, b, c)

    dcn = berwald(conn, m, r, r)
    Tfield = AdaptedTensorField(
        valence=(0, 1, 1, 0),
        coeffs=lambda uu: (force.dy(uu, m) @ gh.tilde_at(A.h_map(uu[:m]))).T)
    nabla = np.empty((r, r, r))                           # (d, c, a) = (Phi^a_c)_{|d}
    for d in range(r):
        nabla[d] = h_cov_deriv(A, conn, dcn, Tfield, d, u, h_fd=h_fd)

    L_h = A.L_h(x)
    assembled = np.empty_like(direct)
    for c in range(r):
        for d in range(r):
            term = R[:, c, d]
            term = term + 0.25 * (nabla[d][c, :] - nabla[c][d, :])
            # Berwald slope asymmetry: dGamma^b_d/dy^c - dGamma^b_c/dy^d
            term = term + 0.25 * Phi @ (dG[:, d, c] - dG[:, c, d])
            term = term + (1.0 / 16.0) * (Psi[:, :, d] @ Phi[:, c]
                                          - Psi[:, :, c] @ Phi[:, d])
            term = term + 0.25 * Phi @ L_h[:, c, d]
            assembled[:, c, d] = term
    return float(np.max(np.abs(direct - assembled)))


def liouville_section(m: int, r: int) -> GhSection:
    """Canonical vertical section with the fibre coordinates as coefficients."""
    zp = np.zeros(r)
    return GhSection(z=lambda u: zp, v=lambda u: np.asarray(u[m:], dtype=float))


def spray_deviation(A: GeneralizedLieAlgebroid, S: GhSection, u: np.ndarray,
                    h_fd: Optional[float] = None):
    """Derivation of a semispray: bracket with the Liouville section minus itself."""
    u = np.asarray(u, dtype=float)
    C = liouville_section(A.m, A.p)
    bz, bv = bracket_gh(A, C, S, u, h_fd=h_fd)
    z, v = S.at(u)
    return bz - z, bv - v


def spray_coefficients(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
                       gh: GhMorphism, u: np.ndarray,
                       h_fd: float = H_FD) -> np.ndarray:
    """Quadratic coefficients 2(G - F/4) of the spray built from a connection."""
    u = np.asarray(u, dtype=float)
    m = A.m
    x, y = u[:m], u[m:]
    kap = A.h_map(x)
    g = gh.at(kap)
    gt = gh.tilde_at(kap)
    gy = g @ y
    out = conn.at(u) @ gy
    L_h = A.L_h(x)
    out = out + 0.5 * np.einsum("d,bdc,ab,c->a", gy, L_h, gt, gy)
    if m > 0 and not gh.is_identity:
        rho = A.rho_h(x)
        dg_h = _dg_h(gh, A, x, tilde=False, h_fd=h_fd)
        dgt_h = _dg_h(gh, A, x, tilde=True, h_fd=h_fd)
        out = out - 0.5 * np.einsum("jc,bej,e,ab,c->a", rho, dg_h, y, gt, gy)
        out = out + 0.5 * np.einsum("i,aci,c->a", rho @ gy, dgt_h, gy)
    return out


def spray_section(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
                  gh: GhMorphism) -> GhSection:
    def zfn(u):
        x = u[: A.m]
        return gh.at(A.h_map(x)) @ u[A.m:]
    return GhSection(z=zfn, v=lambda u: -spray_coefficients(A, conn, gh, u))


def theta_L(sys: LagrangeMechanicalSystem, X: GhSection, u: np.ndarray) -> float:
    """Momentum one-form paired with a section: vanishes on vertical input."""
    u = np.asarray(u, dtype=float)
    phi = _phi_field(sys)(u)
    z, _ = X.at(u)
    return float(phi @ z)


def omega_L(sys: LagrangeMechanicalSystem, X: GhSection, Y: GhSection,
            u: np.ndarray, h_fd: Optional[float] = None) -> float:
    """Two-form value: anchored derivatives of the momentum pairings minus
    the pairing with the bracket."""
    A = sys.algebroid
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    phi = _phi_field(sys)

    def th(S: GhSection):
        return lambda uu: np.atleast_1d(
            phi(uu) @ np.atleast_1d(np.asarray(S.z(uu), dtype=float)))

    wX = rho_tilde(A, X, u)
    wY = rho_tilde(A, Y, u)
    t1 = float(directional_diff(th(Y), u, wX, h=h)[0])
    t2 = float(directional_diff(th(X), u, wY, h=h)[0])
    bz, _ = bracket_gh(A, X, Y, u, h_fd=h)
    t3 = float(phi(u) @ bz)
    return t1 - t2 - t3


def energy_field(sys: LagrangeMechanicalSystem) -> Callable[[np.ndarray], float]:
    return lambda u: energy(sys.lagrangian, u, sys.algebroid.m)


def semispray_section(sys: LagrangeMechanicalSystem) -> GhSection:
    A = sys.algebroid

    def zfn(u):
        return sys.gh.at(A.h_map(u[: A.m])) @ u[A.m:]
    return GhSection(z=zfn, v=lambda u: canonical_semispray(sys, u).combo)


def semispray_equation_residual(sys: LagrangeMechanicalSystem, X: GhSection,
                                u: np.ndarray, S: Optional[GhSection] = None,
                                h_fd: Optional[float] = None) -> float:
    """Defect of the dynamical equation pairing the two-form with the energy."""
    A = sys.algebroid
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    S = S if S is not None else semispray_section(sys)
    lhs = omega_L(sys, S, X, u, h_fd=h)
    efn = energy_field(sys)
    wX = rho_tilde(A, X, u)
    rhs = float(directional_diff(lambda uu: np.atleast_1d(efn(uu)), u, wX, h=h)[0])
    return abs(lhs + rhs)


def transform_lagrange_system(sys: LagrangeMechanicalSystem, cc,
                              h_fd: float = H_FD) -> LagrangeMechanicalSystem:
    """The same Lagrange system written in the target chart of a chart change.

    Supported for systems whose base diffeomorphisms are the identity; the
    fibre frame then changes with the same matrix as the coordinates.
    """
    A = sys.algebroid
    m, r = A.m, A.p
    if m == 0:
        raise ValueError("chart changes need a positive-dimensional base")

    def to_old(xp):
        return cc.base_map.inverse(np.asarray(xp, dtype=float))

    def Minv_at(x):
        return np.linalg.inv(cc.M(x))

    def anchor_p(xp):
        x = to_old(xp)
        J = cc.base_map.jacobian(x)
        return J @ A.rho_h(x) @ Minv_at(x)

    def structure_p(xp):
        x = to_old(xp)
        M = cc.M(x)
        Minv = Minv_at(x)
        L = A.L_h(x)
        rho = A.rho_h(x)
        dMinv = np.stack([partial_diff(Minv_at, x, i, h=h_fd) for i in range(m)],
                         axis=-1)                          # (g, b', i)
        core = np.einsum("gab,aA,bB->gAB", L, Minv, Minv)
        drv = np.einsum("aA,ia,gBi->gAB", Minv, rho, dMinv)
        core = core + drv - np.transpose(drv, (0, 2, 1))
        return np.einsum("Gg,gAB->GAB", M, core)

    A_p = GeneralizedLieAlgebroid(
        m=m, p=r, anchor=anchor_p, structure=structure_p,
        h_map=A.h_map, eta_map=A.eta_map, h_fd=A.h_fd)

    def g_p(kp):
        x = to_old(kp)
        return cc.M(x) @ sys.gh.at(x) @ Minv_at(x)

    def gt_p(kp):
        x = to_old(kp)
        return cc.M(x) @ sys.gh.tilde_at(x) @ Minv_at(x)

    gh_p = GhMorphism(g=g_p, g_tilde=gt_p)

    def to_old_u(up):
        xp, yp = up[:m], up[m:]
        x = to_old(xp)
        return np.concatenate([x, Minv_at(x) @ yp])

    L_p = Lagrangian(value=lambda up: sys.lagrangian.value(to_old_u(up)),
                     fibre_smooth=sys.lagrangian.fibre_smooth)

    def force_p(up):
        u = to_old_u(up)
        return cc.M(u[:m]) @ sys.force.at(u)

    return LagrangeMechanicalSystem(algebroid=A_p, lagrangian=L_p,
                                    force=ExternalForce(f=force_p), gh=gh_p)


def semispray_transform_check(sys: LagrangeMechanicalSystem, cc,
                              u: np.ndarray, h_fd: float = H_FD) -> float:
    """Residual of the semispray-coefficient transformation rule at u.

    Compares the pushed coefficients with those recomputed from scratch in
    the target chart.
    """
    A = sys.algebroid
    u = np.asarray(u, dtype=float)
    m = A.m
    x, y = u[:m], u[m:]

    sc = canonical_semispray(sys, u)
    two_G = 2.0 * sc.G

    M = cc.M(x)
    yp = M @ y
    up = np.concatenate([cc.base_map(x), yp])
    sys_p = transform_lagrange_system(sys, cc, h_fd=h_fd)
    two_G_p = 2.0 * canonical_semispray(sys_p, up).G

    kap = A.h_map(x)
    gy = sys.gh.at(kap) @ y
    rho = A.rho_h(x)
    Mfn = lambda xx: np.asarray(cc.M(xx), dtype=float)
    dM = np.stack([partial_diff(Mfn, x, i, h=h_fd) for i in range(m)], axis=-1)
    dyp_dx = np.einsum("Aci,c->Ai", dM, y)                 # (a', i)
    expected = M @ two_G - dyp_dx @ (rho @ gy)
    return float(np.max(np.abs(two_G_p - expected)))
