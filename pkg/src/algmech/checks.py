"""Invariant suites behind the `check` command.

Every suite item evaluates a named identity on randomized probes and reports
the worst residual against its tolerance.  Exact algebraic identities get
roundoff-level tolerances; identities that differentiate numerically get the
finite-difference tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .algebroid import anchor_morphism_defect, jacobi_defect, PullbackSection
from .geometry import (
    GhSection,
    RhoEtaConnection,
    adapted_coframe,
    adapted_frame,
    bracket_gh,
    curvature,
    endomorphism,
    nijenhuis,
    rho_tilde,
    vertical_proj,
    horizontal_proj,
    almost_product,
)
from .mechanics import (
    LagrangeMechanicalSystem,
    MechanicalSystem,
    canonical_connection,
    finsler_validate,
    regularity,
    semispray_equation_residual,
)
from .probes import random_coeff_fn, random_point, random_section
from .smooth import directional_diff

__all__ = ["CheckResult", "run_checks"]

TOL_EXACT = 1e-10
TOL_FD = 1e-6
TOL_SEMISPRAY = 1e-5


@dataclass
class CheckResult:
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)

    def as_dict(self) -> dict:
        return {"max_residual": self.max_residual, "tolerance": self.tolerance,
                "pass": self.passed}


def _pairs(rng, A, n, count=8):
    return [random_point(rng, A.m, A.p) for _ in range(count)]


def run_checks(descriptor, rng: np.random.Generator, tol_fd: float = TOL_FD,
               n_points: int = 12) -> Dict[str, CheckResult]:
    sys = descriptor.system
    A = sys.algebroid
    m, r = A.m, A.p
    gh = sys.gh

    if isinstance(sys, LagrangeMechanicalSystem):
        conn = canonical_connection(sys)
    else:
        conn = sys.conn

    pts = [random_point(rng, m, r) for _ in range(n_points)]
    out: Dict[str, CheckResult] = {}

    # stored structure functions are antisymmetric exactly
    res = 0.0
    for u in pts:
        L = A.L_h(u[:m])
        res = max(res, float(np.max(np.abs(L + np.transpose(L, (0, 2, 1))))))
    out["structure_antisymmetry"] = CheckResult(res, 1e-12)

    # frame Jacobi identity of the pulled-back bracket
    res = 0.0
    for u in pts[:6]:
        probe = tuple(rng.integers(0, A.p, size=3))
        res = max(res, jacobi_defect(A, u[:m], probe))
    out["jacobi"] = CheckResult(res, tol_fd)

    # the anchor intertwines brackets of pull-back sections
    res = 0.0
    for u in pts[:6]:
        Z1 = PullbackSection(random_coeff_fn(rng, A.p, m + r))
        Z2 = PullbackSection(random_coeff_fn(rng, A.p, m + r))
        res = max(res, anchor_morphism_defect(A, u, Z1, Z2))
    out["anchor_morphism"] = CheckResult(res, tol_fd)

    # projector and almost-structure algebra, exact up to roundoff
    res = 0.0
    V = lambda X, u: vertical_proj(conn, X, u)
    H = lambda X, u: horizontal_proj(conn, X, u)
    P = lambda X, u: almost_product(conn, X, u)
    eV = endomorphism("V", conn=conn)
    eH = endomorphism("H", conn=conn)
    eP = endomorphism("P", conn=conn)
    eJ = endomorphism("J", conn=conn, gh=gh, A=A) if A.p == r else None
    for u in pts:
        X = random_section(rng, m, A.p, r)
        z, v = X.at(u)
        pairs = [
            (eV(eV(X)), V(X, u)),            # V^2 = V
            (eH(eH(X)), H(X, u)),            # H^2 = H
            (eP(eP(X)), (z, v)),             # P^2 = Id
        ]
        hv = (H(X, u)[0] + V(X, u)[0], H(X, u)[1] + V(X, u)[1])
        res = max(res, float(np.max(np.abs(hv[0] - z))),
                  float(np.max(np.abs(hv[1] - v))))
        for left, right in pairs:
            lz, lv = left.at(u) if isinstance(left, GhSection) else left
            rz, rv = right
            res = max(res, float(np.max(np.abs(lz - rz))),
                      float(np.max(np.abs(lv - rv))))
        if eJ is not None:
            combos = [
                (eJ(eJ(X)), (np.zeros(A.p), np.zeros(r))),             # J^2 = 0
                (eJ(eP(X)), eJ(X).at(u)),                              # J P = J
                (eP(eJ(X)), tuple(-c for c in eJ(X).at(u))),           # P J = -J
                (eJ(eH(X)), eJ(X).at(u)),                              # J H = J
                (eH(eJ(X)), (np.zeros(A.p), np.zeros(r))),             # H J = 0
                (eJ(eV(X)), (np.zeros(A.p), np.zeros(r))),             # J V = 0
                (eV(eJ(X)), eJ(X).at(u)),                              # V J = J
            ]
            for left, right in combos:
                lz, lv = left.at(u)
                rz, rv = right
                res = max(res, float(np.max(np.abs(lz - rz))),
                          float(np.max(np.abs(lv - rv))))
    out["projector_algebra"] = CheckResult(res, TOL_EXACT)

    # Nijenhuis identities
    resJ = resV = resP = 0.0
    for u in pts[:5]:
        X = random_section(rng, m, A.p, r)
        Y = random_section(rng, m, A.p, r)
        if eJ is not None:
            nz, nv = nijenhuis(A, "J", conn, gh, X, Y, u)
            resJ = max(resJ, float(np.max(np.abs(nz))), float(np.max(np.abs(nv))))
        nzv, nvv = nijenhuis(A, "V", conn, gh, X, Y, u)
        HX, HY = eH(X), eH(Y)
        bz, bv = bracket_gh(A, HX, HY, u)
        vb = vertical_proj(conn, GhSection.constant(bz, bv), u)
        resV = max(resV, float(np.max(np.abs(nzv - vb[0]))),
                   float(np.max(np.abs(nvv - vb[1]))))
        nzp, nvp = nijenhuis(A, "P", conn, gh, X, Y, u)
        resP = max(resP, float(np.max(np.abs(nzp - 4.0 * vb[0]))),
                   float(np.max(np.abs(nvp - 4.0 * vb[1]))))
    if eJ is not None:
        out["nijenhuis_tangent"] = CheckResult(resJ, tol_fd)
    out["nijenhuis_vertical"] = CheckResult(resV, tol_fd)
    out["nijenhuis_product"] = CheckResult(resP, tol_fd)

    # adapted-frame brackets against the curvature and connection slopes
    res29 = res31 = res32 = 0.0
    for u in pts[:5]:
        G = conn.at(u)
        L = A.L_h(u[:m])
        R = curvature(A, conn, u)
        for al in range(A.p):
            for be in range(al + 1, A.p):
                dal = GhSection(z=(lambda uu, a=al: np.eye(A.p)[a]),
                                v=(lambda uu, a=al: -conn.at(uu)[:, a]))
                dbe = GhSection(z=(lambda uu, b=be: np.eye(A.p)[b]),
                                v=(lambda uu, b=be: -conn.at(uu)[:, b]))
                bz, bv = bracket_gh(A, dal, dbe, u)
                res29 = max(res29, float(np.max(np.abs(bz - L[:, al, be]))))
                want_v = -G @ L[:, al, be] + R[:, al, be]
                res29 = max(res29, float(np.max(np.abs(bv - want_v))))
                wX = rho_tilde(A, dal, u)
                wY = rho_tilde(A, dbe, u)
                # anchor of the bracket vs Lie bracket of the anchors
                rX = lambda uu, s=dal: rho_tilde(A, s, uu)
                rY = lambda uu, s=dbe: rho_tilde(A, s, uu)
                lie = directional_diff(rY, u, wX) - directional_diff(rX, u, wY)
                br = GhSection.constant(bz, bv)
                res32 = max(res32, float(np.max(np.abs(rho_tilde(A, br, u) - lie))))
        dG = conn.dy(u, m)
        for al in range(A.p):
            dal = GhSection(z=(lambda uu, a=al: np.eye(A.p)[a]),
                            v=(lambda uu, a=al: -conn.at(uu)[:, a]))
            for b in range(r):
                vb = GhSection.natural_v(b, A.p, r)
                bz, bv = bracket_gh(A, dal, vb, u)
                res31 = max(res31, float(np.max(np.abs(bz))),
                            float(np.max(np.abs(bv - dG[:, al, b]))))
    out["adapted_bracket_curvature"] = CheckResult(res29, tol_fd)
    out["vertical_bracket_slope"] = CheckResult(res31, tol_fd)
    out["anchor_intertwines_bracket"] = CheckResult(res32, max(tol_fd, 1e-5))

    # duality of the adapted frame and coframe, exact
    res = 0.0
    for u in pts[:4]:
        for a in range(r):
            zc, vc = adapted_coframe(conn, a, u)
            for al in range(A.p):
                z, v = adapted_frame(conn, al, u)
                res = max(res, abs(float(zc @ z + vc @ v)))
            for b in range(r):
                want = 1.0 if a == b else 0.0
                res = max(res, abs(float(vc[b] - want)))
    out["coframe_duality"] = CheckResult(res, 1e-12)

    if isinstance(sys, LagrangeMechanicalSystem):
        res = 0.0
        for u in pts[:4]:
            ok = regularity(sys.lagrangian, u, m)
            res = max(res, 0.0 if ok else 1.0)
        out["regularity"] = CheckResult(res, 0.5)

        res = 0.0
        for u in pts[:8]:
            X = random_section(rng, m, A.p, r)
            res = max(res, semispray_equation_residual(sys, X, u))
        out["semispray_equation"] = CheckResult(res, TOL_SEMISPRAY)

    fundamental = getattr(descriptor, "fundamental", None)
    if fundamental is not None:
        samples = [random_point(rng, m, r, y_lo=0.4) for _ in range(10)]
        rep = finsler_validate(fundamental, samples, m)
        out["finsler_homogeneity"] = CheckResult(rep.homogeneity_residual, 1e-8)
        out["finsler_hessian_positive"] = CheckResult(
            0.0 if rep.min_sq_hessian_eig > 0 else abs(rep.min_sq_hessian_eig), 1e-12)

    return out
