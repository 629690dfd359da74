"""Generalized tangent bundle geometry: sections, brackets, connections.

The generalized tangent bundle over a rank-r bundle with an anchored
p-dimensional outer frame is spanned by p "horizontal-candidate" directions
and r vertical directions.  Sections are stored against that natural base;
adapted-frame views are computed on demand from a nonlinear connection.

Coefficient conventions (continuing algebroid.py):

    GhSection          z(u) -> (p,), v(u) -> (r,)
    RhoEtaConnection   gamma(u)[a, gamma_idx] -> (r, p)
    curvature          R[a, alpha, beta], antisymmetric in (alpha, beta)
    DistinguishedConnection blocks
        Hh(u)[alpha, beta, gamma]  (p, p, p)
        Hv(u)[a, b, gamma]         (r, r, p)
        Vh(u)[alpha, beta, c]      (p, p, r)
        Vv(u)[a, b, c]             (r, r, r)
    AdaptedTensorField axes ordered: horizontal contravariant, horizontal
        covariant, vertical contravariant, vertical covariant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .algebroid import DegeneracyError, GeneralizedLieAlgebroid
from .smooth import H_FD, check_finite, directional_diff, partial_diff

__all__ = [
    "GhSection", "GhCovector", "RhoEtaConnection", "DistinguishedConnection",
    "AdaptedTensorField", "rho_tilde", "pi_bang", "bracket_gh",
    "adapted_frame", "adapted_frame_section", "adapted_coframe",
    "vertical_proj", "horizontal_proj", "almost_product", "almost_tangent",
    "endomorphism", "nijenhuis", "curvature", "transform_connection",
    "tangent_block_matrix", "berwald", "h_cov_deriv", "v_cov_deriv",
    "cov_deriv_along",
]


@dataclass(frozen=True)
class GhSection:
    """Section of the generalized tangent bundle in natural-base coefficients."""

    z: Callable[[np.ndarray], np.ndarray]
    v: Callable[[np.ndarray], np.ndarray]

    def at(self, u: np.ndarray):
        u = np.asarray(u, dtype=float)
        z = check_finite(np.atleast_1d(np.asarray(self.z(u), dtype=float)), "section z")
        v = check_finite(np.atleast_1d(np.asarray(self.v(u), dtype=float)), "section v")
        return z, v

    @staticmethod
    def constant(z0, v0) -> "GhSection":
        z0 = np.atleast_1d(np.asarray(z0, dtype=float))
        v0 = np.atleast_1d(np.asarray(v0, dtype=float))
        return GhSection(z=lambda u: z0, v=lambda u: v0)

    @staticmethod
    def natural_h(alpha: int, p: int, r: int) -> "GhSection":
        e = np.zeros(p)
        e[alpha] = 1.0
        zr = np.zeros(r)
        return GhSection(z=lambda u: e, v=lambda u: zr)

    @staticmethod
    def natural_v(a: int, p: int, r: int) -> "GhSection":
        e = np.zeros(r)
        e[a] = 1.0
        zp = np.zeros(p)
        return GhSection(z=lambda u: zp, v=lambda u: e)


@dataclass(frozen=True)
class GhCovector:
    """Covector against the natural dual base."""

    zc: Callable[[np.ndarray], np.ndarray]
    vc: Callable[[np.ndarray], np.ndarray]

    def at(self, u: np.ndarray):
        u = np.asarray(u, dtype=float)
        zc = check_finite(np.atleast_1d(np.asarray(self.zc(u), dtype=float)), "covector zc")
        vc = check_finite(np.atleast_1d(np.asarray(self.vc(u), dtype=float)), "covector vc")
        return zc, vc

    def pair(self, X: GhSection, u: np.ndarray) -> float:
        zc, vc = self.at(u)
        z, v = X.at(u)
        return float(zc @ z + vc @ v)


@dataclass(frozen=True)
class RhoEtaConnection:
    """Nonlinear connection coefficients splitting the generalized tangent bundle."""

    gamma: Callable[[np.ndarray], np.ndarray]           # u -> (r, p)
    dgamma_dy: Optional[Callable[[np.ndarray], np.ndarray]] = None  # u -> (r, p, r)
    h_fd: float = H_FD

    def at(self, u: np.ndarray) -> np.ndarray:
        G = np.asarray(self.gamma(np.asarray(u, dtype=float)), dtype=float)
        return check_finite(np.atleast_2d(G), "connection coefficients")

    def dy(self, u: np.ndarray, m: int) -> np.ndarray:
        """d Gamma^a_gamma / d y^b, shape (r, p, r)."""
        u = np.asarray(u, dtype=float)
        if self.dgamma_dy is not None:
            return np.asarray(self.dgamma_dy(u), dtype=float)
        r_dim = u.size - m
        cols = [partial_diff(self.at, u, m + b, h=self.h_fd) for b in range(r_dim)]
        return np.stack(cols, axis=-1)

    @staticmethod
    def zero(r: int, p: int) -> "RhoEtaConnection":
        G = np.zeros((r, p))
        dG = np.zeros((r, p, r))
        return RhoEtaConnection(gamma=lambda u: G, dgamma_dy=lambda u: dG)


@dataclass(frozen=True)
class DistinguishedConnection:
    """Linear connection on the generalized tangent bundle preserving the split."""

    Hh: Callable[[np.ndarray], np.ndarray]
    Hv: Callable[[np.ndarray], np.ndarray]
    Vh: Callable[[np.ndarray], np.ndarray]
    Vv: Callable[[np.ndarray], np.ndarray]
    normal: bool = False


@dataclass(frozen=True)
class AdaptedTensorField:
    """Tensor field of arbitrary valence over the adapted frame and coframe.

    valence = (p_h, q_h, r_v, s_v): number of horizontal contravariant,
    horizontal covariant, vertical contravariant and vertical covariant
    indices, in that axis order.
    """

    valence: tuple[int, int, int, int]
    coeffs: Callable[[np.ndarray], np.ndarray]

    def at(self, u: np.ndarray, p: int, r: int) -> np.ndarray:
        T = np.asarray(self.coeffs(np.asarray(u, dtype=float)), dtype=float)
        ph, qh, rv, sv = self.valence
        want = (p,) * (ph + qh) + (r,) * (rv + sv)
        if T.shape != want:
            raise ValueError(f"tensor shape {T.shape} does not match valence {self.valence}")
        return T


def rho_tilde(A: GeneralizedLieAlgebroid, X: GhSection, u: np.ndarray) -> np.ndarray:
    """Image of a section under the bundle anchor: (m + r)-vector at u."""
    u = np.asarray(u, dtype=float)
    z, v = X.at(u)
    if A.m == 0:
        return v.copy()
    return np.concatenate([A.rho_h(u[: A.m]) @ z, v])


def _rho_dir(A: GeneralizedLieAlgebroid, rho_h_x: np.ndarray, z: np.ndarray,
             v: np.ndarray) -> np.ndarray:
    if A.m == 0:
        return v
    return np.concatenate([rho_h_x @ z, v])


def pi_bang(X: GhSection, u: np.ndarray) -> np.ndarray:
    """Projection onto the pulled-back factor: forgets the vertical part."""
    z, _ = X.at(u)
    return z


def bracket_gh(A: GeneralizedLieAlgebroid, X: GhSection, Y: GhSection,
               u: np.ndarray, h_fd: Optional[float] = None):
    """Bracket of two sections at u, in natural-base coefficients (z, v).

    Structure-function term on the outer factor plus directional derivatives
    of the coefficients along the anchor images of the arguments; the vertical
    part coincides with the vertical part of the Lie bracket of the anchor
    images.
    """
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    x = u[: A.m]
    rho_h_x = A.rho_h(x)
    z1, v1 = X.at(u)
    z2, v2 = Y.at(u)
    w1 = _rho_dir(A, rho_h_x, z1, v1)
    w2 = _rho_dir(A, rho_h_x, z2, v2)

    def zf(s: GhSection):
        return lambda uu: np.atleast_1d(np.asarray(s.z(uu), dtype=float))

    def vf(s: GhSection):
        return lambda uu: np.atleast_1d(np.asarray(s.v(uu), dtype=float))

    z3 = np.einsum("gab,a,b->g", A.L_h(x), z1, z2)
    z3 = z3 + directional_diff(zf(Y), u, w1, h=h) - directional_diff(zf(X), u, w2, h=h)
    v3 = directional_diff(vf(Y), u, w1, h=h) - directional_diff(vf(X), u, w2, h=h)
    return z3, v3


def adapted_frame(conn: RhoEtaConnection, alpha: int, u: np.ndarray):
    """Value of the adapted horizontal frame field at u: (z, v) pair."""
    G = conn.at(u)
    r, p = G.shape
    z = np.zeros(p)
    z[alpha] = 1.0
    return z, -G[:, alpha]


def adapted_frame_section(conn: RhoEtaConnection, alpha: int, p: int) -> GhSection:
    e = np.zeros(p)
    e[alpha] = 1.0
    return GhSection(z=lambda u: e, v=lambda u: -conn.at(u)[:, alpha])


def adapted_coframe(conn: RhoEtaConnection, a: int, u: np.ndarray):
    """Value of the adapted vertical coframe at u: (zc, vc) pair.

    Pairs to zero with every adapted frame vector and to the Kronecker delta
    with the vertical frame, exactly.
    """
    G = conn.at(u)
    r, p = G.shape
    vc = np.zeros(r)
    vc[a] = 1.0
    return G[a, :].copy(), vc


def vertical_proj(conn: RhoEtaConnection, X: GhSection, u: np.ndarray):
    z, v = X.at(u)
    G = conn.at(u)
    return np.zeros_like(z), v + G @ z


def horizontal_proj(conn: RhoEtaConnection, X: GhSection, u: np.ndarray):
    z, v = X.at(u)
    G = conn.at(u)
    return z.copy(), -(G @ z)


def almost_product(conn: RhoEtaConnection, X: GhSection, u: np.ndarray):
    z, v = X.at(u)
    G = conn.at(u)
    return z.copy(), -v - 2.0 * (G @ z)


def almost_tangent(A: GeneralizedLieAlgebroid, gh, X: GhSection, u: np.ndarray):
    """Vertical image of the horizontal coefficients through the inverse morphism.

    Requires matching ranks (the bundle is its own outer factor).
    """
    u = np.asarray(u, dtype=float)
    z, v = X.at(u)
    if z.size != v.size:
        raise ValueError("almost tangent structure requires equal ranks")
    gt = gh.tilde_at(A.h_map(u[: A.m]))
    return np.zeros_like(z), gt @ z


def endomorphism(tag: str, conn: Optional[RhoEtaConnection] = None,
                 gh=None, A: Optional[GeneralizedLieAlgebroid] = None):
    """Pointwise endomorphism {V, H, P, J} as a section-to-section map."""
    tag = tag.upper()
    if tag in ("V", "H", "P"):
        if conn is None:
            raise ValueError(f"endomorphism {tag} needs a connection")
        op = {"V": vertical_proj, "H": horizontal_proj, "P": almost_product}[tag]

        def wrap(X: GhSection) -> GhSection:
            return GhSection(z=lambda u: op(conn, X, u)[0],
                             v=lambda u: op(conn, X, u)[1])
        return wrap
    if tag == "J":
        if gh is None or A is None:
            raise ValueError("endomorphism J needs the morphism and the algebroid")

        def wrapj(X: GhSection) -> GhSection:
            return GhSection(z=lambda u: almost_tangent(A, gh, X, u)[0],
                             v=lambda u: almost_tangent(A, gh, X, u)[1])
        return wrapj
    raise ValueError(f"unknown endomorphism tag {tag!r}")


def nijenhuis(A: GeneralizedLieAlgebroid, tag: str, conn: Optional[RhoEtaConnection],
              gh, X: GhSection, Y: GhSection, u: np.ndarray,
              h_fd: Optional[float] = None):
    """Nijenhuis bracket defect of an endomorphism on a pair of sections.

    N_e(X, Y) = [eX, eY] + e^2 [X, Y] - e [eX, Y] - e [X, eY]
    """
    e = endomorphism(tag, conn=conn, gh=gh, A=A)
    eX, eY = e(X), e(Y)

    def as_section(zv):
        return GhSection.constant(zv[0], zv[1])

    t1 = bracket_gh(A, eX, eY, u, h_fd=h_fd)
    t2 = bracket_gh(A, X, Y, u, h_fd=h_fd)
    ee_t2 = e(e(as_section(t2)))
    t3 = bracket_gh(A, eX, Y, u, h_fd=h_fd)
    t4 = bracket_gh(A, X, eY, u, h_fd=h_fd)
    e_t3 = e(as_section(t3))
    e_t4 = e(as_section(t4))
    z = t1[0] + ee_t2.z(u) - e_t3.z(u) - e_t4.z(u)
    v = t1[1] + ee_t2.v(u) - e_t3.v(u) - e_t4.v(u)
    return z, v


def curvature(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
              u: np.ndarray, h_fd: Optional[float] = None) -> np.ndarray:
    """Curvature of the nonlinear connection, shape (r, p, p).

    R[a, alpha, beta] is the obstruction to involutivity of the horizontal
    distribution: the adapted-frame derivative of Gamma antisymmetrized plus
    the structure-function term.
    """
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    x = u[: A.m]
    G = conn.at(u)
    r, p = G.shape
    rho_h_x = A.rho_h(x)
    L = A.L_h(x)
    DG = np.empty((p, r, p))
    for beta in range(p):
        w = _rho_dir(A, rho_h_x, np.eye(p)[beta], -G[:, beta])
        DG[beta] = directional_diff(conn.at, u, w, h=h)
    R = np.empty((r, p, p))
    for al in range(p):
        for be in range(p):
            R[:, al, be] = DG[be][:, al] - DG[al][:, be] + G @ L[:, al, be]
    return R


def tangent_block_matrix(A: GeneralizedLieAlgebroid, cc, u: np.ndarray,
                         h_fd: Optional[float] = None) -> np.ndarray:
    """Chart-change matrix of the generalized tangent bundle at u.

    Lower block-triangular: outer-frame change on top, fibre change below,
    with the anchor-weighted derivative of the fibre matrix coupling them.
    Acts on natural coefficients (z, v).
    """
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    m = A.m
    x, y = u[:m], u[m:]
    r = y.size
    Lam = cc.Lam(A.h_map(x))
    p = Lam.shape[0]
    B = np.zeros((p + r, p + r))
    B[:p, :p] = Lam
    B[p:, p:] = cc.M(x)
    if m > 0:
        rho_h_x = A.rho_h(x)
        Mfn = lambda xx: np.asarray(cc.M(xx), dtype=float)
        dM = np.stack([partial_diff(Mfn, x, i, h=h) for i in range(m)], axis=-1)
        B[p:, :p] = np.einsum("ig,abi,b->ag", rho_h_x, dM, y)
    return B


def transform_connection(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
                         cc, h_fd: Optional[float] = None) -> RhoEtaConnection:
    """Connection coefficients in the target chart of a chart change.

    The returned evaluator takes points in the new coordinates; the chart
    change must carry an explicit base-map inverse.
    """
    h = h_fd if h_fd is not None else A.h_fd
    m = A.m

    def gamma_prime(up: np.ndarray) -> np.ndarray:
        up = np.asarray(up, dtype=float)
        xp, yp = up[:m], up[m:]
        x = cc.base_map.inverse(xp) if m > 0 else xp
        M = cc.M(x)
        Minv_fn = lambda xx: np.linalg.inv(cc.M(xx))
        y = Minv_fn(x) @ yp
        G = conn.at(np.concatenate([x, y]))
        Lam_h = cc.Lam(A.h_map(x))
        Lam_inv = np.linalg.inv(Lam_h)
        core = G.copy()
        if m > 0:
            rho_h_x = A.rho_h(x)
            dMinv = np.stack([partial_diff(Minv_fn, x, k, h=h) for k in range(m)],
                             axis=-1)  # (a, b', k)
            core = core + np.einsum("kg,abk,b->ag", rho_h_x, dMinv, yp)
        return M @ core @ Lam_inv

    return RhoEtaConnection(gamma=gamma_prime, h_fd=h)


def berwald(conn: RhoEtaConnection, m: int, p: int, r: int) -> DistinguishedConnection:
    """Berwald-type distinguished connection: fibre derivative of the coefficients.

    Requires matching ranks so the horizontal block can reuse the same array;
    the vertical blocks vanish.  Flagged normal.
    """
    if p != r:
        raise ValueError("Berwald identification requires equal ranks")

    def hblock(u):
        dG = conn.dy(np.asarray(u, dtype=float), m)   # (a, gamma, b)
        return np.transpose(dG, (0, 2, 1))            # (a, b, gamma)

    zHv = lambda u: np.zeros((p, p, r))
    return DistinguishedConnection(Hh=hblock, Hv=hblock, Vh=zHv, Vv=zHv, normal=True)


def _apply_linear_blocks(T: np.ndarray, valence, Hmat_h: np.ndarray,
                         Hmat_v: np.ndarray) -> np.ndarray:
    """Sum of one-index corrections: + on contravariant, - on covariant axes."""
    ph, qh, rv, sv = valence
    out = np.zeros_like(T)
    axis = 0
    for _ in range(ph):
        out += np.moveaxis(np.tensordot(Hmat_h, T, axes=(1, axis)), 0, axis)
        axis += 1
    for _ in range(qh):
        out -= np.moveaxis(np.tensordot(Hmat_h.T, T, axes=(1, axis)), 0, axis)
        axis += 1
    for _ in range(rv):
        out += np.moveaxis(np.tensordot(Hmat_v, T, axes=(1, axis)), 0, axis)
        axis += 1
    for _ in range(sv):
        out -= np.moveaxis(np.tensordot(Hmat_v.T, T, axes=(1, axis)), 0, axis)
        axis += 1
    return out


def h_cov_deriv(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
                dconn: DistinguishedConnection, T: AdaptedTensorField,
                gamma_idx: int, u: np.ndarray,
                h_fd: Optional[float] = None) -> np.ndarray:
    """Horizontal covariant derivative of T along one adapted direction."""
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    x = u[: A.m]
    G = conn.at(u)
    r, p = G.shape
    rho_h_x = A.rho_h(x)
    w = _rho_dir(A, rho_h_x, np.eye(p)[gamma_idx], -G[:, gamma_idx])
    Tfn = lambda uu: T.at(uu, p, r)
    out = directional_diff(Tfn, u, w, h=h)
    Hh = np.asarray(dconn.Hh(u), dtype=float)[:, :, gamma_idx]
    Hv = np.asarray(dconn.Hv(u), dtype=float)[:, :, gamma_idx]
    return out + _apply_linear_blocks(T.at(u, p, r), T.valence, Hh, Hv)


def v_cov_deriv(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
                dconn: DistinguishedConnection, T: AdaptedTensorField,
                c_idx: int, u: np.ndarray,
                h_fd: Optional[float] = None) -> np.ndarray:
    """Vertical covariant derivative of T along one fibre direction."""
    u = np.asarray(u, dtype=float)
    h = h_fd if h_fd is not None else A.h_fd
    G = conn.at(u)
    r, p = G.shape
    Tfn = lambda uu: T.at(uu, p, r)
    out = partial_diff(Tfn, u, A.m + c_idx, h=h)
    Vh = np.asarray(dconn.Vh(u), dtype=float)[:, :, c_idx]
    Vv = np.asarray(dconn.Vv(u), dtype=float)[:, :, c_idx]
    return out + _apply_linear_blocks(T.at(u, p, r), T.valence, Vh, Vv)


def cov_deriv_along(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
                    dconn: DistinguishedConnection, X: GhSection,
                    T: AdaptedTensorField, u: np.ndarray,
                    h_fd: Optional[float] = None) -> np.ndarray:
    """Covariant derivative of T along X, using X's adapted coefficients."""
    u = np.asarray(u, dtype=float)
    z, v = X.at(u)
    G = conn.at(u)
    v_ad = v + G @ z
    out = None
    for g_idx, zg in enumerate(z):
        if zg != 0.0:
            term = zg * h_cov_deriv(A, conn, dconn, T, g_idx, u, h_fd=h_fd)
            out = term if out is None else out + term
    for c_idx, vc in enumerate(v_ad):
        if vc != 0.0:
            term = vc * v_cov_deriv(A, conn, dconn, T, c_idx, u, h_fd=h_fd)
            out = term if out is None else out + term
    if out is None:
        r, p = G.shape
        out = np.zeros_like(T.at(u, p, r))
    return out
