"""Shipped example systems with independent reference oracles.

Each preset bundles a system, a default initial state, named conserved
quantities, and an oracle that integrates an independently written form of
the same dynamics (classical Euler-Lagrange, Euler rigid-body equations,
Christoffel geodesics, quasi-velocity mechanics).  The oracles never touch
the covector/semispray pipeline, so agreement is a genuine cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .algebroid import GeneralizedLieAlgebroid, structure_from_frame
from .dynamics import Trajectory
from .mechanics import (
    ExternalForce,
    GhMorphism,
    Lagrangian,
    LagrangeMechanicalSystem,
    MechanicalSystem,
    energy,
)
from .geometry import RhoEtaConnection

__all__ = ["PresetDescriptor", "build", "PRESET_NAMES", "classical_el_reference"]

PRESET_NAMES = (
    "free_particle",
    "pendulum",
    "damped_pendulum",
    "rigid_body_so3",
    "riemannian_2d",
    "finsler_euclidean",
    "twisted_frame",
)


@dataclass(frozen=True)
class PresetDescriptor:
    name: str
    system: object                      # LagrangeMechanicalSystem | MechanicalSystem
    kind: str                           # "lagrange" | "mechanical"
    default_state: tuple[np.ndarray, np.ndarray]
    oracle: Optional[Callable[..., Trajectory]] = None
    conserved: Dict[str, Callable[[np.ndarray], float]] = field(default_factory=dict)
    energy_fn: Optional[Callable[[np.ndarray], float]] = None
    fundamental: Optional[Lagrangian] = None
    extras: Dict[str, Callable] = field(default_factory=dict)
    notes: str = ""


def _mini_rk4(f: Callable[[np.ndarray], np.ndarray], s0: np.ndarray,
              t0: float, t1: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    n = int(round((t1 - t0) / dt))
    ts = t0 + dt * np.arange(n + 1)
    out = np.empty((n + 1, s0.size))
    s = s0.astype(float).copy()
    for k in range(n + 1):
        out[k] = s
        if k == n:
            break
        k1 = f(s)
        k2 = f(s + 0.5 * dt * k1)
        k3 = f(s + 0.5 * dt * k2)
        k4 = f(s + dt * k3)
        s = s + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return ts, out


def classical_el_reference(jets, m: int):
    """Reference integrator for classical coordinates: solves
    d/dt (dL/dv) = dL/dx with dx/dt = v from supplied analytic jets.

    jets must provide Lx(u), Lv(u), Lxv(u) (m, r), Lvv(u) (r, r) with
    u = concat(x, v).  Independent of the covector pipeline.
    """
    Lx, Lv, Lxv, Lvv = jets

    def rhs(s: np.ndarray) -> np.ndarray:
        x, v = s[:m], s[m:]
        u = np.concatenate([x, v])
        rhs_v = np.linalg.solve(Lvv(u), Lx(u) - Lxv(u).T @ v)
        return np.concatenate([v, rhs_v])

    def run(x0, y0, t0, t1, dt) -> Trajectory:
        s0 = np.concatenate([np.atleast_1d(x0).astype(float),
                             np.atleast_1d(y0).astype(float)])
        ts, out = _mini_rk4(rhs, s0, t0, t1, dt)
        return Trajectory(t=ts, x=out[:, :m], y=out[:, m:])
    return run


def _free_particle() -> PresetDescriptor:
    m = r = 2
    A = GeneralizedLieAlgebroid.classical(m)
    L = Lagrangian(
        value=lambda u: 0.5 * float(u[m:] @ u[m:]),
        grad_x=lambda u: np.zeros(m),
        grad_y=lambda u: u[m:].copy(),
        hess_xy=lambda u: np.zeros((m, r)),
        hess_yy=lambda u: np.eye(r),
    )
    sys = LagrangeMechanicalSystem(algebroid=A, lagrangian=L,
                                   force=ExternalForce.zero(r),
                                   gh=GhMorphism.identity(r))

    def oracle(x0, y0, t0, t1, dt) -> Trajectory:
        n = int(round((t1 - t0) / dt))
        ts = t0 + dt * np.arange(n + 1)
        x0 = np.atleast_1d(x0).astype(float)
        y0 = np.atleast_1d(y0).astype(float)
        xs = x0[None, :] + (ts - t0)[:, None] * y0[None, :]
        ys = np.tile(y0, (n + 1, 1))
        return Trajectory(t=ts, x=xs, y=ys)

    efn = lambda u: energy(L, u, m)
    return PresetDescriptor(
        name="free_particle", system=sys, kind="lagrange",
        default_state=(np.zeros(2), np.array([1.0, 0.5])),
        oracle=oracle, energy_fn=efn,
        conserved={"p1": lambda u: float(u[m]), "p2": lambda u: float(u[m + 1])},
        notes="flat 2-d free motion; straight-line oracle")


def _pendulum_lagrangian() -> Lagrangian:
    return Lagrangian(
        value=lambda u: 0.5 * u[1] ** 2 - (1.0 - np.cos(u[0])),
        grad_x=lambda u: np.array([-np.sin(u[0])]),
        grad_y=lambda u: np.array([u[1]]),
        hess_xy=lambda u: np.zeros((1, 1)),
        hess_yy=lambda u: np.eye(1),
    )


def _pendulum() -> PresetDescriptor:
    m = r = 1
    A = GeneralizedLieAlgebroid.classical(1)
    L = _pendulum_lagrangian()
    sys = LagrangeMechanicalSystem(algebroid=A, lagrangian=L,
                                   force=ExternalForce.zero(1),
                                   gh=GhMorphism.identity(1))
    oracle = classical_el_reference(
        (lambda u: np.array([-np.sin(u[0])]),
         lambda u: np.array([u[1]]),
         lambda u: np.zeros((1, 1)),
         lambda u: np.eye(1)), m)
    efn = lambda u: energy(L, u, m)
    return PresetDescriptor(
        name="pendulum", system=sys, kind="lagrange",
        default_state=(np.array([1.2]), np.array([0.3])),
        oracle=oracle, energy_fn=efn, conserved={},
        notes="unit-constant pendulum; classical Euler-Lagrange oracle")


def _damped_pendulum(gamma: float = 0.5) -> PresetDescriptor:
    m = r = 1
    A = GeneralizedLieAlgebroid.classical(1)
    half = 0.5 * gamma
    force = ExternalForce(
        f=lambda u: np.array([-2.0 * gamma * u[1]]),
        df_dy=lambda u: np.array([[-2.0 * gamma]]),
        d2f_dy=lambda u: np.zeros((1, 1, 1)))
    # the connection matching these coefficients: d(G - F/4)/dy = gamma/2
    conn = RhoEtaConnection(gamma=lambda u: np.array([[half]]),
                            dgamma_dy=lambda u: np.zeros((1, 1, 1)))
    sys = MechanicalSystem(
        algebroid=A, force=force, conn=conn,
        G=lambda u: np.array([0.5 * np.sin(u[0])]),
        gh=GhMorphism.identity(1))

    def rhs(s):
        return np.array([s[1], -np.sin(s[0]) - gamma * s[1]])

    def oracle(x0, y0, t0, t1, dt) -> Trajectory:
        s0 = np.concatenate([np.atleast_1d(x0), np.atleast_1d(y0)]).astype(float)
        ts, out = _mini_rk4(rhs, s0, t0, t1, dt)
        return Trajectory(t=ts, x=out[:, :1], y=out[:, 1:])

    Lp = _pendulum_lagrangian()
    efn = lambda u: energy(Lp, u, 1)
    return PresetDescriptor(
        name="damped_pendulum", system=sys, kind="mechanical",
        default_state=(np.array([1.2]), np.array([0.3])),
        oracle=oracle, energy_fn=efn, conserved={},
        notes=f"dissipative pipeline, gamma={gamma}; dE/dt = -gamma y^2")


def _rigid_body(I=(1.0, 2.0, 3.0)) -> PresetDescriptor:
    I = np.asarray(I, dtype=float)
    eps = np.zeros((3, 3, 3))
    for a, b, c, s in ((0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
                       (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0)):
        eps[c, a, b] = s
    A = GeneralizedLieAlgebroid.lie_algebra(eps)
    L = Lagrangian(
        value=lambda u: 0.5 * float(I @ (u * u)),
        grad_x=lambda u: np.zeros(0),
        grad_y=lambda u: I * u,
        hess_xy=lambda u: np.zeros((0, 3)),
        hess_yy=lambda u: np.diag(I),
    )
    sys = LagrangeMechanicalSystem(algebroid=A, lagrangian=L,
                                   force=ExternalForce.zero(3),
                                   gh=GhMorphism.identity(3))

    def rhs(w):
        return np.array([
            (I[1] - I[2]) * w[1] * w[2] / I[0],
            (I[2] - I[0]) * w[2] * w[0] / I[1],
            (I[0] - I[1]) * w[0] * w[1] / I[2],
        ])

    def oracle(x0, y0, t0, t1, dt) -> Trajectory:
        s0 = np.atleast_1d(y0).astype(float)
        ts, out = _mini_rk4(rhs, s0, t0, t1, dt)
        return Trajectory(t=ts, x=np.zeros((ts.size, 0)), y=out)

    efn = lambda u: energy(L, u, 0)
    casimir = lambda u: float(np.sum((I * u) ** 2))
    return PresetDescriptor(
        name="rigid_body_so3", system=sys, kind="lagrange",
        default_state=(np.zeros(0), np.array([1.0, 1.0, 1.0])),
        oracle=oracle, energy_fn=efn,
        conserved={"casimir": casimir},
        notes="free asymmetric top on the rotation algebra; Euler oracle")


def _conformal_phi(x: np.ndarray) -> float:
    return 0.3 * np.sin(x[0]) * np.cos(x[1])


def _conformal_dphi(x: np.ndarray) -> np.ndarray:
    return np.array([0.3 * np.cos(x[0]) * np.cos(x[1]),
                     -0.3 * np.sin(x[0]) * np.sin(x[1])])


def _riemannian_2d() -> PresetDescriptor:
    m = r = 2
    A = GeneralizedLieAlgebroid.classical(2)

    def val(u):
        x, y = u[:2], u[2:]
        return 0.5 * np.exp(2.0 * _conformal_phi(x)) * float(y @ y)

    def gx(u):
        x, y = u[:2], u[2:]
        return _conformal_dphi(x) * np.exp(2.0 * _conformal_phi(x)) * float(y @ y)

    def gy(u):
        x, y = u[:2], u[2:]
        return np.exp(2.0 * _conformal_phi(x)) * y

    def hxy(u):
        x, y = u[:2], u[2:]
        return 2.0 * np.exp(2.0 * _conformal_phi(x)) * np.outer(_conformal_dphi(x), y)

    def hyy(u):
        x = u[:2]
        return np.exp(2.0 * _conformal_phi(x)) * np.eye(2)

    L = Lagrangian(value=val, grad_x=gx, grad_y=gy, hess_xy=hxy, hess_yy=hyy)
    sys = LagrangeMechanicalSystem(algebroid=A, lagrangian=L,
                                   force=ExternalForce.zero(2),
                                   gh=GhMorphism.identity(2))

    def christoffel(x: np.ndarray) -> np.ndarray:
        """Conformal-metric symbols C[k, i, j] = d^k_i f_j + d^k_j f_i - delta_ij f_k."""
        f = _conformal_dphi(x)
        C = np.zeros((2, 2, 2))
        for k in range(2):
            for i in range(2):
                for j in range(2):
                    C[k, i, j] = ((k == i) * f[j] + (k == j) * f[i]
                                  - (i == j) * f[k])
        return C

    def rhs(s):
        x, v = s[:2], s[2:]
        C = christoffel(x)
        acc = -np.einsum("kij,i,j->k", C, v, v)
        return np.concatenate([v, acc])

    def oracle(x0, y0, t0, t1, dt) -> Trajectory:
        s0 = np.concatenate([np.atleast_1d(x0), np.atleast_1d(y0)]).astype(float)
        ts, out = _mini_rk4(rhs, s0, t0, t1, dt)
        return Trajectory(t=ts, x=out[:, :2], y=out[:, 2:])

    efn = lambda u: energy(L, u, m)
    return PresetDescriptor(
        name="riemannian_2d", system=sys, kind="lagrange",
        default_state=(np.array([0.1, -0.2]), np.array([0.7, 0.4])),
        oracle=oracle, energy_fn=efn, conserved={},
        extras={"christoffel": christoffel},
        notes="conformally flat metric exp(2 phi) I; Christoffel geodesic oracle")


def _finsler_euclidean() -> PresetDescriptor:
    m = r = 2
    A = GeneralizedLieAlgebroid.classical(2)
    F = Lagrangian(value=lambda u: float(np.linalg.norm(u[m:])), fibre_smooth=False)
    L = Lagrangian(
        value=lambda u: 0.5 * float(u[m:] @ u[m:]),
        grad_x=lambda u: np.zeros(m),
        grad_y=lambda u: u[m:].copy(),
        hess_xy=lambda u: np.zeros((m, r)),
        hess_yy=lambda u: np.eye(r),
    )
    sys = LagrangeMechanicalSystem(algebroid=A, lagrangian=L,
                                   force=ExternalForce.zero(r),
                                   gh=GhMorphism.identity(r))

    def oracle(x0, y0, t0, t1, dt) -> Trajectory:
        n = int(round((t1 - t0) / dt))
        ts = t0 + dt * np.arange(n + 1)
        x0 = np.atleast_1d(x0).astype(float)
        y0 = np.atleast_1d(y0).astype(float)
        xs = x0[None, :] + (ts - t0)[:, None] * y0[None, :]
        return Trajectory(t=ts, x=xs, y=np.tile(y0, (n + 1, 1)))

    efn = lambda u: energy(L, u, m)
    return PresetDescriptor(
        name="finsler_euclidean", system=sys, kind="lagrange",
        default_state=(np.zeros(2), np.array([1.0, 1.0])),
        oracle=oracle, energy_fn=efn,
        conserved={"F": lambda u: float(np.linalg.norm(u[m:]))},
        fundamental=F,
        notes="Euclidean norm fundamental function; energy is half its square")


def _twisted_frame() -> PresetDescriptor:
    m = r = 2

    def theta(x):
        return np.diag([1.0, 1.0 + x[0]])

    def theta_jac(x):
        d = np.zeros((2, 2, 2))
        d[1, 1, 0] = 1.0
        return d

    A = structure_from_frame(theta, m=2, theta_jac=theta_jac)
    L = Lagrangian(
        value=lambda u: 0.5 * float(u[m:] @ u[m:]),
        grad_x=lambda u: np.zeros(m),
        grad_y=lambda u: u[m:].copy(),
        hess_xy=lambda u: np.zeros((m, r)),
        hess_yy=lambda u: np.eye(r),
    )
    sys = LagrangeMechanicalSystem(algebroid=A, lagrangian=L,
                                   force=ExternalForce.zero(r),
                                   gh=GhMorphism.identity(r))

    # Quasi-velocity oracle: with v = theta(x) y the same motion is classical
    # with Lbar(x, v) = (v1^2 + v2^2 / (1 + x1)^2) / 2.
    def Lbar_x(u):
        x, v = u[:2], u[2:]
        return np.array([-v[1] ** 2 / (1.0 + x[0]) ** 3, 0.0])

    def Lbar_v(u):
        x, v = u[:2], u[2:]
        return np.array([v[0], v[1] / (1.0 + x[0]) ** 2])

    def Lbar_xv(u):
        x, v = u[:2], u[2:]
        out = np.zeros((2, 2))
        out[0, 1] = -2.0 * v[1] / (1.0 + x[0]) ** 3
        return out

    def Lbar_vv(u):
        x = u[:2]
        return np.diag([1.0, 1.0 / (1.0 + x[0]) ** 2])

    classical = classical_el_reference((Lbar_x, Lbar_v, Lbar_xv, Lbar_vv), m)

    def oracle(x0, y0, t0, t1, dt) -> Trajectory:
        v0 = theta(np.atleast_1d(x0)) @ np.atleast_1d(y0)
        ref = classical(x0, v0, t0, t1, dt)
        ys = np.stack([np.linalg.solve(theta(ref.x[i]), ref.y[i])
                       for i in range(len(ref))])
        return Trajectory(t=ref.t, x=ref.x, y=ys)

    efn = lambda u: energy(L, u, m)
    return PresetDescriptor(
        name="twisted_frame", system=sys, kind="lagrange",
        default_state=(np.array([0.0, 0.0]), np.array([0.3, 0.4])),
        oracle=oracle, energy_fn=efn, conserved={},
        notes="moving-frame algebroid diag(1, 1+x1); quasi-velocity oracle")


_BUILDERS = {
    "free_particle": _free_particle,
    "pendulum": _pendulum,
    "damped_pendulum": _damped_pendulum,
    "rigid_body_so3": _rigid_body,
    "riemannian_2d": _riemannian_2d,
    "finsler_euclidean": _finsler_euclidean,
    "twisted_frame": _twisted_frame,
}


def build(name: str) -> PresetDescriptor:
    """Construct a shipped preset by name."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    return builder()
