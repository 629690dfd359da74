"""Curve lifts, trajectory integration, and transport diagnostics.

The bundle state (x, y) is evolved jointly: the base flow is the anchor
image of the semispray and the fibre flow is its vertical component, so the
velocity-compatibility condition of a lift holds by construction up to the
integrator's order.  Fixed-step classical rk4 is the default scheme; explicit
Euler is retained for order comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .algebroid import GeneralizedLieAlgebroid
from .geometry import RhoEtaConnection
from .mechanics import (
    GhMorphism,
    LagrangeMechanicalSystem,
    MechanicalSystem,
    canonical_semispray,
    energy,
    mechanical_semispray,
)

__all__ = [
    "LiftedState", "Trajectory", "DivergenceError", "el_rhs", "integrate",
    "lift_residual", "parallel_transport", "geodesic_check",
]

DIVERGENCE_CUTOFF = 1e8


class DivergenceError(RuntimeError):
    """State norm exceeded the divergence cutoff; carries the partial run."""

    def __init__(self, msg: str, trajectory: "Trajectory" = None):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass(frozen=True)
class LiftedState:
    t: float
    x: np.ndarray
    y: np.ndarray

    @property
    def u(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])


@dataclass
class Trajectory:
    """Uniformly sampled lift with per-sample diagnostics."""

    t: np.ndarray                       # (n,)
    x: np.ndarray                       # (n, m)
    y: np.ndarray                       # (n, r)
    diagnostics: Dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.size

    def state(self, i: int) -> LiftedState:
        return LiftedState(t=float(self.t[i]), x=self.x[i].copy(), y=self.y[i].copy())

    def u(self, i: int) -> np.ndarray:
        return np.concatenate([self.x[i], self.y[i]])

    def base_interpolant(self, sys) -> Callable[[float], np.ndarray]:
        """Cubic Hermite interpolant of the base path, slopes from the lift."""
        slopes = np.stack([_base_velocity(sys, self.u(i)) for i in range(len(self))])
        t = self.t
        x = self.x

        def curve(tt: float) -> np.ndarray:
            tt = float(np.clip(tt, t[0], t[-1]))
            k = int(np.clip(np.searchsorted(t, tt, side="right") - 1, 0, len(t) - 2))
            h = t[k + 1] - t[k]
            s = (tt - t[k]) / h
            h00 = (1 + 2 * s) * (1 - s) ** 2
            h10 = s * (1 - s) ** 2
            h01 = s * s * (3 - 2 * s)
            h11 = s * s * (s - 1)
            return (h00 * x[k] + h10 * h * slopes[k]
                    + h01 * x[k + 1] + h11 * h * slopes[k + 1])
        return curve


def _base_velocity(sys, u: np.ndarray) -> np.ndarray:
    A = sys.algebroid
    m = A.m
    if m == 0:
        return np.zeros(0)
    x, y = u[:m], u[m:]
    kap = A.h_map(x)
    return A.rho_h(x) @ (sys.gh.at(kap) @ y)


def el_rhs(sys, state) -> tuple[np.ndarray, np.ndarray]:
    """Joint right side (dx, dy) of the lifted equations of motion.

    dx is the anchor image of the morphism-weighted fibre velocity; dy is the
    vertical semispray component of whichever pipeline the system follows.
    """
    if isinstance(state, LiftedState):
        u = state.u
    else:
        x0, y0 = state
        u = np.concatenate([np.atleast_1d(np.asarray(x0, dtype=float)).ravel(),
                            np.atleast_1d(np.asarray(y0, dtype=float)).ravel()])
    dx = _base_velocity(sys, u)
    if isinstance(sys, LagrangeMechanicalSystem):
        dy = canonical_semispray(sys, u).combo
    elif isinstance(sys, MechanicalSystem):
        dy = mechanical_semispray(sys, u)
    else:
        raise TypeError(f"unsupported system type {type(sys).__name__}")
    return dx, dy


def _rk4_step(f: Callable[[np.ndarray], np.ndarray], s: np.ndarray,
              dt: float) -> np.ndarray:
    k1 = f(s)
    k2 = f(s + 0.5 * dt * k1)
    k3 = f(s + 0.5 * dt * k2)
    k4 = f(s + dt * k3)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _euler_step(f, s, dt):
    return s + dt * f(s)

_STEPPERS = {"rk4": _rk4_step, "euler": _euler_step}


def integrate(sys, state0, t1: float, dt: float, method: str = "rk4",
              t0: float = 0.0,
              diagnostics: Optional[Dict[str, Callable[[np.ndarray], float]]] = None,
              ) -> Trajectory:
    """Fixed-step integration of the lifted equations of motion.

    diagnostics maps names to scalar functions of the bundle point, sampled
    at every step.  Lagrange systems automatically record the energy as E_L.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    if method not in _STEPPERS:
        raise ValueError(f"unknown method {method!r}; use one of {sorted(_STEPPERS)}")
    step = _STEPPERS[method]

    A = sys.algebroid
    m = A.m
    x0, y0 = state0
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).ravel()
    y0 = np.atleast_1d(np.asarray(y0, dtype=float)).ravel()
    if x0.size != m:
        raise ValueError(f"base point has size {x0.size}, expected {m}")

    diag_fns: Dict[str, Callable] = {}
    if isinstance(sys, LagrangeMechanicalSystem):
        diag_fns["E_L"] = lambda u: energy(sys.lagrangian, u, m)
    if diagnostics:
        diag_fns.update(diagnostics)

    def f(s: np.ndarray) -> np.ndarray:
        dx, dy = el_rhs(sys, (s[:m], s[m:]))
        return np.concatenate([dx, dy])

    n = int(round((t1 - t0) / dt))
    ts = t0 + dt * np.arange(n + 1)
    xs = np.empty((n + 1, m))
    ys = np.empty((n + 1, y0.size))
    diag = {name: np.empty(n + 1) for name in diag_fns}

    s = np.concatenate([x0, y0])
    for k in range(n + 1):
        xs[k] = s[:m]
        ys[k] = s[m:]
        for name, fn in diag_fns.items():
            diag[name][k] = fn(s)
        if k == n:
            break
        s_next = step(f, s, dt)
        if (not np.all(np.isfinite(s_next))) or np.linalg.norm(s_next) > DIVERGENCE_CUTOFF:
            partial = Trajectory(t=ts[: k + 1], x=xs[: k + 1], y=ys[: k + 1],
                                 diagnostics={nm: a[: k + 1] for nm, a in diag.items()})
            raise DivergenceError(
                f"state diverged at t={ts[k]:.6g} (last good sample kept)",
                trajectory=partial)
        s = s_next
    return Trajectory(t=ts, x=xs, y=ys, diagnostics=diag)


def lift_residual(A: GeneralizedLieAlgebroid, gh: GhMorphism,
                  traj: Trajectory) -> float:
    """Velocity-compatibility defect of a trajectory.

    Max over interior samples of the mismatch between the centered time
    derivative of the base path and the anchor image of the fibre component.
    """
    n = len(traj)
    if n < 3:
        raise ValueError("need at least three samples")
    if A.m == 0:
        return 0.0
    worst = 0.0
    for k in range(1, n - 1):
        dt = traj.t[k + 1] - traj.t[k - 1]
        dxdt = (traj.x[k + 1] - traj.x[k - 1]) / dt
        x = traj.x[k]
        pred = A.rho_h(x) @ (gh.at(A.h_map(x)) @ traj.y[k])
        worst = max(worst, float(np.max(np.abs(dxdt - pred))))
    return worst


def parallel_transport(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection,
                       gh: GhMorphism, base_curve: Callable[[float], np.ndarray],
                       u0: np.ndarray, t1: float, dt: float, t0: float = 0.0,
                       method: str = "rk4") -> Trajectory:
    """Transport a fibre vector along a base curve with the given connection.

    Integrates du/dt = -Gamma(x(t), u) g(h(x(t))) u; the connection is
    evaluated at the transported vector's own fibre point, which is the
    parallelism condition for lifts.
    """
    if method not in _STEPPERS:
        raise ValueError(f"unknown method {method!r}")
    u0 = np.atleast_1d(np.asarray(u0, dtype=float)).ravel()
    m = A.m

    n = int(round((t1 - t0) / dt))
    ts = t0 + dt * np.arange(n + 1)
    us = np.empty((n + 1, u0.size))
    xs = np.empty((n + 1, m))

    u = u0.copy()
    for k in range(n + 1):
        tk = ts[k]
        xs[k] = base_curve(tk)
        us[k] = u
        if k == n:
            break

        def rhs_at(tt):
            x = np.asarray(base_curve(tt), dtype=float)
            gmat = gh.at(A.h_map(x))

            def f(v):
                G = conn.at(np.concatenate([x, v]))
                return -(G @ (gmat @ v))
            return f

        # classical rk4 with time-frozen base evaluations at substep times
        f0 = rhs_at(tk)
        fm = rhs_at(tk + 0.5 * dt)
        f1 = rhs_at(tk + dt)
        k1 = f0(u)
        if method == "euler":
            u = u + dt * k1
        else:
            k2 = fm(u + 0.5 * dt * k1)
            k3 = fm(u + 0.5 * dt * k2)
            k4 = f1(u + dt * k3)
            u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)) or np.linalg.norm(u) > DIVERGENCE_CUTOFF:
            raise DivergenceError(f"transport diverged at t={tk:.6g}")
    return Trajectory(t=ts, x=xs, y=us)


def geodesic_check(traj: Trajectory, reference: Optional[Trajectory] = None,
                   fundamental: Optional[Callable[[np.ndarray], float]] = None,
                   ) -> Dict[str, float]:
    """Geodesic diagnostics for a trajectory.

    chord_deviation: max distance of the base path from the straight chord
    between its endpoints (meaningful for flat systems); f_drift: max drift
    of a fundamental fibre function along the run; ref_error: max state
    difference against a reference trajectory on the shared grid.
    """
    report: Dict[str, float] = {}
    t = traj.t
    span = t[-1] - t[0]
    if traj.x.shape[1] > 0 and span > 0:
        s = ((t - t[0]) / span)[:, None]
        chord = (1.0 - s) * traj.x[0] + s * traj.x[-1]
        report["chord_deviation"] = float(np.max(np.abs(traj.x - chord)))
    if fundamental is not None:
        vals = np.array([fundamental(traj.u(i)) for i in range(len(traj))])
        report["f_drift"] = float(np.max(np.abs(vals - vals[0])))
    if reference is not None:
        n = min(len(traj), len(reference))
        err = max(float(np.max(np.abs(traj.x[:n] - reference.x[:n]))) if traj.x.size else 0.0,
                  float(np.max(np.abs(traj.y[:n] - reference.y[:n]))))
        report["ref_error"] = err
    return report
