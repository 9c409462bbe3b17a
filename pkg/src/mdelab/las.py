"""Lattice evolution scheme for measure-valued dynamics.

One parameter N sets every resolution: time step 1/N, velocity step 1/N,
space step 1/N^2 (their product, the space a velocity cell covers in
one time step, in exact rational arithmetic). Measures live on the grid
Z^n / N^2 inside the box [-N, N]^n, stored as integer coordinates, and a
step is: evaluate the vector field at the current lattice measure, floor
velocities to multiples of 1/N, then shift atoms by the integer cell
count dt*v*N^2 = k. Evolution arithmetic therefore never rounds; floats
appear only when converting to real coordinates for output.

A run checks two a-priori bounds and fails loudly when either breaks:
the box must satisfy exp(C*T)*(R+1) <= N before starting (refusing, not
clipping), and every step's support radius must stay under
exp(C*l*dt)*(R+1), which catches misdeclared sublinearity constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BoxOverflowError, SupportBoundError, ValidationError
from .measure import (DiscreteMeasure, LatticeMeasure, LiftedMeasure,
                      make_lattice_measure, make_lifted, make_measure,
                      support_radius)
from .pvf import PvfSpec, evaluate, sublinear_constant

_STEP_COUNT_SNAP = 1e-9  # floor(N*T) guard against 39.999... artifacts


@dataclass(frozen=True)
class LatticeConfig:
    n_param: int
    horizon: float

    def __post_init__(self):
        if self.n_param < 1 or self.n_param != int(self.n_param):
            raise ValidationError("N must be a positive integer",
                                  field="n_param")
        if not self.horizon > 0:
            raise ValidationError("horizon must be positive",
                                  field="horizon")

    @property
    def dt(self) -> float:
        return 1.0 / self.n_param

    @property
    def dv(self) -> float:
        return 1.0 / self.n_param

    @property
    def dx(self) -> float:
        return 1.0 / self.n_param ** 2

    @property
    def step_count(self) -> int:
        return int(math.floor(self.n_param * self.horizon + _STEP_COUNT_SNAP))


@dataclass(frozen=True)
class Trajectory:
    config: LatticeConfig
    steps: tuple[LatticeMeasure, ...]
    pvf: PvfSpec
    initial_radius: float  # radius of the pre-binning initial measure

    @property
    def dim(self) -> int:
        return self.steps[0].dim

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(i / self.config.n_param for i in range(len(self.steps)))


def ax_discretize(mu: DiscreteMeasure, n_param: int) -> LatticeMeasure:
    """Bin atoms to the space lattice: componentwise floor to multiples
    of 1/N^2 (half-open cells, boundary to the lower cell)."""
    if n_param < 1:
        raise ValidationError("N must be >= 1", field="n_param")
    scale = n_param ** 2
    for pos in mu.positions:
        for c in pos:
            if not (-n_param <= c < n_param):
                raise ValidationError(
                    f"support reaches {c!r}, outside [-N, N) with "
                    f"N={n_param}; increase N", field="n_param")
    cells = [(tuple(math.floor(c * scale) for c in pos), mass)
             for pos, mass in mu.atoms()]
    return make_lattice_measure(n_param, mu.dim, cells)


def _bin_velocity(vel: tuple[float, ...], n_param: int) -> tuple[int, ...]:
    binned = tuple(math.floor(c * n_param) for c in vel)
    if any(abs(k) > n_param ** 2 for k in binned):
        raise BoxOverflowError(
            f"velocity {vel} outside the box [-N, N) with N={n_param}; "
            "the sublinearity envelope does not fit this lattice")
    return binned


def av_discretize(v: LiftedMeasure, n_param: int) -> LiftedMeasure:
    """Floor velocities to multiples of 1/N; positions untouched."""
    return make_lifted(
        [(pos, tuple(k / n_param for k in _bin_velocity(vel, n_param)), mass)
         for pos, vel, mass in v.atoms()],
        dim=v.dim)


def las_step(mu_ell: LatticeMeasure, spec: PvfSpec,
             n_param: int | None = None) -> LatticeMeasure:
    """One recursion step: evaluate, bin velocities, shift by integer
    cells (dt * v = k / N^2 exactly), merge coincident atoms."""
    n = n_param or mu_ell.n_param
    if n != mu_ell.n_param:
        raise ValidationError(
            f"measure lives on the N={mu_ell.n_param} lattice, "
            f"step asked for N={n}", field="n_param")
    lifted = evaluate(spec, mu_ell.to_measure(), n_hint=n)
    coord_of = {tuple(c / n ** 2 for c in cv): cv for cv in mu_ell.coords}
    shifted = []
    for pos, vel, mass in lifted.atoms():
        cv = coord_of[pos]
        kv = _bin_velocity(vel, n)
        shifted.append((tuple(c + k for c, k in zip(cv, kv)), mass))
    try:
        return make_lattice_measure(n, mu_ell.dim, shifted)
    except ValidationError as exc:
        raise BoxOverflowError(
            f"step left the lattice box [-N, N]^n with N={n}: {exc}; "
            "support growth exceeded the a-priori radius bound") from exc


def las_solve(mu0: DiscreteMeasure | LatticeMeasure, spec: PvfSpec,
              n_param: int, horizon: float) -> Trajectory:
    """Run floor(N*T) steps from the binned initial measure.

    Accepts a LatticeMeasure to continue a previous run exactly (the
    concatenation identity then holds bit-for-bit). Refuses up front
    when exp(C*T)*(R+1) > N, and aborts if any step's support radius
    exceeds exp(C*l*dt)*(R+1).
    """
    config = LatticeConfig(n_param=n_param, horizon=horizon)
    if isinstance(mu0, LatticeMeasure):
        if mu0.n_param != n_param:
            raise ValidationError(
                f"initial lattice measure has N={mu0.n_param}, "
                f"run wants N={n_param}", field="n_param")
        start = mu0
        radius0 = mu0.support_radius()
    else:
        start = ax_discretize(mu0, n_param)
        radius0 = support_radius(mu0).radius
    c_sub = sublinear_constant(spec, start.dim)
    envelope = math.exp(c_sub * horizon) * (radius0 + 1.0)
    if envelope > n_param:
        raise ValidationError(
            f"N={n_param} too small: the support envelope "
            f"exp(C*T)*(R+1) = {envelope!r} exceeds N "
            f"(C={c_sub!r}, R={radius0!r}, T={horizon!r})",
            field="n_param")
    steps = [start]
    for ell in range(1, config.step_count + 1):
        nxt = las_step(steps[-1], spec, n_param)
        bound = math.exp(c_sub * ell * config.dt) * (radius0 + 1.0)
        radius = nxt.support_radius()
        if radius > bound * (1.0 + 1e-12):
            raise SupportBoundError(
                f"step {ell}: support radius {radius!r} exceeds the "
                f"a-priori bound {bound!r}; the declared sublinearity "
                f"constant C={c_sub!r} is too small for this field")
        steps.append(nxt)
    return Trajectory(config=config, steps=tuple(steps), pvf=spec,
                      initial_radius=radius0)


def interpolate(traj: Trajectory, t: float) -> DiscreteMeasure:
    """Measure at any time: between steps, atoms move along their binned
    velocities, x_i + s * v_j for the within-step offset s."""
    n = traj.config.n_param
    last = len(traj.steps) - 1
    if not (0.0 <= t <= last / n + 1e-12):
        raise ValidationError(
            f"t={t!r} outside [0, {last / n!r}]", field="t")
    ell = min(int(math.floor(t * n + 1e-12)), last)
    s = t - ell / n
    if s <= 0.0 or ell == last:
        return traj.steps[ell].to_measure()
    base = traj.steps[ell].to_measure()
    lifted = evaluate(traj.pvf, base, n_hint=n)
    moved = []
    for pos, vel, mass in lifted.atoms():
        kv = _bin_velocity(vel, n)
        moved.append((tuple(x + s * (k / n) for x, k in zip(pos, kv)), mass))
    return make_measure(moved, dim=traj.dim)


def solution_measures(traj: Trajectory,
                      sample_times) -> list[tuple[float, DiscreteMeasure]]:
    return [(float(t), interpolate(traj, float(t))) for t in sample_times]
