"""Idealized Stern-Gerlach measurement in pilot-wave dynamics.

The spatial wave function is a Gaussian envelope of width ``sigma``. The field
splits it into two rigidly translating packets, one per sigma_z component,
moving at +-``speed``. The guiding velocity is the packet-weighted drift

    v(z, t) = (v_up * rho_up + v_down * rho_down) / (rho_up + rho_down)

with rho_up, rho_down the packet densities times the spin weights. For equal
spin weights v(0, t) = 0 and v is odd in z, so trajectories never cross z = 0.

The two procedures differ only in which way the up packet moves. The reported
value is the sign of the final position, read with a calibration that is
reversed for the second procedure.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import hilbert
from .entangle import singlet
from .errors import StartOnNode, StepTooLarge
from .measure import collapse


class Procedure(str, enum.Enum):
    STANDARD = "standard"
    REVERSED = "reversed"

    @property
    def calibration(self) -> int:
        """Reported sigma_z for a particle that ends up above z = 0."""
        return 1 if self is Procedure.STANDARD else -1


@dataclass(frozen=True)
class BohmParams:
    sigma: float = 1.0
    speed: float = 1.0
    t_end: float = 6.0
    dt: float = 1e-3

    def __post_init__(self):
        for name in ("sigma", "speed", "t_end", "dt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    def coarsest(self) -> "BohmParams":
        """Same physics with the largest step the integrator accepts."""
        return BohmParams(self.sigma, self.speed, self.t_end, self.sigma / (100 * self.speed))


@dataclass(frozen=True)
class SpinorPacketState:
    sigma: float = 1.0
    speed: float = 1.0
    procedure: Procedure = Procedure.STANDARD
    up_weight: float = 0.5
    down_weight: float = 0.5

    def __post_init__(self):
        if not (self.sigma > 0 and self.speed > 0):
            raise ValueError("sigma and speed must be positive")
        if self.up_weight < 0 or self.down_weight < 0 or self.up_weight + self.down_weight <= 0:
            raise ValueError("spin weights must be non-negative and not both zero")
        object.__setattr__(self, "procedure", Procedure(self.procedure))

    @classmethod
    def from_params(cls, params: BohmParams, procedure=Procedure.STANDARD, spinor=None) -> "SpinorPacketState":
        if spinor is None:
            return cls(params.sigma, params.speed, procedure)
        w = np.abs(hilbert.as_vector(spinor)) ** 2
        return cls(params.sigma, params.speed, procedure, float(w[0]), float(w[1]))

    @property
    def up_velocity(self) -> float:
        return self.speed if self.procedure is Procedure.STANDARD else -self.speed

    def up_center(self, t):
        return self.up_velocity * t

    def down_center(self, t):
        return -self.up_velocity * t

    def wavefunction0(self, z):
        """Spatial amplitude at t = 0; |.|^2 is a normal density of width sigma."""
        z = np.asarray(z, dtype=float)
        return (2 * np.pi * self.sigma**2) ** -0.25 * np.exp(-(z**2) / (4 * self.sigma**2))


def log_density(x, sigma: float):
    """log of the normal density of width sigma, i.e. log |G(x)|^2."""
    return -(np.asarray(x, dtype=float) ** 2) / (2 * sigma**2) - 0.5 * math.log(2 * math.pi * sigma**2)


def velocity_field(state: SpinorPacketState, z, t: float):
    """Guiding velocity at position(s) ``z`` and time ``t`` >= 0.

    Evaluated as v_up * tanh((log rho_up - log rho_down) / 2), which equals the
    weighted-average form but cannot underflow far from both packets.
    """
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    lw_up = math.log(state.up_weight) if state.up_weight > 0 else -math.inf
    lw_down = math.log(state.down_weight) if state.down_weight > 0 else -math.inf
    # log rho_up - log rho_down; the Gaussian quadratics cancel to a linear form in z.
    cu, cd = state.up_center(t), state.down_center(t)
    if np.ndim(z) == 0:
        gap = (lw_up - lw_down) + (cu - cd) * (2 * float(z) - cu - cd) / (2 * state.sigma**2)
        return state.up_velocity * math.tanh(0.5 * gap)
    z = np.asarray(z, dtype=float)
    gap = (lw_up - lw_down) + (cu - cd) * (2 * z - cu - cd) / (2 * state.sigma**2)
    return state.up_velocity * np.tanh(0.5 * gap)


@dataclass(frozen=True)
class Trajectory:
    initial_z: float
    times: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    procedure: Procedure
    raw_sign: int
    calibrated_outcome: int

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.positions.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "z"])
        w.writerows((repr(t), repr(z)) for t, z in self.samples)
        return buf.getvalue()

    def manifest(self) -> dict:
        return {
            "procedure": self.procedure.value,
            "z0": self.initial_z,
            "raw_sign": self.raw_sign,
            "outcome": self.calibrated_outcome,
        }


@dataclass(frozen=True)
class BatchResult:
    """Many trajectories integrated in lockstep.

    ``min_signed`` is min over all steps of z(t) * sign(z0); it stays positive
    exactly when no trajectory reached or crossed z = 0.
    """

    initial_z: np.ndarray
    final_z: np.ndarray
    min_signed: np.ndarray
    procedure: Procedure

    @property
    def raw_signs(self) -> np.ndarray:
        return np.sign(self.final_z).astype(int)

    @property
    def outcomes(self) -> np.ndarray:
        return self.raw_signs * self.procedure.calibration

    @property
    def sign_changes(self) -> int:
        return int(np.count_nonzero(self.min_signed <= 0))


def _check_run(state: SpinorPacketState, t_end: float, dt: float) -> None:
    if dt > state.sigma / (100 * state.speed) * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds sigma/(100*speed)={state.sigma / (100 * state.speed)}")
    if state.speed * t_end < 5 * state.sigma * (1 - 1e-12):
        raise ValueError(f"t_end={t_end} is too short for the packets to separate by 5 sigma")


def _steps(t_end: float, dt: float) -> tuple[int, float]:
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    return steps, t_end / steps


def _rk4_batch(state: SpinorPacketState, z0: np.ndarray, t_end: float, dt: float):
    steps, h = _steps(t_end, dt)
    sign0 = np.sign(z0)
    z = z0.copy()
    min_signed = z * sign0
    for k in range(steps):
        t = k * h
        k1 = velocity_field(state, z, t)
        k2 = velocity_field(state, z + 0.5 * h * k1, t + 0.5 * h)
        k3 = velocity_field(state, z + 0.5 * h * k2, t + 0.5 * h)
        k4 = velocity_field(state, z + h * k3, t + h)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        np.minimum(min_signed, z * sign0, out=min_signed)
    return z, min_signed


def _rk4_path(state: SpinorPacketState, z0: float, t_end: float, dt: float):
    steps, h = _steps(t_end, dt)
    z = z0
    path = [z]
    for k in range(steps):
        t = k * h
        k1 = velocity_field(state, z, t)
        k2 = velocity_field(state, z + 0.5 * h * k1, t + 0.5 * h)
        k3 = velocity_field(state, z + 0.5 * h * k2, t + 0.5 * h)
        k4 = velocity_field(state, z + h * k3, t + h)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        path.append(z)
    return np.linspace(0.0, t_end, steps + 1), np.array(path)


def integrate_batch(state: SpinorPacketState, z0s, t_end: float, dt: float) -> BatchResult:
    z0 = np.atleast_1d(np.asarray(z0s, dtype=float))
    if np.any(z0 == 0):
        raise StartOnNode("initial positions on the nodal line z = 0 are excluded")
    _check_run(state, t_end, dt)
    final, min_signed = _rk4_batch(state, z0, t_end, dt)
    return BatchResult(z0, final, min_signed, state.procedure)


def integrate_trajectory(state: SpinorPacketState, z0: float, t_end: float, dt: float) -> Trajectory:
    """Fourth-order Runge-Kutta integration of dz/dt = v(z, t) from z(0) = z0."""
    if z0 == 0:
        raise StartOnNode("z0 = 0 lies on the nodal line")
    _check_run(state, t_end, dt)
    times, positions = _rk4_path(state, float(z0), t_end, dt)
    raw = int(np.sign(positions[-1]))
    return Trajectory(float(z0), times, positions, state.procedure, raw, raw * state.procedure.calibration)


def run_procedure(z0: float, procedure: Procedure, params: BohmParams = BohmParams()) -> Trajectory:
    state = SpinorPacketState.from_params(params, procedure)
    return integrate_trajectory(state, z0, params.t_end, params.dt)


def contextuality_demo(z0: float, params: BohmParams = BohmParams()) -> tuple[int, int]:
    """Outcomes of the standard and the reversed procedure from the same z0."""
    std = run_procedure(z0, Procedure.STANDARD, params)
    rev = run_procedure(z0, Procedure.REVERSED, params)
    return std.calibrated_outcome, rev.calibrated_outcome


@dataclass(frozen=True)
class EnsembleReport:
    n: int
    up_freq: float
    seed: int
    procedure: Procedure
    raw_signs: np.ndarray = field(repr=False)
    sign_changes: int = 0

    def to_json(self) -> dict:
        return {"n": self.n, "up_freq": self.up_freq, "seed": self.seed}


def sample_initial_positions(params: BohmParams, n: int, rng_seed: int) -> np.ndarray:
    """n draws from |Psi_0|^2, redrawing the (measure-zero) value 0."""
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    z0 = rng.normal(0.0, params.sigma, size=n)
    while np.any(z0 == 0):
        z0[z0 == 0] = rng.normal(0.0, params.sigma, size=int(np.sum(z0 == 0)))
    return z0


def born_ensemble(
    params: BohmParams, n_trials: int, rng_seed: int = 0, procedure=Procedure.STANDARD
) -> EnsembleReport:
    """Frequency of the reported value +1 over initial positions drawn from |Psi_0|^2.

    Large ensembles are cheapest at the coarsest admissible step,
    ``dt = sigma / (100 * speed)``; see :meth:`BohmParams.coarsest`.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    procedure = Procedure(procedure)
    z0 = sample_initial_positions(params, n_trials, rng_seed)
    state = SpinorPacketState.from_params(params, procedure)
    batch = integrate_batch(state, z0, params.t_end, params.dt)
    up = float(np.mean(batch.outcomes == 1))
    return EnsembleReport(n_trials, up, rng_seed, procedure, batch.raw_signs, batch.sign_changes)


@dataclass(frozen=True)
class TwoParticleResult:
    a_outcome: int
    b_outcome: int
    a_trajectory: Trajectory
    b_trajectory: Trajectory
    b_spinor: np.ndarray
    b_inputs: tuple


def two_particle_demo(
    za0: float,
    procedure_at_a,
    params: BohmParams = BohmParams(),
    zb0: float = 0.5,
    procedure_at_b=Procedure.STANDARD,
) -> TwoParticleResult:
    """A is measured first on the singlet, then B.

    A's guiding field is the symmetric single-particle one (the spatial factor
    of B cancels from A's velocity while the packets do not overlap in z_B).
    A's reported value collapses the singlet, and B is then guided by its
    conditional spinor. Nothing about B's own initial data depends on A.
    """
    procedure_at_a = Procedure(procedure_at_a)
    procedure_at_b = Procedure(procedure_at_b)
    a_traj = run_procedure(za0, procedure_at_a, params)
    a = a_traj.calibrated_outcome

    post = collapse(singlet().amplitudes(), hilbert.SIGMA_Z, "alice", float(a)).reshape(2, 2)
    row = post[int(np.argmax(np.linalg.norm(post, axis=1)))]
    b_spinor = row / np.linalg.norm(row)

    b_state = SpinorPacketState.from_params(params, procedure_at_b, b_spinor)
    b_traj = integrate_trajectory(b_state, zb0, params.t_end, params.dt)
    b_inputs = (float(zb0), procedure_at_b.value, params.sigma, params.speed, params.t_end, params.dt)
    return TwoParticleResult(a, b_traj.calibrated_outcome, a_traj, b_traj, b_spinor, b_inputs)
