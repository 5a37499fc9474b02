"""Discrete-time photoelectric feedback controllers.

Two controllers drive the source intensity ``I`` from the bucket reading ``B``:

* digital: a bang-bang comparator against a reference ``b``; the intensity
  walks in steps of ``delta`` and ends in a limit cycle around ``b / T``.
* analog: the driver relaxes toward the modulator output ``U - B`` with gain
  ``relaxation``; the fixed point is ``U / (1 + T)``.

Both are negative feedback: a larger ``B`` never raises the next ``I``.
Intensities are clamped to ``[i_min, i_max]`` after every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .optics import NO_NOISE, NoiseModel, bucket_values

ANALOG_SCHEMES = ("implicit", "explicit")


class ControllerConfigError(ValueError):
    pass


class ClampSaturationError(ValueError):
    """A transmissivity grid drives the controller into its clamp."""


class MonotonicityError(AssertionError):
    """Settled intensities are not strictly decreasing in T."""


def _check_clamp(i_min: float, i_max: float) -> None:
    if not 0.0 < i_min < i_max:
        raise ControllerConfigError(f"clamp must satisfy 0 < i_min < i_max (got [{i_min}, {i_max}])")


@dataclass(frozen=True)
class DigitalControllerConfig:
    b: float
    delta: float | None = None
    i_min: float = 1e-3
    i_max: float = 10.0

    def __post_init__(self):
        if not self.b > 0:
            raise ControllerConfigError(f"reference voltage b must be > 0, got {self.b}")
        if self.delta is None:
            object.__setattr__(self, "delta", self.b / 200.0)
        if not self.delta > 0:
            raise ControllerConfigError(f"step delta must be > 0, got {self.delta}")
        _check_clamp(self.i_min, self.i_max)
        if not self.delta < self.i_max - self.i_min:
            raise ControllerConfigError("step delta must be smaller than the clamp range")

    @property
    def mode(self) -> str:
        return "digital"

    def update(self, I, B):
        I = np.asarray(I, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        nxt = np.where(B > self.b, I - self.delta, np.where(B < self.b, I + self.delta, I))
        return np.clip(nxt, self.i_min, self.i_max)

    def fixed_point(self, T):
        """Steady state ``b / T`` under the clamp; ``T = 0`` saturates at ``i_max``."""
        T = np.asarray(T, dtype=np.float64)
        with np.errstate(divide="ignore"):
            target = np.where(T > 0, self.b / np.where(T > 0, T, 1.0), np.inf)
        return np.clip(target, self.i_min, self.i_max)[()]

    def default_initial(self) -> float:
        return self.i_max


@dataclass(frozen=True)
class AnalogControllerConfig:
    """Analog difference modulator.

    The driver relaxes toward ``U - B``. With ``scheme="explicit"`` the
    update is ``I + r * ((U - B) - I)`` using the bucket reading at the current
    intensity; that map has multiplier ``1 - r(1 + T)`` and only oscillates
    at ``r(1 + T) = 2``. The default ``"implicit"`` scheme evaluates the bucket
    term at the new intensity (the optical path has no lag), giving
    ``((1 - r) I + r U) / (1 + r T)`` with multiplier ``(1 - r) / (1 + r T)``,
    which contracts for every ``r`` in (0, 1]. Both share the fixed point
    ``U / (1 + T)``.
    """

    U: float
    relaxation: float = 0.5
    i_min: float = 1e-3
    i_max: float = 10.0
    scheme: str = "implicit"

    def __post_init__(self):
        if not self.U > 0:
            raise ControllerConfigError(f"source level U must be > 0, got {self.U}")
        if not 0.0 < self.relaxation <= 1.0:
            raise ControllerConfigError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if self.scheme not in ANALOG_SCHEMES:
            raise ControllerConfigError(f"scheme must be one of {ANALOG_SCHEMES}, got {self.scheme!r}")
        _check_clamp(self.i_min, self.i_max)

    @property
    def mode(self) -> str:
        return "analog"

    def update(self, I, B):
        I = np.asarray(I, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        r = self.relaxation
        if self.scheme == "explicit":
            nxt = I + r * ((self.U - B) - I)
        else:
            # effective transmissivity seen by the detector; i_min > 0 keeps I positive
            t_eff = B / I
            nxt = ((1.0 - r) * I + r * self.U) / (1.0 + r * t_eff)
        return np.clip(nxt, self.i_min, self.i_max)

    def fixed_point(self, T):
        T = np.asarray(T, dtype=np.float64)
        return np.clip(self.U / (1.0 + T), self.i_min, self.i_max)[()]

    def default_initial(self) -> float:
        return float(np.clip(self.U, self.i_min, self.i_max))


ControllerConfig = Union[DigitalControllerConfig, AnalogControllerConfig]


@dataclass(frozen=True)
class ControllerState:
    intensity: float
    step_count: int = 0


def digital_step(state: ControllerState, B: float, cfg: DigitalControllerConfig) -> ControllerState:
    return ControllerState(float(cfg.update(state.intensity, B)), state.step_count + 1)


def analog_step(state: ControllerState, B: float, cfg: AnalogControllerConfig) -> ControllerState:
    return ControllerState(float(cfg.update(state.intensity, B)), state.step_count + 1)


def step(state: ControllerState, B: float, cfg: ControllerConfig) -> ControllerState:
    return ControllerState(float(cfg.update(state.intensity, B)), state.step_count + 1)


@dataclass
class SettleResult:
    """Outcome of :func:`settle`; fields are arrays for array input."""

    intensity: np.ndarray | float
    steps: np.ndarray | int
    settled: np.ndarray | bool
    T: np.ndarray | float = field(repr=False, default=0.0)

    @property
    def hit_max(self):
        return np.logical_not(self.settled)[()]

    @property
    def flags(self) -> list[str]:
        return ["settled" if s else "hit_max" for s in np.atleast_1d(self.settled)]


def settle(
    cfg: ControllerConfig,
    T,
    max_steps: int = 1000,
    tol: float = 1e-9,
    initial=None,
    noise: NoiseModel = NO_NOISE,
    rng: np.random.Generator | None = None,
) -> SettleResult:
    """Iterate the controller against the bucket detector until steady state.

    The analog loop stops once a step changes ``I`` by at most ``tol``. The
    digital loop stops at an exact fixed point (``B == b``) or once two
    consecutive steps reverse direction, i.e. it is inside its limit cycle.
    Elements that never stop within ``max_steps`` are flagged ``hit_max``;
    this includes clamp-pinned intensities. Array ``T`` settles every element
    independently with identical arithmetic to the scalar case.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    scalar = np.ndim(T) == 0
    T = np.atleast_1d(np.asarray(T, dtype=np.float64))
    if np.any(T < 0) or np.any(T > 1):
        raise ValueError("transmissivities must lie in [0, 1]")
    if initial is None:
        initial = cfg.default_initial()
    I = np.clip(np.broadcast_to(np.asarray(initial, dtype=np.float64), T.shape), cfg.i_min, cfg.i_max).copy()
    steps = np.zeros(T.shape, dtype=np.int64)
    done = np.zeros(T.shape, dtype=bool)
    digital = isinstance(cfg, DigitalControllerConfig)
    if digital:
        last_dir = np.zeros(T.shape, dtype=np.int8)
        reversals = np.zeros(T.shape, dtype=np.int64)
    if noise.enabled and rng is None:
        rng = noise.rng()

    for _ in range(max_steps):
        active = ~done
        if not active.any():
            break
        dT = noise.draw(T, rng) if noise.enabled else 0.0
        B = bucket_values(I, T, dT)
        nxt = cfg.update(I, B)
        steps[active] += 1
        if digital:
            direction = np.sign(nxt - I).astype(np.int8)
            at_fixed_point = B == cfg.b
            moved = direction != 0
            reversed_ = moved & (last_dir != 0) & (direction != last_dir)
            reversals = np.where(moved, np.where(reversed_, reversals + 1, 0), reversals)
            last_dir = np.where(moved, direction, last_dir)
            stop = at_fixed_point | (reversals >= 2)
        else:
            stop = np.abs(nxt - I) <= tol
        I = np.where(active, nxt, I)
        done |= active & stop

    if scalar:
        return SettleResult(float(I[0]), int(steps[0]), bool(done[0]), float(T[0]))
    return SettleResult(I, steps, done, T)


def monotonicity_check(cfg: ControllerConfig, T_grid, **settle_kwargs) -> np.ndarray:
    """Settle at each ``T`` and require the intensities to strictly decrease.

    Raises :class:`ClampSaturationError` when a grid point sits in the clamp
    (for the digital loop: ``T <= b / i_max``), :class:`MonotonicityError` when
    the ordering fails.
    """
    T = np.asarray(T_grid, dtype=np.float64)
    if T.ndim != 1 or T.size == 0:
        raise ValueError("T grid must be a non-empty 1-D sequence")
    if np.any(np.diff(T) <= 0):
        raise ValueError("T grid must be strictly increasing")
    if isinstance(cfg, DigitalControllerConfig):
        low = T <= cfg.b / cfg.i_max
        high = T > 0
        high &= cfg.b / np.where(T > 0, T, 1.0) <= cfg.i_min
        if low.any() or high.any():
            bad = T[low | high]
            raise ClampSaturationError(f"T values {bad.tolist()} saturate the clamp [{cfg.i_min}, {cfg.i_max}]")
    result = settle(cfg, T, **settle_kwargs)
    I = np.asarray(result.intensity)
    pinned = (I <= cfg.i_min) | (I >= cfg.i_max)
    if pinned.any():
        raise ClampSaturationError(f"settled intensity pinned at the clamp for T={T[pinned].tolist()}")
    if np.any(np.diff(I) >= 0):
        raise MonotonicityError(f"settled intensities not strictly decreasing: {I.tolist()}")
    return I
