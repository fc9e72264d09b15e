"""Matsuoka CPG network: oscillator dynamics, tonic-input decoding/composition,
and bias/frequency estimation of the output waves.

A primitive oscillator is a mutually inhibiting extensor/flexor neuron pair
with adaptation.  N primitives are coupled through their self-inhibition
states.  The network output per primitive is the rectified antagonist
difference psi_i = max(0, x_e_i) - max(0, x_f_i).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "CpgError",
    "OscillatorParams",
    "NetworkState",
    "TonicInput",
    "CpgCommand",
    "chain_coupling",
    "decode_action",
    "compose_tonic",
    "step_network",
    "network_output",
    "simulate",
    "BiasResult",
    "measure_bias",
    "measure_frequency",
    "InsufficientCyclesError",
]


class CpgError(ValueError):
    """Invalid oscillator input, parameter, or state."""


class InsufficientCyclesError(CpgError):
    """Signal does not contain enough oscillation cycles to analyze."""


def chain_coupling(n: int, weight: float = 0.5) -> np.ndarray:
    """Descending chain coupling: primitive i inhibits primitive i + 1.

    The one-directional coupling entrains every downstream primitive to
    its predecessor with a fixed phase lag, producing a travelling wave
    along the chain with a deterministic direction (symmetric coupling
    leaves the wave direction dependent on the initial condition).
    """
    w = np.zeros((n, n))
    for i in range(n - 1):
        w[i, i + 1] = weight
    return w


@dataclass
class OscillatorParams:
    """Parameters of the coupled Matsuoka network.

    tau_r, tau_a are the discharge and adaptation time constants (s),
    a the mutual-inhibition weight, b the self-inhibition weight, and
    w the N x N coupling matrix with w[j, i] the inhibition strength
    from primitive j onto primitive i.
    """

    tau_r: float = 0.1
    tau_a: float = 0.5
    a: float = 1.9
    b: float = 2.0
    n: int = 4
    w: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.tau_r <= 0 or self.tau_a <= 0:
            raise CpgError("time constants must be positive")
        if self.n < 1:
            raise CpgError("need at least one oscillator")
        if self.w is None:
            self.w = chain_coupling(self.n)
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (self.n, self.n):
            raise CpgError(f"coupling matrix must be {self.n}x{self.n}")


@dataclass
class NetworkState:
    """Activation (x) and self-inhibition (y) states of all primitives."""

    x_e: np.ndarray
    y_e: np.ndarray
    x_f: np.ndarray
    y_f: np.ndarray

    def __post_init__(self) -> None:
        for name in ("x_e", "y_e", "x_f", "y_f"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)):
                raise CpgError(f"non-finite oscillator state in {name}")
            setattr(self, name, v)

    @classmethod
    def zeros(cls, n: int) -> "NetworkState":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n))

    @classmethod
    def seeded(cls, n: int, kick: float = 0.1) -> "NetworkState":
        """Zero state with a small extensor kick to leave the symmetric
        (non-oscillating) manifold."""
        s = cls.zeros(n)
        s.x_e = s.x_e.copy()
        s.x_e[0] = kick
        return s

    def copy(self) -> "NetworkState":
        return NetworkState(self.x_e.copy(), self.y_e.copy(),
                            self.x_f.copy(), self.y_f.copy())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.x_e, self.y_e, self.x_f, self.y_f])

    @classmethod
    def unpack(cls, vec: np.ndarray, n: int) -> "NetworkState":
        return cls(vec[:n], vec[n:2 * n], vec[2 * n:3 * n], vec[3 * n:])


@dataclass
class TonicInput:
    """Extensor/flexor excitation levels, componentwise in [0, 1]."""

    u_e: np.ndarray
    u_f: np.ndarray

    def __post_init__(self) -> None:
        self.u_e = np.asarray(self.u_e, dtype=float)
        self.u_f = np.asarray(self.u_f, dtype=float)
        if self.u_e.shape != self.u_f.shape:
            raise CpgError("extensor/flexor inputs must have equal length")
        for v in (self.u_e, self.u_f):
            if not np.all(np.isfinite(v)):
                raise CpgError("non-finite tonic input")
            if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
                raise CpgError("tonic input components must lie in [0, 1]")

    @property
    def delta(self) -> np.ndarray:
        """Steering imbalance u_e - u_f per primitive."""
        return self.u_e - self.u_f


@dataclass
class CpgCommand:
    """Full network command: tonic excitation plus frequency ratio."""

    tonic: TonicInput
    k_f: float = 1.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.k_f) and self.k_f > 0):
            raise CpgError("frequency ratio must be positive")


def decode_action(a: np.ndarray) -> TonicInput:
    """Map an unbounded action vector to tonic inputs via the logistic
    function, with u_f = 1 - u_e componentwise."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise CpgError("non-finite action")
    u_e = 1.0 / (1.0 + np.exp(-a))
    return TonicInput(u_e=u_e, u_f=1.0 - u_e)


def compose_tonic(u1: TonicInput, u2: TonicInput,
                  w1: float, w2: float) -> TonicInput:
    """Convex combination of two tonic inputs; weights must lie on the
    1-simplex."""
    if w1 < 0 or w2 < 0 or abs(w1 + w2 - 1.0) > 1e-9:
        raise CpgError("composition weights must be nonnegative and sum to 1")
    return TonicInput(u_e=w1 * u1.u_e + w2 * u2.u_e,
                      u_f=w1 * u1.u_f + w2 * u2.u_f)


def step_network(s: NetworkState, p: OscillatorParams,
                 cmd: CpgCommand, dt: float) -> NetworkState:
    """Advance the network one fixed RK4 step of size dt.

    The frequency ratio k_f scales the discharge (activation) dynamics
    only; scaling the adaptation equations as well would rescale time
    uniformly instead of producing the freq ~ 1/sqrt(k_f) behavior the
    frequency controller relies on.
    """
    if dt <= 0:
        raise CpgError("dt must be positive")
    if dt > cmd.k_f * p.tau_r / 5.0 + 1e-15:
        raise CpgError(
            f"dt={dt} exceeds stability bound k_f*tau_r/5={cmd.k_f * p.tau_r / 5.0}")
    u_e, u_f = cmd.tonic.u_e, cmd.tonic.u_f
    if u_e.shape[0] != p.n:
        raise CpgError("tonic input length does not match oscillator count")
    y = s.pack()
    if not np.all(np.isfinite(y)):
        raise CpgError("non-finite oscillator state")
    y_new = _kernels.cpg_rk4(y, p.w, p.tau_r, p.tau_a, p.a, p.b,
                             u_e, u_f, cmd.k_f, dt, 1)
    return NetworkState.unpack(y_new, p.n)


def network_output(s: NetworkState) -> np.ndarray:
    """Antagonist output wave psi_i = max(0, x_e_i) - max(0, x_f_i)."""
    return np.maximum(0.0, s.x_e) - np.maximum(0.0, s.x_f)


def simulate(p: OscillatorParams, cmd: CpgCommand, duration: float,
             dt: float = 0.001, state: NetworkState | None = None,
             ) -> tuple[np.ndarray, NetworkState]:
    """Integrate for `duration` seconds; returns (psi samples [T, n], final state)."""
    s = state.copy() if state is not None else NetworkState.seeded(p.n)
    steps = int(round(duration / dt))
    out = np.empty((steps, p.n))
    for t in range(steps):
        s = step_network(s, p, cmd, dt)
        out[t] = network_output(s)
    return out, s


def _upward_crossings(dev: np.ndarray) -> np.ndarray:
    """Fractional sample indices of upward zero crossings of `dev`."""
    sign_change = (dev[:-1] <= 0) & (dev[1:] > 0)
    idx = np.nonzero(sign_change)[0]
    if idx.size == 0:
        return np.empty(0)
    frac = -dev[idx] / (dev[idx + 1] - dev[idx])
    return idx + frac


@dataclass
class BiasResult:
    """Oscillation bias estimate; `oscillatory` is False when no wave was
    detected and the plain mean was returned instead."""

    value: float
    oscillatory: bool


def measure_bias(signal: np.ndarray, amplitude_tol: float = 1e-9) -> BiasResult:
    """Mean of the signal over an integer number of oscillation periods.

    The period is located by upward zero crossings of the mean-removed
    signal; the mean is a trapezoid integral between the first and last
    (interpolated) crossings.  A signal whose swing is below amplitude_tol
    is reported non-oscillatory with its plain mean.
    """
    s = np.asarray(signal, dtype=float)
    if s.size < 2:
        raise CpgError("signal too short")
    mean = float(np.mean(s))
    dev = s - mean
    amplitude = 0.5 * (dev.max() - dev.min())
    if amplitude < amplitude_tol:
        return BiasResult(mean, oscillatory=False)
    crossings = _upward_crossings(dev)
    if crossings.size < 2:
        return BiasResult(mean, oscillatory=False)
    t0, t1 = crossings[0], crossings[-1]
    i0, i1 = int(np.ceil(t0)), int(np.floor(t1))
    # Interpolated endpoint values (zero deviation means value == running mean
    # only at the crossing of dev, so interpolate the raw signal).
    v0 = np.interp(t0, np.arange(s.size), s)
    v1 = np.interp(t1, np.arange(s.size), s)
    ts = np.concatenate([[t0], np.arange(i0, i1 + 1), [t1]])
    vs = np.concatenate([[v0], s[i0:i1 + 1], [v1]])
    integral = np.trapezoid(vs, ts)
    return BiasResult(float(integral / (t1 - t0)), oscillatory=True)


def measure_frequency(signal: np.ndarray, dt: float) -> float:
    """Oscillation frequency (Hz) from the mean interval between upward
    zero crossings of the mean-removed signal."""
    if dt <= 0:
        raise CpgError("dt must be positive")
    s = np.asarray(signal, dtype=float)
    dev = s - np.mean(s)
    crossings = _upward_crossings(dev)
    if crossings.size < 3:
        raise InsufficientCyclesError("insufficient cycles")
    span = (crossings[-1] - crossings[0]) * dt
    return float((crossings.size - 1) / span)
