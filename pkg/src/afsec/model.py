"""Network model for the M-relay AF diamond network with one eavesdropper.

Holds the channel description, the relay power box on the scaling factors
beta, destination/eavesdropper SNR evaluation, the secrecy rate, and the
beta <-> omega <-> v coordinate maps used by the convex solvers.

Conventions fixed here and used everywhere else:
  * rates are in bits per channel use (log base 2),
  * omega_i = h_it * beta_i  (so the destination quadratic form becomes
    isotropic and h_it = 0 is rejected at construction),
  * the relay->destination gain is always written h_t (the subscripts d
    and t denote the same node).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .errors import DegradednessViolated, NonInvertible, NotScaled, NotSymmetric

__all__ = [
    "ChannelInstance",
    "SolveReport",
    "METHODS",
    "beta_max_bounds",
    "snr",
    "secrecy_rate",
    "to_transformed",
    "from_transformed",
    "check_beta_feasible",
]

# Method tags carried by SolveReport.
METHODS = frozenset(
    {
        "degraded-individual",
        "degraded-total",
        "zero-forcing",
        "scaled",
        "symmetric",
        "oracle",
    }
)

_SCALED_RTOL = 1e-12


def _as_vector(x, M: int, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (M,):
        raise ValueError(f"{name} must have shape ({M},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class ChannelInstance:
    """All parameters of one secure-AF problem.

    Gains are real and constant; powers and the noise variance share one
    unit system.  h_t entries must be nonzero (the omega transform divides
    by them).
    """

    M: int
    h_s: np.ndarray
    h_t: np.ndarray
    h_e: np.ndarray
    P_s: float
    P_relay: np.ndarray
    sigma2: float

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        object.__setattr__(self, "h_s", _as_vector(self.h_s, self.M, "h_s"))
        object.__setattr__(self, "h_t", _as_vector(self.h_t, self.M, "h_t"))
        object.__setattr__(self, "h_e", _as_vector(self.h_e, self.M, "h_e"))
        object.__setattr__(self, "P_relay", _as_vector(self.P_relay, self.M, "P_relay"))
        object.__setattr__(self, "P_s", float(self.P_s))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if self.P_s <= 0:
            raise ValueError("P_s must be positive")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if np.any(self.P_relay <= 0):
            raise ValueError("every relay power limit must be positive")
        if np.any(self.h_t == 0.0):
            raise ValueError("h_t entries must be nonzero (omega transform degenerates)")

    @property
    def gamma_s(self) -> float:
        return self.P_s / self.sigma2

    def beta_max(self) -> np.ndarray:
        return beta_max_bounds(self)

    def omega_max(self) -> np.ndarray:
        return np.abs(self.h_t) * beta_max_bounds(self)

    def is_degraded(self) -> bool:
        """True when every eavesdropper gain is strictly dominated."""
        return bool(np.all(np.abs(self.h_e) < np.abs(self.h_t)))

    def scaled_alpha(self) -> float | None:
        """Common factor alpha with h_e = alpha*h_t and 0 < alpha < 1, else None."""
        ratios = self.h_e / self.h_t
        alpha = float(ratios[0])
        tol = _SCALED_RTOL * max(1.0, abs(alpha))
        if np.max(np.abs(ratios - alpha)) > tol:
            return None
        if not (0.0 < alpha < 1.0):
            return None
        return alpha

    def is_symmetric(self) -> bool:
        """All three gain vectors and the relay powers are constant."""
        for v in (self.h_s, self.h_t, self.h_e, self.P_relay):
            if np.max(np.abs(v - v[0])) > 1e-12 * max(1.0, abs(float(v[0]))):
                return False
        return True

    def with_source_power(self, P_s: float) -> "ChannelInstance":
        return replace(self, P_s=float(P_s))

    # -- JSON wire format: keys M, h_s, h_t, h_e, P_s, P_relay, sigma2 --

    def to_json_dict(self) -> dict:
        return {
            "M": self.M,
            "h_s": self.h_s.tolist(),
            "h_t": self.h_t.tolist(),
            "h_e": self.h_e.tolist(),
            "P_s": self.P_s,
            "P_relay": self.P_relay.tolist(),
            "sigma2": self.sigma2,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "ChannelInstance":
        try:
            return cls(
                M=int(d["M"]),
                h_s=d["h_s"],
                h_t=d["h_t"],
                h_e=d["h_e"],
                P_s=d["P_s"],
                P_relay=d["P_relay"],
                sigma2=d["sigma2"],
            )
        except KeyError as exc:
            raise ValueError(f"missing instance field: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ChannelInstance":
        return cls.from_json_dict(json.loads(text))

    def require_degraded(self):
        if not self.is_degraded():
            raise DegradednessViolated(
                "instance is not degraded: need |h_ie| < |h_it| for every relay"
            )

    def require_scaled(self) -> float:
        alpha = self.scaled_alpha()
        if alpha is None:
            # h_e = alpha*h_t with alpha >= 1 is a valid geometry (zero rate);
            # report it as scaled so the solver can short-circuit.
            ratios = self.h_e / self.h_t
            a = float(ratios[0])
            if a > 0 and np.max(np.abs(ratios - a)) <= _SCALED_RTOL * max(1.0, abs(a)):
                return a
            raise NotScaled("h_e is not a common positive multiple of h_t")
        return alpha

    def require_symmetric(self):
        if not self.is_symmetric():
            raise NotSymmetric("instance gains/powers are not symmetric across relays")


@dataclass(frozen=True)
class SolveReport:
    """Result of one solve: optimal scaling vector plus achieved quantities.

    rate_bits always equals the clamped secrecy rate recomputed at beta_opt.
    """

    beta_opt: np.ndarray
    snr_d: float
    snr_e: float
    rate_bits: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        b = np.asarray(self.beta_opt, dtype=float)
        b.flags.writeable = False
        object.__setattr__(self, "beta_opt", b)

    def to_json_dict(self) -> dict:
        return {
            "beta_opt": self.beta_opt.tolist(),
            "snr_d": self.snr_d,
            "snr_e": self.snr_e,
            "rate_bits": self.rate_bits,
            "method": self.method,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def make_report(
    instance: ChannelInstance, beta: np.ndarray, method: str, diagnostics: dict | None = None
) -> SolveReport:
    """Build a SolveReport by recomputing both SNRs and the rate at beta."""
    sd = snr(instance, beta, "destination")
    se = snr(instance, beta, "eavesdropper")
    return SolveReport(
        beta_opt=np.asarray(beta, dtype=float),
        snr_d=sd,
        snr_e=se,
        rate_bits=_rate_from_snrs(sd, se),
        method=method,
        diagnostics=diagnostics or {},
    )


def beta_max_bounds(instance: ChannelInstance) -> np.ndarray:
    """Per-relay scaling bound: beta_max_i = sqrt(P_i / (h_si^2 P_s + sigma^2))."""
    return np.sqrt(instance.P_relay / (instance.h_s**2 * instance.P_s + instance.sigma2))


def snr(instance: ChannelInstance, beta: Iterable[float], node: str) -> float:
    """Received SNR at `node` ("destination" or "eavesdropper") for scaling beta.

    gamma_s * (sum_i h_si beta_i h_ik)^2 / (1 + sum_i beta_i^2 h_ik^2).
    """
    if node == "destination":
        h_k = instance.h_t
    elif node == "eavesdropper":
        h_k = instance.h_e
    else:
        raise ValueError("node must be 'destination' or 'eavesdropper'")
    b = np.asarray(beta, dtype=float)
    num = float(np.dot(instance.h_s * h_k, b)) ** 2
    den = 1.0 + float(np.dot(b * b, h_k * h_k))
    return instance.gamma_s * num / den


def _rate_from_snrs(snr_d: float, snr_e: float) -> float:
    return max(0.0, 0.5 * np.log2((1.0 + snr_d) / (1.0 + snr_e)))


def secrecy_rate(instance: ChannelInstance, beta: Iterable[float]) -> float:
    """Secrecy rate 1/2 log2((1+SNR_d)/(1+SNR_e)) clamped below at zero, in bits."""
    return _rate_from_snrs(
        snr(instance, beta, "destination"), snr(instance, beta, "eavesdropper")
    )


def to_transformed(instance: ChannelInstance, beta: Iterable[float]) -> np.ndarray:
    """Map beta to the open-unit-ball coordinate v = omega / sqrt(1 + omega'omega)."""
    omega = instance.h_t * np.asarray(beta, dtype=float)
    return omega / np.sqrt(1.0 + float(omega @ omega))

def from_transformed(instance: ChannelInstance, v: Iterable[float]) -> np.ndarray:
    """Inverse map: beta_i = v_i / (h_it sqrt(1 - v'v)).  Requires v'v < 1."""
    v = np.asarray(v, dtype=float)
    vv = float(v @ v)
    if vv >= 1.0:
        raise NonInvertible(f"v'v = {vv} >= 1: transform not invertible")
    omega = v / np.sqrt(1.0 - vv)
    return omega / instance.h_t


def check_beta_feasible(
    instance: ChannelInstance, beta: Iterable[float], tol: float = 1e-8
) -> bool:
    """True when |beta_i| <= beta_max_i * (1 + tol) for every relay."""
    b = np.abs(np.asarray(beta, dtype=float))
    return bool(np.all(b <= beta_max_bounds(instance) * (1.0 + tol)))
