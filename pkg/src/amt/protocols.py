"""Frequency protocols Omega(t) with analytic derivatives.

Every protocol is an immutable value. ``omega``, ``omega_dot`` and ``eta``
accept scalars or numpy arrays; the module-level functions ``omega_at``,
``eta_at`` and ``local_time`` are thin wrappers kept for call sites that
prefer a functional style.

Natural units (hbar = m = 1) are used throughout.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ArgumentError, DomainError


class ProtocolKind(enum.Enum):
    CONSTANT = "constant"
    LINEAR_RAMP = "linear_ramp"
    EXPONENTIAL_CHIRP = "exponential_chirp"
    TANH_SWEEP = "tanh_sweep"
    CONSTANT_ETA = "constant_eta"


def _like(value, t):
    return float(value) if np.ndim(t) == 0 else value


def _logcosh(s):
    s = np.abs(s)
    return s + np.log1p(np.exp(-2.0 * s)) - math.log(2.0)


@dataclass(frozen=True)
class DriveProtocol:
    """A frequency trajectory Omega(t) on the closed interval [t_start, t_end].

    Use the named constructors (:meth:`constant`, :meth:`linear_ramp`, ...)
    rather than filling the fields by hand. Only the fields relevant to
    ``kind`` are read:

    =================  ==========================================
    kind               Omega(t)
    =================  ==========================================
    CONSTANT           omega0
    LINEAR_RAMP        omega0 + rate * t
    EXPONENTIAL_CHIRP  omega0 * exp(lam * t)
    TANH_SWEEP         omega0 + amplitude * tanh((t - center)/width)
    CONSTANT_ETA       omega0 / (1 - eta * omega0 * t)
    =================  ==========================================

    For CONSTANT_ETA the singular time 1/(eta*omega0) is an open upper bound:
    ``t_end`` may equal it but evaluation there raises :class:`DomainError`.
    """

    kind: ProtocolKind
    omega0: float
    rate: float = 0.0
    lam: float = 0.0
    amplitude: float = 0.0
    width: float = 1.0
    center: float = 0.0
    eta: float = 0.0
    t_start: float = 0.0
    t_end: float = math.inf

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, omega0, **domain):
        return cls(ProtocolKind.CONSTANT, float(omega0), **domain)

    @classmethod
    def linear_ramp(cls, omega0, rate, **domain):
        return cls(ProtocolKind.LINEAR_RAMP, float(omega0), rate=float(rate), **domain)

    @classmethod
    def exponential_chirp(cls, omega0, lam, **domain):
        return cls(ProtocolKind.EXPONENTIAL_CHIRP, float(omega0), lam=float(lam), **domain)

    @classmethod
    def tanh_sweep(cls, omega0, amplitude, width, center=0.0, **domain):
        return cls(ProtocolKind.TANH_SWEEP, float(omega0), amplitude=float(amplitude),
                   width=float(width), center=float(center), **domain)

    @classmethod
    def constant_eta(cls, omega0, eta, **domain):
        omega0, eta = float(omega0), float(eta)
        if "t_end" not in domain and eta > 0.0 and omega0 > 0.0:
            domain["t_end"] = 1.0 / (eta * omega0)
        return cls(ProtocolKind.CONSTANT_ETA, omega0, eta=eta, **domain)

    # -- validation -------------------------------------------------------
    def __post_init__(self):
        if not isinstance(self.kind, ProtocolKind):
            object.__setattr__(self, "kind", ProtocolKind(self.kind))
        values = (self.omega0, self.rate, self.lam, self.amplitude, self.width,
                  self.center, self.eta, self.t_start)
        if not all(math.isfinite(v) for v in values) or math.isnan(self.t_end):
            raise DomainError(f"non-finite protocol parameter in {self!r}")
        if self.omega0 <= 0.0:
            raise DomainError(f"omega0 must be positive, got {self.omega0}")
        if not self.t_start < self.t_end:
            raise DomainError(f"empty time domain [{self.t_start}, {self.t_end}]")

        k = self.kind
        if k is ProtocolKind.TANH_SWEEP and self.width <= 0.0:
            raise DomainError(f"tanh width must be positive, got {self.width}")
        if k is ProtocolKind.CONSTANT_ETA:
            if self.eta < 0.0:
                raise DomainError(f"target eta must be non-negative, got {self.eta}")
            ts = self.singular_time
            if self.t_start >= ts or self.t_end > ts:
                raise DomainError(
                    f"constant-eta protocol is singular at t={ts:.6g}; "
                    f"domain [{self.t_start}, {self.t_end}] crosses it")
        if k in (ProtocolKind.LINEAR_RAMP, ProtocolKind.TANH_SWEEP):
            # both are monotone, so the endpoints bound Omega from below
            with np.errstate(invalid="ignore"):
                ends = [self._omega_raw(self.t_start), self._omega_raw(self.t_end)]
            if not all(e > 0.0 for e in ends):
                raise DomainError(
                    f"{k.value} protocol crosses Omega <= 0 inside "
                    f"[{self.t_start}, {self.t_end}]")

    @property
    def singular_time(self):
        """Blow-up time of a CONSTANT_ETA protocol (inf for the other kinds)."""
        if self.kind is ProtocolKind.CONSTANT_ETA and self.eta > 0.0:
            return 1.0 / (self.eta * self.omega0)
        return math.inf

    def check_domain(self, t):
        t = np.asarray(t, dtype=float)
        bad = ~((t >= self.t_start) & (t <= self.t_end))
        if self.kind is ProtocolKind.CONSTANT_ETA:
            bad |= t >= self.singular_time
        if np.any(bad):
            first = np.atleast_1d(t)[np.atleast_1d(bad)][0]
            raise DomainError(
                f"t={first!r} outside protocol domain [{self.t_start}, {self.t_end}]"
                + (f" (singular at {self.singular_time:.6g})"
                   if self.kind is ProtocolKind.CONSTANT_ETA else ""))

    # -- evaluation -------------------------------------------------------
    def _omega_raw(self, t):
        k = self.kind
        t = np.asarray(t, dtype=float)
        if k is ProtocolKind.CONSTANT or (k is ProtocolKind.LINEAR_RAMP and self.rate == 0.0):
            return np.full_like(t, self.omega0)
        if k is ProtocolKind.LINEAR_RAMP:
            return self.omega0 + self.rate * t
        if k is ProtocolKind.EXPONENTIAL_CHIRP:
            return self.omega0 * np.exp(self.lam * t)
        if k is ProtocolKind.TANH_SWEEP:
            return self.omega0 + self.amplitude * np.tanh((t - self.center) / self.width)
        return self.omega0 / (1.0 - self.eta * self.omega0 * t)

    def omega(self, t):
        self.check_domain(t)
        return _like(self._omega_raw(t), t)

    def omega_dot(self, t):
        self.check_domain(t)
        return _like(self._omega_dot_raw(np.asarray(t, dtype=float)), t)

    def _omega_dot_raw(self, t):
        k = self.kind
        if k is ProtocolKind.CONSTANT:
            return np.zeros_like(t)
        if k is ProtocolKind.LINEAR_RAMP:
            return np.full_like(t, self.rate)
        if k is ProtocolKind.EXPONENTIAL_CHIRP:
            return self.lam * self._omega_raw(t)
        if k is ProtocolKind.TANH_SWEEP:
            return self.amplitude / (self.width * np.cosh((t - self.center) / self.width) ** 2)
        return self.eta * self._omega_raw(t) ** 2

    def eta_of(self, t):
        """|Omega_dot| / Omega**2."""
        self.check_domain(t)
        tt = np.asarray(t, dtype=float)
        if self.kind is ProtocolKind.CONSTANT_ETA:
            return _like(np.full_like(tt, self.eta), t)
        return _like(np.abs(self._omega_dot_raw(tt)) / self._omega_raw(tt) ** 2, t)

    def local_time(self, t0, t1):
        """Integral of Omega(t) dt from t0 to t1 (closed form for every kind)."""
        self.check_domain([t0, t1])
        t0, t1 = float(t0), float(t1)
        k = self.kind
        w0 = self.omega0
        if k is ProtocolKind.CONSTANT:
            return w0 * (t1 - t0)
        if k is ProtocolKind.LINEAR_RAMP:
            return w0 * (t1 - t0) + 0.5 * self.rate * (t1 - t0) * (t1 + t0)
        if k is ProtocolKind.EXPONENTIAL_CHIRP:
            if self.lam == 0.0:
                return w0 * (t1 - t0)
            return w0 * math.exp(self.lam * t0) * math.expm1(self.lam * (t1 - t0)) / self.lam
        if k is ProtocolKind.TANH_SWEEP:
            s0 = (t0 - self.center) / self.width
            s1 = (t1 - self.center) / self.width
            return w0 * (t1 - t0) + self.amplitude * self.width * float(_logcosh(s1) - _logcosh(s0))
        if self.eta == 0.0:
            return w0 * (t1 - t0)
        a = self.eta * w0
        # -(1/eta) * log((1 - a t1) / (1 - a t0)), written to keep precision
        return -math.log1p(-a * (t1 - t0) / (1.0 - a * t0)) / self.eta

    def time_at_local_time(self, t0, tau):
        """Inverse of :meth:`local_time`: the t with local_time(t0, t) == tau."""
        if tau < 0.0:
            raise DomainError(f"local time must be non-negative, got {tau}")
        if tau == 0.0:
            return float(t0)
        if self.kind is ProtocolKind.CONSTANT_ETA and self.eta > 0.0:
            a = self.eta * self.omega0
            t = t0 + (1.0 - a * t0) * (-math.expm1(-self.eta * tau)) / a
        else:
            hi = t0 + tau / float(self.omega(t0))
            span = hi - t0
            while self.local_time(t0, min(hi, self.t_end)) < tau:
                if hi >= self.t_end:
                    raise DomainError(
                        f"local time {tau} not reached before t_end={self.t_end}")
                span *= 2.0
                hi = t0 + span
            hi = min(hi, self.t_end)
            t = brentq(lambda s: self.local_time(t0, s) - tau, t0, hi,
                       xtol=1e-14, rtol=4 * np.finfo(float).eps)
        self.check_domain(t)
        return float(t)

    def describe(self):
        """Flat parameter dict suitable for metadata headers."""
        fields = {
            ProtocolKind.CONSTANT: (),
            ProtocolKind.LINEAR_RAMP: ("rate",),
            ProtocolKind.EXPONENTIAL_CHIRP: ("lam",),
            ProtocolKind.TANH_SWEEP: ("amplitude", "width", "center"),
            ProtocolKind.CONSTANT_ETA: ("eta",),
        }[self.kind]
        out = {"kind": self.kind.value, "omega0": self.omega0}
        out.update({f: getattr(self, f) for f in fields})
        out.update(t_start=self.t_start, t_end=self.t_end)
        return out


def make_protocol(kind, omega0=1.0, **params):
    """Build a protocol from a kind name and keyword parameters.

    Unknown keys for the given kind raise :class:`ArgumentError`.
    """
    try:
        k = ProtocolKind(str(kind).strip().lower())
    except ValueError:
        names = ", ".join(p.value for p in ProtocolKind)
        raise ArgumentError(f"unknown protocol kind {kind!r}; expected one of {names}") from None
    allowed = {
        ProtocolKind.CONSTANT: set(),
        ProtocolKind.LINEAR_RAMP: {"rate"},
        ProtocolKind.EXPONENTIAL_CHIRP: {"lam"},
        ProtocolKind.TANH_SWEEP: {"amplitude", "width", "center"},
        ProtocolKind.CONSTANT_ETA: {"eta"},
    }[k] | {"t_start", "t_end"}
    extra = set(params) - allowed
    if extra:
        raise ArgumentError(f"parameters {sorted(extra)} not used by protocol {k.value}")
    ctor = {
        ProtocolKind.CONSTANT: DriveProtocol.constant,
        ProtocolKind.LINEAR_RAMP: DriveProtocol.linear_ramp,
        ProtocolKind.EXPONENTIAL_CHIRP: DriveProtocol.exponential_chirp,
        ProtocolKind.TANH_SWEEP: DriveProtocol.tanh_sweep,
        ProtocolKind.CONSTANT_ETA: DriveProtocol.constant_eta,
    }[k]
    try:
        return ctor(omega0, **params)
    except TypeError as exc:
        raise ArgumentError(f"missing parameter for protocol {k.value}: {exc}") from None


def omega_at(p: DriveProtocol, t):
    return p.omega(t)


def eta_at(p: DriveProtocol, t):
    return p.eta_of(t)


def local_time(p: DriveProtocol, t0, t1):
    return p.local_time(t0, t1)
