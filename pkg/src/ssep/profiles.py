"""Initial density profiles f0: [0,1] -> [0,1].

Either a closed-form tag (constant / linear / sine-bump) with parameters or a
lookup table with linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class InitialProfile:
    kind: str
    a: float = 0.0
    b: float = 0.0
    modes: int = 1
    table_u: tuple = field(default=())
    table_v: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "sine_bump", "table"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "table":
            u = np.asarray(self.table_u, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if u.ndim != 1 or u.shape != v.shape or len(u) < 2:
                raise ValueError("table profile needs matching u/v arrays of length >= 2")
            if not (np.all(np.diff(u) > 0) and u[0] <= 0.0 <= 1.0 <= u[-1]):
                raise ValueError("table abscissae must be increasing and cover [0, 1]")
        probe = self.evaluate(np.linspace(0.0, 1.0, 513))
        if probe.min() < -1e-12 or probe.max() > 1.0 + 1e-12:
            raise ValueError("profile values must lie in [0, 1]")

    @classmethod
    def constant(cls, value: float) -> "InitialProfile":
        return cls("constant", a=value)

    @classmethod
    def linear(cls, left: float, right: float) -> "InitialProfile":
        return cls("linear", a=left, b=right)

    @classmethod
    def sine_bump(cls, base: float, amplitude: float, modes: int = 1) -> "InitialProfile":
        return cls("sine_bump", a=base, b=amplitude, modes=modes)

    @classmethod
    def table(cls, u, v) -> "InitialProfile":
        return cls("table", table_u=tuple(float(x) for x in u),
                   table_v=tuple(float(x) for x in v))

    @classmethod
    def from_dict(cls, d: dict) -> "InitialProfile":
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(float(d["value"]))
        if kind == "linear":
            return cls.linear(float(d["left"]), float(d["right"]))
        if kind == "sine_bump":
            return cls.sine_bump(float(d["base"]), float(d["amplitude"]),
                                 int(d.get("modes", 1)))
        if kind == "table":
            return cls.table(d["u"], d["v"])
        raise ValueError(f"unknown profile kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.a}
        if self.kind == "linear":
            return {"kind": "linear", "left": self.a, "right": self.b}
        if self.kind == "sine_bump":
            return {"kind": "sine_bump", "base": self.a, "amplitude": self.b,
                    "modes": self.modes}
        return {"kind": "table", "u": list(self.table_u), "v": list(self.table_v)}

    def evaluate(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "constant":
            return np.full_like(u, self.a)
        if self.kind == "linear":
            return self.a + (self.b - self.a) * u
        if self.kind == "sine_bump":
            return self.a + self.b * np.sin(self.modes * np.pi * u)
        return np.interp(u, self.table_u, self.table_v)

    def __call__(self, u):
        return self.evaluate(u)

    def site_values(self, N: int) -> np.ndarray:
        """Profile sampled at the lattice points x/N, x = 1..N-1."""
        return self.evaluate(np.arange(1, N) / N)
