"""Two reactors and a flash separator with recycle: plant model, RK4, linearization."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import SpecError, StateBlowup
from ..modelgraph import expr as ex

STATE_NAMES = ["H1", "xA1", "xB1", "T1", "H2", "xA2", "xB2", "T2", "H3", "xA3", "xB3", "T3"]
INPUT_NAMES = ["Ff1", "Q1", "F1", "Ff2", "Q2", "F2", "FR", "Q3", "F3"]
# controller i measures states 4i..4i+3 and owns inputs 3i..3i+2
SUBSYSTEMS = [(list(range(0, 4)), [0, 1, 2]), (list(range(4, 8)), [3, 4, 5]),
              (list(range(8, 12)), [6, 7, 8])]

PARAMS = {"A1": 1.0, "A2": 1.0, "A3": 0.5, "rho": 1000.0, "Cp": 4.2, "xA0": 0.98, "T0": 359.1,
          "kA": 2769.44, "kB": 2500.0, "EA": 6013.95, "EB": 7216.74, "dHA": -167.4,
          "dHB": -139.5, "aA": 5.0, "aB": 1.0, "aC": 0.5}
X_SP = [16.1475, 0.6291, 0.3593, 387.594, 12.3137, 0.6102, 0.3760, 386.993,
        15.0, 0.2928, 0.67, 387.01]
U_SP = [6.3778, 26.0601, 63.1766, 6.8126, 5.0382, 69.9892, 56.7989, 5.0347, 12.6224]
X_INIT = [25.4702, 0.1428, 0.7045, 415.944, 5.4703, 0.3653, 0.5307, 399.303,
          15.0, 0.1565, 0.67, 399.364]
U_INIT = [1.1866, 29.0597, 12.8828, 7.0263, 5.1067, 19.9091, 11.6962, 5.09834, 8.0960]
Q_DIAG = [100.0, 10.0, 100.0, 0.1, 10.0, 10.0, 100.0, 0.1, 1.0, 10.0, 1e5, 0.1]
R_DIAG = [100.0] * 9


@dataclass
class ReactorSpec:
    params: dict = field(default_factory=lambda: dict(PARAMS))
    x_sp: list = field(default_factory=lambda: list(X_SP))
    u_sp: list = field(default_factory=lambda: list(U_SP))
    x0: list = field(default_factory=lambda: list(X_INIT))
    u0: list = field(default_factory=lambda: list(U_INIT))
    q: list = field(default_factory=lambda: list(Q_DIAG))
    r: list = field(default_factory=lambda: list(R_DIAG))
    horizon_steps: int = 20
    dt: float = 30.0
    sample_period: float = 60.0
    measurement_delay: float = 30.0
    injection_delay: float = 30.0
    exchange_delay: float = 0.0
    start: float = 5.0
    central_time: float = 3.0
    local_time: float = 1.0
    iter_max: int = 3
    coop_weight: float | None = None  # None means 1/number of controllers
    substep: float = 1.0
    plant_step: float | None = None  # longest plant advance per run_plant, None = to next signal
    height_floor: float = 1e-3

    def __post_init__(self):
        self.validate()

    def validate(self):
        missing = set(PARAMS) - set(self.params)
        if missing:
            raise SpecError(f"missing reactor parameters {sorted(missing)}")
        for name, n in (("x_sp", 12), ("x0", 12), ("q", 12), ("u_sp", 9), ("u0", 9), ("r", 9)):
            v = getattr(self, name)
            if len(v) != n or not all(math.isfinite(float(a)) for a in v):
                raise SpecError(f"{name} must hold {n} finite values")
        if self.horizon_steps < 1 or self.dt <= 0 or self.sample_period <= 0:
            raise SpecError("horizon, step and sample period must be positive")
        if self.iter_max < 1:
            raise SpecError("iter_max must be at least 1")
        if min(self.measurement_delay, self.injection_delay, self.exchange_delay, self.start) < 0:
            raise SpecError("delays and start time must be nonnegative")
        if self.plant_step is not None and self.plant_step <= 0:
            raise SpecError("plant_step must be positive")
        if self.coop_weight is not None and not (0 < self.coop_weight <= 1):
            raise SpecError("coop_weight must lie in (0, 1]")

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown reactor spec keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _exp(v):
    return ex.exp(v) if isinstance(v, ex.Expr) else math.exp(v)


def plant_rhs(x, u, p=PARAMS):
    """Time derivative of the 12 states. Works on floats and on expressions."""
    H1, xA1, xB1, T1, H2, xA2, xB2, T2, H3, xA3, xB3, T3 = x
    Ff1, Q1, F1, Ff2, Q2, F2, FR, Q3, F3 = u
    rho, Cp = p["rho"], p["Cp"]
    A1, A2, A3 = p["A1"], p["A2"], p["A3"]
    FD = 0.01 * FR
    xC3 = 1 - xA3 - xB3
    xbar = p["aA"] * xA3 + p["aB"] * xB3 + p["aC"] * xC3
    xAR = p["aA"] * xA3 / xbar
    xBR = p["aB"] * xB3 / xbar
    TR = T3  # recycle leaves the separator at its temperature
    kA1 = p["kA"] * _exp(-p["EA"] / T1)
    kB1 = p["kB"] * _exp(-p["EB"] / T1)
    kA2 = p["kA"] * _exp(-p["EA"] / T2)
    kB2 = p["kB"] * _exp(-p["EB"] / T2)
    m1, m2, m3 = rho * A1 * H1, rho * A2 * H2, rho * A3 * H3
    return [
        (Ff1 + FR - F1) / (rho * A1),
        (Ff1 * p["xA0"] + FR * xAR - F1 * xA1) / m1 - kA1 * xA1,
        (FR * xBR - F1 * xB1) / m1 + kA1 * xA1 - kB1 * xB1,
        (Ff1 * p["T0"] + FR * TR - F1 * T1) / m1
        - (kA1 * xA1 * p["dHA"] + kB1 * xB1 * p["dHB"]) / Cp + Q1 / (m1 * Cp),
        (Ff2 + F1 - F2) / (rho * A2),
        (Ff2 * p["xA0"] + F1 * xA1 - F2 * xA2) / m2 - kA2 * xA2,
        (F1 * xB1 - F2 * xB2) / m2 + kA2 * xA2 - kB2 * xB2,
        (Ff2 * p["T0"] + F1 * T1 - F2 * T2) / m2
        - (kA2 * xA2 * p["dHA"] + kB2 * xB2 * p["dHB"]) / Cp + Q2 / (m2 * Cp),
        (F2 - FD - FR - F3) / (rho * A3),
        (F2 * xA2 - (FD + FR) * xAR - F3 * xA3) / m3,
        (F2 * xB2 - (FD + FR) * xBR - F3 * xB3) / m3,
        (F2 * T2 - (FD + FR) * TR - F3 * T3) / m3 + Q3 / (m3 * Cp),
    ]


def rhs(spec: ReactorSpec, x, u):
    return np.array(plant_rhs(list(map(float, x)), list(map(float, u)), spec.params))


def linearize(spec: ReactorSpec, x=None, u=None):
    """(A, B) = Jacobians of the plant at (x, u) by forward-mode AD, default the setpoint."""
    x = np.asarray(spec.x_sp if x is None else x, dtype=float)
    u = np.asarray(spec.u_sp if u is None else u, dtype=float)
    z = [ex.Var(i, n) for i, n in enumerate(STATE_NAMES + INPUT_NAMES)]
    point = np.concatenate([x, u])
    fs = plant_rhs(z[:12], z[12:], spec.params)
    J = np.array([ex._as_expr(f).gradient(point, None, 21) for f in fs])
    return J[:, :12], J[:, 12:]


def _rk4_step(spec, x, u, h):
    f = lambda z: rhs(spec, z, u)
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate_plant(spec: ReactorSpec, state, inputs, t0, t1, substep=None):
    """RK4 from t0 to t1 with substeps of at most ``substep`` seconds."""
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    x = np.asarray(state, dtype=float).copy()
    u = np.asarray(inputs, dtype=float)
    if x.shape != (12,) or u.shape != (9,):
        raise ValueError("state needs 12 entries and inputs 9")
    h = spec.substep if substep is None else substep
    t = float(t0)
    while t1 - t > 1e-12:
        step = min(h, t1 - t)
        x = _rk4_step(spec, x, u, step)
        for i in (0, 4, 8):
            x[i] = max(x[i], spec.height_floor)
        if not np.all(np.isfinite(x)):
            raise StateBlowup(f"plant state became non-finite at t={t + step:.3f}")
        t += step
    return x


def tracking_error(spec: ReactorSpec, x):
    d = np.asarray(x, dtype=float) - np.asarray(spec.x_sp)
    return float(d @ (np.asarray(spec.q) * d))
