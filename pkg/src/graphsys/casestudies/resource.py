"""Two-stage stochastic resource allocation: bases, districts, dispatch arcs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..decomposition.benders import BendersMaster, benders_solve
from ..errors import SpecError
from ..solvers.simplex import EQ, GE, LE, LinearProgram, simplex_solve


@dataclass
class ResourceAllocationSpec:
    gamma: list  # initial resources per base
    h: list  # purchase cost per base
    base_arcs: list  # (from base, to base, cost)
    district_arcs: list  # (base, district)
    n_districts: int
    budget: float
    scenarios: list = field(default_factory=list)  # {"p": [..per district], "d": [..]}

    def __post_init__(self):
        self.validate()

    @property
    def n_bases(self):
        return len(self.gamma)

    def validate(self):
        nb, nf = len(self.gamma), self.n_districts
        if nb < 1 or nf < 1:
            raise SpecError("need at least one base and one district")
        if len(self.h) != nb:
            raise SpecError("h must have one entry per base")
        for a in self.base_arcs:
            i, j, c = a
            if not (0 <= i < nb and 0 <= j < nb) or i == j:
                raise SpecError(f"bad base arc {a}")
            if c < 0:
                raise SpecError("arc costs must be nonnegative")
        for a in self.district_arcs:
            if not (0 <= a[0] < nb and 0 <= a[1] < nf):
                raise SpecError(f"bad district arc {a}")
        if min(self.h, default=0) < 0 or min(self.gamma, default=0) < 0 or self.budget < 0:
            raise SpecError("costs, budget and initial resources must be nonnegative")
        if not self.scenarios:
            raise SpecError("at least one scenario is required")
        for s in self.scenarios:
            if len(s["p"]) != nf or len(s["d"]) != nf:
                raise SpecError("scenario vectors must have one entry per district")
            if min(s["p"]) < 0 or min(s["d"]) < 0:
                raise SpecError("scenario probabilities and demands must be nonnegative")

    def to_dict(self):
        return {"gamma": list(self.gamma), "h": list(self.h),
                "base_arcs": [list(a) for a in self.base_arcs],
                "district_arcs": [list(a) for a in self.district_arcs],
                "n_districts": self.n_districts, "budget": self.budget,
                "scenarios": [{"p": list(s["p"]), "d": list(s["d"])} for s in self.scenarios]}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(list(map(float, d["gamma"])), list(map(float, d["h"])),
                       [(int(a[0]), int(a[1]), float(a[2])) for a in d.get("base_arcs", [])],
                       [(int(a[0]), int(a[1])) for a in d["district_arcs"]],
                       int(d["n_districts"]), float(d["budget"]),
                       [{"p": list(map(float, s["p"])), "d": list(map(float, s["d"]))}
                        for s in d["scenarios"]])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise SpecError(f"bad resource-allocation spec: {exc}") from exc

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


# master column layout: x (base arcs), z (bases), w (bases), theta
def _master_layout(spec):
    na, nb = len(spec.base_arcs), spec.n_bases
    return {"x": np.arange(na), "z": na + np.arange(nb), "w": na + nb + np.arange(nb),
            "theta": na + 2 * nb, "n": na + 2 * nb + 1}


def _first_stage_rows(spec, lay, ncols, col_offset=0):
    """Budget row and w-definition rows shared by master and extensive form."""
    na, nb = len(spec.base_arcs), spec.n_bases
    A = np.zeros((1 + nb, ncols))
    senses = [LE] + [EQ] * nb
    b = np.zeros(1 + nb)
    for k, (_, _, c) in enumerate(spec.base_arcs):
        A[0, col_offset + lay["x"][k]] = c
    for j in range(nb):
        A[0, col_offset + lay["z"][j]] = spec.h[j]
    b[0] = spec.budget
    for j in range(nb):  # w_j - z_j - sum_rec x + sum_snd x = gamma_j
        r = 1 + j
        A[r, col_offset + lay["w"][j]] = 1.0
        A[r, col_offset + lay["z"][j]] = -1.0
        b[r] = spec.gamma[j]
    for k, (i, j, _) in enumerate(spec.base_arcs):
        A[1 + j, col_offset + lay["x"][k]] -= 1.0
        A[1 + i, col_offset + lay["x"][k]] += 1.0
    return A, senses, b


def build_master(spec: ResourceAllocationSpec) -> BendersMaster:
    lay = _master_layout(spec)
    n = lay["n"]
    A, senses, b = _first_stage_rows(spec, lay, n)
    c = np.zeros(n)
    c[lay["theta"]] = 1.0
    lp = LinearProgram(c, A, senses, b)  # all columns >= 0, theta >= 0 included
    return BendersMaster(lp, lay["w"], lay["theta"])


def _recourse_rows(spec, xi, ncols, y_off, u_off):
    nb, nf = spec.n_bases, spec.n_districts
    A = np.zeros((nb + nf, ncols))
    for k, (j, f) in enumerate(spec.district_arcs):
        A[j, y_off + k] = 1.0       # sum_{a out of j} y_a <= w_j   (q_j >= 0)
        A[nb + f, y_off + k] = 1.0  # sum_{a into f} y_a + u_f >= d_f
    for f in range(nf):
        A[nb + f, u_off + f] = 1.0
    senses = [LE] * nb + [GE] * nf
    return A, senses, np.asarray(xi["d"], dtype=float)


def subproblem(spec: ResourceAllocationSpec):
    """Callable (w_hat, xi) -> (LinearProgram, rows coupling to w)."""
    ny, nf, nb = len(spec.district_arcs), spec.n_districts, spec.n_bases

    def build(w_hat, xi):
        A, senses, d = _recourse_rows(spec, xi, ny + nf, 0, ny)
        c = np.concatenate([np.zeros(ny), np.asarray(xi["p"], dtype=float)])
        b = np.concatenate([np.asarray(w_hat, dtype=float), d])
        return LinearProgram(c, A, senses, b), list(range(nb))
    return build


def extensive_form(spec: ResourceAllocationSpec) -> LinearProgram:
    lay = _master_layout(spec)
    n1 = lay["n"] - 1  # no theta
    ny, nf = len(spec.district_arcs), spec.n_districts
    S = len(spec.scenarios)
    n = n1 + S * (ny + nf)
    A1, s1, b1 = _first_stage_rows(spec, lay, n)
    rows, senses, rhs = [A1], list(s1), [b1]
    c = np.zeros(n)
    for s, xi in enumerate(spec.scenarios):
        y_off = n1 + s * (ny + nf)
        A, ss, d = _recourse_rows(spec, xi, n, y_off, y_off + ny)
        A[:spec.n_bases, lay["w"]] = -np.eye(spec.n_bases)  # sum y - w <= 0
        rows.append(A)
        senses += ss
        rhs.append(np.concatenate([np.zeros(spec.n_bases), d]))
        c[y_off + ny:y_off + ny + nf] = xi["p"]
    return LinearProgram(c, np.vstack(rows), senses, np.concatenate(rhs))


def solve_extensive(spec):
    sol = simplex_solve(extensive_form(spec))
    if sol.status != "optimal":
        raise SpecError(f"extensive form is {sol.status}")
    return sol


def solve_benders(spec, tol=1e-8, max_iter=50):
    master = build_master(spec)
    return benders_solve(master, subproblem(spec), spec.scenarios, tol=tol, max_iter=max_iter)


def random_instance(rng: np.random.Generator, max_bases=3, max_districts=4, max_scenarios=8):
    nb = int(rng.integers(1, max_bases + 1))
    nf = int(rng.integers(1, max_districts + 1))
    S = int(rng.integers(1, max_scenarios + 1))
    base_arcs = [(i, j, float(rng.uniform(0.5, 3.0))) for i in range(nb) for j in range(nb)
                 if i != j and rng.random() < 0.6]
    district_arcs = [(j, f) for j in range(nb) for f in range(nf) if rng.random() < 0.7]
    for f in range(nf):  # keep every district reachable so the instance is interesting
        if not any(a[1] == f for a in district_arcs):
            district_arcs.append((int(rng.integers(nb)), f))
    district_arcs.sort()
    scen = []
    for _ in range(S):
        p = rng.uniform(0.0, 1.0, nf)
        scen.append({"p": (p / S).round(6).tolist(), "d": rng.uniform(0.0, 10.0, nf).round(4).tolist()})
    return ResourceAllocationSpec(rng.uniform(0.0, 5.0, nb).round(4).tolist(),
                                  rng.uniform(0.5, 2.0, nb).round(4).tolist(),
                                  base_arcs, district_arcs, nf,
                                  float(round(rng.uniform(0.0, 10.0), 4)), scen)
