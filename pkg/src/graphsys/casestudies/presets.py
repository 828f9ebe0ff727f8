"""Named study configurations with the published defaults embedded."""
from __future__ import annotations

import copy

import numpy as np

from ..errors import SpecError
from .gas import paper_network
from .reactor import ReactorSpec


def _benders_instance():
    # 3 bases, 4 districts, 12 equiprobable demand scenarios; seeded so the preset is fixed
    rng = np.random.default_rng(20190101)
    nb, nf, S = 3, 4, 12
    scen = []
    for _ in range(S):
        scen.append({"p": [round(1.0 / S, 6)] * nf,
                     "d": rng.uniform(2.0, 8.0, nf).round(3).tolist()})
    return {"gamma": [4.0, 3.0, 5.0], "h": [1.0, 1.2, 0.8],
            "base_arcs": [[0, 1, 0.5], [1, 2, 0.5], [2, 0, 0.7], [1, 0, 0.6]],
            "district_arcs": [[0, 0], [0, 1], [1, 1], [1, 2], [2, 2], [2, 3], [0, 3]],
            "n_districts": nf, "budget": 6.0, "scenarios": scen}


def _build():
    return {
        "paper-gas": {"study": "gas", "spec": paper_network(nx=3, nt=4).to_dict(), "k": 13,
                      "sweep": [3, 6, 12, 24]},
        "paper-benders": {"study": "benders", "spec": _benders_instance(),
                          "arch": {"workers": 4, "delay": 0.005, "tau_master": 0.01,
                                   "tau_sub": 0.003}},
        "paper-reactor": {"study": "mpc", "spec": ReactorSpec().to_dict(),
                          "architecture": "cooperative", "horizon": 5000.0},
    }


PRESET_NAMES = ("paper-gas", "paper-benders", "paper-reactor")


def load_preset(name):
    presets = _build()
    if name not in presets:
        raise SpecError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return copy.deepcopy(presets[name])
