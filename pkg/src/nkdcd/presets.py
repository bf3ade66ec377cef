"""Named training configurations for the bundled experiments.

A preset is a plain dict accepted by ``TrainConfig.from_dict`` plus an
optional ``standardize`` key read by the CLI.
"""
from __future__ import annotations

import copy

LORENZ96 = {
    "lam": 0.05, "tau": 5e-4, "L": 5, "N": 15, "h": 16, "batch": 500,
    "penalty": "ilg", "activation": "leaky_relu", "loss_reduction": "mean",
    "max_epochs": 600, "standardize": True,
}

_VAR3_BASE = {
    "tau": 5e-2, "L": 5, "N": 10, "h": 4, "batch": 500, "activation": "linear",
    "loss_reduction": "element_mean", "stop_threshold": float("inf"),
    "max_epochs": 3000, "standardize": True,
}

VAR3 = {
    "var3-ilg": dict(_VAR3_BASE, penalty="ilg", lam=2e-2),
    "var3-ulg": dict(_VAR3_BASE, penalty="ulg", lam=2e-2),
    "var3-hlg": dict(_VAR3_BASE, penalty="hlg", lam=1e-4),
}

# external datasets (user-supplied CSVs): finance 4000x25, fMRI 2400x5, DREAM3 966x100
EXTERNAL = {
    "finance": {"lam": 0.01, "tau": 5e-3, "L": 3, "N": 15, "h": 4, "batch": 1024,
                "activation": "linear", "penalty": "ilg", "standardize": True},
    "fmri": {"lam": 0.05, "tau": 5e-4, "L": 3, "N": 10, "h": 8, "batch": 500,
             "penalty": "hlg", "standardize": True},
    "dream3-a": {"lam": 0.01, "tau": 5e-4, "L": 2, "N": 5, "h": 8, "batch": 966,
                 "optimizer": "adam", "penalty": "ilg", "standardize": True},
    "dream3-b": {"lam": 0.3, "tau": 5e-3, "L": 2, "N": 10, "h": 8, "batch": 966,
                 "optimizer": "adam", "penalty": "ilg", "standardize": True},
}

PRESETS = {"lorenz96": LORENZ96, **VAR3, **EXTERNAL}


def get(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
