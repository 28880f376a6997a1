"""Regenerates gof_oracle.json: 20 fixed samples with reference statistics.

SW and DAP come from scipy (swilk, normaltest). KS p-values are the
Kolmogorov survival function evaluated with mpmath at the small-sample
corrected lambda; scipy's exact p-value is stored alongside for comparison.
"""
import json

import mpmath as mp
import numpy as np
from scipy import stats

mp.mp.dps = 40


def kolmogorov_q(lam):
    lam = mp.mpf(lam)
    if lam <= 0:
        return mp.mpf(1)
    return 2 * mp.nsum(lambda k: (-1) ** (k - 1) * mp.exp(-2 * k * k * lam * lam), [1, mp.inf])


def ks(x):
    x = np.sort(x)
    n = len(x)
    f = np.array([float(mp.ncdf(v)) for v in x])
    d = max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n))
    sn = mp.sqrt(n)
    p = kolmogorov_q((sn + mp.mpf("0.12") + mp.mpf("0.11") / sn) * mp.mpf(d))
    return float(d), float(p)


rng = np.random.default_rng(20240611)
makers = [
    ("normal", lambda n: rng.standard_normal(n)),
    ("normal_shift", lambda n: rng.standard_normal(n) + 0.2),
    ("normal_wide", lambda n: 1.3 * rng.standard_normal(n)),
    ("student_t5", lambda n: rng.standard_t(5, n)),
    ("uniform", lambda n: rng.uniform(-1.7, 1.7, n)),
    ("laplace", lambda n: rng.laplace(0, 0.7, n)),
    ("exponential", lambda n: rng.exponential(1.0, n) - 1.0),
    ("lognormal", lambda n: rng.lognormal(0, 0.4, n) - 1.1),
    ("mixture", lambda n: np.where(rng.random(n) < 0.9, rng.standard_normal(n), 3 * rng.standard_normal(n))),
    ("normal_narrow", lambda n: 0.85 * rng.standard_normal(n)),
]
sizes = [20, 35, 50, 80, 120, 200, 300, 450, 700, 1000]

cases = []
for i in range(20):
    name, make = makers[i % len(makers)]
    n = sizes[(3 * i) % len(sizes)]
    x = np.round(make(n), 6)
    d, p_ks = ks(x)
    w, p_sw = stats.shapiro(x)
    k2, p_dap = stats.normaltest(x)
    cases.append({
        "name": f"{name}_{n}",
        "x": [float(v) for v in x],
        "ks": {"statistic": d, "p": p_ks, "p_exact": float(stats.kstest(x, "norm").pvalue)},
        "sw": {"statistic": float(w), "p": float(p_sw)},
        "dap": {"statistic": float(k2), "p": float(p_dap)},
    })

with open(__file__.replace(".py", ".json"), "w") as f:
    json.dump(cases, f, indent=1)
    f.write("\n")
