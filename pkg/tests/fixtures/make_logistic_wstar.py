"""Regenerate logistic_wstar.json with an implementation independent of otagd.

The data come from ``otagd.make_logistic``'s generator, but the loss, gradient
and minimiser below are written from scratch and solved with scipy.
"""

import json
import pathlib

import numpy as np
from scipy.optimize import minimize

from otagd.objectives import make_logistic

SETTINGS = dict(N=5, d=4, samples_per_agent=40, l2_reg=0.1, seed=0)


def solve(x, y, l2):
    flat_x, flat_y = x.reshape(-1, x.shape[-1]), y.reshape(-1)

    def f(w):
        m = flat_y * (flat_x @ w)
        return np.mean(np.logaddexp(0.0, -m)) + 0.5 * l2 * w @ w

    def g(w):
        m = flat_y * (flat_x @ w)
        return -(flat_x.T @ (flat_y * np.exp(-np.logaddexp(0.0, m)))) / flat_y.size + l2 * w

    res = minimize(f, np.zeros(flat_x.shape[1]), jac=g, method="BFGS", options={"gtol": 1e-13, "maxiter": 10000})
    w = res.x
    for _ in range(20):  # polish with Newton steps
        m = flat_y * (flat_x @ w)
        s = 1.0 / (1.0 + np.exp(-m))
        h = (flat_x.T * (s * (1 - s))) @ flat_x / flat_y.size + l2 * np.eye(w.size)
        w = w - np.linalg.solve(h, g(w))
    return w, float(np.linalg.norm(g(w)))


if __name__ == "__main__":
    p = make_logistic(**SETTINGS)
    w, residual = solve(p.features, p.labels, p.l2_reg)
    out = dict(settings=SETTINGS, w_star=w.tolist(), residual=residual)
    path = pathlib.Path(__file__).with_name("logistic_wstar.json")
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(out)
