"""Independent reference computations used by the tests.

Nothing here imports the package: the dense oracle builds the full
individual-level covariance matrix and solves the GLS normal equations
directly, and the simulator draws data from the mixed model itself.
"""

from __future__ import annotations

import numpy as np


def design_rows(sizes, assignment, T):
    """Fixed-effects rows (period dummies then treatment) and cluster/individual labels.

    Observations are ordered cluster, period, individual. In the closed
    cohort the same individuals recur in every period, so ``person`` is
    shared across periods of one cluster.
    """
    rows, cluster, person = [], [], []
    pid = 0
    for i, (n, seq) in enumerate(zip(sizes, assignment)):
        for j in range(T):
            x = np.zeros(T + 1)
            x[j] = 1.0
            x[T] = 1.0 if j >= T - seq else 0.0
            for k in range(n):
                rows.append(x)
                cluster.append(i)
                person.append(pid + k)
        pid += n
    return np.array(rows), np.array(cluster), np.array(person)


def covariance(sizes, assignment, T, sigma_e2, tau2, omega2=0.0):
    _, cluster, person = design_rows(sizes, assignment, T)
    V = sigma_e2 * np.eye(len(cluster))
    V += tau2 * (cluster[:, None] == cluster[None, :])
    if omega2:
        V += omega2 * (person[:, None] == person[None, :])
    return V


def gls_weights(sizes, assignment, T, sigma_e2, tau2, omega2=0.0):
    """Row vector g with theta_hat = g'y, and the analytic var(theta_hat) = g'Vg."""
    X, _, _ = design_rows(sizes, assignment, T)
    V = covariance(sizes, assignment, T, sigma_e2, tau2, omega2)
    Vinv_X = np.linalg.solve(V, X)
    info = X.T @ Vinv_X
    G = np.linalg.solve(info, Vinv_X.T)
    g = G[-1]
    return g, float(g @ V @ g), float(np.linalg.inv(info)[-1, -1])


def dense_var_theta(sizes, assignment, T, sigma_e2, tau2, omega2=0.0):
    return gls_weights(sizes, assignment, T, sigma_e2, tau2, omega2)[2]


def simulate_theta(sizes, assignment, T, sigma_e2, tau2, omega2=0.0, *, reps, seed,
                   theta=0.5, chunk=5000):
    """GLS estimates of theta from ``reps`` datasets drawn from the mixed model."""
    X, cluster, person = design_rows(sizes, assignment, T)
    g, _, _ = gls_weights(sizes, assignment, T, sigma_e2, tau2, omega2)
    beta = np.linspace(1.0, 2.0, T)
    mean = X @ np.concatenate([beta, [theta]])
    rng = np.random.default_rng(seed)
    C, n_people = len(sizes), int(person.max()) + 1
    out = []
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        y = mean + np.sqrt(sigma_e2) * rng.standard_normal((m, len(cluster)))
        y += np.sqrt(tau2) * rng.standard_normal((m, C))[:, cluster]
        if omega2:
            y += np.sqrt(omega2) * rng.standard_normal((m, n_people))[:, person]
        out.append(y @ g)
        done += m
    return np.concatenate(out)
