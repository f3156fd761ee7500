#!/usr/bin/env python3
"""Parameter sweep used to pick the synthetic generator defaults.

Re-implements the generator's booking model in numpy (not bit-compatible with
the C++ RNG) and prints the pooled Spearman correlation between q_{t+1}^1 and
q_{t+1}^0, gross and differenced, for a few parameter variations.

Needs numpy and scipy.
"""

import numpy as np
import scipy.stats as ss


def generate(n=200, periods=45, rho=0.9, sparsity=0.1, base=100, ar=0.6, noise=0.3, concentration=0.3,
             dispersion=0.0, seed=1):
    rng = np.random.default_rng(seed)
    q = np.zeros((n, periods, 4), int)
    for i in range(n):
        level = np.exp(dispersion * rng.standard_normal() - dispersion ** 2 / 2)
        e = 0.0
        for t in range(periods):
            e = ar * e + noise * rng.standard_normal()
            demand = max(0, round(level * base * (1 + e)))
            if rng.random() < sparsity:
                demand = 0
            u = rng.dirichlet([concentration] * 3)
            w = np.array([(1 - rho) * u[0], rho, (1 - rho) * u[1], (1 - rho) * u[2]])
            # largest remainder apportionment of the period's demand over delivery dates
            raw = w * demand
            net = np.floor(raw).astype(int)
            order = np.argsort(-(raw - net), kind="stable")
            net[order[: demand - net.sum()]] += 1
            q[i, t] = np.cumsum(net[::-1])[::-1]
    return q


def main():
    for variation in [{}, {"concentration": 0.5}, {"sparsity": 0.05}, {"dispersion": 0.5}, {"noise": 0.5}]:
        q = generate(**variation)
        net = q.copy()
        net[:, :, :3] = q[:, :, :3] - q[:, :, 1:]
        gross_r = ss.spearmanr(q[:, 1:42, 1].ravel(), q[:, 1:42, 0].ravel())[0]
        net_r = ss.spearmanr(net[:, 1:42, 1].ravel(), net[:, 1:42, 0].ravel())[0]
        print(f"{variation or 'defaults'}: gross {gross_r:.3f} differenced {net_r:.3f}")


if __name__ == "__main__":
    main()
