"""Compare sampling overhead and shot error of the cutting schemes on random circuits."""

import argparse

import numpy as np

from qcutadv import qmath, wirecut
from qcutadv.circuit import CircuitIR, Gate, random_circuit, simulate


def cuttable(rng, width, m, n_gates):
    cut = list(range(m))
    up = random_circuit(m, n_gates, rng).gates
    down = random_circuit(width, n_gates, rng).gates
    # extra wires only touched downstream, so the upstream fragment is the cut register
    ties = [Gate("CNOT", (0, q)) for q in range(m, width)]
    return CircuitIR(width, [*up, *down, *ties]), [(len(up), q) for q in cut]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--circuits", type=int, default=10)
    ap.add_argument("--shots", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'scheme':<12}{'m':>3}{'kappa':>7}{'slots':>7}{'mean |err|':>12}{'mean stderr':>13}")
    for scheme, m in [("PENG_1", 1), ("PAULI_M", 1), ("HARADA_MUB", 1), ("PAULI_M", 2), ("HARADA_MUB", 2)]:
        errs, stds, plan = [], [], None
        for i in range(args.circuits):
            rng = qmath.rng_for(args.seed, m, i)
            c, cuts = cuttable(rng, m + 1, m, 6)
            plan = wirecut.cut_circuit(c, cuts, scheme)
            psi = qmath.random_state(2**c.width, rng)
            obs = np.diag(rng.choice([-1.0, 1.0], 2**c.width))
            out = simulate(c, psi)
            exact = float(np.real(out.conj() @ obs @ out))
            est, std = wirecut.recombine_sampled(plan, psi, obs, args.shots, args.seed + i)
            errs.append(abs(est - exact))
            stds.append(std)
        print(f"{scheme:<12}{m:>3}{plan.kappa:>7.0f}{len(plan.slots()):>7}{np.mean(errs):>12.4f}{np.mean(stds):>13.4f}")


if __name__ == "__main__":
    main()
