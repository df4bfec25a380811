"""Reference bus voltages from a polar-coordinate Newton power flow.

Independent of the C++ solver: builds the complex bus admittance matrix
directly and iterates on (Va, Vm) with a dense Jacobian. Reactive limits
are ignored. Writes one CSV per case with columns bus,vm,va_rad.

    python3 tools/oracles/reference_pf.py data/cases tests/data case14 case30 case118
"""
import re
import sys
from pathlib import Path

import numpy as np


def load_case(path):
    text = Path(path).read_text()
    ppc = {"baseMVA": float(re.search(r"mpc\.baseMVA\s*=\s*([\d.eE+-]+)", text).group(1))}
    for name in ("bus", "gen", "branch"):
        body = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\];", text, re.S).group(1)
        rows = []
        for line in body.split("\n"):
            line = line.split("%")[0].strip().rstrip(";").strip()
            if line:
                rows.append([float(x) for x in line.split()])
        ppc[name] = np.array(rows)
    return ppc


def solve(ppc, tol=1e-12, max_iter=30):
    base = ppc["baseMVA"]
    bus, gen, br = ppc["bus"], ppc["gen"], ppc["branch"]
    ids = bus[:, 0].astype(int)
    pos = {b: i for i, b in enumerate(ids)}
    n = len(ids)

    ybus = np.zeros((n, n), dtype=complex)
    for row in br:
        if row[10] <= 0:
            continue
        f, t = pos[int(row[0])], pos[int(row[1])]
        ys = 1.0 / complex(row[2], row[3])
        tap = row[8] if row[8] != 0 else 1.0
        tc = tap * np.exp(1j * np.deg2rad(row[9]))
        bc = row[4]
        ybus[f, f] += (ys + 1j * bc / 2) / tap**2
        ybus[f, t] += -ys / np.conj(tc)
        ybus[t, f] += -ys / tc
        ybus[t, t] += ys + 1j * bc / 2
    ybus[np.arange(n), np.arange(n)] += (bus[:, 4] + 1j * bus[:, 5]) / base

    kind = bus[:, 1].astype(int)
    sbus = -(bus[:, 2] + 1j * bus[:, 3]) / base
    vm = bus[:, 7].copy()
    va = np.deg2rad(bus[:, 8])
    has_gen = np.zeros(n, dtype=bool)
    for g in gen:
        if g[7] <= 0:
            continue
        i = pos[int(g[0])]
        sbus[i] += complex(g[1], g[2]) / base
        if kind[i] in (2, 3) and not has_gen[i]:
            vm[i] = g[5]
        has_gen[i] = True
    kind = np.where((kind == 2) & ~has_gen, 1, kind)

    pv = np.where(kind == 2)[0]
    pq = np.where(kind == 1)[0]
    ang = np.r_[pv, pq]
    v = vm * np.exp(1j * va)
    for _ in range(max_iter):
        mis = v * np.conj(ybus @ v) - sbus
        f = np.r_[mis.real[ang], mis.imag[pq]]
        if np.max(np.abs(f)) < tol:
            return ids, np.abs(v), np.angle(v)
        ibus = ybus @ v
        dva = 1j * np.diag(v) @ np.conj(np.diag(ibus) - ybus @ np.diag(v))
        dvm = np.diag(v) @ np.conj(ybus @ np.diag(v / np.abs(v))) + np.diag(
            v / np.abs(v)
        ) @ np.conj(np.diag(ibus))
        jac = np.block(
            [
                [dva.real[np.ix_(ang, ang)], dvm.real[np.ix_(ang, pq)]],
                [dva.imag[np.ix_(pq, ang)], dvm.imag[np.ix_(pq, pq)]],
            ]
        )
        dx = np.linalg.solve(jac, -f)
        a, m = np.angle(v), np.abs(v)
        a[ang] += dx[: len(ang)]
        m[pq] += dx[len(ang):]
        v = m * np.exp(1j * a)
    raise RuntimeError("reference power flow did not converge")


def main(argv):
    case_dir, out_dir, names = Path(argv[1]), Path(argv[2]), argv[3:]
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in names:
        ids, vm, va = solve(load_case(case_dir / f"{name}.m"))
        with open(out_dir / f"{name}_reference.csv", "w") as out:
            out.write("bus,vm,va_rad\n")
            for b, m, a in zip(ids, vm, va):
                out.write(f"{b},{m:.12f},{a:.12f}\n")


if __name__ == "__main__":
    main(sys.argv)
