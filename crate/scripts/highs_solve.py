#!/usr/bin/env python3
"""Solve a flexenv LP-text dump with SciPy's HiGHS backend.

Usage: highs_solve.py model.lp
Prints `status <...>` followed by `x<index> <value>` lines.
"""
import re
import sys

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

TERM = re.compile(r"([+-])\s+(\S+)\s+x(\d+)")


def parse(path):
    sense = None
    obj = {}
    rows = []
    bounds = {}
    section = None
    nvars = 0
    with open(path) as fh:
        for raw in fh:
            line = raw.split("\\", 1)[0].strip()
            if not line:
                continue
            if line in ("Maximize", "Minimize"):
                sense = line
                section = "obj"
                continue
            if line == "Subject To":
                section = "rows"
                continue
            if line == "Bounds":
                section = "bounds"
                continue
            if line == "End":
                break
            if section == "obj":
                body = line.split(":", 1)[1]
                for s, c, j in TERM.findall(body):
                    j = int(j)
                    obj[j] = obj.get(j, 0.0) + (float(c) if s == "+" else -float(c))
                    nvars = max(nvars, j + 1)
            elif section == "rows":
                body = line.split(":", 1)[1]
                m = re.search(r"(<=|>=|=)\s*(\S+)\s*$", body)
                op, rhs = m.group(1), float(m.group(2))
                terms = []
                for s, c, j in TERM.findall(body[: m.start()]):
                    j = int(j)
                    terms.append((j, float(c) if s == "+" else -float(c)))
                    nvars = max(nvars, j + 1)
                rows.append((terms, op, rhs))
            elif section == "bounds":
                toks = line.split()
                if len(toks) == 2 and toks[1] == "free":
                    j = int(toks[0][1:])
                    bounds[j] = (None, None)
                elif len(toks) == 3 and toks[1] == "=":
                    j = int(toks[0][1:])
                    v = float(toks[2])
                    bounds[j] = (v, v)
                else:
                    lo, _, name, _, hi = toks
                    j = int(name[1:])
                    lo = None if lo == "-inf" else float(lo)
                    hi = None if hi == "+inf" else float(hi)
                    bounds[j] = (lo, hi)
                nvars = max(nvars, j + 1)
    return sense, obj, rows, bounds, nvars


def main():
    sense, obj, rows, bounds, n = parse(sys.argv[1])
    c = np.zeros(n)
    for j, v in obj.items():
        c[j] = v
    if sense == "Maximize":
        c = -c
    ub_r, ub_c, ub_v, b_ub = [], [], [], []
    eq_r, eq_c, eq_v, b_eq = [], [], [], []
    for terms, op, rhs in rows:
        if op == "=":
            i = len(b_eq)
            for j, a in terms:
                eq_r.append(i); eq_c.append(j); eq_v.append(a)
            b_eq.append(rhs)
        else:
            s = 1.0 if op == "<=" else -1.0
            i = len(b_ub)
            for j, a in terms:
                ub_r.append(i); ub_c.append(j); ub_v.append(s * a)
            b_ub.append(s * rhs)
    A_ub = coo_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n)).tocsr() if b_ub else None
    A_eq = coo_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n)).tocsr() if b_eq else None
    bnds = [bounds.get(j, (0.0, None)) for j in range(n)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub or None, A_eq=A_eq, b_eq=b_eq or None,
                  bounds=bnds, method="highs")
    status = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}.get(res.status, "limit")
    print(f"status {status}")
    if res.x is not None:
        for j, v in enumerate(res.x):
            print(f"x{j} {float(v)!r}")


if __name__ == "__main__":
    main()
