"""MPS export (and a matching reader) for cross-checking with external solvers.

Free format (the default) writes every number with :func:`repr` and round-trips
exactly; fixed format truncates numbers to the 12-character field.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .problem import LpProblem


def _fixed_num(v: float) -> str:
    s = f"{v:.12g}"
    if len(s) > 12:
        s = f"{v:.6e}"
    return s


def _fixed_line(f1="", f2="", f3="", f4="", f5="", f6=""):
    # fields start at columns 2, 5, 15, 25, 40, 50
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        line += f"   {f5:<8}  {f6:>12}"
    return line.rstrip()


def _free_line(*fields):
    return " " + " ".join(f for f in fields if f)


def write_mps(p: LpProblem, path, name: str = "WANDLP", free: bool = True):
    """Write ``p`` in MPS format. Row names are ``R<i>``, columns ``C<j>``."""
    if free:
        line, num = _free_line, lambda v: repr(float(v))
    else:
        if p.n_vars >= 10**7 or p.n_rows >= 10**7:
            raise ValueError("problem too large for 8-character fixed MPS names")
        line, num = _fixed_line, _fixed_num
    csc = p.A.tocsc()
    lines = [f"NAME          {name}", "ROWS", line("N", "COST")]
    lines += [line("L", f"R{i}") for i in range(p.n_rows)]
    lines.append("COLUMNS")
    for j in range(p.n_vars):
        col = f"C{j}"
        entries = []
        if p.c[j] != 0:
            entries.append(("COST", p.c[j]))
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        entries += [(f"R{i}", v) for i, v in zip(csc.indices[lo:hi], csc.data[lo:hi])]
        if not entries:
            entries.append(("COST", 0.0))
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            if len(pair) == 2:
                lines.append(line("", col, pair[0][0], num(pair[0][1]), pair[1][0], num(pair[1][1])))
            else:
                lines.append(line("", col, pair[0][0], num(pair[0][1])))
    lines.append("RHS")
    for i in range(p.n_rows):
        if p.b[i] != 0:
            lines.append(line("", "RHS", f"R{i}", num(p.b[i])))
    lines.append("BOUNDS")
    for j in range(p.n_vars):
        lo, hi = p.lo[j], p.hi[j]
        col = f"C{j}"
        if lo == hi:
            lines.append(line("FX", "BND", col, num(lo)))
            continue
        if np.isinf(lo) and np.isinf(hi):
            lines.append(line("FR", "BND", col))
            continue
        if np.isinf(lo):
            lines.append(line("MI", "BND", col))
        elif lo != 0:
            lines.append(line("LO", "BND", col, num(lo)))
        if np.isfinite(hi):
            lines.append(line("UP", "BND", col, num(hi)))
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mps(path) -> LpProblem:
    """Read a file produced by :func:`write_mps` (``L`` rows only)."""
    rows: dict[str, int] = {}
    cols: dict[str, int] = {}
    cost: dict[int, float] = {}
    data, ri, ci = [], [], []
    rhs: dict[int, float] = {}
    bounds: dict[int, list[float]] = {}
    section = None
    obj = None
    with open(path) as fh:
        for raw in fh:
            if not raw.strip():
                continue
            if not raw.startswith(" "):
                section = raw.split()[0]
                continue
            tok = raw.split()
            if section == "ROWS":
                kind, rname = tok
                if kind == "N":
                    obj = rname
                else:
                    rows[rname] = len(rows)
            elif section == "COLUMNS":
                col = tok[0]
                j = cols.setdefault(col, len(cols))
                for rname, val in zip(tok[1::2], tok[2::2]):
                    if rname == obj:
                        cost[j] = float(val)
                    else:
                        ri.append(rows[rname])
                        ci.append(j)
                        data.append(float(val))
            elif section == "RHS":
                for rname, val in zip(tok[1::2], tok[2::2]):
                    rhs[rows[rname]] = float(val)
            elif section == "BOUNDS":
                kind, col = tok[0], tok[2]
                b = bounds.setdefault(cols[col], [0.0, np.inf])
                val = float(tok[3]) if len(tok) > 3 else None
                if kind == "UP":
                    b[1] = val
                elif kind == "LO":
                    b[0] = val
                elif kind == "FX":
                    b[0] = b[1] = val
                elif kind == "FR":
                    b[0], b[1] = -np.inf, np.inf
                elif kind == "MI":
                    b[0] = -np.inf
    n, m = len(cols), len(rows)
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    b = np.zeros(m)
    for i, v in rhs.items():
        b[i] = v
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    for j, (l, h) in bounds.items():
        lo[j], hi[j] = l, h
    A = sp.csr_matrix((data, (ri, ci)), shape=(m, n))
    return LpProblem(c, A, b, lo, hi)
