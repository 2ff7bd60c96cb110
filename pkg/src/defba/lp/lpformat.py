"""Export to the CPLEX LP text format for cross-checking with other solvers."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .program import EQ, GE, LE, LinearProgram

_SENSE = {LE: "<=", GE: ">=", EQ: "="}
_BAD = re.compile(r"[^A-Za-z0-9_.\[\]]")


def _names(given, prefix: str, n: int) -> list[str]:
    if given is None:
        return [f"{prefix}{i}" for i in range(n)]
    out = []
    for name in given:
        name = _BAD.sub("_", str(name))
        if not name or name[0].isdigit() or name[0] in ".eE":
            name = f"{prefix}_{name}"
        out.append(name)
    return out


def _num(v: float) -> str:
    return f"{v:.17g}"


def _terms(coeffs, cols, names) -> str:
    parts = []
    for v, j in zip(coeffs, cols):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(v))} {names[j]}")
    text = " ".join(parts) if parts else "0 " + names[0]
    return text[2:] if text.startswith("+ ") else text


def _wrap(text: str, width: int = 240) -> str:
    # LP readers limit line length, so break long rows between terms
    lines, line = [], ""
    for tok in text.split(" "):
        if len(line) + len(tok) + 1 > width:
            lines.append(line)
            line = "   "
        line = f"{line} {tok}" if line.strip() else f"{line}{tok}"
    lines.append(line)
    return "\n".join(lines)


def to_lp_text(lp: LinearProgram) -> str:
    var = _names(lp.var_names, "x", lp.n_vars)
    row = _names(lp.row_names, "c", lp.n_rows)
    out = ["\\ written by defba", "Maximize"]
    nz = np.flatnonzero(lp.objective)
    obj = _terms(lp.objective[nz], nz, var) if nz.size else f"0 {var[0]}" if var else "0"
    if lp.objective_offset:
        obj += f" + {_num(lp.objective_offset)} constant"
    out.append(_wrap(f" obj: {obj}"))
    out.append("Subject To")
    A = lp.A.tocsr()
    seen: dict[str, int] = {}
    for i in range(lp.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        name = row[i]
        if name in seen:
            seen[name] += 1
            name = f"{name}_{seen[name]}"
        else:
            seen[name] = 0
        body = _terms(A.data[lo:hi], A.indices[lo:hi], var)
        out.append(_wrap(f" {name}: {body} {_SENSE[lp.senses[i]]} {_num(lp.rhs[i])}"))
    out.append("Bounds")
    for j in range(lp.n_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo == hi:
            out.append(f" {var[j]} = {_num(lo)}")
        elif np.isneginf(lo) and np.isposinf(hi):
            out.append(f" {var[j]} free")
        else:
            lo_s = "-inf" if np.isneginf(lo) else _num(lo)
            hi_s = "+inf" if np.isposinf(hi) else _num(hi)
            out.append(f" {lo_s} <= {var[j]} <= {hi_s}")
    if lp.objective_offset:
        out.append(" constant = 1")
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(lp: LinearProgram, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(to_lp_text(lp), encoding="ascii")
    return path
