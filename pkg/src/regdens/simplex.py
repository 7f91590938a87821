"""Dense tableau simplex for the distance LPs.

Problems here are small (a few hundred variables) and dense, so a plain
tableau with Dantzig pricing is fast enough; Bland's rule kicks in after a
run of degenerate pivots to guarantee termination.  Only the form needed by
the distance duals is supported: maximize c.x subject to A x <= b, x >= 0,
with b >= 0 so the slack basis is feasible from the start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SimplexResult", "SimplexError", "simplex_max", "dump_tableau"]

_PIV_FLOOR = 1e-11
_DEGENERATE_SWITCH = 40


class SimplexError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimplexResult:
    value: float
    x: np.ndarray
    n_iter: int


def simplex_max(c, A, b, max_iter: int | None = None, tol: float = 1e-9) -> SimplexResult:
    """Maximize c.x s.t. A x <= b, x >= 0 (requires b >= 0)."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    m, n = A.shape
    if c.size != n or b.size != m:
        raise ValueError("shape mismatch")
    if np.min(b) < -1e-12:
        raise SimplexError("b must be nonnegative (slack basis start)")
    b = np.maximum(b, 0.0)
    if max_iter is None:
        max_iter = 200 * (m + n)

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = np.arange(n, n + m)

    bland = False
    degenerate_run = 0
    it = 0
    for it in range(1, max_iter + 1):
        red = T[m, :-1]
        if bland:
            neg = np.nonzero(red < -tol)[0]
            if neg.size == 0:
                break
            j = int(neg[0])
        else:
            j = int(np.argmin(red))
            if red[j] >= -tol:
                break
        col = T[:m, j]
        mask = col > _PIV_FLOOR
        if not np.any(mask):
            raise SimplexError("unbounded LP (should be impossible here)")
        rhs = np.maximum(T[:m, -1], 0.0)  # roundoff can push basics to -1e-15
        ratios = np.full(m, np.inf)
        ratios[mask] = rhs[mask] / col[mask]
        rmin = float(np.min(ratios))
        ties = np.nonzero(ratios <= rmin + 1e-12 * (1.0 + rmin))[0]
        # smallest basis label among ties (Bland-compatible, anti-cycling)
        i = int(ties[np.argmin(basis[ties])])
        if rmin <= 1e-11:
            degenerate_run += 1
            if degenerate_run > _DEGENERATE_SWITCH:
                bland = True
        else:
            # strict progress: no basis can ever repeat, so it is safe to
            # drop back to Dantzig pricing instead of crawling under Bland
            degenerate_run = 0
            bland = False
        piv = T[i, j]
        T[i] /= piv
        colv = T[:, j].copy()
        colv[i] = 0.0
        T -= np.outer(colv, T[i])
        T[:, j] = 0.0
        T[i, j] = 1.0
        basis[i] = j
    else:
        raise SimplexError(f"no convergence in {max_iter} pivots")

    x = np.zeros(n + m)
    x[basis] = T[:m, -1]
    return SimplexResult(value=float(T[m, -1]), x=x[:n], n_iter=it)


def dump_tableau(c, A, b) -> str:
    """Plain-text dump of the LP (objective row, then constraint rows)."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    lines = ["max " + " ".join(f"{v:+.6g}" for v in c)]
    for row, rhs in zip(A, b):
        lines.append(" ".join(f"{v:+.6g}" for v in row) + f" <= {rhs:+.6g}")
    return "\n".join(lines) + "\n"
