"""Rendering of ranked allocations and summaries as fixed-width tables or CSV."""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

from .errors import SWDError
from .geometry import format_canonical
from .search import RankedAllocation

COLUMNS = ("rank", "allocation", "V", "V_exact", "distance", "efficiency", "imbalance",
           "NP", "CK", "PtAP", "h1_b_ztP", "-h2_b2", "-W(1-beta)a")
SCATTER_AXES = ("distance", "imbalance")


class EmptyResultError(SWDError):
    pass


def _vec(v: Iterable[float]) -> str:
    return "(" + ",".join(f"{x:.4g}" for x in v) + ")"


def _row(rank: int, r: RankedAllocation, N: int, C: int) -> list[str]:
    t = r.terms
    return [
        str(rank),
        format_canonical(r.canonical),
        f"{r.v_approx:.6f}",
        "" if r.v_exact is None else f"{r.v_exact:.6f}",
        f"{r.distance:.6f}",
        f"{r.efficiency:.6f}",
        f"{r.imbalance:.3f}",
        _vec(N * r.P),
        _vec(C * r.K),
        f"{t.quadratic:.6f}",
        f"{t.linear:.6f}",
        f"{t.b_penalty:.6f}",
        f"{t.a_gain:.6f}",
    ]


def _csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _table(header: Sequence[str], rows: list[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).rjust(w) for x, w in zip(line, widths)) for line in [header, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def emit_report(results: Sequence[RankedAllocation], output: str = "table", *,
                N: int, C: int, top_k: int | None = None) -> str:
    """Rank-ordered rows: allocation, V, distance, N*P, C*K and the four terms of V."""
    if not results:
        raise EmptyResultError("no allocations to report")
    chosen = list(results)[: top_k or None]
    rows = [_row(i, r, N, C) for i, r in enumerate(chosen, start=1)]
    if output == "csv":
        return _csv(COLUMNS, rows)
    return _table(COLUMNS, rows)


def emit_scatter(results: Sequence[RankedAllocation], axis: str) -> str:
    """Two-column CSV (axis, V) for distance-vs-V or imbalance-vs-V plots."""
    if axis not in SCATTER_AXES:
        raise ValueError(f"axis must be one of {SCATTER_AXES}")
    if not results:
        raise EmptyResultError("no allocations to export")
    return _csv((axis, "V"), ([f"{getattr(r, axis):.9g}", f"{r.v_approx:.9g}"] for r in results))


def emit_mapping(items: Sequence[tuple[str, object]], output: str = "table") -> str:
    """Key/value summary, e.g. the moment approximations or an analysis."""
    if not items:
        raise EmptyResultError("nothing to report")
    rows = [[k, _fmt(v)] for k, v in items]
    if output == "csv":
        return _csv(("quantity", "value"), rows)
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


def _fmt(v: object) -> str:
    if isinstance(v, float):
        return f"{v:.7g}"
    if hasattr(v, "__len__") and not isinstance(v, str):
        return "(" + ", ".join(_fmt(x) if x is not None else "-" for x in v) + ")"
    return str(v)
