"""Refinement ladders for the left side and their observed orders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence


from ..errors import ParameterError
from ..model import LineDiscretization, ModelSpec
from ..trace_formula import TraceReport, homological_index_lhs, rhs_integral

ORDER_TARGET = 2.0
ORDER_SLACK = 0.5


@dataclass
class ConvergenceTable:
    reference: float
    n_rows: list[TraceReport] = field(default_factory=list)
    t_rows: list[TraceReport] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    orders: list[float] = field(default_factory=list)
    richardson_orders: list[float] = field(default_factory=list)
    tail_changes: list[float] = field(default_factory=list)
    exact: bool = False

    @property
    def grid_order(self) -> float | None:
        """Order from the two finest levels; None when every value is exact."""
        if self.exact or not self.orders:
            return None
        return self.orders[-1]

    @property
    def flagged(self) -> bool:
        order = self.grid_order
        return order is not None and abs(order - ORDER_TARGET) > ORDER_SLACK


def observed_orders(spacings: Sequence[float], errors: Sequence[float]) -> list[float]:
    """log(e_k / e_k+1) / log(h_k / h_k+1) for successive levels."""
    out = []
    for (h0, e0), (h1, e1) in zip(zip(spacings, errors), zip(spacings[1:], errors[1:])):
        if e0 == 0.0 or e1 == 0.0:
            out.append(math.nan)
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


def richardson_orders(spacings: Sequence[float], values: Sequence[float]) -> list[float]:
    """Reference-free orders from three consecutive levels (ratio of differences)."""
    out = []
    for k in range(len(values) - 2):
        d0 = values[k + 1] - values[k]
        d1 = values[k + 2] - values[k + 1]
        if d0 == 0.0 or d1 == 0.0 or d0 * d1 < 0:
            out.append(math.nan)
        else:
            out.append(math.log(d0 / d1) / math.log(spacings[k] / spacings[k + 1]))
    return out


def fixed_spacing_disc(disc: LineDiscretization, T: float) -> LineDiscretization:
    """Discretization of half-length T with (nearly) the spacing of ``disc``."""
    n = int(round(2.0 * T / disc.spacing)) - 1
    return replace(disc, T=float(T), n=n)


def convergence_table(
    spec: ModelSpec,
    m: int,
    lam: float,
    disc: LineDiscretization,
    n_values: Sequence[int] = (1024, 2048, 4096),
    t_values: Sequence[float] = (40.0, 80.0),
    reference: float | None = None,
) -> ConvergenceTable:
    """LHS along an n ladder at fixed T and along a T ladder at fixed spacing.

    Errors are measured against ``reference`` (default: the right side
    evaluated to 1e-12). The T ladder keeps the spacing of ``disc`` so the
    change between levels isolates the truncation of the line.
    """
    if len(n_values) < 2:
        raise ParameterError("the n ladder needs at least two levels")
    if reference is None:
        reference = rhs_integral(spec, m, lam, tol=1e-12).value
    table = ConvergenceTable(reference=reference)
    for n in n_values:
        table.n_rows.append(homological_index_lhs(spec, m, lam, replace(disc, n=int(n)), refine=False))
    values = [row.value for row in table.n_rows]
    spacings = [row.disc.spacing for row in table.n_rows]
    table.errors = [abs(v - reference) for v in values]
    table.exact = all(e == 0.0 for e in table.errors) and not any(values)
    if not table.exact:
        table.orders = observed_orders(spacings, table.errors)
        table.richardson_orders = richardson_orders(spacings, values)
    for T in t_values:
        table.t_rows.append(homological_index_lhs(spec, m, lam, fixed_spacing_disc(disc, T), refine=False))
    tv = [row.value for row in table.t_rows]
    table.tail_changes = [abs(b - a) for a, b in zip(tv, tv[1:])]
    return table


def format_table(table: ConvergenceTable) -> str:
    lines = [f"reference (right side) = {table.reference:.12g}", "n ladder:"]
    lines.append(f"{'n':>8} {'T':>8} {'h':>12} {'value':>20} {'|error|':>12} {'order':>8}")
    orders = [math.nan] + list(table.orders)
    for row, err, order in zip(table.n_rows, table.errors or [0.0] * len(table.n_rows), orders + [math.nan] * len(table.n_rows)):
        lines.append(
            f"{row.disc.n:>8d} {row.disc.T:>8g} {row.disc.spacing:>12.6g} {row.value:>20.14g} {err:>12.3e} {order:>8.3f}"
        )
    if table.exact:
        lines.append("all values exactly 0: order undefined, reported as exact")
    else:
        lines.append(f"grid order = {table.grid_order:.3f} (target {ORDER_TARGET} +/- {ORDER_SLACK}): "
                     + ("FLAGGED" if table.flagged else "ok"))
        if table.richardson_orders:
            lines.append("reference-free orders: " + ", ".join(f"{p:.3f}" for p in table.richardson_orders))
    lines.append("T ladder (fixed spacing):")
    for row in table.t_rows:
        lines.append(f"{row.disc.n:>8d} {row.disc.T:>8g} {row.disc.spacing:>12.6g} {row.value:>20.14g}")
    for (a, b), change in zip(zip(table.t_rows, table.t_rows[1:]), table.tail_changes):
        lines.append(f"change T={a.disc.T:g} -> T={b.disc.T:g}: {change:.3e}")
    return "\n".join(lines)
