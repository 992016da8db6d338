"""Closed-form resource counts and scaling arithmetic.

All circuit counts are exact Python integers; floats only appear in the
timing quantities.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class ResourceEstimate:
    n: int
    d: int
    L: int
    circuit_qubits: int
    main_1q: int
    main_2q: int
    sp_1q: int
    sp_2q: int
    circuits_per_iter: int

    def gate_columns(self) -> tuple[str, str]:
        return f"{self.main_1q}+{self.sp_1q:,}", f"{self.main_2q}+{self.sp_2q:,}"

    def to_json(self) -> dict:
        return asdict(self)


def _positive(**values: int):
    for name, v in values.items():
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")


def circuits_per_iteration(n: int, L: int) -> int:
    """2(n+1)L²: one Re and one Im Hadamard test per (l, k, j) with j over n
    local projectors plus the denominator."""
    _positive(n=n, L=L)
    return 2 * (n + 1) * L * L


def estimate(n: int, d: int, L: int) -> ResourceEstimate:
    _positive(n=n, d=d, L=L)
    return ResourceEstimate(
        n=n, d=d, L=L,
        circuit_qubits=n + 1,
        # 3nd ansatz rotations, n controlled Paulis, two ancilla Hadamards
        main_1q=(3 * d + 1) * n + 2,
        # nd entanglers plus n controlled Pauli interactions
        main_2q=(d + 1) * n,
        sp_1q=2 ** (n + 1) - 2,
        sp_2q=2 ** n - 2,
        circuits_per_iter=circuits_per_iteration(n, L),
    )


def worst_case(n: int, d: int | None = None) -> ResourceEstimate:
    """Dense matrix: every one of the 4^n Pauli strings survives."""
    return estimate(n, n if d is None else d, 4 ** n)


def scientific(value: int | float, digits: int = 2) -> str:
    """``6.4×10^1`` style rendering with ``digits`` significant figures."""
    if value == 0:
        return "0"
    exp = len(str(abs(int(value)))) - 1 if isinstance(value, int) else math.floor(math.log10(abs(value)))
    mant = round(value / 10 ** exp, digits - 1)
    if abs(mant) >= 10:
        mant /= 10
        exp += 1
    return f"{mant:.{digits - 1}f}×10^{exp}"


def format_table(rows: Iterable[ResourceEstimate]) -> str:
    header = ("n", "matrix", "L", "qubits", "1q (main+SP)", "2q (main+SP)", "circuits/iter")
    lines = []
    for r in rows:
        one, two = r.gate_columns()
        dim = 1 << r.n
        lines.append((str(r.n), f"{dim}x{dim}", f"{r.L:,}", str(r.circuit_qubits), one, two,
                      scientific(r.circuits_per_iter)))
    widths = [max(len(h), *(len(l[i]) for l in lines)) if lines else len(h) for i, h in enumerate(header)]
    out = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    out += ["  ".join(c.rjust(w) for c, w in zip(l, widths)) for l in lines]
    return "\n".join(out)


# -- scaling -------------------------------------------------------------------

def normalized_time(t_actual: float, n_actual: float, n_ideal: float) -> float:
    """Wall time rescaled to what a saturated allocation would have taken."""
    if n_ideal <= 0:
        raise ValueError("N_ideal must be positive")
    return t_actual * n_actual / n_ideal


@dataclass(frozen=True)
class ScalingRow:
    label: str
    circuits: int
    units: int
    circuits_per_unit: float
    rho: float
    t_actual: float
    t_norm: float

    def to_json(self) -> dict:
        return asdict(self)


def weak_scaling_rows(entries: Sequence[tuple[str, int, int, float]], baseline_index: int) -> list[ScalingRow]:
    """``entries`` are (label, circuits, units, t_actual).

    ρ compares each row's per-unit load to the baseline's; the ideal unit
    count is circuits / baseline-per-unit, which is fractional for small loads.
    """
    if not entries:
        raise ValueError("no rows")
    if not 0 <= baseline_index < len(entries):
        raise IndexError(f"baseline index {baseline_index} out of range")
    _, base_circ, base_units, _ = entries[baseline_index]
    base_per_unit = base_circ / base_units
    rows = []
    for label, circuits, units, t in entries:
        per_unit = circuits / units
        n_ideal = circuits / base_per_unit
        rows.append(ScalingRow(label, circuits, units, per_unit, per_unit / base_per_unit, t,
                               normalized_time(t, units, n_ideal)))
    return rows


@dataclass(frozen=True)
class ReportRow:
    label: str
    units: int
    t: float
    speedup: float
    strong_efficiency: float
    weak_efficiency: float


def scaling_report(rows: Sequence[tuple[str, int, float]], baseline_index: int = 0) -> list[ReportRow]:
    """Speedup and efficiencies of measured (label, N, t) rows against one baseline."""
    if not rows:
        raise ValueError("no rows")
    if not 0 <= baseline_index < len(rows):
        raise IndexError(f"baseline index {baseline_index} out of range")
    _, n0, t0 = rows[baseline_index]
    out = []
    for label, n, t in rows:
        if t <= 0 or t0 <= 0:
            raise ValueError(f"row {label!r}: timings must be positive")
        out.append(ReportRow(label, n, t, t0 / t, t0 * n0 / (t * n), t0 / t))
    return out


def efficiency(t_base: float, t: float) -> float:
    """Weak-scaling efficiency at constant per-unit load."""
    if t <= 0 or t_base <= 0:
        raise ValueError("timings must be positive")
    return t_base / t


def read_scaling_csv(fh) -> list[tuple[str, int, float]]:
    """Rows of ``label,N,t`` (header optional)."""
    rows = []
    for lineno, rec in enumerate(csv.reader(fh), 1):
        if not rec or not "".join(rec).strip():
            continue
        if len(rec) != 3:
            raise ValueError(f"line {lineno}: expected 3 fields label,N,t, got {len(rec)}")
        label, n, t = (f.strip() for f in rec)
        try:
            rows.append((label, int(n), float(t)))
        except ValueError:
            if lineno == 1:
                continue  # header
            raise ValueError(f"line {lineno}: N must be an integer and t a number") from None
    return rows
