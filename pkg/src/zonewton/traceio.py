"""CSV emission for run traces.

Floats are written with 17 significant digits so the file round-trips 64-bit
values exactly; columns without ground truth stay empty. Byte-identical
output for identical traces makes seeded reruns diffable.
"""

from __future__ import annotations

from .solver import RunTrace

__all__ = ["CSV_HEADER", "write_trace_csv"]

CSV_HEADER = ("iter,evals,f_value,f_gap,grad_norm_est,r_used,alpha,"
              "step_norm,x_err,hess_err_fro,up_scalars,down_scalars")

_INT_FIELDS = ("iteration", "evals", "r_used", "up_scalars", "down_scalars")
_FIELDS = ("iteration", "evals", "f_value", "f_gap", "grad_norm_est",
           "r_used", "alpha", "step_norm", "x_err", "hess_err_fro",
           "up_scalars", "down_scalars")


def _format(name: str, value) -> str:
    if value is None:
        return ""
    if name in _INT_FIELDS:
        return str(int(value))
    return f"{float(value):.17g}"


def write_trace_csv(trace: RunTrace, path) -> None:
    """Write one row per iteration record under the fixed header."""
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for record in trace.records:
            fh.write(",".join(_format(name, getattr(record, name))
                              for name in _FIELDS) + "\n")
