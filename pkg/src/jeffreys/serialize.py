"""Round-trip-safe trace and report serialization.

Numbers are written with 17 significant digits so a parsed trace is
bit-identical to the values that produced it; re-running a scenario with
the same seed therefore yields a byte-identical CSV.
"""

from __future__ import annotations

import json
from typing import IO

import numpy as np

from .protocol import RunReport, Trace

CSV_HEADER = ("n,gamma1,gamma2,gamma_sceptic,omega,"
              "loss1,loss2,loss_sceptic,cum1,cum2,cum_sceptic,gap,divergence_term")


def format_number(x) -> str:
    return "%.17g" % float(x)


def _format_move(value) -> str:
    # log-loss predictions are probability vectors: semicolon-joined
    if isinstance(value, np.ndarray):
        return ";".join(format_number(v) for v in value)
    return format_number(value)


def trace_to_csv(trace: Trace, stream: IO[str]) -> None:
    stream.write(CSV_HEADER + "\n")
    for i in range(len(trace)):
        row = (
            str(i + 1),
            _format_move(trace.gamma1[i]),
            _format_move(trace.gamma2[i]),
            _format_move(trace.gamma_sceptic[i]),
            _format_move(trace.omega[i]),
            format_number(trace.loss1[i]),
            format_number(trace.loss2[i]),
            format_number(trace.loss_sceptic[i]),
            format_number(trace.cum1[i]),
            format_number(trace.cum2[i]),
            format_number(trace.cum_sceptic[i]),
            format_number(trace.gap[i]),
            format_number(trace.divergence_term[i]),
        )
        stream.write(",".join(row) + "\n")


def trace_to_csv_string(trace: Trace) -> str:
    import io
    buf = io.StringIO()
    trace_to_csv(trace, buf)
    return buf.getvalue()


def write_trace_csv(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        trace_to_csv(trace, fh)


def write_report_json(report: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
