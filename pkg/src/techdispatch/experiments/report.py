"""Write a MetricsReport to disk as plain, reproducible text files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path

from .metrics import MetricsReport

PER_INSTANCE_FIELDS = ("seed", "customers", "inconvenience", "delay", "leftover_days",
                       "technician_days", "returning_visits", "final_period", "divergent")


def config_hash(config: dict | None) -> str:
    blob = json.dumps(config or {}, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def summary_dict(report: MetricsReport, config: dict | None = None) -> dict:
    def stat(s):
        return {"mean": s.mean, "se": s.se}

    return {
        "policy": report.policy,
        "config_hash": config_hash(config),
        "config": config or {},
        "seeds": [row["seed"] for row in report.per_instance],
        "n_instances": report.n_instances,
        "inconvenience": stat(report.inconvenience),
        "delay": stat(report.delay),
        "leftover_days": stat(report.leftover_days),
        "technician_days": stat(report.technician_days),
        "returning_visits": stat(report.returning_visits),
        "revisit_shares": {"0": report.revisit_shares[0], "1": report.revisit_shares[1],
                           "2+": report.revisit_shares[2]},
        "on_time_share": report.on_time_share,
        "completion_delta": {str(k): v for k, v in report.completion_delta.items()},
        "divergent": report.divergent,
        "failures": [{"file": f, "error": e} for f, e in report.failures],
    }


def _route_dump(report: MetricsReport, periods) -> str:
    lines = []
    wanted = set(periods)
    for r in report.results:
        for t, dec in r.routes:
            if t not in wanted:
                continue
            for w, route in sorted(dec.routes.items()):
                lines.append(f"seed={r.seed} period={t} technician={w} route=0 "
                             + " ".join(str(i) for i in route) + (" 0" if route else "0"))
    return "\n".join(lines) + ("\n" if lines else "")


def emit_report(report: MetricsReport, out_dir, config: dict | None = None,
                route_periods=(1, 2, 3)) -> list[Path]:
    """Write per-instance rows, summary, spatial grid, cumulative series and route dumps.

    Every file starts from in-memory content, so nothing is written unless the
    directory is writable.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"cannot write to {out}")
    tag = f"# policy={report.policy} config_hash={config_hash(config)}\n"
    files = {
        "per_instance.csv": tag + _csv(
            ([row[k] if not isinstance(row[k], float) else repr(row[k]) for k in PER_INSTANCE_FIELDS]
             for row in report.per_instance), PER_INSTANCE_FIELDS),
        "summary.json": json.dumps(summary_dict(report, config), indent=1, sort_keys=True) + "\n",
        "spatial_grid.csv": tag + _csv(
            ([("" if v is None else repr(v)) for v in row] for row in report.spatial_grid),
            [f"x{j}" for j in range(len(report.spatial_grid[0]))]),
        "cumulative.csv": tag + _csv(
            ([k + 1, repr(v)] for k, v in enumerate(report.cumulative)),
            ("period", "cumulative_inconvenience")),
        "routes.txt": tag + _route_dump(report, route_periods),
    }
    paths = []
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths
