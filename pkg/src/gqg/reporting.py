"""Report emission: delimited output, JSON documents, and rendered figures.

Every CSV cell is written with 17 significant digits so the text layer
round-trips float64 exactly; timestamps appear only inside JSON metadata
blocks, keeping the delimited output byte-reproducible for fixed seeds.  Each
report directory also gets a small plot manifest describing the column roles
and the figures rendered next to the data.
"""

from __future__ import annotations

import datetime
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .states import DIAGNOSTICS_HEADER, DiagnosticsRecord

__all__ = [
    "write_diagnostics_csv",
    "read_diagnostics_csv",
    "write_sweep_report",
    "write_linear_report",
    "write_qg_report",
    "write_simulation_report",
]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: Path, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, doc: dict, timestamp: bool = True):
    doc = dict(doc)
    if timestamp:
        meta = dict(doc.get("metadata", {}))
        meta["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        doc["metadata"] = meta
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _write_manifest(out: Path, csv_name: str, figures, columns: dict):
    manifest = {"csv": csv_name, "figures": figures, "columns": columns}
    _write_json(out / "plot_manifest.json", manifest, timestamp=False)


def write_diagnostics_csv(records, path) -> None:
    lines = [DIAGNOSTICS_HEADER]
    lines.extend(rec.csv_row() for rec in records)
    Path(path).write_text("\n".join(lines) + "\n")


def read_diagnostics_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    if lines[0] != DIAGNOSTICS_HEADER:
        raise ValueError(f"unexpected diagnostics header: {lines[0]!r}")
    return [DiagnosticsRecord.from_csv_row(line) for line in lines[1:]]


def write_simulation_report(result, config, out_dir) -> None:
    """Diagnostics CSV, run summary JSON, manifest, and time-series figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_diagnostics_csv(result.records, out / "diagnostics.csv")
    summary = {
        "kind": "simulation",
        "sup_E_frak": result.sup_E,
        "dt": result.dt,
        "n_steps": result.n_steps,
        "final_time": result.records[-1].t,
        "metadata": {"config": config.resolved()},
    }
    _write_json(out / "run_summary.json", summary)

    t = [r.t for r in result.records]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(t, [r.E_frak for r in result.records], label="energy functional")
    axes[0].plot(t, [r.l2_energy for r in result.records], label="L2 energy")
    axes[0].set_xlabel("t")
    axes[0].legend()
    axes[0].set_title("energies")
    for key in ("div_residual", "bc_residual", "mean_residual", "compat_residual"):
        axes[1].semilogy(
            t, [max(getattr(r, key), 1e-300) for r in result.records], label=key
        )
    axes[1].set_xlabel("t")
    axes[1].legend(fontsize=8)
    axes[1].set_title("constraint residuals")
    fig.tight_layout()
    fig.savefig(out / "diagnostics.png", dpi=130)
    plt.close(fig)

    _write_manifest(
        out,
        "diagnostics.csv",
        ["diagnostics.png"],
        {
            "t": {"role": "time"},
            "E_frak": {"role": "energy", "definition": "H2 of (pv, imbalance) + horizontal tower"},
            "l2_energy": {"role": "energy", "definition": "squared L2 norm of (v, w, theta)"},
            "h3_norm": {"role": "norm"},
            "div_residual": {"role": "residual"},
            "bc_residual": {"role": "residual"},
            "mean_residual": {"role": "residual"},
            "compat_residual": {"role": "residual"},
        },
    )


def write_sweep_report(report: dict, out_dir) -> None:
    """SweepReport CSV + JSON + manifest + log-log error figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    columns = report["columns"]
    _write_csv(out / "sweep_report.csv", columns, report["rows"])
    _write_json(out / "sweep_report.json", report)

    eps = [row["eps"] for row in report["rows"]]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for col in columns:
        if col.startswith("err_"):
            ax.loglog(eps, [max(row[col], 1e-300) for row in report["rows"]], "o-", label=col)
    ax.loglog(eps, eps, "k--", alpha=0.4, label="slope 1")
    ax.set_xlabel("eps")
    ax.set_ylabel("error vs limit system")
    ax.legend(fontsize=8)
    ax.set_title("convergence to the limit system")
    fig.tight_layout()
    fig.savefig(out / "sweep_errors.png", dpi=130)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(eps, [row["sup_E_frak"] for row in report["rows"]], "s-")
    ax.set_xlabel("eps")
    ax.set_ylabel("sup_t energy functional")
    ax.set_title(f"uniform boundedness (max/min = {report['uniform_bound_ratio']:.3f})")
    fig.tight_layout()
    fig.savefig(out / "sweep_energy.png", dpi=130)
    plt.close(fig)

    roles = {"eps": {"role": "parameter", "scale": "log"}}
    for col in columns:
        if col.startswith("err_"):
            roles[col] = {"role": "error", "scale": "log"}
    roles["sup_E_frak"] = {"role": "energy_bound"}
    _write_manifest(out, "sweep_report.csv", ["sweep_errors.png", "sweep_energy.png"], roles)


def write_linear_report(report: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    columns = ["t", "phi_drift", "psi_drift"]
    _write_csv(out / "linear_check.csv", columns, report["checkpoints"])
    _write_json(out / "linear_check.json", report)

    t = [c["t"] for c in report["checkpoints"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(t, [max(c["phi_drift"], 1e-300) for c in report["checkpoints"]], "o-",
                label="pv drift")
    ax.semilogy(t, [max(c["psi_drift"], 1e-300) for c in report["checkpoints"]], "s-",
                label="filtered imbalance drift")
    ax.set_xlabel("t")
    ax.set_ylabel("max drift")
    ax.legend()
    ax.set_title("linear regime: slow constancy and filtered-fast constancy")
    fig.tight_layout()
    fig.savefig(out / "linear_check.png", dpi=130)
    plt.close(fig)

    _write_manifest(
        out,
        "linear_check.csv",
        ["linear_check.png"],
        {"t": {"role": "time"}, "phi_drift": {"role": "drift", "scale": "log"},
         "psi_drift": {"role": "drift", "scale": "log"}},
    )


def write_qg_report(report: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    columns = report["columns"]
    _write_csv(out / "qg_compare.csv", columns, report["rows"])
    _write_json(out / "qg_compare.json", report)

    eps = [row["eps"] for row in report["rows"]]
    err = [max(row["err_phi_H1"], 1e-300) for row in report["rows"]]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(eps, err, "o-", label="pv error vs classical transport")
    ref = [err[0] * (e / eps[0]) for e in eps]
    ax.loglog(eps, ref, "k--", alpha=0.4, label="slope 1")
    order = report.get("phi_error_order")
    title = "balanced regime convergence"
    if order is not None:
        title += f" (fitted order {order:.2f})"
    ax.set_xlabel("eps")
    ax.set_ylabel("H1 error at t_end")
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out / "qg_compare.png", dpi=130)
    plt.close(fig)

    roles = {c: {"role": "error", "scale": "log"} for c in columns if c != "eps"}
    roles["eps"] = {"role": "parameter", "scale": "log"}
    roles["sup_E_frak"] = {"role": "energy_bound"}
    _write_manifest(out, "qg_compare.csv", ["qg_compare.png"], roles)
