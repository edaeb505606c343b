"""Render convergence figures from sweep CSVs and their manifests.

Input contract (produced by the sweep tool): a CSV with columns exactly

    eps,mean_u,var_u,ci_halfwidth,ks_distance,ks_pvalue,exp_moment_diag,runtime_s

plus an optional JSONL manifest `<name>.manifest.json` (last entry wins) and
an optional raw-samples file `<name>_samples.csv` with columns eps,kind,value.
Everything rendered is a pure function of those bytes: rerunning on identical
inputs writes identical images.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CSV_COLUMNS = ("eps", "mean_u", "var_u", "ci_halfwidth",
               "ks_distance", "ks_pvalue", "exp_moment_diag", "runtime_s")
_PNG_META = {"Software": "homogmc-report"}


class ReportError(Exception):
    """Unreadable or inconsistent report input."""


class SchemaError(ReportError):
    """CSV header does not match the sweep schema."""


@dataclass
class SweepData:
    name: str
    csv_path: str
    columns: dict[str, np.ndarray]
    manifest: dict | None = None
    samples: dict[float, dict[str, np.ndarray]] = field(default_factory=dict)

    @property
    def eps(self) -> np.ndarray:
        return self.columns["eps"]

    @property
    def n_rows(self) -> int:
        return len(self.eps)


def _parse_float(token: str, path: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ReportError(f"{path}:{lineno}: not a number: {token!r}") from None


def load_sweep(csv_path: str) -> SweepData:
    """Load one sweep CSV plus its manifest/samples siblings."""
    try:
        with open(csv_path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ReportError(f"{csv_path}: cannot read: {exc.strerror}") from exc
    if not lines:
        raise SchemaError(f"{csv_path}: empty file, expected the sweep header")
    header = tuple(lines[0].split(","))
    if header != CSV_COLUMNS:
        raise SchemaError(
            f"{csv_path}: header {','.join(header)!r} does not match the sweep schema"
        )
    cols: dict[str, list[float]] = {c: [] for c in CSV_COLUMNS}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise SchemaError(f"{csv_path}:{ln}: expected {len(CSV_COLUMNS)} fields")
        for c, tok in zip(CSV_COLUMNS, parts):
            cols[c].append(_parse_float(tok, csv_path, ln))
    data = SweepData(
        name=os.path.splitext(os.path.basename(csv_path))[0],
        csv_path=csv_path,
        columns={c: np.asarray(v, dtype=float) for c, v in cols.items()},
    )
    stem = os.path.splitext(csv_path)[0]
    manifest_path = stem + ".manifest.json"
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            entries = [json.loads(line) for line in fh if line.strip()]
        if entries:
            data.manifest = entries[-1]
    samples_path = stem + "_samples.csv"
    if os.path.exists(samples_path):
        data.samples = _load_samples(samples_path)
    return data


def _load_samples(path: str) -> dict[float, dict[str, np.ndarray]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "eps,kind,value":
        raise SchemaError(f"{path}: expected header 'eps,kind,value'")
    acc: dict[float, dict[str, list[float]]] = {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        eps_s, kind, val_s = line.split(",")
        if kind not in ("sim", "limit"):
            raise SchemaError(f"{path}:{ln}: unknown sample kind {kind!r}")
        eps = _parse_float(eps_s, path, ln)
        acc.setdefault(eps, {}).setdefault(kind, []).append(_parse_float(val_s, path, ln))
    return {e: {k: np.asarray(v) for k, v in kinds.items()} for e, kinds in acc.items()}


# ---------------------------------------------------------------------------
# trend badges, recomputed from the CSV values


def _strictly_decreasing(v: np.ndarray) -> bool:
    return bool(np.all(np.diff(v) < 0))


def ks_critical_value(level: float, n: int) -> float:
    return math.sqrt(-math.log(level / 2.0) / 2.0) * math.sqrt(2.0 / n)


def compute_badges(data: SweepData) -> dict[str, str]:
    """PASS/FAIL/n-a badges mirroring the sweep suite's trend tests."""
    badges: dict[str, str] = {}
    if data.n_rows >= 2:
        badges["variance collapse"] = "PASS" if _strictly_decreasing(data.columns["var_u"]) else "FAIL"
    else:
        badges["variance collapse"] = "n/a (need >= 2 rows)"
    ks = data.columns["ks_distance"]
    if data.n_rows >= 2 and not np.isnan(ks).any():
        ok = _strictly_decreasing(ks)
        detail = ""
        if data.manifest and "config" in data.manifest:
            n = int(data.manifest["config"].get("n_fields", 0))
            if n:
                crit = ks_critical_value(0.01, n)
                ok = ok and ks[-1] < crit
                detail = f" (final {ks[-1]:.4f} vs crit {crit:.4f})"
        badges["ks trend"] = ("PASS" if ok else "FAIL") + detail
    else:
        badges["ks trend"] = "n/a"
    if data.manifest and data.manifest.get("targets") and data.n_rows:
        mean = data.columns["mean_u"]
        errs = {}
        for side in ("one", "two"):
            key = f"limit_{side}_sided"
            if key in data.manifest["targets"]:
                tgt = data.manifest["targets"][key]
                errs[side] = abs(mean[-1] - tgt) / abs(tgt)
        if errs:
            best = min(errs, key=errs.get)
            badges["limit match"] = (
                f"{'PASS' if errs[best] < 0.10 else 'FAIL'} "
                f"(best {best}-sided, final rel err {errs[best]:.4f})"
            )
    return badges


# ---------------------------------------------------------------------------
# figures


def _new_axes(title: str):
    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=120)
    ax.set_title(title, fontsize=10)
    ax.set_xlabel("eps")
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, out_dir: str, fname: str) -> str:
    path = os.path.join(out_dir, fname)
    fig.savefig(path, metadata=_PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def _mean_figure(data: SweepData, out_dir: str) -> str:
    fig, ax = _new_axes(f"{data.name}: mean of u vs eps")
    ax.set_xscale("log")
    ax.errorbar(data.eps, data.columns["mean_u"], yerr=data.columns["ci_halfwidth"],
                fmt="o-", capsize=3, label="mean_u")
    if data.manifest and data.manifest.get("targets"):
        styles = {"limit_one_sided": ("--", "one-sided limit"),
                  "limit_two_sided": (":", "two-sided limit")}
        for key, (ls, label) in styles.items():
            if key in data.manifest["targets"]:
                ax.axhline(data.manifest["targets"][key], ls=ls, color="k", lw=1, label=label)
    ax.invert_xaxis()
    ax.set_ylabel("mean_u")
    ax.legend(fontsize=8)
    return _save(fig, out_dir, f"{data.name}_mean.png")


def _variance_figure(data: SweepData, badges: dict[str, str], out_dir: str) -> str:
    fig, ax = _new_axes(f"{data.name}: variance across media")
    ax.set_xscale("log")
    if np.all(data.columns["var_u"] > 0):
        ax.set_yscale("log")
    ax.plot(data.eps, data.columns["var_u"], "s-")
    ax.invert_xaxis()
    ax.set_ylabel("var_u")
    if data.n_rows >= 2:
        ax.annotate(f"monotone decrease: {badges['variance collapse']}",
                    xy=(0.03, 0.05), xycoords="axes fraction", fontsize=8)
    return _save(fig, out_dir, f"{data.name}_variance.png")


def _ks_figure(data: SweepData, badges: dict[str, str], out_dir: str) -> str | None:
    ks = data.columns["ks_distance"]
    if np.isnan(ks).all():
        return None
    fig, ax = _new_axes(f"{data.name}: KS distance to the limit law")
    ax.set_xscale("log")
    ax.plot(data.eps, ks, "d-")
    if data.manifest and "config" in data.manifest:
        n = int(data.manifest["config"].get("n_fields", 0))
        if n:
            ax.axhline(ks_critical_value(0.01, n), ls="--", color="r", lw=1,
                       label="1% critical value")
            ax.legend(fontsize=8)
    ax.invert_xaxis()
    ax.set_ylabel("KS distance")
    if data.n_rows >= 2:
        ax.annotate(f"trend: {badges.get('ks trend', 'n/a')}",
                    xy=(0.03, 0.05), xycoords="axes fraction", fontsize=8)
    return _save(fig, out_dir, f"{data.name}_ks.png")


def _hist_figures(data: SweepData, out_dir: str) -> list[str]:
    out = []
    for eps in sorted(data.samples, reverse=True):
        kinds = data.samples[eps]
        if "sim" not in kinds or "limit" not in kinds:
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=120)
        ax.set_title(f"{data.name}: u samples vs limit law, eps={eps:g}", fontsize=10)
        lo = min(kinds["sim"].min(), kinds["limit"].min())
        hi = max(kinds["sim"].max(), kinds["limit"].max())
        bins = np.linspace(lo, hi, 31)
        ax.hist(kinds["sim"], bins=bins, alpha=0.55, density=True, label="u_eps")
        ax.hist(kinds["limit"], bins=bins, alpha=0.55, density=True, label="limit")
        ax.set_xlabel("u")
        ax.legend(fontsize=8)
        out.append(_save(fig, out_dir, f"{data.name}_hist_eps{eps:g}.png"))
    return out


def make_report(csv_paths, out_dir: str) -> dict:
    """Render all figures plus an index page; returns a summary dict with
    per-run figures, badges, and warnings."""
    os.makedirs(out_dir, exist_ok=True)
    summary = {"runs": [], "warnings": []}
    for csv_path in sorted(csv_paths):
        data = load_sweep(csv_path)
        if data.n_rows == 0:
            summary["warnings"].append(f"{csv_path}: no rows, skipped")
            continue
        badges = compute_badges(data)
        figures = [_mean_figure(data, out_dir), _variance_figure(data, badges, out_dir)]
        ks_fig = _ks_figure(data, badges, out_dir)
        if ks_fig:
            figures.append(ks_fig)
        figures.extend(_hist_figures(data, out_dir))
        summary["runs"].append({"name": data.name, "badges": badges,
                                "figures": [os.path.basename(f) for f in figures]})
    _write_index(summary, out_dir)
    return summary


def _write_index(summary: dict, out_dir: str) -> str:
    parts = ["<!doctype html>", "<html><head><meta charset='utf-8'>",
             "<title>homogmc report</title></head><body>",
             "<h1>Sweep convergence report</h1>"]
    if not summary["runs"]:
        parts.append("<p>No sweeps with data were found.</p>")
    for run in summary["runs"]:
        parts.append(f"<h2>{run['name']}</h2><ul>")
        for key, val in run["badges"].items():
            parts.append(f"<li>{key}: <b>{val}</b></li>")
        parts.append("</ul>")
        for f in run["figures"]:
            parts.append(f"<img src='{f}' alt='{f}' style='margin:4px'>")
    for w in summary["warnings"]:
        parts.append(f"<p><i>warning: {w}</i></p>")
    parts.append("</body></html>")
    path = os.path.join(out_dir, "index.html")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
    return path
