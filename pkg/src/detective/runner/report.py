"""Report files: ``rounds.csv``, ``selection_log.csv``, ``report.md`` and figures."""

import csv
import io
import math
from pathlib import Path

from ..errors import ParseError, UsageError
from .loop import REFERENCE_OFFICE_HOME_MEAN
from .plotting import plot_accuracy, plot_selection

SELECTION_COLUMNS = ["round", "id", "u_dom", "u_pre", "u_int", "density", "selected"]


def _num(x):
    return "nan" if isinstance(x, float) and math.isnan(x) else format(float(x), ".17g")


def rounds_rows(result):
    rows = []
    for rep in result.reports:
        row = {
            "run": result.label,
            "round": rep.round,
            "n_selected": len(rep.selected),
            "n_labeled": rep.n_labeled,
            "train_loss": rep.loss_trace[-1] if rep.loss_trace else float("nan"),
        }
        for name in result.domain_names:
            row[f"acc_{name}"] = rep.accuracy.get(name, float("nan"))
        row["acc_mean"] = rep.mean_accuracy
        row["loss_trace"] = ";".join(format(v, ".10g") for v in rep.loss_trace)
        rows.append(row)
    return rows


def _rounds_columns(domain_names):
    return (
        ["run", "round", "n_selected", "n_labeled", "train_loss"]
        + [f"acc_{n}" for n in domain_names]
        + ["acc_mean", "loss_trace"]
    )


def _csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_num(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()


def rounds_csv(results):
    names = results[0].domain_names
    rows = [row for res in results for row in rounds_rows(res)]
    return _csv_text(_rounds_columns(names), rows)


def selection_csv(result):
    rows = [
        {
            "round": rec.round,
            "id": rec.id,
            "u_dom": float(rec.u_dom),
            "u_pre": float(rec.u_pre),
            "u_int": float(rec.u_int),
            "density": float(rec.density),
            "selected": int(rec.selected),
        }
        for rec in result.selection_log
    ]
    return _csv_text(SELECTION_COLUMNS, rows)


def _pct(x):
    return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{100 * x:.2f}"


def render_markdown(runs, domain_names, notes=()):
    """Markdown summary from parsed round rows (``runs``: label -> list of row dicts)."""
    out = [
        "# Detective desk-scale report",
        "",
        f"Published full-scale reference: Office-Home mean accuracy {REFERENCE_OFFICE_HOME_MEAN:.2f}% "
        "(ResNet-50). Shown for context; desk-scale runs are not expected to match it.",
        "",
    ]
    out.extend(notes)
    if notes:
        out.append("")
    header = ["Method"] + domain_names + ["Mean"]
    out.append("## Final accuracy (%)")
    out.append("")
    out.append("| " + " | ".join(header) + " |")
    out.append("|" + "|".join(["---"] * len(header)) + "|")
    for label, rows in runs.items():
        final = rows[-1]
        cells = [label] + [_pct(final.get(f"acc_{n}")) for n in domain_names] + [_pct(final["acc_mean"])]
        out.append("| " + " | ".join(cells) + " |")
    for label, rows in runs.items():
        out += ["", f"## {label}: per round", ""]
        out.append("| Round | Labelled | Train loss | Target (%) | Mean (%) |")
        out.append("|---|---|---|---|---|")
        for r in rows:
            out.append(
                f"| {r['round']} | {r['n_labeled']} | {float(r['train_loss']):.4f} | "
                f"{_pct(r['acc_target'])} | {_pct(r['acc_mean'])} |"
            )
    return "\n".join(out) + "\n"


def _runs_from_results(results):
    runs = {}
    for res in results:
        runs[res.label] = rounds_rows(res)
    return runs


def emit_report(results, out_dir, figures=True):
    """Write all report files for one or more finished experiments into ``out_dir``.

    With several results (an ablation), ``rounds.csv`` and ``report.md``
    cover all runs and each run's ``selection_log.csv`` goes into a
    sub-directory named after the run.
    """
    if not isinstance(results, (list, tuple)):
        results = [results]
    if not results:
        raise UsageError("emit_report needs at least one result")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rounds.csv").write_text(rounds_csv(results))
    runs = _runs_from_results(results)
    notes = []
    for res in results:
        walls = sum(r.wall_time for r in res.reports)
        notes.append(
            f"- {res.label}: seed {res.config.seed}, budget {res.budget}, oracle queries {res.oracle_queries}, "
            f"wall time {walls:.1f} s"
        )
    (out / "report.md").write_text(render_markdown(runs, results[0].domain_names, notes))
    if len(results) == 1:
        (out / "selection_log.csv").write_text(selection_csv(results[0]))
    else:
        for res in results:
            sub = out / slug(res.label)
            sub.mkdir(exist_ok=True)
            (sub / "selection_log.csv").write_text(selection_csv(res))
    if figures:
        plot_accuracy(_numeric_runs(runs), out / "accuracy.png")
        if len(results) == 1:
            plot_selection(read_selection_log(out / "selection_log.csv"), out / "selection.png")


def slug(label):
    s = "".join(ch if ch.isalnum() else "_" for ch in label.strip("-")).strip("_").lower()
    return ("no_" + s) if label.startswith("-") else s


def _numeric_runs(runs):
    return {
        label: [{**r, "acc_target": float(r["acc_target"]), "acc_mean": float(r["acc_mean"])} for r in rows]
        for label, rows in runs.items()
    }


def read_rounds(path):
    path = Path(path)
    if path.is_dir():
        path = path / "rounds.csv"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for required in ("run", "round", "n_labeled", "train_loss", "acc_target", "acc_mean"):
            if required not in cols:
                raise ParseError(f"{path}: missing column {required!r}", 1)
        domain_names = [c[4:] for c in cols if c.startswith("acc_") and c != "acc_mean"]
        runs = {}
        for row in reader:
            for c in cols:
                if c.startswith("acc_") or c == "train_loss":
                    row[c] = float(row[c])
            runs.setdefault(row["run"], []).append(row)
    return runs, domain_names


def read_selection_log(path):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "round": int(row["round"]),
                    "id": int(row["id"]),
                    "u_dom": float(row["u_dom"]),
                    "u_pre": float(row["u_pre"]),
                    "u_int": float(row["u_int"]),
                    "density": float(row["density"]),
                    "selected": row["selected"] == "1",
                }
            )
    return rows


def render_from_csv(paths, out_dir, figures=True):
    """Re-create ``report.md`` (and the accuracy figure) from existing ``rounds.csv`` files."""
    runs, names = {}, None
    for p in paths:
        r, n = read_rounds(p)
        if names is not None and n != names:
            raise ParseError(f"{p}: domain columns differ from earlier inputs")
        names = n
        runs.update(r)
    if not runs:
        raise UsageError("no runs found in the given rounds.csv files")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.md").write_text(render_markdown(runs, names))
    if figures:
        plot_accuracy(runs, out / "accuracy.png")
    return runs
