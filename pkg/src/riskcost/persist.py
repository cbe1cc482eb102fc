"""Flat-file outputs: JSONL decision logs, plot-ready CSVs and calibration-map documents."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from .calibration import CalibrationMap, IsotonicMap, PlattParams, ReliabilityDiagram
from .domain import Action, Label, LossRecord
from .riskmetrics import CostCurve, LossSample, cvar_contributions
from .simulator import Trace

TRACE_COLUMNS = ("step", "action", "loss", "epsilon", "p")
SUMMARY_COLUMNS = ("replication", "total_loss", "far", "frr", "chr", "cvar_contribution")


def _risks_doc(risks) -> Dict[str, float]:
    return {"accept": risks.accept, "reject": risks.reject, "challenge": risks.challenge}


def decision_log_lines(trace: Trace) -> List[str]:
    lines = []
    eps = 0.0
    for event, decision, record in trace.rows:
        eps += record.leakage_spent
        doc = {
            "t": event.step,
            "event_id": event.event_id,
            "raw_score": event.raw_score,
            "p": decision.p,
            "action": decision.action.name,
            "risks": _risks_doc(decision.risks),
            "voi": decision.voi,
            "explored": decision.explored,
            "label": event.truth.value if event.truth is not None else None,
            "challenge_passed": trace.challenge_outcomes.get(event.event_id),
            "loss": record.realized_loss,
            "leakage": record.leakage_spent,
            "epsilon": eps,
        }
        lines.append(json.dumps(doc, sort_keys=True))
    return lines


def write_trace(trace: Trace, path) -> Path:
    path = Path(path)
    header = json.dumps({"fingerprint": trace.fingerprint, "replication": trace.replication,
                         "seed": trace.seed}, sort_keys=True)
    path.write_text("\n".join([header, *decision_log_lines(trace)]) + "\n")
    return path


def read_trace(path) -> Dict:
    """Parse a JSONL trace into ``{"header": ..., "steps": [...]}``."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty trace file")
    return {"header": json.loads(lines[0]), "steps": [json.loads(l) for l in lines[1:] if l.strip()]}


def records_from_steps(steps: Sequence[Dict]) -> List[LossRecord]:
    return [LossRecord(s["event_id"], Action[s["action"]], s["loss"], s["leakage"]) for s in steps]


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_metrics(traces: Sequence[Trace], out_dir, alpha: float = 0.99) -> List[Path]:
    """Per-replication step CSVs plus ``summary.csv``.

    ``cvar_contribution`` splits the CVaR of replication loss totals across
    replications; the column sums to that CVaR.
    """
    if not traces:
        raise ValueError("write_metrics needs at least one trace")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for trace in traces:
        eps = trace.epsilon_path()
        rows = [(ev.step, dec.action.name, rec.realized_loss, e, dec.p)
                for (ev, dec, rec), e in zip(trace.rows, eps)]
        path = out / f"trace_{trace.replication:03d}.csv"
        path.write_text(_csv_text(TRACE_COLUMNS, rows))
        written.append(path)
    totals = [t.summary.total_loss for t in traces]
    contrib = cvar_contributions(LossSample(totals), alpha)
    summary_rows = [
        (t.replication, t.summary.total_loss, t.summary.rates.far, t.summary.rates.frr,
         t.summary.rates.chr, float(c))
        for t, c in zip(traces, contrib)
    ]
    path = out / "summary.csv"
    path.write_text(_csv_text(SUMMARY_COLUMNS, summary_rows))
    written.append(path)
    return written


def write_cost_curve(curve: CostCurve, path) -> Path:
    rows = [(pt.threshold, pt.rates.far, pt.rates.frr, pt.expected_loss) for pt in curve.points]
    path = Path(path)
    path.write_text(_csv_text(("threshold", "far", "frr", "expected_loss"), rows))
    return path


def write_reliability(diagram: ReliabilityDiagram, path) -> Path:
    rows = [(b.lower, b.upper, b.mean_predicted, b.empirical_rate, b.count) for b in diagram.bins]
    path = Path(path)
    path.write_text(_csv_text(("bin_lower", "bin_upper", "mean_predicted", "empirical_rate", "count"), rows))
    return path


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.write_text(_csv_text(header, rows))
    return path


def map_to_document(cal_map: CalibrationMap) -> Dict:
    if isinstance(cal_map, PlattParams):
        return {"kind": "platt", "a": cal_map.a, "b": cal_map.b}
    return {"kind": "isotonic", "breakpoints": [[s, p] for s, p in cal_map.breakpoints]}


def map_from_document(doc: Dict) -> CalibrationMap:
    kind = doc.get("kind")
    if kind == "platt":
        return PlattParams(float(doc["a"]), float(doc["b"]))
    if kind == "isotonic":
        pts = doc["breakpoints"]
        return IsotonicMap(tuple(float(s) for s, _ in pts), tuple(float(p) for _, p in pts))
    raise ValueError(f"unknown calibration map kind {kind!r}")


def save_map(cal_map: CalibrationMap, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(map_to_document(cal_map), indent=2) + "\n")
    return path


def load_map(path) -> CalibrationMap:
    return map_from_document(json.loads(Path(path).read_text()))


def read_labeled_csv(path, value_column: str) -> tuple:
    """Read ``(value, label)`` pairs from a CSV with a header naming ``value_column`` and ``label``."""
    values, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or value_column not in reader.fieldnames or "label" not in reader.fieldnames:
            raise ValueError(f"{path}: expected columns {value_column!r} and 'label'")
        for lineno, row in enumerate(reader, start=2):
            try:
                v = float(row[value_column])
                lab = Label.parse(row["label"])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not math.isfinite(v):
                raise ValueError(f"{path}:{lineno}: {value_column} not finite")
            values.append(v)
            labels.append(lab)
    return values, labels
