"""JSON/text reports and export files.

JSON carries full float precision; the text tables round ratios to five
decimals and index shares to two. Nothing time- or host-dependent is
written, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import Analysis
from .connectivity import to_dot
from .contagion import ContagionTrace, TriggerSummary
from .spectral import rank_institutions
from .stabilisation import StabilisationPlan
from .tensor import LAYER_ORDER, MultiplexImpactTensor


def _f(x) -> float:
    return float(x)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def institution_rows(analysis: Analysis) -> list[dict]:
    rows = []
    for entry in rank_institutions(analysis.assessment):
        rows.append({
            "id": analysis.ids[entry.index],
            "rank": entry.rank,
            "index": entry.sii,
            "index_percent": 100.0 * entry.sii,
            "in_core": entry.index in analysis.core,
        })
    return rows


def plan_summary(plan: StabilisationPlan) -> dict:
    achieved = {"risk": plan.risk, "resilience": plan.resilience}
    return {
        "gamma_min": _f(plan.gamma),
        "lambda_rebalanced": _f(plan.lambda_rebalanced),
        "risk": _f(plan.risk),
        "resilience": _f(plan.resilience),
        "target": {"kind": plan.target.kind, "value": _f(plan.target.value)},
        "achieved_measure": plan.target.kind,
        "achieved_value": _f(achieved[plan.target.kind]),
    }


def analysis_report(analysis: Analysis, plan: StabilisationPlan | None = None,
                    extra: dict | None = None) -> dict:
    a = analysis.assessment
    report = {
        "mode": analysis.mode,
        "scenario": analysis.scenario,
        "n": analysis.n,
        "m": analysis.m,
        "p_min": _f(a.p_min),
        "stability_condition": a.stability_condition,
        "lambda": _f(a.lambda_max),
        "risk": _f(a.risk),
        "resilience": _f(a.resilience),
        "region": a.region,
        "iterations": a.spectral.iterations if a.spectral is not None else 0,
        "institutions": institution_rows(analysis),
    }
    if plan is not None:
        report["stabilisation"] = plan_summary(plan)
    if extra:
        report.update(extra)
    return report


def render_text(report: dict) -> str:
    out = [
        f"mode: {report['mode']} ({report['scenario']})",
        f"n = {report['n']}, m = {report['m']}",
        f"p_min = {report['p_min']:.5f}",
        f"stability condition: {report['stability_condition']}",
        f"lambda_max = {report['lambda']:.5f}",
        f"risk = {report['risk']:.5f}",
        f"resilience = {report['resilience']:.5f}",
        f"region: {report['region']}",
        "",
        f"{'id':<12}{'rank':>6}{'index':>10}",
    ]
    for row in report["institutions"]:
        out.append(f"{row['id']:<12}{row['rank']:>6}{row['index_percent']:>9.2f}%")
    st = report.get("stabilisation")
    if st:
        out += [
            "",
            f"gamma_min = {st['gamma_min']:.5f}",
            f"lambda_rebalanced = {st['lambda_rebalanced']:.5f}",
            f"achieved {st['achieved_measure']} = {st['achieved_value']:.5f}",
        ]
    return "\n".join(out) + "\n"


def compare_modes(first: Analysis, second: Analysis) -> dict:
    """Side-by-side ranks and index shares over every institution."""
    if first.ids != second.ids:
        raise ValueError("analyses must cover the same portfolio")
    r1 = {r["id"]: r for r in institution_rows(first)}
    r2 = {r["id"]: r for r in institution_rows(second)}
    rows = []
    for inst_id in first.ids:
        rows.append({
            "id": inst_id,
            "rank_a": r1[inst_id]["rank"],
            "index_percent_a": r1[inst_id]["index_percent"],
            "rank_b": r2[inst_id]["rank"],
            "index_percent_b": r2[inst_id]["index_percent"],
        })
    label = lambda a: a.mode if a.mode != "single" else f"single/{a.scenario}"
    return {
        "a": {"mode": label(first), "m": first.m, "lambda": _f(first.assessment.lambda_max),
              "p_min": _f(first.p_min)},
        "b": {"mode": label(second), "m": second.m, "lambda": _f(second.assessment.lambda_max),
              "p_min": _f(second.p_min)},
        "rows": rows,
    }


def render_compare_text(table: dict) -> str:
    a, b = table["a"]["mode"], table["b"]["mode"]
    out = [f"A: {a} (m = {table['a']['m']}, lambda = {table['a']['lambda']:.5f})",
           f"B: {b} (m = {table['b']['m']}, lambda = {table['b']['lambda']:.5f})",
           "",
           f"{'id':<12}{'rank A':>8}{'index A':>10}{'rank B':>8}{'index B':>10}"]
    for r in table["rows"]:
        out.append(f"{r['id']:<12}{r['rank_a']:>8}{r['index_percent_a']:>9.2f}%"
                   f"{r['rank_b']:>8}{r['index_percent_b']:>9.2f}%")
    return "\n".join(out) + "\n"


def node_labels(analysis: Analysis) -> list[str]:
    """Labels for positions of the connected structure."""
    core_ids = [analysis.ids[k] for k in analysis.core]
    if isinstance(analysis.structure, MultiplexImpactTensor):
        return [f"{layer}:{i}" for layer in LAYER_ORDER for i in core_ids]
    return core_ids


def trace_to_dict(trace: ContagionTrace, labels: Sequence[str], p_min: float,
                  group_labels: Sequence[str] | None = None) -> dict:
    named = group_labels if trace.groups is not None else labels
    return {
        "p_min": _f(p_min),
        "seeds": sorted({named[g] for g in trace.failed_groups(0)[0]}),
        "q_stop": trace.q_stop,
        "outcome": trace.outcome,
        "failed_by_step": [[named[g] for g in step] for step in trace.failed_groups()],
        "probabilities": [
            {labels[v]: _f(p) for v, p in enumerate(probs)} for probs in trace.probabilities
        ],
        "final_probabilities": {labels[v]: _f(p) for v, p in enumerate(trace.capped())},
    }


def sweep_to_dict(summaries: Sequence[TriggerSummary], names: Sequence[str]) -> dict:
    return {"triggers": [
        {"seeds": [names[s] for s in t.seeds], "failures": t.failures, "q_stop": t.q_stop,
         "outcome": t.outcome} for t in summaries
    ]}


def unfolded_csv(analysis: Analysis) -> str:
    """Connected structure as CSV; header cells name (layer, institution)."""
    M = analysis.matrix
    labels = node_labels(analysis)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", *labels])
    for label, row in zip(labels, M):
        w.writerow([label, *(repr(float(x)) for x in row)])
    return buf.getvalue()


def structure_dot(analysis: Analysis) -> str:
    labels = [analysis.ids[k] for k in range(analysis.n)]
    if isinstance(analysis.structure, MultiplexImpactTensor):
        labels = [f"{layer}:{i}" for layer in LAYER_ORDER for i in labels]
    return to_dot(analysis.full_structure, labels, analysis.scc,
                  name=analysis.mode.replace("-", "_"))


def plan_to_dict(plan: StabilisationPlan, ids: Sequence[str], include_distribution: bool = False) -> dict:
    members = [ids[k] for k in plan.members]
    out = plan_summary(plan)
    out.update({
        "lambda_original": _f(plan.lambda_original),
        "p_min": _f(plan.p_min),
        "evaluations": plan.evaluations,
        "institutions": [
            {"id": inst, "surcharge": _f(s), "compensation": _f(c), "net_position": _f(nt)}
            for inst, s, c, nt in zip(members, plan.surcharges, plan.compensations, plan.net_position)
        ],
    })
    if include_distribution:
        X = np.asarray(plan.distribution)
        out["distribution"] = [
            {"from": members[i], "to": members[j], "amount": _f(X[i, j])}
            for i, j in zip(*np.nonzero(X))
        ]
    return out


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_report(directory: str | Path, report: dict, text: str | None = None) -> list[Path]:
    directory = Path(directory)
    paths = [write_text(directory / "report.json", dumps(report))]
    paths.append(write_text(directory / "report.txt", text if text is not None else render_text(report)))
    return paths
