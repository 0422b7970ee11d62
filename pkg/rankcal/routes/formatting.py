import json
import math
from typing import Any, Optional, Sequence

import numpy as np

MISSING = "-"


def to_jsonable(data: Any) -> Any:
    """
    Convert a report into plain JSON types.

    numpy scalars and arrays become Python numbers and lists, tuples become lists, and
    non-finite floats become None.
    """
    if isinstance(data, dict):
        return {str(key): to_jsonable(value) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [to_jsonable(value) for value in data]
    if isinstance(data, np.ndarray):
        return to_jsonable(data.tolist())
    if isinstance(data, (bool, np.bool_)):
        return bool(data)
    if isinstance(data, (int, np.integer)):
        return int(data)
    if isinstance(data, (float, np.floating)):
        value = float(data)
        return value if math.isfinite(value) else None
    return data


def format_response(report: dict, fmt: str = "json") -> str:
    """
    Render a report consistently.

    Args:
        report (dict): Report produced by the controller.
        fmt (str, optional): "json" or "text". Defaults to "json".

    Returns:
        str: Sorted, indented JSON whose floats use the shortest round-trip repr, or aligned
        plain-text tables.
    """
    if fmt == "text":
        return render_text(report)
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(value: Any, digits: int) -> str:
    if value is None:
        return MISSING
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return MISSING if math.isnan(value) else f"{value:.{digits}f}"
    return str(value)


def table(headers: Sequence[str], rows: Sequence[Sequence[Any]], digits: int = 5) -> str:
    """Aligned columns: text left, everything else right."""
    cells = [[_cell(value, digits) for value in row] for row in rows]
    widths = [
        max([len(header)] + [len(row[i]) for row in cells]) for i, header in enumerate(headers)
    ]
    numeric = [
        all(not isinstance(row[i], str) for row in rows) if rows else False
        for i in range(len(headers))
    ]

    def line(values):
        return "  ".join(
            value.rjust(width) if right else value.ljust(width)
            for value, width, right in zip(values, widths, numeric)
        ).rstrip()

    rule = "  ".join("-" * width for width in widths)
    return "\n".join([line(headers), rule] + [line(row) for row in cells]) + "\n"


def _with_se(value: float, se: float) -> str:
    return f"{value:.5f} ({se:.5f})"


def _mean(stat: Optional[dict]) -> Optional[float]:
    return None if stat is None else stat["mean"]


def _matrix_table(matrix: Sequence[Sequence[float]], corner: str = "") -> str:
    n = len(matrix)
    headers = [corner] + [str(j + 1) for j in range(n)]
    return table(headers, [[str(i + 1)] + list(row) for i, row in enumerate(matrix)], digits=4)


def _header(report: dict) -> str:
    return (
        f"{report['command']}  schema {report['schema_version']}  "
        f"seed {_cell(report['seed'], 0)}  status {report['status']}\n"
    )


def _render_analyze(report: dict) -> list[str]:
    structured = report["structured"]
    brutal = report["brutal"]
    source = report["input"]
    parts = [
        table(
            ["quantity", "value"],
            [
                ["n", source["n"]],
                ["reciprocal", source["reciprocal"]],
                ["consistent", source["consistent"]],
                ["projection admissible", source["admissible"]],
                ["cycle", ", ".join(source["cycle"]) if source["cycle"] else None],
                ["u_hat", " ".join(f"{v:.5f}" for v in structured["u_hat"])],
                ["s_hat", " ".join(f"{v:.5f}" for v in structured["s_hat"])],
                ["sigma_hat", structured["sigma_hat"]],
                ["rho_hat", structured["rho_hat"]],
                ["Lambda", structured["lambda"]],
                ["Gamma", structured["gamma"]],
                ["deformation", structured["deformation_class"]],
                ["setting", report["setting"]],
                ["brutal sigma_hat", brutal["sigma_hat"]],
                ["brutal rho_hat", brutal["rho_hat"]],
                ["brutal central probability", brutal["central_probability"]],
                ["tv distance", brutal["tv_distance"]],
            ],
        )
    ]
    ranking = report["ranking"]
    if ranking is not None:
        parts.append(
            f"central ranking {ranking['central_ranking']}: "
            f"{_with_se(ranking['central_probability'], ranking['central_standard_error'])}\n"
        )
        parts.append(
            table(
                ["ranking", "count", "probability"],
                [[r["ranking"], r["count"], r["probability"]] for r in ranking["top_rankings"]],
            )
        )
        parts.append("top-k probabilities (row: alternative, column: k)\n")
        parts.append(_matrix_table(ranking["topk"], "alt"))
        parts.append("precedence P(row ranked above column)\n")
        parts.append(_matrix_table(ranking["precedence"], "alt"))
    return parts


def _render_checks(checks: Sequence[dict]) -> str:
    return table(
        ["check", "reference", "computed", "tolerance", "verdict"],
        [
            [c["name"], _compact(c["expected"]), _compact(c["computed"]), c["tolerance"], c["verdict"]]
            for c in checks
        ],
    )


def _compact(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.5f}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_compact(v) for v in value) + "]"
    return str(value)


def _tau_rows(rows: Sequence[dict]) -> str:
    headers = ["tau", "Lambda", "Gamma", "sigma_struct", "sigma_sharp", "rho_struct", "rho_sharp"]
    body = [
        [row["tau"], row["lambda"], row["gamma"], row["sigma_struct"], row["sigma_sharp"],
         row["rho_struct"], row["rho_sharp"]]
        for row in rows
    ]
    if rows and rows[0]["mode"] == "monte_carlo":
        headers += ["central_struct", "central_sharp"]
        for line, row in zip(body, rows):
            line += [row["central_struct"], row["central_sharp"]]
    return table(headers, body, digits=3)


def _render_reproduce(report: dict) -> list[str]:
    parts = []
    if "worked_example" in report:
        worked = report["worked_example"]
        parts.append(f"worked example: ranking {worked['ranking']}, cycle {', '.join(worked['cycle'])}\n")
        parts.append(_render_checks(worked["checks"]))
    if "mc_table" in report:
        parts.append("Monte Carlo study (standard errors in parentheses)\n")
        parts.append(
            table(
                ["sigma", "p_NA", "p_WR", "p_Both"],
                [
                    [row["sigma"]]
                    + [_with_se(p, se) for p, se in zip((row["p_na"], row["p_wr"], row["p_both"]), row["standard_errors"])]
                    for row in report["mc_table"]["rows"]
                ],
                digits=2,
            )
        )
        parts.append(_render_checks(report["mc_table"]["checks"]))
    for key, title in (("tau_table", "deformation study, analytic"), ("tau_mc", "deformation study, Monte Carlo")):
        if key in report:
            parts.append(f"{title}\n")
            parts.append(_tau_rows(report[key]["rows"]))
            parts.append(_render_checks(report[key]["checks"]))
    summary = report["summary"]
    parts.append(f"{summary['checks']} checks, {len(summary['failed'])} failed\n")
    return parts


def _render_simulate(report: dict) -> list[str]:
    parts = []
    rows = []
    for scenario in report["scenarios"]:
        config = scenario["config"]
        rows.append(
            [
                config["name"],
                config["n"],
                config["regime"],
                config["sigma"],
                config["rho"],
                _mean(scenario["sigma_hat"]),
                _mean(scenario["rho_hat"]),
                _mean(scenario["lambda"]),
                _mean(scenario["gamma"]),
                _mean(scenario["central_probability"]["structured"]),
                _mean(scenario["central_probability"]["brutal"]),
                _mean(scenario["entropy_bits"]["structured"]),
                _mean(scenario["entropy_bits"]["brutal"]),
                _mean(scenario["deltas"]["tv"]),
            ]
        )
    if rows:
        parts.append(
            table(
                ["scenario", "n", "regime", "sigma", "rho", "sigma_hat", "rho_hat", "Lambda",
                 "Gamma", "central", "central#", "H", "H#", "tv"],
                rows,
                digits=3,
            )
        )
    if report.get("tau_study"):
        parts.append("deformation study, Monte Carlo\n")
        parts.append(_tau_rows(report["tau_study"]))
    return parts


RENDERERS = {
    "analyze": _render_analyze,
    "reproduce": _render_reproduce,
    "simulate": _render_simulate,
}


def render_text(report: dict) -> str:
    """Aligned plain-text tables for a report."""
    report = to_jsonable(report)
    parts = [_header(report)]
    parts.extend(RENDERERS[report["command"]](report))
    for warning in report.get("warnings") or []:
        parts.append(f"warning: {warning}\n")
    if report.get("error"):
        parts.append(f"error: {report['error']}\n")
    return "\n".join(parts)
