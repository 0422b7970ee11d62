import json
import logging
from typing import Any, Optional

import numpy as np

from rankcal.controller import experiments
from rankcal.controller.exceptions import ConfigError, TiedScoresError
from rankcal.model.calibration import (
    Thresholds,
    classify_deformation,
    classify_setting,
)
from rankcal.model.matrix_model import (
    ComparisonMatrix,
    ScaleVector,
    first_nonreciprocal_pair,
    is_additively_consistent,
    strict_ranking_admissible,
)
from rankcal.model.projection import brutal_project, compare_methods
from rankcal.model.synth import NoiseSpec, Regime, ScenarioConfig, default_deformation, latent_scores
from rankcal.model.uncertainty import (
    central_ranking,
    standard_error,
    summary_probabilities,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 0
REPORT_RANKINGS = 10

REQUIRED_CONFIG_KEYS = [
    "n",
    "sigma",
    "rho",
    "regime",
    "c",
    "replications",
    "samples",
    "seed",
]

OPTIONAL_CONFIG_KEYS = ["s", "name"]

ALLOWED_REGIMES = [regime.value for regime in Regime]

REQUIRED_TAU_KEYS = ["taus", "replications", "samples", "seed"]

OPTIONAL_TAU_KEYS = ["sigma", "rho"]

REPRODUCIBLE = ["worked_example", "mc_table", "tau_table", "tau_mc"]


def _check_keys(config: Any, required: list, optional: list, what: str) -> None:
    """
    Validate the keys of a config object, reporting missing and extra keys together.

    Raises:
        ConfigError: If the object is not a mapping or its keys do not match.
    """
    if not isinstance(config, dict) or not config:
        raise ConfigError(f"{what} must be a non-empty JSON object.")

    keys = set(config.keys())
    missing_keys = set(required) - keys
    extra_keys = keys - set(required) - set(optional)

    error_messages = []

    if missing_keys:
        error_messages.append(f"Missing keys: {', '.join(sorted(missing_keys))}")

    if extra_keys:
        error_messages.append(f"Extra keys: {', '.join(sorted(extra_keys))}")

    if error_messages:
        raise ConfigError(f"Invalid {what}. " + "; ".join(error_messages))


def _as_int(config: dict, key: str, minimum: int) -> int:
    value = config[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"'{key}' must be an integer >= {minimum}, got {value!r}.")
    return value


def _as_float(config: dict, key: str) -> float:
    value = config[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}.")
    return float(value)


def validate_config(config: Any) -> None:
    """
    Validate a scenario config.

    Args:
        config (dict): Parsed scenario object.

    Raises:
        ConfigError: If keys are missing or extra, or a value has the wrong type or range.
    """
    _check_keys(config, REQUIRED_CONFIG_KEYS, OPTIONAL_CONFIG_KEYS, "scenario config")
    _as_int(config, "n", 3)
    _as_int(config, "replications", 1)
    _as_int(config, "samples", 1)
    _as_int(config, "seed", 0)
    if _as_float(config, "sigma") < 0:
        raise ConfigError("'sigma' must be non-negative.")
    if not -1.0 <= _as_float(config, "rho") <= 1.0:
        raise ConfigError("'rho' must lie in [-1, 1].")
    if not _as_float(config, "c") > 0:
        raise ConfigError("'c' must be positive.")
    if config["regime"] not in ALLOWED_REGIMES:
        raise ConfigError(
            f"Invalid regime {config['regime']!r}. Allowed regimes are {', '.join(ALLOWED_REGIMES)}."
        )
    s = config.get("s")
    if s is not None:
        if not isinstance(s, list) or len(s) != config["n"]:
            raise ConfigError(f"'s' must be a list of {config['n']} numbers.")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in s):
            raise ConfigError("'s' must contain numbers only.")


def build_scenario(config: dict) -> ScenarioConfig:
    """
    Turn a validated config into a scenario. A missing ``s`` takes the regime's default deformation.

    Raises:
        ConfigError: If ``s`` is not centered.
        RegimeError: If ``s`` violates the regime inequality.
    """
    validate_config(config)
    u = latent_scores(config["n"], float(config["c"]))
    if config.get("s") is None:
        s = default_deformation(Regime(config["regime"]), u)
    else:
        try:
            s = ScaleVector(config["s"])
        except ValueError as e:
            raise ConfigError(f"Invalid 's': {e}") from e
    return ScenarioConfig(
        n=config["n"],
        spacing_c=float(config["c"]),
        regime=Regime(config["regime"]),
        s=s,
        noise=NoiseSpec(float(config["sigma"]), float(config["rho"])),
        replications=config["replications"],
        samples_per_rep=config["samples"],
        seed=config["seed"],
        name=config.get("name") or "",
    )


def validate_tau_study(params: Any) -> dict:
    """
    Validate the parameters of a fixed-noise deformation study.

    Raises:
        ConfigError: If keys or values are invalid.
    """
    _check_keys(params, REQUIRED_TAU_KEYS, OPTIONAL_TAU_KEYS, "tau study")
    taus = params["taus"]
    if not isinstance(taus, list) or not taus:
        raise ConfigError("'taus' must be a non-empty list.")
    if not all(isinstance(t, (int, float)) and not isinstance(t, bool) and t >= 0 for t in taus):
        raise ConfigError("'taus' must contain non-negative numbers.")
    study = {
        "taus": [float(t) for t in taus],
        "replications": _as_int(params, "replications", 1),
        "samples": _as_int(params, "samples", 1),
        "seed": _as_int(params, "seed", 0),
        "sigma0": experiments.TAU_SIGMA,
        "rho0": experiments.TAU_RHO,
    }
    if "sigma" in params:
        study["sigma0"] = _as_float(params, "sigma")
    if "rho" in params:
        study["rho0"] = _as_float(params, "rho")
    if study["sigma0"] < 0 or not -1.0 <= study["rho0"] <= 1.0:
        raise ConfigError("Tau study noise needs sigma >= 0 and rho in [-1, 1].")
    return study


def load_simulation(path: str) -> tuple[list[ScenarioConfig], Optional[dict]]:
    """
    Read a simulation file: one flat scenario object, or an object with a ``scenarios`` list
    and/or a ``tau_study`` block.

    Raises:
        ConfigError: If the file cannot be read, is not valid JSON, or holds no work.
        RegimeError: If a scenario violates its regime inequality.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError("Config file must hold a JSON object.")

    if "scenarios" not in data and "tau_study" not in data:
        return [build_scenario(data)], None

    extra = set(data) - {"scenarios", "tau_study"}
    if extra:
        raise ConfigError(f"Invalid config file. Extra keys: {', '.join(sorted(extra))}")
    raw = data.get("scenarios", [])
    if not isinstance(raw, list):
        raise ConfigError("'scenarios' must be a list.")
    tau_study = validate_tau_study(data["tau_study"]) if "tau_study" in data else None
    if not raw and tau_study is None:
        raise ConfigError("Scenario list is empty.")
    return [build_scenario(item) for item in raw], tau_study


def _report(command: str, seed: Optional[int], **sections) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "status": "ok",
        **sections,
    }


def _diagnostics(diag) -> dict:
    return {
        "ir2": diag.ir2,
        "ic2": diag.ic2,
        "sigma_hat": diag.sigma_hat,
        "rho_hat": diag.rho_hat,
        "rho_raw": diag.rho_raw,
        "degenerate": diag.degenerate,
    }


def analyze(
    X: ComparisonMatrix,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    thresholds: Thresholds = Thresholds(),
    threads: Optional[int] = 1,
) -> dict:
    """
    Run the structured treatment on one matrix and repeat the uncertainty analysis under brutal
    projection.

    When the estimated scores tie, the report has no ranking block, ``status`` is "error" and
    ``error`` holds the reason; the caller decides how to surface it.

    Args:
        X (ComparisonMatrix): Observed matrix.
        samples (int): Ranking samples per method.
        seed (int): Master seed.
        thresholds (Thresholds): Deformation classification thresholds.
        threads (int): Worker threads for sampling.

    Returns:
        dict: The analysis report.
    """
    if samples < 1:
        raise ConfigError(f"samples must be positive, got {samples}.")
    logger.info("Analyzing a %dx%d matrix with %d samples.", X.n, X.n, samples)
    warnings = []
    if X.n == 3:
        warnings.append("n = 3: the scale estimate divides by n - 2 = 1 and is noise-sensitive.")

    pair = first_nonreciprocal_pair(X)
    admissibility = strict_ranking_admissible(brutal_project(X))
    comparison = compare_methods(X, samples, seed, threads=threads)
    structured, brutal = comparison.structured, comparison.brutal
    classification = classify_deformation(structured.deform, thresholds)
    warnings.extend(classification.warnings)

    for label, diag in (("structured", structured.diag), ("brutal", brutal.diag)):
        if diag.degenerate:
            warnings.append(f"{label}: residual has no triangular defect; noise calibrated to zero.")
        elif diag.clamped:
            warnings.append(f"{label}: rho_hat = {diag.rho_raw!r} clamped to [-1, 1].")

    report = _report(
        "analyze",
        seed,
        samples=samples,
        input={
            "n": X.n,
            "reciprocal": pair is None,
            "first_nonreciprocal_pair": None if pair is None else [pair[0] + 1, pair[1] + 1],
            "consistent": is_additively_consistent(X),
            "admissible": admissibility.admissible,
            "cycle": admissibility.cycle_labels(),
        },
        structured={
            "u_hat": structured.fit.u_hat.to_list(),
            "s_hat": structured.fit.s_hat.to_list(),
            **_diagnostics(structured.diag),
            "lambda": structured.deform.lambda_,
            "gamma": structured.deform.gamma,
            "gap": structured.deform.gap_u,
            "deformation_class": classification.label.value,
            "scale_c": structured.law.scale_c,
        },
        ranking=None,
        brutal={
            **_diagnostics(brutal.diag),
            "scale_c": brutal.law.scale_c,
            "central_probability": None,
            "entropy_bits": summary_probabilities(brutal.dist).entropy_bits,
            "tv_distance": comparison.deltas.tv,
        },
        setting=None,
        warnings=warnings,
        error=None,
    )

    try:
        central = central_ranking(structured.fit.u_hat)
    except TiedScoresError as e:
        warnings.append(str(e))
        report["status"] = "error"
        report["error"] = str(e)
        return report

    summary = summary_probabilities(structured.dist)
    central_probability = structured.dist.probability(central)
    if summary.tie_fraction > 0:
        warnings.append(f"{structured.dist.ties} samples had tied scores.")
    report["ranking"] = {
        "central_ranking": central.label(),
        "central_probability": central_probability,
        "central_standard_error": standard_error(central_probability, samples),
        "support": len(structured.dist.counts),
        "top_rankings": structured.dist.to_dict(REPORT_RANKINGS)["rankings"],
        "topk": np.clip(np.cumsum(summary.positions, axis=1), 0.0, 1.0).tolist(),
        "precedence": np.clip(summary.precedence, 0.0, 1.0).tolist(),
        "entropy_bits": summary.entropy_bits,
        "tie_fraction": summary.tie_fraction,
    }
    report["brutal"]["central_probability"] = brutal.dist.probability(central)
    report["setting"] = classify_setting(classification.label, central_probability).value
    return report


def simulate(
    scenarios: list[ScenarioConfig], tau_study: Optional[dict] = None, threads: Optional[int] = 1
) -> dict:
    """Run a scenario grid and, when configured, the Monte Carlo deformation study."""
    report = _report(
        "simulate",
        None,
        scenarios=experiments.run_scenario_grid(scenarios, threads=threads),
        tau_study=None,
    )
    if tau_study is not None:
        rows = experiments.run_tau_study(
            mode=experiments.TauMode.MONTE_CARLO, threads=threads, **tau_study
        )
        report["seed"] = tau_study["seed"]
        report["tau_study"] = [row.to_dict() for row in rows]
    return report


def reproduce(
    which: str = "all",
    seed: int = DEFAULT_SEED,
    replications: Optional[int] = None,
    threads: Optional[int] = 1,
) -> dict:
    """
    Recompute the reference tables and compare them with the printed values.

    Args:
        which (str): One of REPRODUCIBLE, or "all".
        seed (int): Master seed for the Monte Carlo parts.
        replications (int, optional): Overrides the reference replication counts.
        threads (int): Worker threads.

    Raises:
        ConfigError: If ``which`` is unknown.
    """
    if which != "all" and which not in REPRODUCIBLE:
        raise ConfigError(
            f"Invalid target {which!r}. Allowed targets are {', '.join(REPRODUCIBLE + ['all'])}."
        )
    targets = REPRODUCIBLE if which == "all" else [which]
    sections = {}
    checks = []

    if "worked_example" in targets:
        worked = experiments.run_worked_example()
        sections["worked_example"] = worked
        checks.extend(worked["checks"])

    if "mc_table" in targets:
        results = experiments.run_mc_study(
            replications=replications or experiments.MC_REPLICATIONS, seed=seed, threads=threads
        )
        mc_checks = [check.to_dict() for check in experiments.reproduce_mc_table(results)]
        sections["mc_table"] = {"rows": [r.to_dict() for r in results], "checks": mc_checks}
        checks.extend(mc_checks)

    if "tau_table" in targets:
        rows = experiments.run_tau_study(mode=experiments.TauMode.ANALYTIC)
        tau_checks = [check.to_dict() for check in experiments.reproduce_tau_table(rows)]
        sections["tau_table"] = {
            "tau_critical": experiments.tau_critical(),
            "rows": [row.to_dict() for row in rows],
            "checks": tau_checks,
        }
        checks.extend(tau_checks)

    if "tau_mc" in targets:
        rows = experiments.run_tau_study(
            mode=experiments.TauMode.MONTE_CARLO,
            replications=replications or experiments.TAU_MC_REPLICATIONS,
            seed=seed,
            threads=threads,
        )
        tau_mc_checks = [check.to_dict() for check in experiments.reproduce_tau_mc(rows)]
        sections["tau_mc"] = {"rows": [row.to_dict() for row in rows], "checks": tau_mc_checks}
        checks.extend(tau_mc_checks)

    report = _report("reproduce", seed, target=which, **sections)
    failed = [check["name"] for check in checks if check["verdict"] != "PASS"]
    report["summary"] = {"checks": len(checks), "failed": failed}
    if failed:
        report["status"] = "fail"
    return report


def echo(X: ComparisonMatrix) -> str:
    """The matrix as CSV with round-trip float rendering."""
    return X.to_csv()
