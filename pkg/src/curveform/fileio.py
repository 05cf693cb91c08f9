"""Scenario, curve and topology files (TOML) and the CSV/JSON run artifacts.

Every file carries a versioned format tag: TOML documents a top-level
``format = "curveform-<kind>/<version>"`` key and CSV files a first line
``# curveform-<kind>/<version>``. Floats are written with ``repr`` so they
parse back bit-identically.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from curveform.control import XI_FORM, Gains
from curveform.curves import BasisFamily, ParametricCurve, SampleSet, bezier_to_polynomial, fit_coefficients
from curveform.dynamics import EULER
from curveform.errors import CurveformError, FormatError, ScenarioError
from curveform.shapes import get_generator
from curveform.simulation import CurveSegment, InitialConditions, Scenario, TrajectoryLog, validate_scenario
from curveform.topology import NAMED_TOPOLOGIES, DirectedTopology

SCENARIO_FORMAT = "curveform-scenario/1"
CURVE_FORMAT = "curveform-curve/1"
TOPOLOGY_FORMAT = "curveform-topology/1"
TRAJECTORY_FORMAT = "curveform-trajectory/1"
METRICS_FORMAT = "curveform-metrics/1"
POINTS_FORMAT = "curveform-points/1"
SUMMARY_FORMAT = "curveform-summary/1"
SWEEP_FORMAT = "curveform-sweep/1"

TRAJECTORY_COLUMNS = ["t", "agent", "x", "y", "theta_wrapped", "xbar", "ybar", "v", "omega", "dhat1", "dhat2"]
METRICS_COLUMNS = ["t", "err_norm", "V"]
POINTS_COLUMNS = ["s", "x", "y"]
SAMPLE_COLUMNS = ["s", "x", "y"]

DEFAULT_FIT_SAMPLES = 200


# ---------------------------------------------------------------- TOML helpers


def read_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(str(exc), path=path) from None


def _check_format(doc: dict, expected: str, path) -> None:
    tag = doc.get("format")
    if tag is None:
        raise FormatError(f"missing 'format' header (expected {expected!r})", path=path)
    if tag != expected:
        raise FormatError(f"unsupported format {tag!r} (expected {expected!r})", path=path)


def _plain(value):
    """Convert numpy scalars/arrays into TOML-serialisable Python values."""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items() if v is not None}
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_toml(path, doc: dict) -> None:
    Path(path).write_text(tomli_w.dumps(_plain(doc)), encoding="utf-8")


# ---------------------------------------------------------------- curves


def _family(table: dict, where: str) -> BasisFamily:
    kind = table.get("family")
    if kind is None or "order" not in table:
        raise FormatError(f"{where}: 'family' and 'order' are required")
    return BasisFamily(kind, table["order"])


def curve_from_table(table: dict, where: str = "curve", base_dir: Path | None = None) -> ParametricCurve:
    """Resolve one curve definition: explicit coefficients, a Bezier polygon,
    a named analytic generator, or a sample CSV (the last two are fitted)."""
    family = _family(table, where)
    sources = [k for k in ("coefficients", "bezier", "generator", "samples_csv") if k in table]
    if len(sources) != 1:
        raise FormatError(
            f"{where}: give exactly one of coefficients / bezier / generator / samples_csv, got {sources or 'none'}"
        )
    source = sources[0]
    if source == "coefficients":
        return ParametricCurve(family, np.asarray(table["coefficients"], dtype=float))
    if source == "bezier":
        if family.kind != "polynomial":
            raise FormatError(f"{where}: a Bezier curve needs family = 'polynomial'")
        return bezier_to_polynomial(table["bezier"], family.order)
    if source == "generator":
        try:
            fn = get_generator(table["generator"])
        except KeyError as exc:
            raise FormatError(f"{where}: {exc.args[0]}") from None
        samples = SampleSet.from_function(fn, int(table.get("samples", DEFAULT_FIT_SAMPLES)))
    else:
        csv_path = Path(table["samples_csv"])
        if base_dir is not None and not csv_path.is_absolute():
            csv_path = base_dir / csv_path
        samples = read_samples_csv(csv_path)
    return ParametricCurve(family, fit_coefficients(samples, family))


def load_curve(path) -> ParametricCurve:
    path = Path(path)
    doc = read_toml(path)
    _check_format(doc, CURVE_FORMAT, path)
    try:
        return curve_from_table(doc, where=str(path), base_dir=path.parent)
    except FormatError:
        raise
    except (CurveformError, ValueError, TypeError) as exc:
        raise FormatError(str(exc), path=path) from None


def save_curve(path, curve: ParametricCurve, fit_stats: dict | None = None) -> None:
    doc = {
        "format": CURVE_FORMAT,
        "family": curve.family.kind,
        "order": curve.family.order,
        "coefficients": [float(v) for v in curve.xi],
    }
    if fit_stats:
        doc["fit"] = fit_stats
    write_toml(path, doc)


# ---------------------------------------------------------------- topology


def topology_from_table(table: dict, n: int) -> DirectedTopology:
    kind = table.get("kind", "edges" if "edges" in table else "chain")
    if kind == "edges":
        if "edges" not in table:
            raise FormatError("topology kind 'edges' needs an 'edges' list of [receiver, sender, weight]")
        return DirectedTopology.from_edges(n, table["edges"])
    try:
        builder = NAMED_TOPOLOGIES[kind]
    except KeyError:
        raise FormatError(f"unknown topology kind {kind!r}; known: {sorted(NAMED_TOPOLOGIES) + ['edges']}") from None
    return builder(n, float(table.get("weight", 1.0)))


def load_topology(path) -> DirectedTopology:
    """Read a topology file, or the ``[topology]`` section of a scenario file."""
    path = Path(path)
    doc = read_toml(path)
    tag = doc.get("format")
    try:
        if tag == SCENARIO_FORMAT:
            return topology_from_table(doc.get("topology", {}), int(doc["agents"]["n"]))
        _check_format(doc, TOPOLOGY_FORMAT, path)
        if "n" not in doc:
            raise FormatError("missing agent count 'n'", path=path)
        return topology_from_table(doc, doc["n"])
    except FormatError as exc:
        if exc.path is None:
            raise FormatError(str(exc), path=path) from None
        raise
    except (CurveformError, ValueError, TypeError, KeyError) as exc:
        raise FormatError(str(exc), path=path) from None


# ---------------------------------------------------------------- scenarios


@dataclass
class _Collector:
    problems: list

    def run(self, label, fn, default=None):
        try:
            return fn()
        except (CurveformError, ValueError, TypeError, KeyError) as exc:
            msg = f"missing key {exc.args[0]!r}" if isinstance(exc, KeyError) and exc.args else exc
            self.problems.append(f"[{label}] {msg}")
            return default


def scenario_from_dict(doc: dict, base_dir: Path | None = None) -> Scenario:
    """Build a :class:`Scenario`, reporting every problem at once via :class:`ScenarioError`."""
    problems: list[str] = []
    col = _Collector(problems)
    agents = doc.get("agents", {})
    n = col.run("agents", lambda: int(agents["n"]))
    if n is None:
        raise ScenarioError(problems)
    gains_t = doc.get("gains", {})
    gains = col.run("gains", lambda: Gains(float(gains_t.get("k1", 1.0)), float(gains_t.get("k2", 1.0))))
    topology = col.run("topology", lambda: topology_from_table(doc.get("topology", {}), n))

    curves = []
    tables = doc.get("curve", [])
    if isinstance(tables, dict):
        tables = [tables]
    for k, table in enumerate(tables):
        label = table.get("label", f"curve #{k + 1}")
        curve = col.run(label, lambda t=table, lb=label: curve_from_table(t, lb, base_dir))
        if curve is not None:
            curves.append(CurveSegment(float(table.get("start", 0.0)), curve, label))

    dist = doc.get("disturbance", {})
    disturbances = dist.get("per_agent", dist.get("d", [0.0, 0.0]))
    integ = doc.get("integration", {})
    init_t = doc.get("initial", {})
    mode = init_t.get("mode", "random")
    if mode not in ("random", "on-target", "explicit"):
        problems.append(f"[initial] unknown mode {mode!r}; expected random, on-target or explicit")
    if mode == "explicit" and "poses" not in init_t:
        problems.append("[initial] mode 'explicit' needs a 'poses' list of [x, y, theta]")
    box = init_t.get("box")
    initial = InitialConditions(
        poses=np.asarray(init_t["poses"], dtype=float) if mode == "explicit" and "poses" in init_t else None,
        box=tuple(float(v) for v in box) if box is not None else None,
        inflate=float(init_t.get("inflate", 0.25)),
        on_target=mode == "on-target",
        delta_hat=np.asarray(init_t["delta_hat"], dtype=float) if "delta_hat" in init_t else None,
    )
    if problems or gains is None or topology is None:
        raise ScenarioError(problems)
    scenario = Scenario(
        n=n,
        topology=topology,
        curves=tuple(curves),
        gains=gains,
        ell=float(agents.get("ell", 0.01)),
        disturbances=np.asarray(disturbances, dtype=float),
        dt=float(integ.get("dt", 1e-3)),
        duration=float(integ.get("duration", 100.0)),
        initial=initial,
        integrator=integ.get("method", EULER),
        saturation=float(integ["saturation"]) if "saturation" in integ else None,
        seed=int(doc.get("seed", 0)),
        controller_form=gains_t.get("controller_form", XI_FORM),
        include_endpoint=bool(agents.get("include_endpoint", False)),
        name=str(doc.get("name", "")),
    )
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioError(problems)
    return scenario


def load_scenario(path) -> tuple[Scenario, dict]:
    """Parse and validate a scenario file; returns the scenario and the raw document."""
    path = Path(path)
    doc = read_toml(path)
    _check_format(doc, SCENARIO_FORMAT, path)
    return scenario_from_dict(doc, base_dir=path.parent), doc


# ---------------------------------------------------------------- CSV


def _fmt(value) -> str:
    return repr(float(value))


def read_table(path, columns: list[str] | None = None) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV, skipping ``#`` comment lines.

    Returns the header and an ``(rows, cols)`` float array. Non-numeric or
    non-finite cells raise :class:`FormatError` naming the file line.
    """
    path = Path(path)
    header = None
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if columns is not None and header != columns:
                    raise FormatError(f"expected columns {columns}, got {header}", path=path, line=lineno)
                continue
            if len(row) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(row)}", path=path, line=lineno)
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise FormatError(f"non-numeric value in row {row}", path=path, line=lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise FormatError(f"non-finite value in row {row}", path=path, line=lineno)
            rows.append(values)
    if header is None:
        raise FormatError("empty file (no header row)", path=path)
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def read_samples_csv(path) -> SampleSet:
    _, data = read_table(path, SAMPLE_COLUMNS)
    try:
        return SampleSet(data[:, 0], data[:, 1:3])
    except CurveformError as exc:
        raise FormatError(str(exc), path=path) from None


def _write_rows(path, tag: str, columns: list[str], rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {tag}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def write_points_csv(path_or_stream, s_values, points) -> None:
    rows = [[_fmt(s), _fmt(p[0]), _fmt(p[1])] for s, p in zip(s_values, points)]
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(f"# {POINTS_FORMAT}\n")
        writer = csv.writer(path_or_stream, lineterminator="\n")
        writer.writerow(POINTS_COLUMNS)
        writer.writerows(rows)
    else:
        _write_rows(path_or_stream, POINTS_FORMAT, POINTS_COLUMNS, rows)


def write_trajectory_csv(path, log: TrajectoryLog) -> None:
    """One row per (step, agent); agents numbered from 1."""
    K, n = log.poses.shape[:2]
    theta = log.theta_wrapped
    cols = [
        np.repeat(log.times, n),
        np.tile(np.arange(1, n + 1), K),
        log.poses[..., 0].ravel(),
        log.poses[..., 1].ravel(),
        theta.ravel(),
        log.virtual_points[..., 0].ravel(),
        log.virtual_points[..., 1].ravel(),
        log.inputs[..., 0].ravel(),
        log.inputs[..., 1].ravel(),
        log.estimates[..., 0].ravel(),
        log.estimates[..., 1].ravel(),
    ]
    text = [list(map(repr, c.tolist())) for c in cols]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {TRAJECTORY_FORMAT}\n")
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        fh.writelines(",".join(fields) + "\n" for fields in zip(*text))


def write_metrics_csv(path, log: TrajectoryLog) -> None:
    cols = [log.times, log.error_norm, log.lyapunov]
    text = [list(map(repr, c.tolist())) for c in cols]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {METRICS_FORMAT}\n")
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        fh.writelines(",".join(fields) + "\n" for fields in zip(*text))


def write_summary(path, log: TrajectoryLog, config: dict | None = None) -> None:
    doc = {
        "format": SUMMARY_FORMAT,
        "seed": log.scenario.seed,
        "summary": log.summary(),
        "config": _plain(config) if config is not None else None,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class RunArtifacts:
    trajectory: Path
    metrics: Path
    summary: Path


def write_run_artifacts(out_dir, log: TrajectoryLog, config: dict | None = None) -> RunArtifacts:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arts = RunArtifacts(out / "trajectory.csv", out / "metrics.csv", out / "summary.json")
    write_trajectory_csv(arts.trajectory, log)
    write_metrics_csv(arts.metrics, log)
    write_summary(arts.summary, log, config)
    return arts


SWEEP_SCALARS = ["completed", "initial_error_norm", "terminal_error_norm", "terminal_lyapunov",
                 "terminal_disturbance_error", "terminal_heading_rate", "settling_time"]


def write_sweep_csv(path, results) -> None:
    keys = list(results[0].params) if results else []
    rows = []
    for res in results:
        row = [str(res.params[k]) for k in keys]
        if res.summary is None:
            row += [""] * len(SWEEP_SCALARS) + [res.error]
        else:
            s = res.summary
            settle = s["settling_times"][-1]
            row += [str(s["completed"])] + [_fmt(s[k]) for k in SWEEP_SCALARS[1:-1]]
            row += ["" if settle is None else _fmt(settle), ""]
        rows.append(row)
    _write_rows(path, SWEEP_FORMAT, keys + SWEEP_SCALARS + ["error"], rows)
