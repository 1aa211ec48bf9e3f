"""Figure-level experiments and their CSV / JSON output files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, config_to_dict, resolve_config
from .montecarlo import TrialPlan, empirical_cdf, mc_ui_approximation_gap, run_trials
from .precoding import Scheme

COLUMNS = ("snapshot_id", "user_id", "peer_id", "scheme", "quantity", "value")
CDF_COLUMNS = ("scheme", "quantity", "value", "probability")

NORMALIZED = Scheme.NORMALIZED.value
CONVENTIONAL = Scheme.CONVENTIONAL.value
NORMALIZED_MC = "normalized-mc"


class Figure(str, Enum):
    UI_GAP = "ui-gap"
    TERM_COMPARISON = "term-comparison"
    RATE_CDF = "rate-cdf"
    CUSTOM = "custom"


@dataclass
class ExperimentSpec:
    """Everything needed to (re)produce one output file."""

    figure: Figure
    config_overrides: dict = field(default_factory=dict)
    trial_plan: TrialPlan = field(default_factory=TrialPlan)
    output_path: str | None = None
    output_format: str = "csv"
    cdf: bool = False
    forced_orthogonal: bool = False
    overhead_adjusted: bool = False

    def __post_init__(self):
        self.figure = Figure(self.figure)
        if self.output_format not in ("csv", "json"):
            raise ConfigError([f"unknown output format {self.output_format!r}"])

    def resolved_config(self):
        cfg = resolve_config(overrides=self.config_overrides)
        if self.forced_orthogonal and cfg.num_users > cfg.training_len:
            raise ConfigError([
                f"forced orthogonal pilots need num_users <= training_len "
                f"(got K={cfg.num_users}, tau_up={cfg.training_len})"
            ])
        return cfg

    def effective_plan(self):
        """The trial plan with the Monte Carlo subset the figure requires."""
        if self.figure in (Figure.UI_GAP, Figure.RATE_CDF):
            mc = self.trial_plan.mc_snapshots
            return dataclasses.replace(self.trial_plan, mc_snapshots=None if not mc else mc)
        return dataclasses.replace(self.trial_plan, mc_snapshots=0)


@dataclass
class ExperimentResult:
    metadata: dict
    records: list

    def samples(self, scheme, quantity):
        return np.array([r[5] for r in self.records if r[3] == scheme and r[4] == quantity])


def _user_records(records, snap_id, scheme, quantity, values):
    for k, v in enumerate(values):
        records.append((snap_id, k, None, scheme, quantity, float(v)))


def _pair_records(records, snap_id, scheme, quantity, matrix):
    K = matrix.shape[0]
    for k in range(K):
        for j in range(K):
            if k != j:
                records.append((snap_id, k, j, scheme, quantity, float(matrix[k, j])))


def _summary(records, percentiles=(5, 50)):
    groups = {}
    for r in records:
        groups.setdefault((r[3], r[4]), []).append(r[5])
    out = {}
    for (scheme, quantity), vals in sorted(groups.items()):
        arr = np.asarray(vals)
        entry = {"count": int(arr.size)}
        for p in percentiles:
            entry["median" if p == 50 else f"p{p}"] = float(np.percentile(arr, p))
        out.setdefault(scheme, {})[quantity] = entry
    return out


def _run_ui_gap(spec, cfg, plan, workers):
    trials = run_trials(cfg, plan, schemes=(Scheme.NORMALIZED,), mc_schemes=(Scheme.NORMALIZED,),
                        forced_orthogonal=spec.forced_orthogonal, workers=workers)
    records = []
    shared_ratios = []
    for res in trials.snapshots:
        if Scheme.NORMALIZED not in res.mc:
            continue
        gap = mc_ui_approximation_gap(res.snapshot, res.allocs[Scheme.NORMALIZED],
                                      estimate=res.mc[Scheme.NORMALIZED])
        i = res.index
        _pair_records(records, i, NORMALIZED, "ui_actual", gap.actual)
        _pair_records(records, i, NORMALIZED, "ui_approx", gap.approx)
        _pair_records(records, i, NORMALIZED, "ui_gap", gap.gap)
        _pair_records(records, i, NORMALIZED, "ui_actual_stderr", gap.stderr)
        _pair_records(records, i, NORMALIZED, "pilot_overlap", res.snapshot.pilots.gram_sq)
        actual, _, g = gap.pairs(shared_only=True)
        shared_ratios.extend((g / actual).tolist())
    extra = {}
    if shared_ratios:
        extra["shared_pilot_gap_ratio_median"] = float(np.median(shared_ratios))
        extra["shared_pilot_pairs"] = len(shared_ratios)
    return records, extra


def _run_term_comparison(spec, cfg, plan, workers):
    trials = run_trials(cfg, plan, forced_orthogonal=spec.forced_orthogonal, workers=workers)
    records = []
    for res in trials.snapshots:
        st, lt = res.closed[Scheme.NORMALIZED], res.closed[Scheme.CONVENTIONAL]
        for name, br in ((NORMALIZED, st), (CONVENTIONAL, lt)):
            _user_records(records, res.index, name, "ds", br.ds_sq)
            _user_records(records, res.index, name, "bu", br.bu)
            _user_records(records, res.index, name, "ui", br.ui_total)
        _user_records(records, res.index, "ratio", "ds", st.ds_sq / lt.ds_sq)
        _user_records(records, res.index, "ratio", "bu", st.bu / lt.bu)
        _user_records(records, res.index, "ratio", "ui", st.ui_total / lt.ui_total)
    return records, {}


def _rate_records(records, res, name, br, spec, cfg, full=False):
    if full:
        _user_records(records, res.index, name, "ds", br.ds_sq)
        _user_records(records, res.index, name, "bu", br.bu)
        _user_records(records, res.index, name, "ui", br.ui_total)
        _user_records(records, res.index, name, "sinr", br.sinr)
    _user_records(records, res.index, name, "rate", br.rate)
    if spec.overhead_adjusted:
        scale = 1.0 - cfg.training_len / cfg.coherence_len
        _user_records(records, res.index, name, "rate_overhead_adjusted", scale * br.rate)


def _run_rate_cdf(spec, cfg, plan, workers):
    trials = run_trials(cfg, plan, mc_schemes=(Scheme.NORMALIZED,),
                        forced_orthogonal=spec.forced_orthogonal, workers=workers)
    records = []
    for res in trials.snapshots:
        _rate_records(records, res, NORMALIZED, res.closed[Scheme.NORMALIZED], spec, cfg)
        if Scheme.NORMALIZED in res.mc:
            _rate_records(records, res, NORMALIZED_MC, res.mc[Scheme.NORMALIZED], spec, cfg)
        _rate_records(records, res, CONVENTIONAL, res.closed[Scheme.CONVENTIONAL], spec, cfg)
    return records, {}


def _run_custom(spec, cfg, plan, workers):
    trials = run_trials(cfg, plan, forced_orthogonal=spec.forced_orthogonal, workers=workers)
    records = []
    for res in trials.snapshots:
        for scheme in (Scheme.NORMALIZED, Scheme.CONVENTIONAL):
            _rate_records(records, res, scheme.value, res.closed[scheme], spec, cfg, full=True)
    return records, {}


_RUNNERS = {
    Figure.UI_GAP: _run_ui_gap,
    Figure.TERM_COMPARISON: _run_term_comparison,
    Figure.RATE_CDF: _run_rate_cdf,
    Figure.CUSTOM: _run_custom,
}


def build_metadata(spec, cfg, plan, records, extra):
    return {
        "generator": f"cfmimo {__version__}",
        "figure": spec.figure.value,
        "config": config_to_dict(cfg),
        "plan": dataclasses.asdict(plan),
        "options": {
            "cdf": spec.cdf,
            "forced_orthogonal": spec.forced_orthogonal,
            "overhead_adjusted": spec.overhead_adjusted,
        },
        "units": "rates in bit/s/Hz per channel use; terms in noise-normalized power",
        "summary": {**_summary(records), **extra},
    }


def run_experiment(spec, workers=1):
    """Run ``spec`` in memory (no file written)."""
    cfg = spec.resolved_config()
    plan = spec.effective_plan()
    records, extra = _RUNNERS[spec.figure](spec, cfg, plan, workers)
    return ExperimentResult(build_metadata(spec, cfg, plan, records, extra), records)


def _timestamp():
    # SOURCE_DATE_EPOCH pins the stamp for byte-reproducible files
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.isoformat(timespec="seconds")


def run_figure(spec, workers=1, timestamp=None):
    """Run ``spec`` and write its output file; returns the result and the text."""
    result = run_experiment(spec, workers)
    stamp = timestamp or _timestamp()
    text = render(result, spec.output_format, spec.cdf, stamp)
    if spec.output_path is not None:
        path = Path(spec.output_path)
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    return result, text


# --------------------------------------------------------------------------
# emitters
# --------------------------------------------------------------------------

def cdf_rows(records):
    groups = {}
    for r in records:
        groups.setdefault((r[3], r[4]), []).append(r[5])
    rows = []
    for (scheme, quantity), vals in sorted(groups.items()):
        for value, prob in empirical_cdf(vals):
            rows.append((scheme, quantity, float(value), float(prob)))
    return rows


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for key, value in obj.items():
            _flatten(f"{prefix}.{key}" if prefix else key, value, out)
    else:
        out.append((prefix, obj))


def render(result, fmt="csv", cdf=False, timestamp=""):
    columns = CDF_COLUMNS if cdf else COLUMNS
    rows = cdf_rows(result.records) if cdf else result.records
    if fmt == "json":
        doc = {"timestamp": timestamp, **result.metadata, "columns": list(columns),
               "records": [list(r) for r in rows]}
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# timestamp={timestamp}\n")
    flat = []
    _flatten("", result.metadata, flat)
    for key, value in flat:
        buf.write(f"# {key}={json.dumps(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def _unflatten(pairs):
    out = {}
    for key, value in pairs:
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return out


def _parse_cell(column, text):
    if column in ("snapshot_id", "user_id", "peer_id"):
        return int(text) if text != "" else None
    if column in ("value", "probability"):
        return float(text)
    return text


def parse_output(text):
    """Parse an emitted file back into ``(metadata, columns, rows)``."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        columns = doc.pop("columns")
        rows = [tuple(r) for r in doc.pop("records")]
        return doc, columns, rows
    meta_pairs, body = [], []
    for line in text.splitlines():
        if line.startswith("# "):
            key, value = line[2:].split("=", 1)
            meta_pairs.append((key, value if key == "timestamp" else json.loads(value)))
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [tuple(_parse_cell(c, v) for c, v in zip(columns, row)) for row in reader]
    return _unflatten(meta_pairs), columns, rows


def read_output(path):
    return parse_output(Path(path).read_text())


def spec_from_metadata(meta, output_path=None, output_format="csv"):
    """Rebuild the :class:`ExperimentSpec` that produced a file."""
    config = {k: v for k, v in meta["config"].items()}
    opts = meta.get("options", {})
    return ExperimentSpec(
        figure=meta["figure"],
        config_overrides=config,
        trial_plan=TrialPlan(**meta["plan"]),
        output_path=output_path,
        output_format=output_format,
        cdf=bool(opts.get("cdf", False)),
        forced_orthogonal=bool(opts.get("forced_orthogonal", False)),
        overhead_adjusted=bool(opts.get("overhead_adjusted", False)),
    )

