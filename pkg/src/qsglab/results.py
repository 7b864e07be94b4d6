"""CSV / JSONL persistence for experiment records."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

SCHEMA_VERSION = 1

COLUMN_DOCS = {
    "schema_version": "record schema version",
    "experiment": "scaling | gg | classical | rsb",
    "version": "package version that produced the record",
    "config_hash": "sha256 prefix of the canonical run configuration",
    "config": "canonical JSON of the run configuration",
    "seed": "master seed of the disorder streams",
    "model": "model preset name",
    "sign": "global sign applied to the Hamiltonian",
    "boundary": "lattice boundary condition",
    "L": "linear lattice size",
    "volume": "number of sites |Lambda_L|",
    "beta": "inverse temperature",
    "term": "term label a of the observable",
    "disorder_mode": "quadrature(order) or mc",
    "n_samples": "disorder samples (MC) or quadrature nodes",
    "kind": "record type: point | fit | gg | classical | table_L_first | table_coupling_first",
    "var_psi": "E(psi_L - E psi_L)^2, psi_L = log Z / |Lambda|",
    "var_m_Delta": "E<(m - E<m>)^2>",
    "var_m_delta": "E<(m - <m>)^2>",
    "duhamel_dm": "E(dm, dm)_D with dm = m - <m>",
    "var_h_Delta": "E<(h - E<h>)^2>",
    "var_h_delta": "E<(h - <h>)^2>",
    "duhamel_dh": "E(dh, dh)_D with dh = h - <h>",
    "bound_free": "variance bound sum_a (beta J1 K)^2 n_a / |Lambda| over disordered terms",
    "bound_delta": "K / |beta J1| sqrt(1 / (n_a |Lambda|))",
    "bound_deltah": "K / |beta J1| (sqrt(6 / (n_a |Lambda|)) + 1 / (n_a |Lambda|))",
    "var_psi_within_bound": "var_psi <= bound_free + 4 stderr",
    "duhamel_dm_within_bound": "duhamel_dm <= bound_delta + 4 stderr",
    "duhamel_dh_within_bound": "duhamel_dh <= bound_deltah + 4 stderr",
    "quantity": "fitted quantity",
    "slope": "weighted least-squares slope of log quantity vs log |Lambda|",
    "intercept": "intercept of the log-log fit",
    "slope_stderr": "standard error of the slope",
    "slope_ci_low": "slope - 1.96 stderr",
    "slope_ci_high": "slope + 1.96 stderr",
    "n_points": "L points in the fit",
    "f": "replica monomial f",
    "n_replicas": "replica count n of the identity",
    "J1_eff": "effective coupling -sign * J1 of the observable term",
    "duhamel_sum": "sum_alpha E(R_{alpha,n+1}, f)_D",
    "coupling_term": "n E<R_{1,n+1} f>",
    "self_overlap": "E(R_11)_D",
    "overlap_12": "E<R_12>",
    "f_mean": "E<f>",
    "h_mean": "E<h>",
    "disconnected": "(E(R_11)_D - E<R_12>) E<f>",
    "bracket": "duhamel_sum - coupling_term - disconnected",
    "probe": "E<h f> - E<h> E<f>",
    "abs_probe": "|probe|",
    "residual": "probe / (beta J1_eff) - bracket (probe when beta J1_eff = 0)",
    "probe_stderr": "jackknife stderr of probe (0 under quadrature)",
    "bracket_stderr": "jackknife stderr of bracket (0 under quadrature)",
    "v_Delta": "E<(R - E<R>)^2>",
    "v_delta": "E<(R - <R>)^2>",
    "v_mean": "E(<R> - E<R>)^2",
    "gap_Delta_delta": "2 v_Delta - 3 v_delta",
    "gap_delta_mean": "3 v_delta - 6 v_mean",
    "gap_Delta_mean": "2 v_Delta - 6 v_mean",
    "two_v_Delta": "2 v_Delta",
    "three_v_delta": "3 v_delta",
    "six_v_mean": "6 v_mean",
    "decomposition_error": "v_Delta - v_delta - v_mean",
    "J0_0": "inter-replica uniform coupling",
    "J1_0": "inter-replica disorder strength",
    "E_R": "E<R_12> in the coupled two-replica state",
    "E_R2": "E<R_12^2>",
    "var_delta": "E<(R_12 - <R_12>)^2>",
    "var_Delta": "E<(R_12 - E<R_12>)^2>",
    "m0_minus_R_max": "max over samples of |<m0> - <R_12>|",
    "m0_operator_gap": "max entry of |m0 - R_12| as operators",
    "decoupling_error": "max |coupled - factorized| for <R_12>, <R_12^2> at zero coupling",
    "sample_var_Delta_mean": "sample mean of <(R_12 - E<R_12>)^2> with the empirical E<R_12>",
}


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return _clean(value.item())
    return value


def normalize_record(record: dict) -> dict:
    out = {"schema_version": SCHEMA_VERSION}
    out.update({k: _clean(v) for k, v in record.items()})
    return out


def _columns(records):
    cols: dict[str, None] = {}
    for r in records:
        for k in r:
            cols.setdefault(k, None)
    return list(cols)


def _doc(column: str) -> str:
    if column.endswith("_stderr") and column[:-7] in COLUMN_DOCS:
        return f"standard error of {column[:-7]}"
    return COLUMN_DOCS.get(column, "")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv(records: list[dict]) -> str:
    records = [normalize_record(r) for r in records]
    cols = _columns(records)
    buf = io.StringIO()
    buf.write(f"# qsglab results, schema_version={SCHEMA_VERSION}\n")
    for c in cols:
        buf.write(f"# {c}: {_doc(c)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in records:
        writer.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def to_jsonl(records: list[dict]) -> str:
    lines = [json.dumps(normalize_record(r), allow_nan=False) for r in records]
    return "".join(line + "\n" for line in lines)


def emit_results(records: list[dict], fmt: str, path) -> Path:
    """Write records as CSV (header comment + header row) or JSONL."""
    if fmt == "csv":
        text = to_csv(records)
    elif fmt == "jsonl":
        text = to_jsonl(records)
    else:
        raise ValueError(f"unknown output format {fmt!r}; expected csv or jsonl")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def read_csv(path) -> list[dict]:
    """Parse a results CSV back into records with numbers restored."""
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    return [{k: _parse_cell(v) for k, v in row.items()} for row in reader]


def _parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text
