"""Print the headline columns of result CSVs as plain tables."""

import argparse

from qsglab.results import read_csv

COLUMNS = {
    "scaling": ["kind", "L", "beta", "var_psi", "var_psi_stderr", "bound_free", "duhamel_dm",
                "bound_delta", "duhamel_dh", "bound_deltah", "slope", "slope_ci_high"],
    "gg": ["L", "beta", "f", "bracket", "probe", "probe_stderr", "residual"],
    "classical": ["L", "beta", "two_v_Delta", "three_v_delta", "six_v_mean", "gap_Delta_delta",
                  "gap_delta_mean", "gap_Delta_mean"],
    "rsb": ["kind", "L", "J0_0", "J1_0", "E_R", "E_R_stderr", "var_delta", "var_Delta",
            "decoupling_error"],
}


def fmt(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return "" if value is None else str(value)


def summarize(path):
    rows = read_csv(path)
    if not rows:
        return
    cols = [c for c in COLUMNS[rows[0]["experiment"]] if c in rows[0]]
    table = [cols] + [[fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    print(f"== {path} (config {rows[0]['config_hash']}, seed {rows[0]['seed']})")
    for row in table:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    print()


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("paths", nargs="+", help="result CSV files")
    for path in parser.parse_args().paths:
        summarize(path)
