"""Plain-text run reports and trace CSV input/output.

Reports are flat `key = value` lines in a stable order so byte comparison
works across runs (the wall-time line is the only nondeterministic field).
"""

from __future__ import annotations


import numpy as np

from .errors import ConfigError

TRACE_HEADER = "t,E,Ew,D,residual,l2_u,l2_ut,h1_ut"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def write_trace_csv(path, record):
    cols = [
        record.times, record.E, record.Ew, record.D, record.residual,
        record.l2_u, record.l2_ut, record.h1_ut,
    ]
    with open(path, "w", encoding="utf-8") as f:
        f.write(TRACE_HEADER + "\n")
        for row in zip(*cols):
            f.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_trace_csv(path):
    """Read a trace CSV back as a dict of column arrays.

    Accepts the full trace schema or any CSV with at least t and E columns.
    """
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        names = [c.strip() for c in header.split(",")]
        if "t" not in names or "E" not in names:
            raise ConfigError(f"malformed trace CSV {path}: needs t and E columns")
        rows = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            toks = line.split(",")
            if len(toks) != len(names):
                raise ConfigError(f"malformed trace CSV {path}: line {lineno}")
            try:
                rows.append([float(tok) for tok in toks])
            except ValueError:
                raise ConfigError(f"malformed trace CSV {path}: line {lineno}") from None
    if not rows:
        raise ConfigError(f"malformed trace CSV {path}: no data rows")
    data = np.asarray(rows)
    return {name: data[:, k] for k, name in enumerate(names)}


def law_report_items(rep, prefix="law."):
    return [(prefix + k, v) for k, v in rep.as_items()]


def budget_items(rep, prefix="budget."):
    items = [(prefix + k, v) for k, v in rep.as_dict().items()]
    items.append((prefix + "p", rep.p))
    items.append((prefix + "horizon", rep.horizon))
    items.append((prefix + "warnings", "; ".join(rep.truncation_warnings) or "none"))
    return items


def fit_items(fit, prefix="fit."):
    return [
        (prefix + "sigma_hat", fit.sigma_hat),
        (prefix + "amplitude", fit.amplitude),
        (prefix + "r2", fit.r2),
        (prefix + "window", fit.window),
        (prefix + "n_used", fit.n_used),
    ]


def iss_items(rep, prefix="iss."):
    items = [
        (prefix + "sigma_hat", rep.sigma_hat),
        (prefix + "r2", rep.r2),
        (prefix + "fit_window", rep.fit_window),
        (prefix + "E0", rep.E0),
        (prefix + "decays_exponentially", rep.decays_exponentially),
        (prefix + "remains_bounded", rep.remains_bounded),
        (prefix + "gain_monotone", rep.gain_monotone),
    ]
    for i, (s, e) in enumerate(zip(rep.scales, rep.E_inf)):
        items.append((f"{prefix}scale_{i}", s))
        items.append((f"{prefix}Einf_{i}", e))
    for i, b in enumerate(rep.budgets):
        items.extend((f"{prefix}s{i}.{k}", v) for k, v in b.as_dict().items())
    return items


def multiplier_items(diag, prefix="multiplier."):
    return [
        (prefix + "S", diag.S),
        (prefix + "T", diag.T),
        (prefix + "T1", diag.T1),
        (prefix + "T2", diag.T2),
        (prefix + "T3", diag.T3),
        (prefix + "T4", diag.T4),
        (prefix + "T5", diag.T5),
        (prefix + "int_E", diag.int_E),
        (prefix + "rho", diag.rho),
        (prefix + "slack_constant", diag.slack_constant),
    ]


def geometry_note(cfg):
    if cfg.values["geometry.shape"] == "rectangle":
        return "rectangle corners are a Lipschitz desk-scale stand-in for a smooth domain"
    return "disk boundary handled by node masking (first-order boundary accuracy)"


def write_report(path, items):
    with open(path, "w", encoding="utf-8") as f:
        for key, value in items:
            f.write(f"{key} = {_fmt(value)}\n")
