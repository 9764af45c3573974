"""Command-line front end.

A run reads one YAML scenario, dispatches on its ``command`` and writes either
a CSV table or a JSON tree. See ``docs/scenario.md`` for the schema.

Exit codes: 0 success, 2 parse/validation error, 3 numerical failure,
4 infeasible optimisation. Failures print a one-line JSON error record on
stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import re
import sys
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__
from .distributions import (
    LogNormalDist,
    MarketTerms,
    MomentSpec,
    from_expected_return,
    lognormal_pdf,
    maxent_fit,
    maxent_moments,
)
from .errors import InfeasibleError, InvalidParameterError, PricingError
from .hedging import hedge_report
from .implied_vol import skew_curve
from .portfolio import Instrument, RiskLimits, optimize, portfolio_values
from .pricing import PayoffKind, PayoffSpec, bs_price, expected_payoff_price
from .uncertain_vol import VolBelief, marginal_price, price_curve

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

COMMANDS = ("price", "skew", "curve", "maxent-fit", "greeks", "optimize")
_CSV_DEFAULT = {"skew", "curve", "maxent-fit"}


class ScenarioError(Exception):
    """Parse or validation failure, carrying where it happened."""

    def __init__(self, message: str, field: Optional[str] = None, line=None, column=None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 reads "1e-5" (no dot) as a string; accept every decimal float form
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^[-+]?(?:[0-9][0-9_]*\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[0-9][0-9_]*[eE][-+]?[0-9]+
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |\.(?:inf|Inf|INF)|[-+]\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def parse_scenario(text: str) -> dict:
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ScenarioError(
            f"{exc.problem or exc.context}",
            line=mark.line + 1 if mark else None,
            column=mark.column + 1 if mark else None,
        ) from None
    except yaml.YAMLError as exc:
        raise ScenarioError(str(exc)) from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping at the top level")
    return doc


# ---------------------------------------------------------------------------
# field access with paths
# ---------------------------------------------------------------------------


def _get(block: dict, key: str, path: str, default: Any = ...):
    if not isinstance(block, dict):
        raise ScenarioError(f"'{path}' must be a mapping", field=path)
    if key not in block:
        if default is ...:
            raise ScenarioError(f"missing required field '{_join(path, key)}'", _join(path, key))
        return default
    return block[key]


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _number(block: dict, key: str, path: str, default: Any = ...) -> float:
    value = _get(block, key, path, default)
    where = _join(path, key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"'{where}' must be a number, got {value!r}", where)
    return float(value)


def _integer(block: dict, key: str, path: str, default: Any = ...) -> int:
    value = _get(block, key, path, default)
    where = _join(path, key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"'{where}' must be an integer, got {value!r}", where)
    return value


class _build:
    """Context manager turning model-level validation errors into field errors."""

    def __init__(self, field: str):
        self.field = field

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None and issubclass(exc_type, InvalidParameterError):
            raise ScenarioError(f"'{self.field}': {exc}", self.field) from exc
        return False


def _terms(doc: dict) -> MarketTerms:
    block = _get(doc, "terms", "")
    with _build("terms"):
        return MarketTerms(
            x0=_number(block, "x0", "terms"),
            r=_number(block, "r", "terms"),
            t=_number(block, "t", "terms"),
        )


def _payoff(block: Any, path: str) -> PayoffSpec:
    kind = _get(block, "kind", path)
    try:
        kind = PayoffKind(kind)
    except ValueError:
        choices = ", ".join(k.value for k in PayoffKind)
        raise ScenarioError(f"'{path}.kind' must be one of {choices}", f"{path}.kind") from None
    strike = _number(block, "strike", path)
    with _build(f"{path}.strike"):
        return PayoffSpec(kind, strike)


def _kind(doc: dict, default: Optional[str]) -> Optional[PayoffKind]:
    value = doc.get("kind", default)
    if value is None:
        return None
    try:
        return PayoffKind(value)
    except ValueError:
        raise ScenarioError(f"'kind' must be one of call, put, got {value!r}", "kind") from None


def _belief(doc: dict) -> VolBelief:
    block = _get(doc, "belief", "")
    s_ln = _number(block, "s_ln", "belief")
    n_nodes = _integer(block, "n_nodes", "belief", 32)
    with _build("belief"):
        if "median_sigma" in block:
            if "mu_ln" in block:
                raise ScenarioError("give either 'belief.mu_ln' or 'belief.median_sigma'", "belief")
            return VolBelief.from_median(_number(block, "median_sigma", "belief"), s_ln, n_nodes)
        return VolBelief(_number(block, "mu_ln", "belief"), s_ln, n_nodes)


def _moments(block: Any, path: str, terms: MarketTerms) -> MomentSpec:
    m1 = _number(block, "m1_target", path, terms.forward)
    with _build(path):
        if "stdev" in block:
            return MomentSpec.from_shape(
                m1,
                _number(block, "stdev", path),
                _number(block, "skewness", path),
                _number(block, "kurtosis", path),
            )
        return MomentSpec(
            m1,
            _number(block, "variance", path),
            _number(block, "third", path),
            _number(block, "fourth", path),
        )


def _strikes(doc: dict, terms: MarketTerms) -> list[float]:
    spec = _get(doc, "strikes", "")
    if isinstance(spec, list):
        values = []
        for i, v in enumerate(spec):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ScenarioError(f"'strikes[{i}]' must be a number", f"strikes[{i}]")
            values.append(float(v))
        scale = 1.0
    else:
        start = _number(spec, "start", "strikes")
        stop = _number(spec, "stop", "strikes")
        num = _integer(spec, "num", "strikes")
        if num < 1:
            raise ScenarioError("'strikes.num' must be >= 1", "strikes.num")
        values = [float(v) for v in np.linspace(start, stop, num)]
        relative = _get(spec, "relative_to", "strikes", "absolute")
        scales = {"absolute": 1.0, "spot": terms.x0, "forward": terms.forward}
        if relative not in scales:
            raise ScenarioError(
                "'strikes.relative_to' must be absolute, spot or forward", "strikes.relative_to"
            )
        scale = scales[relative]
    strikes = [v * scale for v in values]
    for i, k in enumerate(strikes):
        if not (math.isfinite(k) and k > 0):
            raise ScenarioError(f"strike {k!r} must be > 0", f"strikes[{i}]")
    if any(b < a for a, b in zip(strikes, strikes[1:])):
        raise ScenarioError("strikes must be sorted ascending", "strikes")
    return strikes


def _model_key(doc: dict, allowed: tuple[str, ...]) -> str:
    present = [k for k in allowed if k in doc]
    if len(present) != 1:
        raise ScenarioError(
            f"exactly one of {', '.join(allowed)} is required, got {present or 'none'}",
            "/".join(allowed),
        )
    return present[0]


def _sigma(doc: dict, key: str = "sigma", path: str = "") -> float:
    sigma = _number(doc, key, path)
    if not sigma > 0:
        raise ScenarioError(f"'{_join(path, key)}' must be > 0", _join(path, key))
    return sigma


# ---------------------------------------------------------------------------
# commands: each returns ("table", header, rows) or ("tree", mapping)
# ---------------------------------------------------------------------------


def _cmd_price(doc: dict):
    terms = _terms(doc)
    payoff = _payoff(_get(doc, "payoff", ""), "payoff")
    model = _model_key(doc, ("sigma", "belief", "moments"))
    if model == "sigma":
        value = bs_price(terms, _sigma(doc), payoff)
    elif model == "belief":
        value = marginal_price(terms, payoff, _belief(doc))
    else:
        with _build("moments"):
            dist = maxent_fit(_moments(doc["moments"], "moments", terms), terms.x0)
        value = expected_payoff_price(dist, payoff, terms)
    return "tree", {
        "model": model,
        "payoff": {"kind": payoff.kind.value, "strike": payoff.strike},
        "value": value,
    }


def _cmd_curve(doc: dict):
    terms = _terms(doc)
    belief = _belief(doc)
    kind = _kind(doc, "put")
    rows = price_curve(terms, belief, _strikes(doc, terms), kind)
    return (
        "table",
        ["strike", "certain_price", "marginal_price"],
        [[r.strike, r.certain_price, r.marginal_price] for r in rows],
    )


def _cmd_skew(doc: dict):
    terms = _terms(doc)
    belief = _belief(doc)
    kind = _kind(doc, None)
    if kind is not None and kind.is_binary:
        raise ScenarioError("'kind' for a skew must be call or put", "kind")
    points = skew_curve(terms, belief, _strikes(doc, terms), kind)
    forward = terms.forward
    return (
        "table",
        ["strike", "moneyness", "implied_vol", "price", "instrument"],
        [[p.strike, p.strike / forward, p.implied_sigma, p.price, p.kind.value] for p in points],
    )


def _cmd_maxent(doc: dict):
    terms = _terms(doc)
    spec = _moments(_get(doc, "moments", ""), "moments", terms)
    with _build("moments"):
        dist = maxent_fit(spec, terms.x0)
    fitted = maxent_moments(dist)
    tree = {
        "lambdas": list(dist.lambdas),
        "log_norm": dist.log_norm,
        "domain": list(dist.domain),
        "target": vars(spec),
        "fitted": vars(fitted),
    }
    grid = doc.get("grid", {})
    num = _integer(grid, "num", "grid", 201)
    if num < 2:
        raise ScenarioError("'grid.num' must be >= 2", "grid.num")
    lo, hi = dist.domain
    width = _number(grid, "half_width_sd", "grid", 5.0) * math.sqrt(spec.variance)
    centre = 0.5 * (lo + hi)
    ys = np.linspace(max(lo, centre - width), min(hi, centre + width), num)
    xs = terms.x0 * np.exp(ys)
    # lognormal with the same log-variance and mean price, for comparison
    ref = LogNormalDist(math.log(spec.m1_target) - 0.5 * spec.variance, math.sqrt(spec.variance))
    rows = [
        [float(x), float(y), float(dist.pdf(x)), float(lognormal_pdf(ref, x))]
        for y, x in zip(ys, xs)
    ]
    return "table", ["price", "log_return", "maxent_pdf", "lognormal_pdf"], rows, tree


def _cmd_greeks(doc: dict):
    terms = _terms(doc)
    payoff = _payoff(_get(doc, "payoff", ""), "payoff")
    model = _model_key(doc, ("sigma", "belief"))
    if model == "sigma":
        report = hedge_report(terms, payoff, sigma=_sigma(doc))
    else:
        report = hedge_report(terms, payoff, belief=_belief(doc))
    tree = {
        "model": model,
        "value": report.value,
        "dVdS": report.dVdS,
        "hedge_units": report.hedge_units,
    }
    if report.belief_sensitivities is not None:
        tree["dV_dmu_ln"], tree["dV_ds_ln"] = report.belief_sensitivities
    return "tree", tree


def _cmd_optimize(doc: dict):
    terms = _terms(doc)
    subj_block = _get(doc, "subjective", "")
    key = _model_key(subj_block, ("sigma", "moments"))
    if key == "sigma":
        subjective = from_expected_return(terms, _sigma(subj_block, "sigma", "subjective"))
    else:
        with _build("subjective.moments"):
            subjective = maxent_fit(
                _moments(subj_block["moments"], "subjective.moments", terms), terms.x0
            )
    raw = _get(doc, "instruments", "")
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("'instruments' must be a non-empty list", "instruments")
    instruments = []
    for i, block in enumerate(raw):
        path = f"instruments[{i}]"
        payoff = _payoff(block, path)
        if "market_value" in block:
            market = _number(block, "market_value", path)
        else:
            market = bs_price(terms, _sigma(block, "market_sigma", path), payoff)
        with _build(path):
            instruments.append(
                Instrument(payoff, market, expected_payoff_price(subjective, payoff, terms))
            )
    limits_block = _get(doc, "limits", "")
    with _build("limits"):
        limits = RiskLimits(
            y=_number(limits_block, "y", "limits"), z=_number(limits_block, "z", "limits")
        )
    bounds_raw = _get(doc, "bounds", "")
    if not isinstance(bounds_raw, list) or len(bounds_raw) != len(instruments):
        raise ScenarioError("'bounds' needs one [lo, hi] pair per instrument", "bounds")
    bounds = []
    for i, pair in enumerate(bounds_raw):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in pair)
        ):
            raise ScenarioError(f"'bounds[{i}]' must be [lo, hi]", f"bounds[{i}]")
        bounds.append((float(pair[0]), float(pair[1])))
    resolution = _integer(doc, "resolution", "", 101)
    refine = _integer(doc, "refine", "", 0)
    finance = doc.get("finance_cost", True)
    if not isinstance(finance, bool):
        raise ScenarioError("'finance_cost' must be true or false", "finance_cost")
    with _build("bounds"):
        alloc = optimize(
            instruments, subjective, terms, limits, bounds, resolution, refine, finance
        )
    pi, pi_m, xi = portfolio_values(alloc.n, instruments)
    return "tree", {
        "n": list(alloc.n),
        "objective": alloc.objective,
        "loss_prob": alloc.loss_prob,
        "exp_shortfall": alloc.exp_shortfall,
        "portfolio_value": pi,
        "market_value": pi_m,
        "instruments": [
            {
                "kind": inst.payoff.kind.value,
                "strike": inst.payoff.strike,
                "market_value": inst.market_value,
                "subjective_value": inst.subjective_value,
            }
            for inst in instruments
        ],
    }


_DISPATCH = {
    "price": _cmd_price,
    "curve": _cmd_curve,
    "skew": _cmd_skew,
    "maxent-fit": _cmd_maxent,
    "greeks": _cmd_greeks,
    "optimize": _cmd_optimize,
}


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    return format(float(value), ".12g")


def render_csv(header, rows, comment: str) -> str:
    out = io.StringIO()
    out.write(f"# {comment}\n")
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(_cell(v) for v in row) + "\n")
    return out.getvalue()


def _flatten(tree, prefix=""):
    if isinstance(tree, dict):
        for k, v in tree.items():
            yield from _flatten(v, _join(prefix, k))
    elif isinstance(tree, list):
        for i, v in enumerate(tree):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, tree


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def render_tree(tree: dict, meta: dict) -> str:
    return json.dumps({"meta": meta, "result": _plain(tree)}, indent=2, sort_keys=True) + "\n"


def run(scenario_text: str, fmt: Optional[str] = None) -> tuple[str, dict]:
    """Execute a scenario and return (rendered output, scenario mapping)."""
    doc = parse_scenario(scenario_text)
    command = _get(doc, "command", "")
    if command not in _DISPATCH:
        raise ScenarioError(f"'command' must be one of {', '.join(COMMANDS)}", "command")
    output = doc.get("output", {}) or {}
    fmt = fmt or output.get("format") or ("csv" if command in _CSV_DEFAULT else "tree")
    if fmt not in ("csv", "tree"):
        raise ScenarioError("'output.format' must be csv or tree", "output.format")

    digest = hashlib.sha256(scenario_text.encode("utf-8")).hexdigest()
    meta = {"tool": "beliefprice", "version": __version__, "scenario_sha256": digest}
    comment = f"beliefprice {__version__} command={command} scenario_sha256={digest}"

    result = _DISPATCH[command](doc)
    if result[0] == "table":
        header, rows = result[1], result[2]
        if fmt == "csv":
            return render_csv(header, rows, comment), doc
        tree = result[3] if len(result) > 3 else {}
        tree = {**tree, "columns": header, "rows": [list(r) for r in rows]}
        return render_tree(tree, meta), doc
    tree = result[1]
    if fmt == "tree":
        return render_tree(tree, meta), doc
    return render_csv(["key", "value"], list(_flatten(tree)), comment), doc


def _error_record(kind: str, exc: Exception, code: int, **extra) -> str:
    record = {"status": "error", "kind": kind, "exit_code": code, "message": str(exc)}
    record.update({k: v for k, v in extra.items() if v is not None})
    return json.dumps(record, sort_keys=True)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="beliefprice",
        description="Price, skew, hedge and size derivative positions from a scenario file.",
    )
    parser.add_argument("--scenario", required=True, help="path to a YAML scenario")
    parser.add_argument("--out", help="output path (default: scenario output.path or stdout)")
    parser.add_argument("--format", choices=("csv", "tree"), help="override the output format")
    parser.add_argument("--quiet", action="store_true", help="suppress progress messages")
    args = parser.parse_args(argv)

    try:
        with open(args.scenario, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(_error_record("io", exc, EXIT_INVALID), file=sys.stderr)
        return EXIT_INVALID

    try:
        rendered, doc = run(text, args.format)
    except ScenarioError as exc:
        kind = "parse" if exc.line is not None or exc.field is None else "validation"
        print(
            _error_record(kind, exc, EXIT_INVALID, field=exc.field, line=exc.line, column=exc.column),
            file=sys.stderr,
        )
        return EXIT_INVALID
    except InfeasibleError as exc:
        print(_error_record("infeasible", exc, EXIT_INFEASIBLE), file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidParameterError as exc:
        print(_error_record("validation", exc, EXIT_INVALID), file=sys.stderr)
        return EXIT_INVALID
    except (PricingError, ArithmeticError) as exc:
        print(_error_record("numerical", exc, EXIT_NUMERICAL), file=sys.stderr)
        return EXIT_NUMERICAL

    out_path = args.out or (doc.get("output") or {}).get("path")
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(rendered)
        if not args.quiet:
            print(f"wrote {out_path}", file=sys.stderr)
    else:
        sys.stdout.write(rendered)
    return EXIT_OK
