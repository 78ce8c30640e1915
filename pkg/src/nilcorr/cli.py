"""Command-line front end.

Every subcommand reads one JSON config document::

    {
      "schema_version": 1,
      "basis": {"b1": "sqrt(2)-1"},
      "<subcommand>": {...section...},
      "output": {"dir": "out"}
    }

Sections (all ``range`` entries are lists of "a..b" strings, one per
dimension, and may be overridden with ``--range``):

nilseq     {"function": NilFunction, "sequence": PolySequence, "x0": [Scalar...],
            "range": [...]}                                  -> nilseq.csv
gpoly      {"expr": "(mul ...)", "range": [...]}             -> gpoly.csv
           or {"approximate": {"m": 1, "alpha": "b1", "eps": 0.01}, "range": [...]}
                                                             -> gpoly.csv, gpoly.json
correlate  {"spec": CorrelationSpec, "range": [...]}         -> correlation.csv
decompose  {"spec": CorrelationSpec, "range": [...], "schedule": [...],
            "bases": {"count", "magnitude", "extra"}, "threshold": 0.05}
                                                             -> nil_part.csv, null_part.csv,
                                                                report.json
wiener     {"measure": TorusMeasure, "N": 1000, "range": [...]}
                                                             -> fourier.csv, atomic.csv,
                                                                residual.csv, report.json
density    {"sequence": {"fourier": TorusMeasure} | {"correlate": CorrelationSpec}
                        | {"decompose_null": CorrelationSpec},
            "schedule": [...], "mode": "abs", "threshold": 0.05, "bases": {...}}
                                                             -> report.json
selftest   {"samples": 200}                                  -> selftest.json

Exit codes: 0 success, 2 invalid input, 3 a null-part diagnostic failed or a
quadrature did not converge, 1 anything unexpected.  Failures print
{"code", "message", "location"} as one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError, NilcorrError, QuadratureNotConverged, ResidualNotNull
from .scalar import IrrationalBasis, Scalar

SCHEMA_VERSIONS = (1,)
SUBCOMMANDS = ("nilseq", "gpoly", "correlate", "decompose", "wiener", "density", "selftest")

# keys whose string values are exact scalars that may use basis symbols
_SCALAR_KEYS = {"alpha", "a", "element", "coords", "x0", "loc", "omega", "q0"}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_CONST_LITERAL = re.compile(r'\(const\s+"([^"]*)"\)')


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _symbols_in(text: str) -> list[str]:
    return _IDENT.findall(text)


def check_symbols(obj: Any, declared: set, path: str = "") -> None:
    """Raise ConfigError at the first scalar that names an undeclared symbol."""
    if isinstance(obj, Mapping):
        for k, v in obj.items():
            sub = f"{path}.{k}" if path else str(k)
            if k == "basis" and not path:
                continue
            if k == "terms" and isinstance(v, Mapping) and "q0" in obj:
                for mono in v:
                    for sym in str(mono).split("*"):
                        if sym not in declared:
                            raise ConfigError(f"symbol {sym!r} is not declared in basis",
                                              location=f"{sub}.{mono}")
                continue
            if k == "expr" and isinstance(v, str):
                for lit in _CONST_LITERAL.findall(v):
                    _check_text(lit, declared, sub)
                continue
            if k in _SCALAR_KEYS:
                _check_scalar_values(v, declared, sub)
            check_symbols(v, declared, sub)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            check_symbols(v, declared, f"{path}[{i}]")


def _check_scalar_values(v, declared, path):
    if isinstance(v, str):
        _check_text(v, declared, path)
    elif isinstance(v, list):
        for i, x in enumerate(v):
            _check_scalar_values(x, declared, f"{path}[{i}]")


def _check_text(text: str, declared: set, path: str) -> None:
    if text == "omega":
        return
    for sym in _symbols_in(text):
        if sym not in declared:
            raise ConfigError(f"symbol {sym!r} is not declared in basis", location=path)


def load_config(path: str | Path) -> tuple[dict, IrrationalBasis | None]:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", location=str(path)) from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} at line {e.lineno}",
                          location=str(path)) from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", location="")
    if cfg.get("schema_version") not in SCHEMA_VERSIONS:
        raise ConfigError(f"unrecognized schema_version {cfg.get('schema_version')!r}",
                          location="schema_version")
    basis_decl = cfg.get("basis") or {}
    if not isinstance(basis_decl, Mapping):
        raise ConfigError("basis must map symbols to witness expressions", location="basis")
    try:
        basis = IrrationalBasis(dict(basis_decl)) if basis_decl else None
    except ValueError as e:
        raise ConfigError(str(e), location="basis") from None
    check_symbols(cfg, set(basis_decl))
    return cfg, basis


def _section(cfg: Mapping, name: str) -> Mapping:
    sec = cfg.get(name)
    if sec is None:
        if name == "selftest":
            return {}
        raise ConfigError(f"config has no {name!r} section", location=name)
    if not isinstance(sec, Mapping):
        raise ConfigError("section must be an object", location=name)
    return sec


def parse_schedule(text: str | Sequence) -> tuple[int, ...]:
    if isinstance(text, str):
        parts = [p for p in text.split(",") if p.strip()]
    else:
        parts = list(text)
    try:
        sched = tuple(int(float(p)) if isinstance(p, str) else int(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid schedule {text!r}", location="schedule") from None
    if not sched or any(n < 1 for n in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ConfigError("schedule must be increasing positive integers", location="schedule")
    return sched


def _ranges(sec: Mapping, flags: argparse.Namespace, d: int, where: str) -> np.ndarray:
    from .sequences import box_points, parse_range

    spec = flags.range or sec.get("range")
    if spec is None:
        spec = ["0..100"] * d
    if isinstance(spec, str):
        spec = [spec]
    if len(spec) == 1 and d > 1:
        spec = list(spec) * d
    if len(spec) != d:
        raise ConfigError(f"expected {d} ranges, got {len(spec)}", location=f"{where}.range")
    try:
        bounds = [parse_range(s) for s in spec]
    except ValueError as e:
        raise ConfigError(str(e), location=f"{where}.range") from None
    return box_points([lo for lo, _ in bounds], [hi - lo for lo, hi in bounds])


def _out_dir(cfg: Mapping, flags) -> Path:
    out = flags.out or (cfg.get("output") or {}).get("dir") or "."
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _bases(sec: Mapping, flags):
    from .density import BaseSampler

    b = sec.get("bases") or {}
    seed = flags.seed if flags.seed is not None else int(b.get("seed", 0))
    return BaseSampler(int(b.get("count", 8)), int(b.get("magnitude", 10 ** 6)), seed,
                       tuple(tuple(x) if isinstance(x, list) else x for x in b.get("extra", ())))


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _wrap(where: str, fn, *args, **kw):
    """Turn parse-level ValueError/KeyError/TypeError into ConfigError."""
    try:
        return fn(*args, **kw)
    except NilcorrError:
        raise
    except KeyError as e:
        raise ConfigError(f"missing key {e.args[0]!r}", location=where) from None
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e), location=where) from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_nilseq(cfg, basis, flags) -> int:
    from .nilfunc import NilFunction, nilsequence
    from .nilgroup import GroupElement
    from .polyseq import PolySequence
    from .sequences import write_csv

    sec = _section(cfg, "nilseq")
    f = _wrap("nilseq.function", NilFunction.from_json, sec["function"])
    g = _wrap("nilseq.sequence", PolySequence.from_json, sec["sequence"], basis)
    x0 = None
    if "x0" in sec:
        x0 = _wrap("nilseq.x0", lambda: GroupElement(
            g.presentation, tuple(Scalar.from_json(c, basis) for c in sec["x0"])))
    h = _wrap("nilseq", nilsequence, f, g, x0)
    pts = _ranges(sec, flags, h.d, "nilseq")
    write_csv(_out_dir(cfg, flags) / "nilseq.csv", h, pts)
    return 0


def cmd_gpoly(cfg, basis, flags) -> int:
    from . import gpoly as gp
    from .sequences import SequenceHandle, write_csv

    sec = _section(cfg, "gpoly")
    out = _out_dir(cfg, flags)
    if "approximate" in sec:
        a = sec["approximate"]
        alpha = _wrap("gpoly.approximate.alpha", Scalar.from_json, a["alpha"], basis)
        m = int(a.get("m", 1))
        approx = gp.approximate_character(m, alpha, float(a.get("eps", 1e-2)))
        h = SequenceHandle(1, lambda n: approx.value(n[0]), 1 + approx.sup_err, name="approx")
        pts = _ranges(sec, flags, 1, "gpoly")
        write_csv(out / "gpoly.csv", h, pts)
        observed = gp.observed_error(approx, m, alpha, [int(x) for x in pts[:, 0]])
        _write_json(out / "gpoly.json", {
            "degree": approx.degree, "sup_err": approx.sup_err, "observed_err": observed,
            "re": gp.format_gpoly(approx.re), "im": gp.format_gpoly(approx.im)})
        return 0
    expr = _wrap("gpoly.expr", gp.parse_gpoly, sec["expr"], basis)
    d = max(1, gp.arity(expr))
    h = SequenceHandle(d, lambda n: float(gp.eval_gpoly(expr, n)), float("inf"), name="gpoly")
    write_csv(out / "gpoly.csv", h, _ranges(sec, flags, d, "gpoly"))
    return 0


def _spec(sec: Mapping, basis, where: str):
    from .corr import spec_from_json

    return _wrap(f"{where}.spec", spec_from_json, sec["spec"] if "spec" in sec else sec, basis)


def cmd_correlate(cfg, basis, flags) -> int:
    from .corr import correlate
    from .sequences import write_csv

    sec = _section(cfg, "correlate")
    spec = _spec(sec, basis, "correlate")
    h = correlate(spec)
    write_csv(_out_dir(cfg, flags) / "correlation.csv", h, _ranges(sec, flags, spec.d, "correlate"))
    return 0


def cmd_decompose(cfg, basis, flags) -> int:
    from .corr import decompose
    from .sequences import write_csv

    sec = _section(cfg, "decompose")
    spec = _spec(sec, basis, "decompose")
    schedule = parse_schedule(flags.schedule or sec.get("schedule", [100, 1000]))
    out = _out_dir(cfg, flags)
    pts = _ranges(sec, flags, spec.d, "decompose")
    dec = decompose(spec, schedule, _bases(sec, flags), strict=False)
    write_csv(out / "nil_part.csv", dec.nil_part, pts)
    write_csv(out / "null_part.csv", dec.null_part, pts)
    _write_json(out / "report.json", dec.to_json())
    if dec.report.verdict != "null":
        raise ResidualNotNull(f"null part verdict is {dec.report.verdict!r}",
                              location="decompose.schedule")
    return 0


def cmd_wiener(cfg, basis, flags) -> int:
    from .measures import TorusMeasure, fourier_sequence, wiener_average, wiener_decompose
    from .sequences import write_csv

    sec = _section(cfg, "wiener")
    mu = _wrap("wiener.measure", TorusMeasure.from_json, sec["measure"], basis)
    N = int(sec.get("N", 1000))
    out = _out_dir(cfg, flags)
    pts = _ranges(sec, flags, 1, "wiener")
    phi = fourier_sequence(mu)
    ap, res = wiener_decompose(mu)
    write_csv(out / "fourier.csv", phi, pts)
    write_csv(out / "atomic.csv", ap, pts)
    write_csv(out / "residual.csv", res, pts)
    _write_json(out / "report.json", {
        "N": N,
        "wiener_average": wiener_average(phi, N),
        "residual_average": wiener_average(res, N),
        "atomic_mass_squares": float(sum(a.mass ** 2 for a in mu.atoms)),
    })
    return 0


def cmd_density(cfg, basis, flags) -> int:
    from .density import DEFAULT_THRESHOLD, null_diagnostic

    sec = _section(cfg, "density")
    src = sec.get("sequence")
    if not isinstance(src, Mapping) or len(src) != 1:
        raise ConfigError("sequence must have exactly one of fourier, correlate, decompose_null",
                          location="density.sequence")
    kind, body = next(iter(src.items()))
    if kind == "fourier":
        from .measures import TorusMeasure, fourier_sequence
        s = fourier_sequence(_wrap("density.sequence.fourier", TorusMeasure.from_json, body, basis))
    elif kind == "correlate":
        from .corr import correlate
        s = correlate(_spec({"spec": body}, basis, "density.sequence.correlate"))
    elif kind == "decompose_null":
        from .corr import _split_terms, PhaseSum
        spec = _spec({"spec": body}, basis, "density.sequence.decompose_null")
        s = PhaseSum(_split_terms(spec.system, spec)[1], spec.d).handle("null_part")
    else:
        raise ConfigError(f"unknown sequence kind {kind!r}", location="density.sequence")
    schedule = parse_schedule(flags.schedule or sec.get("schedule", [100, 1000]))
    mode = sec.get("mode", "abs")
    threshold = float(sec.get("threshold", DEFAULT_THRESHOLD))
    report = _wrap("density", null_diagnostic, s, schedule, _bases(sec, flags), mode, threshold)
    _write_json(_out_dir(cfg, flags) / "report.json", report.to_json())
    return 0


def cmd_selftest(cfg, basis, flags) -> int:
    from .selftest import run_selftest

    sec = _section(cfg, "selftest") if cfg else {}
    seed = flags.seed if flags.seed is not None else int(sec.get("seed", 0))
    results = run_selftest(seed=seed, samples=int(sec.get("samples", 200)))
    ok = all(r["passed"] for r in results)
    payload = {"passed": ok, "checks": results}
    if flags.out or (cfg.get("output") if cfg else None):
        _write_json(_out_dir(cfg, flags) / "selftest.json", payload)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['detail']}")
    return 0 if ok else 1


COMMANDS = {
    "nilseq": cmd_nilseq, "gpoly": cmd_gpoly, "correlate": cmd_correlate,
    "decompose": cmd_decompose, "wiener": cmd_wiener, "density": cmd_density,
    "selftest": cmd_selftest,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, location="argv")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nilcorr", description="Nilsequence correlation experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "selftest", help="JSON config path")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        s.add_argument("--seed", type=_u64, help="seed for sampled box bases")
        s.add_argument("--range", action="append",
                       help='index range "a..b"; repeat once per dimension')
        s.add_argument("--schedule", help='box sides "N1,N2,..."')
    return p


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return v


def _emit(err: dict) -> None:
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    try:
        flags = build_parser().parse_args(argv)
        if flags.config:
            cfg, basis = load_config(flags.config)
        else:
            cfg, basis = {}, None
        return COMMANDS[flags.command](cfg, basis, flags)
    except (ResidualNotNull, QuadratureNotConverged) as e:
        _emit(e.to_dict())
        return 3
    except NilcorrError as e:
        _emit(e.to_dict())
        return 2
    except Exception as e:  # noqa: BLE001 - last-resort structured report
        _emit({"code": "internal", "message": f"{type(e).__name__}: {e}", "location": None})
        return 1


if __name__ == "__main__":
    sys.exit(main())
