"""Command line front end: ``hqwillmore report|sweep|backlund|verify|synth``.

Exit codes
  0  every check passed
  1  a check failed, or a curve could not be built (not full, osculant, ...)
  2  usage, configuration or spec parse error
  3  the requested Baecklund transform is not defined
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import structure as st
from .backlund import (backward_backlund, checks_passed, flag_lemma_residual, forward_backlund, result_to_json,
                       sphere_sequence, verify_backlund)
from .corpus import corpus
from .curve import CurveSpec, build_curve, dual_curve, load_spec, vanishing_orders
from .domain import DomainMesh, build_mesh
from .errors import ConfigError, FlagUnavailable, HQError
from .functional import (FOUR_PI, INTEGRALITY_GAP, Report, chern_degree, degree, energy_functional,
                         harmonicity_residual, pluecker_residual, quantization_check, willmore_energy)

DEFAULT_TOL = {
    "integrality": INTEGRALITY_GAP,   # max |deg - round(deg)|
    "quantization": 0.005,            # relative distance of W to 4 pi k
    "square": 1e-6,                   # max |S^2 + 1|
    "pluecker": 0.1,                  # pre-rounding Pluecker residual
    "bookkeeping": 1e-3,              # |E + 4 pi deg - 2W| relative to max(E, 4 pi)
    "harmonicity": 1e-4,              # soft: max node norm of d*A
    "fQ": 1e-5,
    "energy": 5e-3,
    "involution": 1e-6,
    "minus_S": 1e-6,
}

HARD_CHECKS = ("square", "integrality", "quantization")


@dataclass
class RunConfig:
    command: str
    spec: Path | None = None
    depth: int = 4
    depths: list[int] = field(default_factory=list)
    tol: dict = field(default_factory=lambda: dict(DEFAULT_TOL))
    out: Path | None = None
    direction: str = "backward"

    def validate(self) -> None:
        if self.command != "synth" and self.spec is None:
            raise ConfigError(f"{self.command} needs --spec")
        for d in [self.depth, *self.depths]:
            if not isinstance(d, int) or not 1 <= d <= 10:
                raise ConfigError(f"mesh depth must be an integer in [1, 10], got {d!r}")
        if self.command == "sweep" and len(self.depths) < 3:
            raise ConfigError("sweep needs at least three depths (--depths a,b,c)")
        for k, v in self.tol.items():
            if not (isinstance(v, float) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"tolerance {k} must be a positive number")


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def structural_residuals(curve, hopf: st.HopfFields, mesh: DomainMesh, dual_hopf: st.HopfFields | None) -> dict:
    """Finite-difference residuals of the identities every canonical structure satisfies."""
    rec = st.reconstruction_residual(hopf, mesh)
    out = {
        "reconstruction_residual": max(rec.values()),
        "curvature_residual": st.curvature_check(hopf, mesh),
        "flatness_residual": st.associated_family_flatness(hopf, 0.7, mesh),
        "conformality_residual": st.conformality_residual(hopf, mesh),
        "adjoint_residual": math.nan,
    }
    if dual_hopf is not None:
        A_star = dual_hopf.A.sample(mesh)
        Q = hopf.Q.sample(mesh)
        out["adjoint_residual"] = float(np.abs(A_star + np.conj(np.swapaxes(Q, -1, -2))).max())
    return out


def build_report(spec: CurveSpec, depth: int, tol: dict | None = None, spec_path: str = "",
                 structural: bool = True) -> Report:
    """Run construct -> flag -> S -> Hopf -> functionals on one spec."""
    tol = {**DEFAULT_TOL, **(tol or {})}
    mesh = build_mesh(depth)
    curve = build_curve(spec, mesh)
    S = curve.S(mesh)
    hopf = st.hopf_fields(S)
    sq = st.square_residual(S, mesh)
    W = willmore_energy(hopf, mesh)
    E_direct, E_split = energy_functional(hopf, mesh)
    deg = degree(hopf, mesh, tol["integrality"])
    deg_L = chern_degree(curve.osculating()[0], mesh, tol["integrality"])
    zeros = vanishing_orders(curve, mesh)
    plk, plk_raw = pluecker_residual(curve.n, deg, deg_L, zeros.ord_H)
    harm_A, harm_Q = harmonicity_residual(hopf, mesh)
    try:
        dual = dual_curve(curve, mesh)
        dual_hopf = st.hopf_fields(dual.S(mesh))
        W_dual = willmore_energy(dual_hopf, mesh)
    except FlagUnavailable:
        dual_hopf, W_dual = None, math.nan
    k, off = quantization_check(W)
    k_dual, off_dual = quantization_check(W_dual) if math.isfinite(W_dual) else (0, math.nan)
    bookkeeping = abs(E_direct + FOUR_PI * deg.raw - 2 * W)
    dual_res = abs(W - W_dual - FOUR_PI * deg.raw) if math.isfinite(W_dual) else math.nan
    extra = structural_residuals(curve, hopf, mesh, dual_hopf) if structural else {}

    def quantized(offset, mult):
        return bool(offset <= tol["quantization"] * FOUR_PI * max(mult, 1))

    checks = {
        "square": bool(sq <= tol["square"]),
        "integrality": bool(deg.gap <= tol["integrality"] and deg_L.gap <= tol["integrality"]),
        "quantization": quantized(off, k),
        "pluecker": bool(plk == 0 and plk_raw <= tol["pluecker"]),
        "bookkeeping": bool(bookkeeping <= tol["bookkeeping"] * max(abs(E_direct), FOUR_PI)),
        "harmonicity": bool(harm_A <= tol["harmonicity"]),
    }
    if math.isfinite(W_dual):
        checks["quantization_dual"] = quantized(off_dual, k_dual)
        checks["dual_multiple"] = bool(k_dual == k - deg.rounded)
    return Report(
        spec=spec_path, label=curve.label, n=curve.n, depth=depth,
        W_f=W, W_dual=W_dual, E_S=E_direct, E_S_split=E_split,
        deg_VS=deg.raw, deg_VS_int=deg.rounded, deg_VS_abs=abs(deg.rounded),
        deg_L=deg_L.raw, deg_L_int=deg_L.rounded, ord_H=zeros.ord_H,
        pluecker_residual=plk, pluecker_residual_raw=plk_raw,
        harmonicity_residual=harm_A, harmonicity_residual_Q=harm_Q,
        bookkeeping_residual=bookkeeping, dual_energy_residual=dual_res,
        quantization_multiple=k, quantization_offset=off,
        quantization_multiple_dual=k_dual, quantization_offset_dual=off_dual,
        square_residual=sq, tolerances=tol, checks=checks,
        provenance={"spec": spec_path, "content_hash": spec.content_hash(), "depth": depth,
                    "nodes": mesh.size, "version": __version__},
        zeros=zeros.to_json()["zeros"], **extra,
    )


def hard_failure(report: Report) -> bool:
    return not all(report.checks.get(name, True) for name in HARD_CHECKS)


def richardson_orders(values: list[float]) -> list[float]:
    """log2 of successive residual ratios (the mesh size halves per depth)."""
    out = [math.nan]
    for a, b in zip(values[:-1], values[1:]):
        if a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b):
            out.append(math.log2(a / b))
        else:
            out.append(math.nan)
    return out


RESIDUAL_COLUMNS = ("harmonicity_residual", "harmonicity_residual_Q", "bookkeeping_residual", "dual_energy_residual",
                    "reconstruction_residual", "curvature_residual", "flatness_residual",
                    "adjoint_residual", "conformality_residual", "square_residual")


def sweep_rows(reports: list[Report]) -> tuple[list[str], list[list]]:
    scalars = [r.scalars() for r in reports]
    names = list(scalars[0])
    orders = {c: richardson_orders([s[c] for s in scalars]) for c in RESIDUAL_COLUMNS if c in names}
    header = ["depth", *names, *(f"{c}_order" for c in orders)]
    rows = []
    for i, (r, s) in enumerate(zip(reports, scalars)):
        rows.append([r.depth, *(s[c] for c in names), *(orders[c][i] for c in orders)])
    return header, rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _dump(obj, out: Path | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return None if not np.isfinite(o) else float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serialisable: {type(o).__name__}")


def cmd_report(cfg: RunConfig) -> int:
    spec = load_spec(cfg.spec)
    rep = build_report(spec, cfg.depth, cfg.tol, str(cfg.spec))
    _dump(rep.to_json(), cfg.out)
    return 1 if hard_failure(rep) or not rep.passed else 0


def cmd_sweep(cfg: RunConfig) -> int:
    spec = load_spec(cfg.spec)
    reports = [build_report(spec, d, cfg.tol, str(cfg.spec)) for d in cfg.depths]
    header, rows = sweep_rows(reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    if cfg.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        cfg.out.write_text(buf.getvalue())
    return 1 if any(hard_failure(r) for r in reports) else 0


def cmd_backlund(cfg: RunConfig) -> int:
    spec = load_spec(cfg.spec)
    mesh = build_mesh(cfg.depth)
    curve = build_curve(spec, mesh)
    step = forward_backlund if cfg.direction == "forward" else backward_backlund
    res = step(curve, mesh)  # No*Transform propagates as exit 3
    checks = verify_backlund(res, mesh, cfg.tol)
    out = {"schema": 1, "transform": result_to_json(res, mesh, spec), "checks": checks,
           "provenance": {"spec": str(cfg.spec), "content_hash": spec.content_hash(), "depth": cfg.depth,
                          "version": __version__}}
    _dump(out, cfg.out)
    return 0 if checks_passed(checks) else 1


def verify_spec(spec: CurveSpec, depth: int, tol: dict | None = None, spec_path: str = "") -> dict:
    """Report checks plus both transforms, the sphere sequence and the flag lemma."""
    tol = {**DEFAULT_TOL, **(tol or {})}
    rep = build_report(spec, depth, tol, spec_path)
    mesh = build_mesh(depth)
    curve = build_curve(spec, mesh)
    out = {"report": {k: bool(v) for k, v in rep.checks.items()}}
    for name, step in (("backward", backward_backlund), ("forward", forward_backlund)):
        try:
            res = step(curve, mesh)
        except HQError as exc:
            out[name] = {"defined": False, "reason": str(exc)}
            continue
        checks = verify_backlund(res, mesh, tol)
        out[name] = {"defined": True, "kind": res.kind, "pass": checks_passed(checks), "checks": checks}
    seq = sphere_sequence(curve, mesh)
    out["sphere_sequence"] = {"length": len(seq), "bound": curve.n, "pass": len(seq) <= curve.n,
                              "kinds": [r.kind for r in seq]}
    lemma = flag_lemma_residual(curve, mesh)
    out["flag_lemma"] = {"value": lemma, "pass": bool(lemma <= 1e-6)}
    return out


def _verify_passed(result: dict) -> bool:
    ok = all(result["report"].values())
    for name in ("backward", "forward"):
        if result[name].get("defined"):
            ok &= result[name]["pass"]
    return bool(ok and result["sphere_sequence"]["pass"] and result["flag_lemma"]["pass"])


def cmd_verify(cfg: RunConfig) -> int:
    spec = load_spec(cfg.spec)
    result = verify_spec(spec, cfg.depth, cfg.tol, str(cfg.spec))
    result["pass"] = _verify_passed(result)
    _dump({"schema": 1, **result}, cfg.out)
    return 0 if result["pass"] else 1


def write_corpus(directory: Path) -> list[Path]:
    """Write every shipped example as a spec file; derived members point at their parents."""
    directory.mkdir(parents=True, exist_ok=True)
    members = corpus()
    stems = {id(spec): stem for stem, spec in members.items()}
    written = []
    for stem, spec in members.items():
        if spec.parent is not None and id(spec.parent) in stems:
            spec.parent_path = f"{stems[id(spec.parent)]}.json"
            data = spec.to_json(inline_parent=False)
        else:
            data = spec.to_json()
        path = directory / f"{stem}.json"
        path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
        written.append(path)
    return written


def cmd_synth(cfg: RunConfig) -> int:
    for p in write_corpus(cfg.out or Path("docs/specs")):
        print(p)
    return 0


COMMANDS = {"report": cmd_report, "sweep": cmd_sweep, "backlund": cmd_backlund,
            "verify": cmd_verify, "synth": cmd_synth}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _tol_pair(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or name not in DEFAULT_TOL:
        raise argparse.ArgumentTypeError(f"expected NAME=VAL with NAME in {sorted(DEFAULT_TOL)}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name} is not a number: {value!r}") from None


def _depth_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth list {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with 2 via ConfigError
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hqwillmore", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"hqwillmore {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (("report", "full report JSON for one curve"),
                           ("sweep", "CSV of report scalars across depths with convergence orders"),
                           ("backlund", "Baecklund transform and its residual table"),
                           ("verify", "report checks plus transforms, sphere sequence and flag lemma"),
                           ("synth", "write the example corpus as spec files")):
        s = sub.add_parser(name, help=helptext)
        if name != "synth":
            s.add_argument("--spec", type=Path, required=True)
            s.add_argument("--tol", type=_tol_pair, action="append", default=[], metavar="NAME=VAL")
        if name in ("report", "backlund", "verify"):
            s.add_argument("--depth", type=int, default=4)
        if name == "sweep":
            s.add_argument("--depths", type=_depth_list, required=True)
        if name == "backlund":
            s.add_argument("--direction", choices=("fwd", "bwd"), default="bwd")
        s.add_argument("--out", type=Path)
    return p


def parse_config(argv: list[str] | None) -> RunConfig:
    ns = make_parser().parse_args(argv)
    tol = dict(DEFAULT_TOL)
    tol.update(dict(getattr(ns, "tol", [])))
    cfg = RunConfig(command=ns.command, spec=getattr(ns, "spec", None), depth=getattr(ns, "depth", 4),
                    depths=getattr(ns, "depths", []), tol=tol, out=ns.out,
                    direction="forward" if getattr(ns, "direction", "bwd") == "fwd" else "backward")
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
        return COMMANDS[cfg.command](cfg)
    except HQError as exc:
        print(f"hqwillmore: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
