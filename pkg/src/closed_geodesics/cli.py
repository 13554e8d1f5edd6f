"""Command-line entry point: ``closed-geodesics {find,spectrum,classify,degrees,verify}``.

Exit status: 0 success, 1 numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import geodesic_search as gs
from . import index_spectrum as isp
from . import loop_space as ls
from . import string_degree_ledger as sdl
from .errors import CatalogError, ClosedGeodesicError, DomainError, ModelDefinitionError
from .fileio import (FileFormatError, atomic_write, read_geodesic,
                     read_spectrum_csv, write_geodesic, write_spectrum_csv)
from .manifold_models import build_model, torus_winding_seed

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("closed_geodesics")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    model: str = "sphere"
    params: dict = field(default_factory=dict)
    N: int = 128
    m_max: int = 5
    tol: float = gs.TOLERANCE
    tau: float = isp.TAU
    seed: str | None = None
    winding: str | None = None
    method: str = "newton"
    isolated: bool = False
    cap: int = ls.ITERATE_CAP
    out: str | None = None

    def validate(self):
        if self.N < 64 or self.N & (self.N - 1):
            raise UsageError(f"N must be a power of two >= 64, got {self.N}")
        if self.m_max < 2:
            raise UsageError("m-max must be at least 2")
        if self.cap < 1:
            raise UsageError("cap must be positive")
        if self.method not in ("newton", "minimize"):
            raise UsageError(f"unknown method {self.method!r}")


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        try:
            return [float(v) for v in text.split(",")]
        except ValueError:
            pass
    return text


def _parse_params(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects key=value, got {item!r}")
        out[key.strip()] = _parse_value(value.strip())
    return out


def load_config(args) -> RunConfig:
    """Config file values first, then every flag the user actually passed."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        for k, v in data.items():
            setattr(cfg, k, v)
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None and f.name != "params":
            setattr(cfg, f.name, flag)
    params = _parse_params(getattr(args, "param", None))
    cfg.params = {**cfg.params, **params}
    cfg.validate()
    return cfg


def _emit(obj):
    print(json.dumps(obj, indent=2, default=str))


def cmd_find(args) -> int:
    cfg = load_config(args)
    model = build_model(cfg.model, **cfg.params)
    if cfg.winding is not None:
        if model.name != "torus":
            raise UsageError("--winding applies to the torus model only")
        try:
            p, q = (int(v) for v in cfg.winding.split(","))
        except ValueError:
            raise UsageError(f"--winding expects p,q, got {cfg.winding!r}") from None
        spec = torus_winding_seed(p, q)
        seed = ls.DiscreteLoop(spec.points(cfg.N), model.get_chart(spec.chart), tag=spec.seed_id)
    else:
        seed_id = cfg.seed or model.seeds[0].seed_id
        seed = gs.get_seed(model, seed_id, cfg.N)
    if cfg.method == "minimize":
        geo = gs.minimize(seed, model, tol=cfg.tol, isolated=cfg.isolated)
    else:
        geo = gs.refine_newton(seed, model, tol=cfg.tol, isolated=cfg.isolated)
    out = cfg.out or f"{model.name}_{geo.seed_id}_N{cfg.N}.geo"
    write_geodesic(out, geo)
    length = geo.length
    _emit({
        "model": model.name, "params": model.params, "seed": geo.seed_id, "N": cfg.N,
        "level": geo.level, "length": length, "length_minus_level": length - geo.level,
        "residual": geo.residual, "iterations": geo.iterations, "isolated_flag": geo.isolated_flag,
        "file": str(out),
    })
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = load_config(args)
    geo = read_geodesic(args.geodesic)
    spec = isp.iterate_spectrum(geo, cfg.m_max, geo.model, tau=cfg.tau, cap=cfg.cap)
    meta = {"model": geo.model.name, "seed": geo.seed_id, "level": f"{geo.level:.17g}"}
    out = cfg.out or str(Path(args.geodesic).with_suffix(".csv"))
    write_spectrum_csv(out, spec, meta)
    if spec.m_max < cfg.m_max:
        print(f"warning: {spec.m_max} of {cfg.m_max} rows written", file=sys.stderr)
    for reason in spec.failures.values():
        print(f"failure: {reason}", file=sys.stderr)
    _emit({
        "file": out, "rows": spec.m_max, "lambda": spec.lambdas, "nullity": spec.nullities,
        "bott_holds": isp.check_bott(spec).holds if spec.entries else None,
        "failures": spec.failures, "warnings": len(spec.warnings),
    })
    hard = any("unstable" in r or "kernel overlap" in r for r in spec.failures.values())
    return EXIT_NUMERICAL if hard or not spec.entries else EXIT_OK


COMMENTARY = {
    isp.GrowthKind.MINIMAL_SUM: [
        "index+nullity follows the minimal law m(lam1+nu1) - (m-1)(n-1): the growth forced by a "
        "non-nilpotent local level homology class under the Chas-Sullivan product, and the sum "
        "condition in Hingston's existence criterion for infinitely many closed geodesics."],
    isp.GrowthKind.MAXIMAL_INDEX: [
        "index follows the maximal law m lam1 + (m-1)(n-1): the growth forced by a non-nilpotent "
        "local level cohomology class under the Goresky-Hingston product (degree = lam1), and the "
        "index condition in Hingston's cohomological existence criterion."],
    isp.GrowthKind.NEITHER: [
        "neither extremal law holds: no local level class of this geodesic can be non-nilpotent "
        "under either product (if its iterates are isolated)."],
}
COMMENTARY[isp.GrowthKind.BOTH] = COMMENTARY[isp.GrowthKind.MINIMAL_SUM] + COMMENTARY[isp.GrowthKind.MAXIMAL_INDEX]


def cmd_classify(args) -> int:
    spec, meta, _ = read_spectrum_csv(args.csv, n=args.dim)
    result = isp.classify_growth(spec)
    payload = {
        "kind": result.kind.value, "m_max_checked": result.m_max_checked, "n": spec.n,
        "certificate": [r.__dict__ for r in result.certificate],
        "commentary": COMMENTARY[result.kind],
    }
    if args.json:
        _emit(payload)
    else:
        print(f"classification: {result.kind.value} (m = 1..{result.m_max_checked}, n = {spec.n})")
        print(" m  lam  nu  min_sum  ok   max_index  ok")
        for r in result.certificate:
            print(f"{r.m:2d} {r.index:4d} {r.nullity:3d} {r.minimal_sum:8d}  {'y' if r.minimal_sum_holds else 'n'}"
                  f" {r.maximal_index:10d}  {'y' if r.maximal_index_holds else 'n'}")
        for line in COMMENTARY[result.kind]:
            print(f"note: {line}")
    return EXIT_OK


def degrees_verdict(doc: dict) -> dict:
    """Ledger verdict for a hypothesis document {n, lambda, nullity, j, kind}."""
    try:
        hyp = sdl.SpectrumHypothesis(int(doc["n"]), doc["lambda"], doc["nullity"])
        j, kind = int(doc["j"]), sdl.Kind(doc["kind"])
    except KeyError as exc:
        raise UsageError(f"hypothesis document lacks field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"malformed hypothesis document: {exc}") from None
    cons = sdl.nonnilpotent_consistency(hyp, j, kind)
    verdict = {
        "n": hyp.n, "j": j, "kind": kind.value, "M": hyp.M,
        "power_degrees": [sdl.power_degree(kind, j, m, hyp.n) for m in range(1, hyp.M + 1)],
        "consistent": cons.consistent, "checked": cons.checked,
        "failed_m": cons.failed_m, "side": cons.side,
    }
    if cons.consistent:
        try:
            c = sdl.derive_conclusion(hyp, j, kind)
        except sdl.InsufficientHorizonError as exc:
            verdict["conclusion"] = {"error": str(exc)}
        else:
            verdict["conclusion"] = {
                "forced_j": c.forced_j, "law": c.law, "predicted": list(c.predicted),
                "observed": list(c.observed), "matches": c.matches,
                "certificates": [cert.__dict__ for cert in c.certificates],
            }
    return verdict


def cmd_degrees(args) -> int:
    try:
        doc = json.loads(Path(args.hypothesis).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read hypothesis {args.hypothesis}: {exc}") from None
    verdict = degrees_verdict(doc)
    text = json.dumps(verdict, indent=2)
    if args.out:
        atomic_write(args.out, text + "\n")
    print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_all
    results = run_all(echo=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="closed-geodesics", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags take precedence")
        p.add_argument("--out")

    p = sub.add_parser("find", help="find a closed geodesic from a catalog seed")
    common(p)
    p.add_argument("--model")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="model parameter, repeatable")
    p.add_argument("--seed")
    p.add_argument("--winding", help="torus winding p,q")
    p.add_argument("--N", type=int)
    p.add_argument("--method", choices=("newton", "minimize"))
    p.add_argument("--tol", type=float)
    p.add_argument("--isolated", action="store_true", default=None,
                   help="record the assumption that the orbit is isolated")
    p.set_defaults(func=cmd_find)

    p = sub.add_parser("spectrum", help="index/nullity of iterates as CSV")
    common(p)
    p.add_argument("geodesic")
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--cap", type=int, help="maximum number of points of an iterate")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("classify", help="growth regime of a spectrum CSV")
    p.add_argument("csv")
    p.add_argument("--dim", type=int, help="manifold dimension if the CSV lacks '# n:'")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("degrees", help="degree ledger verdict for a spectrum hypothesis")
    p.add_argument("hypothesis")
    p.add_argument("--out")
    p.set_defaults(func=cmd_degrees)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CatalogError, ModelDefinitionError, FileFormatError, sdl.MalformedHypothesisError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ClosedGeodesicError, DomainError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
