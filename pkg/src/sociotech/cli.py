"""Command-line entry point.

    sociotech fit   --data <csv> --model <kind> [--fit-space log|linear] [--slice a:b] --out <dir>
    sociotech macro --params a,b,c --init N0,T0,t0 --t-end T [--transition ts,K,r] [--out <dir>]
    sociotech sim   ants|wiki|rank|activate --config <json> [--seed n] --out <dir>

Exit codes: 0 ok, 1 usage, 2 input or data error, 3 fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from referencing import Registry, Resource

from . import growthfit, macrodynamics, medium, qualstig, quantstig, timeseries
from .errors import ConfigInvalid, NoConvergence, SociotechError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOCONV = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str, n: int, flag: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"{flag} expects {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{flag} expects {n} comma-separated finite numbers, got {text!r}")
    return vals


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- fit


def _load_series(spec: str) -> timeseries.TimeSeries:
    path = Path(spec)
    if path.is_file():
        try:
            return timeseries.load_csv(path.read_bytes(), name=path.stem)
        except SociotechError as exc:
            raise DataError(f"{spec}: {type(exc).__name__}: {exc}") from None
    name = path.name.removesuffix(".csv")
    if name in timeseries.BUNDLED:
        return timeseries.load_bundled(name)
    raise DataError(f"{spec}: no such file and not a bundled dataset")


def _parse_slice(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    try:
        if not sep:
            raise ValueError
        a, b = float(lo), float(hi)
    except ValueError:
        raise UsageError(f"--slice expects a:b, got {text!r}") from None
    if not a < b:
        raise UsageError(f"--slice needs a < b, got {text!r}")
    return a, b


def cmd_fit(args) -> int:
    series = _load_series(args.data)
    if args.slice:
        a, b = _parse_slice(args.slice)
        series = timeseries.slice(series, a, b)
    opts = growthfit.FitOptions(
        fit_space=args.fit_space, alpha=args.alpha, n_stages=args.stages,
        seed=args.seed, n_resamples=args.resamples,
    )
    try:
        result = growthfit.fit(args.model, series, opts)
    except SociotechError as exc:
        raise DataError(f"{type(exc).__name__}: {exc}") from None

    out = _out_dir(args)
    _write_json(out / "fit.json", result.to_json())
    fitted = np.asarray(result.model.value(series.t), dtype=float)
    lines = ["t,observed,fitted,residual"]
    for t, y, f in zip(series.t, series.values, fitted):
        r = math.log(y) - math.log(f) if result.fit_space == "log" else y - f
        lines.append(f"{t!r},{y!r},{f!r},{r!r}")
    (out / "residuals.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if args.singularity:
        if args.model != "hyperbolic":
            raise UsageError("--singularity requires --model hyperbolic")
        try:
            est = growthfit.estimate_singularity(series, args.alpha, opts)
        except NoConvergence as exc:
            print(f"singularity: {exc}", file=sys.stderr)
            return EXIT_NOCONV
        _write_json(out / "singularity.json", est.to_json())

    if not result.converged:
        print("fit did not converge; best point written", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


# ---------------------------------------------------------------- macro


def cmd_macro(args) -> int:
    a, b, c = _floats(args.params, 3, "--params")
    N0, T0, t0 = _floats(args.init, 3, "--init")
    if not args.t_end > t0:
        raise UsageError(f"--t-end {args.t_end} must be after the start time {t0}")
    try:
        params = macrodynamics.MacroParams(a, b, c)
    except SociotechError as exc:
        raise UsageError(f"--params: {exc}") from None
    init = macrodynamics.MacroState(t0, N0, T0)
    h0 = args.h0 if args.h0 is not None else (args.t_end - t0) / 1000.0
    cfg = macrodynamics.IntegratorConfig(
        method=args.method, h0=h0, t_end=args.t_end, min_step=min(1e-9, h0 / 10)
    )
    try:
        if args.transition:
            ts_, K, r = _floats(args.transition, 3, "--transition")
            switch = macrodynamics.RegimeSwitch(ts_, K, r)
            traj = macrodynamics.integrate_with_transition(init, params, switch, cfg)
        else:
            traj = macrodynamics.integrate(init, params, cfg)
    except ConfigInvalid as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    (out / "trajectory.csv").write_text(traj.to_csv(), encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------- sim


def _registry() -> Registry:
    doc = json.loads(_schema_text("medium"))
    return Registry().with_resource("medium.json", Resource.from_contents(doc))


def _schema_text(name: str) -> str:
    return resources.files("sociotech.schemas").joinpath(f"{name}.json").read_text("utf-8")


def load_config(kind: str, path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(
        json.loads(_schema_text(kind)), registry=_registry()
    )
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.path) or "<root>"
        raise DataError(f"{path}: {where}: {err.message}")
    return doc


def _sim_ants(doc, seed, out: Path) -> None:
    med = medium.Medium.from_dict(doc["medium"])
    fields = {k: doc[k] for k in ("n_ants", "alpha", "beta", "rho", "Q", "n_iterations") if k in doc}
    cfg = quantstig.AntConfig(nest=doc["nest"], food=doc["food"], seed=seed, **fields)
    report = quantstig.run_foraging(med, cfg)
    _write_json(out / "foraging_report.json", report.to_json())


def _sim_wiki(doc, seed, out: Path) -> None:
    cfg = qualstig.WikiConfig(seed=seed, **doc)
    report = qualstig.run_wiki_sim(cfg)
    _write_json(out / "quality_report.json", report.to_json())
    (out / "history.json").write_text(qualstig.history_json(report.article), encoding="utf-8")


def _sim_rank(doc, seed, out: Path) -> None:
    med = medium.Medium.from_dict(doc["medium"])
    scores = quantstig.rank_nodes(med, doc.get("damping", 0.85), doc.get("tol", 1e-12))
    (out / "ranking.csv").write_text(quantstig.ranking_csv(scores), encoding="utf-8")


def _sim_activate(doc, seed, out: Path) -> None:
    med = medium.Medium.from_dict(doc["medium"])
    init = quantstig.ActivationState(doc["init"], doc.get("decay", 0.5), doc.get("threshold", 0.0))
    final = quantstig.spread_activation(med, init, doc["steps"])
    _write_json(out / "activation.json", {
        "values": final.values, "decay": final.decay,
        "threshold": final.threshold, "steps": doc["steps"],
    })


SIMS = {"ants": _sim_ants, "wiki": _sim_wiki, "rank": _sim_rank, "activate": _sim_activate}
STOCHASTIC = {"ants", "wiki"}


def cmd_sim(args) -> int:
    if args.kind in STOCHASTIC and args.seed is None:
        raise UsageError(f"sim {args.kind} requires --seed")
    doc = load_config(args.kind, args.config)
    out = _out_dir(args)
    try:
        SIMS[args.kind](doc, args.seed if args.seed is not None else 0, out)
    except (SociotechError, ValueError, KeyError) as exc:
        raise DataError(f"{args.config}: {type(exc).__name__}: {exc}") from None
    return EXIT_OK


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sociotech", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a growth law to a t,value CSV")
    f.add_argument("--data", required=True, help="CSV path or bundled dataset name")
    f.add_argument("--model", required=True, choices=growthfit.KINDS)
    f.add_argument("--fit-space", choices=("log", "linear"))
    f.add_argument("--slice", help="keep a <= t <= b, written a:b (use --slice=-500:1962)")
    f.add_argument("--alpha", type=float, help="fix the hyperbolic exponent")
    f.add_argument("--stages", type=int, default=2, help="stages for --model escalation")
    f.add_argument("--singularity", action="store_true",
                   help="also bootstrap the pole date into singularity.json")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--resamples", type=int, default=200)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("macro", help="integrate the coupled population/technology model")
    m.add_argument("--params", required=True, help="a,b,c")
    m.add_argument("--init", required=True, help="N0,T0,t0")
    m.add_argument("--t-end", required=True, type=float)
    m.add_argument("--transition", help="t_switch,K_pop,r_pop")
    m.add_argument("--method", choices=("adaptive", "rk4"), default="adaptive")
    m.add_argument("--h0", type=float)
    m.add_argument("--out", default=".")
    m.set_defaults(func=cmd_macro)

    s = sub.add_parser("sim", help="run a stigmergy simulation from a JSON config")
    s.add_argument("kind", choices=sorted(SIMS))
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sim)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sociotech {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"sociotech {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
